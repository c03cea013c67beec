//! Multi-layer, multi-region per-interval best-response dynamics over the
//! network SIR.
//!
//! Regions form a jurisdiction forest: leaves carry epidemic state and rows
//! of the excitation matrix; non-leaf regions (states, a federal layer)
//! aggregate their descendants and couple to them only through the
//! non-compliance cost. Each interval plays out in Stackelberg order: roots
//! choose first, then each layer below against its parent's fresh choice,
//! with same-layer regions frozen at their previous policies ("in-game
//! learning"). A region evaluates a candidate intensity by holding it
//! constant from the current day to the horizon — its whole subtree adopting
//! it, everyone else frozen — and pricing the resulting terminal epidemic
//! size.

use serde::{Deserialize, Serialize};

use crate::cost::{interval_cost, CostBreakdown, CostWeights};
use crate::epidemic::{step_network_unchecked, ExcitationMatrix, SirParams, SirState, Trajectory};
use crate::error::{Error, Result};
use crate::policy::{IntensitySet, PolicySchedule};

/// One region of the jurisdiction forest, as declared by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionNode {
    pub id: String,
    /// Population; used to weight aggregation over leaves. Ignored for
    /// non-leaf regions, whose population is the sum of their leaves.
    pub population: f64,
    /// Initial compartment fractions; required exactly for leaf regions.
    pub initial: Option<SirState>,
    pub weights: CostWeights,
    pub parent: Option<String>,
}

/// A validated forest of regions. Node order follows the declaration order,
/// which also fixes the (deterministic) commit order within each layer.
#[derive(Debug, Clone)]
pub struct RegionTree {
    nodes: Vec<RegionNode>,
    parent_idx: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    /// Leaf node indices in declaration order; row order of the excitation
    /// matrix.
    leaves: Vec<usize>,
    /// For every node, its descendant leaves (itself when a leaf).
    descendant_leaves: Vec<Vec<usize>>,
}

impl RegionTree {
    pub fn new(nodes: Vec<RegionNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidTree("no regions declared".into()));
        }
        let mut index_of = std::collections::HashMap::new();
        for (idx, node) in nodes.iter().enumerate() {
            if index_of.insert(node.id.clone(), idx).is_some() {
                return Err(Error::InvalidTree(format!("duplicate region id `{}`", node.id)));
            }
        }
        let mut parent_idx = vec![None; nodes.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (idx, node) in nodes.iter().enumerate() {
            if let Some(pid) = &node.parent {
                let p = *index_of.get(pid).ok_or_else(|| {
                    Error::InvalidTree(format!(
                        "region `{}` names unknown parent `{pid}`",
                        node.id
                    ))
                })?;
                if p == idx {
                    return Err(Error::InvalidTree(format!(
                        "region `{}` is its own parent",
                        node.id
                    )));
                }
                parent_idx[idx] = Some(p);
                children[p].push(idx);
            }
        }
        // depths; a walk longer than the node count means a parent cycle
        let mut depth = vec![0usize; nodes.len()];
        for idx in 0..nodes.len() {
            let mut d = 0;
            let mut cursor = parent_idx[idx];
            while let Some(p) = cursor {
                d += 1;
                if d > nodes.len() {
                    return Err(Error::InvalidTree("parent links form a cycle".into()));
                }
                cursor = parent_idx[p];
            }
            depth[idx] = d;
        }
        let leaves: Vec<usize> = (0..nodes.len())
            .filter(|&idx| children[idx].is_empty())
            .collect();
        for &leaf in &leaves {
            if nodes[leaf].initial.is_none() {
                return Err(Error::InvalidTree(format!(
                    "leaf region `{}` has no initial state",
                    nodes[leaf].id
                )));
            }
            if !(nodes[leaf].population > 0.0) {
                return Err(Error::InvalidTree(format!(
                    "leaf region `{}` needs a positive population",
                    nodes[leaf].id
                )));
            }
        }
        for idx in 0..nodes.len() {
            let is_root = parent_idx[idx].is_none();
            if is_root && !nodes[idx].weights.is_top_layer() {
                return Err(Error::InvalidWeights(format!(
                    "root region `{}` needs kappa + eta = 1",
                    nodes[idx].id
                )));
            }
        }
        let mut descendant_leaves: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (leaf_row, &leaf) in leaves.iter().enumerate() {
            let mut cursor = Some(leaf);
            while let Some(idx) = cursor {
                descendant_leaves[idx].push(leaf_row);
                cursor = parent_idx[idx];
            }
        }
        Ok(Self {
            nodes,
            parent_idx,
            children,
            depth,
            leaves,
            descendant_leaves,
        })
    }

    pub fn nodes(&self) -> &[RegionNode] {
        &self.nodes
    }

    pub fn leaf_ids(&self) -> Vec<&str> {
        self.leaves.iter().map(|&idx| self.nodes[idx].id.as_str()).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_leaf(&self, idx: usize) -> bool {
        self.children[idx].is_empty()
    }

    fn leaf_states(&self) -> Vec<SirState> {
        self.leaves
            .iter()
            .map(|&idx| self.nodes[idx].initial.expect("validated"))
            .collect()
    }
}

/// Population-weighted mean of a non-leaf region's descendant leaves.
pub fn aggregate_parent_state(
    tree: &RegionTree,
    node_id: &str,
    leaf_states: &[SirState],
) -> Result<SirState> {
    let idx = tree
        .nodes
        .iter()
        .position(|n| n.id == node_id)
        .ok_or_else(|| Error::InvalidTree(format!("unknown region `{node_id}`")))?;
    if tree.is_leaf(idx) {
        return Err(Error::InvalidTree(format!(
            "region `{node_id}` is a leaf; aggregation applies to parent regions"
        )));
    }
    if leaf_states.len() != tree.n_leaves() {
        return Err(Error::DimensionMismatch(format!(
            "{} leaf states for {} leaves",
            leaf_states.len(),
            tree.n_leaves()
        )));
    }
    let rows = &tree.descendant_leaves[idx];
    let total: f64 = rows
        .iter()
        .map(|&row| tree.nodes[tree.leaves[row]].population)
        .sum();
    if !(total > 0.0) {
        return Err(Error::InvalidTree(format!(
            "region `{node_id}` has zero total population"
        )));
    }
    let mut s = 0.0;
    let mut i = 0.0;
    let mut r = 0.0;
    for &row in rows {
        let w = tree.nodes[tree.leaves[row]].population / total;
        s += w * leaf_states[row].s;
        i += w * leaf_states[row].i;
        r += w * leaf_states[row].r;
    }
    Ok(SirState { s, i, r })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub intensity_set: IntensitySet,
    /// Interval length in days.
    pub dt: u32,
    /// Game horizon in days; a multiple of `dt`.
    pub horizon: u32,
}

/// Cost of one candidate intensity evaluated during one interval, kept for
/// auditability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub interval: u32,
    pub region: String,
    pub alpha: f64,
    pub cost: CostBreakdown,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    /// Chosen schedule per region (every region, including non-leaf layers),
    /// in declaration order.
    pub schedules: Vec<(String, PolicySchedule)>,
    /// Daily trajectory per leaf region, in leaf order.
    pub trajectories: Vec<(String, Trajectory)>,
    /// Every candidate evaluation of the whole game.
    pub log: Vec<CandidateRecord>,
}

struct GameCtx<'a> {
    tree: &'a RegionTree,
    params: &'a SirParams,
    k: &'a ExcitationMatrix,
    levels: &'a [f64],
    dt: u32,
    horizon: u32,
}

impl GameCtx<'_> {
    /// Forward-run the network from `states`, holding every leaf under
    /// `node` at `candidate` and every other leaf at its current policy,
    /// then price the candidate for `node`.
    fn candidate_cost(
        &self,
        node: usize,
        candidate: f64,
        fresh_parent: Option<f64>,
        states: &[SirState],
        leaf_policies: &[f64],
        day: u32,
    ) -> Result<CostBreakdown> {
        let mut alphas = leaf_policies.to_vec();
        for &row in &self.tree.descendant_leaves[node] {
            alphas[row] = candidate;
        }
        let mut rolled: Vec<SirState> = states.to_vec();
        for _ in day..self.horizon {
            rolled = step_network_unchecked(&rolled, self.params, self.k, &alphas);
        }
        let r_at_t = if self.tree.is_leaf(node) {
            let row = self.tree.descendant_leaves[node][0];
            rolled[row].r
        } else {
            aggregate_parent_state(self.tree, &self.tree.nodes[node].id, &rolled)?.r
        };
        interval_cost(
            candidate,
            fresh_parent,
            &self.tree.nodes[node].weights,
            self.dt,
            self.horizon,
            r_at_t,
        )
    }
}

/// Play the per-interval hierarchical game over `horizon / dt` intervals.
///
/// Interval 0 runs under the initial no-control policies; from interval 1 on,
/// each layer best-responds top-down. Ties break toward the larger intensity
/// (the less restrictive choice).
pub fn run_game(
    tree: &RegionTree,
    params: &SirParams,
    k: &ExcitationMatrix,
    config: &GameConfig,
) -> Result<GameOutcome> {
    if config.dt == 0 || config.horizon == 0 || !config.horizon.is_multiple_of(config.dt) {
        return Err(Error::InvalidParams(format!(
            "game horizon {} must be a positive multiple of dt = {}",
            config.horizon, config.dt
        )));
    }
    if k.len() != tree.n_leaves() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} excitation matrix for {} leaf regions",
            k.len(),
            k.len(),
            tree.n_leaves()
        )));
    }
    let ctx = GameCtx {
        tree,
        params,
        k,
        levels: config.intensity_set.levels(),
        dt: config.dt,
        horizon: config.horizon,
    };

    let n_nodes = tree.nodes().len();
    let n_intervals = (config.horizon / config.dt) as usize;
    // interval 0: no control everywhere
    let mut node_policies = vec![1.0f64; n_nodes];
    let mut stage_values: Vec<Vec<f64>> = vec![vec![1.0]; n_nodes];
    let mut log = Vec::new();

    let mut states = tree.leaf_states();
    let mut trajectories: Vec<Trajectory> = states
        .iter()
        .map(|&st| Trajectory {
            states: vec![st],
            intensities: Vec::new(),
        })
        .collect();

    let mut leaf_policies: Vec<f64> = tree
        .leaves
        .iter()
        .map(|&idx| node_policies[idx])
        .collect();
    let advance = |states: &mut Vec<SirState>,
                   trajectories: &mut Vec<Trajectory>,
                   leaf_policies: &[f64]| {
        for _ in 0..config.dt {
            *states = step_network_unchecked(states, params, k, leaf_policies);
            for (row, traj) in trajectories.iter_mut().enumerate() {
                traj.states.push(states[row]);
                traj.intensities.push(leaf_policies[row]);
            }
        }
    };
    advance(&mut states, &mut trajectories, &leaf_policies);

    // layers top-down; within a layer, declaration order
    let max_depth = tree.depth.iter().copied().max().unwrap_or(0);
    let layer_order: Vec<Vec<usize>> = (0..=max_depth)
        .map(|d| (0..n_nodes).filter(|&idx| tree.depth[idx] == d).collect())
        .collect();

    for interval in 1..n_intervals {
        let day = interval as u32 * config.dt;
        let mut fresh = node_policies.clone();
        for layer in &layer_order {
            for &node in layer {
                let fresh_parent = tree.parent_idx[node].map(|p| fresh[p]);
                let mut best: Option<(f64, f64, CostBreakdown)> = None;
                let mut records = Vec::with_capacity(ctx.levels.len());
                for &candidate in ctx.levels {
                    let cost = ctx.candidate_cost(
                        node,
                        candidate,
                        fresh_parent,
                        &states,
                        &leaf_policies,
                        day,
                    )?;
                    // ascending sweep with non-strict update: ties keep the
                    // larger (less strict) intensity
                    let take = match &best {
                        None => true,
                        Some((best_total, _, _)) => cost.total <= *best_total,
                    };
                    if take {
                        best = Some((cost.total, candidate, cost));
                    }
                    records.push((candidate, cost));
                }
                let (_, chosen, _) = best.expect("intensity set is nonempty");
                for (candidate, cost) in records {
                    log.push(CandidateRecord {
                        interval: interval as u32,
                        region: tree.nodes[node].id.clone(),
                        alpha: candidate,
                        cost,
                        chosen: candidate == chosen,
                    });
                }
                fresh[node] = chosen;
            }
        }
        node_policies = fresh;
        for (row, &leaf) in tree.leaves.iter().enumerate() {
            leaf_policies[row] = node_policies[leaf];
        }
        for (idx, values) in stage_values.iter_mut().enumerate() {
            values.push(node_policies[idx]);
        }
        advance(&mut states, &mut trajectories, &leaf_policies);
    }

    let schedules = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(idx, node)| {
            let schedule =
                PolicySchedule::new(stage_values[idx].clone(), config.dt, config.horizon)
                    .expect("game stages form a valid schedule");
            (node.id.clone(), schedule)
        })
        .collect();
    let trajectories = tree
        .leaves
        .iter()
        .zip(trajectories)
        .map(|(&leaf, traj)| (tree.nodes[leaf].id.clone(), traj))
        .collect();
    Ok(GameOutcome {
        schedules,
        trajectories,
        log,
    })
}

/// Best response of one region for one interval: the intensity minimizing
/// its interval cost given frozen sibling policies and the parent's fresh
/// choice, with the candidate held constant to the horizon.
#[allow(clippy::too_many_arguments)]
pub fn best_response(
    tree: &RegionTree,
    params: &SirParams,
    k: &ExcitationMatrix,
    config: &GameConfig,
    region_id: &str,
    interval: u32,
    leaf_states: &[SirState],
    leaf_policies: &[f64],
    fresh_parent: Option<f64>,
) -> Result<f64> {
    let node = tree
        .nodes
        .iter()
        .position(|n| n.id == region_id)
        .ok_or_else(|| Error::InvalidTree(format!("unknown region `{region_id}`")))?;
    if leaf_states.len() != tree.n_leaves() || leaf_policies.len() != tree.n_leaves() {
        return Err(Error::DimensionMismatch(
            "one state and one policy per leaf region".into(),
        ));
    }
    let day = interval * config.dt;
    if day >= config.horizon {
        return Err(Error::InvalidParams(format!(
            "interval {interval} starts at day {day}, beyond the horizon {}",
            config.horizon
        )));
    }
    let ctx = GameCtx {
        tree,
        params,
        k,
        levels: config.intensity_set.levels(),
        dt: config.dt,
        horizon: config.horizon,
    };
    let mut best: Option<(f64, f64)> = None;
    for &candidate in ctx.levels {
        let cost = ctx.candidate_cost(
            node,
            candidate,
            fresh_parent,
            leaf_states,
            leaf_policies,
            day,
        )?;
        let take = match &best {
            None => true,
            Some((best_total, _)) => cost.total <= *best_total,
        };
        if take {
            best = Some((cost.total, candidate));
        }
    }
    Ok(best.expect("intensity set is nonempty").1)
}
