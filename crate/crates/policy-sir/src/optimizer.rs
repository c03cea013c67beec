//! Exhaustive depth-first search for the minimum-cost schedule under the
//! herd-immunity terminal constraint, plus an independent brute-force oracle.
//!
//! The search walks the stage grid depth-first, carrying the epidemic state
//! and the raw cost terms accumulated so far at every node, so no candidate
//! is ever re-simulated from day 0. Costs accumulate with exactly the same
//! floating-point operations as [`total_cost`], which makes the search's
//! reported cost bitwise-equal to re-evaluating its schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{window_implementation_term, CostBreakdown, CostWeights};
use crate::epidemic::{euler_update, SirParams, SirState};
use crate::error::{Error, Result};
use crate::policy::{IntensitySet, PolicySchedule};
use crate::{cost, epidemic};

/// Guard on the brute-force oracle's search space.
pub const ORACLE_GUARD: u128 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub intensity_set: IntensitySet,
    /// Minimal policy time interval in days.
    pub dt: u32,
    /// Policy end time in days; a multiple of `dt`.
    pub t0: u32,
    /// Simulation and cost-normalization horizon in days.
    pub horizon: u32,
    /// Herd tolerance: feasible schedules end with
    /// `s_final > herd_threshold - epsilon`.
    pub epsilon: f64,
    pub weights: CostWeights,
    /// Enforce the herd terminal constraint (checked at the horizon, where
    /// trajectories are quiescent, not at `t0` where they may still be
    /// decaying toward it).
    pub enforce_herd: bool,
    /// Abandon branches whose accumulated implementation and non-compliance
    /// cost already reaches the best known total. Off by default; when on,
    /// `explored` counts only the leaves actually evaluated.
    pub prune: bool,
}

impl OptimizerConfig {
    pub fn new(
        intensity_set: IntensitySet,
        dt: u32,
        t0: u32,
        horizon: u32,
        epsilon: f64,
        weights: CostWeights,
        enforce_herd: bool,
    ) -> Result<Self> {
        let config = Self {
            intensity_set,
            dt,
            t0,
            horizon,
            epsilon,
            weights,
            enforce_herd,
            prune: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.dt == 0 || !self.t0.is_multiple_of(self.dt) {
            return Err(Error::InvalidPolicy(format!(
                "t0 = {} is not a multiple of dt = {}",
                self.t0, self.dt
            )));
        }
        if self.t0 > self.horizon {
            return Err(Error::InvalidParams(format!(
                "t0 = {} exceeds the horizon of {} days",
                self.t0, self.horizon
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParams("horizon must be at least 1 day".into()));
        }
        // single-region optimization has no parent layer
        if !self.weights.is_top_layer() {
            return Err(Error::InvalidWeights(format!(
                "single-region optimization needs kappa + eta = 1, got {} + {}",
                self.weights.kappa, self.weights.eta
            )));
        }
        Ok(())
    }

    fn n_stages(&self) -> usize {
        (self.t0 / self.dt) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    /// Minimum-cost feasible schedule; `None` when nothing is feasible.
    pub best_schedule: Option<PolicySchedule>,
    pub best_cost: Option<CostBreakdown>,
    /// Terminal susceptible fraction of the best schedule.
    pub s_final: Option<f64>,
    /// Leaves evaluated; equals `|A|^N` when pruning is off.
    pub explored: u64,
    pub feasible: bool,
}

#[derive(Clone)]
struct Candidate {
    total: f64,
    /// Lexicographic rank of the schedule in enumeration order; ties on
    /// `total` keep the smaller rank so parallel and serial searches agree.
    rank: u128,
    digits: Vec<usize>,
    cost: CostBreakdown,
    s_final: f64,
}

fn better(challenger: &Candidate, incumbent: &Option<Candidate>) -> bool {
    match incumbent {
        None => true,
        Some(inc) => {
            challenger.total < inc.total
                || (challenger.total == inc.total && challenger.rank < inc.rank)
        }
    }
}

struct SearchCtx<'a> {
    levels: &'a [f64],
    beta: f64,
    gamma: f64,
    dt_days: u32,
    dt_len: f64,
    t_norm: f64,
    tail_days: u32,
    n_stages: usize,
    herd_cut: Option<f64>,
    weights: CostWeights,
    prune: bool,
}

impl SearchCtx<'_> {
    fn advance_stage(&self, state: (f64, f64, f64), alpha: f64) -> (f64, f64, f64) {
        let (mut s, mut i, mut r) = state;
        for _ in 0..self.dt_days {
            (s, i, r) = euler_update(s, i, r, i, alpha, self.beta, self.gamma);
        }
        (s, i, r)
    }

    /// No-control run from `t0` to the horizon. Stops early once neither `s`
    /// nor `r` can change in double precision any more (every remaining
    /// per-day flow rounds away), so the returned `s` and `r` are bitwise
    /// what the full run would produce.
    fn free_run(&self, state: (f64, f64, f64)) -> (f64, f64) {
        let (mut s, mut i, mut r) = state;
        let quarter_eps = 0.25 * f64::EPSILON;
        for _ in 0..self.tail_days {
            if i == 0.0 {
                break;
            }
            if self.beta * s < self.gamma
                && self.beta * i * s < quarter_eps * s
                && self.gamma * i < quarter_eps * r
            {
                break;
            }
            (s, i, r) = euler_update(s, i, r, i, 1.0, self.beta, self.gamma);
        }
        (s, r)
    }

    fn rank_of(&self, digits: &[usize]) -> u128 {
        let base = self.levels.len() as u128;
        digits.iter().fold(0u128, |acc, &d| acc * base + d as u128)
    }

    fn search(
        &self,
        depth: usize,
        state: (f64, f64, f64),
        implementation_acc: f64,
        digits: &mut Vec<usize>,
        best: &mut Option<Candidate>,
        explored: &mut u64,
    ) {
        if depth == self.n_stages {
            *explored += 1;
            let (s_final, r_final) = self.free_run(state);
            if let Some(cut) = self.herd_cut {
                if !(s_final > cut) {
                    return;
                }
            }
            let cost = CostBreakdown::combine(implementation_acc, r_final, 0.0, &self.weights);
            let candidate = Candidate {
                total: cost.total,
                rank: self.rank_of(digits),
                digits: digits.clone(),
                cost,
                s_final,
            };
            if better(&candidate, best) {
                *best = Some(candidate);
            }
            return;
        }
        if self.prune {
            if let Some(inc) = best {
                // implementation cost only accrues from here on and the
                // impact term is bounded below by zero
                if self.weights.kappa * implementation_acc >= inc.total {
                    return;
                }
            }
        }
        for (digit, &alpha) in self.levels.iter().enumerate() {
            let acc = implementation_acc
                + window_implementation_term(self.dt_len, self.t_norm, alpha);
            let next = self.advance_stage(state, alpha);
            digits.push(digit);
            self.search(depth + 1, next, acc, digits, best, explored);
            digits.pop();
        }
    }
}

fn make_ctx<'a>(
    params: &SirParams,
    config: &'a OptimizerConfig,
    herd_cut: Option<f64>,
) -> SearchCtx<'a> {
    SearchCtx {
        levels: config.intensity_set.levels(),
        beta: params.beta(),
        gamma: params.gamma(),
        dt_days: config.dt,
        dt_len: f64::from(config.dt),
        t_norm: f64::from(config.horizon),
        tail_days: config.horizon - config.t0,
        n_stages: config.n_stages(),
        herd_cut,
        weights: config.weights,
        prune: config.prune,
    }
}

fn herd_cut(params: &SirParams, config: &OptimizerConfig) -> Result<Option<f64>> {
    if !config.enforce_herd {
        return Ok(None);
    }
    Ok(Some(params.herd_threshold()? - config.epsilon))
}

fn result_from(candidate: Option<Candidate>, explored: u64, config: &OptimizerConfig) -> OptimizerResult {
    match candidate {
        Some(c) => OptimizerResult {
            best_schedule: Some(
                PolicySchedule::new(
                    c.digits
                        .iter()
                        .map(|&d| config.intensity_set.levels()[d])
                        .collect(),
                    config.dt,
                    config.t0,
                )
                .expect("search digits form a valid schedule"),
            ),
            best_cost: Some(c.cost),
            s_final: Some(c.s_final),
            explored,
            feasible: true,
        },
        None => OptimizerResult {
            best_schedule: None,
            best_cost: None,
            s_final: None,
            explored,
            feasible: false,
        },
    }
}

/// Depth-first exhaustive search for the minimum-cost schedule.
///
/// Among all schedules on the `t0 / dt` grid whose terminal state satisfies
/// `s_final > herd_threshold - epsilon` (when enforced), returns one
/// minimizing the total cost. Ties keep the first minimum in ascending
/// lexicographic enumeration order. The search fans out across two-stage
/// prefixes; the merge is deterministic, so parallel and serial runs agree
/// exactly.
pub fn optimize(
    initial: &SirState,
    params: &SirParams,
    config: &OptimizerConfig,
) -> Result<OptimizerResult> {
    config.validate()?;
    SirState::new(initial.s, initial.i, initial.r)?;
    let cut = herd_cut(params, config)?;
    let ctx = make_ctx(params, config, cut);
    let state0 = (initial.s, initial.i, initial.r);

    // parallel fan-out only pays off when subtrees are substantial
    let prefix_depth = if ctx.n_stages >= 4 { 2 } else { 0 };
    if prefix_depth == 0 {
        let mut best = None;
        let mut explored = 0u64;
        let mut digits = Vec::with_capacity(ctx.n_stages);
        ctx.search(0, state0, 0.0, &mut digits, &mut best, &mut explored);
        return Ok(result_from(best, explored, config));
    }

    let n_levels = ctx.levels.len();
    let prefixes: Vec<[usize; 2]> = (0..n_levels)
        .flat_map(|a| (0..n_levels).map(move |b| [a, b]))
        .collect();
    let (best, explored) = prefixes
        .into_par_iter()
        .map(|prefix| {
            let mut digits = Vec::with_capacity(ctx.n_stages);
            let mut state = state0;
            let mut acc = 0.0;
            for &digit in &prefix {
                let alpha = ctx.levels[digit];
                acc += window_implementation_term(ctx.dt_len, ctx.t_norm, alpha);
                state = ctx.advance_stage(state, alpha);
                digits.push(digit);
            }
            let mut best = None;
            let mut explored = 0u64;
            ctx.search(2, state, acc, &mut digits, &mut best, &mut explored);
            (best, explored)
        })
        .reduce(
            || (None, 0u64),
            |(left, explored_l), (right, explored_r)| {
                let merged = match (left, right) {
                    (None, r) => r,
                    (l, None) => l,
                    (Some(l), Some(r)) => {
                        if better(&r, &Some(l.clone())) {
                            Some(r)
                        } else {
                            Some(l)
                        }
                    }
                };
                (merged, explored_l + explored_r)
            },
        );
    Ok(result_from(best, explored, config))
}

/// Simulate a schedule from day 0 and price it; no optimization and no
/// feasibility check.
pub fn evaluate_schedule(
    initial: &SirState,
    params: &SirParams,
    schedule: &PolicySchedule,
    config: &OptimizerConfig,
) -> Result<(CostBreakdown, f64)> {
    if schedule.t0() > config.horizon {
        return Err(Error::InvalidParams(format!(
            "schedule end time {} exceeds the horizon of {} days",
            schedule.t0(),
            config.horizon
        )));
    }
    let trajectories = epidemic::simulate(
        std::slice::from_ref(initial),
        params,
        &epidemic::ExcitationMatrix::identity(1),
        std::slice::from_ref(schedule),
        config.horizon,
    )?;
    let last = trajectories[0].final_state();
    let cost = cost::total_cost(schedule, None, &config.weights, config.horizon, last.r)?;
    Ok((cost, last.s))
}

/// Independent check of [`optimize`]: materialize every schedule, simulate
/// each from day 0, and apply the same constraint and tie-break. Guarded to
/// small search spaces.
pub fn brute_force_oracle(
    initial: &SirState,
    params: &SirParams,
    config: &OptimizerConfig,
) -> Result<OptimizerResult> {
    config.validate()?;
    let size = config.intensity_set.schedule_count(config.dt, config.t0)?;
    if size > ORACLE_GUARD {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: ORACLE_GUARD,
        });
    }
    let cut = herd_cut(params, config)?;

    let mut best: Option<(PolicySchedule, CostBreakdown, f64)> = None;
    let mut explored = 0u64;
    for schedule in config
        .intensity_set
        .enumerate_schedules(config.dt, config.t0)?
    {
        let (cost, s_final) = evaluate_schedule(initial, params, &schedule, config)?;
        explored += 1;
        if let Some(cut) = cut {
            if !(s_final > cut) {
                continue;
            }
        }
        let improves = match &best {
            None => true,
            Some((_, incumbent, _)) => cost.total < incumbent.total,
        };
        if improves {
            best = Some((schedule, cost, s_final));
        }
    }
    Ok(match best {
        Some((schedule, cost, s_final)) => OptimizerResult {
            best_schedule: Some(schedule),
            best_cost: Some(cost),
            s_final: Some(s_final),
            explored,
            feasible: true,
        },
        None => OptimizerResult {
            best_schedule: None,
            best_cost: None,
            s_final: None,
            explored,
            feasible: false,
        },
    })
}
