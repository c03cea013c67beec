//! Experiment orchestration: dispatch a scenario to simulate / optimize /
//! game, write plotting-ready CSV files and a JSON report, and diff runs.
//!
//! Outputs for prefix `P`:
//! - `P.trajectory.csv` — day, region, s, i, r, u; one row per leaf region
//!   per day, `(horizon + 1) * leaves` rows plus header.
//! - `P.schedule.csv` — region, start_day, end_day, intensity; merged stages.
//! - `P.cost.csv` — region, kappa, eta, implementation, impact,
//!   non_compliance, total.
//! - `P.report.json` — the [`RunReport`].
//! - `P.game_log.jsonl` — game mode only; every candidate evaluation.
//!
//! Floating point is written with 10 significant digits throughout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cost::{total_cost, CostBreakdown, CostWeights};
use crate::epidemic::{simulate, SirState, Trajectory};
use crate::error::{Error, Result};
use crate::game::{run_game, GameConfig, GameOutcome};
use crate::optimizer::{optimize, OptimizerConfig};
use crate::policy::PolicySchedule;
use crate::scenario::{Mode, Scenario, ScenarioRegion};

/// Infected-fraction threshold above which a local maximum counts as a wave.
pub const WAVE_THRESHOLD: f64 = 1e-4;

/// Largest schedule count `optimize` accepts without `allow_large_search`.
pub const SEARCH_GUARD: u128 = 10_000_000;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Output path prefix; parent directories are created.
    pub out_prefix: String,
    /// Lift the [`SEARCH_GUARD`] limit.
    pub allow_large_search: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSegment {
    pub start_day: u32,
    pub end_day: u32,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionOutcome {
    pub id: String,
    pub s_final: f64,
    pub r_final: f64,
    pub i_final: f64,
    pub peak_infected: f64,
    /// Local maxima of the infected curve above [`WAVE_THRESHOLD`].
    pub waves: usize,
    pub quiescent: bool,
    pub schedule: Vec<ScheduleSegment>,
    pub cost: Option<CostBreakdown>,
    /// Path of the trajectory CSV holding this region's rows; absent for
    /// aggregate (non-leaf) regions.
    pub trajectory_csv: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub explored: u64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub scenario: Scenario,
    pub regions: Vec<RegionOutcome>,
    pub search: Option<SearchStats>,
    pub wall_time_seconds: f64,
}

/// Per-region difference between two runs (`a - b` for the deltas).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDiff {
    pub id: String,
    pub s_final_delta: f64,
    pub total_cost_delta: Option<f64>,
    pub peak_infected_delta: f64,
    pub waves_a: usize,
    pub waves_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub regions: Vec<RegionDiff>,
}

/// Round to 10 significant decimal digits; report and CSV values share this.
fn sig10(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

fn fmt10(x: f64) -> String {
    format!("{x:.9e}")
}

fn round_cost(cost: &CostBreakdown) -> CostBreakdown {
    CostBreakdown {
        implementation: sig10(cost.implementation),
        impact: sig10(cost.impact),
        non_compliance: sig10(cost.non_compliance),
        total: sig10(cost.total),
    }
}

struct RegionRun {
    id: String,
    weights: CostWeights,
    schedule: PolicySchedule,
    trajectory: Option<Trajectory>,
    /// Aggregate daily infected curve for non-leaf regions.
    aggregate: Option<(Vec<SirState>, Vec<f64>)>,
    cost: Option<CostBreakdown>,
}

fn outcome_from(run: &RegionRun, quiescence: f64, trajectory_csv: Option<&Path>) -> RegionOutcome {
    let (final_state, peak, waves) = match (&run.trajectory, &run.aggregate) {
        (Some(traj), _) => (
            *traj.final_state(),
            traj.peak_infected(),
            traj.wave_count(WAVE_THRESHOLD),
        ),
        (None, Some((states, _))) => {
            let synthetic = Trajectory {
                states: states.clone(),
                intensities: vec![1.0; states.len().saturating_sub(1)],
            };
            (
                *synthetic.final_state(),
                synthetic.peak_infected(),
                synthetic.wave_count(WAVE_THRESHOLD),
            )
        }
        (None, None) => unreachable!("every region run carries states"),
    };
    RegionOutcome {
        id: run.id.clone(),
        s_final: sig10(final_state.s),
        r_final: sig10(final_state.r),
        i_final: sig10(final_state.i),
        peak_infected: sig10(peak),
        waves,
        quiescent: final_state.i < quiescence,
        schedule: run
            .schedule
            .segments()
            .into_iter()
            .map(|(start_day, end_day, intensity)| ScheduleSegment {
                start_day,
                end_day,
                intensity,
            })
            .collect(),
        cost: run.cost.as_ref().map(round_cost),
        trajectory_csv: trajectory_csv.map(|p| p.display().to_string()),
    }
}

fn parent_schedule<'a>(
    regions: &'a [ScenarioRegion],
    runs: &'a [RegionRun],
    region: &ScenarioRegion,
) -> Option<&'a PolicySchedule> {
    let parent_id = region.parent.as_deref()?;
    regions
        .iter()
        .position(|r| r.id == parent_id)
        .map(|idx| &runs[idx].schedule)
}

fn run_simulate(scenario: &Scenario) -> Result<Vec<RegionRun>> {
    let initials: Vec<SirState> = scenario
        .regions
        .iter()
        .map(|r| r.initial.expect("validated"))
        .collect();
    let schedules: Vec<PolicySchedule> = scenario
        .regions
        .iter()
        .map(|r| r.schedule.clone().unwrap_or_else(PolicySchedule::uncontrolled))
        .collect();
    let trajectories = simulate(
        &initials,
        &scenario.params,
        &scenario.k,
        &schedules,
        scenario.horizon,
    )?;

    let mut runs: Vec<RegionRun> = scenario
        .regions
        .iter()
        .zip(schedules)
        .zip(trajectories)
        .map(|((region, schedule), trajectory)| RegionRun {
            id: region.id.clone(),
            weights: region.weights,
            schedule,
            trajectory: Some(trajectory),
            aggregate: None,
            cost: None,
        })
        .collect();
    for idx in 0..runs.len() {
        let region = &scenario.regions[idx];
        let r_final = runs[idx].trajectory.as_ref().unwrap().final_state().r;
        let parent = parent_schedule(&scenario.regions, &runs, region);
        if parent.is_some() || region.weights.is_top_layer() {
            let cost = total_cost(
                &runs[idx].schedule,
                parent,
                &region.weights,
                scenario.horizon,
                r_final,
            )?;
            runs[idx].cost = Some(cost);
        }
    }
    Ok(runs)
}

fn run_optimize(scenario: &Scenario, options: &RunOptions) -> Result<(Vec<RegionRun>, SearchStats)> {
    let region = &scenario.regions[0];
    let levels = scenario.levels.clone().expect("validated");
    let size = levels.schedule_count(scenario.dt, scenario.t0.expect("validated"))?;
    if size > SEARCH_GUARD && !options.allow_large_search {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: SEARCH_GUARD,
        });
    }
    let mut config = OptimizerConfig::new(
        levels,
        scenario.dt,
        scenario.t0.expect("validated"),
        scenario.horizon,
        scenario.epsilon,
        region.weights,
        scenario.enforce_herd,
    )?;
    config.prune = scenario.prune;
    let initial = region.initial.expect("validated");
    let result = optimize(&initial, &scenario.params, &config)?;
    let stats = SearchStats {
        explored: result.explored,
        feasible: result.feasible,
    };
    let Some(schedule) = result.best_schedule else {
        return Err(Error::InfeasibleOptimization {
            explored: result.explored,
        });
    };
    let trajectory = simulate(
        &[initial],
        &scenario.params,
        &crate::epidemic::ExcitationMatrix::identity(1),
        std::slice::from_ref(&schedule),
        scenario.horizon,
    )?
    .pop()
    .unwrap();
    Ok((
        vec![RegionRun {
            id: region.id.clone(),
            weights: region.weights,
            schedule,
            trajectory: Some(trajectory),
            aggregate: None,
            cost: result.best_cost,
        }],
        stats,
    ))
}

fn run_game_mode(scenario: &Scenario) -> Result<(Vec<RegionRun>, GameOutcome)> {
    let tree = scenario.region_tree()?;
    let config = GameConfig {
        intensity_set: scenario.levels.clone().expect("validated"),
        dt: scenario.dt,
        horizon: scenario.horizon,
    };
    let outcome = run_game(&tree, &scenario.params, &scenario.k, &config)?;

    let leaf_ids: Vec<String> = outcome.trajectories.iter().map(|(id, _)| id.clone()).collect();
    let mut runs = Vec::with_capacity(scenario.regions.len());
    for region in &scenario.regions {
        let schedule = outcome
            .schedules
            .iter()
            .find(|(id, _)| *id == region.id)
            .map(|(_, s)| s.clone())
            .expect("game returns a schedule per region");
        let trajectory = outcome
            .trajectories
            .iter()
            .find(|(id, _)| *id == region.id)
            .map(|(_, t)| t.clone());
        let aggregate = if trajectory.is_none() {
            // population-weighted mean of descendant leaves, day by day
            let horizon = scenario.horizon as usize;
            let mut states = Vec::with_capacity(horizon + 1);
            for day in 0..=horizon {
                let leaf_states: Vec<SirState> = leaf_ids
                    .iter()
                    .enumerate()
                    .map(|(row, _)| outcome.trajectories[row].1.states[day])
                    .collect();
                states.push(crate::game::aggregate_parent_state(
                    &tree,
                    &region.id,
                    &leaf_states,
                )?);
            }
            Some((states, Vec::new()))
        } else {
            None
        };
        runs.push(RegionRun {
            id: region.id.clone(),
            weights: region.weights,
            schedule,
            trajectory,
            aggregate,
            cost: None,
        });
    }
    for idx in 0..runs.len() {
        let region = &scenario.regions[idx];
        let r_final = match (&runs[idx].trajectory, &runs[idx].aggregate) {
            (Some(traj), _) => traj.final_state().r,
            (None, Some((states, _))) => states.last().unwrap().r,
            _ => unreachable!(),
        };
        let parent = parent_schedule(&scenario.regions, &runs, region);
        let cost = total_cost(
            &runs[idx].schedule,
            parent,
            &region.weights,
            scenario.horizon,
            r_final,
        )?;
        runs[idx].cost = Some(cost);
    }
    Ok((runs, outcome))
}

fn write_trajectory_csv(path: &Path, runs: &[RegionRun]) -> Result<()> {
    let mut out = String::from("day,region,s,i,r,u\n");
    for run in runs {
        let Some(traj) = &run.trajectory else { continue };
        for (day, state) in traj.states.iter().enumerate() {
            let u = run.schedule.value_at(day as u32);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                day,
                run.id,
                fmt10(state.s),
                fmt10(state.i),
                fmt10(state.r),
                fmt10(u),
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_schedule_csv(path: &Path, runs: &[RegionRun]) -> Result<()> {
    let mut out = String::from("region,start_day,end_day,intensity\n");
    for run in runs {
        for (start, end, intensity) in run.schedule.segments() {
            out.push_str(&format!("{},{start},{end},{}\n", run.id, fmt10(intensity)));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_cost_csv(path: &Path, runs: &[RegionRun]) -> Result<()> {
    let mut out = String::from("region,kappa,eta,implementation,impact,non_compliance,total\n");
    for run in runs {
        let Some(cost) = &run.cost else { continue };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            run.id,
            fmt10(run.weights.kappa),
            fmt10(run.weights.eta),
            fmt10(cost.implementation),
            fmt10(cost.impact),
            fmt10(cost.non_compliance),
            fmt10(cost.total),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Execute a scenario and write its outputs under the prefix. Exit-code
/// mapping for callers: parse/validation errors are code 2, an infeasible
/// optimization is code 3, the search-space guard is code 4.
pub fn run(scenario: &Scenario, options: &RunOptions) -> Result<RunReport> {
    scenario.validate()?;
    let started = Instant::now();
    let prefix = PathBuf::from(&options.out_prefix);
    if let Some(parent) = prefix.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }

    let (runs, search, game_outcome) = match scenario.mode {
        Mode::Simulate => (run_simulate(scenario)?, None, None),
        Mode::Optimize => {
            let (runs, stats) = run_optimize(scenario, options)?;
            (runs, Some(stats), None)
        }
        Mode::Game => {
            let (runs, outcome) = run_game_mode(scenario)?;
            (runs, None, Some(outcome))
        }
    };

    let suffixed = |suffix: &str| PathBuf::from(format!("{}.{suffix}", options.out_prefix));
    let trajectory_path = suffixed("trajectory.csv");
    let schedule_path = suffixed("schedule.csv");
    let cost_path = suffixed("cost.csv");
    let report_path = suffixed("report.json");
    write_trajectory_csv(&trajectory_path, &runs)?;
    write_schedule_csv(&schedule_path, &runs)?;
    write_cost_csv(&cost_path, &runs)?;
    if let Some(outcome) = &game_outcome {
        let mut file = fs::File::create(suffixed("game_log.jsonl"))?;
        for record in &outcome.log {
            serde_json::to_writer(&mut file, record)?;
            file.write_all(b"\n")?;
        }
    }

    let regions = runs
        .iter()
        .map(|run| {
            let csv = run.trajectory.as_ref().map(|_| trajectory_path.as_path());
            outcome_from(run, scenario.quiescence, csv)
        })
        .collect();
    let report = RunReport {
        mode: scenario.mode,
        scenario: scenario.clone(),
        regions,
        search,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let mut file = fs::File::create(&report_path)?;
    serde_json::to_writer_pretty(&mut file, &report)?;
    file.write_all(b"\n")?;
    Ok(report)
}

/// Read a report back from `P.report.json`.
pub fn load_report(path: impl AsRef<Path>) -> Result<RunReport> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Per-region differences between two runs over the same region set.
pub fn compare_runs(a: &RunReport, b: &RunReport) -> Result<DiffSummary> {
    let ids_a: Vec<&str> = a.regions.iter().map(|r| r.id.as_str()).collect();
    let ids_b: Vec<&str> = b.regions.iter().map(|r| r.id.as_str()).collect();
    if ids_a != ids_b {
        return Err(Error::MismatchedReports(format!(
            "region sets differ: {ids_a:?} vs {ids_b:?}"
        )));
    }
    let regions = a
        .regions
        .iter()
        .zip(&b.regions)
        .map(|(ra, rb)| RegionDiff {
            id: ra.id.clone(),
            s_final_delta: ra.s_final - rb.s_final,
            total_cost_delta: match (&ra.cost, &rb.cost) {
                (Some(ca), Some(cb)) => Some(ca.total - cb.total),
                _ => None,
            },
            peak_infected_delta: ra.peak_infected - rb.peak_infected,
            waves_a: ra.waves,
            waves_b: rb.waves,
        })
        .collect();
    Ok(DiffSummary { regions })
}
