//! Policy-controlled SIR epidemics.
//!
//! A library for studying non-pharmaceutical intervention policies on the
//! discrete-time SIR model:
//!
//! - [`epidemic`] — single-region and excitation-coupled multi-region
//!   dynamics under a control intensity, herd-immunity and final-size
//!   computations.
//! - [`policy`] — piecewise-constant schedules on a minimal-policy-time-
//!   interval grid, exhaustive enumeration, CDC stay-at-home level mapping.
//! - [`cost`] — the implementation / impact / non-compliance cost functional.
//! - [`optimizer`] — exhaustive depth-first search for the minimum-cost
//!   schedule under a herd-immunity terminal constraint, with an independent
//!   brute-force oracle.
//! - [`game`] — multi-layer per-interval best-response dynamics across a
//!   jurisdiction hierarchy coupled by non-compliance costs.
//! - [`scenario`] / [`runner`] — TOML experiment files, orchestration, and
//!   CSV/JSON reporting for plotting.

// `!(x > 0.0)` and friends are deliberate: they reject NaN where the
// un-negated comparison would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod epidemic;
pub mod error;
pub mod game;
pub mod optimizer;
pub mod policy;
pub mod runner;
pub mod scenario;

pub use cost::{interval_cost, total_cost, CostBreakdown, CostWeights};
pub use epidemic::{
    final_size, herd_threshold, simulate, step_network, step_single, ExcitationMatrix, FinalSize,
    SirParams, SirState, Trajectory, DEFAULT_GAMMA, DEFAULT_HORIZON, DEFAULT_QUIESCENCE,
};
pub use error::{Error, Result};
pub use game::{
    aggregate_parent_state, best_response, run_game, CandidateRecord, GameConfig, GameOutcome,
    RegionNode, RegionTree,
};
pub use optimizer::{
    brute_force_oracle, evaluate_schedule, optimize, OptimizerConfig, OptimizerResult,
};
pub use policy::{cdc_level_to_intensity, IntensitySet, PolicySchedule, ScheduleEnumerator};
pub use runner::{
    compare_runs, load_report, run, DiffSummary, RegionDiff, RegionOutcome, RunOptions, RunReport,
    ScheduleSegment, SearchStats, SEARCH_GUARD, WAVE_THRESHOLD,
};
pub use scenario::{load_scenario, Mode, Scenario, ScenarioRegion, DEFAULT_EPSILON};
