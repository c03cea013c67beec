//! Scenario files: a single TOML document describing one experiment.
//!
//! ```toml
//! mode = "optimize"                  # simulate | optimize | game
//! output = "france_dt7"             # output path prefix (CLI --out overrides)
//! # k = [[1.0, 0.0], [0.1, 1.0]]     # excitation matrix over leaf regions,
//! #                                  # identity when omitted; top-level keys
//! #                                  # go before the first [table]
//!
//! [params]
//! r0 = 2.9                           # basic reproduction number (required)
//! gamma = 0.1                        # recovery rate per day (default 0.1)
//!
//! [policy]
//! levels = [0.0, 0.5, 1.0]           # admissible intensities, ascending, ending at 1
//! dt = 7                             # minimal policy time interval in days
//! t0 = 98                            # policy end time (optimize mode)
//!
//! [run]
//! horizon = 1500                     # simulation horizon in days (default 1500)
//! epsilon = 0.12                     # herd tolerance (default 0.01)
//! enforce_herd = true                # default true
//! quiescence = 1e-9                  # default 1e-9
//!
//! [[region]]
//! id = "france"
//! population = 6.7e7
//! initial_infected = 1000.0          # absolute count, or initial_infected_fraction
//! initial_recovered = 0.0            # absolute count, or initial_recovered_fraction
//! kappa = 0.0                        # implementation weight (default 0)
//! eta = 1.0                          # impact weight (default 1)
//! # parent = "state"                 # jurisdiction parent (game mode)
//! # intensities = [1.0, 0.5]         # fixed per-stage schedule (simulate mode)
//! ```
//!
//! Initial conditions accept absolute counts or fractions; both convert to
//! fractions at load time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::CostWeights;
use crate::epidemic::{
    ExcitationMatrix, SirParams, SirState, DEFAULT_GAMMA, DEFAULT_HORIZON, DEFAULT_QUIESCENCE,
};
use crate::error::{Error, Result};
use crate::game::{RegionNode, RegionTree};
use crate::policy::{IntensitySet, PolicySchedule};

/// Default herd tolerance (fraction of the population).
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Optimize,
    Game,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Mode::Simulate => "simulate",
            Mode::Optimize => "optimize",
            Mode::Game => "game",
        };
        f.write_str(name)
    }
}

/// One region of a validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRegion {
    pub id: String,
    pub population: f64,
    /// Initial compartment fractions; present for leaf regions.
    pub initial: Option<SirState>,
    pub weights: CostWeights,
    pub parent: Option<String>,
    /// Fixed schedule applied in simulate mode; absent means no control.
    pub schedule: Option<PolicySchedule>,
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub mode: Mode,
    pub output: Option<String>,
    pub params: SirParams,
    pub levels: Option<IntensitySet>,
    pub dt: u32,
    pub t0: Option<u32>,
    pub horizon: u32,
    pub epsilon: f64,
    pub enforce_herd: bool,
    pub quiescence: f64,
    pub prune: bool,
    pub k: ExcitationMatrix,
    pub regions: Vec<ScenarioRegion>,
}

// ---------------------------------------------------------------------------
// raw on-disk schema: everything optional so validation can name the field

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    mode: Option<String>,
    output: Option<String>,
    params: Option<RawParams>,
    policy: Option<RawPolicy>,
    run: Option<RawRun>,
    k: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    region: Vec<RawRegion>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    r0: Option<f64>,
    gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    levels: Option<Vec<f64>>,
    dt: Option<u32>,
    t0: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    horizon: Option<u32>,
    epsilon: Option<f64>,
    enforce_herd: Option<bool>,
    quiescence: Option<f64>,
    prune: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    id: Option<String>,
    population: Option<f64>,
    initial_infected: Option<f64>,
    initial_infected_fraction: Option<f64>,
    initial_recovered: Option<f64>,
    initial_recovered_fraction: Option<f64>,
    kappa: Option<f64>,
    eta: Option<f64>,
    parent: Option<String>,
    intensities: Option<Vec<f64>>,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::ScenarioValidation {
        field: field.into(),
        message: message.into(),
    }
}

fn region_initial(raw: &RawRegion, field: &str, population: f64) -> Result<Option<SirState>> {
    let has_any = raw.initial_infected.is_some()
        || raw.initial_infected_fraction.is_some()
        || raw.initial_recovered.is_some()
        || raw.initial_recovered_fraction.is_some();
    if !has_any {
        return Ok(None);
    }
    if raw.initial_infected.is_some() && raw.initial_infected_fraction.is_some() {
        return Err(invalid(
            field,
            "give initial_infected or initial_infected_fraction, not both",
        ));
    }
    if raw.initial_recovered.is_some() && raw.initial_recovered_fraction.is_some() {
        return Err(invalid(
            field,
            "give initial_recovered or initial_recovered_fraction, not both",
        ));
    }
    let infected = match (raw.initial_infected, raw.initial_infected_fraction) {
        (Some(count), _) => count / population,
        (_, Some(fraction)) => fraction,
        _ => 0.0,
    };
    let recovered = match (raw.initial_recovered, raw.initial_recovered_fraction) {
        (Some(count), _) => count / population,
        (_, Some(fraction)) => fraction,
        _ => 0.0,
    };
    SirState::from_fractions(infected, recovered)
        .map(Some)
        .map_err(|e| invalid(field, e.to_string()))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl Scenario {
    fn from_raw(raw: RawScenario) -> Result<Self> {
        let mode = match raw.mode.as_deref() {
            None => return Err(invalid("mode", "missing; one of simulate, optimize, game")),
            Some("simulate") => Mode::Simulate,
            Some("optimize") => Mode::Optimize,
            Some("game") => Mode::Game,
            Some(other) => {
                return Err(invalid(
                    "mode",
                    format!("unknown mode `{other}`; one of simulate, optimize, game"),
                ))
            }
        };

        let params_raw = raw.params.unwrap_or_default();
        let r0 = params_raw
            .r0
            .ok_or_else(|| invalid("params.r0", "missing basic reproduction number"))?;
        let gamma = params_raw.gamma.unwrap_or(DEFAULT_GAMMA);
        let params =
            SirParams::from_r0(r0, gamma).map_err(|e| invalid("params", e.to_string()))?;

        let policy_raw = raw.policy.unwrap_or_default();
        let dt = policy_raw.dt.unwrap_or(7);
        if dt == 0 {
            return Err(invalid("policy.dt", "must be at least one day"));
        }
        let levels = match policy_raw.levels {
            Some(values) => Some(
                IntensitySet::new(values).map_err(|e| invalid("policy.levels", e.to_string()))?,
            ),
            None => None,
        };

        let run_raw = raw.run.unwrap_or_default();
        let horizon = run_raw.horizon.unwrap_or(DEFAULT_HORIZON);
        if horizon == 0 {
            return Err(invalid("run.horizon", "must be at least one day"));
        }
        let epsilon = run_raw.epsilon.unwrap_or(DEFAULT_EPSILON);
        if !(epsilon > 0.0) {
            return Err(invalid("run.epsilon", "must be positive"));
        }
        let quiescence = run_raw.quiescence.unwrap_or(DEFAULT_QUIESCENCE);

        if raw.region.is_empty() {
            return Err(invalid("region", "at least one region is required"));
        }
        let mut regions = Vec::with_capacity(raw.region.len());
        for (idx, r) in raw.region.iter().enumerate() {
            let field = format!("region[{idx}]");
            let id = r
                .id
                .clone()
                .ok_or_else(|| invalid(&format!("{field}.id"), "missing"))?;
            if !valid_id(&id) {
                return Err(invalid(
                    &format!("{field}.id"),
                    "ids use ASCII letters, digits, `_`, `-`",
                ));
            }
            let population = r.population.unwrap_or(0.0);
            let initial = region_initial(r, &field, population)?;
            if initial.is_some() && !(population > 0.0) {
                return Err(invalid(
                    &format!("{field}.population"),
                    "leaf regions need a positive population",
                ));
            }
            let weights = CostWeights::new(r.kappa.unwrap_or(0.0), r.eta.unwrap_or(1.0))
                .map_err(|e| invalid(&format!("{field}.kappa"), e.to_string()))?;
            let schedule = match &r.intensities {
                Some(stages) => {
                    let t0 = stages.len() as u32 * dt;
                    Some(
                        PolicySchedule::new(stages.clone(), dt, t0)
                            .map_err(|e| invalid(&format!("{field}.intensities"), e.to_string()))?,
                    )
                }
                None => None,
            };
            regions.push(ScenarioRegion {
                id,
                population,
                initial,
                weights,
                parent: r.parent.clone(),
                schedule,
            });
        }

        // leaves: regions nobody names as a parent
        let leaf_ids: Vec<&str> = regions
            .iter()
            .filter(|r| !regions.iter().any(|c| c.parent.as_deref() == Some(&r.id)))
            .map(|r| r.id.as_str())
            .collect();
        let k = match raw.k {
            Some(rows) => ExcitationMatrix::new(rows).map_err(|e| invalid("k", e.to_string()))?,
            None => ExcitationMatrix::identity(leaf_ids.len()),
        };
        if k.len() != leaf_ids.len() {
            return Err(invalid(
                "k",
                format!(
                    "{}x{} matrix for {} leaf regions",
                    k.len(),
                    k.len(),
                    leaf_ids.len()
                ),
            ));
        }

        let scenario = Scenario {
            mode,
            output: raw.output,
            params,
            levels,
            dt,
            t0: policy_raw.t0,
            horizon,
            epsilon,
            enforce_herd: run_raw.enforce_herd.unwrap_or(true),
            quiescence,
            prune: run_raw.prune.unwrap_or(false),
            k,
            regions,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Mode-specific structural checks.
    pub fn validate(&self) -> Result<()> {
        for (idx, region) in self.regions.iter().enumerate() {
            if let Some(parent) = &region.parent {
                if !self.regions.iter().any(|r| &r.id == parent) {
                    return Err(invalid(
                        &format!("region[{idx}].parent"),
                        format!("unknown region `{parent}`"),
                    ));
                }
            }
        }
        match self.mode {
            Mode::Optimize => {
                if self.regions.len() != 1 {
                    return Err(invalid(
                        "region",
                        "optimize mode takes exactly one region",
                    ));
                }
                if self.regions[0].initial.is_none() {
                    return Err(invalid(
                        "region[0]",
                        "optimize mode needs initial conditions",
                    ));
                }
                if self.levels.is_none() {
                    return Err(invalid("policy.levels", "required in optimize mode"));
                }
                let t0 = self
                    .t0
                    .ok_or_else(|| invalid("policy.t0", "required in optimize mode"))?;
                if !t0.is_multiple_of(self.dt) {
                    return Err(invalid(
                        "policy.t0",
                        format!("{t0} is not a multiple of dt = {}", self.dt),
                    ));
                }
                if t0 > self.horizon {
                    return Err(invalid(
                        "policy.t0",
                        format!("{t0} exceeds the horizon {}", self.horizon),
                    ));
                }
                if !self.regions[0].weights.is_top_layer() {
                    return Err(invalid(
                        "region[0].kappa",
                        "optimize mode needs kappa + eta = 1 (no parent layer)",
                    ));
                }
            }
            Mode::Game => {
                if self.levels.is_none() {
                    return Err(invalid("policy.levels", "required in game mode"));
                }
                if !self.horizon.is_multiple_of(self.dt) {
                    return Err(invalid(
                        "run.horizon",
                        format!(
                            "{} is not a multiple of dt = {} (game intervals)",
                            self.horizon, self.dt
                        ),
                    ));
                }
                self.region_tree()?;
            }
            Mode::Simulate => {
                for (idx, region) in self.regions.iter().enumerate() {
                    if region.initial.is_none() {
                        return Err(invalid(
                            &format!("region[{idx}]"),
                            "simulate mode needs initial conditions on every region",
                        ));
                    }
                    if let Some(schedule) = &region.schedule {
                        if schedule.t0() > self.horizon {
                            return Err(invalid(
                                &format!("region[{idx}].intensities"),
                                "schedule extends beyond the horizon",
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The jurisdiction forest induced by the `parent` links.
    pub fn region_tree(&self) -> Result<RegionTree> {
        let nodes = self
            .regions
            .iter()
            .map(|r| RegionNode {
                id: r.id.clone(),
                population: r.population,
                initial: r.initial,
                weights: r.weights,
                parent: r.parent.clone(),
            })
            .collect();
        RegionTree::new(nodes).map_err(|e| invalid("region", e.to_string()))
    }
}

/// Read and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let raw: RawScenario = toml::from_str(&text).map_err(|e| Error::ScenarioParse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Scenario::from_raw(raw)
}
