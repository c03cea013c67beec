//! The three-part cost functional: implementation, impact, non-compliance.
//!
//! Costs are dimensionless. For a window `[t1, t2)` under constant intensity
//! `alpha` inside a normalization horizon of `T` days:
//!
//! ```text
//! implementation term   (t2 - t1) / T * (1 - alpha)
//! impact term           r at T under the schedule (final epidemic size proxy)
//! non-compliance term   (t2 - t1) / T * (alpha - pi)^2,  pi = parent intensity
//! total = kappa * implementation + eta * impact + (1 - kappa - eta) * non-compliance
//! ```
//!
//! The impact term is counted once per schedule (a terminal value), not once
//! per interval. Top-layer regions have no parent and must carry weights with
//! `kappa + eta = 1` so the non-compliance part vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicySchedule;

/// Tolerance on weight-sum comparisons.
const WEIGHT_EPS: f64 = 1e-12;

/// Implementation/impact weight pair; the non-compliance weight is the
/// remainder `1 - kappa - eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub kappa: f64,
    pub eta: f64,
}

impl CostWeights {
    pub fn new(kappa: f64, eta: f64) -> Result<Self> {
        if kappa < 0.0 || eta < 0.0 || kappa + eta > 1.0 + WEIGHT_EPS {
            return Err(Error::InvalidWeights(format!(
                "need kappa >= 0, eta >= 0, kappa + eta <= 1; got ({kappa}, {eta})"
            )));
        }
        Ok(Self { kappa, eta })
    }

    pub fn non_compliance(&self) -> f64 {
        (1.0 - self.kappa - self.eta).max(0.0)
    }

    /// Whether these weights are valid for a region with no parent
    /// (non-compliance weight must vanish).
    pub fn is_top_layer(&self) -> bool {
        (self.kappa + self.eta - 1.0).abs() <= WEIGHT_EPS
    }

    fn require_top_layer(&self) -> Result<()> {
        if !self.is_top_layer() {
            return Err(Error::InvalidWeights(format!(
                "a region without a parent needs kappa + eta = 1, got {} + {}",
                self.kappa, self.eta
            )));
        }
        Ok(())
    }
}

/// Raw cost terms and their weighted combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub implementation: f64,
    pub impact: f64,
    pub non_compliance: f64,
    pub total: f64,
}

impl CostBreakdown {
    /// Combine raw terms with the weights. Every cost producer in the crate
    /// funnels through here so identical raw terms give identical totals.
    pub fn combine(
        implementation: f64,
        impact: f64,
        non_compliance: f64,
        weights: &CostWeights,
    ) -> Self {
        let total = weights.kappa * implementation
            + weights.eta * impact
            + weights.non_compliance() * non_compliance;
        Self {
            implementation,
            impact,
            non_compliance,
            total,
        }
    }
}

/// Raw implementation term of one constant-intensity window of `len` days.
#[inline]
pub(crate) fn window_implementation_term(len: f64, t: f64, alpha: f64) -> f64 {
    len / t * (1.0 - alpha)
}

/// Raw non-compliance term of one constant-intensity window of `len` days.
#[inline]
pub(crate) fn window_non_compliance_term(len: f64, t: f64, alpha: f64, pi: f64) -> f64 {
    let d = alpha - pi;
    len / t * (d * d)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParams(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

/// Cost of holding `alpha` over one interval of `dt` days inside horizon `t`,
/// with `r_at_t` the recovered fraction the candidate produces at `t`.
/// `pi` is the parent's intensity over the same interval; `None` marks a
/// top-layer region, whose weights must satisfy `kappa + eta = 1`.
pub fn interval_cost(
    alpha: f64,
    pi: Option<f64>,
    weights: &CostWeights,
    dt: u32,
    t: u32,
    r_at_t: f64,
) -> Result<CostBreakdown> {
    check_unit("alpha", alpha)?;
    check_unit("r_at_t", r_at_t)?;
    if dt > t {
        return Err(Error::InvalidParams(format!(
            "interval of {dt} days exceeds the horizon of {t} days"
        )));
    }
    let (len, horizon) = (f64::from(dt), f64::from(t));
    let implementation = window_implementation_term(len, horizon, alpha);
    let non_compliance = match pi {
        Some(pi) => {
            check_unit("pi", pi)?;
            window_non_compliance_term(len, horizon, alpha, pi)
        }
        None => {
            weights.require_top_layer()?;
            0.0
        }
    };
    Ok(CostBreakdown::combine(
        implementation,
        r_at_t,
        non_compliance,
        weights,
    ))
}

/// Boundaries of a schedule's constant windows inside `[0, t)`: stage edges
/// up to `t0`, then the no-control tail.
fn breakpoints(schedule: &PolicySchedule, t: u32) -> Vec<u32> {
    let mut cuts = Vec::new();
    let mut day = 0;
    while day < schedule.t0() && day < t {
        cuts.push(day);
        day += schedule.dt();
    }
    if schedule.t0() < t {
        cuts.push(schedule.t0());
    }
    cuts
}

/// Averaged total cost of a whole schedule over `[0, t)` given the simulated
/// terminal recovered fraction `r_at_t`. Daily intensities beyond each
/// schedule's end time are 1, so a schedule identical to its parent
/// everywhere has zero non-compliance cost.
///
/// The raw terms accumulate window by window in grid order; the optimizer
/// accumulates the same expressions in the same order along its search path,
/// which makes the two routes bitwise-identical.
pub fn total_cost(
    schedule: &PolicySchedule,
    parent: Option<&PolicySchedule>,
    weights: &CostWeights,
    t: u32,
    r_at_t: f64,
) -> Result<CostBreakdown> {
    check_unit("r_at_t", r_at_t)?;
    if t == 0 {
        return Err(Error::InvalidParams("normalization horizon is zero".into()));
    }
    if parent.is_none() {
        weights.require_top_layer()?;
    }

    // merged boundaries of both schedules' constant windows
    let mut cuts = breakpoints(schedule, t);
    if let Some(p) = parent {
        cuts.extend(breakpoints(p, t));
    }
    cuts.push(t);
    cuts.sort_unstable();
    cuts.dedup();

    let horizon = f64::from(t);
    let mut implementation = 0.0;
    let mut non_compliance = 0.0;
    for window in cuts.windows(2) {
        let (start, end) = (window[0], window[1]);
        let len = f64::from(end - start);
        let alpha = schedule.value_at(start);
        implementation += window_implementation_term(len, horizon, alpha);
        if let Some(p) = parent {
            non_compliance += window_non_compliance_term(len, horizon, alpha, p.value_at(start));
        }
    }
    Ok(CostBreakdown::combine(
        implementation,
        r_at_t,
        non_compliance,
        weights,
    ))
}
