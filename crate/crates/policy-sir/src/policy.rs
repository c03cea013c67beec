//! Piecewise-constant control policies on a fixed day grid.
//!
//! A policy holds one intensity per interval of width `dt` days (the minimal
//! policy time interval) covering `[0, t0)`, and is 1 (no control) from `t0`
//! onward. Adjacent intervals may carry equal values, which realizes stages
//! whose durations are any multiple of `dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A piecewise-constant control schedule: `t0 / dt` stage intensities on the
/// grid, implied value 1 after `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySchedule {
    stages: Vec<f64>,
    dt: u32,
    t0: u32,
}

impl PolicySchedule {
    pub fn new(stages: Vec<f64>, dt: u32, t0: u32) -> Result<Self> {
        if dt == 0 {
            return Err(Error::InvalidPolicy("dt must be at least one day".into()));
        }
        if !t0.is_multiple_of(dt) {
            return Err(Error::InvalidPolicy(format!(
                "policy end time {t0} is not a multiple of dt = {dt}"
            )));
        }
        if stages.len() as u32 != t0 / dt {
            return Err(Error::InvalidPolicy(format!(
                "{} stage values cover {} days, but t0 = {t0} requires {}",
                stages.len(),
                stages.len() as u32 * dt,
                t0 / dt
            )));
        }
        for (k, &v) in stages.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidPolicy(format!(
                    "stage {k} intensity {v} is outside [0, 1]"
                )));
            }
        }
        Ok(Self { stages, dt, t0 })
    }

    /// A schedule holding one value over the whole control window.
    pub fn constant(value: f64, dt: u32, t0: u32) -> Result<Self> {
        if dt == 0 || !t0.is_multiple_of(dt) {
            return Err(Error::InvalidPolicy(format!(
                "t0 = {t0} must be a positive multiple of dt = {dt}"
            )));
        }
        Self::new(vec![value; (t0 / dt) as usize], dt, t0)
    }

    /// The empty schedule: no control window at all, intensity 1 everywhere.
    pub fn uncontrolled() -> Self {
        Self {
            stages: Vec::new(),
            dt: 1,
            t0: 0,
        }
    }

    pub fn stages(&self) -> &[f64] {
        &self.stages
    }

    pub fn dt(&self) -> u32 {
        self.dt
    }

    pub fn t0(&self) -> u32 {
        self.t0
    }

    /// Intensity in force on day `t`: the stage value while `t < t0`, and 1
    /// afterwards (the boundary day `t0` already returns 1).
    pub fn value_at(&self, t: u32) -> f64 {
        if t < self.t0 {
            self.stages[(t / self.dt) as usize]
        } else {
            1.0
        }
    }

    /// Merge equal adjacent stages into `(start_day, end_day, intensity)`
    /// runs; `end_day` is exclusive. The implied no-control tail after `t0`
    /// is not listed.
    pub fn segments(&self) -> Vec<(u32, u32, f64)> {
        let mut out: Vec<(u32, u32, f64)> = Vec::new();
        for (k, &v) in self.stages.iter().enumerate() {
            let start = k as u32 * self.dt;
            let end = start + self.dt;
            match out.last_mut() {
                Some(last) if last.2 == v && last.1 == start => last.1 = end,
                _ => out.push((start, end, v)),
            }
        }
        out
    }
}

/// A finite ascending set of admissible intensity levels. The strictest
/// level (`alpha_max` in the admissible-set notation) comes first and the
/// set always contains 1 (no control).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySet(Vec<f64>);

impl IntensitySet {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidPolicy("intensity set is empty".into()));
        }
        for &v in &levels {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidPolicy(format!(
                    "intensity level {v} is outside [0, 1]"
                )));
            }
        }
        for pair in levels.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidPolicy(
                    "intensity levels must be strictly ascending".into(),
                ));
            }
        }
        if *levels.last().unwrap() != 1.0 {
            return Err(Error::InvalidPolicy(
                "intensity set must contain the no-control level 1".into(),
            ));
        }
        Ok(Self(levels))
    }

    /// The three-level family `{alpha_max, (alpha_max + 1) / 2, 1}`.
    pub fn three_level(alpha_max: f64) -> Result<Self> {
        Self::new(vec![alpha_max, (alpha_max + 1.0) / 2.0, 1.0])
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Strictest admissible level.
    pub fn alpha_max(&self) -> f64 {
        self.0[0]
    }

    /// Number of schedules on a `t0 / dt`-stage grid: `|A|^N`.
    pub fn schedule_count(&self, dt: u32, t0: u32) -> Result<u128> {
        if dt == 0 || !t0.is_multiple_of(dt) {
            return Err(Error::InvalidPolicy(format!(
                "t0 = {t0} is not a multiple of dt = {dt}"
            )));
        }
        let n = t0 / dt;
        (self.0.len() as u128)
            .checked_pow(n)
            .ok_or_else(|| Error::InvalidPolicy(format!("|A|^{n} overflows")))
    }

    /// All `|A|^N` schedules in depth-first lexicographic order: the first
    /// stage is the most significant position and levels iterate ascending.
    /// This ordering is part of the contract; it fixes tie-breaking in the
    /// optimizer.
    pub fn enumerate_schedules(&self, dt: u32, t0: u32) -> Result<ScheduleEnumerator> {
        let total = self.schedule_count(dt, t0)?;
        Ok(ScheduleEnumerator {
            levels: self.0.clone(),
            dt,
            t0,
            n_stages: (t0 / dt) as usize,
            odometer: Vec::new(),
            started: false,
            total,
        })
    }
}

/// Iterator over every schedule on the grid, ascending-lexicographic.
#[derive(Debug, Clone)]
pub struct ScheduleEnumerator {
    levels: Vec<f64>,
    dt: u32,
    t0: u32,
    n_stages: usize,
    odometer: Vec<usize>,
    started: bool,
    total: u128,
}

impl ScheduleEnumerator {
    /// Exact number of schedules this enumerator yields.
    pub fn total(&self) -> u128 {
        self.total
    }
}

impl Iterator for ScheduleEnumerator {
    type Item = PolicySchedule;

    fn next(&mut self) -> Option<PolicySchedule> {
        if !self.started {
            self.started = true;
            self.odometer = vec![0; self.n_stages];
        } else {
            // increment the least significant (last) position
            let mut pos = self.n_stages;
            loop {
                if pos == 0 {
                    return None;
                }
                pos -= 1;
                if self.odometer[pos] + 1 < self.levels.len() {
                    self.odometer[pos] += 1;
                    for digit in &mut self.odometer[pos + 1..] {
                        *digit = 0;
                    }
                    break;
                }
            }
        }
        let stages = self.odometer.iter().map(|&d| self.levels[d]).collect();
        Some(PolicySchedule {
            stages,
            dt: self.dt,
            t0: self.t0,
        })
    }
}

/// Map a CDC stay-at-home level (0 = mandatory for all, 5 = no order) onto
/// the unit interval: `level / 5`.
pub fn cdc_level_to_intensity(level: u8) -> Result<f64> {
    if level > 5 {
        return Err(Error::InvalidPolicy(format!(
            "CDC stay-at-home level {level} is outside 0..=5"
        )));
    }
    Ok(f64::from(level) / 5.0)
}
