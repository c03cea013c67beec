//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria 1 and 2 reproduce the reference optimal-policy structure exactly
//! but land below the reference terminal susceptible fractions, a known bias
//! of the unit-day update (see the README's reproduction notes); their value
//! assertions are kept at the stated tolerances and fail honestly.

use std::path::PathBuf;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use policy_sir::{
    brute_force_oracle, optimize, run_game, simulate, step_network, step_single,
    CostWeights, ExcitationMatrix, GameConfig, IntensitySet, Mode, OptimizerConfig,
    PolicySchedule, Scenario, SirParams, SirState,
};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn load(name: &str) -> Scenario {
    policy_sir::load_scenario(scenario_path(name)).expect("bundled scenario loads")
}

fn optimizer_setup(scenario: &Scenario) -> (SirState, SirParams, OptimizerConfig) {
    assert_eq!(scenario.mode, Mode::Optimize);
    let region = &scenario.regions[0];
    let config = OptimizerConfig::new(
        scenario.levels.clone().unwrap(),
        scenario.dt,
        scenario.t0.unwrap(),
        scenario.horizon,
        scenario.epsilon,
        region.weights,
        scenario.enforce_herd,
    )
    .unwrap();
    (region.initial.unwrap(), scenario.params, config)
}

struct Criterion {
    number: u32,
    name: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(number: u32, name: &'static str) -> Self {
        Self {
            number,
            name,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.failures.push(detail);
        }
    }

    fn note(&mut self, detail: String) {
        self.notes.push(detail);
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut line = format!("CRITERION {:>2} [{}] {}", self.number, verdict, self.name);
        if !self.notes.is_empty() {
            line.push_str(&format!(" — {}", self.notes.join("; ")));
        }
        println!("{line}");
        for failure in &self.failures {
            println!("    failed: {failure}");
        }
        assert!(
            self.failures.is_empty(),
            "criterion {} failed: {:?}",
            self.number,
            self.failures
        );
    }
}

/// Simulate one region and return (s_final, r_final, i_final, trajectory).
fn run_schedule(
    initial: &SirState,
    params: &SirParams,
    schedule: &PolicySchedule,
    horizon: u32,
) -> (f64, f64, f64, policy_sir::Trajectory) {
    let traj = simulate(
        std::slice::from_ref(initial),
        params,
        &ExcitationMatrix::identity(1),
        std::slice::from_ref(schedule),
        horizon,
    )
    .unwrap()
    .pop()
    .unwrap();
    let last = *traj.final_state();
    (last.s, last.r, last.i, traj)
}

#[test]
fn criterion_01_france_weekly_reproduction() {
    let mut c = Criterion::new(1, "France dt=7 bang-bang reproduction");
    let scenario = load("france_dt7.toml");
    let (initial, params, config) = optimizer_setup(&scenario);
    let started = Instant::now();
    let result = optimize(&initial, &params, &config).unwrap();
    let elapsed = started.elapsed().as_secs_f64();

    c.check(result.feasible, "search is feasible".into());
    c.check(
        result.explored == 4_782_969,
        format!("explored {} of 3^14 = 4782969 schedules", result.explored),
    );
    c.check(
        elapsed < 300.0,
        format!("full search took {elapsed:.1}s, limit 300s"),
    );

    let schedule = result.best_schedule.clone().unwrap();
    let stages = schedule.stages();
    let bang_bang = stages.iter().all(|&v| v == 1.0 || v == 0.0);
    let switches: Vec<usize> = (1..stages.len())
        .filter(|&k| stages[k] != stages[k - 1])
        .collect();
    let single_switch_down =
        bang_bang && switches.len() == 1 && stages[0] == 1.0 && *stages.last().unwrap() == 0.0;
    c.check(
        single_switch_down,
        format!("single 1->0 switch, got stages {stages:?}"),
    );
    let switch_day = switches.first().map(|&k| k as u32 * schedule.dt());
    c.check(
        switch_day == Some(63),
        format!("switch at day 63, got {switch_day:?}"),
    );

    let s_final = result.s_final.unwrap();
    c.note(format!(
        "s_final = {s_final:.4}, switch = {switch_day:?}, {elapsed:.1}s"
    ));
    c.check(
        (s_final - 0.296).abs() <= 0.01,
        format!("s_final = {s_final:.4} within 0.296 +/- 0.01"),
    );
    c.finish();
}

#[test]
fn criterion_02_france_monthly_reproduction() {
    let mut c = Criterion::new(2, "France dt=28 looser-then-stricter optimum");
    let scenario = load("france_dt28.toml");
    let (initial, params, config) = optimizer_setup(&scenario);
    let started = Instant::now();
    let result = optimize(&initial, &params, &config).unwrap();
    let elapsed = started.elapsed().as_secs_f64();

    c.check(result.feasible, "search is feasible".into());
    c.check(
        elapsed < 1.0,
        format!("81-schedule search took {elapsed:.3}s, limit 1s"),
    );
    let schedule = result.best_schedule.clone().unwrap();
    let stages = schedule.stages();
    let looser_then_stricter = stages
        .windows(2)
        .any(|pair| pair[0] == 0.5 && pair[1] == 0.0);
    c.check(
        looser_then_stricter,
        format!("a 0.5 stage immediately before a 0 stage, got {stages:?}"),
    );
    let s_final = result.s_final.unwrap();
    c.note(format!("s_final = {s_final:.4}, stages = {stages:?}"));
    c.check(
        (s_final - 0.32).abs() <= 0.01,
        format!("s_final = {s_final:.4} within 0.32 +/- 0.01"),
    );
    c.finish();
}

/// The reference counterfactual flips the two controlled stages of the
/// monthly optimum in time (strict-then-loose instead of loose-then-strict);
/// the leading no-control stages stay put. Reversing the entire stage vector
/// instead would move all control ahead of the outbreak and reproduce the
/// uncontrolled final size, so this reading is the one the reference values
/// pin down.
fn flip_controlled_block(schedule: &PolicySchedule) -> PolicySchedule {
    let mut stages = schedule.stages().to_vec();
    let controlled: Vec<usize> = (0..stages.len()).filter(|&k| stages[k] < 1.0).collect();
    assert!(
        controlled.windows(2).all(|w| w[1] == w[0] + 1),
        "controlled stages form one contiguous block"
    );
    let block: Vec<f64> = controlled.iter().rev().map(|&k| stages[k]).collect();
    for (&k, &v) in controlled.iter().zip(&block) {
        stages[k] = v;
    }
    PolicySchedule::new(stages, schedule.dt(), schedule.t0()).unwrap()
}

#[test]
fn criterion_03_flipped_policy_counterfactual() {
    let mut c = Criterion::new(3, "flipped monthly policy: second wave");
    let scenario = load("france_dt28.toml");
    let (initial, params, config) = optimizer_setup(&scenario);
    let result = optimize(&initial, &params, &config).unwrap();
    let optimal = result.best_schedule.unwrap();

    let flipped = flip_controlled_block(&optimal);
    let (s_final, _, _, traj) = run_schedule(&initial, &params, &flipped, config.horizon);
    let waves = traj.wave_count(1e-4);

    // whole-vector reversal for reference: all control lands before the
    // outbreak and the epidemic runs free after it
    let reversed =
        PolicySchedule::new(optimal.stages().iter().rev().copied().collect(), 28, 112).unwrap();
    let (s_reversed, _, _, _) = run_schedule(&initial, &params, &reversed, config.horizon);

    c.note(format!(
        "flipped stages = {:?}, s_final = {s_final:.4}, waves = {waves} \
         (whole-vector reversal gives s_final = {s_reversed:.4})",
        flipped.stages()
    ));
    c.check(
        (s_final - 0.174).abs() <= 0.01,
        format!("flipped s_final = {s_final:.4} within 0.174 +/- 0.01"),
    );
    c.check(waves == 2, format!("exactly two waves above 1e-4, got {waves}"));
    c.finish();
}

#[test]
fn criterion_04_herd_thresholds() {
    let mut c = Criterion::new(4, "herd immunity thresholds");
    let threshold = |r0: f64| {
        SirParams::from_r0(r0, 0.1)
            .unwrap()
            .herd_threshold()
            .unwrap()
    };
    c.check(
        (threshold(2.9) - 0.3448).abs() <= 0.0005,
        format!("1/2.9 = {:.5} within 0.3448 +/- 0.0005", threshold(2.9)),
    );
    c.check(threshold(2.0) == 0.5, "1/2 = 0.5 exactly".into());
    c.check(threshold(2.5) == 0.4, "1/2.5 = 0.4 exactly".into());
    c.check(
        (threshold(2.15) - 0.4651).abs() <= 0.0005,
        format!("1/2.15 = {:.5} within 0.4651 +/- 0.0005", threshold(2.15)),
    );
    c.finish();
}

#[test]
fn criterion_05_monotonicity_of_the_optimum() {
    let mut c = Criterion::new(5, "optimum monotone in t0 and alpha_max");
    let scenario = load("france_dt7.toml");
    let initial = scenario.regions[0].initial.unwrap();
    let params = scenario.params;
    let weights = CostWeights::new(0.0, 1.0).unwrap();

    // sup of the terminal susceptible fraction: pure final-size objective,
    // no herd constraint, quiescent horizon
    let best_s = |levels: Vec<f64>, t0: u32| -> f64 {
        let config = OptimizerConfig::new(
            IntensitySet::new(levels).unwrap(),
            7,
            t0,
            scenario.horizon,
            scenario.epsilon,
            weights,
            false,
        )
        .unwrap();
        optimize(&initial, &params, &config).unwrap().s_final.unwrap()
    };

    let by_t0: Vec<f64> = [28, 56, 98]
        .iter()
        .map(|&t0| best_s(vec![0.0, 0.5, 1.0], t0))
        .collect();
    c.note(format!(
        "t0 {{28, 56, 98}} -> s_final {:.4}, {:.4}, {:.4}",
        by_t0[0], by_t0[1], by_t0[2]
    ));
    c.check(
        by_t0[0] <= by_t0[1] && by_t0[1] <= by_t0[2],
        format!("non-decreasing in t0: {by_t0:?}"),
    );

    // alpha_max = 0 at t0 = 98 is the search already done above
    let by_alpha: Vec<f64> = std::iter::once(by_t0[2])
        .chain(
            [0.25, 0.5].iter().map(|&alpha_max| {
                best_s(
                    IntensitySet::three_level(alpha_max).unwrap().levels().to_vec(),
                    98,
                )
            }),
        )
        .collect();
    c.note(format!(
        "alpha_max {{0, 0.25, 0.5}} -> s_final {:.4}, {:.4}, {:.4}",
        by_alpha[0], by_alpha[1], by_alpha[2]
    ));
    c.check(
        by_alpha[0] >= by_alpha[1] && by_alpha[1] >= by_alpha[2],
        format!("non-increasing in alpha_max: {by_alpha:?}"),
    );
    c.finish();
}

#[test]
fn criterion_06_oracle_equivalence() {
    let mut c = Criterion::new(6, "depth-first search equals brute force on 50 instances");
    let mut rng = StdRng::seed_from_u64(1729);
    let mut mismatches = 0u32;
    for instance in 0..50 {
        let n_levels = rng.random_range(2..=3usize);
        let n_stages = rng.random_range(0..=8u32);
        let alpha_max = rng.random_range(0.0..0.5);
        let levels = if n_levels == 2 {
            vec![alpha_max, 1.0]
        } else {
            vec![alpha_max, (alpha_max + 1.0) / 2.0, 1.0]
        };
        let dt = *[7u32, 14].get(rng.random_range(0..2usize)).unwrap();
        let t0 = n_stages * dt;
        let horizon = t0 + rng.random_range(100..400u32);
        let r0 = rng.random_range(1.5..3.5);
        let kappa = rng.random_range(0.0..1.0);
        let i0 = rng.random_range(1e-6..0.05);
        let rec0 = rng.random_range(0.0..0.3);
        let enforce_herd = rng.random_range(0..2) == 1;
        let epsilon = rng.random_range(0.01..0.3);

        let params = SirParams::from_r0(r0, 0.1).unwrap();
        let initial = SirState::from_fractions(i0, rec0).unwrap();
        let config = OptimizerConfig::new(
            IntensitySet::new(levels).unwrap(),
            dt,
            t0,
            horizon,
            epsilon,
            CostWeights::new(kappa, 1.0 - kappa).unwrap(),
            enforce_herd,
        )
        .unwrap();

        let dfs = optimize(&initial, &params, &config).unwrap();
        let oracle = brute_force_oracle(&initial, &params, &config).unwrap();
        let equal = dfs.feasible == oracle.feasible
            && dfs.explored == oracle.explored
            && dfs.best_schedule == oracle.best_schedule
            && dfs.s_final.map(f64::to_bits) == oracle.s_final.map(f64::to_bits)
            && dfs.best_cost.map(|x| x.total.to_bits())
                == oracle.best_cost.map(|x| x.total.to_bits());
        if !equal {
            mismatches += 1;
            c.check(false, format!("instance {instance}: dfs != oracle"));
        }
    }
    c.note(format!("50 randomized instances, {mismatches} mismatches"));
    c.finish();
}

#[test]
fn criterion_07_conservation_suite() {
    let mut c = Criterion::new(7, "a million random steps conserve mass");
    let mut rng = StdRng::seed_from_u64(99);
    let mut worst: f64 = 0.0;

    let random_state = |rng: &mut StdRng| {
        let a: f64 = rng.random_range(0.0..1.0);
        let b: f64 = rng.random_range(0.0..1.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        SirState {
            s: lo,
            i: hi - lo,
            r: 1.0 - hi,
        }
    };

    for _ in 0..500_000 {
        let params = SirParams::from_rates(
            rng.random_range(0.01..1.0),
            rng.random_range(0.01..1.0),
        )
        .unwrap();
        let st = random_state(&mut rng);
        let alpha = rng.random_range(0.0..1.0);
        let next = step_single(&st, &params, alpha).unwrap();
        let drift = ((next.s + next.i + next.r) - (st.s + st.i + st.r)).abs();
        worst = worst.max(drift);
        let bounded = [next.s, next.i, next.r]
            .iter()
            .all(|v| (0.0..=1.0).contains(v));
        if drift > 1e-12 || !bounded {
            c.check(false, format!("single step drift {drift:e} or out of bounds"));
            break;
        }
    }

    // 167k network steps x 3 regions ~ 500k compartment updates. The
    // stability guard generalizes to networks as beta * (row sum of K) <= 1;
    // beta is sampled inside that region.
    'network: for _ in 0..167_000 {
        let coupling = rng.random_range(0.0..0.5);
        let params = SirParams::from_rates(
            rng.random_range(0.01..0.99 / (1.0 + coupling)),
            rng.random_range(0.01..1.0),
        )
        .unwrap();
        let states = vec![
            random_state(&mut rng),
            random_state(&mut rng),
            random_state(&mut rng),
        ];
        let k = ExcitationMatrix::new(vec![
            vec![1.0, coupling, 0.0],
            vec![0.0, 1.0, coupling],
            vec![coupling, 0.0, 1.0],
        ])
        .unwrap();
        let alphas = [
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        ];
        let next = step_network(&states, &params, &k, &alphas).unwrap();
        for (before, after) in states.iter().zip(&next) {
            let drift = ((after.s + after.i + after.r) - (before.s + before.i + before.r)).abs();
            worst = worst.max(drift);
            let bounded = [after.s, after.i, after.r]
                .iter()
                .all(|v| (0.0..=1.0).contains(v));
            if drift > 1e-12 || !bounded {
                c.check(false, format!("network step drift {drift:e} or out of bounds"));
                break 'network;
            }
        }
    }
    c.note(format!("worst per-step drift {worst:.2e}"));
    c.check(worst <= 1e-12, format!("drift bound 1e-12, got {worst:e}"));
    c.finish();
}

#[test]
fn criterion_08_three_county_game() {
    let mut c = Criterion::new(8, "three-county game with and without intervention");
    let scenario = load("three_county.toml");
    let tree = scenario.region_tree().unwrap();
    let params = scenario.params;

    // without intervention: everyone reaches herd immunity (s < 0.5)
    let initials: Vec<SirState> = scenario.regions.iter().map(|r| r.initial.unwrap()).collect();
    let uncontrolled: Vec<PolicySchedule> =
        (0..3).map(|_| PolicySchedule::uncontrolled()).collect();
    let free = simulate(&initials, &params, &scenario.k, &uncontrolled, scenario.horizon).unwrap();
    for (idx, traj) in free.iter().enumerate() {
        let s = traj.final_state().s;
        c.check(
            s < 0.5,
            format!("no intervention: county {} ends s = {s:.4} < 0.5", idx + 1),
        );
    }

    let config = GameConfig {
        intensity_set: scenario.levels.clone().unwrap(),
        dt: scenario.dt,
        horizon: scenario.horizon,
    };
    let outcome = run_game(&tree, &params, &scenario.k, &config).unwrap();
    for (id, schedule) in &outcome.schedules {
        for day in 0..7 {
            c.check(
                schedule.value_at(day) == 1.0,
                format!("{id}: no restriction before day 7"),
            );
        }
        c.check(
            schedule.value_at(7) < 1.0,
            format!(
                "{id}: restriction in force on day 7, got {}",
                schedule.value_at(7)
            ),
        );
    }
    let finals: Vec<f64> = outcome
        .trajectories
        .iter()
        .map(|(_, t)| t.final_state().s)
        .collect();
    c.note(format!(
        "s_final = {:.4}, {:.4}, {:.4}",
        finals[0], finals[1], finals[2]
    ));
    c.check(
        (finals[0] - 0.5).abs() <= 0.05,
        format!("county 1 ends within 0.05 of herd threshold 0.5, got {:.4}", finals[0]),
    );
    c.check(
        finals[1] > 0.5,
        format!("county 2 contained before herd immunity, s = {:.4}", finals[1]),
    );
    c.check(
        finals[2] > 0.5,
        format!("county 3 contained before herd immunity, s = {:.4}", finals[2]),
    );
    c.finish();
}

#[test]
fn criterion_09_state_compliance_convergence() {
    let mut c = Criterion::new(9, "counties adopt the state policy exactly");
    let scenario = load("three_county_state.toml");
    let tree = scenario.region_tree().unwrap();
    let config = GameConfig {
        intensity_set: scenario.levels.clone().unwrap(),
        dt: scenario.dt,
        horizon: scenario.horizon,
    };
    let outcome = run_game(&tree, &scenario.params, &scenario.k, &config).unwrap();
    let state = outcome
        .schedules
        .iter()
        .find(|(id, _)| id == "state")
        .map(|(_, s)| s.clone())
        .unwrap();
    for (id, schedule) in &outcome.schedules {
        if id == "state" {
            continue;
        }
        c.check(
            schedule.stages() == state.stages(),
            format!("{id} equals the state schedule at every interval"),
        );
    }
    c.note(format!(
        "state stages (first 10) = {:?}",
        &state.stages()[..10.min(state.stages().len())]
    ));
    c.finish();
}

/// Bisection root of the final-size relation `x = s0 * exp(-r0 * (1 - x))`,
/// independent of the simulation path.
fn final_size_fixed_point(s0: f64, r0: f64) -> f64 {
    let f = |x: f64| x - s0 * (-r0 * (1.0 - x)).exp();
    let (mut lo, mut hi) = (1e-12, 1.0 / r0);
    assert!(f(lo) < 0.0 && f(hi) > 0.0, "bisection bracket");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_10_final_size_oracle_and_la_shapes() {
    let mut c = Criterion::new(10, "final-size oracle and LA policy shapes");

    // uncontrolled final size vs the analytic fixed point. The unit-day
    // update is a faithful integrator when the daily rates are small, so the
    // oracle comparison runs at gamma = 0.03 (criterion pins R0 = 2.9 only).
    let params = SirParams::from_r0(2.9, 0.03).unwrap();
    let initial = SirState::from_counts(6.7e7, 1e3, 0.0).unwrap();
    let (s_sim, _, i_end, _) =
        run_schedule(&initial, &params, &PolicySchedule::uncontrolled(), 1500);
    let s_oracle = final_size_fixed_point(initial.s, 2.9);
    c.note(format!(
        "uncontrolled s_final = {s_sim:.5} vs bisection {s_oracle:.5}"
    ));
    c.check(
        i_end < 1e-9,
        format!("uncontrolled run is quiescent at the horizon, i = {i_end:.2e}"),
    );
    c.check(
        (s_sim - s_oracle).abs() <= 0.002,
        format!(
            "simulated {s_sim:.5} within 0.002 of bisection {s_oracle:.5} (gap {:.2e})",
            (s_sim - s_oracle).abs()
        ),
    );

    // LA counterfactuals: shape assertions substitute for unreported values.
    let la = |r0_tag: &str, rec: u32| format!("la_{r0_tag}_r0frac0{rec}.toml");
    for r0_tag in ["r025", "r0215"] {
        let mut block_days = Vec::new();
        for rec in [1u32, 2, 3] {
            let scenario = load(&la(r0_tag, rec));
            let (initial, params, config) = optimizer_setup(&scenario);
            let alpha_max = config.intensity_set.alpha_max();
            let result = optimize(&initial, &params, &config).unwrap();
            c.check(result.feasible, format!("{}: feasible", la(r0_tag, rec)));
            let schedule = result.best_schedule.unwrap();
            let stages = schedule.stages();

            // one contiguous restriction episode
            let controlled: Vec<usize> =
                (0..stages.len()).filter(|&k| stages[k] < 1.0).collect();
            let contiguous = !controlled.is_empty()
                && controlled.windows(2).all(|w| w[1] == w[0] + 1);
            c.check(
                contiguous,
                format!("{}: one restriction episode, stages {stages:?}", la(r0_tag, rec)),
            );

            // the episode starts near the uncontrolled infected peak
            let (_, _, _, free) =
                run_schedule(&initial, &params, &PolicySchedule::uncontrolled(), 400);
            let peak_day = free
                .states
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.i.partial_cmp(&b.1.i).unwrap())
                .map(|(day, _)| day as i64)
                .unwrap();
            let start_day = controlled.first().map(|&k| k as i64 * 7).unwrap_or(0);
            c.check(
                (start_day - peak_day).abs() <= 14,
                format!(
                    "{}: episode starts day {start_day}, uncontrolled peak day {peak_day}",
                    la(r0_tag, rec)
                ),
            );

            let days_at_max =
                stages.iter().filter(|&&v| v == alpha_max).count() as u32 * 7;
            block_days.push(days_at_max);
        }
        c.note(format!(
            "{r0_tag}: high-intensity days over r0 {{0.1, 0.2, 0.3}} = {block_days:?}"
        ));
        c.check(
            block_days[0] >= block_days[1] && block_days[1] >= block_days[2],
            format!("{r0_tag}: high-intensity block length non-increasing: {block_days:?}"),
        );
    }
    c.finish();
}
