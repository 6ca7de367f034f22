//! Cross-module properties on randomized instances and at statistical scale.

use drobandit::dual::{solve_dual, worst_case_weights, DualCurve, SolverConfig};
use drobandit::learn::{learn_dro_with, GdConfig, OuterConfig};
use drobandit::policy::Policy;
use drobandit::sim::{
    generate_dataset, make_full_info_set, make_linear_env, make_nonlinear_env, LoggingPolicyTable,
};
use drobandit::{seeds, LoggedDataset};
use rand::Rng;

/// Random weighted instance: propensity-style weights and bounded rewards,
/// with occasional ties so the minimum is not always unique.
fn random_instance(seed: u64, max_points: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = seeds::rng(seed);
    let n = rng.gen_range(2..=max_points);
    let mut ipw = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    for _ in 0..n {
        ipw.push(1.0 / rng.gen_range(0.1..1.0));
        let y: f64 = rng.gen_range(-2.0..2.0);
        // Duplicate some reward values to exercise tied minima.
        rewards.push(if rng.gen::<f64>() < 0.3 { y.round() } else { y });
    }
    (ipw, rewards)
}

#[test]
fn dual_value_is_shift_equivariant() {
    // Q̂_DRO(Y + c) = Q̂_DRO(Y) + c with the same maximizer: the worst-case
    // reweighting does not care about the reward origin.
    let cfg = SolverConfig::default();
    for seed in 0..40 {
        let (ipw, rewards) = random_instance(seed, 30);
        let base = solve_dual(&DualCurve::from_weights(&ipw, &rewards, 0.15).unwrap(), &cfg).unwrap();
        for c in [-3.0, 7.5] {
            let shifted: Vec<f64> = rewards.iter().map(|y| y + c).collect();
            let rep = solve_dual(&DualCurve::from_weights(&ipw, &shifted, 0.15).unwrap(), &cfg).unwrap();
            assert!(
                (rep.value - (base.value + c)).abs() < 1e-9,
                "seed {seed}, c {c}: {} vs {}",
                rep.value,
                base.value + c
            );
            if !base.boundary {
                assert!(
                    (rep.alpha_star - base.alpha_star).abs() < 1e-5 * (1.0 + base.alpha_star),
                    "seed {seed}, c {c}: alpha {} vs {}",
                    rep.alpha_star,
                    base.alpha_star
                );
            }
        }
    }
}

#[test]
fn dual_value_is_scale_equivariant() {
    // Q̂_DRO(λY) = λ·Q̂_DRO(Y) and α*(λY) = λ·α*(Y) for λ > 0: the dual
    // variable carries the units of the rewards.
    let cfg = SolverConfig::default();
    for seed in 40..80 {
        let (ipw, rewards) = random_instance(seed, 30);
        let base = solve_dual(&DualCurve::from_weights(&ipw, &rewards, 0.2).unwrap(), &cfg).unwrap();
        let lambda = 3.7;
        let scaled: Vec<f64> = rewards.iter().map(|y| lambda * y).collect();
        let rep = solve_dual(&DualCurve::from_weights(&ipw, &scaled, 0.2).unwrap(), &cfg).unwrap();
        assert!(
            (rep.value - lambda * base.value).abs() < 1e-8 * lambda,
            "seed {seed}: {} vs {}",
            rep.value,
            lambda * base.value
        );
        if !base.boundary {
            assert!((rep.alpha_star - lambda * base.alpha_star).abs() < 1e-4 * lambda * base.alpha_star);
        }
    }
}

#[test]
fn worst_case_weights_certify_the_value() {
    // At an interior optimum the tilted weights are feasible (KL = δ) and
    // their reward expectation reproduces the dual value — a primal
    // certificate that the solver found the right point.
    let cfg = SolverConfig::default();
    let mut interior = 0;
    for seed in 80..140 {
        let (ipw, rewards) = random_instance(seed, 25);
        let curve = DualCurve::from_weights(&ipw, &rewards, 0.12).unwrap();
        let rep = solve_dual(&curve, &cfg).unwrap();
        if rep.boundary {
            continue;
        }
        interior += 1;
        let (q, kl) = worst_case_weights(&curve, rep.alpha_star).unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((kl - 0.12).abs() < 1e-5, "seed {seed}: achieved KL {kl}");
        let matched = curve.matched_indices();
        let tilted_mean: f64 = q
            .iter()
            .zip(matched)
            .map(|(qi, &i)| qi * rewards[i])
            .sum();
        assert!(
            (tilted_mean - rep.value).abs() < 1e-7,
            "seed {seed}: certificate {tilted_mean} vs value {}",
            rep.value
        );
    }
    assert!(interior >= 40, "only {interior} interior instances; generator drifted");
}

#[test]
fn self_normalization_concentrates() {
    // S_n = (1/n)·Σ 1{π(X)=A}/π₀(A|X) has expectation 1 under correct
    // propensities; at n = 10⁵ it should sit within a percent of it.
    let env = make_linear_env();
    let data = generate_dataset(&env, &LoggingPolicyTable::linear_default(), 100_000, 271).unwrap();
    let policy = env.bayes_oracle();
    let curve = DualCurve::new(&data, &policy, 0.2).unwrap();
    assert!((curve.s_n() - 1.0).abs() < 0.02, "S_n = {}", curve.s_n());
    // Matched fraction: the logging table plays the Bayes action half the
    // time in its own region.
    let frac = curve.matched() as f64 / curve.n() as f64;
    assert!((frac - 0.5).abs() < 0.02, "matched fraction {frac}");
}

#[test]
fn onpolicy_test_sets_are_exact() {
    // Reinterpreting a full-information set as an on-policy log makes the
    // normalizer exactly 1 and the plain value exactly the set mean — no
    // importance weighting noise.
    let env = make_nonlinear_env();
    let set = make_full_info_set(&env, 3000, 99).unwrap();
    let policy = env.bayes_oracle();
    let logged = set.to_onpolicy_logged(&policy).unwrap();
    let curve = DualCurve::new(&logged, &policy, 0.2).unwrap();
    assert_eq!(curve.s_n(), 1.0);
    assert_eq!(curve.matched(), set.n());
    let mean = set.mean_reward(&policy).unwrap();
    assert!((curve.ipw_value() - mean).abs() < 1e-12);
}

#[test]
fn reward_range_metadata_respects_negative_scales() {
    // Environments with negative rewards round-trip through the logged
    // dataset with their true range; robust evaluation then works on the
    // raw scale (no shifting).
    let env = make_linear_env();
    let data = generate_dataset(&env, &LoggingPolicyTable::linear_default(), 2000, 5).unwrap();
    assert!(data.rewards().iter().cloned().fold(f64::INFINITY, f64::min) < 0.0);
    assert_eq!(data.reward_range(), (-5.8, 5.8));
    let mut buf = Vec::new();
    data.to_csv_writer(&mut buf).unwrap();
    let back = LoggedDataset::from_csv_reader(&buf[..]).unwrap();
    assert_eq!(back.rewards(), data.rewards());
    let cfg = SolverConfig::default();
    let v = solve_dual(&DualCurve::new(&back, &env.bayes_oracle(), 0.2).unwrap(), &cfg).unwrap();
    assert!(v.value.is_finite());
}

#[test]
fn full_pipeline_is_bit_reproducible() {
    // generate → learn (robust) → evaluate twice from the same seeds gives
    // identical bits end to end.
    let env = make_linear_env();
    let run = || {
        let data = generate_dataset(&env, &LoggingPolicyTable::linear_default(), 1200, 31).unwrap();
        let (policy, report, diag) = learn_dro_with(
            &data,
            0.2,
            &GdConfig {
                seed: 9,
                max_epochs: 200,
                ..GdConfig::default()
            },
            &SolverConfig::default(),
            &OuterConfig {
                max_outer: 10,
                ..OuterConfig::default()
            },
        )
        .unwrap();
        (policy.theta().clone(), report, diag.qdro_trajectory)
    };
    let (t1, r1, q1) = run();
    let (t2, r2, q2) = run();
    assert_eq!(t1, t2);
    assert_eq!(r1, r2);
    assert_eq!(q1, q2);
}

#[test]
fn learned_policies_beat_constants_on_robust_value() {
    // A sanity benchmark: the robust learner should produce a policy whose
    // test-set robust value at least matches the best constant action's.
    let env = make_linear_env();
    let data = generate_dataset(&env, &LoggingPolicyTable::linear_default(), 3000, 17).unwrap();
    let (policy, _, _) = learn_dro_with(
        &data,
        0.2,
        &GdConfig::default(),
        &SolverConfig::default(),
        &OuterConfig::default(),
    )
    .unwrap();
    let test = make_full_info_set(&env, 4000, 18).unwrap();
    let robust_value = |p: &dyn Policy| {
        let logged = test.to_onpolicy_logged(p).unwrap();
        let curve = DualCurve::new(&logged, p, 0.2).unwrap();
        solve_dual(&curve, &SolverConfig::default()).unwrap().value
    };
    let learned = robust_value(&policy);
    for a in 1..=3 {
        let constant = drobandit::policy::TablePolicy::new(vec![], a, 3);
        let v = robust_value(&constant);
        assert!(
            learned >= v - 0.01,
            "constant action {a} at {v} beats learned policy at {learned}"
        );
    }
}
