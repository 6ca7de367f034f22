//! Experiment orchestration: replication sweeps, interval-coverage studies,
//! and regret-vs-n studies, all deterministic under a master seed.
//!
//! Seed discipline: every (replication, n-grid index) cell gets a base seed
//! `derive(master, r·64 + j)`; training data, test data, stress sets, Θ
//! initializations, and agreement contexts each draw from their own stream of
//! that base. Partial reruns with the same master therefore reproduce any
//! cell bit-for-bit regardless of which other cells run.

use crate::env_select::EnvKind;
use crate::report::{ReplicationRecord, RunReport};
use drobandit::bayes::{bayes_dro_policy, population_qdro, GaussianEnvironment, OraclePolicy};
use drobandit::dual::{solve_dual, DualCurve, EvaluationReport, SolverConfig};
use drobandit::learn::{learn_dro_with, learn_lin, GdConfig, OuterConfig};
use drobandit::policy::Policy;
use drobandit::seeds;
use drobandit::sim::{generate_dataset, make_full_info_set, q_min, FullInfoSet};
use drobandit::Result;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Seed stream tags within one replication cell.
const STREAM_TRAIN: u64 = 0;
const STREAM_TEST: u64 = 1;
const STREAM_QMIN: u64 = 2;
const STREAM_LIN_INIT: u64 = 3;
const STREAM_DRO_INIT: u64 = 4;
const STREAM_AGREE: u64 = 5;
/// Master-level stream for the robust oracle policy's Monte Carlo contexts.
const STREAM_ORACLE: u64 = u64::MAX - 1;

/// Configuration of a full replication experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub env: EnvKind,
    pub delta: f64,
    /// Training set sizes.
    pub n_grid: Vec<usize>,
    /// Test set size n′.
    pub n_test: usize,
    pub replications: usize,
    pub master_seed: u64,
    /// Stress sets per Q̂_min computation (0 disables Q̂_min).
    pub qmin_sets: usize,
    /// Rows per stress set.
    pub qmin_n: usize,
    /// Monte Carlo contexts for the robust oracle policy and agreement rates
    /// (0 disables agreement reporting).
    pub oracle_mc: usize,
    #[serde(skip)]
    pub gd: GdConfig,
    #[serde(skip)]
    pub solver: SolverConfig,
    #[serde(skip)]
    pub outer: OuterConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            env: EnvKind::Nonlinear,
            delta: 0.2,
            n_grid: vec![500, 1000, 1500, 2000, 2500],
            n_test: 2500,
            replications: 30,
            master_seed: 2024,
            qmin_sets: 100,
            qmin_n: 2500,
            oracle_mc: 100_000,
            gd: GdConfig::default(),
            solver: SolverConfig::default(),
            outer: OuterConfig::default(),
        }
    }
}

/// Robust value of a policy on a full-information test set: the test set is
/// reinterpreted as an on-policy log (propensity one), so the evaluation is a
/// plug-in under the test empirical measure with no importance noise.
pub fn test_set_value(
    test: &FullInfoSet,
    policy: &dyn Policy,
    delta: f64,
    solver: &SolverConfig,
) -> Result<EvaluationReport> {
    let logged = test.to_onpolicy_logged(policy)?;
    let curve = DualCurve::new(&logged, policy, delta)?;
    solve_dual(&curve, solver)
}

/// Share of seeded random contexts on which two policies pick the same
/// action.
pub fn agreement_rate(
    env: &GaussianEnvironment,
    a: &dyn Policy,
    b: &dyn Policy,
    contexts: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = seeds::rng(seed);
    let mut agree = 0usize;
    for _ in 0..contexts {
        let x = env.sample_context(&mut rng);
        if a.action(&x)? == b.action(&x)? {
            agree += 1;
        }
    }
    Ok(agree as f64 / contexts as f64)
}

fn failed_record(replication: usize, seed: u64, policy: &str, n_train: usize, err: String) -> ReplicationRecord {
    ReplicationRecord {
        replication,
        seed,
        policy: policy.to_string(),
        n_train,
        qdro: f64::NAN,
        alpha: f64::NAN,
        std_error: f64::NAN,
        qmin: None,
        oracle_agreement: None,
        wall_time_s: 0.0,
        error: Some(err),
    }
}

/// Runs the replication experiment: per replication and training size, learn
/// a non-robust and a robust policy on fresh training data, score both on a
/// fresh test set (robust value) and on shared stress sets (worst mean
/// reward), and record agreement with the corresponding oracle policies.
/// Failures are recorded per cell and the sweep continues.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunReport> {
    let env = spec.env.env();
    let table = spec.env.default_table();
    let oracles = if spec.oracle_mc > 0 {
        let (dro_oracle, _) = bayes_dro_policy(
            &env,
            spec.delta,
            spec.oracle_mc,
            seeds::derive(spec.master_seed, STREAM_ORACLE),
        )?;
        Some((env.bayes_oracle(), dro_oracle))
    } else {
        None
    };

    let mut records = Vec::new();
    for r in 0..spec.replications {
        for (j, &n) in spec.n_grid.iter().enumerate() {
            let base = seeds::derive(spec.master_seed, (r as u64) * 64 + j as u64);
            match run_cell(spec, &env, &table, oracles.as_ref(), r, base, n) {
                Ok(mut cell) => records.append(&mut cell),
                Err(e) => {
                    // Data generation failed: both policies of the cell fail.
                    records.push(failed_record(r, base, "lin", n, e.to_string()));
                    records.push(failed_record(r, base, "dro", n, e.to_string()));
                }
            }
        }
    }
    Ok(RunReport::new(
        "experiment",
        serde_json::to_value(spec).expect("spec serializes"),
        records,
    ))
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    spec: &ExperimentSpec,
    env: &GaussianEnvironment,
    table: &drobandit::sim::LoggingPolicyTable,
    oracles: Option<&(OraclePolicy, OraclePolicy)>,
    r: usize,
    base: u64,
    n: usize,
) -> Result<Vec<ReplicationRecord>> {
    let train = generate_dataset(env, table, n, seeds::derive(base, STREAM_TRAIN))?;
    let test = make_full_info_set(env, spec.n_test, seeds::derive(base, STREAM_TEST))?;
    let qmin_seed = seeds::derive(base, STREAM_QMIN);
    let agree_seed = seeds::derive(base, STREAM_AGREE);
    let mut records = Vec::with_capacity(2);

    for kind in ["lin", "dro"] {
        let start = Instant::now();
        let outcome: Result<ReplicationRecord> = (|| {
            let policy: Box<dyn Policy> = match kind {
                "lin" => Box::new(learn_lin(
                    &train,
                    &GdConfig {
                        seed: seeds::derive(base, STREAM_LIN_INIT),
                        ..spec.gd.clone()
                    },
                )?),
                _ => {
                    let (p, _, _) = learn_dro_with(
                        &train,
                        spec.delta,
                        &GdConfig {
                            seed: seeds::derive(base, STREAM_DRO_INIT),
                            ..spec.gd.clone()
                        },
                        &spec.solver,
                        &spec.outer,
                    )?;
                    Box::new(p)
                }
            };
            let eval = test_set_value(&test, policy.as_ref(), spec.delta, &spec.solver)?;
            let qmin = if spec.qmin_sets > 0 {
                // The same stress sets score both policies: the comparison is
                // paired.
                Some(q_min(env, policy.as_ref(), spec.delta, spec.qmin_sets, spec.qmin_n, qmin_seed)?)
            } else {
                None
            };
            let oracle_agreement = match oracles {
                Some((bayes, dro_oracle)) => {
                    let oracle: &dyn Policy = if kind == "lin" { bayes } else { dro_oracle };
                    Some(agreement_rate(env, policy.as_ref(), oracle, 10_000, agree_seed)?)
                }
                None => None,
            };
            Ok(ReplicationRecord {
                replication: r,
                seed: base,
                policy: kind.to_string(),
                n_train: n,
                qdro: eval.value,
                alpha: eval.alpha_star,
                std_error: eval.std_error,
                qmin,
                oracle_agreement,
                wall_time_s: start.elapsed().as_secs_f64(),
                error: None,
            })
        })();
        records.push(outcome.unwrap_or_else(|e| failed_record(r, base, kind, n, e.to_string())));
    }
    Ok(records)
}

/// Result of an interval-coverage study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Ground-truth population robust value of the fixed policy.
    pub truth: f64,
    pub replications: usize,
    pub covered: usize,
    /// covered / replications.
    pub rate: f64,
    /// Mean point estimate across replications.
    pub mean_estimate: f64,
    /// Mean half-width of the nominal intervals.
    pub mean_half_width: f64,
}

/// Checks asymptotic-interval coverage of the robust value estimator for a
/// fixed policy: per replication, a fresh logged dataset of size n is drawn,
/// the dual is solved, and the nominal `z`-interval
/// value ± z·σ̂/√n is tested against the population value (computed once by
/// Monte Carlo with `truth_mc` contexts).
#[allow(clippy::too_many_arguments)]
pub fn coverage_study(
    kind: EnvKind,
    policy: &dyn Policy,
    delta: f64,
    n: usize,
    replications: usize,
    z: f64,
    truth_mc: usize,
    master_seed: u64,
    solver: &SolverConfig,
) -> Result<CoverageReport> {
    let env = kind.env();
    let table = kind.default_table();
    let truth = population_qdro(&env, policy, delta, truth_mc, seeds::derive(master_seed, STREAM_ORACLE))?;
    let mut covered = 0usize;
    let mut sum_est = 0.0;
    let mut sum_hw = 0.0;
    for r in 0..replications {
        let data = generate_dataset(&env, &table, n, seeds::derive(master_seed, r as u64))?;
        let curve = DualCurve::new(&data, policy, delta)?;
        let rep = solve_dual(&curve, solver)?;
        let hw = z * rep.std_error;
        if (rep.value - truth).abs() <= hw {
            covered += 1;
        }
        sum_est += rep.value;
        sum_hw += hw;
    }
    Ok(CoverageReport {
        truth,
        replications,
        covered,
        rate: covered as f64 / replications as f64,
        mean_estimate: sum_est / replications as f64,
        mean_half_width: sum_hw / replications as f64,
    })
}

/// One row of a regret study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretRow {
    pub n_train: usize,
    pub replications: usize,
    /// Mean population-value gap to the robust oracle policy.
    pub mean_regret: f64,
    pub std_regret: f64,
    /// mean_regret · √n.
    pub sqrt_n_scaled: f64,
}

/// Measures how fast the robust learner closes on the robust oracle: for
/// each training size, the mean gap between the oracle's population robust
/// value and the learned policy's, under common Monte Carlo context draws.
#[allow(clippy::too_many_arguments)]
pub fn regret_study(
    kind: EnvKind,
    delta: f64,
    n_grid: &[usize],
    replications: usize,
    value_mc: usize,
    oracle_mc: usize,
    master_seed: u64,
    gd: &GdConfig,
    solver: &SolverConfig,
    outer: &OuterConfig,
) -> Result<Vec<RegretRow>> {
    let env = kind.env();
    let table = kind.default_table();
    let oracle_seed = seeds::derive(master_seed, STREAM_ORACLE);
    let (oracle, _) = bayes_dro_policy(&env, delta, oracle_mc, oracle_seed)?;
    // Common context draws for every population value kill most of the Monte
    // Carlo noise in the differences.
    let value_seed = seeds::derive(master_seed, u64::MAX - 2);
    let oracle_value = population_qdro(&env, &oracle, delta, value_mc, value_seed)?;

    let mut rows = Vec::with_capacity(n_grid.len());
    for (j, &n) in n_grid.iter().enumerate() {
        let mut regrets = Vec::with_capacity(replications);
        for r in 0..replications {
            let base = seeds::derive(master_seed, (r as u64) * 64 + j as u64);
            let train = generate_dataset(&env, &table, n, seeds::derive(base, STREAM_TRAIN))?;
            let (policy, _, _) = learn_dro_with(
                &train,
                delta,
                &GdConfig {
                    seed: seeds::derive(base, STREAM_DRO_INIT),
                    ..gd.clone()
                },
                solver,
                outer,
            )?;
            let value = population_qdro(&env, &policy, delta, value_mc, value_seed)?;
            regrets.push(oracle_value - value);
        }
        let (mean, std) = crate::report::mean_std(&regrets);
        rows.push(RegretRow {
            n_train: n,
            replications,
            mean_regret: mean,
            std_regret: std,
            sqrt_n_scaled: mean * (n as f64).sqrt(),
        });
    }
    Ok(rows)
}

/// Action map of a policy over the (x(1), x(2)) square [−1, 1]², remaining
/// coordinates zero: `resolution`² rows of (x1, x2, action).
pub fn boundary_grid(policy: &dyn Policy, dim: usize, resolution: usize) -> Result<Vec<(f64, f64, usize)>> {
    let mut rows = Vec::with_capacity(resolution * resolution);
    let step = if resolution > 1 { 2.0 / (resolution - 1) as f64 } else { 0.0 };
    for i in 0..resolution {
        let x1 = -1.0 + step * i as f64;
        for j in 0..resolution {
            let x2 = -1.0 + step * j as f64;
            let mut x = vec![0.0; dim];
            x[0] = x1;
            if dim > 1 {
                x[1] = x2;
            }
            rows.push((x1, x2, policy.action(&x)?));
        }
    }
    Ok(rows)
}

/// Writes a boundary grid as CSV (x1, x2, action).
pub fn write_boundary_csv<W: std::io::Write>(writer: W, rows: &[(f64, f64, usize)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x1", "x2", "action"])?;
    for (x1, x2, a) in rows {
        w.write_record([format!("{x1}"), format!("{x2}"), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_grid_shape_and_orientation() {
        let env = EnvKind::Linear.env();
        let bayes = env.bayes_oracle();
        let rows = boundary_grid(&bayes, 5, 21).unwrap();
        assert_eq!(rows.len(), 441);
        // Cell (1, 0): action 1 dominates on the positive x1 axis.
        let cell = rows.iter().find(|(x1, x2, _)| *x1 == 1.0 && *x2 == 0.0).unwrap();
        assert_eq!(cell.2, 1);
        // Upper half favors action 2, lower half action 3.
        let up = rows.iter().find(|(x1, x2, _)| *x1 == -0.5 && *x2 == 0.8).unwrap();
        assert_eq!(up.2, 2);
        let down = rows.iter().find(|(x1, x2, _)| *x1 == -0.5 && *x2 == -0.8).unwrap();
        assert_eq!(down.2, 3);
    }

    #[test]
    fn test_set_value_matches_direct_solve() {
        let env = EnvKind::Linear.env();
        let test = make_full_info_set(&env, 800, 3).unwrap();
        let policy = env.bayes_oracle();
        let rep = test_set_value(&test, &policy, 0.2, &SolverConfig::default()).unwrap();
        assert!(rep.value.is_finite() && rep.alpha_star > 0.0);
        // On-policy: estimate must not exceed the plain test mean.
        assert!(rep.value < test.mean_reward(&policy).unwrap());
    }

    #[test]
    fn agreement_rate_bounds() {
        let env = EnvKind::Linear.env();
        let bayes = env.bayes_oracle();
        assert_eq!(agreement_rate(&env, &bayes, &bayes, 500, 1).unwrap(), 1.0);
        let const1 = drobandit::policy::TablePolicy::new(vec![], 1, 3);
        let rate = agreement_rate(&env, &bayes, &const1, 2000, 2).unwrap();
        assert!(rate > 0.2 && rate < 0.5, "constant action matches one sector: {rate}");
    }

    #[test]
    fn small_experiment_report_is_consistent() {
        let spec = ExperimentSpec {
            env: EnvKind::Linear,
            n_grid: vec![300],
            n_test: 500,
            replications: 2,
            qmin_sets: 5,
            qmin_n: 400,
            oracle_mc: 2000,
            gd: GdConfig {
                max_epochs: 60,
                ..GdConfig::default()
            },
            outer: OuterConfig {
                max_outer: 5,
                ..OuterConfig::default()
            },
            ..ExperimentSpec::default()
        };
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.records.len(), 4); // 2 reps × 2 policies
        assert!(report.records.iter().all(|r| r.error.is_none()));
        assert_eq!(report.aggregates, RunReport::compute_aggregates(&report.records));
        for rec in &report.records {
            assert!(rec.qdro.is_finite());
            assert!(rec.qmin.unwrap().is_finite());
            assert!(rec.oracle_agreement.unwrap() > 0.3);
            // Stress sets drag the value below the clean test value.
            assert!(rec.qmin.unwrap() < rec.qdro + 0.5);
        }
        // Determinism of everything but wall time.
        let key = |r: &ReplicationRecord| {
            (
                r.replication,
                r.seed,
                r.policy.clone(),
                r.n_train,
                r.qdro.to_bits(),
                r.alpha.to_bits(),
                r.std_error.to_bits(),
                r.qmin.map(f64::to_bits),
                r.oracle_agreement.map(f64::to_bits),
            )
        };
        let again = run_experiment(&spec).unwrap();
        let lhs: Vec<_> = again.records.iter().map(key).collect();
        let rhs: Vec<_> = report.records.iter().map(key).collect();
        assert_eq!(lhs, rhs);
    }
}
