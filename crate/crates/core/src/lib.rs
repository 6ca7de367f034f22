//! Distributionally robust off-policy evaluation and learning for contextual
//! bandits.
//!
//! Logged bandit data records, per round, a context, the action chosen by a
//! known logging policy, its propensity, and the realized reward of that
//! action alone. Classical importance-weighted estimators answer "how would
//! policy π have performed on the logging distribution?"; the estimators here
//! answer the robust variant — "how would π perform under the *worst*
//! distribution within an f-divergence ball of radius δ around the one that
//! generated the logs?" — by maximizing the corresponding 1-D dual problem.
//!
//! The crate provides:
//!
//! * [`dataset`] — validated logged datasets with exact propensities, CSV
//!   serialization, and policy-matched importance weights;
//! * [`policy`] — the [`policy::Policy`] trait plus linear-argmax and lookup
//!   policies;
//! * [`dual`] — the KL robust value: self-normalized dual curve, safeguarded
//!   Newton solver, asymptotic variance, worst-case weights, and an
//!   exponential-tilt primal oracle for cross-checking;
//! * [`fdiv`] — the Cressie–Read power-divergence family via golden-section
//!   maximization of its dual;
//! * [`learn`] — softmax-smoothed policy learning: non-robust
//!   importance-weighted ascent and the alternating robust learner;
//! * [`bayes`] — Gaussian environments with closed-form oracle policies
//!   (plain Bayes and variance-penalized robust Bayes) and population robust
//!   values by Monte Carlo over contexts;
//! * [`sim`] — stock linear/nonlinear experiment environments, region-based
//!   logging tables, dataset generation, full-information test sets, and
//!   mean-shift stress tests;
//! * [`seeds`], [`opt`], [`uncertainty`], [`error`] — support: deterministic
//!   seed streams, 1-D maximization, uncertainty-set descriptors, errors.
//!
//! # Example
//!
//! ```
//! use drobandit::dual::{solve_dual, DualCurve, SolverConfig};
//! use drobandit::sim::{generate_dataset, make_linear_env, LoggingPolicyTable};
//!
//! let env = make_linear_env();
//! let data = generate_dataset(&env, &LoggingPolicyTable::linear_default(), 2000, 7).unwrap();
//! let policy = env.bayes_oracle();
//! let curve = DualCurve::new(&data, &policy, 0.2).unwrap();
//! let report = solve_dual(&curve, &SolverConfig::default()).unwrap();
//! assert!(report.value <= curve.ipw_value()); // robustness never helps
//! ```

// `!(x > 0.0)` is used throughout instead of `x <= 0.0`: the negated form
// also rejects NaN, which is the point of those guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference constants are written with guard digits beyond f64 resolution so
// they can be checked against their high-precision sources verbatim.
#![allow(clippy::excessive_precision)]

pub mod bayes;
pub mod dataset;
pub mod dual;
pub mod error;
pub mod fdiv;
pub mod learn;
pub mod opt;
pub mod policy;
pub mod seeds;
pub mod sim;
pub mod uncertainty;

pub use crate::dataset::{match_weights, LoggedDataset, MatchWeights};
pub use crate::dual::{
    clt_variance, phi_derivs, phi_hat, primal_oracle, solve_dual, worst_case_weights, DualCurve,
    EvaluationReport, SolverConfig,
};
pub use crate::error::{Error, Result};
pub use crate::fdiv::{c_k, solve_fdiv, CressieReadCurve};
pub use crate::learn::{
    learn_dro, learn_dro_with, learn_lin, learn_lin_diag, smoothed_value_grad, DroDiagnostics,
    GdConfig, LearnDiagnostics, OuterConfig, SmoothedObjective,
};
pub use crate::policy::{LinearPolicy, Policy, TablePolicy};
pub use crate::uncertainty::UncertaintySet;
