//! Policy learning from logged bandit data.
//!
//! Policies are linear softmax machines: logits θ_aᵀ[1, x]/τ over actions,
//! hardened to argmax after training. Two learners are provided:
//!
//! * [`learn_lin`] — gradient **ascent** on the smoothed importance-weighted
//!   value (1/n)·Σ Y_i·s_i(A_i)/π₀_i, the classical non-robust estimator with
//!   the indicator 1{π(X_i) = A_i} relaxed to the softmax probability
//!   s_i(A_i);
//! * [`learn_dro`] — alternating minimization of the robust dual: a Θ-step of
//!   gradient descent on W̃_n(Θ, α) = Σ p_i e^{−Y_i/α} / Σ p_i with
//!   p_i = s_i(A_i)/π₀_i at fixed α, then an α-step that re-solves the 1-D
//!   dual at the current hard policy, repeated until α stabilizes.
//!
//! Gradients use ∇_{θ_a} s_i(A_i) = s_i(A_i)·(1{a = A_i} − s_i(a))·[1, x_i]/τ
//! in both objectives; for W̃_n this yields
//! ∇W̃ = (Σ ∇p_i e^{−Y_i/α} − W̃·Σ ∇p_i) / Σ p_i.

use crate::dataset::LoggedDataset;
use crate::dual::{clt_variance, phi_derivs, phi_hat, solve_dual, DualCurve, EvaluationReport, SolverConfig};
use crate::error::{Error, Result};
use crate::policy::LinearPolicy;
use crate::seeds;
use ndarray::Array2;
use rand::Rng;

/// Hyperparameters of the gradient-descent Θ-steps.
#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    /// Fixed step size.
    pub learning_rate: f64,
    /// Epochs per (inner) gradient run.
    pub max_epochs: usize,
    /// Softmax temperature τ; smaller is closer to the hard argmax.
    pub temperature: f64,
    /// Early-stop threshold on the gradient's Frobenius norm.
    pub grad_tol: f64,
    /// Seed for the Θ ~ U[−0.01, 0.01] initialization.
    pub seed: u64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_epochs: 500,
            temperature: 0.1,
            grad_tol: 1e-6,
            seed: 0,
        }
    }
}

impl GdConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::DomainError(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::DomainError(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::DomainError("max_epochs must be positive".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::DomainError("grad_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Outer-loop controls of the alternating robust learner.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterConfig {
    /// Maximum alternations of (Θ-step, α-step).
    pub max_outer: usize,
    /// Stop when |Δα| falls below this.
    pub alpha_tol: f64,
    /// Replace the full α-solve by a single safeguarded Newton step (a
    /// common acceleration; the default full solve is more robust).
    pub single_newton_alpha_step: bool,
    /// Fresh-initialization attempts when an iterate policy matches no
    /// logged action.
    pub restarts: usize,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            max_outer: 50,
            alpha_tol: 1e-6,
            single_newton_alpha_step: false,
            restarts: 5,
        }
    }
}

/// Per-run training diagnostics.
#[derive(Debug, Clone, Default)]
pub struct LearnDiagnostics {
    /// Objective value at the start of each epoch of the last gradient run.
    pub objective_trajectory: Vec<f64>,
    /// Gradient Frobenius norm at exit.
    pub final_grad_norm: f64,
    /// Whether the gradient tolerance was met within the epoch budget.
    pub converged: bool,
    /// Epochs actually run.
    pub epochs_run: usize,
}

/// Diagnostics of the alternating robust learner.
#[derive(Debug, Clone, Default)]
pub struct DroDiagnostics {
    /// Hard-policy robust value Q̂_DRO after each α-step. Nondecreasing up
    /// to the smoothing slack.
    pub qdro_trajectory: Vec<f64>,
    /// α after each α-step.
    pub alpha_trajectory: Vec<f64>,
    /// Outer alternations run.
    pub outer_iterations: usize,
    /// Whether |Δα| met the tolerance within the outer budget.
    pub converged: bool,
    /// Fresh-Θ restarts consumed.
    pub restarts_used: usize,
}

/// The smoothed objectives over a fixed dataset: softmax policy weights with
/// intercept-extended contexts and precomputed inverse propensities.
#[derive(Debug, Clone)]
pub struct SmoothedObjective {
    /// n × (p+1) matrix of [1, x_i] rows.
    xt: Array2<f64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    inv_prop: Vec<f64>,
    num_actions: usize,
    tau: f64,
}

impl SmoothedObjective {
    pub fn new(data: &LoggedDataset, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::DomainError(format!("temperature must be positive, got {tau}")));
        }
        let n = data.n();
        let p = data.p();
        let mut xt = Array2::ones((n, p + 1));
        for i in 0..n {
            xt.row_mut(i)
                .slice_mut(ndarray::s![1..])
                .assign(&ndarray::ArrayView1::from(data.context(i)));
        }
        Ok(Self {
            xt,
            actions: data.actions().to_vec(),
            rewards: data.rewards().to_vec(),
            inv_prop: data.propensities().iter().map(|p| 1.0 / p).collect(),
            num_actions: data.num_actions(),
            tau,
        })
    }

    /// Number of records.
    pub fn n(&self) -> usize {
        self.xt.nrows()
    }

    /// Θ shape this objective expects: (p+1) × d.
    pub fn theta_shape(&self) -> (usize, usize) {
        (self.xt.ncols(), self.num_actions)
    }

    /// Softmax probabilities of one record at Θ (max-shifted, rows sum to 1).
    fn softmax(&self, theta: &Array2<f64>, i: usize, out: &mut [f64]) {
        let xi = self.xt.row(i);
        let mut max = f64::NEG_INFINITY;
        for (a, slot) in out.iter_mut().enumerate() {
            *slot = xi.dot(&theta.column(a)) / self.tau;
            max = max.max(*slot);
        }
        let mut sum = 0.0;
        for slot in out.iter_mut() {
            *slot = (*slot - max).exp();
            sum += *slot;
        }
        for slot in out.iter_mut() {
            *slot /= sum;
        }
    }
}

/// Evaluates a smoothed objective and its Θ-gradient.
///
/// With `alpha = None` this is the importance-weighted value
/// (1/n)·Σ Y_i·s_i(A_i)/π₀_i — the quantity gradient **ascent** maximizes.
/// With `alpha = Some(α)` it is W̃_n(Θ, α) = Σ p_i e^{−Y_i/α} / Σ p_i with
/// p_i = s_i(A_i)/π₀_i — the quantity gradient **descent** minimizes.
/// Exponentials are max-shifted, so the only overflow risk is the final
/// rescale by exp(max_i(−Y_i/α)), which is far from f64 limits for any α
/// that is not microscopic relative to the reward magnitudes.
pub fn smoothed_value_grad(
    obj: &SmoothedObjective,
    theta: &Array2<f64>,
    alpha: Option<f64>,
) -> Result<(f64, Array2<f64>)> {
    let (pp1, d) = obj.theta_shape();
    if theta.dim() != (pp1, d) {
        return Err(Error::ShapeMismatch(format!(
            "theta must be {pp1} x {d}, got {} x {}",
            theta.nrows(),
            theta.ncols()
        )));
    }
    let n = obj.n();
    let mut grad = Array2::zeros((pp1, d));
    let mut s = vec![0.0; d];
    match alpha {
        None => {
            let mut value = 0.0;
            for i in 0..n {
                obj.softmax(theta, i, &mut s);
                let ai = obj.actions[i] - 1;
                let w = obj.rewards[i] * obj.inv_prop[i];
                value += w * s[ai];
                let coef = w * s[ai] / obj.tau;
                if coef == 0.0 {
                    continue;
                }
                let xi = obj.xt.row(i);
                for (a, &sa) in s.iter().enumerate() {
                    let c = coef * (((a == ai) as u8 as f64) - sa);
                    grad.column_mut(a).scaled_add(c, &xi);
                }
            }
            value /= n as f64;
            grad.mapv_inplace(|g| g / n as f64);
            Ok((value, grad))
        }
        Some(alpha) => {
            if !(alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::NonPositiveAlpha(alpha));
            }
            let shift = obj
                .rewards
                .iter()
                .map(|y| -y / alpha)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum_p = 0.0;
            let mut sum_pe = 0.0;
            let mut grad_p = Array2::<f64>::zeros((pp1, d));
            let mut grad_pe = Array2::<f64>::zeros((pp1, d));
            for i in 0..n {
                obj.softmax(theta, i, &mut s);
                let ai = obj.actions[i] - 1;
                let p = s[ai] * obj.inv_prop[i];
                let e = (-obj.rewards[i] / alpha - shift).exp();
                sum_p += p;
                sum_pe += p * e;
                let coef = p / obj.tau;
                let xi = obj.xt.row(i);
                for (a, &sa) in s.iter().enumerate() {
                    let c = coef * (((a == ai) as u8 as f64) - sa);
                    grad_p.column_mut(a).scaled_add(c, &xi);
                    grad_pe.column_mut(a).scaled_add(c * e, &xi);
                }
            }
            let w_shifted = sum_pe / sum_p;
            let rescale = shift.exp();
            for ((g, gpe), gp) in grad.iter_mut().zip(grad_pe.iter()).zip(grad_p.iter()) {
                *g = (gpe - w_shifted * gp) / sum_p * rescale;
            }
            Ok((w_shifted * rescale, grad))
        }
    }
}

fn init_theta(shape: (usize, usize), seed: u64) -> Array2<f64> {
    let mut rng = seeds::rng(seed);
    Array2::from_shape_fn(shape, |_| rng.gen_range(-0.01..=0.01))
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One gradient run: ascent on the importance-weighted value or descent on
/// W̃_n(·, α), with early stop on a small gradient.
fn gradient_run(
    obj: &SmoothedObjective,
    theta: &mut Array2<f64>,
    alpha: Option<f64>,
    cfg: &GdConfig,
) -> Result<LearnDiagnostics> {
    let descent = alpha.is_some();
    let mut diag = LearnDiagnostics::default();
    for epoch in 0..cfg.max_epochs {
        let (value, grad) = smoothed_value_grad(obj, theta, alpha)?;
        diag.objective_trajectory.push(value);
        diag.final_grad_norm = frobenius(&grad);
        diag.epochs_run = epoch + 1;
        if diag.final_grad_norm < cfg.grad_tol {
            diag.converged = true;
            break;
        }
        let step = if descent { -cfg.learning_rate } else { cfg.learning_rate };
        theta.scaled_add(step, &grad);
    }
    Ok(diag)
}

/// Learns a non-robust policy by smoothed importance-weighted value
/// maximization; returns the hard argmax policy of the final Θ.
pub fn learn_lin(data: &LoggedDataset, cfg: &GdConfig) -> Result<LinearPolicy> {
    learn_lin_diag(data, cfg).map(|(p, _)| p)
}

/// As [`learn_lin`], also returning training diagnostics.
pub fn learn_lin_diag(data: &LoggedDataset, cfg: &GdConfig) -> Result<(LinearPolicy, LearnDiagnostics)> {
    cfg.validate()?;
    let obj = SmoothedObjective::new(data, cfg.temperature)?;
    let mut theta = init_theta(obj.theta_shape(), cfg.seed);
    let diag = gradient_run(&obj, &mut theta, None, cfg)?;
    Ok((LinearPolicy::new(theta)?, diag))
}

/// Learns a robust policy by alternating minimization with default outer
/// controls; see [`learn_dro_with`].
pub fn learn_dro(
    data: &LoggedDataset,
    delta: f64,
    cfg: &GdConfig,
    solver: &SolverConfig,
) -> Result<(LinearPolicy, EvaluationReport)> {
    learn_dro_with(data, delta, cfg, solver, &OuterConfig::default()).map(|(p, r, _)| (p, r))
}

/// Learns a robust policy: alternates a Θ-step (gradient descent on
/// W̃_n(Θ, α) at fixed α) with an α-step (1-D dual solve at the current hard
/// policy) until α moves less than the tolerance. Returns the final hard
/// policy, its evaluation report, and diagnostics.
///
/// The initial α is `solver.alpha_init` (default 1.0 here). When an α-step
/// lands on the boundary (robust value = minimum matched reward, formally
/// α → 0), the previous α is kept for the next Θ-step — the W̃ objective is
/// degenerate at α = 0. If an iterate's hard policy matches no logged
/// action, training restarts from a fresh seeded Θ, up to
/// `outer.restarts` times.
pub fn learn_dro_with(
    data: &LoggedDataset,
    delta: f64,
    cfg: &GdConfig,
    solver: &SolverConfig,
    outer: &OuterConfig,
) -> Result<(LinearPolicy, EvaluationReport, DroDiagnostics)> {
    cfg.validate()?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::DomainError(format!("delta must be positive, got {delta}")));
    }
    if outer.max_outer == 0 {
        return Err(Error::DomainError("max_outer must be positive".into()));
    }
    let obj = SmoothedObjective::new(data, cfg.temperature)?;
    let mut last_err = None;
    for restart in 0..=outer.restarts {
        let seed = if restart == 0 {
            cfg.seed
        } else {
            seeds::derive(cfg.seed, restart as u64)
        };
        let mut theta = init_theta(obj.theta_shape(), seed);
        let mut alpha = solver.alpha_init.unwrap_or(1.0);
        let mut diag = DroDiagnostics {
            restarts_used: restart,
            ..DroDiagnostics::default()
        };
        match alternate(data, delta, cfg, solver, outer, &obj, &mut theta, &mut alpha, &mut diag) {
            Ok((policy, report)) => return Ok((policy, report, diag)),
            Err(e @ Error::NoMatch) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::NoMatch))
}

#[allow(clippy::too_many_arguments)]
fn alternate(
    data: &LoggedDataset,
    delta: f64,
    cfg: &GdConfig,
    solver: &SolverConfig,
    outer: &OuterConfig,
    obj: &SmoothedObjective,
    theta: &mut Array2<f64>,
    alpha: &mut f64,
    diag: &mut DroDiagnostics,
) -> Result<(LinearPolicy, EvaluationReport)> {
    let mut result = None;
    for _ in 0..outer.max_outer {
        gradient_run(obj, theta, Some(*alpha), cfg)?;
        let policy = LinearPolicy::new(theta.clone())?;
        let curve = DualCurve::new(data, &policy, delta)?;
        let report = if outer.single_newton_alpha_step {
            newton_alpha_step(&curve, *alpha, solver)?
        } else {
            solve_dual(&curve, solver)?
        };
        let new_alpha = if report.boundary { *alpha } else { report.alpha_star };
        diag.outer_iterations += 1;
        diag.qdro_trajectory.push(report.value);
        diag.alpha_trajectory.push(new_alpha);
        let moved = (new_alpha - *alpha).abs();
        *alpha = new_alpha;
        result = Some((policy, report));
        if moved < outer.alpha_tol {
            diag.converged = true;
            break;
        }
    }
    Ok(result.expect("max_outer >= 1 guarantees at least one alternation"))
}

/// A single safeguarded Newton update of α on the dual curve, reporting the
/// evaluation at the updated point.
fn newton_alpha_step(curve: &DualCurve, alpha: f64, solver: &SolverConfig) -> Result<EvaluationReport> {
    let span = curve.y_max() - curve.y_min();
    let hi = if span > 0.0 {
        solver.alpha_max_factor * span / curve.delta()
    } else {
        alpha
    };
    let (d1, d2) = phi_derivs(curve, alpha)?;
    let mut next = if d2 < 0.0 { alpha - d1 / d2 } else { alpha };
    if !next.is_finite() {
        next = alpha;
    }
    next = next.clamp(solver.alpha_min, hi.max(solver.alpha_min));
    let variance = clt_variance(curve, next)?;
    Ok(EvaluationReport {
        value: phi_hat(curve, next)?,
        alpha_star: next,
        variance,
        std_error: (variance / curve.n() as f64).sqrt(),
        iterations: 1,
        converged: false,
        boundary: false,
    })
}
