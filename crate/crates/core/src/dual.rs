//! KL strong-duality machinery for robust off-policy evaluation.
//!
//! The robust value of a policy π over a KL ball of radius δ admits the
//! scalar dual
//!
//! ```text
//! Q_DRO = sup_{α ≥ 0} { −α · log E[exp(−Y(π(X))/α)] − αδ },
//! ```
//!
//! whose empirical, self-normalized plug-in is
//!
//! ```text
//! φ̂_n(π, α) = −α · log Ŵ_n(π, α) − αδ,
//! Ŵ_n(π, α) = (1/(n·S_n)) Σ_i ipw_i · exp(−Y_i/α),
//! S_n       = (1/n) Σ_i ipw_i,      ipw_i = 1{π(X_i)=A_i} / π₀(A_i|X_i).
//! ```
//!
//! φ̂_n is concave in α, so the solver is a safeguarded Newton iteration on
//! the stationarity condition ∂φ̂/∂α = 0 with a bisection fallback inside a
//! bracket that provably contains the maximizer. As α → 0 the dual value
//! tends to the (empirical) essential infimum — the minimum matched reward —
//! and the solver reports such boundary solutions explicitly instead of
//! chasing a supremum that is not attained.
//!
//! All exponentials are evaluated on shifted rewards z_i = Y_i − Y_min so
//! that every exponent is nonpositive; the shift is exact in real arithmetic:
//!
//! ```text
//! φ̂ = Y_min − α·log Ṽ − αδ,       Ṽ  = (1/(nS_n)) Σ ipw_i e^{−z_i/α},
//! ∂φ̂/∂α  = −m₁/α − log Ṽ − δ,     m₁ = Σ ipw_i e^{−z_i/α} z_i / Σ ipw_i e^{−z_i/α},
//! ∂²φ̂/∂α² = −(m₂ − m₁²)/α³,       m₂ − m₁² = tilted variance of z ≥ 0.
//! ```

use crate::dataset::{match_weights, LoggedDataset};
use crate::error::{Error, Result};
use crate::policy::Policy;
use serde::{Deserialize, Serialize};

/// Result of a robust evaluation: the dual value and solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Robust value estimate Q̂_DRO.
    pub value: f64,
    /// Maximizing dual variable α̂ (0 for boundary solutions).
    pub alpha_star: f64,
    /// Plug-in asymptotic variance σ̂²(α̂) (0 for boundary solutions).
    pub variance: f64,
    /// Standard error σ̂/√n.
    pub std_error: f64,
    /// Solver iterations used.
    pub iterations: usize,
    /// Whether the solver met its tolerance within the iteration budget.
    pub converged: bool,
    /// True when the supremum is attained at the α → 0 boundary, in which
    /// case `value` is the minimum matched reward (empirical essential
    /// infimum) and `alpha_star` is reported as 0.
    pub boundary: bool,
}

/// Tolerances and safeguards for the 1-D dual solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Starting point for Newton; `None` picks M_span/(2δ) clamped to ≥ 1e−3,
    /// the midpoint heuristic for the bracket (0, M_span/δ].
    pub alpha_init: Option<f64>,
    /// Convergence tolerance on |∂φ̂/∂α| (and on step stagnation).
    pub tol: f64,
    /// Maximum Newton/bisection iterations.
    pub max_iter: usize,
    /// Lower clamp for α; at this point the boundary rule applies.
    pub alpha_min: f64,
    /// The bracket upper end is this multiple of M_span/δ (must be ≥ 1).
    pub alpha_max_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha_init: None,
            tol: 1e-8,
            max_iter: 100,
            alpha_min: 1e-6,
            alpha_max_factor: 2.0,
        }
    }
}

/// The empirical dual objective φ̂_n(π, ·) for one (dataset, policy, δ)
/// triple, with cached match weights.
///
/// Immutable after construction; evaluating it at any α is O(#matched).
#[derive(Debug, Clone)]
pub struct DualCurve {
    /// Inverse-propensity weights of matched records (strictly positive).
    ipw: Vec<f64>,
    /// Rewards of matched records, same order as `ipw`.
    rewards: Vec<f64>,
    /// Original record index of each matched record.
    indices: Vec<usize>,
    /// Full dataset size n (matched + unmatched).
    n: usize,
    /// Self-normalization constant S_n = (1/n) Σ ipw over all records.
    s_n: f64,
    /// Minimum / maximum matched reward.
    y_min: f64,
    y_max: f64,
    /// KL ball radius δ.
    delta: f64,
}

impl DualCurve {
    /// Builds the curve for a policy on logged data with KL radius δ.
    pub fn new(data: &LoggedDataset, policy: &dyn Policy, delta: f64) -> Result<Self> {
        let mw = match_weights(data, policy)?;
        let mut ipw = Vec::new();
        let mut rewards = Vec::new();
        let mut indices = Vec::new();
        for (i, &w) in mw.ipw.iter().enumerate() {
            if w > 0.0 {
                ipw.push(w);
                rewards.push(data.rewards()[i]);
                indices.push(i);
            }
        }
        Self::from_parts(ipw, rewards, indices, data.n(), delta)
    }

    /// Builds the curve from raw importance weights (0 marks an unmatched
    /// record) and rewards, for callers that weight records themselves.
    pub fn from_weights(ipw: &[f64], rewards: &[f64], delta: f64) -> Result<Self> {
        if ipw.len() != rewards.len() || ipw.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "ipw and rewards must have equal nonzero lengths, got {} and {}",
                ipw.len(),
                rewards.len()
            )));
        }
        if ipw.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::DomainError("importance weights must be finite and nonnegative".into()));
        }
        let mut w_m = Vec::new();
        let mut y_m = Vec::new();
        let mut indices = Vec::new();
        for (i, (&w, &y)) in ipw.iter().zip(rewards).enumerate() {
            if w > 0.0 {
                w_m.push(w);
                y_m.push(y);
                indices.push(i);
            }
        }
        Self::from_parts(w_m, y_m, indices, ipw.len(), delta)
    }

    fn from_parts(ipw: Vec<f64>, rewards: Vec<f64>, indices: Vec<usize>, n: usize, delta: f64) -> Result<Self> {
        if ipw.is_empty() {
            return Err(Error::NoMatch);
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::DomainError(format!("delta must be positive, got {delta}")));
        }
        let s_n = ipw.iter().sum::<f64>() / n as f64;
        let y_min = rewards.iter().cloned().fold(f64::INFINITY, f64::min);
        let y_max = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            ipw,
            rewards,
            indices,
            n,
            s_n,
            y_min,
            y_max,
            delta,
        })
    }

    /// Full dataset size n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of matched records.
    pub fn matched(&self) -> usize {
        self.ipw.len()
    }

    /// Original record indices of the matched records.
    pub fn matched_indices(&self) -> &[usize] {
        &self.indices
    }

    /// Self-normalization constant S_n.
    pub fn s_n(&self) -> f64 {
        self.s_n
    }

    /// Minimum matched reward (the α → 0 boundary value).
    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    /// Maximum matched reward.
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// KL ball radius δ.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Self-normalized (non-robust) IPW estimate Σ ipw_i Y_i / (n S_n).
    pub fn ipw_value(&self) -> f64 {
        let num: f64 = self.ipw.iter().zip(&self.rewards).map(|(w, y)| w * y).sum();
        num / (self.n as f64 * self.s_n)
    }

    /// Tilted moments at α: (Ṽ, m₁, m₂) with Ṽ the normalized weight mean and
    /// m₁/m₂ the tilted first/second moments of z = Y − Y_min.
    fn moments(&self, alpha: f64) -> (f64, f64, f64) {
        let mut sum_we = 0.0;
        let mut sum_wez = 0.0;
        let mut sum_wezz = 0.0;
        for (&w, &y) in self.ipw.iter().zip(&self.rewards) {
            let z = y - self.y_min;
            let we = w * (-z / alpha).exp();
            sum_we += we;
            sum_wez += we * z;
            sum_wezz += we * z * z;
        }
        let v = sum_we / (self.n as f64 * self.s_n);
        (v, sum_wez / sum_we, sum_wezz / sum_we)
    }

    fn check_alpha(&self, alpha: f64) -> Result<()> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::NonPositiveAlpha(alpha));
        }
        Ok(())
    }
}

/// Evaluates the empirical dual objective φ̂_n(π, α) = −α·log Ŵ_n − αδ.
pub fn phi_hat(curve: &DualCurve, alpha: f64) -> Result<f64> {
    curve.check_alpha(alpha)?;
    let (v, _, _) = curve.moments(alpha);
    Ok(curve.y_min - alpha * v.ln() - alpha * curve.delta)
}

/// First and second derivatives of φ̂_n(π, ·) at α (closed forms).
///
/// The second derivative is −(tilted variance of Y)/α³ ≤ 0: the curve is
/// concave everywhere, strictly so unless all matched rewards coincide.
pub fn phi_derivs(curve: &DualCurve, alpha: f64) -> Result<(f64, f64)> {
    curve.check_alpha(alpha)?;
    let (v, m1, _) = curve.moments(alpha);
    let d1 = -m1 / alpha - v.ln() - curve.delta;
    // Two-pass central second moment: the tilted variance of z is computed
    // around m₁ to avoid cancellation between m₂ and m₁².
    let mut sum_we = 0.0;
    let mut sum_wc = 0.0;
    for (&w, &y) in curve.ipw.iter().zip(&curve.rewards) {
        let z = y - curve.y_min;
        let we = w * (-z / alpha).exp();
        sum_we += we;
        sum_wc += we * (z - m1) * (z - m1);
    }
    let var = sum_wc / sum_we;
    Ok((d1, -var / (alpha * alpha * alpha)))
}

/// Plug-in estimate of the asymptotic variance σ²(α) of the robust value
/// estimator: (α²/Ŵ_n²)·(1/n)·Σ ipw_i²·(exp(−Y_i/α) − Ŵ_n)².
///
/// The squared weight is the sample form of the 1/π₀(π(X)|X) factor inside
/// the population variance: the influence function of the self-normalized
/// dual value at fixed α is −(α/W̄)·ipw·(exp(−Y/α) − W̄), and its second
/// moment carries ipw². On-policy data (propensities ≡ 1) reduces to the
/// plain variance of the exponentiated rewards.
pub fn clt_variance(curve: &DualCurve, alpha: f64) -> Result<f64> {
    curve.check_alpha(alpha)?;
    let (v, _, _) = curve.moments(alpha);
    let mut acc = 0.0;
    for (&w, &y) in curve.ipw.iter().zip(&curve.rewards) {
        let e = (-(y - curve.y_min) / alpha).exp();
        let dev = e / v - 1.0;
        acc += w * w * dev * dev;
    }
    Ok(alpha * alpha * acc / curve.n as f64)
}

/// The worst-case reweighting of the matched empirical distribution at the
/// interior dual optimum α*: q_i ∝ ipw_i·exp(−Y_i/α*), normalized to sum 1.
///
/// Returns the weights (aligned with [`DualCurve::matched_indices`]) and the
/// achieved KL divergence Σ q_i log(q_i / p_i) against the self-normalized
/// IPW base measure p_i = ipw_i/(n·S_n). At an interior optimum the achieved
/// KL equals δ (first-order optimality) — a useful diagnostic.
pub fn worst_case_weights(curve: &DualCurve, alpha_star: f64) -> Result<(Vec<f64>, f64)> {
    if !(alpha_star > 0.0) || !alpha_star.is_finite() {
        return Err(Error::BoundarySolution);
    }
    let mut q: Vec<f64> = curve
        .ipw
        .iter()
        .zip(&curve.rewards)
        .map(|(&w, &y)| w * (-(y - curve.y_min) / alpha_star).exp())
        .collect();
    let total: f64 = q.iter().sum();
    for qi in &mut q {
        *qi /= total;
    }
    let norm = curve.n as f64 * curve.s_n;
    let mut kl = 0.0;
    for (qi, &w) in q.iter().zip(&curve.ipw) {
        if *qi > 0.0 {
            kl += qi * (qi / (w / norm)).ln();
        }
    }
    Ok((q, kl))
}

/// Maximizes φ̂_n(π, ·) over α ≥ 0 by safeguarded Newton–Raphson.
///
/// Newton steps on ∂φ̂/∂α = 0 are accepted only inside the current sign-change
/// bracket, which starts as [alpha_min, factor·(Y_max−Y_min)/δ] (the
/// maximizer satisfies α* ≤ span/δ because φ̂ ≤ Y_max − αδ while
/// φ̂(0⁺) = Y_min); any rejected or degenerate step (d2 = 0) falls back to
/// bisection. A nonpositive derivative at `alpha_min` means the supremum sits
/// at the α → 0 boundary: the report carries the minimum matched reward as
/// the value, the empirical essential infimum.
pub fn solve_dual(curve: &DualCurve, cfg: &SolverConfig) -> Result<EvaluationReport> {
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 || !(cfg.alpha_min > 0.0) || !(cfg.alpha_max_factor >= 1.0) {
        return Err(Error::DomainError(
            "solver config requires tol > 0, max_iter >= 1, alpha_min > 0, alpha_max_factor >= 1".into(),
        ));
    }
    let span = curve.y_max - curve.y_min;
    let scale = curve.y_max.abs().max(1.0);
    let boundary_report = |iterations: usize| EvaluationReport {
        value: curve.y_min,
        alpha_star: 0.0,
        variance: 0.0,
        std_error: 0.0,
        iterations,
        converged: true,
        boundary: true,
    };
    // Constant matched rewards: Ŵ_n = e^{−c/α} exactly, φ̂ = c − αδ, and the
    // supremum c is attained only as α → 0.
    if span <= 1e-13 * scale {
        return Ok(boundary_report(0));
    }

    let lo = cfg.alpha_min;
    let (d1_lo, _) = phi_derivs(curve, lo)?;
    if d1_lo <= 0.0 {
        // φ̂ is concave with φ̂' ≤ 0 already at the smallest admissible α, so
        // the supremum over α ≥ 0 is the boundary value.
        return Ok(boundary_report(1));
    }
    let mut hi = cfg.alpha_max_factor * span / curve.delta;
    let mut d1_hi = phi_derivs(curve, hi)?.0;
    let mut expansions = 0;
    while d1_hi > 0.0 && expansions < 60 {
        // Unreachable in exact arithmetic (α* ≤ span/δ); kept as a float-level
        // safeguard so the bracket always straddles the root.
        hi *= 2.0;
        d1_hi = phi_derivs(curve, hi)?.0;
        expansions += 1;
    }

    let mut a_lo = lo;
    let mut a_hi = hi;
    let init = cfg
        .alpha_init
        .unwrap_or(((curve.y_max - curve.y_min.min(0.0)) / (2.0 * curve.delta)).max(1e-3));
    let mut alpha = init.clamp(a_lo, a_hi);
    let mut iterations = 0;
    let mut converged = false;
    // φ̂' is of order δ over the whole tail (φ̂'(α→∞) → −δ), so the root test
    // must be relative to δ or small radii would "converge" anywhere.
    let d_tol = cfg.tol * curve.delta;
    while iterations < cfg.max_iter {
        let (d1, d2) = phi_derivs(curve, alpha)?;
        iterations += 1;
        if d1.abs() <= d_tol {
            converged = true;
            break;
        }
        if d1 > 0.0 {
            a_lo = alpha;
        } else {
            a_hi = alpha;
        }
        let newton = alpha - d1 / d2;
        let next = if d2 < 0.0 && newton.is_finite() && newton > a_lo && newton < a_hi {
            newton
        } else {
            0.5 * (a_lo + a_hi)
        };
        if (next - alpha).abs() <= f64::EPSILON * alpha.abs() {
            // Step stagnated at machine precision: α* is pinned to float
            // resolution even though derivative noise may exceed d_tol.
            converged = d1.abs() <= (1e-6 * curve.delta).max(d_tol);
            alpha = next;
            break;
        }
        alpha = next;
    }

    let value = phi_hat(curve, alpha)?;
    let variance = clt_variance(curve, alpha)?;
    Ok(EvaluationReport {
        value,
        alpha_star: alpha,
        variance,
        std_error: (variance / curve.n as f64).sqrt(),
        iterations,
        converged,
        boundary: false,
    })
}

/// Brute-force primal oracle: minimizes Σ q_i·y_i over distributions q with
/// KL(q ‖ p) ≤ δ on a finite support, by bisection over the exponential-tilt
/// parameter t in q_t ∝ p·e^{−t·y}.
///
/// The KL divergence of the tilt increases strictly monotonically in t from 0
/// to −log(mass at min y), so the constraint-active optimum is the unique
/// root of KL(q_t ‖ p) = δ; when δ exceeds that limit the optimum collapses
/// onto the minimum reward. Shares no code with the dual solver — it exists
/// to cross-check strong duality in tests.
pub fn primal_oracle(rewards: &[f64], probs: &[f64], delta: f64) -> Result<f64> {
    if rewards.len() != probs.len() || rewards.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "rewards and probs must have equal nonzero lengths, got {} and {}",
            rewards.len(),
            probs.len()
        )));
    }
    if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(Error::DomainError("probabilities must be nonnegative".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::DomainError(format!("probabilities must sum to 1, got {total}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::DomainError(format!("delta must be nonnegative, got {delta}")));
    }

    // Restrict to the support.
    let support: Vec<(f64, f64)> = rewards
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&y, &p)| (y, p))
        .collect();
    if support.is_empty() {
        return Err(Error::DomainError("probabilities are all zero".into()));
    }
    let mean: f64 = support.iter().map(|(y, p)| y * p).sum();
    if delta == 0.0 {
        return Ok(mean);
    }
    let y_min = support.iter().map(|(y, _)| *y).fold(f64::INFINITY, f64::min);
    let min_mass: f64 = support.iter().filter(|(y, _)| *y == y_min).map(|(_, p)| *p).sum();
    let kl_max = -min_mass.ln();
    if delta >= kl_max - 1e-12 {
        return Ok(y_min);
    }

    // KL and value of the tilt q ∝ p·e^{−t·z}, z = y − y_min.
    let eval = |t: f64| -> (f64, f64) {
        let mut z_sum = 0.0;
        let mut zm = 0.0;
        for (y, p) in &support {
            let w = p * (-t * (y - y_min)).exp();
            z_sum += w;
            zm += w * (y - y_min);
        }
        let m1 = zm / z_sum;
        // KL(q_t‖p) = −t·m₁ − log Z(t) with Z the partition function.
        let kl = -t * m1 - z_sum.ln();
        (kl, y_min + m1)
    };

    let mut t_hi = 1.0;
    while eval(t_hi).0 < delta {
        t_hi *= 2.0;
        if t_hi > 1e300 {
            return Ok(y_min);
        }
    }
    let mut t_lo = 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (t_lo + t_hi);
        if mid == t_lo || mid == t_hi {
            break;
        }
        if eval(mid).0 < delta {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }
    Ok(eval(0.5 * (t_lo + t_hi)).1)
}
