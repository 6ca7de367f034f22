//! Oracle policies and population robust values for Gaussian reward
//! environments.
//!
//! In these environments Y(a)|X ~ N(μ_a(X), σ_a²), so the conditional
//! moment-generating quantity E[exp(−Y(a)/α) | X = x] has the closed form
//! exp(−μ_a(x)/α + σ_a²/(2α²)) and only the expectation over contexts needs
//! Monte Carlo. Three oracles are provided:
//!
//! * the plain Bayes policy argmax_a μ_a(x);
//! * the Bayes DRO policy, argmin_a of the conditional mgf at the α* that
//!   maximizes −α·log Ê_X[min_a exp(−μ_a(X)/α + σ_a²/(2α²))] − αδ, which for
//!   Gaussians is argmax_a {μ_a(x) − σ_a²/(2α*)} — a variance-penalized mean;
//! * the population robust value Q_DRO(π) of any fixed policy, the ground
//!   truth for coverage and regret experiments.

use crate::error::{Error, Result};
use crate::opt::golden_max_expanding;
use crate::policy::{argmax_action, Policy};
use crate::seeds;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::sync::Arc;

/// Shared pointer to a user-supplied mean function.
pub type CustomMean = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Conditional mean function μ_a: X → R of one action.
#[derive(Clone)]
pub enum MeanFn {
    /// βᵀx (no intercept).
    Linear(Vec<f64>),
    /// 1 − √((x(1) − c1)² + (x(2) − c2)²): a cone peaking at (c1, c2) in the
    /// first two coordinates.
    OneMinusDist { c1: f64, c2: f64 },
    /// Arbitrary mean function.
    Custom(CustomMean),
}

impl MeanFn {
    /// Evaluates μ(x).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFn::Linear(beta) => beta.iter().zip(x).map(|(b, v)| b * v).sum(),
            MeanFn::OneMinusDist { c1, c2 } => {
                let dx = x[0] - c1;
                let dy = x[1] - c2;
                1.0 - (dx * dx + dy * dy).sqrt()
            }
            MeanFn::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for MeanFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanFn::Linear(beta) => f.debug_tuple("Linear").field(beta).finish(),
            MeanFn::OneMinusDist { c1, c2 } => f
                .debug_struct("OneMinusDist")
                .field("c1", c1)
                .field("c2", c2)
                .finish(),
            MeanFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Context distribution of an environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextSampler {
    /// Uniform on the unit ball in R^dim.
    UnitBall { dim: usize },
    /// Uniform on the cube [−1, 1]^dim.
    Cube { dim: usize },
}

impl ContextSampler {
    /// Context dimension p.
    pub fn dim(&self) -> usize {
        match *self {
            ContextSampler::UnitBall { dim } | ContextSampler::Cube { dim } => dim,
        }
    }

    /// Draws one context.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match *self {
            ContextSampler::UnitBall { dim } => {
                // Gaussian direction scaled to a U^{1/p} radius.
                let mut x: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return x; // probability-zero degenerate draw
                }
                let r: f64 = rng.gen::<f64>().powf(1.0 / dim as f64);
                for v in &mut x {
                    *v *= r / norm;
                }
                x
            }
            ContextSampler::Cube { dim } => (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
        }
    }
}

/// Gaussian-reward contextual bandit environment: Y(a)|X ~ N(μ_a(X), σ_a²).
#[derive(Debug, Clone)]
pub struct GaussianEnvironment {
    means: Vec<MeanFn>,
    sigmas: Vec<f64>,
    sampler: ContextSampler,
    /// Clipping range applied to rewards when generating logged datasets.
    /// May be wide (clipping astronomically rare, Gaussian closed forms
    /// exact) or tight (truncation is part of the reward model and the
    /// Gaussian closed forms in this module are approximations).
    clip: (f64, f64),
}

impl GaussianEnvironment {
    pub fn new(means: Vec<MeanFn>, sigmas: Vec<f64>, sampler: ContextSampler, clip: (f64, f64)) -> Result<Self> {
        if means.is_empty() || means.len() != sigmas.len() {
            return Err(Error::ShapeMismatch(format!(
                "need equally many mean functions and sigmas (>= 1), got {} and {}",
                means.len(),
                sigmas.len()
            )));
        }
        if sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::DomainError("all sigmas must be positive".into()));
        }
        if !(clip.0 < clip.1) {
            return Err(Error::DomainError(format!("clip range [{}, {}] is empty", clip.0, clip.1)));
        }
        Ok(Self {
            means,
            sigmas,
            sampler,
            clip,
        })
    }

    /// Number of actions d.
    pub fn num_actions(&self) -> usize {
        self.means.len()
    }

    /// Context dimension p.
    pub fn dim(&self) -> usize {
        self.sampler.dim()
    }

    /// Conditional mean μ_a(x), 1-based action id.
    pub fn mean(&self, action: usize, x: &[f64]) -> f64 {
        self.means[action - 1].eval(x)
    }

    /// Conditional standard deviation σ_a, 1-based action id.
    pub fn sigma(&self, action: usize) -> f64 {
        self.sigmas[action - 1]
    }

    /// Reward clipping range for dataset generation.
    pub fn clip_range(&self) -> (f64, f64) {
        self.clip
    }

    /// Context sampler.
    pub fn sampler(&self) -> ContextSampler {
        self.sampler
    }

    /// Draws one context.
    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sampler.sample(rng)
    }

    /// Draws one unclipped reward Y(a)|X = x.
    pub fn sample_reward<R: Rng + ?Sized>(&self, action: usize, x: &[f64], rng: &mut R) -> f64 {
        self.mean(action, x) + self.sigma(action) * rng.sample::<f64, _>(StandardNormal)
    }

    /// The plain Bayes oracle as a policy object.
    pub fn bayes_oracle(&self) -> OraclePolicy {
        OraclePolicy {
            means: self.means.clone(),
            sigmas: self.sigmas.clone(),
            penalty_alpha: None,
            dim: self.dim(),
        }
    }
}

/// Conditional moment-generating quantity E[exp(−Y(a)/α) | X = x]
/// = exp(−μ_a(x)/α + σ_a²/(2α²)).
pub fn conditional_mgf(env: &GaussianEnvironment, action: usize, x: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    let mu = env.mean(action, x);
    let sigma = env.sigma(action);
    Ok((-mu / alpha + sigma * sigma / (2.0 * alpha * alpha)).exp())
}

/// The plain Bayes action argmax_a μ_a(x), ties toward the lowest id.
pub fn bayes_policy(env: &GaussianEnvironment, x: &[f64]) -> usize {
    argmax_action(env.means.iter().map(|m| m.eval(x)))
}

/// A Bayes-rule policy over Gaussian conditional rewards: picks
/// argmax_a {μ_a(x) − σ_a²/(2α)} (the argmin of the conditional mgf), or the
/// plain argmax_a μ_a(x) when no penalty α is set.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    means: Vec<MeanFn>,
    sigmas: Vec<f64>,
    penalty_alpha: Option<f64>,
    dim: usize,
}

impl OraclePolicy {
    /// Variance penalty coefficient α (None for the plain Bayes rule).
    pub fn penalty_alpha(&self) -> Option<f64> {
        self.penalty_alpha
    }

    /// The (possibly penalized) score of one action.
    pub fn score(&self, action: usize, x: &[f64]) -> f64 {
        let mu = self.means[action - 1].eval(x);
        match self.penalty_alpha {
            None => mu,
            Some(alpha) => {
                let s = self.sigmas[action - 1];
                mu - s * s / (2.0 * alpha)
            }
        }
    }
}

impl Policy for OraclePolicy {
    fn action(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(argmax_action((1..=self.num_actions()).map(|a| self.score(a, x))))
    }

    fn num_actions(&self) -> usize {
        self.means.len()
    }
}

/// log((1/m)·Σ exp(t_i)) with a max shift; `terms` is re-evaluated twice.
fn log_mean_exp<F: Fn(usize) -> f64>(m: usize, terms: F) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for i in 0..m {
        max = max.max(terms(i));
    }
    let mut sum = 0.0;
    for i in 0..m {
        sum += (terms(i) - max).exp();
    }
    max + (sum / m as f64).ln()
}

/// Shared 1-D maximization of population dual objectives: concave in α,
/// −∞ at both ends, so an expanding golden-section bracket suffices.
fn maximize_population_dual<F: Fn(f64) -> f64>(f: F, span: f64, delta: f64) -> (f64, f64) {
    let hi0 = span.max(1.0) / delta;
    golden_max_expanding(f, 1e-4, hi0, 60, 200, 1e-9)
}

/// Computes the Bayes DRO policy of a Gaussian environment and its outer
/// dual variable α*.
///
/// α* maximizes −α·log Ê_X[min_a exp(−μ_a(X)/α + σ_a²/(2α²))] − αδ, with Ê_X
/// a seeded Monte Carlo average over `mc_contexts` contexts (drawn once and
/// reused across α evaluations, making the objective deterministic and
/// smooth). The returned policy selects argmax_a {μ_a(x) − σ_a²/(2α*)}.
///
/// The Gaussian mgf inside is exact for unclipped rewards, so for
/// environments with a tight clipping range the result is an approximation.
pub fn bayes_dro_policy(
    env: &GaussianEnvironment,
    delta: f64,
    mc_contexts: usize,
    seed: u64,
) -> Result<(OraclePolicy, f64)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::DomainError(format!("delta must be positive, got {delta}")));
    }
    if mc_contexts < 1000 {
        return Err(Error::DomainError(format!(
            "need at least 1000 Monte Carlo contexts for a usable oracle, got {mc_contexts}"
        )));
    }
    let d = env.num_actions();
    let mut rng = seeds::rng(seed);
    let mut mus = Vec::with_capacity(mc_contexts * d);
    for _ in 0..mc_contexts {
        let x = env.sample_context(&mut rng);
        for a in 1..=d {
            mus.push(env.mean(a, &x));
        }
    }
    let sig2: Vec<f64> = env.sigmas.iter().map(|s| s * s).collect();

    let objective = |alpha: f64| -> f64 {
        // min_a exp(−μ_a/α + σ_a²/(2α²)) = exp(−max_a{μ_a − σ_a²/(2α)}/α).
        let lme = log_mean_exp(mc_contexts, |i| {
            let row = &mus[i * d..(i + 1) * d];
            let mut best = f64::NEG_INFINITY;
            for (mu, s2) in row.iter().zip(&sig2) {
                best = best.max(mu - s2 / (2.0 * alpha));
            }
            -best / alpha
        });
        -alpha * lme - alpha * delta
    };
    let span = env.clip.1 - env.clip.0;
    let (alpha_star, _) = maximize_population_dual(objective, span, delta);
    let policy = OraclePolicy {
        means: env.means.clone(),
        sigmas: env.sigmas.clone(),
        penalty_alpha: Some(alpha_star),
        dim: env.dim(),
    };
    Ok((policy, alpha_star))
}

/// Population robust value Q_DRO(π) of a fixed policy: maximizes the
/// population dual −α·log Ê_X[exp(−μ_{π(X)}(X)/α + σ²_{π(X)}/(2α²))] − αδ
/// over α, with the context expectation by seeded Monte Carlo (the
/// conditional expectation is exact via the Gaussian mgf for unclipped
/// rewards — use with wide-clip environments such as the linear one).
pub fn population_qdro(
    env: &GaussianEnvironment,
    policy: &dyn Policy,
    delta: f64,
    mc_contexts: usize,
    seed: u64,
) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::DomainError(format!("delta must be positive, got {delta}")));
    }
    if mc_contexts == 0 {
        return Err(Error::DomainError("mc_contexts must be positive".into()));
    }
    let mut rng = seeds::rng(seed);
    let mut mu = Vec::with_capacity(mc_contexts);
    let mut s2 = Vec::with_capacity(mc_contexts);
    for _ in 0..mc_contexts {
        let x = env.sample_context(&mut rng);
        let a = policy.action(&x)?;
        mu.push(env.mean(a, &x));
        let s = env.sigma(a);
        s2.push(s * s);
    }
    let objective = |alpha: f64| -> f64 {
        let lme = log_mean_exp(mc_contexts, |i| -mu[i] / alpha + s2[i] / (2.0 * alpha * alpha));
        -alpha * lme - alpha * delta
    };
    let span = env.clip.1 - env.clip.0;
    let (_, value) = maximize_population_dual(objective, span, delta);
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{make_linear_env, make_nonlinear_env};

    #[test]
    fn mgf_closed_forms() {
        let env = GaussianEnvironment::new(
            vec![MeanFn::Linear(vec![1.0]), MeanFn::Linear(vec![0.0])],
            vec![0.2, 1e-9],
            ContextSampler::Cube { dim: 1 },
            (-10.0, 10.0),
        )
        .unwrap();
        // Degenerate sigma: mgf ≈ exp(−μ/α) = 1 at μ = 0.
        for alpha in [0.3, 1.0, 5.0] {
            assert!((conditional_mgf(&env, 2, &[0.5], alpha).unwrap() - 1.0).abs() < 1e-12);
        }
        // μ = 1, σ = 0.2, α = 1 → exp(−1 + 0.02).
        let v = conditional_mgf(&env, 1, &[1.0], 1.0).unwrap();
        assert!((v - (-0.98f64).exp()).abs() < 1e-15);
        assert!(conditional_mgf(&env, 1, &[1.0], 0.0).is_err());
    }

    #[test]
    fn mgf_matches_monte_carlo() {
        let env = make_linear_env();
        let x = [0.4, -0.2, 0.1, 0.0, 0.3];
        let alpha = 0.8;
        let action = 2;
        let mut rng = seeds::rng(99);
        let m = 1_000_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..m {
            let v = (-env.sample_reward(action, &x, &mut rng) / alpha).exp();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / m as f64;
        let sd = ((sumsq / m as f64 - mean * mean) / m as f64).sqrt();
        let exact = conditional_mgf(&env, action, &x, alpha).unwrap();
        assert!(
            (exact - mean).abs() <= 3.0 * sd,
            "mgf {exact} vs MC {mean} ± {sd}"
        );
    }

    #[test]
    fn bayes_policy_examples() {
        let lin = make_linear_env();
        assert_eq!(bayes_policy(&lin, &[1.0, 0.0, 0.0, 0.0, 0.0]), 1);
        assert_eq!(bayes_policy(&lin, &[0.0, 1.0, 0.0, 0.0, 0.0]), 2);
        // Symmetric tie at the origin: lowest id.
        assert_eq!(bayes_policy(&lin, &[0.0; 5]), 1);

        let non = make_nonlinear_env();
        // μ₂ peaks (= 1) at x = (−0.5, 1); μ₁ = −0.1, μ₃ = 1 − 2 there.
        assert_eq!(bayes_policy(&non, &[-0.5, 1.0, 0.0, 0.0, 0.0]), 2);
        assert_eq!(bayes_policy(&non, &[-0.5, -1.0, 0.0, 0.0, 0.0]), 3);
    }

    #[test]
    fn penalized_argmax_equals_mgf_argmin() {
        let env = make_linear_env();
        let alpha = 0.7;
        let policy = OraclePolicy {
            means: env.means.clone(),
            sigmas: env.sigmas.clone(),
            penalty_alpha: Some(alpha),
            dim: 5,
        };
        let mut rng = seeds::rng(5);
        for _ in 0..10_000 {
            let x = env.sample_context(&mut rng);
            let by_mgf = (1..=3)
                .min_by(|&a, &b| {
                    conditional_mgf(&env, a, &x, alpha)
                        .unwrap()
                        .partial_cmp(&conditional_mgf(&env, b, &x, alpha).unwrap())
                        .unwrap()
                })
                .unwrap();
            assert_eq!(policy.action(&x).unwrap(), by_mgf);
        }
    }

    #[test]
    fn equal_sigmas_reduce_to_bayes() {
        let env = GaussianEnvironment::new(
            vec![
                MeanFn::Linear(vec![1.0, 0.0]),
                MeanFn::Linear(vec![-0.5, 0.8]),
                MeanFn::Linear(vec![0.2, -0.3]),
            ],
            vec![0.5, 0.5, 0.5],
            ContextSampler::Cube { dim: 2 },
            (-5.0, 5.0),
        )
        .unwrap();
        let (dro, _) = bayes_dro_policy(&env, 0.2, 2000, 7).unwrap();
        let mut rng = seeds::rng(8);
        for _ in 0..1000 {
            let x = env.sample_context(&mut rng);
            assert_eq!(dro.action(&x).unwrap(), bayes_policy(&env, &x));
        }
    }

    #[test]
    fn vanishing_delta_recovers_bayes() {
        let env = make_linear_env();
        let (dro, alpha) = bayes_dro_policy(&env, 1e-6, 20_000, 11).unwrap();
        assert!(alpha > 100.0, "alpha* = {alpha} should blow up as delta -> 0");
        let mut rng = seeds::rng(12);
        let total = 100_000;
        let mut agree = 0usize;
        for _ in 0..total {
            let x = env.sample_context(&mut rng);
            if dro.action(&x).unwrap() == bayes_policy(&env, &x) {
                agree += 1;
            }
        }
        assert!(agree as f64 / total as f64 >= 0.999, "agreement {agree}/{total}");
    }

    #[test]
    fn dro_boundary_shifts_toward_higher_variance_region() {
        // On the segment x = (0, t, 0, 0, 0) the plain Bayes rule switches to
        // action 3 as soon as t < 0; the robust rule penalizes action 3's
        // larger σ, so its switch happens strictly deeper into t < 0.
        let env = make_linear_env();
        let (dro, alpha) = bayes_dro_policy(&env, 0.2, 50_000, 3).unwrap();
        assert!(alpha > 0.0);
        let switch_t = |pol: &dyn Policy| -> f64 {
            let mut t = 1.0;
            while t >= -1.0 {
                if pol.action(&[0.0, t, 0.0, 0.0, 0.0]).unwrap() == 3 {
                    return t;
                }
                t -= 1e-3;
            }
            -1.0
        };
        let bayes = env.bayes_oracle();
        let t_bayes = switch_t(&bayes);
        let t_dro = switch_t(&dro);
        assert!(t_bayes > -2e-3, "plain Bayes switches at 0⁻, got {t_bayes}");
        assert!(t_dro < t_bayes - 0.05, "robust switch {t_dro} vs Bayes {t_bayes}");
    }

    #[test]
    fn population_qdro_degenerate_env() {
        let env = GaussianEnvironment::new(
            vec![MeanFn::Custom(Arc::new(|_| 0.7))],
            vec![1e-9],
            ContextSampler::Cube { dim: 2 },
            (0.0, 1.0),
        )
        .unwrap();
        let pol = env.bayes_oracle();
        for delta in [0.05, 0.5, 2.0] {
            let v = population_qdro(&env, &pol, delta, 2000, 1).unwrap();
            assert!((v - 0.7).abs() < 1e-3, "delta={delta}: {v}");
        }
    }

    #[test]
    fn population_qdro_constant_policy_reference() {
        // Analytic oracle (quadrature over the unit-ball marginal):
        // Q_DRO(const action 1, δ = 0.2) = −0.26862913585882674.
        let env = make_linear_env();
        let pol = crate::policy::TablePolicy::new(vec![], 1, 3);
        let v = population_qdro(&env, &pol, 0.2, 1_000_000, 2024).unwrap();
        assert!((v - (-0.268_629_135_858_826_74)).abs() < 3e-3, "v = {v}");
    }

    #[test]
    fn population_qdro_bayes_reference() {
        // Analytic oracle by sector quadrature: the plain Bayes policy in
        // the linear environment has Q_DRO = 0.0249475314570221 at δ = 0.2
        // (population α* ≈ 0.992) and a non-robust value E[max μ] =
        // 0.405949408023956.
        let env = make_linear_env();
        let pol = env.bayes_oracle();
        let v = population_qdro(&env, &pol, 0.2, 1_000_000, 31).unwrap();
        assert!((v - 0.024_947_531_457_022_1).abs() < 3e-3, "v = {v}");
        let v0 = population_qdro(&env, &pol, 1e-4, 1_000_000, 31).unwrap();
        assert!((v0 - 0.405_949_408_023_956).abs() < 0.02, "v0 = {v0}");
    }

    #[test]
    fn population_qdro_monotone_in_delta() {
        let env = make_linear_env();
        let pol = env.bayes_oracle();
        let mut last = f64::INFINITY;
        for delta in [0.05, 0.1, 0.2, 0.4] {
            let v = population_qdro(&env, &pol, delta, 50_000, 42).unwrap();
            assert!(v < last, "delta={delta}: {v} !< {last}");
            last = v;
        }
        // And never exceeds the non-robust population value.
        let mut rng = seeds::rng(43);
        let mut mean = 0.0;
        let m = 200_000;
        for _ in 0..m {
            let x = env.sample_context(&mut rng);
            let a = bayes_policy(&env, &x);
            mean += env.mean(a, &x);
        }
        mean /= m as f64;
        let v = population_qdro(&env, &pol, 0.05, 50_000, 42).unwrap();
        assert!(v < mean);
    }
}
