//! Synthetic bandit environments and dataset generation.
//!
//! Two stock environments are provided, one with linear conditional means and
//! one with nonlinear (cone-shaped) means, both with three actions whose
//! noise levels differ. Logged data is produced by a region-based logging
//! policy: the context space is partitioned by the Bayes action, and within
//! each region the logging policy draws actions from a fixed distribution
//! given by one column of a table. Propensities are therefore known exactly
//! and bounded below by the table's smallest entry.

use crate::bayes::{bayes_policy, ContextSampler, GaussianEnvironment, MeanFn};
use crate::dataset::LoggedDataset;
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::seeds;
use ndarray::Array2;
use rand::Rng;
use std::io::{Read, Write};

/// Action distribution of the logging policy per Bayes region:
/// `table[(a−1, r−1)]` = P(A = a | X in region r), columns sum to one.
#[derive(Debug, Clone)]
pub struct LoggingPolicyTable {
    table: Array2<f64>,
}

impl LoggingPolicyTable {
    pub fn new(table: Array2<f64>) -> Result<Self> {
        let (rows, cols) = table.dim();
        if rows == 0 || rows != cols {
            return Err(Error::ShapeMismatch(format!(
                "logging table must be square (actions x regions), got {rows}x{cols}"
            )));
        }
        if table.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::DomainError(
                "logging table entries must be positive so every action overlaps".into(),
            ));
        }
        for r in 0..cols {
            let sum: f64 = table.column(r).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::DomainError(format!(
                    "logging table column {} sums to {sum}, expected 1",
                    r + 1
                )));
            }
        }
        Ok(Self { table })
    }

    /// Default table for the linear environment: the Bayes action with
    /// probability 0.5, the two others with 0.25 each.
    pub fn linear_default() -> Self {
        let mut t = Array2::from_elem((3, 3), 0.25);
        for a in 0..3 {
            t[(a, a)] = 0.5;
        }
        Self { table: t }
    }

    /// Default table for the nonlinear environment: region distributions
    /// (0.50, 0.25, 0.25), (0.30, 0.40, 0.30) and (0.30, 0.30, 0.40) over
    /// actions 1..3.
    pub fn nonlinear_default() -> Self {
        let t = Array2::from_shape_vec(
            (3, 3),
            vec![
                0.50, 0.30, 0.30, // action 1 across regions 1..3
                0.25, 0.40, 0.30, // action 2
                0.25, 0.30, 0.40, // action 3
            ],
        )
        .expect("static shape");
        Self { table: t }
    }

    /// Number of actions (= number of regions).
    pub fn num_actions(&self) -> usize {
        self.table.nrows()
    }

    /// P(A = action | region), both 1-based.
    pub fn prob(&self, action: usize, region: usize) -> f64 {
        self.table[(action - 1, region - 1)]
    }

    /// Smallest entry: the overlap lower bound η of datasets logged with
    /// this table.
    pub fn eta(&self) -> f64 {
        self.table.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Draws an action in the given region (1-based).
    pub fn sample_action<R: Rng + ?Sized>(&self, region: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for a in 1..=self.num_actions() {
            acc += self.prob(a, region);
            if u < acc {
                return a;
            }
        }
        self.num_actions()
    }
}

/// The linear three-action environment: contexts uniform on the unit ball in
/// R^5, means β_aᵀx with the β_a unit vectors at 120° to each other in the
/// first two coordinates, and σ = (0.2, 0.5, 0.8).
pub fn make_linear_env() -> GaussianEnvironment {
    let h = 3f64.sqrt() / 2.0;
    GaussianEnvironment::new(
        vec![
            MeanFn::Linear(vec![1.0, 0.0, 0.0, 0.0, 0.0]),
            MeanFn::Linear(vec![-0.5, h, 0.0, 0.0, 0.0]),
            MeanFn::Linear(vec![-0.5, -h, 0.0, 0.0, 0.0]),
        ],
        vec![0.2, 0.5, 0.8],
        ContextSampler::UnitBall { dim: 5 },
        (-5.8, 5.8),
    )
    .expect("static environment definition")
}

/// The nonlinear three-action environment: contexts uniform on [−1, 1]^5,
/// μ₁ = 0.2·x(1) and μ₂, μ₃ cones peaking at (−0.5, ±1), σ = (0.8, 0.2, 0.4).
///
/// Rewards are truncated to [0, 1]. Unlike the linear environment, the
/// truncation is load-bearing here: the cone means sit well inside the unit
/// interval and the noise scales are large relative to it, so a substantial
/// fraction of raw draws is clamped. This keeps the rewards within the
/// bounded support the robust estimator assumes; the Gaussian closed forms in
/// [`crate::bayes`] are only approximate for this environment.
pub fn make_nonlinear_env() -> GaussianEnvironment {
    GaussianEnvironment::new(
        vec![
            MeanFn::Linear(vec![0.2, 0.0, 0.0, 0.0, 0.0]),
            MeanFn::OneMinusDist { c1: -0.5, c2: 1.0 },
            MeanFn::OneMinusDist { c1: -0.5, c2: -1.0 },
        ],
        vec![0.8, 0.2, 0.4],
        ContextSampler::Cube { dim: 5 },
        (0.0, 1.0),
    )
    .expect("static environment definition")
}

/// Generation statistics of a simulated dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenStats {
    /// Rewards that hit the clipping range. Near zero for the linear
    /// environment (whose range sits several σ out); a sizeable fraction for
    /// the nonlinear environment, whose [0, 1] truncation is intentional.
    pub clipped: usize,
}

/// Simulates a logged bandit dataset of size n: contexts from the
/// environment, actions from the logging table conditioned on the Bayes
/// region, Gaussian rewards clipped to the environment's range, and exact
/// propensities.
pub fn generate_dataset(
    env: &GaussianEnvironment,
    table: &LoggingPolicyTable,
    n: usize,
    seed: u64,
) -> Result<LoggedDataset> {
    generate_dataset_with_stats(env, table, n, seed).map(|(d, _)| d)
}

/// As [`generate_dataset`], also reporting generation statistics.
pub fn generate_dataset_with_stats(
    env: &GaussianEnvironment,
    table: &LoggingPolicyTable,
    n: usize,
    seed: u64,
) -> Result<(LoggedDataset, GenStats)> {
    if table.num_actions() != env.num_actions() {
        return Err(Error::ShapeMismatch(format!(
            "logging table has {} actions, environment has {}",
            table.num_actions(),
            env.num_actions()
        )));
    }
    if n == 0 {
        return Err(Error::DomainError("dataset size must be positive".into()));
    }
    let p = env.dim();
    let (lo, hi) = env.clip_range();
    let mut rng = seeds::rng(seed);
    let mut contexts = Array2::zeros((n, p));
    let mut actions = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    let mut propensities = Vec::with_capacity(n);
    let mut stats = GenStats::default();
    for i in 0..n {
        let x = env.sample_context(&mut rng);
        let region = bayes_policy(env, &x);
        let a = table.sample_action(region, &mut rng);
        let raw = env.sample_reward(a, &x, &mut rng);
        let y = raw.clamp(lo, hi);
        if y != raw {
            stats.clipped += 1;
        }
        contexts.row_mut(i).assign(&ndarray::ArrayView1::from(&x[..]));
        actions.push(a);
        rewards.push(y);
        propensities.push(table.prob(a, region));
    }
    let data = LoggedDataset::with_reward_range(
        contexts,
        actions,
        rewards,
        propensities,
        env.num_actions(),
        table.eta(),
        env.clip_range(),
    )?;
    Ok((data, stats))
}

/// A full-information evaluation set: contexts plus the realized reward of
/// *every* action per context. Used as ground truth for out-of-sample policy
/// values and for stress-test reward draws.
#[derive(Debug, Clone)]
pub struct FullInfoSet {
    contexts: Array2<f64>,
    /// n × d matrix; column a−1 holds Y_i(a).
    rewards: Array2<f64>,
}

impl FullInfoSet {
    pub fn new(contexts: Array2<f64>, rewards: Array2<f64>) -> Result<Self> {
        if contexts.nrows() != rewards.nrows() || contexts.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "contexts ({} rows) and rewards ({} rows) must agree and be nonempty",
                contexts.nrows(),
                rewards.nrows()
            )));
        }
        if rewards.ncols() == 0 {
            return Err(Error::ShapeMismatch("need at least one action column".into()));
        }
        if rewards.iter().any(|v| !v.is_finite()) || contexts.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError("full-information set must be finite".into()));
        }
        Ok(Self { contexts, rewards })
    }

    pub fn n(&self) -> usize {
        self.contexts.nrows()
    }

    pub fn dim(&self) -> usize {
        self.contexts.ncols()
    }

    pub fn num_actions(&self) -> usize {
        self.rewards.ncols()
    }

    pub fn context(&self, i: usize) -> &[f64] {
        self.contexts.row(i).to_slice().expect("row-major layout")
    }

    /// Realized reward of one (context, action), action 1-based.
    pub fn reward(&self, i: usize, action: usize) -> f64 {
        self.rewards[(i, action - 1)]
    }

    pub fn contexts(&self) -> &Array2<f64> {
        &self.contexts
    }

    pub fn rewards(&self) -> &Array2<f64> {
        &self.rewards
    }

    /// Mean realized reward of a policy over the set: (1/n)·Σ Y_i(π(x_i)).
    pub fn mean_reward(&self, policy: &dyn Policy) -> Result<f64> {
        let mut sum = 0.0;
        for i in 0..self.n() {
            let a = policy.action(self.context(i))?;
            sum += self.reward(i, a);
        }
        Ok(sum / self.n() as f64)
    }

    /// Reinterprets the set as an on-policy logged dataset of the given
    /// policy: A_i = π(x_i) with propensity one. Robust values computed from
    /// it are test-set plug-ins under the full-information empirical measure.
    pub fn to_onpolicy_logged(&self, policy: &dyn Policy) -> Result<LoggedDataset> {
        let n = self.n();
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        for i in 0..n {
            let a = policy.action(self.context(i))?;
            actions.push(a);
            rewards.push(self.reward(i, a));
        }
        let lo = rewards.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
        let mut hi = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        if hi <= lo {
            hi = lo + 1.0;
        }
        LoggedDataset::with_reward_range(
            self.contexts.clone(),
            actions,
            rewards,
            vec![1.0; n],
            self.num_actions(),
            1.0,
            (lo, hi),
        )
    }

    /// Writes the set as CSV with header x1..xp,y1..yd.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let p = self.dim();
        let d = self.num_actions();
        let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
        header.extend((1..=d).map(|a| format!("y{a}")));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self
                .context(i)
                .iter()
                .map(|v| crate::dataset::format_f64(*v))
                .collect();
            rec.extend((1..=d).map(|a| crate::dataset::format_f64(self.reward(i, a))));
            w.write_record(&rec)?;
        }
        w.flush().map_err(Error::Io)?;
        Ok(())
    }

    /// Reads a set written by [`to_csv_writer`].
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = r.headers()?.clone();
        let p = headers.iter().take_while(|h| h.starts_with('x')).count();
        let d = headers.len() - p;
        if p == 0 || d == 0 {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header x1..xp,y1..yd, got {:?}", headers),
            });
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut n = 0usize;
        for (idx, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = idx + 2;
            if rec.len() != p + d {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, got {}", p + d, rec.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("bad number {s:?}: {e}"),
                })
            };
            for j in 0..p {
                xs.push(parse(&rec[j])?);
            }
            for a in 0..d {
                ys.push(parse(&rec[p + a])?);
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::Parse {
                line: 1,
                msg: "no data rows".into(),
            });
        }
        Self::new(
            Array2::from_shape_vec((n, p), xs).expect("counted shape"),
            Array2::from_shape_vec((n, d), ys).expect("counted shape"),
        )
    }
}

/// Samples a full-information set of size n from an environment, rewards
/// clipped to its range.
pub fn make_full_info_set(env: &GaussianEnvironment, n: usize, seed: u64) -> Result<FullInfoSet> {
    if n == 0 {
        return Err(Error::DomainError("set size must be positive".into()));
    }
    let (lo, hi) = env.clip_range();
    let d = env.num_actions();
    let mut rng = seeds::rng(seed);
    let mut contexts = Array2::zeros((n, env.dim()));
    let mut rewards = Array2::zeros((n, d));
    for i in 0..n {
        let x = env.sample_context(&mut rng);
        for a in 1..=d {
            rewards[(i, a - 1)] = env.sample_reward(a, &x, &mut rng).clamp(lo, hi);
        }
        contexts.row_mut(i).assign(&ndarray::ArrayView1::from(&x[..]));
    }
    FullInfoSet::new(contexts, rewards)
}

/// Builds stress-test sets with randomly downshifted means: set j draws a
/// Dirichlet(1,…,1) split (δ_1,…,δ_d) of the budget δ and shifts action a's
/// rewards down by σ_a·√(2δ_a) — the worst mean shift a Gaussian admits
/// within KL budget δ_a per action.
pub fn make_qmin_testsets(
    env: &GaussianEnvironment,
    delta: f64,
    num_sets: usize,
    n_per_set: usize,
    seed: u64,
) -> Result<Vec<FullInfoSet>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::DomainError(format!("delta must be positive, got {delta}")));
    }
    if num_sets == 0 || n_per_set == 0 {
        return Err(Error::DomainError("need at least one set and one row per set".into()));
    }
    let d = env.num_actions();
    let (lo, hi) = env.clip_range();
    let mut sets = Vec::with_capacity(num_sets);
    for j in 0..num_sets {
        let mut rng = seeds::stream_rng(seed, j as u64);
        // Dirichlet(1,…,1) via normalized Exp(1) draws.
        let gaps: Vec<f64> = (0..d).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = gaps.iter().sum();
        let shifts: Vec<f64> = gaps
            .iter()
            .enumerate()
            .map(|(a, g)| env.sigma(a + 1) * (2.0 * delta * g / total).sqrt())
            .collect();
        let mut contexts = Array2::zeros((n_per_set, env.dim()));
        let mut rewards = Array2::zeros((n_per_set, d));
        for i in 0..n_per_set {
            let x = env.sample_context(&mut rng);
            for a in 1..=d {
                let y = env.sample_reward(a, &x, &mut rng) - shifts[a - 1];
                rewards[(i, a - 1)] = y.clamp(lo, hi);
            }
            contexts.row_mut(i).assign(&ndarray::ArrayView1::from(&x[..]));
        }
        sets.push(FullInfoSet::new(contexts, rewards)?);
    }
    Ok(sets)
}

/// Worst mean realized reward of a policy across stress-test sets built by
/// [`make_qmin_testsets`].
pub fn q_min(
    env: &GaussianEnvironment,
    policy: &dyn Policy,
    delta: f64,
    num_sets: usize,
    n_per_set: usize,
    seed: u64,
) -> Result<f64> {
    let sets = make_qmin_testsets(env, delta, num_sets, n_per_set, seed)?;
    let mut worst = f64::INFINITY;
    for s in &sets {
        worst = worst.min(s.mean_reward(policy)?);
    }
    Ok(worst)
}
