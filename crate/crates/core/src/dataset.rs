//! Logged bandit data: n i.i.d. triples (X_i, A_i, Y_i) with known logging
//! propensities π₀(A_i|X_i).
//!
//! A dataset carries its standing assumptions as metadata: the overlap floor
//! η > 0 (every logged propensity is at least η) and the reward range
//! [lo, hi]. The canonical range is [0, M]; a negative lower bound is allowed
//! for raw synthetic data whose reward laws are centered near zero, and every
//! estimator in this crate is exactly equivariant under reward shifts, so
//! nothing downstream depends on the choice of origin.

use crate::error::{Error, Result};
use crate::policy::Policy;
use ndarray::Array2;
use std::io::{Read, Write};
use std::path::Path;

/// Immutable logged bandit dataset (contexts, actions, rewards, propensities).
///
/// Actions are 1-based ids in {1..d}. Contexts are stored without an
/// intercept coordinate; policies that need one prepend it internally.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedDataset {
    contexts: Array2<f64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    propensities: Vec<f64>,
    num_actions: usize,
    eta: f64,
    reward_range: (f64, f64),
}

impl LoggedDataset {
    /// Builds a dataset with the canonical reward range [0, `reward_bound`],
    /// validating all invariants (see [`validate_dataset`]).
    pub fn new(
        contexts: Array2<f64>,
        actions: Vec<usize>,
        rewards: Vec<f64>,
        propensities: Vec<f64>,
        num_actions: usize,
        eta: f64,
        reward_bound: f64,
    ) -> Result<Self> {
        Self::with_reward_range(
            contexts,
            actions,
            rewards,
            propensities,
            num_actions,
            eta,
            (0.0, reward_bound),
        )
    }

    /// Builds a dataset with an explicit reward range `[lo, hi]`.
    pub fn with_reward_range(
        contexts: Array2<f64>,
        actions: Vec<usize>,
        rewards: Vec<f64>,
        propensities: Vec<f64>,
        num_actions: usize,
        eta: f64,
        reward_range: (f64, f64),
    ) -> Result<Self> {
        let n = contexts.nrows();
        if n == 0 {
            return Err(Error::ShapeMismatch("dataset must contain at least one record".into()));
        }
        if actions.len() != n || rewards.len() != n || propensities.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "contexts have {n} rows but actions/rewards/propensities have lengths {}/{}/{}",
                actions.len(),
                rewards.len(),
                propensities.len()
            )));
        }
        if num_actions == 0 {
            return Err(Error::ShapeMismatch("num_actions must be at least 1".into()));
        }
        if !(eta > 0.0) {
            return Err(Error::DomainError(format!("overlap floor eta must be positive, got {eta}")));
        }
        if !(reward_range.0 <= reward_range.1) {
            return Err(Error::DomainError(format!(
                "reward range [{}, {}] is empty",
                reward_range.0, reward_range.1
            )));
        }
        if let Some((i, &a)) = actions.iter().enumerate().find(|(_, &a)| a == 0 || a > num_actions) {
            return Err(Error::ShapeMismatch(format!(
                "action id {a} at record {i} outside 1..={num_actions}"
            )));
        }
        let data = Self {
            contexts,
            actions,
            rewards,
            propensities,
            num_actions,
            eta,
            reward_range,
        };
        validate_dataset(&data, eta, reward_range.1)?;
        Ok(data)
    }

    /// Number of records n.
    pub fn n(&self) -> usize {
        self.contexts.nrows()
    }

    /// Context dimension p.
    pub fn p(&self) -> usize {
        self.contexts.ncols()
    }

    /// Number of actions d.
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Overlap floor η.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Reward range [lo, hi]; lo is 0 unless explicitly set.
    pub fn reward_range(&self) -> (f64, f64) {
        self.reward_range
    }

    /// Upper reward bound M.
    pub fn reward_bound(&self) -> f64 {
        self.reward_range.1
    }

    /// Context row i as a slice.
    pub fn context(&self, i: usize) -> &[f64] {
        self.contexts
            .row(i)
            .to_slice()
            .expect("contexts are stored in standard layout")
    }

    /// Full context matrix.
    pub fn contexts(&self) -> &Array2<f64> {
        &self.contexts
    }

    /// Logged action ids (1-based).
    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Logged rewards.
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Logging propensities π₀(A_i|X_i).
    pub fn propensities(&self) -> &[f64] {
        &self.propensities
    }

    /// Reads a dataset from CSV with header `x1..xp,action,reward,propensity`.
    ///
    /// Metadata (d, η, reward range) is inferred from the records: d as the
    /// largest action id, η as the smallest propensity, and the range as
    /// [min(0, min reward), max reward].
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let (contexts, actions, rewards, propensities) = parse_csv(reader)?;
        let num_actions = *actions.iter().max().expect("parse_csv rejects empty input");
        let eta = propensities.iter().cloned().fold(f64::INFINITY, f64::min);
        let lo = rewards.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
        let hi = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(lo);
        Self::with_reward_range(contexts, actions, rewards, propensities, num_actions, eta, (lo, hi))
    }

    /// Reads a dataset from CSV with explicit metadata, validating records
    /// against it.
    pub fn from_csv_reader_with<R: Read>(
        reader: R,
        num_actions: usize,
        eta: f64,
        reward_range: (f64, f64),
    ) -> Result<Self> {
        let (contexts, actions, rewards, propensities) = parse_csv(reader)?;
        Self::with_reward_range(contexts, actions, rewards, propensities, num_actions, eta, reward_range)
    }

    /// Reads a dataset from a CSV file, inferring metadata from the records.
    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Writes the dataset in the CSV interchange format.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let p = self.p();
        let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
        header.extend(["action".into(), "reward".into(), "propensity".into()]);
        w.write_record(&header)?;
        let mut record: Vec<String> = Vec::with_capacity(p + 3);
        for i in 0..self.n() {
            record.clear();
            record.extend(self.context(i).iter().map(|v| format_f64(*v)));
            record.push(self.actions[i].to_string());
            record.push(format_f64(self.rewards[i]));
            record.push(format_f64(self.propensities[i]));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the dataset to a CSV file.
    pub fn to_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.to_csv_writer(std::fs::File::create(path)?)
    }
}

/// Serializes an f64 so that it round-trips exactly through parsing.
pub(crate) fn format_f64(v: f64) -> String {
    let mut buf = ryu_like(v);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(v: f64) -> String {
    // Shortest representation that reparses to the same bits.
    let s = format!("{v}");
    if s.parse::<f64>() == Ok(v) {
        s
    } else {
        format!("{v:?}")
    }
}

type ParsedColumns = (Array2<f64>, Vec<usize>, Vec<f64>, Vec<f64>);

fn parse_csv<R: Read>(reader: R) -> Result<ParsedColumns> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = headers.len();
    if cols < 4 {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected at least 4 columns (x1, action, reward, propensity), found {cols}"),
        });
    }
    let p = cols - 3;
    for (j, name) in headers.iter().take(p).enumerate() {
        let want = format!("x{}", j + 1);
        if name.trim() != want {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header column {} to be '{want}', found '{name}'", j + 1),
            });
        }
    }
    for (j, want) in [(p, "action"), (p + 1, "reward"), (p + 2, "propensity")] {
        let name = headers.get(j).unwrap_or_default();
        if name.trim() != want {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header column {} to be '{want}', found '{name}'", j + 1),
            });
        }
    }

    let mut flat: Vec<f64> = Vec::new();
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut propensities = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2; // 1-based, after the header line
        let rec = rec?;
        if rec.len() != cols {
            return Err(Error::Parse {
                line,
                msg: format!("expected {cols} fields, found {}", rec.len()),
            });
        }
        let field = |j: usize| -> &str { rec.get(j).unwrap_or_default().trim() };
        let parse_num = |j: usize, what: &str| -> Result<f64> {
            field(j).parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid {what} '{}'", field(j)),
            })
        };
        for j in 0..p {
            flat.push(parse_num(j, "context value")?);
        }
        let action: usize = field(p).parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid action id '{}' (expected a positive integer)", field(p)),
        })?;
        actions.push(action);
        rewards.push(parse_num(p + 1, "reward")?);
        propensities.push(parse_num(p + 2, "propensity")?);
    }
    let n = actions.len();
    if n == 0 {
        return Err(Error::Parse {
            line: 2,
            msg: "dataset contains no records".into(),
        });
    }
    let contexts = Array2::from_shape_vec((n, p), flat)
        .map_err(|e| Error::ShapeMismatch(format!("context matrix: {e}")))?;
    Ok((contexts, actions, rewards, propensities))
}

/// Checks the standing assumptions on logged data: every propensity lies in
/// [η, 1] and every reward lies in the declared range (whose upper end is
/// `reward_bound`). Returns the first violating record on failure.
pub fn validate_dataset(data: &LoggedDataset, eta: f64, reward_bound: f64) -> Result<()> {
    let lo = data.reward_range().0.min(reward_bound);
    for (i, &prop) in data.propensities.iter().enumerate() {
        if !(prop >= eta && prop <= 1.0 && prop.is_finite()) {
            return Err(Error::OverlapViolation {
                index: i,
                propensity: prop,
                eta,
            });
        }
    }
    for (i, &y) in data.rewards.iter().enumerate() {
        if !(y >= lo && y <= reward_bound) || !y.is_finite() {
            return Err(Error::RewardRangeViolation {
                index: i,
                reward: y,
                lo,
                hi: reward_bound,
            });
        }
    }
    Ok(())
}

/// Per-record match indicators and importance weights of a policy on a log.
#[derive(Debug, Clone)]
pub struct MatchWeights {
    /// indicator_i = 1{π(X_i) = A_i}.
    pub indicators: Vec<bool>,
    /// ipw_i = indicator_i / π₀(A_i|X_i).
    pub ipw: Vec<f64>,
    /// S_n = (1/n) Σ ipw_i, the self-normalization denominator.
    pub s_n: f64,
}

/// Computes match indicators, inverse-propensity weights, and S_n for a
/// deterministic policy on a logged dataset.
///
/// Errors with [`Error::NoMatch`] when the policy disagrees with every logged
/// action, in which case importance-weighted evaluation is undefined.
pub fn match_weights(data: &LoggedDataset, policy: &dyn Policy) -> Result<MatchWeights> {
    let n = data.n();
    let mut indicators = Vec::with_capacity(n);
    let mut ipw = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        let matched = policy.action(data.context(i))? == data.actions[i];
        indicators.push(matched);
        let w = if matched { 1.0 / data.propensities[i] } else { 0.0 };
        total += w;
        ipw.push(w);
    }
    if total == 0.0 {
        return Err(Error::NoMatch);
    }
    Ok(MatchWeights {
        indicators,
        ipw,
        s_n: total / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{LinearPolicy, TablePolicy};
    use ndarray::array;

    fn toy() -> LoggedDataset {
        LoggedDataset::new(
            array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]],
            vec![1, 2, 3],
            vec![0.5, 0.25, 0.75],
            vec![0.5, 0.25, 0.25],
            3,
            0.2,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn accepts_valid_dataset() {
        let d = toy();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        validate_dataset(&d, 0.2, 1.0).unwrap();
    }

    #[test]
    fn rejects_low_propensity() {
        let err = LoggedDataset::new(
            array![[0.0], [0.0]],
            vec![1, 1],
            vec![0.0, 0.0],
            vec![0.01, 0.5],
            1,
            0.05,
            1.0,
        )
        .unwrap_err();
        match err {
            Error::OverlapViolation { index, .. } => assert_eq!(index, 0),
            other => panic!("expected OverlapViolation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_reward() {
        let err = LoggedDataset::new(
            array![[0.0]],
            vec![1],
            vec![1.3],
            vec![0.5],
            1,
            0.1,
            1.0,
        )
        .unwrap_err();
        match err {
            Error::RewardRangeViolation { index, reward, .. } => {
                assert_eq!(index, 0);
                assert_eq!(reward, 1.3);
            }
            other => panic!("expected RewardRangeViolation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_reward_with_default_range() {
        let err = LoggedDataset::new(
            array![[0.0]],
            vec![1],
            vec![-0.2],
            vec![0.5],
            1,
            0.1,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::RewardRangeViolation { .. }));
        // The same record is fine once the range admits negative rewards.
        LoggedDataset::with_reward_range(
            array![[0.0]],
            vec![1],
            vec![-0.2],
            vec![0.5],
            1,
            0.1,
            (-1.0, 1.0),
        )
        .unwrap();
    }

    #[test]
    fn rejects_bad_action_ids_and_shapes() {
        let err = LoggedDataset::new(
            array![[0.0], [0.0]],
            vec![1, 4],
            vec![0.0, 0.0],
            vec![0.5, 0.5],
            3,
            0.1,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));

        let err = LoggedDataset::new(
            array![[0.0], [0.0]],
            vec![1],
            vec![0.0, 0.0],
            vec![0.5, 0.5],
            3,
            0.1,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }

    #[test]
    fn match_weights_on_policy_log() {
        // On-policy log with unit propensities: S_n = 1.
        let d = LoggedDataset::new(
            array![[1.0, 0.0], [0.9, 0.1]],
            vec![1, 1],
            vec![0.3, 0.6],
            vec![1.0, 1.0],
            3,
            0.5,
            1.0,
        )
        .unwrap();
        let pol = LinearPolicy::new(array![[0.0, 0.0, 0.0], [1.0, -0.5, -0.5], [0.0, 0.8, -0.8]]).unwrap();
        let mw = match_weights(&d, &pol).unwrap();
        assert!(mw.indicators.iter().all(|&b| b));
        assert_eq!(mw.s_n, 1.0);
    }

    #[test]
    fn match_weights_arithmetic_and_no_match() {
        let d = LoggedDataset::new(
            array![[1.0], [2.0]],
            vec![1, 2],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            2,
            0.5,
            1.0,
        )
        .unwrap();
        // Policy that matches only record 1 (context [1.0] -> action 1).
        let pol = TablePolicy::new(vec![(vec![1.0], 1), (vec![2.0], 1)], 1, 2);
        let mw = match_weights(&d, &pol).unwrap();
        assert_eq!(mw.ipw, vec![2.0, 0.0]);
        assert_eq!(mw.s_n, 1.0);

        // Policy that never matches.
        let pol = TablePolicy::new(vec![], 2, 2);
        let d2 = LoggedDataset::new(
            array![[1.0], [2.0]],
            vec![1, 1],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            2,
            0.5,
            1.0,
        )
        .unwrap();
        assert!(matches!(match_weights(&d2, &pol), Err(Error::NoMatch)));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = toy();
        let mut buf = Vec::new();
        d.to_csv_writer(&mut buf).unwrap();
        let parsed = LoggedDataset::from_csv_reader_with(buf.as_slice(), 3, 0.2, (0.0, 1.0)).unwrap();
        assert_eq!(d, parsed);
    }

    #[test]
    fn csv_round_trip_survives_awkward_floats() {
        let vals = [1.0 / 3.0, f64::MIN_POSITIVE, 0.1 + 0.2, 1e-17, 0.7];
        let d = LoggedDataset::with_reward_range(
            Array2::from_shape_vec((5, 1), vals.to_vec()).unwrap(),
            vec![1; 5],
            vals.to_vec(),
            vec![0.5; 5],
            1,
            0.5,
            (0.0, 1.0),
        )
        .unwrap();
        let mut buf = Vec::new();
        d.to_csv_writer(&mut buf).unwrap();
        let parsed = LoggedDataset::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(d.rewards(), parsed.rewards());
        assert_eq!(d.contexts(), parsed.contexts());
    }

    #[test]
    fn csv_parse_errors_carry_line_numbers() {
        let text = "x1,action,reward,propensity\n0.0,1,0.5,0.5\n0.0,oops,0.5,0.5\n";
        let err = LoggedDataset::from_csv_reader(text.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected Parse, got {other:?}"),
        }

        let text = "x1,act,reward,propensity\n0.0,1,0.5,0.5\n";
        let err = LoggedDataset::from_csv_reader(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn csv_infers_metadata() {
        let text = "x1,x2,action,reward,propensity\n0.5,1.0,2,0.25,0.4\n-0.5,0.0,1,0.75,0.6\n";
        let d = LoggedDataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(d.num_actions(), 2);
        assert_eq!(d.eta(), 0.4);
        assert_eq!(d.reward_range(), (0.0, 0.75));
        assert_eq!(d.p(), 2);
    }
}
