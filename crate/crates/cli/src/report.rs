//! Machine-readable run reports: per-replication records plus aggregates
//! recomputable from them.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One (replication, training size, policy) measurement.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReplicationRecord {
    pub replication: usize,
    /// Base seed of this replication cell (training/test/stress seeds derive
    /// from it).
    pub seed: u64,
    /// Policy kind: "dro", "lin", or an oracle name.
    pub policy: String,
    pub n_train: usize,
    /// Out-of-sample robust value on the fresh test set.
    pub qdro: f64,
    /// Dual maximizer of the test-set evaluation.
    pub alpha: f64,
    /// Asymptotic standard error of the test-set evaluation.
    pub std_error: f64,
    /// Worst mean reward across stress test sets (when requested).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qmin: Option<f64>,
    /// Share of test contexts on which the policy agrees with its oracle
    /// counterpart (when requested).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_agreement: Option<f64>,
    pub wall_time_s: f64,
    /// Present when this record failed; value fields are then NaN/ignored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean ± standard deviation of one (policy, n_train) cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Aggregate {
    pub policy: String,
    pub n_train: usize,
    /// Successful replications contributing to the statistics.
    pub replications: usize,
    pub mean_qdro: f64,
    pub std_qdro: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_qmin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_qmin: Option<f64>,
}

/// Full report of a command run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    /// Echo of the effective configuration.
    pub config: serde_json::Value,
    pub records: Vec<ReplicationRecord>,
    pub aggregates: Vec<Aggregate>,
}

/// Sample mean and (n−1)-denominator standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

impl RunReport {
    /// Recomputes per-(policy, n_train) aggregates from the successful
    /// records, in deterministic (policy, n) order.
    pub fn compute_aggregates(records: &[ReplicationRecord]) -> Vec<Aggregate> {
        let mut cells: BTreeMap<(String, usize), Vec<&ReplicationRecord>> = BTreeMap::new();
        for rec in records.iter().filter(|r| r.error.is_none()) {
            cells.entry((rec.policy.clone(), rec.n_train)).or_default().push(rec);
        }
        cells
            .into_iter()
            .map(|((policy, n_train), recs)| {
                let qdro: Vec<f64> = recs.iter().map(|r| r.qdro).collect();
                let (mean_qdro, std_qdro) = mean_std(&qdro);
                let qmin: Vec<f64> = recs.iter().filter_map(|r| r.qmin).collect();
                let (mean_qmin, std_qmin) = if qmin.is_empty() {
                    (None, None)
                } else {
                    let (m, s) = mean_std(&qmin);
                    (Some(m), Some(s))
                };
                Aggregate {
                    policy,
                    n_train,
                    replications: recs.len(),
                    mean_qdro,
                    std_qdro,
                    mean_qmin,
                    std_qmin,
                }
            })
            .collect()
    }

    pub fn new(command: &str, config: serde_json::Value, records: Vec<ReplicationRecord>) -> Self {
        let aggregates = Self::compute_aggregates(&records);
        Self {
            command: command.to_string(),
            config,
            records,
            aggregates,
        }
    }

    /// One aggregate cell, if present.
    pub fn aggregate(&self, policy: &str, n_train: usize) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.policy == policy && a.n_train == n_train)
    }

    /// Writes the aggregates as a flat CSV table (one row per cell).
    pub fn write_aggregate_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "policy",
            "n_train",
            "replications",
            "mean_qdro",
            "std_qdro",
            "mean_qmin",
            "std_qmin",
        ])?;
        for a in &self.aggregates {
            w.write_record([
                a.policy.clone(),
                a.n_train.to_string(),
                a.replications.to_string(),
                format!("{}", a.mean_qdro),
                format!("{}", a.std_qdro),
                a.mean_qmin.map(|v| format!("{v}")).unwrap_or_default(),
                a.std_qmin.map(|v| format!("{v}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(policy: &str, n: usize, qdro: f64, qmin: Option<f64>, error: Option<&str>) -> ReplicationRecord {
        ReplicationRecord {
            replication: 0,
            seed: 1,
            policy: policy.into(),
            n_train: n,
            qdro,
            alpha: 1.0,
            std_error: 0.1,
            qmin,
            oracle_agreement: None,
            wall_time_s: 0.0,
            error: error.map(String::from),
        }
    }

    #[test]
    fn aggregates_match_hand_computation() {
        let records = vec![
            rec("dro", 500, 0.10, Some(0.05), None),
            rec("dro", 500, 0.14, Some(0.07), None),
            rec("lin", 500, 0.09, None, None),
            rec("dro", 500, 99.0, Some(9.0), Some("boom")), // excluded
        ];
        let aggs = RunReport::compute_aggregates(&records);
        assert_eq!(aggs.len(), 2);
        let dro = &aggs[0];
        assert_eq!((dro.policy.as_str(), dro.n_train, dro.replications), ("dro", 500, 2));
        assert!((dro.mean_qdro - 0.12).abs() < 1e-15);
        // Sample std of {0.10, 0.14} with the n−1 denominator.
        assert!((dro.std_qdro - (2.0 * 0.02f64.powi(2)).sqrt()).abs() < 1e-15);
        assert!((dro.mean_qmin.unwrap() - 0.06).abs() < 1e-15);
        assert_eq!(aggs[1].policy, "lin");
        assert!(aggs[1].mean_qmin.is_none());
    }

    #[test]
    fn json_round_trip_preserves_records() {
        let report = RunReport::new(
            "experiment",
            serde_json::json!({"delta": 0.2}),
            vec![rec("dro", 1000, 0.118, Some(0.3), None)],
        );
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.records, report.records);
        assert_eq!(back.aggregates, report.aggregates);
        assert_eq!(back.command, "experiment");
    }

    #[test]
    fn mean_std_edge_cases() {
        assert!(mean_std(&[]).0.is_nan());
        assert_eq!(mean_std(&[3.5]), (3.5, 0.0));
    }
}
