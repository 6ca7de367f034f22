//! Named experiment environments and their default logging tables.

use drobandit::bayes::GaussianEnvironment;
use drobandit::sim::{make_linear_env, make_nonlinear_env, LoggingPolicyTable};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The two stock environments exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    /// Linear conditional means, contexts on the unit ball in R^5.
    Linear,
    /// Cone-shaped conditional means, contexts on [−1, 1]^5.
    Nonlinear,
}

impl EnvKind {
    pub fn env(self) -> GaussianEnvironment {
        match self {
            EnvKind::Linear => make_linear_env(),
            EnvKind::Nonlinear => make_nonlinear_env(),
        }
    }

    pub fn default_table(self) -> LoggingPolicyTable {
        match self {
            EnvKind::Linear => LoggingPolicyTable::linear_default(),
            EnvKind::Nonlinear => LoggingPolicyTable::nonlinear_default(),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::Linear => "linear",
            EnvKind::Nonlinear => "nonlinear",
        })
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(EnvKind::Linear),
            "nonlinear" => Ok(EnvKind::Nonlinear),
            other => Err(format!("unknown environment {other:?}; expected linear or nonlinear")),
        }
    }
}
