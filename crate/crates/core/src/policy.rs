//! Deterministic policies π: X → {1..d}.
//!
//! All policies are total and deterministic: the same context always yields
//! the same action, and every argmax tie is broken toward the lowest action
//! id so downstream results are reproducible.

use crate::error::{Error, Result};
use ndarray::Array2;

/// A deterministic mapping from contexts to 1-based action ids.
pub trait Policy {
    /// Returns the action chosen for context `x`.
    ///
    /// Must be pure: repeated calls with the same `x` agree bit-for-bit.
    fn action(&self, x: &[f64]) -> Result<usize>;

    /// Number of actions d the policy chooses among.
    fn num_actions(&self) -> usize;
}

/// Applies a policy to one context (dimension-checked by the policy).
pub fn apply_policy(policy: &dyn Policy, context: &[f64]) -> Result<usize> {
    policy.action(context)
}

/// Index of the largest score, ties broken toward the lowest index.
/// Returns a 1-based action id.
pub(crate) fn argmax_action(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    best + 1
}

/// Linear policy π_Θ(x) ∈ argmax_a θ_aᵀ[1, x].
///
/// Θ has shape (p+1) × d: column a is θ_a, and row 0 multiplies the
/// constant-1 intercept coordinate that the policy prepends internally
/// (contexts themselves are stored without it).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    theta: Array2<f64>,
}

impl LinearPolicy {
    /// Wraps a (p+1) × d coefficient matrix.
    pub fn new(theta: Array2<f64>) -> Result<Self> {
        if theta.nrows() < 2 || theta.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "theta must be (p+1) x d with p >= 1, d >= 1; got {} x {}",
                theta.nrows(),
                theta.ncols()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError("theta contains non-finite entries".into()));
        }
        Ok(Self { theta })
    }

    /// Context dimension p.
    pub fn context_dim(&self) -> usize {
        self.theta.nrows() - 1
    }

    /// Coefficient matrix Θ, shape (p+1) × d.
    pub fn theta(&self) -> &Array2<f64> {
        &self.theta
    }

    /// Score θ_aᵀ[1, x] for a 1-based action id.
    pub fn score(&self, action: usize, x: &[f64]) -> f64 {
        let col = self.theta.column(action - 1);
        let mut s = col[0];
        for (j, &xj) in x.iter().enumerate() {
            s += col[j + 1] * xj;
        }
        s
    }
}

impl Policy for LinearPolicy {
    fn action(&self, x: &[f64]) -> Result<usize> {
        let p = self.context_dim();
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: x.len(),
            });
        }
        Ok(argmax_action((1..=self.num_actions()).map(|a| self.score(a, x))))
    }

    fn num_actions(&self) -> usize {
        self.theta.ncols()
    }
}

/// Explicit context → action lookup for tests: contexts equal (bitwise) to a
/// stored entry map to its action, everything else to a default action.
#[derive(Debug, Clone)]
pub struct TablePolicy {
    entries: Vec<(Vec<f64>, usize)>,
    default: usize,
    num_actions: usize,
}

impl TablePolicy {
    pub fn new(entries: Vec<(Vec<f64>, usize)>, default: usize, num_actions: usize) -> Self {
        Self {
            entries,
            default,
            num_actions,
        }
    }
}

impl Policy for TablePolicy {
    fn action(&self, x: &[f64]) -> Result<usize> {
        for (key, action) in &self.entries {
            if key.len() == x.len() && key.iter().zip(x).all(|(a, b)| a.to_bits() == b.to_bits()) {
                return Ok(*action);
            }
        }
        Ok(self.default)
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }
}
