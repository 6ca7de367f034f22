//! Distributional uncertainty sets: divergence balls of radius δ around the
//! data-generating law.

use crate::error::{Error, Result};
use crate::fdiv::c_k;
use serde::{Deserialize, Serialize};

/// An f-divergence ball {P : D_f(P ‖ P₀) ≤ δ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UncertaintySet {
    /// Kullback–Leibler ball of radius δ.
    Kl { delta: f64 },
    /// Cressie–Read ball of radius δ with family parameter k > 1.
    CressieRead { delta: f64, k: f64 },
}

impl UncertaintySet {
    /// KL ball of radius δ > 0.
    pub fn kl(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::DomainError(format!("delta must be positive, got {delta}")));
        }
        Ok(UncertaintySet::Kl { delta })
    }

    /// Cressie–Read ball of radius δ > 0 with k > 1.
    pub fn cressie_read(delta: f64, k: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::DomainError(format!("delta must be positive, got {delta}")));
        }
        // c_k validates k > 1.
        c_k(k, delta)?;
        Ok(UncertaintySet::CressieRead { delta, k })
    }

    /// Ball radius δ.
    pub fn delta(&self) -> f64 {
        match *self {
            UncertaintySet::Kl { delta } => delta,
            UncertaintySet::CressieRead { delta, .. } => delta,
        }
    }

    /// Conjugate exponent k* = k/(k−1) (Cressie–Read only).
    pub fn k_star(&self) -> Option<f64> {
        match *self {
            UncertaintySet::Kl { .. } => None,
            UncertaintySet::CressieRead { k, .. } => Some(k / (k - 1.0)),
        }
    }

    /// Radius-dependent coefficient c_k(δ) (Cressie–Read only).
    pub fn coefficient(&self) -> Option<f64> {
        match *self {
            UncertaintySet::Kl { .. } => None,
            UncertaintySet::CressieRead { delta, k } => Some(c_k(k, delta).expect("validated at construction")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_requires_positive_delta() {
        assert!(UncertaintySet::kl(0.0).is_err());
        assert!(UncertaintySet::kl(-0.1).is_err());
        assert!(UncertaintySet::kl(0.2).is_ok());
    }

    #[test]
    fn cressie_read_derived_quantities() {
        let u = UncertaintySet::cressie_read(1.0, 2.0).unwrap();
        assert_eq!(u.k_star(), Some(2.0));
        let c = u.coefficient().unwrap();
        assert!((c - 3f64.sqrt()).abs() < 1e-15);
        assert!(c >= 1.0);
    }

    #[test]
    fn cressie_read_rejects_k_at_or_below_one() {
        assert!(UncertaintySet::cressie_read(0.1, 1.0).is_err());
        assert!(UncertaintySet::cressie_read(0.1, 0.5).is_err());
    }
}
