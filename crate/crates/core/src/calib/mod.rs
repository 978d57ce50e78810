//! Affine calibration `λ' = α·λ + β` of phone log-likelihood vectors.
//!
//! A shared scale `α` and per-phone offsets `β` leave the ranking between any
//! two phones untouched, so fitting them on a labeled set isolates the
//! calibration part of the cross entropy from the discrimination part.

mod fit;

pub use fit::{fit, gradient, objective, FitOptions, FitResult, Optimizer};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{LogLikVector, PhoneSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTransform {
    pub alpha: f64,
    pub beta: Vec<f64>,
}

impl CalibrationTransform {
    pub fn new(alpha: f64, beta: Vec<f64>) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::NonFinite(0));
        }
        if let Some(i) = beta.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite(i + 1));
        }
        Ok(Self { alpha, beta })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            alpha: 1.0,
            beta: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn apply(&self, llk: &LogLikVector) -> Result<LogLikVector> {
        if llk.len() != self.beta.len() {
            return Err(Error::dimension(
                "calibration offsets",
                llk.len(),
                self.beta.len(),
            ));
        }
        LogLikVector::new(self.apply_slice(llk.as_slice()))
    }

    pub(crate) fn apply_slice(&self, llk: &[f64]) -> Vec<f64> {
        llk.iter()
            .zip(&self.beta)
            .map(|(l, b)| self.alpha * l + b)
            .collect()
    }

    /// Same posteriors, with the offsets shifted to zero mean.
    pub fn canonical(&self) -> Self {
        let mean = self.beta.iter().sum::<f64>() / self.beta.len() as f64;
        Self {
            alpha: self.alpha,
            beta: self.beta.iter().map(|b| b - mean).collect(),
        }
    }

    pub fn to_document(&self, phones: &PhoneSet) -> TransformDocument {
        TransformDocument {
            alpha: self.alpha,
            beta: self.beta.clone(),
            phones: phones.labels().to_vec(),
        }
    }
}

/// On-disk form of a transform; the label list pins it to one phone set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformDocument {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub phones: Vec<String>,
}

impl TransformDocument {
    pub fn into_transform(self, phones: &PhoneSet) -> Result<CalibrationTransform> {
        if self.phones != phones.labels() {
            return Err(Error::PhoneSetMismatch);
        }
        if self.beta.len() != phones.len() {
            return Err(Error::dimension(
                "transform offsets",
                phones.len(),
                self.beta.len(),
            ));
        }
        CalibrationTransform::new(self.alpha, self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn llk(v: Vec<f64>) -> LogLikVector {
        LogLikVector::new(v).unwrap()
    }

    #[test]
    fn apply_examples() {
        let v = llk(vec![0.3, -4.0]);
        assert_eq!(CalibrationTransform::identity(2).apply(&v).unwrap(), v);

        let t = CalibrationTransform::new(0.162, vec![0.0, 0.0]).unwrap();
        let out = t.apply(&llk(vec![10.0, 0.0])).unwrap();
        assert_abs_diff_eq!(out.as_slice()[0], 1.62, epsilon = 1e-12);
        assert_eq!(out.as_slice()[1], 0.0);

        let t = CalibrationTransform::new(2.0, vec![1.0, -1.0]).unwrap();
        assert_eq!(
            t.apply(&llk(vec![0.5, 0.5])).unwrap().as_slice(),
            &[2.0, 0.0]
        );
    }

    #[test]
    fn apply_length_mismatch() {
        let t = CalibrationTransform::identity(3);
        assert!(matches!(
            t.apply(&llk(vec![0.0, 0.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn canonical_has_zero_mean() {
        let t = CalibrationTransform::new(1.5, vec![1.0, 2.0, 6.0])
            .unwrap()
            .canonical();
        assert_abs_diff_eq!(t.beta.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
        assert_eq!(t.alpha, 1.5);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(CalibrationTransform::new(f64::NAN, vec![0.0]).is_err());
        assert!(CalibrationTransform::new(1.0, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn document_guards_phone_set() {
        let phones = PhoneSet::new(["a", "b"]).unwrap();
        let other = PhoneSet::new(["a", "c"]).unwrap();
        let doc = CalibrationTransform::new(0.5, vec![0.1, -0.1])
            .unwrap()
            .to_document(&phones);
        let json = serde_json::to_string(&doc).unwrap();
        let back: TransformDocument = serde_json::from_str(&json).unwrap();
        assert!(matches!(
            back.clone().into_transform(&other),
            Err(Error::PhoneSetMismatch)
        ));
        let t = back.into_transform(&phones).unwrap();
        assert_eq!(t.beta, vec![0.1, -0.1]);
    }
}
