//! Class-balanced multiclass cross entropy and pairwise-EER analysis.

mod confusion;
mod eer;

pub use confusion::{confusion_matrix, ConfusionMatrix, StressFilter, TargetFilter, TargetRow};
pub use eer::{eer, pairwise_eer, PairwiseEer};

use serde::Serialize;

use crate::calib::CalibrationTransform;
use crate::error::{Error, Result};
use crate::likelihood::{log_sum_exp, PriorVector};
use crate::pooling::PhoneTrial;

/// Outcome of a cross-entropy evaluation; all penalties in nats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub h_mc: f64,
    /// Mean `-ln p(true)` per class; `None` for classes without trials.
    pub per_class_penalty: Vec<Option<f64>>,
    pub class_counts: Vec<usize>,
    pub n_active_classes: usize,
    pub eval_prior: Vec<f64>,
}

/// `-ln p(true | λ)` under the evaluation prior, via log-sum-exp.
pub(crate) fn trial_penalty(llk: &[f64], log_prior: &[f64], true_phone: usize) -> f64 {
    let logits: Vec<f64> = llk.iter().zip(log_prior).map(|(l, p)| l + p).collect();
    log_sum_exp(&logits) - logits[true_phone]
}

/// Class-balanced multiclass cross entropy.
///
/// Each trial's log-likelihood vector is optionally calibrated, turned into
/// a posterior under `eval_prior`, and scored by `-ln p(true)`. Penalties
/// are averaged within each class and then across classes that have at
/// least one trial, so every active class carries equal weight whatever its
/// trial count.
pub fn h_mc(
    trials: &[PhoneTrial],
    eval_prior: &PriorVector,
    transform: Option<&CalibrationTransform>,
) -> Result<EvalReport> {
    if trials.is_empty() {
        return Err(Error::NoTrials);
    }
    let n = eval_prior.len();
    if let Some(t) = transform {
        if t.len() != n {
            return Err(Error::dimension("calibration offsets", n, t.len()));
        }
    }
    let log_prior = eval_prior.log_values();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for trial in trials {
        if trial.llk.len() != n {
            return Err(Error::dimension(
                "trial log-likelihood vector",
                n,
                trial.llk.len(),
            ));
        }
        if trial.true_phone >= n {
            return Err(Error::dimension("true phone index", n, trial.true_phone));
        }
        let penalty = match transform {
            Some(t) => trial_penalty(
                &t.apply_slice(trial.llk.as_slice()),
                &log_prior,
                trial.true_phone,
            ),
            None => trial_penalty(trial.llk.as_slice(), &log_prior, trial.true_phone),
        };
        sums[trial.true_phone] += penalty;
        counts[trial.true_phone] += 1;
    }
    let per_class_penalty: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let active: Vec<f64> = per_class_penalty.iter().flatten().copied().collect();
    let h_mc = active.iter().sum::<f64>() / active.len() as f64;
    Ok(EvalReport {
        h_mc,
        per_class_penalty,
        class_counts: counts,
        n_active_classes: active.len(),
        eval_prior: eval_prior.as_slice().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::LogLikVector;
    use approx::assert_abs_diff_eq;

    fn trial(true_phone: usize, llk: Vec<f64>) -> PhoneTrial {
        PhoneTrial {
            true_phone,
            llk: LogLikVector::new(llk).unwrap(),
            duration: 1,
            stress: None,
        }
    }

    /// A 2-class trial whose penalty under a flat prior is exactly `penalty`.
    fn trial_with_penalty(true_phone: usize, penalty: f64) -> PhoneTrial {
        // p(true) = e^{-penalty}; logit difference = ln(p / (1 - p))
        let p = (-penalty).exp();
        let mut llk = vec![0.0, 0.0];
        llk[true_phone] = (p / (1.0 - p)).ln();
        trial(true_phone, llk)
    }

    #[test]
    fn flat_posterior_reference_42() {
        let trials: Vec<_> = (0..84).map(|k| trial(k % 42, vec![0.0; 42])).collect();
        let r = h_mc(&trials, &PriorVector::flat(42), None).unwrap();
        assert_abs_diff_eq!(r.h_mc, 42f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.h_mc, 3.7377, epsilon = 1e-3);
    }

    #[test]
    fn single_trial_two_classes() {
        let r = h_mc(
            &[trial(0, vec![3f64.ln(), 0.0])],
            &PriorVector::flat(2),
            None,
        )
        .unwrap();
        assert_abs_diff_eq!(r.h_mc, -(0.75f64).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.h_mc, 0.2877, epsilon = 1e-4);
        assert_eq!(r.n_active_classes, 1);
        assert_eq!(r.per_class_penalty[1], None);
    }

    #[test]
    fn classes_are_balanced() {
        let trials = vec![
            trial_with_penalty(0, 0.1),
            trial_with_penalty(0, 0.3),
            trial_with_penalty(1, 0.6),
        ];
        let r = h_mc(&trials, &PriorVector::flat(2), None).unwrap();
        assert_abs_diff_eq!(r.h_mc, 0.4, epsilon = 1e-12);
        assert_eq!(r.class_counts, vec![2, 1]);
        assert_abs_diff_eq!(r.per_class_penalty[0].unwrap(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn identity_transform_changes_nothing() {
        let trials = vec![
            trial(0, vec![1.0, -2.0, 0.5]),
            trial(2, vec![0.1, 0.2, 0.3]),
        ];
        let prior = PriorVector::flat(3);
        let a = h_mc(&trials, &prior, None).unwrap();
        let b = h_mc(&trials, &prior, Some(&CalibrationTransform::identity(3))).unwrap();
        assert_eq!(a.h_mc, b.h_mc);
    }

    #[test]
    fn errors() {
        let prior = PriorVector::flat(2);
        assert!(matches!(h_mc(&[], &prior, None), Err(Error::NoTrials)));
        assert!(h_mc(&[trial(0, vec![0.0; 3])], &prior, None).is_err());
        assert!(h_mc(&[trial(2, vec![0.0; 2])], &prior, None).is_err());
        assert!(h_mc(
            &[trial(0, vec![0.0; 2])],
            &prior,
            Some(&CalibrationTransform::identity(3))
        )
        .is_err());
    }
}
