//! Frame-to-phone pooling of log-likelihood vectors.
//!
//! Three rules combine the `n` frame vectors of one phone:
//!
//! | rule          | result                  | implied frame model        |
//! |---------------|-------------------------|----------------------------|
//! | `sum`         | `Σ_t λ_t`               | independent frames         |
//! | `mean`        | `Σ_t λ_t / n`           | fully correlated frames    |
//! | `logdur`      | `ln(n) · Σ_t λ_t / n`   | in between                 |
//!
//! With `n = 1` the log-duration rule yields the zero vector, i.e. a flat
//! posterior. That is the literal consequence of `ln 1 = 0` and is not
//! special-cased.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{LogLikMatrix, LogLikVector};

/// Lexical stress of a vowel token, as marked in CMU-style dictionaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stress {
    Unstressed = 0,
    Primary = 1,
    Secondary = 2,
}

impl TryFrom<u8> for Stress {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Stress::Unstressed),
            1 => Ok(Stress::Primary),
            2 => Ok(Stress::Secondary),
            other => Err(format!("stress must be 0, 1 or 2, got {other}")),
        }
    }
}

impl From<Stress> for u8 {
    fn from(s: Stress) -> u8 {
        s as u8
    }
}

impl fmt::Display for Stress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PoolingMethod {
    Sum,
    Mean,
    #[value(name = "logdur")]
    #[serde(rename = "logdur")]
    LogDurMean,
}

impl PoolingMethod {
    pub const ALL: [PoolingMethod; 3] = [
        PoolingMethod::Sum,
        PoolingMethod::Mean,
        PoolingMethod::LogDurMean,
    ];

    pub fn pool<R: AsRef<[f64]>>(self, frames: &[R]) -> Result<LogLikVector> {
        match self {
            PoolingMethod::Sum => pool_sum(frames),
            PoolingMethod::Mean => pool_mean(frames),
            PoolingMethod::LogDurMean => pool_logdur_mean(frames),
        }
    }

    /// Factor `k` with `pool(λ_t + c) = pool(λ_t) + k·c` for `n` frames.
    pub fn shift_gain(self, n: usize) -> f64 {
        match self {
            PoolingMethod::Sum => n as f64,
            PoolingMethod::Mean => 1.0,
            PoolingMethod::LogDurMean => (n as f64).ln(),
        }
    }
}

impl fmt::Display for PoolingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            PoolingMethod::Sum => "sum",
            PoolingMethod::Mean => "mean",
            PoolingMethod::LogDurMean => "logdur",
        })
    }
}

/// One aligned phone token: frames `start_frame..end_frame` of an utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneSegment {
    pub utterance_id: String,
    pub phone: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    pub stress: Option<Stress>,
}

impl PhoneSegment {
    pub fn duration(&self) -> usize {
        self.end_frame.saturating_sub(self.start_frame)
    }
}

/// A labeled phone-level log-likelihood vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneTrial {
    pub true_phone: usize,
    pub llk: LogLikVector,
    pub duration: usize,
    pub stress: Option<Stress>,
}

fn checked_sum<R: AsRef<[f64]>>(frames: &[R]) -> Result<Vec<f64>> {
    let first = frames.first().ok_or(Error::EmptyPhone)?.as_ref();
    let mut acc = first.to_vec();
    for frame in &frames[1..] {
        let frame = frame.as_ref();
        if frame.len() != acc.len() {
            return Err(Error::dimension(
                "frame log-likelihood vector",
                acc.len(),
                frame.len(),
            ));
        }
        acc.iter_mut().zip(frame).for_each(|(a, v)| *a += v);
    }
    Ok(acc)
}

/// Componentwise sum, accumulated in frame order.
pub fn pool_sum<R: AsRef<[f64]>>(frames: &[R]) -> Result<LogLikVector> {
    LogLikVector::new(checked_sum(frames)?)
}

pub fn pool_mean<R: AsRef<[f64]>>(frames: &[R]) -> Result<LogLikVector> {
    let n = frames.len() as f64;
    let mut acc = checked_sum(frames)?;
    acc.iter_mut().for_each(|a| *a /= n);
    LogLikVector::new(acc)
}

/// `ln(n)` times the mean.
pub fn pool_logdur_mean<R: AsRef<[f64]>>(frames: &[R]) -> Result<LogLikVector> {
    let scale = (frames.len() as f64).ln();
    let mut acc = pool_mean(frames)?.into_inner();
    acc.iter_mut().for_each(|a| *a *= scale);
    LogLikVector::new(acc)
}

/// Pools every segment over its utterance's frame log-likelihoods, in input order.
pub fn pool(
    segments: &[PhoneSegment],
    utterances: &HashMap<String, LogLikMatrix>,
    method: PoolingMethod,
) -> Result<Vec<PhoneTrial>> {
    segments
        .iter()
        .enumerate()
        .map(|(index, seg)| {
            let matrix =
                utterances
                    .get(&seg.utterance_id)
                    .ok_or_else(|| Error::UnknownUtterance {
                        utterance: seg.utterance_id.clone(),
                        index,
                    })?;
            if seg.end_frame <= seg.start_frame || seg.end_frame > matrix.frames() {
                return Err(Error::SegmentOutOfRange {
                    utterance: seg.utterance_id.clone(),
                    index,
                    start: seg.start_frame,
                    end: seg.end_frame,
                    frames: matrix.frames(),
                });
            }
            if seg.phone >= matrix.phones() {
                return Err(Error::dimension(
                    format!("phone index of segment {index}"),
                    matrix.phones(),
                    seg.phone,
                ));
            }
            let rows: Vec<&[f64]> = (seg.start_frame..seg.end_frame)
                .map(|t| matrix.row(t))
                .collect();
            Ok(PhoneTrial {
                true_phone: seg.phone,
                llk: method.pool(&rows)?,
                duration: rows.len(),
                stress: seg.stress,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_frames() -> Vec<Vec<f64>> {
        vec![vec![1.0, -1.0], vec![3.0, 1.0]]
    }

    fn random_frames(n: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dims).map(|_| rng.random_range(-20.0..5.0)).collect())
            .collect()
    }

    #[test]
    fn sum_examples() {
        assert_eq!(pool_sum(&two_frames()).unwrap().as_slice(), &[4.0, 0.0]);
        let single = vec![vec![0.5, -2.0, 3.0]];
        assert_eq!(pool_sum(&single).unwrap().as_slice(), single[0].as_slice());
    }

    #[test]
    fn sum_matches_left_fold() {
        let frames = random_frames(7, 4, 3);
        let fold = frames.iter().skip(1).fold(frames[0].clone(), |mut acc, f| {
            for (a, v) in acc.iter_mut().zip(f) {
                *a += v;
            }
            acc
        });
        assert_eq!(pool_sum(&frames).unwrap().as_slice(), fold.as_slice());
    }

    #[test]
    fn mean_examples() {
        assert_eq!(pool_mean(&two_frames()).unwrap().as_slice(), &[2.0, 0.0]);
        let v = vec![0.3, -1.7, 2.2];
        let same = vec![v.clone(); 9];
        for (a, b) in pool_mean(&same).unwrap().as_slice().iter().zip(&v) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
        let frames = random_frames(7, 4, 5);
        let mut oracle = vec![0.0; 4];
        for f in &frames {
            for (o, v) in oracle.iter_mut().zip(f) {
                *o += v;
            }
        }
        for (a, o) in pool_mean(&frames).unwrap().as_slice().iter().zip(oracle) {
            assert_abs_diff_eq!(*a, o / 7.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn logdur_examples() {
        let out = pool_logdur_mean(&two_frames()).unwrap();
        assert_abs_diff_eq!(out.as_slice()[0], 2f64.ln() * 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.as_slice()[0], 1.3863, epsilon = 1e-4);
        assert_eq!(out.as_slice()[1], 0.0);

        let single = vec![vec![4.0, -9.0]];
        assert_eq!(pool_logdur_mean(&single).unwrap().as_slice(), &[0.0, 0.0]);

        let v = vec![1.5, -0.5];
        let ten = vec![v.clone(); 10];
        let out = pool_logdur_mean(&ten).unwrap();
        for (a, b) in out.as_slice().iter().zip(&v) {
            assert_abs_diff_eq!(*a, 10f64.ln() * b, epsilon = 1e-14);
        }
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let empty: Vec<Vec<f64>> = vec![];
        for method in PoolingMethod::ALL {
            assert!(matches!(method.pool(&empty), Err(Error::EmptyPhone)));
        }
    }

    #[test]
    fn ragged_frames_are_rejected() {
        let frames = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(pool_sum(&frames), Err(Error::Dimension { .. })));
    }

    #[test]
    fn pool_segments_in_order_and_reports_bad_ranges() {
        let matrix = LogLikMatrix::new("u1", 3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let utts = HashMap::from([("u1".to_string(), matrix)]);
        let seg = |phone, start, end| PhoneSegment {
            utterance_id: "u1".into(),
            phone,
            start_frame: start,
            end_frame: end,
            stress: None,
        };
        let trials = pool(&[seg(1, 1, 3), seg(0, 0, 1)], &utts, PoolingMethod::Sum).unwrap();
        assert_eq!(trials[0].true_phone, 1);
        assert_eq!(trials[0].duration, 2);
        assert_eq!(trials[0].llk.as_slice(), &[6.0, 8.0]);
        assert_eq!(trials[1].llk.as_slice(), &[0.0, 1.0]);

        match pool(&[seg(0, 0, 1), seg(0, 2, 4)], &utts, PoolingMethod::Mean) {
            Err(Error::SegmentOutOfRange {
                utterance, index, ..
            }) => {
                assert_eq!(utterance, "u1");
                assert_eq!(index, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(pool(&[seg(0, 2, 2)], &utts, PoolingMethod::Mean).is_err());
        let mut missing = seg(0, 0, 1);
        missing.utterance_id = "u9".into();
        assert!(matches!(
            pool(&[missing], &utts, PoolingMethod::Mean),
            Err(Error::UnknownUtterance { .. })
        ));
    }

    #[test]
    fn stress_conversion() {
        assert_eq!(Stress::try_from(2u8).unwrap(), Stress::Secondary);
        assert!(Stress::try_from(3u8).is_err());
        assert_eq!(serde_json::to_string(&Stress::Primary).unwrap(), "1");
    }
}
