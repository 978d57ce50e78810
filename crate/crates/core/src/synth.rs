//! Synthetic corpora with known calibration.
//!
//! Every class is an isotropic Gaussian in a small feature space. Frame
//! log-likelihoods are exact Gaussian log-densities, so a single frame is
//! perfectly calibrated under a flat prior. Within a phone the frames share a
//! latent draw `z`:
//!
//! ```text
//! x_t = μ_f + σ·(√ρ·z + √(1-ρ)·ε_t),   z, ε_t ~ N(0, I)
//! ```
//!
//! `ρ = 0` gives independent frames (the sum of frame log-likelihoods is the
//! exact phone log-likelihood), `ρ = 1` gives identical frames (one frame
//! already carries all the evidence). The marginal distribution of a frame
//! does not depend on `ρ`.
//!
//! Trial `k` draws from its own ChaCha stream `(seed, k)`, so the corpus is
//! identical however generation is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{LogLikVector, PhoneSet};
use crate::pooling::{PhoneTrial, PoolingMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationLaw {
    Fixed(usize),
    /// Inclusive on both ends.
    Uniform {
        min: usize,
        max: usize,
    },
    /// `1 + Geometric(p)` failures, so the minimum duration is one frame.
    Geometric {
        p: f64,
    },
}

impl DurationLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            DurationLaw::Fixed(0) => Err(Error::Config("fixed duration must be ≥ 1".into())),
            DurationLaw::Uniform { min, max } if min == 0 || max < min => Err(Error::Config(
                format!("uniform duration needs 1 ≤ min ≤ max, got {min}..={max}"),
            )),
            DurationLaw::Geometric { p } if !(p > 0.0 && p <= 1.0) => Err(Error::Config(format!(
                "geometric p must be in (0, 1], got {p}"
            ))),
            _ => Ok(()),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        match *self {
            DurationLaw::Fixed(n) => n,
            DurationLaw::Uniform { min, max } => rng.random_range(min..=max),
            DurationLaw::Geometric { p } => {
                let failures = Geometric::new(p).expect("validated").sample(rng);
                1 + failures as usize
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_phones: usize,
    /// One point per class, all of the same dimension.
    pub class_means: Vec<Vec<f64>>,
    pub sigma: f64,
    /// Within-phone frame correlation in [0, 1].
    pub rho: f64,
    pub duration_law: DurationLaw,
    pub n_trials_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Ten classes on a circle of radius 2 in the plane, σ = 1.
    fn default() -> Self {
        Self::circle(10, 2.0, 1.0)
    }
}

impl SynthConfig {
    /// `n_phones` class means evenly spaced on a circle in two dimensions.
    pub fn circle(n_phones: usize, radius: f64, sigma: f64) -> Self {
        let class_means = (0..n_phones)
            .map(|f| {
                let angle = 2.0 * std::f64::consts::PI * f as f64 / n_phones as f64;
                vec![radius * angle.cos(), radius * angle.sin()]
            })
            .collect();
        Self {
            n_phones,
            class_means,
            sigma,
            rho: 1.0,
            duration_law: DurationLaw::Fixed(8),
            n_trials_per_class: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_phones < 2 {
            return Err(Error::Config(format!(
                "need ≥ 2 phones, got {}",
                self.n_phones
            )));
        }
        if self.class_means.len() != self.n_phones {
            return Err(Error::Config(format!(
                "{} class means for {} phones",
                self.class_means.len(),
                self.n_phones
            )));
        }
        let dim = self.class_means[0].len();
        if dim == 0 || self.class_means.iter().any(|m| m.len() != dim) {
            return Err(Error::Config(
                "class means must share a nonzero dimension".into(),
            ));
        }
        if self.class_means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("class means must be finite".into()));
        }
        for (i, a) in self.class_means.iter().enumerate() {
            if self.class_means[..i].contains(a) {
                return Err(Error::Config(format!(
                    "class mean {i} duplicates an earlier one"
                )));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!(
                "rho must be in [0, 1], got {}",
                self.rho
            )));
        }
        if self.n_trials_per_class == 0 {
            return Err(Error::Config("n_trials_per_class must be ≥ 1".into()));
        }
        self.duration_law.validate()
    }

    pub fn feature_dim(&self) -> usize {
        self.class_means.first().map_or(0, Vec::len)
    }

    /// Labels `ph00`, `ph01`, … for the synthetic classes.
    pub fn phone_set(&self) -> Result<PhoneSet> {
        let width = self.n_phones.saturating_sub(1).to_string().len().max(2);
        PhoneSet::new((0..self.n_phones).map(|f| format!("ph{f:0width$}")))
    }
}

/// One synthetic phone token with its per-frame log-likelihood vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrial {
    pub true_phone: usize,
    pub frames: Vec<LogLikVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub phones: PhoneSet,
    /// Class-major order: all trials of class 0, then class 1, …
    pub trials: Vec<SynthTrial>,
}

impl SynthCorpus {
    pub fn pool(&self, method: PoolingMethod) -> Result<Vec<PhoneTrial>> {
        self.trials
            .iter()
            .map(|t| {
                Ok(PhoneTrial {
                    true_phone: t.true_phone,
                    llk: method.pool(&t.frames)?,
                    duration: t.frames.len(),
                    stress: None,
                })
            })
            .collect()
    }
}

fn gaussian_log_density(x: &[f64], mean: &[f64], sigma: f64) -> f64 {
    let k = x.len() as f64;
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * sq / (sigma * sigma) - 0.5 * k * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
}

fn generate_trial(config: &SynthConfig, index: usize, true_phone: usize) -> SynthTrial {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let dim = config.feature_dim();
    let n = config.duration_law.sample(&mut rng);
    let shared = config.rho.sqrt();
    let own = (1.0 - config.rho).sqrt();
    let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let mean = &config.class_means[true_phone];
    let frames = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim)
                .map(|d| {
                    let eps: f64 = rng.sample(StandardNormal);
                    mean[d] + config.sigma * (shared * z[d] + own * eps)
                })
                .collect();
            let llk = config
                .class_means
                .iter()
                .map(|m| gaussian_log_density(&x, m, config.sigma))
                .collect();
            LogLikVector::new(llk).expect("finite Gaussian log-density")
        })
        .collect();
    SynthTrial { true_phone, frames }
}

/// Draws `n_trials_per_class` trials for every class.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let per_class = config.n_trials_per_class;
    let trials = (0..config.n_phones * per_class)
        .into_par_iter()
        .map(|k| generate_trial(config, k, k / per_class))
        .collect();
    Ok(SynthCorpus {
        phones: config.phone_set()?,
        trials,
    })
}

/// Permutes the true labels of `trials` with a random cyclic permutation of
/// positions (Sattolo), so no trial keeps its own label slot. A trial can
/// still end up with its original class when the donor shares it.
pub fn shuffle_labels(trials: &[PhoneTrial], seed: u64) -> Vec<PhoneTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..trials.len()).collect();
    for i in (1..perm.len()).rev() {
        let j = rng.random_range(0..i);
        perm.swap(i, j);
    }
    permute_labels(trials, &perm)
}

/// Trial `k` receives the label of trial `perm[k]`; frames are untouched.
pub fn permute_labels(trials: &[PhoneTrial], perm: &[usize]) -> Vec<PhoneTrial> {
    assert_eq!(trials.len(), perm.len(), "permutation length");
    trials
        .iter()
        .zip(perm)
        .map(|(t, &src)| PhoneTrial {
            true_phone: trials[src].true_phone,
            stress: trials[src].stress,
            ..t.clone()
        })
        .collect()
}
