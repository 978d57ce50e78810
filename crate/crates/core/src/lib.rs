//! Phone-level calibration analysis for frame-posterior acoustic models.
//!
//! The crate turns per-frame classifier posteriors over shared pdf-ids into
//! phone log-likelihood vectors, pools them over aligned phone segments,
//! scores them with class-balanced multiclass cross entropy, fits affine
//! calibration transforms, and builds pairwise-EER confusion matrices. A
//! Gaussian synthetic generator supplies corpora whose calibration is known
//! in closed form.
//!
//! | module         | what it holds                                             |
//! |----------------|-----------------------------------------------------------|
//! | [`likelihood`] | phone sets, pdf→phone reduction, frame log-likelihoods     |
//! | [`pooling`]    | sum / mean / log-duration-mean pooling of frame vectors     |
//! | [`metrics`]    | cross entropy (`h_mc`), EER, confusion matrices             |
//! | [`calib`]      | the `α·λ + β` transform and its convex fit                  |
//! | [`synth`]      | seeded synthetic corpora and label shuffling                |
//! | [`io`]         | binary/CSV matrices, alignments, trials, heatmaps           |
//! | [`cli`]        | the `phonecal` command-line pipeline                        |
//!
//! ```
//! use phonecal::synth::DurationLaw;
//! use phonecal::{fit, generate, FitOptions, PoolingMethod, PriorVector, SynthConfig};
//!
//! // eight fully correlated frames per token, summed: eight times overconfident
//! let config = SynthConfig {
//!     duration_law: DurationLaw::Fixed(8),
//!     n_trials_per_class: 100,
//!     ..SynthConfig::circle(4, 2.0, 1.0)
//! };
//! let trials = generate(&config)?.pool(PoolingMethod::Sum)?;
//! let r = fit(&trials, &PriorVector::flat(4), &FitOptions::default())?;
//! assert!(r.h_mc_after < r.h_mc_before);
//! assert!((r.transform.alpha - 0.125).abs() < 0.05);
//! # Ok::<(), phonecal::Error>(())
//! ```
//!
//! Runnable walkthroughs live under `examples/`, one per capability.

pub mod calib;
pub mod cli;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod metrics;
pub mod pooling;
pub mod synth;

pub use calib::{fit, CalibrationTransform, FitOptions, FitResult};
pub use error::{Error, Result};
pub use likelihood::{LogLikVector, PdfMap, PhoneSet, PriorVector};
pub use metrics::{h_mc, EvalReport};
pub use pooling::{PhoneTrial, PoolingMethod};
pub use synth::{generate, SynthConfig};
