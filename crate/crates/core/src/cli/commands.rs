use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::calib::{fit, FitOptions, TransformDocument};
use crate::error::{Error, Result};
use crate::io::{self, MatrixKind, RawMatrix};
use crate::likelihood::{
    log_sum_exp, reduce_pdf_posteriors, reduce_pdf_priors, utterance_log_likelihoods,
    FramePosteriorMatrix, LogLikMatrix, PdfMap, PhoneSet, PriorVector,
};
use crate::metrics::{confusion_matrix, h_mc, ConfusionMatrix, EvalReport, TargetFilter};
use crate::pooling::{self, PhoneSegment, PhoneTrial};
use crate::synth::{self, shuffle_labels, SynthConfig};
use crate::FitResult;

use super::{
    CalibrateArgs, CaveatArgs, ConfusionArgs, CrossCalArgs, EvalArgs, FitArgs, PoolArgs,
    ReduceArgs, RunManifest, SynthArgs,
};

const ARPABET_VOWELS: [&str; 15] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW",
];
const ARPABET_CONSONANTS: [&str; 24] = [
    "B", "CH", "D", "DH", "F", "G", "HH", "JH", "K", "L", "M", "N", "NG", "P", "R", "S", "SH", "T",
    "TH", "V", "W", "Y", "Z", "ZH",
];

impl From<&FitArgs> for FitOptions {
    fn from(a: &FitArgs) -> Self {
        FitOptions {
            max_iter: a.max_iter,
            tol: a.tol,
            ridge: a.ridge,
            ..FitOptions::default()
        }
    }
}

fn eval_prior(
    path: Option<&Path>,
    phones: &PhoneSet,
    manifest: &mut RunManifest,
) -> Result<PriorVector> {
    match path {
        None => Ok(PriorVector::flat(phones.len())),
        Some(p) => {
            manifest.input(p)?;
            let prior = io::read_priors(p)?;
            if prior.len() != phones.len() {
                return Err(Error::format(
                    p,
                    "end",
                    format!("{} priors for {} phones", prior.len(), phones.len()),
                ));
            }
            Ok(prior)
        }
    }
}

fn load_phones(path: &Path, manifest: &mut RunManifest) -> Result<PhoneSet> {
    manifest.input(path)?;
    io::read_phone_set(path)
}

fn load_trials(
    path: &Path,
    phones: &PhoneSet,
    manifest: &mut RunManifest,
) -> Result<Vec<PhoneTrial>> {
    manifest.input(path)?;
    let trials = io::read_trials_file(path, phones)?;
    if trials.is_empty() {
        return Err(Error::NoTrials);
    }
    Ok(trials)
}

fn warn_fit(label: &str, r: &FitResult) {
    if !r.converged {
        eprintln!(
            "warning: {label}: fit stopped after {} iterations with gradient max-norm {:.3e}",
            r.iterations, r.gradient_max_norm
        );
    }
    if r.alpha_nonpositive {
        eprintln!(
            "warning: {label}: fitted scale alpha = {} is not positive",
            r.transform.alpha
        );
    }
}

#[derive(Debug, Serialize)]
pub struct ReduceReport {
    pub utterances: usize,
    pub frames: usize,
    pub phone_priors: Vec<f64>,
    pub manifest: RunManifest,
}

pub fn reduce(args: &ReduceArgs) -> Result<ReduceReport> {
    let mut manifest = RunManifest::start("reduce", args, None)?;
    let phones = load_phones(&args.phones, &mut manifest)?;
    manifest.input(&args.pdf_map)?;
    manifest.input(&args.pdf_priors)?;
    manifest.input(&args.posteriors)?;
    let map = io::read_pdf_map(&args.pdf_map, &phones)?;
    let pdf_priors = io::read_priors(&args.pdf_priors)?;
    let phone_priors = reduce_pdf_priors(&pdf_priors, &map, &phones)?;
    let files = io::list_matrix_files(&args.posteriors, MatrixKind::Posteriors)?;
    fs::create_dir_all(&args.out)?;

    let frames: Vec<usize> = files
        .par_iter()
        .map(|(utt, path)| {
            let posteriors = io::read_matrix_file(path, MatrixKind::Posteriors)?
                .into_posteriors(utt)
                .map_err(|e| Error::format(path, "data", e.to_string()))?;
            let reduced = reduce_pdf_posteriors(&posteriors, &map, &phones)
                .map_err(|e| Error::format(path, "header", e.to_string()))?;
            let llk = utterance_log_likelihoods(&reduced, &phone_priors, args.floor)?;
            let out = args
                .out
                .join(format!("{utt}.{}", MatrixKind::LogLikelihoods.extension()));
            io::write_matrix_file(&out, &RawMatrix::from_log_likelihoods(&llk))?;
            Ok(llk.frames())
        })
        .collect::<Result<_>>()?;

    Ok(ReduceReport {
        utterances: files.len(),
        frames: frames.iter().sum(),
        phone_priors: phone_priors.as_slice().to_vec(),
        manifest: manifest.finish(),
    })
}

#[derive(Debug, Serialize)]
pub struct PoolReport {
    pub trials: usize,
    pub method: pooling::PoolingMethod,
    pub manifest: RunManifest,
}

pub fn pool(args: &PoolArgs) -> Result<PoolReport> {
    let mut manifest = RunManifest::start("pool", args, None)?;
    let phones = load_phones(&args.phones, &mut manifest)?;
    manifest.input(&args.alignment)?;
    manifest.input(&args.llk)?;
    let segments = io::read_alignment(&args.alignment, &phones)?;
    let wanted: HashSet<&str> = segments.iter().map(|s| s.utterance_id.as_str()).collect();

    let files = io::list_matrix_files(&args.llk, MatrixKind::LogLikelihoods)?;
    let utterances: HashMap<String, LogLikMatrix> = files
        .par_iter()
        .filter(|(utt, _)| wanted.contains(utt.as_str()))
        .map(|(utt, path)| {
            let m = io::read_matrix_file(path, MatrixKind::LogLikelihoods)?;
            if m.cols != phones.len() {
                return Err(Error::format(
                    path,
                    "offset 8",
                    format!("{} columns for {} phones", m.cols, phones.len()),
                ));
            }
            let m = m
                .into_log_likelihoods(utt)
                .map_err(|e| Error::format(path, "data", e.to_string()))?;
            Ok((utt.clone(), m))
        })
        .collect::<Result<_>>()?;

    let trials = pooling::pool(&segments, &utterances, args.method)?;
    io::write_trials_file(&args.out, &trials, &phones)?;
    Ok(PoolReport {
        trials: trials.len(),
        method: args.method,
        manifest: manifest.finish(),
    })
}

#[derive(Debug, Serialize)]
pub struct EvalOutput {
    #[serde(flatten)]
    pub report: EvalReport,
    pub phones: Vec<String>,
    pub calibrated: bool,
    pub manifest: RunManifest,
}

pub fn eval(args: &EvalArgs) -> Result<EvalOutput> {
    let mut manifest = RunManifest::start("eval", args, None)?;
    let phones = load_phones(&args.phones, &mut manifest)?;
    let trials = load_trials(&args.trials, &phones, &mut manifest)?;
    let prior = eval_prior(args.prior.as_deref(), &phones, &mut manifest)?;
    let transform = match &args.transform {
        Some(p) => {
            manifest.input(p)?;
            let doc: TransformDocument = serde_json::from_str(&fs::read_to_string(p)?)
                .map_err(|e| Error::format(p, format!("line {}", e.line()), e.to_string()))?;
            Some(doc.into_transform(&phones)?)
        }
        None => None,
    };
    let report = h_mc(&trials, &prior, transform.as_ref())?;
    Ok(EvalOutput {
        report,
        phones: phones.labels().to_vec(),
        calibrated: transform.is_some(),
        manifest: manifest.finish(),
    })
}

#[derive(Debug, Serialize)]
pub struct CalibrateReport {
    #[serde(flatten)]
    pub fit: FitResult,
    pub phones: Vec<String>,
    pub manifest: RunManifest,
}

pub fn calibrate(args: &CalibrateArgs) -> Result<CalibrateReport> {
    let mut manifest = RunManifest::start("calibrate", args, None)?;
    let phones = load_phones(&args.phones, &mut manifest)?;
    let trials = load_trials(&args.trials, &phones, &mut manifest)?;
    let prior = eval_prior(args.prior.as_deref(), &phones, &mut manifest)?;
    let result = fit(&trials, &prior, &FitOptions::from(&args.fit))?;
    warn_fit("calibrate", &result);
    let doc = result.transform.to_document(&phones);
    fs::write(
        &args.transform_out,
        serde_json::to_string_pretty(&doc)? + "\n",
    )?;
    Ok(CalibrateReport {
        fit: result,
        phones: phones.labels().to_vec(),
        manifest: manifest.finish(),
    })
}

/// One test set's row of a cross-calibration table.
#[derive(Debug, Serialize)]
pub struct CrossCalSide {
    /// Uncalibrated.
    pub h_mc: f64,
    /// Self-calibrated on this set.
    pub h_mc_min: f64,
    /// Calibrated with the transform fitted on the other set.
    pub h_mc_cal: f64,
    pub alpha_self: f64,
    pub alpha_other: f64,
}

#[derive(Debug, Serialize)]
pub struct CrossCalReport {
    pub a: CrossCalSide,
    pub b: CrossCalSide,
    pub manifest: RunManifest,
}

pub fn crosscal(args: &CrossCalArgs) -> Result<CrossCalReport> {
    let mut manifest = RunManifest::start("crosscal", args, None)?;
    let phones = load_phones(&args.phones, &mut manifest)?;
    let a = load_trials(&args.trials_a, &phones, &mut manifest)?;
    let b = load_trials(&args.trials_b, &phones, &mut manifest)?;
    let prior = eval_prior(args.prior.as_deref(), &phones, &mut manifest)?;
    let options = FitOptions::from(&args.fit);
    let fit_a = fit(&a, &prior, &options)?;
    let fit_b = fit(&b, &prior, &options)?;
    warn_fit("set A", &fit_a);
    warn_fit("set B", &fit_b);
    let side =
        |trials: &[PhoneTrial], own: &FitResult, other: &FitResult| -> Result<CrossCalSide> {
            Ok(CrossCalSide {
                h_mc: own.h_mc_before,
                h_mc_min: own.h_mc_after,
                h_mc_cal: h_mc(trials, &prior, Some(&other.transform))?.h_mc,
                alpha_self: own.transform.alpha,
                alpha_other: other.transform.alpha,
            })
        };
    Ok(CrossCalReport {
        a: side(&a, &fit_a, &fit_b)?,
        b: side(&b, &fit_b, &fit_a)?,
        manifest: manifest.finish(),
    })
}

fn arpabet_base(label: &str) -> String {
    label
        .trim_end_matches(|c: char| c.is_ascii_digit())
        .to_ascii_uppercase()
}

/// Resolves `all`, `vowels`, `consonants` or a label-list file to phone indices.
fn resolve_subset(
    subset: &str,
    phones: &PhoneSet,
    manifest: &mut RunManifest,
) -> Result<Vec<usize>> {
    let by_class = |class: &[&str]| -> Vec<usize> {
        (0..phones.len())
            .filter(|&i| class.contains(&arpabet_base(phones.label(i)).as_str()))
            .collect()
    };
    match subset {
        "all" => Ok((0..phones.len()).collect()),
        "vowels" => Ok(by_class(&ARPABET_VOWELS)),
        "consonants" => Ok(by_class(&ARPABET_CONSONANTS)),
        path => {
            let path = Path::new(path);
            manifest.input(path)?;
            io::read_label_list(path, phones)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ConfusionReport {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub matrix: ConfusionMatrix,
    pub manifest: RunManifest,
}

pub fn confusion(args: &ConfusionArgs) -> Result<ConfusionReport> {
    let mut manifest = RunManifest::start("confusion", args, None)?;
    let phones = load_phones(&args.phones, &mut manifest)?;
    let trials = load_trials(&args.trials, &phones, &mut manifest)?;
    let subset = resolve_subset(&args.subset, &phones, &mut manifest)?;
    if subset.len() < 2 {
        return Err(Error::PhoneSet(format!(
            "subset '{}' selects {} phones, need at least 2",
            args.subset,
            subset.len()
        )));
    }
    let filter = TargetFilter {
        phones: subset,
        stress_split: args.stress_split,
    };
    let matrix = confusion_matrix(&trials, &phones, &filter);
    io::write_confusion_csv(
        &matrix,
        &phones,
        BufWriter::new(fs::File::create(&args.csv)?),
    )?;
    io::write_confusion_pgm(&matrix, BufWriter::new(fs::File::create(&args.pgm)?))?;
    Ok(ConfusionReport {
        rows: matrix.targets.iter().map(|r| r.label(&phones)).collect(),
        columns: matrix
            .hypotheses
            .iter()
            .map(|&h| phones.label(h).to_string())
            .collect(),
        matrix,
        manifest: manifest.finish(),
    })
}

#[derive(Debug, Serialize)]
pub struct SynthReport {
    pub utterances: usize,
    pub trials: usize,
    pub frames: usize,
    pub manifest: RunManifest,
}

/// Writes a synthetic corpus laid out for the rest of the pipeline:
/// `phones.txt`, `pdf_map.txt` (identity), `pdf_priors.txt` (flat),
/// `posteriors/*.fpm`, `llk/*.fll`, `alignment.csv` and `config.json`.
pub fn synth(args: &SynthArgs) -> Result<SynthReport> {
    let mut manifest = RunManifest::start("synth", args, None)?;
    manifest.input(&args.config)?;
    let mut config: SynthConfig = serde_json::from_str(&fs::read_to_string(&args.config)?)
        .map_err(|e| Error::format(&args.config, format!("line {}", e.line()), e.to_string()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    manifest.seed = Some(config.seed);
    if args.trials_per_utterance == 0 {
        return Err(Error::Config("trials per utterance must be ≥ 1".into()));
    }
    let corpus = synth::generate(&config)?;
    let phones = &corpus.phones;
    let n = phones.len();

    let out = &args.out;
    fs::create_dir_all(out.join("posteriors"))?;
    fs::create_dir_all(out.join("llk"))?;
    io::write_phone_set(&out.join("phones.txt"), phones)?;
    io::write_pdf_map(&out.join("pdf_map.txt"), &PdfMap::identity(phones), phones)?;
    io::write_priors(&out.join("pdf_priors.txt"), &PriorVector::flat(n))?;
    fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&config)? + "\n",
    )?;

    let mut segments = Vec::with_capacity(corpus.trials.len());
    let mut frames_total = 0;
    let chunks: Vec<_> = corpus.trials.chunks(args.trials_per_utterance).collect();
    for (u, chunk) in chunks.iter().enumerate() {
        let utt = format!("synth_{u:05}");
        let rows: Vec<_> = chunk
            .iter()
            .flat_map(|t| t.frames.iter().cloned())
            .collect();
        let mut start = 0;
        for t in chunk.iter() {
            segments.push(PhoneSegment {
                utterance_id: utt.clone(),
                phone: t.true_phone,
                start_frame: start,
                end_frame: start + t.frames.len(),
                stress: None,
            });
            start += t.frames.len();
        }
        frames_total += rows.len();

        let llk = LogLikMatrix::from_rows(&utt, &rows)?;
        io::write_matrix_file(
            &out.join("llk").join(format!("{utt}.fll")),
            &RawMatrix::from_log_likelihoods(&llk),
        )?;
        // flat class prior: posterior = softmax(λ)
        let mut post = Vec::with_capacity(rows.len() * n);
        for row in &rows {
            let lse = log_sum_exp(row.as_slice());
            post.extend(row.as_slice().iter().map(|l| (l - lse).exp()));
        }
        let post = FramePosteriorMatrix::new(&utt, rows.len(), n, post)?;
        io::write_matrix_file(
            &out.join("posteriors").join(format!("{utt}.fpm")),
            &RawMatrix::from_posteriors(&post),
        )?;
    }
    io::write_alignment(&out.join("alignment.csv"), &segments, phones)?;

    Ok(SynthReport {
        utterances: chunks.len(),
        trials: corpus.trials.len(),
        frames: frames_total,
        manifest: manifest.finish(),
    })
}

#[derive(Debug, Serialize)]
pub struct CaveatReport {
    pub h_mc: f64,
    pub h_mc_shuffled: f64,
    pub h_mc_shuffled_selfcal: f64,
    #[serde(rename = "ln_N")]
    pub ln_n: f64,
    pub converged: bool,
    pub manifest: RunManifest,
}

pub fn caveat(args: &CaveatArgs) -> Result<CaveatReport> {
    let mut manifest = RunManifest::start("caveat", args, Some(args.seed))?;
    let phones = load_phones(&args.phones, &mut manifest)?;
    let trials = load_trials(&args.trials, &phones, &mut manifest)?;
    let prior = eval_prior(args.prior.as_deref(), &phones, &mut manifest)?;
    if trials.len() < 2 {
        return Err(Error::Config(
            "label shuffling needs at least 2 trials".into(),
        ));
    }
    let shuffled = shuffle_labels(&trials, args.seed);
    let result = fit(&shuffled, &prior, &FitOptions::from(&args.fit))?;
    warn_fit("caveat", &result);
    Ok(CaveatReport {
        h_mc: h_mc(&trials, &prior, None)?.h_mc,
        h_mc_shuffled: result.h_mc_before,
        h_mc_shuffled_selfcal: result.h_mc_after,
        ln_n: (phones.len() as f64).ln(),
        converged: result.converged,
        manifest: manifest.finish(),
    })
}
