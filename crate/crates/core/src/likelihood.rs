//! Phone-set bookkeeping and the path from pdf-id posteriors to phone
//! log-likelihoods and back to phone posteriors.
//!
//! The pipeline for one frame is:
//!
//! 1. sum the pdf-id posteriors (and the pdf-id priors) of all pdf-ids that
//!    belong to the same base phone ([`reduce_pdf_posteriors`],
//!    [`reduce_pdf_priors`]);
//! 2. divide the phone posterior by the phone prior and take the natural log
//!    ([`frame_log_likelihoods`]); the additive constant is fixed to zero;
//! 3. for evaluation, turn a log-likelihood vector into posteriors under an
//!    evaluation prior with a max-shifted softmax ([`posterior_from_loglik`]).

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Posterior floor applied before the log in [`frame_log_likelihoods`].
pub const DEFAULT_FLOOR: f64 = 1e-10;

/// Row-sum slack accepted when loading posterior matrices.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

/// Sum-to-one slack for prior vectors.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-6;

/// Ordered list of phone labels; the order defines the class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl PhoneSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::PhoneSet(format!(
                "need at least 2 phones, got {}",
                labels.len()
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::PhoneSet(format!("label {i} is empty")));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::PhoneSet(format!("duplicate label '{label}'")));
            }
        }
        Ok(Self { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, phone: usize) -> &str {
        &self.labels[phone]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Maps every pdf-id (column of a posterior matrix) to its base phone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PdfMap {
    pdf_to_phone: Vec<usize>,
}

impl PdfMap {
    pub fn new(pdf_to_phone: Vec<usize>, phones: &PhoneSet) -> Result<Self> {
        if pdf_to_phone.is_empty() {
            return Err(Error::PhoneSet("pdf map is empty".into()));
        }
        if let Some((pdf, &phone)) = pdf_to_phone
            .iter()
            .enumerate()
            .find(|(_, &p)| p >= phones.len())
        {
            return Err(Error::PhoneSet(format!(
                "pdf {pdf} maps to phone index {phone}, but there are only {} phones",
                phones.len()
            )));
        }
        Ok(Self { pdf_to_phone })
    }

    /// Identity map, one pdf-id per phone.
    pub fn identity(phones: &PhoneSet) -> Self {
        Self {
            pdf_to_phone: (0..phones.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pdf_to_phone.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pdf_to_phone.is_empty()
    }

    pub fn phone_of(&self, pdf: usize) -> usize {
        self.pdf_to_phone[pdf]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.pdf_to_phone
    }
}

/// A strictly positive probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorVector(Vec<f64>);

impl PriorVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Probability("prior vector is empty".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Probability(format!(
                "prior {i} is {v}, must be strictly positive"
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(Error::Probability(format!("priors sum to {total}, not 1")));
        }
        Ok(Self(values))
    }

    /// The flat prior 1/n.
    pub fn flat(n: usize) -> Self {
        assert!(n > 0, "flat prior over zero classes");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn log_values(&self) -> Vec<f64> {
        self.0.iter().map(|p| p.ln()).collect()
    }
}

/// A vector of per-phone natural-log likelihoods, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikVector(Vec<f64>);

impl LogLikVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for LogLikVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-utterance T×D matrix of posteriors, row-major, each row summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePosteriorMatrix {
    utterance_id: String,
    frames: usize,
    dims: usize,
    values: Vec<f64>,
}

impl FramePosteriorMatrix {
    /// Validates entries in [0, 1] and row sums within [`ROW_SUM_TOLERANCE`],
    /// then renormalizes every row.
    pub fn new(
        utterance_id: impl Into<String>,
        frames: usize,
        dims: usize,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        let utterance_id = utterance_id.into();
        if dims == 0 {
            return Err(Error::Probability(format!(
                "utterance '{utterance_id}' has zero columns"
            )));
        }
        if values.len() != frames * dims {
            return Err(Error::dimension(
                format!("posterior matrix '{utterance_id}'"),
                frames * dims,
                values.len(),
            ));
        }
        for (t, row) in values.chunks_mut(dims).enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Probability(format!(
                    "utterance '{utterance_id}' frame {t}: entry {v} outside [0, 1]"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Probability(format!(
                    "utterance '{utterance_id}' frame {t}: row sums to {total}"
                )));
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Self {
            utterance_id,
            frames,
            dims,
            values,
        })
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dims)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Per-utterance T×N matrix of frame log-likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikMatrix {
    utterance_id: String,
    frames: usize,
    phones: usize,
    values: Vec<f64>,
}

impl LogLikMatrix {
    pub fn new(
        utterance_id: impl Into<String>,
        frames: usize,
        phones: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let utterance_id = utterance_id.into();
        if values.len() != frames * phones {
            return Err(Error::dimension(
                format!("log-likelihood matrix '{utterance_id}'"),
                frames * phones,
                values.len(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            utterance_id,
            frames,
            phones,
            values,
        })
    }

    pub fn from_rows(utterance_id: impl Into<String>, rows: &[LogLikVector]) -> Result<Self> {
        let phones = rows.first().map_or(0, LogLikVector::len);
        let mut values = Vec::with_capacity(rows.len() * phones);
        for row in rows {
            if row.len() != phones {
                return Err(Error::dimension(
                    "frame log-likelihood row",
                    phones,
                    row.len(),
                ));
            }
            values.extend_from_slice(row.as_slice());
        }
        Self::new(utterance_id, rows.len(), phones, values)
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn phones(&self) -> usize {
        self.phones
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.phones..(t + 1) * self.phones]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Sums pdf-id posteriors into base-phone posteriors, frame by frame.
///
/// Columns are accumulated left to right, so the result is deterministic.
pub fn reduce_pdf_posteriors(
    frame: &FramePosteriorMatrix,
    map: &PdfMap,
    phones: &PhoneSet,
) -> Result<FramePosteriorMatrix> {
    if frame.dims() != map.len() {
        return Err(Error::dimension(
            format!("pdf map for utterance '{}'", frame.utterance_id()),
            frame.dims(),
            map.len(),
        ));
    }
    let n = phones.len();
    let mut values = vec![0.0; frame.frames() * n];
    for (row, out) in frame.rows().zip(values.chunks_mut(n)) {
        for (pdf, p) in row.iter().enumerate() {
            out[map.phone_of(pdf)] += p;
        }
    }
    Ok(FramePosteriorMatrix {
        utterance_id: frame.utterance_id.clone(),
        frames: frame.frames(),
        dims: n,
        values,
    })
}

/// Sums pdf-id priors into phone priors.
pub fn reduce_pdf_priors(
    pdf_priors: &PriorVector,
    map: &PdfMap,
    phones: &PhoneSet,
) -> Result<PriorVector> {
    if pdf_priors.len() != map.len() {
        return Err(Error::dimension("pdf priors", map.len(), pdf_priors.len()));
    }
    let mut out = vec![0.0; phones.len()];
    for (pdf, p) in pdf_priors.as_slice().iter().enumerate() {
        out[map.phone_of(pdf)] += p;
    }
    if let Some(f) = out
        .iter()
        .position(|&p| p.is_nan() || p <= f64::MIN_POSITIVE)
    {
        return Err(Error::ZeroMassPhone(phones.label(f).to_string()));
    }
    PriorVector::new(out)
}

/// `log(posterior / prior)` per phone, posteriors floored at `floor`.
pub fn frame_log_likelihoods(
    phone_posterior_row: &[f64],
    phone_priors: &PriorVector,
    floor: f64,
) -> Result<LogLikVector> {
    if phone_posterior_row.len() != phone_priors.len() {
        return Err(Error::dimension(
            "phone posterior row",
            phone_priors.len(),
            phone_posterior_row.len(),
        ));
    }
    if let Some(p) = phone_posterior_row.iter().find(|p| p.is_nan() || **p < 0.0) {
        return Err(Error::Probability(format!("negative posterior {p}")));
    }
    let values = phone_posterior_row
        .iter()
        .zip(phone_priors.as_slice())
        .map(|(&post, &prior)| (post.max(floor) / prior).ln())
        .collect();
    LogLikVector::new(values)
}

/// Frame log-likelihoods for every row of a phone-posterior matrix.
pub fn utterance_log_likelihoods(
    phone_posteriors: &FramePosteriorMatrix,
    phone_priors: &PriorVector,
    floor: f64,
) -> Result<LogLikMatrix> {
    let mut values = Vec::with_capacity(phone_posteriors.values().len());
    for row in phone_posteriors.rows() {
        values.extend(frame_log_likelihoods(row, phone_priors, floor)?.into_inner());
    }
    LogLikMatrix::new(
        phone_posteriors.utterance_id(),
        phone_posteriors.frames(),
        phone_posteriors.dims(),
        values,
    )
}

/// `ln Σ exp(x)`, shifted by the maximum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Posteriors `π_f e^{λ_f} / Σ_i π_i e^{λ_i}`.
pub fn posterior_from_loglik(llk: &LogLikVector, eval_prior: &PriorVector) -> Result<Vec<f64>> {
    if llk.len() != eval_prior.len() {
        return Err(Error::dimension(
            "evaluation prior",
            llk.len(),
            eval_prior.len(),
        ));
    }
    let logits: Vec<f64> = llk
        .as_slice()
        .iter()
        .zip(eval_prior.as_slice())
        .map(|(l, p)| l + p.ln())
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}
