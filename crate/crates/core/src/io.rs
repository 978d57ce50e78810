//! On-disk formats.
//!
//! * Frame matrices: `FPM1` (posteriors) or `FLL1` (log-likelihoods) magic,
//!   then `u32` rows and columns, then row-major `f32` values, all little
//!   endian. Files ending in `.csv` hold the same values as comma-separated
//!   text rows and are limited to 1 MB.
//! * Phone set: one label per line, order defines indices.
//! * pdf map: `pdf_id<TAB>phone_label` per line.
//! * Priors: one decimal per line.
//! * Alignment: CSV with header `utt,phone,start,end,stress`, `end` exclusive,
//!   `stress` may be blank.
//! * Trials: JSON lines `{"phone", "n", "stress", "llk"}`.
//! * Heatmaps: binary PGM (`P5`), one byte per cell.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{
    FramePosteriorMatrix, LogLikMatrix, LogLikVector, PdfMap, PhoneSet, PriorVector,
};
use crate::metrics::ConfusionMatrix;
use crate::pooling::{PhoneSegment, PhoneTrial, Stress};

/// Largest CSV matrix file accepted.
pub const CSV_MATRIX_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Posteriors,
    LogLikelihoods,
}

impl MatrixKind {
    pub fn magic(self) -> &'static [u8; 4] {
        match self {
            MatrixKind::Posteriors => b"FPM1",
            MatrixKind::LogLikelihoods => b"FLL1",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MatrixKind::Posteriors => "fpm",
            MatrixKind::LogLikelihoods => "fll",
        }
    }

    fn from_magic(magic: &[u8]) -> Option<Self> {
        match magic {
            b"FPM1" => Some(MatrixKind::Posteriors),
            b"FLL1" => Some(MatrixKind::LogLikelihoods),
            _ => None,
        }
    }
}

/// A frame matrix exactly as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub kind: MatrixKind,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl RawMatrix {
    pub fn from_log_likelihoods(m: &LogLikMatrix) -> Self {
        Self {
            kind: MatrixKind::LogLikelihoods,
            rows: m.frames(),
            cols: m.phones(),
            data: m.values().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_posteriors(m: &FramePosteriorMatrix) -> Self {
        Self {
            kind: MatrixKind::Posteriors,
            rows: m.frames(),
            cols: m.dims(),
            data: m.values().iter().map(|&v| v as f32).collect(),
        }
    }

    fn widened(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn into_posteriors(self, utterance_id: &str) -> Result<FramePosteriorMatrix> {
        FramePosteriorMatrix::new(utterance_id, self.rows, self.cols, self.widened())
    }

    pub fn into_log_likelihoods(self, utterance_id: &str) -> Result<LogLikMatrix> {
        LogLikMatrix::new(utterance_id, self.rows, self.cols, self.widened())
    }
}

pub fn write_binary_matrix<W: Write>(m: &RawMatrix, mut out: W) -> Result<()> {
    assert_eq!(m.data.len(), m.rows * m.cols, "matrix shape");
    let dim = |v: usize| {
        u32::try_from(v)
            .map_err(|_| Error::Io(std::io::Error::other("matrix dimension exceeds u32")))
    };
    out.write_all(m.kind.magic())?;
    out.write_all(&dim(m.rows)?.to_le_bytes())?;
    out.write_all(&dim(m.cols)?.to_le_bytes())?;
    for v in &m.data {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a binary matrix; `path` only labels errors.
pub fn read_binary_matrix<R: Read>(mut input: R, path: &Path) -> Result<RawMatrix> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 12 {
        return Err(Error::format(path, "offset 0", "truncated header"));
    }
    let kind = MatrixKind::from_magic(&bytes[..4])
        .ok_or_else(|| Error::format(path, "offset 0", "bad magic, expected FPM1 or FLL1"))?;
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::format(path, "offset 4", "matrix size overflows"))?;
    let body = &bytes[12..];
    if body.len() != expected {
        return Err(Error::format(
            path,
            format!("offset {}", 12 + body.len().min(expected)),
            format!(
                "expected {expected} bytes of {rows}x{cols} f32 data, found {}",
                body.len()
            ),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawMatrix {
        kind,
        rows,
        cols,
        data,
    })
}

pub fn write_csv_matrix<W: Write>(m: &RawMatrix, mut out: W) -> Result<()> {
    for row in m.data.chunks(m.cols.max(1)) {
        let line: Vec<String> = row.iter().map(f32::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv_matrix(text: &str, kind: MatrixKind, path: &Path) -> Result<RawMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let loc = format!("line {}", lineno + 1);
        let before = data.len();
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| {
                Error::format(path, loc.clone(), format!("not a number: '{field}'"))
            })?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::format(
                    path,
                    loc,
                    format!("expected {c} columns, found {width}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    Ok(RawMatrix {
        kind,
        rows,
        cols: cols.unwrap_or(0),
        data,
    })
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a binary or (by `.csv` extension) text matrix of the expected kind.
pub fn read_matrix_file(path: &Path, kind: MatrixKind) -> Result<RawMatrix> {
    if is_csv(path) {
        let size = fs::metadata(path)?.len();
        if size >= CSV_MATRIX_LIMIT {
            return Err(Error::format(
                path,
                "offset 0",
                format!("CSV matrices must be under 1 MB, file has {size} bytes"),
            ));
        }
        return read_csv_matrix(&fs::read_to_string(path)?, kind, path);
    }
    let m = read_binary_matrix(BufReader::new(fs::File::open(path)?), path)?;
    if m.kind != kind {
        return Err(Error::format(
            path,
            "offset 0",
            format!("expected {} magic", String::from_utf8_lossy(kind.magic())),
        ));
    }
    Ok(m)
}

pub fn write_matrix_file(path: &Path, m: &RawMatrix) -> Result<()> {
    let out = BufWriter::new(fs::File::create(path)?);
    if is_csv(path) {
        write_csv_matrix(m, out)
    } else {
        write_binary_matrix(m, out)
    }
}

/// Matrix files in `dir` (`.fpm`/`.fll`/`.csv`), sorted by file name; the
/// utterance id is the file stem.
pub fn list_matrix_files(
    dir: &Path,
    kind: MatrixKind,
) -> Result<Vec<(String, std::path::PathBuf)>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let ext_ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e == kind.extension() || e.eq_ignore_ascii_case("csv"));
        if path.is_file() && ext_ok {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::format(&path, "name", "file name is not UTF-8"))?
                .to_string();
            files.push((stem, path));
        }
    }
    files.sort();
    Ok(files)
}

fn text_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            out.push((i + 1, trimmed.to_string()));
        }
    }
    Ok(out)
}

pub fn read_phone_set(path: &Path) -> Result<PhoneSet> {
    let labels: Vec<String> = text_lines(path)?.into_iter().map(|(_, l)| l).collect();
    PhoneSet::new(labels).map_err(|e| Error::format(path, "line 1", e.to_string()))
}

pub fn write_phone_set(path: &Path, phones: &PhoneSet) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for label in phones.labels() {
        writeln!(out, "{label}")?;
    }
    out.flush()?;
    Ok(())
}

/// Label list such as a vowel subset; labels must exist in `phones`.
pub fn read_label_list(path: &Path, phones: &PhoneSet) -> Result<Vec<usize>> {
    text_lines(path)?
        .into_iter()
        .map(|(line, label)| {
            phones.index_of(&label).ok_or_else(|| {
                Error::format(
                    path,
                    format!("line {line}"),
                    format!("unknown phone '{label}'"),
                )
            })
        })
        .collect()
}

pub fn read_pdf_map(path: &Path, phones: &PhoneSet) -> Result<PdfMap> {
    let mut entries: Vec<Option<usize>> = Vec::new();
    for (line, text) in text_lines(path)? {
        let loc = format!("line {line}");
        let (id, label) = text
            .split_once('\t')
            .ok_or_else(|| Error::format(path, loc.clone(), "expected pdf_id<TAB>phone_label"))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| Error::format(path, loc.clone(), format!("bad pdf id '{id}'")))?;
        let phone = phones
            .index_of(label.trim())
            .ok_or_else(|| Error::format(path, loc.clone(), format!("unknown phone '{label}'")))?;
        if id >= entries.len() {
            entries.resize(id + 1, None);
        }
        if entries[id].replace(phone).is_some() {
            return Err(Error::format(
                path,
                loc,
                format!("pdf id {id} listed twice"),
            ));
        }
    }
    let map = entries
        .into_iter()
        .enumerate()
        .map(|(id, p)| p.ok_or_else(|| Error::format(path, "end", format!("pdf id {id} missing"))))
        .collect::<Result<Vec<_>>>()?;
    PdfMap::new(map, phones).map_err(|e| Error::format(path, "end", e.to_string()))
}

pub fn write_pdf_map(path: &Path, map: &PdfMap, phones: &PhoneSet) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (id, &phone) in map.as_slice().iter().enumerate() {
        writeln!(out, "{id}\t{}", phones.label(phone))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_priors(path: &Path) -> Result<PriorVector> {
    let values = text_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            text.parse::<f64>().map_err(|_| {
                Error::format(
                    path,
                    format!("line {line}"),
                    format!("not a number: '{text}'"),
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PriorVector::new(values).map_err(|e| Error::format(path, "end", e.to_string()))
}

pub fn write_priors(path: &Path, priors: &PriorVector) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for p in priors.as_slice() {
        writeln!(out, "{p}")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct AlignmentRecord {
    utt: String,
    phone: String,
    start: usize,
    end: usize,
    stress: Option<u8>,
}

pub fn read_alignment(path: &Path, phones: &PhoneSet) -> Result<Vec<PhoneSegment>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, "line 1", e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path, "line 1", e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["utt", "phone", "start", "end", "stress"] {
        return Err(Error::format(
            path,
            "line 1",
            "header must be utt,phone,start,end,stress",
        ));
    }
    let mut segments = Vec::new();
    for record in reader.deserialize::<AlignmentRecord>() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::format(path, format!("line {line}"), e.to_string())
        })?;
        let line = format!("line {}", segments.len() + 2);
        let phone = phones.index_of(&record.phone).ok_or_else(|| {
            Error::format(
                path,
                line.clone(),
                format!("unknown phone '{}'", record.phone),
            )
        })?;
        let stress = record
            .stress
            .map(Stress::try_from)
            .transpose()
            .map_err(|e| Error::format(path, line.clone(), e))?;
        if record.end <= record.start {
            return Err(Error::format(path, line, "end must be greater than start"));
        }
        segments.push(PhoneSegment {
            utterance_id: record.utt,
            phone,
            start_frame: record.start,
            end_frame: record.end,
            stress,
        });
    }
    Ok(segments)
}

pub fn write_alignment(path: &Path, segments: &[PhoneSegment], phones: &PhoneSet) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    for seg in segments {
        writer
            .serialize(AlignmentRecord {
                utt: seg.utterance_id.clone(),
                phone: phones.label(seg.phone).to_string(),
                start: seg.start_frame,
                end: seg.end_frame,
                stress: seg.stress.map(u8::from),
            })
            .map_err(|e| Error::Io(e.into()))?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TrialRecord {
    phone: String,
    n: usize,
    stress: Option<Stress>,
    llk: Vec<f64>,
}

pub fn write_trials<W: Write>(trials: &[PhoneTrial], phones: &PhoneSet, mut out: W) -> Result<()> {
    for t in trials {
        let record = TrialRecord {
            phone: phones.label(t.true_phone).to_string(),
            n: t.duration,
            stress: t.stress,
            llk: t.llk.as_slice().to_vec(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trials_file(path: &Path, trials: &[PhoneTrial], phones: &PhoneSet) -> Result<()> {
    write_trials(trials, phones, BufWriter::new(fs::File::create(path)?))
}

pub fn read_trials<R: BufRead>(
    input: R,
    phones: &PhoneSet,
    path: &Path,
) -> Result<Vec<PhoneTrial>> {
    let mut trials = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let record: TrialRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, loc.clone(), e.to_string()))?;
        let true_phone = phones.index_of(&record.phone).ok_or_else(|| {
            Error::format(
                path,
                loc.clone(),
                format!("unknown phone '{}'", record.phone),
            )
        })?;
        if record.llk.len() != phones.len() {
            return Err(Error::format(
                path,
                loc,
                format!(
                    "llk has {} entries for {} phones",
                    record.llk.len(),
                    phones.len()
                ),
            ));
        }
        if record.n == 0 {
            return Err(Error::format(path, loc, "duration n must be ≥ 1"));
        }
        let llk = LogLikVector::new(record.llk)
            .map_err(|e| Error::format(path, loc.clone(), e.to_string()))?;
        trials.push(PhoneTrial {
            true_phone,
            llk,
            duration: record.n,
            stress: record.stress,
        });
    }
    Ok(trials)
}

pub fn read_trials_file(path: &Path, phones: &PhoneSet) -> Result<Vec<PhoneTrial>> {
    read_trials(BufReader::new(fs::File::open(path)?), phones, path)
}

/// EER value mapped onto one grey level: 0 at EER 0, 255 at EER ≥ 0.25.
pub fn eer_grey_level(eer: f64) -> u8 {
    ((eer / 0.25).clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PGM heatmap, one byte per cell; same-phone cells are 0.
pub fn write_confusion_pgm<W: Write>(m: &ConfusionMatrix, mut out: W) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", m.hypotheses.len(), m.targets.len())?;
    for row in &m.eer {
        let bytes: Vec<u8> = row.iter().map(|e| e.map_or(0, eer_grey_level)).collect();
        out.write_all(&bytes)?;
    }
    out.flush()?;
    Ok(())
}

/// CSV with a header of hypothesis labels and one row per target; same-phone
/// cells are left empty.
pub fn write_confusion_csv<W: Write>(m: &ConfusionMatrix, phones: &PhoneSet, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["target".to_string()];
    header.extend(m.hypotheses.iter().map(|&h| phones.label(h).to_string()));
    writer
        .write_record(&header)
        .map_err(|e| Error::Io(e.into()))?;
    for (row, cells) in m.targets.iter().zip(&m.eer) {
        let mut record = vec![row.label(phones)];
        record.extend(
            cells
                .iter()
                .map(|c| c.map_or(String::new(), |v| v.to_string())),
        );
        writer
            .write_record(&record)
            .map_err(|e| Error::Io(e.into()))?;
    }
    writer.flush()?;
    Ok(())
}
