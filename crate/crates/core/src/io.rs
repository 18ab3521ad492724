//! CSV readers and writers for samples, contributors, scores, ground truth
//! and scaling curves.
//!
//! Sample files carry the header `id,knowledge_index,is_real,label,x0,x1,…`.
//! Only `label` and the contiguous feature columns `x0..x{d-1}` are
//! required; `knowledge_index` may be empty and `is_real` defaults to 1.
//! A contributor directory holds one sample file per contributor, named
//! `<contributor_id>.csv`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalharness::GroundTruth;
use crate::longtail::{Contributor, Sample};
use crate::scaling::{PhaseConstants, PhaseCurve};
use crate::valuation::ValuationScore;

/// A parsed sample row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub id: Option<String>,
    pub sample: Sample,
    pub is_real: bool,
}

struct Columns {
    id: Option<usize>,
    knowledge: Option<usize>,
    is_real: Option<usize>,
    label: usize,
    features: Vec<usize>,
}

fn columns(header: &csv::StringRecord) -> Result<Columns> {
    let find = |name: &str| header.iter().position(|h| h == name);
    for (i, h) in header.iter().enumerate() {
        if header.iter().skip(i + 1).any(|o| o == h) {
            return Err(Error::parse(format!("duplicate column `{h}`")));
        }
        let known = matches!(h, "id" | "knowledge_index" | "is_real" | "label")
            || h.strip_prefix('x')
                .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
        if !known {
            return Err(Error::parse(format!("unknown column `{h}`")));
        }
    }
    let label = find("label").ok_or_else(|| Error::parse("missing `label` column"))?;
    let mut features = Vec::new();
    while let Some(c) = find(&format!("x{}", features.len())) {
        features.push(c);
    }
    let x_count = header.iter().filter(|h| h.starts_with('x')).count();
    if features.is_empty() {
        return Err(Error::parse("missing feature column `x0`"));
    }
    if x_count != features.len() {
        return Err(Error::parse("feature columns must be x0..x{d-1} without gaps"));
    }
    Ok(Columns {
        id: find("id"),
        knowledge: find("knowledge_index"),
        is_real: find("is_real"),
        label,
        features,
    })
}

fn field(row: &csv::StringRecord, col: usize, line: u64) -> Result<&str> {
    row.get(col)
        .ok_or_else(|| Error::parse(format!("line {line}: missing field {col}")))
}

fn finite(s: &str, what: &str, line: u64) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(format!("line {line}: bad {what} `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(format!("line {line}: {what} must be finite")));
    }
    Ok(v)
}

fn parse_bool(s: &str, line: u64) -> Result<bool> {
    match s.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::parse(format!("line {line}: bad is_real `{other}`"))),
    }
}

/// Parses a sample CSV. Labels must lie in [0, 1].
pub fn parse_samples(bytes: &[u8]) -> Result<Vec<SampleRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let cols = columns(rdr.headers()?)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        let label = finite(field(&row, cols.label, line)?, "label", line)?;
        if !(0.0..=1.0).contains(&label) {
            return Err(Error::parse(format!("line {line}: label {label} outside [0, 1]")));
        }
        let features = cols
            .features
            .iter()
            .map(|&c| finite(field(&row, c, line)?, "feature", line))
            .collect::<Result<Vec<_>>>()?;
        let knowledge = match cols.knowledge.map(|c| field(&row, c, line)).transpose()? {
            None => None,
            Some(s) if s.trim().is_empty() => None,
            Some(s) => match s.trim().parse::<usize>() {
                Ok(i) if i >= 1 => Some(i),
                _ => return Err(Error::parse(format!("line {line}: bad knowledge_index `{s}`"))),
            },
        };
        let is_real = match cols.is_real {
            Some(c) => parse_bool(field(&row, c, line)?, line)?,
            None => true,
        };
        let id = cols.id.map(|c| field(&row, c, line).map(str::to_string)).transpose()?;
        out.push(SampleRecord {
            id,
            sample: Sample {
                knowledge,
                features,
                label,
            },
            is_real,
        });
    }
    Ok(out)
}

/// Parses a test or evaluation set; all rows are used regardless of `is_real`.
pub fn parse_sample_set(bytes: &[u8]) -> Result<Vec<Sample>> {
    let samples: Vec<Sample> = parse_samples(bytes)?.into_iter().map(|r| r.sample).collect();
    if samples.is_empty() {
        return Err(Error::parse("sample file has no rows"));
    }
    Ok(samples)
}

/// Parses one contributor's sample file, splitting rows on `is_real`.
pub fn parse_contributor(id: &str, bytes: &[u8]) -> Result<Contributor> {
    let mut real = Vec::new();
    let mut synth = Vec::new();
    for r in parse_samples(bytes)? {
        if r.is_real {
            real.push(r.sample);
        } else {
            synth.push(r.sample);
        }
    }
    Contributor::new(id, real, synth).map_err(|e| Error::parse(e.to_string()))
}

pub fn read_sample_set(path: &Path) -> Result<Vec<Sample>> {
    parse_sample_set(&fs::read(path)?).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// The `*.csv` files of a contributor directory, sorted by name.
pub fn contributor_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::parse(format!("{}: no contributor CSV files", dir.display())));
    }
    Ok(files)
}

/// Contributor id of a sample file: its stem.
pub fn contributor_id(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::parse(format!("{}: file name is not UTF-8", path.display())))
}

/// Parses `(id, file bytes)` pairs and checks that all contributors share
/// one feature dimension.
pub fn parse_contributors(files: &[(String, Vec<u8>)]) -> Result<Vec<Contributor>> {
    if files.is_empty() {
        return Err(Error::parse("no contributor files"));
    }
    let contributors = files
        .iter()
        .map(|(id, bytes)| parse_contributor(id, bytes).map_err(|e| e.for_contributor(id)))
        .collect::<Result<Vec<_>>>()?;
    let dim = contributors[0].samples().next().map(|s| s.features.len());
    if contributors
        .iter()
        .flat_map(|c| c.samples())
        .any(|s| Some(s.features.len()) != dim)
    {
        return Err(Error::parse("contributors have different feature dimensions"));
    }
    Ok(contributors)
}

/// Loads every contributor of a directory; ids come from file stems.
pub fn read_contributor_dir(dir: &Path) -> Result<Vec<Contributor>> {
    let files = contributor_files(dir)?
        .iter()
        .map(|p| Ok((contributor_id(p)?, fs::read(p)?)))
        .collect::<Result<Vec<_>>>()?;
    parse_contributors(&files)
}

/// Writes samples with the full header; `is_real` applies to every row.
pub fn write_samples<W: Write>(out: W, rows: &[(&Sample, bool)]) -> Result<()> {
    let dim = rows.first().map_or(0, |(s, _)| s.features.len());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec![
        "id".to_string(),
        "knowledge_index".into(),
        "is_real".into(),
        "label".into(),
    ];
    header.extend((0..dim).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (i, (s, real)) in rows.iter().enumerate() {
        if s.features.len() != dim {
            return Err(Error::domain("samples have different feature dimensions"));
        }
        let mut rec = vec![
            i.to_string(),
            s.knowledge.map(|k| k.to_string()).unwrap_or_default(),
            u8::from(*real).to_string(),
            fmt_f64(s.label),
        ];
        rec.extend(s.features.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_contributor<W: Write>(out: W, c: &Contributor) -> Result<()> {
    let rows: Vec<(&Sample, bool)> = c
        .real_samples
        .iter()
        .map(|s| (s, true))
        .chain(c.synth_samples.iter().map(|s| (s, false)))
        .collect();
    write_samples(out, &rows)
}

/// Shortest round-trip decimal form.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreRow {
    contributor_id: String,
    loss_term: f64,
    discrepancy_term: f64,
    ntk_term: f64,
    composition_term: f64,
    total: f64,
    gradient_norm_bound: f64,
    sample_count: usize,
    pi: f64,
}

/// Column order of score files.
pub const SCORE_COLUMNS: &str =
    "contributor_id,loss_term,discrepancy_term,ntk_term,composition_term,total,gradient_norm_bound,sample_count,pi";

pub fn write_scores<W: Write>(out: W, scores: &[ValuationScore]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for s in scores {
        w.serialize(ScoreRow {
            contributor_id: s.contributor_id.clone(),
            loss_term: s.loss_term,
            discrepancy_term: s.discrepancy_term,
            ntk_term: s.ntk_term,
            composition_term: s.composition_term,
            total: s.total,
            gradient_norm_bound: s.gradient_norm_bound,
            sample_count: s.sample_count,
            pi: s.pi,
        })?;
    }
    if scores.is_empty() {
        w.write_record(SCORE_COLUMNS.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_scores(bytes: &[u8]) -> Result<Vec<ValuationScore>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for row in rdr.deserialize::<ScoreRow>() {
        let r = row?;
        out.push(ValuationScore {
            contributor_id: r.contributor_id,
            loss_term: r.loss_term,
            discrepancy_term: r.discrepancy_term,
            ntk_term: r.ntk_term,
            composition_term: r.composition_term,
            total: r.total,
            gradient_norm_bound: r.gradient_norm_bound,
            sample_count: r.sample_count,
            pi: r.pi,
        });
    }
    Ok(out)
}

/// Column order of ground-truth files.
pub const GROUND_TRUTH_COLUMNS: &str =
    "contributor_id,test_metric,train_loss,epochs,converged,diverged,learning_rate,config_digest";

pub fn write_ground_truth<W: Write>(out: W, rows: &[GroundTruth]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(GROUND_TRUTH_COLUMNS.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_ground_truth(bytes: &[u8]) -> Result<Vec<GroundTruth>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let rows = rdr
        .deserialize::<GroundTruth>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    for r in &rows {
        if !r.diverged && !(0.0..=1.0).contains(&r.test_metric) {
            return Err(Error::parse(format!(
                "`{}`: test metric {} outside [0, 1]",
                r.contributor_id, r.test_metric
            )));
        }
    }
    Ok(rows)
}

/// Column order of curve files.
pub const CURVE_COLUMNS: &str = "pi,n,error,irreducible,unseen_rho,unseen_gamma,reducible,phase";

/// Writes a curve with its per-point decomposition and phase label.
pub fn write_curve<W: Write>(out: W, curve: &PhaseCurve, consts: &PhaseConstants) -> Result<()> {
    let model = crate::scaling::ErrorModel::new(&curve.params)?;
    let phases = curve.phases(consts);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CURVE_COLUMNS.split(','))?;
    for ((&n, &e), phase) in curve.sample_sizes.iter().zip(&curve.errors).zip(phases) {
        let b = model.breakdown(n);
        w.write_record([
            fmt_f64(curve.params.pi),
            n.to_string(),
            fmt_f64(e),
            fmt_f64(b.irreducible),
            fmt_f64(b.unseen_rho),
            fmt_f64(b.unseen_gamma),
            fmt_f64(b.reducible()),
            phase.label().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
