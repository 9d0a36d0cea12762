//! Dataset loading and output files.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scoremix_core::{EmpiricalMeasure, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureFormat {
    Csv,
    Json,
}

impl MeasureFormat {
    /// `.json` is JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => MeasureFormat::Json,
            _ => MeasureFormat::Csv,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureJson {
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    label: String,
}

pub fn load_measure(path: &Path, format: MeasureFormat) -> Result<EmpiricalMeasure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("measure");
    match format {
        MeasureFormat::Csv => parse_measure_csv(&text, label),
        MeasureFormat::Json => parse_measure_json(&text),
    }
    .with_context(|| format!("loading {}", path.display()))
}

/// Rows of `d` coordinates plus an optional weight column named `w`.
///
/// Without a header every row must have the same width and carries no weight.
pub fn parse_measure_csv(text: &str, label: &str) -> Result<EmpiricalMeasure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut weighted = false;
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rows.is_empty() && width.is_none() && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            weighted = rec.iter().last() == Some("w");
            width = Some(rec.len());
            continue;
        }
        if let Some(w) = width {
            if rec.len() != w {
                bail!("row {} has {} fields, expected {}", i + 1, rec.len(), w);
            }
        }
        width = Some(rec.len());
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().with_context(|| format!("row {}: cannot parse `{f}`", i + 1)))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("no data rows");
    }
    let (points, weights) = if weighted {
        let w = rows.iter().map(|r| *r.last().unwrap()).collect();
        let p = rows.into_iter().map(|mut r| {
            r.pop();
            r
        });
        (p.collect(), Some(w))
    } else {
        (rows, None)
    };
    Ok(EmpiricalMeasure::new(points, weights, label)?)
}

pub fn parse_measure_json(text: &str) -> Result<EmpiricalMeasure> {
    let m: MeasureJson = serde_json::from_str(text)?;
    Ok(EmpiricalMeasure::new(m.points, m.weights, m.label)?)
}

/// Canonical CSV: header `x0,...,w`, one point per row.
pub fn measure_to_csv(m: &EmpiricalMeasure) -> String {
    let mut s = String::new();
    for j in 0..m.dim() {
        s.push_str(&format!("x{j},"));
    }
    s.push_str("w\n");
    for (p, w) in m.points().zip(m.weights()) {
        for v in p {
            s.push_str(&format!("{v},"));
        }
        s.push_str(&format!("{w}\n"));
    }
    s
}

pub fn measure_to_json(m: &EmpiricalMeasure) -> Result<String> {
    let j = MeasureJson {
        points: m.points().map(<[f64]>::to_vec).collect(),
        weights: Some(m.weights().to_vec()),
        label: m.label().to_string(),
    };
    Ok(serde_json::to_string_pretty(&j)?)
}

/// `sha256("blob <len>\0" ++ bytes)`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// `tau,x0,...,x{d-1},driftsq`; the drift of the step leaving each sample,
/// blank on the last row. Physical-time paths are written in `τ = log(T/t)`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let d = traj.dim();
    let mut s = String::from("tau");
    for j in 0..d {
        s.push_str(&format!(",x{j}"));
    }
    let drift = traj.drift_norm_sq.as_deref();
    if drift.is_some() {
        s.push_str(",driftsq");
    }
    s.push('\n');
    let physical = traj.mode == scoremix_core::TrajectoryMode::PhysicalOde;
    for (i, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let tau = if physical { (traj.meta.horizon / t).ln() } else { *t };
        s.push_str(&format!("{tau}"));
        for v in x {
            s.push_str(&format!(",{v}"));
        }
        if let Some(dr) = drift {
            s.push(',');
            if let Some(v) = dr.get(i) {
                s.push_str(&format!("{v}"));
            }
        }
        s.push('\n');
    }
    s
}

/// Header row followed by numeric rows.
pub fn table_csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
