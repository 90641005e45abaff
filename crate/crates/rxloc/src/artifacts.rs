//! Stage artifacts: strict CSV readers/writers, JSON export, hashing.
//!
//! Every numeric field is written with 17 significant digits, so a write
//! followed by a read reproduces each f64 bit for bit and re-running a
//! stage over unchanged inputs yields byte-identical files. Readers are
//! strict: exact header, exact field count, no silent recovery.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::glcm::FEATURE_NAMES;

/// One simulated fault case.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub scenario_id: String,
    pub section: usize,
    pub distance_km: f64,
    pub absolute_km: f64,
    pub zf_ohm: f64,
}

/// One sample of a scenario's R-X trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LocusRow {
    pub scenario_id: String,
    pub sample_index: usize,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

/// Texture features and the normalized target for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub scenario_id: String,
    pub section: usize,
    pub distance_km: f64,
    pub target_norm: f64,
    pub features: Vec<f64>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

/// Line-indexed strict CSV reading; `parse` gets (line_no, fields).
fn read_csv<T>(
    path: &Path,
    header: &str,
    parse: impl Fn(usize, &[&str]) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)?;
    let malformed = |why: String| Error::MalformedArtifact {
        path: path.display().to_string(),
        why,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == header => {}
        Some((_, first)) => {
            return Err(malformed(format!(
                "header mismatch: expected {header:?}, found {first:?}"
            )))
        }
        None => return Err(malformed("empty file".into())),
    }
    let n_fields = header.split(',').count();
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue; // tolerate one trailing newline, nothing more
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_fields {
            return Err(malformed(format!(
                "line {}: expected {n_fields} fields, found {}",
                i + 1,
                fields.len()
            )));
        }
        out.push(parse(i + 1, &fields).map_err(malformed)?);
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(line: usize, what: &str, token: &str) -> std::result::Result<T, String> {
    token
        .parse()
        .map_err(|_| format!("line {line}: unreadable {what}: {token:?}"))
}

const SCENARIO_HEADER: &str = "scenario_id,section,distance_km,absolute_km,zf_ohm";

pub fn write_scenarios(path: &Path, rows: &[ScenarioRow]) -> Result<()> {
    let mut s = String::from(SCENARIO_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.scenario_id,
            r.section,
            fmt_f64(r.distance_km),
            fmt_f64(r.absolute_km),
            fmt_f64(r.zf_ohm)
        );
    }
    write_file(path, &s)
}

pub fn read_scenarios(path: &Path) -> Result<Vec<ScenarioRow>> {
    read_csv(path, SCENARIO_HEADER, |line, f| {
        Ok(ScenarioRow {
            scenario_id: f[0].to_string(),
            section: parse_field(line, "section", f[1])?,
            distance_km: parse_field(line, "distance_km", f[2])?,
            absolute_km: parse_field(line, "absolute_km", f[3])?,
            zf_ohm: parse_field(line, "zf_ohm", f[4])?,
        })
    })
}

const LOCUS_HEADER: &str = "scenario_id,sample_index,r_ohm,x_ohm";

pub fn write_loci(path: &Path, rows: &[LocusRow]) -> Result<()> {
    let mut s = String::from(LOCUS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.scenario_id,
            r.sample_index,
            fmt_f64(r.r_ohm),
            fmt_f64(r.x_ohm)
        );
    }
    write_file(path, &s)
}

pub fn read_loci(path: &Path) -> Result<Vec<LocusRow>> {
    read_csv(path, LOCUS_HEADER, |line, f| {
        Ok(LocusRow {
            scenario_id: f[0].to_string(),
            sample_index: parse_field(line, "sample_index", f[1])?,
            r_ohm: parse_field(line, "r_ohm", f[2])?,
            x_ohm: parse_field(line, "x_ohm", f[3])?,
        })
    })
}

fn feature_header() -> String {
    let mut h = String::from("scenario_id,section,distance_km,target_norm");
    for i in 1..=FEATURE_NAMES.len() {
        let _ = write!(h, ",f{i:02}");
    }
    h
}

pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut s = feature_header();
    s.push('\n');
    for r in rows {
        if r.features.len() != FEATURE_NAMES.len() {
            return Err(Error::InvalidInput {
                what: "feature row".into(),
                why: format!(
                    "{} carries {} features, expected {}",
                    r.scenario_id,
                    r.features.len(),
                    FEATURE_NAMES.len()
                ),
            });
        }
        let _ = write!(
            s,
            "{},{},{},{}",
            r.scenario_id,
            r.section,
            fmt_f64(r.distance_km),
            fmt_f64(r.target_norm)
        );
        for v in &r.features {
            let _ = write!(s, ",{}", fmt_f64(*v));
        }
        s.push('\n');
    }
    write_file(path, &s)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>> {
    read_csv(path, &feature_header(), |line, f| {
        let mut features = Vec::with_capacity(FEATURE_NAMES.len());
        for (k, token) in f[4..].iter().enumerate() {
            features.push(parse_field(line, &format!("f{:02}", k + 1), token)?);
        }
        Ok(FeatureRow {
            scenario_id: f[0].to_string(),
            section: parse_field(line, "section", f[1])?,
            distance_km: parse_field(line, "distance_km", f[2])?,
            target_norm: parse_field(line, "target_norm", f[3])?,
            features,
        })
    })
}

/// Model leaderboards for every dataset, one row per model.
/// RMSE columns are normalized units, printed at 7 significant digits.
pub fn write_rmse_table(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut s = String::from("dataset,model,train_rmse_norm,test_rmse_norm\n");
    for rep in reports {
        for m in &rep.models {
            let _ = writeln!(
                s,
                "{},{},{:.7e},{:.7e}",
                rep.dataset, m.model, m.train_rmse_norm, m.test_rmse_norm
            );
        }
    }
    write_file(path, &s)
}

/// Test-sample breakdown for each dataset's best model: km at 4 decimals,
/// percent error at 3, matching the reference table formatting.
pub fn write_best_table(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut s = String::from("dataset,model,actual_km,predicted_km,percent_error\n");
    for rep in reports {
        let best = rep.best();
        for r in &best.records {
            let _ = writeln!(
                s,
                "{},{},{:.4},{:.4},{:.3}",
                rep.dataset, best.model, r.actual_km, r.predicted_km, r.percent_error
            );
        }
    }
    write_file(path, &s)
}

/// Actual-vs-predicted pairs for every model, full precision. The model
/// column is qualified as dataset/model since rosters repeat across
/// datasets.
pub fn write_plot_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut s = String::from("actual_km,predicted_km,model\n");
    for rep in reports {
        for m in &rep.models {
            for r in &m.records {
                let _ = writeln!(
                    s,
                    "{},{},{}/{}",
                    fmt_f64(r.actual_km),
                    fmt_f64(r.predicted_km),
                    rep.dataset,
                    m.model
                );
            }
        }
    }
    write_file(path, &s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput {
        what: "json export".into(),
        why: e.to_string(),
    })?;
    write_file(path, &format!("{text}\n"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
