//! Report directories: CSV tables, PGM images and a hashed run manifest.
//!
//! Numbers are written with six significant digits and a `.` separator,
//! independent of locale. Undefined values are empty cells. The manifest is
//! written last and lists every other file with its SHA-256.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pgm::encode_pgm;
use super::{read_file, write_file};
use crate::diagnostics::HistogramSet;
use crate::error::{Error, Result};
use crate::experiments::{case_checks, CaseReport, CaseSummary, TrendTable};
use crate::seed::sha256_hex;

pub const TOOL_VERSION: &str = concat!("scatter ", env!("CARGO_PKG_VERSION"));
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Six significant digits; exponent form outside `[1e-5, 1e6)`.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let e = format!("{v:.5e}");
    let (_, exp) = e.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let rounded: f64 = e.parse().expect("float");
        format!("{:.*}", (5 - exp) as usize, rounded)
    } else {
        e
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

pub fn metrics_csv(report: &CaseReport) -> String {
    let mut s = String::from("case,family,index,pcc,ssim,cosine,dice\n");
    for m in &report.metrics {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            report.case,
            m.family,
            m.index,
            cell(m.pcc),
            cell(m.ssim),
            cell(m.cosine),
            cell(m.dice)
        );
    }
    s
}

pub fn trend_csv(table: &TrendTable) -> String {
    let mut s = String::from("criterion,left,left_value,relation,right,right_value,margin,passed\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.criterion,
            r.left,
            fmt_sig(r.left_value),
            r.relation,
            r.right,
            fmt_sig(r.right_value),
            fmt_sig(r.margin),
            r.passed
        );
    }
    s
}

/// One CSV per point plus `pooled`, each with `bin_lo,bin_hi,count,frequency`.
/// Pooled rows have no count.
pub fn histogram_csvs(set: &HistogramSet) -> Vec<(String, String)> {
    let table = |counts: Option<&[u64]>, freqs: &[f64]| {
        let mut s = String::from("bin_lo,bin_hi,count,frequency\n");
        for (b, f) in freqs.iter().enumerate() {
            let (lo, hi) = set.bin_edges(b);
            let c = counts.map(|c| c[b].to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", fmt_sig(lo), fmt_sig(hi), c, fmt_sig(*f));
        }
        s
    };
    let mut out: Vec<(String, String)> = set
        .per_point
        .iter()
        .map(|p| {
            (
                format!("hist_{}_{}.csv", p.point.0, p.point.1),
                table(Some(&p.counts), &p.frequencies),
            )
        })
        .collect();
    out.push(("hist_pooled.csv".into(), table(None, &set.pooled)));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub config: serde_json::Value,
    pub files: Vec<ManifestFile>,
    pub stages: Vec<Stage>,
}

/// Collects files written into one directory, then seals them in a manifest.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<ManifestFile>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_file(&path, bytes)?;
        self.files.push(ManifestFile {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn finish(self, config: serde_json::Value, stages: Vec<Stage>) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: TOOL_VERSION.into(),
            config,
            files: self.files,
            stages,
        };
        write_file(
            &self.dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )?;
        Ok(manifest)
    }
}

/// Writes the full report layout into `dir`.
pub fn emit_report(report: &CaseReport, dir: &Path) -> Result<RunManifest> {
    let mut out = OutputDir::create(dir)?;
    let summary = report.summary();
    out.write("report.csv", metrics_csv(report).as_bytes())?;
    out.write("trend.csv", trend_csv(&case_checks(&summary)).as_bytes())?;
    out.write(
        "coverage_saturated.pgm",
        &encode_pgm(&report.coverage_saturated.values),
    )?;
    out.write(
        "coverage_normalized.pgm",
        &encode_pgm(&report.coverage_normalized.values),
    )?;
    for r in &report.reconstructions {
        out.write(
            &format!("recon_{}_{}.pgm", r.family, r.index),
            &encode_pgm(&r.recon),
        )?;
        out.write(
            &format!("truth_{}_{}.pgm", r.family, r.index),
            &encode_pgm(&r.truth),
        )?;
    }
    out.write(SUMMARY_FILE, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    let config = serde_json::to_value(&report.config)?;
    out.write("config.json", serde_json::to_string_pretty(&config)?.as_bytes())?;
    let stages = report
        .durations
        .iter()
        .map(|(name, seconds)| Stage {
            name: name.clone(),
            seconds: *seconds,
        })
        .collect();
    out.finish(config, stages)
}

/// Reads back the summary of a report directory.
pub fn load_summary(dir: &Path) -> Result<CaseSummary> {
    Ok(serde_json::from_slice(&read_file(&dir.join(SUMMARY_FILE))?)?)
}
