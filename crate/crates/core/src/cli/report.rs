use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::WrongProjectorReport;

pub const REPORT_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the effective configuration.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub artifact_version: String,
    pub report_format: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveTable {
    pub reference: String,
    pub probabilities: Vec<f64>,
    /// Outcomes with probability below the degeneracy threshold.
    pub degenerate: Vec<bool>,
    pub probability_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub perspective: String,
    pub outcome: usize,
    pub keep: Vec<String>,
    /// `None` when the outcome is degenerate or the cut is not proper in this
    /// perspective.
    pub entropy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub reference: String,
    /// `N` with `Σ_m Γ_m†Γ_m = N·I`.
    pub n: f64,
    /// `⟨ψ|U†δU|ψ⟩`.
    pub physical_norm_sqr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// Passes when `defect < tolerance`.
    Below,
    /// Passes when `defect > tolerance`.
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub defect: f64,
    pub tolerance: f64,
    pub criterion: Criterion,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn below(name: &str, defect: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            defect,
            tolerance,
            criterion: Criterion::Below,
            passed: defect < tolerance,
            detail: detail.into(),
        }
    }

    pub fn failed(name: &str, tolerance: f64, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            defect: f64::MAX,
            tolerance,
            criterion: Criterion::Below,
            passed: false,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub provenance: Provenance,
    pub sites: usize,
    pub particles: Vec<String>,
    pub pointer: String,
    pub unitary: String,
    /// The evolved state has no physical component.
    pub degenerate: bool,
    pub perspectives: Vec<PerspectiveTable>,
    pub entropy: Vec<EntropyRow>,
    pub normalization: Vec<Normalization>,
    pub wrong_projector: Option<WrongProjectorReport>,
    pub checks: Vec<CheckResult>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        !self.degenerate && self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<RunReport> {
        serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("report: {e}")]))
    }

    /// One row per outcome: `outcome, rho_<R>…, abs_delta, S_<R>[cut]…`.
    /// `abs_delta` is the largest gap to the first perspective.
    pub fn probability_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let cuts = self.entropy_columns();
        let mut header = vec!["outcome".to_string()];
        header.extend(
            self.perspectives
                .iter()
                .map(|p| format!("rho_{}", p.reference)),
        );
        header.push("abs_delta".into());
        header.extend(
            cuts.iter()
                .map(|(r, keep)| format!("S_{r}[{}]", keep.join("+"))),
        );
        w.write_record(&header).expect("in-memory write");
        let n = self
            .perspectives
            .first()
            .map_or(0, |p| p.probabilities.len());
        for m in 0..n {
            let mut row = vec![m.to_string()];
            let first = self.perspectives[0].probabilities[m];
            let mut delta: f64 = 0.0;
            for p in &self.perspectives {
                row.push(format!("{:e}", p.probabilities[m]));
                delta = delta.max((p.probabilities[m] - first).abs());
            }
            row.push(format!("{delta:e}"));
            for (r, keep) in &cuts {
                let e = self
                    .entropy
                    .iter()
                    .find(|e| &e.perspective == r && &e.keep == keep && e.outcome == m)
                    .and_then(|e| e.entropy);
                row.push(e.map(|x| format!("{x:e}")).unwrap_or_default());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn checks_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "name",
            "defect",
            "tolerance",
            "criterion",
            "passed",
            "detail",
        ])
        .expect("in-memory write");
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                format!("{:e}", c.defect),
                format!("{:e}", c.tolerance),
                match c.criterion {
                    Criterion::Below => "below".into(),
                    Criterion::Above => "above".into(),
                },
                c.passed.to_string(),
                c.detail.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    fn entropy_columns(&self) -> Vec<(String, Vec<String>)> {
        let mut cols: Vec<(String, Vec<String>)> = Vec::new();
        for e in &self.entropy {
            let key = (e.perspective.clone(), e.keep.clone());
            if !cols.contains(&key) {
                cols.push(key);
            }
        }
        cols
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

/// Writes the report into `dir`; returns the files written.
///
/// JSON goes to `<scenario>.json`. CSV goes to `<scenario>.csv` (the
/// per-outcome table) and `<scenario>.checks.csv`.
pub fn emit_report(report: &RunReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files: Vec<(PathBuf, String)> = match format {
        Format::Json => vec![(
            dir.join(format!("{}.json", report.scenario)),
            report.to_json(),
        )],
        Format::Csv => vec![
            (
                dir.join(format!("{}.csv", report.scenario)),
                report.probability_csv(),
            ),
            (
                dir.join(format!("{}.checks.csv", report.scenario)),
                report.checks_csv(),
            ),
        ],
    };
    for (path, body) in &files {
        let mut f = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        f.write_all(body.as_bytes()).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
