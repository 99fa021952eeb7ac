use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::{compare_at_step, AccuracyMatrix, RunManifest};
use super::stats::{mean, sample_variance};
use crate::error::{Error, Result};

/// A finished run directory.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    /// Directory name, used to tell runs of the same method apart.
    pub label: String,
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub matrix: AccuracyMatrix,
}

pub fn load_run(dir: impl AsRef<Path>) -> Result<LoadedRun> {
    let dir = dir.as_ref();
    let manifest = RunManifest::read(dir.join("manifest.json"))?;
    let matrix = AccuracyMatrix::read(dir.join("accuracy_matrix.csv"))?;
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| manifest.method.clone());
    Ok(LoadedRun {
        label,
        dir: dir.to_path_buf(),
        manifest,
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub label: String,
    pub method: String,
    pub step: usize,
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub label: String,
    pub baseline: String,
    pub step: usize,
    pub mean: f64,
    pub baseline_mean: f64,
    pub diff: f64,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub baseline: String,
    pub curves: Vec<CurvePoint>,
    pub significance: Vec<SignificanceRow>,
}

impl Report {
    /// Rows at each run's final step.
    pub fn final_rows(&self) -> impl Iterator<Item = &SignificanceRow> {
        let last = self.significance.iter().map(|r| r.step).max().unwrap_or(0);
        self.significance.iter().filter(move |r| r.step == last)
    }
}

/// Curves for every run and paired tests of every run against the one whose
/// label or method equals `baseline`.
pub fn build_report(runs: &[LoadedRun], baseline: &str) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::Empty("runs to report"));
    }
    let base = runs
        .iter()
        .find(|r| r.label == baseline)
        .or_else(|| runs.iter().find(|r| r.manifest.method == baseline))
        .ok_or_else(|| Error::Validation(format!("baseline `{baseline}` not among the runs")))?;

    let mut curves = Vec::new();
    let mut significance = Vec::new();
    for run in runs {
        for k in 1..=run.matrix.n_steps() {
            let col = run.matrix.column(k);
            let variance = sample_variance(&col);
            curves.push(CurvePoint {
                label: run.label.clone(),
                method: run.manifest.method.clone(),
                step: k,
                mean: mean(&col),
                variance,
                std: variance.sqrt(),
            });
        }
        if std::ptr::eq(run, base) {
            continue;
        }
        for k in 1..=run.matrix.n_steps().min(base.matrix.n_steps()) {
            let t = compare_at_step(&run.matrix, &base.matrix, k)?;
            let (m, bm) = (mean(&run.matrix.column(k)), mean(&base.matrix.column(k)));
            significance.push(SignificanceRow {
                label: run.label.clone(),
                baseline: base.label.clone(),
                step: k,
                mean: m,
                baseline_mean: bm,
                diff: m - bm,
                t: t.t,
                df: t.df,
                p: t.p,
                degenerate: t.degenerate,
            });
        }
    }
    Ok(Report {
        baseline: base.label.clone(),
        curves,
        significance,
    })
}

/// Writes `curves.csv`, `significance.csv` (every step) and `summary.csv`
/// (final step only) into `dir`.
pub fn write_report(report: &Report, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut curves = String::from("label,method,step,mean,variance,std\n");
    for c in &report.curves {
        writeln!(
            curves,
            "{},{},{},{:.6},{:.6},{:.6}",
            c.label, c.method, c.step, c.mean, c.variance, c.std
        )
        .unwrap();
    }
    let header = "label,baseline,step,mean,baseline_mean,diff,t,df,p_value,degenerate\n";
    let row = |r: &SignificanceRow| {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{:.6e},{}\n",
            r.label,
            r.baseline,
            r.step,
            r.mean,
            r.baseline_mean,
            r.diff,
            r.t,
            r.df,
            r.p,
            r.degenerate
        )
    };
    let significance: String = std::iter::once(header.to_string())
        .chain(report.significance.iter().map(row))
        .collect();
    let summary: String = std::iter::once(header.to_string())
        .chain(report.final_rows().map(row))
        .collect();

    for (name, body) in [
        ("curves.csv", curves),
        ("significance.csv", significance),
        ("summary.csv", summary),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&path, e))
}
