//! Markdown report and CSV bundle.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::Command;

use qls_core::filtercost;
use qls_core::Kind;
use serde::{Deserialize, Serialize};

use crate::config::{Method, SweepConfig};
use crate::error::Result;
use crate::fixed::FixedRow;
use crate::scatter::scatter_export;
use crate::sweep::{flatten, to_json_lines, CellSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub git_hash: String,
    pub master_seed: u64,
    pub config: SweepConfig,
}

impl Provenance {
    pub fn new(config: &SweepConfig) -> Self {
        Self {
            git_hash: git_hash(),
            master_seed: config.master_seed,
            config: config.clone(),
        }
    }
}

/// `HEAD` of the enclosing git checkout, or `"unknown"`.
pub fn git_hash() -> String {
    Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "–".into(), |x| format!("{x:.prec$}"))
}

fn find(cells: &[CellSummary], dim: usize, kind: Kind, kappa: f64, m: Method) -> Option<&CellSummary> {
    cells
        .iter()
        .find(|c| c.key.dim == dim && c.key.kind == kind && c.key.kappa == kappa && c.key.method == m)
}

fn find_fixed(rows: &[FixedRow], dim: usize, kind: Kind, kappa: f64, m: Method) -> Option<&FixedRow> {
    rows.iter()
        .find(|r| r.dim == dim && r.kind == kind && r.kappa == kappa && r.method == m)
}

/// Per-cell summary rows; one per (dim, kind, κ, method) of the config.
pub fn summary_table(cells: &[CellSummary], cfg: &SweepConfig) -> String {
    let mut out = String::from(
        "| dim | kind | κ | method | n | converged | geo. mean | min | Q1 | median | Q3 | max | RMS Δ |\n\
         |---|---|---|---|---|---|---|---|---|---|---|---|---|\n",
    );
    for &dim in &cfg.dims {
        for &kind in &cfg.kinds {
            for &kappa in &cfg.kappas {
                for &m in &cfg.methods {
                    let c = find(cells, dim, kind, kappa, m);
                    let q = c.and_then(|c| c.quartiles);
                    let _ = writeln!(
                        out,
                        "| {dim} | {kind} | {kappa} | {m} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                        c.map_or("–".into(), |c| c.instances.to_string()),
                        c.map_or("–".into(), |c| c.converged.to_string()),
                        opt(c.and_then(|c| c.geometric_mean), 1),
                        opt(q.map(|q| q.min), 1),
                        opt(q.map(|q| q.q1), 1),
                        opt(q.map(|q| q.median), 1),
                        opt(q.map(|q| q.q3), 1),
                        opt(q.map(|q| q.max), 1),
                        opt(c.and_then(|c| c.rms_error), 3),
                    );
                }
            }
        }
    }
    out
}

/// QW steps against RM time per κ, with their ratio and α = TΔ/κ.
pub fn comparison_table(cells: &[CellSummary], cfg: &SweepConfig) -> String {
    let mut out = String::from(
        "| dim | kind | κ | QW steps | RM time | ratio | α (QW) |\n|---|---|---|---|---|---|---|\n",
    );
    for &dim in &cfg.dims {
        for &kind in &cfg.kinds {
            for &kappa in &cfg.kappas {
                let qw = find(cells, dim, kind, kappa, Method::Qw);
                let t = qw.and_then(|c| c.geometric_mean);
                let r = find(cells, dim, kind, kappa, Method::Rm).and_then(|c| c.geometric_mean);
                let alpha = t.zip(qw.and_then(|c| c.rms_error)).map(|(t, e)| t * e / kappa);
                let _ = writeln!(
                    out,
                    "| {dim} | {kind} | {kappa} | {} | {} | {} | {} |",
                    opt(t, 1),
                    opt(r, 1),
                    opt(t.zip(r).map(|(t, r)| r / t), 2),
                    opt(alpha, 3)
                );
            }
        }
    }
    out
}

/// Shared-resource rows: QW steps, RM segments and time, pooled RMS.
pub fn fixed_table(rows: &[FixedRow]) -> String {
    let mut keys: Vec<(usize, Kind, f64)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.dim, r.kind, r.kappa)) {
            keys.push((r.dim, r.kind, r.kappa));
        }
    }
    let mut out = String::from(
        "| dim | kind | κ | QW steps | QW RMS Δ | RM q | RM time | RM RMS Δ | ratio | α (QW) |\n\
         |---|---|---|---|---|---|---|---|---|---|\n",
    );
    for (dim, kind, kappa) in keys {
        let qw = find_fixed(rows, dim, kind, kappa, Method::Qw);
        let rm = find_fixed(rows, dim, kind, kappa, Method::Rm);
        let _ = writeln!(
            out,
            "| {dim} | {kind} | {kappa} | {} | {} | {} | {} | {} | {} | {} |",
            qw.map_or("–".into(), |r| r.resource.to_string()),
            opt(qw.map(|r| r.rms_error), 3),
            rm.map_or("–".into(), |r| r.resource.to_string()),
            opt(rm.map(|r| r.mean_cost), 1),
            opt(rm.map(|r| r.rms_error), 3),
            opt(qw.zip(rm).map(|(a, b)| b.mean_cost / a.mean_cost), 2),
            opt(qw.map(FixedRow::alpha), 3),
        );
    }
    out
}

/// Full markdown report.
pub fn render_report(cells: &[CellSummary], fixed: &[FixedRow], prov: &Provenance) -> String {
    let cfg = &prov.config;
    let mut out = String::from("# Benchmark report\n\n## Provenance\n\n");
    let _ = writeln!(out, "- git: `{}`", prov.git_hash);
    let _ = writeln!(out, "- master seed: {}", prov.master_seed);
    let _ = writeln!(out, "- config:\n\n```json\n{}\n```\n", cfg.to_json());
    if !cells.is_empty() {
        out.push_str("## Per-instance minimal resources\n\n");
        out.push_str(&summary_table(cells, cfg));
        out.push_str("\n## Method comparison (geometric means)\n\n");
        out.push_str(&comparison_table(cells, cfg));
        if let Some(d) = scatter_export(cells).dominance() {
            let _ = writeln!(out, "\nFraction of instances with RM time > QW steps: {d:.3}");
        }
    }
    if !fixed.is_empty() {
        out.push_str("\n## Shared resource per κ\n\n");
        out.push_str(&fixed_table(fixed));
    }
    out
}

/// Cell summaries as CSV.
pub fn summary_csv(cells: &[CellSummary]) -> Result<String> {
    #[derive(Serialize)]
    struct Row {
        dim: usize,
        kind: Kind,
        kappa: f64,
        method: Method,
        instances: usize,
        converged: usize,
        geometric_mean: Option<f64>,
        min: Option<f64>,
        q1: Option<f64>,
        median: Option<f64>,
        q3: Option<f64>,
        max: Option<f64>,
        rms_error: Option<f64>,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cells {
        let q = c.quartiles;
        w.serialize(Row {
            dim: c.key.dim,
            kind: c.key.kind,
            kappa: c.key.kappa,
            method: c.key.method,
            instances: c.instances,
            converged: c.converged,
            geometric_mean: c.geometric_mean,
            min: q.map(|q| q.min),
            q1: q.map(|q| q.q1),
            median: q.map(|q| q.median),
            q3: q.map(|q| q.q3),
            max: q.map(|q| q.max),
            rms_error: c.rms_error,
        })?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf8"))
}

pub fn fixed_csv(rows: &[FixedRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dim", "kind", "kappa", "method", "resource", "mean_cost", "rms_error", "instances", "converged", "alpha"])?;
    for r in rows {
        w.write_record([
            r.dim.to_string(),
            r.kind.to_string(),
            r.kappa.to_string(),
            r.method.to_string(),
            r.resource.to_string(),
            r.mean_cost.to_string(),
            r.rms_error.to_string(),
            r.instances.to_string(),
            r.converged.to_string(),
            r.alpha().to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf8"))
}

/// Filter-cost curves for the reference models over a log grid of ε.
pub fn write_filtercost(dir: &Path, eps_min: f64, eps_max: f64, points: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    let models = filtercost::reference_models();
    let rows = filtercost::cost_curves(&filtercost::log_grid(eps_min, eps_max, points), &models)?;
    fs::write(dir.join("optdelta.csv"), filtercost::optdelta_csv(&rows))?;
    fs::write(dir.join("costsplit.csv"), filtercost::costsplit_csv(&rows))?;
    fs::write(dir.join("interpolation.json"), filtercost::interpolation_manifest(&models)?)?;
    Ok(())
}

/// Write records, CSV tables, scatter pairs and the markdown report.
pub fn write_bundle(dir: &Path, cells: &[CellSummary], fixed: &[FixedRow], prov: &Provenance) -> Result<()> {
    fs::create_dir_all(dir)?;
    if !cells.is_empty() {
        fs::write(dir.join("records.jsonl"), to_json_lines(&flatten(cells)))?;
        fs::write(dir.join("summary.csv"), summary_csv(cells)?)?;
        fs::write(dir.join("scatter.csv"), scatter_export(cells).to_csv()?)?;
    }
    if !fixed.is_empty() {
        fs::write(dir.join("fixed.csv"), fixed_csv(fixed)?)?;
        fs::write(dir.join("fixed.json"), serde_json::to_string_pretty(fixed)?)?;
    }
    fs::write(dir.join("provenance.json"), serde_json::to_string_pretty(prov)?)?;
    fs::write(dir.join("report.md"), render_report(cells, fixed, prov))?;
    Ok(())
}
