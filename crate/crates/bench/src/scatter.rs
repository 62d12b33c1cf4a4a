//! Per-instance QW/RM pairs for scatter plots.

use serde::Serialize;

use crate::config::Method;
use crate::error::Result;
use crate::sweep::{CellSummary, InstanceRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPair {
    pub dim: usize,
    pub kind: String,
    pub kappa: f64,
    pub index: usize,
    pub seed: u64,
    pub qw_steps: f64,
    pub rm_time: f64,
    pub both_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub pairs: Vec<ScatterPair>,
}

impl Scatter {
    /// Fraction of converged pairs where the RM time exceeds the QW steps.
    pub fn dominance(&self) -> Option<f64> {
        let ok: Vec<&ScatterPair> = self.pairs.iter().filter(|p| p.both_converged).collect();
        (!ok.is_empty())
            .then(|| ok.iter().filter(|p| p.rm_time > p.qw_steps).count() as f64 / ok.len() as f64)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record([
            "dim",
            "kind",
            "kappa",
            "index",
            "seed",
            "qw_steps",
            "rm_time",
            "both_converged",
        ])?;
        for p in &self.pairs {
            w.serialize(p)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf8"))
    }
}

/// Pair QW and RM records of the same instance (matched by seed) across
/// all cells sharing a (dim, kind, κ).
pub fn scatter_export(cells: &[CellSummary]) -> Scatter {
    let mut pairs = Vec::new();
    for qw in cells.iter().filter(|c| c.key.method == Method::Qw) {
        let Some(rm) = cells.iter().find(|c| {
            c.key.method == Method::Rm
                && c.key.dim == qw.key.dim
                && c.key.kind == qw.key.kind
                && c.key.kappa == qw.key.kappa
        }) else {
            continue;
        };
        for a in &qw.records {
            let matches: Vec<&InstanceRecord> =
                rm.records.iter().filter(|b| b.seed == a.seed).collect();
            if let [b] = matches[..] {
                pairs.push(ScatterPair {
                    dim: a.dim,
                    kind: a.kind.to_string(),
                    kappa: a.kappa,
                    index: a.index,
                    seed: a.seed,
                    qw_steps: a.resource,
                    rm_time: b.resource,
                    both_converged: a.converged && b.converged,
                });
            }
        }
    }
    Scatter { pairs }
}
