//! Solve a single matrix loaded from a Matrix Market file.

use std::path::Path;

use qls_core::problemgen::load_matrix_market;
use qls_core::ProblemInstance;
use serde::{Deserialize, Serialize};

use crate::config::{Method, SweepConfig};
use crate::error::Result;
use crate::sweep::{solve_instance, InstanceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub label: String,
    pub dim: usize,
    pub kappa: f64,
    pub records: Vec<InstanceRecord>,
}

pub fn load(path: &Path, normalize: bool, rhs: Option<&Path>, seed: u64) -> Result<ProblemInstance> {
    Ok(load_matrix_market(path, normalize, rhs, seed)?)
}

/// Run each configured method on a loaded instance.
pub fn solve_loaded(cfg: &SweepConfig, inst: &ProblemInstance) -> Result<IngestReport> {
    let records = cfg
        .methods
        .iter()
        .map(|&m| solve_instance(cfg, inst, m, 0))
        .collect::<Result<Vec<_>>>()?;
    Ok(IngestReport {
        label: inst.label.clone(),
        dim: inst.dim(),
        kappa: inst.kappa,
        records,
    })
}

impl IngestReport {
    pub fn resource(&self, method: Method) -> Option<f64> {
        self.records.iter().find(|r| r.method == method).map(|r| r.resource)
    }
}
