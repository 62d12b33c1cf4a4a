//! Per-instance sweeps: every instance solved to its own minimal resource.

use std::collections::BTreeMap;

use log::info;
use qls_core::hamiltonian::build_family;
use qls_core::problemgen::generate;
use qls_core::qwalk::WalkSystem;
use qls_core::randomized::RmSolver;
use qls_core::seeds::derive_seed;
use qls_core::{Kind, ProblemInstance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Method, SweepConfig};
use crate::error::{BenchError, Result};
use crate::stats::{geometric_mean, rms, Quartiles};

/// Seed of instance `index` in the (dim, κ) cell.
pub fn instance_seed(master: u64, dim: usize, kappa: f64, index: usize) -> u64 {
    derive_seed(&[master, dim as u64, kappa.to_bits(), index as u64])
}

/// Outcome of one method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub dim: usize,
    pub kappa: f64,
    pub kind: Kind,
    pub method: Method,
    pub index: usize,
    pub seed: u64,
    /// Walk steps (QW) or mean total evolution time (RM).
    pub resource: f64,
    /// Number of RM segments; absent for QW.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    /// Achieved Δ (QW) or RMS Δ over repetitions (RM).
    pub error: f64,
    pub converged: bool,
}

/// Identity of a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub dim: usize,
    pub kind: Kind,
    pub kappa: f64,
    pub method: Method,
}

/// Sort key: dim, then pd before general, then κ, then method.
type SortKey = (usize, u8, u64, Method);

fn sort_key(k: &CellKey) -> SortKey {
    let kind = match k.kind {
        Kind::Pd => 0,
        Kind::General => 1,
    };
    (k.dim, kind, k.kappa.to_bits(), k.method)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub key: CellKey,
    pub instances: usize,
    pub converged: usize,
    /// Over converged instances only.
    pub geometric_mean: Option<f64>,
    pub quartiles: Option<Quartiles>,
    /// RMS of the per-instance errors of converged instances.
    pub rms_error: Option<f64>,
    pub records: Vec<InstanceRecord>,
}

impl CellSummary {
    pub fn from_records(key: CellKey, records: Vec<InstanceRecord>) -> Self {
        let ok: Vec<&InstanceRecord> = records.iter().filter(|r| r.converged).collect();
        let resources: Vec<f64> = ok.iter().map(|r| r.resource).collect();
        let errors: Vec<f64> = ok.iter().map(|r| r.error).collect();
        Self {
            key,
            instances: records.len(),
            converged: ok.len(),
            geometric_mean: geometric_mean(&resources),
            quartiles: Quartiles::of(&resources),
            rms_error: rms(&errors),
            records,
        }
    }
}

/// Group records into cells, ordered by (dim, kind, κ, method) and index.
pub fn summarize(records: &[InstanceRecord]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<SortKey, (CellKey, Vec<InstanceRecord>)> = BTreeMap::new();
    for r in records {
        let key = CellKey {
            dim: r.dim,
            kind: r.kind,
            kappa: r.kappa,
            method: r.method,
        };
        cells
            .entry(sort_key(&key))
            .or_insert_with(|| (key, Vec::new()))
            .1
            .push(r.clone());
    }
    cells
        .into_values()
        .map(|(key, mut recs)| {
            recs.sort_by_key(|r| r.index);
            CellSummary::from_records(key, recs)
        })
        .collect()
}

/// Run `f` on a pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Generate instance `index` of a cell.
pub fn make_instance(
    cfg: &SweepConfig,
    kind: Kind,
    dim: usize,
    kappa: f64,
    index: usize,
) -> Result<ProblemInstance> {
    let seed = instance_seed(cfg.master_seed, dim, kappa, index);
    Ok(generate(kind, dim, kappa, seed)?)
}

/// Minimal resource of one method on one instance.
pub fn solve_instance(
    cfg: &SweepConfig,
    inst: &ProblemInstance,
    method: Method,
    index: usize,
) -> Result<InstanceRecord> {
    let family = build_family(inst, cfg.p)?;
    let (resource, segments, error, converged) = match method {
        Method::Qw => {
            let walk = WalkSystem::new(&family, cfg.encoding)?;
            let r = walk.find_min_steps(
                cfg.target_error,
                cfg.step_start,
                cfg.step_increment,
                cfg.step_cap,
            )?;
            (r.result.steps as f64, None, r.result.error, r.converged)
        }
        Method::Rm => {
            let solver = RmSolver::new(&family, cfg.pdf)?.with_gap_model(cfg.gap_model);
            let r = solver.find_min_q(cfg.target_error, cfg.rm_repetitions, inst.seed, cfg.q_cap)?;
            (
                r.stats.mean_total_time,
                Some(r.stats.q),
                r.stats.rms_error,
                r.converged,
            )
        }
    };
    Ok(InstanceRecord {
        dim: inst.dim(),
        kappa: inst.kappa,
        kind: inst.kind,
        method,
        index,
        seed: inst.seed,
        resource,
        segments,
        error,
        converged,
    })
}

/// Solve every (dim, kind, κ, index, method) task of the config.
///
/// Each task depends only on its own seed, and results are re-sorted by
/// cell and index, so the output is identical for any worker count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<CellSummary>> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for &dim in &cfg.dims {
        for &kind in &cfg.kinds {
            for &kappa in &cfg.kappas {
                for index in 0..cfg.instances {
                    tasks.push((dim, kind, kappa, index));
                }
            }
        }
    }
    info!(
        "sweep: {} instances x {} methods on {} workers",
        tasks.len(),
        cfg.methods.len(),
        cfg.workers
    );
    let records: Vec<Result<Vec<InstanceRecord>>> = with_workers(cfg.workers, || {
        tasks
            .par_iter()
            .map(|&(dim, kind, kappa, index)| {
                let inst = make_instance(cfg, kind, dim, kappa, index)?;
                cfg.methods
                    .iter()
                    .map(|&m| solve_instance(cfg, &inst, m, index))
                    .collect()
            })
            .collect()
    })?;
    let mut flat = Vec::with_capacity(tasks.len() * cfg.methods.len());
    for r in records {
        flat.extend(r?);
    }
    Ok(summarize(&flat))
}

/// All records of a set of cells, in cell order.
pub fn flatten(cells: &[CellSummary]) -> Vec<InstanceRecord> {
    cells.iter().flat_map(|c| c.records.iter().cloned()).collect()
}

/// Records as JSON lines.
pub fn to_json_lines(records: &[InstanceRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

pub fn from_json_lines(text: &str) -> Result<Vec<InstanceRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
