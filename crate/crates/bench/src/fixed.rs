//! Shared-resource tables: one step count (QW) or segment count (RM) per
//! cell, judged by the RMS error pooled over all instances.

use log::info;
use qls_core::filtercost::infidelity;
use qls_core::hamiltonian::build_family;
use qls_core::qwalk::WalkSystem;
use qls_core::randomized::{q_lower_bound, RmSolver};
use qls_core::{HamiltonianFamily, Kind, ProblemInstance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Method, SweepConfig};
use crate::error::Result;
use crate::stats::rms;
use crate::sweep::{make_instance, with_workers};

/// Pooled outcome at one shared resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedRow {
    pub dim: usize,
    pub kind: Kind,
    pub kappa: f64,
    pub method: Method,
    /// Walk steps (QW) or segment count (RM).
    pub resource: usize,
    /// Steps (QW) or mean total evolution time (RM).
    pub mean_cost: f64,
    pub rms_error: f64,
    pub instances: usize,
    /// False when the cap was reached without meeting the target.
    pub converged: bool,
    /// Every `(resource, rms)` evaluated by the tuner.
    pub trace: Vec<(usize, f64)>,
}

impl FixedRow {
    /// Scaling constant `cost · Δ / κ`.
    pub fn alpha(&self) -> f64 {
        self.mean_cost * self.rms_error / self.kappa
    }
}

/// Smallest index in `[1, cap]` with `eval(index) <= target`, found by
/// galloping from `start` and bisecting the bracket.
///
/// Assumes the pooled error is close to monotone; the result is the lower
/// end of the first crossing found.
pub fn smallest_passing<T>(
    start: usize,
    cap: usize,
    target: f64,
    mut eval: impl FnMut(usize) -> Result<(f64, T)>,
) -> Result<(usize, f64, T, bool, Vec<(usize, f64)>)> {
    let mut trace = Vec::new();
    let mut run = |k: usize| -> Result<(f64, T)> {
        let (err, extra) = eval(k)?;
        trace.push((k, err));
        Ok((err, extra))
    };
    let mut hi = start.clamp(1, cap);
    let (mut hi_err, mut hi_extra) = run(hi)?;
    let mut lo = 0;
    if hi_err <= target {
        while hi > 1 {
            let next = hi / 2;
            let (e, x) = run(next)?;
            if e <= target {
                (hi, hi_err, hi_extra) = (next, e, x);
            } else {
                lo = next;
                break;
            }
        }
    } else {
        loop {
            if hi == cap {
                return Ok((hi, hi_err, hi_extra, false, trace));
            }
            lo = hi;
            hi = (hi * 2).min(cap);
            (hi_err, hi_extra) = run(hi)?;
            if hi_err <= target {
                break;
            }
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let (e, x) = run(mid)?;
        if e <= target {
            (hi, hi_err, hi_extra) = (mid, e, x);
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_err, hi_extra, true, trace))
}

fn instances(cfg: &SweepConfig, kind: Kind, dim: usize, kappa: f64) -> Result<Vec<ProblemInstance>> {
    (0..cfg.instances)
        .map(|i| make_instance(cfg, kind, dim, kappa, i))
        .collect()
}

fn families(cfg: &SweepConfig, insts: &[ProblemInstance]) -> Result<Vec<HamiltonianFamily>> {
    insts
        .par_iter()
        .map(|inst| Ok(build_family(inst, cfg.p)?))
        .collect()
}

/// Pooled RMS of the walk errors at `steps`.
fn qw_pooled(walks: &[WalkSystem<'_>], steps: usize) -> Result<f64> {
    let errors: Vec<f64> = walks
        .par_iter()
        .map(|w| Ok(w.evolve(steps)?.error))
        .collect::<Result<_>>()?;
    Ok(rms(&errors).unwrap_or(f64::NAN))
}

/// Pooled RMS over all instances and repetitions, plus the mean total time.
fn rm_pooled(solvers: &[(RmSolver<'_>, u64)], q: usize, reps: usize) -> (f64, f64) {
    let stats: Vec<_> = solvers
        .par_iter()
        .map(|(s, seed)| s.stats(q, reps, *seed))
        .collect();
    let errors: Vec<f64> = stats.iter().flat_map(|s| s.errors.iter().copied()).collect();
    let times: Vec<f64> = stats.iter().flat_map(|s| s.total_times.iter().copied()).collect();
    let mean_time = times.iter().sum::<f64>() / times.len() as f64;
    (rms(&errors).unwrap_or(f64::NAN), mean_time)
}

/// Evaluate one cell at a given resource, or auto-tune it when `resource`
/// is `None`.
pub fn fixed_cell(
    cfg: &SweepConfig,
    method: Method,
    kind: Kind,
    dim: usize,
    kappa: f64,
    resource: Option<usize>,
) -> Result<FixedRow> {
    cfg.validate()?;
    let insts = instances(cfg, kind, dim, kappa)?;
    let fams = families(cfg, &insts)?;
    let target = cfg.target_error;
    let row = |resource, mean_cost, rms_error, converged, trace| FixedRow {
        dim,
        kind,
        kappa,
        method,
        resource,
        mean_cost,
        rms_error,
        instances: insts.len(),
        converged,
        trace,
    };
    match method {
        Method::Qw => {
            let walks: Vec<WalkSystem<'_>> = fams
                .iter()
                .map(|f| WalkSystem::new(f, cfg.encoding))
                .collect::<std::result::Result<_, _>>()?;
            let steps_of = |k: usize| cfg.step_start + (k - 1) * cfg.step_increment;
            if let Some(t) = resource {
                let e = qw_pooled(&walks, t)?;
                return Ok(row(t, t as f64, e, e <= target, vec![(t, e)]));
            }
            let cap = (cfg.step_cap.saturating_sub(cfg.step_start) / cfg.step_increment) + 1;
            let (k, e, (), ok, trace) =
                smallest_passing(1, cap, target, |k| Ok((qw_pooled(&walks, steps_of(k))?, ())))?;
            let trace = trace.into_iter().map(|(k, e)| (steps_of(k), e)).collect();
            let t = steps_of(k);
            Ok(row(t, t as f64, e, ok, trace))
        }
        Method::Rm => {
            let solvers: Vec<(RmSolver<'_>, u64)> = fams
                .iter()
                .zip(&insts)
                .map(|(f, inst)| Ok((RmSolver::new(f, cfg.pdf)?.with_gap_model(cfg.gap_model), inst.seed)))
                .collect::<Result<_>>()?;
            let reps = cfg.rm_repetitions;
            if let Some(q) = resource {
                let (e, t) = rm_pooled(&solvers, q, reps);
                return Ok(row(q, t, e, e <= target, vec![(q, e)]));
            }
            let bound = q_lower_bound(kappa, infidelity(target))?;
            let (q, e, t, ok, trace) = smallest_passing(bound / 8, cfg.q_cap, target, |q| {
                Ok(rm_pooled(&solvers, q, reps))
            })?;
            Ok(row(q, t, e, ok, trace))
        }
    }
}

/// Fixed-resource rows for every (dim, kind, κ) of the config.
///
/// `resources`, when given, lists one resource per κ (shared across dims
/// and kinds); otherwise each cell is auto-tuned.
pub fn fixed_steps_table(
    cfg: &SweepConfig,
    method: Method,
    resources: Option<&[usize]>,
) -> Result<Vec<FixedRow>> {
    cfg.validate()?;
    if let Some(r) = resources {
        if r.len() != cfg.kappas.len() {
            return Err(crate::error::BenchError::Config(format!(
                "{} resources for {} kappas",
                r.len(),
                cfg.kappas.len()
            )));
        }
    }
    with_workers(cfg.workers, || {
        let mut rows = Vec::new();
        for &dim in &cfg.dims {
            for &kind in &cfg.kinds {
                for (i, &kappa) in cfg.kappas.iter().enumerate() {
                    let r = fixed_cell(cfg, method, kind, dim, kappa, resources.map(|r| r[i]))?;
                    info!(
                        "fixed {method} {kind} dim {dim} kappa {kappa}: {} (rms {:.4})",
                        r.resource, r.rms_error
                    );
                    rows.push(r);
                }
            }
        }
        Ok(rows)
    })?
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_finds_first_crossing() {
        for start in [1, 3, 17, 64, 500] {
            let (k, e, _, ok, _) =
                smallest_passing(start, 1000, 0.4, |k| Ok((10.0 / k as f64, ()))).unwrap();
            assert!(ok);
            assert_eq!(k, 25, "start {start}");
            assert!(e <= 0.4);
        }
        let (k, _, _, ok, _) = smallest_passing(4, 50, 0.4, |k| Ok((100.0 / k as f64, ()))).unwrap();
        assert!(!ok);
        assert_eq!(k, 50);
        let (k, _, _, ok, _) = smallest_passing(8, 50, 0.4, |_| Ok((0.1, ()))).unwrap();
        assert!(ok);
        assert_eq!(k, 1);
    }

    #[test]
    fn tuned_walk_meets_target_and_previous_point_does_not() {
        let cfg = SweepConfig {
            dims: vec![4],
            kappas: vec![10.0],
            kinds: vec![Kind::Pd],
            instances: 6,
            ..SweepConfig::default()
        };
        let row = fixed_cell(&cfg, Method::Qw, Kind::Pd, 4, 10.0, None).unwrap();
        assert!(row.converged && row.rms_error <= 0.4);
        assert_eq!(row.resource % 4, 0);
        if row.resource > 4 {
            let before = fixed_cell(&cfg, Method::Qw, Kind::Pd, 4, 10.0, Some(row.resource - 4)).unwrap();
            assert!(before.rms_error > 0.4);
        }
        let table = fixed_steps_table(&cfg, Method::Qw, Some(&[row.resource])).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].rms_error, row.rms_error);
    }

    #[test]
    fn tuned_randomized_meets_target() {
        let cfg = SweepConfig {
            dims: vec![4],
            kappas: vec![10.0],
            kinds: vec![Kind::General],
            instances: 3,
            rm_repetitions: 40,
            ..SweepConfig::default()
        };
        let row = fixed_cell(&cfg, Method::Rm, Kind::General, 4, 10.0, None).unwrap();
        assert!(row.converged && row.rms_error <= 0.4);
        assert!(row.mean_cost > 0.0);
        let before = fixed_cell(&cfg, Method::Rm, Kind::General, 4, 10.0, Some(row.resource - 1)).unwrap();
        assert!(before.rms_error > 0.4);
    }
}
