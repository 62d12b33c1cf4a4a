//! Randomized evolution `e^{-i t_q H(v_q)} ... e^{-i t_1 H(v_1)}`.
//!
//! Every `H(v)` has the chiral form `[[0, B], [B^T, 0]]`, so with the SVD
//! `B = U S W^T` a segment acts as independent 2x2 rotations
//! `cos(t s) I - i sin(t s) X` on the coordinates `(U^T x, W^T y)`. The
//! batched engine keeps all repetitions in those coordinates and only pays a
//! basis change `U_{j+1}^T U_j` between segments.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampler::{PdfKind, TimeSampler};
use super::schedule::{q_lower_bound, GapModel, RmSchedule};
use crate::error::{check_range, Result};
use crate::hamiltonian::HamiltonianFamily;
use crate::linalg::chiral_svd;
use crate::qwalk::{error_from_fidelity, postselected_error, ErrorMetric};
use crate::seeds::derive_seed;

/// Default number of repetitions per instance.
pub const DEFAULT_REPETITIONS: usize = 200;
/// Default cap on `q` in [`RmSolver::find_min_q`].
pub const DEFAULT_Q_CAP: usize = 20_000;

/// One randomized evolution.
#[derive(Debug, Clone)]
pub struct RmRun {
    pub q: usize,
    /// Signed segment times `t_1..t_q`.
    pub times: Vec<f64>,
    pub total_time: f64,
    pub state: DVector<Complex<f64>>,
    pub error: f64,
}

/// Statistics over repetitions at a fixed `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmStats {
    pub q: usize,
    pub repetitions: usize,
    pub rms_error: f64,
    pub mean_total_time: f64,
    pub errors: Vec<f64>,
    pub total_times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinQResult {
    pub stats: RmStats,
    pub converged: bool,
    /// Every `(q, rms)` evaluated, in evaluation order.
    pub trace: Vec<(usize, f64)>,
}

/// `delta = Delta^2 - Delta^4 / 4`.
pub fn infidelity_from_error(delta_err: f64) -> f64 {
    delta_err * delta_err - delta_err.powi(4) / 4.0
}

pub struct RmSolver<'a> {
    family: &'a HamiltonianFamily,
    schedule: RmSchedule,
    sampler: &'static TimeSampler,
    target: DVector<f64>,
    system_solution: DVector<f64>,
    metric: ErrorMetric,
    gap_model: GapModel,
}

/// Segment data for one `q`, shared by every repetition.
pub struct RmBatch {
    q: usize,
    gaps: Vec<f64>,
    sigmas: Vec<DVector<f64>>,
    /// `U_{j+1}^T U_j` and `W_{j+1}^T W_j`.
    left_steps: Vec<DMatrix<f64>>,
    right_steps: Vec<DMatrix<f64>>,
    start: DVector<f64>,
    finish: Finish,
}

/// Final readout in the last segment's coordinates.
enum Finish {
    /// Overlap with the target through `U_q^T phi_x` and `W_q^T phi_y`.
    Eigenspace { left: DVector<f64>, right: DVector<f64> },
    /// `U_q`, mapping back to the flag-0 half, and the system solution.
    Postselected { basis: DMatrix<f64>, solution: DVector<f64> },
}

impl<'a> RmSolver<'a> {
    pub fn new(family: &'a HamiltonianFamily, pdf: PdfKind) -> Result<Self> {
        Ok(Self {
            family,
            schedule: RmSchedule::new(family.kappa())?,
            sampler: TimeSampler::shared(pdf),
            target: family.solution_eigenstate()?,
            system_solution: family.system_solution(),
            metric: ErrorMetric::default(),
            gap_model: GapModel::default(),
        })
    }

    pub fn with_gap_model(mut self, model: GapModel) -> Self {
        self.gap_model = model;
        self
    }

    pub fn gap_model(&self) -> GapModel {
        self.gap_model
    }

    pub fn with_metric(mut self, metric: ErrorMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn metric(&self) -> ErrorMetric {
        self.metric
    }

    pub fn schedule(&self) -> &RmSchedule {
        &self.schedule
    }

    pub fn family(&self) -> &HamiltonianFamily {
        self.family
    }

    /// Gap bounds at `v_1..v_q`.
    pub fn gaps(&self, q: usize) -> Vec<f64> {
        self.schedule
            .nodes_f(q)
            .into_iter()
            .map(|f| self.schedule.gap(f, self.family.kind, self.gap_model))
            .collect()
    }

    /// Draw `t_1..t_q`. Repetition streams share their prefix across `q`.
    pub fn sample_times(&self, gaps: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        gaps.iter().map(|&g| self.sampler.sample(g, rng)).collect()
    }

    fn rep_rng(seed: u64, rep: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(&[seed, rep as u64]))
    }

    /// Dense reference evolution with explicit times.
    pub fn evolve_with_times(&self, times: &[f64]) -> RmRun {
        let q = times.len();
        let fs = self.schedule.nodes_f(q.max(1));
        let psi0 = self.family.initial_state();
        let mut re = psi0.clone();
        let mut im = DVector::zeros(psi0.len());
        for (&f, &t) in fs.iter().zip(times) {
            let eig = SymmetricEigen::new(self.family.at_f(f));
            let v = &eig.eigenvectors;
            let cr = v.tr_mul(&re);
            let ci = v.tr_mul(&im);
            let mut nr = cr.clone();
            let mut ni = ci.clone();
            for (k, e) in eig.eigenvalues.iter().enumerate() {
                let (s, c) = (t * e).sin_cos();
                // (cr + i ci)(c - i s)
                nr[k] = c * cr[k] + s * ci[k];
                ni[k] = c * ci[k] - s * cr[k];
            }
            re = v * nr;
            im = v * ni;
        }
        let error = match self.metric {
            ErrorMetric::Eigenspace => {
                error_from_fidelity(self.target.dot(&re).powi(2) + self.target.dot(&im).powi(2))
            }
            ErrorMetric::Postselected => {
                let h = self.family.inner_dim();
                postselected_error(&self.system_solution, re.rows(0, h), Some(im.rows(0, h)))
            }
        };
        let state = re.zip_map(&im, Complex::new);
        RmRun {
            q,
            total_time: times.iter().map(|t| t.abs()).sum(),
            times: times.to_vec(),
            state,
            error,
        }
    }

    /// Dense reference evolution with sampled times.
    pub fn evolve(&self, q: usize, rng: &mut ChaCha8Rng) -> RmRun {
        let times = self.sample_times(&self.gaps(q), rng);
        self.evolve_with_times(&times)
    }

    /// Precompute the segment SVDs for `q`.
    pub fn batch(&self, q: usize) -> RmBatch {
        let fs = self.schedule.nodes_f(q);
        let h = self.family.inner_dim();
        let mut lefts = Vec::with_capacity(q);
        let mut rights = Vec::with_capacity(q);
        let mut sigmas = Vec::with_capacity(q);
        for &f in &fs {
            let (u, s, w) = chiral_svd(&self.family.off_diagonal_block(f));
            lefts.push(u);
            rights.push(w);
            sigmas.push(s);
        }
        let left_steps = lefts.windows(2).map(|w| w[1].tr_mul(&w[0])).collect();
        let right_steps = rights.windows(2).map(|w| w[1].tr_mul(&w[0])).collect();
        let start = lefts[0].tr_mul(self.family.beta());
        let finish = match self.metric {
            ErrorMetric::Eigenspace => Finish::Eigenspace {
                left: lefts[q - 1].tr_mul(&self.target.rows(0, h)),
                right: rights[q - 1].tr_mul(&self.target.rows(h, h)),
            },
            ErrorMetric::Postselected => Finish::Postselected {
                basis: lefts[q - 1].clone(),
                solution: self.system_solution.clone(),
            },
        };
        RmBatch {
            q,
            gaps: fs.iter().map(|&f| self.schedule.gap(f, self.family.kind, self.gap_model)).collect(),
            sigmas,
            left_steps,
            right_steps,
            start,
            finish,
        }
    }

    /// RMS error and mean total time over `repetitions` at `q`.
    pub fn stats(&self, q: usize, repetitions: usize, seed: u64) -> RmStats {
        let batch = self.batch(q);
        let times: Vec<Vec<f64>> = (0..repetitions)
            .map(|r| self.sample_times(&batch.gaps, &mut Self::rep_rng(seed, r)))
            .collect();
        let errors = batch.errors(&times);
        let total_times: Vec<f64> = times
            .iter()
            .map(|ts| ts.iter().map(|t| t.abs()).sum())
            .collect();
        RmStats {
            q,
            repetitions,
            rms_error: rms(&errors),
            mean_total_time: total_times.iter().sum::<f64>() / repetitions as f64,
            errors,
            total_times,
        }
    }

    /// Smallest `q` whose RMS error over `repetitions` is at most `target`.
    ///
    /// Doubling from the analytic bound's neighbourhood brackets the
    /// crossing, then bisection assumes the RMS decreases in `q` (it does
    /// on average; common random numbers keep the curve smooth).
    pub fn find_min_q(
        &self,
        target: f64,
        repetitions: usize,
        seed: u64,
        cap: usize,
    ) -> Result<MinQResult> {
        check_range(
            "target error",
            target,
            "(0, sqrt 2)",
            target > 0.0 && target < std::f64::consts::SQRT_2,
        )?;
        check_range("repetitions", repetitions as f64, "[1, inf)", repetitions >= 1)?;
        let mut trace = Vec::new();
        let eval = |q: usize, trace: &mut Vec<(usize, f64)>| {
            let s = self.stats(q, repetitions, seed);
            trace.push((q, s.rms_error));
            s
        };
        let bound = q_lower_bound(self.schedule.kappa, infidelity_from_error(target))?;
        let mut hi = (bound / 8).clamp(1, cap);
        let mut hi_stats = eval(hi, &mut trace);
        let mut lo = 0;
        if hi_stats.rms_error <= target {
            // walk down to bracket from below
            while hi > 1 {
                let next = hi / 2;
                let s = eval(next, &mut trace);
                if s.rms_error <= target {
                    hi = next;
                    hi_stats = s;
                } else {
                    lo = next;
                    break;
                }
            }
        } else {
            loop {
                if hi == cap {
                    return Ok(MinQResult {
                        stats: hi_stats,
                        converged: false,
                        trace,
                    });
                }
                lo = hi;
                hi = (hi * 2).min(cap);
                hi_stats = eval(hi, &mut trace);
                if hi_stats.rms_error <= target {
                    break;
                }
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let s = eval(mid, &mut trace);
            if s.rms_error <= target {
                hi = mid;
                hi_stats = s;
            } else {
                lo = mid;
            }
        }
        Ok(MinQResult {
            stats: hi_stats,
            converged: true,
            trace,
        })
    }
}

impl RmBatch {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Final errors for each row of `times` (one row per repetition).
    pub fn errors(&self, times: &[Vec<f64>]) -> Vec<f64> {
        let reps = times.len();
        let h = self.start.len();
        // columns [0, reps) hold real parts, [reps, 2 reps) imaginary parts
        let mut a = DMatrix::<f64>::zeros(h, 2 * reps);
        let mut c = DMatrix::<f64>::zeros(h, 2 * reps);
        for r in 0..reps {
            a.set_column(r, &self.start);
        }
        let mut scratch = DMatrix::<f64>::zeros(h, 2 * reps);
        for j in 0..self.q {
            let sig = self.sigmas[j].as_slice();
            {
                let (asl, csl) = (a.as_mut_slice(), c.as_mut_slice());
                for (r, row) in times.iter().enumerate() {
                    let t = row[j];
                    let (re, im) = (r * h, (reps + r) * h);
                    for k in 0..h {
                        let (sn, cs) = (t * sig[k]).sin_cos();
                        let (ar, ai, cr, ci) = (asl[re + k], asl[im + k], csl[re + k], csl[im + k]);
                        // a' = cos a - i sin c, c' = -i sin a + cos c
                        asl[re + k] = cs * ar + sn * ci;
                        asl[im + k] = cs * ai - sn * cr;
                        csl[re + k] = cs * cr + sn * ai;
                        csl[im + k] = cs * ci - sn * ar;
                    }
                }
            }
            if j + 1 < self.q {
                scratch.gemm(1.0, &self.left_steps[j], &a, 0.0);
                std::mem::swap(&mut a, &mut scratch);
                scratch.gemm(1.0, &self.right_steps[j], &c, 0.0);
                std::mem::swap(&mut c, &mut scratch);
            }
        }
        match &self.finish {
            Finish::Eigenspace { left, right } => {
                let ov_a = a.tr_mul(left);
                let ov_c = c.tr_mul(right);
                (0..reps)
                    .map(|r| {
                        let re = ov_a[r] + ov_c[r];
                        let im = ov_a[reps + r] + ov_c[reps + r];
                        error_from_fidelity(re * re + im * im)
                    })
                    .collect()
            }
            Finish::Postselected { basis, solution } => {
                let x = basis * &a;
                (0..reps)
                    .map(|r| postselected_error(solution, x.column(r), Some(x.column(reps + r))))
                    .collect()
            }
        }
    }
}

/// `sqrt(mean(x^2))`.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_family, DEFAULT_P};
    use crate::problemgen::{gen_general, gen_pd};

    #[test]
    fn zero_times_leave_initial_error() {
        let fam = build_family(&gen_pd(4, 10.0, 1).unwrap(), DEFAULT_P).unwrap();
        let solver = RmSolver::new(&fam, PdfKind::Jlpss)
            .unwrap()
            .with_metric(ErrorMetric::Eigenspace);
        let run = solver.evolve_with_times(&[0.0; 7]);
        let phi = fam.solution_eigenstate().unwrap();
        let expected = error_from_fidelity(phi.dot(&fam.initial_state()).powi(2));
        assert!((run.error - expected).abs() < 1e-12);
        assert_eq!(run.total_time, 0.0);
    }

    #[test]
    fn segments_are_unitary_and_conserve_energy() {
        let fam = build_family(&gen_general(4, 10.0, 2).unwrap(), DEFAULT_P).unwrap();
        let solver = RmSolver::new(&fam, PdfKind::Jlpss).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let run = solver.evolve(30, &mut rng);
        assert!((run.state.norm() - 1.0).abs() < 1e-10);
        // single segment: <H^2> is invariant
        let f = solver.schedule().nodes_f(1)[0];
        let h = fam.at_f(f);
        let psi0 = fam.initial_state();
        let one = solver.evolve_with_times(&[3.7]);
        let hc = h.map(|v| Complex::new(v, 0.0));
        let before = (&h * &psi0).norm();
        let after = (&hc * &one.state).norm();
        assert!((before - after).abs() < 1e-10);
    }

    #[test]
    fn batched_engine_matches_reference() {
        let cases = [
            (gen_pd(4, 10.0, 3).unwrap(), ErrorMetric::Postselected),
            (gen_general(4, 20.0, 4).unwrap(), ErrorMetric::Postselected),
            (gen_pd(4, 10.0, 3).unwrap(), ErrorMetric::Eigenspace),
            (gen_general(4, 20.0, 4).unwrap(), ErrorMetric::Eigenspace),
        ];
        for (inst, metric) in cases {
            let fam = build_family(&inst, DEFAULT_P).unwrap();
            let solver = RmSolver::new(&fam, PdfKind::Jlpss).unwrap().with_metric(metric);
            let q = 25;
            let batch = solver.batch(q);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let times: Vec<Vec<f64>> = (0..6).map(|_| solver.sample_times(batch.gaps(), &mut rng)).collect();
            let fast = batch.errors(&times);
            for (row, e) in times.iter().zip(&fast) {
                let slow = solver.evolve_with_times(row).error;
                assert!((slow - e).abs() < 1e-9, "{slow} vs {e}");
            }
        }
    }

    #[test]
    fn identity_matrix_needs_one_segment() {
        let fam = build_family(&gen_pd(4, 1.0, 6).unwrap(), DEFAULT_P).unwrap();
        let solver = RmSolver::new(&fam, PdfKind::Jlpss).unwrap();
        let m = solver.find_min_q(0.4, 20, 1, 100).unwrap();
        assert!(m.converged);
        assert_eq!(m.stats.q, 1);
        assert!(m.stats.rms_error < 1e-10);
    }

    #[test]
    fn rms_error_falls_with_q() {
        let fam = build_family(&gen_general(4, 10.0, 8).unwrap(), DEFAULT_P).unwrap();
        let solver = RmSolver::new(&fam, PdfKind::Jlpss).unwrap();
        let qs: Vec<usize> = (1..=12).map(|k| 5 * k).collect();
        let rms: Vec<f64> = qs.iter().map(|&q| solver.stats(q, 100, 9).rms_error).collect();
        assert!(spearman(&qs.iter().map(|&q| q as f64).collect::<Vec<_>>(), &rms) < -0.9, "{rms:?}");
        let m = solver.find_min_q(0.4, 100, 9, 2000).unwrap();
        assert!(m.converged);
        assert!(m.stats.rms_error <= 0.4);
        let below = solver.stats(m.stats.q - 1, 100, 9);
        assert!(below.rms_error > 0.4 || m.stats.q == 1);
    }

    fn spearman(x: &[f64], y: &[f64]) -> f64 {
        fn ranks(v: &[f64]) -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            let mut r = vec![0.0; v.len()];
            for (rank, &i) in idx.iter().enumerate() {
                r[i] = rank as f64;
            }
            r
        }
        let (rx, ry) = (ranks(x), ranks(y));
        let n = x.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn stats_are_reproducible() {
        let fam = build_family(&gen_pd(4, 10.0, 1).unwrap(), DEFAULT_P).unwrap();
        let solver = RmSolver::new(&fam, PdfKind::Jlpss).unwrap();
        assert_eq!(solver.stats(10, 20, 3), solver.stats(10, 20, 3));
        let s = solver.stats(10, 20, 3);
        assert!((s.rms_error - rms(&s.errors)).abs() < 1e-15);
    }
}
