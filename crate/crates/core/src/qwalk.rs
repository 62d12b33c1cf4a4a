//! Qubitized walk operators and the discrete adiabatic evolution.
//!
//! Circuit-mode register layout (most significant first):
//! `a_1 (x) a_2 (x) a (x) [Hamiltonian register]`, so a state is eight
//! consecutive blocks of length `D = dim H`, block index `4 a_1 + 2 a_2 + a`.
//! The Hamiltonian register is `a_h (x) system` (PD) or
//! `a_h2 (x) a_h1 (x) system` (general); its top qubit is the flag.
//!
//! The block encoding is the palindrome `V CR SEL CR V`:
//!
//! * `V` is `CU_Qb` conjugated by Hadamards on `a_2`; its `a_2 = 0` block is
//!   `|0><0|_flag (x) I + |1><1|_flag (x) Q`.
//! * `CR` applies `R(s)` to `a_1` when the flag is 0 and a Hadamard otherwise.
//! * `SEL` applies `X_flag (x) Z` when `a_1 = 0` and
//!   `|0><1|_flag (x) U + |1><0|_flag (x) U^T` when `a_1 = 1`, with `U` the
//!   one-ancilla dilation of `A` (PD) or of `[[0, A], [A^T, 0]]` (general).
//!
//! Each factor is a real symmetric involution, hence so is the product, and
//! the walk `(2 Pi_0 - I) U` reflects about `|0>` on `a_1 a_2 a`.
//! Amplitudes stay real throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::hamiltonian::HamiltonianFamily;
use crate::linalg::psd_sqrt;
use crate::problemgen::Kind;

/// Residual above which a constructed block encoding is rejected.
pub const BLOCK_TOLERANCE: f64 = 1e-8;
/// Default cap on the total step count in [`WalkSystem::find_min_steps`].
pub const DEFAULT_STEP_CAP: usize = 1_000_000;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    /// The explicit ancilla circuit, subnormalization `sqrt(2[(1-f)^2 + f^2])`.
    Circuit,
    /// Single-ancilla dilation `[[H, sqrt(I - H^2)], [sqrt(I - H^2), -H]]`.
    Canonical,
}

/// How the distance to the ideal state is measured (shared with the
/// randomized method).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    /// Postselect the walk ancillas and the Hamiltonian flag qubit on `|0>`
    /// and compare the normalized linear-system register with the solution
    /// of the Hermitian-form system.
    #[default]
    Postselected,
    /// Projection of the full state onto the target eigenspace: the H(1)
    /// null vector for evolutions on the Hamiltonian register, the plane
    /// `span{phi, W(1) phi}` for walks.
    Eigenspace,
}

/// `|<x, psi>|^2 / |psi|^2` for a register block `psi = re + i im`.
pub fn postselected_fidelity(
    x: &DVector<f64>,
    re: nalgebra::DVectorView<'_, f64>,
    im: Option<nalgebra::DVectorView<'_, f64>>,
) -> f64 {
    let mut norm2 = re.norm_squared();
    let ov_r = x.dot(&re);
    let mut ov_i = 0.0;
    if let Some(im) = im {
        norm2 += im.norm_squared();
        ov_i = x.dot(&im);
    }
    if norm2 < 1e-300 {
        return 0.0;
    }
    (ov_r * ov_r + ov_i * ov_i) / norm2
}

/// `min_theta || e^{i theta} psi / |psi| - x ||`, evaluated as a difference
/// norm so that nearly exact states resolve below `sqrt(eps)`.
pub fn postselected_error(
    x: &DVector<f64>,
    re: nalgebra::DVectorView<'_, f64>,
    im: Option<nalgebra::DVectorView<'_, f64>>,
) -> f64 {
    let mut norm2 = re.norm_squared();
    let ov_r = x.dot(&re);
    let mut ov_i = 0.0;
    if let Some(im) = &im {
        norm2 += im.norm_squared();
        ov_i = x.dot(im);
    }
    let ov = (ov_r * ov_r + ov_i * ov_i).sqrt();
    if norm2 < 1e-300 || ov == 0.0 {
        return std::f64::consts::SQRT_2;
    }
    // multiply psi by conj(ov)/|ov| / |psi| so the overlap is real positive
    let scale = 1.0 / (ov * norm2.sqrt());
    let (cr, ci) = (ov_r * scale, -ov_i * scale);
    let mut d2 = 0.0;
    for k in 0..x.len() {
        let (pr, pi) = (re[k], im.as_ref().map_or(0.0, |v| v[k]));
        let dr = pr * cr - pi * ci - x[k];
        let di = pr * ci + pi * cr;
        d2 += dr * dr + di * di;
    }
    d2.sqrt()
}

/// `Delta = sqrt(2 - 2 sqrt(F))`.
pub fn error_from_fidelity(fidelity: f64) -> f64 {
    (2.0 - 2.0 * fidelity.clamp(0.0, 1.0).sqrt()).max(0.0).sqrt()
}

/// Orthonormal basis of the target subspace on the walk register.
#[derive(Debug, Clone)]
pub struct TargetSpace {
    pub basis: Vec<DVector<f64>>,
}

impl TargetSpace {
    /// Squared norm of the projection of `psi`.
    pub fn fidelity(&self, psi: &DVector<f64>) -> f64 {
        self.basis.iter().map(|v| v.dot(psi).powi(2)).sum()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        let n = self.basis[0].len();
        self.basis
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, v| acc + v * v.transpose())
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub state: DVector<f64>,
    pub steps: usize,
    pub error: f64,
    /// Fidelity with the ideal state after each step, when requested.
    pub trace: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MinStepsResult {
    /// Evolution at the last step count tried.
    pub result: EvolutionResult,
    pub converged: bool,
    /// Every `(T, Delta)` pair evaluated.
    pub trace: Vec<(usize, f64)>,
}

struct Scratch {
    input: DVector<f64>,
    output: DVector<f64>,
}

pub struct WalkSystem<'a> {
    family: &'a HamiltonianFamily,
    mode: EncodingMode,
    /// Circuit mode: dilation `U` on `(a, inner)` and its transpose.
    sel: DMatrix<f64>,
    sel_t: DMatrix<f64>,
    metric: ErrorMetric,
    system_solution: DVector<f64>,
    target: Option<TargetSpace>,
}

/// `[[A, sqrt(I - A A^T)], [sqrt(I - A^T A), -A^T]]`.
pub fn unitary_dilation(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let top = psd_sqrt(&(&id - a * a.transpose()));
    let bottom = psd_sqrt(&(&id - a.transpose() * a));
    crate::linalg::block2(a, &top, &bottom, &(-a.transpose()))
}

impl<'a> WalkSystem<'a> {
    pub fn new(family: &'a HamiltonianFamily, mode: EncodingMode) -> Result<Self> {
        let sel = match (mode, family.kind) {
            (EncodingMode::Canonical, _) => DMatrix::zeros(0, 0),
            (EncodingMode::Circuit, Kind::Pd) => unitary_dilation(&family.instance.matrix),
            (EncodingMode::Circuit, Kind::General) => {
                general_select_unitary(&unitary_dilation(&family.instance.matrix))
            }
        };
        let sel_t = sel.transpose();
        let mut sys = Self {
            family,
            mode,
            sel,
            sel_t,
            metric: ErrorMetric::default(),
            system_solution: family.system_solution(),
            target: None,
        };
        sys.target = Some(sys.build_target()?);
        Ok(sys)
    }

    pub fn family(&self) -> &HamiltonianFamily {
        self.family
    }

    pub fn mode(&self) -> EncodingMode {
        self.mode
    }

    pub fn with_metric(mut self, metric: ErrorMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn metric(&self) -> ErrorMetric {
        self.metric
    }

    /// Fidelity of a walk state with the ideal state under the active metric.
    pub fn fidelity(&self, psi: &DVector<f64>) -> f64 {
        let target = self.target();
        match self.metric {
            ErrorMetric::Eigenspace => target.fidelity(psi),
            ErrorMetric::Postselected => postselected_fidelity(
                &self.system_solution,
                psi.rows(0, self.family.inner_dim()),
                None,
            ),
        }
    }

    /// `Delta` of a walk state under the active metric.
    pub fn error(&self, psi: &DVector<f64>) -> f64 {
        match self.metric {
            ErrorMetric::Eigenspace => error_from_fidelity(self.fidelity(psi)),
            ErrorMetric::Postselected => postselected_error(
                &self.system_solution,
                psi.rows(0, self.family.inner_dim()),
                None,
            ),
        }
    }

    /// Number of ancilla basis states (8 in circuit mode, 2 canonical).
    pub fn ancilla_states(&self) -> usize {
        match self.mode {
            EncodingMode::Circuit => 8,
            EncodingMode::Canonical => 2,
        }
    }

    /// Dimension of the full walk register.
    pub fn dim(&self) -> usize {
        self.ancilla_states() * self.family.dim()
    }

    /// `lambda(s)`, the factor dividing `H(s)` in the encoded block.
    pub fn subnormalization(&self, s: f64) -> Result<f64> {
        let f = self.family.schedule.f(s)?;
        Ok(self.subnormalization_at_f(f))
    }

    fn subnormalization_at_f(&self, f: f64) -> f64 {
        match self.mode {
            EncodingMode::Circuit => (2.0 * ((1.0 - f).powi(2) + f * f)).sqrt(),
            EncodingMode::Canonical => 1.0,
        }
    }

    /// `|0>_anc (x) h`.
    pub fn embed(&self, h: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v.rows_mut(0, h.len()).copy_from(h);
        v
    }

    pub fn target(&self) -> &TargetSpace {
        self.target.as_ref().expect("target built in constructor")
    }

    /// Dense block-encoding unitary at `s`, verified against `H(s)/lambda(s)`.
    pub fn block_encoding(&self, s: f64) -> Result<DMatrix<f64>> {
        let f = self.family.schedule.f(s)?;
        let u = match self.mode {
            EncodingMode::Circuit => self.dense_from(|psi, scratch| self.apply_u(f, psi, scratch)),
            EncodingMode::Canonical => self.canonical_u(f),
        };
        let d = self.family.dim();
        let expected = self.family.at_f(f) / self.subnormalization_at_f(f);
        let residual = (u.view((0, 0), (d, d)) - expected).amax();
        if residual > BLOCK_TOLERANCE {
            return Err(Error::BlockEncoding(residual));
        }
        Ok(u)
    }

    /// Dense walk operator `W(s) = (2 Pi_0 - I) U(s)`.
    pub fn walk_operator(&self, s: f64) -> Result<DMatrix<f64>> {
        let mut u = self.block_encoding(s)?;
        let d = self.family.dim();
        let rows = u.nrows();
        u.rows_mut(d, rows - d).neg_mut();
        Ok(u)
    }

    fn dense_from(&self, apply: impl Fn(&mut DVector<f64>, &mut Scratch)) -> DMatrix<f64> {
        let n = self.dim();
        let mut scratch = self.scratch();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            apply(&mut e, &mut scratch);
            out.set_column(j, &e);
        }
        out
    }

    fn scratch(&self) -> Scratch {
        let m = 2 * self.family.inner_dim();
        Scratch {
            input: DVector::zeros(m),
            output: DVector::zeros(m),
        }
    }

    fn canonical_u(&self, f: f64) -> DMatrix<f64> {
        let h = self.family.at_f(f);
        let d = h.nrows();
        let s = psd_sqrt(&(DMatrix::identity(d, d) - &h * &h));
        crate::linalg::block2(&h, &s, &s, &(-&h))
    }

    /// Apply `W(f)` in place.
    fn apply_walk(&self, f: f64, psi: &mut DVector<f64>, scratch: &mut Scratch) {
        match self.mode {
            EncodingMode::Circuit => {
                self.apply_u(f, psi, scratch);
                let d = self.family.dim();
                let n = psi.len();
                psi.rows_mut(d, n - d).neg_mut();
            }
            EncodingMode::Canonical => {
                let mut w = self.canonical_u(f);
                let d = self.family.dim();
                w.rows_mut(d, d).neg_mut();
                *psi = w * &*psi;
            }
        }
    }

    fn apply_u(&self, f: f64, psi: &mut DVector<f64>, scratch: &mut Scratch) {
        let norm = ((1.0 - f).powi(2) + f * f).sqrt();
        let (c0, c1) = ((1.0 - f) / norm, f / norm);
        let buf = psi.as_mut_slice();
        self.apply_v(buf);
        self.apply_cr(buf, c0, c1);
        self.apply_sel(buf, scratch);
        self.apply_cr(buf, c0, c1);
        self.apply_v(buf);
    }

    fn block_offset(&self, a1: usize, a2: usize, a: usize) -> usize {
        (4 * a1 + 2 * a2 + a) * self.family.dim()
    }

    /// `H_{a2} G H_{a2}` where `G` reflects about `beta` on flag-1 entries
    /// of the `a_2 = 1` blocks.
    fn apply_v(&self, psi: &mut [f64]) {
        let h = self.family.inner_dim();
        let beta = self.family.beta().as_slice();
        for a1 in 0..2 {
            for a in 0..2 {
                let i0 = self.block_offset(a1, 0, a) + h;
                let i1 = self.block_offset(a1, 1, a) + h;
                let c: f64 = (0..h).map(|k| beta[k] * (psi[i0 + k] - psi[i1 + k])).sum();
                for k in 0..h {
                    psi[i0 + k] -= c * beta[k];
                    psi[i1 + k] += c * beta[k];
                }
            }
        }
    }

    fn apply_cr(&self, psi: &mut [f64], c0: f64, c1: f64) {
        let d = self.family.dim();
        let h = self.family.inner_dim();
        for a2 in 0..2 {
            for a in 0..2 {
                let j0 = self.block_offset(0, a2, a);
                let j1 = self.block_offset(1, a2, a);
                for k in 0..d {
                    let (x0, x1) = (psi[j0 + k], psi[j1 + k]);
                    if k < h {
                        psi[j0 + k] = c0 * x0 + c1 * x1;
                        psi[j1 + k] = c1 * x0 - c0 * x1;
                    } else {
                        psi[j0 + k] = FRAC_1_SQRT_2 * (x0 + x1);
                        psi[j1 + k] = FRAC_1_SQRT_2 * (x0 - x1);
                    }
                }
            }
        }
    }

    fn apply_sel(&self, psi: &mut [f64], scratch: &mut Scratch) {
        let h = self.family.inner_dim();
        let z = self.family.z_diag().as_slice();
        for a2 in 0..2 {
            for a in 0..2 {
                let o = self.block_offset(0, a2, a);
                for k in 0..h {
                    let (lo, hi) = (psi[o + k], psi[o + h + k]);
                    psi[o + k] = z[k] * hi;
                    psi[o + h + k] = z[k] * lo;
                }
            }
        }
        let Scratch { input, output } = scratch;
        for a2 in 0..2 {
            let k0 = self.block_offset(1, a2, 0);
            let k1 = self.block_offset(1, a2, 1);
            // flag 1 -> flag 0 through U
            input.as_mut_slice()[..h].copy_from_slice(&psi[k0 + h..k0 + 2 * h]);
            input.as_mut_slice()[h..].copy_from_slice(&psi[k1 + h..k1 + 2 * h]);
            output.gemv(1.0, &self.sel, input, 0.0);
            // flag 0 -> flag 1 through U^T
            input.as_mut_slice()[..h].copy_from_slice(&psi[k0..k0 + h]);
            input.as_mut_slice()[h..].copy_from_slice(&psi[k1..k1 + h]);
            psi[k0..k0 + h].copy_from_slice(&output.as_slice()[..h]);
            psi[k1..k1 + h].copy_from_slice(&output.as_slice()[h..]);
            output.gemv(1.0, &self.sel_t, input, 0.0);
            psi[k0 + h..k0 + 2 * h].copy_from_slice(&output.as_slice()[..h]);
            psi[k1 + h..k1 + 2 * h].copy_from_slice(&output.as_slice()[h..]);
        }
    }

    /// Span of `|phi>` and `W(1)|phi>`, with `|phi> = |0>_anc |x_H>` and
    /// `|x_H>` the `H(1)` null vector closest to the embedded solution.
    fn build_target(&self) -> Result<TargetSpace> {
        let phi = self.embed(&self.family.solution_eigenstate()?);
        let mut w = phi.clone();
        let mut scratch = self.scratch();
        self.apply_walk(1.0, &mut w, &mut scratch);
        w -= &phi * phi.dot(&w);
        let norm = w.norm();
        let mut basis = vec![phi];
        if norm > 1e-10 {
            basis.push(w / norm);
        }
        Ok(TargetSpace { basis })
    }

    /// `prod_{n=1..T} W(n/T)` applied to `|0>_anc |initial>`.
    pub fn evolve(&self, steps: usize) -> Result<EvolutionResult> {
        self.run(steps, false)
    }

    /// As [`Self::evolve`], recording the target fidelity after every step.
    pub fn evolve_traced(&self, steps: usize) -> Result<EvolutionResult> {
        self.run(steps, true)
    }

    fn run(&self, steps: usize, traced: bool) -> Result<EvolutionResult> {
        if steps == 0 {
            return Err(Error::OutOfRange {
                name: "T",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        let mut psi = self.embed(&self.family.initial_state());
        let mut scratch = self.scratch();
        let mut trace = traced.then(|| Vec::with_capacity(steps));
        let t = steps as f64;
        for n in 1..=steps {
            let f = self.family.schedule.value(n as f64 / t);
            self.apply_walk(f, &mut psi, &mut scratch);
            if let Some(tr) = trace.as_mut() {
                tr.push(self.fidelity(&psi));
            }
        }
        let error = self.error(&psi);
        Ok(EvolutionResult {
            state: psi,
            steps,
            error,
            trace,
        })
    }

    /// Smallest `T` on the grid `t0, t0 + increment, ...` reaching
    /// `Delta <= target`, giving up past `cap`.
    pub fn find_min_steps(
        &self,
        target: f64,
        t0: usize,
        increment: usize,
        cap: usize,
    ) -> Result<MinStepsResult> {
        check_range(
            "target error",
            target,
            "(0, sqrt 2)",
            target > 0.0 && target < std::f64::consts::SQRT_2,
        )?;
        let t0 = t0.max(1);
        let increment = increment.max(1);
        let mut trace = Vec::new();
        let mut steps = t0;
        loop {
            let result = self.evolve(steps)?;
            trace.push((steps, result.error));
            if result.error <= target {
                return Ok(MinStepsResult {
                    result,
                    converged: true,
                    trace,
                });
            }
            if steps + increment > cap {
                return Ok(MinStepsResult {
                    result,
                    converged: false,
                    trace,
                });
            }
            steps += increment;
        }
    }
}

/// `|0><1|_{h1} (x) U_A + |1><0|_{h1} (x) U_A^T` on `(a, h1, system)`.
fn general_select_unitary(ua: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ua.nrows() / 2;
    let idx = |a: usize, h1: usize, i: usize| a * 2 * n + h1 * n + i;
    let mut out = DMatrix::zeros(4 * n, 4 * n);
    for ap in 0..2 {
        for a in 0..2 {
            for i in 0..n {
                for j in 0..n {
                    let v = ua[(ap * n + i, a * n + j)];
                    out[(idx(ap, 0, i), idx(a, 1, j))] = v;
                    // transpose block: (U^T)[(ap,i),(a,j)] = U[(a,j),(ap,i)]
                    out[(idx(ap, 1, i), idx(a, 0, j))] = ua[(a * n + j, ap * n + i)];
                }
            }
        }
    }
    out
}

/// Eigenphases of a real orthogonal matrix in `[-pi, pi]`.
///
/// `W` is normal, so its symmetric part `(W + W^T)/2` carries `cos θ` and
/// the antisymmetric part, restricted to each cosine eigenspace, carries
/// `|sin θ|` as paired singular values. Unlike a general Schur iteration
/// this cannot stall on clustered spectra.
pub fn eigenphases(w: &DMatrix<f64>) -> Vec<f64> {
    let sym = (w + w.transpose()) * 0.5;
    let anti = (w - w.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let mut phases = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        // group numerically coincident cosines; inside a group the
        // eigenvectors are arbitrary, so read sines from the restriction
        let mut end = start + 1;
        while end < order.len()
            && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] < 1e-9
        {
            end += 1;
        }
        let cols: Vec<_> = order[start..end].iter().map(|&k| eig.eigenvectors.column(k)).collect();
        let basis = DMatrix::from_columns(&cols);
        let cos = order[start..end].iter().map(|&k| eig.eigenvalues[k]).sum::<f64>() / cols.len() as f64;
        let restricted = basis.transpose() * &anti * &basis;
        let mut sines: Vec<f64> = restricted.singular_values().iter().copied().collect();
        sines.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut k = 0;
        while k < sines.len() {
            if k + 1 < sines.len() && sines[k] > 1e-13 {
                let t = (0.5 * (sines[k] + sines[k + 1])).atan2(cos);
                phases.extend([t, -t]);
                k += 2;
            } else {
                phases.push(if cos >= 0.0 { 0.0 } else { std::f64::consts::PI });
                k += 1;
            }
        }
        start = end;
    }
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    phases
}

/// Spectrum of `H` as sorted eigenvalues.
pub fn sorted_spectrum(h: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}
