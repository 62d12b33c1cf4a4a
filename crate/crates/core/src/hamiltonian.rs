//! Interpolating Hamiltonians, the gap-adapted schedule and reference
//! solutions.
//!
//! Every Hamiltonian here has the block form `[[0, B], [B^T, 0]]` with
//! `B(f) = M(f) Q`, where `Q = I - |beta><beta|` and
//! `M(f) = (1 - f) Z + f A_in`:
//!
//! * PD: `Z = I_N`, `A_in = A`, `beta = b`;
//! * general: `Z = sigma_z (x) I_N`, `A_in = [[0, A], [A^T, 0]]`,
//!   `beta = |0, b>`.
//!
//! The top qubit of the Hamiltonian register (the "flag") is `a_h` for PD
//! and `a_h2` for general instances.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_range, Error, Result};
use crate::linalg::{asymmetry, block2, null_space_sym, outer};
use crate::problemgen::{Kind, ProblemInstance};

/// Default schedule exponent.
pub const DEFAULT_P: f64 = 1.4;

/// Gap-adapted schedule `f(s)` solving `f' = d_p * gap(f)^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub p: f64,
    pub kappa: f64,
    pub d_p: f64,
}

impl Schedule {
    pub fn new(kappa: f64, p: f64) -> Result<Self> {
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::InvalidKappa(kappa));
        }
        check_range("p", p, "(0, inf) \\ {1}", p > 0.0 && p != 1.0)?;
        let d_p = if kappa == 1.0 {
            1.0
        } else {
            kappa * (kappa.powf(p - 1.0) - 1.0) / ((kappa - 1.0) * (p - 1.0))
        };
        Ok(Self { p, kappa, d_p })
    }

    /// `f(s)`; `kappa = 1` degenerates to `f(s) = s`.
    pub fn f(&self, s: f64) -> Result<f64> {
        check_range("s", s, "[0, 1]", (0.0..=1.0).contains(&s))?;
        Ok(self.value(s))
    }

    pub(crate) fn value(&self, s: f64) -> f64 {
        let k = self.kappa;
        if k == 1.0 {
            return s;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let p = self.p;
        let w = 1.0 + s * (k.powf(p - 1.0) - 1.0);
        k / (k - 1.0) * (1.0 - w.powf(1.0 / (1.0 - p)))
    }

    /// Analytic `f'(s)`.
    pub fn derivative(&self, s: f64) -> Result<f64> {
        let f = self.f(s)?;
        Ok(self.d_p * pd_gap(f, self.kappa).powf(self.p))
    }

    /// PD gap lower bound along the schedule.
    pub fn gap(&self, s: f64) -> Result<f64> {
        Ok(pd_gap(self.f(s)?, self.kappa))
    }

    /// Gaps at `s`, `s + 1/T`, `s + 2/T`, clamping arguments at 1.
    pub fn discrete_gaps(&self, s: f64, steps: usize) -> Result<[f64; 3]> {
        check_range("s", s, "[0, 1]", (0.0..=1.0).contains(&s))?;
        let t = steps.max(1) as f64;
        Ok([0.0, 1.0, 2.0].map(|k| pd_gap(self.value((s + k / t).min(1.0)), self.kappa)))
    }
}

fn pd_gap(f: f64, kappa: f64) -> f64 {
    1.0 - f + f / kappa
}

/// Lower bound on the gap of `H` at schedule value `f`.
///
/// PD: `1 - f + f/kappa`; general: the same divided by sqrt(2).
pub fn gap_lower_bound(f: f64, kappa: f64, kind: Kind) -> f64 {
    match kind {
        Kind::Pd => pd_gap(f, kappa),
        Kind::General => pd_gap(f, kappa) / std::f64::consts::SQRT_2,
    }
}

/// `A^-1 b / ||A^-1 b||` by LU.
pub fn ideal_solution(inst: &ProblemInstance) -> Result<DVector<f64>> {
    let x = inst
        .matrix
        .clone()
        .lu()
        .solve(&inst.rhs)
        .ok_or(Error::Singular(0.0))?;
    let n = x.norm();
    if !n.is_finite() || n == 0.0 {
        return Err(Error::Singular(0.0));
    }
    Ok(x / n)
}

#[derive(Debug, Clone)]
pub struct HamiltonianFamily {
    pub kind: Kind,
    pub schedule: Schedule,
    pub instance: ProblemInstance,
    z_diag: DVector<f64>,
    a_in: DMatrix<f64>,
    beta: DVector<f64>,
    solution: DVector<f64>,
}

/// Symmetric positive definite family on `a_h (x) system` (dimension 2N).
pub fn build_pd_family(inst: &ProblemInstance, p: f64) -> Result<HamiltonianFamily> {
    if inst.kind != Kind::Pd {
        return Err(Error::WrongKind { expected: "pd" });
    }
    let asym = asymmetry(&inst.matrix);
    if asym > 1e-12 * inst.matrix.amax() {
        return Err(Error::NotSymmetric(asym));
    }
    let n = inst.dim();
    let solution = ideal_solution(inst)?;
    Ok(HamiltonianFamily {
        kind: Kind::Pd,
        schedule: Schedule::new(inst.kappa, p)?,
        instance: inst.clone(),
        z_diag: DVector::from_element(n, 1.0),
        a_in: inst.matrix.clone(),
        beta: inst.rhs.clone(),
        solution,
    })
}

/// General family on `a_h2 (x) a_h1 (x) system` (dimension 4N).
pub fn build_general_family(inst: &ProblemInstance, p: f64) -> Result<HamiltonianFamily> {
    let n = inst.dim();
    let zero = DMatrix::zeros(n, n);
    let a_in = block2(&zero, &inst.matrix, &inst.matrix.transpose(), &zero);
    let z_diag = DVector::from_fn(2 * n, |i, _| if i < n { 1.0 } else { -1.0 });
    let mut beta = DVector::zeros(2 * n);
    beta.rows_mut(0, n).copy_from(&inst.rhs);
    let solution = ideal_solution(inst)?;
    Ok(HamiltonianFamily {
        kind: Kind::General,
        schedule: Schedule::new(inst.kappa, p)?,
        instance: inst.clone(),
        z_diag,
        a_in,
        beta,
        solution,
    })
}

/// Family matching the instance kind.
pub fn build_family(inst: &ProblemInstance, p: f64) -> Result<HamiltonianFamily> {
    match inst.kind {
        Kind::Pd => build_pd_family(inst, p),
        Kind::General => build_general_family(inst, p),
    }
}

impl HamiltonianFamily {
    /// Dimension of `H` (2N for PD, 4N for general).
    pub fn dim(&self) -> usize {
        2 * self.inner_dim()
    }

    /// Dimension of one flag half.
    pub fn inner_dim(&self) -> usize {
        self.beta.len()
    }

    pub fn kappa(&self) -> f64 {
        self.schedule.kappa
    }

    /// Diagonal of `Z` (all ones for PD, `sigma_z (x) I` for general).
    pub fn z_diag(&self) -> &DVector<f64> {
        &self.z_diag
    }

    /// Inner matrix `A` (PD) or `[[0, A], [A^T, 0]]` (general).
    pub fn inner_matrix(&self) -> &DMatrix<f64> {
        &self.a_in
    }

    /// `b` (PD) or `|0, b>` (general).
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// Normalized solution `x` of the underlying linear system.
    pub fn solution(&self) -> &DVector<f64> {
        &self.solution
    }

    fn projector_q(&self) -> DMatrix<f64> {
        let m = self.inner_dim();
        DMatrix::identity(m, m) - outer(&self.beta, &self.beta)
    }

    /// `M(f) = (1 - f) Z + f A_in`.
    pub fn interpolated_inner(&self, f: f64) -> DMatrix<f64> {
        let mut m = &self.a_in * f;
        for i in 0..self.inner_dim() {
            m[(i, i)] += (1.0 - f) * self.z_diag[i];
        }
        m
    }

    /// Off-diagonal block `B(f) = M(f) Q` of `H`.
    pub fn off_diagonal_block(&self, f: f64) -> DMatrix<f64> {
        self.interpolated_inner(f) * self.projector_q()
    }

    /// `H` at schedule value `f`, assembled as `[[0, M Q], [Q M, 0]]`.
    pub fn at_f(&self, f: f64) -> DMatrix<f64> {
        let b = self.off_diagonal_block(f);
        let zero = DMatrix::zeros(b.nrows(), b.ncols());
        block2(&zero, &b, &b.transpose(), &zero)
    }

    /// `H(s) = H(f(s))`.
    pub fn at(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok(self.at_f(self.schedule.f(s)?))
    }

    pub fn h0(&self) -> DMatrix<f64> {
        self.at_f(0.0)
    }

    pub fn h1(&self) -> DMatrix<f64> {
        self.at_f(1.0)
    }

    /// `(1 - f) H0 + f H1` with the endpoints from [`Self::endpoint_hamiltonians`].
    pub fn interpolation_form(&self, f: f64) -> DMatrix<f64> {
        let (h0, h1) = self.endpoint_hamiltonians();
        h0 * (1.0 - f) + h1 * f
    }

    /// `H0` and `H1` assembled from Kronecker products of the instance data.
    ///
    /// PD: `H0 = [[0, Q_b], [Q_b, 0]]`, `H1 = [[0, A Q_b], [Q_b A, 0]]`.
    /// General: `H_k = s_up (x) [M_k Q] + s_down (x) [Q M_k]` with
    /// `M_0 = sigma_z (x) I`, `M_1 = |0><1| (x) A + |1><0| (x) A^T`, where
    /// `s_up` places its operand in the upper-right block of the `a_h2` qubit.
    pub fn endpoint_hamiltonians(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let a = &self.instance.matrix;
        let b = &self.instance.rhs;
        let n = a.nrows();
        let up = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let down = up.transpose();
        match self.kind {
            Kind::Pd => {
                let q = DMatrix::identity(n, n) - outer(b, b);
                let zero = DMatrix::zeros(n, n);
                let h0 = block2(&zero, &q, &q, &zero);
                let h1 = block2(&zero, &(a * &q), &(&q * a), &zero);
                (h0, h1)
            }
            Kind::General => {
                let e0 = DVector::from_vec(vec![1.0, 0.0]);
                let zb = e0.kronecker(b);
                let q = DMatrix::identity(2 * n, 2 * n) - outer(&zb, &zb);
                let sz = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
                let m0 = sz.kronecker(&DMatrix::identity(n, n));
                let m1 = up.kronecker(a) + down.kronecker(&a.transpose());
                let ladder = |m: &DMatrix<f64>| {
                    up.kronecker(&(m * &q)) + down.kronecker(&(&q * m))
                };
                (ladder(&m0), ladder(&m1))
            }
        }
    }

    /// Initial zero-energy state `|flag=0> |beta>`.
    pub fn initial_state(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v.rows_mut(0, self.inner_dim()).copy_from(&self.beta);
        v
    }

    /// Unit solution of the Hermitian-form system `A_in y = beta` on the
    /// flag-0 half: `x` for PD, `|1>_{h1} |x>` for general instances.
    pub fn system_solution(&self) -> DVector<f64> {
        let n = self.instance.dim();
        let mut v = DVector::zeros(self.inner_dim());
        let offset = match self.kind {
            Kind::Pd => 0,
            Kind::General => n,
        };
        v.rows_mut(offset, n).copy_from(&self.solution);
        v
    }

    /// The solution embedded in the Hamiltonian register: `|0, x>` for PD and
    /// `|0>_{h2} |1>_{h1} |x>` for general instances.
    pub fn embedded_solution(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v.rows_mut(0, self.inner_dim()).copy_from(&self.system_solution());
        v
    }

    /// Orthonormal basis of the zero-energy eigenspace of `H(1)`.
    pub fn final_null_space(&self) -> Vec<DVector<f64>> {
        let h1 = self.h1();
        let tol = 1e-9 * h1.amax().max(1.0);
        null_space_sym(&h1, tol)
    }

    /// Unit vector in the `H(1)` null space closest to the embedded solution.
    pub fn solution_eigenstate(&self) -> Result<DVector<f64>> {
        let x = self.embedded_solution();
        let mut proj = DVector::zeros(self.dim());
        for v in self.final_null_space() {
            proj += &v * v.dot(&x);
        }
        let overlap = proj.norm();
        if overlap < 1e-6 {
            return Err(Error::DegenerateTarget(overlap));
        }
        Ok(proj / overlap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problemgen::{gen_general, gen_pd};
    use nalgebra::SymmetricEigen;

    // Independent oracles: trapezoid-free adaptive Simpson and classic RK4.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    fn quadrature_d_p(kappa: f64, p: f64) -> f64 {
        adaptive_simpson(&|u| (1.0 - u + u / kappa).powf(-p), 0.0, 1.0, 1e-13)
    }

    fn rk4_schedule(kappa: f64, p: f64, s_end: f64, steps: usize) -> f64 {
        let d_p = quadrature_d_p(kappa, p);
        let rhs = |f: f64| d_p * (1.0 - f + f / kappa).powf(p);
        let h = s_end / steps as f64;
        let mut f = 0.0;
        for _ in 0..steps {
            let k1 = rhs(f);
            let k2 = rhs(f + 0.5 * h * k1);
            let k3 = rhs(f + 0.5 * h * k2);
            let k4 = rhs(f + h * k3);
            f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        f
    }

    #[test]
    fn schedule_endpoints() {
        for &k in &[1.0, 2.0, 10.0, 50.0] {
            let s = Schedule::new(k, 1.4).unwrap();
            assert!(s.f(0.0).unwrap().abs() < 1e-12);
            assert!((s.f(1.0).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(Schedule::new(10.0, 1.4).unwrap().f(1.5).is_err());
        assert!(Schedule::new(10.0, 1.0).is_err());
        assert!(Schedule::new(10.0, -0.5).is_err());
        assert!(Schedule::new(0.5, 1.4).is_err());
    }

    #[test]
    fn schedule_matches_ode_solution() {
        let s = Schedule::new(10.0, 1.4).unwrap();
        let oracle = rk4_schedule(10.0, 1.4, 0.5, 20_000);
        assert!((s.f(0.5).unwrap() - oracle).abs() < 1e-6, "{} vs {oracle}", s.f(0.5).unwrap());
    }

    #[test]
    fn d_p_matches_quadrature() {
        for &(k, p) in &[(2.0, 1.2), (10.0, 1.4), (100.0, 1.6), (50.0, 0.7)] {
            let s = Schedule::new(k, p).unwrap();
            let q = quadrature_d_p(k, p);
            assert!(((s.d_p - q) / q).abs() < 1e-8, "{k} {p}");
        }
    }

    #[test]
    fn schedule_is_monotone() {
        let s = Schedule::new(30.0, 1.4).unwrap();
        let mut prev = -1.0;
        for i in 0..=1000 {
            let v = s.f(i as f64 / 1000.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn gap_bounds() {
        assert_eq!(gap_lower_bound(0.0, 10.0, Kind::Pd), 1.0);
        assert!((gap_lower_bound(1.0, 10.0, Kind::Pd) - 0.1).abs() < 1e-15);
        let g = gap_lower_bound(1.0, 50.0, Kind::General);
        assert!((g - (1.0 / 50.0) / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn discrete_gaps_behaviour() {
        let s = Schedule::new(20.0, 1.4).unwrap();
        let t = 100;
        let g = s.discrete_gaps(0.3, t).unwrap();
        for (k, gk) in g.iter().enumerate() {
            // independent re-evaluation of the closed form
            let arg: f64 = 0.3 + k as f64 / t as f64;
            let w = 1.0 + arg * (20f64.powf(0.4) - 1.0);
            let f = 20.0 / 19.0 * (1.0 - w.powf(1.0 / -0.4));
            assert!((gk - (1.0 - f + f / 20.0)).abs() < 1e-13);
        }
        let edge = s.discrete_gaps(1.0 - 2.0 / t as f64, t).unwrap();
        assert!((edge[2] - 1.0 / 20.0).abs() < 1e-12);
        let far = s.discrete_gaps(0.4, 1_000_000_000).unwrap();
        assert!((far[0] - far[2]).abs() < 1e-8);
    }

    #[test]
    fn pd_family_endpoint_kernels() {
        let inst = gen_pd(8, 10.0, 1).unwrap();
        let fam = build_pd_family(&inst, DEFAULT_P).unwrap();
        let init = fam.initial_state();
        assert!((fam.h0() * &init).amax() < 1e-13);
        assert!((fam.h1() * fam.embedded_solution()).amax() < 1e-12);
        let null = fam.final_null_space();
        assert_eq!(null.len(), 2);
        // spanned by |0,x> and |1,b>
        let mut one_b = DVector::zeros(16);
        one_b.rows_mut(8, 8).copy_from(&inst.rhs);
        for v in [fam.embedded_solution(), one_b] {
            let proj: f64 = null.iter().map(|n| n.dot(&v).powi(2)).sum();
            assert!((proj - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pd_family_rejects_general() {
        let inst = gen_general(4, 10.0, 1).unwrap();
        assert!(matches!(build_pd_family(&inst, 1.4), Err(Error::WrongKind { .. })));
        let mut asym = gen_pd(4, 10.0, 1).unwrap();
        asym.matrix[(0, 1)] += 1e-3;
        assert!(matches!(build_pd_family(&asym, 1.4), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn pd_gap_respects_bound() {
        let inst = gen_pd(16, 10.0, 4).unwrap();
        let fam = build_pd_family(&inst, DEFAULT_P).unwrap();
        let h = fam.at(0.5).unwrap();
        let eig = SymmetricEigen::new(h);
        let gap = eig
            .eigenvalues
            .iter()
            .map(|e| e.abs())
            .filter(|e| *e > 1e-9)
            .fold(f64::INFINITY, f64::min);
        let bound = fam.schedule.gap(0.5).unwrap();
        assert!(gap >= bound * (1.0 - 1e-10), "{gap} < {bound}");
    }

    #[test]
    fn general_forms_agree() {
        let inst = gen_general(4, 10.0, 2).unwrap();
        let fam = build_general_family(&inst, DEFAULT_P).unwrap();
        for &f in &[0.0, 0.2, 0.5, 0.9, 1.0] {
            let diff = (fam.at_f(f) - fam.interpolation_form(f)).amax();
            assert!(diff < 1e-12, "f={f}: {diff}");
        }
    }

    #[test]
    fn general_family_kernels_and_gap() {
        let inst = gen_general(4, 10.0, 6).unwrap();
        let fam = build_general_family(&inst, DEFAULT_P).unwrap();
        assert!((fam.h0() * fam.initial_state()).amax() < 1e-13);
        // null vector of H(1) in the solution block is proportional to A^-1 b
        let phi = fam.solution_eigenstate().unwrap();
        let direct = inst.matrix.clone().lu().solve(&inst.rhs).unwrap().normalize();
        let block = phi.rows(4, 4).into_owned();
        assert!((block.dot(&direct).abs() - 1.0).abs() < 1e-10);

        let mut s = 0.013;
        for _ in 0..20 {
            let f = fam.schedule.f(s).unwrap();
            let eig = SymmetricEigen::new(fam.at_f(f));
            let gap = eig
                .eigenvalues
                .iter()
                .map(|e| e.abs())
                .filter(|e| *e > 1e-9)
                .fold(f64::INFINITY, f64::min);
            let bound = ((1.0 - f).powi(2) + (f / 10.0).powi(2)).sqrt();
            assert!(gap >= bound - 1e-10, "s={s}: {gap} < {bound}");
            s = (s + 0.0487) % 1.0;
        }
    }

    #[test]
    fn spectra_are_symmetric() {
        for inst in [gen_pd(4, 5.0, 1).unwrap(), gen_general(4, 5.0, 1).unwrap()] {
            let fam = build_family(&inst, DEFAULT_P).unwrap();
            let mut e: Vec<f64> = SymmetricEigen::new(fam.at(0.37).unwrap()).eigenvalues.iter().copied().collect();
            e.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = e.len();
            for i in 0..n {
                assert!((e[i] + e[n - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_and_contractive() {
        let inst = gen_general(8, 40.0, 3).unwrap();
        let fam = build_general_family(&inst, DEFAULT_P).unwrap();
        for i in 0..=10 {
            let h = fam.at(i as f64 / 10.0).unwrap();
            assert!(asymmetry(&h) < 1e-12);
            assert!(crate::linalg::spectral_norm(&h) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn ideal_solution_cases() {
        let mut inst = gen_pd(2, 1.0, 0).unwrap();
        let x = ideal_solution(&inst).unwrap();
        assert!((x - &inst.rhs).amax() < 1e-14);

        inst.matrix = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1]));
        inst.rhs = DVector::from_vec(vec![0.0, 1.0]);
        let x = ideal_solution(&inst).unwrap();
        assert!((x - DVector::from_vec(vec![0.0, 1.0])).amax() < 1e-14);

        let inst = gen_general(8, 20.0, 8).unwrap();
        let x = ideal_solution(&inst).unwrap();
        let scale = inst.matrix.clone().lu().solve(&inst.rhs).unwrap().norm();
        let resid = (&inst.matrix * (x * scale) - &inst.rhs).norm();
        assert!(resid < 1e-10);
    }
}
