//! Dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Singular values of `a`, descending.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    let mut sv = a.clone().svd(false, false).singular_values;
    sv.as_mut_slice()
        .sort_unstable_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).max()
}

/// Largest absolute entry of `a - a^T`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

/// Principal square root of a symmetric positive semidefinite matrix.
///
/// Negative eigenvalues (roundoff, |v| < 1e-12 for contractions) clamp to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&roots) * v.transpose()
}

/// Haar-random orthogonal matrix: QR of a Gaussian matrix with diag(R) > 0.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Uniformly random point on the unit sphere in R^n.
pub fn haar_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let norm = v.norm();
        if norm > 1e-300 {
            return v / norm;
        }
    }
}

/// Orthonormal basis of the eigenspace of symmetric `h` with |E| <= tol.
pub fn null_space_sym(h: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let eig = SymmetricEigen::new(h.clone());
    eig.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, e)| e.abs() <= tol)
        .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// `|a><b|` as a dense matrix.
pub fn outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose()
}

/// Kronecker product.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Assemble `[[tl, tr], [bl, br]]` from equal square blocks.
pub fn block2(
    tl: &DMatrix<f64>,
    tr: &DMatrix<f64>,
    bl: &DMatrix<f64>,
    br: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = tl.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(tl);
    out.view_mut((0, n), (n, n)).copy_from(tr);
    out.view_mut((n, 0), (n, n)).copy_from(bl);
    out.view_mut((n, n), (n, n)).copy_from(br);
    out
}

/// Full SVD `B = U diag(sigma) W^T` of a square matrix, read off the
/// eigendecomposition of `[[0, B], [B^T, 0]]`.
///
/// Positive eigenvalues `sigma` carry eigenvectors `(u, w) / sqrt 2`; the
/// zero eigenspace splits into left and right null vectors. Singular values
/// below `1e-10 * max(1, |B|)` are set to zero. Backward error is at machine
/// precision even where iterative SVD stalls.
pub fn chiral_svd(b: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let n = b.nrows();
    let zero = DMatrix::zeros(n, n);
    let eig = SymmetricEigen::new(block2(&zero, b, &b.transpose(), &zero));
    let tol = 1e-10 * b.amax().max(1.0);
    let mut u = DMatrix::zeros(n, n);
    let mut w = DMatrix::zeros(n, n);
    let mut sigma = DVector::zeros(n);
    let mut rank = 0;
    let mut null_x = Vec::new();
    let mut null_y = Vec::new();
    for (k, &e) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if e > tol {
            u.set_column(rank, &(v.rows(0, n) * std::f64::consts::SQRT_2));
            w.set_column(rank, &(v.rows(n, n) * std::f64::consts::SQRT_2));
            sigma[rank] = e;
            rank += 1;
        } else if e.abs() <= tol {
            null_x.push(v.rows(0, n).into_owned());
            null_y.push(v.rows(n, n).into_owned());
        }
    }
    let fill = |target: &mut DMatrix<f64>, candidates: Vec<DVector<f64>>| {
        let mut col = rank;
        for mut c in candidates {
            if col == n {
                break;
            }
            for j in 0..col {
                let basis = target.column(j).into_owned();
                c -= &basis * basis.dot(&c);
            }
            let norm = c.norm();
            if norm > 1e-6 {
                target.set_column(col, &(c / norm));
                col += 1;
            }
        }
        debug_assert_eq!(col, n, "null space split lost a direction");
    };
    fill(&mut u, null_x);
    fill(&mut w, null_y);
    (u, sigma, w)
}
