//! Random QLSP instances with a prescribed condition number, plus Matrix
//! Market ingestion.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, haar_orthogonal, haar_unit_vector, singular_values};
use crate::mtx;

/// Matrices with `sigma_min <= SINGULAR_TOL * sigma_max` are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Symmetric positive definite.
    Pd,
    General,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Pd => "pd",
            Kind::General => "general",
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    /// System matrix with unit spectral norm.
    pub matrix: DMatrix<f64>,
    /// Unit right-hand side.
    pub rhs: DVector<f64>,
    pub kind: Kind,
    pub kappa: f64,
    pub seed: u64,
    pub label: String,
}

/// JSON manifest entry describing an instance without its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub label: String,
    pub dim: usize,
    pub kappa: f64,
    pub kind: Kind,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn manifest(&self) -> InstanceManifest {
        InstanceManifest {
            label: self.label.clone(),
            dim: self.dim(),
            kappa: self.kappa,
            kind: self.kind,
            seed: self.seed,
        }
    }
}

fn check_gen_args(dim: usize, kappa: f64) -> Result<()> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidDimension(dim));
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidKappa(kappa));
    }
    Ok(())
}

/// Spectrum with endpoints 1 and 1/kappa and uniform interior values.
fn endpoint_spectrum(dim: usize, kappa: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lo = 1.0 / kappa;
    let mut d = Vec::with_capacity(dim);
    d.push(1.0);
    for _ in 1..dim - 1 {
        d.push(if kappa > 1.0 { rng.random_range(lo..=1.0) } else { 1.0 });
    }
    d.push(lo);
    d
}

/// Symmetric positive definite instance `Q D Q^T` with cond = `kappa`.
pub fn gen_pd(dim: usize, kappa: f64, seed: u64) -> Result<ProblemInstance> {
    check_gen_args(dim, kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = haar_orthogonal(dim, &mut rng);
    let d = endpoint_spectrum(dim, kappa, &mut rng);
    let rhs = haar_unit_vector(dim, &mut rng);
    let matrix = if kappa == 1.0 {
        DMatrix::identity(dim, dim)
    } else {
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(d)) * q.transpose();
        (&a + a.transpose()) * 0.5
    };
    Ok(ProblemInstance {
        matrix,
        rhs,
        kind: Kind::Pd,
        kappa,
        seed,
        label: format!("pd-{dim}-k{kappa}-s{seed}"),
    })
}

/// General instance `U S V^T` with independent Haar factors and cond = `kappa`.
pub fn gen_general(dim: usize, kappa: f64, seed: u64) -> Result<ProblemInstance> {
    check_gen_args(dim, kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = haar_orthogonal(dim, &mut rng);
    let v = haar_orthogonal(dim, &mut rng);
    let s = endpoint_spectrum(dim, kappa, &mut rng);
    let rhs = haar_unit_vector(dim, &mut rng);
    let matrix = &u * DMatrix::from_diagonal(&DVector::from_vec(s)) * v.transpose();
    Ok(ProblemInstance {
        matrix,
        rhs,
        kind: Kind::General,
        kappa,
        seed,
        label: format!("general-{dim}-k{kappa}-s{seed}"),
    })
}

/// Instance of the requested kind.
pub fn generate(kind: Kind, dim: usize, kappa: f64, seed: u64) -> Result<ProblemInstance> {
    match kind {
        Kind::Pd => gen_pd(dim, kappa, seed),
        Kind::General => gen_general(dim, kappa, seed),
    }
}

/// `sigma_max / sigma_min` from a full SVD.
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let sv = singular_values(a);
    let (max, min) = (sv[0], sv[sv.len() - 1]);
    if !(min > SINGULAR_TOL * max) {
        return Err(Error::Singular(min));
    }
    Ok(max / min)
}

/// True when `a` is symmetric to 1e-12 (relative) and Cholesky succeeds.
pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    a.is_square() && asymmetry(a) <= 1e-12 * scale && a.clone().cholesky().is_some()
}

/// Load a Matrix Market file as a dense instance.
///
/// When `rhs_path` is `None` the right-hand side is Haar random from `seed`.
pub fn load_matrix_market(
    path: &Path,
    normalize: bool,
    rhs_path: Option<&Path>,
    seed: u64,
) -> Result<ProblemInstance> {
    let mut matrix = mtx::read_matrix(path)?;
    if !matrix.is_square() {
        return Err(Error::NotSquare {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
        });
    }
    let kappa = condition_number(&matrix)?;
    if normalize {
        let norm = singular_values(&matrix)[0];
        matrix /= norm;
    }
    let dim = matrix.nrows();
    let rhs = match rhs_path {
        Some(p) => {
            let v = mtx::read_vector(p)?;
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "rhs has length {}, matrix is {dim}x{dim}",
                    v.len()
                )));
            }
            let n = v.norm();
            if n == 0.0 {
                return Err(Error::Shape("rhs is the zero vector".into()));
            }
            v / n
        }
        None => haar_unit_vector(dim, &mut ChaCha8Rng::seed_from_u64(seed)),
    };
    let kind = if is_positive_definite(&matrix) {
        Kind::Pd
    } else {
        Kind::General
    };
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "matrix".into());
    Ok(ProblemInstance {
        matrix,
        rhs,
        kind,
        kappa,
        seed,
        label,
    })
}
