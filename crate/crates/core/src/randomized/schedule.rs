//! Exponential schedule `f(v)` on `[v_a, v_b]` and the q requirement.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::problemgen::Kind;

/// Gap used to scale the random evolution times of general instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapModel {
    /// `sqrt((1-f)^2 + (f/kappa)^2) / sqrt 2`, which equals `df/dv` of the
    /// schedule.
    #[default]
    Reduced,
    /// `sqrt((1-f)^2 + (f/kappa)^2)`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmSchedule {
    pub kappa: f64,
    /// `sqrt(kappa^2 + 1) / (sqrt 2 kappa)`.
    rate: f64,
    pub v_a: f64,
    pub v_b: f64,
}

impl RmSchedule {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::InvalidKappa(kappa));
        }
        let root = (1.0 + kappa * kappa).sqrt();
        let rate = root / (std::f64::consts::SQRT_2 * kappa);
        // kappa root - kappa^2 = kappa / (root + kappa), without cancellation
        let v_a = (kappa / (root + kappa)).ln() / rate;
        let v_b = (root + 1.0).ln() / rate;
        Ok(Self {
            kappa,
            rate,
            v_a,
            v_b,
        })
    }

    /// `v_b - v_a`.
    pub fn length(&self) -> f64 {
        self.v_b - self.v_a
    }

    pub fn f(&self, v: f64) -> f64 {
        let k2 = self.kappa * self.kappa;
        let e = (self.rate * v).exp();
        (-k2 / e + e + 2.0 * k2) / (2.0 * (k2 + 1.0))
    }

    /// `v_j = v_a + j (v_b - v_a) / q`.
    pub fn node(&self, j: usize, q: usize) -> f64 {
        self.v_a + j as f64 * self.length() / q as f64
    }

    /// `f(v_j)` for `j = 1..=q`, clamped into `[0, 1]` against roundoff;
    /// the last node is exactly 1.
    pub fn nodes_f(&self, q: usize) -> Vec<f64> {
        (1..=q)
            .map(|j| if j == q { 1.0 } else { self.f(self.node(j, q)).clamp(0.0, 1.0) })
            .collect()
    }

    /// `df/dv`.
    pub fn slope(&self, v: f64) -> f64 {
        let k2 = self.kappa * self.kappa;
        let e = (self.rate * v).exp();
        self.rate * (k2 / e + e) / (2.0 * (k2 + 1.0))
    }

    /// Gap of `H(f)` around the zero eigenvalue that sets the time scale.
    pub fn gap(&self, f: f64, kind: Kind, model: GapModel) -> f64 {
        let k = self.kappa;
        match (kind, model) {
            (Kind::Pd, _) => 1.0 - f + f / k,
            (Kind::General, GapModel::Exact) => ((1.0 - f).powi(2) + (f / k).powi(2)).sqrt(),
            (Kind::General, GapModel::Reduced) => {
                ((1.0 - f).powi(2) + (f / k).powi(2)).sqrt() / std::f64::consts::SQRT_2
            }
        }
    }
}

/// True when `(1 - L^2/q^2)^q >= 1 - delta`.
fn admissible(len: f64, q: usize, delta: f64) -> bool {
    let q = q as f64;
    q > len && q * (-(len * len) / (q * q)).ln_1p() >= (-delta).ln_1p()
}

/// Smallest integer `q > v_b - v_a` with `(1 - (v_b - v_a)^2/q^2)^q >= 1 - delta`.
pub fn q_lower_bound(kappa: f64, delta: f64) -> Result<usize> {
    check_range("delta", delta, "(0, 1)", delta > 0.0 && delta < 1.0)?;
    let len = RmSchedule::new(kappa)?.length();
    // q ln(1 - L^2/q^2) increases with q, so the admissible set is a ray
    let mut lo = len.floor() as usize;
    let mut hi = lo + 1;
    while !admissible(len, hi, delta) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if admissible(len, mid, delta) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
