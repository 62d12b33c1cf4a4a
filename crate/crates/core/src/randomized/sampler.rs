//! Evolution-time distributions for the randomized method.
//!
//! Both densities depend on `t` only through `u = gap |t|`, so a single table
//! in `u` serves every gap: a draw at gap `g` is a draw of `u` divided by `g`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Bessel order of the JLPSS density.
pub const JLPSS_ORDER: f64 = 1.165;
/// Number of `x^(2l)` terms (l = 0..=8) in the optimal density.
pub const OPTIMAL_TERMS: usize = 9;
/// Upper end of the tabulated support in `u = gap |t|`.
pub const U_MAX: f64 = 2000.0;
pub const TABLE_POINTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PdfKind {
    /// `(J_p(u/2) / u^p)^2` with `p = 1.165`.
    Jlpss,
    /// Squared cosine transform of `(1 - x^2) sum_l a_l x^(2l)`, with `a_l`
    /// minimizing the mean.
    Optimal,
}

impl PdfKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PdfKind::Jlpss => "jlpss",
            PdfKind::Optimal => "optimal",
        }
    }
}

impl std::fmt::Display for PdfKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `J_p(u/2) / u^p`, by power series below `u = 4`.
pub fn jlpss_amplitude(u: f64) -> f64 {
    let p = JLPSS_ORDER;
    if u < 4.0 {
        let z = -(u / 4.0).powi(2);
        let mut term = 1.0 / puruspe::gamma(p + 1.0);
        let mut sum = term;
        for k in 1..40 {
            let k = k as f64;
            term *= z / (k * (k + p));
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        4f64.powf(-p) * sum
    } else {
        puruspe::besseljy(p, u / 2.0).0 / u.powf(p)
    }
}

/// `phi_l(u) = int_{-1}^{1} cos(x u / 2) (1 - x^2) x^(2l) dx` for all `l`.
struct CosineMoments {
    rule: Vec<(f64, f64)>,
}

impl CosineMoments {
    /// Frequencies below this use quadrature, above it integration by parts.
    const SWITCH: f64 = 60.0;
    const MAX_POWER: usize = 2 * OPTIMAL_TERMS;

    fn new() -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(128).unwrap())
            .into_node_weight_pairs()
            .into_vec();
        Self { rule }
    }

    /// `C_m = int_{-1}^{1} x^m cos(k x) dx` for even `m <= MAX_POWER`.
    fn even_moments(&self, k: f64) -> [f64; OPTIMAL_TERMS + 1] {
        let mut c = [0.0; OPTIMAL_TERMS + 1];
        if k < Self::SWITCH {
            for &(x, w) in &self.rule {
                let base = w * (k * x).cos();
                let x2 = x * x;
                let mut xp = 1.0;
                for cm in c.iter_mut() {
                    *cm += base * xp;
                    xp *= x2;
                }
            }
        } else {
            // I_m = int_0^1 x^m cos kx, S_m = int_0^1 x^m sin kx; m/k < 1 keeps
            // the upward recurrence stable
            let (s, co) = k.sin_cos();
            let mut i_prev = s / k;
            let mut s_prev = (1.0 - co) / k;
            c[0] = 2.0 * i_prev;
            for m in 1..=Self::MAX_POWER {
                let mf = m as f64;
                let i_m = s / k - mf / k * s_prev;
                let s_m = -co / k + mf / k * i_prev;
                if m % 2 == 0 {
                    c[m / 2] = 2.0 * i_m;
                }
                i_prev = i_m;
                s_prev = s_m;
            }
        }
        c
    }

    fn phis(&self, u: f64) -> [f64; OPTIMAL_TERMS] {
        let c = self.even_moments(u / 2.0);
        std::array::from_fn(|l| c[l] - c[l + 1])
    }
}

/// Inverse-CDF sampler over `u = gap |t|`.
#[derive(Debug, Clone)]
pub struct TimeSampler {
    kind: PdfKind,
    u: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    tail: f64,
    coeffs: Vec<f64>,
}

/// Table grid `u = U_MAX g^2`, dense near the origin.
fn grid() -> Vec<f64> {
    let n = TABLE_POINTS;
    (0..n)
        .map(|i| {
            let g = i as f64 / (n - 1) as f64;
            U_MAX * g * g
        })
        .collect()
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Coefficients minimizing the mean of `u` under the density `g(u)^2`.
///
/// The norm matrix is exact by Parseval; the first-moment matrix is
/// integrated on the table grid with the `u^-3` tail added analytically.
fn optimal_coefficients(u: &[f64], phis: &[[f64; OPTIMAL_TERMS]]) -> Vec<f64> {
    let n = OPTIMAL_TERMS;
    let norm = DMatrix::from_fn(n, n, |l, k| {
        let m = (l + k) as f64;
        2.0 * PI * 2.0 * (1.0 / (2.0 * m + 1.0) - 2.0 / (2.0 * m + 3.0) + 1.0 / (2.0 * m + 5.0))
    });
    let tail = 64.0 / (U_MAX * U_MAX);
    let mut first = DMatrix::zeros(n, n);
    let mut y = vec![0.0; u.len()];
    for l in 0..n {
        for k in l..n {
            for (i, (ui, ph)) in u.iter().zip(phis).enumerate() {
                y[i] = ui * ph[l] * ph[k];
            }
            let v = trapezoid(u, &y) + tail;
            first[(l, k)] = v;
            first[(k, l)] = v;
        }
    }
    let chol = norm.cholesky().expect("Gram matrix of independent monomials");
    let l_inv = chol.l().try_inverse().expect("triangular factor is invertible");
    let reduced = &l_inv * first * l_inv.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let imin = eig.eigenvalues.imin();
    let a: DVector<f64> = l_inv.transpose() * eig.eigenvectors.column(imin);
    let sign = if a.sum() < 0.0 { -1.0 } else { 1.0 };
    a.iter().map(|v| sign * v).collect()
}

impl TimeSampler {
    pub fn new(kind: PdfKind) -> Self {
        let u = grid();
        let (raw, coeffs, tail_raw) = match kind {
            PdfKind::Jlpss => {
                let raw: Vec<f64> = u.iter().map(|&x| jlpss_amplitude(x).powi(2)).collect();
                // J_p(x)^2 averages 1/(pi x), so the density falls as
                // (2/pi) u^(-1-2p)
                let p = JLPSS_ORDER;
                let tail = 2.0 / (PI * 2.0 * p * U_MAX.powf(2.0 * p));
                (raw, Vec::new(), tail)
            }
            PdfKind::Optimal => {
                let moments = CosineMoments::new();
                let phis: Vec<[f64; OPTIMAL_TERMS]> = u.iter().map(|&x| moments.phis(x)).collect();
                let a = optimal_coefficients(&u, &phis);
                let raw: Vec<f64> = phis
                    .iter()
                    .map(|ph| ph.iter().zip(&a).map(|(p, c)| p * c).sum::<f64>().powi(2))
                    .collect();
                // every phi_l ~ -16 cos(u/2) / u^2
                let s: f64 = a.iter().sum();
                let tail = 128.0 * s * s / (3.0 * U_MAX.powi(3));
                (raw, a, tail)
            }
        };
        let total = trapezoid(&u, &raw);
        let density: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mut cdf = Vec::with_capacity(u.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..u.len() {
            acc += 0.5 * (u[i] - u[i - 1]) * (density[i] + density[i - 1]);
            cdf.push(acc);
        }
        let last = acc;
        cdf.iter_mut().for_each(|c| *c /= last);
        let weighted: Vec<f64> = u.iter().zip(&density).map(|(x, d)| x * d).collect();
        let mean = trapezoid(&u, &weighted);
        Self {
            kind,
            u,
            density,
            cdf,
            mean,
            tail: tail_raw / (total + tail_raw),
            coeffs,
        }
    }

    /// Process-wide table for `kind`, built on first use.
    pub fn shared(kind: PdfKind) -> &'static TimeSampler {
        static JLPSS: OnceLock<TimeSampler> = OnceLock::new();
        static OPTIMAL: OnceLock<TimeSampler> = OnceLock::new();
        match kind {
            PdfKind::Jlpss => JLPSS.get_or_init(|| TimeSampler::new(kind)),
            PdfKind::Optimal => OPTIMAL.get_or_init(|| TimeSampler::new(kind)),
        }
    }

    pub fn kind(&self) -> PdfKind {
        self.kind
    }

    /// Expansion coefficients `a_l` (empty for JLPSS).
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Mean of `u` on the truncated support; `<|t|> = mean / gap`.
    pub fn mean_scaled(&self) -> f64 {
        self.mean
    }

    pub fn mean_abs_time(&self, gap: f64) -> f64 {
        self.mean / gap
    }

    /// Estimated probability mass beyond `U_MAX` that the table discards.
    pub fn tail_mass(&self) -> f64 {
        self.tail
    }

    /// Trapezoid integral of the tabulated density (1 up to roundoff).
    pub fn table_mass(&self) -> f64 {
        trapezoid(&self.u, &self.density)
    }

    /// Normalized density of `u` at a table point (linear in between).
    pub fn density_scaled(&self, u: f64) -> f64 {
        if !(0.0..=U_MAX).contains(&u) {
            return 0.0;
        }
        let i = self.u.partition_point(|&x| x <= u).clamp(1, self.u.len() - 1);
        let (u0, u1) = (self.u[i - 1], self.u[i]);
        let w = if u1 > u0 { (u - u0) / (u1 - u0) } else { 0.0 };
        self.density[i - 1] * (1.0 - w) + self.density[i] * w
    }

    /// Density of the signed time `t` at the given gap (even in `t`).
    pub fn pdf(&self, t: f64, gap: f64) -> f64 {
        0.5 * gap * self.density_scaled(gap * t.abs())
    }

    /// Draw `u = gap |t|`.
    pub fn sample_scaled<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= x).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let w = if c1 > c0 { (x - c0) / (c1 - c0) } else { 0.0 };
        self.u[i - 1] + w * (self.u[i] - self.u[i - 1])
    }

    /// Draw `|t|` at `gap`.
    pub fn sample_abs<R: Rng + ?Sized>(&self, gap: f64, rng: &mut R) -> f64 {
        self.sample_scaled(rng) / gap
    }

    /// Draw a signed `t` at `gap`, sign equiprobable.
    pub fn sample<R: Rng + ?Sized>(&self, gap: f64, rng: &mut R) -> f64 {
        let t = self.sample_abs(gap, rng);
        if rng.random::<bool>() {
            t
        } else {
            -t
        }
    }
}

/// CSV rows `t,p_jlpss,p_optimal` of the signed-time densities at `gap`.
pub fn pdf_comparison_csv(gap: f64, t_max: f64, points: usize) -> String {
    let j = TimeSampler::shared(PdfKind::Jlpss);
    let o = TimeSampler::shared(PdfKind::Optimal);
    let mut out = String::from("t,p_jlpss,p_optimal\n");
    for i in 0..points {
        let t = -t_max + 2.0 * t_max * i as f64 / (points - 1).max(1) as f64;
        out.push_str(&format!("{t},{},{}\n", j.pdf(t, gap), o.pdf(t, gap)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn series_matches_bessel_at_switch() {
        for u in [2.0, 3.0, 3.99] {
            let series = {
                let p = JLPSS_ORDER;
                let z = -(u / 4.0f64).powi(2);
                let mut term = 1.0 / puruspe::gamma(p + 1.0);
                let mut sum = term;
                for k in 1..40 {
                    let k = k as f64;
                    term *= z / (k * (k + p));
                    sum += term;
                }
                4f64.powf(-p) * sum
            };
            let direct = puruspe::besseljy(JLPSS_ORDER, u / 2.0).0 / u.powf(JLPSS_ORDER);
            assert!((series - direct).abs() < 1e-12 * direct.abs(), "{u}");
        }
        assert!((jlpss_amplitude(0.0) - 4f64.powf(-JLPSS_ORDER) / puruspe::gamma(2.165)).abs() < 1e-15);
    }

    #[test]
    fn moments_match_quadrature_across_switch() {
        let m = CosineMoments::new();
        let fine = GaussLegendre::new(NonZeroUsize::new(600).unwrap());
        for k in [59.0, 61.0, 150.0] {
            let c = m.even_moments(k);
            for (l, cl) in c.iter().enumerate() {
                let exact = fine.integrate(-1.0, 1.0, |x| x.powi(2 * l as i32) * (k * x).cos());
                assert!((cl - exact).abs() < 1e-12, "k={k} l={l}: {cl} vs {exact}");
            }
        }
    }

    #[test]
    fn tables_are_normalized_with_small_tails() {
        for kind in [PdfKind::Jlpss, PdfKind::Optimal] {
            let s = TimeSampler::shared(kind);
            assert!((s.table_mass() - 1.0).abs() < 1e-6, "{kind}");
            assert!(s.tail_mass() < 1e-6, "{kind}: {}", s.tail_mass());
        }
    }

    #[test]
    fn means_match_published_constants() {
        let j = TimeSampler::shared(PdfKind::Jlpss);
        assert!((j.mean_scaled() - 2.32132).abs() < 2e-3, "{}", j.mean_scaled());
        let o = TimeSampler::shared(PdfKind::Optimal);
        assert!((o.mean_scaled() - 2.3160).abs() / 2.3160 < 1e-2, "{}", o.mean_scaled());
        assert!(o.mean_scaled() < j.mean_scaled());
        assert_eq!(o.coefficients().len(), OPTIMAL_TERMS);
    }

    #[test]
    fn sampling_scales_with_gap() {
        // two-sample Kolmogorov-Smirnov on gap * t
        let s = TimeSampler::shared(PdfKind::Jlpss);
        let n = 100_000;
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let mut a: Vec<f64> = (0..n).map(|_| s.sample_abs(1.0, &mut r1)).collect();
        let mut b: Vec<f64> = (0..n).map(|_| 0.25 * s.sample_abs(0.25, &mut r2)).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 - j as f64).abs() / n as f64);
        }
        let critical = 1.628 * (2.0 / n as f64).sqrt();
        assert!(d < critical, "D = {d}");
    }

    #[test]
    fn signed_samples_are_symmetric() {
        let s = TimeSampler::shared(PdfKind::Jlpss);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let pos = (0..n).filter(|_| s.sample(0.5, &mut rng) > 0.0).count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((pos as f64 - n as f64 / 2.0).abs() < 4.0 * sigma);
    }

    #[test]
    fn comparison_csv_shape() {
        let csv = pdf_comparison_csv(0.5, 20.0, 11);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[0], "t,p_jlpss,p_optimal");
        let mid: Vec<f64> = lines[6].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(mid[0], 0.0);
        assert!(mid[1] > 0.0 && mid[2] > 0.0);
    }
}
