//! End-to-end cost model: adiabatic preparation followed by eigenstate
//! filtering with repeat-until-success.
//!
//! Costs are in units of walk steps (or evolution time) and scale linearly
//! with κ, so the optimal adiabatic error never depends on κ.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::randomized::infidelity_from_error;

/// Lower end of the search interval for the adiabatic error.
pub const SEARCH_MIN: f64 = 1e-4;
/// Upper end of the search interval for the adiabatic error.
pub const SEARCH_MAX: f64 = 0.99;
/// Spacing of the verification grid.
pub const GRID_STEP: f64 = 1e-3;

/// Infidelity δ for a two-norm error Δ.
pub fn infidelity(delta_norm: f64) -> f64 {
    infidelity_from_error(delta_norm)
}

/// Two-norm error Δ for an infidelity δ.
pub fn two_norm_error(delta: f64) -> f64 {
    // 2 − 2√(1−δ) rewritten without cancellation
    let delta = delta.clamp(0.0, 1.0);
    (2.0 * delta / (1.0 + (1.0 - delta).sqrt())).sqrt()
}

/// Mean number of adiabatic attempts when failures are flagged by the filter.
pub fn expected_repetitions(delta: f64, eps_f: f64) -> f64 {
    let miss = 1.0 - delta * (1.0 - eps_f * eps_f);
    1.0 / (miss * miss)
}

/// Which error the adiabatic cost is inversely proportional to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// Cost α κ / Δ.
    TwoNorm,
    /// Cost β κ / δ.
    Infidelity,
}

impl CostMode {
    /// Infidelity corresponding to the mode's native error variable.
    pub fn infidelity_of(self, x: f64) -> f64 {
        match self {
            CostMode::TwoNorm => infidelity(x),
            CostMode::Infidelity => x,
        }
    }

    pub fn two_norm_of(self, x: f64) -> f64 {
        match self {
            CostMode::TwoNorm => x,
            CostMode::Infidelity => two_norm_error(x),
        }
    }
}

/// Adiabatic and filter contributions to the expected cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSplit {
    pub adiabatic: f64,
    pub filter: f64,
}

impl CostSplit {
    pub fn total(&self) -> f64 {
        self.adiabatic + self.filter
    }
}

/// Cost split for adiabatic error `x` (Δ or δ per `mode`) and scaling
/// constant `c` (α or β).
pub fn cost_split(mode: CostMode, c: f64, x: f64, eps_f: f64, kappa: f64) -> CostSplit {
    let reps = expected_repetitions(mode.infidelity_of(x), eps_f);
    CostSplit {
        adiabatic: c * kappa * reps / x,
        filter: 0.5 * kappa * (2.0 / eps_f).ln() * (reps + 1.0),
    }
}

pub fn total_cost_two_norm(alpha: f64, delta_norm: f64, eps_f: f64, kappa: f64) -> f64 {
    cost_split(CostMode::TwoNorm, alpha, delta_norm, eps_f, kappa).total()
}

pub fn total_cost_infidelity(beta: f64, delta: f64, eps_f: f64, kappa: f64) -> f64 {
    cost_split(CostMode::Infidelity, beta, delta, eps_f, kappa).total()
}

/// Filter parameter that guarantees final error `eps` after an adiabatic
/// stage with infidelity `delta`.
///
/// Capped at 1: for very small δ the bound exceeds 1 and the filter
/// parameter carries no further meaning.
pub fn eps_f_from_eps(eps: f64, delta: f64) -> f64 {
    let raw = eps * ((1.0 - delta) * (1.0 - eps * eps / 4.0)).sqrt()
        / ((1.0 - eps * eps / 2.0) * delta.sqrt());
    raw.min(1.0)
}

/// Lower bound on the fidelity after filtering.
pub fn filtered_fidelity(delta: f64, eps_f: f64) -> f64 {
    (1.0 - delta) / (1.0 - delta + delta * eps_f * eps_f)
}

/// One minus [`filtered_fidelity`], without cancellation.
pub fn filtered_infidelity(delta: f64, eps_f: f64) -> f64 {
    let leak = delta * eps_f * eps_f;
    leak / (1.0 - delta + leak)
}

/// Quadratic through three points, held constant outside their range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    /// `c0 + c1 x + c2 x²`.
    pub coefficients: [f64; 3],
    pub x_min: f64,
    pub x_max: f64,
}

impl Quadratic {
    pub fn through(points: [(f64, f64); 3]) -> Result<Self> {
        let [(x0, y0), (x1, y1), (x2, y2)] = points;
        let d01 = x0 - x1;
        let d02 = x0 - x2;
        let d12 = x1 - x2;
        if d01 == 0.0 || d02 == 0.0 || d12 == 0.0 {
            return Err(Error::Interpolation("nodes must be distinct".into()));
        }
        // Newton divided differences, then expand
        let f01 = (y0 - y1) / d01;
        let f12 = (y1 - y2) / d12;
        let c2 = (f01 - f12) / d02;
        let c1 = f01 - c2 * (x0 + x1);
        let c0 = y0 - c1 * x0 - c2 * x0 * x0;
        Ok(Self {
            coefficients: [c0, c1, c2],
            x_min: x0.min(x1).min(x2),
            x_max: x0.max(x1).max(x2),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.x_min, self.x_max);
        let [c0, c1, c2] = self.coefficients;
        c0 + x * (c1 + x * c2)
    }
}

/// Scaling constant as a function of the adiabatic error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scaling {
    Constant { value: f64 },
    Interpolated { fit: Quadratic },
}

impl Scaling {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Scaling::Constant { value } => *value,
            Scaling::Interpolated { fit } => fit.eval(x),
        }
    }
}

/// Measured resource `T` at achieved two-norm error `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub resource: f64,
    pub error: f64,
}

/// Fit the scaling constant through three measurements.
///
/// Two-norm mode uses α = TΔ/κ against Δ; infidelity mode uses β = Tδ/κ
/// against δ.
pub fn interpolate_scaling(
    points: &[Measurement],
    kappa: f64,
    mode: CostMode,
) -> Result<Quadratic> {
    let pts: [Measurement; 3] = points
        .try_into()
        .map_err(|_| Error::Interpolation(format!("need exactly 3 points, got {}", points.len())))?;
    let xy = pts.map(|m| {
        let x = match mode {
            CostMode::TwoNorm => m.error,
            CostMode::Infidelity => infidelity(m.error),
        };
        (x, m.resource * x / kappa)
    });
    Quadratic::through(xy)
}

/// Result of minimizing the total cost over the adiabatic error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    /// Optimal Δ or δ, per the mode.
    pub x: f64,
    pub eps_f: f64,
    pub split: CostSplit,
    /// Set when the grid scan beat golden-section search.
    pub grid_fallback: bool,
}

impl Optimum {
    pub fn cost(&self) -> f64 {
        self.split.total()
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Minimize the end-to-end cost for final error `eps`.
///
/// The search runs at κ = 1 and the split is rescaled afterwards, so the
/// argmin is bitwise independent of κ.
pub fn optimize(eps: f64, scaling: &Scaling, mode: CostMode, kappa: f64) -> Result<Optimum> {
    check_range("eps", eps, "(1e-14, 0.3)", eps > 1e-14 && eps < 0.3)?;
    let split_at = |x: f64| {
        let eps_f = eps_f_from_eps(eps, mode.infidelity_of(x));
        (eps_f, cost_split(mode, scaling.eval(x), x, eps_f, 1.0))
    };
    let cost = |x: f64| split_at(x).1.total();

    let golden = golden_section(cost, SEARCH_MIN, SEARCH_MAX, 1e-10);
    let golden_cost = cost(golden);

    let n = ((SEARCH_MAX - SEARCH_MIN) / GRID_STEP).round() as usize;
    let (grid, grid_cost) = (0..=n)
        .map(|i| SEARCH_MIN + (SEARCH_MAX - SEARCH_MIN) * i as f64 / n as f64)
        .map(|x| (x, cost(x)))
        .fold((f64::NAN, f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best });

    let grid_fallback = grid_cost < golden_cost * (1.0 - 1e-9);
    let x = if grid_fallback { grid } else { golden };
    let (eps_f, unit) = split_at(x);
    Ok(Optimum {
        x,
        eps_f,
        split: CostSplit {
            adiabatic: kappa * unit.adiabatic,
            filter: kappa * unit.filter,
        },
        grid_fallback,
    })
}

/// A named cost model: error mode plus scaling function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub name: String,
    pub mode: CostMode,
    pub scaling: Scaling,
    /// Source data when the scaling is interpolated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Measurement>,
}

impl CostModel {
    pub fn constant(name: &str, mode: CostMode, value: f64) -> Self {
        Self {
            name: name.to_string(),
            mode,
            scaling: Scaling::Constant { value },
            points: Vec::new(),
        }
    }

    pub fn interpolated(
        name: &str,
        mode: CostMode,
        points: &[Measurement],
        kappa: f64,
    ) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            mode,
            scaling: Scaling::Interpolated {
                fit: interpolate_scaling(points, kappa, mode)?,
            },
            points: points.to_vec(),
        })
    }

    pub fn optimize(&self, eps: f64) -> Result<Optimum> {
        optimize(eps, &self.scaling, self.mode, 1.0)
    }
}

/// κ at which the reference measurements were taken.
pub const REFERENCE_KAPPA: f64 = 50.0;

fn measurements(raw: &[(f64, f64)]) -> Vec<Measurement> {
    raw.iter()
        .map(|&(resource, error)| Measurement { resource, error })
        .collect()
}

/// Published 16×16, κ = 50 measurements at three error levels:
/// QW positive definite, QW general, RM positive definite, RM general.
pub fn reference_models() -> Vec<CostModel> {
    let table: [(&str, CostMode, [(f64, f64); 3]); 4] = [
        (
            "qw-pd",
            CostMode::TwoNorm,
            [(108.0, 0.0971), (56.0, 0.1990), (32.0, 0.2821)],
        ),
        (
            "qw-general",
            CostMode::TwoNorm,
            [(344.0, 0.1986), (288.0, 0.2878), (232.0, 0.3967)],
        ),
        (
            "rm-pd",
            CostMode::Infidelity,
            [(421.0, 0.3012), (271.0, 0.3916), (195.0, 0.4959)],
        ),
        (
            "rm-general",
            CostMode::Infidelity,
            [(1722.0, 0.3991), (1100.0, 0.4987), (771.0, 0.5989)],
        ),
    ];
    table
        .iter()
        .map(|(name, mode, raw)| {
            CostModel::interpolated(name, *mode, &measurements(raw), REFERENCE_KAPPA)
                .expect("reference nodes are distinct")
        })
        .collect()
}

/// One row of a cost curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub model: String,
    pub eps: f64,
    /// Optimal two-norm adiabatic error.
    pub delta_norm: f64,
    /// Optimal adiabatic infidelity.
    pub infidelity: f64,
    pub eps_f: f64,
    pub adiabatic: f64,
    pub filter: f64,
    pub total: f64,
    pub grid_fallback: bool,
}

/// Log-spaced grid of `points` values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect(),
    }
}

/// Optimal cost and its split for every model at every ε.
pub fn cost_curves(eps_grid: &[f64], models: &[CostModel]) -> Result<Vec<CurvePoint>> {
    let mut rows = Vec::with_capacity(eps_grid.len() * models.len());
    for model in models {
        for &eps in eps_grid {
            let opt = model.optimize(eps)?;
            rows.push(CurvePoint {
                model: model.name.clone(),
                eps,
                delta_norm: model.mode.two_norm_of(opt.x),
                infidelity: model.mode.infidelity_of(opt.x),
                eps_f: opt.eps_f,
                adiabatic: opt.split.adiabatic,
                filter: opt.split.filter,
                total: opt.cost(),
                grid_fallback: opt.grid_fallback,
            });
        }
    }
    Ok(rows)
}

/// ε at which the optimized filter cost overtakes the adiabatic cost,
/// searched in [lo, hi]. `None` if the sign of the difference does not
/// change on the bracket.
pub fn crossover(model: &CostModel, lo: f64, hi: f64) -> Result<Option<f64>> {
    let diff = |ln_eps: f64| -> Result<f64> {
        let s = model.optimize(ln_eps.exp())?.split;
        Ok(s.adiabatic - s.filter)
    };
    // scan first: the optimum jumps if the cost is not unimodal
    let grid = log_grid(lo, hi, 64);
    let mut prev: Option<(f64, f64)> = None;
    for eps in grid {
        let x = eps.ln();
        let d = diff(x)?;
        if let Some((px, pd)) = prev {
            if pd.signum() != d.signum() {
                let (mut a, mut b, mut da) = (px, x, pd);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let dm = diff(m)?;
                    if dm.signum() == da.signum() {
                        a = m;
                        da = dm;
                    } else {
                        b = m;
                    }
                }
                return Ok(Some((0.5 * (a + b)).exp()));
            }
        }
        prev = Some((x, d));
    }
    Ok(None)
}

/// `model,eps,delta_star,cost` rows.
pub fn optdelta_csv(rows: &[CurvePoint]) -> String {
    let mut out = String::from("model,eps,delta_star,infidelity_star,cost\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:.10},{:.10},{:.10e}\n",
            r.model, r.eps, r.delta_norm, r.infidelity, r.total
        ));
    }
    out
}

/// `model,eps,adiabatic,filter` rows.
pub fn costsplit_csv(rows: &[CurvePoint]) -> String {
    let mut out = String::from("model,eps,adiabatic,filter,eps_f\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:.10e},{:.10e},{:.10e}\n",
            r.model, r.eps, r.adiabatic, r.filter, r.eps_f
        ));
    }
    out
}

/// JSON manifest of the fitted scaling functions.
pub fn interpolation_manifest(models: &[CostModel]) -> Result<String> {
    Ok(serde_json::to_string_pretty(models)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn error_conversions_round_trip() {
        for i in 1..=100 {
            let d = i as f64 / 100.0;
            assert!((two_norm_error(infidelity(d)) - d).abs() < 1e-12, "{d}");
        }
        assert!((infidelity(two_norm_error(0.37)) - 0.37).abs() < 1e-12);
        assert!((infidelity(2f64.sqrt()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn repetitions_match_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut cases = vec![(0.4, 0.01)];
        cases.extend((0..100).map(|_| (rng.random_range(0.0..0.6), rng.random_range(0.01..1.0))));
        for (delta, eps_f) in cases {
            let r: f64 = delta * (1.0 - eps_f * eps_f);
            // Σ (n+1) rⁿ, summed backwards for accuracy
            let series: f64 = (0..10_000).rev().map(|n| (n + 1) as f64 * r.powi(n)).sum();
            let closed = expected_repetitions(delta, eps_f);
            assert!((series - closed).abs() < 1e-10 * closed, "{delta} {eps_f}");
        }
        assert_eq!(expected_repetitions(0.0, 0.5), 1.0);
        assert_eq!(expected_repetitions(0.7, 1.0), 1.0);
    }

    #[test]
    fn two_norm_cost_hand_evaluation() {
        let (alpha, big_delta, eps_f) = (2.0, 0.4, 1e-3);
        let delta = 0.16 - 0.0256 / 4.0;
        let miss = 1.0 - delta * (1.0 - 1e-6);
        let reps = 1.0 / (miss * miss);
        let want = 0.5 * 2000f64.ln() * (reps + 1.0) + alpha * reps / big_delta;
        let got = total_cost_two_norm(alpha, big_delta, eps_f, 1.0);
        assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
        assert!((total_cost_two_norm(alpha, big_delta, eps_f, 50.0) - 50.0 * got).abs() < 1e-9 * got);
    }

    #[test]
    fn infidelity_cost_hand_evaluation() {
        let miss = 1.0 - 0.5 * (1.0 - 1e-6);
        let reps = 1.0 / (miss * miss);
        let want = 0.5 * 2000f64.ln() * (reps + 1.0) + 5.3 * reps / 0.5;
        let got = total_cost_infidelity(5.3, 0.5, 1e-3, 1.0);
        assert!((got - want).abs() < 1e-12 * want);
        let filter_only = cost_split(CostMode::Infidelity, 0.0, 0.5, 1e-3, 1.0);
        assert_eq!(filter_only.adiabatic, 0.0);
        assert_eq!(total_cost_infidelity(0.0, 0.5, 1e-3, 1.0), filter_only.filter);
    }

    #[test]
    fn small_error_limits() {
        let s = cost_split(CostMode::TwoNorm, 2.0, 1e-6, 1e-3, 1.0);
        assert!((s.adiabatic * 1e-6 / 2.0 - 1.0).abs() < 1e-9);
        assert!((s.filter - 2000f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn eps_f_round_trips_through_fidelity_bound() {
        for (eps, delta) in [(1e-3, 0.15), (1e-2, 0.4), (0.1, 0.3), (1e-8, 0.9)] {
            let eps_f = eps_f_from_eps(eps, delta);
            let back = two_norm_error(filtered_infidelity(delta, eps_f));
            let f = filtered_fidelity(delta, eps_f);
            assert!((f + filtered_infidelity(delta, eps_f) - 1.0).abs() < 1e-15);
            assert!((back - eps).abs() < 1e-10, "{eps} {delta}: {back}");
        }
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let e = eps_f_from_eps(1e-3, i as f64 / 100.0);
            assert!(e.is_finite() && e > 0.0 && e < prev);
            prev = e;
        }
        assert_eq!(eps_f_from_eps(0.2, 1e-4), 1.0);
    }

    #[test]
    fn quadratic_reproduces_nodes_and_clamps() {
        let pts = [(0.1, 3.0), (0.25, -1.0), (0.4, 2.5)];
        let q = Quadratic::through(pts).unwrap();
        for (x, y) in pts {
            assert!((q.eval(x) - y).abs() < 1e-12);
        }
        assert_eq!(q.eval(0.0), q.eval(0.1));
        assert_eq!(q.eval(1.0), q.eval(0.4));
        assert!(Quadratic::through([(0.1, 1.0), (0.1, 2.0), (0.3, 0.0)]).is_err());
    }

    #[test]
    fn general_walk_alpha_interpolation() {
        let models = reference_models();
        let qw = models.iter().find(|m| m.name == "qw-general").unwrap();
        let a = |x: f64| qw.scaling.eval(x);
        assert!((a(0.3967) - 232.0 * 0.3967 / 50.0).abs() < 1e-12);
        assert!((a(0.3967) - 1.84).abs() < 0.01);
        assert!((a(0.2878) - 1.66).abs() < 0.01);
        assert!((a(0.1986) - 1.37).abs() < 0.01);
        let bad = interpolate_scaling(&qw.points[..2], 50.0, CostMode::TwoNorm);
        assert!(bad.is_err());
    }

    #[test]
    fn infidelity_scaling_cross_check() {
        let models = reference_models();
        let rm = models.iter().find(|m| m.name == "rm-general").unwrap();
        let beta = rm.scaling.eval(infidelity(0.3991));
        assert!((beta - 5.3).abs() < 0.2, "{beta}");
    }

    #[test]
    fn optimum_is_interior_and_kappa_free() {
        let alpha = Scaling::Constant { value: 2.0 };
        let cost = |d: f64| {
            let ef = eps_f_from_eps(1e-3, infidelity(d));
            total_cost_two_norm(2.0, d, ef, 1.0)
        };
        assert!(cost(SEARCH_MIN + 1e-3) < cost(SEARCH_MIN));
        assert!(cost(SEARCH_MAX - 1e-3) < cost(SEARCH_MAX));
        let one = optimize(1e-3, &alpha, CostMode::TwoNorm, 1.0).unwrap();
        let fifty = optimize(1e-3, &alpha, CostMode::TwoNorm, 50.0).unwrap();
        assert!((one.x - fifty.x).abs() < 1e-9);
        assert!((fifty.cost() - 50.0 * one.cost()).abs() < 1e-9 * fifty.cost());
        assert!(!one.grid_fallback);
        assert!(optimize(0.5, &alpha, CostMode::TwoNorm, 1.0).is_err());
    }

    #[test]
    fn optimum_beats_grid() {
        for value in [0.17, 0.8, 2.0, 5.3] {
            for mode in [CostMode::TwoNorm, CostMode::Infidelity] {
                let s = Scaling::Constant { value };
                let opt = optimize(1e-4, &s, mode, 1.0).unwrap();
                for i in 1..99 {
                    let x = i as f64 / 100.0;
                    let ef = eps_f_from_eps(1e-4, mode.infidelity_of(x));
                    assert!(opt.cost() <= cost_split(mode, value, x, ef, 1.0).total() + 1e-9);
                }
            }
        }
    }

    #[test]
    fn filter_cost_is_logarithmic_in_eps() {
        let models = reference_models();
        let eps = log_grid(1e-12, 1e-2, 40);
        let rows = cost_curves(&eps, &models[1..2]).unwrap();
        let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.eps).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.filter).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let r2 = sxy * sxy / (sxx * syy);
        assert!(r2 > 0.999, "{r2}");
    }

    #[test]
    fn randomized_adiabatic_part_dominates() {
        let models = reference_models();
        for m in models.iter().filter(|m| m.name == "rm-general") {
            for eps in log_grid(1e-11, 0.1, 30) {
                let s = m.optimize(eps).unwrap().split;
                assert!(s.adiabatic > s.filter, "{} at {eps}", m.name);
            }
        }
    }

    #[test]
    fn crossover_brackets_sign_change() {
        let m = CostModel::constant("a2", CostMode::TwoNorm, 2.0);
        let eps = crossover(&m, 1e-12, 0.2).unwrap().expect("crossover");
        let s = m.optimize(eps).unwrap().split;
        assert!((s.adiabatic - s.filter).abs() < 1e-6 * s.total());
        assert!(crossover(&m, 1e-2, 0.2).unwrap().is_none());
    }

    #[test]
    fn reference_crossovers() {
        let models = reference_models();
        let at = |name: &str| {
            let m = models.iter().find(|m| m.name == name).unwrap();
            crossover(m, 1.1e-14, 0.29).unwrap()
        };
        let qw = at("qw-general").unwrap();
        assert!((1.3e-4..1.2e-3).contains(&qw), "{qw}");
        let rm = at("rm-general").unwrap();
        assert!((1e-13..1e-11).contains(&rm), "{rm}");
    }

    #[test]
    fn csv_and_manifest_shapes() {
        let models = reference_models();
        let rows = cost_curves(&[1e-3, 1e-4], &models).unwrap();
        assert_eq!(rows.len(), 8);
        let opt = optdelta_csv(&rows);
        assert_eq!(opt.lines().count(), 9);
        assert!(opt.starts_with("model,eps,delta_star"));
        assert_eq!(costsplit_csv(&rows).lines().count(), 9);
        let back: Vec<CostModel> = serde_json::from_str(&interpolation_manifest(&models).unwrap()).unwrap();
        assert_eq!(back, models);
    }

    proptest! {
        #[test]
        fn repetitions_at_least_one(delta in 0.0f64..0.99, eps_f in 1e-6f64..1.0) {
            prop_assert!(expected_repetitions(delta, eps_f) >= 1.0);
        }
    }
}
