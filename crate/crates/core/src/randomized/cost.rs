//! Query counts for implementing the segment exponentials.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Result};

/// Constant `c` of the non-asymptotic simulation bound.
pub const SIM_CONSTANT: f64 = 1.47762;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryModel {
    /// `3 (e alpha |t| / 2 + ln(2c / gamma))`.
    NonAsymptotic,
    /// `2 alpha |t| + 3^(2/3) (alpha |t|)^(1/3) ln(1/gamma)^(2/3)`.
    LeadingOrder,
}

/// Block-encoding queries for one exponential `e^{-i t H}` with `alpha_H = 1`.
///
/// `halved` applies the factor-of-two saving of improved signal processing.
pub fn query_cost(t: f64, gamma: f64, model: QueryModel, halved: bool) -> Result<f64> {
    check_range("t", t, "[0, inf)", t >= 0.0 && t.is_finite())?;
    check_range("gamma", gamma, "(0, 1)", gamma > 0.0 && gamma < 1.0)?;
    let cost = match model {
        QueryModel::NonAsymptotic => {
            3.0 * (std::f64::consts::E * t / 2.0 + (2.0 * SIM_CONSTANT / gamma).ln())
        }
        QueryModel::LeadingOrder => {
            2.0 * t + 3f64.powf(2.0 / 3.0) * t.cbrt() * (1.0 / gamma).ln().powf(2.0 / 3.0)
        }
    };
    Ok(if halved { cost / 2.0 } else { cost })
}

/// Sum of [`query_cost`] over segment times (signs ignored).
pub fn total_query_cost(times: &[f64], gamma: f64, model: QueryModel, halved: bool) -> Result<f64> {
    times
        .iter()
        .map(|t| query_cost(t.abs(), gamma, model, halved))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_is_the_log_term() {
        let c = query_cost(0.0, 1e-3, QueryModel::NonAsymptotic, false).unwrap();
        assert!((c - 3.0 * (2.0 * 1.47762 / 1e-3f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn leading_order_beats_non_asymptotic() {
        let a = query_cost(100.0, 1e-3, QueryModel::NonAsymptotic, false).unwrap();
        let b = query_cost(100.0, 1e-3, QueryModel::LeadingOrder, false).unwrap();
        assert!(b < a);
        let big = query_cost(1e6, 1e-3, QueryModel::LeadingOrder, false).unwrap();
        assert!((big / 1e6 - 2.0).abs() < 0.02);
        let halved = query_cost(1e6, 1e-3, QueryModel::LeadingOrder, true).unwrap();
        assert_eq!(halved, big / 2.0);
    }

    #[test]
    fn aggregate_matches_closed_form() {
        let times = [1.0, -2.5, 0.25];
        let gamma = 1e-4;
        let total = total_query_cost(&times, gamma, QueryModel::NonAsymptotic, false).unwrap();
        let sum_abs: f64 = times.iter().map(|t: &f64| t.abs()).sum();
        let closed = 3.0
            * (std::f64::consts::E / 2.0 * sum_abs
                + times.len() as f64 * (2.0 * SIM_CONSTANT / gamma).ln());
        assert!((total - closed).abs() < 1e-10);
        assert!(query_cost(1.0, 1.0, QueryModel::LeadingOrder, false).is_err());
        assert!(query_cost(-1.0, 0.1, QueryModel::LeadingOrder, false).is_err());
    }
}
