//! Least-squares convergence rates in log–log coordinates.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::ConvergenceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Slope of `log error` against `log ndofs`.
    pub slope_vs_dofs: f64,
    /// Slope of `log error` against `log h`.
    pub slope_vs_h: f64,
    /// Coefficient of determination of the fit against `h`.
    pub r_squared: f64,
}

pub fn estimate_rate(errors: &[f64], dofs: &[usize], h: &[f64]) -> Result<RateEstimate> {
    if errors.len() != dofs.len() || errors.len() != h.len() {
        return Err(Error::RateFit(format!(
            "{} errors, {} dof counts, {} mesh sizes",
            errors.len(),
            dofs.len(),
            h.len()
        )));
    }
    if errors.len() < 2 {
        return Err(Error::RateFit(format!("{} point(s)", errors.len())));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::RateFit(format!("error value {e}")));
    }
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let xd: Vec<f64> = dofs.iter().map(|&n| (n as f64).ln()).collect();
    let xh: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let (slope_vs_h, r_squared) = fit(&xh, &y)?;
    let (slope_vs_dofs, _) = fit(&xd, &y)?;
    Ok(RateEstimate {
        slope_vs_dofs,
        slope_vs_h,
        r_squared,
    })
}

fn fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::RateFit("abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok((slope, r2))
}

/// A fitted series: one quantity at fixed `(degree, λ, γ)` over levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRate {
    pub degree: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub quantity: String,
    /// Levels entering the fit.
    pub levels: Vec<usize>,
    /// Absent when fewer than two usable points remain.
    pub rate: Option<RateEstimate>,
}

/// Fits every series in `records`. Rows flagged failed or reference-limited
/// and rows without a positive error are skipped; the coarsest remaining
/// level is dropped when at least four remain.
pub fn fit_rates(records: &[ConvergenceRecord]) -> Vec<SeriesRate> {
    let mut keys: Vec<(usize, u64, u64, &str)> = Vec::new();
    for r in records.iter().filter(|r| r.is_rate_quantity()) {
        let key = (r.degree, r.lambda.to_bits(), r.gamma.to_bits(), r.quantity.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(degree, lambda, gamma, quantity)| {
            let mut rows: Vec<&ConvergenceRecord> = records
                .iter()
                .filter(|r| {
                    r.degree == degree
                        && r.lambda.to_bits() == lambda
                        && r.gamma.to_bits() == gamma
                        && r.quantity == quantity
                        && r.usable_for_fit()
                })
                .collect();
            rows.sort_by_key(|r| r.level);
            if rows.len() >= 4 {
                rows.remove(0);
            }
            let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
            let dofs: Vec<usize> = rows.iter().map(|r| r.ndofs).collect();
            let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
            SeriesRate {
                degree,
                lambda: f64::from_bits(lambda),
                gamma: f64::from_bits(gamma),
                quantity: quantity.to_string(),
                levels: rows.iter().map(|r| r.level).collect(),
                rate: estimate_rate(&errors, &dofs, &h).ok(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn halving_h_with_quartered_error_is_order_two() {
        let r = estimate_rate(&[0.1, 0.025], &[10, 40], &[0.5, 0.25]).unwrap();
        assert!((r.slope_vs_h - 2.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dofs_slope_example() {
        let r = estimate_rate(&[1e-2, 2.5e-3], &[100, 400], &[0.1, 0.05]).unwrap();
        assert!((r.slope_vs_dofs + 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_is_rejected() {
        assert!(matches!(estimate_rate(&[0.1], &[10], &[0.5]), Err(Error::RateFit(_))));
    }

    #[test]
    fn nonpositive_errors_are_rejected() {
        assert!(estimate_rate(&[0.1, 0.0], &[10, 40], &[0.5, 0.25]).is_err());
        assert!(estimate_rate(&[0.1, -1.0], &[10, 40], &[0.5, 0.25]).is_err());
        assert!(estimate_rate(&[0.1, f64::NAN], &[10, 40], &[0.5, 0.25]).is_err());
    }

    proptest! {
        #[test]
        fn exact_power_laws_are_recovered(p in -4.0f64..4.0, c in 1e-6f64..1e3, n in 2usize..7) {
            let h: Vec<f64> = (0..n).map(|l| 0.5f64.powi(l as i32)).collect();
            let dofs: Vec<usize> = (0..n).map(|l| 8usize << (2 * l)).collect();
            let e: Vec<f64> = h.iter().map(|v| c * v.powf(p)).collect();
            let r = estimate_rate(&e, &dofs, &h).unwrap();
            prop_assert!((r.slope_vs_h - p).abs() < 1e-9);
            prop_assert!((r.slope_vs_dofs + p / 2.0).abs() < 1e-9);
            prop_assert!(r.r_squared > 1.0 - 1e-9);
        }
    }
}
