//! Residual diagnostics emitted as plottable data: standardized residuals,
//! residual ACF, normal QQ points and a histogram.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ArimaFit;
use crate::error::{Error, Result};
use crate::series::{acf, TimeSeries};

pub const RESIDUAL_ACF_LAGS: usize = 20;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Plottable diagnostics for a fitted model; serializable to CSV/JSON for
/// external rendering.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsBundle {
    pub standardized_residuals: Vec<f64>,
    /// Residual autocorrelations at lags 0..=20.
    pub residual_acf: Vec<f64>,
    /// (standard-normal quantile, sorted standardized residual) pairs.
    pub qq_points: Vec<(f64, f64)>,
    pub histogram_bins: Vec<HistogramBin>,
}

/// Builds the diagnostics bundle for a fit with at least 20 residuals.
pub fn diagnostics(fit: &ArimaFit) -> Result<DiagnosticsBundle> {
    let n = fit.residuals.len();
    if n < 20 {
        return Err(Error::invalid(format!(
            "diagnostics need at least 20 residuals, got {}",
            n
        )));
    }
    let sigma = fit.sigma2.sqrt();
    let standardized: Vec<f64> = fit.residuals.iter().map(|r| r / sigma).collect();

    let resid_series = TimeSeries::new("residuals", 1, standardized.clone())?;
    let residual_acf = acf(&resid_series, RESIDUAL_ACF_LAGS)?;

    let mut sorted = standardized.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let normal = Normal::standard();
    let qq_points: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let prob = (i as f64 + 0.5) / n as f64;
            (normal.inverse_cdf(prob), v)
        })
        .collect();

    let min = sorted[0];
    let max = sorted[n - 1];
    let width = ((max - min) / HISTOGRAM_BINS as f64).max(f64::MIN_POSITIVE);
    let mut histogram_bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|b| HistogramBin {
            lo: min + b as f64 * width,
            hi: min + (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in &standardized {
        let idx = (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1);
        histogram_bins[idx].count += 1;
    }

    Ok(DiagnosticsBundle {
        standardized_residuals: standardized,
        residual_acf,
        qq_points,
        histogram_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::{fit_arima, ArimaOrder};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn simulated_ar1_fit(n: usize, seed: u64) -> ArimaFit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(n);
        let mut prev = 0.0f64;
        for _ in 0..n {
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            let y = 0.7 * prev + e;
            values.push(y);
            prev = y;
        }
        let s = TimeSeries::new("sim", 1, values).unwrap();
        fit_arima(&s, ArimaOrder::new(1, 0, 0).unwrap()).unwrap()
    }

    #[test]
    fn residuals_of_correct_model_look_like_white_noise() {
        let fit = simulated_ar1_fit(2000, 77);
        let d = diagnostics(&fit).unwrap();
        let n = d.standardized_residuals.len() as f64;
        let band = 2.0 / n.sqrt();
        let inside = d.residual_acf[1..]
            .iter()
            .filter(|v| v.abs() < band)
            .count();
        assert!(inside >= 18, "only {} of 20 lags inside the band", inside);
    }

    #[test]
    fn standardized_residuals_have_unit_variance() {
        let fit = simulated_ar1_fit(2000, 78);
        let d = diagnostics(&fit).unwrap();
        let n = d.standardized_residuals.len() as f64;
        let mean = d.standardized_residuals.iter().sum::<f64>() / n;
        let var = d
            .standardized_residuals
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!(var > 0.8 && var < 1.2, "variance {}", var);
    }

    #[test]
    fn histogram_counts_sum_to_residual_count() {
        let fit = simulated_ar1_fit(500, 79);
        let d = diagnostics(&fit).unwrap();
        let total: usize = d.histogram_bins.iter().map(|b| b.count).sum();
        assert_eq!(total, d.standardized_residuals.len());
        assert_eq!(d.histogram_bins.len(), 20);
    }

    #[test]
    fn qq_points_are_sorted_pairs() {
        let fit = simulated_ar1_fit(200, 80);
        let d = diagnostics(&fit).unwrap();
        assert_eq!(d.qq_points.len(), d.standardized_residuals.len());
        for w in d.qq_points.windows(2) {
            assert!(w[0].0 <= w[1].0);
            assert!(w[0].1 <= w[1].1);
        }
    }

    #[test]
    fn too_few_residuals_rejected() {
        let s = TimeSeries::new("tiny", 1, (0..15).map(|i| (i % 4) as f64).collect()).unwrap();
        let fit = fit_arima(&s, ArimaOrder::new(0, 0, 0).unwrap()).unwrap();
        assert!(matches!(
            diagnostics(&fit),
            Err(Error::InvalidArgument(_))
        ));
    }
}
