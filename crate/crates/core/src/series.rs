//! Time-series primitives shared by every forecasting engine: differencing,
//! autocorrelation, classical decomposition and the RMSE metric.
//!
//! All functions here are pure; they never mutate their inputs and hold no
//! shared state, so they are safe to call from any number of threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly daily-indexed series of observations for one (item, store)
/// pair. Day `start_day` corresponds to the first element of `values`;
/// spacing is implicitly one day with no gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub series_id: String,
    /// Day index of the first observation (day 1 = first calendar date).
    pub start_day: u32,
    pub values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series, enforcing the non-empty and `start_day >= 1`
    /// invariants.
    pub fn new(series_id: impl Into<String>, start_day: u32, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("time series must contain at least one value"));
        }
        if start_day < 1 {
            return Err(Error::invalid("start_day must be >= 1"));
        }
        Ok(TimeSeries {
            series_id: series_id.into(),
            start_day,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Day index of the last observation.
    pub fn end_day(&self) -> u32 {
        self.start_day + self.values.len() as u32 - 1
    }
}

/// Point forecasts for one series over a fixed horizon, with optional 95%
/// intervals. Values are raw model output unless a caller applied the
/// non-negativity clamp.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastResult {
    pub series_id: String,
    /// Day index of the first forecast step.
    pub start_day: u32,
    pub values: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl ForecastResult {
    /// Clamps negative point forecasts to zero, in place.
    pub fn clamp_non_negative(&mut self) {
        for v in self.values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }
}

/// Additive or multiplicative seasonal decomposition mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionMode {
    Additive,
    Multiplicative,
}

/// Classical decomposition of a series into level/trend, seasonal and
/// residual components.
///
/// Additive mode satisfies `level_trend + seasonal + residual == input`;
/// multiplicative mode satisfies `level_trend * seasonal * residual == input`
/// (both to floating tolerance). Multiplicative is defined only for strictly
/// positive inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    pub level_trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub mode: DecompositionMode,
    pub period: usize,
}

/// Applies `d` rounds of first differencing. The output has `len - d`
/// elements and its `start_day` is shifted forward by `d`.
pub fn difference(series: &TimeSeries, d: usize) -> Result<TimeSeries> {
    if d > series.len() - 1 {
        return Err(Error::invalid(format!(
            "cannot difference {} times a series of length {}",
            d,
            series.len()
        )));
    }
    let mut values = series.values.clone();
    for _ in 0..d {
        values = values.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(TimeSeries {
        series_id: series.series_id.clone(),
        start_day: series.start_day + d as u32,
        values,
    })
}

/// Inverts [`difference`]: given the `d` dropped prefix values of each
/// differencing level (`seeds[k]` is the last pre-differencing value at
/// level `k`), cumulative-sums the differenced values back to the original
/// scale. Used by the ARIMA forecaster and the round-trip property tests.
pub fn undifference(diffed: &[f64], seeds: &[f64]) -> Vec<f64> {
    let mut values = diffed.to_vec();
    for seed in seeds.iter().rev() {
        let mut acc = *seed;
        for v in values.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    values
}

/// Sample autocorrelation function at lags `0..=max_lag` using the biased
/// n-denominator estimator, which keeps the sequence positive semi-definite.
///
/// Lag 0 is exactly 1. A constant series has zero variance and is rejected
/// as degenerate.
pub fn acf(series: &TimeSeries, max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag >= n {
        return Err(Error::invalid(format!(
            "max_lag {} must be smaller than the series length {}",
            max_lag, n
        )));
    }
    let values = &series.values;
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::degenerate(
            "autocorrelation of a constant series is undefined (zero variance)",
        ));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for lag in 1..=max_lag {
        let num: f64 = (lag..n)
            .map(|t| (values[t] - mean) * (values[t - lag] - mean))
            .sum();
        out.push(num / denom);
    }
    Ok(out)
}

/// Classical decomposition with a centered moving average of window `period`
/// for the trend (averaging the two straddling windows when the period is
/// even) and period-position means of the detrended values for the seasonal
/// component, re-centered to sum to zero.
///
/// Multiplicative mode runs the same algorithm in log space, so the seasonal
/// factors have geometric mean one and the log of each component matches the
/// additive decomposition of the log series.
pub fn decompose(
    series: &TimeSeries,
    period: usize,
    mode: DecompositionMode,
) -> Result<Decomposition> {
    if period == 0 {
        return Err(Error::invalid("decomposition period must be positive"));
    }
    if series.len() < 2 * period {
        return Err(Error::invalid(format!(
            "series length {} is below 2 * period = {}",
            series.len(),
            2 * period
        )));
    }
    match mode {
        DecompositionMode::Additive => Ok(decompose_additive(&series.values, period)),
        DecompositionMode::Multiplicative => {
            if series.values.iter().any(|&v| v <= 0.0) {
                return Err(Error::domain(
                    "multiplicative decomposition requires strictly positive values",
                ));
            }
            let logs: Vec<f64> = series.values.iter().map(|v| v.ln()).collect();
            let add = decompose_additive(&logs, period);
            // Residual is recomputed in the original scale so the
            // multiplicative reconstruction is exact up to rounding.
            let level_trend: Vec<f64> = add.level_trend.iter().map(|v| v.exp()).collect();
            let seasonal: Vec<f64> = add.seasonal.iter().map(|v| v.exp()).collect();
            let residual: Vec<f64> = series
                .values
                .iter()
                .zip(level_trend.iter().zip(seasonal.iter()))
                .map(|(&y, (&t, &s))| y / (t * s))
                .collect();
            Ok(Decomposition {
                level_trend,
                seasonal,
                residual,
                mode,
                period,
            })
        }
    }
}

fn decompose_additive(values: &[f64], period: usize) -> Decomposition {
    let n = values.len();
    let trend_core = centered_moving_average(values, period);

    // Seasonal means use only positions where the true centered average
    // exists; endpoint-filled trend values would contaminate them.
    let mut pos_sum = vec![0.0f64; period];
    let mut pos_count = vec![0usize; period];
    for (t, trend) in trend_core.iter().enumerate() {
        if let Some(tr) = trend {
            pos_sum[t % period] += values[t] - tr;
            pos_count[t % period] += 1;
        }
    }
    let mut season_means: Vec<f64> = (0..period)
        .map(|p| {
            if pos_count[p] > 0 {
                pos_sum[p] / pos_count[p] as f64
            } else {
                0.0
            }
        })
        .collect();
    let grand = season_means.iter().sum::<f64>() / period as f64;
    for s in season_means.iter_mut() {
        *s -= grand;
    }

    // Endpoints where the window does not fit take the nearest computed
    // trend value.
    let first_idx = trend_core.iter().position(|t| t.is_some()).unwrap();
    let last_idx = trend_core.iter().rposition(|t| t.is_some()).unwrap();
    let level_trend: Vec<f64> = (0..n)
        .map(|t| trend_core[t.clamp(first_idx, last_idx)].unwrap())
        .collect();

    let seasonal: Vec<f64> = (0..n).map(|t| season_means[t % period]).collect();
    let residual: Vec<f64> = (0..n)
        .map(|t| values[t] - level_trend[t] - seasonal[t])
        .collect();
    Decomposition {
        level_trend,
        seasonal,
        residual,
        mode: DecompositionMode::Additive,
        period,
    }
}

/// Centered moving average of window `period`; `None` where the window does
/// not fit. Even periods average the two straddling windows (a 2x`period`
/// average with half weights at the extremes).
fn centered_moving_average(values: &[f64], period: usize) -> Vec<Option<f64>> {
    let n = values.len();
    let mut out = vec![None; n];
    if period % 2 == 1 {
        let half = period / 2;
        for t in half..n.saturating_sub(half) {
            let sum: f64 = values[t - half..=t + half].iter().sum();
            out[t] = Some(sum / period as f64);
        }
    } else {
        let half = period / 2;
        for t in half..n.saturating_sub(half) {
            let mut sum = 0.5 * values[t - half] + 0.5 * values[t + half];
            sum += values[t - half + 1..t + half].iter().sum::<f64>();
            out[t] = Some(sum / period as f64);
        }
    }
    out
}

/// Root mean squared error between two equal-length sequences.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.is_empty() {
        return Err(Error::invalid("rmse over empty sequences is undefined"));
    }
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "rmse length mismatch: {} vs {}",
            actual.len(),
            predicted.len()
        )));
    }
    let sq_sum: f64 = actual
        .iter()
        .zip(predicted.iter())
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok((sq_sum / actual.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new("test", 1, values).unwrap()
    }

    #[test]
    fn difference_constant_series_is_zero() {
        let out = difference(&ts(vec![5.0, 5.0, 5.0]), 1).unwrap();
        assert_eq!(out.values, vec![0.0, 0.0]);
        assert_eq!(out.start_day, 2);
    }

    #[test]
    fn difference_first_and_second_order() {
        let s = ts(vec![1.0, 3.0, 6.0, 10.0]);
        assert_eq!(difference(&s, 1).unwrap().values, vec![2.0, 3.0, 4.0]);
        assert_eq!(difference(&s, 2).unwrap().values, vec![1.0, 1.0]);
    }

    #[test]
    fn difference_rejects_excessive_order() {
        let s = ts(vec![1.0, 2.0]);
        assert!(matches!(
            difference(&s, 2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn undifference_roundtrip() {
        let s = ts(vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]);
        for d in 0..=3 {
            let diffed = difference(&s, d).unwrap();
            // Seeds: last value of each intermediate differencing level,
            // taken just before the next difference drops it.
            let mut seeds = Vec::new();
            let mut level = s.values.clone();
            for _ in 0..d {
                seeds.push(level[0]);
                level = level.windows(2).map(|w| w[1] - w[0]).collect();
            }
            // Reconstruct forward from the first element of each level.
            let mut rebuilt = diffed.values.clone();
            for seed in seeds.iter().rev() {
                let mut acc = *seed;
                let mut expanded = vec![acc];
                for v in &rebuilt {
                    acc += *v;
                    expanded.push(acc);
                }
                rebuilt = expanded;
            }
            assert_eq!(rebuilt, s.values, "roundtrip failed for d={}", d);
        }
    }

    #[test]
    fn acf_lag_zero_is_one_and_bounded() {
        let s = ts(vec![1.0, 4.0, 2.0, 8.0, 5.0, 7.0, 1.0, 3.0]);
        let r = acf(&s, 5).unwrap();
        assert_eq!(r[0], 1.0);
        for v in &r {
            assert!(*v >= -1.0 - 1e-12 && *v <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn acf_constant_series_is_degenerate() {
        let s = ts(vec![2.0, 2.0, 2.0, 2.0]);
        assert!(matches!(acf(&s, 2), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn acf_recovers_ar1_coefficient() {
        // AR(1) with phi = 0.8: theoretical lag-1 autocorrelation is phi.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let phi = 0.8;
        let n = 10_000;
        let mut values = Vec::with_capacity(n);
        let mut prev = 0.0;
        for _ in 0..n {
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            let y = phi * prev + e;
            values.push(y);
            prev = y;
        }
        let r = acf(&ts(values), 1).unwrap();
        assert!(
            r[1] > 0.77 && r[1] < 0.83,
            "lag-1 acf {} outside [0.77, 0.83]",
            r[1]
        );
    }

    #[test]
    fn decompose_pure_trend_has_no_seasonality() {
        let values: Vec<f64> = (1..=30).map(|t| t as f64).collect();
        let d = decompose(&ts(values), 7, DecompositionMode::Additive).unwrap();
        for s in &d.seasonal {
            assert!(s.abs() < 1e-6, "seasonal {} not ~0", s);
        }
    }

    #[test]
    fn decompose_recovers_sine_seasonality() {
        let values: Vec<f64> = (1..=70)
            .map(|t| 10.0 + (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin())
            .collect();
        let sine: Vec<f64> = (1..=70)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin())
            .collect();
        let d = decompose(&ts(values), 7, DecompositionMode::Additive).unwrap();
        let corr = correlation(&d.seasonal, &sine);
        assert!(corr > 0.99, "correlation {} too low", corr);
    }

    #[test]
    fn multiplicative_matches_additive_of_logs() {
        let values: Vec<f64> = (1..=140)
            .map(|t| {
                let t = t as f64;
                (t / 100.0 + 0.1 * (2.0 * std::f64::consts::PI * t / 7.0).sin()).exp()
            })
            .collect();
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let mult = decompose(&ts(values), 7, DecompositionMode::Multiplicative).unwrap();
        let add = decompose(&ts(logs), 7, DecompositionMode::Additive).unwrap();
        for t in 0..mult.level_trend.len() {
            assert_abs_diff_eq!(mult.level_trend[t].ln(), add.level_trend[t], epsilon = 1e-6);
            assert_abs_diff_eq!(mult.seasonal[t].ln(), add.seasonal[t], epsilon = 1e-6);
            assert_abs_diff_eq!(mult.residual[t].ln(), add.residual[t], epsilon = 1e-6);
        }
    }

    #[test]
    fn multiplicative_rejects_nonpositive_values() {
        let s = ts(vec![1.0, 2.0, 0.0, 4.0, 5.0, 6.0, 7.0, 8.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(matches!(
            decompose(&s, 7, DecompositionMode::Multiplicative),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn decompose_rejects_short_series() {
        let s = ts(vec![1.0; 13]);
        assert!(matches!(
            decompose(&s, 7, DecompositionMode::Additive),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn reconstruction_invariant_random_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..100 {
            let n = rng.random_range(20..200);
            let period = rng.random_range(2..=10.min(n / 2));
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..100.0)).collect();
            let s = ts(values.clone());

            let add = decompose(&s, period, DecompositionMode::Additive).unwrap();
            for t in 0..n {
                let rebuilt = add.level_trend[t] + add.seasonal[t] + add.residual[t];
                let tol = 1e-9 * (1.0 + values[t].abs());
                assert!(
                    (rebuilt - values[t]).abs() <= tol,
                    "additive case {case}: t={t} rebuilt {rebuilt} != {}",
                    values[t]
                );
            }

            let mult = decompose(&s, period, DecompositionMode::Multiplicative).unwrap();
            for t in 0..n {
                let rebuilt = mult.level_trend[t] * mult.seasonal[t] * mult.residual[t];
                let tol = 1e-9 * (1.0 + values[t].abs());
                assert!(
                    (rebuilt - values[t]).abs() <= tol,
                    "multiplicative case {case}: t={t} rebuilt {rebuilt} != {}",
                    values[t]
                );
            }
        }
    }

    #[test]
    fn rmse_basics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            (25.0f64 / 2.0).sqrt(),
            epsilon = 1e-12
        );
        assert!(matches!(rmse(&[], &[]), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va.sqrt() * vb.sqrt())
    }

    proptest! {
        #[test]
        fn rmse_is_symmetric_and_positive(
            pair in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..100)
        ) {
            let a: Vec<f64> = pair.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pair.iter().map(|p| p.1).collect();
            let ab = rmse(&a, &b).unwrap();
            let ba = rmse(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
            if a != b {
                prop_assert!(ab > 0.0);
            }
        }

        #[test]
        fn difference_cumsum_roundtrip(
            values in proptest::collection::vec(-1e6f64..1e6, 2..200),
            d in 0usize..3
        ) {
            prop_assume!(d < values.len());
            let s = TimeSeries::new("p", 1, values.clone()).unwrap();
            let diffed = difference(&s, d).unwrap();
            prop_assert_eq!(diffed.len(), s.len() - d);

            let mut seeds = Vec::new();
            let mut level = values.clone();
            for _ in 0..d {
                seeds.push(level[0]);
                level = level.windows(2).map(|w| w[1] - w[0]).collect();
            }
            let mut rebuilt = diffed.values.clone();
            for seed in seeds.iter().rev() {
                let mut acc = *seed;
                let mut expanded = vec![acc];
                for v in &rebuilt {
                    acc += *v;
                    expanded.push(acc);
                }
                rebuilt = expanded;
            }
            for (r, o) in rebuilt.iter().zip(values.iter()) {
                prop_assert!((r - o).abs() <= 1e-6 * (1.0 + o.abs()));
            }
        }

        #[test]
        fn acf_bounded(values in proptest::collection::vec(-1e3f64..1e3, 10..100)) {
            let s = TimeSeries::new("p", 1, values).unwrap();
            if let Ok(r) = acf(&s, 5) {
                prop_assert_eq!(r[0], 1.0);
                for v in &r {
                    prop_assert!(*v >= -1.0 - 1e-9 && *v <= 1.0 + 1e-9);
                }
            }
        }
    }
}
