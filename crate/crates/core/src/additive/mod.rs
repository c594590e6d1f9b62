//! Additive forecaster: piecewise linear or logistic trend with
//! changepoints, Fourier seasonalities, holiday indicator effects, and
//! MAP-style penalized fitting with a non-negative forecast clamp.

mod seasonality;
mod solver;
mod trend;

pub use seasonality::{fourier_seasonality, holiday_matrix, Holiday, Seasonality};
pub use trend::{changepoint_indicator, gamma_linear, gamma_logistic, trend_linear, trend_logistic};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, SimplexOptions};
use crate::series::{ForecastResult, TimeSeries};
use solver::{solve_map, DesignColumn, Penalty, SolveOptions};

/// Trend family for the additive model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendType {
    Linear,
    Logistic,
}

/// Number of automatically placed changepoints.
pub const AUTO_CHANGEPOINTS: usize = 25;
/// Fraction of the training window that receives automatic changepoints.
pub const AUTO_CHANGEPOINT_RANGE: f64 = 0.8;

/// Configuration of the additive model.
///
/// `changepoints: None` requests the automatic grid (25 uniform points over
/// the first 80% of the training window); `Some(vec![])` disables
/// changepoints entirely. `capacity` is the carrying capacity sequence for
/// the logistic trend, aligned to the training window's first day and
/// extended by its last value beyond the end.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditiveConfig {
    pub trend_type: TrendType,
    pub capacity: Vec<f64>,
    pub changepoints: Option<Vec<f64>>,
    /// Laplace scale on the changepoint rate adjustments.
    pub tau: f64,
    pub seasonalities: Vec<Seasonality>,
    pub holidays: Vec<Holiday>,
}

impl AdditiveConfig {
    /// Linear-trend configuration with no seasonality or holidays and the
    /// automatic changepoint grid.
    pub fn linear() -> Self {
        AdditiveConfig {
            trend_type: TrendType::Linear,
            capacity: Vec::new(),
            changepoints: None,
            tau: 0.05,
            seasonalities: Vec::new(),
            holidays: Vec::new(),
        }
    }

    /// Logistic-trend configuration with the given capacity sequence.
    pub fn logistic(capacity: Vec<f64>) -> Self {
        AdditiveConfig {
            trend_type: TrendType::Logistic,
            capacity,
            changepoints: None,
            tau: 0.05,
            seasonalities: Vec::new(),
            holidays: Vec::new(),
        }
    }

    /// The retail-series default: weekly, monthly, quarterly and yearly
    /// Fourier seasonalities on calendar-average periods. Daily sampling
    /// makes a "daily" component vacuous, so none is included.
    pub fn standard() -> Self {
        let mut cfg = Self::linear();
        cfg.seasonalities = vec![
            Seasonality::new("weekly", 7.0, 3, 10.0),
            Seasonality::new("monthly", 30.4375, 5, 10.0),
            Seasonality::new("quarterly", 91.3125, 5, 10.0),
            Seasonality::new("yearly", 365.25, 10, 10.0),
        ];
        cfg
    }

    pub fn with_changepoints(mut self, changepoints: Vec<f64>) -> Self {
        self.changepoints = Some(changepoints);
        self
    }

    pub fn with_seasonality(mut self, s: Seasonality) -> Self {
        self.seasonalities.push(s);
        self
    }

    pub fn with_holiday(mut self, h: Holiday) -> Self {
        self.holidays.push(h);
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    fn validate(&self, start_day: f64, end_day: f64) -> Result<()> {
        if self.tau <= 0.0 {
            return Err(Error::invalid("tau must be positive"));
        }
        for s in &self.seasonalities {
            if s.period <= 0.0 {
                return Err(Error::invalid(format!(
                    "seasonality {} has non-positive period",
                    s.name
                )));
            }
            if s.order == 0 {
                return Err(Error::invalid(format!(
                    "seasonality {} needs order >= 1",
                    s.name
                )));
            }
            if s.prior_sd <= 0.0 {
                return Err(Error::invalid(format!(
                    "seasonality {} needs a positive prior sd",
                    s.name
                )));
            }
        }
        for h in &self.holidays {
            if h.prior_sd <= 0.0 {
                return Err(Error::invalid(format!(
                    "holiday {} needs a positive prior sd",
                    h.name
                )));
            }
        }
        if let Some(cps) = &self.changepoints {
            for w in cps.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::invalid("changepoints must be strictly ascending"));
                }
            }
            if let (Some(first), Some(last)) = (cps.first(), cps.last()) {
                if *first <= start_day || *last >= end_day {
                    return Err(Error::invalid(
                        "changepoints must lie strictly inside the training window",
                    ));
                }
            }
        }
        if self.trend_type == TrendType::Logistic {
            if self.capacity.is_empty() {
                return Err(Error::invalid("logistic trend requires a capacity sequence"));
            }
            if self.capacity.iter().any(|&c| c <= 0.0) {
                return Err(Error::domain("capacity must be strictly positive"));
            }
        }
        Ok(())
    }
}

/// A fitted additive model. `gamma` equals `-s_j * delta_j` exactly for the
/// linear trend and the continuity recursion's output for the logistic one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditiveFit {
    pub k: f64,
    pub m: f64,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Per seasonality, the (a_n, b_n) pairs for n = 1..=order.
    pub fourier_coeffs: Vec<Vec<(f64, f64)>>,
    pub holiday_coeffs: Vec<f64>,
    /// Configuration with changepoints resolved to their actual positions.
    pub config: AdditiveConfig,
    pub sigma_e: f64,
    series_id: String,
    train_start: u32,
    train_end: u32,
}

/// Per-component evaluation over a day range; the componentwise sum equals
/// the raw (unclamped) prediction at every day.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentTable {
    pub days: Vec<u32>,
    pub trend: Vec<f64>,
    /// One (name, values) entry per configured seasonality.
    pub seasonal: Vec<(String, Vec<f64>)>,
    pub holidays: Vec<f64>,
}

impl AdditiveFit {
    fn changepoints(&self) -> &[f64] {
        self.config.changepoints.as_deref().unwrap_or(&[])
    }

    fn capacity_at(&self, t: f64) -> f64 {
        let idx = (t - self.train_start as f64).max(0.0) as usize;
        let cap = &self.config.capacity;
        cap[idx.min(cap.len() - 1)]
    }

    /// Trend component at day t.
    pub fn trend_at(&self, t: f64) -> f64 {
        match self.config.trend_type {
            TrendType::Linear => trend_linear(t, self.k, self.m, &self.delta, self.changepoints()),
            TrendType::Logistic => trend_logistic(
                t,
                self.k,
                self.m,
                &self.delta,
                self.changepoints(),
                self.capacity_at(t),
            )
            .expect("capacity validated at fit time"),
        }
    }

    /// Value of seasonality `idx` at day t.
    pub fn seasonal_at(&self, idx: usize, t: f64) -> f64 {
        fourier_seasonality(t, self.config.seasonalities[idx].period, &self.fourier_coeffs[idx])
    }

    /// Combined holiday effect at day t.
    pub fn holiday_at(&self, day: u32) -> f64 {
        self.config
            .holidays
            .iter()
            .zip(self.holiday_coeffs.iter())
            .filter(|(h, _)| h.dates.contains(&day))
            .map(|(_, k)| k)
            .sum()
    }

    /// Raw (unclamped) prediction: trend plus each seasonality in
    /// configuration order plus the holiday effect. [`components`] returns
    /// exactly these addends.
    pub fn predict_raw(&self, day: u32) -> f64 {
        let t = day as f64;
        let mut v = self.trend_at(t);
        for idx in 0..self.config.seasonalities.len() {
            v += self.seasonal_at(idx, t);
        }
        v + self.holiday_at(day)
    }

    pub fn train_end(&self) -> u32 {
        self.train_end
    }
}

/// Fits the additive model by minimizing the MAP objective. The linear
/// trend is a convex lasso/ridge problem solved by coordinate descent with
/// soft-thresholding on the changepoint adjustments; the logistic trend
/// alternates simplex steps on the trend parameters with linear sub-solves
/// for the seasonal and holiday coefficients.
pub fn fit_additive(series: &TimeSeries, config: &AdditiveConfig) -> Result<AdditiveFit> {
    let start = series.start_day as f64;
    let end = series.end_day() as f64;
    config.validate(start, end)?;

    if let Some(max_period) = config
        .seasonalities
        .iter()
        .map(|s| s.period)
        .max_by(|a, b| a.partial_cmp(b).unwrap())
    {
        if (series.len() as f64) < 2.0 * max_period {
            return Err(Error::invalid(format!(
                "series length {} is below twice the longest seasonal period {}",
                series.len(),
                max_period
            )));
        }
    }

    // Resolve the changepoint grid.
    let changepoints: Vec<f64> = match &config.changepoints {
        Some(cps) => cps.clone(),
        None => auto_changepoints(start, end, series.len()),
    };
    let mut resolved = config.clone();
    resolved.changepoints = Some(changepoints.clone());

    // Degenerate design: a flat series admits only the flat fit.
    let mean = series.values.iter().sum::<f64>() / series.len() as f64;
    if series.values.iter().all(|v| (v - mean).abs() < 1e-12) {
        log::warn!(
            "series {} is constant; returning a flat additive fit",
            series.series_id
        );
        return Ok(flat_fit(series, resolved, mean));
    }

    match config.trend_type {
        TrendType::Linear => fit_linear(series, resolved, changepoints),
        TrendType::Logistic => fit_logistic(series, resolved, changepoints),
    }
}

fn auto_changepoints(start: f64, end: f64, len: usize) -> Vec<f64> {
    if len < 3 {
        return Vec::new();
    }
    let span = AUTO_CHANGEPOINT_RANGE * (end - start);
    let count = AUTO_CHANGEPOINTS.min(len - 2);
    (1..=count)
        .map(|j| start + span * j as f64 / count as f64)
        .collect()
}

fn flat_fit(series: &TimeSeries, config: AdditiveConfig, level: f64) -> AdditiveFit {
    let n_cp = config.changepoints.as_ref().map_or(0, |c| c.len());
    let fourier_coeffs = config
        .seasonalities
        .iter()
        .map(|s| vec![(0.0, 0.0); s.order])
        .collect();
    let holiday_coeffs = vec![0.0; config.holidays.len()];
    AdditiveFit {
        k: 0.0,
        m: level,
        delta: vec![0.0; n_cp],
        gamma: vec![0.0; n_cp],
        fourier_coeffs,
        holiday_coeffs,
        config,
        sigma_e: 0.0,
        series_id: series.series_id.clone(),
        train_start: series.start_day,
        train_end: series.end_day(),
    }
}

/// Column layout of the linear design matrix, in order: intercept, scaled
/// slope, one hinge per changepoint, Fourier pairs per seasonality, one
/// indicator per holiday.
fn fit_linear(
    series: &TimeSeries,
    config: AdditiveConfig,
    changepoints: Vec<f64>,
) -> Result<AdditiveFit> {
    let n = series.len();
    let t0 = series.start_day as f64;
    let t_span = ((series.end_day() as f64) - t0).max(1.0);
    let days: Vec<f64> = (0..n).map(|i| t0 + i as f64).collect();

    let mut columns: Vec<DesignColumn> = Vec::new();
    columns.push(DesignColumn {
        values: vec![1.0; n],
        penalty: Penalty::None,
    });
    columns.push(DesignColumn {
        values: days.iter().map(|&t| (t - t0) / t_span).collect(),
        penalty: Penalty::None,
    });
    for &s in &changepoints {
        let u_s = (s - t0) / t_span;
        columns.push(DesignColumn {
            values: days
                .iter()
                .map(|&t| {
                    let u = (t - t0) / t_span;
                    if u >= u_s {
                        u - u_s
                    } else {
                        0.0
                    }
                })
                .collect(),
            // |delta| = |delta'| / t_span, so the Laplace weight rescales.
            penalty: Penalty::L1 {
                scale: 1.0 / (config.tau * t_span),
            },
        });
    }
    for seas in &config.seasonalities {
        for harmonic in 1..=seas.order {
            let base = 2.0 * std::f64::consts::PI * harmonic as f64 / seas.period;
            columns.push(DesignColumn {
                values: days.iter().map(|&t| (base * t).cos()).collect(),
                penalty: Penalty::L2 {
                    scale: 1.0 / (seas.prior_sd * seas.prior_sd),
                },
            });
            columns.push(DesignColumn {
                values: days.iter().map(|&t| (base * t).sin()).collect(),
                penalty: Penalty::L2 {
                    scale: 1.0 / (seas.prior_sd * seas.prior_sd),
                },
            });
        }
    }
    for holiday in &config.holidays {
        columns.push(DesignColumn {
            values: days
                .iter()
                .map(|&t| {
                    if holiday.dates.contains(&(t as u32)) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            penalty: Penalty::L2 {
                scale: 1.0 / (holiday.prior_sd * holiday.prior_sd),
            },
        });
    }

    let opts = SolveOptions::default();
    let sol = solve_map(&columns, &series.values, &opts);

    // Unpack back to original day units.
    let mut iter = sol.coefficients.iter();
    let m_prime = *iter.next().unwrap();
    let k_prime = *iter.next().unwrap();
    let k = k_prime / t_span;
    let m = m_prime - k_prime * t0 / t_span;
    let delta: Vec<f64> = changepoints.iter().map(|_| iter.next().unwrap() / t_span).collect();
    let gamma = gamma_linear(&delta, &changepoints);
    let mut fourier_coeffs = Vec::with_capacity(config.seasonalities.len());
    for seas in &config.seasonalities {
        let mut pairs = Vec::with_capacity(seas.order);
        for _ in 0..seas.order {
            let a = *iter.next().unwrap();
            let b = *iter.next().unwrap();
            pairs.push((a, b));
        }
        fourier_coeffs.push(pairs);
    }
    let holiday_coeffs: Vec<f64> = config.holidays.iter().map(|_| *iter.next().unwrap()).collect();

    let fit = AdditiveFit {
        k,
        m,
        delta,
        gamma,
        fourier_coeffs,
        holiday_coeffs,
        config,
        sigma_e: sol.sigma_e,
        series_id: series.series_id.clone(),
        train_start: series.start_day,
        train_end: series.end_day(),
    };
    if !sol.converged {
        return Err(Error::AdditiveNonConvergence {
            best: Box::new(fit),
            sweeps: sol.sweeps_used,
        });
    }
    Ok(fit)
}

fn fit_logistic(
    series: &TimeSeries,
    config: AdditiveConfig,
    changepoints: Vec<f64>,
) -> Result<AdditiveFit> {
    let n = series.len();
    let t0 = series.start_day as f64;
    let days: Vec<f64> = (0..n).map(|i| t0 + i as f64).collect();
    let cap_at = |t: f64| -> f64 {
        let idx = (t - t0).max(0.0) as usize;
        config.capacity[idx.min(config.capacity.len() - 1)]
    };

    // Endpoint initialization on the logit scale.
    let clamp_ratio = |y: f64, c: f64| (y / c).clamp(0.01, 0.99);
    let l0 = {
        let r = clamp_ratio(series.values[0], cap_at(days[0]));
        (1.0 / r - 1.0).ln()
    };
    let l1 = {
        let r = clamp_ratio(series.values[n - 1], cap_at(days[n - 1]));
        (1.0 / r - 1.0).ln()
    };
    let span = (days[n - 1] - days[0]).max(1.0);
    let mut k0 = (l0 - l1) / span;
    if k0.abs() < 1e-6 {
        k0 = 1e-3;
    }
    let m0 = days[0] + l0 / k0;

    let s_count = changepoints.len();
    let mut trend_params = vec![0.0; 2 + s_count];
    trend_params[0] = k0;
    trend_params[1] = m0;

    // Seasonal/holiday design (ridge-only) reused across alternations.
    let mut columns: Vec<DesignColumn> = Vec::new();
    for seas in &config.seasonalities {
        for harmonic in 1..=seas.order {
            let base = 2.0 * std::f64::consts::PI * harmonic as f64 / seas.period;
            for trig in 0..2 {
                columns.push(DesignColumn {
                    values: days
                        .iter()
                        .map(|&t| if trig == 0 { (base * t).cos() } else { (base * t).sin() })
                        .collect(),
                    penalty: Penalty::L2 {
                        scale: 1.0 / (seas.prior_sd * seas.prior_sd),
                    },
                });
            }
        }
    }
    for holiday in &config.holidays {
        columns.push(DesignColumn {
            values: days
                .iter()
                .map(|&t| if holiday.dates.contains(&(t as u32)) { 1.0 } else { 0.0 })
                .collect(),
            penalty: Penalty::L2 {
                scale: 1.0 / (holiday.prior_sd * holiday.prior_sd),
            },
        });
    }

    let mut linear_effect = vec![0.0; n];
    let mut beta = vec![0.0; columns.len()];
    let mut sigma_e = {
        let mean = series.values.iter().sum::<f64>() / n as f64;
        (series.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let mut prev_obj = f64::INFINITY;
    let mut converged = false;

    for _round in 0..10 {
        // Trend step given the current seasonal/holiday effect.
        let residual_target: Vec<f64> = series
            .values
            .iter()
            .zip(linear_effect.iter())
            .map(|(y, s)| y - s)
            .collect();
        let s2 = sigma_e * sigma_e;
        let tau = config.tau;
        let objective = |x: &[f64]| -> f64 {
            let k = x[0];
            let m = x[1];
            let delta = &x[2..];
            let mut sse = 0.0;
            for (i, &t) in days.iter().enumerate() {
                let g = match trend_logistic(t, k, m, delta, &changepoints, cap_at(t)) {
                    Ok(v) => v,
                    Err(_) => return 1e300,
                };
                let e = residual_target[i] - g;
                sse += e * e;
            }
            let l1: f64 = delta.iter().map(|d| d.abs()).sum();
            0.5 * sse + s2 * l1 / tau
        };
        let nm = nelder_mead(
            objective,
            &trend_params,
            &SimplexOptions {
                step: 0.1,
                tolerance: 1e-10,
                max_iterations: 2000,
            },
        );
        trend_params = nm.x;

        // Seasonal/holiday step given the trend.
        if !columns.is_empty() {
            let k = trend_params[0];
            let m = trend_params[1];
            let delta = &trend_params[2..];
            let detrended: Vec<f64> = days
                .iter()
                .zip(series.values.iter())
                .map(|(&t, y)| {
                    y - trend_logistic(t, k, m, delta, &changepoints, cap_at(t)).unwrap_or(0.0)
                })
                .collect();
            let sol = solve_map(&columns, &detrended, &SolveOptions::default());
            beta = sol.coefficients;
        }

        // Profile sigma_e and test the joint objective for convergence.
        linear_effect = (0..n)
            .map(|i| {
                columns
                    .iter()
                    .zip(beta.iter())
                    .map(|(c, b)| c.values[i] * b)
                    .sum::<f64>()
            })
            .collect();
        let k = trend_params[0];
        let m = trend_params[1];
        let delta = &trend_params[2..];
        let mut sse = 0.0;
        for (i, &t) in days.iter().enumerate() {
            let g = trend_logistic(t, k, m, delta, &changepoints, cap_at(t)).unwrap_or(0.0);
            let e = series.values[i] - g - linear_effect[i];
            sse += e * e;
        }
        sigma_e = (sse / n as f64).sqrt();
        let obj = 0.5 * sse;
        if (prev_obj - obj).abs() <= 1e-8 * obj.abs() + 1e-12 {
            converged = true;
            break;
        }
        prev_obj = obj;
    }

    let k = trend_params[0];
    let m = trend_params[1];
    let delta: Vec<f64> = trend_params[2..].to_vec();
    let gamma = gamma_logistic(k, m, &delta, &changepoints);
    let mut fourier_coeffs = Vec::with_capacity(config.seasonalities.len());
    let mut iter = beta.iter();
    for seas in &config.seasonalities {
        let mut pairs = Vec::with_capacity(seas.order);
        for _ in 0..seas.order {
            let a = *iter.next().unwrap();
            let b = *iter.next().unwrap();
            pairs.push((a, b));
        }
        fourier_coeffs.push(pairs);
    }
    let holiday_coeffs: Vec<f64> = config.holidays.iter().map(|_| *iter.next().unwrap()).collect();

    let fit = AdditiveFit {
        k,
        m,
        delta,
        gamma,
        fourier_coeffs,
        holiday_coeffs,
        config,
        sigma_e,
        series_id: series.series_id.clone(),
        train_start: series.start_day,
        train_end: series.end_day(),
    };
    if !converged {
        return Err(Error::AdditiveNonConvergence {
            best: Box::new(fit),
            sweeps: 10,
        });
    }
    Ok(fit)
}

/// Forecasts `h` days past the training window. Raw predictions are the
/// trend plus seasonal and holiday effects (future holiday dates come from
/// the configuration); negative values are clamped to zero.
pub fn forecast_additive(fit: &AdditiveFit, h: usize) -> Result<ForecastResult> {
    if h == 0 {
        return Err(Error::invalid("forecast horizon must be >= 1"));
    }
    let start = fit.train_end + 1;
    let values: Vec<f64> = (0..h as u32)
        .map(|i| fit.predict_raw(start + i).max(0.0))
        .collect();
    Ok(ForecastResult {
        series_id: fit.series_id.clone(),
        start_day: start,
        values,
        lower: None,
        upper: None,
    })
}

/// Evaluates each model component over a day range. The trend, every
/// seasonality and the holiday effect sum to the raw prediction exactly.
pub fn components(fit: &AdditiveFit, days: std::ops::RangeInclusive<u32>) -> ComponentTable {
    let days: Vec<u32> = days.collect();
    let trend: Vec<f64> = days.iter().map(|&d| fit.trend_at(d as f64)).collect();
    let seasonal: Vec<(String, Vec<f64>)> = fit
        .config
        .seasonalities
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            (
                s.name.clone(),
                days.iter().map(|&d| fit.seasonal_at(idx, d as f64)).collect(),
            )
        })
        .collect();
    let holidays: Vec<f64> = days.iter().map(|&d| fit.holiday_at(d)).collect();
    ComponentTable {
        days,
        trend,
        seasonal,
        holidays,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new("t", 1, values).unwrap()
    }

    #[test]
    fn noiseless_linear_recovers_slope_and_offset() {
        let values: Vec<f64> = (1..=300).map(|t| 2.0 * t as f64 + 3.0).collect();
        let fit = fit_additive(&ts(values), &AdditiveConfig::linear()).unwrap();
        assert_abs_diff_eq!(fit.k, 2.0, epsilon = 1e-3);
        assert_abs_diff_eq!(fit.m, 3.0, epsilon = 1e-3);
        for d in &fit.delta {
            assert!(d.abs() < 1e-3, "delta {} not shrunk", d);
        }
        // gamma_j = -s_j delta_j exactly.
        let cps = fit.config.changepoints.clone().unwrap();
        for ((g, d), s) in fit.gamma.iter().zip(&fit.delta).zip(&cps) {
            assert_eq!(*g, -s * d);
        }
    }

    #[test]
    fn recovers_sine_seasonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 700;
        let values: Vec<f64> = (1..=n)
            .map(|t| {
                let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.1;
                5.0 + 3.0 * (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin() + noise
            })
            .collect();
        let cfg = AdditiveConfig::linear().with_seasonality(Seasonality::new("weekly", 7.0, 3, 10.0));
        let fit = fit_additive(&ts(values), &cfg).unwrap();
        let mut se = 0.0;
        for t in 1..=n {
            let truth = 3.0 * (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin();
            let got = fit.seasonal_at(0, t as f64);
            se += (truth - got) * (truth - got);
        }
        let rmse = (se / n as f64).sqrt();
        assert!(rmse < 0.1, "seasonal recovery rmse {}", rmse);
    }

    #[test]
    fn recovers_slope_change_at_changepoint() {
        // Slope 1 before t=100, slope 2 after; noiseless.
        let values: Vec<f64> = (1..=300)
            .map(|t| {
                let t = t as f64;
                if t < 100.0 {
                    t
                } else {
                    100.0 + 2.0 * (t - 100.0)
                }
            })
            .collect();
        let grid: Vec<f64> = (1..=14).map(|j| 20.0 * j as f64).collect(); // includes 100
        let cfg = AdditiveConfig::linear().with_changepoints(grid.clone());
        let fit = fit_additive(&ts(values), &cfg).unwrap();
        let near: f64 = grid
            .iter()
            .zip(&fit.delta)
            .filter(|(s, _)| (**s - 100.0).abs() <= 20.0)
            .map(|(_, d)| d)
            .sum();
        assert!((0.9..=1.1).contains(&near), "sum of deltas near 100 = {}", near);
    }

    #[test]
    fn constant_series_gives_flat_fit() {
        let fit = fit_additive(&ts(vec![4.0; 50]), &AdditiveConfig::linear()).unwrap();
        assert_eq!(fit.k, 0.0);
        assert_eq!(fit.m, 4.0);
        let fc = forecast_additive(&fit, 5).unwrap();
        assert!(fc.values.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn forecast_is_clamped_and_sized() {
        // Steeply falling series pushes forecasts negative.
        let values: Vec<f64> = (1..=100).map(|t| 50.0 - t as f64).collect();
        let fit = fit_additive(&ts(values), &AdditiveConfig::linear()).unwrap();
        let fc = forecast_additive(&fit, 28).unwrap();
        assert_eq!(fc.values.len(), 28);
        assert!(fc.values.iter().all(|&v| v >= 0.0));
        // The far tail is genuinely negative pre-clamp.
        assert!(fit.predict_raw(fit.train_end() + 28) < 0.0);
        assert_eq!(*fc.values.last().unwrap(), 0.0);
    }

    #[test]
    fn components_sum_to_raw_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let n_cp = rng.random_range(0..4);
            let cps: Vec<f64> = (1..=n_cp).map(|j| 10.0 + 20.0 * j as f64).collect();
            let holidays = Holiday::new("h", [15u32, 40], 10.0);
            let cfg = AdditiveConfig {
                trend_type: TrendType::Linear,
                capacity: Vec::new(),
                changepoints: Some(cps.clone()),
                tau: 0.05,
                seasonalities: vec![Seasonality::new("weekly", 7.0, 2, 10.0)],
                holidays: vec![holidays],
            };
            let delta: Vec<f64> = cps.iter().map(|_| rng.random_range(-0.5..0.5)).collect();
            let gamma = gamma_linear(&delta, &cps);
            let fit = AdditiveFit {
                k: rng.random_range(-1.0..1.0),
                m: rng.random_range(-5.0..5.0),
                delta,
                gamma,
                fourier_coeffs: vec![vec![
                    (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                    (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                ]],
                holiday_coeffs: vec![rng.random_range(-3.0..3.0)],
                config: cfg,
                sigma_e: 1.0,
                series_id: "r".into(),
                train_start: 1,
                train_end: 100,
            };
            let table = components(&fit, 1..=100);
            for (i, &day) in table.days.iter().enumerate() {
                let sum = table.trend[i] + table.seasonal[0].1[i] + table.holidays[i];
                let raw = fit.predict_raw(day);
                assert!(
                    (sum - raw).abs() <= 1e-12 * (1.0 + raw.abs()),
                    "sum {} != raw {}",
                    sum,
                    raw
                );
            }
        }
    }

    #[test]
    fn zero_holiday_coefficients_zero_component() {
        let cfg = AdditiveConfig::linear().with_holiday(Holiday::new("x", [5u32], 10.0));
        let values: Vec<f64> = (1..=60).map(|t| t as f64).collect();
        let mut fit = fit_additive(&ts(values), &cfg).unwrap();
        fit.holiday_coeffs = vec![0.0];
        let table = components(&fit, 1..=60);
        assert!(table.holidays.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weekly_seasonal_component_is_periodic() {
        let values: Vec<f64> = (1..=140)
            .map(|t| 5.0 + (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin())
            .collect();
        let cfg = AdditiveConfig::linear().with_seasonality(Seasonality::new("weekly", 7.0, 3, 10.0));
        let fit = fit_additive(&ts(values), &cfg).unwrap();
        for t in 1..=60 {
            let a = fit.seasonal_at(0, t as f64);
            let b = fit.seasonal_at(0, (t + 7) as f64);
            assert!((a - b).abs() < 1e-9, "not 7-periodic at t={}", t);
        }
    }

    #[test]
    fn trend_continuity_random_parameterizations() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for case in 0..100 {
            let n_cp = rng.random_range(1..6);
            let mut cps: Vec<f64> = (0..n_cp)
                .map(|_| rng.random_range(10.0..190.0))
                .collect();
            cps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cps.dedup_by(|a, b| (*a - *b).abs() < 1.0);
            let delta: Vec<f64> = cps.iter().map(|_| rng.random_range(-0.1..0.1)).collect();
            let k = rng.random_range(-0.3..0.3);
            let m = rng.random_range(5.0..50.0);
            let eps = 1e-6;
            for &s in &cps {
                let lo = trend_linear(s - eps, k, m, &delta, &cps);
                let hi = trend_linear(s + eps, k, m, &delta, &cps);
                let at = trend_linear(s, k, m, &delta, &cps);
                assert!(
                    (hi - lo).abs() <= 1e-6 * (1.0 + at.abs()),
                    "linear jump case {case}: {}",
                    hi - lo
                );
                let lo = trend_logistic(s - eps, 0.1 + k.abs(), m, &delta, &cps, 100.0).unwrap();
                let hi = trend_logistic(s + eps, 0.1 + k.abs(), m, &delta, &cps, 100.0).unwrap();
                let at = trend_logistic(s, 0.1 + k.abs(), m, &delta, &cps, 100.0).unwrap();
                assert!(
                    (hi - lo).abs() <= 1e-6 * (1.0 + at.abs()),
                    "logistic jump case {case}: {}",
                    hi - lo
                );
            }
        }
    }

    #[test]
    fn weaker_penalty_never_worsens_sse() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let values: Vec<f64> = (1..=200)
            .map(|t| {
                let t = t as f64;
                let base = if t < 80.0 { t } else { 80.0 + 1.8 * (t - 80.0) };
                base + rng.sample::<f64, _>(rand_distr::StandardNormal) * 2.0
            })
            .collect();
        let series = ts(values.clone());
        let mut last_sse = f64::INFINITY;
        for tau in [0.01, 0.1, 1.0] {
            let cfg = AdditiveConfig::linear().with_tau(tau);
            let fit = fit_additive(&series, &cfg).unwrap();
            let sse: f64 = (1..=200)
                .map(|t| {
                    let e = values[t - 1] - fit.predict_raw(t as u32);
                    e * e
                })
                .sum();
            assert!(
                sse <= last_sse * (1.0 + 1e-6),
                "sse {} at tau {} worse than {}",
                sse,
                tau,
                last_sse
            );
            last_sse = sse;
        }
    }

    #[test]
    fn logistic_fit_recovers_saturating_curve() {
        let cap = 100.0;
        let values: Vec<f64> = (1..=200)
            .map(|t| cap / (1.0 + (-0.08 * (t as f64 - 80.0)).exp()))
            .collect();
        let cfg = AdditiveConfig::logistic(vec![cap; 200]).with_changepoints(vec![]);
        let fit = fit_additive(&ts(values.clone()), &cfg).unwrap();
        assert_abs_diff_eq!(fit.k, 0.08, epsilon = 0.01);
        assert_abs_diff_eq!(fit.m, 80.0, epsilon = 1.0);
        // In-sample reconstruction is tight.
        let mut se = 0.0;
        for t in 1..=200usize {
            let e = values[t - 1] - fit.predict_raw(t as u32);
            se += e * e;
        }
        assert!((se / 200.0).sqrt() < 0.5);
    }

    #[test]
    fn changepoints_outside_window_rejected() {
        let cfg = AdditiveConfig::linear().with_changepoints(vec![500.0]);
        let values: Vec<f64> = (1..=100).map(|t| t as f64).collect();
        assert!(matches!(
            fit_additive(&ts(values), &cfg),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn short_series_with_long_period_rejected() {
        let cfg = AdditiveConfig::linear().with_seasonality(Seasonality::new("yearly", 365.25, 3, 10.0));
        let values: Vec<f64> = (1..=100).map(|t| t as f64).collect();
        assert!(fit_additive(&ts(values), &cfg).is_err());
    }
}
