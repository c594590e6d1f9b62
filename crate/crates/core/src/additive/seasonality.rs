//! Fourier seasonality terms and holiday indicator matrices.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// One seasonal component: a Fourier expansion of `order` harmonics on a
/// cycle of `period` days, with an N(0, prior_sd^2) prior on each
/// coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Seasonality {
    pub name: String,
    pub period: f64,
    pub order: usize,
    pub prior_sd: f64,
}

impl Seasonality {
    pub fn new(name: impl Into<String>, period: f64, order: usize, prior_sd: f64) -> Self {
        Seasonality {
            name: name.into(),
            period,
            order,
            prior_sd,
        }
    }
}

/// One holiday: the set of day indices (past and future) on which it falls,
/// with an N(0, prior_sd^2) prior on its effect.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Holiday {
    pub name: String,
    pub dates: BTreeSet<u32>,
    pub prior_sd: f64,
}

impl Holiday {
    pub fn new(name: impl Into<String>, dates: impl IntoIterator<Item = u32>, prior_sd: f64) -> Self {
        Holiday {
            name: name.into(),
            dates: dates.into_iter().collect(),
            prior_sd,
        }
    }
}

/// Fourier series value
/// `sum_n a_n cos(2 pi n t / P) + b_n sin(2 pi n t / P)`;
/// an empty coefficient list gives 0.
pub fn fourier_seasonality(t: f64, period: f64, coeffs: &[(f64, f64)]) -> f64 {
    let base = 2.0 * std::f64::consts::PI * t / period;
    coeffs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let angle = base * (i + 1) as f64;
            a * angle.cos() + b * angle.sin()
        })
        .sum()
}

/// Binary holiday membership matrix: `Z[t][i] = 1` iff day `dates[t]` is in
/// holiday i's date set.
pub fn holiday_matrix(dates: &[u32], holidays: &[Holiday]) -> Vec<Vec<f64>> {
    dates
        .iter()
        .map(|day| {
            holidays
                .iter()
                .map(|h| if h.dates.contains(day) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}
