//! Piecewise trend functions: changepoint indicators, the linear trend with
//! offset corrections, and the saturating logistic trend.

use crate::error::{Error, Result};

/// Binary changepoint indicator a(t): entry j is 1 iff `t >= changepoints[j]`.
/// Changepoints must be ascending.
pub fn changepoint_indicator(t: f64, changepoints: &[f64]) -> Vec<f64> {
    changepoints
        .iter()
        .map(|&s| if t >= s { 1.0 } else { 0.0 })
        .collect()
}

/// Offset adjustments for the linear trend: `gamma_j = -s_j * delta_j`,
/// which makes the trend continuous at each changepoint.
pub fn gamma_linear(delta: &[f64], changepoints: &[f64]) -> Vec<f64> {
    delta
        .iter()
        .zip(changepoints.iter())
        .map(|(&d, &s)| -s * d)
        .collect()
}

/// Piecewise linear trend
/// `g(t) = (k + a(t)'delta) * t + (m + a(t)'gamma)` with `gamma_j = -s_j delta_j`.
pub fn trend_linear(t: f64, k: f64, m: f64, delta: &[f64], changepoints: &[f64]) -> f64 {
    let mut rate = k;
    let mut offset = m;
    for (j, &s) in changepoints.iter().enumerate() {
        if t >= s {
            rate += delta[j];
            offset += -s * delta[j];
        }
    }
    rate * t + offset
}

/// Offset adjustments for the logistic trend, accumulated left to right so
/// each segment connects continuously:
/// `gamma_j = (s_j - m - sum_{l<j} gamma_l) * (1 - rate_before_j / rate_after_j)`
/// where the rates are running sums of k and delta.
pub fn gamma_logistic(k: f64, m: f64, delta: &[f64], changepoints: &[f64]) -> Vec<f64> {
    let mut gamma = Vec::with_capacity(delta.len());
    let mut gamma_sum = 0.0;
    let mut rate = k;
    for (j, &s) in changepoints.iter().enumerate() {
        let rate_next = rate + delta[j];
        let ratio = if rate_next.abs() > 1e-12 {
            rate / rate_next
        } else {
            // Degenerate: the post-changepoint rate vanishes; no finite
            // offset keeps the curve continuous, so leave it unadjusted.
            1.0
        };
        let g = (s - m - gamma_sum) * (1.0 - ratio);
        gamma.push(g);
        gamma_sum += g;
        rate = rate_next;
    }
    gamma
}

/// Piecewise logistic trend
/// `g(t) = C(t) / (1 + exp(-(k + a(t)'delta) (t - (m + a(t)'gamma))))`.
pub fn trend_logistic(
    t: f64,
    k: f64,
    m: f64,
    delta: &[f64],
    changepoints: &[f64],
    capacity: f64,
) -> Result<f64> {
    if capacity <= 0.0 {
        return Err(Error::domain(format!(
            "logistic trend requires positive capacity, got {}",
            capacity
        )));
    }
    let gamma = gamma_logistic(k, m, delta, changepoints);
    let mut rate = k;
    let mut offset = m;
    for (j, &s) in changepoints.iter().enumerate() {
        if t >= s {
            rate += delta[j];
            offset += gamma[j];
        }
    }
    Ok(capacity / (1.0 + (-rate * (t - offset)).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn indicator_examples() {
        assert_eq!(changepoint_indicator(5.0, &[3.0, 7.0]), vec![1.0, 0.0]);
        assert_eq!(changepoint_indicator(1.0, &[3.0, 7.0]), vec![0.0, 0.0]);
        assert_eq!(changepoint_indicator(9.0, &[3.0, 7.0]), vec![1.0, 1.0]);
        // Boundary: t exactly at a changepoint counts as past it.
        assert_eq!(changepoint_indicator(3.0, &[3.0, 7.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn linear_trend_without_changepoints_is_affine() {
        assert_abs_diff_eq!(trend_linear(4.0, 2.0, 1.0, &[], &[]), 9.0);
    }

    #[test]
    fn linear_trend_hand_example() {
        // k=1, m=0, changepoint at 10 with delta=-0.5: slope halves there.
        let d = [-0.5];
        let s = [10.0];
        assert_abs_diff_eq!(trend_linear(10.0, 1.0, 0.0, &d, &s), 10.0);
        assert_abs_diff_eq!(trend_linear(20.0, 1.0, 0.0, &d, &s), 15.0);
        // Continuity from below.
        assert_abs_diff_eq!(
            trend_linear(10.0 - 1e-9, 1.0, 0.0, &d, &s),
            10.0,
            epsilon = 1e-7
        );
    }

    #[test]
    fn flat_trend_before_first_changepoint() {
        assert_abs_diff_eq!(trend_linear(2.0, 0.0, 3.0, &[0.7], &[5.0]), 3.0);
    }

    #[test]
    fn logistic_midpoint_is_half_capacity() {
        let g = trend_logistic(30.0, 0.2, 30.0, &[], &[], 100.0).unwrap();
        assert_abs_diff_eq!(g, 50.0, epsilon = 1e-12);
    }

    #[test]
    fn logistic_saturates_at_capacity() {
        let g = trend_logistic(40.0, 50.0, 30.0, &[], &[], 100.0).unwrap();
        assert_abs_diff_eq!(g, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn logistic_rejects_nonpositive_capacity() {
        assert!(trend_logistic(1.0, 0.1, 0.0, &[], &[], 0.0).is_err());
        assert!(trend_logistic(1.0, 0.1, 0.0, &[], &[], -4.0).is_err());
    }

    #[test]
    fn logistic_continuity_at_changepoint() {
        let k = 0.1;
        let m = 30.0;
        let delta = [0.05];
        let s = [50.0];
        let eps = 1e-6;
        let lo = trend_logistic(50.0 - eps, k, m, &delta, &s, 100.0).unwrap();
        let hi = trend_logistic(50.0 + eps, k, m, &delta, &s, 100.0).unwrap();
        let at = trend_logistic(50.0, k, m, &delta, &s, 100.0).unwrap();
        assert!((hi - lo).abs() < 1e-6 * (1.0 + at.abs()), "jump {}", hi - lo);
    }

    #[test]
    fn logistic_matches_segmentwise_rederivation() {
        // Independent oracle: evaluate each segment's logistic directly,
        // choosing the offset on each segment so that the segments join.
        let k = 0.1;
        let m = 30.0;
        let delta = [0.05, -0.08];
        let s = [50.0, 80.0];
        let cap = 100.0;

        let sigmoid_inv = |g: f64| -> f64 { (cap / g - 1.0).ln() };
        // Segment 0: rate k, offset m. At s1 the value is fixed; solve the
        // next segment's offset so it passes through that value, and so on.
        let mut rates: Vec<f64> = vec![k];
        let mut offsets: Vec<f64> = vec![m];
        for (j, &sj) in s.iter().enumerate() {
            let rate_prev = rates[j];
            let off_prev = offsets[j];
            let value_at_s = cap / (1.0 + (-rate_prev * (sj - off_prev)).exp());
            let rate_next = rate_prev + delta[j];
            // value_at_s = cap / (1 + exp(-rate_next (sj - off_next)))
            let off_next = sj + sigmoid_inv(value_at_s) / rate_next;
            rates.push(rate_next);
            offsets.push(off_next);
        }
        let oracle = |t: f64| -> f64 {
            let seg = s.iter().filter(|&&sj| t >= sj).count();
            cap / (1.0 + (-rates[seg] * (t - offsets[seg])).exp())
        };

        for t in [10.0, 49.9, 50.0, 50.1, 65.0, 79.9, 80.0, 95.0, 120.0] {
            let got = trend_logistic(t, k, m, &delta, &s, cap).unwrap();
            assert_abs_diff_eq!(got, oracle(t), epsilon = 1e-9);
        }
    }

    #[test]
    fn gamma_linear_identity() {
        let g = gamma_linear(&[0.5, -0.2], &[10.0, 20.0]);
        assert_eq!(g, vec![-5.0, 4.0]);
    }
}
