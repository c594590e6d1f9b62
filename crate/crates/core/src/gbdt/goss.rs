//! Gradient-based one-side sampling: keep every large-gradient row, sample
//! the small-gradient remainder and up-weight it to stay unbiased.

use rand::Rng;

/// Selects rows for one boosting round. The top `ceil(a*n)` rows by
/// absolute gradient are always kept with weight 1; a uniform random
/// `ceil(b*n)` of the remainder is kept with weight `(1-a)/b`; everything
/// else is dropped for the round. Returned indices are ascending.
///
/// `a >= 1` keeps all rows with weight 1 and consumes no randomness, so
/// such a round is bit-identical to unsampled training.
pub fn goss_sample<R: Rng>(gradients: &[f64], a: f64, b: f64, rng: &mut R) -> (Vec<u32>, Vec<f64>) {
    assert!(a + b <= 1.0 + 1e-12, "goss fractions must satisfy a + b <= 1");
    let n = gradients.len();
    let k_top = (a * n as f64).ceil() as usize;
    if k_top >= n {
        return ((0..n as u32).collect(), vec![1.0; n]);
    }

    let mut indices: Vec<u32> = (0..n as u32).collect();
    // Total order: larger |gradient| first, index as tie-break.
    let by_magnitude = |x: &u32, y: &u32| {
        let gx = gradients[*x as usize].abs();
        let gy = gradients[*y as usize].abs();
        gy.partial_cmp(&gx)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(y))
    };
    if k_top > 0 {
        indices.select_nth_unstable_by(k_top - 1, by_magnitude);
    }

    let rest = &indices[k_top..];
    let k_rand = ((b * n as f64).ceil() as usize).min(rest.len());
    let mut selected: Vec<(u32, f64)> = indices[..k_top].iter().map(|&i| (i, 1.0)).collect();
    if k_rand > 0 {
        let weight = (1.0 - a) / b;
        for pos in rand::seq::index::sample(rng, rest.len(), k_rand) {
            selected.push((rest[pos], weight));
        }
    }
    selected.sort_unstable_by_key(|(i, _)| *i);
    let rows: Vec<u32> = selected.iter().map(|(i, _)| *i).collect();
    let weights: Vec<f64> = selected.iter().map(|(_, w)| *w).collect();
    (rows, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_keep_when_a_is_one() {
        let grads = vec![1.0, -2.0, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (rows, weights) = goss_sample(&grads, 1.0, 0.0, &mut rng);
        assert_eq!(rows, vec![0, 1, 2]);
        assert!(weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn all_random_when_a_zero_b_one() {
        let grads = vec![1.0, -2.0, 0.5, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (rows, weights) = goss_sample(&grads, 0.0, 1.0, &mut rng);
        assert_eq!(rows, vec![0, 1, 2, 3]);
        assert!(weights.iter().all(|&w| w == 1.0)); // (1-0)/1
    }

    #[test]
    fn top_fraction_always_kept() {
        let grads: Vec<f64> = (0..100).map(|i| i as f64 - 50.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (rows, weights) = goss_sample(&grads, 0.2, 0.1, &mut rng);
        assert_eq!(rows.len(), 30);
        // The 20 largest |gradients| sit at the extremes of the ramp.
        for big in [0u32, 1, 2, 98, 99] {
            assert!(rows.contains(&big), "row {} with large gradient dropped", big);
            let pos = rows.iter().position(|&r| r == big).unwrap();
            assert_eq!(weights[pos], 1.0);
        }
        // Sampled remainder carries the compensating weight.
        let w_small = (1.0 - 0.2) / 0.1;
        assert!(weights.iter().any(|&w| w == w_small));
    }

    #[test]
    fn b_zero_keeps_only_top() {
        let grads: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (rows, weights) = goss_sample(&grads, 0.3, 0.0, &mut rng);
        assert_eq!(rows, vec![7, 8, 9]);
        assert!(weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let grads: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 - 50.0).collect();
        let a = goss_sample(&grads, 0.2, 0.1, &mut ChaCha8Rng::seed_from_u64(7));
        let b = goss_sample(&grads, 0.2, 0.1, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn weighted_gradient_sum_is_unbiased() {
        // Monte Carlo: the weighted sum over selected rows estimates the
        // full-data gradient sum.
        let grads: Vec<f64> = (0..500)
            .map(|i| (i as f64 * 0.713).sin() * 3.0 + 0.5)
            .collect();
        let full: f64 = grads.iter().sum();
        let mut total = 0.0;
        let n_seeds = 1000;
        for seed in 0..n_seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (rows, weights) = goss_sample(&grads, 0.2, 0.1, &mut rng);
            total += rows
                .iter()
                .zip(&weights)
                .map(|(&r, &w)| grads[r as usize] * w)
                .sum::<f64>();
        }
        let mean = total / n_seeds as f64;
        assert!(
            (mean - full).abs() / full.abs() < 0.02,
            "mean weighted sum {} vs full {}",
            mean,
            full
        );
    }
}
