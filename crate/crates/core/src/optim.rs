//! Derivative-free simplex minimizer used by the ARIMA and logistic-trend
//! estimators.

/// Options controlling a [`nelder_mead`] run.
#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Initial simplex edge length per coordinate.
    pub step: f64,
    /// Convergence threshold on the relative objective spread of the simplex.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            step: 0.1,
            tolerance: 1e-10,
            max_iterations: 2000,
        }
    }
}

/// Outcome of a simplex minimization.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` by the Nelder-Mead method with standard reflection,
/// expansion, contraction and shrink coefficients. Deterministic: no
/// randomness is involved, so identical inputs give identical iterates.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let n = x0.len();
    if n == 0 {
        return SimplexResult {
            x: Vec::new(),
            fx: f(&[]),
            iterations: 0,
            converged: true,
        };
    }

    // Initial simplex: x0 plus one vertex per coordinate offset by `step`.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-12 {
            opts.step * v[i].abs()
        } else {
            opts.step
        };
        let fv = f(&v);
        simplex.push((v, fv));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));

        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= opts.tolerance * (best.abs() + 1e-12) {
            converged = true;
            break;
        }

        // Centroid of all vertices but the worst.
        let mut centroid = vec![0.0; n];
        for (v, _) in simplex.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(v.iter()) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let worst_x = simplex[n].0.clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(worst_x.iter())
            .map(|(c, w)| c + ALPHA * (c - w))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < simplex[0].1 {
            // Try expanding further along the same direction.
            let expand: Vec<f64> = centroid
                .iter()
                .zip(worst_x.iter())
                .map(|(c, w)| c + GAMMA * (c - w))
                .collect();
            let f_expand = f(&expand);
            simplex[n] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[n - 1].1 {
            simplex[n] = (reflect, f_reflect);
        } else {
            // Contract toward the better of the worst point and its reflection.
            let (toward, f_toward) = if f_reflect < simplex[n].1 {
                (&reflect, f_reflect)
            } else {
                (&worst_x, simplex[n].1)
            };
            let contract: Vec<f64> = centroid
                .iter()
                .zip(toward.iter())
                .map(|(c, w)| c + RHO * (w - c))
                .collect();
            let f_contract = f(&contract);
            if f_contract < f_toward {
                simplex[n] = (contract, f_contract);
            } else {
                // Shrink everything toward the best vertex.
                let best_x = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = best_x
                        .iter()
                        .zip(entry.0.iter())
                        .map(|(b, v)| b + SIGMA * (v - b))
                        .collect();
                    entry.1 = f(&shrunk);
                    entry.0 = shrunk;
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    SimplexResult {
        x: simplex[0].0.clone(),
        fx: simplex[0].1,
        iterations,
        converged,
    }
}
