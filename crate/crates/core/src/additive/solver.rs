//! Penalized least-squares solver for the additive model's MAP objective.
//!
//! The objective is
//! `SSE / (2 sigma_e^2) + sum |delta_j| / tau + sum_seas (a^2+b^2) / (2 sigma^2) + sum kappa^2 / (2 nu^2)`.
//! For a fixed `sigma_e` this is a lasso/ridge mix. Coordinate descent with
//! soft-thresholding discovers the active set; an exact Newton solve on the
//! active set then polishes each round, which keeps convergence fast even on
//! the strongly collinear changepoint-hinge block. `sigma_e` is profiled out
//! by resetting it to the residual standard deviation each outer round.

/// Penalty attached to one design column, expressed in the
/// objective-times-sigma_e^2 scale where the data term is SSE/2.
#[derive(Debug, Clone, Copy)]
pub enum Penalty {
    /// No shrinkage (trend slope and offset).
    None,
    /// L1 with weight `sigma_e^2 * scale`; soft-thresholds the coordinate.
    L1 { scale: f64 },
    /// L2 with weight `sigma_e^2 * scale`; shrinks the coordinate.
    L2 { scale: f64 },
}

pub struct DesignColumn {
    pub values: Vec<f64>,
    pub penalty: Penalty,
}

pub struct SolveOptions {
    /// Relative objective-change threshold for a round to count as converged.
    pub tolerance: f64,
    /// Stability threshold for the profiled sigma_e across rounds, relative
    /// to the data scale.
    pub sigma_tolerance: f64,
    /// Coordinate-descent sweep budget.
    pub max_sweeps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-8,
            sigma_tolerance: 1e-6,
            max_sweeps: 5000,
        }
    }
}

pub struct Solution {
    pub coefficients: Vec<f64>,
    pub sigma_e: f64,
    pub sweeps_used: usize,
    pub converged: bool,
}

/// Minimizes the MAP objective over the coefficients of `columns` given the
/// target `y`. Deterministic: fixed sweep order, no randomness.
pub fn solve_map(columns: &[DesignColumn], y: &[f64], opts: &SolveOptions) -> Solution {
    let n = y.len();
    let p = columns.len();
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.values.iter().map(|v| v * v).sum::<f64>())
        .collect();

    // Gram matrix and X'y, computed once; the polish step works on
    // submatrices of these.
    let gram: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    columns[i]
                        .values
                        .iter()
                        .zip(columns[j].values.iter())
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect()
        })
        .collect();
    let xty: Vec<f64> = (0..p)
        .map(|j| columns[j].values.iter().zip(y.iter()).map(|(x, v)| x * v).sum())
        .collect();

    let mut beta = vec![0.0; p];
    let mut residual = y.to_vec();
    let mut sigma_e = {
        let mean = y.iter().sum::<f64>() / n as f64;
        (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    // Convergence is judged against the data scale; sigma_e and the
    // objective both tend to zero on noiseless inputs and have no stable
    // relative size there.
    let sigma_scale = sigma_e.max(1e-12);
    let obj_floor = 1e-12 * n as f64 * sigma_scale * sigma_scale;

    let mut sweeps_used = 0usize;
    let mut converged = false;
    let mut prev_sigma = f64::INFINITY;

    while sweeps_used < opts.max_sweeps {
        let s2 = sigma_e * sigma_e;

        // Inner loop at fixed sigma_e: discovery sweep + active-set polish.
        let mut prev_obj = f64::INFINITY;
        loop {
            if sweeps_used >= opts.max_sweeps {
                break;
            }
            sweeps_used += 1;
            let mut changed = false;
            for j in 0..p {
                if norms[j] == 0.0 {
                    continue;
                }
                let col = &columns[j].values;
                let mut rho = 0.0;
                for (r, x) in residual.iter().zip(col.iter()) {
                    rho += r * x;
                }
                rho += beta[j] * norms[j];
                let new = match columns[j].penalty {
                    Penalty::None => rho / norms[j],
                    Penalty::L2 { scale } => rho / (norms[j] + s2 * scale),
                    Penalty::L1 { scale } => soft_threshold(rho, s2 * scale) / norms[j],
                };
                if new != beta[j] {
                    let diff = beta[j] - new;
                    for (r, x) in residual.iter_mut().zip(col.iter()) {
                        *r += diff * x;
                    }
                    beta[j] = new;
                    changed = true;
                }
            }

            polish_active_set(columns, &gram, &xty, &norms, s2, &mut beta);
            recompute_residual(columns, &beta, y, &mut residual);

            let obj = objective(columns, &beta, &residual, s2);
            if !changed || (prev_obj - obj).abs() <= opts.tolerance * obj.abs() + obj_floor {
                break;
            }
            prev_obj = obj;
        }

        // Profile sigma_e; stop once it stabilizes at the data scale.
        let sse: f64 = residual.iter().map(|r| r * r).sum();
        sigma_e = (sse / n as f64).sqrt();
        if (prev_sigma - sigma_e).abs() <= opts.sigma_tolerance * sigma_scale {
            converged = true;
            break;
        }
        prev_sigma = sigma_e;
    }

    Solution {
        coefficients: beta,
        sigma_e,
        sweeps_used,
        converged,
    }
}

/// Exact Newton step on the current active set: unpenalized and L2 columns
/// are always active; L1 columns participate while nonzero, with their
/// penalty linearized at the current sign. Columns whose solved sign flips
/// are dropped and the system re-solved, so the result is optimal on its
/// orthant.
fn polish_active_set(
    columns: &[DesignColumn],
    gram: &[Vec<f64>],
    xty: &[f64],
    norms: &[f64],
    s2: f64,
    beta: &mut [f64],
) {
    let p = columns.len();
    let mut active: Vec<usize> = (0..p)
        .filter(|&j| {
            norms[j] > 0.0
                && match columns[j].penalty {
                    Penalty::None | Penalty::L2 { .. } => true,
                    Penalty::L1 { .. } => beta[j] != 0.0,
                }
        })
        .collect();

    loop {
        if active.is_empty() {
            return;
        }
        let k = active.len();
        let mut m = vec![vec![0.0; k]; k];
        let mut rhs = vec![0.0; k];
        for (ai, &i) in active.iter().enumerate() {
            for (aj, &j) in active.iter().enumerate() {
                m[ai][aj] = gram[i][j];
            }
            rhs[ai] = xty[i];
            match columns[i].penalty {
                Penalty::None => {}
                Penalty::L2 { scale } => m[ai][ai] += s2 * scale,
                Penalty::L1 { scale } => rhs[ai] -= s2 * scale * beta[i].signum(),
            }
        }
        if !cholesky_solve(&mut m, &mut rhs) {
            // Singular active system; leave the CD iterate as is.
            return;
        }

        // Drop any L1 coordinate whose solved sign contradicts the
        // linearization and re-solve on the reduced set.
        let mut flipped = Vec::new();
        for (ai, &i) in active.iter().enumerate() {
            if let Penalty::L1 { .. } = columns[i].penalty {
                if rhs[ai].signum() != beta[i].signum() && rhs[ai] != 0.0 {
                    flipped.push(i);
                }
            }
        }
        if flipped.is_empty() {
            for (ai, &i) in active.iter().enumerate() {
                beta[i] = rhs[ai];
            }
            return;
        }
        for &i in &flipped {
            beta[i] = 0.0;
        }
        active.retain(|i| !flipped.contains(i));
    }
}

fn recompute_residual(columns: &[DesignColumn], beta: &[f64], y: &[f64], residual: &mut [f64]) {
    residual.copy_from_slice(y);
    for (c, &b) in columns.iter().zip(beta.iter()) {
        if b != 0.0 {
            for (r, x) in residual.iter_mut().zip(c.values.iter()) {
                *r -= b * x;
            }
        }
    }
}

/// In-place Cholesky factorization and solve; returns false when the matrix
/// is not positive definite.
fn cholesky_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> bool {
    let n = b.len();
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= a[i][k] * a[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return false;
                }
                a[i][j] = sum.sqrt();
            } else {
                a[i][j] = sum / a[j][j];
            }
        }
    }
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= a[i][k] * b[k];
        }
        b[i] = sum / a[i][i];
    }
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= a[k][i] * b[k];
        }
        b[i] = sum / a[i][i];
    }
    true
}

/// Objective in the sigma_e^2-scaled form: SSE/2 plus scaled penalties.
fn objective(columns: &[DesignColumn], beta: &[f64], residual: &[f64], s2: f64) -> f64 {
    let sse: f64 = residual.iter().map(|r| r * r).sum();
    let mut obj = 0.5 * sse;
    for (c, b) in columns.iter().zip(beta.iter()) {
        match c.penalty {
            Penalty::None => {}
            Penalty::L1 { scale } => obj += s2 * scale * b.abs(),
            Penalty::L2 { scale } => obj += 0.5 * s2 * scale * b * b,
        }
    }
    obj
}

fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}
