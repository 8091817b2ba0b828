//! Box-constrained strictly convex quadratic programs via a primal
//! active-set method: full steps onto the working-set minimizer release
//! one wrong-signed bound at a time, partial steps add the blocking bound.

use ies_core::linalg::{lu_solve, Mat};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: H is {h}x{h}, g has {g}")]
    Dims { h: usize, g: usize },
    #[error("reduced Hessian singular with {free} free variables")]
    Singular { free: usize },
    #[error("active-set iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Bound multipliers: positive at active lower bounds, negative at
    /// active upper bounds, zero on free variables.
    pub bound_multipliers: Vec<f64>,
    /// Infinity norm of the free-variable gradient at the solution.
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    Lo,
    Hi,
}

/// Minimizes 0.5 x^T H x + g^T x over the box [lower, upper] for symmetric
/// positive definite `h`. `warm` seeds the starting point.
pub fn solve_box_qp(
    h: &Mat,
    g: &[f64],
    lower: &[f64],
    upper: &[f64],
    warm: Option<&[f64]>,
    tol: f64,
) -> Result<QpSolution, QpError> {
    let n = g.len();
    if h.rows != n || h.cols != n {
        return Err(QpError::Dims { h: h.rows, g: n });
    }
    let mut x: Vec<f64> = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => vec![0.0; n],
    };
    let mut fix = vec![Fix::Free; n];
    for j in 0..n {
        x[j] = x[j].clamp(lower[j], upper[j]);
        if lower[j] == upper[j] {
            fix[j] = Fix::Lo;
        } else if x[j] <= lower[j] && lower[j].is_finite() {
            fix[j] = Fix::Lo;
        } else if x[j] >= upper[j] && upper[j].is_finite() {
            fix[j] = Fix::Hi;
        }
    }

    let gradient = |x: &[f64]| -> Vec<f64> {
        let mut gr = vec![0.0; n];
        h.matvec(x, &mut gr);
        for (o, gi) in gr.iter_mut().zip(g.iter()) {
            *o += gi;
        }
        gr
    };

    let max_iter = 6 * n + 30;
    for it in 0..max_iter {
        // Minimize with the working set fixed.
        let free: Vec<usize> = (0..n).filter(|&j| fix[j] == Fix::Free).collect();
        let nf = free.len();
        let mut target = x.clone();
        if nf > 0 {
            let mut hff = Mat::zeros(nf, nf);
            let mut rhs = vec![0.0; nf];
            for (a, &ja) in free.iter().enumerate() {
                let mut r = -g[ja];
                for jb in 0..n {
                    if fix[jb] != Fix::Free {
                        r -= h.get(ja, jb) * x[jb];
                    }
                }
                rhs[a] = r;
                for (b, &jb) in free.iter().enumerate() {
                    hff.set(a, b, h.get(ja, jb));
                }
            }
            let xf = lu_solve(&hff, &rhs).ok_or(QpError::Singular { free: nf })?;
            for (a, &j) in free.iter().enumerate() {
                target[j] = xf[a];
            }
        }

        // Step toward the working-set minimizer, stopping at the first
        // blocking bound.
        let mut alpha = 1.0f64;
        let mut blocker: Option<(usize, Fix)> = None;
        for &j in &free {
            let d = target[j] - x[j];
            if d > 0.0 && upper[j].is_finite() && target[j] > upper[j] {
                let a = (upper[j] - x[j]) / d;
                if a < alpha {
                    alpha = a;
                    blocker = Some((j, Fix::Hi));
                }
            } else if d < 0.0 && lower[j].is_finite() && target[j] < lower[j] {
                let a = (lower[j] - x[j]) / d;
                if a < alpha {
                    alpha = a;
                    blocker = Some((j, Fix::Lo));
                }
            }
        }
        let alpha = alpha.clamp(0.0, 1.0);
        for &j in &free {
            x[j] += alpha * (target[j] - x[j]);
            x[j] = x[j].clamp(lower[j], upper[j]);
        }

        if let Some((j, side)) = blocker {
            x[j] = if side == Fix::Lo { lower[j] } else { upper[j] };
            fix[j] = side;
            continue;
        }

        // Full step taken: check multiplier signs on the working set and
        // release the worst violator.
        let gr = gradient(&x);
        let mut worst: Option<(usize, f64)> = None;
        for j in 0..n {
            if lower[j] == upper[j] {
                continue;
            }
            let viol = match fix[j] {
                Fix::Lo => (-gr[j]).max(0.0),
                Fix::Hi => gr[j].max(0.0),
                Fix::Free => 0.0,
            };
            if viol > tol.max(1e-12) && worst.map(|(_, w)| viol > w).unwrap_or(true) {
                worst = Some((j, viol));
            }
        }
        if let Some((j, _)) = worst {
            fix[j] = Fix::Free;
            continue;
        }

        // KKT satisfied.
        let pg = (0..n)
            .filter(|&j| fix[j] == Fix::Free)
            .map(|j| gr[j].abs())
            .fold(0.0f64, f64::max);
        let mut mult = vec![0.0; n];
        for j in 0..n {
            if fix[j] != Fix::Free {
                mult[j] = gr[j];
            }
        }
        let mut hx = vec![0.0; n];
        h.matvec(&x, &mut hx);
        let objective = 0.5 * dot(&x, &hx) + dot(g, &x);
        return Ok(QpSolution {
            x,
            objective,
            bound_multipliers: mult,
            kkt_residual: pg,
            iterations: it + 1,
        });
    }
    Err(QpError::IterationLimit)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_quadratic_exact() {
        // min (x-1)^2 + (y+2)^2 -> H = 2I, g = [-2, 4].
        let h = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let g = vec![-2.0, 4.0];
        let lo = vec![f64::NEG_INFINITY; 2];
        let hi = vec![f64::INFINITY; 2];
        let sol = solve_box_qp(&h, &g, &lo, &hi, None, 1e-10).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.x[1] + 2.0).abs() < 1e-12);
        assert!(sol.kkt_residual < 1e-10);
    }

    /// Hand-solvable box-constrained case: minimum pushed onto a bound;
    /// the bound multiplier must be nonnegative at a lower bound.
    #[test]
    fn active_lower_bound_has_nonnegative_multiplier() {
        // min 0.5 x^T H x + g^T x with x >= -1 active.
        let h = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let g = vec![6.0, 0.0];
        let lo = vec![-1.0, -10.0];
        let hi = vec![10.0, 10.0];
        let sol = solve_box_qp(&h, &g, &lo, &hi, None, 1e-10).unwrap();
        assert!((sol.x[0] + 1.0).abs() < 1e-12, "x at bound, got {}", sol.x[0]);
        // y solves 2y + x = 0 -> y = 0.5.
        assert!((sol.x[1] - 0.5).abs() < 1e-10);
        assert!(sol.bound_multipliers[0] > 0.0);
        assert!(sol.kkt_residual < 1e-8);
    }

    #[test]
    fn warm_start_agrees_with_cold() {
        let h = Mat::from_rows(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 5.0],
        ]);
        let g = vec![-1.0, 2.0, -3.0];
        let lo = vec![0.0, 0.0, 0.0];
        let hi = vec![1.0, 1.0, 1.0];
        let a = solve_box_qp(&h, &g, &lo, &hi, None, 1e-10).unwrap();
        let warm = vec![0.9, 0.1, 0.7];
        let b = solve_box_qp(&h, &g, &lo, &hi, Some(&warm), 1e-10).unwrap();
        for (x, y) in a.x.iter().zip(b.x.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    /// Random PD QPs: verify the KKT conditions directly.
    #[test]
    fn random_qps_satisfy_kkt() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _case in 0..300 {
            let n = rng.gen_range(1..=10);
            // H = M^T M + I (PD).
            let mut m = Mat::zeros(n, n);
            for v in m.data.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let mut h = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut s = if i == j { 1.0 } else { 0.0 };
                    for k in 0..n {
                        s += m.get(k, i) * m.get(k, j);
                    }
                    h.set(i, j, s);
                }
            }
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..0.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.1..2.0)).collect();
            let sol = solve_box_qp(&h, &g, &lo, &hi, None, 1e-9).unwrap();
            // KKT: grad + bound multipliers consistent.
            let mut gr = vec![0.0; n];
            h.matvec(&sol.x, &mut gr);
            for (a, b) in gr.iter_mut().zip(g.iter()) {
                *a += b;
            }
            for j in 0..n {
                let at_lo = (sol.x[j] - lo[j]).abs() < 1e-9;
                let at_hi = (sol.x[j] - hi[j]).abs() < 1e-9;
                if at_lo {
                    assert!(gr[j] >= -1e-7, "lower-bound multiplier sign");
                } else if at_hi {
                    assert!(gr[j] <= 1e-7, "upper-bound multiplier sign");
                } else {
                    assert!(gr[j].abs() <= 1e-7, "interior gradient {}", gr[j]);
                }
            }
        }
    }
}
