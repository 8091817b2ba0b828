//! Sequential quadratic programming for multiple-shooting control
//! problems.
//!
//! The NLP carries the predicted outputs of every step as shooting
//! variables tied by dynamics equality constraints. Each SQP iteration
//! linearizes the dynamics, eliminates the state increments by forward
//! substitution (condensing), solves a box-constrained Gauss-Newton QP in
//! the input increments and line-searches an l1 merit function. The
//! objective is a weighted sum of squared affine residuals plus a linear
//! term, which covers tracking, economic and reference-deviation costs.

use crate::qp::{solve_box_qp, QpError};
use ies_core::linalg::Mat;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SqpError {
    #[error("model horizon is zero")]
    EmptyHorizon,
    #[error("dimension mismatch: {0}")]
    Dims(String),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Jacobians of one step's prediction with respect to earlier shooting
/// states and inputs (indices are step positions in the trajectory).
#[derive(Debug, Clone, Default)]
pub struct StepJacobians {
    pub d_o: Vec<(usize, Mat)>,
    pub d_u: Vec<(usize, Mat)>,
}

/// Dynamics of the shooting problem: predicts `o(k+1+i)` from trajectory
/// variables, reaching into internal measured history for lags before the
/// horizon start.
pub trait ShootingModel {
    fn horizon(&self) -> usize;
    fn n_state(&self) -> usize;
    fn n_input(&self) -> usize;
    fn eval_step(
        &self,
        i: usize,
        o_traj: &[Vec<f64>],
        u_traj: &[Vec<f64>],
        jac: Option<&mut StepJacobians>,
    ) -> Vec<f64>;
}

/// Affine expression over shooting states (step, channel) and decision
/// variables (flattened inputs then extras).
#[derive(Debug, Clone, Default)]
pub struct AffineExpr {
    pub o_terms: Vec<(usize, usize, f64)>,
    pub v_terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn value(&self, o_traj: &[Vec<f64>], v: &[f64]) -> f64 {
        let mut s = self.constant;
        for (step, chan, c) in &self.o_terms {
            s += c * o_traj[*step][*chan];
        }
        for (idx, c) in &self.v_terms {
            s += c * v[*idx];
        }
        s
    }
}

/// The problem statement handed to [`nlp_solve`].
#[derive(Debug, Clone, Default)]
pub struct NlpSpec {
    pub n_extra: usize,
    pub v_lower: Vec<f64>,
    pub v_upper: Vec<f64>,
    /// Sum of `w * r^2` terms.
    pub residuals: Vec<(f64, AffineExpr)>,
    /// Added linearly to the objective.
    pub linear: AffineExpr,
    /// Soft box constraints: `w * dist(expr, [lo, hi])^2`.
    pub penalties: Vec<(f64, AffineExpr, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqpStatus {
    Converged,
    NotConverged,
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct SqpConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub qp_tol: f64,
    pub regularization: f64,
}

impl Default for SqpConfig {
    fn default() -> Self {
        SqpConfig {
            max_iter: 40,
            tol: 1e-6,
            qp_tol: 1e-9,
            regularization: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SqpResult {
    pub v: Vec<f64>,
    pub o_traj: Vec<Vec<f64>>,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Infinity norm of the shooting defects at the returned iterate.
    pub defect_norm: f64,
    pub status: SqpStatus,
    pub iterations: usize,
}

fn objective_value(spec: &NlpSpec, o_traj: &[Vec<f64>], v: &[f64]) -> f64 {
    let mut f = spec.linear.value(o_traj, v);
    for (w, r) in &spec.residuals {
        let val = r.value(o_traj, v);
        f += w * val * val;
    }
    for (w, r, lo, hi) in &spec.penalties {
        let val = r.value(o_traj, v);
        let d = (lo - val).max(0.0) + (val - hi).max(0.0);
        f += w * d * d;
    }
    f
}

struct Linearization {
    /// Predictions f_i and defects c_i = o_i - f_i.
    defects: Vec<Vec<f64>>,
    /// d_o_i = T_i d_v + t_i.
    t_mats: Vec<Mat>,
    t_consts: Vec<Vec<f64>>,
}

fn linearize(
    model: &dyn ShootingModel,
    o_traj: &[Vec<f64>],
    u_traj: &[Vec<f64>],
    n_v: usize,
) -> Linearization {
    let n = model.horizon();
    let n_o = model.n_state();
    let n_u = model.n_input();
    let mut defects = Vec::with_capacity(n);
    let mut t_mats: Vec<Mat> = Vec::with_capacity(n);
    let mut t_consts: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut jac = StepJacobians::default();
        let f_i = model.eval_step(i, o_traj, u_traj, Some(&mut jac));
        let c_i: Vec<f64> = o_traj[i].iter().zip(f_i.iter()).map(|(o, f)| o - f).collect();

        // d_o_i = -c_i + sum_j Jo_ij (T_j d_v + t_j) + sum_j Ju_ij d_u_j.
        let mut t_mat = Mat::zeros(n_o, n_v);
        let mut t_const: Vec<f64> = c_i.iter().map(|c| -c).collect();
        for (j, jo) in &jac.d_o {
            debug_assert!(*j < i, "state Jacobian must reference earlier steps");
            let tj = &t_mats[*j];
            let cj = &t_consts[*j];
            // t_mat += jo * tj; t_const += jo * cj.
            for r in 0..n_o {
                let row = jo.row(r);
                for (c_idx, jv) in row.iter().enumerate() {
                    if *jv == 0.0 {
                        continue;
                    }
                    let trow = tj.row(c_idx);
                    let out = t_mat.row_mut(r);
                    for (o, t) in out.iter_mut().zip(trow.iter()) {
                        *o += jv * t;
                    }
                    t_const[r] += jv * cj[c_idx];
                }
            }
        }
        for (j, ju) in &jac.d_u {
            debug_assert!(*j <= i);
            for r in 0..n_o {
                let row = ju.row(r);
                for (c_idx, jv) in row.iter().enumerate() {
                    if *jv != 0.0 {
                        t_mat.data[r * n_v + j * n_u + c_idx] += jv;
                    }
                }
            }
        }
        defects.push(c_i);
        t_mats.push(t_mat);
        t_consts.push(t_const);
    }
    Linearization {
        defects,
        t_mats,
        t_consts,
    }
}

fn defect_norm(defects: &[Vec<f64>]) -> f64 {
    defects
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |a, b| a.max(b.abs()))
}

fn defect_l1(defects: &[Vec<f64>]) -> f64 {
    defects.iter().flat_map(|c| c.iter()).map(|v| v.abs()).sum()
}

/// Solves the multiple-shooting NLP from a warm start.
///
/// `v0` stacks the per-step inputs then the extra decision variables;
/// `o0`, when given, seeds the shooting states (otherwise a pure rollout
/// from `v0` is used).
pub fn nlp_solve(
    model: &dyn ShootingModel,
    spec: &NlpSpec,
    v0: &[f64],
    o0: Option<&[Vec<f64>]>,
    cfg: &SqpConfig,
) -> Result<SqpResult, SqpError> {
    let n = model.horizon();
    if n == 0 {
        return Err(SqpError::EmptyHorizon);
    }
    let n_u = model.n_input();
    let n_o = model.n_state();
    let n_v = n * n_u + spec.n_extra;
    if v0.len() != n_v || spec.v_lower.len() != n_v || spec.v_upper.len() != n_v {
        return Err(SqpError::Dims(format!(
            "expected {n_v} decision variables, got v0 {}",
            v0.len()
        )));
    }

    let mut v: Vec<f64> = v0
        .iter()
        .enumerate()
        .map(|(j, x)| x.clamp(spec.v_lower[j], spec.v_upper[j]))
        .collect();
    let u_of = |v: &[f64]| -> Vec<Vec<f64>> {
        (0..n).map(|i| v[i * n_u..(i + 1) * n_u].to_vec()).collect()
    };

    // Seed shooting states.
    let mut o_traj: Vec<Vec<f64>> = match o0 {
        Some(o) if o.len() == n && o.iter().all(|x| x.len() == n_o) => o.to_vec(),
        _ => {
            let u = u_of(&v);
            let mut o: Vec<Vec<f64>> = Vec::with_capacity(n);
            for i in 0..n {
                let f_i = model.eval_step(i, &o, &u, None);
                o.push(f_i);
            }
            o
        }
    };

    let mut nu = 1.0f64; // l1 merit weight
    let mut status = SqpStatus::NotConverged;
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;

    for it in 0..cfg.max_iter {
        iterations = it + 1;
        let u_traj = u_of(&v);
        let lin = linearize(model, &o_traj, &u_traj, n_v);

        // Gauss-Newton data in the condensed increment space.
        let mut h = Mat::zeros(n_v, n_v);
        let mut g = vec![0.0; n_v];
        let mut grad_r = vec![0.0; n_v];
        for (w, r) in &spec.residuals {
            grad_r.iter_mut().for_each(|x| *x = 0.0);
            let mut r0 = r.value(&o_traj, &v);
            for (step, chan, c) in &r.o_terms {
                r0 += c * lin.t_consts[*step][*chan];
                let trow = lin.t_mats[*step].row(*chan);
                for (gr, t) in grad_r.iter_mut().zip(trow.iter()) {
                    *gr += c * t;
                }
            }
            for (idx, c) in &r.v_terms {
                grad_r[*idx] += c;
            }
            let tw = 2.0 * w;
            for a in 0..n_v {
                let ga = grad_r[a];
                if ga == 0.0 {
                    continue;
                }
                g[a] += tw * r0 * ga;
                let row = h.row_mut(a);
                for b in 0..n_v {
                    row[b] += tw * ga * grad_r[b];
                }
            }
        }
        // One-sided box penalties contribute only outside their band.
        for (w, r, lo, hi) in &spec.penalties {
            grad_r.iter_mut().for_each(|x| *x = 0.0);
            let mut r0 = r.value(&o_traj, &v);
            for (step, chan, c) in &r.o_terms {
                r0 += c * lin.t_consts[*step][*chan];
            }
            let viol = if r0 < *lo {
                r0 - lo
            } else if r0 > *hi {
                r0 - hi
            } else {
                continue;
            };
            for (step, chan, c) in &r.o_terms {
                let trow = lin.t_mats[*step].row(*chan);
                for (gr, t) in grad_r.iter_mut().zip(trow.iter()) {
                    *gr += c * t;
                }
            }
            for (idx, c) in &r.v_terms {
                grad_r[*idx] += c;
            }
            let tw = 2.0 * w;
            for a in 0..n_v {
                let ga = grad_r[a];
                if ga == 0.0 {
                    continue;
                }
                g[a] += tw * viol * ga;
                let row = h.row_mut(a);
                for b in 0..n_v {
                    row[b] += tw * ga * grad_r[b];
                }
            }
        }
        // Linear objective part.
        for (step, chan, c) in &spec.linear.o_terms {
            let trow = lin.t_mats[*step].row(*chan);
            for (gr, t) in g.iter_mut().zip(trow.iter()) {
                *gr += c * t;
            }
        }
        for (idx, c) in &spec.linear.v_terms {
            g[*idx] += c;
        }
        // Regularize.
        let scale = (0..n_v).map(|i| h.get(i, i)).fold(0.0f64, f64::max).max(1.0);
        for i in 0..n_v {
            let d = h.get(i, i) + cfg.regularization * scale;
            h.set(i, i, d);
        }

        // Box on increments.
        let lo: Vec<f64> = (0..n_v).map(|j| spec.v_lower[j] - v[j]).collect();
        let hi: Vec<f64> = (0..n_v).map(|j| spec.v_upper[j] - v[j]).collect();
        let qp = solve_box_qp(&h, &g, &lo, &hi, None, cfg.qp_tol)?;
        let d_v = qp.x;

        let step_norm = d_v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let c_l1 = defect_l1(&lin.defects);
        kkt = qp.kkt_residual.max(defect_norm(&lin.defects));
        let converged = step_norm <= cfg.tol && defect_norm(&lin.defects) <= cfg.tol;
        if converged {
            // Apply the final correction in full before stopping.
            for j in 0..n_v {
                v[j] = (v[j] + d_v[j]).clamp(spec.v_lower[j], spec.v_upper[j]);
            }
            for i in 0..n {
                let t = &lin.t_mats[i];
                for r in 0..n_o {
                    let row = t.row(r);
                    let mut acc = lin.t_consts[i][r];
                    for (tv, dv) in row.iter().zip(d_v.iter()) {
                        acc += tv * dv;
                    }
                    o_traj[i][r] += acc;
                }
            }
            status = SqpStatus::Converged;
            break;
        }

        // Predicted merit reduction for the full step.
        let q_change = 0.5 * quad_form(&h, &d_v) + dot(&g, &d_v);
        let mut pred = -q_change + nu * c_l1;
        if pred <= 1e-12 {
            nu = (nu * 10.0).min(1e8);
            pred = -q_change + nu * c_l1;
        }

        // d_o from the condensing relation.
        let d_o: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut d = lin.t_consts[i].clone();
                let t = &lin.t_mats[i];
                for r in 0..n_o {
                    let row = t.row(r);
                    let mut acc = 0.0;
                    for (tv, dv) in row.iter().zip(d_v.iter()) {
                        acc += tv * dv;
                    }
                    d[r] += acc;
                }
                d
            })
            .collect();

        let merit0 = objective_value(spec, &o_traj, &v) + nu * c_l1;
        let mut alpha = 1.0f64;
        let mut accepted = false;
        for _ in 0..14 {
            let v_trial: Vec<f64> = (0..n_v)
                .map(|j| (v[j] + alpha * d_v[j]).clamp(spec.v_lower[j], spec.v_upper[j]))
                .collect();
            let o_trial: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    o_traj[i]
                        .iter()
                        .zip(d_o[i].iter())
                        .map(|(o, d)| o + alpha * d)
                        .collect()
                })
                .collect();
            let u_trial = u_of(&v_trial);
            let c_trial: f64 = (0..n)
                .map(|i| {
                    let f_i = model.eval_step(i, &o_trial, &u_trial, None);
                    o_trial[i]
                        .iter()
                        .zip(f_i.iter())
                        .map(|(o, f)| (o - f).abs())
                        .sum::<f64>()
                })
                .sum();
            let merit = objective_value(spec, &o_trial, &v_trial) + nu * c_trial;
            if merit <= merit0 - 1e-4 * alpha * pred {
                v = v_trial;
                o_traj = o_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            status = SqpStatus::LineSearchStalled;
            break;
        }
    }

    let u_traj = u_of(&v);
    let final_defects: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let f_i = model.eval_step(i, &o_traj, &u_traj, None);
            o_traj[i]
                .iter()
                .zip(f_i.iter())
                .map(|(o, f)| o - f)
                .collect()
        })
        .collect();
    Ok(SqpResult {
        objective: objective_value(spec, &o_traj, &v),
        defect_norm: defect_norm(&final_defects),
        kkt_residual: kkt,
        v,
        o_traj,
        status,
        iterations,
    })
}

fn quad_form(h: &Mat, x: &[f64]) -> f64 {
    let mut y = vec![0.0; h.rows];
    h.matvec(x, &mut y);
    dot(&y, x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trivial model: scalar state equals the input (no memory).
    struct Passthrough {
        n: usize,
    }

    impl ShootingModel for Passthrough {
        fn horizon(&self) -> usize {
            self.n
        }
        fn n_state(&self) -> usize {
            1
        }
        fn n_input(&self) -> usize {
            1
        }
        fn eval_step(
            &self,
            i: usize,
            _o: &[Vec<f64>],
            u: &[Vec<f64>],
            jac: Option<&mut StepJacobians>,
        ) -> Vec<f64> {
            if let Some(j) = jac {
                j.d_u.push((i, Mat::from_rows(&[vec![1.0]])));
            }
            vec![u[i][0]]
        }
    }

    /// Nonlinear scalar plant o+ = 0.8 o + u - 0.1 u^3 with one lag.
    struct CubicPlant {
        n: usize,
        o_init: f64,
    }

    impl ShootingModel for CubicPlant {
        fn horizon(&self) -> usize {
            self.n
        }
        fn n_state(&self) -> usize {
            1
        }
        fn n_input(&self) -> usize {
            1
        }
        fn eval_step(
            &self,
            i: usize,
            o: &[Vec<f64>],
            u: &[Vec<f64>],
            jac: Option<&mut StepJacobians>,
        ) -> Vec<f64> {
            let prev = if i == 0 { self.o_init } else { o[i - 1][0] };
            let ui = u[i][0];
            if let Some(j) = jac {
                if i > 0 {
                    j.d_o.push((i - 1, Mat::from_rows(&[vec![0.8]])));
                }
                j.d_u
                    .push((i, Mat::from_rows(&[vec![1.0 - 0.3 * ui * ui]])));
            }
            vec![0.8 * prev + ui - 0.1 * ui * ui * ui]
        }
    }

    /// An unconstrained convex quadratic solves in very few iterations
    /// (Gauss-Newton is exact for linear residuals).
    #[test]
    fn quadratic_exact_in_three_iterations() {
        let model = Passthrough { n: 2 };
        let spec = NlpSpec {
            n_extra: 0,
            v_lower: vec![f64::NEG_INFINITY; 2],
            v_upper: vec![f64::INFINITY; 2],
            residuals: vec![
                (1.0, AffineExpr {
                    o_terms: vec![(0, 0, 1.0)],
                    v_terms: vec![],
                    constant: -3.0,
                }),
                (2.0, AffineExpr {
                    o_terms: vec![(1, 0, 1.0)],
                    v_terms: vec![],
                    constant: 1.0,
                }),
            ],
            linear: AffineExpr::default(),
            penalties: Vec::new(),
        };
        let res = nlp_solve(&model, &spec, &[0.0, 0.0], None, &SqpConfig::default()).unwrap();
        assert_eq!(res.status, SqpStatus::Converged);
        assert!(res.iterations <= 3, "took {} iterations", res.iterations);
        assert!((res.v[0] - 3.0).abs() < 1e-6);
        assert!((res.v[1] + 1.0).abs() < 1e-6);
    }

    /// Hand-solvable box-constrained instance: minimum outside the box,
    /// KKT holds with the bound active.
    #[test]
    fn box_constrained_quadratic_kkt() {
        let model = Passthrough { n: 2 };
        let spec = NlpSpec {
            n_extra: 0,
            v_lower: vec![-1.0, -1.0],
            v_upper: vec![1.0, 1.0],
            residuals: vec![
                (1.0, AffineExpr {
                    o_terms: vec![(0, 0, 1.0)],
                    v_terms: vec![],
                    constant: -3.0,
                }),
                (1.0, AffineExpr {
                    o_terms: vec![(1, 0, 1.0)],
                    v_terms: vec![],
                    constant: -0.25,
                }),
            ],
            linear: AffineExpr::default(),
            penalties: Vec::new(),
        };
        let res = nlp_solve(&model, &spec, &[0.0, 0.0], None, &SqpConfig::default()).unwrap();
        assert_eq!(res.status, SqpStatus::Converged);
        assert!((res.v[0] - 1.0).abs() < 1e-9, "active at upper bound");
        assert!((res.v[1] - 0.25).abs() < 1e-7);
        assert!(res.kkt_residual < 1e-8);
        assert!(res.defect_norm < 1e-6);
    }

    /// Nonlinear tracking: at the solution the shooting gaps close.
    #[test]
    fn shooting_gaps_close_on_nonlinear_plant() {
        let model = CubicPlant { n: 6, o_init: 0.2 };
        let mut residuals = Vec::new();
        for i in 0..6 {
            residuals.push((1.0, AffineExpr {
                o_terms: vec![(i, 0, 1.0)],
                v_terms: vec![],
                constant: -1.0,
            }));
            residuals.push((0.05, AffineExpr {
                o_terms: vec![],
                v_terms: vec![(i, 1.0)],
                constant: 0.0,
            }));
        }
        let spec = NlpSpec {
            n_extra: 0,
            v_lower: vec![-2.0; 6],
            v_upper: vec![2.0; 6],
            residuals,
            linear: AffineExpr::default(),
            penalties: Vec::new(),
        };
        let res = nlp_solve(&model, &spec, &[0.0; 6], None, &SqpConfig::default()).unwrap();
        assert_eq!(res.status, SqpStatus::Converged);
        assert!(res.defect_norm < 1e-6, "defects {}", res.defect_norm);
        // The tracked output approaches the setpoint band.
        assert!((res.o_traj[5][0] - 1.0).abs() < 0.2);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let model = CubicPlant { n: 6, o_init: 0.0 };
        let spec = NlpSpec {
            n_extra: 0,
            v_lower: vec![-2.0; 6],
            v_upper: vec![2.0; 6],
            residuals: (0..6)
                .map(|i| {
                    (1.0, AffineExpr {
                        o_terms: vec![(i, 0, 1.0)],
                        v_terms: vec![],
                        constant: -1.5,
                    })
                })
                .collect(),
            linear: AffineExpr::default(),
            penalties: Vec::new(),
        };
        let cfg = SqpConfig {
            max_iter: 1,
            ..Default::default()
        };
        let res = nlp_solve(&model, &spec, &[0.0; 6], None, &cfg).unwrap();
        assert_eq!(res.status, SqpStatus::NotConverged);
        // Best iterate still returned.
        assert_eq!(res.v.len(), 6);
    }
}
