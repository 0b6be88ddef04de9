//! Three-variable CBF-CLF quadratic program solved by active-set enumeration.
//!
//! Decision variables are `z = (v, omega, delta)`. The objective is
//! `w_v (v - v_d)^2 + w_omega omega^2 + w_delta delta^2`; every constraint is
//! written as a row `g . z <= rhs`. With a diagonal Hessian and at most three
//! linearly independent active rows, each candidate active set reduces to a
//! dense system of size at most 3, so enumerating them all is both exact and cheap.

use alloc::vec::Vec;

use crate::sim::ControlInput;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("invalid QP: {0}")]
    InvalidProblem(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpWeights {
    pub w_v: f64,
    pub w_omega: f64,
    pub w_delta: f64,
}

impl Default for QpWeights {
    fn default() -> Self {
        Self { w_v: 1.0, w_omega: 0.5, w_delta: 100.0 }
    }
}

/// `a_v * v + b_omega * omega >= rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CbfConstraint {
    pub a_v: f64,
    pub b_omega: f64,
    pub rhs: f64,
}

/// `c_omega * omega - delta <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClfConstraint {
    pub c_omega: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub weights: QpWeights,
    pub v_desired: f64,
    /// Hard barrier rows; exactly one for a point robot.
    pub cbf_rows: Vec<CbfConstraint>,
    /// Soft Lyapunov row, relaxed by `delta >= 0`.
    pub clf_row: ClfConstraint,
    pub v_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
}

/// One inequality `coeffs . (v, omega, delta) <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearRow {
    pub coeffs: [f64; 3],
    pub rhs: f64,
}

impl LinearRow {
    pub fn slack(&self, z: &[f64; 3]) -> f64 {
        self.rhs - dot3(&self.coeffs, z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    /// The barrier rows cannot be met within the input bounds; the returned
    /// input maximizes the most critical barrier row instead.
    CbfInfeasibleFallback,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub u: ControlInput,
    pub delta: f64,
    pub status: QpStatus,
    /// Lagrange multipliers in [`QpProblem::constraint_rows`] order (all zero for the fallback).
    pub multipliers: Vec<f64>,
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Solves `m x = r` for `n <= 3` by Gaussian elimination with partial pivoting.
fn solve_small(m: &mut [[f64; 3]; 3], r: &mut [f64; 3], n: usize, scale: f64) -> Option<[f64; 3]> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot);
        r.swap(col, pivot);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..n).rev() {
        let mut acc = r[row];
        for k in (row + 1)..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

impl QpProblem {
    pub fn validate(&self) -> Result<(), QpError> {
        let w = &self.weights;
        if !(w.w_v > 0.0 && w.w_omega > 0.0 && w.w_delta > 0.0) {
            return Err(QpError::InvalidProblem("objective weights must be positive"));
        }
        let (vl, vu) = self.v_bounds;
        let (ol, ou) = self.omega_bounds;
        if !(vl <= vu && ol <= ou) {
            return Err(QpError::InvalidProblem("lower bounds must not exceed upper bounds"));
        }
        let finite = [w.w_v, w.w_omega, w.w_delta, self.v_desired, vl, vu, ol, ou, self.clf_row.c_omega, self.clf_row.rhs]
            .iter()
            .chain(self.cbf_rows.iter().flat_map(|r| [r.a_v, r.b_omega, r.rhs].into_iter()).collect::<Vec<_>>().iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(QpError::InvalidProblem("all problem data must be finite"));
        }
        Ok(())
    }

    /// All constraints as `g . z <= rhs`: barrier rows, the Lyapunov row,
    /// `v <= ub`, `-v <= -lb`, `omega <= ub`, `-omega <= -lb`, `-delta <= 0`.
    pub fn constraint_rows(&self) -> Vec<LinearRow> {
        let mut rows: Vec<LinearRow> = self
            .cbf_rows
            .iter()
            .map(|r| LinearRow { coeffs: [-r.a_v, -r.b_omega, 0.0], rhs: -r.rhs })
            .collect();
        rows.push(LinearRow { coeffs: [0.0, self.clf_row.c_omega, -1.0], rhs: self.clf_row.rhs });
        rows.push(LinearRow { coeffs: [1.0, 0.0, 0.0], rhs: self.v_bounds.1 });
        rows.push(LinearRow { coeffs: [-1.0, 0.0, 0.0], rhs: -self.v_bounds.0 });
        rows.push(LinearRow { coeffs: [0.0, 1.0, 0.0], rhs: self.omega_bounds.1 });
        rows.push(LinearRow { coeffs: [0.0, -1.0, 0.0], rhs: -self.omega_bounds.0 });
        rows.push(LinearRow { coeffs: [0.0, 0.0, -1.0], rhs: 0.0 });
        rows
    }

    /// Diagonal of the Hessian `H` in `1/2 z'Hz + c'z`.
    pub fn hessian_diagonal(&self) -> [f64; 3] {
        let w = &self.weights;
        [2.0 * w.w_v, 2.0 * w.w_omega, 2.0 * w.w_delta]
    }

    /// Linear term `c` in `1/2 z'Hz + c'z`.
    pub fn linear_term(&self) -> [f64; 3] {
        [-2.0 * self.weights.w_v * self.v_desired, 0.0, 0.0]
    }

    pub fn objective(&self, u: ControlInput, delta: f64) -> f64 {
        let w = &self.weights;
        let dv = u.v - self.v_desired;
        w.w_v * dv * dv + w.w_omega * u.omega * u.omega + w.w_delta * delta * delta
    }

    /// Largest achievable `a_v v + b_omega omega - rhs` over the input box.
    fn best_margin(&self, row: &CbfConstraint) -> f64 {
        let pick = |c: f64, (lo, hi): (f64, f64)| if c >= 0.0 { c * hi } else { c * lo };
        pick(row.a_v, self.v_bounds) + pick(row.b_omega, self.omega_bounds) - row.rhs
    }

    fn fallback(&self, rows: usize) -> QpSolution {
        let critical = self
            .cbf_rows
            .iter()
            .min_by(|a, b| self.best_margin(a).total_cmp(&self.best_margin(b)))
            .copied()
            .unwrap_or(CbfConstraint { a_v: 0.0, b_omega: 0.0, rhs: 0.0 });
        let pick = |c: f64, (lo, hi): (f64, f64), preferred: f64| {
            if c > 1e-12 {
                hi
            } else if c < -1e-12 {
                lo
            } else {
                preferred.clamp(lo, hi)
            }
        };
        let v = pick(critical.a_v, self.v_bounds, self.v_desired);
        let omega = pick(critical.b_omega, self.omega_bounds, 0.0);
        let delta = (self.clf_row.c_omega * omega - self.clf_row.rhs).max(0.0);
        QpSolution {
            u: ControlInput::new(v, omega),
            delta,
            status: QpStatus::CbfInfeasibleFallback,
            multipliers: alloc::vec![0.0; rows],
        }
    }
}

/// Exact minimizer of the CBF-CLF QP.
///
/// When the barrier rows cannot be satisfied inside the input box the solver
/// returns the bounded input that pushes the most critical barrier row up the
/// fastest, flagged [`QpStatus::CbfInfeasibleFallback`].
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let rows = problem.constraint_rows();
    let m = rows.len();
    let hd = problem.hessian_diagonal();
    let c = problem.linear_term();
    let hinv = [1.0 / hd[0], 1.0 / hd[1], 1.0 / hd[2]];
    let unconstrained = [-c[0] * hinv[0], -c[1] * hinv[1], -c[2] * hinv[2]];
    let row_norm = |r: &LinearRow| libm::sqrt(dot3(&r.coeffs, &r.coeffs)).max(1e-300);
    let scale = hd.iter().fold(1.0f64, |acc, &h| acc.max(h));

    let mut best: Option<(f64, [f64; 3], [usize; 3], [f64; 3], usize)> = None;
    let mut consider = |active: &[usize]| {
        let k = active.len();
        // G_S H^-1 G_S' lambda = -(g_S + G_S H^-1 c)   with z = -H^-1 (c + G_S' lambda)
        let mut mat = [[0.0; 3]; 3];
        let mut rhs = [0.0; 3];
        for (a, &ra) in active.iter().enumerate() {
            let ga = &rows[ra].coeffs;
            for (b, &rb) in active.iter().enumerate() {
                let gb = &rows[rb].coeffs;
                mat[a][b] = ga[0] * gb[0] * hinv[0] + ga[1] * gb[1] * hinv[1] + ga[2] * gb[2] * hinv[2];
            }
            rhs[a] = dot3(ga, &unconstrained) - rows[ra].rhs;
        }
        let lambda = if k == 0 {
            [0.0; 3]
        } else {
            let Some(l) = solve_small(&mut mat, &mut rhs, k, hinv.iter().fold(0.0f64, |a, &h| a.max(h))) else {
                return;
            };
            l
        };
        if lambda[..k].iter().any(|&l| l < -1e-10) {
            return;
        }
        let mut z = unconstrained;
        for (a, &ra) in active.iter().enumerate() {
            for d in 0..3 {
                z[d] -= hinv[d] * rows[ra].coeffs[d] * lambda[a];
            }
        }
        let feasible = rows.iter().all(|r| r.slack(&z) >= -1e-10 * row_norm(r).max(r.rhs.abs()).max(1.0));
        if !feasible {
            return;
        }
        let obj = 0.5 * (hd[0] * z[0] * z[0] + hd[1] * z[1] * z[1] + hd[2] * z[2] * z[2]) + dot3(&c, &z);
        if best.as_ref().is_none_or(|b| obj < b.0 - 1e-14 * scale) {
            let mut idx = [0usize; 3];
            idx[..k].copy_from_slice(active);
            best = Some((obj, z, idx, lambda, k));
        }
    };

    consider(&[]);
    for a in 0..m {
        consider(&[a]);
        for b in (a + 1)..m {
            consider(&[a, b]);
            for c3 in (b + 1)..m {
                consider(&[a, b, c3]);
            }
        }
    }

    let feasible_cbf = problem.cbf_rows.iter().all(|r| problem.best_margin(r) >= -1e-12 * (1.0 + r.rhs.abs()));
    match best {
        Some((_, z, idx, lambda, k)) if feasible_cbf => {
            let mut multipliers = alloc::vec![0.0; m];
            for a in 0..k {
                multipliers[idx[a]] = lambda[a].max(0.0);
            }
            // snap roundoff so bounds hold exactly
            let v = z[0].clamp(problem.v_bounds.0, problem.v_bounds.1);
            let omega = z[1].clamp(problem.omega_bounds.0, problem.omega_bounds.1);
            Ok(QpSolution { u: ControlInput::new(v, omega), delta: z[2].max(0.0), status: QpStatus::Optimal, multipliers })
        }
        _ => Ok(problem.fallback(m)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn base() -> QpProblem {
        QpProblem {
            weights: QpWeights::default(),
            v_desired: 2.0,
            cbf_rows: vec![CbfConstraint { a_v: 0.0, b_omega: 0.0, rhs: -1e6 }],
            clf_row: ClfConstraint { c_omega: 0.0, rhs: 0.0 },
            v_bounds: (0.0, 3.0),
            omega_bounds: (-1.0, 1.0),
        }
    }

    #[test]
    fn unconstrained_minimum() {
        let sol = solve_qp(&base()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.u.v - 2.0).abs() < 1e-12 && sol.u.omega.abs() < 1e-12 && sol.delta.abs() < 1e-12);
    }

    #[test]
    fn infeasible_barrier_falls_back() {
        let mut p = base();
        p.cbf_rows = vec![CbfConstraint { a_v: 0.0, b_omega: 1.0, rhs: 10.0 }];
        let sol = solve_qp(&p).unwrap();
        assert_eq!(sol.status, QpStatus::CbfInfeasibleFallback);
        assert_eq!(sol.u, ControlInput::new(2.0, 1.0));
    }

    #[test]
    fn active_barrier_row() {
        let mut p = base();
        // v <= 1 through the barrier row
        p.cbf_rows = vec![CbfConstraint { a_v: -1.0, b_omega: 0.0, rhs: -1.0 }];
        let sol = solve_qp(&p).unwrap();
        assert!((sol.u.v - 1.0).abs() < 1e-12);
        assert!((sol.multipliers[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn clf_relaxation_trades_off() {
        let mut p = base();
        // want omega <= -0.5 via CLF; omega costs 0.5*omega^2 and delta 100*delta^2
        p.clf_row = ClfConstraint { c_omega: 1.0, rhs: -0.5 };
        let sol = solve_qp(&p).unwrap();
        assert!(sol.delta <= 1e-6 || sol.u.omega < 0.0);
        assert!((sol.u.omega - sol.delta + 0.5).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_weights_and_bounds() {
        let mut p = base();
        p.weights.w_delta = 0.0;
        assert!(solve_qp(&p).is_err());
        let mut p = base();
        p.v_bounds = (1.0, 0.0);
        assert!(solve_qp(&p).is_err());
    }
}
