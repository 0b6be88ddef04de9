//! Brute-force reference for the three-variable CBF-CLF QP.
//!
//! A joint grid over (v, omega, delta) cannot localize a minimizer that sits on
//! a slanted constraint to within one spacing: feasible grid points near the
//! boundary are sparse, and the best of them can drift along it. Instead each
//! variable gets its own grid, and for every grid value the remaining variables
//! are minimized exactly (a clamp or a ternary search over a convex 1D
//! function). The reduced objective is strictly convex, so its grid argmin lies
//! within one spacing of the true minimizer.

#![allow(dead_code)]

use ogm_cbf_core::qp::QpProblem;

pub struct GridArgmin {
    pub v: f64,
    pub omega: f64,
    pub delta: f64,
    pub spacing: [f64; 3],
}

fn clamp_interval(lo: f64, hi: f64, x: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Interval of `v` within the box satisfying `a v + b w >= rhs` for fixed `w`.
fn v_interval(p: &QpProblem, w: f64) -> Option<(f64, f64)> {
    let r = p.cbf_rows[0];
    let (mut lo, mut hi) = p.v_bounds;
    let need = r.rhs - r.b_omega * w;
    if r.a_v > 0.0 {
        lo = lo.max(need / r.a_v);
    } else if r.a_v < 0.0 {
        hi = hi.min(need / r.a_v);
    } else if need > 0.0 {
        return None;
    }
    // roundoff at the end points of the feasible omega interval
    (lo <= hi + 1e-12).then_some((lo.min(hi), hi))
}

/// Interval of `w` within the box for which some boxed `v` meets the barrier row.
fn w_interval(p: &QpProblem) -> Option<(f64, f64)> {
    let r = p.cbf_rows[0];
    let best_av = if r.a_v >= 0.0 { r.a_v * p.v_bounds.1 } else { r.a_v * p.v_bounds.0 };
    let (mut lo, mut hi) = p.omega_bounds;
    let need = r.rhs - best_av;
    if r.b_omega > 0.0 {
        lo = lo.max(need / r.b_omega);
    } else if r.b_omega < 0.0 {
        hi = hi.min(need / r.b_omega);
    } else if need > 0.0 {
        return None;
    }
    (lo <= hi).then_some((lo, hi))
}

fn ternary(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

fn best_v(p: &QpProblem, w: f64) -> Option<f64> {
    v_interval(p, w).map(|(lo, hi)| clamp_interval(lo, hi, p.v_desired))
}

fn cost(p: &QpProblem, v: f64, w: f64, d: f64) -> f64 {
    let wt = &p.weights;
    wt.w_v * (v - p.v_desired).powi(2) + wt.w_omega * w * w + wt.w_delta * d * d
}

/// Per-axis grid search with `n` points per axis. `None` if the barrier row is infeasible.
pub fn grid_argmin(p: &QpProblem, n: usize) -> Option<GridArgmin> {
    let (wlo, whi) = w_interval(p)?;
    let clf = p.clf_row;
    let delta_of = |w: f64| (clf.c_omega * w - clf.rhs).max(0.0);
    let reduced_w = |w: f64| {
        let v = best_v(p, w).expect("w inside feasible interval");
        cost(p, v, w, delta_of(w))
    };

    // v axis: for each v, best omega over the feasible interval
    let (vlo, vhi) = p.v_bounds;
    let sv = (vhi - vlo) / (n - 1) as f64;
    let r = p.cbf_rows[0];
    let mut v_best = (f64::INFINITY, 0.0);
    for k in 0..n {
        let v = vlo + k as f64 * sv;
        let (mut lo, mut hi) = p.omega_bounds;
        let need = r.rhs - r.a_v * v;
        if r.b_omega > 0.0 {
            lo = lo.max(need / r.b_omega);
        } else if r.b_omega < 0.0 {
            hi = hi.min(need / r.b_omega);
        } else if need > 0.0 {
            continue;
        }
        if lo > hi {
            continue;
        }
        let g = |w: f64| cost(p, v, w, delta_of(w));
        let w = ternary(lo, hi, g);
        let c = g(w);
        if c < v_best.0 {
            v_best = (c, v);
        }
    }

    // omega axis: v and delta are explicit
    let (olo, ohi) = p.omega_bounds;
    let so = (ohi - olo) / (n - 1) as f64;
    let mut w_best = (f64::INFINITY, 0.0);
    for k in 0..n {
        let w = olo + k as f64 * so;
        if w < wlo || w > whi {
            continue;
        }
        let c = reduced_w(w);
        if c < w_best.0 {
            w_best = (c, w);
        }
    }

    // delta axis: omega restricted to c w <= rhs + delta
    let dmax = delta_of(olo).max(delta_of(ohi)).max(1e-9);
    let sd = dmax / (n - 1) as f64;
    let mut d_best = (f64::INFINITY, 0.0);
    for k in 0..n {
        let d = k as f64 * sd;
        let (mut lo, mut hi) = (wlo, whi);
        let lim = clf.rhs + d;
        if clf.c_omega > 0.0 {
            hi = hi.min(lim / clf.c_omega);
        } else if clf.c_omega < 0.0 {
            lo = lo.max(lim / clf.c_omega);
        } else if lim < 0.0 {
            continue;
        }
        if lo > hi {
            continue;
        }
        let g = |w: f64| cost(p, best_v(p, w).unwrap(), w, d);
        let w = ternary(lo, hi, g);
        let c = g(w);
        if c < d_best.0 {
            d_best = (c, d);
        }
    }

    Some(GridArgmin { v: v_best.1, omega: w_best.1, delta: d_best.1, spacing: [sv, so, sd] })
}
