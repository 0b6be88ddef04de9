//! Barrier value, its control-affine derivative, the heading CLF and the
//! per-step CBF-CLF controller.
//!
//! With `eta = wrap(theta_g - theta)` and `e = (cos theta, sin theta)`:
//!
//! ```text
//!     h     = Phi_s(p) + l_s + l_a cos(eta)
//!     h_dot = grad(Phi_s) . p_dot - l_a sin(eta) (theta_g_dot - omega)
//!           = [|grad Phi_s| cos(eta) - l_a sin(eta) (grad(theta_g) . e)] v + [l_a sin(eta)] omega
//! ```

use alloc::vec::Vec;

use crate::math::{wrap_angle, Vec2};
use crate::qp::{self, CbfConstraint, ClfConstraint, QpError, QpProblem, QpStatus, QpWeights};
use crate::shaping::{FieldError, ShapedField};
use crate::sim::{ControlInput, RobotState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("invalid barrier parameters: {0}")]
    InvalidCbf(&'static str),
    #[error("invalid Lyapunov parameters: {0}")]
    InvalidClf(&'static str),
    #[error("invalid control bounds: {0}")]
    InvalidBounds(&'static str),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Barrier offsets and the gain of `alpha(h) = k_alpha * h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CbfParams {
    pub l_s: f64,
    pub l_a: f64,
    pub k_alpha: f64,
}

impl Default for CbfParams {
    fn default() -> Self {
        Self { l_s: -0.5, l_a: 0.25, k_alpha: 1.0 }
    }
}

impl CbfParams {
    pub fn new(l_s: f64, l_a: f64, k_alpha: f64) -> Result<Self, ControllerError> {
        let p = Self { l_s, l_a, k_alpha };
        p.validate()?;
        Ok(p)
    }

    /// `0 < l_a <= -l_s` keeps `l_s + l_a cos(eta) <= 0`, so `h >= 0` implies `Phi_s >= 0`.
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.l_a > 0.0) {
            return Err(ControllerError::InvalidCbf("l_a must be positive"));
        }
        if !(self.l_a <= -self.l_s) {
            return Err(ControllerError::InvalidCbf("l_a must not exceed -l_s"));
        }
        if !(self.k_alpha > 0.0 && self.k_alpha.is_finite()) {
            return Err(ControllerError::InvalidCbf("k_alpha must be positive"));
        }
        Ok(())
    }

    /// Minimum of `-(l_s + l_a cos(eta))` over all headings.
    pub fn safety_margin(&self) -> f64 {
        -self.l_s - self.l_a
    }

    pub fn alpha(&self, h: f64) -> f64 {
        self.k_alpha * h
    }
}

/// Heading objective `V = 1/2 wrap(theta - target)^2` with `gamma(V) = k_gamma * V`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClfParams {
    pub target_heading: f64,
    pub k_gamma: f64,
}

impl Default for ClfParams {
    fn default() -> Self {
        Self { target_heading: 0.0, k_gamma: 2.0 }
    }
}

impl ClfParams {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.k_gamma > 0.0 && self.k_gamma.is_finite()) {
            return Err(ControllerError::InvalidClf("k_gamma must be positive"));
        }
        if !self.target_heading.is_finite() {
            return Err(ControllerError::InvalidClf("target heading must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self { v_min: 0.0, v_max: 3.0, omega_max: 1.5 }
    }
}

impl ControlBounds {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.v_min <= self.v_max) {
            return Err(ControllerError::InvalidBounds("v_min must not exceed v_max"));
        }
        if !(self.omega_max >= 0.0) {
            return Err(ControllerError::InvalidBounds("omega_max must be non-negative"));
        }
        Ok(())
    }
}

/// Everything the per-step controller needs besides the state and the field.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    pub cbf: CbfParams,
    pub clf: ClfParams,
    pub weights: QpWeights,
    pub bounds: ControlBounds,
    pub v_desired: f64,
    /// Body-frame points that each get their own barrier row. Empty means a
    /// single point at the body origin.
    pub body_points: Vec<Vec2>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            cbf: CbfParams::default(),
            clf: ClfParams::default(),
            weights: QpWeights::default(),
            bounds: ControlBounds::default(),
            v_desired: 1.0,
            body_points: Vec::new(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        self.cbf.validate()?;
        self.clf.validate()?;
        self.bounds.validate()?;
        Ok(())
    }
}

/// Barrier value and the coefficients of `h_dot = a_v v + b_omega omega` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CbfRow {
    pub h: f64,
    pub a_v: f64,
    pub b_omega: f64,
    /// Gradient of `Phi_s` vanished; the heading term is frozen at `cos(eta) = 1`.
    pub degenerate: bool,
}

impl CbfRow {
    pub fn constraint(&self, params: &CbfParams) -> CbfConstraint {
        CbfConstraint { a_v: self.a_v, b_omega: self.b_omega, rhs: -params.alpha(self.h) }
    }

    pub fn hdot(&self, u: ControlInput) -> f64 {
        self.a_v * u.v + self.b_omega * u.omega
    }
}

/// Barrier row for a body point at offset `body` (body frame). The rigid-body
/// velocity of that point, `v e + omega R90 R(theta) body`, is folded into the
/// coefficients.
fn barrier_row_at(state: &RobotState, field: &ShapedField, params: &CbfParams, body: Vec2) -> Result<CbfRow, FieldError> {
    let point = state.body_to_world(body);
    let ga = field.gradient_angle_and_jacobian(point)?;
    let phi = ga.sample.value;
    if ga.degenerate {
        return Ok(CbfRow { h: phi + params.l_s + params.l_a, a_v: 0.0, b_omega: 0.0, degenerate: true });
    }
    let eta = wrap_angle(ga.angle - state.heading);
    let (sin_eta, cos_eta) = (libm::sin(eta), libm::cos(eta));
    let h = phi + params.l_s + params.l_a * cos_eta;

    let e = state.heading_vector();
    // point velocity per unit omega
    let w = body.rotate(state.heading).perp();
    let grad = ga.sample.gradient;
    let a_v = grad.dot(e) - params.l_a * sin_eta * ga.angle_gradient.dot(e);
    let b_omega = grad.dot(w) - params.l_a * sin_eta * ga.angle_gradient.dot(w) + params.l_a * sin_eta;
    Ok(CbfRow { h, a_v, b_omega, degenerate: false })
}

/// Barrier value and derivative coefficients at the robot position.
pub fn barrier_row(state: &RobotState, field: &ShapedField, params: &CbfParams) -> Result<CbfRow, FieldError> {
    barrier_row_at(state, field, params, Vec2::ZERO)
}

/// `h(x) = Phi_s(p) + l_s + l_a cos(eta)`.
pub fn h_value(state: &RobotState, field: &ShapedField, params: &CbfParams) -> Result<f64, FieldError> {
    Ok(barrier_row(state, field, params)?.h)
}

/// `(a_v, b_omega)` with `h_dot = a_v v + b_omega omega`.
pub fn hdot_coefficients(state: &RobotState, field: &ShapedField, params: &CbfParams) -> Result<(f64, f64), FieldError> {
    let row = barrier_row(state, field, params)?;
    Ok((row.a_v, row.b_omega))
}

/// One barrier row per body point.
pub fn multi_point_rows(
    state: &RobotState,
    field: &ShapedField,
    params: &CbfParams,
    body_points: &[Vec2],
) -> Result<Vec<CbfRow>, FieldError> {
    body_points.iter().map(|&b| barrier_row_at(state, field, params, b)).collect()
}

/// Heading Lyapunov value and its omega coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClfRow {
    /// `V = 1/2 e^2`.
    pub value: f64,
    /// `V_dot = c_omega * omega`, i.e. the wrapped heading error.
    pub c_omega: f64,
}

impl ClfRow {
    /// `c_omega omega - delta <= -k_gamma V`.
    pub fn constraint(&self, params: &ClfParams) -> ClfConstraint {
        ClfConstraint { c_omega: self.c_omega, rhs: -params.k_gamma * self.value }
    }
}

pub fn clf_row(state: &RobotState, params: &ClfParams) -> ClfRow {
    let err = wrap_angle(state.heading - params.target_heading);
    ClfRow { value: 0.5 * err * err, c_omega: err }
}

/// Barrier rows for the configured robot model: one row for a point robot.
pub fn barrier_rows(state: &RobotState, field: &ShapedField, config: &ControllerConfig) -> Result<Vec<CbfRow>, FieldError> {
    if config.body_points.is_empty() {
        Ok(alloc::vec![barrier_row(state, field, &config.cbf)?])
    } else {
        multi_point_rows(state, field, &config.cbf, &config.body_points)
    }
}

/// Assembles the QP from already evaluated rows.
pub fn assemble_qp(rows: &[CbfRow], clf: &ClfRow, config: &ControllerConfig) -> QpProblem {
    QpProblem {
        weights: config.weights,
        v_desired: config.v_desired,
        cbf_rows: rows.iter().map(|r| r.constraint(&config.cbf)).collect(),
        clf_row: clf.constraint(&config.clf),
        v_bounds: (config.bounds.v_min, config.bounds.v_max),
        omega_bounds: (-config.bounds.omega_max, config.bounds.omega_max),
    }
}

/// Evaluates the field at the current state and builds the QP.
pub fn build_qp(state: &RobotState, field: &ShapedField, config: &ControllerConfig) -> Result<QpProblem, FieldError> {
    let rows = barrier_rows(state, field, config)?;
    Ok(assemble_qp(&rows, &clf_row(state, &config.clf), config))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlStatus {
    Optimal,
    CbfInfeasibleFallback,
    /// The robot left the valid field extent; the command is a full stop.
    OutOfExtent,
}

impl From<QpStatus> for ControlStatus {
    fn from(s: QpStatus) -> Self {
        match s {
            QpStatus::Optimal => ControlStatus::Optimal,
            QpStatus::CbfInfeasibleFallback => ControlStatus::CbfInfeasibleFallback,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    /// Smallest barrier value over the rows.
    pub h: f64,
    /// Smallest `h_dot + alpha(h)` over the rows at the returned input.
    pub hdot_plus_alpha_h: f64,
    pub delta: f64,
    pub status: ControlStatus,
    pub cbf_rows: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOutput {
    pub u: ControlInput,
    pub diagnostics: StepDiagnostics,
}

/// One controller invocation: barrier rows, Lyapunov row, QP.
pub fn control_step(state: &RobotState, field: &ShapedField, config: &ControllerConfig) -> Result<ControlOutput, ControllerError> {
    config.validate()?;
    let rows = match barrier_rows(state, field, config) {
        Ok(rows) => rows,
        Err(FieldError::OutOfExtent { .. }) => {
            return Ok(ControlOutput {
                u: ControlInput::ZERO,
                diagnostics: StepDiagnostics {
                    h: f64::NAN,
                    hdot_plus_alpha_h: f64::NAN,
                    delta: 0.0,
                    status: ControlStatus::OutOfExtent,
                    cbf_rows: 0,
                },
            })
        }
        Err(e) => return Err(e.into()),
    };
    let clf = clf_row(state, &config.clf);
    let problem = assemble_qp(&rows, &clf, config);
    let sol = qp::solve_qp(&problem)?;
    let h = rows.iter().map(|r| r.h).fold(f64::INFINITY, f64::min);
    let hdot_plus_alpha_h = rows
        .iter()
        .map(|r| r.hdot(sol.u) + config.cbf.alpha(r.h))
        .fold(f64::INFINITY, f64::min);
    Ok(ControlOutput {
        u: sol.u,
        diagnostics: StepDiagnostics {
            h,
            hdot_plus_alpha_h,
            delta: sol.delta,
            status: sol.status.into(),
            cbf_rows: rows.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;
    use alloc::vec;
    use core::f64::consts::{FRAC_PI_2, PI};

    /// Field with constant value 1 + c*x so the gradient is +x everywhere.
    fn ramp(slope: f64) -> ShapedField {
        let g = GridGeometry::new(21, 21, 0.5, Vec2::new(-5.0, -5.0));
        let nodes = (0..g.len())
            .map(|k| {
                let (i, j) = g.coords(k);
                1.0 + slope * g.cell_center(i, j).x
            })
            .collect();
        ShapedField::from_nodes(g, nodes, 1e-12).unwrap()
    }

    fn params() -> CbfParams {
        CbfParams::new(-0.5, 0.5, 1.0).unwrap()
    }

    #[test]
    fn h_value_examples() {
        let f = ramp(1.0);
        let at = |heading| h_value(&RobotState::new(0.0, 0.0, heading), &f, &params()).unwrap();
        assert!((at(0.0) - 1.0).abs() < 1e-12);
        assert!(at(PI).abs() < 1e-12);
        assert!((at(FRAC_PI_2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hdot_examples() {
        let f = ramp(1.0);
        let (a, b) = hdot_coefficients(&RobotState::new(0.0, 0.0, 0.0), &f, &params()).unwrap();
        assert!((a - 1.0).abs() < 1e-10 && b.abs() < 1e-12);
        // eta = theta_g - theta = -pi/2
        let (a, b) = hdot_coefficients(&RobotState::new(0.0, 0.0, FRAC_PI_2), &f, &params()).unwrap();
        assert!(a.abs() < 1e-10);
        assert!((b.abs() - 0.5).abs() < 1e-12);
        let eta = wrap_angle(0.0 - FRAC_PI_2);
        assert!((b - 0.5 * libm::sin(eta)).abs() < 1e-12);
    }

    #[test]
    fn admissibility_gate() {
        assert!(CbfParams::new(-0.5, 0.6, 1.0).is_err());
        assert!(CbfParams::new(-0.5, 0.0, 1.0).is_err());
        assert!(CbfParams::new(-0.5, 0.5, 0.0).is_err());
        assert!(CbfParams::new(-0.5, 0.5, 1.0).is_ok());
    }

    #[test]
    fn clf_examples() {
        let p = ClfParams { target_heading: 0.3, k_gamma: 2.0 };
        let r = clf_row(&RobotState::new(0.0, 0.0, 0.3), &p);
        assert_eq!((r.value, r.c_omega), (0.0, 0.0));
        let r = clf_row(&RobotState::new(0.0, 0.0, 0.3 + FRAC_PI_2), &p);
        assert!((r.value - PI * PI / 8.0).abs() < 1e-12);
        assert!((r.c_omega - FRAC_PI_2).abs() < 1e-12);
        let p = ClfParams { target_heading: -PI + 0.1, k_gamma: 2.0 };
        let mut s = RobotState::new(0.0, 0.0, 0.0);
        s.heading = -PI + 0.1 + 2.0 * PI;
        assert!(clf_row(&s, &p).value < 1e-20);
    }

    #[test]
    fn slack_barrier_gives_nominal_input() {
        // saturated field: gradient degenerate, h large
        let g = GridGeometry::new(11, 11, 0.5, Vec2::new(-2.75, -2.75));
        let field = ShapedField::from_nodes(g, vec![2.0; g.len()], 1e-6).unwrap();
        let config = ControllerConfig { v_desired: 2.0, ..ControllerConfig::default() };
        let out = control_step(&RobotState::new(0.0, 0.0, 0.0), &field, &config).unwrap();
        assert!((out.u.v - 2.0).abs() < 1e-12 && out.u.omega.abs() < 1e-12);
        assert_eq!(out.diagnostics.status, ControlStatus::Optimal);
        assert_eq!(out.diagnostics.cbf_rows, 1);
    }

    #[test]
    fn out_of_extent_stops() {
        let f = ramp(1.0);
        let out = control_step(&RobotState::new(40.0, 0.0, 0.0), &f, &ControllerConfig::default()).unwrap();
        assert_eq!(out.u, ControlInput::ZERO);
        assert_eq!(out.diagnostics.status, ControlStatus::OutOfExtent);
    }

    #[test]
    fn body_origin_point_matches_single_row() {
        let f = ramp(0.7);
        let s = RobotState::new(0.3, -0.2, 2.0);
        let single = barrier_row(&s, &f, &params()).unwrap();
        let multi = multi_point_rows(&s, &f, &params(), &[Vec2::ZERO]).unwrap();
        assert_eq!(multi, vec![single]);
    }
}
