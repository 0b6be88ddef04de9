//! Shaping `T(phi) = a * tanh(b * phi)` and the smooth field `Phi_s` built from it.
//!
//! Shaped node values sit at cell centers and are interpolated with a
//! tensor-product natural cubic spline (bicubic Hermite patches whose corner
//! derivatives come from 1D spline solves). The interpolant reproduces the nodes,
//! reproduces affine fields exactly and is C2 across cell edges, so the value,
//! gradient and Hessian used by the barrier function are all analytic.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::GridGeometry;
use crate::math::Vec2;
use crate::sdf::SdfField;
use crate::sim::RobotState;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("point ({x}, {y}) is outside the valid field extent")]
    OutOfExtent { x: f64, y: f64 },
    #[error("invalid shaping parameters: {0}")]
    InvalidParams(&'static str),
    #[error("field needs at least 3x3 nodes, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapingParams {
    /// Output scale, meters.
    pub a: f64,
    /// Input scale, 1/meters.
    pub b: f64,
}

impl Default for ShapingParams {
    fn default() -> Self {
        Self { a: 2.0, b: 0.5 }
    }
}

impl ShapingParams {
    pub fn new(a: f64, b: f64) -> Result<Self, FieldError> {
        let p = Self { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.a > 0.0 && self.a.is_finite() && self.b > 0.0 && self.b.is_finite()) {
            return Err(FieldError::InvalidParams("a and b must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn shape(&self, phi: f64) -> f64 {
        self.a * libm::tanh(self.b * phi)
    }

    /// Gradient-norm threshold below which the gradient direction is treated as undefined.
    pub fn degenerate_threshold(&self) -> f64 {
        1e-6 * self.a * self.b
    }
}

/// Pointwise `a * tanh(b * phi)` over an SDF.
pub fn shape_nodes(sdf: &SdfField, params: &ShapingParams) -> Vec<f64> {
    sdf.values.iter().map(|&phi| params.shape(phi)).collect()
}

/// Like [`shape_nodes`] but cells behind the robot (relative to its heading)
/// get the saturated value `+a`, so only the half-plane ahead shapes the field.
pub fn shape_nodes_half_plane(sdf: &SdfField, params: &ShapingParams, pose: &RobotState) -> Vec<f64> {
    let g = sdf.geometry;
    let ahead = pose.heading_vector();
    (0..g.len())
        .map(|idx| {
            let (i, j) = g.coords(idx);
            if (g.cell_center(i, j) - pose.position).dot(ahead) < 0.0 {
                params.a
            } else {
                params.shape(sdf.values[idx])
            }
        })
        .collect()
}

/// First derivatives at unit-spaced knots of the natural cubic spline through `f`.
fn spline_slopes(f: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    let n = f.len();
    match n {
        0 => return,
        1 => {
            out[0] = 0.0;
            return;
        }
        _ => {}
    }
    // tridiagonal: diag [2, 4, ..., 4, 2], off-diagonals 1
    let rhs = |k: usize| {
        if k == 0 {
            3.0 * (f[1] - f[0])
        } else if k == n - 1 {
            3.0 * (f[n - 1] - f[n - 2])
        } else {
            3.0 * (f[k + 1] - f[k - 1])
        }
    };
    let diag = |k: usize| if k == 0 || k == n - 1 { 2.0 } else { 4.0 };
    // forward sweep; scratch holds modified super-diagonal
    scratch[0] = 1.0 / diag(0);
    out[0] = rhs(0) / diag(0);
    for k in 1..n {
        let m = diag(k) - scratch[k - 1];
        scratch[k] = 1.0 / m;
        out[k] = (rhs(k) - out[k - 1]) / m;
    }
    for k in (0..n - 1).rev() {
        out[k] -= scratch[k] * out[k + 1];
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub gradient: Vec2,
    /// `[[d2/dx2, d2/dxdy], [d2/dydx, d2/dy2]]`
    pub hessian: [[f64; 2]; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientAngle {
    /// `atan2(dPhi/dy, dPhi/dx)`.
    pub angle: f64,
    /// Spatial gradient of `angle`; zero when `degenerate`.
    pub angle_gradient: Vec2,
    pub gradient_norm: f64,
    pub degenerate: bool,
    pub sample: FieldSample,
}

/// Continuously differentiable shaped field `Phi_s`. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapedField {
    pub geometry: GridGeometry,
    pub nodes: Vec<f64>,
    // spline derivatives in node units
    dx: Vec<f64>,
    dy: Vec<f64>,
    dxy: Vec<f64>,
    degenerate_eps: f64,
}

impl ShapedField {
    pub fn new(sdf: &SdfField, params: &ShapingParams) -> Result<Self, FieldError> {
        params.validate()?;
        Self::from_nodes(sdf.geometry, shape_nodes(sdf, params), params.degenerate_threshold())
    }

    pub fn new_half_plane(sdf: &SdfField, params: &ShapingParams, pose: &RobotState) -> Result<Self, FieldError> {
        params.validate()?;
        Self::from_nodes(sdf.geometry, shape_nodes_half_plane(sdf, params, pose), params.degenerate_threshold())
    }

    /// Builds the interpolant over arbitrary node values at cell centers.
    pub fn from_nodes(geometry: GridGeometry, nodes: Vec<f64>, degenerate_eps: f64) -> Result<Self, FieldError> {
        let (w, h) = (geometry.width, geometry.height);
        if w < 3 || h < 3 {
            return Err(FieldError::TooSmall { width: w, height: h });
        }
        assert_eq!(nodes.len(), w * h, "node count mismatch");
        let n = w * h;
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; n];
        let mut dxy = vec![0.0; n];
        let mut scratch = vec![0.0; w.max(h)];

        for j in 0..h {
            let row = j * w..(j + 1) * w;
            spline_slopes(&nodes[row.clone()], &mut dx[row], &mut scratch);
        }
        let mut col = vec![0.0; h];
        let mut col_out = vec![0.0; h];
        for (src, dst) in [(&nodes, &mut dy), (&dx, &mut dxy)] {
            for i in 0..w {
                for j in 0..h {
                    col[j] = src[j * w + i];
                }
                spline_slopes(&col, &mut col_out, &mut scratch);
                for j in 0..h {
                    dst[j * w + i] = col_out[j];
                }
            }
        }
        Ok(Self { geometry, nodes, dx, dy, dxy, degenerate_eps })
    }

    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.nodes[self.geometry.index(i, j)]
    }

    pub fn degenerate_eps(&self) -> f64 {
        self.degenerate_eps
    }

    /// Whether `p` is inside the grid extent shrunk by one cell on every side.
    pub fn in_extent(&self, p: Vec2) -> bool {
        let c = self.geometry.to_cell_coords(p);
        let (w, h) = (self.geometry.width as f64, self.geometry.height as f64);
        c.x >= 1.0 && c.x <= w - 1.0 && c.y >= 1.0 && c.y <= h - 1.0
    }

    /// Value, analytic gradient and analytic Hessian of the interpolant at `p`.
    pub fn eval(&self, p: Vec2) -> Result<FieldSample, FieldError> {
        if !self.in_extent(p) {
            return Err(FieldError::OutOfExtent { x: p.x, y: p.y });
        }
        let g = &self.geometry;
        let c = g.to_cell_coords(p);
        let (u, v) = (c.x - 0.5, c.y - 0.5);
        let i0 = (libm::floor(u) as usize).min(g.width - 2);
        let j0 = (libm::floor(v) as usize).min(g.height - 2);
        let (s, t) = (u - i0 as f64, v - j0 as f64);

        // Hermite basis [h00, h10, h01, h11] and derivatives
        let basis = |s: f64| {
            let (s2, s3) = (s * s, s * s * s);
            (
                [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2],
                [6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s],
                [12.0 * s - 6.0, 6.0 * s - 4.0, -12.0 * s + 6.0, 6.0 * s - 2.0],
            )
        };
        let (bs, bs1, bs2) = basis(s);
        let (bt, bt1, bt2) = basis(t);

        let mut acc = [0.0f64; 6]; // f, f_s, f_t, f_ss, f_st, f_tt
        for a in 0..2 {
            for b in 0..2 {
                let idx = g.index(i0 + a, j0 + b);
                let (f, fs, ft, fst) = (self.nodes[idx], self.dx[idx], self.dy[idx], self.dxy[idx]);
                // value basis index 2a, slope basis index 2a + 1
                let (va, sa, vb, sb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
                let term = |xs: &[f64; 4], yt: &[f64; 4]| {
                    xs[va] * yt[vb] * f + xs[sa] * yt[vb] * fs + xs[va] * yt[sb] * ft + xs[sa] * yt[sb] * fst
                };
                acc[0] += term(&bs, &bt);
                acc[1] += term(&bs1, &bt);
                acc[2] += term(&bs, &bt1);
                acc[3] += term(&bs2, &bt);
                acc[4] += term(&bs1, &bt1);
                acc[5] += term(&bs, &bt2);
            }
        }
        let inv = 1.0 / g.resolution;
        let inv2 = inv * inv;
        Ok(FieldSample {
            value: acc[0],
            gradient: Vec2::new(acc[1] * inv, acc[2] * inv),
            hessian: [[acc[3] * inv2, acc[4] * inv2], [acc[4] * inv2, acc[5] * inv2]],
        })
    }

    /// Direction of steepest ascent and its spatial gradient,
    /// `grad(theta_g) = (Phi_x * grad(Phi_y) - Phi_y * grad(Phi_x)) / |grad(Phi)|^2`.
    pub fn gradient_angle_and_jacobian(&self, p: Vec2) -> Result<GradientAngle, FieldError> {
        let sample = self.eval(p)?;
        let (gx, gy) = (sample.gradient.x, sample.gradient.y);
        let norm = libm::hypot(gx, gy);
        let angle = libm::atan2(gy, gx);
        if norm < self.degenerate_eps {
            return Ok(GradientAngle { angle, angle_gradient: Vec2::ZERO, gradient_norm: norm, degenerate: true, sample });
        }
        let [[hxx, hxy], [_, hyy]] = sample.hessian;
        let n2 = norm * norm;
        let angle_gradient = Vec2::new((gx * hxy - gy * hxx) / n2, (gx * hyy - gy * hxy) / n2);
        Ok(GradientAngle { angle, angle_gradient, gradient_norm: norm, degenerate: false, sample })
    }
}
