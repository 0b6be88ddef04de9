//! Occupancy-grid-map control barrier functions.
//!
//! The pipeline turns range scans into a log-odds occupancy grid, binarizes and
//! inflates it, takes the exact signed distance transform, shapes it with
//! `a * tanh(b * phi)` and interpolates it with a C2 bicubic spline. The shaped
//! field defines a single barrier function
//!
//! ```text
//!     h(x) = Phi_s(p) + l_s + l_a * cos(eta)
//! ```
//!
//! whose time derivative is affine in `(v, omega)`, so it enters a three-variable
//! quadratic program as one linear constraint no matter how many obstacles the
//! map holds.
//!
//! The crate is `no_std` and only needs `alloc`. IO, scenarios and the command
//! line live in the companion `ogm-cbf` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod controller;
pub mod grid;
pub mod math;
pub mod ogm;
pub mod qp;
pub mod sdf;
pub mod shaping;
pub mod sim;

pub use controller::{CbfParams, CbfRow, ClfParams, ClfRow, ControlBounds, ControlOutput, StepDiagnostics};
pub use grid::GridGeometry;
pub use math::Vec2;
pub use ogm::{BinaryGrid, OccupancyGrid, SensorModel};
pub use qp::{QpProblem, QpSolution, QpStatus, QpWeights};
pub use sdf::{GradientField, SdfField};
pub use shaping::{FieldSample, GradientAngle, ShapedField, ShapingParams};
pub use sim::{ControlInput, LidarConfig, Obstacle, RangeScan, RobotState, World};
