//! Ground-truth world, simulated range sensor and kinematic integrators.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::math::{wrap_angle, Vec2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("robot position ({x}, {y}) is outside the world bounds")]
    OutsideBounds { x: f64, y: f64 },
    #[error("invalid world: {0}")]
    InvalidWorld(&'static str),
    #[error("invalid lidar config: {0}")]
    InvalidLidar(&'static str),
}

/// Axis-aligned rectangle in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Obstacle {
    Circle { center: Vec2, radius: f64 },
    /// Simple polygon, vertices in either winding order.
    Polygon { vertices: Vec<Vec2> },
}

impl Obstacle {
    /// Axis-aligned box obstacle as a polygon.
    pub fn rect(min: Vec2, max: Vec2) -> Self {
        Obstacle::Polygon {
            vertices: alloc::vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)],
        }
    }

    /// Rectangle of the given size centered at `center`, rotated by `yaw`.
    pub fn oriented_rect(center: Vec2, length: f64, width: f64, yaw: f64) -> Self {
        let (hl, hw) = (0.5 * length, 0.5 * width);
        let vertices = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)]
            .iter()
            .map(|&(x, y)| center + Vec2::new(x, y).rotate(yaw))
            .collect();
        Obstacle::Polygon { vertices }
    }

    /// Signed distance from `p` to the obstacle surface, negative inside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        match self {
            Obstacle::Circle { center, radius } => p.distance(*center) - radius,
            Obstacle::Polygon { vertices } => {
                let d = edges(vertices)
                    .map(|(a, b)| point_segment_distance(p, a, b))
                    .fold(f64::INFINITY, f64::min);
                if point_in_polygon(p, vertices) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Smallest `t >= 0` with `origin + t * dir` on the obstacle (`dir` unit length).
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        match self {
            Obstacle::Circle { center, radius } => ray_circle(origin, dir, *center, *radius),
            Obstacle::Polygon { vertices } => {
                if point_in_polygon(origin, vertices) {
                    return Some(0.0);
                }
                edges(vertices)
                    .filter_map(|(a, b)| ray_segment(origin, dir, a, b))
                    .reduce(f64::min)
            }
        }
    }

    fn within(&self, bounds: &Aabb) -> bool {
        match self {
            Obstacle::Circle { center, radius } => {
                bounds.contains(*center - Vec2::new(*radius, *radius))
                    && bounds.contains(*center + Vec2::new(*radius, *radius))
            }
            Obstacle::Polygon { vertices } => vertices.iter().all(|v| bounds.contains(*v)),
        }
    }
}

fn edges(vertices: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    let n = vertices.len();
    (0..n).map(move |k| (vertices[k], vertices[(k + 1) % n]))
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.distance(a + ab * t)
}

fn point_in_polygon(p: Vec2, vertices: &[Vec2]) -> bool {
    let mut inside = false;
    for (a, b) in edges(vertices) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let f = origin - center;
    let b = f.dot(dir);
    let c = f.norm_squared() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - libm::sqrt(disc);
    (t >= 0.0).then_some(t)
}

fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ao = a - origin;
    let t = ao.cross(e) / denom;
    let s = ao.cross(dir) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let orient = |a: Vec2, b: Vec2, c: Vec2| (b - a).cross(c - a);
    let on_segment = |a: Vec2, b: Vec2, c: Vec2| {
        c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
    };
    let (d1, d2) = (orient(q1, q2, p1), orient(q1, q2, p2));
    let (d3, d4) = (orient(p1, p2, q1), orient(p1, p2, q2));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn polygon_is_simple(vertices: &[Vec2]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Ground-truth environment: bounds plus static obstacles.
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub bounds: Aabb,
    pub obstacles: Vec<Obstacle>,
}

impl World {
    pub fn new(bounds: Aabb, obstacles: Vec<Obstacle>) -> Result<Self, SimError> {
        let world = Self { bounds, obstacles };
        world.validate()?;
        Ok(world)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.bounds.min.x < self.bounds.max.x && self.bounds.min.y < self.bounds.max.y) {
            return Err(SimError::InvalidWorld("bounds must have positive area"));
        }
        for obstacle in &self.obstacles {
            match obstacle {
                Obstacle::Circle { center, radius } => {
                    if !(*radius > 0.0 && radius.is_finite() && center.is_finite()) {
                        return Err(SimError::InvalidWorld("circle radius must be positive and finite"));
                    }
                }
                Obstacle::Polygon { vertices } => {
                    if vertices.len() < 3 || !vertices.iter().all(|v| v.is_finite()) {
                        return Err(SimError::InvalidWorld("polygon needs at least 3 finite vertices"));
                    }
                    if !polygon_is_simple(vertices) {
                        return Err(SimError::InvalidWorld("polygon is self-intersecting"));
                    }
                }
            }
            if !obstacle.within(&self.bounds) {
                return Err(SimError::InvalidWorld("obstacle extends outside the bounds"));
            }
        }
        Ok(())
    }

    /// Signed distance from `p` to the nearest obstacle surface (negative inside).
    /// `+inf` in an empty world.
    pub fn clearance(&self, p: Vec2) -> f64 {
        self.obstacles.iter().map(|o| o.signed_distance(p)).fold(f64::INFINITY, f64::min)
    }
}

/// Planar pose with heading kept in `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub position: Vec2,
    pub heading: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { position: Vec2::new(x, y), heading: wrap_angle(heading) }
    }

    pub fn heading_vector(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    /// World position of a point given in the body frame.
    pub fn body_to_world(&self, body: Vec2) -> Vec2 {
        self.position + body.rotate(self.heading)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlInput {
    /// Linear speed, m/s.
    pub v: f64,
    /// Angular speed, rad/s.
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarConfig {
    pub num_beams: usize,
    pub fov: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self { num_beams: 360, fov: TAU, max_range: 10.0, range_noise_sigma: 0.0 }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_beams == 0 {
            return Err(SimError::InvalidLidar("num_beams must be at least 1"));
        }
        if !(self.fov > 0.0 && self.fov <= TAU) {
            return Err(SimError::InvalidLidar("fov must lie in (0, 2*pi]"));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(SimError::InvalidLidar("max_range must be positive"));
        }
        if !(self.range_noise_sigma >= 0.0 && self.range_noise_sigma.is_finite()) {
            return Err(SimError::InvalidLidar("range_noise_sigma must be non-negative"));
        }
        Ok(())
    }

    /// Beam angle in the sensor frame; beams sit at the centers of `num_beams` equal sectors.
    pub fn beam_angle(&self, beam: usize) -> f64 {
        -0.5 * self.fov + (beam as f64 + 0.5) * self.fov / self.num_beams as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RangeScan {
    pub ranges: Vec<f64>,
    pub beam_angles: Vec<f64>,
    pub pose: RobotState,
    /// A range equal to this value is a miss.
    pub max_range: f64,
}

impl RangeScan {
    pub fn is_hit(&self, beam: usize) -> bool {
        self.ranges[beam] < self.max_range
    }

    /// World-frame endpoint of a beam.
    pub fn endpoint(&self, beam: usize) -> Vec2 {
        let dir = Vec2::from_angle(self.pose.heading + self.beam_angles[beam]);
        self.pose.position + dir * self.ranges[beam]
    }
}

/// Simulated 2D lidar. Misses report exactly `max_range`; Gaussian noise is only
/// applied to hits and clamped into `(0, max_range]`.
pub fn raycast_scan(world: &World, state: &RobotState, cfg: &LidarConfig, rng_seed: u64) -> Result<RangeScan, SimError> {
    cfg.validate()?;
    if !world.bounds.contains(state.position) {
        return Err(SimError::OutsideBounds { x: state.position.x, y: state.position.y });
    }
    let min_range = cfg.max_range * 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = Normal::new(0.0, cfg.range_noise_sigma).map_err(|_| SimError::InvalidLidar("bad noise sigma"))?;

    let beam_angles: Vec<f64> = (0..cfg.num_beams).map(|b| cfg.beam_angle(b)).collect();
    let ranges = beam_angles
        .iter()
        .map(|&beam| {
            let dir = Vec2::from_angle(state.heading + beam);
            let hit = world
                .obstacles
                .iter()
                .filter_map(|o| o.ray_hit(state.position, dir))
                .reduce(f64::min);
            let eps = if cfg.range_noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            match hit {
                Some(t) if t < cfg.max_range => (t + eps).clamp(min_range, cfg.max_range),
                _ => cfg.max_range,
            }
        })
        .collect();
    Ok(RangeScan { ranges, beam_angles, pose: *state, max_range: cfg.max_range })
}

/// Forward-Euler unicycle step.
pub fn step_unicycle(state: &RobotState, u: ControlInput, dt: f64) -> RobotState {
    let position = state.position + state.heading_vector() * (u.v * dt);
    RobotState { position, heading: wrap_angle(state.heading + u.omega * dt) }
}

/// Front-wheel steering angle realizing yaw rate `omega` at speed `v`.
/// Zero when `v == 0`, where the commanded rotation is applied directly.
pub fn steering_angle(v: f64, omega: f64, wheelbase: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        libm::atan(omega * wheelbase / v)
    }
}

/// Forward-Euler rear-axle kinematic bicycle step.
pub fn step_bicycle(state: &RobotState, u: ControlInput, dt: f64, wheelbase: f64) -> RobotState {
    if u.v == 0.0 {
        return RobotState { position: state.position, heading: wrap_angle(state.heading + u.omega * dt) };
    }
    let steer = steering_angle(u.v, u.omega, wheelbase);
    let yaw_rate = u.v * libm::tan(steer) / wheelbase;
    let position = state.position + state.heading_vector() * (u.v * dt);
    RobotState { position, heading: wrap_angle(state.heading + yaw_rate * dt) }
}

/// True iff the open disc of `robot_radius` around the robot overlaps an obstacle.
/// Touching the surface does not count.
pub fn collision_check(world: &World, state: &RobotState, robot_radius: f64) -> bool {
    world.obstacles.iter().any(|o| o.signed_distance(state.position) < robot_radius)
}
