//! Scenario files: a JSON description of one episode.
//!
//! Every section except `world` and `initial_state` has defaults. Unknown keys
//! are rejected at parse time and [`Scenario::validate`] reports every violated
//! invariant at once.

use std::path::Path;

use ogm_cbf_core::controller::{CbfParams, ClfParams, ControlBounds, ControllerConfig};
use ogm_cbf_core::grid::GridGeometry;
use ogm_cbf_core::math::Vec2;
use ogm_cbf_core::ogm::SensorModel;
use ogm_cbf_core::qp::QpWeights;
use ogm_cbf_core::shaping::ShapingParams;
use ogm_cbf_core::sim::{Aabb, LidarConfig, Obstacle, RobotState, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::NavError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub world: WorldSpec,
    #[serde(default)]
    pub robot: RobotSpec,
    pub initial_state: StateSpec,
    #[serde(default)]
    pub lidar: LidarSpec,
    #[serde(default)]
    pub map: MapSpec,
    #[serde(default)]
    pub shaping: ShapingSpec,
    #[serde(default)]
    pub cbf: CbfSpec,
    #[serde(default)]
    pub clf: ClfSpec,
    #[serde(default)]
    pub qp: QpSpec,
    #[serde(default = "default_v_desired")]
    pub v_desired: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_v_desired() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    /// Extra obstacles drawn from a seeded generator.
    #[serde(default)]
    pub clutter: Option<ClutterSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "type")]
pub enum ObstacleSpec {
    Circle { center: [f64; 2], radius: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
    OrientedRect { center: [f64; 2], length: f64, width: f64, yaw: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl ObstacleSpec {
    pub fn to_obstacle(&self) -> Obstacle {
        match self {
            ObstacleSpec::Circle { center, radius } => Obstacle::Circle { center: v2(*center), radius: *radius },
            ObstacleSpec::Rect { min, max } => Obstacle::rect(v2(*min), v2(*max)),
            ObstacleSpec::OrientedRect { center, length, width, yaw } => {
                Obstacle::oriented_rect(v2(*center), *length, *width, *yaw)
            }
            ObstacleSpec::Polygon { vertices } => Obstacle::Polygon { vertices: vertices.iter().map(|&p| v2(p)).collect() },
        }
    }
}

/// Random boxes and discs scattered in a region, kept apart by `min_gap` and
/// away from the keep-out discs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterSpec {
    pub region_min: [f64; 2],
    pub region_max: [f64; 2],
    pub count: usize,
    /// Box footprints `[length, width]` to draw from.
    #[serde(default = "default_boxes")]
    pub boxes: Vec<[f64; 2]>,
    /// Disc radii to draw from.
    #[serde(default = "default_discs")]
    pub discs: Vec<f64>,
    /// Probability of drawing a disc instead of a box.
    #[serde(default = "default_disc_fraction")]
    pub disc_fraction: f64,
    /// Smallest allowed distance between two obstacles.
    #[serde(default = "default_min_gap")]
    pub min_gap: f64,
    #[serde(default)]
    pub keep_out: Vec<KeepOut>,
    /// Generator seed; falls back to the scenario seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_boxes() -> Vec<[f64; 2]> {
    vec![[4.5, 1.8], [1.8, 0.6]]
}

fn default_discs() -> Vec<f64> {
    vec![0.3]
}

fn default_disc_fraction() -> f64 {
    0.3
}

fn default_min_gap() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeepOut {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "type")]
pub enum RobotModel {
    Unicycle,
    Bicycle { wheelbase: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    #[serde(default = "default_model")]
    pub model: RobotModel,
    /// Disc radius used for ground-truth collision checks.
    #[serde(default)]
    pub radius: f64,
    /// Body-frame points with their own barrier rows; empty for a point robot.
    #[serde(default)]
    pub body_points: Vec<[f64; 2]>,
}

fn default_model() -> RobotModel {
    RobotModel::Unicycle
}

impl Default for RobotSpec {
    fn default() -> Self {
        Self { model: default_model(), radius: 0.0, body_points: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarSpec {
    pub num_beams: usize,
    pub fov: f64,
    pub max_range: f64,
    pub noise_sigma: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        let d = LidarConfig::default();
        Self { num_beams: d.num_beams, fov: d.fov, max_range: d.max_range, noise_sigma: d.range_noise_sigma }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    /// Window that follows the robot.
    EgoLocal,
    /// Fixed world-frame map.
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSpec {
    pub mode: MapMode,
    pub resolution: f64,
    /// Cells `[width, height]`. Ego-local maps default to 160 x 160, global
    /// maps to the world bounds.
    pub size: Option<[usize; 2]>,
    /// Lower-left corner of a global map; defaults to the world minimum.
    pub origin: Option<[f64; 2]>,
    pub sensor_model: SensorModelSpec,
    pub threshold: f64,
    pub unknown_as_occupied: bool,
    pub inflation_radius: f64,
    pub half_plane: bool,
    /// Rebuild the map and field every n control steps.
    pub map_every_n: usize,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            mode: MapMode::EgoLocal,
            resolution: 0.1,
            size: None,
            origin: None,
            sensor_model: SensorModelSpec::default(),
            threshold: 0.0,
            unknown_as_occupied: false,
            inflation_radius: 0.0,
            half_plane: false,
            map_every_n: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorModelSpec {
    pub l_occ: f64,
    pub l_free: f64,
    pub l_prior: f64,
    pub l_min: f64,
    pub l_max: f64,
}

impl Default for SensorModelSpec {
    fn default() -> Self {
        let d = SensorModel::default();
        Self { l_occ: d.l_occ, l_free: d.l_free, l_prior: d.l_prior, l_min: d.l_min, l_max: d.l_max }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapingSpec {
    pub a: f64,
    pub b: f64,
}

impl Default for ShapingSpec {
    fn default() -> Self {
        let d = ShapingParams::default();
        Self { a: d.a, b: d.b }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CbfSpec {
    pub l_s: f64,
    pub l_a: f64,
    pub k_alpha: f64,
}

impl Default for CbfSpec {
    fn default() -> Self {
        let d = CbfParams::default();
        Self { l_s: d.l_s, l_a: d.l_a, k_alpha: d.k_alpha }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClfSpec {
    pub target_heading: f64,
    /// When non-empty the target heading points at the current waypoint and
    /// the episode ends once the last one is reached.
    pub waypoints: Vec<[f64; 2]>,
    pub switch_radius: f64,
    pub k_gamma: f64,
}

impl Default for ClfSpec {
    fn default() -> Self {
        let d = ClfParams::default();
        Self { target_heading: d.target_heading, waypoints: Vec::new(), switch_radius: 1.0, k_gamma: d.k_gamma }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QpSpec {
    pub w_v: f64,
    pub w_omega: f64,
    pub w_delta: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for QpSpec {
    fn default() -> Self {
        let w = QpWeights::default();
        let b = ControlBounds::default();
        Self { w_v: w.w_v, w_omega: w.w_omega, w_delta: w.w_delta, v_min: b.v_min, v_max: b.v_max, omega_max: b.omega_max }
    }
}

fn v2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads and validates a scenario file.
    pub fn load(path: &Path) -> Result<Self, NavError> {
        let text = std::fs::read_to_string(path).map_err(|source| NavError::Io { path: path.to_path_buf(), source })?;
        let mut scenario = Self::from_json(&text).map_err(|source| NavError::Json { path: path.to_path_buf(), source })?;
        if scenario.name.is_empty() {
            scenario.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Number of control steps for the full duration.
    pub fn step_count(&self) -> usize {
        (self.duration / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(v2(self.world.min), v2(self.world.max))
    }

    /// Explicit obstacles followed by the generated clutter.
    pub fn obstacles(&self) -> Vec<Obstacle> {
        let mut obstacles: Vec<Obstacle> = self.world.obstacles.iter().map(ObstacleSpec::to_obstacle).collect();
        if let Some(c) = &self.world.clutter {
            let fixed = obstacles.clone();
            obstacles.extend(generate_clutter(c, c.seed.unwrap_or(self.seed), &fixed));
        }
        obstacles
    }

    pub fn build_world(&self) -> Result<World, NavError> {
        World::new(self.bounds(), self.obstacles()).map_err(|e| NavError::Validation(vec![format!("world: {e}")]))
    }

    pub fn initial_robot_state(&self) -> RobotState {
        RobotState::new(self.initial_state.x, self.initial_state.y, self.initial_state.heading)
    }

    pub fn lidar_config(&self) -> LidarConfig {
        LidarConfig {
            num_beams: self.lidar.num_beams,
            fov: self.lidar.fov,
            max_range: self.lidar.max_range,
            range_noise_sigma: self.lidar.noise_sigma,
        }
    }

    pub fn sensor_model(&self) -> SensorModel {
        let s = &self.map.sensor_model;
        SensorModel { l_occ: s.l_occ, l_free: s.l_free, l_prior: s.l_prior, l_min: s.l_min, l_max: s.l_max }
    }

    pub fn shaping_params(&self) -> ShapingParams {
        ShapingParams { a: self.shaping.a, b: self.shaping.b }
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            cbf: CbfParams { l_s: self.cbf.l_s, l_a: self.cbf.l_a, k_alpha: self.cbf.k_alpha },
            clf: ClfParams { target_heading: self.clf.target_heading, k_gamma: self.clf.k_gamma },
            weights: QpWeights { w_v: self.qp.w_v, w_omega: self.qp.w_omega, w_delta: self.qp.w_delta },
            bounds: ControlBounds { v_min: self.qp.v_min, v_max: self.qp.v_max, omega_max: self.qp.omega_max },
            v_desired: self.v_desired,
            body_points: self.robot.body_points.iter().map(|&p| v2(p)).collect(),
        }
    }

    /// Map geometry at start, centered on the robot for ego-local maps.
    pub fn initial_map_geometry(&self) -> GridGeometry {
        let res = self.map.resolution;
        match self.map.mode {
            MapMode::EgoLocal => {
                let [w, h] = self.map.size.unwrap_or([160, 160]);
                let c = v2([self.initial_state.x, self.initial_state.y]);
                let origin = Vec2::new(c.x - 0.5 * w as f64 * res, c.y - 0.5 * h as f64 * res);
                GridGeometry::new(w, h, res, origin)
            }
            MapMode::Global => {
                let origin = self.map.origin.unwrap_or(self.world.min);
                let [w, h] = self.map.size.unwrap_or([
                    ((self.world.max[0] - origin[0]) / res).ceil().max(0.0) as usize,
                    ((self.world.max[1] - origin[1]) / res).ceil().max(0.0) as usize,
                ]);
                GridGeometry::new(w, h, res, v2(origin))
            }
        }
    }

    /// Checks every invariant and returns all violations together.
    pub fn validate(&self) -> Result<(), NavError> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };
        check(self.duration.is_finite() && self.duration > 0.0, "duration must be > 0");
        check(self.dt.is_finite() && self.dt > 0.0, "dt must be > 0");
        check(self.v_desired.is_finite(), "v_desired must be finite");
        check(
            finite(&[self.world.min[0], self.world.min[1], self.world.max[0], self.world.max[1]])
                && self.world.min[0] < self.world.max[0]
                && self.world.min[1] < self.world.max[1],
            "world: min must be below max",
        );
        check(self.robot.radius.is_finite() && self.robot.radius >= 0.0, "robot.radius must be >= 0");
        if let RobotModel::Bicycle { wheelbase } = self.robot.model {
            check(wheelbase.is_finite() && wheelbase > 0.0, "robot.model.wheelbase must be > 0");
        }
        check(self.robot.body_points.iter().all(|p| finite(p)), "robot.body_points must be finite");
        let s = self.initial_state;
        check(finite(&[s.x, s.y, s.heading]), "initial_state must be finite");
        check(self.bounds().contains(v2([s.x, s.y])), "initial_state must lie inside the world bounds");
        check(self.map.resolution.is_finite() && self.map.resolution > 0.0, "map.resolution must be > 0");
        check(self.map.threshold.is_finite(), "map.threshold must be finite");
        check(self.map.inflation_radius.is_finite() && self.map.inflation_radius >= 0.0, "map.inflation_radius must be >= 0");
        check(self.map.map_every_n >= 1, "map.map_every_n must be >= 1");
        if self.map.mode == MapMode::EgoLocal {
            check(self.map.origin.is_none(), "map.origin is only meaningful for global maps");
        }
        if self.map.resolution > 0.0 && self.map.resolution.is_finite() {
            let g = self.initial_map_geometry();
            check(g.width >= 3 && g.height >= 3, "map must be at least 3x3 cells");
            if g.width >= 3 && g.height >= 3 {
                let margin = g.resolution;
                let p = v2([s.x, s.y]);
                let inside = p.x >= g.origin.x + margin
                    && p.y >= g.origin.y + margin
                    && p.x <= g.max_corner().x - margin
                    && p.y <= g.max_corner().y - margin;
                check(inside, "initial_state must lie inside the map extent");
            }
        }
        let mut push_err = |prefix: &str, r: Result<(), String>| {
            if let Err(e) = r {
                errs.push(format!("{prefix}: {e}"));
            }
        };
        push_err("lidar", self.lidar_config().validate().map_err(|e| e.to_string()));
        push_err("map.sensor_model", self.sensor_model().validate().map_err(|e| e.to_string()));
        push_err("shaping", self.shaping_params().validate().map_err(|e| e.to_string()));
        let cfg = self.controller_config();
        push_err("cbf", cfg.cbf.validate().map_err(|e| e.to_string()));
        push_err("clf", cfg.clf.validate().map_err(|e| e.to_string()));
        push_err("qp", cfg.bounds.validate().map_err(|e| e.to_string()));
        let w = cfg.weights;
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };
        check(
            [w.w_v, w.w_omega, w.w_delta].iter().all(|x| x.is_finite() && *x > 0.0),
            "qp weights must be > 0",
        );
        check(self.clf.switch_radius.is_finite() && self.clf.switch_radius > 0.0, "clf.switch_radius must be > 0");
        check(self.clf.waypoints.iter().all(|p| finite(p)), "clf.waypoints must be finite");
        if let Some(c) = &self.world.clutter {
            check(c.region_min[0] < c.region_max[0] && c.region_min[1] < c.region_max[1], "clutter: region_min must be below region_max");
            check(!c.boxes.is_empty() || !c.discs.is_empty(), "clutter: needs at least one box or disc size");
            check((0.0..=1.0).contains(&c.disc_fraction), "clutter: disc_fraction must lie in [0, 1]");
            check(c.boxes.iter().all(|b| b[0] > 0.0 && b[1] > 0.0), "clutter: box sizes must be > 0");
            check(c.discs.iter().all(|r| *r > 0.0), "clutter: disc radii must be > 0");
            check(c.min_gap >= 0.0, "clutter: min_gap must be >= 0");
        }
        if errs.is_empty() {
            if let Err(NavError::Validation(mut e)) = self.build_world() {
                errs.append(&mut e);
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(NavError::Validation(errs))
        }
    }
}

/// Bounding radius of an obstacle around its reference point.
fn footprint(o: &Obstacle) -> (Vec2, f64) {
    match o {
        Obstacle::Circle { center, radius } => (*center, *radius),
        Obstacle::Polygon { vertices } => {
            let n = vertices.len().max(1) as f64;
            let c = vertices.iter().fold(Vec2::ZERO, |acc, &v| acc + v) * (1.0 / n);
            (c, vertices.iter().map(|v| v.distance(c)).fold(0.0, f64::max))
        }
    }
}

/// Draws clutter by rejection sampling. Candidates closer than `min_gap` to
/// another obstacle (bounding-disc test) or overlapping a keep-out disc are
/// dropped; gives up after a fixed number of attempts per obstacle.
pub fn generate_clutter(spec: &ClutterSpec, seed: u64, fixed: &[Obstacle]) -> Vec<Obstacle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<(Vec2, f64)> = Vec::new();
    let mut out = Vec::new();
    let lo = v2(spec.region_min);
    let hi = v2(spec.region_max);
    for _ in 0..spec.count {
        for _attempt in 0..200 {
            let use_disc = spec.boxes.is_empty() || (!spec.discs.is_empty() && rng.random_bool(spec.disc_fraction));
            let obstacle = if use_disc {
                let r = spec.discs[rng.random_range(0..spec.discs.len())];
                let c = Vec2::new(rng.random_range(lo.x + r..=hi.x - r), rng.random_range(lo.y + r..=hi.y - r));
                Obstacle::Circle { center: c, radius: r }
            } else {
                let [l, w] = spec.boxes[rng.random_range(0..spec.boxes.len())];
                let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let e = 0.5 * (l * l + w * w).sqrt();
                let c = Vec2::new(rng.random_range(lo.x + e..=hi.x - e), rng.random_range(lo.y + e..=hi.y - e));
                Obstacle::oriented_rect(c, l, w, yaw)
            };
            let (c, r) = footprint(&obstacle);
            let clear_of_fixed = fixed.iter().all(|f| f.signed_distance(c) - r >= spec.min_gap);
            let clear_of_placed = placed.iter().all(|&(pc, pr)| pc.distance(c) - pr - r >= spec.min_gap);
            let clear_of_keep_out = spec.keep_out.iter().all(|k| v2(k.center).distance(c) - r >= k.radius);
            if clear_of_fixed && clear_of_placed && clear_of_keep_out {
                placed.push((c, r));
                out.push(obstacle);
                break;
            }
        }
    }
    out
}

/// A corridor of the given size with walls along both long sides, seeded
/// clutter in between and a waypoint at the far end.
pub fn corridor_scenario(seed: u64) -> Scenario {
    let (length, width, wall) = (40.0, 10.0, 0.3);
    Scenario {
        name: format!("corridor-{seed:03}"),
        world: WorldSpec {
            min: [0.0, 0.0],
            max: [length, width],
            obstacles: vec![
                ObstacleSpec::Rect { min: [0.0, 0.0], max: [length, wall] },
                ObstacleSpec::Rect { min: [0.0, width - wall], max: [length, width] },
            ],
            clutter: Some(ClutterSpec {
                region_min: [6.0, wall],
                region_max: [length - 4.0, width - wall],
                count: 8,
                boxes: default_boxes(),
                discs: default_discs(),
                disc_fraction: default_disc_fraction(),
                min_gap: 3.0,
                keep_out: vec![KeepOut { center: [2.0, 5.0], radius: 3.0 }, KeepOut { center: [38.0, 5.0], radius: 2.0 }],
                seed: None,
            }),
        },
        robot: RobotSpec { model: RobotModel::Unicycle, radius: 0.4, body_points: Vec::new() },
        initial_state: StateSpec { x: 2.0, y: 5.0, heading: 0.0 },
        lidar: LidarSpec { num_beams: 360, fov: std::f64::consts::TAU, max_range: 8.0, noise_sigma: 0.01 },
        map: MapSpec {
            mode: MapMode::EgoLocal,
            resolution: 0.1,
            size: Some([160, 160]),
            inflation_radius: 0.4,
            ..MapSpec::default()
        },
        shaping: ShapingSpec::default(),
        cbf: CbfSpec::default(),
        clf: ClfSpec { waypoints: vec![[38.0, 5.0]], switch_radius: 2.0, ..ClfSpec::default() },
        // speed tracking outweighs heading so the robot steers around clutter instead of stalling
        qp: QpSpec { w_v: 10.0, w_delta: 1.0, ..QpSpec::default() },
        v_desired: 2.0,
        dt: 0.05,
        duration: 60.0,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(corridor_scenario(1)).unwrap();
        v["map"]["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<Scenario>(v).is_err());
    }

    #[test]
    fn validator_lists_every_violation() {
        let mut s = corridor_scenario(1);
        s.duration = 0.0;
        s.cbf.l_a = 5.0;
        s.map.resolution = -1.0;
        match s.validate() {
            Err(NavError::Validation(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let s = corridor_scenario(3);
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn clutter_is_seeded_and_spaced() {
        let s = corridor_scenario(7);
        let a = s.obstacles();
        assert_eq!(a, s.obstacles());
        assert!(a.len() > 2);
        assert_ne!(a, corridor_scenario(8).obstacles());
        s.validate().unwrap();
    }

    #[test]
    fn step_count_rounds_up() {
        let mut s = corridor_scenario(0);
        s.duration = 1.0;
        s.dt = 0.3;
        assert_eq!(s.step_count(), 4);
        s.dt = 0.05;
        assert_eq!(s.step_count(), 20);
    }
}
