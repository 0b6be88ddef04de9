//! The closed loop: sense, map, build the barrier field, solve the QP, move.
//!
//! [`Episode`] runs one scenario step by step and reports each pipeline stage
//! to a [`StageObserver`], which is how the tests check the stage order and how
//! `bench` collects its timings.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use ogm_cbf_core::controller::{control_step, ControlStatus, ControllerConfig};
use ogm_cbf_core::math::{wrap_angle, Vec2};
use ogm_cbf_core::ogm::{binarize_with, inflate, BinaryGrid, OccupancyGrid, ScanFootprint, SensorModel};
use ogm_cbf_core::sdf::{signed_distance_field, SdfField};
use ogm_cbf_core::shaping::{ShapedField, ShapingParams};
use ogm_cbf_core::sim::{raycast_scan, step_bicycle, step_unicycle, LidarConfig, RobotState, SimError, World};
use rayon::prelude::*;

use crate::error::NavError;
use crate::scenario::{MapMode, RobotModel, Scenario};

/// Pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Scan,
    MapUpdate,
    Binarize,
    Inflate,
    Sdf,
    Shaping,
    Control,
    Integrate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Scan,
        Stage::MapUpdate,
        Stage::Binarize,
        Stage::Inflate,
        Stage::Sdf,
        Stage::Shaping,
        Stage::Control,
        Stage::Integrate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Scan => "scan",
            Stage::MapUpdate => "map_update",
            Stage::Binarize => "binarize",
            Stage::Inflate => "inflate",
            Stage::Sdf => "sdf",
            Stage::Shaping => "shaping",
            Stage::Control => "qp",
            Stage::Integrate => "integrate",
        }
    }
}

pub trait StageObserver {
    fn on_stage(&mut self, step: usize, stage: Stage, elapsed: Duration);
}

impl StageObserver for () {
    fn on_stage(&mut self, _: usize, _: Stage, _: Duration) {}
}

/// Records the order in which stages ran.
#[derive(Clone, Debug, Default)]
pub struct StageTrace {
    pub events: Vec<(usize, Stage)>,
}

impl StageObserver for StageTrace {
    fn on_stage(&mut self, step: usize, stage: Stage, _: Duration) {
        self.events.push((step, stage));
    }
}

/// Accumulated time per stage.
#[derive(Clone, Debug, Default)]
pub struct StageTimer {
    pub total: [Duration; 8],
    pub count: [usize; 8],
}

impl StageObserver for StageTimer {
    fn on_stage(&mut self, _: usize, stage: Stage, elapsed: Duration) {
        self.total[stage as usize] += elapsed;
        self.count[stage as usize] += 1;
    }
}

impl StageTimer {
    pub fn mean(&self, stage: Stage) -> Duration {
        let n = self.count[stage as usize];
        if n == 0 {
            Duration::ZERO
        } else {
            self.total[stage as usize] / n as u32
        }
    }

    /// Total time of every stage except the kinematic step.
    pub fn pipeline_total(&self) -> Duration {
        Stage::ALL.iter().filter(|&&s| s != Stage::Integrate).map(|&s| self.total[s as usize]).sum()
    }
}

/// Everything derived from the map at one rebuild.
#[derive(Clone, Debug)]
pub struct FieldSnapshot {
    pub step: usize,
    pub pose: RobotState,
    pub map: OccupancyGrid,
    pub binary: BinaryGrid,
    pub inflated: BinaryGrid,
    pub sdf: SdfField,
    pub field: ShapedField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Duration,
    Collision { step: usize },
    OutOfExtent { step: usize },
    GoalReached { step: usize },
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Duration => write!(f, "duration"),
            Termination::Collision { step } => write!(f, "collision@{step}"),
            Termination::OutOfExtent { step } => write!(f, "out_of_extent@{step}"),
            Termination::GoalReached { step } => write!(f, "goal@{step}"),
        }
    }
}

pub fn status_name(status: ControlStatus) -> &'static str {
    match status {
        ControlStatus::Optimal => "optimal",
        ControlStatus::CbfInfeasibleFallback => "cbf_infeasible_fallback",
        ControlStatus::OutOfExtent => "out_of_extent",
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v_cmd: f64,
    pub omega_cmd: f64,
    pub h: f64,
    pub hdot_plus_alpha_h: f64,
    pub delta: f64,
    pub qp_status: ControlStatus,
    /// Ground-truth clearance of the robot disc.
    pub phi_gt: f64,
    pub collision: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
    pub termination: Termination,
    pub final_state: RobotState,
}

impl TrajectoryLog {
    pub const HEADER: &'static str = "t,x,y,theta,v_cmd,omega_cmd,h,hdot_plus_alpha_h,delta,qp_status,phi_gt,collision";

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.x,
                r.y,
                r.theta,
                r.v_cmd,
                r.omega_cmd,
                r.h,
                r.hdot_plus_alpha_h,
                r.delta,
                status_name(r.qp_status),
                r.phi_gt,
                u8::from(r.collision)
            )?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), NavError> {
        let file = std::fs::File::create(path).map_err(NavError::io(path))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(NavError::io(path))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub min_phi_over_path: f64,
    pub min_h: f64,
    /// Barrier value at the last logged step.
    pub final_h: f64,
    pub collision: bool,
    pub mean_step_time: f64,
    pub max_step_time: f64,
    /// Rebuilds per second of map pipeline time.
    pub map_update_hz: f64,
    pub path_length: f64,
    pub heading_error: f64,
    pub steps: usize,
    pub termination: Termination,
}

/// One scenario in progress.
pub struct Episode {
    scenario: Scenario,
    world: World,
    lidar: LidarConfig,
    sensor: SensorModel,
    shaping: ShapingParams,
    config: ControllerConfig,
    state: RobotState,
    map: OccupancyGrid,
    snapshot: Option<FieldSnapshot>,
    footprint: Option<ScanFootprint>,
    step: usize,
    total_steps: usize,
    waypoint: usize,
    rows: Vec<LogRow>,
    path_length: f64,
    control_times: Vec<Duration>,
    map_time: Duration,
    map_updates: usize,
    final_phi: Option<f64>,
    done: Option<Termination>,
}

impl Episode {
    pub fn new(scenario: &Scenario) -> Result<Self, NavError> {
        scenario.validate()?;
        let world = scenario.build_world()?;
        let sensor = scenario.sensor_model();
        let map = OccupancyGrid::new(scenario.initial_map_geometry(), sensor.l_prior)?;
        Ok(Self {
            world,
            lidar: scenario.lidar_config(),
            sensor,
            shaping: scenario.shaping_params(),
            config: scenario.controller_config(),
            state: scenario.initial_robot_state(),
            map,
            snapshot: None,
            footprint: None,
            step: 0,
            total_steps: scenario.step_count(),
            waypoint: 0,
            rows: Vec::new(),
            path_length: 0.0,
            control_times: Vec::new(),
            map_time: Duration::ZERO,
            map_updates: 0,
            final_phi: None,
            done: None,
            scenario: scenario.clone(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn state(&self) -> RobotState {
        self.state
    }

    /// Index of the next step to run.
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn map(&self) -> &OccupancyGrid {
        &self.map
    }

    pub fn snapshot(&self) -> Option<&FieldSnapshot> {
        self.snapshot.as_ref()
    }

    /// Cells touched by the scan of the last step, if that step rebuilt the map.
    pub fn footprint(&self) -> Option<&ScanFootprint> {
        self.footprint.as_ref()
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    pub fn termination(&self) -> Option<Termination> {
        self.done
    }

    pub fn controller_config(&self) -> &ControllerConfig {
        &self.config
    }

    fn clearance(&self, state: &RobotState) -> f64 {
        self.world.clearance(state.position) - self.scenario.robot.radius
    }

    /// Advances the waypoint index; false once the last waypoint is reached.
    fn update_target(&mut self) -> bool {
        let wps = &self.scenario.clf.waypoints;
        if wps.is_empty() {
            return true;
        }
        while self.waypoint < wps.len() {
            let wp = Vec2::new(wps[self.waypoint][0], wps[self.waypoint][1]);
            if wp.distance(self.state.position) > self.scenario.clf.switch_radius {
                self.config.clf.target_heading = (wp - self.state.position).angle();
                return true;
            }
            self.waypoint += 1;
        }
        false
    }

    fn rebuild_field(&mut self, obs: &mut dyn StageObserver) -> Result<bool, NavError> {
        let step = self.step;
        let started = Instant::now();
        let t = Instant::now();
        let seed = self.scenario.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(step as u64);
        let scan = match raycast_scan(&self.world, &self.state, &self.lidar, seed) {
            Ok(scan) => scan,
            Err(SimError::OutsideBounds { .. }) => return Ok(false),
            Err(e) => return Err(e.into()),
        };
        obs.on_stage(step, Stage::Scan, t.elapsed());

        let t = Instant::now();
        if self.scenario.map.mode == MapMode::EgoLocal {
            self.map = self.map.recentered(self.state.position);
        }
        let footprint = match self.map.integrate_scan(&scan, &self.sensor) {
            Ok(fp) => fp,
            Err(ogm_cbf_core::ogm::OgmError::PoseOutsideMap { .. }) => return Ok(false),
            Err(e) => return Err(e.into()),
        };
        obs.on_stage(step, Stage::MapUpdate, t.elapsed());

        let t = Instant::now();
        let binary = binarize_with(&self.map, self.scenario.map.threshold, self.scenario.map.unknown_as_occupied);
        obs.on_stage(step, Stage::Binarize, t.elapsed());

        let t = Instant::now();
        let inflated = inflate(&binary, self.scenario.map.inflation_radius);
        obs.on_stage(step, Stage::Inflate, t.elapsed());

        let t = Instant::now();
        let sdf = signed_distance_field(&inflated);
        obs.on_stage(step, Stage::Sdf, t.elapsed());

        let t = Instant::now();
        let field = if self.scenario.map.half_plane {
            ShapedField::new_half_plane(&sdf, &self.shaping, &self.state)?
        } else {
            ShapedField::new(&sdf, &self.shaping)?
        };
        obs.on_stage(step, Stage::Shaping, t.elapsed());

        self.map_time += started.elapsed();
        self.map_updates += 1;
        self.footprint = Some(footprint);
        self.snapshot = Some(FieldSnapshot { step, pose: self.state, map: self.map.clone(), binary, inflated, sdf, field });
        Ok(true)
    }

    /// Runs one control period. Returns false once the episode has ended.
    pub fn step(&mut self, obs: &mut dyn StageObserver) -> Result<bool, NavError> {
        if self.done.is_some() {
            return Ok(false);
        }
        if self.step >= self.total_steps {
            self.finish(Termination::Duration);
            return Ok(false);
        }
        if !self.update_target() {
            self.finish(Termination::GoalReached { step: self.step });
            return Ok(false);
        }
        self.footprint = None;
        if self.step.is_multiple_of(self.scenario.map.map_every_n) && !self.rebuild_field(obs)? {
            self.finish(Termination::OutOfExtent { step: self.step });
            return Ok(false);
        }
        let field = &self.snapshot.as_ref().expect("field built on step 0").field;

        let t = Instant::now();
        let out = control_step(&self.state, field, &self.config)?;
        let elapsed = t.elapsed();
        obs.on_stage(self.step, Stage::Control, elapsed);
        self.control_times.push(elapsed);

        let phi_gt = self.clearance(&self.state);
        let collision = phi_gt <= 0.0;
        let d = out.diagnostics;
        self.rows.push(LogRow {
            t: self.step as f64 * self.scenario.dt,
            x: self.state.position.x,
            y: self.state.position.y,
            theta: self.state.heading,
            v_cmd: out.u.v,
            omega_cmd: out.u.omega,
            h: d.h,
            hdot_plus_alpha_h: d.hdot_plus_alpha_h,
            delta: d.delta,
            qp_status: d.status,
            phi_gt,
            collision,
        });
        if collision {
            self.finish(Termination::Collision { step: self.step });
            return Ok(false);
        }
        if d.status == ControlStatus::OutOfExtent {
            self.finish(Termination::OutOfExtent { step: self.step });
            return Ok(false);
        }

        let t = Instant::now();
        let next = match self.scenario.robot.model {
            RobotModel::Unicycle => step_unicycle(&self.state, out.u, self.scenario.dt),
            RobotModel::Bicycle { wheelbase } => step_bicycle(&self.state, out.u, self.scenario.dt, wheelbase),
        };
        obs.on_stage(self.step, Stage::Integrate, t.elapsed());
        self.path_length += next.position.distance(self.state.position);
        self.state = next;
        self.step += 1;

        let phi = self.clearance(&self.state);
        self.final_phi = Some(phi);
        if phi <= 0.0 {
            self.finish(Termination::Collision { step: self.step });
            return Ok(false);
        }
        Ok(true)
    }

    fn finish(&mut self, termination: Termination) {
        self.done = Some(termination);
    }

    pub fn run(&mut self, obs: &mut dyn StageObserver) -> Result<(), NavError> {
        while self.step(obs)? {}
        Ok(())
    }

    pub fn log(&self) -> TrajectoryLog {
        TrajectoryLog {
            rows: self.rows.clone(),
            termination: self.done.unwrap_or(Termination::Duration),
            final_state: self.state,
        }
    }

    pub fn metrics(&self) -> EpisodeMetrics {
        let phis = self.rows.iter().map(|r| r.phi_gt).chain(self.final_phi);
        let min_phi_over_path = phis.fold(f64::INFINITY, f64::min);
        let mut hs = self.rows.iter().map(|r| r.h).filter(|h| h.is_finite());
        let min_h = hs.clone().fold(f64::INFINITY, f64::min);
        let final_h = hs.next_back().unwrap_or(f64::NAN);
        let secs: Vec<f64> = self.control_times.iter().map(Duration::as_secs_f64).collect();
        let mean_step_time = if secs.is_empty() { 0.0 } else { secs.iter().sum::<f64>() / secs.len() as f64 };
        let max_step_time = secs.iter().copied().fold(0.0, f64::max);
        let map_secs = self.map_time.as_secs_f64();
        EpisodeMetrics {
            min_phi_over_path,
            min_h,
            final_h,
            collision: min_phi_over_path <= 0.0,
            mean_step_time,
            max_step_time,
            map_update_hz: if map_secs > 0.0 { self.map_updates as f64 / map_secs } else { 0.0 },
            path_length: self.path_length,
            heading_error: wrap_angle(self.config.clf.target_heading - self.state.heading),
            steps: self.rows.len(),
            termination: self.done.unwrap_or(Termination::Duration),
        }
    }
}

/// Runs a scenario to completion.
pub fn run_episode(scenario: &Scenario) -> Result<(TrajectoryLog, EpisodeMetrics), NavError> {
    run_episode_observed(scenario, &mut ())
}

pub fn run_episode_observed(scenario: &Scenario, obs: &mut dyn StageObserver) -> Result<(TrajectoryLog, EpisodeMetrics), NavError> {
    let mut episode = Episode::new(scenario)?;
    episode.run(obs)?;
    Ok((episode.log(), episode.metrics()))
}

#[derive(Clone, Debug)]
pub struct BatchRow {
    pub name: String,
    pub result: Result<EpisodeMetrics, String>,
}

#[derive(Clone, Debug, Default)]
pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
}

impl BatchSummary {
    pub const HEADER: &'static str = "name,status,collision,min_phi_over_path,min_h,final_h,mean_step_time,max_step_time,map_update_hz,path_length,heading_error,steps,termination,error";

    pub fn collisions(&self) -> usize {
        self.rows.iter().filter(|r| matches!(&r.result, Ok(m) if m.collision)).count()
    }

    pub fn errors(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }

    /// 1 if any episode collided, 2 if some episode failed to run, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.collisions() > 0 {
            1
        } else if self.errors() > 0 {
            2
        } else {
            0
        }
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for row in &self.rows {
            match &row.result {
                Ok(m) => writeln!(
                    out,
                    "{},ok,{},{},{},{},{},{},{},{},{},{},{},",
                    csv_field(&row.name),
                    u8::from(m.collision),
                    m.min_phi_over_path,
                    m.min_h,
                    m.final_h,
                    m.mean_step_time,
                    m.max_step_time,
                    m.map_update_hz,
                    m.path_length,
                    m.heading_error,
                    m.steps,
                    m.termination
                )?,
                Err(e) => writeln!(out, "{},error,,,,,,,,,,,,{}", csv_field(&row.name), csv_field(e))?,
            }
        }
        out.flush()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs scenarios in parallel; `jobs == 0` uses every core. A scenario that
/// fails to load or run becomes an error row and does not stop the others.
pub fn run_batch(items: Vec<(String, Result<Scenario, NavError>)>, jobs: usize) -> BatchSummary {
    let run_one = |(name, scenario): (String, Result<Scenario, NavError>)| {
        let result = scenario.and_then(|s| run_episode(&s)).map(|(_, m)| m).map_err(|e| e.to_string());
        BatchRow { name, result }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    let rows = pool.install(|| items.into_par_iter().map(run_one).collect());
    BatchSummary { rows }
}
