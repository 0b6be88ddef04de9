use std::fs;
use std::path::Path;

use ogm_cbf::io::{
    read_binary_grid, read_field_csv, read_field_pgm16, read_occupancy_pgm, write_field_pgm16, write_occupancy_pgm, FREE,
};
use ogm_cbf::scenario::{corridor_scenario, ClfSpec, LidarSpec, MapMode, MapSpec, ObstacleSpec, RobotSpec, StateSpec, WorldSpec};
use ogm_cbf::{export_fields, Episode, NavError, Scenario};
use ogm_cbf_core::grid::GridGeometry;
use ogm_cbf_core::math::Vec2;
use ogm_cbf_core::ogm::BinaryGrid;
use ogm_cbf_core::sdf::sentinel_distance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disc_world(obstacles: Vec<ObstacleSpec>) -> Scenario {
    Scenario {
        name: "disc".into(),
        world: WorldSpec { min: [0.0, 0.0], max: [10.0, 10.0], obstacles, clutter: None },
        robot: RobotSpec { radius: 0.3, ..RobotSpec::default() },
        initial_state: StateSpec { x: 2.0, y: 5.0, heading: 0.0 },
        lidar: LidarSpec { num_beams: 720, max_range: 8.0, ..LidarSpec::default() },
        map: MapSpec { mode: MapMode::Global, resolution: 0.05, inflation_radius: 0.3, ..MapSpec::default() },
        shaping: Default::default(),
        cbf: Default::default(),
        clf: ClfSpec { target_heading: 0.0, ..ClfSpec::default() },
        qp: Default::default(),
        v_desired: 1.0,
        dt: 0.05,
        duration: 2.0,
        seed: 3,
    }
}

#[test]
fn pgm_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 0..10 {
        let g = GridGeometry::new(rng.random_range(1..50), rng.random_range(1..50), 0.05 * (n + 1) as f64, Vec2::new(-1.3, 2.7));
        let grid = BinaryGrid::new(g, (0..g.len()).map(|_| rng.random_bool(0.3)).collect());
        let path = dir.path().join(format!("g{n}.pgm"));
        write_occupancy_pgm(&path, &grid, None).unwrap();
        let back = read_binary_grid(&path).unwrap();
        assert_eq!(back.geometry, g);
        assert_eq!(back.occupied, grid.occupied);
        let again = dir.path().join(format!("h{n}.pgm"));
        write_occupancy_pgm(&again, &back, None).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }
}

#[test]
fn exported_grid_reimports_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let s = corridor_scenario(7);
    export_fields(&s, 25, dir.path()).unwrap();
    let mut episode = Episode::new(&s).unwrap();
    for _ in 0..=25 {
        episode.step(&mut ()).unwrap();
    }
    let snap = episode.snapshot().unwrap();
    let back = read_binary_grid(&dir.path().join("occupancy.pgm")).unwrap();
    assert_eq!(back.geometry, snap.binary.geometry);
    assert_eq!(back.occupied, snap.binary.occupied);
    assert!(back.occupied.iter().any(|&o| o));
    let inflated = read_binary_grid(&dir.path().join("inflated.pgm")).unwrap();
    assert_eq!(inflated.occupied, snap.inflated.occupied);

    let (g, phi) = read_field_csv(&dir.path().join("phi.csv")).unwrap();
    assert_eq!(g, snap.sdf.geometry);
    assert_eq!(phi, snap.sdf.values);
    let (_, nodes) = read_field_csv(&dir.path().join("phi_s.csv")).unwrap();
    assert_eq!(nodes, snap.field.nodes);
    let (_, approx) = read_field_pgm16(&dir.path().join("phi_s.pgm")).unwrap();
    let span = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max) - nodes.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(approx.iter().zip(&nodes).all(|(a, b)| (a - b).abs() <= span / 65535.0));

    let svg = fs::read_to_string(dir.path().join("quiver.svg")).unwrap();
    assert!(svg.contains(r#"stroke="orange""#));
}

#[test]
fn empty_world_at_step_zero() {
    let dir = tempfile::tempdir().unwrap();
    let s = disc_world(Vec::new());
    let files = export_fields(&s, 0, dir.path()).unwrap();
    assert!(files.iter().all(|p| p.exists()));
    let (g, codes) = read_occupancy_pgm(&dir.path().join("occupancy.pgm")).unwrap();
    assert!(codes.iter().all(|&c| c == FREE));
    let (_, phi) = read_field_csv(&dir.path().join("phi.csv")).unwrap();
    let sentinel = sentinel_distance(&g);
    assert!(phi.iter().all(|&d| d == sentinel));
}

/// Arrows of the quiver plot in world coordinates as (tail, direction).
fn quiver_arrows(svg: &str, g: &GridGeometry) -> Vec<(Vec2, Vec2)> {
    let height = g.height as f64 * g.resolution * 10.0;
    let attr = |line: &str, key: &str| -> f64 {
        let start = line.find(&format!(" {key}=\"")).unwrap() + key.len() + 3;
        let end = start + line[start..].find('"').unwrap();
        line[start..end].parse().unwrap()
    };
    let world = |sx: f64, sy: f64| Vec2::new(g.origin.x + sx / 10.0, g.origin.y + (height - sy) / 10.0);
    svg.lines()
        .filter(|l| l.starts_with("<line"))
        .map(|l| {
            let tail = world(attr(l, "x1"), attr(l, "y1"));
            let tip = world(attr(l, "x2"), attr(l, "y2"));
            (tail, tip - tail)
        })
        .collect()
}

#[test]
fn quiver_points_away_from_single_obstacle() {
    let dir = tempfile::tempdir().unwrap();
    let center = Vec2::new(6.0, 5.0);
    let radius = 1.0;
    let s = disc_world(vec![ObstacleSpec::Circle { center: [center.x, center.y], radius }]);
    export_fields(&s, 0, dir.path()).unwrap();
    let (g, _) = read_occupancy_pgm(&dir.path().join("occupancy.pgm")).unwrap();
    let svg = fs::read_to_string(dir.path().join("quiver.svg")).unwrap();

    // the side of the disc facing the robot is what the scan has seen
    let mut checked = 0;
    for (tail, dir) in quiver_arrows(&svg, &g) {
        let out = tail - center;
        let dist = out.norm();
        let facing = out.x < 0.0 && out.y.abs() < 0.6 * out.x.abs();
        if !facing || dist < radius + 0.5 || dist > radius + 2.5 {
            continue;
        }
        let cos = out.dot(dir) / (dist * dir.norm());
        assert!(cos > 0.97, "arrow at {tail:?} is off radial (cos {cos})");
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} arrows checked");
}

#[test]
fn export_past_the_episode_end_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = disc_world(Vec::new());
    let err = export_fields(&s, 10_000, dir.path()).unwrap_err();
    assert!(matches!(err, NavError::StepNotReached { requested: 10_000, .. }));
}

#[test]
fn io_errors_name_the_path() {
    let missing = Path::new("/nonexistent/dir/map.pgm");
    let err = read_binary_grid(missing).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/map.pgm"), "{err}");
    let g = GridGeometry::new(3, 3, 0.1, Vec2::new(0.0, 0.0));
    assert!(write_field_pgm16(missing, &g, &[0.0; 9]).is_err());
}
