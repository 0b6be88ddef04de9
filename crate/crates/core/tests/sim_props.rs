use ogm_cbf_core::math::Vec2;
use ogm_cbf_core::sim::{raycast_scan, step_bicycle, step_unicycle, Aabb, ControlInput, LidarConfig, Obstacle, RobotState, World};
use proptest::prelude::*;
use std::f64::consts::PI;

fn bounds() -> Aabb {
    Aabb::new(Vec2::new(-20.0, -20.0), Vec2::new(20.0, 20.0))
}

/// First sample along the beam that lies inside the obstacle.
fn marched_range(obstacle: &Obstacle, origin: Vec2, dir: Vec2, max_range: f64, step: f64) -> f64 {
    let mut t = 0.0;
    while t < max_range {
        if obstacle.signed_distance(origin + dir * t) <= 0.0 {
            return t;
        }
        t += step;
    }
    max_range
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn raycast_matches_dense_sampling_for_convex_obstacles(
        cx in -8.0f64..8.0, cy in -8.0f64..8.0, size in 0.3f64..3.0, yaw in -PI..PI, circle in any::<bool>(), heading in -PI..PI,
    ) {
        let center = Vec2::new(cx, cy);
        prop_assume!(center.norm() > size * 1.5);
        let obstacle = if circle {
            Obstacle::Circle { center, radius: size }
        } else {
            Obstacle::oriented_rect(center, 2.0 * size, size, yaw)
        };
        let world = World::new(bounds(), vec![obstacle.clone()]).unwrap();
        let cfg = LidarConfig { num_beams: 36, max_range: 15.0, ..LidarConfig::default() };
        let state = RobotState::new(0.0, 0.0, heading);
        let scan = raycast_scan(&world, &state, &cfg, 0).unwrap();
        let step = 1e-3;
        for (b, &range) in scan.ranges.iter().enumerate() {
            let dir = Vec2::from_angle(heading + scan.beam_angles[b]);
            let marched = marched_range(&obstacle, state.position, dir, cfg.max_range, step);
            prop_assert!(range > 0.0 && range <= cfg.max_range);
            if marched < cfg.max_range && range < cfg.max_range {
                prop_assert!(range <= marched + 1e-12 && marched - range <= step + 1e-9, "beam {} {} vs {}", b, range, marched);
            }
        }
    }

    #[test]
    fn heading_stays_normalized(h in -10.0f64..10.0, v in -3.0f64..3.0, w in -5.0f64..5.0, dt in 1e-3f64..1.0) {
        let s = RobotState::new(1.0, 2.0, h);
        prop_assert!(s.heading > -PI && s.heading <= PI);
        let u = ControlInput::new(v, w);
        for next in [step_unicycle(&s, u, dt), step_bicycle(&s, u, dt, 2.5)] {
            prop_assert!(next.heading > -PI && next.heading <= PI);
        }
        prop_assert_eq!(step_unicycle(&s, ControlInput::ZERO, dt), s);
    }
}
