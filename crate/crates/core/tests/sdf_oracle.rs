use ogm_cbf_core::grid::GridGeometry;
use ogm_cbf_core::math::Vec2;
use ogm_cbf_core::ogm::BinaryGrid;
use ogm_cbf_core::sdf::{distance_transform, gradient_field, signed_distance_field, NO_SITE};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum over all cells of opposite occupancy, O(n^2).
fn brute_force_sdf(grid: &BinaryGrid) -> Vec<f64> {
    let g = grid.geometry;
    let sentinel = g.resolution * (g.width + g.height) as f64;
    (0..g.len())
        .map(|a| {
            let (ai, aj) = g.coords(a);
            let occ = grid.occupied[a];
            let best = (0..g.len())
                .filter(|&b| grid.occupied[b] != occ)
                .map(|b| {
                    let (bi, bj) = g.coords(b);
                    let (di, dj) = (ai as f64 - bi as f64, aj as f64 - bj as f64);
                    (di * di + dj * dj).sqrt() * g.resolution
                })
                .fold(f64::INFINITY, f64::min);
            let d = if best.is_finite() { best } else { sentinel };
            if occ {
                -d
            } else {
                d
            }
        })
        .collect()
}

fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64, res: f64) -> BinaryGrid {
    let g = GridGeometry::new(w, h, res, Vec2::new(1.0, -2.0));
    BinaryGrid::new(g, (0..w * h).map(|_| rng.random_bool(density)).collect())
}

#[test]
fn matches_brute_force_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..60 {
        let w = rng.random_range(1..=20);
        let h = rng.random_range(1..=20);
        let density = [0.05, 0.2, 0.5][seed % 3];
        let grid = random_grid(&mut rng, w, h, density, 0.1);
        let sdf = signed_distance_field(&grid);
        let oracle = brute_force_sdf(&grid);
        for (k, (a, b)) in sdf.values.iter().zip(&oracle).enumerate() {
            assert!((a - b).abs() <= 1e-9 * 0.1, "seed {seed} cell {k}: {a} vs {b}");
        }
    }
}

#[test]
fn nearest_site_realizes_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = random_grid(&mut rng, 17, 23, 0.2, 0.5);
    let sdf = signed_distance_field(&grid);
    let g = grid.geometry;
    for idx in 0..g.len() {
        let site = sdf.nearest[idx];
        assert_ne!(site, NO_SITE);
        assert_ne!(grid.occupied[site as usize], grid.occupied[idx]);
        let d = g.cell_center(g.coords(idx).0, g.coords(idx).1).distance({
            let (si, sj) = g.coords(site as usize);
            g.cell_center(si, sj)
        });
        assert!((d - sdf.values[idx].abs()).abs() < 1e-9);
    }
}

#[test]
fn unsigned_transform_matches_signed_on_free_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = random_grid(&mut rng, 12, 9, 0.1, 0.25);
    let d = distance_transform(&grid);
    let sdf = signed_distance_field(&grid);
    for idx in 0..d.len() {
        if grid.occupied[idx] {
            assert_eq!(d[idx], 0.0);
        } else {
            assert_eq!(d[idx], sdf.values[idx]);
        }
    }
}

#[test]
fn eikonal_far_from_obstacles_single_disc() {
    // one convex obstacle: no cut locus in the free space
    let n = 64;
    let g = GridGeometry::new(n, n, 0.1, Vec2::ZERO);
    let c = Vec2::new(3.2, 3.2);
    let occupied = (0..g.len())
        .map(|k| {
            let (i, j) = g.coords(k);
            g.cell_center(i, j).distance(c) < 0.8
        })
        .collect();
    let grid = BinaryGrid::new(g, occupied);
    let sdf = signed_distance_field(&grid);
    let grad = gradient_field(&sdf).unwrap();
    let mut checked = 0;
    let mut good = 0;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            if sdf.get(i, j) >= 0.2 {
                checked += 1;
                let m = grad.norm(i, j);
                if (0.9..=1.1).contains(&m) {
                    good += 1;
                }
            }
        }
    }
    assert!(good as f64 >= 0.9 * checked as f64, "{good}/{checked}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sign_partition_and_transpose_symmetry(seed in 0u64..10_000, w in 1usize..14, h in 1usize..14, density in 0.0f64..0.7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, w, h, density, 0.3);
        let sdf = signed_distance_field(&grid);
        for (idx, &v) in sdf.values.iter().enumerate() {
            prop_assert_eq!(v > 0.0, !grid.occupied[idx]);
            prop_assert_eq!(v < 0.0, grid.occupied[idx]);
        }
        let t = signed_distance_field(&grid.transposed());
        prop_assert_eq!(t.values, sdf.transposed().values);
    }
}
