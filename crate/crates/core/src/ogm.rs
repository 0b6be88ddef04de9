//! Log-odds occupancy grid mapping, binarization and robot-size inflation.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::GridGeometry;
use crate::math::Vec2;
use crate::sdf;
use crate::sim::RangeScan;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OgmError {
    #[error("scan pose ({x}, {y}) lies outside the map extent")]
    PoseOutsideMap { x: f64, y: f64 },
    #[error("invalid sensor model: {0}")]
    InvalidModel(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
}

/// Additive inverse sensor model in log-odds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorModel {
    /// Increment for the cell containing a beam endpoint.
    pub l_occ: f64,
    /// Increment (negative) for cells a beam passes through.
    pub l_free: f64,
    /// Initial value of every cell.
    pub l_prior: f64,
    pub l_min: f64,
    pub l_max: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { l_occ: 0.85, l_free: -0.4, l_prior: 0.0, l_min: -5.0, l_max: 5.0 }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), OgmError> {
        if !(self.l_occ > 0.0 && self.l_free < 0.0) {
            return Err(OgmError::InvalidModel("requires l_occ > 0 > l_free"));
        }
        if !(self.l_min < self.l_max) {
            return Err(OgmError::InvalidModel("requires l_min < l_max"));
        }
        if !(self.l_prior >= self.l_min && self.l_prior <= self.l_max) {
            return Err(OgmError::InvalidModel("l_prior must lie within [l_min, l_max]"));
        }
        Ok(())
    }
}

/// Cells touched by one scan integration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScanFootprint {
    /// Cells that received the free update.
    pub free: Vec<usize>,
    /// Cells that received the occupied update.
    pub hit: Vec<usize>,
}

impl ScanFootprint {
    pub fn touched(&self) -> impl Iterator<Item = usize> + '_ {
        self.free.iter().chain(self.hit.iter()).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub geometry: GridGeometry,
    pub log_odds: Vec<f64>,
    /// Value of a never-updated cell.
    pub prior: f64,
}

const MARK_FREE: u8 = 1;
const MARK_HIT: u8 = 2;

impl OccupancyGrid {
    pub fn new(geometry: GridGeometry, prior: f64) -> Result<Self, OgmError> {
        if geometry.is_empty() {
            return Err(OgmError::InvalidGrid("grid must have at least one cell"));
        }
        if !(geometry.resolution > 0.0 && geometry.resolution.is_finite()) {
            return Err(OgmError::InvalidGrid("resolution must be positive"));
        }
        Ok(Self { geometry, log_odds: vec![prior; geometry.len()], prior })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.log_odds[self.geometry.index(i, j)]
    }

    /// Integrates one scan in place.
    ///
    /// Within a single scan every cell is updated at most once and a hit takes
    /// precedence over a pass-through, so grazing beams cannot erase a freshly
    /// observed surface.
    pub fn integrate_scan(&mut self, scan: &RangeScan, model: &SensorModel) -> Result<ScanFootprint, OgmError> {
        model.validate()?;
        let geom = self.geometry;
        let origin = scan.pose.position;
        if !geom.contains(origin) {
            return Err(OgmError::PoseOutsideMap { x: origin.x, y: origin.y });
        }
        let mut marks = vec![0u8; geom.len()];
        let mut touched = Vec::new();
        for beam in 0..scan.ranges.len() {
            let end = scan.endpoint(beam);
            traverse(&geom, origin, end, |idx| {
                if marks[idx] == 0 {
                    marks[idx] = MARK_FREE;
                    touched.push(idx);
                }
            });
            if scan.is_hit(beam) {
                if let Some((i, j)) = geom.cell_of(end) {
                    let idx = geom.index(i, j);
                    if marks[idx] == 0 {
                        touched.push(idx);
                    }
                    marks[idx] = MARK_HIT;
                }
            }
        }
        let mut footprint = ScanFootprint::default();
        for idx in touched {
            let delta = if marks[idx] == MARK_HIT {
                footprint.hit.push(idx);
                model.l_occ
            } else {
                footprint.free.push(idx);
                model.l_free
            };
            self.log_odds[idx] = (self.log_odds[idx] + delta).clamp(model.l_min, model.l_max);
        }
        Ok(footprint)
    }

    /// Shifts the window by whole cells so `center` falls in the middle cell.
    /// Overlapping cells keep their belief; newly exposed cells get the prior.
    pub fn recentered(&self, center: Vec2) -> OccupancyGrid {
        let g = self.geometry;
        let half = Vec2::new(0.5 * g.width as f64, 0.5 * g.height as f64);
        let c = g.to_cell_coords(center);
        let di = libm::floor(c.x - half.x + 0.5) as i64;
        let dj = libm::floor(c.y - half.y + 0.5) as i64;
        let origin = Vec2::new(g.origin.x + di as f64 * g.resolution, g.origin.y + dj as f64 * g.resolution);
        let geometry = GridGeometry { origin, ..g };
        let mut log_odds = vec![self.prior; g.len()];
        let (w, h) = (g.width as i64, g.height as i64);
        for j in 0..h {
            let sj = j + dj;
            if sj < 0 || sj >= h {
                continue;
            }
            for i in 0..w {
                let si = i + di;
                if si < 0 || si >= w {
                    continue;
                }
                log_odds[(j * w + i) as usize] = self.log_odds[(sj * w + si) as usize];
            }
        }
        OccupancyGrid { geometry, log_odds, prior: self.prior }
    }
}

/// Visits every cell crossed by the segment `start -> end`, from the start cell
/// up to but excluding the end cell, stopping at the grid border.
pub fn traverse(geom: &GridGeometry, start: Vec2, end: Vec2, mut visit: impl FnMut(usize)) {
    let s = geom.to_cell_coords(start);
    let e = geom.to_cell_coords(end);
    let (mut i, mut j) = (libm::floor(s.x) as i64, libm::floor(s.y) as i64);
    let (ei, ej) = (libm::floor(e.x) as i64, libm::floor(e.y) as i64);
    let (dx, dy) = (e.x - s.x, e.y - s.y);
    let step_i = if dx > 0.0 { 1 } else { -1 };
    let step_j = if dy > 0.0 { 1 } else { -1 };
    let mut t_max_x = if dx > 0.0 {
        (i as f64 + 1.0 - s.x) / dx
    } else if dx < 0.0 {
        (s.x - i as f64) / -dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (j as f64 + 1.0 - s.y) / dy
    } else if dy < 0.0 {
        (s.y - j as f64) / -dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let steps = (ei - i).abs() + (ej - j).abs();
    let (w, h) = (geom.width as i64, geom.height as i64);
    for _ in 0..steps {
        if i < 0 || j < 0 || i >= w || j >= h {
            return;
        }
        visit((j * w + i) as usize);
        if t_max_x < t_max_y {
            i += step_i;
            t_max_x += t_delta_x;
        } else {
            j += step_j;
            t_max_y += t_delta_y;
        }
    }
}

/// Functional form of [`OccupancyGrid::integrate_scan`].
pub fn update_from_scan(map: &OccupancyGrid, scan: &RangeScan, model: &SensorModel) -> Result<OccupancyGrid, OgmError> {
    let mut next = map.clone();
    next.integrate_scan(scan, model)?;
    Ok(next)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryGrid {
    pub geometry: GridGeometry,
    pub occupied: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(geometry: GridGeometry, occupied: Vec<bool>) -> Self {
        assert_eq!(geometry.len(), occupied.len(), "cell count mismatch");
        Self { geometry, occupied }
    }

    pub fn free(geometry: GridGeometry) -> Self {
        Self::new(geometry, vec![false; geometry.len()])
    }

    pub fn is_occupied(&self, i: usize, j: usize) -> bool {
        self.occupied[self.geometry.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, occupied: bool) {
        let idx = self.geometry.index(i, j);
        self.occupied[idx] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn transposed(&self) -> Self {
        let g = self.geometry;
        let t = g.transposed();
        let mut occupied = vec![false; g.len()];
        for j in 0..g.height {
            for i in 0..g.width {
                occupied[t.index(j, i)] = self.occupied[g.index(i, j)];
            }
        }
        Self::new(t, occupied)
    }
}

/// Occupied iff `log_odds > threshold`; never-updated cells count as free.
pub fn binarize(map: &OccupancyGrid, threshold: f64) -> BinaryGrid {
    binarize_with(map, threshold, false)
}

/// Like [`binarize`], optionally treating never-updated cells as occupied.
pub fn binarize_with(map: &OccupancyGrid, threshold: f64, unknown_as_occupied: bool) -> BinaryGrid {
    let occupied = map
        .log_odds
        .iter()
        .map(|&l| l > threshold || (unknown_as_occupied && l == map.prior))
        .collect();
    BinaryGrid::new(map.geometry, occupied)
}

/// Marks every cell whose center lies within `radius` meters of an occupied cell center.
pub fn inflate(grid: &BinaryGrid, radius: f64) -> BinaryGrid {
    assert!(radius >= 0.0, "inflation radius must be non-negative");
    let g = grid.geometry;
    let r_cells = radius / g.resolution;
    // exact integer squared distances; the slack absorbs rounding in radius / resolution
    let limit = r_cells * r_cells + 1e-9;
    let d2 = sdf::squared_distance_transform(g.width, g.height, &grid.occupied);
    let occupied = d2.iter().map(|&d| d <= limit).collect();
    BinaryGrid::new(g, occupied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RobotState;

    fn geom(n: usize) -> GridGeometry {
        GridGeometry::new(n, n, 1.0, Vec2::ZERO)
    }

    fn scan_one(pose: RobotState, range: f64, max_range: f64) -> RangeScan {
        RangeScan { ranges: vec![range], beam_angles: vec![0.0], pose, max_range }
    }

    #[test]
    fn single_hit_updates() {
        let mut map = OccupancyGrid::new(geom(10), 0.0).unwrap();
        let scan = scan_one(RobotState::new(0.5, 0.5, 0.0), 5.0, 8.0);
        let fp = map.integrate_scan(&scan, &SensorModel::default()).unwrap();
        assert_eq!(map.get(5, 0), 0.85);
        for i in 0..5 {
            assert_eq!(map.get(i, 0), -0.4);
        }
        assert_eq!(map.get(6, 0), 0.0);
        assert_eq!(map.get(5, 1), 0.0);
        assert_eq!(fp.hit, vec![5]);
        assert_eq!(fp.free.len(), 5);
    }

    #[test]
    fn miss_only_frees() {
        let mut map = OccupancyGrid::new(geom(10), 0.0).unwrap();
        let scan = scan_one(RobotState::new(0.5, 0.5, 0.0), 4.0, 4.0);
        map.integrate_scan(&scan, &SensorModel::default()).unwrap();
        assert!(map.log_odds.iter().all(|&l| l <= 0.0));
        assert_eq!(map.get(3, 0), -0.4);
        assert_eq!(map.get(4, 0), 0.0);
    }

    #[test]
    fn repeated_hits_saturate() {
        let mut map = OccupancyGrid::new(geom(10), 0.0).unwrap();
        let scan = scan_one(RobotState::new(0.5, 0.5, 0.0), 5.0, 8.0);
        for _ in 0..20 {
            map.integrate_scan(&scan, &SensorModel::default()).unwrap();
        }
        assert_eq!(map.get(5, 0), 5.0);
        assert_eq!(map.get(0, 0), -5.0);
    }

    #[test]
    fn pose_outside_map_rejected() {
        let mut map = OccupancyGrid::new(geom(4), 0.0).unwrap();
        let scan = scan_one(RobotState::new(-0.5, 0.5, 0.0), 1.0, 2.0);
        assert!(matches!(map.integrate_scan(&scan, &SensorModel::default()), Err(OgmError::PoseOutsideMap { .. })));
    }

    #[test]
    fn diagonal_traversal_is_connected() {
        let g = geom(20);
        let mut cells = Vec::new();
        traverse(&g, Vec2::new(0.5, 0.5), Vec2::new(13.2, 7.9), |idx| cells.push(g.coords(idx)));
        assert_eq!(cells[0], (0, 0));
        for w in cells.windows(2) {
            let d = (w[1].0 as i64 - w[0].0 as i64).abs() + (w[1].1 as i64 - w[0].1 as i64).abs();
            assert_eq!(d, 1);
        }
        let last = *cells.last().unwrap();
        assert_eq!((last.0 as i64 - 13).abs() + (last.1 as i64 - 7).abs(), 1);
    }

    #[test]
    fn binarize_convention() {
        let mut map = OccupancyGrid::new(GridGeometry::new(3, 1, 1.0, Vec2::ZERO), 0.0).unwrap();
        map.log_odds = vec![0.85, 0.0, -0.4];
        assert_eq!(binarize(&map, 0.0).occupied, vec![true, false, false]);
        assert_eq!(binarize_with(&map, 0.0, true).occupied, vec![true, true, false]);
    }

    #[test]
    fn inflation_shapes() {
        let mut g = BinaryGrid::free(geom(5));
        g.set(2, 2, true);
        assert_eq!(inflate(&g, 0.0), g);
        let plus = inflate(&g, 1.0);
        assert_eq!(plus.occupied_count(), 5);
        assert!(plus.is_occupied(1, 2) && plus.is_occupied(2, 3) && !plus.is_occupied(1, 1));
        let block = inflate(&g, 1.5);
        assert_eq!(block.occupied_count(), 9);
        assert!(block.is_occupied(1, 1) && !block.is_occupied(0, 2));
        let free = BinaryGrid::free(geom(4));
        assert_eq!(inflate(&free, 2.0), free);
    }

    #[test]
    fn recentering_keeps_world_aligned_cells() {
        let mut map = OccupancyGrid::new(GridGeometry::new(10, 10, 0.5, Vec2::new(-2.5, -2.5)), 0.0).unwrap();
        let idx = map.geometry.index(7, 4);
        map.log_odds[idx] = 3.0;
        let world = map.geometry.cell_center(7, 4);
        let moved = map.recentered(Vec2::new(1.3, 0.2));
        let (i, j) = moved.geometry.cell_of(world).unwrap();
        assert_eq!(moved.get(i, j), 3.0);
        assert_eq!(moved.log_odds.iter().filter(|&&l| l == 3.0).count(), 1);
        let (ci, cj) = moved.geometry.cell_of(Vec2::new(1.3, 0.2)).unwrap();
        assert!((ci as i64 - 5).abs() <= 1 && (cj as i64 - 5).abs() <= 1);
    }
}
