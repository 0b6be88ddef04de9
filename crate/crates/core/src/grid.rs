//! Geometry shared by every grid-valued stage.
//!
//! Cell `(i, j)` covers `[origin.x + i*res, origin.x + (i+1)*res) x [origin.y + j*res, ...)`,
//! `i` runs along +x and `j` along +y. Storage is row-major: `index = j * width + i`.

use crate::math::Vec2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    /// World position of the lower-left corner of cell `(0, 0)`.
    pub origin: Vec2,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Vec2) -> Self {
        Self { width, height, resolution, origin }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Continuous cell coordinates (not floored) of a world point.
    pub fn to_cell_coords(&self, p: Vec2) -> Vec2 {
        Vec2::new((p.x - self.origin.x) / self.resolution, (p.y - self.origin.y) / self.resolution)
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let c = self.to_cell_coords(p);
        let (fi, fj) = (libm::floor(c.x), libm::floor(c.y));
        if fi < 0.0 || fj < 0.0 || fi >= self.width as f64 || fj >= self.height as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.cell_of(p).is_some()
    }

    /// Upper-right corner of the grid extent.
    pub fn max_corner(&self) -> Vec2 {
        Vec2::new(
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        )
    }

    pub fn transposed(&self) -> Self {
        Self::new(self.height, self.width, self.resolution, Vec2::new(self.origin.y, self.origin.x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_lookup_round_trips() {
        let g = GridGeometry::new(10, 5, 0.1, Vec2::new(-0.5, 2.0));
        for j in 0..5 {
            for i in 0..10 {
                assert_eq!(g.cell_of(g.cell_center(i, j)), Some((i, j)));
                assert_eq!(g.coords(g.index(i, j)), (i, j));
            }
        }
        assert_eq!(g.cell_of(Vec2::new(-0.51, 2.1)), None);
        assert_eq!(g.cell_of(Vec2::new(0.0, 2.5 + 1e-9)), None);
    }
}
