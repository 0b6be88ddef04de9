//! Exact Euclidean signed distance transform over a binary grid.
//!
//! Uses the separable lower-envelope-of-parabolas transform: one pass down the
//! columns, one along the rows, linear time each. Squared distances are exact
//! integers in cell units, so the result is exact up to the final square root.
//! Distances are measured between cell centers.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::GridGeometry;
use crate::ogm::BinaryGrid;

/// Marker for "no nearest site" in [`SdfField::nearest`].
pub const NO_SITE: u32 = u32::MAX;

/// Upper bound on `|grad phi|` for central/one-sided differences of a
/// center-to-center field: each component is at most 2 (a one-sided step across
/// the sign change), so the norm is at most `2 * sqrt(2)`.
pub const GRADIENT_NORM_BOUND: f64 = 2.0 * core::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SdfError {
    #[error("gradient needs a grid of at least 2x2 cells, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
}

struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self { v: vec![0; n], z: vec![0.0; n + 1] }
    }

    /// `d[q] = min_p (q - p)^2 + f[p]` over finite `f[p]`, `arg[q]` the minimizing `p`.
    /// Leaves `d` at infinity and `arg` at `usize::MAX` when no `f` is finite.
    fn transform(&mut self, f: &[f64], d: &mut [f64], arg: &mut [usize]) {
        let n = f.len();
        let mut sites = (0..n).filter(|&q| f[q].is_finite());
        let Some(first) = sites.next() else {
            d.fill(f64::INFINITY);
            arg.fill(usize::MAX);
            return;
        };
        let parabola = |q: usize| f[q] + (q * q) as f64;
        let mut k = 0;
        self.v[0] = first;
        self.z[0] = f64::NEG_INFINITY;
        self.z[1] = f64::INFINITY;
        for q in sites {
            let mut s;
            loop {
                let p = self.v[k];
                s = (parabola(q) - parabola(p)) / (2.0 * (q as f64 - p as f64));
                if s <= self.z[k] {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            self.v[k] = q;
            self.z[k] = s;
            self.z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for q in 0..n {
            while self.z[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.v[k];
            let dq = q as f64 - p as f64;
            d[q] = dq * dq + f[p];
            arg[q] = p;
        }
    }
}

/// Squared center-to-center distance (in cells) from every cell to the nearest
/// site, together with that site's row-major index. Infinite / `usize::MAX`
/// everywhere when there are no sites.
pub fn squared_distance_transform_with_sites(width: usize, height: usize, sites: &[bool]) -> (Vec<f64>, Vec<usize>) {
    assert_eq!(width * height, sites.len(), "cell count mismatch");
    let n = width * height;
    let mut col_d = vec![0.0; n];
    let mut col_arg = vec![0usize; n];
    let mut env = Envelope::new(width.max(height));

    let mut f = vec![0.0; height];
    let mut d = vec![0.0; height];
    let mut arg = vec![0usize; height];
    for i in 0..width {
        for j in 0..height {
            f[j] = if sites[j * width + i] { 0.0 } else { f64::INFINITY };
        }
        env.transform(&f, &mut d, &mut arg);
        for j in 0..height {
            col_d[j * width + i] = d[j];
            col_arg[j * width + i] = arg[j];
        }
    }

    let mut out_d = vec![0.0; n];
    let mut out_site = vec![usize::MAX; n];
    let mut arg = vec![0usize; width];
    for j in 0..height {
        let row = j * width..(j + 1) * width;
        env.transform(&col_d[row.clone()], &mut out_d[row.clone()], &mut arg);
        for i in 0..width {
            let ci = arg[i];
            if ci != usize::MAX {
                out_site[j * width + i] = col_arg[j * width + ci] * width + ci;
            }
        }
    }
    (out_d, out_site)
}

pub fn squared_distance_transform(width: usize, height: usize, sites: &[bool]) -> Vec<f64> {
    squared_distance_transform_with_sites(width, height, sites).0
}

/// Finite stand-in for "no obstacle anywhere": `resolution * (width + height)`.
pub fn sentinel_distance(geometry: &GridGeometry) -> f64 {
    geometry.resolution * (geometry.width + geometry.height) as f64
}

/// Unsigned distance in meters from each cell center to the nearest occupied
/// cell center; [`sentinel_distance`] everywhere in a fully free grid.
pub fn distance_transform(grid: &BinaryGrid) -> Vec<f64> {
    let g = grid.geometry;
    let d2 = squared_distance_transform(g.width, g.height, &grid.occupied);
    let sentinel = sentinel_distance(&g);
    d2.iter()
        .map(|&d| if d.is_finite() { libm::sqrt(d) * g.resolution } else { sentinel })
        .collect()
}

/// Signed distance field, positive on free cells and negative on occupied ones.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfField {
    pub geometry: GridGeometry,
    /// Meters, row-major.
    pub values: Vec<f64>,
    /// Row-major index of the nearest cell of opposite occupancy, or [`NO_SITE`].
    pub nearest: Vec<u32>,
}

impl SdfField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.geometry.index(i, j)]
    }

    pub fn transposed(&self) -> Self {
        let g = self.geometry;
        let t = g.transposed();
        let mut values = vec![0.0; g.len()];
        let mut nearest = vec![NO_SITE; g.len()];
        for j in 0..g.height {
            for i in 0..g.width {
                let src = g.index(i, j);
                values[t.index(j, i)] = self.values[src];
                nearest[t.index(j, i)] = match self.nearest[src] {
                    NO_SITE => NO_SITE,
                    s => {
                        let (si, sj) = g.coords(s as usize);
                        t.index(sj, si) as u32
                    }
                };
            }
        }
        Self { geometry: t, values, nearest }
    }
}

pub fn signed_distance_field(grid: &BinaryGrid) -> SdfField {
    let g = grid.geometry;
    let free: Vec<bool> = grid.occupied.iter().map(|&o| !o).collect();
    let (to_occ, occ_site) = squared_distance_transform_with_sites(g.width, g.height, &grid.occupied);
    let (to_free, free_site) = squared_distance_transform_with_sites(g.width, g.height, &free);
    let sentinel = sentinel_distance(&g);
    let mut values = Vec::with_capacity(g.len());
    let mut nearest = Vec::with_capacity(g.len());
    for idx in 0..g.len() {
        let (d2, site, sign) = if grid.occupied[idx] {
            (to_free[idx], free_site[idx], -1.0)
        } else {
            (to_occ[idx], occ_site[idx], 1.0)
        };
        let d = if d2.is_finite() { libm::sqrt(d2) * g.resolution } else { sentinel };
        values.push(sign * d);
        nearest.push(if site == usize::MAX { NO_SITE } else { site as u32 });
    }
    SdfField { geometry: g, values, nearest }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub geometry: GridGeometry,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
}

impl GradientField {
    pub fn norm(&self, i: usize, j: usize) -> f64 {
        let idx = self.geometry.index(i, j);
        libm::hypot(self.grad_x[idx], self.grad_y[idx])
    }
}

/// Central differences inside, one-sided at the border, in units of 1/meter * meters.
pub fn gradient_field(sdf: &SdfField) -> Result<GradientField, SdfError> {
    let g = sdf.geometry;
    let (w, h) = (g.width, g.height);
    if w < 2 || h < 2 {
        return Err(SdfError::TooSmall { width: w, height: h });
    }
    let v = |i: usize, j: usize| sdf.values[j * w + i];
    let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / (span as f64 * g.resolution);
    let mut grad_x = vec![0.0; g.len()];
    let mut grad_y = vec![0.0; g.len()];
    for j in 0..h {
        for i in 0..w {
            let (il, ih) = (i.saturating_sub(1), (i + 1).min(w - 1));
            let (jl, jh) = (j.saturating_sub(1), (j + 1).min(h - 1));
            grad_x[j * w + i] = diff(v(il, j), v(ih, j), ih - il);
            grad_y[j * w + i] = diff(v(i, jl), v(i, jh), jh - jl);
        }
    }
    Ok(GradientField { geometry: g, grad_x, grad_y })
}
