//! Grid and field file formats.
//!
//! Occupancy images are binary PGM (P5, 8 bit) with 255 free, 0 occupied and
//! 128 unknown. The top image row is the highest y row of the grid. Every
//! image comes with a JSON sidecar holding the geometry. Scalar fields are CSV
//! (a `width,height,resolution,origin_x,origin_y` header line, its values, then
//! one line per grid row from lowest y up) or 16-bit PGM with an affine scale.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ogm_cbf_core::grid::GridGeometry;
use ogm_cbf_core::math::Vec2;
use ogm_cbf_core::ogm::{BinaryGrid, OccupancyGrid};
use ogm_cbf_core::shaping::ShapedField;
use serde::{Deserialize, Serialize};

use crate::error::NavError;
use crate::harness::{Episode, FieldSnapshot};
use crate::scenario::Scenario;

pub const FREE: u8 = 255;
pub const OCCUPIED: u8 = 0;
pub const UNKNOWN: u8 = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSidecar {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
    /// Present for 16-bit field images: `value = offset + scale * pixel`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl GridSidecar {
    pub fn from_geometry(g: &GridGeometry) -> Self {
        Self { width: g.width, height: g.height, resolution: g.resolution, origin: [g.origin.x, g.origin.y], offset: None, scale: None }
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry::new(self.width, self.height, self.resolution, Vec2::new(self.origin[0], self.origin[1]))
    }
}

/// Sidecar path next to an image: `map.pgm` -> `map.json`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("json")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), NavError> {
    fs::write(path, bytes).map_err(NavError::io(path))
}

fn write_sidecar(image: &Path, sidecar: &GridSidecar) -> Result<(), NavError> {
    let text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    write_file(&sidecar_path(image), text.as_bytes())
}

/// Pixel codes in image order (top row first).
fn image_bytes(g: &GridGeometry, code: impl Fn(usize) -> u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(g.len());
    for j in (0..g.height).rev() {
        for i in 0..g.width {
            out.push(code(g.index(i, j)));
        }
    }
    out
}

pub fn encode_pgm8(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parses a binary PGM, returning `(width, height, maxval, raw pixel bytes)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, u32, &[u8]), String> {
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?.to_string());
    }
    if tokens[0] != "P5" {
        return Err(format!("expected P5, found {}", tokens[0]));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|e| format!("bad header value {s}: {e}"));
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])? as u32);
    pos += 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() != w * h * bpp {
        return Err(format!("expected {} pixel bytes, found {}", w * h * bpp, data.len()));
    }
    Ok((w, h, maxval, data))
}

/// Writes a tri-state occupancy image: occupied cells from `binary`, unknown
/// where the map still holds its prior, free elsewhere.
pub fn write_occupancy_pgm(path: &Path, binary: &BinaryGrid, map: Option<&OccupancyGrid>) -> Result<(), NavError> {
    let g = binary.geometry;
    let pixels = image_bytes(&g, |k| {
        if binary.occupied[k] {
            OCCUPIED
        } else if map.is_some_and(|m| m.log_odds[k] == m.prior) {
            UNKNOWN
        } else {
            FREE
        }
    });
    write_file(path, &encode_pgm8(g.width, g.height, &pixels))?;
    write_sidecar(path, &GridSidecar::from_geometry(&g))
}

/// Reads an occupancy image and its sidecar back into per-cell codes in grid order.
pub fn read_occupancy_pgm(path: &Path) -> Result<(GridGeometry, Vec<u8>), NavError> {
    let bytes = fs::read(path).map_err(NavError::io(path))?;
    let format = |message: String| NavError::Format { path: path.to_path_buf(), message };
    let (w, h, maxval, data) = decode_pgm(&bytes).map_err(format)?;
    if maxval != 255 {
        return Err(format(format!("expected maxval 255, found {maxval}")));
    }
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(NavError::io(&side))?;
    let sidecar: GridSidecar = serde_json::from_str(&text).map_err(|source| NavError::Json { path: side.clone(), source })?;
    if sidecar.width != w || sidecar.height != h {
        return Err(format(format!("image is {w}x{h} but sidecar says {}x{}", sidecar.width, sidecar.height)));
    }
    let g = sidecar.geometry();
    let mut codes = vec![0u8; g.len()];
    for (row, j) in (0..h).rev().enumerate() {
        for i in 0..w {
            codes[g.index(i, j)] = data[row * w + i];
        }
    }
    Ok((g, codes))
}

/// Reads an occupancy image as a binary grid; unknown counts as free.
pub fn read_binary_grid(path: &Path) -> Result<BinaryGrid, NavError> {
    let (g, codes) = read_occupancy_pgm(path)?;
    Ok(BinaryGrid::new(g, codes.iter().map(|&c| c == OCCUPIED).collect()))
}

pub fn field_csv(g: &GridGeometry, values: &[f64]) -> String {
    let mut out = String::from("width,height,resolution,origin_x,origin_y\n");
    let _ = writeln!(out, "{},{},{},{},{}", g.width, g.height, g.resolution, g.origin.x, g.origin.y);
    for j in 0..g.height {
        for i in 0..g.width {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", values[g.index(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn write_field_csv(path: &Path, g: &GridGeometry, values: &[f64]) -> Result<(), NavError> {
    write_file(path, field_csv(g, values).as_bytes())
}

pub fn read_field_csv(path: &Path) -> Result<(GridGeometry, Vec<f64>), NavError> {
    let text = fs::read_to_string(path).map_err(NavError::io(path))?;
    let format = |message: String| NavError::Format { path: path.to_path_buf(), message };
    let mut lines = text.lines();
    lines.next().ok_or_else(|| format("empty file".into()))?;
    let head: Vec<&str> = lines.next().ok_or_else(|| format("missing header values".into()))?.split(',').collect();
    if head.len() != 5 {
        return Err(format("header needs five values".into()));
    }
    let f = |s: &str| s.trim().parse::<f64>().map_err(|e| format(format!("{s}: {e}")));
    let (w, h) = (f(head[0])? as usize, f(head[1])? as usize);
    let g = GridGeometry::new(w, h, f(head[2])?, Vec2::new(f(head[3])?, f(head[4])?));
    let mut values = Vec::with_capacity(g.len());
    for line in lines.take(h) {
        for s in line.split(',') {
            values.push(f(s)?);
        }
    }
    if values.len() != g.len() {
        return Err(format(format!("expected {} values, found {}", g.len(), values.len())));
    }
    Ok((g, values))
}

/// Writes a field as a 16-bit PGM scaled affinely onto `0..=65535`.
pub fn write_field_pgm16(path: &Path, g: &GridGeometry, values: &[f64]) -> Result<(), NavError> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { (hi - lo) / 65535.0 } else { 1.0 };
    let mut out = format!("P5\n{} {}\n65535\n", g.width, g.height).into_bytes();
    for j in (0..g.height).rev() {
        for i in 0..g.width {
            let raw = ((values[g.index(i, j)] - lo) / scale).round().clamp(0.0, 65535.0) as u16;
            out.extend_from_slice(&raw.to_be_bytes());
        }
    }
    write_file(path, &out)?;
    let sidecar = GridSidecar { offset: Some(lo), scale: Some(scale), ..GridSidecar::from_geometry(g) };
    write_sidecar(path, &sidecar)
}

pub fn read_field_pgm16(path: &Path) -> Result<(GridGeometry, Vec<f64>), NavError> {
    let bytes = fs::read(path).map_err(NavError::io(path))?;
    let format = |message: String| NavError::Format { path: path.to_path_buf(), message };
    let (w, h, maxval, data) = decode_pgm(&bytes).map_err(format)?;
    if maxval != 65535 {
        return Err(format(format!("expected maxval 65535, found {maxval}")));
    }
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(NavError::io(&side))?;
    let sidecar: GridSidecar = serde_json::from_str(&text).map_err(|source| NavError::Json { path: side.clone(), source })?;
    let (offset, scale) = match (sidecar.offset, sidecar.scale) {
        (Some(o), Some(s)) => (o, s),
        _ => return Err(format("sidecar lacks offset/scale".into())),
    };
    let g = sidecar.geometry();
    let mut values = vec![0.0; w * h];
    for (row, j) in (0..h).rev().enumerate() {
        for i in 0..w {
            let k = 2 * (row * w + i);
            values[g.index(i, j)] = offset + scale * f64::from(u16::from_be_bytes([data[k], data[k + 1]]));
        }
    }
    Ok((g, values))
}

/// Gradient of the shaped field at every node inside the evaluation extent;
/// zero elsewhere.
pub fn node_gradients(field: &ShapedField) -> (Vec<f64>, Vec<f64>) {
    let g = field.geometry;
    let mut gx = vec![0.0; g.len()];
    let mut gy = vec![0.0; g.len()];
    for j in 0..g.height {
        for i in 0..g.width {
            if let Ok(s) = field.eval(g.cell_center(i, j)) {
                gx[g.index(i, j)] = s.gradient.x;
                gy[g.index(i, j)] = s.gradient.y;
            }
        }
    }
    (gx, gy)
}

/// SVG of occupied cells, gradient arrows every `every` cells and the path.
pub fn quiver_svg(field: &ShapedField, occupied: &BinaryGrid, every: usize, path: &[Vec2]) -> String {
    let g = field.geometry;
    let every = every.max(1);
    let scale = 10.0;
    let (w, h) = (g.width as f64 * g.resolution * scale, g.height as f64 * g.resolution * scale);
    let sx = |x: f64| (x - g.origin.x) * scale;
    let sy = |y: f64| h - (y - g.origin.y) * scale;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#);
    out.push_str(r##"<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#1f4e79"/></marker></defs>"##);
    out.push('\n');
    let _ = writeln!(out, r#"<rect width="{w:.1}" height="{h:.1}" fill="white"/>"#);
    let cell = g.resolution * scale;
    for j in 0..g.height {
        for i in 0..g.width {
            if occupied.is_occupied(i, j) {
                let c = g.cell_center(i, j);
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="#444"/>"##,
                    sx(c.x) - 0.5 * cell,
                    sy(c.y) - 0.5 * cell
                );
            }
        }
    }
    let len = 0.8 * every as f64 * g.resolution;
    for j in (0..g.height).step_by(every) {
        for i in (0..g.width).step_by(every) {
            let c = g.cell_center(i, j);
            let Ok(s) = field.eval(c) else { continue };
            let n = s.gradient.norm();
            if n < field.degenerate_eps() {
                continue;
            }
            let tip = c + s.gradient * (len / n);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#1f4e79" stroke-width="1" marker-end="url(#head)"/>"##,
                sx(c.x),
                sy(c.y),
                sx(tip.x),
                sy(tip.y)
            );
        }
    }
    if path.len() > 1 {
        let pts: Vec<String> = path.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y))).collect();
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="orange" stroke-width="3"/>"##, pts.join(" "));
    }
    out.push_str("</svg>\n");
    out
}

/// Writes the binarized occupancy image, the tri-state map image, raw and
/// shaped distance fields, gradient components and the quiver plot of one
/// snapshot.
pub fn write_snapshot(dir: &Path, snap: &FieldSnapshot, path: &[Vec2], quiver_every: usize) -> Result<Vec<PathBuf>, NavError> {
    fs::create_dir_all(dir).map_err(NavError::io(dir))?;
    let g = snap.sdf.geometry;
    let mut written = Vec::new();
    let occ = dir.join("occupancy.pgm");
    write_occupancy_pgm(&occ, &snap.binary, None)?;
    written.push(sidecar_path(&occ));
    written.push(occ);
    let belief = dir.join("map.pgm");
    write_occupancy_pgm(&belief, &snap.binary, Some(&snap.map))?;
    written.push(sidecar_path(&belief));
    written.push(belief);
    let inflated = dir.join("inflated.pgm");
    write_occupancy_pgm(&inflated, &snap.inflated, None)?;
    written.push(sidecar_path(&inflated));
    written.push(inflated);
    let phi = dir.join("phi.csv");
    write_field_csv(&phi, &g, &snap.sdf.values)?;
    written.push(phi);
    let phi_s = dir.join("phi_s.csv");
    write_field_csv(&phi_s, &g, &snap.field.nodes)?;
    written.push(phi_s);
    let phi_s_img = dir.join("phi_s.pgm");
    write_field_pgm16(&phi_s_img, &g, &snap.field.nodes)?;
    written.push(sidecar_path(&phi_s_img));
    written.push(phi_s_img);
    let (gx, gy) = node_gradients(&snap.field);
    for (name, values) in [("grad_x.csv", &gx), ("grad_y.csv", &gy)] {
        let p = dir.join(name);
        write_field_csv(&p, &g, values)?;
        written.push(p);
    }
    let svg = dir.join("quiver.svg");
    write_file(&svg, quiver_svg(&snap.field, &snap.inflated, quiver_every, path).as_bytes())?;
    written.push(svg);
    Ok(written)
}

/// Replays the scenario through step `at_step` and writes its field snapshot
/// with the path driven so far.
pub fn export_fields(scenario: &Scenario, at_step: usize, out_dir: &Path) -> Result<Vec<PathBuf>, NavError> {
    let mut episode = Episode::new(scenario)?;
    while episode.rows().len() <= at_step {
        if !episode.step(&mut ())? {
            break;
        }
    }
    if episode.rows().len() <= at_step {
        return Err(NavError::StepNotReached { requested: at_step, ended: episode.rows().len().saturating_sub(1) });
    }
    let snap = episode.snapshot().expect("snapshot exists once a step ran");
    let path: Vec<Vec2> = episode.rows()[..=at_step].iter().map(|r| Vec2::new(r.x, r.y)).collect();
    let every = (snap.field.geometry.width / 40).max(1);
    write_snapshot(out_dir, snap, &path, every)
}
