//! Image output for solved fields: grayscale heatmaps as binary PPM,
//! iso-line overlays as SVG, and trajectory overlays painted onto the
//! heatmap. Everything here works on plain value slices so the drawing
//! code stays independent of the field types.

use std::fmt::Write as _;

pub const PATH_COLOR: [u8; 3] = [225, 64, 64];
pub const START_COLOR: [u8; 3] = [64, 200, 64];
pub const GOAL_COLOR: [u8; 3] = [72, 120, 240];

/// RGB image with row-major pixels.
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Raster {
            width,
            height,
            pixels: vec![[0, 0, 0]; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[cfg(test)]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    #[cfg(test)]
    pub fn set(&mut self, x: usize, y: usize, color: [u8; 3]) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.pixels[y * self.width + x] = color;
    }

    /// Fills a rectangle, clipping at the image edge.
    pub fn fill_rect(&mut self, x: usize, y: usize, w: usize, h: usize, color: [u8; 3]) {
        for yy in y..(y + h).min(self.height) {
            for xx in x..(x + w).min(self.width) {
                self.pixels[yy * self.width + xx] = color;
            }
        }
    }

    /// Binary PPM (P6) encoding of the image.
    pub fn ppm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for px in &self.pixels {
            out.extend_from_slice(px);
        }
        out
    }
}

/// Gray level for one cell value: `None` (obstacle or unreachable) is
/// black, otherwise the value in [0, 1] scales to 0..=255.
pub fn cell_shade(value: Option<f64>) -> u8 {
    match value {
        Some(t) => (t.clamp(0.0, 1.0) * 255.0).round() as u8,
        None => 0,
    }
}

/// Renders cell values as a grayscale heatmap with `scale`-pixel cells.
pub fn heatmap(values: &[Option<f64>], height: usize, width: usize, scale: usize) -> Raster {
    assert_eq!(values.len(), height * width, "value grid shape mismatch");
    let mut img = Raster::new(width * scale, height * scale);
    for r in 0..height {
        for c in 0..width {
            let s = cell_shade(values[r * width + c]);
            img.fill_rect(c * scale, r * scale, scale, scale, [s, s, s]);
        }
    }
    img
}

/// Linear interpolation parameter of `level` between two node values.
fn edge_t(level: f64, v0: f64, v1: f64) -> f64 {
    if v0 == v1 {
        0.5
    } else {
        (level - v0) / (v1 - v0)
    }
}

/// Iso-line segments of a scalar lattice at `level`, via marching
/// squares with the midpoint rule for saddles. Nodes sit on integer
/// coordinates: node (row, col) is at (x, y) = (col, row). A node
/// counts as inside when its value is >= `level`.
pub fn contour_segments(
    values: &[f64],
    height: usize,
    width: usize,
    level: f64,
) -> Vec<[[f64; 2]; 2]> {
    assert_eq!(values.len(), height * width, "lattice shape mismatch");
    let at = |r: usize, c: usize| values[r * width + c];
    let mut segments = Vec::new();
    if height < 2 || width < 2 {
        return segments;
    }
    for r in 0..height - 1 {
        for c in 0..width - 1 {
            let a = at(r, c);
            let b = at(r, c + 1);
            let cc = at(r + 1, c + 1);
            let d = at(r + 1, c);
            let mask = (a >= level) as usize
                | ((b >= level) as usize) << 1
                | ((cc >= level) as usize) << 2
                | ((d >= level) as usize) << 3;
            if mask == 0 || mask == 15 {
                continue;
            }
            let x = c as f64;
            let y = r as f64;
            let top = [x + edge_t(level, a, b), y];
            let right = [x + 1.0, y + edge_t(level, b, cc)];
            let bottom = [x + edge_t(level, d, cc), y + 1.0];
            let left = [x, y + edge_t(level, a, d)];
            match mask {
                1 => segments.push([left, top]),
                2 => segments.push([top, right]),
                3 => segments.push([left, right]),
                4 => segments.push([right, bottom]),
                6 => segments.push([top, bottom]),
                7 => segments.push([left, bottom]),
                8 => segments.push([bottom, left]),
                9 => segments.push([top, bottom]),
                11 => segments.push([right, bottom]),
                12 => segments.push([left, right]),
                13 => segments.push([top, right]),
                14 => segments.push([left, top]),
                5 => {
                    // Opposite corners a and cc inside: the center value
                    // decides whether the inside region connects.
                    if (a + b + cc + d) / 4.0 >= level {
                        segments.push([top, right]);
                        segments.push([left, bottom]);
                    } else {
                        segments.push([left, top]);
                        segments.push([bottom, right]);
                    }
                }
                10 => {
                    if (a + b + cc + d) / 4.0 >= level {
                        segments.push([left, top]);
                        segments.push([bottom, right]);
                    } else {
                        segments.push([top, right]);
                        segments.push([left, bottom]);
                    }
                }
                _ => unreachable!("mask covers 0..16"),
            }
        }
    }
    segments
}

/// Stroke color for an iso-level: brighter toward higher levels, so
/// contours near the goal stand out.
fn level_color(level: f64) -> String {
    let t = level.clamp(0.0, 1.0);
    let r = (55.0 + 200.0 * t).round() as u8;
    let g = (30.0 + 160.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}28")
}

/// SVG with the heatmap as cell rectangles and one polyline layer per
/// iso-level. Contour nodes live on cell centers, so lattice point
/// (x, y) maps to pixel ((x + 0.5) * scale, (y + 0.5) * scale).
/// Obstacles and unreachable cells enter the lattice as -1 so contours
/// close around them.
pub fn contour_svg(
    values: &[Option<f64>],
    height: usize,
    width: usize,
    scale: usize,
    levels: &[f64],
) -> String {
    let w = width * scale;
    let h = height * scale;
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    for r in 0..height {
        for c in 0..width {
            let s = cell_shade(values[r * width + c]);
            writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{scale}\" height=\"{scale}\" fill=\"#{s:02x}{s:02x}{s:02x}\"/>",
                c * scale,
                r * scale
            )
            .unwrap();
        }
    }
    let lattice: Vec<f64> = values.iter().map(|v| v.unwrap_or(-1.0)).collect();
    let sf = scale as f64;
    let stroke = (sf * 0.12).max(1.0);
    for &level in levels {
        let color = level_color(level);
        for seg in contour_segments(&lattice, height, width, level) {
            writeln!(
                out,
                "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"{color}\" stroke-width=\"{stroke:.3}\"/>",
                (seg[0][0] + 0.5) * sf,
                (seg[0][1] + 0.5) * sf,
                (seg[1][0] + 0.5) * sf,
                (seg[1][1] + 0.5) * sf
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Paints a cell trajectory onto a heatmap raster: path cells red, the
/// start cell green, the goal cell blue with a white inset so it stays
/// visible even when start and goal coincide.
pub fn paint_cell_path(img: &mut Raster, scale: usize, cells: &[(usize, usize)]) {
    for &(row, col) in cells {
        img.fill_rect(col * scale, row * scale, scale, scale, PATH_COLOR);
    }
    if let Some(&(row, col)) = cells.first() {
        img.fill_rect(col * scale, row * scale, scale, scale, START_COLOR);
    }
    if let Some(&(row, col)) = cells.last() {
        img.fill_rect(col * scale, row * scale, scale, scale, GOAL_COLOR);
        let inset = scale / 4;
        if scale > 2 * inset {
            img.fill_rect(
                col * scale + inset,
                row * scale + inset,
                scale - 2 * inset,
                scale - 2 * inset,
                [255, 255, 255],
            );
        }
    }
}

/// Paints a normalized-coordinate trajectory as dots. Points are in
/// [-1, 1]^2 with u horizontal and v vertical, matching the cell grid
/// the raster was built from.
pub fn paint_norm_path(img: &mut Raster, points: &[(f64, f64)]) {
    let to_px = |u: f64, extent: usize| -> usize {
        let x = (u + 1.0) / 2.0 * extent as f64;
        (x.floor().max(0.0) as usize).min(extent - 1)
    };
    let radius = (img.width().min(img.height()) / 64).max(2);
    let dot = |img: &mut Raster, u: f64, v: f64, color: [u8; 3], r: usize| {
        let cx = to_px(u, img.width());
        let cy = to_px(v, img.height());
        let x0 = cx.saturating_sub(r);
        let y0 = cy.saturating_sub(r);
        img.fill_rect(x0, y0, 2 * r + 1, 2 * r + 1, color);
    };
    for &(u, v) in points {
        dot(img, u, v, PATH_COLOR, radius / 2);
    }
    if let Some(&(u, v)) = points.first() {
        dot(img, u, v, START_COLOR, radius);
    }
    if let Some(&(u, v)) = points.last() {
        dot(img, u, v, GOAL_COLOR, radius);
    }
}
