//! SVG rasters of 2D slices and projections of two spectrahedra.
//!
//! A plane is given by two directions `d1, d2`; a pixel `(u, v)` stands for
//! `Dᵀx = (u, v)` with `D = [d1 d2]`. A slice keeps only `x = D(DᵀD)⁻¹(u, v)`;
//! a projection asks whether any `x` in the set has those coordinates, which
//! is a feasibility probe over the remaining `n − 2` directions.

use std::fmt::Write as _;

use anyhow::Result;
use nalgebra::DMatrix;
use rayon::prelude::*;
use spectrahedra::pencil::LinearPencil;
use spectrahedra::sdpcore::{feasibility_probe, ProbeResult};
use spectrahedra::search::{boundary_samples, interior_point};
use spectrahedra::symcore::nullspace;

use crate::input::input_error;

pub const SLICE_GRID: usize = 160;
pub const PROJECT_GRID: usize = 60;

/// Outer set `S_B`.
pub const OUTER_FILL: &str = "#595959";
/// Inner set `S_A`, drawn over the outer one.
pub const INNER_FILL: &str = "#c8c8c8";
/// Pixels where the membership test failed.
pub const UNKNOWN_FILL: &str = "#d62728";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Slice,
    Project,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Member {
    In,
    Out,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct RenderConfig {
    pub mode: Mode,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// Cells per side; defaults by mode when `None`.
    pub grid: Option<usize>,
    /// `[u_min, u_max, v_min, v_max]`; computed from sampled boundary points when `None`.
    pub extent: Option<[f64; 4]>,
    /// SVG pixels per cell.
    pub cell_px: usize,
}

impl RenderConfig {
    /// Coordinate plane `(x_i, x_j)` in `n` dimensions.
    pub fn plane(n: usize, i: usize, j: usize, mode: Mode) -> Result<Self> {
        if i >= n || j >= n || i == j {
            return Err(input_error(format!("plane ({i}, {j}) is not a pair of distinct coordinates below {n}")));
        }
        let unit = |p: usize| (0..n).map(|q| if q == p { 1.0 } else { 0.0 }).collect();
        Ok(RenderConfig { mode, d1: unit(i), d2: unit(j), grid: None, extent: None, cell_px: 4 })
    }
}

#[derive(Clone, Debug)]
pub struct Raster {
    pub grid: usize,
    pub extent: [f64; 4],
    /// Row-major, row 0 at the top (largest `v`).
    pub inner: Vec<Member>,
    pub outer: Vec<Member>,
}

impl Raster {
    pub fn count(&self, which: &[Member], m: Member) -> usize {
        which.iter().filter(|&&x| x == m).count()
    }
}

struct Plane {
    /// `D(DᵀD)⁻¹`: maps `(u, v)` to the point of the plane's span.
    lift: DMatrix<f64>,
    /// `Dᵀ`.
    coords: DMatrix<f64>,
    /// Basis of `ker Dᵀ`.
    rest: DMatrix<f64>,
}

fn plane(n: usize, cfg: &RenderConfig) -> Result<Plane> {
    if n < 2 {
        return Err(input_error(format!("cannot render a spectrahedron in {n} dimension(s)")));
    }
    if cfg.d1.len() != n || cfg.d2.len() != n {
        return Err(input_error(format!("plane directions must have length {n}")));
    }
    let mut d = DMatrix::zeros(n, 2);
    for p in 0..n {
        d[(p, 0)] = cfg.d1[p];
        d[(p, 1)] = cfg.d2[p];
    }
    let g = d.transpose() * &d;
    let ginv = g.clone().try_inverse().filter(|_| g.determinant().abs() > 1e-12 * g.norm_squared().max(1.0));
    let Some(ginv) = ginv else {
        return Err(input_error("plane directions are linearly dependent"));
    };
    let rest = nullspace(&d.transpose())?;
    Ok(Plane { lift: &d * ginv, coords: d.transpose(), rest })
}

fn member_slice(p: &LinearPencil, uv: &[f64]) -> Member {
    match p.evaluate(uv).and_then(|m| m.min_eigenvalue()) {
        Ok(v) if v >= 0.0 => Member::In,
        Ok(_) => Member::Out,
        Err(_) => Member::Unknown,
    }
}

fn member_project(p: &LinearPencil, pl: &Plane, uv: &[f64]) -> Member {
    let x0: Vec<f64> = (0..pl.lift.nrows()).map(|i| pl.lift[(i, 0)] * uv[0] + pl.lift[(i, 1)] * uv[1]).collect();
    let Ok(sub) = p.affine_substitute(&x0, &pl.rest) else {
        return Member::Unknown;
    };
    match feasibility_probe(&sub) {
        ProbeResult::NonEmpty { .. } => Member::In,
        ProbeResult::Empty => Member::Out,
        ProbeResult::Unknown => Member::Unknown,
    }
}

/// Sampled `(u, v)` coordinates of points of the set, for the automatic extent.
fn sampled_coords(p: &LinearPencil, coords: &DMatrix<f64>) -> Vec<[f64; 2]> {
    let Some(x0) = interior_point(p) else {
        return Vec::new();
    };
    let mut pts = boundary_samples(p, &x0, 150, 11);
    pts.push(x0);
    pts.iter()
        .map(|x| {
            let c = |r: usize| (0..x.len()).map(|i| coords[(r, i)] * x[i]).sum::<f64>();
            [c(0), c(1)]
        })
        .collect()
}

fn bbox(pts: &[[f64; 2]]) -> Option<[f64; 4]> {
    if pts.is_empty() {
        return None;
    }
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in pts {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].max(p[0]);
        b[2] = b[2].min(p[1]);
        b[3] = b[3].max(p[1]);
    }
    Some(b)
}

/// Square window around both sets. The outer set may be much larger (or
/// unbounded), so its part is capped at three times the inner set's size.
fn auto_extent(inner: &[[f64; 2]], outer: &[[f64; 2]]) -> [f64; 4] {
    let half = |b: [f64; 4]| 0.5 * (b[1] - b[0]).max(b[3] - b[2]);
    let (box_a, box_b) = (bbox(inner), bbox(outer));
    let b = match (box_a, box_b) {
        (Some(a), Some(b)) => {
            let cap = 3.0 * half(a).max(1e-3);
            let c = [0.5 * (a[0] + a[1]), 0.5 * (a[2] + a[3])];
            [
                a[0].min(b[0].max(c[0] - cap)),
                a[1].max(b[1].min(c[0] + cap)),
                a[2].min(b[2].max(c[1] - cap)),
                a[3].max(b[3].min(c[1] + cap)),
            ]
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => [-2.0, 2.0, -2.0, 2.0],
    };
    let h = 1.1 * half(b).max(1e-3);
    let (cu, cv) = (0.5 * (b[0] + b[1]), 0.5 * (b[2] + b[3]));
    [cu - h, cu + h, cv - h, cv + h]
}

/// Membership of every cell center in `S_A` (inner) and `S_B` (outer).
pub fn rasterize(a: &LinearPencil, b: &LinearPencil, cfg: &RenderConfig) -> Result<Raster> {
    if a.n() != b.n() {
        return Err(input_error(format!("dimension mismatch: A has {} variables, B has {}", a.n(), b.n())));
    }
    let pl = plane(a.n(), cfg)?;
    let grid = cfg.grid.unwrap_or(match cfg.mode {
        Mode::Slice => SLICE_GRID,
        Mode::Project => PROJECT_GRID,
    });
    if grid == 0 {
        return Err(input_error("grid must be positive"));
    }
    let project = cfg.mode == Mode::Project && pl.rest.ncols() > 0;
    let zero = vec![0.0; a.n()];
    // In slice mode both pencils are restricted to the plane once.
    let (sa, sb) = (a.affine_substitute(&zero, &pl.lift)?, b.affine_substitute(&zero, &pl.lift)?);
    let extent = match cfg.extent {
        Some(e) if e[0] < e[1] && e[2] < e[3] => e,
        Some(e) => return Err(input_error(format!("empty extent {e:?}"))),
        None if project => auto_extent(&sampled_coords(a, &pl.coords), &sampled_coords(b, &pl.coords)),
        None => {
            let id = DMatrix::identity(2, 2);
            auto_extent(&sampled_coords(&sa, &id), &sampled_coords(&sb, &id))
        }
    };
    let cells: Vec<(Member, Member)> = (0..grid * grid)
        .into_par_iter()
        .map(|idx| {
            let (row, col) = (idx / grid, idx % grid);
            let u = extent[0] + (col as f64 + 0.5) * (extent[1] - extent[0]) / grid as f64;
            let v = extent[3] - (row as f64 + 0.5) * (extent[3] - extent[2]) / grid as f64;
            if project {
                (member_project(a, &pl, &[u, v]), member_project(b, &pl, &[u, v]))
            } else {
                (member_slice(&sa, &[u, v]), member_slice(&sb, &[u, v]))
            }
        })
        .collect();
    let (inner, outer) = cells.into_iter().unzip();
    Ok(Raster { grid, extent, inner, outer })
}

/// Horizontal runs `(row, start, len)` of cells equal to `m`.
fn runs(cells: &[Member], grid: usize, m: Member) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for row in 0..grid {
        let line = &cells[row * grid..(row + 1) * grid];
        let mut col = 0;
        while col < grid {
            if line[col] == m {
                let start = col;
                while col < grid && line[col] == m {
                    col += 1;
                }
                out.push((row, start, col - start));
            } else {
                col += 1;
            }
        }
    }
    out
}

fn layer(svg: &mut String, id: &str, fill: &str, rects: &[(usize, usize, usize)], px: usize) {
    let _ = writeln!(svg, r#"  <g id="{id}" fill="{fill}" shape-rendering="crispEdges">"#);
    for &(row, start, len) in rects {
        let _ = writeln!(svg, r#"    <rect x="{}" y="{}" width="{}" height="{px}"/>"#, start * px, row * px, len * px);
    }
    let _ = writeln!(svg, "  </g>");
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG 1.1 document: `S_B` dark grey, `S_A` light grey on top, unknown cells red.
pub fn to_svg(r: &Raster, title: &str, cell_px: usize) -> String {
    let px = cell_px.max(1);
    let size = r.grid * px;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(svg, "  <title>{}</title>", escape(title));
    let [u0, u1, v0, v1] = r.extent;
    let _ = writeln!(svg, "  <desc>u in [{u0:.6}, {u1:.6}], v in [{v0:.6}, {v1:.6}], {} x {} cells</desc>", r.grid, r.grid);
    let _ = writeln!(svg, r##"  <rect width="{size}" height="{size}" fill="#ffffff"/>"##);
    layer(&mut svg, "outer", OUTER_FILL, &runs(&r.outer, r.grid, Member::In), px);
    layer(&mut svg, "inner", INNER_FILL, &runs(&r.inner, r.grid, Member::In), px);
    let unknown: Vec<Member> = r
        .inner
        .iter()
        .zip(&r.outer)
        .map(|(a, b)| if *a == Member::Unknown || *b == Member::Unknown { Member::Unknown } else { Member::Out })
        .collect();
    layer(&mut svg, "unknown", UNKNOWN_FILL, &runs(&unknown, r.grid, Member::Unknown), px);
    let _ = writeln!(svg, r##"  <rect width="{size}" height="{size}" fill="none" stroke="#000000" stroke-width="1"/>"##);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use spectrahedra::pencil::{ball_pencil, disk_pencil};

    #[test]
    fn nested_disks() {
        let a = disk_pencil(0.5).unwrap();
        let b = disk_pencil(1.0).unwrap();
        let mut cfg = RenderConfig::plane(2, 0, 1, Mode::Slice).unwrap();
        cfg.grid = Some(40);
        cfg.extent = Some([-1.2, 1.2, -1.2, 1.2]);
        let r = rasterize(&a, &b, &cfg).unwrap();
        let inner = r.count(&r.inner, Member::In) as f64;
        let outer = r.count(&r.outer, Member::In) as f64;
        // Area ratio of the two disks is 1/4.
        assert!((inner / outer - 0.25).abs() < 0.03, "{inner} {outer}");
        for (i, o) in r.inner.iter().zip(&r.outer) {
            assert!(!(*i == Member::In && *o == Member::Out));
        }
        let svg = to_svg(&r, "disks", 4);
        assert!(svg.contains(r#"<g id="inner""#) && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn projection_of_a_ball_is_a_disk() {
        let a = ball_pencil(3, 0.5).unwrap();
        let b = ball_pencil(3, 1.0).unwrap();
        let mut cfg = RenderConfig::plane(3, 0, 2, Mode::Project).unwrap();
        cfg.grid = Some(12);
        cfg.extent = Some([-1.2, 1.2, -1.2, 1.2]);
        let r = rasterize(&a, &b, &cfg).unwrap();
        let center = 6 * 12 + 6;
        assert_eq!(r.inner[center], Member::In);
        assert_eq!(r.inner[0], Member::Out);
        assert_eq!(r.outer[0], Member::Out);
        assert_eq!(r.count(&r.inner, Member::Unknown), 0);
    }

    #[test]
    fn automatic_extent_covers_the_inner_set() {
        let a = disk_pencil(0.5).unwrap();
        let b = disk_pencil(1.0).unwrap();
        let cfg = RenderConfig { grid: Some(20), ..RenderConfig::plane(2, 0, 1, Mode::Slice).unwrap() };
        let r = rasterize(&a, &b, &cfg).unwrap();
        assert!(r.extent[0] < -1.0 && r.extent[1] > 1.0, "{:?}", r.extent);
    }

    #[test]
    fn degenerate_planes_are_rejected() {
        let a = ball_pencil(1, 1.0).unwrap();
        assert!(rasterize(&a, &a, &RenderConfig { d1: vec![1.0], d2: vec![1.0], ..RenderConfig::plane(2, 0, 1, Mode::Slice).unwrap() }).is_err());
        let b = ball_pencil(3, 1.0).unwrap();
        let cfg = RenderConfig { d1: vec![1.0, 0.0, 0.0], d2: vec![2.0, 0.0, 0.0], ..RenderConfig::plane(3, 0, 1, Mode::Slice).unwrap() };
        assert!(rasterize(&b, &b, &cfg).is_err());
        assert!(RenderConfig::plane(3, 1, 1, Mode::Slice).is_err());
    }
}
