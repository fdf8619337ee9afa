//! Classification grids, component labels, the raster filled closure, and
//! conservative distances to the Julia raster.

use std::collections::VecDeque;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::EntireMap;
use crate::orbit::{
    classify_orbit, FatouSignature, OrbitParams, OrbitVerdict, VerdictKind, Window,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RasterError {
    #[error("point {z} lies outside the grid window")]
    OutOfWindow { z: Complex64 },
    #[error("resolution must be at least 2x2, got {nx}x{ny}")]
    BadResolution { nx: usize, ny: usize },
    #[error("invalid window")]
    BadWindow,
}

/// The map and orbit parameters a grid was classified with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSource {
    pub map: EntireMap,
    pub params: OrbitParams,
}

/// A raster of orbit verdicts. Cell `(i, j)` has its center at
/// `re_min + (i + ½)·dx + i·(im_min + (j + ½)·dy)`; `j` grows with `Im z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationGrid {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<OrbitVerdict>,
    /// Component ids, `0` for Julia/undecided cells.
    pub labels: Vec<u32>,
    pub source: Option<GridSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub label: u32,
    pub signature: FatouSignature,
    pub cells: usize,
    /// Inclusive cell-index bounding box `(i_min, i_max, j_min, j_max)`.
    pub bbox: (usize, usize, usize, usize),
}

impl ClassificationGrid {
    /// Builds an unlabeled grid from precomputed verdicts (row-major, `j` outer).
    pub fn from_cells(
        window: Window,
        nx: usize,
        ny: usize,
        cells: Vec<OrbitVerdict>,
        source: Option<GridSource>,
    ) -> Result<Self, RasterError> {
        if nx < 2 || ny < 2 || cells.len() != nx * ny {
            return Err(RasterError::BadResolution { nx, ny });
        }
        if !window.is_valid() {
            return Err(RasterError::BadWindow);
        }
        Ok(ClassificationGrid {
            window,
            nx,
            ny,
            labels: vec![0; cells.len()],
            cells,
            source,
        })
    }

    /// A grid whose cells all carry the same orbit kind pattern produced by `kind_at`.
    pub fn from_fn(
        window: Window,
        nx: usize,
        ny: usize,
        kind_at: impl Fn(Complex64) -> VerdictKind,
    ) -> Result<Self, RasterError> {
        let mut cells = Vec::with_capacity(nx * ny);
        let dx = window.width() / nx as f64;
        let dy = window.height() / ny as f64;
        for j in 0..ny {
            for i in 0..nx {
                let z = Complex64::new(
                    window.re_min + (i as f64 + 0.5) * dx,
                    window.im_min + (j as f64 + 0.5) * dy,
                );
                cells.push(OrbitVerdict {
                    kind: kind_at(z),
                    iterations_used: 0,
                    final_point: z,
                });
            }
        }
        let grid = ClassificationGrid::from_cells(window, nx, ny, cells, None)?;
        Ok(label_components(grid))
    }

    pub fn dx(&self) -> f64 {
        self.window.width() / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.window.height() / self.ny as f64
    }

    /// Cell diagonal.
    pub fn cell_diagonal(&self) -> f64 {
        self.dx().hypot(self.dy())
    }

    /// Larger cell side, used when a length is configured in "cells".
    pub fn cell_size(&self) -> f64 {
        self.dx().max(self.dy())
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.window.re_min + (i as f64 + 0.5) * self.dx(),
            self.window.im_min + (j as f64 + 0.5) * self.dy(),
        )
    }

    pub fn cell_of(&self, z: Complex64) -> Option<(usize, usize)> {
        if !self.window.contains(z) {
            return None;
        }
        let i = (((z.re - self.window.re_min) / self.dx()) as usize).min(self.nx - 1);
        let j = (((z.im - self.window.im_min) / self.dy()) as usize).min(self.ny - 1);
        Some((i, j))
    }

    pub fn verdict(&self, i: usize, j: usize) -> &OrbitVerdict {
        &self.cells[self.index(i, j)]
    }

    pub fn label(&self, i: usize, j: usize) -> u32 {
        self.labels[self.index(i, j)]
    }

    pub fn label_at(&self, z: Complex64) -> Option<u32> {
        self.cell_of(z).map(|(i, j)| self.label(i, j))
    }

    pub fn is_fatou_cell(&self, i: usize, j: usize) -> bool {
        self.verdict(i, j).kind.fatou_signature().is_some()
    }

    /// Mask of cells without a Fatou verdict.
    pub fn julia_mask(&self) -> BoolRaster {
        BoolRaster {
            nx: self.nx,
            ny: self.ny,
            data: self
                .cells
                .iter()
                .map(|v| v.kind.fatou_signature().is_none())
                .collect(),
        }
    }

    /// Classifies an arbitrary point with the grid's own map and parameters.
    pub fn classify_point(&self, z: Complex64) -> Option<OrbitVerdict> {
        self.source
            .as_ref()
            .map(|s| classify_orbit(&s.map, z, &s.params))
    }

    /// Fatou signature of `z`, re-running the orbit when the grid has a source
    /// and falling back to the cell verdict otherwise.
    pub fn signature_at(&self, z: Complex64) -> Option<FatouSignature> {
        match self.classify_point(z) {
            Some(v) => v.kind.fatou_signature(),
            None => {
                let (i, j) = self.cell_of(z)?;
                self.verdict(i, j).kind.fatou_signature()
            }
        }
    }

    pub fn components(&self) -> Vec<ComponentInfo> {
        let mut out: Vec<ComponentInfo> = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let l = self.label(i, j);
                if l == 0 {
                    continue;
                }
                let idx = (l - 1) as usize;
                if idx == out.len() {
                    out.push(ComponentInfo {
                        label: l,
                        signature: self.verdict(i, j).kind.fatou_signature().unwrap(),
                        cells: 0,
                        bbox: (i, i, j, j),
                    });
                }
                let c = &mut out[idx];
                c.cells += 1;
                c.bbox.0 = c.bbox.0.min(i);
                c.bbox.1 = c.bbox.1.max(i);
                c.bbox.2 = c.bbox.2.min(j);
                c.bbox.3 = c.bbox.3.max(j);
            }
        }
        out
    }

    /// Components holding at least `fraction` of all cells.
    pub fn major_components(&self, fraction: f64) -> Vec<ComponentInfo> {
        let total = (self.nx * self.ny) as f64;
        self.components()
            .into_iter()
            .filter(|c| c.cells as f64 >= fraction * total)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x_index,y_index,kind,label,iterations")?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let v = self.verdict(i, j);
                writeln!(
                    out,
                    "{i},{j},{},{},{}",
                    v.kind.tag(),
                    self.label(i, j),
                    v.iterations_used
                )?;
            }
        }
        Ok(())
    }

    /// Binary PPM (P6). Row 0 of the image is the top edge `Im z = im_max`.
    pub fn write_ppm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.nx, self.ny)?;
        let mut row = Vec::with_capacity(3 * self.nx);
        for j in (0..self.ny).rev() {
            row.clear();
            for i in 0..self.nx {
                row.extend_from_slice(&kind_color(&self.verdict(i, j).kind));
            }
            out.write_all(&row)?;
        }
        Ok(())
    }

    /// PPM with each pixel averaged over a 2×2 supersample of the cell.
    /// Requires a grid source; falls back to [`Self::write_ppm`] without one.
    pub fn write_ppm_supersampled<W: Write>(&self, mut out: W) -> io::Result<()> {
        let Some(src) = &self.source else {
            return self.write_ppm(out);
        };
        write!(out, "P6\n{} {}\n255\n", self.nx, self.ny)?;
        let (dx, dy) = (self.dx(), self.dy());
        let rows: Vec<Vec<u8>> = (0..self.ny)
            .into_par_iter()
            .rev()
            .map(|j| {
                let mut row = Vec::with_capacity(3 * self.nx);
                for i in 0..self.nx {
                    let c0 = self.center(i, j);
                    let mut acc = [0u32; 3];
                    for (sx, sy) in [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
                        let z = c0 + Complex64::new(sx * dx, sy * dy);
                        let col = kind_color(&classify_orbit(&src.map, z, &src.params).kind);
                        for k in 0..3 {
                            acc[k] += u32::from(col[k]);
                        }
                    }
                    row.extend(acc.iter().map(|v| (v / 4) as u8));
                }
                row
            })
            .collect();
        for row in rows {
            out.write_all(&row)?;
        }
        Ok(())
    }
}

const ATTRACTOR_PALETTE: [[u8; 3]; 6] = [
    [66, 133, 244],
    [52, 168, 83],
    [251, 188, 5],
    [234, 67, 53],
    [0, 172, 193],
    [171, 71, 188],
];

/// Fixed kind→RGB palette used by the PPM export.
pub fn kind_color(kind: &VerdictKind) -> [u8; 3] {
    use crate::orbit::EscapeRoute;
    match kind {
        VerdictKind::Escaping {
            route: EscapeRoute::Drift { .. },
        } => [255, 255, 255],
        VerdictKind::Escaping { .. } => [20, 20, 20],
        VerdictKind::BoundedAttracting { attractor, .. } => {
            ATTRACTOR_PALETTE[attractor % ATTRACTOR_PALETTE.len()]
        }
        VerdictKind::BoundedParabolic { .. } => [142, 68, 173],
        VerdictKind::Undecided => [128, 128, 128],
    }
}

/// Classifies every cell center; rows are processed in parallel.
pub fn classify_grid(
    map: &EntireMap,
    window: Window,
    nx: usize,
    ny: usize,
    params: &OrbitParams,
) -> Result<ClassificationGrid, RasterError> {
    if nx < 2 || ny < 2 {
        return Err(RasterError::BadResolution { nx, ny });
    }
    if !window.is_valid() {
        return Err(RasterError::BadWindow);
    }
    let dx = window.width() / nx as f64;
    let dy = window.height() / ny as f64;
    let cells: Vec<OrbitVerdict> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..nx).map(move |i| {
                let z = Complex64::new(
                    window.re_min + (i as f64 + 0.5) * dx,
                    window.im_min + (j as f64 + 0.5) * dy,
                );
                classify_orbit(map, z, params)
            })
        })
        .collect();
    let grid = ClassificationGrid::from_cells(
        window,
        nx,
        ny,
        cells,
        Some(GridSource {
            map: *map,
            params: params.clone(),
        }),
    )?;
    Ok(label_components(grid))
}

/// 4-connected labeling of Fatou cells by signature. Labels are assigned in
/// row-major order of each component's first cell.
pub fn label_components(mut grid: ClassificationGrid) -> ClassificationGrid {
    let (nx, ny) = (grid.nx, grid.ny);
    let sig: Vec<Option<FatouSignature>> = grid
        .cells
        .iter()
        .map(|v| v.kind.fatou_signature())
        .collect();
    let mut labels = vec![0u32; nx * ny];
    let mut next = 1u32;
    let mut queue = VecDeque::new();
    for start in 0..nx * ny {
        let Some(s) = sig[start] else { continue };
        if labels[start] != 0 {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (i, j) = (idx % nx, idx / nx);
            let mut visit = |n: usize| {
                if labels[n] == 0 && sig[n] == Some(s) {
                    labels[n] = next;
                    queue.push_back(n);
                }
            };
            if i > 0 {
                visit(idx - 1);
            }
            if i + 1 < nx {
                visit(idx + 1);
            }
            if j > 0 {
                visit(idx - nx);
            }
            if j + 1 < ny {
                visit(idx + nx);
            }
        }
        next += 1;
    }
    grid.labels = labels;
    grid
}

/// Boolean raster, row-major with `j` outer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolRaster {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<bool>,
}

impl BoolRaster {
    pub fn new(nx: usize, ny: usize) -> Self {
        BoolRaster {
            nx,
            ny,
            data: vec![false; nx * ny],
        }
    }

    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                data.push(f(i, j));
            }
        }
        BoolRaster { nx, ny, data }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[j * self.nx + i] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// `self ⊆ other`.
    pub fn is_subset(&self, other: &BoolRaster) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// The raster's outer ring of cells.
    pub fn border(nx: usize, ny: usize) -> BoolRaster {
        BoolRaster::from_fn(nx, ny, |i, j| {
            i == 0 || j == 0 || i + 1 == nx || j + 1 == ny
        })
    }

    /// 8-connected components of the set cells.
    pub fn components8(&self) -> Vec<Vec<usize>> {
        let (nx, ny) = (self.nx, self.ny);
        let mut seen = vec![false; nx * ny];
        let mut out = Vec::new();
        for start in 0..nx * ny {
            if !self.data[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut k = 0;
            while k < comp.len() {
                let idx = comp[k];
                k += 1;
                let (i, j) = ((idx % nx) as i64, (idx / nx) as i64);
                for dj in -1..=1i64 {
                    for di in -1..=1i64 {
                        let (a, b) = (i + di, j + dj);
                        if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                            continue;
                        }
                        let n = b as usize * nx + a as usize;
                        if self.data[n] && !seen[n] {
                            seen[n] = true;
                            comp.push(n);
                        }
                    }
                }
            }
            out.push(comp);
        }
        out
    }
}

/// Raster filled closure: `mask` together with every complement cell that is
/// not 4-connected (through the complement) to a cell of `frame`.
pub fn fill_with_frame(mask: &BoolRaster, frame: &BoolRaster) -> BoolRaster {
    let (nx, ny) = (mask.nx, mask.ny);
    let mut reached = vec![false; nx * ny];
    let mut queue = VecDeque::new();
    for idx in 0..nx * ny {
        if frame.data[idx] && !mask.data[idx] {
            reached[idx] = true;
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        let (i, j) = (idx % nx, idx / nx);
        let mut visit = |n: usize| {
            if !reached[n] && !mask.data[n] {
                reached[n] = true;
                queue.push_back(n);
            }
        };
        if i > 0 {
            visit(idx - 1);
        }
        if i + 1 < nx {
            visit(idx + 1);
        }
        if j > 0 {
            visit(idx - nx);
        }
        if j + 1 < ny {
            visit(idx + nx);
        }
    }
    BoolRaster {
        nx,
        ny,
        data: reached.into_iter().map(|r| !r).collect(),
    }
}

/// [`fill_with_frame`] with the raster border as the frame at infinity.
pub fn fill_from_infinity(mask: &BoolRaster) -> BoolRaster {
    fill_with_frame(mask, &BoolRaster::border(mask.nx, mask.ny))
}

/// Exact Euclidean distance transform (cell centers) to a set of site cells,
/// with the nearest site recorded per cell.
#[derive(Debug, Clone)]
pub struct DistanceField {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    window: Window,
    sites: Vec<bool>,
    /// Squared distance and nearest site per cell; `None` when there are no sites.
    nearest: Vec<Option<(f64, usize)>>,
}

impl DistanceField {
    /// Distances to cells whose label differs from `label`.
    pub fn build(grid: &ClassificationGrid, label: u32) -> Self {
        Self::from_sites(grid, grid.labels.iter().map(|&l| l != label).collect())
    }

    /// Distances to Julia/undecided cells (label 0).
    pub fn julia(grid: &ClassificationGrid) -> Self {
        Self::from_sites(grid, grid.labels.iter().map(|&l| l == 0).collect())
    }

    fn from_sites(grid: &ClassificationGrid, sites: Vec<bool>) -> Self {
        let nearest = edt(grid.nx, grid.ny, grid.dx(), grid.dy(), |k| sites[k]);
        DistanceField {
            nx: grid.nx,
            ny: grid.ny,
            dx: grid.dx(),
            dy: grid.dy(),
            window: grid.window,
            sites,
            nearest,
        }
    }

    fn center(&self, idx: usize) -> Complex64 {
        Complex64::new(
            self.window.re_min + ((idx % self.nx) as f64 + 0.5) * self.dx,
            self.window.im_min + ((idx / self.nx) as f64 + 0.5) * self.dy,
        )
    }

    fn cell_index(&self, z: Complex64) -> Option<usize> {
        if !self.window.contains(z) {
            return None;
        }
        let i = (((z.re - self.window.re_min) / self.dx) as usize).min(self.nx - 1);
        let j = (((z.im - self.window.im_min) / self.dy) as usize).min(self.ny - 1);
        Some(j * self.nx + i)
    }

    /// `(lower, upper, nearest site center)` for `z`.
    ///
    /// With `D` the distance from `z` to the nearest site center
    /// and `h` the cell diagonal, `lower ≤ max(D - h, 0)` and `upper ≥ D + h`,
    /// with equality when `z` is a cell center. Both are infinite when no
    /// site exists.
    pub fn bounds(&self, z: Complex64) -> Result<(f64, f64, Option<Complex64>), RasterError> {
        let idx = self.cell_index(z).ok_or(RasterError::OutOfWindow { z })?;
        let h = self.dx.hypot(self.dy);
        let c = self.center(idx);
        if self.sites[idx] {
            return Ok((0.0, (z - c).norm() + h, Some(c)));
        }
        match self.nearest[idx] {
            None => Ok((f64::INFINITY, f64::INFINITY, None)),
            Some((d2, s)) => {
                let site = self.center(s);
                let lower = (d2.sqrt() - (z - c).norm() - h).max(0.0);
                let upper = (z - site).norm() + h;
                Ok((lower, upper, Some(site)))
            }
        }
    }
}

/// Two-pass (Felzenszwalb–Huttenlocher) squared EDT with feature indices on an
/// anisotropic grid.
fn edt(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    site: impl Fn(usize) -> bool,
) -> Vec<Option<(f64, usize)>> {
    // Column pass: nearest site row within each column.
    let mut col_row: Vec<Option<usize>> = vec![None; nx * ny];
    for i in 0..nx {
        let mut last: Option<usize> = None;
        for j in 0..ny {
            if site(j * nx + i) {
                last = Some(j);
            }
            col_row[j * nx + i] = last;
        }
        let mut last: Option<usize> = None;
        for j in (0..ny).rev() {
            if site(j * nx + i) {
                last = Some(j);
            }
            let better = match (col_row[j * nx + i], last) {
                (Some(a), Some(b)) => Some(if b - j < j - a { b } else { a }),
                (a, b) => a.or(b),
            };
            col_row[j * nx + i] = better;
        }
    }
    // Row pass: lower envelope of parabolas w·(i - q)² + g(q).
    let w = dx * dx;
    let mut out = vec![None; nx * ny];
    let mut env: Vec<usize> = Vec::with_capacity(nx);
    let mut bounds: Vec<f64> = Vec::with_capacity(nx + 1);
    for j in 0..ny {
        let g = |q: usize| {
            col_row[j * nx + q].map(|r| {
                let d = (r as f64 - j as f64) * dy;
                d * d
            })
        };
        env.clear();
        bounds.clear();
        for q in 0..nx {
            let Some(gq) = g(q) else { continue };
            let fq = gq + w * (q * q) as f64;
            loop {
                let Some(&v) = env.last() else {
                    env.push(q);
                    bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let fv = g(v).unwrap() + w * (v * v) as f64;
                let s = (fq - fv) / (2.0 * w * (q as f64 - v as f64));
                if s <= *bounds.last().unwrap() {
                    env.pop();
                    bounds.pop();
                } else {
                    env.push(q);
                    bounds.push(s);
                    break;
                }
            }
        }
        if env.is_empty() {
            continue;
        }
        let mut k = 0;
        for p in 0..nx {
            while k + 1 < env.len() && bounds[k + 1] < p as f64 {
                k += 1;
            }
            let q = env[k];
            let d = (p as f64 - q as f64) * dx;
            let d2 = d * d + g(q).unwrap();
            let r = col_row[j * nx + q].unwrap();
            out[j * nx + p] = Some((d2, r * nx + q));
        }
    }
    out
}

/// Two-sided distance from `z` to the nearest cell not sharing `z`'s label.
pub fn distance_to_julia(
    grid: &ClassificationGrid,
    z: Complex64,
) -> Result<(f64, f64), RasterError> {
    let (i, j) = grid.cell_of(z).ok_or(RasterError::OutOfWindow { z })?;
    let label = grid.label(i, j);
    if label == 0 {
        return Ok((0.0, (z - grid.center(i, j)).norm() + grid.cell_diagonal()));
    }
    let (lo, hi, _) = DistanceField::build(grid, label).bounds(z)?;
    Ok((lo, hi))
}
