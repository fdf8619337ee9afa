//! Periodic points on Fatou component boundaries, access curves landing at
//! them, and escape scans of boundary probes.
//!
//! The search follows the pullback construction: an orbit that returns near
//! its start gives an inverse branch `F` mapping a small disk into itself;
//! iterating `F` converges to a repelling periodic point, which Newton then
//! polishes.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branches::{
    apply_chain, component_signature, in_component, pullback_chain, BranchChain, BranchError,
};
use crate::catalog::{CatalogError, EntireMap};
use crate::orbit::{classify_orbit, OrbitParams, OrbitVerdict, VerdictKind, Window};
use crate::raster::{ClassificationGrid, DistanceField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundaryError {
    #[error("period must be at least 1")]
    BadPeriod,
    #[error("Newton for a period-{n} point did not converge from {seed}")]
    NewtonDiverged { seed: Complex64, n: usize },
    #[error("converged to a non-repelling cycle at {point} (|multiplier| = {modulus})")]
    ConvergedToFatouCycle { point: Complex64, modulus: f64 },
    #[error("no candidate orbit returned within the budget ({candidates} candidates tried)")]
    NoReturnWithinBudget { candidates: usize },
    #[error("no Julia-adjacent cells inside the seed region")]
    NoCandidateCells,
    #[error("access-curve vertex {index} at {vertex} left the component: {reason}")]
    VertexLeftFatou {
        index: usize,
        vertex: Complex64,
        reason: String,
    },
    #[error("starting point {z} is not in a Fatou component of the grid")]
    StartNotFatou { z: Complex64 },
    #[error("map has no parabolic fixed point")]
    NotParabolic,
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicBoundaryPoint {
    pub point: Complex64,
    pub period: usize,
    pub multiplier: Complex64,
    pub residual: f64,
    pub repelling: bool,
    /// Distance to the nearest Julia-classified cell center, when a grid was given.
    pub boundary_distance: Option<f64>,
}

impl PeriodicBoundaryPoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("periodic point serializes")
    }
}

const NEWTON_STEPS: usize = 200;
const HALVINGS: usize = 8;

fn periodic_residual(
    map: &EntireMap,
    z: Complex64,
    n: usize,
) -> Result<(Complex64, Complex64), CatalogError> {
    let (w, d) = map.iterate_with_derivative(z, n)?;
    Ok((w - z, d))
}

fn newton_raw(map: &EntireMap, seed: Complex64, n: usize) -> Result<Complex64, BoundaryError> {
    let diverged = BoundaryError::NewtonDiverged { seed, n };
    let mut z = seed;
    let (mut g, mut dg) = periodic_residual(map, z, n).map_err(|_| diverged.clone())?;
    for _ in 0..NEWTON_STEPS {
        let scale = z.norm().max(1.0);
        if g.norm() <= 1e-15 * scale {
            return Ok(z);
        }
        let denom = dg - 1.0;
        if denom.norm() == 0.0 {
            return Err(diverged);
        }
        let step = g / denom;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=HALVINGS {
            let cand = z - step * t;
            if let Ok((gc, dc)) = periodic_residual(map, cand, n) {
                if gc.norm() < g.norm() {
                    accepted = Some((cand, gc, dc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, gc, dc)) = accepted else {
            // No decrease even after halving: rounding floor, or a stall.
            return if g.norm() <= 1e-11 * scale {
                Ok(z)
            } else {
                Err(diverged)
            };
        };
        let moved = (cand - z).norm();
        z = cand;
        g = gc;
        dg = dc;
        if moved <= 1e-16 * scale {
            return Ok(z);
        }
    }
    if g.norm() <= 1e-11 * z.norm().max(1.0) {
        Ok(z)
    } else {
        Err(diverged)
    }
}

fn boundary_distance(field: Option<&DistanceField>, z: Complex64) -> Option<f64> {
    let (_, _, site) = field?.bounds(z).ok()?;
    site.map(|s| (z - s).norm())
}

fn finish(
    map: &EntireMap,
    z: Complex64,
    n: usize,
    field: Option<&DistanceField>,
) -> Result<PeriodicBoundaryPoint, BoundaryError> {
    let (g, multiplier) = periodic_residual(map, z, n)?;
    let residual = g.norm();
    if !(residual < 1e-10) {
        return Err(BoundaryError::NewtonDiverged { seed: z, n });
    }
    let modulus = multiplier.norm();
    if modulus < 1.0 - 1e-9 {
        return Err(BoundaryError::ConvergedToFatouCycle { point: z, modulus });
    }
    Ok(PeriodicBoundaryPoint {
        point: z,
        period: n,
        multiplier,
        residual,
        repelling: modulus > 1.0 + 1e-9,
        boundary_distance: boundary_distance(field, z),
    })
}

/// Damped Newton on `fⁿ(z) − z`.
pub fn newton_periodic(
    map: &EntireMap,
    seed: Complex64,
    n: usize,
    grid: Option<&ClassificationGrid>,
) -> Result<PeriodicBoundaryPoint, BoundaryError> {
    if n == 0 {
        return Err(BoundaryError::BadPeriod);
    }
    let field = grid.map(DistanceField::julia);
    let z = newton_raw(map, seed, n)?;
    finish(map, z, n, field.as_ref())
}

/// Smallest `d | n` with `|f^d(z) − z| < 1e−8`.
pub fn minimal_period(map: &EntireMap, z: Complex64, n: usize) -> usize {
    (1..n)
        .filter(|d| n.is_multiple_of(*d))
        .find(|&d| map.iterate(z, d).is_ok_and(|w| (w - z).norm() < 1e-8))
        .unwrap_or(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Return-disk radius in grid cells.
    pub return_cells: f64,
    /// Cap on contraction iterations of the pullback.
    pub pullback_budget: usize,
    /// Shuffle candidate cells with this seed instead of ordering by distance.
    pub shuffle_seed: Option<u64>,
    pub max_candidates: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            return_cells: 5.0,
            pullback_budget: 500,
            shuffle_seed: None,
            max_candidates: 400,
        }
    }
}

/// Centers of cells in `region` whose label differs from a 4-neighbour's,
/// nearest to the region center first.
fn candidate_cells(
    grid: &ClassificationGrid,
    region: &Window,
    shuffle: Option<u64>,
) -> Vec<Complex64> {
    let mut out: Vec<(f64, usize, Complex64)> = Vec::new();
    let center = region.center();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let z = grid.center(i, j);
            if !region.contains(z) {
                continue;
            }
            let l = grid.label(i, j);
            let mut edge = false;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a >= 0 && b >= 0 && (a as usize) < grid.nx && (b as usize) < grid.ny {
                    edge |= grid.label(a as usize, b as usize) != l;
                }
            }
            if edge {
                out.push(((z - center).norm(), grid.index(i, j), z));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut pts: Vec<Complex64> = out.into_iter().map(|t| t.2).collect();
    if let Some(seed) = shuffle {
        pts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    pts
}

fn attempt(
    map: &EntireMap,
    z0: Complex64,
    max_period: usize,
    r: f64,
    opts: &SearchOptions,
    field: &DistanceField,
    cell: f64,
) -> Result<PeriodicBoundaryPoint, BoundaryError> {
    let mut orbit = vec![z0];
    let mut z = z0;
    let mut returned = false;
    for _ in 0..max_period {
        z = map.eval(z)?;
        orbit.push(z);
        if (z - z0).norm() < r {
            returned = true;
            break;
        }
    }
    if !returned {
        return Err(BoundaryError::NoReturnWithinBudget { candidates: 1 });
    }
    let m = orbit.len() - 1;
    let chain = pullback_chain(map, &orbit)?;
    // Contraction stage: only a globalizer for Newton.
    let mut w = z0;
    for _ in 0..opts.pullback_budget {
        let next = apply_chain(&chain, w)?;
        let moved = (next - w).norm();
        w = next;
        if moved < 1e-12 {
            break;
        }
    }
    let w = newton_raw(map, w, m)?;
    let period = minimal_period(map, w, m);
    let w = if period < m {
        newton_raw(map, w, period)?
    } else {
        w
    };
    let p = finish(map, w, period, Some(field))?;
    if !p.repelling {
        return Err(BoundaryError::ConvergedToFatouCycle {
            point: p.point,
            modulus: p.multiplier.norm(),
        });
    }
    match p.boundary_distance {
        Some(d) if d <= 2.0 * cell => Ok(p),
        _ => Err(BoundaryError::NoReturnWithinBudget { candidates: 1 }),
    }
}

/// Searches Julia-adjacent cells of `region` for a repelling periodic point of
/// period at most `max_period` on a component boundary.
pub fn find_periodic_boundary_point(
    map: &EntireMap,
    grid: &ClassificationGrid,
    region: &Window,
    max_period: usize,
    opts: &SearchOptions,
) -> Result<PeriodicBoundaryPoint, BoundaryError> {
    if max_period == 0 {
        return Err(BoundaryError::BadPeriod);
    }
    let candidates = candidate_cells(grid, region, opts.shuffle_seed);
    if candidates.is_empty() {
        return Err(BoundaryError::NoCandidateCells);
    }
    let field = DistanceField::julia(grid);
    let cell = grid.cell_size();
    let r = opts.return_cells * cell;
    let mut tried = 0;
    for &z0 in candidates.iter().take(opts.max_candidates) {
        tried += 1;
        if let Ok(p) = attempt(map, z0, max_period, r, opts, &field, cell) {
            return Ok(p);
        }
    }
    Err(BoundaryError::NoReturnWithinBudget { candidates: tried })
}

/// Independent searches over several regions, in parallel.
pub fn find_in_regions(
    map: &EntireMap,
    grid: &ClassificationGrid,
    regions: &[Window],
    max_period: usize,
    opts: &SearchOptions,
) -> Vec<Result<PeriodicBoundaryPoint, BoundaryError>> {
    regions
        .par_iter()
        .map(|r| find_periodic_boundary_point(map, grid, r, max_period, opts))
        .collect()
}

/// The branch of `f^{−period}` fixing `p`.
pub fn periodic_chain(
    map: &EntireMap,
    p: &PeriodicBoundaryPoint,
) -> Result<BranchChain, BoundaryError> {
    let mut orbit = vec![p.point];
    let mut z = p.point;
    for _ in 0..p.period {
        z = map.eval(z)?;
        orbit.push(z);
    }
    // Close the cycle exactly so the chain fixes p.
    *orbit.last_mut().expect("period ≥ 1") = p.point;
    Ok(pullback_chain(map, &orbit)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessCurve {
    pub vertices: Vec<Complex64>,
    /// Pullback generation of each vertex (0 for the initial segment).
    pub generation: Vec<usize>,
    pub landing_point: Complex64,
    pub max_step_gap: f64,
    /// `|F^m(z0) − p|` for `m = 0..=steps`.
    pub gaps: Vec<f64>,
}

impl AccessCurve {
    /// Columns `m, re, im, gap` with `gap = |vertex − landing_point|`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "m,re,im,gap")?;
        for (v, m) in self.vertices.iter().zip(&self.generation) {
            writeln!(
                out,
                "{},{},{},{:e}",
                m,
                v.re,
                v.im,
                (v - self.landing_point).norm()
            )?;
        }
        Ok(())
    }

    /// `g_{m+1}/g_m`.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.gaps.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Builds `γ ∪ F(γ) ∪ F²(γ) ∪ …` with `γ = [z0, F(z0)]`, `F` the branch of
/// `f^{−period}` fixing `p`, and checks every vertex stays in `z0`'s component.
pub fn access_curve(
    map: &EntireMap,
    p: &PeriodicBoundaryPoint,
    z0: Complex64,
    steps: usize,
    grid: &ClassificationGrid,
) -> Result<AccessCurve, BoundaryError> {
    let chain = periodic_chain(map, p)?;
    access_curve_with_chain(&chain, p.point, z0, steps, grid)
}

/// As [`access_curve`] with a caller-supplied chain.
pub fn access_curve_with_chain(
    chain: &BranchChain,
    landing: Complex64,
    z0: Complex64,
    steps: usize,
    grid: &ClassificationGrid,
) -> Result<AccessCurve, BoundaryError> {
    let label = grid
        .label_at(z0)
        .filter(|&l| l != 0)
        .ok_or(BoundaryError::StartNotFatou { z: z0 })?;
    let signature = component_signature(grid, label);
    let z1 = apply_chain(chain, z0)?;
    let pieces = ((z1 - z0).norm() / 0.05).ceil().max(1.0) as usize;
    let gamma: Vec<Complex64> = (0..=pieces)
        .map(|k| z0 + (z1 - z0) * (k as f64 / pieces as f64))
        .collect();

    let mut vertices = gamma.clone();
    let mut generation = vec![0; gamma.len()];
    let mut gaps = vec![(z0 - landing).norm()];
    let mut segment = gamma;
    for m in 1..=steps {
        let next: Result<Vec<Complex64>, BranchError> =
            segment.par_iter().map(|&z| apply_chain(chain, z)).collect();
        segment = next?;
        gaps.push((segment[0] - landing).norm());
        vertices.extend(segment.iter().skip(1));
        generation.extend(std::iter::repeat_n(m, segment.len() - 1));
    }
    let check: Vec<(usize, String)> = vertices
        .par_iter()
        .enumerate()
        .filter_map(|(i, &v)| {
            in_component(grid, label, signature, v)
                .err()
                .map(|f| (i, serde_json::to_string(&f).unwrap_or_default()))
        })
        .collect();
    if let Some((index, reason)) = check.into_iter().next() {
        return Err(BoundaryError::VertexLeftFatou {
            index,
            vertex: vertices[index],
            reason,
        });
    }
    let max_step_gap = vertices
        .windows(2)
        .map(|w| (w[1] - w[0]).norm())
        .fold(0.0, f64::max);
    Ok(AccessCurve {
        vertices,
        generation,
        landing_point: landing,
        max_step_gap,
        gaps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub probe: Complex64,
    pub verdict: OrbitVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeScan {
    pub escaping: Vec<ProbeOutcome>,
    pub non_escaping: Vec<ProbeOutcome>,
    /// Probes on the periodic orbit itself.
    pub periodic: Vec<Complex64>,
}

/// Classifies the orbits of boundary probes sharing a component with `p`
/// (when given; probes on its cycle are exempt).
pub fn escaping_component_scan(
    map: &EntireMap,
    p: Option<&PeriodicBoundaryPoint>,
    probes: &[Complex64],
    params: &OrbitParams,
) -> EscapeScan {
    let cycle: Vec<Complex64> = match p {
        Some(p) => (0..p.period)
            .scan(p.point, |z, _| {
                let cur = *z;
                *z = map.eval(cur).unwrap_or(cur);
                Some(cur)
            })
            .collect(),
        None => Vec::new(),
    };
    let mut scan = EscapeScan {
        escaping: Vec::new(),
        non_escaping: Vec::new(),
        periodic: Vec::new(),
    };
    let outcomes: Vec<Option<ProbeOutcome>> = probes
        .par_iter()
        .map(|&probe| {
            if cycle.iter().any(|c| (c - probe).norm() < 1e-9) {
                None
            } else {
                Some(ProbeOutcome {
                    probe,
                    verdict: classify_orbit(map, probe, params),
                })
            }
        })
        .collect();
    for (probe, o) in probes.iter().zip(outcomes) {
        match o {
            None => scan.periodic.push(*probe),
            Some(o) if o.verdict.kind.is_escaping() => scan.escaping.push(o),
            Some(o) => scan.non_escaping.push(o),
        }
    }
    scan
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicScan {
    pub parabolic_point: Complex64,
    pub escaping: Vec<ProbeOutcome>,
    /// Probes converging to the parabolic point: interior controls.
    pub interior: Vec<ProbeOutcome>,
    pub other: Vec<ProbeOutcome>,
    pub exempt: Vec<Complex64>,
}

/// Escape scan around a parabolic fixed point.
pub fn parabolic_boundary_scan(
    map: &EntireMap,
    probes: &[Complex64],
    params: &OrbitParams,
) -> Result<ParabolicScan, BoundaryError> {
    let p = map.parabolic_point().ok_or(BoundaryError::NotParabolic)?;
    let mut scan = ParabolicScan {
        parabolic_point: p,
        escaping: Vec::new(),
        interior: Vec::new(),
        other: Vec::new(),
        exempt: Vec::new(),
    };
    for &probe in probes {
        if (probe - p).norm() < 1e-12 {
            scan.exempt.push(probe);
            continue;
        }
        let verdict = classify_orbit(map, probe, params);
        let o = ProbeOutcome { probe, verdict };
        match verdict.kind {
            VerdictKind::Escaping { .. } => scan.escaping.push(o),
            VerdictKind::BoundedParabolic { .. } => scan.interior.push(o),
            _ => scan.other.push(o),
        }
    }
    Ok(scan)
}
