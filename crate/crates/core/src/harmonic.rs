//! Walk-on-spheres estimates of harmonic measure on a raster component.
//!
//! All numbers are budgeted estimates: the boundary is the raster boundary of
//! the component at the walk's stopping scale, and hit orbits are classified
//! with a finite budget.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::orbit::{
    classify_orbit, forward_orbit, OrbitVerdict, VerdictClass, VerdictKind, Window,
};
use crate::raster::{ClassificationGrid, DistanceField};

/// Hard cap on walk steps; walk-on-spheres needs O(log(1/ε)) steps typically.
const MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicError {
    #[error("walk left the grid window")]
    LeftWindow,
    #[error("walk did not reach the boundary within {MAX_STEPS} steps")]
    StepBudget,
    #[error("basepoint {z} is not in a Fatou component of the grid")]
    BasepointNotFatou { z: Complex64 },
    #[error("walk_eps {eps} is below two grid cells ({min})")]
    WalkEpsTooSmall { eps: f64, min: f64 },
    #[error("at least 100 samples are required, got {n}")]
    TooFewSamples { n: usize },
    #[error("{exits} of {samples} walks left the window")]
    TooManyWindowExits { exits: usize, samples: usize },
}

/// One walk. The stream for `sample_index` is independent of thread layout.
pub fn rng_for(seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng
}

/// Precomputed distance field for walks inside one component.
pub struct Walker<'a> {
    grid: &'a ClassificationGrid,
    field: DistanceField,
    cap: f64,
    label: u32,
}

impl<'a> Walker<'a> {
    pub fn new(grid: &'a ClassificationGrid, basepoint: Complex64) -> Result<Self, HarmonicError> {
        let label = grid
            .label_at(basepoint)
            .filter(|&l| l != 0)
            .ok_or(HarmonicError::BasepointNotFatou { z: basepoint })?;
        Ok(Walker {
            grid,
            field: DistanceField::build(grid, label),
            cap: grid.window.diagonal() / 4.0,
            label,
        })
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    /// Walks from `start` until the conservative distance to the boundary is
    /// below `eps`; returns the nearest boundary cell center.
    pub fn hit(
        &self,
        start: Complex64,
        eps: f64,
        rng: &mut impl Rng,
    ) -> Result<Complex64, HarmonicError> {
        let mut z = start;
        for _ in 0..MAX_STEPS {
            let (lower, _, site) = self
                .field
                .bounds(z)
                .map_err(|_| HarmonicError::LeftWindow)?;
            if lower < eps {
                return site.ok_or(HarmonicError::LeftWindow);
            }
            let r = lower.min(self.cap);
            z += Complex64::from_polar(r, TAU * rng.random::<f64>());
            if !self.grid.window.contains(z) {
                return Err(HarmonicError::LeftWindow);
            }
        }
        Err(HarmonicError::StepBudget)
    }
}

/// A single boundary hit drawn with stream `rng_stream` of `seed`.
pub fn sample_boundary_hit(
    grid: &ClassificationGrid,
    basepoint: Complex64,
    walk_eps: f64,
    seed: u64,
    rng_stream: u64,
) -> Result<Complex64, HarmonicError> {
    check_eps(grid, walk_eps)?;
    Walker::new(grid, basepoint)?.hit(basepoint, walk_eps, &mut rng_for(seed, rng_stream))
}

fn check_eps(grid: &ClassificationGrid, eps: f64) -> Result<(), HarmonicError> {
    let min = 2.0 * grid.cell_size();
    if !(eps >= min * (1.0 - 1e-12)) {
        return Err(HarmonicError::WalkEpsTooSmall { eps, min });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSettings {
    pub basepoint: Complex64,
    pub n_samples: usize,
    pub walk_eps: f64,
    pub orbit_budget: usize,
    pub targets: Vec<Complex64>,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub sample_id: usize,
    pub point: Complex64,
    pub verdict: OrbitVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub escaping: usize,
    pub bounded: usize,
    pub undecided: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub escaping: f64,
    pub bounded: f64,
    pub undecided: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub walk_eps: f64,
    pub orbit_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub estimate_kind: String,
    pub basepoint: Complex64,
    pub samples: usize,
    pub window_exits: usize,
    pub counts: Counts,
    pub fractions: Fractions,
    /// Max over targets of the min distance from hit orbits to the target.
    pub dense_orbit_stat: Option<f64>,
    pub rng_seed: u64,
    pub budgets: Budgets,
    pub hits: Vec<Hit>,
}

impl MeasureReport {
    /// Columns `sample_id, hit_re, hit_im, verdict, orbit_iterations`.
    pub fn write_hits_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "sample_id,hit_re,hit_im,verdict,orbit_iterations")?;
        for h in &self.hits {
            writeln!(
                out,
                "{},{},{},{},{}",
                h.sample_id,
                h.point.re,
                h.point.im,
                h.verdict.kind.tag(),
                h.verdict.iterations_used
            )?;
        }
        Ok(())
    }
}

/// Draws hits, classifies their orbits and aggregates.
///
/// Hit orbits are rerun with the grid's map at `orbit_budget`; grids without a
/// source use the hit cell's stored verdict.
pub fn measure_report(
    grid: &ClassificationGrid,
    s: &MeasureSettings,
) -> Result<MeasureReport, HarmonicError> {
    if s.n_samples < 100 {
        return Err(HarmonicError::TooFewSamples { n: s.n_samples });
    }
    check_eps(grid, s.walk_eps)?;
    let walker = Walker::new(grid, s.basepoint)?;
    let draws: Vec<Result<Complex64, HarmonicError>> = (0..s.n_samples)
        .into_par_iter()
        .map(|i| walker.hit(s.basepoint, s.walk_eps, &mut rng_for(s.rng_seed, i as u64)))
        .collect();
    let exits = draws.iter().filter(|d| d.is_err()).count();
    if 2 * exits > s.n_samples {
        return Err(HarmonicError::TooManyWindowExits {
            exits,
            samples: s.n_samples,
        });
    }
    let params = grid
        .source
        .as_ref()
        .map(|src| (src.map, src.params.with_budget(s.orbit_budget)));
    let hits: Vec<Hit> = draws
        .into_par_iter()
        .enumerate()
        .filter_map(|(i, d)| d.ok().map(|p| (i, p)))
        .map(|(sample_id, point)| {
            let verdict = match &params {
                Some((map, p)) => classify_orbit(map, point, p),
                None => {
                    let (i, j) = grid.cell_of(point).expect("hits are cell centers");
                    *grid.verdict(i, j)
                }
            };
            Hit {
                sample_id,
                point,
                verdict,
            }
        })
        .collect();
    let mut counts = Counts {
        escaping: 0,
        bounded: 0,
        undecided: 0,
    };
    for h in &hits {
        match h.verdict.kind.class() {
            VerdictClass::Escaping => counts.escaping += 1,
            VerdictClass::Bounded => counts.bounded += 1,
            VerdictClass::Undecided => counts.undecided += 1,
        }
    }
    let n = hits.len() as f64;
    let fractions = Fractions {
        escaping: counts.escaping as f64 / n,
        bounded: counts.bounded as f64 / n,
        undecided: counts.undecided as f64 / n,
    };
    let dense_orbit_stat = (!s.targets.is_empty()).then(|| {
        let orbits: Vec<Vec<Complex64>> = hits
            .par_iter()
            .map(|h| match &params {
                Some((map, _)) => forward_orbit(map, h.point, s.orbit_budget),
                None => vec![h.point],
            })
            .collect();
        s.targets
            .iter()
            .map(|t| {
                orbits
                    .iter()
                    .flatten()
                    .map(|z| (z - t).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    });
    Ok(MeasureReport {
        estimate_kind: "budgeted estimate".into(),
        basepoint: s.basepoint,
        samples: s.n_samples,
        window_exits: exits,
        counts,
        fractions,
        dense_orbit_stat,
        rng_seed: s.rng_seed,
        budgets: Budgets {
            walk_eps: s.walk_eps,
            orbit_budget: s.orbit_budget,
        },
        hits,
    })
}

/// Unit-disk toy raster: inside is one Fatou component, outside carries
/// `outside` (a second attracting signature by default).
pub fn disk_toy_grid(n: usize, outside: VerdictKind) -> ClassificationGrid {
    let inside = VerdictKind::BoundedAttracting {
        attractor: 0,
        target: Complex64::new(0.0, 0.0),
        period: 1,
    };
    ClassificationGrid::from_fn(Window::new(-1.25, 1.25, -1.25, 1.25), n, n, |z| {
        if z.norm() < 1.0 {
            inside
        } else {
            outside
        }
    })
    .expect("valid toy raster")
}

/// `P(arg ≤ θ)` for harmonic measure of the unit disk seen from real `r`, `θ ∈ (−π, π]`.
pub fn poisson_cdf(r: f64, theta: f64) -> f64 {
    0.5 + (((1.0 + r) / (1.0 - r)) * (theta / 2.0).tan()).atan() / PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub samples: usize,
    pub chi2: f64,
    pub chi2_p: f64,
    pub ks_distance: f64,
    pub passed: bool,
}

pub const CHI2_BINS: usize = 16;

/// Runs the two disk oracles: uniform hits from 0 (χ² over 16 bins, p > 0.01)
/// and Poisson-kernel hits from 0.5 (KS < 0.03).
pub fn calibrate(samples: usize, seed: u64) -> Result<Calibration, HarmonicError> {
    let n = 500;
    let grid = disk_toy_grid(
        n,
        VerdictKind::BoundedAttracting {
            attractor: 1,
            target: Complex64::new(2.0, 0.0),
            period: 1,
        },
    );
    let eps = 2.0 * grid.cell_size();
    let draw = |base: Complex64, seed: u64| -> Result<Vec<f64>, HarmonicError> {
        let w = Walker::new(&grid, base)?;
        (0..samples)
            .into_par_iter()
            .map(|i| {
                w.hit(base, eps, &mut rng_for(seed, i as u64))
                    .map(|h| h.arg())
            })
            .collect()
    };
    let angles = draw(Complex64::new(0.0, 0.0), seed)?;
    let mut bins = [0usize; CHI2_BINS];
    for a in &angles {
        let k = (((a + PI) / TAU) * CHI2_BINS as f64).floor() as usize;
        bins[k.min(CHI2_BINS - 1)] += 1;
    }
    let expected = samples as f64 / CHI2_BINS as f64;
    let chi2: f64 = bins
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let chi2_p = 1.0
        - ChiSquared::new((CHI2_BINS - 1) as f64)
            .expect("dof > 0")
            .cdf(chi2);

    let mut angles = draw(Complex64::new(0.5, 0.0), seed.wrapping_add(1))?;
    angles.sort_by(f64::total_cmp);
    let m = angles.len() as f64;
    let ks_distance = angles
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let f = poisson_cdf(0.5, a);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max);
    Ok(Calibration {
        samples,
        chi2,
        chi2_p,
        ks_distance,
        passed: chi2_p > 0.01 && ks_distance < 0.03,
    })
}
