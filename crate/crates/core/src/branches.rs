//! Inverse branches, pullback chains along orbits, and the proper-invertibility probe.
//!
//! Branch indices are Lambert W indices for the translation families and
//! `z e^{-z}`: a preimage `z` of `w` under `z + c + e^{-z}` is
//! `w - c + W_k(-e^{c-w})`, so `-e^{-z} = W_k(-e^{c-w})`; for `z e^{-z}` the
//! preimages are `-W_k(-w)`. For `λ e^z`, `k` is the `2πik` summand of
//! `log(w/λ)`.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, EntireMap};
use crate::lambert::{branch_of, lambert_w, LambertError};
use crate::orbit::FatouSignature;
use crate::raster::ClassificationGrid;

/// Distance from a critical or asymptotic value below which inversion refuses.
pub const VALUE_TOL: f64 = 1e-12;
const NEWTON_STEPS: usize = 200;
const HALVINGS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BranchError {
    #[error("{w} is a critical value; the preimages merge")]
    CriticalValueCollision { w: Complex64 },
    #[error("{w} is an asymptotic value; no inverse branch is defined")]
    AsymptoticValue { w: Complex64 },
    #[error("damped Newton for a preimage of {w} diverged")]
    NewtonDiverged { w: Complex64 },
    #[error("step {step}: candidate preimages are {separation:e} apart")]
    AmbiguousBranch { step: usize, separation: f64 },
    #[error("step {step}: image is {distance:e} from its anchor, beyond trust radius {trust:e}")]
    BranchJumpDetected {
        step: usize,
        distance: f64,
        trust: f64,
    },
    #[error("orbit point {step} does not map to the next one (residual {residual:e})")]
    NotAnOrbit { step: usize, residual: f64 },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Lambert(#[from] LambertError),
}

/// How to choose among the preimages of a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSelector {
    Index(i64),
    Seed(Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preimage {
    pub z: Complex64,
    pub branch: i64,
    pub residual: f64,
}

fn scale(w: Complex64) -> f64 {
    w.norm().max(1.0)
}

fn is_asymptotic_value(map: &EntireMap, w: Complex64) -> bool {
    matches!(map, EntireMap::ExpLambda { .. } | EntireMap::ZExp) && w.norm() < VALUE_TOL
}

/// Whether `w` lies within [`VALUE_TOL`] of a critical value.
pub fn is_critical_value(map: &EntireMap, w: Complex64) -> bool {
    match map {
        EntireMap::ExpLambda { .. } => false,
        EntireMap::ZExp => (w - Complex64::new((-1.0f64).exp(), 0.0)).norm() < VALUE_TOL,
        _ => {
            let d = w - map.translation().unwrap_or(0.0) - 1.0;
            let k = (d.im / TAU).round();
            (d - Complex64::new(0.0, TAU * k)).norm() < VALUE_TOL * scale(w)
        }
    }
}

/// Branch index of `z` as a preimage of `f(z)`.
pub fn branch_index(map: &EntireMap, z: Complex64) -> i64 {
    match map {
        // Im z - 2πk ∈ (-π, π].
        EntireMap::ExpLambda { .. } => ((z.im + PI) / TAU).ceil() as i64 - 1,
        EntireMap::ZExp => {
            let w = -z;
            branch_of(w, w * w.exp())
        }
        _ => {
            let w = -(-z).exp();
            branch_of(w, w * w.exp())
        }
    }
}

fn closed_form(map: &EntireMap, w: Complex64, k: i64) -> Result<Complex64, BranchError> {
    let two_pi_k = Complex64::new(0.0, TAU * k as f64);
    match *map {
        EntireMap::ExpLambda { lambda } => Ok((w / lambda).ln() + two_pi_k),
        EntireMap::ZExp => Ok(-lambert_w(k, -w)?),
        _ => {
            let c = map.translation().unwrap_or(0.0);
            let e = (c - w).exp();
            if !e.is_finite() {
                return Err(CatalogError::Overflow { z: w }.into());
            }
            Ok(w - c + lambert_w(k, -e)?)
        }
    }
}

/// Damped Newton on `f(z) - w`: each step is halved up to eight times until
/// the residual decreases.
fn newton(map: &EntireMap, w: Complex64, mut z: Complex64) -> Result<Complex64, BranchError> {
    let tol = VALUE_TOL * scale(w);
    let mut r = match map.eval(z) {
        Ok(v) => (v - w).norm(),
        Err(_) => f64::INFINITY,
    };
    for _ in 0..NEWTON_STEPS {
        if r <= tol {
            return Ok(z);
        }
        let Ok((v, d)) = map.eval_with_derivative(z) else {
            return Err(BranchError::NewtonDiverged { w });
        };
        if d.norm() == 0.0 {
            return Err(BranchError::NewtonDiverged { w });
        }
        let mut step = (v - w) / d;
        let mut accepted = false;
        for _ in 0..=HALVINGS {
            let trial = z - step;
            if let Ok(tv) = map.eval(trial) {
                let tr = (tv - w).norm();
                if tr < r {
                    z = trial;
                    r = tr;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // Stagnation at rounding level still counts when close enough.
            return if r <= 10.0 * tol {
                Ok(z)
            } else {
                Err(BranchError::NewtonDiverged { w })
            };
        }
    }
    if r <= tol {
        Ok(z)
    } else {
        Err(BranchError::NewtonDiverged { w })
    }
}

/// A preimage of `w`, by branch index or by Newton from a seed.
pub fn inverse(
    map: &EntireMap,
    w: Complex64,
    sel: BranchSelector,
) -> Result<Preimage, BranchError> {
    if !w.is_finite() {
        return Err(CatalogError::Overflow { z: w }.into());
    }
    if is_asymptotic_value(map, w) {
        return Err(BranchError::AsymptoticValue { w });
    }
    let z = match sel {
        BranchSelector::Index(k) => {
            let z0 = closed_form(map, w, k)?;
            // Polish, but never let Newton walk off the branch.
            match newton(map, w, z0) {
                Ok(z) if branch_index(map, z) == k || (z - z0).norm() < 1e-9 * scale(z0) => z,
                _ => z0,
            }
        }
        BranchSelector::Seed(seed) => {
            if is_critical_value(map, w) {
                return Err(BranchError::CriticalValueCollision { w });
            }
            newton(map, w, seed)?
        }
    };
    let residual = (map.eval(z)? - w).norm();
    if residual > VALUE_TOL * scale(w) && !is_critical_value(map, w) {
        return Err(BranchError::NewtonDiverged { w });
    }
    Ok(Preimage {
        z,
        branch: branch_index(map, z),
        residual,
    })
}

/// Distance from `z` (a preimage of `w` on branch `k`) to the nearest other
/// preimage among nearby branch indices.
pub fn preimage_separation(map: &EntireMap, w: Complex64, z: Complex64, k: i64) -> f64 {
    if let EntireMap::ExpLambda { .. } = map {
        return TAU;
    }
    (k - 3..=k + 3)
        .filter(|&j| j != k)
        .filter_map(|j| closed_form(map, w, j).ok())
        .map(|p| (p - z).norm())
        .fold(f64::INFINITY, f64::min)
}

/// One single-valued inverse step of a [`BranchChain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainStep {
    pub k: i64,
    /// The known preimage this step produces from the previous anchor.
    pub anchor: Complex64,
    pub residual: f64,
}

/// A composed inverse branch `F_n` along a forward orbit `z_0, …, z_n`.
///
/// Steps are stored in application order: step 0 sends `terminal = z_n` to
/// `z_{n-1}`, and the last step produces `z_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchChain {
    pub map: EntireMap,
    pub terminal: Complex64,
    pub trust_radius: f64,
    pub steps: Vec<ChainStep>,
}

impl BranchChain {
    pub fn identity(map: EntireMap, at: Complex64) -> Self {
        BranchChain {
            map,
            terminal: at,
            trust_radius: f64::INFINITY,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The point the chain sends `terminal` to.
    pub fn origin(&self) -> Complex64 {
        self.steps.last().map_or(self.terminal, |s| s.anchor)
    }

    /// The underlying orbit `z_0, …, z_n`.
    pub fn orbit(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self.steps.iter().rev().map(|s| s.anchor).collect();
        out.push(self.terminal);
        out
    }

    /// Replaces one step's branch index, for negative tests and experiments.
    /// The anchor is moved to the new branch's preimage so the chain stays consistent.
    pub fn with_branch(&self, step: usize, k: i64) -> Result<Self, BranchError> {
        let mut out = self.clone();
        let target = if step == 0 {
            self.terminal
        } else {
            self.steps[step - 1].anchor
        };
        let p = inverse(&self.map, target, BranchSelector::Index(k))?;
        out.steps[step] = ChainStep {
            k,
            anchor: p.z,
            residual: p.residual,
        };
        for s in step + 1..out.steps.len() {
            let target = out.steps[s - 1].anchor;
            let p = inverse(&self.map, target, BranchSelector::Index(out.steps[s].k))?;
            out.steps[s].anchor = p.z;
            out.steps[s].residual = p.residual;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain serializes")
    }

    /// Parses and validates a chain: anchors must form an orbit and the trust radius must be positive.
    pub fn from_json(text: &str) -> Result<Self, BranchError> {
        let chain: BranchChain =
            serde_json::from_str(text).map_err(|e| BranchError::InvalidChain(e.to_string()))?;
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<(), BranchError> {
        if !(self.trust_radius > 0.0) {
            return Err(BranchError::InvalidChain(
                "trust radius must be positive".into(),
            ));
        }
        if !self.terminal.is_finite() {
            return Err(BranchError::InvalidChain(
                "terminal point is not finite".into(),
            ));
        }
        let mut prev = self.terminal;
        for (i, s) in self.steps.iter().enumerate() {
            if !s.anchor.is_finite() {
                return Err(BranchError::InvalidChain(format!(
                    "anchor {i} is not finite"
                )));
            }
            let r = match self.map.eval(s.anchor) {
                Ok(v) => (v - prev).norm(),
                Err(_) => f64::INFINITY,
            };
            if !(r <= 1e-8 * scale(prev)) {
                return Err(BranchError::NotAnOrbit {
                    step: i,
                    residual: r,
                });
            }
            prev = s.anchor;
        }
        Ok(())
    }
}

/// Builds the chain of inverse branches that undoes the orbit `z_0, …, z_m`.
pub fn pullback_chain(map: &EntireMap, orbit: &[Complex64]) -> Result<BranchChain, BranchError> {
    let Some(&terminal) = orbit.last() else {
        return Err(BranchError::InvalidChain("empty orbit".into()));
    };
    let m = orbit.len() - 1;
    let mut steps = Vec::with_capacity(m);
    let mut trust = f64::INFINITY;
    for (s, i) in (0..m).rev().enumerate() {
        let (z, target) = (orbit[i], orbit[i + 1]);
        let residual = (map.eval(z)? - target).norm();
        if residual > 1e-8 * scale(target) {
            return Err(BranchError::NotAnOrbit { step: i, residual });
        }
        let k = branch_index(map, z);
        let cand = match inverse(map, target, BranchSelector::Index(k)) {
            Ok(p) => p.z,
            Err(BranchError::AsymptoticValue { .. }) => {
                return Err(BranchError::AmbiguousBranch {
                    step: s,
                    separation: 0.0,
                })
            }
            Err(e) => return Err(e),
        };
        let sep = preimage_separation(map, target, cand, k);
        if sep < 1e-6 || (cand - z).norm() >= 0.5 * sep {
            return Err(BranchError::AmbiguousBranch {
                step: s,
                separation: sep,
            });
        }
        trust = trust.min(0.5 * sep);
        steps.push(ChainStep {
            k,
            anchor: z,
            residual,
        });
    }
    Ok(BranchChain {
        map: *map,
        terminal,
        trust_radius: trust,
        steps,
    })
}

/// Applies the chain to `z`, returning every intermediate image (the last is `F_n(z)`).
pub fn apply_chain_path(chain: &BranchChain, z: Complex64) -> Result<Vec<Complex64>, BranchError> {
    let map = &chain.map;
    let mut prev_target = chain.terminal;
    let mut current = z;
    let mut path = Vec::with_capacity(chain.len());
    for (i, step) in chain.steps.iter().enumerate() {
        if is_asymptotic_value(map, current) {
            return Err(BranchError::AsymptoticValue { w: current });
        }
        let d = map.derivative(step.anchor)?;
        let seed = if d.norm() > 1e-12 {
            step.anchor + (current - prev_target) / d
        } else {
            step.anchor
        };
        let image = match *map {
            EntireMap::ExpLambda { lambda } => {
                let base = (current / lambda).ln();
                base + Complex64::new(0.0, TAU * ((seed.im - base.im) / TAU).round())
            }
            _ => {
                let best = (step.k - 1..=step.k + 1)
                    .filter_map(|k| closed_form(map, current, k).ok())
                    .min_by(|a, b| (a - seed).norm().total_cmp(&(b - seed).norm()));
                let start = best.unwrap_or(seed);
                newton(map, current, start).unwrap_or(start)
            }
        };
        let residual = (map.eval(image)? - current).norm();
        if !(residual <= 1e-9 * scale(current)) {
            return Err(BranchError::NewtonDiverged { w: current });
        }
        let distance = (image - step.anchor).norm();
        if distance > chain.trust_radius {
            return Err(BranchError::BranchJumpDetected {
                step: i,
                distance,
                trust: chain.trust_radius,
            });
        }
        path.push(image);
        prev_target = step.anchor;
        current = image;
    }
    Ok(path)
}

/// `F_n(z)`.
pub fn apply_chain(chain: &BranchChain, z: Complex64) -> Result<Complex64, BranchError> {
    Ok(apply_chain_path(chain, z)?.pop().unwrap_or(z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ProbeFailure {
    /// The image left the grid window, so its component cannot be checked.
    OutOfWindow,
    /// The image sits in a different raster component.
    OtherComponent {
        label: u32,
    },
    /// The image does not classify as Fatou of the sampled component's type.
    NotFatou,
    ChainFailed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeViolation {
    pub sample: Complex64,
    pub image: Option<Complex64>,
    pub failure: ProbeFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub holds_on_samples: bool,
    pub label: u32,
    pub fatou_samples: usize,
    pub violations: Vec<ProbeViolation>,
}

impl ProbeReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "sample_re,sample_im,image_re,image_im,failure")?;
        for v in &self.violations {
            let (ire, iim) = v.image.map_or((f64::NAN, f64::NAN), |z| (z.re, z.im));
            let tag = match &v.failure {
                ProbeFailure::OutOfWindow => "out_of_window".to_string(),
                ProbeFailure::OtherComponent { label } => format!("other_component_{label}"),
                ProbeFailure::NotFatou => "not_fatou".to_string(),
                ProbeFailure::ChainFailed { .. } => "chain_failed".to_string(),
            };
            writeln!(out, "{},{},{ire},{iim},{tag}", v.sample.re, v.sample.im)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error("only {found} of the disk samples are Fatou cells (need 10)")]
    InsufficientFatouSamples { found: usize },
    #[error("probe center {p} lies outside the grid window")]
    OutOfWindow { p: Complex64 },
}

/// `n` points spread evenly over the closed disk `D(p, r)` (sunflower pattern).
pub fn disk_samples(p: Complex64, r: f64, n: usize) -> Vec<Complex64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let rho = r * ((i as f64 + 0.5) / n as f64).sqrt();
            p + Complex64::from_polar(rho, golden * i as f64)
        })
        .collect()
}

/// Whether image `z` belongs to the raster component `label`: same cell label,
/// or a Julia-cell point next to that component whose own orbit has the same
/// Fatou signature.
/// Signature of component `label`, if it is one.
pub(crate) fn component_signature(grid: &ClassificationGrid, label: u32) -> Option<FatouSignature> {
    grid.components()
        .into_iter()
        .find(|c| c.label == label)
        .map(|c| c.signature)
}

/// Whether `z` belongs to component `label`: its cell carries the label, or it
/// is a Julia/undecided cell touching the component whose own orbit has the
/// component's signature (cells straddling the boundary).
pub(crate) fn in_component(
    grid: &ClassificationGrid,
    label: u32,
    signature: Option<FatouSignature>,
    z: Complex64,
) -> Result<(), ProbeFailure> {
    let Some((i, j)) = grid.cell_of(z) else {
        return Err(ProbeFailure::OutOfWindow);
    };
    let l = grid.label(i, j);
    if l == label {
        return Ok(());
    }
    if l != 0 {
        return Err(ProbeFailure::OtherComponent { label: l });
    }
    let adjacent = (-1i64..=1).any(|dj| {
        (-1i64..=1).any(|di| {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            a >= 0
                && b >= 0
                && (a as usize) < grid.nx
                && (b as usize) < grid.ny
                && grid.label(a as usize, b as usize) == label
        })
    });
    if adjacent && signature.is_some() && grid.signature_at(z) == signature {
        Ok(())
    } else {
        Err(ProbeFailure::NotFatou)
    }
}

/// Samples `D(p, r)` inside the component holding most Fatou samples, applies
/// the chain, and checks every image lands back in that component.
pub fn proper_invertibility_probe(
    grid: &ClassificationGrid,
    p: Complex64,
    r: f64,
    chain: &BranchChain,
    samples: usize,
) -> Result<ProbeReport, ProbeError> {
    if !grid.window.contains(p) {
        return Err(ProbeError::OutOfWindow { p });
    }
    let pts = disk_samples(p, r, samples);
    let mut counts: Vec<(u32, usize)> = Vec::new();
    for z in &pts {
        if let Some(l) = grid.label_at(*z).filter(|&l| l != 0) {
            match counts.iter_mut().find(|(a, _)| *a == l) {
                Some(c) => c.1 += 1,
                None => counts.push((l, 1)),
            }
        }
    }
    let Some(&(label, _)) = counts
        .iter()
        .max_by_key(|(l, n)| (*n, std::cmp::Reverse(*l)))
    else {
        return Err(ProbeError::InsufficientFatouSamples { found: 0 });
    };
    let inside: Vec<Complex64> = pts
        .into_iter()
        .filter(|z| grid.label_at(*z) == Some(label))
        .collect();
    if inside.len() < 10 {
        return Err(ProbeError::InsufficientFatouSamples {
            found: inside.len(),
        });
    }
    let signature = component_signature(grid, label);
    let violations: Vec<ProbeViolation> = inside
        .par_iter()
        .filter_map(|&z| match apply_chain(chain, z) {
            Err(e) => Some(ProbeViolation {
                sample: z,
                image: None,
                failure: ProbeFailure::ChainFailed {
                    error: e.to_string(),
                },
            }),
            Ok(img) => in_component(grid, label, signature, img)
                .err()
                .map(|failure| ProbeViolation {
                    sample: z,
                    image: Some(img),
                    failure,
                }),
        })
        .collect();
    Ok(ProbeReport {
        holds_on_samples: violations.is_empty(),
        label,
        fatou_samples: inside.len(),
        violations,
    })
}
