//! Forward-orbit classification.
//!
//! An orbit is classified by the first of the following events within the
//! iteration budget:
//!
//! * it lands within `tol` of a supplied attracting cycle point (and `f^period`
//!   moves it by less than `tol`);
//! * it approaches the parabolic fixed point along the attracting direction;
//! * it leaves the escape disk and keeps growing, or overflows;
//! * for the Baker-drift families, `Re f^n` is non-decreasing for
//!   `drift_steps` consecutive steps beyond `Re = drift_threshold`.
//!
//! Nothing depends on the budget except where the loop stops, so a verdict
//! other than `Undecided` is stable under larger budgets.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::catalog::EntireMap;

/// Axis-aligned rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Window {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite())
            && self.re_min < self.re_max
            && self.im_min < self.im_max
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }
}

/// A point of an attracting cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attractor {
    pub point: Complex64,
    pub period: usize,
}

impl Attractor {
    pub fn fixed(point: Complex64) -> Self {
        Attractor { point, period: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitParams {
    pub budget: usize,
    pub escape_radius: f64,
    pub attractors: Vec<Attractor>,
    pub tol: f64,
    /// Parabolic convergence is certified once `|f^n(z) - p|` drops below this.
    pub parabolic_radius: f64,
    pub drift_threshold: f64,
    pub drift_steps: usize,
}

impl OrbitParams {
    pub fn new(budget: usize, escape_radius: f64, attractors: Vec<Attractor>, tol: f64) -> Self {
        OrbitParams {
            budget,
            escape_radius,
            attractors,
            tol,
            parabolic_radius: 1e-3,
            drift_threshold: 3.0,
            drift_steps: 50,
        }
    }

    /// Same parameters with a different budget.
    pub fn with_budget(&self, budget: usize) -> Self {
        OrbitParams {
            budget,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeRoute {
    /// Left the escape disk and kept growing.
    Radius,
    /// `e^{±z}` overflowed in double precision.
    Overflow,
    /// Monotone real drift certifying a Baker domain orbit. `strip` is the
    /// absorbing strip `|Im z − 2πk| < π` the orbit settled in.
    Drift { strip: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictKind {
    Escaping {
        route: EscapeRoute,
    },
    BoundedAttracting {
        /// Index into [`OrbitParams::attractors`].
        attractor: usize,
        target: Complex64,
        period: usize,
    },
    BoundedParabolic {
        target: Complex64,
    },
    Undecided,
}

/// Identity of a Fatou-type verdict used to group cells into components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FatouSignature {
    BakerDrift(i64),
    Attracting(usize),
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictClass {
    Escaping,
    Bounded,
    Undecided,
}

impl VerdictKind {
    pub fn is_escaping(&self) -> bool {
        matches!(self, VerdictKind::Escaping { .. })
    }

    pub fn class(&self) -> VerdictClass {
        match self {
            VerdictKind::Escaping { .. } => VerdictClass::Escaping,
            VerdictKind::BoundedAttracting { .. } | VerdictKind::BoundedParabolic { .. } => {
                VerdictClass::Bounded
            }
            VerdictKind::Undecided => VerdictClass::Undecided,
        }
    }

    /// `Some` for verdicts that are evidence of a Fatou component.
    pub fn fatou_signature(&self) -> Option<FatouSignature> {
        match self {
            VerdictKind::Escaping {
                route: EscapeRoute::Drift { strip },
            } => Some(FatouSignature::BakerDrift(*strip)),
            VerdictKind::BoundedAttracting { attractor, .. } => {
                Some(FatouSignature::Attracting(*attractor))
            }
            VerdictKind::BoundedParabolic { .. } => Some(FatouSignature::Parabolic),
            _ => None,
        }
    }

    /// Short tag used in CSV exports.
    pub fn tag(&self) -> &'static str {
        match self {
            VerdictKind::Escaping {
                route: EscapeRoute::Drift { .. },
            } => "baker_drift",
            VerdictKind::Escaping { .. } => "escaping",
            VerdictKind::BoundedAttracting { .. } => "attracting",
            VerdictKind::BoundedParabolic { .. } => "parabolic",
            VerdictKind::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitVerdict {
    pub kind: VerdictKind,
    pub iterations_used: usize,
    pub final_point: Complex64,
}

fn attractor_hit(map: &EntireMap, z: Complex64, params: &OrbitParams) -> Option<VerdictKind> {
    for (i, a) in params.attractors.iter().enumerate() {
        if (z - a.point).norm() < params.tol {
            let back = map.iterate(z, a.period.max(1)).ok()?;
            if (back - z).norm() < params.tol {
                return Some(VerdictKind::BoundedAttracting {
                    attractor: i,
                    target: a.point,
                    period: a.period.max(1),
                });
            }
        }
    }
    None
}

fn parabolic_hit(
    map: &EntireMap,
    z: Complex64,
    prev: Complex64,
    radius: f64,
) -> Option<VerdictKind> {
    let p = map.parabolic_point()?;
    let d = z - p;
    // The attracting direction of z e^{-z} at 0 is the positive real axis.
    if d.norm() < radius && d.norm() < (prev - p).norm() && d.arg().abs() < PI / 8.0 {
        Some(VerdictKind::BoundedParabolic { target: p })
    } else {
        None
    }
}

/// Classifies the forward orbit of `z0`.
pub fn classify_orbit(map: &EntireMap, z0: Complex64, params: &OrbitParams) -> OrbitVerdict {
    let drift = map.has_baker_drift();
    let verdict = |kind, n, z| OrbitVerdict {
        kind,
        iterations_used: n,
        final_point: z,
    };
    let escaping = |route| VerdictKind::Escaping { route };

    let mut z = z0;
    let mut prev = z0;
    let mut streak = 0usize;
    let mut next = map.eval(z);
    for n in 0..=params.budget {
        if n > 0 {
            if let Some(kind) = attractor_hit(map, z, params) {
                return verdict(kind, n, z);
            }
            if let Some(kind) = parabolic_hit(map, z, prev, params.parabolic_radius) {
                return verdict(kind, n, z);
            }
            if drift {
                if z.re > params.drift_threshold && z.re >= prev.re {
                    streak += 1;
                    if streak >= params.drift_steps {
                        let strip = (z.im / TAU).round() as i64;
                        return verdict(escaping(EscapeRoute::Drift { strip }), n, z);
                    }
                } else {
                    streak = 0;
                }
            }
        }
        let Ok(w) = next else {
            return verdict(escaping(EscapeRoute::Overflow), n, z);
        };
        let radius_test = !(drift && z.re > params.drift_threshold);
        if radius_test && z.norm() > params.escape_radius && w.norm() > z.norm() {
            return verdict(escaping(EscapeRoute::Radius), n, z);
        }
        if n == params.budget {
            break;
        }
        prev = z;
        z = w;
        next = map.eval(z);
    }
    verdict(VerdictKind::Undecided, params.budget, z)
}

/// The forward orbit `z0, f(z0), …` up to `len` further points, stopping early on overflow.
pub fn forward_orbit(map: &EntireMap, z0: Complex64, len: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(len + 1);
    out.push(z0);
    let mut z = z0;
    for _ in 0..len {
        match map.eval(z) {
            Ok(w) => {
                out.push(w);
                z = w;
            }
            Err(_) => break,
        }
    }
    out
}
