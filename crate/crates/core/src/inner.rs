//! Finite Blaschke products and their boundary dynamics on the unit circle.
//!
//! The lift of a factor `(z - a)/(1 - āz)` is `θ + 2·arg(1 - a e^{-iθ})`: on
//! the circle the factor equals `e^{iθ} w / w̄` with `w = 1 - a e^{-iθ}`, and
//! `Re w > 0`, so the argument never wraps. Lifts of iterates are compositions.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InnerError {
    #[error("invalid Blaschke product: {0}")]
    Invalid(String),
    #[error("orbit of 0 neither contracts nor reaches the circle (rotation-like)")]
    RotationLike,
    #[error("some branch equation has several roots; the lift is not expanding")]
    LiftNotExpanding { roots: Vec<f64> },
    #[error("period must be at least 1 and the degree at least 2")]
    BadPeriod,
    #[error("denominator vanishes on the sampled circle near {z}")]
    PoleOnCircle { z: Complex64 },
}

/// `rotation · Π (z - a_j)/(1 - ā_j z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlaschkeWire", into = "BlaschkeWire")]
pub struct BlaschkeProduct {
    rotation: Complex64,
    zeros: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlaschkeWire {
    rotation: [f64; 2],
    zeros: Vec<[f64; 2]>,
}

impl TryFrom<BlaschkeWire> for BlaschkeProduct {
    type Error = InnerError;

    fn try_from(w: BlaschkeWire) -> Result<Self, InnerError> {
        BlaschkeProduct::new(
            Complex64::new(w.rotation[0], w.rotation[1]),
            w.zeros.iter().map(|a| Complex64::new(a[0], a[1])).collect(),
        )
    }
}

impl From<BlaschkeProduct> for BlaschkeWire {
    fn from(b: BlaschkeProduct) -> Self {
        BlaschkeWire {
            rotation: [b.rotation.re, b.rotation.im],
            zeros: b.zeros.iter().map(|a| [a.re, a.im]).collect(),
        }
    }
}

impl BlaschkeProduct {
    pub fn new(rotation: Complex64, zeros: Vec<Complex64>) -> Result<Self, InnerError> {
        if !rotation.is_finite() || (rotation.norm() - 1.0).abs() > 1e-12 {
            return Err(InnerError::Invalid(format!(
                "rotation {rotation} is not unimodular"
            )));
        }
        if let Some(a) = zeros.iter().find(|a| !a.is_finite() || a.norm() >= 1.0) {
            return Err(InnerError::Invalid(format!(
                "zero {a} is not inside the unit disk"
            )));
        }
        Ok(BlaschkeProduct { rotation, zeros })
    }

    /// `z^d`.
    pub fn power(d: usize) -> Self {
        BlaschkeProduct {
            rotation: Complex64::new(1.0, 0.0),
            zeros: vec![Complex64::new(0.0, 0.0); d],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, InnerError> {
        serde_json::from_str(text).map_err(|e| InnerError::Invalid(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("blaschke product serializes")
    }

    pub fn rotation(&self) -> Complex64 {
        self.rotation
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.zeros
            .iter()
            .fold(self.rotation, |acc, a| acc * (z - a) / (1.0 - a.conj() * z))
    }

    /// `(B(z), B'(z))` by the product rule.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut v = self.rotation;
        let mut d = Complex64::new(0.0, 0.0);
        for a in &self.zeros {
            let den = 1.0 - a.conj() * z;
            let f = (z - a) / den;
            let df = (1.0 - a.norm_sqr()) / (den * den);
            d = d * f + v * df;
            v *= f;
        }
        (v, d)
    }

    pub fn iterate(&self, z: Complex64, n: usize) -> Complex64 {
        (0..n).fold(z, |w, _| self.eval(w))
    }

    /// Lift of the boundary map: `e^{iG(θ)} = B(e^{iθ})`, continuous in θ.
    pub fn lift(&self, theta: f64) -> f64 {
        let u = Complex64::from_polar(1.0, -theta);
        self.rotation.arg()
            + self
                .zeros
                .iter()
                .map(|a| {
                    let w = 1.0 - a * u;
                    theta + 2.0 * w.im.atan2(w.re)
                })
                .sum::<f64>()
    }

    /// `G'(θ) = Σ (1 - |a|²)/|e^{iθ} - a|²`, which equals `|B'(e^{iθ})|`.
    pub fn lift_derivative(&self, theta: f64) -> f64 {
        let e = Complex64::from_polar(1.0, theta);
        self.zeros
            .iter()
            .map(|a| (1.0 - a.norm_sqr()) / (e - a).norm_sqr())
            .sum()
    }

    /// Lift of `B^n`.
    pub fn lift_iterate(&self, theta: f64, n: usize) -> f64 {
        (0..n).fold(theta, |t, _| self.lift(t))
    }

    /// `(G_n(θ), G_n'(θ))`.
    pub fn lift_iterate_with_derivative(&self, theta: f64, n: usize) -> (f64, f64) {
        let mut t = theta;
        let mut d = 1.0;
        for _ in 0..n {
            d *= self.lift_derivative(t);
            t = self.lift(t);
        }
        (t, d)
    }
}

/// Sampled lift of `B^n` on an equispaced grid of `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleLift {
    pub base: BlaschkeProduct,
    pub n: usize,
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
}

impl CircleLift {
    pub fn new(base: &BlaschkeProduct, n: usize, points: usize) -> Self {
        let thetas: Vec<f64> = (0..points)
            .map(|i| TAU * i as f64 / points as f64)
            .collect();
        let values = thetas
            .par_iter()
            .map(|&t| base.lift_iterate(t, n))
            .collect();
        CircleLift {
            base: base.clone(),
            n,
            thetas,
            values,
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    /// `max |G_n(θ + 2π) - G_n(θ) - 2π dⁿ|` over the grid.
    pub fn periodicity_error(&self) -> f64 {
        let shift = TAU * (self.base.degree() as f64).powi(self.n as i32);
        self.thetas
            .iter()
            .zip(&self.values)
            .map(|(&t, &g)| (self.base.lift_iterate(t + TAU, self.n) - g - shift).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwLocation {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenjoyWolff {
    pub point: Complex64,
    pub location: DwLocation,
    pub derivative_modulus: f64,
    pub iterations: usize,
}

const BOUNDARY_GAP: f64 = 1e-6;
const BOUNDARY_RUN: usize = 20;

/// Locates the Denjoy-Wolff point from the orbit of 0.
pub fn denjoy_wolff(
    b: &BlaschkeProduct,
    tol: f64,
    budget: usize,
) -> Result<DenjoyWolff, InnerError> {
    if b.degree() == 0 {
        return Err(InnerError::Invalid(
            "a constant has no Denjoy-Wolff point".into(),
        ));
    }
    let mut z = Complex64::new(0.0, 0.0);
    let mut run = 0;
    for n in 1..=budget {
        let next = b.eval(z);
        if (next - z).norm() < tol && next.norm() <= 1.0 - tol {
            let d = b.eval_with_derivative(next).1.norm();
            if d >= 1.0 - tol {
                return Err(InnerError::RotationLike);
            }
            return Ok(DenjoyWolff {
                point: next,
                location: DwLocation::Interior,
                derivative_modulus: d,
                iterations: n,
            });
        }
        run = if next.norm() > 1.0 - BOUNDARY_GAP {
            run + 1
        } else {
            0
        };
        z = next;
        if run >= BOUNDARY_RUN {
            let theta = refine_boundary_fixed_point(b, z.arg());
            return Ok(DenjoyWolff {
                point: Complex64::from_polar(1.0, theta),
                location: DwLocation::Boundary,
                derivative_modulus: b.lift_derivative(theta),
                iterations: n,
            });
        }
    }
    Err(InnerError::RotationLike)
}

/// Newton on `G(θ) - θ - 2πj` started from `theta`, with `j` fixed by the start.
fn refine_boundary_fixed_point(b: &BlaschkeProduct, theta: f64) -> f64 {
    let j = ((b.lift(theta) - theta) / TAU).round();
    let mut t = theta;
    for _ in 0..100 {
        let h = b.lift(t) - t - TAU * j;
        let dh = b.lift_derivative(t) - 1.0;
        if dh.abs() < 1e-14 {
            break;
        }
        let step = h / dh;
        t -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    t.rem_euclid(TAU)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirclePeriodicPoint {
    pub n: usize,
    pub j: i64,
    pub theta: f64,
    pub residual: f64,
}

/// Writes `n, j, theta, residual` rows.
pub fn write_periodic_csv<W: Write>(points: &[CirclePeriodicPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "n,j,theta,residual")?;
    for p in points {
        writeln!(out, "{},{},{},{:e}", p.n, p.j, p.theta, p.residual)?;
    }
    Ok(())
}

const LIFT_GRID: usize = 1 << 14;
const LIFT_GRID_MAX: usize = 1 << 20;

/// All solutions of `Bⁿ(e^{iθ}) = e^{iθ}` in `[0, 2π)`, i.e. the roots of
/// `G_n(θ) = θ + 2πj` found by bracketing on a θ-grid and bisection.
pub fn circle_periodic_points(
    b: &BlaschkeProduct,
    n: usize,
) -> Result<Vec<CirclePeriodicPoint>, InnerError> {
    if n == 0 || b.degree() < 2 {
        return Err(InnerError::BadPeriod);
    }
    let h = |t: f64| b.lift_iterate(t, n) - t;
    let mut points = LIFT_GRID;
    let (thetas, values) = loop {
        let thetas: Vec<f64> = (0..=points)
            .map(|i| TAU * i as f64 / points as f64)
            .collect();
        let values: Vec<f64> = thetas.par_iter().map(|&t| h(t)).collect();
        if values.windows(2).all(|w| w[1] > w[0]) || points >= LIFT_GRID_MAX {
            break (thetas, values);
        }
        points *= 2;
    };
    // Brackets [t_i, t_{i+1}) with H(t_i) ≤ 2πj < H(t_{i+1}) (or reversed).
    let mut brackets: Vec<(i64, f64, f64)> = Vec::new();
    for i in 0..points {
        let (h0, h1) = (values[i], values[i + 1]);
        let (lo, hi) = if h0 <= h1 { (h0, h1) } else { (h1, h0) };
        let j_lo = (lo / TAU).ceil() as i64;
        let j_hi = (hi / TAU).ceil() as i64;
        for j in j_lo..j_hi {
            brackets.push((j, thetas[i], thetas[i + 1]));
        }
    }
    let mut roots: Vec<CirclePeriodicPoint> = brackets
        .par_iter()
        .map(|&(j, mut a, mut c)| {
            let target = TAU * j as f64;
            let mut fa = h(a) - target;
            if fa == 0.0 {
                c = a;
            }
            for _ in 0..200 {
                if c - a <= 1e-15 * TAU {
                    break;
                }
                let m = 0.5 * (a + c);
                let fm = h(m) - target;
                if fm == 0.0 {
                    a = m;
                    c = m;
                    break;
                }
                if (fm < 0.0) == (fa < 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    c = m;
                }
            }
            let theta = 0.5 * (a + c);
            let e = Complex64::from_polar(1.0, theta);
            CirclePeriodicPoint {
                n,
                j,
                theta: theta.rem_euclid(TAU),
                residual: (b.iterate(e, n) - e).norm(),
            }
        })
        .collect();
    roots.sort_by(|p, q| p.theta.total_cmp(&q.theta));
    // Deduplicate at 1e-10, including across θ = 0 ≡ 2π.
    let mut out: Vec<CirclePeriodicPoint> = Vec::with_capacity(roots.len());
    for r in roots {
        if out
            .last()
            .is_some_and(|p| (r.theta - p.theta).abs() < 1e-10)
        {
            continue;
        }
        out.push(r);
    }
    if out.len() > 1 && (out[0].theta + TAU - out[out.len() - 1].theta) < 1e-10 {
        out.pop();
    }
    let mut js: Vec<i64> = out.iter().map(|p| p.j).collect();
    js.sort_unstable();
    if js.windows(2).any(|w| w[0] == w[1]) {
        return Err(InnerError::LiftNotExpanding {
            roots: out.iter().map(|p| p.theta).collect(),
        });
    }
    Ok(out)
}

/// Type of an invariant Fatou component, as far as ergodic theory of its inner function goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Attracting,
    Parabolic,
    Siegel,
    BakerDoublyParabolicDwRegular,
    BakerDoublyParabolicDwSingular,
    BakerSimplyParabolic,
    BakerHyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recurrence {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentDynamics {
    pub ergodic: bool,
    pub recurrent: Recurrence,
}

/// Ergodicity and recurrence of the boundary map by component type.
pub fn classify_component_dynamics(kind: ComponentKind) -> ComponentDynamics {
    use ComponentKind::*;
    let (ergodic, recurrent) = match kind {
        Attracting | Parabolic | Siegel | BakerDoublyParabolicDwRegular => (true, Recurrence::Yes),
        // Ergodic, but recurrence is open when the Denjoy-Wolff point is singular.
        BakerDoublyParabolicDwSingular => (true, Recurrence::Unknown),
        BakerSimplyParabolic | BakerHyperbolic => (false, Recurrence::No),
    };
    ComponentDynamics { ergodic, recurrent }
}

/// `N(z)/D(z)` with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalCircleMap {
    pub numerator: Vec<Complex64>,
    pub denominator: Vec<Complex64>,
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

impl RationalCircleMap {
    pub fn new(numerator: Vec<Complex64>, denominator: Vec<Complex64>) -> Result<Self, InnerError> {
        let ok = |v: &[Complex64]| {
            !v.is_empty() && v.iter().all(|c| c.is_finite()) && v.iter().any(|c| c.norm() > 0.0)
        };
        if !ok(&numerator) || !ok(&denominator) {
            return Err(InnerError::Invalid(
                "coefficient lists must be finite and nonzero".into(),
            ));
        }
        Ok(RationalCircleMap {
            numerator,
            denominator,
        })
    }

    /// Builds from real coefficients.
    pub fn real(numerator: &[f64], denominator: &[f64]) -> Result<Self, InnerError> {
        let c = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(c(numerator), c(denominator))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner(&self.numerator, z) / horner(&self.denominator, z)
    }

    /// `z ↦ R(1/z)`, written again as a quotient of polynomials.
    pub fn compose_inversion(&self) -> Self {
        let m = self.numerator.len().max(self.denominator.len());
        let rev = |v: &[Complex64]| {
            let mut p = vec![Complex64::new(0.0, 0.0); m];
            for (i, c) in v.iter().enumerate() {
                p[m - 1 - i] = *c;
            }
            p
        };
        RationalCircleMap {
            numerator: rev(&self.numerator),
            denominator: rev(&self.denominator),
        }
    }

    /// Coefficients of `N(z) - z·D(z)`, whose roots are the fixed points.
    fn fixed_point_polynomial(&self) -> Vec<Complex64> {
        let len = self.numerator.len().max(self.denominator.len() + 1);
        let mut p = vec![Complex64::new(0.0, 0.0); len];
        for (i, c) in self.numerator.iter().enumerate() {
            p[i] += c;
        }
        for (i, c) in self.denominator.iter().enumerate() {
            p[i + 1] -= c;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerCandidateReport {
    pub circle_preserving: bool,
    pub max_circle_error: f64,
    pub maps_disk_in: bool,
    pub value_at_zero: Complex64,
    pub boundary_fixed_points: Vec<Complex64>,
    pub notes: Vec<String>,
}

/// Audits a rational map proposed as an inner function: circle preservation,
/// whether it maps the disk into itself, and its fixed points on the circle.
pub fn verify_inner_candidate(
    cand: &RationalCircleMap,
    samples: usize,
) -> Result<InnerCandidateReport, InnerError> {
    let samples = samples.max(16);
    let circle: Vec<Complex64> = (0..samples)
        .map(|i| Complex64::from_polar(1.0, TAU * i as f64 / samples as f64))
        .collect();
    let mut max_err: f64 = 0.0;
    for &e in &circle {
        let d = horner(&cand.denominator, e);
        if d.norm() < 1e-12 {
            return Err(InnerError::PoleOnCircle { z: e });
        }
        max_err = max_err.max((cand.eval(e).norm() - 1.0).abs());
    }
    let circle_preserving = max_err < 1e-12;

    let value_at_zero = cand.eval(Complex64::new(0.0, 0.0));
    let mut maps_disk_in = value_at_zero.is_finite() && value_at_zero.norm() < 1.0;
    if maps_disk_in {
        'outer: for r in [0.25, 0.5, 0.75, 0.9, 0.99] {
            for k in 0..64 {
                let v = cand.eval(Complex64::from_polar(r, TAU * k as f64 / 64.0));
                if !(v.is_finite() && v.norm() < 1.0) {
                    maps_disk_in = false;
                    break 'outer;
                }
            }
        }
    }

    // Sign changes of the unwrapped arg(R(e^{iθ})e^{-iθ}) across multiples of 2π.
    let phase = |t: f64| {
        let e = Complex64::from_polar(1.0, t);
        (cand.eval(e) * e.conj()).arg()
    };
    let mut unwrapped = Vec::with_capacity(samples + 1);
    let mut prev = phase(0.0);
    let mut acc = prev;
    unwrapped.push(acc);
    for i in 1..=samples {
        let p = phase(TAU * i as f64 / samples as f64);
        let mut d = p - prev;
        if d > PI {
            d -= TAU;
        } else if d < -PI {
            d += TAU;
        }
        acc += d;
        unwrapped.push(acc);
        prev = p;
    }
    let poly = cand.fixed_point_polynomial();
    let dpoly: Vec<Complex64> = poly
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * i as f64)
        .collect();
    let mut fixed: Vec<Complex64> = Vec::new();
    for i in 0..samples {
        let (u0, u1) = (unwrapped[i], unwrapped[i + 1]);
        let (lo, hi) = if u0 <= u1 { (u0, u1) } else { (u1, u0) };
        // Closed brackets: a fixed point sitting on a sample is caught from either side.
        for j in (lo / TAU - 1e-12).ceil() as i64..=(hi / TAU + 1e-12).floor() as i64 {
            let target = TAU * j as f64;
            let (mut a, mut c) = (
                TAU * i as f64 / samples as f64,
                TAU * (i + 1) as f64 / samples as f64,
            );
            // Track the branch of the unwrapped phase near the bracket.
            let base = u0 - phase(a);
            let g = |t: f64| {
                let mut v = phase(t) + base - target;
                while v > PI {
                    v -= TAU;
                }
                while v < -PI {
                    v += TAU;
                }
                v
            };
            let ga = g(a);
            let gc = g(c);
            if (ga < 0.0) == (gc < 0.0) {
                if ga.abs() < gc.abs() {
                    c = a;
                } else {
                    a = c;
                }
            }
            for _ in 0..100 {
                if a == c {
                    break;
                }
                let m = 0.5 * (a + c);
                if (g(m) < 0.0) == (ga < 0.0) {
                    a = m;
                } else {
                    c = m;
                }
            }
            let mut z = Complex64::from_polar(1.0, 0.5 * (a + c));
            for _ in 0..20 {
                let d = horner(&dpoly, z);
                if d.norm() == 0.0 {
                    break;
                }
                let step = horner(&poly, z) / d;
                z -= step;
                if step.norm() < 1e-16 {
                    break;
                }
            }
            if !fixed.iter().any(|w| (w - z).norm() < 1e-10) {
                fixed.push(z);
            }
        }
    }
    fixed.sort_by(|a, b| a.arg().total_cmp(&b.arg()));

    let mut notes = Vec::new();
    if !circle_preserving {
        notes.push(format!(
            "does not preserve the unit circle (max error {max_err:e})"
        ));
    }
    if !maps_disk_in {
        notes.push(format!(
            "value at 0 is {value_at_zero}: as written the map does not send the unit disk into itself"
        ));
    }
    Ok(InnerCandidateReport {
        circle_preserving,
        max_circle_error: max_err,
        maps_disk_in,
        value_at_zero,
        boundary_fixed_points: fixed,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mobius() -> BlaschkeProduct {
        // (3z - 1)/(3 - z) = (z - 1/3)/(1 - z/3)
        BlaschkeProduct::new(c(1.0, 0.0), vec![c(1.0 / 3.0, 0.0)]).unwrap()
    }

    #[test]
    fn json_round_trip_and_validation() {
        let b = BlaschkeProduct::new(c(0.0, 1.0), vec![c(0.2, -0.5), c(0.0, 0.0)]).unwrap();
        assert_eq!(BlaschkeProduct::from_json(&b.to_json()).unwrap(), b);
        assert!(BlaschkeProduct::from_json(r#"{"rotation":[1,0],"zeros":[[1.5,0]]}"#).is_err());
        assert!(BlaschkeProduct::from_json(r#"{"rotation":[2,0],"zeros":[]}"#).is_err());
        assert!(BlaschkeProduct::from_json(r#"{"rotation":[1,0],"zeros":[],"x":1}"#).is_err());
    }

    #[test]
    fn mobius_matches_closed_form() {
        let m = mobius();
        for z in [c(0.3, 0.1), c(-0.5, 0.2), c(0.0, 0.9)] {
            let want = (3.0 * z - 1.0) / (3.0 - z);
            assert!((m.eval(z) - want).norm() < 1e-15);
        }
    }

    #[test]
    fn denjoy_wolff_examples() {
        let sq = BlaschkeProduct::power(2);
        let dw = denjoy_wolff(&sq, 1e-12, 1000).unwrap();
        assert_eq!(dw.location, DwLocation::Interior);
        assert_eq!(dw.point, c(0.0, 0.0));
        assert_eq!(dw.derivative_modulus, 0.0);

        let dw = denjoy_wolff(&mobius(), 1e-12, 10_000).unwrap();
        assert_eq!(dw.location, DwLocation::Boundary);
        assert!((dw.point - c(-1.0, 0.0)).norm() < 1e-12, "{dw:?}");
        assert!((dw.derivative_modulus - 0.5).abs() < 1e-12);

        let rot = BlaschkeProduct::new(Complex64::from_polar(1.0, 1.0), vec![c(0.0, 0.0)]).unwrap();
        assert!(matches!(
            denjoy_wolff(&rot, 1e-12, 1000),
            Err(InnerError::RotationLike)
        ));
    }

    #[test]
    fn same_dw_point_from_other_starts() {
        // Orbits of z² from 0.9e^{iφ} fall into 0 as well.
        let sq = BlaschkeProduct::power(2);
        for phi in [0.1, 1.0, 2.5] {
            let z = sq.iterate(Complex64::from_polar(0.9, phi), 12);
            assert!(z.norm() < 1e-100);
        }
    }

    #[test]
    fn doubling_map_periodic_points() {
        let sq = BlaschkeProduct::power(2);
        let p1 = circle_periodic_points(&sq, 1).unwrap();
        assert_eq!(p1.len(), 1);
        assert!(p1[0].theta.abs() < 1e-12);
        let p2 = circle_periodic_points(&sq, 2).unwrap();
        let want = [0.0, TAU / 3.0, 2.0 * TAU / 3.0];
        assert_eq!(p2.len(), 3);
        for (p, w) in p2.iter().zip(want) {
            assert!((p.theta - w).abs() < 1e-12);
        }
        assert_eq!(circle_periodic_points(&sq, 4).unwrap().len(), 15);
        assert!(matches!(
            circle_periodic_points(&sq, 0),
            Err(InnerError::BadPeriod)
        ));
    }

    #[test]
    fn generic_degree_two_period_three() {
        // Interior Denjoy-Wolff point at 0, off-center second zero.
        let b = BlaschkeProduct::new(
            Complex64::from_polar(1.0, 0.7),
            vec![c(0.0, 0.0), c(0.4, 0.3)],
        )
        .unwrap();
        assert_eq!(
            denjoy_wolff(&b, 1e-12, 1000).unwrap().location,
            DwLocation::Interior
        );
        let pts = circle_periodic_points(&b, 3).unwrap();
        assert_eq!(pts.len(), 7);
        assert!(pts.iter().all(|p| p.residual < 1e-9));
        // Cross-check with sign changes of sin((G_3(θ) - θ)/2) on a dense grid.
        let m = 1 << 16;
        let s = |t: f64| ((b.lift_iterate(t, 3) - t) / 2.0).sin();
        let mut count = 0;
        for i in 0..m {
            let (a, z) = (TAU * i as f64 / m as f64, TAU * (i + 1) as f64 / m as f64);
            if s(a) == 0.0 || (s(a) < 0.0) != (s(z) < 0.0) {
                count += 1;
            }
        }
        assert_eq!(count, 7);
    }

    #[test]
    fn periodic_csv() {
        let pts = circle_periodic_points(&BlaschkeProduct::power(3), 1).unwrap();
        assert_eq!(pts.len(), 2);
        let mut buf = Vec::new();
        write_periodic_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("n,j,theta,residual\n"));
    }

    #[test]
    fn component_table() {
        use ComponentKind::*;
        let t = |k| classify_component_dynamics(k);
        assert_eq!(
            t(Attracting),
            ComponentDynamics {
                ergodic: true,
                recurrent: Recurrence::Yes
            }
        );
        assert_eq!(
            t(BakerHyperbolic),
            ComponentDynamics {
                ergodic: false,
                recurrent: Recurrence::No
            }
        );
        assert_eq!(t(BakerDoublyParabolicDwRegular).recurrent, Recurrence::Yes);
        assert_eq!(
            t(BakerDoublyParabolicDwSingular).recurrent,
            Recurrence::Unknown
        );
        assert!(!t(BakerSimplyParabolic).ergodic);
    }

    #[test]
    fn explicit_candidate() {
        let g = RationalCircleMap::real(&[3.0, 0.0, 1.0], &[1.0, 0.0, 3.0]).unwrap();
        let r = verify_inner_candidate(&g, 10_000).unwrap();
        assert!(r.circle_preserving && r.max_circle_error < 1e-12);
        assert!(!r.maps_disk_in);
        assert!((r.value_at_zero - c(3.0, 0.0)).norm() < 1e-15);
        assert!(!r.notes.is_empty());
        let s = 2f64.sqrt() * 2.0 / 3.0;
        let want = [c(-1.0 / 3.0, -s), c(1.0, 0.0), c(-1.0 / 3.0, s)];
        assert_eq!(
            r.boundary_fixed_points.len(),
            3,
            "{:?}",
            r.boundary_fixed_points
        );
        for (got, w) in r.boundary_fixed_points.iter().zip(want) {
            assert!((got - w).norm() < 1e-12, "{got} vs {w}");
        }
        let inv = verify_inner_candidate(&g.compose_inversion(), 2000).unwrap();
        assert!(inv.maps_disk_in && inv.circle_preserving);
    }

    #[test]
    fn square_candidate() {
        let sq = RationalCircleMap::real(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let r = verify_inner_candidate(&sq, 1000).unwrap();
        assert!(r.circle_preserving && r.maps_disk_in);
        assert_eq!(r.boundary_fixed_points.len(), 1);
        assert!((r.boundary_fixed_points[0] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pole_on_circle() {
        let bad = RationalCircleMap::real(&[1.0], &[1.0, -1.0]).unwrap();
        assert!(matches!(
            verify_inner_candidate(&bad, 1000),
            Err(InnerError::PoleOnCircle { .. })
        ));
    }

    fn arb_blaschke() -> impl Strategy<Value = BlaschkeProduct> {
        (
            0.0f64..TAU,
            proptest::collection::vec((0.0f64..0.95, 0.0f64..TAU), 1..5),
        )
            .prop_map(|(rot, zs)| {
                BlaschkeProduct::new(
                    Complex64::from_polar(1.0, rot),
                    zs.into_iter()
                        .map(|(r, t)| Complex64::from_polar(r, t))
                        .collect(),
                )
                .unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn unimodular_on_circle(b in arb_blaschke()) {
            let worst = (0..10_000)
                .map(|i| (b.eval(Complex64::from_polar(1.0, TAU * i as f64 / 1e4)).norm() - 1.0).abs())
                .fold(0.0, f64::max);
            prop_assert!(worst < 1e-12, "{worst}");
        }

        #[test]
        fn interior_maps_inside(b in arb_blaschke(), r in 0.0f64..0.999, t in 0.0f64..TAU) {
            prop_assert!(b.eval(Complex64::from_polar(r, t)).norm() < 1.0);
        }

        #[test]
        fn lift_is_a_covering(b in arb_blaschke(), n in 1usize..3) {
            let lift = CircleLift::new(&b, n, 1 << 10);
            prop_assert!(lift.is_strictly_increasing());
            prop_assert!(lift.periodicity_error() < 1e-10);
            for (&t, &g) in lift.thetas.iter().zip(&lift.values).step_by(97) {
                let e = Complex64::from_polar(1.0, t);
                prop_assert!((b.iterate(e, n) - Complex64::from_polar(1.0, g)).norm() < 1e-10);
            }
        }

        #[test]
        fn dw_never_repelling(b in arb_blaschke()) {
            if let Ok(dw) = denjoy_wolff(&b, 1e-12, 20_000) {
                prop_assert!(dw.derivative_modulus <= 1.0 + 1e-8);
            }
        }
    }
}
