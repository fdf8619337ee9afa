//! Complex Lambert W on every branch, with branch identification.
//!
//! `W_k(x)` solves `w e^w = x` on branch `k` with the usual cut structure:
//! `W_0` and `W_{-1}` are real on `[-1/e, 0)`, `W_{±1}` meet `W_0` along the
//! cut `(-∞, -1/e]` from opposite sides.

use std::f64::consts::{E, PI, TAU};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LambertError {
    #[error("W_{k} has a logarithmic singularity at 0")]
    Singular { k: i64 },
    #[error("Halley iteration for W_{k}({x}) did not settle on branch {k}")]
    NoConvergence { k: i64, x: Complex64 },
    #[error("non-finite argument {x}")]
    NonFinite { x: Complex64 },
}

const MINUS_INV_E: f64 = -1.0 / E;

/// Branch index of `w` as a solution of `w e^w = x`.
pub fn branch_of(w: Complex64, x: Complex64) -> i64 {
    if w.im == 0.0 && x.im == 0.0 {
        // Real solutions: (-∞, -1] belongs to W_{-1}, [-1, ∞) to W_0.
        return if w.re < -1.0 { -1 } else { 0 };
    }
    let s = w + w.ln() - x.ln();
    (s.im / TAU).round() as i64
}

/// Branch of `w` without knowing `x` exactly (uses `x = w e^w`).
pub fn branch_of_value(w: Complex64) -> i64 {
    branch_of(w, w * w.exp())
}

fn halley(x: Complex64, mut w: Complex64) -> Option<Complex64> {
    let mut last = f64::INFINITY;
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.norm() < 1e-300 {
            return None;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        if !step.is_finite() {
            return None;
        }
        let size = step.norm();
        // Near the branch point rounding noise stops the steps from shrinking
        // to ε, so stagnation at a tiny step also counts as convergence.
        if size > last && last <= 1e-12 * (1.0 + w.norm()) {
            return Some(w);
        }
        w -= step;
        if size <= 4.0 * f64::EPSILON * (1.0 + w.norm()) {
            return Some(w);
        }
        last = size;
    }
    (last <= 1e-12 * (1.0 + w.norm())).then_some(w)
}

fn initial_guesses(k: i64, x: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(5);
    let p = (2.0 * (E * x + 1.0)).sqrt();
    let near_branch = (x - MINUS_INV_E).norm() < 0.3;
    let series = |p: Complex64| -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
    if near_branch && (-1..=1).contains(&k) {
        out.push(series(p));
        out.push(series(-p));
    }
    if k == 0 && x.norm() < 1.0 {
        out.push(x * (1.0 - x + 1.5 * x * x));
    }
    let l1 = x.ln() + Complex64::new(0.0, TAU * k as f64);
    if l1.norm() > 0.0 {
        let l2 = l1.ln();
        out.push(l1 - l2 + l2 / l1);
    }
    if k == 0 {
        out.push((1.0 + x).ln());
    }
    out.push(Complex64::new(-1.0, 0.0) + Complex64::new(0.0, PI * (2 * k) as f64));
    out
}

/// `W_k(x)`.
pub fn lambert_w(k: i64, x: Complex64) -> Result<Complex64, LambertError> {
    if !x.is_finite() {
        return Err(LambertError::NonFinite { x });
    }
    if x == Complex64::new(0.0, 0.0) {
        return if k == 0 {
            Ok(x)
        } else {
            Err(LambertError::Singular { k })
        };
    }
    // At the branch point the series is exact to O(p⁴) and Halley is singular.
    let p = (2.0 * (E * x + 1.0)).sqrt();
    if p.norm() < 1e-8 && (-1..=1).contains(&k) {
        let s = |p: Complex64| -1.0 + p - p * p / 3.0;
        for cand in [s(p), s(-p)] {
            if branch_of(cand, x) == k || p.norm() < 1e-15 {
                return Ok(cand);
            }
        }
    }
    for guess in initial_guesses(k, x) {
        if let Some(w) = halley(x, guess) {
            if branch_of(w, x) == k {
                return Ok(w);
            }
        }
    }
    Err(LambertError::NoConvergence { k, x })
}
