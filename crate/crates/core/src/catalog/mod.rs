//! The closed catalog of transcendental entire maps.
//!
//! Five families are supported, each with closed-form values, derivatives and
//! singular data. Every downstream solver (inverse branches, periodic points,
//! postsingular sampling) dispatches on the family.

mod audit;
mod singular;

pub use audit::{ps_audit, AllowedContact, PsAuditReport, PsAuditSettings};
pub use singular::{
    postsingular_sample, singular_values, PostsingularCloud, PostsingularSample, SingularData,
    SingularKind, SingularValue, Truncation,
};

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default truncation of the critical-point families indexed by `k`.
pub const DEFAULT_K_BOUND: u32 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("exponential overflow evaluating at {z}")]
    Overflow { z: Complex64 },
    #[error("invalid map descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("only {inside} of {total} postsingular samples fall inside the grid window")]
    WindowTooSmall { inside: usize, total: usize },
}

/// A member of the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapDescriptor", into = "MapDescriptor")]
pub enum EntireMap {
    /// `λ e^z`
    ExpLambda { lambda: f64 },
    /// `z + 1 + e^{-z}` (Fatou's function)
    FatouPlus,
    /// `z - 1 + e^{-z}`
    FatouMinus,
    /// `z + e^{-z}`
    ZPlusExp,
    /// `z e^{-z}`
    ZExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Zexp,
    ExpLambda,
    ZPlusExp,
    FatouPlus,
    FatouMinus,
}

/// Wire form of a map selection: `{"family": "exp_lambda", "lambda": 0.25}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDescriptor {
    pub family: FamilyTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl TryFrom<MapDescriptor> for EntireMap {
    type Error = CatalogError;

    fn try_from(d: MapDescriptor) -> Result<Self, Self::Error> {
        match (d.family, d.lambda) {
            (FamilyTag::ExpLambda, Some(lambda)) => {
                if !lambda.is_finite() || lambda == 0.0 {
                    return Err(CatalogError::InvalidDescriptor(format!(
                        "lambda must be finite and nonzero, got {lambda}"
                    )));
                }
                Ok(EntireMap::ExpLambda { lambda })
            }
            (FamilyTag::ExpLambda, None) => Err(CatalogError::InvalidDescriptor(
                "exp_lambda requires a lambda parameter".into(),
            )),
            (_, Some(_)) => Err(CatalogError::InvalidDescriptor(
                "lambda only applies to exp_lambda".into(),
            )),
            (FamilyTag::Zexp, None) => Ok(EntireMap::ZExp),
            (FamilyTag::ZPlusExp, None) => Ok(EntireMap::ZPlusExp),
            (FamilyTag::FatouPlus, None) => Ok(EntireMap::FatouPlus),
            (FamilyTag::FatouMinus, None) => Ok(EntireMap::FatouMinus),
        }
    }
}

impl From<EntireMap> for MapDescriptor {
    fn from(map: EntireMap) -> Self {
        let (family, lambda) = match map {
            EntireMap::ExpLambda { lambda } => (FamilyTag::ExpLambda, Some(lambda)),
            EntireMap::FatouPlus => (FamilyTag::FatouPlus, None),
            EntireMap::FatouMinus => (FamilyTag::FatouMinus, None),
            EntireMap::ZPlusExp => (FamilyTag::ZPlusExp, None),
            EntireMap::ZExp => (FamilyTag::Zexp, None),
        };
        MapDescriptor { family, lambda }
    }
}

impl fmt::Display for EntireMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntireMap::ExpLambda { lambda } => write!(f, "{lambda}·e^z"),
            EntireMap::FatouPlus => f.write_str("z+1+e^-z"),
            EntireMap::FatouMinus => f.write_str("z-1+e^-z"),
            EntireMap::ZPlusExp => f.write_str("z+e^-z"),
            EntireMap::ZExp => f.write_str("z·e^-z"),
        }
    }
}

#[inline]
fn checked(z: Complex64, value: Complex64) -> Result<Complex64, CatalogError> {
    if value.re.is_finite() && value.im.is_finite() {
        Ok(value)
    } else {
        Err(CatalogError::Overflow { z })
    }
}

impl EntireMap {
    /// Parses a JSON map descriptor.
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        serde_json::from_str(text).map_err(|e| CatalogError::InvalidDescriptor(e.to_string()))
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            EntireMap::ExpLambda { .. } => "exp_lambda",
            EntireMap::FatouPlus => "fatou_plus",
            EntireMap::FatouMinus => "fatou_minus",
            EntireMap::ZPlusExp => "z_plus_exp",
            EntireMap::ZExp => "zexp",
        }
    }

    /// For the translation families `z + c + e^{-z}`, the constant `c`.
    pub fn translation(&self) -> Option<f64> {
        match self {
            EntireMap::FatouPlus => Some(1.0),
            EntireMap::FatouMinus => Some(-1.0),
            EntireMap::ZPlusExp => Some(0.0),
            _ => None,
        }
    }

    /// Families with a Baker domain in which orbits drift to `+∞` along the
    /// real direction.
    pub fn has_baker_drift(&self) -> bool {
        matches!(self, EntireMap::ZPlusExp | EntireMap::FatouPlus)
    }

    /// The parabolic fixed point, if the family has one.
    pub fn parabolic_point(&self) -> Option<Complex64> {
        match self {
            EntireMap::ZExp => Some(Complex64::new(0.0, 0.0)),
            _ => None,
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, CatalogError> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(CatalogError::Overflow { z });
        }
        let value = match *self {
            EntireMap::ExpLambda { lambda } => lambda * z.exp(),
            EntireMap::ZExp => z * (-z).exp(),
            _ => {
                let c = self.translation().unwrap_or(0.0);
                z + c + (-z).exp()
            }
        };
        checked(z, value)
    }

    pub fn derivative(&self, z: Complex64) -> Result<Complex64, CatalogError> {
        self.eval_with_derivative(z).map(|(_, d)| d)
    }

    /// Returns `(f(z), f'(z))`.
    pub fn eval_with_derivative(
        &self,
        z: Complex64,
    ) -> Result<(Complex64, Complex64), CatalogError> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(CatalogError::Overflow { z });
        }
        let (value, deriv) = match *self {
            EntireMap::ExpLambda { lambda } => {
                let v = lambda * z.exp();
                (v, v)
            }
            EntireMap::ZExp => {
                let e = (-z).exp();
                (z * e, (1.0 - z) * e)
            }
            _ => {
                let c = self.translation().unwrap_or(0.0);
                let e = (-z).exp();
                (z + c + e, 1.0 - e)
            }
        };
        Ok((checked(z, value)?, checked(z, deriv)?))
    }

    /// `f^n(z)` together with `(f^n)'(z)` by the chain rule.
    pub fn iterate_with_derivative(
        &self,
        z: Complex64,
        n: usize,
    ) -> Result<(Complex64, Complex64), CatalogError> {
        let mut w = z;
        let mut d = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            let (v, dv) = self.eval_with_derivative(w)?;
            d *= dv;
            w = v;
        }
        Ok((w, checked(z, d)?))
    }

    pub fn iterate(&self, z: Complex64, n: usize) -> Result<Complex64, CatalogError> {
        (0..n).try_fold(z, |w, _| self.eval(w))
    }

    /// Real fixed points of `λ e^x` when `0 < λ < 1/e`: `(attracting, repelling)`.
    pub fn exp_lambda_real_fixed_points(&self) -> Option<(f64, f64)> {
        let EntireMap::ExpLambda { lambda } = *self else {
            return None;
        };
        if !(lambda > 0.0 && lambda < (-1.0f64).exp()) {
            return None;
        }
        // λe^q = q  ⇔  q = -W(-λ) on the two real branches.
        let newton = |mut q: f64| {
            for _ in 0..100 {
                let g = lambda * q.exp() - q;
                let dg = lambda * q.exp() - 1.0;
                let step = g / dg;
                q -= step;
                if step.abs() < 1e-16 * q.abs().max(1.0) {
                    break;
                }
            }
            q
        };
        // The attracting root lies in (0, 1), the repelling one beyond 1.
        let attracting = newton(0.0);
        let repelling = newton(1.0 - lambda.ln());
        Some((attracting, repelling))
    }

    /// Attractors a grid classification should test for inside `window`.
    pub fn default_attractors(
        &self,
        window: &crate::orbit::Window,
    ) -> Vec<crate::orbit::Attractor> {
        use crate::orbit::Attractor;
        match self {
            EntireMap::ExpLambda { .. } => self
                .exp_lambda_real_fixed_points()
                .map(|(a, _)| vec![Attractor::fixed(Complex64::new(a, 0.0))])
                .unwrap_or_default(),
            EntireMap::FatouMinus => {
                // Superattracting fixed points 2πik hit by the window (plus one row of margin).
                let two_pi = std::f64::consts::TAU;
                let k_lo = ((window.im_min - two_pi) / two_pi).ceil() as i64;
                let k_hi = ((window.im_max + two_pi) / two_pi).floor() as i64;
                (k_lo..=k_hi)
                    .map(|k| Attractor::fixed(Complex64::new(0.0, two_pi * k as f64)))
                    .collect()
            }
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const ALL: [EntireMap; 5] = [
        EntireMap::ExpLambda { lambda: 0.25 },
        EntireMap::FatouPlus,
        EntireMap::FatouMinus,
        EntireMap::ZPlusExp,
        EntireMap::ZExp,
    ];

    #[test]
    fn closed_form_values() {
        assert_eq!(EntireMap::ZPlusExp.eval(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        let v = EntireMap::ZExp.eval(c(0.367879441, 0.0)).unwrap();
        assert!((v.re - 0.254646).abs() < 1e-6 && v.im == 0.0);
        let q = 0.357_402_956_181_388_9;
        let v = EntireMap::ExpLambda { lambda: 0.25 }
            .eval(c(q, 0.0))
            .unwrap();
        assert!((v.re - q).abs() < 1e-12);
        assert_eq!(EntireMap::FatouPlus.eval(c(0.0, 0.0)).unwrap(), c(2.0, 0.0));
        assert_eq!(
            EntireMap::FatouMinus.eval(c(0.0, 0.0)).unwrap(),
            c(0.0, 0.0)
        );
    }

    #[test]
    fn overflow_is_an_error_value() {
        let err = EntireMap::ZPlusExp.eval(c(-800.0, 0.3)).unwrap_err();
        assert!(matches!(err, CatalogError::Overflow { .. }));
        assert!(EntireMap::ExpLambda { lambda: 0.25 }
            .eval(c(710.0, 0.0))
            .is_err());
        assert!(EntireMap::ZExp.eval(c(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn exp_lambda_fixed_points_quarter() {
        let (a, r) = EntireMap::ExpLambda { lambda: 0.25 }
            .exp_lambda_real_fixed_points()
            .unwrap();
        assert!((a - 0.357_402_956_181_388_9).abs() < 1e-14);
        assert!((r - 2.153_292_364_110_349_6).abs() < 1e-13);
        assert!(EntireMap::ExpLambda { lambda: 0.5 }
            .exp_lambda_real_fixed_points()
            .is_none());
    }

    #[test]
    fn descriptor_json() {
        let m = EntireMap::from_json(r#"{"family":"exp_lambda","lambda":0.25}"#).unwrap();
        assert_eq!(m, EntireMap::ExpLambda { lambda: 0.25 });
        assert_eq!(
            EntireMap::from_json(r#"{"family":"zexp"}"#).unwrap(),
            EntireMap::ZExp
        );
        assert!(EntireMap::from_json(r#"{"family":"exp_lambda"}"#).is_err());
        assert!(EntireMap::from_json(r#"{"family":"zexp","lambda":1}"#).is_err());
        assert!(EntireMap::from_json(r#"{"family":"sine"}"#).is_err());
        let back = serde_json::to_string(&EntireMap::ZPlusExp).unwrap();
        assert_eq!(back, r#"{"family":"z_plus_exp"}"#);
    }

    #[test]
    fn iterate_with_derivative_matches_product() {
        let m = EntireMap::ZExp;
        let z = c(0.3, 0.2);
        let (w, d) = m.iterate_with_derivative(z, 3).unwrap();
        let z1 = m.eval(z).unwrap();
        let z2 = m.eval(z1).unwrap();
        let expect =
            m.derivative(z).unwrap() * m.derivative(z1).unwrap() * m.derivative(z2).unwrap();
        assert!((w - m.eval(z2).unwrap()).norm() < 1e-15);
        assert!((d - expect).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(
            idx in 0usize..5,
            r in 0.0f64..10.0,
            t in 0.0f64..std::f64::consts::TAU,
        ) {
            let m = ALL[idx];
            let z = Complex64::from_polar(r, t);
            let h = 1e-6;
            let fd = (m.eval(z + h).unwrap() - m.eval(z - h).unwrap()) / (2.0 * h);
            let d = m.derivative(z).unwrap();
            prop_assert!((d - fd).norm() / (1.0 + d.norm()) < 1e-6, "{m} at {z}: {d} vs {fd}");
        }
    }
}
