//! Run configuration: JSON in, resolved JSON (defaults filled) echoed out.

use std::f64::consts::TAU;

use fatoulab_core::catalog::AllowedContact;
use fatoulab_core::inner::{BlaschkeProduct, RationalCircleMap};
use fatoulab_core::{Complex64, EntireMap, Window};
use serde::{Deserialize, Serialize};

use crate::Subcommand;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub nx: usize,
    pub ny: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        // Odd row count puts cell centers on the real axis.
        Resolution { nx: 200, ny: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub orbit: usize,
    pub pullback: usize,
    /// Walk-on-spheres samples.
    pub walk: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            orbit: 200,
            pullback: 500,
            walk: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub attractor: f64,
    pub escape_radius: f64,
    pub parabolic_radius: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            attractor: 1e-9,
            escape_radius: 1e3,
            parabolic_radius: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    /// Components smaller than this fraction of the raster are not listed.
    pub major_fraction: f64,
    pub supersample: bool,
}

impl Default for RenderSection {
    fn default() -> Self {
        RenderSection {
            major_fraction: 0.01,
            supersample: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicSection {
    /// Seed regions; empty means the whole window.
    pub regions: Vec<Window>,
    pub max_period: usize,
    pub return_cells: f64,
    pub shuffle_seed: Option<u64>,
    pub max_candidates: usize,
}

impl Default for PeriodicSection {
    fn default() -> Self {
        PeriodicSection {
            regions: Vec::new(),
            max_period: 1,
            return_cells: 5.0,
            shuffle_seed: None,
            max_candidates: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccessSection {
    pub periodic_seed: Option<Complex64>,
    pub period: usize,
    pub z0: Option<Complex64>,
    pub steps: usize,
}

impl Default for AccessSection {
    fn default() -> Self {
        AccessSection {
            periodic_seed: None,
            period: 1,
            z0: None,
            steps: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub fixed_point_seed: Option<Complex64>,
    pub period: usize,
    pub radius: f64,
    pub points: usize,
    pub depth: usize,
    pub k: f64,
    /// `P ⊂ [0, c]`, when known.
    pub segment_hull: Option<f64>,
    pub cloud_escape_radius: f64,
    pub ps_delta: Option<f64>,
    /// Defaults to a 0.1-disk around the parabolic point, if any.
    pub allowed_contacts: Option<Vec<AllowedContact>>,
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection {
            fixed_point_seed: None,
            period: 1,
            radius: 0.1,
            points: 100,
            depth: 40,
            k: fatoulab_core::hyperbolic::DEFAULT_K,
            segment_hull: None,
            cloud_escape_radius: 1e6,
            ps_delta: None,
            allowed_contacts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub samples: usize,
    pub chi2_p_min: f64,
    pub ks_max: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            samples: 10_000,
            chi2_p_min: 0.01,
            ks_max: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct MeasureSection {
    pub basepoint: Option<Complex64>,
    pub samples: Option<usize>,
    pub orbit_budget: Option<usize>,
    pub walk_eps: Option<f64>,
    pub targets: Vec<Complex64>,
    pub calibration: CalibrationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerSection {
    pub blaschke: BlaschkeProduct,
    pub periods: Vec<usize>,
    pub dw_tol: f64,
    pub dw_budget: usize,
    pub candidate: Option<RationalCircleMap>,
    pub candidate_samples: usize,
}

impl Default for InnerSection {
    fn default() -> Self {
        InnerSection {
            blaschke: BlaschkeProduct::power(2),
            periods: vec![1, 2, 3, 4],
            dw_tol: 1e-12,
            dw_budget: 100_000,
            candidate: None,
            candidate_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub probes: Vec<Complex64>,
    pub periodic_seed: Option<Complex64>,
    pub period: usize,
    pub budget: Option<usize>,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            probes: Vec::new(),
            periodic_seed: None,
            period: 1,
            budget: None,
        }
    }
}

fn default_window() -> Window {
    Window::new(-4.0, 4.0, -4.0, 4.0)
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub map: Option<EntireMap>,
    #[serde(default = "default_window")]
    pub window: Window,
    #[serde(default)]
    pub resolution: Resolution,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access: Option<AccessSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<InnerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| bad(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn map(&self) -> Result<EntireMap, ConfigError> {
        self.map
            .ok_or_else(|| bad("this subcommand needs a \"map\""))
    }

    /// Fills the active subcommand's section with defaults (including
    /// map-dependent ones) and validates the result.
    pub fn resolve(mut self, sub: Subcommand) -> Result<Self, ConfigError> {
        self.validate_common(sub)?;
        let fixed = self
            .map
            .and_then(|m| m.exp_lambda_real_fixed_points())
            .map(|(a, r)| (Complex64::new(a, 0.0), Complex64::new(r, 0.0)));
        match sub {
            Subcommand::Render => {
                let s = self.render.get_or_insert_with(Default::default);
                if !(s.major_fraction >= 0.0 && s.major_fraction < 1.0) {
                    return Err(bad("render.major_fraction must lie in [0, 1)"));
                }
            }
            Subcommand::Periodic => {
                let window = self.window;
                let s = self.periodic.get_or_insert_with(Default::default);
                if s.regions.is_empty() {
                    s.regions.push(window);
                }
                if s.max_period == 0 || s.max_candidates == 0 || !(s.return_cells > 0.0) {
                    return Err(bad(
                        "periodic: max_period, max_candidates and return_cells must be positive",
                    ));
                }
                if s.regions.iter().any(|r| !r.is_valid()) {
                    return Err(bad("periodic: invalid region"));
                }
            }
            Subcommand::Access => {
                let s = self.access.get_or_insert_with(Default::default);
                if s.periodic_seed.is_none() {
                    s.periodic_seed = fixed.map(|f| f.1);
                }
                if s.z0.is_none() {
                    // Between the two real fixed points, inside the basin.
                    s.z0 = fixed.map(|(a, r)| a + (r - a) * 0.8);
                }
                if s.periodic_seed.is_none() || s.z0.is_none() {
                    return Err(bad(
                        "access: periodic_seed and z0 are required for this map",
                    ));
                }
                if s.period == 0 {
                    return Err(bad("access.period must be positive"));
                }
            }
            Subcommand::Audit => {
                let s = self.audit.get_or_insert_with(Default::default);
                if s.fixed_point_seed.is_none() {
                    s.fixed_point_seed = fixed.map(|f| f.1);
                }
                if s.segment_hull.is_none() {
                    s.segment_hull = match self.map {
                        Some(EntireMap::ZExp) => Some((-1.0f64).exp()),
                        Some(EntireMap::ExpLambda { lambda }) if lambda > 0.0 => {
                            fixed.map(|f| f.0.re)
                        }
                        _ => None,
                    };
                }
                if s.allowed_contacts.is_none() {
                    s.allowed_contacts = Some(
                        self.map
                            .and_then(|m| m.parabolic_point())
                            .map(|point| AllowedContact { point, radius: 0.1 })
                            .into_iter()
                            .collect(),
                    );
                }
                if s.fixed_point_seed.is_none() {
                    return Err(bad("audit.fixed_point_seed is required for this map"));
                }
                if s.period == 0 || s.points == 0 || !(s.radius > 0.0) || !(s.k > 0.0) {
                    return Err(bad("audit: period, points, radius and k must be positive"));
                }
            }
            Subcommand::Measure => {
                let budgets = self.budgets.clone();
                let s = self.measure.get_or_insert_with(Default::default);
                if s.basepoint.is_none() {
                    s.basepoint = Some(fixed.map(|f| f.0).unwrap_or(Complex64::new(0.0, 0.0)));
                }
                s.samples.get_or_insert(budgets.walk);
                s.orbit_budget.get_or_insert(budgets.orbit);
                if s.walk_eps.is_none() {
                    let cell = (self.window.width() / self.resolution.nx as f64)
                        .max(self.window.height() / self.resolution.ny as f64);
                    s.walk_eps = Some(2.0 * cell);
                }
                if s.calibration.samples < 100 {
                    return Err(bad("measure.calibration.samples must be at least 100"));
                }
            }
            Subcommand::Inner => {
                let s = self.inner.get_or_insert_with(Default::default);
                if s.candidate.is_none() {
                    s.candidate = Some(
                        RationalCircleMap::real(&[3.0, 0.0, 1.0], &[1.0, 0.0, 3.0]).expect("valid"),
                    );
                }
                if let Some(c) = &s.candidate {
                    RationalCircleMap::new(c.numerator.clone(), c.denominator.clone())
                        .map_err(|e| bad(format!("inner.candidate: {e}")))?;
                }
                if s.periods.iter().any(|&n| n == 0 || n > 20) {
                    return Err(bad("inner.periods must lie in 1..=20"));
                }
            }
            Subcommand::Scan => {
                let s = self.scan.get_or_insert_with(Default::default);
                if s.probes.is_empty() {
                    return Err(bad("scan.probes must not be empty"));
                }
                if s.periodic_seed.is_none()
                    && matches!(self.map, Some(EntireMap::ExpLambda { .. }))
                {
                    s.periodic_seed = fixed.map(|f| f.1);
                }
                s.budget.get_or_insert(self.budgets.orbit);
            }
        }
        Ok(self)
    }

    fn validate_common(&self, sub: Subcommand) -> Result<(), ConfigError> {
        if sub != Subcommand::Inner {
            self.map()?;
        }
        if !self.window.is_valid() {
            return Err(bad(
                "window must have finite re_min < re_max and im_min < im_max",
            ));
        }
        let Resolution { nx, ny } = self.resolution;
        if !(2..=8192).contains(&nx) || !(2..=8192).contains(&ny) {
            return Err(bad("resolution must lie in 2..=8192 per axis"));
        }
        if self.budgets.orbit == 0 || self.budgets.pullback == 0 || self.budgets.walk == 0 {
            return Err(bad("budgets must be positive"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("attractor", t.attractor),
            ("escape_radius", t.escape_radius),
            ("parabolic_radius", t.parabolic_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("tolerances.{name} must be positive")));
            }
        }
        if self.output_dir.is_empty() {
            return Err(bad("output_dir must not be empty"));
        }
        Ok(())
    }

    /// Strips to scan for critical values `1 + 2πik` of the translation families.
    pub fn k_bound(&self) -> u32 {
        let m = self.window.im_min.abs().max(self.window.im_max.abs());
        (m / TAU).ceil() as u32 + 1
    }
}
