//! Two-sided bounds for the hyperbolic density of `W = ℂ ∖ P`.
//!
//! Conventions (curvature −1):
//! * disk: `2/(1 − |z|²)`, so `D(z, d) ⊂ W` gives `ρ_W(z) ≤ 2/d`;
//! * punctured disk: `1/(|ζ| log(1/|ζ|))`;
//! * `ℂ ∖ {0, 1}`: `ρ(ζ) ≥ 1/(2|ζ|(|log|ζ|| + K))`, `K ≈ Γ(1/4)⁴/(4π²)`.
//!
//! Monotonicity (`W ⊂ W'` gives `ρ_W ≥ ρ_W'`) turns each of these into a bound.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branches::{apply_chain_path, BranchChain};
use crate::catalog::{EntireMap, PostsingularCloud};

pub const DEFAULT_K: f64 = 4.38;

/// Pairs for the lower bound are drawn from this many nearest points.
const PAIR_POOL: usize = 48;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperbolicError {
    #[error("{z} is within {distance:e} of the postsingular set")]
    OnPostsingularSet { z: Complex64, distance: f64 },
    #[error("lower bound needs at least two distinct points, found {found}")]
    TooFewPoints { found: usize },
    #[error("{z} lies on the slit [0, c]")]
    OnSegment { z: Complex64 },
    #[error("segment length must be positive and finite")]
    BadSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerMethod {
    TwicePunctured,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperMethod {
    InscribedDisk,
    Segment,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBound {
    pub at: Complex64,
    pub lower: f64,
    pub upper: f64,
    pub method_lower: LowerMethod,
    pub method_upper: UpperMethod,
}

/// A finite sample of `P`, with what is known about the unsampled rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<Complex64>,
    /// Every point of `P` lies within this distance of some sample point.
    pub tail_radius: f64,
    /// `P ⊂ [0, c]`.
    pub within_segment: Option<f64>,
    /// `P = [0, c]` exactly; densities are exact.
    pub exact_segment: bool,
}

impl PointSet {
    pub fn cloud(points: Vec<Complex64>) -> Self {
        let mut points = points;
        points.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        points.dedup();
        PointSet {
            points,
            tail_radius: 0.0,
            within_segment: None,
            exact_segment: false,
        }
    }

    pub fn from_postsingular(cloud: &PostsingularCloud) -> Self {
        Self::cloud(cloud.points())
    }

    /// The whole slit `[0, c]`.
    pub fn segment(c: f64) -> Result<Self, HyperbolicError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(HyperbolicError::BadSegment);
        }
        Ok(PointSet {
            points: vec![Complex64::new(0.0, 0.0), Complex64::new(c, 0.0)],
            tail_radius: 0.0,
            within_segment: Some(c),
            exact_segment: true,
        })
    }

    pub fn with_tail_radius(mut self, r: f64) -> Self {
        self.tail_radius = r.max(0.0);
        self
    }

    pub fn within_segment(mut self, c: f64) -> Self {
        self.within_segment = Some(c);
        self
    }

    pub fn distance(&self, z: Complex64) -> f64 {
        if let (true, Some(c)) = (self.exact_segment, self.within_segment) {
            return segment_distance(c, z);
        }
        nearest_distance(&self.points, z) - self.tail_radius
    }

    pub fn bounds(&self, z: Complex64, k: f64) -> Result<DensityBound, HyperbolicError> {
        if let (true, Some(c)) = (self.exact_segment, self.within_segment) {
            let v = segment_complement_density(c, z)?;
            return Ok(DensityBound {
                at: z,
                lower: v,
                upper: v,
                method_lower: LowerMethod::Exact,
                method_upper: UpperMethod::Exact,
            });
        }
        let d = self.distance(z);
        if !(d >= 1e-14) {
            return Err(HyperbolicError::OnPostsingularSet {
                z,
                distance: d.max(0.0),
            });
        }
        let lower = density_lower_with(&self.points, z, k)?;
        let mut upper = 2.0 / d;
        let mut method_upper = UpperMethod::InscribedDisk;
        if let Some(c) = self.within_segment {
            if let Ok(s) = segment_complement_density(c, z) {
                if s < upper {
                    upper = s;
                    method_upper = UpperMethod::Segment;
                }
            }
        }
        Ok(DensityBound {
            at: z,
            lower,
            upper,
            method_lower: LowerMethod::TwicePunctured,
            method_upper,
        })
    }
}

fn nearest_distance(points: &[Complex64], z: Complex64) -> f64 {
    points
        .iter()
        .map(|p| (z - p).norm())
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(c: f64, z: Complex64) -> f64 {
    let x = z.re.clamp(0.0, c);
    (z - Complex64::new(x, 0.0)).norm()
}

/// `2/dist(z, P)`.
pub fn density_upper(points: &[Complex64], z: Complex64) -> Result<f64, HyperbolicError> {
    let d = nearest_distance(points, z);
    if !(d >= 1e-14) {
        return Err(HyperbolicError::OnPostsingularSet { z, distance: d });
    }
    Ok(2.0 / d)
}

/// Twice-punctured lower bound with the default `K`.
pub fn density_lower(points: &[Complex64], z: Complex64) -> Result<f64, HyperbolicError> {
    density_lower_with(points, z, DEFAULT_K)
}

/// Best twice-punctured lower bound over pairs `{a, b} ⊂ P`.
///
/// The pair `a ↦ 0, b ↦ 1` contributes `1/(2|z−a|(|log(|z−a|/|b−a|)| + K))`.
/// Pairs come from the nearest points of `P`.
pub fn density_lower_with(
    points: &[Complex64],
    z: Complex64,
    k: f64,
) -> Result<f64, HyperbolicError> {
    let mut near: Vec<(f64, Complex64)> = points.iter().map(|p| ((z - p).norm(), *p)).collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    near.dedup_by(|a, b| a.1 == b.1);
    if near.len() < 2 {
        return Err(HyperbolicError::TooFewPoints { found: near.len() });
    }
    if near[0].0 < 1e-14 {
        return Err(HyperbolicError::OnPostsingularSet {
            z,
            distance: near[0].0,
        });
    }
    near.truncate(PAIR_POOL);
    let mut best: f64 = 0.0;
    for (i, &(da, a)) in near.iter().enumerate() {
        for &(_, b) in near.iter().skip(i + 1) {
            let sep = (b - a).norm();
            let db = (z - b).norm();
            let term = |d: f64| 1.0 / (2.0 * d * ((d / sep).ln().abs() + k));
            best = best.max(term(da)).max(term(db));
        }
    }
    Ok(best)
}

/// Exact density of `ℂ ∖ [0, c]`.
pub fn segment_complement_density(c: f64, z: Complex64) -> Result<f64, HyperbolicError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(HyperbolicError::BadSegment);
    }
    if segment_distance(c, z) < 1e-14 * c {
        return Err(HyperbolicError::OnSegment { z });
    }
    // u = (ζ + 1/ζ)/2 with 0 < |ζ| < 1.
    let u = 2.0 * z / c - 1.0;
    let mut zeta = u - (u - 1.0).sqrt() * (u + 1.0).sqrt();
    if zeta.norm() > 1.0 {
        zeta = 1.0 / zeta;
    }
    let r = zeta.norm();
    let dzeta_du = 2.0 * zeta * zeta / (zeta * zeta - 1.0);
    Ok(dzeta_du.norm() * (2.0 / c) / (r * (1.0 / r).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    Ok,
    Inconclusive,
    Violation,
}

impl AuditVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            AuditVerdict::Ok => "ok",
            AuditVerdict::Inconclusive => "inconclusive",
            AuditVerdict::Violation => "violation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBound {
    pub point: Complex64,
    pub image: Complex64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    pub verdict: AuditVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub point: Complex64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub ratio_bounds: Vec<RatioBound>,
    pub certified_violations: Vec<RatioBound>,
    pub skipped: Vec<SkippedPoint>,
    pub k: f64,
}

impl ContractionReport {
    pub fn max_ratio_upper(&self) -> f64 {
        self.ratio_bounds
            .iter()
            .map(|r| r.ratio_upper)
            .fold(0.0, f64::max)
    }

    /// Columns `re, im, ratio_lower, ratio_upper, verdict`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "re,im,ratio_lower,ratio_upper,verdict")?;
        for r in &self.ratio_bounds {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.point.re,
                r.point.im,
                r.ratio_lower,
                r.ratio_upper,
                r.verdict.as_str()
            )?;
        }
        Ok(())
    }
}

/// Brackets `ρ_W(F(x))·|F'(x)| / ρ_W(x)` for each region point, where `F` is
/// the chain. Schwarz–Pick says the true value is at most 1; a violation is
/// recorded only when the lower end of the bracket exceeds 1.
pub fn contraction_audit(
    map: &EntireMap,
    chain: &BranchChain,
    region: &[Complex64],
    set: &PointSet,
    k: f64,
) -> ContractionReport {
    let results: Vec<Result<RatioBound, SkippedPoint>> = region
        .par_iter()
        .map(|&x| audit_point(map, chain, x, set, k))
        .collect();
    let mut ratio_bounds = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(b) => ratio_bounds.push(b),
            Err(s) => skipped.push(s),
        }
    }
    let certified_violations = ratio_bounds
        .iter()
        .filter(|b| b.verdict == AuditVerdict::Violation)
        .copied()
        .collect();
    ContractionReport {
        ratio_bounds,
        certified_violations,
        skipped,
        k,
    }
}

fn audit_point(
    map: &EntireMap,
    chain: &BranchChain,
    x: Complex64,
    set: &PointSet,
    k: f64,
) -> Result<RatioBound, SkippedPoint> {
    let skip = |reason: String| SkippedPoint { point: x, reason };
    if set.distance(x) < 1e-10 {
        return Err(skip("point too close to P".into()));
    }
    if chain.is_empty() {
        return Ok(RatioBound {
            point: x,
            image: x,
            ratio_lower: 1.0,
            ratio_upper: 1.0,
            verdict: AuditVerdict::Ok,
        });
    }
    let path = apply_chain_path(chain, x).map_err(|e| skip(e.to_string()))?;
    let image = *path.last().expect("nonempty chain");
    if set.distance(image) < 1e-10 {
        return Err(skip("image too close to P".into()));
    }
    let mut dfinv = 1.0;
    for z in &path {
        let d = map.derivative(*z).map_err(|e| skip(e.to_string()))?;
        dfinv /= d.norm();
    }
    let bx = set.bounds(x, k).map_err(|e| skip(e.to_string()))?;
    let bf = set.bounds(image, k).map_err(|e| skip(e.to_string()))?;
    let ratio_lower = bf.lower * dfinv / bx.upper;
    let ratio_upper = bf.upper * dfinv / bx.lower;
    let verdict = if ratio_lower > 1.0 {
        AuditVerdict::Violation
    } else if ratio_upper <= 1.0 {
        AuditVerdict::Ok
    } else {
        AuditVerdict::Inconclusive
    };
    Ok(RatioBound {
        point: x,
        image,
        ratio_lower,
        ratio_upper,
        verdict,
    })
}

/// `n` points on the circle `|z − center| = r`.
pub fn circle_points(center: Complex64, r: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| center + Complex64::from_polar(r, std::f64::consts::TAU * i as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branches::pullback_chain;
    use crate::catalog::postsingular_sample;
    use proptest::prelude::*;
    use std::f64::consts::{E, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero_one() -> Vec<Complex64> {
        vec![c(0.0, 0.0), c(1.0, 0.0)]
    }

    // ρ_{ℂ∖{0,1}} from the modular-function uniformization (mpmath, 30 digits).
    const RHO01: &[([f64; 2], f64)] = &[
        ([-1.0, 0.0], 0.22847329052223181),
        ([0.5, 0.5], 0.56658419549740326),
        ([2.0, 1.0], 0.16826130189286570),
        ([-0.3, 2.0], 0.12755391045149894),
        ([0.1, -0.05], 1.9183621025613937),
        ([3.0, -4.0], 0.048861912068321860),
    ];

    #[test]
    fn upper_examples() {
        assert_eq!(density_upper(&zero_one(), c(0.5, 0.0)).unwrap(), 4.0);
        assert_eq!(density_upper(&[c(0.0, 0.0)], c(1.0, 0.0)).unwrap(), 2.0);
        assert!(matches!(
            density_upper(&zero_one(), c(1.0, 0.0)),
            Err(HyperbolicError::OnPostsingularSet { .. })
        ));
    }

    #[test]
    fn zexp_cloud_upper() {
        let cloud = postsingular_sample(&EntireMap::ZExp, 40, 1e6, 0);
        let z = c(0.0, 2.0 * PI);
        let v = density_upper(&cloud.points(), z).unwrap();
        assert!((v - 2.0 / (2.0 * PI)).abs() < 1e-3, "{v}");
    }

    #[test]
    fn lower_examples() {
        let lo = density_lower(&zero_one(), c(-1.0, 0.0)).unwrap();
        assert!((lo - 1.0 / (2.0 * 4.38)).abs() < 1e-12, "{lo}");
        assert!(lo <= density_upper(&zero_one(), c(-1.0, 0.0)).unwrap());
        assert!(matches!(
            density_lower(&[c(0.0, 0.0)], c(1.0, 0.0)),
            Err(HyperbolicError::TooFewPoints { found: 1 })
        ));
    }

    #[test]
    fn k_against_uniformization() {
        for &(z, exact) in RHO01 {
            let z = c(z[0], z[1]);
            let lo = density_lower(&zero_one(), z).unwrap();
            let up = density_upper(&zero_one(), z).unwrap();
            assert!(lo <= exact && exact <= up, "{z}: {lo} ≤ {exact} ≤ {up}");
        }
    }

    #[test]
    fn segment_examples() {
        // Kernel: |ζ| = 1/e gives e.
        let r = 1.0 / E;
        assert!((1.0 / (r * (1.0 / r).ln()) - E).abs() < 1e-15);
        // Values from the independent route ζ = (s − 1)/(s + 1), s = sqrt(z/(z − c)).
        let cases = [
            (1.0 / E, c(0.5 / E, 1.0 / E), 1.6841544988173658),
            (1.0, c(0.5, 1.0), 0.61956581587130304),
            (1.0, c(3.0, 0.0), 0.17808526024333401),
            (1.0, c(-1.0, 0.0), 0.40113908086223860),
        ];
        for (cc, z, want) in cases {
            let got = segment_complement_density(cc, z).unwrap();
            assert!(
                (got - want).abs() < 1e-12 * want,
                "{cc} {z}: {got} vs {want}"
            );
        }
        let far = segment_complement_density(1.0, c(1e8, 1e8)).unwrap();
        assert!(far < 1e-8);
        assert!(matches!(
            segment_complement_density(1.0, c(0.5, 0.0)),
            Err(HyperbolicError::OnSegment { .. })
        ));
    }

    #[test]
    fn exact_segment_bounds_agree() {
        let s = PointSet::segment(1.0).unwrap();
        let b = s.bounds(c(0.3, 0.7), DEFAULT_K).unwrap();
        assert!((b.lower - b.upper).abs() < 1e-9);
        assert_eq!(b.method_lower, LowerMethod::Exact);
    }

    #[test]
    fn segment_sandwich() {
        let pts: Vec<Complex64> = (0..200).map(|i| c(i as f64 / 199.0, 0.0)).collect();
        let mut rng = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let z =
                c(-2.0 + 5.0 * next(), 0.05 + 2.0 * next()) * if next() < 0.5 { 1.0 } else { -1.0 };
            let lo = density_lower(&pts, z).unwrap();
            let ex = segment_complement_density(1.0, z).unwrap();
            let up = density_upper(&pts, z).unwrap();
            assert!(lo <= ex && ex <= up, "{z}: {lo} {ex} {up}");
        }
    }

    #[test]
    fn zexp_audit_at_two_pi_i() {
        let p = c(0.0, 2.0 * PI);
        let map = EntireMap::ZExp;
        assert!((map.eval(p).unwrap() - p).norm() < 1e-12);
        let chain = pullback_chain(&map, &[p, p]).unwrap();
        let cloud = postsingular_sample(&map, 40, 1e6, 0);
        let set = PointSet::from_postsingular(&cloud).within_segment(1.0 / E);
        let report = contraction_audit(&map, &chain, &circle_points(p, 0.3, 100), &set, DEFAULT_K);
        assert!(report.skipped.is_empty(), "{:?}", report.skipped);
        assert_eq!(report.ratio_bounds.len(), 100);
        assert!(report.certified_violations.is_empty());
    }

    #[test]
    fn identity_chain_ratios_are_one() {
        let map = EntireMap::ZExp;
        let chain = BranchChain::identity(map, c(0.0, 2.0 * PI));
        let set = PointSet::from_postsingular(&postsingular_sample(&map, 10, 1e6, 0));
        let report = contraction_audit(
            &map,
            &chain,
            &circle_points(c(0.0, 6.0), 0.3, 20),
            &set,
            DEFAULT_K,
        );
        assert!(report
            .ratio_bounds
            .iter()
            .all(|r| r.ratio_lower == 1.0 && r.ratio_upper == 1.0));
        assert!(report.certified_violations.is_empty());
    }

    #[test]
    fn exp_lambda_slack_shrinks_with_depth() {
        let map = EntireMap::ExpLambda { lambda: 0.25 };
        let (qa, qr) = map.exp_lambda_real_fixed_points().unwrap();
        let chain = pullback_chain(&map, &[c(qr, 0.0), c(qr, 0.0)]).unwrap();
        let region = circle_points(c(qr, 0.0), 0.1, 64);
        let mut prev = f64::INFINITY;
        for depth in [10, 20, 40] {
            let cloud = postsingular_sample(&map, depth, 1e6, 0);
            let set = PointSet::from_postsingular(&cloud).within_segment(qa);
            let report = contraction_audit(&map, &chain, &region, &set, DEFAULT_K);
            assert!(report.certified_violations.is_empty());
            let m = report.max_ratio_upper();
            assert!(m <= prev + 1e-12, "depth {depth}: {m} > {prev}");
            prev = m;
        }
        let mut buf = Vec::new();
        contraction_audit(
            &map,
            &chain,
            &region,
            &PointSet::cloud(vec![c(0.0, 0.0), c(qa, 0.0)]),
            DEFAULT_K,
        )
        .write_csv(&mut buf)
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 65);
    }

    fn arb_points() -> impl Strategy<Value = Vec<Complex64>> {
        proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..12)
            .prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect())
    }

    proptest! {
        #[test]
        fn sandwich(p in arb_points(), zr in -4.0f64..4.0, zi in -4.0f64..4.0) {
            let z = c(zr, zi);
            prop_assume!(nearest_distance(&p, z) > 1e-6);
            let mut q = p.clone();
            q.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            q.dedup();
            prop_assume!(q.len() >= 2);
            prop_assert!(density_lower(&p, z).unwrap() <= density_upper(&p, z).unwrap());
        }

        #[test]
        fn monotone_in_p(p in arb_points(), extra in (-3.0f64..3.0, -3.0f64..3.0), zr in -4.0f64..4.0, zi in -4.0f64..4.0) {
            let z = c(zr, zi);
            let mut q = p.clone();
            q.push(c(extra.0, extra.1));
            prop_assume!(nearest_distance(&q, z) > 1e-6);
            prop_assume!(p.len() < PAIR_POOL);
            prop_assert!(density_lower(&q, z).unwrap() >= density_lower(&p, z).unwrap());
            prop_assert!(density_upper(&q, z).unwrap() >= density_upper(&p, z).unwrap());
        }

        #[test]
        fn scaling_covariance(p in arb_points(), zr in -4.0f64..4.0, zi in -4.0f64..4.0, s in 0.1f64..10.0, t in 0.0f64..6.3) {
            let z = c(zr, zi);
            prop_assume!(nearest_distance(&p, z) > 1e-6);
            let k = Complex64::from_polar(s, t);
            let scaled: Vec<Complex64> = p.iter().map(|a| a * k).collect();
            let a = density_lower(&p, z).unwrap();
            let b = density_lower(&scaled, z * k).unwrap();
            prop_assert!((b * s - a).abs() <= 1e-9 * a);
        }
    }
}
