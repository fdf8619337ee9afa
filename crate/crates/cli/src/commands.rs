//! Subcommand pipelines. Each one returns its artifacts in memory; the runner
//! writes them.

use std::fmt::Display;

use fatoulab_core::boundary::{
    access_curve, escaping_component_scan, find_in_regions, newton_periodic,
    parabolic_boundary_scan, periodic_chain, SearchOptions,
};
use fatoulab_core::catalog::{postsingular_sample, ps_audit, PsAuditSettings};
use fatoulab_core::harmonic::{calibrate, measure_report, MeasureSettings};
use fatoulab_core::hyperbolic::{circle_points, contraction_audit, AuditVerdict, PointSet};
use fatoulab_core::inner::{
    circle_periodic_points, denjoy_wolff, verify_inner_candidate, write_periodic_csv,
};
use fatoulab_core::raster::{classify_grid, ClassificationGrid};
use fatoulab_core::{EntireMap, OrbitParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::Subcommand;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Failure {
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("calibration failure: {0}")]
    Calibration(String),
}

fn num(e: impl Display) -> Failure {
    Failure::Numerical(e.to_string())
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub results: Value,
    pub failure: Option<Failure>,
}

impl Outcome {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn json(&mut self, name: &str, value: &impl Serialize) {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.file(name, text.into_bytes());
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) {
        let mut buf = Vec::new();
        write(&mut buf).expect("writing to memory");
        self.file(name, buf);
    }
}

/// Runs `sub` on a resolved config. Partial results survive a failure.
pub fn execute(sub: Subcommand, cfg: &RunConfig) -> Outcome {
    let mut out = Outcome {
        results: json!({}),
        ..Outcome::default()
    };
    let r = match sub {
        Subcommand::Render => render(cfg, &mut out),
        Subcommand::Periodic => periodic(cfg, &mut out),
        Subcommand::Access => access(cfg, &mut out),
        Subcommand::Audit => audit(cfg, &mut out),
        Subcommand::Measure => measure(cfg, &mut out),
        Subcommand::Inner => inner(cfg, &mut out),
        Subcommand::Scan => scan(cfg, &mut out),
    };
    out.failure = r.err();
    out
}

fn map_of(cfg: &RunConfig) -> Result<EntireMap, Failure> {
    cfg.map().map_err(num)
}

pub fn orbit_params(cfg: &RunConfig, map: &EntireMap, budget: usize) -> OrbitParams {
    let mut p = OrbitParams::new(
        budget,
        cfg.tolerances.escape_radius,
        map.default_attractors(&cfg.window),
        cfg.tolerances.attractor,
    );
    p.parabolic_radius = cfg.tolerances.parabolic_radius;
    p
}

pub fn build_grid(cfg: &RunConfig, map: &EntireMap) -> Result<ClassificationGrid, Failure> {
    let params = orbit_params(cfg, map, cfg.budgets.orbit);
    classify_grid(
        map,
        cfg.window,
        cfg.resolution.nx,
        cfg.resolution.ny,
        &params,
    )
    .map_err(num)
}

fn render(cfg: &RunConfig, out: &mut Outcome) -> Result<(), Failure> {
    let map = map_of(cfg)?;
    let s = cfg.render.clone().unwrap_or_default();
    let grid = build_grid(cfg, &map)?;
    out.csv("grid.ppm", |b| {
        if s.supersample {
            grid.write_ppm_supersampled(b)
        } else {
            grid.write_ppm(b)
        }
    });
    out.csv("grid.csv", |b| grid.write_csv(b));
    let mut kinds = std::collections::BTreeMap::<&str, usize>::new();
    for c in &grid.cells {
        *kinds.entry(c.kind.tag()).or_default() += 1;
    }
    let major = grid.major_components(s.major_fraction);
    out.results = json!({
        "components": major,
        "component_count": major.len(),
        "all_component_count": grid.components().len(),
        "cell_counts": kinds,
    });
    Ok(())
}

fn search_options(cfg: &RunConfig) -> SearchOptions {
    let s = cfg.periodic.clone().unwrap_or_default();
    SearchOptions {
        return_cells: s.return_cells,
        pullback_budget: cfg.budgets.pullback,
        shuffle_seed: s.shuffle_seed,
        max_candidates: s.max_candidates,
    }
}

fn periodic(cfg: &RunConfig, out: &mut Outcome) -> Result<(), Failure> {
    let map = map_of(cfg)?;
    let s = cfg.periodic.clone().unwrap_or_default();
    let grid = build_grid(cfg, &map)?;
    let found = find_in_regions(&map, &grid, &s.regions, s.max_period, &search_options(cfg));
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (region, r) in s.regions.iter().zip(found) {
        match r {
            Ok(p) => points.push(p),
            Err(e) => failures.push(json!({"region": region, "error": e.to_string()})),
        }
    }
    out.json("points.json", &points);
    out.results = json!({"points": points, "failures": failures});
    if points.is_empty() {
        return Err(Failure::Numerical(
            "no periodic boundary point found in any region".into(),
        ));
    }
    Ok(())
}

fn access(cfg: &RunConfig, out: &mut Outcome) -> Result<(), Failure> {
    let map = map_of(cfg)?;
    let s = cfg.access.clone().unwrap_or_default();
    let (seed, z0) = (s.periodic_seed.expect("resolved"), s.z0.expect("resolved"));
    let grid = build_grid(cfg, &map)?;
    let p = newton_periodic(&map, seed, s.period, Some(&grid)).map_err(num)?;
    out.json("points.json", &[&p]);
    out.results = json!({"periodic_point": p});
    let curve = access_curve(&map, &p, z0, s.steps, &grid).map_err(num)?;
    out.csv("curve.csv", |b| curve.write_csv(b));
    let ratios: Vec<f64> = curve
        .gap_ratios()
        .into_iter()
        .zip(curve.gaps.iter().skip(1))
        .filter(|(_, &g)| g > 1e-12)
        .map(|(r, _)| r)
        .collect();
    out.results = json!({
        "periodic_point": p,
        "landing_point": curve.landing_point,
        "vertices": curve.vertices.len(),
        "final_gap": curve.gaps.last(),
        "max_step_gap": curve.max_step_gap,
        "max_gap_ratio": ratios.iter().cloned().fold(0.0, f64::max),
    });
    Ok(())
}

fn audit(cfg: &RunConfig, out: &mut Outcome) -> Result<(), Failure> {
    let map = map_of(cfg)?;
    let s = cfg.audit.clone().unwrap_or_default();
    let grid = build_grid(cfg, &map)?;
    let cloud = postsingular_sample(&map, s.depth, s.cloud_escape_radius, cfg.k_bound());
    let ps = ps_audit(
        &map,
        &grid,
        &cloud,
        &PsAuditSettings {
            delta: s.ps_delta,
            allowed_contacts: s.allowed_contacts.clone().unwrap_or_default(),
            check_sps: true,
        },
    )
    .map_err(num)?;
    out.csv("ps_audit.csv", |b| ps.write_csv(b));

    let p = newton_periodic(&map, s.fixed_point_seed.expect("resolved"), s.period, None)
        .map_err(num)?;
    let chain = periodic_chain(&map, &p).map_err(num)?;
    let mut set = PointSet::from_postsingular(&cloud);
    if let Some(c) = s.segment_hull {
        set = set.within_segment(c);
    }
    let region = circle_points(p.point, s.radius, s.points);
    let report = contraction_audit(&map, &chain, &region, &set, s.k);
    out.csv("audit.csv", |b| report.write_csv(b));
    let conclusive = report
        .ratio_bounds
        .iter()
        .filter(|r| r.verdict != AuditVerdict::Inconclusive)
        .count();
    out.results = json!({
        "fixed_point": p,
        "region_points": region.len(),
        "bounded": report.ratio_bounds.len(),
        "conclusive": conclusive,
        "certified_violations": report.certified_violations.len(),
        "skipped": report.skipped.len(),
        "max_ratio_upper": report.max_ratio_upper(),
        "ps_evidence": ps.ps_evidence,
        "sps_evidence": ps.sps_evidence,
        "ps_min_distance": ps.min_distance,
        "ps_delta": ps.delta,
        "ps_offending": ps.offending_samples.len(),
        "ps_exempt": ps.exempt_samples,
    });
    if !report.certified_violations.is_empty() {
        return Err(Failure::Numerical(format!(
            "{} certified contraction violations",
            report.certified_violations.len()
        )));
    }
    Ok(())
}

fn measure(cfg: &RunConfig, out: &mut Outcome) -> Result<(), Failure> {
    let map = map_of(cfg)?;
    let s = cfg.measure.clone().unwrap_or_default();
    let cal = calibrate(s.calibration.samples, cfg.rng_seed).map_err(num)?;
    out.results = json!({"calibration": cal});
    if !(cal.chi2_p >= s.calibration.chi2_p_min && cal.ks_distance <= s.calibration.ks_max) {
        return Err(Failure::Calibration(format!(
            "chi2 p = {:.4} (min {}), KS = {:.4} (max {})",
            cal.chi2_p, s.calibration.chi2_p_min, cal.ks_distance, s.calibration.ks_max
        )));
    }
    let grid = build_grid(cfg, &map)?;
    let settings = MeasureSettings {
        basepoint: s.basepoint.expect("resolved"),
        n_samples: s.samples.expect("resolved"),
        walk_eps: s.walk_eps.expect("resolved"),
        orbit_budget: s.orbit_budget.expect("resolved"),
        targets: s.targets.clone(),
        rng_seed: cfg.rng_seed,
    };
    let report = measure_report(&grid, &settings).map_err(num)?;
    out.json("measure.json", &report);
    out.csv("hits.csv", |b| report.write_hits_csv(b));
    out.results = json!({
        "calibration": cal,
        "estimate_kind": report.estimate_kind,
        "samples": report.samples,
        "window_exits": report.window_exits,
        "counts": report.counts,
        "fractions": report.fractions,
        "dense_orbit_stat": report.dense_orbit_stat,
    });
    Ok(())
}

fn inner(cfg: &RunConfig, out: &mut Outcome) -> Result<(), Failure> {
    let s = cfg.inner.clone().unwrap_or_default();
    let dw = denjoy_wolff(&s.blaschke, s.dw_tol, s.dw_budget).map_err(num)?;
    let mut all = Vec::new();
    let mut counts = Vec::new();
    for &n in &s.periods {
        let pts = circle_periodic_points(&s.blaschke, n).map_err(num)?;
        counts.push(json!({"n": n, "count": pts.len()}));
        all.extend(pts);
    }
    out.csv("periodic.csv", |b| write_periodic_csv(&all, b));
    let candidate = match &s.candidate {
        Some(c) => Some(verify_inner_candidate(c, s.candidate_samples).map_err(num)?),
        None => None,
    };
    let doc = json!({
        "blaschke": s.blaschke,
        "denjoy_wolff": dw,
        "periodic_counts": counts,
        "candidate": candidate,
    });
    out.json("inner.json", &doc);
    out.results = doc;
    Ok(())
}

fn scan(cfg: &RunConfig, out: &mut Outcome) -> Result<(), Failure> {
    let map = map_of(cfg)?;
    let s = cfg.scan.clone().unwrap_or_default();
    let params = orbit_params(cfg, &map, s.budget.expect("resolved"));
    let doc = if s.periodic_seed.is_none() && map.parabolic_point().is_some() {
        let r = parabolic_boundary_scan(&map, &s.probes, &params).map_err(num)?;
        json!({
            "kind": "parabolic",
            "summary": {
                "escaping": r.escaping.len(),
                "interior": r.interior.len(),
                "other": r.other.len(),
                "exempt": r.exempt.len(),
            },
            "scan": r,
        })
    } else {
        let p = match s.periodic_seed {
            Some(seed) => Some(newton_periodic(&map, seed, s.period, None).map_err(num)?),
            None => None,
        };
        let r = escaping_component_scan(&map, p.as_ref(), &s.probes, &params);
        json!({
            "kind": "escaping",
            "periodic_point": p,
            "summary": {
                "escaping": r.escaping.len(),
                "non_escaping": r.non_escaping.len(),
                "periodic": r.periodic.len(),
            },
            "scan": r,
        })
    };
    out.json("scan.json", &doc);
    out.results = doc["summary"].clone();
    Ok(())
}
