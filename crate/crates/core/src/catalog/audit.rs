//! Raster evidence for postsingular separation.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CatalogError, EntireMap, PostsingularCloud};
use crate::raster::{fill_with_frame, BoolRaster, ClassificationGrid, DistanceField};

/// A boundary point the postsingular set is allowed to touch, such as a
/// parabolic fixed point. Samples within `radius` of `point` are exempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllowedContact {
    pub point: Complex64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct PsAuditSettings {
    /// Required separation; `None` means two grid cells.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub allowed_contacts: Vec<AllowedContact>,
    /// Also run the filled-closure check.
    #[serde(default)]
    pub check_sps: bool,
}

impl PsAuditSettings {
    pub fn with_delta(delta: f64) -> Self {
        PsAuditSettings {
            delta: Some(delta),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffendingSample {
    pub source_id: String,
    pub step: usize,
    pub point: Complex64,
    /// Conservative lower bound on the raster distance to Julia cells.
    pub distance_lower: f64,
}

/// Outcome of [`ps_audit`]. This is evidence on a raster, never a proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsAuditReport {
    pub ps_evidence: bool,
    /// `None` when the filled-closure check was not requested.
    pub sps_evidence: Option<bool>,
    pub delta: f64,
    /// Minimum lower distance bound over checked Fatou samples (∞ if none).
    pub min_distance: f64,
    pub offending_samples: Vec<OffendingSample>,
    /// Samples found inside the filled closure of a Julia component.
    pub sps_offending: Vec<OffendingSample>,
    pub total_samples: usize,
    pub in_window: usize,
    pub fatou_samples: usize,
    pub exempt_samples: usize,
}

impl PsAuditReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "source_id,step,re,im,distance_lower,check")?;
        for (check, list) in [
            ("ps", &self.offending_samples),
            ("sps", &self.sps_offending),
        ] {
            for s in list {
                writeln!(
                    out,
                    "{},{},{},{},{},{check}",
                    s.source_id, s.step, s.point.re, s.point.im, s.distance_lower
                )?;
            }
        }
        Ok(())
    }
}

/// Checks that every postsingular sample in a Fatou cell keeps raster
/// distance at least `δ` from the Julia cells. With `check_sps` it also checks
/// that no sample sits in the filled closure of an 8-connected Julia component.
pub fn ps_audit(
    map: &EntireMap,
    grid: &ClassificationGrid,
    cloud: &PostsingularCloud,
    settings: &PsAuditSettings,
) -> Result<PsAuditReport, CatalogError> {
    if let Some(src) = &grid.source {
        if src.map != *map {
            return Err(CatalogError::InvalidDescriptor(format!(
                "grid was classified for {}, audit requested for {}",
                src.map, map
            )));
        }
    }
    let total = cloud.samples.len();
    let in_window = cloud
        .samples
        .iter()
        .filter(|s| grid.window.contains(s.point))
        .count();
    if 2 * in_window < total {
        return Err(CatalogError::WindowTooSmall {
            inside: in_window,
            total,
        });
    }
    let delta = settings.delta.unwrap_or(2.0 * grid.cell_size());
    let field = DistanceField::julia(grid);

    let mut report = PsAuditReport {
        ps_evidence: true,
        sps_evidence: None,
        delta,
        min_distance: f64::INFINITY,
        offending_samples: Vec::new(),
        sps_offending: Vec::new(),
        total_samples: total,
        in_window,
        fatou_samples: 0,
        exempt_samples: 0,
    };
    let mut checked: Vec<(usize, (usize, usize), f64)> = Vec::new();
    for (n, s) in cloud.samples.iter().enumerate() {
        let Some((i, j)) = grid.cell_of(s.point) else {
            continue;
        };
        if settings
            .allowed_contacts
            .iter()
            .any(|c| (s.point - c.point).norm() <= c.radius)
        {
            report.exempt_samples += 1;
            continue;
        }
        if grid.label(i, j) == 0 {
            continue;
        }
        report.fatou_samples += 1;
        let (lower, _, _) = field
            .bounds(s.point)
            .expect("sample lies inside the window");
        report.min_distance = report.min_distance.min(lower);
        if lower < delta {
            report.offending_samples.push(offending(cloud, n, lower));
        }
        checked.push((n, (i, j), lower));
    }
    report.ps_evidence = report.offending_samples.is_empty();

    if settings.check_sps {
        let julia = grid.julia_mask();
        let frame = BoolRaster::border(grid.nx, grid.ny);
        let mut inside = vec![false; checked.len()];
        for comp in julia.components8() {
            let (mut i0, mut i1, mut j0, mut j1) = (usize::MAX, 0, usize::MAX, 0);
            for &idx in &comp {
                let (i, j) = (idx % grid.nx, idx / grid.nx);
                i0 = i0.min(i);
                i1 = i1.max(i);
                j0 = j0.min(j);
                j1 = j1.max(j);
            }
            // Only components whose bounding box strictly surrounds a sample can enclose it.
            let candidates: Vec<usize> = checked
                .iter()
                .enumerate()
                .filter(|(k, (_, (i, j), _))| {
                    !inside[*k] && *i > i0 && *i < i1 && *j > j0 && *j < j1
                })
                .map(|(k, _)| k)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let mut mask = BoolRaster::new(grid.nx, grid.ny);
            for &idx in &comp {
                mask.data[idx] = true;
            }
            let filled = fill_with_frame(&mask, &frame);
            for k in candidates {
                let (_, (i, j), _) = checked[k];
                if filled.get(i, j) {
                    inside[k] = true;
                }
            }
        }
        for (k, &(n, _, lower)) in checked.iter().enumerate() {
            if inside[k] {
                report.sps_offending.push(offending(cloud, n, lower));
            }
        }
        report.sps_evidence = Some(report.sps_offending.is_empty());
    }
    Ok(report)
}

fn offending(cloud: &PostsingularCloud, n: usize, lower: f64) -> OffendingSample {
    let s = &cloud.samples[n];
    OffendingSample {
        source_id: cloud.sources[s.source].id.clone(),
        step: s.step,
        point: s.point,
        distance_lower: lower,
    }
}
