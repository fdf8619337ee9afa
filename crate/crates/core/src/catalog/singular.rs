use std::f64::consts::TAU;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::EntireMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularKind {
    Critical,
    Asymptotic,
}

/// A singular value together with the critical point it comes from, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularValue {
    pub id: String,
    pub kind: SingularKind,
    /// Family index `k` for critical points of the form `2πik`.
    pub index: Option<i64>,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularData {
    pub critical_points: Vec<(Option<i64>, Complex64)>,
    pub critical_values: Vec<SingularValue>,
    pub asymptotic_values: Vec<SingularValue>,
    /// `|k|` bound applied to infinite critical families.
    pub k_bound: u32,
}

impl SingularData {
    /// Critical then asymptotic values.
    pub fn values(&self) -> impl Iterator<Item = &SingularValue> {
        self.critical_values
            .iter()
            .chain(self.asymptotic_values.iter())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "source_id,step,re,im")?;
        for sv in self.values() {
            writeln!(out, "{},0,{},{}", sv.id, sv.value.re, sv.value.im)?;
        }
        Ok(())
    }
}

/// Closed-form singular data. Critical families `2πik` are truncated at `|k| ≤ k_bound`.
pub fn singular_values(map: &EntireMap, k_bound: u32) -> SingularData {
    let mut critical_points = Vec::new();
    let mut asymptotic_values = Vec::new();
    match map {
        EntireMap::ExpLambda { .. } => {}
        EntireMap::ZExp => critical_points.push((None, Complex64::new(1.0, 0.0))),
        EntireMap::FatouPlus | EntireMap::FatouMinus | EntireMap::ZPlusExp => {
            let kb = i64::from(k_bound);
            for k in -kb..=kb {
                critical_points.push((Some(k), Complex64::new(0.0, TAU * k as f64)));
            }
        }
    }
    if matches!(map, EntireMap::ExpLambda { .. } | EntireMap::ZExp) {
        asymptotic_values.push(SingularValue {
            id: "av".into(),
            kind: SingularKind::Asymptotic,
            index: None,
            value: Complex64::new(0.0, 0.0),
        });
    }
    let critical_values = critical_points
        .iter()
        .map(|&(index, c)| SingularValue {
            id: match index {
                Some(k) => format!("cv{k}"),
                None => "cv".into(),
            },
            kind: SingularKind::Critical,
            index,
            // Critical points lie far from the overflow region.
            value: map.eval(c).expect("critical point evaluation is finite"),
        })
        .collect();
    SingularData {
        critical_points,
        critical_values,
        asymptotic_values,
        k_bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostsingularSample {
    /// Index into [`PostsingularCloud::sources`].
    pub source: usize,
    pub step: usize,
    pub point: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub depth: usize,
    pub escape_radius: f64,
    /// Sources whose orbit left the escape disk (or overflowed) before `depth`,
    /// with the first step that was dropped.
    pub escaped: Vec<(usize, usize)>,
}

/// Finite sample of the postsingular set: forward orbits of all singular values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostsingularCloud {
    pub sources: Vec<SingularValue>,
    pub samples: Vec<PostsingularSample>,
    pub truncation: Truncation,
}

impl PostsingularCloud {
    pub fn points(&self) -> Vec<Complex64> {
        self.samples.iter().map(|s| s.point).collect()
    }

    /// Sample points with exact duplicates removed (fixed singular values repeat).
    pub fn distinct_points(&self) -> Vec<Complex64> {
        let mut pts = self.points();
        pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        pts.dedup();
        pts
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "source_id,step,re,im")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{}",
                self.sources[s.source].id, s.step, s.point.re, s.point.im
            )?;
        }
        Ok(())
    }
}

/// Forward orbits of every singular value up to `depth` steps, truncated at the
/// first point with `|z| > escape_radius`.
pub fn postsingular_sample(
    map: &EntireMap,
    depth: usize,
    escape_radius: f64,
    k_bound: u32,
) -> PostsingularCloud {
    let data = singular_values(map, k_bound);
    let sources: Vec<SingularValue> = data.values().cloned().collect();
    let mut samples = Vec::new();
    let mut escaped = Vec::new();
    for (source, sv) in sources.iter().enumerate() {
        let mut z = sv.value;
        for step in 0..=depth {
            if z.norm() > escape_radius {
                escaped.push((source, step));
                break;
            }
            samples.push(PostsingularSample {
                source,
                step,
                point: z,
            });
            if step == depth {
                break;
            }
            match map.eval(z) {
                Ok(w) => z = w,
                Err(_) => {
                    escaped.push((source, step + 1));
                    break;
                }
            }
        }
    }
    PostsingularCloud {
        sources,
        samples,
        truncation: Truncation {
            depth,
            escape_radius,
            escaped,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [EntireMap; 5] = [
        EntireMap::ExpLambda { lambda: 0.25 },
        EntireMap::FatouPlus,
        EntireMap::FatouMinus,
        EntireMap::ZPlusExp,
        EntireMap::ZExp,
    ];

    #[test]
    fn z_plus_exp_singular_data() {
        let d = singular_values(&EntireMap::ZPlusExp, 3);
        assert_eq!(d.critical_points.len(), 7);
        assert!(d.asymptotic_values.is_empty());
        for sv in &d.critical_values {
            let k = sv.index.unwrap() as f64;
            assert!((sv.value - Complex64::new(1.0, TAU * k)).norm() < 1e-12);
        }
    }

    #[test]
    fn zexp_singular_data() {
        let d = singular_values(&EntireMap::ZExp, 8);
        assert_eq!(d.critical_points, vec![(None, Complex64::new(1.0, 0.0))]);
        assert!((d.critical_values[0].value.re - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(d.asymptotic_values[0].value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn exp_lambda_has_only_the_omitted_value() {
        let d = singular_values(&EntireMap::ExpLambda { lambda: 0.25 }, 8);
        assert!(d.critical_points.is_empty());
        assert_eq!(d.asymptotic_values.len(), 1);
    }

    #[test]
    fn critical_points_are_critical() {
        for m in ALL {
            let d = singular_values(&m, 8);
            for (i, &(_, c)) in d.critical_points.iter().enumerate() {
                assert!(m.derivative(c).unwrap().norm() < 1e-12, "{m} at {c}");
                assert_eq!(d.critical_values[i].value, m.eval(c).unwrap());
            }
        }
    }

    #[test]
    fn zexp_critical_orbit() {
        let cloud = postsingular_sample(&EntireMap::ZExp, 3, 100.0, 8);
        let cv: Vec<f64> = cloud
            .samples
            .iter()
            .filter(|s| cloud.sources[s.source].id == "cv")
            .map(|s| s.point.re)
            .collect();
        // High-precision direct iteration of x e^{-x} from 1/e.
        let expect = [
            0.367_879_441_171_442_3,
            0.254_646_380_043_582_5,
            0.197_399_473_094_253_3,
            0.162_037_855_631_658_3,
        ];
        for (a, b) in cv.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(cv.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    }

    #[test]
    fn exp_lambda_orbit_of_zero() {
        let cloud = postsingular_sample(&EntireMap::ExpLambda { lambda: 0.25 }, 5, 100.0, 8);
        let pts: Vec<f64> = cloud.samples.iter().map(|s| s.point.re).collect();
        let expect = [
            0.0,
            0.25,
            0.321_006_354_171_935_4,
            0.344_628_585_045_764_4,
            0.352_866_395_718_888_8,
            0.355_785_248_250_534_7,
        ];
        assert_eq!(pts.len(), 6);
        for (a, b) in pts.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn depth_zero_gives_singular_values() {
        for m in ALL {
            let cloud = postsingular_sample(&m, 0, 1e6, 2);
            let data = singular_values(&m, 2);
            let vals: Vec<Complex64> = data.values().map(|s| s.value).collect();
            assert_eq!(cloud.points(), vals);
        }
    }

    #[test]
    fn chain_property_and_truncation() {
        for m in ALL {
            let cloud = postsingular_sample(&m, 30, 50.0, 4);
            for w in cloud.samples.windows(2) {
                if w[0].source == w[1].source {
                    assert_eq!(w[1].step, w[0].step + 1);
                    let next = m.eval(w[0].point).unwrap();
                    assert!((next - w[1].point).norm() <= 1e-10 * (1.0 + next.norm()));
                }
            }
            assert!(cloud.samples.iter().all(|s| s.point.norm() <= 50.0));
        }
        // Orbits of 1 + 2πik under z + e^{-z} creep to +∞ slowly and stay;
        // under z + 1 + e^{-z} they run past radius 50 quickly.
        let cloud = postsingular_sample(&EntireMap::FatouPlus, 100, 50.0, 0);
        assert_eq!(cloud.truncation.escaped.len(), 1);
    }

    #[test]
    fn csv_export() {
        let cloud = postsingular_sample(&EntireMap::ZExp, 1, 10.0, 8);
        let mut buf = Vec::new();
        cloud.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("source_id,step,re,im"));
        assert_eq!(lines.count(), 4);
    }
}
