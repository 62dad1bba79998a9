use serde::Serialize;

use crate::error::Result;
use crate::geometry::angle_diff;
use crate::sampling::halton_in;

use super::{Atlas, Point, Section};

/// Deviations measured on one ordered overlap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapCheck {
    pub from: String,
    pub to: String,
    pub samples: usize,
    /// `max |α_U − g_UV·φ*α_V| / (1 + |α_U|)`.
    pub form: f64,
    /// `max |ψ(φ(x)) − x| / (1 + |x|)`, periodic coordinates by shortest arc.
    pub roundtrip: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleCheck {
    pub charts: [String; 3],
    pub samples: usize,
    /// `max |g_UV·g_VW·g_WU − 1|`.
    pub cocycle: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtlasReport {
    pub ok: bool,
    pub tol: f64,
    pub overlaps: Vec<OverlapCheck>,
    pub triples: Vec<TripleCheck>,
}

impl AtlasReport {
    /// Human-readable names of the failing checks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for o in &self.overlaps {
            if o.samples == 0 {
                out.push(format!("no samples on overlap {}-{}", o.from, o.to));
            }
            if !(o.form < self.tol) {
                out.push(format!("form compatibility {}-{} ({:.3e})", o.from, o.to, o.form));
            }
            if !(o.roundtrip < self.tol) {
                out.push(format!("round trip {}-{} ({:.3e})", o.from, o.to, o.roundtrip));
            }
        }
        for t in &self.triples {
            if t.samples == 0 || !(t.cocycle < self.tol) {
                out.push(format!(
                    "cocycle {}-{}-{} ({:.3e})",
                    t.charts[0], t.charts[1], t.charts[2], t.cocycle
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionReport {
    pub name: String,
    pub ok: bool,
    pub tol: f64,
    pub samples: usize,
    /// `max |s_U − g_UV·s_V| / max(1, |s_U|)`.
    pub max_error: f64,
    pub worst: Option<(String, String, Vec<f64>)>,
}

const ATTEMPTS_PER_SAMPLE: u64 = 50;

/// Points of chart `from` whose images in every chart of `to` exist and lie in those charts' sample boxes.
fn overlap_samples(atlas: &Atlas, from: usize, to: &[usize], count: usize) -> Result<Vec<Point>> {
    let mut out = Vec::with_capacity(count);
    let chart = atlas.chart(from);
    let mut idx = 0u64;
    while out.len() < count && idx < ATTEMPTS_PER_SAMPLE * count as u64 {
        let x = halton_in(chart, idx);
        idx += 1;
        let mut all = true;
        for &t in to {
            match atlas.map_point(from, t, &x)? {
                Some(y) => {
                    let bx = atlas.chart(t).sample_box();
                    if !y
                        .iter()
                        .zip(bx)
                        .zip(atlas.chart(t).periodic())
                        .all(|((v, iv), &p)| p || iv.contains(*v))
                    {
                        all = false;
                    }
                }
                None => all = false,
            }
            if !all {
                break;
            }
        }
        if all && atlas.transition(from, to[0], &x)?.is_some() {
            out.push(Point::new(from, x));
        }
    }
    Ok(out)
}

fn check_overlap(atlas: &Atlas, from: usize, to: usize, samples: usize) -> Result<OverlapCheck> {
    let (cu, cv) = (atlas.chart(from), atlas.chart(to));
    let mut check = OverlapCheck {
        from: cu.id().to_string(),
        to: cv.id().to_string(),
        samples: 0,
        form: 0.0,
        roundtrip: 0.0,
        worst_point: Vec::new(),
    };
    let mut worst = -1.0;
    for p in overlap_samples(atlas, from, &[to], samples)? {
        let x = &p.coords;
        let y = atlas.map_point(from, to, x)?.expect("sampled inside overlap");
        let g = atlas.transition(from, to, x)?.expect("sampled inside overlap");
        let au = cu.alpha_at(x)?;
        let av = cv.alpha_at(&y)?;
        let pulled = atlas.map_jacobian(from, to, x)?.transpose() * av * g;
        let form = (&au - pulled).amax() / (1.0 + au.amax());

        let back = atlas.map_point(to, from, &y)?;
        let roundtrip = match back {
            Some(xb) => {
                let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                xb.iter()
                    .zip(x)
                    .zip(cu.periodic())
                    .map(|((a, b), &per)| if per { angle_diff(*a, *b).abs() } else { (a - b).abs() })
                    .fold(0.0, f64::max)
                    / scale
            }
            None => f64::INFINITY,
        };
        check.samples += 1;
        check.form = check.form.max(form);
        check.roundtrip = check.roundtrip.max(roundtrip);
        if form.max(roundtrip) > worst {
            worst = form.max(roundtrip);
            check.worst_point = x.clone();
        }
    }
    Ok(check)
}

fn check_triple(atlas: &Atlas, a: usize, b: usize, c: usize, samples: usize) -> Result<TripleCheck> {
    let mut check = TripleCheck {
        charts: [a, b, c].map(|i| atlas.chart(i).id().to_string()),
        samples: 0,
        cocycle: 0.0,
        worst_point: Vec::new(),
    };
    for p in overlap_samples(atlas, a, &[b, c], samples)? {
        let x = &p.coords;
        let y = atlas.map_point(a, b, x)?.expect("sampled inside overlap");
        let z = atlas.map_point(a, c, x)?.expect("sampled inside overlap");
        let (Some(gab), Some(gbc), Some(gca)) = (
            atlas.transition(a, b, x)?,
            atlas.transition(b, c, &y)?,
            atlas.transition(c, a, &z)?,
        ) else {
            continue;
        };
        let dev = (gab * gbc * gca - 1.0).abs();
        check.samples += 1;
        if dev >= check.cocycle {
            check.cocycle = dev;
            check.worst_point = x.clone();
        }
    }
    Ok(check)
}

/// Samples every ordered overlap and every triple overlap; `ok` iff all deviations are below `tol`.
pub fn validate_atlas(atlas: &Atlas, samples: usize, tol: f64) -> Result<AtlasReport> {
    let n = atlas.charts().len();
    let mut overlaps = Vec::new();
    for ov in atlas.overlaps() {
        overlaps.push(check_overlap(atlas, ov.from, ov.to, samples)?);
        overlaps.push(check_overlap(atlas, ov.to, ov.from, samples)?);
    }
    let mut triples = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if atlas.has_overlap(a, b) && atlas.has_overlap(b, c) && atlas.has_overlap(a, c) {
                    triples.push(check_triple(atlas, a, b, c, samples)?);
                }
            }
        }
    }
    let mut report = AtlasReport {
        ok: true,
        tol,
        overlaps,
        triples,
    };
    report.ok = report.failures().is_empty();
    Ok(report)
}

/// Checks `s_U = g_UV·s_V` on every ordered overlap.
pub fn validate_section(atlas: &Atlas, s: &Section, samples: usize, tol: f64) -> Result<SectionReport> {
    let mut report = SectionReport {
        name: s.name().to_string(),
        ok: true,
        tol,
        samples: 0,
        max_error: 0.0,
        worst: None,
    };
    for ov in atlas.overlaps() {
        for (u, v) in [(ov.from, ov.to), (ov.to, ov.from)] {
            for p in overlap_samples(atlas, u, &[v], samples)? {
                let x = &p.coords;
                let y = atlas.map_point(u, v, x)?.expect("sampled inside overlap");
                let g = atlas.transition(u, v, x)?.expect("sampled inside overlap");
                let su = s.local(u).eval(x)?;
                let sv = s.local(v).eval(&y)?;
                let err = (su - g * sv).abs() / su.abs().max(1.0);
                report.samples += 1;
                if err >= report.max_error {
                    report.max_error = err;
                    report.worst = Some((
                        atlas.chart(u).id().to_string(),
                        atlas.chart(v).id().to_string(),
                        x.clone(),
                    ));
                }
            }
        }
    }
    report.ok = report.max_error < tol;
    Ok(report)
}
