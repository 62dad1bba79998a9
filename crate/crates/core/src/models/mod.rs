//! Built-in models and user models loaded from TOML documents.

mod config;

pub use config::{ChartConfig, ModelConfig, OverlapConfig, SectionConfig};

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::bundle::{
    section_bracket, validate_atlas, validate_section, Atlas, AtlasReport, Point, Section, SectionReport,
};
use crate::error::{Error, Result};
use crate::expr::{BoundExpr, Expression};
use crate::geometry::{Chart, Interval};
use crate::numkernel::{Matrix, Vector, DEFAULT_RANK_TOL};
use crate::sampling::halton_in;

/// Bound on the affine coordinates of the projective charts.
pub const J_MAX: f64 = 1e6;

/// Which built-in family a model comes from; drives stratum seeding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ModelKind {
    Canonical,
    Primer { k: usize },
    Primer2,
    Primer2Reduced,
    Config,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMeta {
    pub n: usize,
    pub omegas: Vec<f64>,
    /// The function of `phi{n}` used by the primer families.
    pub f: Option<String>,
    pub kind: ModelKind,
}

/// An atlas with a family of sections `s₀…s_p` whose first `r + 1`
/// commute with all of them, plus the Hamiltonian to flow.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    atlas: Arc<Atlas>,
    sections: Vec<Section>,
    r: usize,
    hamiltonian: Section,
    meta: ModelMeta,
}

/// Load-time checks run on every model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub ok: bool,
    pub tol: f64,
    pub atlas: AtlasReport,
    pub sections: Vec<SectionReport>,
    pub contact: ContactSummary,
    pub commutation: ResidualSummary,
    pub hamiltonian_span: ResidualSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactSummary {
    pub samples: usize,
    pub failures: usize,
    pub min_det: f64,
    pub worst: Option<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub samples: usize,
    pub max_residual: f64,
    pub worst: Option<(String, Vec<f64>)>,
    pub label: Option<String>,
}

impl ResidualSummary {
    fn empty() -> Self {
        Self {
            samples: 0,
            max_residual: 0.0,
            worst: None,
            label: None,
        }
    }

    fn record(&mut self, v: f64, chart: &str, x: &[f64], label: impl FnOnce() -> String) {
        self.samples += 1;
        if !(v <= self.max_residual) {
            self.max_residual = v;
            self.worst = Some((chart.to_string(), x.to_vec()));
            self.label = Some(label());
        }
    }
}

impl ModelReport {
    /// The first failing check as a [`Error::Validation`].
    pub fn first_failure(&self) -> Option<Error> {
        let loc = |w: &Option<(String, Vec<f64>)>| match w {
            Some((c, x)) => format!("{c} {x:?}"),
            None => "-".to_string(),
        };
        for o in &self.atlas.overlaps {
            if o.samples == 0 {
                return Some(Error::Validation {
                    check: "overlap samples".into(),
                    location: format!("{}-{}", o.from, o.to),
                    residual: f64::NAN,
                });
            }
            for (check, v) in [("form compatibility", o.form), ("round trip", o.roundtrip)] {
                if !(v < self.atlas.tol) {
                    return Some(Error::Validation {
                        check: check.into(),
                        location: format!("{}-{} {:?}", o.from, o.to, o.worst_point),
                        residual: v,
                    });
                }
            }
        }
        for t in &self.atlas.triples {
            if t.samples == 0 || !(t.cocycle < self.atlas.tol) {
                return Some(Error::Validation {
                    check: "cocycle".into(),
                    location: format!("{}-{}-{} {:?}", t.charts[0], t.charts[1], t.charts[2], t.worst_point),
                    residual: t.cocycle,
                });
            }
        }
        for s in &self.sections {
            if !s.ok {
                let location = match &s.worst {
                    Some((u, v, x)) => format!("{} on {u}-{v} {x:?}", s.name),
                    None => s.name.clone(),
                };
                return Some(Error::Validation {
                    check: "section compatibility".into(),
                    location,
                    residual: s.max_error,
                });
            }
        }
        if self.contact.failures > 0 {
            return Some(Error::Validation {
                check: "contact condition".into(),
                location: loc(&self.contact.worst),
                residual: self.contact.min_det,
            });
        }
        for (check, s) in [
            ("commutation", &self.commutation),
            ("hamiltonian span", &self.hamiltonian_span),
        ] {
            if !(s.max_residual < self.tol) {
                let label = s.label.clone().unwrap_or_default();
                return Some(Error::Validation {
                    check: format!("{check} {label}").trim_end().to_string(),
                    location: loc(&s.worst),
                    residual: s.max_residual,
                });
            }
        }
        None
    }
}

fn ex(s: &str) -> Expression {
    Expression::parse(s).expect("built-in expression")
}

impl Model {
    /// Assembles a model without running the load-time checks.
    pub fn new(
        name: &str,
        atlas: Arc<Atlas>,
        sections: Vec<Section>,
        r: usize,
        hamiltonian: Section,
        meta: ModelMeta,
    ) -> Result<Self> {
        if sections.is_empty() || r >= sections.len() {
            return Err(Error::Schema {
                path: "r".into(),
                message: format!(
                    "commuting count r = {r} needs at least r + 1 sections, got {}",
                    sections.len()
                ),
            });
        }
        Ok(Self {
            name: name.to_string(),
            atlas,
            sections,
            r,
            hamiltonian,
            meta,
        })
    }

    pub fn atlas(&self) -> &Atlas {
        &self.atlas
    }

    pub fn atlas_arc(&self) -> &Arc<Atlas> {
        &self.atlas
    }

    /// `s₀…s_p`, commuting family first.
    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections
            .iter()
            .chain(std::iter::once(&self.hamiltonian))
            .find(|s| s.name() == name)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `p`, so that the momentum map lands in `RP^p`.
    pub fn p(&self) -> usize {
        self.sections.len() - 1
    }

    pub fn hamiltonian(&self) -> &Section {
        &self.hamiltonian
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn dim(&self) -> usize {
        self.atlas.dim()
    }

    /// Replaces the Hamiltonian (e.g. an arbitrary function on the canonical chart).
    pub fn with_hamiltonian(mut self, h: Section) -> Self {
        self.hamiltonian = h;
        self
    }

    /// Sampled load-time checks: atlas and section compatibility, contact
    /// condition, commutation of the designated family and the Hamiltonian
    /// lying in its span.
    pub fn validate(&self, samples: usize, tol: f64) -> Result<ModelReport> {
        let atlas = validate_atlas(&self.atlas, samples, tol)?;
        let mut sections = Vec::new();
        for s in self.sections.iter().chain(std::iter::once(&self.hamiltonian)) {
            sections.push(validate_section(&self.atlas, s, samples, tol)?);
        }
        let mut contact = ContactSummary {
            samples: 0,
            failures: 0,
            min_det: f64::INFINITY,
            worst: None,
        };
        let mut commutation = ResidualSummary::empty();
        let mut span = ResidualSummary::empty();
        let commuting = &self.sections[..=self.r];
        for (ci, chart) in self.atlas.charts().iter().enumerate() {
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut rhs: Vec<f64> = Vec::new();
            let mut pts: Vec<Vec<f64>> = Vec::new();
            for i in 0..samples as u64 {
                let x = halton_in(chart, i);
                let rep = chart.contact_check(&x, DEFAULT_RANK_TOL);
                contact.samples += 1;
                if !rep.ok {
                    contact.failures += 1;
                }
                if rep.det < contact.min_det || (!rep.ok && contact.worst.is_none()) {
                    contact.min_det = contact.min_det.min(rep.det);
                    contact.worst = Some((chart.id().to_string(), x.clone()));
                }
                if !rep.ok {
                    continue;
                }
                let p = Point::new(ci, x.clone());
                for (a, sa) in commuting.iter().enumerate() {
                    for sb in &self.sections[a + 1..] {
                        let v = section_bracket(&self.atlas, sa, sb, &p)?.abs();
                        commutation.record(v, chart.id(), &x, || format!("[{}, {}]", sa.name(), sb.name()));
                    }
                }
                rows.push(commuting.iter().map(|s| s.value(&p)).collect::<Result<_>>()?);
                rhs.push(self.hamiltonian.value(&p)?);
                pts.push(x);
            }
            if rows.is_empty() {
                continue;
            }
            // h = Σ c_i s_i with constant c: least-squares fit on this chart's samples
            let a = Matrix::from_fn(rows.len(), commuting.len(), |i, j| rows[i][j]);
            let b = Vector::from_vec(rhs.clone());
            let c = a
                .clone()
                .svd(true, true)
                .solve(&b, 1e-12)
                .map_err(|_| Error::SingularSystem {
                    rank: 0,
                    needed: commuting.len(),
                })?;
            let fitted = &a * &c;
            for (i, x) in pts.iter().enumerate() {
                let v = (fitted[i] - rhs[i]).abs() / rhs[i].abs().max(1.0);
                span.record(v, chart.id(), x, || self.hamiltonian.name().to_string());
            }
        }
        if contact.min_det == f64::INFINITY {
            contact.min_det = 0.0;
        }
        let mut report = ModelReport {
            ok: true,
            tol,
            atlas,
            sections,
            contact,
            commutation,
            hamiltonian_span: span,
        };
        report.ok = report.first_failure().is_none();
        Ok(report)
    }

    /// [`Model::validate`], turned into an error on the first failing check.
    pub fn checked(self, samples: usize, tol: f64) -> Result<Self> {
        let report = self.validate(samples, tol)?;
        match report.first_failure() {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    /// Points on the special strata of the built-in families: `Σ` for
    /// `primer` (on `V_n`, all `J = 0`) and `M₀` for `primer2` (`J = 0` at
    /// zeros of `f`). Empty for other models.
    pub fn stratum_seeds<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Point>> {
        let n = self.meta.n;
        let chart = match self.meta.kind {
            ModelKind::Primer { .. } | ModelKind::Primer2 => n,
            ModelKind::Primer2Reduced => 0,
            _ => return Ok(Vec::new()),
        };
        let zeros = match self.meta.kind {
            ModelKind::Primer { .. } => None,
            _ => {
                let f = self.f_bound()?;
                let z = zeros_on_circle(&f, 4096, 1e-12)?;
                if z.is_empty() {
                    return Ok(Vec::new());
                }
                Some(z)
            }
        };
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut x = vec![0.0; 2 * n + 1];
            for v in x.iter_mut().take(n + 1) {
                *v = rng.gen_range(0.0..TAU);
            }
            if let Some(z) = &zeros {
                x[n] = z[rng.gen_range(0..z.len())];
            }
            out.push(Point::new(chart, x));
        }
        Ok(out)
    }

    /// `f` bound to the single variable `phi{n}`.
    pub fn f_bound(&self) -> Result<BoundExpr> {
        let src = self.meta.f.as_deref().ok_or_else(|| Error::Schema {
            path: "f".into(),
            message: "model has no f".into(),
        })?;
        Expression::parse(src)?.bind(&[format!("phi{}", self.meta.n)])
    }
}

/// Zeros of a periodic function of one variable on `[0, 2π)` by sign changes
/// on a uniform grid refined with bisection to `tol`.
pub fn zeros_on_circle(f: &BoundExpr, grid: usize, tol: f64) -> Result<Vec<f64>> {
    let h = TAU / grid as f64;
    let mut out = Vec::new();
    let mut prev = (0.0, f.eval(&[0.0])?);
    for i in 1..=grid {
        let t = i as f64 * h;
        let v = f.eval(&[t])?;
        if prev.1 == 0.0 {
            out.push(prev.0);
        } else if prev.1 * v < 0.0 {
            let (mut a, mut b, mut fa) = (prev.0, t, prev.1);
            while b - a > tol {
                let m = 0.5 * (a + b);
                let fm = f.eval(&[m])?;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = (t, v);
    }
    Ok(out)
}

/// `R^{2n+1}` with `α = dq0 + Σ p_i dq_i`, trivial bundle, `Y = (1)`, `h = 1`.
pub fn canonical(n: usize) -> Result<Model> {
    let atlas = Arc::new(Atlas::single(canonical_chart(n)?));
    let one = Section::uniform(&atlas, "1", &ex("1"))?;
    Model::new(
        &format!("canonical({n})"),
        atlas,
        vec![one.clone()],
        0,
        one,
        ModelMeta {
            n,
            omegas: Vec::new(),
            f: None,
            kind: ModelKind::Canonical,
        },
    )
}

pub fn canonical_chart(n: usize) -> Result<Chart> {
    if n == 0 {
        return Err(Error::Schema {
            path: "n".into(),
            message: "n must be at least 1".into(),
        });
    }
    let mut names = vec!["q0".to_string()];
    names.extend((1..=n).map(|i| format!("q{i}")));
    names.extend((1..=n).map(|i| format!("p{i}")));
    let mut alpha = vec![ex("1")];
    alpha.extend((1..=n).map(|i| Expression::var(&format!("p{i}"))));
    alpha.extend((0..n).map(|_| ex("0")));
    Chart::new("R", &names, &vec![false; 2 * n + 1], &alpha)
}

fn primer_names(n: usize, i: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..=n).map(|j| format!("phi{j}")).collect();
    names.extend((0..=n).filter(|&j| j != i).map(|j| format!("J{j}")));
    names
}

/// `J^i_j` as an expression in chart `V_i`.
fn jij(i: usize, j: usize) -> Expression {
    if i == j {
        ex("1")
    } else {
        Expression::var(&format!("J{j}"))
    }
}

/// `T^{n+1} × RP^n` covered by the affine charts `V_0…V_n` with
/// `α_{V_i} = Σ_j J^i_j dφ_j` and transitions `g_{V_iV_k} = J^i_k`.
pub fn primer_atlas(n: usize) -> Result<Atlas> {
    if n == 0 {
        return Err(Error::Schema {
            path: "n".into(),
            message: "n must be at least 1".into(),
        });
    }
    let dim = 2 * n + 1;
    let mut periodic = vec![true; n + 1];
    periodic.extend(vec![false; n]);
    let mut domain = vec![Interval::PERIOD; n + 1];
    domain.extend(vec![Interval::new(-J_MAX, J_MAX); n]);
    let mut charts = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let names = primer_names(n, i);
        let mut alpha: Vec<Expression> = (0..=n).map(|j| jij(i, j)).collect();
        alpha.extend((0..n).map(|_| ex("0")));
        let squares: Vec<String> = names[n + 1..].iter().map(|v| format!("{v}^2")).collect();
        let guard = ex(&format!("1/sqrt(1 + {})", squares.join(" + ")));
        debug_assert_eq!(names.len(), dim);
        charts.push(
            Chart::new(&format!("V{i}"), &names, &periodic, &alpha)?
                .with_domain(domain.clone())?
                .with_guard(&guard)?,
        );
    }
    let mut atlas = Atlas::new(charts)?;
    for i in 0..=n {
        for k in i + 1..=n {
            let fwd = primer_map(n, i, k);
            let bwd = primer_map(n, k, i);
            atlas.add_overlap(&format!("V{i}"), &format!("V{k}"), &fwd, &bwd, &jij(i, k))?;
        }
    }
    Ok(atlas)
}

/// Coordinates of `V_k` written in `V_i` coordinates: `J^k_j = J^i_j / J^i_k`.
fn primer_map(n: usize, i: usize, k: usize) -> Vec<Expression> {
    let mut out: Vec<Expression> = (0..=n).map(|j| Expression::var(&format!("phi{j}"))).collect();
    for j in (0..=n).filter(|&j| j != k) {
        out.push(jij(i, j).div(&jij(i, k)));
    }
    out
}

/// `s_j` with representatives `J^i_j` on `V_i`.
fn primer_sections(atlas: &Atlas, n: usize) -> Result<Vec<Section>> {
    (0..=n)
        .map(|j| {
            let locals: Vec<(String, Expression)> = (0..=n).map(|i| (format!("V{i}"), jij(i, j))).collect();
            Section::new(atlas, &format!("s{j}"), &locals)
        })
        .collect()
}

/// Parses `f` as a function of `phi{n}`; the bare name `phi` is accepted as a synonym.
pub fn parse_f(n: usize, f: &str) -> Result<Expression> {
    let var = format!("phi{n}");
    let e = Expression::parse(f)?.rename("phi", &var);
    if let Some(bad) = e.variables().into_iter().find(|v| *v != var) {
        return Err(Error::Schema {
            path: "f".into(),
            message: format!("f may only depend on `{var}`, found `{bad}`"),
        });
    }
    Ok(e)
}

fn check_omegas(n: usize, omegas: &[f64]) -> Result<()> {
    if omegas.len() != n {
        return Err(Error::Schema {
            path: "omega".into(),
            message: format!("expected {n} frequencies, got {}", omegas.len()),
        });
    }
    Ok(())
}

fn omega_combination(atlas: &Atlas, name: &str, omegas: &[f64], ss: &[Section]) -> Result<Section> {
    let terms: Vec<(f64, &Section)> = omegas.iter().copied().zip(ss).collect();
    Section::linear_combination(atlas, name, &terms)
}

/// `Y = (s₀,…,s_n, f·s_k)`, `h = Σ_{j<n} ω_j s_j`, `r = n − 1`.
pub fn primer(n: usize, omegas: &[f64], f: &str, k: usize) -> Result<Model> {
    primer_on(Arc::new(primer_atlas(n)?), n, omegas, f, k)
}

/// [`primer`] on an existing primer atlas, so several models can share it.
pub fn primer_on(atlas: Arc<Atlas>, n: usize, omegas: &[f64], f: &str, k: usize) -> Result<Model> {
    check_omegas(n, omegas)?;
    if k > n {
        return Err(Error::Schema {
            path: "k".into(),
            message: format!("k must lie in 0..={n}"),
        });
    }
    let fe = parse_f(n, f)?;
    let fb = fe.bind(&[format!("phi{n}")])?;
    for i in 0..256 {
        let t = TAU * (i as f64 + 0.5) / 256.0;
        let v = fb.eval(&[t])?;
        if !(v > 0.0) {
            return Err(Error::PositivityViolation {
                point: vec![t],
                value: v,
            });
        }
    }
    let mut ys = primer_sections(&atlas, n)?;
    let fs = ys[k].scaled_by(&atlas, &fe, &format!("f*s{k}"))?;
    ys.push(fs);
    let h = omega_combination(&atlas, "h", omegas, &ys[..n])?;
    Model::new(
        &format!("primer({n})"),
        atlas,
        ys,
        n - 1,
        h,
        ModelMeta {
            n,
            omegas: omegas.to_vec(),
            f: Some(fe.to_string()),
            kind: ModelKind::Primer { k },
        },
    )
}

/// `Y = (s₀,…,s_{n−1}, f·s_n)`, `h = Σ_{j<n} ω_j s_j + f·s_n`, `r = n`.
pub fn primer2(n: usize, omegas: &[f64], f: &str) -> Result<Model> {
    primer2_on(Arc::new(primer_atlas(n)?), n, omegas, f)
}

pub fn primer2_on(atlas: Arc<Atlas>, n: usize, omegas: &[f64], f: &str) -> Result<Model> {
    check_omegas(n, omegas)?;
    let fe = parse_f(n, f)?;
    let mut ys = primer_sections(&atlas, n)?;
    let sn = ys.pop().expect("n + 1 sections");
    let fs = sn.scaled_by(&atlas, &fe, &format!("f*s{n}"))?;
    ys.push(fs);
    let mut terms: Vec<(f64, &Section)> = omegas.iter().copied().zip(&ys[..n]).collect();
    terms.push((1.0, &ys[n]));
    let h = Section::linear_combination(&atlas, "h", &terms)?;
    Model::new(
        &format!("primer2({n})"),
        atlas,
        ys,
        n,
        h,
        ModelMeta {
            n,
            omegas: omegas.to_vec(),
            f: Some(fe.to_string()),
            kind: ModelKind::Primer2,
        },
    )
}

/// The single chart `N = T*Tⁿ × S¹` with `α = Σ p_j dφ_j + dφ_n`,
/// `Y = (p₀,…,p_{n−1}, f)` and `h = Σ ω_j p_j + f`.
pub fn primer2_reduced(n: usize, omegas: &[f64], f: &str) -> Result<Model> {
    check_omegas(n, omegas)?;
    if n == 0 {
        return Err(Error::Schema {
            path: "n".into(),
            message: "n must be at least 1".into(),
        });
    }
    let fe = parse_f(n, f)?;
    let mut names: Vec<String> = (0..=n).map(|j| format!("phi{j}")).collect();
    names.extend((0..n).map(|j| format!("p{j}")));
    let mut periodic = vec![true; n + 1];
    periodic.extend(vec![false; n]);
    let mut alpha: Vec<Expression> = (0..n).map(|j| Expression::var(&format!("p{j}"))).collect();
    alpha.push(ex("1"));
    alpha.extend((0..n).map(|_| ex("0")));
    let atlas = Arc::new(Atlas::single(Chart::new("N", &names, &periodic, &alpha)?));
    let mut ys: Vec<Section> = (0..n)
        .map(|j| Section::uniform(&atlas, &format!("p{j}"), &Expression::var(&format!("p{j}"))))
        .collect::<Result<_>>()?;
    ys.push(Section::uniform(&atlas, "f", &fe)?);
    let mut terms: Vec<(f64, &Section)> = omegas.iter().copied().zip(&ys[..n]).collect();
    terms.push((1.0, &ys[n]));
    let h = Section::linear_combination(&atlas, "h", &terms)?;
    Model::new(
        &format!("primer2_reduced({n})"),
        atlas,
        ys,
        n,
        h,
        ModelMeta {
            n,
            omegas: omegas.to_vec(),
            f: Some(fe.to_string()),
            kind: ModelKind::Primer2Reduced,
        },
    )
}

/// Builds a model from a TOML document and runs every load-time check.
pub fn from_config(text: &str) -> Result<Model> {
    from_config_unchecked(text)?.checked(100, 1e-8)
}

/// Builds a model from a TOML document without the sampled checks.
pub fn from_config_unchecked(text: &str) -> Result<Model> {
    let cfg: ModelConfig = toml::from_str(text).map_err(|e| Error::Schema {
        path: "document".into(),
        message: e.message().to_string(),
    })?;
    cfg.build()
}

#[cfg(test)]
mod tests;
