use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bundle::{Atlas, Section};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geometry::{Chart, Interval};

use super::{Model, ModelKind, ModelMeta};

/// Top level of a model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    /// Number of designated commuting sections minus one.
    pub r: usize,
    /// Name of the section to flow.
    pub hamiltonian: String,
    /// Names forming `s₀…s_p`, commuting family first; defaults to every section in document order.
    #[serde(default)]
    pub family: Option<Vec<String>>,
    pub charts: Vec<ChartConfig>,
    #[serde(default)]
    pub overlaps: Vec<OverlapConfig>,
    pub sections: Vec<SectionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub id: String,
    pub coords: Vec<String>,
    /// Defaults to all `false`.
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
    /// Coefficients `a_j` of `α = Σ a_j dx_j`.
    pub alpha: Vec<String>,
    /// `[lo, hi]` per coordinate; ignored on periodic axes.
    #[serde(default)]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub sample_box: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub guard: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapConfig {
    pub from: String,
    pub to: String,
    /// `to` coordinates in terms of `from` coordinates.
    pub forward: Vec<String>,
    /// `from` coordinates in terms of `to` coordinates.
    pub backward: Vec<String>,
    /// `g_{from,to}` in `from` coordinates.
    pub transition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub name: String,
    /// One representative for every chart (charts sharing coordinate names).
    #[serde(default)]
    pub expr: Option<String>,
    /// Chart id → representative.
    #[serde(default)]
    pub locals: Option<BTreeMap<String, String>>,
}

fn parse_at(path: &str, src: &str) -> Result<Expression> {
    Expression::parse(src).map_err(|e| Error::Schema {
        path: path.to_string(),
        message: e.to_string(),
    })
}

fn schema<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T> {
    Err(Error::Schema {
        path: path.into(),
        message: message.into(),
    })
}

fn with_path<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Schema { .. } => e,
        other => Error::Schema {
            path: path.to_string(),
            message: other.to_string(),
        },
    })
}

fn intervals(v: &[[f64; 2]]) -> Vec<Interval> {
    v.iter().map(|[lo, hi]| Interval::new(*lo, *hi)).collect()
}

impl ChartConfig {
    fn build(&self) -> Result<Chart> {
        let path = format!("charts.{}", self.id);
        let periodic = self.periodic.clone().unwrap_or_else(|| vec![false; self.coords.len()]);
        let alpha = self
            .alpha
            .iter()
            .enumerate()
            .map(|(j, a)| parse_at(&format!("{path}.alpha[{j}]"), a))
            .collect::<Result<Vec<_>>>()?;
        let mut chart = with_path(&path, Chart::new(&self.id, &self.coords, &periodic, &alpha))?;
        if let Some(d) = &self.domain {
            if d.iter().any(|[lo, hi]| !(lo < hi)) {
                return schema(format!("{path}.domain"), "intervals need lo < hi");
            }
            chart = with_path(&format!("{path}.domain"), chart.with_domain(intervals(d)))?;
        }
        if let Some(b) = &self.sample_box {
            if b.iter().any(|[lo, hi]| !(lo < hi)) {
                return schema(format!("{path}.sample_box"), "intervals need lo < hi");
            }
            chart = with_path(&format!("{path}.sample_box"), chart.with_sample_box(intervals(b)))?;
        }
        if let Some(g) = &self.guard {
            let ge = parse_at(&format!("{path}.guard"), g)?;
            chart = with_path(&format!("{path}.guard"), chart.with_guard(&ge))?;
        }
        Ok(chart)
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model> {
        let charts = self.charts.iter().map(ChartConfig::build).collect::<Result<Vec<_>>>()?;
        let mut atlas = with_path("charts", Atlas::new(charts))?;
        for (i, o) in self.overlaps.iter().enumerate() {
            let path = format!("overlaps[{i}]");
            let list = |what: &str, v: &[String]| {
                v.iter()
                    .enumerate()
                    .map(|(j, s)| parse_at(&format!("{path}.{what}[{j}]"), s))
                    .collect::<Result<Vec<_>>>()
            };
            let fwd = list("forward", &o.forward)?;
            let bwd = list("backward", &o.backward)?;
            let g = parse_at(&format!("{path}.transition"), &o.transition)?;
            with_path(&path, atlas.add_overlap(&o.from, &o.to, &fwd, &bwd, &g))?;
        }
        let mut sections = Vec::with_capacity(self.sections.len());
        for s in &self.sections {
            let path = format!("sections.{}", s.name);
            if sections.iter().any(|o: &Section| o.name() == s.name) {
                return schema(path, "duplicate section name");
            }
            let sec = match (&s.expr, &s.locals) {
                (Some(e), None) => with_path(&path, Section::uniform(&atlas, &s.name, &parse_at(&path, e)?))?,
                (None, Some(l)) => {
                    let locals = l
                        .iter()
                        .map(|(c, e)| Ok((c.clone(), parse_at(&format!("{path}.{c}"), e)?)))
                        .collect::<Result<Vec<_>>>()?;
                    with_path(&path, Section::new(&atlas, &s.name, &locals))?
                }
                _ => return schema(path, "give exactly one of `expr` or `locals`"),
            };
            sections.push(sec);
        }
        let find = |name: &str, path: &str| {
            sections
                .iter()
                .find(|s| s.name() == name)
                .cloned()
                .ok_or_else(|| Error::Schema {
                    path: path.to_string(),
                    message: format!("unknown section `{name}`"),
                })
        };
        let family = match &self.family {
            Some(names) => names.iter().map(|n| find(n, "family")).collect::<Result<Vec<_>>>()?,
            None => sections.clone(),
        };
        let h = find(&self.hamiltonian, "hamiltonian")?;
        Model::new(
            &self.name,
            Arc::new(atlas),
            family,
            self.r,
            h,
            ModelMeta {
                n: (self.charts[0].coords.len().saturating_sub(1)) / 2,
                omegas: Vec::new(),
                f: None,
                kind: ModelKind::Config,
            },
        )
    }
}

impl Model {
    /// A document that rebuilds this model through [`ModelConfig::build`].
    pub fn to_config(&self) -> ModelConfig {
        let atlas = self.atlas();
        let bounds = |v: &[Interval]| v.iter().map(|iv| [iv.lo, iv.hi]).collect::<Vec<_>>();
        let charts = atlas
            .charts()
            .iter()
            .map(|c| ChartConfig {
                id: c.id().to_string(),
                coords: c.names().to_vec(),
                periodic: Some(c.periodic().to_vec()),
                alpha: c.alpha_exprs().map(|e| e.to_string()).collect(),
                domain: Some(bounds(c.domain())),
                sample_box: Some(bounds(c.sample_box())),
                guard: c.guard_expr().map(|g| g.to_string()),
            })
            .collect();
        let overlaps = atlas
            .overlaps()
            .iter()
            .map(|o| OverlapConfig {
                from: atlas.chart(o.from).id().to_string(),
                to: atlas.chart(o.to).id().to_string(),
                forward: o.forward_exprs().map(|e| e.to_string()).collect(),
                backward: o.backward_exprs().map(|e| e.to_string()).collect(),
                transition: o.transition_expr().to_string(),
            })
            .collect();
        let mut sections: Vec<SectionConfig> = Vec::new();
        for s in self.sections().iter().chain(std::iter::once(self.hamiltonian())) {
            if sections.iter().any(|o| o.name == s.name()) {
                continue;
            }
            let locals = atlas
                .charts()
                .iter()
                .enumerate()
                .map(|(i, c)| (c.id().to_string(), s.local_expr(i).to_string()))
                .collect();
            sections.push(SectionConfig {
                name: s.name().to_string(),
                expr: None,
                locals: Some(locals),
            });
        }
        ModelConfig {
            name: self.name.clone(),
            r: self.r(),
            hamiltonian: self.hamiltonian().name().to_string(),
            family: Some(self.sections().iter().map(|s| s.name().to_string()).collect()),
            charts,
            overlaps,
            sections,
        }
    }
}
