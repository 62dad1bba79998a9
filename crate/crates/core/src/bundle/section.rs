use crate::error::{Error, Result};
use crate::expr::{BoundExpr, Expression};
use crate::geometry::{Chart, TangentVector};
use crate::jacobi::{bracket, ham_field};

use super::{Atlas, Point};

/// A section of the contact line bundle: one local representative per chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    name: String,
    locals: Vec<BoundExpr>,
}

impl Section {
    /// `locals` pairs chart ids with representatives; every chart must be covered.
    pub fn new<S: AsRef<str>>(atlas: &Atlas, name: &str, locals: &[(S, Expression)]) -> Result<Self> {
        let mut slots: Vec<Option<BoundExpr>> = vec![None; atlas.charts().len()];
        for (id, e) in locals {
            let i = atlas.chart_index(id.as_ref())?;
            if slots[i].is_some() {
                return Err(Error::Schema {
                    path: format!("sections.{name}.{}", id.as_ref()),
                    message: "representative given twice".into(),
                });
            }
            slots[i] = Some(atlas.chart(i).bind(e)?);
        }
        let locals = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| Error::Schema {
                    path: format!("sections.{name}"),
                    message: format!("no representative on chart `{}`", atlas.chart(i).id()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.to_string(),
            locals,
        })
    }

    /// The same expression on every chart (useful when the charts share coordinate names).
    pub fn uniform(atlas: &Atlas, name: &str, e: &Expression) -> Result<Self> {
        let locals: Vec<(&str, Expression)> = atlas.charts().iter().map(|c| (c.id(), e.clone())).collect();
        Self::new(atlas, name, &locals)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn local(&self, chart: usize) -> &BoundExpr {
        &self.locals[chart]
    }

    pub fn local_expr(&self, chart: usize) -> &Expression {
        self.locals[chart].expression()
    }

    pub fn value(&self, p: &Point) -> Result<f64> {
        self.locals.get(p.chart).ok_or(Error::OutOfAtlas)?.eval(&p.coords)
    }

    pub fn renamed(&self, name: &str) -> Self {
        Self {
            name: name.to_string(),
            locals: self.locals.clone(),
        }
    }

    /// `f·s` for a function `f` written in coordinates common to all charts.
    pub fn scaled_by(&self, atlas: &Atlas, f: &Expression, name: &str) -> Result<Self> {
        let locals = atlas
            .charts()
            .iter()
            .zip(&self.locals)
            .map(|(c, l)| c.bind(&f.mul(l.expression())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.to_string(),
            locals,
        })
    }

    /// `Σ c_i s_i`.
    pub fn linear_combination(atlas: &Atlas, name: &str, terms: &[(f64, &Section)]) -> Result<Self> {
        let mut locals = Vec::with_capacity(atlas.charts().len());
        for (i, c) in atlas.charts().iter().enumerate() {
            let mut acc: Option<Expression> = None;
            for (coef, s) in terms {
                let t = if *coef == 1.0 {
                    s.local_expr(i).clone()
                } else {
                    s.local_expr(i).scale(*coef)
                };
                acc = Some(match acc {
                    None => t,
                    Some(a) => a.add(&t),
                });
            }
            locals.push(c.bind(&acc.unwrap_or_else(|| Expression::constant(0.0)))?);
        }
        Ok(Self {
            name: name.to_string(),
            locals,
        })
    }
}

/// The contact Hamiltonian field `X_s` in the chart of `x`.
pub fn section_field(atlas: &Atlas, s: &Section, x: &Point) -> Result<TangentVector> {
    let p = atlas.locate(x)?;
    ham_field(atlas.chart(p.chart), s.local(p.chart), &p.coords)
}

/// Local representative of `[s₁, s₂]` in the chart of `x`.
pub fn section_bracket(atlas: &Atlas, s1: &Section, s2: &Section, x: &Point) -> Result<f64> {
    let p = atlas.locate(x)?;
    bracket(atlas.chart(p.chart), s1.local(p.chart), s2.local(p.chart), &p.coords)
}

/// `φ_s(l) = l/s` on one chart, a function on `M_s`.
pub fn phi_s(s: &Section, l: &Section, chart: usize) -> Expression {
    l.local_expr(chart).div(s.local_expr(chart))
}

/// A chart of `M_s` carrying the cooriented form `α/s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledChart {
    chart: Chart,
    s: BoundExpr,
    tol: f64,
}

impl RescaledChart {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Fails with `ZeroDivisor` where `|s| ≤ tol`.
    pub fn check(&self, x: &[f64]) -> Result<f64> {
        let v = self.s.eval(x)?;
        if v.abs() <= self.tol {
            return Err(Error::ZeroDivisor { value: v });
        }
        Ok(v)
    }

    pub fn reeb_at(&self, x: &[f64]) -> Result<TangentVector> {
        self.check(x)?;
        self.chart.reeb_at(x)
    }

    pub fn alpha_at(&self, x: &[f64]) -> Result<crate::geometry::CoVector> {
        self.check(x)?;
        self.chart.alpha_at(x)
    }
}

/// The chart `chart` of the atlas with its form divided by the representative of `s`.
pub fn rescale(atlas: &Atlas, s: &Section, chart: usize, tol: f64) -> Result<RescaledChart> {
    let c = atlas.charts().get(chart).ok_or(Error::OutOfAtlas)?;
    let se = s.local_expr(chart);
    let alpha: Vec<Expression> = c.alpha_exprs().map(|a| a.div(se)).collect();
    let mut rc = Chart::new(&format!("{}/{}", c.id(), s.name()), c.names(), c.periodic(), &alpha)?
        .with_domain(c.domain().to_vec())?
        .with_sample_box(c.sample_box().to_vec())?;
    if let Some(g) = c.guard_expr() {
        rc = rc.with_guard(g)?;
    }
    Ok(RescaledChart {
        chart: rc,
        s: s.local(chart).clone(),
        tol,
    })
}
