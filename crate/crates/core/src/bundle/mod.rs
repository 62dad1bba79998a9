//! Atlases whose local contact forms are glued by line-bundle transition
//! functions `α_U = g_UV·α_V`, sections of that bundle, the momentum map to
//! projective space and the stratification it induces.

mod momentum;
mod section;
mod validate;

pub use momentum::{
    classify, classify_many, momentum, momentum_rank, Classification, MomentumValue, StrataTolerances, Stratum,
};
pub use section::{phi_s, rescale, section_bracket, section_field, RescaledChart, Section};
pub use validate::{validate_atlas, validate_section, AtlasReport, OverlapCheck, SectionReport, TripleCheck};

use crate::error::{Error, Result};
use crate::expr::{BoundExpr, Dual, Expression};
use crate::geometry::Chart;
use crate::numkernel::Matrix;

/// A chart index into an [`Atlas`] together with coordinates in that chart.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Point {
    pub chart: usize,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(chart: usize, coords: Vec<f64>) -> Self {
        Self { chart, coords }
    }
}

/// Coordinate change between two charts plus the transition function `g_{from,to}`
/// expressed in `from` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub from: usize,
    pub to: usize,
    forward: Vec<BoundExpr>,
    backward: Vec<BoundExpr>,
    transition: BoundExpr,
}

impl Overlap {
    pub fn forward_exprs(&self) -> impl Iterator<Item = &Expression> {
        self.forward.iter().map(|e| e.expression())
    }

    pub fn backward_exprs(&self) -> impl Iterator<Item = &Expression> {
        self.backward.iter().map(|e| e.expression())
    }

    pub fn transition_expr(&self) -> &Expression {
        self.transition.expression()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    charts: Vec<Chart>,
    overlaps: Vec<Overlap>,
}

impl Atlas {
    pub fn new(charts: Vec<Chart>) -> Result<Self> {
        if charts.is_empty() {
            return Err(Error::Schema {
                path: "charts".into(),
                message: "an atlas needs at least one chart".into(),
            });
        }
        for (i, c) in charts.iter().enumerate() {
            if charts[..i].iter().any(|o| o.id() == c.id()) {
                return Err(Error::Schema {
                    path: format!("charts.{}", c.id()),
                    message: "duplicate chart id".into(),
                });
            }
            if c.dim() != charts[0].dim() {
                return Err(Error::Schema {
                    path: format!("charts.{}", c.id()),
                    message: "all charts must have the same dimension".into(),
                });
            }
        }
        Ok(Self {
            charts,
            overlaps: Vec::new(),
        })
    }

    /// One chart, trivial bundle.
    pub fn single(chart: Chart) -> Self {
        Self {
            charts: vec![chart],
            overlaps: Vec::new(),
        }
    }

    /// Registers the overlap `from ∩ to`: `forward` gives `to` coordinates as
    /// expressions in `from` coordinates, `backward` the reverse, and
    /// `transition` is `g_{from,to}` in `from` coordinates.
    pub fn add_overlap(
        &mut self,
        from: &str,
        to: &str,
        forward: &[Expression],
        backward: &[Expression],
        transition: &Expression,
    ) -> Result<()> {
        let (fi, ti) = (self.chart_index(from)?, self.chart_index(to)?);
        if fi == ti || self.find_overlap(fi, ti).is_some() {
            return Err(Error::Schema {
                path: format!("overlaps.{from}-{to}"),
                message: "duplicate or self overlap".into(),
            });
        }
        let (fc, tc) = (&self.charts[fi], &self.charts[ti]);
        let path = format!("overlaps.{from}-{to}");
        if forward.len() != tc.dim() || backward.len() != fc.dim() {
            return Err(Error::Schema {
                path,
                message: "coordinate maps must list one expression per target coordinate".into(),
            });
        }
        let forward = forward.iter().map(|e| fc.bind(e)).collect::<Result<Vec<_>>>()?;
        let backward = backward.iter().map(|e| tc.bind(e)).collect::<Result<Vec<_>>>()?;
        let transition = fc.bind(transition)?;
        self.overlaps.push(Overlap {
            from: fi,
            to: ti,
            forward,
            backward,
            transition,
        });
        Ok(())
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, i: usize) -> &Chart {
        &self.charts[i]
    }

    pub fn overlaps(&self) -> &[Overlap] {
        &self.overlaps
    }

    pub fn dim(&self) -> usize {
        self.charts[0].dim()
    }

    pub fn chart_index(&self, id: &str) -> Result<usize> {
        self.charts
            .iter()
            .position(|c| c.id() == id)
            .ok_or_else(|| Error::UnknownChart(id.to_string()))
    }

    fn find_overlap(&self, a: usize, b: usize) -> Option<(&Overlap, bool)> {
        self.overlaps.iter().find_map(|o| {
            if o.from == a && o.to == b {
                Some((o, true))
            } else if o.from == b && o.to == a {
                Some((o, false))
            } else {
                None
            }
        })
    }

    /// Charts sharing an overlap with `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .overlaps
            .iter()
            .filter_map(|o| {
                if o.from == i {
                    Some(o.to)
                } else if o.to == i {
                    Some(o.from)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn has_overlap(&self, a: usize, b: usize) -> bool {
        a == b || self.find_overlap(a, b).is_some()
    }

    /// Coordinates of `x` (given in chart `from`) in chart `to`, or `None`
    /// when the point is not in the overlap.
    pub fn map_point(&self, from: usize, to: usize, x: &[f64]) -> Result<Option<Vec<f64>>> {
        if from == to {
            return Ok(self.charts[from].contains(x).then(|| x.to_vec()));
        }
        let Some((ov, dir)) = self.find_overlap(from, to) else {
            return Ok(None);
        };
        let exprs = if dir { &ov.forward } else { &ov.backward };
        let mut y = Vec::with_capacity(exprs.len());
        for e in exprs {
            match e.eval(x) {
                Ok(v) => y.push(v),
                Err(Error::Domain { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        let target = &self.charts[to];
        let y = target.normalize(&y);
        Ok(target.contains(&y).then_some(y))
    }

    /// `g_{from,to}` at `x` (in `from` coordinates); `None` off the overlap.
    pub fn transition(&self, from: usize, to: usize, x: &[f64]) -> Result<Option<f64>> {
        if from == to {
            return Ok(Some(1.0));
        }
        let Some((ov, dir)) = self.find_overlap(from, to) else {
            return Ok(None);
        };
        if dir {
            return match ov.transition.eval(x) {
                Ok(g) => Ok(Some(g)),
                Err(Error::Domain { .. }) => Ok(None),
                Err(e) => Err(e),
            };
        }
        let Some(y) = self.map_point(from, to, x)? else {
            return Ok(None);
        };
        match ov.transition.eval(&y) {
            Ok(g) if g != 0.0 => Ok(Some(1.0 / g)),
            Ok(_) | Err(Error::Domain { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Jacobian `∂y/∂x` of the coordinate change `from → to` at `x`.
    pub fn map_jacobian(&self, from: usize, to: usize, x: &[f64]) -> Result<Matrix> {
        let d = self.dim();
        if from == to {
            return Ok(Matrix::identity(d, d));
        }
        let (ov, dir) = self.find_overlap(from, to).ok_or(Error::OutOfAtlas)?;
        let exprs = if dir { &ov.forward } else { &ov.backward };
        let mut jac = Matrix::zeros(d, d);
        let mut xs: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
        for j in 0..d {
            xs[j].eps = 1.0;
            for (i, e) in exprs.iter().enumerate() {
                jac[(i, j)] = e.eval_generic(&xs)?.eps;
            }
            xs[j].eps = 0.0;
        }
        Ok(jac)
    }

    /// Checks that the point lies in its chart and wraps periodic coordinates.
    pub fn locate(&self, p: &Point) -> Result<Point> {
        let chart = self.charts.get(p.chart).ok_or(Error::OutOfAtlas)?;
        let coords = chart.normalize(&p.coords);
        chart.check_domain(&coords)?;
        Ok(Point::new(p.chart, coords))
    }

    /// How comfortably `x` sits inside chart `i`: the guard value when the
    /// chart has one, otherwise the relative margin to the domain boundary.
    pub fn comfort(&self, i: usize, x: &[f64]) -> f64 {
        let c = &self.charts[i];
        let margin = c.boundary_margin(x);
        match c.guard_value(x) {
            Some(g) => g.min(if margin.is_finite() {
                margin / 0.05
            } else {
                f64::INFINITY
            }),
            None => margin,
        }
    }

    /// Re-expresses `p` in the most comfortable chart among its own and its neighbours.
    pub fn best_chart(&self, p: &Point) -> Result<Point> {
        let mut best = (self.comfort(p.chart, &p.coords), p.clone());
        for j in self.neighbors(p.chart) {
            if let Some(y) = self.map_point(p.chart, j, &p.coords)? {
                let c = self.comfort(j, &y);
                if c > best.0 {
                    best = (c, Point::new(j, y));
                }
            }
        }
        Ok(best.1)
    }

    /// Coordinates of `p` in chart `to`, if covered there.
    pub fn express_in(&self, p: &Point, to: usize) -> Result<Option<Vec<f64>>> {
        self.map_point(p.chart, to, &p.coords)
    }
}
