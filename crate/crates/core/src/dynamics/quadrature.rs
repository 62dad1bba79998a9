use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{BoundExpr, Expression};
use crate::geometry::{angle_diff, Chart};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// A closed parametrized curve in a chart.
pub trait Cycle {
    /// Parameter interval.
    fn interval(&self) -> (f64, f64);
    fn point(&self, t: f64) -> Result<Vec<f64>>;
    fn velocity(&self, t: f64) -> Result<Vec<f64>>;
}

/// `t ↦ base + t·e_index` for `t ∈ [0, 2π·turns]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateCircle {
    pub base: Vec<f64>,
    pub index: usize,
    pub turns: u32,
}

impl Cycle for CoordinateCircle {
    fn interval(&self) -> (f64, f64) {
        (0.0, TAU * self.turns as f64)
    }

    fn point(&self, t: f64) -> Result<Vec<f64>> {
        let mut x = self.base.clone();
        x[self.index] += t;
        Ok(x)
    }

    fn velocity(&self, _t: f64) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.base.len()];
        v[self.index] = 1.0;
        Ok(v)
    }
}

/// Components given as expressions in `t ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprCycle {
    components: Vec<BoundExpr>,
}

impl ExprCycle {
    pub fn new(components: &[Expression]) -> Result<Self> {
        let components = components.iter().map(|e| e.bind(&["t"])).collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }
}

impl Cycle for ExprCycle {
    fn interval(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn point(&self, t: f64) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(&[t])).collect()
    }

    fn velocity(&self, t: f64) -> Result<Vec<f64>> {
        self.components
            .iter()
            .map(|c| c.eval_dual(&[t], &[1.0]).map(|r| r.1))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureOptions {
    pub nodes: usize,
    pub subdivisions: usize,
    /// Relative Richardson acceptance threshold.
    pub tol: f64,
    /// Largest endpoint gap (periodic axes by shortest arc) accepted as closed.
    pub closure_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            nodes: 64,
            subdivisions: 8,
            tol: 1e-10,
            closure_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopIntegral {
    /// `(1/2π) ∮ α`.
    pub value: f64,
    /// `|Q_{2m} − Q_m|` between `m` and `2m` subdivisions.
    pub error_estimate: f64,
    pub converged: bool,
}

fn composite(chart: &Chart, cycle: &dyn Cycle, nodes: &[f64], weights: &[f64], m: usize) -> Result<f64> {
    let (a, b) = cycle.interval();
    let h = (b - a) / m as f64;
    let mut total = 0.0;
    for k in 0..m {
        let lo = a + k as f64 * h;
        let mut part = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            let t = lo + 0.5 * h * (x + 1.0);
            let p = chart.normalize(&cycle.point(t)?);
            let alpha = chart.alpha_at(&p)?;
            let v = cycle.velocity(t)?;
            part += w * alpha.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        }
        total += 0.5 * h * part;
    }
    Ok(total / TAU)
}

/// `(1/2π) ∮_γ α` by composite Gauss–Legendre quadrature, with a Richardson
/// check against twice as many subdivisions.
pub fn loop_integral(chart: &Chart, cycle: &dyn Cycle, opts: &QuadratureOptions) -> Result<LoopIntegral> {
    let (a, b) = cycle.interval();
    let (pa, pb) = (cycle.point(a)?, cycle.point(b)?);
    let gap = pa
        .iter()
        .zip(&pb)
        .zip(chart.periodic())
        .map(|((x, y), &p)| if p { angle_diff(*x, *y).abs() } else { (x - y).abs() })
        .fold(0.0, f64::max);
    if gap > opts.closure_tol {
        return Err(Error::NotClosed { gap });
    }
    let (nodes, weights) = gauss_legendre(opts.nodes);
    let q1 = composite(chart, cycle, &nodes, &weights, opts.subdivisions)?;
    let q2 = composite(chart, cycle, &nodes, &weights, 2 * opts.subdivisions)?;
    let err = (q2 - q1).abs();
    Ok(LoopIntegral {
        value: q2,
        error_estimate: err,
        converged: err <= opts.tol * q2.abs().max(1.0),
    })
}
