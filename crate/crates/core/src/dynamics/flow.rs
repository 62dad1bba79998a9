use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::bundle::{Atlas, Point, Section};
use crate::error::{Error, Result};
use crate::jacobi::ham_field;

use super::dopri;

/// Which times a trajectory records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Output {
    /// Every accepted step.
    Steps,
    /// `n + 1` evenly spaced times from `0` to `T`, by dense output.
    Uniform(usize),
    /// Explicit times between `0` and `T`, monotone in the direction of integration.
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Guard value below which the flow moves to a better chart.
    pub switch_tol: f64,
    /// Relative distance to a bounded domain edge that triggers a chart switch.
    pub boundary_margin: f64,
    /// Largest change of a periodic coordinate within one step.
    pub max_angle_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
    pub output: Output,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            switch_tol: 1e-3,
            boundary_margin: 0.05,
            max_angle_step: FRAC_PI_2,
            max_step: f64::INFINITY,
            max_steps: 10_000_000,
            output: Output::Steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartSwitch {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub min_step: f64,
    pub max_step: f64,
}

/// Sampled solution of `ẋ = X_h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Strictly monotone in the direction of integration (increasing for `T > 0`).
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub chart_switches: Vec<ChartSwitch>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&Point> {
        self.points.last()
    }
}

fn needs_switch(atlas: &Atlas, chart: usize, y: &[f64], opts: &FlowOptions) -> bool {
    let c = atlas.chart(chart);
    c.boundary_margin(y) < opts.boundary_margin || c.guard_value(y).is_some_and(|g| g < opts.switch_tol)
}

struct Recorder<'a> {
    atlas: &'a Atlas,
    times: Vec<f64>,
    points: Vec<Point>,
    pending: std::vec::IntoIter<f64>,
    next: Option<f64>,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, chart: usize, y: &[f64]) {
        if self.times.last() == Some(&t) {
            return;
        }
        self.times.push(t);
        self.points
            .push(Point::new(chart, self.atlas.chart(chart).normalize(y)));
    }
}

/// Integrates `ẋ = X_h` from `x0` for time `t_final` (negative runs backwards)
/// with an adaptive Dormand–Prince 5(4) pair, moving between charts as needed.
pub fn flow(atlas: &Atlas, h: &Section, x0: &Point, t_final: f64, opts: &FlowOptions) -> Result<Trajectory> {
    let start = atlas.locate(x0)?;
    let dir = if t_final < 0.0 { -1.0 } else { 1.0 };
    let span = t_final.abs();
    let mut evaluations = 0usize;

    let mut chart = start.chart;
    let mut y = start.coords;
    // time runs as τ = |t| ∈ [0, span]; the field is multiplied by `dir`
    let rhs = |chart: usize, y: &[f64], evals: &mut usize| -> Result<Vec<f64>> {
        *evals += 1;
        let v = ham_field(atlas.chart(chart), h.local(chart), y)?;
        Ok(v.iter().map(|c| dir * c).collect())
    };

    let mut samples: Vec<f64> = match &opts.output {
        Output::Steps => Vec::new(),
        Output::Uniform(n) => {
            let n = (*n).max(1);
            (0..=n).map(|i| span * i as f64 / n as f64).collect()
        }
        Output::Times(ts) => ts.iter().map(|t| t * dir).filter(|t| *t >= 0.0 && *t <= span).collect(),
    };
    samples.sort_by(f64::total_cmp);
    let mut pending = samples.into_iter();
    let next = pending.next();
    let mut rec = Recorder {
        atlas,
        times: Vec::new(),
        points: Vec::new(),
        pending,
        next,
    };
    let dense = !matches!(opts.output, Output::Steps);
    if !dense || rec.next == Some(0.0) {
        rec.push(0.0, chart, &y);
        if dense {
            rec.next = rec.pending.next();
        }
    }

    let mut switches = Vec::new();
    let mut stats = StepStats {
        accepted: 0,
        rejected: 0,
        evaluations: 0,
        min_step: f64::INFINITY,
        max_step: 0.0,
    };
    if span == 0.0 {
        stats.evaluations = evaluations;
        return Ok(finish(rec, switches, stats, dir));
    }

    let mut k1 = rhs(chart, &y, &mut evaluations)?;
    let mut step = {
        let mut f = |z: &[f64]| rhs(chart, z, &mut evaluations);
        dopri::initial_step(&mut f, &y, &k1, opts.rtol, opts.atol, opts.max_step.min(span))?
    };
    let mut tau = 0.0;
    let tiny = 1e-14 * span.max(1.0);

    while tau < span {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepSizeUnderflow { time: dir * tau });
        }
        if needs_switch(atlas, chart, &y, opts) {
            let best = atlas.best_chart(&Point::new(chart, y.clone()))?;
            if best.chart != chart {
                switches.push(ChartSwitch {
                    time: dir * tau,
                    from: chart,
                    to: best.chart,
                });
                chart = best.chart;
                y = best.coords;
                k1 = rhs(chart, &y, &mut evaluations)?;
            }
        }
        let periodic = atlas.chart(chart).periodic();
        let vmax = k1
            .iter()
            .zip(periodic)
            .filter(|(_, p)| **p)
            .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
        let mut hh = step.min(span - tau).min(opts.max_step);
        if vmax > 0.0 {
            hh = hh.min(opts.max_angle_step / vmax);
        }
        if hh < tiny {
            return Err(Error::StepSizeUnderflow { time: dir * tau });
        }
        let attempt = {
            let mut f = |z: &[f64]| rhs(chart, z, &mut evaluations);
            dopri::step(&mut f, &y, &k1, hh, opts.rtol, opts.atol)
        };
        let st = match attempt {
            Ok(st) if st.err.is_finite() => st,
            Ok(_) | Err(Error::OutOfDomain { .. }) | Err(Error::Domain { .. }) | Err(Error::SingularSystem { .. }) => {
                stats.rejected += 1;
                step = hh * 0.25;
                continue;
            }
            Err(e) => {
                return Err(Error::AtTime {
                    time: dir * tau,
                    source: Box::new(e),
                })
            }
        };
        let fac = if st.err == 0.0 {
            5.0
        } else {
            (0.9 * st.err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if st.err > 1.0 {
            stats.rejected += 1;
            step = hh * fac.min(1.0);
            continue;
        }
        let out_of_chart = !atlas.chart(chart).contains(&st.y_new);
        if out_of_chart {
            stats.rejected += 1;
            step = hh * 0.25;
            if step < tiny {
                return Err(Error::LeftAtlas { time: dir * tau });
            }
            continue;
        }
        stats.accepted += 1;
        stats.min_step = stats.min_step.min(hh);
        stats.max_step = stats.max_step.max(hh);
        let tau_new = if span - (tau + hh) < tiny { span } else { tau + hh };
        if dense {
            while let Some(ts) = rec.next {
                if ts > tau_new {
                    break;
                }
                let s = ((ts - tau) / (tau_new - tau)).clamp(0.0, 1.0);
                let yi = st.interpolate(s);
                rec.push(ts, chart, &yi);
                rec.next = rec.pending.next();
            }
        } else {
            rec.push(tau_new, chart, &st.y_new);
        }
        tau = tau_new;
        y = atlas.chart(chart).normalize(&st.y_new);
        k1 = st.k7;
        step = hh * fac;
    }
    stats.evaluations = evaluations;
    Ok(finish(rec, switches, stats, dir))
}

fn finish(rec: Recorder<'_>, chart_switches: Vec<ChartSwitch>, mut stats: StepStats, dir: f64) -> Trajectory {
    if stats.min_step == f64::INFINITY {
        stats.min_step = 0.0;
    }
    Trajectory {
        times: rec.times.iter().map(|t| dir * t).collect(),
        points: rec.points,
        chart_switches,
        stats,
    }
}
