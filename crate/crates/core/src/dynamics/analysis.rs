use serde::Serialize;

use crate::bundle::{momentum, Atlas, Point, Section};
use crate::error::{Error, Result};
use crate::geometry::angle_diff;

use super::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drift {
    /// `max |q(x(t)) − q(x(0))|`.
    pub max: f64,
    /// Time at which the maximum occurs.
    pub time: f64,
}

/// A quantity evaluated at points of an atlas.
pub type Quantity<'a> = dyn Fn(&Point) -> Result<f64> + Sync + 'a;

fn at_time<T>(time: f64, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::AtTime {
        time,
        source: Box::new(e),
    })
}

/// Largest deviation of each quantity from its initial value along `traj`.
pub fn drift(traj: &Trajectory, quantities: &[&Quantity<'_>]) -> Result<Vec<Drift>> {
    let Some(first) = traj.points.first() else {
        return Err(Error::InsufficientSamples { got: 0, needed: 1 });
    };
    let mut out = Vec::with_capacity(quantities.len());
    for q in quantities {
        let q0 = at_time(traj.times[0], q(first))?;
        let mut d = Drift {
            max: 0.0,
            time: traj.times[0],
        };
        for (t, p) in traj.times.iter().zip(&traj.points) {
            let v = (at_time(*t, q(p))? - q0).abs();
            if v > d.max {
                d = Drift { max: v, time: *t };
            }
        }
        out.push(d);
    }
    Ok(out)
}

/// `s_num / s_den` at a point; chart-independent since the transition factor cancels.
pub fn section_ratio<'a>(num: &'a Section, den: &'a Section) -> impl Fn(&Point) -> Result<f64> + Sync + 'a {
    move |p: &Point| {
        let d = den.value(p)?;
        if d == 0.0 {
            return Err(Error::ZeroDivisor { value: d });
        }
        Ok(num.value(p)? / d)
    }
}

/// Drift of the normalized momentum value along `traj`.
pub fn momentum_drift(atlas: &Atlas, ys: &[Section], traj: &Trajectory, tol: f64) -> Result<Drift> {
    let Some(first) = traj.points.first() else {
        return Err(Error::InsufficientSamples { got: 0, needed: 1 });
    };
    let m0 = at_time(traj.times[0], momentum(atlas, ys, first, tol))?;
    let mut d = Drift {
        max: 0.0,
        time: traj.times[0],
    };
    for (t, p) in traj.times.iter().zip(&traj.points) {
        let v = at_time(*t, momentum(atlas, ys, p, tol))?.distance(&m0);
        if v > d.max {
            d = Drift { max: v, time: *t };
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frequencies {
    pub omegas: Vec<f64>,
    /// Per angle, `max |unwrapped − fitted line|`.
    pub residuals: Vec<f64>,
}

impl Frequencies {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Minimum number of samples for a frequency fit.
pub const MIN_FREQUENCY_SAMPLES: usize = 10;

/// Least-squares winding rates of the periodic coordinates `indices` along `traj`.
pub fn frequencies(atlas: &Atlas, traj: &Trajectory, indices: &[usize]) -> Result<Frequencies> {
    let n = traj.len();
    if n < MIN_FREQUENCY_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: n,
            needed: MIN_FREQUENCY_SAMPLES,
        });
    }
    for p in &traj.points {
        let c = atlas.chart(p.chart);
        if let Some(&bad) = indices.iter().find(|&&i| i >= c.dim() || !c.periodic()[i]) {
            return Err(Error::Schema {
                path: format!("angles[{bad}]"),
                message: format!("coordinate {bad} of chart `{}` is not periodic", c.id()),
            });
        }
    }
    let tmean = traj.times.iter().sum::<f64>() / n as f64;
    let stt: f64 = traj.times.iter().map(|t| (t - tmean).powi(2)).sum();
    let mut out = Frequencies {
        omegas: Vec::with_capacity(indices.len()),
        residuals: Vec::with_capacity(indices.len()),
    };
    for &i in indices {
        let mut unwrapped = Vec::with_capacity(n);
        let mut acc = traj.points[0].coords[i];
        unwrapped.push(acc);
        for w in traj.points.windows(2) {
            acc += angle_diff(w[0].coords[i], w[1].coords[i]);
            unwrapped.push(acc);
        }
        let ymean = unwrapped.iter().sum::<f64>() / n as f64;
        let sty: f64 = traj
            .times
            .iter()
            .zip(&unwrapped)
            .map(|(t, y)| (t - tmean) * (y - ymean))
            .sum();
        let slope = if stt > 0.0 { sty / stt } else { 0.0 };
        let residual = traj
            .times
            .iter()
            .zip(&unwrapped)
            .map(|(t, y)| (y - ymean - slope * (t - tmean)).abs())
            .fold(0.0, f64::max);
        out.omegas.push(slope);
        out.residuals.push(residual);
    }
    Ok(out)
}
