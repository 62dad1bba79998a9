//! Deterministic probe points: Halton sequences and seeded uniform draws in chart boxes.

use rand::Rng;

use crate::geometry::{Chart, Interval};

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % b) as f64 * scale;
        index /= b;
        scale *= inv;
    }
    out
}

/// Point `index` (1-based internally, so index 0 is not the origin) of the Halton sequence in `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton: dimension {dim} unsupported");
    (0..dim).map(|d| radical_inverse(index + 1, PRIMES[d])).collect()
}

fn scale_into(unit: &[f64], bx: &[Interval]) -> Vec<f64> {
    unit.iter()
        .zip(bx)
        .map(|(u, iv)| {
            // keep strictly inside open intervals
            let t = u.clamp(1e-9, 1.0 - 1e-9);
            iv.lo + t * (iv.hi - iv.lo)
        })
        .collect()
}

/// `index`-th quasi-random point in the chart's sample box.
pub fn halton_in(chart: &Chart, index: u64) -> Vec<f64> {
    let unit = halton(index, chart.dim());
    chart.normalize(&scale_into(&unit, chart.sample_box()))
}

/// Uniform point in the chart's sample box.
pub fn uniform_in<R: Rng + ?Sized>(chart: &Chart, rng: &mut R) -> Vec<f64> {
    let unit: Vec<f64> = (0..chart.dim()).map(|_| rng.gen::<f64>()).collect();
    chart.normalize(&scale_into(&unit, chart.sample_box()))
}
