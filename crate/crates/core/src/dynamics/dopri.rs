//! Dormand–Prince 5(4) tableau with Hairer's dense output.

use crate::error::Result;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Fifth-order minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One attempted step from `y` with `k1 = f(y)`.
pub(crate) struct Step {
    pub y_new: Vec<f64>,
    /// `f(y_new)`, reused as the next step's first stage.
    pub k7: Vec<f64>,
    /// Scaled RMS error estimate; the step is acceptable when `≤ 1`.
    pub err: f64,
    cont: [Vec<f64>; 5],
}

impl Step {
    /// Dense output at fraction `s ∈ [0, 1]` of the step.
    pub fn interpolate(&self, s: f64) -> Vec<f64> {
        let s1 = 1.0 - s;
        let [c0, c1, c2, c3, c4] = &self.cont;
        (0..c0.len())
            .map(|i| c0[i] + s * (c1[i] + s1 * (c2[i] + s * (c3[i] + s1 * c4[i]))))
            .collect()
    }
}

pub(crate) fn step<F>(f: &mut F, y: &[f64], k1: &[f64], h: f64, rtol: f64, atol: f64) -> Result<Step>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k1.to_vec());
    let mut yi = vec![0.0; n];
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += A[s][j] * kj[i];
            }
            yi[i] = y[i] + h * acc;
        }
        debug_assert!(C[s] > 0.0);
        k.push(f(&yi)?);
    }
    // stage 7 is evaluated at the fifth-order solution (FSAL)
    let y_new = yi;
    let mut err = 0.0;
    for i in 0..n {
        let e: f64 = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
        if sc > 0.0 {
            err += (e / sc).powi(2);
        } else if e != 0.0 {
            err = f64::INFINITY;
        }
    }
    let err = if n > 0 { (err / n as f64).sqrt() } else { 0.0 };

    let ydiff: Vec<f64> = (0..n).map(|i| y_new[i] - y[i]).collect();
    let bspl: Vec<f64> = (0..n).map(|i| h * k[0][i] - ydiff[i]).collect();
    let c3: Vec<f64> = (0..n).map(|i| ydiff[i] - h * k[6][i] - bspl[i]).collect();
    let c4: Vec<f64> = (0..n)
        .map(|i| h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>())
        .collect();
    let k7 = k.pop().expect("seven stages");
    Ok(Step {
        cont: [y.to_vec(), ydiff, bspl, c3, c4],
        y_new,
        k7,
        err,
    })
}

fn rms_scaled(v: &[f64], y: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = v.len().max(1) as f64;
    (v.iter()
        .zip(y)
        .map(|(a, b)| {
            let sc = atol + rtol * b.abs();
            if sc > 0.0 {
                (a / sc).powi(2)
            } else {
                a * a
            }
        })
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Hairer's starting step heuristic.
pub(crate) fn initial_step<F>(f: &mut F, y: &[f64], k1: &[f64], rtol: f64, atol: f64, h_max: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let d0 = rms_scaled(y, y, rtol, atol);
    let d1 = rms_scaled(k1, y, rtol, atol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max);
    let y1: Vec<f64> = y.iter().zip(k1).map(|(a, b)| a + h0 * b).collect();
    let k2 = match f(&y1) {
        Ok(k) => k,
        Err(_) => return Ok(h0 * 1e-2),
    };
    let diff: Vec<f64> = k2.iter().zip(k1).map(|(a, b)| a - b).collect();
    let d2 = rms_scaled(&diff, y, rtol, atol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(h_max))
}
