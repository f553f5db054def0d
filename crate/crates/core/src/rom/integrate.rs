use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h0: 1e-3,
            max_steps: 10_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Dormand–Prince 5(4) with step-size control. Returns the state at each of
/// the (increasing) output times; steps are clipped to land on them exactly.
pub fn dopri45<F>(mut f: F, t0: f64, y0: &[f64], times: &[f64], opts: &IntegrateOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = opts.h0;
    let mut out = Vec::with_capacity(times.len());
    let mut steps = 0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    for &target in times {
        if target < t {
            return Err(SsmError::InvalidInput("output times must be non-decreasing".into()));
        }
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(SsmError::NonConvergence {
                    context: format!("integration at t = {t}"),
                    iterations: steps,
                    residual: h,
                });
            }
            let last = h >= target - t;
            let hs = if last { target - t } else { h };
            k[0] = f(t, &y)?;
            for s in 1..7 {
                for i in 0..n {
                    tmp[i] = y[i] + hs * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                k[s] = f(t + C[s] * hs, &tmp)?;
            }
            let mut err: f64 = 0.0;
            let mut y5 = vec![0.0; n];
            for i in 0..n {
                let d5: f64 = (0..7).map(|j| B5[j] * k[j][i]).sum();
                let d4: f64 = (0..7).map(|j| B4[j] * k[j][i]).sum();
                y5[i] = y[i] + hs * d5;
                let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((hs * (d5 - d4) / sc).abs());
            }
            if !err.is_finite() {
                return Err(SsmError::Numerical(format!("integration blew up at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y = y5;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err <= 1.0) {
                h = hs * fac;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(SsmError::NonConvergence {
                    context: format!("integration step underflow at t = {t}"),
                    iterations: steps,
                    residual: err,
                });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
