use serde::Serialize;

use crate::multiindex::CoefficientTable;
use crate::ssm::{evaluate_tv_state, NonAutonomousCoeffs};

use super::ReducedSystem;

/// Peak of `|z_out(φ)|` over one period of the rotating coordinates, with
/// `z(φ) = W(p(φ)) + ε(x₀e^{iφ} + x̄₀e^{−iφ})` when `forced` is given.
pub fn lift_amplitude(
    sys: &ReducedSystem,
    table: &CoefficientTable,
    forced: Option<(&NonAutonomousCoeffs, f64)>,
    y: &[f64],
    output: usize,
    samples: usize,
) -> f64 {
    let q = sys.q(y);
    let n = samples * sys.period_factor() as usize;
    let span = 2.0 * std::f64::consts::PI * sys.period_factor() as f64;
    (0..n)
        .map(|s| {
            let phi = span * s as f64 / n as f64;
            let p = sys.point(&q, phi);
            let z = match forced {
                Some((c, eps)) => evaluate_tv_state(table, Some(c), &p, phi, eps),
                None => table.eval_w(&p),
            };
            z[output].re.abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BackbonePoint {
    pub rho: f64,
    /// `Im R_k(p)/p_k`.
    pub frequency: f64,
    /// `Re R_k(p)/p_k`.
    pub damping: f64,
    pub amplitude: f64,
}

/// Backbone of pair `k`: instantaneous frequency and damping of the
/// autonomous reduced dynamics restricted to that pair.
pub fn backbone_curve(
    sys: &ReducedSystem,
    table: &CoefficientTable,
    k: usize,
    rhos: &[f64],
    output: usize,
    samples: usize,
) -> Vec<BackbonePoint> {
    rhos.iter()
        .map(|&rho| {
            let ratio = sys.backbone_ratio(k, rho);
            let mut y = vec![0.0; sys.dim()];
            y[2 * k] = rho;
            BackbonePoint {
                rho,
                frequency: ratio.im,
                damping: ratio.re,
                amplitude: lift_amplitude(sys, table, None, &y, output, samples),
            }
        })
        .collect()
}
