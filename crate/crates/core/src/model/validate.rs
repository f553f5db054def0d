use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::linalg::csc_norm1;

use super::SecondOrderModel;

#[derive(Clone, Debug)]
pub struct ValidationOptions {
    pub enabled: bool,
    pub probe_scale: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            enabled: true,
            probe_scale: 1e-2,
            tol: 1e-6,
            seed: 0x5eed,
        }
    }
}

/// Outcome of probing a black-box nonlinearity for the contract
/// "no constant part, no linear part, at most cubic".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub origin_norm: f64,
    pub zero_at_origin: bool,
    /// Linear-part estimate relative to `‖K‖₁ + ‖C‖₁`.
    pub linear_part_rel: f64,
    pub linear_part_flag: bool,
    /// `‖F(2z) - 4F₂(z) - 8F₃(z)‖ / ‖F(2z)‖` with the parity parts taken at `±z`.
    pub closure_residual: f64,
    pub closure_flag: bool,
    pub probe: Vec<f64>,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn validate_nonlinearity(
    model: &SecondOrderModel,
    probe_scale: f64,
    tol: f64,
    seed: u64,
) -> Result<ValidationReport> {
    if !(probe_scale > 0.0) {
        return Err(SsmError::InvalidInput("probe_scale must be positive".into()));
    }
    let n = model.dofs();
    let nl = model.nonlinearity();
    let eval = |z: &[f64]| nl.eval(&z[..n], &z[n..]);
    let scaled = |z: &[f64], s: f64| z.iter().map(|v| v * s).collect::<Vec<_>>();

    let zero = vec![0.0; 2 * n];
    let origin_norm = norm(&eval(&zero)?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let inf = dir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for v in dir.iter_mut() {
        *v *= probe_scale / inf;
    }

    // Richardson-extrapolated central difference removes the cubic h² term.
    let h = 1e-2;
    let central = |h: f64| -> Result<Vec<f64>> {
        let plus = eval(&scaled(&dir, h))?;
        let minus = eval(&scaled(&dir, -h))?;
        Ok(sub(&plus, &minus).into_iter().map(|v| v / (2.0 * h)).collect())
    };
    let d1 = central(h)?;
    let d2 = central(h / 2.0)?;
    let lin: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    let linear_scale = (csc_norm1(model.stiffness()) + csc_norm1(model.damping())).max(f64::MIN_POSITIVE)
        * probe_scale;
    let linear_part_rel = norm(&lin) / linear_scale;

    let fp = eval(&dir)?;
    let fm = eval(&scaled(&dir, -1.0))?;
    let f2z = eval(&scaled(&dir, 2.0))?;
    let predicted: Vec<f64> = fp
        .iter()
        .zip(&fm)
        .map(|(a, b)| 4.0 * (a + b) / 2.0 + 8.0 * (a - b) / 2.0)
        .collect();
    let denom = norm(&f2z);
    let closure_residual = if denom > 0.0 {
        norm(&sub(&f2z, &predicted)) / denom
    } else {
        norm(&predicted)
    };

    Ok(ValidationReport {
        origin_norm,
        zero_at_origin: origin_norm == 0.0,
        linear_part_rel,
        linear_part_flag: linear_part_rel > tol,
        closure_residual,
        closure_flag: closure_residual > tol,
        probe: dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FnNonlinearity, ValidationOptions};
    use nalgebra::dmatrix;
    use std::sync::Arc;

    fn model_with(f: fn(f64) -> f64) -> SecondOrderModel {
        let nl = Arc::new(FnNonlinearity::new(1, "probe", move |x: &[f64], _: &[f64]| vec![f(x[0])]));
        let off = ValidationOptions {
            enabled: false,
            ..Default::default()
        };
        use crate::linalg::dense_to_csc;
        SecondOrderModel::with_options(
            dense_to_csc(&dmatrix![1.0]),
            dense_to_csc(&dmatrix![0.0]),
            dense_to_csc(&dmatrix![4.0]),
            nl,
            &off,
        )
        .unwrap()
    }

    #[test]
    fn quadratic_plus_cubic_passes() {
        let r = validate_nonlinearity(&model_with(|x| x * x + x * x * x), 1.0, 1e-8, 1).unwrap();
        assert!(r.zero_at_origin);
        assert!(r.linear_part_rel < 1e-10, "{}", r.linear_part_rel);
        assert!(r.closure_residual < 1e-14);
        assert!(!r.linear_part_flag && !r.closure_flag);
    }

    #[test]
    fn sine_is_flagged_as_not_cubic() {
        let r = validate_nonlinearity(&model_with(|x| x.sin() - x), 1.0, 1e-3, 1).unwrap();
        // odd function: F₂ vanishes, so the prediction at 2x is 8 F₃(x) = 8 f(x)
        let x = r.probe[0];
        let f = |x: f64| x.sin() - x;
        let oracle = (f(2.0 * x) - 8.0 * f(x)).abs() / f(2.0 * x).abs();
        assert!((r.closure_residual - oracle).abs() < 1e-12);
        // at x = 1 the parity reconstruction misses by about 16%
        let at_one = (f(2.0) - 8.0 * f(1.0)).abs() / f(2.0).abs();
        assert!(at_one > 0.16 && at_one < 0.17);
        assert!(r.closure_flag);
    }

    #[test]
    fn linear_term_is_flagged() {
        let r = validate_nonlinearity(&model_with(|x| x), 1e-2, 1e-6, 1).unwrap();
        assert!(r.linear_part_flag);
        let expected = r.probe[0].abs() / (4.0 * 1e-2);
        assert!((r.linear_part_rel - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn non_positive_probe_rejected() {
        assert!(validate_nonlinearity(&model_with(|x| x * x), 0.0, 1e-6, 1).is_err());
    }
}
