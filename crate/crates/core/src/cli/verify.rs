use std::collections::BTreeMap;

use crate::error::{Result, SsmError};
use crate::linalg::{norm_inf, CVector};
use crate::multiindex::CoefficientTable;
use crate::models::{builtin, BuiltinModel};
use crate::spectral::solve_master_subspace;
use crate::ssm::{compute_ssm_with, SsmOptions};
use crate::step::{StepComposer, TensorComposer};

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub coefficients: usize,
    /// Worst `‖W_m − W_m^ref‖∞ / ‖W_m^ref‖∞` over all multi-indices.
    pub max_rel_w: f64,
    pub max_rel_r: f64,
}

/// Worst per-coefficient relative deviations of `a` from `reference`.
/// Coefficients at round-off level in the reference (odd symmetry) are
/// measured against the largest reference coefficient of equal or lower
/// degree.
pub fn compare_tables(a: &CoefficientTable, reference: &CoefficientTable) -> Result<VerifyReport> {
    let mut out = VerifyReport {
        coefficients: 0,
        max_rel_w: 0.0,
        max_rel_r: 0.0,
    };
    let mut floor_w: Vec<f64> = Vec::new();
    let mut floor_r: Vec<f64> = Vec::new();
    for (m, w, r) in reference.iter() {
        let d = m.degree() as usize;
        if floor_w.len() <= d {
            floor_w.resize(d + 1, 0.0);
            floor_r.resize(d + 1, 0.0);
        }
        floor_w[d] = floor_w[d].max(norm_inf(w));
        floor_r[d] = floor_r[d].max(norm_inf(r));
    }
    for k in 1..floor_w.len() {
        floor_w[k] = floor_w[k].max(floor_w[k - 1]);
        floor_r[k] = floor_r[k].max(floor_r[k - 1]);
    }
    let rel = |x: &CVector, y: &CVector, floor: f64| {
        let diff = norm_inf(&(x - y));
        if diff == 0.0 {
            0.0
        } else {
            let own = norm_inf(y);
            let denom = if own > 1e-12 * floor { own } else { floor };
            diff / denom.max(f64::MIN_POSITIVE)
        }
    };
    for (m, w_ref, r_ref) in reference.iter() {
        let (w, r) = a
            .w(m)
            .zip(a.r(m))
            .ok_or_else(|| SsmError::MissingCoefficient { index: m.clone() })?;
        let d = m.degree() as usize;
        out.max_rel_w = out.max_rel_w.max(rel(w, w_ref, floor_w[d]));
        // R vanishes except at resonances; compare on the W scale
        out.max_rel_r = out.max_rel_r.max(rel(r, r_ref, floor_r[d].max(floor_w[d])));
        out.coefficients += 1;
    }
    Ok(out)
}

/// Black-box against tensor-based computation on the slowest pair.
pub fn verify_model(b: &BuiltinModel, order: u32) -> Result<VerifyReport> {
    let tensors = b.tensors.clone().ok_or_else(|| SsmError::Config {
        field: "model".into(),
        message: format!("model `{}` has no explicit tensors to compare against", b.id),
    })?;
    let sys = b.first_order();
    let sub = solve_master_subspace(&sys, 2, crate::linalg::C64::new(0.0, 0.0))?;
    let opts = SsmOptions::default();
    let mut step = StepComposer::with_options(&sys, opts.step.clone());
    let got = compute_ssm_with(&sys, &sub, order, &opts, &mut step)?;
    let reference = compute_ssm_with(&sys, &sub, order, &opts, &mut TensorComposer::new(tensors))?;
    compare_tables(&got.table, &reference.table)
}

pub fn verify_builtin(name: &str, order: u32, params: &BTreeMap<String, f64>) -> Result<VerifyReport> {
    verify_model(&builtin(name, params)?, order)
}
