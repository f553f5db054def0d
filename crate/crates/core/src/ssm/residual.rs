//! Invariance-residual diagnostics.

use crate::error::{Result, SsmError};
use crate::linalg::{csc_mul, csc_norm1, norm_inf, CVector, C64};
use crate::model::FirstOrderSystem;
use crate::multiindex::{CoefficientTable, MultiIndex};
use crate::spectral::MasterSubspace;

use super::{conjugate_point, eval_f_at};

/// Root-test estimate of the natural chart radius:
/// `min_k (‖W_1‖ / ‖W_k‖)^{1/(k−1)}` over the degrees present, with `‖W_k‖`
/// the largest sup-norm of a degree-`k` coefficient.
pub fn chart_radius(table: &CoefficientTable) -> f64 {
    let size = |k: u32| {
        table
            .degree(k)
            .map(|b| b.iter().map(|(_, w, _)| norm_inf(w)).fold(0.0, f64::max))
            .unwrap_or(0.0)
    };
    let w1 = size(1);
    let mut r = f64::INFINITY;
    for k in 2..=table.max_order() {
        let wk = size(k);
        if wk > 0.0 {
            r = r.min((w1 / wk).powf(1.0 / (k - 1) as f64));
        }
    }
    if r.is_finite() {
        r
    } else {
        1.0
    }
}

/// Invariance residual with the order-one balance `B V Λ = A V` cancelled
/// analytically, so the result is free of the `O(‖A‖ ε h)` roundoff floor of
/// the linear terms:
/// `B (V R_{≥2}(p) + DW_{≥2}(p) R(p)) − A W_{≥2}(p) − F(W(p))`.
pub fn invariance_residual_nonlinear(
    sys: &FirstOrderSystem,
    table: &CoefficientTable,
    p: &[C64],
) -> Result<CVector> {
    let [a, b, c] = residual_terms(sys, table, p)?;
    Ok(a - b - c)
}

fn residual_terms(sys: &FirstOrderSystem, table: &CoefficientTable, p: &[C64]) -> Result<[CVector; 3]> {
    let mdim = table.m_dim();
    let mut upper = CoefficientTable::new(mdim, table.n_state());
    for (m, w, r) in table.iter() {
        if m.degree() >= 2 {
            upper.insert(m.clone(), w.clone(), r.clone());
        }
    }
    let r = table.eval_r(p);
    let r2 = upper.eval_r(p);
    let mut lin = CVector::zeros(table.n_state());
    for j in 0..mdim {
        let v = table.w(&MultiIndex::unit(mdim, j)).expect("linear coefficients");
        lin.axpy(r2[j], v, C64::new(1.0, 0.0));
    }
    let dwr = lin + upper.eval_dw(p, r.as_slice());
    let f = eval_f_at(sys, &table.eval_w(p))?;
    Ok([csc_mul(sys.b(), &dwr), csc_mul(sys.a(), &upper.eval_w(p)), f])
}


#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualSample {
    /// Amplitude relative to the chart radius.
    pub h: f64,
    pub residual: f64,
    /// Roundoff level of the summed terms.
    pub floor: f64,
}

/// Residual sup-norm at `p = conjugate_point(h · radius)` on the first pair.
pub fn residual_sample(
    sys: &FirstOrderSystem,
    subspace: &MasterSubspace,
    table: &CoefficientTable,
    radius: f64,
    h: f64,
) -> Result<ResidualSample> {
    let half = vec![C64::new(h * radius, 0.0); subspace.dim() / 2];
    let p = conjugate_point(subspace, &half)?;
    let [a, b, c] = residual_terms(sys, table, &p)?;
    let scale = norm_inf(&a).max(norm_inf(&b)).max(norm_inf(&c));
    // backward error of each homological solve, ε‖A − Λ_m B‖ ‖W_m‖ |p^m|
    let (na, nb) = (csc_norm1(sys.a()), csc_norm1(sys.b()));
    let lambdas = subspace.lambdas();
    let solves: f64 = table
        .iter()
        .filter(|(m, _, _)| m.degree() >= 2)
        .map(|(m, w, _)| (na + m.weighted_sum(lambdas).norm() * nb) * norm_inf(w) * m.monomial(&p).norm())
        .sum();
    Ok(ResidualSample {
        h,
        residual: norm_inf(&(a - b - c)),
        floor: 64.0 * f64::EPSILON * (scale + solves),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// Samples that entered the fit.
    pub used: usize,
    pub samples: Vec<ResidualSample>,
}

/// Least-squares slope of `log residual` against `log h` over `n` log-spaced
/// points in `[h_lo, h_hi]`, keeping points at least `margin` times above
/// their roundoff floor.
pub fn residual_slope(
    sys: &FirstOrderSystem,
    subspace: &MasterSubspace,
    table: &CoefficientTable,
    (h_lo, h_hi): (f64, f64),
    n: usize,
    margin: f64,
) -> Result<SlopeFit> {
    if n < 2 || !(h_lo > 0.0 && h_hi > h_lo) {
        return Err(SsmError::InvalidInput("slope fit needs n >= 2 and 0 < h_lo < h_hi".into()));
    }
    let radius = chart_radius(table);
    let samples: Vec<ResidualSample> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            residual_sample(sys, subspace, table, radius, h_lo * (h_hi / h_lo).powf(t))
        })
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.residual > margin * s.floor)
        .map(|s| (s.h.ln(), s.residual.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(SsmError::Numerical("residual is at roundoff level over the whole amplitude range".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(SlopeFit {
        slope: sxy / sxx,
        used: pts.len(),
        samples,
    })
}
