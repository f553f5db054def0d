//! Order-by-order solution of the invariance equation
//! `B DW(p) R(p) = A W(p) + F(W(p))` in normal-form style, plus the
//! leading-order forced correction.

mod nonautonomous;
mod residual;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::linalg::{
    csc_mul, csc_mul_transpose, shifted_pencil, CMatrix, CVector, ComplexLu, C64, HOMOLOGICAL_PIVOT_RATIO,
};
use crate::model::FirstOrderSystem;
use crate::multiindex::{enumerate_degree, CoefficientTable, MultiIndex};
use crate::spectral::MasterSubspace;
use crate::step::{Composer, EvalStats, StepComposer, StepOptions};

pub use residual::{
    chart_radius, invariance_residual_nonlinear, residual_sample, residual_slope, ResidualSample, SlopeFit,
};
pub use nonautonomous::{
    evaluate_tv_state, leading_order_residual, solve_leading_nonautonomous, NonAutonomousCache, NonAutonomousCoeffs,
    NonAutonomousOptions,
};

/// Parameterization style; only the normal form is supported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterizationStyle {
    NormalForm,
}

#[derive(Clone, Debug)]
pub struct SsmOptions {
    pub style: ParameterizationStyle,
    /// Near-resonance tolerance on `|Λ_m − λ_i| / |λ_i|`.
    pub rho_rel: f64,
    /// Also flag odd-degree inner resonances by imaginary parts alone.
    pub structural_rule: bool,
    /// Fill `W_{m̄}` as `conj(W_m)` when the subspace is closed under conjugation.
    pub conjugate_symmetry: bool,
    pub parallel: bool,
    pub step: StepOptions,
}

impl Default for SsmOptions {
    fn default() -> Self {
        Self {
            style: ParameterizationStyle::NormalForm,
            rho_rel: 0.05,
            structural_rule: true,
            conjugate_symmetry: true,
            parallel: true,
            step: StepOptions::default(),
        }
    }
}

impl SsmOptions {
    fn validate(&self) -> Result<()> {
        if !(self.rho_rel > 0.0) {
            return Err(SsmError::Config {
                field: "rho_rel".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRecord {
    pub index: MultiIndex,
    pub modes: Vec<usize>,
    pub lambda_m: C64,
}

#[derive(Clone, Debug)]
pub struct SsmResult {
    pub table: CoefficientTable,
    pub resonances: Vec<ResonanceRecord>,
    pub stats: EvalStats,
    /// Distinct homological operators factorized.
    pub factorizations: usize,
}

/// The homological system for one multi-index, before solving.
#[derive(Clone, Debug)]
pub struct HomologicalSystem {
    pub m: MultiIndex,
    pub lambda_m: C64,
    /// `C_m − [F∘W]_m`.
    pub rhs: CVector,
    pub resonant_modes: Vec<usize>,
}

/// Mixed term `C_m = B Σ_j Σ W_u u_j R^j_k` over `u + k − e_j = m`, `1 < |u| < |m|`.
pub fn compute_cm(m: &MultiIndex, table: &CoefficientTable, b: &nalgebra_sparse::CscMatrix<f64>) -> Result<CVector> {
    let deg = m.degree();
    let mut acc = CVector::zeros(table.n_state());
    if deg < 3 {
        return Ok(acc);
    }
    for kdeg in 2..deg {
        let Some(block) = table.degree(kdeg) else {
            return Err(SsmError::MissingCoefficient {
                index: MultiIndex::zero(table.m_dim()),
            });
        };
        for (k, _, r) in block.iter() {
            for j in 0..table.m_dim() {
                let rj = r[j];
                if rj == C64::new(0.0, 0.0) {
                    continue;
                }
                let Some(u) = m.with_increment(j, 1).and_then(|mj| mj.checked_sub(k)) else {
                    continue;
                };
                if u.degree() <= 1 || u.get(j) == 0 {
                    continue;
                }
                let wu = table
                    .w(&u)
                    .ok_or_else(|| SsmError::MissingCoefficient { index: u.clone() })?;
                acc.axpy(rj * u.get(j) as f64, wu, C64::new(1.0, 0.0));
            }
        }
    }
    Ok(csc_mul(b, &acc))
}

/// Modes `i` with `|Λ_m − λ_i| ≤ ρ|λ_i|`, plus the odd-degree structural rule.
pub fn detect_resonances(m: &MultiIndex, lambdas: &[C64], rho_rel: f64, structural: bool) -> Vec<usize> {
    let lm = m.weighted_sum(lambdas);
    (0..lambdas.len())
        .filter(|&i| {
            let l = lambdas[i];
            (lm - l).norm() <= rho_rel * l.norm()
                || (structural && m.degree() % 2 == 1 && l.im != 0.0 && (lm.im - l.im).abs() <= rho_rel * l.im.abs())
        })
        .collect()
}

fn round_key(z: C64) -> String {
    format!("{:.11e},{:.11e}", z.re, z.im)
}

/// Factorized homological operator, optionally bordered by resonant modes.
pub struct HomologicalOperator {
    lu: ComplexLu,
    n: usize,
    modes: Vec<usize>,
}

impl HomologicalOperator {
    pub fn new(sys: &FirstOrderSystem, subspace: &MasterSubspace, lambda_m: C64, modes: &[usize]) -> Result<Self> {
        let n = sys.n_state();
        let l = shifted_pencil(sys.a(), sys.b(), lambda_m);
        let r = modes.len();
        let mut mat = CMatrix::zeros(n + r, n + r);
        mat.view_mut((0, 0), (n, n)).copy_from(&l);
        for (c, &i) in modes.iter().enumerate() {
            let bv = csc_mul(sys.b(), &subspace.v(i));
            // row w_i* B = (Bᵀ conj(w_i))ᵀ
            let wb = csc_mul_transpose(sys.b(), &subspace.w(i).map(|z| z.conj()));
            for k in 0..n {
                mat[(k, n + c)] = bv[k];
                mat[(n + c, k)] = wb[k];
            }
        }
        let context = format!("A - ΛB at Λ = {lambda_m}");
        let lu = ComplexLu::with_threshold(mat, &context, HOMOLOGICAL_PIVOT_RATIO).map_err(|e| match (modes.is_empty(), e) {
            (true, SsmError::Factorization { .. }) => SsmError::ToleranceTooTight {
                index: MultiIndex::zero(subspace.dim()),
                tolerance: f64::NAN,
            },
            (false, SsmError::Factorization { context, hint }) => {
                SsmError::Defective(format!("bordered system for {context} is singular ({hint})"))
            }
            (_, e) => e,
        })?;
        Ok(Self {
            lu,
            n,
            modes: modes.to_vec(),
        })
    }

    /// Solve `L W = rhs` subject to `w_i* B W = 0` for bordered modes.
    pub fn solve(&self, rhs: &CVector) -> CVector {
        let mut ext = CVector::zeros(self.n + self.modes.len());
        ext.rows_mut(0, self.n).copy_from(rhs);
        self.lu.solve(&ext).rows(0, self.n).into_owned()
    }
}

/// Solve one homological system; returns `(W_m, R_m)`.
pub fn solve_homological(
    sys: &FirstOrderSystem,
    subspace: &MasterSubspace,
    system: &HomologicalSystem,
    op: &HomologicalOperator,
) -> (CVector, CVector) {
    let mdim = subspace.dim();
    let mut r = CVector::zeros(mdim);
    let mut rhs = system.rhs.clone();
    for &i in &system.resonant_modes {
        r[i] = -subspace.w(i).dotc(&system.rhs);
        let bv = csc_mul(sys.b(), &subspace.v(i));
        rhs.axpy(r[i], &bv, C64::new(1.0, 0.0));
    }
    (op.solve(&rhs), r)
}

pub fn compute_ssm(
    sys: &FirstOrderSystem,
    subspace: &MasterSubspace,
    max_order: u32,
    options: &SsmOptions,
) -> Result<SsmResult> {
    let mut composer = StepComposer::with_options(sys, options.step.clone());
    compute_ssm_with(sys, subspace, max_order, options, &mut composer)
}

/// [`compute_ssm`] with a caller-provided composer (e.g. the intrusive one).
pub fn compute_ssm_with(
    sys: &FirstOrderSystem,
    subspace: &MasterSubspace,
    max_order: u32,
    options: &SsmOptions,
    composer: &mut dyn Composer,
) -> Result<SsmResult> {
    options.validate()?;
    if max_order < 1 {
        return Err(SsmError::InvalidInput("max_order must be >= 1".into()));
    }
    if subspace.n_state() != sys.n_state() {
        return Err(SsmError::InvalidInput("subspace and system dimensions differ".into()));
    }
    let mdim = subspace.dim();
    let lambdas = subspace.lambdas();
    let mut table = CoefficientTable::new(mdim, sys.n_state());
    for i in 0..mdim {
        let mut r = CVector::zeros(mdim);
        r[i] = lambdas[i];
        table.insert(MultiIndex::unit(mdim, i), subspace.v(i), r);
    }
    let conj_map: Option<Arc<[usize]>> = if options.conjugate_symmetry {
        subspace.conjugate_map().map(Arc::from)
    } else {
        None
    };

    let mut resonances = Vec::new();
    let mut factorizations = 0;
    for k in 2..=max_order {
        let indices = enumerate_degree(mdim, k)?;
        // indices whose conjugate comes earlier in the ordering are mirrored
        let (primary, mirrored): (Vec<MultiIndex>, Vec<MultiIndex>) = match &conj_map {
            Some(map) => indices.iter().cloned().partition(|m| *m <= m.conjugate(map)),
            None => (indices.clone(), Vec::new()),
        };

        let composed = composer.compose_degree(&primary, &table)?;
        let systems: Vec<HomologicalSystem> = primary
            .iter()
            .zip(composed)
            .map(|(m, fw)| {
                let cm = compute_cm(m, &table, sys.b()).map_err(|e| SsmError::at(m, e))?;
                Ok(HomologicalSystem {
                    m: m.clone(),
                    lambda_m: m.weighted_sum(lambdas),
                    rhs: cm - fw,
                    resonant_modes: detect_resonances(m, lambdas, options.rho_rel, options.structural_rule),
                })
            })
            .collect::<Result<_>>()?;

        let mut keys: BTreeMap<(String, Vec<usize>), (C64, Vec<usize>)> = BTreeMap::new();
        for s in &systems {
            keys.entry((round_key(s.lambda_m), s.resonant_modes.clone()))
                .or_insert((s.lambda_m, s.resonant_modes.clone()));
        }
        let key_list: Vec<_> = keys.into_iter().collect();
        let factor = |(_, (lm, modes)): &((String, Vec<usize>), (C64, Vec<usize>))| {
            HomologicalOperator::new(sys, subspace, *lm, modes)
        };
        let ops: Vec<Result<HomologicalOperator>> = if options.parallel {
            key_list.par_iter().map(factor).collect()
        } else {
            key_list.iter().map(factor).collect()
        };
        factorizations += ops.len();
        let mut op_map = BTreeMap::new();
        for ((key, _), op) in key_list.into_iter().zip(ops) {
            op_map.insert(key, op);
        }

        let solve = |s: &HomologicalSystem| -> Result<(CVector, CVector)> {
            let key = (round_key(s.lambda_m), s.resonant_modes.clone());
            match &op_map[&key] {
                Ok(op) => Ok(solve_homological(sys, subspace, s, op)),
                Err(SsmError::ToleranceTooTight { .. }) => Err(SsmError::ToleranceTooTight {
                    index: s.m.clone(),
                    tolerance: options.rho_rel,
                }),
                Err(e) => Err(SsmError::at(&s.m, SsmError::Defective(e.to_string()))),
            }
        };
        let solved: Vec<Result<(CVector, CVector)>> = if options.parallel {
            systems.par_iter().map(solve).collect()
        } else {
            systems.iter().map(solve).collect()
        };
        for (s, res) in systems.iter().zip(solved) {
            let (w, r) = res?;
            if !s.resonant_modes.is_empty() {
                resonances.push(ResonanceRecord {
                    index: s.m.clone(),
                    modes: s.resonant_modes.clone(),
                    lambda_m: s.lambda_m,
                });
            }
            table.insert(s.m.clone(), w, r);
        }
        if let Some(map) = &conj_map {
            for m in mirrored {
                let mb = m.conjugate(map);
                let w = table.w(&mb).expect("primary solved").map(|z| z.conj());
                let rb = table.r(&mb).expect("primary solved");
                let r = CVector::from_fn(mdim, |i, _| rb[map[i]].conj());
                let modes = detect_resonances(&m, lambdas, options.rho_rel, options.structural_rule);
                if !modes.is_empty() {
                    resonances.push(ResonanceRecord {
                        index: m.clone(),
                        modes,
                        lambda_m: m.weighted_sum(lambdas),
                    });
                }
                table.insert(m, w, r);
            }
        }
        log::debug!("degree {k}: {} indices, {} factorizations so far", indices.len(), factorizations);
    }
    resonances.sort_by(|a, b| a.index.cmp(&b.index));
    Ok(SsmResult {
        table,
        resonances,
        stats: composer.stats(),
        factorizations,
    })
}

/// Reduced point `p` with `p_{map(i)} = conj(p_i)`, built from the entries of
/// the modes with positive imaginary part.
pub fn conjugate_point(subspace: &MasterSubspace, half: &[C64]) -> Result<Vec<C64>> {
    let map = subspace
        .conjugate_map()
        .ok_or_else(|| SsmError::Unsupported("subspace is not closed under conjugation".into()))?;
    let mut p = vec![C64::new(0.0, 0.0); subspace.dim()];
    let mut next = half.iter();
    for i in 0..subspace.dim() {
        if map[i] >= i {
            let v = *next
                .next()
                .ok_or_else(|| SsmError::InvalidInput("too few reduced coordinates".into()))?;
            p[i] = v;
            p[map[i]] = if map[i] == i { C64::new(v.re, 0.0) } else { v.conj() };
        }
    }
    Ok(p)
}

/// `B DW(p) R(p) − A W(p) − F(W(p))`.
pub fn invariance_residual(sys: &FirstOrderSystem, table: &CoefficientTable, p: &[C64]) -> Result<CVector> {
    let w = table.eval_w(p);
    let r = table.eval_r(p);
    let dwr = table.eval_dw(p, r.as_slice());
    let f = eval_f_at(sys, &w)?;
    Ok(csc_mul(sys.b(), &dwr) - csc_mul(sys.a(), &w) - f)
}

/// `F(z)` for a possibly complex state; real-only systems are evaluated at
/// `Re z`, which is exact for states produced from conjugate points.
pub fn eval_f_at(sys: &FirstOrderSystem, z: &CVector) -> Result<CVector> {
    if !sys.real_only() {
        if let Some(f) = sys.eval_f_complex(z.as_slice()) {
            return Ok(CVector::from_vec(f?));
        }
    }
    let re: Vec<f64> = z.iter().map(|v| v.re).collect();
    let f = sys.eval_f(&re)?;
    Ok(CVector::from_iterator(f.len(), f.into_iter().map(|v| C64::new(v, 0.0))))
}
