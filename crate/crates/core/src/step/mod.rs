//! Non-intrusive evaluation of the composition `[F∘W]_m`.
//!
//! The nonlinearity is only ever evaluated, never expanded. Quadratic and cubic
//! parts are separated by parity, `F₂(z) = (F(z) + F(-z))/2` and
//! `F₃(z) = (F(z) - F(-z))/2`, and the degree-`m` coefficient of `F(W(p))` is
//! assembled from evaluations at sums and differences of stored coefficients.
//! When the black box only accepts real inputs, every complex evaluation is
//! rebuilt from evaluations at real and imaginary parts.

mod cache;
mod composer;
mod intrusive;

use std::fmt;

use crate::error::{Result, SsmError};
use crate::linalg::{CVector, C64, I};
use crate::multiindex::{pairs_summing_to, triples_summing_to, CoefficientTable, MultiIndex, TripleKind};

pub use cache::{EvalStats, EvaluationCache, RealPart};
pub use composer::{Composer, StepComposer, StepOptions};
pub use intrusive::TensorComposer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    /// Quadratic part `F₂`.
    Even,
    /// Cubic part `F₃`.
    Odd,
}

/// Signed sum `Σ s_i W_{m_i}` of stored coefficients, used as a cache key.
///
/// Entries are sorted and the leading sign is positive; [`Combination::new`]
/// reports whether the overall sign was flipped to get there.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Combination {
    terms: Vec<(MultiIndex, i8)>,
}

impl Combination {
    pub fn new(mut terms: Vec<(MultiIndex, i8)>) -> (Self, bool) {
        terms.sort();
        let flipped = terms.first().is_some_and(|(_, s)| *s < 0);
        if flipped {
            terms.iter_mut().for_each(|(_, s)| *s = -*s);
        }
        (Self { terms }, flipped)
    }

    pub fn single(m: MultiIndex) -> Self {
        Self { terms: vec![(m, 1)] }
    }

    pub fn terms(&self) -> &[(MultiIndex, i8)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn vector(&self, table: &CoefficientTable) -> Result<CVector> {
        let mut out = CVector::zeros(table.n_state());
        for (m, s) in &self.terms {
            let w = table
                .w(m)
                .ok_or_else(|| SsmError::MissingCoefficient { index: m.clone() })?;
            out.axpy(C64::new(*s as f64, 0.0), w, C64::new(1.0, 0.0));
        }
        Ok(out)
    }

    /// Drop entries whose coefficient is exactly zero.
    pub fn without_zeros(&self, table: &CoefficientTable) -> Result<(Self, bool)> {
        let mut kept = Vec::with_capacity(self.terms.len());
        for (m, s) in &self.terms {
            let w = table
                .w(m)
                .ok_or_else(|| SsmError::MissingCoefficient { index: m.clone() })?;
            if w.iter().any(|z| *z != C64::new(0.0, 0.0)) {
                kept.push((m.clone(), *s));
            }
        }
        Ok(Combination::new(kept))
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (m, s)) in self.terms.iter().enumerate() {
            let sign = if *s < 0 { "-" } else if k > 0 { "+" } else { "" };
            write!(f, "{sign}W{m}")?;
        }
        Ok(())
    }
}

/// One evaluation `coeff · F_parity(Σ s_i W_{m_i})` contributing to `[F∘W]_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub parity: Parity,
    pub combination: Vec<(MultiIndex, i8)>,
    pub coeff: f64,
}

fn term(parity: Parity, combination: Vec<(MultiIndex, i8)>, coeff: f64) -> Term {
    Term {
        parity,
        combination,
        coeff,
    }
}

/// Evaluations whose weighted sum is `[F₂∘W]_m`.
pub fn quadratic_terms(m: &MultiIndex) -> Vec<Term> {
    let mut out = Vec::new();
    if m.degree() < 2 {
        return out;
    }
    for (m1, m2) in pairs_summing_to(m, 1) {
        if m1 == m2 {
            out.push(term(Parity::Even, vec![(m1, 1)], 1.0));
        } else {
            // ½(F₂(v₁+v₂) − F₂(v₁−v₂))
            out.push(term(Parity::Even, vec![(m1.clone(), 1), (m2.clone(), 1)], 0.5));
            out.push(term(Parity::Even, vec![(m1, 1), (m2, -1)], -0.5));
        }
    }
    out
}

/// Evaluations whose weighted sum is `[F₃∘W]_m`.
pub fn cubic_terms(m: &MultiIndex) -> Vec<Term> {
    let mut out = Vec::new();
    if m.degree() < 3 {
        return out;
    }
    for t in triples_summing_to(m, 1) {
        let [a, b, c] = t.parts;
        match t.kind {
            TripleKind::AllEqual => out.push(term(Parity::Odd, vec![(a, 1)], 1.0)),
            TripleKind::TwoEqual => {
                // v₁ = a = b repeated, v₂ = c:
                // (F₃(v₁+v₂) − F₃(v₁−v₂) − 2F₃(v₂))/2
                let _ = b;
                out.push(term(Parity::Odd, vec![(a.clone(), 1), (c.clone(), 1)], 0.5));
                out.push(term(Parity::Odd, vec![(a, 1), (c.clone(), -1)], -0.5));
                out.push(term(Parity::Odd, vec![(c, 1)], -1.0));
            }
            TripleKind::AllDistinct => {
                out.push(term(Parity::Odd, vec![(a.clone(), 1), (b.clone(), 1), (c.clone(), 1)], 1.0));
                out.push(term(Parity::Odd, vec![(a.clone(), 1), (b.clone(), 1)], -1.0));
                out.push(term(Parity::Odd, vec![(a.clone(), 1), (c.clone(), 1)], -1.0));
                out.push(term(Parity::Odd, vec![(b.clone(), 1), (c.clone(), 1)], -1.0));
                out.push(term(Parity::Odd, vec![(a, 1)], 1.0));
                out.push(term(Parity::Odd, vec![(b, 1)], 1.0));
                out.push(term(Parity::Odd, vec![(c, 1)], 1.0));
            }
        }
    }
    out
}

fn wrap_eval(err: SsmError, z: &[f64]) -> SsmError {
    match err {
        e @ SsmError::Evaluation { .. } => e,
        e => SsmError::Evaluation {
            message: e.to_string(),
            input: z.to_vec(),
        },
    }
}

/// `(F₂(z), F₃(z))` from the two evaluations `F(z)` and `F(-z)`.
pub fn split_parts<F>(mut f: F, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let plus = f(z).map_err(|e| wrap_eval(e, z))?;
    let neg: Vec<f64> = z.iter().map(|v| -v).collect();
    let minus = f(&neg).map_err(|e| wrap_eval(e, &neg))?;
    let even = plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a + b)).collect();
    let odd = plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a - b)).collect();
    Ok((even, odd))
}

pub fn split_even<F>(f: F, z: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    split_parts(f, z).map(|(e, _)| e)
}

pub fn split_odd<F>(f: F, z: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    split_parts(f, z).map(|(_, o)| o)
}

/// `F₂(v) = i F₂(v_a + v_b) + (1 − i) F₂(v_a) − (1 + i) F₂(v_b)`.
pub fn combine_quadratic(re: &CVector, im: &CVector, sum: &CVector) -> CVector {
    sum * I + re * C64::new(1.0, -1.0) - im * C64::new(1.0, 1.0)
}

/// `F₃(v) = 2F₃(v_a) + ((−1+i)/2) F₃(v_a+v_b) − ((1+i)/2) F₃(v_a−v_b) − 2i F₃(v_b)`.
pub fn combine_cubic(re: &CVector, im: &CVector, sum: &CVector, diff: &CVector) -> CVector {
    re * C64::new(2.0, 0.0) + sum * C64::new(-0.5, 0.5) - diff * C64::new(0.5, 0.5) - im * C64::new(0.0, 2.0)
}

fn real_parts(v: &CVector) -> [Vec<f64>; 4] {
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    let sum = re.iter().zip(&im).map(|(a, b)| a + b).collect();
    let diff = re.iter().zip(&im).map(|(a, b)| a - b).collect();
    [re, im, sum, diff]
}

fn lift(v: Vec<f64>) -> CVector {
    CVector::from_iterator(v.len(), v.into_iter().map(|x| C64::new(x, 0.0)))
}

/// Quadratic part at a complex input from three real evaluations of `f2`.
pub fn eval_complex_quadratic<F>(mut f2: F, v: &CVector) -> Result<CVector>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let [re, im, sum, _] = real_parts(v);
    let fs = lift(f2(&sum)?);
    let fa = lift(f2(&re)?);
    let fb = lift(f2(&im)?);
    Ok(combine_quadratic(&fa, &fb, &fs))
}

/// Cubic part at a complex input from four real evaluations of `f3`.
pub fn eval_complex_cubic<F>(mut f3: F, v: &CVector) -> Result<CVector>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let [re, im, sum, diff] = real_parts(v);
    let fa = lift(f3(&re)?);
    let fs = lift(f3(&sum)?);
    let fd = lift(f3(&diff)?);
    let fb = lift(f3(&im)?);
    Ok(combine_cubic(&fa, &fb, &fs, &fd))
}

fn assemble<F>(terms: &[Term], table: &CoefficientTable, mut eval: F) -> Result<CVector>
where
    F: FnMut(&CVector) -> Result<CVector>,
{
    let mut out = CVector::zeros(table.n_state());
    for t in terms {
        // the closure receives the literal signed sum, so no sign bookkeeping here
        let u = Combination {
            terms: t.combination.clone(),
        }
        .vector(table)?;
        out.axpy(C64::new(t.coeff, 0.0), &eval(&u)?, C64::new(1.0, 0.0));
    }
    Ok(out)
}

/// `[F₂∘W]_m` with a caller-supplied quadratic evaluator (complex input).
pub fn compose_quadratic_at<F>(m: &MultiIndex, table: &CoefficientTable, f2: F) -> Result<CVector>
where
    F: FnMut(&CVector) -> Result<CVector>,
{
    assemble(&quadratic_terms(m), table, f2)
}

/// `[F₃∘W]_m` with a caller-supplied cubic evaluator (complex input).
pub fn compose_cubic_at<F>(m: &MultiIndex, table: &CoefficientTable, f3: F) -> Result<CVector>
where
    F: FnMut(&CVector) -> Result<CVector>,
{
    assemble(&cubic_terms(m), table, f3)
}
