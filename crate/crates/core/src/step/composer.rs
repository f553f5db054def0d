use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Result, SsmError};
use crate::linalg::{norm_inf, CVector, C64, I};
use crate::model::FirstOrderSystem;
use crate::multiindex::{CoefficientTable, MultiIndex};

use super::cache::{EvalStats, EvaluationCache, RealPart};
use super::{combine_cubic, combine_quadratic, cubic_terms, quadratic_terms, Combination, Parity};

/// Produces `[F∘W]_m` for every index of one degree, given all lower degrees.
pub trait Composer: Send {
    fn compose_degree(&mut self, indices: &[MultiIndex], table: &CoefficientTable) -> Result<Vec<CVector>>;

    fn stats(&self) -> EvalStats {
        EvalStats::default()
    }
}

#[derive(Clone, Debug)]
pub struct StepOptions {
    /// Skip evaluations whose input is exactly zero, and drop zero
    /// coefficients from combinations.
    pub skip_zero: bool,
    /// Inputs with `‖·‖∞` above this are scaled down by a power of two.
    pub autoscale_threshold: f64,
    pub parallel: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            skip_zero: true,
            autoscale_threshold: 1e3,
            parallel: true,
        }
    }
}

/// Non-intrusive composer driven by black-box evaluations of `F`.
pub struct StepComposer {
    sys: FirstOrderSystem,
    options: StepOptions,
    cache: EvaluationCache,
    stats: EvalStats,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Shape {
    Real,
    Imag,
    General,
}

struct Planned {
    combo: Combination,
    parity: Parity,
    coeff: f64,
}

struct Need {
    odd: bool,
    shape: Shape,
    u: CVector,
}

enum Input {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

impl StepComposer {
    pub fn new(sys: &FirstOrderSystem) -> Self {
        Self::with_options(sys, StepOptions::default())
    }

    pub fn with_options(sys: &FirstOrderSystem, options: StepOptions) -> Self {
        Self {
            sys: sys.clone(),
            options,
            cache: EvaluationCache::new(),
            stats: EvalStats::default(),
        }
    }

    pub fn cache(&self) -> &EvaluationCache {
        &self.cache
    }

    fn shape(&self, u: &CVector) -> Shape {
        if !self.options.skip_zero {
            return Shape::General;
        }
        if u.iter().all(|z| z.im == 0.0) {
            Shape::Real
        } else if u.iter().all(|z| z.re == 0.0) {
            Shape::Imag
        } else {
            Shape::General
        }
    }

    fn parts(&self, need: &Need) -> Vec<RealPart> {
        if !self.sys.real_only() {
            return vec![RealPart::Native];
        }
        match need.shape {
            Shape::Real => vec![RealPart::Re],
            Shape::Imag => vec![RealPart::Im],
            Shape::General if need.odd => vec![RealPart::Re, RealPart::Im, RealPart::Sum, RealPart::Diff],
            Shape::General => vec![RealPart::Re, RealPart::Im, RealPart::Sum],
        }
    }

    fn plan(&self, m: &MultiIndex, table: &CoefficientTable) -> Result<Vec<Planned>> {
        let mut out = Vec::new();
        for t in quadratic_terms(m).into_iter().chain(cubic_terms(m)) {
            let (mut combo, mut flipped) = Combination::new(t.combination);
            if self.options.skip_zero {
                let (c, f) = combo.without_zeros(table)?;
                combo = c;
                flipped ^= f;
                if combo.is_empty() {
                    continue;
                }
            }
            // F₃(-u) = -F₃(u); F₂ is unaffected by the sign
            let sign = if flipped && t.parity == Parity::Odd { -1.0 } else { 1.0 };
            out.push(Planned {
                combo,
                parity: t.parity,
                coeff: sign * t.coeff,
            });
        }
        Ok(out)
    }

    fn scale_for(&self, inf: f64) -> f64 {
        if inf > self.options.autoscale_threshold {
            let k = (inf / self.options.autoscale_threshold).log2().ceil();
            2f64.powi(-(k as i32))
        } else {
            1.0
        }
    }

    fn evaluate_missing(&mut self, missing: Vec<(Combination, RealPart, Input)>) -> Result<()> {
        if missing.is_empty() {
            return Ok(());
        }
        let n = self.sys.n_state();
        let mut scales = Vec::with_capacity(missing.len());
        let mut real_batch: Vec<Vec<f64>> = Vec::new();
        let mut complex_batch: Vec<Vec<C64>> = Vec::new();
        for (_, _, input) in &missing {
            match input {
                Input::Real(x) => {
                    let s = self.scale_for(x.iter().fold(0.0f64, |a, v| a.max(v.abs())));
                    real_batch.push(x.iter().map(|v| s * v).collect());
                    real_batch.push(x.iter().map(|v| -s * v).collect());
                    scales.push(s);
                }
                Input::Complex(z) => {
                    let s = self.scale_for(z.iter().fold(0.0f64, |a, v| a.max(v.norm())));
                    complex_batch.push(z.iter().map(|v| v * s).collect());
                    complex_batch.push(z.iter().map(|v| -v * s).collect());
                    scales.push(s);
                }
            }
        }
        self.stats.rescaled += scales.iter().filter(|s| **s != 1.0).count() as u64;
        self.stats.real_evaluations += real_batch.len() as u64;
        self.stats.complex_evaluations += complex_batch.len() as u64;

        let real_out = self.sys.eval_f_batch(&real_batch)?;
        let eval_c = |z: &Vec<C64>| -> Result<Vec<C64>> {
            self.sys
                .eval_f_complex(z)
                .unwrap_or_else(|| Err(SsmError::Unsupported("complex evaluation".into())))
        };
        let complex_out: Vec<Vec<C64>> = if self.options.parallel && !self.sys.nonlinearity().is_serial() {
            complex_batch.par_iter().map(eval_c).collect::<Result<_>>()?
        } else {
            complex_batch.iter().map(eval_c).collect::<Result<_>>()?
        };

        let (mut ri, mut ci) = (0, 0);
        for ((combo, part, input), s) in missing.into_iter().zip(scales) {
            let (plus, minus): (CVector, CVector) = match input {
                Input::Real(_) => {
                    let p = &real_out[ri];
                    let m = &real_out[ri + 1];
                    ri += 2;
                    (
                        CVector::from_iterator(n, p.iter().map(|v| C64::new(*v, 0.0))),
                        CVector::from_iterator(n, m.iter().map(|v| C64::new(*v, 0.0))),
                    )
                }
                Input::Complex(_) => {
                    let p = CVector::from_vec(complex_out[ci].clone());
                    let m = CVector::from_vec(complex_out[ci + 1].clone());
                    ci += 2;
                    (p, m)
                }
            };
            let even = (&plus + &minus) * C64::new(0.5 / (s * s), 0.0);
            let odd = (&plus - &minus) * C64::new(0.5 / (s * s * s), 0.0);
            self.cache.insert(combo, part, even, odd);
        }
        Ok(())
    }

    fn parity_values(&self, combo: &Combination, need: &Need) -> (CVector, Option<CVector>) {
        let get = |p: RealPart| self.cache.get(combo, p).expect("evaluated above");
        if !self.sys.real_only() {
            let (e, o) = get(RealPart::Native);
            return (e.clone(), need.odd.then(|| o.clone()));
        }
        match need.shape {
            Shape::Real => {
                let (e, o) = get(RealPart::Re);
                (e.clone(), need.odd.then(|| o.clone()))
            }
            Shape::Imag => {
                // (ib)² = -b², (ib)³ = -i b³
                let (e, o) = get(RealPart::Im);
                (-e, need.odd.then(|| o * (-I)))
            }
            Shape::General => {
                let (re_e, re_o) = get(RealPart::Re);
                let (im_e, im_o) = get(RealPart::Im);
                let (sum_e, sum_o) = get(RealPart::Sum);
                let even = combine_quadratic(re_e, im_e, sum_e);
                let odd = need.odd.then(|| {
                    let (_, diff_o) = get(RealPart::Diff);
                    combine_cubic(re_o, im_o, sum_o, diff_o)
                });
                (even, odd)
            }
        }
    }
}

fn real_part_vector(u: &CVector, part: RealPart) -> Vec<f64> {
    u.iter()
        .map(|z| match part {
            RealPart::Re => z.re,
            RealPart::Im => z.im,
            RealPart::Sum => z.re + z.im,
            RealPart::Diff => z.re - z.im,
            RealPart::Native => unreachable!(),
        })
        .collect()
}

impl Composer for StepComposer {
    fn compose_degree(&mut self, indices: &[MultiIndex], table: &CoefficientTable) -> Result<Vec<CVector>> {
        let plans: Vec<Vec<Planned>> = indices
            .iter()
            .map(|m| self.plan(m, table).map_err(|e| SsmError::at(m, e)))
            .collect::<Result<_>>()?;

        let mut needs: BTreeMap<Combination, Need> = BTreeMap::new();
        for p in plans.iter().flatten() {
            self.stats.parity_requests += 1;
            if let Some(need) = needs.get_mut(&p.combo) {
                need.odd |= p.parity == Parity::Odd;
                continue;
            }
            let u = p.combo.vector(table)?;
            let shape = self.shape(&u);
            needs.insert(
                p.combo.clone(),
                Need {
                    odd: p.parity == Parity::Odd,
                    shape,
                    u,
                },
            );
        }

        let mut missing = Vec::new();
        for (combo, need) in &needs {
            for part in self.parts(need) {
                if self.cache.contains(combo, part) {
                    self.stats.cache_hits += 1;
                    continue;
                }
                self.stats.cache_misses += 1;
                let input = match part {
                    RealPart::Native => Input::Complex(need.u.iter().copied().collect()),
                    p => Input::Real(real_part_vector(&need.u, p)),
                };
                missing.push((combo.clone(), part, input));
            }
        }
        self.evaluate_missing(missing)?;

        let values: BTreeMap<&Combination, (CVector, Option<CVector>)> =
            needs.iter().map(|(c, need)| (c, self.parity_values(c, need))).collect();

        let n = table.n_state();
        let assemble = |plan: &Vec<Planned>| {
            let mut out = CVector::zeros(n);
            for p in plan {
                let (even, odd) = &values[&p.combo];
                let v = match p.parity {
                    Parity::Even => even,
                    Parity::Odd => odd.as_ref().expect("odd part requested"),
                };
                out.axpy(C64::new(p.coeff, 0.0), v, C64::new(1.0, 0.0));
            }
            out
        };
        let out: Vec<CVector> = if self.options.parallel {
            plans.par_iter().map(assemble).collect()
        } else {
            plans.iter().map(assemble).collect()
        };
        debug_assert!(out.iter().all(|v| norm_inf(v).is_finite()));
        Ok(out)
    }

    fn stats(&self) -> EvalStats {
        self.stats.clone()
    }
}
