use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::linalg::{csc_mul, CVector, C64, I};
use crate::model::FirstOrderSystem;
use crate::multiindex::CoefficientTable;
use crate::spectral::MasterSubspace;

use super::HomologicalOperator;

/// Leading-order forced correction at one forcing frequency:
/// `X₀(φ) = x₀e^{iφ} + x̄₀e^{−iφ}`, `S₀(φ) = s₀⁺e^{iφ} + s₀⁻e^{−iφ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonAutonomousCoeffs {
    pub omega: f64,
    pub x0: CVector,
    pub x0_bar: CVector,
    pub s0_plus: CVector,
    pub s0_minus: CVector,
}

#[derive(Clone, Debug)]
pub struct NonAutonomousOptions {
    /// Tolerance on `|λ_i ∓ iΩ| / |λ_i|`.
    pub rho_rel: f64,
    /// Explicit resonant set for the `e^{iφ}` balance; the `e^{−iφ}` set is
    /// its conjugate image. When absent, sets are detected from `rho_rel`.
    pub resonant_plus: Option<Vec<usize>>,
}

impl Default for NonAutonomousOptions {
    fn default() -> Self {
        Self {
            rho_rel: 0.05,
            resonant_plus: None,
        }
    }
}

fn detect(lambdas: &[C64], target: C64, rho: f64) -> Vec<usize> {
    (0..lambdas.len())
        .filter(|&i| (lambdas[i] - target).norm() <= rho * lambdas[i].norm())
        .collect()
}

fn solve_side(
    sys: &FirstOrderSystem,
    subspace: &MasterSubspace,
    shift: C64,
    forcing: &CVector,
    modes: &[usize],
) -> Result<(CVector, CVector)> {
    let op = HomologicalOperator::new(sys, subspace, shift, modes).map_err(|e| match e {
        SsmError::ToleranceTooTight { .. } => SsmError::Factorization {
            context: format!("A - iΩB at iΩ = {shift}"),
            hint: "an eigenvalue lies on the forcing frequency; increase the resonance tolerance".into(),
        },
        e => e,
    })?;
    let mut s = CVector::zeros(subspace.dim());
    let mut rhs = -forcing;
    for &i in modes {
        s[i] = subspace.w(i).dotc(forcing);
        rhs.axpy(s[i], &csc_mul(sys.b(), &subspace.v(i)), C64::new(1.0, 0.0));
    }
    Ok((op.solve(&rhs), s))
}

/// Solve `(A − iΩB)x₀ = B W_I s₀⁺ − Fᵃ` and `(A + iΩB)x̄₀ = B W_I s₀⁻ − conj(Fᵃ)`.
pub fn solve_leading_nonautonomous(
    sys: &FirstOrderSystem,
    subspace: &MasterSubspace,
    omega: f64,
    fa: &CVector,
    options: &NonAutonomousOptions,
) -> Result<NonAutonomousCoeffs> {
    if !(omega > 0.0) {
        return Err(SsmError::InvalidInput(format!("forcing frequency must be positive, got {omega}")));
    }
    if fa.len() != sys.n_state() {
        return Err(SsmError::InvalidInput("forcing amplitude has wrong length".into()));
    }
    let lambdas = subspace.lambdas();
    let shift = I * omega;
    let (plus, minus) = match &options.resonant_plus {
        Some(set) => {
            let minus = match subspace.conjugate_map() {
                Some(map) => set.iter().map(|&i| map[i]).collect(),
                None => detect(lambdas, -shift, options.rho_rel),
            };
            (set.clone(), minus)
        }
        None => (
            detect(lambdas, shift, options.rho_rel),
            detect(lambdas, -shift, options.rho_rel),
        ),
    };
    let (x0, s0_plus) = solve_side(sys, subspace, shift, fa, &plus)?;
    let fa_conj = fa.map(|z| z.conj());
    let (x0_bar, s0_minus) = solve_side(sys, subspace, -shift, &fa_conj, &minus)?;
    Ok(NonAutonomousCoeffs {
        omega,
        x0,
        x0_bar,
        s0_plus,
        s0_minus,
    })
}

/// Residuals of both harmonic balances relative to `‖Fᵃ‖`.
pub fn leading_order_residual(
    sys: &FirstOrderSystem,
    subspace: &MasterSubspace,
    fa: &CVector,
    c: &NonAutonomousCoeffs,
) -> f64 {
    let side = |shift: C64, x: &CVector, s: &CVector, f: &CVector| {
        let bws = csc_mul(sys.b(), &(subspace.right() * s));
        let lhs = csc_mul(sys.a(), x) - csc_mul(sys.b(), x) * shift;
        (lhs - bws + f).norm()
    };
    let scale = fa.norm().max(f64::MIN_POSITIVE);
    let r1 = side(I * c.omega, &c.x0, &c.s0_plus, fa);
    let r2 = side(-I * c.omega, &c.x0_bar, &c.s0_minus, &fa.map(|z| z.conj()));
    r1.max(r2) / scale
}

/// `W(p)` (time-invariant), plus `ε(x₀e^{iφ} + x̄₀e^{−iφ})` when `forced` is given.
pub fn evaluate_tv_state(
    table: &CoefficientTable,
    forced: Option<&NonAutonomousCoeffs>,
    p: &[C64],
    phi: f64,
    epsilon: f64,
) -> CVector {
    let mut z = table.eval_w(p);
    if let Some(c) = forced {
        let e = C64::from_polar(1.0, phi);
        z += (&c.x0 * e + &c.x0_bar * e.conj()) * C64::new(epsilon, 0.0);
    }
    z
}

/// Per-Ω memo of leading-order solves, keyed by the bit pattern of Ω.
#[derive(Default)]
pub struct NonAutonomousCache {
    map: Mutex<BTreeMap<u64, NonAutonomousCoeffs>>,
}

impl NonAutonomousCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_solve(
        &self,
        sys: &FirstOrderSystem,
        subspace: &MasterSubspace,
        omega: f64,
        fa: &CVector,
        options: &NonAutonomousOptions,
    ) -> Result<NonAutonomousCoeffs> {
        if let Some(c) = self.map.lock().expect("cache lock").get(&omega.to_bits()) {
            return Ok(c.clone());
        }
        let c = solve_leading_nonautonomous(sys, subspace, omega, fa, options)?;
        self.map.lock().expect("cache lock").insert(omega.to_bits(), c.clone());
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<NonAutonomousCoeffs> {
        self.map.lock().expect("cache lock").values().cloned().collect()
    }
}
