//! Reduced-order analysis on a computed SSM: backbone curves, forced
//! response curves with stability and bifurcation detection, and time
//! integration of the reduced and full models.

mod continuation;
mod frame;
mod integrate;
mod lift;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SsmError};
use crate::linalg::{csc_mul, csc_to_dense, CVector, C64};
use crate::model::{FirstOrderSystem, SecondOrderModel};
use crate::multiindex::CoefficientTable;
use crate::spectral::MasterSubspace;
use crate::ssm::{evaluate_tv_state, NonAutonomousCache, NonAutonomousOptions};

pub use continuation::{
    continue_branch, verify_bifurcation, Bifurcation, BifurcationCheck, BifurcationKind, Branch, BranchPoint,
    ContinuationOptions,
};
pub use frame::ReducedSystem;
pub use integrate::{dopri45, IntegrateOptions};
pub use lift::{backbone_curve, lift_amplitude, BackbonePoint};

/// Everything an FRC needs besides continuation settings.
pub struct FrcProblem<'a> {
    pub system: &'a FirstOrderSystem,
    pub subspace: &'a MasterSubspace,
    pub table: &'a CoefficientTable,
    /// Lifted forcing amplitude `Fᵃ`.
    pub forcing: &'a CVector,
    pub epsilon: f64,
    /// Positive-frequency pair the forcing is tuned to.
    pub forced_pair: usize,
    /// State index whose amplitude is reported.
    pub output: usize,
    pub samples: usize,
    pub rho_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrcRow {
    pub omega: f64,
    /// Amplitude from `W(p)` alone.
    pub amp_ti: f64,
    /// Amplitude including the forced correction `ε X₀`.
    pub amp_tv: f64,
    pub stable: bool,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FrcResult {
    pub rows: Vec<FrcRow>,
    pub bifurcations: Vec<Bifurcation>,
    pub reduced: ReducedSystem,
}

impl FrcResult {
    /// Refined maximum of the amplitude along the branch, `(Ω, amplitude)`,
    /// from a quadratic fit in chord length around the largest sample.
    pub fn peak(&self, time_varying: bool) -> (f64, f64) {
        let amp = |r: &FrcRow| if time_varying { r.amp_tv } else { r.amp_ti };
        let Some((i, _)) = self.rows.iter().enumerate().max_by(|a, b| amp(a.1).total_cmp(&amp(b.1))) else {
            return (f64::NAN, f64::NAN);
        };
        if i == 0 || i + 1 == self.rows.len() {
            return (self.rows[i].omega, amp(&self.rows[i]));
        }
        let r = &self.rows[i - 1..=i + 1];
        let d = |a: &FrcRow, b: &FrcRow| (a.omega - b.omega).hypot(amp(a) - amp(b));
        let s = [-d(&r[0], &r[1]), 0.0, d(&r[1], &r[2])];
        let fit = |v: [f64; 3]| {
            // Lagrange quadratic through (s_k, v_k) as (c0, c1, c2)
            let (s0, s2) = (s[0], s[2]);
            let c2 = ((v[2] - v[1]) / s2 - (v[0] - v[1]) / s0) / (s2 - s0);
            let c1 = (v[2] - v[1]) / s2 - c2 * s2;
            (v[1], c1, c2)
        };
        let (a0, a1, a2) = fit([amp(&r[0]), amp(&r[1]), amp(&r[2])]);
        let (o0, o1, o2) = fit([r[0].omega, r[1].omega, r[2].omega]);
        if a2 >= 0.0 {
            return (r[1].omega, a0);
        }
        let sm = (-a1 / (2.0 * a2)).clamp(s[0], s[2]);
        (o0 + o1 * sm + o2 * sm * sm, a0 + a1 * sm + a2 * sm * sm)
    }
}

/// Reduced system with its forcing set from the leading forced solve.
pub fn forced_reduced_system(problem: &FrcProblem, omega: f64) -> Result<(ReducedSystem, NonAutonomousOptions)> {
    let mut reduced = ReducedSystem::new(problem.subspace, problem.table, problem.forced_pair)?;
    let na = NonAutonomousOptions {
        rho_rel: problem.rho_rel,
        resonant_plus: Some(reduced.resonant_plus()),
    };
    let c = crate::ssm::solve_leading_nonautonomous(problem.system, problem.subspace, omega, problem.forcing, &na)?;
    reduced.set_forcing(&c.s0_plus, problem.epsilon)?;
    Ok((reduced, na))
}

/// Forced response curve over `[omega_min, omega_max]`.
pub fn frc(problem: &FrcProblem, opts: &ContinuationOptions) -> Result<FrcResult> {
    if problem.output >= problem.system.n_state() {
        return Err(SsmError::InvalidInput(format!("output index {} out of range", problem.output)));
    }
    if problem.samples == 0 {
        return Err(SsmError::InvalidInput("samples must be positive".into()));
    }
    let (reduced, na) = forced_reduced_system(problem, opts.omega_min)?;
    let branch = continue_branch(&reduced, opts)?;
    let cache = NonAutonomousCache::new();
    let rows = branch
        .points
        .par_iter()
        .map(|pt| {
            let c = cache.get_or_solve(problem.system, problem.subspace, pt.omega, problem.forcing, &na)?;
            let lift = |forced| lift_amplitude(&reduced, problem.table, forced, &pt.y, problem.output, problem.samples);
            Ok(FrcRow {
                omega: pt.omega,
                amp_ti: lift(None),
                amp_tv: lift(Some((&c, problem.epsilon))),
                stable: pt.stable,
                y: pt.y.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrcResult {
        rows,
        bifurcations: branch.bifurcations,
        reduced,
    })
}

/// Integrate the non-rotating reduced dynamics from `p(0)` (positive modes,
/// as `(Re, Im)` pairs) and lift the output coordinate with the forced
/// correction.
pub fn simulate_rom(
    problem: &FrcProblem,
    omega: f64,
    y0: &[f64],
    times: &[f64],
    opts: &IntegrateOptions,
) -> Result<Vec<f64>> {
    Ok(simulate_rom_states(problem, omega, y0, times, opts)?
        .into_iter()
        .map(|z| z[problem.output])
        .collect())
}

/// As [`simulate_rom`], returning the lifted full state at each output time.
pub fn simulate_rom_states(
    problem: &FrcProblem,
    omega: f64,
    y0: &[f64],
    times: &[f64],
    opts: &IntegrateOptions,
) -> Result<Vec<Vec<f64>>> {
    let (reduced, na) = forced_reduced_system(problem, omega)?;
    if y0.len() != reduced.dim() {
        return Err(SsmError::InvalidInput(format!(
            "reduced initial state needs {} entries, got {}",
            reduced.dim(),
            y0.len()
        )));
    }
    let c = crate::ssm::solve_leading_nonautonomous(problem.system, problem.subspace, omega, problem.forcing, &na)?;
    let ys = dopri45(|t, y| Ok(reduced.field_fixed(y, omega, t)), 0.0, y0, times, opts)?;
    Ok(ys
        .iter()
        .zip(times)
        .map(|(y, &t)| {
            let p = reduced.point(&reduced.q(y), 0.0);
            evaluate_tv_state(problem.table, Some(&c), &p, omega * t, problem.epsilon)
                .iter()
                .map(|z| z.re)
                .collect()
        })
        .collect())
}

/// Integrate `M ẍ + C ẋ + K x + f = ε·2Re(fᵃ e^{iΩt})` directly. Returns the
/// full state `(x, ẋ)` at each output time.
pub fn simulate_full(
    model: &SecondOrderModel,
    forcing: &[C64],
    epsilon: f64,
    omega: f64,
    z0: &[f64],
    times: &[f64],
    opts: &IntegrateOptions,
) -> Result<Vec<Vec<f64>>> {
    let n = model.dofs();
    if z0.len() != 2 * n || forcing.len() != n {
        return Err(SsmError::InvalidInput("state or forcing has the wrong length".into()));
    }
    let m_lu = csc_to_dense(model.mass()).lu();
    dopri45(
        |t, z| {
            let (x, v) = z.split_at(n);
            let f = model.eval_nonlinearity(x, v)?;
            let xv = CVector::from_iterator(n, x.iter().map(|a| C64::new(*a, 0.0)));
            let vv = CVector::from_iterator(n, v.iter().map(|a| C64::new(*a, 0.0)));
            let kx = csc_mul(model.stiffness(), &xv);
            let cv = csc_mul(model.damping(), &vv);
            let e = C64::from_polar(1.0, omega * t);
            let rhs = nalgebra::DVector::from_fn(n, |i, _| {
                2.0 * epsilon * (forcing[i] * e).re - kx[i].re - cv[i].re - f[i]
            });
            let acc = m_lu
                .solve(&rhs)
                .ok_or_else(|| SsmError::SingularMass("mass matrix LU during integration".into()))?;
            Ok(v.iter().copied().chain(acc.iter().copied()).collect())
        },
        0.0,
        z0,
        times,
        opts,
    )
}
