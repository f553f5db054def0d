#![allow(dead_code)]

use ssm_core::linalg::CVector;
use ssm_core::model::{lift_to_first_order, FirstOrderSystem, ForcingSpec};
use ssm_core::models::{make_duffing, BuiltinModel};
use ssm_core::rom::{frc, ContinuationOptions, FrcProblem, FrcResult};
use ssm_core::spectral::{solve_master_subspace, MasterSubspace};
use ssm_core::ssm::{compute_ssm, SsmOptions, SsmResult};

pub struct Forced {
    pub sys: FirstOrderSystem,
    pub sub: MasterSubspace,
    pub ssm: SsmResult,
    pub forcing: CVector,
    pub eps: f64,
}

/// Forced system with a master subspace of dimension `dim` chosen by `select`.
pub fn forced(
    model: BuiltinModel,
    loads: Vec<ssm_core::linalg::C64>,
    eps: f64,
    order: u32,
    select: impl FnOnce(&FirstOrderSystem) -> MasterSubspace,
) -> Forced {
    let m = model.model.with_forcing(ForcingSpec::new(loads, eps).unwrap()).unwrap();
    let sys = lift_to_first_order(&m);
    let sub = select(&sys);
    let ssm = compute_ssm(&sys, &sub, order, &SsmOptions::default()).unwrap();
    let forcing = sys.forcing_amplitude().unwrap().clone();
    Forced {
        sys,
        sub,
        ssm,
        forcing,
        eps,
    }
}

pub fn forced_duffing(zeta: f64, gamma: f64, eps: f64, order: u32) -> Forced {
    forced(
        make_duffing(1.0, zeta, gamma).unwrap(),
        vec![ssm_core::linalg::C64::new(0.5, 0.0)],
        eps,
        order,
        |s| solve_master_subspace(s, 2, Default::default()).unwrap(),
    )
}

pub fn run_frc(f: &Forced, forced_pair: usize, output: usize, omega: (f64, f64)) -> FrcResult {
    let problem = FrcProblem {
        system: &f.sys,
        subspace: &f.sub,
        table: &f.ssm.table,
        forcing: &f.forcing,
        epsilon: f.eps,
        forced_pair,
        output,
        samples: 256,
        rho_rel: 0.05,
    };
    let opts = ContinuationOptions {
        omega_min: omega.0,
        omega_max: omega.1,
        ..Default::default()
    };
    frc(&problem, &opts).unwrap()
}

/// Max relative gap between the TI and TV amplitudes along a curve.
pub fn ti_tv_gap(curve: &FrcResult) -> f64 {
    let peak = curve.rows.iter().map(|r| r.amp_tv).fold(0.0, f64::max);
    curve
        .rows
        .iter()
        .map(|r| (r.amp_tv - r.amp_ti).abs())
        .fold(0.0, f64::max)
        / peak
}

/// Harmonic balance for `ẍ + 2ζẋ + x + γx³ = f cos(Ωt + ψ)` with odd
/// harmonics up to `7`. The response phase is pinned (`x₁ = a cos τ`), so
/// the unknowns are `(a₁, a₃, b₃, a₅, b₅, a₇, b₇, Ω)` and the solution is
/// a graph over the forcing phase `ψ`, without folds.
pub struct DuffingHb {
    pub zeta: f64,
    pub gamma: f64,
    pub force: f64,
}

const HARMONICS: [usize; 4] = [1, 3, 5, 7];
const NODES: usize = 64;

impl DuffingHb {
    fn signal(u: &[f64], tau: f64) -> (f64, f64, f64) {
        // x, x', x'' with respect to τ
        let mut x = u[0] * tau.cos();
        let mut dx = -u[0] * tau.sin();
        let mut ddx = -u[0] * tau.cos();
        for (j, k) in HARMONICS[1..].iter().enumerate() {
            let (a, b) = (u[1 + 2 * j], u[2 + 2 * j]);
            let kf = *k as f64;
            let (s, c) = ((kf * tau).sin(), (kf * tau).cos());
            x += a * c + b * s;
            dx += kf * (-a * s + b * c);
            ddx += -kf * kf * (a * c + b * s);
        }
        (x, dx, ddx)
    }

    fn residual(&self, u: &[f64], psi: f64) -> Vec<f64> {
        let w = u[7];
        let mut out = vec![0.0; 8];
        for q in 0..NODES {
            let tau = 2.0 * std::f64::consts::PI * q as f64 / NODES as f64;
            let (x, dx, ddx) = Self::signal(u, tau);
            let r = w * w * ddx + 2.0 * self.zeta * w * dx + x + self.gamma * x * x * x
                - self.force * (tau + psi).cos();
            for (j, k) in HARMONICS.iter().enumerate() {
                let kf = *k as f64;
                out[2 * j] += r * (kf * tau).cos();
                out[2 * j + 1] += r * (kf * tau).sin();
            }
        }
        out.iter().map(|v| 2.0 * v / NODES as f64).collect()
    }

    fn solve(&self, mut u: Vec<f64>, psi: f64) -> Option<Vec<f64>> {
        for _ in 0..50 {
            let r = self.residual(&u, psi);
            let norm = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if norm < 1e-14 {
                return Some(u);
            }
            let mut jac = nalgebra::DMatrix::zeros(8, 8);
            for c in 0..8 {
                let h = 1e-7 * u[c].abs().max(1e-3);
                let mut up = u.clone();
                up[c] += h;
                let mut dn = u.clone();
                dn[c] -= h;
                let (rp, rm) = (self.residual(&up, psi), self.residual(&dn, psi));
                for row in 0..8 {
                    jac[(row, c)] = (rp[row] - rm[row]) / (2.0 * h);
                }
            }
            let du = jac.lu().solve(&nalgebra::DVector::from_vec(r))?;
            let step = du.amax();
            for (ui, d) in u.iter_mut().zip(du.iter()) {
                *ui -= d;
            }
            if step < 1e-15 * u[7].abs() {
                return Some(u);
            }
        }
        let r = self.residual(&u, psi);
        (r.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-10).then_some(u)
    }

    /// `max |x(t)|` over a period.
    pub fn amplitude(u: &[f64]) -> f64 {
        (0..2048)
            .map(|q| Self::signal(u, 2.0 * std::f64::consts::PI * q as f64 / 2048.0).0.abs())
            .fold(0.0, f64::max)
    }

    /// Peak of the response curve as `(Ω, amplitude)`.
    pub fn peak(&self) -> (f64, f64) {
        // start in the quasi-static regime: x ≈ f cos τ, Ω small, ψ ≈ 0
        let mut psi = 0.02;
        let mut u = vec![0.0; 8];
        u[0] = self.force;
        u[7] = 0.5;
        let mut best = (0.0, psi, u.clone());
        let mut guess = u;
        // walk ψ towards the resonant quadrature and beyond
        while psi < std::f64::consts::PI - 0.02 {
            let sol = self.solve(guess.clone(), psi).expect("harmonic balance diverged");
            let a = Self::amplitude(&sol);
            if a > best.0 {
                best = (a, psi, sol.clone());
            }
            guess = sol;
            psi += 0.01;
        }
        // golden-section refinement around the best sample
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (best.1 - 0.01, best.1 + 0.01);
        let seed = best.2;
        let eval = |p: f64| {
            let s = self.solve(seed.clone(), p).expect("harmonic balance diverged");
            (Self::amplitude(&s), s[7])
        };
        for _ in 0..60 {
            let (c, d) = (hi - g * (hi - lo), lo + g * (hi - lo));
            if eval(c).0 > eval(d).0 {
                hi = d;
            } else {
                lo = c;
            }
        }
        let (a, w) = eval(0.5 * (lo + hi));
        (w, a)
    }
}

/// Black-box vs tensor coefficients for the random chains (`n = 2..6`) and
/// the pipe, on the slowest pair.
pub fn oracle_suite(order: u32) -> Vec<(String, ssm_core::cli::VerifyReport)> {
    use ssm_core::cli::verify_model;
    use ssm_core::models::{make_pipe_conveying_fluid, random_chain, PipeParams};
    let mut out: Vec<_> = (0..20u64)
        .map(|seed| {
            let n = 2 + (seed % 5) as usize;
            let b = random_chain(n, seed).unwrap();
            (format!("random-chain n={n} seed={seed}"), verify_model(&b, order).unwrap())
        })
        .collect();
    let pipe = make_pipe_conveying_fluid(&PipeParams::default()).unwrap();
    out.push(("pipe u=6".into(), verify_model(&pipe, order).unwrap()));
    out
}
