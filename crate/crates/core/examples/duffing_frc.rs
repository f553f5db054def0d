//! Forced response of the Duffing oscillator, with saddle-node detection.

use ssm_core::model::{lift_to_first_order, ForcingSpec};
use ssm_core::models::make_duffing;
use ssm_core::rom::{frc, verify_bifurcation, ContinuationOptions, FrcProblem};
use ssm_core::spectral::solve_master_subspace;
use ssm_core::ssm::{compute_ssm, SsmOptions};

fn main() -> ssm_core::Result<()> {
    let eps = 0.0058;
    let model = make_duffing(1.0, 0.005, 1.0)?
        .model
        .with_forcing(ForcingSpec::cosine(1, &[(0, 1.0)], eps)?)?;
    let sys = lift_to_first_order(&model);
    let sub = solve_master_subspace(&sys, 2, Default::default())?;
    let ssm = compute_ssm(&sys, &sub, 7, &SsmOptions::default())?;

    let forcing = sys.forcing_amplitude().expect("forced").clone();
    let problem = FrcProblem {
        system: &sys,
        subspace: &sub,
        table: &ssm.table,
        forcing: &forcing,
        epsilon: eps,
        forced_pair: 0,
        output: 0,
        samples: 128,
        rho_rel: 0.05,
    };
    let opts = ContinuationOptions {
        omega_min: 0.8,
        omega_max: 1.25,
        ..Default::default()
    };
    let curve = frc(&problem, &opts)?;
    for row in curve.rows.iter().step_by(curve.rows.len() / 25 + 1) {
        println!(
            "{:.6} {:.6} {}",
            row.omega,
            row.amp_tv,
            if row.stable { "stable" } else { "unstable" }
        );
    }
    let (w, a) = curve.peak(true);
    println!("peak amplitude {a:.6} at {w:.6}");
    for b in &curve.bifurcations {
        let check = verify_bifurcation(&curve.reduced, b, 1e-4, &opts)?;
        println!("{} at {:.6} (confirmed: {})", b.kind, b.omega, check.confirmed);
    }
    Ok(())
}
