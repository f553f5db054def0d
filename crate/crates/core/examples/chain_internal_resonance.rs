//! Two-mass chain with a 1:2 internal resonance, reduced on a
//! four-dimensional SSM. Both saddle-node and Hopf points appear.

use ssm_core::model::{lift_to_first_order, ForcingSpec};
use ssm_core::models::internally_resonant_chain;
use ssm_core::rom::{frc, verify_bifurcation, ContinuationOptions, FrcProblem};
use ssm_core::spectral::solve_master_subspace;
use ssm_core::ssm::{compute_ssm, SsmOptions};

fn main() -> ssm_core::Result<()> {
    let eps = 0.01;
    let chain = internally_resonant_chain(0.5, 0.0, (0.01, 0.0))?;
    let model = chain.model.with_forcing(ForcingSpec::cosine(2, &[(0, 1.0)], eps)?)?;
    let sys = lift_to_first_order(&model);
    let sub = solve_master_subspace(&sys, 4, Default::default())?;
    println!("master eigenvalues: {:?}", sub.lambdas());
    let ssm = compute_ssm(&sys, &sub, 5, &SsmOptions::default())?;
    for r in &ssm.resonances {
        println!("resonant index {} on modes {:?}", r.index, r.modes);
    }

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
        omega_min: 0.85,
        omega_max: 1.15,
        ..Default::default()
    };
    let curve = frc(&problem, &opts)?;
    println!("{} branch points", curve.rows.len());
    for b in &curve.bifurcations {
        let check = verify_bifurcation(&curve.reduced, b, 1e-4, &opts)?;
        println!("{} at {:.6} (confirmed: {})", b.kind, b.omega, check.confirmed);
    }
    Ok(())
}
