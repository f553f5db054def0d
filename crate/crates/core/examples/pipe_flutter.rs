//! Cantilevered pipe conveying fluid past the flutter speed: the SSM is
//! built over the unstable eigenpair of a non-symmetric system.

use ssm_core::models::{make_pipe_conveying_fluid, PipeParams};
use ssm_core::rom::{backbone_curve, ReducedSystem};
use ssm_core::spectral::{solve_master_subspace_with, EigOptions, ModeSelection};
use ssm_core::ssm::{compute_ssm, SsmOptions};

fn main() -> ssm_core::Result<()> {
    let pipe = make_pipe_conveying_fluid(&PipeParams {
        flow_velocity: 6.0,
        ..Default::default()
    })?;
    let (c_asym, k_asym) = pipe.model.asymmetry();
    println!("relative asymmetry: damping {c_asym:.3e}, stiffness {k_asym:.3e}");

    let sys = pipe.first_order();
    let opts = EigOptions {
        selection: ModeSelection::Pairs(vec![1]),
        ..Default::default()
    };
    let sub = solve_master_subspace_with(&sys, 2, &opts)?;
    let lambda = sub.lambdas()[0];
    println!("master pair: {:.6} ± {:.6}i", lambda.re, lambda.im.abs());

    let ssm = compute_ssm(&sys, &sub, 5, &SsmOptions::default())?;
    let reduced = ReducedSystem::new(&sub, &ssm.table, 0)?;
    let rhos: Vec<f64> = (0..=8).map(|k| 0.05 * k as f64).collect();
    for p in backbone_curve(&reduced, &ssm.table, 0, &rhos, 0, 64) {
        // growth rate Re R/p; a limit cycle sits where it changes sign
        println!("rho {:.3}  frequency {:.6}  growth {:+.6}", p.rho, p.frequency, p.damping);
    }
    Ok(())
}
