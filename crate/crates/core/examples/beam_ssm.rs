//! SSM of a clamped-clamped von Kármán beam whose nonlinearity is available
//! only as a function. Prints evaluation counts per order.

use ssm_core::models::{make_vonkarman_beam, BeamParams};
use ssm_core::spectral::solve_master_subspace;
use ssm_core::ssm::{compute_ssm, SsmOptions};

fn main() -> ssm_core::Result<()> {
    let beam = make_vonkarman_beam(&BeamParams::default())?;
    println!("beam with {} dofs", beam.dofs());
    let sys = beam.first_order();
    let sub = solve_master_subspace(&sys, 2, Default::default())?;
    println!("slowest pair: {:?}", sub.lambdas());
    for order in [3, 5, 7] {
        let ssm = compute_ssm(&sys, &sub, order, &SsmOptions::default())?;
        println!(
            "order {order}: {} coefficients, {} real evaluations, {} operators factorized",
            ssm.table.iter().count(),
            ssm.stats.real_evaluations,
            ssm.factorizations
        );
    }
    Ok(())
}
