//! Backbone curve of a hardening Duffing oscillator from the autonomous SSM.

use ssm_core::models::make_duffing;
use ssm_core::rom::{backbone_curve, ReducedSystem};
use ssm_core::spectral::solve_master_subspace;
use ssm_core::ssm::{compute_ssm, SsmOptions};

fn main() -> ssm_core::Result<()> {
    let duffing = make_duffing(1.0, 0.005, 1.0)?;
    let sys = duffing.first_order();
    let sub = solve_master_subspace(&sys, 2, Default::default())?;
    let ssm = compute_ssm(&sys, &sub, 7, &SsmOptions::default())?;
    let reduced = ReducedSystem::new(&sub, &ssm.table, 0)?;

    let rhos: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
    println!("{:>6} {:>12} {:>12} {:>12}", "rho", "frequency", "growth", "amplitude");
    for p in backbone_curve(&reduced, &ssm.table, 0, &rhos, 0, 128) {
        println!("{:6.2} {:12.8} {:12.8} {:12.8}", p.rho, p.frequency, p.damping, p.amplitude);
    }
    println!("black-box evaluations: {}", ssm.stats.total_evaluations());
    Ok(())
}
