//! Evaluate a nonlinearity through the NDJSON protocol: a server thread
//! exposes the beam force over TCP and the SSM is computed through a client.

use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use ssm_core::linalg::norm_inf;
use ssm_core::model::SecondOrderModel;
use ssm_core::models::{make_vonkarman_beam, BeamParams};
use ssm_core::model::lift_to_first_order;
use ssm_core::protocol::{serve_tcp, RemoteNonlinearity};
use ssm_core::spectral::solve_master_subspace;
use ssm_core::ssm::{compute_ssm, SsmOptions};

fn main() -> ssm_core::Result<()> {
    let beam = make_vonkarman_beam(&BeamParams::default())?;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let served = beam.model.nonlinearity().clone();
    let server = thread::spawn(move || serve_tcp(served.as_ref(), listener, Some(1)));

    let remote = Arc::new(RemoteNonlinearity::connect_tcp(addr)?);
    println!("connected to {:?}", remote.server());
    let model = SecondOrderModel::new(
        beam.model.mass().clone(),
        beam.model.damping().clone(),
        beam.model.stiffness().clone(),
        remote.clone(),
    )?;

    let sys = lift_to_first_order(&model);
    let sub = solve_master_subspace(&sys, 2, Default::default())?;
    let remote_ssm = compute_ssm(&sys, &sub, 5, &SsmOptions::default())?;
    let local_sys = beam.first_order();
    let local_ssm = compute_ssm(&local_sys, &sub, 5, &SsmOptions::default())?;

    let mut worst: f64 = 0.0;
    for (m, w, _) in local_ssm.table.iter() {
        let d = norm_inf(&(remote_ssm.table.w(m).expect("same indices") - w));
        worst = worst.max(d / norm_inf(w).max(1e-300));
    }
    println!("remote vs in-process coefficients: worst relative difference {worst:.2e}");
    println!("remote {:?}\nlocal  {:?}", remote_ssm.stats, local_ssm.stats);
    drop(sys);
    drop(model);
    drop(remote);
    server.join().expect("server thread")?;
    Ok(())
}
