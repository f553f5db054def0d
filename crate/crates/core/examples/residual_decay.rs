//! Invariance residual of truncated parameterizations on a shrinking chart
//! radius. The fitted log-log slope measures the truncation order.

use ssm_core::models::make_spring_chain;
use ssm_core::spectral::solve_master_subspace;
use ssm_core::ssm::{compute_ssm, residual_slope, SsmOptions};

fn main() -> ssm_core::Result<()> {
    let chain = make_spring_chain(4, 1.0, 0.5, 0.5, (0.01, 0.005))?;
    let sys = chain.first_order();
    let sub = solve_master_subspace(&sys, 2, Default::default())?;
    for order in [3, 5, 7] {
        let ssm = compute_ssm(&sys, &sub, order, &SsmOptions::default())?;
        let fit = residual_slope(&sys, &sub, &ssm.table, (1e-2, 1e-1), 9, 100.0)?;
        println!("order {order}: slope {:.3} from {} points", fit.slope, fit.used);
        for s in &fit.samples {
            println!("    h {:.4e}  residual {:.4e}  floor {:.1e}", s.h, s.residual, s.floor);
        }
    }
    Ok(())
}
