mod common;

use ssm_core::cli::{compare_tables, verify_builtin};
use ssm_core::models::{make_duffing, random_chain};
use ssm_core::spectral::solve_master_subspace;
use ssm_core::ssm::{compute_ssm_with, SsmOptions};
use ssm_core::step::{StepComposer, TensorComposer};

#[test]
fn random_chains_and_pipe_match_tensor_path_to_order_seven() {
    for (name, r) in common::oracle_suite(7) {
        assert_eq!(r.coefficients, 35, "{name}");
        assert!(r.max_rel_w <= 1e-10, "{name}: W {:e}", r.max_rel_w);
        assert!(r.max_rel_r <= 1e-10, "{name}: R {:e}", r.max_rel_r);
    }
}

#[test]
fn four_dimensional_subspace_matches_tensor_path() {
    let b = random_chain(4, 7).unwrap();
    let sys = b.first_order();
    let sub = solve_master_subspace(&sys, 4, Default::default()).unwrap();
    let opts = SsmOptions::default();
    let got = compute_ssm_with(&sys, &sub, 5, &opts, &mut StepComposer::with_options(&sys, opts.step.clone())).unwrap();
    let reference = compute_ssm_with(&sys, &sub, 5, &opts, &mut TensorComposer::new(b.tensors.unwrap())).unwrap();
    let r = compare_tables(&got.table, &reference.table).unwrap();
    assert!(r.max_rel_w <= 1e-10 && r.max_rel_r <= 1e-10, "{r:?}");
}

#[test]
fn zero_skipping_and_conjugate_filling_do_not_change_coefficients() {
    let b = random_chain(3, 11).unwrap();
    let sys = b.first_order();
    let sub = solve_master_subspace(&sys, 2, Default::default()).unwrap();
    let plain = SsmOptions {
        conjugate_symmetry: false,
        step: ssm_core::step::StepOptions {
            skip_zero: false,
            ..Default::default()
        },
        ..Default::default()
    };
    let fast = SsmOptions::default();
    let a = compute_ssm_with(&sys, &sub, 5, &plain, &mut StepComposer::with_options(&sys, plain.step.clone())).unwrap();
    let c = compute_ssm_with(&sys, &sub, 5, &fast, &mut StepComposer::with_options(&sys, fast.step.clone())).unwrap();
    let r = compare_tables(&c.table, &a.table).unwrap();
    assert!(r.max_rel_w <= 1e-12 && r.max_rel_r <= 1e-12, "{r:?}");
    assert!(c.stats.real_evaluations < a.stats.real_evaluations);
}

#[test]
fn odd_symmetric_model_has_vanishing_even_coefficients() {
    let b = make_duffing(1.0, 0.01, 2.0).unwrap();
    let sys = b.first_order();
    let sub = solve_master_subspace(&sys, 2, Default::default()).unwrap();
    let opts = SsmOptions::default();
    let got = compute_ssm_with(&sys, &sub, 6, &opts, &mut StepComposer::with_options(&sys, opts.step.clone())).unwrap();
    for (m, w, _) in got.table.iter() {
        if m.degree() % 2 == 0 {
            assert!(ssm_core::linalg::norm_inf(w) < 1e-15, "{m}");
        }
    }
}

#[test]
fn verify_entry_point_covers_builtins_with_tensors() {
    for name in ["duffing", "chain", "chain-1to2"] {
        let r = verify_builtin(name, 5, &Default::default()).unwrap();
        assert!(r.max_rel_w <= 1e-10, "{name}");
    }
    assert!(verify_builtin("beam", 3, &Default::default()).is_err());
}
