use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Result, SsmError};
use crate::model::{FnNonlinearity, SecondOrderModel};

use super::{gauss_legendre, params, BuiltinModel};

/// Clamped–clamped von Kármán beam: axial `u` (linear elements), transverse
/// `w` and rotation `θ = w'` (Hermite cubics). Membrane strain `u' + w'²/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamParams {
    pub n_elem: usize,
    pub length: f64,
    pub ea: f64,
    pub ei: f64,
    pub rho_a: f64,
    pub rayleigh: (f64, f64),
}

impl Default for BeamParams {
    fn default() -> Self {
        Self {
            n_elem: 8,
            length: 1.0,
            ea: 1e3,
            ei: 1.0,
            rho_a: 1.0,
            rayleigh: (0.4, 0.0),
        }
    }
}

struct Shapes {
    nu: [f64; 2],
    du: [f64; 2],
    h: [f64; 4],
    dh: [f64; 4],
    d2h: [f64; 4],
}

fn shapes(xi: f64, le: f64) -> Shapes {
    let (x2, x3) = (xi * xi, xi * xi * xi);
    Shapes {
        nu: [1.0 - xi, xi],
        du: [-1.0 / le, 1.0 / le],
        h: [1.0 - 3.0 * x2 + 2.0 * x3, le * (xi - 2.0 * x2 + x3), 3.0 * x2 - 2.0 * x3, le * (x3 - x2)],
        dh: [
            (-6.0 * xi + 6.0 * x2) / le,
            1.0 - 4.0 * xi + 3.0 * x2,
            (6.0 * xi - 6.0 * x2) / le,
            -2.0 * xi + 3.0 * x2,
        ],
        d2h: [
            (-6.0 + 12.0 * xi) / (le * le),
            (-4.0 + 6.0 * xi) / le,
            (6.0 - 12.0 * xi) / (le * le),
            (-2.0 + 6.0 * xi) / le,
        ],
    }
}

/// Global free-DOF indices of element `e`'s `[u₁, w₁, θ₁, u₂, w₂, θ₂]`.
fn element_dofs(e: usize, n_elem: usize) -> [Option<usize>; 6] {
    let node = |k: usize, c: usize| (k > 0 && k < n_elem).then(|| 3 * (k - 1) + c);
    [node(e, 0), node(e, 1), node(e, 2), node(e + 1, 0), node(e + 1, 1), node(e + 1, 2)]
}

const U: [usize; 2] = [0, 3];
const W: [usize; 4] = [1, 2, 4, 5];

pub fn make_vonkarman_beam(p: &BeamParams) -> Result<BuiltinModel> {
    if p.n_elem < 2 {
        return Err(SsmError::InvalidInput("beam needs at least two elements".into()));
    }
    let ne = p.n_elem;
    let n = 3 * (ne - 1);
    let le = p.length / ne as f64;
    let (gx, gw) = gauss_legendre(5, 0.0, 1.0);

    let mut k = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    for e in 0..ne {
        let dofs = element_dofs(e, ne);
        let mut ke = [[0.0; 6]; 6];
        let mut me = [[0.0; 6]; 6];
        for (xi, wq) in gx.iter().zip(&gw) {
            let s = shapes(*xi, le);
            let jw = wq * le;
            for a in 0..2 {
                for b in 0..2 {
                    ke[U[a]][U[b]] += jw * p.ea * s.du[a] * s.du[b];
                    me[U[a]][U[b]] += jw * p.rho_a * s.nu[a] * s.nu[b];
                }
            }
            for a in 0..4 {
                for b in 0..4 {
                    ke[W[a]][W[b]] += jw * p.ei * s.d2h[a] * s.d2h[b];
                    me[W[a]][W[b]] += jw * p.rho_a * s.h[a] * s.h[b];
                }
            }
        }
        for a in 0..6 {
            for b in 0..6 {
                if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                    k[(i, j)] += ke[a][b];
                    m[(i, j)] += me[a][b];
                }
            }
        }
    }
    let c = &m * p.rayleigh.0 + &k * p.rayleigh.1;

    let (ea, ne_c) = (p.ea, ne);
    let nl = Arc::new(FnNonlinearity::new(n, "vonkarman-beam", move |x: &[f64], _: &[f64]| {
        let mut f = vec![0.0; n];
        for e in 0..ne_c {
            let dofs = element_dofs(e, ne_c);
            let q: Vec<f64> = dofs.iter().map(|d| d.map_or(0.0, |i| x[i])).collect();
            let mut fe = [0.0; 6];
            for (xi, wq) in gx.iter().zip(&gw) {
                let s = shapes(*xi, le);
                let jw = wq * le;
                let up: f64 = (0..2).map(|a| s.du[a] * q[U[a]]).sum();
                let wp: f64 = (0..4).map(|a| s.dh[a] * q[W[a]]).sum();
                // nonlinear parts of N δε with N = EA(u' + w'²/2)
                for a in 0..2 {
                    fe[U[a]] += jw * ea * 0.5 * wp * wp * s.du[a];
                }
                for a in 0..4 {
                    fe[W[a]] += jw * ea * (up + 0.5 * wp * wp) * wp * s.dh[a];
                }
            }
            for a in 0..6 {
                if let Some(i) = dofs[a] {
                    f[i] += fe[a];
                }
            }
        }
        f
    }));
    let model = SecondOrderModel::from_dense(&m, &c, &k, nl)?;
    Ok(BuiltinModel {
        id: "beam".into(),
        params: params(&[
            ("n_elem", ne as f64),
            ("length", p.length),
            ("ea", p.ea),
            ("ei", p.ei),
            ("rho_a", p.rho_a),
            ("rayleigh_alpha", p.rayleigh.0),
            ("rayleigh_beta", p.rayleigh.1),
        ]),
        model,
        tensors: None,
        distributed_load: None,
    })
}

/// Index of the transverse DOF at the node nearest mid-span.
pub fn midspan_w_dof(n_elem: usize) -> usize {
    let node = (n_elem / 2).max(1);
    3 * (node - 1) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csc_to_dense;

    #[test]
    fn first_bending_frequency_matches_clamped_clamped_value() {
        let b = make_vonkarman_beam(&BeamParams {
            n_elem: 16,
            ..Default::default()
        })
        .unwrap();
        let k = csc_to_dense(b.model.stiffness());
        let m = csc_to_dense(b.model.mass());
        let ev = (m.clone().try_inverse().unwrap() * k).complex_eigenvalues();
        let mut w: Vec<f64> = ev.iter().map(|z| z.re.sqrt()).collect();
        w.sort_by(f64::total_cmp);
        // β₁L = 4.7300 for clamped–clamped
        let exact = 4.730040744862704f64.powi(2);
        assert!((w[0] - exact).abs() / exact < 1e-4, "{}", w[0]);
    }

    #[test]
    fn transverse_only_state_gives_cubic_and_axial_quadratic() {
        let b = make_vonkarman_beam(&BeamParams::default()).unwrap();
        let n = b.dofs();
        let mut x = vec![0.0; n];
        x[midspan_w_dof(8)] = 0.1;
        let f1 = b.model.eval_nonlinearity(&x, &vec![0.0; n]).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let f2 = b.model.eval_nonlinearity(&x2, &vec![0.0; n]).unwrap();
        for i in 0..n {
            let ratio = if i % 3 == 0 { 4.0 } else { 8.0 };
            assert!((f2[i] - ratio * f1[i]).abs() <= 1e-12 * f2[i].abs().max(1e-300), "dof {i}");
        }
    }
}
