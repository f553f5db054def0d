use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Result, SsmError};
use crate::model::{FnNonlinearity, SecondOrderModel};

use super::{gauss_legendre, params, BuiltinModel, PolynomialForce};

/// Cantilevered pipe conveying fluid, nondimensional, Galerkin-reduced on
/// clamped–free beam modes:
///
/// `η'''' + u²η'' + 2√β u η̇' + η̈ + αη̇'''' + N(η) + α DN(η)[η̇] = 0`,
/// `N(η) = η''³ + 4η'η''η''' + η'²η''''`.
#[derive(Clone, Debug, PartialEq)]
pub struct PipeParams {
    pub n_modes: usize,
    /// Dimensionless flow velocity `u`.
    pub flow_velocity: f64,
    /// Mass ratio `β`.
    pub mass_ratio: f64,
    /// Kelvin–Voigt coefficient `α`.
    pub viscoelastic: f64,
    pub quad_order: usize,
}

impl Default for PipeParams {
    fn default() -> Self {
        Self {
            n_modes: 4,
            flow_velocity: 6.0,
            mass_ratio: 0.2,
            viscoelastic: 1e-3,
            quad_order: 48,
        }
    }
}

/// First `n` roots of `1 + cos β cosh β = 0`.
pub fn cantilever_roots(n: usize) -> Vec<f64> {
    let f = |b: f64| 1.0 + b.cos() * b.cosh();
    (0..n)
        .map(|r| {
            let guess = (2 * r + 1) as f64 * std::f64::consts::FRAC_PI_2;
            let (mut lo, mut hi) = (guess - 0.5, guess + 0.5);
            let flo = f(lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (f(mid) > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Mode shape and its first four derivatives at `ξ`, in a form that avoids
/// the `cosh − σ sinh` cancellation for the higher modes.
fn mode(beta: f64, xi: f64) -> [f64; 5] {
    let (sb, cb) = (beta.sin(), beta.cos());
    let denom = beta.cosh() + cb;
    let sigma = (beta.sinh() - sb) / denom;
    let one_minus = ((-beta).exp() + cb + sb) / denom;
    let one_plus = 1.0 + sigma;
    let x = beta * xi;
    let (ep, em) = ((x - beta).exp(), (-x).exp());
    // (1 − σ)eˣ = one_minus·e^β·e^{x−β}; keep e^β folded into the scale
    let scaled = one_minus * beta.exp();
    let g = 0.5 * (scaled * ep + one_plus * em);
    let h = 0.5 * (scaled * ep - one_plus * em);
    let (s, c) = (x.sin(), x.cos());
    [
        g - c + sigma * s,
        beta * (h + s + sigma * c),
        beta.powi(2) * (g + c - sigma * s),
        beta.powi(3) * (h - s - sigma * c),
        beta.powi(4) * (g - c + sigma * s),
    ]
}

struct Basis {
    weights: Vec<f64>,
    /// `phi[q][r][d]`: derivative `d` of mode `r` at node `q`.
    phi: Vec<Vec<[f64; 5]>>,
    roots: Vec<f64>,
}

fn basis(n_modes: usize, order: usize) -> Basis {
    let roots = cantilever_roots(n_modes);
    let (x, w) = gauss_legendre(order, 0.0, 1.0);
    let phi = x.iter().map(|xi| roots.iter().map(|b| mode(*b, *xi)).collect()).collect();
    Basis { weights: w, phi, roots }
}

fn field(phi: &[[f64; 5]], q: &[f64]) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (p, qr) in phi.iter().zip(q) {
        for d in 0..5 {
            out[d] += p[d] * qr;
        }
    }
    out
}

fn curvature_force(e: &[f64; 5]) -> f64 {
    e[2].powi(3) + 4.0 * e[1] * e[2] * e[3] + e[1] * e[1] * e[4]
}

fn curvature_rate(e: &[f64; 5], v: &[f64; 5]) -> f64 {
    3.0 * e[2] * e[2] * v[2]
        + 4.0 * (v[1] * e[2] * e[3] + e[1] * v[2] * e[3] + e[1] * e[2] * v[3])
        + 2.0 * e[1] * v[1] * e[4]
        + e[1] * e[1] * v[4]
}

pub fn make_pipe_conveying_fluid(p: &PipeParams) -> Result<BuiltinModel> {
    if p.n_modes == 0 || p.quad_order < 8 {
        return Err(SsmError::InvalidInput("pipe needs n_modes >= 1 and quad_order >= 8".into()));
    }
    if !(p.mass_ratio >= 0.0 && p.mass_ratio <= 1.0) {
        return Err(SsmError::InvalidInput("mass ratio must lie in [0, 1]".into()));
    }
    let n = p.n_modes;
    let bas = Arc::new(basis(n, p.quad_order));
    let integrate = |f: &dyn Fn(&[[f64; 5]]) -> f64| -> f64 {
        bas.weights.iter().zip(&bas.phi).map(|(w, ph)| w * f(ph)).sum()
    };

    let mut m = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    let u = p.flow_velocity;
    for s in 0..n {
        for r in 0..n {
            m[(s, r)] = integrate(&|ph| ph[s][0] * ph[r][0]);
            let b_sr = integrate(&|ph| ph[s][0] * ph[r][1]);
            let c_sr = integrate(&|ph| ph[s][0] * ph[r][2]);
            c[(s, r)] = 2.0 * p.mass_ratio.sqrt() * u * b_sr;
            k[(s, r)] = u * u * c_sr;
        }
        let l4 = bas.roots[s].powi(4);
        c[(s, s)] += p.viscoelastic * l4;
        k[(s, s)] += l4;
    }

    let alpha = p.viscoelastic;
    let bb = bas.clone();
    let nl = Arc::new(FnNonlinearity::new(n, "pipe", move |q: &[f64], qd: &[f64]| {
        let mut f = vec![0.0; n];
        for (w, ph) in bb.weights.iter().zip(&bb.phi) {
            let e = field(ph, q);
            let v = field(ph, qd);
            let g = w * (curvature_force(&e) + alpha * curvature_rate(&e, &v));
            for s in 0..n {
                f[s] += g * ph[s][0];
            }
        }
        f
    }));

    let mut t = PolynomialForce::new(n, "pipe-tensors");
    for s in 0..n {
        for j in 0..n {
            for kk in 0..n {
                for l in 0..n {
                    let disp = integrate(&|ph| {
                        ph[s][0]
                            * (ph[j][2] * ph[kk][2] * ph[l][2]
                                + 4.0 * ph[j][1] * ph[kk][2] * ph[l][3]
                                + ph[j][1] * ph[kk][1] * ph[l][4])
                    });
                    // j, kk displacement; l velocity
                    let rate = integrate(&|ph| {
                        ph[s][0]
                            * (3.0 * ph[j][2] * ph[kk][2] * ph[l][2]
                                + 4.0
                                    * (ph[l][1] * ph[j][2] * ph[kk][3]
                                        + ph[j][1] * ph[l][2] * ph[kk][3]
                                        + ph[j][1] * ph[kk][2] * ph[l][3])
                                + 2.0 * ph[j][1] * ph[l][1] * ph[kk][4]
                                + ph[j][1] * ph[kk][1] * ph[l][4])
                    });
                    t.add_cubic(s, j, kk, l, disp);
                    t.add_cubic(s, j, kk, n + l, alpha * rate);
                }
            }
        }
    }

    let model = SecondOrderModel::from_dense(&m, &c, &k, nl)?;
    Ok(BuiltinModel {
        id: "pipe".into(),
        params: params(&[
            ("n_modes", n as f64),
            ("flow_velocity", u),
            ("mass_ratio", p.mass_ratio),
            ("viscoelastic", alpha),
            ("quad_order", p.quad_order as f64),
        ]),
        model,
        tensors: Some(Arc::new(t)),
        distributed_load: Some(pipe_distributed_load(p)),
    })
}

/// Generalized load `∫φ_s` of a unit distributed force.
pub fn pipe_distributed_load(p: &PipeParams) -> Vec<f64> {
    let bas = basis(p.n_modes, p.quad_order);
    (0..p.n_modes)
        .map(|s| bas.weights.iter().zip(&bas.phi).map(|(w, ph)| w * ph[s][0]).sum())
        .collect()
}
