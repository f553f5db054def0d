use nalgebra::DMatrix;

use crate::error::{Result, SsmError};
use crate::linalg::{norm_inf, CVector, C64, I};
use crate::multiindex::{CoefficientTable, MultiIndex};
use crate::spectral::MasterSubspace;

/// Reduced dynamics `ṗ = R(p) + ε S(φ)` written for a subspace made of
/// complex-conjugate pairs. The state is the list of coordinates `q_k` of the
/// positive-frequency modes, stored as `(Re q_k, Im q_k)`.
///
/// In the rotating frame `p_k = q_k e^{i r_k φ}` with `φ̇ = Ω`; the frame is
/// valid when every retained term of `R` and `S` is phase-free in it.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    m_dim: usize,
    /// Positive-frequency subspace indices, one per pair.
    pos: Vec<usize>,
    map: Vec<usize>,
    ratios: Vec<f64>,
    lambdas: Vec<C64>,
    terms: Vec<(MultiIndex, CVector)>,
    /// `ε s₀⁺` on the positive modes.
    forcing: Vec<C64>,
}

/// Nearest `a/b` with `b ≤ 4` if within `tol` relative, else `x` itself.
fn small_rational(x: f64, tol: f64) -> f64 {
    let mut best = x;
    let mut err = f64::INFINITY;
    for b in 1..=4 {
        let a = (x * b as f64).round();
        if a == 0.0 {
            continue;
        }
        let r = a / b as f64;
        let e = (r - x).abs() / x.abs();
        if e <= tol && e < err {
            best = r;
            err = e;
        }
    }
    best
}

impl ReducedSystem {
    /// Frame locked to pair `forced_pair` (counted over positive-frequency
    /// modes in subspace order). Other pairs rotate at the nearest small
    /// rational multiple of the forced frequency.
    pub fn new(subspace: &MasterSubspace, table: &CoefficientTable, forced_pair: usize) -> Result<Self> {
        let map = subspace
            .conjugate_map()
            .ok_or_else(|| SsmError::Unsupported("reduced analysis needs a conjugation-closed subspace".into()))?
            .to_vec();
        let lambdas = subspace.lambdas().to_vec();
        let mut pos = Vec::new();
        for i in 0..map.len() {
            if map[i] == i {
                return Err(SsmError::Unsupported(format!(
                    "mode {i} is real; reduced analysis supports oscillatory pairs only"
                )));
            }
            if lambdas[i].im > 0.0 {
                pos.push(i);
            }
        }
        let base = pos
            .get(forced_pair)
            .map(|&i| lambdas[i].im)
            .ok_or_else(|| SsmError::InvalidInput(format!("forced pair {forced_pair} out of range")))?;
        let ratios: Vec<f64> = pos.iter().map(|&i| small_rational(lambdas[i].im / base, 0.05)).collect();
        let mut sigma = vec![0.0; map.len()];
        for (k, &i) in pos.iter().enumerate() {
            sigma[i] = ratios[k];
            sigma[map[i]] = -ratios[k];
        }
        let terms = table.nonzero_r();
        let scale = terms.iter().map(|(_, r)| norm_inf(r)).fold(0.0, f64::max);
        for (m, r) in &terms {
            let phase: f64 = (0..m.dim()).map(|j| m.get(j) as f64 * sigma[j]).sum();
            for &i in &pos {
                if r[i].norm() > 1e-13 * scale && (phase - sigma[i]).abs() > 1e-9 {
                    return Err(SsmError::Unsupported(format!(
                        "term {m} of mode {i} is not phase-free in the rotating frame"
                    )));
                }
            }
        }
        Ok(Self {
            m_dim: map.len(),
            forcing: vec![C64::new(0.0, 0.0); pos.len()],
            pos,
            map,
            ratios,
            lambdas,
            terms,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.pos.len()
    }

    pub fn pairs(&self) -> usize {
        self.pos.len()
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn positive_modes(&self) -> &[usize] {
        &self.pos
    }

    pub fn lambdas(&self) -> &[C64] {
        &self.lambdas
    }

    /// Subspace indices whose forcing balance is resonant in this frame.
    pub fn resonant_plus(&self) -> Vec<usize> {
        self.pos
            .iter()
            .zip(&self.ratios)
            .filter(|(_, r)| (**r - 1.0).abs() < 1e-12)
            .map(|(i, _)| *i)
            .collect()
    }

    /// Set `ε s₀⁺` from the leading forced coefficients. Entries on modes
    /// that do not rotate with the forcing must vanish.
    pub fn set_forcing(&mut self, s0_plus: &CVector, epsilon: f64) -> Result<()> {
        let scale = norm_inf(s0_plus);
        for (k, &i) in self.pos.iter().enumerate() {
            let s = s0_plus[i];
            if s.norm() > 1e-13 * scale && (self.ratios[k] - 1.0).abs() > 1e-12 {
                return Err(SsmError::Unsupported(format!(
                    "forcing on mode {i} is not phase-free in the rotating frame"
                )));
            }
            self.forcing[k] = s * epsilon;
        }
        Ok(())
    }

    pub(crate) fn forcing_entry(&self, k: usize) -> C64 {
        self.forcing[k]
    }

    pub fn q(&self, y: &[f64]) -> Vec<C64> {
        (0..self.pos.len()).map(|k| C64::new(y[2 * k], y[2 * k + 1])).collect()
    }

    /// Full reduced point for rotating coordinates `q` at phase `φ`.
    pub fn point(&self, q: &[C64], phi: f64) -> Vec<C64> {
        let mut p = vec![C64::new(0.0, 0.0); self.m_dim];
        for (k, &i) in self.pos.iter().enumerate() {
            let v = q[k] * C64::from_polar(1.0, self.ratios[k] * phi);
            p[i] = v;
            p[self.map[i]] = v.conj();
        }
        p
    }

    fn r_at(&self, p: &[C64], i: usize) -> C64 {
        self.terms.iter().map(|(m, r)| r[i] * m.monomial(p)).sum()
    }

    /// `∂R_i/∂p_j`.
    fn dr_at(&self, p: &[C64], i: usize, j: usize) -> C64 {
        self.terms
            .iter()
            .filter(|(m, _)| m.get(j) > 0)
            .map(|(m, r)| {
                let low = m.with_increment(j, -1).expect("positive exponent");
                r[i] * m.get(j) as f64 * low.monomial(p)
            })
            .sum()
    }

    /// Rotating-frame vector field.
    pub fn field(&self, y: &[f64], omega: f64) -> Vec<f64> {
        let q = self.q(y);
        let p = self.point(&q, 0.0);
        let mut out = vec![0.0; self.dim()];
        for (k, &i) in self.pos.iter().enumerate() {
            let g = self.r_at(&p, i) + self.forcing[k] - I * self.ratios[k] * omega * q[k];
            out[2 * k] = g.re;
            out[2 * k + 1] = g.im;
        }
        out
    }

    /// Jacobian of [`field`](Self::field) in `y`.
    pub fn jacobian(&self, y: &[f64], omega: f64) -> DMatrix<f64> {
        let q = self.q(y);
        let p = self.point(&q, 0.0);
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for (k, &i) in self.pos.iter().enumerate() {
            for (l, &j) in self.pos.iter().enumerate() {
                let (d, dc) = (self.dr_at(&p, i, j), self.dr_at(&p, i, self.map[j]));
                let mut da = d + dc;
                let mut db = I * (d - dc);
                if k == l {
                    da -= I * self.ratios[k] * omega;
                    db += self.ratios[k] * omega;
                }
                jac[(2 * k, 2 * l)] = da.re;
                jac[(2 * k + 1, 2 * l)] = da.im;
                jac[(2 * k, 2 * l + 1)] = db.re;
                jac[(2 * k + 1, 2 * l + 1)] = db.im;
            }
        }
        jac
    }

    /// Derivative of the field in `Ω`.
    pub fn d_omega(&self, y: &[f64]) -> Vec<f64> {
        let q = self.q(y);
        let mut out = vec![0.0; self.dim()];
        for k in 0..q.len() {
            let g = -I * self.ratios[k] * q[k];
            out[2 * k] = g.re;
            out[2 * k + 1] = g.im;
        }
        out
    }

    /// Non-rotating field for `y = (Re p_k, Im p_k)` at time `t`.
    pub fn field_fixed(&self, y: &[f64], omega: f64, t: f64) -> Vec<f64> {
        let q = self.q(y);
        let p = self.point(&q, 0.0);
        let e = C64::from_polar(1.0, omega * t);
        let mut out = vec![0.0; self.dim()];
        for (k, &i) in self.pos.iter().enumerate() {
            let g = self.r_at(&p, i) + self.forcing[k] * e;
            out[2 * k] = g.re;
            out[2 * k + 1] = g.im;
        }
        out
    }

    /// `R_i(p)/p_i` on pair `k` alone at real amplitude `rho`.
    pub fn backbone_ratio(&self, k: usize, rho: f64) -> C64 {
        let mut q = vec![C64::new(0.0, 0.0); self.pos.len()];
        q[k] = C64::new(rho, 0.0);
        let p = self.point(&q, 0.0);
        if rho == 0.0 {
            return self.lambdas[self.pos[k]];
        }
        self.r_at(&p, self.pos[k]) / rho
    }

    /// Least common period of the rotating coordinates, in units of `2π` of `φ`.
    pub fn period_factor(&self) -> u32 {
        let mut l = 1u32;
        for r in &self.ratios {
            for b in 1..=4u32 {
                if ((r * b as f64).round() - r * b as f64).abs() < 1e-12 {
                    l = lcm(l, b);
                    break;
                }
            }
        }
        l
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    let g = |mut x: u32, mut y: u32| {
        while y != 0 {
            (x, y) = (y, x % y);
        }
        x
    };
    a / g(a, b) * b
}
