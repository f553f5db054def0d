use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SsmError};
use crate::model::{FnNonlinearity, SecondOrderModel};

use super::{params, BuiltinModel, PolynomialForce};

/// Fixed–fixed chain of point masses. Element `e` joins node `e − 1` to node
/// `e` (walls at both ends) and carries the force
/// `k δ + k₂ δ² + k₃ δ³ + c₂ δ δ̇ + c₃ δ² δ̇` with `δ` the element elongation.
/// Damping is Rayleigh, `C = αM + βK`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainParams {
    pub masses: Vec<f64>,
    pub k_lin: Vec<f64>,
    pub k2: Vec<f64>,
    pub k3: Vec<f64>,
    pub c2: Vec<f64>,
    pub c3: Vec<f64>,
    pub rayleigh: (f64, f64),
}

impl ChainParams {
    pub fn uniform(n: usize, k_lin: f64, k2: f64, k3: f64, rayleigh: (f64, f64)) -> Self {
        Self {
            masses: vec![1.0; n],
            k_lin: vec![k_lin; n + 1],
            k2: vec![k2; n + 1],
            k3: vec![k3; n + 1],
            c2: vec![0.0; n + 1],
            c3: vec![0.0; n + 1],
            rayleigh,
        }
    }

    pub fn dofs(&self) -> usize {
        self.masses.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.dofs();
        if n == 0 {
            return Err(SsmError::InvalidInput("chain needs at least one mass".into()));
        }
        for (name, v) in [
            ("k_lin", &self.k_lin),
            ("k2", &self.k2),
            ("k3", &self.k3),
            ("c2", &self.c2),
            ("c3", &self.c3),
        ] {
            if v.len() != n + 1 {
                return Err(SsmError::InvalidInput(format!(
                    "{name} needs {} element values, got {}",
                    n + 1,
                    v.len()
                )));
            }
        }
        Ok(())
    }
}

/// `(left, right)` node of element `e`; `None` is a wall.
fn ends(e: usize, n: usize) -> (Option<usize>, Option<usize>) {
    ((e > 0).then(|| e - 1), (e < n).then_some(e))
}

fn elongation(z: &[f64], left: Option<usize>, right: Option<usize>, offset: usize) -> f64 {
    right.map_or(0.0, |r| z[offset + r]) - left.map_or(0.0, |l| z[offset + l])
}

pub fn chain_from_params(p: &ChainParams, id: &str) -> Result<BuiltinModel> {
    p.check()?;
    let n = p.dofs();
    let mut k = DMatrix::zeros(n, n);
    for e in 0..=n {
        let (l, r) = ends(e, n);
        let d: Vec<(usize, f64)> = l.map(|l| (l, -1.0)).into_iter().chain(r.map(|r| (r, 1.0))).collect();
        for &(a, da) in &d {
            for &(b, db) in &d {
                k[(a, b)] += p.k_lin[e] * da * db;
            }
        }
    }
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(p.masses.clone()));
    let c = &m * p.rayleigh.0 + &k * p.rayleigh.1;

    let elem = p.clone();
    let nl = Arc::new(FnNonlinearity::new(n, id.to_string(), move |x: &[f64], v: &[f64]| {
        let mut f = vec![0.0; n];
        for e in 0..=n {
            let (l, r) = ends(e, n);
            let d = elongation(x, l, r, 0);
            let dv = elongation(v, l, r, 0);
            let s = elem.k2[e] * d * d + elem.k3[e] * d * d * d + elem.c2[e] * d * dv + elem.c3[e] * d * d * dv;
            if let Some(r) = r {
                f[r] += s;
            }
            if let Some(l) = l {
                f[l] -= s;
            }
        }
        f
    }));

    // tensors over z = (x, ẋ)
    let mut t = PolynomialForce::new(n, format!("{id}-tensors"));
    for e in 0..=n {
        let (l, r) = ends(e, n);
        let d: Vec<(usize, f64)> = l.map(|l| (l, -1.0)).into_iter().chain(r.map(|r| (r, 1.0))).collect();
        let rows: Vec<(usize, f64)> = d.clone();
        for &(row, sign) in &rows {
            for &(a, da) in &d {
                for &(b, db) in &d {
                    t.add_quadratic(row, a, b, sign * p.k2[e] * da * db);
                    t.add_quadratic(row, a, n + b, sign * p.c2[e] * da * db);
                    for &(c, dc) in &d {
                        t.add_cubic(row, a, b, c, sign * p.k3[e] * da * db * dc);
                        t.add_cubic(row, a, b, n + c, sign * p.c3[e] * da * db * dc);
                    }
                }
            }
        }
    }

    let model = SecondOrderModel::from_dense(&m, &c, &k, nl)?;
    Ok(BuiltinModel {
        id: id.into(),
        params: params(&[
            ("n", n as f64),
            ("rayleigh_alpha", p.rayleigh.0),
            ("rayleigh_beta", p.rayleigh.1),
        ]),
        model,
        tensors: Some(Arc::new(t)),
        distributed_load: None,
    })
}

/// Uniform chain with unit masses and Rayleigh damping `(α, β)`.
pub fn make_spring_chain(n: usize, k_lin: f64, k2: f64, k3: f64, damping: (f64, f64)) -> Result<BuiltinModel> {
    let mut b = chain_from_params(&ChainParams::uniform(n, k_lin, k2, k3, damping), "chain")?;
    b.params.extend(params(&[("k_lin", k_lin), ("k2", k2), ("k3", k3)]));
    Ok(b)
}

/// Randomized chain with mixed quadratic, cubic, and velocity-dependent
/// element forces.
pub fn random_chain(n: usize, seed: u64) -> Result<BuiltinModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..=n).map(|_| rng.gen_range(lo..hi)).collect() };
    let p = ChainParams {
        masses: vec![1.0; n],
        k_lin: draw(0.5, 2.0),
        k2: draw(-0.5, 0.5),
        k3: draw(-0.5, 0.5),
        c2: draw(-0.1, 0.1),
        c3: draw(-0.1, 0.1),
        rayleigh: (0.01, 0.005),
    };
    let mut b = chain_from_params(&p, "random-chain")?;
    b.params.insert("seed".into(), seed as f64);
    Ok(b)
}

/// Two-mass chain with `K = [[2.5, −1.5], [−1.5, 2.5]]` (frequencies 1 and 2)
/// and a quadratic left wall spring coupling the modes.
pub fn internally_resonant_chain(k2: f64, k3: f64, rayleigh: (f64, f64)) -> Result<BuiltinModel> {
    let p = ChainParams {
        masses: vec![1.0, 1.0],
        k_lin: vec![1.0, 1.5, 1.0],
        k2: vec![k2, 0.0, 0.0],
        k3: vec![k3, k3, k3],
        c2: vec![0.0; 3],
        c3: vec![0.0; 3],
        rayleigh,
    };
    let mut b = chain_from_params(&p, "chain-1to2")?;
    b.params.extend(params(&[("k2", k2), ("k3", k3)]));
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csc_to_dense;

    #[test]
    fn symmetric_two_mass_frequencies() {
        let b = make_spring_chain(2, 3.0, 0.0, 0.0, (0.0, 0.0)).unwrap();
        let k = csc_to_dense(b.model.stiffness());
        let mut ev: Vec<f64> = k.symmetric_eigenvalues().iter().map(|v| v.sqrt()).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 3f64.sqrt()).abs() < 1e-12);
        assert!((ev[1] - 9f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn linear_when_no_nonlinear_springs() {
        let b = make_spring_chain(3, 1.0, 0.0, 0.0, (0.01, 0.0)).unwrap();
        let f = b.model.eval_nonlinearity(&[0.3, -0.2, 0.5], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f, vec![0.0; 3]);
    }

    #[test]
    fn internal_resonance_frequencies() {
        let b = internally_resonant_chain(0.5, 0.0, (0.0, 0.0)).unwrap();
        let mut ev: Vec<f64> = csc_to_dense(b.model.stiffness()).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_lengths() {
        let mut p = ChainParams::uniform(2, 1.0, 0.0, 0.0, (0.0, 0.0));
        p.k3.pop();
        assert!(chain_from_params(&p, "x").is_err());
    }
}
