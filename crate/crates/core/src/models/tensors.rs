use crate::error::Result;
use crate::linalg::C64;
use crate::model::Nonlinearity;

/// Polynomial internal force with explicit sparse tensors over `z = (x, ẋ)`:
/// `f_i(z) = Σ q_ijk z_j z_k + Σ c_ijkl z_j z_k z_l`.
#[derive(Clone, Debug, Default)]
pub struct PolynomialForce {
    n: usize,
    quadratic: Vec<(usize, usize, usize, f64)>,
    cubic: Vec<(usize, usize, usize, usize, f64)>,
    label: String,
}

impl PolynomialForce {
    pub fn new(n: usize, label: impl Into<String>) -> Self {
        Self {
            n,
            label: label.into(),
            ..Default::default()
        }
    }

    pub fn dofs(&self) -> usize {
        self.n
    }

    pub fn add_quadratic(&mut self, i: usize, j: usize, k: usize, c: f64) {
        assert!(i < self.n && j < 2 * self.n && k < 2 * self.n);
        if c != 0.0 {
            self.quadratic.push((i, j, k, c));
        }
    }

    pub fn add_cubic(&mut self, i: usize, j: usize, k: usize, l: usize, c: f64) {
        assert!(i < self.n && j < 2 * self.n && k < 2 * self.n && l < 2 * self.n);
        if c != 0.0 {
            self.cubic.push((i, j, k, l, c));
        }
    }

    pub fn quadratic_terms(&self) -> &[(usize, usize, usize, f64)] {
        &self.quadratic
    }

    pub fn cubic_terms(&self) -> &[(usize, usize, usize, usize, f64)] {
        &self.cubic
    }

    pub fn eval_state(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(i, j, k, c) in &self.quadratic {
            out[i] += c * z[j] * z[k];
        }
        for &(i, j, k, l, c) in &self.cubic {
            out[i] += c * z[j] * z[k] * z[l];
        }
        out
    }

    pub fn eval_state_complex(&self, z: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for &(i, j, k, c) in &self.quadratic {
            out[i] += z[j] * z[k] * c;
        }
        for &(i, j, k, l, c) in &self.cubic {
            out[i] += z[j] * z[k] * z[l] * c;
        }
        out
    }
}

impl Nonlinearity for PolynomialForce {
    fn dofs(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64], xdot: &[f64]) -> Result<Vec<f64>> {
        let z: Vec<f64> = x.iter().chain(xdot).copied().collect();
        Ok(self.eval_state(&z))
    }

    fn eval_complex(&self, x: &[C64], xdot: &[C64]) -> Option<Result<Vec<C64>>> {
        let z: Vec<C64> = x.iter().chain(xdot).copied().collect();
        Some(Ok(self.eval_state_complex(&z)))
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_terms() {
        let mut f = PolynomialForce::new(2, "t");
        f.add_quadratic(0, 0, 1, 2.0);
        f.add_cubic(1, 3, 3, 0, -1.0);
        let out = f.eval(&[1.0, 2.0], &[0.0, 3.0]).unwrap();
        assert_eq!(out, vec![4.0, -9.0]);
        let c = f
            .eval_complex(&[C64::new(0.0, 1.0), C64::new(1.0, 0.0)], &[C64::new(0.0, 0.0); 2])
            .unwrap()
            .unwrap();
        assert_eq!(c[0], C64::new(0.0, 2.0));
    }
}
