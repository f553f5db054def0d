//! Mechanical system definition, the black-box nonlinearity contract, and the
//! first-order lift `B ż = A z + F(z) + ε F^ext`.

mod io;
mod validate;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::linalg::{csc_to_dense, CVector, C64};

pub use io::{read_matrix_market, read_vector_file, write_matrix_market, write_vector_file};
pub use validate::{validate_nonlinearity, ValidationOptions, ValidationReport};

/// Black-box internal force `f(x, ẋ)`.
///
/// Implementations only have to be correct for real inputs. Providers that can
/// evaluate complex inputs natively may override [`Nonlinearity::eval_complex`].
pub trait Nonlinearity: Send + Sync {
    /// Number of mechanical degrees of freedom `n`.
    fn dofs(&self) -> usize;

    fn eval(&self, x: &[f64], xdot: &[f64]) -> Result<Vec<f64>>;

    /// Evaluate a batch of states `z = (x, ẋ)` of length `2n`.
    fn eval_batch(&self, states: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.dofs();
        states.iter().map(|z| self.eval(&z[..n], &z[n..])).collect()
    }

    fn eval_complex(&self, _x: &[C64], _xdot: &[C64]) -> Option<Result<Vec<C64>>> {
        None
    }

    /// Whether calls must be serialized (stateful external solvers).
    fn is_serial(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        "black-box".to_string()
    }
}

/// Closure-backed nonlinearity; real inputs only.
pub struct FnNonlinearity<F> {
    n: usize,
    f: F,
    label: String,
}

impl<F> FnNonlinearity<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(n: usize, label: impl Into<String>, f: F) -> Self {
        Self {
            n,
            f,
            label: label.into(),
        }
    }
}

impl<F> Nonlinearity for FnNonlinearity<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync,
{
    fn dofs(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64], xdot: &[f64]) -> Result<Vec<f64>> {
        let out = (self.f)(x, xdot);
        if out.len() != self.n {
            return Err(SsmError::Evaluation {
                message: format!("returned {} entries, expected {}", out.len(), self.n),
                input: x.iter().chain(xdot).copied().collect(),
            });
        }
        Ok(out)
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

/// The zero nonlinearity (linear systems).
#[derive(Clone, Copy, Debug)]
pub struct ZeroNonlinearity(pub usize);

impl Nonlinearity for ZeroNonlinearity {
    fn dofs(&self) -> usize {
        self.0
    }

    fn eval(&self, _x: &[f64], _xdot: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.0])
    }

    fn eval_complex(&self, _x: &[C64], _xdot: &[C64]) -> Option<Result<Vec<C64>>> {
        Some(Ok(vec![C64::new(0.0, 0.0); self.0]))
    }

    fn name(&self) -> String {
        "zero".into()
    }
}

/// Harmonic forcing `ε f^ext(Ωt) = ε (fᵃ e^{iΩt} + conj(fᵃ) e^{-iΩt})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub amplitude: Vec<C64>,
    pub epsilon: f64,
}

impl ForcingSpec {
    pub fn new(amplitude: Vec<C64>, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(SsmError::InvalidInput(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(Self { amplitude, epsilon })
    }

    /// Forcing `amp·cos(Ωt)` on the given DOFs, i.e. `fᵃ = amp/2`.
    pub fn cosine(n: usize, loads: &[(usize, f64)], epsilon: f64) -> Result<Self> {
        let mut amplitude = vec![C64::new(0.0, 0.0); n];
        for &(dof, amp) in loads {
            if dof >= n {
                return Err(SsmError::InvalidInput(format!("load DOF {dof} out of range")));
            }
            amplitude[dof] += C64::new(0.5 * amp, 0.0);
        }
        Self::new(amplitude, epsilon)
    }

    /// Physical force at phase `φ = Ωt` (without the ε factor).
    pub fn physical(&self, phi: f64) -> Vec<f64> {
        let e = C64::from_polar(1.0, phi);
        self.amplitude.iter().map(|a| 2.0 * (a * e).re).collect()
    }
}

/// `M ẍ + C ẋ + K x + f(x, ẋ) = ε f^ext(Ωt)`.
#[derive(Clone)]
pub struct SecondOrderModel {
    n: usize,
    mass: CscMatrix<f64>,
    damping: CscMatrix<f64>,
    stiffness: CscMatrix<f64>,
    nonlinearity: Arc<dyn Nonlinearity>,
    forcing: Option<ForcingSpec>,
    real_only: bool,
    validation: ValidationReport,
}

impl fmt::Debug for SecondOrderModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondOrderModel")
            .field("n", &self.n)
            .field("nonlinearity", &self.nonlinearity.name())
            .field("real_only", &self.real_only)
            .finish()
    }
}

impl SecondOrderModel {
    pub fn new(
        mass: CscMatrix<f64>,
        damping: CscMatrix<f64>,
        stiffness: CscMatrix<f64>,
        nonlinearity: Arc<dyn Nonlinearity>,
    ) -> Result<Self> {
        Self::with_options(mass, damping, stiffness, nonlinearity, &ValidationOptions::default())
    }

    pub fn from_dense(
        mass: &DMatrix<f64>,
        damping: &DMatrix<f64>,
        stiffness: &DMatrix<f64>,
        nonlinearity: Arc<dyn Nonlinearity>,
    ) -> Result<Self> {
        use crate::linalg::dense_to_csc;
        Self::new(
            dense_to_csc(mass),
            dense_to_csc(damping),
            dense_to_csc(stiffness),
            nonlinearity,
        )
    }

    pub fn with_options(
        mass: CscMatrix<f64>,
        damping: CscMatrix<f64>,
        stiffness: CscMatrix<f64>,
        nonlinearity: Arc<dyn Nonlinearity>,
        options: &ValidationOptions,
    ) -> Result<Self> {
        let n = nonlinearity.dofs();
        for (name, m) in [("M", &mass), ("C", &damping), ("K", &stiffness)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(SsmError::InvalidInput(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        check_mass(&mass)?;
        let mut model = Self {
            n,
            mass,
            damping,
            stiffness,
            nonlinearity,
            forcing: None,
            real_only: true,
            validation: ValidationReport::default(),
        };
        if options.enabled {
            let report = validate_nonlinearity(&model, options.probe_scale, options.tol, options.seed)?;
            if !report.zero_at_origin {
                return Err(SsmError::InvalidInput(format!(
                    "nonlinearity has a constant term: |f(0,0)| = {:.3e}",
                    report.origin_norm
                )));
            }
            if report.linear_part_flag {
                return Err(SsmError::InvalidInput(format!(
                    "nonlinearity has a linear part: relative estimate {:.3e}",
                    report.linear_part_rel
                )));
            }
            model.validation = report;
        }
        Ok(model)
    }

    pub fn with_forcing(mut self, forcing: ForcingSpec) -> Result<Self> {
        if forcing.amplitude.len() != self.n {
            return Err(SsmError::InvalidInput(format!(
                "forcing vector has {} entries, model has {} DOFs",
                forcing.amplitude.len(),
                self.n
            )));
        }
        self.forcing = Some(forcing);
        Ok(self)
    }

    /// Route complex evaluations through native complex support instead of the
    /// real/imaginary decomposition. Requires [`Nonlinearity::eval_complex`].
    pub fn with_real_only(mut self, real_only: bool) -> Result<Self> {
        if !real_only {
            let zeros = vec![C64::new(0.0, 0.0); self.n];
            if self.nonlinearity.eval_complex(&zeros, &zeros).is_none() {
                return Err(SsmError::InvalidInput(
                    "nonlinearity does not support complex inputs; real_only must stay on".into(),
                ));
            }
        }
        self.real_only = real_only;
        Ok(self)
    }

    pub fn dofs(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> &CscMatrix<f64> {
        &self.mass
    }

    pub fn damping(&self) -> &CscMatrix<f64> {
        &self.damping
    }

    pub fn stiffness(&self) -> &CscMatrix<f64> {
        &self.stiffness
    }

    pub fn nonlinearity(&self) -> &Arc<dyn Nonlinearity> {
        &self.nonlinearity
    }

    pub fn forcing(&self) -> Option<&ForcingSpec> {
        self.forcing.as_ref()
    }

    pub fn real_only(&self) -> bool {
        self.real_only
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.validation
    }

    pub fn eval_nonlinearity(&self, x: &[f64], xdot: &[f64]) -> Result<Vec<f64>> {
        self.nonlinearity.eval(x, xdot)
    }

    /// `(‖C − Cᵀ‖/‖C‖, ‖K − Kᵀ‖/‖K‖)` in the Frobenius norm.
    pub fn asymmetry(&self) -> (f64, f64) {
        let rel = |m: &CscMatrix<f64>| {
            let d = csc_to_dense(m);
            let n = d.norm();
            if n == 0.0 {
                0.0
            } else {
                (&d - d.transpose()).norm() / n
            }
        };
        (rel(&self.damping), rel(&self.stiffness))
    }
}

fn check_mass(mass: &CscMatrix<f64>) -> Result<()> {
    let dense = csc_to_dense(mass);
    let scale = dense.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Err(SsmError::SingularMass("LU of M: matrix is zero".into()));
    }
    let lu = dense.lu();
    let u = lu.u();
    let min_pivot = (0..u.nrows()).map(|k| u[(k, k)].abs()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-14 * scale {
        return Err(SsmError::SingularMass(format!(
            "LU of M: pivot {min_pivot:.3e} relative to scale {scale:.3e}"
        )));
    }
    Ok(())
}

/// First-order lift with `N = 2n`:
/// `A = [[-K, 0], [0, M]]`, `B = [[C, M], [M, 0]]`, `F(z) = [-f(x, ẋ); 0]`.
#[derive(Clone)]
pub struct FirstOrderSystem {
    n_dof: usize,
    a: CscMatrix<f64>,
    b: CscMatrix<f64>,
    nonlinearity: Arc<dyn Nonlinearity>,
    real_only: bool,
    fext: Option<CVector>,
    epsilon: f64,
}

impl fmt::Debug for FirstOrderSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstOrderSystem")
            .field("n_state", &(2 * self.n_dof))
            .field("nonlinearity", &self.nonlinearity.name())
            .finish()
    }
}

pub fn lift_to_first_order(model: &SecondOrderModel) -> FirstOrderSystem {
    let n = model.n;
    let mut a = CooMatrix::new(2 * n, 2 * n);
    let mut b = CooMatrix::new(2 * n, 2 * n);
    for (i, j, v) in model.stiffness.triplet_iter() {
        a.push(i, j, -*v);
    }
    for (i, j, v) in model.mass.triplet_iter() {
        a.push(n + i, n + j, *v);
        b.push(i, n + j, *v);
        b.push(n + i, j, *v);
    }
    for (i, j, v) in model.damping.triplet_iter() {
        b.push(i, j, *v);
    }
    let fext = model.forcing.as_ref().map(|f| {
        let mut v = CVector::zeros(2 * n);
        for (k, a) in f.amplitude.iter().enumerate() {
            v[k] = *a;
        }
        v
    });
    FirstOrderSystem {
        n_dof: n,
        a: CscMatrix::from(&a),
        b: CscMatrix::from(&b),
        nonlinearity: model.nonlinearity.clone(),
        real_only: model.real_only,
        fext,
        epsilon: model.forcing.as_ref().map_or(0.0, |f| f.epsilon),
    }
}

impl FirstOrderSystem {
    pub fn n_state(&self) -> usize {
        2 * self.n_dof
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn a(&self) -> &CscMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &CscMatrix<f64> {
        &self.b
    }

    pub fn real_only(&self) -> bool {
        self.real_only
    }

    pub fn nonlinearity(&self) -> &Arc<dyn Nonlinearity> {
        &self.nonlinearity
    }

    /// Lifted forcing amplitude `Fᵃ = [fᵃ; 0]`, if the model is forced.
    pub fn forcing_amplitude(&self) -> Option<&CVector> {
        self.fext.as_ref()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Replace the lifted forcing (used by analyses that sweep the load).
    pub fn set_forcing(&mut self, amplitude: CVector, epsilon: f64) {
        assert_eq!(amplitude.len(), self.n_state());
        self.fext = Some(amplitude);
        self.epsilon = epsilon;
    }

    /// `F(z)` for a real state.
    pub fn eval_f(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_dof;
        let f = self.nonlinearity.eval(&z[..n], &z[n..])?;
        let mut out = vec![0.0; 2 * n];
        for (o, v) in out.iter_mut().zip(f) {
            *o = -v;
        }
        Ok(out)
    }

    /// `F(z)` for a batch of real states.
    pub fn eval_f_batch(&self, states: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.n_dof;
        let raw = if self.nonlinearity.is_serial() || states.len() < 2 {
            self.nonlinearity.eval_batch(states)?
        } else {
            use rayon::prelude::*;
            let chunk = (states.len() / rayon::current_num_threads().max(1)).max(1);
            let parts: Result<Vec<Vec<Vec<f64>>>> = states
                .par_chunks(chunk)
                .map(|c| self.nonlinearity.eval_batch(c))
                .collect();
            parts?.into_iter().flatten().collect()
        };
        Ok(raw
            .into_iter()
            .map(|f| {
                let mut out = vec![0.0; 2 * n];
                for (o, v) in out.iter_mut().zip(f) {
                    *o = -v;
                }
                out
            })
            .collect())
    }

    /// `F(z)` for a complex state via native complex support, if available.
    pub fn eval_f_complex(&self, z: &[C64]) -> Option<Result<Vec<C64>>> {
        let n = self.n_dof;
        let f = self.nonlinearity.eval_complex(&z[..n], &z[n..])?;
        Some(f.map(|f| {
            let mut out = vec![C64::new(0.0, 0.0); 2 * n];
            for (o, v) in out.iter_mut().zip(f) {
                *o = -v;
            }
            out
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csc_to_dense;
    use nalgebra::dmatrix;

    fn cubic_1dof() -> Arc<dyn Nonlinearity> {
        Arc::new(FnNonlinearity::new(1, "x^3", |x: &[f64], _: &[f64]| vec![x[0].powi(3)]))
    }

    #[test]
    fn lift_block_structure_1dof() {
        let model = SecondOrderModel::from_dense(
            &dmatrix![1.0],
            &dmatrix![0.02],
            &dmatrix![1.0],
            cubic_1dof(),
        )
        .unwrap();
        let sys = lift_to_first_order(&model);
        assert_eq!(csc_to_dense(sys.a()), dmatrix![-1.0, 0.0; 0.0, 1.0]);
        assert_eq!(csc_to_dense(sys.b()), dmatrix![0.02, 1.0; 1.0, 0.0]);
        assert_eq!(sys.eval_f(&[2.0, 0.0]).unwrap(), vec![-8.0, 0.0]);
    }

    #[test]
    fn lift_keeps_asymmetry() {
        let k = dmatrix![1.0, 0.3; -0.1, 2.0];
        let model = SecondOrderModel::from_dense(
            &DMatrix::identity(2, 2),
            &DMatrix::zeros(2, 2),
            &k,
            Arc::new(ZeroNonlinearity(2)),
        )
        .unwrap();
        let a = csc_to_dense(lift_to_first_order(&model).a());
        assert_eq!(a.view((0, 0), (2, 2)), -k);
        assert_eq!(a.view((2, 2), (2, 2)), DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn singular_mass_is_rejected() {
        let err = SecondOrderModel::from_dense(
            &dmatrix![1.0, 1.0; 1.0, 1.0],
            &DMatrix::zeros(2, 2),
            &DMatrix::identity(2, 2),
            Arc::new(ZeroNonlinearity(2)),
        )
        .unwrap_err();
        assert!(matches!(err, SsmError::SingularMass(ref s) if s.contains("LU")));
    }

    #[test]
    fn linear_or_constant_nonlinearity_is_rejected() {
        let lin = Arc::new(FnNonlinearity::new(1, "x", |x: &[f64], _: &[f64]| vec![x[0]]));
        assert!(SecondOrderModel::from_dense(&dmatrix![1.0], &dmatrix![0.0], &dmatrix![4.0], lin).is_err());
        let konst = Arc::new(FnNonlinearity::new(1, "1", |_: &[f64], _: &[f64]| vec![1.0]));
        assert!(SecondOrderModel::from_dense(&dmatrix![1.0], &dmatrix![0.0], &dmatrix![4.0], konst).is_err());
    }

    #[test]
    fn real_only_toggle_requires_complex_support() {
        let model = SecondOrderModel::from_dense(&dmatrix![1.0], &dmatrix![0.0], &dmatrix![1.0], cubic_1dof()).unwrap();
        assert!(model.clone().with_real_only(false).is_err());
        let zero = SecondOrderModel::from_dense(
            &dmatrix![1.0],
            &dmatrix![0.0],
            &dmatrix![1.0],
            Arc::new(ZeroNonlinearity(1)),
        )
        .unwrap();
        assert!(!zero.with_real_only(false).unwrap().real_only());
    }

    #[test]
    fn forcing_lift_and_physical_value() {
        let f = ForcingSpec::cosine(2, &[(1, 3.0)], 0.1).unwrap();
        assert_eq!(f.physical(0.0), vec![0.0, 3.0]);
        assert!(ForcingSpec::new(vec![], -1.0).is_err());
        let model = SecondOrderModel::from_dense(
            &DMatrix::identity(2, 2),
            &DMatrix::zeros(2, 2),
            &DMatrix::identity(2, 2),
            Arc::new(ZeroNonlinearity(2)),
        )
        .unwrap()
        .with_forcing(f)
        .unwrap();
        let sys = lift_to_first_order(&model);
        let fa = sys.forcing_amplitude().unwrap();
        assert_eq!(fa[1], C64::new(1.5, 0.0));
        assert_eq!(fa[3], C64::new(0.0, 0.0));
        assert_eq!(sys.epsilon(), 0.1);
    }
}
