//! Master spectral subspace of the pencil `(A, B)`.
//!
//! Candidate eigenvalues come from a dense eigen-decomposition of `B⁻¹A` for
//! moderate sizes, or from shift-invert Arnoldi on `(A - σB)⁻¹B` above
//! [`EigOptions::dense_limit`]. Every selected eigenpair is then refined by
//! two-sided inverse iteration, and left eigenvectors are scaled so that
//! `w_j* B v_i = δ_ij`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::linalg::{
    complexify, csc_mul, csc_norm1, csc_to_dense, shifted_pencil, CMatrix, CVector, C64,
};
use crate::model::FirstOrderSystem;

/// Which eigenvalues span the master subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    /// The `M` eigenvalues nearest the shift (shift 0 picks the slowest modes).
    Nearest { shift_re: f64, shift_im: f64 },
    /// Oscillatory pairs by index, counting pairs by ascending frequency from 0.
    Pairs(Vec<usize>),
    /// All pairs whose frequency `Im λ` lies in `[lo, hi]`.
    FrequencyWindow { lo: f64, hi: f64 },
}

impl Default for ModeSelection {
    fn default() -> Self {
        ModeSelection::Nearest {
            shift_re: 0.0,
            shift_im: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigOptions {
    pub selection: ModeSelection,
    /// Above this state dimension the shift-invert Arnoldi path is used.
    pub dense_limit: usize,
    /// Relative eigen-residual tolerance.
    pub tol: f64,
    pub max_refine: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            selection: ModeSelection::default(),
            dense_limit: 2000,
            tol: 1e-10,
            max_refine: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MasterSubspace {
    lambdas: Vec<C64>,
    v: CMatrix,
    w: CMatrix,
    conj_map: Option<Vec<usize>>,
}

impl MasterSubspace {
    /// Assemble from precomputed data; `w` is binormalized against `v`.
    pub fn from_parts(lambdas: Vec<C64>, v: CMatrix, w: CMatrix, b: &CscMatrix<f64>) -> Result<Self> {
        let (v, w) = binormalize(v, w, b)?;
        let conj_map = conjugate_map(&lambdas, &v);
        Ok(Self {
            lambdas,
            v,
            w,
            conj_map,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n_state(&self) -> usize {
        self.v.nrows()
    }

    pub fn lambdas(&self) -> &[C64] {
        &self.lambdas
    }

    /// Right eigenvectors; also the order-one SSM coefficients `W_I`.
    pub fn right(&self) -> &CMatrix {
        &self.v
    }

    pub fn left(&self) -> &CMatrix {
        &self.w
    }

    pub fn v(&self, j: usize) -> CVector {
        self.v.column(j).into_owned()
    }

    pub fn w(&self, j: usize) -> CVector {
        self.w.column(j).into_owned()
    }

    /// `map[j]` is the index whose eigenpair is the complex conjugate of `j`,
    /// when the subspace is closed under conjugation.
    pub fn conjugate_map(&self) -> Option<&[usize]> {
        self.conj_map.as_deref()
    }

    /// `max |w_j* B v_i - δ_ij|`.
    pub fn biorthogonality_error(&self, b: &CscMatrix<f64>) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..self.dim() {
            let bv = csc_mul(b, &self.v(i));
            for j in 0..self.dim() {
                let d = self.w.column(j).dotc(&bv) - if i == j { 1.0 } else { 0.0 };
                err = err.max(d.norm());
            }
        }
        err
    }

    /// Write `<stem>.json` (metadata, eigenvalues) and `<stem>.bin` (V and W).
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let meta = SubspaceMeta {
            m_dim: self.dim(),
            n_state: self.n_state(),
            lambdas: self.lambdas.iter().map(|l| [l.re, l.im]).collect(),
            conjugate_map: self.conj_map.clone(),
        };
        fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&meta).map_err(|e| SsmError::Parse(e.to_string()))?,
        )?;
        let mut bytes = Vec::with_capacity(32 * self.v.len());
        for mat in [&self.v, &self.w] {
            for z in mat.iter() {
                bytes.extend_from_slice(&z.re.to_le_bytes());
                bytes.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        fs::write(dir.join(format!("{stem}.bin")), bytes)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: SubspaceMeta = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)
            .map_err(|e| SsmError::Parse(e.to_string()))?;
        let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
        let len = meta.m_dim * meta.n_state;
        if bytes.len() != 2 * len * 16 {
            return Err(SsmError::Parse("subspace sidecar has the wrong size".into()));
        }
        let read = |k: usize| {
            let re = f64::from_le_bytes(bytes[16 * k..16 * k + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[16 * k + 8..16 * k + 16].try_into().unwrap());
            C64::new(re, im)
        };
        let v = CMatrix::from_iterator(meta.n_state, meta.m_dim, (0..len).map(read));
        let w = CMatrix::from_iterator(meta.n_state, meta.m_dim, (len..2 * len).map(read));
        Ok(Self {
            lambdas: meta.lambdas.iter().map(|l| C64::new(l[0], l[1])).collect(),
            v,
            w,
            conj_map: meta.conjugate_map,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SubspaceMeta {
    m_dim: usize,
    n_state: usize,
    lambdas: Vec<[f64; 2]>,
    conjugate_map: Option<Vec<usize>>,
}

/// Scale left eigenvectors so that `w_j* B v_i = δ_ij`; `V` is left untouched.
pub fn binormalize(v: CMatrix, mut w: CMatrix, b: &CscMatrix<f64>) -> Result<(CMatrix, CMatrix)> {
    if v.shape() != w.shape() {
        return Err(SsmError::InvalidInput("V and W_left have different shapes".into()));
    }
    for j in 0..v.ncols() {
        let bv = csc_mul(b, &v.column(j).into_owned());
        let s = w.column(j).dotc(&bv);
        let scale = w.column(j).norm() * bv.norm();
        if !(s.norm() > 1e-12 * scale) {
            return Err(SsmError::Defective(format!(
                "w_{j}* B v_{j} = {:.3e} is negligible relative to {:.3e}",
                s.norm(),
                scale
            )));
        }
        let c = s.conj();
        w.column_mut(j).iter_mut().for_each(|z| *z /= c);
    }
    Ok((v, w))
}

pub fn solve_master_subspace(sys: &FirstOrderSystem, m_dim: usize, shift: C64) -> Result<MasterSubspace> {
    let options = EigOptions {
        selection: ModeSelection::Nearest {
            shift_re: shift.re,
            shift_im: shift.im,
        },
        ..Default::default()
    };
    solve_master_subspace_with(sys, m_dim, &options)
}

pub fn solve_master_subspace_with(
    sys: &FirstOrderSystem,
    m_dim: usize,
    options: &EigOptions,
) -> Result<MasterSubspace> {
    let n = sys.n_state();
    if m_dim < 2 || m_dim % 2 != 0 || m_dim > n {
        return Err(SsmError::InvalidInput(format!(
            "subspace dimension must be even and in [2, {n}], got {m_dim}"
        )));
    }
    let shift = match &options.selection {
        ModeSelection::Nearest { shift_re, shift_im } => C64::new(*shift_re, *shift_im),
        _ => C64::new(0.0, 0.0),
    };
    let candidates = if n <= options.dense_limit {
        dense_eigenvalues(sys.a(), sys.b())?
    } else {
        let want = match &options.selection {
            ModeSelection::Nearest { .. } => m_dim,
            ModeSelection::Pairs(idx) => 2 * (idx.iter().max().copied().unwrap_or(0) + 1),
            ModeSelection::FrequencyWindow { .. } => m_dim.max(16),
        };
        arnoldi_eigenvalues(sys.a(), sys.b(), shift, want)?
    };
    let chosen = select(&candidates, m_dim, &options.selection, shift)?;

    let a_dense = complexify(&csc_to_dense(sys.a()));
    let b_dense = complexify(&csc_to_dense(sys.b()));
    let a_norm = csc_norm1(sys.a());

    let mut lambdas = Vec::with_capacity(m_dim);
    let mut vs: Vec<CVector> = Vec::with_capacity(m_dim);
    let mut ws: Vec<CVector> = Vec::with_capacity(m_dim);
    let mut k = 0;
    while k < chosen.len() {
        let (lam, v, w) = refine(&a_dense, &b_dense, chosen[k], a_norm, options)?;
        let is_pair = k + 1 < chosen.len() && chosen[k + 1] == chosen[k].conj() && chosen[k].im != 0.0;
        if is_pair {
            lambdas.push(lam);
            lambdas.push(lam.conj());
            vs.push(v.clone());
            vs.push(v.map(|z| z.conj()));
            ws.push(w.clone());
            ws.push(w.map(|z| z.conj()));
            k += 2;
        } else {
            lambdas.push(lam);
            vs.push(v);
            ws.push(w);
            k += 1;
        }
    }

    for (index, l) in lambdas.iter().enumerate() {
        if l.re.abs() <= 1e-14 * l.norm().max(1.0) {
            return Err(SsmError::NotHyperbolic {
                index,
                re: l.re,
                im: l.im,
            });
        }
    }

    let v = CMatrix::from_columns(&vs);
    let w = CMatrix::from_columns(&ws);
    MasterSubspace::from_parts(lambdas, v, w, sys.b())
}

fn dense_eigenvalues(a: &CscMatrix<f64>, b: &CscMatrix<f64>) -> Result<Vec<C64>> {
    let a = csc_to_dense(a);
    let b = csc_to_dense(b);
    let lu = b.lu();
    let binv_a: DMatrix<f64> = lu.solve(&a).ok_or_else(|| SsmError::Factorization {
        context: "B (dense eigen-decomposition)".into(),
        hint: "B is singular; check that M is invertible".into(),
    })?;
    Ok(binv_a.complex_eigenvalues().iter().copied().collect())
}

fn arnoldi_eigenvalues(a: &CscMatrix<f64>, b: &CscMatrix<f64>, shift: C64, want: usize) -> Result<Vec<C64>> {
    let n = a.nrows();
    let lu = shifted_pencil(a, b, shift).lu();
    let krylov = n.min((3 * want).max(want + 20));
    let mut q: Vec<CVector> = Vec::with_capacity(krylov + 1);
    let mut h = CMatrix::zeros(krylov + 1, krylov);
    let start = CVector::from_fn(n, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.1, 0.3 * ((i % 5) as f64 - 2.0)));
    q.push(start.unscale(start.norm()));
    let mut steps = krylov;
    for j in 0..krylov {
        let bx = csc_mul(b, &q[j]);
        let mut x = lu.solve(&bx).ok_or_else(|| SsmError::Factorization {
            context: format!("A - σB at σ = {shift}"),
            hint: "retry with a slightly perturbed shift".into(),
        })?;
        // modified Gram–Schmidt, applied twice
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dotc(&x);
                h[(i, j)] += c;
                x.axpy(-c, qi, C64::new(1.0, 0.0));
            }
        }
        let beta = x.norm();
        h[(j + 1, j)] = C64::new(beta, 0.0);
        if beta < 1e-12 {
            steps = j + 1;
            break;
        }
        q.push(x.unscale(beta));
    }
    let hk = h.view((0, 0), (steps, steps)).into_owned();
    let theta = hk.schur().eigenvalues().ok_or_else(|| SsmError::NonConvergence {
        context: "Schur decomposition of the Arnoldi Hessenberg matrix".into(),
        iterations: steps,
        residual: f64::NAN,
    })?;
    let mut lambdas: Vec<C64> = theta
        .iter()
        .filter(|t| t.norm() > 0.0)
        .map(|t| shift + t.inv())
        .collect();
    lambdas.sort_by(|x, y| (x - shift).norm().total_cmp(&(y - shift).norm()));
    // the Krylov space is complex; restore exact conjugate pairs for real pencils
    let mut out: Vec<C64> = Vec::new();
    for l in lambdas {
        if out.iter().any(|o| (o - l).norm() <= 1e-8 * l.norm().max(1.0)) {
            continue;
        }
        out.push(l);
        if l.im.abs() > 1e-10 * l.norm().max(1.0) {
            out.push(l.conj());
        }
    }
    Ok(out)
}

fn dedupe_pairs(candidates: &[C64]) -> Vec<C64> {
    // representatives: Im >= 0 (real eigenvalues kept once)
    let mut reps: Vec<C64> = Vec::new();
    for &c in candidates {
        let rep = if c.im < 0.0 { c.conj() } else { c };
        let rep = if rep.im.abs() <= 1e-12 * rep.norm().max(1.0) {
            C64::new(rep.re, 0.0)
        } else {
            rep
        };
        if !reps.iter().any(|r| (r - rep).norm() <= 1e-9 * rep.norm().max(1e-300)) {
            reps.push(rep);
        }
    }
    reps
}

fn same_abs(x: f64, y: f64) -> bool {
    (x.abs() - y.abs()).abs() <= 1e-9 * x.abs().max(y.abs())
}

/// Final ordering: `|Re λ|` ascending; ties by `|Im λ|` ascending, positive `Im` first.
pub fn sort_eigenvalues(lambdas: &mut [C64]) {
    lambdas.sort_by(|x, y| {
        if !same_abs(x.re, y.re) {
            return x.re.abs().total_cmp(&y.re.abs());
        }
        if !same_abs(x.im, y.im) {
            return x.im.abs().total_cmp(&y.im.abs());
        }
        y.im.total_cmp(&x.im)
    });
}

fn select(candidates: &[C64], m_dim: usize, selection: &ModeSelection, shift: C64) -> Result<Vec<C64>> {
    let reps = dedupe_pairs(candidates);
    let mut chosen: Vec<C64> = Vec::new();
    let push = |rep: C64, chosen: &mut Vec<C64>| {
        chosen.push(rep);
        if rep.im != 0.0 {
            chosen.push(rep.conj());
        }
    };
    match selection {
        ModeSelection::Nearest { .. } => {
            let mut by_dist: Vec<C64> = reps.clone();
            by_dist.sort_by(|x, y| {
                let dx = (x - shift).norm().min((x.conj() - shift).norm());
                let dy = (y - shift).norm().min((y.conj() - shift).norm());
                dx.total_cmp(&dy)
            });
            for rep in by_dist {
                if chosen.len() >= m_dim {
                    break;
                }
                push(rep, &mut chosen);
            }
        }
        ModeSelection::Pairs(indices) => {
            let mut pairs: Vec<C64> = reps.iter().copied().filter(|r| r.im > 0.0).collect();
            pairs.sort_by(|x, y| x.im.total_cmp(&y.im));
            for &k in indices {
                let rep = *pairs.get(k).ok_or_else(|| {
                    SsmError::InvalidInput(format!("mode pair {k} requested but only {} found", pairs.len()))
                })?;
                push(rep, &mut chosen);
            }
        }
        ModeSelection::FrequencyWindow { lo, hi } => {
            let mut pairs: Vec<C64> = reps
                .iter()
                .copied()
                .filter(|r| r.im > 0.0 && r.im >= *lo && r.im <= *hi)
                .collect();
            pairs.sort_by(|x, y| x.im.total_cmp(&y.im));
            for rep in pairs {
                push(rep, &mut chosen);
            }
        }
    }
    if chosen.len() != m_dim {
        return Err(SsmError::InvalidInput(format!(
            "selection yields {} eigenvalues but the subspace dimension is {m_dim} \
             (real eigenvalues and conjugate pairs cannot be split)",
            chosen.len()
        )));
    }
    sort_eigenvalues(&mut chosen);
    Ok(chosen)
}

/// Two-sided inverse iteration near `guess`; returns `(λ, v, w)` with `v`
/// unit-norm and phase-fixed (largest entry real positive).
fn refine(
    a: &CMatrix,
    b: &CMatrix,
    guess: C64,
    a_norm: f64,
    options: &EigOptions,
) -> Result<(C64, CVector, CVector)> {
    let n = a.nrows();
    let perturb = C64::new(1.0, 0.7) * 1e-9 * guess.norm().max(1.0);
    let mu = guess + perturb;
    let mat = a - b * mu;
    let lu = mat.clone().lu();
    let lu_h = mat.adjoint().lu();
    let mut v = CVector::from_fn(n, |i, _| C64::new(1.0, 0.1 * i as f64));
    let mut w = v.clone();
    let mut lambda = guess;
    let mut residual = f64::INFINITY;
    for _ in 0..options.max_refine {
        let rhs = b * &v;
        v = lu.solve(&rhs).ok_or_else(|| SsmError::Factorization {
            context: format!("A - μB at μ = {mu}"),
            hint: "retry with a perturbed shift".into(),
        })?;
        v.unscale_mut(v.norm());
        let rhs = b.adjoint() * &w;
        w = lu_h.solve(&rhs).ok_or_else(|| SsmError::Factorization {
            context: format!("(A - μB)* at μ = {mu}"),
            hint: "retry with a perturbed shift".into(),
        })?;
        w.unscale_mut(w.norm());
        let wbv = w.dotc(&(b * &v));
        if wbv.norm() == 0.0 {
            return Err(SsmError::Defective(format!("left/right eigenvectors orthogonal near {guess}")));
        }
        lambda = w.dotc(&(a * &v)) / wbv;
        residual = (a * &v - b * &v * lambda).norm() / (a_norm * v.norm());
        if residual <= options.tol {
            break;
        }
    }
    if residual > options.tol {
        return Err(SsmError::NonConvergence {
            context: format!("inverse iteration near λ = {guess}"),
            iterations: options.max_refine,
            residual,
        });
    }
    if lambda.im.abs() <= 1e-12 * lambda.norm() {
        lambda.im = 0.0;
    }
    // deterministic phase
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, z)| if z.norm() > bv * (1.0 + 1e-12) { (i, z.norm()) } else { (bi, bv) });
    let phase = v[imax] / v[imax].norm();
    v.iter_mut().for_each(|z| *z /= phase);
    if lambda.im == 0.0 {
        v.iter_mut().for_each(|z| z.im = 0.0);
        let (jmax, _) = w
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, z)| if z.norm() > bv { (i, z.norm()) } else { (bi, bv) });
        let phase = w[jmax] / w[jmax].norm();
        w.iter_mut().for_each(|z| *z = C64::new((*z / phase).re, 0.0));
    }
    Ok((lambda, v, w))
}

fn conjugate_map(lambdas: &[C64], v: &CMatrix) -> Option<Vec<usize>> {
    let mut map = Vec::with_capacity(lambdas.len());
    for (j, l) in lambdas.iter().enumerate() {
        let vj_conj = v.column(j).map(|z| z.conj());
        let k = (0..lambdas.len()).find(|&k| lambdas[k] == l.conj() && v.column(k) == vj_conj)?;
        map.push(k);
    }
    Some(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_to_csc;
    use crate::model::{lift_to_first_order, SecondOrderModel, ZeroNonlinearity};
    use nalgebra::dmatrix;
    use std::sync::Arc;

    fn oscillator(omega: f64, zeta: f64) -> FirstOrderSystem {
        let model = SecondOrderModel::from_dense(
            &dmatrix![1.0],
            &dmatrix![2.0 * zeta * omega],
            &dmatrix![omega * omega],
            Arc::new(ZeroNonlinearity(1)),
        )
        .unwrap();
        lift_to_first_order(&model)
    }

    #[test]
    fn damped_oscillator_eigenvalues() {
        let (omega, zeta) = (2.0, 0.005);
        let sub = solve_master_subspace(&oscillator(omega, zeta), 2, C64::new(0.0, 0.0)).unwrap();
        // roots of λ² + 2ζωλ + ω² = 0
        let expected = C64::new(-zeta * omega, omega * (1.0 - zeta * zeta).sqrt());
        assert!((sub.lambdas()[0] - expected).norm() < 1e-12);
        assert!((sub.lambdas()[1] - expected.conj()).norm() < 1e-12);
        assert!((sub.lambdas()[0].im - 1.99997).abs() < 1e-5);
        assert_eq!(sub.conjugate_map(), Some(&[1usize, 0][..]));
        let sys = oscillator(omega, zeta);
        assert!(sub.biorthogonality_error(sys.b()) < 1e-12);
    }

    #[test]
    fn binormalize_scalar_case() {
        let v = CMatrix::from_column_slice(2, 1, &[C64::new(2.0, 0.0), C64::new(0.0, 0.0)]);
        let w = v.clone();
        let b = dense_to_csc(&DMatrix::identity(2, 2));
        let (v2, w2) = binormalize(v.clone(), w, &b).unwrap();
        assert_eq!(v2, v);
        assert_eq!(w2[(0, 0)], C64::new(0.5, 0.0));
        assert_eq!(w2[(1, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn binormalize_rejects_orthogonal_pair() {
        let v = CMatrix::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let w = CMatrix::from_column_slice(2, 1, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let b = dense_to_csc(&DMatrix::identity(2, 2));
        assert!(matches!(binormalize(v, w, &b), Err(SsmError::Defective(_))));
    }

    #[test]
    fn random_pencil_is_biorthonormal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = DMatrix::from_fn(2, 2, |i, j| if i == j { 1.0 + rng.gen::<f64>() } else { 0.2 * rng.gen::<f64>() });
        let c = DMatrix::from_fn(2, 2, |_, _| 0.05 * rng.gen::<f64>());
        let k = DMatrix::from_fn(2, 2, |i, j| if i == j { 3.0 + i as f64 } else { rng.gen_range(-0.5..0.5) });
        let model = SecondOrderModel::from_dense(&m, &c, &k, Arc::new(ZeroNonlinearity(2))).unwrap();
        let sys = lift_to_first_order(&model);
        let sub = solve_master_subspace(&sys, 4, C64::new(0.0, 0.0)).unwrap();
        // explicit W* B V against the identity
        let bv = complexify(&csc_to_dense(sys.b())) * sub.right();
        let prod = sub.left().adjoint() * bv;
        assert!((prod - CMatrix::identity(4, 4)).norm() < 1e-12);
        // eigen-residuals
        let a = complexify(&csc_to_dense(sys.a()));
        let bd = complexify(&csc_to_dense(sys.b()));
        for j in 0..4 {
            let v = sub.v(j);
            let r = (&a * &v - &bd * &v * sub.lambdas()[j]).norm() / (csc_norm1(sys.a()) * v.norm());
            assert!(r < 1e-10);
            let w = sub.w(j);
            let rl = (w.adjoint() * (&a - &bd * sub.lambdas()[j])).norm() / w.norm();
            assert!(rl < 1e-9);
        }
    }

    #[test]
    fn self_adjoint_pencil_has_matching_left_vectors() {
        // B = I and symmetric A: left eigenvectors are right eigenvectors up to scaling
        let a = dense_to_csc(&dmatrix![-0.1, 1.0; 1.0, -0.3]);
        let b = dense_to_csc(&DMatrix::identity(2, 2));
        let candidates = dense_eigenvalues(&a, &b).unwrap();
        let ad = complexify(&csc_to_dense(&a));
        let bd = complexify(&csc_to_dense(&b));
        for l in candidates {
            let (_, v, w) = refine(&ad, &bd, l, 1.0, &EigOptions::default()).unwrap();
            let cos = w.dotc(&v).norm() / (w.norm() * v.norm());
            assert!((cos - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sorting_rule() {
        let mut l = vec![
            C64::new(-0.6, -298.78),
            C64::new(-0.3, -149.22),
            C64::new(-0.6, 298.78),
            C64::new(-0.3, 149.22),
        ];
        sort_eigenvalues(&mut l);
        assert_eq!(l[0], C64::new(-0.3, 149.22));
        assert_eq!(l[1], C64::new(-0.3, -149.22));
        assert_eq!(l[2], C64::new(-0.6, 298.78));
    }

    #[test]
    fn undamped_system_is_not_hyperbolic() {
        let err = solve_master_subspace(&oscillator(1.0, 0.0), 2, C64::new(0.0, 0.0)).unwrap_err();
        assert!(matches!(err, SsmError::NotHyperbolic { .. }));
    }

    #[test]
    fn invalid_dimensions() {
        let sys = oscillator(1.0, 0.01);
        assert!(solve_master_subspace(&sys, 3, C64::new(0.0, 0.0)).is_err());
        assert!(solve_master_subspace(&sys, 4, C64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let sys = oscillator(2.0, 0.01);
        let sub = solve_master_subspace(&sys, 2, C64::new(0.0, 0.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        sub.save(dir.path(), "subspace").unwrap();
        let back = MasterSubspace::load(dir.path(), "subspace").unwrap();
        assert_eq!(back.lambdas(), sub.lambdas());
        assert_eq!(back.right(), sub.right());
        assert_eq!(back.left(), sub.left());
        assert_eq!(back.conjugate_map(), sub.conjugate_map());
    }
}
