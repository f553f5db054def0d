//! Small dense/sparse helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use nalgebra_sparse::{CooMatrix, CscMatrix};
use num_complex::Complex64;

use crate::error::{Result, SsmError};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Pivot ratio below which a factorization is reported as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

/// Stricter guard for homological operators, where a tiny pivot signals an
/// unflagged resonance rather than a merely badly scaled matrix.
pub const HOMOLOGICAL_PIVOT_RATIO: f64 = 1e-10;

pub fn csc_to_dense(m: &CscMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        out[(i, j)] += *v;
    }
    out
}

pub fn dense_to_csc(m: &DMatrix<f64>) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                coo.push(i, j, v);
            }
        }
    }
    CscMatrix::from(&coo)
}

pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

/// `y = A x` for a real sparse matrix and a complex vector.
pub fn csc_mul(a: &CscMatrix<f64>, x: &CVector) -> CVector {
    let mut y = CVector::zeros(a.nrows());
    for (j, col) in a.col_iter().enumerate() {
        let xj = x[j];
        if xj == C64::new(0.0, 0.0) {
            continue;
        }
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += xj * v;
        }
    }
    y
}

/// `y = A^T x` for a real sparse matrix and a complex vector.
pub fn csc_mul_transpose(a: &CscMatrix<f64>, x: &CVector) -> CVector {
    let mut y = CVector::zeros(a.ncols());
    for (j, col) in a.col_iter().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            acc += x[i] * v;
        }
        y[j] = acc;
    }
    y
}

pub fn csc_norm1(a: &CscMatrix<f64>) -> f64 {
    a.col_iter()
        .map(|c| c.values().iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Dense complex LU with a pivot-ratio singularity guard.
pub struct ComplexLu {
    lu: LU<C64, Dyn, Dyn>,
    pivot_ratio: f64,
}

impl ComplexLu {
    pub fn new(mat: CMatrix, context: &str) -> Result<Self> {
        Self::with_threshold(mat, context, SINGULAR_PIVOT_RATIO)
    }

    pub fn with_threshold(mat: CMatrix, context: &str, threshold: f64) -> Result<Self> {
        if !mat.is_square() {
            return Err(SsmError::InvalidInput(format!("{context}: matrix is not square")));
        }
        let lu = mat.lu();
        let u = lu.u();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..u.nrows() {
            let d = u[(k, k)].norm();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let pivot_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        if !(pivot_ratio > threshold) {
            return Err(SsmError::Factorization {
                context: context.to_string(),
                hint: format!("pivot ratio {pivot_ratio:.3e} indicates a (near-)singular matrix"),
            });
        }
        Ok(Self { lu, pivot_ratio })
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, rhs: &CVector) -> CVector {
        // the factorization was checked non-singular at construction
        self.lu.solve(rhs).expect("non-singular LU")
    }
}

/// Dense `A - s B` assembled from sparse real pencils.
pub fn shifted_pencil(a: &CscMatrix<f64>, b: &CscMatrix<f64>, shift: C64) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        out[(i, j)] += C64::new(*v, 0.0);
    }
    for (i, j, v) in b.triplet_iter() {
        out[(i, j)] -= shift * *v;
    }
    out
}

pub fn rel_diff(a: &CVector, b: &CVector) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}
