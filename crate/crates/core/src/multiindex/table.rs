use std::collections::HashMap;

use crate::linalg::{CVector, C64};

use super::MultiIndex;

/// Coefficients of one degree, stored in insertion (canonical) order.
#[derive(Clone, Debug, Default)]
pub struct DegreeBlock {
    indices: Vec<MultiIndex>,
    w: Vec<CVector>,
    r: Vec<CVector>,
    lookup: HashMap<MultiIndex, usize>,
}

impl DegreeBlock {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &CVector, &CVector)> {
        self.indices
            .iter()
            .zip(&self.w)
            .zip(&self.r)
            .map(|((m, w), r)| (m, w, r))
    }
}

/// Expansion coefficients `W_m ∈ ℂ^N` and `R_m ∈ ℂ^M`, grouped by degree.
#[derive(Clone, Debug)]
pub struct CoefficientTable {
    m_dim: usize,
    n_state: usize,
    blocks: Vec<DegreeBlock>,
}

impl CoefficientTable {
    pub fn new(m_dim: usize, n_state: usize) -> Self {
        Self {
            m_dim,
            n_state,
            blocks: vec![DegreeBlock::default()],
        }
    }

    pub fn m_dim(&self) -> usize {
        self.m_dim
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }

    pub fn max_order(&self) -> u32 {
        (self.blocks.len() - 1) as u32
    }

    /// Insert a coefficient pair. Panics if the multi-index dimension or the vector
    /// lengths do not match the table.
    pub fn insert(&mut self, m: MultiIndex, w: CVector, r: CVector) {
        assert_eq!(m.dim(), self.m_dim, "multi-index dimension");
        assert_eq!(w.len(), self.n_state, "W_m length");
        assert_eq!(r.len(), self.m_dim, "R_m length");
        let k = m.degree() as usize;
        while self.blocks.len() <= k {
            self.blocks.push(DegreeBlock::default());
        }
        let block = &mut self.blocks[k];
        if let Some(&pos) = block.lookup.get(&m) {
            block.w[pos] = w;
            block.r[pos] = r;
        } else {
            block.lookup.insert(m.clone(), block.indices.len());
            block.indices.push(m);
            block.w.push(w);
            block.r.push(r);
        }
    }

    pub fn degree(&self, k: u32) -> Option<&DegreeBlock> {
        self.blocks.get(k as usize)
    }

    fn position(&self, m: &MultiIndex) -> Option<(usize, usize)> {
        let k = m.degree() as usize;
        let block = self.blocks.get(k)?;
        block.lookup.get(m).map(|&pos| (k, pos))
    }

    pub fn w(&self, m: &MultiIndex) -> Option<&CVector> {
        self.position(m).map(|(k, pos)| &self.blocks[k].w[pos])
    }

    pub fn r(&self, m: &MultiIndex) -> Option<&CVector> {
        self.position(m).map(|(k, pos)| &self.blocks[k].r[pos])
    }

    pub fn contains(&self, m: &MultiIndex) -> bool {
        self.position(m).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &CVector, &CVector)> {
        self.blocks.iter().flat_map(|b| b.iter())
    }

    /// Copy restricted to degrees `<= order`.
    pub fn truncated(&self, order: u32) -> CoefficientTable {
        let keep = (order as usize + 1).min(self.blocks.len());
        CoefficientTable {
            m_dim: self.m_dim,
            n_state: self.n_state,
            blocks: self.blocks[..keep].to_vec(),
        }
    }

    /// `W(p) = Σ W_m p^m`.
    pub fn eval_w(&self, p: &[C64]) -> CVector {
        let mut out = CVector::zeros(self.n_state);
        for (m, w, _) in self.iter() {
            let c = m.monomial(p);
            if c != C64::new(0.0, 0.0) {
                out.axpy(c, w, C64::new(1.0, 0.0));
            }
        }
        out
    }

    /// `R(p) = Σ R_m p^m`.
    pub fn eval_r(&self, p: &[C64]) -> CVector {
        let mut out = CVector::zeros(self.m_dim);
        for (m, _, r) in self.iter() {
            if r.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            out.axpy(m.monomial(p), r, C64::new(1.0, 0.0));
        }
        out
    }

    /// `DW(p) · v`, the directional derivative of the parameterization.
    pub fn eval_dw(&self, p: &[C64], v: &[C64]) -> CVector {
        let mut out = CVector::zeros(self.n_state);
        for (m, w, _) in self.iter() {
            let mut c = C64::new(0.0, 0.0);
            for j in 0..self.m_dim {
                if m.get(j) == 0 || v[j] == C64::new(0.0, 0.0) {
                    continue;
                }
                let lowered = m.with_increment(j, -1).expect("positive exponent");
                c += v[j] * m.get(j) as f64 * lowered.monomial(p);
            }
            if c != C64::new(0.0, 0.0) {
                out.axpy(c, w, C64::new(1.0, 0.0));
            }
        }
        out
    }

    /// Nonzero reduced-dynamics coefficients `(m, R_m)` in canonical order.
    pub fn nonzero_r(&self) -> Vec<(MultiIndex, CVector)> {
        self.iter()
            .filter(|(_, _, r)| r.iter().any(|z| *z != C64::new(0.0, 0.0)))
            .map(|(m, _, r)| (m.clone(), r.clone()))
            .collect()
    }
}
