use std::sync::Arc;

use crate::error::{Result, SsmError};
use crate::linalg::{CVector, C64};
use crate::models::PolynomialForce;
use crate::multiindex::{sub_indices, CoefficientTable, MultiIndex};

use super::Composer;

/// Intrusive reference composer: contracts the explicit tensors of a
/// [`PolynomialForce`] over every ordered split of `m`.
pub struct TensorComposer {
    force: Arc<PolynomialForce>,
}

impl TensorComposer {
    pub fn new(force: Arc<PolynomialForce>) -> Self {
        Self { force }
    }

    pub fn compose_at(&self, m: &MultiIndex, table: &CoefficientTable) -> Result<CVector> {
        let n = self.force.dofs();
        let w = |k: &MultiIndex| {
            table
                .w(k)
                .ok_or_else(|| SsmError::MissingCoefficient { index: k.clone() })
        };
        let mut f = vec![C64::new(0.0, 0.0); n];
        let proper: Vec<MultiIndex> = sub_indices(m)
            .into_iter()
            .filter(|a| a.degree() >= 1 && a.degree() < m.degree())
            .collect();
        for a in &proper {
            let rest = m.checked_sub(a).expect("sub-index");
            let wa = w(a)?;
            let wr = w(&rest)?;
            for &(i, j, k, c) in self.force.quadratic_terms() {
                f[i] += wa[j] * wr[k] * c;
            }
            for b in proper.iter().filter(|b| (*b).le(&rest) && b.degree() < rest.degree()) {
                let c3 = rest.checked_sub(b).expect("sub-index");
                let wb = w(b)?;
                let wc = w(&c3)?;
                for &(i, j, k, l, c) in self.force.cubic_terms() {
                    f[i] += wa[j] * wb[k] * wc[l] * c;
                }
            }
        }
        // first-order force is [-f; 0]
        let mut out = CVector::zeros(2 * n);
        for (o, v) in out.iter_mut().zip(f) {
            *o = -v;
        }
        Ok(out)
    }
}

impl Composer for TensorComposer {
    fn compose_degree(&mut self, indices: &[MultiIndex], table: &CoefficientTable) -> Result<Vec<CVector>> {
        indices.iter().map(|m| self.compose_at(m, table)).collect()
    }
}
