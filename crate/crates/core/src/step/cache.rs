use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::linalg::CVector;

use super::Combination;

/// Which real vector derived from a complex combination `u = a + i b` was
/// evaluated. `Native` marks a direct complex evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RealPart {
    Re,
    Im,
    Sum,
    Diff,
    Native,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalStats {
    /// Black-box calls with a real input (each parity split costs two).
    pub real_evaluations: u64,
    /// Black-box calls with a complex input.
    pub complex_evaluations: u64,
    /// `F₂`/`F₃` values requested while assembling coefficients.
    pub parity_requests: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Inputs rescaled by a power of two before evaluation.
    pub rescaled: u64,
}

impl EvalStats {
    pub fn total_evaluations(&self) -> u64 {
        self.real_evaluations + self.complex_evaluations
    }
}

/// Parity parts `(F₂, F₃)` keyed by generating combination and real part.
#[derive(Default)]
pub struct EvaluationCache {
    map: HashMap<(Combination, RealPart), (CVector, CVector)>,
}

impl EvaluationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, combo: &Combination, part: RealPart) -> Option<&(CVector, CVector)> {
        self.map.get(&(combo.clone(), part))
    }

    pub fn contains(&self, combo: &Combination, part: RealPart) -> bool {
        self.map.contains_key(&(combo.clone(), part))
    }

    pub fn insert(&mut self, combo: Combination, part: RealPart, even: CVector, odd: CVector) {
        self.map.insert((combo, part), (even, odd));
    }

    pub fn clear(&mut self) {
        self.map.clear();
    }
}
