//! Multi-index addressing for polynomial expansions in the reduced coordinates.
//!
//! A multi-index `m = (m_1, ..., m_M)` addresses the monomial `p_1^{m_1} ... p_M^{m_M}`.
//! The canonical order lists indices by ascending degree and, within a degree, in
//! reverse-lexicographic order: `(2,0), (1,1), (0,2)`. That order is part of the
//! public contract since it fixes the layout of every emitted coefficient file.

mod io;
mod table;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::linalg::C64;

pub use io::{read_table, table_summary, write_table, TableSummary, TABLE_MAGIC};
pub use table::{CoefficientTable, DegreeBlock};

/// Largest enumeration we are willing to materialize.
pub const MAX_ENUMERATION: u128 = 50_000_000;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex {
    exps: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exps: Vec<u32>) -> Self {
        Self { exps }
    }

    pub fn zero(dim: usize) -> Self {
        Self { exps: vec![0; dim] }
    }

    /// Unit multi-index `e_j`.
    pub fn unit(dim: usize, j: usize) -> Self {
        let mut exps = vec![0; dim];
        exps[j] = 1;
        Self { exps }
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn get(&self, j: usize) -> u32 {
        self.exps[j]
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut exps = Vec::with_capacity(self.dim());
        for (a, b) in self.exps.iter().zip(&other.exps) {
            exps.push(a.checked_sub(*b)?);
        }
        Some(MultiIndex { exps })
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex {
            exps: self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn with_increment(&self, j: usize, delta: i64) -> Option<MultiIndex> {
        let v = self.exps[j] as i64 + delta;
        if v < 0 {
            return None;
        }
        let mut exps = self.exps.clone();
        exps[j] = v as u32;
        Some(MultiIndex { exps })
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.exps.iter().zip(&other.exps).all(|(a, b)| a <= b)
    }

    /// `Λ_m = Σ λ_i m_i`.
    pub fn weighted_sum(&self, lambdas: &[C64]) -> C64 {
        self.exps
            .iter()
            .zip(lambdas)
            .fold(C64::new(0.0, 0.0), |acc, (&e, l)| acc + l * e as f64)
    }

    /// `p^m`.
    pub fn monomial(&self, p: &[C64]) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for (&e, &x) in self.exps.iter().zip(p) {
            if e > 0 {
                acc *= x.powu(e);
            }
        }
        acc
    }

    /// Swap exponents according to a conjugation map (`map[j]` is the coordinate
    /// conjugate to `j`).
    pub fn conjugate(&self, map: &[usize]) -> MultiIndex {
        let mut exps = vec![0; self.dim()];
        for (j, &e) in self.exps.iter().enumerate() {
            exps[map[j]] = e;
        }
        MultiIndex { exps }
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, e) in self.exps.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl From<&[u32]> for MultiIndex {
    fn from(v: &[u32]) -> Self {
        MultiIndex::new(v.to_vec())
    }
}

pub fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of multi-indices of dimension `dim` and degree `k`.
pub fn count_degree(dim: usize, k: u32) -> u128 {
    if dim == 0 {
        return u128::from(k == 0);
    }
    binomial(k as u128 + dim as u128 - 1, dim as u128 - 1)
}

/// All multi-indices of dimension `dim` and total degree `k`, reverse-lexicographic.
pub fn enumerate_degree(dim: usize, k: u32) -> Result<Vec<MultiIndex>> {
    if dim == 0 {
        return Err(SsmError::InvalidInput("multi-index dimension must be >= 1".into()));
    }
    let count = count_degree(dim, k);
    if count > MAX_ENUMERATION {
        return Err(SsmError::Capacity { count });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![0u32; dim];
    fill(&mut cur, 0, k, &mut out);
    Ok(out)
}

fn fill(cur: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(MultiIndex::new(cur.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        fill(cur, pos + 1, remaining - e, out);
    }
    cur[pos] = 0;
}

/// Every multi-index `n` with `n <= m` componentwise (including zero and `m`).
pub fn sub_indices(m: &MultiIndex) -> Vec<MultiIndex> {
    let mut out = vec![MultiIndex::zero(m.dim())];
    for j in 0..m.dim() {
        let mut next = Vec::with_capacity(out.len() * (m.get(j) as usize + 1));
        for base in &out {
            for e in 0..=m.get(j) {
                let mut exps = base.exps.clone();
                exps[j] = e;
                next.push(MultiIndex { exps });
            }
        }
        out = next;
    }
    out
}

/// Unordered pairs `{m1, m2}` with `m1 + m2 = m`, both of degree at least `min_deg`.
/// Each pair is returned once with `m1 <= m2` in the canonical order.
pub fn pairs_summing_to(m: &MultiIndex, min_deg: u32) -> Vec<(MultiIndex, MultiIndex)> {
    let mut out = Vec::new();
    for m1 in sub_indices(m) {
        if m1.degree() < min_deg {
            continue;
        }
        let m2 = m.checked_sub(&m1).expect("sub-index");
        if m2.degree() < min_deg || m1 > m2 {
            continue;
        }
        out.push((m1, m2));
    }
    out.sort();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TripleKind {
    AllEqual,
    /// `parts[0] == parts[1] != parts[2]` after normalization.
    TwoEqual,
    AllDistinct,
}

/// Multiset `{m1, m2, m3}` summing to a target multi-index.
///
/// For [`TripleKind::TwoEqual`] the repeated index is stored twice first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triple {
    pub parts: [MultiIndex; 3],
    pub kind: TripleKind,
}

pub fn triples_summing_to(m: &MultiIndex, min_deg: u32) -> Vec<Triple> {
    let mut out = Vec::new();
    for m1 in sub_indices(m) {
        if m1.degree() < min_deg {
            continue;
        }
        let rest = m.checked_sub(&m1).expect("sub-index");
        for m2 in sub_indices(&rest) {
            if m2.degree() < min_deg || m2 < m1 {
                continue;
            }
            let m3 = rest.checked_sub(&m2).expect("sub-index");
            if m3.degree() < min_deg || m3 < m2 {
                continue;
            }
            let triple = if m1 == m2 && m2 == m3 {
                Triple {
                    parts: [m1.clone(), m2, m3],
                    kind: TripleKind::AllEqual,
                }
            } else if m1 == m2 {
                Triple {
                    parts: [m1.clone(), m2, m3],
                    kind: TripleKind::TwoEqual,
                }
            } else if m2 == m3 {
                Triple {
                    parts: [m2, m3, m1.clone()],
                    kind: TripleKind::TwoEqual,
                }
            } else {
                Triple {
                    parts: [m1.clone(), m2, m3],
                    kind: TripleKind::AllDistinct,
                }
            };
            out.push(triple);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::{BTreeMap, HashSet};

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::from(v)
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(
            enumerate_degree(2, 2).unwrap(),
            vec![mi(&[2, 0]), mi(&[1, 1]), mi(&[0, 2])]
        );
        assert_eq!(enumerate_degree(1, 5).unwrap(), vec![mi(&[5])]);
        assert_eq!(enumerate_degree(3, 2).unwrap().len(), 6);
        assert_eq!(enumerate_degree(4, 0).unwrap(), vec![MultiIndex::zero(4)]);
    }

    #[test]
    fn enumeration_capacity_is_checked() {
        assert!(matches!(
            enumerate_degree(40, 40),
            Err(SsmError::Capacity { .. })
        ));
        assert!(enumerate_degree(0, 1).is_err());
    }

    #[test]
    fn enumeration_matches_canonical_order() {
        let list = enumerate_degree(3, 4).unwrap();
        let mut sorted = list.clone();
        sorted.sort();
        assert_eq!(list, sorted);
    }

    #[test]
    fn enumeration_counts() {
        for dim in 1..=8 {
            for k in 0..=12 {
                let list = enumerate_degree(dim, k).unwrap();
                assert_eq!(list.len() as u128, binomial((k + dim as u32 - 1) as u128, dim as u128 - 1));
                assert!(list.iter().all(|m| m.degree() == k));
                let unique: HashSet<_> = list.iter().collect();
                assert_eq!(unique.len(), list.len());
            }
        }
    }

    #[test]
    fn pairs_examples() {
        assert_eq!(pairs_summing_to(&mi(&[2, 0]), 1), vec![(mi(&[1, 0]), mi(&[1, 0]))]);
        let got: HashSet<_> = pairs_summing_to(&mi(&[2, 1]), 1)
            .into_iter()
            .map(|(a, b)| {
                let mut v = [a, b];
                v.sort();
                v
            })
            .collect();
        let want: HashSet<_> = [
            [mi(&[1, 0]), mi(&[1, 1])],
            [mi(&[0, 1]), mi(&[2, 0])],
        ]
        .into_iter()
        .map(|mut v| {
            v.sort();
            v
        })
        .collect();
        assert_eq!(got, want);
        assert_eq!(pairs_summing_to(&mi(&[1, 1]), 1).len(), 1);
    }

    #[test]
    fn triples_examples() {
        let t = triples_summing_to(&mi(&[3, 0]), 1);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].kind, TripleKind::AllEqual);

        let t = triples_summing_to(&mi(&[2, 1]), 1);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].kind, TripleKind::TwoEqual);
        assert_eq!(t[0].parts[0], mi(&[1, 0]));
        assert_eq!(t[0].parts[2], mi(&[0, 1]));

        // brute force over ordered triples with degree >= 1, deduplicated as multisets
        let m = mi(&[2, 2]);
        let subs = sub_indices(&m);
        let mut brute = HashSet::new();
        for a in &subs {
            for b in &subs {
                if let Some(c) = m.checked_sub(&a.add(b).clone()) {
                    if a.degree() > 0 && b.degree() > 0 && c.degree() > 0 {
                        let mut v = vec![a.clone(), b.clone(), c];
                        v.sort();
                        brute.insert(v);
                    }
                }
            }
        }
        let got = triples_summing_to(&m, 1);
        assert_eq!(brute.len(), 3);
        assert_eq!(got.len(), 3);
        for t in got {
            let mut v = t.parts.to_vec();
            v.sort();
            assert!(brute.contains(&v));
        }
    }

    fn arb_index() -> impl Strategy<Value = MultiIndex> {
        (1usize..=4)
            .prop_flat_map(|d| proptest::collection::vec(0u32..=3, d))
            .prop_filter("degree >= 2", |v| v.iter().sum::<u32>() >= 2)
            .prop_map(MultiIndex::new)
    }

    proptest! {
        #[test]
        fn pairs_expand_to_ordered_splits(m in arb_index()) {
            let mut expanded: BTreeMap<(MultiIndex, MultiIndex), usize> = BTreeMap::new();
            for (a, b) in pairs_summing_to(&m, 1) {
                *expanded.entry((a.clone(), b.clone())).or_default() += 1;
                if a != b {
                    *expanded.entry((b, a)).or_default() += 1;
                }
            }
            let mut ordered: BTreeMap<(MultiIndex, MultiIndex), usize> = BTreeMap::new();
            for a in sub_indices(&m) {
                let b = m.checked_sub(&a).unwrap();
                if a.degree() >= 1 && b.degree() >= 1 {
                    *ordered.entry((a, b)).or_default() += 1;
                }
            }
            prop_assert_eq!(expanded, ordered);
        }

        #[test]
        fn triples_cover_ordered_splits(m in arb_index()) {
            // multiplicities 1, 3, 6 reproduce the ordered triple count
            let total: usize = triples_summing_to(&m, 1).iter().map(|t| match t.kind {
                TripleKind::AllEqual => 1,
                TripleKind::TwoEqual => 3,
                TripleKind::AllDistinct => 6,
            }).sum();
            let mut ordered = 0;
            for a in sub_indices(&m) {
                let rest = m.checked_sub(&a).unwrap();
                for b in sub_indices(&rest) {
                    let c = rest.checked_sub(&b).unwrap();
                    if a.degree() >= 1 && b.degree() >= 1 && c.degree() >= 1 {
                        ordered += 1;
                    }
                }
            }
            prop_assert_eq!(total, ordered);
        }
    }
}
