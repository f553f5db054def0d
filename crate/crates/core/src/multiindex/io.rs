//! Binary coefficient-table format and its JSON summary.
//!
//! Layout (all integers `u32`, all floats `f64`, little-endian):
//!
//! ```text
//! magic "SSMT" | version | M | N | max_order
//! for k in 0..=max_order:
//!     count
//!     count × { exponents[M] | W_m[N] as (re, im) | R_m[M] as (re, im) }
//! n_omega
//! n_omega × { Ω | x0[N] | x0_bar[N] | s0_plus[M] | s0_minus[M] }   (complex as (re, im))
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::linalg::{CVector, C64};
use crate::ssm::NonAutonomousCoeffs;

use super::{CoefficientTable, MultiIndex};

pub const TABLE_MAGIC: &[u8; 4] = b"SSMT";
const VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_cvec(w: &mut impl Write, v: &CVector) -> Result<()> {
    for z in v.iter() {
        put_f64(w, z.re)?;
        put_f64(w, z.im)?;
    }
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_cvec(r: &mut impl Read, n: usize) -> Result<CVector> {
    let mut v = CVector::zeros(n);
    for k in 0..n {
        let re = get_f64(r)?;
        let im = get_f64(r)?;
        v[k] = C64::new(re, im);
    }
    Ok(v)
}

pub fn write_table(
    w: &mut impl Write,
    table: &CoefficientTable,
    forced: &[NonAutonomousCoeffs],
) -> Result<()> {
    w.write_all(TABLE_MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, table.m_dim() as u32)?;
    put_u32(w, table.n_state() as u32)?;
    put_u32(w, table.max_order())?;
    for k in 0..=table.max_order() {
        let block = table.degree(k).expect("degree block");
        put_u32(w, block.len() as u32)?;
        for (m, wm, rm) in block.iter() {
            for &e in m.exponents() {
                put_u32(w, e)?;
            }
            put_cvec(w, wm)?;
            put_cvec(w, rm)?;
        }
    }
    put_u32(w, forced.len() as u32)?;
    for f in forced {
        put_f64(w, f.omega)?;
        put_cvec(w, &f.x0)?;
        put_cvec(w, &f.x0_bar)?;
        put_cvec(w, &f.s0_plus)?;
        put_cvec(w, &f.s0_minus)?;
    }
    Ok(())
}

pub fn read_table(r: &mut impl Read) -> Result<(CoefficientTable, Vec<NonAutonomousCoeffs>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TABLE_MAGIC {
        return Err(SsmError::Parse("not a coefficient table (bad magic)".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(SsmError::Parse(format!("unsupported table version {version}")));
    }
    let m_dim = get_u32(r)? as usize;
    let n_state = get_u32(r)? as usize;
    let max_order = get_u32(r)?;
    let mut table = CoefficientTable::new(m_dim, n_state);
    for k in 0..=max_order {
        let count = get_u32(r)?;
        for _ in 0..count {
            let mut exps = Vec::with_capacity(m_dim);
            for _ in 0..m_dim {
                exps.push(get_u32(r)?);
            }
            let m = MultiIndex::new(exps);
            if m.degree() != k {
                return Err(SsmError::Parse(format!("index {m} stored in degree-{k} block")));
            }
            let wm = get_cvec(r, n_state)?;
            let rm = get_cvec(r, m_dim)?;
            table.insert(m, wm, rm);
        }
    }
    let n_omega = get_u32(r)?;
    let mut forced = Vec::with_capacity(n_omega as usize);
    for _ in 0..n_omega {
        let omega = get_f64(r)?;
        forced.push(NonAutonomousCoeffs {
            omega,
            x0: get_cvec(r, n_state)?,
            x0_bar: get_cvec(r, n_state)?,
            s0_plus: get_cvec(r, m_dim)?,
            s0_minus: get_cvec(r, m_dim)?,
        });
    }
    Ok((table, forced))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DegreeSummary {
    pub degree: u32,
    pub count: usize,
    pub max_w_norm: f64,
    pub resonant: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TableSummary {
    pub m_dim: usize,
    pub n_state: usize,
    pub max_order: u32,
    pub degrees: Vec<DegreeSummary>,
}

/// Human-inspectable digest of a table: counts, norms and which indices carry
/// reduced-dynamics terms.
pub fn table_summary(table: &CoefficientTable) -> TableSummary {
    let degrees = (0..=table.max_order())
        .filter_map(|k| {
            let block = table.degree(k)?;
            Some(DegreeSummary {
                degree: k,
                count: block.len(),
                max_w_norm: block.iter().map(|(_, w, _)| w.norm()).fold(0.0, f64::max),
                resonant: block
                    .iter()
                    .filter(|(_, _, r)| r.iter().any(|z| z.norm() > 0.0))
                    .map(|(m, _, _)| m.to_string())
                    .collect(),
            })
        })
        .collect();
    TableSummary {
        m_dim: table.m_dim(),
        n_state: table.n_state(),
        max_order: table.max_order(),
        degrees,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::enumerate_degree;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut t = CoefficientTable::new(2, 3);
        for k in 1..=3 {
            for (n, m) in enumerate_degree(2, k).unwrap().into_iter().enumerate() {
                let w = CVector::from_fn(3, |i, _| C64::new(0.1 * (i + n) as f64, -1.0 / 3.0));
                let r = CVector::from_fn(2, |i, _| C64::new(k as f64, i as f64 * 1e-300));
                t.insert(m, w, r);
            }
        }
        let forced = vec![NonAutonomousCoeffs {
            omega: 1.25,
            x0: CVector::from_element(3, C64::new(1.0, 2.0)),
            x0_bar: CVector::from_element(3, C64::new(1.0, -2.0)),
            s0_plus: CVector::from_element(2, C64::new(0.5, 0.0)),
            s0_minus: CVector::zeros(2),
        }];
        let mut buf = Vec::new();
        write_table(&mut buf, &t, &forced).unwrap();
        let (back, forced_back) = read_table(&mut buf.as_slice()).unwrap();
        assert_eq!(back.max_order(), 3);
        for (m, w, r) in t.iter() {
            assert_eq!(back.w(m).unwrap(), w);
            assert_eq!(back.r(m).unwrap(), r);
        }
        assert_eq!(forced_back, forced);

        let summary = table_summary(&t);
        assert_eq!(summary.degrees[2].count, 3);
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(matches!(
            read_table(&mut &b"NOPE0000"[..]),
            Err(SsmError::Parse(_))
        ));
    }
}
