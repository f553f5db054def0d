use std::fs;
use std::path::Path;

use nalgebra_sparse::io::{load_coo_from_matrix_market_file, save_to_matrix_market_file};
use nalgebra_sparse::CscMatrix;

use crate::error::{Result, SsmError};
use crate::linalg::C64;

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CscMatrix<f64>> {
    let path = path.as_ref();
    let coo = load_coo_from_matrix_market_file::<f64, _>(path)
        .map_err(|e| SsmError::Parse(format!("{}: {e}", path.display())))?;
    Ok(CscMatrix::from(&coo))
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &CscMatrix<f64>) -> Result<()> {
    save_to_matrix_market_file(m, path).map_err(|e| SsmError::Io(std::io::Error::other(e.to_string())))
}

/// Dense vector file: one value per line, or two whitespace-separated columns
/// `re im`. Blank lines and lines starting with `%` or `#` are skipped.
pub fn read_vector_file(path: impl AsRef<Path>) -> Result<Vec<C64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| {
                SsmError::Parse(format!("{}:{}: {e}", path.display(), lineno + 1))
            })
        };
        let cols: Vec<&str> = line.split_whitespace().collect();
        match cols.as_slice() {
            [re] => out.push(C64::new(parse(re)?, 0.0)),
            [re, im] => out.push(C64::new(parse(re)?, parse(im)?)),
            _ => {
                return Err(SsmError::Parse(format!(
                    "{}:{}: expected one or two columns",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(out)
}

pub fn write_vector_file(path: impl AsRef<Path>, v: &[C64]) -> Result<()> {
    let mut s = String::new();
    for z in v {
        s.push_str(&format!("{:.16e} {:.16e}\n", z.re, z.im));
    }
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{csc_to_dense, dense_to_csc};
    use nalgebra::dmatrix;

    #[test]
    fn matrix_market_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.mtx");
        let k = dmatrix![1.0, 0.3; -0.1, 2.0];
        write_matrix_market(&path, &dense_to_csc(&k)).unwrap();
        assert_eq!(csc_to_dense(&read_matrix_market(&path).unwrap()), k);
    }

    #[test]
    fn vector_file_formats() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        fs::write(&path, "% forcing\n1.5\n2 -0.5\n\n").unwrap();
        let v = read_vector_file(&path).unwrap();
        assert_eq!(v, vec![C64::new(1.5, 0.0), C64::new(2.0, -0.5)]);
        write_vector_file(&path, &v).unwrap();
        assert_eq!(read_vector_file(&path).unwrap(), v);
        fs::write(&path, "1 2 3\n").unwrap();
        assert!(read_vector_file(&path).is_err());
    }
}
