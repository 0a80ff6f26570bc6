//! Plain-text complex matrix format: first line `rows cols`, then `rows`
//! lines of space-separated `re im` pairs, row-major.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CoreError, Result};

pub fn write_matrix<W: Write>(out: &mut W, m: &DMatrix<Complex64>) -> Result<()> {
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let mut parts = Vec::with_capacity(2 * m.ncols());
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            parts.push(format!("{:.17e}", v.re));
            parts.push(format!("{:.17e}", v.im));
        }
        writeln!(out, "{}", parts.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: &mut R) -> Result<DMatrix<Complex64>> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| CoreError::Parse(format!("bad dimension `{t}`"))))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(CoreError::Parse("expected `rows cols` header".into()));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(CoreError::Parse(format!("unexpected end of file at row {i}")));
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| CoreError::Parse(format!("bad number `{t}`"))))
            .collect::<std::result::Result<_, _>>()?;
        if vals.len() != 2 * cols {
            return Err(CoreError::Parse(format!(
                "row {i} has {} values, expected {}",
                vals.len(),
                2 * cols
            )));
        }
        for j in 0..cols {
            m[(i, j)] = Complex64::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    Ok(m)
}

pub fn write_matrix_file<P: AsRef<Path>>(path: P, m: &DMatrix<Complex64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(&mut f, m)
}

pub fn read_matrix_file<P: AsRef<Path>>(path: P) -> Result<DMatrix<Complex64>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_matrix(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let m = DMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64 + 0.25, j as f64 - 1.5));
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3 2\n"));
        let back = read_matrix(&mut &buf[..]).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_malformed() {
        let bad = b"2 2\n1 0 0 1\n".to_vec();
        assert!(read_matrix(&mut &bad[..]).is_err());
    }
}
