//! On-disk formats for matrices and vectors.
//!
//! * CSV: one line per matrix row, comma separated, `.` decimal separator.
//!   Values are written with the shortest representation that round-trips.
//!   A vector is stored as a single column.
//! * Binary: the ASCII magic `SL1M`, little-endian `u32` rows and cols, then
//!   `rows * cols` little-endian `f64` values in row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Matrix, Vector};

pub const MATRIX_MAGIC: &[u8; 4] = b"SL1M";

fn csv_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "csv",
        reason: reason.into(),
    }
}

fn bin_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "SL1M binary",
        reason: reason.into(),
    }
}

pub fn matrix_to_csv(a: &Matrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Matrix<f64>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| csv_err(format!("line {}: {field:?}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(csv_err("no rows"));
    }
    let cols = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(csv_err(format!(
            "row {} has {} fields, expected {cols}",
            bad + 1,
            rows[bad].len()
        )));
    }
    Matrix::from_rows(&rows)
}

pub fn vector_to_csv(v: &Vector<f64>) -> String {
    let mut out = String::with_capacity(v.len() * 20);
    for x in v.iter() {
        out.push_str(&x.to_string());
        out.push('\n');
    }
    out
}

/// Accepts a single column, or a single row.
pub fn vector_from_csv(text: &str) -> Result<Vector<f64>> {
    let m = matrix_from_csv(text)?;
    if m.cols() == 1 || m.rows() == 1 {
        Vector::new(m.as_slice().to_vec())
    } else {
        Err(csv_err(format!(
            "expected a single column, found {}x{}",
            m.rows(),
            m.cols()
        )))
    }
}

pub fn write_matrix_binary<W: Write>(a: &Matrix<f64>, mut w: W) -> std::io::Result<()> {
    let rows = u32::try_from(a.rows()).map_err(std::io::Error::other)?;
    let cols = u32::try_from(a.cols()).map_err(std::io::Error::other)?;
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for x in a.as_slice() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn matrix_to_binary(a: &Matrix<f64>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(12 + 8 * a.as_slice().len());
    write_matrix_binary(a, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn matrix_from_binary(bytes: &[u8]) -> Result<Matrix<f64>> {
    if bytes.len() < 12 {
        return Err(bin_err(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MATRIX_MAGIC {
        return Err(bin_err(format!("bad magic {:?}", &bytes[..4])));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let payload = &bytes[12..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| bin_err("dimensions overflow"))?;
    if payload.len() != expected {
        return Err(bin_err(format!(
            "{rows}x{cols} needs {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Matrix::new(rows, cols, data)
}

pub fn read_matrix_binary<R: Read>(mut r: R) -> Result<Matrix<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| bin_err(format!("read failed: {e}")))?;
    matrix_from_binary(&bytes)
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_matrix_binary(path: &Path) -> Result<Matrix<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    matrix_from_binary(&bytes)
}

pub fn load_matrix(path: &Path) -> Result<Matrix<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => matrix_from_csv(&read_to_string(path)?),
        _ => load_matrix_binary(path),
    }
}

pub fn load_vector_csv(path: &Path) -> Result<Vector<f64>> {
    vector_from_csv(&read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_layout() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let bytes = matrix_to_binary(&a);
        assert_eq!(&bytes[..4], b"SL1M");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[20..28], &2.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 12 + 6 * 8);
    }

    #[test]
    fn binary_rejects_corruption() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let mut bytes = matrix_to_binary(&a);
        assert!(matrix_from_binary(&bytes[..bytes.len() - 1]).is_err());
        assert!(matrix_from_binary(&bytes[..6]).is_err());
        bytes[0] = b'X';
        assert!(matrix_from_binary(&bytes).is_err());
        let mut nan = matrix_to_binary(&a);
        nan[12..20].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matrix_from_binary(&nan).is_err());
    }

    #[test]
    fn csv_parsing() {
        let m = matrix_from_csv("1,2\n3.5, -4e-3\n\n").unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.get(1, 1), -4e-3);
        assert!(matrix_from_csv("1,2\n3\n").is_err());
        assert!(matrix_from_csv("1;2\n").is_err());
        assert!(matrix_from_csv("").is_err());
        assert_eq!(vector_from_csv("1\n2\n").unwrap().as_slice(), &[1.0, 2.0]);
        assert!(vector_from_csv("1,2\n3,4\n").is_err());
    }

    proptest! {
        #[test]
        fn formats_round_trip_bit_exactly(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(-1e12f64..1e12, 25),
        ) {
            let data: Vec<f64> = seed.iter().take(rows * cols).map(|x| x / 7.0).collect();
            let a = Matrix::new(rows, cols, data).unwrap();
            prop_assert_eq!(&matrix_from_binary(&matrix_to_binary(&a)).unwrap(), &a);
            prop_assert_eq!(&matrix_from_csv(&matrix_to_csv(&a)).unwrap(), &a);
            let v = Vector::new(a.as_slice().to_vec()).unwrap();
            prop_assert_eq!(vector_from_csv(&vector_to_csv(&v)).unwrap(), v);
        }
    }
}
