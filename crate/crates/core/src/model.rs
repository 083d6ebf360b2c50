//! Vectors, dense matrices, supports and the elementary operators used
//! throughout the crate: norms, hard thresholding, the sign map, support
//! partitioning and the best K-term approximation error.

use std::cmp::Ordering;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Finite real vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar")]
pub struct Vector<T>(Vec<T>);

impl<T: Scalar> Vector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        check_finite(&values)?;
        Ok(Vector(values))
    }

    /// Wraps values produced by arithmetic on finite inputs. Debug builds still check.
    pub(crate) fn from_raw(values: Vec<T>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Vector(values)
    }

    pub fn zeros(len: usize) -> Self {
        Vector(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn norm(&self, p: Norm) -> T {
        norm_lp(self, p)
    }

    pub fn norm1(&self) -> T {
        norm1(&self.0)
    }

    pub fn norm2(&self) -> T {
        norm2(&self.0)
    }

    pub fn sub(&self, other: &Vector<T>) -> Result<Vector<T>> {
        same_len("vector difference", self.len(), other.len())?;
        Ok(Vector::from_raw(
            self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &Vector<T>) -> Result<Vector<T>> {
        same_len("vector sum", self.len(), other.len())?;
        Ok(Vector::from_raw(
            self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect(),
        ))
    }

    pub fn scale(&self, c: T) -> Vector<T> {
        Vector::from_raw(self.0.iter().map(|&a| a * c).collect())
    }

    pub fn dot(&self, other: &Vector<T>) -> Result<T> {
        same_len("inner product", self.len(), other.len())?;
        Ok(dot(&self.0, &other.0))
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Vector<T> {
    type Error = Error;

    fn try_from(values: Vec<T>) -> Result<Self> {
        Vector::new(values)
    }
}

impl<T> From<Vector<T>> for Vec<T> {
    fn from(v: Vector<T>) -> Vec<T> {
        v.0
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

fn same_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

/// Dense real matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        same_len("matrix entries", rows * cols, data.len())?;
        check_finite(&data)?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            same_len("matrix row length", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        Matrix::new(n, n, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Matrix::new(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn frobenius_norm(&self) -> T {
        norm2(&self.data)
    }

    pub fn transpose(&self) -> Matrix<T> {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn scale(&self, c: T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * c).collect(),
        }
    }

    /// `out = A x`, each row accumulated left to right.
    pub(crate) fn mul_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }

    /// `out = Aᵀ w`, accumulated over rows in increasing order.
    pub(crate) fn mul_t_into(&self, w: &[T], out: &mut [T]) {
        debug_assert_eq!(w.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = T::zero());
        for (&wi, row) in w.iter().zip(self.data.chunks_exact(self.cols)) {
            if wi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(row) {
                *o = *o + a * wi;
            }
        }
    }

    /// `out = A_S c` for a vector supported on `indices` with coefficients `coeffs`.
    pub(crate) fn mul_sparse_into(&self, indices: &[usize], coeffs: &[T], out: &mut [T]) {
        debug_assert_eq!(indices.len(), coeffs.len());
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            let mut acc = T::zero();
            for (&j, &c) in indices.iter().zip(coeffs) {
                acc = acc + row[j] * c;
            }
            *o = acc;
        }
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn norm1<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x.abs())
}

pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    // Scaled accumulation so large unnormalized entries cannot overflow.
    let scale = norm_inf(a);
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let ss = a.iter().fold(T::zero(), |acc, &x| {
        let r = x / scale;
        acc + r * r
    });
    scale * ss.sqrt()
}

pub(crate) fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// Which ℓp "norm" to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Support cardinality.
    L0,
    L1,
    #[default]
    L2,
    Inf,
}

pub fn norm_lp<T: Scalar>(v: &Vector<T>, p: Norm) -> T {
    let a = v.as_slice();
    match p {
        Norm::L0 => T::from_usize_lossy(a.iter().filter(|x| **x != T::zero()).count()),
        Norm::L1 => norm1(a),
        Norm::L2 => norm2(a),
        Norm::Inf => norm_inf(a),
    }
}

/// Strictly increasing set of 0-based indices into a vector of length `dim`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportSet {
    dim: usize,
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "support indices must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::invalid(format!(
                "support index {bad} out of bounds for dimension {dim}"
            )));
        }
        Ok(SupportSet { dim, indices })
    }

    /// Sorts the indices first; duplicates are rejected.
    pub fn from_unordered(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        SupportSet::new(indices, dim)
    }

    pub fn empty(dim: usize) -> Self {
        SupportSet {
            dim,
            indices: Vec::new(),
        }
    }

    pub fn full(dim: usize) -> Self {
        SupportSet {
            dim,
            indices: (0..dim).collect(),
        }
    }

    /// `supp v = { i : v_i ≠ 0 }`.
    pub fn support_of<T: Scalar>(v: &Vector<T>) -> Self {
        SupportSet {
            dim: v.len(),
            indices: (0..v.len()).filter(|&i| v[i] != T::zero()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> SupportSet {
        let mut mask = vec![true; self.dim];
        for &i in &self.indices {
            mask[i] = false;
        }
        SupportSet {
            dim: self.dim,
            indices: (0..self.dim).filter(|&i| mask[i]).collect(),
        }
    }

    pub fn union(&self, other: &SupportSet) -> Result<SupportSet> {
        same_len("support dimension", self.dim, other.dim)?;
        let mut indices: Vec<usize> = self.indices.iter().chain(&other.indices).copied().collect();
        indices.sort_unstable();
        indices.dedup();
        Ok(SupportSet { dim: self.dim, indices })
    }

    pub fn is_disjoint(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|&i| !other.contains(i))
    }
}

/// The head set `T₀` and the decreasing-magnitude blocks `T₁, T₂, …` covering its complement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPartition {
    pub t0: SupportSet,
    pub blocks: Vec<SupportSet>,
}

impl SupportPartition {
    /// `T₀ ∪ T₁`.
    pub fn t01(&self) -> SupportSet {
        match self.blocks.first() {
            Some(t1) => self.t0.union(t1).expect("same dimension"),
            None => self.t0.clone(),
        }
    }

    /// Blocks `T₂, T₃, …`.
    pub fn tail_blocks(&self) -> &[SupportSet] {
        self.blocks.get(1..).unwrap_or(&[])
    }

    /// Complement of `T₀ ∪ T₁`.
    pub fn t01_complement(&self) -> SupportSet {
        self.t01().complement()
    }
}

/// Indices ordered by decreasing magnitude; equal magnitudes keep increasing index order.
fn order_by_magnitude<T: Scalar>(values: &[T], candidates: &mut [usize]) {
    candidates.sort_by(|&a, &b| values[b].abs().partial_cmp(&values[a].abs()).unwrap_or(Ordering::Equal));
}

/// Indices of the `k` largest-magnitude entries, lower index winning ties, returned sorted.
pub(crate) fn top_k_indices<T: Scalar>(values: &[T], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order_by_magnitude(values, &mut order);
    order.truncate(k);
    order.sort_unstable();
    order
}

/// `H_K`: keeps the `k` strongest amplitudes and zeroes the rest.
pub fn hard_threshold<T: Scalar>(v: &Vector<T>, k: usize) -> Result<Vector<T>> {
    if k > v.len() {
        return Err(Error::invalid(format!(
            "hard threshold level {k} exceeds dimension {}",
            v.len()
        )));
    }
    let mut out = vec![T::zero(); v.len()];
    for i in top_k_indices(v.as_slice(), k) {
        out[i] = v[i];
    }
    Ok(Vector::from_raw(out))
}

/// Sign with the convention `sign(0) = -1`.
#[inline]
pub fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

/// Componentwise [`sign`]; every entry of the result is ±1.
pub fn sign_vec<T: Scalar>(v: &Vector<T>) -> Vector<T> {
    Vector::from_raw(v.iter().map(|&x| sign(x)).collect())
}

/// Best `k`-term approximation error `‖x − H_k(x)‖₁ / √k`.
pub fn compress_error_e0<T: Scalar>(x: &Vector<T>, k: usize) -> Result<T> {
    if k == 0 || k > x.len() {
        return Err(Error::invalid(format!(
            "sparsity level {k} must lie in 1..={}",
            x.len()
        )));
    }
    let head = top_k_indices(x.as_slice(), k);
    let mut tail = T::zero();
    let mut next = head.iter().peekable();
    for (i, &xi) in x.iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
        } else {
            tail = tail + xi.abs();
        }
    }
    Ok(tail / T::from_usize_lossy(k).sqrt())
}

/// Splits the complement of `t0` into blocks of `k` indices by decreasing `|h_i|`.
pub fn partition_support<T: Scalar>(h: &Vector<T>, t0: &SupportSet, k: usize) -> Result<SupportPartition> {
    if t0.dim() != h.len() {
        return Err(Error::invalid(format!(
            "head set dimension {} does not match vector length {}",
            t0.dim(),
            h.len()
        )));
    }
    if k == 0 || k > h.len() {
        return Err(Error::invalid(format!("block size {k} must lie in 1..={}", h.len())));
    }
    if t0.len() > k {
        return Err(Error::invalid(format!(
            "head set has {} indices, more than the block size {k}",
            t0.len()
        )));
    }
    let mut rest = t0.complement().indices;
    order_by_magnitude(h.as_slice(), &mut rest);
    let blocks = rest
        .chunks(k)
        .map(|chunk| SupportSet::from_unordered(chunk.to_vec(), h.len()).expect("valid block"))
        .collect();
    Ok(SupportPartition { t0: t0.clone(), blocks })
}

/// Zeroes every entry outside `s`.
pub fn restrict<T: Scalar>(v: &Vector<T>, s: &SupportSet) -> Result<Vector<T>> {
    if s.dim() != v.len() {
        return Err(Error::invalid(format!(
            "support dimension {} does not match vector length {}",
            s.dim(),
            v.len()
        )));
    }
    let mut out = vec![T::zero(); v.len()];
    for &i in s.indices() {
        out[i] = v[i];
    }
    Ok(Vector::from_raw(out))
}

pub fn mat_vec<T: Scalar>(a: &Matrix<T>, v: &Vector<T>) -> Result<Vector<T>> {
    same_len("matrix-vector product", a.cols(), v.len())?;
    let mut out = vec![T::zero(); a.rows()];
    a.mul_into(v.as_slice(), &mut out);
    Vector::new(out)
}

pub fn mat_transpose_vec<T: Scalar>(a: &Matrix<T>, w: &Vector<T>) -> Result<Vector<T>> {
    same_len("transposed matrix-vector product", a.rows(), w.len())?;
    let mut out = vec![T::zero(); a.cols()];
    a.mul_t_into(w.as_slice(), &mut out);
    Vector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> Vector<f64> {
        Vector::new(values.to_vec()).unwrap()
    }

    fn s(indices: &[usize], dim: usize) -> SupportSet {
        SupportSet::new(indices.to_vec(), dim).unwrap()
    }

    #[test]
    fn norms() {
        assert_eq!(norm_lp(&v(&[3.0, -4.0]), Norm::L2), 5.0);
        assert_eq!(norm_lp(&v(&[3.0, -4.0]), Norm::L1), 7.0);
        assert_eq!(norm_lp(&v(&[0.0, 0.0, 2.0]), Norm::L0), 1.0);
        assert_eq!(norm_lp(&v(&[1.0, -9.0, 2.0]), Norm::Inf), 9.0);
        assert_eq!(norm_lp(&v(&[0.0, 0.0]), Norm::L2), 0.0);
        assert_eq!(Norm::default(), Norm::L2);
    }

    #[test]
    fn norm2_does_not_overflow() {
        let big = v(&[1e200, 1e200]);
        assert!((big.norm2() / 1e200 - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(Matrix::new(1, 2, vec![0.0, f64::INFINITY]).is_err());
        assert!(Matrix::<f64>::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Matrix::<f64>::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn hard_threshold_examples() {
        let x = v(&[3.0, -1.0, 0.0, 2.0]);
        assert_eq!(hard_threshold(&x, 2).unwrap(), v(&[3.0, 0.0, 0.0, 2.0]));
        assert_eq!(hard_threshold(&x, 4).unwrap(), x);
        assert_eq!(hard_threshold(&v(&[1.0, -1.0, 0.0]), 1).unwrap(), v(&[1.0, 0.0, 0.0]));
        assert_eq!(hard_threshold(&x, 0).unwrap(), Vector::zeros(4));
        assert!(hard_threshold(&x, 5).is_err());
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sign_vec(&v(&[2.5, -3.0, 0.0])), v(&[1.0, -1.0, -1.0]));
        assert_eq!(sign_vec(&Vector::<f64>::zeros(3)), v(&[-1.0, -1.0, -1.0]));
        assert_eq!(sign_vec(&v(&[0.1, 4.0])), v(&[1.0, 1.0]));
        assert_eq!(sign(-0.0f64), -1.0);
    }

    #[test]
    fn e0_examples() {
        assert_eq!(compress_error_e0(&v(&[0.0, 5.0, 0.0, -1.0]), 2).unwrap(), 0.0);
        assert_eq!(compress_error_e0(&v(&[1.0, 1.0, 1.0, 1.0]), 1).unwrap(), 3.0);
        assert_eq!(compress_error_e0(&v(&[2.0, 1.0, 1.0]), 1).unwrap(), 2.0);
        assert!((compress_error_e0(&v(&[4.0, 1.0, 1.0, 2.0]), 2).unwrap() - 2.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(compress_error_e0(&v(&[1.0]), 0).is_err());
        assert!(compress_error_e0(&v(&[1.0]), 2).is_err());
    }

    #[test]
    fn partition_examples() {
        let h = v(&[5.0, -4.0, 3.0, 2.0, 1.0, 0.5]);
        let p = partition_support(&h, &s(&[0, 1], 6), 2).unwrap();
        assert_eq!(p.blocks, vec![s(&[2, 3], 6), s(&[4, 5], 6)]);
        assert_eq!(p.t01(), s(&[0, 1, 2, 3], 6));
        assert_eq!(p.tail_blocks(), &[s(&[4, 5], 6)]);

        // All ties off the head set: blocks follow index order.
        let h = v(&[7.0, 0.0, 0.0, 0.0, 0.0]);
        let p = partition_support(&h, &s(&[0], 5), 2).unwrap();
        assert_eq!(p.blocks, vec![s(&[1, 2], 5), s(&[3, 4], 5)]);

        // Complement of size 4 with K = 2 splits as 2 + 2; size 3 leaves a short last block.
        let h = v(&[0.0, 1.0, 4.0, 2.0, 3.0]);
        let p = partition_support(&h, &s(&[0], 5), 2).unwrap();
        assert_eq!(p.blocks, vec![s(&[2, 4], 5), s(&[1, 3], 5)]);
        let p = partition_support(&h, &s(&[0, 1], 5), 2).unwrap();
        assert_eq!(p.blocks, vec![s(&[2, 4], 5), s(&[3], 5)]);

        assert!(partition_support(&h, &s(&[0, 1, 2], 5), 2).is_err());
        assert!(partition_support(&h, &SupportSet::empty(4), 2).is_err());
    }

    #[test]
    fn support_set_validation() {
        assert!(SupportSet::new(vec![1, 1], 3).is_err());
        assert!(SupportSet::new(vec![2, 1], 3).is_err());
        assert!(SupportSet::new(vec![3], 3).is_err());
        assert!(SupportSet::from_unordered(vec![2, 0], 3).is_ok());
        assert_eq!(s(&[1], 3).complement(), s(&[0, 2], 3));
    }

    #[test]
    fn restrict_examples() {
        let x = v(&[1.0, 2.0, 3.0]);
        assert_eq!(restrict(&x, &s(&[1], 3)).unwrap(), v(&[0.0, 2.0, 0.0]));
        assert_eq!(restrict(&x, &SupportSet::full(3)).unwrap(), x);
        assert_eq!(restrict(&x, &SupportSet::empty(3)).unwrap(), Vector::zeros(3));
        assert!(restrict(&x, &SupportSet::full(2)).is_err());
    }

    #[test]
    fn mat_vec_examples() {
        let id = Matrix::<f64>::identity(2).unwrap();
        assert_eq!(mat_vec(&id, &v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));
        let z = Matrix::<f64>::zeros(3, 2).unwrap();
        assert_eq!(mat_vec(&z, &v(&[3.0, 4.0])).unwrap(), Vector::zeros(3));
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(mat_vec(&a, &v(&[1.0, 1.0])).unwrap(), v(&[3.0, 7.0]));
        assert_eq!(mat_transpose_vec(&a, &v(&[1.0, 1.0])).unwrap(), v(&[4.0, 6.0]));
        assert!(mat_vec(&a, &v(&[1.0])).is_err());
        assert!(mat_transpose_vec(&a, &v(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let x = Vector::new(vec![3.0f32, -4.0]).unwrap();
        assert_eq!(x.norm2(), 5.0f32);
        assert_eq!(hard_threshold(&x, 1).unwrap(), Vector::new(vec![0.0f32, -4.0]).unwrap());
    }
}
