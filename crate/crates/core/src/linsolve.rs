//! Sparse matrices assembled from triplet streams, and a direct solver.
//!
//! Assembly sorts triplets by `(row, col, value)` before summing duplicates,
//! so the finalized matrix is bitwise independent of the arrival order of the
//! triplets. The factorization is a fill-reducing sparse LU with partial
//! pivoting (faer), followed by iterative refinement against a residual bound.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use num_traits::Float;

use crate::error::{MpxaError, Result};
use crate::scalar::Scalar;

/// Stream of `(row, col, value)` contributions with fixed dimensions.
#[derive(Clone, Debug, Default)]
pub struct Triplets<T> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> Triplets<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    pub fn with_capacity(rows: usize, cols: usize, cap: usize) -> Self {
        Self { rows, cols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Add every entry of `m`, shifted by `(row0, col0)` and scaled.
    pub fn push_block(&mut self, row0: usize, col0: usize, m: &CsrMatrix<T>, scale: T) {
        for (i, j, v) in m.iter() {
            self.entries.push((row0 + i, col0 + j, v * scale));
        }
    }

    pub fn finalize(self) -> Result<CsrMatrix<T>> {
        assemble(self.entries, self.rows, self.cols)
    }
}

/// Compressed sparse row matrix. Immutable once built.
#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
    symmetric: OnceLock<bool>,
}

impl<T: Scalar> PartialEq for CsrMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.indptr == other.indptr
            && self.indices == other.indices
            && self.data == other.data
    }
}

/// Build a matrix from a triplet stream, summing duplicates.
///
/// The reduction sorts by `(row, col)` and then by value (total order), so
/// duplicate contributions are added in an order that does not depend on how
/// the stream was produced.
pub fn assemble<T: Scalar>(
    mut entries: Vec<(usize, usize, T)>,
    rows: usize,
    cols: usize,
) -> Result<CsrMatrix<T>> {
    for &(i, j, _) in &entries {
        if i >= rows || j >= cols {
            return Err(MpxaError::IndexOutOfRange { row: i, col: j, rows, cols });
        }
    }
    entries.sort_unstable_by(|a, b| {
        (a.0, a.1)
            .cmp(&(b.0, b.1))
            .then_with(|| a.2.to_f64_lossy().total_cmp(&b.2.to_f64_lossy()))
    });
    let mut indptr = vec![0usize; rows + 1];
    let mut indices = Vec::with_capacity(entries.len());
    let mut data: Vec<T> = Vec::with_capacity(entries.len());
    let mut last: Option<(usize, usize)> = None;
    for (i, j, v) in entries {
        if last == Some((i, j)) {
            let end = data.len() - 1;
            data[end] = data[end] + v;
        } else {
            indices.push(j);
            data.push(v);
            indptr[i + 1] += 1;
            last = Some((i, j));
        }
    }
    for i in 0..rows {
        indptr[i + 1] += indptr[i];
    }
    Ok(CsrMatrix { rows, cols, indptr, indices, data, symmetric: OnceLock::new() })
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            data: Vec::new(),
            symmetric: OnceLock::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: diag.to_vec(),
            symmetric: OnceLock::new(),
        }
    }

    /// Dense row-major input; exact zeros are dropped.
    pub fn from_dense(rows: usize, cols: usize, dense: &[T]) -> Self {
        let mut t = Triplets::new(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = dense[i * cols + j];
                if v != T::zero() {
                    t.push(i, j, v);
                }
            }
        }
        t.finalize().expect("indices in range by construction")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.data[r.start + p],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows * self.cols];
        for (i, j, v) in self.iter() {
            out[i * self.cols + j] = v;
        }
        out
    }

    pub fn to_triplets(&self) -> Triplets<T> {
        let mut t = Triplets::with_capacity(self.rows, self.cols, self.nnz());
        t.push_block(0, 0, self, T::one());
        t
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(MpxaError::DimensionMismatch(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).fold(T::zero(), |acc, (j, v)| acc + v * x[j]))
            .collect())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Triplets::with_capacity(self.cols, self.rows, self.nnz());
        for (i, j, v) in self.iter() {
            t.push(j, i, v);
        }
        t.finalize().expect("transpose indices in range")
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = *v * s);
        out.symmetric = OnceLock::new();
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: T) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MpxaError::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut t = self.to_triplets();
        t.push_block(0, 0, other, s);
        t.finalize()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, T::one())
    }

    /// Sparse product `self * other` (row-by-row Gustavson accumulation).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(MpxaError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![T::zero(); other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut pattern = Vec::new();
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for i in 0..self.rows {
            pattern.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = T::zero();
                        pattern.push(j);
                    }
                    acc[j] = acc[j] + a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                indices.push(j);
                data.push(acc[j]);
            }
            indptr[i + 1] = indices.len();
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            data,
            symmetric: OnceLock::new(),
        })
    }

    pub fn frobenius_norm(&self) -> T {
        Float::sqrt(self.data.iter().fold(T::zero(), |acc, &v| acc + v * v))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| Float::max(acc, Float::abs(v)))
    }

    /// Drop entries with magnitude at most `tol`.
    pub fn pruned(&self, tol: T) -> Self {
        let mut t = Triplets::new(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            if Float::abs(v) > tol {
                t.push(i, j, v);
            }
        }
        t.finalize().expect("indices in range")
    }

    /// Numerical symmetry, detected once and cached: every entry matches its
    /// transpose to `1e-12 * max|a|`.
    pub fn is_symmetric(&self) -> bool {
        *self.symmetric.get_or_init(|| {
            if self.rows != self.cols {
                return false;
            }
            let tol = T::of(1e-12) * self.max_abs();
            self.iter().all(|(i, j, v)| Float::abs(v - self.get(j, i)) <= tol)
        })
    }

    /// Relative Frobenius asymmetry `‖A - Aᵀ‖_F / ‖A‖_F`.
    pub fn asymmetry(&self) -> T {
        let diff = self.add_scaled(&self.transpose(), -T::one()).expect("square");
        let n = self.frobenius_norm();
        if n == T::zero() {
            T::zero()
        } else {
            diff.frobenius_norm() / n
        }
    }

    /// Write in coordinate text format, one `i j value` line per entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "% {} {} {}", self.rows, self.cols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(w, "{} {} {:.16e}", i, j, v.to_f64_lossy())?;
        }
        Ok(())
    }

    pub fn to_coordinate_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "% {} {} {}", self.rows, self.cols, self.nnz());
        for (i, j, v) in self.iter() {
            let _ = writeln!(s, "{} {} {:.16e}", i, j, v.to_f64_lossy());
        }
        s
    }
}

impl CsrMatrix<f64> {
    /// Read the coordinate format written by [`CsrMatrix::write_coordinate`].
    /// Without a `%` header line the dimensions are inferred from the indices.
    pub fn read_coordinate<R: BufRead>(r: R) -> Result<Self> {
        let mut dims: Option<(usize, usize)> = None;
        let mut entries = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('%') {
                let parts: Vec<usize> =
                    rest.split_whitespace().filter_map(|p| p.parse().ok()).collect();
                if parts.len() >= 2 && dims.is_none() {
                    dims = Some((parts[0], parts[1]));
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || MpxaError::InvalidParameter(format!("bad matrix line {}", lineno + 1));
            if parts.len() != 3 {
                return Err(bad());
            }
            let i: usize = parts[0].parse().map_err(|_| bad())?;
            let j: usize = parts[1].parse().map_err(|_| bad())?;
            let v: f64 = parts[2].parse().map_err(|_| bad())?;
            entries.push((i, j, v));
        }
        let (rows, cols) = dims.unwrap_or_else(|| {
            let r = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
            let c = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
            (r, c)
        });
        assemble(entries, rows, cols)
    }
}

/// Outcome of a direct solve.
#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub x: Vec<T>,
    /// Achieved `‖Ax - b‖ / ‖b‖` (absolute when `b = 0`).
    pub residual: f64,
    pub refinement_steps: usize,
}

/// Residual bound used by [`solve_direct`]: `1e-9` in double precision.
pub fn default_residual_bound<T: Scalar>() -> f64 {
    (1e4 * T::epsilon().to_f64_lossy()).max(1e-9)
}

fn norm2<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.to_f64_lossy().powi(2)).sum::<f64>().sqrt()
}

/// LU factorization of a square sparse matrix.
pub struct SparseLu<T: Scalar> {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, T>,
}

impl<T: Scalar> SparseLu<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(MpxaError::DimensionMismatch(format!(
                "solve requires a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let trip: Vec<Triplet<usize, usize, T>> =
            a.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, T>::try_new_from_triplets(a.rows, a.cols, &trip)
            .map_err(|e| MpxaError::SingularMatrix(format!("{e:?}")))?;
        let lu = m.sp_lu().map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => {
                MpxaError::SingularMatrix(format!("structurally singular, no pivot at step {index}"))
            }
            other => MpxaError::SingularMatrix(format!("{other:?}")),
        })?;
        Ok(Self { n: a.rows, lu })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut rhs = faer::Col::<T>::from_fn(self.n, |i| b[i]);
        self.lu.solve_in_place(rhs.as_mat_mut());
        (0..self.n).map(|i| rhs[i]).collect()
    }
}

/// Solve `A x = b`, refining iteratively until `‖Ax-b‖/‖b‖` meets the bound.
pub fn solve_direct<T: Scalar>(a: &CsrMatrix<T>, b: &[T]) -> Result<Solution<T>> {
    solve_direct_with_bound(a, b, default_residual_bound::<T>())
}

pub fn solve_direct_with_bound<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    bound: f64,
) -> Result<Solution<T>> {
    if b.len() != a.rows {
        return Err(MpxaError::DimensionMismatch(format!(
            "rhs has {} entries for {} rows",
            b.len(),
            a.rows
        )));
    }
    let lu = SparseLu::factor(a)?;
    let bnorm = norm2(b);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut x = lu.solve(b);
    if let Some(i) = x.iter().position(|v| !Float::is_finite(*v)) {
        return Err(MpxaError::SingularMatrix(format!(
            "numerically zero pivot, first non-finite unknown at index {i}"
        )));
    }
    let mut steps = 0;
    let mut residual;
    loop {
        let ax = a.mul_vec(&x)?;
        let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        residual = norm2(&r) / scale;
        if residual <= bound || steps >= 3 {
            break;
        }
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, &d)| *xi = *xi + d);
        steps += 1;
    }
    if !residual.is_finite() || residual > bound {
        return Err(MpxaError::ResidualTooLarge { achieved: residual, bound });
    }
    Ok(Solution { x, residual, refinement_steps: steps })
}

/// Solve a singular system whose nullspace is spanned by `null_basis` (each
/// of length `n`), selecting the solution orthogonal to every basis vector.
/// Implemented as a bordered system with one multiplier per basis vector.
pub fn solve_with_nullspace<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    null_basis: &[Vec<T>],
) -> Result<Solution<T>> {
    let n = a.rows;
    let k = null_basis.len();
    let mut t = Triplets::with_capacity(n + k, n + k, a.nnz() + 2 * n * k);
    t.push_block(0, 0, a, T::one());
    for (c, v) in null_basis.iter().enumerate() {
        if v.len() != n {
            return Err(MpxaError::DimensionMismatch("nullspace vector length".into()));
        }
        for (i, &vi) in v.iter().enumerate() {
            if vi != T::zero() {
                t.push(i, n + c, vi);
                t.push(n + c, i, vi);
            }
        }
    }
    let big = t.finalize()?;
    let mut rhs = b.to_vec();
    rhs.extend(std::iter::repeat_n(T::zero(), k));
    let sol = solve_direct(&big, &rhs)?;
    Ok(Solution { x: sol.x[..n].to_vec(), residual: sol.residual, refinement_steps: sol.refinement_steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = assemble(vec![(0, 0, 1.0), (0, 0, 2.0)], 1, 1).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 3.0);
    }

    #[test]
    fn empty_stream_gives_zero_matrix() {
        let m = assemble::<f64>(vec![], 3, 2).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.to_dense(), vec![0.0; 6]);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let e = assemble(vec![(2, 0, 1.0)], 2, 2).unwrap_err();
        assert!(matches!(e, MpxaError::IndexOutOfRange { row: 2, .. }));
    }

    #[test]
    fn identity_solve() {
        let a = CsrMatrix::<f64>::identity(4);
        let s = solve_direct(&a, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.x, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_dense(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let b = CsrMatrix::from_dense(3, 2, &[1.0, 1.0, 0.0, 2.0, 4.0, 0.0]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.to_dense(), vec![9.0, 1.0, 0.0, 6.0]);
    }

    #[test]
    fn singular_matrix_reports() {
        let a = assemble(vec![(0, 0, 1.0), (1, 0, 1.0)], 2, 2).unwrap();
        assert!(solve_direct(&a, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn single_precision_solve() {
        let a = CsrMatrix::<f32>::from_dense(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = solve_direct(&a, &[1.0, 2.0]).unwrap();
        assert!((s.x[0] - 1.0 / 11.0).abs() < 1e-6);
        assert!((s.x[1] - 7.0 / 11.0).abs() < 1e-6);
    }

    #[test]
    fn coordinate_round_trip() {
        let a = CsrMatrix::from_dense(2, 2, &[1.5, 0.0, -2.25, 1e-300]);
        let text = a.to_coordinate_string();
        let b = CsrMatrix::read_coordinate(text.as_bytes()).unwrap();
        assert_eq!(a, b);
    }
}
