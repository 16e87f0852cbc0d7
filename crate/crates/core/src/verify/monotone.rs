//! Discrete maximum principle checks for cell-centered system matrices.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{MpxaError, Result};
use crate::SparseMatrix;

/// Largest system inverted densely.
pub const DENSE_INVERSE_CAP: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonotonicityMode {
    /// Sign pattern and diagonal dominance only.
    MMatrix,
    /// Also form the dense inverse and inspect its sign.
    InversePositivity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneClass {
    MMatrix,
    InversePositive,
    NonMonotone,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub n: usize,
    pub m_matrix: bool,
    pub positive_diagonal: bool,
    pub nonpositive_offdiagonal: bool,
    pub diagonally_dominant: bool,
    /// Most negative entry of the inverse (inverse mode only).
    pub min_inverse: Option<f64>,
    /// `None` when the sign pattern fails and no inverse was formed.
    pub class: Option<MonotoneClass>,
}

pub fn monotonicity_check(a: &SparseMatrix, mode: MonotonicityMode) -> Result<MonotonicityReport> {
    let n = a.rows();
    if a.cols() != n {
        return Err(MpxaError::DimensionMismatch(format!("{}x{} matrix is not square", n, a.cols())));
    }
    let tol = 1e-12 * a.max_abs();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut nonpos = true;
    for (i, j, v) in a.iter() {
        if i == j {
            diag[i] += v;
        } else {
            off[i] += v.abs();
            if v > tol {
                nonpos = false;
            }
        }
    }
    let posdiag = diag.iter().all(|&d| d > tol);
    let dominant = diag.iter().zip(&off).all(|(d, o)| *d + tol >= *o);
    let m_matrix = posdiag && nonpos && dominant;
    let mut report = MonotonicityReport {
        n,
        m_matrix,
        positive_diagonal: posdiag,
        nonpositive_offdiagonal: nonpos,
        diagonally_dominant: dominant,
        min_inverse: None,
        class: m_matrix.then_some(MonotoneClass::MMatrix),
    };
    if mode == MonotonicityMode::InversePositivity {
        if n > DENSE_INVERSE_CAP {
            return Err(MpxaError::SizeCap { n, cap: DENSE_INVERSE_CAP });
        }
        let dense = DMatrix::from_row_slice(n, n, &a.to_dense());
        let inv = dense
            .try_inverse()
            .ok_or_else(|| MpxaError::SingularMatrix("system matrix is not invertible".into()))?;
        let min = inv.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = inv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        report.min_inverse = Some(min);
        if !m_matrix {
            report.class = Some(if min >= -1e-12 * scale {
                MonotoneClass::InversePositive
            } else {
                MonotoneClass::NonMonotone
            });
        }
    }
    Ok(report)
}
