//! Dense symmetric eigensolver (cyclic Jacobi) and orthogonal changes of frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symfunc::SymVec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("matrix must be square and non-empty")]
    NotSquare,
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("matrix has a non-finite entry")]
    NonFinite,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("matrix is not orthogonal (residual {0:e})")]
    NotOrthogonal(f64),
}

/// Dense square matrix, row-major. Used for orthogonal frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectraError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(SpectraError::NotSquare);
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SpectraError::NonFinite);
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, SpectraError> {
        if self.n != other.n {
            return Err(SpectraError::DimensionMismatch(self.n, other.n));
        }
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix order");
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Mᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix order");
        let mut out = vec![0.0; self.n];
        for (i, xi) in x.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.get(i, j) * xi;
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// `max |QᵀQ - I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| self.get(k, i) * self.get(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Symmetric matrix stored as its packed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SymMatrix {
    fn offset(n: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * n - i * (i + 1) / 2 + j
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    /// Requires exact symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectraError> {
        let dense = Matrix::from_rows(rows)?;
        let n = dense.n();
        for i in 0..n {
            for j in i + 1..n {
                if dense.get(i, j) != dense.get(j, i) {
                    return Err(SpectraError::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self::symmetrize(&dense))
    }

    /// `(M + Mᵀ)/2` of an arbitrary square matrix.
    pub fn symmetrize(dense: &Matrix) -> Self {
        let n = dense.n();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, 0.5 * (dense.get(i, j) + dense.get(j, i)));
            }
        }
        m
    }

    pub fn from_rows_symmetrized(rows: &[Vec<f64>]) -> Result<Self, SpectraError> {
        Ok(Self::symmetrize(&Matrix::from_rows(rows)?))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[Self::offset(self.n, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let o = Self::offset(self.n, i, j);
        self.upper[o] = value;
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.to_dense().rows()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                sum += self.get(i, j).powi(2);
            }
        }
        sum.sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix order");
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `xᵀ M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.upper
            .iter()
            .zip(&other.upper)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `A = Qᵀ diag(values) Q`, eigenvectors stored as the rows of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: SymVec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.vectors.n();
        let values = self.values.entries();
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n)
                    .map(|k| self.vectors.get(k, i) * values[k] * self.vectors.get(k, j))
                    .sum();
                m.set(i, j, v);
            }
        }
        m
    }

    /// Coordinates of `x` in the eigenframe, `Q x`.
    pub fn to_frame(&self, x: &[f64]) -> Vec<f64> {
        self.vectors.mul_vec(x)
    }

    /// Inverse of [`to_frame`](Self::to_frame), `Qᵀ y`.
    pub fn from_frame(&self, y: &[f64]) -> Vec<f64> {
        self.vectors.tr_mul_vec(y)
    }
}

const MAX_SWEEPS: usize = 50;
const OFF_DIAGONAL_TOL: f64 = 1e-14;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Pivots are visited in the fixed order `(0,1), (0,2), …, (n-2,n-1)` each
/// sweep, until the off-diagonal Frobenius norm drops below `1e-14 ‖A‖_F`.
/// Eigenvalues come back ascending; equal values keep their pivot order.
pub fn eigh(a: &SymMatrix) -> Result<EigenDecomposition, SpectraError> {
    let n = a.n();
    if n == 0 {
        return Err(SpectraError::NotSquare);
    }
    if a.upper.iter().any(|v| !v.is_finite()) {
        return Err(SpectraError::NonFinite);
    }
    let mut m = a.to_dense();
    // columns of v are eigenvectors
    let mut v = Matrix::identity(n);
    let norm = a.frobenius();
    let target = OFF_DIAGONAL_TOL * norm;

    let off_norm = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&m);
        if off <= target {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(SpectraError::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).total_cmp(&m.get(j, j)));
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n);
    for (row, &col) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(row, k, v.get(k, col));
        }
    }
    Ok(EigenDecomposition {
        values: SymVec::new(values).map_err(|_| SpectraError::NonFinite)?,
        vectors,
    })
}

const ORTHOGONALITY_TOL: f64 = 1e-12;

/// `Qᵀ M Q` for an orthogonal `Q`.
pub fn conjugate_by(q: &Matrix, m: &SymMatrix) -> Result<SymMatrix, SpectraError> {
    if q.n() != m.n() {
        return Err(SpectraError::DimensionMismatch(q.n(), m.n()));
    }
    let residual = q.orthogonality_residual();
    if residual > ORTHOGONALITY_TOL {
        return Err(SpectraError::NotOrthogonal(residual));
    }
    let n = m.n();
    // MQ
    let mq = m.to_dense().matmul(q)?;
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n).map(|k| q.get(k, i) * mq.get(k, j)).sum();
            out.set(i, j, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_input_sorts_with_permutation() {
        let a = SymMatrix::diagonal(&[3.0, 1.0, 2.0]);
        let e = eigh(&a).unwrap();
        assert_eq!(e.values.entries(), &[1.0, 2.0, 3.0]);
        let rows = e.vectors.rows();
        assert_eq!(rows[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(rows[1], vec![0.0, 0.0, 1.0]);
        assert_eq!(rows[2], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn classic_two_by_two() {
        let a = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = eigh(&a).unwrap();
        assert!((e.values.entries()[0] - 1.0).abs() < 1e-14);
        assert!((e.values.entries()[1] - 3.0).abs() < 1e-14);
        assert!(e.vectors.orthogonality_residual() < 1e-14);
        assert!(e.reconstruct().max_abs_diff(&a) < 1e-14);
    }

    #[test]
    fn ties_keep_pivot_order() {
        let e = eigh(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.vectors, Matrix::identity(3));
    }

    #[test]
    fn rejects_asymmetric_rows() {
        let err = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap_err();
        assert_eq!(err, SpectraError::NotSymmetric(0, 1));
        let s = SymMatrix::from_rows_symmetrized(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(s.get(0, 1), 1.0);
    }

    #[test]
    fn zero_matrix() {
        let e = eigh(&SymMatrix::zeros(4)).unwrap();
        assert!(e.values.entries().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn conjugation_examples() {
        let m = SymMatrix::diagonal(&[1.0, 2.0]);
        assert_eq!(conjugate_by(&Matrix::identity(2), &m).unwrap(), m);
        let rot = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let out = conjugate_by(&rot, &m).unwrap();
        assert!(out.max_abs_diff(&SymMatrix::diagonal(&[2.0, 1.0])) < 1e-15);
        let skew = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(conjugate_by(&skew, &m), Err(SpectraError::NotOrthogonal(_))));
    }

    #[test]
    fn packed_storage_roundtrip() {
        let rows = vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 5.0],
            vec![3.0, 5.0, 6.0],
        ];
        let m = SymMatrix::from_rows(&rows).unwrap();
        assert_eq!(m.rows(), rows);
        assert_eq!(m.quadratic_form(&[1.0, 0.0, 1.0]), 1.0 + 6.0 + 6.0);
    }
}
