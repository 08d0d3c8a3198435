//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    let sym = symmetric_part(m);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn symmetric_part(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `(min, max)` eigenvalue of the symmetric part.
pub fn eigen_range(m: &Matrix) -> (f64, f64) {
    let ev = sym_eigenvalues(m);
    (ev[0], ev[ev.len() - 1])
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}

/// Frobenius norm of `m - mᵀ`.
pub fn asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).norm()
}

pub fn inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    let lu = m.clone().lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() < 1e-300 {
        return Err(Error::Singular(what.to_string()));
    }
    lu.try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Solves `m x = rhs` by LU.
pub fn solve(m: &Matrix, rhs: &Vector, what: &str) -> Result<Vector> {
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let c = rows[0].len();
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::invalid("ragged matrix rows"));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn max_abs_diff(a: &Vector, b: &Vector) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_range_of_diagonal() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, -1.0, 2.0]));
        assert_eq!(eigen_range(&m), (-1.0, 3.0));
    }

    #[test]
    fn asymmetry_of_shear() {
        let a = from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!((asymmetry(&a) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(eigen_range(&a), (0.5, 1.5));
    }

    #[test]
    fn singular_inverse_is_error() {
        let m = from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(inverse(&m, "m"), Err(Error::Singular(_))));
    }
}
