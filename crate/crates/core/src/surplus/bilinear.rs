use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

use super::SurplusOracle;

/// `b(x₁,x₂,x₃) = x₁·x₂ + x₁·x₃ + x₂·Ax₃` with `A` positive definite but
/// not symmetric. Cross Hessians are constant and known in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearSurplus {
    a: Matrix,
}

impl BilinearSurplus {
    pub fn new(a: Matrix) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::invalid("A must be square"));
        }
        let (lo, _) = linalg::eigen_range(&a);
        if !(lo > 0.0) {
            return Err(Error::invalid("symmetric part of A must be positive definite"));
        }
        if !(linalg::asymmetry(&a) > 0.0) {
            return Err(Error::invalid("A must not be symmetric"));
        }
        Ok(Self { a })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn eval(&self, xs: &[Vector]) -> Result<f64> {
        self.check(xs)?;
        Ok(xs[0].dot(&xs[1]) + xs[0].dot(&xs[2]) + xs[1].dot(&(&self.a * &xs[2])))
    }

    /// `D²_{x_i x_j} b`; zero-based indices.
    pub fn cross_hessian(&self, i: usize, j: usize) -> Result<Matrix> {
        let n = self.dim();
        let m = match (i, j) {
            (0, 1) | (1, 0) | (0, 2) | (2, 0) => Matrix::identity(n, n),
            (1, 2) => self.a.clone(),
            (2, 1) => self.a.transpose(),
            _ => return Err(Error::invalid(format!("no cross block ({i}, {j}) for m = 3"))),
        };
        Ok(m)
    }

    fn check(&self, xs: &[Vector]) -> Result<()> {
        if xs.len() != 3 {
            return Err(Error::invalid("bilinear surplus takes exactly three points"));
        }
        for x in xs {
            if x.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: x.len(),
                });
            }
        }
        Ok(())
    }
}

/// Either a hedonic-form oracle or the bilinear counterexample.
#[derive(Debug, Clone, PartialEq)]
pub enum Surplus {
    Hedonic(SurplusOracle),
    Bilinear(BilinearSurplus),
}

impl Surplus {
    pub fn arity(&self) -> usize {
        match self {
            Surplus::Hedonic(o) => o.arity(),
            Surplus::Bilinear(_) => 3,
        }
    }

    pub fn eval_b(&self, xs: &[Vector]) -> Result<f64> {
        match self {
            Surplus::Hedonic(o) => o.eval_b(xs),
            Surplus::Bilinear(b) => b.eval(xs),
        }
    }

    pub fn cross_hessian(&self, xs: &[Vector], i: usize, j: usize) -> Result<Matrix> {
        match self {
            Surplus::Hedonic(o) => o.hess_b_cross(xs, i, j),
            Surplus::Bilinear(b) => {
                b.check(xs)?;
                b.cross_hessian(i, j)
            }
        }
    }
}

impl From<SurplusOracle> for Surplus {
    fn from(o: SurplusOracle) -> Self {
        Surplus::Hedonic(o)
    }
}

impl From<BilinearSurplus> for Surplus {
    fn from(b: BilinearSurplus) -> Self {
        Surplus::Bilinear(b)
    }
}
