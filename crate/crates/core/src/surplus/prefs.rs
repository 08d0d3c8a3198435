//! Built-in preference functions `f(x, z)` with analytic derivative blocks.
//!
//! Block conventions: `hess_xz` has entry `(α, β) = ∂²f/∂x^α∂z^β`; the
//! `(z, x)` block is its transpose.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Parameters of `h(y) = -½ yᵀPy - β Σ_k log cosh(y_k) + c·y`, used as
/// `f(x, z) = h(x + z)`. With `P` positive definite and `β ≥ 0`, `h` is
/// uniformly concave and tends to `-∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveSum {
    p: Matrix,
    beta: f64,
    c: Vector,
}

impl ConcaveSum {
    pub fn new(p: Matrix, beta: f64, c: Vector) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || c.len() != n {
            return Err(Error::invalid("concave_sum: P must be n×n and c of length n"));
        }
        check_spd(&p, "concave_sum P")?;
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid("concave_sum: beta must be finite and >= 0"));
        }
        Ok(Self { p, beta, c })
    }

    fn h(&self, y: &Vector) -> f64 {
        let quad = -0.5 * y.dot(&(&self.p * y));
        let lc: f64 = y.iter().map(|&t| log_cosh(t)).sum();
        quad - self.beta * lc + self.c.dot(y)
    }

    fn grad(&self, y: &Vector) -> Vector {
        -(&self.p * y) - y.map(f64::tanh) * self.beta + &self.c
    }

    fn hess(&self, y: &Vector) -> Matrix {
        let sech2 = y.map(|t| 1.0 - t.tanh().powi(2));
        -&self.p - Matrix::from_diagonal(&sech2) * self.beta
    }
}

fn log_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn check_spd(m: &Matrix, what: &str) -> Result<()> {
    if linalg::asymmetry(m) > 1e-12 * (1.0 + m.norm()) {
        return Err(Error::invalid(format!("{what} must be symmetric")));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::invalid(format!("{what} must be positive definite")));
    }
    Ok(())
}

/// One agent type's preference over contracts.
#[derive(Debug, Clone, PartialEq)]
pub enum PreferenceFunction {
    /// `-|x - z|²`
    Quadratic,
    /// `x · z`
    Linear,
    /// `x · z - ¼ zᵀQ⁻¹z`, the conjugate split of `h(s) = sᵀQs`.
    HeinichHead { q: Matrix, q_inv: Matrix },
    /// `-√(1 + |x + z|²)`
    Brenier,
    ConcaveSum(ConcaveSum),
}

impl PreferenceFunction {
    pub fn heinich(q: Matrix) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::invalid("Q must be square"));
        }
        check_spd(&q, "Q")?;
        let q_inv = linalg::inverse(&q, "Q")?;
        Ok(Self::HeinichHead { q, q_inv })
    }

    /// Dimension fixed by the parameters, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            Self::HeinichHead { q, .. } => Some(q.nrows()),
            Self::ConcaveSum(cs) => Some(cs.p.nrows()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Linear => "linear",
            Self::HeinichHead { .. } => "heinich",
            Self::Brenier => "brenier",
            Self::ConcaveSum(_) => "concave_sum",
        }
    }

    pub fn value(&self, x: &Vector, z: &Vector) -> f64 {
        match self {
            Self::Quadratic => -(x - z).norm_squared(),
            Self::Linear => x.dot(z),
            Self::HeinichHead { q_inv, .. } => x.dot(z) - 0.25 * z.dot(&(q_inv * z)),
            Self::Brenier => -(1.0 + (x + z).norm_squared()).sqrt(),
            Self::ConcaveSum(cs) => cs.h(&(x + z)),
        }
    }

    pub fn grad_x(&self, x: &Vector, z: &Vector) -> Vector {
        match self {
            Self::Quadratic => (x - z) * -2.0,
            Self::Linear | Self::HeinichHead { .. } => z.clone(),
            Self::Brenier => brenier_grad(&(x + z)),
            Self::ConcaveSum(cs) => cs.grad(&(x + z)),
        }
    }

    pub fn grad_z(&self, x: &Vector, z: &Vector) -> Vector {
        match self {
            Self::Quadratic => (x - z) * 2.0,
            Self::Linear => x.clone(),
            Self::HeinichHead { q_inv, .. } => x - (q_inv * z) * 0.5,
            Self::Brenier => brenier_grad(&(x + z)),
            Self::ConcaveSum(cs) => cs.grad(&(x + z)),
        }
    }

    /// `D²_{xz} f`
    pub fn hess_xz(&self, x: &Vector, z: &Vector) -> Matrix {
        let n = x.len();
        match self {
            Self::Quadratic => Matrix::identity(n, n) * 2.0,
            Self::Linear | Self::HeinichHead { .. } => Matrix::identity(n, n),
            Self::Brenier => brenier_hess(&(x + z)),
            Self::ConcaveSum(cs) => cs.hess(&(x + z)),
        }
    }

    /// `D²_{zz} f`
    pub fn hess_zz(&self, x: &Vector, z: &Vector) -> Matrix {
        let n = x.len();
        match self {
            Self::Quadratic => Matrix::identity(n, n) * -2.0,
            Self::Linear => Matrix::zeros(n, n),
            Self::HeinichHead { q_inv, .. } => q_inv * -0.5,
            Self::Brenier => brenier_hess(&(x + z)),
            Self::ConcaveSum(cs) => cs.hess(&(x + z)),
        }
    }

    /// `D²_{xx} f`
    pub fn hess_xx(&self, x: &Vector, z: &Vector) -> Matrix {
        let n = x.len();
        match self {
            Self::Quadratic => Matrix::identity(n, n) * -2.0,
            Self::Linear | Self::HeinichHead { .. } => Matrix::zeros(n, n),
            Self::Brenier => brenier_hess(&(x + z)),
            Self::ConcaveSum(cs) => cs.hess(&(x + z)),
        }
    }
}

fn brenier_grad(y: &Vector) -> Vector {
    -y / (1.0 + y.norm_squared()).sqrt()
}

/// `D²h(y) = (yyᵀ/(1+|y|²) - I) / √(1+|y|²)` for `h(y) = -√(1+|y|²)`.
fn brenier_hess(y: &Vector) -> Matrix {
    let n = y.len();
    let s2 = 1.0 + y.norm_squared();
    (y * y.transpose() / s2 - Matrix::identity(n, n)) / s2.sqrt()
}

/// Serialized form used in problem manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrefSpec {
    Quadratic,
    Linear,
    Heinich {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
    },
    Brenier,
    ConcaveSum {
        /// Defaults to the identity.
        #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
        p: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
}

impl PrefSpec {
    pub fn build(&self, n: usize) -> Result<PreferenceFunction> {
        Ok(match self {
            PrefSpec::Quadratic => PreferenceFunction::Quadratic,
            PrefSpec::Linear => PreferenceFunction::Linear,
            PrefSpec::Brenier => PreferenceFunction::Brenier,
            PrefSpec::Heinich { q } => PreferenceFunction::heinich(linalg::from_rows(q)?)?,
            PrefSpec::ConcaveSum { p, beta, c } => {
                let p = match p {
                    Some(rows) => linalg::from_rows(rows)?,
                    None => Matrix::identity(n, n),
                };
                let c = match c {
                    Some(v) => Vector::from_vec(v.clone()),
                    None => Vector::zeros(n),
                };
                PreferenceFunction::ConcaveSum(ConcaveSum::new(p, *beta, c)?)
            }
        })
    }
}

impl From<&PreferenceFunction> for PrefSpec {
    fn from(f: &PreferenceFunction) -> Self {
        match f {
            PreferenceFunction::Quadratic => PrefSpec::Quadratic,
            PreferenceFunction::Linear => PrefSpec::Linear,
            PreferenceFunction::Brenier => PrefSpec::Brenier,
            PreferenceFunction::HeinichHead { q, .. } => PrefSpec::Heinich {
                q: linalg::to_rows(q),
            },
            PreferenceFunction::ConcaveSum(cs) => PrefSpec::ConcaveSum {
                p: Some(linalg::to_rows(&cs.p)),
                beta: cs.beta,
                c: Some(cs.c.iter().copied().collect()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const H: f64 = 1e-5;

    fn unit(n: usize, k: usize) -> Vector {
        let mut e = Vector::zeros(n);
        e[k] = 1.0;
        e
    }

    fn builtins(n: usize) -> Vec<PreferenceFunction> {
        let mut q = Matrix::identity(n, n);
        q[(0, 0)] = 2.0;
        if n > 1 {
            q[(0, 1)] = 0.3;
            q[(1, 0)] = 0.3;
        }
        vec![
            PreferenceFunction::Quadratic,
            PreferenceFunction::Linear,
            PreferenceFunction::heinich(q.clone()).unwrap(),
            PreferenceFunction::Brenier,
            PreferenceFunction::ConcaveSum(
                ConcaveSum::new(q, 0.7, Vector::from_element(n, 0.2)).unwrap(),
            ),
        ]
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn derivative_blocks_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            for f in builtins(n) {
                for _ in 0..20 {
                    let x = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                    let z = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                    let gx = f.grad_x(&x, &z);
                    let gz = f.grad_z(&x, &z);
                    let hxz = f.hess_xz(&x, &z);
                    let hzz = f.hess_zz(&x, &z);
                    let hxx = f.hess_xx(&x, &z);
                    for a in 0..n {
                        let e = unit(n, a);
                        let fd_x = (f.value(&(&x + &e * H), &z) - f.value(&(&x - &e * H), &z)) / (2.0 * H);
                        let fd_z = (f.value(&x, &(&z + &e * H)) - f.value(&x, &(&z - &e * H))) / (2.0 * H);
                        assert!(rel_close(gx[a], fd_x, 1e-5), "{} grad_x", f.name());
                        assert!(rel_close(gz[a], fd_z, 1e-5), "{} grad_z", f.name());
                        // second blocks: differentiate the analytic gradients
                        let dgz_dx = (f.grad_z(&(&x + &e * H), &z) - f.grad_z(&(&x - &e * H), &z)) / (2.0 * H);
                        let dgz_dz = (f.grad_z(&x, &(&z + &e * H)) - f.grad_z(&x, &(&z - &e * H))) / (2.0 * H);
                        let dgx_dx = (f.grad_x(&(&x + &e * H), &z) - f.grad_x(&(&x - &e * H), &z)) / (2.0 * H);
                        for b in 0..n {
                            assert!(rel_close(hxz[(a, b)], dgz_dx[b], 1e-5), "{} hess_xz", f.name());
                            assert!(rel_close(hzz[(b, a)], dgz_dz[b], 1e-5), "{} hess_zz", f.name());
                            assert!(rel_close(hxx[(b, a)], dgx_dx[b], 1e-5), "{} hess_xx", f.name());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn concave_families_have_negative_definite_zz_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in builtins(2) {
            if matches!(f, PreferenceFunction::Linear | PreferenceFunction::HeinichHead { .. }) {
                continue;
            }
            for _ in 0..50 {
                let x = Vector::from_fn(2, |_, _| rng.random_range(-10.0..10.0));
                let z = Vector::from_fn(2, |_, _| rng.random_range(-10.0..10.0));
                let (_, hi) = linalg::eigen_range(&f.hess_zz(&x, &z));
                assert!(hi < 0.0, "{}", f.name());
            }
        }
    }

    #[test]
    fn heinich_rejects_indefinite_q() {
        let q = linalg::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(PreferenceFunction::heinich(q).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let json = r#"[{"kind":"quadratic"},{"kind":"heinich","Q":[[2.0,0.0],[0.0,1.0]]},{"kind":"brenier"},{"kind":"concave_sum","beta":0.5}]"#;
        let specs: Vec<PrefSpec> = serde_json::from_str(json).unwrap();
        let built: Vec<_> = specs.iter().map(|s| s.build(2).unwrap()).collect();
        assert_eq!(built[1].fixed_dim(), Some(2));
        let back: Vec<PrefSpec> = built.iter().map(PrefSpec::from).collect();
        assert_eq!(back[0], specs[0]);
        assert_eq!(back[1], specs[1]);
    }
}
