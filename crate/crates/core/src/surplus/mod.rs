//! Surpluses of the form `b(x₁,…,x_m) = sup_z Σ f_i(x_i, z)`.
//!
//! [`SurplusOracle`] finds the maximizing contract `z̄` by multistart damped
//! Newton and exposes the envelope derivatives of `b` and `z̄`:
//!
//! * `D_{x_i} b = D_{x_i} f_i(x_i, z̄)`
//! * `D_{x_i} z̄ = -B⁻¹ D²_{z x_i} f_i`
//! * `D²_{x_i x_j} b = -D²_{x_i z} f_i · B⁻¹ · D²_{z x_j} f_j` for `i ≠ j`
//!
//! where `B = Σ D²_{zz} f_i(x_i, z̄)`. Marginal indices are zero-based.

mod bilinear;
mod conditions;
mod prefs;

pub use bilinear::{BilinearSurplus, Surplus};
pub use conditions::{
    check_conditions, condition_iii_matrix, symmetry_product, ConditionCheck, ConditionIII,
    ConditionReport, SampleSpec,
};
pub use prefs::{ConcaveSum, PrefSpec, PreferenceFunction};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::measures::BoxDomain;
use crate::newton::{self, NewtonRun, NewtonSettings, SmoothObjective};

/// The tuple `(f₁,…,f_m)` together with the inner-maximization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SurplusOracle {
    prefs: Vec<PreferenceFunction>,
    dim: usize,
    z_box: Option<BoxDomain>,
    newton: NewtonSettings,
}

impl SurplusOracle {
    pub fn new(prefs: Vec<PreferenceFunction>, dim: usize) -> Result<Self> {
        if prefs.len() < 2 {
            return Err(Error::invalid("an oracle needs at least two preference functions"));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        for f in &prefs {
            if let Some(d) = f.fixed_dim() {
                if d != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: d });
                }
            }
        }
        Ok(Self {
            prefs,
            dim,
            z_box: None,
            newton: NewtonSettings::default(),
        })
    }

    pub fn quadratic(m: usize, n: usize) -> Result<Self> {
        Self::new(vec![PreferenceFunction::Quadratic; m], n)
    }

    pub fn brenier(m: usize, n: usize) -> Result<Self> {
        Self::new(vec![PreferenceFunction::Brenier; m], n)
    }

    /// `f₁ = x·z - ¼zᵀQ⁻¹z`, `f_i = x·z` otherwise, so that `b = h(Σx_i)` with `h(s) = sᵀQs`.
    pub fn heinich(q: Matrix, m: usize) -> Result<Self> {
        let n = q.nrows();
        let mut prefs = vec![PreferenceFunction::heinich(q)?];
        prefs.extend(std::iter::repeat_n(PreferenceFunction::Linear, m.saturating_sub(1)));
        Self::new(prefs, n)
    }

    pub fn with_z_box(mut self, z_box: BoxDomain) -> Result<Self> {
        if z_box.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z_box.dim(),
            });
        }
        self.z_box = Some(z_box);
        Ok(self)
    }

    pub fn with_newton(mut self, newton: NewtonSettings) -> Self {
        self.newton = newton;
        self
    }

    pub(crate) fn set_z_box(&mut self, z_box: BoxDomain) {
        self.z_box = Some(z_box);
    }

    pub fn prefs(&self) -> &[PreferenceFunction] {
        &self.prefs
    }

    pub fn arity(&self) -> usize {
        self.prefs.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn z_box(&self) -> Option<&BoxDomain> {
        self.z_box.as_ref()
    }

    pub fn newton_settings(&self) -> &NewtonSettings {
        &self.newton
    }

    fn check_tuple(&self, xs: &[Vector]) -> Result<()> {
        if xs.len() != self.arity() {
            return Err(Error::invalid(format!(
                "expected {} points, got {}",
                self.arity(),
                xs.len()
            )));
        }
        for x in xs {
            if x.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: x.len(),
                });
            }
        }
        Ok(())
    }

    /// `Σ f_i(x_i, z)`
    pub fn total(&self, xs: &[Vector], z: &Vector) -> f64 {
        self.prefs.iter().zip(xs).map(|(f, x)| f.value(x, z)).sum()
    }

    /// `B(z) = Σ D²_{zz} f_i(x_i, z)`
    pub fn b_matrix_at(&self, xs: &[Vector], z: &Vector) -> Matrix {
        self.prefs
            .iter()
            .zip(xs)
            .fold(Matrix::zeros(self.dim, self.dim), |acc, (f, x)| acc + f.hess_zz(x, z))
    }

    fn starts(&self, xs: &[Vector]) -> Vec<Vector> {
        let bx = match &self.z_box {
            Some(b) => b.clone(),
            None => {
                let mut lo = xs[0].clone();
                let mut hi = xs[0].clone();
                for x in &xs[1..] {
                    lo = lo.zip_map(x, f64::min);
                    hi = hi.zip_map(x, f64::max);
                }
                BoxDomain { lo, hi }.scaled(3.0, 0.5)
            }
        };
        let mean = xs.iter().fold(Vector::zeros(self.dim), |acc, x| acc + x) / xs.len() as f64;
        let mut s = bx.grid3();
        s.push(mean);
        s
    }

    /// Inner maximizer `z̄(xs)` with multistart diagnostics.
    pub fn solve_zbar(&self, xs: &[Vector]) -> Result<ZbarSolution> {
        self.check_tuple(xs)?;
        let obj = TupleObjective { oracle: self, xs };
        let starts = self.starts(xs);
        let runs: Vec<NewtonRun> = starts
            .iter()
            .map(|s| newton::maximize(&obj, s, &self.newton))
            .collect();
        let converged: Vec<&NewtonRun> = runs.iter().filter(|r| r.converged).collect();
        let best = match converged
            .iter()
            .copied()
            .max_by(|a, b| a.value.total_cmp(&b.value))
        {
            Some(b) => b,
            None => {
                let best_grad_norm = runs
                    .iter()
                    .map(|r| r.grad_norm)
                    .filter(|g| g.is_finite())
                    .fold(f64::INFINITY, f64::min);
                return Err(Error::NewtonFailed { best_grad_norm });
            }
        };
        let (disagreement, witness) = converged
            .iter()
            .map(|r| ((&r.z - &best.z).norm(), &r.z))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("nonempty");
        if disagreement > self.newton.uniqueness_tol {
            return Err(Error::NonUniqueMaximizer {
                disagreement,
                witness: witness.iter().copied().collect(),
            });
        }
        let b = self.b_matrix_at(xs, &best.z);
        let b_eigen_range = linalg::eigen_range(&b);
        if !(b_eigen_range.1 < 0.0) {
            return Err(Error::Singular(format!(
                "B is not negative definite at z̄ = {:?} (max eigenvalue {:e})",
                best.z.as_slice(),
                b_eigen_range.1
            )));
        }
        let b_inv = linalg::inverse(&b, "B")?;
        let boundary_hit = self
            .z_box
            .as_ref()
            .is_some_and(|bx| bx.on_or_outside_boundary(&best.z, 0.0));
        if boundary_hit {
            log::warn!("z̄ = {:?} lies on or outside the search box", best.z.as_slice());
        }
        Ok(ZbarSolution {
            xs: xs.to_vec(),
            z: best.z.clone(),
            value: best.value,
            grad_norm: best.grad_norm,
            starts: runs.len(),
            converged_starts: converged.len(),
            max_disagreement: disagreement,
            iterations: runs.iter().map(|r| r.iterations).sum(),
            boundary_hit,
            b,
            b_inv,
            b_eigen_range,
        })
    }

    pub fn eval_b(&self, xs: &[Vector]) -> Result<f64> {
        Ok(self.solve_zbar(xs)?.value)
    }

    /// `D_{x_i} b`
    pub fn grad_b(&self, xs: &[Vector], i: usize) -> Result<Vector> {
        self.solve_zbar(xs)?.grad_b(self, i)
    }

    /// `D_{x_i} z̄`, entry `(β, α) = ∂z̄^β/∂x_i^α`.
    pub fn jac_zbar(&self, xs: &[Vector], i: usize) -> Result<Matrix> {
        self.solve_zbar(xs)?.jac_zbar(self, i)
    }

    /// `D²_{x_i x_j} b`, `i ≠ j`.
    pub fn hess_b_cross(&self, xs: &[Vector], i: usize, j: usize) -> Result<Matrix> {
        self.solve_zbar(xs)?.hess_b_cross(self, i, j)
    }

    /// `B(xs)` with its eigenvalue range.
    pub fn b_matrix(&self, xs: &[Vector]) -> Result<(Matrix, (f64, f64))> {
        let sol = self.solve_zbar(xs)?;
        Ok((sol.b, sol.b_eigen_range))
    }

    /// `-D²_{x_i z} f_i · B⁻¹ · D²_{z x_i} f_i`; positive definite whenever
    /// `D²_{x_i z} f_i` is invertible and `B` negative definite.
    pub fn envelope_core(&self, xs: &[Vector], i: usize) -> Result<Matrix> {
        self.solve_zbar(xs)?.envelope_core(self, i)
    }
}

struct TupleObjective<'a> {
    oracle: &'a SurplusOracle,
    xs: &'a [Vector],
}

impl SmoothObjective for TupleObjective<'_> {
    fn value(&self, z: &Vector) -> f64 {
        self.oracle.total(self.xs, z)
    }

    fn gradient(&self, z: &Vector) -> Vector {
        self.oracle
            .prefs
            .iter()
            .zip(self.xs)
            .fold(Vector::zeros(z.len()), |acc, (f, x)| acc + f.grad_z(x, z))
    }

    fn hessian(&self, z: &Vector) -> Matrix {
        self.oracle.b_matrix_at(self.xs, z)
    }
}

/// Result of the inner maximization for one tuple; caches `B⁻¹` so the
/// derivative formulas can be evaluated without re-solving.
#[derive(Debug, Clone)]
pub struct ZbarSolution {
    pub xs: Vec<Vector>,
    pub z: Vector,
    /// `b(xs) = Σ f_i(x_i, z̄)`
    pub value: f64,
    pub grad_norm: f64,
    pub starts: usize,
    pub converged_starts: usize,
    pub max_disagreement: f64,
    pub iterations: usize,
    /// `z̄` on or outside the oracle's search box (warning only).
    pub boundary_hit: bool,
    pub b: Matrix,
    pub b_inv: Matrix,
    pub b_eigen_range: (f64, f64),
}

impl ZbarSolution {
    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.xs.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.xs.len(),
            });
        }
        Ok(())
    }

    pub fn grad_b(&self, oracle: &SurplusOracle, i: usize) -> Result<Vector> {
        self.check_index(i)?;
        Ok(oracle.prefs[i].grad_x(&self.xs[i], &self.z))
    }

    pub fn jac_zbar(&self, oracle: &SurplusOracle, i: usize) -> Result<Matrix> {
        self.check_index(i)?;
        let hzx = oracle.prefs[i].hess_xz(&self.xs[i], &self.z).transpose();
        Ok(-&self.b_inv * hzx)
    }

    pub fn hess_b_cross(&self, oracle: &SurplusOracle, i: usize, j: usize) -> Result<Matrix> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::invalid("hess_b_cross requires i != j"));
        }
        let hi = oracle.prefs[i].hess_xz(&self.xs[i], &self.z);
        let hj = oracle.prefs[j].hess_xz(&self.xs[j], &self.z).transpose();
        Ok(-(hi * &self.b_inv * hj))
    }

    pub fn envelope_core(&self, oracle: &SurplusOracle, i: usize) -> Result<Matrix> {
        self.check_index(i)?;
        let h = oracle.prefs[i].hess_xz(&self.xs[i], &self.z);
        Ok(-(&h * &self.b_inv * h.transpose()))
    }
}

/// Manifest form of an oracle:
/// `{ "prefs": [ { "kind": ... } ], "z_box": { "lo": [...], "hi": [...] }, "newton": { ... } }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub prefs: Vec<PrefSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_box: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpec {
    pub fn build(&self) -> Result<BoxDomain> {
        BoxDomain::new(
            Vector::from_vec(self.lo.clone()),
            Vector::from_vec(self.hi.clone()),
        )
    }
}

impl From<&BoxDomain> for BoxSpec {
    fn from(b: &BoxDomain) -> Self {
        Self {
            lo: b.lo.iter().copied().collect(),
            hi: b.hi.iter().copied().collect(),
        }
    }
}

impl OracleSpec {
    pub fn uniform(spec: PrefSpec, m: usize) -> Self {
        Self {
            prefs: vec![spec; m],
            z_box: None,
            newton: None,
        }
    }

    pub fn quadratic(m: usize) -> Self {
        Self::uniform(PrefSpec::Quadratic, m)
    }

    pub fn brenier(m: usize) -> Self {
        Self::uniform(PrefSpec::Brenier, m)
    }

    pub fn build(&self, n: usize) -> Result<SurplusOracle> {
        let prefs = self
            .prefs
            .iter()
            .map(|p| p.build(n))
            .collect::<Result<Vec<_>>>()?;
        let mut oracle = SurplusOracle::new(prefs, n)?;
        if let Some(b) = &self.z_box {
            oracle = oracle.with_z_box(b.build()?)?;
        }
        if let Some(nw) = &self.newton {
            if !(nw.grad_tol > 0.0) || !(nw.uniqueness_tol > 0.0) || nw.max_iters == 0 {
                return Err(Error::invalid("newton settings must have positive tolerances"));
            }
            oracle = oracle.with_newton(nw.clone());
        }
        Ok(oracle)
    }
}

impl From<&SurplusOracle> for OracleSpec {
    fn from(o: &SurplusOracle) -> Self {
        Self {
            prefs: o.prefs.iter().map(PrefSpec::from).collect(),
            z_box: o.z_box.as_ref().map(BoxSpec::from),
            newton: Some(o.newton.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn quadratic_zbar_is_mean() {
        let o = SurplusOracle::quadratic(3, 2).unwrap();
        let xs = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, -1.0])];
        let sol = o.solve_zbar(&xs).unwrap();
        assert!(sol.z.norm() <= 1e-12);
        assert!(sol.grad_norm <= 1e-10);
        assert!((sol.value + 4.0).abs() <= 1e-12);
    }

    #[test]
    fn quadratic_common_point_has_zero_surplus() {
        let o = SurplusOracle::quadratic(4, 3).unwrap();
        let a = v(&[0.3, -1.2, 2.0]);
        let xs = vec![a.clone(); 4];
        assert!(o.eval_b(&xs).unwrap().abs() <= 1e-12);
        for i in 0..4 {
            assert!(o.grad_b(&xs, i).unwrap().norm() <= 1e-10);
        }
    }

    #[test]
    fn heinich_scalar_example() {
        let o = SurplusOracle::heinich(Matrix::identity(1, 1), 3).unwrap();
        let xs = vec![v(&[1.0]), v(&[2.0]), v(&[3.0])];
        let sol = o.solve_zbar(&xs).unwrap();
        assert!((sol.z[0] - 12.0).abs() <= 1e-9);
        assert!((sol.value - 36.0).abs() <= 1e-9);
    }

    #[test]
    fn brenier_origin_and_shifted_tuple() {
        let o = SurplusOracle::brenier(3, 2).unwrap();
        let zero = v(&[0.0, 0.0]);
        let sol = o.solve_zbar(&[zero.clone(), zero.clone(), zero.clone()]).unwrap();
        assert!(sol.z.norm() <= 1e-12);
        assert!(close(&sol.b, &(Matrix::identity(2, 2) * -3.0), 1e-12));
        let p = v(&[2.5, 0.0]);
        let sol = o.solve_zbar(&[p.clone(), zero, p]).unwrap();
        assert!((sol.z - v(&[-2.0, 0.0])).norm() <= 1e-9);
    }

    #[test]
    fn quadratic_derivative_closed_forms() {
        let o = SurplusOracle::quadratic(3, 2).unwrap();
        let xs = vec![v(&[0.2, 1.0]), v(&[-0.7, 0.4]), v(&[1.1, -0.3])];
        let mean = xs.iter().fold(Vector::zeros(2), |a, x| a + x) / 3.0;
        let id = Matrix::identity(2, 2);
        for i in 0..3 {
            let g = o.grad_b(&xs, i).unwrap();
            assert!((g - (&xs[i] - &mean) * -2.0).norm() <= 1e-10);
            assert!(close(&o.jac_zbar(&xs, i).unwrap(), &(&id / 3.0), 1e-12));
        }
        assert!(close(&o.hess_b_cross(&xs, 0, 2).unwrap(), &(&id * (2.0 / 3.0)), 1e-12));
        let (b, (lo, hi)) = o.b_matrix(&xs).unwrap();
        assert!(close(&b, &(&id * -6.0), 1e-12));
        assert_eq!((lo, hi), (-6.0, -6.0));
    }

    #[test]
    fn brenier_origin_derivatives() {
        let o = SurplusOracle::brenier(3, 2).unwrap();
        let xs = vec![Vector::zeros(2); 3];
        let id = Matrix::identity(2, 2);
        assert!(o.grad_b(&xs, 1).unwrap().norm() <= 1e-15);
        assert!(close(&o.jac_zbar(&xs, 0).unwrap(), &(&id * (-1.0 / 3.0)), 1e-12));
        assert!(close(&o.hess_b_cross(&xs, 1, 2).unwrap(), &(&id / 3.0), 1e-12));
    }

    #[test]
    fn cross_hessian_transpose_structure() {
        let q = linalg::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let mut prefs = vec![PreferenceFunction::Brenier, PreferenceFunction::Quadratic];
        prefs.push(PreferenceFunction::heinich(q).unwrap());
        let o = SurplusOracle::new(prefs, 2).unwrap();
        let xs = vec![v(&[0.3, -0.2]), v(&[1.0, 0.5]), v(&[-0.4, 0.9])];
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let a = o.hess_b_cross(&xs, i, j).unwrap();
            let b = o.hess_b_cross(&xs, j, i).unwrap();
            assert!(close(&a, &b.transpose(), 1e-14));
        }
    }

    #[test]
    fn diagonal_cross_hessian_rejected() {
        let o = SurplusOracle::quadratic(2, 1).unwrap();
        let xs = vec![v(&[0.0]), v(&[1.0])];
        assert!(o.hess_b_cross(&xs, 1, 1).is_err());
        assert!(matches!(o.grad_b(&xs, 2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn single_pref_oracle_rejected() {
        assert!(SurplusOracle::quadratic(1, 2).is_err());
    }

    #[test]
    fn linear_only_oracle_fails_to_converge() {
        let o = SurplusOracle::new(vec![PreferenceFunction::Linear; 2], 1).unwrap();
        let r = o.solve_zbar(&[v(&[1.0]), v(&[1.0])]);
        assert!(matches!(r, Err(Error::NewtonFailed { .. })), "{r:?}");
    }

    #[test]
    fn mixed_quadratic_linear_stationary_point() {
        // -(0 - z)² + 2z peaks at z = 1
        let o = SurplusOracle::new(
            vec![PreferenceFunction::Quadratic, PreferenceFunction::Linear],
            1,
        )
        .unwrap();
        let sol = o.solve_zbar(&[v(&[0.0]), v(&[2.0])]).unwrap();
        assert!((sol.z[0] - 1.0).abs() < 1e-10);
        assert!((sol.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn boundary_hits_are_warnings() {
        let o = SurplusOracle::quadratic(2, 1)
            .unwrap()
            .with_z_box(BoxDomain::cube(1, 0.0, 1.0).unwrap())
            .unwrap();
        let sol = o.solve_zbar(&[v(&[3.0]), v(&[5.0])]).unwrap();
        assert!(sol.boundary_hit);
        assert!((sol.z[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_spec_json() {
        let spec: OracleSpec = serde_json::from_str(
            r#"{"prefs":[{"kind":"brenier"},{"kind":"brenier"},{"kind":"brenier"}],
                "z_box":{"lo":[-5,-5],"hi":[5,5]},"newton":{"max_iters":50}}"#,
        )
        .unwrap();
        let o = spec.build(2).unwrap();
        assert_eq!(o.arity(), 3);
        assert_eq!(o.newton_settings().max_iters, 50);
        assert_eq!(o.newton_settings().grad_tol, 1e-10);
    }
}
