//! Sampled certificates for the structural hypotheses on the `f_i`, the
//! second-order condition (III) matrix, and the symmetry product that rules
//! out non-symmetric bilinear surpluses.
//!
//! Every check here is evaluated on finitely many samples and is therefore
//! evidence, not proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Surplus, SurplusOracle};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::measures::BoxDomain;

/// Minimum separation ratio accepted as evidence of injectivity.
pub const TWIST_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SampleSpec {
    /// Domain of every `x_i`.
    pub x_box: BoxDomain,
    /// Contract domain; defaults to the oracle's box, else `x_box` scaled by 3.
    pub z_box: Option<BoxDomain>,
    pub samples: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(x_box: BoxDomain, samples: usize, seed: u64) -> Self {
        Self {
            x_box,
            z_box: None,
            samples,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub quantity: String,
    /// The sampled extreme value of `quantity`.
    pub margin: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Arguments at which `margin` was attained.
    pub witness: Vec<Vec<f64>>,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
    pub note: String,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// True when every hypothesis H1–H5 passed (condition III is informational).
    pub fn hypotheses_hold(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with('H'))
            .all(|c| c.passed)
    }
}

fn draw(rng: &mut ChaCha8Rng, b: &BoxDomain) -> Vector {
    Vector::from_fn(b.dim(), |d, _| {
        if b.lo[d] < b.hi[d] {
            rng.random_range(b.lo[d]..b.hi[d])
        } else {
            b.lo[d]
        }
    })
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Tracks the extreme of a sampled quantity and its witness.
struct Extreme {
    value: f64,
    witness: Vec<Vec<f64>>,
    minimize: bool,
}

impl Extreme {
    fn min() -> Self {
        Self {
            value: f64::INFINITY,
            witness: Vec::new(),
            minimize: true,
        }
    }

    fn max() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            witness: Vec::new(),
            minimize: false,
        }
    }

    fn offer(&mut self, v: f64, witness: impl FnOnce() -> Vec<Vec<f64>>) {
        let better = if self.minimize {
            v < self.value || v.is_nan()
        } else {
            v > self.value || v.is_nan()
        };
        if better && !self.value.is_nan() {
            self.value = v;
            self.witness = witness();
        }
    }
}

/// Samples H1–H5 (and condition III when `m = 3`) for a hedonic-form oracle.
///
/// * H1: `min |det D²_{x_i z} f_i|` over sampled `(x, z)`, must be `> 0`.
/// * H2: max multistart disagreement of `z̄`, must be `≤` the uniqueness tolerance.
/// * H3: max eigenvalue of `B`, must be `< 0`.
/// * H4: min of `‖D_x f₁(x,z) − D_x f₁(x,z')‖ / ‖z − z'‖`, must be `≥ 1e-8`.
/// * H5: min over `i` of `‖D_z f_i(x,z) − D_z f_i(x',z)‖ / ‖x − x'‖`, same threshold.
/// * III: min eigenvalue of the condition (III) matrix, `> 0` for the condition to hold.
pub fn check_conditions(surplus: &Surplus, spec: &SampleSpec) -> Result<ConditionReport> {
    let oracle = match surplus {
        Surplus::Hedonic(o) => o,
        Surplus::Bilinear(_) => {
            return Err(Error::NotHedonicForm(
                "the bilinear surplus is not given as a supremum over contracts".into(),
            ))
        }
    };
    if spec.x_box.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: spec.x_box.dim(),
        });
    }
    if spec.samples == 0 {
        return Err(Error::invalid("samples must be positive"));
    }
    let z_box = spec
        .z_box
        .clone()
        .or_else(|| oracle.z_box().cloned())
        .unwrap_or_else(|| spec.x_box.scaled(3.0, 0.5));
    let m = oracle.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prefs = oracle.prefs();

    let mut h1 = Extreme::min();
    let mut h4 = Extreme::min();
    let mut h5 = Extreme::min();
    for _ in 0..spec.samples {
        let x = draw(&mut rng, &spec.x_box);
        let x2 = draw(&mut rng, &spec.x_box);
        let z = draw(&mut rng, &z_box);
        let z2 = draw(&mut rng, &z_box);
        for (i, f) in prefs.iter().enumerate() {
            let det = f.hess_xz(&x, &z).determinant().abs();
            h1.offer(det, || vec![vec![i as f64], to_vec(&x), to_vec(&z)]);
            let dx = (&x - &x2).norm();
            if dx > 0.0 {
                let r = (f.grad_z(&x, &z) - f.grad_z(&x2, &z)).norm() / dx;
                h5.offer(r, || vec![vec![i as f64], to_vec(&x), to_vec(&x2), to_vec(&z)]);
            }
        }
        let dz = (&z - &z2).norm();
        if dz > 0.0 {
            let f1 = &prefs[0];
            let r = (f1.grad_x(&x, &z) - f1.grad_x(&x, &z2)).norm() / dz;
            h4.offer(r, || vec![to_vec(&x), to_vec(&z), to_vec(&z2)]);
        }
    }

    let mut h2 = Extreme::max();
    let mut h3 = Extreme::max();
    let mut c3 = Extreme::min();
    for _ in 0..spec.samples {
        let xs: Vec<Vector> = (0..m).map(|_| draw(&mut rng, &spec.x_box)).collect();
        let wit = || xs.iter().map(to_vec).collect::<Vec<_>>();
        match oracle.solve_zbar(&xs) {
            Ok(sol) => {
                h2.offer(sol.max_disagreement, wit);
                h3.offer(sol.b_eigen_range.1, wit);
            }
            Err(Error::NonUniqueMaximizer { disagreement, .. }) => h2.offer(disagreement, wit),
            Err(Error::Singular(_)) => h3.offer(0.0, wit),
            Err(_) => h2.offer(f64::INFINITY, wit),
        }
        if m == 3 {
            let xt1 = draw(&mut rng, &spec.x_box);
            let xt3 = draw(&mut rng, &spec.x_box);
            if let Ok(c) = condition_iii_matrix(oracle, &xs[0], &xs[1], &xs[2], &xt1, &xt3) {
                c3.offer(c.eigenvalues[0], || {
                    let mut w = wit();
                    w.push(to_vec(&xt1));
                    w.push(to_vec(&xt3));
                    w
                });
            }
        }
    }

    let tol = oracle.newton_settings().uniqueness_tol;
    let mut checks = vec![
        check("H1", "min |det D²_{x_i z} f_i| over sampled (x, z)", h1, 0.0, |v, t| v > t, spec.samples),
        check("H2", "max multistart disagreement of z̄", h2, tol, |v, t| v <= t, spec.samples),
        check("H3", "max eigenvalue of B at z̄", h3, 0.0, |v, t| v < t, spec.samples),
        check(
            "H4",
            "min |D_x f_1(x,z) - D_x f_1(x,z')| / |z - z'|",
            h4,
            TWIST_THRESHOLD,
            |v, t| v >= t,
            spec.samples,
        ),
        check(
            "H5",
            "min |D_z f_i(x,z) - D_z f_i(x',z)| / |x - x'|",
            h5,
            TWIST_THRESHOLD,
            |v, t| v >= t,
            spec.samples,
        ),
    ];
    if m == 3 {
        checks.push(check(
            "III",
            "min eigenvalue of the condition (III) matrix T",
            c3,
            0.0,
            |v, t| v > t,
            spec.samples,
        ));
    }
    Ok(ConditionReport {
        checks,
        note: format!(
            "certificate over {} random samples only; not exhaustive",
            spec.samples
        ),
    })
}

fn check(
    name: &str,
    quantity: &str,
    e: Extreme,
    threshold: f64,
    pass: impl Fn(f64, f64) -> bool,
    samples: usize,
) -> ConditionCheck {
    ConditionCheck {
        name: name.into(),
        quantity: quantity.into(),
        margin: e.value,
        threshold,
        passed: e.value.is_finite() && pass(e.value, threshold),
        witness: e.witness,
        samples,
    }
}

#[derive(Debug, Clone)]
pub struct ConditionIII {
    pub t: Matrix,
    /// Eigenvalues of the symmetric part of `t`, ascending.
    pub eigenvalues: Vec<f64>,
    pub z_bar: Vector,
    pub z_bar_tilde: Vector,
}

/// The matrix
/// `T = -[D²_{x₂z}f₂ B⁻¹ D²_{zx₂}f₂](x₂, z̄) + D²_{x₂x₂}f₂(x₂, z̄) − D²_{x₂x₂}f₂(x₂, z̃)`
/// with `z̄ = z̄(x₁,x₂,x₃)` and `z̃ = z̄(x̃₁,x₂,x̃₃)`.
pub fn condition_iii_matrix(
    oracle: &SurplusOracle,
    x1: &Vector,
    x2: &Vector,
    x3: &Vector,
    xt1: &Vector,
    xt3: &Vector,
) -> Result<ConditionIII> {
    if oracle.arity() != 3 {
        return Err(Error::invalid("condition (III) is defined for m = 3"));
    }
    let sol = oracle.solve_zbar(&[x1.clone(), x2.clone(), x3.clone()])?;
    let sol_t = oracle.solve_zbar(&[xt1.clone(), x2.clone(), xt3.clone()])?;
    let f2 = &oracle.prefs()[1];
    let core = sol.envelope_core(oracle, 1)?;
    let t = core + f2.hess_xx(x2, &sol.z) - f2.hess_xx(x2, &sol_t.z);
    let eigenvalues = linalg::sym_eigenvalues(&t);
    Ok(ConditionIII {
        t,
        eigenvalues,
        z_bar: sol.z,
        z_bar_tilde: sol_t.z,
    })
}

/// `S = D²_{x₂x₃}b · [D²_{x₁x₃}b]⁻¹ · D²_{x₁x₂}b` for a three-marginal surplus.
///
/// For hedonic-form surpluses this collapses to `-D²_{x₂z}f₂ B⁻¹ D²_{zx₂}f₂`,
/// which is symmetric; for the bilinear surplus it equals `A`.
pub fn symmetry_product(surplus: &Surplus, x1: &Vector, x2: &Vector, x3: &Vector) -> Result<Matrix> {
    if surplus.arity() != 3 {
        return Err(Error::invalid("symmetry product is defined for m = 3"));
    }
    let xs = [x1.clone(), x2.clone(), x3.clone()];
    let (h23, h13, h12) = match surplus {
        Surplus::Hedonic(o) => {
            let sol = o.solve_zbar(&xs)?;
            (
                sol.hess_b_cross(o, 1, 2)?,
                sol.hess_b_cross(o, 0, 2)?,
                sol.hess_b_cross(o, 0, 1)?,
            )
        }
        Surplus::Bilinear(_) => (
            surplus.cross_hessian(&xs, 1, 2)?,
            surplus.cross_hessian(&xs, 0, 2)?,
            surplus.cross_hessian(&xs, 0, 1)?,
        ),
    };
    let mid = linalg::inverse(&h13, "D²_{x₁x₃} b")?;
    Ok(h23 * mid * h12)
}
