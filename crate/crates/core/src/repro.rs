//! Worked examples for hedonic surpluses, checked numerically.
//!
//! Each case returns a [`ReproReport`] listing claimed and computed values.
//! Reports contain no timings, so a fixed seed always yields the same JSON.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::linalg::{self, Matrix, Vector};
use crate::surplus::{
    condition_iii_matrix, symmetry_product, BilinearSurplus, PreferenceFunction, Surplus, SurplusOracle,
};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|computed - claimed| <= tolerance`
    Equal,
    /// `computed <= claimed + tolerance`
    AtMost,
    /// `computed < claimed`
    Below,
    /// `computed > claimed`
    Above,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproCheck {
    pub quantity: String,
    pub claimed: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub passed: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproReport {
    pub case: String,
    pub checks: Vec<ReproCheck>,
    pub passed: bool,
}

impl ReproReport {
    fn new(case: &str) -> Self {
        Self {
            case: case.into(),
            checks: Vec::new(),
            passed: true,
        }
    }

    fn check(&mut self, quantity: impl Into<String>, claimed: f64, computed: f64, tolerance: f64, relation: Relation) {
        self.check_noted(quantity, claimed, computed, tolerance, relation, "");
    }

    fn check_noted(
        &mut self,
        quantity: impl Into<String>,
        claimed: f64,
        computed: f64,
        tolerance: f64,
        relation: Relation,
        note: &str,
    ) {
        let passed = match relation {
            Relation::Equal => (computed - claimed).abs() <= tolerance,
            Relation::AtMost => computed <= claimed + tolerance,
            Relation::Below => computed < claimed,
            Relation::Above => computed > claimed,
        };
        self.passed &= passed;
        self.checks.push(ReproCheck {
            quantity: quantity.into(),
            claimed,
            computed,
            tolerance,
            relation,
            passed,
            note: note.into(),
        });
    }

    /// Records a step that could not be evaluated as a failed check.
    fn failure(&mut self, quantity: impl Into<String>, err: &crate::Error) {
        self.check_noted(quantity, 0.0, f64::NAN, 0.0, Relation::Equal, &err.to_string());
    }

    pub fn get(&self, quantity: &str) -> Option<&ReproCheck> {
        self.checks.iter().find(|c| c.quantity == quantity)
    }
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, half: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-half..half))
}

/// `-(1/2m) Σ_i Σ_j |x_i - x_j|²`
pub fn quadratic_pair_form(xs: &[Vector]) -> f64 {
    let m = xs.len() as f64;
    let mut s = 0.0;
    for a in xs {
        for b in xs {
            s += (a - b).norm_squared();
        }
    }
    -s / (2.0 * m)
}

fn mean(xs: &[Vector]) -> Vector {
    xs.iter().fold(Vector::zeros(xs[0].len()), |acc, x| acc + x) / xs.len() as f64
}

/// Relative error with the denominator floored at one.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Quadratic preferences: the surplus is minus the mean pairwise squared
/// distance and the contract is the barycenter.
pub fn repro_quadratic_identity(samples: usize, seed: u64) -> ReproReport {
    let mut r = ReproReport::new("quadratic_identity");
    let worked: [(&str, Vec<Vector>, f64); 3] = [
        ("b at ((1,0),(0,1),(-1,-1))", vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, -1.0])], -4.0),
        ("b at three equal atoms", vec![v(&[0.7, -0.2]); 3], 0.0),
        ("b at (0),(2)", vec![v(&[0.0]), v(&[2.0])], -2.0),
    ];
    for (name, xs, claimed) in worked {
        let oracle = SurplusOracle::quadratic(xs.len(), xs[0].len()).expect("builtin");
        match oracle.solve_zbar(&xs) {
            Ok(sol) => {
                r.check(name, claimed, sol.value, 1e-12, Relation::Equal);
                r.check(format!("{name}: pair form"), claimed, quadratic_pair_form(&xs), 1e-12, Relation::Equal);
                r.check(format!("{name}: |z̄ - mean|"), 0.0, (sol.z - mean(&xs)).norm(), 1e-12, Relation::Equal);
            }
            Err(e) => r.failure(name, &e),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let combos: Vec<(usize, usize)> = [2, 3, 5]
        .iter()
        .flat_map(|&m| [1, 2, 3].into_iter().map(move |n| (m, n)))
        .collect();
    let mut worst_b: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let mut failures = 0;
    for s in 0..samples.max(1) {
        let (m, n) = combos[s % combos.len()];
        let xs: Vec<Vector> = (0..m).map(|_| random_point(&mut rng, n, 5.0)).collect();
        let oracle = SurplusOracle::quadratic(m, n).expect("builtin");
        match oracle.solve_zbar(&xs) {
            Ok(sol) => {
                worst_b = worst_b.max(rel_err(sol.value, quadratic_pair_form(&xs)));
                worst_z = worst_z.max((sol.z - mean(&xs)).norm());
            }
            Err(_) => failures += 1,
        }
    }
    let note = format!("{} seeded tuples, m in {{2,3,5}}, n in {{1,2,3}}", samples.max(1));
    r.check_noted("max relative error of b vs pair form", 0.0, worst_b, 1e-10, Relation::Equal, &note);
    r.check("max |z̄ - mean|", 0.0, worst_z, 1e-10, Relation::Equal);
    r.check("inner solve failures", 0.0, failures as f64, 0.0, Relation::Equal);
    r
}

/// The asymmetric matrix used for the bilinear surplus.
pub fn bilinear_a() -> Matrix {
    Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])
}

/// A fixed symmetric positive definite 2×2 matrix drawn from `rng`.
fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let l = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &l * l.transpose() + Matrix::identity(n, n) * 0.5
}

/// For surpluses of hedonic form the product
/// `D²_{x₂x₃}b [D²_{x₁x₃}b]⁻¹ D²_{x₁x₂}b` is symmetric; the bilinear surplus
/// with an asymmetric `A` gives `A` itself, so it has no such representation.
pub fn repro_symmetry_obstruction() -> ReproReport {
    repro_symmetry_obstruction_with(100, DEFAULT_SEED)
}

pub fn repro_symmetry_obstruction_with(samples: usize, seed: u64) -> ReproReport {
    let mut r = ReproReport::new("symmetry_obstruction");
    let a = bilinear_a();
    let (lo, _) = linalg::eigen_range(&a);
    r.check("min eigenvalue of sym(A)", 0.0, lo, 0.0, Relation::Above);
    r.check("|A - Aᵀ|_F", 0.0, linalg::asymmetry(&a), 0.0, Relation::Above);
    match BilinearSurplus::new(a.clone()) {
        Ok(bil) => {
            let surplus = Surplus::Bilinear(bil);
            match symmetry_product(&surplus, &v(&[0.3, -1.0]), &v(&[1.2, 0.4]), &v(&[-0.7, 2.0])) {
                Ok(s) => r.check("bilinear: |S - A|_F", 0.0, linalg::frobenius(&(s - &a)), 1e-12, Relation::Equal),
                Err(e) => r.failure("bilinear: |S - A|_F", &e),
            }
        }
        Err(e) => r.failure("bilinear surplus", &e),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_spd(&mut rng, 2);
    let oracles: [(&str, SurplusOracle); 3] = [
        ("quadratic", SurplusOracle::quadratic(3, 2).expect("builtin")),
        ("brenier", SurplusOracle::brenier(3, 2).expect("builtin")),
        ("heinich", SurplusOracle::heinich(q, 3).expect("positive definite")),
    ];
    for (name, oracle) in oracles {
        let surplus = Surplus::Hedonic(oracle);
        let mut worst: f64 = 0.0;
        let mut worst_quadratic: f64 = 0.0;
        let mut failures = 0;
        for _ in 0..samples {
            let xs: Vec<Vector> = (0..3).map(|_| random_point(&mut rng, 2, 2.0)).collect();
            match symmetry_product(&surplus, &xs[0], &xs[1], &xs[2]) {
                Ok(s) => {
                    worst = worst.max(linalg::asymmetry(&s));
                    if name == "quadratic" {
                        let target = Matrix::identity(2, 2) * (2.0 / 3.0);
                        worst_quadratic = worst_quadratic.max(linalg::frobenius(&(s - target)));
                    }
                }
                Err(_) => failures += 1,
            }
        }
        r.check_noted(
            format!("{name}: max |S - Sᵀ|_F"),
            0.0,
            worst,
            1e-8,
            Relation::Equal,
            &format!("{samples} seeded points in [-2,2]²"),
        );
        r.check(format!("{name}: evaluation failures"), 0.0, failures as f64, 0.0, Relation::Equal);
        if name == "quadratic" {
            r.check("quadratic: max |S - (2/3)I|_F", 0.0, worst_quadratic, 1e-12, Relation::Equal);
        }
    }
    r
}

/// The Brenier preference `-√(1+|x+z|²)` violates the second-order condition
/// at `x = (0,0,0)`, `x̃₁ = x̃₃ = p` with `|p| = 5/2`.
pub fn repro_condition_iii_failure() -> ReproReport {
    let mut r = ReproReport::new("condition_iii_failure");
    let oracle = SurplusOracle::brenier(3, 2).expect("builtin");
    let zero = v(&[0.0, 0.0]);
    let bound = 1.0 / 5f64.sqrt() - 2.0 / 3.0;
    for (label, p) in [("p=(2.5,0)", v(&[2.5, 0.0])), ("p=(0,2.5)", v(&[0.0, 2.5]))] {
        let spot = label == "p=(0,2.5)";
        let note = if spot { "rotation spot check" } else { "" };
        if !spot {
            match oracle.solve_zbar(&[zero.clone(), zero.clone(), zero.clone()]) {
                Ok(sol) => {
                    r.check("|z̄(0,0,0)|", 0.0, sol.z.norm(), 1e-8, Relation::Equal);
                    let b_err = linalg::frobenius(&(&sol.b + Matrix::identity(2, 2) * 3.0));
                    r.check("|B(0,0,0) + 3I|_F", 0.0, b_err, 1e-8, Relation::Equal);
                }
                Err(e) => r.failure("z̄(0,0,0)", &e),
            }
        }
        match condition_iii_matrix(&oracle, &zero, &zero, &zero, &p, &p) {
            Ok(c) => {
                let resid = (&c.z_bar_tilde + &p * 0.8).norm();
                r.check_noted(format!("{label}: |z̄(p,0,p) + 0.8p|"), 0.0, resid, 1e-8, Relation::Equal, note);
                r.check_noted(format!("{label}: |z̄(p,0,p)|"), 2.0, c.z_bar_tilde.norm(), 1e-8, Relation::Equal, note);
                let lmax = *c.eigenvalues.last().expect("n >= 1");
                r.check_noted(format!("{label}: λ_max(T)"), bound, lmax, 1e-8, Relation::AtMost, note);
                r.check_noted(format!("{label}: λ_max(T) < 0"), 0.0, lmax, 0.0, Relation::Below, note);
            }
            Err(e) => r.failure(format!("{label}: T"), &e),
        }
    }
    r
}

/// Mixing one quadratic-dual preference with linear ones gives
/// `b(x) = h(Σ x_i)` for `h(s) = sᵀQs`.
pub fn repro_heinich() -> ReproReport {
    repro_heinich_with(100, DEFAULT_SEED)
}

pub fn repro_heinich_with(samples: usize, seed: u64) -> ReproReport {
    let mut r = ReproReport::new("heinich");
    let h = |q: &Matrix, s: &Vector| s.dot(&(q * s));
    let worked: [(&str, Matrix, Vec<Vector>, f64); 3] = [
        ("Q=I, x=(1,2,3)", Matrix::identity(1, 1), vec![v(&[1.0]), v(&[2.0]), v(&[3.0])], 36.0),
        (
            "Σx=0",
            Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            vec![v(&[1.0, -2.0]), v(&[-0.5, 0.5]), v(&[-0.5, 1.5])],
            0.0,
        ),
        (
            "Q=diag(1,4), Σx=(1,1)",
            Matrix::from_diagonal(&v(&[1.0, 4.0])),
            vec![v(&[0.5, 0.0]), v(&[0.5, 0.5]), v(&[0.0, 0.5])],
            5.0,
        ),
    ];
    for (name, q, xs, claimed) in worked {
        let oracle = SurplusOracle::heinich(q.clone(), xs.len()).expect("positive definite");
        match oracle.solve_zbar(&xs) {
            Ok(sol) => {
                r.check(format!("{name}: b"), claimed, sol.value, 1e-9 * claimed.abs().max(1.0), Relation::Equal);
                let sum = xs.iter().fold(Vector::zeros(q.nrows()), |acc, x| acc + x);
                let z_err = (&sol.z - &q * sum * 2.0).norm();
                r.check(format!("{name}: |z̄ - 2QΣx|"), 0.0, z_err, 1e-9, Relation::Equal);
            }
            Err(e) => r.failure(name, &e),
        }
    }
    let rejected = PreferenceFunction::heinich(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err();
    r.check("indefinite Q rejected", 1.0, f64::from(u8::from(rejected)), 0.0, Relation::Equal);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_b: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    let mut failures = 0;
    for s in 0..samples.max(1) {
        let n = 1 + s % 2;
        let q = random_spd(&mut rng, n);
        let xs: Vec<Vector> = (0..3).map(|_| random_point(&mut rng, n, 2.0)).collect();
        let oracle = SurplusOracle::heinich(q.clone(), 3).expect("positive definite");
        let result: Result<()> = (|| {
            let sol = oracle.solve_zbar(&xs)?;
            let sum = xs.iter().fold(Vector::zeros(n), |acc, x| acc + x);
            worst_b = worst_b.max(rel_err(sol.value, h(&q, &sum)));
            let grad = oracle
                .prefs()
                .iter()
                .zip(&xs)
                .fold(Vector::zeros(n), |acc, (f, x)| acc + f.grad_z(x, &sol.z));
            worst_grad = worst_grad.max(grad.norm());
            Ok(())
        })();
        if result.is_err() {
            failures += 1;
        }
    }
    let note = format!("{} seeded (Q, tuple) draws", samples.max(1));
    r.check_noted("max relative error of b vs h(Σx)", 0.0, worst_b, 1e-9, Relation::Equal, &note);
    r.check("max stationarity residual at z̄", 0.0, worst_grad, 1e-10, Relation::AtMost);
    r.check("inner solve failures", 0.0, failures as f64, 0.0, Relation::Equal);
    r
}

/// Every case with default sample counts.
pub fn run_all(seed: u64) -> Vec<ReproReport> {
    vec![
        repro_quadratic_identity(1000, seed),
        repro_symmetry_obstruction_with(100, seed),
        repro_condition_iii_failure(),
        repro_heinich_with(100, seed),
    ]
}

/// Plain-text table of all checks.
pub fn render_table(reports: &[ReproReport]) -> String {
    let mut out = String::new();
    for rep in reports {
        let _ = writeln!(out, "{} [{}]", rep.case, if rep.passed { "PASS" } else { "FAIL" });
        for c in &rep.checks {
            let _ = writeln!(
                out,
                "  {:<4} {:<44} claimed {:>14.6e}  computed {:>14.6e}  tol {:.0e}",
                if c.passed { "ok" } else { "FAIL" },
                c.quantity,
                c.claimed,
                c.computed,
                c.tolerance
            );
        }
    }
    out
}
