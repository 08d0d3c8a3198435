#![allow(dead_code)]

use mmot_core::linalg::{self, Matrix, Vector};
use mmot_core::measures::{generate_instance, InstanceSpec, WeightScheme};
use mmot_core::surplus::{OracleSpec, PreferenceFunction, SurplusOracle};
use mmot_core::{DiscreteMeasure, Problem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Maximizes `c·x` over `{x ≥ 0, A x = b}` by visiting every basic solution.
pub fn vertex_enumeration(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let cols = c.len();
    assert!(cols <= 12);
    let rhs = DVector::from_column_slice(b);
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << cols) {
        let support: Vec<usize> = (0..cols).filter(|j| mask & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(a.len(), support.len(), |r, k| a[r][support[k]]);
        let svd = sub.clone().svd(true, true);
        if svd.rank(1e-10) < support.len() {
            continue;
        }
        let Ok(x) = svd.solve(&rhs, 1e-12) else { continue };
        if (&sub * &x - &rhs).amax() > 1e-10 || x.iter().any(|v| *v < -1e-12) {
            continue;
        }
        let value: f64 = support.iter().zip(x.iter()).map(|(&j, v)| c[j] * v).sum();
        best = best.max(value);
    }
    best
}

/// Marginal constraints and surplus vector of the full product LP.
pub fn product_lp(problem: &Problem) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let sizes = problem.sizes();
    let total: usize = sizes.iter().product();
    let unflat = |mut f: usize| {
        let mut idx = vec![0; sizes.len()];
        for i in (0..sizes.len()).rev() {
            idx[i] = f % sizes[i];
            f /= sizes[i];
        }
        idx
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, mu) in problem.marginals().iter().enumerate() {
        for (k, w) in mu.weights().iter().enumerate() {
            a.push((0..total).map(|f| if unflat(f)[i] == k { 1.0 } else { 0.0 }).collect());
            b.push(*w);
        }
    }
    let oracle = problem.oracle();
    let c = (0..total)
        .map(|f| oracle.eval_b(&problem.tuple_points(&unflat(f))).unwrap())
        .collect();
    (a, b, c)
}

pub fn random_measure(rng: &mut ChaCha8Rng, atoms: usize, dim: usize) -> DiscreteMeasure {
    let points = (0..atoms)
        .map(|_| Vector::from_fn(dim, |_, _| rng.random_range(-1.5..1.5)))
        .collect();
    let raw: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = raw.iter().sum();
    DiscreteMeasure::new(points, raw.iter().map(|w| w / s).collect()).unwrap()
}

pub fn oracle_by_index(k: usize, m: usize, dim: usize) -> SurplusOracle {
    match k % 3 {
        0 => SurplusOracle::quadratic(m, dim).unwrap(),
        1 => SurplusOracle::brenier(m, dim).unwrap(),
        _ => {
            let q = Matrix::from_fn(dim, dim, |r, c| if r == c { 1.0 + r as f64 } else { 0.3 });
            SurplusOracle::heinich(q, m).unwrap()
        }
    }
}

/// Every small product LP shape (at most eight variables) on seeded data.
pub fn small_lp_instances(rounds: usize, seed: u64) -> Vec<Problem> {
    let shapes: [&[usize]; 6] = [&[2, 2], &[2, 3], &[3, 2], &[2, 4], &[4, 2], &[2, 2, 2]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for round in 0..rounds {
        for (s, shape) in shapes.iter().enumerate() {
            let dim = 1 + (round % 2);
            let marginals = shape.iter().map(|&n| random_measure(&mut rng, n, dim)).collect();
            let oracle = oracle_by_index(round + s, shape.len(), dim);
            out.push(Problem::new(marginals, oracle, Default::default()).unwrap());
        }
    }
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

pub const SORTED_ATOMS: [[f64; 4]; 3] = [
    [-1.2, -0.1, 0.7, 1.9],
    [-0.8, 0.0, 0.3, 2.2],
    [-2.0, -0.5, 1.1, 1.4],
];

pub fn sorted_instance() -> Problem {
    let marginals = SORTED_ATOMS
        .iter()
        .map(|x| DiscreteMeasure::from_scalars(x, &[0.25; 4]).unwrap())
        .collect();
    Problem::new(marginals, SurplusOracle::quadratic(3, 1).unwrap(), Default::default()).unwrap()
}

/// Best value over all `(4!)²` pairings of the sorted instance, with the maximizing permutations.
pub fn best_pairing(problem: &Problem) -> (f64, Vec<usize>, Vec<usize>) {
    let oracle = problem.oracle();
    let b = |i: usize, j: usize, k: usize| oracle.eval_b(&problem.tuple_points(&[i, j, k])).unwrap();
    let perms = permutations(4);
    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    for s in &perms {
        for t in &perms {
            let v: f64 = (0..4).map(|k| 0.25 * b(k, s[k], t[k])).sum();
            if v > best.0 {
                best = (v, s.clone(), t.clone());
            }
        }
    }
    best
}

/// Seeded `m = 3` instances on `[-2, 2]ⁿ`, alternating dimension and oracle.
pub fn equivalence_instances(count: usize) -> Vec<(String, Problem)> {
    (0..count)
        .map(|k| {
            let n = 1 + k % 2;
            let brenier = (k / 2) % 2 == 1;
            let atoms = 2 + (k / 4) % 4;
            let spec = InstanceSpec {
                lo: -2.0,
                hi: 2.0,
                weights: if k % 3 == 0 { WeightScheme::Uniform } else { WeightScheme::Random },
                oracle: brenier.then(|| OracleSpec::brenier(3)),
                ..InstanceSpec::new(3, n, atoms, 1_000 + k as u64)
            };
            let label = format!("#{k} n={n} atoms={atoms} {}", if brenier { "brenier" } else { "quadratic" });
            (label, generate_instance(&spec).unwrap())
        })
        .collect()
}

pub struct FdCase {
    pub name: &'static str,
    pub oracle: SurplusOracle,
}

pub fn builtin_oracles(dim: usize) -> Vec<FdCase> {
    let q = Matrix::from_fn(dim, dim, |r, c| if r == c { 1.5 + r as f64 } else { -0.4 });
    let mixed = SurplusOracle::new(
        vec![PreferenceFunction::Quadratic, PreferenceFunction::Brenier, PreferenceFunction::Linear],
        dim,
    )
    .unwrap();
    vec![
        FdCase { name: "quadratic", oracle: SurplusOracle::quadratic(3, dim).unwrap() },
        FdCase { name: "brenier", oracle: SurplusOracle::brenier(3, dim).unwrap() },
        FdCase { name: "heinich", oracle: SurplusOracle::heinich(q, 3).unwrap() },
        FdCase { name: "mixed", oracle: mixed },
    ]
}

fn perturbed(xs: &[Vector], i: usize, a: usize, h: f64) -> Vec<Vector> {
    let mut ys = xs.to_vec();
    ys[i][a] += h;
    ys
}

fn rel_err(analytic: &Matrix, fd: &Matrix) -> f64 {
    (analytic - fd).norm() / (1.0 + analytic.norm())
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FdSweep {
    pub worst_gradient: f64,
    pub worst_second_order: f64,
    pub worst_stationarity: f64,
    pub min_core_eigenvalue: f64,
    pub tuples: usize,
}

/// Compares the envelope formulas with central differences at `points`
/// seeded tuples of three points in `[-1, 1]ⁿ`.
pub fn fd_sweep(o: &SurplusOracle, points: usize, seed: u64) -> FdSweep {
    let dim = o.dim();
    let m = o.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = FdSweep {
        min_core_eigenvalue: f64::INFINITY,
        ..FdSweep::default()
    };
    for _ in 0..points {
        let xs: Vec<Vector> = (0..m)
            .map(|_| Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let sol = o.solve_zbar(&xs).unwrap();
        out.worst_stationarity = out.worst_stationarity.max(sol.grad_norm);
        out.tuples += 1;

        for i in 0..m {
            let core = o.envelope_core(&xs, i).unwrap();
            out.min_core_eigenvalue = out.min_core_eigenvalue.min(linalg::eigen_range(&core).0);

            let h = 1e-5;
            let grad = o.grad_b(&xs, i).unwrap();
            let fd = Vector::from_fn(dim, |a, _| {
                (o.eval_b(&perturbed(&xs, i, a, h)).unwrap() - o.eval_b(&perturbed(&xs, i, a, -h)).unwrap()) / (2.0 * h)
            });
            out.worst_gradient = out.worst_gradient.max((&grad - &fd).norm() / (1.0 + grad.norm()));

            let h = 1e-4;
            let jac = o.jac_zbar(&xs, i).unwrap();
            let mut fd_jac = Matrix::zeros(dim, dim);
            for a in 0..dim {
                let zp = o.solve_zbar(&perturbed(&xs, i, a, h)).unwrap().z;
                let zm = o.solve_zbar(&perturbed(&xs, i, a, -h)).unwrap().z;
                fd_jac.set_column(a, &((zp - zm) / (2.0 * h)));
            }
            out.worst_second_order = out.worst_second_order.max(rel_err(&jac, &fd_jac));

            for j in 0..m {
                let analytic = if i == j {
                    o.prefs()[i].hess_xx(&xs[i], &sol.z) + &core
                } else {
                    o.hess_b_cross(&xs, i, j).unwrap()
                };
                let mut fd_h = Matrix::zeros(dim, dim);
                for a in 0..dim {
                    let gp = o.grad_b(&perturbed(&xs, i, a, h), j).unwrap();
                    let gm = o.grad_b(&perturbed(&xs, i, a, -h), j).unwrap();
                    fd_h.set_row(a, &((gp - gm) / (2.0 * h)).transpose());
                }
                out.worst_second_order = out.worst_second_order.max(rel_err(&analytic, &fd_h));
            }
        }
    }
    out
}
