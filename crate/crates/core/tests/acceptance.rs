//! Acceptance criteria, run in order with wall-clock limits.
//!
//! Prints one `PASS`/`FAIL` line per criterion and exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{best_pairing, builtin_oracles, equivalence_instances, fd_sweep, product_lp, small_lp_instances, sorted_instance, vertex_enumeration};
use mmot_core::linalg::{self, Matrix, Vector};
use mmot_core::matching::{mam_objective, solve_mam_fixed_point, solve_mam_via_mk, verify_equivalence, EQUIVALENCE_TOL};
use mmot_core::mmot::{solve_mk_entropic_with_table, solve_mk_exact_with_table, swap_monotonicity_check, SurplusTable};
use mmot_core::repro::{self, bilinear_a, quadratic_pair_form};
use mmot_core::surplus::{condition_iii_matrix, symmetry_product, BilinearSurplus, Surplus, SurplusOracle};
use mmot_core::{Coupling, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    id: u32,
    title: &'static str,
    passed: bool,
    elapsed: Duration,
    limit: Option<Duration>,
    detail: String,
}

impl Line {
    fn print(&self) {
        let limit = self.limit.map(|l| format!(" (limit {} s)", l.as_secs())).unwrap_or_default();
        println!(
            "{} criterion {}: {} | {:.3} s{} | {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            limit,
            self.detail
        );
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn within(elapsed: Duration, limit: Option<Duration>) -> bool {
    limit.is_none_or(|l| elapsed <= l)
}

fn criterion(id: u32, title: &'static str, limit: Option<u64>, f: impl FnOnce() -> (bool, String)) -> Line {
    let limit = limit.map(Duration::from_secs);
    let ((ok, detail), elapsed) = timed(f);
    let line = Line {
        id,
        title,
        passed: ok && within(elapsed, limit),
        elapsed,
        limit,
        detail,
    };
    line.print();
    line
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn condition_iii() -> (bool, String) {
    let oracle = SurplusOracle::brenier(3, 2).unwrap();
    let zero = v(&[0.0, 0.0]);
    let p = v(&[2.5, 0.0]);
    let at_zero = oracle.solve_zbar(&[zero.clone(), zero.clone(), zero.clone()]).unwrap();
    let b_err = linalg::frobenius(&(&at_zero.b + Matrix::identity(2, 2) * 3.0));
    let c = condition_iii_matrix(&oracle, &zero, &zero, &zero, &p, &p).unwrap();
    let z_err = (&c.z_bar_tilde + &p * 0.8).norm();
    let lmax = *c.eigenvalues.last().unwrap();
    let bound = 1.0 / 5f64.sqrt() - 2.0 / 3.0;
    let report = repro::repro_condition_iii_failure();
    let ok = z_err <= 1e-8 && b_err <= 1e-8 && lmax <= bound + 1e-8 && lmax < 0.0 && report.passed;
    (
        ok,
        format!("|z̄+0.8p| = {z_err:.1e}, |B+3I| = {b_err:.1e}, λ_max(T) = {lmax:.10} vs bound {bound:.10}"),
    )
}

fn quadratic_identity() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(repro::DEFAULT_SEED);
    let (mut worst_b, mut worst_z) = (0.0f64, 0.0f64);
    let mut count = 0;
    for s in 0..1000 {
        let m = [2, 3, 5][s % 3];
        let n = 1 + (s / 3) % 3;
        let oracle = SurplusOracle::quadratic(m, n).unwrap();
        let xs: Vec<Vector> = (0..m)
            .map(|_| Vector::from_fn(n, |_, _| rng.random_range(-3.0..3.0)))
            .collect();
        let sol = oracle.solve_zbar(&xs).unwrap();
        let closed = quadratic_pair_form(&xs);
        let mean = xs.iter().fold(Vector::zeros(n), |acc, x| acc + x) / m as f64;
        worst_b = worst_b.max((sol.value - closed).abs() / (1.0 + sol.value.abs()));
        worst_z = worst_z.max((&sol.z - mean).norm());
        count += 1;
    }
    let report = repro::repro_quadratic_identity(1000, repro::DEFAULT_SEED);
    let ok = count == 1000 && worst_b <= 1e-10 && worst_z <= 1e-10 && report.passed;
    (ok, format!("{count} tuples, worst rel. b error {worst_b:.1e}, worst |z̄ - mean| {worst_z:.1e}"))
}

fn symmetry_obstruction() -> (bool, String) {
    let a = bilinear_a();
    let bil = Surplus::Bilinear(BilinearSurplus::new(a.clone()).unwrap());
    let zero = v(&[0.0, 0.0]);
    let s = symmetry_product(&bil, &zero, &zero, &zero).unwrap();
    let bil_err = linalg::frobenius(&(s - &a));
    let sym_pd = linalg::eigen_range(&linalg::symmetric_part(&a)).0 > 0.0;

    let q = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let oracles = [
        ("quadratic", SurplusOracle::quadratic(3, 2).unwrap()),
        ("brenier", SurplusOracle::brenier(3, 2).unwrap()),
        ("heinich", SurplusOracle::heinich(q, 3).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = Vec::new();
    for (name, o) in oracles {
        let surplus = Surplus::Hedonic(o);
        let mut w = 0.0f64;
        for _ in 0..100 {
            let xs: Vec<Vector> = (0..3).map(|_| Vector::from_fn(2, |_, _| rng.random_range(-2.0..2.0))).collect();
            let s = symmetry_product(&surplus, &xs[0], &xs[1], &xs[2]).unwrap();
            w = w.max(linalg::asymmetry(&s));
        }
        worst.push((name, w));
    }
    let report = repro::repro_symmetry_obstruction_with(100, 17);
    let ok = bil_err <= 1e-12 && sym_pd && worst.iter().all(|(_, w)| *w <= 1e-8) && report.passed;
    let detail = worst
        .iter()
        .map(|(n, w)| format!("{n} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    (ok, format!("|S - A| = {bil_err:.1e}; max |S - Sᵀ|: {detail}"))
}

struct Solved {
    label: String,
    problem: Problem,
    table: SurplusTable,
    gamma: Coupling,
}

fn equivalence(instances: &[(String, Problem)]) -> (bool, String) {
    let (mut worst_gap, mut worst_glued, mut worst_rec) = (0.0f64, 0.0f64, 0.0f64);
    let mut pure = 0;
    let mut failures = Vec::new();
    for (label, p) in instances {
        match verify_equivalence(p) {
            Ok(r) => {
                let tol = EQUIVALENCE_TOL * (1.0 + r.mk_value.abs());
                worst_gap = worst_gap.max(r.gap / tol);
                worst_glued = worst_glued.max(r.glued_gap / tol);
                if let Some(d) = r.reconstruction_distance {
                    pure += 1;
                    worst_rec = worst_rec.max(d);
                }
                if !(r.passed && r.reconstruction_ok()) {
                    failures.push(label.clone());
                }
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    (
        failures.is_empty(),
        format!(
            "{} instances; worst gap {worst_gap:.2} tol, glued {worst_glued:.2} tol; {pure} with purity, worst reconstruction {worst_rec:.1e}; failures {failures:?}",
            instances.len()
        ),
    )
}

fn derivatives() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for case in builtin_oracles(2) {
        let s = fd_sweep(&case.oracle, 100, 5);
        ok &= s.worst_gradient <= 1e-5 && s.worst_second_order <= 1e-4 && s.worst_stationarity <= 1e-10;
        parts.push(format!("{} grad {:.1e} 2nd {:.1e}", case.name, s.worst_gradient, s.worst_second_order));
    }
    (ok, parts.join(", "))
}

fn lp_vs_brute_force(small: &[Solved]) -> (bool, String) {
    let mut worst = 0.0f64;
    for s in small {
        let (a, b, c) = product_lp(&s.problem);
        worst = worst.max((vertex_enumeration(&a, &b, &c) - s.gamma.objective()).abs());
    }
    let sorted = sorted_instance();
    let (best, sp, tp) = best_pairing(&sorted);
    let table = SurplusTable::compute(&sorted).unwrap();
    let gamma = solve_mk_exact_with_table(&sorted, &table).unwrap();
    let monotone: Vec<Vec<usize>> = (0..4).map(|k| vec![k; 3]).collect();
    let support: Vec<Vec<usize>> = gamma.entries().iter().map(|e| e.idx.clone()).collect();
    let identity = vec![0, 1, 2, 3];
    let pairing_ok = sp == identity && tp == identity && support == monotone && (gamma.objective() - best).abs() <= 1e-10;
    (
        worst <= 1e-10 && pairing_ok,
        format!(
            "{} LPs with ≤ 8 variables, worst |simplex - enumeration| {worst:.1e}; sorted instance monotone: {pairing_ok}",
            small.len()
        ),
    )
}

fn diagnostics(all: &[&Solved]) -> (bool, String) {
    let mut violations = 0;
    let mut checked = 0;
    for s in all {
        for i in 0..s.problem.m() {
            let r = swap_monotonicity_check(&s.gamma, s.problem.oracle(), i).unwrap();
            violations += r.violations.len();
            checked += r.pairs_checked;
        }
    }
    let mut min_core = f64::INFINITY;
    for case in builtin_oracles(2) {
        let sweep = fd_sweep(&case.oracle, 25, 23);
        min_core = min_core.min(sweep.min_core_eigenvalue);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for s in all {
        let o = s.problem.oracle();
        for _ in 0..20 {
            let idx: Vec<usize> = s.problem.sizes().iter().map(|&n| rng.random_range(0..n)).collect();
            let xs = s.problem.tuple_points(&idx);
            for i in 0..o.arity() {
                let core = o.envelope_core(&xs, i).unwrap();
                min_core = min_core.min(linalg::eigen_range(&core).0);
            }
        }
    }
    (
        violations == 0 && min_core > 0.0,
        format!("{} couplings, {checked} swap pairs, {violations} violations; min core eigenvalue {min_core:.3e}", all.len()),
    )
}

fn entropic(solved: &[Solved]) -> (bool, String) {
    let mut worst_rel = 0.0f64;
    let mut worst_viol = 0.0f64;
    let mut failures = Vec::new();
    for s in solved {
        match solve_mk_entropic_with_table(&s.problem, &s.table, 1e-3) {
            Ok(c) => {
                let exact = s.gamma.objective();
                worst_rel = worst_rel.max((c.objective() - exact).abs() / exact.abs().max(1e-12));
                worst_viol = worst_viol.max(c.meta().marginal_violation.unwrap_or(f64::INFINITY));
            }
            Err(e) => failures.push(format!("{}: {e}", s.label)),
        }
    }
    let mut log_runs = 0;
    for s in solved.iter().step_by(10) {
        match solve_mk_entropic_with_table(&s.problem, &s.table, 1e-4) {
            Ok(c) if c.meta().log_domain == Some(true) && c.objective().is_finite() => log_runs += 1,
            Ok(_) => failures.push(format!("{}: ε = 1e-4 did not use the log domain", s.label)),
            Err(e) => failures.push(format!("{} at ε = 1e-4: {e}", s.label)),
        }
    }
    (
        failures.is_empty() && worst_rel <= 0.02 && worst_viol <= 1e-8,
        format!(
            "{} instances at ε = 1e-3: worst rel. gap {:.3}%, worst violation {worst_viol:.1e}; {log_runs} log-domain runs at ε = 1e-4; failures {failures:?}",
            solved.len(),
            worst_rel * 100.0
        ),
    )
}

fn fixed_point(solved: &[Solved]) -> (bool, String) {
    let mut runs = 0;
    let mut monotone = true;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut exact_start_ok = true;
    let mut failures = Vec::new();
    for s in solved {
        let exact = s.gamma.objective();
        let sol = solve_mam_via_mk(&s.problem).unwrap();
        let mut inits = vec![s.problem.marginals()[0].clone(), s.problem.marginals()[2].clone()];
        inits.push(sol.nu.clone());
        for (k, init) in inits.iter().enumerate() {
            match solve_mam_fixed_point(&s.problem, init, 100) {
                Ok(run) => {
                    runs += 1;
                    monotone &= run.trace.windows(2).all(|w| w[1] >= w[0]);
                    worst_excess = worst_excess.max(run.objective - exact);
                    if k == 2 {
                        let start = mam_objective(&sol.nu, &s.problem).unwrap();
                        exact_start_ok &= run.converged
                            && run.outer_iterations == 1
                            && (run.objective - start).abs() <= 1e-9 * (1.0 + start.abs());
                    }
                }
                Err(e) => failures.push(format!("{}: {e}", s.label)),
            }
        }
    }
    (
        failures.is_empty() && monotone && exact_start_ok && worst_excess <= 1e-9,
        format!(
            "{runs} runs; traces non-decreasing: {monotone}; exact start is fixed: {exact_start_ok}; max excess over exact {worst_excess:.1e}; failures {failures:?}"
        ),
    )
}

fn solve_all(problems: Vec<(String, Problem)>) -> Vec<Solved> {
    problems
        .into_iter()
        .map(|(label, problem)| {
            let table = SurplusTable::compute(&problem).unwrap();
            let gamma = solve_mk_exact_with_table(&problem, &table).unwrap();
            Solved {
                label,
                problem,
                table,
                gamma,
            }
        })
        .collect()
}

fn main() -> ExitCode {
    let instances = equivalence_instances(50);
    let mut lines = vec![
        criterion(1, "condition (III) counterexample", Some(1), condition_iii),
        criterion(2, "quadratic surplus identity", Some(5), quadratic_identity),
        criterion(3, "symmetry obstruction", Some(5), symmetry_obstruction),
        criterion(4, "MK and MAM equivalence", Some(60), || equivalence(&instances)),
        criterion(5, "envelope derivatives vs. finite differences", Some(10), derivatives),
    ];

    let small = solve_all(
        small_lp_instances(8, 61)
            .into_iter()
            .enumerate()
            .map(|(k, p)| (format!("small #{k}"), p))
            .collect(),
    );
    lines.push(criterion(6, "exact LP vs. brute force", Some(30), || lp_vs_brute_force(&small)));

    let solved = solve_all(instances);
    let all: Vec<&Solved> = solved.iter().chain(&small).collect();
    lines.push(criterion(7, "optimality diagnostics", None, || diagnostics(&all)));
    lines.push(criterion(8, "entropic cross-check", None, || entropic(&solved)));
    lines.push(criterion(9, "fixed-point MAM solver", None, || fixed_point(&solved)));

    let failed: Vec<u32> = lines.iter().filter(|l| !l.passed).map(|l| l.id).collect();
    println!("{} of {} criteria passed", lines.len() - failed.len(), lines.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
