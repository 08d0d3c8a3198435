use std::path::{Path, PathBuf};

use mmot_core::linalg::{self, Vector};
use mmot_core::lp::PivotRule;
use mmot_core::manifest::CheckSpec;
use mmot_core::matching::{
    compose_g, maps_from_plans, solve_mam_fixed_point, solve_mam_via_mk, solve_plans, verify_equivalence,
    FIXED_POINT_TOL,
};
use mmot_core::measures::{generate_instance, InstanceSpec, MeasureJson, WeightScheme};
use mmot_core::mmot::{
    graph_check, solve_mk_entropic_with_table, solve_mk_exact_with_table, spacelike_diagnostic,
    swap_monotonicity_check, SurplusTable,
};
use mmot_core::surplus::{
    check_conditions, condition_iii_matrix, symmetry_product, BilinearSurplus, OracleSpec, SampleSpec,
};
use mmot_core::{plot, repro, Error, ErrorKind, Problem, Result, RunManifest, Surplus, SurplusOracle};
use serde::Serialize;
use serde_json::{json, Value};

use crate::rundir::RunDir;
use crate::{Cli, Command, GenArgs, GenOracle};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_CHECK_FAILED: u8 = 4;

struct Outcome {
    code: u8,
    summary: Value,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { code: EXIT_OK, summary }
    }

    fn checked(passed: bool, summary: Value) -> Self {
        Self {
            code: if passed { EXIT_OK } else { EXIT_CHECK_FAILED },
            summary,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Validation | ErrorKind::Io => EXIT_VALIDATION,
        ErrorKind::Solver | ErrorKind::Internal => EXIT_SOLVER,
    }
}

fn kind_name(err: &Error) -> &'static str {
    match err.kind() {
        ErrorKind::Validation => "validation",
        ErrorKind::Io => "io",
        ErrorKind::Solver => "solver",
        ErrorKind::Internal => "internal",
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::SolveMk => "solve-mk",
        Command::SolveMam => "solve-mam",
        Command::VerifyEquivalence => "verify-equivalence",
        Command::CheckSurplus => "check-surplus",
        Command::PaperRepro => "paper-repro",
        Command::GenInstance(_) => "gen-instance",
    }
}

/// Loads the manifest and applies command-line overrides.
fn prepare(cli: &Cli) -> Result<(RunManifest, PathBuf)> {
    let (mut manifest, base) = match &cli.common.manifest {
        Some(path) => {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (RunManifest::load(path)?, base)
        }
        None => (RunManifest::default(), PathBuf::from(".")),
    };
    if let Some(seed) = cli.common.seed {
        manifest.seed = seed;
        if let Some(inst) = &mut manifest.instance {
            inst.seed = seed;
        }
    }
    if let Some(eps) = cli.common.entropic_eps {
        manifest.entropic_eps = Some(eps);
    }
    if let Some(p) = cli.common.pivot {
        manifest.settings.pivot = p.into();
    }
    manifest.command = Some(command_name(&cli.command).to_string());
    manifest.validate()?;
    Ok((manifest, base))
}

fn out_dir(cli: &Cli, manifest: Option<&RunManifest>) -> PathBuf {
    cli.common
        .out
        .clone()
        .or_else(|| manifest.and_then(|m| m.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("mmot-out"))
}

pub fn run(cli: &Cli) -> u8 {
    let name = command_name(&cli.command);
    let prepared = prepare(cli);
    let out = out_dir(cli, prepared.as_ref().ok().map(|(m, _)| m));
    let mut dir = match RunDir::create(&out) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot create output directory {}: {e}", out.display());
            return EXIT_VALIDATION;
        }
    };
    log::info!("{name}: writing to {}", out.display());
    let result = prepared.and_then(|(manifest, base)| dispatch(cli, &manifest, &base, &mut dir));
    let (code, log) = match &result {
        Ok(outcome) => (
            outcome.code,
            json!({
                "command": name,
                "status": if outcome.code == EXIT_OK { "ok" } else { "check_failed" },
                "exit_code": outcome.code,
                "summary": outcome.summary,
            }),
        ),
        Err(e) => {
            let code = exit_code(e);
            eprintln!("error: {e}");
            (
                code,
                json!({
                    "command": name,
                    "status": "error",
                    "exit_code": code,
                    "error": { "kind": kind_name(e), "message": e.to_string() },
                }),
            )
        }
    };
    let mut log = log;
    log["outputs"] = json!(dir.files());
    if let Err(e) = dir.json("run_log.json", &log) {
        eprintln!("error: cannot write run log: {e}");
    }
    if let Ok(outcome) = &result {
        println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
    }
    code
}

fn dispatch(cli: &Cli, manifest: &RunManifest, base: &Path, dir: &mut RunDir) -> Result<Outcome> {
    dir.json(
        "versions.json",
        &json!({ "mmot-core": mmot_core::VERSION, "mmot": env!("CARGO_PKG_VERSION") }),
    )?;
    match &cli.command {
        Command::GenInstance(args) => return gen_instance(args, manifest, dir),
        Command::PaperRepro => {
            write_common(manifest, None, dir)?;
            return paper_repro(manifest, dir);
        }
        _ => {}
    }
    if matches!(cli.command, Command::CheckSurplus) && !manifest.has_problem() {
        write_common(manifest, None, dir)?;
        return check_surplus(manifest, None, dir);
    }
    if !manifest.has_problem() {
        return Err(Error::InvalidInput(format!(
            "{} needs --manifest with a problem or an instance",
            command_name(&cli.command)
        )));
    }
    let problem = manifest.build_problem(base)?;
    write_common(manifest, Some(&problem), dir)?;
    match &cli.command {
        Command::SolveMk => solve_mk(manifest, &problem, dir),
        Command::SolveMam => solve_mam(manifest, &problem, base, dir),
        Command::VerifyEquivalence => equivalence(&problem, dir),
        Command::CheckSurplus => check_surplus(manifest, Some(&problem), dir),
        Command::PaperRepro | Command::GenInstance(_) => unreachable!("handled above"),
    }
}

/// Manifest copy (with the problem inline) and effective settings.
fn write_common(manifest: &RunManifest, problem: Option<&Problem>, dir: &mut RunDir) -> Result<()> {
    match problem {
        Some(p) => dir.json("manifest.json", &manifest.resolved(p))?,
        None => dir.json("manifest.json", manifest)?,
    }
    dir.json("settings.json", &manifest.settings)
}

fn solve_mk(manifest: &RunManifest, problem: &Problem, dir: &mut RunDir) -> Result<Outcome> {
    let oracle = problem.oracle();
    let table = SurplusTable::compute(problem)?;
    let gamma = solve_mk_exact_with_table(problem, &table)?;
    let graph = graph_check(&gamma);
    let swaps = (0..problem.m())
        .map(|i| swap_monotonicity_check(&gamma, oracle, i))
        .collect::<Result<Vec<_>>>()?;
    let spacelike = spacelike_diagnostic(&gamma, oracle)?;

    // A different optimal vertex under the other pivot rule shows the optimum is not unique.
    let mut other = problem.settings().clone();
    other.pivot = match other.pivot {
        PivotRule::Bland => PivotRule::Dantzig,
        PivotRule::Dantzig => PivotRule::Bland,
    };
    let alt = solve_mk_exact_with_table(&problem.with_settings(other.clone())?, &table)?;
    let uniqueness = json!({
        "alternate_pivot": other.pivot,
        "alternate_objective": alt.objective(),
        "coupling_distance": gamma.distance(&alt),
        "non_unique": gamma.distance(&alt) > problem.settings().feasibility_tol * 10.0,
    });

    dir.json("coupling.json", &gamma.to_json())?;
    dir.json(
        "diagnostics.json",
        &json!({ "graph": graph, "swap": swaps, "spacelike": spacelike, "uniqueness": uniqueness }),
    )?;
    let path = dir.file("plots/coupling.csv");
    plot::write_coupling(&gamma, &path)?;

    let swap_violations: usize = swaps.iter().map(|s| s.violations.len()).sum();
    let mut summary = json!({
        "objective": gamma.objective(),
        "support": gamma.len(),
        "pivots": gamma.meta().pivots,
        "max_marginal_violation": gamma.max_marginal_violation(),
        "is_graph": graph.is_graph,
        "swap_violations": swap_violations,
        "spacelike_nonnegative_fraction": spacelike.nonnegative_fraction,
        "non_unique": uniqueness["non_unique"],
    });
    if let Some(eps) = manifest.entropic_eps {
        let ent = solve_mk_entropic_with_table(problem, &table, eps)?;
        dir.json("coupling_entropic.json", &ent.to_json())?;
        let path = dir.file("plots/coupling_entropic.csv");
        plot::write_coupling(&ent, &path)?;
        summary["entropic"] = json!({
            "epsilon": eps,
            "objective": ent.objective(),
            "regularized_objective": ent.meta().regularized_objective,
            "relative_gap": (ent.objective() - gamma.objective()).abs() / gamma.objective().abs().max(f64::MIN_POSITIVE),
            "iterations": ent.meta().iterations,
            "log_domain": ent.meta().log_domain,
            "max_marginal_violation": ent.max_marginal_violation(),
        });
    }
    Ok(Outcome::ok(summary))
}

fn solve_mam(manifest: &RunManifest, problem: &Problem, base: &Path, dir: &mut RunDir) -> Result<Outcome> {
    let sol = solve_mam_via_mk(problem)?;
    let plans = solve_plans(&sol.nu, problem)?;
    let mam: f64 = plans.iter().map(|p| p.objective).sum();
    let maps = maps_from_plans(&sol.nu, &plans, problem)?;
    let g = compose_g(&maps);

    dir.json("nu.json", &MeasureJson::from(&sol.nu))?;
    dir.json("coupling.json", &sol.gamma.to_json())?;
    dir.json("plans.json", &plans)?;
    let g_json = match &g {
        Ok(gs) => json!(gs.iter().map(|m| m.to_json()).collect::<Vec<_>>()),
        Err(e) => json!({ "error": e.to_string() }),
    };
    dir.json(
        "maps.json",
        &json!({ "F": maps.iter().map(|m| m.to_json()).collect::<Vec<_>>(), "G": g_json }),
    )?;
    let path = dir.file("plots/nu.csv");
    plot::write_measure(&sol.nu, &path)?;
    let mut arrows: Vec<(String, &_)> = maps.iter().enumerate().map(|(i, m)| (format!("F{}", i + 1), m)).collect();
    if let Ok(gs) = &g {
        arrows.extend(gs.iter().enumerate().map(|(i, m)| (format!("G{}", i + 2), m)));
    }
    let path = dir.file("plots/maps.csv");
    plot::write_map_arrows(&arrows, &path)?;

    let fp_spec = manifest.fixed_point.clone().unwrap_or_default();
    let init = match &fp_spec.init {
        Some(src) => src.load(base)?,
        None => problem.marginals()[0].clone(),
    };
    let run = solve_mam_fixed_point(problem, &init, fp_spec.max_outer)?;
    dir.json(
        "fixed_point.json",
        &json!({ "run": run, "nu": MeasureJson::from(&run.nu) }),
    )?;
    let path = dir.file("plots/trace.csv");
    plot::write_trace(&run.trace, &path)?;

    let exact = sol.gamma.objective();
    let within = run.objective <= exact + FIXED_POINT_TOL * (1.0 + exact.abs());
    Ok(Outcome::checked(
        within,
        json!({
            "mk_value": exact,
            "mam_value": mam,
            "nu_support": sol.nu.len(),
            "gamma_support": sol.gamma.len(),
            "ce_pure": maps.iter().all(|m| m.valid),
            "f1_invertible": g.is_ok(),
            "fixed_point": {
                "objective": run.objective,
                "gap_to_exact": exact - run.objective,
                "outer_iterations": run.outer_iterations,
                "converged": run.converged,
                "frozen": run.frozen.len(),
            },
        }),
    ))
}

fn equivalence(problem: &Problem, dir: &mut RunDir) -> Result<Outcome> {
    let report = verify_equivalence(problem)?;
    dir.json("equivalence.json", &report)?;
    let passed = report.passed && report.reconstruction_ok();
    Ok(Outcome::checked(passed, serde_json::to_value(&report)?))
}

#[derive(Serialize)]
struct ProbeResult {
    x: Vec<Vec<f64>>,
    tilde: [Vec<f64>; 2],
    t: Vec<Vec<f64>>,
    t_eigenvalues: Vec<f64>,
    positive_definite: bool,
    z_bar: Vec<f64>,
    z_bar_tilde: Vec<f64>,
    s: Vec<Vec<f64>>,
    s_asymmetry: f64,
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn check_surplus(manifest: &RunManifest, problem: Option<&Problem>, dir: &mut RunDir) -> Result<Outcome> {
    let check = manifest.check.clone().unwrap_or(CheckSpec {
        oracle: None,
        dim: None,
        x_box: None,
        z_box: None,
        samples: 200,
        tuples: Vec::new(),
        bilinear_a: None,
    });
    let dim = check
        .dim
        .or(problem.map(Problem::dim))
        .ok_or_else(|| Error::InvalidInput("check-surplus needs a problem or check.dim".into()))?;
    let oracle: SurplusOracle = match (&check.oracle, problem) {
        (Some(spec), _) => spec.build(dim)?,
        (None, Some(p)) => p.oracle().clone(),
        (None, None) => return Err(Error::InvalidInput("check-surplus needs an oracle".into())),
    };
    let x_box = match (&check.x_box, problem) {
        (Some(b), _) => b.build()?,
        (None, Some(p)) => {
            let mut bx = p.marginals()[0].bounding_box();
            for mu in &p.marginals()[1..] {
                bx = bx.union(&mu.bounding_box());
            }
            bx.scaled(1.0, 0.5)
        }
        (None, None) => return Err(Error::InvalidInput("check-surplus needs check.x_box".into())),
    };
    let mut spec = SampleSpec::new(x_box, check.samples, manifest.seed);
    spec.z_box = check.z_box.as_ref().map(|b| b.build()).transpose()?;
    let surplus = Surplus::Hedonic(oracle.clone());
    let report = check_conditions(&surplus, &spec)?;

    let mut probes = Vec::new();
    for probe in &check.tuples {
        let (xs, tilde) = CheckSpec::tuple_points(probe)?;
        if xs.len() != 3 || oracle.arity() != 3 {
            return Err(Error::InvalidInput("condition (III) probes need three points and m = 3".into()));
        }
        let [t1, t3] = tilde.unwrap_or_else(|| [xs[0].clone(), xs[2].clone()]);
        let c = condition_iii_matrix(&oracle, &xs[0], &xs[1], &xs[2], &t1, &t3)?;
        let s = symmetry_product(&surplus, &xs[0], &xs[1], &xs[2])?;
        probes.push(ProbeResult {
            x: xs.iter().map(to_vec).collect(),
            tilde: [to_vec(&t1), to_vec(&t3)],
            t: linalg::to_rows(&c.t),
            positive_definite: c.eigenvalues[0] > 0.0,
            t_eigenvalues: c.eigenvalues,
            z_bar: to_vec(&c.z_bar),
            z_bar_tilde: to_vec(&c.z_bar_tilde),
            s_asymmetry: linalg::asymmetry(&s),
            s: linalg::to_rows(&s),
        });
    }

    let bilinear = match check.bilinear_matrix()? {
        Some(a) => {
            let bil = Surplus::Bilinear(BilinearSurplus::new(a.clone())?);
            let zero = Vector::zeros(a.nrows());
            let s = symmetry_product(&bil, &zero, &zero, &zero)?;
            let hedonic = match check_conditions(&bil, &spec) {
                Err(e) => e.to_string(),
                Ok(_) => "accepted".into(),
            };
            Some(json!({
                "s": linalg::to_rows(&s),
                "s_minus_a_frobenius": linalg::frobenius(&(s - &a)),
                "s_asymmetry": linalg::asymmetry(&a),
                "hedonic_form": hedonic,
            }))
        }
        None => None,
    };

    let out = json!({
        "oracle": OracleSpec::from(&oracle),
        "hypotheses_hold": report.hypotheses_hold(),
        "conditions": report,
        "probes": probes,
        "bilinear": bilinear,
    });
    dir.json("conditions.json", &out)?;
    Ok(Outcome::ok(json!({
        "hypotheses_hold": out["hypotheses_hold"],
        "checks": out["conditions"]["checks"]
            .as_array()
            .map(|cs| cs.iter().map(|c| json!({ "name": c["name"], "passed": c["passed"], "margin": c["margin"] })).collect::<Vec<_>>()),
        "probes": out["probes"].as_array().map(|p| p.len()),
    })))
}

fn paper_repro(manifest: &RunManifest, dir: &mut RunDir) -> Result<Outcome> {
    let seed = if manifest.seed == 0 { repro::DEFAULT_SEED } else { manifest.seed };
    let reports = repro::run_all(seed);
    dir.json("repro.json", &reports)?;
    let table = repro::render_table(&reports);
    std::fs::write(dir.file("repro.txt"), &table)?;
    eprint!("{table}");
    let passed = reports.iter().all(|r| r.passed);
    Ok(Outcome::checked(
        passed,
        json!({
            "seed": seed,
            "cases": reports.iter().map(|r| json!({ "case": r.case, "passed": r.passed })).collect::<Vec<_>>(),
        }),
    ))
}

fn gen_instance(args: &GenArgs, manifest: &RunManifest, dir: &mut RunDir) -> Result<Outcome> {
    let spec = match &manifest.instance {
        Some(inst) => inst.clone(),
        None => InstanceSpec {
            m: args.m,
            n: args.n,
            atoms: args.atoms,
            lo: args.lo,
            hi: args.hi,
            weights: if args.random_weights { WeightScheme::Random } else { WeightScheme::Uniform },
            seed: manifest.seed,
            oracle: (args.oracle == GenOracle::Brenier).then(|| OracleSpec::brenier(args.m)),
        },
    };
    spec.validate()?;
    let problem = generate_instance(&spec)?.with_settings(manifest.settings.clone())?;
    let mut generated = RunManifest {
        seed: spec.seed,
        instance: Some(spec.clone()),
        settings: manifest.settings.clone(),
        ..RunManifest::default()
    };
    generated = generated.resolved(&problem);
    dir.json("manifest.json", &generated)?;
    dir.json("instance.json", &spec)?;
    Ok(Outcome::ok(json!({
        "manifest": dir.root().join("manifest.json"),
        "sizes": problem.sizes(),
        "variables": problem.sizes().iter().product::<usize>(),
        "seed": spec.seed,
    })))
}
