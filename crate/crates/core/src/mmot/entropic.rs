use crate::error::{Error, Result};
use crate::measures::Problem;

use super::{Coupling, CouplingEntry, SolverMeta, SurplusTable};

/// Below this ε the solver works with log-potentials from the start.
pub const LOG_DOMAIN_EPS: f64 = 1e-2;

const PRUNE: f64 = 1e-14;
const ANNEAL_FACTOR: f64 = 0.5;
const ANNEAL_TOL: f64 = 1e-6;

/// Entropically regularized multi-marginal transport by iterative
/// proportional scaling, with reference measure `μ₁ ⊗ … ⊗ μ_m`.
pub fn solve_mk_entropic(problem: &Problem, eps: f64) -> Result<Coupling> {
    let table = SurplusTable::compute(problem)?;
    solve_mk_entropic_with_table(problem, &table, eps)
}

pub fn solve_mk_entropic_with_table(problem: &Problem, table: &SurplusTable, eps: f64) -> Result<Coupling> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("entropic epsilon must be positive, got {eps}")));
    }
    let mut state = State::new(problem, table);
    let settings = problem.settings();
    let tol = settings.entropic_tol;
    let max_iters = settings.entropic_max_iters;

    let mut log_domain = eps < LOG_DOMAIN_EPS;
    let mut outcome = None;
    if !log_domain {
        match state.run_scaling(eps, tol, max_iters)? {
            Some(run) => outcome = Some(run),
            None => {
                log::info!("scaling factors underflowed at eps = {eps:e}; switching to log domain");
                log_domain = true;
                state.reset();
            }
        }
    }
    let (iterations, violation) = match outcome {
        Some(run) => run,
        None => {
            // Warm start through a geometric sequence of larger ε values.
            let mut total = 0;
            let range = state.b_range().max(eps);
            let mut levels = Vec::new();
            let mut e = range;
            while e > eps {
                levels.push(e);
                e *= ANNEAL_FACTOR;
            }
            for level in levels {
                let (it, _) = state.run_log(level, ANNEAL_TOL.max(tol), max_iters.saturating_sub(total).max(1))?;
                total += it;
            }
            let (it, viol) = state.run_log(eps, tol, max_iters.saturating_sub(total).max(1))?;
            (total + it, viol)
        }
    };
    if violation > tol {
        return Err(Error::EntropicNotConverged {
            iterations,
            violation,
        });
    }

    let plan = state.plan(eps);
    let mut objective = 0.0;
    let mut kl = 0.0;
    for (t, &p) in plan.iter().enumerate() {
        if p > 0.0 {
            objective += p * state.b[t];
            kl += p * (p.ln() - state.log_ref[t]);
        }
    }
    let ix = table.indexer();
    let entries: Vec<CouplingEntry> = plan
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= PRUNE)
        .map(|(t, &p)| CouplingEntry {
            idx: ix.unflat(t),
            mass: p,
        })
        .collect();
    let meta = SolverMeta {
        method: "entropic".into(),
        iterations: Some(iterations),
        epsilon: Some(eps),
        regularized_objective: Some(objective - eps * kl),
        log_domain: Some(log_domain),
        marginal_violation: Some(violation),
        ..SolverMeta::default()
    };
    let slack = 10.0 * tol + PRUNE * plan.len() as f64;
    let coupling = Coupling::new(problem.marginals_arc(), entries, 0.0, meta, slack)?;
    let objective = coupling
        .entries()
        .iter()
        .map(|e| e.mass * table.value(&e.idx))
        .sum();
    log::debug!("entropic solve: eps {eps:e}, {iterations} sweeps, objective {objective}");
    Ok(Coupling { objective, ..coupling })
}

struct State {
    b: Vec<f64>,
    idx: Vec<Vec<usize>>,
    log_mu: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
    /// `Σ_j log μ_j(t_j)`.
    log_ref: Vec<f64>,
    /// Potentials `φ_i`; the plan is `exp((b + Σ φ_i)/ε) ⊗μ`.
    phi: Vec<Vec<f64>>,
}

impl State {
    fn new(problem: &Problem, table: &SurplusTable) -> Self {
        let ix = table.indexer();
        let mu: Vec<Vec<f64>> = problem.marginals().iter().map(|m| m.weights().to_vec()).collect();
        let log_mu: Vec<Vec<f64>> = mu.iter().map(|w| w.iter().map(|x| x.ln()).collect()).collect();
        let idx: Vec<Vec<usize>> = (0..ix.total()).map(|t| ix.unflat(t)).collect();
        let log_ref = idx
            .iter()
            .map(|k| k.iter().enumerate().map(|(i, &ki)| log_mu[i][ki]).sum())
            .collect();
        let phi = mu.iter().map(|w| vec![0.0; w.len()]).collect();
        Self {
            b: table.values().to_vec(),
            idx,
            log_mu,
            mu,
            log_ref,
            phi,
        }
    }

    fn reset(&mut self) {
        for p in &mut self.phi {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn b_range(&self) -> f64 {
        let lo = self.b.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    fn log_plan(&self, t: usize, eps: f64) -> f64 {
        let k = &self.idx[t];
        let s: f64 = k.iter().enumerate().map(|(i, &ki)| self.phi[i][ki]).sum();
        (self.b[t] + s) / eps + self.log_ref[t]
    }

    fn plan(&self, eps: f64) -> Vec<f64> {
        (0..self.b.len()).map(|t| self.log_plan(t, eps).exp()).collect()
    }

    fn violation(&self, plan: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, mu) in self.mu.iter().enumerate() {
            let mut marg = vec![0.0; mu.len()];
            for (t, &p) in plan.iter().enumerate() {
                marg[self.idx[t][i]] += p;
            }
            for (a, b) in marg.iter().zip(mu) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    /// Log-domain sweeps; returns (sweeps, final violation).
    fn run_log(&mut self, eps: f64, tol: f64, max_iters: usize) -> Result<(usize, f64)> {
        let n = self.b.len();
        let mut s = vec![0.0; n];
        let mut viol = f64::INFINITY;
        for sweep in 1..=max_iters {
            for i in 0..self.mu.len() {
                let len = self.mu[i].len();
                let mut mx = vec![f64::NEG_INFINITY; len];
                for t in 0..n {
                    let k = self.idx[t][i];
                    s[t] = self.log_plan(t, eps) - self.phi[i][k] / eps - self.log_mu[i][k];
                    mx[k] = mx[k].max(s[t]);
                }
                let mut acc = vec![0.0; len];
                for t in 0..n {
                    let k = self.idx[t][i];
                    acc[k] += (s[t] - mx[k]).exp();
                }
                for k in 0..len {
                    self.phi[i][k] = -eps * (mx[k] + acc[k].ln());
                }
            }
            viol = self.violation(&self.plan(eps));
            if !viol.is_finite() {
                return Err(Error::Internal(format!("log-domain scaling produced {viol} at eps {eps:e}")));
            }
            if viol <= tol {
                return Ok((sweep, viol));
            }
        }
        Ok((max_iters, viol))
    }

    /// Scaling-domain sweeps on the kernel `exp((b - max b)/ε)`. Returns
    /// `None` when a kernel entry or scaling factor under- or overflows.
    fn run_scaling(&mut self, eps: f64, tol: f64, max_iters: usize) -> Result<Option<(usize, f64)>> {
        let bmax = self.b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let kernel: Vec<f64> = self
            .b
            .iter()
            .zip(&self.log_ref)
            .map(|(b, r)| ((b - bmax) / eps + r).exp())
            .collect();
        if kernel.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
            return Ok(None);
        }
        let mut u: Vec<Vec<f64>> = self.mu.iter().map(|w| vec![1.0; w.len()]).collect();
        let n = kernel.len();
        let plan = |u: &[Vec<f64>]| -> Vec<f64> {
            (0..n)
                .map(|t| kernel[t] * self.idx[t].iter().enumerate().map(|(i, &k)| u[i][k]).product::<f64>())
                .collect()
        };
        let mut viol = f64::INFINITY;
        let mut sweeps = max_iters;
        for sweep in 1..=max_iters {
            for i in 0..u.len() {
                let mut acc = vec![0.0; u[i].len()];
                for t in 0..n {
                    let k = self.idx[t][i];
                    let others: f64 = self.idx[t]
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(j, &kj)| u[j][kj])
                        .product();
                    acc[k] += kernel[t] * others;
                }
                for (k, a) in acc.iter().enumerate() {
                    let v = self.mu[i][k] / a;
                    if !(v > 0.0) || !v.is_finite() {
                        return Ok(None);
                    }
                    u[i][k] = v;
                }
            }
            viol = self.violation(&plan(&u));
            if !viol.is_finite() {
                return Ok(None);
            }
            if viol <= tol {
                sweeps = sweep;
                break;
            }
        }
        // Carry the result over as potentials: φ_i = ε log u_i, with the
        // shift by max b absorbed into the first potential.
        for (i, ui) in u.iter().enumerate() {
            for (k, v) in ui.iter().enumerate() {
                self.phi[i][k] = eps * v.ln() - if i == 0 { bmax } else { 0.0 };
            }
        }
        Ok(Some((sweeps, viol)))
    }
}
