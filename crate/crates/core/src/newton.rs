//! Damped Newton ascent for smooth, locally concave objectives.

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector};

/// A twice differentiable objective to be maximized.
pub trait SmoothObjective {
    fn value(&self, z: &Vector) -> f64;
    fn gradient(&self, z: &Vector) -> Vector;
    fn hessian(&self, z: &Vector) -> Matrix;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSettings {
    pub max_iters: usize,
    /// Accept a point once the gradient norm is at most this.
    pub grad_tol: f64,
    /// Multistart runs must agree within this distance.
    pub uniqueness_tol: f64,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            grad_tol: 1e-10,
            uniqueness_tol: 1e-7,
            armijo: 1e-4,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonRun {
    pub z: Vector,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Ascent direction: Newton when `-H` is positive definite, gradient otherwise.
fn direction(hess: &Matrix, grad: &Vector) -> Vector {
    let neg = -hess;
    match neg.cholesky() {
        Some(ch) => ch.solve(grad),
        None => grad.clone(),
    }
}

/// Maximizes `obj` from `start` with backtracking (Armijo) line search.
///
/// Near the optimum the objective change drops below rounding noise; a step
/// is then accepted if it reduces the gradient norm instead.
pub fn maximize<O: SmoothObjective + ?Sized>(
    obj: &O,
    start: &Vector,
    settings: &NewtonSettings,
) -> NewtonRun {
    let mut z = start.clone();
    let mut f = obj.value(&z);
    let mut g = obj.gradient(&z);
    let mut gn = g.norm();
    let mut iterations = 0;

    while iterations < settings.max_iters {
        if !f.is_finite() || !gn.is_finite() {
            break;
        }
        if gn <= settings.grad_tol {
            return NewtonRun {
                z,
                value: f,
                grad_norm: gn,
                iterations,
                converged: true,
            };
        }
        iterations += 1;
        let d = direction(&obj.hessian(&z), &g);
        let slope = g.dot(&d);
        let noise = 1e-14 * (1.0 + f.abs());

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let cand = &z + &d * alpha;
            let fc = obj.value(&cand);
            if fc.is_finite() {
                if fc >= f + settings.armijo * alpha * slope {
                    accepted = Some((cand, fc));
                    break;
                }
                if (fc - f).abs() <= noise {
                    let gc = obj.gradient(&cand);
                    if gc.norm() < gn {
                        accepted = Some((cand, fc));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                z = cand;
                f = fc;
                g = obj.gradient(&z);
                gn = g.norm();
            }
            None => break,
        }
    }

    NewtonRun {
        converged: gn <= settings.grad_tol,
        z,
        value: f,
        grad_norm: gn,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct NegSqrt;

    impl SmoothObjective for NegSqrt {
        fn value(&self, z: &Vector) -> f64 {
            -(1.0 + z.norm_squared()).sqrt()
        }
        fn gradient(&self, z: &Vector) -> Vector {
            -z / (1.0 + z.norm_squared()).sqrt()
        }
        fn hessian(&self, z: &Vector) -> Matrix {
            let s2 = 1.0 + z.norm_squared();
            let s = s2.sqrt();
            (z * z.transpose() / s2 - Matrix::identity(z.len(), z.len())) / s
        }
    }

    #[test]
    fn converges_from_far_start_despite_flat_curvature() {
        let run = maximize(
            &NegSqrt,
            &Vector::from_vec(vec![30.0, -12.0]),
            &NewtonSettings::default(),
        );
        assert!(run.converged, "{run:?}");
        assert!(run.z.norm() < 1e-9);
    }

    struct Saddle;

    impl SmoothObjective for Saddle {
        fn value(&self, z: &Vector) -> f64 {
            z[0] * z[0] - z[1] * z[1]
        }
        fn gradient(&self, z: &Vector) -> Vector {
            Vector::from_vec(vec![2.0 * z[0], -2.0 * z[1]])
        }
        fn hessian(&self, _z: &Vector) -> Matrix {
            Matrix::from_diagonal(&Vector::from_vec(vec![2.0, -2.0]))
        }
    }

    #[test]
    fn unbounded_objective_does_not_converge() {
        let run = maximize(
            &Saddle,
            &Vector::from_vec(vec![1.0, 1.0]),
            &NewtonSettings::default(),
        );
        assert!(!run.converged);
    }
}
