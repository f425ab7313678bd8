//! Fixed-step time integration with trajectory recording.
//!
//! Four steppers cover the systems in this crate: classical RK4 for generic
//! first-order fields, Störmer–Verlet for separable cotangent Hamiltonians,
//! RATTLE for a single holonomic constraint, and implicit midpoint for flows
//! whose quadratic invariants should survive long integrations. Steps are
//! fixed; there is no adaptivity, so repeated runs produce bit-identical
//! trajectories and drift statistics are reproducible.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::IntegrateError;
use crate::poisson::{ham_vector_field, LieAlgebra, PoissonStructure, SmoothFunction};

/// Integration method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Verlet,
    Rattle,
    Midpoint,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::Verlet => "verlet",
            Method::Rattle => "rattle",
            Method::Midpoint => "midpoint",
        }
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "verlet" => Ok(Method::Verlet),
            "rattle" => Ok(Method::Rattle),
            "midpoint" => Ok(Method::Midpoint),
            other => Err(format!(
                "unknown method '{other}' (expected rk4, verlet, rattle or midpoint)"
            )),
        }
    }
}

/// Step size, horizon and solver knobs for a run.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    pub record_stride: usize,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl IntegratorConfig {
    pub fn new(method: Method, dt: f64, t_end: f64) -> Self {
        IntegratorConfig {
            method,
            dt,
            t_end,
            record_stride: 1,
            solver_tol: 1e-12,
            solver_max_iter: 50,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(IntegrateError::BadConfig(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= self.dt) {
            return Err(IntegrateError::BadConfig(format!(
                "t_end ({}) must be at least one step dt ({})",
                self.t_end, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(IntegrateError::BadConfig(
                "record_stride must be at least 1".into(),
            ));
        }
        if !(self.solver_tol > 0.0) {
            return Err(IntegrateError::BadConfig(
                "solver_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Time-stamped states plus recorded named observables.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    observables: Vec<(String, Vec<f64>)>,
}

impl Trajectory {
    pub fn with_observables(names: &[String]) -> Self {
        Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            observables: names.iter().map(|n| (n.clone(), Vec::new())).collect(),
        }
    }

    /// Appends a sample; times must arrive strictly increasing and the
    /// observable row must match the declared names.
    pub fn record(&mut self, t: f64, state: Vec<f64>, obs_row: &[f64]) {
        if let Some(last) = self.times.last() {
            assert!(t > *last, "record times must be strictly increasing");
        }
        assert_eq!(obs_row.len(), self.observables.len());
        self.times.push(t);
        self.states.push(state);
        for (series, v) in self.observables.iter_mut().zip(obs_row) {
            series.1.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    pub fn observable_names(&self) -> Vec<&str> {
        self.observables.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_slice())
    }
}

fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// One classical fourth-order Runge–Kutta step of `dx/dt = f(x)`.
pub fn rk4_step(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    dt: f64,
) -> Result<Vec<f64>, IntegrateError> {
    let n = x.len();
    let add_scaled = |base: &[f64], v: &[f64], a: f64| -> Vec<f64> {
        base.iter().zip(v).map(|(b, w)| b + a * w).collect()
    };
    let k1 = f(x);
    let k2 = f(&add_scaled(x, &k1, 0.5 * dt));
    let k3 = f(&add_scaled(x, &k2, 0.5 * dt));
    let k4 = f(&add_scaled(x, &k3, dt));
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    if !all_finite(&out) {
        return Err(IntegrateError::NonFinite { time: f64::NAN });
    }
    Ok(out)
}

/// One kick–drift–kick Störmer–Verlet step for `H = ‖p‖²/2m + V(q)`.
pub fn verlet_step(
    grad_v: &dyn Fn(&[f64]) -> Vec<f64>,
    mass: f64,
    q: &[f64],
    p: &[f64],
    dt: f64,
) -> (Vec<f64>, Vec<f64>) {
    let gv = grad_v(q);
    let p_half: Vec<f64> = p.iter().zip(&gv).map(|(pi, g)| pi - 0.5 * dt * g).collect();
    let q_new: Vec<f64> = q
        .iter()
        .zip(&p_half)
        .map(|(qi, ph)| qi + dt / mass * ph)
        .collect();
    let gv2 = grad_v(&q_new);
    let p_new: Vec<f64> = p_half
        .iter()
        .zip(&gv2)
        .map(|(ph, g)| ph - 0.5 * dt * g)
        .collect();
    (q_new, p_new)
}

/// A single holonomic constraint `g(q) = 0` with its gradient and the
/// quadratic form of its Hessian, `(q, v) ↦ vᵀ ∇²g(q) v` (needed when the
/// constrained flow is driven through an unconstrained stepper).
#[derive(Clone)]
pub struct ConstraintSpec {
    pub g: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub grad: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub hess_quad: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl ConstraintSpec {
    /// The sphere `‖q‖² − R² = 0`.
    pub fn sphere(radius: f64) -> Self {
        let r2 = radius * radius;
        ConstraintSpec {
            g: Arc::new(move |q| q.iter().map(|v| v * v).sum::<f64>() - r2),
            grad: Arc::new(|q| q.iter().map(|v| 2.0 * v).collect()),
            hess_quad: Arc::new(|_q, v| 2.0 * v.iter().map(|a| a * a).sum::<f64>()),
        }
    }
}

/// One RATTLE step for `H = ‖p‖²/2m + V(q)` restricted to `g(q) = 0`.
///
/// The position-stage multiplier is solved by scalar Newton iteration (for a
/// quadratic constraint this converges to solver tolerance in a few steps),
/// the momentum-stage multiplier in closed form. The caller must supply a
/// state already satisfying `g(q) = 0` and `∇g(q)·p = 0`.
#[allow(clippy::too_many_arguments)]
pub fn rattle_step(
    grad_v: &dyn Fn(&[f64]) -> Vec<f64>,
    mass: f64,
    constraint: &ConstraintSpec,
    q: &[f64],
    p: &[f64],
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<f64>), IntegrateError> {
    let gq = (constraint.grad)(q);
    let gv = grad_v(q);
    // Unconstrained half-kick plus drift; lambda removes the violation.
    let q_free: Vec<f64> = (0..q.len())
        .map(|i| q[i] + dt / mass * (p[i] - 0.5 * dt * gv[i]))
        .collect();
    let scale = dt * dt / (2.0 * mass);

    let mut lambda = 0.0;
    let mut q_new = q_free.clone();
    let mut converged = false;
    for _ in 0..max_iter {
        q_new = (0..q.len())
            .map(|i| q_free[i] - scale * lambda * gq[i])
            .collect();
        let residual = (constraint.g)(&q_new);
        if residual.abs() <= tol {
            converged = true;
            break;
        }
        let gq_new = (constraint.grad)(&q_new);
        let slope: f64 = -scale * gq_new.iter().zip(&gq).map(|(a, b)| a * b).sum::<f64>();
        if slope == 0.0 || !slope.is_finite() {
            return Err(IntegrateError::SolverDiverged {
                solver: "rattle position stage",
                iterations: max_iter,
                time: f64::NAN,
            });
        }
        lambda -= residual / slope;
    }
    if !converged {
        return Err(IntegrateError::SolverDiverged {
            solver: "rattle position stage",
            iterations: max_iter,
            time: f64::NAN,
        });
    }

    let p_half: Vec<f64> = (0..p.len())
        .map(|i| p[i] - 0.5 * dt * (gv[i] + lambda * gq[i]))
        .collect();

    // Momentum stage: project onto the hidden constraint, linear in mu.
    let gv2 = grad_v(&q_new);
    let gq2 = (constraint.grad)(&q_new);
    let num: f64 = (0..p.len())
        .map(|i| gq2[i] * (p_half[i] - 0.5 * dt * gv2[i]))
        .sum();
    let den: f64 = 0.5 * dt * gq2.iter().map(|a| a * a).sum::<f64>();
    let mu = num / den;
    let p_new: Vec<f64> = (0..p.len())
        .map(|i| p_half[i] - 0.5 * dt * (gv2[i] + mu * gq2[i]))
        .collect();

    if !all_finite(&q_new) || !all_finite(&p_new) {
        return Err(IntegrateError::NonFinite { time: f64::NAN });
    }
    Ok((q_new, p_new))
}

/// One implicit midpoint step `x⁺ = x + dt·f((x + x⁺)/2)`.
///
/// Fixed-point iteration with unit damping; if half the iteration budget is
/// spent without convergence the solve falls back to a Newton iteration with
/// a finite-difference Jacobian.
pub fn midpoint_step(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, IntegrateError> {
    let n = x.len();
    let eval = |y: &[f64]| -> Vec<f64> {
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
        let fm = f(&mid);
        (0..n).map(|i| x[i] + dt * fm[i]).collect()
    };

    // Explicit Euler predictor.
    let f0 = f(x);
    let mut y: Vec<f64> = (0..n).map(|i| x[i] + dt * f0[i]).collect();

    let fp_budget = (max_iter / 2).max(1);
    for _ in 0..fp_budget {
        let y_next = eval(&y);
        if !all_finite(&y_next) {
            return Err(IntegrateError::NonFinite { time: f64::NAN });
        }
        let delta: f64 = y
            .iter()
            .zip(&y_next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        y = y_next;
        if delta <= tol {
            return Ok(y);
        }
    }

    // Newton fallback on G(y) = y − x − dt·f((x+y)/2).
    for _ in 0..(max_iter - fp_budget) {
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let fm = f(&mid);
        let gval: Vec<f64> = (0..n).map(|i| y[i] - x[i] - dt * fm[i]).collect();
        let gnorm = gval.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= tol {
            return Ok(y);
        }
        let mut jac = DMatrix::<f64>::identity(n, n);
        let h = 1e-7;
        for j in 0..n {
            let mut yp = y.clone();
            yp[j] += h;
            let midp: Vec<f64> = x.iter().zip(&yp).map(|(a, b)| 0.5 * (a + b)).collect();
            let fp = f(&midp);
            for i in 0..n {
                jac[(i, j)] -= dt * (fp[i] - fm[i]) / h;
            }
        }
        let rhs = DVector::from_vec(gval);
        match jac.lu().solve(&rhs) {
            Some(step) => {
                for i in 0..n {
                    y[i] -= step[i];
                }
            }
            None => {
                return Err(IntegrateError::SolverDiverged {
                    solver: "midpoint newton",
                    iterations: max_iter,
                    time: f64::NAN,
                })
            }
        }
        if !all_finite(&y) {
            return Err(IntegrateError::NonFinite { time: f64::NAN });
        }
    }
    let final_res: f64 = {
        let y_next = eval(&y);
        y.iter()
            .zip(&y_next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    if final_res <= tol {
        Ok(y)
    } else {
        Err(IntegrateError::SolverDiverged {
            solver: "midpoint",
            iterations: max_iter,
            time: f64::NAN,
        })
    }
}

/// Implicit midpoint on the linear Poisson structure of the dual of `alg`.
///
/// The scheme preserves quadratic Casimirs (such as `‖μ‖²` on the dual of the
/// rotation algebra) to solver tolerance.
pub fn midpoint_lie_poisson_step(
    alg: &LieAlgebra,
    h: &SmoothFunction,
    mu: &[f64],
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, IntegrateError> {
    let structure = PoissonStructure::lie_poisson(alg.clone(), None);
    let field = move |m: &[f64]| ham_vector_field(&structure, h, m);
    midpoint_step(&field, mu, dt, tol, max_iter)
}

/// What the steppers need to know about a system's dynamics.
#[derive(Clone)]
pub enum SystemDynamics {
    /// A bare first-order field `dx/dt = f(x)`.
    FirstOrder {
        field: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    },
    /// Separable cotangent system, state `[q | p]`, `H = ‖p‖²/2m + V(q)`.
    Separable {
        mass: f64,
        grad_v: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    },
    /// Separable system restricted to one holonomic constraint.
    Constrained {
        mass: f64,
        grad_v: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
        constraint: ConstraintSpec,
    },
}

impl SystemDynamics {
    /// The equivalent first-order field on the full state, used by RK4 and
    /// implicit midpoint. For a constrained system the constraint force is
    /// eliminated through the hidden constraint.
    pub fn as_field(&self) -> Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync> {
        match self {
            SystemDynamics::FirstOrder { field } => field.clone(),
            SystemDynamics::Separable { mass, grad_v } => {
                let (m, gv) = (*mass, grad_v.clone());
                Arc::new(move |state: &[f64]| {
                    let n = state.len() / 2;
                    let (q, p) = state.split_at(n);
                    let g = gv(q);
                    let mut out = Vec::with_capacity(2 * n);
                    out.extend(p.iter().map(|pi| pi / m));
                    out.extend(g.iter().map(|gi| -gi));
                    out
                })
            }
            SystemDynamics::Constrained {
                mass,
                grad_v,
                constraint,
            } => {
                let (m, gv, c) = (*mass, grad_v.clone(), constraint.clone());
                Arc::new(move |state: &[f64]| {
                    let n = state.len() / 2;
                    let (q, p) = state.split_at(n);
                    let g = gv(q);
                    let gq = (c.grad)(q);
                    let qdot: Vec<f64> = p.iter().map(|pi| pi / m).collect();
                    let hq = (c.hess_quad)(q, &qdot);
                    let gg: f64 = gq.iter().map(|a| a * a).sum();
                    let lambda =
                        (gq.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() - m * hq) / gg;
                    let mut out = Vec::with_capacity(2 * n);
                    out.extend(qdot.iter().copied());
                    out.extend((0..n).map(|i| -g[i] + lambda * gq[i]));
                    out
                })
            }
        }
    }
}

/// An integration that stopped early; the partial trajectory is retained.
#[derive(Debug)]
pub struct IntegrationFailure {
    pub error: IntegrateError,
    pub partial: Trajectory,
}

/// Named observable evaluated on recorded states.
pub type Observable = (String, Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

/// Advances the system from `x0` with the configured method, recording every
/// `record_stride` steps (plus the final state). Observables are evaluated on
/// recorded states only.
pub fn integrate(
    dynamics: &SystemDynamics,
    x0: &[f64],
    config: &IntegratorConfig,
    observables: &[Observable],
) -> Result<Trajectory, Box<IntegrationFailure>> {
    let fail = |error: IntegrateError, partial: Trajectory| {
        Err(Box::new(IntegrationFailure { error, partial }))
    };
    let names: Vec<String> = observables.iter().map(|(n, _)| n.clone()).collect();
    let mut traj = Trajectory::with_observables(&names);
    if let Err(e) = config.validate() {
        return fail(e, traj);
    }

    match (&config.method, dynamics) {
        (Method::Verlet, SystemDynamics::Separable { .. }) => {}
        (Method::Verlet, _) => {
            return fail(
                IntegrateError::MethodMismatch {
                    method: "verlet",
                    reason: "requires a separable cotangent system".into(),
                },
                traj,
            )
        }
        (Method::Rattle, SystemDynamics::Constrained { .. }) => {}
        (Method::Rattle, _) => {
            return fail(
                IntegrateError::MethodMismatch {
                    method: "rattle",
                    reason: "requires a constrained system".into(),
                },
                traj,
            )
        }
        _ => {}
    }

    // Constrained systems must start on the constraint and its hidden part.
    if let SystemDynamics::Constrained {
        mass, constraint, ..
    } = dynamics
    {
        let n = x0.len() / 2;
        let (q, p) = x0.split_at(n);
        let gres = ((constraint.g)(q)).abs();
        let gq = (constraint.grad)(q);
        let hres = gq.iter().zip(p).map(|(a, b)| a * b / mass).sum::<f64>().abs();
        let tol = config.solver_tol.max(1e-9);
        if gres > tol || hres > tol {
            return fail(
                IntegrateError::ConstraintViolated {
                    residual: gres.max(hres),
                    tolerance: tol,
                },
                traj,
            );
        }
    }

    let n_steps = ((config.t_end / config.dt).round() as usize).max(1);
    let field = dynamics.as_field();

    let eval_obs =
        |state: &[f64]| -> Vec<f64> { observables.iter().map(|(_, f)| f(state)).collect() };

    let mut state = x0.to_vec();
    let row = eval_obs(&state);
    traj.record(0.0, state.clone(), &row);

    for k in 1..=n_steps {
        let t_prev = (k - 1) as f64 * config.dt;
        let stepped: Result<Vec<f64>, IntegrateError> = match config.method {
            Method::Rk4 => rk4_step(field.as_ref(), &state, config.dt),
            Method::Midpoint => midpoint_step(
                field.as_ref(),
                &state,
                config.dt,
                config.solver_tol,
                config.solver_max_iter,
            ),
            Method::Verlet => {
                if let SystemDynamics::Separable { mass, grad_v } = dynamics {
                    let half = state.len() / 2;
                    let (q, p) = state.split_at(half);
                    let (q2, p2) = verlet_step(grad_v.as_ref(), *mass, q, p, config.dt);
                    let mut s = q2;
                    s.extend(p2);
                    Ok(s)
                } else {
                    unreachable!("checked above")
                }
            }
            Method::Rattle => {
                if let SystemDynamics::Constrained {
                    mass,
                    grad_v,
                    constraint,
                } = dynamics
                {
                    let half = state.len() / 2;
                    let (q, p) = state.split_at(half);
                    rattle_step(
                        grad_v.as_ref(),
                        *mass,
                        constraint,
                        q,
                        p,
                        config.dt,
                        config.solver_tol,
                        config.solver_max_iter,
                    )
                    .map(|(q2, p2)| {
                        let mut s = q2;
                        s.extend(p2);
                        s
                    })
                } else {
                    unreachable!("checked above")
                }
            }
        };

        state = match stepped {
            Ok(s) => s,
            Err(e) => {
                let e = match e {
                    IntegrateError::NonFinite { .. } => IntegrateError::NonFinite { time: t_prev },
                    IntegrateError::SolverDiverged {
                        solver, iterations, ..
                    } => IntegrateError::SolverDiverged {
                        solver,
                        iterations,
                        time: t_prev,
                    },
                    other => other,
                };
                return fail(e, traj);
            }
        };
        if !all_finite(&state) {
            return fail(
                IntegrateError::NonFinite {
                    time: k as f64 * config.dt,
                },
                traj,
            );
        }
        if k % config.record_stride == 0 || k == n_steps {
            let row = eval_obs(&state);
            traj.record(k as f64 * config.dt, state.clone(), &row);
        }
    }

    Ok(traj)
}
