//! Box- and equality-constrained minimization without derivatives.
//!
//! Equality constraints `c(x) = 0` are handled by an augmented Lagrangian
//!
//! ```text
//! L(x; λ, μ) = f(x) + Σ λᵢ cᵢ(x) + μ/2 Σ cᵢ(x)²
//! ```
//!
//! whose subproblems are minimized by Nelder–Mead with every trial vertex
//! projected onto the box. After each subproblem `λ ← λ + μ c` and
//! `μ ← growth · μ`.

use alloc::vec;
use alloc::vec::Vec;

use crate::integrator::{integrate, IntegratorOptions, TimeGrid, Trajectory};
use crate::problem::{Bounds, ProblemDef};
use crate::surrogate::Surrogate;
use crate::timing::Stopwatch;
use crate::{Error, Result};

/// Objective and equality-constraint values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub eq: Vec<f64>,
}

impl Evaluation {
    pub fn unconstrained(objective: f64) -> Self {
        Self {
            objective,
            eq: Vec::new(),
        }
    }

    fn is_finite(&self) -> bool {
        self.objective.is_finite() && self.eq.iter().all(|c| c.is_finite())
    }

    fn violation(&self) -> f64 {
        self.eq.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NlpOptions {
    /// Budget of objective evaluations over all subproblems.
    pub max_evals: usize,
    /// Largest accepted `max |cᵢ|` at a converged point.
    pub constraint_tol: f64,
    /// Simplex size, relative to the box widths, below which a subproblem
    /// is considered solved.
    pub step_tol: f64,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_outer: usize,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            constraint_tol: 5e-3,
            step_tol: 1e-8,
            initial_penalty: 10.0,
            penalty_growth: 5.0,
            max_outer: 8,
        }
    }
}

impl NlpOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.max_evals == 0 {
            return bad("max_evals must be positive");
        }
        if !(self.constraint_tol > 0.0) {
            return bad("constraint_tol must be positive");
        }
        if !(self.step_tol > 0.0) {
            return bad("step_tol must be positive");
        }
        if !(self.initial_penalty > 0.0) || !(self.penalty_growth >= 1.0) {
            return bad("penalty must start positive and grow by a factor >= 1");
        }
        if self.max_outer == 0 {
            return bad("max_outer must be positive");
        }
        Ok(())
    }
}

/// A nonlinear program: `problem` returns objective and equality values.
pub struct NlpSpec<F> {
    pub problem: F,
    pub bounds: Bounds,
    /// Start point, projected onto the box if outside.
    pub x0: Vec<f64>,
    pub options: NlpOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Termination {
    Converged,
    MaxEvals,
    MaxOuterIterations,
}

/// State after one augmented-Lagrangian subproblem.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OuterIteration {
    pub penalty: f64,
    pub objective: f64,
    pub constraint_violation: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptResult {
    pub b_star: Vec<f64>,
    pub f_star: f64,
    pub eq_values: Vec<f64>,
    /// `max |cᵢ(b_star)|`.
    pub constraint_violation: f64,
    pub evals: usize,
    pub converged: bool,
    pub termination: Termination,
    pub wall_time: f64,
    pub history: Vec<OuterIteration>,
}

struct Tracker<'a, F> {
    problem: &'a mut F,
    lambda: &'a [f64],
    mu: f64,
    n_eq: usize,
    evals: &'a mut usize,
    max_evals: usize,
    best: (Vec<f64>, Evaluation, f64),
}

impl<F> Tracker<'_, F>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    fn merit(&self, e: &Evaluation) -> f64 {
        let mut value = e.objective;
        for (c, l) in e.eq.iter().zip(self.lambda) {
            value += l * c + 0.5 * self.mu * c * c;
        }
        value
    }

    /// `None` once the evaluation budget is spent.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if *self.evals >= self.max_evals {
            return None;
        }
        *self.evals += 1;
        let value = match (self.problem)(x) {
            Ok(e) if e.is_finite() && e.eq.len() == self.n_eq => {
                let v = self.merit(&e);
                if v < self.best.2 {
                    self.best = (x.to_vec(), e, v);
                }
                v
            }
            Ok(_) => f64::INFINITY,
            Err(err) => {
                log::debug!("objective failed at {x:?}: {err}");
                f64::INFINITY
            }
        };
        Some(value)
    }
}

struct Simplex<'a> {
    bounds: &'a Bounds,
    widths: &'a [f64],
    free: &'a [usize],
    step_tol: f64,
}

impl Simplex<'_> {
    fn trial(&self, centroid: &[f64], towards: &[f64], coeff: f64) -> Vec<f64> {
        centroid
            .iter()
            .zip(towards)
            .map(|(c, t)| c + coeff * (t - c))
            .collect()
    }

    /// Value at the projection of `x` plus a penalty on the distance to the
    /// box, so vertices may leave the box without the simplex flattening
    /// against a face.
    fn value(&self, f: &mut impl FnMut(&[f64]) -> Option<f64>, x: &[f64]) -> Option<f64> {
        let mut p = x.to_vec();
        self.bounds.project(&mut p);
        let fv = f(&p)?;
        let dist: f64 = self.free.iter().map(|&i| (x[i] - p[i]).abs() / self.widths[i]).sum();
        Some(if dist > 0.0 { fv + dist * (1.0 + fv.abs()) } else { fv })
    }

    fn size(&self, vertices: &[(Vec<f64>, f64)]) -> f64 {
        let best = &vertices[0].0;
        vertices[1..]
            .iter()
            .flat_map(|(v, _)| self.free.iter().map(move |&i| (v[i] - best[i]).abs() / self.widths[i]))
            .fold(0.0, f64::max)
    }

    /// Runs until the simplex collapses below `step_tol`; `None` means the
    /// evaluation budget ran out.
    fn run(&self, f: &mut impl FnMut(&[f64]) -> Option<f64>, start: &[f64], f_start: f64) -> Option<()> {
        let n = self.free.len();
        let mut vertices = Vec::with_capacity(n + 1);
        vertices.push((start.to_vec(), f_start));
        for &i in self.free {
            let mut v = start.to_vec();
            let step = 0.1 * self.widths[i];
            if v[i] + step <= self.bounds.upper()[i] {
                v[i] += step;
            } else {
                v[i] -= step;
            }
            let fv = self.value(f, &v)?;
            vertices.push((v, fv));
        }

        loop {
            vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
            if self.size(&vertices) <= self.step_tol {
                return Some(());
            }
            let dim = start.len();
            let mut centroid = vec![0.0; dim];
            for (v, _) in &vertices[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let (worst, f_worst) = vertices[n].clone();
            let f_best = vertices[0].1;
            let f_second = vertices[n - 1].1;

            let xr = self.trial(&centroid, &worst, -1.0);
            let fr = self.value(f, &xr)?;
            if fr < f_best {
                let xe = self.trial(&centroid, &worst, -2.0);
                let fe = self.value(f, &xe)?;
                vertices[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < f_second {
                vertices[n] = (xr, fr);
                continue;
            }
            let xc = if fr < f_worst {
                self.trial(&centroid, &xr, 0.5)
            } else {
                self.trial(&centroid, &worst, 0.5)
            };
            let fc = self.value(f, &xc)?;
            if fc < fr.min(f_worst) {
                vertices[n] = (xc, fc);
                continue;
            }
            let best = vertices[0].0.clone();
            for (v, fv) in vertices.iter_mut().skip(1) {
                for (x, b) in v.iter_mut().zip(&best) {
                    *x = b + 0.5 * (*x - b);
                }
                *fv = self.value(f, v)?;
            }
        }
    }
}

/// Nelder–Mead runs per subproblem. Each restart begins from the best point
/// so far and stops the sequence once it fails to improve.
const MAX_RESTARTS: usize = 6;

/// Minimizes `spec.problem` over `spec.bounds`.
///
/// Running out of evaluations is not an error: the best point found is
/// returned with `converged = false`.
pub fn minimize<F>(spec: NlpSpec<F>) -> Result<OptResult>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    let NlpSpec {
        mut problem,
        bounds,
        x0,
        options,
    } = spec;
    options.validate()?;
    if x0.len() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            context: "optimizer start point",
            expected: bounds.dim(),
            got: x0.len(),
        });
    }
    let clock = Stopwatch::start();
    let mut x = x0;
    bounds.project(&mut x);
    let mut current = problem(&x)?;
    if !current.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut evals = 1;
    let n_eq = current.eq.len();
    let widths = bounds.widths();
    let free: Vec<usize> = (0..x.len()).filter(|&i| widths[i] > 0.0).collect();
    let simplex = Simplex {
        bounds: &bounds,
        widths: &widths,
        free: &free,
        step_tol: options.step_tol,
    };

    let mut lambda = vec![0.0; n_eq];
    let mut mu = options.initial_penalty;
    let mut history = Vec::new();
    let mut termination = Termination::MaxOuterIterations;

    for _ in 0..options.max_outer {
        let mut tracker = Tracker {
            problem: &mut problem,
            lambda: &lambda,
            mu,
            n_eq,
            evals: &mut evals,
            max_evals: options.max_evals,
            best: (x.clone(), current.clone(), 0.0),
        };
        tracker.best.2 = tracker.merit(&current);
        let mut exhausted = false;
        if !free.is_empty() {
            for _ in 0..MAX_RESTARTS {
                let (start, _, f_start) = tracker.best.clone();
                if simplex.run(&mut |p: &[f64]| tracker.eval(p), &start, f_start).is_none() {
                    exhausted = true;
                    break;
                }
                if tracker.best.2 >= f_start {
                    break;
                }
            }
        }
        let (x_new, e_new, _) = tracker.best;
        x = x_new;
        current = e_new;
        let violation = current.violation();
        history.push(OuterIteration {
            penalty: mu,
            objective: current.objective,
            constraint_violation: violation,
            evals,
        });

        if exhausted {
            termination = Termination::MaxEvals;
            break;
        }
        if violation <= options.constraint_tol {
            termination = Termination::Converged;
            break;
        }
        for (l, c) in lambda.iter_mut().zip(&current.eq) {
            *l += mu * c;
        }
        mu *= options.penalty_growth;
    }

    let constraint_violation = current.violation();
    if termination == Termination::MaxOuterIterations && constraint_violation <= options.constraint_tol {
        termination = Termination::Converged;
    }
    Ok(OptResult {
        b_star: x,
        f_star: current.objective,
        eq_values: current.eq,
        constraint_violation,
        evals,
        converged: termination == Termination::Converged,
        termination,
        wall_time: clock.elapsed_secs(),
        history,
    })
}

/// Criterion and equality-constraint values of a trajectory, in the
/// problem's own sense.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Criteria {
    pub psi0: f64,
    pub psis: Vec<f64>,
}

impl Criteria {
    pub fn violation(&self) -> f64 {
        self.psis.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }
}

/// The one place functionals are evaluated, shared by the full-order and
/// surrogate paths.
pub fn criteria_from_trajectory(def: &ProblemDef, traj: &Trajectory) -> Criteria {
    Criteria {
        psi0: def.criterion.evaluate(traj),
        psis: def.eq_constraints.iter().map(|c| c.evaluate(traj)).collect(),
    }
}

/// One ODE solve followed by functional evaluation.
pub fn criterion_original(def: &ProblemDef, b: &[f64], grid: &TimeGrid, opts: &IntegratorOptions) -> Result<Criteria> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let traj = integrate(def, b, grid, opts)?;
    Ok(criteria_from_trajectory(def, &traj))
}

/// Functional evaluation on the predicted trajectory; no ODE solve.
pub fn criterion_surrogate(s: &Surrogate, def: &ProblemDef, b: &[f64]) -> Result<Criteria> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let traj = s.predict_trajectory(def, b)?;
    Ok(criteria_from_trajectory(def, &traj))
}

/// Optimizes a problem's criterion as computed by `criteria`, respecting
/// its sense. `f_star` is reported in the problem's sense.
pub fn optimize_with<E>(def: &ProblemDef, mut criteria: E, bounds: &Bounds, x0: &[f64], options: &NlpOptions) -> Result<OptResult>
where
    E: FnMut(&[f64]) -> Result<Criteria>,
{
    let sign = def.sense.sign();
    let mut result = minimize(NlpSpec {
        problem: |b: &[f64]| {
            criteria(b).map(|c| Evaluation {
                objective: sign * c.psi0,
                eq: c.psis,
            })
        },
        bounds: bounds.clone(),
        x0: x0.to_vec(),
        options: options.clone(),
    })?;
    result.f_star *= sign;
    for h in &mut result.history {
        h.objective *= sign;
    }
    Ok(result)
}

pub fn optimize_original(
    def: &ProblemDef,
    grid: &TimeGrid,
    integrator: &IntegratorOptions,
    bounds: &Bounds,
    x0: &[f64],
    options: &NlpOptions,
) -> Result<OptResult> {
    optimize_with(def, |b| criterion_original(def, b, grid, integrator), bounds, x0, options)
}

pub fn optimize_surrogate(
    s: &Surrogate,
    def: &ProblemDef,
    bounds: &Bounds,
    x0: &[f64],
    options: &NlpOptions,
) -> Result<OptResult> {
    optimize_with(def, |b| criterion_surrogate(s, def, b), bounds, x0, options)
}
