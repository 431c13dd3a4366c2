//! Parametric ODE optimal-control problems.
//!
//! A [`ProblemDef`] bundles the state dynamics, the control parameterization
//! mapping an optimization vector `b` to control trajectories, the criterion
//! and equality-constraint functionals, and the parameter box.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::integrator::{quadrature, Trajectory};
use crate::{Error, Result};

/// Axis-aligned parameter box `lower <= b <= upper`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidProblem("bounds must have at least one dimension".into()));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidProblem(format!("bound {j} is not finite")));
            }
            if lo > hi {
                return Err(Error::InvalidProblem(format!(
                    "lower[{j}] = {lo} exceeds upper[{j}] = {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit hypercube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Euclidean length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        libm::sqrt(self.widths().iter().map(|w| w * w).sum())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Clamps `x` into the box in place.
    pub fn project(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Reflection through the box center, `lower + upper - x`.
    pub fn reflect(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| lo + hi - v)
            .collect()
    }

    /// Box of the given widths centered at `center`, intersected with `self`.
    pub fn centered_within(&self, center: &[f64], widths: &[f64]) -> Result<Self> {
        if center.len() != self.dim() || widths.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "centered bounds",
                expected: self.dim(),
                got: center.len().min(widths.len()),
            });
        }
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let half = 0.5 * widths[j];
            let c = center[j].clamp(self.lower[j], self.upper[j]);
            lower.push((c - half).max(self.lower[j]));
            upper.push((c + half).min(self.upper[j]));
        }
        Self::new(lower, upper)
    }

    /// True when `self` lies inside `outer`.
    pub fn is_within(&self, outer: &Bounds) -> bool {
        self.dim() == outer.dim()
            && (0..self.dim())
                .all(|j| outer.lower[j] <= self.lower[j] && self.upper[j] <= outer.upper[j])
    }
}

/// Shape of each control function between its nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ControlKind {
    #[cfg_attr(feature = "serde", serde(alias = "PC"))]
    PiecewiseConstant,
    #[cfg_attr(feature = "serde", serde(alias = "PL"))]
    PiecewiseLinear,
}

/// Maps the optimization vector `b` onto `n_u` control trajectories.
///
/// `b` is laid out control-major: the `n_1` node values of `u_1`, then the
/// `n_2` values of `u_2`, and so on. Piecewise-linear controls place their
/// nodes uniformly on `[t0, T]` (one node means a constant control).
/// Piecewise-constant controls split `[t0, T]` into `n_i` equal right-open
/// intervals, the last one closed.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlParam {
    kind: ControlKind,
    nodes: Vec<usize>,
    t0: f64,
    t_end: f64,
}

impl ControlParam {
    pub fn new(kind: ControlKind, nodes_per_control: Vec<usize>, t_span: (f64, f64)) -> Result<Self> {
        let (t0, t_end) = t_span;
        if nodes_per_control.is_empty() {
            return Err(Error::InvalidProblem("at least one control is required".into()));
        }
        if let Some(i) = nodes_per_control.iter().position(|&n| n == 0) {
            return Err(Error::InvalidProblem(format!("control {i} has zero nodes")));
        }
        if !(t0.is_finite() && t_end.is_finite() && t0 < t_end) {
            return Err(Error::InvalidProblem(format!(
                "control span [{t0}, {t_end}] is not an increasing finite interval"
            )));
        }
        Ok(Self {
            kind,
            nodes: nodes_per_control,
            t0,
            t_end,
        })
    }

    pub fn kind(&self) -> ControlKind {
        self.kind
    }

    pub fn nodes_per_control(&self) -> &[usize] {
        &self.nodes
    }

    pub fn t_span(&self) -> (f64, f64) {
        (self.t0, self.t_end)
    }

    pub fn n_controls(&self) -> usize {
        self.nodes.len()
    }

    /// Length of the optimization vector.
    pub fn dim(&self) -> usize {
        self.nodes.iter().sum()
    }

    /// Evaluates `u(t, b)`.
    pub fn eval(&self, b: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut u = vec![0.0; self.n_controls()];
        self.eval_into(b, t, &mut u)?;
        Ok(u)
    }

    /// Controls at every grid time, one row of `n_controls` values per time.
    pub fn sample_rows(&self, b: &[f64], times: impl Iterator<Item = f64>) -> Result<Vec<f64>> {
        self.check_lengths(b, self.n_controls())?;
        let n_u = self.n_controls();
        let mut rows = Vec::new();
        for t in times {
            let s = self.check_time(t)?;
            let start = rows.len();
            rows.resize(start + n_u, 0.0);
            self.eval_scaled(b, s, &mut rows[start..]);
        }
        Ok(rows)
    }

    fn check_lengths(&self, b: &[f64], out: usize) -> Result<()> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "control parameters",
                expected: self.dim(),
                got: b.len(),
            });
        }
        if out != self.n_controls() {
            return Err(Error::DimensionMismatch {
                context: "control output",
                expected: self.n_controls(),
                got: out,
            });
        }
        Ok(())
    }

    /// Maps `t` to the unit interval.
    #[inline]
    fn check_time(&self, t: f64) -> Result<f64> {
        let span = self.t_end - self.t0;
        // Stage times of the last step can overshoot T by an ulp.
        let slack = 1e-12 * span;
        if !(t >= self.t0 - slack && t <= self.t_end + slack) {
            return Err(Error::TimeOutOfRange {
                t,
                t0: self.t0,
                t_end: self.t_end,
            });
        }
        Ok(((t - self.t0) / span).clamp(0.0, 1.0))
    }

    pub fn eval_into(&self, b: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.check_lengths(b, out.len())?;
        let s = self.check_time(t)?;
        self.eval_scaled(b, s, out);
        Ok(())
    }

    #[inline]
    fn eval_scaled(&self, b: &[f64], s: f64, out: &mut [f64]) {
        let mut offset = 0;
        for (slot, &n) in out.iter_mut().zip(&self.nodes) {
            let nodes = &b[offset..offset + n];
            offset += n;
            *slot = if n == 1 {
                nodes[0]
            } else {
                match self.kind {
                    ControlKind::PiecewiseConstant => {
                        let idx = ((s * n as f64) as usize).min(n - 1);
                        nodes[idx]
                    }
                    ControlKind::PiecewiseLinear => {
                        let pos = s * (n - 1) as f64;
                        let seg = (pos as usize).min(n - 2);
                        let frac = pos - seg as f64;
                        nodes[seg] + frac * (nodes[seg + 1] - nodes[seg])
                    }
                }
            };
        }
    }
}

/// Right-hand side `dy/dt = f(t, y, u)`, written into the last argument.
pub type RhsFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;
/// Running cost `(t, y, u) -> value`, integrated over the output grid.
pub type IntegrandFn = dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync;
/// Terminal cost evaluated on `y(T)`.
pub type TerminalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A trajectory functional `∫ L(t, y, u) dt + Φ(y(T))`.
#[derive(Clone)]
pub struct Functional {
    name: String,
    integrand: Option<Arc<IntegrandFn>>,
    terminal: Option<Arc<TerminalFn>>,
}

impl Functional {
    pub fn integral<F>(name: impl Into<String>, integrand: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            integrand: Some(Arc::new(integrand)),
            terminal: None,
        }
    }

    pub fn terminal<F>(name: impl Into<String>, terminal: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            integrand: None,
            terminal: Some(Arc::new(terminal)),
        }
    }

    /// Adds a terminal term to an existing functional.
    pub fn with_terminal<F>(mut self, terminal: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.terminal = Some(Arc::new(terminal));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn is_empty(&self) -> bool {
        self.integrand.is_none() && self.terminal.is_none()
    }

    /// Trapezoidal quadrature of the integrand on the trajectory grid plus the
    /// terminal term.
    pub fn evaluate(&self, traj: &Trajectory) -> f64 {
        let mut value = 0.0;
        if let Some(integrand) = &self.integrand {
            let samples: Vec<f64> = (0..traj.grid.n_t())
                .map(|i| integrand(traj.grid.time(i), traj.state(i), traj.control(i)))
                .collect();
            value += quadrature(&traj.grid, &samples).unwrap_or(f64::NAN);
        }
        if let Some(terminal) = &self.terminal {
            value += terminal(traj.state(traj.grid.n_t() - 1));
        }
        value
    }
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("name", &self.name)
            .field("integrand", &self.integrand.is_some())
            .field("terminal", &self.terminal.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// Sign that turns the criterion into a quantity to minimize.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

/// An ODE optimal-control problem, immutable once validated.
#[derive(Clone)]
pub struct ProblemDef {
    pub name: String,
    pub n_y: usize,
    pub rhs: Arc<RhsFn>,
    pub y0: Vec<f64>,
    pub t_span: (f64, f64),
    pub control: ControlParam,
    pub criterion: Functional,
    pub eq_constraints: Vec<Functional>,
    pub bounds: Bounds,
    pub sense: Sense,
    /// Initial guess `b⁰`.
    pub nominal: Vec<f64>,
}

impl ProblemDef {
    pub fn n_u(&self) -> usize {
        self.control.n_controls()
    }

    pub fn dim(&self) -> usize {
        self.control.dim()
    }

    /// Checks every structural invariant and returns the definition unchanged.
    pub fn validate(self) -> Result<Self> {
        let fail = |msg: String| Err(Error::InvalidProblem(msg));
        if self.n_y == 0 {
            return fail("state dimension n_y must be positive".into());
        }
        if self.y0.len() != self.n_y {
            return fail(format!(
                "initial state has length {} but n_y = {}",
                self.y0.len(),
                self.n_y
            ));
        }
        if self.y0.iter().any(|v| !v.is_finite()) {
            return fail("initial state is not finite".into());
        }
        let (t0, t_end) = self.t_span;
        if !(t0.is_finite() && t_end.is_finite() && t0 < t_end) {
            return fail(format!("time span [{t0}, {t_end}] is not increasing"));
        }
        if self.control.t_span() != self.t_span {
            return fail("control time span differs from the problem time span".into());
        }
        if self.bounds.dim() != self.control.dim() {
            return fail(format!(
                "box dimension {} differs from control parameter count {}",
                self.bounds.dim(),
                self.control.dim()
            ));
        }
        if self.nominal.len() != self.bounds.dim() || !self.bounds.contains(&self.nominal) {
            return fail("initial guess lies outside the parameter box".into());
        }
        if self.criterion.is_empty() {
            return fail("criterion has neither integrand nor terminal term".into());
        }
        if let Some(c) = self.eq_constraints.iter().find(|c| c.is_empty()) {
            return fail(format!("constraint '{}' is empty", c.name()));
        }
        Ok(self)
    }
}

impl fmt::Debug for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDef")
            .field("name", &self.name)
            .field("n_y", &self.n_y)
            .field("y0", &self.y0)
            .field("t_span", &self.t_span)
            .field("control", &self.control)
            .field("criterion", &self.criterion)
            .field("eq_constraints", &self.eq_constraints)
            .field("bounds", &self.bounds)
            .field("sense", &self.sense)
            .finish()
    }
}
