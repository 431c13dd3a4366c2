//! Built-in benchmark problems.
//!
//! * [`science_policy`]: a two-compartment model of the scientific
//!   workforce where the control splits new scientists between research
//!   and teaching.
//! * [`population_dynamics`]: a nonlinear two-species model with saturating
//!   interaction and two controls.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::problem::{Bounds, ControlKind, ControlParam, Functional, ProblemDef, Sense};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SciencePolicyParams {
    /// Scientists produced per scientist per year.
    pub g: f64,
    /// Exit rate.
    pub delta: f64,
    pub y10: f64,
    pub y20: f64,
    pub t_end: f64,
    /// Terminal target for researchers.
    pub y1_target: f64,
    /// Terminal target for teachers.
    pub y2_target: f64,
    pub u_lo: f64,
    pub u_hi: f64,
    /// Initial guess used for every control node.
    pub u0: f64,
}

impl Default for SciencePolicyParams {
    fn default() -> Self {
        Self {
            g: 0.14,
            delta: 0.02,
            y10: 100.0,
            y20: 80.0,
            t_end: 15.0,
            y1_target: 200.0,
            y2_target: 240.0,
            u_lo: 0.1,
            u_hi: 0.6,
            u0: 0.5,
        }
    }
}

/// Maximize `∫ ½(y₁ + y₂) dt` subject to
///
/// ```text
/// y₁' = u g y₁ − δ y₁
/// y₂' = (1 − u) g y₁ − δ y₂
/// y₁(T) = y1_target,  y₂(T) = y2_target
/// ```
///
/// with `u` piecewise linear through two nodes.
pub fn science_policy(p: &SciencePolicyParams) -> Result<ProblemDef> {
    let (g, delta) = (p.g, p.delta);
    let (y1t, y2t) = (p.y1_target, p.y2_target);
    let span = (0.0, p.t_end);
    ProblemDef {
        name: String::from("science-policy"),
        n_y: 2,
        rhs: Arc::new(move |_t, y: &[f64], u: &[f64], dy: &mut [f64]| {
            dy[0] = u[0] * g * y[0] - delta * y[0];
            dy[1] = (1.0 - u[0]) * g * y[0] - delta * y[1];
        }),
        y0: vec![p.y10, p.y20],
        t_span: span,
        control: ControlParam::new(ControlKind::PiecewiseLinear, vec![2], span)?,
        criterion: Functional::integral("total_scientists", |_t, y, _u| 0.5 * (y[0] + y[1])),
        eq_constraints: vec![
            Functional::terminal("y1_terminal_gap", move |y| y[0] - y1t),
            Functional::terminal("y2_terminal_gap", move |y| y[1] - y2t),
        ],
        bounds: Bounds::new(vec![p.u_lo; 2], vec![p.u_hi; 2])?,
        sense: Sense::Maximize,
        nominal: vec![p.u0; 2],
    }
    .validate()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PopulationDynamicsParams {
    pub p: [f64; 5],
    pub t_span: (f64, f64),
    pub u1_bounds: (f64, f64),
    pub u2_bounds: (f64, f64),
    /// Desired level of the first species.
    pub y1d: f64,
    /// Upper limit on the second species.
    pub y2plus: f64,
    pub y0: Vec<f64>,
}

impl Default for PopulationDynamicsParams {
    fn default() -> Self {
        Self {
            p: [0.734, 0.175, -0.5, -0.246, 0.635],
            t_span: (0.0, 10.0),
            u1_bounds: (-0.55, -0.3),
            u2_bounds: (-1.037, -0.787),
            y1d: 5.0,
            y2plus: 6.0,
            y0: vec![5.0, 6.0],
        }
    }
}

/// Saturating interaction factor `F(y₁) = 1 − exp(−p₅ y₁)`.
#[inline]
pub fn saturation(p5: f64, y1: f64) -> f64 {
    1.0 - libm::exp(-p5 * y1)
}

/// One-sided penalty `(|d| + d)²` with `d = y₂ − y2plus`; zero whenever the
/// bound holds.
#[inline]
pub fn upper_bound_penalty(y2: f64, y2plus: f64) -> f64 {
    let d = y2 - y2plus;
    let s = d.abs() + d;
    s * s
}

/// Minimize `∫ (y₁ − y1d)² dt` subject to `∫ (|y₂ − y2plus| + y₂ − y2plus)² dt = 0`
/// and
///
/// ```text
/// y₁' = p₁ y₁ + p₂ y₂² + u₁ y₁ F(y₁) y₂
/// y₂' = p₃ y₂ + p₄ y₂² + u₁ u₂ y₁ F(y₁) y₂
/// ```
///
/// with both controls piecewise linear through two nodes, so `b ∈ R⁴` laid
/// out as `[u₁ nodes, u₂ nodes]`.
pub fn population_dynamics(params: &PopulationDynamicsParams) -> Result<ProblemDef> {
    let [p1, p2, p3, p4, p5] = params.p;
    let (y1d, y2plus) = (params.y1d, params.y2plus);
    let span = params.t_span;
    let (u1, u2) = (params.u1_bounds, params.u2_bounds);
    ProblemDef {
        name: String::from("population-dynamics"),
        n_y: 2,
        rhs: Arc::new(move |_t, y: &[f64], u: &[f64], dy: &mut [f64]| {
            let coupling = y[0] * saturation(p5, y[0]) * y[1];
            dy[0] = p1 * y[0] + p2 * y[1] * y[1] + u[0] * coupling;
            dy[1] = p3 * y[1] + p4 * y[1] * y[1] + u[0] * u[1] * coupling;
        }),
        y0: params.y0.clone(),
        t_span: span,
        control: ControlParam::new(ControlKind::PiecewiseLinear, vec![2, 2], span)?,
        criterion: Functional::integral("tracking", move |_t, y, _u| {
            let d = y[0] - y1d;
            d * d
        }),
        eq_constraints: vec![Functional::integral("y2_excess", move |_t, y, _u| {
            upper_bound_penalty(y[1], y2plus)
        })],
        bounds: Bounds::new(vec![u1.0, u1.0, u2.0, u2.0], vec![u1.1, u1.1, u2.1, u2.1])?,
        sense: Sense::Minimize,
        nominal: vec![
            0.5 * (u1.0 + u1.1),
            0.5 * (u1.0 + u1.1),
            0.5 * (u2.0 + u2.1),
            0.5 * (u2.0 + u2.1),
        ],
    }
    .validate()
}
