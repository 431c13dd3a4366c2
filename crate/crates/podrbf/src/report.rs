//! JSON reports. Wall-time fields are `None` under `--deterministic` and
//! are then left out of the output entirely.

use serde::Serialize;

use podrbf_core::optimizer::{OptResult, Termination};
use podrbf_core::problem::{Bounds, Sense};
use podrbf_core::rbf::KernelKind;
use podrbf_core::refine::{IterationRecord, RefineResult};
use podrbf_core::sampling::Strategy;
use podrbf_core::surrogate::ErrorReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxReport {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl From<&Bounds> for BoxReport {
    fn from(b: &Bounds) -> Self {
        Self {
            lower: b.lower().to_vec(),
            upper: b.upper().to_vec(),
        }
    }
}

/// Keeps a timing only when reports need not be reproducible.
pub fn timing(deterministic: bool, seconds: f64) -> Option<f64> {
    (!deterministic).then_some(seconds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReportJson {
    pub problem: String,
    pub strategy: Strategy,
    pub kernel: KernelKind,
    pub n_s: usize,
    pub k: usize,
    pub eps_pod: f64,
    pub test_seed: u64,
    pub n_g: usize,
    /// `null` when the test responses have no spread and the fit is not exact.
    pub r2: Option<f64>,
    pub mae: f64,
    pub mxae: f64,
    pub rmae: f64,
    pub worst_point: usize,
    pub b_worst: Vec<f64>,
}

impl ErrorReportJson {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        problem: &str,
        strategy: Strategy,
        kernel: KernelKind,
        n_s: usize,
        k: usize,
        eps_pod: f64,
        test_seed: u64,
        report: &ErrorReport,
        b_worst: Vec<f64>,
    ) -> Self {
        Self {
            problem: problem.to_string(),
            strategy,
            kernel,
            n_s,
            k,
            eps_pod,
            test_seed,
            n_g: report.n_g,
            r2: report.r2.is_finite().then_some(report.r2),
            mae: report.mae,
            mxae: report.mxae,
            rmae: report.rmae,
            worst_point: report.worst_point,
            b_worst,
        }
    }
}

/// One row of the design sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub strategy: &'static str,
    pub kernel: &'static str,
    pub n_s: usize,
    pub k: usize,
    pub rmae: f64,
    pub mae: f64,
    pub mxae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    pub path: &'static str,
    pub b_star: Vec<f64>,
    /// Objective at `b_star` in the problem's own sense, from the model that
    /// was optimized.
    pub f_star: f64,
    /// Original-model criterion and constraints at `b_star`.
    pub psi0: f64,
    pub psis: Vec<f64>,
    /// Surrogate criterion and constraints at `b_star` (surrogate path only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi0_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psis_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub constraint_violation: f64,
    pub evals: usize,
    pub converged: bool,
    pub termination: Termination,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl PathReport {
    pub fn new(path: &'static str, r: &OptResult, psi0: f64, psis: Vec<f64>, deterministic: bool) -> Self {
        Self {
            path,
            b_star: r.b_star.clone(),
            f_star: r.f_star,
            psi0,
            psis,
            psi0_hat: None,
            psis_hat: None,
            epsilon: None,
            constraint_violation: r.constraint_violation,
            evals: r.evals,
            converged: r.converged,
            termination: r.termination,
            wall_time: timing(deterministic, r.wall_time),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptReport {
    pub problem: String,
    pub sense: Sense,
    pub b0: Vec<f64>,
    pub bounds: BoxReport,
    pub paths: Vec<PathReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub width: Vec<f64>,
    pub bounds: BoxReport,
    pub training_bounds: BoxReport,
    pub seed: u64,
    pub k: usize,
    pub b_star: Vec<f64>,
    pub psi0: f64,
    pub psis: Vec<f64>,
    pub psi0_hat: f64,
    pub psis_hat: Vec<f64>,
    pub epsilon: f64,
    pub evals: usize,
    pub opt_converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimization_time: Option<f64>,
}

impl IterationReport {
    fn new(it: &IterationRecord, deterministic: bool) -> Self {
        Self {
            iteration: it.iteration,
            width: it.width.clone(),
            bounds: (&it.bounds).into(),
            training_bounds: (&it.training_bounds).into(),
            seed: it.seed,
            k: it.k,
            b_star: it.opt.b_star.clone(),
            psi0: it.psi0,
            psis: it.psis.clone(),
            psi0_hat: it.psi0_hat,
            psis_hat: it.psis_hat.clone(),
            epsilon: it.epsilon,
            evals: it.opt.evals,
            opt_converged: it.opt.converged,
            construction_time: timing(deterministic, it.construction_time),
            optimization_time: timing(deterministic, it.optimization_time),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OriginalReport {
    pub b_star: Vec<f64>,
    pub f_star: f64,
    pub constraint_violation: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub construction: f64,
    pub surrogate: f64,
    pub original: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineTrace {
    pub problem: String,
    pub sense: Sense,
    pub b0: Vec<f64>,
    pub converged: bool,
    /// 1-based iteration whose `b_star` is returned.
    pub selected: usize,
    pub b_star: Vec<f64>,
    pub epsilon: f64,
    pub iterations: Vec<IterationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original: Option<OriginalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Timings>,
}

impl RefineTrace {
    pub fn new(problem: &str, sense: Sense, r: &RefineResult, deterministic: bool) -> Self {
        Self {
            problem: problem.to_string(),
            sense,
            b0: r.b0.clone(),
            converged: r.converged,
            selected: r.selected().iteration,
            b_star: r.b_star.clone(),
            epsilon: r.selected().epsilon,
            iterations: r.iterations.iter().map(|it| IterationReport::new(it, deterministic)).collect(),
            original: r.original.as_ref().map(|o| OriginalReport {
                b_star: o.b_star.clone(),
                f_star: o.f_star,
                constraint_violation: o.constraint_violation,
                evals: o.evals,
                converged: o.converged,
            }),
            times: (!deterministic).then_some(Timings {
                construction: r.construction_time,
                surrogate: r.surrogate_time,
                original: r.original_time,
            }),
        }
    }
}
