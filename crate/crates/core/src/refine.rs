//! Iterative domain shrinking around the surrogate optimum.
//!
//! Each iteration trains a surrogate on a box slightly wider than the
//! current optimization box, optimizes on the surrogate, and compares the
//! surrogate criterion at the optimum with one full-order evaluation. The
//! relative gap `ε = |ψ₀(b̂*) − ψ̂₀(b̂*)| / |ψ₀(b̂*)|` decides whether to stop;
//! otherwise the box is recentred at `b̂*` and its width multiplied by
//! `shrink`.

use alloc::vec::Vec;

use crate::integrator::{IntegratorOptions, TimeGrid};
use crate::optimizer::{criterion_original, criterion_surrogate, optimize_original, optimize_surrogate, NlpOptions, OptResult};
use crate::problem::{Bounds, ProblemDef};
use crate::rbf::KernelKind;
use crate::sampling::{sample, Strategy};
use crate::snapshot::build_snapshots;
use crate::surrogate::Surrogate;
use crate::timing::Stopwatch;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RefineConfig {
    /// Optimization box widths in iteration 1. Defaults to twice the global
    /// widths, so the first box is the whole global box.
    pub width0: Option<Vec<f64>>,
    pub shrink: f64,
    /// Training box widths relative to the optimization box.
    pub widen: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub strategy: Strategy,
    pub n_s: usize,
    pub kernel: KernelKind,
    pub eps_pod: f64,
    /// Iteration `i` (from 1) samples with seed `base_seed + i`.
    pub base_seed: u64,
    pub n_t: usize,
    pub integrator: IntegratorOptions,
    pub nlp: NlpOptions,
    /// Initial incumbent. Defaults to the problem's nominal point.
    pub start: Option<Vec<f64>>,
    /// Also optimize the full-order model over the global box for reference.
    pub compare_original: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            width0: None,
            shrink: 0.5,
            widen: 1.1,
            tol: 0.01,
            max_iters: 10,
            strategy: Strategy::LatinHypercube,
            n_s: 40,
            kernel: KernelKind::LinearSpline,
            eps_pod: 0.01,
            base_seed: 0,
            n_t: 100,
            integrator: IntegratorOptions::default(),
            nlp: NlpOptions::default(),
            start: None,
            compare_original: false,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.widen >= 1.0) {
            return bad("widen must be at least 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if self.n_s < 2 {
            return bad("n_s must be at least 2");
        }
        if self.n_t < 2 {
            return bad("n_t must be at least 2");
        }
        if !(self.eps_pod > 0.0 && self.eps_pod < 1.0) {
            return bad("eps_pod must lie in (0, 1)");
        }
        for (name, v) in [("width0", &self.width0), ("start", &self.start)] {
            if let Some(v) = v {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        context: name,
                        expected: dim,
                        got: v.len(),
                    });
                }
            }
        }
        if let Some(w) = &self.width0 {
            if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return bad("width0 entries must be finite and nonnegative");
            }
        }
        self.nlp.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    /// Counted from 1.
    pub iteration: usize,
    /// Nominal (unclipped) widths of the optimization box.
    pub width: Vec<f64>,
    pub bounds: Bounds,
    pub training_bounds: Bounds,
    pub seed: u64,
    pub k: usize,
    pub opt: OptResult,
    /// Full-order criteria at `b̂*`.
    pub psi0: f64,
    pub psis: Vec<f64>,
    /// Surrogate criteria at `b̂*`.
    pub psi0_hat: f64,
    pub psis_hat: Vec<f64>,
    pub epsilon: f64,
    pub construction_time: f64,
    pub optimization_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RefineResult {
    pub b0: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    /// Index into `iterations` of the returned iterate.
    pub selected: usize,
    pub b_star: Vec<f64>,
    pub converged: bool,
    pub construction_time: f64,
    pub surrogate_time: f64,
    /// Full-order optimization over the global box, when requested.
    pub original: Option<OptResult>,
    pub original_time: f64,
}

impl RefineResult {
    pub fn selected(&self) -> &IterationRecord {
        &self.iterations[self.selected]
    }
}

pub fn relative_gap(psi0: f64, psi0_hat: f64) -> f64 {
    (psi0 - psi0_hat).abs() / psi0.abs().max(f64::MIN_POSITIVE)
}

/// Optimization box for one iteration: `center ± width / 2` clipped to
/// `global`.
pub fn iteration_bounds(global: &Bounds, center: &[f64], width: &[f64]) -> Result<Bounds> {
    global.centered_within(center, width)
}

/// Best iteration by the original model: feasible iterations first, ranked
/// by the sense-adjusted criterion, then infeasible ones by violation.
fn select_best(def: &ProblemDef, iterations: &[IterationRecord], constraint_tol: f64) -> usize {
    let sign = def.sense.sign();
    let key = |r: &IterationRecord| {
        let violation = r.psis.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
        if violation <= constraint_tol {
            (0, sign * r.psi0)
        } else {
            (1, violation)
        }
    };
    (0..iterations.len())
        .min_by(|&a, &b| {
            let (ka, kb) = (key(&iterations[a]), key(&iterations[b]));
            ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        })
        .unwrap_or(0)
}

pub fn refine_optimize(def: &ProblemDef, cfg: &RefineConfig) -> Result<RefineResult> {
    let dim = def.dim();
    cfg.validate(dim)?;
    let global = &def.bounds;
    let grid = TimeGrid::new(def.t_span.0, def.t_span.1, cfg.n_t)?;
    let mut b0 = cfg.start.clone().unwrap_or_else(|| def.nominal.clone());
    global.project(&mut b0);
    let start = b0.clone();
    let mut width = cfg
        .width0
        .clone()
        .unwrap_or_else(|| global.widths().iter().map(|w| 2.0 * w).collect());

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut construction_time = 0.0;
    let mut surrogate_time = 0.0;
    let mut converged = false;

    for iteration in 1..=cfg.max_iters {
        let bounds = iteration_bounds(global, &b0, &width)?;
        let wide: Vec<f64> = width.iter().map(|w| w * cfg.widen).collect();
        let training_bounds = iteration_bounds(global, &b0, &wide)?;
        let seed = cfg.base_seed.wrapping_add(iteration as u64);

        let clock = Stopwatch::start();
        let samples = sample(cfg.strategy, cfg.n_s, &training_bounds, seed)?;
        let snapshots = build_snapshots(def, &samples, &grid, &cfg.integrator)?;
        let surrogate = Surrogate::train(&snapshots, cfg.eps_pod, cfg.kernel)?;
        let t_construct = clock.elapsed_secs();

        let opt = optimize_surrogate(&surrogate, def, &bounds, &b0, &cfg.nlp)?;
        let t_opt = opt.wall_time;

        let b_hat = opt.b_star.clone();
        let hat = criterion_surrogate(&surrogate, def, &b_hat)?;
        let truth = criterion_original(def, &b_hat, &grid, &cfg.integrator)?;
        let epsilon = relative_gap(truth.psi0, hat.psi0);
        log::info!(
            "refine iteration {iteration}: k = {}, b̂* = {b_hat:?}, ψ₀ = {}, ψ̂₀ = {}, ε = {epsilon:e}",
            surrogate.k,
            truth.psi0,
            hat.psi0
        );
        construction_time += t_construct;
        surrogate_time += t_opt;
        iterations.push(IterationRecord {
            iteration,
            width: width.clone(),
            bounds,
            training_bounds,
            seed,
            k: surrogate.k,
            opt,
            psi0: truth.psi0,
            psis: truth.psis,
            psi0_hat: hat.psi0,
            psis_hat: hat.psis,
            epsilon,
            construction_time: t_construct,
            optimization_time: t_opt,
        });

        if epsilon <= cfg.tol {
            converged = true;
            break;
        }
        b0 = b_hat;
        for w in &mut width {
            *w *= cfg.shrink;
        }
    }

    let selected = select_best(def, &iterations, cfg.nlp.constraint_tol);

    let (original, original_time) = if cfg.compare_original {
        let r = optimize_original(def, &grid, &cfg.integrator, global, &start, &cfg.nlp)?;
        let t = r.wall_time;
        (Some(r), t)
    } else {
        (None, 0.0)
    };

    Ok(RefineResult {
        b0: start,
        b_star: iterations[selected].opt.b_star.clone(),
        selected,
        converged,
        iterations,
        construction_time,
        surrogate_time,
        original,
        original_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ControlKind, ControlParam, Functional, Sense};
    use alloc::sync::Arc;
    use alloc::vec;

    /// `y' = u` with `u` piecewise constant, so every state is affine in `b`.
    /// The criterion tracks `1 + 0.3 t` plus a unit terminal cost, which puts
    /// the optimum at `b = (0.3, 0.3)` in the interior of the box.
    fn affine_problem() -> ProblemDef {
        ProblemDef {
            name: "affine".into(),
            n_y: 1,
            rhs: Arc::new(|_, _: &[f64], u: &[f64], dy: &mut [f64]| dy[0] = u[0]),
            y0: vec![1.0],
            t_span: (0.0, 1.0),
            control: ControlParam::new(ControlKind::PiecewiseConstant, vec![2], (0.0, 1.0)).unwrap(),
            criterion: Functional::integral("tracking", |t, y, _| {
                let d = y[0] - 1.0 - 0.3 * t;
                d * d
            })
            .with_terminal(|_| 1.0),
            eq_constraints: vec![],
            bounds: Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            sense: Sense::Minimize,
            nominal: vec![0.5, 0.5],
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn affine_problem_converges_in_first_iteration() {
        let def = affine_problem();
        let cfg = RefineConfig {
            n_s: 30,
            n_t: 41,
            ..RefineConfig::default()
        };
        let r = refine_optimize(&def, &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations.len(), 1);
        assert!(r.selected().epsilon <= cfg.tol, "{}", r.selected().epsilon);
        assert!(r.b_star.iter().all(|v| (v - 0.3).abs() < 0.05), "{:?}", r.b_star);
    }

    #[test]
    fn first_iteration_covers_global_box() {
        let def = affine_problem();
        let b = iteration_bounds(&def.bounds, &def.nominal, &[2.0, 2.0]).unwrap();
        assert_eq!(b, def.bounds);
    }

    #[test]
    fn bounds_nest_and_widths_decay_geometrically() {
        let def = crate::bench::science_policy(&crate::bench::SciencePolicyParams::default()).unwrap();
        let cfg = RefineConfig {
            tol: 1e-14,
            max_iters: 3,
            n_s: 10,
            n_t: 31,
            nlp: NlpOptions {
                max_evals: 600,
                ..NlpOptions::default()
            },
            ..RefineConfig::default()
        };
        let r = refine_optimize(&def, &cfg).unwrap();
        assert_eq!(r.iterations.len(), 3);
        for pair in r.iterations.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            for (wa, wb) in a.width.iter().zip(&b.width) {
                assert_eq!(*wb, wa * cfg.shrink);
            }
            assert!(b.bounds.is_within(&def.bounds));
            assert!(b.bounds.is_within(&b.training_bounds));
            let mid = b.bounds.center();
            let clipped = (0..2).any(|i| {
                b.bounds.lower()[i] == def.bounds.lower()[i] || b.bounds.upper()[i] == def.bounds.upper()[i]
            });
            if !clipped {
                for (m, c) in mid.iter().zip(&a.opt.b_star) {
                    assert!((m - c).abs() <= 1e-12);
                }
            }
        }
        // The terminal targets are out of reach in this box, so the least
        // violating iterate is returned.
        let violation = |it: &IterationRecord| it.psis.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
        assert!(r.iterations.iter().all(|it| violation(it) > cfg.nlp.constraint_tol));
        let least = r.iterations.iter().map(violation).fold(f64::INFINITY, f64::min);
        assert_eq!(violation(r.selected()), least);
        assert!(!r.converged);
    }

    #[test]
    fn invalid_configs_rejected() {
        let def = affine_problem();
        for cfg in [
            RefineConfig {
                shrink: 1.0,
                ..RefineConfig::default()
            },
            RefineConfig {
                widen: 0.9,
                ..RefineConfig::default()
            },
            RefineConfig {
                tol: 0.0,
                ..RefineConfig::default()
            },
            RefineConfig {
                width0: Some(vec![1.0]),
                ..RefineConfig::default()
            },
        ] {
            assert!(refine_optimize(&def, &cfg).is_err());
        }
    }

    #[test]
    fn relative_gap_examples() {
        assert!((relative_gap(210.99, 209.76) - 0.0058).abs() < 1e-4);
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
    }
}
