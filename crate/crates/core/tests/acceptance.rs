//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use podrbf_core::bench::{self, PopulationDynamicsParams, SciencePolicyParams};
use podrbf_core::integrator::{integrate, quadrature, IntegratorOptions, TimeGrid};
use podrbf_core::optimizer::{minimize, optimize_original, optimize_surrogate, Evaluation, NlpOptions, NlpSpec};
use podrbf_core::pod::{compute_svd, cumulative_energy, project_amplitudes, select_rank};
use podrbf_core::problem::{Bounds, ProblemDef};
use podrbf_core::rbf::KernelKind;
use podrbf_core::refine::{refine_optimize, RefineConfig};
use podrbf_core::sampling::{lhs_sample, sample, slhs_sample, SampleSet, Strategy};
use podrbf_core::snapshot::{build_snapshots, SnapshotMatrix};
use podrbf_core::surrogate::Surrogate;
use podrbf_core::Result;

const SEED: u64 = 0;
const TEST_SEED: u64 = 1000;
const EPS_POD: f64 = 0.01;
const N_T: usize = 100;
const N_G: usize = 10;

type Check = Result<(bool, String)>;

fn model1() -> ProblemDef {
    bench::science_policy(&SciencePolicyParams::default()).expect("model 1")
}

fn model2() -> ProblemDef {
    bench::population_dynamics(&PopulationDynamicsParams::default()).expect("model 2")
}

fn grid(def: &ProblemDef) -> TimeGrid {
    TimeGrid::new(def.t_span.0, def.t_span.1, N_T).expect("grid")
}

fn snapshots(def: &ProblemDef, strategy: Strategy, n_s: usize, seed: u64) -> Result<SnapshotMatrix> {
    let samples = sample(strategy, n_s, &def.bounds, seed)?;
    build_snapshots(def, &samples, &grid(def), &IntegratorOptions::default())
}

/// RMAE of a surrogate trained on the global box against `N_G` fresh LHS points.
fn test_rmae(def: &ProblemDef, strategy: Strategy, kind: KernelKind, n_s: usize, seed: u64) -> Result<f64> {
    let y = snapshots(def, strategy, n_s, seed)?;
    let s = Surrogate::train(&y, EPS_POD, kind)?;
    let test = lhs_sample(N_G, &def.bounds, TEST_SEED + seed)?;
    Ok(s.test_error(def, &test, &IntegratorOptions::default())?.rmae)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

fn criterion_1() -> Check {
    let y = snapshots(&model2(), Strategy::SymmetricLatinHypercube, 40, SEED)?;
    let svd = compute_svd(&y.data)?;
    let e1 = cumulative_energy(&svd.sigma)[0];
    let k = select_rank(&svd.sigma, EPS_POD)?;
    Ok((e1 > 0.99 && k == 3, format!("E(1) = {e1:.6}, k = {k} (want E(1) > 0.99, k = 3)")))
}

fn criterion_2() -> Check {
    let y = snapshots(&model1(), Strategy::SymmetricLatinHypercube, 40, SEED)?;
    let svd = compute_svd(&y.data)?;
    let k = select_rank(&svd.sigma, EPS_POD)?;
    Ok(((3..=5).contains(&k), format!("k = {k} (want 3..=5)")))
}

fn criterion_3() -> Check {
    let def = model1();
    let lhs = Strategy::LatinHypercube;
    let kind = KernelKind::LinearSpline;
    let mut at80 = Vec::new();
    let mut at40 = Vec::new();
    for seed in 0..5 {
        at80.push(test_rmae(&def, lhs, kind, 80, seed)?);
        at40.push(test_rmae(&def, lhs, kind, 40, seed)?);
    }
    let rmae = at80[SEED as usize];
    let (m80, m40) = (median(at80), median(at40));
    Ok((
        rmae < 0.02 && m80 < m40,
        format!("RMAE(n_s=80, seed {SEED}) = {rmae:.5} (want < 0.02); median over 5 seeds {m80:.5} at 80 vs {m40:.5} at 40"),
    ))
}

fn criterion_4() -> Check {
    let def = model2();
    let slhs = Strategy::SymmetricLatinHypercube;
    let r80 = test_rmae(&def, slhs, KernelKind::CubicSpline, 80, SEED)?;
    let r40 = test_rmae(&def, slhs, KernelKind::CubicSpline, 40, SEED)?;
    Ok((r80 < r40, format!("RMAE {r80:.5} at n_s = 80 vs {r40:.5} at n_s = 40")))
}

fn criterion_5() -> Check {
    let def = model1();
    let cfg = RefineConfig {
        strategy: Strategy::LatinHypercube,
        kernel: KernelKind::LinearSpline,
        n_s: 40,
        tol: 0.01,
        base_seed: SEED,
        ..RefineConfig::default()
    };
    let r = refine_optimize(&def, &cfg)?;
    let it = r.selected();
    let gaps = max_abs(&it.psis);
    Ok((
        r.converged && it.epsilon <= 0.01 && gaps <= 0.05,
        format!(
            "converged = {}, iterations = {}, ε = {:.4}, b̂* = {:.4?}, ψ₁(b̂*) = {:.4?} (want ε ≤ 0.01, |ψ₁| ≤ 0.05)",
            r.converged,
            r.iterations.len(),
            it.epsilon,
            r.b_star,
            it.psis
        ),
    ))
}

fn criterion_6() -> Check {
    let def = model2();
    let cfg = RefineConfig {
        strategy: Strategy::SymmetricLatinHypercube,
        kernel: KernelKind::CubicSpline,
        n_s: 80,
        tol: 0.01,
        base_seed: SEED,
        ..RefineConfig::default()
    };
    let r = refine_optimize(&def, &cfg)?;
    let first = &r.iterations[0];
    let ok = r.converged && first.epsilon <= 0.01 && first.psis_hat[0] <= 1e-2;
    Ok((
        ok,
        format!(
            "iteration 1: ε = {:.4}, ψ₀ = {:.5}, ψ̂₀ = {:.5}, ψ̂₁ = {:.2e}; converged = {} after {} iterations",
            first.epsilon,
            first.psi0,
            first.psi0_hat,
            first.psis_hat[0],
            r.converged,
            r.iterations.len()
        ),
    ))
}

fn criterion_7() -> Check {
    let def = model2();
    let grid = grid(&def);
    let opts = IntegratorOptions::default();
    let y = snapshots(&def, Strategy::SymmetricLatinHypercube, 80, SEED)?;
    let s = Surrogate::train(&y, EPS_POD, KernelKind::CubicSpline)?;
    let points = lhs_sample(50, &def.bounds, TEST_SEED)?;

    let time = |f: &mut dyn FnMut(&[f64]) -> Result<()>| -> Result<f64> {
        f(&points.point(0))?;
        let mut t = Vec::with_capacity(points.len());
        for i in 0..points.len() {
            let b = points.point(i);
            let clock = Instant::now();
            f(&b)?;
            t.push(clock.elapsed().as_secs_f64());
        }
        Ok(median(t))
    };
    let t_predict = time(&mut |b| s.predict(b).map(drop))?;
    let t_integrate = time(&mut |b| integrate(&def, b, &grid, &opts).map(drop))?;

    let nlp = NlpOptions::default();
    let surr = optimize_surrogate(&s, &def, &def.bounds, &def.nominal, &nlp)?;
    let orig = optimize_original(&def, &grid, &opts, &def.bounds, &def.nominal, &nlp)?;
    Ok((
        t_predict < 0.1 * t_integrate && surr.wall_time < orig.wall_time,
        format!(
            "median predict {:.2} µs vs integrate {:.2} µs (ratio {:.3}); optimization {:.4} s on the surrogate ({} evals) vs {:.4} s on the original ({} evals)",
            t_predict * 1e6,
            t_integrate * 1e6,
            t_predict / t_integrate,
            surr.wall_time,
            surr.evals,
            orig.wall_time,
            orig.evals
        ),
    ))
}

/// Sub-checks for the property suite, each returning an error message on failure.
fn properties() -> Vec<(&'static str, std::result::Result<(), String>)> {
    vec![
        ("pod orthonormality", pod_orthonormality()),
        ("tail energy", tail_energy()),
        ("rbf node exactness", rbf_exactness()),
        ("lhs stratification", lhs_stratification()),
        ("slhs mirror closure", slhs_mirror_closure()),
        ("quadrature order", quadrature_order()),
        ("model 1 closed form", model1_closed_form()),
        ("constrained quadratic", constrained_quadratic()),
        ("refine nesting", refine_nesting()),
    ]
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn model1_snapshots() -> std::result::Result<SnapshotMatrix, String> {
    snapshots(&model1(), Strategy::LatinHypercube, 40, SEED).map_err(|e| e.to_string())
}

fn pod_orthonormality() -> std::result::Result<(), String> {
    let y = model1_snapshots()?;
    let svd = compute_svd(&y.data).map_err(|e| e.to_string())?;
    let k = select_rank(&svd.sigma, EPS_POD).map_err(|e| e.to_string())?;
    let phi = svd.u.columns(0, k);
    let err = (phi.transpose() * phi - DMatrix::<f64>::identity(k, k)).amax();
    check(err <= 1e-10, || format!("max |ΦᵀΦ − I| = {err:e}"))
}

fn tail_energy() -> std::result::Result<(), String> {
    let y = model1_snapshots()?;
    let svd = compute_svd(&y.data).map_err(|e| e.to_string())?;
    let k = select_rank(&svd.sigma, EPS_POD).map_err(|e| e.to_string())?;
    let phi = svd.u.columns(0, k).into_owned();
    let residual = &y.data - &phi * (phi.transpose() * &y.data);
    let lhs = residual.norm_squared();
    let tail: f64 = svd.sigma[k..].iter().map(|s| s * s).sum();
    let rel = (lhs - tail).abs() / tail;
    check(rel <= 1e-6, || format!("‖Y − ΦΦᵀY‖² = {lhs:e} vs Σσ² tail = {tail:e}"))
}

fn rbf_exactness() -> std::result::Result<(), String> {
    let y = model1_snapshots()?;
    for kind in KernelKind::ALL {
        let s = Surrogate::train(&y, EPS_POD, kind).map_err(|e| e.to_string())?;
        let a = project_amplitudes(&s.phi, &y.data).map_err(|e| e.to_string())?;
        let scale = a.norm();
        for j in 0..y.n_s() {
            let got = s.coeffs.evaluate(&y.samples.point(j)).map_err(|e| e.to_string())?;
            let err = (got - a.column(j)).norm();
            check(err <= 1e-7 * scale, || format!("{kind} kernel node {j}: error {err:e} vs ‖A‖ {scale:e}"))?;
        }
    }
    Ok(())
}

fn stratum_counts(set: &SampleSet, j: usize) -> Vec<usize> {
    let n = set.len();
    let (lo, hi) = (set.bounds.lower()[j], set.bounds.upper()[j]);
    let mut counts = vec![0; n];
    for i in 0..n {
        let u = (set.points[(i, j)] - lo) / (hi - lo);
        counts[((u * n as f64).floor() as usize).min(n - 1)] += 1;
    }
    counts
}

fn lhs_stratification() -> std::result::Result<(), String> {
    for def in [model1(), model2()] {
        for n_s in [7, 40, 80] {
            let set = lhs_sample(n_s, &def.bounds, SEED).map_err(|e| e.to_string())?;
            for j in 0..set.dim() {
                check(stratum_counts(&set, j).iter().all(|&c| c == 1), || {
                    format!("{}: n_s = {n_s}, dimension {j} not stratified", def.name)
                })?;
            }
        }
    }
    Ok(())
}

fn slhs_mirror_closure() -> std::result::Result<(), String> {
    for def in [model1(), model2()] {
        for n_s in [7, 40, 80] {
            let set = slhs_sample(n_s, &def.bounds, SEED).map_err(|e| e.to_string())?;
            for i in 0..set.len() {
                let p = set.point(i);
                let closed = (0..set.len()).any(|k| {
                    let q = set.point(k);
                    set.bounds.reflect(&q) == p || set.bounds.reflect(&p) == q
                });
                check(closed, || format!("{}: n_s = {n_s}, point {i} has no mirror", def.name))?;
            }
        }
    }
    Ok(())
}

fn quadrature_order() -> std::result::Result<(), String> {
    let err = |n_t: usize| -> std::result::Result<f64, String> {
        let g = TimeGrid::new(0.0, std::f64::consts::PI, n_t).map_err(|e| e.to_string())?;
        let v: Vec<f64> = g.times().iter().map(|t| t.sin()).collect();
        Ok((quadrature(&g, &v).map_err(|e| e.to_string())? - 2.0).abs())
    };
    let ratio = err(33)? / err(65)?;
    check((ratio - 4.0).abs() <= 0.2, || format!("error ratio {ratio}"))
}

fn model1_closed_form() -> std::result::Result<(), String> {
    let def = model1();
    let g = grid(&def);
    let opts = IntegratorOptions::default();
    let traj = integrate(&def, &[0.5, 0.5], &g, &opts).map_err(|e| e.to_string())?;
    for i in 0..g.n_t() {
        let t = g.time(i);
        let y1 = 100.0 * (0.05 * t).exp();
        let y2 = y1 - 20.0 * (-0.02 * t).exp();
        for (got, want) in traj.state(i).iter().zip([y1, y2]) {
            check((got - want).abs() <= 10.0 * opts.rtol * want.abs(), || {
                format!("t = {t}: {got} vs {want}")
            })?;
        }
    }
    Ok(())
}

fn constrained_quadratic() -> std::result::Result<(), String> {
    let bounds = Bounds::new(vec![-3.0; 2], vec![3.0; 2]).map_err(|e| e.to_string())?;
    let r = minimize(NlpSpec {
        problem: |b: &[f64]| {
            Ok(Evaluation {
                objective: (b[0] - 1.0).powi(2) + (b[1] + 2.0).powi(2),
                eq: vec![b[0] + b[1]],
            })
        },
        bounds,
        x0: vec![0.0, 0.0],
        options: NlpOptions::default(),
    })
    .map_err(|e| e.to_string())?;
    let err = (r.b_star[0] - 1.5).abs().max((r.b_star[1] + 1.5).abs());
    check(err <= 1e-3, || format!("b* = {:?}", r.b_star))
}

fn refine_nesting() -> std::result::Result<(), String> {
    let def = model1();
    let cfg = RefineConfig {
        tol: 1e-12,
        max_iters: 4,
        n_s: 20,
        base_seed: SEED,
        ..RefineConfig::default()
    };
    let r = refine_optimize(&def, &cfg).map_err(|e| e.to_string())?;
    check(r.iterations.len() == 4, || format!("{} iterations", r.iterations.len()))?;
    for it in &r.iterations {
        check(it.bounds.is_within(&def.bounds), || format!("iteration {} leaves the box", it.iteration))?;
    }
    for pair in r.iterations.windows(2) {
        for (wa, wb) in pair[0].width.iter().zip(&pair[1].width) {
            check(*wb == wa * cfg.shrink, || format!("width {wa} followed by {wb}"))?;
        }
    }
    Ok(())
}

fn criterion_8() -> Check {
    let results = properties();
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    let detail = if failed.is_empty() {
        format!("{} properties hold", results.len())
    } else {
        failed.join("; ")
    };
    Ok((failed.is_empty(), detail))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Check); 8] = [
        ("rank selection, population dynamics", 60, criterion_1),
        ("rank selection, science policy", 60, criterion_2),
        ("surrogate accuracy, science policy", 600, criterion_3),
        ("surrogate accuracy trend, population dynamics", 600, criterion_4),
        ("refined optimization, science policy", 180, criterion_5),
        ("refined optimization, population dynamics", 300, criterion_6),
        ("surrogate speed, population dynamics", 600, criterion_7),
        ("property suite", 600, criterion_8),
    ];
    let suite = Instant::now();
    let mut all = true;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let clock = Instant::now();
        let outcome = run();
        let elapsed = clock.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (pass, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        let status = if pass { "PASS" } else { "FAIL" };
        let late = if in_time { "" } else { " (over time limit)" };
        println!(
            "{status} criterion {} ({name}): {detail} [{:.2} s{late}]",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    let total = suite.elapsed();
    let within = total <= Duration::from_secs(600);
    println!("suite runtime {:.1} s (limit 600 s)", total.as_secs_f64());
    if all && within {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

