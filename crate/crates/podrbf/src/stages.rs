//! Pipeline stages. Each stage reads its inputs from the output directory
//! and writes its artifacts back there.

use std::fmt;
use std::path::{Path, PathBuf};

use podrbf_core::integrator::{integrate, IntegratorOptions, TimeGrid, Trajectory};
use podrbf_core::optimizer::{criterion_original, criterion_surrogate, optimize_original, optimize_surrogate};
use podrbf_core::problem::ProblemDef;
use podrbf_core::refine::{refine_optimize, relative_gap};
use podrbf_core::sampling::{lhs_sample, sample, SampleSet};
use podrbf_core::snapshot::{build_snapshots, SnapshotMatrix};
use podrbf_core::surrogate::{error_report, Surrogate};

use crate::config::{OptPath, RunConfig};
use crate::error::CliError;
use crate::report::{ErrorReportJson, OptReport, PathReport, RefineTrace, SweepRow};
use crate::{formats, plot};

pub const SAMPLES: &str = "samples.csv";
pub const SNAPSHOTS_BIN: &str = "snapshots.bin";
pub const SNAPSHOTS_CSV: &str = "snapshots.csv";
pub const SURROGATE: &str = "surrogate.bin";
pub const SPECTRUM: &str = "spectrum.csv";
pub const ENERGY_SVG: &str = "energy.svg";
pub const ERROR_REPORT: &str = "error_report.json";
pub const TRAJECTORIES_SVG: &str = "trajectories.svg";
pub const SWEEP: &str = "rmae_sweep.csv";
pub const OPTRESULT: &str = "optresult.json";
pub const OPTIMAL_TRAJECTORY: &str = "optimal_trajectory.csv";
pub const CONTROL_SVG: &str = "control.svg";
pub const REFINE_TRACE: &str = "refine_trace.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Sample,
    Snapshot,
    Train,
    Evaluate,
    Optimize,
    Refine,
}

impl Stage {
    pub const PIPELINE: [Stage; 6] = [
        Stage::Sample,
        Stage::Snapshot,
        Stage::Train,
        Stage::Evaluate,
        Stage::Optimize,
        Stage::Refine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Sample => "sample",
            Stage::Snapshot => "snapshot",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Optimize => "optimize",
            Stage::Refine => "refine",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: CliError,
}

impl StageError {
    pub fn exit_code(&self) -> u8 {
        self.source.exit_code()
    }
}

/// Everything a stage needs: the parsed configuration, the problem it
/// defines and the output directory.
pub struct Context {
    pub cfg: RunConfig,
    pub def: ProblemDef,
    pub grid: TimeGrid,
    pub out: PathBuf,
    pub deterministic: bool,
}

impl Context {
    pub fn new(cfg: RunConfig, deterministic: bool) -> Result<Self, CliError> {
        let def = cfg.problem()?;
        let grid = cfg.grid(&def)?;
        let out = cfg.output.dir.clone();
        std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
        Ok(Self {
            cfg,
            def,
            grid,
            out,
            deterministic,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn opts(&self) -> IntegratorOptions {
        self.cfg.integrator.options()
    }

    fn input(&self, name: &str, producer: Stage) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        if path.exists() {
            Ok(path)
        } else {
            Err(CliError::Config(format!(
                "{} not found; run the `{producer}` stage first",
                path.display()
            )))
        }
    }

    fn load_snapshots(&self) -> Result<SnapshotMatrix, CliError> {
        let samples = formats::read_samples(&self.input(SAMPLES, Stage::Sample)?)?;
        let data = formats::read_snapshots_bin(&self.input(SNAPSHOTS_BIN, Stage::Snapshot)?)?;
        Ok(SnapshotMatrix::from_parts(data, self.grid, samples, self.def.n_y)?)
    }

    fn load_surrogate(&self) -> Result<Surrogate, CliError> {
        let s = formats::read_surrogate(&self.input(SURROGATE, Stage::Train)?)?;
        if s.dim() != self.def.dim() || s.layout.n_y != self.def.n_y || s.grid != self.grid {
            return Err(CliError::Config(
                "stored surrogate does not match the configured problem or grid; rerun `train`".into(),
            ));
        }
        Ok(s)
    }

    pub fn run(&self, stage: Stage) -> Result<(), StageError> {
        let result = match stage {
            Stage::Config => Ok(()),
            Stage::Sample => self.sample().map(drop),
            Stage::Snapshot => self.snapshot().map(drop),
            Stage::Train => self.train().map(drop),
            Stage::Evaluate => self.evaluate(),
            Stage::Optimize => self.optimize(),
            Stage::Refine => self.refine(),
        };
        result.map_err(|source| StageError { stage, source })
    }

    pub fn pipeline(&self) -> Result<(), StageError> {
        Stage::PIPELINE.iter().try_for_each(|&s| self.run(s))
    }

    pub fn sample(&self) -> Result<SampleSet, CliError> {
        let s = &self.cfg.sampling;
        let set = sample(s.strategy, s.n_s, &self.def.bounds, s.seed)?;
        formats::write_samples(&self.path(SAMPLES), &set)?;
        log::info!("wrote {} {} samples", set.len(), set.strategy);
        Ok(set)
    }

    pub fn snapshot(&self) -> Result<SnapshotMatrix, CliError> {
        let samples = formats::read_samples(&self.input(SAMPLES, Stage::Sample)?)?;
        let y = build_snapshots(&self.def, &samples, &self.grid, &self.opts())?;
        formats::write_snapshots_bin(&self.path(SNAPSHOTS_BIN), &y.data)?;
        formats::write_snapshots_csv(&self.path(SNAPSHOTS_CSV), &y)?;
        log::info!("wrote {} × {} snapshot matrix", y.m(), y.n_s());
        Ok(y)
    }

    pub fn train(&self) -> Result<Surrogate, CliError> {
        let y = self.load_snapshots()?;
        let s = Surrogate::train(&y, self.cfg.surrogate.eps_pod, self.cfg.surrogate.kernel)?;
        formats::write_surrogate(&self.path(SURROGATE), &s)?;
        formats::write_spectrum(&self.path(SPECTRUM), &s.sigma)?;
        plot::energy(&self.path(ENERGY_SVG), &s.sigma, s.k)?;
        log::info!("trained surrogate with k = {}", s.k);
        Ok(s)
    }

    pub fn evaluate(&self) -> Result<(), CliError> {
        let s = self.load_surrogate()?;
        let cfg = &self.cfg;
        let test_seed = cfg.test_seed();
        let test = lhs_sample(cfg.evaluate.n_g, &self.def.bounds, test_seed)?;
        let truth = build_snapshots(&self.def, &test, &self.grid, &self.opts())?;
        let report = error_report(&truth.data, &s.predict_many(&test)?)?;
        let worst = test.point(report.worst_point);
        let json = ErrorReportJson::new(
            &self.def.name,
            cfg.sampling.strategy,
            s.kind(),
            s.n_s(),
            s.k,
            s.eps_pod,
            test_seed,
            &report,
            worst.clone(),
        );
        formats::write_json(&self.path(ERROR_REPORT), &json)?;
        let actual = integrate(&self.def, &worst, &self.grid, &self.opts())?;
        plot::trajectories(&self.path(TRAJECTORIES_SVG), &self.grid, &actual.states, &s.predict_states(&worst)?)?;

        if let Some(sweep) = &cfg.evaluate.sweep {
            let mut rows = Vec::new();
            for &strategy in &sweep.strategies {
                for &kernel in &sweep.kernels {
                    for &n_s in &sweep.n_s {
                        let samples = sample(strategy, n_s, &self.def.bounds, cfg.sampling.seed)?;
                        let y = build_snapshots(&self.def, &samples, &self.grid, &self.opts())?;
                        let trial = Surrogate::train(&y, cfg.surrogate.eps_pod, kernel)?;
                        let r = error_report(&truth.data, &trial.predict_many(&test)?)?;
                        rows.push(SweepRow {
                            strategy: strategy.label(),
                            kernel: kernel.label(),
                            n_s,
                            k: trial.k,
                            rmae: r.rmae,
                            mae: r.mae,
                            mxae: r.mxae,
                        });
                    }
                }
            }
            formats::write_table(&self.path(SWEEP), &rows)?;
        }
        Ok(())
    }

    pub fn optimize(&self) -> Result<(), CliError> {
        let def = &self.def;
        let nlp = &self.cfg.optimizer;
        let mut paths = Vec::new();
        let mut first: Option<Trajectory> = None;
        for &path in &self.cfg.optimize.paths {
            let report = match path {
                OptPath::Surrogate => {
                    let s = self.load_surrogate()?;
                    let r = optimize_surrogate(&s, def, &def.bounds, &def.nominal, nlp)?;
                    let truth = criterion_original(def, &r.b_star, &self.grid, &self.opts())?;
                    let hat = criterion_surrogate(&s, def, &r.b_star)?;
                    let mut p = PathReport::new("surrogate", &r, truth.psi0, truth.psis.clone(), self.deterministic);
                    p.epsilon = Some(relative_gap(truth.psi0, hat.psi0));
                    p.psi0_hat = Some(hat.psi0);
                    p.psis_hat = Some(hat.psis);
                    p
                }
                OptPath::Original => {
                    let r = optimize_original(def, &self.grid, &self.opts(), &def.bounds, &def.nominal, nlp)?;
                    let truth = criterion_original(def, &r.b_star, &self.grid, &self.opts())?;
                    PathReport::new("original", &r, truth.psi0, truth.psis, self.deterministic)
                }
            };
            if first.is_none() {
                first = Some(integrate(def, &report.b_star, &self.grid, &self.opts())?);
            }
            paths.push(report);
        }
        let report = OptReport {
            problem: def.name.clone(),
            sense: def.sense,
            b0: def.nominal.clone(),
            bounds: (&def.bounds).into(),
            paths,
        };
        formats::write_json(&self.path(OPTRESULT), &report)?;
        if let Some(traj) = first {
            formats::write_trajectory(&self.path(OPTIMAL_TRAJECTORY), &traj)?;
            plot::controls(&self.path(CONTROL_SVG), &traj)?;
        }
        Ok(())
    }

    pub fn refine(&self) -> Result<(), CliError> {
        let r = refine_optimize(&self.def, &self.cfg.refine_config())?;
        let trace = RefineTrace::new(&self.def.name, self.def.sense, &r, self.deterministic);
        formats::write_json(&self.path(REFINE_TRACE), &trace)
    }
}

/// Artifacts written by a full pipeline run with no sweep configured.
pub fn pipeline_artifacts() -> [&'static str; 12] {
    [
        SAMPLES,
        SNAPSHOTS_BIN,
        SNAPSHOTS_CSV,
        SURROGATE,
        SPECTRUM,
        ENERGY_SVG,
        ERROR_REPORT,
        TRAJECTORIES_SVG,
        OPTRESULT,
        OPTIMAL_TRAJECTORY,
        CONTROL_SVG,
        REFINE_TRACE,
    ]
}

/// Convenience for tests and callers that hold a path rather than a context.
pub fn artifact(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
