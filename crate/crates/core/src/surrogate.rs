//! The POD–RBF surrogate `b ↦ Φ D g(b)` and its accuracy metrics.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::integrator::{IntegratorOptions, TimeGrid, Trajectory};
use crate::pod::{compute_svd, project_amplitudes, select_rank, PodBasis};
use crate::problem::{Bounds, ProblemDef};
use crate::rbf::{KernelKind, RbfCoefficients};
use crate::sampling::SampleSet;
use crate::snapshot::{build_snapshots, unstack, SnapshotMatrix, StackLayout};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    /// `m × k` POD basis.
    pub phi: DMatrix<f64>,
    pub coeffs: RbfCoefficients,
    pub grid: TimeGrid,
    pub layout: StackLayout,
    pub training_bounds: Bounds,
    pub eps_pod: f64,
    pub k: usize,
    /// Full singular value spectrum of the training snapshots.
    pub sigma: Vec<f64>,
}

impl Surrogate {
    /// SVD, rank selection, amplitude projection and RBF fit.
    pub fn train(y: &SnapshotMatrix, eps_pod: f64, kind: KernelKind) -> Result<Self> {
        let svd = compute_svd(&y.data)?;
        let k = select_rank(&svd.sigma, eps_pod)?;
        let basis = PodBasis::truncate(&svd, k);
        let amplitudes = project_amplitudes(&basis.phi, &y.data)?;
        let coeffs = RbfCoefficients::fit(y.samples.points.clone(), kind, &amplitudes)?;
        log::debug!(
            "trained surrogate: m = {}, n_s = {}, k = {k}, Gram condition ≈ {:e}",
            y.m(),
            y.n_s(),
            coeffs.condition
        );
        Ok(Self {
            phi: basis.phi,
            coeffs,
            grid: y.grid,
            layout: y.layout,
            training_bounds: y.samples.bounds.clone(),
            eps_pod,
            k,
            sigma: basis.sigma,
        })
    }

    /// Reassembles a surrogate from stored parts, checking shape consistency.
    pub fn from_parts(
        phi: DMatrix<f64>,
        coeffs: RbfCoefficients,
        grid: TimeGrid,
        n_y: usize,
        training_bounds: Bounds,
        eps_pod: f64,
        sigma: Vec<f64>,
    ) -> Result<Self> {
        let layout = StackLayout { n_y, n_t: grid.n_t() };
        let k = phi.ncols();
        let checks = [
            ("basis rows", layout.len(), phi.nrows()),
            ("coefficient rows", k, coeffs.d.nrows()),
            ("coefficient columns", coeffs.n_centers(), coeffs.d.ncols()),
            ("center dimension", training_bounds.dim(), coeffs.dim()),
        ];
        for (context, expected, got) in checks {
            if expected != got {
                return Err(Error::DimensionMismatch { context, expected, got });
            }
        }
        Ok(Self {
            phi,
            coeffs,
            grid,
            layout,
            training_bounds,
            eps_pod,
            k,
            sigma,
        })
    }

    pub fn m(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_s(&self) -> usize {
        self.coeffs.n_centers()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn kind(&self) -> KernelKind {
        self.coeffs.kind
    }

    /// Predicted stacked trajectory. Points outside the training box are
    /// still evaluated but logged as extrapolation.
    pub fn predict(&self, b: &[f64]) -> Result<DVector<f64>> {
        if b.len() == self.dim() && !self.training_bounds.contains(b) {
            log::warn!("surrogate extrapolating outside its training box at {b:?}");
        }
        let amplitudes = self.coeffs.evaluate(b)?;
        Ok(&self.phi * amplitudes)
    }

    /// Predicted states as an `n_t × n_y` matrix.
    pub fn predict_states(&self, b: &[f64]) -> Result<DMatrix<f64>> {
        unstack(self.predict(b)?.as_slice(), self.layout)
    }

    /// Predicted trajectory with controls evaluated from `b`.
    pub fn predict_trajectory(&self, def: &ProblemDef, b: &[f64]) -> Result<Trajectory> {
        let states = self.predict_states(b)?;
        Trajectory::with_controls(def, b, self.grid, states)
    }

    /// Predicts every row of `samples` into the columns of an `m × n` matrix.
    pub fn predict_many(&self, samples: &SampleSet) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.m(), samples.len());
        for i in 0..samples.len() {
            out.set_column(i, &self.predict(&samples.point(i))?);
        }
        Ok(out)
    }

    /// Full-order solves at `test` compared against predictions.
    pub fn test_error(&self, def: &ProblemDef, test: &SampleSet, opts: &IntegratorOptions) -> Result<ErrorReport> {
        let truth = build_snapshots(def, test, &self.grid, opts)?;
        let approx = self.predict_many(test)?;
        error_report(&truth.data, &approx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorReport {
    pub r2: f64,
    pub mae: f64,
    pub mxae: f64,
    pub rmae: f64,
    pub n_g: usize,
    /// Test column holding the largest relative error.
    pub worst_point: usize,
}

/// Accuracy of `y_hat` against `y`, both `m × n_g` with one test point per
/// column.
///
/// * `mae`: mean absolute error over all entries.
/// * `mxae`: maximum absolute error.
/// * `rmae`: maximum of `|y − ŷ| / max(|y|, 1e-8 · max|Y|)`.
/// * `r2`: `1 − Σ|y − ŷ| / Σ|y − ȳ|` with `ȳ` the mean of each entry over
///   the test points.
pub fn error_report(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> Result<ErrorReport> {
    if y.shape() != y_hat.shape() {
        let (context, expected, got) = if y.nrows() != y_hat.nrows() {
            ("error report rows", y.nrows(), y_hat.nrows())
        } else {
            ("error report columns", y.ncols(), y_hat.ncols())
        };
        return Err(Error::DimensionMismatch { context, expected, got });
    }
    let (m, n_g) = y.shape();
    if n_g == 0 || m == 0 {
        return Err(Error::InvalidConfig("error report needs at least one test point".into()));
    }
    let floor = 1e-8 * y.amax();
    let mut abs_sum = 0.0;
    let mut mxae: f64 = 0.0;
    let mut rmae: f64 = 0.0;
    let mut worst_point = 0;
    let mut dev_sum = 0.0;
    for i in 0..m {
        let row = y.row(i);
        let mean = row.sum() / n_g as f64;
        for j in 0..n_g {
            let truth = y[(i, j)];
            let err = (truth - y_hat[(i, j)]).abs();
            abs_sum += err;
            mxae = mxae.max(err);
            let denom = truth.abs().max(floor);
            let rel = if denom > 0.0 { err / denom } else { 0.0 };
            if rel > rmae {
                rmae = rel;
                worst_point = j;
            }
            dev_sum += (truth - mean).abs();
        }
    }
    let r2 = if dev_sum > 0.0 {
        1.0 - abs_sum / dev_sum
    } else if abs_sum == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(ErrorReport {
        r2,
        mae: abs_sum / (m * n_g) as f64,
        mxae,
        rmae,
        n_g,
        worst_point,
    })
}
