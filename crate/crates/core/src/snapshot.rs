//! Full-order evaluations assembled into the snapshot matrix.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::integrator::{integrate, IntegratorOptions, TimeGrid, Trajectory};
use crate::problem::ProblemDef;
use crate::sampling::SampleSet;
use crate::{Error, Result};

/// Index map between a stacked vector and `(time index, state index)`.
///
/// Stacking is time-major: entry `i * n_y + j` holds state `j` at time `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StackLayout {
    pub n_y: usize,
    pub n_t: usize,
}

impl StackLayout {
    pub fn len(&self) -> usize {
        self.n_y * self.n_t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, time: usize, state: usize) -> usize {
        time * self.n_y + state
    }

    /// Inverse of [`StackLayout::index`].
    #[inline]
    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.n_y, index % self.n_y)
    }
}

/// Stacks `states` (`n_t × n_y`) into one time-major column.
pub fn stack(traj: &Trajectory) -> DVector<f64> {
    stack_states(&traj.states)
}

pub fn stack_states(states: &DMatrix<f64>) -> DVector<f64> {
    let (n_t, n_y) = states.shape();
    DVector::from_fn(n_t * n_y, |k, _| states[(k / n_y, k % n_y)])
}

/// Inverse of [`stack`].
pub fn unstack(column: &[f64], layout: StackLayout) -> Result<DMatrix<f64>> {
    if column.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            context: "unstack",
            expected: layout.len(),
            got: column.len(),
        });
    }
    Ok(DMatrix::from_row_slice(layout.n_t, layout.n_y, column))
}

/// `Y ∈ R^{m × n_s}` with `m = n_y · n_t`; column `i` is the stacked solution
/// for sample row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub data: DMatrix<f64>,
    pub grid: TimeGrid,
    pub samples: SampleSet,
    pub layout: StackLayout,
}

impl SnapshotMatrix {
    /// Wraps an existing matrix, e.g. one loaded from disk.
    pub fn from_parts(data: DMatrix<f64>, grid: TimeGrid, samples: SampleSet, n_y: usize) -> Result<Self> {
        let layout = StackLayout { n_y, n_t: grid.n_t() };
        if data.nrows() != layout.len() {
            return Err(Error::DimensionMismatch {
                context: "snapshot rows",
                expected: layout.len(),
                got: data.nrows(),
            });
        }
        if data.ncols() != samples.len() {
            return Err(Error::DimensionMismatch {
                context: "snapshot columns",
                expected: samples.len(),
                got: data.ncols(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("snapshot matrix has non-finite entries"));
        }
        Ok(Self {
            data,
            grid,
            samples,
            layout,
        })
    }

    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_s(&self) -> usize {
        self.data.ncols()
    }
}

fn solve_column(def: &ProblemDef, samples: &SampleSet, i: usize, grid: &TimeGrid, opts: &IntegratorOptions) -> Result<DVector<f64>> {
    integrate(def, &samples.point(i), grid, opts)
        .map(|t| stack(&t))
        .map_err(|e| Error::Snapshot {
            index: i,
            source: Box::new(e),
        })
}

fn assemble(
    columns: Vec<Result<DVector<f64>>>,
    def: &ProblemDef,
    samples: &SampleSet,
    grid: &TimeGrid,
) -> Result<SnapshotMatrix> {
    let m = def.n_y * grid.n_t();
    let mut data = DMatrix::zeros(m, samples.len());
    // The first failing sample (in sample order) is reported.
    for (i, col) in columns.into_iter().enumerate() {
        data.set_column(i, &col?);
    }
    SnapshotMatrix::from_parts(data, *grid, samples.clone(), def.n_y)
}

fn check_inputs(def: &ProblemDef, samples: &SampleSet) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("sample set is empty".into()));
    }
    if samples.dim() != def.dim() {
        return Err(Error::DimensionMismatch {
            context: "sample dimension",
            expected: def.dim(),
            got: samples.dim(),
        });
    }
    Ok(())
}

/// Builds the snapshot matrix one sample at a time.
pub fn build_snapshots_serial(
    def: &ProblemDef,
    samples: &SampleSet,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<SnapshotMatrix> {
    check_inputs(def, samples)?;
    let columns = (0..samples.len())
        .map(|i| solve_column(def, samples, i, grid, opts))
        .collect();
    assemble(columns, def, samples, grid)
}

/// Builds the snapshot matrix, solving samples in parallel on the current
/// rayon pool when the `std` feature is enabled. Column order always follows
/// sample order, and each column is computed independently, so the result is
/// bit-identical to [`build_snapshots_serial`].
pub fn build_snapshots(
    def: &ProblemDef,
    samples: &SampleSet,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<SnapshotMatrix> {
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        check_inputs(def, samples)?;
        let columns: Vec<_> = (0..samples.len())
            .into_par_iter()
            .map(|i| solve_column(def, samples, i, grid, opts))
            .collect();
        assemble(columns, def, samples, grid)
    }
    #[cfg(not(feature = "std"))]
    {
        build_snapshots_serial(def, samples, grid, opts)
    }
}
