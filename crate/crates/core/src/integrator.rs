//! Adaptive explicit Runge–Kutta integration on a fixed output grid.
//!
//! The stepper is the Dormand–Prince 5(4) pair with local extrapolation and
//! FSAL. Output values between accepted steps come from the pair's
//! fourth-order continuous extension. Controls are evaluated exactly inside
//! every right-hand-side call.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::problem::ProblemDef;
use crate::{Error, Result};

/// Uniform output grid `t0 = times[0] < … < times[n_t - 1] = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    n_t: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, n_t: usize) -> Result<Self> {
        if n_t < 2 {
            return Err(Error::InvalidConfig("time grid needs at least 2 points".into()));
        }
        if !(t0.is_finite() && t_end.is_finite() && t0 < t_end) {
            return Err(Error::InvalidConfig("time grid span must be increasing".into()));
        }
        Ok(Self { t0, t_end, n_t })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn spacing(&self) -> f64 {
        (self.t_end - self.t0) / (self.n_t - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.n_t {
            self.t_end
        } else {
            self.t0 + i as f64 * self.spacing()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t).map(|i| self.time(i)).collect()
    }
}

/// States and controls sampled on a grid; row `i` belongs to `grid.time(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// `n_t × n_y`.
    pub states: DMatrix<f64>,
    /// `n_t × n_u`.
    pub controls: DMatrix<f64>,
    // Row-major copies so that functionals can borrow rows as slices.
    state_rows: Vec<f64>,
    control_rows: Vec<f64>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, states: DMatrix<f64>, controls: DMatrix<f64>) -> Result<Self> {
        if states.nrows() != grid.n_t() || controls.nrows() != grid.n_t() {
            return Err(Error::DimensionMismatch {
                context: "trajectory rows",
                expected: grid.n_t(),
                got: states.nrows().min(controls.nrows()),
            });
        }
        let state_rows = states.transpose().as_slice().to_vec();
        let control_rows = controls.transpose().as_slice().to_vec();
        Ok(Self {
            grid,
            states,
            controls,
            state_rows,
            control_rows,
        })
    }

    /// Builds a trajectory from states, filling controls from the problem's
    /// parameterization at `b`.
    pub fn with_controls(def: &ProblemDef, b: &[f64], grid: TimeGrid, states: DMatrix<f64>) -> Result<Self> {
        let rows = def.control.sample_rows(b, (0..grid.n_t()).map(|i| grid.time(i)))?;
        let controls = DMatrix::from_row_slice(grid.n_t(), def.n_u(), &rows);
        Self::new(grid, states, controls)
    }

    pub fn n_y(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        let n = self.states.ncols();
        &self.state_rows[i * n..(i + 1) * n]
    }

    pub fn control(&self, i: usize) -> &[f64] {
        let n = self.controls.ncols();
        &self.control_rows[i * n..(i + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-8,
            max_steps: 100_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension of order 4.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

struct System<'a> {
    def: &'a ProblemDef,
    b: &'a [f64],
    u: Vec<f64>,
}

impl System<'_> {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.def.control.eval_into(self.b, t, &mut self.u)?;
        (self.def.rhs)(t, y, &self.u, dy);
        if dy.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        Ok(())
    }
}

fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], opts: &IntegratorOptions) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let scale = opts.atol + opts.rtol * a.abs().max(b.abs());
            let r = e / scale;
            r * r
        })
        .sum();
    libm::sqrt(sum / err.len() as f64)
}

/// Starting step from the local derivative scale (Hairer, Nørsett & Wanner).
fn initial_step(
    sys: &mut System<'_>,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let n = y0.len();
    let scaled = |v: &[f64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(y0)
            .map(|(x, y)| {
                let r = x / (opts.atol + opts.rtol * y.abs());
                r * r
            })
            .sum();
        libm::sqrt(s / n as f64)
    };
    let d0 = scaled(y0);
    let d1 = scaled(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    sys.eval(t0 + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        libm::pow(0.01 / d1.max(d2), 1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Integrates the problem's state equation for parameters `b` and returns
/// states and controls on `grid`.
pub fn integrate(def: &ProblemDef, b: &[f64], grid: &TimeGrid, opts: &IntegratorOptions) -> Result<Trajectory> {
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidConfig("integrator tolerances must be positive".into()));
    }
    if b.len() != def.dim() {
        return Err(Error::DimensionMismatch {
            context: "integrate parameters",
            expected: def.dim(),
            got: b.len(),
        });
    }
    if !def.bounds.contains(b) {
        log::warn!("integrating outside the parameter box at {b:?}");
    }
    let states = solve_states(def, b, grid, opts)?;
    Trajectory::with_controls(def, b, *grid, states)
}

fn solve_states(def: &ProblemDef, b: &[f64], grid: &TimeGrid, opts: &IntegratorOptions) -> Result<DMatrix<f64>> {
    let n = def.n_y;
    let (t0, t_end) = (grid.t0(), grid.t_end());
    let span = t_end - t0;
    let mut sys = System {
        def,
        b,
        u: vec![0.0; def.n_u()],
    };

    let mut out = DMatrix::zeros(grid.n_t(), n);
    for (j, v) in def.y0.iter().enumerate() {
        out[(0, j)] = *v;
    }
    let mut next_out = 1;

    let mut t = t0;
    let mut y = def.y0.clone();
    let mut k1 = vec![0.0; n];
    sys.eval(t, &y, &mut k1)?;
    let mut h = initial_step(&mut sys, t, &y, &k1, span, opts)?;

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut dense = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut rejected = false;
    let mut steps = 0usize;

    while next_out < grid.n_t() {
        if steps >= opts.max_steps {
            return Err(Error::TooManySteps {
                t,
                max_steps: opts.max_steps,
            });
        }
        let remaining = t_end - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }

        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        sys.eval(t + C2 * h, &stage, &mut k2)?;
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.eval(t + C3 * h, &stage, &mut k3)?;
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.eval(t + C4 * h, &stage, &mut k4)?;
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.eval(t + C5 * h, &stage, &mut k5)?;
        for i in 0..n {
            stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_next = if last { t_end } else { t + h };
        sys.eval(t_next, &stage, &mut k6)?;
        for i in 0..n {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.eval(t_next, &y_new, &mut k7)?;
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        steps += 1;

        let norm = error_norm(&err, &y, &y_new, opts);
        if !norm.is_finite() {
            h *= MIN_FACTOR;
            rejected = true;
            continue;
        }
        if norm <= 1.0 {
            // Fill every output time inside (t, t_next] from the continuous
            // extension of the accepted step.
            if next_out < grid.n_t() && grid.time(next_out) <= t_next {
                for i in 0..n {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    dense[0][i] = ydiff;
                    dense[1][i] = bspl;
                    dense[2][i] = ydiff - h * k7[i] - bspl;
                    dense[3][i] =
                        h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
            }
            while next_out < grid.n_t() && grid.time(next_out) <= t_next {
                let theta = (grid.time(next_out) - t) / h;
                let theta1 = 1.0 - theta;
                for j in 0..n {
                    out[(next_out, j)] = y[j]
                        + theta
                            * (dense[0][j]
                                + theta1 * (dense[1][j] + theta * (dense[2][j] + theta1 * dense[3][j])));
                }
                if next_out + 1 == grid.n_t() {
                    for j in 0..n {
                        out[(next_out, j)] = y_new[j];
                    }
                }
                next_out += 1;
            }
            t = t_next;
            y.copy_from_slice(&y_new);
            k1.copy_from_slice(&k7);
            let mut factor = SAFETY * libm::pow(norm.max(1e-10), -0.2);
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if rejected {
                factor = factor.min(1.0);
            }
            rejected = false;
            h = (h * factor).min(span);
        } else {
            let factor = (SAFETY * libm::pow(norm, -0.2)).max(MIN_FACTOR);
            h *= factor;
            rejected = true;
        }
    }
    Ok(out)
}


/// Trapezoidal rule for values sampled on `grid`.
pub fn quadrature(grid: &TimeGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.n_t() {
        return Err(Error::DimensionMismatch {
            context: "quadrature samples",
            expected: grid.n_t(),
            got: values.len(),
        });
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    let ends = 0.5 * (values[0] + values[values.len() - 1]);
    Ok(grid.spacing() * (interior + ends))
}
