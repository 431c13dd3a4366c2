//! Standalone SVG figures.

use std::path::Path;

use nalgebra::DMatrix;
use plotters::prelude::*;

use podrbf_core::integrator::{TimeGrid, Trajectory};
use podrbf_core::pod::cumulative_energy;

use crate::error::CliError;

const SIZE: (u32, u32) = (720, 480);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn color(i: usize) -> RGBColor {
    PALETTE[i % PALETTE.len()]
}

fn draw_err(path: &Path) -> impl Fn(String) -> CliError + '_ {
    move |e| CliError::format(path, format!("plotting failed: {e}"))
}

/// Range padded by 5% so flat series stay visible.
fn padded(values: impl Iterator<Item = f64>) -> std::ops::Range<f64> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad)..(hi + pad)
}

/// Cumulative energy `E(k)` against the mode index.
pub fn energy(path: &Path, sigma: &[f64], k: usize) -> Result<(), CliError> {
    energy_inner(path, sigma, k).map_err(draw_err(path))
}

fn energy_inner(path: &Path, sigma: &[f64], k: usize) -> Result<(), String> {
    let e = cumulative_energy(sigma);
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let y_lo = e.first().copied().unwrap_or(0.0).min(1.0);
    let mut chart = ChartBuilder::on(&root)
        .caption("Cumulative energy of singular values", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.5..(e.len() as f64 + 0.5), padded([y_lo, 1.0].into_iter()))
        .map_err(|e| e.to_string())?;
    chart
        .configure_mesh()
        .x_desc("mode k")
        .y_desc("E(k)")
        .draw()
        .map_err(|e| e.to_string())?;
    let pts: Vec<(f64, f64)> = e.iter().enumerate().map(|(i, v)| (i as f64 + 1.0, *v)).collect();
    chart
        .draw_series(LineSeries::new(pts.clone(), color(0)))
        .map_err(|e| e.to_string())?;
    chart
        .draw_series(pts.iter().map(|&(x, y)| {
            let c = if x as usize == k { color(1) } else { color(0) };
            Circle::new((x, y), 4, c.filled())
        }))
        .map_err(|e| e.to_string())?;
    root.present().map_err(|e| e.to_string())
}

/// Full-order states (lines) against surrogate predictions (markers).
pub fn trajectories(path: &Path, grid: &TimeGrid, actual: &DMatrix<f64>, approx: &DMatrix<f64>) -> Result<(), CliError> {
    trajectories_inner(path, grid, actual, approx).map_err(draw_err(path))
}

fn trajectories_inner(path: &Path, grid: &TimeGrid, actual: &DMatrix<f64>, approx: &DMatrix<f64>) -> Result<(), String> {
    let times = grid.times();
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Original (lines) and surrogate (markers) states", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(grid.t0()..grid.t_end(), padded(actual.iter().chain(approx.iter()).copied()))
        .map_err(|e| e.to_string())?;
    chart
        .configure_mesh()
        .x_desc("t")
        .y_desc("y")
        .draw()
        .map_err(|e| e.to_string())?;
    for j in 0..actual.ncols() {
        let c = color(j);
        chart
            .draw_series(LineSeries::new(times.iter().zip(actual.column(j).iter()).map(|(t, y)| (*t, *y)), c))
            .map_err(|e| e.to_string())?
            .label(format!("y{}", j + 1))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
        chart
            .draw_series(
                times
                    .iter()
                    .zip(approx.column(j).iter())
                    .step_by(2)
                    .map(|(t, y)| Cross::new((*t, *y), 3, c)),
            )
            .map_err(|e| e.to_string())?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| e.to_string())?;
    root.present().map_err(|e| e.to_string())
}

/// Control trajectories of an optimized solution.
pub fn controls(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    controls_inner(path, traj).map_err(draw_err(path))
}

fn controls_inner(path: &Path, traj: &Trajectory) -> Result<(), String> {
    let times = traj.grid.times();
    let u = &traj.controls;
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Optimal control", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(traj.grid.t0()..traj.grid.t_end(), padded(u.iter().copied()))
        .map_err(|e| e.to_string())?;
    chart
        .configure_mesh()
        .x_desc("t")
        .y_desc("u")
        .draw()
        .map_err(|e| e.to_string())?;
    for j in 0..u.ncols() {
        let c = color(j);
        chart
            .draw_series(LineSeries::new(times.iter().zip(u.column(j).iter()).map(|(t, v)| (*t, *v)), c))
            .map_err(|e| e.to_string())?
            .label(format!("u{}", j + 1))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| e.to_string())?;
    root.present().map_err(|e| e.to_string())
}
