//! Proper orthogonal decomposition of a snapshot matrix.
//!
//! The basis is the leading left singular vectors of `Y`. The rank is the
//! smallest `k` whose cumulative energy `E(k) = Σ_{i≤k} σ_i² / Σ_i σ_i²`
//! reaches `1 − ε²`, and the amplitudes are the orthogonal projection
//! coefficients `A = Φᵀ Y`.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Thin SVD `Y = U diag(σ) Vᵀ` with `σ` sorted nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    /// `m × d`, `d = min(m, n_s)`.
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    /// `n_s × d`.
    pub v: DMatrix<f64>,
}

pub fn compute_svd(y: &DMatrix<f64>) -> Result<Svd> {
    if y.is_empty() {
        return Err(Error::NumericalFailure("cannot decompose an empty matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries"));
    }
    let svd = nalgebra::linalg::SVD::try_new(y.clone(), true, true, f64::EPSILON, 0)
        .ok_or(Error::NumericalFailure("SVD did not converge"))?;
    let u = svd.u.ok_or(Error::NumericalFailure("SVD returned no U"))?;
    let v_t = svd.v_t.ok_or(Error::NumericalFailure("SVD returned no Vᵀ"))?;
    let raw: Vec<f64> = svd.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let sigma = order.iter().map(|&i| raw[i]).collect();
    let u = u.select_columns(&order);
    let v = v_t.transpose().select_columns(&order);
    Ok(Svd { u, sigma, v })
}

/// `E(1), …, E(d)`; all zeros when the spectrum vanishes.
pub fn cumulative_energy(sigma: &[f64]) -> Vec<f64> {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return alloc::vec![0.0; sigma.len()];
    }
    let mut acc = 0.0;
    let mut energy: Vec<f64> = sigma
        .iter()
        .map(|s| {
            acc += s * s;
            acc / total
        })
        .collect();
    if let Some(last) = energy.last_mut() {
        *last = 1.0;
    }
    energy
}

/// Smallest `k` with `E(k) ≥ 1 − eps_pod²`.
pub fn select_rank(sigma: &[f64], eps_pod: f64) -> Result<usize> {
    if !(eps_pod > 0.0 && eps_pod < 1.0) {
        return Err(Error::InvalidConfig("eps_pod must lie in (0, 1)".into()));
    }
    if sigma.is_empty() {
        return Err(Error::NumericalFailure("empty singular value spectrum"));
    }
    if sigma.iter().all(|&s| s == 0.0) {
        return Err(Error::AllZeroSpectrum);
    }
    let threshold = 1.0 - eps_pod * eps_pod;
    let energy = cumulative_energy(sigma);
    Ok(energy
        .iter()
        .position(|&e| e >= threshold)
        .map_or(sigma.len(), |i| i + 1))
}

/// Orthogonal projection coefficients `A = Φᵀ Y`.
pub fn project_amplitudes(phi: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if phi.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            context: "amplitude projection",
            expected: phi.nrows(),
            got: y.nrows(),
        });
    }
    Ok(phi.tr_mul(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// `m × k` orthonormal columns.
    pub phi: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub k: usize,
    pub energy: Vec<f64>,
}

impl PodBasis {
    /// SVD, rank selection and truncation in one step.
    pub fn from_snapshots(y: &DMatrix<f64>, eps_pod: f64) -> Result<Self> {
        let svd = compute_svd(y)?;
        let k = select_rank(&svd.sigma, eps_pod)?;
        Ok(Self::truncate(&svd, k))
    }

    /// Keeps the first `k` modes of a decomposition.
    pub fn truncate(svd: &Svd, k: usize) -> Self {
        let k = k.clamp(1, svd.sigma.len());
        Self {
            phi: svd.u.columns(0, k).into_owned(),
            sigma: svd.sigma.clone(),
            k,
            energy: cumulative_energy(&svd.sigma),
        }
    }
}
