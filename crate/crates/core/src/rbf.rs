//! Spline radial basis functions: kernels, Gram matrix, coefficient solve.
//!
//! The interpolant of the amplitude field is `a(b) ≈ D g(b)` with
//! `g_j(b) = φ(‖b − b_j‖)` and no polynomial tail.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Condition estimate above which the Gram solve is reported as unreliable.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum KernelKind {
    /// `φ(r) = r`
    #[cfg_attr(feature = "serde", serde(alias = "linear"))]
    LinearSpline,
    /// `φ(r) = r³`
    #[cfg_attr(feature = "serde", serde(alias = "cubic"))]
    CubicSpline,
}

impl KernelKind {
    pub const ALL: [KernelKind; 2] = [KernelKind::LinearSpline, KernelKind::CubicSpline];

    pub fn label(self) -> &'static str {
        match self {
            KernelKind::LinearSpline => "linear",
            KernelKind::CubicSpline => "cubic",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label.to_ascii_lowercase().as_str() {
            "linear" | "linear-spline" => Some(KernelKind::LinearSpline),
            "cubic" | "cubic-spline" => Some(KernelKind::CubicSpline),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, r: f64) -> f64 {
        match self {
            KernelKind::LinearSpline => r,
            KernelKind::CubicSpline => r * r * r,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn kernel_eval(kind: KernelKind, r: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(Error::NegativeRadius(r));
    }
    Ok(kind.apply(r))
}

#[inline]
fn distance(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    libm::sqrt(a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn bbox_diameter(centers: &DMatrix<f64>) -> f64 {
    let sq: f64 = centers
        .column_iter()
        .map(|c| {
            let w = c.max() - c.min();
            w * w
        })
        .sum();
    libm::sqrt(sq)
}

/// `G[i][j] = φ(‖b_i − b_j‖)` for centers stored one per row.
///
/// Centers closer than `1e-12` times the diameter of their bounding box are
/// rejected as duplicates.
pub fn gram_matrix(centers: &DMatrix<f64>, kind: KernelKind) -> Result<DMatrix<f64>> {
    let n = centers.nrows();
    let threshold = 1e-12 * bbox_diameter(centers);
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = distance(centers.row(i).iter().copied(), centers.row(j).iter().copied());
            if r <= threshold {
                return Err(Error::DuplicateCenters { first: i, second: j });
            }
            let v = kind.apply(r);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Kernel values between `b` and every center.
pub fn g_vector(b: &[f64], centers: &DMatrix<f64>, kind: KernelKind) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(centers.nrows());
    g_vector_into(b, centers, kind, &mut out)?;
    Ok(out)
}

pub fn g_vector_into(b: &[f64], centers: &DMatrix<f64>, kind: KernelKind, out: &mut DVector<f64>) -> Result<()> {
    if b.len() != centers.ncols() {
        return Err(Error::DimensionMismatch {
            context: "RBF query point",
            expected: centers.ncols(),
            got: b.len(),
        });
    }
    if out.len() != centers.nrows() {
        return Err(Error::DimensionMismatch {
            context: "RBF kernel vector",
            expected: centers.nrows(),
            got: out.len(),
        });
    }
    out.fill(0.0);
    for (col, &x) in centers.column_iter().zip(b) {
        for (acc, c) in out.iter_mut().zip(col.iter()) {
            let d = x - c;
            *acc += d * d;
        }
    }
    for v in out.iter_mut() {
        *v = kind.apply(libm::sqrt(*v));
    }
    Ok(())
}

/// Result of [`fit_coefficients`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSolve {
    /// `k × n_s`.
    pub d: DMatrix<f64>,
    /// `‖G‖₁ ‖G⁻¹‖₁`.
    pub condition: f64,
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `G dᵢ = aᵢ` for every amplitude row `aᵢ` with a pivoted LU
/// factorization and checks the residual of each solve.
pub fn fit_coefficients(g: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<CoefficientSolve> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "Gram matrix columns",
            expected: n,
            got: g.ncols(),
        });
    }
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "amplitude columns",
            expected: n,
            got: a.ncols(),
        });
    }
    let lu = g.clone().lu();
    let inverse = lu.try_inverse().ok_or(Error::SingularGram)?;
    let condition = norm1(g) * norm1(&inverse);
    if !(condition < ILL_CONDITIONED) {
        log::warn!("RBF Gram matrix is ill-conditioned (estimate {condition:e})");
    }
    if a.nrows() == 0 {
        return Ok(CoefficientSolve {
            d: DMatrix::zeros(0, n),
            condition,
        });
    }

    let rhs = a.transpose();
    let mut x = lu.solve(&rhs).ok_or(Error::SingularGram)?;
    // One round of iterative refinement tightens the residual on poorly
    // scaled systems.
    let r = &rhs - g * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let residual = &rhs - g * &x;
    for (col, res) in rhs.column_iter().zip(residual.column_iter()) {
        let bound = 1e-8 * col.norm();
        let r = res.norm();
        if r > bound && r > 0.0 {
            return Err(Error::ResidualTooLarge { residual: r, bound });
        }
    }
    Ok(CoefficientSolve {
        d: x.transpose(),
        condition,
    })
}

/// A fitted interpolant `b ↦ D g(b)` over fixed centers.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfCoefficients {
    /// `k × n_s`.
    pub d: DMatrix<f64>,
    /// `n_s × dim`, one center per row.
    pub centers: DMatrix<f64>,
    pub kind: KernelKind,
    pub condition: f64,
}

impl RbfCoefficients {
    pub fn fit(centers: DMatrix<f64>, kind: KernelKind, amplitudes: &DMatrix<f64>) -> Result<Self> {
        let g = gram_matrix(&centers, kind)?;
        let CoefficientSolve { d, condition } = fit_coefficients(&g, amplitudes)?;
        Ok(Self {
            d,
            centers,
            kind,
            condition,
        })
    }

    pub fn n_centers(&self) -> usize {
        self.centers.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn evaluate(&self, b: &[f64]) -> Result<DVector<f64>> {
        let g = g_vector(b, &self.centers, self.kind)?;
        Ok(&self.d * g)
    }

    pub fn center(&self, j: usize) -> Vec<f64> {
        self.centers.row(j).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_eval(KernelKind::LinearSpline, 0.0).unwrap(), 0.0);
        assert_eq!(kernel_eval(KernelKind::CubicSpline, 2.0).unwrap(), 8.0);
        assert_eq!(kernel_eval(KernelKind::CubicSpline, 0.5).unwrap(), 0.125);
        assert!(matches!(
            kernel_eval(KernelKind::LinearSpline, -1.0),
            Err(Error::NegativeRadius(_))
        ));
    }

    #[test]
    fn gram_examples() {
        let c = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let g = gram_matrix(&c, KernelKind::LinearSpline).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let c = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 3.0]);
        let g = gram_matrix(&c, KernelKind::CubicSpline).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 27.0, 1.0, 0.0, 8.0, 27.0, 8.0, 0.0]);
        assert_eq!(g, expected);
    }

    #[test]
    fn duplicate_centers_named() {
        let c = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            gram_matrix(&c, KernelKind::LinearSpline),
            Err(Error::DuplicateCenters { first: 1, second: 2 })
        );
    }

    #[test]
    fn two_by_two_solve() {
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let sol = fit_coefficients(&g, &a).unwrap();
        assert!((sol.d[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((sol.d[(0, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_amplitudes_give_empty_coefficients() {
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let sol = fit_coefficients(&g, &DMatrix::zeros(0, 2)).unwrap();
        assert_eq!(sol.d.shape(), (0, 2));
    }

    #[test]
    fn singular_gram_detected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            fit_coefficients(&g, &DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
            Err(Error::SingularGram)
        );
    }

    #[test]
    fn g_vector_examples() {
        let c = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let lin = g_vector(&[0.5], &c, KernelKind::LinearSpline).unwrap();
        assert_eq!(lin.as_slice(), &[0.5, 0.5]);
        let cub = g_vector(&[0.5], &c, KernelKind::CubicSpline).unwrap();
        assert_eq!(cub.as_slice(), &[0.125, 0.125]);
        assert!(g_vector(&[0.5, 0.1], &c, KernelKind::CubicSpline).is_err());

        let g = gram_matrix(&c, KernelKind::CubicSpline).unwrap();
        assert_eq!(g_vector(&[1.0], &c, KernelKind::CubicSpline).unwrap(), g.row(1).transpose());
    }

    fn random_centers(n: usize, dim: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, dim, |_, _| rng.random::<f64>())
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        for kind in KernelKind::ALL {
            let centers = random_centers(40, 3, 8);
            let amps = DMatrix::from_fn(4, 40, |i, j| {
                let p = centers.row(j);
                (i as f64 + 1.0) * (p[0] - 2.0 * p[1] * p[2]) + libm::sin(3.0 * p[0])
            });
            let fit = RbfCoefficients::fit(centers.clone(), kind, &amps).unwrap();
            let scale = amps.norm();
            for j in 0..40 {
                let got = fit.evaluate(&fit.center(j)).unwrap();
                let diff = (got - amps.column(j)).amax();
                assert!(diff <= 1e-7 * scale, "{kind}: {diff}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn kernels_strictly_increasing(r in 1e-6f64..100.0, dr in 1e-6f64..10.0) {
                for kind in KernelKind::ALL {
                    prop_assert!(kernel_eval(kind, r + dr).unwrap() > kernel_eval(kind, r).unwrap());
                }
            }

            #[test]
            fn gram_is_symmetric_zero_diagonal(seed in any::<u64>(), n in 1usize..15, dim in 1usize..4) {
                let centers = random_centers(n, dim, seed);
                for kind in KernelKind::ALL {
                    let g = gram_matrix(&centers, kind).unwrap();
                    prop_assert_eq!(&g, &g.transpose());
                    prop_assert!(g.diagonal().iter().all(|&v| v == 0.0));
                }
            }

            #[test]
            fn g_vector_translation_invariant(
                seed in any::<u64>(),
                shift in prop::collection::vec(-10.0f64..10.0, 2),
                q in prop::collection::vec(0.0f64..1.0, 2),
            ) {
                let centers = random_centers(6, 2, seed);
                let mut moved = centers.clone();
                for mut row in moved.row_iter_mut() {
                    row[0] += shift[0];
                    row[1] += shift[1];
                }
                let q2 = vec![q[0] + shift[0], q[1] + shift[1]];
                let a = g_vector(&q, &centers, KernelKind::LinearSpline).unwrap();
                let b = g_vector(&q2, &moved, KernelKind::LinearSpline).unwrap();
                prop_assert!((a - b).amax() <= 1e-12 * (1.0 + shift[0].abs() + shift[1].abs()));
            }
        }
    }
}
