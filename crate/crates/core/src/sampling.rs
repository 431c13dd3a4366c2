//! Design-of-experiments sampling over a parameter box.
//!
//! All strategies draw from `ChaCha8Rng::seed_from_u64(seed)`. The draw order
//! is part of the crate's stability contract:
//!
//! * random sampling draws row by row, dimension by dimension;
//! * Latin hypercube sampling, for each dimension in turn, shuffles the
//!   stratum indices and then draws one jitter per row;
//! * symmetric Latin hypercube sampling, for each dimension in turn, shuffles
//!   the lower-half stratum indices and then draws a flip bit and a jitter per
//!   pair.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problem::Bounds;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Strategy {
    #[cfg_attr(feature = "serde", serde(rename = "RS", alias = "rs"))]
    Random,
    #[cfg_attr(feature = "serde", serde(rename = "LHS", alias = "lhs"))]
    LatinHypercube,
    #[cfg_attr(feature = "serde", serde(rename = "SLHS", alias = "slhs"))]
    SymmetricLatinHypercube,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::LatinHypercube,
        Strategy::SymmetricLatinHypercube,
        Strategy::Random,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Random => "RS",
            Strategy::LatinHypercube => "LHS",
            Strategy::SymmetricLatinHypercube => "SLHS",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label.to_ascii_uppercase().as_str() {
            "RS" => Some(Strategy::Random),
            "LHS" => Some(Strategy::LatinHypercube),
            "SLHS" => Some(Strategy::SymmetricLatinHypercube),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `n_s` parameter vectors (one per row) inside a box.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: DMatrix<f64>,
    pub strategy: Strategy,
    pub seed: u64,
    pub bounds: Bounds,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }
}

pub fn sample(strategy: Strategy, n_s: usize, bounds: &Bounds, seed: u64) -> Result<SampleSet> {
    match strategy {
        Strategy::Random => random_sample(n_s, bounds, seed),
        Strategy::LatinHypercube => lhs_sample(n_s, bounds, seed),
        Strategy::SymmetricLatinHypercube => slhs_sample(n_s, bounds, seed),
    }
}

fn check_count(n_s: usize) -> Result<()> {
    if n_s == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    Ok(())
}

#[inline]
fn place(bounds: &Bounds, j: usize, unit: f64) -> f64 {
    let (lo, hi) = (bounds.lower()[j], bounds.upper()[j]);
    (lo + unit * (hi - lo)).min(hi)
}

/// Independent uniform draws on the box.
pub fn random_sample(n_s: usize, bounds: &Bounds, seed: u64) -> Result<SampleSet> {
    check_count(n_s)?;
    let dim = bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = DMatrix::zeros(n_s, dim);
    for i in 0..n_s {
        for j in 0..dim {
            points[(i, j)] = place(bounds, j, rng.random::<f64>());
        }
    }
    Ok(SampleSet {
        points,
        strategy: Strategy::Random,
        seed,
        bounds: bounds.clone(),
    })
}

/// Latin hypercube: one point per equal-width stratum in every dimension,
/// uniformly jittered inside its stratum.
pub fn lhs_sample(n_s: usize, bounds: &Bounds, seed: u64) -> Result<SampleSet> {
    check_count(n_s)?;
    let dim = bounds.dim();
    let n = n_s as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = DMatrix::zeros(n_s, dim);
    let mut strata: Vec<usize> = (0..n_s).collect();
    for j in 0..dim {
        strata.sort_unstable();
        strata.shuffle(&mut rng);
        for (i, &s) in strata.iter().enumerate() {
            let jitter: f64 = rng.random();
            points[(i, j)] = place(bounds, j, (s as f64 + jitter) / n);
        }
    }
    Ok(SampleSet {
        points,
        strategy: Strategy::LatinHypercube,
        seed,
        bounds: bounds.clone(),
    })
}

/// Symmetric Latin hypercube: `⌊n_s/2⌋` stratified points and their
/// reflections through the box center, plus the center itself when `n_s` is
/// odd. Rows `p` and `p + ⌊n_s/2⌋` are mirror pairs.
pub fn slhs_sample(n_s: usize, bounds: &Bounds, seed: u64) -> Result<SampleSet> {
    check_count(n_s)?;
    let dim = bounds.dim();
    let half = n_s / 2;
    let n = n_s as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = DMatrix::zeros(n_s, dim);
    let mut strata: Vec<usize> = (0..half).collect();
    for j in 0..dim {
        strata.sort_unstable();
        strata.shuffle(&mut rng);
        let (lo, hi) = (bounds.lower()[j], bounds.upper()[j]);
        for (p, &s) in strata.iter().enumerate() {
            let flip: bool = rng.random();
            let s = if flip { n_s - 1 - s } else { s };
            let jitter: f64 = rng.random();
            let x = place(bounds, j, (s as f64 + jitter) / n);
            points[(p, j)] = x;
            points[(p + half, j)] = lo + hi - x;
        }
        if n_s % 2 == 1 {
            points[(n_s - 1, j)] = 0.5 * (lo + hi);
        }
    }
    Ok(SampleSet {
        points,
        strategy: Strategy::SymmetricLatinHypercube,
        seed,
        bounds: bounds.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    // Independent oracle: bucket each coordinate into its equal-width stratum.
    fn stratum_counts(set: &SampleSet, j: usize) -> Vec<usize> {
        let n = set.len();
        let (lo, hi) = (set.bounds.lower()[j], set.bounds.upper()[j]);
        let mut counts = vec![0; n];
        for i in 0..n {
            let u = (set.points[(i, j)] - lo) / (hi - lo);
            let idx = ((u * n as f64).floor() as usize).min(n - 1);
            counts[idx] += 1;
        }
        counts
    }

    fn mirror_closed(set: &SampleSet, tol: f64) -> bool {
        (0..set.len()).all(|i| {
            let target = set.bounds.reflect(&set.point(i));
            (0..set.len()).any(|k| {
                set.point(k)
                    .iter()
                    .zip(&target)
                    .all(|(a, b)| (a - b).abs() <= tol)
            })
        })
    }

    fn model2_box() -> Bounds {
        Bounds::new(
            vec![-0.55, -0.55, -1.037, -1.037],
            vec![-0.3, -0.3, -0.787, -0.787],
        )
        .unwrap()
    }

    #[test]
    fn single_random_point_in_unit_interval() {
        let s = random_sample(1, &Bounds::unit(1).unwrap(), 3).unwrap();
        assert_eq!(s.points.shape(), (1, 1));
        assert!((0.0..=1.0).contains(&s.points[(0, 0)]));
    }

    #[test]
    fn random_sample_mean_is_near_half() {
        let s = random_sample(1000, &Bounds::unit(1).unwrap(), 7).unwrap();
        let mean = s.points.iter().sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn strategies_are_deterministic_and_seed_sensitive() {
        let b = model2_box();
        for strategy in Strategy::ALL {
            let a = sample(strategy, 12, &b, 11).unwrap();
            let again = sample(strategy, 12, &b, 11).unwrap();
            let other = sample(strategy, 12, &b, 12).unwrap();
            assert_eq!(a, again);
            assert_ne!(a.points, other.points);
            assert_eq!(a.points.shape(), (12, 4));
            for i in 0..a.len() {
                assert!(b.contains(&a.point(i)));
            }
        }
    }

    #[test]
    fn lhs_four_points_one_per_quarter() {
        let s = lhs_sample(4, &Bounds::unit(1).unwrap(), 5).unwrap();
        let mut xs: Vec<f64> = s.points.iter().copied().collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, x) in xs.iter().enumerate() {
            assert!(*x >= k as f64 * 0.25 && *x < (k + 1) as f64 * 0.25 + 1e-15);
        }
    }

    #[test]
    fn lhs_two_points_split_each_axis() {
        for seed in 0..20 {
            let s = lhs_sample(2, &Bounds::unit(2).unwrap(), seed).unwrap();
            for j in 0..2 {
                let below = (0..2).filter(|&i| s.points[(i, j)] < 0.5).count();
                assert_eq!(below, 1);
            }
        }
    }

    #[test]
    fn lhs_model2_box_is_stratified() {
        let s = lhs_sample(40, &model2_box(), 2024).unwrap();
        for j in 0..4 {
            assert!(stratum_counts(&s, j).iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn slhs_pair_is_mirrored() {
        let s = slhs_sample(2, &Bounds::unit(1).unwrap(), 9).unwrap();
        assert!((s.points[(0, 0)] + s.points[(1, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn slhs_four_points_two_dims() {
        let s = slhs_sample(4, &Bounds::unit(2).unwrap(), 21).unwrap();
        for i in 0..4 {
            let p = s.point(i);
            let found = (0..4).any(|k| {
                (s.points[(k, 0)] - (1.0 - p[0])).abs() < 1e-15
                    && (s.points[(k, 1)] - (1.0 - p[1])).abs() < 1e-15
            });
            assert!(found);
        }
    }

    #[test]
    fn slhs_model2_box_stratified_and_mirror_closed() {
        for n_s in [40, 41] {
            let s = slhs_sample(n_s, &model2_box(), 77).unwrap();
            for j in 0..4 {
                assert!(stratum_counts(&s, j).iter().all(|&c| c == 1), "n_s={n_s} dim {j}");
            }
            assert!(mirror_closed(&s, 1e-12));
        }
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(lhs_sample(0, &Bounds::unit(2).unwrap(), 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn lhs_and_slhs_invariants(n_s in 1usize..30, dim in 1usize..5, seed in any::<u64>()) {
                let lower: Vec<f64> = (0..dim).map(|j| -1.0 - j as f64).collect();
                let upper: Vec<f64> = (0..dim).map(|j| 2.0 + 0.5 * j as f64).collect();
                let b = Bounds::new(lower, upper).unwrap();
                let lhs = lhs_sample(n_s, &b, seed).unwrap();
                let slhs = slhs_sample(n_s, &b, seed).unwrap();
                for set in [&lhs, &slhs] {
                    prop_assert_eq!(set.points.shape(), (n_s, dim));
                    for i in 0..n_s {
                        prop_assert!(b.contains(&set.point(i)));
                    }
                    for j in 0..dim {
                        prop_assert!(stratum_counts(set, j).iter().all(|&c| c == 1));
                    }
                }
                prop_assert!(mirror_closed(&slhs, 1e-12));
            }
        }
    }
}
