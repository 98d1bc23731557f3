//! Synthetic anomalies used as the positive class during training.
//!
//! Two generators work in normalized feature space: uniform draws from the
//! padded cube `[-eps, 1 + eps]^d`, and subspace perturbation, which adds
//! `eps * N(0, 1)` noise to a Bernoulli(p)-masked subset of the coordinates of
//! a randomly chosen training row.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeMix {
    UniformOnly,
    SubspaceOnly,
    #[default]
    Mixed,
}

impl NegativeMix {
    pub fn name(self) -> &'static str {
        match self {
            NegativeMix::UniformOnly => "uniform",
            NegativeMix::SubspaceOnly => "subspace",
            NegativeMix::Mixed => "mixed",
        }
    }
}

impl fmt::Display for NegativeMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NegativeMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(NegativeMix::UniformOnly),
            "subspace" => Ok(NegativeMix::SubspaceOnly),
            "mixed" => Ok(NegativeMix::Mixed),
            other => Err(Error::InvalidConfig(format!(
                "unknown negative mix {other:?} (expected uniform, subspace or mixed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeConfig {
    /// Cube padding for uniform negatives and noise scale for subspace ones.
    pub epsilon: f64,
    /// Probability that a coordinate is perturbed.
    pub subspace_prob: f64,
    /// Negatives per normal row.
    pub ratio: f64,
    pub mix: NegativeMix,
    pub seed: u64,
}

impl Default for NegativeConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            subspace_prob: 0.3,
            ratio: 1.0,
            mix: NegativeMix::Mixed,
            seed: 0,
        }
    }
}

impl NegativeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("negative epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.subspace_prob > 0.0 && self.subspace_prob <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "subspace probability must be in (0, 1], got {}",
                self.subspace_prob
            )));
        }
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::InvalidConfig(format!("negative ratio must be > 0, got {}", self.ratio)));
        }
        Ok(())
    }

    /// `(uniform, subspace)` counts for `n_normal` rows.
    pub fn counts(&self, n_normal: usize) -> (usize, usize) {
        let total = (self.ratio * n_normal as f64).round() as usize;
        match self.mix {
            NegativeMix::UniformOnly => (total, 0),
            NegativeMix::SubspaceOnly => (0, total),
            NegativeMix::Mixed => (total / 2, total - total / 2),
        }
    }
}

/// `count` rows drawn uniformly from `[-epsilon, 1 + epsilon]^d`.
pub fn sample_uniform<R: Rng + ?Sized>(count: usize, d: usize, epsilon: f64, rng: &mut R) -> Array2<f64> {
    let dist = Uniform::new_inclusive(-epsilon, 1.0 + epsilon);
    Array2::from_shape_simple_fn((count, d), || dist.sample(rng))
}

/// `count` perturbed copies of uniformly chosen training rows. Each copy
/// draws a fresh mask; unmasked coordinates equal the source row exactly.
pub fn sample_subspace<R: Rng + ?Sized>(
    train: ArrayView2<'_, f64>,
    count: usize,
    epsilon: f64,
    p: f64,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if train.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = train.ncols();
    let mut out = Array2::zeros((count, d));
    for mut row in out.rows_mut() {
        let src = rng.gen_range(0..train.nrows());
        row.assign(&train.row(src));
        for v in row.iter_mut() {
            let masked = rng.gen_bool(p);
            let z: f64 = StandardNormal.sample(rng);
            if masked {
                *v += epsilon * z;
            }
        }
    }
    Ok(out)
}

/// Negatives for one partition: the uniform rows first, then the subspace
/// rows, both drawn from a single stream of `cfg.seed` selected by `stream`.
pub fn build_negative_set(train: ArrayView2<'_, f64>, cfg: &NegativeConfig, stream: u64) -> Result<Array2<f64>> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, stream);
    let (n_uniform, n_subspace) = cfg.counts(train.nrows());
    let uniform = sample_uniform(n_uniform, train.ncols(), cfg.epsilon, &mut rng);
    let subspace = if n_subspace > 0 {
        sample_subspace(train, n_subspace, cfg.epsilon, cfg.subspace_prob, &mut rng)?
    } else {
        Array2::zeros((0, train.ncols()))
    };
    concatenate(Axis(0), &[uniform.view(), subspace.view()]).map_err(|e| Error::InvalidConfig(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn uniform_bounds_and_mean() {
        let mut r = stream(11, 0);
        assert_eq!(sample_uniform(0, 3, 0.1, &mut r).dim(), (0, 3));
        let s = sample_uniform(10_000, 2, 0.1, &mut r);
        assert!(s.iter().all(|&v| (-0.1..=1.1).contains(&v)));
        for col in s.columns() {
            let mean = col.mean().unwrap();
            assert!((mean - 0.5).abs() < 0.02, "{mean}");
        }
        let tight = sample_uniform(1000, 2, 0.0, &mut r);
        assert!(tight.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn subspace_rows_keep_unmasked_coordinates() {
        // Every training value is unique, so an unperturbed coordinate names
        // its source row.
        let train = Array2::from_shape_fn((20, 5), |(i, j)| (i * 5 + j) as f64 / 100.0);
        let mut r = stream(3, 0);
        let s = sample_subspace(train.view(), 2000, 0.1, 0.3, &mut r).unwrap();
        let mut kept = 0usize;
        for row in s.rows() {
            let sources: std::collections::BTreeSet<usize> = row
                .iter()
                .enumerate()
                .filter_map(|(j, v)| (0..20).find(|&i| train[[i, j]] == *v))
                .collect();
            assert!(sources.len() <= 1, "coordinates from several rows: {sources:?}");
            kept += row
                .iter()
                .enumerate()
                .filter(|(j, v)| (0..20).any(|i| train[[i, *j]] == **v))
                .count();
        }
        let frac = kept as f64 / s.len() as f64;
        assert!((frac - 0.7).abs() < 0.02, "{frac}");

        // An all-zero mask or zero noise reproduces the source row.
        for (eps, p) in [(0.1, 0.0), (0.0, 1.0)] {
            let same = sample_subspace(train.view(), 50, eps, p, &mut r).unwrap();
            for row in same.rows() {
                assert!(train.rows().into_iter().any(|t| t == row));
            }
        }
        assert!(sample_subspace(Array2::<f64>::zeros((0, 2)).view(), 1, 0.1, 0.3, &mut r).is_err());
    }

    #[test]
    fn subspace_noise_is_half_normal() {
        // d = 1, p = 1: |x - 0.5| / 0.1 is half-normal. Compare empirical
        // quantiles with the half-normal ones (Phi^-1((1 + q)/2)).
        let train = Array2::from_elem((1, 1), 0.5);
        let mut r = stream(5, 0);
        let s = sample_subspace(train.view(), 10_000, 0.1, 1.0, &mut r).unwrap();
        let mut dev: Vec<f64> = s.iter().map(|v| (v - 0.5).abs() / 0.1).collect();
        dev.sort_by(f64::total_cmp);
        for (q, expected) in [(0.25, 0.318_639), (0.5, 0.674_490), (0.75, 1.150_349), (0.9, 1.644_854)] {
            let got = dev[(q * dev.len() as f64) as usize];
            assert!((got - expected).abs() < 0.04, "q={q}: {got} vs {expected}");
        }
    }

    #[test]
    fn mask_fraction_converges_to_p() {
        let train = Array2::from_elem((1, 10), 0.5);
        let mut r = stream(8, 0);
        let s = sample_subspace(train.view(), 10_000, 0.1, 0.3, &mut r).unwrap();
        let perturbed = s.iter().filter(|&&v| v != 0.5).count() as f64 / s.len() as f64;
        assert!((perturbed - 0.3).abs() < 0.02, "{perturbed}");
    }

    #[test]
    fn negative_set_counts() {
        let train = Array2::from_elem((100, 2), 0.5);
        let cfg = NegativeConfig::default();
        assert_eq!(cfg.counts(100), (50, 50));
        assert_eq!(build_negative_set(train.view(), &cfg, 1).unwrap().nrows(), 100);
        let uni = NegativeConfig {
            mix: NegativeMix::UniformOnly,
            ..cfg
        };
        assert_eq!(uni.counts(100), (100, 0));
        assert_eq!(cfg.counts(101), (50, 51));
        let train = Array2::from_elem((101, 2), 0.5);
        let neg = build_negative_set(train.view(), &cfg, 1).unwrap();
        assert_eq!(neg.nrows(), 101);
    }

    #[test]
    fn negative_set_is_deterministic_per_stream() {
        let train = Array2::from_shape_fn((30, 3), |(i, j)| ((i + j) % 7) as f64 / 7.0);
        let cfg = NegativeConfig {
            seed: 42,
            ..Default::default()
        };
        let a = build_negative_set(train.view(), &cfg, 2).unwrap();
        assert_eq!(a, build_negative_set(train.view(), &cfg, 2).unwrap());
        assert_ne!(a, build_negative_set(train.view(), &cfg, 3).unwrap());
    }

    #[test]
    fn config_validation() {
        let bad = NegativeConfig {
            subspace_prob: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(NegativeConfig { epsilon: -1.0, ..Default::default() }.validate().is_err());
        assert!(NegativeConfig { ratio: 0.0, ..Default::default() }.validate().is_err());
        assert_eq!("subspace".parse::<NegativeMix>().unwrap(), NegativeMix::SubspaceOnly);
    }
}
