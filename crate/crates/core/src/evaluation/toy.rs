use ndarray::Array2;
use rand::distributions::{Distribution, Uniform};
use rand_distr::Normal;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Four isotropic Gaussian clusters plus sparse uniform points.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub centers: Vec<[f64; 2]>,
    pub sigma: f64,
    pub per_cluster: usize,
    pub n_uniform: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            centers: vec![[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]],
            sigma: 0.05,
            per_cluster: 250,
            n_uniform: 15,
            seed: 0,
        }
    }
}

/// The default toy set for `seed`: 1000 clustered rows labelled 0 followed by
/// 15 uniform rows over the unit square labelled 1.
pub fn toy_dataset(seed: u64) -> Dataset {
    toy_dataset_with(&ToyConfig {
        seed,
        ..Default::default()
    })
    .expect("default toy config is valid")
}

pub fn toy_dataset_with(cfg: &ToyConfig) -> Result<Dataset> {
    let noise = Normal::new(0.0, cfg.sigma)
        .map_err(|e| Error::InvalidConfig(format!("toy sigma: {e}")))?;
    let unit = Uniform::new_inclusive(0.0, 1.0);
    let mut rng = rng::stream(cfg.seed, streams::TOY);
    let n_clustered = cfg.centers.len() * cfg.per_cluster;
    let n = n_clustered + cfg.n_uniform;
    let mut features = Array2::zeros((n, 2));
    let mut labels = vec![0u8; n];
    let mut row = 0;
    for c in &cfg.centers {
        for _ in 0..cfg.per_cluster {
            features[[row, 0]] = c[0] + noise.sample(&mut rng);
            features[[row, 1]] = c[1] + noise.sample(&mut rng);
            row += 1;
        }
    }
    for _ in 0..cfg.n_uniform {
        features[[row, 0]] = unit.sample(&mut rng);
        features[[row, 1]] = unit.sample(&mut rng);
        labels[row] = 1;
        row += 1;
    }
    Dataset::new(features, Some(labels))?.with_feature_names(vec!["x".into(), "y".into()])
}
