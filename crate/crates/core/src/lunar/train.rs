//! Training loop and scoring.
//!
//! Each node's input is its sorted vector of distances to the k nearest
//! training normals. Normals are labelled 0 and synthetic negatives 1; the
//! network is fitted with MSE and Adam, and the parameters with the best
//! validation AUC (normals vs. separately generated negatives) are kept.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::mlp::{init_model, layer_dims, loss_mse, MlpModel};
use crate::dataset::{Dataset, Normalizer};
use crate::error::{Error, Result};
use crate::evaluation::auc;
use crate::negative::{build_negative_set, NegativeConfig};
use crate::neighbors::{self, KnnGraph};
use crate::rng::{self, streams};

/// How per-node squared errors are combined into the training objective.
///
/// With `Mean`, the L2 weight decay of 0.1 outweighs the data term and the
/// network collapses to a constant output; `Sum` scales the data gradient by
/// the batch size. The reported training loss is the mean in both cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossReduction {
    Mean,
    #[default]
    Sum,
}

impl LossReduction {
    pub fn name(self) -> &'static str {
        match self {
            LossReduction::Mean => "mean",
            LossReduction::Sum => "sum",
        }
    }
}

impl std::fmt::Display for LossReduction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(LossReduction::Mean),
            "sum" => Ok(LossReduction::Sum),
            _ => Err(Error::InvalidConfig(format!("unknown loss reduction {s:?} (expected mean or sum)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// `None` trains on the full batch every epoch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    pub loss_reduction: LossReduction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 10,
            epochs: 200,
            learning_rate: 1e-3,
            weight_decay: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: None,
            seed: 0,
            hidden_width: 256,
            hidden_depth: 4,
            loss_reduction: LossReduction::Sum,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 {
            return Err(Error::ZeroK);
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return fail(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0) {
            return fail(format!("weight decay must be >= 0, got {}", self.weight_decay));
        }
        if self.hidden_width == 0 || self.hidden_depth == 0 {
            return fail("hidden width and depth must be at least 1".into());
        }
        if self.batch_size == Some(0) {
            return fail("batch size must be at least 1".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        layer_dims(self.k, self.hidden_width, self.hidden_depth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
}

/// The selected network together with everything needed to score new data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub normalizer: Normalizer,
    /// Normalized training normals; scoring searches neighbours among them.
    pub train_matrix: Array2<f64>,
    pub k: usize,
    pub best_val_auc: f64,
    /// 1-based epoch of the kept snapshot.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Rows of the graph's distance matrix, nearest first: the network input.
pub fn distance_vector(graph: &KnnGraph, node: usize) -> Result<Vec<f64>> {
    Ok(graph.distances(node)?.to_vec())
}

fn require_normals(data: &Dataset, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidConfig(format!("{what} set is empty")));
    }
    if data.labels().is_some_and(|l| l.iter().any(|&v| v != 0)) {
        return Err(Error::InvalidConfig(format!("{what} set contains anomalies")));
    }
    Ok(())
}

/// Stacks normal and negative distance vectors with 0/1 targets.
fn stack(normals: &KnnGraph, negatives: &KnnGraph) -> Result<(Array2<f64>, Vec<f64>)> {
    let x = concatenate(
        Axis(0),
        &[normals.neighbor_dist().view(), negatives.neighbor_dist().view()],
    )
    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut y = vec![0.0; normals.n_targets()];
    y.resize(normals.n_targets() + negatives.n_targets(), 1.0);
    Ok((x, y))
}

/// Fits the scoring network. `train_data` and `val_data` hold normal rows in
/// raw feature units; normalization is fitted on `train_data` alone.
pub fn train(
    train_data: &Dataset,
    val_data: &Dataset,
    neg_cfg: &NegativeConfig,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    neg_cfg.validate()?;
    require_normals(train_data, "training")?;
    require_normals(val_data, "validation")?;
    if val_data.dim() != train_data.dim() {
        return Err(Error::DimensionMismatch {
            expected: train_data.dim(),
            actual: val_data.dim(),
        });
    }
    let available = train_data.n_rows() - 1;
    if cfg.k > available {
        return Err(Error::KTooLarge { k: cfg.k, available });
    }

    let normalizer = Normalizer::fit(train_data)?;
    let x_train = normalizer.apply_matrix(train_data.features())?;
    let x_val = normalizer.apply_matrix(val_data.features())?;
    let neg_train = build_negative_set(x_train.view(), neg_cfg, streams::NEGATIVES_TRAIN)?;
    let neg_val = build_negative_set(x_val.view(), neg_cfg, streams::NEGATIVES_VALIDATION)?;

    let k = cfg.k;
    let g_train = neighbors::build_train_graph(x_train.view(), k)?;
    let g_neg = neighbors::build_graph(x_train.view(), neg_train.view(), k, false)?;
    let g_val = neighbors::build_graph(x_train.view(), x_val.view(), k, false)?;
    let g_val_neg = neighbors::build_graph(x_train.view(), neg_val.view(), k, false)?;
    let (inputs, targets) = stack(&g_train, &g_neg)?;
    let (val_inputs, val_targets) = stack(&g_val, &g_val_neg)?;
    let val_labels: Vec<u8> = val_targets.iter().map(|&t| t as u8).collect();

    let mut model = init_model(&cfg.layer_dims(), &mut rng::stream(cfg.seed, streams::INIT))?;
    let mut state = AdamState::new(&model);
    let adam = cfg.adam();
    let mut shuffle_rng = rng::stream(cfg.seed, streams::SHUFFLE);
    let mut order: Vec<usize> = (0..inputs.nrows()).collect();

    let mut best = (f64::NEG_INFINITY, 0, model.clone());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let train_loss = match cfg.batch_size {
            Some(b) if b < inputs.nrows() => {
                order.shuffle(&mut shuffle_rng);
                let mut weighted = 0.0;
                for chunk in order.chunks(b) {
                    let xb = inputs.select(Axis(0), chunk);
                    let yb: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                    weighted += fit_batch(&mut model, &mut state, &adam, cfg.loss_reduction, xb.view(), &yb)? * chunk.len() as f64;
                }
                weighted / inputs.nrows() as f64
            }
            _ => fit_batch(&mut model, &mut state, &adam, cfg.loss_reduction, inputs.view(), &targets)?,
        };
        if !train_loss.is_finite() {
            return Err(Error::InvalidConfig(format!("training diverged at epoch {epoch}")));
        }
        let val_scores = model.predict(val_inputs.view())?;
        let val_auc = auc(&val_scores, &val_labels)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
        });
        if val_auc > best.0 {
            best = (val_auc, epoch, model.clone());
        }
    }

    let (best_val_auc, best_epoch, model) = best;
    Ok(TrainedModel {
        model,
        normalizer,
        train_matrix: x_train,
        k,
        best_val_auc,
        best_epoch,
        history,
    })
}

/// Forward, backward and one optimizer step; returns the pre-step mean loss.
fn fit_batch(
    model: &mut MlpModel,
    state: &mut AdamState,
    adam: &AdamConfig,
    reduction: LossReduction,
    x: ArrayView2<'_, f64>,
    y: &[f64],
) -> Result<f64> {
    let (scores, cache) = model.forward(x)?;
    let loss = loss_mse(&scores, y)?;
    let mut grads = model.backward(&cache, y)?;
    if reduction == LossReduction::Sum {
        let b = y.len() as f64;
        grads.weights.iter_mut().for_each(|g| *g *= b);
        grads.biases.iter_mut().for_each(|g| *g *= b);
    }
    adam_step(model, &grads, state, adam)?;
    Ok(loss)
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.train_matrix.ncols()
    }

    /// Anomaly scores in (0, 1) for rows given in raw feature units.
    pub fn score(&self, test: &Dataset) -> Result<Vec<f64>> {
        self.score_raw(test.features().view())
    }

    pub fn score_raw(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: points.ncols(),
            });
        }
        let x = self.normalizer.apply_matrix(&points.to_owned())?;
        self.score_normalized(x.view())
    }

    /// Scores points already in normalized units. A point equal to a stored
    /// training row is scored as that training node.
    pub fn score_normalized(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let graph = neighbors::build_query_graph_coincident(self.train_matrix.view(), points, self.k)?;
        self.model.predict(graph.neighbor_dist().view())
    }

    /// Scores of the training nodes as seen during training.
    pub fn score_train_nodes(&self) -> Result<Vec<f64>> {
        let graph = neighbors::build_train_graph(self.train_matrix.view(), self.k)?;
        self.model.predict(graph.neighbor_dist().view())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn blob(n: usize, seed: u64) -> Dataset {
        use rand_distr::{Distribution, Normal};
        let mut r = rng::stream(seed, 99);
        let nd = Normal::new(0.5, 0.05).unwrap();
        Dataset::new(Array2::from_shape_simple_fn((n, 2), || nd.sample(&mut r)), None).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            k: 5,
            epochs: 3,
            hidden_width: 8,
            hidden_depth: 2,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn one_epoch_history() {
        let cfg = TrainConfig { epochs: 1, ..small_cfg() };
        let m = train(&blob(60, 1), &blob(20, 2), &NegativeConfig::default(), &cfg).unwrap();
        assert_eq!(m.history.len(), 1);
        assert_eq!(m.best_epoch, 1);
        assert_eq!(m.best_val_auc, m.history[0].val_auc);
    }

    #[test]
    fn training_is_deterministic() {
        let a = train(&blob(60, 1), &blob(20, 2), &NegativeConfig::default(), &small_cfg()).unwrap();
        let b = train(&blob(60, 1), &blob(20, 2), &NegativeConfig::default(), &small_cfg()).unwrap();
        assert_eq!(a, b);
        let best = a.history.iter().map(|h| h.val_auc).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best_val_auc, best);
    }

    #[test]
    fn minibatch_training_runs() {
        let cfg = TrainConfig {
            batch_size: Some(16),
            ..small_cfg()
        };
        let m = train(&blob(60, 1), &blob(20, 2), &NegativeConfig::default(), &cfg).unwrap();
        assert_eq!(m.history.len(), 3);
    }

    #[test]
    fn train_errors() {
        let cfg = TrainConfig { k: 60, ..small_cfg() };
        assert!(matches!(
            train(&blob(60, 1), &blob(20, 2), &NegativeConfig::default(), &cfg),
            Err(Error::KTooLarge { .. })
        ));
        let empty = Dataset::new(Array2::zeros((0, 2)), None).unwrap();
        assert!(train(&blob(60, 1), &empty, &NegativeConfig::default(), &small_cfg()).is_err());
        let dirty = Dataset::new(Array2::zeros((3, 2)), Some(vec![0, 1, 0])).unwrap();
        assert!(train(&dirty, &blob(20, 2), &NegativeConfig::default(), &small_cfg()).is_err());
    }

    #[test]
    fn scores_are_probabilities_and_training_points_match_nodes() {
        let train_set = blob(60, 1);
        let m = train(&train_set, &blob(20, 2), &NegativeConfig::default(), &small_cfg()).unwrap();
        let s = m.score(&train_set).unwrap();
        let nodes = m.score_train_nodes().unwrap();
        for (a, b) in s.iter().zip(&nodes) {
            assert!(*a > 0.0 && *a < 1.0);
            assert!((a - b).abs() <= 1e-12);
        }
        let wrong = Dataset::new(Array2::zeros((2, 3)), None).unwrap();
        assert!(matches!(m.score(&wrong), Err(Error::DimensionMismatch { expected: 2, actual: 3 })));
    }

    #[test]
    fn distance_vector_passthrough() {
        let train = Array2::from_shape_vec((3, 1), vec![0.0, 1.0, 3.0]).unwrap();
        let q = Array2::from_shape_vec((1, 1), vec![2.0]).unwrap();
        let g = neighbors::build_graph(train.view(), q.view(), 2, false).unwrap();
        assert_eq!(distance_vector(&g, 0).unwrap(), vec![1.0, 1.0]);
        assert!(distance_vector(&g, 1).is_err());

        let dup = Array2::from_elem((4, 2), 0.5);
        let g = neighbors::build_train_graph(dup.view(), 3).unwrap();
        assert_eq!(distance_vector(&g, 2).unwrap(), vec![0.0; 3]);
    }
}
