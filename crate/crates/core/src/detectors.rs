//! Classical local outlier methods expressed as one or two rounds of message
//! passing over the k-NN graph.
//!
//! Each layer computes, for every target node `i`,
//!
//! ```text
//! h_N(i) = AGG_{j in N(i)} message(h_i, h_j, e_ji)
//! h_i'   = update(h_N(i))
//! ```
//!
//! Layer one only looks at edge values. Layer two reads the layer-one state of
//! the target itself and of its training neighbours, so the training graph is
//! run through layer one as well.
//!
//! Conventions: the Heaviside step is `H(t) = 1` iff `t >= 0`. A zero mean
//! reachability makes the density infinite, and a ratio of two infinite
//! densities is taken to be 1.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::neighbors::{self, KnnGraph};

/// Edge feature carried by the graph's edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFeature {
    Distance,
    /// `max(k_dist(j), dist(i, j))`; needs the training graph.
    Reachability,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Message {
    /// `e_ji`
    Edge,
    /// `e_ji^2`
    EdgeSquared,
    /// `H(radius - e_ji)`
    WithinRadius(f64),
    /// `h_j / h_i`
    NeighborRatio,
    /// `h_j`
    Neighbor,
}

impl Message {
    fn needs_state(self) -> bool {
        matches!(self, Message::NeighborRatio | Message::Neighbor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Max,
    Sum,
    Mean,
    /// The k-th smallest message, i.e. the one coming over the k-th nearest
    /// edge when messages grow with distance.
    KthSmallest(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Update {
    Identity,
    Reciprocal,
    /// `H(h - min_pts)`
    AtLeast(f64),
    /// `1 - h`
    OneMinus,
}

/// One message/aggregate/update triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub message: Message,
    pub aggregation: Aggregation,
    pub update: Update,
}

impl LayerSpec {
    pub const fn new(message: Message, aggregation: Aggregation, update: Update) -> Self {
        Self {
            message,
            aggregation,
            update,
        }
    }
}

/// Declarative description of a detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub edge_feature: EdgeFeature,
    pub layers: Vec<LayerSpec>,
}

/// Layer-one state for the training nodes and the targets of one graph.
#[derive(Debug, Clone, Copy)]
pub struct NodeStates<'a> {
    pub targets: &'a [f64],
    pub train: &'a [f64],
}

/// Heaviside step with `H(0) = 1`.
#[inline]
pub fn heaviside(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if num.is_infinite() && den.is_infinite() {
        1.0
    } else {
        num / den
    }
}

/// Runs one message-passing layer over `graph`. `edge_values` has the graph's
/// shape (targets x k) and holds the edge feature of each edge.
pub fn run_layer(
    graph: &KnnGraph,
    prev: Option<NodeStates<'_>>,
    spec: &LayerSpec,
    edge_values: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    let (n, k) = (graph.n_targets(), graph.k());
    if edge_values.dim() != (n, k) {
        return Err(Error::LengthMismatch {
            left: n * k,
            right: edge_values.len(),
        });
    }
    let states = if spec.message.needs_state() {
        let s = prev.ok_or_else(|| Error::MissingState("layer input".into()))?;
        if s.targets.len() != n {
            return Err(Error::MissingState(format!(
                "targets: have {}, need {n}",
                s.targets.len()
            )));
        }
        if s.train.len() != graph.n_train() {
            return Err(Error::MissingState(format!(
                "training nodes: have {}, need {}",
                s.train.len(),
                graph.n_train()
            )));
        }
        Some(s)
    } else {
        None
    };
    if let Aggregation::KthSmallest(rank) = spec.aggregation {
        if rank == 0 || rank > k {
            return Err(Error::KTooLarge { k: rank, available: k });
        }
    }

    let index = graph.neighbor_index();
    let mut messages = vec![0.0; k];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        for (r, msg) in messages.iter_mut().enumerate() {
            let e = edge_values[[i, r]];
            *msg = match spec.message {
                Message::Edge => e,
                Message::EdgeSquared => e * e,
                Message::WithinRadius(radius) => heaviside(radius - e),
                Message::NeighborRatio => {
                    let s = states.expect("checked above");
                    ratio(s.train[index[[i, r]]], s.targets[i])
                }
                Message::Neighbor => states.expect("checked above").train[index[[i, r]]],
            };
        }
        let agg = match spec.aggregation {
            Aggregation::Max => messages.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Sum => messages.iter().sum(),
            Aggregation::Mean => messages.iter().sum::<f64>() / k as f64,
            Aggregation::KthSmallest(rank) => {
                let mut sorted = messages.clone();
                sorted.sort_by(f64::total_cmp);
                sorted[rank - 1]
            }
        };
        out.push(match spec.update {
            Update::Identity => agg,
            Update::Reciprocal => 1.0 / agg,
            Update::AtLeast(min_pts) => heaviside(agg - min_pts),
            Update::OneMinus => 1.0 - agg,
        });
    }
    Ok(out)
}

/// The detectors available by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassicDetector {
    Knn,
    AggrKnn,
    Lof,
    SimpleLof,
    Dbscan { eps: f64, min_pts: f64 },
    Inflo,
}

impl ClassicDetector {
    pub fn name(&self) -> &'static str {
        match self {
            ClassicDetector::Knn => "knn",
            ClassicDetector::AggrKnn => "aggr-knn",
            ClassicDetector::Lof => "lof",
            ClassicDetector::SimpleLof => "simple-lof",
            ClassicDetector::Dbscan { .. } => "dbscan",
            ClassicDetector::Inflo => "inflo",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ClassicDetector::Dbscan { eps, min_pts } = *self {
            if !(eps > 0.0 && eps.is_finite()) || !(min_pts >= 0.0 && min_pts.is_finite()) {
                return Err(Error::InvalidConfig(
                    "dbscan needs eps > 0 and min_pts >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// Message-passing description for neighbourhood size `k`.
    pub fn spec(&self, k: usize) -> DetectorSpec {
        use Aggregation as A;
        use Message as M;
        use Update as U;
        let density_ratio = LayerSpec::new(M::NeighborRatio, A::Mean, U::Identity);
        let (edge_feature, layers) = match *self {
            ClassicDetector::Knn => (
                EdgeFeature::Distance,
                vec![LayerSpec::new(M::Edge, A::Max, U::Identity)],
            ),
            ClassicDetector::AggrKnn => (
                EdgeFeature::Distance,
                vec![LayerSpec::new(M::Edge, A::Sum, U::Identity)],
            ),
            // Mean reachability inverted; the sum/|N| of the density formula
            // is expressed with the mean aggregator so the update is a plain
            // reciprocal.
            ClassicDetector::Lof => (
                EdgeFeature::Reachability,
                vec![LayerSpec::new(M::Edge, A::Mean, U::Reciprocal), density_ratio],
            ),
            ClassicDetector::SimpleLof => (
                EdgeFeature::Distance,
                vec![LayerSpec::new(M::Edge, A::Mean, U::Reciprocal), density_ratio],
            ),
            ClassicDetector::Dbscan { eps, min_pts } => (
                EdgeFeature::Distance,
                vec![
                    LayerSpec::new(M::WithinRadius(eps), A::Sum, U::AtLeast(min_pts)),
                    LayerSpec::new(M::Neighbor, A::Max, U::OneMinus),
                ],
            ),
            ClassicDetector::Inflo => (
                EdgeFeature::Distance,
                vec![
                    LayerSpec::new(M::EdgeSquared, A::KthSmallest(k), U::Reciprocal),
                    density_ratio,
                ],
            ),
        };
        DetectorSpec {
            edge_feature,
            layers,
        }
    }

    /// Scores the targets of `target_graph`. `train_graph` must be the
    /// self-excluded graph of the training rows over themselves with the same k.
    pub fn score(&self, train_graph: &KnnGraph, target_graph: &KnnGraph) -> Result<Vec<f64>> {
        self.validate()?;
        run_spec(&self.spec(target_graph.k()), train_graph, target_graph)
    }
}

impl fmt::Display for ClassicDetector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs a full detector spec.
pub fn run_spec(spec: &DetectorSpec, train_graph: &KnnGraph, target_graph: &KnnGraph) -> Result<Vec<f64>> {
    if spec.layers.is_empty() || spec.layers.len() > 2 {
        return Err(Error::InvalidConfig("detectors have one or two layers".into()));
    }
    if train_graph.k() != target_graph.k() {
        return Err(Error::InvalidConfig(format!(
            "graph k mismatch: {} vs {}",
            train_graph.k(),
            target_graph.k()
        )));
    }
    if !train_graph.targets_are_train() {
        return Err(Error::InvalidConfig(
            "first graph must be the self-excluded training graph".into(),
        ));
    }
    let edges = |g: &KnnGraph| -> Result<Array2<f64>> {
        match spec.edge_feature {
            EdgeFeature::Distance => Ok(g.neighbor_dist().clone()),
            EdgeFeature::Reachability => neighbors::reachability_edges(train_graph, g),
        }
    };
    let target_edges = edges(target_graph)?;
    let first = &spec.layers[0];
    let target_h1 = run_layer(target_graph, None, first, target_edges.view())?;
    let Some(second) = spec.layers.get(1) else {
        return Ok(target_h1);
    };
    let train_edges = edges(train_graph)?;
    let train_h1 = run_layer(train_graph, None, first, train_edges.view())?;
    run_layer(
        target_graph,
        Some(NodeStates {
            targets: &target_h1,
            train: &train_h1,
        }),
        second,
        target_edges.view(),
    )
}

/// Distance to the k-th nearest neighbour, computed through the engine.
pub fn score_knn(graph: &KnnGraph) -> Result<Vec<f64>> {
    let spec = ClassicDetector::Knn.spec(graph.k());
    run_layer(graph, None, &spec.layers[0], graph.neighbor_dist().view())
}

/// Sum of the k neighbour distances, computed through the engine.
pub fn score_aggr_knn(graph: &KnnGraph) -> Result<Vec<f64>> {
    let spec = ClassicDetector::AggrKnn.spec(graph.k());
    run_layer(graph, None, &spec.layers[0], graph.neighbor_dist().view())
}

pub fn score_lof(train_graph: &KnnGraph, target_graph: &KnnGraph) -> Result<Vec<f64>> {
    ClassicDetector::Lof.score(train_graph, target_graph)
}

pub fn score_simple_lof(train_graph: &KnnGraph, target_graph: &KnnGraph) -> Result<Vec<f64>> {
    ClassicDetector::SimpleLof.score(train_graph, target_graph)
}

pub fn score_dbscan(
    train_graph: &KnnGraph,
    target_graph: &KnnGraph,
    eps: f64,
    min_pts: f64,
) -> Result<Vec<f64>> {
    ClassicDetector::Dbscan { eps, min_pts }.score(train_graph, target_graph)
}

pub fn score_inflo(train_graph: &KnnGraph, target_graph: &KnnGraph) -> Result<Vec<f64>> {
    ClassicDetector::Inflo.score(train_graph, target_graph)
}

/// Detector name as accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Knn,
    AggrKnn,
    Lof,
    SimpleLof,
    Dbscan,
    Inflo,
    Lunar,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 7] = [
        DetectorKind::Knn,
        DetectorKind::AggrKnn,
        DetectorKind::Lof,
        DetectorKind::SimpleLof,
        DetectorKind::Dbscan,
        DetectorKind::Inflo,
        DetectorKind::Lunar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Knn => "knn",
            DetectorKind::AggrKnn => "aggr-knn",
            DetectorKind::Lof => "lof",
            DetectorKind::SimpleLof => "simple-lof",
            DetectorKind::Dbscan => "dbscan",
            DetectorKind::Inflo => "inflo",
            DetectorKind::Lunar => "lunar",
        }
    }

    /// The classical detector, or `None` for LUNAR. DBSCAN needs both
    /// parameters and has no defaults.
    pub fn classic(self, eps: Option<f64>, min_pts: Option<f64>) -> Result<Option<ClassicDetector>> {
        Ok(Some(match self {
            DetectorKind::Knn => ClassicDetector::Knn,
            DetectorKind::AggrKnn => ClassicDetector::AggrKnn,
            DetectorKind::Lof => ClassicDetector::Lof,
            DetectorKind::SimpleLof => ClassicDetector::SimpleLof,
            DetectorKind::Inflo => ClassicDetector::Inflo,
            DetectorKind::Dbscan => match (eps, min_pts) {
                (Some(eps), Some(min_pts)) => ClassicDetector::Dbscan { eps, min_pts },
                _ => {
                    return Err(Error::InvalidConfig(
                        "dbscan requires both --eps and --min-pts".into(),
                    ))
                }
            },
            DetectorKind::Lunar => return Ok(None),
        }))
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown detector {s:?}")))
    }
}

/// A classical detector bound to its training rows.
#[derive(Debug, Clone)]
pub struct FittedDetector {
    detector: ClassicDetector,
    train: Array2<f64>,
    train_graph: KnnGraph,
}

impl FittedDetector {
    pub fn fit(detector: ClassicDetector, train: Array2<f64>, k: usize) -> Result<Self> {
        let train_graph = neighbors::build_train_graph(train.view(), k)?;
        Ok(Self {
            detector,
            train,
            train_graph,
        })
    }

    pub fn dim(&self) -> usize {
        self.train.ncols()
    }

    pub fn train_graph(&self) -> &KnnGraph {
        &self.train_graph
    }

    /// Scores the training rows themselves (each excluded from its own
    /// neighbourhood).
    pub fn score_train(&self) -> Result<Vec<f64>> {
        self.detector.score(&self.train_graph, &self.train_graph)
    }

    pub fn score(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let g = neighbors::build_graph(self.train.view(), points, self.train_graph.k(), false)?;
        self.detector.score(&self.train_graph, &g)
    }
}
