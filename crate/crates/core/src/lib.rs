//! Local outlier detection over k-nearest-neighbour graphs.
//!
//! Classical detectors (KNN, LOF, DBSCAN, ...) are expressed as small
//! message-passing programs over a directed k-NN graph; LUNAR replaces the
//! fixed aggregation with a trained network.

pub mod dataset;
pub mod detectors;
pub mod error;
pub mod evaluation;
pub mod lunar;
pub mod negative;
pub mod neighbors;
pub mod rng;

pub use dataset::{holdout_split, load_csv, parse_csv, split, Dataset, Normalizer, SplitResult};
pub use detectors::{ClassicDetector, DetectorKind, FittedDetector};
pub use error::{Error, Result};
pub use evaluation::auc;
pub use lunar::{train, TrainConfig, TrainedModel};
pub use negative::{NegativeConfig, NegativeMix};
pub use neighbors::KnnGraph;
