//! Euclidean k-nearest-neighbour search and the directed k-NN graph.
//!
//! Every target node receives edges from its `k` nearest *training* rows,
//! ordered nearest-first with ties broken by the smaller training index. Two
//! search backends produce identical graphs: exhaustive search, which defines
//! the contract, and a k-d tree for low-dimensional data.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Euclidean distance. Terms are summed in coordinate order, which the k-d
/// tree's pruning bound relies on.
pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(euclidean_unchecked(a, b))
}

#[inline]
fn euclidean_unchecked(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        sum += diff * diff;
    }
    sum.sqrt()
}

/// Candidate neighbour ordered by `(distance, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Which search structure answers queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    BruteForce,
    KdTree,
    /// k-d tree for `d <= 20` and more than a few hundred rows, otherwise
    /// brute force.
    #[default]
    Auto,
}

/// A searchable set of training rows.
pub struct NeighborIndex<'a> {
    train: ArrayView2<'a, f64>,
    tree: Option<KdTree>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(train: ArrayView2<'a, f64>, backend: Backend) -> Self {
        let use_tree = match backend {
            Backend::BruteForce => false,
            Backend::KdTree => true,
            Backend::Auto => train.ncols() <= 20 && train.nrows() > 256,
        };
        let tree = use_tree.then(|| KdTree::build(train));
        Self { train, tree }
    }

    pub fn n_train(&self) -> usize {
        self.train.nrows()
    }

    /// The `k` nearest eligible training rows, ascending by `(distance, index)`.
    pub fn query(
        &self,
        query: ArrayView1<'_, f64>,
        k: usize,
        exclude: Option<usize>,
    ) -> Result<(Vec<usize>, Vec<f64>)> {
        if query.len() != self.train.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.train.ncols(),
                actual: query.len(),
            });
        }
        if k == 0 {
            return Err(Error::ZeroK);
        }
        let m = self.train.nrows();
        let available = m - usize::from(exclude.is_some_and(|e| e < m));
        if k > available {
            return Err(Error::KTooLarge { k, available });
        }
        let found = match &self.tree {
            Some(tree) => tree.query(self.train, query, k, exclude),
            None => brute_force(self.train, query, k, exclude),
        };
        Ok(found.into_iter().map(|c| (c.index, c.dist)).unzip())
    }
}

fn brute_force(
    train: ArrayView2<'_, f64>,
    query: ArrayView1<'_, f64>,
    k: usize,
    exclude: Option<usize>,
) -> Vec<Candidate> {
    let mut all: Vec<Candidate> = train
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(index, row)| Candidate {
            dist: euclidean_unchecked(row, query),
            index,
        })
        .collect();
    if k < all.len() {
        all.select_nth_unstable(k - 1);
        all.truncate(k);
    }
    all.sort_unstable();
    all
}

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf(Vec<usize>),
    Split {
        dim: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Bucketed k-d tree splitting at the median of the widest dimension. Points
/// live only in leaves; left holds coordinates `<= value`, right `>= value`.
struct KdTree {
    root: Node,
}

impl KdTree {
    fn build(train: ArrayView2<'_, f64>) -> Self {
        let indices: Vec<usize> = (0..train.nrows()).collect();
        Self {
            root: Self::build_node(train, indices),
        }
    }

    fn build_node(train: ArrayView2<'_, f64>, mut indices: Vec<usize>) -> Node {
        if indices.len() <= LEAF_SIZE {
            return Node::Leaf(indices);
        }
        let dim = (0..train.ncols())
            .map(|d| {
                let (lo, hi) = indices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = train[[i, d]];
                    (lo.min(v), hi.max(v))
                });
                (d, hi - lo)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(d, _)| d)
            .unwrap_or(0);
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| {
            train[[a, dim]].total_cmp(&train[[b, dim]]).then(a.cmp(&b))
        });
        let value = train[[indices[mid], dim]];
        let right = indices.split_off(mid);
        Node::Split {
            dim,
            value,
            left: Box::new(Self::build_node(train, indices)),
            right: Box::new(Self::build_node(train, right)),
        }
    }

    fn query(
        &self,
        train: ArrayView2<'_, f64>,
        query: ArrayView1<'_, f64>,
        k: usize,
        exclude: Option<usize>,
    ) -> Vec<Candidate> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        Self::search(&self.root, train, query, k, exclude, &mut heap);
        heap.into_sorted_vec()
    }

    fn search(
        node: &Node,
        train: ArrayView2<'_, f64>,
        query: ArrayView1<'_, f64>,
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match node {
            Node::Leaf(indices) => {
                for &index in indices {
                    if Some(index) == exclude {
                        continue;
                    }
                    let cand = Candidate {
                        dist: euclidean_unchecked(train.row(index), query),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap holds k items") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let gap = query[*dim] - value;
                let (near, far) = if gap <= 0.0 { (left, right) } else { (right, left) };
                Self::search(near, train, query, k, exclude, heap);
                // Every computed distance into the far side is at least
                // sqrt(gap^2) under the same rounding, so strict `>` keeps ties.
                let bound = (gap * gap).sqrt();
                let full = heap.len() == k;
                if !full || bound <= heap.peek().map_or(f64::INFINITY, |c| c.dist) {
                    Self::search(far, train, query, k, exclude, heap);
                }
            }
        }
    }
}

/// Convenience wrapper over [`NeighborIndex::query`] with the default backend.
pub fn knn_query(
    train: ArrayView2<'_, f64>,
    query: ArrayView1<'_, f64>,
    k: usize,
    exclude: Option<usize>,
) -> Result<(Vec<usize>, Vec<f64>)> {
    NeighborIndex::new(train, Backend::BruteForce).query(query, k, exclude)
}

/// Directed k-NN graph: row `i` lists the training rows with an edge into
/// target `i`, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    k: usize,
    n_train: usize,
    neighbor_index: Array2<usize>,
    neighbor_dist: Array2<f64>,
    /// Training row excluded from each target's neighbourhood, if any.
    excluded: Vec<Option<usize>>,
}

/// How a target is related to the training rows when building a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exclusion {
    None,
    /// Targets are the training rows themselves; target `i` skips row `i`.
    SelfIndex,
    /// A target that coincides exactly with a training row skips the first
    /// such row, making it indistinguishable from that training node.
    Coincident,
}

impl KnnGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_targets(&self) -> usize {
        self.neighbor_index.nrows()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn neighbor_index(&self) -> &Array2<usize> {
        &self.neighbor_index
    }

    pub fn neighbor_dist(&self) -> &Array2<f64> {
        &self.neighbor_dist
    }

    pub fn excluded(&self, target: usize) -> Option<usize> {
        self.excluded.get(target).copied().flatten()
    }

    /// Whether every target `i` is training row `i` with itself excluded.
    pub fn targets_are_train(&self) -> bool {
        self.n_targets() == self.n_train
            && self.excluded.iter().enumerate().all(|(i, e)| *e == Some(i))
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.n_targets() {
            return Err(Error::IndexOutOfRange {
                index: node,
                len: self.n_targets(),
            });
        }
        Ok(())
    }

    /// Distance from `node` to its k-th nearest neighbour.
    pub fn k_dist(&self, node: usize) -> Result<f64> {
        self.check_node(node)?;
        Ok(self.neighbor_dist[[node, self.k - 1]])
    }

    /// Distances from `node` to its neighbours, nearest first.
    pub fn distances(&self, node: usize) -> Result<ArrayView1<'_, f64>> {
        self.check_node(node)?;
        Ok(self.neighbor_dist.row(node))
    }

    /// Reachability distance `max(k_dist(j), dist(i, j))` on a graph whose
    /// targets are the training rows.
    pub fn reach_dist(&self, i: usize, j: usize) -> Result<f64> {
        self.check_node(i)?;
        self.check_node(j)?;
        let rank = self
            .neighbor_index
            .row(i)
            .iter()
            .position(|&n| n == j)
            .ok_or(Error::NotANeighbor {
                target: i,
                neighbor: j,
            })?;
        Ok(self.k_dist(j)?.max(self.neighbor_dist[[i, rank]]))
    }

    /// Writes one CSV row per edge: `target,rank,neighbor,distance`, with
    /// 1-based rank and shortest round-trip decimal distances.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "target,rank,neighbor,distance")?;
        for t in 0..self.n_targets() {
            for r in 0..self.k {
                writeln!(
                    out,
                    "{t},{},{},{}",
                    r + 1,
                    self.neighbor_index[[t, r]],
                    self.neighbor_dist[[t, r]]
                )?;
            }
        }
        Ok(())
    }
}

/// Builds the graph of `targets` over `train`. With `targets_are_train`, target
/// `i` is training row `i` and never receives an edge from itself.
pub fn build_graph(
    train: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    k: usize,
    targets_are_train: bool,
) -> Result<KnnGraph> {
    let exclusion = if targets_are_train {
        Exclusion::SelfIndex
    } else {
        Exclusion::None
    };
    build_with(train, targets, k, exclusion, Backend::Auto)
}

/// Graph of the training rows over themselves, self-excluded.
pub fn build_train_graph(train: ArrayView2<'_, f64>, k: usize) -> Result<KnnGraph> {
    build_with(train, train, k, Exclusion::SelfIndex, Backend::Auto)
}

/// Graph for query points where a point that equals a training row exactly is
/// treated as that training node (the first coincident row is excluded).
pub fn build_query_graph_coincident(
    train: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    k: usize,
) -> Result<KnnGraph> {
    build_with(train, targets, k, Exclusion::Coincident, Backend::Auto)
}

/// [`build_graph`] with an explicit backend.
pub fn build_graph_with_backend(
    train: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    k: usize,
    targets_are_train: bool,
    backend: Backend,
) -> Result<KnnGraph> {
    let exclusion = if targets_are_train {
        Exclusion::SelfIndex
    } else {
        Exclusion::None
    };
    build_with(train, targets, k, exclusion, backend)
}

fn build_with(
    train: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    k: usize,
    exclusion: Exclusion,
    backend: Backend,
) -> Result<KnnGraph> {
    if targets.ncols() != train.ncols() {
        return Err(Error::DimensionMismatch {
            expected: train.ncols(),
            actual: targets.ncols(),
        });
    }
    if exclusion == Exclusion::SelfIndex && targets.nrows() != train.nrows() {
        return Err(Error::LengthMismatch {
            left: train.nrows(),
            right: targets.nrows(),
        });
    }
    let m = train.nrows();
    let index = NeighborIndex::new(train, backend);
    let rows: Vec<(Vec<usize>, Vec<f64>, Option<usize>)> = (0..targets.nrows())
        .into_par_iter()
        .map(|t| {
            let q = targets.row(t);
            match exclusion {
                Exclusion::None => index.query(q, k, None).map(|(i, d)| (i, d, None)),
                Exclusion::SelfIndex => index.query(q, k, Some(t)).map(|(i, d)| (i, d, Some(t))),
                Exclusion::Coincident => {
                    let (mut idx, mut dist) = index.query(q, (k + 1).min(m), None)?;
                    let skipped = if dist.first() == Some(&0.0) {
                        dist.remove(0);
                        Some(idx.remove(0))
                    } else {
                        None
                    };
                    if idx.len() < k {
                        return Err(Error::KTooLarge {
                            k,
                            available: idx.len(),
                        });
                    }
                    idx.truncate(k);
                    dist.truncate(k);
                    Ok((idx, dist, skipped))
                }
            }
        })
        .collect::<Result<_>>()?;

    let n = rows.len();
    let mut neighbor_index = Array2::zeros((n, k));
    let mut neighbor_dist = Array2::zeros((n, k));
    let mut excluded = Vec::with_capacity(n);
    for (t, (idx, dist, ex)) in rows.into_iter().enumerate() {
        for r in 0..k {
            neighbor_index[[t, r]] = idx[r];
            neighbor_dist[[t, r]] = dist[r];
        }
        excluded.push(ex);
    }
    Ok(KnnGraph {
        k,
        n_train: m,
        neighbor_index,
        neighbor_dist,
        excluded,
    })
}

/// Reachability edge values `max(k_dist(j), dist(i, j))` for every edge of
/// `targets`, where k-distances come from the self-excluded training graph.
pub fn reachability_edges(train_graph: &KnnGraph, targets: &KnnGraph) -> Result<Array2<f64>> {
    if targets.n_train() != train_graph.n_targets() {
        return Err(Error::LengthMismatch {
            left: train_graph.n_targets(),
            right: targets.n_train(),
        });
    }
    let k = targets.k();
    let mut out = targets.neighbor_dist().clone();
    for t in 0..targets.n_targets() {
        for r in 0..k {
            let j = targets.neighbor_index[[t, r]];
            out[[t, r]] = train_graph.k_dist(j)?.max(out[[t, r]]);
        }
    }
    Ok(out)
}
