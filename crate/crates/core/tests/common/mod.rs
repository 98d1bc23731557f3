//! Framework-free reference implementations used as test oracles.

#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Indices and distances of the `k` nearest rows of `train` to `q`, ordered
/// by distance then index, skipping `skip`.
pub fn nearest(train: ArrayView2<'_, f64>, q: &[f64], k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..train.nrows())
        .filter(|&j| Some(j) != skip)
        .map(|j| (j, dist(train.row(j).as_slice().unwrap(), q)))
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Direct local outlier factor: reachability distance, local reachability
/// density and the density ratio, computed without any graph structure.
pub fn lof_direct(train: ArrayView2<'_, f64>, test: ArrayView2<'_, f64>, k: usize) -> (Vec<f64>, Vec<f64>) {
    let m = train.nrows();
    let train_nn: Vec<Vec<(usize, f64)>> =
        (0..m).map(|i| nearest(train, train.row(i).as_slice().unwrap(), k, Some(i))).collect();
    let k_dist: Vec<f64> = train_nn.iter().map(|nn| nn[k - 1].1).collect();
    let lrd = |nn: &[(usize, f64)]| {
        let mean_reach = nn.iter().map(|&(j, d)| d.max(k_dist[j])).sum::<f64>() / k as f64;
        1.0 / mean_reach
    };
    let train_lrd: Vec<f64> = train_nn.iter().map(|nn| lrd(nn)).collect();
    let lof = |nn: &[(usize, f64)]| {
        let own = lrd(nn);
        nn.iter().map(|&(j, _)| train_lrd[j] / own).sum::<f64>() / k as f64
    };
    let train_scores = train_nn.iter().map(|nn| lof(nn)).collect();
    let test_scores = (0..test.nrows())
        .map(|i| lof(&nearest(train, test.row(i).as_slice().unwrap(), k, None)))
        .collect();
    (train_scores, test_scores)
}

/// AUC by enumerating every anomaly/normal pair, ties worth one half.
/// Returned as an exact fraction (numerator in half-units, denominator).
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice_wins = 0u64;
    let mut pairs = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            twice_wins += if si > sj {
                2
            } else if si == sj {
                1
            } else {
                0
            };
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

/// A random orthogonal matrix (product of `d` Householder reflections, plus
/// an optional extra reflection) and a random translation.
pub fn random_isometry<R: Rng>(d: usize, rng: &mut R) -> (Array2<f64>, Vec<f64>) {
    let mut q = Array2::<f64>::eye(d);
    let reflections = d + usize::from(rng.gen_bool(0.5));
    for _ in 0..reflections {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let h = Array2::from_shape_fn((d, d), |(i, j)| f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j] / norm2);
        q = q.dot(&h);
    }
    let t = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
    (q, t)
}

/// Applies `x -> x Q + t` to every row.
pub fn apply_isometry(x: ArrayView2<'_, f64>, q: &Array2<f64>, t: &[f64]) -> Array2<f64> {
    let mut y = x.dot(q);
    for mut row in y.rows_mut() {
        for (v, s) in row.iter_mut().zip(t) {
            *v += s;
        }
    }
    y
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(0.0..1.0))
}
