use std::io::{self, Write};

use ndarray::{Array2, ArrayView2};

use crate::detectors::FittedDetector;
use crate::error::{Error, Result};
use crate::lunar::TrainedModel;

/// Anything that assigns anomaly scores to points given in raw units.
pub trait Scorer {
    fn dim(&self) -> usize;
    fn score_points(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>>;
}

impl Scorer for TrainedModel {
    fn dim(&self) -> usize {
        TrainedModel::dim(self)
    }

    fn score_points(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.score_raw(points)
    }
}

impl Scorer for FittedDetector {
    fn dim(&self) -> usize {
        FittedDetector::dim(self)
    }

    fn score_points(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.score(points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

/// Evenly spaced lattice coordinates including both bounds.
fn axis(low: f64, high: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![low],
        _ => (0..n)
            .map(|i| if i == n - 1 { high } else { low + (high - low) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Scores a `resolution.0 x resolution.1` lattice over the given per-axis
/// bounds. Rows are ordered by x, then y.
pub fn contour_grid(
    scorer: &dyn Scorer,
    bounds: [(f64, f64); 2],
    resolution: (usize, usize),
) -> Result<Vec<GridPoint>> {
    if scorer.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: scorer.dim(),
        });
    }
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(Error::InvalidConfig("grid resolution must be at least 1".into()));
    }
    let xs = axis(bounds[0].0, bounds[0].1, resolution.0);
    let ys = axis(bounds[1].0, bounds[1].1, resolution.1);
    let mut points = Array2::zeros((xs.len() * ys.len(), 2));
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            points[[i * ys.len() + j, 0]] = x;
            points[[i * ys.len() + j, 1]] = y;
        }
    }
    let scores = scorer.score_points(points.view())?;
    Ok(points
        .rows()
        .into_iter()
        .zip(scores)
        .map(|(p, score)| GridPoint {
            x: p[0],
            y: p[1],
            score,
        })
        .collect())
}

pub fn write_grid_csv<W: Write>(grid: &[GridPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "x,y,score")?;
    for p in grid {
        writeln!(out, "{},{},{}", p.x, p.y, p.score)?;
    }
    Ok(())
}
