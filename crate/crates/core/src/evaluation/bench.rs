//! Multi-trial benchmark: every (detector, k, seed) cell re-splits the data,
//! fits on the training normals and reports the test AUC.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;

use super::auc;
use crate::dataset::{split, Dataset, Normalizer};
use crate::detectors::{DetectorKind, FittedDetector};
use crate::error::{Error, Result};
use crate::lunar::{self, TrainConfig};
use crate::negative::NegativeConfig;

/// Settings shared by all cells. `train.k` and both seeds are overridden per
/// cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dataset_name: String,
    pub train: TrainConfig,
    pub negatives: NegativeConfig,
    pub dbscan_eps: Option<f64>,
    pub dbscan_min_pts: Option<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dataset_name: "dataset".into(),
            train: TrainConfig::default(),
            negatives: NegativeConfig::default(),
            dbscan_eps: None,
            dbscan_min_pts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub detector: DetectorKind,
    pub k: usize,
    pub seed: u64,
    /// Test AUC, or the error message of a failed cell.
    pub outcome: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub detector: DetectorKind,
    pub k: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset_name: String,
    /// Ordered by detector (as requested), then k, then seed.
    pub cells: Vec<Cell>,
    pub config: BenchConfig,
}

/// One cell: split with `seed`, normalize on the training partition, fit, and
/// compute the test AUC.
pub fn run_trial(data: &Dataset, detector: DetectorKind, k: usize, seed: u64, cfg: &BenchConfig) -> Result<f64> {
    let parts = split(data, seed)?;
    let labels = parts.test.labels().ok_or(Error::Unlabeled)?;
    let scores = match detector.classic(cfg.dbscan_eps, cfg.dbscan_min_pts)? {
        Some(classic) => {
            let normalizer = Normalizer::fit(&parts.train)?;
            let train = normalizer.apply_matrix(parts.train.features())?;
            let test = normalizer.apply_matrix(parts.test.features())?;
            FittedDetector::fit(classic, train, k)?.score(test.view())?
        }
        None => {
            let train_cfg = TrainConfig { k, seed, ..cfg.train };
            let neg_cfg = NegativeConfig { seed, ..cfg.negatives };
            let model = lunar::train(&parts.train, &parts.validation, &neg_cfg, &train_cfg)?;
            model.score(&parts.test)?
        }
    };
    auc(&scores, labels)
}

fn check_plan(data: &Dataset, detectors: &[DetectorKind], k_values: &[usize], seeds: &[u64], cfg: &BenchConfig) -> Result<()> {
    if data.labels().is_none() {
        return Err(Error::Unlabeled);
    }
    if detectors.is_empty() || k_values.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs at least one detector, k and seed".into()));
    }
    if k_values.contains(&0) {
        return Err(Error::ZeroK);
    }
    for d in detectors {
        if let Some(classic) = d.classic(cfg.dbscan_eps, cfg.dbscan_min_pts)? {
            classic.validate()?;
        }
        if *d == DetectorKind::Lunar {
            cfg.train.validate()?;
            cfg.negatives.validate()?;
        }
    }
    Ok(())
}

pub fn run_benchmark(
    data: &Dataset,
    detectors: &[DetectorKind],
    k_values: &[usize],
    seeds: &[u64],
    cfg: &BenchConfig,
) -> Result<EvalReport> {
    run_benchmark_resume(data, detectors, k_values, seeds, cfg, &[], &|_| {})
}

/// Like [`run_benchmark`], but successful cells found in `previous` are reused
/// instead of recomputed. `on_cell` sees every newly computed cell as soon as
/// it finishes, in completion order.
pub fn run_benchmark_resume(
    data: &Dataset,
    detectors: &[DetectorKind],
    k_values: &[usize],
    seeds: &[u64],
    cfg: &BenchConfig,
    previous: &[Cell],
    on_cell: &(dyn Fn(&Cell) + Sync),
) -> Result<EvalReport> {
    check_plan(data, detectors, k_values, seeds, cfg)?;
    let done: BTreeMap<(DetectorKind, usize, u64), f64> = previous
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok().map(|&a| ((c.detector, c.k, c.seed), a)))
        .collect();
    let mut plan = Vec::new();
    for &d in detectors {
        for &k in k_values {
            for &seed in seeds {
                if !plan.contains(&(d, k, seed)) {
                    plan.push((d, k, seed));
                }
            }
        }
    }
    let cells = plan
        .into_par_iter()
        .map(|(detector, k, seed)| {
            if let Some(&a) = done.get(&(detector, k, seed)) {
                return Cell {
                    detector,
                    k,
                    seed,
                    outcome: Ok(a),
                };
            }
            let cell = Cell {
                detector,
                k,
                seed,
                outcome: run_trial(data, detector, k, seed, cfg).map_err(|e| e.to_string()),
            };
            on_cell(&cell);
            cell
        })
        .collect();
    Ok(EvalReport {
        dataset_name: cfg.dataset_name.clone(),
        cells,
        config: cfg.clone(),
    })
}

impl EvalReport {
    /// Mean and standard deviation over the successful trials of each
    /// (detector, k), in cell order. Pairs with no success are omitted.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut keys: Vec<(DetectorKind, usize)> = Vec::new();
        for c in &self.cells {
            if !keys.contains(&(c.detector, c.k)) {
                keys.push((c.detector, c.k));
            }
        }
        keys.into_iter()
            .filter_map(|(detector, k)| {
                let values: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|c| c.detector == detector && c.k == k)
                    .filter_map(|c| c.outcome.as_ref().ok().copied())
                    .collect();
                let n = values.len();
                if n == 0 {
                    return None;
                }
                let mean = values.iter().sum::<f64>() / n as f64;
                let std = if n > 1 {
                    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                Some(Aggregate {
                    detector,
                    k,
                    mean,
                    std,
                    count: n,
                })
            })
            .collect()
    }

    pub fn aggregate(&self, detector: DetectorKind, k: usize) -> Option<Aggregate> {
        self.aggregates().into_iter().find(|a| a.detector == detector && a.k == k)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.outcome.is_err())
    }

    pub fn n_succeeded(&self) -> usize {
        self.cells.len() - self.failures().count()
    }

    /// `detector,k,seed,auc` for every successful cell.
    pub fn write_cells_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "detector,k,seed,auc")?;
        for c in &self.cells {
            if let Ok(a) = c.outcome {
                writeln!(out, "{},{},{},{}", c.detector, c.k, c.seed, a)?;
            }
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "detector,k,mean,std")?;
        for a in self.aggregates() {
            writeln!(out, "{},{},{},{}", a.detector, a.k, a.mean, a.std)?;
        }
        Ok(())
    }

    /// `detector,k,seed,error`; messages have commas and newlines replaced.
    pub fn write_failures_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "detector,k,seed,error")?;
        for c in self.failures() {
            let msg = c.outcome.as_ref().err().map(|m| m.replace([',', '\n', '\r'], ";")).unwrap_or_default();
            writeln!(out, "{},{},{},{}", c.detector, c.k, c.seed, msg)?;
        }
        Ok(())
    }
}

/// Reads a cells file written by [`EvalReport::write_cells_csv`].
pub fn read_cells_csv<R: BufRead>(input: R) -> Result<Vec<Cell>> {
    let bad = |line: usize, what: &str| Error::Csv(format!("cells file line {line}: {what}"));
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "detector,k,seed,auc" => {}
        _ => return Err(bad(1, "expected header detector,k,seed,auc")),
    }
    let mut cells = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| bad(i + 2, &e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 4 {
            return Err(bad(i + 2, "expected 4 fields"));
        }
        let detector = f[0].parse().map_err(|_| bad(i + 2, "unknown detector"))?;
        let k = f[1].parse().map_err(|_| bad(i + 2, "bad k"))?;
        let seed = f[2].parse().map_err(|_| bad(i + 2, "bad seed"))?;
        let a: f64 = f[3].parse().map_err(|_| bad(i + 2, "bad auc"))?;
        if !(0.0..=1.0).contains(&a) {
            return Err(bad(i + 2, "auc outside [0, 1]"));
        }
        cells.push(Cell {
            detector,
            k,
            seed,
            outcome: Ok(a),
        });
    }
    Ok(cells)
}
