use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use lunar::evaluation::{
    contour_grid, read_cells_csv, run_benchmark_resume, toy_dataset_with, write_grid_csv, BenchConfig, Cell, Scorer,
    ToyConfig,
};
use lunar::lunar::LossReduction;
use lunar::{
    auc, holdout_split, load_csv, split, Dataset, DetectorKind, FittedDetector, NegativeConfig, NegativeMix,
    Normalizer, TrainConfig, TrainedModel,
};
use ndarray::ArrayView2;

use crate::config::{KeySpec, Settings, RESOLVED_FILE};
use crate::error::{write_failed, CliError, CliResult};

pub const MODEL_FILE: &str = "model.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const CELLS_FILE: &str = "cells.csv";
pub const PARTIAL_CELLS_FILE: &str = "cells.partial.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const TOY_FILE: &str = "toy.csv";
pub const GRID_FILE: &str = "grid.csv";

pub const FIT_KEYS: KeySpec = KeySpec {
    command: "fit",
    keys: &[
        ("data", None),
        ("label-col", None),
        ("split", Some("auto")),
        ("k", Some("10")),
        ("seed", Some("0")),
        ("epochs", Some("200")),
        ("lr", Some("0.001")),
        ("weight-decay", Some("0.1")),
        ("hidden-width", Some("256")),
        ("hidden-depth", Some("4")),
        ("batch-size", Some("full")),
        ("loss-reduction", Some("sum")),
        ("neg-mix", Some("mixed")),
        ("neg-eps", Some("0.1")),
        ("neg-p", Some("0.3")),
        ("neg-ratio", Some("1")),
        ("out", None),
    ],
};

pub const SCORE_KEYS: KeySpec = KeySpec {
    command: "score",
    keys: &[("model", None), ("data", None), ("label-col", None), ("out", None)],
};

pub const BENCH_KEYS: KeySpec = KeySpec {
    command: "bench",
    keys: &[
        ("data", None),
        ("label-col", None),
        ("name", None),
        ("detector", Some("knn,lof,lunar")),
        ("k", Some("10")),
        ("seeds", Some("1,2,3,4,5")),
        ("eps", None),
        ("min-pts", None),
        ("epochs", Some("200")),
        ("lr", Some("0.001")),
        ("weight-decay", Some("0.1")),
        ("hidden-width", Some("256")),
        ("hidden-depth", Some("4")),
        ("batch-size", Some("full")),
        ("loss-reduction", Some("sum")),
        ("neg-mix", Some("mixed")),
        ("neg-eps", Some("0.1")),
        ("neg-p", Some("0.3")),
        ("neg-ratio", Some("1")),
        ("out", None),
        ("resume", Some("false")),
    ],
};

pub const TOY_KEYS: KeySpec = KeySpec {
    command: "toy",
    keys: &[
        ("seed", Some("0")),
        ("sigma", Some("0.05")),
        ("per-cluster", Some("250")),
        ("n-uniform", Some("15")),
        ("out", None),
    ],
};

pub const GRID_KEYS: KeySpec = KeySpec {
    command: "grid",
    keys: &[
        ("model", None),
        ("detector", None),
        ("data", None),
        ("label-col", None),
        ("k", Some("10")),
        ("eps", None),
        ("min-pts", None),
        ("resolution", Some("50")),
        ("x-min", None),
        ("x-max", None),
        ("y-min", None),
        ("y-max", None),
        ("out", None),
    ],
};

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| write_failed(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| write_failed(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| write_failed(path, e))?;
    finish(w, path)
}

fn load_data(s: &Settings) -> CliResult<Dataset> {
    let path = s.path("data")?;
    Ok(load_csv(&path, s.raw("label-col"))?)
}

fn train_config(s: &Settings, k: usize, seed: u64) -> CliResult<TrainConfig> {
    let batch_size = match s.require::<String>("batch-size")?.as_str() {
        "full" => None,
        v => Some(
            v.parse::<usize>()
                .map_err(|e| CliError::usage(format!("invalid value {v:?} for batch-size: {e}")))?,
        ),
    };
    let cfg = TrainConfig {
        k,
        seed,
        epochs: s.require("epochs")?,
        learning_rate: s.require("lr")?,
        weight_decay: s.require("weight-decay")?,
        hidden_width: s.require("hidden-width")?,
        hidden_depth: s.require("hidden-depth")?,
        batch_size,
        loss_reduction: s.require::<LossReduction>("loss-reduction")?,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn negative_config(s: &Settings, seed: u64) -> CliResult<NegativeConfig> {
    let cfg = NegativeConfig {
        epsilon: s.require("neg-eps")?,
        subspace_prob: s.require("neg-p")?,
        ratio: s.require("neg-ratio")?,
        mix: s.require::<NegativeMix>("neg-mix")?,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Trains a LUNAR model. Labelled data is split with the evaluation protocol
/// (training normals, validation normals, held-out test set); otherwise, or
/// with `split = holdout`, all rows are split 85:15 into training and
/// validation.
pub fn fit(s: &Settings) -> CliResult<String> {
    let out = s.path("out")?;
    let k: usize = s.require("k")?;
    let seed: u64 = s.require("seed")?;
    let cfg = train_config(s, k, seed)?;
    let neg = negative_config(s, seed)?;
    let mode: String = s.require("split")?;
    let data = load_data(s)?;
    let protocol = match mode.as_str() {
        "auto" => data.labels().is_some(),
        "protocol" if data.labels().is_some() => true,
        "protocol" => return Err(CliError::usage("split = protocol needs labelled data (--label-col)")),
        "holdout" => false,
        other => {
            return Err(CliError::usage(format!(
                "invalid value {other:?} for split: expected auto, protocol or holdout"
            )))
        }
    };
    let (train, val, test) = if protocol {
        let parts = split(&data, seed)?;
        (parts.train, parts.validation, Some(parts.test))
    } else {
        let (t, v) = holdout_split(&data, seed)?;
        (t, v, None)
    };
    s.echo(&out)?;
    let model = lunar::train(&train, &val, &neg, &cfg)?;

    let model_path = out.join(MODEL_FILE);
    model.save(&model_path).map_err(|e| CliError::Internal(e.to_string()))?;
    let history_path = out.join(HISTORY_FILE);
    write_with(&history_path, |w| {
        writeln!(w, "epoch,train_loss,val_auc")?;
        for h in &model.history {
            writeln!(w, "{},{},{}", h.epoch, h.train_loss, h.val_auc)?;
        }
        Ok(())
    })?;

    let mut summary = format!(
        "trained on {} rows; best validation AUC {} at epoch {}; model written to {}",
        train.n_rows(),
        model.best_val_auc,
        model.best_epoch,
        model_path.display()
    );
    if let Some(test) = test {
        let scores = model.score(&test)?;
        let test_auc = auc(&scores, test.labels().expect("protocol split keeps labels"))?;
        summary.push_str(&format!("\ntest AUC {test_auc} on {} rows", test.n_rows()));
    }
    Ok(summary)
}

pub fn score(s: &Settings) -> CliResult<String> {
    let out = s.path("out")?;
    let model = TrainedModel::load(s.path("model")?)?;
    let data = load_data(s)?;
    let scores = model.score(&data)?;
    s.echo(&out)?;
    let path = out.join(SCORES_FILE);
    write_with(&path, |w| {
        writeln!(w, "row_index,score")?;
        for (i, v) in scores.iter().enumerate() {
            writeln!(w, "{i},{v}")?;
        }
        Ok(())
    })?;
    let mut summary = format!("scored {} rows into {}", scores.len(), path.display());
    if let Some(labels) = data.labels() {
        if let Ok(a) = auc(&scores, labels) {
            summary.push_str(&format!("\nAUC {a}"));
        }
    }
    Ok(summary)
}

fn previous_cells(out: &Path) -> CliResult<Vec<Cell>> {
    let mut cells = Vec::new();
    for name in [CELLS_FILE, PARTIAL_CELLS_FILE] {
        let path = out.join(name);
        if path.exists() {
            let file = File::open(&path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            cells.extend(read_cells_csv(BufReader::new(file))?);
        }
    }
    Ok(cells)
}

/// The resolved settings with the `resume` line dropped, for comparing runs.
fn without_resume(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with("resume =")).collect::<Vec<_>>().join("\n")
}

pub fn bench(s: &Settings) -> CliResult<String> {
    let out = s.path("out")?;
    let detectors: Vec<DetectorKind> = s.list("detector")?;
    let k_values: Vec<usize> = s.list("k")?;
    let seeds: Vec<u64> = s.list("seeds")?;
    let eps: Option<f64> = s.get("eps")?;
    let min_pts: Option<f64> = s.get("min-pts")?;
    for d in &detectors {
        if let Some(classic) = d.classic(eps, min_pts)? {
            classic.validate()?;
        }
    }
    let train = train_config(s, k_values[0], 0)?;
    let negatives = negative_config(s, 0)?;
    let resume = s.flag("resume")?;

    let data_path = s.path("data")?;
    let name = match s.raw("name") {
        Some(n) => n.to_string(),
        None => data_path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    let data = load_data(s)?;
    if data.labels().is_none() {
        return Err(CliError::usage("bench needs labelled data (--label-col)"));
    }

    let previous = if resume {
        let echoed = out.join(RESOLVED_FILE);
        if let Ok(old) = fs::read_to_string(&echoed) {
            if without_resume(&old) != without_resume(&s.render()) {
                return Err(CliError::usage(format!(
                    "cannot resume: settings differ from {}",
                    echoed.display()
                )));
            }
        }
        previous_cells(&out)?
    } else {
        Vec::new()
    };
    s.echo(&out)?;

    let partial_path = out.join(PARTIAL_CELLS_FILE);
    let partial = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&partial_path)
            .map_err(|e| write_failed(&partial_path, e))?,
    );
    if partial.lock().unwrap().metadata().map(|m| m.len() == 0).unwrap_or(false) {
        writeln!(partial.lock().unwrap(), "detector,k,seed,auc").map_err(|e| write_failed(&partial_path, e))?;
    }
    let cfg = BenchConfig {
        dataset_name: name,
        train,
        negatives,
        dbscan_eps: eps,
        dbscan_min_pts: min_pts,
    };
    let report = run_benchmark_resume(&data, &detectors, &k_values, &seeds, &cfg, &previous, &|cell| {
        if let Ok(a) = cell.outcome {
            // Best effort: a lost line only costs a recomputation on resume.
            let _ = writeln!(partial.lock().unwrap(), "{},{},{},{}", cell.detector, cell.k, cell.seed, a);
        }
    })?;
    drop(partial);

    write_with(&out.join(CELLS_FILE), |w| report.write_cells_csv(w))?;
    write_with(&out.join(SUMMARY_FILE), |w| report.write_summary_csv(w))?;
    write_with(&out.join(FAILURES_FILE), |w| report.write_failures_csv(w))?;
    fs::remove_file(&partial_path).map_err(|e| write_failed(&partial_path, e))?;

    let failed = report.cells.len() - report.n_succeeded();
    if report.n_succeeded() == 0 {
        return Err(CliError::Internal(format!(
            "all {} benchmark cells failed; see {}",
            failed,
            out.join(FAILURES_FILE).display()
        )));
    }
    let mut summary = format!("{} cells, {} failed", report.cells.len(), failed);
    for a in report.aggregates() {
        summary.push_str(&format!("\n{} k={}: mean AUC {:.4} (std {:.4}, n={})", a.detector, a.k, a.mean, a.std, a.count));
    }
    Ok(summary)
}

pub fn toy(s: &Settings) -> CliResult<String> {
    let out = s.path("out")?;
    let cfg = ToyConfig {
        seed: s.require("seed")?,
        sigma: s.require("sigma")?,
        per_cluster: s.require("per-cluster")?,
        n_uniform: s.require("n-uniform")?,
        ..ToyConfig::default()
    };
    let data = toy_dataset_with(&cfg)?;
    s.echo(&out)?;
    let path = out.join(TOY_FILE);
    let labels = data.labels().expect("toy data is labelled");
    write_with(&path, |w| {
        writeln!(w, "x,y,label")?;
        for (row, label) in data.features().rows().into_iter().zip(labels) {
            writeln!(w, "{},{},{}", row[0], row[1], label)?;
        }
        Ok(())
    })?;
    Ok(format!("wrote {} rows to {}", data.n_rows(), path.display()))
}

/// A classical detector fitted in normalized units, scoring raw points.
struct NormalizedDetector {
    normalizer: Normalizer,
    fitted: FittedDetector,
}

impl Scorer for NormalizedDetector {
    fn dim(&self) -> usize {
        self.fitted.dim()
    }

    fn score_points(&self, points: ArrayView2<'_, f64>) -> lunar::Result<Vec<f64>> {
        self.fitted.score(self.normalizer.apply_matrix(&points.to_owned())?.view())
    }
}

/// Scores a lattice with a saved model, or with a classical detector fitted
/// on every row of `data`. Bounds default to the training range per axis.
pub fn grid(s: &Settings) -> CliResult<String> {
    let out = s.path("out")?;
    let resolution: usize = s.require("resolution")?;
    let (scorer, range): (Box<dyn Scorer>, Vec<(f64, f64)>) = match (s.raw("model"), s.raw("detector")) {
        (Some(_), Some(_)) => return Err(CliError::usage("give either --model or --detector, not both")),
        (None, None) => return Err(CliError::usage("grid needs --model or --detector")),
        (Some(_), None) => {
            let model = TrainedModel::load(s.path("model")?)?;
            let n = &model.normalizer;
            let range = n.min().iter().zip(n.max()).map(|(&a, &b)| (a, b)).collect();
            (Box::new(model), range)
        }
        (None, Some(_)) => {
            let kind: DetectorKind = s.require("detector")?;
            let detector = kind
                .classic(s.get("eps")?, s.get("min-pts")?)?
                .ok_or_else(|| CliError::usage("grid with lunar needs a saved model (--model)"))?;
            detector.validate()?;
            let data = load_data(s)?;
            let normalizer = Normalizer::fit(&data)?;
            let range = normalizer.min().iter().zip(normalizer.max()).map(|(&a, &b)| (a, b)).collect();
            let fitted = FittedDetector::fit(detector, normalizer.apply_matrix(data.features())?, s.require("k")?)?;
            (Box::new(NormalizedDetector { normalizer, fitted }), range)
        }
    };
    if scorer.dim() != 2 {
        return Err(CliError::usage(format!("grid needs 2-D data, got {} features", scorer.dim())));
    }
    let bound = |key: &str, default: f64| -> CliResult<f64> { Ok(s.get(key)?.unwrap_or(default)) };
    let bounds = [
        (bound("x-min", range[0].0)?, bound("x-max", range[0].1)?),
        (bound("y-min", range[1].0)?, bound("y-max", range[1].1)?),
    ];
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(CliError::usage(format!("invalid grid bounds {bounds:?}")));
    }
    let points = contour_grid(scorer.as_ref(), bounds, (resolution, resolution))?;
    s.echo(&out)?;
    let path: PathBuf = out.join(GRID_FILE);
    write_with(&path, |w| write_grid_csv(&points, w))?;
    Ok(format!("wrote {} grid points to {}", points.len(), path.display()))
}
