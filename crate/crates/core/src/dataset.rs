//! Tabular data ingestion, min-max normalization and the train/validation/test
//! protocol.
//!
//! The protocol puts every labelled anomaly in the test set, subsamples normals
//! to balance the test set 50:50, and splits the normals that remain 85:15 into
//! training and validation partitions. Only normals are ever trained on.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Fraction of the leftover normals that goes to training.
pub const TRAIN_FRACTION_NUM: usize = 85;
pub const TRAIN_FRACTION_DEN: usize = 100;

/// Feature matrix with optional binary labels (0 = normal, 1 = anomaly).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Option<Vec<u8>>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset, rejecting non-finite values and labels outside {0,1}.
    pub fn new(features: Array2<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some((idx, _)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let d = features.ncols().max(1);
            return Err(Error::Csv(format!(
                "non-finite value at row {}, column {}",
                idx / d,
                idx % d
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != features.nrows() {
                return Err(Error::LengthMismatch {
                    left: features.nrows(),
                    right: labels.len(),
                });
            }
            if let Some(row) = labels.iter().position(|&l| l > 1) {
                return Err(Error::BadLabel {
                    row,
                    value: labels[row].to_string(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::LengthMismatch {
                left: self.dim(),
                right: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&r| l[r]).collect()),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Drops the labels, e.g. before handing test rows to a scorer.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            features: self.features.clone(),
            labels: None,
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn into_features(self) -> Array2<f64> {
        self.features
    }
}

/// Reads a headed, comma-separated file. When `label_column` is given that
/// column becomes the labels and every other column a feature; otherwise all
/// columns are features.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label_column)
}

pub fn parse_csv(text: &str, label_column: Option<&str>) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Csv("missing header row".into()))?;
    if header.contains('"') {
        return Err(Error::Csv("quoted fields are not supported".into()));
    }
    let columns: Vec<String> = header
        .trim_start_matches('\u{feff}')
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();
    let label_idx = match label_column {
        Some(name) => Some(
            columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::MissingLabelColumn(name.to_string()))?,
        ),
        None => None,
    };
    let d = columns.len() - usize::from(label_idx.is_some());

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n_rows = 0;
    for (row, (_, line)) in lines.enumerate() {
        let row = row + 1;
        if line.contains('"') {
            return Err(Error::Csv(format!("row {row}: quoted fields are not supported")));
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(Error::Csv(format!(
                "row {row}: expected {} cells, found {}",
                columns.len(),
                cells.len()
            )));
        }
        for (c, cell) in cells.iter().enumerate() {
            if Some(c) == label_idx {
                let label = match *cell {
                    "0" | "0.0" => 0,
                    "1" | "1.0" => 1,
                    other => {
                        return Err(Error::BadLabel {
                            row,
                            value: other.to_string(),
                        })
                    }
                };
                labels.push(label);
                continue;
            }
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::ParseCell {
                    row,
                    column: columns[c].clone(),
                    value: cell.to_string(),
                }
            })?;
            values.push(v);
        }
        n_rows += 1;
    }

    let features = Array2::from_shape_vec((n_rows, d), values)
        .map_err(|e| Error::Csv(e.to_string()))?;
    let names = columns
        .into_iter()
        .enumerate()
        .filter(|(c, _)| Some(*c) != label_idx)
        .map(|(_, n)| n)
        .collect();
    Dataset::new(features, label_idx.map(|_| labels))?.with_feature_names(names)
}

/// Per-feature min-max scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        Self::fit_matrix(train.features())
    }

    pub fn fit_matrix(train: &Array2<f64>) -> Result<Self> {
        if train.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let fold = |init: f64, f: fn(f64, f64) -> f64| -> Vec<f64> {
            train
                .columns()
                .into_iter()
                .map(|c| c.iter().copied().fold(init, f))
                .collect()
        };
        Ok(Self {
            min: fold(f64::INFINITY, f64::min),
            max: fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Reassembles a normalizer from stored extrema.
    pub fn from_parts(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::LengthMismatch {
                left: min.len(),
                right: max.len(),
            });
        }
        if min.iter().zip(&max).any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidConfig("normalizer minimum exceeds maximum".into()));
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            features: self.apply_matrix(data.features())?,
            labels: data.labels.clone(),
            feature_names: data.feature_names.clone(),
        })
    }

    /// Maps each value to `(v - min) / (max - min)`; constant features map to 0.
    pub fn apply_matrix(&self, data: &Array2<f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: data.ncols(),
            });
        }
        let mut out = data.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            let span = hi - lo;
            if span > 0.0 {
                col.mapv_inplace(|v| (v - lo) / span);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }
}

/// The three partitions of one trial, with the source row indices of each.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

/// Seeded split following the evaluation protocol. Partition index lists are
/// returned in ascending source order.
pub fn split(data: &Dataset, seed: u64) -> Result<SplitResult> {
    let labels = data.labels().ok_or(Error::Unlabeled)?;
    let mut normals: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let anomalies: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    if anomalies.is_empty() {
        return Err(Error::DegenerateSplit("dataset has no labelled anomalies".into()));
    }
    if normals.is_empty() {
        return Err(Error::DegenerateSplit("dataset has no labelled normals".into()));
    }

    let mut rng = rng::stream(seed, streams::SPLIT);
    normals.shuffle(&mut rng);

    let n_test_normals = anomalies.len().min(normals.len());
    let (test_normals, rest) = normals.split_at(n_test_normals);
    let n_train = rest.len() * TRAIN_FRACTION_NUM / TRAIN_FRACTION_DEN;
    if n_train == 0 {
        return Err(Error::DegenerateSplit("no normals remain for training".into()));
    }
    let (train_part, val_part) = rest.split_at(n_train);

    let sorted = |xs: &[usize]| {
        let mut v = xs.to_vec();
        v.sort_unstable();
        v
    };
    let train_rows = sorted(train_part);
    let validation_rows = sorted(val_part);
    let mut test_rows = anomalies;
    test_rows.extend_from_slice(test_normals);
    test_rows.sort_unstable();

    Ok(SplitResult {
        train: data.select(&train_rows),
        validation: data.select(&validation_rows),
        test: data.select(&test_rows),
        train_rows,
        validation_rows,
        test_rows,
        seed,
    })
}

/// Seeded 85:15 train/validation split of every row, ignoring labels. Used to
/// fit on data without ground truth or on deliberately contaminated data.
/// Returned partitions are unlabelled and keep ascending source order.
pub fn holdout_split(data: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rows: Vec<usize> = (0..data.n_rows()).collect();
    rows.shuffle(&mut rng::stream(seed, streams::SPLIT));
    let n_train = rows.len() * TRAIN_FRACTION_NUM / TRAIN_FRACTION_DEN;
    if n_train == 0 || n_train == rows.len() {
        return Err(Error::DegenerateSplit(format!(
            "{} rows are too few for a train/validation split",
            rows.len()
        )));
    }
    let (train, val) = rows.split_at_mut(n_train);
    train.sort_unstable();
    val.sort_unstable();
    Ok((data.select(train).without_labels(), data.select(val).without_labels()))
}

#[cfg(test)]
mod tests {
    #[test]
    fn holdout_split_covers_every_row_once() {
        let data = labelled(90, 10);
        let (train, val) = holdout_split(&data, 3).unwrap();
        assert_eq!((train.n_rows(), val.n_rows()), (85, 15));
        assert!(train.labels().is_none() && val.labels().is_none());
        let mut seen: Vec<f64> = train.features().column(0).iter().chain(val.features().column(0)).copied().collect();
        seen.sort_by(f64::total_cmp);
        let mut all: Vec<f64> = data.features().column(0).to_vec();
        all.sort_by(f64::total_cmp);
        assert_eq!(seen, all);
        assert_eq!(holdout_split(&data, 3).unwrap(), (train, val));
        assert!(holdout_split(&labelled(1, 0), 0).is_err());
    }

    use super::*;
    use ndarray::array;

    fn labelled(n_normal: usize, n_anom: usize) -> Dataset {
        let n = n_normal + n_anom;
        let features = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let labels = (0..n).map(|i| u8::from(i >= n_normal)).collect();
        Dataset::new(features, Some(labels)).unwrap()
    }

    #[test]
    fn csv_with_label_column() {
        let ds = parse_csv("a,b,label\n0,0,0\n1,1,0\n9,9,1\n", Some("label")).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.labels(), Some(&[0u8, 0, 1][..]));
        assert_eq!(ds.features(), &array![[0.0, 0.0], [1.0, 1.0], [9.0, 9.0]]);
    }

    #[test]
    fn csv_without_label_column_keeps_it_as_feature() {
        let ds = parse_csv("a,b,label\n0,0,0\n1,1,0\n9,9,1\n", None).unwrap();
        assert!(ds.labels().is_none());
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.feature_names().unwrap(), ["a", "b", "label"]);
    }

    #[test]
    fn csv_bad_cell_names_row_and_column() {
        let err = parse_csv("a,b\nabc,1\n", None).unwrap_err();
        match err {
            Error::ParseCell { row, column, value } => {
                assert_eq!(row, 1);
                assert_eq!(column, "a");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_bad_labels_quotes_and_missing_files() {
        assert!(matches!(
            parse_csv("a,y\n1,2\n", Some("y")),
            Err(Error::BadLabel { row: 1, .. })
        ));
        assert!(parse_csv("a,b\n\"1\",2\n", None).is_err());
        assert!(matches!(parse_csv("a,b\n1,2\n", Some("y")), Err(Error::MissingLabelColumn(_))));
        assert!(matches!(parse_csv("a,b\n1,nan\n", None), Err(Error::ParseCell { .. })));
        assert!(matches!(
            load_csv("/definitely/not/here.csv", None),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn normalizer_extrema() {
        let ds = Dataset::new(array![[0.0, 10.0], [2.0, 20.0]], None).unwrap();
        let n = Normalizer::fit(&ds).unwrap();
        assert_eq!(n.min(), [0.0, 10.0]);
        assert_eq!(n.max(), [2.0, 20.0]);

        let single = Dataset::new(array![[5.0, 5.0]], None).unwrap();
        let n1 = Normalizer::fit(&single).unwrap();
        assert_eq!(n1.min(), n1.max());

        let ds = Dataset::new(array![[-1.0, 0.0], [1.0, 0.0]], None).unwrap();
        let n = Normalizer::fit(&ds).unwrap();
        assert_eq!(n.min(), [-1.0, 0.0]);
        assert_eq!(n.max(), [1.0, 0.0]);

        let empty = Dataset::new(Array2::zeros((0, 2)), None).unwrap();
        assert!(matches!(Normalizer::fit(&empty), Err(Error::EmptyDataset)));
    }

    #[test]
    fn normalizer_apply() {
        let n = Normalizer::from_parts(vec![0.0, 10.0], vec![2.0, 20.0]).unwrap();
        let out = n.apply_matrix(&array![[1.0, 15.0], [4.0, 25.0]]).unwrap();
        assert_eq!(out, array![[0.5, 0.5], [2.0, 1.5]]);

        let constant = Normalizer::from_parts(vec![5.0], vec![5.0]).unwrap();
        assert_eq!(constant.apply_matrix(&array![[5.0]]).unwrap(), array![[0.0]]);

        assert!(matches!(
            n.apply_matrix(&array![[1.0]]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn split_counts_follow_protocol() {
        let ds = labelled(100, 10);
        let s = split(&ds, 3).unwrap();
        assert_eq!(s.test.n_rows(), 20);
        let test_labels = s.test.labels().unwrap();
        assert_eq!(test_labels.iter().filter(|&&l| l == 1).count(), 10);
        assert_eq!(s.train.n_rows(), 76);
        assert_eq!(s.validation.n_rows(), 14);
        assert!(s.train.labels().unwrap().iter().all(|&l| l == 0));
        assert!(s.validation.labels().unwrap().iter().all(|&l| l == 0));
    }

    #[test]
    fn split_with_too_few_normals_fails() {
        let ds = labelled(10, 20);
        let err = split(&ds, 0).unwrap_err();
        assert!(err.to_string().contains("no normals remain for training"));
    }

    #[test]
    fn split_errors() {
        let unl = Dataset::new(Array2::zeros((3, 1)), None).unwrap();
        assert!(matches!(split(&unl, 0), Err(Error::Unlabeled)));
        assert!(matches!(split(&labelled(5, 0), 0), Err(Error::DegenerateSplit(_))));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = labelled(100, 10);
        assert_eq!(split(&ds, 9).unwrap(), split(&ds, 9).unwrap());
        assert_ne!(split(&ds, 9).unwrap().train_rows, split(&ds, 10).unwrap().train_rows);
    }
}
