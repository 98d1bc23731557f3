//! Binary model file.
//!
//! Layout (all integers `u64` and all reals `f64`, little-endian):
//!
//! ```text
//! "LUNARMDL"            8-byte magic
//! version               u32 (currently 1)
//! k
//! n_dims, dims...       layer widths, input first
//! per layer: weights (row-major, in x out), then biases
//! d, min[d], max[d]     normalizer
//! rows, cols, values    normalized training matrix, row-major
//! best_val_auc, best_epoch
//! n_epochs, then (train_loss, val_auc) per epoch
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::MlpModel;
use super::train::{EpochRecord, TrainedModel};
use crate::dataset::Normalizer;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LUNARMDL";
const VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }

    fn usize(&mut self, v: usize) -> std::io::Result<()> {
        self.u64(v as u64)
    }

    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }

    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) -> std::io::Result<()> {
        vs.into_iter().try_for_each(|&v| self.f64(v))
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.0
            .read_exact(&mut buf)
            .map_err(|_| Error::ModelFormat("truncated file".into()))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    /// A count, bounded so a corrupt header cannot trigger a huge allocation.
    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        if v > (1 << 32) {
            return Err(Error::ModelFormat(format!("implausible length {v}")));
        }
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

impl TrainedModel {
    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = Writer(out);
        w.0.write_all(MAGIC)?;
        w.0.write_all(&VERSION.to_le_bytes())?;
        w.usize(self.k)?;
        let dims = self.model.layer_dims();
        w.usize(dims.len())?;
        dims.iter().try_for_each(|&d| w.usize(d))?;
        for (wt, b) in self.model.weights().iter().zip(self.model.biases()) {
            w.f64s(wt.iter())?;
            w.f64s(b.iter())?;
        }
        w.usize(self.normalizer.dim())?;
        w.f64s(self.normalizer.min())?;
        w.f64s(self.normalizer.max())?;
        w.usize(self.train_matrix.nrows())?;
        w.usize(self.train_matrix.ncols())?;
        w.f64s(self.train_matrix.iter())?;
        w.f64(self.best_val_auc)?;
        w.usize(self.best_epoch)?;
        w.usize(self.history.len())?;
        for h in &self.history {
            w.f64(h.train_loss)?;
            w.f64(h.val_auc)?;
        }
        w.0.flush()
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader(input);
        if &r.bytes::<8>()? != MAGIC {
            return Err(Error::ModelFormat("not a model file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.bytes()?);
        if version != VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let k = r.len()?;
        let n_dims = r.len()?;
        let dims = (0..n_dims).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
        if dims.len() < 2 || dims[0] != k {
            return Err(Error::ModelFormat(format!("layer dims {dims:?} do not start with k = {k}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let values = r.f64s(w[0] * w[1])?;
            weights.push(Array2::from_shape_vec((w[0], w[1]), values).expect("sized above"));
            biases.push(Array1::from(r.f64s(w[1])?));
        }
        let model = MlpModel::from_parameters(weights, biases).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let d = r.len()?;
        let min = r.f64s(d)?;
        let max = r.f64s(d)?;
        let normalizer = Normalizer::from_parts(min, max).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let rows = r.len()?;
        let cols = r.len()?;
        if cols != d {
            return Err(Error::ModelFormat(format!("training matrix has {cols} columns, normalizer {d}")));
        }
        let train_matrix = Array2::from_shape_vec((rows, cols), r.f64s(rows * cols)?).expect("sized above");
        let best_val_auc = r.f64()?;
        let best_epoch = r.len()?;
        let n_hist = r.len()?;
        let history = (1..=n_hist)
            .map(|epoch| {
                Ok(EpochRecord {
                    epoch,
                    train_loss: r.f64()?,
                    val_auc: r.f64()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut trailing = [0u8; 1];
        if r.0.read(&mut trailing).map_err(|e| Error::ModelFormat(e.to_string()))? != 0 {
            return Err(Error::ModelFormat("trailing bytes after model".into()));
        }
        Ok(TrainedModel {
            model,
            normalizer,
            train_matrix,
            k,
            best_val_auc,
            best_epoch,
            history,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::lunar::{train, TrainConfig};
    use crate::negative::NegativeConfig;

    fn tiny_model() -> TrainedModel {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        let v = Array2::from_shape_fn((10, 2), |(i, j)| ((i * 5 + j) % 9) as f64 / 9.0);
        let cfg = TrainConfig {
            k: 3,
            epochs: 2,
            hidden_width: 4,
            hidden_depth: 1,
            ..Default::default()
        };
        train(
            &Dataset::new(x, None).unwrap(),
            &Dataset::new(v, None).unwrap(),
            &NegativeConfig::default(),
            &cfg,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = tiny_model();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = TrainedModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let m = tiny_model();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert!(TrainedModel::read_from(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(TrainedModel::read_from(bad.as_slice()).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(TrainedModel::read_from(long.as_slice()).is_err());
    }
}
