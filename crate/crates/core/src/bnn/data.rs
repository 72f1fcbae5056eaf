use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A numeric CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_reader<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            // Row numbers count the header as row 1.
            let line = r + 2;
            let rec = rec.map_err(|e| Error::Parse(format!("row {line}: {e}")))?;
            let row = rec
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| {
                            Error::Parse(format!(
                                "non-numeric cell `{cell}` at row {line}, column {} (`{}`)",
                                c + 1,
                                header.get(c).map(String::as_str).unwrap_or("?")
                            ))
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(RawTable { header, rows })
    }

    /// `n` rows chosen uniformly without replacement (all rows if `n` is
    /// not smaller than the table), kept in their original order.
    pub fn subsample(&self, n: usize, seed: u64) -> RawTable {
        if n >= self.rows.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.rows.len(), n).into_vec();
        idx.sort_unstable();
        RawTable {
            header: self.header.clone(),
            rows: idx.into_iter().map(|i| self.rows[i].clone()).collect(),
        }
    }

    /// Splits off the named target column.
    pub fn features_and_target(
        &self,
        target_column: &str,
    ) -> Result<(Array2<f64>, Vec<f64>, Vec<String>)> {
        let t = self
            .header
            .iter()
            .position(|h| h == target_column)
            .ok_or_else(|| {
                Error::config(format!(
                    "target column `{target_column}` not found (columns: {})",
                    self.header.join(", ")
                ))
            })?;
        let d = self.header.len() - 1;
        let names = self
            .header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != t)
            .map(|(_, h)| h.clone())
            .collect();
        let mut x = Array2::zeros((self.rows.len(), d));
        let mut y = Vec::with_capacity(self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            let mut c = 0;
            for (i, v) in row.iter().enumerate() {
                if i == t {
                    y.push(*v);
                } else {
                    x[[r, c]] = *v;
                    c += 1;
                }
            }
        }
        Ok((x, y, names))
    }
}

/// Per-column affine standardization `(v − mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1 for constant columns.
    pub scale: Vec<f64>,
}

impl Normalization {
    fn fit(columns: impl Iterator<Item = Vec<f64>>) -> Self {
        let (mut mean, mut scale) = (Vec::new(), Vec::new());
        for col in columns {
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(m);
            scale.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Normalization { mean, scale }
    }

    pub fn normalize(&self, col: usize, v: f64) -> f64 {
        (v - self.mean[col]) / self.scale[col]
    }

    pub fn denormalize(&self, col: usize, v: f64) -> f64 {
        v * self.scale[col] + self.mean[col]
    }
}

/// Standardized regression data with a fixed train/test split.
///
/// Features and targets are stored standardized with statistics computed
/// on the training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    features: Array2<f64>,
    targets: Vec<f64>,
    feature_norm: Normalization,
    target_norm: Normalization,
    train: Vec<usize>,
    test: Vec<usize>,
    feature_names: Vec<String>,
}

impl RegressionDataset {
    /// Splits `round(N · test_fraction)` rows off as the test set with a
    /// seeded shuffle, then standardizes with training statistics.
    pub fn from_arrays(
        features: Array2<f64>,
        targets: Vec<f64>,
        feature_names: Vec<String>,
        split_seed: u64,
        test_fraction: f64,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 || targets.len() != n {
            return Err(Error::argument(format!(
                "dataset needs matching non-empty features and targets ({} vs {})",
                n,
                targets.len()
            )));
        }
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::config(format!(
                "test_fraction must lie in [0, 1), got {test_fraction}"
            )));
        }
        let n_test = ((n as f64 * test_fraction).round() as usize).min(n - 1);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
        let mut test = perm[..n_test].to_vec();
        let mut train = perm[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Self::with_split(features, targets, feature_names, train, test)
    }

    fn with_split(
        mut features: Array2<f64>,
        mut targets: Vec<f64>,
        feature_names: Vec<String>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let feature_norm = Normalization::fit(
            features
                .axis_iter(Axis(1))
                .map(|col| train.iter().map(|&i| col[i]).collect()),
        );
        let target_norm =
            Normalization::fit(std::iter::once(train.iter().map(|&i| targets[i]).collect()));
        for mut row in features.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = feature_norm.normalize(c, *v);
            }
        }
        for y in &mut targets {
            *y = target_norm.normalize(0, *y);
        }
        Ok(RegressionDataset {
            features,
            targets,
            feature_norm,
            target_norm,
            train,
            test,
            feature_names,
        })
    }

    /// Re-splits the training rows into a smaller training set and a
    /// validation set (returned as the test split), refitting the
    /// standardization on the reduced training rows.
    pub fn validation_split(&self, seed: u64, fraction: f64) -> Result<Self> {
        let x = self.raw_features(&self.train);
        let y: Vec<f64> = self.train.iter().map(|&i| self.raw_target(i)).collect();
        Self::from_arrays(x, y, self.feature_names.clone(), seed, fraction)
    }

    fn raw_features(&self, rows: &[usize]) -> Array2<f64> {
        let mut x = Array2::zeros((rows.len(), self.input_dim()));
        for (r, &i) in rows.iter().enumerate() {
            for c in 0..self.input_dim() {
                x[[r, c]] = self.feature_norm.denormalize(c, self.features[[i, c]]);
            }
        }
        x
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Standardized features for every row.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Standardized targets for every row.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn raw_target(&self, i: usize) -> f64 {
        self.target_norm.denormalize(0, self.targets[i])
    }

    pub fn feature_normalization(&self) -> &Normalization {
        &self.feature_norm
    }

    pub fn target_normalization(&self) -> &Normalization {
        &self.target_norm
    }

    /// Target scale: multiply standardized quantities by this to get
    /// original units.
    pub fn target_scale(&self) -> f64 {
        self.target_norm.scale[0]
    }

    pub fn normalize_features(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(c, v)| self.feature_norm.normalize(c, *v))
            .collect()
    }

    pub fn denormalize_target(&self, y: f64) -> f64 {
        self.target_norm.denormalize(0, y)
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }
}

/// Reads a numeric CSV, splits off `target_column`, and builds a seeded
/// train/test split.
pub fn load_uci_csv(
    path: &Path,
    target_column: &str,
    split_seed: u64,
    test_fraction: f64,
) -> Result<RegressionDataset> {
    let table = RawTable::read(path)?;
    let (x, y, names) = table.features_and_target(target_column)?;
    RegressionDataset::from_arrays(x, y, names, split_seed, test_fraction)
}
