//! Datasets: synthetic generators, delimited-text loading, standardization
//! and seeded train/test splits.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    pub feature_names: Option<Vec<String>>,
    pub target_name: Option<String>,
    pub source_tag: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        targets: Array1<f64>,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        if features.nrows() != targets.len() {
            return Err(Error::Shape(format!(
                "{} feature rows against {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        if features
            .iter()
            .chain(targets.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Data("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            targets,
            feature_names: None,
            target_name: None,
            source_tag: source_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            source_tag: self.source_tag.clone(),
        }
    }

    /// Writes the dataset as comma-separated text with a header, target last.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header: Vec<String> = match &self.feature_names {
            Some(names) => names.clone(),
            None => (0..self.dim()).map(|j| format!("x{j}")).collect(),
        };
        header.push(self.target_name.clone().unwrap_or_else(|| "y".into()));
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for (row, &t) in self.features.rows().into_iter().zip(self.targets.iter()) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(t.to_string());
            w.write_record(&rec).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// One draw from the skew-normal density `2 phi(x) Phi(alpha x)`.
///
/// With `delta = alpha / sqrt(1 + alpha^2)` and independent standard normals
/// `z0`, `z1`, returns `delta |z0| + sqrt(1 - delta^2) z1`.
pub fn sample_skew_normal<R: Rng + ?Sized>(skew_alpha: f64, rng: &mut R) -> f64 {
    let delta = skew_alpha / (1.0 + skew_alpha * skew_alpha).sqrt();
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    delta * z0.abs() + (1.0 - delta * delta).sqrt() * z1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SineSpec {
    pub n: usize,
    pub x_low: f64,
    pub x_high: f64,
    pub noise_scale: f64,
    pub skew_alpha: f64,
}

impl Default for SineSpec {
    fn default() -> Self {
        Self {
            n: 100,
            x_low: -2.0,
            x_high: 2.0,
            noise_scale: 0.3,
            skew_alpha: 100.0,
        }
    }
}

impl SineSpec {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("synthetic dataset needs n >= 1".into()));
        }
        if !(self.x_low < self.x_high) || !self.x_low.is_finite() || !self.x_high.is_finite() {
            return Err(Error::Config(format!(
                "invalid x range [{}, {}]",
                self.x_low, self.x_high
            )));
        }
        if !self.noise_scale.is_finite() || !self.skew_alpha.is_finite() {
            return Err(Error::Config("noise parameters must be finite".into()));
        }
        Ok(())
    }
}

/// `y = 1.5 sin(x) + noise_scale * xi`, `x` uniform on the range and `xi`
/// skew-normal with the given shape.
pub fn gen_sine(spec: &SineSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let xi: f64 = rng.random_range(spec.x_low..spec.x_high);
        let noise = sample_skew_normal(spec.skew_alpha, &mut rng);
        x.push(xi);
        y.push(1.5 * xi.sin() + spec.noise_scale * noise);
    }
    let mut ds = Dataset::new(
        Array2::from_shape_vec((spec.n, 1), x).expect("n x 1"),
        Array1::from(y),
        format!("sine(seed={seed})"),
    )?;
    ds.feature_names = Some(vec!["x".into()]);
    ds.target_name = Some("y".into());
    Ok(ds)
}

/// Skew-normal noise around a flat zero mean over the same x range.
pub fn gen_skew_normal(spec: &SineSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        x.push(rng.random_range(spec.x_low..spec.x_high));
        y.push(spec.noise_scale * sample_skew_normal(spec.skew_alpha, &mut rng));
    }
    let mut ds = Dataset::new(
        Array2::from_shape_vec((spec.n, 1), x).expect("n x 1"),
        Array1::from(y),
        format!("skew_normal(seed={seed})"),
    )?;
    ds.feature_names = Some(vec!["x".into()]);
    ds.target_name = Some("y".into());
    Ok(ds)
}

/// Which column holds the regression target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

impl Default for TargetColumn {
    fn default() -> Self {
        TargetColumn::Name("last".into())
    }
}

impl std::str::FromStr for TargetColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

/// Field separator for delimited files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    #[default]
    Comma,
    Semicolon,
    Tab,
    /// Runs of spaces or tabs.
    Whitespace,
}

impl std::str::FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "," | "comma" => Ok(Delimiter::Comma),
            ";" | "semicolon" => Ok(Delimiter::Semicolon),
            "\t" | "\\t" | "tab" => Ok(Delimiter::Tab),
            " " | "whitespace" | "space" => Ok(Delimiter::Whitespace),
            other => Err(Error::Config(format!("unsupported delimiter `{other}`"))),
        }
    }
}

fn read_rows(path: &Path, delimiter: Delimiter) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sep = match delimiter {
        Delimiter::Whitespace => {
            return Ok(text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.split_whitespace().map(str::to_string).collect())
                .collect())
        }
        Delimiter::Comma => b',',
        Delimiter::Semicolon => b';',
        Delimiter::Tab => b'\t',
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(sep)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

/// Loads a numeric table; every column except the target (and any listed
/// in `ignore`) becomes a feature. A first row that does not parse as
/// numbers is treated as a header.
pub fn load_delimited(
    path: &Path,
    target: &TargetColumn,
    delimiter: Delimiter,
    ignore: &[usize],
) -> Result<Dataset> {
    let rows = read_rows(path, delimiter)?;
    let first = rows.first().ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: "file has no rows".into(),
    })?;
    let has_header = first.iter().any(|c| c.parse::<f64>().is_err());
    let header: Option<Vec<String>> = has_header.then(|| first.clone());
    let width = first.len();
    let body = &rows[usize::from(has_header)..];
    if body.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "file has a header but no data rows".into(),
        });
    }

    let target_idx = match target {
        TargetColumn::Index(i) => *i,
        TargetColumn::Name(name) if name == "last" => width - 1,
        TargetColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| {
                Error::Config(format!("no column named `{name}` in {}", path.display()))
            })?,
    };
    if target_idx >= width {
        return Err(Error::Config(format!(
            "target column {target_idx} out of range for {width} columns"
        )));
    }
    let feature_cols: Vec<usize> = (0..width)
        .filter(|&j| j != target_idx && !ignore.contains(&j))
        .collect();

    let mut features = Vec::with_capacity(body.len() * feature_cols.len());
    let mut targets = Vec::with_capacity(body.len());
    let line_offset = 1 + usize::from(has_header);
    for (r, row) in body.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Cell {
                path: path.to_path_buf(),
                row: r + line_offset,
                column: row.len(),
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
        let parse = |j: usize| -> Result<f64> {
            let cell = &row[j];
            let v: f64 = cell.parse().map_err(|_| Error::Cell {
                path: path.to_path_buf(),
                row: r + line_offset,
                column: j + 1,
                message: format!("not a number: `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Cell {
                    path: path.to_path_buf(),
                    row: r + line_offset,
                    column: j + 1,
                    message: format!("non-finite value `{cell}`"),
                });
            }
            Ok(v)
        };
        for &j in &feature_cols {
            features.push(parse(j)?);
        }
        targets.push(parse(target_idx)?);
    }

    let mut ds = Dataset::new(
        Array2::from_shape_vec((body.len(), feature_cols.len()), features).expect("row-major"),
        Array1::from(targets),
        path.display().to_string(),
    )?;
    if let Some(h) = header {
        ds.feature_names = Some(feature_cols.iter().map(|&j| h[j].clone()).collect());
        ds.target_name = Some(h[target_idx].clone());
    }
    Ok(ds)
}

/// Per-column standardization statistics, fit on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

fn mean_std(col: ArrayView1<f64>) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // Constant columns are left unscaled.
    (mean, if std > 0.0 { std } else { 1.0 })
}

impl NormStats {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Data("cannot fit normalization on zero rows".into()));
        }
        let (feature_mean, feature_std) =
            train.features.columns().into_iter().map(mean_std).unzip();
        let (target_mean, target_std) = mean_std(train.targets.view());
        Ok(Self {
            feature_mean,
            feature_std,
            target_mean,
            target_std,
        })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.feature_mean.len() {
            return Err(Error::Shape(format!(
                "statistics for {} features applied to {}",
                self.feature_mean.len(),
                data.dim()
            )));
        }
        let mut out = data.clone();
        for (j, mut col) in out.features.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.feature_mean[j], self.feature_std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out.targets.mapv_inplace(|t| self.normalize_target(t));
        Ok(out)
    }

    pub fn normalize_target(&self, t: f64) -> f64 {
        (t - self.target_mean) / self.target_std
    }

    pub fn denormalize_target(&self, t: f64) -> f64 {
        t * self.target_std + self.target_mean
    }

    pub fn denormalize_targets(&self, t: &[f64]) -> Vec<f64> {
        t.iter().map(|&v| self.denormalize_target(v)).collect()
    }

    pub fn denormalize(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.feature_mean.len() {
            return Err(Error::Shape("feature count mismatch".into()));
        }
        let mut out = data.clone();
        for (j, mut col) in out.features.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.feature_mean[j], self.feature_std[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        out.targets.mapv_inplace(|t| self.denormalize_target(t));
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub split_index: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64, split_index: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        Ok(Self {
            test_fraction,
            seed,
            split_index,
        })
    }

    /// Shuffled row order determined by `(seed, split_index)`.
    pub fn permutation(&self, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.split_index);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx
    }

    /// Rows kept for training: `ceil((1 - f) n)`, leaving at least one row on
    /// each side when `n >= 2`.
    pub fn train_size(&self, n: usize) -> usize {
        let test = (self.test_fraction * n as f64 + 1e-9).floor() as usize;
        let test = if n >= 2 { test.clamp(1, n - 1) } else { 0 };
        n - test
    }
}

/// Seeded shuffle, then the first `train_size` rows go to training.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> (Dataset, Dataset) {
    let perm = spec.permutation(dataset.len());
    let cut = spec.train_size(dataset.len());
    (dataset.select(&perm[..cut]), dataset.select(&perm[cut..]))
}

/// Index form of [`split`]: (train rows, test rows).
pub fn split_indices(n: usize, spec: &SplitSpec) -> (Vec<usize>, Vec<usize>) {
    let perm = spec.permutation(n);
    let cut = spec.train_size(n);
    (perm[..cut].to_vec(), perm[cut..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn noiseless_sine_is_exact() {
        let spec = SineSpec {
            noise_scale: 0.0,
            ..SineSpec::default()
        };
        let ds = gen_sine(&spec, 3).unwrap();
        assert_eq!(ds.len(), 100);
        for (x, y) in ds.features.column(0).iter().zip(ds.targets.iter()) {
            assert_eq!(*y, 1.5 * x.sin());
            assert!((-2.0..2.0).contains(x));
        }
        assert_eq!(gen_sine(&spec, 3).unwrap(), ds);
    }

    #[test]
    fn sine_rejects_bad_range() {
        let spec = SineSpec {
            x_low: 1.0,
            x_high: 1.0,
            ..SineSpec::default()
        };
        assert!(gen_sine(&spec, 0).is_err());
        let spec = SineSpec {
            n: 0,
            ..SineSpec::default()
        };
        assert!(gen_sine(&spec, 0).is_err());
    }

    #[test]
    fn skew_sign_mirrors() {
        let mean = |alpha: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..20_000)
                .map(|_| sample_skew_normal(alpha, &mut rng))
                .sum::<f64>()
                / 20_000.0
        };
        assert!((mean(5.0) + mean(-5.0)).abs() < 0.03);
    }

    #[test]
    fn loads_with_and_without_header() {
        let f = write_tmp("1,2,3\n4,5,6\n7,8,9\n");
        let ds = load_delimited(f.path(), &TargetColumn::Index(2), Delimiter::Comma, &[]).unwrap();
        assert_eq!(ds.features.dim(), (3, 2));
        assert_eq!(ds.targets.to_vec(), vec![3.0, 6.0, 9.0]);

        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n");
        let ds = load_delimited(
            f.path(),
            &TargetColumn::Name("a".into()),
            Delimiter::Comma,
            &[],
        )
        .unwrap();
        assert_eq!(ds.targets.to_vec(), vec![1.0, 4.0]);
        assert_eq!(ds.feature_names.unwrap(), vec!["b", "y"]);

        let f = write_tmp("1 2  3\n4\t5 6\n");
        let ds = load_delimited(
            f.path(),
            &TargetColumn::default(),
            Delimiter::Whitespace,
            &[1],
        )
        .unwrap();
        assert_eq!(ds.features.dim(), (2, 1));
        assert_eq!(ds.targets.to_vec(), vec![3.0, 6.0]);
    }

    #[test]
    fn loader_errors_are_located() {
        let f = write_tmp("1,2,3\n4,x,6\n");
        match load_delimited(f.path(), &TargetColumn::Index(2), Delimiter::Comma, &[]) {
            Err(Error::Cell { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("1,2,3\n4,5\n");
        assert!(matches!(
            load_delimited(f.path(), &TargetColumn::Index(2), Delimiter::Comma, &[]),
            Err(Error::Cell { row: 2, .. })
        ));
        let f = write_tmp("1,2,3\n4,inf,6\n");
        assert!(load_delimited(f.path(), &TargetColumn::Index(2), Delimiter::Comma, &[]).is_err());
        assert!(matches!(
            load_delimited(
                Path::new("/no/such/file.csv"),
                &TargetColumn::Index(0),
                Delimiter::Comma,
                &[]
            ),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn normalization_round_trip() {
        let ds = gen_sine(&SineSpec::default(), 1).unwrap();
        let stats = NormStats::fit(&ds).unwrap();
        let z = stats.apply(&ds).unwrap();
        let again = NormStats::fit(&z).unwrap();
        assert!(again.target_mean.abs() < 1e-12 && (again.target_std - 1.0).abs() < 1e-12);
        let back = stats.denormalize(&z).unwrap();
        for (a, b) in back.targets.iter().zip(ds.targets.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn constant_column_gets_unit_std() {
        let ds = Dataset::new(
            Array2::from_shape_vec((3, 2), vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]).unwrap(),
            Array1::from(vec![1.0, 2.0, 3.0]),
            "t",
        )
        .unwrap();
        let stats = NormStats::fit(&ds).unwrap();
        assert_eq!(stats.feature_std[1], 1.0);
        assert!(stats
            .apply(&ds)
            .unwrap()
            .features
            .column(1)
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = Dataset::new(
            Array2::from_shape_fn((10, 1), |(i, _)| i as f64),
            Array1::from_shape_fn(10, |i| i as f64),
            "t",
        )
        .unwrap();
        let spec = SplitSpec::new(0.1, 42, 3).unwrap();
        let (train, test) = split(&ds, &spec);
        assert_eq!((train.len(), test.len()), (9, 1));
        let (train2, test2) = split(&ds, &spec);
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        let mut all: Vec<f64> = train
            .targets
            .iter()
            .chain(test.targets.iter())
            .copied()
            .collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(f64::from).collect::<Vec<_>>());
        let other = SplitSpec::new(0.1, 42, 4).unwrap();
        assert_ne!(spec.permutation(10), other.permutation(10));
        assert!(SplitSpec::new(1.0, 0, 0).is_err());
    }
}
