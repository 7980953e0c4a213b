//! Dataset ingestion (CSV and IDX), whole-dataset standardization, the
//! train/validation/test split, and per-feature statistics for the domain
//! sampler.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor::Tensor2;

/// Per-column location/scale fitted on a dataset. Standard deviations use
/// the population convention (divide by n); that choice travels with the
/// scaler so inverse transforms always match.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Identity (0, 1) when targets were left unscaled.
    pub target_mean: f64,
    pub target_std: f64,
}

impl Scaler {
    pub fn apply_features(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.feature_mean.len() {
            return Err(Error::invalid(format!(
                "scaler covers {} features, batch has {}",
                self.feature_mean.len(),
                x.cols()
            )));
        }
        let d = x.cols();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - self.feature_mean[i % d]) / self.feature_std[i % d])
            .collect();
        Tensor2::from_vec(x.rows(), d, data)
    }

    pub fn inverse_features(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.feature_mean.len() {
            return Err(Error::invalid(format!(
                "scaler covers {} features, batch has {}",
                self.feature_mean.len(),
                x.cols()
            )));
        }
        let d = x.cols();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * self.feature_std[i % d] + self.feature_mean[i % d])
            .collect();
        Tensor2::from_vec(x.rows(), d, data)
    }

    pub fn apply_targets(&self, y: &Tensor2) -> Result<Tensor2> {
        let data = y
            .data()
            .iter()
            .map(|&v| (v - self.target_mean) / self.target_std)
            .collect();
        Tensor2::from_vec(y.rows(), y.cols(), data)
    }

    pub fn inverse_targets(&self, y: &Tensor2) -> Result<Tensor2> {
        let data = y
            .data()
            .iter()
            .map(|&v| v * self.target_std + self.target_mean)
            .collect();
        Tensor2::from_vec(y.rows(), y.cols(), data)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Tensor2,
    pub targets: Tensor2,
    pub feature_names: Vec<String>,
    pub scaler: Option<Scaler>,
}

impl Dataset {
    pub fn new(features: Tensor2, targets: Tensor2, feature_names: Vec<String>) -> Result<Self> {
        if targets.shape() != (features.rows(), 1) {
            return Err(Error::invalid(format!(
                "targets must be {}x1, got {}x{}",
                features.rows(),
                targets.rows(),
                targets.cols()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::invalid(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.cols()
            )));
        }
        Ok(Dataset {
            features,
            targets,
            feature_names,
            scaler: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn take_rows(&self, idx: &[usize]) -> Result<Dataset> {
        Ok(Dataset {
            features: self.features.take_rows(idx)?,
            targets: self.targets.take_rows(idx)?,
            feature_names: self.feature_names.clone(),
            scaler: self.scaler.clone(),
        })
    }
}

fn column_stats(x: &Tensor2) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = x.shape();
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (j, &v) in x.row(r).iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for r in 0..n {
        for (j, &v) in x.row(r).iter().enumerate() {
            let c = v - mean[j];
            var[j] += c * c;
        }
    }
    let std = var.iter().map(|&v| (v / n as f64).sqrt()).collect();
    (mean, std)
}

/// Population mean and std of every feature column, for seeding the domain
/// sampler.
pub fn domain_stats(ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
    column_stats(&ds.features)
}

/// Standardize every feature column, and the target when `scale_targets`
/// holds, to zero mean and unit population std over the whole dataset. The
/// fitted scaler is stored on the result for inverse transforms.
pub fn standardize_with(ds: &Dataset, scale_targets: bool) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::invalid("cannot standardize an empty dataset"));
    }
    let (feature_mean, feature_std) = column_stats(&ds.features);
    for (j, &s) in feature_std.iter().enumerate() {
        if s == 0.0 {
            return Err(Error::invalid(format!(
                "feature column {:?} has zero variance; drop it before standardizing",
                ds.feature_names[j]
            )));
        }
    }
    let (target_mean, target_std) = if scale_targets {
        let (m, s) = column_stats(&ds.targets);
        if s[0] == 0.0 {
            return Err(Error::invalid(
                "target column has zero variance; nothing to regress",
            ));
        }
        (m[0], s[0])
    } else {
        (0.0, 1.0)
    };
    let scaler = Scaler {
        feature_mean,
        feature_std,
        target_mean,
        target_std,
    };
    Ok(Dataset {
        features: scaler.apply_features(&ds.features)?,
        targets: scaler.apply_targets(&ds.targets)?,
        feature_names: ds.feature_names.clone(),
        scaler: Some(scaler),
    })
}

/// Whole-dataset standardization of features and target.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    standardize_with(ds, true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: usize,
    /// Fraction of the post-train remainder that becomes validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 5000,
            validation_fraction: 0.10,
            seed: 0,
        }
    }
}

pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Seeded shuffle, then: first `train` rows, floor(fraction * remainder)
/// validation rows, everything else test. Always an exact partition.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    if spec.train == 0 || spec.train >= ds.len() {
        return Err(Error::invalid(format!(
            "train count must lie in 1..{} (dataset size), got {}",
            ds.len(),
            spec.train
        )));
    }
    if !(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0) {
        return Err(Error::invalid("validation fraction must lie in (0, 1)"));
    }
    let n = ds.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(spec.seed));
    let remainder = n - spec.train;
    let n_val = (spec.validation_fraction * remainder as f64).floor() as usize;
    let train = ds.take_rows(&idx[..spec.train])?;
    let validation = ds.take_rows(&idx[spec.train..spec.train + n_val])?;
    let test = ds.take_rows(&idx[spec.train + n_val..])?;
    Ok(Splits {
        train,
        validation,
        test,
    })
}

/// Which column holds the regression target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    fn resolve(&self, header: &[String], path: &str) -> Result<usize> {
        match self {
            ColumnRef::Index(i) => {
                if *i >= header.len() {
                    return Err(Error::parse(
                        path,
                        1,
                        format!("target index {} out of range; file has {} columns", i, header.len()),
                    ));
                }
                Ok(*i)
            }
            ColumnRef::Name(name) => header.iter().position(|h| h == name).ok_or_else(|| {
                Error::parse(
                    path,
                    1,
                    format!(
                        "no column named {:?}; available columns: {}",
                        name,
                        header.join(", ")
                    ),
                )
            }),
        }
    }
}

/// Load a comma-separated file with a header row. All cells must be decimal
/// reals; no quoting.
pub fn load_csv(path: &Path, target: &ColumnRef) -> Result<Dataset> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = match lines.next() {
        Some(Ok(l)) => l,
        Some(Err(e)) => return Err(Error::io(&display, e)),
        None => return Err(Error::parse(&display, 1, "file is empty")),
    };
    let header: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
    let target_col = target.resolve(&header, &display)?;
    let d = header.len() - 1;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_col)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut row = 0usize;
    for (lineno, line) in lines.enumerate() {
        let fileline = lineno + 2;
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::parse(
                &display,
                fileline,
                format!(
                    "data row {} has {} cells, header has {} columns",
                    row,
                    cells.len(),
                    header.len()
                ),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::parse(
                    &display,
                    fileline,
                    format!(
                        "data row {}, column {:?}: expected a number, got {:?}",
                        row, header[j], cell
                    ),
                )
            })?;
            if j == target_col {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }
    if row == 0 {
        return Err(Error::parse(&display, 1, "file has a header but no data rows"));
    }
    Dataset::new(
        Tensor2::from_vec(row, d, features)?,
        Tensor2::from_vec(row, 1, targets)?,
        feature_names,
    )
}

/// Write a dataset as CSV with 17 significant digits, so a reload
/// reproduces every value exactly.
pub fn save_csv(path: &Path, ds: &Dataset, target_name: &str) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    let run = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        for name in &ds.feature_names {
            write!(w, "{},", name)?;
        }
        writeln!(w, "{}", target_name)?;
        for r in 0..ds.len() {
            for v in ds.features.row(r) {
                write!(w, "{:.16e},", v)?;
            }
            writeln!(w, "{:.16e}", ds.targets.get(r, 0))?;
        }
        w.flush()
    };
    run(&mut w).map_err(|e| Error::io(&display, e))
}

fn read_be_u32(bytes: &[u8], at: usize, path: &str) -> Result<u32> {
    let slice = bytes
        .get(at..at + 4)
        .ok_or_else(|| Error::parse(path, 1, "file truncated in header"))?;
    Ok(u32::from_be_bytes([slice[0], slice[1], slice[2], slice[3]]))
}

/// Load image/label pairs in the standard IDX binary layout. Pixels are
/// scaled to [0, 1]; labels become real-valued targets.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img_display = images.display().to_string();
    let lbl_display = labels.display().to_string();
    let mut img_bytes = Vec::new();
    File::open(images)
        .and_then(|mut f| f.read_to_end(&mut img_bytes))
        .map_err(|e| Error::io(&img_display, e))?;
    let mut lbl_bytes = Vec::new();
    File::open(labels)
        .and_then(|mut f| f.read_to_end(&mut lbl_bytes))
        .map_err(|e| Error::io(&lbl_display, e))?;

    if read_be_u32(&img_bytes, 0, &img_display)? != 0x0000_0803 {
        return Err(Error::parse(&img_display, 1, "bad magic: not an IDX3 image file"));
    }
    if read_be_u32(&lbl_bytes, 0, &lbl_display)? != 0x0000_0801 {
        return Err(Error::parse(&lbl_display, 1, "bad magic: not an IDX1 label file"));
    }
    let n = read_be_u32(&img_bytes, 4, &img_display)? as usize;
    let h = read_be_u32(&img_bytes, 8, &img_display)? as usize;
    let w = read_be_u32(&img_bytes, 12, &img_display)? as usize;
    let n_lbl = read_be_u32(&lbl_bytes, 4, &lbl_display)? as usize;
    if n != n_lbl {
        return Err(Error::invalid(format!(
            "image file has {} items, label file has {}",
            n, n_lbl
        )));
    }
    let pixels = img_bytes
        .get(16..16 + n * h * w)
        .ok_or_else(|| Error::parse(&img_display, 1, "file truncated in pixel data"))?;
    let lbl = lbl_bytes
        .get(8..8 + n)
        .ok_or_else(|| Error::parse(&lbl_display, 1, "file truncated in label data"))?;

    let features: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    let targets: Vec<f64> = lbl.iter().map(|&b| b as f64).collect();
    let names = (0..h * w).map(|i| format!("px{}", i)).collect();
    Dataset::new(
        Tensor2::from_vec(n, h * w, features)?,
        Tensor2::from_vec(n, 1, targets)?,
        names,
    )
}
