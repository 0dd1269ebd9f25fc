//! Training, universum and test data: synthetic generators, range scaling and
//! CSV interchange.
//!
//! All randomness comes from [`seeded_rng`], a ChaCha8 stream seeded with
//! `seed_from_u64`. Samples are drawn row-major (row by row, columns left to
//! right), so a given `(spec, seed)` produces bit-identical matrices on every
//! platform.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// The portable generator used for every random draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_finite(x: &ArrayView2<f64>, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Normal-class training vectors, one sample per row. Every row carries the
/// implied label +1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidSpec(format!(
                "dataset must be non-empty, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        check_finite(&x.view(), "dataset")?;
        Ok(Self { x })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.x
    }
}

/// Contradiction samples, known to belong to neither the normal nor the
/// anomalous class.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversumSet {
    x_star: Array2<f64>,
}

impl UniversumSet {
    pub fn new(x_star: Array2<f64>) -> Result<Self> {
        if x_star.nrows() == 0 || x_star.ncols() == 0 {
            return Err(Error::InvalidSpec(format!(
                "universum must be non-empty, got {}x{}",
                x_star.nrows(),
                x_star.ncols()
            )));
        }
        check_finite(&x_star.view(), "universum")?;
        Ok(Self { x_star })
    }

    /// Builds a universum and checks that it pairs with `train`.
    pub fn paired(x_star: Array2<f64>, train: &Dataset) -> Result<Self> {
        if x_star.ncols() != train.dim() {
            return Err(Error::DimensionMismatch {
                expected: train.dim(),
                found: x_star.ncols(),
            });
        }
        Self::new(x_star)
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x_star
    }

    pub fn len(&self) -> usize {
        self.x_star.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x_star.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x_star.ncols()
    }
}

/// Test samples with labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTestSet {
    x: Array2<f64>,
    y: Vec<i8>,
}

impl LabeledTestSet {
    pub fn new(x: Array2<f64>, y: Vec<i8>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidSpec("test set must be non-empty".into()));
        }
        if let Some(bad) = y.iter().position(|&l| l != 1 && l != -1) {
            return Err(Error::InvalidSpec(format!(
                "label {} at row {bad} is not in {{-1, +1}}",
                y[bad]
            )));
        }
        check_finite(&x.view(), "test set")?;
        Ok(Self { x, y })
    }

    /// Stacks positives (label +1) on top of negatives (label -1).
    pub fn from_classes(pos: &Array2<f64>, neg: &Array2<f64>) -> Result<Self> {
        if pos.ncols() != neg.ncols() {
            return Err(Error::DimensionMismatch {
                expected: pos.ncols(),
                found: neg.ncols(),
            });
        }
        let x = ndarray::concatenate(Axis(0), &[pos.view(), neg.view()])
            .expect("column counts checked above");
        let mut y = vec![1i8; pos.nrows()];
        y.extend(std::iter::repeat_n(-1i8, neg.nrows()));
        Self::new(x, y)
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[i8] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn count_label(&self, label: i8) -> usize {
        self.y.iter().filter(|&&l| l == label).count()
    }
}

/// Axis-aligned Gaussian sample specification.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mu: Vec<f64>,
    /// Per-dimension standard deviations.
    pub sigma: Vec<f64>,
    pub count: usize,
    pub seed: u64,
}

impl GaussianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidSpec("count must be positive".into()));
        }
        if self.mu.is_empty() {
            return Err(Error::InvalidSpec("mu must have at least one entry".into()));
        }
        if self.mu.len() != self.sigma.len() {
            return Err(Error::InvalidSpec(format!(
                "mu has {} entries but sigma has {}",
                self.mu.len(),
                self.sigma.len()
            )));
        }
        if let Some(s) = self.sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidSpec(format!(
                "sigma entries must be strictly positive, got {s}"
            )));
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidSpec("mu entries must be finite".into()));
        }
        Ok(())
    }
}

/// Draws `spec.count` rows with column `j` from Normal(mu[j], sigma[j]).
pub fn generate_gaussian(spec: &GaussianSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.mu.len();
    let normals: Vec<Normal<f64>> = spec
        .mu
        .iter()
        .zip(&spec.sigma)
        .map(|(&m, &s)| Normal::new(m, s).expect("validated sigma"))
        .collect();
    let mut rng = seeded_rng(spec.seed);
    let mut x = Array2::zeros((spec.count, d));
    for mut row in x.rows_mut() {
        for (v, dist) in row.iter_mut().zip(&normals) {
            *v = dist.sample(&mut rng);
        }
    }
    Dataset::new(x)
}

/// Distribution of synthetic noise universum entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// i.i.d. N(0, 1) entries.
    Gaussian01,
    /// i.i.d. U[0, 1] entries.
    Uniform01,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian01" => Ok(Self::Gaussian01),
            "uniform01" => Ok(Self::Uniform01),
            other => Err(Error::InvalidSpec(format!(
                "unknown noise kind {other:?} (expected gaussian01 or uniform01)"
            ))),
        }
    }
}

pub fn generate_noise_universum(
    count: usize,
    d: usize,
    kind: NoiseKind,
    seed: u64,
) -> Result<UniversumSet> {
    if count == 0 || d == 0 {
        return Err(Error::InvalidSpec(format!(
            "noise universum needs positive count and dimension, got {count}x{d}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let x = match kind {
        NoiseKind::Gaussian01 => {
            Array2::from_shape_fn((count, d), |_| StandardNormal.sample(&mut rng))
        }
        NoiseKind::Uniform01 => Array2::from_shape_fn((count, d), |_| rng.random::<f64>()),
    };
    UniversumSet::new(x)
}

/// Per-column affine map produced by [`scale_to_range`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleParams {
    pub col_min: Vec<f64>,
    pub col_max: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl ScaleParams {
    fn map(&self, v: f64, j: usize) -> f64 {
        let (mn, mx) = (self.col_min[j], self.col_max[j]);
        if mx > mn {
            self.lo + (v - mn) * (self.hi - self.lo) / (mx - mn)
        } else {
            0.5 * (self.lo + self.hi)
        }
    }

    fn unmap(&self, v: f64, j: usize) -> f64 {
        let (mn, mx) = (self.col_min[j], self.col_max[j]);
        if mx > mn {
            mn + (v - self.lo) * (mx - mn) / (self.hi - self.lo)
        } else {
            mn
        }
    }

    /// Applies the fitted map to new data (test or universum rows).
    pub fn apply(&self, data: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.col_min.len() {
            return Err(Error::DimensionMismatch {
                expected: self.col_min.len(),
                found: data.ncols(),
            });
        }
        let mut out = data.to_owned();
        for ((_, j), v) in out.indexed_iter_mut() {
            *v = self.map(*v, j);
        }
        Ok(out)
    }

    /// Inverse map. Constant columns map back to their single observed value.
    pub fn invert(&self, data: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.col_min.len() {
            return Err(Error::DimensionMismatch {
                expected: self.col_min.len(),
                found: data.ncols(),
            });
        }
        let mut out = data.to_owned();
        for ((_, j), v) in out.indexed_iter_mut() {
            *v = self.unmap(*v, j);
        }
        Ok(out)
    }
}

/// Maps each column's observed min to `lo` and max to `hi`. Constant columns
/// go to the midpoint of the range.
pub fn scale_to_range(data: &ArrayView2<f64>, lo: f64, hi: f64) -> Result<(Array2<f64>, ScaleParams)> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidRange { lo, hi });
    }
    if data.nrows() == 0 || data.ncols() == 0 {
        return Err(Error::InvalidSpec("cannot scale an empty matrix".into()));
    }
    check_finite(data, "data to scale")?;
    let col_min: Vec<f64> = data
        .columns()
        .into_iter()
        .map(|c| c.fold(f64::INFINITY, |a, &b| a.min(b)))
        .collect();
    let col_max: Vec<f64> = data
        .columns()
        .into_iter()
        .map(|c| c.fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
        .collect();
    let params = ScaleParams {
        col_min,
        col_max,
        lo,
        hi,
    };
    let scaled = params.apply(data)?;
    Ok((scaled, params))
}

/// Result of [`load_csv`]: the presence of a trailing `label` column selects
/// the labelled variant.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvData {
    Unlabeled(Dataset),
    Labeled(LabeledTestSet),
}

impl CsvData {
    pub fn into_dataset(self) -> Result<Dataset> {
        match self {
            CsvData::Unlabeled(d) => Ok(d),
            CsvData::Labeled(_) => Err(Error::InvalidSpec(
                "expected an unlabeled file but found a label column".into(),
            )),
        }
    }

    pub fn into_labeled(self) -> Result<LabeledTestSet> {
        match self {
            CsvData::Labeled(t) => Ok(t),
            CsvData::Unlabeled(_) => Err(Error::InvalidSpec(
                "expected a trailing \"label\" column".into(),
            )),
        }
    }
}

/// Reads a comma-separated file with one header row. Row indices in errors
/// are 1-based data rows (the header is row 0).
pub fn load_csv(path: impl AsRef<Path>) -> Result<CsvData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let width = headers.len();
    if width == 0 {
        return Err(Error::Parse {
            row: 0,
            message: "empty header".into(),
        });
    }
    let labeled = headers.get(width - 1) == Some("label");
    let d = if labeled { width - 1 } else { width };
    if d == 0 {
        return Err(Error::Parse {
            row: 0,
            message: "no feature columns".into(),
        });
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != width {
            return Err(Error::Parse {
                row,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric cell {cell:?} in column {j}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("non-finite cell {cell:?} in column {j}"),
                });
            }
            if labeled && j == d {
                if v == 1.0 {
                    labels.push(1i8);
                } else if v == -1.0 {
                    labels.push(-1i8);
                } else {
                    return Err(Error::Parse {
                        row,
                        message: format!("label {cell:?} is not -1 or +1"),
                    });
                }
            } else {
                values.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            row: 1,
            message: "no data rows".into(),
        });
    }
    let x = Array2::from_shape_vec((rows, d), values).expect("row widths checked");
    if labeled {
        Ok(CsvData::Labeled(LabeledTestSet::new(x, labels)?))
    } else {
        Ok(CsvData::Unlabeled(Dataset::new(x)?))
    }
}

/// Writes a matrix with header `x0,x1,...` and optional trailing labels.
/// Floats are written in shortest round-trip form.
pub fn write_csv(path: impl AsRef<Path>, x: &ArrayView2<f64>, labels: Option<&[i8]>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_csv_to(&mut buf, x, labels)?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn write_csv_to<W: std::io::Write>(out: W, x: &ArrayView2<f64>, labels: Option<&[i8]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: l.len(),
            });
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let werr = |e: csv::Error| Error::Report(e.to_string());
    let mut header: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(werr)?;
    for (i, row) in x.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec).map_err(werr)?;
    }
    w.flush().map_err(|e| Error::Report(e.to_string()))
}

/// Column means, used by moment checks.
pub fn column_means(x: &ArrayView2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).expect("non-empty matrix")
}
