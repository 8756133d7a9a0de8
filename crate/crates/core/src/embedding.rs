//! Embedding storage: load, validate, normalize and index feature matrices,
//! plus the dense pairwise-distance machinery every other module builds on.
//!
//! One [`EmbeddingView`] holds the n x d feature matrix of a single embedding
//! space; a [`LabeledPool`] aligns several views of the same points with class
//! labels. Distances are dense n x n matrices (the regime is a few thousand
//! points per class, so quadratic storage is the intended representation).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Magic bytes of the binary embedding format.
pub const EMBEDDING_MAGIC: &[u8; 8] = b"MERSEMB1";

/// Row norms may drift from 1.0 by at most this much and still count as
/// normalized.
pub const NORM_TOL: f64 = 1e-6;

/// Distance metric over embedded points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `1 - <u, v>` on unit-norm vectors; values in [0, 2].
    Cosine,
    /// Plain `||u - v||_2`.
    Euclidean,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::Domain(format!("unknown metric `{other}`"))),
        }
    }
}

/// File format of an embedding matrix on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Bin,
}

/// An n x d matrix of feature vectors for one embedding space, with point
/// identities. Rows align with `ids`; all views of the same pool share the
/// same ids in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingView {
    name: String,
    ids: Vec<u32>,
    points: Array2<f64>,
}

impl EmbeddingView {
    /// Build a view with implicit ids `0..n`.
    pub fn new(name: impl Into<String>, points: Array2<f64>) -> Result<Self> {
        let n = points.nrows() as u32;
        Self::with_ids(name, points, (0..n).collect())
    }

    /// Build a view with explicit ids (one per row, unique).
    pub fn with_ids(name: impl Into<String>, points: Array2<f64>, ids: Vec<u32>) -> Result<Self> {
        let name = name.into();
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::Structure(format!(
                "embedding `{name}` must have n >= 1 and d >= 1, got {}x{}",
                points.nrows(),
                points.ncols()
            )));
        }
        if ids.len() != points.nrows() {
            return Err(Error::Structure(format!(
                "embedding `{name}`: {} ids for {} rows",
                ids.len(),
                points.nrows()
            )));
        }
        let mut seen = ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Structure(format!(
                "embedding `{name}`: duplicate point ids"
            )));
        }
        for (row, point) in points.outer_iter().enumerate() {
            if point.iter().any(|v| !v.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "embedding `{name}`: non-finite entry in row {row} (id {})",
                    ids[row]
                )));
            }
        }
        Ok(EmbeddingView { name, ids, points })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// True if every row has unit l2 norm within [`NORM_TOL`].
    pub fn is_normalized(&self) -> bool {
        self.points
            .outer_iter()
            .all(|row| (row.dot(&row).sqrt() - 1.0).abs() <= NORM_TOL)
    }

    /// Divide every row by its l2 norm. All-zero rows are rejected, naming
    /// the offending id, rather than silently kept.
    pub fn l2_normalize(&self) -> Result<EmbeddingView> {
        let mut points = self.points.clone();
        for (row, mut point) in points.outer_iter_mut().enumerate() {
            let norm = point.dot(&point).sqrt();
            if norm == 0.0 {
                return Err(Error::Degenerate(format!(
                    "embedding `{}`: row {row} (id {}) is all-zero and cannot be normalized",
                    self.name, self.ids[row]
                )));
            }
            point.mapv_inplace(|v| v / norm);
        }
        Ok(EmbeddingView {
            name: self.name.clone(),
            ids: self.ids.clone(),
            points,
        })
    }

    /// View restricted to the given row positions, keeping ids.
    pub fn select_rows(&self, rows: &[usize]) -> Result<EmbeddingView> {
        let points =
            Array2::from_shape_fn((rows.len(), self.dim()), |(i, j)| self.points[(rows[i], j)]);
        let ids = rows.iter().map(|&r| self.ids[r]).collect();
        EmbeddingView::with_ids(self.name.clone(), points, ids)
    }
}

/// Several aligned views of one point pool plus per-point class labels.
#[derive(Debug, Clone)]
pub struct LabeledPool {
    views: Vec<EmbeddingView>,
    labels: Vec<i64>,
}

impl LabeledPool {
    pub fn new(views: Vec<EmbeddingView>, labels: Vec<i64>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Structure("a pool needs at least one view".into()));
        }
        let n = views[0].n();
        let ids = views[0].ids().to_vec();
        for view in &views[1..] {
            if view.n() != n {
                return Err(Error::Structure(format!(
                    "view `{}` has {} rows, expected {}",
                    view.name(),
                    view.n(),
                    n
                )));
            }
            if view.ids() != ids.as_slice() {
                return Err(Error::Structure(format!(
                    "view `{}` ids are not aligned with view `{}`",
                    view.name(),
                    views[0].name()
                )));
            }
        }
        if labels.len() != n {
            return Err(Error::Structure(format!(
                "{} labels for {} points",
                labels.len(),
                n
            )));
        }
        Ok(LabeledPool { views, labels })
    }

    pub fn views(&self) -> &[EmbeddingView] {
        &self.views
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Row positions per class label, ascending by label; positions keep the
    /// pool order (ascending id for file-loaded pools).
    pub fn class_rows(&self) -> std::collections::BTreeMap<i64, Vec<usize>> {
        let mut map: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
        for (row, &label) in self.labels.iter().enumerate() {
            map.entry(label).or_default().push(row);
        }
        map
    }

    /// Normalize every view.
    pub fn l2_normalize(&self) -> Result<LabeledPool> {
        let views = self
            .views
            .iter()
            .map(|v| v.l2_normalize())
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledPool {
            views,
            labels: self.labels.clone(),
        })
    }
}

/// Symmetric n x n matrix of pairwise distances with zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    values: Array2<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    /// Wrap a precomputed matrix, validating symmetry (1e-9), zero diagonal,
    /// non-negativity and, for cosine, the [0, 2] range.
    pub fn from_values(values: Array2<f64>, metric: Metric) -> Result<Self> {
        let n = values.nrows();
        if n != values.ncols() || n == 0 {
            return Err(Error::Structure(format!(
                "distance matrix must be square and non-empty, got {}x{}",
                n,
                values.ncols()
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::Structure(format!(
                    "distance matrix diagonal entry ({i},{i}) is {}, expected 0",
                    values[(i, i)]
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if (a - b).abs() > 1e-9 {
                    return Err(Error::Structure(format!(
                        "distance matrix asymmetry at ({i},{j}): {a} vs {b}"
                    )));
                }
                if a < 0.0 || (metric == Metric::Cosine && a > 2.0) {
                    return Err(Error::Structure(format!(
                        "distance matrix entry ({i},{j}) = {a} out of range for {}",
                        metric.as_str()
                    )));
                }
            }
        }
        Ok(DistanceMatrix { values, metric })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// All n(n-1)/2 upper-triangular off-diagonal distances.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.values[(i, j)]);
            }
        }
        out
    }

    /// Uniformly scaled copy (test/benchmark helper for scale-invariance
    /// properties).
    pub fn scaled(&self, c: f64) -> Result<DistanceMatrix> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("scale factor must be > 0, got {c}")));
        }
        Ok(DistanceMatrix {
            values: &self.values * c,
            metric: Metric::Euclidean,
        })
    }
}

/// Compute all pairwise distances under `metric`.
///
/// Cosine distance is `1 - <u, v>` and requires unit-norm rows (call
/// [`EmbeddingView::l2_normalize`] first); results are clamped into [0, 2] so
/// that 1e-7-level norm drift cannot produce `-0.0000001` entries. Rows are
/// computed independently, so the result does not depend on thread count.
pub fn pairwise_distances(view: &EmbeddingView, metric: Metric) -> Result<DistanceMatrix> {
    if metric == Metric::Cosine && !view.is_normalized() {
        return Err(Error::Domain(format!(
            "cosine distance requires unit-norm rows; embedding `{}` is not normalized",
            view.name()
        )));
    }
    let n = view.n();
    let points = view.points();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    // Compute the (min,max)-ordered pair once so (i,j) and
                    // (j,i) run the identical float expression.
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    let (pa, pb) = (points.row(a), points.row(b));
                    match metric {
                        Metric::Cosine => (1.0 - pa.dot(&pb)).clamp(0.0, 2.0),
                        Metric::Euclidean => {
                            let mut acc = 0.0;
                            for (x, y) in pa.iter().zip(pb.iter()) {
                                let d = x - y;
                                acc += d * d;
                            }
                            acc.sqrt()
                        }
                    }
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    Ok(DistanceMatrix { values, metric })
}

/// Ordered k-nearest-neighbour lists (row positions), self excluded, ties
/// broken by lower index.
///
/// Uses partial selection rather than a full sort; the brute-force full-sort
/// oracle in the tests must agree exactly.
pub fn knn(dist: &DistanceMatrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = dist.n();
    if k == 0 || k > n.saturating_sub(1) {
        return Err(Error::Budget(format!(
            "k must satisfy 1 <= k <= n-1; got k={k} with n={n}"
        )));
    }
    let lists = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist.get(i, j), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
            cand.sort_unstable_by(cmp);
            cand.into_iter().map(|(_, j)| j).collect::<Vec<usize>>()
        })
        .collect();
    Ok(lists)
}

/// Read an embedding matrix from disk. Ids are implicit `0..n`.
pub fn load_embedding(path: &Path, format: FileFormat, name: &str) -> Result<EmbeddingView> {
    match format {
        FileFormat::Csv => load_csv(path, name),
        FileFormat::Bin => load_bin(path, name),
    }
}

/// Write an embedding matrix to disk in the given format.
///
/// CSV uses shortest round-trip float formatting, so a CSV round trip is
/// lossless for f64. The binary format narrows to f32 (and is bit-exact from
/// then on).
pub fn save_embedding(view: &EmbeddingView, path: &Path, format: FileFormat) -> Result<()> {
    match format {
        FileFormat::Csv => save_csv(view, path),
        FileFormat::Bin => save_bin(view, path),
    }
}

fn load_csv(path: &Path, name: &str) -> Result<EmbeddingView> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim: Option<usize> = None;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(
                    path,
                    format!("row {}, field {}", line_no + 1, col + 1),
                    format!("`{}` is not a number", field.trim()),
                )
            })?;
            row.push(v);
        }
        if let Some(d) = dim {
            if row.len() != d {
                return Err(Error::Structure(format!(
                    "{}: row {} has {} fields, previous rows have {}",
                    path.display(),
                    line_no + 1,
                    row.len(),
                    d
                )));
            }
        } else {
            dim = Some(row.len());
        }
        rows.push(row);
    }
    let d = dim.ok_or_else(|| Error::Structure(format!("{}: no data rows", path.display())))?;
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let points = Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::Structure(format!("{}: {e}", path.display())))?;
    EmbeddingView::new(name, points)
}

fn save_csv(view: &EmbeddingView, path: &Path) -> Result<()> {
    let mut out = String::new();
    for row in view.points().outer_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn load_bin(path: &Path, name: &str) -> Result<EmbeddingView> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 {
        return Err(Error::parse(
            path,
            format!("byte offset {}", bytes.len()),
            "file truncated before header end",
        ));
    }
    if &bytes[0..8] != EMBEDDING_MAGIC {
        return Err(Error::parse(
            path,
            "byte offset 0",
            format!(
                "bad magic {:?}, expected {:?}",
                &bytes[0..8],
                EMBEDDING_MAGIC
            ),
        ));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = 16 + n * d * 4;
    if bytes.len() != expected {
        return Err(Error::parse(
            path,
            format!("byte offset {}", bytes.len().min(expected)),
            format!(
                "payload size mismatch: header says {n}x{d} ({expected} bytes total), file has {}",
                bytes.len()
            ),
        ));
    }
    let mut flat = Vec::with_capacity(n * d);
    for chunk in bytes[16..].chunks_exact(4) {
        flat.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    let points = Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::Structure(format!("{}: {e}", path.display())))?;
    EmbeddingView::new(name, points)
}

fn save_bin(view: &EmbeddingView, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::with_capacity(16 + view.n() * view.dim() * 4);
    bytes.extend_from_slice(EMBEDDING_MAGIC);
    bytes.extend_from_slice(&(view.n() as u32).to_le_bytes());
    bytes.extend_from_slice(&(view.dim() as u32).to_le_bytes());
    for v in view.points().iter() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Read a labels file: one integer per line, aligned with embedding rows.
pub fn load_labels(path: &Path) -> Result<Vec<i64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: i64 = line.trim().parse().map_err(|_| {
            Error::parse(
                path,
                format!("row {}", line_no + 1),
                format!("`{}` is not an integer label", line.trim()),
            )
        })?;
        labels.push(v);
    }
    if labels.is_empty() {
        return Err(Error::Structure(format!("{}: no labels", path.display())));
    }
    Ok(labels)
}
