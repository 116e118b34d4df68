//! Feature datasets: synthetic clusters, CSV ingestion, role splits and
//! pairwise supervision.
//!
//! CSV rows are `label_ids,f_1,…,f_dim` with `label_ids` a `;`-separated list
//! of nonnegative integers, e.g. `1;4,0.0,0.0`. No header row.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashloss::SimilarityMatrix;
use crate::metrics::LabelSet;
use crate::numcore::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Training item; the train split doubles as the retrieval gallery.
    Train,
    Validation,
    Query,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub features: DenseMatrix,
    pub labels: Vec<LabelSet>,
    pub roles: Vec<Role>,
}

impl FeatureDataset {
    /// All items start in the train role.
    pub fn new(features: DenseMatrix, labels: Vec<LabelSet>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} label sets",
                features.rows(),
                labels.len()
            )));
        }
        let roles = vec![Role::Train; labels.len()];
        Ok(Self {
            features,
            labels,
            roles,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn indices(&self, role: Role) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == role).collect()
    }

    pub fn gallery_indices(&self) -> Vec<usize> {
        self.indices(Role::Train)
    }

    pub fn labels_of(&self, idx: &[usize]) -> Vec<LabelSet> {
        idx.iter().map(|&i| self.labels[i].clone()).collect()
    }

    /// Writes the dataset in the CSV format read by [`load_features`].
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for i in 0..self.len() {
            let ids: Vec<String> = self.labels[i].ids().iter().map(u32::to_string).collect();
            let mut line = ids.join(";");
            for v in self.features.row(i) {
                line.push(',');
                line.push_str(&v.to_string());
            }
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Parameters of the default synthetic benchmark.
pub const DEFAULT_CLASSES: usize = 8;
pub const DEFAULT_DIM: usize = 16;
pub const DEFAULT_PER_CLASS: usize = 250;
/// Largest noise level at which a 12-bit baseline still clears 0.95 MAP, so
/// codes do not saturate and comparisons between variants stay informative.
pub const DEFAULT_NOISE_SIGMA: f64 = 1.75;
pub const DEFAULT_DATA_SEED: u64 = 0;

/// The default synthetic benchmark: 8 classes, 16 dimensions, 2000 items.
pub fn default_synthetic() -> Result<FeatureDataset> {
    generate_synthetic(
        DEFAULT_CLASSES,
        DEFAULT_DIM,
        DEFAULT_PER_CLASS,
        DEFAULT_NOISE_SIGMA,
        DEFAULT_DATA_SEED,
    )
}

/// Gaussian clusters: centers `3·N(0, I)`, items `center + noise_sigma·N(0, I)`,
/// one label per item, class-major order.
pub fn generate_synthetic(
    n_classes: usize,
    dim: usize,
    n_per_class: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<FeatureDataset> {
    if n_classes == 0 || dim == 0 || n_per_class == 0 {
        return Err(Error::config(
            "classes, dim and items per class must all be at least 1",
        ));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::config(format!(
            "noise sigma must be nonnegative, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    3.0 * z
                })
                .collect()
        })
        .collect();
    let n = n_classes * n_per_class;
    let mut values = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            for &m in center {
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push(m + noise_sigma * z);
            }
            labels.push(LabelSet::single(c as u32));
        }
    }
    FeatureDataset::new(DenseMatrix::from_vec(n, dim, values)?, labels)
}

pub fn load_features(path: &Path) -> Result<FeatureDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    // the reader's own line counter drifts on CRLF and blank lines
    let line_at = |pos: Option<&csv::Position>| {
        pos.map_or(0, |p| {
            let mut start = (p.byte() as usize).min(bytes.len());
            while start < bytes.len() && matches!(bytes[start], b'\r' | b'\n') {
                start += 1;
            }
            1 + bytes[..start].iter().filter(|&&b| b == b'\n').count() as u64
        })
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut dim: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: line_at(e.position()),
            message: e.to_string(),
        })?;
        let line = line_at(record.position());
        let parse_err = |message: String| Error::Parse { line, message };
        let mut fields = record.iter();
        let label_field = fields.next().unwrap_or("");
        let ids = label_field
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| parse_err(format!("invalid label id {s:?}")))
            })
            .collect::<Result<Vec<u32>>>()?;
        if ids.is_empty() {
            return Err(parse_err("empty label list".into()));
        }
        let row = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("invalid feature value {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.is_empty() {
            return Err(parse_err("row has no features".into()));
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(parse_err(format!(
                    "row has {} features, expected {d}",
                    row.len()
                )))
            }
            Some(_) => {}
        }
        values.extend(row);
        labels.push(LabelSet::new(ids)?);
    }
    let dim = dim.ok_or_else(|| Error::Parse {
        line: 0,
        message: "file contains no rows".into(),
    })?;
    FeatureDataset::new(DenseMatrix::from_vec(labels.len(), dim, values)?, labels)
}

/// Default validation size: 10% of the non-query items, capped at 500.
pub fn default_validation_size(n: usize, n_query: usize) -> usize {
    (n.saturating_sub(n_query) / 10).min(500)
}

/// Seeded shuffle; the first `n_query` items become queries, the next
/// `n_validation` validation items, the rest train (and gallery).
pub fn assign_splits(
    ds: &FeatureDataset,
    n_validation: usize,
    n_query: usize,
    seed: u64,
) -> Result<FeatureDataset> {
    if n_validation + n_query >= ds.len() {
        return Err(Error::config(format!(
            "{n_query} queries + {n_validation} validation items leave no training items out of {}",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut roles = vec![Role::Train; ds.len()];
    for &i in &order[..n_query] {
        roles[i] = Role::Query;
    }
    for &i in &order[n_query..n_query + n_validation] {
        roles[i] = Role::Validation;
    }
    Ok(FeatureDataset {
        roles,
        ..ds.clone()
    })
}

/// Per-dimension zero mean, unit variance using train-split statistics.
/// Constant dimensions are only centered.
pub fn standardize(ds: &FeatureDataset) -> Result<FeatureDataset> {
    let train = ds.indices(Role::Train);
    if train.is_empty() {
        return Err(Error::config("standardization needs at least one training item"));
    }
    let dim = ds.dim();
    let nt = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for &i in &train {
        for (m, v) in mean.iter_mut().zip(ds.features.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nt);
    let mut var = vec![0.0; dim];
    for &i in &train {
        for ((s, v), m) in var.iter_mut().zip(ds.features.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|s| {
            let sd = (s / nt).sqrt();
            if sd > 0.0 {
                1.0 / sd
            } else {
                1.0
            }
        })
        .collect();
    let mut features = ds.features.clone();
    for r in 0..features.rows() {
        for ((v, m), s) in features.row_mut(r).iter_mut().zip(&mean).zip(&scale) {
            *v = (*v - m) * s;
        }
    }
    Ok(FeatureDataset {
        features,
        ..ds.clone()
    })
}

pub fn build_similarity(batch_labels: &[LabelSet], other_labels: &[LabelSet]) -> Result<SimilarityMatrix> {
    SimilarityMatrix::from_labels(batch_labels, other_labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_shapes_and_determinism() {
        let ds = generate_synthetic(8, 16, 250, 1.0, 3).unwrap();
        assert_eq!(ds.len(), 2000);
        assert_eq!(ds.dim(), 16);
        let mut ids: Vec<u32> = ds.labels.iter().map(|l| l.ids()[0]).collect();
        ids.dedup();
        assert_eq!(ids, (0..8).collect::<Vec<_>>());
        assert_eq!(ds, generate_synthetic(8, 16, 250, 1.0, 3).unwrap());
        assert!(generate_synthetic(0, 16, 250, 1.0, 3).is_err());
        assert!(generate_synthetic(2, 16, 250, -1.0, 3).is_err());
    }

    #[test]
    fn zero_noise_collapses_to_centers() {
        let ds = generate_synthetic(3, 4, 5, 0.0, 11).unwrap();
        for c in 0..3 {
            let first = ds.features.row(c * 5).to_vec();
            for i in 0..5 {
                assert_eq!(ds.features.row(c * 5 + i), first.as_slice());
            }
        }
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_parsing() {
        let f = write_tmp("3,0.5,-1.0\r\n1;4,0.0,0.0\n");
        let ds = load_features(f.path()).unwrap();
        assert_eq!(ds.labels[0].ids(), &[3]);
        assert_eq!(ds.features.row(0), &[0.5, -1.0]);
        assert_eq!(ds.labels[1].ids(), &[1, 4]);

        let f = write_tmp("3,0.5,-1.0\n2,0.5\n");
        match load_features(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = write_tmp(",0.5\n");
        assert!(matches!(load_features(f.path()), Err(Error::Parse { line: 1, .. })));
        let f = write_tmp("1,abc\n");
        assert!(matches!(load_features(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let ds = generate_synthetic(2, 3, 4, 0.7, 5).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        ds.save_csv(f.path()).unwrap();
        assert_eq!(load_features(f.path()).unwrap(), ds);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = generate_synthetic(4, 2, 250, 1.0, 1).unwrap();
        let s = assign_splits(&ds, 200, 200, 9).unwrap();
        assert_eq!(s.indices(Role::Train).len(), 600);
        assert_eq!(s.indices(Role::Query).len(), 200);
        assert_eq!(s.indices(Role::Validation).len(), 200);
        assert_eq!(s, assign_splits(&ds, 200, 200, 9).unwrap());
        assert!(assign_splits(&ds, 500, 500, 9).is_err());
    }

    #[test]
    fn standardized_train_split_has_unit_moments() {
        let ds = assign_splits(&generate_synthetic(3, 4, 50, 2.0, 2).unwrap(), 10, 10, 0).unwrap();
        let st = standardize(&ds).unwrap();
        let train = st.indices(Role::Train);
        for d in 0..4 {
            let xs: Vec<f64> = train.iter().map(|&i| st.features.get(i, d)).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn similarity_examples() {
        let same = vec![LabelSet::single(2); 3];
        let s = build_similarity(&same, &same).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| s.get(i, j) == 1)));
        let two = vec![LabelSet::single(0), LabelSet::single(1)];
        let s = build_similarity(&two, &two).unwrap();
        assert_eq!((s.get(0, 1), s.get(1, 0)), (-1, -1));
        let multi = vec![LabelSet::new(vec![1, 5]).unwrap(), LabelSet::new(vec![5, 7]).unwrap()];
        assert_eq!(build_similarity(&multi, &multi).unwrap().get(0, 1), 1);
    }

    #[test]
    fn default_validation_size_caps() {
        assert_eq!(default_validation_size(2000, 200), 180);
        assert_eq!(default_validation_size(100_000, 200), 500);
    }
}
