//! Pairwise hashing objectives.
//!
//! The discrete loss scores ±1 codes directly:
//! `Σ_{i,j} (b_i·b_j − K s_ij)²` over all query/gallery pairs.
//! The relaxed loss replaces `b` with the continuous encoder output `u` and adds
//! a quantization regularizer pulling `u` towards `sgn(u)`:
//! `Σ_{i≠j} (u_i·u_j − K s_ij)² + η Σ_i ‖sgn(u_i) − u_i‖²`,
//! with pairs taken over all ordered `(i, j)`, `i ≠ j`, of one minibatch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{label_similarity, CodeMatrix, LabelSet};
use crate::numcore::{dot, sgn, DenseMatrix};

/// Pairwise supervision `s_ij ∈ {−1, +1}`, query rows × gallery columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n_query: usize,
    n_gallery: usize,
    entries: Vec<i8>,
}

impl SimilarityMatrix {
    pub fn new(n_query: usize, n_gallery: usize, entries: Vec<i8>) -> Result<Self> {
        if entries.len() != n_query * n_gallery {
            return Err(Error::shape(format!(
                "{} entries cannot fill a {n_query}x{n_gallery} similarity matrix",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|&&e| e != 1 && e != -1) {
            return Err(Error::invalid(format!("similarity entry {bad} is not ±1")));
        }
        Ok(Self {
            n_query,
            n_gallery,
            entries,
        })
    }

    pub fn from_labels(query: &[LabelSet], gallery: &[LabelSet]) -> Result<Self> {
        let mut entries = Vec::with_capacity(query.len() * gallery.len());
        for q in query {
            for g in gallery {
                entries.push(label_similarity(q, g)?);
            }
        }
        Ok(Self {
            n_query: query.len(),
            n_gallery: gallery.len(),
            entries,
        })
    }

    pub fn n_query(&self) -> usize {
        self.n_query
    }

    pub fn n_gallery(&self) -> usize {
        self.n_gallery
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.n_gallery + j]
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_query == self.n_gallery
            && (0..self.n_query).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub pairwise_term: f64,
    pub quantization_term: f64,
}

pub fn discrete_hash_loss(
    query: &CodeMatrix,
    gallery: &CodeMatrix,
    s: &SimilarityMatrix,
    k: usize,
) -> Result<f64> {
    if query.bits() != k || gallery.bits() != k {
        return Err(Error::shape(format!(
            "code lengths {} and {} differ from K = {k}",
            query.bits(),
            gallery.bits()
        )));
    }
    if !query.is_strict_binary() || !gallery.is_strict_binary() {
        return Err(Error::InvalidCode(
            "the discrete loss is defined only on ±1 codes".into(),
        ));
    }
    if s.n_query != query.len() || s.n_gallery != gallery.len() {
        return Err(Error::shape("similarity matrix does not match code counts"));
    }
    let kf = k as f64;
    let mut total = 0.0;
    for i in 0..query.len() {
        let bi = query.row(i);
        for j in 0..gallery.len() {
            let ip: i32 = bi
                .iter()
                .zip(gallery.row(j))
                .map(|(&a, &b)| i32::from(a) * i32::from(b))
                .sum();
            let r = f64::from(ip) - kf * f64::from(s.get(i, j));
            total += r * r;
        }
    }
    Ok(total)
}

fn check_relaxed(u: &DenseMatrix, s: &SimilarityMatrix, k: usize, eta: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("K must be positive"));
    }
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::invalid(format!("eta must be nonnegative, got {eta}")));
    }
    if u.cols() != k {
        return Err(Error::shape(format!("U has {} columns, K = {k}", u.cols())));
    }
    if s.n_query != u.rows() || s.n_gallery != u.rows() {
        return Err(Error::shape(format!(
            "similarity is {}x{}, batch has {} rows",
            s.n_query,
            s.n_gallery,
            u.rows()
        )));
    }
    Ok(())
}

pub fn relaxed_hash_loss(u: &DenseMatrix, s: &SimilarityMatrix, k: usize, eta: f64) -> Result<LossValue> {
    check_relaxed(u, s, k, eta)?;
    let kf = k as f64;
    let n = u.rows();
    let mut pairwise = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let r = dot(u.row(i), u.row(j)) - kf * f64::from(s.get(i, j));
                pairwise += r * r;
            }
        }
    }
    let quantization: f64 = u
        .values()
        .iter()
        .map(|&v| {
            let d = sgn(v) - v;
            d * d
        })
        .sum();
    Ok(LossValue {
        total: pairwise + eta * quantization,
        pairwise_term: pairwise,
        quantization_term: quantization,
    })
}

/// `dU_i = Σ_{j≠i} 4 (u_i·u_j − K s_ij) u_j + 2η (u_i − sgn(u_i))`.
///
/// `sgn(u)` is held constant. The factor 4 counts both ordered pairs and
/// assumes `s` is symmetric.
pub fn relaxed_hash_loss_grad(
    u: &DenseMatrix,
    s: &SimilarityMatrix,
    k: usize,
    eta: f64,
) -> Result<DenseMatrix> {
    check_relaxed(u, s, k, eta)?;
    let kf = k as f64;
    let n = u.rows();
    let mut du = DenseMatrix::zeros(n, k);
    for i in 0..n {
        let ui = u.row(i);
        for j in (i + 1)..n {
            let uj = u.row(j);
            let r = dot(ui, uj) - kf * f64::from(s.get(i, j));
            let c = 4.0 * r;
            for c_idx in 0..k {
                let (a, b) = (ui[c_idx], uj[c_idx]);
                du.row_mut(i)[c_idx] += c * b;
                du.row_mut(j)[c_idx] += c * a;
            }
        }
        let g = du.row_mut(i);
        for (gv, &uv) in g.iter_mut().zip(ui) {
            *gv += 2.0 * eta * (uv - sgn(uv));
        }
    }
    Ok(du)
}
