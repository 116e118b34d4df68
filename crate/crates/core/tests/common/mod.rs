//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nmhash::metrics::{CodeMatrix, LabelSet};
use nmhash::numcore::DenseMatrix;
use rand::Rng;

/// Exhaustive retrieval: Hamming distance from the definition, stable sort by
/// `(distance, gallery index)`, AP from the ranked relevance list.
pub struct BruteRanking {
    pub order: Vec<usize>,
    pub ap: f64,
}

pub fn brute_rank(
    q: &[i8],
    q_labels: &LabelSet,
    gallery: &CodeMatrix,
    g_labels: &[LabelSet],
    top_r: Option<usize>,
) -> BruteRanking {
    let k = q.len() as f64;
    let mut scored: Vec<(f64, usize)> = (0..gallery.len())
        .map(|j| {
            let ip: f64 = q
                .iter()
                .zip(gallery.row(j))
                .map(|(&a, &b)| f64::from(a) * f64::from(b))
                .sum();
            ((k - ip) / 2.0, j)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let order: Vec<usize> = scored.iter().map(|s| s.1).collect();
    let cut = top_r.unwrap_or(order.len());
    let mut hits = 0.0;
    let mut sum = 0.0;
    for (pos, &j) in order.iter().take(cut).enumerate() {
        let rel = q_labels.ids().iter().any(|l| g_labels[j].ids().contains(l));
        if rel {
            hits += 1.0;
            sum += hits / (pos + 1) as f64;
        }
    }
    BruteRanking {
        order,
        ap: if hits > 0.0 { sum / hits } else { 0.0 },
    }
}

pub fn brute_map(
    query: &CodeMatrix,
    q_labels: &[LabelSet],
    gallery: &CodeMatrix,
    g_labels: &[LabelSet],
    top_r: Option<usize>,
) -> f64 {
    let total: f64 = (0..query.len())
        .map(|i| brute_rank(query.row(i), &q_labels[i], gallery, g_labels, top_r).ap)
        .sum();
    total / query.len() as f64
}

pub fn random_codes<R: Rng>(rng: &mut R, n: usize, k: usize, allow_zero: bool) -> CodeMatrix {
    let entries = (0..n * k)
        .map(|_| {
            if allow_zero && rng.random_bool(0.15) {
                0
            } else if rng.random_bool(0.5) {
                1
            } else {
                -1
            }
        })
        .collect();
    CodeMatrix::new(n, k, entries).unwrap()
}

pub fn random_labels<R: Rng>(rng: &mut R, n: usize, classes: u32, multi: bool) -> Vec<LabelSet> {
    (0..n)
        .map(|_| {
            let first = rng.random_range(0..classes);
            if multi && rng.random_bool(0.3) {
                LabelSet::new(vec![first, rng.random_range(0..classes)]).unwrap()
            } else {
                LabelSet::single(first)
            }
        })
        .collect()
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    let values = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    DenseMatrix::from_vec(rows, cols, values).unwrap()
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a − b|| / max(||a||, ||b||, tiny)`
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-300)
}
