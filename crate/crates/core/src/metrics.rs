//! Hamming-space retrieval evaluation.
//!
//! Codes are ternary (`-1`, `0`, `+1`). Distances use the inner-product form
//! `d(a, b) = (K - a·b) / 2`, which is the bit-disagreement count for strict
//! ±1 codes and charges exactly 1/2 for any position where either side is 0.
//! Internally distances are kept doubled (`2d = K - a·b`) so all ranking is
//! done on integers. Ties are broken by ascending gallery index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::DenseMatrix;

/// Per-item codes over `{-1, 0, +1}`, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMatrix {
    n: usize,
    k: usize,
    entries: Vec<i8>,
}

impl CodeMatrix {
    pub fn new(n: usize, k: usize, entries: Vec<i8>) -> Result<Self> {
        if entries.len() != n * k {
            return Err(Error::shape(format!(
                "{} entries cannot fill {n} codes of length {k}",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|&&e| !(-1..=1).contains(&e)) {
            return Err(Error::InvalidCode(format!("code entry {bad} is not in {{-1, 0, +1}}")));
        }
        Ok(Self { n, k, entries })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("ragged code rows"));
        }
        Self::new(rows.len(), k, rows.concat())
    }

    /// `sgn(u)` elementwise, with `sgn(0) = +1`.
    pub fn from_signs(u: &DenseMatrix) -> Self {
        let entries = u
            .values()
            .iter()
            .map(|&v| if v >= 0.0 { 1 } else { -1 })
            .collect();
        Self {
            n: u.rows(),
            k: u.cols(),
            entries,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Code length `K`.
    #[inline]
    pub fn bits(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn is_strict_binary(&self) -> bool {
        self.entries.iter().all(|&e| e != 0)
    }

    pub fn without_column(&self, col: usize) -> Self {
        let keep: Vec<usize> = (0..self.k).filter(|&c| c != col).collect();
        self.select_columns(&keep)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            let row = self.row(i);
            entries.extend(cols.iter().map(|&c| row[c]));
        }
        Self {
            n: self.n,
            k: cols.len(),
            entries,
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(idx.len() * self.k);
        for &i in idx {
            entries.extend_from_slice(self.row(i));
        }
        Self {
            n: idx.len(),
            k: self.k,
            entries,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_vec(
            self.n,
            self.k,
            self.entries.iter().map(|&e| f64::from(e)).collect(),
        )
        .expect("code entries are finite")
    }
}

/// Nonempty, sorted, deduplicated set of label ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSet(Vec<u32>);

impl LabelSet {
    pub fn new(mut ids: Vec<u32>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::invalid("label set is empty"));
        }
        ids.sort_unstable();
        ids.dedup();
        Ok(Self(ids))
    }

    pub fn single(id: u32) -> Self {
        Self(vec![id])
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn intersects(&self, other: &LabelSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Equal => return true,
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        false
    }
}

/// `+1` when the label sets share at least one id, `-1` otherwise.
pub fn label_similarity(a: &LabelSet, b: &LabelSet) -> Result<i8> {
    if a.0.is_empty() || b.0.is_empty() {
        return Err(Error::invalid("label set is empty"));
    }
    Ok(if a.intersects(b) { 1 } else { -1 })
}

pub fn hamming_distance(a: &[i8], b: &[i8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "code lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(f64::from(doubled_distance(a, b)) / 2.0)
}

#[inline]
fn code_dot(a: &[i8], b: &[i8]) -> i32 {
    a.iter().zip(b).map(|(&x, &y)| i32::from(x) * i32::from(y)).sum()
}

#[inline]
fn doubled_distance(a: &[i8], b: &[i8]) -> i32 {
    a.len() as i32 - code_dot(a, b)
}

/// Mean over relevant positions `k` of `(#relevant in top k) / k`; 0 when
/// nothing is relevant.
pub fn average_precision(relevance_in_rank_order: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &rel) in relevance_in_rank_order.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// Codes paired with their label sets; one side of a retrieval run.
#[derive(Debug, Clone, Copy)]
pub struct LabeledCodes<'a> {
    pub codes: &'a CodeMatrix,
    pub labels: &'a [LabelSet],
}

impl<'a> LabeledCodes<'a> {
    pub fn new(codes: &'a CodeMatrix, labels: &'a [LabelSet]) -> Result<Self> {
        if codes.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} codes but {} label sets",
                codes.len(),
                labels.len()
            )));
        }
        Ok(Self { codes, labels })
    }
}

/// Query × gallery relevance flags (`label_similarity == +1`).
#[derive(Debug, Clone)]
pub struct Relevance {
    n_gallery: usize,
    flags: Vec<bool>,
}

impl Relevance {
    pub fn from_labels(query: &[LabelSet], gallery: &[LabelSet]) -> Self {
        let flags = query
            .iter()
            .flat_map(|q| gallery.iter().map(move |g| q.intersects(g)))
            .collect();
        Self {
            n_gallery: gallery.len(),
            flags,
        }
    }

    #[inline]
    fn row(&self, q: usize) -> &[bool] {
        &self.flags[q * self.n_gallery..(q + 1) * self.n_gallery]
    }
}

/// Ranked retrieval lists and per-query AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub ranked: Vec<Vec<usize>>,
    pub relevant: Vec<Vec<bool>>,
    pub average_precision: Vec<f64>,
}

impl RetrievalResult {
    pub fn mean_average_precision(&self) -> f64 {
        mean(&self.average_precision)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn check_pair(query: &LabeledCodes<'_>, gallery: &LabeledCodes<'_>) -> Result<()> {
    if query.codes.is_empty() {
        return Err(Error::invalid("query set is empty"));
    }
    if gallery.codes.is_empty() {
        return Err(Error::invalid("gallery is empty"));
    }
    if query.codes.bits() != gallery.codes.bits() {
        return Err(Error::shape(format!(
            "query codes have {} bits, gallery codes {}",
            query.codes.bits(),
            gallery.codes.bits()
        )));
    }
    Ok(())
}

/// Stable counting sort of gallery indices by doubled distance in `[0, max]`.
fn rank_by_distance(dist2: &[i32], max: i32, order: &mut Vec<usize>, counts: &mut Vec<usize>) {
    counts.clear();
    counts.resize(max as usize + 2, 0);
    for &d in dist2 {
        counts[d as usize + 1] += 1;
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    order.clear();
    order.resize(dist2.len(), 0);
    for (g, &d) in dist2.iter().enumerate() {
        let slot = &mut counts[d as usize];
        order[*slot] = g;
        *slot += 1;
    }
}

fn ap_of_ranking(order: &[usize], relevant: &[bool], top_r: usize) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &g) in order.iter().take(top_r).enumerate() {
        if relevant[g] {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

fn check_top_r(top_r: Option<usize>, n_gallery: usize) -> Result<usize> {
    match top_r {
        None => Ok(n_gallery),
        Some(0) => Err(Error::invalid("top-R must be at least 1")),
        Some(r) if r > n_gallery => Err(Error::invalid(format!(
            "top-R {r} exceeds gallery size {n_gallery}"
        ))),
        Some(r) => Ok(r),
    }
}

/// Hamming ranking of every query against the gallery.
pub fn retrieve(
    query: &LabeledCodes<'_>,
    gallery: &LabeledCodes<'_>,
    top_r: Option<usize>,
) -> Result<RetrievalResult> {
    check_pair(query, gallery)?;
    let r = check_top_r(top_r, gallery.codes.len())?;
    let rel = Relevance::from_labels(query.labels, gallery.labels);
    let k = query.codes.bits();
    let mut result = RetrievalResult {
        ranked: Vec::with_capacity(query.codes.len()),
        relevant: Vec::with_capacity(query.codes.len()),
        average_precision: Vec::with_capacity(query.codes.len()),
    };
    let mut dist2 = vec![0; gallery.codes.len()];
    let (mut order, mut counts) = (Vec::new(), Vec::new());
    for q in 0..query.codes.len() {
        let qc = query.codes.row(q);
        for (g, d) in dist2.iter_mut().enumerate() {
            *d = doubled_distance(qc, gallery.codes.row(g));
        }
        rank_by_distance(&dist2, 2 * k as i32, &mut order, &mut counts);
        let flags = rel.row(q);
        result.average_precision.push(ap_of_ranking(&order, flags, r));
        result.relevant.push(order.iter().map(|&g| flags[g]).collect());
        result.ranked.push(order.clone());
    }
    Ok(result)
}

/// Mean AP over queries, optionally restricted to the top `top_r` returned items.
pub fn mean_average_precision(
    query: &LabeledCodes<'_>,
    gallery: &LabeledCodes<'_>,
    top_r: Option<usize>,
) -> Result<f64> {
    check_pair(query, gallery)?;
    let r = check_top_r(top_r, gallery.codes.len())?;
    let rel = Relevance::from_labels(query.labels, gallery.labels);
    let dots = DotTable::new(query.codes, gallery.codes);
    Ok(map_from_dots(&dots, query.codes.bits(), &rel, r, |_, _| 0))
}

/// Query × gallery integer inner products.
pub(crate) struct DotTable {
    n_gallery: usize,
    dots: Vec<i32>,
}

impl DotTable {
    pub(crate) fn new(query: &CodeMatrix, gallery: &CodeMatrix) -> Self {
        let mut dots = Vec::with_capacity(query.len() * gallery.len());
        for q in 0..query.len() {
            let qc = query.row(q);
            dots.extend((0..gallery.len()).map(|g| code_dot(qc, gallery.row(g))));
        }
        Self {
            n_gallery: gallery.len(),
            dots,
        }
    }
}

/// MAP from precomputed inner products. `correction(q, g)` is subtracted from
/// each inner product before ranking, letting callers drop a column without
/// recomputing the table. `bits` is the effective code length after correction.
pub(crate) fn map_from_dots(
    dots: &DotTable,
    bits: usize,
    rel: &Relevance,
    top_r: usize,
    correction: impl Fn(usize, usize) -> i32,
) -> f64 {
    let n_query = dots.dots.len() / dots.n_gallery.max(1);
    let mut dist2 = vec![0; dots.n_gallery];
    let (mut order, mut counts) = (Vec::new(), Vec::new());
    let mut total = 0.0;
    for q in 0..n_query {
        let row = &dots.dots[q * dots.n_gallery..(q + 1) * dots.n_gallery];
        for (g, (d, &dot)) in dist2.iter_mut().zip(row).enumerate() {
            *d = bits as i32 - (dot - correction(q, g));
        }
        rank_by_distance(&dist2, 2 * bits as i32, &mut order, &mut counts);
        total += ap_of_ranking(&order, rel.row(q), top_r);
    }
    total / n_query as f64
}

/// Mean over queries of the precision among gallery items within `radius`.
/// Queries that retrieve nothing contribute 0.
pub fn precision_at_hamming_radius(
    query: &LabeledCodes<'_>,
    gallery: &LabeledCodes<'_>,
    radius: f64,
) -> Result<f64> {
    check_pair(query, gallery)?;
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::invalid(format!("radius must be nonnegative, got {radius}")));
    }
    // d <= radius  <=>  2d <= floor(2 radius) since 2d is an integer
    let limit = (2.0 * radius).floor().min(f64::from(i32::MAX)) as i32;
    let mut precisions = Vec::with_capacity(query.codes.len());
    for q in 0..query.codes.len() {
        let qc = query.codes.row(q);
        let (mut retrieved, mut hits) = (0usize, 0usize);
        for g in 0..gallery.codes.len() {
            if doubled_distance(qc, gallery.codes.row(g)) <= limit {
                retrieved += 1;
                if query.labels[q].intersects(&gallery.labels[g]) {
                    hits += 1;
                }
            }
        }
        precisions.push(if retrieved == 0 {
            0.0
        } else {
            hits as f64 / retrieved as f64
        });
    }
    Ok(mean(&precisions))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Micro-averaged precision/recall at Hamming thresholds `0, 0.5, 1, …, K`.
pub fn pr_curve(query: &LabeledCodes<'_>, gallery: &LabeledCodes<'_>) -> Result<Vec<PrPoint>> {
    check_pair(query, gallery)?;
    let k = query.codes.bits();
    let n_levels = 2 * k + 1;
    let mut retrieved_at = vec![0u64; n_levels];
    let mut hits_at = vec![0u64; n_levels];
    let mut total_relevant = 0u64;
    for q in 0..query.codes.len() {
        let qc = query.codes.row(q);
        for g in 0..gallery.codes.len() {
            let d2 = doubled_distance(qc, gallery.codes.row(g)) as usize;
            retrieved_at[d2] += 1;
            if query.labels[q].intersects(&gallery.labels[g]) {
                hits_at[d2] += 1;
                total_relevant += 1;
            }
        }
    }
    let (mut retrieved, mut hits) = (0u64, 0u64);
    Ok((0..n_levels)
        .map(|t2| {
            retrieved += retrieved_at[t2];
            hits += hits_at[t2];
            PrPoint {
                threshold: t2 as f64 / 2.0,
                precision: if retrieved == 0 {
                    0.0
                } else {
                    hits as f64 / retrieved as f64
                },
                recall: if total_relevant == 0 {
                    0.0
                } else {
                    hits as f64 / total_relevant as f64
                },
            }
        })
        .collect())
}

/// Mean fraction of relevant items among the top `n` ranked, for each `n`.
pub fn precision_at_top_n(
    query: &LabeledCodes<'_>,
    gallery: &LabeledCodes<'_>,
    n_values: &[usize],
) -> Result<Vec<f64>> {
    check_pair(query, gallery)?;
    let n_gallery = gallery.codes.len();
    if let Some(&bad) = n_values.iter().find(|&&n| n == 0 || n > n_gallery) {
        return Err(Error::invalid(format!(
            "top-N cutoff {bad} is outside 1..={n_gallery}"
        )));
    }
    let result = retrieve(query, gallery, None)?;
    Ok(n_values
        .iter()
        .map(|&n| {
            let per_query: Vec<f64> = result
                .relevant
                .iter()
                .map(|flags| flags[..n].iter().filter(|&&r| r).count() as f64 / n as f64)
                .collect();
            mean(&per_query)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(ids: &[u32]) -> Vec<LabelSet> {
        ids.iter().map(|&i| LabelSet::single(i)).collect()
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distance(&[1, -1, 1], &[1, -1, 1]).unwrap(), 0.0);
        assert_eq!(hamming_distance(&[1, -1, 1], &[-1, 1, -1]).unwrap(), 3.0);
        assert_eq!(hamming_distance(&[1, 0], &[1, 1]).unwrap(), 0.5);
        assert!(matches!(hamming_distance(&[1], &[1, 1]), Err(Error::Shape(_))));
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[true, true, true]), 1.0);
        assert!((average_precision(&[true, false, true]) - 5.0 / 6.0).abs() < 1e-15);
        assert!((average_precision(&[false, false, true]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(average_precision(&[false, false]), 0.0);
    }

    #[test]
    fn label_similarity_examples() {
        let s = |a: &[u32], b: &[u32]| {
            label_similarity(&LabelSet::new(a.to_vec()).unwrap(), &LabelSet::new(b.to_vec()).unwrap())
                .unwrap()
        };
        assert_eq!(s(&[3], &[3]), 1);
        assert_eq!(s(&[1, 2], &[2, 9]), 1);
        assert_eq!(s(&[1], &[2]), -1);
        assert!(LabelSet::new(vec![]).is_err());
    }

    #[test]
    fn map_examples() {
        // single query, gallery all relevant
        let q = CodeMatrix::from_rows(&[vec![1, 1]]).unwrap();
        let g = CodeMatrix::from_rows(&[vec![1, -1], vec![-1, -1], vec![1, 1]]).unwrap();
        let ql = labels(&[0]);
        let gl = labels(&[0, 0, 0]);
        let qs = LabeledCodes::new(&q, &ql).unwrap();
        let gs = LabeledCodes::new(&g, &gl).unwrap();
        assert_eq!(mean_average_precision(&qs, &gs, None).unwrap(), 1.0);

        // ranking (d=0 rel, d=1 irrel, d=2 rel) reproduces relevance (1,0,1)
        let g = CodeMatrix::from_rows(&[vec![-1, -1], vec![1, -1], vec![1, 1]]).unwrap();
        let gl = labels(&[0, 1, 0]);
        let gs = LabeledCodes::new(&g, &gl).unwrap();
        let map = mean_average_precision(&qs, &gs, None).unwrap();
        assert!((map - 5.0 / 6.0).abs() < 1e-15);
        // top-1: nearest item is relevant
        assert_eq!(mean_average_precision(&qs, &gs, Some(1)).unwrap(), 1.0);
        assert!(mean_average_precision(&qs, &gs, Some(4)).is_err());
        assert!(mean_average_precision(&qs, &gs, Some(0)).is_err());

        let empty = CodeMatrix::new(0, 2, vec![]).unwrap();
        let es = LabeledCodes::new(&empty, &[]).unwrap();
        assert!(mean_average_precision(&es, &gs, None).is_err());
    }

    #[test]
    fn ties_break_by_gallery_index() {
        let q = CodeMatrix::from_rows(&[vec![1, 1]]).unwrap();
        let g = CodeMatrix::from_rows(&[vec![1, -1], vec![-1, 1], vec![1, 1]]).unwrap();
        let ql = labels(&[0]);
        let gl = labels(&[1, 0, 0]);
        let r = retrieve(
            &LabeledCodes::new(&q, &ql).unwrap(),
            &LabeledCodes::new(&g, &gl).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(r.ranked[0], vec![2, 0, 1]);
        assert_eq!(r.relevant[0], vec![true, false, true]);
    }

    #[test]
    fn radius_precision_examples() {
        let q = CodeMatrix::from_rows(&[vec![1, 1, 1, 1]]).unwrap();
        let ql = labels(&[0]);
        let g = CodeMatrix::from_rows(&[vec![1, 1, 1, 1], vec![1, 1, 1, 1]]).unwrap();
        let gl = labels(&[0, 0]);
        let (qs, gs) = (LabeledCodes::new(&q, &ql).unwrap(), LabeledCodes::new(&g, &gl).unwrap());
        assert_eq!(precision_at_hamming_radius(&qs, &gs, 2.0).unwrap(), 1.0);

        let g = CodeMatrix::from_rows(&[vec![-1, -1, -1, 1]]).unwrap();
        let gl = labels(&[0]);
        let gs = LabeledCodes::new(&g, &gl).unwrap();
        assert_eq!(precision_at_hamming_radius(&qs, &gs, 2.0).unwrap(), 0.0);

        let g = CodeMatrix::from_rows(&[vec![-1, 1, 1, 1], vec![-1, -1, 1, 1]]).unwrap();
        let gl = labels(&[0, 1]);
        let gs = LabeledCodes::new(&g, &gl).unwrap();
        assert_eq!(precision_at_hamming_radius(&qs, &gs, 2.0).unwrap(), 0.5);
    }

    #[test]
    fn pr_curve_examples() {
        let q = CodeMatrix::from_rows(&[vec![1, 1, 1], vec![-1, -1, -1]]).unwrap();
        let ql = labels(&[0, 1]);
        let g = CodeMatrix::from_rows(&[vec![1, 1, 1], vec![-1, -1, -1], vec![1, 1, 1]]).unwrap();
        let gl = labels(&[0, 1, 0]);
        let (qs, gs) = (LabeledCodes::new(&q, &ql).unwrap(), LabeledCodes::new(&g, &gl).unwrap());
        let curve = pr_curve(&qs, &gs).unwrap();
        assert_eq!(curve.len(), 7);
        assert_eq!(curve.last().unwrap().recall, 1.0);
        assert!(curve.iter().any(|p| p.precision == 1.0 && p.recall == 1.0));
        assert!(curve.windows(2).all(|w| w[0].recall <= w[1].recall));

        // minimum distance 1: threshold 0 retrieves nothing
        let g = CodeMatrix::from_rows(&[vec![1, 1, -1]]).unwrap();
        let gl = labels(&[0]);
        let gs = LabeledCodes::new(&g, &gl).unwrap();
        let curve = pr_curve(&qs, &gs).unwrap();
        assert_eq!((curve[0].precision, curve[0].recall), (0.0, 0.0));
    }

    #[test]
    fn top_n_examples() {
        let q = CodeMatrix::from_rows(&[vec![1, 1]]).unwrap();
        let ql = labels(&[0]);
        let g = CodeMatrix::from_rows(&[vec![1, 1], vec![1, -1], vec![-1, -1]]).unwrap();
        let gl = labels(&[1, 0, 0]);
        let (qs, gs) = (LabeledCodes::new(&q, &ql).unwrap(), LabeledCodes::new(&g, &gl).unwrap());
        let p = precision_at_top_n(&qs, &gs, &[1, 2]).unwrap();
        assert_eq!(p, vec![0.0, 0.5]);
        assert!(precision_at_top_n(&qs, &gs, &[4]).is_err());

        let gl = labels(&[0, 0, 0]);
        let gs = LabeledCodes::new(&g, &gl).unwrap();
        assert_eq!(precision_at_top_n(&qs, &gs, &[3]).unwrap(), vec![1.0]);
    }

    #[test]
    fn code_matrix_validation() {
        assert!(matches!(CodeMatrix::new(1, 2, vec![1, 2]), Err(Error::InvalidCode(_))));
        assert!(matches!(CodeMatrix::new(1, 2, vec![1]), Err(Error::Shape(_))));
        let c = CodeMatrix::from_rows(&[vec![1, -1, 0]]).unwrap();
        assert_eq!(c.without_column(1).row(0), &[1, 0]);
    }
}
