//! Neurons merging layer.
//!
//! A [`MergeGraph`] is an undirected graph over the current output neurons.
//! In the active phase its adjacency is real-valued and learned from
//! leave-one-bit-out retrieval scores; truncation keeps the `m` largest edges,
//! and the connected components of the resulting binary graph become merged
//! groups. In the frozen phase each group emits one randomly chosen child
//! during training and a majority vote at evaluation time.
//!
//! Stacked layers are represented by one cumulative graph over the original
//! neurons (see [`MergeGraph::compose`]); its groups are the flattened leaf sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{map_from_dots, CodeMatrix, DotTable, LabeledCodes, Relevance};
use crate::numcore::{sgn, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Active,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeGraph {
    n_nodes: usize,
    adjacency: DenseMatrix,
    phase: Phase,
    groups: Vec<Vec<usize>>,
    nm_learning_rate: f64,
}

/// Per-node importance scores (leave-one-out MAP, in `[0, 1]`), or their
/// propagated counterparts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Training-mode output of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupOutput {
    pub group: usize,
    pub chosen_child: usize,
    pub value: f64,
}

fn singletons(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    /// Returns true when the two sets were distinct.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
        true
    }

    /// Components ordered by smallest member, members ascending.
    fn components(mut self) -> Vec<Vec<usize>> {
        let n = self.0.len();
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let r = self.find(i);
            by_root[r].push(i);
        }
        let mut groups: Vec<Vec<usize>> = by_root.into_iter().filter(|g| !g.is_empty()).collect();
        groups.sort_by_key(|g| g[0]);
        groups
    }
}

impl MergeGraph {
    /// Freshly attached layer: `A = 0`, all nodes unmerged.
    pub fn new_active(n_nodes: usize, nm_learning_rate: f64) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::config("merge graph needs at least one node"));
        }
        if !(nm_learning_rate > 0.0 && nm_learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "merge-layer learning rate must be positive, got {nm_learning_rate}"
            )));
        }
        Ok(Self {
            n_nodes,
            adjacency: DenseMatrix::zeros(n_nodes, n_nodes),
            phase: Phase::Active,
            groups: singletons(n_nodes),
            nm_learning_rate,
        })
    }

    /// Active graph with a caller-supplied symmetric, zero-diagonal adjacency.
    pub fn with_adjacency(adjacency: DenseMatrix, nm_learning_rate: f64) -> Result<Self> {
        let mut g = Self::new_active(adjacency.rows(), nm_learning_rate)?;
        check_adjacency(&adjacency, g.n_nodes)?;
        g.adjacency = adjacency;
        Ok(g)
    }

    /// Frozen graph with no merges.
    pub fn identity(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            adjacency: DenseMatrix::zeros(n_nodes, n_nodes),
            phase: Phase::Frozen,
            groups: singletons(n_nodes),
            nm_learning_rate: 1.0,
        }
    }

    /// Frozen graph whose groups are the given partition; each group is a
    /// clique in the binary adjacency.
    pub fn from_groups(n_nodes: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n_nodes];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::invalid("empty merge group"));
            }
            for &c in g {
                if c >= n_nodes || seen[c] {
                    return Err(Error::invalid(format!(
                        "merge groups are not a partition of 0..{n_nodes}"
                    )));
                }
                seen[c] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::invalid(format!(
                "merge groups do not cover 0..{n_nodes}"
            )));
        }
        let mut adjacency = DenseMatrix::zeros(n_nodes, n_nodes);
        let mut ds = DisjointSet::new(n_nodes);
        for g in &groups {
            for (a, &i) in g.iter().enumerate() {
                for &j in &g[a + 1..] {
                    adjacency.set(i, j, 1.0);
                    adjacency.set(j, i, 1.0);
                    ds.union(i, j);
                }
            }
        }
        Ok(Self {
            n_nodes,
            adjacency,
            phase: Phase::Frozen,
            groups: ds.components(),
            nm_learning_rate: 1.0,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn adjacency(&self) -> &DenseMatrix {
        &self.adjacency
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn nm_learning_rate(&self) -> f64 {
        self.nm_learning_rate
    }

    /// Checks every structural invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        check_adjacency(&self.adjacency, self.n_nodes)?;
        match self.phase {
            Phase::Active => {
                if self.groups != singletons(self.n_nodes) {
                    return Err(Error::Format("active graph with merged groups".into()));
                }
            }
            Phase::Frozen => {
                if self.adjacency.values().iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::Format("frozen graph with non-binary adjacency".into()));
                }
                if self.groups != binary_components(&self.adjacency) {
                    return Err(Error::Format(
                        "groups differ from connected components of the adjacency".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn require(&self, phase: Phase, op: &str) -> Result<()> {
        if self.phase != phase {
            return Err(Error::Phase(format!(
                "{op} requires the {phase:?} phase, graph is {:?}",
                self.phase
            )));
        }
        Ok(())
    }

    /// `A ← A − lr·dA`, keeping symmetry and a zero diagonal.
    pub fn apply_active_step(&mut self, d_adjacency: &DenseMatrix) -> Result<()> {
        self.require(Phase::Active, "apply_active_step")?;
        if d_adjacency.rows() != self.n_nodes || d_adjacency.cols() != self.n_nodes {
            return Err(Error::shape("adjacency gradient has the wrong shape"));
        }
        let lr = self.nm_learning_rate;
        for i in 0..self.n_nodes {
            for j in (i + 1)..self.n_nodes {
                let v = self.adjacency.get(i, j) - lr * d_adjacency.get(i, j);
                self.adjacency.set(i, j, v);
                self.adjacency.set(j, i, v);
            }
        }
        Ok(())
    }

    /// Strict upper-triangle edges ranked by value (descending), ties by
    /// lexicographically smallest `(i, j)`.
    fn ranked_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = (0..self.n_nodes)
            .flat_map(|i| ((i + 1)..self.n_nodes).map(move |j| (i, j)))
            .collect();
        edges.sort_by(|&(a, b), &(c, d)| {
            self.adjacency
                .get(c, d)
                .total_cmp(&self.adjacency.get(a, b))
                .then((a, b).cmp(&(c, d)))
        });
        edges
    }

    fn max_edges(&self) -> usize {
        self.n_nodes * (self.n_nodes.saturating_sub(1)) / 2
    }

    /// Number of nodes that truncation with `m` edges would remove
    /// (`n_nodes − #components`).
    pub fn truncation_reduction(&self, m: usize) -> Result<usize> {
        if m > self.max_edges() {
            return Err(Error::invalid(format!(
                "m = {m} exceeds the {} available edges",
                self.max_edges()
            )));
        }
        let mut ds = DisjointSet::new(self.n_nodes);
        Ok(self
            .ranked_edges()
            .into_iter()
            .take(m)
            .filter(|&(i, j)| ds.union(i, j))
            .count())
    }

    /// Keeps the `m` largest upper-triangle entries as 1, zeroes the rest, and
    /// freezes the graph with groups = connected components.
    pub fn truncate(&self, m: usize) -> Result<MergeGraph> {
        self.require(Phase::Active, "truncate")?;
        if m > self.max_edges() {
            return Err(Error::invalid(format!(
                "m = {m} exceeds the {} available edges",
                self.max_edges()
            )));
        }
        let mut adjacency = DenseMatrix::zeros(self.n_nodes, self.n_nodes);
        let mut ds = DisjointSet::new(self.n_nodes);
        for (i, j) in self.ranked_edges().into_iter().take(m) {
            adjacency.set(i, j, 1.0);
            adjacency.set(j, i, 1.0);
            ds.union(i, j);
        }
        Ok(MergeGraph {
            n_nodes: self.n_nodes,
            adjacency,
            phase: Phase::Frozen,
            groups: ds.components(),
            nm_learning_rate: self.nm_learning_rate,
        })
    }

    /// Flattens a layer stacked on top of `self`: node `k` of `upper` is group
    /// `k` of `self`. The result is a frozen graph over `self`'s nodes.
    pub fn compose(&self, upper: &MergeGraph) -> Result<MergeGraph> {
        if upper.n_nodes != self.n_groups() {
            return Err(Error::shape(format!(
                "upper layer has {} nodes, lower layer emits {} groups",
                upper.n_nodes,
                self.n_groups()
            )));
        }
        let groups = upper
            .groups
            .iter()
            .map(|g| {
                let mut leaves: Vec<usize> =
                    g.iter().flat_map(|&k| self.groups[k].iter().copied()).collect();
                leaves.sort_unstable();
                leaves
            })
            .collect();
        MergeGraph::from_groups(self.n_nodes, groups)
    }

    /// Training forward pass: each group outputs one uniformly chosen child.
    pub fn frozen_forward<R: Rng>(&self, u: &[f64], rng: &mut R) -> Result<Vec<GroupOutput>> {
        self.require(Phase::Frozen, "frozen_forward")?;
        self.check_len(u.len())?;
        Ok(self
            .groups
            .iter()
            .enumerate()
            .map(|(gi, g)| {
                let chosen = if g.len() == 1 {
                    g[0]
                } else {
                    g[rng.random_range(0..g.len())]
                };
                GroupOutput {
                    group: gi,
                    chosen_child: chosen,
                    value: u[chosen],
                }
            })
            .collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_nodes {
            return Err(Error::shape(format!(
                "got {len} neuron outputs, graph has {} nodes",
                self.n_nodes
            )));
        }
        Ok(())
    }

    fn check_choices(&self, choices: &[GroupOutput]) -> Result<()> {
        if choices.len() != self.groups.len() {
            return Err(Error::shape("one choice per group is required"));
        }
        for (gi, c) in choices.iter().enumerate() {
            if c.group != gi || !self.groups[gi].contains(&c.chosen_child) {
                return Err(Error::invalid(format!("invalid choice for group {gi}")));
            }
        }
        Ok(())
    }

    /// `Σ_groups Σ_{i unchosen} (u_i − sgn(u_chosen))²`
    pub fn frozen_loss(&self, u: &[f64], choices: &[GroupOutput]) -> Result<f64> {
        self.require(Phase::Frozen, "frozen_loss")?;
        self.check_len(u.len())?;
        self.check_choices(choices)?;
        let mut total = 0.0;
        for (g, c) in self.groups.iter().zip(choices) {
            let target = sgn(u[c.chosen_child]);
            for &i in g.iter().filter(|&&i| i != c.chosen_child) {
                let d = u[i] - target;
                total += d * d;
            }
        }
        Ok(total)
    }

    /// Routes the upstream gradient on merged outputs to the chosen children
    /// and adds the sign-target gradient `2(u_i − sgn(u_chosen))` to every
    /// unchosen child.
    pub fn frozen_grads(
        &self,
        u: &[f64],
        choices: &[GroupOutput],
        d_merged: &[f64],
    ) -> Result<Vec<f64>> {
        self.require(Phase::Frozen, "frozen_grads")?;
        self.check_len(u.len())?;
        self.check_choices(choices)?;
        if d_merged.len() != self.groups.len() {
            return Err(Error::shape("upstream gradient length differs from group count"));
        }
        let mut du = vec![0.0; self.n_nodes];
        for ((g, c), &up) in self.groups.iter().zip(choices).zip(d_merged) {
            du[c.chosen_child] = up;
            let target = sgn(u[c.chosen_child]);
            for &i in g.iter().filter(|&&i| i != c.chosen_child) {
                du[i] = 2.0 * (u[i] - target);
            }
        }
        Ok(du)
    }

    /// Evaluation output: `sgn(Σ_{c∈group} sgn(u_c))`, 0 on ties.
    pub fn eval_forward(&self, u: &[f64]) -> Result<Vec<i8>> {
        if self.phase == Phase::Active && self.groups.iter().any(|g| g.len() > 1) {
            return Err(Error::Phase("eval_forward on an unfrozen merged graph".into()));
        }
        self.check_len(u.len())?;
        Ok(self.groups.iter().map(|g| vote(g, u)).collect())
    }

    /// [`eval_forward`](Self::eval_forward) for every row of `u`.
    pub fn eval_codes(&self, u: &DenseMatrix) -> Result<CodeMatrix> {
        if u.cols() != self.n_nodes {
            return Err(Error::shape(format!(
                "outputs have {} columns, graph has {} nodes",
                u.cols(),
                self.n_nodes
            )));
        }
        let mut entries = Vec::with_capacity(u.rows() * self.groups.len());
        for r in 0..u.rows() {
            entries.extend(self.eval_forward(u.row(r))?);
        }
        CodeMatrix::new(u.rows(), self.groups.len(), entries)
    }
}

fn vote(group: &[usize], u: &[f64]) -> i8 {
    let s: i32 = group.iter().map(|&c| if u[c] >= 0.0 { 1 } else { -1 }).sum();
    s.signum() as i8
}

fn check_adjacency(a: &DenseMatrix, n: usize) -> Result<()> {
    if a.rows() != n || a.cols() != n {
        return Err(Error::shape(format!(
            "adjacency is {}x{}, expected {n}x{n}",
            a.rows(),
            a.cols()
        )));
    }
    for i in 0..n {
        if a.get(i, i) != 0.0 {
            return Err(Error::invalid("adjacency diagonal must be zero"));
        }
        for j in (i + 1)..n {
            if a.get(i, j) != a.get(j, i) {
                return Err(Error::invalid("adjacency must be symmetric"));
            }
        }
    }
    Ok(())
}

fn binary_components(a: &DenseMatrix) -> Vec<Vec<usize>> {
    let n = a.rows();
    let mut ds = DisjointSet::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if a.get(i, j) == 1.0 {
                ds.union(i, j);
            }
        }
    }
    ds.components()
}

/// `p_k` = MAP of `query` against `gallery` with bit `k` removed from both.
pub fn score_neurons(gallery: &LabeledCodes<'_>, query: &LabeledCodes<'_>) -> Result<ScoreVector> {
    let k = gallery.codes.bits();
    if query.codes.bits() != k {
        return Err(Error::shape("query and gallery code lengths differ"));
    }
    if k < 2 {
        return Err(Error::invalid("at least two bits are needed to eliminate one"));
    }
    if gallery.codes.is_empty() || query.codes.is_empty() {
        return Err(Error::invalid("scoring needs a nonempty gallery and query set"));
    }
    let rel = Relevance::from_labels(query.labels, gallery.labels);
    let dots = DotTable::new(query.codes, gallery.codes);
    let n_gallery = gallery.codes.len();
    let scores = (0..k)
        .map(|col| {
            map_from_dots(&dots, k - 1, &rel, n_gallery, |q, g| {
                i32::from(query.codes.row(q)[col]) * i32::from(gallery.codes.row(g)[col])
            })
        })
        .collect();
    Ok(ScoreVector(scores))
}

/// `p'_i = p_i + ½ Σ_{j≠i} a_ij (p_j − p_i)`
pub fn propagate_scores(p: &ScoreVector, adjacency: &DenseMatrix) -> Result<ScoreVector> {
    let n = p.len();
    if adjacency.rows() != n || adjacency.cols() != n {
        return Err(Error::shape(format!(
            "{n} scores against a {}x{} adjacency",
            adjacency.rows(),
            adjacency.cols()
        )));
    }
    Ok(ScoreVector(
        (0..n)
            .map(|i| {
                let transfer: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| adjacency.get(i, j) * (p.0[j] - p.0[i]))
                    .sum();
                p.0[i] + 0.5 * transfer
            })
            .collect(),
    ))
}

/// `Σ_{i≠j} |p'_i − p'_j|` over ordered pairs.
pub fn active_loss(propagated: &ScoreVector) -> f64 {
    let p = &propagated.0;
    let mut total = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            if i != j {
                total += (p[i] - p[j]).abs();
            }
        }
    }
    total
}

/// `dA_ij = dA_ji = sgn(p'_i − p'_j)·(p_j − p_i)` for `i < j`; zero diagonal.
///
/// This is the per-pair rule only; cross-pair chain-rule terms of the full
/// derivative of [`active_loss`] are not included.
pub fn active_grad(p: &ScoreVector, propagated: &ScoreVector) -> Result<DenseMatrix> {
    let n = p.len();
    if propagated.len() != n {
        return Err(Error::shape("score vectors differ in length"));
    }
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sgn(propagated.0[i] - propagated.0[j]) * (p.0[j] - p.0[i]);
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::LabelSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn adj3(a12: f64, a13: f64, a23: f64) -> DenseMatrix {
        DenseMatrix::from_rows(&[
            vec![0.0, a12, a13],
            vec![a12, 0.0, a23],
            vec![a13, a23, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn propagate_examples() {
        let p = ScoreVector(vec![0.6, 0.4]);
        let zero = DenseMatrix::zeros(2, 2);
        assert_eq!(propagate_scores(&p, &zero).unwrap(), p);
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let pp = propagate_scores(&p, &a).unwrap();
        assert!((pp.0[0] - 0.5).abs() < 1e-15 && (pp.0[1] - 0.5).abs() < 1e-15);
        let c = ScoreVector(vec![0.3; 3]);
        assert_eq!(propagate_scores(&c, &adj3(0.2, 0.7, 1.5)).unwrap(), c);
        assert!(propagate_scores(&c, &zero).is_err());
    }

    #[test]
    fn active_loss_examples() {
        assert_eq!(active_loss(&ScoreVector(vec![0.5; 4])), 0.0);
        assert!((active_loss(&ScoreVector(vec![0.6, 0.4])) - 0.4).abs() < 1e-15);
        assert_eq!(active_loss(&ScoreVector(vec![1.0, 0.0, 0.0])), 4.0);
    }

    #[test]
    fn active_grad_examples() {
        let p = ScoreVector(vec![0.6, 0.4]);
        let d = active_grad(&p, &p).unwrap();
        assert!((d.get(0, 1) + 0.2).abs() < 1e-15);
        assert_eq!(d.get(0, 1), d.get(1, 0));
        assert_eq!(d.get(0, 0), 0.0);
        let c = ScoreVector(vec![0.7; 3]);
        assert!(active_grad(&c, &c).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn active_step_examples() {
        let mut g = MergeGraph::new_active(2, 0.01).unwrap();
        g.apply_active_step(&DenseMatrix::zeros(2, 2)).unwrap();
        assert_eq!(g.adjacency().get(0, 1), 0.0);
        let d = DenseMatrix::from_rows(&[vec![0.0, -0.2], vec![-0.2, 0.0]]).unwrap();
        g.apply_active_step(&d).unwrap();
        assert!((g.adjacency().get(0, 1) - 0.002).abs() < 1e-15);
        assert_eq!(g.adjacency().get(1, 0), g.adjacency().get(0, 1));

        let frozen = g.truncate(1).unwrap();
        let mut f = frozen.clone();
        assert!(matches!(f.apply_active_step(&d), Err(Error::Phase(_))));
        assert!(matches!(frozen.truncate(1), Err(Error::Phase(_))));
    }

    #[test]
    fn truncate_examples() {
        let g = MergeGraph::with_adjacency(adj3(0.5, 0.1, 0.3), 0.01).unwrap();
        let t0 = g.truncate(0).unwrap();
        assert_eq!(t0.groups(), &[vec![0], vec![1], vec![2]]);
        assert!(t0.adjacency().values().iter().all(|&v| v == 0.0));

        let t1 = g.truncate(1).unwrap();
        assert_eq!(t1.adjacency().get(0, 1), 1.0);
        assert_eq!(t1.adjacency().get(1, 2), 0.0);
        assert_eq!(t1.groups(), &[vec![0, 1], vec![2]]);

        let t2 = g.truncate(2).unwrap();
        assert_eq!(t2.adjacency().get(1, 2), 1.0);
        assert_eq!(t2.adjacency().get(0, 2), 0.0);
        assert_eq!(t2.groups(), &[vec![0, 1, 2]]);
        assert_eq!(g.truncation_reduction(2).unwrap(), 2);
        assert_eq!(g.truncation_reduction(3).unwrap(), 2);

        assert!(g.truncate(4).is_err());
        t2.validate().unwrap();
    }

    #[test]
    fn truncate_tie_break_is_lexicographic() {
        let g = MergeGraph::with_adjacency(adj3(0.0, 0.0, 0.0), 0.01).unwrap();
        let t = g.truncate(1).unwrap();
        assert_eq!(t.groups(), &[vec![0, 1], vec![2]]);
        let g = MergeGraph::with_adjacency(adj3(0.1, 0.4, 0.4), 0.01).unwrap();
        let t = g.truncate(1).unwrap();
        assert_eq!(t.adjacency().get(0, 2), 1.0);
    }

    #[test]
    fn frozen_forward_examples() {
        let id = MergeGraph::identity(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = id.frozen_forward(&[0.1, -0.2, 0.3], &mut rng).unwrap();
        assert_eq!(out.iter().map(|o| o.value).collect::<Vec<_>>(), vec![0.1, -0.2, 0.3]);

        let g = MergeGraph::from_groups(2, vec![vec![0, 1]]).unwrap();
        let u = [0.7, -0.2];
        let (mut hits, draws) = (0usize, 10_000);
        for _ in 0..draws {
            let out = g.frozen_forward(&u, &mut rng).unwrap();
            assert_eq!(out[0].value, u[out[0].chosen_child]);
            hits += usize::from(out[0].chosen_child == 0);
        }
        let frac = hits as f64 / draws as f64;
        assert!((frac - 0.5).abs() <= 0.02, "child 0 chosen {frac}");

        let active = MergeGraph::new_active(2, 0.01).unwrap();
        assert!(matches!(active.frozen_forward(&u, &mut rng), Err(Error::Phase(_))));
    }

    #[test]
    fn frozen_grads_examples() {
        let g = MergeGraph::from_groups(2, vec![vec![0, 1]]).unwrap();
        let u = [0.7, -0.2];
        let choice = [GroupOutput { group: 0, chosen_child: 0, value: 0.7 }];
        let du = g.frozen_grads(&u, &choice, &[0.37]).unwrap();
        assert_eq!(du[0], 0.37);
        assert!((du[1] + 2.4).abs() < 1e-15);

        let u = [0.7, 1.0];
        let du = g.frozen_grads(&u, &choice, &[0.37]).unwrap();
        assert_eq!(du, vec![0.37, 0.0]);

        let id = MergeGraph::identity(3);
        let ch: Vec<GroupOutput> = (0..3)
            .map(|i| GroupOutput { group: i, chosen_child: i, value: 0.0 })
            .collect();
        assert_eq!(id.frozen_grads(&[1.0, 2.0, 3.0], &ch, &[4.0, 5.0, 6.0]).unwrap(), vec![4.0, 5.0, 6.0]);

        let bad = [GroupOutput { group: 0, chosen_child: 5, value: 0.0 }];
        assert!(g.frozen_grads(&u, &bad, &[0.0]).is_err());
    }

    #[test]
    fn eval_forward_examples() {
        let g = MergeGraph::from_groups(2, vec![vec![0, 1]]).unwrap();
        assert_eq!(g.eval_forward(&[0.3, 0.9]).unwrap(), vec![1]);
        assert_eq!(g.eval_forward(&[0.3, -0.9]).unwrap(), vec![0]);
        let g3 = MergeGraph::from_groups(3, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(g3.eval_forward(&[-0.1, -2.0, 5.0]).unwrap(), vec![-1]);
    }

    #[test]
    fn compose_flattens_stacked_layers() {
        let lower = MergeGraph::from_groups(5, vec![vec![0, 3], vec![1], vec![2], vec![4]]).unwrap();
        let upper = MergeGraph::from_groups(4, vec![vec![0, 2], vec![1], vec![3]]).unwrap();
        let flat = lower.compose(&upper).unwrap();
        assert_eq!(flat.groups(), &[vec![0, 2, 3], vec![1], vec![4]]);
        flat.validate().unwrap();
        assert!(lower.compose(&MergeGraph::identity(3)).is_err());
    }

    #[test]
    fn score_examples() {
        // bit 0 separates two classes, bit 1 is constant
        let codes = CodeMatrix::from_rows(&[vec![1, 1], vec![1, 1], vec![-1, 1], vec![-1, 1]]).unwrap();
        let labels: Vec<LabelSet> = [0, 0, 1, 1].iter().map(|&l| LabelSet::single(l)).collect();
        let side = LabeledCodes::new(&codes, &labels).unwrap();
        let p = score_neurons(&side, &side).unwrap();
        assert!(p.0[0] <= p.0[1]);
        assert_eq!(p.0[1], 1.0);

        let one = CodeMatrix::from_rows(&[vec![1], vec![-1]]).unwrap();
        let l2 = &labels[..2];
        let s = LabeledCodes::new(&one, l2).unwrap();
        assert!(score_neurons(&s, &s).is_err());
    }
}
