//! The training state machine.
//!
//! A run is a sequence of stages; each stage lasts a fixed number of epochs and
//! transitions happen between epochs, so a [`TrainState`] captured at any epoch
//! boundary resumes to exactly the same result. Every epoch draws its
//! randomness from streams derived from `(seed, stream, global epoch)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Variant};
use super::model::{loo_from_codes, Model, Readout};
use super::report::{FinalMetrics, RoundReport, RunReport, TracePoint};
use crate::data::{assign_splits, default_validation_size, standardize, FeatureDataset, Role};
use crate::error::{Error, Result};
use crate::hashloss::{relaxed_hash_loss, relaxed_hash_loss_grad, SimilarityMatrix};
use crate::metrics::{mean_average_precision, precision_at_hamming_radius, LabelSet, LabeledCodes};
use crate::nmlayer::{active_grad, active_loss, propagate_scores, score_neurons, MergeGraph};
use crate::numcore::{
    backward, forward, forward_train, init_network, sgd_step, Activation, DenseMatrix, Dropout,
};

mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const CHOICE: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const RANDOM_ADJACENCY: u64 = 5;
    pub const FC_INIT: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, stream: u64, counter: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_mul(0x1000_0000_01B3) ^ splitmix64(counter)))
}

fn stream_rng(seed: u64, stream: u64, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, counter))
}

/// Scale applied to the summed minibatch objective before backpropagation:
/// one over the number of ordered pairs.
fn objective_scale(n: usize) -> f64 {
    1.0 / (n * (n - 1)) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    /// Plain training of the encoder at its initial width.
    Base { done: usize },
    /// Adjacency learning for merging round `round` (backbone fixed).
    Active { round: usize, done: usize },
    /// Training through the merged readout.
    Frozen { round: usize, done: usize },
    /// Importance scoring for the select variant.
    SelectScore { done: usize },
    /// Training after selection or after appending the FC layer.
    FineTune { done: usize },
    Finished,
}

/// Everything needed to continue a run from an epoch boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub model: Model,
    pub active_graph: Option<MergeGraph>,
    pub stage: Stage,
    /// Epochs run so far across all stages; indexes the per-epoch RNG streams.
    pub epochs_run: u64,
    /// Running sum of select-variant scores and the number of scored batches.
    pub select_scores: Option<(Vec<f64>, usize)>,
    pub current_round: Option<RoundReport>,
    pub report: RunReport,
}

/// Splits `raw` into query/validation/train roles and standardizes features
/// with train-split statistics.
pub fn prepare_dataset(cfg: &ExperimentConfig, raw: &FeatureDataset) -> Result<FeatureDataset> {
    let n_val = cfg
        .n_validation
        .unwrap_or_else(|| default_validation_size(raw.len(), cfg.n_query));
    standardize(&assign_splits(raw, n_val, cfg.n_query, cfg.seed)?)
}

pub struct Trainer<'a> {
    cfg: ExperimentConfig,
    ds: &'a FeatureDataset,
    train_idx: Vec<usize>,
    val_idx: Vec<usize>,
    state: TrainState,
}

impl<'a> Trainer<'a> {
    /// `ds` must already carry its roles (see [`prepare_dataset`]).
    pub fn new(cfg: &ExperimentConfig, ds: &'a FeatureDataset) -> Result<Self> {
        cfg.validate()?;
        let mut dims = vec![ds.dim()];
        dims.extend(&cfg.hidden_dims);
        dims.push(cfg.initial_width());
        let net = init_network(&dims, Activation::Tanh, derive_seed(cfg.seed, stream::INIT, 0))?;
        let state = TrainState {
            model: Model {
                net,
                readout: Readout::identity(cfg.initial_width()),
            },
            active_graph: None,
            stage: Stage::Base { done: 0 },
            epochs_run: 0,
            select_scores: None,
            current_round: None,
            report: RunReport::new(cfg),
        };
        Self::with_state(cfg, ds, state)
    }

    pub fn resume(cfg: &ExperimentConfig, ds: &'a FeatureDataset, state: TrainState) -> Result<Self> {
        cfg.validate()?;
        if let Readout::Merge { graph } = &state.model.readout {
            graph.validate()?;
        }
        if let Some(g) = &state.active_graph {
            g.validate()?;
        }
        if state.model.net.input_dim() != ds.dim() {
            return Err(Error::shape(format!(
                "checkpointed network expects {} features, dataset has {}",
                state.model.net.input_dim(),
                ds.dim()
            )));
        }
        Self::with_state(cfg, ds, state)
    }

    fn with_state(cfg: &ExperimentConfig, ds: &'a FeatureDataset, state: TrainState) -> Result<Self> {
        let train_idx = ds.indices(Role::Train);
        let val_idx = ds.indices(Role::Validation);
        if train_idx.len() < 2 {
            return Err(Error::config("at least two training items are required"));
        }
        if ds.indices(Role::Query).is_empty() {
            return Err(Error::config("the query split is empty"));
        }
        let needs_scores = matches!(cfg.variant, Variant::Full | Variant::Select) && cfg.b_in > cfg.b_out;
        if needs_scores && val_idx.is_empty() {
            return Err(Error::config(
                "the active phase needs a nonempty validation set (set n_validation > 0)",
            ));
        }
        Ok(Self {
            cfg: cfg.clone(),
            ds,
            train_idx,
            val_idx,
            state,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.stage == Stage::Finished
    }

    /// Runs one epoch of the current stage (after applying any pending stage
    /// transitions). Returns `false` once the run is finished.
    pub fn step(&mut self) -> Result<bool> {
        self.advance()?;
        if self.is_finished() {
            return Ok(false);
        }
        match self.state.stage {
            Stage::Base { .. } | Stage::Frozen { .. } | Stage::FineTune { .. } => {
                self.backbone_epoch()?
            }
            Stage::Active { .. } | Stage::SelectScore { .. } => self.scoring_epoch()?,
            Stage::Finished => unreachable!(),
        }
        self.state.epochs_run += 1;
        match &mut self.state.stage {
            Stage::Base { done }
            | Stage::Active { done, .. }
            | Stage::Frozen { done, .. }
            | Stage::SelectScore { done }
            | Stage::FineTune { done } => *done += 1,
            Stage::Finished => {}
        }
        self.advance()?;
        Ok(!self.is_finished())
    }

    /// Runs up to `epochs` epochs; stops early when finished.
    pub fn run_epochs(&mut self, epochs: usize) -> Result<()> {
        for _ in 0..epochs {
            if !self.step()? {
                break;
            }
        }
        Ok(())
    }

    pub fn run_to_end(mut self) -> Result<(Model, RunReport)> {
        while self.step()? {}
        let TrainState { model, report, .. } = self.state;
        Ok((model, report))
    }

    fn finetune_epochs(&self) -> usize {
        self.cfg.nominal_rounds() * self.cfg.n1_epochs
    }

    fn active_epochs(&self) -> usize {
        match self.cfg.variant {
            Variant::Random => 0,
            _ => self.cfg.n0_epochs,
        }
    }

    /// Applies stage transitions until the current stage has epochs left.
    fn advance(&mut self) -> Result<()> {
        loop {
            match self.state.stage.clone() {
                Stage::Base { done } if done >= self.cfg.base_epochs => self.on_base_complete()?,
                Stage::Active { round, done } if done >= self.active_epochs() => {
                    self.truncate_round(round)?
                }
                Stage::Frozen { round, done } if done >= self.cfg.n1_epochs => {
                    self.finish_round(round)?
                }
                Stage::SelectScore { done } if done >= self.cfg.n0_epochs => self.select_bits()?,
                Stage::FineTune { done } if done >= self.finetune_epochs() => self.finalize()?,
                _ => return Ok(()),
            }
        }
    }

    fn current_map(&self) -> Result<f64> {
        self.state.model.map(self.ds)
    }

    fn push_trace_point(&mut self) -> Result<()> {
        let map = self.current_map()?;
        self.state.report.bit_reduction.push(TracePoint {
            effective_bits: self.state.model.effective_bits(),
            map,
        });
        Ok(())
    }

    fn on_base_complete(&mut self) -> Result<()> {
        match self.cfg.variant {
            Variant::Baseline | Variant::Dropout => self.finalize(),
            Variant::Full | Variant::Random => {
                self.push_trace_point()?;
                if self.state.model.effective_bits() > self.cfg.b_out {
                    self.start_round(1)
                } else {
                    self.finalize()
                }
            }
            Variant::Select => {
                self.push_trace_point()?;
                if self.cfg.b_in > self.cfg.b_out {
                    self.state.select_scores = Some((vec![0.0; self.cfg.b_in], 0));
                    self.state.stage = Stage::SelectScore { done: 0 };
                    Ok(())
                } else {
                    self.finalize()
                }
            }
            Variant::FcLayer => {
                self.push_trace_point()?;
                self.state.model.net.push_affine(
                    self.cfg.b_out,
                    derive_seed(self.cfg.seed, stream::FC_INIT, 0),
                )?;
                self.state.model.readout = Readout::identity(self.cfg.b_out);
                self.state.stage = Stage::FineTune { done: 0 };
                Ok(())
            }
        }
    }

    fn start_round(&mut self, round: usize) -> Result<()> {
        let bits = self.state.model.effective_bits();
        let graph = match self.cfg.variant {
            Variant::Random => {
                let mut rng = stream_rng(self.cfg.seed, stream::RANDOM_ADJACENCY, round as u64);
                let mut a = DenseMatrix::zeros(bits, bits);
                for i in 0..bits {
                    for j in (i + 1)..bits {
                        let v: f64 = rng.random();
                        a.set(i, j, v);
                        a.set(j, i, v);
                    }
                }
                MergeGraph::with_adjacency(a, self.cfg.nm_learning_rate)?
            }
            _ => MergeGraph::new_active(bits, self.cfg.nm_learning_rate)?,
        };
        self.state.active_graph = Some(graph);
        self.state.current_round = Some(RoundReport {
            round,
            bits_before: bits,
            effective_bits: bits,
            m_used: 0,
            merged_groups: Vec::new(),
            active_loss_trace: Vec::new(),
            max_score_sum_drift: 0.0,
            map: 0.0,
        });
        self.state.stage = Stage::Active { round, done: 0 };
        Ok(())
    }

    fn truncate_round(&mut self, round: usize) -> Result<()> {
        let graph = self
            .state
            .active_graph
            .take()
            .ok_or_else(|| Error::Phase("no active graph to truncate".into()))?;
        let needed = graph.n_nodes() - self.cfg.b_out;
        let m_used = choose_edge_count(&graph, self.cfg.m, needed)?;
        let frozen = graph.truncate(m_used)?;
        let Readout::Merge { graph: cumulative } = &self.state.model.readout else {
            return Err(Error::Phase("merging requires a merge readout".into()));
        };
        let cumulative = cumulative.compose(&frozen)?;
        self.state.model.readout = Readout::Merge { graph: cumulative };
        let round_report = self
            .state
            .current_round
            .as_mut()
            .ok_or_else(|| Error::Phase("no round in progress".into()))?;
        round_report.m_used = m_used;
        round_report.effective_bits = frozen.n_groups();
        round_report.merged_groups = frozen
            .groups()
            .iter()
            .filter(|g| g.len() > 1)
            .cloned()
            .collect();
        self.state.stage = Stage::Frozen { round, done: 0 };
        Ok(())
    }

    fn finish_round(&mut self, round: usize) -> Result<()> {
        let map = self.current_map()?;
        let mut rr = self
            .state
            .current_round
            .take()
            .ok_or_else(|| Error::Phase("no round in progress".into()))?;
        rr.map = map;
        self.state.report.rounds.push(rr);
        self.state.report.bit_reduction.push(TracePoint {
            effective_bits: self.state.model.effective_bits(),
            map,
        });
        if self.state.model.effective_bits() > self.cfg.b_out {
            self.start_round(round + 1)
        } else {
            self.finalize()
        }
    }

    fn select_bits(&mut self) -> Result<()> {
        let (sums, count) = self
            .state
            .select_scores
            .take()
            .ok_or_else(|| Error::Phase("no select scores accumulated".into()))?;
        let mean: Vec<f64> = sums.iter().map(|s| s / count.max(1) as f64).collect();
        // low leave-one-out MAP means the bit matters most
        let mut order: Vec<usize> = (0..mean.len()).collect();
        order.sort_by(|&a, &b| mean[a].total_cmp(&mean[b]).then(a.cmp(&b)));
        let mut kept = order[..self.cfg.b_out].to_vec();
        kept.sort_unstable();
        self.state.report.selected_bits = Some(kept.clone());
        self.state.model.readout = Readout::Select {
            n_outputs: self.cfg.b_in,
            kept,
        };
        self.state.stage = Stage::FineTune { done: 0 };
        Ok(())
    }

    fn finalize(&mut self) -> Result<()> {
        let enc = self.state.model.encode_splits(self.ds)?;
        let map = mean_average_precision(&enc.query(), &enc.gallery(), None)?;
        let p2 = precision_at_hamming_radius(&enc.query(), &enc.gallery(), 2.0)?;
        self.state.report.final_metrics = Some(FinalMetrics {
            map,
            effective_bits: self.state.model.effective_bits(),
            precision_at_radius_2: p2,
        });
        self.state.report.leave_one_out = if enc.query_codes.bits() >= 2 {
            Some(loo_from_codes(&enc)?)
        } else {
            None
        };
        self.state.stage = Stage::Finished;
        Ok(())
    }

    fn shuffled_batches(&self) -> Vec<Vec<usize>> {
        let mut order = self.train_idx.clone();
        order.shuffle(&mut stream_rng(
            self.cfg.seed,
            stream::SHUFFLE,
            self.state.epochs_run,
        ));
        order
            .chunks(self.cfg.batch_size)
            .filter(|c| c.len() >= 2)
            .map(<[usize]>::to_vec)
            .collect()
    }

    fn backbone_epoch(&mut self) -> Result<()> {
        let epoch = self.state.epochs_run;
        let mut choice_rng = stream_rng(self.cfg.seed, stream::CHOICE, epoch);
        let mut dropout_rng = stream_rng(self.cfg.seed, stream::DROPOUT, epoch);
        let use_dropout = self.cfg.variant == Variant::Dropout;
        let mut total = 0.0;
        let batches = self.shuffled_batches();
        for batch in &batches {
            let x = self.ds.features.select_rows(batch);
            let labels = self.ds.labels_of(batch);
            let dropout = use_dropout.then_some(Dropout {
                rate: self.cfg.dropout_rate,
                rng: &mut dropout_rng,
            });
            let (u, cache) = forward_train(&self.state.model.net, &x, dropout)?;
            let (loss, du) = readout_objective(
                &self.state.model.readout,
                &u,
                &labels,
                self.cfg.eta,
                &mut choice_rng,
            )?;
            total += loss;
            let grads = backward(&self.state.model.net, &cache, &du)?;
            sgd_step(&mut self.state.model.net, &grads, &self.cfg.backbone_sgd)?;
        }
        if !self.state.model.net.is_finite() {
            return Err(Error::InvalidArgument(
                "training diverged (non-finite parameters); lower the learning rate".into(),
            ));
        }
        self.state
            .report
            .epoch_losses
            .push(total / batches.len().max(1) as f64);
        Ok(())
    }

    /// One pass of neuron scoring: every `score_every`-th minibatch is the
    /// gallery, the validation split the queries, both in evaluation mode.
    fn scoring_epoch(&mut self) -> Result<()> {
        let val_x = self.ds.features.select_rows(&self.val_idx);
        let val_labels = self.ds.labels_of(&self.val_idx);
        let (val_u, _) = forward(&self.state.model.net, &val_x)?;
        let val_codes = self.state.model.readout.eval_codes(&val_u)?;
        let query = LabeledCodes::new(&val_codes, &val_labels)?;
        for (b, batch) in self.shuffled_batches().iter().enumerate() {
            if b % self.cfg.score_every != 0 {
                continue;
            }
            let (u, _) = forward(&self.state.model.net, &self.ds.features.select_rows(batch))?;
            let codes = self.state.model.readout.eval_codes(&u)?;
            let labels = self.ds.labels_of(batch);
            let p = score_neurons(&LabeledCodes::new(&codes, &labels)?, &query)?;
            match self.state.stage {
                Stage::SelectScore { .. } => {
                    let (sums, count) = self
                        .state
                        .select_scores
                        .as_mut()
                        .ok_or_else(|| Error::Phase("select scores missing".into()))?;
                    sums.iter_mut().zip(&p.0).for_each(|(s, v)| *s += v);
                    *count += 1;
                }
                _ => {
                    let graph = self
                        .state
                        .active_graph
                        .as_mut()
                        .ok_or_else(|| Error::Phase("no active graph".into()))?;
                    let propagated = propagate_scores(&p, graph.adjacency())?;
                    let loss = active_loss(&propagated);
                    let drift = (propagated.sum() - p.sum()).abs();
                    graph.apply_active_step(&active_grad(&p, &propagated)?)?;
                    if let Some(rr) = self.state.current_round.as_mut() {
                        rr.active_loss_trace.push(loss);
                        rr.max_score_sum_drift = rr.max_score_sum_drift.max(drift);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Largest edge count `<= m` whose truncation removes at most `needed` nodes.
fn choose_edge_count(graph: &MergeGraph, m: usize, needed: usize) -> Result<usize> {
    let max_edges = graph.n_nodes() * (graph.n_nodes() - 1) / 2;
    let mut k = m.min(max_edges);
    while k > 1 && graph.truncation_reduction(k)? > needed {
        k -= 1;
    }
    Ok(k)
}

/// Scaled training objective on one minibatch and its gradient w.r.t. the
/// encoder outputs: relaxed hashing loss over the readout's training-mode
/// outputs plus, for merged groups, the sign-target loss on unchosen children.
pub(crate) fn readout_objective<R: Rng>(
    readout: &Readout,
    u: &DenseMatrix,
    labels: &[LabelSet],
    eta: f64,
    rng: &mut R,
) -> Result<(f64, DenseMatrix)> {
    let n = u.rows();
    let s = SimilarityMatrix::from_labels(labels, labels)?;
    let scale = objective_scale(n);
    let mut du = DenseMatrix::zeros(n, u.cols());
    let loss = match readout {
        Readout::Merge { graph } if graph.n_groups() == graph.n_nodes() => {
            let k = u.cols();
            let loss = relaxed_hash_loss(u, &s, k, eta)?.total;
            du = relaxed_hash_loss_grad(u, &s, k, eta)?;
            loss
        }
        Readout::Merge { graph } => {
            let k = graph.n_groups();
            let mut merged = DenseMatrix::zeros(n, k);
            let mut choices = Vec::with_capacity(n);
            for r in 0..n {
                let out = graph.frozen_forward(u.row(r), rng)?;
                for (m, o) in merged.row_mut(r).iter_mut().zip(&out) {
                    *m = o.value;
                }
                choices.push(out);
            }
            let mut loss = relaxed_hash_loss(&merged, &s, k, eta)?.total;
            let dm = relaxed_hash_loss_grad(&merged, &s, k, eta)?;
            for (r, ch) in choices.iter().enumerate() {
                loss += graph.frozen_loss(u.row(r), ch)?;
                let g = graph.frozen_grads(u.row(r), ch, dm.row(r))?;
                du.row_mut(r).copy_from_slice(&g);
            }
            loss
        }
        Readout::Select { kept, .. } => {
            let k = kept.len();
            let mut sel = DenseMatrix::zeros(n, k);
            for r in 0..n {
                for (c, &src) in kept.iter().enumerate() {
                    sel.set(r, c, u.get(r, src));
                }
            }
            let loss = relaxed_hash_loss(&sel, &s, k, eta)?.total;
            let ds = relaxed_hash_loss_grad(&sel, &s, k, eta)?;
            for r in 0..n {
                for (c, &dst) in kept.iter().enumerate() {
                    du.set(r, dst, ds.get(r, c));
                }
            }
            loss
        }
    };
    du.scale(scale);
    Ok((loss * scale, du))
}
