use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::SgdConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Progressive merging with learned adjacency.
    Full,
    /// Fixed-length training at `b_out` bits, no merging.
    Baseline,
    /// Merging driven by a seeded random adjacency instead of a learned one.
    Random,
    /// Keep the `b_out` most important bits, drop the rest.
    Select,
    /// Baseline with dropout before the hashing layer.
    Dropout,
    /// Baseline at `b_in` bits followed by a trainable affine `b_in → b_out` map.
    #[serde(rename = "fclayer")]
    FcLayer,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Full,
        Variant::Baseline,
        Variant::Random,
        Variant::Select,
        Variant::Dropout,
        Variant::FcLayer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Baseline => "baseline",
            Variant::Random => "random",
            Variant::Select => "select",
            Variant::Dropout => "dropout",
            Variant::FcLayer => "fclayer",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown variant {s:?} (expected one of full, baseline, random, select, dropout, fclayer)"
                ))
            })
    }
}

/// All hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Width of the hashing layer before any merging.
    pub b_in: usize,
    /// Required final code length.
    pub b_out: usize,
    /// Edges kept per truncation.
    pub m: usize,
    /// Active-phase epochs per merging round.
    pub n0_epochs: usize,
    /// Frozen-phase epochs per merging round.
    pub n1_epochs: usize,
    /// Plain training epochs before the first merging round.
    pub base_epochs: usize,
    pub batch_size: usize,
    pub backbone_sgd: SgdConfig,
    pub nm_learning_rate: f64,
    pub eta: f64,
    pub seed: u64,
    pub variant: Variant,
    pub dropout_rate: f64,
    pub hidden_dims: Vec<usize>,
    pub n_query: usize,
    /// `None` selects 10% of the non-query items, capped at 500.
    pub n_validation: Option<usize>,
    /// Score neurons on every `score_every`-th minibatch of the active phase.
    pub score_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            b_in: 60,
            b_out: 32,
            m: 4,
            n0_epochs: 5,
            n1_epochs: 40,
            base_epochs: 30,
            batch_size: 128,
            backbone_sgd: SgdConfig {
                learning_rate: 1e-4,
                weight_decay: 1e-5,
            },
            nm_learning_rate: 1e-2,
            eta: 1200.0,
            seed: 0,
            variant: Variant::Full,
            dropout_rate: 0.5,
            hidden_dims: vec![256],
            n_query: 200,
            n_validation: None,
            score_every: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b_out == 0 {
            return Err(Error::config("b_out must be at least 1"));
        }
        if self.b_in < self.b_out {
            return Err(Error::config(format!(
                "b_in ({}) must be at least b_out ({})",
                self.b_in, self.b_out
            )));
        }
        if self.m == 0 {
            return Err(Error::config("m must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("batch size must be at least 2 to form pairs"));
        }
        self.backbone_sgd.validate()?;
        if !(self.nm_learning_rate > 0.0 && self.nm_learning_rate.is_finite()) {
            return Err(Error::config("merge-layer learning rate must be positive"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("eta must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout rate must lie in [0, 1)"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::config("hidden layer widths must be at least 1"));
        }
        if self.n_query == 0 {
            return Err(Error::config("at least one query item is required"));
        }
        if self.score_every == 0 {
            return Err(Error::config("score_every must be at least 1"));
        }
        Ok(())
    }

    /// Nominal number of merging rounds, `ceil((b_in − b_out) / m)`.
    pub fn nominal_rounds(&self) -> usize {
        (self.b_in - self.b_out).div_ceil(self.m)
    }

    /// Backbone-updating epochs of a full progressive run. Active-phase epochs
    /// leave the backbone untouched and are not counted.
    pub fn backbone_epoch_budget(&self) -> usize {
        self.base_epochs + self.nominal_rounds() * self.n1_epochs
    }

    /// Config for `variant` with a backbone budget matched to this config's
    /// progressive schedule. Fixed-length variants train `b_out` bits for the
    /// whole budget.
    pub fn for_variant(&self, variant: Variant) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.variant = variant;
        if matches!(variant, Variant::Baseline | Variant::Dropout) {
            cfg.base_epochs = self.backbone_epoch_budget();
            cfg.b_in = self.b_out;
        }
        cfg
    }

    /// Width of the encoder's hashing layer at initialization.
    pub fn initial_width(&self) -> usize {
        match self.variant {
            Variant::Baseline | Variant::Dropout => self.b_out,
            _ => self.b_in,
        }
    }
}
