use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Variant};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One merging round: active scoring, truncation, frozen training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub bits_before: usize,
    pub effective_bits: usize,
    /// Edges actually kept at truncation (may be below the configured `m`).
    pub m_used: usize,
    /// Merged groups of this round's graph, over the round's input nodes.
    pub merged_groups: Vec<Vec<usize>>,
    /// Active loss after each adjacency update.
    pub active_loss_trace: Vec<f64>,
    /// Largest `|Σp' − Σp|` seen during the round.
    pub max_score_sum_drift: f64,
    /// MAP at the end of the frozen phase.
    pub map: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub effective_bits: usize,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooProfile {
    /// MAP with each effective bit removed.
    pub map_without_bit: Vec<f64>,
    /// `full_map − map_without_bit[k]`.
    pub drops: Vec<f64>,
    /// Population standard deviation of `drops`.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub map: f64,
    pub effective_bits: usize,
    pub precision_at_radius_2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub variant: Variant,
    pub config: ExperimentConfig,
    /// Mean training objective per backbone-updating epoch.
    pub epoch_losses: Vec<f64>,
    pub rounds: Vec<RoundReport>,
    /// Effective bit count and MAP after base training and after every round.
    pub bit_reduction: Vec<TracePoint>,
    /// Bits kept by the select variant.
    pub selected_bits: Option<Vec<usize>>,
    pub final_metrics: Option<FinalMetrics>,
    pub leave_one_out: Option<LooProfile>,
}

impl RunReport {
    pub(crate) fn new(config: &ExperimentConfig) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            variant: config.variant,
            config: config.clone(),
            epoch_losses: Vec::new(),
            rounds: Vec::new(),
            bit_reduction: Vec::new(),
            selected_bits: None,
            final_metrics: None,
            leave_one_out: None,
        }
    }

    pub fn final_map(&self) -> Option<f64> {
        self.final_metrics.as_ref().map(|m| m.map)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
