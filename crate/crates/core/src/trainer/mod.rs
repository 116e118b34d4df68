//! Training runs: configuration, the stage machine, variants and reports.

mod checkpoint;
mod config;
mod model;
mod report;
mod run;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use config::{ExperimentConfig, Variant};
pub use model::{leave_one_out_profile, EncodedSplits, EvalMetrics, Model, Readout};
pub use report::{
    FinalMetrics, LooProfile, RoundReport, RunReport, TracePoint, REPORT_SCHEMA_VERSION,
};
pub use run::{prepare_dataset, Stage, TrainState, Trainer};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::nmlayer::MergeGraph;
use crate::numcore::HashNet;

/// Trains any variant to completion on a dataset with assigned roles.
pub fn train(cfg: &ExperimentConfig, ds: &FeatureDataset) -> Result<(Model, RunReport)> {
    Trainer::new(cfg, ds)?.run_to_end()
}

/// Fixed-length training at `b_out` bits.
pub fn train_baseline(cfg: &ExperimentConfig, ds: &FeatureDataset) -> Result<(HashNet, RunReport)> {
    if cfg.variant != Variant::Baseline || cfg.b_in != cfg.b_out {
        return Err(Error::config(
            "baseline training needs variant = baseline and b_in = b_out",
        ));
    }
    let (model, report) = train(cfg, ds)?;
    Ok((model.net, report))
}

/// Progressive merging from `b_in` down to `b_out` bits. Returns the encoder,
/// the cumulative merge partition over its outputs, and the run report.
pub fn train_progressive(
    cfg: &ExperimentConfig,
    ds: &FeatureDataset,
) -> Result<(HashNet, MergeGraph, RunReport)> {
    if cfg.variant != Variant::Full {
        return Err(Error::config("progressive training needs variant = full"));
    }
    let (model, report) = train(cfg, ds)?;
    match model.readout {
        Readout::Merge { graph } => Ok((model.net, graph, report)),
        Readout::Select { .. } => unreachable!("full runs always use a merge readout"),
    }
}

/// Runs one of the comparison variants.
pub fn run_variant(cfg: &ExperimentConfig, ds: &FeatureDataset) -> Result<RunReport> {
    match cfg.variant {
        Variant::Random | Variant::Select | Variant::Dropout | Variant::FcLayer => {
            Ok(train(cfg, ds)?.1)
        }
        v => Err(Error::config(format!(
            "{v} is not a comparison variant (expected random, select, dropout or fclayer)"
        ))),
    }
}
