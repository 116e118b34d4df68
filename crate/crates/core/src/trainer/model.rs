use serde::{Deserialize, Serialize};

use super::report::LooProfile;
use crate::data::{FeatureDataset, Role};
use crate::error::{Error, Result};
use crate::metrics::{
    mean_average_precision, pr_curve, precision_at_hamming_radius, precision_at_top_n, CodeMatrix,
    LabelSet, LabeledCodes, PrPoint,
};
use crate::nmlayer::MergeGraph;
use crate::numcore::{forward, DenseMatrix, HashNet};

/// How encoder outputs become code bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Readout {
    /// Cumulative merge partition over the encoder outputs (all singletons
    /// when nothing has been merged).
    Merge { graph: MergeGraph },
    /// Keep only the listed encoder outputs.
    Select { n_outputs: usize, kept: Vec<usize> },
}

impl Readout {
    pub fn identity(width: usize) -> Self {
        Readout::Merge {
            graph: MergeGraph::identity(width),
        }
    }

    pub fn effective_bits(&self) -> usize {
        match self {
            Readout::Merge { graph } => graph.n_groups(),
            Readout::Select { kept, .. } => kept.len(),
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            Readout::Merge { graph } => graph.n_nodes(),
            Readout::Select { n_outputs, .. } => *n_outputs,
        }
    }

    pub fn eval_codes(&self, u: &DenseMatrix) -> Result<CodeMatrix> {
        match self {
            Readout::Merge { graph } => graph.eval_codes(u),
            Readout::Select { kept, .. } => Ok(CodeMatrix::from_signs(u).select_columns(kept)),
        }
    }
}

/// Trained encoder plus its readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub net: HashNet,
    pub readout: Readout,
}

/// Codes and labels of the query and gallery splits.
pub struct EncodedSplits {
    pub query_codes: CodeMatrix,
    pub query_labels: Vec<LabelSet>,
    pub gallery_codes: CodeMatrix,
    pub gallery_labels: Vec<LabelSet>,
}

impl EncodedSplits {
    pub fn query(&self) -> LabeledCodes<'_> {
        LabeledCodes {
            codes: &self.query_codes,
            labels: &self.query_labels,
        }
    }

    pub fn gallery(&self) -> LabeledCodes<'_> {
        LabeledCodes {
            codes: &self.gallery_codes,
            labels: &self.gallery_labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub map: f64,
    pub top_r: Option<usize>,
    pub map_at_top_r: Option<f64>,
    pub radius: f64,
    pub precision_at_radius: f64,
    pub top_n: Vec<usize>,
    pub precision_at_top_n: Vec<f64>,
    pub effective_bits: usize,
}

impl Model {
    pub fn effective_bits(&self) -> usize {
        self.readout.effective_bits()
    }

    pub fn encode(&self, features: &DenseMatrix) -> Result<CodeMatrix> {
        let (u, _) = forward(&self.net, features)?;
        self.readout.eval_codes(&u)
    }

    pub fn encode_splits(&self, ds: &FeatureDataset) -> Result<EncodedSplits> {
        let q = ds.indices(Role::Query);
        let g = ds.gallery_indices();
        if q.is_empty() || g.is_empty() {
            return Err(Error::config("dataset needs nonempty query and gallery splits"));
        }
        Ok(EncodedSplits {
            query_codes: self.encode(&ds.features.select_rows(&q))?,
            query_labels: ds.labels_of(&q),
            gallery_codes: self.encode(&ds.features.select_rows(&g))?,
            gallery_labels: ds.labels_of(&g),
        })
    }

    pub fn map(&self, ds: &FeatureDataset) -> Result<f64> {
        let enc = self.encode_splits(ds)?;
        mean_average_precision(&enc.query(), &enc.gallery(), None)
    }

    pub fn evaluate(
        &self,
        ds: &FeatureDataset,
        top_r: Option<usize>,
        radius: f64,
        top_n: &[usize],
    ) -> Result<EvalMetrics> {
        let enc = self.encode_splits(ds)?;
        let (q, g) = (enc.query(), enc.gallery());
        let map = mean_average_precision(&q, &g, None)?;
        let map_at_top_r = top_r
            .map(|r| mean_average_precision(&q, &g, Some(r)))
            .transpose()?;
        Ok(EvalMetrics {
            map,
            top_r,
            map_at_top_r,
            radius,
            precision_at_radius: precision_at_hamming_radius(&q, &g, radius)?,
            top_n: top_n.to_vec(),
            precision_at_top_n: precision_at_top_n(&q, &g, top_n)?,
            effective_bits: self.effective_bits(),
        })
    }

    pub fn pr_curve(&self, ds: &FeatureDataset) -> Result<Vec<PrPoint>> {
        let enc = self.encode_splits(ds)?;
        pr_curve(&enc.query(), &enc.gallery())
    }
}

/// MAP with each effective bit removed in turn, and the spread of the drops.
pub fn leave_one_out_profile(model: &Model, ds: &FeatureDataset) -> Result<LooProfile> {
    let bits = model.effective_bits();
    if bits < 2 {
        return Err(Error::invalid(
            "leave-one-out profiling needs at least two effective bits",
        ));
    }
    let enc = model.encode_splits(ds)?;
    loo_from_codes(&enc)
}

pub(crate) fn loo_from_codes(enc: &EncodedSplits) -> Result<LooProfile> {
    let full = mean_average_precision(&enc.query(), &enc.gallery(), None)?;
    let map_without_bit = (0..enc.query_codes.bits())
        .map(|k| {
            let qc = enc.query_codes.without_column(k);
            let gc = enc.gallery_codes.without_column(k);
            mean_average_precision(
                &LabeledCodes::new(&qc, &enc.query_labels)?,
                &LabeledCodes::new(&gc, &enc.gallery_labels)?,
                None,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let drops: Vec<f64> = map_without_bit.iter().map(|m| full - m).collect();
    Ok(LooProfile {
        std: population_std(&drops),
        map_without_bit,
        drops,
    })
}

pub(crate) fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}
