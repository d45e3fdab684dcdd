//! Prompt proposal classifiers.
//!
//! Two variants share one loss and one training loop: [`RlpgH`] scores all
//! proposals from the hole window alone, [`RlpgR`] attends from the hole
//! window to each proposal's context.

mod checkpoint;
mod embed;
mod nets;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, read_checkpoint, write_checkpoint};
pub use embed::{EmbeddingProvider, HashedProvider, ProviderKind, RemoteProvider, EMBED_DIM};
pub use nets::{
    masked_bce_loss, Batch, Grads, Net, RlpgH, RlpgR, Variant, BCE_EPS, FF_DIM, HEADS, HEAD_DIM,
    H_HIDDEN,
};
pub use train::{dataset_loss, train_ppc, EpochStats, Example, TrainHyper, TrainOutcome};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{DEFAULT_PROPOSAL, NUM_PROPOSALS};

/// Ground truth for one hole: `y[p]` success, `t[p]` applicability.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub hole_id: String,
    #[serde(rename = "Y")]
    pub y: Vec<u8>,
    #[serde(rename = "T")]
    pub t: Vec<u8>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub incomplete: bool,
}

impl LabelRecord {
    pub fn validate(&self) -> Result<()> {
        if self.y.len() != NUM_PROPOSALS || self.t.len() != NUM_PROPOSALS {
            return Err(Error::Shape(format!("label {} must have {NUM_PROPOSALS} entries", self.hole_id)));
        }
        if self.t[DEFAULT_PROPOSAL] != 1 {
            return Err(Error::invalid(format!("label {}: default proposal must be applicable", self.hole_id)));
        }
        if self.y.iter().zip(&self.t).any(|(y, t)| *y > *t) {
            return Err(Error::invalid(format!("label {}: success on inapplicable proposal", self.hole_id)));
        }
        Ok(())
    }

    pub fn mask(&self) -> Vec<bool> {
        self.t.iter().map(|t| *t == 1).collect()
    }

    pub fn any_success(&self) -> bool {
        self.y.iter().any(|y| *y == 1)
    }
}

/// A classifier with its embedding-provider identity and training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PpcModel {
    pub net: Net,
    pub provider: String,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl PpcModel {
    pub fn variant(&self) -> Variant {
        self.net.variant()
    }

    /// Probabilities for one hole; for RLPG-R masked proposals score 0.
    pub fn predict(&self, hole_vec: &[f64], ctx_vecs: &[Option<Vec<f64>>], mask: &[bool]) -> Result<Vec<f64>> {
        match &self.net {
            Net::H(h) => h.forward_one(hole_vec),
            Net::R(r) => r.forward_one(hole_vec, ctx_vecs, mask),
        }
    }
}

/// Applicable proposals by descending probability, ties by ascending id.
pub fn rank_proposals(probs: &[f64], mask: &[bool]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..probs.len().min(mask.len())).filter(|&p| mask[p]).collect();
    ids.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    ids
}

pub fn predict_topk(probs: &[f64], mask: &[bool], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > NUM_PROPOSALS {
        return Err(Error::invalid(format!("k must be in 1..={NUM_PROPOSALS}, got {k}")));
    }
    let mut ranked = rank_proposals(probs, mask);
    ranked.truncate(k);
    Ok(ranked)
}

/// Splits half of `total` among the top-`l` non-default proposals in
/// proportion to their probabilities.
pub fn composition_budgets(probs: &[f64], mask: &[bool], l: usize, total: usize) -> Result<Vec<(usize, usize)>> {
    if l == 0 {
        return Err(Error::invalid("l must be at least 1"));
    }
    let ranked: Vec<usize> = rank_proposals(probs, mask).into_iter().filter(|&p| p != DEFAULT_PROPOSAL).collect();
    if ranked.len() < l {
        return Err(Error::invalid(format!("l = {l} exceeds {} applicable proposals", ranked.len())));
    }
    let top = &ranked[..l];
    let total_pp = total / 2;
    let sum: f64 = top.iter().map(|&p| probs[p]).sum();
    let mut out: Vec<(usize, usize)> = top
        .iter()
        .map(|&p| {
            let share = if sum > 0.0 { probs[p] / sum } else { 1.0 / l as f64 };
            // the small slack keeps exact ratios like 0.6 / 0.8 from flooring one short
            (p, ((total_pp as f64 * share) + 1e-9).floor() as usize)
        })
        .collect();
    let mut excess = out.iter().map(|(_, b)| b).sum::<usize>().saturating_sub(total_pp);
    for (_, b) in out.iter_mut().rev() {
        let take = excess.min(*b);
        *b -= take;
        excess -= take;
    }
    Ok(out)
}
