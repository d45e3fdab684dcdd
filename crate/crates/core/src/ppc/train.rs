use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nets::{Batch, Net, Variant};
use crate::error::{Error, Result};

/// One training hole: frozen embeddings plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub hole_vec: Vec<f64>,
    /// Per proposal; only read by RLPG-R and only where `t[p] = 1`.
    pub ctx_vecs: Vec<Option<Vec<f64>>>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 3e-4,
            batch_size: 64,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            dropout: 0.25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Net,
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    pub history: Vec<EpochStats>,
}

fn make_batch(variant: Variant, items: &[&Example]) -> Result<Batch> {
    let holes: Vec<&[f64]> = items.iter().map(|e| e.hole_vec.as_slice()).collect();
    let y: Vec<&[f64]> = items.iter().map(|e| e.y.as_slice()).collect();
    let t: Vec<&[f64]> = items.iter().map(|e| e.t.as_slice()).collect();
    match variant {
        Variant::H => Batch::build(&holes, &y, &t, None),
        Variant::R => {
            let ctx: Vec<&[Option<Vec<f64>>]> = items.iter().map(|e| e.ctx_vecs.as_slice()).collect();
            Batch::build(&holes, &y, &t, Some(&ctx))
        }
    }
}

/// Eval-mode mean loss over `data`.
pub fn dataset_loss(net: &Net, data: &[Example]) -> Result<f64> {
    let mut weighted = 0.0;
    for chunk in data.chunks(256) {
        let refs: Vec<&Example> = chunk.iter().collect();
        let batch = make_batch(net.variant(), &refs)?;
        weighted += net.loss(&batch) * chunk.len() as f64;
    }
    Ok(weighted / data.len().max(1) as f64)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    fn new(net: &Net) -> Self {
        let zeros: Vec<Vec<f64>> = net.tensors().iter().map(|(_, _, d)| vec![0.0; d.len()]).collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }

    fn update(&mut self, net: &mut Net, grads: &Net, h: &TrainHyper) {
        self.step += 1;
        let c1 = 1.0 - h.beta1.powi(self.step);
        let c2 = 1.0 - h.beta2.powi(self.step);
        let grads = grads.tensors();
        for (k, params) in net.tensors_mut().into_iter().enumerate() {
            let g = grads[k].2;
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..params.len() {
                m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
                v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                params[i] -= h.lr * mhat / (vhat.sqrt() + h.adam_eps);
            }
        }
    }
}

/// Adam on masked BCE. Validation loss (eval mode) picks the returned
/// epoch; with no validation data the training set stands in.
pub fn train_ppc(variant: Variant, train: &[Example], val: &[Example], hyper: &TrainHyper) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if hyper.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let dropout = if variant == Variant::R { hyper.dropout } else { 0.0 };
    let mut net = Net::init(variant, &mut rng, dropout);
    let val_set = if val.is_empty() { train } else { val };
    if hyper.epochs == 0 {
        let best_val_loss = dataset_loss(&net, val_set)?;
        return Ok(TrainOutcome { net, best_epoch: None, best_val_loss, history: Vec::new() });
    }
    let mut adam = Adam::new(&net);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(usize, f64, Net)> = None;
    let mut history = Vec::new();
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (step, idx) in order.chunks(hyper.batch_size).enumerate() {
            let items: Vec<&Example> = idx.iter().map(|&i| &train[i]).collect();
            let batch = make_batch(variant, &items)?;
            let (loss, grads) = net.loss_and_grad(&batch, Some(&mut rng));
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss {loss} at epoch {epoch} step {step} (batch of {})",
                    items.len()
                )));
            }
            sum += loss * items.len() as f64;
            adam.update(&mut net, &grads, hyper);
        }
        let train_loss = sum / train.len() as f64;
        let val_loss = dataset_loss(&net, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!("non-finite validation loss at epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        history.push(EpochStats { epoch, train_loss, val_loss });
        if best.as_ref().map_or(true, |(_, b, _)| val_loss < *b) {
            best = Some((epoch, val_loss, net.clone()));
        }
    }
    let (epoch, best_val_loss, net) = best.expect("at least one epoch");
    Ok(TrainOutcome { net, best_epoch: Some(epoch), best_val_loss, history })
}
