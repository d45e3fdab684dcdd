use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::embed::EMBED_DIM;
use crate::error::{Error, Result};
use crate::NUM_PROPOSALS;

pub const H_HIDDEN: usize = 512;
pub const HEADS: usize = 4;
pub const HEAD_DIM: usize = 32;
pub const FF_DIM: usize = 2048;
pub const BCE_EPS: f64 = 1e-7;
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    H,
    R,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" | "rlpg-h" => Ok(Variant::H),
            "r" | "rlpg-r" => Ok(Variant::R),
            other => Err(Error::invalid(format!("unknown variant {other:?}"))),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn uniform2<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let d = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_simple_fn((rows, cols), || d.sample(rng))
}

fn uniform1<R: Rng>(rng: &mut R, n: usize, fan_in: usize) -> Array1<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let d = Uniform::new_inclusive(-bound, bound);
    Array1::from_shape_simple_fn(n, || d.sample(rng))
}

/// Per-hole loss: mean BCE over applicable proposals, probabilities clamped
/// to `[BCE_EPS, 1 - BCE_EPS]`.
pub fn masked_bce_loss(probs: &[f64], y: &[f64], t: &[f64]) -> Result<f64> {
    if probs.len() != y.len() || probs.len() != t.len() {
        return Err(Error::Shape("probs, Y and T must have equal length".into()));
    }
    let m: f64 = t.iter().sum();
    if m <= 0.0 {
        return Err(Error::invalid("no applicable proposal"));
    }
    let mut total = 0.0;
    for ((p, y), t) in probs.iter().zip(y).zip(t) {
        if *t == 0.0 {
            continue;
        }
        let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        total -= t * (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
    }
    Ok(total / m)
}

/// Batch loss (mean of per-hole losses) and its gradient with respect to the logits.
fn loss_and_dlogits(probs: &Array2<f64>, y: &Array2<f64>, t: &Array2<f64>) -> (f64, Array2<f64>) {
    let b = probs.nrows() as f64;
    let mut loss = 0.0;
    let mut d = Array2::zeros(probs.raw_dim());
    for i in 0..probs.nrows() {
        let m: f64 = t.row(i).sum();
        for p in 0..probs.ncols() {
            let tp = t[[i, p]];
            if tp == 0.0 {
                continue;
            }
            let yp = y[[i, p]];
            let pr = probs[[i, p]];
            let pc = pr.clamp(BCE_EPS, 1.0 - BCE_EPS);
            loss -= tp * (yp * pc.ln() + (1.0 - yp) * (1.0 - pc).ln()) / m;
            if pc == pr {
                d[[i, p]] = tp * (pr - yp) / m / b;
            }
        }
    }
    (loss / b, d)
}

/// Hole vectors, targets and, for RLPG-R, one row per (hole, applicable proposal) pair.
#[derive(Debug, Clone)]
pub struct Batch {
    pub holes: Array2<f64>,
    pub y: Array2<f64>,
    pub t: Array2<f64>,
    pub ctx: Array2<f64>,
    pub pair_hole: Vec<usize>,
    pub pair_prop: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.holes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.holes.nrows() == 0
    }

    /// `ctx_vecs[i][p]` must be present wherever `t[i][p]` is set when `with_pairs`.
    pub fn build(
        holes: &[&[f64]],
        y: &[&[f64]],
        t: &[&[f64]],
        ctx_vecs: Option<&[&[Option<Vec<f64>>]]>,
    ) -> Result<Batch> {
        let n = holes.len();
        let mut hm = Array2::zeros((n, EMBED_DIM));
        let mut ym = Array2::zeros((n, NUM_PROPOSALS));
        let mut tm = Array2::zeros((n, NUM_PROPOSALS));
        for i in 0..n {
            if holes[i].len() != EMBED_DIM {
                return Err(Error::Shape(format!("hole vector has {} dims, expected {EMBED_DIM}", holes[i].len())));
            }
            if y[i].len() != NUM_PROPOSALS || t[i].len() != NUM_PROPOSALS {
                return Err(Error::Shape(format!("labels must have {NUM_PROPOSALS} entries")));
            }
            hm.row_mut(i).assign(&Array1::from(holes[i].to_vec()));
            ym.row_mut(i).assign(&Array1::from(y[i].to_vec()));
            tm.row_mut(i).assign(&Array1::from(t[i].to_vec()));
        }
        let mut pair_hole = Vec::new();
        let mut pair_prop = Vec::new();
        let mut rows: Vec<&[f64]> = Vec::new();
        if let Some(ctx) = ctx_vecs {
            for i in 0..n {
                for p in 0..NUM_PROPOSALS {
                    if t[i][p] == 0.0 {
                        continue;
                    }
                    let v = ctx[i].get(p).and_then(|v| v.as_deref()).ok_or_else(|| {
                        Error::invalid(format!("missing context vector for applicable proposal {p}"))
                    })?;
                    if v.len() != EMBED_DIM {
                        return Err(Error::Shape(format!("context vector has {} dims", v.len())));
                    }
                    pair_hole.push(i);
                    pair_prop.push(p);
                    rows.push(v);
                }
            }
        }
        let mut cm = Array2::zeros((rows.len(), EMBED_DIM));
        for (r, v) in rows.iter().enumerate() {
            cm.row_mut(r).assign(&ndarray::ArrayView1::from(*v));
        }
        Ok(Batch { holes: hm, y: ym, t: tm, ctx: cm, pair_hole, pair_prop })
    }
}

/// sigmoid(W2 · relu(W1 · x + b1) + b2)
#[derive(Debug, Clone, PartialEq)]
pub struct RlpgH {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl RlpgH {
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        Self {
            w1: uniform2(rng, H_HIDDEN, EMBED_DIM, EMBED_DIM),
            b1: uniform1(rng, H_HIDDEN, EMBED_DIM),
            w2: uniform2(rng, NUM_PROPOSALS, H_HIDDEN, H_HIDDEN),
            b2: uniform1(rng, NUM_PROPOSALS, H_HIDDEN),
        }
    }

    pub fn zeros() -> Self {
        Self {
            w1: Array2::zeros((H_HIDDEN, EMBED_DIM)),
            b1: Array1::zeros(H_HIDDEN),
            w2: Array2::zeros((NUM_PROPOSALS, H_HIDDEN)),
            b2: Array1::zeros(NUM_PROPOSALS),
        }
    }

    fn hidden(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w1.t()) + &self.b1
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let h = self.hidden(x).mapv(|v| v.max(0.0));
        (h.dot(&self.w2.t()) + &self.b2).mapv(sigmoid)
    }

    pub fn forward_one(&self, hole_vec: &[f64]) -> Result<Vec<f64>> {
        if hole_vec.len() != EMBED_DIM {
            return Err(Error::Shape(format!("hole vector has {} dims, expected {EMBED_DIM}", hole_vec.len())));
        }
        let x = Array2::from_shape_vec((1, EMBED_DIM), hole_vec.to_vec()).expect("shape checked");
        Ok(self.forward(&x).row(0).to_vec())
    }

    fn loss_and_grad(&self, batch: &Batch) -> (f64, RlpgH) {
        let x = &batch.holes;
        let z1 = self.hidden(x);
        let h = z1.mapv(|v| v.max(0.0));
        let probs = (h.dot(&self.w2.t()) + &self.b2).mapv(sigmoid);
        let (loss, dl) = loss_and_dlogits(&probs, &batch.y, &batch.t);
        let dw2 = dl.t().dot(&h);
        let db2 = dl.sum_axis(Axis(0));
        let mut dz = dl.dot(&self.w2);
        Zip::from(&mut dz).and(&z1).for_each(|d, z| {
            if *z <= 0.0 {
                *d = 0.0
            }
        });
        let dw1 = dz.t().dot(x);
        let db1 = dz.sum_axis(Axis(0));
        (loss, RlpgH { w1: dw1, b1: db1, w2: dw2, b2: db2 })
    }
}

/// Attention from the hole vector to each proposal's context vector,
/// followed by a transformer-style block and a per-proposal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct RlpgR {
    /// Per-head query/key/value projections, `HEADS × HEAD_DIM × EMBED_DIM`.
    pub wq: Array3<f64>,
    pub wk: Array3<f64>,
    pub wv: Array3<f64>,
    pub wo: Array2<f64>,
    pub ff1_w: Array2<f64>,
    pub ff1_b: Array1<f64>,
    pub ff2_w: Array2<f64>,
    pub ff2_b: Array1<f64>,
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
    /// Row `p` scores proposal `p`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub dropout: f64,
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (i, mut row) in xhat.axis_iter_mut(Axis(0)).enumerate() {
        let mu = row.sum() / d;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mu) * inv);
        inv_std[i] = inv;
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

/// Returns (dx, dgamma, dbeta).
fn layer_norm_back(dy: &Array2<f64>, g: &Array1<f64>, c: &LnCache) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let dg = (dy * &c.xhat).sum_axis(Axis(0));
    let db = dy.sum_axis(Axis(0));
    let dxhat = dy * g;
    let d = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let row = dxhat.row(i);
        let xh = c.xhat.row(i);
        let mean_d = row.sum() / d;
        let mean_dx = row.dot(&xh) / d;
        let inv = c.inv_std[i];
        Zip::from(dx.row_mut(i)).and(&row).and(&xh).for_each(|o, dv, x| {
            *o = inv * (dv - mean_d - x * mean_dx);
        });
    }
    (dx, dg, db)
}

fn dropout_mask<R: Rng>(rng: &mut R, shape: (usize, usize), p: f64) -> Array2<f64> {
    let keep = 1.0 - p;
    Array2::from_shape_simple_fn(shape, || if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
}

struct RCache {
    qh: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    att_w: Array2<f64>,
    heads: Array2<f64>,
    m1: Option<Array2<f64>>,
    ln1: LnCache,
    x1: Array2<f64>,
    z: Array2<f64>,
    h: Array2<f64>,
    m2: Option<Array2<f64>>,
    ln2: LnCache,
    x2: Array2<f64>,
}

impl RlpgR {
    pub fn init<R: Rng>(rng: &mut R, dropout: f64) -> Self {
        let proj = |rng: &mut R| {
            uniform2(rng, HEADS * HEAD_DIM, EMBED_DIM, EMBED_DIM)
                .into_shape_with_order((HEADS, HEAD_DIM, EMBED_DIM))
                .expect("contiguous")
        };
        Self {
            wq: proj(rng),
            wk: proj(rng),
            wv: proj(rng),
            wo: uniform2(rng, EMBED_DIM, HEADS * HEAD_DIM, HEADS * HEAD_DIM),
            ff1_w: uniform2(rng, FF_DIM, EMBED_DIM, EMBED_DIM),
            ff1_b: uniform1(rng, FF_DIM, EMBED_DIM),
            ff2_w: uniform2(rng, EMBED_DIM, FF_DIM, FF_DIM),
            ff2_b: uniform1(rng, EMBED_DIM, FF_DIM),
            ln1_g: Array1::ones(EMBED_DIM),
            ln1_b: Array1::zeros(EMBED_DIM),
            ln2_g: Array1::ones(EMBED_DIM),
            ln2_b: Array1::zeros(EMBED_DIM),
            w: uniform2(rng, NUM_PROPOSALS, EMBED_DIM, EMBED_DIM),
            b: uniform1(rng, NUM_PROPOSALS, EMBED_DIM),
            dropout,
        }
    }

    pub fn zeros(dropout: f64) -> Self {
        Self {
            wq: Array3::zeros((HEADS, HEAD_DIM, EMBED_DIM)),
            wk: Array3::zeros((HEADS, HEAD_DIM, EMBED_DIM)),
            wv: Array3::zeros((HEADS, HEAD_DIM, EMBED_DIM)),
            wo: Array2::zeros((EMBED_DIM, HEADS * HEAD_DIM)),
            ff1_w: Array2::zeros((FF_DIM, EMBED_DIM)),
            ff1_b: Array1::zeros(FF_DIM),
            ff2_w: Array2::zeros((EMBED_DIM, FF_DIM)),
            ff2_b: Array1::zeros(EMBED_DIM),
            ln1_g: Array1::zeros(EMBED_DIM),
            ln1_b: Array1::zeros(EMBED_DIM),
            ln2_g: Array1::zeros(EMBED_DIM),
            ln2_b: Array1::zeros(EMBED_DIM),
            w: Array2::zeros((NUM_PROPOSALS, EMBED_DIM)),
            b: Array1::zeros(NUM_PROPOSALS),
            dropout,
        }
    }

    fn stacked(w: &Array3<f64>) -> ArrayView2<'_, f64> {
        w.view().into_shape_with_order((HEADS * HEAD_DIM, EMBED_DIM)).expect("contiguous")
    }

    /// Logits for every pair of the batch. With `rng`, dropout is applied.
    fn forward_pairs<R: Rng>(&self, batch: &Batch, rng: Option<&mut R>) -> (Array1<f64>, RCache) {
        let n = batch.pair_hole.len();
        let q_in = batch.holes.select(Axis(0), &batch.pair_hole);
        let c = &batch.ctx;
        let qh = q_in.dot(&Self::stacked(&self.wq).t());
        let k = c.dot(&Self::stacked(&self.wk).t());
        let v = c.dot(&Self::stacked(&self.wv).t());
        // One key position per proposal: the softmax runs over a single score.
        let scale = 1.0 / (HEAD_DIM as f64).sqrt();
        let mut att_w = Array2::zeros((n, HEADS));
        let mut heads = Array2::zeros((n, HEADS * HEAD_DIM));
        for r in 0..n {
            for hd in 0..HEADS {
                let (c0, c1) = (hd * HEAD_DIM, (hd + 1) * HEAD_DIM);
                let score = qh.slice(s![r, c0..c1]).dot(&k.slice(s![r, c0..c1])) * scale;
                let w = softmax(&[score])[0];
                att_w[[r, hd]] = w;
                heads.slice_mut(s![r, c0..c1]).assign(&(&v.slice(s![r, c0..c1]) * w));
            }
        }
        let a = heads.dot(&self.wo.t());
        let (m1, m2) = match rng {
            Some(rng) if self.dropout > 0.0 => (
                Some(dropout_mask(rng, (n, EMBED_DIM), self.dropout)),
                Some(dropout_mask(rng, (n, EMBED_DIM), self.dropout)),
            ),
            _ => (None, None),
        };
        let a_d = match &m1 {
            Some(m) => &a * m,
            None => a,
        };
        let r1 = &q_in + &a_d;
        let (x1, ln1) = layer_norm(&r1, &self.ln1_g, &self.ln1_b);
        let z = x1.dot(&self.ff1_w.t()) + &self.ff1_b;
        let h = z.mapv(|x| x.max(0.0));
        let f = h.dot(&self.ff2_w.t()) + &self.ff2_b;
        let f_d = match &m2 {
            Some(m) => &f * m,
            None => f,
        };
        let r2 = &x1 + &f_d;
        let (x2, ln2) = layer_norm(&r2, &self.ln2_g, &self.ln2_b);
        let mut logits = Array1::zeros(n);
        for r in 0..n {
            let p = batch.pair_prop[r];
            logits[r] = x2.row(r).dot(&self.w.row(p)) + self.b[p];
        }
        let cache = RCache { qh, k, v, att_w, heads, m1, ln1, x1, z, h, m2, ln2, x2 };
        (logits, cache)
    }

    fn dense_probs(batch: &Batch, logits: &Array1<f64>) -> Array2<f64> {
        let mut probs = Array2::zeros((batch.len(), NUM_PROPOSALS));
        for (r, l) in logits.iter().enumerate() {
            probs[[batch.pair_hole[r], batch.pair_prop[r]]] = sigmoid(*l);
        }
        probs
    }

    /// Probabilities per hole; masked proposals are exactly 0.
    pub fn forward(&self, batch: &Batch) -> Array2<f64> {
        let (logits, _) = self.forward_pairs::<rand_chacha::ChaCha8Rng>(batch, None);
        Self::dense_probs(batch, &logits)
    }

    pub fn forward_one(&self, hole_vec: &[f64], ctx_vecs: &[Option<Vec<f64>>], mask: &[bool]) -> Result<Vec<f64>> {
        if mask.len() != NUM_PROPOSALS {
            return Err(Error::Shape(format!("mask must have {NUM_PROPOSALS} entries")));
        }
        let t: Vec<f64> = mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect();
        let y = vec![0.0; NUM_PROPOSALS];
        let batch = Batch::build(&[hole_vec], &[&y], &[&t], Some(&[ctx_vecs]))?;
        Ok(self.forward(&batch).row(0).to_vec())
    }

    fn loss_and_grad<R: Rng>(&self, batch: &Batch, rng: Option<&mut R>) -> (f64, RlpgR) {
        let (logits, c) = self.forward_pairs(batch, rng);
        let probs = Self::dense_probs(batch, &logits);
        let (loss, dl) = loss_and_dlogits(&probs, &batch.y, &batch.t);
        let n = logits.len();
        let mut g = RlpgR::zeros(self.dropout);

        let mut dx2 = Array2::zeros((n, EMBED_DIM));
        for r in 0..n {
            let p = batch.pair_prop[r];
            let d = dl[[batch.pair_hole[r], p]];
            g.b[p] += d;
            g.w.row_mut(p).scaled_add(d, &c.x2.row(r));
            dx2.row_mut(r).scaled_add(d, &self.w.row(p));
        }
        let (dr2, dg2, db2) = layer_norm_back(&dx2, &self.ln2_g, &c.ln2);
        g.ln2_g = dg2;
        g.ln2_b = db2;
        let mut dx1 = dr2.clone();
        let df = match &c.m2 {
            Some(m) => &dr2 * m,
            None => dr2,
        };
        g.ff2_w = df.t().dot(&c.h);
        g.ff2_b = df.sum_axis(Axis(0));
        let mut dz = df.dot(&self.ff2_w);
        Zip::from(&mut dz).and(&c.z).for_each(|d, z| {
            if *z <= 0.0 {
                *d = 0.0
            }
        });
        g.ff1_w = dz.t().dot(&c.x1);
        g.ff1_b = dz.sum_axis(Axis(0));
        dx1 += &dz.dot(&self.ff1_w);
        let (dr1, dg1, db1) = layer_norm_back(&dx1, &self.ln1_g, &c.ln1);
        g.ln1_g = dg1;
        g.ln1_b = db1;
        let da = match &c.m1 {
            Some(m) => &dr1 * m,
            None => dr1,
        };
        g.wo = da.t().dot(&c.heads);
        let dheads = da.dot(&self.wo);

        // Back through the per-head attention weights.
        let scale = 1.0 / (HEAD_DIM as f64).sqrt();
        let mut dv = Array2::zeros((n, HEADS * HEAD_DIM));
        let mut dq = Array2::zeros((n, HEADS * HEAD_DIM));
        let mut dk = Array2::zeros((n, HEADS * HEAD_DIM));
        for r in 0..n {
            for hd in 0..HEADS {
                let (c0, c1) = (hd * HEAD_DIM, (hd + 1) * HEAD_DIM);
                let w = c.att_w[[r, hd]];
                let dh = dheads.slice(s![r, c0..c1]);
                dv.slice_mut(s![r, c0..c1]).assign(&(&dh * w));
                let dw = dh.dot(&c.v.slice(s![r, c0..c1]));
                // softmax Jacobian over one element: w * (dw - w * dw)
                let ds = w * (dw - w * dw) * scale;
                dq.slice_mut(s![r, c0..c1]).assign(&(&c.k.slice(s![r, c0..c1]) * ds));
                dk.slice_mut(s![r, c0..c1]).assign(&(&c.qh.slice(s![r, c0..c1]) * ds));
            }
        }
        let q_in = batch.holes.select(Axis(0), &batch.pair_hole);
        let reshape = |m: Array2<f64>| m.into_shape_with_order((HEADS, HEAD_DIM, EMBED_DIM)).expect("contiguous");
        g.wv = reshape(dv.t().dot(&batch.ctx));
        g.wq = reshape(dq.t().dot(&q_in));
        g.wk = reshape(dk.t().dot(&batch.ctx));
        (loss, g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Net {
    H(RlpgH),
    R(RlpgR),
}

/// Gradients share the parameter layout of the network.
pub type Grads = Net;

impl Net {
    pub fn init<R: Rng>(variant: Variant, rng: &mut R, dropout: f64) -> Net {
        match variant {
            Variant::H => Net::H(RlpgH::init(rng)),
            Variant::R => Net::R(RlpgR::init(rng, dropout)),
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            Net::H(_) => Variant::H,
            Net::R(_) => Variant::R,
        }
    }

    pub fn zeros_like(&self) -> Net {
        match self {
            Net::H(_) => Net::H(RlpgH::zeros()),
            Net::R(r) => Net::R(RlpgR::zeros(r.dropout)),
        }
    }

    pub fn dropout(&self) -> f64 {
        match self {
            Net::H(_) => 0.0,
            Net::R(r) => r.dropout,
        }
    }

    /// Named parameter tensors in a fixed order: (name, shape, row-major data).
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        fn t<'a, D: ndarray::Dimension>(
            name: &'static str,
            a: &'a ndarray::Array<f64, D>,
        ) -> (&'static str, Vec<usize>, &'a [f64]) {
            (name, a.shape().to_vec(), a.as_slice().expect("standard layout"))
        }
        match self {
            Net::H(h) => vec![t("w1", &h.w1), t("b1", &h.b1), t("w2", &h.w2), t("b2", &h.b2)],
            Net::R(r) => vec![
                t("wq", &r.wq),
                t("wk", &r.wk),
                t("wv", &r.wv),
                t("wo", &r.wo),
                t("ff1_w", &r.ff1_w),
                t("ff1_b", &r.ff1_b),
                t("ff2_w", &r.ff2_w),
                t("ff2_b", &r.ff2_b),
                t("ln1_g", &r.ln1_g),
                t("ln1_b", &r.ln1_b),
                t("ln2_g", &r.ln2_g),
                t("ln2_b", &r.ln2_b),
                t("w", &r.w),
                t("b", &r.b),
            ],
        }
    }

    /// Mutable views of the same tensors, same order as [`Net::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        fn m<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
            a.as_slice_mut().expect("standard layout")
        }
        match self {
            Net::H(h) => vec![m(&mut h.w1), m(&mut h.b1), m(&mut h.w2), m(&mut h.b2)],
            Net::R(r) => vec![
                m(&mut r.wq),
                m(&mut r.wk),
                m(&mut r.wv),
                m(&mut r.wo),
                m(&mut r.ff1_w),
                m(&mut r.ff1_b),
                m(&mut r.ff2_w),
                m(&mut r.ff2_b),
                m(&mut r.ln1_g),
                m(&mut r.ln1_b),
                m(&mut r.ln2_g),
                m(&mut r.ln2_b),
                m(&mut r.w),
                m(&mut r.b),
            ],
        }
    }

    /// Probabilities for a batch (eval mode).
    pub fn forward(&self, batch: &Batch) -> Array2<f64> {
        match self {
            Net::H(h) => h.forward(&batch.holes),
            Net::R(r) => r.forward(batch),
        }
    }

    /// Eval-mode mean masked BCE over the batch.
    pub fn loss(&self, batch: &Batch) -> f64 {
        let probs = self.forward(batch);
        loss_and_dlogits(&probs, &batch.y, &batch.t).0
    }

    /// Loss and analytic gradient; `rng` enables dropout (training mode).
    pub fn loss_and_grad<R: Rng>(&self, batch: &Batch, rng: Option<&mut R>) -> (f64, Grads) {
        match self {
            Net::H(h) => {
                let (l, g) = h.loss_and_grad(batch);
                (l, Net::H(g))
            }
            Net::R(r) => {
                let (l, g) = r.loss_and_grad(batch, rng);
                (l, Net::R(g))
            }
        }
    }

    /// Sign pattern of every relu input, used to detect kinks in finite differences.
    pub fn relu_pattern(&self, batch: &Batch) -> Vec<bool> {
        match self {
            Net::H(h) => h.hidden(&batch.holes).iter().map(|v| *v > 0.0).collect(),
            Net::R(r) => {
                let (_, c) = r.forward_pairs::<rand_chacha::ChaCha8Rng>(batch, None);
                c.z.iter().map(|v| *v > 0.0).collect()
            }
        }
    }
}
