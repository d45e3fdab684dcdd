//! Labeling, metrics, method evaluation and reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_context, select_proposal_bm25, BaselineEnv, Strategy, BASELINE_FRACTION};
use crate::composer::{compose_multi, compose_prompt, compose_with_context, nominal_budget, pre_hole_text, Prompt};
use crate::dataset::{hole_window, HoleSpec};
use crate::error::{Error, Result};
use crate::gateway::{CompletionBackend, CompletionRequest};
use crate::ppc::{composition_budgets, rank_proposals, EmbeddingProvider, LabelRecord, PpcModel, Variant};
use crate::proposals::{enumerate_proposals, proposal_context, ProposalContext, ProposalOptions};
use crate::repo::RepoIndex;
use crate::tokenizer::{truncate, FallbackTokenizer, Tokenizer, TruncateFrom};
use crate::{DEFAULT_PROPOSAL, NUM_PROPOSALS};

/// Best single proposal reported for the fixed-proposal method (post lines at 75%).
pub const DEFAULT_FIXED_PROPOSAL: usize = 7;

/// Byte equality after dropping one trailing newline from the prediction.
pub fn exact_match(prediction: &str, target: &str) -> bool {
    prediction.strip_suffix('\n').unwrap_or(prediction) == target
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn norm_edit_distance(prediction: &str, target: &str) -> Result<f64> {
    let n = target.chars().count();
    if n == 0 {
        return Err(Error::invalid("target must be non-empty"));
    }
    Ok(levenshtein(prediction, target) as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    CodexDefault,
    Oracle,
    Fixed(usize),
    RlpgH,
    RlpgR,
    RlpgBm25,
    Baseline(Strategy),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::CodexDefault => "codex-default".into(),
            Method::Oracle => "oracle".into(),
            Method::Fixed(id) if *id == DEFAULT_FIXED_PROPOSAL => "fixed".into(),
            Method::Fixed(id) => format!("fixed:{id}"),
            Method::RlpgH => "rlpg-h".into(),
            Method::RlpgR => "rlpg-r".into(),
            Method::RlpgBm25 => "rlpg-bm25".into(),
            Method::Baseline(s) => s.name().into(),
        }
    }

    pub fn needs_model(&self) -> Option<Variant> {
        match self {
            Method::RlpgH => Some(Variant::H),
            Method::RlpgR => Some(Variant::R),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "codex-default" | "default" => Method::CodexDefault,
            "oracle" => Method::Oracle,
            "fixed" => Method::Fixed(DEFAULT_FIXED_PROPOSAL),
            "rlpg-h" => Method::RlpgH,
            "rlpg-r" => Method::RlpgR,
            "rlpg-bm25" => Method::RlpgBm25,
            other => {
                if let Some(id) = other.strip_prefix("fixed:") {
                    let id: usize = id.parse().map_err(|_| Error::invalid(format!("bad proposal id in {other:?}")))?;
                    if id >= NUM_PROPOSALS {
                        return Err(Error::invalid(format!("proposal id {id} out of range")));
                    }
                    Method::Fixed(id)
                } else {
                    Method::Baseline(other.parse()?)
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub hole_id: String,
    pub repo_id: String,
    pub method: String,
    pub proposal_id: Option<usize>,
    pub prediction: String,
    pub exact_match: bool,
    pub norm_edit_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoStat {
    pub repo_id: String,
    pub holes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_norm_edit_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub holes: usize,
    pub successes: usize,
    pub hole_wise_success_rate: f64,
    pub repo_wise_success_rate: f64,
    pub mean_norm_edit_distance: f64,
    pub per_repo: Vec<RepoStat>,
}

impl MethodReport {
    pub fn from_records(method: &str, records: &[EvalRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("cannot report on an empty hole set"));
        }
        let mut by_repo: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
        for r in records {
            by_repo.entry(&r.repo_id).or_default().push(r);
        }
        let per_repo: Vec<RepoStat> = by_repo
            .into_iter()
            .map(|(repo, rs)| {
                let successes = rs.iter().filter(|r| r.exact_match).count();
                RepoStat {
                    repo_id: repo.to_string(),
                    holes: rs.len(),
                    successes,
                    success_rate: successes as f64 / rs.len() as f64,
                    mean_norm_edit_distance: rs.iter().map(|r| r.norm_edit_distance).sum::<f64>() / rs.len() as f64,
                }
            })
            .collect();
        let successes = records.iter().filter(|r| r.exact_match).count();
        Ok(Self {
            method: method.to_string(),
            holes: records.len(),
            successes,
            hole_wise_success_rate: successes as f64 / records.len() as f64,
            repo_wise_success_rate: per_repo.iter().map(|r| r.success_rate).sum::<f64>() / per_repo.len() as f64,
            mean_norm_edit_distance: records.iter().map(|r| r.norm_edit_distance).sum::<f64>() / records.len() as f64,
            per_repo,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "method: {}\nholes: {}  success: {}  SR (hole-wise): {:.2}%  SR (repo-wise): {:.2}%  edit distance: {:.2}\n\n",
            self.method,
            self.holes,
            self.successes,
            100.0 * self.hole_wise_success_rate,
            100.0 * self.repo_wise_success_rate,
            100.0 * self.mean_norm_edit_distance,
        );
        let width = self.per_repo.iter().map(|r| r.repo_id.len()).max().unwrap_or(4).max(4);
        out.push_str(&format!("{:<width$}  {:>7}  {:>7}  {:>8}  {:>8}\n", "repo", "holes", "success", "SR (%)", "ED (%)"));
        for r in &self.per_repo {
            out.push_str(&format!(
                "{:<width$}  {:>7}  {:>7}  {:>8.2}  {:>8.2}\n",
                r.repo_id,
                r.holes,
                r.successes,
                100.0 * r.success_rate,
                100.0 * r.mean_norm_edit_distance
            ));
        }
        out
    }
}

/// One row per (method, hole set) in a combined table.
pub fn summary_table(reports: &[MethodReport]) -> String {
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<width$}  {:>7}  {:>10}  {:>10}  {:>8}\n", "method", "holes", "SR hole %", "SR repo %", "ED %");
    for r in reports {
        out.push_str(&format!(
            "{:<width$}  {:>7}  {:>10.2}  {:>10.2}  {:>8.2}\n",
            r.method,
            r.holes,
            100.0 * r.hole_wise_success_rate,
            100.0 * r.repo_wise_success_rate,
            100.0 * r.mean_norm_edit_distance
        ));
    }
    out
}

/// Per-proposal success rate over a labeled hole set.
pub fn proposal_success_rates(labels: &[LabelRecord]) -> Vec<f64> {
    let mut rates = vec![0.0; NUM_PROPOSALS];
    if labels.is_empty() {
        return rates;
    }
    for l in labels {
        for (p, y) in l.y.iter().enumerate() {
            rates[p] += *y as f64;
        }
    }
    rates.iter().map(|s| s / labels.len() as f64).collect()
}

/// Success rate when the first `k` ranked proposals may each be tried once.
pub fn attempts_curve(rankings: &[Vec<usize>], labels: &[LabelRecord], k_values: &[usize]) -> Result<Vec<(usize, f64)>> {
    if rankings.len() != labels.len() {
        return Err(Error::invalid("one ranking per labeled hole is required"));
    }
    if labels.is_empty() {
        return Err(Error::invalid("empty hole set"));
    }
    let mut out = Vec::new();
    for &k in k_values {
        if k == 0 || k > NUM_PROPOSALS {
            return Err(Error::invalid(format!("k must be in 1..={NUM_PROPOSALS}, got {k}")));
        }
        let hits = rankings
            .iter()
            .zip(labels)
            .filter(|(r, l)| r.iter().take(k).any(|&p| l.y[p] == 1 && l.t[p] == 1))
            .count();
        out.push((k, hits as f64 / labels.len() as f64));
    }
    Ok(out)
}

/// Ranking used by the fixed method: by success rate on a reference set.
pub fn fixed_ranking(rates: &[f64], mask: &[bool]) -> Vec<usize> {
    rank_proposals(rates, mask)
}

/// Contexts of all 63 proposals, each within its nominal budget.
pub fn all_contexts(
    hole: &HoleSpec,
    index: &RepoIndex,
    tok: &dyn Tokenizer,
    total: usize,
    opts: ProposalOptions,
) -> Vec<ProposalContext> {
    enumerate_proposals()
        .iter()
        .map(|d| {
            if d.is_default {
                ProposalContext::default_proposal()
            } else {
                proposal_context(d, hole, index, tok, nominal_budget(d.fraction(), total), opts)
            }
        })
        .collect()
}

/// Labels plus the contexts they were computed from.
#[derive(Debug, Clone)]
pub struct LabeledHole {
    pub label: LabelRecord,
    pub contexts: Vec<ProposalContext>,
}

/// What a method decided for one hole.
#[derive(Debug, Clone, PartialEq)]
pub enum Choice {
    Proposal(usize),
    Context(String),
}

pub struct Evaluator<'a> {
    pub indices: &'a BTreeMap<String, RepoIndex>,
    pub tok: &'a dyn Tokenizer,
    pub backend: &'a dyn CompletionBackend,
    pub total: usize,
    pub opts: ProposalOptions,
    pub provider: Option<&'a dyn EmbeddingProvider>,
    pub model: Option<&'a PpcModel>,
    pub labels: Option<&'a BTreeMap<String, LabelRecord>>,
    pub seed: u64,
}

impl<'a> Evaluator<'a> {
    pub fn index_of(&self, hole: &HoleSpec) -> Result<&'a RepoIndex> {
        self.indices
            .get(&hole.repo_id)
            .ok_or_else(|| Error::invalid(format!("no index for repository {}", hole.repo_id)))
    }

    pub fn contexts(&self, hole: &HoleSpec) -> Result<Vec<ProposalContext>> {
        Ok(all_contexts(hole, self.index_of(hole)?, self.tok, self.total, self.opts))
    }

    pub fn compose(&self, hole: &HoleSpec, ctx: &ProposalContext) -> Result<Prompt> {
        compose_prompt(hole, ctx, self.index_of(hole)?, self.tok, self.total)
    }

    fn ask(&self, hole: &HoleSpec, prompt: &str) -> Result<String> {
        self.backend.complete(&CompletionRequest::for_hole(prompt, &hole.id))
    }

    /// Queries the backend once per applicable proposal.
    pub fn label(&self, hole: &HoleSpec) -> Result<LabeledHole> {
        let contexts = self.contexts(hole)?;
        let mut y = vec![0u8; NUM_PROPOSALS];
        let mut t = vec![0u8; NUM_PROPOSALS];
        let mut incomplete = false;
        for ctx in &contexts {
            if !ctx.applicable {
                continue;
            }
            t[ctx.proposal_id] = 1;
            let prompt = self.compose(hole, ctx)?;
            match self.ask(hole, &prompt.text) {
                Ok(pred) => y[ctx.proposal_id] = u8::from(exact_match(&pred, &hole.target)),
                Err(e) => {
                    log::warn!("hole {} proposal {}: {e}", hole.id, ctx.proposal_id);
                    incomplete = true;
                }
            }
        }
        Ok(LabeledHole { label: LabelRecord { hole_id: hole.id.clone(), y, t, incomplete }, contexts })
    }

    pub fn label_all(&self, holes: &[HoleSpec]) -> Result<Vec<LabeledHole>> {
        holes.par_iter().map(|h| self.label(h)).collect()
    }

    fn provider(&self) -> Result<&'a dyn EmbeddingProvider> {
        self.provider.ok_or_else(|| Error::Config("this method needs an embedding provider".into()))
    }

    /// Classifier probabilities for one hole.
    pub fn probabilities(&self, hole: &HoleSpec, contexts: &[ProposalContext]) -> Result<Vec<f64>> {
        let model = self.model.ok_or_else(|| Error::Config("this method needs a trained model".into()))?;
        let index = self.index_of(hole)?;
        let (hole_vec, ctx_vecs) = embed_hole(self.provider()?, hole, index, contexts, model.variant())?;
        let mask: Vec<bool> = contexts.iter().map(|c| c.applicable).collect();
        model.predict(&hole_vec, &ctx_vecs, &mask)
    }

    pub fn choose(&self, method: Method, hole: &HoleSpec, contexts: &[ProposalContext]) -> Result<Choice> {
        let index = self.index_of(hole)?;
        Ok(match method {
            Method::CodexDefault | Method::Oracle => Choice::Proposal(DEFAULT_PROPOSAL),
            Method::Fixed(id) => {
                Choice::Proposal(if contexts[id].applicable { id } else { DEFAULT_PROPOSAL })
            }
            Method::RlpgH | Method::RlpgR => {
                let want = method.needs_model().expect("model method");
                if let Some(m) = self.model {
                    if m.variant() != want {
                        return Err(Error::Config(format!("{method} needs a {want:?} checkpoint")));
                    }
                }
                let probs = self.probabilities(hole, contexts)?;
                let mask: Vec<bool> = contexts.iter().map(|c| c.applicable).collect();
                Choice::Proposal(rank_proposals(&probs, &mask)[0])
            }
            Method::RlpgBm25 => Choice::Proposal(select_proposal_bm25(&hole_window(hole, index), contexts)),
            Method::Baseline(s) => {
                let env = BaselineEnv { index, tok: self.tok, provider: self.provider()?, seed: self.seed };
                Choice::Context(baseline_context(s, hole, &env, self.total)?)
            }
        })
    }

    fn record(&self, method: Method, hole: &HoleSpec, proposal_id: Option<usize>, prediction: String) -> Result<EvalRecord> {
        Ok(EvalRecord {
            hole_id: hole.id.clone(),
            repo_id: hole.repo_id.clone(),
            method: method.name(),
            proposal_id,
            exact_match: exact_match(&prediction, &hole.target),
            norm_edit_distance: norm_edit_distance(&prediction, &hole.target)?,
            prediction,
        })
    }

    pub fn evaluate_hole(&self, method: Method, hole: &HoleSpec) -> Result<EvalRecord> {
        let index = self.index_of(hole)?;
        let contexts = self.contexts(hole)?;
        if method == Method::Oracle {
            let label = match self.labels.and_then(|l| l.get(&hole.id)) {
                Some(l) => l.clone(),
                None => self.label(hole)?.label,
            };
            if let Some(p) = (0..NUM_PROPOSALS).find(|&p| label.y[p] == 1) {
                return self.record(method, hole, Some(p), hole.target.clone());
            }
        }
        match self.choose(method, hole, &contexts)? {
            Choice::Proposal(p) => {
                let prompt = self.compose(hole, &contexts[p])?;
                let pred = self.ask(hole, &prompt.text)?;
                self.record(method, hole, Some(p), pred)
            }
            Choice::Context(text) => {
                let prompt =
                    compose_with_context(hole, &text, TruncateFrom::Back, BASELINE_FRACTION, index, self.tok, self.total)?;
                let pred = self.ask(hole, &prompt.text)?;
                self.record(method, hole, None, pred)
            }
        }
    }

    pub fn evaluate(&self, method: Method, holes: &[HoleSpec]) -> Result<(Vec<EvalRecord>, MethodReport)> {
        if holes.is_empty() {
            return Err(Error::invalid("empty hole set"));
        }
        let records: Vec<EvalRecord> = holes.par_iter().map(|h| self.evaluate_hole(method, h)).collect::<Result<_>>()?;
        let report = MethodReport::from_records(&method.name(), &records)?;
        Ok((records, report))
    }

    /// Prompt built from the top-`l` proposals with probability-proportional budgets.
    pub fn evaluate_composition(&self, l: usize, holes: &[HoleSpec]) -> Result<MethodReport> {
        let method_name = format!("compose-l{l}");
        let records: Vec<EvalRecord> = holes
            .par_iter()
            .map(|hole| {
                let index = self.index_of(hole)?;
                let contexts = self.contexts(hole)?;
                let probs = self.probabilities(hole, &contexts)?;
                let mask: Vec<bool> = contexts.iter().map(|c| c.applicable).collect();
                let available = mask.iter().enumerate().filter(|(p, m)| **m && *p != DEFAULT_PROPOSAL).count();
                let use_l = l.min(available);
                let prompt = if use_l == 0 {
                    compose_prompt(hole, &contexts[DEFAULT_PROPOSAL], index, self.tok, self.total)?
                } else {
                    let budgets = composition_budgets(&probs, &mask, use_l, self.total)?;
                    let parts: Vec<(&ProposalContext, usize)> = budgets.iter().map(|(p, b)| (&contexts[*p], *b)).collect();
                    compose_multi(hole, &parts, index, self.tok, self.total)?
                };
                let pred = self.ask(hole, &prompt.text)?;
                let em = exact_match(&pred, &hole.target);
                Ok(EvalRecord {
                    hole_id: hole.id.clone(),
                    repo_id: hole.repo_id.clone(),
                    method: method_name.clone(),
                    proposal_id: None,
                    exact_match: em,
                    norm_edit_distance: norm_edit_distance(&pred, &hole.target)?,
                    prediction: pred,
                })
            })
            .collect::<Result<_>>()?;
        MethodReport::from_records(&method_name, &records)
    }
}

/// Text embedded for the default proposal: the tail of the pre-hole code.
pub fn default_context_text(provider: &dyn EmbeddingProvider, hole: &HoleSpec, index: &RepoIndex) -> String {
    truncate(&FallbackTokenizer, pre_hole_text(hole, index), provider.max_tokens(), TruncateFrom::Front)
}

/// Hole-window vector and, for RLPG-R, one vector per applicable proposal.
pub fn embed_hole(
    provider: &dyn EmbeddingProvider,
    hole: &HoleSpec,
    index: &RepoIndex,
    contexts: &[ProposalContext],
    variant: Variant,
) -> Result<(Vec<f64>, Vec<Option<Vec<f64>>>)> {
    let window = hole_window(hole, index);
    if variant == Variant::H {
        return Ok((provider.embed(&window)?, vec![None; NUM_PROPOSALS]));
    }
    let default_text = default_context_text(provider, hole, index);
    let mut texts: Vec<&str> = vec![&window];
    let mut slots = Vec::new();
    for c in contexts.iter().filter(|c| c.applicable) {
        texts.push(if c.proposal_id == DEFAULT_PROPOSAL { &default_text } else { &c.text });
        slots.push(c.proposal_id);
    }
    let mut vecs = provider.embed_batch(&texts)?.into_iter();
    let hole_vec = vecs.next().expect("window vector");
    let mut ctx = vec![None; NUM_PROPOSALS];
    for (p, v) in slots.into_iter().zip(vecs) {
        ctx[p] = Some(v);
    }
    Ok((hole_vec, ctx))
}
