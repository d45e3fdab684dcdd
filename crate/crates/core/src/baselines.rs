//! Selection methods that do not use a trained classifier.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{hole_window, HoleSpec};
use crate::error::{Error, Result};
use crate::ppc::EmbeddingProvider;
use crate::proposals::ProposalContext;
use crate::repo::RepoIndex;
use crate::tokenizer::{truncate, Tokenizer, TruncateFrom};
use crate::DEFAULT_PROPOSAL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

/// Identifier-like runs (letters, digits, underscore).
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Okapi BM25 score of every document for `query`. Repeated query terms count
/// once per occurrence.
pub fn bm25_scores(query: &[String], docs: &[Vec<String>], params: Bm25Params) -> Result<Vec<f64>> {
    if docs.is_empty() {
        return Err(Error::invalid("BM25 needs at least one document"));
    }
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let tfs: Vec<BTreeMap<&str, usize>> = docs
        .iter()
        .map(|d| {
            let mut m = BTreeMap::new();
            for t in d {
                *m.entry(t.as_str()).or_insert(0) += 1;
            }
            m
        })
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tf in &tfs {
        for t in tf.keys() {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let mut scores = vec![0.0; docs.len()];
    for q in query {
        let nt = df.get(q.as_str()).copied().unwrap_or(0) as f64;
        if nt == 0.0 {
            continue;
        }
        let idf = ((n - nt + 0.5) / (nt + 0.5) + 1.0).ln();
        for (i, tf) in tfs.iter().enumerate() {
            let f = tf.get(q.as_str()).copied().unwrap_or(0) as f64;
            if f == 0.0 {
                continue;
            }
            let norm = if avgdl > 0.0 { docs[i].len() as f64 / avgdl } else { 0.0 };
            scores[i] += idf * f * (params.k1 + 1.0) / (f + params.k1 * (1.0 - params.b + params.b * norm));
        }
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub doc_id: usize,
    pub score: f64,
    pub token_count: usize,
}

/// Descending score, then ascending id.
pub fn rank_documents(scores: &[f64], docs: &[Vec<String>]) -> Vec<ScoredDocument> {
    let mut out: Vec<ScoredDocument> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| ScoredDocument { doc_id: i, score: *s, token_count: docs[i].len() })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc_id.cmp(&b.doc_id)));
    out
}

/// The applicable proposal whose context best matches the hole window.
/// Falls back to the default proposal when no context shares a term.
pub fn select_proposal_bm25(window: &str, contexts: &[ProposalContext]) -> usize {
    let cands: Vec<&ProposalContext> = contexts
        .iter()
        .filter(|c| c.applicable && c.proposal_id != DEFAULT_PROPOSAL && !c.text.is_empty())
        .collect();
    if cands.is_empty() {
        return DEFAULT_PROPOSAL;
    }
    let docs: Vec<Vec<String>> = cands.iter().map(|c| word_tokens(&c.text)).collect();
    let scores = bm25_scores(&word_tokens(window), &docs, Bm25Params::default()).expect("non-empty");
    let mut best: Option<(f64, usize)> = None;
    for (c, s) in cands.iter().zip(&scores) {
        let better = match best {
            None => true,
            Some((bs, bid)) => *s > bs || (*s == bs && c.proposal_id < bid),
        };
        if better {
            best = Some((*s, c.proposal_id));
        }
    }
    match best {
        Some((s, id)) if s > 0.0 => id,
        _ => DEFAULT_PROPOSAL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    RandomNn,
    FileBm25,
    IdentRandom,
    IdentNn,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Random, Strategy::RandomNn, Strategy::FileBm25, Strategy::IdentRandom, Strategy::IdentNn];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::RandomNn => "random_nn",
            Strategy::FileBm25 => "file_bm25",
            Strategy::IdentRandom => "ident_random",
            Strategy::IdentNn => "ident_nn",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::invalid(format!("unknown baseline {s:?}")))
    }
}

/// Share of the total prompt length given to baseline contexts.
pub const BASELINE_FRACTION: f64 = 0.5;

/// Number of random candidates ranked by the nearest-neighbour variants.
pub const RANDOM_NEIGHBOURS: usize = 64;

pub struct BaselineEnv<'a> {
    pub index: &'a RepoIndex,
    pub tok: &'a dyn Tokenizer,
    pub provider: &'a dyn EmbeddingProvider,
    pub seed: u64,
}

/// A per-hole generator so results do not depend on evaluation order.
fn hole_rng(seed: u64, hole: &HoleSpec) -> ChaCha8Rng {
    let h = u64::from_str_radix(hole.id.get(..16).unwrap_or("0"), 16).unwrap_or(0);
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lines of a random file from a random line to its end. Lines of the hole
/// window are skipped when the current file is drawn.
fn random_chunk<R: Rng>(rng: &mut R, index: &RepoIndex, hole: &HoleSpec) -> String {
    let paths: Vec<&String> = index.sources.keys().collect();
    if paths.is_empty() {
        return String::new();
    }
    let path = paths[rng.gen_range(0..paths.len())];
    let src = &index.sources[path];
    let n = src.line_count();
    if n == 0 {
        return String::new();
    }
    let start = rng.gen_range(0..n);
    let excluded = |l: usize| *path == hole.file && l + 2 >= hole.line && l <= hole.line + 2;
    (start..n).filter(|&l| !excluded(l)).map(|l| src.line(l)).collect::<Vec<_>>().join("\n")
}

/// Joins ranked pieces with newlines, cut from the back to `budget` tokens.
fn fill(pieces: &[String], tok: &dyn Tokenizer, budget: usize) -> String {
    let mut out = String::new();
    for p in pieces.iter().filter(|p| !p.is_empty()) {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(p);
        if tok.count(&out) > budget {
            break;
        }
    }
    truncate(tok, &out, budget, TruncateFrom::Back)
}

fn order_by_similarity(env: &BaselineEnv, window: &str, pieces: Vec<String>) -> Result<Vec<String>> {
    let q = env.provider.embed(window)?;
    let refs: Vec<&str> = pieces.iter().map(String::as_str).collect();
    let vecs = env.provider.embed_batch(&refs)?;
    let mut scored: Vec<(f64, usize)> = vecs.iter().enumerate().map(|(i, v)| (dot(&q, v), i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().map(|(_, i)| pieces[i].clone()).collect())
}

/// Identifier occurrences of the hole file ordered by closeness to the hole;
/// occurrences overlapping the hidden suffix are skipped.
fn nearest_identifiers(index: &RepoIndex, hole: &HoleSpec) -> Vec<String> {
    let (Some(src), Some(syn)) = (index.source(&hole.file), index.syntax(&hole.file)) else {
        return Vec::new();
    };
    let hole_off = src.offset(hole.position()) as i64;
    let mut cands: Vec<(i64, bool, i64, &str)> = Vec::new();
    for occ in syn.identifiers.iter().chain(&syn.type_identifiers) {
        let start = src.offset(occ.pos) as i64;
        let end = start + occ.name.len() as i64;
        let after = start >= hole_off;
        if end > hole_off && occ.pos.line == hole.line {
            continue;
        }
        let dist = if after { start - hole_off } else { hole_off - end };
        cands.push((dist, after, start, &occ.name));
    }
    cands.sort();
    let mut seen = BTreeSet::new();
    cands.into_iter().filter(|c| seen.insert(c.3)).map(|c| c.3.to_string()).collect()
}

/// Two lines above and below every repo-wide usage of `name`, except
/// windows touching the hole line.
fn usage_windows(index: &RepoIndex, hole: &HoleSpec, name: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (path, syn) in &index.files {
        let src = &index.sources[path];
        let n = src.line_count();
        let mut done = BTreeSet::new();
        for occ in syn.identifiers.iter().chain(&syn.type_identifiers).filter(|o| o.name == name) {
            let lo = occ.pos.line.saturating_sub(2);
            let hi = (occ.pos.line + 2).min(n.saturating_sub(1));
            if *path == hole.file && lo <= hole.line && hole.line <= hi {
                continue;
            }
            if done.insert((lo, hi)) {
                out.push((lo..=hi).map(|l| src.line(l)).collect::<Vec<_>>().join("\n"));
            }
        }
    }
    out
}

/// Context text for one baseline, already within half of `total`.
pub fn baseline_context(strategy: Strategy, hole: &HoleSpec, env: &BaselineEnv, total: usize) -> Result<String> {
    let budget = (total as f64 * BASELINE_FRACTION).floor() as usize;
    let mut rng = hole_rng(env.seed, hole);
    let window = hole_window(hole, env.index);
    match strategy {
        Strategy::Random => {
            let chunk = random_chunk(&mut rng, env.index, hole);
            Ok(truncate(env.tok, &chunk, budget, TruncateFrom::Back))
        }
        Strategy::RandomNn => {
            let pieces: Vec<String> =
                (0..RANDOM_NEIGHBOURS).map(|_| random_chunk(&mut rng, env.index, hole)).collect();
            Ok(fill(&order_by_similarity(env, &window, pieces)?, env.tok, budget))
        }
        Strategy::FileBm25 => {
            let others: Vec<&String> = env.index.sources.keys().filter(|p| **p != hole.file).collect();
            if others.is_empty() {
                return Ok(String::new());
            }
            let docs: Vec<Vec<String>> =
                others.iter().map(|p| word_tokens(&env.index.sources[*p].text)).collect();
            let scores = bm25_scores(&word_tokens(&window), &docs, Bm25Params::default())?;
            let ranked: Vec<String> = rank_documents(&scores, &docs)
                .into_iter()
                .filter(|d| d.score > 0.0)
                .map(|d| env.index.sources[others[d.doc_id]].text.clone())
                .collect();
            Ok(fill(&ranked, env.tok, budget))
        }
        Strategy::IdentRandom | Strategy::IdentNn => {
            for name in nearest_identifiers(env.index, hole) {
                let mut windows = usage_windows(env.index, hole, &name);
                if windows.is_empty() {
                    continue;
                }
                if strategy == Strategy::IdentRandom {
                    windows.shuffle(&mut rng);
                } else {
                    windows = order_by_similarity(env, &window, windows)?;
                }
                return Ok(fill(&windows, env.tok, budget));
            }
            Ok(String::new())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn bm25_examples() {
        let docs = vec![toks("a b"), toks("b c")];
        let s = bm25_scores(&toks("c"), &docs, Bm25Params::default()).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(s[1] > 0.0);
        let s = bm25_scores(&toks("zzz"), &docs, Bm25Params::default()).unwrap();
        assert!(s.iter().all(|x| *x == 0.0));
        assert!(bm25_scores(&toks("a"), &[], Bm25Params::default()).is_err());
    }

    #[test]
    fn word_tokenizer() {
        assert_eq!(word_tokens("int x = foo_bar(3);"), ["int", "x", "foo_bar", "3"]);
    }

    #[test]
    fn strategy_names_roundtrip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
    }
}
