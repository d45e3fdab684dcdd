//! Token counting and token-exact truncation.
//!
//! [`Gpt2Bpe`] is a byte-level byte-pair encoder over the GPT-2 vocabulary
//! (`encoder.json` + `vocab.bpe`); a copy of both files is compiled into the
//! crate. [`FallbackTokenizer`] is a whitespace/punctuation splitter used in
//! tests and when exact counts do not matter.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, OnceLock, RwLock};

use fancy_regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait Tokenizer: Send + Sync {
    fn identity(&self) -> &str;

    /// Byte offset at which every token of `text` starts, in order.
    fn token_starts(&self, text: &str) -> Vec<usize>;

    fn count(&self, text: &str) -> usize {
        self.token_starts(text).len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncateFrom {
    Front,
    Back,
}

/// Drops whole tokens from one end until `text` fits in `budget` tokens.
///
/// Re-tokenizing a cut string can change its count, so the cut is re-counted
/// and tightened until it fits.
pub fn truncate(tok: &dyn Tokenizer, text: &str, budget: usize, from: TruncateFrom) -> String {
    let starts = tok.token_starts(text);
    if starts.len() <= budget {
        return text.to_string();
    }
    let mut keep = budget;
    while keep > 0 {
        let cut = match from {
            TruncateFrom::Front => {
                let mut b = starts[starts.len() - keep];
                while !text.is_char_boundary(b) {
                    b += 1;
                }
                &text[b..]
            }
            TruncateFrom::Back => {
                let mut b = starts[keep];
                while !text.is_char_boundary(b) {
                    b -= 1;
                }
                &text[..b]
            }
        };
        if tok.count(cut) <= budget {
            return cut.to_string();
        }
        keep -= 1;
    }
    String::new()
}

/// Whitespace runs attach to the following piece; a piece is a run of
/// alphanumerics/underscores or a single other character.
#[derive(Debug, Clone, Default)]
pub struct FallbackTokenizer;

impl Tokenizer for FallbackTokenizer {
    fn identity(&self) -> &str {
        "fallback-ws-punct"
    }

    fn token_starts(&self, text: &str) -> Vec<usize> {
        let mut starts = Vec::new();
        let mut pending_ws: Option<usize> = None;
        let mut in_word = false;
        for (i, ch) in text.char_indices() {
            if ch.is_whitespace() {
                if pending_ws.is_none() {
                    pending_ws = Some(i);
                }
                in_word = false;
                continue;
            }
            let word_char = ch.is_alphanumeric() || ch == '_';
            if let Some(ws) = pending_ws.take() {
                starts.push(ws);
                in_word = word_char;
                continue;
            }
            if word_char && in_word {
                continue;
            }
            starts.push(i);
            in_word = word_char;
        }
        if let Some(ws) = pending_ws {
            starts.push(ws);
        }
        starts
    }
}

const GPT2_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

const BUNDLED_ENCODER: &str = include_str!("../assets/encoder.json");
const BUNDLED_MERGES: &str = include_str!("../assets/vocab.bpe");

const CACHE_LIMIT: usize = 200_000;

/// GPT-2 byte-level BPE.
pub struct Gpt2Bpe {
    identity: String,
    encoder: HashMap<String, u32>,
    merge_ranks: HashMap<(String, String), usize>,
    byte_to_char: [char; 256],
    pattern: Regex,
    cache: RwLock<HashMap<String, Vec<u32>>>,
    token_len: HashMap<u32, usize>,
}

/// The reversible byte → printable-char table GPT-2 uses so that merges can be
/// written as text.
fn bytes_to_unicode() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..256u32 {
        let printable = (b'!' as u32..=b'~' as u32).contains(&b)
            || (0xA1..=0xAC).contains(&b)
            || (0xAE..=0xFF).contains(&b);
        table[b as usize] = if printable {
            char::from_u32(b).unwrap()
        } else {
            let c = char::from_u32(256 + extra).unwrap();
            extra += 1;
            c
        };
    }
    table
}

impl Gpt2Bpe {
    pub fn from_strings(identity: &str, encoder_json: &str, merges: &str) -> Result<Self> {
        let encoder: HashMap<String, u32> = serde_json::from_str(encoder_json)
            .map_err(|e| Error::Config(format!("bad BPE encoder file: {e}")))?;
        let mut merge_ranks = HashMap::new();
        for line in merges.lines() {
            if line.starts_with("#version") || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
                return Err(Error::Config(format!("bad merges line: {line:?}")));
            };
            let rank = merge_ranks.len();
            merge_ranks.insert((a.to_string(), b.to_string()), rank);
        }
        let token_len = encoder.iter().map(|(s, id)| (*id, s.chars().count())).collect();
        Ok(Self {
            identity: identity.to_string(),
            encoder,
            merge_ranks,
            byte_to_char: bytes_to_unicode(),
            pattern: Regex::new(GPT2_PATTERN).expect("static pattern"),
            cache: RwLock::new(HashMap::new()),
            token_len,
        })
    }

    /// Loads `encoder.json` and `vocab.bpe` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let enc_path = dir.join("encoder.json");
        let merges_path = dir.join("vocab.bpe");
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("missing vocabulary file {}: {e}", p.display())))
        };
        let enc = read(&enc_path)?;
        let merges = read(&merges_path)?;
        Self::from_strings(&format!("gpt2-bpe:{}", dir.display()), &enc, &merges)
    }

    /// The compiled-in GPT-2 vocabulary, parsed once per process.
    pub fn bundled() -> Arc<Gpt2Bpe> {
        static BUNDLED: OnceLock<Arc<Gpt2Bpe>> = OnceLock::new();
        BUNDLED
            .get_or_init(|| {
                Arc::new(
                    Gpt2Bpe::from_strings("gpt2-bpe", BUNDLED_ENCODER, BUNDLED_MERGES)
                        .expect("bundled vocabulary is valid"),
                )
            })
            .clone()
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for piece in self.pattern.find_iter(text) {
            let piece = piece.expect("regex backtrack limit").as_str();
            ids.extend(self.encode_piece(piece));
        }
        ids
    }

    fn encode_piece(&self, piece: &str) -> Vec<u32> {
        if let Some(hit) = self.cache.read().unwrap().get(piece) {
            return hit.clone();
        }
        let mut word: Vec<String> =
            piece.bytes().map(|b| self.byte_to_char[b as usize].to_string()).collect();
        while word.len() > 1 {
            let best = word
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    self.merge_ranks.get(&(w[0].clone(), w[1].clone())).map(|r| (*r, i))
                })
                .min();
            let Some((rank, _)) = best else { break };
            let mut merged = Vec::with_capacity(word.len());
            let mut i = 0;
            while i < word.len() {
                if i + 1 < word.len()
                    && self.merge_ranks.get(&(word[i].clone(), word[i + 1].clone())) == Some(&rank)
                {
                    merged.push(format!("{}{}", word[i], word[i + 1]));
                    i += 2;
                } else {
                    merged.push(word[i].clone());
                    i += 1;
                }
            }
            word = merged;
        }
        let ids: Vec<u32> = word
            .iter()
            .map(|sym| *self.encoder.get(sym).expect("every byte symbol is in the vocabulary"))
            .collect();
        let mut cache = self.cache.write().unwrap();
        if cache.len() > CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(piece.to_string(), ids.clone());
        ids
    }
}

impl Tokenizer for Gpt2Bpe {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn token_starts(&self, text: &str) -> Vec<usize> {
        let mut starts = Vec::new();
        let mut offset = 0;
        for id in self.encode(text) {
            starts.push(offset);
            offset += self.token_len[&id];
        }
        starts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    #[default]
    Bpe,
    Fallback,
}

/// Builds the configured tokenizer; `vocab_dir` overrides the bundled BPE files.
pub fn load_tokenizer(kind: TokenizerKind, vocab_dir: Option<&Path>) -> Result<Arc<dyn Tokenizer>> {
    Ok(match (kind, vocab_dir) {
        (TokenizerKind::Fallback, _) => Arc::new(FallbackTokenizer),
        (TokenizerKind::Bpe, None) => Gpt2Bpe::bundled(),
        (TokenizerKind::Bpe, Some(dir)) => Arc::new(Gpt2Bpe::from_dir(dir)?),
    })
}
