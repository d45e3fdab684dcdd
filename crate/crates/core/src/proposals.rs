//! The 63 prompt proposals and their context materialization.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::HoleSpec;
use crate::repo::{PromptSource, RepoIndex};
use crate::syntax::{dedup_first, extract_elements, ElementKind, Position, Region};
use crate::tokenizer::{truncate as truncate_tokens, Tokenizer, TruncateFrom};
use crate::{DEFAULT_PROPOSAL, NUM_PROPOSALS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptContextType {
    PL,
    I,
    TI,
    FD,
    SL,
    MN,
    MNB,
}

impl PromptContextType {
    pub const ALL: [PromptContextType; 7] = [
        PromptContextType::PL,
        PromptContextType::I,
        PromptContextType::TI,
        PromptContextType::FD,
        PromptContextType::SL,
        PromptContextType::MN,
        PromptContextType::MNB,
    ];

    pub fn element_kind(self) -> Option<ElementKind> {
        Some(match self {
            PromptContextType::PL => return None,
            PromptContextType::I => ElementKind::Identifiers,
            PromptContextType::TI => ElementKind::TypeIdentifiers,
            PromptContextType::FD => ElementKind::FieldDeclarations,
            PromptContextType::SL => ElementKind::StringLiterals,
            PromptContextType::MN => ElementKind::MethodNames,
            PromptContextType::MNB => ElementKind::MethodNamesAndBodies,
        })
    }
}

impl fmt::Display for PromptContextType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalDescriptor {
    pub id: usize,
    pub source: Option<PromptSource>,
    pub context_type: Option<PromptContextType>,
    /// Share of the total prompt length given to post lines (ids 5–7).
    pub pl_fraction: Option<f64>,
    pub is_default: bool,
}

impl ProposalDescriptor {
    /// Fraction of the total prompt length nominally allotted to this proposal.
    pub fn fraction(&self) -> f64 {
        if self.is_default {
            0.0
        } else {
            self.pl_fraction.unwrap_or(0.5)
        }
    }

    pub fn truncation_direction(&self) -> TruncateFrom {
        match (self.source, self.context_type) {
            (Some(PromptSource::ParentClass), _) => TruncateFrom::Back,
            (Some(PromptSource::Current), Some(t)) if t != PromptContextType::PL => TruncateFrom::Back,
            _ => TruncateFrom::Front,
        }
    }

    pub fn label(&self) -> String {
        match (self.source, self.context_type) {
            (Some(s), Some(PromptContextType::PL)) => {
                format!("{s}/PL@{}", (self.pl_fraction.unwrap_or(0.5) * 100.0).round())
            }
            (Some(s), Some(t)) => format!("{s}/{t}"),
            _ => "default".to_string(),
        }
    }
}

const SIX_TYPES: [PromptContextType; 6] = [
    PromptContextType::MNB,
    PromptContextType::MN,
    PromptContextType::I,
    PromptContextType::TI,
    PromptContextType::SL,
    PromptContextType::FD,
];

/// All proposals in id order.
pub fn enumerate_proposals() -> Vec<ProposalDescriptor> {
    let mut out = Vec::with_capacity(NUM_PROPOSALS);
    let mut push = |source, context_type, pl_fraction| {
        out.push(ProposalDescriptor {
            id: out.len(),
            source: Some(source),
            context_type: Some(context_type),
            pl_fraction,
            is_default: false,
        })
    };
    use PromptContextType as T;
    for t in [T::MN, T::I, T::TI, T::SL, T::FD] {
        push(PromptSource::Current, t, None);
    }
    for f in [0.25, 0.5, 0.75] {
        push(PromptSource::Current, T::PL, Some(f));
    }
    for source in [
        PromptSource::ParentClass,
        PromptSource::Import,
        PromptSource::Sibling,
        PromptSource::SimilarName,
        PromptSource::ChildClass,
        PromptSource::ImportOfSibling,
        PromptSource::ImportOfSimilarName,
        PromptSource::ImportOfParentClass,
        PromptSource::ImportOfChildClass,
    ] {
        for t in SIX_TYPES {
            push(source, t, None);
        }
    }
    out.push(ProposalDescriptor {
        id: DEFAULT_PROPOSAL,
        source: None,
        context_type: None,
        pl_fraction: None,
        is_default: true,
    });
    out
}

pub fn descriptor(id: usize) -> Option<ProposalDescriptor> {
    enumerate_proposals().get(id).copied()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalContext {
    pub proposal_id: usize,
    pub text: String,
    pub token_count: usize,
    pub applicable: bool,
    pub files_used: Vec<String>,
    pub truncated: bool,
}

impl ProposalContext {
    pub fn inapplicable(proposal_id: usize) -> Self {
        Self {
            proposal_id,
            text: String::new(),
            token_count: 0,
            applicable: false,
            files_used: Vec::new(),
            truncated: false,
        }
    }

    /// The default proposal has no context of its own and is always applicable.
    pub fn default_proposal() -> Self {
        Self { applicable: true, ..Self::inapplicable(DEFAULT_PROPOSAL) }
    }
}

/// Cache record for proposal contexts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalContextRecord {
    pub hole_id: String,
    pub proposal_id: usize,
    pub applicable: bool,
    pub token_count: usize,
    pub text: String,
}

impl ProposalContextRecord {
    pub fn new(hole_id: &str, ctx: &ProposalContext) -> Self {
        Self {
            hole_id: hole_id.to_string(),
            proposal_id: ctx.proposal_id,
            applicable: ctx.applicable,
            token_count: ctx.token_count,
            text: ctx.text.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalOptions {
    /// Lines skipped after the hole line before post lines start.
    pub pl_skip_lines: usize,
}

pub fn truncate(tok: &dyn Tokenizer, text: &str, budget: usize, from: TruncateFrom) -> String {
    truncate_tokens(tok, text, budget, from)
}

/// Context taken from one file for one non-PL context type, formatted with
/// the `[ClassName] ` prefix, or `None` when the file has no such elements.
fn file_contribution(
    index: &RepoIndex,
    path: &str,
    kind: ElementKind,
    hole: &HoleSpec,
    is_current: bool,
) -> Option<String> {
    let src = index.source(path)?;
    let syn = index.syntax(path)?;
    let items: Vec<String> = if is_current {
        // Code after the hole line first; code before the hole only as fallback.
        // Nothing overlapping the hidden suffix of the hole line is ever taken.
        let after = extract_elements(src, syn, kind, Region::After(Position::new(hole.line + 1, 0)));
        let chosen = if after.is_empty() {
            let hole_pos = hole.position();
            extract_elements(src, syn, kind, Region::Before(hole_pos))
                .into_iter()
                .filter(|e| e.span.end() <= hole_pos)
                .collect()
        } else {
            after
        };
        dedup_first(chosen.into_iter().map(|e| e.text))
    } else {
        dedup_first(extract_elements(src, syn, kind, Region::WholeFile).into_iter().map(|e| e.text))
    };
    if items.is_empty() {
        return None;
    }
    let class = syn.primary_class().unwrap_or_else(|| src.stem());
    Some(format!("[{class}] {}", items.join(" ")))
}

fn post_lines(index: &RepoIndex, hole: &HoleSpec, skip: usize) -> Option<String> {
    let src = index.source(&hole.file)?;
    let start = hole.line + 1 + skip;
    if start >= src.line_count() {
        return None;
    }
    let text = (start..src.line_count()).map(|l| src.line(l)).collect::<Vec<_>>().join("\n");
    if text.is_empty() {
        None
    } else {
        Some(text)
    }
}

/// Materializes proposal `desc` for `hole` within `budget` tokens.
pub fn proposal_context(
    desc: &ProposalDescriptor,
    hole: &HoleSpec,
    index: &RepoIndex,
    tok: &dyn Tokenizer,
    budget: usize,
    opts: ProposalOptions,
) -> ProposalContext {
    let (Some(source), Some(ctype)) = (desc.source, desc.context_type) else {
        return ProposalContext::default_proposal();
    };
    let dir = desc.truncation_direction();
    let mut contributions: Vec<(String, String)> = Vec::new();
    match ctype.element_kind() {
        None => {
            if source == PromptSource::Current {
                if let Some(pl) = post_lines(index, hole, opts.pl_skip_lines) {
                    contributions.push((hole.file.clone(), pl));
                }
            }
        }
        Some(kind) => {
            for path in index.rank_source_files(source, hole) {
                let is_current = source == PromptSource::Current;
                if let Some(c) = file_contribution(index, &path, kind, hole, is_current) {
                    contributions.push((path, c));
                }
            }
        }
    }
    if contributions.is_empty() || budget == 0 {
        return ProposalContext::inapplicable(desc.id);
    }

    let mut text = String::new();
    let mut files_used = Vec::new();
    let mut truncated = false;
    for (path, contrib) in contributions {
        let joined = if text.is_empty() { contrib.clone() } else { format!("{text} {contrib}") };
        if tok.count(&joined) <= budget {
            text = joined;
            files_used.push(path);
            continue;
        }
        // The first file that overflows is cut to whatever budget is left.
        truncated = true;
        let prefix = if text.is_empty() { String::new() } else { format!("{text} ") };
        let remaining = budget.saturating_sub(tok.count(&prefix));
        let piece = truncate_tokens(tok, &contrib, remaining, dir);
        if !piece.is_empty() {
            text = format!("{prefix}{piece}");
            files_used.push(path);
        }
        break;
    }
    if tok.count(&text) > budget {
        text = truncate_tokens(tok, &text, budget, dir);
    }
    if text.is_empty() {
        return ProposalContext { truncated, ..ProposalContext::inapplicable(desc.id) };
    }
    ProposalContext {
        proposal_id: desc.id,
        token_count: tok.count(&text),
        text,
        applicable: true,
        files_used,
        truncated,
    }
}
