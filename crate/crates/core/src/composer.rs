//! Combines a proposal context with the default context under one token budget.

use serde::{Deserialize, Serialize};

use crate::dataset::HoleSpec;
use crate::error::{Error, Result};
use crate::proposals::{descriptor, ProposalContext, ProposalDescriptor};
use crate::repo::RepoIndex;
use crate::tokenizer::{truncate, Tokenizer, TruncateFrom};
use crate::DEFAULT_PROPOSAL;

pub const SEPARATOR: &str = "\n";

/// Completion length used with every prompt.
pub const COMPLETION_MAX_TOKENS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub proposal_id: usize,
    pub proposal_tokens: usize,
    pub default_tokens: usize,
    pub total_budget: usize,
    /// Byte offset in `text` where the default context starts.
    pub default_start: usize,
}

impl Prompt {
    pub fn proposal_text(&self) -> &str {
        let end = self.default_start.saturating_sub(SEPARATOR.len()).min(self.text.len());
        if self.proposal_tokens == 0 {
            ""
        } else {
            &self.text[..end]
        }
    }

    pub fn default_text(&self) -> &str {
        &self.text[self.default_start..]
    }
}

/// `(proposal_budget, default_budget)` for a proposal that actually needs
/// `actual_proposal_tokens`.
pub fn allocate_budgets(
    desc: &ProposalDescriptor,
    total: usize,
    actual_proposal_tokens: usize,
) -> Result<(usize, usize)> {
    if total == 0 {
        return Err(Error::invalid("total budget must be positive"));
    }
    if desc.is_default {
        return Ok((0, total));
    }
    let nominal = nominal_budget(desc.fraction(), total);
    let used = nominal.min(actual_proposal_tokens);
    Ok((used, total - used))
}

pub fn nominal_budget(fraction: f64, total: usize) -> usize {
    (total as f64 * fraction).floor() as usize
}

/// All text of the hole file strictly before the hole.
pub fn pre_hole_text<'a>(hole: &HoleSpec, index: &'a RepoIndex) -> &'a str {
    match index.source(&hole.file) {
        Some(src) => &src.text[..src.offset(hole.position())],
        None => "",
    }
}

/// Builds `proposal + SEPARATOR + default`, where `proposal` is already
/// within its budget. The default side gets what is left and shrinks token by
/// token until the whole text fits.
fn assemble(
    proposal: String,
    proposal_id: usize,
    pre: &str,
    tok: &dyn Tokenizer,
    total: usize,
    proposal_dir: TruncateFrom,
) -> Prompt {
    if proposal.is_empty() {
        let default = truncate(tok, pre, total, TruncateFrom::Front);
        return Prompt {
            proposal_id,
            proposal_tokens: 0,
            default_tokens: tok.count(&default),
            total_budget: total,
            default_start: 0,
            text: default,
        };
    }
    let mut proposal = proposal;
    let mut p_tokens = tok.count(&proposal);
    let sep_tokens = tok.count(SEPARATOR);
    let mut d_budget = total.saturating_sub(p_tokens + sep_tokens);
    loop {
        let default = truncate(tok, pre, d_budget, TruncateFrom::Front);
        let text = format!("{proposal}{SEPARATOR}{default}");
        if tok.count(&text) <= total {
            return Prompt {
                proposal_id,
                proposal_tokens: p_tokens,
                default_tokens: tok.count(&default),
                total_budget: total,
                default_start: proposal.len() + SEPARATOR.len(),
                text,
            };
        }
        if d_budget > 0 {
            d_budget -= 1;
        } else {
            // tokens merged across the seam; give ground on the proposal side
            proposal = truncate(tok, &proposal, p_tokens.saturating_sub(1), proposal_dir);
            p_tokens = tok.count(&proposal);
            if proposal.is_empty() {
                return assemble(proposal, proposal_id, pre, tok, total, proposal_dir);
            }
        }
    }
}

/// Prompt for one proposal context. Inapplicable non-default contexts are an error.
pub fn compose_prompt(
    hole: &HoleSpec,
    ctx: &ProposalContext,
    index: &RepoIndex,
    tok: &dyn Tokenizer,
    total: usize,
) -> Result<Prompt> {
    if total == 0 {
        return Err(Error::invalid("total budget must be positive"));
    }
    let pre = pre_hole_text(hole, index);
    let desc = descriptor(ctx.proposal_id)
        .ok_or_else(|| Error::invalid(format!("unknown proposal id {}", ctx.proposal_id)))?;
    if desc.is_default {
        return Ok(assemble(String::new(), DEFAULT_PROPOSAL, pre, tok, total, TruncateFrom::Front));
    }
    if !ctx.applicable || ctx.text.is_empty() {
        return Err(Error::invalid(format!("proposal {} is not applicable", ctx.proposal_id)));
    }
    let dir = desc.truncation_direction();
    let (p_budget, _) = allocate_budgets(&desc, total, tok.count(&ctx.text))?;
    let proposal = truncate(tok, &ctx.text, p_budget, dir);
    if proposal.is_empty() {
        return Err(Error::invalid(format!("proposal {} is empty after truncation", ctx.proposal_id)));
    }
    Ok(assemble(proposal, ctx.proposal_id, pre, tok, total, dir))
}

/// Prompt for an arbitrary context string given `fraction` of the total
/// budget; used by the baselines. Empty context yields the default prompt.
pub fn compose_with_context(
    hole: &HoleSpec,
    context: &str,
    dir: TruncateFrom,
    fraction: f64,
    index: &RepoIndex,
    tok: &dyn Tokenizer,
    total: usize,
) -> Result<Prompt> {
    if total == 0 {
        return Err(Error::invalid("total budget must be positive"));
    }
    let pre = pre_hole_text(hole, index);
    let proposal = truncate(tok, context, nominal_budget(fraction, total), dir);
    Ok(assemble(proposal, DEFAULT_PROPOSAL, pre, tok, total, dir))
}

/// Prompt made of several proposal contexts, each cut to its own budget and
/// joined in the given order with single spaces.
pub fn compose_multi(
    hole: &HoleSpec,
    parts: &[(&ProposalContext, usize)],
    index: &RepoIndex,
    tok: &dyn Tokenizer,
    total: usize,
) -> Result<Prompt> {
    if total == 0 {
        return Err(Error::invalid("total budget must be positive"));
    }
    let mut pieces = Vec::new();
    let mut first_id = DEFAULT_PROPOSAL;
    for (ctx, budget) in parts {
        let desc = descriptor(ctx.proposal_id)
            .ok_or_else(|| Error::invalid(format!("unknown proposal id {}", ctx.proposal_id)))?;
        if desc.is_default || !ctx.applicable {
            continue;
        }
        let piece = truncate(tok, &ctx.text, *budget, desc.truncation_direction());
        if !piece.is_empty() {
            if pieces.is_empty() {
                first_id = ctx.proposal_id;
            }
            pieces.push(piece);
        }
    }
    let joined = pieces.join(" ");
    let budget_sum: usize = parts.iter().map(|(_, b)| *b).sum();
    let proposal = truncate(tok, &joined, budget_sum.min(total), TruncateFrom::Back);
    let pre = pre_hole_text(hole, index);
    Ok(assemble(proposal, first_id, pre, tok, total, TruncateFrom::Back))
}
