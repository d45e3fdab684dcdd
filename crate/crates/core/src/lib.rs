//! Repository-level prompt generation for black-box code completion models.
//!
//! The pipeline is: parse every Java file of a repository ([`syntax`]), collate
//! the per-file indices into repository metadata ([`repo`]), mine single-line
//! completion holes ([`dataset`]), materialize the 63 prompt proposals for a
//! hole ([`proposals`]), compose a token-budgeted prompt ([`composer`]), and
//! score completions returned by a backend ([`gateway`], [`eval`]). The
//! [`ppc`] module holds the two proposal classifiers and [`baselines`] the
//! non-learned selection methods.

pub mod baselines;
pub mod cli;
pub mod composer;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod ppc;
pub mod proposals;
pub mod repo;
pub mod syntax;
pub mod tokenizer;

pub use error::{Error, Result};

/// Number of prompt proposals, including the default-context proposal.
pub const NUM_PROPOSALS: usize = 63;

/// Id of the proposal that uses only the code preceding the hole.
pub const DEFAULT_PROPOSAL: usize = 62;

/// Default total prompt length in tokens.
pub const DEFAULT_TOTAL_BUDGET: usize = 4072;
