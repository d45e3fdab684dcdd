//! C ABI over the repoprompt library.
//!
//! Every function returns an [`RpStatus`]. On failure a message is available
//! from [`rp_last_error`] on the same thread until the next call. Strings
//! handed out by the library must be released with [`rp_string_free`];
//! handles with their matching `*_free`. Structured values cross the boundary
//! as JSON.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use repoprompt::composer::{compose_prompt, nominal_budget};
use repoprompt::dataset::{mine_holes, HoleRecord, HoleSpec};
use repoprompt::eval::{all_contexts, embed_hole};
use repoprompt::ppc::{load_checkpoint, predict_topk, EmbeddingProvider, HashedProvider, PpcModel, RemoteProvider};
use repoprompt::proposals::{descriptor, proposal_context, ProposalContext, ProposalOptions};
use repoprompt::repo::{build_repo_index, RepoIndex};
use repoprompt::tokenizer::{load_tokenizer, Tokenizer, TokenizerKind};
use repoprompt::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidArgument = 4,
    Parse = 5,
    Transport = 6,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpTokenizerKind {
    Bpe = 0,
    Fallback = 1,
}

/// A parsed repository.
pub struct RpIndex {
    inner: RepoIndex,
}

pub struct RpTokenizer {
    inner: Arc<dyn Tokenizer>,
}

/// A trained classifier plus the embedding provider it was trained with.
pub struct RpModel {
    model: PpcModel,
    provider: Box<dyn EmbeddingProvider>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(RpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Prerequisite(_) => RpStatus::Io,
            Error::InvalidArgument(_) | Error::Config(_) | Error::Shape(_) => RpStatus::InvalidArgument,
            Error::Serde(_) | Error::Checkpoint(_) => RpStatus::Parse,
            Error::Transport { .. } => RpStatus::Transport,
            Error::Training(_) => RpStatus::Internal,
        };
        Failure(code, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(RpStatus::Parse, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> RpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RpStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            RpStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure(RpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| Failure(RpStatus::NullPointer, format!("{what} is null")))
}

fn check_out<T>(p: *mut T, what: &str) -> FfiResult<()> {
    if p.is_null() {
        Err(Failure(RpStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn to_c(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(RpStatus::Internal, "string contains NUL".into()))
}

fn parse_hole(json: &str) -> FfiResult<HoleSpec> {
    Ok(serde_json::from_str(json)?)
}

/// Message for the last failed call on this thread, or null. Owned by the
/// library; valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn rp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses every `.java` file under `root`.
///
/// # Safety
/// `root` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_index_build(root: *const c_char, out: *mut *mut RpIndex) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let root = str_arg(root, "root")?;
        let inner = build_repo_index(Path::new(root))?;
        *out = Box::into_raw(Box::new(RpIndex { inner }));
        Ok(())
    })
}

/// Loads an index written by [`rp_index_save`] or the `index` command.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_index_load(path: *const c_char, out: *mut *mut RpIndex) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let path = str_arg(path, "path")?;
        let text = std::fs::read_to_string(path).map_err(|e| Failure::from(Error::io(path, e)))?;
        let inner = RepoIndex::from_json(&text)?;
        *out = Box::into_raw(Box::new(RpIndex { inner }));
        Ok(())
    })
}

/// # Safety
/// `index` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rp_index_save(index: *const RpIndex, path: *const c_char) -> RpStatus {
    guard(|| {
        let index = handle(index, "index")?;
        let path = str_arg(path, "path")?;
        let json = index.inner.to_json()?;
        std::fs::write(path, json).map_err(|e| Failure::from(Error::io(path, e)))?;
        Ok(())
    })
}

/// Number of source files in the index.
///
/// # Safety
/// `index` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_index_file_count(index: *const RpIndex, out: *mut usize) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = handle(index, "index")?.inner.sources.len();
        Ok(())
    })
}

/// # Safety
/// `index` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn rp_index_free(index: *mut RpIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// `vocab_dir` may be null to use the bundled GPT-2 vocabulary.
///
/// # Safety
/// `vocab_dir` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_tokenizer_new(
    kind: RpTokenizerKind,
    vocab_dir: *const c_char,
    out: *mut *mut RpTokenizer,
) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let dir = opt_str_arg(vocab_dir, "vocab_dir")?;
        let kind = match kind {
            RpTokenizerKind::Bpe => TokenizerKind::Bpe,
            RpTokenizerKind::Fallback => TokenizerKind::Fallback,
        };
        let inner = load_tokenizer(kind, dir.map(Path::new))?;
        *out = Box::into_raw(Box::new(RpTokenizer { inner }));
        Ok(())
    })
}

/// # Safety
/// `tok` must be a live handle, `text` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_tokenizer_count(tok: *const RpTokenizer, text: *const c_char, out: *mut usize) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let tok = handle(tok, "tokenizer")?;
        *out = tok.inner.count(str_arg(text, "text")?);
        Ok(())
    })
}

/// # Safety
/// `tok` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn rp_tokenizer_free(tok: *mut RpTokenizer) {
    if !tok.is_null() {
        drop(Box::from_raw(tok));
    }
}

/// Mines holes and returns them as JSON lines in `*out`.
///
/// # Safety
/// `index` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_mine_holes(index: *const RpIndex, cap: usize, seed: u64, out: *mut *mut c_char) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let index = &handle(index, "index")?.inner;
        let mut text = String::new();
        for h in mine_holes(index, cap, seed)? {
            text.push_str(&serde_json::to_string(&HoleRecord::from_hole(&h, index, None))?);
            text.push('\n');
        }
        *out = to_c(text)?;
        Ok(())
    })
}

fn context_for(
    index: &RepoIndex,
    tok: &dyn Tokenizer,
    hole: &HoleSpec,
    proposal_id: usize,
    total: usize,
    pl_skip_lines: usize,
) -> FfiResult<ProposalContext> {
    let desc = descriptor(proposal_id)
        .ok_or_else(|| Failure(RpStatus::InvalidArgument, format!("unknown proposal id {proposal_id}")))?;
    if desc.is_default {
        return Ok(ProposalContext::default_proposal());
    }
    let opts = ProposalOptions { pl_skip_lines };
    Ok(proposal_context(&desc, hole, index, tok, nominal_budget(desc.fraction(), total), opts))
}

/// Context of one proposal for `hole_json`, within its share of `total`,
/// as a JSON object.
///
/// # Safety
/// Handles must be live, `hole_json` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_proposal_context(
    index: *const RpIndex,
    tok: *const RpTokenizer,
    hole_json: *const c_char,
    proposal_id: usize,
    total: usize,
    out: *mut *mut c_char,
) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let index = &handle(index, "index")?.inner;
        let tok = handle(tok, "tokenizer")?;
        let hole = parse_hole(str_arg(hole_json, "hole_json")?)?;
        let ctx = context_for(index, tok.inner.as_ref(), &hole, proposal_id, total, 0)?;
        *out = to_c(serde_json::to_string(&ctx)?)?;
        Ok(())
    })
}

/// Full prompt text for one proposal. An inapplicable proposal is an
/// `InvalidArgument` error.
///
/// # Safety
/// Handles must be live, `hole_json` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_compose_prompt(
    index: *const RpIndex,
    tok: *const RpTokenizer,
    hole_json: *const c_char,
    proposal_id: usize,
    total: usize,
    out: *mut *mut c_char,
) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let index = &handle(index, "index")?.inner;
        let tok = handle(tok, "tokenizer")?;
        let hole = parse_hole(str_arg(hole_json, "hole_json")?)?;
        let ctx = context_for(index, tok.inner.as_ref(), &hole, proposal_id, total, 0)?;
        let prompt = compose_prompt(&hole, &ctx, index, tok.inner.as_ref(), total)?;
        *out = to_c(prompt.text)?;
        Ok(())
    })
}

/// Loads a checkpoint. With `embed_url` null the built-in hashed embedding
/// is used, otherwise the embedding service at that URL.
///
/// # Safety
/// `path` must be NUL-terminated, `embed_url` null or NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_model_load(path: *const c_char, embed_url: *const c_char, out: *mut *mut RpModel) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let path = str_arg(path, "path")?;
        let provider: Box<dyn EmbeddingProvider> = match opt_str_arg(embed_url, "embed_url")? {
            None => Box::new(HashedProvider::default()),
            Some(url) => Box::new(RemoteProvider::new(url, "sidecar", 512)?),
        };
        let model = load_checkpoint(Path::new(path))?;
        if model.provider != provider.identity() {
            return Err(Failure(
                RpStatus::InvalidArgument,
                format!("checkpoint was trained with provider {}, not {}", model.provider, provider.identity()),
            ));
        }
        *out = Box::into_raw(Box::new(RpModel { model, provider }));
        Ok(())
    })
}

/// Top-`k` proposals for a hole as `{"ranking": [...], "probabilities": [...]}`.
///
/// # Safety
/// Handles must be live, `hole_json` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_model_predict(
    model: *const RpModel,
    index: *const RpIndex,
    tok: *const RpTokenizer,
    hole_json: *const c_char,
    total: usize,
    k: usize,
    out: *mut *mut c_char,
) -> RpStatus {
    guard(|| {
        check_out(out, "out")?;
        let m = handle(model, "model")?;
        let index = &handle(index, "index")?.inner;
        let tok = handle(tok, "tokenizer")?;
        let hole = parse_hole(str_arg(hole_json, "hole_json")?)?;
        let contexts = all_contexts(&hole, index, tok.inner.as_ref(), total, ProposalOptions::default());
        let mask: Vec<bool> = contexts.iter().map(|c| c.applicable).collect();
        let (hv, cv) = embed_hole(m.provider.as_ref(), &hole, index, &contexts, m.model.variant())?;
        let probs = m.model.predict(&hv, &cv, &mask)?;
        let ranking = predict_topk(&probs, &mask, k)?;
        let json = serde_json::json!({ "ranking": ranking, "probabilities": probs });
        *out = to_c(json.to_string())?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn rp_model_free(model: *mut RpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
