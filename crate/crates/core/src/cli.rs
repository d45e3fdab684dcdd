//! Command-line front end.
//!
//! Every stage reads the previous stage's files from the output directory:
//!
//! ```text
//! out/index/<repo>.json   index
//! out/holes.jsonl         mine
//! out/labels.jsonl        label   (+ out/contexts.jsonl)
//! out/checkpoints/*.ckpt  train
//! out/predictions_*.jsonl predict
//! out/report_*.{json,txt} evaluate
//! out/attempts_*.json     attempts
//! out/compose_eval.*      compose-eval
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataset::{mine_holes, read_jsonl, write_jsonl, HoleRecord, HoleSpec, Split, SplitAssignment, DEFAULT_HOLE_CAP};
use crate::error::{Error, Result};
use crate::eval::{
    attempts_curve, embed_hole, fixed_ranking, proposal_success_rates, summary_table, Evaluator, Method,
};
use crate::gateway::{BackendConfig, BackendKind, CompletionBackend, MockBackend, RemoteBackend};
use crate::ppc::{
    load_checkpoint, rank_proposals, save_checkpoint, train_ppc, EmbeddingProvider, Example, HashedProvider,
    LabelRecord, PpcModel, ProviderKind, RemoteProvider, TrainHyper, Variant,
};
use crate::proposals::{ProposalContext, ProposalContextRecord, ProposalOptions};
use crate::repo::{load_or_build, repo_id_of, RepoIndex};
use crate::tokenizer::{load_tokenizer, Tokenizer, TokenizerKind};
use crate::{DEFAULT_TOTAL_BUDGET, NUM_PROPOSALS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub repo_roots: Vec<PathBuf>,
    pub splits: Option<PathBuf>,
    pub budget: usize,
    pub backend: BackendConfig,
    pub tokenizer: TokenizerKind,
    pub vocab_dir: Option<PathBuf>,
    pub provider: ProviderKind,
    pub embed_url: String,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub hole_cap: usize,
    pub pl_skip_lines: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            repo_roots: Vec::new(),
            splits: None,
            budget: DEFAULT_TOTAL_BUDGET,
            backend: BackendConfig::default(),
            tokenizer: TokenizerKind::Bpe,
            vocab_dir: None,
            provider: ProviderKind::Hashed,
            embed_url: "http://127.0.0.1:8765".to_string(),
            seed: 0,
            out: PathBuf::from("out"),
            workers: None,
            hole_cap: DEFAULT_HOLE_CAP,
            pl_skip_lines: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TokenizerArg {
    Bpe,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderArg {
    Hashed,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    H,
    R,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::H => Variant::H,
            VariantArg::R => Variant::R,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML or JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long = "repo-root", global = true)]
    repo_root: Vec<PathBuf>,
    #[arg(long, global = true)]
    splits: Option<PathBuf>,
    /// Total prompt length in tokens.
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[arg(long, value_enum, global = true)]
    backend: Option<BackendArg>,
    /// Completion model identifier.
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, value_enum, global = true)]
    tokenizer: Option<TokenizerArg>,
    #[arg(long = "vocab-dir", global = true)]
    vocab_dir: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    provider: Option<ProviderArg>,
    #[arg(long = "embed-url", global = true)]
    embed_url: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long = "pl-skip-lines", global = true)]
    pl_skip_lines: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "repoprompt", version, about = "Repository-level prompt generation for code completion")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or refresh the per-repository index cache.
    Index,
    /// Mine completion holes from the indexed repositories.
    Mine {
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Compute ground-truth labels with the configured backend.
    Label {
        #[arg(long, value_enum, default_value = "all")]
        split: SplitArg,
    },
    /// Train a proposal classifier.
    Train {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 3e-4)]
        lr: f64,
        #[arg(long = "batch-size", default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.25)]
        dropout: f64,
    },
    /// Rank proposals for every hole with a trained classifier.
    Predict {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a selection method.
    Evaluate {
        /// codex-default, oracle, fixed[:id], rlpg-h, rlpg-r, rlpg-bm25, random,
        /// random_nn, file_bm25, ident_random or ident_nn
        #[arg(long)]
        method: String,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Success rate when the top-k proposals may each be tried.
    Attempts {
        /// fixed, rlpg-h or rlpg-r
        #[arg(long, default_value = "fixed")]
        ranking: String,
        #[arg(long = "k-max", default_value_t = 63)]
        k_max: usize,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate prompts composed from the top-l proposals.
    ComposeEval {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long = "l-max", default_value_t = 3)]
        l_max: usize,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !g.repo_root.is_empty() {
        cfg.repo_roots = g.repo_root.clone();
    }
    if let Some(s) = &g.splits {
        cfg.splits = Some(s.clone());
    }
    if let Some(b) = g.budget {
        cfg.budget = b;
    }
    if let Some(b) = g.backend {
        cfg.backend.kind = match b {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Remote => BackendKind::Remote,
        };
    }
    if let Some(m) = &g.model {
        cfg.backend.model = m.clone();
    }
    if let Some(e) = &g.endpoint {
        cfg.backend.endpoint = e.clone();
    }
    if let Some(t) = g.tokenizer {
        cfg.tokenizer = match t {
            TokenizerArg::Bpe => TokenizerKind::Bpe,
            TokenizerArg::Fallback => TokenizerKind::Fallback,
        };
    }
    if let Some(v) = &g.vocab_dir {
        cfg.vocab_dir = Some(v.clone());
    }
    if let Some(p) = g.provider {
        cfg.provider = match p {
            ProviderArg::Hashed => ProviderKind::Hashed,
            ProviderArg::Remote => ProviderKind::Remote,
        };
    }
    if let Some(u) = &g.embed_url {
        cfg.embed_url = u.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(w) = g.workers {
        cfg.workers = Some(w);
    }
    if let Some(s) = g.pl_skip_lines {
        cfg.pl_skip_lines = s;
    }
    if cfg.budget == 0 {
        return Err(Error::Config("budget must be positive".into()));
    }
    cfg.backend.max_prompt_tokens = cfg.backend.max_prompt_tokens.max(cfg.budget);
    if cfg.backend.cache_dir.is_none() {
        cfg.backend.cache_dir = Some(cfg.out.join("cache"));
    }
    Ok(cfg)
}

struct Ctx {
    cfg: RunConfig,
}

fn prerequisite(path: &Path, command: &str) -> Error {
    Error::Prerequisite(format!("{} not found; run `repoprompt {command}` first", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn index_dir(&self) -> PathBuf {
        self.out("index")
    }

    fn tokenizer(&self) -> Result<Arc<dyn Tokenizer>> {
        load_tokenizer(self.cfg.tokenizer, self.cfg.vocab_dir.as_deref())
    }

    fn provider(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self.cfg.provider {
            ProviderKind::Hashed => Box::new(HashedProvider::default()),
            ProviderKind::Remote => {
                let p = RemoteProvider::new(&self.cfg.embed_url, "sidecar", 512)?;
                p.healthz()?;
                Box::new(p)
            }
        })
    }

    fn options(&self) -> ProposalOptions {
        ProposalOptions { pl_skip_lines: self.cfg.pl_skip_lines }
    }

    fn splits(&self) -> Result<Option<SplitAssignment>> {
        self.cfg.splits.as_deref().map(SplitAssignment::load).transpose()
    }

    fn indices(&self) -> Result<BTreeMap<String, RepoIndex>> {
        let dir = self.index_dir();
        let entries = std::fs::read_dir(&dir).map_err(|_| prerequisite(&dir, "index"))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(prerequisite(&dir, "index"));
        }
        let mut out = BTreeMap::new();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let idx = RepoIndex::from_json(&text)?;
            out.insert(idx.repo_id.clone(), idx);
        }
        Ok(out)
    }

    fn hole_records(&self) -> Result<Vec<HoleRecord>> {
        let path = self.out("holes.jsonl");
        if !path.exists() {
            return Err(prerequisite(&path, "mine"));
        }
        read_jsonl(&path)
    }

    fn labels(&self) -> Result<BTreeMap<String, LabelRecord>> {
        let path = self.out("labels.jsonl");
        if !path.exists() {
            return Err(prerequisite(&path, "label"));
        }
        let recs: Vec<LabelRecord> = read_jsonl(&path)?;
        for r in &recs {
            r.validate()?;
        }
        Ok(recs.into_iter().map(|r| (r.hole_id.clone(), r)).collect())
    }

    fn backend(&self, holes: &[HoleRecord], tok: Arc<dyn Tokenizer>) -> Result<Box<dyn CompletionBackend>> {
        Ok(match self.cfg.backend.kind {
            BackendKind::Mock => {
                let table: HashMap<String, String> = holes.iter().map(|h| (h.id.clone(), h.target.clone())).collect();
                Box::new(MockBackend::new(table))
            }
            BackendKind::Remote => Box::new(RemoteBackend::new(self.cfg.backend.clone(), tok)?),
        })
    }

    fn checkpoint_path(&self, variant: Variant, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| {
            self.out("checkpoints").join(match variant {
                Variant::H => "rlpg-h.ckpt",
                Variant::R => "rlpg-r.ckpt",
            })
        })
    }

    fn load_model(&self, variant: Variant, explicit: &Option<PathBuf>, provider: &dyn EmbeddingProvider) -> Result<PpcModel> {
        let path = self.checkpoint_path(variant, explicit);
        if !path.exists() {
            return Err(prerequisite(&path, "train"));
        }
        let model = load_checkpoint(&path)?;
        if model.variant() != variant {
            return Err(Error::Checkpoint(format!("{} holds a {:?} model", path.display(), model.variant())));
        }
        if model.provider != provider.identity() {
            return Err(Error::Config(format!(
                "checkpoint was trained with provider {}, current provider is {}",
                model.provider,
                provider.identity()
            )));
        }
        Ok(model)
    }
}

/// `explicit` wins; otherwise test holes when any split is assigned, else all.
fn select_holes(records: &[HoleRecord], explicit: Option<SplitArg>) -> Vec<HoleSpec> {
    let any_split = records.iter().any(|r| r.split.is_some());
    let want = match explicit {
        Some(SplitArg::All) => None,
        Some(SplitArg::Train) => Some(Split::Train),
        Some(SplitArg::Val) => Some(Split::Val),
        Some(SplitArg::Test) => Some(Split::Test),
        None if any_split => Some(Split::Test),
        None => None,
    };
    records.iter().filter(|r| want.is_none() || r.split == want).map(HoleRecord::hole).collect()
}

fn cmd_index(ctx: &Ctx) -> Result<()> {
    if ctx.cfg.repo_roots.is_empty() {
        return Err(Error::Config("no repositories given; pass --repo-root".into()));
    }
    for root in &ctx.cfg.repo_roots {
        let id = repo_id_of(root);
        let cache = ctx.index_dir().join(format!("{id}.json"));
        let idx = load_or_build(root, &cache)?;
        for d in &idx.diagnostics {
            log::warn!("{id}: {d}");
        }
        println!("{id}: {} files, {} duplicate sets", idx.files.len(), idx.duplicate_sets.len());
    }
    Ok(())
}

fn cmd_mine(ctx: &Ctx, cap: Option<usize>) -> Result<()> {
    let indices = ctx.indices()?;
    let splits = ctx.splits()?;
    let cap = cap.unwrap_or(ctx.cfg.hole_cap);
    let mut records = Vec::new();
    for (id, idx) in &indices {
        let split = splits.as_ref().and_then(|s| s.split_of(id));
        let holes = mine_holes(idx, cap, ctx.cfg.seed)?;
        println!("{id}: {} holes", holes.len());
        records.extend(holes.iter().map(|h| HoleRecord::from_hole(h, idx, split)));
    }
    write_jsonl(&ctx.out("holes.jsonl"), &records)
}

fn evaluator<'a>(
    ctx: &Ctx,
    indices: &'a BTreeMap<String, RepoIndex>,
    tok: &'a dyn Tokenizer,
    backend: &'a dyn CompletionBackend,
) -> Evaluator<'a> {
    Evaluator {
        indices,
        tok,
        backend,
        total: ctx.cfg.budget,
        opts: ctx.options(),
        provider: None,
        model: None,
        labels: None,
        seed: ctx.cfg.seed,
    }
}

fn cmd_label(ctx: &Ctx, split: SplitArg) -> Result<()> {
    let indices = ctx.indices()?;
    let records = ctx.hole_records()?;
    let tok = ctx.tokenizer()?;
    let backend = ctx.backend(&records, tok.clone())?;
    let ev = evaluator(ctx, &indices, tok.as_ref(), backend.as_ref());
    let holes = select_holes(&records, Some(split));
    let labeled = ev.label_all(&holes)?;
    let labels: Vec<LabelRecord> = labeled.iter().map(|l| l.label.clone()).collect();
    let contexts: Vec<ProposalContextRecord> = labeled
        .iter()
        .flat_map(|l| l.contexts.iter().map(move |c| ProposalContextRecord::new(&l.label.hole_id, c)))
        .collect();
    let incomplete = labels.iter().filter(|l| l.incomplete).count();
    let calls: usize = labels.iter().map(|l| l.t.iter().map(|t| *t as usize).sum::<usize>()).sum();
    write_jsonl(&ctx.out("labels.jsonl"), &labels)?;
    write_jsonl(&ctx.out("contexts.jsonl"), &contexts)?;
    println!(
        "labeled {} holes ({:.2} backend calls per hole, {incomplete} incomplete)",
        labels.len(),
        calls as f64 / labels.len().max(1) as f64
    );
    Ok(())
}

/// Embedded training examples grouped by split.
fn build_examples(
    ctx: &Ctx,
    variant: Variant,
    provider: &dyn EmbeddingProvider,
) -> Result<(Vec<Example>, Vec<Example>)> {
    let indices = ctx.indices()?;
    let records = ctx.hole_records()?;
    let labels = ctx.labels()?;
    let ctx_path = ctx.out("contexts.jsonl");
    if !ctx_path.exists() {
        return Err(prerequisite(&ctx_path, "label"));
    }
    let mut contexts: BTreeMap<String, Vec<ProposalContext>> = BTreeMap::new();
    for r in read_jsonl::<ProposalContextRecord>(&ctx_path)? {
        let entry = contexts
            .entry(r.hole_id.clone())
            .or_insert_with(|| (0..NUM_PROPOSALS).map(ProposalContext::inapplicable).collect());
        if r.proposal_id < NUM_PROPOSALS {
            entry[r.proposal_id] = ProposalContext {
                proposal_id: r.proposal_id,
                text: r.text,
                token_count: r.token_count,
                applicable: r.applicable,
                files_used: Vec::new(),
                truncated: false,
            };
        }
    }
    let any_split = records.iter().any(|r| r.split.is_some());
    let mut train = Vec::new();
    let mut val = Vec::new();
    for rec in &records {
        let Some(label) = labels.get(&rec.id) else { continue };
        let is_train = !any_split || rec.split == Some(Split::Train);
        let is_val = any_split && rec.split == Some(Split::Val);
        if !is_train && !is_val {
            continue;
        }
        let hole = rec.hole();
        let idx = indices
            .get(&hole.repo_id)
            .ok_or_else(|| Error::invalid(format!("no index for repository {}", hole.repo_id)))?;
        let ctxs = contexts.get(&rec.id).ok_or_else(|| prerequisite(&ctx_path, "label"))?;
        let (hole_vec, ctx_vecs) = embed_hole(provider, &hole, idx, ctxs, variant)?;
        let ex = Example {
            hole_vec,
            ctx_vecs,
            y: label.y.iter().map(|v| *v as f64).collect(),
            t: label.t.iter().map(|v| *v as f64).collect(),
        };
        if is_train {
            train.push(ex);
        } else {
            val.push(ex);
        }
    }
    Ok((train, val))
}

fn cmd_train(ctx: &Ctx, variant: Variant, hyper: TrainHyper) -> Result<()> {
    let provider = ctx.provider()?;
    let (train, val) = build_examples(ctx, variant, provider.as_ref())?;
    let outcome = train_ppc(variant, &train, &val, &hyper)?;
    let mut meta = BTreeMap::new();
    meta.insert("hyper".to_string(), serde_json::to_value(hyper)?);
    meta.insert("train_holes".to_string(), serde_json::json!(train.len()));
    meta.insert("val_holes".to_string(), serde_json::json!(val.len()));
    meta.insert("best_epoch".to_string(), serde_json::json!(outcome.best_epoch));
    meta.insert("best_val_loss".to_string(), serde_json::json!(outcome.best_val_loss));
    let model = PpcModel { net: outcome.net, provider: provider.identity(), meta };
    let path = ctx.checkpoint_path(variant, &None);
    save_checkpoint(&path, &model)?;
    let log_path = path.with_extension("history.json");
    write_json(&log_path, &outcome.history)?;
    println!(
        "trained {variant:?} on {} holes ({} validation); best epoch {:?}, loss {:.6}; wrote {}",
        train.len(),
        val.len(),
        outcome.best_epoch,
        outcome.best_val_loss,
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PredictionRecord {
    hole_id: String,
    ranking: Vec<usize>,
    probabilities: Vec<f64>,
}

fn cmd_predict(ctx: &Ctx, variant: Variant, k: usize, split: Option<SplitArg>, ckpt: &Option<PathBuf>) -> Result<()> {
    let indices = ctx.indices()?;
    let records = ctx.hole_records()?;
    let tok = ctx.tokenizer()?;
    let provider = ctx.provider()?;
    let model = ctx.load_model(variant, ckpt, provider.as_ref())?;
    let backend = MockBackend::default();
    let mut ev = evaluator(ctx, &indices, tok.as_ref(), &backend);
    ev.provider = Some(provider.as_ref());
    ev.model = Some(&model);
    let mut out = Vec::new();
    for hole in select_holes(&records, split) {
        let contexts = ev.contexts(&hole)?;
        let probs = ev.probabilities(&hole, &contexts)?;
        let mask: Vec<bool> = contexts.iter().map(|c| c.applicable).collect();
        let ranking = crate::ppc::predict_topk(&probs, &mask, k)?;
        out.push(PredictionRecord { hole_id: hole.id.clone(), ranking, probabilities: probs });
    }
    let name = match variant {
        Variant::H => "predictions_rlpg-h.jsonl",
        Variant::R => "predictions_rlpg-r.jsonl",
    };
    write_jsonl(&ctx.out(name), &out)?;
    println!("wrote {} predictions", out.len());
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, method: &str, split: Option<SplitArg>, ckpt: &Option<PathBuf>) -> Result<()> {
    let method: Method = method.parse()?;
    let indices = ctx.indices()?;
    let records = ctx.hole_records()?;
    let tok = ctx.tokenizer()?;
    let backend = ctx.backend(&records, tok.clone())?;
    let provider = ctx.provider()?;
    let model = match method.needs_model() {
        Some(v) => Some(ctx.load_model(v, ckpt, provider.as_ref())?),
        None => None,
    };
    let labels = if method == Method::Oracle && ctx.out("labels.jsonl").exists() { Some(ctx.labels()?) } else { None };
    let mut ev = evaluator(ctx, &indices, tok.as_ref(), backend.as_ref());
    ev.provider = Some(provider.as_ref());
    ev.model = model.as_ref();
    ev.labels = labels.as_ref();
    let holes = select_holes(&records, split);
    let (recs, report) = ev.evaluate(method, &holes)?;
    let name = method.name().replace(':', "_");
    write_jsonl(&ctx.out(&format!("eval_{name}.jsonl")), &recs)?;
    write_json(&ctx.out(&format!("report_{name}.json")), &report)?;
    let text = report.to_text();
    write_text(&ctx.out(&format!("report_{name}.txt")), &text)?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct CurvePoint {
    k: usize,
    success_rate: f64,
}

#[derive(Serialize)]
struct AttemptsReport {
    ranking: String,
    holes: usize,
    oracle_success_rate: f64,
    curve: Vec<CurvePoint>,
}

fn cmd_attempts(ctx: &Ctx, ranking: &str, k_max: usize, split: Option<SplitArg>, ckpt: &Option<PathBuf>) -> Result<()> {
    let records = ctx.hole_records()?;
    let labels = ctx.labels()?;
    let holes: Vec<HoleSpec> =
        select_holes(&records, split).into_iter().filter(|h| labels.contains_key(&h.id)).collect();
    if holes.is_empty() {
        return Err(Error::Prerequisite("no labeled holes in the selected split; run `repoprompt label` first".into()));
    }
    let hole_labels: Vec<LabelRecord> = holes.iter().map(|h| labels[&h.id].clone()).collect();
    let rankings: Vec<Vec<usize>> = match ranking {
        "fixed" => {
            // reference rates come from validation holes, else training holes, else everything
            let reference: Vec<LabelRecord> = [Some(Split::Val), Some(Split::Train), None]
                .into_iter()
                .map(|want| {
                    records
                        .iter()
                        .filter(|r| want.is_none() || r.split == want)
                        .filter_map(|r| labels.get(&r.id).cloned())
                        .collect::<Vec<_>>()
                })
                .find(|v| !v.is_empty())
                .unwrap_or_default();
            let rates = proposal_success_rates(&reference);
            hole_labels.iter().map(|l| fixed_ranking(&rates, &l.mask())).collect()
        }
        "rlpg-h" | "rlpg-r" => {
            let variant: Variant = ranking.parse()?;
            let indices = ctx.indices()?;
            let tok = ctx.tokenizer()?;
            let provider = ctx.provider()?;
            let model = ctx.load_model(variant, ckpt, provider.as_ref())?;
            let backend = MockBackend::default();
            let mut ev = evaluator(ctx, &indices, tok.as_ref(), &backend);
            ev.provider = Some(provider.as_ref());
            ev.model = Some(&model);
            holes
                .iter()
                .zip(&hole_labels)
                .map(|(h, l)| {
                    let contexts = ev.contexts(h)?;
                    let probs = ev.probabilities(h, &contexts)?;
                    Ok(rank_proposals(&probs, &l.mask()))
                })
                .collect::<Result<_>>()?
        }
        other => return Err(Error::invalid(format!("unknown ranking {other:?}; use fixed, rlpg-h or rlpg-r"))),
    };
    let ks: Vec<usize> = (1..=k_max.clamp(1, NUM_PROPOSALS)).collect();
    let curve = attempts_curve(&rankings, &hole_labels, &ks)?;
    let oracle = hole_labels.iter().filter(|l| l.any_success()).count() as f64 / hole_labels.len() as f64;
    let report = AttemptsReport {
        ranking: ranking.to_string(),
        holes: holes.len(),
        oracle_success_rate: oracle,
        curve: curve.into_iter().map(|(k, sr)| CurvePoint { k, success_rate: sr }).collect(),
    };
    write_json(&ctx.out(&format!("attempts_{ranking}.json")), &report)?;
    for p in &report.curve {
        println!("k={:>2}  SR={:.2}%", p.k, 100.0 * p.success_rate);
    }
    Ok(())
}

fn cmd_compose_eval(ctx: &Ctx, variant: Variant, l_max: usize, split: Option<SplitArg>, ckpt: &Option<PathBuf>) -> Result<()> {
    let indices = ctx.indices()?;
    let records = ctx.hole_records()?;
    let tok = ctx.tokenizer()?;
    let backend = ctx.backend(&records, tok.clone())?;
    let provider = ctx.provider()?;
    let model = ctx.load_model(variant, ckpt, provider.as_ref())?;
    let mut ev = evaluator(ctx, &indices, tok.as_ref(), backend.as_ref());
    ev.provider = Some(provider.as_ref());
    ev.model = Some(&model);
    let holes = select_holes(&records, split);
    let reports: Vec<_> = (1..=l_max.max(1)).map(|l| ev.evaluate_composition(l, &holes)).collect::<Result<_>>()?;
    write_json(&ctx.out("compose_eval.json"), &reports)?;
    let table = summary_table(&reports);
    write_text(&ctx.out("compose_eval.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    if let Some(w) = cfg.workers {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
    }
    let ctx = Ctx { cfg };
    match cli.command {
        Command::Index => cmd_index(&ctx),
        Command::Mine { cap } => cmd_mine(&ctx, cap),
        Command::Label { split } => cmd_label(&ctx, split),
        Command::Train { variant, epochs, lr, batch_size, dropout } => {
            let hyper = TrainHyper { epochs, lr, batch_size, dropout, seed: ctx.cfg.seed, ..TrainHyper::default() };
            cmd_train(&ctx, variant.into(), hyper)
        }
        Command::Predict { variant, k, split, checkpoint } => cmd_predict(&ctx, variant.into(), k, split, &checkpoint),
        Command::Evaluate { method, split, checkpoint } => cmd_evaluate(&ctx, &method, split, &checkpoint),
        Command::Attempts { ranking, k_max, split, checkpoint } => cmd_attempts(&ctx, &ranking, k_max, split, &checkpoint),
        Command::ComposeEval { variant, l_max, split, checkpoint } => {
            cmd_compose_eval(&ctx, variant.into(), l_max, split, &checkpoint)
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code: 0 success, 2 usage error, 1 otherwise.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
