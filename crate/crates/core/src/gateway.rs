//! Completion backends: an offline substring mock and a rate-limited client
//! for completions-style HTTP endpoints.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::composer::COMPLETION_MAX_TOKENS;
use crate::error::{Error, Result};
use crate::tokenizer::Tokenizer;
use crate::DEFAULT_TOTAL_BUDGET;

/// Returned by the mock when the target is not in the prompt.
pub const MISS: &str = "<MISS>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
    pub stop: Vec<String>,
    /// Lets the mock look up the target; never sent over the wire.
    #[serde(skip)]
    pub hole_id: Option<String>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: COMPLETION_MAX_TOKENS,
            temperature: 0.0,
            stop: vec!["\n".to_string()],
            hole_id: None,
        }
    }

    pub fn for_hole(prompt: impl Into<String>, hole_id: &str) -> Self {
        Self { hole_id: Some(hole_id.to_string()), ..Self::new(prompt) }
    }
}

pub trait CompletionBackend: Send + Sync {
    fn identity(&self) -> String;

    /// First line of the completion.
    fn complete(&self, req: &CompletionRequest) -> Result<String>;

    /// Completes every request; results are in request order.
    fn complete_many(&self, reqs: &[CompletionRequest], workers: usize) -> Vec<Result<String>> {
        run_ordered(reqs, workers, |r| self.complete(r))
    }
}

fn run_ordered<F>(reqs: &[CompletionRequest], workers: usize, f: F) -> Vec<Result<String>>
where
    F: Fn(&CompletionRequest) -> Result<String> + Sync,
{
    let slots: Vec<Mutex<Option<Result<String>>>> = reqs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, reqs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= reqs.len() {
                    break;
                }
                *slots[i].lock().unwrap() = Some(f(&reqs[i]));
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot filled")).collect()
}

fn first_line(s: &str) -> String {
    s.split('\n').next().unwrap_or("").to_string()
}

fn check_temperature(req: &CompletionRequest, evaluation_mode: bool) -> Result<()> {
    if evaluation_mode && req.temperature != 0.0 {
        return Err(Error::invalid(format!("temperature must be 0 in evaluation mode, got {}", req.temperature)));
    }
    Ok(())
}

/// The target iff it occurs verbatim in the prompt, else [`MISS`].
pub fn mock_complete(table: &HashMap<String, String>, hole_id: &str, prompt: &str) -> Result<String> {
    let target = table
        .get(hole_id)
        .ok_or_else(|| Error::invalid(format!("hole {hole_id} is not registered with the mock backend")))?;
    if !target.is_empty() && prompt.contains(target.as_str()) {
        Ok(target.clone())
    } else {
        Ok(MISS.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    table: HashMap<String, String>,
}

impl MockBackend {
    pub fn new(table: HashMap<String, String>) -> Self {
        Self { table }
    }

    pub fn register(&mut self, hole_id: &str, target: &str) {
        self.table.insert(hole_id.to_string(), target.to_string());
    }
}

impl CompletionBackend for MockBackend {
    fn identity(&self) -> String {
        "mock-substring".to_string()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        check_temperature(req, true)?;
        let id = req.hole_id.as_deref().ok_or_else(|| Error::invalid("mock backend needs a hole id"))?;
        mock_complete(&self.table, id, &req.prompt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 5, base_delay_ms: 500, max_delay_ms: 30_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    pub max_concurrent: usize,
    pub requests_per_minute: u32,
    pub retry: RetryPolicy,
    pub timeout_secs: u64,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_prompt_tokens: usize,
    pub cache_dir: Option<PathBuf>,
    pub evaluation_mode: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: "https://api.openai.com/v1/completions".to_string(),
            model: "code-davinci-002".to_string(),
            max_concurrent: 20,
            requests_per_minute: 400,
            retry: RetryPolicy::default(),
            timeout_secs: 60,
            api_key_env: "OPENAI_API_KEY".to_string(),
            max_prompt_tokens: DEFAULT_TOTAL_BUDGET,
            cache_dir: None,
            evaluation_mode: true,
        }
    }
}

/// Status and body of one HTTP exchange. `Err` means no response arrived.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, body: &serde_json::Value, bearer: Option<&str>) -> Result<(u16, String)>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Transport { status: None, message: e.to_string() })?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, body: &serde_json::Value, bearer: Option<&str>) -> Result<(u16, String)> {
        let mut req = self.client.post(url).json(body);
        if let Some(t) = bearer {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| Error::Transport { status: None, message: e.to_string() })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| Error::Transport { status: Some(status), message: e.to_string() })?;
        Ok((status, text))
    }
}

/// Counting semaphore with a bounded wait.
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self, deadline: Instant) -> Result<Permit<'_>> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            let now = Instant::now();
            if now >= deadline {
                return Err(Error::Transport { status: None, message: "timed out waiting for a request slot".into() });
            }
            free = self.cv.wait_timeout(free, deadline - now).unwrap().0;
        }
        *free -= 1;
        Ok(Permit(self))
    }
}

/// Token bucket refilled at `per_minute / 60` tokens per second.
struct RateLimiter {
    state: Mutex<(f64, Instant)>,
    capacity: f64,
    per_sec: f64,
}

impl RateLimiter {
    fn new(per_minute: u32, burst: usize) -> Self {
        let capacity = burst.max(1) as f64;
        Self { state: Mutex::new((capacity, Instant::now())), capacity, per_sec: per_minute as f64 / 60.0 }
    }

    fn acquire(&self, deadline: Instant) -> Result<()> {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.per_sec;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return Ok(());
                }
                Duration::from_secs_f64((1.0 - st.0) / self.per_sec)
            };
            if Instant::now() + wait > deadline {
                return Err(Error::Transport { status: None, message: "rate limit wait exceeds timeout".into() });
            }
            std::thread::sleep(wait);
        }
    }
}

/// Completion cache: one JSON file per request, keyed by content hash.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    completion: String,
}

impl DiskCache {
    pub fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn key(model: &str, req: &CompletionRequest) -> String {
        let body = serde_json::json!({
            "model": model,
            "prompt": req.prompt,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
            "stop": req.stop,
        });
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let text = std::fs::read_to_string(self.dir.join(format!("{key}.json"))).ok()?;
        serde_json::from_str::<CacheEntry>(&text).ok().map(|e| e.completion)
    }

    pub fn put(&self, key: &str, completion: &str) -> Result<()> {
        let path = self.dir.join(format!("{key}.json"));
        let tmp = self.dir.join(format!("{key}.json.tmp{}", std::process::id()));
        let body = serde_json::to_string(&CacheEntry { completion: completion.to_string() })?;
        std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

pub struct RemoteBackend {
    cfg: BackendConfig,
    transport: Box<dyn Transport>,
    tokenizer: Arc<dyn Tokenizer>,
    slots: Semaphore,
    limiter: RateLimiter,
    cache: Option<DiskCache>,
    api_key: Option<String>,
}

impl RemoteBackend {
    pub fn new(cfg: BackendConfig, tokenizer: Arc<dyn Tokenizer>) -> Result<Self> {
        let transport = HttpTransport::new(Duration::from_secs(cfg.timeout_secs))?;
        Self::with_transport(cfg, tokenizer, Box::new(transport))
    }

    pub fn with_transport(cfg: BackendConfig, tokenizer: Arc<dyn Tokenizer>, transport: Box<dyn Transport>) -> Result<Self> {
        if cfg.requests_per_minute == 0 || cfg.max_concurrent == 0 {
            return Err(Error::Config("rate ceiling and concurrency must be positive".into()));
        }
        let cache = cfg.cache_dir.clone().map(DiskCache::new).transpose()?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self {
            slots: Semaphore::new(cfg.max_concurrent),
            limiter: RateLimiter::new(cfg.requests_per_minute, cfg.max_concurrent),
            cfg,
            transport,
            tokenizer,
            cache,
            api_key,
        })
    }

    pub fn validate(&self, req: &CompletionRequest) -> Result<()> {
        check_temperature(req, self.cfg.evaluation_mode)?;
        let n = self.tokenizer.count(&req.prompt);
        if n > self.cfg.max_prompt_tokens {
            return Err(Error::invalid(format!(
                "prompt has {n} tokens, limit is {}",
                self.cfg.max_prompt_tokens
            )));
        }
        Ok(())
    }

    fn body(&self, req: &CompletionRequest) -> serde_json::Value {
        serde_json::json!({
            "model": self.cfg.model,
            "prompt": req.prompt,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
            "stop": req.stop,
        })
    }

    fn send_with_retry(&self, req: &CompletionRequest) -> Result<String> {
        let deadline = Instant::now() + Duration::from_secs(self.cfg.timeout_secs.max(1) * (self.cfg.retry.max_retries as u64 + 1));
        let body = self.body(req);
        let mut last_status = None;
        let mut last_msg = String::new();
        for attempt in 0..=self.cfg.retry.max_retries {
            if attempt > 0 {
                let delay = self
                    .cfg
                    .retry
                    .base_delay_ms
                    .saturating_mul(1 << (attempt - 1).min(20))
                    .min(self.cfg.retry.max_delay_ms);
                std::thread::sleep(Duration::from_millis(delay));
            }
            self.limiter.acquire(deadline)?;
            let outcome = {
                let _permit = self.slots.acquire(deadline)?;
                self.transport.post_json(&self.cfg.endpoint, &body, self.api_key.as_deref())
            };
            match outcome {
                Ok((status, text)) if (200..300).contains(&status) => {
                    let parsed: CompletionResponse = serde_json::from_str(&text)
                        .map_err(|e| Error::Transport { status: Some(status), message: format!("bad response: {e}") })?;
                    let text = parsed.choices.into_iter().next().map(|c| c.text).unwrap_or_default();
                    return Ok(first_line(&text));
                }
                Ok((status, text)) if status == 429 || status >= 500 => {
                    log::warn!("completion attempt {attempt} got {status}");
                    last_status = Some(status);
                    last_msg = text;
                }
                Ok((status, text)) => return Err(Error::Transport { status: Some(status), message: text }),
                Err(Error::Transport { status, message }) => {
                    last_status = status;
                    last_msg = message;
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::Transport { status: last_status, message: format!("retries exhausted: {last_msg}") })
    }
}

impl CompletionBackend for RemoteBackend {
    fn identity(&self) -> String {
        format!("remote:{}", self.cfg.model)
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        self.validate(req)?;
        let key = DiskCache::key(&self.cfg.model, req);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit);
        }
        let out = self.send_with_retry(req)?;
        if let Some(c) = &self.cache {
            c.put(&key, &out)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_examples() {
        let mut table = HashMap::new();
        table.insert("h".to_string(), "ompute();".to_string());
        assert_eq!(mock_complete(&table, "h", "x = compute();").unwrap(), "ompute();");
        assert_eq!(mock_complete(&table, "h", "nothing here").unwrap(), MISS);
        assert_eq!(mock_complete(&table, "h", "").unwrap(), MISS);
        assert!(mock_complete(&table, "nope", "x").is_err());
    }

    #[test]
    fn request_defaults() {
        let r = CompletionRequest::new("p");
        assert_eq!(r.max_tokens, 24);
        assert_eq!(r.temperature, 0.0);
        assert_eq!(r.stop, ["\n"]);
        let wire = serde_json::to_value(CompletionRequest::for_hole("p", "h")).unwrap();
        assert!(wire.get("hole_id").is_none());
    }

    #[test]
    fn mock_rejects_temperature() {
        let m = MockBackend::new(HashMap::from([("h".to_string(), "x".to_string())]));
        let mut r = CompletionRequest::for_hole("x", "h");
        r.temperature = 0.7;
        assert!(m.complete(&r).is_err());
    }

    #[test]
    fn first_line_only() {
        assert_eq!(first_line("abc\ndef"), "abc");
        assert_eq!(first_line(""), "");
    }
}
