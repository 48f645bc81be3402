use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::http::{HttpCompletionClient, HttpCompletionConfig, RequestShape};
use super::prompt::test_block;
use super::{CompletionRequest, LlmError};

pub const DEFAULT_ATTEMPTS: usize = 3;
pub const DEFAULT_MAX_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
}

pub trait CompletionClient: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError>;
}

impl<C: CompletionClient + ?Sized> CompletionClient for Box<C> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        (**self).complete(request)
    }
}

/// Fixed responses keyed by the full prompt or by its `Test` block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CannedProvider {
    responses: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct CannedRecord {
    key: String,
    output: String,
}

impl CannedProvider {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            responses: entries
                .into_iter()
                .map(|(k, v)| (k.into().trim().to_string(), v.into()))
                .collect(),
        }
    }

    /// JSONL of `{"key": .., "output": ..}`.
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let file = std::fs::File::open(path)
            .map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LlmError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: CannedRecord = serde_json::from_str(&line)
                .map_err(|e| LlmError::Io(format!("{}:{}: {e}", path.display(), i + 1)))?;
            entries.push((r.key, r.output));
        }
        Ok(Self::new(entries))
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let mut out = String::new();
        for (key, output) in &self.responses {
            let rec = CannedRecord {
                key: key.clone(),
                output: output.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("strings serialize"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn lookup(&self, prompt: &str) -> Option<&str> {
        self.responses
            .get(prompt.trim())
            .or_else(|| self.responses.get(test_block(prompt).trim()))
            .map(String::as_str)
    }
}

impl CompletionClient for CannedProvider {
    fn id(&self) -> &str {
        "canned"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        self.lookup(&request.prompt)
            .map(|t| Completion {
                text: t.to_string(),
                latency_ms: 0,
            })
            .ok_or(LlmError::UnknownPrompt)
    }
}

/// Returns the tuple lines of the prompt's `Test` block, one per line.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoProvider;

impl EchoProvider {
    pub fn echo(prompt: &str) -> String {
        test_block(prompt)
            .lines()
            .map(str::trim)
            .filter(|l| l.starts_with('[') && l.ends_with(']'))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl CompletionClient for EchoProvider {
    fn id(&self) -> &str {
        "echo"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        Ok(Completion {
            text: Self::echo(&request.prompt),
            latency_ms: 0,
        })
    }
}

/// Canned responses first, echo otherwise.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    pub canned: CannedProvider,
}

impl MockProvider {
    pub fn new(canned: CannedProvider) -> Self {
        Self { canned }
    }
}

impl CompletionClient for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let text = match self.canned.lookup(&request.prompt) {
            Some(t) => t.to_string(),
            None => EchoProvider::echo(&request.prompt),
        };
        Ok(Completion {
            text,
            latency_ms: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProviderSettings {
    /// `mock`, `echo`, `canned` or `http`.
    pub kind: String,
    pub url: Option<String>,
    pub model: String,
    pub token: Option<String>,
    pub timeout: Duration,
    pub shape: RequestShape,
    pub canned_path: Option<PathBuf>,
}

pub fn build_client(settings: &ProviderSettings) -> Result<Box<dyn CompletionClient>, LlmError> {
    let canned = || -> Result<CannedProvider, LlmError> {
        settings
            .canned_path
            .as_deref()
            .map_or(Ok(CannedProvider::default()), CannedProvider::load)
    };
    match settings.kind.as_str() {
        "mock" => Ok(Box::new(MockProvider::new(canned()?))),
        "echo" => Ok(Box::new(EchoProvider)),
        "canned" => {
            if settings.canned_path.is_none() {
                return Err(LlmError::NotConfigured(
                    "canned provider needs a response file".into(),
                ));
            }
            Ok(Box::new(canned()?))
        }
        "http" => {
            let url = settings
                .url
                .clone()
                .ok_or_else(|| LlmError::NotConfigured("http provider needs a url".into()))?;
            Ok(Box::new(HttpCompletionClient::new(HttpCompletionConfig {
                url,
                model: settings.model.clone(),
                token: settings.token.clone(),
                timeout: settings.timeout,
                shape: settings.shape,
            })))
        }
        "" | "none" => Err(LlmError::NotConfigured("no provider selected".into())),
        other => Err(LlmError::NotConfigured(format!(
            "unknown provider {other:?}"
        ))),
    }
}

/// One request/response pair as written to the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub job_id: String,
    pub prompt: String,
    pub output: String,
    pub provider: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunLogEntry {
    pub fn write_jsonl<W: Write>(entries: &[RunLogEntry], mut w: W) -> std::io::Result<()> {
        for e in entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Retrying, concurrency-bounded front end to a completion client.
pub struct Completer {
    client: Box<dyn CompletionClient>,
    pub attempts: usize,
    pub backoff: Duration,
    pub max_concurrency: usize,
}

impl Completer {
    pub fn new(client: Box<dyn CompletionClient>) -> Self {
        Self {
            client,
            attempts: DEFAULT_ATTEMPTS,
            backoff: Duration::from_millis(200),
            max_concurrency: DEFAULT_MAX_CONCURRENCY,
        }
    }

    pub fn provider(&self) -> &str {
        self.client.id()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let attempts = self.attempts.max(1);
        let mut last = None;
        for i in 0..attempts {
            match self.client.complete(request) {
                Ok(c) => return Ok(c),
                Err(e) if e.is_retryable() => {
                    log::warn!("completion attempt {} of {attempts} failed: {e}", i + 1);
                    last = Some(e);
                    if i + 1 < attempts {
                        std::thread::sleep(self.backoff * 2u32.pow(i as u32));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Err(LlmError::Exhausted {
            attempts,
            last: last.map(|e| e.to_string()).unwrap_or_default(),
        })
    }

    /// Run jobs with at most `max_concurrency` requests in flight. Log
    /// entries come back in job order; failed jobs are logged with their error.
    pub fn run(
        &self,
        jobs: &[(String, CompletionRequest)],
    ) -> Vec<(RunLogEntry, Result<String, LlmError>)> {
        let slots: Vec<Mutex<Option<Result<Completion, LlmError>>>> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.max_concurrency.max(1).min(jobs.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs.len() {
                        break;
                    }
                    let r = self.complete(&jobs[i].1);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        jobs.iter()
            .zip(slots)
            .map(|((id, req), slot)| {
                let r = slot
                    .into_inner()
                    .expect("slot lock")
                    .expect("every job ran");
                let (output, latency_ms, error) = match &r {
                    Ok(c) => (c.text.clone(), c.latency_ms, None),
                    Err(e) => (String::new(), 0, Some(e.to_string())),
                };
                let entry = RunLogEntry {
                    job_id: id.clone(),
                    prompt: req.prompt.clone(),
                    output,
                    provider: self.provider().to_string(),
                    latency_ms,
                    error,
                };
                (entry, r.map(|c| c.text))
            })
            .collect()
    }
}
