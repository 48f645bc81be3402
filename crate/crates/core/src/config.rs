//! Pipeline configuration: a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so that typos do not silently fall back to defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::exec::Execution;
use crate::hypergraph::IntimacyMode;
use crate::linkpred::{LinkMethod, DEFAULT_CNC_ALPHA};
use crate::llm::{ControlKind, ProviderSettings, RequestShape};
use crate::temporal::HistoryScope;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
    #[error("{0}")]
    Io(String),
}

/// Mining strategy: hypergraph intimacy or a dyadic link-prediction baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiningMethod {
    Hypergraph,
    Link(LinkMethod),
}

impl MiningMethod {
    pub fn name(self) -> &'static str {
        match self {
            MiningMethod::Hypergraph => "hypergraph",
            MiningMethod::Link(m) => m.name(),
        }
    }
}

impl std::str::FromStr for MiningMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "hypergraph" {
            Ok(MiningMethod::Hypergraph)
        } else {
            s.parse().map(MiningMethod::Link)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub k: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon_ball: f64,
    pub epsilon_temporal: f64,
    /// Candidates kept per source in the candidate export.
    pub topk: usize,
    /// Candidates mixed per selected source.
    pub per_source: usize,
    pub mix_ratio: f64,
    pub tau: f64,
    pub seed: u64,
    pub intimacy: IntimacyMode,
    pub method: MiningMethod,
    pub cnc_alpha: f64,
    pub controls: Vec<ControlKind>,
    pub directive: Option<String>,
    pub theta: f64,
    pub temporal_scope: HistoryScope,
    pub hierarchy_weights: Option<PathBuf>,
    pub hierarchy_within: Option<f64>,
    pub hierarchy_across: Option<f64>,
    pub provider: String,
    pub provider_url: Option<String>,
    pub provider_model: String,
    pub provider_shape: String,
    pub provider_timeout_secs: u64,
    /// Environment variable holding the provider token.
    pub provider_token_env: String,
    pub canned_responses: Option<PathBuf>,
    pub prompt_pack: Option<PathBuf>,
    pub max_concurrency: usize,
    pub embedding: String,
    pub embedding_dim: usize,
    pub embedding_url: Option<String>,
    pub embedding_model: String,
    pub embedding_cache: Option<PathBuf>,
    pub execution: Execution,
    /// Directory that relative paths are resolved against; not part of the hash.
    pub base_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 4,
            gamma: 1.0,
            alpha: 0.85,
            epsilon_ball: 0.8,
            epsilon_temporal: 0.8,
            topk: 5,
            per_source: 1,
            mix_ratio: 0.5,
            tau: 0.8,
            seed: 0,
            intimacy: IntimacyMode::Literal,
            method: MiningMethod::Hypergraph,
            cnc_alpha: DEFAULT_CNC_ALPHA,
            controls: vec![ControlKind::Compact],
            directive: None,
            theta: 0.5,
            temporal_scope: HistoryScope::Lineage,
            hierarchy_weights: None,
            hierarchy_within: None,
            hierarchy_across: None,
            provider: "mock".into(),
            provider_url: None,
            provider_model: "gpt-4".into(),
            provider_shape: "chat".into(),
            provider_timeout_secs: 60,
            provider_token_env: "FRAMEGRAPH_PROVIDER_TOKEN".into(),
            canned_responses: None,
            prompt_pack: None,
            max_concurrency: 4,
            embedding: "trigram".into(),
            embedding_dim: 64,
            embedding_url: None,
            embedding_model: String::new(),
            embedding_cache: None,
            execution: Execution::Parallel,
            base_dir: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        message: e.to_string(),
    })
}

fn opt_string(v: &str) -> Option<String> {
    (!v.is_empty()).then(|| v.to_string())
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Resolve a configured path against [`Self::base_dir`].
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let bad = |m: String| ConfigError::Value {
            key: key.into(),
            message: m,
        };
        match key {
            "k" => self.k = parse_num(key, v)?,
            "gamma" => self.gamma = parse_num(key, v)?,
            "alpha" => self.alpha = parse_num(key, v)?,
            "epsilon_ball" => self.epsilon_ball = parse_num(key, v)?,
            "epsilon_temporal" => self.epsilon_temporal = parse_num(key, v)?,
            "topk" => self.topk = parse_num(key, v)?,
            "per_source" => self.per_source = parse_num(key, v)?,
            "mix_ratio" => self.mix_ratio = parse_num(key, v)?,
            "tau" => self.tau = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "intimacy" => self.intimacy = v.parse().map_err(bad)?,
            "method" => self.method = v.parse().map_err(bad)?,
            "cnc_alpha" => self.cnc_alpha = parse_num(key, v)?,
            "control" => {
                self.controls = v
                    .split(',')
                    .map(|c| c.trim().parse::<ControlKind>())
                    .collect::<Result<_, _>>()
                    .map_err(bad)?
            }
            "directive" => self.directive = opt_string(v),
            "theta" => self.theta = parse_num(key, v)?,
            "temporal_scope" => {
                self.temporal_scope = match v {
                    "lineage" => HistoryScope::Lineage,
                    "corpus" => HistoryScope::Corpus,
                    _ => return Err(bad(format!("expected lineage or corpus, got {v:?}"))),
                }
            }
            "hierarchy_weights" => self.hierarchy_weights = opt_string(v).map(PathBuf::from),
            "hierarchy_within" => self.hierarchy_within = Some(parse_num(key, v)?),
            "hierarchy_across" => self.hierarchy_across = Some(parse_num(key, v)?),
            "provider" => self.provider = v.to_string(),
            "provider_url" => self.provider_url = opt_string(v),
            "provider_model" => self.provider_model = v.to_string(),
            "provider_shape" => self.provider_shape = v.to_string(),
            "provider_timeout_secs" => self.provider_timeout_secs = parse_num(key, v)?,
            "provider_token_env" => self.provider_token_env = v.to_string(),
            "canned_responses" => self.canned_responses = opt_string(v).map(PathBuf::from),
            "prompt_pack" => self.prompt_pack = opt_string(v).map(PathBuf::from),
            "max_concurrency" => self.max_concurrency = parse_num(key, v)?,
            "embedding" => self.embedding = v.to_string(),
            "embedding_dim" => self.embedding_dim = parse_num(key, v)?,
            "embedding_url" => self.embedding_url = opt_string(v),
            "embedding_model" => self.embedding_model = v.to_string(),
            "embedding_cache" => self.embedding_cache = opt_string(v).map(PathBuf::from),
            "execution" => {
                self.execution = match v {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(bad(format!("expected parallel or sequential, got {v:?}"))),
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Value {
                    key: key.into(),
                    message: msg.into(),
                })
            }
        };
        check(self.k >= 2, "k", "must be at least 2")?;
        check(self.gamma > 0.0, "gamma", "must be positive")?;
        check(
            (0.0..=1.0).contains(&self.alpha),
            "alpha",
            "must be in [0,1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.epsilon_ball),
            "epsilon_ball",
            "must be in [0,1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.epsilon_temporal),
            "epsilon_temporal",
            "must be in [0,1]",
        )?;
        check(self.topk >= 1, "topk", "must be at least 1")?;
        check(self.per_source >= 1, "per_source", "must be at least 1")?;
        check(
            (0.0..=1.0).contains(&self.mix_ratio),
            "mix_ratio",
            "must be in [0,1]",
        )?;
        check((0.0..=1.0).contains(&self.tau), "tau", "must be in [0,1]")?;
        check(
            (0.0..=1.0).contains(&self.cnc_alpha),
            "cnc_alpha",
            "must be in [0,1]",
        )?;
        check(
            !self.controls.is_empty(),
            "control",
            "needs at least one control attribute",
        )?;
        check(
            self.max_concurrency >= 1,
            "max_concurrency",
            "must be at least 1",
        )?;
        check(
            self.hierarchy_within.is_some() == self.hierarchy_across.is_some(),
            "hierarchy_within",
            "hierarchy_within and hierarchy_across must be set together",
        )?;
        check(
            self.hierarchy_within.is_none_or(|w| w >= 0.0)
                && self.hierarchy_across.is_none_or(|w| w >= 0.0),
            "hierarchy_within",
            "weights must be nonnegative",
        )?;
        Ok(())
    }

    /// Canonical `key = value` rendering with every key resolved.
    pub fn to_text(&self) -> String {
        let opt = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let optf = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let controls: Vec<&str> = self.controls.iter().map(|c| c.name()).collect();
        let scope = match self.temporal_scope {
            HistoryScope::Lineage => "lineage",
            HistoryScope::Corpus => "corpus",
        };
        let exec = if self.execution == Execution::Parallel {
            "parallel"
        } else {
            "sequential"
        };
        let pairs: Vec<(&str, String)> = vec![
            ("k", self.k.to_string()),
            ("gamma", self.gamma.to_string()),
            ("alpha", self.alpha.to_string()),
            ("epsilon_ball", self.epsilon_ball.to_string()),
            ("epsilon_temporal", self.epsilon_temporal.to_string()),
            ("topk", self.topk.to_string()),
            ("per_source", self.per_source.to_string()),
            ("mix_ratio", self.mix_ratio.to_string()),
            ("tau", self.tau.to_string()),
            ("seed", self.seed.to_string()),
            ("intimacy", self.intimacy.to_string()),
            ("method", self.method.name().to_string()),
            ("cnc_alpha", self.cnc_alpha.to_string()),
            ("control", controls.join(",")),
            ("directive", self.directive.clone().unwrap_or_default()),
            ("theta", self.theta.to_string()),
            ("temporal_scope", scope.to_string()),
            ("hierarchy_weights", opt(&self.hierarchy_weights)),
            ("hierarchy_within", optf(self.hierarchy_within)),
            ("hierarchy_across", optf(self.hierarchy_across)),
            ("provider", self.provider.clone()),
            (
                "provider_url",
                self.provider_url.clone().unwrap_or_default(),
            ),
            ("provider_model", self.provider_model.clone()),
            ("provider_shape", self.provider_shape.clone()),
            (
                "provider_timeout_secs",
                self.provider_timeout_secs.to_string(),
            ),
            ("provider_token_env", self.provider_token_env.clone()),
            ("canned_responses", opt(&self.canned_responses)),
            ("prompt_pack", opt(&self.prompt_pack)),
            ("max_concurrency", self.max_concurrency.to_string()),
            ("embedding", self.embedding.clone()),
            ("embedding_dim", self.embedding_dim.to_string()),
            (
                "embedding_url",
                self.embedding_url.clone().unwrap_or_default(),
            ),
            ("embedding_model", self.embedding_model.clone()),
            ("embedding_cache", opt(&self.embedding_cache)),
            ("execution", exec.to_string()),
        ];
        let mut s = String::new();
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::to_text`].
    ///
    /// The execution mode is left out: it never changes results.
    pub fn hash(&self) -> String {
        let canonical: String = self
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("execution ="))
            .map(|l| format!("{l}\n"))
            .collect();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn provider_settings(&self) -> Result<ProviderSettings, ConfigError> {
        let shape: RequestShape = self
            .provider_shape
            .parse()
            .map_err(|m| ConfigError::Value {
                key: "provider_shape".into(),
                message: m,
            })?;
        Ok(ProviderSettings {
            kind: self.provider.clone(),
            url: self.provider_url.clone(),
            model: self.provider_model.clone(),
            token: std::env::var(&self.provider_token_env)
                .ok()
                .filter(|t| !t.is_empty()),
            timeout: Duration::from_secs(self.provider_timeout_secs),
            shape,
            canned_path: self.canned_responses.as_deref().map(|p| self.resolve(p)),
        })
    }
}
