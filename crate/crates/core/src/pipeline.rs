//! End-to-end pipeline stages.
//!
//! Stages read and write files in one output directory and share nothing in
//! memory, so each can be rerun on its own. Every artifact starts with a
//! header naming the config hash and seed: a `header` record in JSONL files,
//! a `#` comment in CSV files and a `//` comment in the DOT file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, MiningMethod, PipelineConfig};
use crate::corpus::{Corpus, CorpusError, HierarchyWeights};
use crate::embedding::{
    CachedEmbedder, EmbedError, EmbeddingProvider, RemoteEmbedder, RemoteEmbedderConfig,
    TrigramEmbedder,
};
use crate::frame::{DocumentId, Frame, FrameId};
use crate::hypergraph::{
    affinity_matrix_with, all_candidates, hypergraph_dot, hypergraph_snapshot, intimacy_with,
    normalize, AffinityMatrix, Hypergraph, HypergraphError,
};
use crate::linkpred::{
    links_csv, project_dyadic, ranked_partners, score_links, LinkMethod, LinkPredError,
};
use crate::llm::{
    build_client, build_generation_prompt, build_parse_prompt, parse_llm_tuples, render_tuple,
    Completer, CompletionRequest, ControlAttribute, ControlKind, GenerationJob, JobFrame, LlmError,
    PromptPack, RunLogEntry,
};
use crate::metrics::{
    attribute_frames, coherence, diversity, lexical_similarity, mix_diversity, semantic_similarity,
    Attribution, FluencyScorer, Granularity, MetricReport, MAX_NGRAM,
};
use crate::mixup::{mine_pairs, plan_mixups, MinedFrame, MixPlanConfig, MixupError};
use crate::temporal::{
    all_histories, annotation, classify_frame, temporal_heatmap, HistoryScope, TemporalError,
    Timeline,
};

pub const FRAMES: &str = "frames.jsonl";
pub const PARSE_LOG: &str = "parse_log.jsonl";
pub const PARSE_DIAGNOSTICS: &str = "parse_diagnostics.jsonl";
pub const SNAPSHOT: &str = "hypergraph.jsonl";
pub const DOT: &str = "hypergraph.dot";
pub const AFFINITY: &str = "affinity.csv";
pub const INTIMACY: &str = "intimacy.csv";
pub const MINED: &str = "mined.jsonl";
pub const HISTORY: &str = "history.jsonl";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const ATTRIBUTION: &str = "attribution.jsonl";

pub fn candidates_file(method: MiningMethod) -> String {
    format!("candidates_{}.csv", method.name())
}

pub fn links_file(method: LinkMethod) -> String {
    format!("links_{method}.csv")
}

pub fn generation_file(control: ControlKind) -> String {
    format!("generation_{control}.jsonl")
}

pub fn run_log_file(control: ControlKind) -> String {
    format!("run_log_{control}.jsonl")
}

pub fn heatmap_file(lineage: Option<&str>) -> String {
    format!("heatmap_{}.csv", lineage.unwrap_or("all"))
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
    #[error(transparent)]
    Mixup(#[from] MixupError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    LinkPred(#[from] LinkPredError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{0}")]
    Missing(String),
}

impl PipelineError {
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Corpus(_) => "corpus",
            PipelineError::Embed(_) => "embedding",
            PipelineError::Hypergraph(_) => "hypergraph",
            PipelineError::Mixup(_) => "mixup",
            PipelineError::Temporal(_) => "temporal",
            PipelineError::LinkPred(_) => "linkpred",
            PipelineError::Llm(_) => "llm",
            PipelineError::Io { .. } => "io",
            PipelineError::Format { .. } => "format",
            PipelineError::Missing(_) => "missing_input",
        }
    }

    /// Machine-readable error report.
    pub fn to_json(&self, stage: &str) -> String {
        json!({"error": {"stage": stage, "kind": self.kind(), "message": self.to_string()}})
            .to_string()
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn read_file(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// JSON lines of `path` other than `header` records.
fn jsonl_records(path: &Path) -> Result<Vec<Value>, PipelineError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| PipelineError::Format {
            path: path.display().to_string(),
            message: format!("line {}: {e}", i + 1),
        })?;
        if v.get("kind").and_then(Value::as_str) != Some("header") {
            out.push(v);
        }
    }
    Ok(out)
}

fn strip_headers(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("{\"kind\":\"header\""))
        .map(|l| format!("{l}\n"))
        .collect()
}

enum Embedder {
    Plain(Box<dyn EmbeddingProvider>),
    Cached(CachedEmbedder<Box<dyn EmbeddingProvider>>),
}

impl Embedder {
    fn get(&self) -> &dyn EmbeddingProvider {
        match self {
            Embedder::Plain(p) => p.as_ref(),
            Embedder::Cached(c) => c,
        }
    }
}

/// One generation job per document, as written to `generation_<control>.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GenerationRecord {
    kind: String,
    #[serde(flatten)]
    job: GenerationJob,
}

pub struct Pipeline {
    config: PipelineConfig,
    out_dir: PathBuf,
    embedder: Embedder,
    pack: PromptPack,
}

impl Pipeline {
    /// Build the embedding provider and prompt pack named by the config.
    pub fn new(config: PipelineConfig, out_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let base: Box<dyn EmbeddingProvider> = match config.embedding.as_str() {
            "trigram" => Box::new(TrigramEmbedder::new(config.embedding_dim)?),
            "remote" => {
                let url = config
                    .embedding_url
                    .clone()
                    .ok_or_else(|| ConfigError::Value {
                        key: "embedding_url".into(),
                        message: "required for the remote embedder".into(),
                    })?;
                Box::new(RemoteEmbedder::new(RemoteEmbedderConfig {
                    url,
                    model: config.embedding_model.clone(),
                    token: std::env::var(&config.provider_token_env)
                        .ok()
                        .filter(|t| !t.is_empty()),
                    timeout: Duration::from_secs(config.provider_timeout_secs),
                }))
            }
            other => {
                return Err(ConfigError::Value {
                    key: "embedding".into(),
                    message: format!("unknown embedder {other:?}"),
                }
                .into())
            }
        };
        let embedder = match &config.embedding_cache {
            Some(p) => Embedder::Cached(CachedEmbedder::open(base, &config.resolve(p))?),
            None => Embedder::Plain(base),
        };
        Self::assemble(config, out_dir.into(), embedder)
    }

    /// Use a caller-supplied embedding provider.
    pub fn with_embedder(
        config: PipelineConfig,
        out_dir: impl Into<PathBuf>,
        embedder: Box<dyn EmbeddingProvider>,
    ) -> Result<Self, PipelineError> {
        Self::assemble(config, out_dir.into(), Embedder::Plain(embedder))
    }

    fn assemble(
        config: PipelineConfig,
        out_dir: PathBuf,
        embedder: Embedder,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let pack = match &config.prompt_pack {
            Some(p) => PromptPack::load(&config.resolve(p))?,
            None => PromptPack::default(),
        };
        fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
        Ok(Self {
            config,
            out_dir,
            embedder,
            pack,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn embedder(&self) -> &dyn EmbeddingProvider {
        self.embedder.get()
    }

    fn flush_cache(&self) -> Result<(), PipelineError> {
        if let Embedder::Cached(c) = &self.embedder {
            c.flush()?;
        }
        Ok(())
    }

    fn header(&self, artifact: &str, extra: Value) -> String {
        let config: serde_json::Map<String, Value> = self
            .config
            .to_text()
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), Value::String(v.to_string())))
            .collect();
        let mut h = json!({
            "kind": "header",
            "artifact": artifact,
            "config_hash": self.config.hash(),
            "seed": self.config.seed,
            "config": config,
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut h, extra) {
            m.extend(e);
        }
        format!("{h}\n")
    }

    fn csv_preamble(&self) -> String {
        format!(
            "# config_hash={} seed={}\n",
            self.config.hash(),
            self.config.seed
        )
    }

    fn weights(&self, corpus: &Corpus) -> Result<HierarchyWeights, PipelineError> {
        if let Some(p) = &self.config.hierarchy_weights {
            return Ok(HierarchyWeights::load_csv(&self.config.resolve(p))?);
        }
        match (self.config.hierarchy_within, self.config.hierarchy_across) {
            (Some(w), Some(a)) => Ok(HierarchyWeights::block(&corpus.documents, w, a)?),
            _ => Ok(HierarchyWeights::default()),
        }
    }

    /// Corpus from `frames.jsonl`, plus `mined.jsonl` when asked for.
    pub fn load_corpus(&self, with_mined: bool) -> Result<Corpus, PipelineError> {
        let frames = self.path(FRAMES);
        if !frames.exists() {
            return Err(PipelineError::Missing(format!(
                "missing frame artifacts: {}",
                frames.display()
            )));
        }
        let mut text = strip_headers(&read_file(&frames)?);
        let mined = self.path(MINED);
        if with_mined && mined.exists() {
            text.push_str(&strip_headers(&read_file(&mined)?));
        }
        let mut corpus = Corpus::from_jsonl_reader(text.as_bytes())?;
        corpus.weights = self.weights(&corpus)?;
        Ok(corpus)
    }

    fn completer(&self) -> Result<Completer, PipelineError> {
        let client = build_client(&self.config.provider_settings()?)?;
        let mut c = Completer::new(client);
        c.max_concurrency = self.config.max_concurrency;
        Ok(c)
    }

    fn write_run_log(&self, name: &str, entries: &[RunLogEntry]) -> Result<(), PipelineError> {
        let path = self.path(name);
        let mut buf = self.header(name, json!({})).into_bytes();
        RunLogEntry::write_jsonl(entries, &mut buf).map_err(|e| io_err(&path, e))?;
        fs::write(&path, buf).map_err(|e| io_err(&path, e))
    }

    /// Parse raw documents into frames with the completion provider.
    pub fn parse(&self, documents: &Path) -> Result<PathBuf, PipelineError> {
        let mut corpus = Corpus::load(documents)?;
        let exemplars = [self.pack.default_exemplar()];
        let mut jobs = Vec::with_capacity(corpus.documents.len());
        for d in &corpus.documents {
            let prompt = build_parse_prompt(&d.raw_text, &corpus.schema, &exemplars, &self.pack)?;
            jobs.push((
                format!("parse:{}", d.document_id),
                CompletionRequest::new(prompt)?.with_model(&self.config.provider_model),
            ));
        }
        let results = self.completer()?.run(&jobs);
        let entries: Vec<RunLogEntry> = results.iter().map(|(e, _)| e.clone()).collect();
        self.write_run_log(PARSE_LOG, &entries)?;

        let mut frames = Vec::new();
        let mut diagnostics = self.header(PARSE_DIAGNOSTICS, json!({}));
        for (d, (_, r)) in corpus.documents.iter().zip(results) {
            let output = r?;
            let parsed = parse_llm_tuples(&output, &corpus.schema, &d.document_id);
            for diag in &parsed.diagnostics {
                let mut v = serde_json::to_value(diag).expect("diagnostic serializes");
                v["document_id"] = json!(d.document_id);
                diagnostics.push_str(&format!("{v}\n"));
            }
            frames.extend(parsed.frames);
        }
        write_file(&self.path(PARSE_DIAGNOSTICS), &diagnostics)?;
        corpus.frames = frames;
        corpus.mined.clear();
        corpus.link()?;
        self.write_frames(&corpus)
    }

    /// Use a corpus that already carries frames.
    pub fn import(&self, corpus_path: &Path) -> Result<PathBuf, PipelineError> {
        let mut corpus = Corpus::load(corpus_path)?;
        corpus.mined.clear();
        self.write_frames(&corpus)
    }

    fn write_frames(&self, corpus: &Corpus) -> Result<PathBuf, PipelineError> {
        let path = self.path(FRAMES);
        let mut text = self.header(FRAMES, json!({}));
        text.push_str(&corpus.to_jsonl());
        write_file(&path, &text)?;
        Ok(path)
    }

    fn graph_and_affinity(
        &self,
        corpus: &Corpus,
    ) -> Result<(Hypergraph, AffinityMatrix), PipelineError> {
        let g = Hypergraph::build(corpus, self.embedder())?;
        let a = affinity_matrix_with(
            &g,
            self.config.gamma,
            &corpus.weights,
            false,
            self.config.execution,
        )?;
        Ok((g, a))
    }

    /// Hypergraph snapshot, DOT rendering and affinity/intimacy matrices.
    pub fn build(&self) -> Result<(), PipelineError> {
        let corpus = self.load_corpus(false)?;
        let (g, a) = self.graph_and_affinity(&corpus)?;
        let s = intimacy_with(
            &normalize(&a)?,
            self.config.alpha,
            self.config.intimacy,
            self.config.execution,
        )?;

        let extra = json!({"vertices": g.vertex_count(), "hyperedges": g.edge_count()});
        write_file(
            &self.path(SNAPSHOT),
            &(self.header(SNAPSHOT, extra) + &hypergraph_snapshot(&g)),
        )?;
        let dot = format!(
            "// config_hash={} seed={}\n{}",
            self.config.hash(),
            self.config.seed,
            hypergraph_dot(&g)
        );
        write_file(&self.path(DOT), &dot)?;
        let labels = a.labels().to_vec();
        let a_csv = crate::hypergraph::matrix_csv(&labels, a.entries());
        write_file(&self.path(AFFINITY), &(self.csv_preamble() + &a_csv))?;
        let s_pre = format!(
            "{}# mode={} alpha={} iterations={} residual={} converged={}\n",
            self.csv_preamble(),
            s.mode,
            s.alpha,
            s.iterations,
            s.residual,
            s.converged
        );
        write_file(&self.path(INTIMACY), &(s_pre + &s.matrix.to_csv()))?;
        self.flush_cache()
    }

    /// Ranked candidates per source frame: `(source, candidate, rank, method, score)`.
    pub fn mine(&self) -> Result<PathBuf, PipelineError> {
        let corpus = self.load_corpus(false)?;
        let (g, a) = self.graph_and_affinity(&corpus)?;
        let method = self.config.method;
        let mut rows: Vec<(FrameId, FrameId, usize, f64)> = Vec::new();
        match method {
            MiningMethod::Hypergraph => {
                let s = intimacy_with(
                    &normalize(&a)?,
                    self.config.alpha,
                    self.config.intimacy,
                    self.config.execution,
                )?;
                let all = all_candidates(
                    &g,
                    &a,
                    &s,
                    self.config.topk,
                    self.config.epsilon_ball,
                    self.config.execution,
                )?;
                for (src, list) in all {
                    for (r, c) in list.into_iter().enumerate() {
                        rows.push((src.clone(), c.hyperedge, r + 1, c.score));
                    }
                }
            }
            MiningMethod::Link(m) => {
                let dg = project_dyadic(&g, &a, self.config.tau)?;
                let scored = score_links(&dg, m, self.config.cnc_alpha, self.config.execution)?;
                write_file(
                    &self.path(&links_file(m)),
                    &(self.csv_preamble() + &links_csv(&scored, m)),
                )?;
                for (src, list) in ranked_partners(&scored, self.config.topk) {
                    for (r, (cand, score)) in list.into_iter().enumerate() {
                        rows.push((src.clone(), cand, r + 1, score));
                    }
                }
            }
        }
        let mut w = csv::Writer::from_writer(self.csv_preamble().into_bytes());
        let path = self.path(&candidates_file(method));
        let csv_err = |e: csv::Error| io_err(&path, e);
        w.write_record(["source", "candidate", "rank", "method", "score"])
            .map_err(csv_err)?;
        for (src, cand, rank, score) in rows {
            w.write_record([
                src.as_str(),
                cand.as_str(),
                &rank.to_string(),
                method.name(),
                &score.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| io_err(&path, e))?;
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.flush_cache()?;
        Ok(path)
    }

    fn read_candidates(
        &self,
        method: MiningMethod,
    ) -> Result<BTreeMap<FrameId, Vec<FrameId>>, PipelineError> {
        let path = self.path(&candidates_file(method));
        if !path.exists() {
            return Err(PipelineError::Missing(format!(
                "missing candidate artifacts: {}",
                path.display()
            )));
        }
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(&path)
            .map_err(|e| io_err(&path, e))?;
        let mut rows: Vec<(FrameId, usize, FrameId)> = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| io_err(&path, e))?;
            let rank: usize =
                rec.get(2)
                    .unwrap_or("")
                    .parse()
                    .map_err(|e| PipelineError::Format {
                        path: path.display().to_string(),
                        message: format!("bad rank: {e}"),
                    })?;
            rows.push((FrameId::new(&rec[0]), rank, FrameId::new(&rec[1])));
        }
        rows.sort();
        let mut out: BTreeMap<FrameId, Vec<FrameId>> = BTreeMap::new();
        for (src, _, cand) in rows {
            out.entry(src).or_default().push(cand);
        }
        Ok(out)
    }

    /// Sample masks for the planned pairs and write the mined frames.
    pub fn mix(&self) -> Result<PathBuf, PipelineError> {
        let corpus = self.load_corpus(false)?;
        let ranked = self.read_candidates(self.config.method)?;
        let g = Hypergraph::build(&corpus, self.embedder())?;
        let cfg = MixPlanConfig {
            mix_ratio: self.config.mix_ratio,
            per_source: self.config.per_source,
            gamma: self.config.gamma,
            seed: self.config.seed,
        };
        let pairs = plan_mixups(&g, &ranked, &cfg, self.config.execution)?;
        let mined = mine_pairs(&g, &pairs)?;
        let path = self.path(MINED);
        let extra = json!({"method": self.config.method.name(), "pairs": pairs.len()});
        write_file(
            &path,
            &(self.header(MINED, extra) + &Corpus::mined_jsonl(&mined)),
        )?;
        self.flush_cache()?;
        Ok(path)
    }

    /// Frame histories and year-over-year heatmaps.
    pub fn temporal(&self) -> Result<(), PipelineError> {
        let corpus = self.load_corpus(false)?;
        let g = Hypergraph::build(&corpus, self.embedder())?;
        let timeline = Timeline::from_hypergraph(&g, self.config.gamma);
        let scope = self.config.temporal_scope;
        let histories = all_histories(
            &timeline,
            self.config.epsilon_temporal,
            scope,
            self.config.execution,
        )?;
        let mut text = self.header(HISTORY, json!({"epsilon": self.config.epsilon_temporal}));
        for h in &histories {
            let lineage = g
                .hyperedge(&h.frame_id)
                .map(|e| e.lineage.clone())
                .unwrap_or_default();
            let available: BTreeSet<i64> = match scope {
                HistoryScope::Lineage => timeline.times_of(&lineage),
                HistoryScope::Corpus => timeline.times(),
            };
            let class = classify_frame(h, h.t, &available);
            let line = json!({
                "kind": "frame_history",
                "frame_id": h.frame_id,
                "t": h.t,
                "lineage": lineage,
                "matches": h.matches,
                "class": class,
                "annotation": annotation(class, h),
            });
            text.push_str(&format!("{line}\n"));
        }
        write_file(&self.path(HISTORY), &text)?;

        let years: Vec<i64> = timeline.times().into_iter().collect();
        let mut scopes: Vec<Option<String>> = vec![None];
        scopes.extend(timeline.lineages().into_iter().map(Some));
        for lineage in scopes {
            let hm = temporal_heatmap(
                &timeline,
                &years,
                self.config.epsilon_temporal,
                lineage.as_deref(),
            )?;
            write_file(
                &self.path(&heatmap_file(lineage.as_deref())),
                &(self.csv_preamble() + &hm.to_csv()),
            )?;
        }
        self.flush_cache()
    }

    fn annotations(&self) -> Result<BTreeMap<FrameId, String>, PipelineError> {
        let path = self.path(HISTORY);
        if !path.exists() {
            return Ok(BTreeMap::new());
        }
        let mut out = BTreeMap::new();
        for v in jsonl_records(&path)? {
            if let (Some(id), Some(a)) = (v["frame_id"].as_str(), v["annotation"].as_str()) {
                out.insert(FrameId::new(id), a.to_string());
            }
        }
        Ok(out)
    }

    /// One generation job per document and configured control attribute.
    pub fn generate(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let corpus = self.load_corpus(true)?;
        let annotations = self.annotations()?;
        let completer = self.completer()?;
        let mut written = Vec::new();
        for &kind in &self.config.controls {
            let mut control = ControlAttribute::new(kind);
            control.directive = self.config.directive.clone();
            let mut jobs = Vec::new();
            let mut requests = Vec::new();
            for d in &corpus.documents {
                let originals: Vec<&Frame> = corpus.frames_of(&d.document_id).collect();
                let mined: Vec<&MinedFrame> = corpus.mined_for(&d.document_id).collect();
                if originals.is_empty() && mined.is_empty() {
                    continue;
                }
                let frames: Vec<Frame> = originals
                    .iter()
                    .map(|f| (*f).clone())
                    .chain(mined.iter().map(|m| m.frame.clone()))
                    .collect();
                let mut job_frames: Vec<JobFrame> = originals
                    .iter()
                    .map(|f| JobFrame {
                        frame_id: f.frame_id.clone(),
                        tuple: render_tuple(f),
                        parents: None,
                    })
                    .collect();
                job_frames.extend(mined.iter().map(|m| JobFrame {
                    frame_id: m.frame.frame_id.clone(),
                    tuple: render_tuple(&m.frame),
                    parents: Some(m.parents.clone()),
                }));
                let temporal: Vec<String> = originals
                    .iter()
                    .filter_map(|f| {
                        let a = annotations.get(&f.frame_id)?;
                        let label = f
                            .elements
                            .get(1)
                            .map_or(f.frame_id.as_str(), |e| e.text.as_str());
                        Some(format!("{label}: {a}"))
                    })
                    .collect();
                let prompt = build_generation_prompt(
                    &frames,
                    &control,
                    &temporal,
                    &corpus.schema,
                    &self.pack,
                )?;
                let job_id = format!("{kind}:{}", d.document_id);
                requests.push((
                    job_id.clone(),
                    CompletionRequest::new(prompt.clone())?.with_model(&self.config.provider_model),
                ));
                jobs.push(GenerationJob {
                    job_id,
                    document_id: d.document_id.clone(),
                    frames: job_frames,
                    control: control.clone(),
                    temporal_annotations: temporal,
                    prompt,
                    output: String::new(),
                    trace: Vec::new(),
                });
            }
            let results = completer.run(&requests);
            let entries: Vec<RunLogEntry> = results.iter().map(|(e, _)| e.clone()).collect();
            self.write_run_log(&run_log_file(kind), &entries)?;
            let mut text = self.header(&generation_file(kind), json!({"control": kind.name()}));
            let mut first_error = None;
            for (mut job, (_, r)) in jobs.into_iter().zip(results) {
                match r {
                    Ok(out) => job.output = out,
                    Err(e) => {
                        first_error.get_or_insert(e);
                        continue;
                    }
                }
                let rec = GenerationRecord {
                    kind: "generation_job".into(),
                    job,
                };
                text.push_str(&serde_json::to_string(&rec).expect("job serializes"));
                text.push('\n');
            }
            if let Some(e) = first_error {
                return Err(e.into());
            }
            let path = self.path(&generation_file(kind));
            write_file(&path, &text)?;
            written.push(path);
        }
        Ok(written)
    }

    fn read_jobs(&self, kind: ControlKind) -> Result<Vec<GenerationJob>, PipelineError> {
        let path = self.path(&generation_file(kind));
        if !path.exists() {
            return Err(PipelineError::Missing(format!(
                "missing generation artifacts: {} (run generate first)",
                path.display()
            )));
        }
        jsonl_records(&path)?
            .into_iter()
            .map(|v| {
                serde_json::from_value::<GenerationRecord>(v)
                    .map(|r| r.job)
                    .map_err(|e| PipelineError::Format {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })
            })
            .collect()
    }

    /// Metric reports for every generated variant.
    pub fn evaluate(&self) -> Result<Vec<MetricReport>, PipelineError> {
        self.evaluate_with(None)
    }

    pub fn evaluate_with(
        &self,
        fluency: Option<&dyn FluencyScorer>,
    ) -> Result<Vec<MetricReport>, PipelineError> {
        let jobs_by_control: Vec<(ControlKind, Vec<GenerationJob>)> = self
            .config
            .controls
            .iter()
            .map(|&k| self.read_jobs(k).map(|j| (k, j)))
            .collect::<Result<_, _>>()?;
        let corpus = self.load_corpus(true)?;
        let provider = self.embedder();
        let frame_text: BTreeMap<&FrameId, String> = corpus
            .frames
            .iter()
            .chain(corpus.mined.iter().map(|m| &m.frame))
            .map(|f| (&f.frame_id, f.joined_text()))
            .collect();
        let mut reports = Vec::new();
        let mut attributions = self.header(ATTRIBUTION, json!({"theta": self.config.theta}));
        for (kind, jobs) in jobs_by_control {
            for mut job in jobs {
                let doc =
                    corpus
                        .document(&job.document_id)
                        .ok_or_else(|| PipelineError::Format {
                            path: generation_file(kind),
                            message: format!("unknown document {}", job.document_id),
                        })?;
                let frames: Vec<(FrameId, String)> = job
                    .frames
                    .iter()
                    .map(|f| {
                        let text = frame_text
                            .get(&f.frame_id)
                            .cloned()
                            .unwrap_or_else(|| f.tuple.clone());
                        (f.frame_id.clone(), text)
                    })
                    .collect();
                let attribution =
                    attribute_frames(&job.output, &frames, self.config.theta, provider)?;
                job.trace = attribution.trace_links();
                let mined_ids: BTreeSet<FrameId> = job
                    .frames
                    .iter()
                    .filter(|f| f.is_mined())
                    .map(|f| f.frame_id.clone())
                    .collect();
                let report = self.report(
                    &corpus,
                    doc.document_id.clone(),
                    &doc.raw_text,
                    &job,
                    &attribution,
                    &mined_ids,
                    kind,
                    fluency,
                )?;
                let line = json!({
                    "kind": "attribution",
                    "job_id": job.job_id,
                    "document_id": job.document_id,
                    "control": kind.name(),
                    "sentences": attribution.sentences,
                    "frames": attribution.frames,
                    "trace": job.trace,
                });
                attributions.push_str(&format!("{line}\n"));
                reports.push(report);
            }
        }
        write_file(&self.path(ATTRIBUTION), &attributions)?;
        let mut csv_bytes = self.csv_preamble().into_bytes();
        MetricReport::write_csv(&reports, &mut csv_bytes)
            .map_err(|e| io_err(&self.path(METRICS_CSV), e))?;
        fs::write(self.path(METRICS_CSV), csv_bytes)
            .map_err(|e| io_err(&self.path(METRICS_CSV), e))?;
        let json = json!({
            "config_hash": self.config.hash(),
            "seed": self.config.seed,
            "reports": reports,
        });
        write_file(
            &self.path(METRICS_JSON),
            &(serde_json::to_string_pretty(&json).expect("reports serialize") + "\n"),
        )?;
        self.flush_cache()?;
        Ok(reports)
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        corpus: &Corpus,
        document_id: DocumentId,
        original: &str,
        job: &GenerationJob,
        attribution: &Attribution,
        mined_ids: &BTreeSet<FrameId>,
        kind: ControlKind,
        fluency: Option<&dyn FluencyScorer>,
    ) -> Result<MetricReport, PipelineError> {
        let provider = self.embedder();
        let generated = job.output.as_str();
        let div = diversity(original, generated, provider)?;
        let originals: Vec<Frame> = corpus.frames_of(&document_id).cloned().collect();
        let mined: Vec<MinedFrame> = corpus.mined_for(&document_id).cloned().collect();
        let md = mix_diversity(&document_id, &originals, &mined, corpus.documents.len());
        let uncovered =
            attribution.uncovered().count() as f64 / attribution.frames.len().max(1) as f64;
        let fluency = match fluency {
            Some(f) => Some(f.score(generated).map_err(|m| PipelineError::Format {
                path: f.id().to_string(),
                message: m,
            })?),
            None => None,
        };
        Ok(MetricReport {
            document_id,
            control: kind.name().to_string(),
            embedding_provider: provider.id().to_string(),
            lexical_similarity: lexical_similarity(original, generated, MAX_NGRAM),
            semantic_word_similarity: semantic_similarity(
                original,
                generated,
                Granularity::Word,
                provider,
            )?,
            semantic_sentence_similarity: semantic_similarity(
                original,
                generated,
                Granularity::Sentence,
                provider,
            )?,
            lexical_diversity: div.lexical,
            semantic_word_diversity: div.semantic_word,
            semantic_sentence_diversity: div.semantic_sentence,
            coherence: coherence(attribution, mined_ids, provider)?,
            document_diversity: md.document,
            topic_diversity: md.topic,
            content_diversity: md.content,
            uncovered_frames: uncovered,
            fluency,
        })
    }

    /// parse → build → mine → mix → temporal → generate → evaluate.
    ///
    /// The temporal stage runs before generation so that its annotations
    /// reach the generation prompt.
    pub fn run_all(&self, documents: &Path) -> Result<Vec<MetricReport>, PipelineError> {
        self.run_stage("parse", || self.parse(documents).map(drop))?;
        self.run_stage("build", || self.build())?;
        self.run_stage("mine", || self.mine().map(drop))?;
        self.run_stage("mix", || self.mix().map(drop))?;
        self.run_stage("temporal", || self.temporal())?;
        self.run_stage("generate", || self.generate().map(drop))?;
        self.evaluate()
    }

    fn run_stage(
        &self,
        name: &str,
        f: impl FnOnce() -> Result<(), PipelineError>,
    ) -> Result<(), PipelineError> {
        log::info!("stage {name}");
        f()
    }
}
