use std::fs;
use std::path::Path;

use framegraph::config::PipelineConfig;
use framegraph::pipeline::{self, Pipeline};
use framegraph::toy;

fn setup(dir: &Path, extra: &str) -> Pipeline {
    toy::raw_corpus()
        .save(&dir.join("documents.jsonl"))
        .unwrap();
    toy::canned_responses()
        .save(&dir.join("canned.jsonl"))
        .unwrap();
    let text = format!("provider = mock\ncanned_responses = canned.jsonl\n{extra}");
    fs::write(dir.join("config.txt"), text).unwrap();
    let cfg = PipelineConfig::load(&dir.join("config.txt")).unwrap();
    Pipeline::new(cfg, dir.join("out")).unwrap()
}

#[test]
fn full_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), "");
    let reports = p.run_all(&dir.path().join("documents.jsonl")).unwrap();
    assert_eq!(reports.len(), 6);
    for name in [
        pipeline::FRAMES,
        pipeline::PARSE_LOG,
        pipeline::SNAPSHOT,
        pipeline::DOT,
        pipeline::AFFINITY,
        pipeline::INTIMACY,
        "candidates_hypergraph.csv",
        pipeline::MINED,
        pipeline::HISTORY,
        "heatmap_all.csv",
        "heatmap_acme.csv",
        "generation_compact.jsonl",
        "run_log_compact.jsonl",
        pipeline::METRICS_CSV,
        pipeline::METRICS_JSON,
        pipeline::ATTRIBUTION,
    ] {
        let text = fs::read_to_string(p.path(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(
            text.contains(&p.config().hash()),
            "{name} lacks the config hash"
        );
    }
    let corpus = p.load_corpus(true).unwrap();
    assert_eq!(corpus.frames.len(), 30);
    assert!(!corpus.mined.is_empty());
}

#[test]
fn link_method_writes_its_own_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), "method = jaccard\ntau = 0.5\n");
    p.parse(&dir.path().join("documents.jsonl")).unwrap();
    let path = p.mine().unwrap();
    assert!(path.ends_with("candidates_jaccard.csv"));
    let links = fs::read_to_string(p.path("links_jaccard.csv")).unwrap();
    assert_eq!(links.lines().nth(1), Some("u,v,method,score"));
    p.mix().unwrap();
}

#[test]
fn evaluate_without_generation_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), "");
    p.parse(&dir.path().join("documents.jsonl")).unwrap();
    let err = p.evaluate().unwrap_err();
    assert_eq!(err.kind(), "missing_input");
    let v: serde_json::Value = serde_json::from_str(&err.to_json("evaluate")).unwrap();
    assert!(v["error"]["message"]
        .as_str()
        .unwrap()
        .contains("missing generation artifacts"));
}

#[test]
fn mix_without_candidates_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), "");
    p.parse(&dir.path().join("documents.jsonl")).unwrap();
    assert_eq!(p.mix().unwrap_err().kind(), "missing_input");
}
