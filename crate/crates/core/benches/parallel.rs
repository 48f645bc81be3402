use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use framegraph::embedding::TrigramEmbedder;
use framegraph::hypergraph::{
    affinity_matrix_with, all_candidates, intimacy_with, normalize, EmbeddingTable, Hypergraph,
    IntimacyMode,
};
use framegraph::linkpred::{project_dyadic, score_links, LinkMethod};
use framegraph::mixup::{plan_mixups, MixPlanConfig};
use framegraph::temporal::{all_histories, HistoryScope, Timeline};
use framegraph::{Execution, Frame, FrameId, FrameSchema, HierarchyWeights};

const EVENTS: [&str; 8] = [
    "cyber attack",
    "rate hike",
    "supply shock",
    "lawsuit",
    "outage",
    "recall",
    "strike",
    "fraud",
];
const DRIVERS: [&str; 6] = [
    "weak controls",
    "inflation",
    "port closures",
    "new rules",
    "old assets",
    "labor costs",
];
const IMPACTS: [&str; 5] = [
    "lost revenue",
    "higher costs",
    "fines",
    "delays",
    "reputational harm",
];
const CATEGORIES: [&str; 4] = ["technology", "market", "operational", "regulatory"];

fn synthetic(n: usize) -> Hypergraph {
    let schema = FrameSchema::open();
    let frames: Vec<(Frame, String)> = (0..n)
        .map(|i| {
            let doc = format!("d{:02}-{}", i % 12, 2019 + (i / 12) % 3);
            let texts = [
                CATEGORIES[i % 4].to_string(),
                format!("{} {}", EVENTS[i % 8], i % 7),
                DRIVERS[(i / 3) % 6].to_string(),
                IMPACTS[(i / 5) % 5].to_string(),
            ];
            let f = Frame::from_texts(format!("{doc}:f{i:04}"), doc, &schema, &texts)
                .with_time(2019 + ((i / 12) % 3) as i64);
            (f, format!("d{:02}", i % 12))
        })
        .collect();
    let table =
        EmbeddingTable::for_frames(frames.iter().map(|(f, _)| f), &TrigramEmbedder::default())
            .unwrap();
    Hypergraph::from_frames(schema, frames, &table).unwrap()
}

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench(c: &mut Criterion) {
    let g = synthetic(360);
    let w = HierarchyWeights::default();
    let a = affinity_matrix_with(&g, 1.0, &w, false, Execution::Parallel).unwrap();
    let abar = normalize(&a).unwrap();
    let s = intimacy_with(&abar, 0.85, IntimacyMode::Literal, Execution::Parallel).unwrap();
    let dyadic = project_dyadic(&g, &a, 0.7).unwrap();
    let ranked: BTreeMap<FrameId, Vec<FrameId>> =
        all_candidates(&g, &a, &s, 5, 0.5, Execution::Parallel)
            .unwrap()
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().map(|c| c.hyperedge).collect()))
            .collect();
    let plan = MixPlanConfig {
        mix_ratio: 1.0,
        per_source: 2,
        gamma: 1.0,
        seed: 7,
    };
    let timeline = Timeline::from_hypergraph(&g, 1.0);

    let mut group = c.benchmark_group("stages");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("affinity", name), &exec, |b, &e| {
            b.iter(|| affinity_matrix_with(black_box(&g), 1.0, &w, false, e).unwrap())
        });
        group.bench_with_input(
            BenchmarkId::new("intimacy_iterative", name),
            &exec,
            |b, &e| {
                b.iter(|| {
                    intimacy_with(black_box(&abar), 0.85, IntimacyMode::Iterative, e).unwrap()
                })
            },
        );
        group.bench_with_input(BenchmarkId::new("candidates", name), &exec, |b, &e| {
            b.iter(|| all_candidates(black_box(&g), &a, &s, 5, 0.5, e).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("link_cnc", name), &exec, |b, &e| {
            b.iter(|| {
                score_links(
                    black_box(&dyadic),
                    LinkMethod::CommonNeighborCentrality,
                    0.8,
                    e,
                )
                .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("mask_planning", name), &exec, |b, &e| {
            b.iter(|| plan_mixups(black_box(&g), &ranked, &plan, e).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("histories", name), &exec, |b, &e| {
            b.iter(|| all_histories(black_box(&timeline), 0.8, HistoryScope::Lineage, e).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
