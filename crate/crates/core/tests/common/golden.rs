//! The golden corpus: scripted sessions, their exports and metrics.

use std::path::PathBuf;

use chrono::{DateTime, TimeZone, Utc};
use distill::{
    domains, evaluate_trace_set, run_pipeline, Corpus, Domain, MetricRow, PerturbationConfig, PipelineInput, Planner,
};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Bundles {
    pub domain: String,
    pub goal: String,
    pub seed: u64,
    pub trials: usize,
    pub bundles: Vec<PipelineInput>,
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn bundles() -> Bundles {
    serde_json::from_str(&std::fs::read_to_string(fixture("golden_bundles.json")).unwrap()).unwrap()
}

pub fn domain(b: &Bundles) -> Domain {
    domains::builtin(&b.domain).unwrap()
}

pub fn fixed_now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap()
}

pub fn corpus(d: &Domain, b: &Bundles) -> Corpus {
    let mut corpus = Corpus::default();
    for input in &b.bundles {
        let session = run_pipeline(d, input, fixed_now()).unwrap_or_else(|e| panic!("{}: {e}", input.source_id));
        corpus.extend(session.corpus());
    }
    corpus
}

pub fn metrics(d: &Domain, b: &Bundles, corpus: &Corpus, trials: usize) -> Vec<MetricRow> {
    let goals = d.goal(&b.goal).unwrap();
    evaluate_trace_set(
        &Planner::new(d),
        corpus,
        goals,
        &PerturbationConfig::new(b.seed, trials),
    )
    .unwrap()
}

/// Compares `actual` with the committed fixture, or rewrites the fixture
/// when `DISTILL_BLESS` is set.
pub fn check_or_bless(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("DISTILL_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("{} missing; rerun with DISTILL_BLESS=1", path.display()));
    assert!(
        expected == actual,
        "{name} is stale; rerun with DISTILL_BLESS=1 and review the diff"
    );
}
