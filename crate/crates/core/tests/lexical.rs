mod common;

use std::collections::BTreeSet;

use common::CUE_PAIRS;

use distill::grouping::PriorityGroup;
use distill::lexical::{pattern_table, summarize_alignment, summarize_reports, Detector};
use distill::{detect_features, score_alignment, CueCategory, GroupedSpec};
use proptest::prelude::*;
use serde::Deserialize;

fn fires(text: &str, category: CueCategory, id: &str) -> bool {
    detect_features(text).of(category).any(|m| m.pattern_id == id)
}

fn spec(groups: &[Vec<u32>]) -> GroupedSpec {
    GroupedSpec {
        id: "g".into(),
        source_id: "s".into(),
        trace_id: "t".into(),
        groups: groups
            .iter()
            .zip(1..)
            .map(|(ids, priority)| PriorityGroup {
                priority,
                step_ids: ids.clone(),
            })
            .collect(),
    }
}

#[test]
fn every_pattern_has_a_positive_and_negative_example() {
    let covered: BTreeSet<(CueCategory, &str)> = CUE_PAIRS.iter().map(|&(c, id, _, _)| (c, id)).collect();
    let table: BTreeSet<(CueCategory, &str)> = pattern_table().iter().map(|p| (p.category, p.id)).collect();
    assert_eq!(covered, table);
    for &(category, id, positive, negative) in CUE_PAIRS {
        assert!(
            fires(positive, category, id),
            "{category}/{id} should fire on {positive:?}"
        );
        assert!(
            !fires(negative, category, id),
            "{category}/{id} should not fire on {negative:?}"
        );
    }
}

#[test]
fn substrings_fire_without_word_boundaries() {
    assert!(fires("go down the hallway", CueCategory::Grouping, "all"));
    assert!(fires("hand it over", CueCategory::Grouping, "and"));
}

#[test]
fn spans_are_character_offsets() {
    let text = "Bring the café order, then the linens";
    let report = detect_features(text);
    let chars: Vec<char> = text.chars().collect();
    for m in &report.matches {
        let slice: String = chars[m.start..m.end].iter().collect();
        assert_eq!(slice, m.text);
    }
    let then = report
        .of(CueCategory::Sequence)
        .find(|m| m.pattern_id == "then")
        .unwrap();
    assert_eq!(then.start, 22);
}

#[test]
fn empty_text_has_no_cues() {
    let r = detect_features("");
    assert!(r.matches.is_empty());
    assert_eq!(r.tokens, 0);
    assert!(CueCategory::ALL.iter().all(|&c| !r.has(c)));
}

#[test]
fn custom_verbs_are_escaped() {
    let d = Detector::new(&["a.b"]);
    assert!(d
        .detect("and a.b")
        .of(CueCategory::Step)
        .any(|m| m.pattern_id == "and-verb"));
    assert!(!d
        .detect("and axb")
        .of(CueCategory::Step)
        .any(|m| m.pattern_id == "and-verb"));
}

#[test]
fn report_summary_counts_texts() {
    let reports: Vec<_> = ["then go", "go", "if so, go and stop"]
        .iter()
        .map(|t| detect_features(t))
        .collect();
    let summary = summarize_reports(&reports);
    let seq = summary.iter().find(|s| s.category == CueCategory::Sequence).unwrap();
    assert_eq!((seq.texts, seq.texts_with_cue), (3, 1));
    let cond = summary.iter().find(|s| s.category == CueCategory::Conditional).unwrap();
    assert_eq!(cond.texts_with_cue, 1);
}

#[derive(Deserialize)]
struct Labeled {
    text: String,
    groups: Vec<Vec<u32>>,
    sequential: bool,
    grouping: bool,
}

#[test]
fn hand_labeled_alignment_pairs() {
    let pairs: Vec<Labeled> = serde_json::from_str(include_str!("fixtures/alignment_pairs.json")).unwrap();
    assert_eq!(pairs.len(), 20);
    let mut results = Vec::new();
    for p in &pairs {
        let r = score_alignment(&detect_features(&p.text), &spec(&p.groups));
        assert_eq!(
            (r.sequential_aligned, r.grouping_aligned),
            (p.sequential, p.grouping),
            "{:?} {:?}",
            p.text,
            p.groups
        );
        assert_eq!(r.participant_aligned, p.sequential || p.grouping);
        results.push(r);
    }
    let summary = summarize_alignment(&results);
    let expected = pairs.iter().filter(|p| p.sequential || p.grouping).count();
    assert_eq!(summary.aligned, expected);
    assert!(summary.cue_bearing_rate >= summary.rate);
}

proptest! {
    #[test]
    fn appending_text_never_loses_cues(a in "[a-zA-Z ,.&]{0,40}", b in "[a-zA-Z ,.&]{0,40}") {
        let left = detect_features(&a);
        let joined = detect_features(&format!("{a}\n{b}"));
        for c in CueCategory::ALL {
            prop_assert!(joined.count(c) >= left.count(c));
            prop_assert!(!left.has(c) || joined.has(c));
        }
    }
}
