//! Lexical cue detection in task descriptions, and cue/structure alignment.
//!
//! Patterns are applied as written: no word boundaries, no lowercasing
//! beyond the character classes in the patterns themselves. `[aA]ll` thus
//! also fires inside "finally", and `[aA]fter` inside "afterwards".

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use fancy_regex::Regex;
use serde::{Deserialize, Serialize};

use crate::grouping::GroupedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CueCategory {
    Sequence,
    Step,
    Conditional,
    Grouping,
}

impl CueCategory {
    pub const ALL: [CueCategory; 4] = [
        CueCategory::Sequence,
        CueCategory::Step,
        CueCategory::Conditional,
        CueCategory::Grouping,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CueCategory::Sequence => "sequence",
            CueCategory::Step => "step",
            CueCategory::Conditional => "conditional",
            CueCategory::Grouping => "grouping",
        }
    }
}

impl fmt::Display for CueCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One entry of the pattern table. Patterns are kept verbatim; only the
/// verb placeholder is substituted when a detector is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CuePattern {
    pub id: &'static str,
    pub category: CueCategory,
    pub pattern: &'static str,
}

const fn cue(id: &'static str, category: CueCategory, pattern: &'static str) -> CuePattern {
    CuePattern { id, category, pattern }
}

const SEQUENCE_PATTERNS: [(&str, &str); 8] = [
    ("then", "[tT]hen"),
    ("finally", "[fF]inally"),
    ("next", "[nN]ext"),
    ("afterwards", "[aA]fterwards"),
    ("in-that-order", "in that order"),
    ("after", "[aA]fter"),
    ("first", "[fF]irst"),
    ("followed-by", "[fF]ollowed by"),
];

/// Placeholder in step patterns replaced by the verb lexicon.
pub const VERB_PLACEHOLDER: &str = "VERB";

pub const DEFAULT_VERBS: [&str; 12] = [
    "deliver", "bring", "take", "give", "grab", "get", "move", "go", "approach", "request", "drop", "hand",
];

/// The full pattern table. Steps reuse every sequence pattern.
pub fn pattern_table() -> &'static [CuePattern] {
    static TABLE: OnceLock<Vec<CuePattern>> = OnceLock::new();
    TABLE.get_or_init(|| {
        use CueCategory::*;
        let mut table: Vec<CuePattern> = SEQUENCE_PATTERNS.iter().map(|&(id, p)| cue(id, Sequence, p)).collect();
        table.extend(SEQUENCE_PATTERNS.iter().map(|&(id, p)| cue(id, Step, p)));
        table.extend([
            cue("and-verb", Step, "and( also)? VERB"),
            cue("punctuation", Step, "([.?!,] )"),
            cue("also", Step, "also"),
            cue("if", Conditional, "[iI]f (?!you could)"),
            cue("in-case", Conditional, "in case"),
            cue("and", Grouping, "[aA]nd"),
            cue("both", Grouping, "[bB]oth"),
            cue("all", Grouping, "[aA]ll"),
            cue("together", Grouping, "[tT]ogether"),
            cue("ampersand", Grouping, "&"),
            cue("as-well", Grouping, "[aA]s well"),
            cue("also", Grouping, "[aA]lso"),
            cue("at-the-same-time", Grouping, "[aA]t the same time"),
        ]);
        table
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueMatch {
    pub category: CueCategory,
    pub pattern_id: String,
    /// Character offsets, end exclusive.
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalReport {
    pub matches: Vec<CueMatch>,
    pub presence: BTreeMap<CueCategory, bool>,
    pub tokens: usize,
}

impl LexicalReport {
    pub fn count(&self, category: CueCategory) -> usize {
        self.matches.iter().filter(|m| m.category == category).count()
    }

    pub fn has(&self, category: CueCategory) -> bool {
        self.presence.get(&category).copied().unwrap_or(false)
    }

    pub fn of(&self, category: CueCategory) -> impl Iterator<Item = &CueMatch> {
        self.matches.iter().filter(move |m| m.category == category)
    }
}

/// Compiled pattern table for one verb lexicon.
#[derive(Debug)]
pub struct Detector {
    compiled: Vec<(CuePattern, Regex)>,
}

impl Detector {
    pub fn new<S: AsRef<str>>(verbs: &[S]) -> Self {
        let alternatives: Vec<String> = verbs
            .iter()
            .map(|v| fancy_regex::escape(v.as_ref()).into_owned())
            .collect();
        let verb = format!("(?:{})", alternatives.join("|"));
        let compiled = pattern_table()
            .iter()
            .map(|p| {
                let source = p.pattern.replace(VERB_PLACEHOLDER, &verb);
                let re = Regex::new(&source).expect("pattern table compiles");
                (*p, re)
            })
            .collect();
        Detector { compiled }
    }

    /// Detector for the default verb lexicon, compiled once.
    pub fn default_lexicon() -> &'static Detector {
        static DEFAULT: OnceLock<Detector> = OnceLock::new();
        DEFAULT.get_or_init(|| Detector::new(&DEFAULT_VERBS))
    }

    pub fn detect(&self, text: &str) -> LexicalReport {
        let mut matches = Vec::new();
        for (p, re) in &self.compiled {
            for m in re.find_iter(text) {
                // backtracking limits are the only failure mode; patterns here never hit them
                let Ok(m) = m else { continue };
                let start = text[..m.start()].chars().count();
                matches.push(CueMatch {
                    category: p.category,
                    pattern_id: p.id.to_string(),
                    start,
                    end: start + m.as_str().chars().count(),
                    text: m.as_str().to_string(),
                });
            }
        }
        let presence = CueCategory::ALL
            .iter()
            .map(|&c| (c, matches.iter().any(|m| m.category == c)))
            .collect();
        LexicalReport {
            matches,
            presence,
            tokens: text.split_whitespace().count(),
        }
    }
}

/// Cue detection with the default verb lexicon.
pub fn detect_features(text: &str) -> LexicalReport {
    Detector::default_lexicon().detect(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub sequential_cues: usize,
    pub grouping_cues: usize,
    pub sequential_aligned: bool,
    pub grouping_aligned: bool,
    pub participant_aligned: bool,
}

/// Does the grouping structure reflect the ordering language used?
///
/// Grouping cues expect some group of two or more steps; sequential cues
/// expect at least two priority groups.
pub fn score_alignment(report: &LexicalReport, spec: &GroupedSpec) -> AlignmentResult {
    let sequential_cues = report.count(CueCategory::Sequence);
    let grouping_cues = report.count(CueCategory::Grouping);
    let sequential_aligned = sequential_cues > 0 && spec.groups.len() >= 2;
    let grouping_aligned = grouping_cues > 0 && spec.max_group_size() >= 2;
    AlignmentResult {
        sequential_cues,
        grouping_cues,
        sequential_aligned,
        grouping_aligned,
        participant_aligned: sequential_aligned || grouping_aligned,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub total: usize,
    pub cue_bearing: usize,
    pub aligned: usize,
    /// Over all specs; cue-free specs count as not aligned.
    pub rate: f64,
    /// Over specs with at least one sequential or grouping cue.
    pub cue_bearing_rate: f64,
}

pub fn summarize_alignment(results: &[AlignmentResult]) -> AlignmentSummary {
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let cue_bearing = results
        .iter()
        .filter(|r| r.sequential_cues + r.grouping_cues > 0)
        .count();
    let aligned = results.iter().filter(|r| r.participant_aligned).count();
    AlignmentSummary {
        total: results.len(),
        cue_bearing,
        aligned,
        rate: ratio(aligned, results.len()),
        cue_bearing_rate: ratio(aligned, cue_bearing),
    }
}

/// Per-category frequencies over a corpus of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: CueCategory,
    pub texts: usize,
    pub texts_with_cue: usize,
    pub matches: usize,
    pub mean_tokens: f64,
}

pub fn summarize_reports(reports: &[LexicalReport]) -> Vec<CategorySummary> {
    let mean_tokens = if reports.is_empty() {
        0.0
    } else {
        reports.iter().map(|r| r.tokens).sum::<usize>() as f64 / reports.len() as f64
    };
    CueCategory::ALL
        .iter()
        .map(|&category| CategorySummary {
            category,
            texts: reports.len(),
            texts_with_cue: reports.iter().filter(|r| r.has(category)).count(),
            matches: reports.iter().map(|r| r.count(category)).sum(),
            mean_tokens,
        })
        .collect()
}
