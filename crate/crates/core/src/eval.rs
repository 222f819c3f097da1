//! Evaluation harness: trace and plan lengths, goal achievement, and plan
//! length under randomized item placements.
//!
//! Placements are drawn per source id, so every phase variant of one
//! source is measured against the same perturbed states.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{conventions, GoalSet, Predicate, WorldState};
use crate::error::{Error, Result};
use crate::grouping::{plan_grouped, GroupedSpec};
use crate::planner::Planner;
use crate::trace::{refine_segments, Achievement, AchievementCategory, Phase, Trace};

pub const DEFAULT_RETRY_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub seed: u64,
    pub trials: usize,
    /// Candidate placements tried per trial before the trial is discarded.
    pub retry_limit: usize,
}

impl PerturbationConfig {
    pub fn new(seed: u64, trials: usize) -> Self {
        PerturbationConfig {
            seed,
            trials,
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("at least one perturbation trial is required".into()));
        }
        if self.retry_limit == 0 {
            return Err(Error::Config("retry limit must be at least 1".into()));
        }
        Ok(())
    }
}

/// Something whose plan length is measured: a trace, or a grouping of one.
#[derive(Debug, Clone, Copy)]
pub enum EvalSpec<'a> {
    Trace(&'a Trace),
    Grouped { spec: &'a GroupedSpec, trace: &'a Trace },
}

/// Plan length and final state, or `None` when no plan exists.
pub fn measure(planner: &Planner<'_>, spec: EvalSpec<'_>, state: &WorldState) -> Result<Option<(usize, WorldState)>> {
    let outcome = match spec {
        EvalSpec::Trace(trace) => refine_segments(planner, trace, state).map(|(plan, _, end)| (plan.len(), end)),
        EvalSpec::Grouped { spec, trace } => {
            plan_grouped(planner, spec, trace, state).map(|g| (g.plan.len(), g.final_state))
        }
    };
    match outcome {
        Ok(found) => Ok(Some(found)),
        Err(Error::Unsolvable { .. } | Error::GroupUnsolvable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    /// `None` when every candidate was rejected.
    pub state: Option<WorldState>,
    /// Candidates rejected before acceptance (or before giving up).
    pub rejected: Vec<WorldState>,
}

impl Trial {
    pub fn discarded(&self) -> bool {
        self.state.is_none()
    }
}

/// Mixes a source id into a base seed (FNV-1a), so each source gets its
/// own reproducible placement stream.
pub fn source_seed(seed: u64, source_id: &str) -> u64 {
    let hash = source_id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    });
    seed ^ hash
}

/// Moves every item that has a location in `initial` to a uniformly drawn
/// location. People, rooms and everything else stay put.
pub fn random_placement(planner: &Planner<'_>, initial: &WorldState, rng: &mut impl Rng) -> WorldState {
    let domain = planner.domain();
    let locations = domain.objects_of(conventions::LOCATION_TYPE);
    let mut state = initial.clone();
    for item in domain.objects_of(conventions::ITEM_TYPE) {
        let Some(current) = initial
            .iter()
            .find(|a| a.name == conventions::ITEM_AT && a.args.first() == Some(item))
            .cloned()
        else {
            continue;
        };
        let to = &locations[rng.random_range(0..locations.len() as u32) as usize];
        state.remove(&current);
        state.insert(Predicate::new(conventions::ITEM_AT, [item.as_str(), to.as_str()]));
    }
    state
}

/// Draws `config.trials` placements, keeping a candidate only if every
/// registered spec still has a plan from it.
pub fn perturb_environment(
    planner: &Planner<'_>,
    initial: &WorldState,
    config: &PerturbationConfig,
    registered: &[EvalSpec<'_>],
) -> Result<Vec<Trial>> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trials = Vec::with_capacity(config.trials);
    for index in 0..config.trials {
        let mut trial = Trial {
            index,
            state: None,
            rejected: Vec::new(),
        };
        for _ in 0..config.retry_limit {
            let candidate = random_placement(planner, initial, &mut rng);
            if admissible(planner, registered, &candidate)? {
                trial.state = Some(candidate);
                break;
            }
            trial.rejected.push(candidate);
        }
        trials.push(trial);
    }
    if trials.iter().all(Trial::discarded) {
        return Err(Error::PerturbationExhausted { trials: config.trials });
    }
    Ok(trials)
}

fn admissible(planner: &Planner<'_>, registered: &[EvalSpec<'_>], state: &WorldState) -> Result<bool> {
    for spec in registered {
        if measure(planner, *spec, state)?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Re-plans every rejected candidate and confirms at least one registered
/// spec really has no plan from it.
pub fn audit_rejections(planner: &Planner<'_>, registered: &[EvalSpec<'_>], trials: &[Trial]) -> Result<bool> {
    for state in trials.iter().flat_map(|t| &t.rejected) {
        if admissible(planner, registered, state)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub plan_length: Option<usize>,
    pub discarded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRow {
    pub trace_id: String,
    pub source_id: String,
    pub phase: Phase,
    pub trace_length: usize,
    pub plan_length: Option<usize>,
    pub achievement: Option<Achievement>,
    pub trials: Vec<TrialOutcome>,
    pub error: Option<String>,
}

impl MetricRow {
    pub fn category(&self) -> Option<AchievementCategory> {
        self.achievement.map(|a| a.category())
    }

    /// Mean plan length over trials that produced a plan.
    pub fn mean_perturbed_length(&self) -> Option<f64> {
        let lengths: Vec<usize> = self.trials.iter().filter_map(|t| t.plan_length).collect();
        if lengths.is_empty() {
            None
        } else {
            Some(lengths.iter().sum::<usize>() as f64 / lengths.len() as f64)
        }
    }
}

/// A set of traces and groupings, keyed by source id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub traces: Vec<Trace>,
    pub specs: Vec<GroupedSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorpusEntry {
    Trace(Trace),
    Grouped(GroupedSpec),
}

impl Corpus {
    pub fn push(&mut self, entry: CorpusEntry) {
        match entry {
            CorpusEntry::Trace(t) => self.traces.push(t),
            CorpusEntry::Grouped(g) => self.specs.push(g),
        }
    }

    /// Parses JSON lines; blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut corpus = Corpus::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            corpus.push(serde_json::from_str(line)?);
        }
        Ok(corpus)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.traces {
            out.push_str(&t.to_json_line());
            out.push('\n');
        }
        for g in &self.specs {
            out.push_str(&serde_json::to_string(g).expect("grouped spec serializes"));
            out.push('\n');
        }
        out
    }

    pub fn extend(&mut self, other: Corpus) {
        self.traces.extend(other.traces);
        self.specs.extend(other.specs);
    }

    pub fn sources(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .traces
            .iter()
            .map(|t| t.source_id.as_str())
            .chain(self.specs.iter().map(|g| g.source_id.as_str()))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn trace(&self, id: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.id == id)
    }
}

struct Member<'a> {
    trace_id: String,
    phase: Phase,
    trace_length: usize,
    spec: std::result::Result<EvalSpec<'a>, String>,
}

fn members<'a>(corpus: &'a Corpus, source: &str) -> Vec<Member<'a>> {
    let mut out: Vec<Member<'a>> = corpus
        .traces
        .iter()
        .filter(|t| t.source_id == source)
        .map(|t| Member {
            trace_id: t.id.clone(),
            phase: t.phase,
            trace_length: t.len(),
            spec: Ok(EvalSpec::Trace(t)),
        })
        .collect();
    for g in corpus.specs.iter().filter(|g| g.source_id == source) {
        let trace = corpus.trace(&g.trace_id);
        out.push(Member {
            trace_id: g.id.clone(),
            phase: Phase::Grouped,
            trace_length: trace.map_or(0, Trace::len),
            spec: trace
                .map(|trace| EvalSpec::Grouped { spec: g, trace })
                .ok_or_else(|| format!("grouping refers to missing trace {}", g.trace_id)),
        });
    }
    out
}

/// Computes one metric row per trace and per grouping in the corpus.
/// Failures are recorded in their row; only configuration errors abort.
pub fn evaluate_trace_set(
    planner: &Planner<'_>,
    corpus: &Corpus,
    goals: &GoalSet,
    config: &PerturbationConfig,
) -> Result<Vec<MetricRow>> {
    config.check()?;
    let initial = planner.domain().initial_state();
    let mut rows = Vec::new();
    for source in corpus.sources() {
        let members = members(corpus, source);
        let mut source_rows = Vec::with_capacity(members.len());
        let mut registered = Vec::new();
        for m in &members {
            let mut row = MetricRow {
                trace_id: m.trace_id.clone(),
                source_id: source.to_string(),
                phase: m.phase,
                trace_length: m.trace_length,
                plan_length: None,
                achievement: None,
                trials: Vec::new(),
                error: None,
            };
            match &m.spec {
                Err(e) => row.error = Some(e.clone()),
                Ok(spec) => match measure(planner, *spec, initial) {
                    Ok(Some((length, end))) => {
                        row.plan_length = Some(length);
                        row.achievement = Some(Achievement::in_state(&end, goals));
                        registered.push(*spec);
                    }
                    Ok(None) => {
                        row.achievement = Some(Achievement::none(goals));
                        row.error = Some("no plan in the original environment".into());
                    }
                    Err(e) => row.error = Some(e.to_string()),
                },
            }
            source_rows.push(row);
        }

        let seeded = PerturbationConfig {
            seed: source_seed(config.seed, source),
            ..*config
        };
        let trials = match perturb_environment(planner, initial, &seeded, &registered) {
            Ok(trials) => trials,
            Err(Error::PerturbationExhausted { .. }) => {
                for row in &mut source_rows {
                    row.error
                        .get_or_insert_with(|| "no admissible placement in any trial".into());
                }
                (0..config.trials)
                    .map(|index| Trial {
                        index,
                        state: None,
                        rejected: Vec::new(),
                    })
                    .collect()
            }
            Err(e) => return Err(e),
        };

        for (m, row) in members.iter().zip(&mut source_rows) {
            for trial in &trials {
                let mut outcome = TrialOutcome {
                    trial: trial.index,
                    plan_length: None,
                    discarded: trial.discarded(),
                };
                if let (Some(state), Ok(spec)) = (&trial.state, &m.spec) {
                    match measure(planner, *spec, state) {
                        Ok(found) => outcome.plan_length = found.map(|(length, _)| length),
                        Err(e) => {
                            row.error.get_or_insert_with(|| e.to_string());
                        }
                    }
                }
                row.trials.push(outcome);
            }
        }
        rows.extend(source_rows);
    }
    rows.sort_by(|a, b| (&a.trace_id, a.phase).cmp(&(&b.trace_id, b.phase)));
    Ok(rows)
}

/// Column order of the metrics CSV.
pub const CSV_COLUMNS: [&str; 12] = [
    "trace_id",
    "source_id",
    "phase",
    "trace_length",
    "plan_length",
    "achievement",
    "goals_achieved",
    "goals_total",
    "trial",
    "perturbed_plan_length",
    "discarded",
    "error",
];

#[derive(Debug, Serialize, Deserialize)]
struct CsvLine {
    trace_id: String,
    source_id: String,
    phase: Phase,
    trace_length: usize,
    plan_length: Option<usize>,
    achievement: Option<AchievementCategory>,
    goals_achieved: Option<usize>,
    goals_total: Option<usize>,
    trial: usize,
    perturbed_plan_length: Option<usize>,
    discarded: bool,
    error: Option<String>,
}

/// Writes one line per (row, trial), ordered by trace id, phase, trial.
pub fn write_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut sorted: Vec<&MetricRow> = rows.iter().collect();
    sorted.sort_by(|a, b| (&a.trace_id, a.phase).cmp(&(&b.trace_id, b.phase)));
    let mut w = csv::Writer::from_writer(out);
    for row in sorted {
        let mut trials = row.trials.clone();
        trials.sort_by_key(|t| t.trial);
        for t in trials {
            w.serialize(CsvLine {
                trace_id: row.trace_id.clone(),
                source_id: row.source_id.clone(),
                phase: row.phase,
                trace_length: row.trace_length,
                plan_length: row.plan_length,
                achievement: row.category(),
                goals_achieved: row.achievement.map(|a| a.achieved),
                goals_total: row.achievement.map(|a| a.total),
                trial: t.trial,
                perturbed_plan_length: t.plan_length,
                discarded: t.discarded,
                error: row.error.clone(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[MetricRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Writes the metrics CSV to `path`. Refuses an empty row set.
pub fn emit_csv(rows: &[MetricRow], path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("no metric rows to write".into()));
    }
    let file = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(file))
}

/// Reads rows back from [`write_csv`] output.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<MetricRow>> {
    let mut rows: Vec<MetricRow> = Vec::new();
    for line in csv::Reader::from_reader(input).deserialize() {
        let line: CsvLine = line?;
        let outcome = TrialOutcome {
            trial: line.trial,
            plan_length: line.perturbed_plan_length,
            discarded: line.discarded,
        };
        if let Some(last) = rows.last_mut() {
            if last.trace_id == line.trace_id && last.phase == line.phase {
                last.trials.push(outcome);
                continue;
            }
        }
        let achievement = match (line.goals_achieved, line.goals_total) {
            (Some(achieved), Some(total)) => Some(Achievement { achieved, total }),
            _ => None,
        };
        rows.push(MetricRow {
            trace_id: line.trace_id,
            source_id: line.source_id,
            phase: line.phase,
            trace_length: line.trace_length,
            plan_length: line.plan_length,
            achievement,
            trials: vec![outcome],
            error: line.error,
        });
    }
    Ok(rows)
}

/// Mean perturbed plan length per (source, phase).
pub fn mean_perturbed_by_phase(rows: &[MetricRow]) -> BTreeMap<(String, Phase), f64> {
    rows.iter()
        .filter_map(|r| Some(((r.source_id.clone(), r.phase), r.mean_perturbed_length()?)))
        .collect()
}
