//! Sessions walk one user through the five phases: describe, demonstrate,
//! filter, abstract, group. Sessions persist as one JSON file each.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::abstraction::{abstract_trace, AbstractionChoice};
use crate::domain::{conventions, ActionRef, Domain};
use crate::error::{Error, Result};
use crate::eval::Corpus;
use crate::filter::{apply_overrides, filter_trace, CriticalityOverride, FilterConfig, FilterResult};
use crate::grouping::{plan_grouped, GroupedSpec, PriorityGroup};
use crate::lexical::{detect_features, score_alignment, AlignmentResult, Detector, LexicalReport};
use crate::planner::{PlanSummary, Planner};
use crate::trace::{validate_trace, NaturalLanguageSpec, Phase, StepId, Trace};

pub const FIRST_PHASE: u8 = 1;
pub const LAST_PHASE: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescribePayload {
    pub text: String,
    #[serde(default)]
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemonstratePayload {
    pub actions: Vec<ActionRef>,
    #[serde(default)]
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPayload {
    #[serde(default)]
    pub overrides: Vec<CriticalityOverride>,
    /// Only read on the first submission, when filtering runs.
    #[serde(default)]
    pub strict_simulation: bool,
    #[serde(default)]
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractPayload {
    #[serde(default)]
    pub choices: Vec<AbstractionChoice>,
    /// Abstract every step; overrides `choices`.
    #[serde(default)]
    pub abstract_all: bool,
    #[serde(default)]
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPayload {
    pub groups: Vec<PriorityGroup>,
    #[serde(default)]
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", content = "payload", rename_all = "kebab-case")]
pub enum PhasePayload {
    Describe(DescribePayload),
    Demonstrate(DemonstratePayload),
    Filter(FilterPayload),
    Abstract(AbstractPayload),
    Group(GroupPayload),
}

impl PhasePayload {
    /// Decodes the request body for phase `phase` (1..=5).
    pub fn from_json(phase: u8, body: serde_json::Value) -> Result<Self> {
        let bad = |e: serde_json::Error| Error::InvalidPayload(e.to_string());
        Ok(match phase {
            1 => PhasePayload::Describe(serde_json::from_value(body).map_err(bad)?),
            2 => PhasePayload::Demonstrate(serde_json::from_value(body).map_err(bad)?),
            3 => PhasePayload::Filter(serde_json::from_value(body).map_err(bad)?),
            4 => PhasePayload::Abstract(serde_json::from_value(body).map_err(bad)?),
            5 => PhasePayload::Group(serde_json::from_value(body).map_err(bad)?),
            other => return Err(Error::InvalidPayload(format!("no phase {other}"))),
        })
    }

    pub fn phase(&self) -> u8 {
        match self {
            PhasePayload::Describe(_) => 1,
            PhasePayload::Demonstrate(_) => 2,
            PhasePayload::Filter(_) => 3,
            PhasePayload::Abstract(_) => 4,
            PhasePayload::Group(_) => 5,
        }
    }

    fn feedback(&self) -> Option<&String> {
        match self {
            PhasePayload::Describe(p) => p.feedback.as_ref(),
            PhasePayload::Demonstrate(p) => p.feedback.as_ref(),
            PhasePayload::Filter(p) => p.feedback.as_ref(),
            PhasePayload::Abstract(p) => p.feedback.as_ref(),
            PhasePayload::Group(p) => p.feedback.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub revision: u64,
    pub phase: u8,
    pub submitted_at: DateTime<Utc>,
    pub payload: PhasePayload,
    /// Later phases whose artifacts this submission cleared.
    pub invalidated: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub domain: String,
    pub revision: u64,
    /// The next phase expected; any phase up to it may be (re)submitted.
    pub cursor: u8,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub nl: Option<NaturalLanguageSpec>,
    pub lexical: Option<LexicalReport>,
    pub user_created: Option<Trace>,
    pub filter: Option<FilterResult>,
    pub overrides: Vec<CriticalityOverride>,
    pub user_filtered: Option<Trace>,
    pub choices: Vec<AbstractionChoice>,
    pub abstracted: Option<Trace>,
    pub grouped: Option<GroupedSpec>,
    pub grouped_plan: Option<PlanSummary>,
    pub alignment: Option<AlignmentResult>,
    pub feedback: BTreeMap<u8, String>,
    pub history: Vec<HistoryEntry>,
}

impl Session {
    pub fn new(id: impl Into<String>, domain: impl Into<String>, now: DateTime<Utc>) -> Self {
        Session {
            id: id.into(),
            domain: domain.into(),
            revision: 0,
            cursor: FIRST_PHASE,
            created_at: now,
            updated_at: now,
            nl: None,
            lexical: None,
            user_created: None,
            filter: None,
            overrides: Vec::new(),
            user_filtered: None,
            choices: Vec::new(),
            abstracted: None,
            grouped: None,
            grouped_plan: None,
            alignment: None,
            feedback: BTreeMap::new(),
            history: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.grouped.is_some()
    }

    fn trace_id(&self, phase: Phase) -> String {
        format!("{}.{phase}", self.id)
    }

    fn require<'a, T>(&self, artifact: &'a Option<T>, phase: u8) -> Result<&'a T> {
        artifact.as_ref().ok_or(Error::PhaseOrder {
            phase: phase + 1,
            cursor: self.cursor,
        })
    }

    fn clear_after(&mut self, phase: u8) -> Vec<u8> {
        let mut cleared = Vec::new();
        for p in (phase + 1)..=LAST_PHASE {
            let had = match p {
                2 => self.user_created.take().is_some(),
                3 => {
                    self.overrides.clear();
                    self.user_filtered.take().is_some() | self.filter.take().is_some()
                }
                4 => {
                    self.choices.clear();
                    self.abstracted.take().is_some()
                }
                _ => {
                    self.alignment = None;
                    self.grouped_plan = None;
                    self.grouped.take().is_some()
                }
            };
            self.feedback.remove(&p);
            if had {
                cleared.push(p);
            }
        }
        cleared
    }

    /// Runs one phase. On error the session is left untouched.
    pub fn apply(&mut self, domain: &Domain, payload: PhasePayload, now: DateTime<Utc>) -> Result<()> {
        let phase = payload.phase();
        if phase > self.cursor {
            return Err(Error::PhaseOrder {
                phase,
                cursor: self.cursor,
            });
        }
        let planner = Planner::new(domain);
        let mut next = self.clone();
        let invalidated = next.clear_after(phase);

        match &payload {
            PhasePayload::Describe(p) => {
                let report = match domain.verbs() {
                    Some(verbs) => Detector::new(verbs).detect(&p.text),
                    None => detect_features(&p.text),
                };
                next.nl = Some(NaturalLanguageSpec::at(p.text.clone(), now)?);
                next.lexical = Some(report);
            }
            PhasePayload::Demonstrate(p) => {
                let mut trace = Trace::user_created(self.trace_id(Phase::UserCreated), p.actions.iter().cloned());
                trace.source_id = self.id.clone();
                trace.nl = self.nl.as_ref().map(|n| n.text.clone());
                let report = validate_trace(&trace, domain);
                if !report.is_valid() {
                    return Err(Error::InvalidSteps(report));
                }
                next.user_created = Some(trace);
            }
            PhasePayload::Filter(p) => {
                let result = match &self.filter {
                    Some(existing) => existing.clone(),
                    None => {
                        let trace = self.require(&self.user_created, 2)?;
                        let config = FilterConfig {
                            strict_simulation: p.strict_simulation,
                        };
                        filter_trace(&planner, trace, domain.initial_state(), config)?
                    }
                };
                next.user_filtered = Some(apply_overrides(&result, &p.overrides)?);
                next.overrides = p.overrides.clone();
                next.filter = Some(result);
            }
            PhasePayload::Abstract(p) => {
                let trace = self.require(&self.user_filtered, 3)?;
                let choices: Vec<AbstractionChoice> = if p.abstract_all {
                    trace
                        .steps
                        .iter()
                        .map(|s| AbstractionChoice::abstract_step(s.id))
                        .collect()
                } else {
                    p.choices.clone()
                };
                next.abstracted = Some(abstract_trace(domain, trace, &choices)?);
                next.choices = choices;
            }
            PhasePayload::Group(p) => {
                let trace = self.require(&self.abstracted, 4)?;
                let spec = GroupedSpec {
                    id: self.trace_id(Phase::Grouped),
                    source_id: self.id.clone(),
                    trace_id: trace.id.clone(),
                    groups: p.groups.clone(),
                };
                let planned = plan_grouped(&planner, &spec, trace, domain.initial_state())?;
                next.grouped_plan = Some(planned.plan.summary());
                next.alignment = self.lexical.as_ref().map(|r| score_alignment(r, &spec));
                next.grouped = Some(spec);
            }
        }

        if let Some(f) = payload.feedback() {
            next.feedback.insert(phase, f.clone());
        }
        next.revision += 1;
        next.cursor = (phase + 1).min(LAST_PHASE);
        next.updated_at = now;
        next.history.push(HistoryEntry {
            revision: next.revision,
            phase,
            submitted_at: now,
            payload,
            invalidated,
        });
        *self = next;
        Ok(())
    }

    /// The phase artifacts as an evaluation corpus.
    pub fn corpus(&self) -> Corpus {
        let mut traces = Vec::new();
        if let Some(t) = &self.user_created {
            traces.push(t.clone());
        }
        if let Some(r) = &self.filter {
            traces.push(r.filtered.clone());
        }
        traces.extend(self.user_filtered.iter().cloned());
        traces.extend(self.abstracted.iter().cloned());
        Corpus {
            traces,
            specs: self.grouped.iter().cloned().collect(),
        }
    }

    pub fn export(&self) -> SessionExport {
        SessionExport {
            format: EXPORT_FORMAT.to_string(),
            corpus: self.corpus(),
            session: self.clone(),
        }
    }
}

pub const EXPORT_FORMAT: &str = "distill-session-export/1";

/// Everything a session produced, including the filter audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionExport {
    pub format: String,
    pub session: Session,
    pub corpus: Corpus,
}

impl SessionExport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("export serializes")
    }
}

/// Reads either a session export or JSON lines of traces and groupings.
pub fn load_corpus(text: &str) -> Result<Corpus> {
    if let Ok(export) = serde_json::from_str::<SessionExport>(text) {
        return Ok(export.corpus);
    }
    if let Ok(exports) = serde_json::from_str::<Vec<SessionExport>>(text) {
        let mut corpus = Corpus::default();
        for e in exports {
            corpus.extend(e.corpus);
        }
        return Ok(corpus);
    }
    Corpus::from_jsonl(text)
}

/// Scripted input for a headless run through all five phases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineInput {
    pub source_id: String,
    pub nl: String,
    pub actions: Vec<ActionRef>,
    #[serde(default)]
    pub overrides: Vec<CriticalityOverride>,
    #[serde(default)]
    pub abstraction: AbstractionPlan,
    #[serde(default)]
    pub grouping: GroupingPlan,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbstractionPlan {
    #[default]
    None,
    All,
    Steps(Vec<StepId>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingPlan {
    /// Every step in one group.
    #[default]
    Single,
    /// Every step in its own group, in trace order.
    Sequential,
    /// Step ids per group, highest priority first.
    Explicit(Vec<Vec<StepId>>),
}

/// Runs all five phases in memory. The session id is the source id, and
/// every timestamp is `now`.
pub fn run_pipeline(domain: &Domain, input: &PipelineInput, now: DateTime<Utc>) -> Result<Session> {
    let mut s = Session::new(input.source_id.clone(), domain.id(), now);
    s.apply(
        domain,
        PhasePayload::Describe(DescribePayload {
            text: input.nl.clone(),
            feedback: None,
        }),
        now,
    )?;
    s.apply(
        domain,
        PhasePayload::Demonstrate(DemonstratePayload {
            actions: input.actions.clone(),
            feedback: None,
        }),
        now,
    )?;
    s.apply(
        domain,
        PhasePayload::Filter(FilterPayload {
            overrides: input.overrides.clone(),
            ..FilterPayload::default()
        }),
        now,
    )?;
    let choices = match &input.abstraction {
        AbstractionPlan::None => Vec::new(),
        AbstractionPlan::All => Vec::new(),
        AbstractionPlan::Steps(ids) => ids.iter().map(|&id| AbstractionChoice::abstract_step(id)).collect(),
    };
    s.apply(
        domain,
        PhasePayload::Abstract(AbstractPayload {
            choices,
            abstract_all: input.abstraction == AbstractionPlan::All,
            feedback: None,
        }),
        now,
    )?;
    let trace = s.abstracted.as_ref().expect("phase 4 ran");
    let groups = match &input.grouping {
        GroupingPlan::Single => GroupedSpec::single_group(trace).groups,
        GroupingPlan::Sequential => GroupedSpec::sequential(trace).groups,
        GroupingPlan::Explicit(ids) => ids
            .iter()
            .zip(1..)
            .map(|(ids, priority)| PriorityGroup {
                priority,
                step_ids: ids.clone(),
            })
            .collect(),
    };
    s.apply(
        domain,
        PhasePayload::Group(GroupPayload { groups, feedback: None }),
        now,
    )?;
    Ok(s)
}

/// Room geometry plus where every object starts, for drawing the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMap {
    pub domain: String,
    pub rooms: Vec<crate::domain::Room>,
    pub adjacency: Vec<(String, String)>,
    pub entities: Vec<MapEntity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntity {
    pub id: String,
    pub kind: String,
    pub location: String,
}

pub fn domain_map(domain: &Domain) -> DomainMap {
    let mut entities = Vec::new();
    for atom in domain.initial_state().iter() {
        let (id, kind, location) = match (atom.name.as_str(), atom.args.as_slice()) {
            (conventions::ROBOT_AT, [at]) => ("robot", "robot", at),
            (conventions::ITEM_AT, [item, at]) => (item.as_str(), conventions::ITEM_TYPE, at),
            (conventions::PERSON_AT, [person, at]) => (person.as_str(), conventions::PERSON_TYPE, at),
            _ => continue,
        };
        entities.push(MapEntity {
            id: id.to_string(),
            kind: kind.to_string(),
            location: location.clone(),
        });
    }
    let spec = domain.spec();
    DomainMap {
        domain: domain.id().to_string(),
        rooms: spec.map.as_ref().map(|m| m.rooms.clone()).unwrap_or_default(),
        adjacency: spec.adjacency.clone(),
        entities,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainInfo {
    pub id: String,
    pub description: String,
    pub actions: Vec<String>,
}

/// Persistent session storage with per-session locking.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    domains: BTreeMap<String, Arc<Domain>>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>, domains: impl IntoIterator<Item = Domain>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(SessionStore {
            dir,
            domains: domains.into_iter().map(|d| (d.id().to_string(), Arc::new(d))).collect(),
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn domain(&self, id: &str) -> Result<&Arc<Domain>> {
        self.domains.get(id).ok_or_else(|| Error::UnknownDomain(id.to_string()))
    }

    pub fn domains(&self) -> Vec<DomainInfo> {
        self.domains
            .values()
            .map(|d| DomainInfo {
                id: d.id().to_string(),
                description: d.spec().description.clone(),
                actions: d.schemas().iter().map(|s| s.name.clone()).collect(),
            })
            .collect()
    }

    fn path(&self, id: &str) -> Result<PathBuf> {
        // ids are uuids; anything else can't name a stored session
        let uuid = uuid::Uuid::parse_str(id).map_err(|_| Error::UnknownSession(id.to_string()))?;
        Ok(self.dir.join(format!("{}.json", uuid.hyphenated())))
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    fn save(&self, session: &Session) -> Result<()> {
        let path = self.path(&session.id)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(session)?)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn create(&self, domain: &str) -> Result<Session> {
        self.domain(domain)?;
        let session = Session::new(uuid::Uuid::new_v4().to_string(), domain, Utc::now());
        self.save(&session)?;
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<Session> {
        let path = self.path(id)?;
        match fs::read(&path) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::UnknownSession(id.to_string())),
            Err(e) => Err(e.into()),
        }
    }

    pub fn submit(&self, id: &str, payload: PhasePayload) -> Result<Session> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut session = self.get(id)?;
        let domain = self.domain(&session.domain)?.clone();
        session.apply(&domain, payload, Utc::now())?;
        self.save(&session)?;
        Ok(session)
    }

    pub fn export(&self, id: &str) -> Result<SessionExport> {
        Ok(self.get(id)?.export())
    }
}
