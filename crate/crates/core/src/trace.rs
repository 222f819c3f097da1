//! Traces of user steps and their execution semantics.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{ActionRef, Domain, GoalSet, WorldState};
use crate::error::{Error, Result};
use crate::planner::{simulate, Plan, Planner};

pub type StepId = u32;

/// Where a trace sits in the refinement pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    UserCreated,
    SystemFiltered,
    UserFiltered,
    Abstracted,
    /// Only used to label grouped specifications in evaluation output.
    Grouped,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::UserCreated => "user-created",
            Phase::SystemFiltered => "system-filtered",
            Phase::UserFiltered => "user-filtered",
            Phase::Abstracted => "abstracted",
            Phase::Grouped => "grouped",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Phase::UserCreated,
            Phase::SystemFiltered,
            Phase::UserFiltered,
            Phase::Abstracted,
            Phase::Grouped,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| Error::Parse {
            input: s.to_string(),
            reason: "unknown phase".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// Perform exactly this action.
    Exact(ActionRef),
    /// Reach a state where these atoms hold, by any means.
    Goals(GoalSet),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criticality {
    Critical,
    NonCritical,
    #[default]
    Unset,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    #[default]
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub id: StepId,
    #[serde(flatten)]
    pub kind: StepKind,
    #[serde(default)]
    pub criticality: Criticality,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Step {
    pub fn exact(id: StepId, call: ActionRef) -> Self {
        Step {
            id,
            kind: StepKind::Exact(call),
            criticality: Criticality::Unset,
            provenance: Provenance::User,
        }
    }

    pub fn action(&self) -> Option<&ActionRef> {
        match &self.kind {
            StepKind::Exact(a) => Some(a),
            StepKind::Goals(_) => None,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StepKind::Exact(a) => a.fmt(f),
            StepKind::Goals(g) => write!(f, "achieve {g}"),
        }
    }
}

/// An ordered user specification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    /// Identifies the user-created trace every phase variant descends from.
    #[serde(default)]
    pub source_id: String,
    pub phase: Phase,
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nl: Option<String>,
}

impl Trace {
    /// A user-created trace with step ids `1..=n`.
    pub fn user_created(id: impl Into<String>, calls: impl IntoIterator<Item = ActionRef>) -> Self {
        let id = id.into();
        Trace {
            source_id: id.clone(),
            id,
            phase: Phase::UserCreated,
            steps: calls
                .into_iter()
                .enumerate()
                .map(|(i, c)| Step::exact(i as StepId + 1, c))
                .collect(),
            nl: None,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, id: StepId) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    /// The exact actions of the trace; `None` if any step is a goal step.
    pub fn actions(&self) -> Option<Vec<&ActionRef>> {
        self.steps.iter().map(Step::action).collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Free-form task description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaturalLanguageSpec {
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

impl NaturalLanguageSpec {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        Self::at(text, Utc::now())
    }

    pub fn at(text: impl Into<String>, timestamp: DateTime<Utc>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidTrace("natural-language text is empty".into()));
        }
        Ok(NaturalLanguageSpec { text, timestamp })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceIssue {
    pub step_index: usize,
    pub step_id: StepId,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<TraceIssue>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, issue) in self.issues.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            write!(f, "step {}: {}", issue.step_index, issue.message)?;
        }
        Ok(())
    }
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn step_indices(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.issues.iter().map(|i| i.step_index).collect();
        set.into_iter().collect()
    }
}

/// Reports unknown actions, objects and arity problems per step.
///
/// Steps are not checked for executability: refinement repairs orderings the
/// user got wrong.
pub fn validate_trace(trace: &Trace, domain: &Domain) -> ValidationReport {
    let mut issues = Vec::new();
    let mut ids = BTreeSet::new();
    for (step_index, step) in trace.steps.iter().enumerate() {
        let mut flag = |message: String| {
            issues.push(TraceIssue {
                step_index,
                step_id: step.id,
                message,
            })
        };
        if !ids.insert(step.id) {
            flag(format!("duplicate step id {}", step.id));
        }
        match &step.kind {
            StepKind::Exact(call) => {
                if let Err(e) = domain.check_call(call) {
                    flag(e.to_string());
                }
            }
            StepKind::Goals(goals) => {
                if trace.phase < Phase::Abstracted {
                    flag("goal steps only appear in abstracted traces".into());
                }
                for atom in goals.iter() {
                    if let Err(e) = domain.check_atom(atom) {
                        flag(e.to_string());
                    }
                }
            }
        }
    }
    ValidationReport { issues }
}

/// Plans a trace left to right.
///
/// Each exact step contributes a plan reaching a state where the action is
/// applicable followed by the action itself; each goal step contributes a
/// plan to its goals. The concatenation is what the robot executes.
pub fn refine_to_plan(planner: &Planner<'_>, trace: &Trace, state: &WorldState) -> Result<Plan> {
    Ok(refine_segments(planner, trace, state)?.0)
}

/// Like [`refine_to_plan`], also returning per-step segment lengths and the
/// final state.
pub fn refine_segments(
    planner: &Planner<'_>,
    trace: &Trace,
    state: &WorldState,
) -> Result<(Plan, Vec<usize>, WorldState)> {
    let mut plan = Plan::default();
    let mut lengths = Vec::with_capacity(trace.len());
    let mut current = state.clone();
    for (index, step) in trace.steps.iter().enumerate() {
        let segment = match &step.kind {
            StepKind::Exact(call) => planner.plan_to_execute(&current, call)?,
            StepKind::Goals(goals) => planner.plan(&current, goals)?,
        }
        .ok_or(Error::Unsolvable { index })?;
        current = simulate(&segment, &current)?;
        lengths.push(segment.len());
        plan.extend(segment);
    }
    Ok((plan, lengths, current))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AchievementCategory {
    Full,
    Partial,
    None,
}

impl AchievementCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            AchievementCategory::Full => "full",
            AchievementCategory::Partial => "partial",
            AchievementCategory::None => "none",
        }
    }
}

impl fmt::Display for AchievementCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `achieved` of `total` goal atoms hold after execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Achievement {
    pub achieved: usize,
    pub total: usize,
}

impl Achievement {
    pub fn in_state(state: &WorldState, goals: &GoalSet) -> Self {
        Achievement {
            achieved: goals.iter().filter(|a| state.contains(a)).count(),
            total: goals.len(),
        }
    }

    pub fn none(goals: &GoalSet) -> Self {
        Achievement {
            achieved: 0,
            total: goals.len(),
        }
    }

    pub fn category(&self) -> AchievementCategory {
        if self.achieved == self.total {
            AchievementCategory::Full
        } else if self.achieved == 0 {
            AchievementCategory::None
        } else {
            AchievementCategory::Partial
        }
    }
}

/// Refines and executes the trace, then counts the goal atoms that hold.
/// A trace that cannot be refined achieves nothing.
pub fn check_goal_achievement(
    planner: &Planner<'_>,
    trace: &Trace,
    state: &WorldState,
    goals: &GoalSet,
) -> Result<Achievement> {
    match refine_segments(planner, trace, state) {
        Ok((_, _, end)) => Ok(Achievement::in_state(&end, goals)),
        Err(Error::Unsolvable { .. }) => Ok(Achievement::none(goals)),
        Err(e) => Err(e),
    }
}
