//! Replacing exact actions by the outcomes they produce.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{ActionRef, Domain, GoalSet};
use crate::error::{Error, Result};
use crate::filter::phase_trace_id;
use crate::trace::{Phase, Step, StepId, StepKind, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbstractionMode {
    KeepExact,
    AbstractToGoals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractionChoice {
    pub step_id: StepId,
    pub mode: AbstractionMode,
}

impl AbstractionChoice {
    pub fn abstract_step(step_id: StepId) -> Self {
        AbstractionChoice {
            step_id,
            mode: AbstractionMode::AbstractToGoals,
        }
    }

    pub fn keep(step_id: StepId) -> Self {
        AbstractionChoice {
            step_id,
            mode: AbstractionMode::KeepExact,
        }
    }
}

/// The goal atoms an action brings about, as used for filtering.
pub fn extract_postconditions(domain: &Domain, call: &ActionRef) -> Result<GoalSet> {
    let goals = domain.positive_effects(call)?;
    if goals.is_empty() {
        return Err(Error::EmptyGoal(call.to_string()));
    }
    Ok(goals)
}

/// Turns the chosen steps of a user-filtered trace into goal steps.
pub fn abstract_trace(domain: &Domain, trace: &Trace, choices: &[AbstractionChoice]) -> Result<Trace> {
    if trace.phase != Phase::UserFiltered {
        return Err(Error::InvalidTrace(format!(
            "abstraction expects a user-filtered trace, got {}",
            trace.phase
        )));
    }
    let mut modes = BTreeMap::new();
    for c in choices {
        if trace.step(c.step_id).is_none() {
            return Err(Error::UnknownStep(c.step_id));
        }
        modes.insert(c.step_id, c.mode);
    }
    let steps = trace
        .steps
        .iter()
        .map(|step| {
            let mode = modes.get(&step.id).copied().unwrap_or(AbstractionMode::KeepExact);
            match (&step.kind, mode) {
                (StepKind::Exact(call), AbstractionMode::AbstractToGoals) => Ok(Step {
                    kind: StepKind::Goals(extract_postconditions(domain, call)?),
                    ..step.clone()
                }),
                _ => Ok(step.clone()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trace {
        id: phase_trace_id(&trace.source_id, Phase::Abstracted),
        source_id: trace.source_id.clone(),
        phase: Phase::Abstracted,
        steps,
        nl: trace.nl.clone(),
    })
}
