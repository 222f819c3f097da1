//! Priority groups: free order inside a group, strict order across groups.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{GoalSet, WorldState};
use crate::error::{Error, Result};
use crate::planner::{simulate, MandatoryCalls, Plan, Planner};
use crate::trace::{Step, StepId, StepKind, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityGroup {
    /// 1 executes first.
    pub priority: u32,
    pub step_ids: Vec<StepId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedSpec {
    pub id: String,
    pub source_id: String,
    /// The abstracted trace whose steps the groups partition.
    pub trace_id: String,
    pub groups: Vec<PriorityGroup>,
}

impl GroupedSpec {
    fn for_trace(trace: &Trace, groups: Vec<PriorityGroup>) -> Self {
        GroupedSpec {
            id: format!("{}.grouped", trace.source_id),
            source_id: trace.source_id.clone(),
            trace_id: trace.id.clone(),
            groups,
        }
    }

    /// Every step in its own group, in trace order.
    pub fn sequential(trace: &Trace) -> Self {
        let groups = trace
            .steps
            .iter()
            .zip(1..)
            .map(|(s, priority)| PriorityGroup {
                priority,
                step_ids: vec![s.id],
            })
            .collect();
        Self::for_trace(trace, groups)
    }

    /// All steps in one group.
    pub fn single_group(trace: &Trace) -> Self {
        Self::for_trace(
            trace,
            vec![PriorityGroup {
                priority: 1,
                step_ids: trace.steps.iter().map(|s| s.id).collect(),
            }],
        )
    }

    /// Checks that the groups partition `trace` and priorities run 1..=n.
    pub fn validate(&self, trace: &Trace) -> Result<()> {
        let mut priorities: Vec<u32> = self.groups.iter().map(|g| g.priority).collect();
        priorities.sort_unstable();
        if priorities.iter().zip(1..).any(|(&p, want)| p != want) {
            return Err(Error::InvalidGrouping(format!(
                "priorities must be distinct and contiguous from 1, got {priorities:?}"
            )));
        }
        let mut seen = BTreeSet::new();
        for g in &self.groups {
            if g.step_ids.is_empty() {
                return Err(Error::InvalidGrouping(format!("group {} is empty", g.priority)));
            }
            for &id in &g.step_ids {
                if trace.step(id).is_none() {
                    return Err(Error::UnknownStep(id));
                }
                if !seen.insert(id) {
                    return Err(Error::InvalidGrouping(format!(
                        "step {id} appears in more than one group"
                    )));
                }
            }
        }
        if let Some(missing) = trace.steps.iter().find(|s| !seen.contains(&s.id)) {
            return Err(Error::InvalidGrouping(format!(
                "step {} is not in any group",
                missing.id
            )));
        }
        Ok(())
    }

    /// Groups ordered by priority with members sorted by step id.
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.groups.sort_by_key(|g| g.priority);
        for g in &mut c.groups {
            g.step_ids.sort_unstable();
        }
        c
    }

    pub fn max_group_size(&self) -> usize {
        self.groups.iter().map(|g| g.step_ids.len()).max().unwrap_or(0)
    }

    /// Validated groups in execution order, members resolved to steps.
    pub fn resolve<'t>(&self, trace: &'t Trace) -> Result<Vec<(u32, Vec<&'t Step>)>> {
        self.validate(trace)?;
        Ok(self
            .canonical()
            .groups
            .iter()
            .map(|g| {
                let members = g
                    .step_ids
                    .iter()
                    .map(|&id| trace.step(id).expect("validated"))
                    .collect();
                (g.priority, members)
            })
            .collect())
    }
}

/// Optimal plan for one group: all goal members hold at the end and every
/// exact member has been executed exactly once, in any interleaving.
pub fn compile_group(planner: &Planner<'_>, priority: u32, members: &[&Step], state: &WorldState) -> Result<Plan> {
    let unsolvable = Error::GroupUnsolvable { priority };
    let plan = match members {
        [] => return Err(Error::InvalidGrouping(format!("group {priority} is empty"))),
        // a lone member is exactly one refinement segment
        [only] => match &only.kind {
            StepKind::Exact(call) => planner.plan_to_execute(state, call)?,
            StepKind::Goals(goals) => planner.plan(state, goals)?,
        },
        _ => {
            let mut ordered = members.to_vec();
            ordered.sort_by_key(|s| s.id);
            let mut goal = GoalSet::new();
            let mut mandatory = MandatoryCalls::default();
            for step in ordered {
                match &step.kind {
                    StepKind::Exact(call) => mandatory.calls.push(call),
                    StepKind::Goals(goals) => goal.extend(goals),
                }
            }
            planner.plan_mandatory(state, &goal, &mandatory)?
        }
    };
    plan.ok_or(unsolvable)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedPlan {
    pub plan: Plan,
    /// Plan length contributed by each group, in priority order.
    pub group_lengths: Vec<usize>,
    pub final_state: WorldState,
}

/// Plans the groups in priority order, threading the state between them.
pub fn plan_grouped(
    planner: &Planner<'_>,
    spec: &GroupedSpec,
    trace: &Trace,
    initial: &WorldState,
) -> Result<GroupedPlan> {
    let mut state = initial.clone();
    let mut plan = Plan::default();
    let mut group_lengths = Vec::with_capacity(spec.groups.len());
    for (priority, members) in spec.resolve(trace)? {
        let segment = compile_group(planner, priority, &members, &state)?;
        state = simulate(&segment, &state)?;
        group_lengths.push(segment.len());
        plan.extend(segment);
    }
    Ok(GroupedPlan {
        plan,
        group_lengths,
        final_state: state,
    })
}
