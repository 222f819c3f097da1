//! Trace filtering ("reverse planning").
//!
//! For every action `a_c` after the first, the planner computes an optimal
//! plan from the working state to `a_c`'s positive effects. The actions just
//! before `a_c`, read backwards, are matched greedily as a subsequence of the
//! reversed plan; the matched run is redundant because the planner would
//! reproduce it and is removed. Rounds restart from the initial state and
//! repeat until a round removes nothing.

use serde::{Deserialize, Serialize};

use crate::domain::{ActionRef, GoalSet, WorldState};
use crate::error::{Error, Result};
use crate::planner::{simulate, Planner};
use crate::trace::{check_goal_achievement, AchievementCategory, Criticality, Phase, Provenance, Step, StepId, Trace};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Advance the working state through every reference plan, not only
    /// those that led to a removal.
    #[serde(default)]
    pub strict_simulation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedStep {
    pub original_index: usize,
    pub step_id: StepId,
    pub action: ActionRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditStatus {
    Planned,
    GoalUnreachable,
}

/// What happened when one action was treated as critical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub round: usize,
    pub step_id: StepId,
    pub action: ActionRef,
    pub goal: GoalSet,
    pub status: AuditStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_plan_length: Option<usize>,
    /// Steps matched against the reference plan and removed.
    pub removed: Vec<RemovedStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterResult {
    pub input: Trace,
    pub filtered: Trace,
    pub removed: Vec<RemovedStep>,
    pub rounds: usize,
    pub audit: Vec<AuditEntry>,
}

impl FilterResult {
    pub fn is_kept(&self, id: StepId) -> bool {
        self.filtered.step(id).is_some()
    }
}

/// A user's reclassification of one step in the filtered view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalityOverride {
    pub step_id: StepId,
    pub critical: bool,
}

pub(crate) fn phase_trace_id(source: &str, phase: Phase) -> String {
    format!("{source}.{phase}")
}

/// Removes actions implied by later actions' goals, until a fixpoint.
pub fn filter_trace(
    planner: &Planner<'_>,
    trace: &Trace,
    initial: &WorldState,
    config: FilterConfig,
) -> Result<FilterResult> {
    let domain = planner.domain();
    let Some(calls) = trace.actions() else {
        return Err(Error::InvalidTrace("filtering needs exact action steps only".into()));
    };
    // (original index, step, call)
    let mut current: Vec<(usize, &Step, &ActionRef)> = trace
        .steps
        .iter()
        .zip(calls)
        .enumerate()
        .map(|(i, (s, c))| (i, s, c))
        .collect();
    let mut removed = Vec::new();
    let mut audit = Vec::new();
    let mut rounds = 1;

    if current.len() >= 2 {
        rounds = 0;
        loop {
            rounds += 1;
            let before = current.len();
            let mut state = initial.clone();
            let mut pos = 1;
            while pos < current.len() {
                let (_, step, call) = current[pos];
                let goal = domain.positive_effects(call)?;
                let Some(reference) = planner.plan(&state, &goal)? else {
                    audit.push(AuditEntry {
                        round: rounds,
                        step_id: step.id,
                        action: call.clone(),
                        goal,
                        status: AuditStatus::GoalUnreachable,
                        reference_plan_length: None,
                        removed: Vec::new(),
                    });
                    pos += 1;
                    continue;
                };

                // walk the preceding segment backwards against the reversed plan
                let reversed: Vec<&ActionRef> = reference.iter().rev().map(|a| a.call()).collect();
                let mut matched = Vec::new();
                let mut cursor = 0;
                for i in (0..pos).rev() {
                    while cursor < reversed.len() && current[i].2 != reversed[cursor] {
                        cursor += 1;
                    }
                    if cursor >= reversed.len() {
                        break;
                    }
                    matched.push(i);
                    cursor += 1;
                }

                let mut entry_removed: Vec<RemovedStep> = Vec::with_capacity(matched.len());
                // `matched` is descending, so earlier removals don't shift later ones
                for &i in &matched {
                    let (original_index, step, call) = current.remove(i);
                    entry_removed.push(RemovedStep {
                        original_index,
                        step_id: step.id,
                        action: call.clone(),
                    });
                }
                entry_removed.reverse();
                pos -= matched.len();

                if !matched.is_empty() || config.strict_simulation {
                    state = simulate(&reference, &state)?;
                }
                removed.extend(entry_removed.iter().cloned());
                audit.push(AuditEntry {
                    round: rounds,
                    step_id: step.id,
                    action: call.clone(),
                    goal,
                    status: AuditStatus::Planned,
                    reference_plan_length: Some(reference.len()),
                    removed: entry_removed,
                });
                pos += 1;
            }
            if current.len() == before {
                break;
            }
        }
    }

    removed.sort_by_key(|r| r.original_index);
    let filtered = Trace {
        id: phase_trace_id(source_of(trace), Phase::SystemFiltered),
        source_id: source_of(trace).to_string(),
        phase: Phase::SystemFiltered,
        steps: current
            .iter()
            .map(|(_, step, _)| Step {
                criticality: Criticality::Critical,
                provenance: Provenance::System,
                ..(*step).clone()
            })
            .collect(),
        nl: trace.nl.clone(),
    };
    Ok(FilterResult {
        input: trace.clone(),
        filtered,
        removed,
        rounds,
        audit,
    })
}

fn source_of(trace: &Trace) -> &str {
    if trace.source_id.is_empty() {
        &trace.id
    } else {
        &trace.source_id
    }
}

/// Applies user reclassifications to a filter result, producing the
/// user-filtered trace. Later overrides of the same step win.
pub fn apply_overrides(result: &FilterResult, overrides: &[CriticalityOverride]) -> Result<Trace> {
    let mut critical: Vec<bool> = result.input.steps.iter().map(|s| result.is_kept(s.id)).collect();
    let system = critical.clone();
    for o in overrides {
        let index = result
            .input
            .steps
            .iter()
            .position(|s| s.id == o.step_id)
            .ok_or(Error::UnknownStep(o.step_id))?;
        critical[index] = o.critical;
    }
    let source = source_of(&result.input);
    Ok(Trace {
        id: phase_trace_id(source, Phase::UserFiltered),
        source_id: source.to_string(),
        phase: Phase::UserFiltered,
        steps: result
            .input
            .steps
            .iter()
            .enumerate()
            .filter(|(i, _)| critical[*i])
            .map(|(i, s)| Step {
                criticality: Criticality::Critical,
                provenance: if system[i] {
                    Provenance::System
                } else {
                    Provenance::User
                },
                ..s.clone()
            })
            .collect(),
        nl: result.input.nl.clone(),
    })
}

/// Longest trace the exhaustive oracle accepts.
pub const ORACLE_MAX_LEN: usize = 8;

/// All minimum-cardinality subsequences of `trace` whose refined plan fully
/// achieves `goals`. Exponential; test use only.
pub fn minimal_critical_oracle(
    planner: &Planner<'_>,
    trace: &Trace,
    initial: &WorldState,
    goals: &GoalSet,
) -> Result<Vec<Vec<ActionRef>>> {
    let n = trace.len();
    if n > ORACLE_MAX_LEN {
        return Err(Error::OracleLimit {
            limit: ORACLE_MAX_LEN,
            len: n,
        });
    }
    let Some(calls) = trace.actions() else {
        return Err(Error::InvalidTrace("oracle needs exact action steps only".into()));
    };
    for size in 0..=n {
        let mut found: Vec<Vec<ActionRef>> = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let subsequence: Vec<ActionRef> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| calls[i].clone().clone())
                .collect();
            if found.contains(&subsequence) {
                continue;
            }
            let candidate = Trace::user_created("oracle", subsequence.iter().cloned());
            let achieved = check_goal_achievement(planner, &candidate, initial, goals)?;
            if achieved.category() == AchievementCategory::Full {
                found.push(subsequence);
            }
        }
        if !found.is_empty() {
            found.sort();
            return Ok(found);
        }
    }
    Ok(Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;

    fn calls(list: &[&str]) -> Vec<ActionRef> {
        list.iter().map(|s| s.parse().unwrap()).collect()
    }

    fn scenario() -> Trace {
        Trace::user_created(
            "scenario",
            calls(&["grab(ibuprofen)", "moveTo(icu)", "deliver(ibuprofen, doctor)"]),
        )
    }

    #[test]
    fn delivery_scenario_keeps_only_delivery() {
        let d = domains::hospital();
        let r = filter_trace(
            &Planner::new(&d),
            &scenario(),
            d.initial_state(),
            FilterConfig::default(),
        )
        .unwrap();
        let kept: Vec<String> = r.filtered.steps.iter().map(|s| s.to_string()).collect();
        assert_eq!(kept, vec!["deliver(ibuprofen, doctor)"]);
        assert_eq!(r.removed.len(), 2);
        assert_eq!(r.removed[0].action.to_string(), "grab(ibuprofen)");
        assert_eq!(r.filtered.phase, Phase::SystemFiltered);
        assert!(r.rounds >= 1);
    }

    #[test]
    fn single_step_unchanged() {
        let d = domains::hospital();
        let t = Trace::user_created("one", calls(&["moveTo(icu)"]));
        let r = filter_trace(&Planner::new(&d), &t, d.initial_state(), FilterConfig::default()).unwrap();
        assert_eq!(r.filtered.steps.len(), 1);
        assert_eq!(r.rounds, 1);
        assert!(r.removed.is_empty() && r.audit.is_empty());
    }

    #[test]
    fn goal_steps_rejected() {
        let d = domains::hospital();
        let mut t = scenario();
        t.steps[0].kind = crate::trace::StepKind::Goals(GoalSet::new());
        assert!(filter_trace(&Planner::new(&d), &t, d.initial_state(), FilterConfig::default()).is_err());
    }

    #[test]
    fn overrides_reselect_and_deselect() {
        let d = domains::hospital();
        let r = filter_trace(
            &Planner::new(&d),
            &scenario(),
            d.initial_state(),
            FilterConfig::default(),
        )
        .unwrap();
        let same = apply_overrides(&r, &[]).unwrap();
        assert_eq!(same.steps, r.filtered.steps);
        assert_eq!(same.phase, Phase::UserFiltered);

        let grown = apply_overrides(
            &r,
            &[CriticalityOverride {
                step_id: 2,
                critical: true,
            }],
        )
        .unwrap();
        let names: Vec<String> = grown.steps.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, vec!["moveTo(icu)", "deliver(ibuprofen, doctor)"]);
        assert_eq!(grown.steps[0].provenance, Provenance::User);

        let back = apply_overrides(
            &r,
            &[
                CriticalityOverride {
                    step_id: 3,
                    critical: false,
                },
                CriticalityOverride {
                    step_id: 3,
                    critical: true,
                },
            ],
        )
        .unwrap();
        assert_eq!(back.steps, r.filtered.steps);

        assert!(matches!(
            apply_overrides(
                &r,
                &[CriticalityOverride {
                    step_id: 9,
                    critical: true
                }]
            ),
            Err(Error::UnknownStep(9))
        ));
    }

    #[test]
    fn oracle_finds_unique_delivery() {
        let d = domains::hospital();
        let goals: GoalSet = ["has(doctor, ibuprofen)".parse().unwrap()].into_iter().collect();
        let found = minimal_critical_oracle(&Planner::new(&d), &scenario(), d.initial_state(), &goals).unwrap();
        assert_eq!(found, vec![calls(&["deliver(ibuprofen, doctor)"])]);
    }

    #[test]
    fn oracle_bounds() {
        let d = domains::mini();
        let p = Planner::new(&d);
        let long = Trace::user_created("l", calls(&["moveTo(kitchen)"; 9]));
        assert!(matches!(
            minimal_critical_oracle(&p, &long, d.initial_state(), d.goal("delivered").unwrap()),
            Err(Error::OracleLimit { .. })
        ));
        let moves = Trace::user_created("m", calls(&["moveTo(kitchen)", "moveTo(office)"]));
        let found = minimal_critical_oracle(&p, &moves, d.initial_state(), d.goal("delivered").unwrap()).unwrap();
        assert!(found.is_empty());
        let minimal = Trace::user_created("x", calls(&["deliver(mug, visitor)"]));
        let found = minimal_critical_oracle(&p, &minimal, d.initial_state(), d.goal("delivered").unwrap()).unwrap();
        assert_eq!(found, vec![calls(&["deliver(mug, visitor)"])]);
    }
}
