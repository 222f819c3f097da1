//! STRIPS transitions and optimal forward search.
//!
//! Search is breadth-first over fluent bitsets with unit action cost.
//! Successors are expanded in ground-action order and each state keeps the
//! parent that discovered it first, so among all shortest plans the one
//! returned is the lexicographically smallest sequence of actions (schema
//! declaration order, then bindings).

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::domain::{ActionRef, Domain, GoalSet, GroundAction, WorldState};
use crate::error::{Error, Result};

/// Default limit on node expansions per search.
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

/// Applies a ground action: `(state \ del) ∪ add`.
pub fn apply(state: &WorldState, action: &GroundAction) -> Result<WorldState> {
    let missing = state.missing(&action.pre);
    if !missing.is_empty() {
        return Err(Error::Inapplicable {
            action: action.to_string(),
            missing,
        });
    }
    let mut next = state.clone();
    for atom in &action.del {
        next.remove(atom);
    }
    for atom in &action.add {
        next.insert(atom.clone());
    }
    Ok(next)
}

/// Executes actions in order, failing at the first inapplicable one.
pub fn simulate(actions: &[GroundAction], state: &WorldState) -> Result<WorldState> {
    let mut current = state.clone();
    for (index, action) in actions.iter().enumerate() {
        current = apply(&current, action).map_err(|e| match e {
            Error::Inapplicable { action, missing } => Error::Simulation { index, action, missing },
            other => other,
        })?;
    }
    Ok(current)
}

/// An ordered sequence of ground actions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Plan {
    actions: Vec<GroundAction>,
}

impl Plan {
    pub fn new(actions: Vec<GroundAction>) -> Self {
        Plan { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn into_actions(self) -> Vec<GroundAction> {
        self.actions
    }

    pub fn calls(&self) -> Vec<ActionRef> {
        self.actions.iter().map(|a| a.call().clone()).collect()
    }

    pub fn extend(&mut self, other: Plan) {
        self.actions.extend(other.actions);
    }

    pub fn push(&mut self, action: GroundAction) {
        self.actions.push(action);
    }

    pub fn summary(&self) -> PlanSummary {
        PlanSummary {
            length: self.len(),
            actions: self
                .actions
                .iter()
                .map(|a| PlannedAction {
                    action: a.call().clone(),
                    via: a.hidden().iter().cloned().collect(),
                })
                .collect(),
        }
    }
}

impl Deref for Plan {
    type Target = [GroundAction];

    fn deref(&self) -> &[GroundAction] {
        &self.actions
    }
}

/// Serializable view of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub length: usize,
    pub actions: Vec<PlannedAction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedAction {
    pub action: ActionRef,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub via: std::collections::BTreeMap<String, String>,
}

/// Marker atoms that force specific calls into a plan exactly once.
///
/// Each entry gets a private `pending`/`executed` pair outside the domain's
/// atom table; they never surface as predicates.
#[derive(Debug, Clone, Default)]
pub(crate) struct MandatoryCalls<'a> {
    pub calls: Vec<&'a ActionRef>,
}

/// Optimal planner over a grounded domain.
#[derive(Debug, Clone, Copy)]
pub struct Planner<'d> {
    domain: &'d Domain,
    budget: usize,
}

impl<'d> Planner<'d> {
    pub fn new(domain: &'d Domain) -> Self {
        Planner {
            domain,
            budget: DEFAULT_NODE_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn domain(&self) -> &'d Domain {
        self.domain
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Minimum-length plan from `state` to a state satisfying `goal`.
    ///
    /// `Ok(None)` means the goal is unreachable.
    pub fn plan(&self, state: &WorldState, goal: &GoalSet) -> Result<Option<Plan>> {
        self.plan_mandatory(state, goal, &MandatoryCalls::default())
    }

    /// Minimum-length plan that ends by executing `call`.
    pub fn plan_to_execute(&self, state: &WorldState, call: &ActionRef) -> Result<Option<Plan>> {
        self.domain.check_call(call)?;
        let task = SearchTask::build(self.domain, state, &MandatoryCalls::default());
        let targets: Vec<Vec<u64>> = self
            .domain
            .instance_indices(call)
            .iter()
            .filter_map(|&i| task.op_for_domain_action(i))
            .map(|op| task.ops[op].pre.clone())
            .collect();
        if targets.is_empty() {
            return Ok(None);
        }
        let Some(path) = task.breadth_first(&Goal::AnyOf(targets), self.budget)? else {
            return Ok(None);
        };
        let mut plan = task.to_plan(self.domain, &path);
        let reached = simulate(&plan, state)?;
        let (action, _) = self.domain.apply_call(&reached, call)?;
        plan.push(action);
        Ok(Some(plan))
    }

    pub(crate) fn plan_mandatory(
        &self,
        state: &WorldState,
        goal: &GoalSet,
        mandatory: &MandatoryCalls<'_>,
    ) -> Result<Option<Plan>> {
        for atom in goal.iter() {
            self.domain.check_atom(atom)?;
        }
        for call in &mandatory.calls {
            self.domain.check_call(call)?;
        }
        let task = SearchTask::build(self.domain, state, mandatory);
        let Some(target) = task.goal_mask(self.domain, state, goal) else {
            return Ok(None);
        };
        Ok(task
            .breadth_first(&Goal::All(target), self.budget)?
            .map(|path| task.to_plan(self.domain, &path)))
    }
}

enum Goal {
    All(Vec<u64>),
    AnyOf(Vec<Vec<u64>>),
}

impl Goal {
    fn holds(&self, state: &[u64]) -> bool {
        match self {
            Goal::All(mask) => subset(mask, state),
            Goal::AnyOf(masks) => masks.iter().any(|m| subset(m, state)),
        }
    }
}

fn subset(mask: &[u64], state: &[u64]) -> bool {
    mask.iter().zip(state).all(|(m, s)| m & s == *m)
}

struct Op {
    pre: Vec<u64>,
    add: Vec<u64>,
    del: Vec<u64>,
    action: usize,
}

/// A search problem restricted to fluent atoms, with statically inapplicable
/// actions pruned.
struct SearchTask {
    words: usize,
    ops: Vec<Op>,
    init: Vec<u64>,
    /// Global atom id (domain atoms, then marker atoms) to local bit.
    local: Vec<Option<usize>>,
    domain_op: Vec<Option<usize>>,
}

impl SearchTask {
    fn build(domain: &Domain, state: &WorldState, mandatory: &MandatoryCalls<'_>) -> Self {
        let n_domain = domain.atom_count();
        let n_total = n_domain + 2 * mandatory.calls.len();

        let mut holds = vec![false; n_domain];
        for atom in state.iter() {
            if let Some(id) = domain.atom_id(atom) {
                holds[id as usize] = true;
            }
        }

        let mut local = vec![None; n_total];
        let mut next = 0usize;
        for (id, slot) in local.iter_mut().enumerate() {
            if id >= n_domain || domain.is_fluent(id as u32) {
                *slot = Some(next);
                next += 1;
            }
        }
        let words = next.div_ceil(64).max(1);
        let mask = |ids: &mut dyn Iterator<Item = usize>| -> Vec<u64> {
            let mut m = vec![0u64; words];
            for id in ids {
                let bit = local[id].expect("fluent atom");
                m[bit / 64] |= 1 << (bit % 64);
            }
            m
        };

        let statically_ok = |a: &GroundAction| a.pre_ids.iter().all(|&id| domain.is_fluent(id) || holds[id as usize]);
        let fluent_ids = |ids: &[u32]| -> Vec<usize> {
            ids.iter()
                .filter(|&&id| domain.is_fluent(id))
                .map(|&id| id as usize)
                .collect()
        };

        // marker copies sort right after their base action
        let mut extras: Vec<(usize, usize)> = Vec::new();
        for (k, call) in mandatory.calls.iter().enumerate() {
            for &i in domain.instance_indices(call) {
                extras.push((i, k));
            }
        }
        extras.sort();

        let mut ops = Vec::new();
        let mut domain_op = vec![None; domain.actions().len()];
        let mut extra_iter = extras.into_iter().peekable();
        for (i, action) in domain.actions().iter().enumerate() {
            if !statically_ok(action) {
                while extra_iter.peek().is_some_and(|&(b, _)| b == i) {
                    extra_iter.next();
                }
                continue;
            }
            let pre = fluent_ids(&action.pre_ids);
            let add = fluent_ids(&action.add_ids);
            let del = fluent_ids(&action.del_ids);
            domain_op[i] = Some(ops.len());
            ops.push(Op {
                pre: mask(&mut pre.iter().copied()),
                add: mask(&mut add.iter().copied()),
                del: mask(&mut del.iter().copied()),
                action: i,
            });
            while let Some(&(b, k)) = extra_iter.peek() {
                if b != i {
                    break;
                }
                extra_iter.next();
                let pending = n_domain + 2 * k;
                let executed = pending + 1;
                ops.push(Op {
                    pre: mask(&mut pre.iter().copied().chain([pending])),
                    add: mask(&mut add.iter().copied().chain([executed])),
                    del: mask(&mut del.iter().copied().chain([pending])),
                    action: i,
                });
            }
        }

        let init_ids = (0..n_domain)
            .filter(|&id| holds[id] && domain.is_fluent(id as u32))
            .chain((0..mandatory.calls.len()).map(|k| n_domain + 2 * k));
        let init = mask(&mut init_ids.into_iter());

        SearchTask {
            words,
            ops,
            init,
            local,
            domain_op,
        }
    }

    fn op_for_domain_action(&self, action: usize) -> Option<usize> {
        self.domain_op[action]
    }

    /// Bit mask for the goal, or `None` when a static goal atom is false.
    fn goal_mask(&self, domain: &Domain, state: &WorldState, goal: &GoalSet) -> Option<Vec<u64>> {
        let mut mask = vec![0u64; self.words];
        for atom in goal.iter() {
            match domain.atom_id(atom).filter(|&id| domain.is_fluent(id)) {
                Some(id) => {
                    let bit = self.local[id as usize].expect("fluent atom");
                    mask[bit / 64] |= 1 << (bit % 64);
                }
                None if state.contains(atom) => {}
                None => return None,
            }
        }
        // all marker `executed` bits
        let n_domain = domain.atom_count();
        let mut id = n_domain + 1;
        while id < self.local.len() {
            let bit = self.local[id].expect("marker atom");
            mask[bit / 64] |= 1 << (bit % 64);
            id += 2;
        }
        Some(mask)
    }

    fn breadth_first(&self, goal: &Goal, budget: usize) -> Result<Option<Vec<usize>>> {
        if goal.holds(&self.init) {
            return Ok(Some(Vec::new()));
        }
        // node -> (parent node, op)
        let mut nodes: Vec<(u32, u32)> = vec![(u32::MAX, u32::MAX)];
        let mut seen: HashMap<Box<[u64]>, ()> = HashMap::new();
        seen.insert(self.init.clone().into_boxed_slice(), ());
        let mut queue: VecDeque<(Box<[u64]>, u32)> = VecDeque::new();
        queue.push_back((self.init.clone().into_boxed_slice(), 0));
        let mut expanded = 0usize;
        let mut next = vec![0u64; self.words];

        while let Some((state, node)) = queue.pop_front() {
            expanded += 1;
            if expanded > budget {
                return Err(Error::Budget { budget });
            }
            for (oi, op) in self.ops.iter().enumerate() {
                if !subset(&op.pre, &state) {
                    continue;
                }
                for w in 0..self.words {
                    next[w] = (state[w] & !op.del[w]) | op.add[w];
                }
                let key: Box<[u64]> = next.clone().into_boxed_slice();
                let Entry::Vacant(slot) = seen.entry(key) else {
                    continue;
                };
                let child = nodes.len() as u32;
                nodes.push((node, oi as u32));
                if goal.holds(&next) {
                    return Ok(Some(Self::path(&nodes, child)));
                }
                let key = slot.key().clone();
                slot.insert(());
                queue.push_back((key, child));
            }
        }
        Ok(None)
    }

    fn path(nodes: &[(u32, u32)], mut node: u32) -> Vec<usize> {
        let mut ops = Vec::new();
        while node != 0 {
            let (parent, op) = nodes[node as usize];
            ops.push(op as usize);
            node = parent;
        }
        ops.reverse();
        ops
    }

    fn to_plan(&self, domain: &Domain, path: &[usize]) -> Plan {
        Plan::new(
            path.iter()
                .map(|&op| domain.actions()[self.ops[op].action].clone())
                .collect(),
        )
    }
}
