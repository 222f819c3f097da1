//! Slow reference implementations used as test oracles.
//!
//! Nothing here touches the planner: states are sorted vectors of interned
//! atoms, successors come from plain set algebra over the ground actions.

#![allow(dead_code)]

pub mod golden;

use std::collections::{BTreeSet, HashMap, VecDeque};

use distill::{CueCategory, Domain, GoalSet, GroundAction, Predicate, Step, StepKind, Trace, WorldState};

pub type Key = Vec<u32>;

pub enum Search {
    Found(Vec<usize>),
    Unreachable,
    TooLarge,
}

pub struct Oracle<'d> {
    pub domain: &'d Domain,
    /// Ground actions in tie-break order.
    pub actions: Vec<&'d GroundAction>,
    ops: Vec<(Key, Key, Key)>,
    ids: HashMap<Predicate, u32>,
    atoms: Vec<Predicate>,
}

fn sorted(mut v: Vec<u32>) -> Key {
    v.sort_unstable();
    v.dedup();
    v
}

impl<'d> Oracle<'d> {
    pub fn new(domain: &'d Domain) -> Self {
        let mut actions: Vec<&GroundAction> = domain.actions().iter().collect();
        actions.sort();
        let mut o = Oracle {
            domain,
            actions: Vec::new(),
            ops: Vec::new(),
            ids: HashMap::new(),
            atoms: Vec::new(),
        };
        for a in &actions {
            let pre = sorted(a.pre.iter().map(|p| o.intern(p)).collect());
            let add = sorted(a.add.iter().map(|p| o.intern(p)).collect());
            let del = sorted(a.del.iter().map(|p| o.intern(p)).collect());
            o.ops.push((pre, add, del));
        }
        o.actions = actions;
        o
    }

    fn intern(&mut self, p: &Predicate) -> u32 {
        if let Some(&id) = self.ids.get(p) {
            return id;
        }
        let id = self.atoms.len() as u32;
        self.ids.insert(p.clone(), id);
        self.atoms.push(p.clone());
        id
    }

    pub fn key(&mut self, state: &WorldState) -> Key {
        sorted(state.iter().map(|p| self.intern(p)).collect())
    }

    pub fn state(&self, key: &Key) -> WorldState {
        key.iter().map(|&id| self.atoms[id as usize].clone()).collect()
    }

    pub fn goal_key(&mut self, goal: &GoalSet) -> Key {
        sorted(goal.iter().map(|p| self.intern(p)).collect())
    }

    pub fn contains_all(state: &Key, atoms: &Key) -> bool {
        atoms.iter().all(|a| state.binary_search(a).is_ok())
    }

    pub fn applicable(&self, state: &Key, op: usize) -> bool {
        Self::contains_all(state, &self.ops[op].0)
    }

    /// `(state \ del) ∪ add`.
    pub fn successor(&self, state: &Key, op: usize) -> Key {
        let (_, add, del) = &self.ops[op];
        let mut next: BTreeSet<u32> = state
            .iter()
            .copied()
            .filter(|a| del.binary_search(a).is_err())
            .collect();
        next.extend(add.iter().copied());
        next.into_iter().collect()
    }

    /// Breadth-first search with successors in tie-break order and the
    /// first path to each state kept: the lexicographically smallest
    /// shortest path to the first goal state.
    pub fn lex_bfs(&self, start: &Key, goal: impl Fn(&Key) -> bool, limit: usize) -> Search {
        if goal(start) {
            return Search::Found(Vec::new());
        }
        let mut parent: HashMap<Key, (Key, usize)> = HashMap::new();
        let mut queue = VecDeque::from([start.clone()]);
        let mut seen = 1usize;
        parent.insert(start.clone(), (Vec::new(), usize::MAX));
        while let Some(s) = queue.pop_front() {
            for op in 0..self.ops.len() {
                if !self.applicable(&s, op) {
                    continue;
                }
                let next = self.successor(&s, op);
                if parent.contains_key(&next) {
                    continue;
                }
                parent.insert(next.clone(), (s.clone(), op));
                seen += 1;
                if seen > limit {
                    return Search::TooLarge;
                }
                if goal(&next) {
                    let mut path = Vec::new();
                    let mut at = next;
                    while let Some((prev, op)) = parent.get(&at).cloned() {
                        if op == usize::MAX {
                            break;
                        }
                        path.push(op);
                        at = prev;
                    }
                    path.reverse();
                    return Search::Found(path);
                }
                queue.push_back(next);
            }
        }
        Search::Unreachable
    }

    /// Distance to every reachable state, or `None` beyond `limit` states.
    pub fn distances(&self, start: &Key, limit: usize) -> Option<HashMap<Key, usize>> {
        let mut dist = HashMap::from([(start.clone(), 0usize)]);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(s) = queue.pop_front() {
            let d = dist[&s];
            for op in 0..self.ops.len() {
                if self.applicable(&s, op) {
                    let next = self.successor(&s, op);
                    if !dist.contains_key(&next) {
                        dist.insert(next.clone(), d + 1);
                        if dist.len() > limit {
                            return None;
                        }
                        queue.push_back(next);
                    }
                }
            }
        }
        Some(dist)
    }

    /// Shortest plan length to `goal`, or `None` if unreachable.
    pub fn shortest(&mut self, start: &WorldState, goal: &GoalSet) -> Option<usize> {
        let s = self.key(start);
        let g = self.goal_key(goal);
        match self.lex_bfs(&s, |k| Self::contains_all(k, &g), usize::MAX) {
            Search::Found(p) => Some(p.len()),
            _ => None,
        }
    }

    /// Lexicographically smallest optimal plan, as action strings.
    pub fn lex_plan(&mut self, start: &WorldState, goal: &GoalSet) -> Option<Vec<String>> {
        let s = self.key(start);
        let g = self.goal_key(goal);
        match self.lex_bfs(&s, |k| Self::contains_all(k, &g), usize::MAX) {
            Search::Found(p) => Some(p.iter().map(|&op| self.actions[op].to_string()).collect()),
            _ => None,
        }
    }

    fn instances_of(&self, call: &distill::ActionRef) -> Vec<usize> {
        (0..self.actions.len())
            .filter(|&i| self.actions[i].call() == call)
            .collect()
    }

    /// One refinement segment: reach a state where some instance of the
    /// call applies, then run the first such instance.
    fn exact_segment(&self, start: &Key, call: &distill::ActionRef) -> Option<(usize, Key)> {
        let instances = self.instances_of(call);
        let goal = |k: &Key| instances.iter().any(|&i| self.applicable(k, i));
        let Search::Found(path) = self.lex_bfs(start, goal, usize::MAX) else {
            return None;
        };
        let mut s = start.clone();
        for &op in &path {
            s = self.successor(&s, op);
        }
        let first = *instances.iter().find(|&&i| self.applicable(&s, i))?;
        Some((path.len() + 1, self.successor(&s, first)))
    }

    fn goal_segment(&mut self, start: &Key, goals: &GoalSet) -> Option<(usize, Key)> {
        let g = self.goal_key(goals);
        let Search::Found(path) = self.lex_bfs(start, |k| Self::contains_all(k, &g), usize::MAX) else {
            return None;
        };
        let mut s = start.clone();
        for &op in &path {
            s = self.successor(&s, op);
        }
        Some((path.len(), s))
    }

    pub fn step_segment(&mut self, start: &Key, step: &Step) -> Option<(usize, Key)> {
        match &step.kind {
            StepKind::Exact(call) => self.exact_segment(start, call),
            StepKind::Goals(goals) => self.goal_segment(start, goals),
        }
    }

    /// Naive left-to-right refinement: total plan length and final state.
    pub fn refine(&mut self, trace: &Trace, start: &WorldState) -> Option<(usize, WorldState)> {
        let mut s = self.key(start);
        let mut total = 0;
        for step in &trace.steps {
            let (n, next) = self.step_segment(&s, step)?;
            total += n;
            s = next;
        }
        Some((total, self.state(&s)))
    }

    /// Shortest plan achieving every goal member and executing every exact
    /// member once, searched over (state, executed members) pairs.
    pub fn group(&mut self, start: &Key, members: &[&Step]) -> Option<(usize, Key)> {
        if members.len() == 1 {
            return self.step_segment(start, members[0]);
        }
        let mut members: Vec<&Step> = members.to_vec();
        members.sort_by_key(|s| s.id);
        let mut goal = GoalSet::new();
        let mut exact: Vec<Vec<usize>> = Vec::new();
        for m in &members {
            match &m.kind {
                StepKind::Exact(call) => exact.push(self.instances_of(call)),
                StepKind::Goals(g) => goal.extend(g),
            }
        }
        let g = self.goal_key(&goal);
        let all_done = (1u64 << exact.len()) - 1;
        let start_node = (start.clone(), 0u64);
        let is_goal = |(k, done): &(Key, u64)| *done == all_done && Self::contains_all(k, &g);
        if is_goal(&start_node) {
            return Some((0, start.clone()));
        }
        let mut dist: HashMap<(Key, u64), usize> = HashMap::from([(start_node.clone(), 0)]);
        let mut queue = VecDeque::from([start_node]);
        while let Some(node) = queue.pop_front() {
            let d = dist[&node];
            for op in 0..self.ops.len() {
                if !self.applicable(&node.0, op) {
                    continue;
                }
                let next_state = self.successor(&node.0, op);
                let mut choices = vec![node.1];
                for (k, inst) in exact.iter().enumerate() {
                    if node.1 & (1 << k) == 0 && inst.contains(&op) {
                        choices.push(node.1 | (1 << k));
                    }
                }
                for done in choices {
                    let next = (next_state.clone(), done);
                    if dist.contains_key(&next) {
                        continue;
                    }
                    dist.insert(next.clone(), d + 1);
                    if is_goal(&next) {
                        return Some((d + 1, next.0));
                    }
                    queue.push_back(next);
                }
            }
        }
        None
    }
}

pub fn calls(list: &[&str]) -> Vec<distill::ActionRef> {
    list.iter().map(|c| c.parse().unwrap()).collect()
}

pub fn goals(list: &[&str]) -> GoalSet {
    list.iter().map(|c| c.parse().unwrap()).collect()
}

pub fn trace(id: &str, list: &[&str]) -> Trace {
    Trace::user_created(id, calls(list))
}

/// Goal steps with ids `1..=n`.
pub fn goal_trace(sets: &[GoalSet]) -> Trace {
    let mut t = Trace::user_created("goals", std::iter::empty());
    t.phase = distill::Phase::Abstracted;
    t.steps = sets
        .iter()
        .zip(1..)
        .map(|(g, id)| Step {
            kind: StepKind::Goals(g.clone()),
            ..Step::exact(id, "moveTo(icu)".parse().unwrap())
        })
        .collect();
    t
}

/// A random reachable-looking state: items and robot placed uniformly,
/// then a short random walk.
pub fn random_state(domain: &Domain, rng: &mut impl rand::Rng, walk: usize) -> WorldState {
    use distill::domain::conventions::{LOCATION_TYPE, ROBOT_AT};
    let planner = distill::Planner::new(domain);
    let mut s = distill::eval::random_placement(&planner, domain.initial_state(), rng);
    let locations = domain.objects_of(LOCATION_TYPE);
    let robot = s.iter().find(|a| a.name == ROBOT_AT).cloned().unwrap();
    s.remove(&robot);
    let to = &locations[rng.random_range(0..locations.len())];
    s.insert(Predicate::new(ROBOT_AT, [to.as_str()]));
    for _ in 0..walk {
        let options: Vec<&GroundAction> = domain
            .actions()
            .iter()
            .filter(|a| a.pre.iter().all(|p| s.contains(p)))
            .collect();
        if options.is_empty() {
            break;
        }
        let a = options[rng.random_range(0..options.len())];
        s = distill::apply(&s, a).unwrap();
    }
    s
}

/// Fluent atoms worth asking for as goals.
pub fn goal_atoms(domain: &Domain) -> Vec<Predicate> {
    let mut atoms: BTreeSet<Predicate> = BTreeSet::new();
    for a in domain.actions() {
        for p in &a.add {
            if !domain.is_resource(&p.name) {
                atoms.insert(p.clone());
            }
        }
    }
    atoms.into_iter().collect()
}

/// (category, pattern id, text that fires it, text that does not)
pub const CUE_PAIRS: &[(CueCategory, &str, &str, &str)] = &[
    (CueCategory::Sequence, "then", "grab it, then go", "grab it and go"),
    (
        CueCategory::Sequence,
        "finally",
        "Finally deliver it",
        "deliver it at last",
    ),
    (CueCategory::Sequence, "next", "next go to the icu", "go to the icu"),
    (
        CueCategory::Sequence,
        "afterwards",
        "Afterwards inform the nurse",
        "inform the nurse later",
    ),
    (
        CueCategory::Sequence,
        "in-that-order",
        "do both in that order",
        "do both in any order",
    ),
    (CueCategory::Sequence, "after", "After lunch go", "Before lunch go"),
    (
        CueCategory::Sequence,
        "first",
        "first grab the linens",
        "grab the linens",
    ),
    (
        CueCategory::Sequence,
        "followed-by",
        "linens followed by pills",
        "linens with pills",
    ),
    (CueCategory::Step, "then", "Then stop", "stop"),
    (CueCategory::Step, "finally", "finally stop", "stop"),
    (CueCategory::Step, "next", "Next stop", "stop"),
    (CueCategory::Step, "afterwards", "afterwards stop", "stop"),
    (CueCategory::Step, "in-that-order", "in that order", "in this order"),
    (CueCategory::Step, "after", "after that", "before that"),
    (CueCategory::Step, "first", "First stop", "stop"),
    (CueCategory::Step, "followed-by", "Followed by", "led by"),
    (CueCategory::Step, "and-verb", "and also deliver the mug", "and the mug"),
    (CueCategory::Step, "punctuation", "pills, linens", "pills linens"),
    (CueCategory::Step, "also", "also linens", "Also linens"),
    (
        CueCategory::Conditional,
        "if",
        "If the nurse is busy",
        "if you could help",
    ),
    (
        CueCategory::Conditional,
        "in-case",
        "in case it rains",
        "In case it rains",
    ),
    (CueCategory::Grouping, "and", "pills and linens", "pills or linens"),
    (CueCategory::Grouping, "both", "Both items", "two items"),
    (CueCategory::Grouping, "all", "all items", "every item"),
    (CueCategory::Grouping, "together", "bring them together", "bring them"),
    (CueCategory::Grouping, "ampersand", "pills & linens", "pills + linens"),
    (CueCategory::Grouping, "as-well", "linens as well", "linens too"),
    (CueCategory::Grouping, "also", "Also linens", "plus linens"),
    (
        CueCategory::Grouping,
        "at-the-same-time",
        "at the same time",
        "at one time",
    ),
];
