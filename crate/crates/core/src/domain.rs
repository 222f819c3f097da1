//! Domain model: ground atoms, world states, action schemas and grounding.
//!
//! A domain is authored as a JSON document ([`DomainSpec`]) and compiled into
//! a [`Domain`], which validates every identifier and enumerates all
//! type-correct instantiations of the action schemas.
//!
//! Action schemas distinguish *visible* parameters from *hidden* ones. The
//! visible arguments are what a user writes in a trace (`moveTo(icu)`,
//! `grab(ibuprofen)`); hidden parameters (the room the robot leaves, the room
//! the item is picked up from) are bound by whatever state the action is
//! executed in. Two ground actions are the same *call* when their schema and
//! visible arguments agree.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The only domain document version this crate reads.
pub const DOMAIN_FORMAT_VERSION: u32 = 1;

/// Predicate names with fixed meaning inside a domain.
pub mod conventions {
    pub const LOCATION_TYPE: &str = "location";
    pub const ITEM_TYPE: &str = "item";
    pub const PERSON_TYPE: &str = "person";
    pub const ADJACENT: &str = "adjacent";
    pub const ROBOT_AT: &str = "robotAt";
    pub const ITEM_AT: &str = "itemAt";
    pub const PERSON_AT: &str = "personAt";
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Parses `name`, `name()` or `name(a, b, ...)`.
fn parse_call(input: &str, allow_vars: bool) -> Result<(String, Vec<String>)> {
    let err = |reason: &str| Error::Parse {
        input: input.to_string(),
        reason: reason.to_string(),
    };
    let s = input.trim();
    let (name, inner) = match s.find('(') {
        None => (s, None),
        Some(open) => {
            if !s.ends_with(')') {
                return Err(err("missing closing parenthesis"));
            }
            (&s[..open], Some(&s[open + 1..s.len() - 1]))
        }
    };
    let name = name.trim();
    if !is_ident(name) {
        return Err(err("invalid name"));
    }
    let mut args = Vec::new();
    if let Some(inner) = inner {
        if inner.contains('(') || inner.contains(')') {
            return Err(err("nested parentheses"));
        }
        if !inner.trim().is_empty() {
            for raw in inner.split(',') {
                let arg = raw.trim();
                let bare = if allow_vars {
                    arg.strip_prefix('?').unwrap_or(arg)
                } else {
                    arg
                };
                if !is_ident(bare) {
                    return Err(err("invalid argument"));
                }
                args.push(arg.to_string());
            }
        }
    }
    Ok((name.to_string(), args))
}

fn write_call(f: &mut fmt::Formatter<'_>, name: &str, args: &[String]) -> fmt::Result {
    f.write_str(name)?;
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        f.write_str(a)?;
    }
    f.write_str(")")
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// A ground atom such as `has(doctor, ibuprofen)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<String>,
}

impl Predicate {
    pub fn new<N, I, A>(name: N, args: I) -> Self
    where
        N: Into<String>,
        I: IntoIterator<Item = A>,
        A: Into<String>,
    {
        Predicate {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(f, &self.name, &self.args)
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s, false)?;
        Ok(Predicate { name, args })
    }
}

string_serde!(Predicate);

/// A user-level action reference: schema name plus visible arguments.
///
/// This is the identity used in traces and for subsequence matching during
/// filtering.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionRef {
    pub name: String,
    pub args: Vec<String>,
}

impl ActionRef {
    pub fn new<N, I, A>(name: N, args: I) -> Self
    where
        N: Into<String>,
        I: IntoIterator<Item = A>,
        A: Into<String>,
    {
        ActionRef {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for ActionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_call(f, &self.name, &self.args)
    }
}

impl FromStr for ActionRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s, false)?;
        Ok(ActionRef { name, args })
    }
}

string_serde!(ActionRef);

/// A set of ground atoms describing the robot, items, people and map.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorldState {
    atoms: BTreeSet<Predicate>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, atom: &Predicate) -> bool {
        self.atoms.contains(atom)
    }

    pub fn insert(&mut self, atom: Predicate) -> bool {
        self.atoms.insert(atom)
    }

    pub fn remove(&mut self, atom: &Predicate) -> bool {
        self.atoms.remove(atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Predicate> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &BTreeSet<Predicate> {
        &self.atoms
    }

    pub fn satisfies(&self, goal: &GoalSet) -> bool {
        goal.iter().all(|a| self.contains(a))
    }

    /// Atoms of `required` that do not hold here, in sorted order.
    pub fn missing<'a>(&self, required: impl IntoIterator<Item = &'a Predicate>) -> Vec<Predicate> {
        required.into_iter().filter(|a| !self.contains(a)).cloned().collect()
    }
}

impl FromIterator<Predicate> for WorldState {
    fn from_iter<T: IntoIterator<Item = Predicate>>(iter: T) -> Self {
        WorldState {
            atoms: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a WorldState {
    type Item = &'a Predicate;
    type IntoIter = std::collections::btree_set::Iter<'a, Predicate>;

    fn into_iter(self) -> Self::IntoIter {
        self.atoms.iter()
    }
}

/// A conjunctive goal: every atom must hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalSet {
    atoms: BTreeSet<Predicate>,
}

impl GoalSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Predicate> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn insert(&mut self, atom: Predicate) -> bool {
        self.atoms.insert(atom)
    }

    pub fn contains(&self, atom: &Predicate) -> bool {
        self.atoms.contains(atom)
    }

    pub fn extend(&mut self, other: &GoalSet) {
        self.atoms.extend(other.atoms.iter().cloned());
    }
}

impl FromIterator<Predicate> for GoalSet {
    fn from_iter<T: IntoIterator<Item = Predicate>>(iter: T) -> Self {
        GoalSet {
            atoms: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for GoalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// An argument in a schema template: a `?variable` or a constant object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(String),
}

/// A predicate pattern inside an action schema, e.g. `robotAt(?from)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub args: Vec<Term>,
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => format!("?{v}"),
                Term::Const(c) => c.clone(),
            })
            .collect();
        write_call(f, &self.name, &args)
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s, true)?;
        let args = args
            .into_iter()
            .map(|a| match a.strip_prefix('?') {
                Some(v) => Term::Var(v.to_string()),
                None => Term::Const(a),
            })
            .collect();
        Ok(Template { name, args })
    }
}

string_serde!(Template);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    /// Argument types, in order.
    #[serde(default)]
    pub params: Vec<String>,
    /// Resource bookkeeping (hand capacity and the like). Never part of an
    /// action's postconditions.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub resource: bool,
}

/// A STRIPS action schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    /// Parameters written by the user; they identify the action.
    #[serde(default)]
    pub params: Vec<Param>,
    /// Parameters bound by the state the action executes in.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hidden: Vec<Param>,
    #[serde(default)]
    pub pre: Vec<Template>,
    #[serde(default)]
    pub add: Vec<Template>,
    #[serde(default)]
    pub del: Vec<Template>,
}

impl ActionSchema {
    fn all_params(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().chain(self.hidden.iter())
    }
}

/// Room rectangle for map rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapGeometry {
    pub rooms: Vec<Room>,
}

/// The on-disk domain document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub version: u32,
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Objects by type name.
    pub objects: BTreeMap<String, Vec<String>>,
    /// Undirected location edges; expanded to `adjacent` atoms both ways.
    #[serde(default)]
    pub adjacency: Vec<(String, String)>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
    pub initial: Vec<Predicate>,
    #[serde(default)]
    pub goals: BTreeMap<String, Vec<Predicate>>,
    /// Verb lexicon for lexical cue detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapGeometry>,
}

impl DomainSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("domain spec serializes")
    }
}

/// A fully instantiated action: every parameter, visible and hidden, bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundAction {
    schema: usize,
    call: ActionRef,
    hidden: Vec<(String, String)>,
    pub pre: BTreeSet<Predicate>,
    pub add: BTreeSet<Predicate>,
    pub del: BTreeSet<Predicate>,
    pub(crate) pre_ids: Vec<u32>,
    pub(crate) add_ids: Vec<u32>,
    pub(crate) del_ids: Vec<u32>,
}

impl GroundAction {
    pub fn call(&self) -> &ActionRef {
        &self.call
    }

    pub fn name(&self) -> &str {
        &self.call.name
    }

    /// Hidden parameter bindings, `(parameter, object)` in schema order.
    pub fn hidden(&self) -> &[(String, String)] {
        &self.hidden
    }

    fn sort_key(&self) -> (usize, &[String], Vec<&str>) {
        (
            self.schema,
            &self.call.args,
            self.hidden.iter().map(|(_, v)| v.as_str()).collect(),
        )
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.call.fmt(f)
    }
}

impl PartialOrd for GroundAction {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Schema declaration order, then visible arguments, then hidden arguments.
impl Ord for GroundAction {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

/// A validated, grounded domain.
#[derive(Debug, Clone)]
pub struct Domain {
    spec: DomainSpec,
    object_types: BTreeMap<String, String>,
    by_type: BTreeMap<String, Vec<String>>,
    predicates: BTreeMap<String, PredicateDecl>,
    initial: WorldState,
    goals: BTreeMap<String, GoalSet>,
    actions: Vec<GroundAction>,
    by_call: HashMap<ActionRef, Vec<usize>>,
    atoms: Vec<Predicate>,
    atom_ids: HashMap<Predicate, u32>,
    fluent: Vec<bool>,
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        if spec.version != DOMAIN_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(spec.version));
        }
        if !is_ident(&spec.id) {
            return Err(Error::InvalidDomain(format!("invalid domain id `{}`", spec.id)));
        }

        let mut object_types = BTreeMap::new();
        let mut by_type: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (ty, objects) in &spec.objects {
            if !is_ident(ty) {
                return Err(Error::InvalidDomain(format!("invalid type name `{ty}`")));
            }
            let list = by_type.entry(ty.clone()).or_default();
            for obj in objects {
                if !is_ident(obj) {
                    return Err(Error::InvalidDomain(format!("invalid object name `{obj}`")));
                }
                if object_types.insert(obj.clone(), ty.clone()).is_some() {
                    return Err(Error::InvalidDomain(format!("object `{obj}` declared twice")));
                }
                list.push(obj.clone());
            }
            list.sort();
        }

        let mut predicates = BTreeMap::new();
        for decl in &spec.predicates {
            if !is_ident(&decl.name) {
                return Err(Error::InvalidDomain(format!("invalid predicate name `{}`", decl.name)));
            }
            for ty in &decl.params {
                if !by_type.contains_key(ty) {
                    return Err(Error::UnknownType(ty.clone()));
                }
            }
            if predicates.insert(decl.name.clone(), decl.clone()).is_some() {
                return Err(Error::InvalidDomain(format!(
                    "predicate `{}` declared twice",
                    decl.name
                )));
            }
        }

        let mut domain = Domain {
            spec,
            object_types,
            by_type,
            predicates,
            initial: WorldState::new(),
            goals: BTreeMap::new(),
            actions: Vec::new(),
            by_call: HashMap::new(),
            atoms: Vec::new(),
            atom_ids: HashMap::new(),
            fluent: Vec::new(),
        };

        domain.check_schemas()?;
        domain.build_initial()?;
        let mut goals = BTreeMap::new();
        for (name, atoms) in &domain.spec.goals {
            for atom in atoms {
                domain.check_atom(atom)?;
            }
            goals.insert(name.clone(), atoms.iter().cloned().collect::<GoalSet>());
        }
        domain.goals = goals;
        domain.ground();
        Ok(domain)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Domain::new(DomainSpec::from_json(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Domain::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_schemas(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for schema in &self.spec.actions {
            if !is_ident(&schema.name) || !names.insert(schema.name.as_str()) {
                return Err(Error::InvalidDomain(format!(
                    "invalid or duplicate action name `{}`",
                    schema.name
                )));
            }
            let mut vars: HashMap<&str, &str> = HashMap::new();
            for p in schema.all_params() {
                if !self.by_type.contains_key(&p.ty) {
                    return Err(Error::UnknownType(p.ty.clone()));
                }
                if vars.insert(p.name.as_str(), p.ty.as_str()).is_some() {
                    return Err(Error::InvalidDomain(format!(
                        "parameter `{}` repeated in `{}`",
                        p.name, schema.name
                    )));
                }
            }
            for t in schema.pre.iter().chain(&schema.add).chain(&schema.del) {
                let decl = self
                    .predicates
                    .get(&t.name)
                    .ok_or_else(|| Error::UndeclaredPredicate(t.name.clone()))?;
                if decl.params.len() != t.args.len() {
                    return Err(Error::Arity {
                        name: t.name.clone(),
                        expected: decl.params.len(),
                        got: t.args.len(),
                    });
                }
                for (term, expected) in t.args.iter().zip(&decl.params) {
                    let actual = match term {
                        Term::Var(v) => *vars.get(v.as_str()).ok_or_else(|| {
                            Error::InvalidDomain(format!(
                                "variable `?{v}` in `{}` is not a parameter of `{}`",
                                t, schema.name
                            ))
                        })?,
                        Term::Const(c) => self
                            .object_types
                            .get(c)
                            .ok_or_else(|| Error::UnknownObject(c.clone()))?
                            .as_str(),
                    };
                    if actual != expected {
                        return Err(Error::TypeMismatch {
                            object: t.to_string(),
                            actual: actual.to_string(),
                            expected: expected.clone(),
                            context: schema.name.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn build_initial(&mut self) -> Result<()> {
        use conventions::*;
        let mut initial = WorldState::new();
        for atom in &self.spec.initial {
            self.check_atom(atom)?;
            initial.insert(atom.clone());
        }
        if !self.spec.adjacency.is_empty() && !self.predicates.contains_key(ADJACENT) {
            return Err(Error::UndeclaredPredicate(ADJACENT.to_string()));
        }
        for (a, b) in &self.spec.adjacency {
            if a == b {
                return Err(Error::InvalidDomain(format!("location `{a}` adjacent to itself")));
            }
            for (x, y) in [(a, b), (b, a)] {
                let atom = Predicate::new(ADJACENT, [x.as_str(), y.as_str()]);
                self.check_atom(&atom)?;
                initial.insert(atom);
            }
        }
        // adjacency must be symmetric even when written as atoms
        for atom in initial.iter().filter(|a| a.name == ADJACENT) {
            let mirror = Predicate::new(ADJACENT, [atom.args[1].as_str(), atom.args[0].as_str()]);
            if !initial.contains(&mirror) {
                return Err(Error::InvalidDomain(format!("adjacency is not symmetric: {atom}")));
            }
        }

        // every located object has exactly one location atom
        for (ty, pred) in [(ITEM_TYPE, ITEM_AT), (PERSON_TYPE, PERSON_AT)] {
            if !self.predicates.contains_key(pred) {
                continue;
            }
            for obj in self.by_type.get(ty).into_iter().flatten() {
                let n = initial
                    .iter()
                    .filter(|a| a.name == pred && a.args.first() == Some(obj))
                    .count();
                if n != 1 {
                    return Err(Error::InvalidDomain(format!(
                        "`{obj}` must have exactly one initial `{pred}` atom, found {n}"
                    )));
                }
            }
        }
        if self.predicates.contains_key(ROBOT_AT) {
            let n = initial.iter().filter(|a| a.name == ROBOT_AT).count();
            if n != 1 {
                return Err(Error::InvalidDomain(format!(
                    "expected exactly one initial `{ROBOT_AT}` atom, found {n}"
                )));
            }
        }
        self.initial = initial;
        Ok(())
    }

    /// Checks that an atom uses a declared predicate with type-correct objects.
    pub fn check_atom(&self, atom: &Predicate) -> Result<()> {
        let decl = self
            .predicates
            .get(&atom.name)
            .ok_or_else(|| Error::UndeclaredPredicate(atom.name.clone()))?;
        if decl.params.len() != atom.args.len() {
            return Err(Error::Arity {
                name: atom.name.clone(),
                expected: decl.params.len(),
                got: atom.args.len(),
            });
        }
        for (arg, expected) in atom.args.iter().zip(&decl.params) {
            self.check_object(arg, expected, &atom.name)?;
        }
        Ok(())
    }

    /// Checks that a call names a schema with type-correct visible arguments.
    pub fn check_call(&self, call: &ActionRef) -> Result<()> {
        let schema = self
            .schema(&call.name)
            .ok_or_else(|| Error::UnknownAction(call.name.clone()))?;
        if schema.params.len() != call.args.len() {
            return Err(Error::Arity {
                name: call.name.clone(),
                expected: schema.params.len(),
                got: call.args.len(),
            });
        }
        for (arg, p) in call.args.iter().zip(&schema.params) {
            self.check_object(arg, &p.ty, &call.name)?;
        }
        Ok(())
    }

    fn check_object(&self, obj: &str, expected: &str, context: &str) -> Result<()> {
        let actual = self
            .object_types
            .get(obj)
            .ok_or_else(|| Error::UnknownObject(obj.to_string()))?;
        if actual != expected {
            return Err(Error::TypeMismatch {
                object: obj.to_string(),
                actual: actual.clone(),
                expected: expected.to_string(),
                context: context.to_string(),
            });
        }
        Ok(())
    }

    fn ground(&mut self) {
        let mut actions = Vec::new();
        for (index, schema) in self.spec.actions.iter().enumerate() {
            let params: Vec<&Param> = schema.all_params().collect();
            let domains: Vec<&[String]> = params
                .iter()
                .map(|p| self.by_type.get(&p.ty).map(Vec::as_slice).unwrap_or(&[]))
                .collect();
            if domains.iter().any(|d| d.is_empty()) {
                continue;
            }
            let mut choice = vec![0usize; params.len()];
            'bindings: loop {
                let binding: HashMap<&str, &str> = params
                    .iter()
                    .zip(&choice)
                    .zip(&domains)
                    .map(|((p, &c), d)| (p.name.as_str(), d[c].as_str()))
                    .collect();
                let inst = |ts: &[Template]| -> BTreeSet<Predicate> {
                    ts.iter()
                        .map(|t| Predicate {
                            name: t.name.clone(),
                            args: t
                                .args
                                .iter()
                                .map(|term| match term {
                                    Term::Var(v) => binding[v.as_str()].to_string(),
                                    Term::Const(c) => c.clone(),
                                })
                                .collect(),
                        })
                        .collect()
                };
                let pre = inst(&schema.pre);
                let add = inst(&schema.add);
                // an atom both deleted and added stays true
                let del: BTreeSet<Predicate> = inst(&schema.del).difference(&add).cloned().collect();
                let visible = schema.params.len();
                actions.push(GroundAction {
                    schema: index,
                    call: ActionRef {
                        name: schema.name.clone(),
                        args: choice[..visible]
                            .iter()
                            .zip(&domains)
                            .map(|(&c, d)| d[c].clone())
                            .collect(),
                    },
                    hidden: schema
                        .hidden
                        .iter()
                        .zip(&choice[visible..])
                        .zip(&domains[visible..])
                        .map(|((p, &c), d)| (p.name.clone(), d[c].clone()))
                        .collect(),
                    pre,
                    add,
                    del,
                    pre_ids: Vec::new(),
                    add_ids: Vec::new(),
                    del_ids: Vec::new(),
                });

                // odometer increment, last parameter fastest
                let mut k = params.len();
                loop {
                    if k == 0 {
                        break 'bindings;
                    }
                    k -= 1;
                    choice[k] += 1;
                    if choice[k] < domains[k].len() {
                        break;
                    }
                    choice[k] = 0;
                }
            }
        }
        actions.sort();

        let mut atom_set: BTreeSet<Predicate> = BTreeSet::new();
        for a in &actions {
            atom_set.extend(a.pre.iter().cloned());
            atom_set.extend(a.add.iter().cloned());
            atom_set.extend(a.del.iter().cloned());
        }
        let atoms: Vec<Predicate> = atom_set.into_iter().collect();
        let atom_ids: HashMap<Predicate, u32> = atoms.iter().enumerate().map(|(i, a)| (a.clone(), i as u32)).collect();
        let mut fluent = vec![false; atoms.len()];
        let mut by_call: HashMap<ActionRef, Vec<usize>> = HashMap::new();
        for (i, a) in actions.iter_mut().enumerate() {
            let ids = |set: &BTreeSet<Predicate>| -> Vec<u32> { set.iter().map(|p| atom_ids[p]).collect() };
            a.pre_ids = ids(&a.pre);
            a.add_ids = ids(&a.add);
            a.del_ids = ids(&a.del);
            for &id in a.add_ids.iter().chain(&a.del_ids) {
                fluent[id as usize] = true;
            }
            by_call.entry(a.call.clone()).or_default().push(i);
        }
        self.actions = actions;
        self.by_call = by_call;
        self.atoms = atoms;
        self.atom_ids = atom_ids;
        self.fluent = fluent;
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn initial_state(&self) -> &WorldState {
        &self.initial
    }

    pub fn goal(&self, name: &str) -> Result<&GoalSet> {
        self.goals.get(name).ok_or_else(|| Error::UnknownGoal(name.to_string()))
    }

    pub fn goals(&self) -> &BTreeMap<String, GoalSet> {
        &self.goals
    }

    pub fn schemas(&self) -> &[ActionSchema] {
        &self.spec.actions
    }

    pub fn schema(&self, name: &str) -> Option<&ActionSchema> {
        self.spec.actions.iter().find(|s| s.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.get(name)
    }

    pub fn object_type(&self, object: &str) -> Option<&str> {
        self.object_types.get(object).map(String::as_str)
    }

    /// Objects of a type, sorted by name.
    pub fn objects_of(&self, ty: &str) -> &[String] {
        self.by_type.get(ty).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn verbs(&self) -> Option<&[String]> {
        self.spec.verbs.as_deref()
    }

    /// Every ground action, ordered by schema declaration then bindings.
    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    /// All instantiations sharing the given call identity.
    pub fn instances(&self, call: &ActionRef) -> impl Iterator<Item = &GroundAction> + '_ {
        self.instance_indices(call).iter().map(move |&i| &self.actions[i])
    }

    pub(crate) fn instance_indices(&self, call: &ActionRef) -> &[usize] {
        self.by_call.get(call).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub(crate) fn atom_id(&self, atom: &Predicate) -> Option<u32> {
        self.atom_ids.get(atom).copied()
    }

    pub(crate) fn is_fluent(&self, id: u32) -> bool {
        self.fluent[id as usize]
    }

    /// True when no ground action adds or deletes this atom.
    pub fn is_static(&self, atom: &Predicate) -> bool {
        self.atom_id(atom).is_none_or(|id| !self.is_fluent(id))
    }

    /// Instances of `call` whose static preconditions hold initially.
    pub fn feasible_instances<'a>(&'a self, call: &ActionRef) -> impl Iterator<Item = &'a GroundAction> + 'a {
        self.instances(call)
            .filter(move |a| a.pre.iter().all(|p| !self.is_static(p) || self.initial.contains(p)))
    }

    /// Postconditions of a call: add effects guaranteed by every feasible
    /// instance, excluding resource predicates.
    pub fn positive_effects(&self, call: &ActionRef) -> Result<GoalSet> {
        self.check_call(call)?;
        let mut common: Option<BTreeSet<Predicate>> = None;
        for inst in self.feasible_instances(call) {
            let adds: BTreeSet<Predicate> = inst
                .add
                .iter()
                .filter(|a| !self.is_resource(&a.name))
                .cloned()
                .collect();
            common = Some(match common {
                None => adds,
                Some(prev) => prev.intersection(&adds).cloned().collect(),
            });
        }
        Ok(common.unwrap_or_default().into_iter().collect())
    }

    pub fn is_resource(&self, predicate: &str) -> bool {
        self.predicates.get(predicate).is_some_and(|d| d.resource)
    }

    /// Resolves `call` to its first applicable instance in `state` and applies it.
    pub fn apply_call(&self, state: &WorldState, call: &ActionRef) -> Result<(GroundAction, WorldState)> {
        self.check_call(call)?;
        let mut best: Option<Vec<Predicate>> = None;
        for inst in self.instances(call) {
            let missing = state.missing(&inst.pre);
            if missing.is_empty() {
                let next = crate::planner::apply(state, inst)?;
                return Ok((inst.clone(), next));
            }
            if best.as_ref().is_none_or(|b| missing.len() < b.len()) {
                best = Some(missing);
            }
        }
        Err(Error::Inapplicable {
            action: call.to_string(),
            missing: best.unwrap_or_default(),
        })
    }
}

/// Every type-correct instantiation of every schema, ordered by action name
/// then binding.
pub fn ground_domain(spec: &DomainSpec) -> Result<Vec<GroundAction>> {
    let domain = Domain::new(spec.clone())?;
    let mut actions = domain.actions;
    actions.sort_by(|a, b| {
        (&a.call, a.hidden.iter().map(|(_, v)| v).collect::<Vec<_>>())
            .cmp(&(&b.call, b.hidden.iter().map(|(_, v)| v).collect::<Vec<_>>()))
    });
    Ok(actions)
}
