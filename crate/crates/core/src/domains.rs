//! Built-in domains.

use crate::domain::{ActionSchema, Domain, DomainSpec, Param, Predicate, PredicateDecl};
use crate::error::{Error, Result};

pub const HOSPITAL_JSON: &str = include_str!("../domains/hospital.json");
pub const MINI_JSON: &str = include_str!("../domains/mini.json");

pub fn hospital_spec() -> DomainSpec {
    DomainSpec::from_json(HOSPITAL_JSON).expect("bundled hospital domain parses")
}

/// The default hospital domain (hand capacity 1).
pub fn hospital() -> Domain {
    Domain::new(hospital_spec()).expect("bundled hospital domain is valid")
}

/// Two locations, one item, one person; `moveTo`/`grab`/`deliver` only.
pub fn mini() -> Domain {
    Domain::from_json(MINI_JSON).expect("bundled mini domain is valid")
}

/// Looks up a built-in domain by id.
pub fn builtin(id: &str) -> Option<Domain> {
    match id {
        "hospital" => Some(hospital()),
        "mini" => Some(mini()),
        _ => None,
    }
}

/// The hospital domain with a robot that can carry `capacity` items.
///
/// Capacity 1 uses a single `handEmpty` flag. Larger capacities count load
/// levels `load0..loadN` chained by a static `nextLoad` relation.
pub fn hospital_with_capacity(capacity: usize) -> Result<Domain> {
    if capacity == 0 {
        return Err(Error::Config("hand capacity must be at least 1".into()));
    }
    let mut spec = hospital_spec();
    if capacity == 1 {
        return Domain::new(spec);
    }
    with_load_levels(&mut spec, capacity);
    Domain::new(spec)
}

fn with_load_levels(spec: &mut DomainSpec, capacity: usize) {
    let levels: Vec<String> = (0..=capacity).map(|i| format!("load{i}")).collect();
    spec.objects.insert("load".into(), levels.clone());
    spec.predicates.retain(|p| p.name != "handEmpty");
    spec.predicates.push(PredicateDecl {
        name: "handLoad".into(),
        params: vec!["load".into()],
        resource: true,
    });
    spec.predicates.push(PredicateDecl {
        name: "nextLoad".into(),
        params: vec!["load".into(), "load".into()],
        resource: false,
    });
    spec.initial.retain(|a| a.name != "handEmpty");
    spec.initial.push(Predicate::new("handLoad", ["load0"]));
    for pair in levels.windows(2) {
        spec.initial
            .push(Predicate::new("nextLoad", [pair[0].as_str(), pair[1].as_str()]));
    }

    let load_params = || {
        vec![
            Param {
                name: "n".into(),
                ty: "load".into(),
            },
            Param {
                name: "m".into(),
                ty: "load".into(),
            },
        ]
    };
    let strip = |schema: &mut ActionSchema| {
        schema.pre.retain(|t| t.name != "handEmpty");
        schema.add.retain(|t| t.name != "handEmpty");
        schema.del.retain(|t| t.name != "handEmpty");
    };
    let t = |s: &str| s.parse().expect("template");
    for schema in &mut spec.actions {
        match schema.name.as_str() {
            "grab" => {
                strip(schema);
                schema.hidden.extend(load_params());
                schema.pre.extend([t("handLoad(?n)"), t("nextLoad(?n, ?m)")]);
                schema.add.push(t("handLoad(?m)"));
                schema.del.push(t("handLoad(?n)"));
            }
            "deliver" => {
                strip(schema);
                schema.hidden.extend(load_params());
                schema.pre.extend([t("handLoad(?m)"), t("nextLoad(?n, ?m)")]);
                schema.add.push(t("handLoad(?n)"));
                schema.del.push(t("handLoad(?m)"));
            }
            _ => {}
        }
    }
}
