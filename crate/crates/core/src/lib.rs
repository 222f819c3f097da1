//! Planning core for turning demonstrated robot traces into goal
//! specifications: domain model, optimal planner, trace filtering,
//! abstraction, priority grouping, lexical cue scoring and evaluation.
//!
//! ```
//! use distill::{domains, filter_trace, FilterConfig, Planner, Trace};
//!
//! let domain = domains::hospital();
//! let trace = Trace::user_created(
//!     "demo",
//!     ["grab(ibuprofen)", "moveTo(icu)", "deliver(ibuprofen, doctor)"].map(|c| c.parse().unwrap()),
//! );
//! let result = filter_trace(&Planner::new(&domain), &trace, domain.initial_state(), FilterConfig::default())?;
//! assert_eq!(result.filtered.steps.len(), 1);
//! # Ok::<(), distill::Error>(())
//! ```

pub mod abstraction;
pub mod domain;
pub mod domains;
pub mod error;
pub mod eval;
pub mod filter;
pub mod grouping;
pub mod lexical;
pub mod planner;
pub mod session;
pub mod trace;

pub use abstraction::{abstract_trace, extract_postconditions, AbstractionChoice, AbstractionMode};
pub use domain::{
    ground_domain, ActionRef, ActionSchema, Domain, DomainSpec, GoalSet, GroundAction, Predicate, WorldState,
};
pub use error::{Error, Result};
pub use eval::{emit_csv, evaluate_trace_set, perturb_environment, Corpus, MetricRow, PerturbationConfig};
pub use filter::{
    apply_overrides, filter_trace, minimal_critical_oracle, CriticalityOverride, FilterConfig, FilterResult,
};
pub use grouping::{compile_group, plan_grouped, GroupedSpec, PriorityGroup};
pub use lexical::{detect_features, score_alignment, AlignmentResult, CueCategory, LexicalReport};
pub use planner::{apply, simulate, Plan, Planner};
pub use session::{run_pipeline, PipelineInput, Session, SessionExport, SessionStore};
pub use trace::{
    check_goal_achievement, refine_to_plan, validate_trace, Achievement, AchievementCategory, NaturalLanguageSpec,
    Phase, Step, StepId, StepKind, Trace,
};
