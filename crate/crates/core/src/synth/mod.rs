//! Lowering of a catalog + query to a solver session, design extraction,
//! and the independent design checker.

pub mod check;
pub mod design;
pub mod encode;
pub mod rank;
pub mod warnings;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    tag_covers, validate_catalog, validate_query, Catalog, PerformanceBound, Query, Violation,
    WorkloadSpec,
};
use crate::smt::Outcome;

pub use check::check_design;
pub use design::{Design, ObjectiveReport};
pub use encode::{encode, Encoded};
pub use warnings::collect_warnings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    DeviceFill,
    Capacity,
    RoleActivation,
    RoleFulfill,
    SystemConstraint,
    OrderingBound,
    Architect,
    Pin,
}

/// Where a tracked assertion came from; drives classification and labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginRecord {
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardware: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<String>,
    /// Architect constraint id, constraint node id, or pin kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub label: String,
}

impl OriginRecord {
    pub fn new(origin: Origin, label: impl Into<String>) -> Self {
        OriginRecord {
            origin,
            workload: None,
            system: None,
            role: None,
            device: None,
            hardware: None,
            resource: None,
            detail: None,
            label: label.into(),
        }
    }
    pub fn workload(mut self, w: &str) -> Self {
        self.workload = Some(w.into());
        self
    }
    pub fn system(mut self, s: &str) -> Self {
        self.system = Some(s.into());
        self
    }
    pub fn role(mut self, r: &str) -> Self {
        self.role = Some(r.into());
        self
    }
    pub fn device(mut self, d: &str) -> Self {
        self.device = Some(d.into());
        self
    }
    pub fn hardware(mut self, h: &str) -> Self {
        self.hardware = Some(h.into());
        self
    }
    pub fn resource(mut self, r: &str) -> Self {
        self.resource = Some(r.into());
        self
    }
    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

/// Pin kinds recorded in [`OriginRecord::detail`].
pub const PIN_REQUEST: &str = "request";
pub const PIN_SYSTEM: &str = "system";
pub const PIN_HARDWARE: &str = "hardware";
/// Detail marker for bounds that require an objective tag.
pub const BOUND_SOLVES: &str = "solves";

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub seed: u64,
    pub budget: Duration,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            seed: 0,
            budget: Duration::from_secs(30),
        }
    }
}

impl SynthOptions {
    pub fn deadline(&self) -> Instant {
        Instant::now() + self.budget
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("input failed validation ({} violations)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("solver did not finish within the time budget")]
    Timeout,
    #[error("synthesized design failed the independent check: {0:?}")]
    CheckFailed(Vec<Violation>),
}

/// One conflicting assertion of an infeasible query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreEntry {
    pub text: String,
    pub origin: OriginRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Infeasibility {
    #[serde(rename = "kepler-spec")]
    pub version: u32,
    pub status: String,
    pub core: Vec<CoreEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SynthOutcome {
    Design(Box<Design>),
    Infeasible(Infeasibility),
}

/// Systems of the catalog fulfilling `role`, sorted by id.
pub fn role_systems(catalog: &Catalog, role: &str) -> Vec<String> {
    catalog
        .systems_for_role(role)
        .iter()
        .map(|s| s.id.clone())
        .collect()
}

/// A role matters for an objective when one of its systems solves a tag
/// covered by it or is ranked on it.
pub fn role_relevant(catalog: &Catalog, query: &Query, role: &str, objective: &str) -> bool {
    let systems = role_systems(catalog, role);
    let solves = catalog
        .systems_for_role(role)
        .iter()
        .any(|s| s.solves.iter().any(|t| tag_covers(objective, t)));
    solves
        || catalog
            .orderings
            .iter()
            .chain(query.orderings.iter())
            .filter(|o| tag_covers(objective, &o.objective))
            .any(|o| systems.contains(&o.subject) || systems.contains(&o.object))
}

/// Roles a performance bound constrains.
pub fn bound_roles(catalog: &Catalog, bound: &PerformanceBound) -> Vec<String> {
    let mut out: Vec<String> = match (&bound.at_least, &bound.solves) {
        (Some(b), _) => catalog
            .system(b)
            .map(|s| s.roles.clone())
            .unwrap_or_default(),
        (None, Some(tag)) => catalog
            .roles
            .iter()
            .filter(|r| {
                catalog
                    .systems_for_role(&r.id)
                    .iter()
                    .any(|s| s.solves.iter().any(|t| tag_covers(tag, t)))
            })
            .map(|r| r.id.clone())
            .collect(),
        _ => Vec::new(),
    };
    out.sort();
    out.dedup();
    out
}

/// Whether an unfulfilled role is an error (true) or only a warning.
pub fn role_is_hard(catalog: &Catalog, query: &Query, workload: &WorkloadSpec, role: &str) -> bool {
    workload
        .performance_bounds
        .iter()
        .any(|b| bound_roles(catalog, b).iter().any(|r| r == role))
        || workload
            .objectives
            .iter()
            .any(|o| role_relevant(catalog, query, role, o))
}

/// Full pipeline: validate, encode, solve, extract, verify.
pub fn synthesize(
    catalog: &Catalog,
    query: &Query,
    opts: &SynthOptions,
) -> Result<SynthOutcome, SynthError> {
    let mut violations = validate_catalog(catalog).violations;
    violations.extend(validate_query(catalog, query).violations);
    if !violations.is_empty() {
        return Err(SynthError::Invalid(violations));
    }
    let mut enc = encode(catalog, query).map_err(SynthError::Encoding)?;
    enc.session.set_seed(opts.seed);
    enc.session.set_deadline(Some(opts.deadline()));
    match enc.session.solve() {
        Outcome::Sat(model) => {
            let design = design::build_design(catalog, query, &enc.assignment(&model));
            let problems = check_design(catalog, query, &design);
            if !problems.is_empty() {
                return Err(SynthError::CheckFailed(problems));
            }
            Ok(SynthOutcome::Design(Box::new(design)))
        }
        Outcome::Unsat(core) => Ok(SynthOutcome::Infeasible(Infeasibility {
            version: crate::model::SPEC_VERSION,
            status: "INFEASIBLE".into(),
            core: core
                .iter()
                .map(|t| CoreEntry {
                    text: enc.render_track(*t),
                    origin: enc.origins[t.0 as usize].clone(),
                })
                .collect(),
        })),
        Outcome::Unknown => Err(SynthError::Timeout),
    }
}

/// Concrete choices: per workload, role → deployed systems; per device,
/// hardware id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment {
    pub roles: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub hardware: BTreeMap<String, String>,
}
