//! Counterfactual explanations: why the synthesizer did not pick a system the
//! user expected, or what it would cost to force it.
//!
//! The problem is re-encoded with the preferred system forced in and every
//! choice outside the flexible set pinned to the base design. A model yields
//! an alternative design with its objective trade-offs. An unsat core is
//! first stripped of pins that are not needed, then split into atoms,
//! minimised and classified.

pub mod classify;
pub mod decompose;
pub mod minimize;
pub mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Catalog, OptimizeTarget, Query, Violation, SPEC_VERSION};
use crate::smt::{Formula, Outcome, TrackId, VarRef};
use crate::synth::design::build_design;
use crate::synth::encode::VarMeta;
use crate::synth::rank::{rank_table, RankTable};
use crate::synth::{
    check_design, encode, role_relevant, role_systems, Design, Encoded, Origin, OriginRecord,
    PIN_HARDWARE, PIN_REQUEST, PIN_SYSTEM,
};

pub use classify::{classify, Category};
pub use decompose::decompose;
pub use minimize::{minimize, verify_minimal, MinimizeError};
pub use render::{render, Rendered, Renderer};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainRequest {
    pub workload: String,
    pub role: String,
    /// The system the user expected to see.
    pub preferred: String,
    /// Objective whose ordering decides which systems rank higher.
    pub objective: String,
    /// Role ids and device ids that may change; everything else is pinned.
    #[serde(default)]
    pub flexible: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExplainOptions {
    pub seed: u64,
    pub budget: Duration,
    /// Decomposition depth; `None` splits down to literals.
    pub depth: Option<usize>,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            seed: 0,
            budget: Duration::from_secs(30),
            depth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tradeoff {
    pub directive: String,
    pub before: f64,
    pub after: f64,
    #[serde(default)]
    pub before_ranks: BTreeMap<String, u32>,
    #[serde(default)]
    pub after_ranks: BTreeMap<String, u32>,
    pub worsened: bool,
}

/// One difference between the base and the alternative design.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Change {
    /// `workload/role` or a device id.
    pub subject: String,
    pub before: String,
    pub after: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Atom {
    pub id: u32,
    pub text: String,
    pub label: String,
    pub origin: OriginRecord,
    pub categories: BTreeSet<Category>,
    /// The atom itself, over the variables of a fresh `encode` of the same
    /// catalog and query. Not part of the document.
    #[serde(skip)]
    pub formula: Option<Formula>,
}

impl PartialEq for Atom {
    fn eq(&self, o: &Atom) -> bool {
        (self.id, &self.text, &self.label, &self.origin, &self.categories)
            == (o.id, &o.text, &o.label, &o.origin, &o.categories)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExplainOutcome {
    AlreadyOptimal {
        ordering: String,
    },
    Alternative {
        design: Box<Design>,
        changes: Vec<Change>,
        tradeoffs: Vec<Tradeoff>,
    },
    Conflict {
        atoms: Vec<Atom>,
        categories: BTreeSet<Category>,
        guidance: Vec<String>,
        /// Soundness and minimality were re-checked by the solver.
        verified: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    #[serde(rename = "kepler-spec")]
    pub version: u32,
    pub request: ExplainRequest,
    pub chosen: Vec<String>,
    /// Systems ranked strictly above the current choice.
    pub priority_systems: Vec<String>,
    pub outcome: ExplainOutcome,
}

impl Explanation {
    pub fn categories(&self) -> BTreeSet<Category> {
        match &self.outcome {
            ExplainOutcome::Conflict { categories, .. } => categories.clone(),
            _ => BTreeSet::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("invalid explain request: {0}")]
    InvalidRequest(String),
    #[error("solver did not finish within the time budget")]
    Timeout,
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("alternative design failed the independent check: {0:?}")]
    CheckFailed(Vec<Violation>),
}

/// Systems strictly better than any of `chosen`, excluding `chosen` itself.
pub fn priority_systems(table: &RankTable, chosen: &[String]) -> Vec<String> {
    let mut out = BTreeSet::new();
    for c in chosen {
        out.extend(table.dominators(c));
    }
    out.retain(|s| !chosen.contains(s));
    out.into_iter().collect()
}

/// Priority systems for a role of one workload under one objective's
/// (conditioned) ordering.
pub fn get_priority_systems(
    catalog: &Catalog,
    query: &Query,
    workload: &str,
    role: &str,
    objective: &str,
    chosen: &[String],
) -> Result<Vec<String>, ExplainError> {
    let w = query
        .workload(workload)
        .ok_or_else(|| invalid(format!("unknown workload {workload}")))?;
    let table = rank_table(catalog, query, w, role, objective)
        .map_err(|c| invalid(format!("ordering cycle among {}", c.join(", "))))?;
    if chosen.is_empty() {
        return Ok(role_systems(catalog, role));
    }
    Ok(priority_systems(&table, chosen))
}

/// Objective to consult when the user names none: the first workload
/// objective whose ordering ranks `preferred` above the current choice, else
/// the first one relevant to the role.
pub fn default_objective(
    catalog: &Catalog,
    query: &Query,
    base: &Design,
    workload: &str,
    role: &str,
    preferred: &str,
) -> Option<String> {
    let w = query.workload(workload)?;
    let chosen: Vec<String> = base
        .workloads
        .get(workload)
        .and_then(|m| m.get(role))
        .cloned()
        .unwrap_or_default();
    w.objectives
        .iter()
        .find(|o| {
            rank_table(catalog, query, w, role, o)
                .is_ok_and(|t| priority_systems(&t, &chosen).iter().any(|s| s == preferred))
        })
        .or_else(|| {
            w.objectives
                .iter()
                .find(|o| role_relevant(catalog, query, role, o))
        })
        .cloned()
}

fn invalid(m: impl Into<String>) -> ExplainError {
    ExplainError::InvalidRequest(m.into())
}

pub fn explain(
    catalog: &Catalog,
    query: &Query,
    base: &Design,
    req: &ExplainRequest,
    opts: &ExplainOptions,
) -> Result<Explanation, ExplainError> {
    let w = &req.workload;
    if query.workload(w).is_none() {
        return Err(invalid(format!("unknown workload {w}")));
    }
    if catalog.role(&req.role).is_none() {
        return Err(invalid(format!("unknown role {}", req.role)));
    }
    if !role_systems(catalog, &req.role).contains(&req.preferred) {
        return Err(invalid(format!(
            "{} does not fulfil role {}",
            req.preferred, req.role
        )));
    }
    let mut flex_roles = BTreeSet::new();
    let mut flex_devices = BTreeSet::new();
    for f in &req.flexible {
        if catalog.role(f).is_some() {
            flex_roles.insert(f.clone());
        } else if query.topology.device(f).is_some() {
            flex_devices.insert(f.clone());
        } else {
            return Err(invalid(format!(
                "flexible entry {f} is neither a role nor a device"
            )));
        }
    }

    let chosen: Vec<String> = base
        .workloads
        .get(w)
        .and_then(|m| m.get(&req.role))
        .cloned()
        .unwrap_or_default();
    let priority = get_priority_systems(catalog, query, w, &req.role, &req.objective, &chosen)?;
    let mut explanation = Explanation {
        version: SPEC_VERSION,
        request: req.clone(),
        chosen: chosen.clone(),
        priority_systems: priority.clone(),
        outcome: ExplainOutcome::AlreadyOptimal {
            ordering: format!("{} ordering of {} for {w}", req.objective, req.role),
        },
    };
    if chosen.contains(&req.preferred) || priority.is_empty() {
        return Ok(explanation);
    }

    let mut enc = encode(catalog, query).map_err(ExplainError::Encoding)?;
    enc.session.set_seed(opts.seed);
    enc.session
        .set_deadline(Some(std::time::Instant::now() + opts.budget));
    let pins = add_pins(&mut enc, base, req, &chosen, &flex_roles, &flex_devices)?;

    explanation.outcome = match enc.session.solve() {
        Outcome::Sat(model) => {
            let design = build_design(catalog, query, &enc.assignment(&model));
            let problems = check_design(catalog, query, &design);
            if !problems.is_empty() {
                return Err(ExplainError::CheckFailed(problems));
            }
            ExplainOutcome::Alternative {
                changes: changes(base, &design),
                tradeoffs: tradeoffs(query, base, &design),
                design: Box::new(design),
            }
        }
        Outcome::Unsat(core) => conflict(&mut enc, core, &pins, req, opts)?,
        Outcome::Unknown => return Err(ExplainError::Timeout),
    };
    Ok(explanation)
}

/// Pins in the order they are offered for relaxation: hardware first, then
/// system choices. The request itself is never relaxed.
struct Pins {
    relaxable: Vec<TrackId>,
}

fn add_pins(
    enc: &mut Encoded,
    base: &Design,
    req: &ExplainRequest,
    chosen: &[String],
    flex_roles: &BTreeSet<String>,
    flex_devices: &BTreeSet<String>,
) -> Result<Pins, ExplainError> {
    let w = req.workload.as_str();
    let dep = |enc: &Encoded, s: &str| {
        enc.dep_var(w, s)
            .ok_or_else(|| invalid(format!("{s} cannot be deployed for {w}")))
    };
    let mut request = vec![Formula::Var(dep(enc, &req.preferred)?)];
    for c in chosen {
        request.push(Formula::not(Formula::Var(dep(enc, c)?)));
    }
    let label = if chosen.is_empty() {
        format!(
            "requested: deploy {} for {} in {w}",
            req.preferred, req.role
        )
    } else {
        format!(
            "requested: deploy {} instead of {} for {} in {w}",
            req.preferred,
            chosen.join(", "),
            req.role
        )
    };
    enc.track(
        Formula::and(request),
        OriginRecord::new(Origin::Pin, label)
            .workload(w)
            .role(&req.role)
            .system(&req.preferred)
            .detail(PIN_REQUEST),
    );

    let freed = freed_devices(enc, w, flex_roles, flex_devices);
    let mut relaxable = Vec::new();
    let devices: Vec<String> = enc.devices.iter().map(|d| d.id.clone()).collect();
    for d in devices.iter().filter(|d| !freed.contains(*d)) {
        let Some(hw) = base.hardware.get(d) else {
            continue;
        };
        let f = enc.hardware_is(d, hw).ok_or_else(|| {
            invalid(format!(
                "base design puts {hw} on {d}, which the query does not allow"
            ))
        })?;
        relaxable.push(
            enc.track(
                f,
                OriginRecord::new(Origin::Pin, format!("{d} keeps {hw}"))
                    .device(d)
                    .hardware(hw)
                    .detail(PIN_HARDWARE),
            ),
        );
    }

    let mut slots = enc.roles.clone();
    slots.sort_by(|a, b| (&a.workload, &a.role).cmp(&(&b.workload, &b.role)));
    for slot in slots {
        if flex_roles.contains(&slot.role) || (slot.workload == w && slot.role == req.role) {
            continue;
        }
        let kept: Vec<String> = base
            .workloads
            .get(&slot.workload)
            .and_then(|m| m.get(&slot.role))
            .cloned()
            .unwrap_or_default();
        let mut parts = Vec::new();
        for s in &slot.systems {
            // The request decides these two; pinning them again would only
            // produce a trivial clash with the request.
            if slot.workload == w && (s == &req.preferred || chosen.contains(s)) {
                continue;
            }
            let Some(v) = enc.dep_var(&slot.workload, s) else {
                continue;
            };
            parts.push(if kept.contains(s) {
                Formula::Var(v)
            } else {
                Formula::not(Formula::Var(v))
            });
        }
        let what = if kept.is_empty() {
            "nothing".to_string()
        } else {
            kept.join(", ")
        };
        relaxable.push(
            enc.track(
                Formula::and(parts),
                OriginRecord::new(
                    Origin::Pin,
                    format!("{} for {} stays {what}", slot.role, slot.workload),
                )
                .workload(&slot.workload)
                .role(&slot.role)
                .detail(PIN_SYSTEM),
            ),
        );
    }
    Ok(Pins { relaxable })
}

/// Devices whose hardware may change: the named ones plus every device that
/// a system of a flexible role constrains in this workload.
fn freed_devices(
    enc: &Encoded,
    w: &str,
    flex_roles: &BTreeSet<String>,
    flex_devices: &BTreeSet<String>,
) -> BTreeSet<String> {
    let mut out = flex_devices.clone();
    let systems: BTreeSet<&String> = enc
        .roles
        .iter()
        .filter(|s| s.workload == w && flex_roles.contains(&s.role))
        .flat_map(|s| s.systems.iter())
        .collect();
    for t in enc.tracks() {
        let o = enc.origin(t);
        if o.origin != Origin::SystemConstraint
            || o.workload.as_deref() != Some(w)
            || !o.system.as_ref().is_some_and(|s| systems.contains(s))
        {
            continue;
        }
        enc.session.tracked_formula(t).visit_vars(&mut |v| {
            let meta = match v {
                VarRef::Bool(b) => enc.bool_meta(b),
                VarRef::Finite(f) => enc.finite_meta(f),
            };
            if let Some(VarMeta::Attr { device, .. } | VarMeta::Hardware { device }) = meta {
                out.insert(device.clone());
            }
        });
    }
    out
}

fn conflict(
    enc: &mut Encoded,
    mut core: Vec<TrackId>,
    pins: &Pins,
    req: &ExplainRequest,
    opts: &ExplainOptions,
) -> Result<ExplainOutcome, ExplainError> {
    // Drop every pin the conflict does not need, so the core speaks about
    // the catalog rather than about the fix-everything request.
    let all = enc.tracks();
    let mut dropped: BTreeSet<TrackId> = BTreeSet::new();
    for p in &pins.relaxable {
        if !core.contains(p) {
            continue;
        }
        let trial: Vec<TrackId> = all
            .iter()
            .copied()
            .filter(|t| t != p && !dropped.contains(t))
            .collect();
        match enc.session.solve_subset(&trial) {
            Outcome::Unsat(c) => {
                dropped.insert(*p);
                core = c;
            }
            Outcome::Sat(_) => {}
            Outcome::Unknown => return Err(ExplainError::Timeout),
        }
    }

    let mut atoms = Vec::new();
    for t in &core {
        let origin = enc.origin(*t).clone();
        let f = enc.session.tracked_formula(*t).clone();
        for a in decompose(&f, opts.depth) {
            atoms.push(enc.track(a, origin.clone()));
        }
    }
    let minimal = minimize(&mut enc.session, &atoms).map_err(|e| match e {
        MinimizeError::Timeout => ExplainError::Timeout,
        MinimizeError::Satisfiable => {
            ExplainError::Encoding("decomposed core is satisfiable".into())
        }
    })?;
    let verified = verify_minimal(&mut enc.session, &minimal);

    let mut categories = BTreeSet::new();
    let atoms: Vec<Atom> = minimal
        .iter()
        .map(|t| {
            let mut origin = enc.origin(*t).clone();
            let f = enc.session.tracked_formula(*t);
            if let (Origin::Pin, Formula::Var(v)) = (origin.origin, f) {
                if let Some(VarMeta::Deployed { system, .. }) = enc.bool_meta(*v) {
                    origin.system = Some(system.clone());
                }
            }
            let cats = classify(enc, f, &origin);
            categories.extend(cats.iter().copied());
            Atom {
                id: t.0,
                text: enc.render(f),
                label: origin.label.clone(),
                origin,
                categories: cats,
                formula: Some(f.clone()),
            }
        })
        .collect();
    if categories.is_empty() {
        categories.insert(Category::WorkloadMismatch);
    }
    let guidance = guidance(&atoms, req);
    Ok(ExplainOutcome::Conflict {
        atoms,
        categories,
        guidance,
        verified,
    })
}

fn guidance(atoms: &[Atom], req: &ExplainRequest) -> Vec<String> {
    let pinned = |kind: &str| -> BTreeSet<String> {
        atoms
            .iter()
            .filter(|a| a.origin.origin == Origin::Pin && a.origin.detail.as_deref() == Some(kind))
            .filter_map(|a| {
                if kind == PIN_SYSTEM {
                    a.origin.role.clone()
                } else {
                    a.origin.device.clone()
                }
            })
            .collect()
    };
    let roles = pinned(PIN_SYSTEM);
    let devices = pinned(PIN_HARDWARE);
    let mut out = Vec::new();
    if !roles.is_empty() {
        let list: Vec<String> = roles.into_iter().collect();
        out.push(format!(
            "make {} flexible to let {} be reconsidered",
            list.join(", "),
            req.preferred
        ));
    }
    if !devices.is_empty() {
        let list: Vec<String> = devices.into_iter().collect();
        out.push(format!(
            "make device(s) {} flexible to allow other hardware",
            list.join(", ")
        ));
    }
    if out.is_empty() {
        out.push(format!(
            "{} cannot fill {} for {} under this catalog and query, whatever else changes",
            req.preferred, req.role, req.workload
        ));
    }
    out
}

fn changes(base: &Design, new: &Design) -> Vec<Change> {
    let mut out = Vec::new();
    let empty = BTreeMap::new();
    let workloads: BTreeSet<&String> = base.workloads.keys().chain(new.workloads.keys()).collect();
    for w in workloads {
        let (b, n) = (
            base.workloads.get(w).unwrap_or(&empty),
            new.workloads.get(w).unwrap_or(&empty),
        );
        let roles: BTreeSet<&String> = b.keys().chain(n.keys()).collect();
        for r in roles {
            let show = |m: &BTreeMap<String, Vec<String>>| {
                m.get(r).map(|v| v.join(", ")).unwrap_or_else(|| "-".into())
            };
            let (before, after) = (show(b), show(n));
            if before != after {
                out.push(Change {
                    subject: format!("{w}/{r}"),
                    before,
                    after,
                });
            }
        }
    }
    for (d, after) in &new.hardware {
        let before = base.hardware.get(d).cloned().unwrap_or_else(|| "-".into());
        if &before != after {
            out.push(Change {
                subject: d.clone(),
                before,
                after: after.clone(),
            });
        }
    }
    out
}

fn tradeoffs(query: &Query, base: &Design, new: &Design) -> Vec<Tradeoff> {
    let mut directives = query.optimize.clone();
    directives.sort_by_key(|d| d.priority);
    base.objectives
        .iter()
        .zip(&new.objectives)
        .zip(directives)
        .map(|((b, n), d)| {
            let worsened = match d.target() {
                Some(OptimizeTarget::TotalCost) => n.value > b.value + 1e-9,
                _ => {
                    n.value < b.value
                        || b.ranks
                            .iter()
                            .any(|(r, v)| n.ranks.get(r).copied().unwrap_or(0) < *v)
                }
            };
            Tradeoff {
                directive: b.directive.clone(),
                before: b.value,
                after: n.value,
                before_ranks: b.ranks.clone(),
                after_ranks: n.ranks.clone(),
                worsened,
            }
        })
        .collect()
}
