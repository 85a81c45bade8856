//! Independent verification of a concrete design by direct evaluation.
//! Shares no code with the encoder beyond the role policy helpers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsl::{evaluate, AllocationScope, Binding, EvalValue};
use crate::model::{
    activated_roles, tag_covers, Catalog, EntryKind, Hardness, Query, Violation, WorkloadContext,
    WorkloadSpec,
};

use super::rank::rank_table;
use super::{bound_roles, role_is_hard, role_systems, Assignment, Design};

const CAPACITY_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Consumer {
    pub consumer: String,
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub capacity: f64,
    pub consumed: f64,
    pub consumers: Vec<Consumer>,
}

pub type Ledgers = BTreeMap<String, BTreeMap<String, Ledger>>;

/// Evaluation context for one workload of a concrete design.
pub struct DesignBinding<'a> {
    pub catalog: &'a Catalog,
    pub query: &'a Query,
    pub assignment: &'a Assignment,
    pub ctx: WorkloadContext<'a>,
    enabled: BTreeSet<String>,
}

impl<'a> DesignBinding<'a> {
    pub fn new(
        catalog: &'a Catalog,
        query: &'a Query,
        assignment: &'a Assignment,
        w: &'a WorkloadSpec,
    ) -> Self {
        let enabled = activated_roles(catalog, query, w)
            .into_iter()
            .map(|(r, _)| r)
            .collect();
        DesignBinding {
            catalog,
            query,
            assignment,
            ctx: WorkloadContext::new(query, w),
            enabled,
        }
    }
}

impl Binding for DesignBinding<'_> {
    fn scalar(&self, name: &str) -> Option<f64> {
        self.ctx.scalar(name)
    }
    fn has_property(&self, tag: &str) -> Option<bool> {
        self.ctx.has_property(tag)
    }
    fn colocated_has_property(&self, tag: &str) -> Option<bool> {
        self.ctx.colocated_has_property(tag)
    }
    fn attr(&self, device: &str, entry: &str) -> Option<EvalValue> {
        let hw = self
            .catalog
            .hardware(self.assignment.hardware.get(device)?)?;
        Some(self.catalog.hardware_value(hw, entry)?.to_eval())
    }
    fn deployed(&self, system: &str, workload: Option<&str>) -> Option<bool> {
        let w = workload.unwrap_or(&self.ctx.workload.id);
        self.query.workload(w)?;
        Some(deployed_systems(self.assignment, w).contains(system))
    }
    fn role_enabled(&self, role: &str) -> Option<bool> {
        self.catalog.role(role)?;
        Some(self.enabled.contains(role))
    }
    fn devices_of_type(&self, device_type: &str) -> Option<Vec<String>> {
        Some(self.ctx.devices_of_type(device_type))
    }
}

pub fn deployed_systems(a: &Assignment, workload: &str) -> BTreeSet<String> {
    a.roles
        .get(workload)
        .map(|m| m.values().flatten().cloned().collect())
        .unwrap_or_default()
}

pub struct Audit {
    pub ledgers: Ledgers,
    pub dropped_optional: Vec<String>,
    pub violations: Vec<Violation>,
}

fn v(code: &str, path: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        code: code.into(),
        path: path.into(),
        message: message.into(),
    }
}

fn even_split(amount: f64, devices: &[String]) -> Vec<(String, f64)> {
    let set: BTreeSet<&String> = devices.iter().collect();
    let n = set.len();
    if n == 0 {
        return Vec::new();
    }
    let whole = amount.fract() == 0.0;
    let base = if whole {
        (amount / n as f64).floor()
    } else {
        amount / n as f64
    };
    let mut left = if whole { amount - base * n as f64 } else { 0.0 };
    set.into_iter()
        .map(|d| {
            let extra = if left >= 1.0 { 1.0 } else { 0.0 };
            left -= extra;
            (d.clone(), base + extra)
        })
        .collect()
}

/// Evaluates every requirement of `a` and accounts resource usage.
pub fn audit(catalog: &Catalog, query: &Query, a: &Assignment) -> Audit {
    let mut out = Vec::new();

    // Hardware.
    for slot in query.topology.devices() {
        let path = format!("hardware.{}", slot.id);
        let Some(hid) = a.hardware.get(&slot.id) else {
            out.push(v("HARDWARE", path, "no hardware assigned"));
            continue;
        };
        match catalog.hardware(hid) {
            None => out.push(v("HARDWARE", path, format!("unknown hardware {hid}"))),
            Some(h) if h.schema != slot.schema => out.push(v(
                "HARDWARE",
                path,
                format!("{hid} has schema {} not {}", h.schema, slot.schema),
            )),
            Some(_) if query.excluded_hardware.contains(hid) => {
                out.push(v("HARDWARE", path, format!("{hid} is excluded")))
            }
            Some(_) => {
                if let Some(p) = query.pin_for(slot) {
                    if &p != hid {
                        out.push(v("HARDWARE", path, format!("pinned to {p} but got {hid}")));
                    }
                }
            }
        }
    }
    for d in a.hardware.keys() {
        if query.topology.device(d).is_none() {
            out.push(v(
                "HARDWARE",
                format!("hardware.{d}"),
                "not a device of the topology",
            ));
        }
    }

    let mut charges: BTreeMap<(String, String), Vec<Consumer>> = BTreeMap::new();
    let mut global: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    let mut dropped = Vec::new();

    for w in a.roles.keys() {
        if query.workload(w).is_none() {
            out.push(v("ROLE", format!("workloads.{w}"), "unknown workload"));
        }
    }

    for w in &query.workloads {
        let b = DesignBinding::new(catalog, query, a, w);
        let enabled = &b.enabled;
        let deployed = deployed_systems(a, &w.id);
        let listing = a.roles.get(&w.id).cloned().unwrap_or_default();
        let wpath = format!("workloads.{}", w.id);

        for (r, systems) in &listing {
            if !enabled.contains(r) {
                out.push(v(
                    "ROLE",
                    format!("{wpath}.{r}"),
                    format!("role {r} is not enabled"),
                ));
            }
            for s in systems {
                if !catalog.system(s).is_some_and(|x| x.roles.contains(r)) {
                    out.push(v(
                        "ROLE",
                        format!("{wpath}.{r}"),
                        format!("{s} does not fulfil {r}"),
                    ));
                }
            }
        }
        for r in enabled {
            let members: Vec<String> = role_systems(catalog, r)
                .into_iter()
                .filter(|s| deployed.contains(s))
                .collect();
            let listed = listing.get(r).cloned().unwrap_or_default();
            let mut sorted = listed.clone();
            sorted.sort();
            if sorted != members {
                out.push(v(
                    "ROLE",
                    format!("{wpath}.{r}"),
                    format!("listed {listed:?} but deployed {members:?}"),
                ));
            }
            let role = catalog.role(r).expect("enabled role exists");
            if role.is_exclusive && members.len() > 1 {
                out.push(v(
                    "ROLE",
                    format!("{wpath}.{r}"),
                    format!("exclusive role filled by {members:?}"),
                ));
            }
            if members.is_empty() && role_is_hard(catalog, query, w, r) {
                out.push(v(
                    "ROLE_UNFULFILLED",
                    format!("{wpath}.{r}"),
                    format!("required role {r} is unfulfilled"),
                ));
            }
        }

        for s in &deployed {
            let path = format!("{wpath}.{s}");
            if query.excluded_systems.contains(s) {
                out.push(v("EXCLUDED", path.clone(), format!("{s} is excluded")));
            }
            let Some(sys) = catalog.system(s) else {
                out.push(v("ROLE", path, format!("unknown system {s}")));
                continue;
            };
            match evaluate(&sys.deployment_constraints, &b) {
                Err(e) => out.push(v("SYSTEM_CONSTRAINT", path, e.to_string())),
                Ok((ok, allocs)) => {
                    if !ok {
                        let failing: Vec<String> = sys
                            .deployment_constraints
                            .conjuncts()
                            .into_iter()
                            .filter(|c| !evaluate(c, &b).map(|r| r.0).unwrap_or(false))
                            .map(|c| {
                                c.id.as_ref()
                                    .and_then(|id| sys.constraint_labels.get(id).cloned())
                                    .or_else(|| c.label.clone())
                                    .unwrap_or_else(|| c.to_string())
                            })
                            .collect();
                        out.push(v("SYSTEM_CONSTRAINT", path.clone(), failing.join("; ")));
                    }
                    for al in allocs {
                        match al.scope {
                            AllocationScope::PerDevice => {
                                for d in &al.devices {
                                    charges
                                        .entry((d.clone(), al.resource.clone()))
                                        .or_default()
                                        .push(Consumer {
                                            consumer: format!("{s}@{}", w.id),
                                            amount: al.amount,
                                        });
                                }
                            }
                            AllocationScope::PerWorkloadGlobal => {
                                for (d, x) in even_split(al.amount, &al.devices) {
                                    charges.entry((d, al.resource.clone())).or_default().push(
                                        Consumer {
                                            consumer: format!("{s}@{}", w.id),
                                            amount: x,
                                        },
                                    );
                                }
                            }
                            AllocationScope::PerSystemGlobal => {
                                for d in &al.devices {
                                    let e = global
                                        .entry((s.clone(), d.clone(), al.resource.clone()))
                                        .or_insert(0.0);
                                    *e = e.max(al.amount);
                                }
                            }
                        }
                    }
                }
            }
        }

        for (scalar, resource) in super::encode::WORKLOAD_DEMANDS {
            let amount = b.ctx.scalar(scalar).unwrap_or(0.0);
            if amount <= 0.0 {
                continue;
            }
            let devices: Vec<String> = b
                .ctx
                .devices
                .iter()
                .filter(|d| exhaustible(catalog, query, d, resource))
                .cloned()
                .collect();
            for (d, x) in even_split(amount, &devices) {
                charges
                    .entry((d, resource.to_string()))
                    .or_default()
                    .push(Consumer {
                        consumer: w.id.clone(),
                        amount: x,
                    });
            }
        }

        let mut bounds: Vec<String> = Vec::new();
        for bd in &w.performance_bounds {
            for r in bound_roles(catalog, bd)
                .into_iter()
                .filter(|r| enabled.contains(r))
            {
                let members: Vec<String> = role_systems(catalog, &r)
                    .into_iter()
                    .filter(|s| deployed.contains(s))
                    .collect();
                if let Some(best) = &bd.at_least {
                    let Ok(t) = rank_table(catalog, query, w, &r, &bd.objective) else {
                        bounds.push(format!("ordering cycle on {}", bd.objective));
                        continue;
                    };
                    for x in members.iter().filter(|x| t.dominators(x).contains(best)) {
                        bounds.push(format!("{x} is worse than {best} on {}", bd.objective));
                    }
                } else if let Some(tag) = &bd.solves {
                    for x in &members {
                        if !catalog
                            .system(x)
                            .is_some_and(|s| s.solves.iter().any(|t| tag_covers(tag, t)))
                        {
                            bounds.push(format!("{x} does not solve {tag}"));
                        }
                    }
                }
            }
        }
        for m in bounds {
            out.push(v("PERFORMANCE_BOUND", wpath.clone(), m));
        }
    }

    for c in &query.constraints {
        let Some(w) = query.workload(&c.workload) else {
            continue;
        };
        let b = DesignBinding::new(catalog, query, a, w);
        let ok = evaluate(&c.expr, &b).map(|r| r.0);
        match (c.hardness, ok) {
            (_, Err(e)) => out.push(v(
                "ARCHITECT",
                format!("constraints.{}", c.id),
                e.to_string(),
            )),
            (Hardness::Hard, Ok(false)) => out.push(v(
                "ARCHITECT",
                format!("constraints.{}", c.id),
                c.label.clone().unwrap_or_else(|| c.expr.to_string()),
            )),
            (Hardness::Optional, Ok(false)) => dropped.push(c.id.clone()),
            _ => {}
        }
    }

    for ((s, d, r), amount) in global {
        charges.entry((d, r)).or_default().push(Consumer {
            consumer: s,
            amount,
        });
    }

    let mut ledgers: Ledgers = BTreeMap::new();
    for slot in query.topology.devices() {
        let Some(schema) = catalog.schema(&slot.schema) else {
            continue;
        };
        for (entry, spec) in &schema.entries {
            if spec.kind == EntryKind::Exhaustible {
                let cap = a
                    .hardware
                    .get(&slot.id)
                    .and_then(|h| catalog.hardware(h))
                    .and_then(|h| catalog.hardware_value(h, entry))
                    .and_then(|x| x.as_f64())
                    .unwrap_or(0.0);
                ledgers.entry(slot.id.clone()).or_default().insert(
                    entry.clone(),
                    Ledger {
                        capacity: cap,
                        consumed: 0.0,
                        consumers: Vec::new(),
                    },
                );
            }
        }
    }
    for ((d, r), mut consumers) in charges {
        consumers.retain(|c| c.amount > 0.0);
        if consumers.is_empty() {
            continue;
        }
        consumers.sort_by(|x, y| x.consumer.cmp(&y.consumer));
        let consumed: f64 = consumers.iter().map(|c| c.amount).sum();
        let ledger = ledgers
            .entry(d.clone())
            .or_default()
            .entry(r.clone())
            .or_insert(Ledger {
                capacity: 0.0,
                consumed: 0.0,
                consumers: Vec::new(),
            });
        ledger.consumed = consumed;
        ledger.consumers = consumers;
        if consumed > ledger.capacity + CAPACITY_EPS {
            out.push(v(
                "CAPACITY",
                format!("ledgers.{d}.{r}"),
                format!(
                    "{r} on {d}: {consumed} consumed exceeds capacity {}",
                    ledger.capacity
                ),
            ));
        }
    }

    out.sort();
    out.dedup();
    dropped.sort();
    Audit {
        ledgers,
        dropped_optional: dropped,
        violations: out,
    }
}

fn exhaustible(catalog: &Catalog, query: &Query, device: &str, resource: &str) -> bool {
    query
        .topology
        .device(device)
        .and_then(|d| catalog.schema(&d.schema))
        .and_then(|s| s.entries.get(resource))
        .is_some_and(|e| e.kind == EntryKind::Exhaustible)
}

pub fn total_cost(catalog: &Catalog, a: &Assignment) -> f64 {
    a.hardware
        .values()
        .filter_map(|h| catalog.hardware(h))
        .filter_map(|h| catalog.hardware_value(h, "cost")?.as_f64())
        .sum()
}

/// All requirement violations of a design, including inconsistencies
/// between its reported ledgers/cost and a fresh recomputation.
pub fn check_design(catalog: &Catalog, query: &Query, design: &Design) -> Vec<Violation> {
    let a = design.assignment();
    let audit = audit(catalog, query, &a);
    let mut out = audit.violations;
    let cost = total_cost(catalog, &a);
    if (cost - design.total_cost).abs() > 1e-6 {
        out.push(v(
            "REPORT",
            "total_cost",
            format!("reported {} but hardware costs {cost}", design.total_cost),
        ));
    }
    if !ledgers_match(&audit.ledgers, &design.ledgers) {
        out.push(v(
            "REPORT",
            "ledgers",
            "reported ledgers differ from recomputation",
        ));
    }
    if audit.dropped_optional != design.dropped_optional {
        out.push(v(
            "REPORT",
            "dropped_optional",
            format!("expected {:?}", audit.dropped_optional),
        ));
    }
    out.sort();
    out.dedup();
    out
}

fn ledgers_match(a: &Ledgers, b: &Ledgers) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|((da, ma), (db, mb))| {
            da == db
                && ma.len() == mb.len()
                && ma.iter().zip(mb).all(|((ra, la), (rb, lb))| {
                    ra == rb
                        && (la.capacity - lb.capacity).abs() < 1e-6
                        && (la.consumed - lb.consumed).abs() < 1e-6
                        && la.consumers.len() == lb.consumers.len()
                })
        })
}
