//! Catalog + query → solver session.
//!
//! Every constraint that can take part in an infeasibility is tracked and
//! carries an [`OriginRecord`]. Resource demands are collected while system
//! constraints are lowered and turned into one capacity inequality per
//! (device, resource) at the end.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dsl::{AllocTarget, AllocationScope, ConstraintExpr, Node, SlotRef};
use crate::model::{
    activated_roles, tag_covers, Catalog, EntryKind, Hardness, OptimizeTarget, Query, Value,
    WorkloadContext, WorkloadSpec,
};
use crate::smt::{
    BoolVar, CmpOp, FiniteVar, Formula, Linear, Model, Sense, SolverSession, Term, TrackId,
};

use super::rank::rank_table;
use super::{
    bound_roles, role_is_hard, role_relevant, role_systems, Assignment, Origin, OriginRecord,
    BOUND_SOLVES,
};

/// Workload scalars charged against device resources.
pub const WORKLOAD_DEMANDS: &[(&str, &str)] =
    &[("peak_cores", "cores"), ("peak_bandwidth", "bandwidth")];

pub const NO_HARDWARE: &str = "<none>";

#[derive(Clone, Debug, PartialEq)]
pub enum VarMeta {
    Deployed { workload: String, system: String },
    Enabled { workload: String, role: String },
    Attr { device: String, entry: String },
    Hardware { device: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttrVar {
    Bool(BoolVar),
    Finite(FiniteVar),
}

#[derive(Clone, Debug)]
pub struct DeviceVars {
    pub id: String,
    pub hw: FiniteVar,
    /// Candidate hardware ids, index-aligned with the domain of `hw`.
    pub hardware: Vec<String>,
    pub attrs: BTreeMap<String, AttrVar>,
}

/// An enabled role of one workload.
#[derive(Clone, Debug, PartialEq)]
pub struct RoleSlot {
    pub workload: String,
    pub role: String,
    pub exclusive: bool,
    pub hard: bool,
    pub systems: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SoftItem {
    Role { workload: String, role: String },
    Optional { id: String },
}

pub struct Encoded {
    pub session: SolverSession,
    pub origins: Vec<OriginRecord>,
    pub devices: Vec<DeviceVars>,
    pub dep: BTreeMap<(String, String), BoolVar>,
    pub enabled: BTreeMap<(String, String), BoolVar>,
    pub roles: Vec<RoleSlot>,
    pub soft: Vec<SoftItem>,
    bool_meta: HashMap<BoolVar, VarMeta>,
    finite_meta: HashMap<FiniteVar, VarMeta>,
}

struct Demand {
    resource: String,
    scope: AllocationScope,
    devices: Vec<String>,
    amount: f64,
    guard: Formula,
    system: Option<String>,
}

enum Lowered {
    Bool(Formula),
    Num(Linear),
}

impl Encoded {
    pub fn track(&mut self, f: Formula, origin: OriginRecord) -> TrackId {
        let t = self.session.assert_tracked(f);
        debug_assert_eq!(t.0 as usize, self.origins.len());
        self.origins.push(origin);
        t
    }

    pub fn origin(&self, t: TrackId) -> &OriginRecord {
        &self.origins[t.0 as usize]
    }

    pub fn tracks(&self) -> Vec<TrackId> {
        (0..self.origins.len() as u32).map(TrackId).collect()
    }

    pub fn device(&self, id: &str) -> Option<&DeviceVars> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn dep_var(&self, workload: &str, system: &str) -> Option<BoolVar> {
        self.dep
            .get(&(workload.to_string(), system.to_string()))
            .copied()
    }

    /// `hw[device] == hardware`, if that hardware is a candidate.
    pub fn hardware_is(&self, device: &str, hardware: &str) -> Option<Formula> {
        let d = self.device(device)?;
        let k = d.hardware.iter().position(|h| h == hardware)?;
        Some(Formula::Is(d.hw, k))
    }

    pub fn bool_meta(&self, v: BoolVar) -> Option<&VarMeta> {
        self.bool_meta.get(&v)
    }

    pub fn finite_meta(&self, v: FiniteVar) -> Option<&VarMeta> {
        self.finite_meta.get(&v)
    }

    pub fn assignment(&self, m: &Model) -> Assignment {
        let mut a = Assignment::default();
        for slot in &self.roles {
            let chosen: Vec<String> = slot
                .systems
                .iter()
                .filter(|s| self.dep_var(&slot.workload, s).is_some_and(|v| m.bool(v)))
                .cloned()
                .collect();
            if !chosen.is_empty() {
                a.roles
                    .entry(slot.workload.clone())
                    .or_default()
                    .insert(slot.role.clone(), chosen);
            }
        }
        for d in &self.devices {
            a.hardware
                .insert(d.id.clone(), d.hardware[m.index(d.hw)].clone());
        }
        a
    }

    pub fn render_track(&self, t: TrackId) -> String {
        self.render(self.session.tracked_formula(t))
    }

    /// Human-readable form of a formula over encoder variables.
    pub fn render(&self, f: &Formula) -> String {
        match f {
            Formula::Const(b) => if *b { "True" } else { "False" }.to_string(),
            Formula::Var(v) => match self.bool_meta.get(v) {
                Some(VarMeta::Attr { device, entry }) => format!("{device}.{entry} == True"),
                _ => self.bool_name(*v),
            },
            Formula::Is(v, k) => match self.finite_meta.get(v) {
                Some(VarMeta::Hardware { device }) => {
                    let name = self
                        .device(device)
                        .map(|d| d.hardware[*k].clone())
                        .unwrap_or_default();
                    format!("hw[{device}] == {name}")
                }
                _ => format!(
                    "{} == {}",
                    self.session.finite_name(*v),
                    fmt_num(self.session.domain(*v)[*k])
                ),
            },
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Var(v) => match self.bool_meta.get(v) {
                    Some(VarMeta::Attr { device, entry }) => format!("{device}.{entry} == False"),
                    _ => format!("¬{}", self.bool_name(*v)),
                },
                Formula::Is(v, k) => self
                    .render(&Formula::Is(*v, *k))
                    .replacen(" == ", " != ", 1),
                other => format!("¬({})", self.render(other)),
            },
            Formula::And(xs) => self.join(xs, " ∧ "),
            Formula::Or(xs) => self.join(xs, " ∨ "),
            Formula::Implies(a, b) => {
                format!("{} ⇒ {}", self.render_inner(a), self.render_inner(b))
            }
            Formula::Iff(a, b) => format!("{} ⇔ {}", self.render_inner(a), self.render_inner(b)),
            Formula::Cmp(a, op, b) => format!(
                "{} {} {}",
                self.render_linear(a),
                op.symbol(),
                self.render_linear(b)
            ),
        }
    }

    fn render_inner(&self, f: &Formula) -> String {
        match f {
            Formula::And(xs) | Formula::Or(xs) if xs.len() > 1 => format!("({})", self.render(f)),
            Formula::Implies(..) | Formula::Iff(..) => format!("({})", self.render(f)),
            _ => self.render(f),
        }
    }

    fn join(&self, xs: &[Formula], sep: &str) -> String {
        xs.iter()
            .map(|x| self.render_inner(x))
            .collect::<Vec<_>>()
            .join(sep)
    }

    fn render_linear(&self, l: &Linear) -> String {
        let mut parts: Vec<String> = l
            .terms
            .iter()
            .map(|(c, t)| {
                let body = match t {
                    Term::Value(v) => match self.finite_meta.get(v) {
                        Some(VarMeta::Attr { device, entry }) => format!("{device}.{entry}"),
                        _ => self.session.finite_name(*v).to_string(),
                    },
                    Term::Indicator(f) => format!("[{}]", self.render(f)),
                };
                if *c == 1.0 {
                    body
                } else {
                    format!("{}·{}", fmt_num(*c), body)
                }
            })
            .collect();
        if l.constant != 0.0 || parts.is_empty() {
            parts.push(fmt_num(l.constant));
        }
        parts.join(" + ")
    }

    fn bool_name(&self, v: BoolVar) -> String {
        match self.bool_meta.get(&v) {
            Some(VarMeta::Deployed { workload, system }) => {
                format!("deployed({workload}, {system})")
            }
            Some(VarMeta::Enabled { workload, role }) => format!("enabled({workload}, {role})"),
            _ => self.session.bool_name(v).to_string(),
        }
    }
}

pub fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

pub fn encode(catalog: &Catalog, query: &Query) -> Result<Encoded, String> {
    let mut e = Encoded {
        session: SolverSession::new(),
        origins: Vec::new(),
        devices: Vec::new(),
        dep: BTreeMap::new(),
        enabled: BTreeMap::new(),
        roles: Vec::new(),
        soft: Vec::new(),
        bool_meta: HashMap::new(),
        finite_meta: HashMap::new(),
    };
    encode_devices(&mut e, catalog, query)?;

    // Deployment and role variables.
    for w in &query.workloads {
        for r in &catalog.roles {
            let v = e.session.new_bool(format!("enabled[{}@{}]", r.id, w.id));
            e.bool_meta.insert(
                v,
                VarMeta::Enabled {
                    workload: w.id.clone(),
                    role: r.id.clone(),
                },
            );
            e.enabled.insert((w.id.clone(), r.id.clone()), v);
        }
        for s in &catalog.systems {
            let v = e.session.new_bool(format!("dep[{}@{}]", s.id, w.id));
            e.bool_meta.insert(
                v,
                VarMeta::Deployed {
                    workload: w.id.clone(),
                    system: s.id.clone(),
                },
            );
            e.dep.insert((w.id.clone(), s.id.clone()), v);
        }
    }

    let mut demands: Vec<(String, Demand)> = Vec::new();
    for w in &query.workloads {
        encode_workload(&mut e, catalog, query, w, &mut demands)?;
    }

    for c in &query.constraints {
        let w = query
            .workload(&c.workload)
            .ok_or_else(|| format!("constraint {}: unknown workload", c.id))?;
        let mut local = Vec::new();
        let f = lower_bool(&e, &c.expr, w, query, &mut Vec::new(), &mut local)?;
        if !local.is_empty() {
            return Err(format!(
                "constraint {}: architect constraints cannot allocate resources",
                c.id
            ));
        }
        match c.hardness {
            Hardness::Hard => {
                let label = c
                    .label
                    .clone()
                    .unwrap_or_else(|| format!("architect constraint {}: {}", c.id, c.expr));
                e.track(
                    f,
                    OriginRecord::new(Origin::Architect, label)
                        .workload(&w.id)
                        .detail(c.id.clone()),
                );
            }
            Hardness::Optional => {
                e.session.assert_soft(f);
                e.soft.push(SoftItem::Optional { id: c.id.clone() });
            }
        }
    }

    encode_capacity(&mut e, catalog, query, demands)?;
    encode_objectives(&mut e, catalog, query)?;
    encode_tiebreaks(&mut e);
    Ok(e)
}

fn encode_devices(e: &mut Encoded, catalog: &Catalog, query: &Query) -> Result<(), String> {
    for slot in query.topology.devices() {
        let schema = catalog
            .schema(&slot.schema)
            .ok_or_else(|| format!("device {}: unknown schema", slot.id))?;
        let mut hw: Vec<_> = catalog
            .hardware
            .iter()
            .filter(|h| h.schema == slot.schema && !query.excluded_hardware.contains(&h.id))
            .collect();
        if let Some(p) = query.pin_for(slot) {
            hw.retain(|h| h.id == p);
        }
        hw.sort_by(|a, b| a.id.cmp(&b.id));
        let names: Vec<String> = if hw.is_empty() {
            vec![NO_HARDWARE.to_string()]
        } else {
            hw.iter().map(|h| h.id.clone()).collect()
        };
        let hv = e.session.new_finite(
            format!("hw[{}]", slot.id),
            (0..names.len()).map(|i| i as f64).collect(),
        );
        e.finite_meta.insert(
            hv,
            VarMeta::Hardware {
                device: slot.id.clone(),
            },
        );

        let mut attrs = BTreeMap::new();
        for (entry, spec) in &schema.entries {
            let meta = VarMeta::Attr {
                device: slot.id.clone(),
                entry: entry.clone(),
            };
            let name = format!("{}.{}", slot.id, entry);
            let var = match spec.kind {
                EntryKind::Bool => {
                    let v = e.session.new_bool(name);
                    e.bool_meta.insert(v, meta);
                    AttrVar::Bool(v)
                }
                EntryKind::Real | EntryKind::Exhaustible => {
                    let mut dom: Vec<f64> = hw
                        .iter()
                        .filter_map(|h| catalog.hardware_value(h, entry)?.as_f64())
                        .collect();
                    dom.sort_by(f64::total_cmp);
                    dom.dedup();
                    if dom.is_empty() {
                        dom.push(0.0);
                    }
                    let v = e.session.new_finite(name, dom);
                    e.finite_meta.insert(v, meta);
                    AttrVar::Finite(v)
                }
            };
            attrs.insert(entry.clone(), var);
        }

        if hw.is_empty() {
            e.track(
                Formula::not(Formula::Is(hv, 0)),
                OriginRecord::new(
                    Origin::DeviceFill,
                    format!("no admissible hardware for {}", slot.id),
                )
                .device(&slot.id),
            );
        }
        for (k, h) in hw.iter().enumerate() {
            let mut parts = Vec::new();
            for (entry, var) in &attrs {
                let Some(val) = catalog.hardware_value(h, entry) else {
                    continue;
                };
                parts.push(attr_equals(&e.session, *var, val));
            }
            e.track(
                Formula::implies(Formula::Is(hv, k), Formula::and(parts)),
                OriginRecord::new(
                    Origin::DeviceFill,
                    format!("{} on {} fixes its attributes", h.id, slot.id),
                )
                .device(&slot.id)
                .hardware(&h.id),
            );
        }
        e.devices.push(DeviceVars {
            id: slot.id.clone(),
            hw: hv,
            hardware: names,
            attrs,
        });
    }
    Ok(())
}

fn attr_equals(s: &SolverSession, var: AttrVar, val: Value) -> Formula {
    match (var, val) {
        (AttrVar::Bool(b), Value::Bool(true)) => Formula::Var(b),
        (AttrVar::Bool(b), Value::Bool(false)) => Formula::not(Formula::Var(b)),
        (AttrVar::Finite(f), Value::Num(x)) => match s.domain(f).iter().position(|d| *d == x) {
            Some(i) => Formula::Is(f, i),
            None => Formula::Const(false),
        },
        _ => Formula::Const(false),
    }
}

fn encode_workload(
    e: &mut Encoded,
    catalog: &Catalog,
    query: &Query,
    w: &WorkloadSpec,
    demands: &mut Vec<(String, Demand)>,
) -> Result<(), String> {
    let ctx = WorkloadContext::new(query, w);
    let active: BTreeSet<String> = activated_roles(catalog, query, w)
        .into_iter()
        .map(|(r, _)| r)
        .collect();

    for r in &catalog.roles {
        let v = e.enabled[&(w.id.clone(), r.id.clone())];
        let on = active.contains(&r.id);
        let label = if on {
            format!("role {} is enabled for {}", r.id, w.id)
        } else if w.exempted_roles.contains(&r.id) {
            format!("role {} is exempted for {}", r.id, w.id)
        } else if !r.considered {
            format!("role {} is not considered", r.id)
        } else {
            format!("role {} is not activated for {}", r.id, w.id)
        };
        let f = if on {
            Formula::Var(v)
        } else {
            Formula::not(Formula::Var(v))
        };
        e.track(
            f,
            OriginRecord::new(Origin::RoleActivation, label)
                .workload(&w.id)
                .role(&r.id),
        );
    }

    for s in &catalog.systems {
        let dep = e.dep[&(w.id.clone(), s.id.clone())];
        let roles: Vec<Formula> = s
            .roles
            .iter()
            .filter_map(|r| e.enabled.get(&(w.id.clone(), r.clone())))
            .map(|v| Formula::Var(*v))
            .collect();
        e.track(
            Formula::implies(Formula::Var(dep), Formula::or(roles)),
            OriginRecord::new(
                Origin::RoleActivation,
                format!(
                    "{} needs one of its roles ({}) enabled for {}",
                    s.id,
                    s.roles.join(", "),
                    w.id
                ),
            )
            .workload(&w.id)
            .system(&s.id),
        );
    }

    for r in catalog.roles.iter().filter(|r| active.contains(&r.id)) {
        let systems = role_systems(catalog, &r.id);
        let deps: Vec<Formula> = systems
            .iter()
            .map(|s| Formula::Var(e.dep[&(w.id.clone(), s.clone())]))
            .collect();
        let some = Formula::or(deps.clone());
        let amo = Formula::cmp(
            deps.iter().fold(Linear::constant(0.0), |acc, d| {
                acc.add(Linear::indicator(d.clone(), 1.0))
            }),
            CmpOp::Le,
            Linear::constant(1.0),
        );
        let hard = role_is_hard(catalog, query, w, &r.id);
        let rec = |label: String| {
            OriginRecord::new(Origin::RoleFulfill, label)
                .workload(&w.id)
                .role(&r.id)
        };
        if hard {
            let f = if r.is_exclusive {
                Formula::and(vec![some, amo])
            } else {
                some
            };
            e.track(
                f,
                rec(format!("role {} must be fulfilled for {}", r.id, w.id)),
            );
        } else {
            if r.is_exclusive {
                e.track(
                    amo,
                    rec(format!("at most one system may fill {} for {}", r.id, w.id)),
                );
            }
            e.session.assert_soft(some);
            e.soft.push(SoftItem::Role {
                workload: w.id.clone(),
                role: r.id.clone(),
            });
        }
        e.roles.push(RoleSlot {
            workload: w.id.clone(),
            role: r.id.clone(),
            exclusive: r.is_exclusive,
            hard,
            systems,
        });
    }

    let mut excluded: Vec<&String> = query.excluded_systems.iter().collect();
    excluded.sort();
    excluded.dedup();
    for s in excluded {
        if let Some(v) = e.dep.get(&(w.id.clone(), s.clone())).copied() {
            e.track(
                Formula::not(Formula::Var(v)),
                OriginRecord::new(
                    Origin::Architect,
                    format!("{s} is excluded by the architect"),
                )
                .workload(&w.id)
                .system(s)
                .detail("excluded_systems"),
            );
        }
    }

    for s in &catalog.systems {
        if query.excluded_systems.contains(&s.id) || !s.roles.iter().any(|r| active.contains(r)) {
            continue;
        }
        let dep = Formula::Var(e.dep[&(w.id.clone(), s.id.clone())]);
        for conj in s.deployment_constraints.conjuncts() {
            let mut local = Vec::new();
            let f = lower_bool(e, conj, w, query, &mut Vec::new(), &mut local)
                .map_err(|m| format!("system {} for {}: {m}", s.id, w.id))?;
            for mut d in local {
                d.guard = Formula::and(vec![dep.clone(), d.guard]);
                d.system = Some(s.id.clone());
                demands.push((w.id.clone(), d));
            }
            if f == Formula::Const(true) {
                continue;
            }
            let label = conj
                .id
                .as_ref()
                .and_then(|id| s.constraint_labels.get(id).cloned())
                .or_else(|| conj.label.clone())
                .unwrap_or_else(|| format!("{} requires {}", s.id, conj));
            let mut rec = OriginRecord::new(Origin::SystemConstraint, label)
                .workload(&w.id)
                .system(&s.id);
            if let Some(id) = &conj.id {
                rec = rec.detail(id.clone());
            }
            e.track(Formula::implies(dep.clone(), f), rec);
        }
    }

    for (scalar, resource) in WORKLOAD_DEMANDS {
        let amount = ctx.scalar(scalar).unwrap_or(0.0);
        if amount <= 0.0 {
            continue;
        }
        let devices: Vec<String> = ctx
            .devices
            .iter()
            .filter(|d| has_exhaustible(catalog, query, d, resource))
            .cloned()
            .collect();
        if devices.is_empty() {
            continue;
        }
        demands.push((
            w.id.clone(),
            Demand {
                resource: resource.to_string(),
                scope: AllocationScope::PerWorkloadGlobal,
                devices,
                amount,
                guard: Formula::Const(true),
                system: None,
            },
        ));
    }

    for b in &w.performance_bounds {
        let roles: Vec<String> = bound_roles(catalog, b)
            .into_iter()
            .filter(|r| active.contains(r))
            .collect();
        if let Some(best) = &b.at_least {
            let mut ranked = false;
            for r in &roles {
                let table = rank_table(catalog, query, w, r, &b.objective)
                    .map_err(|c| format!("ordering cycle among {}", c.join(", ")))?;
                if !table.mentioned.contains(best) {
                    continue;
                }
                ranked = true;
                for x in role_systems(catalog, r) {
                    if table.dominators(&x).contains(best) {
                        let v = e.dep[&(w.id.clone(), x.clone())];
                        e.track(
                            Formula::not(Formula::Var(v)),
                            OriginRecord::new(
                                Origin::OrderingBound,
                                format!(
                                    "{} needs {} at least as good as {best}; {x} is worse",
                                    w.id, b.objective
                                ),
                            )
                            .workload(&w.id)
                            .system(&x)
                            .role(r)
                            .detail("at_least"),
                        );
                    }
                }
            }
            if !ranked && !roles.is_empty() {
                return Err(format!(
                    "performance bound of {}: {best} is not ranked on {}",
                    w.id, b.objective
                ));
            }
        } else if let Some(tag) = &b.solves {
            for r in &roles {
                for x in catalog.systems_for_role(r) {
                    if x.solves.iter().any(|t| tag_covers(tag, t)) {
                        continue;
                    }
                    let v = e.dep[&(w.id.clone(), x.id.clone())];
                    e.track(
                        Formula::not(Formula::Var(v)),
                        OriginRecord::new(
                            Origin::OrderingBound,
                            format!(
                                "{} needs a {r} system that solves {tag}; {} does not",
                                w.id, x.id
                            ),
                        )
                        .workload(&w.id)
                        .system(&x.id)
                        .role(r)
                        .detail(BOUND_SOLVES),
                    );
                }
            }
        }
    }
    Ok(())
}

fn has_exhaustible(catalog: &Catalog, query: &Query, device: &str, resource: &str) -> bool {
    query
        .topology
        .device(device)
        .and_then(|d| catalog.schema(&d.schema))
        .and_then(|s| s.entries.get(resource))
        .is_some_and(|e| e.kind == EntryKind::Exhaustible)
}

fn lower_bool(
    e: &Encoded,
    x: &ConstraintExpr,
    w: &WorkloadSpec,
    q: &Query,
    env: &mut Vec<(String, String)>,
    out: &mut Vec<Demand>,
) -> Result<Formula, String> {
    match lower(e, x, w, q, env, out)? {
        Lowered::Bool(f) => Ok(f),
        Lowered::Num(_) => Err(format!("expected a boolean at `{}`", x.op_name())),
    }
}

fn lower_num(
    e: &Encoded,
    x: &ConstraintExpr,
    w: &WorkloadSpec,
    q: &Query,
    env: &mut Vec<(String, String)>,
    out: &mut Vec<Demand>,
) -> Result<Linear, String> {
    match lower(e, x, w, q, env, out)? {
        Lowered::Num(l) => Ok(l),
        Lowered::Bool(_) => Err(format!("expected a number at `{}`", x.op_name())),
    }
}

/// Symbolic counterpart of `dsl::evaluate`. Demands are returned with guards
/// relative to `x`: the caller conjoins whatever makes `x` apply.
fn lower(
    e: &Encoded,
    x: &ConstraintExpr,
    w: &WorkloadSpec,
    q: &Query,
    env: &mut Vec<(String, String)>,
    out: &mut Vec<Demand>,
) -> Result<Lowered, String> {
    let ctx = WorkloadContext::new(q, w);
    Ok(match &x.node {
        Node::Bool(b) => Lowered::Bool(Formula::Const(*b)),
        Node::Num(n) => Lowered::Num(Linear::constant(*n)),
        Node::Scalar(name) => Lowered::Num(Linear::constant(
            ctx.scalar(name)
                .ok_or_else(|| format!("unknown scalar {name}"))?,
        )),
        Node::HasProperty(t) => Lowered::Bool(Formula::Const(w.properties.contains(t))),
        Node::ColocatedHasProperty(t) => Lowered::Bool(Formula::Const(
            ctx.colocated.iter().any(|o| o.properties.contains(t)),
        )),
        Node::Attr { slot, entry } => {
            let device = match slot {
                SlotRef::Device(d) => d.clone(),
                SlotRef::Var(v) => env
                    .iter()
                    .rev()
                    .find(|(n, _)| n == v)
                    .map(|(_, d)| d.clone())
                    .ok_or_else(|| format!("unbound variable {v}"))?,
            };
            let dv = e
                .device(&device)
                .ok_or_else(|| format!("unknown device {device}"))?;
            match dv.attrs.get(entry) {
                Some(AttrVar::Bool(b)) => Lowered::Bool(Formula::Var(*b)),
                Some(AttrVar::Finite(f)) => Lowered::Num(Linear::value(*f)),
                None => return Err(format!("device {device} has no entry {entry}")),
            }
        }
        Node::Deployed { system, workload } => {
            let wid = workload.clone().unwrap_or_else(|| w.id.clone());
            let v = e
                .dep_var(&wid, system)
                .ok_or_else(|| format!("unknown deployment {system}@{wid}"))?;
            Lowered::Bool(Formula::Var(v))
        }
        Node::RoleEnabled(r) => {
            let v = e
                .enabled
                .get(&(w.id.clone(), r.clone()))
                .ok_or_else(|| format!("unknown role {r}"))?;
            Lowered::Bool(Formula::Var(*v))
        }
        Node::Add(xs) => {
            let mut acc = Linear::constant(0.0);
            for a in xs {
                acc = acc.add(lower_num(e, a, w, q, env, out)?);
            }
            Lowered::Num(acc)
        }
        Node::Sub(a, b) => {
            let a = lower_num(e, a, w, q, env, out)?;
            Lowered::Num(a.sub(lower_num(e, b, w, q, env, out)?))
        }
        Node::Mul(xs) => {
            let mut k = 1.0;
            let mut var: Option<Linear> = None;
            for a in xs {
                let l = lower_num(e, a, w, q, env, out)?;
                match l.as_constant() {
                    Some(c) => k *= c,
                    None if var.is_none() => var = Some(l),
                    None => return Err("product of two non-constant terms".into()),
                }
            }
            Lowered::Num(
                var.map(|l| l.scale(k))
                    .unwrap_or_else(|| Linear::constant(k)),
            )
        }
        Node::Cmp(op, a, b) => {
            let a = lower_num(e, a, w, q, env, out)?;
            let b = lower_num(e, b, w, q, env, out)?;
            Lowered::Bool(Formula::cmp(a, *op, b))
        }
        Node::And(xs) => {
            let mut fs = Vec::new();
            for a in xs {
                fs.push(lower_bool(e, a, w, q, env, out)?);
            }
            Lowered::Bool(Formula::and(fs))
        }
        Node::Or(xs) => {
            let mut fs = Vec::new();
            for a in xs {
                let mut local = Vec::new();
                let f = lower_bool(e, a, w, q, env, &mut local)?;
                for mut d in local {
                    d.guard = Formula::and(vec![f.clone(), d.guard]);
                    out.push(d);
                }
                fs.push(f);
            }
            Lowered::Bool(Formula::or(fs))
        }
        Node::Not(a) => Lowered::Bool(Formula::not(lower_bool(e, a, w, q, env, &mut Vec::new())?)),
        Node::Implies(a, b) => {
            let fa = lower_bool(e, a, w, q, env, &mut Vec::new())?;
            let mut local = Vec::new();
            let fb = lower_bool(e, b, w, q, env, &mut local)?;
            for mut d in local {
                d.guard = Formula::and(vec![fa.clone(), d.guard]);
                out.push(d);
            }
            Lowered::Bool(Formula::implies(fa, fb))
        }
        Node::ForAll {
            device_type,
            var,
            body,
        } => {
            let mut fs = Vec::new();
            for d in ctx.devices_of_type(device_type) {
                env.push((var.clone(), d));
                let r = lower_bool(e, body, w, q, env, out);
                env.pop();
                fs.push(r?);
            }
            Lowered::Bool(Formula::and(fs))
        }
        Node::Count { device_type } => Lowered::Num(Linear::constant(
            ctx.devices_of_type(device_type).len() as f64,
        )),
        Node::Allocate {
            resource,
            amount,
            scope,
            target,
        } => {
            let amount = lower_num(e, amount, w, q, env, out)?
                .as_constant()
                .ok_or_else(|| format!("allocation of {resource} must have a constant amount"))?;
            if amount < 0.0 {
                return Err(format!("negative allocation of {resource}: {amount}"));
            }
            let devices = match target {
                AllocTarget::Var(v) => vec![env
                    .iter()
                    .rev()
                    .find(|(n, _)| n == v)
                    .map(|(_, d)| d.clone())
                    .ok_or_else(|| format!("unbound variable {v}"))?],
                AllocTarget::DeviceType(t) => ctx.devices_of_type(t),
            };
            out.push(Demand {
                resource: resource.clone(),
                scope: *scope,
                devices,
                amount,
                guard: Formula::Const(true),
                system: None,
            });
            Lowered::Bool(Formula::Const(true))
        }
    })
}

/// Splits a workload-global amount: integral amounts give the remainder to
/// the first devices (in id order), others split evenly.
pub fn spread(amount: f64, devices: &[String]) -> Vec<(String, f64)> {
    let mut ds = devices.to_vec();
    ds.sort();
    ds.dedup();
    let n = ds.len();
    if n == 0 {
        return Vec::new();
    }
    if amount.fract() == 0.0 {
        let total = amount as u64;
        let base = total / n as u64;
        let rem = (total % n as u64) as usize;
        ds.into_iter()
            .enumerate()
            .map(|(i, d)| (d, (base + u64::from(i < rem)) as f64))
            .collect()
    } else {
        ds.into_iter().map(|d| (d, amount / n as f64)).collect()
    }
}

fn encode_capacity(
    e: &mut Encoded,
    catalog: &Catalog,
    query: &Query,
    demands: Vec<(String, Demand)>,
) -> Result<(), String> {
    let mut charges: BTreeMap<(String, String), Vec<(f64, Formula)>> = BTreeMap::new();
    // (system, device, resource) → (amount, guard) across workloads.
    let mut shared: BTreeMap<(String, String, String), Vec<(f64, Formula)>> = BTreeMap::new();
    for (w, d) in demands {
        match d.scope {
            AllocationScope::PerDevice => {
                for dev in &d.devices {
                    charges
                        .entry((dev.clone(), d.resource.clone()))
                        .or_default()
                        .push((d.amount, d.guard.clone()));
                }
            }
            AllocationScope::PerWorkloadGlobal => {
                for (dev, a) in spread(d.amount, &d.devices) {
                    charges
                        .entry((dev, d.resource.clone()))
                        .or_default()
                        .push((a, d.guard.clone()));
                }
            }
            AllocationScope::PerSystemGlobal => {
                let owner = d.system.clone().unwrap_or_else(|| format!("workload:{w}"));
                let mut devs = d.devices.clone();
                devs.sort();
                devs.dedup();
                for dev in devs {
                    shared
                        .entry((owner.clone(), dev, d.resource.clone()))
                        .or_default()
                        .push((d.amount, d.guard.clone()));
                }
            }
        }
    }
    // Charged once at the largest amount among the active demands: a
    // telescoping sum over the distinct amounts.
    for ((_, dev, res), list) in shared {
        let mut amounts: Vec<f64> = list.iter().map(|x| x.0).collect();
        amounts.sort_by(f64::total_cmp);
        amounts.dedup();
        let mut prev = 0.0;
        for a in amounts {
            let guard = Formula::or(
                list.iter()
                    .filter(|x| x.0 >= a)
                    .map(|x| x.1.clone())
                    .collect(),
            );
            charges
                .entry((dev.clone(), res.clone()))
                .or_default()
                .push((a - prev, guard));
            prev = a;
        }
    }

    for ((dev, res), list) in charges {
        let used = list
            .into_iter()
            .filter(|(a, g)| *a > 0.0 && *g != Formula::Const(false))
            .fold(Linear::constant(0.0), |acc, (a, g)| {
                acc.add(Linear::indicator(g, a))
            });
        if used.terms.is_empty() && used.constant == 0.0 {
            continue;
        }
        let cap = match e.device(&dev).and_then(|d| d.attrs.get(&res)) {
            Some(AttrVar::Finite(f)) if has_exhaustible(catalog, query, &dev, &res) => {
                Linear::value(*f)
            }
            _ => Linear::constant(0.0),
        };
        e.track(
            Formula::cmp(used, CmpOp::Le, cap),
            OriginRecord::new(
                Origin::Capacity,
                format!("{res} demanded on {dev} must fit its capacity"),
            )
            .device(&dev)
            .resource(&res),
        );
    }
    Ok(())
}

fn encode_objectives(e: &mut Encoded, catalog: &Catalog, query: &Query) -> Result<(), String> {
    let mut directives = query.optimize.clone();
    directives.sort_by_key(|d| d.priority);
    for d in directives {
        match d.target() {
            Some(OptimizeTarget::Objective {
                workload,
                objective,
            }) => {
                let w = query
                    .workload(&workload)
                    .ok_or_else(|| format!("unknown workload {workload}"))?;
                let mut expr = Linear::constant(0.0);
                for slot in e.roles.iter().filter(|s| s.workload == workload) {
                    if !role_relevant(catalog, query, &slot.role, &objective) {
                        continue;
                    }
                    let table = rank_table(catalog, query, w, &slot.role, &objective)
                        .map_err(|c| format!("ordering cycle among {}", c.join(", ")))?;
                    for s in &slot.systems {
                        let r = table.rank(s);
                        if r > 0 {
                            let v = e.dep[&(workload.clone(), s.clone())];
                            expr = expr.add(Linear::indicator(Formula::Var(v), r as f64));
                        }
                    }
                }
                e.session.add_objective(d.describe(), Sense::Maximize, expr);
            }
            Some(OptimizeTarget::TotalCost) => {
                let mut expr = Linear::constant(0.0);
                for dv in &e.devices {
                    if let Some(AttrVar::Finite(f)) = dv.attrs.get("cost") {
                        expr = expr.add(Linear::value(*f));
                    }
                }
                e.session.add_objective(d.describe(), Sense::Minimize, expr);
            }
            None => {
                return Err(format!(
                    "malformed optimize directive with priority {}",
                    d.priority
                ))
            }
        }
    }
    Ok(())
}

fn encode_tiebreaks(e: &mut Encoded) {
    let mut slots = e.roles.clone();
    slots.sort_by(|a, b| (&a.workload, &a.role).cmp(&(&b.workload, &b.role)));
    for slot in slots {
        let deps: Vec<Formula> = slot
            .systems
            .iter()
            .map(|s| Formula::Var(e.dep[&(slot.workload.clone(), s.clone())]))
            .collect();
        if slot.exclusive {
            let mut cands = deps.clone();
            cands.push(Formula::and(
                deps.iter().map(|d| Formula::not(d.clone())).collect(),
            ));
            e.session.add_tiebreak(cands);
        } else {
            for d in deps {
                e.session.add_tiebreak(vec![Formula::not(d.clone()), d]);
            }
        }
    }
    let mut devs: Vec<(String, FiniteVar, usize)> = e
        .devices
        .iter()
        .map(|d| (d.id.clone(), d.hw, d.hardware.len()))
        .collect();
    devs.sort();
    for (_, hv, n) in devs {
        e.session
            .add_tiebreak((0..n).map(|k| Formula::Is(hv, k)).collect());
    }
}
