//! Declarative constraint expressions attached to roles, systems, warnings,
//! orderings and architect constraints.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

pub use crate::smt::CmpOp;

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintExpr {
    pub id: Option<String>,
    pub label: Option<String>,
    pub node: Node,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SlotRef {
    /// Slot bound by an enclosing `forall`.
    Var(String),
    /// Concrete device id.
    Device(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum AllocTarget {
    Var(String),
    DeviceType(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AllocationScope {
    PerDevice,
    PerWorkloadGlobal,
    PerSystemGlobal,
}

impl AllocationScope {
    fn as_str(self) -> &'static str {
        match self {
            AllocationScope::PerDevice => "PER_DEVICE",
            AllocationScope::PerWorkloadGlobal => "PER_WORKLOAD_GLOBAL",
            AllocationScope::PerSystemGlobal => "PER_SYSTEM_GLOBAL",
        }
    }
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "PER_DEVICE" => AllocationScope::PerDevice,
            "PER_WORKLOAD_GLOBAL" => AllocationScope::PerWorkloadGlobal,
            "PER_SYSTEM_GLOBAL" => AllocationScope::PerSystemGlobal,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Bool(bool),
    Num(f64),
    Scalar(String),
    HasProperty(String),
    /// Some other workload sharing a device with this one has the tag.
    ColocatedHasProperty(String),
    Attr {
        slot: SlotRef,
        entry: String,
    },
    Deployed {
        system: String,
        workload: Option<String>,
    },
    RoleEnabled(String),
    Add(Vec<ConstraintExpr>),
    Sub(Box<ConstraintExpr>, Box<ConstraintExpr>),
    Mul(Vec<ConstraintExpr>),
    Cmp(CmpOp, Box<ConstraintExpr>, Box<ConstraintExpr>),
    And(Vec<ConstraintExpr>),
    Or(Vec<ConstraintExpr>),
    Not(Box<ConstraintExpr>),
    Implies(Box<ConstraintExpr>, Box<ConstraintExpr>),
    ForAll {
        device_type: String,
        var: String,
        body: Box<ConstraintExpr>,
    },
    Count {
        device_type: String,
    },
    Allocate {
        resource: String,
        amount: Box<ConstraintExpr>,
        scope: AllocationScope,
        target: AllocTarget,
    },
}

// Short constructors, mostly for tests and generated catalogs.
impl ConstraintExpr {
    pub fn new(node: Node) -> Self {
        ConstraintExpr {
            id: None,
            label: None,
            node,
        }
    }
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
    pub fn truth(b: bool) -> Self {
        Self::new(Node::Bool(b))
    }
    pub fn num(x: f64) -> Self {
        Self::new(Node::Num(x))
    }
    pub fn prop(tag: &str) -> Self {
        Self::new(Node::HasProperty(tag.into()))
    }
    pub fn scalar(name: &str) -> Self {
        Self::new(Node::Scalar(name.into()))
    }
    pub fn attr(var: &str, entry: &str) -> Self {
        Self::new(Node::Attr {
            slot: SlotRef::Var(var.into()),
            entry: entry.into(),
        })
    }
    pub fn deployed(system: &str) -> Self {
        Self::new(Node::Deployed {
            system: system.into(),
            workload: None,
        })
    }
    pub fn and(args: Vec<ConstraintExpr>) -> Self {
        Self::new(Node::And(args))
    }
    pub fn or(args: Vec<ConstraintExpr>) -> Self {
        Self::new(Node::Or(args))
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(a: ConstraintExpr) -> Self {
        Self::new(Node::Not(Box::new(a)))
    }
    pub fn implies(a: ConstraintExpr, b: ConstraintExpr) -> Self {
        Self::new(Node::Implies(Box::new(a), Box::new(b)))
    }
    pub fn cmp(op: CmpOp, a: ConstraintExpr, b: ConstraintExpr) -> Self {
        Self::new(Node::Cmp(op, Box::new(a), Box::new(b)))
    }
    pub fn forall(device_type: &str, var: &str, body: ConstraintExpr) -> Self {
        Self::new(Node::ForAll {
            device_type: device_type.into(),
            var: var.into(),
            body: Box::new(body),
        })
    }

    /// Top-level conjuncts (the expression itself when it is not an AND).
    pub fn conjuncts(&self) -> Vec<&ConstraintExpr> {
        match &self.node {
            Node::And(args) => args.iter().collect(),
            _ => vec![self],
        }
    }

    /// Every node id in the tree.
    pub fn node_ids(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Some(id) = &e.id {
                out.push(id.clone());
            }
        });
        out
    }

    pub fn walk(&self, f: &mut dyn FnMut(&ConstraintExpr)) {
        f(self);
        match &self.node {
            Node::Add(a) | Node::Mul(a) | Node::And(a) | Node::Or(a) => {
                a.iter().for_each(|x| x.walk(f))
            }
            Node::Sub(a, b) | Node::Cmp(_, a, b) | Node::Implies(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Node::Not(a) => a.walk(f),
            Node::ForAll { body, .. } => body.walk(f),
            Node::Allocate { amount, .. } => amount.walk(f),
            _ => {}
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvalValue {
    Bool(bool),
    Num(f64),
}

impl EvalValue {
    fn kind(&self) -> &'static str {
        match self {
            EvalValue::Bool(_) => "bool",
            EvalValue::Num(_) => "number",
        }
    }
}

/// Concrete demand emitted by an `allocate` node.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    pub resource: String,
    pub scope: AllocationScope,
    /// For PER_DEVICE / PER_SYSTEM_GLOBAL: charged to each listed device.
    /// For PER_WORKLOAD_GLOBAL: spread across them.
    pub devices: Vec<String>,
    pub amount: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound reference: {0}")]
    UnboundReference(String),
    #[error("kind mismatch at {at}: expected {expected}, found {found}")]
    KindMismatch {
        at: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("negative allocation of {resource}: {amount}")]
    NegativeAllocation { resource: String, amount: f64 },
}

/// Concrete context an expression is evaluated in.
pub trait Binding {
    fn scalar(&self, name: &str) -> Option<f64>;
    fn has_property(&self, tag: &str) -> Option<bool>;
    fn colocated_has_property(&self, tag: &str) -> Option<bool>;
    fn attr(&self, device: &str, entry: &str) -> Option<EvalValue>;
    fn deployed(&self, system: &str, workload: Option<&str>) -> Option<bool>;
    fn role_enabled(&self, role: &str) -> Option<bool>;
    /// Devices of the given type that the current workload occupies.
    fn devices_of_type(&self, device_type: &str) -> Option<Vec<String>>;
}

type Env = Vec<(String, String)>;

pub fn evaluate(
    expr: &ConstraintExpr,
    b: &dyn Binding,
) -> Result<(bool, Vec<Allocation>), EvalError> {
    let mut env = Env::new();
    let mut allocs = Vec::new();
    let v = eval_node(expr, b, &mut env, &mut allocs)?;
    match v {
        EvalValue::Bool(x) => Ok((x, allocs)),
        other => Err(kind_err(expr, "bool", other)),
    }
}

/// Evaluates a numeric expression (e.g. an allocation amount).
pub fn evaluate_number(expr: &ConstraintExpr, b: &dyn Binding) -> Result<f64, EvalError> {
    let mut env = Env::new();
    let mut allocs = Vec::new();
    match eval_node(expr, b, &mut env, &mut allocs)? {
        EvalValue::Num(x) => Ok(x),
        other => Err(kind_err(expr, "number", other)),
    }
}

fn kind_err(e: &ConstraintExpr, expected: &'static str, found: EvalValue) -> EvalError {
    EvalError::KindMismatch {
        at: e.op_name().to_string(),
        expected,
        found: found.kind(),
    }
}

fn as_bool(e: &ConstraintExpr, v: EvalValue) -> Result<bool, EvalError> {
    match v {
        EvalValue::Bool(x) => Ok(x),
        o => Err(kind_err(e, "bool", o)),
    }
}

fn as_num(e: &ConstraintExpr, v: EvalValue) -> Result<f64, EvalError> {
    match v {
        EvalValue::Num(x) => Ok(x),
        o => Err(kind_err(e, "number", o)),
    }
}

fn resolve_slot(slot: &SlotRef, env: &Env) -> Result<String, EvalError> {
    match slot {
        SlotRef::Device(d) => Ok(d.clone()),
        SlotRef::Var(v) => env
            .iter()
            .rev()
            .find(|(n, _)| n == v)
            .map(|(_, d)| d.clone())
            .ok_or_else(|| EvalError::UnboundReference(format!("slot variable {v}"))),
    }
}

fn eval_node(
    e: &ConstraintExpr,
    b: &dyn Binding,
    env: &mut Env,
    out: &mut Vec<Allocation>,
) -> Result<EvalValue, EvalError> {
    let unbound = |what: String| EvalError::UnboundReference(what);
    Ok(match &e.node {
        Node::Bool(x) => EvalValue::Bool(*x),
        Node::Num(x) => EvalValue::Num(*x),
        Node::Scalar(n) => {
            EvalValue::Num(b.scalar(n).ok_or_else(|| unbound(format!("scalar {n}")))?)
        }
        Node::HasProperty(t) => EvalValue::Bool(
            b.has_property(t)
                .ok_or_else(|| unbound(format!("property {t}")))?,
        ),
        Node::ColocatedHasProperty(t) => EvalValue::Bool(
            b.colocated_has_property(t)
                .ok_or_else(|| unbound(format!("colocated property {t}")))?,
        ),
        Node::Attr { slot, entry } => {
            let d = resolve_slot(slot, env)?;
            b.attr(&d, entry)
                .ok_or_else(|| unbound(format!("attribute {d}.{entry}")))?
        }
        Node::Deployed { system, workload } => EvalValue::Bool(
            b.deployed(system, workload.as_deref())
                .ok_or_else(|| unbound(format!("system {system}")))?,
        ),
        Node::RoleEnabled(r) => EvalValue::Bool(
            b.role_enabled(r)
                .ok_or_else(|| unbound(format!("role {r}")))?,
        ),
        Node::Add(args) => {
            let mut s = 0.0;
            for a in args {
                let v = eval_node(a, b, env, out)?;
                s += as_num(a, v)?;
            }
            EvalValue::Num(s)
        }
        Node::Mul(args) => {
            let mut s = 1.0;
            for a in args {
                let v = eval_node(a, b, env, out)?;
                s *= as_num(a, v)?;
            }
            EvalValue::Num(s)
        }
        Node::Sub(x, y) => {
            let vx = eval_node(x, b, env, out)?;
            let vy = eval_node(y, b, env, out)?;
            EvalValue::Num(as_num(x, vx)? - as_num(y, vy)?)
        }
        Node::Cmp(op, x, y) => {
            let vx = eval_node(x, b, env, out)?;
            let vy = eval_node(y, b, env, out)?;
            EvalValue::Bool(op.holds(as_num(x, vx)?, as_num(y, vy)?))
        }
        Node::And(args) => {
            let mut local = Vec::new();
            let mut all = true;
            for a in args {
                let v = eval_node(a, b, env, &mut local)?;
                all &= as_bool(a, v)?;
            }
            if all {
                out.extend(local);
            }
            EvalValue::Bool(all)
        }
        Node::Or(args) => {
            let mut any = false;
            for a in args {
                let mut local = Vec::new();
                let v = eval_node(a, b, env, &mut local)?;
                if as_bool(a, v)? {
                    any = true;
                    out.extend(local);
                }
            }
            EvalValue::Bool(any)
        }
        Node::Not(a) => {
            let mut discard = Vec::new();
            let v = eval_node(a, b, env, &mut discard)?;
            EvalValue::Bool(!as_bool(a, v)?)
        }
        Node::Implies(x, y) => {
            let mut discard = Vec::new();
            let vx = eval_node(x, b, env, &mut discard)?;
            if as_bool(x, vx)? {
                let vy = eval_node(y, b, env, out)?;
                EvalValue::Bool(as_bool(y, vy)?)
            } else {
                // Still kind-check the consequent without emitting demands.
                let vy = eval_node(y, b, env, &mut discard)?;
                as_bool(y, vy)?;
                EvalValue::Bool(true)
            }
        }
        Node::ForAll {
            device_type,
            var,
            body,
        } => {
            let devices = b
                .devices_of_type(device_type)
                .ok_or_else(|| unbound(format!("device type {device_type}")))?;
            let mut local = Vec::new();
            let mut all = true;
            for d in devices {
                env.push((var.clone(), d));
                let r = eval_node(body, b, env, &mut local);
                env.pop();
                all &= as_bool(body, r?)?;
            }
            if all {
                out.extend(local);
            }
            EvalValue::Bool(all)
        }
        Node::Count { device_type } => EvalValue::Num(
            b.devices_of_type(device_type)
                .ok_or_else(|| unbound(format!("device type {device_type}")))?
                .len() as f64,
        ),
        Node::Allocate {
            resource,
            amount,
            scope,
            target,
        } => {
            let mut discard = Vec::new();
            let v = eval_node(amount, b, env, &mut discard)?;
            let amt = as_num(amount, v)?;
            if amt < 0.0 {
                return Err(EvalError::NegativeAllocation {
                    resource: resource.clone(),
                    amount: amt,
                });
            }
            let devices = match target {
                AllocTarget::Var(v) => vec![resolve_slot(&SlotRef::Var(v.clone()), env)?],
                AllocTarget::DeviceType(t) => b
                    .devices_of_type(t)
                    .ok_or_else(|| unbound(format!("device type {t}")))?,
            };
            out.push(Allocation {
                resource: resource.clone(),
                scope: *scope,
                devices,
                amount: amt,
            });
            EvalValue::Bool(true)
        }
    })
}

/// Names an expression mentions, independent of its truth value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct References {
    pub scalars: BTreeSet<String>,
    pub properties: BTreeSet<String>,
    pub colocated_properties: BTreeSet<String>,
    pub systems: BTreeSet<String>,
    pub roles: BTreeSet<String>,
    pub resources: BTreeSet<String>,
    pub device_attrs: BTreeSet<String>,
    pub device_types: BTreeSet<String>,
    pub slots: BTreeSet<String>,
    pub workloads: BTreeSet<String>,
}

impl References {
    /// True when the expression depends only on workload context.
    pub fn is_workload_only(&self) -> bool {
        self.systems.is_empty()
            && self.roles.is_empty()
            && self.resources.is_empty()
            && self.device_attrs.is_empty()
            && self.device_types.is_empty()
            && self.slots.is_empty()
    }
}

pub fn free_references(expr: &ConstraintExpr) -> References {
    let mut r = References::default();
    expr.walk(&mut |e| match &e.node {
        Node::Scalar(n) => {
            r.scalars.insert(n.clone());
        }
        Node::HasProperty(t) => {
            r.properties.insert(t.clone());
        }
        Node::ColocatedHasProperty(t) => {
            r.colocated_properties.insert(t.clone());
        }
        Node::Attr { slot, entry } => {
            r.device_attrs.insert(entry.clone());
            if let SlotRef::Device(d) = slot {
                r.slots.insert(d.clone());
            }
        }
        Node::Deployed { system, workload } => {
            r.systems.insert(system.clone());
            if let Some(w) = workload {
                r.workloads.insert(w.clone());
            }
        }
        Node::RoleEnabled(x) => {
            r.roles.insert(x.clone());
        }
        Node::ForAll { device_type, .. } | Node::Count { device_type } => {
            r.device_types.insert(device_type.clone());
        }
        Node::Allocate {
            resource, target, ..
        } => {
            r.resources.insert(resource.clone());
            if let AllocTarget::DeviceType(t) = target {
                r.device_types.insert(t.clone());
            }
        }
        _ => {}
    });
    r
}

impl ConstraintExpr {
    pub fn op_name(&self) -> &'static str {
        match &self.node {
            Node::Bool(_) => "bool",
            Node::Num(_) => "num",
            Node::Scalar(_) => "scalar",
            Node::HasProperty(_) => "has_property",
            Node::ColocatedHasProperty(_) => "colocated_has_property",
            Node::Attr { .. } => "attr",
            Node::Deployed { .. } => "deployed",
            Node::RoleEnabled(_) => "role_enabled",
            Node::Add(_) => "add",
            Node::Sub(..) => "sub",
            Node::Mul(_) => "mul",
            Node::Cmp(op, ..) => cmp_name(*op),
            Node::And(_) => "and",
            Node::Or(_) => "or",
            Node::Not(_) => "not",
            Node::Implies(..) => "implies",
            Node::ForAll { .. } => "forall",
            Node::Count { .. } => "count",
            Node::Allocate { .. } => "allocate",
        }
    }

    pub fn to_json(&self) -> Json {
        let mut m = Map::new();
        m.insert("op".into(), json!(self.op_name()));
        if let Some(id) = &self.id {
            m.insert("id".into(), json!(id));
        }
        if let Some(l) = &self.label {
            m.insert("label".into(), json!(l));
        }
        let list = |xs: &[ConstraintExpr]| Json::Array(xs.iter().map(|x| x.to_json()).collect());
        match &self.node {
            Node::Bool(b) => {
                m.insert("value".into(), json!(b));
            }
            Node::Num(x) => {
                m.insert("value".into(), json!(x));
            }
            Node::Scalar(n) => {
                m.insert("name".into(), json!(n));
            }
            Node::HasProperty(t) | Node::ColocatedHasProperty(t) => {
                m.insert("tag".into(), json!(t));
            }
            Node::Attr { slot, entry } => {
                match slot {
                    SlotRef::Var(v) => m.insert("var".into(), json!(v)),
                    SlotRef::Device(d) => m.insert("slot".into(), json!(d)),
                };
                m.insert("entry".into(), json!(entry));
            }
            Node::Deployed { system, workload } => {
                m.insert("system".into(), json!(system));
                if let Some(w) = workload {
                    m.insert("workload".into(), json!(w));
                }
            }
            Node::RoleEnabled(r) => {
                m.insert("role".into(), json!(r));
            }
            Node::Add(a) | Node::Mul(a) | Node::And(a) | Node::Or(a) => {
                m.insert("args".into(), list(a));
            }
            Node::Sub(a, b) | Node::Cmp(_, a, b) | Node::Implies(a, b) => {
                m.insert("args".into(), Json::Array(vec![a.to_json(), b.to_json()]));
            }
            Node::Not(a) => {
                m.insert("arg".into(), a.to_json());
            }
            Node::ForAll {
                device_type,
                var,
                body,
            } => {
                m.insert("device_type".into(), json!(device_type));
                m.insert("var".into(), json!(var));
                m.insert("body".into(), body.to_json());
            }
            Node::Count { device_type } => {
                m.insert("device_type".into(), json!(device_type));
            }
            Node::Allocate {
                resource,
                amount,
                scope,
                target,
            } => {
                m.insert("resource".into(), json!(resource));
                m.insert("amount".into(), amount.to_json());
                m.insert("scope".into(), json!(scope.as_str()));
                match target {
                    AllocTarget::Var(v) => m.insert("var".into(), json!(v)),
                    AllocTarget::DeviceType(t) => m.insert("device_type".into(), json!(t)),
                };
            }
        }
        Json::Object(m)
    }

    pub fn from_json(v: &Json) -> Result<Self, String> {
        parse_node(v, "$")
    }
}

fn cmp_name(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Lt => "lt",
        CmpOp::Le => "le",
        CmpOp::Eq => "eq",
        CmpOp::Ge => "ge",
        CmpOp::Gt => "gt",
    }
}

fn parse_node(v: &Json, path: &str) -> Result<ConstraintExpr, String> {
    let obj = v
        .as_object()
        .ok_or_else(|| format!("{path}: expected an expression object"))?;
    let op = obj
        .get("op")
        .and_then(Json::as_str)
        .ok_or_else(|| format!("{path}: missing \"op\""))?;
    let allowed: &[&str] = match op {
        "bool" | "num" => &["value"],
        "scalar" => &["name"],
        "has_property" | "colocated_has_property" => &["tag"],
        "attr" => &["var", "slot", "entry"],
        "deployed" => &["system", "workload"],
        "role_enabled" => &["role"],
        "add" | "sub" | "mul" | "lt" | "le" | "eq" | "ge" | "gt" | "and" | "or" | "implies" => {
            &["args"]
        }
        "not" => &["arg"],
        "forall" => &["device_type", "var", "body"],
        "count" => &["device_type"],
        "allocate" => &["resource", "amount", "scope", "var", "device_type"],
        other => return Err(format!("{path}: unknown expression op \"{other}\"")),
    };
    for k in obj.keys() {
        if !matches!(k.as_str(), "op" | "id" | "label") && !allowed.contains(&k.as_str()) {
            return Err(format!("{path}: unexpected field \"{k}\" for op \"{op}\""));
        }
    }
    let s = |k: &str| -> Result<String, String> {
        obj.get(k)
            .and_then(Json::as_str)
            .map(str::to_string)
            .ok_or_else(|| format!("{path}: op \"{op}\" needs string field \"{k}\""))
    };
    let opt_s = |k: &str| -> Result<Option<String>, String> {
        match obj.get(k) {
            None | Some(Json::Null) => Ok(None),
            Some(Json::String(x)) => Ok(Some(x.clone())),
            Some(_) => Err(format!("{path}: field \"{k}\" must be a string")),
        }
    };
    let child = |k: &str| -> Result<Box<ConstraintExpr>, String> {
        let c = obj
            .get(k)
            .ok_or_else(|| format!("{path}: op \"{op}\" needs field \"{k}\""))?;
        Ok(Box::new(parse_node(c, &format!("{path}.{k}"))?))
    };
    let args = || -> Result<Vec<ConstraintExpr>, String> {
        let a = obj
            .get("args")
            .and_then(Json::as_array)
            .ok_or_else(|| format!("{path}: op \"{op}\" needs array field \"args\""))?;
        a.iter()
            .enumerate()
            .map(|(i, x)| parse_node(x, &format!("{path}.args[{i}]")))
            .collect()
    };
    let pair = || -> Result<(Box<ConstraintExpr>, Box<ConstraintExpr>), String> {
        let mut a = args()?;
        if a.len() != 2 {
            return Err(format!(
                "{path}: op \"{op}\" takes exactly 2 args, got {}",
                a.len()
            ));
        }
        let y = a.pop().unwrap();
        let x = a.pop().unwrap();
        Ok((Box::new(x), Box::new(y)))
    };
    let node = match op {
        "bool" => Node::Bool(
            obj.get("value")
                .and_then(Json::as_bool)
                .ok_or_else(|| format!("{path}: bool needs boolean \"value\""))?,
        ),
        "num" => {
            let x = obj
                .get("value")
                .and_then(Json::as_f64)
                .ok_or_else(|| format!("{path}: num needs numeric \"value\""))?;
            Node::Num(x)
        }
        "scalar" => Node::Scalar(s("name")?),
        "has_property" => Node::HasProperty(s("tag")?),
        "colocated_has_property" => Node::ColocatedHasProperty(s("tag")?),
        "attr" => {
            let slot = match (opt_s("var")?, opt_s("slot")?) {
                (Some(v), None) => SlotRef::Var(v),
                (None, Some(d)) => SlotRef::Device(d),
                _ => {
                    return Err(format!(
                        "{path}: attr needs exactly one of \"var\" or \"slot\""
                    ))
                }
            };
            Node::Attr {
                slot,
                entry: s("entry")?,
            }
        }
        "deployed" => Node::Deployed {
            system: s("system")?,
            workload: opt_s("workload")?,
        },
        "role_enabled" => Node::RoleEnabled(s("role")?),
        "add" => Node::Add(args()?),
        "mul" => Node::Mul(args()?),
        "and" => Node::And(args()?),
        "or" => Node::Or(args()?),
        "sub" => {
            let (a, b) = pair()?;
            Node::Sub(a, b)
        }
        "implies" => {
            let (a, b) = pair()?;
            Node::Implies(a, b)
        }
        "lt" | "le" | "eq" | "ge" | "gt" => {
            let (a, b) = pair()?;
            let c = match op {
                "lt" => CmpOp::Lt,
                "le" => CmpOp::Le,
                "eq" => CmpOp::Eq,
                "ge" => CmpOp::Ge,
                _ => CmpOp::Gt,
            };
            Node::Cmp(c, a, b)
        }
        "not" => Node::Not(child("arg")?),
        "forall" => Node::ForAll {
            device_type: s("device_type")?,
            var: s("var")?,
            body: child("body")?,
        },
        "count" => Node::Count {
            device_type: s("device_type")?,
        },
        "allocate" => {
            let scope_s = s("scope")?;
            let scope = AllocationScope::parse(&scope_s)
                .ok_or_else(|| format!("{path}: unknown allocation scope \"{scope_s}\""))?;
            let target = match (opt_s("var")?, opt_s("device_type")?) {
                (Some(v), None) => AllocTarget::Var(v),
                (None, Some(t)) => AllocTarget::DeviceType(t),
                _ => {
                    return Err(format!(
                        "{path}: allocate needs exactly one of \"var\" or \"device_type\""
                    ))
                }
            };
            Node::Allocate {
                resource: s("resource")?,
                amount: child("amount")?,
                scope,
                target,
            }
        }
        _ => unreachable!(),
    };
    Ok(ConstraintExpr {
        id: opt_s("id")?,
        label: opt_s("label")?,
        node,
    })
}

impl Serialize for ConstraintExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConstraintExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Json::deserialize(d)?;
        ConstraintExpr::from_json(&v).map_err(serde::de::Error::custom)
    }
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

impl fmt::Display for ConstraintExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |xs: &[ConstraintExpr], sep: &str| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(sep)
        };
        match &self.node {
            Node::Bool(b) => write!(f, "{b}"),
            Node::Num(x) => write!(f, "{}", fmt_num(*x)),
            Node::Scalar(n) => write!(f, "workload.{n}"),
            Node::HasProperty(t) => write!(f, "has({t})"),
            Node::ColocatedHasProperty(t) => write!(f, "colocated_has({t})"),
            Node::Attr {
                slot: SlotRef::Var(v),
                entry,
            } => write!(f, "{v}.{entry}"),
            Node::Attr {
                slot: SlotRef::Device(d),
                entry,
            } => write!(f, "{d}.{entry}"),
            Node::Deployed {
                system,
                workload: None,
            } => write!(f, "deployed({system})"),
            Node::Deployed {
                system,
                workload: Some(w),
            } => write!(f, "deployed({system}, {w})"),
            Node::RoleEnabled(r) => write!(f, "enabled({r})"),
            Node::Add(a) => write!(f, "({})", join(a, " + ")),
            Node::Mul(a) => write!(f, "({})", join(a, " * ")),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            Node::And(a) if a.is_empty() => write!(f, "true"),
            Node::Or(a) if a.is_empty() => write!(f, "false"),
            Node::And(a) => write!(f, "({})", join(a, " AND ")),
            Node::Or(a) => write!(f, "({})", join(a, " OR ")),
            Node::Not(a) => write!(f, "NOT {a}"),
            Node::Implies(a, b) => write!(f, "({a} => {b})"),
            Node::ForAll {
                device_type,
                var,
                body,
            } => write!(f, "forall {var} in {device_type}: {body}"),
            Node::Count { device_type } => write!(f, "count({device_type})"),
            Node::Allocate {
                resource,
                amount,
                scope,
                target,
            } => {
                let t = match target {
                    AllocTarget::Var(v) => v.clone(),
                    AllocTarget::DeviceType(t) => t.clone(),
                };
                write!(f, "allocate({resource}, {amount}, {}, {t})", scope.as_str())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    struct Ctx {
        computes: Vec<String>,
        attrs: BTreeMap<(String, String), EvalValue>,
    }

    impl Binding for Ctx {
        fn scalar(&self, n: &str) -> Option<f64> {
            (n == "num_flows").then_some(10.0)
        }
        fn has_property(&self, t: &str) -> Option<bool> {
            Some(t == "dc_flows")
        }
        fn colocated_has_property(&self, _: &str) -> Option<bool> {
            Some(false)
        }
        fn attr(&self, d: &str, e: &str) -> Option<EvalValue> {
            self.attrs.get(&(d.to_string(), e.to_string())).copied()
        }
        fn deployed(&self, s: &str, _: Option<&str>) -> Option<bool> {
            Some(s == "RDMA")
        }
        fn role_enabled(&self, _: &str) -> Option<bool> {
            Some(true)
        }
        fn devices_of_type(&self, t: &str) -> Option<Vec<String>> {
            (t == "COMPUTE").then(|| self.computes.clone())
        }
    }

    fn ctx(n: usize) -> Ctx {
        let computes: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let mut attrs = BTreeMap::new();
        for (i, c) in computes.iter().enumerate() {
            attrs.insert(
                (c.clone(), "NIC_Reorder_Buffer".into()),
                EvalValue::Num(if i == 0 { 20.0 } else { 64.0 }),
            );
        }
        Ctx { computes, attrs }
    }

    fn pingmesh() -> ConstraintExpr {
        let amount = ConstraintExpr::new(Node::Mul(vec![
            ConstraintExpr::num(8e-5),
            ConstraintExpr::new(Node::Count {
                device_type: "COMPUTE".into(),
            }),
        ]));
        ConstraintExpr::forall(
            "COMPUTE",
            "c",
            ConstraintExpr::new(Node::Allocate {
                resource: "cores".into(),
                amount: Box::new(amount),
                scope: AllocationScope::PerDevice,
                target: AllocTarget::Var("c".into()),
            }),
        )
    }

    #[test]
    fn pingmesh_allocates_per_device() {
        let (ok, allocs) = evaluate(&pingmesh(), &ctx(6)).unwrap();
        assert!(ok);
        assert_eq!(allocs.len(), 6);
        for a in &allocs {
            assert_eq!(a.devices.len(), 1);
            assert!((a.amount - 8e-5 * 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_and_is_true() {
        let (ok, allocs) = evaluate(&ConstraintExpr::and(vec![]), &ctx(1)).unwrap();
        assert!(ok && allocs.is_empty());
    }

    #[test]
    fn reorder_buffer_boundary_is_false() {
        let e = ConstraintExpr::forall(
            "COMPUTE",
            "c",
            ConstraintExpr::cmp(
                CmpOp::Gt,
                ConstraintExpr::attr("c", "NIC_Reorder_Buffer"),
                ConstraintExpr::num(20.0),
            ),
        );
        assert!(!evaluate(&e, &ctx(3)).unwrap().0);
    }

    #[test]
    fn unbound_and_kind_errors() {
        let e = ConstraintExpr::scalar("peak_cores");
        assert!(matches!(
            evaluate_number(&e, &ctx(1)),
            Err(EvalError::UnboundReference(_))
        ));
        let e = ConstraintExpr::and(vec![ConstraintExpr::num(1.0)]);
        assert!(matches!(
            evaluate(&e, &ctx(1)),
            Err(EvalError::KindMismatch { .. })
        ));
        let e = ConstraintExpr::attr("x", "RDMA");
        assert!(matches!(
            evaluate(&e, &ctx(1)),
            Err(EvalError::UnboundReference(_))
        ));
    }

    #[test]
    fn json_round_trip_and_path_errors() {
        let e = ConstraintExpr::implies(ConstraintExpr::deployed("RDMA"), pingmesh())
            .with_id("n1")
            .with_label("x");
        let back = ConstraintExpr::from_json(&e.to_json()).unwrap();
        assert_eq!(back, e);
        let bad =
            json!({"op": "and", "args": [{"op": "bool", "value": true}, {"op": "frobnicate"}]});
        let err = ConstraintExpr::from_json(&bad).unwrap_err();
        assert!(
            err.contains("$.args[1]") && err.contains("frobnicate"),
            "{err}"
        );
    }

    #[test]
    fn literal_has_no_references() {
        assert_eq!(
            free_references(&ConstraintExpr::truth(true)),
            References::default()
        );
    }
}
