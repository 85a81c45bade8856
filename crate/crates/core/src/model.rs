//! Catalog and query entities plus structural validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dsl::{free_references, Binding, ConstraintExpr, EvalValue};

pub const SPEC_VERSION: u32 = 1;

/// Workload scalars a query may set.
pub const SCALAR_NAMES: &[&str] = &[
    "peak_cores",
    "average_cores",
    "peak_bandwidth",
    "average_bandwidth",
    "network_load",
    "compute_load",
    "num_flows",
];

fn default_true() -> bool {
    true
}
fn version() -> u32 {
    SPEC_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub granularities: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleSpec {
    pub id: String,
    pub activation_condition: ConstraintExpr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(default = "default_true")]
    pub is_exclusive: bool,
    #[serde(default = "default_true")]
    pub considered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemWarning {
    pub when: ConstraintExpr,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub id: String,
    pub roles: Vec<String>,
    #[serde(default)]
    pub solves: Vec<String>,
    pub deployment_constraints: ConstraintExpr,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<SystemWarning>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constraint_labels: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relation {
    BetterThan,
    SameAs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    #[default]
    Expert,
    Architect,
}

fn is_expert(p: &Provenance) -> bool {
    *p == Provenance::Expert
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingSpec {
    pub objective: String,
    pub subject: String,
    pub relation: Relation,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConstraintExpr>,
    #[serde(default, skip_serializing_if = "is_expert")]
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntryKind {
    Real,
    Bool,
    Exhaustible,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Num(f64),
}

impl Value {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(x),
            Value::Bool(_) => None,
        }
    }
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            Value::Num(_) => None,
        }
    }
    pub fn to_eval(self) -> EvalValue {
        match self {
            Value::Bool(b) => EvalValue::Bool(b),
            Value::Num(x) => EvalValue::Num(x),
        }
    }
    fn matches(self, kind: EntryKind) -> bool {
        match (self, kind) {
            (Value::Bool(_), EntryKind::Bool) => true,
            (Value::Num(x), EntryKind::Real) => x.is_finite(),
            (Value::Num(x), EntryKind::Exhaustible) => {
                x >= 0.0 && x.fract() == 0.0 && x.is_finite()
            }
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaEntry {
    pub kind: EntryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareSchema {
    pub id: String,
    pub device_type: String,
    pub entries: BTreeMap<String, SchemaEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareSpec {
    pub id: String,
    pub schema: String,
    pub values: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSlot {
    pub id: String,
    pub device_type: String,
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_hardware: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceGroup {
    pub id: String,
    pub group_type: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<DeviceGroup>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub devices: Vec<DeviceSlot>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    #[serde(default)]
    pub groups: Vec<DeviceGroup>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceBound {
    pub objective: String,
    /// Chosen system must not be strictly worse than this one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_least: Option<String>,
    /// Chosen system must list this tag (or a sub-tag) in `solves`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solves: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub id: String,
    pub deployed_at: Vec<String>,
    #[serde(default)]
    pub properties: Vec<String>,
    #[serde(default)]
    pub objectives: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scalars: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub performance_bounds: Vec<PerformanceBound>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exempted_roles: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    TotalCost,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OptimizeTarget {
    Objective { workload: String, objective: String },
    TotalCost,
}

/// Either `{workload, objective}` or `{metric: TOTAL_COST}`, plus priority.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeDirective {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    pub priority: u32,
}

impl OptimizeDirective {
    pub fn objective(workload: &str, objective: &str, priority: u32) -> Self {
        OptimizeDirective {
            workload: Some(workload.into()),
            objective: Some(objective.into()),
            metric: None,
            priority,
        }
    }

    pub fn total_cost(priority: u32) -> Self {
        OptimizeDirective {
            workload: None,
            objective: None,
            metric: Some(Metric::TotalCost),
            priority,
        }
    }

    /// None when the directive is malformed (reported by validation).
    pub fn target(&self) -> Option<OptimizeTarget> {
        match (&self.workload, &self.objective, self.metric) {
            (Some(w), Some(o), None) => Some(OptimizeTarget::Objective {
                workload: w.clone(),
                objective: o.clone(),
            }),
            (None, None, Some(Metric::TotalCost)) => Some(OptimizeTarget::TotalCost),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self.target() {
            Some(OptimizeTarget::Objective {
                workload,
                objective,
            }) => format!("{workload}:{objective}"),
            Some(OptimizeTarget::TotalCost) => "TOTAL_COST".to_string(),
            None => "invalid".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Hardness {
    Hard,
    Optional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectConstraint {
    pub id: String,
    /// Workload whose context the expression is evaluated in.
    pub workload: String,
    pub expr: ConstraintExpr,
    pub hardness: Hardness,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    #[serde(rename = "kepler-spec", default = "version")]
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default)]
    pub schemas: Vec<HardwareSchema>,
    #[serde(default)]
    pub hardware: Vec<HardwareSpec>,
    #[serde(default)]
    pub objectives: Vec<ObjectiveSpec>,
    #[serde(default)]
    pub roles: Vec<RoleSpec>,
    #[serde(default)]
    pub systems: Vec<SystemSpec>,
    #[serde(default)]
    pub orderings: Vec<OrderingSpec>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog {
            version: SPEC_VERSION,
            provenance: None,
            schemas: Vec::new(),
            hardware: Vec::new(),
            objectives: Vec::new(),
            roles: Vec::new(),
            systems: Vec::new(),
            orderings: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    #[serde(rename = "kepler-spec", default = "version")]
    pub version: u32,
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default)]
    pub workloads: Vec<WorkloadSpec>,
    #[serde(default)]
    pub optimize: Vec<OptimizeDirective>,
    #[serde(default)]
    pub constraints: Vec<ArchitectConstraint>,
    #[serde(default)]
    pub pins: BTreeMap<String, String>,
    #[serde(default)]
    pub excluded_hardware: Vec<String>,
    #[serde(default)]
    pub excluded_systems: Vec<String>,
    /// Architect-supplied orderings; these shadow catalog entries on the
    /// same pair.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orderings: Vec<OrderingSpec>,
}

impl Default for Query {
    fn default() -> Self {
        Query {
            version: SPEC_VERSION,
            topology: TopologySpec::default(),
            workloads: Vec::new(),
            optimize: Vec::new(),
            constraints: Vec::new(),
            pins: BTreeMap::new(),
            excluded_hardware: Vec::new(),
            excluded_systems: Vec::new(),
            orderings: Vec::new(),
        }
    }
}

impl Catalog {
    /// Concatenates several catalogs (used for repeated `-c` flags).
    pub fn merge(parts: Vec<Catalog>) -> Catalog {
        let mut out = Catalog::default();
        for p in parts {
            out.schemas.extend(p.schemas);
            out.hardware.extend(p.hardware);
            out.objectives.extend(p.objectives);
            out.roles.extend(p.roles);
            out.systems.extend(p.systems);
            out.orderings.extend(p.orderings);
            if out.provenance.is_none() {
                out.provenance = p.provenance;
            }
        }
        out
    }

    pub fn system(&self, id: &str) -> Option<&SystemSpec> {
        self.systems.iter().find(|s| s.id == id)
    }
    pub fn role(&self, id: &str) -> Option<&RoleSpec> {
        self.roles.iter().find(|r| r.id == id)
    }
    pub fn hardware(&self, id: &str) -> Option<&HardwareSpec> {
        self.hardware.iter().find(|h| h.id == id)
    }
    pub fn schema(&self, id: &str) -> Option<&HardwareSchema> {
        self.schemas.iter().find(|s| s.id == id)
    }

    /// Systems fulfilling a role, sorted by id.
    pub fn systems_for_role(&self, role: &str) -> Vec<&SystemSpec> {
        let mut v: Vec<&SystemSpec> = self
            .systems
            .iter()
            .filter(|s| s.roles.iter().any(|r| r == role))
            .collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// All valid compound objective tags.
    pub fn objective_tags(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for o in &self.objectives {
            out.insert(o.id.clone());
            for g in &o.granularities {
                out.insert(format!("{}.{}", o.id, g));
            }
        }
        out
    }

    /// Value of an entry for a hardware item, falling back to the schema
    /// default.
    pub fn hardware_value(&self, hw: &HardwareSpec, entry: &str) -> Option<Value> {
        hw.values.get(entry).copied().or_else(|| {
            self.schema(&hw.schema)
                .and_then(|s| s.entries.get(entry))
                .and_then(|e| e.default)
        })
    }
}

/// `tag` is covered by `objective` when equal or a dotted refinement of it.
pub fn tag_covers(objective: &str, tag: &str) -> bool {
    tag == objective
        || (tag.starts_with(objective) && tag.as_bytes().get(objective.len()) == Some(&b'.'))
}

impl TopologySpec {
    /// Every device slot, depth-first in declaration order.
    pub fn devices(&self) -> Vec<&DeviceSlot> {
        fn rec<'a>(g: &'a DeviceGroup, out: &mut Vec<&'a DeviceSlot>) {
            out.extend(g.devices.iter());
            for c in &g.children {
                rec(c, out);
            }
        }
        let mut out = Vec::new();
        for g in &self.groups {
            rec(g, &mut out);
        }
        out
    }

    pub fn groups(&self) -> Vec<&DeviceGroup> {
        fn rec<'a>(g: &'a DeviceGroup, out: &mut Vec<&'a DeviceGroup>) {
            out.push(g);
            for c in &g.children {
                rec(c, out);
            }
        }
        let mut out = Vec::new();
        for g in &self.groups {
            rec(g, &mut out);
        }
        out
    }

    pub fn group(&self, id: &str) -> Option<&DeviceGroup> {
        self.groups().into_iter().find(|g| g.id == id)
    }

    pub fn device(&self, id: &str) -> Option<&DeviceSlot> {
        self.devices().into_iter().find(|d| d.id == id)
    }

    /// Device ids under the given groups, deduplicated and sorted.
    pub fn devices_under(&self, group_ids: &[String]) -> Vec<String> {
        let mut out = BTreeSet::new();
        for gid in group_ids {
            if let Some(g) = self.group(gid) {
                let t = TopologySpec {
                    groups: vec![g.clone()],
                };
                for d in t.devices() {
                    out.insert(d.id.clone());
                }
            }
        }
        out.into_iter().collect()
    }
}

impl Query {
    pub fn workload(&self, id: &str) -> Option<&WorkloadSpec> {
        self.workloads.iter().find(|w| w.id == id)
    }

    /// Effective pin for a device: query pins override slot pins.
    pub fn pin_for(&self, device: &DeviceSlot) -> Option<String> {
        self.pins
            .get(&device.id)
            .cloned()
            .or_else(|| device.pinned_hardware.clone())
    }
}

/// Per-workload view used both for role activation and for evaluating
/// workload-scoped expressions.
pub struct WorkloadContext<'a> {
    pub workload: &'a WorkloadSpec,
    pub devices: Vec<String>,
    pub colocated: Vec<&'a WorkloadSpec>,
    topology: &'a TopologySpec,
}

impl<'a> WorkloadContext<'a> {
    pub fn new(query: &'a Query, workload: &'a WorkloadSpec) -> Self {
        let devices = query.topology.devices_under(&workload.deployed_at);
        let mine: BTreeSet<&String> = devices.iter().collect();
        let colocated = query
            .workloads
            .iter()
            .filter(|o| o.id != workload.id)
            .filter(|o| {
                query
                    .topology
                    .devices_under(&o.deployed_at)
                    .iter()
                    .any(|d| mine.contains(d))
            })
            .collect();
        WorkloadContext {
            workload,
            devices,
            colocated,
            topology: &query.topology,
        }
    }

    pub fn devices_of_type(&self, device_type: &str) -> Vec<String> {
        self.devices
            .iter()
            .filter(|d| {
                self.topology
                    .device(d)
                    .is_some_and(|s| s.device_type == device_type)
            })
            .cloned()
            .collect()
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        if SCALAR_NAMES.contains(&name) {
            Some(self.workload.scalars.get(name).copied().unwrap_or(0.0))
        } else {
            None
        }
    }
}

impl Binding for WorkloadContext<'_> {
    fn scalar(&self, name: &str) -> Option<f64> {
        WorkloadContext::scalar(self, name)
    }
    fn has_property(&self, tag: &str) -> Option<bool> {
        Some(self.workload.properties.iter().any(|p| p == tag))
    }
    fn colocated_has_property(&self, tag: &str) -> Option<bool> {
        Some(
            self.colocated
                .iter()
                .any(|w| w.properties.iter().any(|p| p == tag)),
        )
    }
    fn attr(&self, _: &str, _: &str) -> Option<EvalValue> {
        None
    }
    fn deployed(&self, _: &str, _: Option<&str>) -> Option<bool> {
        None
    }
    fn role_enabled(&self, _: &str) -> Option<bool> {
        None
    }
    fn devices_of_type(&self, device_type: &str) -> Option<Vec<String>> {
        Some(WorkloadContext::devices_of_type(self, device_type))
    }
}

/// Whether a role's activation condition holds for a workload, ignoring
/// exemptions and the `considered` flag.
pub fn activation_holds(role: &RoleSpec, ctx: &WorkloadContext) -> bool {
    crate::dsl::evaluate(&role.activation_condition, ctx)
        .map(|r| r.0)
        .unwrap_or(false)
}

/// Roles enabled for a workload, with a short reason, in catalog order.
pub fn activated_roles(
    catalog: &Catalog,
    query: &Query,
    workload: &WorkloadSpec,
) -> Vec<(String, String)> {
    let ctx = WorkloadContext::new(query, workload);
    catalog
        .roles
        .iter()
        .filter(|r| r.considered && !workload.exempted_roles.contains(&r.id))
        .filter(|r| activation_holds(r, &ctx))
        .map(|r| {
            let reason = r.activation_condition.label.clone().unwrap_or_else(|| {
                format!("activation condition holds: {}", r.activation_condition)
            });
            (r.id.clone(), reason)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
    fn push(&mut self, code: &str, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            code: code.into(),
            path: path.into(),
            message: message.into(),
        });
    }
    fn finish(mut self) -> Self {
        self.violations.sort();
        self.violations.dedup();
        self
    }
}

pub fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
}

fn check_ids<'a>(report: &mut ValidationReport, kind: &str, ids: impl Iterator<Item = &'a str>) {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, id) in ids.enumerate() {
        if !valid_identifier(id) {
            report.push(
                "invalid_identifier",
                format!("{kind}[{i}]"),
                format!("identifier \"{id}\" is not valid"),
            );
        }
        if let Some(first) = seen.insert(id, i) {
            report.push(
                "duplicate_id",
                format!("{kind}[{i}]"),
                format!("{kind} id \"{id}\" appears at positions {first} and {i}"),
            );
            seen.insert(id, first);
        }
    }
}

pub fn validate_catalog(catalog: &Catalog) -> ValidationReport {
    let mut r = ValidationReport::default();
    if catalog.version > SPEC_VERSION {
        r.push(
            "version",
            "kepler-spec",
            format!("unsupported document version {}", catalog.version),
        );
    }
    check_ids(
        &mut r,
        "schemas",
        catalog.schemas.iter().map(|s| s.id.as_str()),
    );
    check_ids(
        &mut r,
        "hardware",
        catalog.hardware.iter().map(|s| s.id.as_str()),
    );
    check_ids(
        &mut r,
        "objectives",
        catalog.objectives.iter().map(|s| s.id.as_str()),
    );
    check_ids(&mut r, "roles", catalog.roles.iter().map(|s| s.id.as_str()));
    check_ids(
        &mut r,
        "systems",
        catalog.systems.iter().map(|s| s.id.as_str()),
    );

    for o in &catalog.objectives {
        let mut seen = BTreeSet::new();
        for g in &o.granularities {
            if !seen.insert(g) {
                r.push(
                    "duplicate_granularity",
                    format!("objectives.{}", o.id),
                    format!("granularity \"{g}\" repeated"),
                );
            }
        }
    }

    for s in &catalog.schemas {
        let path = format!("schemas.{}", s.id);
        match s.entries.get("cost") {
            Some(e) if e.kind == EntryKind::Real => {}
            Some(_) => r.push("schema_cost", &path, "entry \"cost\" must be REAL"),
            None => r.push(
                "schema_cost",
                &path,
                "schema lacks mandatory \"cost\" entry",
            ),
        }
        for (name, e) in &s.entries {
            if let Some(d) = e.default {
                if !d.matches(e.kind) {
                    r.push(
                        "schema_default",
                        format!("{path}.{name}"),
                        "default does not match entry kind",
                    );
                }
            }
        }
    }

    for h in &catalog.hardware {
        let path = format!("hardware.{}", h.id);
        let Some(schema) = catalog.schema(&h.schema) else {
            r.push(
                "dangling_reference",
                &path,
                format!("unknown schema \"{}\"", h.schema),
            );
            continue;
        };
        for (name, e) in &schema.entries {
            match h.values.get(name) {
                None if e.default.is_none() => r.push(
                    "missing_value",
                    format!("{path}.{name}"),
                    "entry has no default and is not assigned",
                ),
                Some(v) if !v.matches(e.kind) => r.push(
                    "kind_mismatch",
                    format!("{path}.{name}"),
                    format!("value does not match kind {:?}", e.kind),
                ),
                _ => {}
            }
        }
        for name in h.values.keys() {
            if !schema.entries.contains_key(name) {
                r.push(
                    "extraneous_value",
                    format!("{path}.{name}"),
                    "entry not in schema",
                );
            }
        }
    }

    let tags = catalog.objective_tags();
    let role_ids: BTreeSet<&str> = catalog.roles.iter().map(|x| x.id.as_str()).collect();
    let system_ids: BTreeSet<&str> = catalog.systems.iter().map(|x| x.id.as_str()).collect();

    for role in &catalog.roles {
        let refs = free_references(&role.activation_condition);
        if !refs.is_workload_only() {
            r.push(
                "activation_scope",
                format!("roles.{}", role.id),
                "activation condition may only reference workload properties and scalars",
            );
        }
        check_scalars(&mut r, &format!("roles.{}", role.id), &refs.scalars);
    }

    for s in &catalog.systems {
        let path = format!("systems.{}", s.id);
        if s.roles.is_empty() {
            r.push("empty_roles", &path, "system fulfils no role");
        }
        for role in &s.roles {
            if !role_ids.contains(role.as_str()) {
                r.push(
                    "dangling_reference",
                    &path,
                    format!("unknown role \"{role}\""),
                );
            }
        }
        for t in &s.solves {
            if !tags.contains(t) {
                r.push(
                    "dangling_reference",
                    &path,
                    format!("unknown objective tag \"{t}\""),
                );
            }
        }
        let mut exprs = vec![&s.deployment_constraints];
        exprs.extend(s.warnings.iter().map(|w| &w.when));
        let mut node_ids = BTreeSet::new();
        for e in exprs {
            let refs = free_references(e);
            for sys in &refs.systems {
                if !system_ids.contains(sys.as_str()) {
                    r.push(
                        "dangling_reference",
                        &path,
                        format!("constraint references unknown system \"{sys}\""),
                    );
                }
            }
            for role in &refs.roles {
                if !role_ids.contains(role.as_str()) {
                    r.push(
                        "dangling_reference",
                        &path,
                        format!("constraint references unknown role \"{role}\""),
                    );
                }
            }
            check_scalars(&mut r, &path, &refs.scalars);
            node_ids.extend(e.node_ids());
        }
        for k in s.constraint_labels.keys() {
            if !node_ids.contains(k) {
                r.push(
                    "dangling_label",
                    &path,
                    format!("label for unknown constraint node \"{k}\""),
                );
            }
        }
    }

    validate_orderings(&mut r, catalog, &catalog.orderings, "orderings");
    r.finish()
}

fn check_scalars(r: &mut ValidationReport, path: &str, names: &BTreeSet<String>) {
    for n in names {
        if !SCALAR_NAMES.contains(&n.as_str()) {
            r.push(
                "unknown_scalar",
                path,
                format!("unknown workload scalar \"{n}\""),
            );
        }
    }
}

fn validate_orderings(
    r: &mut ValidationReport,
    catalog: &Catalog,
    orderings: &[OrderingSpec],
    kind: &str,
) {
    let tags = catalog.objective_tags();
    for (i, o) in orderings.iter().enumerate() {
        let path = format!("{kind}[{i}]");
        if !tags.contains(&o.objective) {
            r.push(
                "dangling_reference",
                &path,
                format!("unknown objective tag \"{}\"", o.objective),
            );
        }
        let (a, b) = (catalog.system(&o.subject), catalog.system(&o.object));
        match (a, b) {
            (Some(a), Some(b)) => {
                if !a.roles.iter().any(|x| b.roles.contains(x)) {
                    r.push(
                        "ordering_roles",
                        &path,
                        format!("{} and {} share no role", o.subject, o.object),
                    );
                }
            }
            _ => {
                for s in [&o.subject, &o.object] {
                    if catalog.system(s).is_none() {
                        r.push(
                            "dangling_reference",
                            &path,
                            format!("unknown system \"{s}\""),
                        );
                    }
                }
            }
        }
        if let Some(c) = &o.condition {
            if !free_references(c).is_workload_only() {
                r.push(
                    "condition_scope",
                    &path,
                    "ordering condition may only reference workload context",
                );
            }
        }
    }
    // Cycle check per objective: unconditional entries, plus each
    // conditional entry on its own on top of them.
    let mut by_obj: BTreeMap<&str, Vec<&OrderingSpec>> = BTreeMap::new();
    for o in orderings {
        by_obj.entry(o.objective.as_str()).or_default().push(o);
    }
    for (obj, list) in by_obj {
        let base: Vec<&OrderingSpec> = list
            .iter()
            .copied()
            .filter(|o| o.condition.is_none())
            .collect();
        let mut variants = vec![base.clone()];
        for o in list.iter().filter(|o| o.condition.is_some()) {
            let mut v = base.clone();
            v.push(o);
            variants.push(v);
        }
        let mut reported = BTreeSet::new();
        for v in variants {
            if let Err(cycle) = crate::synth::rank::order_layers(&v) {
                if reported.insert(cycle.clone()) {
                    r.push(
                        "ordering_cycle",
                        format!("{kind}.{obj}"),
                        format!("ordering cycle among {}", cycle.join(", ")),
                    );
                }
            }
        }
    }
}

pub fn validate_query(catalog: &Catalog, query: &Query) -> ValidationReport {
    let mut r = ValidationReport::default();
    if query.version > SPEC_VERSION {
        r.push(
            "version",
            "kepler-spec",
            format!("unsupported document version {}", query.version),
        );
    }
    let groups = query.topology.groups();
    let devices = query.topology.devices();
    check_ids(
        &mut r,
        "topology.groups",
        groups.iter().map(|g| g.id.as_str()),
    );
    check_ids(
        &mut r,
        "topology.devices",
        devices.iter().map(|d| d.id.as_str()),
    );
    check_ids(
        &mut r,
        "workloads",
        query.workloads.iter().map(|w| w.id.as_str()),
    );
    check_ids(
        &mut r,
        "constraints",
        query.constraints.iter().map(|c| c.id.as_str()),
    );

    for d in &devices {
        let path = format!("topology.devices.{}", d.id);
        match catalog.schema(&d.schema) {
            None => r.push(
                "dangling_reference",
                &path,
                format!("unknown schema \"{}\"", d.schema),
            ),
            Some(s) if s.device_type != d.device_type => r.push(
                "schema_mismatch",
                &path,
                format!("schema \"{}\" is for device type {}", s.id, s.device_type),
            ),
            _ => {}
        }
        if let (Some(slot_pin), Some(q_pin)) = (&d.pinned_hardware, query.pins.get(&d.id)) {
            if slot_pin != q_pin {
                r.push(
                    "conflicting_pin",
                    &path,
                    format!("slot pins {slot_pin} but query pins {q_pin}"),
                );
            }
        }
        if let Some(pin) = query.pin_for(d) {
            match catalog.hardware(&pin) {
                None => r.push(
                    "dangling_reference",
                    &path,
                    format!("unknown pinned hardware \"{pin}\""),
                ),
                Some(h) if h.schema != d.schema => r.push(
                    "schema_mismatch",
                    &path,
                    format!("pinned hardware \"{pin}\" has schema {}", h.schema),
                ),
                _ => {}
            }
        }
    }
    for dev in query.pins.keys() {
        if query.topology.device(dev).is_none() {
            r.push(
                "dangling_reference",
                format!("pins.{dev}"),
                "pin for unknown device",
            );
        }
    }
    for h in &query.excluded_hardware {
        if catalog.hardware(h).is_none() {
            r.push(
                "dangling_reference",
                "excluded_hardware",
                format!("unknown hardware \"{h}\""),
            );
        }
    }
    for s in &query.excluded_systems {
        if catalog.system(s).is_none() {
            r.push(
                "dangling_reference",
                "excluded_systems",
                format!("unknown system \"{s}\""),
            );
        }
    }

    let tags = catalog.objective_tags();
    for w in &query.workloads {
        let path = format!("workloads.{}", w.id);
        for g in &w.deployed_at {
            if query.topology.group(g).is_none() {
                r.push(
                    "dangling_reference",
                    &path,
                    format!("unknown device group \"{g}\""),
                );
            }
        }
        for o in &w.objectives {
            if !tags.contains(o) {
                r.push(
                    "dangling_reference",
                    &path,
                    format!("unknown objective \"{o}\""),
                );
            }
        }
        for (k, v) in &w.scalars {
            if !SCALAR_NAMES.contains(&k.as_str()) {
                r.push("unknown_scalar", &path, format!("unknown scalar \"{k}\""));
            } else if !(*v >= 0.0 && v.is_finite()) {
                r.push(
                    "negative_scalar",
                    &path,
                    format!("scalar \"{k}\" must be a non-negative number"),
                );
            }
        }
        for b in &w.performance_bounds {
            if !w.objectives.iter().any(|o| tag_covers(o, &b.objective)) {
                r.push(
                    "bound_objective",
                    &path,
                    format!(
                        "bound objective \"{}\" not among workload objectives",
                        b.objective
                    ),
                );
            }
            match (&b.at_least, &b.solves) {
                (Some(s), None) => {
                    if catalog.system(s).is_none() {
                        r.push(
                            "dangling_reference",
                            &path,
                            format!("bound references unknown system \"{s}\""),
                        );
                    }
                }
                (None, Some(t)) => {
                    if !tags.contains(t) {
                        r.push(
                            "dangling_reference",
                            &path,
                            format!("bound references unknown objective \"{t}\""),
                        );
                    }
                }
                _ => r.push(
                    "bound_shape",
                    &path,
                    "bound needs exactly one of at_least or solves",
                ),
            }
        }
        for role in &w.exempted_roles {
            if catalog.role(role).is_none() {
                r.push(
                    "dangling_reference",
                    &path,
                    format!("unknown exempted role \"{role}\""),
                );
            }
        }
    }

    let mut prios: HashMap<u32, usize> = HashMap::new();
    for (i, d) in query.optimize.iter().enumerate() {
        let path = format!("optimize[{i}]");
        if d.priority == 0 {
            r.push("priority", &path, "priorities start at 1");
        }
        if let Some(j) = prios.insert(d.priority, i) {
            r.push(
                "duplicate_priority",
                &path,
                format!("priority {} also used by optimize[{j}]", d.priority),
            );
        }
        match d.target() {
            Some(OptimizeTarget::Objective {
                workload,
                objective,
            }) => {
                if query.workload(&workload).is_none() {
                    r.push(
                        "dangling_reference",
                        &path,
                        format!("unknown workload \"{workload}\""),
                    );
                }
                if !tags.contains(&objective) {
                    r.push(
                        "dangling_reference",
                        &path,
                        format!("unknown objective \"{objective}\""),
                    );
                }
            }
            Some(OptimizeTarget::TotalCost) => {}
            None => r.push(
                "directive_shape",
                &path,
                "directive needs {workload, objective} or {metric}",
            ),
        }
    }

    for c in &query.constraints {
        let path = format!("constraints.{}", c.id);
        if query.workload(&c.workload).is_none() {
            r.push(
                "dangling_reference",
                &path,
                format!("unknown workload \"{}\"", c.workload),
            );
        }
        let refs = free_references(&c.expr);
        for s in &refs.systems {
            if catalog.system(s).is_none() {
                r.push(
                    "dangling_reference",
                    &path,
                    format!("unknown system \"{s}\""),
                );
            }
        }
        for s in &refs.slots {
            if query.topology.device(s).is_none() {
                r.push(
                    "dangling_reference",
                    &path,
                    format!("unknown device \"{s}\""),
                );
            }
        }
        check_scalars(&mut r, &path, &refs.scalars);
    }

    let mut sub = ValidationReport::default();
    validate_orderings(&mut sub, catalog, &query.orderings, "query.orderings");
    r.violations.extend(sub.violations);
    r.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_coverage() {
        assert!(tag_covers("monitoring", "monitoring"));
        assert!(tag_covers("monitoring", "monitoring.detect_queue_length"));
        assert!(!tag_covers("monitoring", "monitoringx"));
        assert!(!tag_covers("monitoring.a", "monitoring"));
    }

    #[test]
    fn identifiers() {
        assert!(valid_identifier("pod1.rack0-c_1"));
        assert!(!valid_identifier("a b"));
        assert!(!valid_identifier(""));
    }
}
