//! Random small instances and an exhaustive reference optimizer.
//!
//! The enumerator never touches the encoder or the solver: it walks every
//! hardware/system assignment, asks the auditor whether it is admissible and
//! scores it with its own rank and relevance computation.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use archforge_core::model::{activated_roles, Catalog, Hardness, Query};
use archforge_core::synth::check::audit;
use archforge_core::synth::Assignment;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const TAGS: [&str; 2] = ["lat", "thr"];

/// Upper bounds on instance size; the oracle is exponential in them.
#[derive(Clone, Copy, Debug)]
pub struct Envelope {
    pub roles: usize,
    pub systems_per_role: usize,
    pub hardware_per_schema: usize,
    pub devices: usize,
    pub workloads: usize,
    /// Instances with more assignments than this are resampled.
    pub max_assignments: u64,
    pub exclusive_only: bool,
}

impl Default for Envelope {
    fn default() -> Self {
        Envelope { roles: 4, systems_per_role: 3, hardware_per_schema: 3, devices: 4, workloads: 2, max_assignments: 4000, exclusive_only: false }
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: u64,
    pub catalog: Catalog,
    pub query: Query,
    pub catalog_json: Value,
    pub query_json: Value,
}

fn num(x: f64) -> Value {
    json!({"op": "num", "value": x})
}

fn system_constraint(rng: &mut ChaCha8Rng, me: &str, others: &[String]) -> Value {
    let forall = |body: Value| json!({"op": "forall", "device_type": "COMPUTE", "var": "c", "body": body});
    match rng.gen_range(0..6) {
        0 => forall(json!({"op": "attr", "var": "c", "entry": "A"})),
        1 => forall(json!({"op": "gt", "args": [{"op": "attr", "var": "c", "entry": "B"}, num(15.0)]})),
        2 => forall(json!({
            "op": "allocate", "resource": "cores", "scope": "PER_DEVICE", "var": "c",
            "amount": num(rng.gen_range(1..=2) as f64)
        })),
        3 => json!({
            "op": "allocate", "resource": "q", "scope": "PER_SYSTEM_GLOBAL", "device_type": "SWITCH",
            "amount": num(1.0)
        }),
        k => {
            let other: Vec<&String> = others.iter().filter(|o| o.as_str() != me).collect();
            match other.choose(rng) {
                None => json!({"op": "bool", "value": true}),
                Some(o) if k == 4 => json!({"op": "not", "arg": {"op": "deployed", "system": o}}),
                Some(o) => json!({"op": "deployed", "system": o}),
            }
        }
    }
}

/// Draws one instance inside `env`; deterministic in `seed`.
pub fn instance(seed: u64, env: &Envelope) -> Instance {
    let mut attempt = 0u64;
    loop {
        let inst = draw(seed.wrapping_mul(7919).wrapping_add(attempt), seed, env);
        if assignment_count(&inst.catalog, &inst.query) <= env.max_assignments {
            return inst;
        }
        attempt += 1;
    }
}

fn draw(stream: u64, seed: u64, env: &Envelope) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(stream);

    let mut hardware = Vec::new();
    for (schema, prefix) in [("compute_schema", "C"), ("switch_schema", "W")] {
        for i in 0..rng.gen_range(1..=env.hardware_per_schema) {
            let cost = rng.gen_range(1..=9) as f64;
            let b = [10.0, 20.0, 30.0][rng.gen_range(0..3)];
            let values = if schema == "compute_schema" {
                json!({
                    "A": rng.gen_bool(0.5),
                    "B": b,
                    "cores": rng.gen_range(0..=4) as f64,
                    "cost": cost,
                })
            } else {
                json!({"q": rng.gen_range(0..=2) as f64, "cost": cost})
            };
            hardware.push(json!({"id": format!("{prefix}{i}"), "schema": schema, "values": values}));
        }
    }

    let n_roles = rng.gen_range(1..=env.roles);
    let mut roles = Vec::new();
    let mut members: Vec<Vec<String>> = Vec::new();
    for r in 0..n_roles {
        let tag = if rng.gen_bool(0.85) { "p" } else { "x" };
        roles.push(json!({
            "id": format!("r{r}"),
            "activation_condition": {"op": "has_property", "tag": tag},
            "is_exclusive": env.exclusive_only || rng.gen_bool(0.6),
        }));
        members.push((0..rng.gen_range(1..=env.systems_per_role)).map(|i| format!("S{r}{i}")).collect());
    }
    let all: Vec<String> = members.iter().flatten().cloned().collect();

    let mut systems = Vec::new();
    for (r, ms) in members.iter().enumerate() {
        for s in ms {
            let solves: Vec<&str> = TAGS.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
            let parts: Vec<Value> = (0..rng.gen_range(0..=2)).map(|_| system_constraint(&mut rng, s, &all)).collect();
            let dc = match parts.len() {
                0 => json!({"op": "bool", "value": true}),
                1 => parts[0].clone(),
                _ => json!({"op": "and", "args": parts}),
            };
            systems.push(json!({"id": s, "roles": [format!("r{r}")], "solves": solves, "deployment_constraints": dc}));
        }
    }

    // Orderings follow a random permutation per role and tag, so they are
    // acyclic by construction.
    let mut orderings = Vec::new();
    let mut ranked: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for ms in &members {
        for tag in TAGS {
            let mut perm = ms.clone();
            perm.shuffle(&mut rng);
            for i in 0..perm.len() {
                for j in i + 1..perm.len() {
                    if rng.gen_bool(0.5) {
                        orderings.push(json!({
                            "objective": tag, "subject": perm[i], "relation": "BETTER_THAN", "object": perm[j],
                        }));
                        ranked.entry(tag).or_default().extend([perm[i].clone(), perm[j].clone()]);
                    }
                }
            }
        }
    }

    let catalog_json = json!({
        "kepler-spec": 1,
        "schemas": [
            {"id": "compute_schema", "device_type": "COMPUTE", "entries": {
                "A": {"kind": "BOOL", "default": false}, "B": {"kind": "REAL"},
                "cores": {"kind": "EXHAUSTIBLE"}, "cost": {"kind": "REAL"}}},
            {"id": "switch_schema", "device_type": "SWITCH", "entries": {
                "q": {"kind": "EXHAUSTIBLE"}, "cost": {"kind": "REAL"}}},
        ],
        "hardware": hardware,
        "objectives": TAGS.iter().map(|t| json!({"id": t})).collect::<Vec<_>>(),
        "roles": roles,
        "systems": systems,
        "orderings": orderings,
    });

    let n_dev = rng.gen_range(1..=env.devices);
    let mut devices = Vec::new();
    let mut pins = serde_json::Map::new();
    for i in 0..n_dev {
        let compute = i == 0 || rng.gen_bool(0.6);
        let (ty, schema) = if compute { ("COMPUTE", "compute_schema") } else { ("SWITCH", "switch_schema") };
        let id = format!("d{i}");
        if rng.gen_bool(0.15) {
            let options: Vec<&Value> = hardware.iter().filter(|h| h["schema"] == schema).collect();
            let h = options.choose(&mut rng).unwrap();
            pins.insert(id.clone(), h["id"].clone());
        }
        devices.push(json!({"id": id, "device_type": ty, "schema": schema}));
    }
    let pinned: BTreeSet<String> = pins.values().map(|v| v.as_str().unwrap().to_string()).collect();
    let excluded_hw: Vec<Value> = hardware
        .iter()
        .filter(|h| !pinned.contains(h["id"].as_str().unwrap()) && rng.gen_bool(0.1))
        .map(|h| h["id"].clone())
        .collect();
    let excluded_sys: Vec<&String> = all.iter().filter(|_| rng.gen_bool(0.05)).collect();

    let mut workloads = Vec::new();
    let mut optimize = Vec::new();
    let mut priority = 1;
    for w in 0..rng.gen_range(1..=env.workloads) {
        let id = format!("w{w}");
        let mut props = vec!["p"];
        if rng.gen_bool(0.3) {
            props.push("x");
        }
        let objectives: Vec<&str> = TAGS.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
        let mut bounds = Vec::new();
        if let (true, Some(tag)) = (rng.gen_bool(0.25), objectives.choose(&mut rng)) {
            if let Some(b) = ranked.get(tag).and_then(|v| v.choose(&mut rng)) {
                bounds.push(json!({"objective": tag, "at_least": b}));
            }
        }
        for o in &objectives {
            optimize.push(json!({"workload": id, "objective": o, "priority": priority}));
            priority += 1;
        }
        workloads.push(json!({
            "id": id, "deployed_at": ["g"], "properties": props, "objectives": objectives,
            "performance_bounds": bounds,
        }));
    }
    let mut constraints = Vec::new();
    for (i, hardness) in ["HARD", "OPTIONAL", "OPTIONAL"].iter().enumerate() {
        if rng.gen_bool(0.2) {
            let s = all.choose(&mut rng).unwrap();
            let dep = json!({"op": "deployed", "system": s});
            let expr = if rng.gen_bool(0.5) { dep } else { json!({"op": "not", "arg": dep}) };
            constraints.push(json!({"id": format!("a{i}"), "workload": "w0", "expr": expr, "hardness": hardness}));
        }
    }
    if rng.gen_bool(0.7) {
        optimize.push(json!({"metric": "TOTAL_COST", "priority": priority}));
    }
    optimize.shuffle(&mut rng);
    for (i, d) in optimize.iter_mut().enumerate() {
        d["priority"] = json!(i + 1);
    }

    let query_json = json!({
        "kepler-spec": 1,
        "topology": {"groups": [{"id": "g", "group_type": "RACK", "devices": devices}]},
        "workloads": workloads,
        "optimize": optimize,
        "constraints": constraints,
        "pins": pins,
        "excluded_hardware": excluded_hw,
        "excluded_systems": excluded_sys,
    });

    let catalog: Catalog = serde_json::from_value(catalog_json.clone()).expect("generated catalog parses");
    let query: Query = serde_json::from_value(query_json.clone()).expect("generated query parses");
    Instance { seed, catalog, query, catalog_json, query_json }
}

/// Admissible hardware per device, in device order.
pub fn hardware_options(catalog: &Catalog, query: &Query) -> Vec<(String, Vec<String>)> {
    query
        .topology
        .devices()
        .into_iter()
        .map(|d| {
            let opts = match query.pins.get(&d.id) {
                Some(p) => vec![p.clone()],
                None => catalog
                    .hardware
                    .iter()
                    .filter(|h| h.schema == d.schema && !query.excluded_hardware.contains(&h.id))
                    .map(|h| h.id.clone())
                    .collect(),
            };
            (d.id.clone(), opts)
        })
        .collect()
}

/// Per (workload, activated role): every admissible set of systems, the
/// empty set included.
pub fn role_options(catalog: &Catalog, query: &Query) -> Vec<(String, String, Vec<Vec<String>>)> {
    let mut out = Vec::new();
    for w in &query.workloads {
        for (r, _) in activated_roles(catalog, query, w) {
            let exclusive = catalog.role(&r).unwrap().is_exclusive;
            let mut ms: Vec<String> = catalog
                .systems
                .iter()
                .filter(|s| s.roles.contains(&r) && !query.excluded_systems.contains(&s.id))
                .map(|s| s.id.clone())
                .collect();
            ms.sort();
            let sets: Vec<Vec<String>> = if exclusive {
                std::iter::once(Vec::new()).chain(ms.iter().map(|s| vec![s.clone()])).collect()
            } else {
                (0..1u32 << ms.len())
                    .map(|mask| ms.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| s.clone()).collect())
                    .collect()
            };
            out.push((w.id.clone(), r, sets));
        }
    }
    out
}

pub fn assignment_count(catalog: &Catalog, query: &Query) -> u64 {
    let hw: u64 = hardware_options(catalog, query).iter().map(|(_, o)| o.len() as u64).product();
    let roles: u64 = role_options(catalog, query).iter().map(|(_, _, o)| o.len() as u64).product();
    hw.saturating_mul(roles)
}

/// Longest chain of strictly worse systems below each system on `tag`.
fn ranks(catalog: &Catalog, query: &Query, tag: &str) -> BTreeMap<String, u32> {
    let mut worse: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for o in catalog.orderings.iter().chain(&query.orderings).filter(|o| o.objective == tag) {
        worse.entry(o.subject.as_str()).or_default().push(o.object.as_str());
    }
    fn depth<'a>(s: &'a str, worse: &BTreeMap<&'a str, Vec<&'a str>>) -> u32 {
        worse.get(s).map_or(0, |ws| ws.iter().map(|w| 1 + depth(w, worse)).max().unwrap_or(0))
    }
    catalog.systems.iter().map(|s| (s.id.clone(), depth(&s.id, &worse))).collect()
}

fn relevant(catalog: &Catalog, query: &Query, role: &str, tag: &str) -> bool {
    catalog.systems.iter().filter(|s| s.roles.iter().any(|r| r == role)).any(|s| {
        s.solves.iter().any(|t| t == tag)
            || catalog
                .orderings
                .iter()
                .chain(&query.orderings)
                .any(|o| o.objective == tag && (o.subject == s.id || o.object == s.id))
    })
}

fn hard(catalog: &Catalog, query: &Query, workload: &str, role: &str) -> bool {
    let w = query.workload(workload).unwrap();
    w.objectives.iter().any(|t| relevant(catalog, query, role, t))
        || w.performance_bounds.iter().any(|b| {
            b.at_least
                .as_ref()
                .and_then(|s| catalog.system(s))
                .is_some_and(|s| s.roles.iter().any(|r| r == role))
        })
}

/// Larger is better, compared lexicographically: satisfied optional roles,
/// then each directive in priority order (cost negated).
pub fn score(catalog: &Catalog, query: &Query, a: &Assignment) -> Vec<i64> {
    score_with(catalog, query, a, &|r| r)
}

/// As [`score`], with every rank passed through `relabel` first.
pub fn score_with(catalog: &Catalog, query: &Query, a: &Assignment, relabel: &dyn Fn(u32) -> u32) -> Vec<i64> {
    let deployed = |w: &str, r: &str| -> Vec<String> {
        a.roles.get(w).and_then(|m| m.get(r)).cloned().unwrap_or_default()
    };
    let mut soft = 0;
    for w in &query.workloads {
        for (r, _) in activated_roles(catalog, query, w) {
            if !hard(catalog, query, &w.id, &r) && !deployed(&w.id, &r).is_empty() {
                soft += 1;
            }
        }
    }
    let optional = query.constraints.iter().filter(|c| c.hardness == Hardness::Optional).count();
    soft += (optional - audit(catalog, query, a).dropped_optional.len()) as i64;
    let mut out = vec![soft];
    let mut directives = query.optimize.clone();
    directives.sort_by_key(|d| d.priority);
    for d in directives {
        match (&d.workload, &d.objective) {
            (Some(w), Some(tag)) => {
                let rk = ranks(catalog, query, tag);
                let wl = query.workload(w).unwrap();
                let mut v = 0i64;
                for (r, _) in activated_roles(catalog, query, wl) {
                    if relevant(catalog, query, &r, tag) {
                        v += deployed(w, &r).iter().map(|s| relabel(rk[s]) as i64).sum::<i64>();
                    }
                }
                out.push(v);
            }
            _ => {
                let cost: f64 = a
                    .hardware
                    .values()
                    .map(|h| catalog.hardware(h).unwrap().values["cost"].as_f64().unwrap())
                    .sum();
                out.push(-(cost.round() as i64));
            }
        }
    }
    out
}

pub struct Optimum {
    pub score: Vec<i64>,
    pub witness: Assignment,
    pub feasible: u64,
}

/// Exhaustive lexicographic optimum, or `None` when nothing is admissible.
pub fn brute_force(catalog: &Catalog, query: &Query) -> Option<Optimum> {
    brute_force_with(catalog, query, &|r| r)
}

pub fn brute_force_with(catalog: &Catalog, query: &Query, relabel: &dyn Fn(u32) -> u32) -> Option<Optimum> {
    let hw = hardware_options(catalog, query);
    let roles = role_options(catalog, query);
    if hw.iter().any(|(_, o)| o.is_empty()) {
        return None;
    }
    let mut best: Option<Optimum> = None;
    let mut feasible = 0;
    let mut hw_idx = vec![0usize; hw.len()];
    loop {
        let mut role_idx = vec![0usize; roles.len()];
        loop {
            let mut a = Assignment::default();
            for ((d, opts), &i) in hw.iter().zip(&hw_idx) {
                a.hardware.insert(d.clone(), opts[i].clone());
            }
            for ((w, r, sets), &i) in roles.iter().zip(&role_idx) {
                if !sets[i].is_empty() {
                    a.roles.entry(w.clone()).or_default().insert(r.clone(), sets[i].clone());
                }
            }
            if audit(catalog, query, &a).violations.is_empty() {
                feasible += 1;
                let s = score_with(catalog, query, &a, relabel);
                if best.as_ref().is_none_or(|b| s > b.score) {
                    best = Some(Optimum { score: s, witness: a, feasible: 0 });
                }
            }
            if !advance(&mut role_idx, roles.iter().map(|(_, _, s)| s.len())) {
                break;
            }
        }
        if !advance(&mut hw_idx, hw.iter().map(|(_, o)| o.len())) {
            break;
        }
    }
    best.map(|mut b| {
        b.feasible = feasible;
        b
    })
}

/// Odometer increment; false once every digit has wrapped.
fn advance(idx: &mut [usize], radix: impl Iterator<Item = usize>) -> bool {
    for (i, n) in idx.iter_mut().zip(radix) {
        *i += 1;
        if *i < n {
            return true;
        }
        *i = 0;
    }
    false
}

/// One explain request that came back as a conflict.
pub struct Conflict {
    pub seed: u64,
    pub request: archforge_core::explain::ExplainRequest,
    pub atoms: Vec<archforge_core::explain::Atom>,
    pub categories: BTreeSet<archforge_core::explain::Category>,
}

/// Walks seeds from `start`, asking for every non-chosen system of every
/// filled role, until `want` conflicts are collected.
pub fn conflicts(start: u64, want: usize, env: &Envelope) -> Vec<Conflict> {
    use archforge_core::explain::{explain, ExplainOptions, ExplainOutcome, ExplainRequest};
    use archforge_core::synth::{synthesize, SynthOptions, SynthOutcome};

    let mut out = Vec::new();
    let mut seed = start;
    while out.len() < want {
        let inst = instance(seed, env);
        seed += 1;
        let Ok(SynthOutcome::Design(d)) = synthesize(&inst.catalog, &inst.query, &SynthOptions::default()) else {
            continue;
        };
        'slots: for (w, roles) in &d.workloads {
            let objectives = &inst.query.workload(w).unwrap().objectives;
            for (r, chosen) in roles {
                for s in inst.catalog.systems.iter().filter(|s| s.roles.contains(r) && !chosen.contains(&s.id)) {
                    let Some(objective) = objectives.first().cloned() else { continue };
                    let req = ExplainRequest {
                        workload: w.clone(),
                        role: r.clone(),
                        preferred: s.id.clone(),
                        objective,
                        flexible: Vec::new(),
                    };
                    let e = explain(&inst.catalog, &inst.query, &d, &req, &ExplainOptions::default())
                        .unwrap_or_else(|e| panic!("seed {}: {e:?}", inst.seed));
                    if let ExplainOutcome::Conflict { atoms, categories, .. } = e.outcome {
                        out.push(Conflict { seed: inst.seed, request: req, atoms, categories });
                        if out.len() >= want {
                            break 'slots;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Re-checks a conflict on a fresh encoding: the atoms together are
/// unsatisfiable and dropping any one of them makes the rest satisfiable.
pub fn verify_conflict(catalog: &Catalog, query: &Query, atoms: &[archforge_core::explain::Atom]) -> Result<(), String> {
    use archforge_core::smt::Outcome;
    use archforge_core::synth::encode;

    let mut enc = encode(catalog, query).map_err(|e| e.to_string())?;
    let ids: Vec<_> = atoms
        .iter()
        .map(|a| a.formula.clone().ok_or("atom without formula"))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|f| enc.session.assert_tracked(f))
        .collect();
    if !matches!(enc.session.solve_subset(&ids), Outcome::Unsat(_)) {
        return Err("atom set is satisfiable".into());
    }
    for i in 0..ids.len() {
        let rest: Vec<_> = ids.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| *t).collect();
        if !matches!(enc.session.solve_subset(&rest), Outcome::Sat(_)) {
            return Err(format!("atom {} ({}) is redundant", atoms[i].id, atoms[i].text));
        }
    }
    Ok(())
}

/// Bundled DC inventory: one pinned switch, two servers, and `n` workloads
/// each forced onto the same CCA.
pub fn forced_cca(n: usize, cca: &str, switch: &str) -> Query {
    let workloads: Vec<Value> = (0..n)
        .map(|i| json!({"id": format!("w{i}"), "deployed_at": ["rack"], "properties": ["dc_flows"]}))
        .collect();
    let constraints: Vec<Value> = (0..n)
        .map(|i| json!({
            "id": format!("use{i}"), "workload": format!("w{i}"), "hardness": "HARD",
            "expr": {"op": "deployed", "system": cca},
        }))
        .collect();
    serde_json::from_value(json!({
        "topology": {"groups": [{"id": "rack", "group_type": "RACK", "devices": [
            {"id": "sw", "device_type": "SWITCH", "schema": "switch_schema"},
            {"id": "c0", "device_type": "COMPUTE", "schema": "compute_schema"},
            {"id": "c1", "device_type": "COMPUTE", "schema": "compute_schema"},
        ]}]},
        "workloads": workloads,
        "constraints": constraints,
        "pins": {"sw": switch},
        "optimize": [{"metric": "TOTAL_COST", "priority": 1}],
    }))
    .expect("forced-cca query parses")
}
