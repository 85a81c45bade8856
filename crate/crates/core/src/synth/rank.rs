//! Partial orders over systems turned into integer ranks.
//!
//! SAME_AS entries merge systems into classes; BETTER_THAN edges between
//! classes must form a DAG. A class's rank is the length of the longest
//! chain of strictly-worse classes below it, so sinks sit at 0.

use std::collections::{BTreeMap, BTreeSet};

use crate::dsl::evaluate;
use crate::model::{
    Catalog, OrderingSpec, Provenance, Query, Relation, WorkloadContext, WorkloadSpec,
};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankTable {
    pub ranks: BTreeMap<String, u32>,
    pub dominators: BTreeMap<String, BTreeSet<String>>,
    /// Systems named by at least one applicable ordering.
    pub mentioned: BTreeSet<String>,
}

impl RankTable {
    pub fn rank(&self, system: &str) -> u32 {
        self.ranks.get(system).copied().unwrap_or(0)
    }

    /// Systems strictly better than `system`.
    pub fn dominators(&self, system: &str) -> BTreeSet<String> {
        self.dominators.get(system).cloned().unwrap_or_default()
    }

    /// Applies `f` to every rank (used to check that selection depends on
    /// order only).
    pub fn relabel(&self, f: impl Fn(u32) -> u32) -> RankTable {
        let mut t = self.clone();
        for v in t.ranks.values_mut() {
            *v = f(*v);
        }
        t
    }
}

struct Classes {
    parent: BTreeMap<String, String>,
}

impl Classes {
    fn find(&mut self, x: &str) -> String {
        let p = self
            .parent
            .entry(x.to_string())
            .or_insert_with(|| x.to_string())
            .clone();
        if p == x {
            return p;
        }
        let root = self.find(&p);
        self.parent.insert(x.to_string(), root.clone());
        root
    }
    fn union(&mut self, a: &str, b: &str) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smallest id is the representative, for determinism.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent.insert(hi, lo);
        }
    }
}

/// Ranks and dominator sets for the systems mentioned in `orderings`, or the
/// sorted list of systems involved in a cycle.
pub fn order_layers(orderings: &[&OrderingSpec]) -> Result<RankTable, Vec<String>> {
    let mut classes = Classes {
        parent: BTreeMap::new(),
    };
    let mut mentioned = BTreeSet::new();
    for o in orderings {
        mentioned.insert(o.subject.clone());
        mentioned.insert(o.object.clone());
        classes.find(&o.subject);
        classes.find(&o.object);
        if o.relation == Relation::SameAs {
            classes.union(&o.subject, &o.object);
        }
    }
    // better[a] = classes directly worse than a.
    let mut worse: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for o in orderings {
        if o.relation == Relation::BetterThan {
            let (a, b) = (classes.find(&o.subject), classes.find(&o.object));
            if a == b {
                let mut c = vec![o.subject.clone(), o.object.clone()];
                c.sort();
                c.dedup();
                return Err(c);
            }
            worse.entry(a).or_default().insert(b);
        }
    }
    let roots: BTreeSet<String> = mentioned.iter().map(|m| classes.find(m)).collect();

    // Longest path via DFS with cycle detection.
    let mut rank: BTreeMap<String, u32> = BTreeMap::new();
    let mut state: BTreeMap<String, u8> = BTreeMap::new(); // 1 = on stack, 2 = done
    fn visit(
        c: &str,
        worse: &BTreeMap<String, BTreeSet<String>>,
        rank: &mut BTreeMap<String, u32>,
        state: &mut BTreeMap<String, u8>,
        stack: &mut Vec<String>,
    ) -> Result<u32, Vec<String>> {
        match state.get(c) {
            Some(2) => return Ok(rank[c]),
            Some(1) => {
                let pos = stack.iter().position(|s| s == c).unwrap_or(0);
                return Err(stack[pos..].to_vec());
            }
            _ => {}
        }
        state.insert(c.to_string(), 1);
        stack.push(c.to_string());
        let mut r = 0;
        if let Some(ws) = worse.get(c) {
            for w in ws {
                r = r.max(visit(w, worse, rank, state, stack)? + 1);
            }
        }
        stack.pop();
        state.insert(c.to_string(), 2);
        rank.insert(c.to_string(), r);
        Ok(r)
    }
    for c in &roots {
        let mut stack = Vec::new();
        if let Err(cycle_classes) = visit(c, &worse, &mut rank, &mut state, &mut stack) {
            let set: BTreeSet<String> = cycle_classes.iter().cloned().collect();
            let mut members: Vec<String> = mentioned
                .iter()
                .filter(|m| set.contains(&classes.find(m)))
                .cloned()
                .collect();
            members.sort();
            return Err(members);
        }
    }

    // Transitive "better than" per class: invert the worse relation.
    let mut better: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (a, ws) in &worse {
        for w in ws {
            better.entry(w.clone()).or_default().insert(a.clone());
        }
    }
    let mut class_dom: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for c in &roots {
        let mut seen = BTreeSet::new();
        let mut todo: Vec<String> = better
            .get(c)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default();
        while let Some(x) = todo.pop() {
            if seen.insert(x.clone()) {
                if let Some(up) = better.get(&x) {
                    todo.extend(up.iter().cloned());
                }
            }
        }
        class_dom.insert(c.clone(), seen);
    }

    let mut table = RankTable {
        mentioned: mentioned.clone(),
        ..Default::default()
    };
    for m in &mentioned {
        let c = classes.find(m);
        table.ranks.insert(m.clone(), rank[&c]);
        let doms: BTreeSet<String> = mentioned
            .iter()
            .filter(|x| class_dom[&c].contains(&classes.find(x)))
            .cloned()
            .collect();
        table.dominators.insert(m.clone(), doms);
    }
    Ok(table)
}

/// Orderings that apply to one workload: condition holds, architect entries
/// shadow expert entries on the same unordered pair.
pub fn applicable_orderings<'a>(
    catalog: &'a Catalog,
    query: &'a Query,
    workload: &WorkloadSpec,
    objective: &str,
    systems: &BTreeSet<String>,
) -> Vec<&'a OrderingSpec> {
    let ctx = WorkloadContext::new(query, workload);
    let all: Vec<&OrderingSpec> = catalog
        .orderings
        .iter()
        .chain(query.orderings.iter())
        .filter(|o| o.objective == objective)
        .filter(|o| systems.contains(&o.subject) && systems.contains(&o.object))
        .filter(|o| match &o.condition {
            None => true,
            Some(c) => evaluate(c, &ctx).map(|r| r.0).unwrap_or(false),
        })
        .collect();
    let pair = |o: &OrderingSpec| {
        if o.subject < o.object {
            (o.subject.clone(), o.object.clone())
        } else {
            (o.object.clone(), o.subject.clone())
        }
    };
    let architect_pairs: BTreeSet<(String, String)> = all
        .iter()
        .filter(|o| o.provenance == Provenance::Architect)
        .map(|o| pair(o))
        .collect();
    all.into_iter()
        .filter(|o| o.provenance == Provenance::Architect || !architect_pairs.contains(&pair(o)))
        .collect()
}

/// Rank table for the systems that fulfil `role`, from the workload's point
/// of view.
pub fn rank_table(
    catalog: &Catalog,
    query: &Query,
    workload: &WorkloadSpec,
    role: &str,
    objective: &str,
) -> Result<RankTable, Vec<String>> {
    let systems: BTreeSet<String> = catalog
        .systems_for_role(role)
        .iter()
        .map(|s| s.id.clone())
        .collect();
    let list = applicable_orderings(catalog, query, workload, objective, &systems);
    let mut t = order_layers(&list)?;
    for s in &systems {
        t.ranks.entry(s.clone()).or_insert(0);
        t.dominators.entry(s.clone()).or_default();
    }
    Ok(t)
}
