use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{activated_roles, Catalog, Hardness, OptimizeTarget, Query, SPEC_VERSION};

use super::check::{audit, deployed_systems, total_cost, DesignBinding, Ledgers};
use super::rank::rank_table;
use super::warnings::{collect_warnings, Warning};
use super::{role_is_hard, role_relevant, role_systems, Assignment};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub priority: u32,
    pub directive: String,
    pub value: f64,
    /// Rank achieved per relevant role (sum over deployed systems).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ranks: BTreeMap<String, u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    #[serde(rename = "kepler-spec")]
    pub version: u32,
    pub status: String,
    /// workload → role → deployed systems.
    pub workloads: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub hardware: BTreeMap<String, String>,
    pub total_cost: f64,
    pub ledgers: Ledgers,
    #[serde(default)]
    pub warnings: Vec<Warning>,
    #[serde(default)]
    pub dropped_optional: Vec<String>,
    #[serde(default)]
    pub objectives: Vec<ObjectiveReport>,
}

impl Design {
    pub fn assignment(&self) -> Assignment {
        Assignment {
            roles: self.workloads.clone(),
            hardware: self.hardware.clone(),
        }
    }

    /// The system filling an exclusive role, if any.
    pub fn system_for(&self, workload: &str, role: &str) -> Option<&str> {
        self.workloads
            .get(workload)?
            .get(role)?
            .first()
            .map(String::as_str)
    }

    pub fn deployed(&self, workload: &str) -> Vec<String> {
        deployed_systems(&self.assignment(), workload)
            .into_iter()
            .collect()
    }
}

pub fn build_design(catalog: &Catalog, query: &Query, a: &Assignment) -> Design {
    let au = audit(catalog, query, a);
    Design {
        version: SPEC_VERSION,
        status: "FEASIBLE".into(),
        workloads: a.roles.clone(),
        hardware: a.hardware.clone(),
        total_cost: total_cost(catalog, a),
        ledgers: au.ledgers,
        warnings: collect_warnings(catalog, query, a),
        dropped_optional: au.dropped_optional,
        objectives: objective_report(catalog, query, a),
    }
}

/// Directive values computed from the rank tables, in priority order.
pub fn objective_report(catalog: &Catalog, query: &Query, a: &Assignment) -> Vec<ObjectiveReport> {
    let mut directives = query.optimize.clone();
    directives.sort_by_key(|d| d.priority);
    directives
        .iter()
        .map(|d| {
            let mut rep = ObjectiveReport {
                priority: d.priority,
                directive: d.describe(),
                value: 0.0,
                ranks: BTreeMap::new(),
            };
            match d.target() {
                Some(OptimizeTarget::Objective {
                    workload,
                    objective,
                }) => {
                    if let Some(w) = query.workload(&workload) {
                        let deployed = deployed_systems(a, &workload);
                        for (r, _) in activated_roles(catalog, query, w) {
                            if !role_relevant(catalog, query, &r, &objective) {
                                continue;
                            }
                            let Ok(t) = rank_table(catalog, query, w, &r, &objective) else {
                                continue;
                            };
                            let sum: u32 = role_systems(catalog, &r)
                                .iter()
                                .filter(|s| deployed.contains(*s))
                                .map(|s| t.rank(s))
                                .sum();
                            rep.ranks.insert(r, sum);
                            rep.value += sum as f64;
                        }
                    }
                }
                Some(OptimizeTarget::TotalCost) => rep.value = total_cost(catalog, a),
                None => {}
            }
            rep
        })
        .collect()
}

/// Number of satisfied preferences: optional roles that got a system plus
/// optional architect constraints that hold.
pub fn soft_score(catalog: &Catalog, query: &Query, a: &Assignment) -> usize {
    let mut n = 0;
    for w in &query.workloads {
        let deployed = deployed_systems(a, &w.id);
        for (r, _) in activated_roles(catalog, query, w) {
            if !role_is_hard(catalog, query, w, &r)
                && role_systems(catalog, &r)
                    .iter()
                    .any(|s| deployed.contains(s))
            {
                n += 1;
            }
        }
    }
    for c in query
        .constraints
        .iter()
        .filter(|c| c.hardness == Hardness::Optional)
    {
        if let Some(w) = query.workload(&c.workload) {
            let b = DesignBinding::new(catalog, query, a, w);
            if crate::dsl::evaluate(&c.expr, &b)
                .map(|r| r.0)
                .unwrap_or(false)
            {
                n += 1;
            }
        }
    }
    n
}
