use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dsl::evaluate;
use crate::model::{activated_roles, activation_holds, Catalog, Query, WorkloadContext};

use super::check::{deployed_systems, DesignBinding};
use super::{role_systems, Assignment};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WarningKind {
    System,
    UnfulfilledRole,
    DisabledRole,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Warning {
    pub kind: WarningKind,
    pub workload: String,
    /// System or role the warning is about.
    pub subject: String,
    pub text: String,
}

/// Conditional system warnings, activated roles left empty, and roles that
/// would apply but were switched off.
pub fn collect_warnings(catalog: &Catalog, query: &Query, a: &Assignment) -> Vec<Warning> {
    let mut out = Vec::new();
    for w in &query.workloads {
        let deployed = deployed_systems(a, &w.id);
        let b = DesignBinding::new(catalog, query, a, w);
        for s in &deployed {
            let Some(sys) = catalog.system(s) else {
                continue;
            };
            for warn in &sys.warnings {
                if evaluate(&warn.when, &b).map(|r| r.0).unwrap_or(false) {
                    out.push(Warning {
                        kind: WarningKind::System,
                        workload: w.id.clone(),
                        subject: s.clone(),
                        text: warn.text.clone(),
                    });
                }
            }
        }

        let enabled: BTreeSet<String> = activated_roles(catalog, query, w)
            .into_iter()
            .map(|(r, _)| r)
            .collect();
        for r in &enabled {
            if role_systems(catalog, r)
                .iter()
                .any(|s| deployed.contains(s))
            {
                continue;
            }
            let role = catalog.role(r).expect("enabled role exists");
            out.push(Warning {
                kind: WarningKind::UnfulfilledRole,
                workload: w.id.clone(),
                subject: r.clone(),
                text: role.warning.clone().unwrap_or_else(|| {
                    format!("role {r} applies to {} but no system fulfils it", w.id)
                }),
            });
        }

        let ctx = WorkloadContext::new(query, w);
        for role in &catalog.roles {
            let off = !role.considered || w.exempted_roles.contains(&role.id);
            if off && activation_holds(role, &ctx) {
                out.push(Warning {
                    kind: WarningKind::DisabledRole,
                    workload: w.id.clone(),
                    subject: role.id.clone(),
                    text: role.warning.clone().unwrap_or_else(|| {
                        format!(
                            "role {} applies to {} but was disabled by the architect",
                            role.id, w.id
                        )
                    }),
                });
            }
        }
    }
    out.sort();
    out.dedup();
    out
}
