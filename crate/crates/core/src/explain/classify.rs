use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::smt::{Formula, VarRef};
use crate::synth::encode::VarMeta;
use crate::synth::{Encoded, Origin, OriginRecord, BOUND_SOLVES, PIN_HARDWARE, PIN_SYSTEM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    /// The preferred system clashes with another deployed or required system.
    SystemIncompatibility,
    /// No available hardware satisfies what the system needs.
    InsufficientInventory,
    /// The workload's properties, roles or bounds rule the system out.
    WorkloadMismatch,
    /// The system does not serve the objective the workload asks for.
    ObjectiveMisalignment,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::SystemIncompatibility => "SYSTEM_INCOMPATIBILITY",
            Category::InsufficientInventory => "INSUFFICIENT_INVENTORY",
            Category::WorkloadMismatch => "WORKLOAD_MISMATCH",
            Category::ObjectiveMisalignment => "OBJECTIVE_MISALIGNMENT",
        }
    }
}

/// Categories for one core atom. Request pins get none: they are the
/// question, not a reason.
pub fn classify(enc: &Encoded, atom: &Formula, origin: &OriginRecord) -> BTreeSet<Category> {
    use Category::*;
    let mut out = BTreeSet::new();
    match origin.origin {
        Origin::DeviceFill | Origin::Capacity => {
            out.insert(InsufficientInventory);
        }
        Origin::RoleActivation | Origin::RoleFulfill | Origin::Architect => {
            out.insert(WorkloadMismatch);
        }
        Origin::OrderingBound => {
            out.insert(if origin.detail.as_deref() == Some(BOUND_SOLVES) {
                ObjectiveMisalignment
            } else {
                WorkloadMismatch
            });
        }
        Origin::SystemConstraint => {
            let mut other_system = false;
            let mut hardware = false;
            atom.visit_vars(&mut |v| match v {
                VarRef::Bool(b) => match enc.bool_meta(b) {
                    Some(VarMeta::Deployed { system, .. }) => {
                        other_system |= origin.system.as_deref() != Some(system.as_str())
                    }
                    Some(VarMeta::Attr { .. }) | Some(VarMeta::Hardware { .. }) => hardware = true,
                    _ => {}
                },
                VarRef::Finite(f) => {
                    hardware |= matches!(
                        enc.finite_meta(f),
                        Some(VarMeta::Attr { .. }) | Some(VarMeta::Hardware { .. })
                    )
                }
            });
            if other_system {
                out.insert(SystemIncompatibility);
            }
            if hardware {
                out.insert(InsufficientInventory);
            }
            if out.is_empty() {
                out.insert(WorkloadMismatch);
            }
        }
        Origin::Pin => match origin.detail.as_deref() {
            Some(PIN_SYSTEM) => {
                out.insert(SystemIncompatibility);
            }
            Some(PIN_HARDWARE) => {
                out.insert(InsufficientInventory);
            }
            _ => {}
        },
    }
    out
}
