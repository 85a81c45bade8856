use std::fmt::Write as _;

use archforge_core::model::{Catalog, Relation};
use archforge_core::synth::encode::fmt_num;
use archforge_core::synth::{Design, Infeasibility};

pub fn design(d: &Design) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "** Systems deployed **");
    for (w, roles) in &d.workloads {
        let _ = writeln!(out, "{w} -");
        for (i, (role, systems)) in roles.iter().enumerate() {
            let _ = writeln!(out, "{}. {role} role: {}", i + 1, systems.join(", "));
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "** Other values **");
    let _ = writeln!(out, "Total cost = {}", fmt_num(d.total_cost));
    for o in &d.objectives {
        let _ = writeln!(out, "{} = {} (priority {})", o.directive, fmt_num(o.value), o.priority);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "** Hardware assignments **");
    for (dev, hw) in &d.hardware {
        let _ = writeln!(out, "{dev} = {hw}");
    }
    if !d.warnings.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "** Warnings **");
        for w in &d.warnings {
            let _ = writeln!(out, "{}: {}", w.workload, w.text);
        }
    }
    if !d.dropped_optional.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "** Optional constraints dropped **");
        for c in &d.dropped_optional {
            let _ = writeln!(out, "{c}");
        }
    }
    out
}

pub fn infeasible(inf: &Infeasibility) -> String {
    let mut out = String::from("** No feasible design **\nConflicting constraints:\n");
    for c in &inf.core {
        let _ = writeln!(out, "  - {}: {}", c.origin.label, c.text);
    }
    out
}

pub fn catalog_listing(c: &Catalog) -> String {
    let mut out = String::new();
    let section = |out: &mut String, title: &str, ids: Vec<String>| {
        let _ = writeln!(out, "** {title} ({}) **", ids.len());
        for id in ids {
            let _ = writeln!(out, "{id}");
        }
    };
    section(&mut out, "Systems", c.systems.iter().map(|s| format!("{} [{}]", s.id, s.roles.join(", "))).collect());
    section(&mut out, "Hardware", c.hardware.iter().map(|h| format!("{} ({})", h.id, h.schema)).collect());
    section(&mut out, "Roles", c.roles.iter().map(|r| r.id.clone()).collect());
    section(&mut out, "Orderings", c.orderings.iter().map(|o| {
        let rel = match o.relation {
            Relation::BetterThan => "better than",
            Relation::SameAs => "same as",
        };
        let cond = if o.condition.is_some() { " (conditional)" } else { "" };
        format!("{}: {} {rel} {}{cond}", o.objective, o.subject, o.object)
    }).collect());
    out
}
