use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Duration;

use super::{Atom, Category, ExplainOutcome, Explanation};
use crate::io::to_canonical;
use crate::synth::{Origin, PIN_REQUEST};

pub const SUMMARIZER_URL_ENV: &str = "ARCHFORGE_SUMMARIZER_URL";
pub const SUMMARIZER_TOKEN_ENV: &str = "ARCHFORGE_SUMMARIZER_TOKEN";
const SUMMARIZER_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Renderer {
    Template,
    /// POSTs the explanation document and returns the response body.
    Summarizer {
        url: String,
        token: Option<String>,
    },
}

impl Renderer {
    /// Summarizer configured from the environment, or the template when no
    /// endpoint is set.
    pub fn from_env() -> Renderer {
        match std::env::var(SUMMARIZER_URL_ENV) {
            Ok(url) if !url.is_empty() => Renderer::Summarizer {
                url,
                token: std::env::var(SUMMARIZER_TOKEN_ENV)
                    .ok()
                    .filter(|t| !t.is_empty()),
            },
            _ => Renderer::Template,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    /// Set when the summarizer was asked for but the template was used.
    pub degraded: Option<String>,
}

/// Never fails: summarizer problems fall back to the template with a notice.
/// The summarizer call blocks; async callers must run it off the runtime.
pub fn render(e: &Explanation, renderer: &Renderer) -> Rendered {
    match renderer {
        Renderer::Template => Rendered {
            text: template(e),
            degraded: None,
        },
        Renderer::Summarizer { url, token } => match summarize(e, url, token.as_deref()) {
            Ok(text) => Rendered {
                text,
                degraded: None,
            },
            Err(why) => Rendered {
                text: template(e),
                degraded: Some(format!(
                    "summarizer unavailable ({why}); showing the template rendering"
                )),
            },
        },
    }
}

fn summarize(e: &Explanation, url: &str, token: Option<&str>) -> Result<String, String> {
    let token = token.ok_or_else(|| format!("{SUMMARIZER_TOKEN_ENV} is not set"))?;
    let client = reqwest::blocking::Client::builder()
        .timeout(SUMMARIZER_TIMEOUT)
        .build()
        .map_err(|e| e.to_string())?;
    let resp = client
        .post(url)
        .bearer_auth(token)
        .header(reqwest::header::CONTENT_TYPE, "application/json")
        .body(to_canonical(e))
        .send()
        .map_err(|e| e.to_string())?;
    let status = resp.status();
    if !status.is_success() {
        return Err(format!("HTTP {status}"));
    }
    resp.text().map_err(|e| e.to_string())
}

/// Deterministic text built from labels and origins only.
pub fn template(e: &Explanation) -> String {
    let r = &e.request;
    let chosen = if e.chosen.is_empty() {
        "nothing".to_string()
    } else {
        e.chosen.join(", ")
    };
    let mut out = String::new();
    match &e.outcome {
        ExplainOutcome::AlreadyOptimal { ordering } => {
            if e.chosen.contains(&r.preferred) {
                let _ = writeln!(
                    out,
                    "{} is already chosen for {} in {} (consulted the {ordering}).",
                    r.preferred, r.role, r.workload
                );
            } else {
                let _ = writeln!(out, "{chosen} is already optimal for {} in {}: nothing ranks higher in the {ordering}.", r.role, r.workload);
            }
        }
        ExplainOutcome::Alternative {
            changes, tradeoffs, ..
        } => {
            let _ = writeln!(
                out,
                "{} can fill {} for {} instead of {chosen}, with these changes:",
                r.preferred, r.role, r.workload
            );
            for c in changes {
                let _ = writeln!(out, "  {}: {} -> {}", c.subject, c.before, c.after);
            }
            let width = tradeoffs
                .iter()
                .map(|t| t.directive.len())
                .max()
                .unwrap_or(9)
                .max(9);
            let _ = writeln!(out, "Trade-offs:");
            let _ = writeln!(
                out,
                "  {:width$}  {:>10}  {:>10}",
                "directive", "before", "after"
            );
            for t in tradeoffs {
                let mark = match (t.worsened, t.after == t.before) {
                    (true, true) => "  worse for some role",
                    (true, false) => "  worse",
                    (false, false) => "  better",
                    (false, true) => "",
                };
                let _ = writeln!(
                    out,
                    "  {:width$}  {:>10}  {:>10}{mark}",
                    t.directive,
                    num(t.before),
                    num(t.after)
                );
            }
        }
        ExplainOutcome::Conflict {
            atoms,
            categories,
            guidance,
            verified,
        } => {
            let _ = writeln!(
                out,
                "Why {} is not selected for {} in {}",
                r.preferred, r.role, r.workload
            );
            let _ = writeln!(
                out,
                "Current choice: {chosen}; ranked higher by {}: {}",
                r.objective,
                e.priority_systems.join(", ")
            );
            let _ = writeln!(out, "Categories: {}", categories_line(categories));
            let _ = writeln!(out);
            for (item, text) in rows(atoms, &r.preferred) {
                let _ = writeln!(out, "{item}: {text}");
            }
            let _ = writeln!(out);
            for cat in categories {
                let _ = writeln!(out, "{}", cat.as_str());
                for a in atoms.iter().filter(|a| a.categories.contains(cat)) {
                    let _ = writeln!(out, "  - {} [{}]", a.label, a.text);
                }
            }
            let asked: Vec<&Atom> = atoms.iter().filter(|a| a.categories.is_empty()).collect();
            if !asked.is_empty() {
                let _ = writeln!(out, "REQUEST");
                for a in asked {
                    let _ = writeln!(out, "  - {} [{}]", a.label, a.text);
                }
            }
            if !guidance.is_empty() {
                let _ = writeln!(out, "Guidance:");
                for g in guidance {
                    let _ = writeln!(out, "  - {g}");
                }
            }
            if !verified {
                let _ = writeln!(
                    out,
                    "(note: minimality of this explanation could not be re-verified)"
                );
            }
        }
    }
    out
}

/// Summary table: one row per system involved, one for hardware, one for
/// anything else, and the conclusion.
fn rows(atoms: &[Atom], preferred: &str) -> Vec<(String, String)> {
    let mut systems: Vec<String> = Vec::new();
    let mut per_system: Vec<Vec<String>> = Vec::new();
    let mut hardware = Vec::new();
    let mut other = Vec::new();
    for a in atoms {
        let o = &a.origin;
        if o.origin == Origin::Pin && o.detail.as_deref() == Some(PIN_REQUEST) {
            continue;
        }
        if o.origin == Origin::DeviceFill {
            let fact = a.text.split_once(" ⇒ ").map(|(_, c)| c).unwrap_or(&a.text);
            let fact = o
                .device
                .as_ref()
                .and_then(|d| fact.strip_prefix(&format!("{d}.")))
                .unwrap_or(fact);
            let what = match (&o.hardware, &o.device) {
                (Some(h), Some(d)) => format!("{h} on {d} has {fact}"),
                _ => a.label.clone(),
            };
            hardware.push(what);
            continue;
        }
        let Some(s) = o
            .system
            .clone()
            .filter(|_| matches!(o.origin, Origin::SystemConstraint | Origin::Pin))
        else {
            other.push(a.label.clone());
            continue;
        };
        let text = if o.origin == Origin::Pin {
            format!("deployed ({})", a.label)
        } else {
            a.label.clone()
        };
        match systems.iter().position(|x| *x == s) {
            Some(i) => per_system[i].push(text),
            None => {
                systems.push(s);
                per_system.push(vec![text]);
            }
        }
    }
    // Other systems first, the preferred one last, as in "A ∧ B".
    let mut order: Vec<usize> = (0..systems.len()).collect();
    order.sort_by_key(|&i| systems[i] == preferred);
    let mut out: Vec<(String, String)> = order
        .iter()
        .map(|&i| (systems[i].clone(), dedup(&per_system[i]).join("; ")))
        .collect();
    if !hardware.is_empty() {
        out.push((
            "Hardware".into(),
            format!(
                "no candidate satisfies both: {}",
                dedup(&hardware).join("; ")
            ),
        ));
    }
    if !other.is_empty() {
        out.push(("Other".into(), dedup(&other).join("; ")));
    }
    let mut names: Vec<String> = order.iter().map(|&i| systems[i].clone()).collect();
    if !names.iter().any(|n| n == preferred) {
        names.push(preferred.to_string());
    }
    out.push((
        "Result".into(),
        format!(
            "{} is unsatisfiable, so {preferred} is not selected",
            names.join(" ∧ ")
        ),
    ));
    out
}

fn dedup(xs: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    xs.iter()
        .filter(|x| seen.insert(x.as_str()))
        .cloned()
        .collect()
}

fn num(x: f64) -> String {
    crate::synth::encode::fmt_num(x)
}

fn categories_line(c: &BTreeSet<Category>) -> String {
    c.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", ")
}
