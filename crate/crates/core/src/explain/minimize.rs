use crate::smt::{Outcome, SolverSession, TrackId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinimizeError {
    /// The tracked set is satisfiable, so there is nothing to minimise.
    Satisfiable,
    Timeout,
}

/// Shrinks `tracks` to a subset-minimal unsatisfiable subset.
///
/// Deletion-based: each member is dropped in turn and kept out when the rest
/// stays unsat; unsat answers also shrink the working set to their core.
pub fn minimize(
    session: &mut SolverSession,
    tracks: &[TrackId],
) -> Result<Vec<TrackId>, MinimizeError> {
    let mut current = match session.solve_subset(tracks) {
        Outcome::Unsat(core) => restrict(core, tracks),
        Outcome::Sat(_) => return Err(MinimizeError::Satisfiable),
        Outcome::Unknown => return Err(MinimizeError::Timeout),
    };
    let mut i = 0;
    while i < current.len() {
        let candidate = current[i];
        let rest: Vec<TrackId> = current
            .iter()
            .copied()
            .filter(|t| *t != candidate)
            .collect();
        match session.solve_subset(&rest) {
            Outcome::Unsat(core) => {
                current = restrict(core, &rest);
                // Everything before position i was already shown necessary.
                i = current
                    .iter()
                    .position(|t| *t > candidate)
                    .unwrap_or(current.len());
            }
            Outcome::Sat(_) => i += 1,
            Outcome::Unknown => return Err(MinimizeError::Timeout),
        }
    }
    Ok(current)
}

/// Independent re-check: `core` is unsat and every proper subset obtained by
/// dropping one member is sat.
pub fn verify_minimal(session: &mut SolverSession, core: &[TrackId]) -> bool {
    if !session.solve_subset(core).is_unsat() {
        return false;
    }
    core.iter().all(|c| {
        let rest: Vec<TrackId> = core.iter().copied().filter(|t| t != c).collect();
        session.solve_subset(&rest).is_sat()
    })
}

fn restrict(core: Vec<TrackId>, within: &[TrackId]) -> Vec<TrackId> {
    let mut out: Vec<TrackId> = core.into_iter().filter(|t| within.contains(t)).collect();
    out.sort();
    out
}
