use crate::smt::Formula;

/// Splits `f` into atoms whose conjunction is equivalent to `f`.
///
/// Conjunctions are split, negations pushed inward, and `a ⇒ (b ∧ c)`
/// becomes `a ⇒ b`, `a ⇒ c`. `depth` bounds the recursion; `None` goes all
/// the way down to literals and comparisons.
pub fn decompose(f: &Formula, depth: Option<usize>) -> Vec<Formula> {
    let mut out = Vec::new();
    split(f, true, depth, &mut out);
    out.retain(|a| *a != Formula::Const(true));
    out
}

fn deeper(depth: Option<usize>) -> Option<usize> {
    depth.map(|d| d.saturating_sub(1))
}

/// `f` (or its negation when `!positive`) with negations pushed to the
/// leaves, without splitting anything.
fn normalize(f: &Formula, positive: bool) -> Formula {
    match (f, positive) {
        (Formula::Not(g), p) => normalize(g, !p),
        (Formula::Const(b), p) => Formula::Const(*b == p),
        (Formula::And(fs), true) => Formula::and(fs.iter().map(|g| normalize(g, true)).collect()),
        (Formula::And(fs), false) => Formula::or(fs.iter().map(|g| normalize(g, false)).collect()),
        (Formula::Or(fs), true) => Formula::or(fs.iter().map(|g| normalize(g, true)).collect()),
        (Formula::Or(fs), false) => Formula::and(fs.iter().map(|g| normalize(g, false)).collect()),
        (Formula::Implies(a, b), true) => Formula::implies(normalize(a, true), normalize(b, true)),
        (Formula::Implies(a, b), false) => {
            Formula::and(vec![normalize(a, true), normalize(b, false)])
        }
        (Formula::Cmp(a, op, b), false) => match op.negate() {
            Some(n) => Formula::Cmp(a.clone(), n, b.clone()),
            None => Formula::Not(Box::new(f.clone())),
        },
        (g, true) => g.clone(),
        (g, false) => Formula::Not(Box::new(g.clone())),
    }
}

fn split(f: &Formula, positive: bool, depth: Option<usize>, out: &mut Vec<Formula>) {
    if depth == Some(0) {
        out.push(normalize(f, positive));
        return;
    }
    let d = deeper(depth);
    match (f, positive) {
        (Formula::Not(g), p) => split(g, !p, depth, out),
        (Formula::And(fs), true) | (Formula::Or(fs), false) => {
            for g in fs {
                split(g, positive, d, out);
            }
        }
        (Formula::Implies(a, b), false) => {
            split(a, true, d, out);
            split(b, false, d, out);
        }
        (Formula::Implies(a, b), true) => {
            let lhs = normalize(a, true);
            let mut parts = Vec::new();
            split(b, true, d, &mut parts);
            if parts.is_empty() {
                return; // consequent is trivially true
            }
            for p in parts {
                out.push(match lhs {
                    Formula::Const(true) => p,
                    _ => Formula::implies(lhs.clone(), p),
                });
            }
        }
        (g, p) => out.push(normalize(g, p)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smt::{BoolVar, SolverSession};

    fn vars(n: usize) -> (SolverSession, Vec<BoolVar>) {
        let mut s = SolverSession::new();
        let v = (0..n).map(|i| s.new_bool(&format!("x{i}"))).collect();
        (s, v)
    }

    #[test]
    fn implication_over_conjunction_splits() {
        let (_, v) = vars(3);
        let f = Formula::implies(
            Formula::Var(v[0]),
            Formula::and(vec![Formula::Var(v[1]), Formula::Var(v[2])]),
        );
        let atoms = decompose(&f, None);
        assert_eq!(
            atoms,
            vec![
                Formula::implies(Formula::Var(v[0]), Formula::Var(v[1])),
                Formula::implies(Formula::Var(v[0]), Formula::Var(v[2]))
            ]
        );
    }

    #[test]
    fn atoms_are_fixpoints() {
        let (_, v) = vars(1);
        assert_eq!(
            decompose(&Formula::Var(v[0]), None),
            vec![Formula::Var(v[0])]
        );
    }

    #[test]
    fn depth_limits_splitting() {
        let (_, v) = vars(3);
        let inner = Formula::and(vec![Formula::Var(v[1]), Formula::Var(v[2])]);
        let f = Formula::And(vec![Formula::Var(v[0]), inner.clone()]);
        assert_eq!(decompose(&f, Some(1)), vec![Formula::Var(v[0]), inner]);
        assert_eq!(decompose(&f, None).len(), 3);
    }

    #[test]
    fn negated_disjunction_splits_into_negated_atoms() {
        let (_, v) = vars(2);
        let f = Formula::not(Formula::or(vec![Formula::Var(v[0]), Formula::Var(v[1])]));
        assert_eq!(
            decompose(&f, None),
            vec![
                Formula::not(Formula::Var(v[0])),
                Formula::not(Formula::Var(v[1]))
            ]
        );
    }
}
