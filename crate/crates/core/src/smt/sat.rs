//! Conflict-driven clause learning over boolean variables with native
//! linear pseudo-Boolean constraints (`sum(coef * lit) <= bound`, real
//! coefficients) and assumption-based failed-literal cores.
//!
//! Pseudo-Boolean constraints propagate by slack: once the weight of true
//! literals leaves less room than an unassigned literal's coefficient, that
//! literal is forced false. Reasons are materialised lazily as clauses over
//! the literals that were true before the propagated one.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Absolute slack used when comparing real-valued sums.
pub const PB_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: u32, negated: bool) -> Self {
        Lit(var << 1 | negated as u32)
    }
    pub fn var(self) -> u32 {
        self.0 >> 1
    }
    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }
    fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    /// Subset of the assumptions that cannot hold together.
    Unsat(Vec<Lit>),
    Unknown,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Reason {
    Decision,
    Clause(usize),
    Pb(usize),
}

struct Pb {
    lits: Vec<Lit>,
    coefs: Vec<f64>,
    bound: f64,
    /// Weight of currently-true literals.
    weight: f64,
}

pub struct SatSolver {
    value: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Reason>,
    trail_pos: Vec<usize>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    pbs: Vec<Pb>,
    pb_occ: Vec<Vec<(usize, f64)>>,
    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    deadline: Option<Instant>,
    conflicts: u64,
}

impl Default for SatSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl SatSolver {
    pub fn new() -> Self {
        SatSolver {
            value: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail_pos: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            clauses: Vec::new(),
            watches: Vec::new(),
            pbs: Vec::new(),
            pb_occ: Vec::new(),
            activity: Vec::new(),
            var_inc: 1.0,
            heap: VarHeap::default(),
            phase: Vec::new(),
            seen: Vec::new(),
            ok: true,
            deadline: None,
            conflicts: 0,
        }
    }

    /// Perturbs initial activities so that equal-activity ties are broken by
    /// the seed rather than by variable index.
    pub fn seed_activities(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in 0..self.activity.len() {
            self.activity[v] = rng.gen::<f64>() * 1e-5;
            self.heap.update(v as u32, &self.activity);
        }
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn num_vars(&self) -> usize {
        self.value.len()
    }

    pub fn new_var(&mut self) -> Lit {
        let v = self.value.len() as u32;
        self.value.push(None);
        self.level.push(0);
        self.reason.push(Reason::Decision);
        self.trail_pos.push(0);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.pb_occ.push(Vec::new());
        self.pb_occ.push(Vec::new());
        self.activity.push(0.0);
        self.phase.push(false);
        self.seen.push(false);
        self.heap.insert(v, &self.activity);
        Lit::new(v, false)
    }

    fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value[l.var() as usize].map(|b| b != l.is_negated())
    }

    /// Value of a literal in the last model (after `Sat`).
    pub fn model_value(&self, l: Lit) -> bool {
        self.lit_value(l).unwrap_or(false)
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn assign(&mut self, l: Lit, reason: Reason) {
        let v = l.var() as usize;
        debug_assert!(self.value[v].is_none());
        self.value[v] = Some(!l.is_negated());
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail_pos[v] = self.trail.len();
        self.trail.push(l);
        for &(pb, coef) in &self.pb_occ[l.index()] {
            self.pbs[pb].weight += coef;
        }
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        while self.trail.len() > lim {
            let l = self.trail.pop().unwrap();
            let v = l.var() as usize;
            for &(pb, coef) in &self.pb_occ[l.index()] {
                self.pbs[pb].weight -= coef;
            }
            self.phase[v] = !l.is_negated();
            self.value[v] = None;
            self.heap.insert(v as u32, &self.activity);
        }
        self.trail_lim.truncate(level as usize);
        self.qhead = self.trail.len().min(self.qhead);
    }

    /// Overrides the saved phase so the next decision on `l`'s variable
    /// tries `l` first.
    pub fn set_phase(&mut self, l: Lit) {
        self.phase[l.var() as usize] = !l.is_negated();
    }

    /// Adds a clause at decision level zero. Returns false if the formula
    /// became trivially unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        self.cancel_until(0);
        if !self.ok {
            return false;
        }
        let mut ls: Vec<Lit> = lits.to_vec();
        ls.sort();
        ls.dedup();
        for w in ls.windows(2) {
            if w[0] == !w[1] {
                return true;
            }
        }
        if ls.iter().any(|&l| self.lit_value(l) == Some(true)) {
            return true;
        }
        ls.retain(|&l| self.lit_value(l) != Some(false));
        match ls.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.assign(ls[0], Reason::Decision);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach_clause(ls);
                true
            }
        }
    }

    fn attach_clause(&mut self, lits: Vec<Lit>) -> usize {
        let idx = self.clauses.len();
        self.watches[(!lits[0]).index()].push(idx);
        self.watches[(!lits[1]).index()].push(idx);
        self.clauses.push(lits);
        idx
    }

    /// Adds `sum(coefs[i] * lits[i]) <= bound` at level zero. Coefficients
    /// must be non-negative; duplicate literals are merged.
    pub fn add_pb(&mut self, terms: &[(f64, Lit)], bound: f64) -> bool {
        self.cancel_until(0);
        if !self.ok {
            return false;
        }
        let mut merged: Vec<(Lit, f64)> = Vec::new();
        let mut bound = bound;
        for &(c, l) in terms {
            assert!(
                c >= 0.0 && c.is_finite(),
                "pb coefficients must be non-negative"
            );
            if c == 0.0 {
                continue;
            }
            match self.lit_value(l) {
                Some(true) => bound -= c,
                Some(false) => {}
                None => {
                    if let Some(e) = merged.iter_mut().find(|e| e.0 == l) {
                        e.1 += c;
                    } else if let Some(pos) = merged.iter().position(|e| e.0 == !l) {
                        // c*l + d*!l = d + (c-d)*l
                        let d = merged[pos].1;
                        bound -= c.min(d);
                        if c > d {
                            merged[pos] = (l, c - d);
                        } else if d > c {
                            merged[pos].1 = d - c;
                        } else {
                            merged.remove(pos);
                        }
                    } else {
                        merged.push((l, c));
                    }
                }
            }
        }
        if bound < -PB_EPS {
            self.ok = false;
            return false;
        }
        let total: f64 = merged.iter().map(|e| e.1).sum();
        if total <= bound + PB_EPS {
            return true;
        }
        // Forced literals at level 0.
        let forced: Vec<Lit> = merged
            .iter()
            .filter(|e| e.1 > bound + PB_EPS)
            .map(|e| !e.0)
            .collect();
        merged.retain(|e| e.1 <= bound + PB_EPS);
        for l in forced {
            if !self.add_clause(&[l]) {
                return false;
            }
        }
        if merged.is_empty() {
            return true;
        }
        // Propagation above may have fixed further literals; recurse once on
        // the reduced constraint when that happens.
        if merged.iter().any(|e| self.lit_value(e.0).is_some()) {
            let terms: Vec<(f64, Lit)> = merged.iter().map(|e| (e.1, e.0)).collect();
            return self.add_pb(&terms, bound);
        }
        let idx = self.pbs.len();
        for &(l, c) in &merged {
            self.pb_occ[l.index()].push((idx, c));
        }
        self.pbs.push(Pb {
            lits: merged.iter().map(|e| e.0).collect(),
            coefs: merged.iter().map(|e| e.1).collect(),
            bound,
            weight: 0.0,
        });
        true
    }

    /// Returns the conflicting constraint, if any.
    fn propagate(&mut self) -> Option<Reason> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            // Clauses watching !p (stored under p's index since we watch the negation).
            let mut ws = std::mem::take(&mut self.watches[p.index()]);
            let mut i = 0;
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                let false_lit = !p;
                {
                    let c = &mut self.clauses[ci];
                    if c[0] == false_lit {
                        c.swap(0, 1);
                    }
                }
                let first = self.clauses[ci][0];
                if self.lit_value(first) == Some(true) {
                    i += 1;
                    continue;
                }
                let len = self.clauses[ci].len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[ci][k];
                    if self.lit_value(l) != Some(false) {
                        self.clauses[ci].swap(1, k);
                        self.watches[(!l).index()].push(ci);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                match self.lit_value(first) {
                    Some(false) => {
                        conflict = Some(Reason::Clause(ci));
                        break;
                    }
                    _ => {
                        self.assign(first, Reason::Clause(ci));
                        i += 1;
                    }
                }
            }
            self.watches[p.index()].extend(ws);
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
            let occ = std::mem::take(&mut self.pb_occ[p.index()]);
            let mut pb_conflict = None;
            for &(pi, _) in &occ {
                let slack = self.pbs[pi].bound - self.pbs[pi].weight;
                if slack < -PB_EPS {
                    pb_conflict = Some(Reason::Pb(pi));
                    break;
                }
                let n = self.pbs[pi].lits.len();
                for k in 0..n {
                    let (l, c) = (self.pbs[pi].lits[k], self.pbs[pi].coefs[k]);
                    if c > slack + PB_EPS && self.lit_value(l).is_none() {
                        self.assign(!l, Reason::Pb(pi));
                    }
                }
            }
            self.pb_occ[p.index()] = occ;
            if pb_conflict.is_some() {
                self.qhead = self.trail.len();
                return pb_conflict;
            }
        }
        None
    }

    /// Literals of the reason for `implied` (or of a conflict if `implied`
    /// is None), all currently false except `implied` itself.
    fn reason_lits(&self, reason: Reason, implied: Option<Lit>) -> Vec<Lit> {
        match reason {
            Reason::Decision => Vec::new(),
            Reason::Clause(ci) => self.clauses[ci].clone(),
            Reason::Pb(pi) => {
                let pb = &self.pbs[pi];
                let limit = implied.map(|l| self.trail_pos[l.var() as usize]);
                let mut out: Vec<Lit> = Vec::new();
                if let Some(l) = implied {
                    out.push(l);
                }
                for &l in &pb.lits {
                    if self.lit_value(l) == Some(true) {
                        let pos = self.trail_pos[l.var() as usize];
                        if limit.map_or(true, |lim| pos < lim) {
                            out.push(!l);
                        }
                    }
                }
                out
            }
        }
    }

    fn bump(&mut self, v: u32) {
        self.activity[v as usize] += self.var_inc;
        if self.activity[v as usize] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.update(v, &self.activity);
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, conflict: Reason) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![Lit(0)];
        let mut counter = 0;
        let mut p: Option<Lit> = None;
        let mut reason = conflict;
        let mut index = self.trail.len();
        let cur = self.decision_level();
        loop {
            let lits = self.reason_lits(reason, p);
            for &q in lits.iter() {
                if Some(q) == p {
                    continue;
                }
                let v = q.var() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(q.var());
                    if self.level[v] >= cur {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var() as usize] {
                    break;
                }
            }
            let lit = self.trail[index];
            p = Some(lit);
            self.seen[lit.var() as usize] = false;
            counter -= 1;
            if counter == 0 {
                break;
            }
            reason = self.reason[lit.var() as usize];
        }
        learnt[0] = !p.unwrap();
        for l in &learnt[1..] {
            self.seen[l.var() as usize] = false;
        }
        let mut bt = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var() as usize] > self.level[learnt[max_i].var() as usize] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            bt = self.level[learnt[1].var() as usize];
        }
        self.var_inc *= 1.0 / 0.95;
        (learnt, bt)
    }

    /// Collects the assumptions responsible for `p` being false.
    fn analyze_final(&mut self, p: Lit, assumptions: &[Lit]) -> Vec<Lit> {
        let mut out = Vec::new();
        if self.decision_level() == 0 {
            return out;
        }
        self.seen[p.var() as usize] = true;
        let start = self.trail_lim[0];
        for i in (start..self.trail.len()).rev() {
            let x = self.trail[i];
            let v = x.var() as usize;
            if !self.seen[v] {
                continue;
            }
            match self.reason[v] {
                Reason::Decision => {
                    if self.level[v] > 0 && assumptions.contains(&x) {
                        out.push(x);
                    }
                }
                r => {
                    for q in self.reason_lits(r, Some(x)) {
                        if q != x && self.level[q.var() as usize] > 0 {
                            self.seen[q.var() as usize] = true;
                        }
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[p.var() as usize] = false;
        out.sort();
        out.dedup();
        out
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.value[v as usize].is_none() {
                return Some(Lit::new(v, !self.phase[v as usize]));
            }
        }
        None
    }

    pub fn solve(&mut self, assumptions: &[Lit]) -> SatResult {
        self.cancel_until(0);
        if !self.ok {
            return SatResult::Unsat(Vec::new());
        }
        if self.propagate().is_some() {
            self.ok = false;
            return SatResult::Unsat(Vec::new());
        }
        let mut restart_idx = 0u32;
        loop {
            let budget = 64 * luby(restart_idx);
            restart_idx += 1;
            match self.search(assumptions, budget) {
                Some(r) => {
                    if !matches!(r, SatResult::Sat) {
                        self.cancel_until(0);
                    }
                    return r;
                }
                None => self.cancel_until(0),
            }
        }
    }

    fn search(&mut self, assumptions: &[Lit], budget: u64) -> Option<SatResult> {
        let mut local = 0u64;
        loop {
            if let Some(conflict) = self.propagate() {
                self.conflicts += 1;
                local += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Some(SatResult::Unsat(Vec::new()));
                }
                let (learnt, bt) = self.analyze(conflict);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.assign(learnt[0], Reason::Decision);
                } else {
                    let asserting = learnt[0];
                    let ci = self.attach_clause(learnt);
                    self.assign(asserting, Reason::Clause(ci));
                }
                if self.conflicts % 128 == 0 {
                    if let Some(d) = self.deadline {
                        if Instant::now() >= d {
                            return Some(SatResult::Unknown);
                        }
                    }
                }
                continue;
            }
            if local >= budget {
                return None;
            }
            // Assumptions occupy the first decision levels.
            let mut next = None;
            while (self.decision_level() as usize) < assumptions.len() {
                let a = assumptions[self.decision_level() as usize];
                match self.lit_value(a) {
                    Some(true) => self.trail_lim.push(self.trail.len()),
                    Some(false) => {
                        let mut core = self.analyze_final(!a, assumptions);
                        core.push(a);
                        core.sort();
                        core.dedup();
                        return Some(SatResult::Unsat(core));
                    }
                    None => {
                        next = Some(a);
                        break;
                    }
                }
            }
            let decision = match next {
                Some(a) => a,
                None => match self.pick_branch() {
                    Some(l) => l,
                    None => return Some(SatResult::Sat),
                },
            };
            self.trail_lim.push(self.trail.len());
            self.assign(decision, Reason::Decision);
        }
    }
}

fn luby(mut i: u32) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i as u64 + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = 1u64 << seq;
    while size - 1 != i as u64 {
        size = (size - 1) >> 1;
        x >>= 1;
        i %= size as u32;
    }
    x
}

/// Max-heap of variables keyed by activity.
#[derive(Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn less(a: u32, b: u32, act: &[f64]) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.pos.len() <= v as usize {
            self.pos.resize(v as usize + 1, None);
        }
        if self.pos[v as usize].is_some() {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.pos[v as usize] = Some(i);
        self.sift_up(i, act);
    }

    fn update(&mut self, v: u32, act: &[f64]) {
        if let Some(Some(i)) = self.pos.get(v as usize) {
            self.sift_up(*i, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0];
        let last = self.heap.pop().unwrap();
        self.pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = Some(0);
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if Self::less(self.heap[i], self.heap[parent], act) {
                self.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut best = i;
            if l < self.heap.len() && Self::less(self.heap[l], self.heap[best], act) {
                best = l;
            }
            if r < self.heap.len() && Self::less(self.heap[r], self.heap[best], act) {
                best = r;
            }
            if best == i {
                break;
            }
            self.swap(i, best);
            i = best;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a] as usize] = Some(a);
        self.pos[self.heap[b] as usize] = Some(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(n: u32, clauses: &[Vec<Lit>], pbs: &[(Vec<(f64, Lit)>, f64)]) -> bool {
        (0..1u32 << n).any(|m| {
            let val = |l: Lit| ((m >> l.var()) & 1 == 1) != l.is_negated();
            clauses.iter().all(|c| c.iter().any(|&l| val(l)))
                && pbs.iter().all(|(t, b)| {
                    t.iter()
                        .filter(|(_, l)| val(*l))
                        .map(|(c, _)| c)
                        .sum::<f64>()
                        <= b + PB_EPS
                })
        })
    }

    #[test]
    fn luby_sequence() {
        let s: Vec<u64> = (0..7).map(luby).collect();
        assert_eq!(s, vec![1, 1, 2, 1, 1, 2, 4]);
    }

    #[test]
    fn contradiction_core() {
        let mut s = SatSolver::new();
        let x = s.new_var();
        let t1 = s.new_var();
        let t2 = s.new_var();
        s.add_clause(&[!t1, x]);
        s.add_clause(&[!t2, !x]);
        match s.solve(&[t1, t2]) {
            SatResult::Unsat(core) => {
                assert!(core.iter().all(|l| *l == t1 || *l == t2));
                assert!(!core.is_empty());
            }
            r => panic!("{r:?}"),
        }
        assert_eq!(s.solve(&[t1]), SatResult::Sat);
        assert!(s.model_value(x));
    }

    #[test]
    fn pb_propagation_and_bound() {
        let mut s = SatSolver::new();
        let v: Vec<Lit> = (0..4).map(|_| s.new_var()).collect();
        // at most 2 of 4, weights 1.5
        s.add_pb(&v.iter().map(|&l| (1.5, l)).collect::<Vec<_>>(), 3.0);
        s.add_clause(&[v[0]]);
        s.add_clause(&[v[1]]);
        assert_eq!(s.solve(&[]), SatResult::Sat);
        assert!(!s.model_value(v[2]) && !s.model_value(v[3]));
        assert!(matches!(s.solve(&[v[2]]), SatResult::Unsat(_)));
    }

    #[test]
    fn random_instances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..400 {
            let n = rng.gen_range(2..8u32);
            let mut s = SatSolver::new();
            for _ in 0..n {
                s.new_var();
            }
            let rl = |rng: &mut ChaCha8Rng| Lit::new(rng.gen_range(0..n), rng.gen_bool(0.5));
            let mut clauses = Vec::new();
            for _ in 0..rng.gen_range(0..12) {
                let c: Vec<Lit> = (0..rng.gen_range(1..4)).map(|_| rl(&mut rng)).collect();
                clauses.push(c);
            }
            let mut pbs = Vec::new();
            for _ in 0..rng.gen_range(0..3) {
                let t: Vec<(f64, Lit)> = (0..rng.gen_range(1..5))
                    .map(|_| (rng.gen_range(0..4) as f64 * 0.5, rl(&mut rng)))
                    .collect();
                pbs.push((t, rng.gen_range(0..6) as f64 * 0.5));
            }
            for c in &clauses {
                s.add_clause(c);
            }
            for (t, b) in &pbs {
                s.add_pb(t, *b);
            }
            let expect = brute(n, &clauses, &pbs);
            let got = s.solve(&[]);
            assert_eq!(matches!(got, SatResult::Sat), expect, "{clauses:?} {pbs:?}");
            if expect {
                let val = |l: Lit| s.model_value(l);
                assert!(clauses.iter().all(|c| c.iter().any(|&l| val(l))));
                for (t, b) in &pbs {
                    let w: f64 = t.iter().filter(|(_, l)| val(*l)).map(|(c, _)| c).sum();
                    assert!(w <= b + 1e-6);
                }
            }
        }
    }
}
