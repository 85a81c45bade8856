//! Solver session: typed formulas over boolean and finite-domain variables,
//! tracked (core-reportable) and soft assertions, lexicographic objectives
//! and canonicalising tiebreaks, all lowered onto [`sat::SatSolver`].

pub mod sat;

use std::fmt;
use std::time::Instant;

use sat::{Lit, SatResult, SatSolver};

/// Margin used to turn strict comparisons into non-strict ones.
pub const STRICT_EPS: f64 = 1e-7;
/// Minimum objective improvement the optimiser insists on per step.
const IMPROVE_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoolVar(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiniteVar(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrackId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b - STRICT_EPS / 2.0,
            CmpOp::Le => a <= b + sat::PB_EPS,
            CmpOp::Eq => (a - b).abs() <= sat::PB_EPS,
            CmpOp::Ge => a >= b - sat::PB_EPS,
            CmpOp::Gt => a > b + STRICT_EPS / 2.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn negate(self) -> Option<CmpOp> {
        Some(match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Eq => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Const(bool),
    Var(BoolVar),
    /// The finite variable takes the domain value at this index.
    Is(FiniteVar, usize),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Cmp(Linear, CmpOp, Linear),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Value(FiniteVar),
    Indicator(Formula),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Linear {
    pub terms: Vec<(f64, Term)>,
    pub constant: f64,
}

impl Linear {
    pub fn constant(c: f64) -> Self {
        Linear {
            terms: Vec::new(),
            constant: c,
        }
    }
    pub fn value(v: FiniteVar) -> Self {
        Linear {
            terms: vec![(1.0, Term::Value(v))],
            constant: 0.0,
        }
    }
    pub fn indicator(f: Formula, coef: f64) -> Self {
        Linear {
            terms: vec![(coef, Term::Indicator(f))],
            constant: 0.0,
        }
    }
    pub fn add(mut self, other: Linear) -> Self {
        self.terms.extend(other.terms);
        self.constant += other.constant;
        self
    }
    pub fn scale(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.0 *= k;
        }
        self.constant *= k;
        self
    }
    pub fn sub(self, other: Linear) -> Self {
        self.add(other.scale(-1.0))
    }
    pub fn as_constant(&self) -> Option<f64> {
        self.terms.is_empty().then_some(self.constant)
    }
}

impl Formula {
    pub fn var(v: BoolVar) -> Self {
        Formula::Var(v)
    }
    pub fn not(f: Formula) -> Self {
        match f {
            Formula::Const(b) => Formula::Const(!b),
            Formula::Not(inner) => *inner,
            f => Formula::Not(Box::new(f)),
        }
    }
    pub fn and(fs: Vec<Formula>) -> Self {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::Const(true) => {}
                Formula::Const(false) => return Formula::Const(false),
                Formula::And(inner) => out.extend(inner),
                f => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::Const(true),
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }
    pub fn or(fs: Vec<Formula>) -> Self {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::Const(false) => {}
                Formula::Const(true) => return Formula::Const(true),
                Formula::Or(inner) => out.extend(inner),
                f => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::Const(false),
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }
    pub fn implies(a: Formula, b: Formula) -> Self {
        match (&a, &b) {
            (Formula::Const(false), _) | (_, Formula::Const(true)) => Formula::Const(true),
            (Formula::Const(true), _) => b,
            _ => Formula::Implies(Box::new(a), Box::new(b)),
        }
    }
    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }
    pub fn cmp(a: Linear, op: CmpOp, b: Linear) -> Self {
        if let (Some(x), Some(y)) = (a.as_constant(), b.as_constant()) {
            return Formula::Const(op.holds(x, y));
        }
        Formula::Cmp(a, op, b)
    }

    /// Evaluates under an assignment.
    pub fn eval(&self, m: &dyn Assignment) -> bool {
        match self {
            Formula::Const(b) => *b,
            Formula::Var(v) => m.bool_value(*v),
            Formula::Is(v, i) => m.finite_index(*v) == *i,
            Formula::Not(f) => !f.eval(m),
            Formula::And(fs) => fs.iter().all(|f| f.eval(m)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(m)),
            Formula::Implies(a, b) => !a.eval(m) || b.eval(m),
            Formula::Iff(a, b) => a.eval(m) == b.eval(m),
            Formula::Cmp(a, op, b) => op.holds(a.eval(m), b.eval(m)),
        }
    }

    pub fn visit_vars(&self, f: &mut dyn FnMut(VarRef)) {
        match self {
            Formula::Const(_) => {}
            Formula::Var(v) => f(VarRef::Bool(*v)),
            Formula::Is(v, _) => f(VarRef::Finite(*v)),
            Formula::Not(a) => a.visit_vars(f),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|x| x.visit_vars(f)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Formula::Cmp(a, _, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }
}

impl Linear {
    pub fn eval(&self, m: &dyn Assignment) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(c, t)| {
                    c * match t {
                        Term::Value(v) => m.finite_value(*v),
                        Term::Indicator(f) => f.eval(m) as u8 as f64,
                    }
                })
                .sum::<f64>()
    }

    pub fn visit_vars(&self, f: &mut dyn FnMut(VarRef)) {
        for (_, t) in &self.terms {
            match t {
                Term::Value(v) => f(VarRef::Finite(*v)),
                Term::Indicator(g) => g.visit_vars(f),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Bool(BoolVar),
    Finite(FiniteVar),
}

pub trait Assignment {
    fn bool_value(&self, v: BoolVar) -> bool;
    fn finite_index(&self, v: FiniteVar) -> usize;
    fn finite_value(&self, v: FiniteVar) -> f64;
}

#[derive(Clone, Debug)]
pub struct Model {
    bools: Vec<bool>,
    finite_idx: Vec<usize>,
    finite_vals: Vec<f64>,
    /// Achieved value of each objective, implicit soft objective first when
    /// soft assertions exist.
    pub objective_values: Vec<f64>,
}

impl Model {
    pub fn bool(&self, v: BoolVar) -> bool {
        self.bools[v.0 as usize]
    }
    pub fn index(&self, v: FiniteVar) -> usize {
        self.finite_idx[v.0 as usize]
    }
    pub fn value(&self, v: FiniteVar) -> f64 {
        self.finite_vals[v.0 as usize]
    }
}

impl Assignment for Model {
    fn bool_value(&self, v: BoolVar) -> bool {
        self.bool(v)
    }
    fn finite_index(&self, v: FiniteVar) -> usize {
        self.index(v)
    }
    fn finite_value(&self, v: FiniteVar) -> f64 {
        self.value(v)
    }
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Sat(Model),
    /// Tracked assertions that cannot hold together with the untracked ones.
    Unsat(Vec<TrackId>),
    Unknown,
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }
    pub fn is_unsat(&self) -> bool {
        matches!(self, Outcome::Unsat(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug)]
pub struct Objective {
    pub name: String,
    pub sense: Sense,
    pub expr: Linear,
}

struct Finite {
    name: String,
    domain: Vec<f64>,
    lits: Vec<Lit>,
}

/// One assertion as given by the caller.
#[derive(Clone, Debug)]
pub struct Assertion {
    pub formula: Formula,
    pub track: Option<TrackId>,
    pub soft: bool,
}

pub struct SolverSession {
    sat: SatSolver,
    bool_lits: Vec<Lit>,
    bool_names: Vec<String>,
    finites: Vec<Finite>,
    selectors: Vec<Lit>,
    assertions: Vec<Assertion>,
    soft_lits: Vec<BoolVar>,
    objectives: Vec<Objective>,
    tiebreaks: Vec<Vec<Formula>>,
    true_lit: Lit,
    deadline: Option<Instant>,
}

impl Default for SolverSession {
    fn default() -> Self {
        Self::new()
    }
}

impl SolverSession {
    pub fn new() -> Self {
        let mut sat = SatSolver::new();
        let t = sat.new_var();
        sat.add_clause(&[t]);
        SolverSession {
            sat,
            bool_lits: Vec::new(),
            bool_names: Vec::new(),
            finites: Vec::new(),
            selectors: Vec::new(),
            assertions: Vec::new(),
            soft_lits: Vec::new(),
            objectives: Vec::new(),
            tiebreaks: Vec::new(),
            true_lit: t,
            deadline: None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.sat.seed_activities(seed);
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
        self.sat.set_deadline(deadline);
    }

    pub fn new_bool(&mut self, name: impl Into<String>) -> BoolVar {
        let l = self.sat.new_var();
        let v = BoolVar(self.bool_lits.len() as u32);
        self.bool_lits.push(l);
        self.bool_names.push(name.into());
        v
    }

    /// A variable ranging over `domain`; exactly one value is selected.
    pub fn new_finite(&mut self, name: impl Into<String>, domain: Vec<f64>) -> FiniteVar {
        assert!(!domain.is_empty(), "finite domain must not be empty");
        let lits: Vec<Lit> = domain.iter().map(|_| self.sat.new_var()).collect();
        self.sat.add_clause(&lits);
        self.sat
            .add_pb(&lits.iter().map(|&l| (1.0, l)).collect::<Vec<_>>(), 1.0);
        let v = FiniteVar(self.finites.len() as u32);
        self.finites.push(Finite {
            name: name.into(),
            domain,
            lits,
        });
        v
    }

    pub fn bool_name(&self, v: BoolVar) -> &str {
        &self.bool_names[v.0 as usize]
    }
    pub fn finite_name(&self, v: FiniteVar) -> &str {
        &self.finites[v.0 as usize].name
    }
    pub fn domain(&self, v: FiniteVar) -> &[f64] {
        &self.finites[v.0 as usize].domain
    }
    pub fn num_bools(&self) -> usize {
        self.bool_lits.len()
    }
    pub fn num_finites(&self) -> usize {
        self.finites.len()
    }
    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }
    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    /// Always-on constraint; never appears in cores.
    pub fn assert(&mut self, f: Formula) {
        let l = self.lower(&f);
        self.sat.add_clause(&[l]);
        self.assertions.push(Assertion {
            formula: f,
            track: None,
            soft: false,
        });
    }

    /// Constraint guarded by a selector so it can be reported in cores or
    /// left out via [`solve_subset`](Self::solve_subset).
    pub fn assert_tracked(&mut self, f: Formula) -> TrackId {
        let l = self.lower(&f);
        let s = self.sat.new_var();
        self.sat.add_clause(&[!s, l]);
        let id = TrackId(self.selectors.len() as u32);
        self.selectors.push(s);
        self.assertions.push(Assertion {
            formula: f,
            track: Some(id),
            soft: false,
        });
        id
    }

    /// Preference: the number of satisfied soft assertions is maximised
    /// before any explicit objective.
    pub fn assert_soft(&mut self, f: Formula) {
        let l = self.lower(&f);
        let alias = self.lit_alias(l);
        self.soft_lits.push(alias);
        self.assertions.push(Assertion {
            formula: f,
            track: None,
            soft: true,
        });
    }

    pub fn add_objective(&mut self, name: impl Into<String>, sense: Sense, expr: Linear) {
        self.objectives.push(Objective {
            name: name.into(),
            sense,
            expr,
        });
    }

    /// After optimisation the first satisfiable candidate of each group (in
    /// order) is fixed, making the returned model canonical.
    pub fn add_tiebreak(&mut self, candidates: Vec<Formula>) {
        self.tiebreaks.push(candidates);
    }

    pub fn tracked_formula(&self, t: TrackId) -> &Formula {
        self.assertions
            .iter()
            .find(|a| a.track == Some(t))
            .map(|a| &a.formula)
            .expect("unknown track id")
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn core_tracks(&self, core: &[Lit]) -> Vec<TrackId> {
        let mut out: Vec<TrackId> = self
            .selectors
            .iter()
            .enumerate()
            .filter(|(_, s)| core.contains(s))
            .map(|(i, _)| TrackId(i as u32))
            .collect();
        out.sort();
        out
    }

    fn extract_model(&self) -> Model {
        let bools = self
            .bool_lits
            .iter()
            .map(|&l| self.sat.model_value(l))
            .collect();
        let mut finite_idx = Vec::new();
        let mut finite_vals = Vec::new();
        for f in &self.finites {
            let i = f
                .lits
                .iter()
                .position(|&l| self.sat.model_value(l))
                .unwrap_or(0);
            finite_idx.push(i);
            finite_vals.push(f.domain[i]);
        }
        Model {
            bools,
            finite_idx,
            finite_vals,
            objective_values: Vec::new(),
        }
    }

    /// Satisfiability with all tracked assertions, ignoring objectives.
    pub fn check(&mut self) -> Outcome {
        let assumptions = self.selectors.clone();
        self.run(&assumptions)
    }

    /// Satisfiability using only the listed tracked assertions (plus all
    /// untracked ones); objectives and tiebreaks are not applied.
    pub fn solve_subset(&mut self, restrict: &[TrackId]) -> Outcome {
        let assumptions: Vec<Lit> = restrict
            .iter()
            .map(|t| self.selectors[t.0 as usize])
            .collect();
        self.run(&assumptions)
    }

    fn run(&mut self, assumptions: &[Lit]) -> Outcome {
        match self.sat.solve(assumptions) {
            SatResult::Sat => Outcome::Sat(self.extract_model()),
            SatResult::Unsat(core) => Outcome::Unsat(self.core_tracks(&core)),
            SatResult::Unknown => Outcome::Unknown,
        }
    }

    /// Full solve: feasibility, then soft count, then each objective
    /// lexicographically, then tiebreaks.
    pub fn solve(&mut self) -> Outcome {
        let mut assumptions = self.selectors.clone();
        let first = self.run(&assumptions);
        let Outcome::Sat(mut model) = first else {
            return first;
        };
        let mut objectives = Vec::new();
        if !self.soft_lits.is_empty() {
            let expr = Linear {
                terms: self
                    .soft_lits
                    .iter()
                    .map(|&v| (1.0, Term::Indicator(Formula::Var(v))))
                    .collect(),
                constant: 0.0,
            };
            objectives.push(Objective {
                name: "soft".into(),
                sense: Sense::Maximize,
                expr,
            });
        }
        objectives.extend(self.objectives.iter().cloned());
        let mut values = Vec::new();
        for obj in &objectives {
            // Orient as maximisation.
            let expr = match obj.sense {
                Sense::Maximize => obj.expr.clone(),
                Sense::Minimize => obj.expr.clone().scale(-1.0),
            };
            let mut best = expr.eval(&model);
            let Some((ub, deficits)) = self.term_bounds(&expr, &assumptions, &mut model, &mut best)
            else {
                return Outcome::Unknown;
            };
            // expr = ub - sum(deficits) under the assumptions, so search for
            // the smallest deficit budget, counted in grid steps.
            let q = quantum(&deficits);
            let steps = |v: f64| ((ub - v) / q).round().max(0.0) as u64;
            let mut lo = 0u64;
            let mut hi = steps(best);
            let mut first = true;
            while lo < hi {
                if self.timed_out() {
                    return Outcome::Unknown;
                }
                let mid = if first { lo } else { lo + (hi - lo) / 2 };
                first = false;
                let act = self.sat.new_var();
                self.guarded_le(act, &deficits, mid as f64 * q + q / 2.0);
                assumptions.push(act);
                self.favour(&expr);
                let r = self.sat.solve(&assumptions);
                assumptions.pop();
                match r {
                    SatResult::Sat => {
                        model = self.extract_model();
                        best = expr.eval(&model);
                        hi = steps(best).min(mid);
                    }
                    SatResult::Unsat(_) => lo = mid + 1,
                    SatResult::Unknown => return Outcome::Unknown,
                }
                // Retire the activation literal (this resets the trail).
                self.sat.add_clause(&[!act]);
            }
            let fix = self.sat.new_var();
            self.guarded_le(fix, &deficits, hi as f64 * q + q / 2.0);
            assumptions.push(fix);
            values.push(match obj.sense {
                Sense::Maximize => best,
                Sense::Minimize => -best,
            });
        }
        let groups = self.tiebreaks.clone();
        for group in &groups {
            for cand in group {
                if self.timed_out() {
                    return Outcome::Unknown;
                }
                let l = self.lower(cand);
                assumptions.push(l);
                match self.sat.solve(&assumptions) {
                    SatResult::Sat => {
                        model = self.extract_model();
                        break;
                    }
                    SatResult::Unsat(_) => {
                        assumptions.pop();
                    }
                    SatResult::Unknown => return Outcome::Unknown,
                }
            }
        }
        // Re-solve so the model reflects every fixed choice.
        match self.sat.solve(&assumptions) {
            SatResult::Sat => model = self.extract_model(),
            SatResult::Unknown => return Outcome::Unknown,
            SatResult::Unsat(_) => {}
        }
        model.objective_values = values;
        Outcome::Sat(model)
    }

    /// Exposes an internal literal as a hidden boolean variable.
    fn lit_alias(&mut self, l: Lit) -> BoolVar {
        let v = BoolVar(self.bool_lits.len() as u32);
        self.bool_lits.push(l);
        self.bool_names.push(String::new());
        v
    }

    fn fresh(&mut self) -> Lit {
        self.sat.new_var()
    }

    /// Tseitin lowering: returns a literal equivalent to `f`.
    fn lower(&mut self, f: &Formula) -> Lit {
        match f {
            Formula::Const(true) => self.true_lit,
            Formula::Const(false) => !self.true_lit,
            Formula::Var(v) => self.bool_lits[v.0 as usize],
            Formula::Is(v, i) => self.finites[v.0 as usize].lits[*i],
            Formula::Not(g) => !self.lower(g),
            Formula::And(fs) => {
                let ls: Vec<Lit> = fs.iter().map(|g| self.lower(g)).collect();
                self.and_lits(&ls)
            }
            Formula::Or(fs) => {
                let ls: Vec<Lit> = fs.iter().map(|g| !self.lower(g)).collect();
                !self.and_lits(&ls)
            }
            Formula::Implies(a, b) => {
                let la = self.lower(a);
                let lb = self.lower(b);
                !self.and_lits(&[la, !lb])
            }
            Formula::Iff(a, b) => {
                let la = self.lower(a);
                let lb = self.lower(b);
                let p = self.fresh();
                self.sat.add_clause(&[!p, !la, lb]);
                self.sat.add_clause(&[!p, la, !lb]);
                self.sat.add_clause(&[p, la, lb]);
                self.sat.add_clause(&[p, !la, !lb]);
                p
            }
            Formula::Cmp(a, op, b) => self.lower_cmp(a, *op, b),
        }
    }

    fn and_lits(&mut self, ls: &[Lit]) -> Lit {
        if ls.is_empty() {
            return self.true_lit;
        }
        if ls.len() == 1 {
            return ls[0];
        }
        let p = self.fresh();
        let mut big = vec![p];
        for &l in ls {
            self.sat.add_clause(&[!p, l]);
            big.push(!l);
        }
        self.sat.add_clause(&big);
        p
    }

    /// Optimistic per-term bound for `expr` under `assumptions`. Each term
    /// is probed for the best value it can reach on its own; unreachable
    /// values are excluded by learnt clauses. Returns the bound and the
    /// deficit terms, so that `expr = ub - sum(deficits)` whenever the
    /// assumptions hold. `None` on timeout.
    fn term_bounds(
        &mut self,
        expr: &Linear,
        assumptions: &[Lit],
        model: &mut Model,
        best: &mut f64,
    ) -> Option<(f64, Vec<(f64, Lit)>)> {
        let mut ub = expr.constant;
        let mut deficits = Vec::new();
        for (c, t) in &expr.terms {
            // Mutually exclusive options covering every assignment; the flag
            // marks the one the incumbent takes.
            let mut options: Vec<(f64, Lit, bool)> = match t {
                Term::Value(v) => {
                    let at = model.index(*v);
                    let f = &self.finites[v.0 as usize];
                    f.domain
                        .iter()
                        .zip(&f.lits)
                        .enumerate()
                        .map(|(i, (val, &l))| (c * val, l, i == at))
                        .collect()
                }
                Term::Indicator(g) => {
                    let holds = g.eval(&*model);
                    let l = self.lower(g);
                    vec![(*c, l, holds), (0.0, !l, !holds)]
                }
            };
            options.sort_by(|a, b| b.0.total_cmp(&a.0));
            let current = options
                .iter()
                .position(|o| o.2)
                .unwrap_or(options.len() - 1);
            let mut reach = current;
            for i in 0..current {
                let (gain, lit, _) = options[i];
                if gain <= options[current].0 {
                    break;
                }
                if self.timed_out() {
                    return None;
                }
                let mut probe = assumptions.to_vec();
                probe.push(lit);
                match self.sat.solve(&probe) {
                    SatResult::Sat => {
                        let m = self.extract_model();
                        let v = expr.eval(&m);
                        if v > *best {
                            *best = v;
                            *model = m;
                        }
                        reach = i;
                        break;
                    }
                    SatResult::Unsat(core) => {
                        let mut clause: Vec<Lit> =
                            core.iter().filter(|&&x| x != lit).map(|&x| !x).collect();
                        clause.push(!lit);
                        self.sat.add_clause(&clause);
                    }
                    SatResult::Unknown => return None,
                }
            }
            let top = options[reach].0;
            ub += top;
            for &(gain, lit, _) in &options[reach..] {
                if gain < top {
                    deficits.push((top - gain, lit));
                }
            }
        }
        Some((ub, deficits))
    }

    /// `act -> sum(terms) <= bound`, with non-negative coefficients.
    fn guarded_le(&mut self, act: Lit, terms: &[(f64, Lit)], bound: f64) {
        let total: f64 = terms.iter().map(|t| t.0).sum();
        if total <= bound + sat::PB_EPS {
            return;
        }
        if bound < 0.0 {
            self.sat.add_clause(&[!act]);
            return;
        }
        let m = total - bound;
        let mut t = terms.to_vec();
        t.push((m, act));
        self.sat.add_pb(&t, bound + m);
    }

    /// Points saved phases at the values that maximise `e`, so the search
    /// tries improving assignments first.
    fn favour(&mut self, e: &Linear) {
        for (c, t) in &e.terms {
            match t {
                Term::Value(v) => {
                    let f = &self.finites[v.0 as usize];
                    let best = (0..f.domain.len())
                        .max_by(|&i, &j| (c * f.domain[i]).total_cmp(&(c * f.domain[j])))
                        .unwrap_or(0);
                    let lits = f.lits.clone();
                    for (i, l) in lits.into_iter().enumerate() {
                        self.sat.set_phase(if i == best { l } else { !l });
                    }
                }
                Term::Indicator(g) => {
                    let l = self.lower(g);
                    self.sat.set_phase(if *c > 0.0 { l } else { !l });
                }
            }
        }
    }

    /// Flattens a linear expression to `sum(coef * lit) + constant`.
    fn flatten(&mut self, e: &Linear, scale: f64, out: &mut Vec<(f64, Lit)>, constant: &mut f64) {
        *constant += scale * e.constant;
        for (c, t) in &e.terms {
            let k = scale * c;
            if k == 0.0 {
                continue;
            }
            match t {
                Term::Value(v) => {
                    let f = &self.finites[v.0 as usize];
                    for (val, &l) in f.domain.iter().zip(&f.lits) {
                        if *val != 0.0 {
                            out.push((k * val, l));
                        }
                    }
                }
                Term::Indicator(g) => {
                    let l = self.lower(g);
                    out.push((k, l));
                }
            }
        }
    }

    fn lower_cmp(&mut self, a: &Linear, op: CmpOp, b: &Linear) -> Lit {
        // a - b  op  0
        let mut terms = Vec::new();
        let mut c = 0.0;
        self.flatten(a, 1.0, &mut terms, &mut c);
        self.flatten(b, -1.0, &mut terms, &mut c);
        match op {
            CmpOp::Le => self.reify_le(&terms, -c),
            CmpOp::Lt => self.reify_le(&terms, -c - STRICT_EPS),
            CmpOp::Ge => {
                let neg: Vec<(f64, Lit)> = terms.iter().map(|&(k, l)| (-k, l)).collect();
                self.reify_le(&neg, c)
            }
            CmpOp::Gt => {
                let neg: Vec<(f64, Lit)> = terms.iter().map(|&(k, l)| (-k, l)).collect();
                self.reify_le(&neg, c - STRICT_EPS)
            }
            CmpOp::Eq => {
                let le = self.reify_le(&terms, -c);
                let neg: Vec<(f64, Lit)> = terms.iter().map(|&(k, l)| (-k, l)).collect();
                let ge = self.reify_le(&neg, c);
                self.and_lits(&[le, ge])
            }
        }
    }

    /// Literal `p` with `p <=> sum(terms) <= bound`.
    fn reify_le(&mut self, terms: &[(f64, Lit)], bound: f64) -> Lit {
        // Normalise to non-negative coefficients: k*l = k + |k|*!l for k < 0.
        let mut norm: Vec<(f64, Lit)> = Vec::new();
        let mut k_bound = bound;
        for &(k, l) in terms {
            if k > 0.0 {
                norm.push((k, l));
            } else if k < 0.0 {
                k_bound -= k;
                norm.push((-k, !l));
            }
        }
        let total: f64 = norm.iter().map(|t| t.0).sum();
        if total <= k_bound + sat::PB_EPS {
            return self.true_lit;
        }
        if k_bound < -sat::PB_EPS {
            return !self.true_lit;
        }
        let p = self.fresh();
        // p -> sum <= K      :  sum + M*p <= K + M,  M = total - K
        let m = total - k_bound;
        let mut t1 = norm.clone();
        t1.push((m, p));
        self.sat.add_pb(&t1, k_bound + m);
        // !p -> sum >= K + eps  :  sum(w * !l) + M' * !p <= total - K - eps + M'
        let m2 = k_bound + STRICT_EPS;
        let mut t2: Vec<(f64, Lit)> = norm.iter().map(|&(w, l)| (w, !l)).collect();
        t2.push((m2, !p));
        self.sat.add_pb(&t2, total - k_bound - STRICT_EPS + m2);
        p
    }
}

/// Grid on which deficit sums move: the gcd of the coefficients when they
/// are all integral, otherwise the improvement tolerance.
fn quantum(terms: &[(f64, Lit)]) -> f64 {
    let mut g = 0u64;
    for &(c, _) in terms {
        let r = c.round();
        if (c - r).abs() > 1e-9 || r > 1e15 {
            return IMPROVE_EPS;
        }
        g = gcd(g, r as u64);
    }
    if g == 0 {
        1.0
    } else {
        g as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}
