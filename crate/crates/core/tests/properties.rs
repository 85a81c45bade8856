mod support;

use std::collections::BTreeMap;

use archforge_core::dsl::{evaluate, free_references, Binding, ConstraintExpr, EvalValue, Node};
use archforge_core::explain::decompose;
use archforge_core::io::{parse, to_canonical, Source};
use archforge_core::model::{Catalog, Query};
use archforge_core::smt::{BoolVar, CmpOp, Formula, Linear, Term};
use proptest::prelude::*;

/// Boolean expression over up to four property tags, mirrored so the test
/// can evaluate it without the library.
#[derive(Clone, Debug)]
enum B {
    Lit(bool),
    Tag(usize),
    Not(Box<B>),
    And(Vec<B>),
    Or(Vec<B>),
    Implies(Box<B>, Box<B>),
    /// scalar("s{i}") > threshold
    Above(usize, f64),
}

fn b_strategy() -> impl Strategy<Value = B> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(B::Lit),
        (0..4usize).prop_map(B::Tag),
        (0..2usize, 0.0..4.0f64).prop_map(|(i, t)| B::Above(i, t)),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|b| B::Not(Box::new(b))),
            prop::collection::vec(inner.clone(), 0..4).prop_map(B::And),
            prop::collection::vec(inner.clone(), 0..4).prop_map(B::Or),
            (inner.clone(), inner).prop_map(|(a, b)| B::Implies(Box::new(a), Box::new(b))),
        ]
    })
}

fn lower(b: &B) -> ConstraintExpr {
    match b {
        B::Lit(x) => ConstraintExpr::truth(*x),
        B::Tag(i) => ConstraintExpr::prop(&format!("t{i}")),
        B::Not(a) => ConstraintExpr::not(lower(a)),
        B::And(xs) => ConstraintExpr::and(xs.iter().map(lower).collect()),
        B::Or(xs) => ConstraintExpr::or(xs.iter().map(lower).collect()),
        B::Implies(a, c) => ConstraintExpr::implies(lower(a), lower(c)),
        B::Above(i, t) => ConstraintExpr::cmp(CmpOp::Gt, ConstraintExpr::scalar(&format!("s{i}")), ConstraintExpr::num(*t)),
    }
}

fn truth(b: &B, tags: u32, scalars: &[f64; 2]) -> bool {
    match b {
        B::Lit(x) => *x,
        B::Tag(i) => tags >> i & 1 == 1,
        B::Not(a) => !truth(a, tags, scalars),
        B::And(xs) => xs.iter().all(|x| truth(x, tags, scalars)),
        B::Or(xs) => xs.iter().any(|x| truth(x, tags, scalars)),
        B::Implies(a, c) => !truth(a, tags, scalars) || truth(c, tags, scalars),
        B::Above(i, t) => scalars[*i] > *t,
    }
}

struct Env {
    tags: BTreeMap<String, bool>,
    scalars: BTreeMap<String, f64>,
}

impl Env {
    fn new(bits: u32, scalars: &[f64; 2]) -> Env {
        Env {
            tags: (0..8).map(|i| (format!("t{i}"), bits >> i & 1 == 1)).collect(),
            scalars: scalars.iter().enumerate().map(|(i, x)| (format!("s{i}"), *x)).collect(),
        }
    }
}

impl Binding for Env {
    fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).copied()
    }
    fn has_property(&self, tag: &str) -> Option<bool> {
        self.tags.get(tag).copied()
    }
    fn colocated_has_property(&self, _: &str) -> Option<bool> {
        None
    }
    fn attr(&self, _: &str, _: &str) -> Option<EvalValue> {
        None
    }
    fn deployed(&self, _: &str, _: Option<&str>) -> Option<bool> {
        None
    }
    fn role_enabled(&self, _: &str) -> Option<bool> {
        None
    }
    fn devices_of_type(&self, _: &str) -> Option<Vec<String>> {
        None
    }
}

fn eval(e: &ConstraintExpr, bits: u32, scalars: &[f64; 2]) -> bool {
    evaluate(e, &Env::new(bits, scalars)).unwrap().0
}

/// The classic rewrites, applied everywhere they match.
fn rewrite(e: &ConstraintExpr) -> ConstraintExpr {
    let r = |x: &ConstraintExpr| rewrite(x);
    match &e.node {
        Node::Not(a) => match &a.node {
            Node::Not(inner) => r(inner),
            Node::And(xs) => ConstraintExpr::or(xs.iter().map(|x| ConstraintExpr::not(r(x))).collect()),
            Node::Or(xs) => ConstraintExpr::and(xs.iter().map(|x| ConstraintExpr::not(r(x))).collect()),
            _ => ConstraintExpr::not(r(a)),
        },
        Node::Implies(a, b) => ConstraintExpr::or(vec![ConstraintExpr::not(r(a)), r(b)]),
        Node::And(xs) => ConstraintExpr::and(xs.iter().map(r).collect()),
        Node::Or(xs) => ConstraintExpr::or(xs.iter().map(r).collect()),
        _ => e.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn evaluate_agrees_with_truth_tables(b in b_strategy(), s0 in 0.0..4.0f64, s1 in 0.0..4.0f64) {
        let e = lower(&b);
        for bits in 0..16 {
            prop_assert_eq!(eval(&e, bits, &[s0, s1]), truth(&b, bits, &[s0, s1]));
        }
    }

    #[test]
    fn boolean_rewrites_preserve_meaning(b in b_strategy(), bits in 0..16u32, s0 in 0.0..4.0f64, s1 in 0.0..4.0f64) {
        let e = lower(&b);
        prop_assert_eq!(eval(&rewrite(&e), bits, &[s0, s1]), eval(&e, bits, &[s0, s1]));
        prop_assert_eq!(
            eval(&ConstraintExpr::not(ConstraintExpr::not(e.clone())), bits, &[s0, s1]),
            eval(&e, bits, &[s0, s1])
        );
        prop_assert_eq!(
            eval(&rewrite(&ConstraintExpr::not(e.clone())), bits, &[s0, s1]),
            !eval(&e, bits, &[s0, s1])
        );
    }

    #[test]
    fn only_free_references_matter(b in b_strategy(), bits in 0..256u32, flip in 0..8usize, s0 in 0.0..4.0f64, s1 in 0.0..4.0f64, s in 0.0..4.0f64) {
        let e = lower(&b);
        let refs = free_references(&e);
        let base = eval(&e, bits, &[s0, s1]);
        if !refs.properties.contains(&format!("t{flip}")) {
            prop_assert_eq!(eval(&e, bits ^ (1 << flip), &[s0, s1]), base);
        }
        if !refs.scalars.contains("s0") {
            prop_assert_eq!(eval(&e, bits, &[s, s1]), base);
        }
    }
}

/// Propositional formula over four solver variables, or a comparison of
/// their indicators.
fn f_strategy() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(Formula::Const),
        (0..4u32).prop_map(|i| Formula::Var(BoolVar(i))),
        (prop::collection::vec((0..4u32, 1..3i32), 1..3), 0..4usize, 0..4i32).prop_map(|(ts, op, k)| {
            let lhs = Linear {
                terms: ts.into_iter().map(|(v, c)| (c as f64, Term::Indicator(Formula::Var(BoolVar(v))))).collect(),
                constant: 0.0,
            };
            let op = [CmpOp::Lt, CmpOp::Le, CmpOp::Ge, CmpOp::Gt][op];
            Formula::Cmp(lhs, op, Linear::constant(k as f64))
        }),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Formula::Or),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::Implies(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::Iff(Box::new(a), Box::new(b))),
        ]
    })
}

fn value(f: &Formula, bits: u32) -> bool {
    let lin = |l: &Linear| -> f64 {
        l.constant
            + l.terms
                .iter()
                .map(|(c, t)| match t {
                    Term::Indicator(g) => c * value(g, bits) as u8 as f64,
                    Term::Value(_) => unreachable!("no finite variables here"),
                })
                .sum::<f64>()
    };
    match f {
        Formula::Const(x) => *x,
        Formula::Var(v) => bits >> v.0 & 1 == 1,
        Formula::Not(a) => !value(a, bits),
        Formula::And(xs) => xs.iter().all(|x| value(x, bits)),
        Formula::Or(xs) => xs.iter().any(|x| value(x, bits)),
        Formula::Implies(a, b) => !value(a, bits) || value(b, bits),
        Formula::Iff(a, b) => value(a, bits) == value(b, bits),
        Formula::Cmp(a, op, b) => op.holds(lin(a), lin(b)),
        Formula::Is(..) => unreachable!("no finite variables here"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn decomposed_atoms_reconjoin_to_the_original(f in f_strategy(), depth in prop::option::of(0..4usize)) {
        let atoms = decompose(&f, depth);
        for bits in 0..16 {
            prop_assert_eq!(atoms.iter().all(|a| value(a, bits)), value(&f, bits), "{:?} -> {:?}", f, atoms);
        }
    }

    #[test]
    fn generated_documents_round_trip(seed in 0..10_000u64) {
        let inst = support::instance(seed, &support::Envelope::default());
        let c = to_canonical(&inst.catalog);
        let back: Catalog = parse(&Source::new("c.json", c.clone())).unwrap();
        prop_assert_eq!(&back, &inst.catalog);
        prop_assert_eq!(to_canonical(&back), c);
        let q = to_canonical(&inst.query);
        let back: Query = parse(&Source::new("q.json", q.clone())).unwrap();
        prop_assert_eq!(&back, &inst.query);
        prop_assert_eq!(to_canonical(&back), q);
    }
}
