mod support;

use archforge_core::model::Hardness;
use archforge_core::synth::{check_design, synthesize, Design, SynthOptions, SynthOutcome};
use support::{brute_force, brute_force_with, instance, score, score_with, Envelope, Instance};

fn solve(inst: &Instance) -> Option<Design> {
    match synthesize(&inst.catalog, &inst.query, &SynthOptions::default()) {
        Ok(SynthOutcome::Design(d)) => Some(*d),
        Ok(SynthOutcome::Infeasible(_)) => None,
        Err(e) => panic!("seed {}: {e:?}\n{}\n{}", inst.seed, inst.catalog_json, inst.query_json),
    }
}

#[test]
fn synthesize_matches_exhaustive_optimum() {
    let env = Envelope::default();
    let (mut sat, mut unsat) = (0, 0);
    for seed in 0..150 {
        let inst = instance(seed, &env);
        let oracle = brute_force(&inst.catalog, &inst.query);
        match (oracle, solve(&inst)) {
            (Some(o), Some(d)) => {
                sat += 1;
                assert!(check_design(&inst.catalog, &inst.query, &d).is_empty(), "seed {seed}");
                let s = score(&inst.catalog, &inst.query, &d.assignment());
                assert_eq!(
                    s, o.score,
                    "seed {seed}: oracle witness {:?}\ncatalog {}\nquery {}",
                    o.witness, inst.catalog_json, inst.query_json
                );
            }
            (None, None) => unsat += 1,
            (o, d) => panic!("seed {seed}: feasibility disagrees: oracle {:?} vs {:?}", o.map(|o| o.witness), d),
        }
    }
    assert!(sat > 50 && unsat > 5, "{sat} feasible / {unsat} infeasible: generator drifted");
}

#[test]
fn selection_depends_on_rank_order_only() {
    let env = Envelope { roles: 1, exclusive_only: true, ..Envelope::default() };
    let relabels: [&dyn Fn(u32) -> u32; 3] = [&|r| 3 * r + 2, &|r| r * r, &|r| 1 << r];
    for seed in 0..80 {
        let inst = instance(seed, &env);
        let Some(d) = solve(&inst) else { continue };
        let a = d.assignment();
        for f in relabels {
            let best = brute_force_with(&inst.catalog, &inst.query, f).unwrap();
            assert_eq!(score_with(&inst.catalog, &inst.query, &a, f), best.score, "seed {seed}");
        }
    }
}

#[test]
fn pinning_the_chosen_hardware_keeps_the_design_feasible() {
    let env = Envelope::default();
    for seed in 0..80 {
        let inst = instance(seed, &env);
        let Some(d) = solve(&inst) else { continue };
        let before = score(&inst.catalog, &inst.query, &d.assignment());
        let mut pinned = inst.clone();
        // Even seeds pin one device, odd seeds all of them.
        let n = if seed % 2 == 0 { 1 } else { d.hardware.len() };
        for (dev, hw) in d.hardware.iter().take(n) {
            pinned.query.pins.insert(dev.clone(), hw.clone());
        }
        let p = solve(&pinned).unwrap_or_else(|| panic!("seed {seed}: pinning made the query infeasible"));
        assert!(check_design(&pinned.catalog, &pinned.query, &p).is_empty(), "seed {seed}");
        assert_eq!(score(&pinned.catalog, &pinned.query, &p.assignment()), before, "seed {seed}");
    }
}

#[test]
fn total_cost_is_the_sum_of_hardware_costs() {
    let env = Envelope::default();
    for seed in 0..80 {
        let inst = instance(seed, &env);
        let Some(d) = solve(&inst) else { continue };
        let sum: f64 = d
            .hardware
            .values()
            .map(|h| inst.catalog.hardware(h).unwrap().values["cost"].as_f64().unwrap())
            .sum();
        assert_eq!(d.total_cost, sum, "seed {seed}");
    }
}

#[test]
fn optional_constraints_never_decide_feasibility() {
    let env = Envelope::default();
    let mut seen = 0;
    for seed in 0..300 {
        let inst = instance(seed, &env);
        if !inst.query.constraints.iter().any(|c| c.hardness == Hardness::Optional) {
            continue;
        }
        seen += 1;
        let mut without = inst.clone();
        without.query.constraints.retain(|c| c.hardness == Hardness::Hard);
        assert_eq!(solve(&inst).is_some(), solve(&without).is_some(), "seed {seed}");
    }
    assert!(seen > 30);
}

#[test]
fn ledgers_never_exceed_capacity() {
    let env = Envelope::default();
    for seed in 0..150 {
        let inst = instance(seed, &env);
        let Some(d) = solve(&inst) else { continue };
        for (dev, resources) in &d.ledgers {
            for (r, l) in resources {
                assert!(l.consumed <= l.capacity + 1e-9, "seed {seed}: {r} on {dev}: {} > {}", l.consumed, l.capacity);
                let parts: f64 = l.consumers.iter().map(|c| c.amount).sum();
                assert!((parts - l.consumed).abs() < 1e-9, "seed {seed}: {dev}.{r} breakdown");
            }
        }
    }
}
