use archforge_core::bundled;
use archforge_core::io::{
    load_catalog_sources, load_query_source, locate, parse, to_canonical, LoadError, Source,
};
use archforge_core::model::{Catalog, Query};
use archforge_core::synth::{synthesize, Design, SynthOptions, SynthOutcome};

fn dc_source() -> Source {
    Source::new("catalog_dc.json", bundled::catalog_source("dc").unwrap())
}

#[test]
fn bundled_ml_training_loads_with_expected_roles() {
    let catalog = load_catalog_sources(&[dc_source()]).unwrap();
    let q = Source::new(
        "query_ml_training.json",
        bundled::query_source("ml_training").unwrap(),
    );
    let query = load_query_source(&catalog, &q).unwrap();
    assert_eq!(query.workloads[0].id, "ML_Training");
    for role in [
        "cca",
        "load_balancer",
        "Monitor",
        "virtual_switch",
        "transport",
        "cpu_sched",
    ] {
        assert!(catalog.role(role).is_some(), "missing role {role}");
    }
}

#[test]
fn every_bundled_document_validates() {
    for (name, _) in bundled::CATALOGS {
        let src = Source::new(*name, bundled::catalog_source(name).unwrap());
        load_catalog_sources(&[src]).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, text) in bundled::QUERIES {
        let cat = if name.starts_with("cloud") {
            bundled::cloud()
        } else {
            bundled::dc()
        };
        load_query_source(&cat, &Source::new(*name, *text))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn every_system_carries_a_label() {
    for (name, _) in bundled::CATALOGS {
        let cat = bundled::catalog(name).unwrap();
        for s in &cat.systems {
            let labelled = s.deployment_constraints.label.is_some()
                || s.deployment_constraints
                    .conjuncts()
                    .iter()
                    .any(|c| c.label.is_some());
            assert!(labelled, "{name}: system {} has no constraint label", s.id);
        }
    }
}

#[test]
fn empty_catalog_with_property_only_query_loads() {
    let catalog =
        load_catalog_sources(&[Source::new("empty.json", r#"{"kepler-spec": 1}"#)]).unwrap();
    let q = r#"{
      "kepler-spec": 1,
      "topology": {"groups": [{"id": "rack", "group_type": "RACK"}]},
      "workloads": [{"id": "w", "deployed_at": ["rack"], "properties": ["dc_flows"]}]
    }"#;
    let query = load_query_source(&catalog, &Source::new("q.json", q)).unwrap();
    assert!(catalog.systems.is_empty());
    assert_eq!(query.workloads[0].properties, vec!["dc_flows".to_string()]);
}

#[test]
fn duplicate_system_id_names_both_positions() {
    let text = r#"{
  "kepler-spec": 1,
  "roles": [{"id": "r", "activation_condition": {"op": "bool", "value": true}}],
  "systems": [
    {"id": "S", "roles": ["r"], "deployment_constraints": {"op": "bool", "value": true, "label": "a"}},
    {"id": "S", "roles": ["r"], "deployment_constraints": {"op": "bool", "value": true, "label": "b"}}
  ]
}"#;
    let err = load_catalog_sources(&[Source::new("dup.json", text)]).unwrap_err();
    let LoadError::Invalid(ds) = &err else {
        panic!("expected validation error, got {err:?}")
    };
    let dup: Vec<_> = ds.iter().filter(|d| d.code == "duplicate_id").collect();
    assert_eq!(dup.len(), 1, "{ds:?}");
    assert!(
        dup[0].message.contains("5:5") && dup[0].message.contains("6:5"),
        "{}",
        dup[0].message
    );
    assert_eq!((dup[0].line, dup[0].column), (Some(6), Some(5)));
}

#[test]
fn unknown_top_level_key_is_rejected_with_position() {
    let err = parse::<Catalog>(&Source::new(
        "x.json",
        "{\n  \"kepler-spec\": 1,\n  \"gadgets\": []\n}",
    ))
    .unwrap_err();
    assert_eq!(err[0].code, "shape");
    assert!(err[0].message.contains("gadgets"), "{}", err[0].message);
    assert_eq!(err[0].line, Some(3));
}

#[test]
fn unknown_expression_node_reports_node_path() {
    let text = r#"{"roles": [{"id": "r", "activation_condition":
        {"op": "and", "args": [{"op": "bool", "value": true}, {"op": "xor", "args": []}]}}]}"#;
    let err = parse::<Catalog>(&Source::new("x.json", text)).unwrap_err();
    assert!(
        err[0].message.contains("$.args[1]") && err[0].message.contains("xor"),
        "{}",
        err[0].message
    );
    assert_eq!(err[0].line, Some(2));
}

#[test]
fn syntax_error_has_line_and_column() {
    let err = parse::<Query>(&Source::new("q.json", "{\n  \"workloads\": [,]\n}")).unwrap_err();
    assert_eq!(err[0].code, "syntax");
    assert_eq!(err[0].line, Some(2));
    assert!(err[0].column.is_some());
}

#[test]
fn newer_major_version_is_rejected() {
    let err = parse::<Catalog>(&Source::new("v.json", "{\"kepler-spec\": 2}")).unwrap_err();
    assert_eq!(err[0].code, "version");
    assert_eq!(err[0].line, Some(1));
}

#[test]
fn bundled_documents_round_trip() {
    for (name, _) in bundled::CATALOGS {
        let c = bundled::catalog(name).unwrap();
        let text = to_canonical(&c);
        let back: Catalog = parse(&Source::new(*name, text.clone())).unwrap();
        assert_eq!(back, c, "{name}");
        assert_eq!(
            to_canonical(&back),
            text,
            "{name}: canonical text not stable"
        );
    }
    for (name, _) in bundled::QUERIES {
        let q = bundled::query(name).unwrap();
        let text = to_canonical(&q);
        let back: Query = parse(&Source::new(*name, text.clone())).unwrap();
        assert_eq!(back, q, "{name}");
        assert_eq!(to_canonical(&back), text);
    }
}

#[test]
fn canonical_form_sorts_keys_and_drops_integral_fractions() {
    let v: serde_json::Value =
        serde_json::from_str(r#"{"b": 1.0, "a": [3, 0.25, 2.5e-5]}"#).unwrap();
    assert_eq!(
        to_canonical(&v),
        "{\n  \"a\": [\n    3,\n    0.25,\n    0.000025\n  ],\n  \"b\": 1\n}\n"
    );
}

#[test]
fn design_document_round_trips() {
    let SynthOutcome::Design(d) = synthesize(
        &bundled::dc(),
        &bundled::query("ml_training").unwrap(),
        &SynthOptions::default(),
    )
    .unwrap() else {
        panic!("ml_training should be feasible")
    };
    let text = to_canonical(&*d);
    let back: Design = serde_json::from_str(&text).unwrap();
    assert_eq!(back, *d);
    assert!(text.contains("\"ML_Training\"") && text.contains("\"cca\""));
}

#[test]
fn locate_resolves_ids_and_indices() {
    let text =
        "{\n \"systems\": [\n  {\"id\": \"A\"},\n  {\"id\": \"B\"}\n ],\n \"optimize\": [1, 2]\n}";
    assert_eq!(locate(text, "systems.B"), Some((4, 3)));
    assert_eq!(locate(text, "optimize[1]"), Some((6, 18)));
    assert_eq!(locate(text, "nowhere"), None);
}

#[test]
fn query_resolution_errors_point_into_the_query() {
    let catalog = bundled::dc();
    let q = r#"{
  "kepler-spec": 1,
  "topology": {"groups": [{"id": "g", "group_type": "RACK"}]},
  "workloads": [{"id": "w", "deployed_at": ["g"], "properties": []}],
  "excluded_systems": ["NoSuchSystem"]
}"#;
    let err = load_query_source(&catalog, &Source::new("q.json", q)).unwrap_err();
    let ds = err.diagnostics();
    let d = ds
        .iter()
        .find(|d| d.code == "dangling_reference")
        .expect("dangling reference reported");
    assert_eq!(d.file, "q.json");
    assert_eq!(d.line, Some(5));
}
