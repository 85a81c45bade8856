//! Catalogs and example queries shipped with the library. Regenerate with
//! `scripts/gen_data.py`.

use crate::model::{Catalog, Query};

pub const CATALOGS: &[(&str, &str)] = &[
    ("dc", include_str!("../data/catalog_dc.json")),
    ("cloud", include_str!("../data/catalog_cloud.json")),
];

pub const QUERIES: &[(&str, &str)] = &[
    (
        "ml_training",
        include_str!("../data/query_ml_training.json"),
    ),
    ("inference", include_str!("../data/query_inference.json")),
    (
        "inference_no_programmable",
        include_str!("../data/query_inference_no_programmable.json"),
    ),
    ("cloud_eod", include_str!("../data/query_cloud_eod.json")),
    (
        "cloud_latency",
        include_str!("../data/query_cloud_latency.json"),
    ),
];

fn lookup<'a>(table: &'a [(&str, &str)], name: &str) -> Option<&'a str> {
    table.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn catalog_source(name: &str) -> Option<&'static str> {
    lookup(CATALOGS, name)
}

pub fn query_source(name: &str) -> Option<&'static str> {
    lookup(QUERIES, name)
}

/// Panics if the bundled document does not parse; covered by tests.
pub fn catalog(name: &str) -> Option<Catalog> {
    catalog_source(name)
        .map(|s| serde_json::from_str(s).unwrap_or_else(|e| panic!("bundled catalog {name}: {e}")))
}

pub fn query(name: &str) -> Option<Query> {
    query_source(name)
        .map(|s| serde_json::from_str(s).unwrap_or_else(|e| panic!("bundled query {name}: {e}")))
}

pub fn dc() -> Catalog {
    catalog("dc").expect("dc catalog is bundled")
}

pub fn cloud() -> Catalog {
    catalog("cloud").expect("cloud catalog is bundled")
}
