//! The eight-record worked example used throughout the tests and docs.
//!
//! Node keyword sets are a reconstruction: `v1` alone carries `k1`, `v2` alone
//! carries `k2`, `v5` and `v6` carry `k9`, and `v3` carries none of the three,
//! so it can only act as a bridge for the query `{k1, k2, k9}`.

use crate::corpus::{CatalogEntry, MashupRecord, Query};

pub fn example_catalog() -> Vec<CatalogEntry> {
    let rows: [(&str, &[&str]); 8] = [
        ("v1", &["k1", "k3"]),
        ("v2", &["k2", "k4"]),
        ("v3", &["k5"]),
        ("v4", &["k6", "k7"]),
        ("v5", &["k9", "k8"]),
        ("v6", &["k9", "k10"]),
        ("v7", &["k7", "k8"]),
        ("v8", &["k10", "k3"]),
    ];
    rows.iter()
        .map(|(id, kws)| CatalogEntry {
            api_id: (*id).to_owned(),
            category_keywords: kws.iter().map(|k| (*k).to_owned()).collect(),
        })
        .collect()
}

pub fn example_records() -> Vec<MashupRecord> {
    let rows: [&[&str]; 8] = [
        &["v1", "v3", "v4"],
        &["v4", "v2", "v3"],
        &["v1", "v2"],
        &["v2", "v4", "v7"],
        &["v5", "v4"],
        &["v4", "v7"],
        &["v6", "v4"],
        &["v3", "v6", "v8", "v7"],
    ];
    rows.iter()
        .enumerate()
        .map(|(i, apis)| MashupRecord {
            mashup_id: format!("R{}", i + 1),
            apis: apis.iter().map(|a| (*a).to_owned()).collect(),
        })
        .collect()
}

pub fn example_query() -> Query {
    Query::new(["k1", "k2", "k9"])
}
