//! Ingestion of the API catalog and historical mashup records, plus
//! evaluation-query generation.
//!
//! Catalog lines look like `api_id | kw1, kw2, ...`. Record lines are either
//! `mashup_id | api1, api2, ...` or a JSON object
//! `{"mashup_id": "...", "apis": ["...", ...]}`. Blank lines and lines starting
//! with `#` are ignored.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub api_id: String,
    pub category_keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MashupRecord {
    pub mashup_id: String,
    pub apis: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub keywords: Vec<String>,
    pub source_mashup: Option<String>,
}

impl Query {
    /// Builds a query, dropping repeated keywords while keeping first-seen order.
    pub fn new<S: Into<String>>(keywords: impl IntoIterator<Item = S>) -> Self {
        let mut seen = HashSet::new();
        let keywords = keywords
            .into_iter()
            .map(Into::into)
            .filter(|k: &String| seen.insert(k.clone()))
            .collect();
        Query {
            keywords,
            source_mashup: None,
        }
    }

    pub fn with_source(mut self, mashup_id: impl Into<String>) -> Self {
        self.source_mashup = Some(mashup_id.into());
        self
    }
}

/// The first category keyword names the API's primary function.
pub fn functional_keyword(entry: &CatalogEntry) -> &str {
    &entry.category_keywords[0]
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn split_pipe<'a>(path: &Path, lineno: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let (id, rest) = line
        .split_once('|')
        .ok_or_else(|| parse_error(path, lineno, "expected `id | item, item, ...`"))?;
    let id = id.trim();
    if id.is_empty() {
        return Err(parse_error(path, lineno, "empty identifier"));
    }
    Ok((id, rest))
}

pub fn parse_catalog_str(text: &str, origin: &Path) -> Result<Vec<CatalogEntry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (lineno, line) in content_lines(text) {
        let (id, rest) = split_pipe(origin, lineno, line)?;
        let category_keywords = split_list(rest);
        if category_keywords.is_empty() {
            return Err(parse_error(origin, lineno, "api has no category keywords"));
        }
        if !seen.insert(id.to_owned()) {
            return Err(Error::DuplicateKey {
                kind: "api_id",
                key: id.to_owned(),
            });
        }
        out.push(CatalogEntry {
            api_id: id.to_owned(),
            category_keywords,
        });
    }
    Ok(out)
}

pub fn parse_catalog(path: impl AsRef<Path>) -> Result<Vec<CatalogEntry>> {
    let path = path.as_ref();
    parse_catalog_str(&std::fs::read_to_string(path)?, path)
}

fn check_record(path: &Path, lineno: usize, rec: &MashupRecord) -> Result<()> {
    if rec.mashup_id.trim().is_empty() {
        return Err(parse_error(path, lineno, "empty mashup id"));
    }
    if rec.apis.is_empty() {
        return Err(parse_error(path, lineno, "mashup lists no apis"));
    }
    let mut seen = HashSet::new();
    for api in &rec.apis {
        if !seen.insert(api.as_str()) {
            return Err(parse_error(
                path,
                lineno,
                format!("api `{api}` listed twice in mashup `{}`", rec.mashup_id),
            ));
        }
    }
    Ok(())
}

/// Parses records in either the pipe format or the one-JSON-object-per-line
/// format; the two may be mixed.
pub fn parse_records_str(text: &str, origin: &Path) -> Result<Vec<MashupRecord>> {
    let mut ids = HashSet::new();
    let mut out = Vec::new();
    for (lineno, line) in content_lines(text) {
        let rec = if line.starts_with('{') {
            serde_json::from_str::<MashupRecord>(line)
                .map_err(|e| parse_error(origin, lineno, e.to_string()))?
        } else {
            let (id, rest) = split_pipe(origin, lineno, line)?;
            MashupRecord {
                mashup_id: id.to_owned(),
                apis: split_list(rest),
            }
        };
        check_record(origin, lineno, &rec)?;
        if !ids.insert(rec.mashup_id.clone()) {
            return Err(Error::DuplicateKey {
                kind: "mashup_id",
                key: rec.mashup_id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_records(path: impl AsRef<Path>) -> Result<Vec<MashupRecord>> {
    let path = path.as_ref();
    parse_records_str(&std::fs::read_to_string(path)?, path)
}

pub fn format_catalog(catalog: &[CatalogEntry]) -> String {
    let mut s = String::new();
    for e in catalog {
        let _ = writeln!(s, "{} | {}", e.api_id, e.category_keywords.join(", "));
    }
    s
}

pub fn format_records(records: &[MashupRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{} | {}", r.mashup_id, r.apis.join(", "));
    }
    s
}

/// Query lines: `mashup_id | kw1, kw2` or a bare `kw1, kw2` when there is no
/// source mashup.
pub fn format_queries(queries: &[Query]) -> String {
    let mut s = String::new();
    for q in queries {
        match &q.source_mashup {
            Some(m) => {
                let _ = writeln!(s, "{} | {}", m, q.keywords.join(", "));
            }
            None => {
                let _ = writeln!(s, "{}", q.keywords.join(", "));
            }
        }
    }
    s
}

pub fn parse_queries_str(text: &str, origin: &Path) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for (lineno, line) in content_lines(text) {
        let (source, rest) = match line.split_once('|') {
            Some((id, rest)) => (Some(id.trim().to_owned()), rest),
            None => (None, line),
        };
        let kws = split_list(rest);
        if kws.is_empty() {
            return Err(parse_error(origin, lineno, "query has no keywords"));
        }
        let mut q = Query::new(kws);
        q.source_mashup = source;
        out.push(q);
    }
    Ok(out)
}

pub fn parse_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    parse_queries_str(&std::fs::read_to_string(path)?, path)
}

pub(crate) fn catalog_lookup(catalog: &[CatalogEntry]) -> HashMap<&str, &CatalogEntry> {
    catalog.iter().map(|e| (e.api_id.as_str(), e)).collect()
}

/// One query per mashup whose union of functional keywords has a size in
/// `min_len..=max_len`. Keywords keep first-seen order across the record.
pub fn generate_queries(
    records: &[MashupRecord],
    catalog: &[CatalogEntry],
    min_len: usize,
    max_len: usize,
) -> Result<Vec<Query>> {
    if min_len == 0 || min_len > max_len {
        return Err(Error::invalid(format!(
            "query length range [{min_len}, {max_len}] is empty or starts at 0"
        )));
    }
    let lookup = catalog_lookup(catalog);
    let mut out = Vec::new();
    for rec in records {
        let mut kws = Vec::new();
        let mut seen = BTreeSet::new();
        for api in &rec.apis {
            let entry = lookup.get(api.as_str()).ok_or_else(|| Error::UnresolvedApi {
                mashup_id: rec.mashup_id.clone(),
                api_id: api.clone(),
            })?;
            let k = functional_keyword(entry);
            if seen.insert(k) {
                kws.push(k.to_owned());
            }
        }
        if (min_len..=max_len).contains(&kws.len()) {
            out.push(Query::new(kws).with_source(rec.mashup_id.clone()));
        }
    }
    Ok(out)
}

/// Path label for in-memory parsing in tests and tools.
pub fn inline_origin() -> PathBuf {
    PathBuf::from("<inline>")
}
