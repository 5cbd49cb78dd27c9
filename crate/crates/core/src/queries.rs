//! Query files and entity relevance files.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{load_with, tokenize, tsv_records};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub qid: String,
    pub text: String,
}

impl Query {
    pub fn terms(&self) -> Vec<String> {
        tokenize(&self.text)
    }
}

/// Parses `queries.tsv`: `qid<TAB>query text`.
pub fn parse_queries(text: &str) -> Result<Vec<Query>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, fields) in tsv_records(text) {
        if fields.len() != 2 {
            return Err(Error::parse(
                line,
                format!("expected 2 tab-separated fields, found {}", fields.len()),
            ));
        }
        let qid = fields[0].trim();
        if qid.is_empty() {
            return Err(Error::parse(line, "empty qid"));
        }
        if !seen.insert(qid) {
            return Err(Error::parse(line, format!("duplicate qid `{qid}`")));
        }
        out.push(Query {
            qid: qid.to_string(),
            text: fields[1].to_string(),
        });
    }
    Ok(out)
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    load_with(path.as_ref(), parse_queries)
}

/// Parses entity relevance judgments, `qid<TAB>entity_id[<TAB>relevance]`.
///
/// A missing relevance column means relevant; rows with relevance ≤ 0 are
/// dropped. The result maps each qid to its relevant entities in file order.
pub fn parse_entity_qrels(text: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (line, fields) in tsv_records(text) {
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::parse(
                line,
                format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let relevance: f64 = match fields.get(2) {
            Some(r) => r
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, format!("bad relevance `{r}`")))?,
            None => 1.0,
        };
        let list = out.entry(fields[0].trim().to_string()).or_default();
        let entity = fields[1].trim().to_string();
        if relevance > 0.0 && !list.contains(&entity) {
            list.push(entity);
        }
    }
    Ok(out)
}

pub fn load_entity_qrels(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<String>>> {
    load_with(path.as_ref(), parse_entity_qrels)
}
