//! Inverted index over entity descriptions, BM25 and Dirichlet-smoothed
//! query-likelihood scoring, and top-K entity retrieval.

mod codec;
pub mod formula;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

pub use codec::{decode_index, encode_index, load_index, save_index, INDEX_MAGIC, INDEX_VERSION};

use crate::error::{Error, Result};
use crate::kb::{EntityCorpus, EntityIdx};
use crate::ranking::{rank_order, ScoredItem, ScoredList};
use crate::text::tokenize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RetrievalModel {
    Bm25,
    Lm,
}

impl RetrievalModel {
    pub fn name(self) -> &'static str {
        match self {
            RetrievalModel::Bm25 => "bm25",
            RetrievalModel::Lm => "lm",
        }
    }
}

impl fmt::Display for RetrievalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RetrievalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bm25" => Ok(RetrievalModel::Bm25),
            "lm" => Ok(RetrievalModel::Lm),
            _ => Err(Error::InvalidArgument(format!(
                "unknown retrieval model `{s}` (expected bm25 or lm)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetrievalParams {
    pub model: RetrievalModel,
    pub k1: f64,
    pub b: f64,
    pub mu: f64,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        RetrievalParams {
            model: RetrievalModel::Bm25,
            k1: 1.2,
            b: 0.75,
            mu: 2000.0,
        }
    }
}

impl RetrievalParams {
    pub fn with_model(model: RetrievalModel) -> Self {
        RetrievalParams {
            model,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) {
            return Err(Error::InvalidArgument(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidArgument(format!("b must be in [0,1], got {}", self.b)));
        }
        if !(self.mu > 0.0) {
            return Err(Error::InvalidArgument(format!("mu must be > 0, got {}", self.mu)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Posting {
    pub doc: EntityIdx,
    pub tf: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TermEntry {
    /// Sorted by document.
    pub postings: Vec<Posting>,
    pub cf: u64,
}

impl TermEntry {
    pub fn df(&self) -> usize {
        self.postings.len()
    }

    pub fn tf(&self, doc: EntityIdx) -> u32 {
        match self.postings.binary_search_by_key(&doc, |p| p.doc) {
            Ok(i) => self.postings[i].tf,
            Err(_) => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IndexOptions {
    /// Index `name + description` instead of the description alone.
    pub include_names: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntityIndex {
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, EntityIdx>,
    doc_len: Vec<u32>,
    terms: HashMap<String, TermEntry>,
    total_terms: u64,
    include_names: bool,
}

pub fn build_index(corpus: &EntityCorpus, options: IndexOptions) -> EntityIndex {
    let mut terms: HashMap<String, TermEntry> = HashMap::new();
    let mut doc_ids = Vec::with_capacity(corpus.len());
    let mut doc_len = Vec::with_capacity(corpus.len());
    for (i, entity) in corpus.entities().iter().enumerate() {
        let mut tokens = tokenize(&entity.description);
        if options.include_names {
            let mut named = tokenize(&entity.name);
            named.append(&mut tokens);
            tokens = named;
        }
        let mut counts: HashMap<String, u32> = HashMap::new();
        for tok in &tokens {
            *counts.entry(tok.clone()).or_default() += 1;
        }
        let doc = EntityIdx(i as u32);
        for (term, tf) in counts {
            let entry = terms.entry(term).or_default();
            entry.postings.push(Posting { doc, tf });
            entry.cf += u64::from(tf);
        }
        doc_ids.push(entity.entity_id.clone());
        doc_len.push(tokens.len() as u32);
    }
    EntityIndex::from_parts(doc_ids, doc_len, terms, options.include_names)
}

impl EntityIndex {
    fn from_parts(
        doc_ids: Vec<String>,
        doc_len: Vec<u32>,
        terms: HashMap<String, TermEntry>,
        include_names: bool,
    ) -> Self {
        let doc_lookup = doc_ids
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), EntityIdx(i as u32)))
            .collect();
        let total_terms = doc_len.iter().map(|&l| u64::from(l)).sum();
        EntityIndex {
            doc_ids,
            doc_lookup,
            doc_len,
            terms,
            total_terms,
            include_names,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn total_terms(&self) -> u64 {
        self.total_terms
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.doc_ids.is_empty() {
            0.0
        } else {
            self.total_terms as f64 / self.doc_ids.len() as f64
        }
    }

    pub fn include_names(&self) -> bool {
        self.include_names
    }

    pub fn doc_id(&self, doc: EntityIdx) -> &str {
        &self.doc_ids[doc.index()]
    }

    pub fn doc_len(&self, doc: EntityIdx) -> u32 {
        self.doc_len[doc.index()]
    }

    pub fn find_doc(&self, entity_id: &str) -> Option<EntityIdx> {
        self.doc_lookup.get(entity_id).copied()
    }

    pub fn term(&self, term: &str) -> Option<&TermEntry> {
        self.terms.get(term)
    }

    pub fn df(&self, term: &str) -> usize {
        self.terms.get(term).map_or(0, TermEntry::df)
    }

    pub fn cf(&self, term: &str) -> u64 {
        self.terms.get(term).map_or(0, |e| e.cf)
    }

    pub fn tf(&self, term: &str, doc: EntityIdx) -> u32 {
        self.terms.get(term).map_or(0, |e| e.tf(doc))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Vocabulary in byte order.
    pub fn sorted_terms(&self) -> Vec<(&str, &TermEntry)> {
        let mut v: Vec<_> = self.terms.iter().map(|(k, e)| (k.as_str(), e)).collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// Checks that documents line up one-to-one with `corpus`.
    pub fn check_matches(&self, corpus: &EntityCorpus) -> Result<()> {
        if self.doc_ids.len() != corpus.len()
            || self
                .doc_ids
                .iter()
                .zip(corpus.entities())
                .any(|(d, e)| *d != e.entity_id)
        {
            return Err(Error::InvalidData(
                "index documents do not match the entity corpus".into(),
            ));
        }
        Ok(())
    }

    fn require_doc(&self, entity_id: &str) -> Result<EntityIdx> {
        self.find_doc(entity_id)
            .ok_or_else(|| Error::UnknownEntity(entity_id.to_string()))
    }

    /// Collection probability cf/|C| of each query term.
    fn background(&self, terms: &[String]) -> Vec<f64> {
        terms
            .iter()
            .map(|t| {
                if self.total_terms == 0 {
                    0.0
                } else {
                    self.cf(t) as f64 / self.total_terms as f64
                }
            })
            .collect()
    }

    pub(crate) fn bm25_doc(&self, terms: &[String], doc: EntityIdx, params: &RetrievalParams) -> f64 {
        let n = self.n_docs() as f64;
        let avgdl = self.avg_doc_len();
        let dl = f64::from(self.doc_len(doc));
        terms
            .iter()
            .map(|t| match self.terms.get(t) {
                Some(entry) => formula::bm25_term(
                    f64::from(entry.tf(doc)),
                    dl,
                    avgdl,
                    formula::bm25_idf(n, entry.df() as f64),
                    params,
                ),
                None => 0.0,
            })
            .sum()
    }

    pub(crate) fn lm_doc(&self, terms: &[String], doc: EntityIdx, params: &RetrievalParams) -> f64 {
        let background = self.background(terms);
        let tfs = terms.iter().map(|t| f64::from(self.tf(t, doc)));
        formula::lm_likelihood(tfs, f64::from(self.doc_len(doc)), &background, params.mu)
    }

    /// Top-K documents with nonzero score, in ranking order.
    pub fn top_k(&self, terms: &[String], k: usize, params: &RetrievalParams) -> Vec<(EntityIdx, f64)> {
        let mut scored: Vec<(EntityIdx, f64)> = match params.model {
            RetrievalModel::Bm25 => self.bm25_candidates(terms, params),
            RetrievalModel::Lm => self.lm_all(terms, params),
        };
        scored.retain(|&(_, s)| s > 0.0);
        let order = |a: &(EntityIdx, f64), b: &(EntityIdx, f64)| {
            rank_order(self.doc_id(a.0), a.1, self.doc_id(b.0), b.1)
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        scored
    }

    fn bm25_candidates(&self, terms: &[String], params: &RetrievalParams) -> Vec<(EntityIdx, f64)> {
        let n = self.n_docs() as f64;
        let avgdl = self.avg_doc_len();
        let mut acc: HashMap<EntityIdx, f64> = HashMap::new();
        for t in terms {
            let Some(entry) = self.terms.get(t) else { continue };
            let idf = formula::bm25_idf(n, entry.df() as f64);
            for p in &entry.postings {
                let dl = f64::from(self.doc_len(p.doc));
                *acc.entry(p.doc).or_default() +=
                    formula::bm25_term(f64::from(p.tf), dl, avgdl, idf, params);
            }
        }
        acc.into_iter().collect()
    }

    fn lm_all(&self, terms: &[String], params: &RetrievalParams) -> Vec<(EntityIdx, f64)> {
        let background = self.background(terms);
        if background.iter().any(|&p| p == 0.0) {
            return Vec::new();
        }
        let mut matched: HashMap<EntityIdx, Vec<f64>> = HashMap::new();
        for (i, t) in terms.iter().enumerate() {
            let entry = &self.terms[t];
            for p in &entry.postings {
                matched.entry(p.doc).or_insert_with(|| vec![0.0; terms.len()])[i] = f64::from(p.tf);
            }
        }
        let zeros = vec![0.0; terms.len()];
        (0..self.n_docs())
            .map(|d| {
                let doc = EntityIdx(d as u32);
                let tfs = matched.get(&doc).unwrap_or(&zeros);
                let dl = f64::from(self.doc_len(doc));
                (doc, formula::lm_likelihood(tfs.iter().copied(), dl, &background, params.mu))
            })
            .collect()
    }
}

pub fn score_bm25(terms: &[String], entity_id: &str, idx: &EntityIndex, params: &RetrievalParams) -> Result<f64> {
    let doc = idx.require_doc(entity_id)?;
    Ok(idx.bm25_doc(terms, doc, params))
}

pub fn score_lm(terms: &[String], entity_id: &str, idx: &EntityIndex, params: &RetrievalParams) -> Result<f64> {
    let doc = idx.require_doc(entity_id)?;
    Ok(idx.lm_doc(terms, doc, params))
}

/// Ranks entities for a tokenized query, keeping at most `k`.
pub fn retrieve_top_k(terms: &[String], k: usize, idx: &EntityIndex, params: &RetrievalParams) -> ScoredList {
    let items = idx
        .top_k(terms, k, params)
        .into_iter()
        .map(|(doc, score)| ScoredItem {
            id: idx.doc_id(doc).to_string(),
            score,
        })
        .collect();
    ScoredList::sorted(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_entities;

    fn index(text: &str) -> EntityIndex {
        build_index(&parse_entities(text).unwrap(), IndexOptions::default())
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn hand_counted_stats() {
        let idx = index("e1\tOne\tred car\ne2\tTwo\tred red bus\n");
        assert_eq!(idx.df("red"), 2);
        assert_eq!(idx.cf("red"), 3);
        assert_eq!(idx.doc_len(EntityIdx(1)), 3);
        assert_eq!(idx.total_terms(), 5);
        let total_cf: u64 = idx.sorted_terms().iter().map(|(_, e)| e.cf).sum();
        assert_eq!(total_cf, idx.total_terms());
    }

    #[test]
    fn empty_corpora() {
        let idx = index("");
        assert_eq!(idx.n_docs(), 0);
        assert_eq!(idx.n_terms(), 0);
        let idx = index("e1\tname\t\n");
        assert_eq!(idx.n_docs(), 1);
        assert_eq!(idx.doc_len(EntityIdx(0)), 0);
        let p = RetrievalParams::default();
        assert_eq!(score_bm25(&toks("x"), "e1", &idx, &p).unwrap(), 0.0);
        assert!(retrieve_top_k(&toks("x"), 5, &idx, &p).is_empty());
    }

    #[test]
    fn names_can_be_indexed() {
        let corpus = parse_entities("e1\tBig Apple\tcity\n").unwrap();
        let idx = build_index(&corpus, IndexOptions { include_names: true });
        assert_eq!(idx.doc_len(EntityIdx(0)), 3);
        assert_eq!(idx.df("apple"), 1);
    }

    #[test]
    fn bm25_single_doc_hand_value() {
        // N=1, df=1, dl=avgdl=3, tf=1 for each term:
        // idf = ln(1 + 0.5/1.5); tf part = 2.2/2.2 = 1; three terms.
        let idx = index("e1\tx\talpha beta gamma\n");
        let p = RetrievalParams::default();
        let s = score_bm25(&toks("alpha beta gamma"), "e1", &idx, &p).unwrap();
        let expected = 3.0 * (1.0f64 + 1.0 / 3.0).ln();
        assert!((s - expected).abs() < 1e-12, "{s} vs {expected}");
        assert_eq!(score_bm25(&toks("delta"), "e1", &idx, &p).unwrap(), 0.0);
        assert!(matches!(
            score_bm25(&toks("alpha"), "nope", &idx, &p),
            Err(Error::UnknownEntity(_))
        ));
    }

    #[test]
    fn bm25_duplicate_query_terms_do_not_decrease() {
        let idx = index("e1\tx\tred car\ne2\tx\tblue bus\n");
        let p = RetrievalParams::default();
        let one = score_bm25(&toks("red"), "e1", &idx, &p).unwrap();
        let two = score_bm25(&toks("red red"), "e1", &idx, &p).unwrap();
        assert!(two >= one && one > 0.0);
    }

    #[test]
    fn lm_edge_cases_and_hand_value() {
        let idx = index("e1\tx\tred car\ne2\tx\tred red bus\n");
        let p = RetrievalParams::with_model(RetrievalModel::Lm);
        assert_eq!(score_lm(&[], "e1", &idx, &p).unwrap(), 1.0);
        assert_eq!(score_lm(&toks("zebra"), "e1", &idx, &p).unwrap(), 0.0);
        assert_eq!(score_lm(&toks("red zebra"), "e1", &idx, &p).unwrap(), 0.0);
        // P(red|C) = 3/5; e1: (1 + 2000*0.6) / (2 + 2000)
        let s = score_lm(&toks("red"), "e1", &idx, &p).unwrap();
        assert!((s - 1201.0 / 2002.0).abs() < 1e-12);
        let s = score_lm(&toks("red"), "e2", &idx, &p).unwrap();
        assert!((s - 1202.0 / 2003.0).abs() < 1e-12);
    }

    #[test]
    fn top_k_limits_and_breaks_ties_by_id() {
        let idx = index("b\tx\tred car\na\tx\tred car\nc\tx\tblue\n");
        let p = RetrievalParams::default();
        let list = retrieve_top_k(&toks("red"), 10, &idx, &p);
        assert_eq!(list.ids().collect::<Vec<_>>(), vec!["a", "b"]);
        let list = retrieve_top_k(&toks("red"), 1, &idx, &p);
        assert_eq!(list.ids().collect::<Vec<_>>(), vec!["a"]);
        // Under LM every document has nonzero likelihood.
        let lm = RetrievalParams::with_model(RetrievalModel::Lm);
        let list = retrieve_top_k(&toks("red"), 10, &idx, &lm);
        assert_eq!(list.ids().collect::<Vec<_>>(), vec!["a", "b", "c"]);
    }

    #[test]
    fn params_validation() {
        assert!(RetrievalParams::default().validate().is_ok());
        assert!(RetrievalParams { b: 1.5, ..Default::default() }.validate().is_err());
        assert!(RetrievalParams { mu: 0.0, ..Default::default() }.validate().is_err());
        assert!(RetrievalParams { k1: -1.0, ..Default::default() }.validate().is_err());
        assert_eq!("LM".parse::<RetrievalModel>().unwrap(), RetrievalModel::Lm);
        assert!("tfidf".parse::<RetrievalModel>().is_err());
    }
}
