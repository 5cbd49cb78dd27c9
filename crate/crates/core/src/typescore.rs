//! Baseline type rankers.
//!
//! * Entity-centric (late fusion): retrieve the top-K entities and spread each
//!   entity's retrieval score over its types with the uniform weight w(e,t).
//! * Type-centric (early fusion): build a pseudo document per type whose term
//!   frequencies are the w(e,t)-weighted sums of its entities' frequencies,
//!   then rank those documents with BM25 or the query-likelihood model.
//! * Oracle: count the known relevant entities that carry each type.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::kb::{EntityIdx, TypeAssociations, TypeIdx, TypeTaxonomy};
use crate::ranking::{ScoredItem, ScoredList};
use crate::retrieval::{formula, EntityIndex, RetrievalModel, RetrievalParams};

/// Default K for standalone entity-centric runs.
pub const DEFAULT_EC_K: usize = 20;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PseudoTypeDoc {
    pub term_freqs: HashMap<String, f64>,
    pub length: f64,
    /// False for types with an empty extension; such types score 0.
    pub has_entities: bool,
}

/// Which collection supplies background statistics for type-centric scoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TcBackground {
    /// Statistics over the pseudo-type corpus (types as documents).
    #[default]
    Types,
    /// idf and collection probabilities from the entity index.
    Entities,
}

/// Pseudo documents for every type plus type-corpus statistics.
///
/// Only types with a non-empty extension count as documents of the type
/// corpus.
#[derive(Clone, Debug, Default)]
pub struct PseudoTypeCorpus {
    docs: Vec<PseudoTypeDoc>,
    n_docs: usize,
    avg_len: f64,
    df: HashMap<String, usize>,
    cf: HashMap<String, f64>,
    total: f64,
}

impl PseudoTypeCorpus {
    pub fn doc(&self, t: TypeIdx) -> &PseudoTypeDoc {
        &self.docs[t.index()]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn cf(&self, term: &str) -> f64 {
        self.cf.get(term).copied().unwrap_or(0.0)
    }

    pub fn total_len(&self) -> f64 {
        self.total
    }
}

/// f̃(w,t) = Σ_e f(w,e)·w(e,t) for every type and term.
///
/// `index` must have been built from the corpus `assoc` refers to.
pub fn build_pseudo_docs(assoc: &TypeAssociations, index: &EntityIndex) -> PseudoTypeCorpus {
    assert_eq!(
        assoc.n_entities(),
        index.n_docs(),
        "index and associations cover different corpora"
    );
    let n_types = assoc.n_types();
    let mut docs: Vec<PseudoTypeDoc> = (0..n_types)
        .map(|t| PseudoTypeDoc {
            has_entities: assoc.count(TypeIdx(t as u32)) > 0,
            ..Default::default()
        })
        .collect();
    for (term, entry) in index.sorted_terms() {
        for p in &entry.postings {
            for &t in assoc.types_of(p.doc) {
                *docs[t.index()]
                    .term_freqs
                    .entry(term.to_string())
                    .or_default() += f64::from(p.tf) * assoc.member_weight(t);
            }
        }
    }
    // Σ_w f̃(w,t) = Σ_e w(e,t)·|e|; summing over the sorted extension keeps
    // the length independent of hash-map iteration order.
    for (t, doc) in docs.iter_mut().enumerate() {
        let t = TypeIdx(t as u32);
        let w = assoc.member_weight(t);
        doc.length = assoc
            .extension(t)
            .iter()
            .map(|&e| f64::from(index.doc_len(e)) * w)
            .sum();
    }

    let mut df: HashMap<String, usize> = HashMap::new();
    let mut cf: HashMap<String, f64> = HashMap::new();
    let mut total = 0.0;
    let mut n_docs = 0;
    for doc in docs.iter().filter(|d| d.has_entities) {
        n_docs += 1;
        total += doc.length;
        for (term, &f) in &doc.term_freqs {
            if f > 0.0 {
                *df.entry(term.clone()).or_default() += 1;
                *cf.entry(term.clone()).or_default() += f;
            }
        }
    }
    PseudoTypeCorpus {
        docs,
        n_docs,
        avg_len: if n_docs > 0 { total / n_docs as f64 } else { 0.0 },
        df,
        cf,
        total,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RankMethod {
    EntityCentric { model: RetrievalModel, k: usize },
    TypeCentric { model: RetrievalModel },
    /// Knows the relevant entities of the query.
    Oracle { relevant: Vec<String> },
}

impl RankMethod {
    /// Short run name such as `ec-bm25-k20`, `tc-lm` or `oracle`.
    pub fn run_name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for RankMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankMethod::EntityCentric { model, k } => write!(f, "ec-{model}-k{k}"),
            RankMethod::TypeCentric { model } => write!(f, "tc-{model}"),
            RankMethod::Oracle { .. } => f.write_str("oracle"),
        }
    }
}

/// Scores taxonomy types for queries against one loaded knowledge base.
#[derive(Clone, Copy)]
pub struct TypeRanker<'a> {
    pub taxonomy: &'a TypeTaxonomy,
    pub assoc: &'a TypeAssociations,
    pub index: &'a EntityIndex,
    /// Required for type-centric scoring only.
    pub pseudo: Option<&'a PseudoTypeCorpus>,
    /// k1, b and mu; the model is chosen per call.
    pub params: RetrievalParams,
    pub background: TcBackground,
}

impl<'a> TypeRanker<'a> {
    pub fn new(
        taxonomy: &'a TypeTaxonomy,
        assoc: &'a TypeAssociations,
        index: &'a EntityIndex,
        pseudo: Option<&'a PseudoTypeCorpus>,
    ) -> Self {
        TypeRanker {
            taxonomy,
            assoc,
            index,
            pseudo,
            params: RetrievalParams::default(),
            background: TcBackground::Types,
        }
    }

    fn params_for(&self, model: RetrievalModel) -> RetrievalParams {
        RetrievalParams {
            model,
            ..self.params
        }
    }

    /// R_K(q) under `model`.
    pub fn entity_ranking(&self, terms: &[String], k: usize, model: RetrievalModel) -> Vec<(EntityIdx, f64)> {
        self.index.top_k(terms, k, &self.params_for(model))
    }

    /// Dense per-type EC scores aggregated from a ranked entity list.
    pub fn ec_from_ranking(&self, ranking: &[(EntityIdx, f64)]) -> Vec<f64> {
        let mut scores = vec![0.0; self.taxonomy.len()];
        for &(e, s) in ranking {
            for &t in self.assoc.types_of(e) {
                scores[t.index()] += s * self.assoc.member_weight(t);
            }
        }
        scores
    }

    pub fn ec_scores(&self, terms: &[String], k: usize, model: RetrievalModel) -> Vec<f64> {
        self.ec_from_ranking(&self.entity_ranking(terms, k, model))
    }

    pub fn score_ec(&self, terms: &[String], type_id: &str, k: usize, model: RetrievalModel) -> Result<f64> {
        let t = self.taxonomy.require(type_id)?;
        let ranking = self.entity_ranking(terms, k, model);
        Ok(ranking
            .iter()
            .map(|&(e, s)| s * self.assoc.weight(e, t))
            .sum())
    }

    fn pseudo(&self) -> Result<&'a PseudoTypeCorpus> {
        self.pseudo.ok_or_else(|| {
            Error::InvalidArgument("type-centric scoring needs pseudo type documents".into())
        })
    }

    fn tc_one(&self, pseudo: &PseudoTypeCorpus, terms: &[String], t: TypeIdx, params: &RetrievalParams) -> f64 {
        let doc = pseudo.doc(t);
        if !doc.has_entities {
            return 0.0;
        }
        let tf = |term: &String| doc.term_freqs.get(term).copied().unwrap_or(0.0);
        match params.model {
            RetrievalModel::Bm25 => terms
                .iter()
                .map(|term| {
                    let idf = match self.background {
                        TcBackground::Types => {
                            formula::bm25_idf(pseudo.n_docs() as f64, pseudo.df(term) as f64)
                        }
                        TcBackground::Entities => formula::bm25_idf(
                            self.index.n_docs() as f64,
                            self.index.df(term) as f64,
                        ),
                    };
                    formula::bm25_term(tf(term), doc.length, pseudo.avg_len(), idf, params)
                })
                .sum(),
            RetrievalModel::Lm => {
                let background: Vec<f64> = terms
                    .iter()
                    .map(|term| match self.background {
                        TcBackground::Types if pseudo.total_len() > 0.0 => {
                            pseudo.cf(term) / pseudo.total_len()
                        }
                        TcBackground::Entities if self.index.total_terms() > 0 => {
                            self.index.cf(term) as f64 / self.index.total_terms() as f64
                        }
                        _ => 0.0,
                    })
                    .collect();
                formula::lm_likelihood(terms.iter().map(tf), doc.length, &background, params.mu)
            }
        }
    }

    pub fn tc_scores(&self, terms: &[String], model: RetrievalModel) -> Result<Vec<f64>> {
        let pseudo = self.pseudo()?;
        let params = self.params_for(model);
        Ok(self
            .taxonomy
            .iter()
            .map(|t| self.tc_one(pseudo, terms, t, &params))
            .collect())
    }

    pub fn score_tc(&self, terms: &[String], type_id: &str, model: RetrievalModel) -> Result<f64> {
        let t = self.taxonomy.require(type_id)?;
        let pseudo = self.pseudo()?;
        Ok(self.tc_one(pseudo, terms, t, &self.params_for(model)))
    }

    fn relevant_docs(&self, relevant: &[String]) -> Vec<EntityIdx> {
        let set: HashSet<EntityIdx> = relevant
            .iter()
            .filter_map(|id| self.index.find_doc(id))
            .collect();
        let mut docs: Vec<_> = set.into_iter().collect();
        docs.sort_unstable();
        docs
    }

    /// score_O(t) = number of relevant entities carrying `t`, per type.
    pub fn oracle_scores(&self, relevant: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.taxonomy.len()];
        for e in self.relevant_docs(relevant) {
            for &t in self.assoc.types_of(e) {
                scores[t.index()] += 1.0;
            }
        }
        scores
    }

    pub fn score_oracle(&self, type_id: &str, relevant: &[String]) -> Result<usize> {
        let t = self.taxonomy.require(type_id)?;
        Ok(self
            .relevant_docs(relevant)
            .into_iter()
            .filter(|&e| self.assoc.has_type(e, t))
            .count())
    }

    pub fn scores(&self, terms: &[String], method: &RankMethod) -> Result<Vec<f64>> {
        match method {
            RankMethod::EntityCentric { model, k } => Ok(self.ec_scores(terms, *k, *model)),
            RankMethod::TypeCentric { model } => self.tc_scores(terms, *model),
            RankMethod::Oracle { relevant } => Ok(self.oracle_scores(relevant)),
        }
    }

    /// Ranks every taxonomy type, omitting zero scores.
    pub fn rank_types(&self, terms: &[String], method: &RankMethod) -> Result<ScoredList> {
        Ok(self.to_list(&self.scores(terms, method)?))
    }

    pub fn to_list(&self, dense: &[f64]) -> ScoredList {
        let items = dense
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .map(|(t, &s)| ScoredItem {
                id: self.taxonomy.id(TypeIdx(t as u32)).to_string(),
                score: s,
            })
            .collect();
        ScoredList::sorted(items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::KnowledgeBase;
    use crate::retrieval::{build_index, IndexOptions};
    use crate::text::tokenize;

    struct Fixture {
        kb: KnowledgeBase,
        index: EntityIndex,
        pseudo: PseudoTypeCorpus,
    }

    fn fixture(types: &str, entities: &str, assignments: &str, closure: bool) -> Fixture {
        let kb = KnowledgeBase::parse(types, entities, assignments, closure).unwrap();
        let index = build_index(&kb.corpus, IndexOptions::default());
        let pseudo = build_pseudo_docs(&kb.assoc, &index);
        Fixture { kb, index, pseudo }
    }

    impl Fixture {
        fn ranker(&self) -> TypeRanker<'_> {
            TypeRanker::new(&self.kb.taxonomy, &self.kb.assoc, &self.index, Some(&self.pseudo))
        }
    }

    fn basic() -> Fixture {
        fixture(
            "Vehicle\t\t\nCar\t\tVehicle\nBus\t\tVehicle\nPlace\t\t\n",
            "e1\tOne\tred car\ne2\tTwo\tred bus\ne3\tThree\tgreen field\n",
            "e1\tCar\ne2\tBus\n",
            true,
        )
    }

    #[test]
    fn pseudo_docs_hand_values() {
        let f = basic();
        let car = f.kb.taxonomy.get("Car").unwrap();
        let doc = f.pseudo.doc(car);
        assert_eq!(doc.term_freqs["red"], 1.0);
        assert_eq!(doc.term_freqs["car"], 1.0);
        assert_eq!(doc.length, 2.0);
        let vehicle = f.kb.taxonomy.get("Vehicle").unwrap();
        assert_eq!(f.pseudo.doc(vehicle).term_freqs["red"], 1.0);
        assert_eq!(f.pseudo.doc(vehicle).term_freqs["car"], 0.5);
        let place = f.kb.taxonomy.get("Place").unwrap();
        assert!(!f.pseudo.doc(place).has_entities);
        assert_eq!(f.pseudo.n_docs(), 3);
    }

    #[test]
    fn ec_single_entity_weight_one() {
        let f = fixture("T\t\t\nU\t\t\n", "e1\tx\tred\n", "e1\tT\n", true);
        let r = f.ranker();
        let q = tokenize("red");
        let s = r.score_ec(&q, "T", 5, RetrievalModel::Bm25).unwrap();
        let e = f.index.bm25_doc(&q, EntityIdx(0), &r.params);
        assert_eq!(s, e);
        assert_eq!(r.score_ec(&q, "U", 5, RetrievalModel::Bm25).unwrap(), 0.0);
        assert!(r.score_ec(&q, "V", 5, RetrievalModel::Bm25).is_err());
    }

    #[test]
    fn tc_edge_cases() {
        let f = basic();
        let r = f.ranker();
        assert_eq!(
            r.score_tc(&tokenize("zebra"), "Car", RetrievalModel::Bm25).unwrap(),
            0.0
        );
        assert_eq!(r.score_tc(&[], "Car", RetrievalModel::Lm).unwrap(), 1.0);
        // Empty extension scores 0 under both models.
        assert_eq!(r.score_tc(&[], "Place", RetrievalModel::Lm).unwrap(), 0.0);
        let no_pseudo = TypeRanker::new(&f.kb.taxonomy, &f.kb.assoc, &f.index, None);
        assert!(no_pseudo.score_tc(&[], "Car", RetrievalModel::Lm).is_err());
    }

    #[test]
    fn oracle_with_and_without_closure() {
        let rel = vec!["e1".to_string(), "e2".to_string(), "ghost".to_string()];
        let f = basic();
        let r = f.ranker();
        assert_eq!(r.score_oracle("Vehicle", &rel).unwrap(), 2);
        assert_eq!(r.score_oracle("Car", &rel).unwrap(), 1);
        assert_eq!(r.score_oracle("Car", &[]).unwrap(), 0);

        let f = fixture(
            "Vehicle\t\t\nCar\t\tVehicle\n",
            "e1\tOne\tred car\n",
            "e1\tCar\n",
            false,
        );
        assert_eq!(f.ranker().score_oracle("Vehicle", &rel[..1]).unwrap(), 0);
    }

    #[test]
    fn oracle_singleton_ranking() {
        let f = fixture("T\t\t\nU\t\t\n", "e1\tx\tred\ne2\tx\tblue\n", "e1\tT\ne2\tU\n", true);
        let list = f
            .ranker()
            .rank_types(&[], &RankMethod::Oracle { relevant: vec!["e1".into()] })
            .unwrap();
        assert_eq!(list.ids().collect::<Vec<_>>(), vec!["T"]);
        assert_eq!(list.items()[0].score, 1.0);
    }

    #[test]
    fn ec_types_come_from_retrieved_entities() {
        let f = basic();
        let r = f.ranker();
        let q = tokenize("red car");
        let list = r
            .rank_types(&q, &RankMethod::EntityCentric { model: RetrievalModel::Bm25, k: 1 })
            .unwrap();
        // Top entity is e1 (Car, Vehicle under closure).
        assert_eq!(list.ids().collect::<Vec<_>>(), vec!["Car", "Vehicle"]);
    }

    #[test]
    fn ec_is_linear_in_entity_scores() {
        let f = basic();
        let r = f.ranker();
        let ranking = r.entity_ranking(&tokenize("red"), 10, RetrievalModel::Bm25);
        let doubled: Vec<_> = ranking.iter().map(|&(e, s)| (e, 2.0 * s)).collect();
        let a = r.ec_from_ranking(&ranking);
        let b = r.ec_from_ranking(&doubled);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(2.0 * x, *y);
        }
        let la: Vec<String> = r.to_list(&a).ids().map(String::from).collect();
        let lb: Vec<String> = r.to_list(&b).ids().map(String::from).collect();
        assert_eq!(la, lb);
    }

    #[test]
    fn run_names() {
        let m = RankMethod::EntityCentric { model: RetrievalModel::Bm25, k: 20 };
        assert_eq!(m.run_name(), "ec-bm25-k20");
        assert_eq!(RankMethod::TypeCentric { model: RetrievalModel::Lm }.run_name(), "tc-lm");
    }
}
