//! The 25-dimensional representation of a (query, type) pair.
//!
//! | rows  | feature                                            |
//! |-------|----------------------------------------------------|
//! | 1–5   | entity-centric BM25 score, K ∈ {5, 10, 20, 50, 100} |
//! | 6–10  | entity-centric LM score, same K grid               |
//! | 11–12 | type-centric BM25 / LM score                       |
//! | 13–16 | normalized depth, #children, #siblings, #entities  |
//! | 17–19 | label length, label idf sum, label idf average     |
//! | 20–22 | Jaccard over unigrams, bigrams, nouns              |
//! | 23–25 | embedding similarity: centroid, max, average       |

mod embeddings;
mod table;

pub use embeddings::{cosine, load_embeddings, parse_embeddings, EmbeddingTable};
pub use table::{load_feature_table, parse_feature_table, FeatureRow, FeatureTable};

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::kb::{TaxonomyFeatures, TypeIdx};
use crate::retrieval::{EntityIndex, RetrievalModel};
use crate::text::{is_function_word, tokenize};
use crate::typescore::TypeRanker;

pub const NUM_FEATURES: usize = 25;

/// Entity-centric cutoffs for rows 1–10, in row order.
pub const K_GRID: [usize; 5] = [5, 10, 20, 50, 100];

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "ec_bm25_k5",
    "ec_bm25_k10",
    "ec_bm25_k20",
    "ec_bm25_k50",
    "ec_bm25_k100",
    "ec_lm_k5",
    "ec_lm_k10",
    "ec_lm_k20",
    "ec_lm_k50",
    "ec_lm_k100",
    "tc_bm25",
    "tc_lm",
    "depth",
    "children",
    "siblings",
    "entities",
    "length",
    "idf_sum",
    "idf_avg",
    "jterms_1",
    "jterms_2",
    "jnouns",
    "sim_aggr",
    "sim_max",
    "sim_avg",
];

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub qid: String,
    pub type_id: String,
    pub values: [f64; NUM_FEATURES],
}

impl FeatureVector {
    /// Checks the declared value range of every row.
    pub fn check_ranges(&self) -> Result<()> {
        let v = &self.values;
        let bad = |row: usize, what: &str| {
            Err(Error::InvalidData(format!(
                "({}, {}): feature {} = {} {what}",
                self.qid,
                self.type_id,
                row + 1,
                v[row]
            )))
        };
        for (row, &x) in v.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return bad(row, "is not a finite non-negative value");
            }
        }
        for row in (5..10).chain([11, 12]).chain(19..25) {
            if v[row] > 1.0 {
                return bad(row, "exceeds 1");
            }
        }
        if v[16] < 1.0 {
            return bad(16, "is below 1");
        }
        Ok(())
    }
}

/// Marks which tokens of a sequence are nouns.
pub trait NounTagger: Send + Sync {
    fn tag_nouns(&self, tokens: &[String]) -> Vec<bool>;
}

/// Rule-based noun guesser: a token is a noun unless it is a function word,
/// a number, or ends in a common adjective/adverb suffix.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleTagger;

/// (suffix, minimum token length for the rule to apply)
const NON_NOUN_SUFFIXES: &[(&str, usize)] = &[
    ("est", 7),
    ("ly", 7),
    ("ous", 5),
    ("ful", 5),
    ("able", 6),
    ("ible", 6),
    ("less", 6),
];

impl RuleTagger {
    pub fn is_noun(token: &str) -> bool {
        if is_function_word(token) || !token.chars().any(char::is_alphabetic) {
            return false;
        }
        let len = token.chars().count();
        !NON_NOUN_SUFFIXES
            .iter()
            .any(|&(suffix, min_len)| len >= min_len && token.ends_with(suffix))
    }
}

impl NounTagger for RuleTagger {
    fn tag_nouns(&self, tokens: &[String]) -> Vec<bool> {
        tokens.iter().map(|t| Self::is_noun(t)).collect()
    }
}

/// Label idf statistics with idf(w) = max(0, ln(N / (1 + df(w)))).
pub fn idf_stats(label_tokens: &[String], index: &EntityIndex) -> (f64, f64) {
    if label_tokens.is_empty() {
        return (0.0, 0.0);
    }
    let n = index.n_docs() as f64;
    let sum: f64 = label_tokens
        .iter()
        .map(|w| (n / (1.0 + index.df(w) as f64)).ln().max(0.0))
        .sum();
    (sum, sum / label_tokens.len() as f64)
}

fn ngrams(tokens: &[String], n: usize) -> HashSet<&[String]> {
    if n == 0 {
        return HashSet::new();
    }
    tokens.windows(n).collect()
}

fn jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

/// Jaccard similarity of the n-gram sets of two token sequences.
pub fn jaccard_ngrams(query: &[String], label: &[String], n: usize) -> f64 {
    jaccard(&ngrams(query, n), &ngrams(label, n))
}

/// Unigram Jaccard restricted to tokens tagged as nouns.
pub fn jaccard_nouns(query: &[String], label: &[String], tagger: &dyn NounTagger) -> f64 {
    let nouns = |tokens: &[String]| -> HashSet<String> {
        tokens
            .iter()
            .zip(tagger.tag_nouns(tokens))
            .filter(|(_, noun)| *noun)
            .map(|(t, _)| t.clone())
            .collect()
    };
    jaccard(&nouns(query), &nouns(label))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EmbeddingSims {
    pub aggr: f64,
    pub max: f64,
    pub avg: f64,
}

/// Vectors of the content words of `tokens`: not a function word and
/// present in the table.
pub fn content_vectors<'e>(tokens: &[String], emb: &'e EmbeddingTable) -> Vec<&'e [f64]> {
    tokens
        .iter()
        .filter(|t| !is_function_word(t))
        .filter_map(|t| emb.get(t))
        .collect()
}

fn centroid(vectors: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    for v in vectors {
        for (a, x) in c.iter_mut().zip(v.iter()) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    c.iter_mut().for_each(|a| *a /= n);
    c
}

/// Centroid cosine and max/mean pairwise cosine over content words.
/// All three are 0 when either side has no content word. With `clamp`,
/// negative cosines become 0.
pub fn embedding_sims(query: &[String], label: &[String], emb: &EmbeddingTable, clamp: bool) -> EmbeddingSims {
    let qv = content_vectors(query, emb);
    let tv = content_vectors(label, emb);
    if qv.is_empty() || tv.is_empty() {
        return EmbeddingSims::default();
    }
    let fix = |c: f64| if clamp { c.max(0.0) } else { c };
    let aggr = fix(cosine(&centroid(&qv, emb.dim()), &centroid(&tv, emb.dim())));
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for q in &qv {
        for t in &tv {
            let c = fix(cosine(q, t));
            max = max.max(c);
            sum += c;
        }
    }
    EmbeddingSims {
        aggr,
        max,
        avg: sum / (qv.len() * tv.len()) as f64,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    /// Must equal [`K_GRID`]; rows 1–10 have a fixed meaning.
    pub k_grid: Vec<usize>,
    /// Clamp cosine similarities at 0 so rows 23–25 stay in [0, 1].
    pub clamp_cosines: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            k_grid: K_GRID.to_vec(),
            clamp_cosines: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_grid != K_GRID {
            return Err(Error::InvalidArgument(format!(
                "the entity-centric K grid is fixed at {K_GRID:?}, got {:?}",
                self.k_grid
            )));
        }
        Ok(())
    }
}

/// Per-query scores shared by all candidate types.
struct QueryScores {
    terms: Vec<String>,
    ec_bm25: Vec<Vec<f64>>,
    ec_lm: Vec<Vec<f64>>,
    tc_bm25: Vec<f64>,
    tc_lm: Vec<f64>,
}

pub struct FeatureExtractor<'a> {
    ranker: TypeRanker<'a>,
    embeddings: &'a EmbeddingTable,
    tagger: &'a dyn NounTagger,
    config: FeatureConfig,
}

impl<'a> FeatureExtractor<'a> {
    /// `ranker` must carry pseudo type documents.
    pub fn new(
        ranker: TypeRanker<'a>,
        embeddings: &'a EmbeddingTable,
        tagger: &'a dyn NounTagger,
        config: FeatureConfig,
    ) -> Result<Self> {
        config.validate()?;
        if ranker.pseudo.is_none() {
            return Err(Error::InvalidArgument(
                "feature extraction needs pseudo type documents".into(),
            ));
        }
        Ok(FeatureExtractor {
            ranker,
            embeddings,
            tagger,
            config,
        })
    }

    fn query_scores(&self, query_text: &str) -> Result<QueryScores> {
        let terms = tokenize(query_text);
        let k_max = K_GRID[K_GRID.len() - 1];
        let ec = |model| {
            let ranking = self.ranker.entity_ranking(&terms, k_max, model);
            K_GRID
                .iter()
                .map(|&k| self.ranker.ec_from_ranking(&ranking[..k.min(ranking.len())]))
                .collect::<Vec<_>>()
        };
        Ok(QueryScores {
            ec_bm25: ec(RetrievalModel::Bm25),
            ec_lm: ec(RetrievalModel::Lm),
            tc_bm25: self.ranker.tc_scores(&terms, RetrievalModel::Bm25)?,
            tc_lm: self.ranker.tc_scores(&terms, RetrievalModel::Lm)?,
            terms,
        })
    }

    fn vector(&self, qid: &str, scores: &QueryScores, t: TypeIdx) -> FeatureVector {
        let tax = self.ranker.taxonomy;
        let node = tax.node(t);
        let label = &node.label_tokens;
        let q = &scores.terms;
        let i = t.index();
        let kb = TaxonomyFeatures::of(tax, self.ranker.assoc, t);
        let (idf_sum, idf_avg) = idf_stats(label, self.ranker.index);
        let sims = embedding_sims(q, label, self.embeddings, self.config.clamp_cosines);

        let mut v = [0.0; NUM_FEATURES];
        for (g, _) in K_GRID.iter().enumerate() {
            v[g] = scores.ec_bm25[g][i];
            v[5 + g] = scores.ec_lm[g][i];
        }
        v[10] = scores.tc_bm25[i];
        v[11] = scores.tc_lm[i];
        v[12] = kb.depth_norm;
        v[13] = kb.n_children as f64;
        v[14] = kb.n_siblings as f64;
        v[15] = kb.n_entities as f64;
        v[16] = label.len() as f64;
        v[17] = idf_sum;
        v[18] = idf_avg;
        v[19] = jaccard_ngrams(q, label, 1);
        v[20] = jaccard_ngrams(q, label, 2);
        v[21] = jaccard_nouns(q, label, self.tagger);
        v[22] = sims.aggr;
        v[23] = sims.max;
        v[24] = sims.avg;
        FeatureVector {
            qid: qid.to_string(),
            type_id: node.type_id.clone(),
            values: v,
        }
    }

    pub fn extract(&self, qid: &str, query_text: &str, type_id: &str) -> Result<FeatureVector> {
        let t = self.ranker.taxonomy.require(type_id)?;
        let scores = self.query_scores(query_text)?;
        Ok(self.vector(qid, &scores, t))
    }

    /// Feature vectors for many candidate types of one query.
    pub fn extract_query(&self, qid: &str, query_text: &str, types: &[TypeIdx]) -> Result<Vec<FeatureVector>> {
        let scores = self.query_scores(query_text)?;
        Ok(types.iter().map(|&t| self.vector(qid, &scores, t)).collect())
    }
}
