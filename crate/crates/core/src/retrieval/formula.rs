//! Term-level scoring formulas shared by entity and pseudo-type retrieval.
//! Frequencies and lengths are real-valued so fractional pseudo counts work.

use super::RetrievalParams;

/// Non-negative BM25 idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
pub fn bm25_idf(n_docs: f64, df: f64) -> f64 {
    (1.0 + (n_docs - df + 0.5) / (df + 0.5)).ln()
}

pub fn bm25_term(tf: f64, doc_len: f64, avg_doc_len: f64, idf: f64, params: &RetrievalParams) -> f64 {
    if tf <= 0.0 {
        return 0.0;
    }
    let rel_len = if avg_doc_len > 0.0 { doc_len / avg_doc_len } else { 1.0 };
    let norm = params.k1 * (1.0 - params.b + params.b * rel_len);
    idf * tf * (params.k1 + 1.0) / (tf + norm)
}

/// Dirichlet-smoothed query likelihood
/// Π_i (tf_i + mu·P(q_i|C)) / (|d| + mu), accumulated in log space.
///
/// Returns 0 if any background probability is 0 and 1 for an empty query.
pub fn lm_likelihood(tfs: impl IntoIterator<Item = f64>, doc_len: f64, background: &[f64], mu: f64) -> f64 {
    if background.iter().any(|&p| p <= 0.0) {
        return 0.0;
    }
    let denom = (doc_len + mu).ln();
    let log: f64 = tfs
        .into_iter()
        .zip(background)
        .map(|(tf, &p)| (tf + mu * p).ln() - denom)
        .sum();
    log.exp()
}
