//! Query-grouped cross-validation and the incremental-feature ablation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, ForestConfig, ForestModel};
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, header_block, GainMode, RunFile};
use crate::features::{FeatureTable, FEATURE_NAMES};
use crate::ranking::ScoredList;

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub run: RunFile,
    /// qid → fold number (0-based).
    pub folds: BTreeMap<String, usize>,
}

impl CvResult {
    /// `qid<TAB>fold` manifest.
    pub fn folds_to_tsv(&self, header: &[String]) -> String {
        let mut out = header_block(header);
        for (q, f) in &self.folds {
            let _ = writeln!(out, "{q}\t{f}");
        }
        out
    }
}

/// Assigns qids to `k` folds: sorted qids are shuffled with `seed` and dealt
/// round-robin.
pub fn assign_folds(qids: &[String], k: usize, seed: u64) -> Result<BTreeMap<String, usize>> {
    let mut sorted: Vec<String> = qids.to_vec();
    sorted.sort();
    sorted.dedup();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if sorted.len() < k {
        return Err(Error::InvalidData(format!(
            "{} queries cannot fill {k} folds",
            sorted.len()
        )));
    }
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(sorted.into_iter().enumerate().map(|(i, q)| (q, i % k)).collect())
}

/// Ranks every query with a forest trained on the other folds.
pub fn cross_validate(table: &FeatureTable, k: usize, cfg: &ForestConfig, max_gain: f64) -> Result<CvResult> {
    cfg.validate()?;
    let groups = table.groups();
    let qids: Vec<String> = groups.keys().map(|q| q.to_string()).collect();
    let folds = assign_folds(&qids, k, cfg.seed)?;
    let mut run = RunFile::new("ltr");
    for fold in 0..k {
        let (test, train): (Vec<_>, Vec<_>) = groups.iter().partition(|(q, _)| folds[**q] == fold);
        let train_rows = train.iter().flat_map(|(_, rows)| rows.iter().copied());
        let data = Dataset::from_table_rows(table, train_rows, max_gain)?;
        log::info!("fold {fold}: training on {} rows", data.len());
        let model = ForestModel::train(&data, cfg)?;
        for (qid, rows) in test {
            let scored = rows
                .iter()
                .map(|&i| {
                    let r = &table.rows[i];
                    model.predict(&r.values).map(|s| (r.type_id.clone(), s))
                })
                .collect::<Result<Vec<_>>>()?;
            run.insert(qid, ScoredList::from_scores(scored)?)?;
        }
    }
    Ok(CvResult { run, folds })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub size: usize,
    /// Name of the feature added at this step.
    pub added: String,
    pub ndcg1: f64,
    pub ndcg5: f64,
}

fn feature_name(i: usize, n: usize) -> String {
    if n == FEATURE_NAMES.len() {
        FEATURE_NAMES[i].to_string()
    } else {
        format!("f{:02}", i + 1)
    }
}

/// Cross-validated NDCG@1/@5 using the top-i features by importance of a
/// model trained on all rows, for i = 1..n. Selected columns keep their
/// original order, so the last row equals plain cross-validation.
pub fn feature_ablation(
    table: &FeatureTable,
    k: usize,
    cfg: &ForestConfig,
    max_gain: f64,
) -> Result<Vec<AblationRow>> {
    let full = ForestModel::train(&Dataset::from_table(table, max_gain)?, cfg)?;
    let order = full.importance_order();
    let judgments = table.judgments();
    let mut rows = Vec::with_capacity(order.len());
    for i in 1..=order.len() {
        let mut cols = order[..i].to_vec();
        cols.sort_unstable();
        let sub = table.select_columns(&cols)?;
        let cv = cross_validate(&sub, k, cfg, max_gain)?;
        let report = evaluate_run(&cv.run, &judgments, &[1, 5], None, GainMode::Linear)?;
        log::info!("ablation size {i}: {:?}", report.overall.means);
        rows.push(AblationRow {
            size: i,
            added: feature_name(order[i - 1], table.n_features),
            ndcg1: report.overall.means[0],
            ndcg5: report.overall.means[1],
        });
    }
    Ok(rows)
}

pub fn ablation_to_tsv(rows: &[AblationRow], header: &[String]) -> String {
    let mut out = header_block(header);
    out.push_str("size\tadded\tndcg@1\tndcg@5\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{:.6}\t{:.6}", r.size, r.added, r.ndcg1, r.ndcg5);
    }
    out
}
