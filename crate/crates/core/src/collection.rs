//! Test-collection construction: candidate pooling, vote aggregation,
//! same-path merging and agreement statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{header_block, RunFile, TypeJudgments};
use crate::kb::{TypeIdx, TypeTaxonomy, NIL_TOKEN};
use crate::text::{load_with, tsv_records};

pub const DEFAULT_POOL_DEPTH: usize = 10;

pub type Pool = BTreeMap<String, BTreeSet<String>>;

/// Union of the top-`depth` types of every run plus all oracle types.
pub fn build_pool(runs: &[RunFile], depth: usize, oracle: &Pool) -> Pool {
    let mut pool = Pool::new();
    for run in runs {
        for (qid, list) in run.iter() {
            pool.entry(qid.to_string())
                .or_default()
                .extend(list.ids().take(depth).map(String::from));
        }
    }
    for (qid, types) in oracle {
        pool.entry(qid.clone()).or_default().extend(types.iter().cloned());
    }
    pool
}

/// Every type an oracle run returned, per query.
pub fn oracle_types(run: &RunFile) -> Pool {
    run.iter()
        .map(|(q, l)| (q.to_string(), l.ids().map(String::from).collect()))
        .collect()
}

pub fn pool_to_tsv(pool: &Pool, header: &[String]) -> String {
    let mut out = header_block(header);
    for (qid, types) in pool {
        for t in types {
            let _ = writeln!(out, "{qid}\t{t}");
        }
    }
    out
}

/// Splits each query's pool into micro-tasks, one per top-level subtree.
pub fn partition_by_top_level(pool: &Pool, taxonomy: &TypeTaxonomy) -> Result<BTreeMap<String, BTreeMap<String, Vec<String>>>> {
    let mut out = BTreeMap::new();
    for (qid, types) in pool {
        let mut tasks: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for t in types {
            let idx = taxonomy.require(t)?;
            let top = taxonomy.id(taxonomy.top_level_ancestor(idx)).to_string();
            tasks.entry(top).or_default().push(t.clone());
        }
        out.insert(qid.clone(), tasks);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub worker_id: String,
    /// A type id or [`NIL_TOKEN`].
    pub label: String,
}

/// Crowd selections per query, one per worker.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    queries: BTreeMap<String, Vec<Annotation>>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, qid: &str, worker_id: &str, label: &str) -> Result<()> {
        let list = self.queries.entry(qid.to_string()).or_default();
        if list.iter().any(|a| a.worker_id == worker_id) {
            return Err(Error::InvalidData(format!(
                "worker `{worker_id}` selected twice for `{qid}`"
            )));
        }
        list.push(Annotation {
            worker_id: worker_id.to_string(),
            label: label.to_string(),
        });
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Annotation])> {
        self.queries.iter().map(|(q, a)| (q.as_str(), a.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Parses `annotations.tsv`: `qid<TAB>worker_id<TAB>type_id_or_<NIL>`.
pub fn parse_annotations(text: &str) -> Result<AnnotationSet> {
    let mut set = AnnotationSet::new();
    for (line, fields) in tsv_records(text) {
        if fields.len() != 3 {
            return Err(Error::parse(
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let (qid, worker, label) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
        if qid.is_empty() || worker.is_empty() || label.is_empty() {
            return Err(Error::parse(line, "empty field"));
        }
        set.add(qid, worker, label)
            .map_err(|e| Error::parse(line, e.to_string()))?;
    }
    Ok(set)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    load_with(path.as_ref(), parse_annotations)
}

pub type Votes = BTreeMap<String, BTreeMap<String, u32>>;

/// Number of workers selecting each label, per query.
pub fn aggregate_votes(ann: &AnnotationSet) -> Votes {
    ann.iter()
        .map(|(qid, list)| {
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for a in list {
                *counts.entry(a.label.clone()).or_default() += 1;
            }
            (qid.to_string(), counts)
        })
        .collect()
}

/// Moves the votes of every type to its most generic voted ancestor, so no
/// two voted types share a root-to-leaf path. NIL votes are untouched and
/// the vote total of each query is conserved.
pub fn merge_same_path(votes: &Votes, taxonomy: &TypeTaxonomy) -> Result<Votes> {
    let mut out = Votes::new();
    for (qid, counts) in votes {
        let mut voted: BTreeMap<TypeIdx, u32> = BTreeMap::new();
        let mut merged: BTreeMap<String, u32> = BTreeMap::new();
        for (label, &n) in counts {
            if n == 0 {
                continue;
            }
            if label == NIL_TOKEN {
                merged.insert(label.clone(), n);
            } else {
                voted.insert(taxonomy.require(label)?, n);
            }
        }
        for (&t, &n) in &voted {
            let target = taxonomy
                .ancestors(t)
                .filter(|a| voted.contains_key(a))
                .last()
                .unwrap_or(t);
            *merged.entry(taxonomy.id(target).to_string()).or_default() += n;
        }
        out.insert(qid.clone(), merged);
    }
    Ok(out)
}

pub fn votes_to_judgments(votes: &Votes) -> TypeJudgments {
    let mut j = TypeJudgments::new();
    for (qid, counts) in votes {
        for (t, &n) in counts {
            j.insert(qid, t, n);
        }
    }
    j
}

/// Fleiss' kappa over queries (items) and selected labels (categories).
///
/// Every query must be rated by the same number of workers, at least two.
/// Errors when only one category is ever used, since expected agreement is
/// then 1 and kappa is undefined.
pub fn fleiss_kappa(ann: &AnnotationSet) -> Result<f64> {
    let mut categories: BTreeMap<&str, usize> = BTreeMap::new();
    let mut raters: Option<usize> = None;
    for (qid, list) in ann.iter() {
        match raters {
            None => raters = Some(list.len()),
            Some(n) if n != list.len() => {
                return Err(Error::InvalidData(format!(
                    "query `{qid}` has {} ratings, expected {n}",
                    list.len()
                )))
            }
            _ => {}
        }
        for a in list {
            let next = categories.len();
            categories.entry(a.label.as_str()).or_insert(next);
        }
    }
    let n = raters.ok_or_else(|| Error::InvalidData("no annotations".into()))?;
    if n < 2 {
        return Err(Error::InvalidData("Fleiss' kappa needs at least 2 raters per item".into()));
    }
    let matrix: Vec<Vec<u32>> = ann
        .iter()
        .map(|(_, list)| {
            let mut row = vec![0u32; categories.len()];
            for a in list {
                row[categories[a.label.as_str()]] += 1;
            }
            row
        })
        .collect();
    fleiss_kappa_counts(&matrix)
}

/// Fleiss' kappa from an item × category count matrix.
pub fn fleiss_kappa_counts(matrix: &[Vec<u32>]) -> Result<f64> {
    let n_items = matrix.len();
    if n_items == 0 {
        return Err(Error::InvalidData("no items".into()));
    }
    let n: u32 = matrix[0].iter().sum();
    if matrix.iter().any(|r| r.iter().sum::<u32>() != n) {
        return Err(Error::InvalidData("items have unequal rater counts".into()));
    }
    if n < 2 {
        return Err(Error::InvalidData("Fleiss' kappa needs at least 2 raters per item".into()));
    }
    let n = f64::from(n);
    let n_cat = matrix[0].len();
    let p_bar = matrix
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| f64::from(c) * f64::from(c)).sum();
            (sq - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / n_items as f64;
    let total = n * n_items as f64;
    let p_e: f64 = (0..n_cat)
        .map(|j| {
            let pj = matrix.iter().map(|r| f64::from(r[j])).sum::<f64>() / total;
            pj * pj
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::InvalidData(
            "kappa undefined: a single category received every rating".into(),
        ));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DistributionBucket {
    pub queries: usize,
    /// Queries in the bucket that received any NIL vote.
    pub queries_with_nil: usize,
    /// NIL votes over all votes in the bucket.
    pub nil_vote_share: f64,
}

/// Histogram of queries by number of main (positive-gain, non-NIL) types.
pub fn annotation_distribution(judgments: &TypeJudgments) -> BTreeMap<usize, DistributionBucket> {
    let mut acc: BTreeMap<usize, (usize, usize, u64, u64)> = BTreeMap::new();
    for (qid, gains) in judgments.iter() {
        let nil = u64::from(gains.get(NIL_TOKEN).copied().unwrap_or(0));
        let all: u64 = gains.values().map(|&g| u64::from(g)).sum();
        let e = acc.entry(judgments.n_main_types(qid)).or_default();
        e.0 += 1;
        e.1 += usize::from(nil > 0);
        e.2 += nil;
        e.3 += all;
    }
    acc.into_iter()
        .map(|(k, (q, qn, nil, all))| {
            (
                k,
                DistributionBucket {
                    queries: q,
                    queries_with_nil: qn,
                    nil_vote_share: if all > 0 { nil as f64 / all as f64 } else { 0.0 },
                },
            )
        })
        .collect()
}
