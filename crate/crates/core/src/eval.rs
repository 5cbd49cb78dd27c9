//! Gain-weighted NDCG evaluation of type rankings.
//!
//! The gain of a type is the number of assessors who selected it. NIL votes
//! are dropped before evaluation, and queries judged NIL-only are removed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::kb::NIL_TOKEN;
use crate::ranking::{ScoredItem, ScoredList};
use crate::text::{load_with, tsv_records};

/// Graded type judgments: qid → type id → gain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeJudgments {
    queries: BTreeMap<String, BTreeMap<String, u32>>,
}

impl TypeJudgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: &str, type_id: &str, gain: u32) {
        self.queries
            .entry(qid.to_string())
            .or_default()
            .insert(type_id.to_string(), gain);
    }

    pub fn get(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.queries.get(qid)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u32>)> {
        self.queries.iter().map(|(q, g)| (q.as_str(), g))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Number of non-NIL types with positive gain for `qid`.
    pub fn n_main_types(&self, qid: &str) -> usize {
        self.get(qid).map_or(0, |g| {
            g.iter()
                .filter(|(t, &v)| v > 0 && t.as_str() != NIL_TOKEN)
                .count()
        })
    }

    pub fn to_tsv(&self, header: &[String]) -> String {
        let mut out = header_block(header);
        for (qid, gains) in &self.queries {
            for (t, g) in gains {
                let _ = writeln!(out, "{qid}\t{t}\t{g}");
            }
        }
        out
    }
}

pub(crate) fn header_block(header: &[String]) -> String {
    header.iter().map(|h| format!("# {h}\n")).collect()
}

/// Parses `type_qrels.tsv`: `qid<TAB>type_id<TAB>gain`.
pub fn parse_type_qrels(text: &str) -> Result<TypeJudgments> {
    let mut j = TypeJudgments::new();
    for (line, fields) in tsv_records(text) {
        if fields.len() != 3 {
            return Err(Error::parse(
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let (qid, t) = (fields[0].trim(), fields[1].trim());
        if qid.is_empty() || t.is_empty() {
            return Err(Error::parse(line, "empty qid or type id"));
        }
        let gain: u32 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("gain `{}` is not a non-negative integer", fields[2])))?;
        if j.get(qid).is_some_and(|g| g.contains_key(t)) {
            return Err(Error::parse(line, format!("duplicate judgment for ({qid}, {t})")));
        }
        j.insert(qid, t, gain);
    }
    Ok(j)
}

pub fn load_type_qrels(path: impl AsRef<Path>) -> Result<TypeJudgments> {
    load_with(path.as_ref(), parse_type_qrels)
}

/// Per-query type rankings produced by one system.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunFile {
    pub name: String,
    queries: BTreeMap<String, ScoredList>,
}

impl RunFile {
    pub fn new(name: impl Into<String>) -> Self {
        RunFile {
            name: name.into(),
            queries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, qid: &str, ranking: ScoredList) -> Result<()> {
        if self.queries.contains_key(qid) {
            return Err(Error::InvalidData(format!("qid `{qid}` appears twice in run")));
        }
        self.queries.insert(qid.to_string(), ranking);
        Ok(())
    }

    pub fn get(&self, qid: &str) -> Option<&ScoredList> {
        self.queries.get(qid)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ScoredList)> {
        self.queries.iter().map(|(q, l)| (q.as_str(), l))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// `qid<TAB>type_id<TAB>rank<TAB>score<TAB>run_name`, ranks from 1.
    pub fn to_tsv(&self, header: &[String]) -> String {
        let mut out = header_block(header);
        for (qid, list) in &self.queries {
            for (rank, item) in list.items().iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{qid}\t{}\t{}\t{}\t{}",
                    item.id,
                    rank + 1,
                    item.score,
                    self.name
                );
            }
        }
        out
    }
}

/// Parses a run file. Rows are re-sorted by score (ties by type id); the
/// rank column is validated but not trusted for ordering.
pub fn parse_run(text: &str) -> Result<RunFile> {
    let mut name: Option<String> = None;
    let mut rows: BTreeMap<String, Vec<ScoredItem>> = BTreeMap::new();
    for (line, fields) in tsv_records(text) {
        if fields.len() != 5 {
            return Err(Error::parse(
                line,
                format!("expected 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        let qid = fields[0].trim();
        let type_id = fields[1].trim();
        if qid.is_empty() || type_id.is_empty() {
            return Err(Error::parse(line, "empty qid or type id"));
        }
        fields[2]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(line, format!("bad rank `{}`", fields[2])))?;
        let score: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("bad score `{}`", fields[3])))?;
        if score.is_nan() {
            return Err(Error::parse(line, "score is NaN"));
        }
        let run_name = fields[4].trim();
        match &name {
            None => name = Some(run_name.to_string()),
            Some(n) if n != run_name => {
                return Err(Error::parse(
                    line,
                    format!("run name `{run_name}` differs from `{n}`"),
                ))
            }
            _ => {}
        }
        let list = rows.entry(qid.to_string()).or_default();
        if list.iter().any(|i| i.id == type_id) {
            return Err(Error::parse(line, format!("type `{type_id}` repeated for `{qid}`")));
        }
        list.push(ScoredItem {
            id: type_id.to_string(),
            score,
        });
    }
    let mut run = RunFile::new(name.unwrap_or_default());
    for (qid, items) in rows {
        run.queries.insert(qid, ScoredList::sorted(items));
    }
    Ok(run)
}

pub fn load_run(path: impl AsRef<Path>) -> Result<RunFile> {
    load_with(path.as_ref(), parse_run)
}

/// Parses `qid<TAB>category`.
pub fn parse_categories(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (line, fields) in tsv_records(text) {
        if fields.len() != 2 {
            return Err(Error::parse(
                line,
                format!("expected 2 tab-separated fields, found {}", fields.len()),
            ));
        }
        if out
            .insert(fields[0].trim().to_string(), fields[1].trim().to_string())
            .is_some()
        {
            return Err(Error::parse(line, format!("duplicate qid `{}`", fields[0])));
        }
    }
    Ok(out)
}

pub fn load_categories(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    load_with(path.as_ref(), parse_categories)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GainMode {
    /// DCG with the raw gain (trec_eval convention).
    #[default]
    Linear,
    /// DCG with 2^gain − 1.
    Exponential,
}

impl GainMode {
    fn apply(self, gain: u32) -> f64 {
        match self {
            GainMode::Linear => f64::from(gain),
            GainMode::Exponential => 2f64.powf(f64::from(gain)) - 1.0,
        }
    }
}

fn discount(rank0: usize) -> f64 {
    ((rank0 + 2) as f64).log2()
}

/// NDCG@k with a 1/log2(i+1) discount. Unjudged types have gain 0, NIL
/// entries are ignored, and a query without positive gain scores 0.
pub fn ndcg_at_k(ranking: &ScoredList, gains: &BTreeMap<String, u32>, k: usize, mode: GainMode) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument("NDCG cutoff must be at least 1".into()));
    }
    let gain_of = |id: &str| {
        if id == NIL_TOKEN {
            0
        } else {
            gains.get(id).copied().unwrap_or(0)
        }
    };
    let dcg: f64 = ranking
        .ids()
        .take(k)
        .enumerate()
        .map(|(i, id)| mode.apply(gain_of(id)) / discount(i))
        .sum();
    let mut ideal: Vec<u32> = gains
        .iter()
        .filter(|(t, _)| t.as_str() != NIL_TOKEN)
        .map(|(_, &g)| g)
        .filter(|&g| g > 0)
        .collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| mode.apply(g) / discount(i))
        .sum();
    Ok(if idcg > 0.0 { dcg / idcg } else { 0.0 })
}

/// Drops NIL entries and removes queries whose only positive label was NIL.
/// Remaining gains are left untouched.
pub fn filter_nil(judgments: &TypeJudgments) -> (TypeJudgments, Vec<String>) {
    let mut kept = TypeJudgments::new();
    let mut removed = Vec::new();
    for (qid, gains) in judgments.iter() {
        let had_nil = gains.get(NIL_TOKEN).is_some_and(|&g| g > 0);
        let rest: BTreeMap<String, u32> = gains
            .iter()
            .filter(|(t, _)| t.as_str() != NIL_TOKEN)
            .map(|(t, &g)| (t.clone(), g))
            .collect();
        if had_nil && rest.values().all(|&g| g == 0) {
            removed.push(qid.to_string());
        } else {
            kept.queries.insert(qid.to_string(), rest);
        }
    }
    (kept, removed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupStats {
    pub n: usize,
    /// Mean NDCG per cutoff.
    pub means: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub run_name: String,
    pub cutoffs: Vec<usize>,
    /// NDCG per cutoff for every evaluated query.
    pub per_query: BTreeMap<String, Vec<f64>>,
    pub overall: GroupStats,
    pub by_category: BTreeMap<String, GroupStats>,
    pub by_num_types: BTreeMap<usize, GroupStats>,
    /// Run qids without judgments.
    pub unknown_qids: Vec<String>,
    /// Judged qids without any positive gain.
    pub unjudged_qids: Vec<String>,
}

fn mean_stats<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, n_cut: usize) -> GroupStats {
    let mut sums = vec![0.0; n_cut];
    let mut n = 0;
    for row in rows {
        n += 1;
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let means = sums
        .into_iter()
        .map(|s| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    GroupStats { n, means }
}

/// Mean NDCG overall, per category and per number of main types.
///
/// Judged queries missing from the run score 0 and count towards the means.
pub fn evaluate_run(
    run: &RunFile,
    judgments: &TypeJudgments,
    cutoffs: &[usize],
    groups: Option<&BTreeMap<String, String>>,
    mode: GainMode,
) -> Result<EvalReport> {
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(Error::InvalidArgument("cutoffs must be non-empty and ≥ 1".into()));
    }
    let unknown_qids: Vec<String> = run
        .iter()
        .map(|(q, _)| q)
        .filter(|q| judgments.get(q).is_none())
        .map(String::from)
        .collect();
    for q in &unknown_qids {
        warn!("run `{}` has unjudged qid `{q}`; skipped", run.name);
    }
    let empty = ScoredList::default();
    let mut per_query = BTreeMap::new();
    let mut unjudged_qids = Vec::new();
    for (qid, gains) in judgments.iter() {
        if judgments.n_main_types(qid) == 0 {
            unjudged_qids.push(qid.to_string());
            continue;
        }
        let ranking = run.get(qid).unwrap_or(&empty);
        let values = cutoffs
            .iter()
            .map(|&k| ndcg_at_k(ranking, gains, k, mode))
            .collect::<Result<Vec<f64>>>()?;
        per_query.insert(qid.to_string(), values);
    }
    let n_cut = cutoffs.len();
    let overall = mean_stats(per_query.values(), n_cut);

    let mut by_category = BTreeMap::new();
    if let Some(groups) = groups {
        let mut members: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
        for (qid, v) in &per_query {
            if let Some(cat) = groups.get(qid) {
                members.entry(cat.as_str()).or_default().push(v);
            }
        }
        for (cat, rows) in members {
            by_category.insert(cat.to_string(), mean_stats(rows.into_iter(), n_cut));
        }
    }

    let mut buckets: BTreeMap<usize, Vec<&Vec<f64>>> = BTreeMap::new();
    for (qid, v) in &per_query {
        buckets.entry(judgments.n_main_types(qid)).or_default().push(v);
    }
    let by_num_types = buckets
        .into_iter()
        .map(|(n, rows)| (n, mean_stats(rows.into_iter(), n_cut)))
        .collect();

    Ok(EvalReport {
        run_name: run.name.clone(),
        cutoffs: cutoffs.to_vec(),
        per_query,
        overall,
        by_category,
        by_num_types,
        unknown_qids,
        unjudged_qids,
    })
}

impl EvalReport {
    /// Per-query values at cutoff position `i`, in qid order.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.per_query.values().map(|v| v[i]).collect()
    }

    pub fn to_tsv(&self, header: &[String], include_queries: bool) -> String {
        let mut out = header_block(header);
        out.push_str("scope\tgroup\tn");
        for k in &self.cutoffs {
            let _ = write!(out, "\tndcg@{k}");
        }
        out.push('\n');
        let mut row = |scope: &str, group: &str, stats: &GroupStats| {
            let _ = write!(out, "{scope}\t{group}\t{}", stats.n);
            for m in &stats.means {
                let _ = write!(out, "\t{m:.6}");
            }
            out.push('\n');
        };
        row("all", &self.run_name, &self.overall);
        for (cat, s) in &self.by_category {
            row("category", cat, s);
        }
        for (n, s) in &self.by_num_types {
            row("num_types", &n.to_string(), s);
        }
        if include_queries {
            for (qid, v) in &self.per_query {
                row(
                    "query",
                    qid,
                    &GroupStats {
                        n: 1,
                        means: v.clone(),
                    },
                );
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    /// The differences had zero variance; `p_value` is the limiting value.
    pub degenerate: bool,
}

/// Two-tailed paired t-test on matched per-query values.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least 2 pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1.0);
    if var.sqrt() <= 1e-12 * scale {
        let equal = mean.abs() <= 1e-12 * scale;
        warn!("paired t-test: differences have zero variance");
        return Ok(TTest {
            t: if equal { 0.0 } else { mean.signum() * f64::INFINITY },
            df,
            p_value: if equal { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TTest {
        t,
        df,
        p_value: p,
        degenerate: false,
    })
}
