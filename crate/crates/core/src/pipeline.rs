//! End-to-end experiment: index, baseline runs, features, cross-validated
//! LTR, metrics and a summary table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{
    evaluate_run, filter_nil, header_block, load_categories, load_type_qrels, paired_ttest, EvalReport, GainMode,
    RunFile, TypeJudgments,
};
use crate::features::{load_embeddings, FeatureConfig, FeatureExtractor, FeatureTable, RuleTagger};
use crate::kb::{KnowledgeBase, TypeIdx};
use crate::ltr::{cross_validate, encode_model, Dataset, ForestConfig, ForestModel, DEFAULT_MAX_GAIN};
use crate::queries::{load_entity_qrels, load_queries, Query};
use crate::retrieval::{build_index, encode_index, IndexOptions, RetrievalModel, RetrievalParams};
use crate::text::write_string;
use crate::typescore::{build_pseudo_docs, RankMethod, TcBackground, TypeRanker, DEFAULT_EC_K};

/// Tool version, seed and input digests written at the top of every output.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    /// (file name, sha256 hex)
    pub inputs: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(seed: u64) -> Self {
        Provenance {
            version: format!("targettype {}", env!("CARGO_PKG_VERSION")),
            seed,
            inputs: Vec::new(),
        }
    }

    /// Records the digest of a file, labelled with its file name.
    pub fn add_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.inputs.push((name, sha256_hex(&bytes)));
        Ok(())
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![self.version.clone(), format!("seed {}", self.seed)];
        out.extend(self.inputs.iter().map(|(n, d)| format!("input {n} sha256={d}")));
        out
    }

    /// The lines joined for binary formats that carry one string.
    pub fn joined(&self) -> String {
        self.lines().join("\n")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Which types receive feature vectors for each query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Candidates {
    AllTypes,
    /// Union of the baseline runs' top-`depth` types plus judged types.
    Pooled { depth: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub types: PathBuf,
    pub entities: PathBuf,
    pub entity_types: PathBuf,
    pub queries: PathBuf,
    pub type_qrels: PathBuf,
    pub embeddings: PathBuf,
    pub categories: Option<PathBuf>,
    /// Relevant entities for the oracle run, when available.
    pub entity_qrels: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub params: RetrievalParams,
    pub tc_background: TcBackground,
    pub ec_k: usize,
    pub folds: usize,
    pub forest: ForestConfig,
    pub max_gain: f64,
    pub candidates: Candidates,
    pub closure: bool,
    pub include_names: bool,
    pub cutoffs: Vec<usize>,
}

impl PipelineConfig {
    /// Defaults for everything but the paths.
    pub fn new(
        types: PathBuf,
        entities: PathBuf,
        entity_types: PathBuf,
        queries: PathBuf,
        type_qrels: PathBuf,
        embeddings: PathBuf,
        out_dir: PathBuf,
    ) -> Self {
        PipelineConfig {
            types,
            entities,
            entity_types,
            queries,
            type_qrels,
            embeddings,
            categories: None,
            entity_qrels: None,
            out_dir,
            params: RetrievalParams::default(),
            tc_background: TcBackground::Types,
            ec_k: DEFAULT_EC_K,
            folds: 5,
            forest: ForestConfig::default(),
            max_gain: DEFAULT_MAX_GAIN,
            candidates: Candidates::AllTypes,
            closure: true,
            include_names: false,
            cutoffs: vec![1, 5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let required = [
            &self.types,
            &self.entities,
            &self.entity_types,
            &self.queries,
            &self.type_qrels,
            &self.embeddings,
        ];
        for p in required.into_iter().chain(self.categories.iter()).chain(self.entity_qrels.iter()) {
            if !p.is_file() {
                return Err(Error::InvalidArgument(format!("input file {} does not exist", p.display())));
            }
        }
        if self.ec_k == 0 {
            return Err(Error::InvalidArgument("K must be ≥ 1".into()));
        }
        if !self.cutoffs.contains(&5) || !self.cutoffs.contains(&1) {
            return Err(Error::InvalidArgument("cutoffs must include 1 and 5".into()));
        }
        self.params.validate()?;
        self.forest.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub n: usize,
    pub ndcg1: f64,
    pub ndcg5: f64,
    /// Paired t-test against LTR on NDCG@5 (absent for LTR itself).
    pub p_vs_ltr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub rows: Vec<SummaryRow>,
    pub reports: Vec<EvalReport>,
    pub summary_path: PathBuf,
}

pub fn summary_to_tsv(rows: &[SummaryRow], header: &[String]) -> String {
    let mut out = header_block(header);
    out.push_str("method\tn\tndcg@1\tndcg@5\tp_vs_ltr@5\n");
    for r in rows {
        let _ = write!(out, "{}\t{}\t{:.4}\t{:.4}\t", r.method, r.n, r.ndcg1, r.ndcg5);
        match r.p_vs_ltr {
            Some(p) => {
                let _ = writeln!(out, "{p:.4}");
            }
            None => out.push_str("-\n"),
        }
    }
    out
}

/// Label used in summary tables.
pub fn method_label(method: &RankMethod) -> String {
    match method {
        RankMethod::EntityCentric { model, k } => format!("EC-{} K={k}", model_label(*model)),
        RankMethod::TypeCentric { model } => format!("TC-{}", model_label(*model)),
        RankMethod::Oracle { .. } => "Oracle".into(),
    }
}

fn model_label(m: RetrievalModel) -> &'static str {
    match m {
        RetrievalModel::Bm25 => "BM25",
        RetrievalModel::Lm => "LM",
    }
}

/// Ranks all types for every query with one method.
pub fn rank_run(ranker: &TypeRanker<'_>, queries: &[Query], method: &RankMethod) -> Result<RunFile> {
    let lists = queries
        .par_iter()
        .map(|q| ranker.rank_types(&q.terms(), method))
        .collect::<Result<Vec<_>>>()?;
    let mut run = RunFile::new(method.run_name());
    for (q, list) in queries.iter().zip(lists) {
        run.insert(&q.qid, list)?;
    }
    Ok(run)
}

/// Feature vectors for the given candidates of every query.
pub fn extract_table(
    extractor: &FeatureExtractor<'_>,
    queries: &[Query],
    candidates: &BTreeMap<String, Vec<TypeIdx>>,
    judgments: Option<&TypeJudgments>,
) -> Result<FeatureTable> {
    let per_query = queries
        .par_iter()
        .map(|q| {
            let types = candidates.get(&q.qid).map_or(&[][..], Vec::as_slice);
            extractor.extract_query(&q.qid, &q.text, types)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable::from_vectors(per_query.into_iter().flatten().collect(), judgments))
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| {
        log::error!("pipeline stage `{name}` failed");
        Error::Stage {
            stage: name.to_string(),
            source: Box::new(e),
        }
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    let mut prov = Provenance::new(cfg.forest.seed);
    let inputs = [
        Some(&cfg.types),
        Some(&cfg.entities),
        Some(&cfg.entity_types),
        Some(&cfg.queries),
        Some(&cfg.type_qrels),
        Some(&cfg.embeddings),
        cfg.categories.as_ref(),
        cfg.entity_qrels.as_ref(),
    ];
    for p in inputs.into_iter().flatten() {
        prov.add_file(p)?;
    }
    let header = prov.lines();

    let (kb, queries, judgments, embeddings, groups, entity_qrels) = stage("load", (|| {
        let kb = KnowledgeBase::load(&cfg.types, &cfg.entities, &cfg.entity_types, cfg.closure)?;
        let queries = load_queries(&cfg.queries)?;
        let (judgments, removed) = filter_nil(&load_type_qrels(&cfg.type_qrels)?);
        if !removed.is_empty() {
            log::info!("{} NIL-only queries removed from evaluation", removed.len());
        }
        let embeddings = load_embeddings(&cfg.embeddings)?;
        let groups = cfg.categories.as_ref().map(load_categories).transpose()?;
        let entity_qrels = cfg.entity_qrels.as_ref().map(load_entity_qrels).transpose()?;
        Ok((kb, queries, judgments, embeddings, groups, entity_qrels))
    })())?;

    let index = build_index(
        &kb.corpus,
        IndexOptions {
            include_names: cfg.include_names,
        },
    );
    stage("index", write_bytes(&out.join("index.bin"), &encode_index(&index, &prov.joined())))?;
    let pseudo = build_pseudo_docs(&kb.assoc, &index);
    let mut ranker = TypeRanker::new(&kb.taxonomy, &kb.assoc, &index, Some(&pseudo));
    ranker.params = cfg.params;
    ranker.background = cfg.tc_background;

    let methods = [
        RankMethod::EntityCentric {
            model: RetrievalModel::Bm25,
            k: cfg.ec_k,
        },
        RankMethod::EntityCentric {
            model: RetrievalModel::Lm,
            k: cfg.ec_k,
        },
        RankMethod::TypeCentric {
            model: RetrievalModel::Bm25,
        },
        RankMethod::TypeCentric {
            model: RetrievalModel::Lm,
        },
    ];
    let mut runs = Vec::new();
    for m in &methods {
        let run = stage("rank", rank_run(&ranker, &queries, m))?;
        stage("rank", write_string(&out.join(format!("runs/{}.tsv", run.name)), &run.to_tsv(&header)))?;
        runs.push((method_label(m), run));
    }
    if let Some(eq) = &entity_qrels {
        let mut oracle = RunFile::new("oracle");
        for q in &queries {
            let rel = eq.get(&q.qid).cloned().unwrap_or_default();
            oracle.insert(&q.qid, ranker.to_list(&ranker.oracle_scores(&rel)))?;
        }
        stage("rank", write_string(&out.join("runs/oracle.tsv"), &oracle.to_tsv(&header)))?;
    }

    let candidates: BTreeMap<String, Vec<TypeIdx>> = match cfg.candidates {
        Candidates::AllTypes => {
            let all: Vec<TypeIdx> = kb.taxonomy.iter().collect();
            queries.iter().map(|q| (q.qid.clone(), all.clone())).collect()
        }
        Candidates::Pooled { depth } => {
            let baseline: Vec<RunFile> = runs.iter().map(|(_, r)| r.clone()).collect();
            let mut pool = crate::collection::build_pool(&baseline, depth, &BTreeMap::new());
            for (qid, gains) in judgments.iter() {
                pool.entry(qid.to_string()).or_default().extend(gains.keys().cloned());
            }
            pool.into_iter()
                .map(|(q, types)| {
                    let idx = types
                        .iter()
                        .filter_map(|t| kb.taxonomy.get(t))
                        .collect::<Vec<_>>();
                    (q, idx)
                })
                .collect()
        }
    };
    let tagger = RuleTagger;
    let extractor = FeatureExtractor::new(ranker, &embeddings, &tagger, FeatureConfig::default())?;
    let table = stage("features", extract_table(&extractor, &queries, &candidates, Some(&judgments)))?;
    stage("features", write_string(&out.join("features.tsv"), &table.to_tsv(&header)))?;

    let cv = stage("ltr", cross_validate(&table, cfg.folds, &cfg.forest, cfg.max_gain))?;
    stage("ltr", write_string(&out.join("runs/ltr.tsv"), &cv.run.to_tsv(&header)))?;
    stage("ltr", write_string(&out.join("folds.tsv"), &cv.folds_to_tsv(&header)))?;
    let model = stage(
        "ltr",
        Dataset::from_table(&table, cfg.max_gain).and_then(|d| ForestModel::train(&d, &cfg.forest)),
    )?;
    stage("ltr", write_string(&out.join("model.jsonl"), &encode_model(&model, &header)?))?;
    runs.push(("LTR".into(), cv.run));

    let mut reports = Vec::new();
    let mut metrics = header_block(&header);
    for (_, run) in &runs {
        let r = stage(
            "eval",
            evaluate_run(run, &judgments, &cfg.cutoffs, groups.as_ref(), GainMode::Linear),
        )?;
        metrics.push_str(&r.to_tsv(&[], false));
        reports.push(r);
    }
    stage("eval", write_string(&out.join("metrics.tsv"), &metrics))?;

    let pos = |k: usize| cfg.cutoffs.iter().position(|&c| c == k).unwrap_or(0);
    let (i1, i5) = (pos(1), pos(5));
    let ltr5 = reports.last().map(|r| r.column(i5)).unwrap_or_default();
    let mut rows = Vec::new();
    for ((label, _), r) in runs.iter().zip(&reports) {
        let p_vs_ltr = if label == "LTR" {
            None
        } else {
            // Too few queries for a test is not a failure of the run.
            paired_ttest(&r.column(i5), &ltr5).ok().map(|t| t.p_value)
        };
        rows.push(SummaryRow {
            method: label.clone(),
            n: r.overall.n,
            ndcg1: r.overall.means[i1],
            ndcg5: r.overall.means[i5],
            p_vs_ltr,
        });
    }
    let summary_path = out.join("summary.tsv");
    stage("eval", write_string(&summary_path, &summary_to_tsv(&rows, &header)))?;
    Ok(PipelineReport {
        rows,
        reports,
        summary_path,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
