use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use targettype::collection::{
    aggregate_votes, annotation_distribution, build_pool, fleiss_kappa, load_annotations, merge_same_path,
    oracle_types, partition_by_top_level, pool_to_tsv, votes_to_judgments, Pool,
};
use targettype::eval::{
    evaluate_run, load_categories, load_run, load_type_qrels, paired_ttest, GainMode, RunFile,
};
use targettype::features::{load_embeddings, load_feature_table, FeatureConfig, FeatureExtractor, RuleTagger};
use targettype::kb::load_taxonomy;
use targettype::ltr::{
    ablation_to_tsv, cross_validate, feature_ablation, load_model, predict_table, save_model, Dataset,
    ForestConfig, ForestModel,
};
use targettype::pipeline::{extract_table, rank_run, run_pipeline, Candidates, PipelineConfig, Provenance};
use targettype::queries::{load_entity_qrels, load_queries};
use targettype::text::tokenize;
use targettype::retrieval::{build_index, load_index, retrieve_top_k, save_index, EntityIndex, IndexOptions};
use targettype::typescore::{build_pseudo_docs, RankMethod, TcBackground, TypeRanker};
use targettype::{Error, KnowledgeBase, RetrievalModel, RetrievalParams};

use crate::{BackgroundArg, Cli, Command, ForestArgs, KbArgs, MethodArg, ModelArg, RetrievalArgs};

fn provenance(cli: &Cli, inputs: &[&Path]) -> Result<Provenance> {
    let mut p = Provenance::new(cli.seed);
    for path in inputs {
        p.add_file(path)?;
    }
    Ok(p)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn model(m: ModelArg) -> RetrievalModel {
    match m {
        ModelArg::Bm25 => RetrievalModel::Bm25,
        ModelArg::Lm => RetrievalModel::Lm,
    }
}

fn background(b: BackgroundArg) -> TcBackground {
    match b {
        BackgroundArg::Types => TcBackground::Types,
        BackgroundArg::Entities => TcBackground::Entities,
    }
}

fn params(r: &RetrievalArgs, m: RetrievalModel) -> Result<RetrievalParams> {
    let p = RetrievalParams {
        model: m,
        k1: r.k1,
        b: r.b,
        mu: r.mu,
    };
    p.validate()?;
    Ok(p)
}

fn forest(f: &ForestArgs, seed: u64) -> Result<ForestConfig> {
    let cfg = ForestConfig {
        n_trees: f.trees,
        max_features_fraction: f.max_features,
        min_samples_leaf: f.min_leaf,
        bootstrap: !f.no_bootstrap,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

struct LoadedKb {
    kb: KnowledgeBase,
    index: EntityIndex,
}

fn load_kb(args: &KbArgs) -> Result<LoadedKb> {
    let kb = KnowledgeBase::load(&args.types, &args.entities, &args.entity_types, !args.no_closure)?;
    let index = match &args.index {
        Some(p) => {
            let (index, _) = load_index(p)?;
            index.check_matches(&kb.corpus)?;
            index
        }
        None => build_index(
            &kb.corpus,
            IndexOptions {
                include_names: args.include_names,
            },
        ),
    };
    Ok(LoadedKb { kb, index })
}

fn kb_inputs(args: &KbArgs) -> Vec<&Path> {
    let mut v: Vec<&Path> = vec![&args.types, &args.entities, &args.entity_types];
    v.extend(args.index.as_deref());
    v
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::BuildIndex {
            entities,
            include_names,
            out,
        } => {
            let corpus = targettype::kb::load_entities(entities)?;
            let index = build_index(
                &corpus,
                IndexOptions {
                    include_names: *include_names,
                },
            );
            let prov = provenance(cli, &[entities])?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            save_index(&index, &prov.joined(), out)?;
            println!("indexed {} entities, {} terms", index.n_docs(), index.n_terms());
        }

        Command::RankEntities {
            index,
            queries,
            query,
            model: m,
            k,
            retrieval,
            out,
        } => {
            let (idx, _) = load_index(index)?;
            let mut inputs: Vec<&Path> = vec![index];
            let qs: Vec<(String, Vec<String>)> = match (queries, query) {
                (Some(path), _) => {
                    inputs.push(path);
                    load_queries(path)?.iter().map(|q| (q.qid.clone(), q.terms())).collect()
                }
                (None, Some(text)) => vec![("query".to_string(), tokenize(text))],
                (None, None) => unreachable!("clap requires --queries or --query"),
            };
            let p = params(retrieval, model(*m))?;
            let mut run = RunFile::new(p.model.name());
            for (qid, terms) in &qs {
                run.insert(qid, retrieve_top_k(terms, *k, &idx, &p))?;
            }
            let text = run.to_tsv(&provenance(cli, &inputs)?.lines());
            match out {
                Some(path) => write(path, &text)?,
                None => print!("{text}"),
            }
        }

        Command::RankTypes {
            kb,
            queries,
            method,
            model: m,
            k,
            entity_qrels,
            tc_background,
            retrieval,
            out,
        } => {
            let loaded = load_kb(kb)?;
            let qs = load_queries(queries)?;
            let pseudo = build_pseudo_docs(&loaded.kb.assoc, &loaded.index);
            let mut ranker = TypeRanker::new(&loaded.kb.taxonomy, &loaded.kb.assoc, &loaded.index, Some(&pseudo));
            ranker.params = params(retrieval, model(*m))?;
            ranker.background = background(*tc_background);
            let mut inputs = kb_inputs(kb);
            inputs.push(queries);
            let run = match method {
                MethodArg::Ec => rank_run(&ranker, &qs, &RankMethod::EntityCentric { model: model(*m), k: *k })?,
                MethodArg::Tc => rank_run(&ranker, &qs, &RankMethod::TypeCentric { model: model(*m) })?,
                MethodArg::Oracle => {
                    let path = entity_qrels
                        .as_ref()
                        .ok_or_else(|| Error::InvalidArgument("--method oracle needs --entity-qrels".into()))?;
                    inputs.push(path);
                    let rel = load_entity_qrels(path)?;
                    let mut run = RunFile::new("oracle");
                    for q in &qs {
                        let r = rel.get(&q.qid).cloned().unwrap_or_default();
                        run.insert(&q.qid, ranker.rank_types(&[], &RankMethod::Oracle { relevant: r })?)?;
                    }
                    run
                }
            };
            let prov = provenance(cli, &inputs)?;
            write(out, &run.to_tsv(&prov.lines()))?;
        }

        Command::ExtractFeatures {
            kb,
            embeddings,
            queries,
            qrels,
            all_types: _,
            pool,
            pool_depth,
            no_clamp,
            tc_background,
            retrieval,
            out,
        } => {
            let loaded = load_kb(kb)?;
            let emb = load_embeddings(embeddings)?;
            let qs = load_queries(queries)?;
            let judgments = qrels.as_ref().map(load_type_qrels).transpose()?;
            let pseudo = build_pseudo_docs(&loaded.kb.assoc, &loaded.index);
            let mut ranker = TypeRanker::new(&loaded.kb.taxonomy, &loaded.kb.assoc, &loaded.index, Some(&pseudo));
            ranker.params = params(retrieval, RetrievalModel::Bm25)?;
            ranker.background = background(*tc_background);
            let tax = &loaded.kb.taxonomy;
            let candidates: BTreeMap<String, Vec<_>> = if pool.is_empty() {
                let all: Vec<_> = tax.iter().collect();
                qs.iter().map(|q| (q.qid.clone(), all.clone())).collect()
            } else {
                let runs = pool.iter().map(load_run).collect::<targettype::Result<Vec<_>>>()?;
                // Judged types join the pool so that every positive is a training row.
                let judged: Pool = judgments
                    .as_ref()
                    .map(|j| {
                        targettype::eval::filter_nil(j)
                            .0
                            .iter()
                            .map(|(q, g)| (q.to_string(), g.keys().cloned().collect()))
                            .collect()
                    })
                    .unwrap_or_default();
                build_pool(&runs, *pool_depth, &judged)
                    .into_iter()
                    .map(|(q, types)| {
                        let idx = types.iter().map(|t| tax.require(t)).collect::<targettype::Result<Vec<_>>>();
                        idx.map(|i| (q, i))
                    })
                    .collect::<targettype::Result<_>>()?
            };
            let tagger = RuleTagger;
            let config = FeatureConfig {
                clamp_cosines: !no_clamp,
                ..Default::default()
            };
            let extractor = FeatureExtractor::new(ranker, &emb, &tagger, config)?;
            let table = extract_table(&extractor, &qs, &candidates, judgments.as_ref())?;
            let mut inputs = kb_inputs(kb);
            inputs.extend([embeddings.as_path(), queries.as_path()]);
            inputs.extend(qrels.as_deref());
            inputs.extend(pool.iter().map(PathBuf::as_path));
            let prov = provenance(cli, &inputs)?;
            write(out, &table.to_tsv(&prov.lines()))?;
            println!("{} feature rows for {} queries", table.rows.len(), qs.len());
        }

        Command::TrainLtr {
            features,
            forest: f,
            importance,
            out,
        } => {
            let table = load_feature_table(features)?;
            let cfg = forest(f, cli.seed)?;
            let model = ForestModel::train(&Dataset::from_table(&table, f.max_gain)?, &cfg)?;
            let prov = provenance(cli, &[features])?;
            save_model(out, &model, &prov.lines())?;
            if let Some(path) = importance {
                let mut text = String::from("feature\timportance\n");
                for i in model.importance_order() {
                    let _ = writeln!(text, "f{:02}\t{:.6}", i + 1, model.feature_importance[i]);
                }
                write(path, &text)?;
            }
        }

        Command::PredictLtr { model, features, out } => {
            let (m, _) = load_model(model)?;
            let table = load_feature_table(features)?;
            let run = predict_table(&m, &table)?;
            let prov = provenance(cli, &[model, features])?;
            write(out, &run.to_tsv(&prov.lines()))?;
        }

        Command::Cv {
            features,
            folds,
            forest: f,
            folds_out,
            out,
        } => {
            let table = load_feature_table(features)?;
            let cv = cross_validate(&table, *folds, &forest(f, cli.seed)?, f.max_gain)?;
            let prov = provenance(cli, &[features])?;
            write(out, &cv.run.to_tsv(&prov.lines()))?;
            if let Some(path) = folds_out {
                write(path, &cv.folds_to_tsv(&prov.lines()))?;
            }
        }

        Command::Ablation {
            features,
            folds,
            forest: f,
            out,
        } => {
            let table = load_feature_table(features)?;
            let rows = feature_ablation(&table, *folds, &forest(f, cli.seed)?, f.max_gain)?;
            let prov = provenance(cli, &[features])?;
            write(out, &ablation_to_tsv(&rows, &prov.lines()))?;
        }

        Command::Eval {
            run,
            qrels,
            cutoffs,
            groups,
            compare,
            exponential,
            per_query,
            out,
        } => {
            let r = load_run(run)?;
            let (judgments, removed) = targettype::eval::filter_nil(&load_type_qrels(qrels)?);
            if !removed.is_empty() {
                log::info!("{} NIL-only queries not evaluated", removed.len());
            }
            let cats = groups.as_ref().map(load_categories).transpose()?;
            let mode = if *exponential { GainMode::Exponential } else { GainMode::Linear };
            let report = evaluate_run(&r, &judgments, cutoffs, cats.as_ref(), mode)?;
            let mut inputs: Vec<&Path> = vec![run, qrels];
            inputs.extend(groups.as_deref());
            inputs.extend(compare.as_deref());
            let prov = provenance(cli, &inputs)?;
            let mut text = report.to_tsv(&prov.lines(), *per_query);
            if let Some(other) = compare {
                let o = evaluate_run(&load_run(other)?, &judgments, cutoffs, None, mode)?;
                text.push_str("cutoff\tmean_a\tmean_b\tt\tdf\tp_value\n");
                for (i, k) in cutoffs.iter().enumerate() {
                    let t = paired_ttest(&report.column(i), &o.column(i))?;
                    let _ = writeln!(
                        text,
                        "ndcg@{k}\t{:.6}\t{:.6}\t{:.4}\t{}\t{:.6}",
                        report.overall.means[i], o.overall.means[i], t.t, t.df, t.p_value
                    );
                }
            }
            match out {
                Some(path) => write(path, &text)?,
                None => print!("{text}"),
            }
        }

        Command::Pool {
            runs,
            oracle,
            depth,
            types,
            tasks_out,
            out,
        } => {
            let loaded = runs.iter().map(load_run).collect::<targettype::Result<Vec<_>>>()?;
            let oracle_pool = match oracle {
                Some(p) => oracle_types(&load_run(p)?),
                None => Pool::new(),
            };
            let pool = build_pool(&loaded, *depth, &oracle_pool);
            let mut inputs: Vec<&Path> = runs.iter().map(PathBuf::as_path).collect();
            inputs.extend(oracle.as_deref());
            let prov = provenance(cli, &inputs)?;
            write(out, &pool_to_tsv(&pool, &prov.lines()))?;
            if let (Some(t), Some(path)) = (types, tasks_out) {
                let tasks = partition_by_top_level(&pool, &load_taxonomy(t)?)?;
                let mut text = String::new();
                for line in prov.lines() {
                    let _ = writeln!(text, "# {line}");
                }
                for (qid, by_top) in tasks {
                    for (top, members) in by_top {
                        let _ = writeln!(text, "{qid}\t{top}\t{}", members.join(","));
                    }
                }
                write(path, &text)?;
            }
        }

        Command::MergeAnnotations {
            annotations,
            types,
            no_merge,
            distribution,
            out,
        } => {
            let ann = load_annotations(annotations)?;
            let tax = load_taxonomy(types)?;
            let votes = aggregate_votes(&ann);
            let votes = if *no_merge { votes } else { merge_same_path(&votes, &tax)? };
            let judgments = votes_to_judgments(&votes);
            let prov = provenance(cli, &[annotations, types])?;
            write(out, &judgments.to_tsv(&prov.lines()))?;
            if let Some(path) = distribution {
                let mut text = String::from("main_types\tqueries\tqueries_with_nil\tnil_vote_share\n");
                for (k, b) in annotation_distribution(&judgments) {
                    let _ = writeln!(text, "{k}\t{}\t{}\t{:.6}", b.queries, b.queries_with_nil, b.nil_vote_share);
                }
                write(path, &text)?;
            }
        }

        Command::Kappa { annotations } => {
            let ann = load_annotations(annotations)?;
            println!("{:.6}", fleiss_kappa(&ann)?);
        }

        Command::Pipeline {
            types,
            entities,
            entity_types,
            queries,
            qrels,
            embeddings,
            categories,
            entity_qrels,
            k,
            folds,
            pool_depth,
            no_closure,
            include_names,
            forest: f,
            tc_background,
            retrieval,
            out_dir,
        } => {
            let mut cfg = PipelineConfig::new(
                types.clone(),
                entities.clone(),
                entity_types.clone(),
                queries.clone(),
                qrels.clone(),
                embeddings.clone(),
                out_dir.clone(),
            );
            cfg.categories = categories.clone();
            cfg.entity_qrels = entity_qrels.clone();
            cfg.ec_k = *k;
            cfg.folds = *folds;
            cfg.forest = forest(f, cli.seed)?;
            cfg.max_gain = f.max_gain;
            cfg.params = params(retrieval, RetrievalModel::Bm25)?;
            cfg.tc_background = background(*tc_background);
            cfg.closure = !no_closure;
            cfg.include_names = *include_names;
            if let Some(depth) = pool_depth {
                cfg.candidates = Candidates::Pooled { depth: *depth };
            }
            let report = run_pipeline(&cfg)?;
            print!("{}", std::fs::read_to_string(&report.summary_path)?);
        }
    }
    Ok(())
}
