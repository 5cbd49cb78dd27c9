//! Checks shared by the oracle tests and the acceptance runner.
//!
//! The brute-force scorers below read the fixture files themselves and
//! recompute everything with plain loops; they share no code with the
//! library beyond the public entry points being checked.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use targettype::collection::{fleiss_kappa, fleiss_kappa_counts, merge_same_path, parse_annotations, Votes};
use targettype::eval::{ndcg_at_k, paired_ttest, GainMode};
use targettype::features::{
    parse_embeddings, FeatureConfig, FeatureExtractor, RuleTagger, NUM_FEATURES,
};
use targettype::kb::{parse_entities, parse_taxonomy};
use targettype::ltr::{encode_model, Dataset, ForestConfig, ForestModel};
use targettype::pipeline::{run_pipeline, PipelineConfig};
use targettype::retrieval::{build_index, retrieve_top_k, score_bm25, score_lm, IndexOptions};
use targettype::synthetic::{generate, SyntheticConfig};
use targettype::typescore::{build_pseudo_docs, TcBackground, TypeRanker};
use targettype::{KnowledgeBase, RetrievalModel, RetrievalParams, ScoredList};

pub type Check = Result<(), String>;

const K1: f64 = 1.2;
const B: f64 = 0.75;
const MU: f64 = 2000.0;
const K_GRID: [usize; 5] = [5, 10, 20, 50, 100];

fn close(what: &str, got: f64, want: f64, tol: f64) -> Check {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, expected {want}"))
    }
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/oracle")
}

fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(name)).unwrap()
}

fn toks(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in s.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn lines(text: &str) -> impl Iterator<Item = Vec<&str>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
}

/// Plain-loop view of a corpus: id → tokens, in file order.
struct Docs {
    ids: Vec<String>,
    tokens: Vec<Vec<String>>,
}

impl Docs {
    fn parse(text: &str) -> Docs {
        let mut ids = Vec::new();
        let mut tokens = Vec::new();
        for f in lines(text) {
            ids.push(f[0].to_string());
            tokens.push(toks(f[2]));
        }
        Docs { ids, tokens }
    }

    fn n(&self) -> f64 {
        self.ids.len() as f64
    }

    fn tf(&self, d: usize, w: &str) -> f64 {
        self.tokens[d].iter().filter(|t| *t == w).count() as f64
    }

    fn df(&self, w: &str) -> f64 {
        (0..self.ids.len()).filter(|&d| self.tf(d, w) > 0.0).count() as f64
    }

    fn cf(&self, w: &str) -> f64 {
        (0..self.ids.len()).map(|d| self.tf(d, w)).sum()
    }

    fn total(&self) -> f64 {
        self.tokens.iter().map(|t| t.len() as f64).sum()
    }

    fn bm25(&self, q: &[String], d: usize) -> f64 {
        let avgdl = self.total() / self.n();
        let dl = self.tokens[d].len() as f64;
        let mut s = 0.0;
        for w in q {
            let tf = self.tf(d, w);
            if tf == 0.0 {
                continue;
            }
            let df = self.df(w);
            let idf = (1.0 + (self.n() - df + 0.5) / (df + 0.5)).ln();
            s += idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * dl / avgdl));
        }
        s
    }

    fn lm(&self, q: &[String], d: usize) -> f64 {
        let dl = self.tokens[d].len() as f64;
        let mut p = 1.0;
        for w in q {
            let cf = self.cf(w);
            if cf == 0.0 {
                return 0.0;
            }
            p *= (self.tf(d, w) + MU * cf / self.total()) / (dl + MU);
        }
        p
    }

    fn score(&self, q: &[String], d: usize, model: RetrievalModel) -> f64 {
        match model {
            RetrievalModel::Bm25 => self.bm25(q, d),
            RetrievalModel::Lm => self.lm(q, d),
        }
    }

    /// (doc, score) with score > 0, best first, ties by id, at most k.
    fn ranking(&self, q: &[String], k: usize, model: RetrievalModel) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = (0..self.ids.len())
            .map(|d| (d, self.score(q, d, model)))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        // Selection sort keeps this independent of the library's comparator.
        let mut out = Vec::new();
        while !all.is_empty() && out.len() < k {
            let mut best = 0;
            for i in 1..all.len() {
                let (a, b) = (all[i], all[best]);
                if a.1 > b.1 || (a.1 == b.1 && self.ids[a.0] < self.ids[b.0]) {
                    best = i;
                }
            }
            out.push(all.remove(best));
        }
        out
    }
}

/// Plain-loop view of a taxonomy with closed extensions.
struct Kb {
    types: Vec<String>,
    parent: Vec<Option<usize>>,
    ext: Vec<Vec<usize>>,
}

impl Kb {
    fn parse(types: &str, entity_types: &str, docs: &Docs) -> Kb {
        let rows: Vec<Vec<&str>> = lines(types).collect();
        let names: Vec<String> = rows.iter().map(|f| f[0].to_string()).collect();
        let parent = rows
            .iter()
            .map(|f| names.iter().position(|n| f.get(2).is_some_and(|p| p == n)))
            .collect();
        let mut kb = Kb {
            ext: vec![Vec::new(); names.len()],
            types: names,
            parent,
        };
        for f in lines(entity_types) {
            let e = docs.ids.iter().position(|id| id == f[0]).unwrap();
            let mut t = kb.types.iter().position(|n| n == f[1]);
            while let Some(ti) = t {
                if !kb.ext[ti].contains(&e) {
                    kb.ext[ti].push(e);
                }
                t = kb.parent[ti];
            }
        }
        kb
    }

    fn w(&self, e: usize, t: usize) -> f64 {
        if self.ext[t].contains(&e) {
            1.0 / self.ext[t].len() as f64
        } else {
            0.0
        }
    }

    fn ec(&self, docs: &Docs, q: &[String], t: usize, k: usize, model: RetrievalModel) -> f64 {
        let mut s = 0.0;
        for (e, score) in docs.ranking(q, k, model) {
            s += score * self.w(e, t);
        }
        s
    }

    fn pseudo_tf(&self, docs: &Docs, w: &str, t: usize) -> f64 {
        self.ext[t].iter().map(|&e| docs.tf(e, w) * self.w(e, t)).sum()
    }

    fn pseudo_len(&self, docs: &Docs, t: usize) -> f64 {
        self.ext[t]
            .iter()
            .map(|&e| docs.tokens[e].len() as f64 * self.w(e, t))
            .sum()
    }

    /// Type-centric score; `entity_bg` takes idf and collection
    /// probabilities from the entity corpus instead of the type corpus.
    fn tc(&self, docs: &Docs, q: &[String], t: usize, model: RetrievalModel, entity_bg: bool) -> f64 {
        if self.ext[t].is_empty() {
            return 0.0;
        }
        let live: Vec<usize> = (0..self.types.len()).filter(|&u| !self.ext[u].is_empty()).collect();
        let n = live.len() as f64;
        let total: f64 = live.iter().map(|&u| self.pseudo_len(docs, u)).sum();
        let len = self.pseudo_len(docs, t);
        match model {
            RetrievalModel::Bm25 => {
                let mut s = 0.0;
                for w in q {
                    let tf = self.pseudo_tf(docs, w, t);
                    if tf <= 0.0 {
                        continue;
                    }
                    let (n_bg, df) = if entity_bg {
                        (docs.n(), docs.df(w))
                    } else {
                        (n, live.iter().filter(|&&u| self.pseudo_tf(docs, w, u) > 0.0).count() as f64)
                    };
                    let idf = (1.0 + (n_bg - df + 0.5) / (df + 0.5)).ln();
                    s += idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * len / (total / n)));
                }
                s
            }
            RetrievalModel::Lm => {
                let mut p = 1.0;
                for w in q {
                    let bg = if entity_bg {
                        docs.cf(w) / docs.total()
                    } else {
                        live.iter().map(|&u| self.pseudo_tf(docs, w, u)).sum::<f64>() / total
                    };
                    if bg == 0.0 {
                        return 0.0;
                    }
                    p *= (self.pseudo_tf(docs, w, t) + MU * bg) / (len + MU);
                }
                p
            }
        }
    }
}

pub fn ndcg_hand_values() -> Check {
    let log2 = |x: f64| x.log2();
    // (ranking, qrels, k, expected)
    let cases: Vec<(Vec<&str>, Vec<(&str, u32)>, usize, f64)> = vec![
        (vec!["a", "b", "c"], vec![("a", 3), ("c", 2)], 3, (3.0 + 2.0 / 2.0) / (3.0 + 2.0 / log2(3.0))),
        (vec!["b", "a"], vec![("a", 1)], 1, 0.0),
        (vec!["b", "a"], vec![("a", 1)], 5, (1.0 / log2(3.0)) / 1.0),
        (vec!["x", "y", "z", "w"], vec![("w", 2), ("y", 1), ("q", 3)], 3,
            (1.0 / log2(3.0)) / (3.0 + 2.0 / log2(3.0) + 1.0 / 2.0)),
        (vec!["a", "b"], vec![("a", 2), ("b", 2)], 2, 1.0),
        (vec!["a"], vec![("<NIL>", 3)], 5, 0.0),
        (vec!["c", "b", "a"], vec![("a", 1), ("b", 2), ("c", 3)], 2, 1.0),
    ];
    for (i, (ids, qrels, k, want)) in cases.into_iter().enumerate() {
        let n = ids.len();
        let list = ScoredList::from_scores(ids.iter().enumerate().map(|(r, id)| (*id, (n - r) as f64))).unwrap();
        let gains: BTreeMap<String, u32> = qrels.iter().map(|(t, g)| (t.to_string(), *g)).collect();
        let got = ndcg_at_k(&list, &gains, k, GainMode::Linear).map_err(|e| e.to_string())?;
        close(&format!("case {i}"), got, want, 1e-9)?;
    }
    let list = ScoredList::from_scores([("t1", 3.0), ("t2", 2.0), ("t3", 1.0)]).unwrap();
    let gains: BTreeMap<String, u32> = [("t1", 3), ("t3", 2)].iter().map(|(t, g)| (t.to_string(), *g)).collect();
    close("worked example", ndcg_at_k(&list, &gains, 3, GainMode::Linear).unwrap(), 0.93856, 5e-6)
}

/// Small corpus with an exact tie (a1/a2) and a term missing from it.
pub const RETRIEVAL_CORPUS: &str = "\
z1\tx\tred fox jumps over the lazy dog
a2\tx\tred red fox
b3\tx\tblue whale song
a1\tx\tred red fox
c4\tx\tlazy afternoon with a red sun
c5\tx\twhale and fox and dog
c6\tx\tthe the the
c7\tx\tsong of the red whale red whale
";

pub fn retrieval_matches_brute_force() -> Check {
    let docs = Docs::parse(RETRIEVAL_CORPUS);
    let idx = build_index(&parse_entities(RETRIEVAL_CORPUS).unwrap(), IndexOptions::default());
    let queries = ["red fox", "whale", "lazy dog song", "red red", "unknown red", "the", "", "fox fox dog"];
    for model in [RetrievalModel::Bm25, RetrievalModel::Lm] {
        let params = RetrievalParams::with_model(model);
        for q in queries {
            let terms = toks(q);
            for (d, id) in docs.ids.iter().enumerate() {
                let got = match model {
                    RetrievalModel::Bm25 => score_bm25(&terms, id, &idx, &params),
                    RetrievalModel::Lm => score_lm(&terms, id, &idx, &params),
                }
                .map_err(|e| e.to_string())?;
                close(&format!("{model:?} `{q}` {id}"), got, docs.score(&terms, d, model), 1e-9)?;
            }
            for k in [1, 3, 100] {
                let got = retrieve_top_k(&terms, k, &idx, &params);
                let want = docs.ranking(&terms, k, model);
                let got_ids: Vec<&str> = got.ids().collect();
                let want_ids: Vec<&str> = want.iter().map(|&(d, _)| docs.ids[d].as_str()).collect();
                if got_ids != want_ids {
                    return Err(format!("{model:?} `{q}` k={k}: {got_ids:?} != {want_ids:?}"));
                }
                for (item, &(_, s)) in got.items().iter().zip(&want) {
                    close(&format!("{model:?} `{q}` k={k} {}", item.id), item.score, s, 1e-9)?;
                }
            }
        }
    }
    Ok(())
}

struct Fixture {
    kb: KnowledgeBase,
    docs: Docs,
    plain: Kb,
    queries: Vec<(String, String)>,
}

fn load_fixture() -> Fixture {
    let (types, entities, entity_types) = (fixture("types.tsv"), fixture("entities.tsv"), fixture("entity_types.tsv"));
    let kb = KnowledgeBase::parse(&types, &entities, &entity_types, true).unwrap();
    let docs = Docs::parse(&entities);
    let plain = Kb::parse(&types, &entity_types, &docs);
    let queries = lines(&fixture("queries.tsv"))
        .map(|f| (f[0].to_string(), f[1].to_string()))
        .collect();
    Fixture { kb, docs, plain, queries }
}

pub fn ec_tc_match_double_loops() -> Check {
    let fx = load_fixture();
    let idx = build_index(&fx.kb.corpus, IndexOptions::default());
    let pseudo = build_pseudo_docs(&fx.kb.assoc, &idx);
    let ranker = TypeRanker::new(&fx.kb.taxonomy, &fx.kb.assoc, &idx, Some(&pseudo));
    let entity_ranker = TypeRanker {
        background: TcBackground::Entities,
        ..ranker
    };
    let mut extra: Vec<String> = vec!["berlin berlin".into(), "city city of".into(), "zzz".into()];
    extra.extend(fx.queries.iter().map(|(_, q)| q.clone()));
    for q in &extra {
        let terms = toks(q);
        for (t, type_id) in fx.plain.types.iter().enumerate() {
            for model in [RetrievalModel::Bm25, RetrievalModel::Lm] {
                for k in K_GRID.iter().copied().chain([1, 2, 3]) {
                    let got = ranker.score_ec(&terms, type_id, k, model).map_err(|e| e.to_string())?;
                    let want = fx.plain.ec(&fx.docs, &terms, t, k, model);
                    close(&format!("EC {model:?} K={k} `{q}` {type_id}"), got, want, 1e-9)?;
                }
                for (r, entity_bg) in [(&ranker, false), (&entity_ranker, true)] {
                    let got = r.score_tc(&terms, type_id, model).map_err(|e| e.to_string())?;
                    let want = fx.plain.tc(&fx.docs, &terms, t, model, entity_bg);
                    close(&format!("TC {model:?} entity_bg={entity_bg} `{q}` {type_id}"), got, want, 1e-9)?;
                }
            }
        }
    }
    Ok(())
}

pub fn weights_sum_to_one() -> Check {
    let fx = load_fixture();
    let synth = generate(&SyntheticConfig::default());
    let big = KnowledgeBase::parse(&synth.types, &synth.entities, &synth.entity_types, true).unwrap();
    let direct = KnowledgeBase::parse(&synth.types, &synth.entities, &synth.entity_types, false).unwrap();
    for kb in [&fx.kb, &big, &direct] {
        for t in kb.taxonomy.iter() {
            let type_id = kb.taxonomy.id(t);
            let sum: f64 = kb
                .corpus
                .entities()
                .iter()
                .map(|e| kb.association_weight(&e.entity_id, type_id).unwrap())
                .sum();
            let want = if kb.assoc.count(t) > 0 { 1.0 } else { 0.0 };
            close(&format!("Σ w(e, {type_id})"), sum, want, 1e-12)?;
        }
    }
    Ok(())
}

pub fn features_match_frozen_oracle() -> Check {
    let fx = load_fixture();
    let idx = build_index(&fx.kb.corpus, IndexOptions::default());
    let pseudo = build_pseudo_docs(&fx.kb.assoc, &idx);
    let ranker = TypeRanker::new(&fx.kb.taxonomy, &fx.kb.assoc, &idx, Some(&pseudo));
    let emb = parse_embeddings(&fixture("embeddings.txt")).unwrap();
    let fe = FeatureExtractor::new(ranker, &emb, &RuleTagger, FeatureConfig::default()).unwrap();
    let all: Vec<_> = fx.kb.taxonomy.iter().collect();

    let mut expected: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for f in lines(&fixture("expected_features.tsv")) {
        let values: Vec<f64> = f[2..].iter().map(|x| x.parse().unwrap()).collect();
        assert_eq!(values.len(), NUM_FEATURES);
        expected.insert((f[0].to_string(), f[1].to_string()), values);
    }
    let mut seen = 0;
    for (qid, text) in &fx.queries {
        for v in fe.extract_query(qid, text, &all).map_err(|e| e.to_string())? {
            v.check_ranges().map_err(|e| e.to_string())?;
            let want = expected
                .get(&(v.qid.clone(), v.type_id.clone()))
                .ok_or_else(|| format!("no oracle row for ({qid}, {})", v.type_id))?;
            for (row, (&got, &w)) in v.values.iter().zip(want).enumerate() {
                close(&format!("({qid}, {}) feature {}", v.type_id, row + 1), got, w, 1e-9)?;
            }
            seen += 1;
        }
    }
    if seen != expected.len() {
        return Err(format!("compared {seen} rows, oracle has {}", expected.len()));
    }

    // Range invariants on a larger collection.
    let synth = generate(&SyntheticConfig { n_queries: 10, ..Default::default() });
    let kb = KnowledgeBase::parse(&synth.types, &synth.entities, &synth.entity_types, true).unwrap();
    let idx = build_index(&kb.corpus, IndexOptions::default());
    let pseudo = build_pseudo_docs(&kb.assoc, &idx);
    let ranker = TypeRanker::new(&kb.taxonomy, &kb.assoc, &idx, Some(&pseudo));
    let emb = parse_embeddings(&synth.embeddings).unwrap();
    let fe = FeatureExtractor::new(ranker, &emb, &RuleTagger, FeatureConfig::default()).unwrap();
    let all: Vec<_> = kb.taxonomy.iter().collect();
    for line in synth.queries.lines() {
        let (qid, text) = line.split_once('\t').unwrap();
        for v in fe.extract_query(qid, text, &all).map_err(|e| e.to_string())? {
            v.check_ranges().map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

pub fn ttest_matches_scipy() -> Check {
    // scipy.stats.ttest_rel on the same pairs.
    let cases: [(&[f64], &[f64], f64, f64); 2] = [
        (&[0.9, 0.5, 0.7, 0.3, 0.8, 0.6], &[0.6, 0.55, 0.4, 0.1, 0.75, 0.2], 2.876779808912305, 0.03471842370012076),
        (&[1.0, 0.0, 0.5, 0.25, 0.75, 1.0, 0.3, 0.6], &[0.8, 0.1, 0.45, 0.3, 0.5, 0.7, 0.35, 0.2], 1.8898223650461363, 0.1007016583111716),
    ];
    for (i, (a, b, t, p)) in cases.into_iter().enumerate() {
        let r = paired_ttest(a, b).map_err(|e| e.to_string())?;
        close(&format!("t {i}"), r.t, t, 1e-9)?;
        close(&format!("p {i}"), r.p_value, p, 1e-9)?;
    }
    Ok(())
}

/// Target = x1, plus 24 uniform noise columns.
fn informative_data(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::new(NUM_FEATURES);
    for _ in 0..n {
        let row: Vec<f64> = (0..NUM_FEATURES).map(|_| rng.gen_range(0.0..1.0)).collect();
        data.push(&row, row[0]).unwrap();
    }
    data
}

pub fn forest_sanity() -> Check {
    let cfg = ForestConfig::default();
    let mut constant = Dataset::new(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..60 {
        let row: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        constant.push(&row, 0.37).unwrap();
    }
    let model = ForestModel::train(&constant, &cfg).map_err(|e| e.to_string())?;
    for x in [[0.0, 0.0, 0.0], [-9.0, 4.0, 100.0], [1.5, -2.5, 3.5]] {
        let p = model.predict(&x).unwrap();
        if p != 0.37 {
            return Err(format!("constant target predicted as {p}"));
        }
    }

    let data = informative_data(500, 11);
    let model = ForestModel::train(&data, &cfg).map_err(|e| e.to_string())?;
    let y = data.targets();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = (0..data.len())
        .map(|i| (y[i] - model.predict(data.row(i)).unwrap()).powi(2))
        .sum();
    let r2 = 1.0 - ss_res / ss_tot;
    if r2 < 0.9 {
        return Err(format!("training R² {r2:.4} < 0.9"));
    }
    let imp = &model.feature_importance;
    let top = (0..imp.len()).max_by(|&a, &b| imp[a].total_cmp(&imp[b])).unwrap();
    if top != 0 {
        return Err(format!("importance peaks on feature {top}: {imp:?}"));
    }
    let again = ForestModel::train(&data, &cfg).map_err(|e| e.to_string())?;
    if encode_model(&model, &[]).unwrap() != encode_model(&again, &[]).unwrap() {
        return Err("same seed gave different models".into());
    }
    Ok(())
}

/// Cross-validated LTR margin over the best baseline on the synthetic
/// collection, at NDCG@5.
pub fn ltr_margin(out_dir: &Path) -> Result<f64, String> {
    let paths = generate(&SyntheticConfig::default())
        .write_to(out_dir.join("data"))
        .map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::new(
        paths.types,
        paths.entities,
        paths.entity_types,
        paths.queries,
        paths.type_qrels,
        paths.embeddings,
        out_dir.join("out"),
    );
    pipeline_margin(&cfg)
}

pub fn pipeline_margin(cfg: &PipelineConfig) -> Result<f64, String> {
    let report = run_pipeline(cfg).map_err(|e| e.to_string())?;
    let ltr = report
        .rows
        .iter()
        .find(|r| r.method == "LTR")
        .ok_or("no LTR row")?
        .ndcg5;
    let best = report
        .rows
        .iter()
        .filter(|r| r.method != "LTR")
        .map(|r| r.ndcg5)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ltr - best)
}

fn votes(pairs: &[(&str, u32)]) -> Votes {
    let mut v = Votes::new();
    v.insert("q".into(), pairs.iter().map(|(t, n)| (t.to_string(), *n)).collect());
    v
}

pub fn merge_is_correct() -> Check {
    let chain = parse_taxonomy("A\t\t\nB\t\tA\nC\t\tB\nD\t\t\nE\t\tD\nF\t\tD\nG\t\tF\n").unwrap();
    let merged = merge_same_path(&votes(&[("A", 1), ("B", 1), ("C", 1)]), &chain).unwrap();
    if merged["q"] != [("A".to_string(), 3)].into_iter().collect() {
        return Err(format!("3-chain merged to {:?}", merged["q"]));
    }

    let labels = ["A", "B", "C", "D", "E", "F", "G", "<NIL>"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..2000 {
        let mut pairs: Vec<(&str, u32)> = Vec::new();
        for &l in &labels {
            if rng.gen_bool(0.5) {
                pairs.push((l, rng.gen_range(0..4u32)));
            }
        }
        let before = votes(&pairs);
        let after = merge_same_path(&before, &chain).map_err(|e| e.to_string())?;
        let total = |v: &Votes| v["q"].values().sum::<u32>();
        if total(&before) != total(&after) {
            return Err(format!("case {case}: votes not conserved {before:?} -> {after:?}"));
        }
        let positive: Vec<_> = after["q"]
            .iter()
            .filter(|(t, &n)| n > 0 && t.as_str() != "<NIL>")
            .map(|(t, _)| chain.get(t).unwrap())
            .collect();
        for (i, &a) in positive.iter().enumerate() {
            for &b in &positive[i + 1..] {
                if chain.on_same_path(a, b) {
                    return Err(format!("case {case}: {after:?} keeps a path pair"));
                }
            }
        }
        // Every surviving type was voted for.
        let voted: BTreeSet<&str> = pairs.iter().filter(|p| p.1 > 0).map(|p| p.0).collect();
        if after["q"].keys().any(|t| !voted.contains(t.as_str())) {
            return Err(format!("case {case}: {after:?} invents a type"));
        }
    }
    Ok(())
}

pub fn kappa_fixtures() -> Check {
    let unanimous = parse_annotations("q1\tw1\tCity\nq1\tw2\tCity\nq1\tw3\tCity\nq2\tw1\tPerson\nq2\tw2\tPerson\nq2\tw3\tPerson\nq3\tw1\tCity\nq3\tw2\tCity\nq3\tw3\tCity\n").unwrap();
    let k = fleiss_kappa(&unanimous).map_err(|e| e.to_string())?;
    if k != 1.0 {
        return Err(format!("unanimous kappa = {k}"));
    }
    let k = fleiss_kappa_counts(&[vec![2, 2], vec![2, 2]]).map_err(|e| e.to_string())?;
    close("two-item kappa", k, -1.0 / 3.0, 1e-9)?;
    if fleiss_kappa_counts(&[vec![3], vec![3]]).is_ok() {
        return Err("single-category kappa should be undefined".into());
    }
    Ok(())
}
