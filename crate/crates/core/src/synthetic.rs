//! Seeded generator for small self-consistent collections.
//!
//! Every type label is a made-up head word. Queries never use the head word
//! itself but a synonym whose embedding sits next to it, and entity
//! descriptions are mostly drawn from a shared noise vocabulary with a weak
//! per-type topic word. Retrieval-based type scores therefore see little
//! signal while the label/embedding features see a lot.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::text::{is_function_word, write_string};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_top: usize,
    pub children_per_top: usize,
    pub entities_per_type: usize,
    pub description_len: usize,
    pub n_noise_words: usize,
    pub n_queries: usize,
    pub dim: usize,
    /// Probability that a query and an entity description carry the type's
    /// topic word.
    pub topic_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            n_top: 5,
            children_per_top: 4,
            entities_per_type: 8,
            description_len: 12,
            n_noise_words: 150,
            n_queries: 40,
            dim: 12,
            topic_rate: 0.5,
        }
    }
}

/// File contents of a generated collection.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCollection {
    pub types: String,
    pub entities: String,
    pub entity_types: String,
    pub queries: String,
    pub type_qrels: String,
    pub entity_qrels: String,
    pub embeddings: String,
    pub categories: String,
}

/// Paths written by [`SyntheticCollection::write_to`].
#[derive(Clone, Debug, PartialEq)]
pub struct CollectionPaths {
    pub types: PathBuf,
    pub entities: PathBuf,
    pub entity_types: PathBuf,
    pub queries: PathBuf,
    pub type_qrels: PathBuf,
    pub entity_qrels: PathBuf,
    pub embeddings: PathBuf,
    pub categories: PathBuf,
}

impl SyntheticCollection {
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<CollectionPaths> {
        let dir = dir.as_ref();
        let paths = CollectionPaths {
            types: dir.join("types.tsv"),
            entities: dir.join("entities.tsv"),
            entity_types: dir.join("entity_types.tsv"),
            queries: dir.join("queries.tsv"),
            type_qrels: dir.join("type_qrels.tsv"),
            entity_qrels: dir.join("entity_qrels.tsv"),
            embeddings: dir.join("embeddings.txt"),
            categories: dir.join("categories.tsv"),
        };
        write_string(&paths.types, &self.types)?;
        write_string(&paths.entities, &self.entities)?;
        write_string(&paths.entity_types, &self.entity_types)?;
        write_string(&paths.queries, &self.queries)?;
        write_string(&paths.type_qrels, &self.type_qrels)?;
        write_string(&paths.entity_qrels, &self.entity_qrels)?;
        write_string(&paths.embeddings, &self.embeddings)?;
        write_string(&paths.categories, &self.categories)?;
        Ok(paths)
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ru", "ze", "tor", "vin", "qua", "sel", "dra", "pim", "nok", "fe", "bal",
    "gur", "sha", "tel", "wix", "yon", "bru", "cas", "dov", "hep", "jul",
];

struct Words {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Words {
    fn fresh(&mut self) -> String {
        loop {
            let n = self.rng.gen_range(2u32..4);
            let w: String = (0..n)
                .map(|_| SYLLABLES[self.rng.gen_range(0..SYLLABLES.len() as u32) as usize])
                .collect();
            if !is_function_word(&w) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn push_vector(out: &mut String, word: &str, v: &[f64]) {
    out.push_str(word);
    for x in v {
        let _ = write!(out, " {x:.6}");
    }
    out.push('\n');
}

struct LeafType {
    id: String,
    synonym: String,
    topic: String,
    top: usize,
    entities: Vec<String>,
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut words = Words {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed),
        used: HashSet::new(),
    };
    let mut types = String::from("# type_id\tlabel\tparent_id\n");
    let mut embeddings = String::new();
    let mut leaves: Vec<LeafType> = Vec::new();

    for top in 0..cfg.n_top {
        let head = words.fresh();
        let top_id = capitalize(&head);
        let _ = writeln!(types, "{top_id}\t{top_id}\t");
        let v = random_vector(&mut rng, cfg.dim);
        push_vector(&mut embeddings, &head, &v);
        for _ in 0..cfg.children_per_top {
            let head = words.fresh();
            let id = capitalize(&head);
            let _ = writeln!(types, "{id}\t{id}\t{top_id}");
            let v = random_vector(&mut rng, cfg.dim);
            let synonym = words.fresh();
            let near: Vec<f64> = v.iter().map(|x| x + rng.gen_range(-0.15..0.15)).collect();
            push_vector(&mut embeddings, &head, &v);
            push_vector(&mut embeddings, &synonym, &near);
            leaves.push(LeafType {
                id,
                synonym,
                topic: words.fresh(),
                top,
                entities: Vec::new(),
            });
        }
    }
    let noise: Vec<String> = (0..cfg.n_noise_words).map(|_| words.fresh()).collect();
    for w in leaves.iter().map(|l| &l.topic).chain(&noise) {
        let v = random_vector(&mut rng, cfg.dim);
        push_vector(&mut embeddings, w, &v);
    }

    let mut descriptions: Vec<Vec<String>> = Vec::new();
    let mut owner: Vec<usize> = Vec::new();
    for (li, leaf) in leaves.iter().enumerate() {
        for _ in 0..cfg.entities_per_type {
            let mut desc: Vec<String> = (0..cfg.description_len)
                .map(|_| noise[rng.gen_range(0..noise.len() as u32) as usize].clone())
                .collect();
            if rng.gen_bool(cfg.topic_rate) {
                desc[0] = leaf.topic.clone();
            }
            descriptions.push(desc);
            owner.push(li);
        }
    }
    // Synonyms also occur in a couple of unrelated descriptions, so they are
    // in the vocabulary without pointing at their type.
    for (li, leaf) in leaves.iter().enumerate() {
        for _ in 0..2 {
            let d = rng.gen_range(0..descriptions.len() as u32) as usize;
            if owner[d] != li {
                descriptions[d].push(leaf.synonym.clone());
            }
        }
    }
    let mut entities = String::new();
    let mut entity_types = String::new();
    for (i, (mut desc, li)) in descriptions.into_iter().zip(owner).enumerate() {
        let id = format!("e{:04}", i + 1);
        let name = capitalize(&words.fresh());
        desc.shuffle(&mut rng);
        let _ = writeln!(entities, "{id}\t{name}\t{}", desc.join(" "));
        let _ = writeln!(entity_types, "{id}\t{}", leaves[li].id);
        leaves[li].entities.push(id);
    }

    let mut queries = String::new();
    let mut type_qrels = String::new();
    let mut entity_qrels = String::new();
    let mut categories = String::new();
    for q in 0..cfg.n_queries {
        let qid = format!("Q{:03}", q + 1);
        let main = rng.gen_range(0..leaves.len() as u32) as usize;
        let mut targets = vec![(main, rng.gen_range(3u32..8))];
        if cfg.n_top > 1 && rng.gen_bool(0.25) {
            let other = loop {
                let o = rng.gen_range(0..leaves.len() as u32) as usize;
                if leaves[o].top != leaves[main].top {
                    break o;
                }
            };
            targets.push((other, rng.gen_range(1u32..5)));
        }
        let mut text: Vec<&str> = targets.iter().map(|&(t, _)| leaves[t].synonym.as_str()).collect();
        let topical = rng.gen_bool(cfg.topic_rate);
        if topical {
            text.push(&leaves[main].topic);
        }
        for _ in 0..2 {
            text.push(&noise[rng.gen_range(0..noise.len() as u32) as usize]);
        }
        text.shuffle(&mut rng);
        let _ = writeln!(queries, "{qid}\t{}", text.join(" "));
        let _ = writeln!(categories, "{qid}\t{}", if topical { "topical" } else { "plain" });
        for &(t, gain) in &targets {
            let _ = writeln!(type_qrels, "{qid}\t{}\t{gain}", leaves[t].id);
            for e in leaves[t].entities.choose_multiple(&mut rng, 3) {
                let _ = writeln!(entity_qrels, "{qid}\t{e}\t1");
            }
        }
    }

    SyntheticCollection {
        types,
        entities,
        entity_types,
        queries,
        type_qrels,
        entity_qrels,
        embeddings,
        categories,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::parse_type_qrels;
    use crate::features::parse_embeddings;
    use crate::kb::KnowledgeBase;
    use crate::queries::{parse_entity_qrels, parse_queries};

    #[test]
    fn generated_files_parse() {
        let c = generate(&SyntheticConfig::default());
        let kb = KnowledgeBase::parse(&c.types, &c.entities, &c.entity_types, true).unwrap();
        assert_eq!(kb.taxonomy.len(), 25);
        assert_eq!(kb.corpus.len(), 20 * 8);
        assert_eq!(parse_queries(&c.queries).unwrap().len(), 40);
        let j = parse_type_qrels(&c.type_qrels).unwrap();
        assert_eq!(j.len(), 40);
        assert!(!parse_entity_qrels(&c.entity_qrels).unwrap().is_empty());
        let emb = parse_embeddings(&c.embeddings).unwrap();
        assert_eq!(emb.dim(), 12);
    }

    #[test]
    fn seeded() {
        let cfg = SyntheticConfig::default();
        assert_eq!(generate(&cfg), generate(&cfg));
        assert_ne!(generate(&cfg), generate(&SyntheticConfig { seed: 8, ..cfg }));
    }
}
