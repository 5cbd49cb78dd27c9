//! Type taxonomy, entity corpus and entity-type associations.
//!
//! The taxonomy is a tree with an implicit root: types without a parent are
//! its children and sit at depth 1. Entity-type assignments are loaded as
//! direct assignments and, by default, closed over ancestors so that a type's
//! extension contains every entity typed with it or with one of its
//! descendants.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{load_with, split_camel_case, tokenize, tsv_records};

/// Reserved label for "no type fits"; never a valid type id.
pub const NIL_TOKEN: &str = "<NIL>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypeIdx(pub u32);

impl TypeIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityIdx(pub u32);

impl EntityIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug)]
pub struct TypeNode {
    pub type_id: String,
    pub label: String,
    pub label_tokens: Vec<String>,
    pub parent: Option<TypeIdx>,
    pub children: Vec<TypeIdx>,
    pub depth: usize,
}

#[derive(Clone, Debug, Default)]
pub struct TypeTaxonomy {
    nodes: Vec<TypeNode>,
    by_id: HashMap<String, TypeIdx>,
    top_level: Vec<TypeIdx>,
    max_depth: usize,
}

impl TypeTaxonomy {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn get(&self, type_id: &str) -> Option<TypeIdx> {
        self.by_id.get(type_id).copied()
    }

    pub fn require(&self, type_id: &str) -> Result<TypeIdx> {
        self.get(type_id)
            .ok_or_else(|| Error::UnknownType(type_id.to_string()))
    }

    pub fn node(&self, t: TypeIdx) -> &TypeNode {
        &self.nodes[t.index()]
    }

    pub fn id(&self, t: TypeIdx) -> &str {
        &self.nodes[t.index()].type_id
    }

    pub fn depth(&self, t: TypeIdx) -> usize {
        self.nodes[t.index()].depth
    }

    pub fn parent(&self, t: TypeIdx) -> Option<TypeIdx> {
        self.nodes[t.index()].parent
    }

    pub fn children(&self, t: TypeIdx) -> &[TypeIdx] {
        &self.nodes[t.index()].children
    }

    /// Children of the implicit root.
    pub fn top_level(&self) -> &[TypeIdx] {
        &self.top_level
    }

    /// Number of other children of `t`'s parent (the implicit root for
    /// top-level types).
    pub fn n_siblings(&self, t: TypeIdx) -> usize {
        let family = match self.parent(t) {
            Some(p) => self.children(p).len(),
            None => self.top_level.len(),
        };
        family - 1
    }

    /// Iterates strict ancestors from the parent upwards.
    pub fn ancestors(&self, t: TypeIdx) -> impl Iterator<Item = TypeIdx> + '_ {
        std::iter::successors(self.parent(t), move |&a| self.parent(a))
    }

    pub fn is_ancestor(&self, ancestor: TypeIdx, t: TypeIdx) -> bool {
        self.depth(ancestor) < self.depth(t) && self.ancestors(t).any(|a| a == ancestor)
    }

    pub fn on_same_path(&self, a: TypeIdx, b: TypeIdx) -> bool {
        a == b || self.is_ancestor(a, b) || self.is_ancestor(b, a)
    }

    /// The depth-1 ancestor of `t` (or `t` itself when it is top-level).
    pub fn top_level_ancestor(&self, t: TypeIdx) -> TypeIdx {
        self.ancestors(t).last().unwrap_or(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = TypeIdx> + '_ {
        (0..self.nodes.len() as u32).map(TypeIdx)
    }
}

/// Parses `types.tsv`: `type_id<TAB>label<TAB>parent_id`.
///
/// An empty parent marks a top-level type; an empty label is derived from
/// the CamelCase type id. Parents may be declared after their children.
pub fn parse_taxonomy(text: &str) -> Result<TypeTaxonomy> {
    struct Raw<'a> {
        line: usize,
        parent: &'a str,
    }

    let mut nodes: Vec<TypeNode> = Vec::new();
    let mut raws: Vec<Raw<'_>> = Vec::new();
    let mut by_id: HashMap<String, TypeIdx> = HashMap::new();

    for (line, fields) in tsv_records(text) {
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let type_id = fields[0].trim();
        if type_id.is_empty() {
            return Err(Error::parse(line, "empty type id"));
        }
        if type_id == NIL_TOKEN {
            return Err(Error::parse(line, format!("{NIL_TOKEN} is reserved")));
        }
        let label = match fields[1].trim() {
            "" => split_camel_case(type_id),
            l => l.to_string(),
        };
        let label_tokens = tokenize(&label);
        if label_tokens.is_empty() {
            return Err(Error::parse(line, format!("type `{type_id}` has an empty label")));
        }
        let idx = TypeIdx(nodes.len() as u32);
        if by_id.insert(type_id.to_string(), idx).is_some() {
            return Err(Error::parse(line, format!("duplicate type id `{type_id}`")));
        }
        nodes.push(TypeNode {
            type_id: type_id.to_string(),
            label,
            label_tokens,
            parent: None,
            children: Vec::new(),
            depth: 0,
        });
        raws.push(Raw {
            line,
            parent: fields.get(2).map(|p| p.trim()).unwrap_or(""),
        });
    }

    let mut top_level = Vec::new();
    for (i, raw) in raws.iter().enumerate() {
        let idx = TypeIdx(i as u32);
        if raw.parent.is_empty() {
            top_level.push(idx);
            continue;
        }
        let parent = *by_id.get(raw.parent).ok_or_else(|| {
            Error::parse(
                raw.line,
                format!("parent `{}` of `{}` is not defined", raw.parent, nodes[i].type_id),
            )
        })?;
        if parent == idx {
            return Err(Error::parse(
                raw.line,
                format!("cycle: `{}` is its own parent", nodes[i].type_id),
            ));
        }
        nodes[i].parent = Some(parent);
        nodes[parent.index()].children.push(idx);
    }

    // Depths by walking up to the root; a walk longer than the node count
    // means the parent relation has a cycle.
    let n = nodes.len();
    let mut depth: Vec<Option<usize>> = vec![None; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut cur = Some(start);
        let base = loop {
            match cur {
                None => break 0,
                Some(c) => {
                    if let Some(d) = depth[c] {
                        break d;
                    }
                    if path.len() > n {
                        return Err(Error::parse(
                            raws[start].line,
                            format!("cycle through `{}`", nodes[start].type_id),
                        ));
                    }
                    path.push(c);
                    cur = nodes[c].parent.map(TypeIdx::index);
                }
            }
        };
        for (k, &p) in path.iter().rev().enumerate() {
            depth[p] = Some(base + k + 1);
        }
    }
    let mut max_depth = 0;
    for (node, d) in nodes.iter_mut().zip(depth) {
        node.depth = d.expect("depth assigned to every node");
        max_depth = max_depth.max(node.depth);
    }

    Ok(TypeTaxonomy {
        nodes,
        by_id,
        top_level,
        max_depth,
    })
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<TypeTaxonomy> {
    load_with(path.as_ref(), parse_taxonomy)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entity {
    pub entity_id: String,
    pub name: String,
    pub description: String,
}

#[derive(Clone, Debug, Default)]
pub struct EntityCorpus {
    entities: Vec<Entity>,
    by_id: HashMap<String, EntityIdx>,
}

impl EntityCorpus {
    pub fn from_entities(entities: Vec<Entity>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(entities.len());
        for (i, e) in entities.iter().enumerate() {
            if by_id.insert(e.entity_id.clone(), EntityIdx(i as u32)).is_some() {
                return Err(Error::InvalidData(format!(
                    "duplicate entity id `{}`",
                    e.entity_id
                )));
            }
        }
        Ok(EntityCorpus { entities, by_id })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, entity_id: &str) -> Option<EntityIdx> {
        self.by_id.get(entity_id).copied()
    }

    pub fn entity(&self, e: EntityIdx) -> &Entity {
        &self.entities[e.index()]
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }
}

/// Parses `entities.tsv`: `entity_id<TAB>name<TAB>description`.
pub fn parse_entities(text: &str) -> Result<EntityCorpus> {
    let mut entities = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (line, fields) in tsv_records(text) {
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(Error::parse(line, "empty entity id"));
        }
        if let Some(first) = seen.insert(id, line) {
            return Err(Error::parse(
                line,
                format!("duplicate entity id `{id}` (first on line {first})"),
            ));
        }
        entities.push(Entity {
            entity_id: id.to_string(),
            name: fields[1].to_string(),
            description: fields.get(2).copied().unwrap_or("").to_string(),
        });
    }
    EntityCorpus::from_entities(entities)
}

pub fn load_entities(path: impl AsRef<Path>) -> Result<EntityCorpus> {
    load_with(path.as_ref(), parse_entities)
}

/// The indicator 1(e,t) together with the uniform weights w(e,t).
#[derive(Clone, Debug)]
pub struct TypeAssociations {
    assigned: Vec<Vec<TypeIdx>>,
    /// Per entity: every type whose extension holds it, sorted.
    member_of: Vec<Vec<TypeIdx>>,
    /// Per type: sorted entity extension.
    extension: Vec<Vec<EntityIdx>>,
    closure: bool,
}

impl TypeAssociations {
    /// Builds associations from direct `(entity, type)` assignments.
    pub fn from_assignments(
        taxonomy: &TypeTaxonomy,
        n_entities: usize,
        pairs: impl IntoIterator<Item = (EntityIdx, TypeIdx)>,
        closure: bool,
    ) -> Self {
        let mut assigned: Vec<Vec<TypeIdx>> = vec![Vec::new(); n_entities];
        for (e, t) in pairs {
            assigned[e.index()].push(t);
        }
        let mut member_of = Vec::with_capacity(n_entities);
        let mut extension: Vec<Vec<EntityIdx>> = vec![Vec::new(); taxonomy.len()];
        for (e, types) in assigned.iter_mut().enumerate() {
            types.sort_unstable();
            types.dedup();
            let mut closed = types.clone();
            if closure {
                for &t in types.iter() {
                    closed.extend(taxonomy.ancestors(t));
                }
                closed.sort_unstable();
                closed.dedup();
            }
            for &t in &closed {
                extension[t.index()].push(EntityIdx(e as u32));
            }
            member_of.push(closed);
        }
        TypeAssociations {
            assigned,
            member_of,
            extension,
            closure,
        }
    }

    pub fn closure(&self) -> bool {
        self.closure
    }

    pub fn n_entities(&self) -> usize {
        self.assigned.len()
    }

    pub fn n_types(&self) -> usize {
        self.extension.len()
    }

    /// Direct assignments of `e`.
    pub fn assigned(&self, e: EntityIdx) -> &[TypeIdx] {
        &self.assigned[e.index()]
    }

    /// Every type `e` counts towards (direct plus ancestors under closure).
    pub fn types_of(&self, e: EntityIdx) -> &[TypeIdx] {
        &self.member_of[e.index()]
    }

    pub fn extension(&self, t: TypeIdx) -> &[EntityIdx] {
        &self.extension[t.index()]
    }

    pub fn count(&self, t: TypeIdx) -> usize {
        self.extension[t.index()].len()
    }

    pub fn has_type(&self, e: EntityIdx, t: TypeIdx) -> bool {
        self.member_of[e.index()].binary_search(&t).is_ok()
    }

    /// w(e,t) = 1/|extension(t)| for members of the extension, else 0.
    pub fn weight(&self, e: EntityIdx, t: TypeIdx) -> f64 {
        if self.has_type(e, t) {
            1.0 / self.count(t) as f64
        } else {
            0.0
        }
    }

    /// Uniform weight of any member of `t`; 0 for an empty extension.
    pub fn member_weight(&self, t: TypeIdx) -> f64 {
        match self.count(t) {
            0 => 0.0,
            n => 1.0 / n as f64,
        }
    }
}

/// Parses `entity_types.tsv`: `entity_id<TAB>type_id`.
pub fn parse_entity_types(
    text: &str,
    taxonomy: &TypeTaxonomy,
    corpus: &EntityCorpus,
    closure: bool,
) -> Result<TypeAssociations> {
    let mut pairs = Vec::new();
    for (line, fields) in tsv_records(text) {
        if fields.len() != 2 {
            return Err(Error::parse(
                line,
                format!("expected 2 tab-separated fields, found {}", fields.len()),
            ));
        }
        let (eid, tid) = (fields[0].trim(), fields[1].trim());
        let e = corpus
            .get(eid)
            .ok_or_else(|| Error::parse(line, format!("unknown entity `{eid}`")))?;
        let t = taxonomy
            .get(tid)
            .ok_or_else(|| Error::parse(line, format!("unknown type `{tid}`")))?;
        pairs.push((e, t));
    }
    Ok(TypeAssociations::from_assignments(
        taxonomy,
        corpus.len(),
        pairs,
        closure,
    ))
}

pub fn load_entity_types(
    path: impl AsRef<Path>,
    taxonomy: &TypeTaxonomy,
    corpus: &EntityCorpus,
    closure: bool,
) -> Result<TypeAssociations> {
    load_with(path.as_ref(), |text| {
        parse_entity_types(text, taxonomy, corpus, closure)
    })
}

/// Taxonomy, corpus and associations loaded together.
#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    pub taxonomy: TypeTaxonomy,
    pub corpus: EntityCorpus,
    pub assoc: TypeAssociations,
}

impl KnowledgeBase {
    pub fn load(
        types: impl AsRef<Path>,
        entities: impl AsRef<Path>,
        entity_types: impl AsRef<Path>,
        closure: bool,
    ) -> Result<Self> {
        let taxonomy = load_taxonomy(types)?;
        let corpus = load_entities(entities)?;
        let assoc = load_entity_types(entity_types, &taxonomy, &corpus, closure)?;
        Ok(KnowledgeBase {
            taxonomy,
            corpus,
            assoc,
        })
    }

    pub fn parse(types: &str, entities: &str, entity_types: &str, closure: bool) -> Result<Self> {
        let taxonomy = parse_taxonomy(types)?;
        let corpus = parse_entities(entities)?;
        let assoc = parse_entity_types(entity_types, &taxonomy, &corpus, closure)?;
        Ok(KnowledgeBase {
            taxonomy,
            corpus,
            assoc,
        })
    }

    /// w(e,t) by identifier. Unknown entities simply carry no types.
    pub fn association_weight(&self, entity_id: &str, type_id: &str) -> Result<f64> {
        let t = self.taxonomy.require(type_id)?;
        Ok(match self.corpus.get(entity_id) {
            Some(e) => self.assoc.weight(e, t),
            None => 0.0,
        })
    }

    pub fn taxonomy_features(&self, type_id: &str) -> Result<TaxonomyFeatures> {
        let t = self.taxonomy.require(type_id)?;
        Ok(TaxonomyFeatures::of(&self.taxonomy, &self.assoc, t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaxonomyFeatures {
    pub depth_norm: f64,
    pub n_children: usize,
    pub n_siblings: usize,
    pub n_entities: usize,
}

impl TaxonomyFeatures {
    pub fn of(taxonomy: &TypeTaxonomy, assoc: &TypeAssociations, t: TypeIdx) -> Self {
        TaxonomyFeatures {
            depth_norm: taxonomy.depth(t) as f64 / taxonomy.max_depth() as f64,
            n_children: taxonomy.children(t).len(),
            n_siblings: taxonomy.n_siblings(t),
            n_entities: assoc.count(t),
        }
    }
}
