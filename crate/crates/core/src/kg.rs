//! Knowledge graph storage: vocabularies, triples, type assertions, textual
//! records and the signed-relation neighbour index.
//!
//! A dataset directory holds tab-separated files:
//!
//! ```text
//! entity_text.tsv     <entity>\t<label>\t<description>
//! relation_text.tsv   <relation>\t<label>
//! type_text.tsv       <type>\t<label>
//! triples.tsv         <subject>\t<relation>\t<object>
//! types_train.tsv     <entity>\t<type>
//! types_valid.tsv     <entity>\t<type>
//! types_test.tsv      <entity>\t<type>
//! manifest.json       optional counts used for validation
//! ```
//!
//! The three `*_text.tsv` files double as vocabularies: ids are assigned in
//! line order, so they stay stable across runs regardless of triple order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($name:ident, $kind:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        pub struct $name(pub u32);

        impl $name {
            pub const KIND: &'static str = $kind;

            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                $name(u32::try_from(i).expect(concat!($kind, " id overflows u32")))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(EntityId, "entity");
id_type!(RelationId, "relation");
id_type!(TypeId, "type");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    fn slot(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "types_train.tsv",
            Split::Valid => "types_valid.tsv",
            Split::Test => "types_test.tsv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypeAssertion {
    pub entity: EntityId,
    pub type_: TypeId,
    pub split: Split,
}

/// Traversal direction of a triple as seen from the queried entity.
///
/// `Inverse` edges are embedded with the negated relation vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    /// Sign applied to the relation embedding when traversing in this direction.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Inverse => -1.0,
        }
    }
}

/// One incident triple of an entity: `Forward` for `(e, r, n)`, `Inverse`
/// for `(n, r, e)`. Ordering is (relation, direction, neighbor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NeighborEdge {
    pub relation: RelationId,
    pub direction: Direction,
    pub neighbor: EntityId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TextRecord {
    pub label: String,
    pub description: String,
}

/// Optional expected counts for validating a loaded dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entities: Option<usize>,
    pub relations: Option<usize>,
    pub types: Option<usize>,
    pub triples: Option<usize>,
    pub train: Option<usize>,
    pub valid: Option<usize>,
    pub test: Option<usize>,
}

impl DatasetManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Published FB15kET statistics.
    pub fn fb15ket() -> Self {
        DatasetManifest {
            entities: Some(14_951),
            relations: Some(1_345),
            types: Some(3_851),
            triples: Some(483_142),
            train: Some(136_618),
            valid: Some(15_749),
            test: Some(15_780),
        }
    }

    /// Published YAGO43kET statistics.
    pub fn yago43ket() -> Self {
        DatasetManifest {
            entities: Some(42_335),
            relations: Some(37),
            types: Some(45_182),
            triples: Some(331_687),
            train: Some(375_853),
            valid: Some(42_739),
            test: Some(42_750),
        }
    }

    pub fn of(graph: &KnowledgeGraph) -> Self {
        DatasetManifest {
            entities: Some(graph.num_entities()),
            relations: Some(graph.num_relations()),
            types: Some(graph.num_types()),
            triples: Some(graph.triples().len()),
            train: Some(graph.assertions(Split::Train).len()),
            valid: Some(graph.assertions(Split::Valid).len()),
            test: Some(graph.assertions(Split::Test).len()),
        }
    }

    fn check(&self, graph: &KnowledgeGraph, file: &Path) -> Result<()> {
        let found = DatasetManifest::of(graph);
        let pairs = [
            ("entity", self.entities, found.entities),
            ("relation", self.relations, found.relations),
            ("type", self.types, found.types),
            ("triple", self.triples, found.triples),
            ("train assertion", self.train, found.train),
            ("valid assertion", self.valid, found.valid),
            ("test assertion", self.test, found.test),
        ];
        for (what, expected, found) in pairs {
            if let (Some(expected), Some(found)) = (expected, found) {
                if expected != found {
                    return Err(Error::CountMismatch {
                        file: file.to_path_buf(),
                        what,
                        expected,
                        found,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn insert(&mut self, name: &str) -> Option<u32> {
        if self.index.contains_key(name) {
            return None;
        }
        let id = u32::try_from(self.names.len()).expect("vocabulary overflows u32");
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        Some(id)
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    fn len(&self) -> usize {
        self.names.len()
    }
}

/// Immutable, fully indexed knowledge graph.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    types: Vocab,
    entity_text: Vec<TextRecord>,
    relation_text: Vec<TextRecord>,
    type_text: Vec<TextRecord>,
    triples: Vec<Triple>,
    assertions: [Vec<TypeAssertion>; 3],
    neighbors: Vec<Vec<NeighborEdge>>,
    known: Vec<Vec<TypeId>>,
}

impl KnowledgeGraph {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn assertions(&self, split: Split) -> &[TypeAssertion] {
        &self.assertions[split.slot()]
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        &self.entities.names[e.index()]
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        &self.relations.names[r.index()]
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        &self.types.names[t.index()]
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(RelationId)
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.types.get(name).map(TypeId)
    }

    pub fn entity_text(&self, e: EntityId) -> &TextRecord {
        &self.entity_text[e.index()]
    }

    pub fn relation_text(&self, r: RelationId) -> &TextRecord {
        &self.relation_text[r.index()]
    }

    pub fn type_text(&self, t: TypeId) -> &TextRecord {
        &self.type_text[t.index()]
    }

    pub fn check_entity(&self, e: EntityId) -> Result<()> {
        if e.index() < self.num_entities() {
            Ok(())
        } else {
            Err(Error::InvalidId {
                kind: EntityId::KIND,
                id: e.index(),
                size: self.num_entities(),
            })
        }
    }

    pub fn check_type(&self, t: TypeId) -> Result<()> {
        if t.index() < self.num_types() {
            Ok(())
        } else {
            Err(Error::InvalidId {
                kind: TypeId::KIND,
                id: t.index(),
                size: self.num_types(),
            })
        }
    }

    /// Every forward and inverse edge incident to `e`, sorted by
    /// (relation, direction, neighbor).
    pub fn neighbors(&self, e: EntityId) -> Result<&[NeighborEdge]> {
        self.check_entity(e)?;
        Ok(&self.neighbors[e.index()])
    }

    /// Train-split types of `e`, sorted ascending.
    pub fn known_types(&self, e: EntityId) -> Result<&[TypeId]> {
        self.check_entity(e)?;
        Ok(&self.known[e.index()])
    }

    // Unchecked accessors for hot loops where ids come from the graph itself.
    pub(crate) fn neighbors_of(&self, e: EntityId) -> &[NeighborEdge] {
        &self.neighbors[e.index()]
    }

    pub(crate) fn known_of(&self, e: EntityId) -> &[TypeId] {
        &self.known[e.index()]
    }

    /// All types asserted for `e` in any split; the filter set for ranking.
    pub fn all_types_by_entity(&self) -> Vec<HashSet<TypeId>> {
        let mut out = vec![HashSet::new(); self.num_entities()];
        for split in Split::ALL {
            for a in self.assertions(split) {
                out[a.entity.index()].insert(a.type_);
            }
        }
        out
    }

    /// Entities with at least one train assertion, ascending.
    pub fn train_entities(&self) -> Vec<EntityId> {
        (0..self.num_entities())
            .map(EntityId::from)
            .filter(|e| !self.known[e.index()].is_empty())
            .collect()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities.names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations.names
    }

    pub fn type_names(&self) -> &[String] {
        &self.types.names
    }
}

/// Incremental construction of a [`KnowledgeGraph`]. Used by the loader,
/// the binary graph artifact reader and test fixtures.
#[derive(Debug, Default)]
pub struct KnowledgeGraphBuilder {
    entities: Vocab,
    relations: Vocab,
    types: Vocab,
    entity_text: Vec<TextRecord>,
    relation_text: Vec<TextRecord>,
    type_text: Vec<TextRecord>,
    triples: Vec<Triple>,
    triple_set: HashSet<Triple>,
    assertions: [Vec<TypeAssertion>; 3],
    assertion_set: HashSet<(EntityId, TypeId, Split)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildError {
    DuplicateName(String),
    UnknownEntity(EntityId),
    UnknownRelation(RelationId),
    UnknownType(TypeId),
    DuplicateTriple,
    DuplicateAssertion,
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::DuplicateName(n) => write!(f, "duplicate identifier {n:?}"),
            BuildError::UnknownEntity(e) => write!(f, "unknown entity id {e}"),
            BuildError::UnknownRelation(r) => write!(f, "unknown relation id {r}"),
            BuildError::UnknownType(t) => write!(f, "unknown type id {t}"),
            BuildError::DuplicateTriple => f.write_str("duplicate triple"),
            BuildError::DuplicateAssertion => f.write_str("duplicate type assertion within split"),
        }
    }
}

impl std::error::Error for BuildError {}

impl KnowledgeGraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_entity(
        &mut self,
        name: &str,
        label: &str,
        description: &str,
    ) -> std::result::Result<EntityId, BuildError> {
        let id = self
            .entities
            .insert(name)
            .ok_or_else(|| BuildError::DuplicateName(name.to_owned()))?;
        self.entity_text.push(TextRecord {
            label: label.to_owned(),
            description: description.to_owned(),
        });
        Ok(EntityId(id))
    }

    pub fn add_relation(
        &mut self,
        name: &str,
        label: &str,
    ) -> std::result::Result<RelationId, BuildError> {
        let id = self
            .relations
            .insert(name)
            .ok_or_else(|| BuildError::DuplicateName(name.to_owned()))?;
        self.relation_text.push(TextRecord {
            label: label.to_owned(),
            description: String::new(),
        });
        Ok(RelationId(id))
    }

    pub fn add_type(&mut self, name: &str, label: &str) -> std::result::Result<TypeId, BuildError> {
        let id = self
            .types
            .insert(name)
            .ok_or_else(|| BuildError::DuplicateName(name.to_owned()))?;
        self.type_text.push(TextRecord {
            label: label.to_owned(),
            description: String::new(),
        });
        Ok(TypeId(id))
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(RelationId)
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.types.get(name).map(TypeId)
    }

    pub fn add_triple(
        &mut self,
        subject: EntityId,
        relation: RelationId,
        object: EntityId,
    ) -> std::result::Result<(), BuildError> {
        for e in [subject, object] {
            if e.index() >= self.entities.len() {
                return Err(BuildError::UnknownEntity(e));
            }
        }
        if relation.index() >= self.relations.len() {
            return Err(BuildError::UnknownRelation(relation));
        }
        let triple = Triple {
            subject,
            relation,
            object,
        };
        if !self.triple_set.insert(triple) {
            return Err(BuildError::DuplicateTriple);
        }
        self.triples.push(triple);
        Ok(())
    }

    pub fn add_assertion(
        &mut self,
        entity: EntityId,
        type_: TypeId,
        split: Split,
    ) -> std::result::Result<(), BuildError> {
        if entity.index() >= self.entities.len() {
            return Err(BuildError::UnknownEntity(entity));
        }
        if type_.index() >= self.types.len() {
            return Err(BuildError::UnknownType(type_));
        }
        if !self.assertion_set.insert((entity, type_, split)) {
            return Err(BuildError::DuplicateAssertion);
        }
        self.assertions[split.slot()].push(TypeAssertion {
            entity,
            type_,
            split,
        });
        Ok(())
    }

    pub fn build(self) -> KnowledgeGraph {
        let n = self.entities.len();
        let mut neighbors = vec![Vec::new(); n];
        for t in &self.triples {
            neighbors[t.subject.index()].push(NeighborEdge {
                relation: t.relation,
                direction: Direction::Forward,
                neighbor: t.object,
            });
            neighbors[t.object.index()].push(NeighborEdge {
                relation: t.relation,
                direction: Direction::Inverse,
                neighbor: t.subject,
            });
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let mut known = vec![Vec::new(); n];
        for a in &self.assertions[Split::Train.slot()] {
            known[a.entity.index()].push(a.type_);
        }
        for list in &mut known {
            list.sort_unstable();
        }

        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            types: self.types,
            entity_text: self.entity_text,
            relation_text: self.relation_text,
            type_text: self.type_text,
            triples: self.triples,
            assertions: self.assertions,
            neighbors,
            known,
        }
    }
}

pub const ENTITY_TEXT_FILE: &str = "entity_text.tsv";
pub const RELATION_TEXT_FILE: &str = "relation_text.tsv";
pub const TYPE_TEXT_FILE: &str = "type_text.tsv";
pub const TRIPLES_FILE: &str = "triples.tsv";

struct TsvReader {
    path: PathBuf,
    text: String,
}

impl TsvReader {
    fn open(dir: &Path, name: &str) -> Result<Self> {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|e| Error::Load {
            file: path.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        Ok(TsvReader { path, text })
    }

    /// Non-blank lines as (1-based line number, fields).
    fn rows(&self) -> impl Iterator<Item = (usize, Vec<&str>)> {
        self.text.lines().enumerate().filter_map(|(i, line)| {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                None
            } else {
                Some((i + 1, line.split('\t').collect()))
            }
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Load {
            file: self.path.clone(),
            line,
            message: message.into(),
        }
    }
}

/// Load and index a dataset directory.
///
/// When `manifest` is `None` and the directory contains `manifest.json`,
/// that file is used for validation instead.
pub fn load_dataset(dir: &Path, manifest: Option<&DatasetManifest>) -> Result<KnowledgeGraph> {
    let mut b = KnowledgeGraphBuilder::new();

    let ents = TsvReader::open(dir, ENTITY_TEXT_FILE)?;
    for (line, f) in ents.rows() {
        if f.len() < 2 {
            return Err(ents.err(line, "expected <entity>\\t<label>[\\t<description>]"));
        }
        let desc = f.get(2).copied().unwrap_or("");
        b.add_entity(f[0], f[1], desc)
            .map_err(|e| ents.err(line, e.to_string()))?;
    }

    let rels = TsvReader::open(dir, RELATION_TEXT_FILE)?;
    for (line, f) in rels.rows() {
        let label = f.get(1).copied().unwrap_or(f[0]);
        b.add_relation(f[0], label)
            .map_err(|e| rels.err(line, e.to_string()))?;
    }

    let types = TsvReader::open(dir, TYPE_TEXT_FILE)?;
    for (line, f) in types.rows() {
        let label = f.get(1).copied().unwrap_or(f[0]);
        b.add_type(f[0], label)
            .map_err(|e| types.err(line, e.to_string()))?;
    }

    let triples = TsvReader::open(dir, TRIPLES_FILE)?;
    for (line, f) in triples.rows() {
        if f.len() != 3 {
            return Err(triples.err(line, "expected <subject>\\t<relation>\\t<object>"));
        }
        let s = b
            .entity_id(f[0])
            .ok_or_else(|| triples.err(line, format!("unknown entity {:?}", f[0])))?;
        let r = b
            .relation_id(f[1])
            .ok_or_else(|| triples.err(line, format!("unknown relation {:?}", f[1])))?;
        let o = b
            .entity_id(f[2])
            .ok_or_else(|| triples.err(line, format!("unknown entity {:?}", f[2])))?;
        b.add_triple(s, r, o)
            .map_err(|e| triples.err(line, e.to_string()))?;
    }

    for split in Split::ALL {
        let file = TsvReader::open(dir, split.file_name())?;
        for (line, f) in file.rows() {
            if f.len() != 2 {
                return Err(file.err(line, "expected <entity>\\t<type>"));
            }
            let e = b
                .entity_id(f[0])
                .ok_or_else(|| file.err(line, format!("unknown entity {:?}", f[0])))?;
            let t = b
                .type_id(f[1])
                .ok_or_else(|| file.err(line, format!("unknown type {:?}", f[1])))?;
            b.add_assertion(e, t, split)
                .map_err(|e| file.err(line, e.to_string()))?;
        }
    }

    let graph = b.build();

    let manifest_path = dir.join(DatasetManifest::FILE_NAME);
    match manifest {
        Some(m) => m.check(&graph, &manifest_path)?,
        None if manifest_path.exists() => {
            DatasetManifest::from_file(&manifest_path)?.check(&graph, &manifest_path)?
        }
        None => {}
    }
    Ok(graph)
}

/// Write `graph` as a dataset directory readable by [`load_dataset`].
pub fn write_dataset(graph: &KnowledgeGraph, dir: &Path) -> Result<()> {
    use std::fmt::Write as _;

    fs::create_dir_all(dir)?;
    let mut s = String::new();
    for (i, name) in graph.entity_names().iter().enumerate() {
        let t = graph.entity_text(EntityId::from(i));
        writeln!(s, "{name}\t{}\t{}", t.label, t.description).unwrap();
    }
    fs::write(dir.join(ENTITY_TEXT_FILE), &s)?;

    s.clear();
    for (i, name) in graph.relation_names().iter().enumerate() {
        writeln!(
            s,
            "{name}\t{}",
            graph.relation_text(RelationId::from(i)).label
        )
        .unwrap();
    }
    fs::write(dir.join(RELATION_TEXT_FILE), &s)?;

    s.clear();
    for (i, name) in graph.type_names().iter().enumerate() {
        writeln!(s, "{name}\t{}", graph.type_text(TypeId::from(i)).label).unwrap();
    }
    fs::write(dir.join(TYPE_TEXT_FILE), &s)?;

    s.clear();
    for t in graph.triples() {
        writeln!(
            s,
            "{}\t{}\t{}",
            graph.entity_name(t.subject),
            graph.relation_name(t.relation),
            graph.entity_name(t.object)
        )
        .unwrap();
    }
    fs::write(dir.join(TRIPLES_FILE), &s)?;

    for split in Split::ALL {
        s.clear();
        for a in graph.assertions(split) {
            writeln!(
                s,
                "{}\t{}",
                graph.entity_name(a.entity),
                graph.type_name(a.type_)
            )
            .unwrap();
        }
        fs::write(dir.join(split.file_name()), &s)?;
    }
    Ok(())
}
