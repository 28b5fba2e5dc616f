//! Immutable knowledge graphs with dense integer ids and adjacency indexes.
//!
//! Entities and relations are interned in first-appearance order. The
//! observable graph and its completion are two separate [`KnowledgeGraph`]
//! values; [`load_pair`] makes them share one vocabulary so that ids agree.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A fact `r(head, tail)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub rel: RelId,
    pub head: EntityId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(rel: RelId, head: EntityId, tail: EntityId) -> Self {
        Triple { rel, head, tail }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("line {line}: expected 3 tab-separated fields, found {found}")]
    Malformed { line: usize, found: usize },
    #[error("line {line}: unknown {kind} `{name}`")]
    UnknownSymbol {
        line: usize,
        kind: &'static str,
        name: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Interned names in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Entity and relation vocabularies shared between graphs over the same
/// entity set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub entities: Interner,
    pub relations: Interner,
}

impl Vocabulary {
    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation(&self, name: &str) -> Option<RelId> {
        self.relations.get(name).map(RelId)
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entities.name(id.0)
    }

    pub fn relation_name(&self, id: RelId) -> Option<&str> {
        self.relations.name(id.0)
    }

    /// Vocabulary with generated names `e0..` and `r0..`.
    pub fn synthetic(num_entities: usize, num_relations: usize) -> Self {
        let mut vocab = Vocabulary::default();
        for i in 0..num_entities {
            vocab.entities.intern(&format!("e{i}"));
        }
        for i in 0..num_relations {
            vocab.relations.intern(&format!("r{i}"));
        }
        vocab
    }
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    vocab: Arc<Vocabulary>,
    facts: HashSet<Triple>,
    // relation -> head -> sorted tails
    by_head: Vec<HashMap<EntityId, Vec<EntityId>>>,
    // relation -> tail -> sorted heads
    by_tail: Vec<HashMap<EntityId, Vec<EntityId>>>,
    heads_of: Vec<Vec<EntityId>>,
    tails_of: Vec<Vec<EntityId>>,
    // undirected neighbour lists over all relations, sorted, deduplicated
    neighbours: Vec<Vec<EntityId>>,
    // entity -> sorted (relation, tail) / (relation, head)
    outgoing: Vec<Vec<(RelId, EntityId)>>,
    incoming: Vec<Vec<(RelId, EntityId)>>,
}

const EMPTY: &[EntityId] = &[];

impl KnowledgeGraph {
    /// Build a graph over `vocab` from already-interned facts.
    ///
    /// Panics if a triple references an id outside the vocabulary.
    pub fn from_triples(vocab: Arc<Vocabulary>, triples: impl IntoIterator<Item = Triple>) -> Self {
        let n_rel = vocab.relations.len();
        let n_ent = vocab.entities.len();
        let mut facts = HashSet::new();
        let mut by_head: Vec<HashMap<EntityId, Vec<EntityId>>> = vec![HashMap::new(); n_rel];
        let mut by_tail: Vec<HashMap<EntityId, Vec<EntityId>>> = vec![HashMap::new(); n_rel];
        let mut neighbours = vec![Vec::new(); n_ent];
        let mut outgoing = vec![Vec::new(); n_ent];
        let mut incoming = vec![Vec::new(); n_ent];
        for t in triples {
            assert!(
                t.rel.index() < n_rel && t.head.index() < n_ent && t.tail.index() < n_ent,
                "triple {t:?} outside vocabulary"
            );
            if !facts.insert(t) {
                continue;
            }
            by_head[t.rel.index()].entry(t.head).or_default().push(t.tail);
            by_tail[t.rel.index()].entry(t.tail).or_default().push(t.head);
            neighbours[t.head.index()].push(t.tail);
            neighbours[t.tail.index()].push(t.head);
            outgoing[t.head.index()].push((t.rel, t.tail));
            incoming[t.tail.index()].push((t.rel, t.head));
        }
        let mut heads_of = Vec::with_capacity(n_rel);
        let mut tails_of = Vec::with_capacity(n_rel);
        for r in 0..n_rel {
            for list in by_head[r].values_mut() {
                list.sort_unstable();
            }
            for list in by_tail[r].values_mut() {
                list.sort_unstable();
            }
            let mut heads: Vec<EntityId> = by_head[r].keys().copied().collect();
            heads.sort_unstable();
            let mut tails: Vec<EntityId> = by_tail[r].keys().copied().collect();
            tails.sort_unstable();
            heads_of.push(heads);
            tails_of.push(tails);
        }
        for list in &mut neighbours {
            list.sort_unstable();
            list.dedup();
        }
        for list in outgoing.iter_mut().chain(&mut incoming) {
            list.sort_unstable();
        }
        KnowledgeGraph {
            vocab,
            facts,
            by_head,
            by_tail,
            heads_of,
            tails_of,
            neighbours,
            outgoing,
            incoming,
        }
    }

    /// Parse `head\trelation\ttail` lines, interning names in
    /// first-appearance order.
    pub fn load_triples<R: BufRead>(source: R) -> Result<Self, LoadError> {
        let lines = read_lines(source)?;
        let mut vocab = Vocabulary::default();
        let triples = intern_lines(&lines, &mut vocab);
        Ok(Self::from_triples(Arc::new(vocab), triples))
    }

    /// Parse triples against an existing vocabulary; unknown names are errors.
    pub fn load_with_vocab<R: BufRead>(source: R, vocab: Arc<Vocabulary>) -> Result<Self, LoadError> {
        let lines = read_lines(source)?;
        let mut triples = Vec::with_capacity(lines.len());
        for l in &lines {
            let head = vocab.entity(&l.head).ok_or_else(|| unknown(l.line, "entity", &l.head))?;
            let rel = vocab.relation(&l.rel).ok_or_else(|| unknown(l.line, "relation", &l.rel))?;
            let tail = vocab.entity(&l.tail).ok_or_else(|| unknown(l.line, "entity", &l.tail))?;
            triples.push(Triple::new(rel, head, tail));
        }
        Ok(Self::from_triples(vocab, triples))
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.relations.len()
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.num_entities() as u32).map(EntityId)
    }

    pub fn facts(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.facts.iter()
    }

    /// Facts in (relation, head, tail) order.
    pub fn sorted_facts(&self) -> Vec<Triple> {
        let mut v: Vec<Triple> = self.facts.iter().copied().collect();
        v.sort_unstable();
        v
    }

    /// `G ⊨ r(a,b)`. Out-of-vocabulary ids are simply absent.
    #[inline]
    pub fn contains(&self, rel: RelId, head: EntityId, tail: EntityId) -> bool {
        self.facts.contains(&Triple::new(rel, head, tail))
    }

    pub fn tails(&self, rel: RelId, head: EntityId) -> &[EntityId] {
        self.by_head
            .get(rel.index())
            .and_then(|m| m.get(&head))
            .map_or(EMPTY, Vec::as_slice)
    }

    pub fn heads(&self, rel: RelId, tail: EntityId) -> &[EntityId] {
        self.by_tail
            .get(rel.index())
            .and_then(|m| m.get(&tail))
            .map_or(EMPTY, Vec::as_slice)
    }

    /// Sorted entities occurring as a head of `rel`.
    pub fn heads_of(&self, rel: RelId) -> &[EntityId] {
        self.heads_of.get(rel.index()).map_or(EMPTY, Vec::as_slice)
    }

    /// Sorted entities occurring as a tail of `rel`.
    pub fn tails_of(&self, rel: RelId) -> &[EntityId] {
        self.tails_of.get(rel.index()).map_or(EMPTY, Vec::as_slice)
    }

    pub fn is_head_of(&self, rel: RelId, e: EntityId) -> bool {
        self.heads_of(rel).binary_search(&e).is_ok()
    }

    pub fn is_tail_of(&self, rel: RelId, e: EntityId) -> bool {
        self.tails_of(rel).binary_search(&e).is_ok()
    }

    pub fn relation_size(&self, rel: RelId) -> usize {
        self.by_head
            .get(rel.index())
            .map_or(0, |m| m.values().map(Vec::len).sum())
    }

    /// Undirected neighbours over all relations, excluding nothing (a
    /// self-loop lists the entity itself).
    pub fn neighbours(&self, e: EntityId) -> &[EntityId] {
        self.neighbours.get(e.index()).map_or(EMPTY, Vec::as_slice)
    }

    /// Facts with head `e`, as sorted `(relation, tail)` pairs.
    pub fn outgoing(&self, e: EntityId) -> &[(RelId, EntityId)] {
        self.outgoing.get(e.index()).map_or(&[], Vec::as_slice)
    }

    /// Facts with tail `e`, as sorted `(relation, head)` pairs.
    pub fn incoming(&self, e: EntityId) -> &[(RelId, EntityId)] {
        self.incoming.get(e.index()).map_or(&[], Vec::as_slice)
    }

    /// Write facts as sorted `head\trelation\ttail` lines.
    pub fn write_triples<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in self.sorted_facts() {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.vocab.entity_name(t.head).unwrap_or_default(),
                self.vocab.relation_name(t.rel).unwrap_or_default(),
                self.vocab.entity_name(t.tail).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// `E(G) ⊆ E(G̃)` with equal entity and relation vocabularies (as sets).
pub fn subset_check(g: &KnowledgeGraph, g_tilde: &KnowledgeGraph) -> bool {
    if Arc::ptr_eq(&g.vocab, &g_tilde.vocab) || *g.vocab == *g_tilde.vocab {
        return g.facts.iter().all(|t| g_tilde.facts.contains(t));
    }
    let as_set = |i: &Interner| i.names().iter().cloned().collect::<HashSet<String>>();
    if as_set(&g.vocab.entities) != as_set(&g_tilde.vocab.entities)
        || as_set(&g.vocab.relations) != as_set(&g_tilde.vocab.relations)
    {
        return false;
    }
    g.facts.iter().all(|t| {
        let name_e = |e| g.vocab.entity_name(e).and_then(|n| g_tilde.vocab.entity(n));
        let rel = g.vocab.relation_name(t.rel).and_then(|n| g_tilde.vocab.relation(n));
        match (rel, name_e(t.head), name_e(t.tail)) {
            (Some(r), Some(h), Some(tl)) => g_tilde.contains(r, h, tl),
            _ => false,
        }
    })
}

/// Load an observable graph and its completion over one shared vocabulary.
/// Ids are assigned in first-appearance order over the observable file,
/// then the completion file.
pub fn load_pair<R1: BufRead, R2: BufRead>(
    observed: R1,
    complete: R2,
) -> Result<(KnowledgeGraph, KnowledgeGraph), LoadError> {
    let obs_lines = read_lines(observed)?;
    let full_lines = read_lines(complete)?;
    let mut vocab = Vocabulary::default();
    let obs = intern_lines(&obs_lines, &mut vocab);
    let full = intern_lines(&full_lines, &mut vocab);
    let vocab = Arc::new(vocab);
    Ok((
        KnowledgeGraph::from_triples(vocab.clone(), obs),
        KnowledgeGraph::from_triples(vocab, full),
    ))
}

struct RawLine {
    line: usize,
    head: String,
    rel: String,
    tail: String,
}

fn read_lines<R: BufRead>(source: R) -> Result<Vec<RawLine>, LoadError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(LoadError::Malformed {
                line: i + 1,
                found: fields.len(),
            });
        }
        out.push(RawLine {
            line: i + 1,
            head: fields[0].to_owned(),
            rel: fields[1].to_owned(),
            tail: fields[2].to_owned(),
        });
    }
    Ok(out)
}

fn intern_lines(lines: &[RawLine], vocab: &mut Vocabulary) -> Vec<Triple> {
    lines
        .iter()
        .map(|l| {
            let head = EntityId(vocab.entities.intern(&l.head));
            let rel = RelId(vocab.relations.intern(&l.rel));
            let tail = EntityId(vocab.entities.intern(&l.tail));
            Triple::new(rel, head, tail)
        })
        .collect()
}

fn unknown(line: usize, kind: &'static str, name: &str) -> LoadError {
    LoadError::UnknownSymbol {
        line,
        kind,
        name: name.to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> KnowledgeGraph {
        KnowledgeGraph::load_triples(s.as_bytes()).unwrap()
    }

    #[test]
    fn single_triple() {
        let g = load("a\tr\tb\n");
        assert_eq!(g.num_entities(), 2);
        assert_eq!(g.num_relations(), 1);
        assert_eq!(g.num_facts(), 1);
    }

    #[test]
    fn duplicates_are_dropped() {
        let g = load("a\tr\tb\na\tr\tb\n");
        assert_eq!(g.num_facts(), 1);
        assert_eq!(g.tails(RelId(0), EntityId(0)), &[EntityId(1)]);
    }

    #[test]
    fn heads_and_tails_of_relation() {
        let g = load("a\tr\tb\nb\tr\tc\n");
        let r = g.vocab().relation("r").unwrap();
        let ids = |names: &[&str]| {
            let mut v: Vec<EntityId> = names.iter().map(|n| g.vocab().entity(n).unwrap()).collect();
            v.sort();
            v
        };
        assert_eq!(g.tails_of(r), ids(&["b", "c"]).as_slice());
        assert_eq!(g.heads_of(r), ids(&["a", "b"]).as_slice());
    }

    #[test]
    fn empty_input_is_empty_graph() {
        let g = load("");
        assert_eq!(g.num_facts(), 0);
        assert_eq!(g.num_entities(), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = KnowledgeGraph::load_triples("a\tr\tb\n\nx\ty\n".as_bytes()).unwrap_err();
        match err {
            LoadError::Malformed { line, found } => {
                assert_eq!(line, 3);
                assert_eq!(found, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn contains_respects_direction_and_vocabulary() {
        let g = load("a\tr\tb\n");
        let (a, b) = (EntityId(0), EntityId(1));
        assert!(g.contains(RelId(0), a, b));
        assert!(!g.contains(RelId(0), b, a));
        assert!(!g.contains(RelId(7), a, b));
        assert!(g.tails(RelId(7), a).is_empty());
    }

    #[test]
    fn subset_checks() {
        let full = "a\tr\tb\nb\tr\tc\nc\ts\ta\n";
        let g_tilde = load(full);
        assert!(subset_check(&g_tilde, &g_tilde));

        let (g, gt) = load_pair("a\tr\tb\nc\ts\ta\n".as_bytes(), full.as_bytes()).unwrap();
        assert!(subset_check(&g, &gt));

        let (g, gt) = load_pair("a\tr\tb\na\ts\tc\n".as_bytes(), full.as_bytes()).unwrap();
        assert!(!subset_check(&g, &gt));

        // separately loaded graphs with different id orders
        let g = load("c\ts\ta\n\na\tr\tb\nb\tr\tc\n");
        assert!(subset_check(&g, &g_tilde));
        let g = load("c\ts\ta\na\tr\tb\nb\tr\tc\nb\ts\ta\n");
        assert!(!subset_check(&g, &g_tilde));
    }

    #[test]
    fn index_sizes_match_fact_counts() {
        let g = load("a\tr\tb\na\tr\tc\nb\tr\tc\nc\ts\ta\n");
        for r in 0..g.num_relations() as u32 {
            let r = RelId(r);
            let n = g.facts().filter(|t| t.rel == r).count();
            let by_head: usize = g.heads_of(r).iter().map(|&h| g.tails(r, h).len()).sum();
            let by_tail: usize = g.tails_of(r).iter().map(|&t| g.heads(r, t).len()).sum();
            assert_eq!(n, by_head);
            assert_eq!(n, by_tail);
        }
    }
}
