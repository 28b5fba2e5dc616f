//! Link predictors `π : R × V × V → [0,1]`.
//!
//! Besides pointwise scores, predictors answer bulk existence questions
//! ("does `a` have any tail under `r` scoring at least 0.5?") so that
//! potential-edge labels can be built without a |V|² scan when the
//! predictor has an index.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kg::{EntityId, KnowledgeGraph, RelId, Triple, Vocabulary};

/// Binarization threshold for literal satisfaction.
pub const THRESHOLD: f64 = 0.5;

/// Cap applied to predicted (unobserved) scores by [`Augmented`].
pub const UNOBSERVED_CAP: f64 = 0.9999;

/// Whether a literal with raw predictor score `score` counts as satisfied.
#[inline]
pub fn satisfied(score: f64, negated: bool) -> bool {
    let s = if negated { 1.0 - score } else { score };
    s >= THRESHOLD
}

pub trait LinkPredictor: Send + Sync {
    fn num_entities(&self) -> usize;

    fn score(&self, rel: RelId, head: EntityId, tail: EntityId) -> f64;

    /// `∃b. π(r, head, b) ≥ 0.5`
    fn exists_tail(&self, rel: RelId, head: EntityId) -> bool {
        (0..self.num_entities() as u32).any(|b| satisfied(self.score(rel, head, EntityId(b)), false))
    }

    /// `∃a. π(r, a, tail) ≥ 0.5`
    fn exists_head(&self, rel: RelId, tail: EntityId) -> bool {
        (0..self.num_entities() as u32).any(|a| satisfied(self.score(rel, EntityId(a), tail), false))
    }

    /// `∃b. 1 − π(r, head, b) ≥ 0.5`
    fn exists_tail_false(&self, rel: RelId, head: EntityId) -> bool {
        (0..self.num_entities() as u32).any(|b| satisfied(self.score(rel, head, EntityId(b)), true))
    }

    /// `∃a. 1 − π(r, a, tail) ≥ 0.5`
    fn exists_head_false(&self, rel: RelId, tail: EntityId) -> bool {
        (0..self.num_entities() as u32).any(|a| satisfied(self.score(rel, EntityId(a), tail), true))
    }
}

impl<P: LinkPredictor + ?Sized> LinkPredictor for Arc<P> {
    fn num_entities(&self) -> usize {
        (**self).num_entities()
    }
    fn score(&self, rel: RelId, head: EntityId, tail: EntityId) -> f64 {
        (**self).score(rel, head, tail)
    }
    fn exists_tail(&self, rel: RelId, head: EntityId) -> bool {
        (**self).exists_tail(rel, head)
    }
    fn exists_head(&self, rel: RelId, tail: EntityId) -> bool {
        (**self).exists_head(rel, tail)
    }
    fn exists_tail_false(&self, rel: RelId, head: EntityId) -> bool {
        (**self).exists_tail_false(rel, head)
    }
    fn exists_head_false(&self, rel: RelId, tail: EntityId) -> bool {
        (**self).exists_head_false(rel, tail)
    }
}

/// Indicator of membership in a completion graph.
#[derive(Clone, Debug)]
pub struct PerfectPredictor {
    graph: Arc<KnowledgeGraph>,
}

impl PerfectPredictor {
    pub fn new(graph: Arc<KnowledgeGraph>) -> Self {
        PerfectPredictor { graph }
    }

    pub fn graph(&self) -> &Arc<KnowledgeGraph> {
        &self.graph
    }
}

impl LinkPredictor for PerfectPredictor {
    fn num_entities(&self) -> usize {
        self.graph.num_entities()
    }

    #[inline]
    fn score(&self, rel: RelId, head: EntityId, tail: EntityId) -> f64 {
        if self.graph.contains(rel, head, tail) {
            1.0
        } else {
            0.0
        }
    }

    fn exists_tail(&self, rel: RelId, head: EntityId) -> bool {
        self.graph.is_head_of(rel, head)
    }

    fn exists_head(&self, rel: RelId, tail: EntityId) -> bool {
        self.graph.is_tail_of(rel, tail)
    }

    fn exists_tail_false(&self, rel: RelId, head: EntityId) -> bool {
        self.graph.tails(rel, head).len() < self.num_entities()
    }

    fn exists_head_false(&self, rel: RelId, tail: EntityId) -> bool {
        self.graph.heads(rel, tail).len() < self.num_entities()
    }
}

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("line {line}: expected `relation\\thead\\ttail\\tprob`")]
    Malformed { line: usize },
    #[error("line {line}: probability `{text}` is not a number in [0,1]")]
    BadProbability { line: usize, text: String },
    #[error("line {line}: unknown {kind} `{name}`")]
    Unknown {
        line: usize,
        kind: &'static str,
        name: String,
    },
    #[error("flip rate {0} outside [0, 0.5)")]
    InvalidRate(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// Per (relation, entity) counts over stored entries: total, >= 0.5, <= 0.5.
#[derive(Clone, Copy, Debug, Default)]
struct Counts {
    stored: u32,
    at_least_half: u32,
    at_most_half: u32,
}

/// Sparse table of triple probabilities with a default for absent triples.
#[derive(Clone, Debug)]
pub struct TabularPredictor {
    num_entities: usize,
    default: f64,
    table: HashMap<Triple, f64>,
    by_head: HashMap<(RelId, EntityId), Counts>,
    by_tail: HashMap<(RelId, EntityId), Counts>,
}

impl TabularPredictor {
    pub fn new(num_entities: usize, default: f64, entries: impl IntoIterator<Item = (Triple, f64)>) -> Self {
        assert!((0.0..=1.0).contains(&default), "default probability out of range");
        let table: HashMap<Triple, f64> = entries
            .into_iter()
            .map(|(t, p)| {
                assert!((0.0..=1.0).contains(&p), "probability out of range");
                (t, p)
            })
            .collect();
        let mut by_head: HashMap<(RelId, EntityId), Counts> = HashMap::new();
        let mut by_tail: HashMap<(RelId, EntityId), Counts> = HashMap::new();
        for (t, &p) in &table {
            for c in [
                by_head.entry((t.rel, t.head)).or_default(),
                by_tail.entry((t.rel, t.tail)).or_default(),
            ] {
                c.stored += 1;
                c.at_least_half += u32::from(p >= THRESHOLD);
                c.at_most_half += u32::from(p <= THRESHOLD);
            }
        }
        TabularPredictor {
            num_entities,
            default,
            table,
            by_head,
            by_tail,
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn default_score(&self) -> f64 {
        self.default
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Triple, &f64)> {
        self.table.iter()
    }

    /// Read `relation\thead\ttail\tprob` lines against `vocab`.
    pub fn load<R: BufRead>(source: R, vocab: &Vocabulary, default: f64) -> Result<Self, PredictorError> {
        let mut entries = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let n = i + 1;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(PredictorError::Malformed { line: n });
            }
            let unknown = |kind, name: &str| PredictorError::Unknown {
                line: n,
                kind,
                name: name.to_owned(),
            };
            let rel = vocab.relation(f[0]).ok_or_else(|| unknown("relation", f[0]))?;
            let head = vocab.entity(f[1]).ok_or_else(|| unknown("entity", f[1]))?;
            let tail = vocab.entity(f[2]).ok_or_else(|| unknown("entity", f[2]))?;
            let p: f64 = f[3]
                .trim()
                .parse()
                .ok()
                .filter(|p: &f64| (0.0..=1.0).contains(p))
                .ok_or_else(|| PredictorError::BadProbability {
                    line: n,
                    text: f[3].to_owned(),
                })?;
            entries.push((Triple::new(rel, head, tail), p));
        }
        Ok(TabularPredictor::new(vocab.entities.len(), default, entries))
    }

    /// Write entries sorted by triple.
    pub fn write<W: Write>(&self, vocab: &Vocabulary, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<(&Triple, &f64)> = self.table.iter().collect();
        rows.sort_by_key(|(t, _)| **t);
        for (t, p) in rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                vocab.relation_name(t.rel).unwrap_or_default(),
                vocab.entity_name(t.head).unwrap_or_default(),
                vocab.entity_name(t.tail).unwrap_or_default(),
                p
            )?;
        }
        Ok(())
    }

    fn count_true(&self, c: Option<&Counts>) -> usize {
        let c = c.copied().unwrap_or_default();
        if self.default >= THRESHOLD {
            self.num_entities - (c.stored - c.at_least_half) as usize
        } else {
            c.at_least_half as usize
        }
    }

    fn count_false(&self, c: Option<&Counts>) -> usize {
        let c = c.copied().unwrap_or_default();
        if self.default <= THRESHOLD {
            self.num_entities - (c.stored - c.at_most_half) as usize
        } else {
            c.at_most_half as usize
        }
    }
}

impl LinkPredictor for TabularPredictor {
    fn num_entities(&self) -> usize {
        self.num_entities
    }

    #[inline]
    fn score(&self, rel: RelId, head: EntityId, tail: EntityId) -> f64 {
        self.table
            .get(&Triple::new(rel, head, tail))
            .copied()
            .unwrap_or(self.default)
    }

    fn exists_tail(&self, rel: RelId, head: EntityId) -> bool {
        self.count_true(self.by_head.get(&(rel, head))) > 0
    }

    fn exists_head(&self, rel: RelId, tail: EntityId) -> bool {
        self.count_true(self.by_tail.get(&(rel, tail))) > 0
    }

    fn exists_tail_false(&self, rel: RelId, head: EntityId) -> bool {
        self.count_false(self.by_head.get(&(rel, head))) > 0
    }

    fn exists_head_false(&self, rel: RelId, tail: EntityId) -> bool {
        self.count_false(self.by_tail.get(&(rel, tail))) > 0
    }
}

/// Observed facts score 1; everything else is the wrapped predictor's
/// score capped at [`UNOBSERVED_CAP`].
#[derive(Clone, Debug)]
pub struct Augmented<P> {
    inner: P,
    observed: Arc<KnowledgeGraph>,
}

impl<P: LinkPredictor> Augmented<P> {
    pub fn new(inner: P, observed: Arc<KnowledgeGraph>) -> Self {
        Augmented { inner, observed }
    }
}

/// Wrap `rho` with the observable graph.
pub fn augment_with_observed<P: LinkPredictor>(rho: P, observed: Arc<KnowledgeGraph>) -> Augmented<P> {
    Augmented::new(rho, observed)
}

impl<P: LinkPredictor> LinkPredictor for Augmented<P> {
    fn num_entities(&self) -> usize {
        self.inner.num_entities()
    }

    #[inline]
    fn score(&self, rel: RelId, head: EntityId, tail: EntityId) -> f64 {
        if self.observed.contains(rel, head, tail) {
            1.0
        } else {
            self.inner.score(rel, head, tail).min(UNOBSERVED_CAP)
        }
    }

    fn exists_tail(&self, rel: RelId, head: EntityId) -> bool {
        self.observed.is_head_of(rel, head) || self.inner.exists_tail(rel, head)
    }

    fn exists_head(&self, rel: RelId, tail: EntityId) -> bool {
        self.observed.is_tail_of(rel, tail) || self.inner.exists_head(rel, tail)
    }
}

/// A tabular predictor that agrees with `g_tilde` at threshold 0.5 except on
/// an exact `flip_rate` fraction of the sampled triples.
///
/// Every fact of `g_tilde` is sampled with a score in `[0.5, 1]`, plus an
/// equal number of random non-facts with scores in `[0, 0.5)`. Then
/// `round(flip_rate · sampled)` of them are pushed across the threshold.
/// Unsampled triples score 0.
pub fn noisy_perfect(g_tilde: &KnowledgeGraph, flip_rate: f64, seed: u64) -> Result<TabularPredictor, PredictorError> {
    if !(0.0..0.5).contains(&flip_rate) {
        return Err(PredictorError::InvalidRate(flip_rate));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g_tilde.num_entities();
    let n_rel = g_tilde.num_relations();
    let positives = g_tilde.sorted_facts();
    let mut negatives: Vec<Triple> = Vec::new();
    let mut seen: HashSet<Triple> = HashSet::new();
    if n > 0 && n_rel > 0 {
        let capacity = n_rel * n * n - positives.len();
        let wanted = positives.len().min(capacity);
        let mut attempts = 0usize;
        while negatives.len() < wanted && attempts < 100 * wanted + 1000 {
            attempts += 1;
            let t = Triple::new(
                RelId(rng.random_range(0..n_rel as u32)),
                EntityId(rng.random_range(0..n as u32)),
                EntityId(rng.random_range(0..n as u32)),
            );
            if !g_tilde.contains(t.rel, t.head, t.tail) && seen.insert(t) {
                negatives.push(t);
            }
        }
    }
    let mut sampled: Vec<(Triple, bool)> = positives
        .into_iter()
        .map(|t| (t, true))
        .chain(negatives.into_iter().map(|t| (t, false)))
        .collect();
    let n_flip = (flip_rate * sampled.len() as f64).round() as usize;
    let flipped: HashSet<usize> = index::sample(&mut rng, sampled.len(), n_flip).into_iter().collect();
    let entries = sampled
        .drain(..)
        .enumerate()
        .map(|(i, (t, truth))| {
            let above = truth != flipped.contains(&i);
            let p = if above {
                rng.random_range(THRESHOLD..=1.0)
            } else {
                rng.random_range(0.0..THRESHOLD)
            };
            (t, p)
        })
        .collect::<Vec<_>>();
    Ok(TabularPredictor::new(n, 0.0, entries))
}
