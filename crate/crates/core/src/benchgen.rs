//! Benchmark generation: hub-sampled base queries, QAC instances with
//! easy/hard labels, QAR instances and arity lifting.
//!
//! Every instance can be re-verified against the oracle with
//! [`verify_qac`] / [`verify_qar`].

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::io::{BufRead, Write};
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{oracle_solve, OracleConfig, OracleError, OracleMode};
use crate::kg::{EntityId, KnowledgeGraph, Vocabulary};
use crate::templates::{sample_query, QueryType, TemplateError};
use crate::query::{parse_query, ConjunctiveQuery, Literal, QueryError, Term, VarId};

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub n_hub: usize,
    pub n_min: usize,
    pub p_const: f64,
    pub p_out: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Hub3,
    Hub4,
    Hub5,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Hub3 => "3hub",
            Preset::Hub4 => "4hub",
            Preset::Hub5 => "5hub",
        }
    }

    /// `n_min` is 15 for dense graphs and 12 for sparse ones.
    pub fn params(self, n_min: usize) -> GenParams {
        let (n_hub, p_const, p_out) = match self {
            Preset::Hub3 => (2, 0.6, 0.95),
            Preset::Hub4 => (3, 0.8, 0.97),
            Preset::Hub5 => (4, 1.0, 0.99),
        };
        GenParams {
            n_hub,
            n_min,
            p_const,
            p_out,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "3hub" | "3-hub" => Ok(Preset::Hub3),
            "4hub" | "4-hub" => Ok(Preset::Hub4),
            "5hub" | "5-hub" => Ok(Preset::Hub5),
            _ => Err(format!("unknown preset `{s}` (expected 3hub, 4hub or 5hub)")),
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let ok = self.n_hub >= 1
            && (0.0..=1.0).contains(&self.p_const)
            && (0.0..=1.0).contains(&self.p_out);
        if ok {
            Ok(())
        } else {
            Err(GenError::BadParams(format!("{self:?}")))
        }
    }
}

pub const OUTER_RETRIES: usize = 1000;
pub const HUB_RETRIES: usize = 100;

/// Rejection counters, reported when generation gives up.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GenStats {
    pub attempts: usize,
    pub small_neighbourhood: usize,
    pub paths_too_long: usize,
    pub growth_stuck: usize,
    pub all_observed: usize,
    pub no_hard_answer: usize,
    pub oracle_incomplete: usize,
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation parameters {0}")]
    BadParams(String),
    #[error("generation exhausted its retry budget: {0:?}")]
    Exhausted(GenStats),
    #[error("query has no existential variable left to promote")]
    NoExistential,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Oracle limits used while labelling instances.
#[derive(Clone, Debug)]
pub struct LabelBudget {
    pub timeout: Option<Duration>,
    pub max_nodes: Option<u64>,
}

impl Default for LabelBudget {
    fn default() -> Self {
        LabelBudget {
            timeout: Some(Duration::from_secs(30)),
            max_nodes: Some(50_000_000),
        }
    }
}

impl LabelBudget {
    fn config(&self, mode: OracleMode) -> OracleConfig {
        OracleConfig {
            mode,
            timeout: self.timeout,
            max_nodes: self.max_nodes,
        }
    }
}

/// Vertices within distance 2 of `v` in `g` (undirected), excluding `v`.
fn two_hop(g: &KnowledgeGraph, v: EntityId) -> Vec<EntityId> {
    let mut seen: BTreeSet<EntityId> = BTreeSet::new();
    for &a in g.neighbours(v) {
        seen.insert(a);
        seen.extend(g.neighbours(a).iter().copied());
    }
    seen.remove(&v);
    seen.into_iter().collect()
}

fn restricted_degree(g: &KnowledgeGraph, w: EntityId, set: &HashSet<EntityId>) -> usize {
    g.neighbours(w).iter().filter(|u| set.contains(u)).count()
}

/// Shortest path from `src` to `dst` inside `allowed`, endpoints included.
fn bfs_path(g: &KnowledgeGraph, src: EntityId, dst: EntityId, allowed: &HashSet<EntityId>) -> Option<Vec<EntityId>> {
    let mut prev = std::collections::HashMap::new();
    let mut queue = VecDeque::from([src]);
    prev.insert(src, src);
    while let Some(u) = queue.pop_front() {
        if u == dst {
            let mut path = vec![dst];
            let mut cur = dst;
            while cur != src {
                cur = prev[&cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &w in g.neighbours(u) {
            if allowed.contains(&w) && !prev.contains_key(&w) {
                prev.insert(w, u);
                queue.push_back(w);
            }
        }
    }
    None
}

/// A sampled base query, with the vertex the free variable came from.
#[derive(Clone, Debug)]
pub struct BaseQuery {
    pub query: ConjunctiveQuery,
    pub anchor: EntityId,
    pub hubs: Vec<EntityId>,
}

enum Attempt {
    Done(BaseQuery),
    SmallNeighbourhood,
    PathsTooLong,
    GrowthStuck,
    AllObserved,
}

fn attempt<R: Rng + ?Sized>(g: &KnowledgeGraph, gt: &KnowledgeGraph, p: &GenParams, rng: &mut R) -> Attempt {
    let n = g.num_entities() as u32;
    // steps 1-2
    let mut found = None;
    for _ in 0..HUB_RETRIES {
        let v = EntityId(rng.random_range(0..n));
        let n2 = two_hop(gt, v);
        if n2.len() >= p.n_hub {
            let hubs: Vec<EntityId> = n2.choose_multiple(rng, p.n_hub).copied().collect();
            found = Some((v, hubs));
            break;
        }
    }
    let Some((v, hubs)) = found else {
        return Attempt::SmallNeighbourhood;
    };
    let mut core: Vec<EntityId> = vec![v];
    core.extend(&hubs);
    let core_set: HashSet<EntityId> = core.iter().copied().collect();

    // step 3
    let mut d: HashSet<EntityId> = HashSet::new();
    for &w in &core {
        d.insert(w);
        d.extend(gt.neighbours(w).iter().copied());
    }
    // step 4: one pass over the leaves of the initial restriction
    let mut sorted_d: Vec<EntityId> = d.iter().copied().collect();
    sorted_d.sort_unstable();
    let leaves: Vec<EntityId> = sorted_d
        .iter()
        .copied()
        .filter(|w| !core_set.contains(w) && restricted_degree(gt, *w, &d) == 1)
        .collect();
    for w in leaves {
        if rng.random_bool(p.p_out) {
            d.remove(&w);
        }
    }

    // step 5: connect the hubs to v, then grow
    let mut chosen: BTreeSet<EntityId> = BTreeSet::new();
    for &h in &hubs {
        let Some(path) = bfs_path(gt, v, h, &d) else {
            return Attempt::GrowthStuck;
        };
        chosen.extend(path.into_iter().filter(|w| !core_set.contains(w)));
    }
    if chosen.len() > p.n_min {
        return Attempt::PathsTooLong;
    }
    let mut members: HashSet<EntityId> = core_set.clone();
    members.extend(chosen.iter().copied());
    while chosen.len() < p.n_min {
        let mut frontier: Vec<EntityId> = d
            .iter()
            .copied()
            .filter(|w| !members.contains(w) && gt.neighbours(*w).iter().any(|u| members.contains(u)))
            .collect();
        if frontier.is_empty() {
            return Attempt::GrowthStuck;
        }
        frontier.sort_unstable();
        let w = *frontier.choose(rng).expect("non-empty");
        chosen.insert(w);
        members.insert(w);
    }
    let facts: Vec<_> = gt
        .sorted_facts()
        .into_iter()
        .filter(|t| members.contains(&t.head) && members.contains(&t.tail))
        .collect();
    if facts.iter().all(|t| g.contains(t.rel, t.head, t.tail)) {
        return Attempt::AllObserved;
    }

    // step 6: degree counts facts incident to w inside P'
    let mut constants: HashSet<EntityId> = HashSet::new();
    for &w in &chosen {
        let deg = facts.iter().filter(|t| t.head == w || t.tail == w).count().max(1);
        if rng.random_bool((p.p_const / (deg * deg) as f64).min(1.0)) {
            constants.insert(w);
        }
    }

    // step 7
    let mut names = vec!["x1".to_owned()];
    let mut var_of = std::collections::HashMap::from([(v, VarId(0))]);
    let mut ordered: Vec<EntityId> = members.iter().copied().filter(|w| *w != v).collect();
    ordered.sort_unstable();
    for w in ordered {
        if !constants.contains(&w) {
            var_of.insert(w, VarId(names.len() as u32));
            names.push(format!("y{}", names.len()));
        }
    }
    let term = |e: EntityId| var_of.get(&e).map_or(Term::Const(e), |&var| Term::Var(var));
    let literals = facts
        .iter()
        .map(|t| Literal::atom(t.rel, term(t.head), term(t.tail)))
        .collect();
    let n_vars = names.len() as u32;
    Attempt::Done(BaseQuery {
        query: ConjunctiveQuery {
            var_names: names,
            free: vec![VarId(0)],
            exists: (1..n_vars).map(VarId).collect(),
            literals,
        },
        anchor: v,
        hubs,
    })
}

/// Sample one hub query with one free variable. `g` must be a subgraph
/// of `gt`.
pub fn sample_base_query<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    gt: &KnowledgeGraph,
    params: &GenParams,
    rng: &mut R,
    stats: &mut GenStats,
) -> Result<BaseQuery, GenError> {
    params.validate()?;
    for _ in 0..OUTER_RETRIES {
        stats.attempts += 1;
        match attempt(g, gt, params, rng) {
            Attempt::Done(b) => return Ok(b),
            Attempt::SmallNeighbourhood => stats.small_neighbourhood += 1,
            Attempt::PathsTooLong => stats.paths_too_long += 1,
            Attempt::GrowthStuck => stats.growth_stuck += 1,
            Attempt::AllObserved => stats.all_observed += 1,
        }
    }
    Err(GenError::Exhausted(stats.clone()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct QacInstance {
    pub query: ConjunctiveQuery,
    pub correct: Vec<EntityId>,
    pub wrong: Vec<EntityId>,
    /// Members of `correct` not entailed by the observable graph.
    pub hard: Vec<EntityId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QarInstance {
    pub query: ConjunctiveQuery,
    pub answers: Vec<Vec<EntityId>>,
    /// Some answer already exists in the observable graph.
    pub has_trivial: bool,
}

/// Answers over `g` and `gt`, or `None` if either is incomplete.
fn answer_sets(
    q: &ConjunctiveQuery,
    g: &KnowledgeGraph,
    gt: &KnowledgeGraph,
    budget: &LabelBudget,
) -> Result<Option<(Vec<EntityId>, HashSet<EntityId>)>, OracleError> {
    let cfg = budget.config(OracleMode::AllAnswers);
    let full = oracle_solve(q, gt, &cfg, None)?;
    if !full.exhausted {
        return Ok(None);
    }
    // answers over G are a subset; only those need checking
    let seeds: Vec<Vec<EntityId>> = full.answers.clone();
    let obs = oracle_solve(q, g, &cfg, Some(&seeds))?;
    if !obs.exhausted {
        return Ok(None);
    }
    Ok(Some((
        full.answers.into_iter().map(|t| t[0]).collect(),
        obs.answers.into_iter().map(|t| t[0]).collect(),
    )))
}

/// Build a QAC instance from a one-variable query. Returns `Ok(None)` when
/// the query has no hard answer or the oracle could not finish.
pub fn make_qac_instance<R: Rng + ?Sized>(
    query: &ConjunctiveQuery,
    g: &KnowledgeGraph,
    gt: &KnowledgeGraph,
    budget: &LabelBudget,
    rng: &mut R,
) -> Result<Option<QacInstance>, GenError> {
    assert_eq!(query.free.len(), 1, "QAC queries have one free variable");
    let Some((all, easy)) = answer_sets(query, g, gt, budget)? else {
        return Ok(None);
    };
    if all.iter().all(|a| easy.contains(a)) {
        return Ok(None);
    }
    let answer_set: HashSet<EntityId> = all.iter().copied().collect();
    let non: Vec<EntityId> = gt.entities().filter(|e| !answer_set.contains(e)).collect();
    let size = all.len().clamp(5, 10).min(all.len()).min(non.len());
    if size == 0 {
        return Ok(None);
    }
    let weight = |a: &EntityId| if easy.contains(a) { 1.0 } else { 2.0 };
    let mut correct: Vec<EntityId> = all
        .choose_multiple_weighted(rng, size, weight)
        .expect("positive weights")
        .copied()
        .collect();
    // make sure the instance keeps at least one hard answer
    if correct.iter().all(|a| easy.contains(a)) {
        let hard: Vec<EntityId> = all.iter().copied().filter(|a| !easy.contains(a)).collect();
        let i = rng.random_range(0..correct.len());
        correct[i] = *hard.choose(rng).expect("has hard");
    }
    let mut wrong: Vec<EntityId> = non.choose_multiple(rng, size).copied().collect();
    correct.sort_unstable();
    wrong.sort_unstable();
    let hard = correct.iter().copied().filter(|a| !easy.contains(a)).collect();
    Ok(Some(QacInstance {
        query: query.clone(),
        correct,
        wrong,
        hard,
    }))
}

/// QAR instance for any query; `Ok(None)` if the oracle could not finish.
pub fn make_qar_instance(
    query: &ConjunctiveQuery,
    g: &KnowledgeGraph,
    gt: &KnowledgeGraph,
    budget: &LabelBudget,
) -> Result<Option<QarInstance>, GenError> {
    let full = oracle_solve(query, gt, &budget.config(OracleMode::AllAnswers), None)?;
    if !full.exhausted || full.answers.is_empty() {
        return Ok(None);
    }
    let trivial = oracle_solve(query, g, &budget.config(OracleMode::Boolean), Some(&full.answers))?;
    if !trivial.exhausted && !trivial.holds() {
        return Ok(None);
    }
    Ok(Some(QarInstance {
        query: query.clone(),
        answers: full.answers,
        has_trivial: trivial.holds(),
    }))
}

/// Promote a random existential variable to a new trailing free variable
/// and recompute the answers, extending only the previous answer tuples.
pub fn lift_arity<R: Rng + ?Sized>(
    inst: &QarInstance,
    gt: &KnowledgeGraph,
    budget: &LabelBudget,
    rng: &mut R,
) -> Result<Option<QarInstance>, GenError> {
    let q = &inst.query;
    // only variables that occur in some literal
    let used: HashSet<VarId> = q.mentioned_vars().into_iter().collect();
    let candidates: Vec<usize> = (0..q.exists.len()).filter(|&i| used.contains(&q.exists[i])).collect();
    let Some(&idx) = candidates.choose(rng) else {
        return Err(GenError::NoExistential);
    };
    let lifted = q.promote_existential(idx);
    let res = oracle_solve(&lifted, gt, &budget.config(OracleMode::AllAnswers), Some(&inst.answers))?;
    if !res.exhausted {
        return Ok(None);
    }
    // the existential closure is unchanged, so has_trivial carries over
    Ok(Some(QarInstance {
        query: lifted,
        answers: res.answers,
        has_trivial: inst.has_trivial,
    }))
}

/// Generate `count` QAC instances from hub queries.
pub fn generate_qac<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    gt: &KnowledgeGraph,
    params: &GenParams,
    count: usize,
    budget: &LabelBudget,
    rng: &mut R,
) -> Result<(Vec<QacInstance>, GenStats), GenError> {
    let mut stats = GenStats::default();
    let mut out = Vec::with_capacity(count);
    let mut misses = 0;
    while out.len() < count {
        let base = sample_base_query(g, gt, params, rng, &mut stats)?;
        match make_qac_instance(&base.query, g, gt, budget, rng)? {
            Some(inst) => {
                out.push(inst);
                misses = 0;
            }
            None => {
                stats.no_hard_answer += 1;
                misses += 1;
                if misses >= OUTER_RETRIES {
                    return Err(GenError::Exhausted(stats));
                }
            }
        }
    }
    Ok((out, stats))
}

/// Generate `count` QAC instances of a small query type, instantiated on
/// the complete graph. Queries without hard answers are discarded.
pub fn generate_template_qac<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    gt: &KnowledgeGraph,
    ty: QueryType,
    count: usize,
    budget: &LabelBudget,
    rng: &mut R,
) -> Result<(Vec<QacInstance>, GenStats), GenError> {
    let mut stats = GenStats::default();
    let mut out = Vec::with_capacity(count);
    let mut misses = 0;
    while out.len() < count {
        if misses >= OUTER_RETRIES {
            return Err(GenError::Exhausted(stats));
        }
        stats.attempts += 1;
        let (q, _) = sample_query(gt, ty, rng)?;
        match make_qac_instance(&q, g, gt, budget, rng)? {
            Some(inst) => {
                out.push(inst);
                misses = 0;
            }
            None => {
                stats.no_hard_answer += 1;
                misses += 1;
            }
        }
    }
    Ok((out, stats))
}

/// Generate `count` QAR instances of arity `arity` (1 to 3) from hub
/// queries. Base queries without hard answers are discarded.
pub fn generate_qar<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    gt: &KnowledgeGraph,
    params: &GenParams,
    count: usize,
    arity: usize,
    budget: &LabelBudget,
    rng: &mut R,
) -> Result<(Vec<QarInstance>, GenStats), GenError> {
    assert!(arity >= 1);
    let mut stats = GenStats::default();
    let mut out = Vec::with_capacity(count);
    let mut misses = 0;
    'outer: while out.len() < count {
        if misses >= OUTER_RETRIES {
            return Err(GenError::Exhausted(stats));
        }
        let base = sample_base_query(g, gt, params, rng, &mut stats)?;
        let Some((all, easy)) = answer_sets(&base.query, g, gt, budget)? else {
            stats.oracle_incomplete += 1;
            misses += 1;
            continue;
        };
        if all.iter().all(|a| easy.contains(a)) {
            stats.no_hard_answer += 1;
            misses += 1;
            continue;
        }
        let mut inst = QarInstance {
            answers: all.iter().map(|a| vec![*a]).collect(),
            query: base.query,
            has_trivial: !easy.is_empty(),
        };
        for _ in 1..arity {
            match lift_arity(&inst, gt, budget, rng) {
                Ok(Some(next)) => inst = next,
                Ok(None) => {
                    stats.oracle_incomplete += 1;
                    misses += 1;
                    continue 'outer;
                }
                Err(GenError::NoExistential) => {
                    misses += 1;
                    continue 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        misses = 0;
        out.push(inst);
    }
    Ok((out, stats))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("|correct| = {0} but |wrong| = {1}")]
    Unbalanced(usize, usize),
    #[error("instance has no correct entities")]
    Empty,
    #[error("correct entity {0} is not an answer over the complete graph")]
    NotAnswer(u32),
    #[error("wrong entity {0} is an answer over the complete graph")]
    WrongIsAnswer(u32),
    #[error("hard flag of entity {0} disagrees with the observable graph")]
    HardFlag(u32),
    #[error("instance has no hard answer")]
    NoHard,
    #[error("answer tuple {0:?} does not hold over the complete graph")]
    BadTuple(Vec<u32>),
    #[error("has_trivial disagrees with the observable graph")]
    Trivial,
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn holds_at(q: &ConjunctiveQuery, g: &KnowledgeGraph, tuple: &[EntityId]) -> Result<bool, VerifyError> {
    let grounded = q.ground(tuple)?;
    Ok(oracle_solve(&grounded, g, &OracleConfig::boolean(), None)?.holds())
}

/// Re-check every label of `inst` with the oracle.
pub fn verify_qac(inst: &QacInstance, g: &KnowledgeGraph, gt: &KnowledgeGraph) -> Result<(), VerifyError> {
    if inst.correct.len() != inst.wrong.len() {
        return Err(VerifyError::Unbalanced(inst.correct.len(), inst.wrong.len()));
    }
    if inst.correct.is_empty() {
        return Err(VerifyError::Empty);
    }
    let hard: HashSet<&EntityId> = inst.hard.iter().collect();
    for c in &inst.correct {
        if !holds_at(&inst.query, gt, &[*c])? {
            return Err(VerifyError::NotAnswer(c.0));
        }
        if holds_at(&inst.query, g, &[*c])? == hard.contains(c) {
            return Err(VerifyError::HardFlag(c.0));
        }
    }
    if let Some(h) = inst.hard.iter().find(|h| !inst.correct.contains(h)) {
        return Err(VerifyError::HardFlag(h.0));
    }
    for w in &inst.wrong {
        if holds_at(&inst.query, gt, &[*w])? {
            return Err(VerifyError::WrongIsAnswer(w.0));
        }
    }
    if inst.hard.is_empty() {
        return Err(VerifyError::NoHard);
    }
    Ok(())
}

pub fn verify_qar(inst: &QarInstance, g: &KnowledgeGraph, gt: &KnowledgeGraph) -> Result<(), VerifyError> {
    if inst.answers.is_empty() {
        return Err(VerifyError::Empty);
    }
    for t in &inst.answers {
        if !holds_at(&inst.query, gt, t)? {
            return Err(VerifyError::BadTuple(t.iter().map(|e| e.0).collect()));
        }
    }
    let closed = inst.query.existentially_close();
    if oracle_solve(&closed, g, &OracleConfig::boolean(), None)?.holds() != inst.has_trivial {
        return Err(VerifyError::Trivial);
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum InstanceIoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown entity `{name}`")]
    UnknownEntity { line: usize, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct QacRecord {
    query: String,
    correct: Vec<String>,
    wrong: Vec<String>,
    hard: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct QarRecord {
    query: String,
    answers: Vec<Vec<String>>,
    has_trivial: bool,
}

fn names(vocab: &Vocabulary, es: &[EntityId]) -> Vec<String> {
    es.iter()
        .map(|e| vocab.entity_name(*e).map_or_else(|| format!("unknown_{}", e.0), str::to_owned))
        .collect()
}

fn ids(vocab: &Vocabulary, ns: &[String], line: usize) -> Result<Vec<EntityId>, InstanceIoError> {
    ns.iter()
        .map(|n| {
            vocab.entity(n).ok_or_else(|| InstanceIoError::UnknownEntity {
                line,
                name: n.clone(),
            })
        })
        .collect()
}

pub fn query_string(q: &ConjunctiveQuery, vocab: &Vocabulary) -> String {
    q.to_named(vocab).to_string()
}

fn parse_single(text: &str, vocab: &Vocabulary, line: usize) -> Result<ConjunctiveQuery, InstanceIoError> {
    let err = |message: String| InstanceIoError::Parse { line, message };
    let dnf = parse_query(text).map_err(|e| err(e.to_string()))?;
    let mut bound = dnf.bind(vocab).map_err(|e| err(e.to_string()))?;
    if bound.disjuncts.len() != 1 {
        return Err(err("instance queries must be conjunctive".into()));
    }
    Ok(bound.disjuncts.remove(0))
}

pub fn write_qac<W: Write>(mut w: W, insts: &[QacInstance], vocab: &Vocabulary) -> std::io::Result<()> {
    for i in insts {
        let rec = QacRecord {
            query: query_string(&i.query, vocab),
            correct: names(vocab, &i.correct),
            wrong: names(vocab, &i.wrong),
            hard: names(vocab, &i.hard),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_qac<R: BufRead>(r: R, vocab: &Vocabulary) -> Result<Vec<QacInstance>, InstanceIoError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QacRecord = serde_json::from_str(&line).map_err(|e| InstanceIoError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(QacInstance {
            query: parse_single(&rec.query, vocab, n + 1)?,
            correct: ids(vocab, &rec.correct, n + 1)?,
            wrong: ids(vocab, &rec.wrong, n + 1)?,
            hard: ids(vocab, &rec.hard, n + 1)?,
        });
    }
    Ok(out)
}

pub fn write_qar<W: Write>(mut w: W, insts: &[QarInstance], vocab: &Vocabulary) -> std::io::Result<()> {
    for i in insts {
        let rec = QarRecord {
            query: query_string(&i.query, vocab),
            answers: i.answers.iter().map(|t| names(vocab, t)).collect(),
            has_trivial: i.has_trivial,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_qar<R: BufRead>(r: R, vocab: &Vocabulary) -> Result<Vec<QarInstance>, InstanceIoError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QarRecord = serde_json::from_str(&line).map_err(|e| InstanceIoError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(QarInstance {
            query: parse_single(&rec.query, vocab, n + 1)?,
            answers: rec
                .answers
                .iter()
                .map(|t| ids(vocab, t, n + 1))
                .collect::<Result<_, _>>()?,
            has_trivial: rec.has_trivial,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthetic_pair, SynthConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn presets() {
        let p = Preset::Hub3.params(15);
        assert_eq!((p.n_hub, p.p_const, p.p_out, p.n_min), (2, 0.6, 0.95, 15));
        assert_eq!("5hub".parse::<Preset>().unwrap().params(12).n_hub, 4);
    }

    #[test]
    fn identical_graphs_always_reject() {
        let pair = synthetic_pair(&SynthConfig::default());
        let g = &pair.complete;
        let mut stats = GenStats::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Preset::Hub3.params(8);
        let err = sample_base_query(g, g, &p, &mut rng, &mut stats).unwrap_err();
        assert!(matches!(err, GenError::Exhausted(_)));
        assert!(stats.all_observed > 0);
    }

    #[test]
    fn hub_queries_are_connected_and_unobserved() {
        let pair = synthetic_pair(&SynthConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = Preset::Hub3.params(12);
        for _ in 0..20 {
            let b = sample_base_query(&pair.observed, &pair.complete, &p, &mut rng, &mut GenStats::default()).unwrap();
            let q = &b.query;
            q.validate().unwrap();
            assert!(q.query_graph().is_connected());
            assert_eq!(b.hubs.len(), 2);
            assert!(q.terms().len() <= 12 + 2 + 1);
            let grounded = q.ground(&[b.anchor]).unwrap();
            assert!(crate::eval::holds(&grounded, &pair.complete).unwrap());
        }
    }

    #[test]
    fn qac_and_qar_verify_and_roundtrip() {
        let pair = synthetic_pair(&SynthConfig::default());
        let (g, gt) = (&pair.observed, &pair.complete);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Preset::Hub3.params(10);
        let budget = LabelBudget::default();
        let (qac, _) = generate_qac(g, gt, &p, 5, &budget, &mut rng).unwrap();
        for i in &qac {
            verify_qac(i, g, gt).unwrap();
        }
        let mut buf = Vec::new();
        write_qac(&mut buf, &qac, gt.vocab()).unwrap();
        let back = read_qac(&buf[..], gt.vocab()).unwrap();
        assert_eq!(back, qac);

        let (qar, _) = generate_qar(g, gt, &p, 3, 2, &budget, &mut rng).unwrap();
        for i in &qar {
            assert_eq!(i.query.free.len(), 2);
            verify_qar(i, g, gt).unwrap();
        }
        // parsing renumbers variables, so compare the serialised forms
        let mut buf = Vec::new();
        write_qar(&mut buf, &qar, gt.vocab()).unwrap();
        let back = read_qar(&buf[..], gt.vocab()).unwrap();
        let mut again = Vec::new();
        write_qar(&mut again, &back, gt.vocab()).unwrap();
        assert_eq!(buf, again);
        assert_eq!(back[0].answers, qar[0].answers);
    }

    #[test]
    fn deterministic_stream() {
        let pair = synthetic_pair(&SynthConfig::default());
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            generate_qac(
                &pair.observed,
                &pair.complete,
                &Preset::Hub4.params(10),
                3,
                &LabelBudget::default(),
                &mut rng,
            )
            .unwrap()
            .0
        };
        assert_eq!(run(), run());
    }
}
