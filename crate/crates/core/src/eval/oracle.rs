//! Exact classical evaluation by backtracking join.
//!
//! Free variables are enumerated first; for each complete free tuple the
//! existential variables are checked for any extension. Variable order is
//! dynamic: smallest candidate list first, lowest id on ties. Negated and
//! clause literals are checked once all their terms are bound.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::kg::{EntityId, KnowledgeGraph, RelId};
use crate::query::{ConjunctiveQuery, Literal, LiteralKind, Term, VarId};

const CHECK_EVERY: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OracleMode {
    /// Is there any answer at all.
    Boolean,
    FirstAnswer,
    #[default]
    AllAnswers,
}

#[derive(Clone, Debug, Default)]
pub struct OracleConfig {
    pub mode: OracleMode,
    pub timeout: Option<Duration>,
    /// Cap on backtracking nodes.
    pub max_nodes: Option<u64>,
}

impl OracleConfig {
    pub fn all() -> Self {
        OracleConfig::default()
    }

    pub fn boolean() -> Self {
        OracleConfig {
            mode: OracleMode::Boolean,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    /// Sorted, distinct answer tuples over the free variables. A Boolean
    /// query that holds has the single answer `[]`.
    pub answers: Vec<Vec<EntityId>>,
    /// The answer set is complete.
    pub exhausted: bool,
    pub timed_out: bool,
    pub budget_exceeded: bool,
    pub nodes: u64,
    pub wall_time: Duration,
}

impl OracleResult {
    pub fn holds(&self) -> bool {
        !self.answers.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("unsafe query: variable `{0}` occurs in no positive atom")]
    Unsafe(String),
    #[error("seed tuple has {got} values but the query has only {free} free variables")]
    SeedArity { got: usize, free: usize },
}

/// Whether `lit` holds in `g` under a binding covering its terms.
pub fn literal_holds(g: &KnowledgeGraph, lit: &Literal, value: &impl Fn(&Term) -> EntityId) -> bool {
    let v = match &lit.kind {
        LiteralKind::Atom { rel, args } => g.contains(*rel, value(&args[0]), value(&args[1])),
        LiteralKind::Clause(body) => body.iter().any(|b| literal_holds(g, b, value)),
    };
    v != lit.negated
}

/// Classical check of a Boolean query under a total assignment of its
/// variables (`values` indexed by [`VarId`]).
pub fn assignment_holds(g: &KnowledgeGraph, q: &ConjunctiveQuery, values: &[Option<EntityId>]) -> bool {
    let value = |t: &Term| match t {
        Term::Const(c) => *c,
        Term::Var(v) => values[v.index()].expect("assignment must be total"),
    };
    q.literals.iter().all(|l| literal_holds(g, l, &value))
}

#[derive(Clone, Copy)]
enum Side {
    Head,
    Tail,
    Both,
}

struct Solver<'a> {
    g: &'a KnowledgeGraph,
    q: &'a ConjunctiveQuery,
    cfg: &'a OracleConfig,
    binding: Vec<Option<EntityId>>,
    // literal indices per variable
    var_lits: Vec<Vec<usize>>,
    // positive atoms per variable: (relation, side of v, other term)
    anchors: Vec<Vec<(RelId, Side, Term)>>,
    lit_vars: Vec<Vec<VarId>>,
    nodes: u64,
    start: Instant,
    answers: BTreeSet<Vec<EntityId>>,
    aborted: Option<Abort>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Abort {
    Timeout,
    Budget,
}

#[derive(PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
}

impl<'a> Solver<'a> {
    fn new(g: &'a KnowledgeGraph, q: &'a ConjunctiveQuery, cfg: &'a OracleConfig) -> Result<Self, OracleError> {
        let n_vars = q.var_names.len();
        let mut var_lits = vec![Vec::new(); n_vars];
        let mut anchors = vec![Vec::new(); n_vars];
        let mut lit_vars = Vec::with_capacity(q.literals.len());
        for (i, lit) in q.literals.iter().enumerate() {
            let vars: Vec<VarId> = lit.terms().iter().filter_map(Term::as_var).collect();
            for v in &vars {
                var_lits[v.index()].push(i);
            }
            lit_vars.push(vars);
            if let (LiteralKind::Atom { rel, args }, false) = (&lit.kind, lit.negated) {
                match (&args[0], &args[1]) {
                    (Term::Var(a), Term::Var(b)) if a == b => anchors[a.index()].push((*rel, Side::Both, args[1].clone())),
                    (h, t) => {
                        if let Term::Var(a) = h {
                            anchors[a.index()].push((*rel, Side::Head, t.clone()));
                        }
                        if let Term::Var(b) = t {
                            anchors[b.index()].push((*rel, Side::Tail, h.clone()));
                        }
                    }
                }
            }
        }
        for v in q.free.iter().chain(&q.exists) {
            if anchors[v.index()].is_empty() {
                return Err(OracleError::Unsafe(q.var_name(*v).to_owned()));
            }
        }
        Ok(Solver {
            g,
            q,
            cfg,
            binding: vec![None; n_vars],
            var_lits,
            anchors,
            lit_vars,
            nodes: 0,
            start: Instant::now(),
            answers: BTreeSet::new(),
            aborted: None,
        })
    }

    fn value(&self, t: &Term) -> Option<EntityId> {
        match t {
            Term::Const(c) => Some(*c),
            Term::Var(v) => self.binding[v.index()],
        }
    }

    /// Smallest candidate list for `v` given the current binding.
    fn candidates(&self, v: VarId) -> &'a [EntityId] {
        let g = self.g;
        let mut best: Option<&'a [EntityId]> = None;
        for (rel, side, other) in &self.anchors[v.index()] {
            let list = match (side, self.value(other)) {
                (Side::Head, Some(b)) => g.heads(*rel, b),
                (Side::Tail, Some(a)) => g.tails(*rel, a),
                (Side::Head, None) | (Side::Both, _) => g.heads_of(*rel),
                (Side::Tail, None) => g.tails_of(*rel),
            };
            if best.is_none_or(|b| list.len() < b.len()) {
                best = Some(list);
            }
        }
        best.unwrap_or(&[])
    }

    fn consistent(&self, v: VarId) -> bool {
        let value = |t: &Term| self.value(t).expect("bound");
        self.var_lits[v.index()].iter().all(|&li| {
            !self.lit_vars[li].iter().all(|u| self.binding[u.index()].is_some())
                || literal_holds(self.g, &self.q.literals[li], &value)
        })
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.cfg.max_nodes.is_some_and(|m| self.nodes > m) {
            self.aborted = Some(Abort::Budget);
        } else if self.nodes.is_multiple_of(CHECK_EVERY) && self.cfg.timeout.is_some_and(|t| self.start.elapsed() >= t) {
            self.aborted = Some(Abort::Timeout);
        }
        self.aborted.is_none()
    }

    fn pick(&self, vars: &[VarId]) -> usize {
        let mut best = 0;
        let mut best_key = (usize::MAX, u32::MAX);
        for (i, v) in vars.iter().enumerate() {
            let key = (self.candidates(*v).len(), v.0);
            if key < best_key {
                best_key = key;
                best = i;
            }
        }
        best
    }

    /// Try to bind `v` to each candidate in turn, calling `k` on success.
    fn branch(&mut self, mut rest: Vec<VarId>, k: &mut dyn FnMut(&mut Self, Vec<VarId>) -> Flow) -> Flow {
        let i = self.pick(&rest);
        let v = rest.swap_remove(i);
        for &a in self.candidates(v) {
            if !self.tick() {
                return Flow::Stop;
            }
            self.binding[v.index()] = Some(a);
            if self.consistent(v) && k(self, rest.clone()) == Flow::Stop {
                self.binding[v.index()] = None;
                return Flow::Stop;
            }
        }
        self.binding[v.index()] = None;
        Flow::Continue
    }

    /// Any extension over `rest`?
    fn extend(&mut self, rest: Vec<VarId>) -> bool {
        if rest.is_empty() {
            return true;
        }
        let mut found = false;
        self.branch(rest, &mut |s, r| {
            if s.extend(r) {
                found = true;
                Flow::Stop
            } else {
                Flow::Continue
            }
        });
        found
    }

    fn enumerate(&mut self, free_rest: Vec<VarId>) -> Flow {
        if free_rest.is_empty() {
            if self.extend(self.q.exists.clone()) {
                let tuple = self.q.free.iter().map(|v| self.binding[v.index()].expect("bound")).collect();
                self.answers.insert(tuple);
                if self.cfg.mode != OracleMode::AllAnswers {
                    return Flow::Stop;
                }
            }
            return if self.aborted.is_some() { Flow::Stop } else { Flow::Continue };
        }
        self.branch(free_rest, &mut |s, r| s.enumerate(r))
    }

    /// Bind a prefix of the free variables; false if it violates a literal.
    fn bind_prefix(&mut self, prefix: &[EntityId]) -> bool {
        for (v, a) in self.q.free.iter().zip(prefix) {
            self.binding[v.index()] = Some(*a);
        }
        self.q.free[..prefix.len()].iter().all(|v| self.consistent(*v))
    }
}

/// Evaluate `q` over `g`. With `seed_answers`, each seed is a tuple for a
/// prefix of the free variables and only its extensions are explored.
pub fn oracle_solve(
    q: &ConjunctiveQuery,
    g: &KnowledgeGraph,
    cfg: &OracleConfig,
    seed_answers: Option<&[Vec<EntityId>]>,
) -> Result<OracleResult, OracleError> {
    let mut s = Solver::new(g, q, cfg)?;
    let ground_ok = q
        .literals
        .iter()
        .zip(&s.lit_vars)
        .filter(|(_, vars)| vars.is_empty())
        .all(|(l, _)| literal_holds(g, l, &|t: &Term| s.value(t).expect("constant")));
    match seed_answers {
        _ if !ground_ok => {}
        None => {
            s.enumerate(q.free.clone());
        }
        Some(seeds) => {
            let seeds: BTreeSet<&Vec<EntityId>> = seeds.iter().collect();
            for seed in seeds {
                if seed.len() > q.free.len() {
                    return Err(OracleError::SeedArity {
                        got: seed.len(),
                        free: q.free.len(),
                    });
                }
                if s.bind_prefix(seed) && s.enumerate(q.free[seed.len()..].to_vec()) == Flow::Stop {
                    break;
                }
                s.binding.iter_mut().for_each(|b| *b = None);
            }
        }
    }
    let aborted = s.aborted;
    Ok(OracleResult {
        exhausted: aborted.is_none() && (cfg.mode == OracleMode::AllAnswers || s.answers.is_empty()),
        answers: s.answers.into_iter().collect(),
        timed_out: aborted == Some(Abort::Timeout),
        budget_exceeded: aborted == Some(Abort::Budget),
        nodes: s.nodes,
        wall_time: s.start.elapsed(),
    })
}

/// Does Boolean `q` hold in `g`?
pub fn holds(q: &ConjunctiveQuery, g: &KnowledgeGraph) -> Result<bool, OracleError> {
    Ok(oracle_solve(q, g, &OracleConfig::boolean(), None)?.holds())
}

/// Complete answer set of `q` over `g`.
pub fn answers(q: &ConjunctiveQuery, g: &KnowledgeGraph) -> Result<Vec<Vec<EntityId>>, OracleError> {
    Ok(oracle_solve(q, g, &OracleConfig::all(), None)?.answers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Triple, Vocabulary};
    use crate::query::parse_query;
    use std::sync::Arc;

    fn graph(facts: &[(u32, u32, u32)]) -> KnowledgeGraph {
        KnowledgeGraph::from_triples(
            Arc::new(Vocabulary::synthetic(6, 3)),
            facts.iter().map(|&(r, a, b)| Triple::new(RelId(r), EntityId(a), EntityId(b))),
        )
    }

    fn query(text: &str, g: &KnowledgeGraph) -> ConjunctiveQuery {
        parse_query(text).unwrap().bind(g.vocab()).unwrap().disjuncts.remove(0)
    }

    fn ids(v: &[&[u32]]) -> Vec<Vec<EntityId>> {
        v.iter().map(|t| t.iter().map(|&i| EntityId(i)).collect()).collect()
    }

    #[test]
    fn ground_and_path_queries() {
        let g = graph(&[(0, 0, 1), (1, 1, 2), (0, 3, 1), (1, 4, 2), (0, 5, 4)]);
        assert!(holds(&query("Q() := r0(c:e0,c:e1)", &g), &g).unwrap());
        assert!(!holds(&query("Q() := r0(c:e1,c:e0)", &g), &g).unwrap());
        let q = query("Q(x) := EXISTS y . r0(x,y) & r1(y,c:e2)", &g);
        assert_eq!(answers(&q, &g).unwrap(), ids(&[&[0], &[3], &[5]]));
        let q = query("Q(x,y) := r0(x,y) & r1(y,c:e2)", &g);
        assert_eq!(answers(&q, &g).unwrap(), ids(&[&[0, 1], &[3, 1], &[5, 4]]));
    }

    #[test]
    fn negation_and_clauses() {
        let g = graph(&[(0, 0, 1), (0, 2, 1), (1, 2, 3), (2, 0, 0)]);
        let q = query("Q(x) := r0(x,c:e1) & !r1(x,c:e3)", &g);
        assert_eq!(answers(&q, &g).unwrap(), ids(&[&[0]]));
        let q = query("Q(x) := r0(x,c:e1) & OR{ r1(x,c:e3) ; r2(x,x) }", &g);
        assert_eq!(answers(&q, &g).unwrap(), ids(&[&[0], &[2]]));
        let q = query("Q(x) := EXISTS y . r0(x,c:e1) & !r1(x,y)", &g);
        assert!(matches!(answers(&q, &g), Err(OracleError::Unsafe(_))));
    }

    #[test]
    fn self_loops() {
        let g = graph(&[(2, 0, 0), (2, 1, 2), (2, 3, 3)]);
        let q = query("Q(x) := r2(x,x)", &g);
        assert_eq!(answers(&q, &g).unwrap(), ids(&[&[0], &[3]]));
    }

    #[test]
    fn hard_only_is_empty_and_exhausted() {
        let g = graph(&[(0, 0, 1)]);
        let q = query("Q(x) := EXISTS y . r0(x,y) & r1(y,c:e2)", &g);
        let r = oracle_solve(&q, &g, &OracleConfig::all(), None).unwrap();
        assert!(r.answers.is_empty());
        assert!(r.exhausted);
        assert!(!r.timed_out);
    }

    #[test]
    fn seeds_restrict_the_search() {
        let g = graph(&[(0, 0, 1), (0, 3, 1), (0, 3, 2), (1, 1, 4)]);
        let q = query("Q(x,y) := r0(x,y)", &g);
        let r = oracle_solve(&q, &g, &OracleConfig::all(), Some(&ids(&[&[3]]))).unwrap();
        assert_eq!(r.answers, ids(&[&[3, 1], &[3, 2]]));
        assert!(oracle_solve(&q, &g, &OracleConfig::all(), Some(&ids(&[&[3, 1, 1]]))).is_err());
    }

    #[test]
    fn budget_flags_partial_results() {
        let facts: Vec<(u32, u32, u32)> = (0..6).flat_map(|a| (0..6).map(move |b| (0, a, b))).collect();
        let g = graph(&facts);
        let q = query("Q(x) := EXISTS y,z . r0(x,y) & r0(y,z) & r1(z,c:e0)", &g);
        let cfg = OracleConfig {
            max_nodes: Some(3),
            ..Default::default()
        };
        let r = oracle_solve(&q, &g, &cfg, None).unwrap();
        assert!(r.budget_exceeded);
        assert!(!r.exhausted);
    }
}
