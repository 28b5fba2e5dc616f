//! Conjunctive queries, their DNF unions, and clause literals.
//!
//! Queries are generic over the relation symbol `R` and the constant symbol
//! `E`. Parsing produces [`NamedDnf`] (string symbols); [`NamedDnf::bind`]
//! resolves names against a graph vocabulary to produce the dense-id form
//! used everywhere else.

mod json;
mod parse;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, RelId, Vocabulary};

pub use json::{dnf_from_json, dnf_to_json, query_from_json, query_to_json};
pub use parse::{parse_query, ParseError};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term<E = EntityId> {
    Const(E),
    Var(VarId),
}

impl<E> Term<E> {
    pub fn as_var(&self) -> Option<VarId> {
        match self {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LiteralKind<R = RelId, E = EntityId> {
    Atom { rel: R, args: [Term<E>; 2] },
    /// Disjunction of atomic literals treated as a single literal.
    Clause(Vec<Literal<R, E>>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal<R = RelId, E = EntityId> {
    pub kind: LiteralKind<R, E>,
    pub negated: bool,
}

impl<R, E> Literal<R, E> {
    pub fn atom(rel: R, head: Term<E>, tail: Term<E>) -> Self {
        Literal {
            kind: LiteralKind::Atom {
                rel,
                args: [head, tail],
            },
            negated: false,
        }
    }

    pub fn negated_atom(rel: R, head: Term<E>, tail: Term<E>) -> Self {
        Literal {
            negated: true,
            ..Literal::atom(rel, head, tail)
        }
    }

    pub fn clause(body: Vec<Literal<R, E>>) -> Self {
        Literal {
            kind: LiteralKind::Clause(body),
            negated: false,
        }
    }

    pub fn is_clause(&self) -> bool {
        matches!(self.kind, LiteralKind::Clause(_))
    }

    /// Atomic literals of this literal: itself, or the clause body.
    pub fn atoms(&self) -> Vec<&Literal<R, E>> {
        match &self.kind {
            LiteralKind::Atom { .. } => vec![self],
            LiteralKind::Clause(body) => body.iter().flat_map(Literal::atoms).collect(),
        }
    }
}

impl<R, E: Clone + PartialEq> Literal<R, E> {
    /// Distinct terms in first-appearance order.
    pub fn terms(&self) -> Vec<Term<E>> {
        let mut out: Vec<Term<E>> = Vec::new();
        self.collect_terms(&mut out);
        out
    }

    fn collect_terms(&self, out: &mut Vec<Term<E>>) {
        match &self.kind {
            LiteralKind::Atom { args, .. } => {
                for t in args {
                    if !out.contains(t) {
                        out.push(t.clone());
                    }
                }
            }
            LiteralKind::Clause(body) => body.iter().for_each(|l| l.collect_terms(out)),
        }
    }

    fn map_terms(&self, f: &impl Fn(&Term<E>) -> Term<E>) -> Self
    where
        R: Clone,
    {
        let kind = match &self.kind {
            LiteralKind::Atom { rel, args } => LiteralKind::Atom {
                rel: rel.clone(),
                args: [f(&args[0]), f(&args[1])],
            },
            LiteralKind::Clause(body) => LiteralKind::Clause(body.iter().map(|l| l.map_terms(f)).collect()),
        };
        Literal {
            kind,
            negated: self.negated,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("expected {expected} values for the free variables, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("variable `{0}` is declared but never used")]
    UnusedVariable(String),
    #[error("variable id {0} is not declared")]
    UndeclaredVariable(u32),
    #[error("variable `{0}` is declared twice")]
    Redeclared(String),
    #[error("query has no literals")]
    Empty,
    #[error("clause literals cannot be negated")]
    NegatedClause,
    #[error("clause literal has an empty body")]
    EmptyClause,
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("disjuncts disagree on free variables")]
    FreeVariableMismatch,
}

/// `Q(x⃗) = ∃y⃗ Φ(x⃗, y⃗)` with Φ a conjunction of literals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjunctiveQuery<R = RelId, E = EntityId> {
    /// Variable names indexed by [`VarId`].
    pub var_names: Vec<String>,
    pub free: Vec<VarId>,
    pub exists: Vec<VarId>,
    pub literals: Vec<Literal<R, E>>,
}

pub type NamedQuery = ConjunctiveQuery<String, String>;

impl<R: Clone, E: Clone + PartialEq> ConjunctiveQuery<R, E> {
    /// Build and validate a query. Variables are named by `free` then
    /// `exists` in order, so `VarId(i)` refers to the i-th name overall.
    pub fn new(free: &[&str], exists: &[&str], literals: Vec<Literal<R, E>>) -> Result<Self, QueryError> {
        let var_names: Vec<String> = free.iter().chain(exists).map(|s| s.to_string()).collect();
        let q = ConjunctiveQuery {
            free: (0..free.len() as u32).map(VarId).collect(),
            exists: (free.len() as u32..var_names.len() as u32).map(VarId).collect(),
            var_names,
            literals,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if self.literals.is_empty() {
            return Err(QueryError::Empty);
        }
        let mut seen = HashMap::new();
        for v in self.free.iter().chain(&self.exists) {
            let name = self.var_name(*v);
            if v.index() >= self.var_names.len() {
                return Err(QueryError::UndeclaredVariable(v.0));
            }
            if seen.insert(name.to_owned(), *v).is_some() {
                return Err(QueryError::Redeclared(name.to_owned()));
            }
        }
        for lit in &self.literals {
            check_literal(lit)?;
        }
        let mentioned = self.mentioned_vars();
        for v in self.free.iter().chain(&self.exists) {
            if !mentioned.contains(v) {
                return Err(QueryError::UnusedVariable(self.var_name(*v).to_owned()));
            }
        }
        for v in &mentioned {
            if !self.free.contains(v) && !self.exists.contains(v) {
                return Err(QueryError::UndeclaredVariable(v.0));
            }
        }
        Ok(())
    }

    pub fn var_name(&self, v: VarId) -> &str {
        self.var_names.get(v.index()).map_or("?", String::as_str)
    }

    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }

    pub fn num_literals(&self) -> usize {
        self.literals.len()
    }

    /// Distinct variables occurring in literals, first-appearance order.
    pub fn mentioned_vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for lit in &self.literals {
            for t in lit.terms() {
                if let Term::Var(v) = t {
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    /// Distinct constants in first-appearance order.
    pub fn constants(&self) -> Vec<E> {
        let mut out: Vec<E> = Vec::new();
        for lit in &self.literals {
            for t in lit.terms() {
                if let Term::Const(c) = t {
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    /// Distinct terms: existential and free variables in declaration order,
    /// then constants in first-appearance order.
    pub fn terms(&self) -> Vec<Term<E>> {
        self.free
            .iter()
            .chain(&self.exists)
            .map(|v| Term::Var(*v))
            .chain(self.constants().into_iter().map(Term::Const))
            .collect()
    }

    /// Substitute the free variables by `tuple`, yielding a Boolean query.
    pub fn ground(&self, tuple: &[E]) -> Result<Self, QueryError> {
        if tuple.len() != self.free.len() {
            return Err(QueryError::ArityMismatch {
                expected: self.free.len(),
                got: tuple.len(),
            });
        }
        let subst: HashMap<VarId, &E> = self.free.iter().copied().zip(tuple).collect();
        let f = |t: &Term<E>| match t {
            Term::Var(v) => subst.get(v).map_or(Term::Var(*v), |e| Term::Const((*e).clone())),
            c => c.clone(),
        };
        Ok(ConjunctiveQuery {
            var_names: self.var_names.clone(),
            free: Vec::new(),
            exists: self.exists.clone(),
            literals: self.literals.iter().map(|l| l.map_terms(&f)).collect(),
        })
    }

    /// Substitute a prefix of the free variables, keeping the rest free.
    pub fn ground_prefix(&self, prefix: &[E]) -> Result<Self, QueryError> {
        if prefix.len() > self.free.len() {
            return Err(QueryError::ArityMismatch {
                expected: self.free.len(),
                got: prefix.len(),
            });
        }
        let subst: HashMap<VarId, &E> = self.free.iter().copied().zip(prefix).collect();
        let f = |t: &Term<E>| match t {
            Term::Var(v) => subst.get(v).map_or(Term::Var(*v), |e| Term::Const((*e).clone())),
            c => c.clone(),
        };
        Ok(ConjunctiveQuery {
            var_names: self.var_names.clone(),
            free: self.free[prefix.len()..].to_vec(),
            exists: self.exists.clone(),
            literals: self.literals.iter().map(|l| l.map_terms(&f)).collect(),
        })
    }

    /// `∃x⃗ Q(x⃗)`: free variables are appended to the existential list, so
    /// `exists[old_len + i]` is the former `free[i]`.
    pub fn existentially_close(&self) -> Self {
        let mut q = self.clone();
        q.exists.extend(q.free.drain(..));
        q
    }

    /// Promote the existential variable at position `idx` of `exists` to a
    /// new trailing free variable.
    pub fn promote_existential(&self, idx: usize) -> Self {
        let mut q = self.clone();
        let v = q.exists.remove(idx);
        q.free.push(v);
        q
    }

    pub fn query_graph(&self) -> QueryGraph<E> {
        let vertices = self.terms();
        let pos = |t: &Term<E>| vertices.iter().position(|u| u == t).expect("term listed");
        let mut edges = Vec::new();
        let mut hyperedges = Vec::new();
        for lit in &self.literals {
            match &lit.kind {
                LiteralKind::Atom { args, .. } => edges.push((pos(&args[0]), pos(&args[1]))),
                LiteralKind::Clause(_) => hyperedges.push(lit.terms().iter().map(pos).collect()),
            }
        }
        QueryGraph {
            vertices,
            edges,
            hyperedges,
        }
    }
}

fn check_literal<R, E>(lit: &Literal<R, E>) -> Result<(), QueryError> {
    match &lit.kind {
        LiteralKind::Atom { .. } => Ok(()),
        LiteralKind::Clause(body) => {
            if lit.negated {
                return Err(QueryError::NegatedClause);
            }
            if body.is_empty() {
                return Err(QueryError::EmptyClause);
            }
            for b in body {
                match b.kind {
                    LiteralKind::Atom { .. } => {}
                    LiteralKind::Clause(_) => check_literal(b)?,
                }
            }
            Ok(())
        }
    }
}

/// Undirected multigraph over terms with one edge per atomic literal.
#[derive(Clone, Debug)]
pub struct QueryGraph<E = EntityId> {
    pub vertices: Vec<Term<E>>,
    pub edges: Vec<(usize, usize)>,
    /// Term sets of clause literals; used for connectivity only.
    pub hyperedges: Vec<Vec<usize>>,
}

impl<E> QueryGraph<E> {
    pub fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        if n == 0 {
            return true;
        }
        let mut uf = UnionFind::new(n);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        for h in &self.hyperedges {
            for w in h.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        let root = uf.find(0);
        (1..n).all(|i| uf.find(i) == root)
    }

    /// The underlying undirected multigraph of atoms is a tree (connected,
    /// no cycles, no self-loops, no parallel edges).
    pub fn is_tree_like(&self) -> bool {
        let mut uf = UnionFind::new(self.vertices.len());
        for &(a, b) in &self.edges {
            if !uf.union(a, b) {
                return false;
            }
        }
        self.is_connected()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|&(a, b)| usize::from(a == v) + usize::from(b == v))
            .sum()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// A union of conjunctive queries sharing the same free variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnfQuery<R = RelId, E = EntityId> {
    pub disjuncts: Vec<ConjunctiveQuery<R, E>>,
}

pub type NamedDnf = DnfQuery<String, String>;

impl<R: Clone, E: Clone + PartialEq> DnfQuery<R, E> {
    pub fn new(disjuncts: Vec<ConjunctiveQuery<R, E>>) -> Result<Self, QueryError> {
        let first = disjuncts.first().ok_or(QueryError::Empty)?;
        let names = |q: &ConjunctiveQuery<R, E>| -> Vec<String> {
            q.free.iter().map(|v| q.var_name(*v).to_owned()).collect()
        };
        let free = names(first);
        if disjuncts.iter().any(|d| names(d) != free) {
            return Err(QueryError::FreeVariableMismatch);
        }
        Ok(DnfQuery { disjuncts })
    }

    pub fn single(q: ConjunctiveQuery<R, E>) -> Self {
        DnfQuery { disjuncts: vec![q] }
    }

    pub fn arity(&self) -> usize {
        self.disjuncts.first().map_or(0, |d| d.free.len())
    }

    pub fn free_names(&self) -> Vec<String> {
        self.disjuncts.first().map_or_else(Vec::new, |d| {
            d.free.iter().map(|v| d.var_name(*v).to_owned()).collect()
        })
    }
}

impl NamedDnf {
    /// Resolve names against `vocab`. Unknown relations receive fresh ids
    /// past the vocabulary (empty extension); unknown constants are errors.
    pub fn bind(&self, vocab: &Vocabulary) -> Result<DnfQuery, QueryError> {
        let mut fresh: HashMap<String, RelId> = HashMap::new();
        let disjuncts = self
            .disjuncts
            .iter()
            .map(|d| bind_query(d, vocab, &mut fresh))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DnfQuery { disjuncts })
    }
}

impl NamedQuery {
    pub fn bind(&self, vocab: &Vocabulary) -> Result<ConjunctiveQuery, QueryError> {
        bind_query(self, vocab, &mut HashMap::new())
    }
}

fn bind_query(
    q: &NamedQuery,
    vocab: &Vocabulary,
    fresh: &mut HashMap<String, RelId>,
) -> Result<ConjunctiveQuery, QueryError> {
    let literals = q
        .literals
        .iter()
        .map(|l| bind_literal(l, vocab, fresh))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConjunctiveQuery {
        var_names: q.var_names.clone(),
        free: q.free.clone(),
        exists: q.exists.clone(),
        literals,
    })
}

fn bind_literal(
    l: &Literal<String, String>,
    vocab: &Vocabulary,
    fresh: &mut HashMap<String, RelId>,
) -> Result<Literal, QueryError> {
    let term = |t: &Term<String>| -> Result<Term, QueryError> {
        match t {
            Term::Var(v) => Ok(Term::Var(*v)),
            Term::Const(c) => vocab
                .entity(c)
                .map(Term::Const)
                .ok_or_else(|| QueryError::UnknownEntity(c.clone())),
        }
    };
    let kind = match &l.kind {
        LiteralKind::Atom { rel, args } => {
            let rel = match vocab.relation(rel) {
                Some(r) => r,
                None => {
                    let next = RelId((vocab.relations.len() + fresh.len()) as u32);
                    *fresh.entry(rel.clone()).or_insert(next)
                }
            };
            LiteralKind::Atom {
                rel,
                args: [term(&args[0])?, term(&args[1])?],
            }
        }
        LiteralKind::Clause(body) => LiteralKind::Clause(
            body.iter()
                .map(|b| bind_literal(b, vocab, fresh))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    Ok(Literal {
        kind,
        negated: l.negated,
    })
}

impl ConjunctiveQuery {
    /// Convert back to names. Relations outside the vocabulary print as
    /// `unknown_<id>`.
    pub fn to_named(&self, vocab: &Vocabulary) -> NamedQuery {
        ConjunctiveQuery {
            var_names: self.var_names.clone(),
            free: self.free.clone(),
            exists: self.exists.clone(),
            literals: self.literals.iter().map(|l| name_literal(l, vocab)).collect(),
        }
    }
}

impl DnfQuery {
    pub fn to_named(&self, vocab: &Vocabulary) -> NamedDnf {
        DnfQuery {
            disjuncts: self.disjuncts.iter().map(|d| d.to_named(vocab)).collect(),
        }
    }
}

fn name_literal(l: &Literal, vocab: &Vocabulary) -> Literal<String, String> {
    let term = |t: &Term| match t {
        Term::Var(v) => Term::Var(*v),
        Term::Const(e) => Term::Const(
            vocab
                .entity_name(*e)
                .map_or_else(|| format!("unknown_{}", e.0), str::to_owned),
        ),
    };
    let kind = match &l.kind {
        LiteralKind::Atom { rel, args } => LiteralKind::Atom {
            rel: vocab
                .relation_name(*rel)
                .map_or_else(|| format!("unknown_{}", rel.0), str::to_owned),
            args: [term(&args[0]), term(&args[1])],
        },
        LiteralKind::Clause(body) => LiteralKind::Clause(body.iter().map(|b| name_literal(b, vocab)).collect()),
    };
    Literal {
        kind,
        negated: l.negated,
    }
}

impl fmt::Display for NamedDnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        parse::write_dnf(f, self)
    }
}

impl fmt::Display for NamedQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        parse::write_dnf(f, &DnfQuery::single(self.clone()))
    }
}
