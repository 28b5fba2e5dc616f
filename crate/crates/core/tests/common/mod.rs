#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use anycq::kg::{EntityId, KnowledgeGraph, RelId, Triple, Vocabulary};
use anycq::query::{ConjunctiveQuery, Literal, LiteralKind, Term, VarId};
use rand::Rng;

/// Uniform random graph with `facts` distinct triples (fewer if the space
/// is smaller).
pub fn random_graph<R: Rng>(n: usize, n_rel: usize, facts: usize, rng: &mut R) -> KnowledgeGraph {
    let vocab = Arc::new(Vocabulary::synthetic(n, n_rel));
    let mut set = BTreeSet::new();
    let cap = facts.min(n * n * n_rel);
    while set.len() < cap {
        set.insert((
            rng.random_range(0..n_rel as u32),
            rng.random_range(0..n as u32),
            rng.random_range(0..n as u32),
        ));
    }
    KnowledgeGraph::from_triples(
        vocab,
        set.into_iter().map(|(r, h, t)| Triple::new(RelId(r), EntityId(h), EntityId(t))),
    )
}

/// Random query over `free + exists` variables. Every variable occurs in
/// at least one literal; roughly one literal in five is negated.
pub fn random_query<R: Rng>(
    n: usize,
    n_rel: usize,
    free: usize,
    exists: usize,
    literals: usize,
    neg_rate: f64,
    rng: &mut R,
) -> ConjunctiveQuery {
    let k = free + exists;
    assert!(k >= 1 && literals >= 1);
    // two slots per literal must be able to cover every variable
    let literals = literals.max(k.div_ceil(2));
    loop {
        let mut lits = Vec::with_capacity(literals);
        for _ in 0..literals {
            let term = |rng: &mut R| {
                if rng.random_bool(0.75) {
                    Term::Var(VarId(rng.random_range(0..k as u32)))
                } else {
                    Term::Const(EntityId(rng.random_range(0..n as u32)))
                }
            };
            let (h, t) = (term(rng), term(rng));
            let rel = RelId(rng.random_range(0..n_rel as u32));
            lits.push(if rng.random_bool(neg_rate) {
                Literal::negated_atom(rel, h, t)
            } else {
                Literal::atom(rel, h, t)
            });
        }
        let names: Vec<String> = (0..k).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        if let Ok(q) = ConjunctiveQuery::new(&refs[..free], &refs[free..], lits) {
            return q;
        }
    }
}

/// Plain classical truth of literal `l` under `value`.
pub fn holds(g: &KnowledgeGraph, l: &Literal, value: &dyn Fn(&Term) -> EntityId) -> bool {
    let v = match &l.kind {
        LiteralKind::Atom { rel, args } => g.contains(*rel, value(&args[0]), value(&args[1])),
        LiteralKind::Clause(body) => body.iter().any(|b| holds(g, b, value)),
    };
    v != l.negated
}

/// Every assignment of all variables, projected onto the free ones.
pub fn brute_force_answers(q: &ConjunctiveQuery, g: &KnowledgeGraph) -> BTreeSet<Vec<EntityId>> {
    let n = g.num_entities() as u32;
    let k = q.var_names.len();
    let mut vals = vec![0u32; k];
    let mut out = BTreeSet::new();
    if n == 0 && k > 0 {
        return out;
    }
    loop {
        let value = |t: &Term| match t {
            Term::Const(c) => *c,
            Term::Var(v) => EntityId(vals[v.index()]),
        };
        if q.literals.iter().all(|l| holds(g, l, &value)) {
            out.insert(q.free.iter().map(|v| EntityId(vals[v.index()])).collect());
        }
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            vals[i] += 1;
            if vals[i] < n {
                break;
            }
            vals[i] = 0;
        }
    }
}

/// Every variable occurs in some positive literal.
pub fn is_safe(q: &ConjunctiveQuery) -> bool {
    let positive: BTreeSet<VarId> = q
        .literals
        .iter()
        .filter(|l| !l.negated && !l.is_clause())
        .flat_map(|l| l.terms())
        .filter_map(|t| t.as_var())
        .collect();
    q.free.iter().chain(&q.exists).all(|v| positive.contains(v))
}

/// Number of assignments of all variables satisfying `q` over `g`.
pub fn count_models(q: &ConjunctiveQuery, g: &KnowledgeGraph) -> u64 {
    let n = g.num_entities() as u32;
    let k = q.var_names.len();
    let mut vals = vec![0u32; k];
    let mut count = 0;
    loop {
        let value = |t: &Term| match t {
            Term::Const(c) => *c,
            Term::Var(v) => EntityId(vals[v.index()]),
        };
        count += q.literals.iter().all(|l| holds(g, l, &value)) as u64;
        let mut i = k;
        loop {
            if i == 0 {
                return count;
            }
            i -= 1;
            vals[i] += 1;
            if vals[i] < n {
                break;
            }
            vals[i] = 0;
        }
    }
}
