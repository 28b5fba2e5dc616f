//! The small query types used for training and the small QAC splits.
//!
//! | tag | formula |
//! |-----|---------|
//! | 1p  | r1(x,c1) |
//! | 2p  | ∃y. r1(x,y) ∧ r2(y,c1) |
//! | 3p  | ∃y1,y2. r1(x,y1) ∧ r2(y1,y2) ∧ r3(y2,c1) |
//! | 2i  | r1(x,c1) ∧ r2(x,c2) |
//! | 3i  | r1(x,c1) ∧ r2(x,c2) ∧ r3(x,c3) |
//! | pi  | ∃y. r1(x,y) ∧ r2(y,c1) ∧ r3(x,c2) |
//! | ip  | ∃y. r1(x,y) ∧ r2(y,c1) ∧ r3(y,c2) |
//! | 2in | r1(x,c1) ∧ ¬r2(x,c2) |
//! | 3in | r1(x,c1) ∧ r2(x,c2) ∧ ¬r3(x,c3) |
//! | inp | ∃y. r1(x,y) ∧ r2(y,c1) ∧ ¬r3(y,c2) |
//! | pin | ∃y. r1(x,y) ∧ r2(y,c1) ∧ ¬r3(x,c2) |
//!
//! Queries are instantiated forward from a sampled answer entity, so the
//! source graph always satisfies them at that answer.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use thiserror::Error;

use crate::kg::{EntityId, KnowledgeGraph, RelId};
use crate::query::{ConjunctiveQuery, Literal, Term, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryType {
    P1,
    P2,
    P3,
    I2,
    I3,
    Pi,
    Ip,
    In2,
    In3,
    Inp,
    Pin,
}

/// Types the policy is trained on.
pub const TRAINING_TYPES: [QueryType; 9] = [
    QueryType::P1,
    QueryType::P2,
    QueryType::P3,
    QueryType::I2,
    QueryType::I3,
    QueryType::In2,
    QueryType::In3,
    QueryType::Pin,
    QueryType::Inp,
];

/// Types with projections, used for the small QAC splits.
pub const QAC_TYPES: [QueryType; 6] = [
    QueryType::P2,
    QueryType::P3,
    QueryType::Pi,
    QueryType::Ip,
    QueryType::Inp,
    QueryType::Pin,
];

impl QueryType {
    pub fn tag(self) -> &'static str {
        match self {
            QueryType::P1 => "1p",
            QueryType::P2 => "2p",
            QueryType::P3 => "3p",
            QueryType::I2 => "2i",
            QueryType::I3 => "3i",
            QueryType::Pi => "pi",
            QueryType::Ip => "ip",
            QueryType::In2 => "2in",
            QueryType::In3 => "3in",
            QueryType::Inp => "inp",
            QueryType::Pin => "pin",
        }
    }

    pub fn all() -> [QueryType; 11] {
        use QueryType::*;
        [P1, P2, P3, I2, I3, Pi, Ip, In2, In3, Inp, Pin]
    }

    pub fn has_negation(self) -> bool {
        matches!(self, QueryType::In2 | QueryType::In3 | QueryType::Inp | QueryType::Pin)
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for QueryType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryType::all()
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| format!("unknown query type `{s}`"))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("graph too sparse for `{0}` after {1} attempts")]
    TooSparse(QueryType, usize),
}

const ATTEMPTS: usize = 1000;

type Edge = (RelId, EntityId);

fn out_edge<R: Rng + ?Sized>(g: &KnowledgeGraph, e: EntityId, rng: &mut R) -> Option<Edge> {
    g.outgoing(e).choose(rng).copied()
}

/// `k` distinct outgoing edges of `e`.
fn out_edges<R: Rng + ?Sized>(g: &KnowledgeGraph, e: EntityId, k: usize, rng: &mut R) -> Option<Vec<Edge>> {
    let out = g.outgoing(e);
    (out.len() >= k).then(|| out.choose_multiple(rng, k).copied().collect())
}

/// A pair `(r, c)` from some fact `r(e', c)` with `e' ≠ a` and `¬r(a, c)`,
/// so `¬r(x, c)` holds at `a` and excludes at least `e'`.
fn negation_for<R: Rng + ?Sized>(g: &KnowledgeGraph, a: EntityId, rng: &mut R) -> Option<Edge> {
    let facts = g.sorted_facts();
    for _ in 0..64 {
        let t = facts.choose(rng)?;
        if t.head != a && !g.contains(t.rel, a, t.tail) {
            return Some((t.rel, t.tail));
        }
    }
    None
}

struct Builder {
    names: Vec<String>,
    literals: Vec<Literal>,
}

impl Builder {
    fn new(n_exists: usize) -> Self {
        let mut names = vec!["x".to_owned()];
        names.extend((1..=n_exists).map(|i| format!("y{i}")));
        Builder {
            names,
            literals: Vec::new(),
        }
    }

    fn var(i: u32) -> Term {
        Term::Var(VarId(i))
    }

    fn pos(&mut self, r: RelId, a: Term, b: Term) {
        self.literals.push(Literal::atom(r, a, b));
    }

    fn neg(&mut self, r: RelId, a: Term, b: Term) {
        self.literals.push(Literal::negated_atom(r, a, b));
    }

    fn finish(self) -> ConjunctiveQuery {
        let n = self.names.len() as u32;
        ConjunctiveQuery {
            var_names: self.names,
            free: vec![VarId(0)],
            exists: (1..n).map(VarId).collect(),
            literals: self.literals,
        }
    }
}

fn try_sample<R: Rng + ?Sized>(g: &KnowledgeGraph, ty: QueryType, a: EntityId, rng: &mut R) -> Option<ConjunctiveQuery> {
    use QueryType::*;
    let x = Builder::var(0);
    let y1 = Builder::var(1);
    let y2 = Builder::var(2);
    let c = Term::Const;
    let mut b = Builder::new(match ty {
        P1 | I2 | I3 | In2 | In3 => 0,
        P3 => 2,
        _ => 1,
    });
    match ty {
        P1 => {
            let (r1, c1) = out_edge(g, a, rng)?;
            b.pos(r1, x, c(c1));
        }
        P2 | P3 | Pi | Ip | Inp | Pin => {
            let (r1, m) = out_edge(g, a, rng)?;
            b.pos(r1, x.clone(), y1.clone());
            match ty {
                P2 => {
                    let (r2, c1) = out_edge(g, m, rng)?;
                    b.pos(r2, y1, c(c1));
                }
                P3 => {
                    let (r2, m2) = out_edge(g, m, rng)?;
                    let (r3, c1) = out_edge(g, m2, rng)?;
                    b.pos(r2, y1, y2.clone());
                    b.pos(r3, y2, c(c1));
                }
                Pi => {
                    let (r2, c1) = out_edge(g, m, rng)?;
                    let (r3, c2) = out_edge(g, a, rng)?;
                    if (r3, c2) == (r1, m) {
                        return None;
                    }
                    b.pos(r2, y1, c(c1));
                    b.pos(r3, x, c(c2));
                }
                Ip => {
                    let e = out_edges(g, m, 2, rng)?;
                    b.pos(e[0].0, y1.clone(), c(e[0].1));
                    b.pos(e[1].0, y1, c(e[1].1));
                }
                Inp => {
                    let (r2, c1) = out_edge(g, m, rng)?;
                    let (r3, c2) = negation_for(g, m, rng)?;
                    b.pos(r2, y1.clone(), c(c1));
                    b.neg(r3, y1, c(c2));
                }
                Pin => {
                    let (r2, c1) = out_edge(g, m, rng)?;
                    let (r3, c2) = negation_for(g, a, rng)?;
                    b.pos(r2, y1, c(c1));
                    b.neg(r3, x, c(c2));
                }
                _ => unreachable!(),
            }
        }
        I2 | I3 | In2 | In3 => {
            let e = out_edges(g, a, positive_count(ty), rng)?;
            for (r, t) in e {
                b.pos(r, x.clone(), c(t));
            }
            if ty.has_negation() {
                let (r, t) = negation_for(g, a, rng)?;
                b.neg(r, x, c(t));
            }
        }
    }
    Some(b.finish())
}

fn positive_count(ty: QueryType) -> usize {
    match ty {
        QueryType::I2 => 2,
        QueryType::I3 => 3,
        QueryType::In2 => 1,
        QueryType::In3 => 2,
        _ => unreachable!(),
    }
}

/// Instantiate `ty` on `g` with answer-first forward sampling. Returns the
/// query and the answer it was built from.
pub fn sample_query<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    ty: QueryType,
    rng: &mut R,
) -> Result<(ConjunctiveQuery, EntityId), TemplateError> {
    let heads: Vec<EntityId> = g.entities().filter(|e| !g.outgoing(*e).is_empty()).collect();
    for _ in 0..ATTEMPTS {
        let Some(&a) = heads.choose(rng) else { break };
        if let Some(q) = try_sample(g, ty, a, rng) {
            return Ok((q, a));
        }
    }
    Err(TemplateError::TooSparse(ty, ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::answers;
    use crate::synth::{synthetic_pair, SynthConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_type_has_its_seed_answer() {
        let pair = synthetic_pair(&SynthConfig::default());
        let g = &pair.complete;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for ty in QueryType::all() {
            for _ in 0..20 {
                let (q, a) = sample_query(g, ty, &mut rng).unwrap();
                q.validate().unwrap();
                assert!(answers(&q, g).unwrap().contains(&vec![a]), "{ty}");
                let negs = q.literals.iter().filter(|l| l.negated).count();
                assert_eq!(negs, ty.has_negation() as usize);
            }
        }
    }

    #[test]
    fn shapes() {
        let pair = synthetic_pair(&SynthConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (q, _) = sample_query(&pair.complete, QueryType::P1, &mut rng).unwrap();
        assert_eq!((q.literals.len(), q.exists.len()), (1, 0));
        let (q, _) = sample_query(&pair.complete, QueryType::P3, &mut rng).unwrap();
        assert_eq!((q.literals.len(), q.exists.len()), (3, 2));
        let (q, _) = sample_query(&pair.complete, QueryType::In3, &mut rng).unwrap();
        assert_eq!(q.literals.len(), 3);
        assert!(q.literals[2].negated);
        assert_eq!("pin".parse::<QueryType>().unwrap(), QueryType::Pin);
    }
}
