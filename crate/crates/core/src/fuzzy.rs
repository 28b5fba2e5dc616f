//! Gödel fuzzy-logic scores: conjunction is `min`, disjunction is `max`,
//! negation is `1 − s`, and an existential block is the max over all
//! assignments.

use thiserror::Error;

use crate::kg::EntityId;
use crate::predictor::LinkPredictor;
use crate::query::{ConjunctiveQuery, DnfQuery, Literal, LiteralKind, Term, VarId};

/// Default cap on `|V|^k` for exhaustive scoring.
pub const DEFAULT_EXHAUSTIVE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("variable {0:?} is not bound")]
    Unbound(VarId),
    #[error("exhaustive scoring needs {needed} assignments, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("query still has free variables")]
    NotBoolean,
}

/// Values for query variables, indexed by [`VarId`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<Option<EntityId>>,
}

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, EntityId)>) -> Self {
        let mut a = Assignment::new();
        for (v, e) in pairs {
            a.set(v, e);
        }
        a
    }

    #[inline]
    pub fn get(&self, v: VarId) -> Option<EntityId> {
        self.values.get(v.index()).copied().flatten()
    }

    pub fn set(&mut self, v: VarId, e: EntityId) {
        if self.values.len() <= v.index() {
            self.values.resize(v.index() + 1, None);
        }
        self.values[v.index()] = Some(e);
    }

    pub fn is_total_over(&self, vars: &[VarId]) -> bool {
        vars.iter().all(|v| self.get(*v).is_some())
    }

    /// Values of `vars` in order; `None` if any is unbound.
    pub fn project(&self, vars: &[VarId]) -> Option<Vec<EntityId>> {
        vars.iter().map(|v| self.get(*v)).collect()
    }

    #[inline]
    pub fn resolve(&self, t: &Term) -> Result<EntityId, ScoreError> {
        match t {
            Term::Const(c) => Ok(*c),
            Term::Var(v) => self.get(*v).ok_or(ScoreError::Unbound(*v)),
        }
    }
}

/// Score of one literal: `π(r,a,b)`, `1 − π(r,a,b)` when negated, and the
/// max over the body for a clause literal.
pub fn literal_score(pi: &dyn LinkPredictor, lit: &Literal, alpha: &Assignment) -> Result<f64, ScoreError> {
    let s = match &lit.kind {
        LiteralKind::Atom { rel, args } => {
            let a = alpha.resolve(&args[0])?;
            let b = alpha.resolve(&args[1])?;
            pi.score(*rel, a, b)
        }
        LiteralKind::Clause(body) => {
            let mut best = 0.0f64;
            for l in body {
                best = best.max(literal_score(pi, l, alpha)?);
            }
            best
        }
    };
    Ok(if lit.negated { 1.0 - s } else { s })
}

/// Gödel conjunction over all literals of `q` under `alpha`.
pub fn assignment_score(pi: &dyn LinkPredictor, q: &ConjunctiveQuery, alpha: &Assignment) -> Result<f64, ScoreError> {
    let mut score = 1.0f64;
    for lit in &q.literals {
        score = score.min(literal_score(pi, lit, alpha)?);
    }
    Ok(score)
}

/// Exact `S(∃y⃗ Φ)` by enumerating every assignment of the existential
/// variables. Returns the score and one maximizing assignment.
pub fn boolean_score_exhaustive(
    pi: &dyn LinkPredictor,
    q: &ConjunctiveQuery,
    budget: u64,
) -> Result<(f64, Assignment), ScoreError> {
    if !q.is_boolean() {
        return Err(ScoreError::NotBoolean);
    }
    let n = pi.num_entities() as u128;
    let k = q.exists.len() as u32;
    let needed = n.checked_pow(k).unwrap_or(u128::MAX);
    if needed > budget as u128 {
        return Err(ScoreError::BudgetExceeded { needed, budget });
    }
    let mut alpha = Assignment::new();
    if k > 0 && n == 0 {
        return Ok((0.0, alpha));
    }
    for v in &q.exists {
        alpha.set(*v, EntityId(0));
    }
    let mut best = (assignment_score(pi, q, &alpha)?, alpha.clone());
    'odometer: loop {
        if best.0 >= 1.0 {
            break;
        }
        // advance the last variable fastest
        let mut i = q.exists.len();
        loop {
            if i == 0 {
                break 'odometer;
            }
            i -= 1;
            let v = q.exists[i];
            let next = alpha.get(v).expect("set").0 + 1;
            if (next as u128) < n {
                alpha.set(v, EntityId(next));
                break;
            }
            alpha.set(v, EntityId(0));
        }
        let s = assignment_score(pi, q, &alpha)?;
        if s > best.0 {
            best = (s, alpha.clone());
        }
    }
    Ok(best)
}

/// Max of the per-disjunct exhaustive scores.
pub fn dnf_score_exhaustive(
    pi: &dyn LinkPredictor,
    q: &DnfQuery,
    budget: u64,
) -> Result<(f64, usize, Assignment), ScoreError> {
    let mut best: Option<(f64, usize, Assignment)> = None;
    for (i, d) in q.disjuncts.iter().enumerate() {
        let (s, a) = boolean_score_exhaustive(pi, d, budget)?;
        if best.as_ref().is_none_or(|b| s > b.0) {
            best = Some((s, i, a));
        }
    }
    Ok(best.unwrap_or((0.0, 0, Assignment::new())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{KnowledgeGraph, RelId, Triple};
    use crate::predictor::{PerfectPredictor, TabularPredictor};
    use crate::query::parse_query;
    use std::sync::Arc;

    fn e(i: u32) -> EntityId {
        EntityId(i)
    }

    fn table(entries: &[(u32, u32, u32, f64)]) -> TabularPredictor {
        TabularPredictor::new(
            4,
            0.0,
            entries
                .iter()
                .map(|&(r, a, b, p)| (Triple::new(RelId(r), e(a), e(b)), p)),
        )
    }

    fn bound(text: &str, g: &KnowledgeGraph) -> DnfQuery {
        parse_query(text).unwrap().bind(g.vocab()).unwrap()
    }

    #[test]
    fn literal_scores() {
        let vocab = crate::kg::Vocabulary::synthetic(4, 2);
        let g = KnowledgeGraph::from_triples(Arc::new(vocab), vec![Triple::new(RelId(0), e(0), e(1))]);
        let perfect = PerfectPredictor::new(Arc::new(g.clone()));
        let q = bound("Q() := r0(c:e0,c:e1) & !r0(c:e0,c:e1) & OR{ r0(c:e0,c:e1) ; r1(c:e0,c:e1) }", &g);
        let lits = &q.disjuncts[0].literals;
        let a = Assignment::new();
        assert_eq!(literal_score(&perfect, &lits[0], &a).unwrap(), 1.0);

        let pi = table(&[(0, 0, 1, 0.3), (1, 0, 1, 0.6)]);
        assert!((literal_score(&pi, &lits[1], &a).unwrap() - 0.7).abs() < 1e-15);
        let clause = bound("Q() := OR{ r0(c:e0,c:e1) ; r1(c:e0,c:e1) }", &g);
        let pi = table(&[(0, 0, 1, 0.2), (1, 0, 1, 0.6)]);
        assert_eq!(literal_score(&pi, &clause.disjuncts[0].literals[0], &a).unwrap(), 0.6);
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let vocab = Arc::new(crate::kg::Vocabulary::synthetic(4, 1));
        let g = KnowledgeGraph::from_triples(vocab, vec![]);
        let q = bound("Q() := EXISTS y . r0(y,c:e1)", &g);
        let pi = table(&[]);
        assert_eq!(
            assignment_score(&pi, &q.disjuncts[0], &Assignment::new()),
            Err(ScoreError::Unbound(VarId(0)))
        );
    }

    #[test]
    fn conjunction_is_min() {
        let vocab = Arc::new(crate::kg::Vocabulary::synthetic(4, 2));
        let g = KnowledgeGraph::from_triples(vocab, vec![]);
        let q = bound("Q() := r0(c:e0,c:e1) & r1(c:e1,c:e2)", &g);
        let pi = table(&[(0, 0, 1, 0.9), (1, 1, 2, 0.8)]);
        assert_eq!(assignment_score(&pi, &q.disjuncts[0], &Assignment::new()).unwrap(), 0.8);
        let pi = table(&[(0, 0, 1, 0.9)]);
        assert_eq!(assignment_score(&pi, &q.disjuncts[0], &Assignment::new()).unwrap(), 0.0);
    }

    #[test]
    fn exhaustive_single_variable() {
        let vocab = Arc::new(crate::kg::Vocabulary::synthetic(4, 1));
        let g = KnowledgeGraph::from_triples(vocab, vec![]);
        let q = bound("Q() := EXISTS y . r0(y,c:e0)", &g);
        let pi = table(&[(0, 0, 0, 0.1), (0, 1, 0, 0.9), (0, 2, 0, 0.3), (0, 3, 0, 0.2)]);
        let (s, a) = boolean_score_exhaustive(&pi, &q.disjuncts[0], DEFAULT_EXHAUSTIVE_BUDGET).unwrap();
        assert_eq!(s, 0.9);
        assert_eq!(a.get(VarId(0)), Some(e(1)));
    }

    #[test]
    fn exhaustive_ground_query_and_budget() {
        let vocab = Arc::new(crate::kg::Vocabulary::synthetic(4, 1));
        let g = KnowledgeGraph::from_triples(vocab, vec![]);
        let q = bound("Q() := r0(c:e0,c:e1)", &g);
        let pi = table(&[(0, 0, 1, 0.4)]);
        let (s, _) = boolean_score_exhaustive(&pi, &q.disjuncts[0], 1).unwrap();
        assert_eq!(s, 0.4);

        let q = bound("Q() := EXISTS a,b,c . r0(a,b) & r0(b,c)", &g);
        assert!(matches!(
            boolean_score_exhaustive(&pi, &q.disjuncts[0], 63),
            Err(ScoreError::BudgetExceeded { needed: 64, .. })
        ));
        let q = bound("Q(x) := r0(x,c:e1)", &g);
        assert_eq!(
            boolean_score_exhaustive(&pi, &q.disjuncts[0], 100).unwrap_err(),
            ScoreError::NotBoolean
        );
    }

    #[test]
    fn dnf_takes_max_over_disjuncts() {
        let vocab = Arc::new(crate::kg::Vocabulary::synthetic(4, 2));
        let g = KnowledgeGraph::from_triples(vocab, vec![]);
        let q = bound("Q() := EXISTS y . r0(y,c:e0) | EXISTS y . r1(c:e2,y)", &g);
        let pi = table(&[(0, 1, 0, 0.4), (1, 2, 3, 0.7)]);
        let (s, i, a) = dnf_score_exhaustive(&pi, &q, 100).unwrap();
        assert_eq!((s, i), (0.7, 1));
        assert_eq!(a.get(VarId(0)), Some(e(3)));
    }
}
