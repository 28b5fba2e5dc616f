//! Tripartite computational graph for a Boolean conjunctive query.
//!
//! Vertices come in three groups: one term vertex per variable and per
//! mentioned constant, one value vertex per (term, domain element), and one
//! literal vertex per literal. Term–value edges join a term to its values;
//! value–literal edges join a literal to every value of every term it
//! mentions.
//!
//! Ordering is deterministic: variable terms in declaration order, then
//! constants in first-appearance order; values in entity-id order; literals
//! in query order. The value–literal edges of one literal are contiguous
//! and grouped by term in the literal's term order.
//!
//! Each value–literal edge carries a potential-edge (PE) bit, fixed at
//! build time, and a light-edge (LE) bit that depends on the current
//! assignment and lives in a buffer owned by the search.

use std::fmt;
use std::str::FromStr;

use crate::fuzzy::{literal_score, Assignment};
use crate::kg::{EntityId, KnowledgeGraph, RelId};
use crate::predictor::{satisfied, LinkPredictor};
use crate::query::{ConjunctiveQuery, Literal, LiteralKind, Term, VarId};

/// How potential-edge labels are produced.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum PeMode {
    /// From the equipped predictor, by definition.
    #[default]
    Exact,
    /// Closed-world approximation from head/tail occurrence in the
    /// observable graph.
    Cwa,
    /// Every label set to 1.
    AllOne,
}

impl FromStr for PeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(PeMode::Exact),
            "cwa" => Ok(PeMode::Cwa),
            "all-one" | "allone" => Ok(PeMode::AllOne),
            other => Err(format!("unknown PE mode `{other}` (expected exact, cwa, all-one)")),
        }
    }
}

impl fmt::Display for PeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeMode::Exact => "exact",
            PeMode::Cwa => "cwa",
            PeMode::AllOne => "all-one",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TermNode {
    pub term: Term,
    /// First value vertex of this term's domain block.
    pub value_start: usize,
    pub domain_size: usize,
    /// Edge blocks touching this term.
    pub blocks: Vec<usize>,
}

impl TermNode {
    pub fn var(&self) -> Option<VarId> {
        self.term.as_var()
    }

    /// Entity represented by the value at `offset` in this term's domain.
    #[inline]
    pub fn entity_at(&self, offset: usize) -> EntityId {
        match self.term {
            Term::Const(c) => c,
            Term::Var(_) => EntityId(offset as u32),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LiteralNode {
    pub literal: Literal,
    /// Term-vertex indices in the literal's term order.
    pub terms: Vec<usize>,
    pub edge_start: usize,
    pub edge_end: usize,
}

/// The edges between one literal and all values of one of its terms.
#[derive(Clone, Copy, Debug)]
pub struct EdgeBlock {
    pub literal: usize,
    pub term: usize,
    pub edge_start: usize,
    pub len: usize,
}

#[derive(Clone, Debug)]
pub struct ComputationalGraph {
    num_entities: usize,
    num_vars: usize,
    terms: Vec<TermNode>,
    literals: Vec<LiteralNode>,
    blocks: Vec<EdgeBlock>,
    value_term: Vec<u32>,
    edge_value: Vec<u32>,
    edge_literal: Vec<u32>,
    // CSR: value vertex -> incident value-literal edges
    value_edge_offsets: Vec<usize>,
    value_edge_ids: Vec<u32>,
    pe: Vec<bool>,
}

impl ComputationalGraph {
    /// Build the graph for Boolean `q` over the entities of `g`.
    ///
    /// `pi` is used for exact PE labels; `g` (the observable graph) for CWA
    /// labels.
    ///
    /// Panics if `q` has free variables.
    pub fn build(q: &ConjunctiveQuery, g: &KnowledgeGraph, pi: &dyn LinkPredictor, mode: PeMode) -> Self {
        let mut cg = Self::structure(q, g.num_entities());
        cg.pe = match mode {
            PeMode::Exact => cg.pe_labels_exact(pi),
            PeMode::Cwa => cg.pe_labels_cwa(g),
            PeMode::AllOne => vec![true; cg.num_vl_edges()],
        };
        cg
    }

    /// Structure only; PE labels all zero.
    pub fn structure(q: &ConjunctiveQuery, num_entities: usize) -> Self {
        assert!(q.is_boolean(), "computational graph requires a Boolean query");
        let term_list: Vec<Term> = q
            .exists
            .iter()
            .map(|v| Term::Var(*v))
            .chain(q.constants().into_iter().map(Term::Const))
            .collect();
        let num_vars = q.exists.len();
        let mut terms = Vec::with_capacity(term_list.len());
        let mut value_term = Vec::new();
        for (i, t) in term_list.into_iter().enumerate() {
            let domain_size = if matches!(t, Term::Var(_)) { num_entities } else { 1 };
            terms.push(TermNode {
                term: t,
                value_start: value_term.len(),
                domain_size,
                blocks: Vec::new(),
            });
            value_term.extend(std::iter::repeat_n(i as u32, domain_size));
        }
        let term_index = |t: &Term| terms.iter().position(|n| n.term == *t).expect("term listed");

        let mut literals = Vec::with_capacity(q.literals.len());
        let mut blocks = Vec::new();
        let mut edge_value = Vec::new();
        let mut edge_literal = Vec::new();
        for (li, lit) in q.literals.iter().enumerate() {
            let lit_terms: Vec<usize> = lit.terms().iter().map(term_index).collect();
            let edge_start = edge_value.len();
            for &ti in &lit_terms {
                let node = &terms[ti];
                blocks.push(EdgeBlock {
                    literal: li,
                    term: ti,
                    edge_start: edge_value.len(),
                    len: node.domain_size,
                });
                for off in 0..node.domain_size {
                    edge_value.push((node.value_start + off) as u32);
                    edge_literal.push(li as u32);
                }
            }
            literals.push(LiteralNode {
                literal: lit.clone(),
                terms: lit_terms,
                edge_start,
                edge_end: edge_value.len(),
            });
        }
        for (bi, b) in blocks.iter().enumerate() {
            terms[b.term].blocks.push(bi);
        }

        let num_values = value_term.len();
        let mut value_edge_offsets = Vec::with_capacity(num_values + 1);
        let mut value_edge_ids = Vec::with_capacity(edge_value.len());
        value_edge_offsets.push(0);
        for v in 0..num_values {
            let node = &terms[value_term[v] as usize];
            let off = v - node.value_start;
            for &bi in &node.blocks {
                value_edge_ids.push((blocks[bi].edge_start + off) as u32);
            }
            value_edge_offsets.push(value_edge_ids.len());
        }
        let n_edges = edge_value.len();
        ComputationalGraph {
            num_entities,
            num_vars,
            terms,
            literals,
            blocks,
            value_term,
            edge_value,
            edge_literal,
            value_edge_offsets,
            value_edge_ids,
            pe: vec![false; n_edges],
        }
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    /// Number of variable terms; they are the first terms.
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constants(&self) -> usize {
        self.terms.len() - self.num_vars
    }

    pub fn terms(&self) -> &[TermNode] {
        &self.terms
    }

    pub fn literals(&self) -> &[LiteralNode] {
        &self.literals
    }

    pub fn blocks(&self) -> &[EdgeBlock] {
        &self.blocks
    }

    pub fn num_values(&self) -> usize {
        self.value_term.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.terms.len() + self.num_values() + self.literals.len()
    }

    pub fn num_tv_edges(&self) -> usize {
        self.num_values()
    }

    pub fn num_vl_edges(&self) -> usize {
        self.edge_value.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_tv_edges() + self.num_vl_edges()
    }

    /// Largest number of terms mentioned by one literal.
    pub fn max_arity(&self) -> usize {
        self.literals.iter().map(|l| l.terms.len()).max().unwrap_or(0)
    }

    #[inline]
    pub fn value_term(&self, v: usize) -> usize {
        self.value_term[v] as usize
    }

    #[inline]
    pub fn value_entity(&self, v: usize) -> EntityId {
        let t = &self.terms[self.value_term(v)];
        t.entity_at(v - t.value_start)
    }

    #[inline]
    pub fn edge_value(&self, e: usize) -> usize {
        self.edge_value[e] as usize
    }

    #[inline]
    pub fn edge_literal(&self, e: usize) -> usize {
        self.edge_literal[e] as usize
    }

    /// Value–literal edges incident to value vertex `v`.
    #[inline]
    pub fn value_edges(&self, v: usize) -> &[u32] {
        &self.value_edge_ids[self.value_edge_offsets[v]..self.value_edge_offsets[v + 1]]
    }

    pub fn pe_labels(&self) -> &[bool] {
        &self.pe
    }

    /// Variables in term order.
    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms[..self.num_vars].iter().filter_map(TermNode::var)
    }

    /// Whether value vertex `v` is the current value of its term.
    #[inline]
    pub fn is_selected(&self, v: usize, alpha: &Assignment) -> bool {
        let t = &self.terms[self.value_term(v)];
        match t.term {
            Term::Const(_) => true,
            Term::Var(var) => alpha.get(var).map(|e| e.index()) == Some(v - t.value_start),
        }
    }

    /// PE labels by definition: 1 iff some assignment with `e = a` makes the
    /// literal score at least 0.5. For clause literals the other terms are
    /// quantified jointly.
    pub fn pe_labels_exact(&self, pi: &dyn LinkPredictor) -> Vec<bool> {
        let mut out = vec![false; self.num_vl_edges()];
        for b in &self.blocks {
            let lit = &self.literals[b.literal].literal;
            let term = &self.terms[b.term];
            match &lit.kind {
                LiteralKind::Atom { .. } => {
                    for off in 0..b.len {
                        out[b.edge_start + off] = exact_atom_label(pi, lit, &term.term, term.entity_at(off));
                    }
                }
                LiteralKind::Clause(body) => {
                    let free_sat: Vec<Option<bool>> = body
                        .iter()
                        .map(|atom| {
                            (!atom.terms().contains(&term.term)).then(|| atom_satisfiable(pi, atom))
                        })
                        .collect();
                    for off in 0..b.len {
                        let a = term.entity_at(off);
                        out[b.edge_start + off] = body.iter().zip(&free_sat).any(|(atom, fs)| match fs {
                            Some(s) => *s,
                            None => exact_atom_label(pi, atom, &term.term, a),
                        });
                    }
                }
            }
        }
        out
    }

    /// Closed-world PE approximation: a value can satisfy a positive atom on
    /// the head side iff it is a head of that relation in `g` (tail side
    /// analogously). Negated atoms are never pruned.
    pub fn pe_labels_cwa(&self, g: &KnowledgeGraph) -> Vec<bool> {
        let mut out = vec![false; self.num_vl_edges()];
        for b in &self.blocks {
            let lit = &self.literals[b.literal].literal;
            let term = &self.terms[b.term];
            for off in 0..b.len {
                let a = term.entity_at(off);
                out[b.edge_start + off] = lit.atoms().iter().any(|atom| cwa_atom_label(g, atom, &term.term, a));
            }
        }
        out
    }

    /// LE labels for every value–literal edge under `alpha`.
    pub fn le_labels(&self, pi: &dyn LinkPredictor, alpha: &Assignment, out: &mut Vec<bool>) {
        out.clear();
        out.resize(self.num_vl_edges(), false);
        for li in 0..self.literals.len() {
            self.le_literal(pi, alpha, li, out);
        }
    }

    /// Recompute LE labels only for literals mentioning a variable in
    /// `changed`.
    pub fn update_le_labels(&self, pi: &dyn LinkPredictor, alpha: &Assignment, changed: &[VarId], out: &mut [bool]) {
        for li in 0..self.literals.len() {
            let mentions = self.literals[li]
                .terms
                .iter()
                .any(|&t| self.terms[t].var().is_some_and(|v| changed.contains(&v)));
            if mentions {
                self.le_literal(pi, alpha, li, out);
            }
        }
    }

    fn le_literal(&self, pi: &dyn LinkPredictor, alpha: &Assignment, li: usize, out: &mut [bool]) {
        let node = &self.literals[li];
        for &ti in &node.terms {
            let term = &self.terms[ti];
            let block = term
                .blocks
                .iter()
                .map(|&bi| self.blocks[bi])
                .find(|b| b.literal == li)
                .expect("block per literal term");
            match (&node.literal.kind, &term.term) {
                (LiteralKind::Atom { rel, args }, e) => {
                    let fixed = |t: &Term| -> Option<EntityId> {
                        if t == e {
                            None
                        } else {
                            Some(resolve(alpha, t))
                        }
                    };
                    let (h, tl) = (fixed(&args[0]), fixed(&args[1]));
                    for off in 0..block.len {
                        let a = term.entity_at(off);
                        let s = pi.score(*rel, h.unwrap_or(a), tl.unwrap_or(a));
                        out[block.edge_start + off] = satisfied(s, node.literal.negated);
                    }
                }
                (LiteralKind::Clause(_), Term::Var(var)) => {
                    let mut over = alpha.clone();
                    for off in 0..block.len {
                        over.set(*var, term.entity_at(off));
                        let s = literal_score(pi, &node.literal, &over).expect("assignment total");
                        out[block.edge_start + off] = s >= crate::predictor::THRESHOLD;
                    }
                }
                (LiteralKind::Clause(_), Term::Const(_)) => {
                    let s = literal_score(pi, &node.literal, alpha).expect("assignment total");
                    out[block.edge_start] = s >= crate::predictor::THRESHOLD;
                }
            }
        }
    }
}

#[inline]
fn resolve(alpha: &Assignment, t: &Term) -> EntityId {
    alpha.resolve(t).expect("assignment must be total")
}

fn atom_parts(lit: &Literal) -> (RelId, &Term, &Term) {
    match &lit.kind {
        LiteralKind::Atom { rel, args } => (*rel, &args[0], &args[1]),
        LiteralKind::Clause(_) => unreachable!("atomic literal expected"),
    }
}

/// Exact PE label of atomic `lit` for term `e` set to `a`.
fn exact_atom_label(pi: &dyn LinkPredictor, lit: &Literal, e: &Term, a: EntityId) -> bool {
    let (rel, t0, t1) = atom_parts(lit);
    let neg = lit.negated;
    match (t0 == e, t1 == e) {
        (true, true) => satisfied(pi.score(rel, a, a), neg),
        (true, false) => match t1 {
            Term::Const(c) => satisfied(pi.score(rel, a, *c), neg),
            Term::Var(_) if neg => pi.exists_tail_false(rel, a),
            Term::Var(_) => pi.exists_tail(rel, a),
        },
        (false, true) => match t0 {
            Term::Const(c) => satisfied(pi.score(rel, *c, a), neg),
            Term::Var(_) if neg => pi.exists_head_false(rel, a),
            Term::Var(_) => pi.exists_head(rel, a),
        },
        (false, false) => unreachable!("term not in literal"),
    }
}

/// Whether atomic `lit` is satisfiable by some assignment of its terms.
fn atom_satisfiable(pi: &dyn LinkPredictor, lit: &Literal) -> bool {
    let (_, t0, _) = atom_parts(lit);
    match t0 {
        Term::Const(c) => exact_atom_label(pi, lit, t0, *c),
        Term::Var(_) => (0..pi.num_entities() as u32).any(|a| exact_atom_label(pi, lit, t0, EntityId(a))),
    }
}

fn cwa_atom_label(g: &KnowledgeGraph, lit: &Literal, e: &Term, a: EntityId) -> bool {
    let (rel, t0, t1) = atom_parts(lit);
    if lit.negated {
        return true;
    }
    match (t0 == e, t1 == e) {
        (true, true) => g.is_head_of(rel, a) && g.is_tail_of(rel, a),
        (true, false) => g.is_head_of(rel, a),
        (false, true) => g.is_tail_of(rel, a),
        (false, false) => !g.heads_of(rel).is_empty(),
    }
}
