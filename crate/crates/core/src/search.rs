//! The search loop and the QAC/QAR solvers built on it.

use std::time::{Duration, Instant};

use rand::Rng;

use crate::compgraph::{ComputationalGraph, PeMode};
use crate::fuzzy::{assignment_score, Assignment};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::policy::{forward_step, init_state, sample_assignment, PolicyParams};
use crate::predictor::{LinkPredictor, THRESHOLD};
use crate::query::{ConjunctiveQuery, DnfQuery, QueryError, VarId};

/// Step budget for small QAC queries.
pub const SMALL_QUERY_STEPS: usize = 20;
/// Step budget for large QAC and all QAR queries.
pub const LARGE_QUERY_STEPS: usize = 200;
/// Default per-instance wall-clock limit.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub steps: usize,
    pub pe_mode: PeMode,
    pub timeout: Option<Duration>,
    /// Stop as soon as an assignment scores 1.0 (nothing can beat it).
    pub stop_at_one: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            steps: LARGE_QUERY_STEPS,
            pe_mode: PeMode::Exact,
            timeout: None,
            stop_at_one: false,
        }
    }
}

impl SearchConfig {
    pub fn with_steps(steps: usize) -> Self {
        SearchConfig {
            steps,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    /// Best score over all visited assignments.
    pub score: f64,
    pub best_assignment: Assignment,
    /// Score of `α^(0), …, α^(steps_run)`.
    pub per_step_scores: Vec<f64>,
    pub steps_run: usize,
    pub wall_time: Duration,
    /// Time spent in the step loop only (graph construction excluded).
    pub step_time: Duration,
    pub timed_out: bool,
}

impl SearchResult {
    pub fn is_positive(&self) -> bool {
        self.score > THRESHOLD
    }

    /// Average time per search step, if any step ran.
    pub fn average_step_time(&self) -> Option<Duration> {
        (self.steps_run > 0).then(|| self.step_time / self.steps_run as u32)
    }
}

/// Run the search on Boolean `q` for up to `cfg.steps` steps.
pub fn run_search<R: Rng + ?Sized>(
    params: &PolicyParams,
    q: &ConjunctiveQuery,
    g: &KnowledgeGraph,
    pi: &dyn LinkPredictor,
    cfg: &SearchConfig,
    rng: &mut R,
) -> SearchResult {
    let start = Instant::now();
    let cg = ComputationalGraph::build(q, g, pi, cfg.pe_mode);
    let mut res = search_graph(&cg, params, q, pi, cfg, rng);
    res.wall_time = start.elapsed();
    res
}

/// Search over a prebuilt computational graph of `q`.
pub fn search_graph<R: Rng + ?Sized>(
    cg: &ComputationalGraph,
    params: &PolicyParams,
    q: &ConjunctiveQuery,
    pi: &dyn LinkPredictor,
    cfg: &SearchConfig,
    rng: &mut R,
) -> SearchResult {
    let start = Instant::now();
    let mut state = init_state(cg, params, rng);
    let s0 = assignment_score(pi, q, &state.alpha).expect("initial assignment is total");
    let mut res = SearchResult {
        score: s0,
        best_assignment: state.alpha.clone(),
        per_step_scores: vec![s0],
        steps_run: 0,
        wall_time: Duration::ZERO,
        step_time: Duration::ZERO,
        timed_out: false,
    };
    // nothing to search over
    if cg.num_vars() == 0 {
        res.wall_time = start.elapsed();
        return res;
    }
    let vars: Vec<VarId> = cg.vars().collect();
    let mut le = Vec::new();
    cg.le_labels(pi, &state.alpha, &mut le);
    let mut changed = Vec::with_capacity(vars.len());
    for _ in 0..cfg.steps {
        if cfg.stop_at_one && res.score >= 1.0 {
            break;
        }
        if cfg.timeout.is_some_and(|t| start.elapsed() >= t) {
            res.timed_out = true;
            break;
        }
        let mu = forward_step(cg, params, &mut state, &le);
        let next = sample_assignment(cg, &mu, rng);
        changed.clear();
        changed.extend(vars.iter().copied().filter(|v| next.get(*v) != state.alpha.get(*v)));
        state.alpha = next;
        let s = assignment_score(pi, q, &state.alpha).expect("sampled assignment is total");
        res.per_step_scores.push(s);
        res.steps_run += 1;
        if s > res.score {
            res.score = s;
            res.best_assignment = state.alpha.clone();
        }
        cg.update_le_labels(pi, &state.alpha, &changed, &mut le);
    }
    res.step_time = start.elapsed();
    res.wall_time = res.step_time;
    res
}

#[derive(Clone, Debug)]
pub struct QacVerdict {
    pub positive: bool,
    /// Best score over the disjuncts that were searched.
    pub score: f64,
    pub timed_out: bool,
}

/// Classify candidate tuple `a` for `q`: positive iff some disjunct of
/// `q(a)` scores above 0.5. Stops at the first positive disjunct.
pub fn solve_qac<R: Rng + ?Sized>(
    params: &PolicyParams,
    q: &DnfQuery,
    a: &[EntityId],
    g: &KnowledgeGraph,
    pi: &dyn LinkPredictor,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<QacVerdict, QueryError> {
    let grounded = q
        .disjuncts
        .iter()
        .map(|d| d.ground(a))
        .collect::<Result<Vec<_>, _>>()?;
    let mut verdict = QacVerdict {
        positive: false,
        score: 0.0,
        timed_out: false,
    };
    for d in &grounded {
        let r = run_search(params, d, g, pi, cfg, rng);
        verdict.score = verdict.score.max(r.score);
        verdict.timed_out |= r.timed_out;
        if r.is_positive() {
            verdict.positive = true;
            break;
        }
    }
    Ok(verdict)
}

#[derive(Clone, Debug)]
pub struct QarAnswer {
    pub answer: Option<Vec<EntityId>>,
    pub score: f64,
    /// Disjunct that produced the best score.
    pub disjunct: usize,
    pub timed_out: bool,
}

/// Search `∃x⃗ Q(x⃗)` per disjunct and read the answer off the best
/// assignment. `None` unless the best score exceeds 0.5; ties go to the
/// earlier disjunct.
pub fn solve_qar<R: Rng + ?Sized>(
    params: &PolicyParams,
    q: &DnfQuery,
    g: &KnowledgeGraph,
    pi: &dyn LinkPredictor,
    cfg: &SearchConfig,
    rng: &mut R,
) -> QarAnswer {
    let mut best: Option<(SearchResult, usize, Vec<VarId>)> = None;
    let mut timed_out = false;
    for (i, d) in q.disjuncts.iter().enumerate() {
        let closed = d.existentially_close();
        let r = run_search(params, &closed, g, pi, cfg, rng);
        timed_out |= r.timed_out;
        if best.as_ref().is_none_or(|b| r.score > b.0.score) {
            best = Some((r, i, d.free.clone()));
        }
    }
    match best {
        None => QarAnswer {
            answer: None,
            score: 0.0,
            disjunct: 0,
            timed_out,
        },
        Some((r, i, free)) => QarAnswer {
            answer: r.is_positive().then(|| {
                free.iter()
                    .map(|v| r.best_assignment.get(*v).expect("free variable searched"))
                    .collect()
            }),
            score: r.score,
            disjunct: i,
            timed_out,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::{boolean_score_exhaustive, DEFAULT_EXHAUSTIVE_BUDGET};
    use crate::kg::{RelId, Triple, Vocabulary};
    use crate::predictor::PerfectPredictor;
    use crate::query::parse_query;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn chain(n: usize) -> (KnowledgeGraph, PerfectPredictor) {
        let vocab = Arc::new(Vocabulary::synthetic(n, 3));
        let g = KnowledgeGraph::from_triples(
            vocab,
            (0..n as u32 - 1).map(|i| Triple::new(RelId(i % 2), EntityId(i), EntityId(i + 1))),
        );
        let pi = PerfectPredictor::new(Arc::new(g.clone()));
        (g, pi)
    }

    fn params(seed: u64) -> PolicyParams {
        PolicyParams::init(8, 8, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn dnf(text: &str, g: &KnowledgeGraph) -> DnfQuery {
        parse_query(text).unwrap().bind(g.vocab()).unwrap()
    }

    #[test]
    fn finds_point_mass_optimum() {
        let (g, pi) = chain(8);
        let q = dnf("Q() := EXISTS y . r1(c:e3,y)", &g).disjuncts.remove(0);
        let r = run_search(&params(0), &q, &g, &pi, &SearchConfig::with_steps(300), &mut ChaCha8Rng::seed_from_u64(1));
        let (exact, _) = boolean_score_exhaustive(&pi, &q, DEFAULT_EXHAUSTIVE_BUDGET).unwrap();
        assert_eq!(r.score, exact);
        assert_eq!(r.score, 1.0);
        assert_eq!(r.best_assignment.get(VarId(0)), Some(EntityId(4)));
        assert_eq!(r.per_step_scores.len(), 301);
    }

    #[test]
    fn unsatisfiable_scores_zero() {
        let (g, pi) = chain(6);
        let q = dnf("Q() := EXISTS y . r2(y,c:e1)", &g).disjuncts.remove(0);
        let r = run_search(&params(0), &q, &g, &pi, &SearchConfig::with_steps(30), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(r.score, 0.0);
        assert!(!r.is_positive());
    }

    #[test]
    fn ground_query_ignores_steps() {
        let (g, pi) = chain(6);
        let q = dnf("Q() := r0(c:e0,c:e1)", &g).disjuncts.remove(0);
        for steps in [0, 5] {
            let r = run_search(&params(0), &q, &g, &pi, &SearchConfig::with_steps(steps), &mut ChaCha8Rng::seed_from_u64(1));
            assert_eq!(r.score, 1.0);
            assert_eq!(r.steps_run, 0);
        }
    }

    #[test]
    fn deterministic_and_monotone() {
        let (g, pi) = chain(10);
        let q = dnf("Q() := EXISTS a,b . r0(a,b) & r1(b,c:e3)", &g).disjuncts.remove(0);
        let cfg = SearchConfig::with_steps(25);
        let r1 = run_search(&params(2), &q, &g, &pi, &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        let r2 = run_search(&params(2), &q, &g, &pi, &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(r1.per_step_scores, r2.per_step_scores);
        assert_eq!(r1.best_assignment, r2.best_assignment);
        let best = r1.per_step_scores.iter().cloned().fold(0.0, f64::max);
        assert_eq!(r1.score, best);
        assert_eq!(assignment_score(&pi, &q, &r1.best_assignment).unwrap(), r1.score);
    }

    #[test]
    fn qac_and_qar() {
        let (g, pi) = chain(8);
        let q = dnf("Q(x) := EXISTS y . r0(x,y) & r1(y,c:e2)", &g);
        let cfg = SearchConfig::with_steps(100);
        let p = params(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(solve_qac(&p, &q, &[EntityId(0)], &g, &pi, &cfg, &mut rng).unwrap().positive);
        assert!(!solve_qac(&p, &q, &[EntityId(3)], &g, &pi, &cfg, &mut rng).unwrap().positive);
        assert!(solve_qac(&p, &q, &[], &g, &pi, &cfg, &mut rng).is_err());
        let ans = solve_qar(&p, &q, &g, &pi, &SearchConfig::with_steps(400), &mut rng);
        assert_eq!(ans.answer, Some(vec![EntityId(0)]));

        let none = dnf("Q(x) := r2(x,c:e2)", &g);
        assert_eq!(solve_qar(&p, &none, &g, &pi, &cfg, &mut rng).answer, None);
    }

    #[test]
    fn early_stop_and_timeout() {
        let (g, pi) = chain(8);
        let q = dnf("Q() := EXISTS y . r0(y,c:e1)", &g).disjuncts.remove(0);
        let cfg = SearchConfig {
            steps: 1000,
            stop_at_one: true,
            ..Default::default()
        };
        let r = run_search(&params(0), &q, &g, &pi, &cfg, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(r.score, 1.0);
        assert!(r.steps_run < 1000);
        let cfg = SearchConfig {
            steps: 1000,
            timeout: Some(Duration::ZERO),
            ..Default::default()
        };
        let r = run_search(&params(0), &q, &g, &pi, &cfg, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(r.timed_out);
        assert_eq!(r.steps_run, 0);
    }
}
