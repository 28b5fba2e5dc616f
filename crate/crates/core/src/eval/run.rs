//! Running the solver over instance sets.
//!
//! Instance `i` always uses RNG stream `i` of the run seed, so results do
//! not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::benchgen::{QacInstance, QarInstance};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::policy::PolicyParams;
use crate::predictor::LinkPredictor;
use crate::query::DnfQuery;
use crate::search::{solve_qac, solve_qar, SearchConfig};

use super::metrics::{QacOutcome, QarOutcome};
use super::oracle::{oracle_solve, OracleConfig};

pub fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Classify every candidate of every instance. `jobs = 0` uses the global
/// rayon pool.
pub fn evaluate_qac(
    params: &PolicyParams,
    instances: &[QacInstance],
    g: &KnowledgeGraph,
    pi: &dyn LinkPredictor,
    cfg: &SearchConfig,
    seed: u64,
    jobs: usize,
) -> Vec<QacOutcome<EntityId>> {
    with_jobs(jobs, || {
        instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| {
                let mut rng = instance_rng(seed, i);
                let q = DnfQuery::single(inst.query.clone());
                let mut accepted = Vec::new();
                let mut timeouts = 0;
                for &c in inst.correct.iter().chain(&inst.wrong) {
                    let v = solve_qac(params, &q, &[c], g, pi, cfg, &mut rng).expect("one free variable");
                    timeouts += v.timed_out as usize;
                    if v.positive {
                        accepted.push(c);
                    }
                }
                QacOutcome {
                    correct: inst.correct.clone(),
                    wrong: inst.wrong.clone(),
                    hard: inst.hard.clone(),
                    accepted,
                    timeouts,
                }
            })
            .collect()
    })
}

/// Answer every instance; a returned tuple is correct iff the grounded
/// query holds over `g_complete`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_qar(
    params: &PolicyParams,
    instances: &[QarInstance],
    g: &KnowledgeGraph,
    g_complete: &KnowledgeGraph,
    pi: &dyn LinkPredictor,
    cfg: &SearchConfig,
    seed: u64,
    jobs: usize,
) -> Vec<QarOutcome> {
    with_jobs(jobs, || {
        instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| {
                let mut rng = instance_rng(seed, i);
                let q = DnfQuery::single(inst.query.clone());
                let ans = solve_qar(params, &q, g, pi, cfg, &mut rng);
                let correct = ans.answer.as_ref().is_some_and(|t| {
                    let grounded = inst.query.ground(t).expect("arity");
                    oracle_solve(&grounded, g_complete, &OracleConfig::boolean(), None)
                        .expect("generated queries are safe")
                        .holds()
                });
                QarOutcome {
                    arity: inst.query.free.len(),
                    has_trivial: inst.has_trivial,
                    predicted: ans.answer.is_some(),
                    correct,
                    timed_out: ans.timed_out,
                }
            })
            .collect()
    })
}
