//! REINFORCE training of the search policy on small query types.
//!
//! The objective for one episode of length `T` is
//!
//! ```text
//! L = −Σ_{i=0}^{T−1} γ^i · log P^(i+1) · Σ_{t=i+1}^{T} γ^{t−i−1} R^(t)
//! R^(t) = max(0, S^(t) − max_{t'<t} S^(t'))
//! ```
//!
//! Rewards are constants; only the log-probabilities of the sampled
//! assignments carry gradient.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::compgraph::{ComputationalGraph, PeMode};
use crate::fuzzy::{assignment_score, Assignment};
use crate::kg::KnowledgeGraph;
use crate::policy::{
    backward_episode, forward_step_taped, init_state, sample_assignment, CheckpointError, PolicyParams, StepTape,
};
use crate::predictor::{LinkPredictor, PerfectPredictor};
use crate::query::{ConjunctiveQuery, VarId};
use crate::templates::{sample_query, QueryType, TemplateError, TRAINING_TYPES};

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub t_train: usize,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub batches: usize,
    pub hidden_dim: usize,
    pub mlp_dim: usize,
    pub pe_mode: PeMode,
    pub types: Vec<QueryType>,
    pub seed: u64,
    /// Write a checkpoint every this many batches (0 = only at the end).
    pub checkpoint_every: usize,
    /// Record wall-clock time in the metrics log; off for byte-stable logs.
    pub log_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            t_train: 15,
            gamma: 0.75,
            lr: 5e-6,
            batch_size: 4,
            batches: 1000,
            hidden_dim: 128,
            mlp_dim: 128,
            pe_mode: PeMode::Exact,
            types: TRAINING_TYPES.to_vec(),
            seed: 0,
            checkpoint_every: 0,
            log_wall_time: true,
        }
    }
}

impl TrainConfig {
    /// Small model and a larger step size for CPU-scale runs.
    pub fn desk() -> Self {
        TrainConfig {
            lr: 1e-3,
            hidden_dim: 32,
            mlp_dim: 64,
            batches: 2000,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_owned()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if self.t_train == 0 {
            return bad("T_train must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.types.is_empty() {
            return bad("no training query types");
        }
        if self.hidden_dim == 0 || self.mlp_dim == 0 {
            return bad("hidden and MLP widths must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("non-finite gradient at batch {batch} (loss {loss}, {bad} bad entries)")]
    NonFinite { batch: usize, loss: f64, bad: usize },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One search run with everything needed for the policy gradient.
pub struct Episode {
    pub query: ConjunctiveQuery,
    pub graph: ComputationalGraph,
    /// `α^(0), …, α^(T)`.
    pub assignments: Vec<Assignment>,
    pub scores: Vec<f64>,
    /// `R^(1), …, R^(T)`; `rewards[t-1]` belongs to step `t`.
    pub rewards: Vec<f64>,
    /// `log P^(1), …, log P^(T)`.
    pub log_probs: Vec<f64>,
    pub tapes: Vec<StepTape>,
}

impl Episode {
    pub fn best_score(&self) -> f64 {
        self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `R^(t) = max(0, S^(t) − max_{t'<t} S^(t'))` for `t = 1..`.
pub fn rewards(scores: &[f64]) -> Vec<f64> {
    let mut best = scores.first().copied().unwrap_or(0.0);
    scores
        .iter()
        .skip(1)
        .map(|&s| {
            let r = (s - best).max(0.0);
            best = best.max(s);
            r
        })
        .collect()
}

/// Search `∃x⃗ Q` for `steps` steps, keeping every tape.
pub fn run_episode<R: Rng + ?Sized>(
    params: &PolicyParams,
    query: &ConjunctiveQuery,
    g: &KnowledgeGraph,
    pi: &dyn LinkPredictor,
    steps: usize,
    pe_mode: PeMode,
    rng: &mut R,
) -> Episode {
    let q = query.existentially_close();
    let cg = ComputationalGraph::build(&q, g, pi, pe_mode);
    let mut state = init_state(&cg, params, rng);
    let mut assignments = vec![state.alpha.clone()];
    let mut scores = vec![assignment_score(pi, &q, &state.alpha).expect("total")];
    let mut log_probs = Vec::new();
    let mut tapes = Vec::new();
    if cg.num_vars() > 0 {
        let vars: Vec<VarId> = cg.vars().collect();
        let mut le = Vec::new();
        cg.le_labels(pi, &state.alpha, &mut le);
        for _ in 0..steps {
            let tape = forward_step_taped(&cg, params, &mut state, &le);
            let next = sample_assignment(&cg, &tape.dist, rng);
            let changed: Vec<VarId> = vars
                .iter()
                .copied()
                .filter(|v| next.get(*v) != state.alpha.get(*v))
                .collect();
            log_probs.push(tape.dist.log_prob(&cg, &next));
            state.alpha = next;
            scores.push(assignment_score(pi, &q, &state.alpha).expect("total"));
            assignments.push(state.alpha.clone());
            cg.update_le_labels(pi, &state.alpha, &changed, &mut le);
            tapes.push(tape);
        }
    }
    let rewards = rewards(&scores);
    debug_assert!({
        let gain = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) - scores[0];
        (rewards.iter().sum::<f64>() - gain).abs() < 1e-9
    });
    Episode {
        query: q,
        graph: cg,
        assignments,
        scores,
        rewards,
        log_probs,
        tapes,
    }
}

/// Coefficient of `log P^(i+1)` in the loss, for each `i`.
pub fn loss_weights(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let t = rewards.len();
    // reward-to-go G_i = Σ_{t≥i+1} γ^{t−i−1} R^(t), computed backwards
    let mut to_go = vec![0.0; t];
    let mut acc = 0.0;
    for i in (0..t).rev() {
        acc = rewards[i] + gamma * acc;
        to_go[i] = acc;
    }
    let mut disc = 1.0;
    to_go
        .into_iter()
        .map(|g| {
            let w = -disc * g;
            disc *= gamma;
            w
        })
        .collect()
}

/// Loss of one episode and its gradient, accumulated into `grad` scaled
/// by `scale`.
pub fn episode_gradient(params: &PolicyParams, ep: &Episode, gamma: f64, scale: f64, grad: &mut [f64]) -> f64 {
    let w = loss_weights(&ep.rewards, gamma);
    let loss: f64 = w.iter().zip(&ep.log_probs).map(|(w, lp)| w * lp).sum();
    if w.iter().all(|&x| x == 0.0) {
        return loss;
    }
    let d_os: Vec<Vec<f64>> = ep
        .tapes
        .iter()
        .enumerate()
        .map(|(i, tape)| tape.log_prob_grad(&ep.graph, &ep.assignments[i + 1], scale * w[i]))
        .collect();
    backward_episode(&ep.graph, params, grad, &ep.tapes, &d_os);
    loss
}

/// Adam with the usual moment defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            theta[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Average the batch gradient and apply one Adam step. Returns the mean
/// loss.
pub fn reinforce_update(
    params: &mut PolicyParams,
    opt: &mut Adam,
    batch: &[Episode],
    gamma: f64,
    batch_index: usize,
) -> Result<f64, TrainError> {
    let n = params.num_params();
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|ep| {
            let mut g = vec![0.0; n];
            let l = episode_gradient(params, ep, gamma, scale, &mut g);
            (l, g)
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l * scale;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let bad = grad.iter().filter(|x| !x.is_finite()).count();
    if bad > 0 || !loss.is_finite() {
        return Err(TrainError::NonFinite {
            batch: batch_index,
            loss,
            bad,
        });
    }
    opt.step(params.as_mut_slice(), &grad);
    Ok(loss)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BatchLog {
    pub batch: usize,
    pub loss: f64,
    pub mean_best_score: f64,
    pub wall_time: f64,
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainerState {
    pub params: PolicyParams,
    pub opt: Adam,
    /// Number of completed batches.
    pub batch: usize,
}

const STATE_MAGIC: &[u8; 4] = b"ACQT";
const STATE_VERSION: u32 = 1;

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    out.extend((xs.len() as u64).to_le_bytes());
    for x in xs {
        out.extend(x.to_le_bytes());
    }
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if bytes.len() < n {
        return Err(CheckpointError::Truncated);
    }
    let (a, b) = bytes.split_at(n);
    *bytes = b;
    Ok(a)
}

fn take_u64(bytes: &mut &[u8]) -> Result<u64, CheckpointError> {
    Ok(u64::from_le_bytes(take(bytes, 8)?.try_into().expect("8 bytes")))
}

fn take_f64s(bytes: &mut &[u8]) -> Result<Vec<f64>, CheckpointError> {
    let n = take_u64(bytes)? as usize;
    let raw = take(bytes, n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

impl TrainerState {
    pub fn new(params: PolicyParams, lr: f64) -> Self {
        let opt = Adam::new(params.num_params(), lr);
        TrainerState { params, opt, batch: 0 }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(STATE_MAGIC);
        out.extend(STATE_VERSION.to_le_bytes());
        out.extend((self.batch as u64).to_le_bytes());
        out.extend(self.opt.t.to_le_bytes());
        for x in [self.opt.lr, self.opt.beta1, self.opt.beta2, self.opt.eps] {
            out.extend(x.to_le_bytes());
        }
        put_f64s(&mut out, &self.opt.m);
        put_f64s(&mut out, &self.opt.v);
        let p = self.params.to_bytes();
        out.extend((p.len() as u64).to_le_bytes());
        out.extend(p);
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, CheckpointError> {
        let b = &mut bytes;
        if take(b, 4)? != STATE_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(take(b, 4)?.try_into().expect("4 bytes"));
        if version != STATE_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let batch = take_u64(b)? as usize;
        let t = take_u64(b)?;
        let mut hyper = [0.0; 4];
        for h in &mut hyper {
            *h = f64::from_le_bytes(take(b, 8)?.try_into().expect("8 bytes"));
        }
        let m = take_f64s(b)?;
        let v = take_f64s(b)?;
        let plen = take_u64(b)? as usize;
        let params = PolicyParams::from_bytes(take(b, plen)?)?;
        for moments in [&m, &v] {
            if moments.len() != params.num_params() {
                return Err(CheckpointError::Shape {
                    expected: params.num_params(),
                    found: moments.len(),
                });
            }
        }
        Ok(TrainerState {
            params,
            opt: Adam {
                lr: hyper[0],
                beta1: hyper[1],
                beta2: hyper[2],
                eps: hyper[3],
                m,
                v,
                t,
            },
            batch,
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64 + 1);
    rng
}

/// Generate one batch of episodes on `g_train` with its perfect predictor.
pub fn sample_batch(
    params: &PolicyParams,
    g_train: &KnowledgeGraph,
    pi: &dyn LinkPredictor,
    cfg: &TrainConfig,
    batch: usize,
) -> Result<Vec<Episode>, TrainError> {
    let mut rng = batch_rng(cfg.seed, batch);
    let mut seeds = Vec::with_capacity(cfg.batch_size);
    let mut queries = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.batch_size {
        let ty = *cfg.types.choose(&mut rng).expect("non-empty types");
        queries.push(sample_query(g_train, ty, &mut rng)?.0);
        seeds.push(rng.random::<u64>());
    }
    Ok(queries
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(q, &s)| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            run_episode(params, q, g_train, pi, cfg.t_train, cfg.pe_mode, &mut r)
        })
        .collect())
}

/// Where and how training reports progress.
pub struct TrainSinks<'a> {
    pub log: Option<&'a mut dyn Write>,
    /// Trainer-state checkpoints are written here.
    pub checkpoint: Option<&'a Path>,
}

impl TrainSinks<'_> {
    pub fn none() -> Self {
        TrainSinks {
            log: None,
            checkpoint: None,
        }
    }
}

/// Run training from `state` until `cfg.batches` batches are complete.
pub fn train_from(
    g_train: Arc<KnowledgeGraph>,
    cfg: &TrainConfig,
    mut state: TrainerState,
    sinks: &mut TrainSinks<'_>,
) -> Result<(TrainerState, Vec<BatchLog>), TrainError> {
    cfg.validate()?;
    let pi = PerfectPredictor::new(g_train.clone());
    let start = Instant::now();
    let mut logs = Vec::new();
    while state.batch < cfg.batches {
        let b = state.batch;
        let eps = sample_batch(&state.params, &g_train, &pi, cfg, b)?;
        let mean_best = eps.iter().map(Episode::best_score).sum::<f64>() / eps.len() as f64;
        let loss = reinforce_update(&mut state.params, &mut state.opt, &eps, cfg.gamma, b)?;
        state.batch += 1;
        let rec = BatchLog {
            batch: b,
            loss,
            mean_best_score: mean_best,
            wall_time: if cfg.log_wall_time {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        if let Some(w) = sinks.log.as_mut() {
            serde_json::to_writer(&mut **w, &rec).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        logs.push(rec);
        if let Some(path) = sinks.checkpoint {
            if cfg.checkpoint_every > 0 && state.batch % cfg.checkpoint_every == 0 {
                state.save(path)?;
            }
        }
    }
    if let Some(path) = sinks.checkpoint {
        state.save(path)?;
    }
    Ok((state, logs))
}

/// Fresh training run.
pub fn train(
    g_train: Arc<KnowledgeGraph>,
    cfg: &TrainConfig,
    sinks: &mut TrainSinks<'_>,
) -> Result<(TrainerState, Vec<BatchLog>), TrainError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = PolicyParams::init(cfg.hidden_dim, cfg.mlp_dim, &mut rng);
    train_from(g_train, cfg, TrainerState::new(params, cfg.lr), sinks)
}
