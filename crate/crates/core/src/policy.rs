//! The GNN search policy.
//!
//! All weights live in one flat `f64` vector; a [`Layout`] records where each
//! tensor sits. Gradients use the same layout, which keeps the optimizer and
//! finite-difference checks trivial.
//!
//! Dense layers compute `y = x·Wᵀ + b` with `W` stored row-major as
//! `(out, in)`. MLPs are `Linear → ReLU → Linear`. The GRU cell uses the
//! reset/update/candidate layout:
//!
//! ```text
//! r  = σ(W_ir x + b_ir + W_hr h + b_hr)
//! z  = σ(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use std::io::{Read, Write};

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::compgraph::ComputationalGraph;
use crate::fuzzy::Assignment;
use crate::kg::EntityId;
use crate::query::Term;

/// Lower clip bound for centred logits.
pub const LOGIT_FLOOR: f64 = -100.0;

const MAGIC: &[u8; 4] = b"ACQP";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Dense {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

impl Dense {
    fn weight<'a>(&self, th: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.out, self.inp), &th[self.w..self.w + self.out * self.inp]).expect("layout")
    }

    fn bias<'a>(&self, th: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&th[self.b..self.b + self.out])
    }

    fn forward(&self, th: &[f64], x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight(th).t());
        y += &self.bias(th);
        y
    }

    /// Accumulates parameter gradients into `g`; returns `dL/dx`.
    fn backward(&self, th: &[f64], g: &mut [f64], x: ArrayView2<f64>, dy: ArrayView2<f64>) -> Array2<f64> {
        {
            let mut gw = ArrayViewMut2::from_shape((self.out, self.inp), &mut g[self.w..self.w + self.out * self.inp])
                .expect("layout");
            general_mat_mul(1.0, &dy.t(), &x, 1.0, &mut gw);
        }
        let mut gb = ArrayViewMut1::from(&mut g[self.b..self.b + self.out]);
        gb += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight(th))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Mlp {
    l1: Dense,
    l2: Dense,
}

impl Mlp {
    /// Returns the output and the post-ReLU hidden activations.
    fn forward(&self, th: &[f64], x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let mut hidden = self.l1.forward(th, x);
        hidden.mapv_inplace(|v| v.max(0.0));
        let out = self.l2.forward(th, hidden.view());
        (out, hidden)
    }

    fn backward(
        &self,
        th: &[f64],
        g: &mut [f64],
        x: ArrayView2<f64>,
        hidden: ArrayView2<f64>,
        dy: ArrayView2<f64>,
    ) -> Array2<f64> {
        let mut dh = self.l2.backward(th, g, hidden, dy);
        Zip::from(&mut dh).and(&hidden).for_each(|d, &h| {
            if h <= 0.0 {
                *d = 0.0
            }
        });
        self.l1.backward(th, g, x, dh.view())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Gru {
    ih: Dense,
    hh: Dense,
}

struct GruCache {
    r: Array2<f64>,
    z: Array2<f64>,
    n: Array2<f64>,
    hn: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Gru {
    fn forward(&self, th: &[f64], h: ArrayView2<f64>, x: ArrayView2<f64>) -> (Array2<f64>, GruCache) {
        let d = h.ncols();
        let gi = self.ih.forward(th, x);
        let gh = self.hh.forward(th, h);
        let mut r = &gi.slice(s![.., 0..d]) + &gh.slice(s![.., 0..d]);
        r.mapv_inplace(sigmoid);
        let mut z = &gi.slice(s![.., d..2 * d]) + &gh.slice(s![.., d..2 * d]);
        z.mapv_inplace(sigmoid);
        let hn = gh.slice(s![.., 2 * d..]).to_owned();
        let mut n = gi.slice(s![.., 2 * d..]).to_owned();
        Zip::from(&mut n).and(&r).and(&hn).for_each(|n, &r, &hn| *n = (*n + r * hn).tanh());
        let mut out = Array2::zeros(h.raw_dim());
        Zip::from(&mut out)
            .and(&z)
            .and(&n)
            .and(h)
            .for_each(|o, &z, &n, &h| *o = (1.0 - z) * n + z * h);
        (out, GruCache { r, z, n, hn })
    }

    /// Returns `(dL/dh, dL/dx)`.
    fn backward(
        &self,
        th: &[f64],
        g: &mut [f64],
        h: ArrayView2<f64>,
        x: ArrayView2<f64>,
        c: &GruCache,
        dout: ArrayView2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let (rows, d) = h.dim();
        let mut dgi = Array2::zeros((rows, 3 * d));
        let mut dgh = Array2::zeros((rows, 3 * d));
        let mut dh = Array2::zeros((rows, d));
        for i in 0..rows {
            for j in 0..d {
                let (r, z, n, hn) = (c.r[[i, j]], c.z[[i, j]], c.n[[i, j]], c.hn[[i, j]]);
                let go = dout[[i, j]];
                dh[[i, j]] = go * z;
                let dn = go * (1.0 - z) * (1.0 - n * n);
                let dz = go * (h[[i, j]] - n) * z * (1.0 - z);
                let dr = dn * hn * r * (1.0 - r);
                dgi[[i, j]] = dr;
                dgi[[i, d + j]] = dz;
                dgi[[i, 2 * d + j]] = dn;
                dgh[[i, j]] = dr;
                dgh[[i, d + j]] = dz;
                dgh[[i, 2 * d + j]] = dn * r;
            }
        }
        let dx = self.ih.backward(th, g, x, dgi.view());
        dh += &self.hh.backward(th, g, h, dgh.view());
        (dh, dx)
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub hidden_dim: usize,
    pub mlp_dim: usize,
    h_init: usize,
    gru: Gru,
    enc: Mlp,
    m_v: Mlp,
    m_r: Mlp,
    u_v: Mlp,
    u_x: Mlp,
    out: Mlp,
    len: usize,
}

impl Layout {
    pub fn new(hidden_dim: usize, mlp_dim: usize) -> Self {
        let mut len = 0;
        let mut dense = |inp: usize, out: usize| {
            let w = len;
            len += inp * out;
            let b = len;
            len += out;
            Dense { w, b, inp, out }
        };
        let (d, m) = (hidden_dim, mlp_dim);
        let gru = Gru {
            ih: dense(d, 3 * d),
            hh: dense(d, 3 * d),
        };
        let mut mlp = |inp: usize, out: usize| Mlp {
            l1: dense(inp, m),
            l2: dense(m, out),
        };
        let enc = mlp(d + 1, d);
        let m_v = mlp(d, 4 * d);
        let m_r = mlp(d, 4 * d);
        let u_v = mlp(d, d);
        let u_x = mlp(d, d);
        let out = mlp(d, 1);
        let h_init = len;
        len += d;
        Layout {
            hidden_dim,
            mlp_dim,
            h_init,
            gru,
            enc,
            m_v,
            m_r,
            u_v,
            u_x,
            out,
            len,
        }
    }

    /// Offset of the initial hidden vector in the flat parameters.
    pub fn h_init_offset(&self) -> usize {
        self.h_init
    }

    pub fn num_params(&self) -> usize {
        self.len
    }

    fn dense_layers(&self) -> Vec<Dense> {
        let mut v = vec![self.gru.ih, self.gru.hh];
        for m in [self.enc, self.m_v, self.m_r, self.u_v, self.u_x, self.out] {
            v.push(m.l1);
            v.push(m.l2);
        }
        v
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a policy checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint holds {found} weights, dims imply {expected}")]
    Shape { expected: usize, found: usize },
    #[error("checkpoint contains non-finite weights")]
    NonFinite,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Trainable policy weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    layout: Layout,
    theta: Vec<f64>,
}

impl PolicyParams {
    /// Uniform `[−1/√fan_in, 1/√fan_in]` weights and biases; `h_init = 0`.
    pub fn init<R: Rng + ?Sized>(hidden_dim: usize, mlp_dim: usize, rng: &mut R) -> Self {
        let layout = Layout::new(hidden_dim, mlp_dim);
        let mut theta = vec![0.0; layout.len];
        for l in layout.dense_layers() {
            let bound = 1.0 / (l.inp as f64).sqrt();
            for v in &mut theta[l.w..l.b + l.out] {
                *v = rng.random_range(-bound..bound);
            }
        }
        PolicyParams { layout, theta }
    }

    pub fn from_parts(layout: Layout, theta: Vec<f64>) -> Self {
        assert_eq!(theta.len(), layout.len, "parameter vector length");
        PolicyParams { layout, theta }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn hidden_dim(&self) -> usize {
        self.layout.hidden_dim
    }

    pub fn mlp_dim(&self) -> usize {
        self.layout.mlp_dim
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn h_init(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.theta[self.layout.h_init..self.layout.h_init + self.layout.hidden_dim])
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// Little-endian: magic, version, d, mlp width, count, then weights.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * self.theta.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layout.hidden_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.layout.mlp_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.theta.len() as u64).to_le_bytes());
        for v in &self.theta {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let take = |at: usize, n: usize| bytes.get(at..at + n).ok_or(CheckpointError::Truncated);
        if take(0, 4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let u32_at = |at| -> Result<u32, CheckpointError> { Ok(u32::from_le_bytes(take(at, 4)?.try_into().unwrap())) };
        let version = u32_at(4)?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let d = u32_at(8)? as usize;
        let m = u32_at(12)? as usize;
        let count = u64::from_le_bytes(take(16, 8)?.try_into().unwrap()) as usize;
        let layout = Layout::new(d, m);
        if count != layout.len {
            return Err(CheckpointError::Shape {
                expected: layout.len,
                found: count,
            });
        }
        let body = take(24, 8 * count)?;
        if bytes.len() != 24 + 8 * count {
            return Err(CheckpointError::Shape {
                expected: layout.len,
                found: (bytes.len() - 24) / 8,
            });
        }
        let theta: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::NonFinite);
        }
        Ok(PolicyParams { layout, theta })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Mutable per-episode search state.
#[derive(Clone, Debug)]
pub struct SearchState {
    /// One row per value vertex.
    pub hidden: Array2<f64>,
    pub alpha: Assignment,
    pub step: usize,
}

/// Hidden rows set to `h_init`; each variable drawn uniformly.
pub fn init_state<R: Rng + ?Sized>(cg: &ComputationalGraph, params: &PolicyParams, rng: &mut R) -> SearchState {
    let hidden = params
        .h_init()
        .broadcast((cg.num_values(), params.hidden_dim()))
        .expect("broadcast")
        .to_owned();
    let mut alpha = Assignment::new();
    for t in &cg.terms()[..cg.num_vars()] {
        if let Term::Var(v) = t.term {
            alpha.set(v, EntityId(rng.random_range(0..t.domain_size as u32)));
        }
    }
    SearchState { hidden, alpha, step: 0 }
}

/// Per-value probabilities from one forward step. Constant values carry
/// probability 1.
#[derive(Clone, Debug)]
pub struct Distributions {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl Distributions {
    /// Distribution over the domain of variable term `term`.
    pub fn of_term<'a>(&'a self, cg: &ComputationalGraph, term: usize) -> &'a [f64] {
        let t = &cg.terms()[term];
        &self.probs[t.value_start..t.value_start + t.domain_size]
    }

    /// `log P(α) = Σ_z log μ_z(α(z))`.
    pub fn log_prob(&self, cg: &ComputationalGraph, alpha: &Assignment) -> f64 {
        cg.terms()[..cg.num_vars()]
            .iter()
            .map(|t| {
                let v = t.var().expect("variable term");
                self.log_probs[t.value_start + alpha.get(v).expect("total").index()]
            })
            .sum()
    }
}

/// Independent categorical draw per variable.
pub fn sample_assignment<R: Rng + ?Sized>(cg: &ComputationalGraph, mu: &Distributions, rng: &mut R) -> Assignment {
    let mut alpha = Assignment::new();
    for (i, t) in cg.terms()[..cg.num_vars()].iter().enumerate() {
        let idx = WeightedIndex::new(mu.of_term(cg, i)).expect("probabilities are positive");
        alpha.set(t.var().expect("variable"), EntityId(idx.sample(rng) as u32));
    }
    alpha
}

/// Intermediate values of one forward step, kept for the backward pass.
pub struct StepTape {
    h_prev: Array2<f64>,
    kinds: Vec<u8>,
    x_in: Array2<f64>,
    enc_h: Array2<f64>,
    x: Array2<f64>,
    mv_h: Array2<f64>,
    lit_arg: Vec<u32>,
    y_lit: Array2<f64>,
    mr_h: Array2<f64>,
    val_arg: Vec<u32>,
    s: Array2<f64>,
    uv_h: Array2<f64>,
    pool_arg: Vec<u32>,
    pooled: Array2<f64>,
    ux_h: Array2<f64>,
    g_in: Array2<f64>,
    gru: GruCache,
    h_new: Array2<f64>,
    out_h: Array2<f64>,
    logits: Vec<f64>,
    pub dist: Distributions,
}

const NO_EDGE: u32 = u32::MAX;

/// One message-passing step. Replaces `state.hidden` and advances
/// `state.step`; `le` must hold the LE labels for `state.alpha`.
pub fn forward_step(
    cg: &ComputationalGraph,
    params: &PolicyParams,
    state: &mut SearchState,
    le: &[bool],
) -> Distributions {
    let tape = forward_step_taped(cg, params, state, le);
    tape.dist
}

/// Like [`forward_step`] but keeps every intermediate for backpropagation.
pub fn forward_step_taped(
    cg: &ComputationalGraph,
    params: &PolicyParams,
    state: &mut SearchState,
    le: &[bool],
) -> StepTape {
    let th = params.as_slice();
    let ly = &params.layout;
    let d = ly.hidden_dim;
    let nv = cg.num_values();
    assert_eq!(le.len(), cg.num_vl_edges(), "LE label buffer size");
    assert_eq!(state.hidden.dim(), (nv, d), "hidden state shape");

    let h_prev = std::mem::replace(&mut state.hidden, Array2::zeros((0, 0)));
    let mut x_in = Array2::zeros((nv, d + 1));
    x_in.slice_mut(s![.., 0..d]).assign(&h_prev);
    for v in 0..nv {
        x_in[[v, d]] = if cg.is_selected(v, &state.alpha) { 1.0 } else { 0.0 };
    }
    let (x, enc_h) = ly.enc.forward(th, x_in.view());
    let (mv, mv_h) = ly.m_v.forward(th, x.view());

    let pe = cg.pe_labels();
    let kinds: Vec<u8> = pe.iter().zip(le).map(|(&p, &l)| 2 * p as u8 + l as u8).collect();

    let nl = cg.literals().len();
    let mut y_lit = Array2::from_elem((nl, d), f64::NEG_INFINITY);
    let mut lit_arg = vec![NO_EDGE; nl * d];
    for (li, lit) in cg.literals().iter().enumerate() {
        for e in lit.edge_start..lit.edge_end {
            let v = cg.edge_value(e);
            let k = kinds[e] as usize;
            let msg = mv.slice(s![v, k * d..(k + 1) * d]);
            for j in 0..d {
                if msg[j] > y_lit[[li, j]] {
                    y_lit[[li, j]] = msg[j];
                    lit_arg[li * d + j] = e as u32;
                }
            }
        }
    }
    y_lit.mapv_inplace(|v| if v == f64::NEG_INFINITY { 0.0 } else { v });
    let (mr, mr_h) = ly.m_r.forward(th, y_lit.view());

    let mut y_val = Array2::zeros((nv, d));
    let mut val_arg = vec![NO_EDGE; nv * d];
    for v in 0..nv {
        let edges = cg.value_edges(v);
        if edges.is_empty() {
            continue;
        }
        let mut row = y_val.row_mut(v);
        row.fill(f64::NEG_INFINITY);
        for &e in edges {
            let e = e as usize;
            let li = cg.edge_literal(e);
            let k = kinds[e] as usize;
            let msg = mr.slice(s![li, k * d..(k + 1) * d]);
            for j in 0..d {
                if msg[j] > row[j] {
                    row[j] = msg[j];
                    val_arg[v * d + j] = e as u32;
                }
            }
        }
    }

    let s_in = &x + &y_val;
    let (mut z, uv_h) = ly.u_v.forward(th, s_in.view());
    z += &x;

    let nt = cg.terms().len();
    let mut pooled = Array2::zeros((nt, d));
    let mut pool_arg = vec![0u32; nt * d];
    for (ti, t) in cg.terms().iter().enumerate() {
        for j in 0..d {
            let mut best = (t.value_start, z[[t.value_start, j]]);
            for v in t.value_start + 1..t.value_start + t.domain_size {
                if z[[v, j]] > best.1 {
                    best = (v, z[[v, j]]);
                }
            }
            pooled[[ti, j]] = best.1;
            pool_arg[ti * d + j] = best.0 as u32;
        }
    }
    let (zt, ux_h) = ly.u_x.forward(th, pooled.view());
    let mut g_in = z.clone();
    for (ti, t) in cg.terms().iter().enumerate() {
        let mut block = g_in.slice_mut(s![t.value_start..t.value_start + t.domain_size, ..]);
        block += &zt.row(ti);
    }
    let (h_new, gru) = ly.gru.forward(th, h_prev.view(), g_in.view());
    let (o, out_h) = ly.out.forward(th, h_new.view());
    let logits: Vec<f64> = o.column(0).to_vec();

    let mut probs = vec![1.0; nv];
    let mut log_probs = vec![0.0; nv];
    for t in &cg.terms()[..cg.num_vars()] {
        let r = t.value_start..t.value_start + t.domain_size;
        let max = logits[r.clone()].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in r.clone() {
            let c = (logits[v] - max).clamp(LOGIT_FLOOR, 0.0);
            log_probs[v] = c;
            sum += c.exp();
        }
        let log_sum = sum.ln();
        for v in r {
            log_probs[v] -= log_sum;
            probs[v] = log_probs[v].exp();
        }
    }

    state.hidden = h_new.clone();
    state.step += 1;
    StepTape {
        h_prev,
        kinds,
        x_in,
        enc_h,
        x,
        mv_h,
        lit_arg,
        y_lit,
        mr_h,
        val_arg,
        s: s_in,
        uv_h,
        pool_arg,
        pooled,
        ux_h,
        g_in,
        gru,
        h_new,
        out_h,
        logits,
        dist: Distributions { probs, log_probs },
    }
}

impl StepTape {
    /// Gradient of `log P(alpha)` w.r.t. the clipped logits, scaled by `coef`.
    pub fn log_prob_grad(&self, cg: &ComputationalGraph, alpha: &Assignment, coef: f64) -> Vec<f64> {
        let mut d_o = vec![0.0; self.logits.len()];
        for t in &cg.terms()[..cg.num_vars()] {
            let chosen = t.value_start + alpha.get(t.var().expect("variable")).expect("total").index();
            for v in t.value_start..t.value_start + t.domain_size {
                let ind = if v == chosen { 1.0 } else { 0.0 };
                d_o[v] = coef * (ind - self.dist.probs[v]);
            }
        }
        d_o
    }
}

/// Backward through one step. `d_o` is the gradient w.r.t. the clipped
/// logits, `d_h_new` the gradient flowing into the new hidden state from
/// later steps. Returns the gradient w.r.t. the previous hidden state.
pub fn backward_step(
    cg: &ComputationalGraph,
    params: &PolicyParams,
    grad: &mut [f64],
    tape: &StepTape,
    d_o: &[f64],
    d_h_new: Array2<f64>,
) -> Array2<f64> {
    let th = params.as_slice();
    let ly = &params.layout;
    let d = ly.hidden_dim;
    let nv = cg.num_values();

    // clip(l − max l, [−100, 0])
    let mut d_logits = Array2::zeros((nv, 1));
    for t in &cg.terms()[..cg.num_vars()] {
        let r = t.value_start..t.value_start + t.domain_size;
        let mut arg = r.start;
        for v in r.clone() {
            if tape.logits[v] > tape.logits[arg] {
                arg = v;
            }
        }
        let max = tape.logits[arg];
        let mut passed = 0.0;
        for v in r {
            if tape.logits[v] - max >= LOGIT_FLOOR {
                d_logits[[v, 0]] += d_o[v];
                passed += d_o[v];
            }
        }
        d_logits[[arg, 0]] -= passed;
    }
    let mut d_h = d_h_new;
    d_h += &ly
        .out
        .backward(th, grad, tape.h_new.view(), tape.out_h.view(), d_logits.view());

    let (mut d_h_prev, d_g_in) = ly
        .gru
        .backward(th, grad, tape.h_prev.view(), tape.g_in.view(), &tape.gru, d_h.view());

    let mut d_z = d_g_in.clone();
    let nt = cg.terms().len();
    let mut d_zt = Array2::zeros((nt, d));
    for (ti, t) in cg.terms().iter().enumerate() {
        d_zt.row_mut(ti).assign(
            &d_g_in
                .slice(s![t.value_start..t.value_start + t.domain_size, ..])
                .sum_axis(Axis(0)),
        );
    }
    let d_pooled = ly
        .u_x
        .backward(th, grad, tape.pooled.view(), tape.ux_h.view(), d_zt.view());
    for ti in 0..nt {
        for j in 0..d {
            d_z[[tape.pool_arg[ti * d + j] as usize, j]] += d_pooled[[ti, j]];
        }
    }

    // z = U_V(x + y) + x
    let mut d_x = d_z.clone();
    let d_s = ly.u_v.backward(th, grad, tape.s.view(), tape.uv_h.view(), d_z.view());
    d_x += &d_s;

    let nl = cg.literals().len();
    let mut d_mr = Array2::zeros((nl, 4 * d));
    for v in 0..nv {
        for j in 0..d {
            let e = tape.val_arg[v * d + j];
            if e != NO_EDGE {
                let e = e as usize;
                let k = tape.kinds[e] as usize;
                d_mr[[cg.edge_literal(e), k * d + j]] += d_s[[v, j]];
            }
        }
    }
    let d_y_lit = ly
        .m_r
        .backward(th, grad, tape.y_lit.view(), tape.mr_h.view(), d_mr.view());
    let mut d_mv = Array2::zeros((nv, 4 * d));
    for li in 0..nl {
        for j in 0..d {
            let e = tape.lit_arg[li * d + j];
            if e != NO_EDGE {
                let e = e as usize;
                let k = tape.kinds[e] as usize;
                d_mv[[cg.edge_value(e), k * d + j]] += d_y_lit[[li, j]];
            }
        }
    }
    d_x += &ly.m_v.backward(th, grad, tape.x.view(), tape.mv_h.view(), d_mv.view());
    let d_x_in = ly.enc.backward(th, grad, tape.x_in.view(), tape.enc_h.view(), d_x.view());
    d_h_prev += &d_x_in.slice(s![.., 0..d]);
    d_h_prev
}

/// Backpropagation through a whole episode. `d_os[t]` is the gradient
/// w.r.t. the clipped logits of step `t`. Accumulates into `grad`,
/// including the contribution to `h_init` from the initial hidden state.
pub fn backward_episode(
    cg: &ComputationalGraph,
    params: &PolicyParams,
    grad: &mut [f64],
    tapes: &[StepTape],
    d_os: &[Vec<f64>],
) {
    assert_eq!(tapes.len(), d_os.len());
    let d = params.hidden_dim();
    let mut d_h = Array2::zeros((cg.num_values(), d));
    for (tape, d_o) in tapes.iter().zip(d_os).rev() {
        d_h = backward_step(cg, params, grad, tape, d_o, d_h);
    }
    let h0 = params.layout.h_init;
    let mut g_h = ArrayViewMut1::from(&mut grad[h0..h0 + d]);
    g_h += &d_h.sum_axis(Axis(0));
}
