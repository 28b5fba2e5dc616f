//! Average step time (AST) measurements.

use rand::Rng;
use serde::Serialize;

use crate::compgraph::{ComputationalGraph, PeMode};
use crate::kg::KnowledgeGraph;
use crate::policy::PolicyParams;
use crate::predictor::LinkPredictor;
use crate::query::ConjunctiveQuery;
use crate::search::{search_graph, SearchConfig};

#[derive(Clone, Debug, Serialize)]
pub struct TimingRow {
    pub num_entities: usize,
    pub num_vars: usize,
    pub num_literals: usize,
    pub num_constants: usize,
    /// Seconds per search step.
    pub ast: f64,
    /// `|y⃗| + 2|Q|`.
    pub complexity_factor: usize,
    /// `|V(G)|·(|y⃗| + 2|Q|)`.
    pub size: usize,
    pub ast_per_factor: f64,
}

/// Time `steps` search steps on each Boolean query of `queries`.
pub fn timing_profile<R: Rng + ?Sized>(
    params: &PolicyParams,
    g: &KnowledgeGraph,
    pi: &dyn LinkPredictor,
    queries: &[ConjunctiveQuery],
    steps: usize,
    pe_mode: PeMode,
    rng: &mut R,
) -> Vec<TimingRow> {
    let cfg = SearchConfig {
        steps,
        pe_mode,
        ..Default::default()
    };
    queries
        .iter()
        .filter_map(|q| {
            let cg = ComputationalGraph::build(q, g, pi, pe_mode);
            let r = search_graph(&cg, params, q, pi, &cfg, rng);
            let ast = r.average_step_time()?.as_secs_f64();
            let factor = cg.num_vars() + 2 * q.literals.len();
            Some(TimingRow {
                num_entities: g.num_entities(),
                num_vars: cg.num_vars(),
                num_literals: q.literals.len(),
                num_constants: cg.num_constants(),
                ast,
                complexity_factor: factor,
                size: g.num_entities() * factor,
                ast_per_factor: ast / factor as f64,
            })
        })
        .collect()
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn linear_fit_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in &idx[i..=j] {
            r[*k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((linear_fit_r2(&x, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }
}
