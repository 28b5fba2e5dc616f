//! Synthetic knowledge-graph pairs `G ⊂ G̃` for tests, training and demos.
//!
//! Entities get one of `num_types` types; each relation has a fixed head
//! and tail type. Tails are drawn with Zipf-like popularity so a few
//! entities become hubs. The observable graph keeps each fact of `G̃`
//! independently with probability `observed_fraction`.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kg::{EntityId, KnowledgeGraph, RelId, Triple, Vocabulary};

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub num_entities: usize,
    pub num_relations: usize,
    pub num_types: usize,
    /// Mean number of outgoing facts per entity in `G̃`.
    pub out_degree: f64,
    pub observed_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_entities: 200,
            num_relations: 12,
            num_types: 4,
            out_degree: 4.0,
            observed_fraction: 0.85,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthPair {
    pub observed: Arc<KnowledgeGraph>,
    pub complete: Arc<KnowledgeGraph>,
}

pub fn synthetic_pair(cfg: &SynthConfig) -> SynthPair {
    assert!(cfg.num_entities > 0 && cfg.num_relations > 0 && cfg.num_types > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_entities;
    let vocab = Arc::new(Vocabulary::synthetic(n, cfg.num_relations));
    let types: Vec<usize> = (0..n).map(|i| i % cfg.num_types).collect();
    let members: Vec<Vec<u32>> = (0..cfg.num_types)
        .map(|t| (0..n as u32).filter(|&i| types[i as usize] == t).collect())
        .collect();
    let sig: Vec<(usize, usize)> = (0..cfg.num_relations)
        .map(|_| (rng.random_range(0..cfg.num_types), rng.random_range(0..cfg.num_types)))
        .collect();
    // popularity per (relation) over its tail type, random rank order
    let popularity: Vec<(Vec<u32>, WeightedIndex<f64>)> = sig
        .iter()
        .map(|&(_, tt)| {
            let mut pool = members[tt].clone();
            for i in (1..pool.len()).rev() {
                pool.swap(i, rng.random_range(0..=i));
            }
            let w: Vec<f64> = (0..pool.len()).map(|k| 1.0 / (k as f64 + 1.0).powf(0.8)).collect();
            let idx = WeightedIndex::new(&w).expect("non-empty type");
            (pool, idx)
        })
        .collect();

    let mut facts = Vec::new();
    for h in 0..n as u32 {
        let rels: Vec<usize> = (0..cfg.num_relations)
            .filter(|&r| sig[r].0 == types[h as usize])
            .collect();
        if rels.is_empty() {
            continue;
        }
        let k = ((cfg.out_degree * rng.random_range(0.5..1.5)).round() as usize).max(1);
        for _ in 0..k {
            let r = rels[rng.random_range(0..rels.len())];
            let (pool, idx) = &popularity[r];
            let t = pool[idx.sample(&mut rng)];
            if t != h {
                facts.push(Triple::new(RelId(r as u32), EntityId(h), EntityId(t)));
            }
        }
    }
    facts.sort_unstable();
    facts.dedup();
    let observed: Vec<Triple> = facts
        .iter()
        .copied()
        .filter(|_| rng.random_bool(cfg.observed_fraction))
        .collect();
    SynthPair {
        observed: Arc::new(KnowledgeGraph::from_triples(vocab.clone(), observed)),
        complete: Arc::new(KnowledgeGraph::from_triples(vocab, facts)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::subset_check;

    #[test]
    fn pair_is_nested_and_deterministic() {
        let cfg = SynthConfig::default();
        let a = synthetic_pair(&cfg);
        let b = synthetic_pair(&cfg);
        assert!(subset_check(&a.observed, &a.complete));
        assert!(a.observed.num_facts() < a.complete.num_facts());
        assert_eq!(a.complete.sorted_facts(), b.complete.sorted_facts());
        assert_eq!(a.observed.sorted_facts(), b.observed.sorted_facts());
        assert!(a.complete.num_facts() > 500);
    }
}
