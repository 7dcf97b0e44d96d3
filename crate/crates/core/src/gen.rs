//! Seeded instance generators.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Instance, Page, RequestTrace, ReserveConfig};

/// Shape of random instances sized for the exact solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SmallShape {
    pub max_agents: usize,
    pub max_pages: usize,
    pub max_k: usize,
    pub max_len: usize,
}

impl Default for SmallShape {
    fn default() -> Self {
        SmallShape {
            max_agents: 3,
            max_pages: 9,
            max_k: 5,
            max_len: 14,
        }
    }
}

/// A random instance within `shape`, with `n_i >= max(k_i, 1)` for every agent.
pub fn random_small_instance(rng: &mut impl Rng, shape: &SmallShape) -> Instance {
    loop {
        let m = rng.gen_range(1..=shape.max_agents);
        let k = rng.gen_range(2..=shape.max_k.max(2));
        // Reserves with sum < k, biased towards non-trivial ones.
        let mut reserves = vec![0usize; m];
        let mut budget = k - 1;
        for r in reserves.iter_mut() {
            if budget == 0 {
                break;
            }
            *r = rng.gen_range(0..=budget.min(2));
            budget -= *r;
        }
        let mut sizes: Vec<usize> = reserves.iter().map(|&r| r.max(1)).collect();
        let base: usize = sizes.iter().sum();
        if base > shape.max_pages {
            continue;
        }
        let extra = rng.gen_range(0..=shape.max_pages - base);
        for _ in 0..extra {
            let a = rng.gen_range(0..m);
            sizes[a] += 1;
        }
        let len = rng.gen_range(0..=shape.max_len);
        let universe = ReserveConfig::new(k, reserves.clone(), sizes.clone()).universe();
        let requests = (0..len)
            .map(|_| universe[rng.gen_range(0..universe.len())])
            .collect();
        return Instance::new(
            ReserveConfig::new(k, reserves, sizes),
            RequestTrace::new(requests),
        );
    }
}

/// Every instance with at most `max_pages` real pages and `max_len` requests over
/// the given agent/cache shapes, up to renaming of pages within an agent
/// (pages appear in first-request order).
pub fn exhaustive_instances(
    max_pages: usize,
    max_len: usize,
    configs: &[(usize, Vec<usize>)],
) -> Vec<Instance> {
    let mut out = Vec::new();
    for (k, reserves) in configs {
        let m = reserves.len();
        for len in 0..=max_len {
            let mut seq = Vec::with_capacity(len);
            let mut next_local = vec![0u32; m + 1];
            enumerate(
                len,
                max_pages,
                m,
                &mut seq,
                &mut next_local,
                &mut |reqs: &[Page]| {
                    out.push(Instance::from_requests(*k, reserves.clone(), reqs.to_vec()));
                },
            );
        }
    }
    out
}

fn enumerate(
    len: usize,
    max_pages: usize,
    m: usize,
    seq: &mut Vec<Page>,
    next_local: &mut Vec<u32>,
    emit: &mut impl FnMut(&[Page]),
) {
    if seq.len() == len {
        emit(seq);
        return;
    }
    let used: u32 = next_local.iter().sum();
    for a in 1..=m as u32 {
        for l in 0..=next_local[a as usize] {
            let fresh = l == next_local[a as usize];
            if fresh && used as usize >= max_pages {
                continue;
            }
            seq.push(Page::new(a, l));
            if fresh {
                next_local[a as usize] += 1;
            }
            enumerate(len, max_pages, m, seq, next_local, emit);
            if fresh {
                next_local[a as usize] -= 1;
            }
            seq.pop();
        }
    }
}

/// Trace generator kinds for the command-line tool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceKind {
    Uniform,
    /// Zipf(1) popularity over each agent's pages, agents chosen uniformly.
    Zipf,
    /// Cycles over `k + 1` pages of one agent while the others hold reserves.
    Adversarial,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceParams {
    pub k: usize,
    pub reserves: Vec<usize>,
    pub pages_per_agent: usize,
    pub length: usize,
    pub seed: u64,
}

pub fn generate_trace(kind: TraceKind, params: &TraceParams) -> Instance {
    let m = params.reserves.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let sizes = vec![params.pages_per_agent; m];
    let config = ReserveConfig::new(params.k, params.reserves.clone(), sizes);
    let ppa = params.pages_per_agent as u32;
    let requests: Vec<Page> = if m == 0 || ppa == 0 {
        Vec::new()
    } else {
        match kind {
            TraceKind::Uniform => (0..params.length)
                .map(|_| Page::new(rng.gen_range(1..=m as u32), rng.gen_range(0..ppa)))
                .collect(),
            TraceKind::Zipf => {
                let weights: Vec<f64> = (1..=ppa).map(|r| 1.0 / r as f64).collect();
                let dist = WeightedIndex::new(&weights).expect("positive weights");
                (0..params.length)
                    .map(|_| Page::new(rng.gen_range(1..=m as u32), dist.sample(&mut rng) as u32))
                    .collect()
            }
            TraceKind::Adversarial => {
                let cycle = (params.k as u32 + 1).min(ppa);
                (0..params.length)
                    .map(|t| {
                        if rng.gen_bool(0.1) {
                            Page::new(rng.gen_range(1..=m as u32), rng.gen_range(0..ppa))
                        } else {
                            Page::new(1, t as u32 % cycle)
                        }
                    })
                    .collect()
            }
        }
    };
    Instance::new(config, RequestTrace::new(requests))
}
