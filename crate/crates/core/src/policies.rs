//! Online baseline policies.
//!
//! None of these carry a guarantee. LRU is the reporting baseline. The random
//! policies feed the equivalence checks with varied, but always legal, runs.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Instance, Page};
use crate::state::{
    CostLedger, Eviction, ModelError, PpStep, PublicPrivateCacheState, ReservesCacheState, Slot,
};

/// A reserves-model run: the ledger plus one eviction per miss.
#[derive(Clone, Debug)]
pub struct PolicyRun {
    pub ledger: CostLedger,
    pub evictions: Vec<Eviction>,
}

fn run_reserves(
    instance: &Instance,
    mut choose: impl FnMut(usize, Page, &ReservesCacheState) -> Page,
) -> Result<PolicyRun, ModelError> {
    let mut state = ReservesCacheState::initial(&instance.config);
    let mut ledger = CostLedger::default();
    let mut evictions = Vec::new();
    for (idx, &p) in instance.trace.requests.iter().enumerate() {
        let t = idx + 1;
        if state.contains(&p) {
            ledger.record_hit(t, p);
            continue;
        }
        let evict = choose(t, p, &state);
        state.apply_miss(t, p, evict, &mut ledger)?;
        evictions.push(Eviction { t, evict, fetch: p });
    }
    Ok(PolicyRun { ledger, evictions })
}

/// Evicts the least recently used page whose owner stays at or above its
/// reserve. Dummies count as never used, lowest id first.
pub fn run_lru(instance: &Instance) -> Result<PolicyRun, ModelError> {
    let mut state = ReservesCacheState::initial(&instance.config);
    let mut ledger = CostLedger::default();
    let mut evictions = Vec::new();
    let mut last_use: HashMap<Page, usize> = HashMap::new();
    for (idx, &p) in instance.trace.requests.iter().enumerate() {
        let t = idx + 1;
        if state.contains(&p) {
            ledger.record_hit(t, p);
        } else {
            let evict = state
                .cached
                .iter()
                .filter(|q| state.can_evict_for(q, &p))
                .min_by_key(|q| (last_use.get(q).copied().unwrap_or(0), **q))
                .copied()
                .expect("a full feasible cache always has a legal victim");
            state.apply_miss(t, p, evict, &mut ledger)?;
            evictions.push(Eviction { t, evict, fetch: p });
        }
        last_use.insert(p, t);
    }
    Ok(PolicyRun { ledger, evictions })
}

/// Evicts a uniformly random legal victim.
pub fn run_random_reserves(instance: &Instance, seed: u64) -> Result<PolicyRun, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_reserves(instance, |_, p, state| {
        let legal: Vec<Page> = state
            .cached
            .iter()
            .filter(|q| state.can_evict_for(q, &p))
            .copied()
            .collect();
        *legal
            .choose(&mut rng)
            .expect("a full feasible cache always has a legal victim")
    })
}

/// A public-private run: the ledger plus one step per miss.
#[derive(Clone, Debug)]
pub struct PpPolicyRun {
    pub ledger: CostLedger,
    pub steps: Vec<PpStep>,
}

/// A random lazy public-private policy: free slots are filled first (own
/// private slots before public ones); otherwise one of the legal ways of
/// making room is picked at random, including evicting from another agent's
/// private slots and moving one of its public pages in.
pub fn run_random_pp(instance: &Instance, seed: u64) -> Result<PpPolicyRun, ModelError> {
    let config = &instance.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = PublicPrivateCacheState::empty(config);
    let mut ledger = CostLedger::default();
    let mut steps = Vec::new();
    for (idx, &p) in instance.trace.requests.iter().enumerate() {
        let t = idx + 1;
        if state.contains(&p) {
            ledger.record_hit(t, p);
            continue;
        }
        let a = p.agent;
        let step = if state.free_private(config, a) > 0 {
            PpStep {
                t,
                fetch: p,
                slot: Slot::Private,
                evict: None,
                relocate: None,
            }
        } else if state.free_public(config) > 0 {
            PpStep {
                t,
                fetch: p,
                slot: Slot::Public,
                evict: None,
                relocate: None,
            }
        } else {
            let mut options = Vec::new();
            for &q in &state.private[a.index()] {
                options.push(PpStep {
                    t,
                    fetch: p,
                    slot: Slot::Private,
                    evict: Some(q),
                    relocate: None,
                });
            }
            for &q in &state.public {
                options.push(PpStep {
                    t,
                    fetch: p,
                    slot: Slot::Public,
                    evict: Some(q),
                    relocate: None,
                });
            }
            for (j, private) in state.private.iter().enumerate().skip(1) {
                if let Some(&r) = state.public.iter().find(|r| r.agent.index() == j) {
                    for &q in private {
                        options.push(PpStep {
                            t,
                            fetch: p,
                            slot: Slot::Public,
                            evict: Some(q),
                            relocate: Some(r),
                        });
                    }
                    if state.free_private(config, r.agent) > 0 {
                        options.push(PpStep {
                            t,
                            fetch: p,
                            slot: Slot::Public,
                            evict: None,
                            relocate: Some(r),
                        });
                    }
                }
            }
            if options.is_empty() {
                return Err(ModelError::Schedule {
                    t,
                    detail: "no slot can take the fetched page".into(),
                });
            }
            options[rng.gen_range(0..options.len())]
        };
        state.apply(config, &step, &mut ledger)?;
        steps.push(step);
    }
    Ok(PpPolicyRun { ledger, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{replay_pp, replay_reserves};

    fn inst() -> Instance {
        let reqs = [
            (1, 0),
            (2, 0),
            (1, 1),
            (2, 1),
            (1, 0),
            (1, 2),
            (2, 0),
            (2, 2),
            (1, 1),
            (2, 1),
            (1, 0),
        ]
        .iter()
        .map(|&(a, l)| Page::new(a, l))
        .collect();
        Instance::from_requests(3, vec![1, 1], reqs)
    }

    #[test]
    fn lru_on_a_single_agent_matches_textbook_lru() {
        // k = 2, cycle over 3 pages: every request misses.
        let reqs = (0..9).map(|t| Page::new(1, t % 3)).collect();
        let i = Instance::from_requests(2, vec![0], reqs);
        assert_eq!(run_lru(&i).unwrap().ledger.misses, 9);
        let reqs = [0, 1, 0, 2, 0, 1]
            .iter()
            .map(|&l| Page::new(1, l))
            .collect();
        let i = Instance::from_requests(2, vec![0], reqs);
        // 0 1 hit(0) 2(evicts 1) hit(0) 1(evicts 2)
        assert_eq!(run_lru(&i).unwrap().ledger.misses, 4);
    }

    #[test]
    fn policy_runs_replay() {
        let i = inst();
        for run in [run_lru(&i).unwrap(), run_random_reserves(&i, 4).unwrap()] {
            assert_eq!(replay_reserves(&i, &run.evictions).unwrap(), run.ledger);
        }
        let pp = run_random_pp(&i, 4).unwrap();
        assert_eq!(replay_pp(&i, &pp.steps).unwrap(), pp.ledger);
    }
}
