//! Offline 2-approximation: a reserve-aware generalisation of farthest-in-future.
//!
//! The cache is partitioned into `N_0, N_1, .., N_m` with `|N_i| = k_i` for
//! every agent. A requested page of agent `i` always passes through `N_i`:
//! it enters `N_i`, the farthest-in-future page of `N_i` drops to `N_0`, and
//! on a miss the farthest-in-future page of `N_0` is evicted.

mod audit;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use audit::{audit_potential, potential, AuditError, AuditReport, StepAudit};

use crate::model::{Instance, Page, RequestTrace, ReserveConfig};
use crate::state::{CostLedger, Eviction, ModelError, ReservesCacheState};

/// Next request time after each position (`None` when the page is not
/// requested again). Index `t - 1` holds the value for request `t`.
pub fn rank_annotate(trace: &RequestTrace) -> Vec<Option<usize>> {
    let mut next_seen: BTreeMap<Page, usize> = BTreeMap::new();
    let mut out = vec![None; trace.len()];
    for (idx, p) in trace.requests.iter().enumerate().rev() {
        out[idx] = next_seen.get(p).copied();
        next_seen.insert(*p, idx + 1);
    }
    out
}

/// Rank bookkeeping shared by the algorithm and its auditor. Pages that are
/// never requested again get `T + 1`.
#[derive(Clone, Debug)]
pub(crate) struct Ranks {
    next: Vec<Option<usize>>,
    current: BTreeMap<Page, usize>,
    infinity: usize,
}

impl Ranks {
    pub(crate) fn new(trace: &RequestTrace) -> Self {
        let mut current = BTreeMap::new();
        for (idx, p) in trace.requests.iter().enumerate() {
            current.entry(*p).or_insert(idx + 1);
        }
        Ranks {
            next: rank_annotate(trace),
            current,
            infinity: trace.len() + 1,
        }
    }

    pub(crate) fn of(&self, p: &Page) -> usize {
        self.current.get(p).copied().unwrap_or(self.infinity)
    }

    /// Total order used to pick "the page with maximum rank": rank, then
    /// dummies, then larger agent, then larger local id.
    pub(crate) fn key(&self, p: &Page) -> (usize, bool, u32, u32) {
        (self.of(p), p.dummy, p.agent.0, p.local)
    }

    pub(crate) fn max_in<'a>(&self, set: impl IntoIterator<Item = &'a Page>) -> Option<Page> {
        set.into_iter().copied().max_by_key(|p| self.key(p))
    }

    /// Sets `rank(p)` to its next request after time `t`.
    pub(crate) fn advance(&mut self, t: usize, p: Page) {
        let r = self.next[t - 1].unwrap_or(self.infinity);
        self.current.insert(p, r);
    }
}

/// The partition `N_0, .., N_m` kept by the algorithm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedCache {
    pub sets: Vec<BTreeSet<Page>>,
}

impl RankedCache {
    /// `N_i` holds the `k_i` dummies of agent `i`; `N_0` the filler dummies.
    pub fn initial(config: &ReserveConfig) -> Self {
        let state = ReservesCacheState::initial(config);
        let mut sets = vec![BTreeSet::new(); config.m() + 1];
        for p in state.cached {
            sets[p.agent.index()].insert(p);
        }
        RankedCache { sets }
    }

    pub fn owner_of(&self, p: &Page) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(p))
    }

    pub fn contains(&self, p: &Page) -> bool {
        self.owner_of(p).is_some()
    }

    pub fn check_shape(&self, config: &ReserveConfig) -> bool {
        let m = config.m();
        self.sets[0].len() == config.k0()
            && (1..=m).all(|i| {
                self.sets[i].len() == config.reserves[i - 1]
                    && self.sets[i].iter().all(|p| p.agent.index() == i)
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub t: usize,
    pub hit: bool,
    pub page: Page,
    pub evicted: Option<Page>,
    pub phi: Option<i64>,
}

impl fmt::Display for StepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.hit { "hit" } else { "miss" };
        let fetched = if self.hit {
            "-".to_string()
        } else {
            self.page.to_string()
        };
        let evicted = self
            .evicted
            .map_or_else(|| "-".to_string(), |p| p.to_string());
        write!(f, "{} {kind} fetched={fetched} evicted={evicted}", self.t)?;
        if let Some(phi) = self.phi {
            write!(f, " phi={phi}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OfflineRun {
    pub ledger: CostLedger,
    pub evictions: Vec<Eviction>,
    pub steps: Vec<StepRecord>,
}

impl OfflineRun {
    pub fn misses(&self) -> u64 {
        self.ledger.misses
    }
}

pub fn run_offline(instance: &Instance) -> Result<OfflineRun, ModelError> {
    let report = instance.validate();
    if !report.is_ok() {
        return Err(ModelError::Invalid(report.to_string()));
    }
    let config = &instance.config;
    let mut ranks = Ranks::new(&instance.trace);
    let mut cache = RankedCache::initial(config);
    let mut state = ReservesCacheState::initial(config);
    let mut ledger = CostLedger::default();
    let mut evictions = Vec::new();
    let mut steps = Vec::with_capacity(instance.trace.len());

    for (idx, &p) in instance.trace.requests.iter().enumerate() {
        let t = idx + 1;
        let i = p.agent.index();
        let mut evicted = None;
        match cache.owner_of(&p) {
            Some(owner) if owner == i => {
                ledger.record_hit(t, p);
            }
            Some(_) => {
                cache.sets[0].remove(&p);
                cache.sets[i].insert(p);
                let qi = ranks.max_in(&cache.sets[i]).expect("N_i holds p");
                cache.sets[i].remove(&qi);
                cache.sets[0].insert(qi);
                ledger.record_hit(t, p);
            }
            None => {
                cache.sets[i].insert(p);
                let qi = ranks.max_in(&cache.sets[i]).expect("N_i holds p");
                cache.sets[i].remove(&qi);
                cache.sets[0].insert(qi);
                let q = ranks
                    .max_in(cache.sets[0].iter().filter(|x| **x != p))
                    .ok_or_else(|| ModelError::Invalid("no public page to evict".into()))?;
                cache.sets[0].remove(&q);
                state.apply_miss(t, p, q, &mut ledger)?;
                evictions.push(Eviction {
                    t,
                    evict: q,
                    fetch: p,
                });
                evicted = Some(q);
            }
        }
        ranks.advance(t, p);
        debug_assert!(cache.check_shape(config));
        steps.push(StepRecord {
            t,
            hit: evicted.is_none(),
            page: p,
            evicted,
            phi: None,
        });
    }
    Ok(OfflineRun {
        ledger,
        evictions,
        steps,
    })
}
