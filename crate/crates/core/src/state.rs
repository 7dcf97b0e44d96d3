//! Cache state machines for both models, cost accounting and schedule replay.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::{AgentId, Instance, Page, ReserveConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("t={t}: evicting {page} would drop agent {agent} below its reserve")]
    ReserveViolation {
        t: usize,
        page: Page,
        agent: AgentId,
    },
    #[error("t={t}: page {page} is not cached")]
    NotCached { t: usize, page: Page },
    #[error("t={t}: page {page} is already cached")]
    AlreadyCached { t: usize, page: Page },
    #[error("t={t}: no room for {page} in the {slot} slots")]
    SlotFull { t: usize, page: Page, slot: Slot },
    #[error("t={t}: page {page} may not be placed in the private slots of agent {agent}")]
    WrongOwner {
        t: usize,
        page: Page,
        agent: AgentId,
    },
    #[error("t={t}: schedule {detail}")]
    Schedule { t: usize, detail: String },
}

/// One logged event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Hit(Page),
    Miss { fetch: Page, evict: Option<Page> },
}

/// Miss and eviction counts with a per-step log.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub misses: u64,
    pub evictions: u64,
    /// Evictions of dummy pages (included in `evictions`).
    pub dummy_evictions: u64,
    /// Public-to-private moves of a cached page (public-private model only).
    pub relocations: u64,
    pub log: Vec<(usize, Event)>,
}

impl CostLedger {
    pub fn record_hit(&mut self, t: usize, page: Page) {
        self.log.push((t, Event::Hit(page)));
    }

    pub fn record_miss(&mut self, t: usize, fetch: Page, evict: Option<Page>) {
        self.misses += 1;
        if let Some(e) = evict {
            self.evictions += 1;
            if e.dummy {
                self.dummy_evictions += 1;
            }
        }
        self.log.push((t, Event::Miss { fetch, evict }));
    }

    /// Evictions of requested (non-dummy) pages.
    pub fn real_evictions(&self) -> u64 {
        self.evictions - self.dummy_evictions
    }

    /// Cost of a public-private run: every miss plus every relocation.
    pub fn pp_cost(&self) -> u64 {
        self.misses + self.relocations
    }
}

/// A single eviction decision of a reserves-model run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Eviction {
    pub t: usize,
    pub evict: Page,
    pub fetch: Page,
}

impl fmt::Display for Eviction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} evict={} fetch={}", self.t, self.evict, self.fetch)
    }
}

impl std::str::FromStr for Eviction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.split_whitespace();
        let t = it
            .next()
            .and_then(|x| x.parse::<usize>().ok())
            .ok_or_else(|| format!("bad schedule line `{s}`"))?;
        let mut evict = None;
        let mut fetch = None;
        for tok in it {
            if let Some(v) = tok.strip_prefix("evict=") {
                evict = Some(v.parse::<Page>()?);
            } else if let Some(v) = tok.strip_prefix("fetch=") {
                fetch = Some(v.parse::<Page>()?);
            } else {
                return Err(format!("unexpected token `{tok}`"));
            }
        }
        match (evict, fetch) {
            (Some(evict), Some(fetch)) => Ok(Eviction { t, evict, fetch }),
            _ => Err(format!("incomplete schedule line `{s}`")),
        }
    }
}

/// Cache of the caching-with-reserves model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReservesCacheState {
    pub cached: BTreeSet<Page>,
    /// Index 0 counts filler dummies; index `i` counts pages (real or dummy) of agent `i`.
    pub per_agent_count: Vec<usize>,
    reserves: Vec<usize>,
    k: usize,
}

impl ReservesCacheState {
    /// `k_i` dummies of each agent `i` plus `k_0` filler dummies.
    pub fn initial(config: &ReserveConfig) -> Self {
        let mut cached = BTreeSet::new();
        for a in config.agents() {
            for l in 0..config.reserve(a) as u32 {
                cached.insert(Page::dummy(a.0, l));
            }
        }
        for l in 0..config.k0() as u32 {
            cached.insert(Page::dummy(0, l));
        }
        let mut per_agent_count = vec![0; config.m() + 1];
        for p in &cached {
            per_agent_count[p.agent.index()] += 1;
        }
        let mut reserves = vec![0];
        reserves.extend_from_slice(&config.reserves);
        ReservesCacheState {
            cached,
            per_agent_count,
            reserves,
            k: config.k,
        }
    }

    pub fn contains(&self, page: &Page) -> bool {
        self.cached.contains(page)
    }

    pub fn len(&self) -> usize {
        self.cached.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cached.is_empty()
    }

    pub fn reserve(&self, agent: AgentId) -> usize {
        self.reserves[agent.index()]
    }

    pub fn count(&self, agent: AgentId) -> usize {
        self.per_agent_count[agent.index()]
    }

    /// Whether `victim` may be evicted to make room for `fetch`.
    pub fn can_evict_for(&self, victim: &Page, fetch: &Page) -> bool {
        self.contains(victim)
            && (victim.agent == fetch.agent
                || self.count(victim.agent) > self.reserve(victim.agent))
    }

    /// Fetches `fetch` in place of `evict`, charging one miss and one eviction.
    pub fn apply_miss(
        &mut self,
        t: usize,
        fetch: Page,
        evict: Page,
        ledger: &mut CostLedger,
    ) -> Result<(), ModelError> {
        if self.contains(&fetch) {
            return Err(ModelError::AlreadyCached { t, page: fetch });
        }
        if !self.contains(&evict) {
            return Err(ModelError::NotCached { t, page: evict });
        }
        if !self.can_evict_for(&evict, &fetch) {
            return Err(ModelError::ReserveViolation {
                t,
                page: evict,
                agent: evict.agent,
            });
        }
        self.cached.remove(&evict);
        self.per_agent_count[evict.agent.index()] -= 1;
        self.cached.insert(fetch);
        self.per_agent_count[fetch.agent.index()] += 1;
        ledger.record_miss(t, fetch, Some(evict));
        debug_assert!(self.is_feasible());
        Ok(())
    }

    pub fn is_feasible(&self) -> bool {
        self.cached.len() <= self.k
            && self
                .per_agent_count
                .iter()
                .zip(&self.reserves)
                .all(|(c, r)| c >= r)
    }

    /// Canonical key: real pages plus the number of dummies held per agent.
    pub fn canonical_key(&self) -> (Vec<Page>, Vec<usize>) {
        let mut dummies = vec![0; self.per_agent_count.len()];
        let mut real = Vec::new();
        for p in &self.cached {
            if p.dummy {
                dummies[p.agent.index()] += 1;
            } else {
                real.push(*p);
            }
        }
        (real, dummies)
    }
}

/// Replays an eviction schedule through the reserves model.
pub fn replay_reserves(
    instance: &Instance,
    schedule: &[Eviction],
) -> Result<CostLedger, ModelError> {
    let mut state = ReservesCacheState::initial(&instance.config);
    let mut ledger = CostLedger::default();
    let mut next = schedule.iter().peekable();
    for (idx, &page) in instance.trace.requests.iter().enumerate() {
        let t = idx + 1;
        if state.contains(&page) {
            ledger.record_hit(t, page);
            continue;
        }
        let ev = next.next().ok_or_else(|| ModelError::Schedule {
            t,
            detail: "exhausted on a miss".into(),
        })?;
        if ev.t != t || ev.fetch != page {
            return Err(ModelError::Schedule {
                t,
                detail: format!("expected a fetch of {page}, found `{ev}`"),
            });
        }
        state.apply_miss(t, page, ev.evict, &mut ledger)?;
    }
    if let Some(ev) = next.next() {
        return Err(ModelError::Schedule {
            t: ev.t,
            detail: "has entries for hits".into(),
        });
    }
    Ok(ledger)
}

/// Slot class in the public-private model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Private,
    Public,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Private => write!(f, "private"),
            Slot::Public => write!(f, "public"),
        }
    }
}

/// Handling of one miss in the public-private model.
///
/// Applied in order: `evict` leaves the cache, `relocate` (a public page)
/// moves into its owner's private slots, then `fetch` is placed in `slot`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PpStep {
    pub t: usize,
    pub fetch: Page,
    pub slot: Slot,
    pub evict: Option<Page>,
    pub relocate: Option<Page>,
}

impl fmt::Display for PpStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fetch={} slot={}", self.t, self.fetch, self.slot)?;
        if let Some(e) = self.evict {
            write!(f, " evict={e}")?;
        }
        if let Some(r) = self.relocate {
            write!(f, " relocate={r}")?;
        }
        Ok(())
    }
}

/// Cache of the public-private model. Empty slots are implicit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicPrivateCacheState {
    /// `private[i]` holds pages of agent `i`; index 0 is unused.
    pub private: Vec<BTreeSet<Page>>,
    pub public: BTreeSet<Page>,
}

impl PublicPrivateCacheState {
    pub fn empty(config: &ReserveConfig) -> Self {
        PublicPrivateCacheState {
            private: vec![BTreeSet::new(); config.m() + 1],
            public: BTreeSet::new(),
        }
    }

    pub fn slot_of(&self, page: &Page) -> Option<Slot> {
        if self.public.contains(page) {
            Some(Slot::Public)
        } else if self
            .private
            .get(page.agent.index())
            .is_some_and(|s| s.contains(page))
        {
            Some(Slot::Private)
        } else {
            None
        }
    }

    pub fn contains(&self, page: &Page) -> bool {
        self.slot_of(page).is_some()
    }

    pub fn pages(&self) -> BTreeSet<Page> {
        self.private
            .iter()
            .flatten()
            .chain(&self.public)
            .copied()
            .collect()
    }

    pub fn free_private(&self, config: &ReserveConfig, agent: AgentId) -> usize {
        config.reserve(agent) - self.private[agent.index()].len()
    }

    pub fn free_public(&self, config: &ReserveConfig) -> usize {
        config.k0() - self.public.len()
    }

    fn place(
        &mut self,
        config: &ReserveConfig,
        t: usize,
        page: Page,
        slot: Slot,
    ) -> Result<(), ModelError> {
        match slot {
            Slot::Private => {
                if page.agent.is_filler() || page.agent.index() > config.m() {
                    return Err(ModelError::WrongOwner {
                        t,
                        page,
                        agent: page.agent,
                    });
                }
                if self.free_private(config, page.agent) == 0 {
                    return Err(ModelError::SlotFull { t, page, slot });
                }
                self.private[page.agent.index()].insert(page);
            }
            Slot::Public => {
                if self.free_public(config) == 0 {
                    return Err(ModelError::SlotFull { t, page, slot });
                }
                self.public.insert(page);
            }
        }
        Ok(())
    }

    fn remove(&mut self, t: usize, page: Page) -> Result<Slot, ModelError> {
        match self.slot_of(&page) {
            Some(Slot::Public) => {
                self.public.remove(&page);
                Ok(Slot::Public)
            }
            Some(Slot::Private) => {
                self.private[page.agent.index()].remove(&page);
                Ok(Slot::Private)
            }
            None => Err(ModelError::NotCached { t, page }),
        }
    }

    /// Applies the handling of a miss and charges it to `ledger`.
    pub fn apply(
        &mut self,
        config: &ReserveConfig,
        step: &PpStep,
        ledger: &mut CostLedger,
    ) -> Result<(), ModelError> {
        let t = step.t;
        if self.contains(&step.fetch) {
            return Err(ModelError::AlreadyCached {
                t,
                page: step.fetch,
            });
        }
        if let Some(e) = step.evict {
            self.remove(t, e)?;
        }
        if let Some(r) = step.relocate {
            if self.slot_of(&r) != Some(Slot::Public) {
                return Err(ModelError::Schedule {
                    t,
                    detail: format!("relocated page {r} is not public"),
                });
            }
            self.public.remove(&r);
            self.place(config, t, r, Slot::Private)?;
            ledger.relocations += 1;
        }
        self.place(config, t, step.fetch, step.slot)?;
        ledger.record_miss(t, step.fetch, step.evict);
        debug_assert!(self.is_feasible(config));
        Ok(())
    }

    pub fn is_feasible(&self, config: &ReserveConfig) -> bool {
        self.public.len() <= config.k0()
            && self.private.iter().enumerate().skip(1).all(|(i, set)| {
                set.len() <= config.reserve(AgentId(i as u32))
                    && set.iter().all(|p| p.agent.index() == i)
            })
            && self
                .public
                .iter()
                .all(|p| self.private.iter().all(|s| !s.contains(p)))
    }
}

/// Replays a public-private schedule (one step per miss).
pub fn replay_pp(instance: &Instance, steps: &[PpStep]) -> Result<CostLedger, ModelError> {
    let config = &instance.config;
    let mut state = PublicPrivateCacheState::empty(config);
    let mut ledger = CostLedger::default();
    let mut next = steps.iter();
    for (idx, &page) in instance.trace.requests.iter().enumerate() {
        let t = idx + 1;
        if state.contains(&page) {
            ledger.record_hit(t, page);
            continue;
        }
        let step = next.next().ok_or_else(|| ModelError::Schedule {
            t,
            detail: "exhausted on a miss".into(),
        })?;
        if step.t != t || step.fetch != page {
            return Err(ModelError::Schedule {
                t,
                detail: format!("expected a fetch of {page}, found `{step}`"),
            });
        }
        state.apply(config, step, &mut ledger)?;
    }
    if let Some(step) = next.next() {
        return Err(ModelError::Schedule {
            t: step.t,
            detail: "has entries for hits".into(),
        });
    }
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, reserves: Vec<usize>) -> ReserveConfig {
        let n = reserves.iter().map(|_| 4).collect();
        ReserveConfig::new(k, reserves, n)
    }

    fn dummies_per_agent(state: &ReservesCacheState) -> Vec<usize> {
        state.canonical_key().1
    }

    #[test]
    fn initial_state_holds_reserve_and_filler_dummies() {
        let s = ReservesCacheState::initial(&cfg(4, vec![1, 1]));
        assert_eq!(dummies_per_agent(&s), vec![2, 1, 1]);
        let s = ReservesCacheState::initial(&cfg(2, vec![0]));
        assert_eq!(dummies_per_agent(&s), vec![2, 0]);
        let s = ReservesCacheState::initial(&cfg(3, vec![1, 1, 0]));
        assert_eq!(dummies_per_agent(&s), vec![1, 1, 1, 0]);
        assert!(s.is_feasible());
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn evicting_a_filler_dummy_is_always_legal() {
        let mut s = ReservesCacheState::initial(&cfg(2, vec![1]));
        let mut ledger = CostLedger::default();
        s.apply_miss(1, Page::new(1, 1), Page::dummy(0, 0), &mut ledger)
            .unwrap();
        assert_eq!(
            s.cached,
            BTreeSet::from([Page::dummy(1, 0), Page::new(1, 1)])
        );
        assert_eq!(ledger.misses, 1);
        assert_eq!(ledger.evictions, 1);
        assert_eq!(ledger.real_evictions(), 0);
    }

    #[test]
    fn reserve_boundary_is_enforced() {
        let config = cfg(2, vec![1, 0]);
        let mut s = ReservesCacheState::initial(&config);
        let mut ledger = CostLedger::default();
        // {d1.0, d0.0} -> {1.1, d0.0} -> {1.1, 2.1}
        s.apply_miss(1, Page::new(1, 1), Page::dummy(1, 0), &mut ledger)
            .unwrap();
        s.apply_miss(2, Page::new(2, 1), Page::dummy(0, 0), &mut ledger)
            .unwrap();
        let err = s
            .apply_miss(3, Page::new(2, 2), Page::new(1, 1), &mut ledger)
            .unwrap_err();
        assert!(matches!(err, ModelError::ReserveViolation { .. }));
        // Same-agent replacement keeps the count.
        s.apply_miss(3, Page::new(1, 2), Page::new(1, 1), &mut ledger)
            .unwrap();
    }

    #[test]
    fn surplus_page_is_evictable() {
        let config = cfg(3, vec![1, 0]);
        let mut s = ReservesCacheState::initial(&config);
        let mut ledger = CostLedger::default();
        s.apply_miss(1, Page::new(1, 1), Page::dummy(1, 0), &mut ledger)
            .unwrap();
        s.apply_miss(2, Page::new(1, 2), Page::dummy(0, 0), &mut ledger)
            .unwrap();
        s.apply_miss(3, Page::new(2, 1), Page::new(1, 2), &mut ledger)
            .unwrap();
        assert_eq!(s.count(AgentId(1)), 1);
    }

    #[test]
    fn missing_victim_is_reported() {
        let mut s = ReservesCacheState::initial(&cfg(2, vec![0]));
        let mut ledger = CostLedger::default();
        let err = s
            .apply_miss(1, Page::new(1, 0), Page::new(1, 3), &mut ledger)
            .unwrap_err();
        assert_eq!(
            err,
            ModelError::NotCached {
                t: 1,
                page: Page::new(1, 3)
            }
        );
    }

    #[test]
    fn replay_reproduces_miss_count() {
        let inst = Instance::from_requests(
            2,
            vec![0],
            vec![Page::new(1, 0), Page::new(1, 1), Page::new(1, 0)],
        );
        let schedule = vec![
            Eviction {
                t: 1,
                evict: Page::dummy(0, 0),
                fetch: Page::new(1, 0),
            },
            Eviction {
                t: 2,
                evict: Page::dummy(0, 1),
                fetch: Page::new(1, 1),
            },
        ];
        let ledger = replay_reserves(&inst, &schedule).unwrap();
        assert_eq!(ledger.misses, 2);
        let bad = &schedule[..1];
        assert!(replay_reserves(&inst, bad).is_err());
    }

    #[test]
    fn schedule_lines_round_trip() {
        let e = Eviction {
            t: 7,
            evict: Page::dummy(0, 1),
            fetch: Page::new(2, 3),
        };
        assert_eq!(e.to_string(), "7 evict=d0.1 fetch=2.3");
        assert_eq!(e.to_string().parse::<Eviction>().unwrap(), e);
    }

    #[test]
    fn public_private_ownership_and_capacity() {
        let config = cfg(3, vec![1, 1]);
        let mut s = PublicPrivateCacheState::empty(&config);
        let mut ledger = CostLedger::default();
        let a = Page::new(1, 0);
        let b = Page::new(2, 0);
        let c = Page::new(1, 1);
        s.apply(
            &config,
            &PpStep {
                t: 1,
                fetch: a,
                slot: Slot::Private,
                evict: None,
                relocate: None,
            },
            &mut ledger,
        )
        .unwrap();
        s.apply(
            &config,
            &PpStep {
                t: 2,
                fetch: c,
                slot: Slot::Public,
                evict: None,
                relocate: None,
            },
            &mut ledger,
        )
        .unwrap();
        let full = s.apply(
            &config,
            &PpStep {
                t: 3,
                fetch: b,
                slot: Slot::Public,
                evict: None,
                relocate: None,
            },
            &mut ledger,
        );
        assert!(matches!(full, Err(ModelError::SlotFull { .. })));
        // Evict the private page of agent 1, relocate its public page into the freed slot.
        let mut s2 = s.clone();
        s2.apply(
            &config,
            &PpStep {
                t: 3,
                fetch: b,
                slot: Slot::Public,
                evict: Some(a),
                relocate: Some(c),
            },
            &mut ledger,
        )
        .unwrap();
        assert_eq!(s2.slot_of(&c), Some(Slot::Private));
        assert_eq!(s2.slot_of(&b), Some(Slot::Public));
        assert_eq!(ledger.relocations, 1);
        assert!(s2.is_feasible(&config));
    }
}
