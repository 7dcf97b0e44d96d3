//! Exact optima for small instances by memoised search.
//!
//! Both solvers search over `(t, cache state)` with a remaining-cold-miss
//! lower bound: once a child reaches the bound for its parent, no sibling can
//! do better and branching stops. Interchangeable dummies are collapsed into
//! per-agent counts.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{AgentId, Instance, Page};
use crate::state::{
    replay_pp, replay_reserves, CostLedger, Eviction, ModelError, PpStep, ReservesCacheState, Slot,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_pages: usize,
    pub max_k: usize,
    pub max_len: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_pages: 9,
            max_k: 5,
            max_len: 14,
        }
    }
}

impl OracleLimits {
    pub const ENV: &'static str = "RCACHE_ORACLE_LIMITS";

    /// Parses `pages=9,k=5,len=14` (any subset, any order) on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut limits = OracleLimits::default();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, found `{part}`"))?;
            let val: usize = val
                .trim()
                .parse()
                .map_err(|_| format!("bad number in `{part}`"))?;
            match key.trim() {
                "pages" => limits.max_pages = val,
                "k" => limits.max_k = val,
                "len" => limits.max_len = val,
                other => return Err(format!("unknown limit `{other}`")),
            }
        }
        Ok(limits)
    }

    /// Defaults overridden by the environment variable, if set and valid.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(Self::ENV) {
            Ok(text) => Self::parse(&text),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn admits(&self, instance: &Instance) -> bool {
        self.check(instance).is_ok()
    }

    fn check(&self, instance: &Instance) -> Result<(), OracleError> {
        let pages = instance.trace.distinct_pages().len();
        let c = &instance.config;
        if pages > self.max_pages || c.k > self.max_k || instance.trace.len() > self.max_len {
            return Err(OracleError::LimitsExceeded {
                pages,
                k: c.k,
                len: instance.trace.len(),
                limits: *self,
            });
        }
        // Representation caps: page bitmasks and packed dummy counters.
        if pages > 32 || c.m() + 1 > 16 || c.k > 15 || instance.trace.len() > 255 {
            return Err(OracleError::LimitsExceeded {
                pages,
                k: c.k,
                len: instance.trace.len(),
                limits: *self,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large for the exact solver ({pages} pages, k={k}, T={len}; limits {}/{}/{})", limits.max_pages, limits.max_k, limits.max_len)]
    LimitsExceeded {
        pages: usize,
        k: usize,
        len: usize,
        limits: OracleLimits,
    },
    #[error("invalid instance: {0}")]
    Infeasible(String),
    #[error("witness replay failed: {0}")]
    Witness(#[from] ModelError),
}

/// Trace pages renumbered densely, with suffix masks of pages still needed.
struct Compact {
    pages: Vec<Page>,
    req: Vec<usize>,
    /// `needed[t]` = pages requested at 0-based positions `>= t`.
    needed: Vec<u32>,
    /// `next[t]` = next 0-based position of the page requested at `t`.
    next_use: Vec<Vec<usize>>,
}

impl Compact {
    fn new(instance: &Instance) -> Self {
        let pages: Vec<Page> = instance.trace.distinct_pages().into_iter().collect();
        let index: HashMap<Page, usize> = pages.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let req: Vec<usize> = instance.trace.requests.iter().map(|p| index[p]).collect();
        let len = req.len();
        let mut needed = vec![0u32; len + 1];
        for t in (0..len).rev() {
            needed[t] = needed[t + 1] | (1 << req[t]);
        }
        // next_use[t][x]: first position >= t requesting page x (len if none).
        let mut next_use = vec![vec![len; pages.len()]; len + 1];
        for t in (0..len).rev() {
            next_use[t] = next_use[t + 1].clone();
            next_use[t][req[t]] = t;
        }
        Compact {
            pages,
            req,
            needed,
            next_use,
        }
    }

    fn lower_bound(&self, t: usize, cached: u32) -> u32 {
        (self.needed[t] & !cached).count_ones()
    }
}

fn validate(instance: &Instance, limits: &OracleLimits) -> Result<(), OracleError> {
    let report = instance.validate();
    if !report.is_ok() {
        return Err(OracleError::Infeasible(report.to_string()));
    }
    limits.check(instance)
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub misses: u64,
    pub schedule: Vec<Eviction>,
    pub ledger: CostLedger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Victim {
    Real(u8),
    Dummy(u8),
}

struct ReservesSearch<'a> {
    c: &'a Compact,
    owner: Vec<u8>,
    reserves: Vec<u8>,
    memo: HashMap<(u8, u32, u64), (u32, Option<Victim>)>,
}

fn dummy_count(d: u64, agent: usize) -> u64 {
    (d >> (4 * agent)) & 0xf
}

impl ReservesSearch<'_> {
    fn agent_count(&self, cached: u32, dummies: u64, agent: usize) -> u64 {
        let real = (0..self.c.pages.len())
            .filter(|&x| cached >> x & 1 == 1 && self.owner[x] as usize == agent)
            .count();
        real as u64 + dummy_count(dummies, agent)
    }

    fn solve(&mut self, t: usize, cached: u32, dummies: u64) -> u32 {
        let len = self.c.req.len();
        let mut t = t;
        while t < len && cached >> self.c.req[t] & 1 == 1 {
            t += 1;
        }
        if t == len {
            return 0;
        }
        let key = (t as u8, cached, dummies);
        if let Some(&(v, _)) = self.memo.get(&key) {
            return v;
        }
        let p = self.c.req[t];
        let pa = self.owner[p] as usize;
        let with_p = cached | 1 << p;
        let floor = self.c.lower_bound(t + 1, with_p);

        let mut candidates: Vec<(usize, Victim)> = Vec::new();
        for agent in 0..self.reserves.len() {
            if dummy_count(dummies, agent) > 0
                && (agent == pa
                    || self.agent_count(cached, dummies, agent) > self.reserves[agent] as u64)
            {
                candidates.push((usize::MAX, Victim::Dummy(agent as u8)));
            }
        }
        for x in 0..self.c.pages.len() {
            if cached >> x & 1 == 1 {
                let agent = self.owner[x] as usize;
                if agent == pa
                    || self.agent_count(cached, dummies, agent) > self.reserves[agent] as u64
                {
                    candidates.push((self.c.next_use[t + 1][x], Victim::Real(x as u8)));
                }
            }
        }
        // Farthest next use first: the lower bound is then usually met at once.
        candidates.sort_by_key(|c| std::cmp::Reverse(c.0));

        let mut best = (u32::MAX, None);
        for (_, victim) in candidates {
            let (c2, d2) = match victim {
                Victim::Real(x) => (with_p & !(1 << x), dummies),
                Victim::Dummy(a) => (with_p, dummies - (1 << (4 * a as u64))),
            };
            let v = self.solve(t + 1, c2, d2);
            if v < best.0 {
                best = (v, Some(victim));
                if v == floor {
                    break;
                }
            }
        }
        let value = best.0 + 1;
        self.memo.insert(key, (value, best.1));
        value
    }
}

/// Minimum number of misses in the caching-with-reserves model, with a witness schedule.
pub fn solve_reserves_opt(
    instance: &Instance,
    limits: &OracleLimits,
) -> Result<OracleSolution, OracleError> {
    validate(instance, limits)?;
    let c = Compact::new(instance);
    let config = &instance.config;
    let owner: Vec<u8> = c.pages.iter().map(|p| p.agent.0 as u8).collect();
    let mut reserves = vec![0u8];
    reserves.extend(config.reserves.iter().map(|&r| r as u8));
    let mut dummies = 0u64;
    for a in 0..=config.m() {
        let n = if a == 0 {
            config.k0()
        } else {
            config.reserves[a - 1]
        } as u64;
        dummies |= n << (4 * a);
    }
    let mut search = ReservesSearch {
        c: &c,
        owner,
        reserves,
        memo: HashMap::new(),
    };
    let misses = search.solve(0, 0, dummies);

    // Witness: follow the stored choices from the start state.
    let mut schedule = Vec::new();
    let mut state = ReservesCacheState::initial(config);
    let (mut cached, mut d) = (0u32, dummies);
    for t in 0..c.req.len() {
        let p = c.req[t];
        if cached >> p & 1 == 1 {
            continue;
        }
        let victim = search
            .memo
            .get(&(t as u8, cached, d))
            .and_then(|e| e.1)
            .expect("memo covers the optimal path");
        let page = c.pages[p];
        let evict = match victim {
            Victim::Real(x) => {
                cached &= !(1 << x);
                c.pages[x as usize]
            }
            Victim::Dummy(a) => {
                d -= 1 << (4 * a as u64);
                *state
                    .cached
                    .iter()
                    .rev()
                    .find(|q| q.dummy && q.agent == AgentId(a as u32))
                    .expect("dummy count matches the concrete state")
            }
        };
        cached |= 1 << p;
        let mut scratch = CostLedger::default();
        state.apply_miss(t + 1, page, evict, &mut scratch)?;
        schedule.push(Eviction {
            t: t + 1,
            evict,
            fetch: page,
        });
    }
    let ledger = replay_reserves(instance, &schedule)?;
    debug_assert_eq!(ledger.misses, misses as u64);
    Ok(OracleSolution {
        misses: misses as u64,
        schedule,
        ledger,
    })
}

/// Public-private optimum: cost is misses plus relocations.
#[derive(Clone, Debug)]
pub struct PpOracleSolution {
    pub cost: u64,
    pub misses: u64,
    pub relocations: u64,
    /// Optimum over strategies that never relocate a cached page.
    pub lazy_cost: u64,
    pub steps: Vec<PpStep>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum PpAction {
    /// Place into a free slot.
    Fill(Slot),
    /// Evict a page and reuse its slot.
    Replace(u8, Slot),
    /// Evict a private page of some agent, move a public page of that agent into it.
    EvictRelocate(u8, u8),
    /// Move a public page into a free private slot of its owner.
    Relocate(u8),
}

struct PpSearch<'a> {
    c: &'a Compact,
    owner: Vec<u8>,
    reserves: Vec<usize>,
    k0: usize,
    allow_relocation: bool,
    memo: HashMap<(u8, u32, u32), (u32, Option<PpAction>)>,
}

impl PpSearch<'_> {
    fn private_count(&self, private: u32, agent: usize) -> usize {
        (0..self.c.pages.len())
            .filter(|&x| private >> x & 1 == 1 && self.owner[x] as usize == agent)
            .count()
    }

    fn actions(&self, t: usize, private: u32, public: u32) -> Vec<PpAction> {
        let p = self.c.req[t];
        let pa = self.owner[p] as usize;
        let n = self.c.pages.len();
        let free_private = |a: usize| self.reserves[a] - self.private_count(private, a);
        let public_free = self.k0 - public.count_ones() as usize;
        let mut out = Vec::new();
        if free_private(pa) > 0 {
            out.push(PpAction::Fill(Slot::Private));
        }
        if public_free > 0 {
            out.push(PpAction::Fill(Slot::Public));
        }
        for x in 0..n {
            if private >> x & 1 == 1 && self.owner[x] as usize == pa {
                out.push(PpAction::Replace(x as u8, Slot::Private));
            }
            if public >> x & 1 == 1 {
                out.push(PpAction::Replace(x as u8, Slot::Public));
            }
        }
        if self.allow_relocation {
            for y in 0..n {
                if public >> y & 1 == 0 {
                    continue;
                }
                let a = self.owner[y] as usize;
                if free_private(a) > 0 {
                    out.push(PpAction::Relocate(y as u8));
                }
                for x in 0..n {
                    if private >> x & 1 == 1 && self.owner[x] as usize == a {
                        out.push(PpAction::EvictRelocate(x as u8, y as u8));
                    }
                }
            }
        }
        out
    }

    fn apply(&self, t: usize, private: u32, public: u32, action: PpAction) -> (u32, u32, u32) {
        let p = 1u32 << self.c.req[t];
        match action {
            PpAction::Fill(Slot::Private) => (private | p, public, 0),
            PpAction::Fill(Slot::Public) => (private, public | p, 0),
            PpAction::Replace(x, Slot::Private) => (private & !(1 << x) | p, public, 0),
            PpAction::Replace(x, Slot::Public) => (private, public & !(1 << x) | p, 0),
            PpAction::EvictRelocate(x, y) => {
                (private & !(1 << x) | 1 << y, public & !(1 << y) | p, 1)
            }
            PpAction::Relocate(y) => (private | 1 << y, public & !(1 << y) | p, 1),
        }
    }

    fn solve(&mut self, t: usize, private: u32, public: u32) -> u32 {
        let len = self.c.req.len();
        let mut t = t;
        while t < len && (private | public) >> self.c.req[t] & 1 == 1 {
            t += 1;
        }
        if t == len {
            return 0;
        }
        let key = (t as u8, private, public);
        if let Some(&(v, _)) = self.memo.get(&key) {
            return v;
        }
        let floor = self
            .c
            .lower_bound(t + 1, private | public | 1 << self.c.req[t]);
        let mut actions = self.actions(t, private, public);
        let next = &self.c.next_use[t + 1];
        let dead_score = |a: &PpAction| match *a {
            PpAction::Fill(_) => usize::MAX,
            PpAction::Replace(x, _) => next[x as usize],
            PpAction::EvictRelocate(x, _) => next[x as usize].saturating_sub(1),
            PpAction::Relocate(_) => usize::MAX - 1,
        };
        actions.sort_by_key(|a| std::cmp::Reverse(dead_score(a)));
        let mut best = (u32::MAX, None);
        for action in actions {
            let (pr, pu, extra) = self.apply(t, private, public, action);
            let v = self.solve(t + 1, pr, pu) + extra;
            if v < best.0 {
                best = (v, Some(action));
                if v == floor {
                    break;
                }
            }
        }
        let value = best.0 + 1;
        self.memo.insert(key, (value, best.1));
        value
    }

    fn witness(&self, instance: &Instance) -> Vec<PpStep> {
        let mut steps = Vec::new();
        let (mut private, mut public) = (0u32, 0u32);
        for t in 0..self.c.req.len() {
            let p = self.c.req[t];
            if (private | public) >> p & 1 == 1 {
                continue;
            }
            let action = self
                .memo
                .get(&(t as u8, private, public))
                .and_then(|e| e.1)
                .expect("memo covers the optimal path");
            let page = |x: u8| self.c.pages[x as usize];
            let fetch = instance.trace.requests[t];
            let step = match action {
                PpAction::Fill(slot) => PpStep {
                    t: t + 1,
                    fetch,
                    slot,
                    evict: None,
                    relocate: None,
                },
                PpAction::Replace(x, slot) => PpStep {
                    t: t + 1,
                    fetch,
                    slot,
                    evict: Some(page(x)),
                    relocate: None,
                },
                PpAction::EvictRelocate(x, y) => PpStep {
                    t: t + 1,
                    fetch,
                    slot: Slot::Public,
                    evict: Some(page(x)),
                    relocate: Some(page(y)),
                },
                PpAction::Relocate(y) => PpStep {
                    t: t + 1,
                    fetch,
                    slot: Slot::Public,
                    evict: None,
                    relocate: Some(page(y)),
                },
            };
            (private, public, _) = self.apply(t, private, public, action);
            steps.push(step);
        }
        steps
    }
}

pub fn solve_pp_opt(
    instance: &Instance,
    limits: &OracleLimits,
) -> Result<PpOracleSolution, OracleError> {
    validate(instance, limits)?;
    let c = Compact::new(instance);
    let config = &instance.config;
    let owner: Vec<u8> = c.pages.iter().map(|p| p.agent.0 as u8).collect();
    let mut reserves = vec![0usize];
    reserves.extend(&config.reserves);
    let mut search = PpSearch {
        c: &c,
        owner,
        reserves,
        k0: config.k0(),
        allow_relocation: true,
        memo: HashMap::new(),
    };
    let cost = search.solve(0, 0, 0);
    let steps = search.witness(instance);
    search.allow_relocation = false;
    search.memo.clear();
    let lazy_cost = search.solve(0, 0, 0);

    let ledger = replay_pp(instance, &steps)?;
    debug_assert_eq!(ledger.pp_cost(), cost as u64);
    Ok(PpOracleSolution {
        cost: cost as u64,
        misses: ledger.misses,
        relocations: ledger.relocations,
        lazy_cost: lazy_cost as u64,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pages(ids: &[(u32, u32)]) -> Vec<Page> {
        ids.iter().map(|&(a, l)| Page::new(a, l)).collect()
    }

    fn belady(k: usize, reqs: &[Page]) -> u64 {
        let mut cache: Vec<Page> = Vec::new();
        let mut misses = 0;
        for (t, p) in reqs.iter().enumerate() {
            if cache.contains(p) {
                continue;
            }
            misses += 1;
            if cache.len() == k {
                let next = |q: &Page| {
                    reqs[t + 1..]
                        .iter()
                        .position(|r| r == q)
                        .unwrap_or(usize::MAX)
                };
                let victim = (0..cache.len()).max_by_key(|&i| next(&cache[i])).unwrap();
                cache.remove(victim);
            }
            cache.push(*p);
        }
        misses
    }

    #[test]
    fn distinct_requests_cost_their_count() {
        let inst = Instance::from_requests(
            3,
            vec![1, 0],
            pages(&[(1, 0), (2, 0), (1, 1), (2, 1), (1, 2)]),
        );
        let lim = OracleLimits::default();
        assert_eq!(solve_reserves_opt(&inst, &lim).unwrap().misses, 5);
        assert_eq!(solve_pp_opt(&inst, &lim).unwrap().cost, 5);
    }

    #[test]
    fn classical_case_matches_farthest_in_future() {
        let reqs = pages(&[
            (1, 0),
            (1, 1),
            (1, 2),
            (1, 0),
            (1, 3),
            (1, 1),
            (1, 2),
            (1, 0),
            (1, 3),
            (1, 1),
        ]);
        let inst = Instance::from_requests(3, vec![0], reqs.clone());
        let sol = solve_reserves_opt(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(sol.misses, belady(3, &reqs));
        assert_eq!(
            solve_pp_opt(&inst, &OracleLimits::default()).unwrap().cost,
            sol.misses
        );
    }

    #[test]
    fn large_cache_only_cold_misses() {
        let reqs = pages(&[(1, 0), (2, 0), (1, 0), (2, 1), (2, 0), (1, 0)]);
        let inst = Instance::from_requests(5, vec![1, 1], reqs);
        assert_eq!(
            solve_reserves_opt(&inst, &OracleLimits::default())
                .unwrap()
                .misses,
            3
        );
    }

    #[test]
    fn reserve_forces_extra_misses() {
        // k = 2, agent 1 reserves a slot: agent 2 alternating over two pages misses every time.
        let reqs = pages(&[(1, 0), (2, 0), (2, 1), (2, 0), (2, 1)]);
        let inst = Instance::from_requests(2, vec![1, 0], reqs);
        let sol = solve_reserves_opt(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(sol.misses, 5);
        assert_eq!(replay_reserves(&inst, &sol.schedule).unwrap().misses, 5);
    }

    #[test]
    fn limits_are_enforced() {
        let reqs: Vec<Page> = (0..10).map(|l| Page::new(1, l)).collect();
        let inst = Instance::from_requests(2, vec![0], reqs);
        assert!(matches!(
            solve_reserves_opt(&inst, &OracleLimits::default()),
            Err(OracleError::LimitsExceeded { .. })
        ));
        let lim = OracleLimits::parse("pages=10, len=20").unwrap();
        assert_eq!(solve_reserves_opt(&inst, &lim).unwrap().misses, 10);
        assert!(OracleLimits::parse("depth=3").is_err());
    }

    #[test]
    fn public_private_relocation_pays_off() {
        // k = 2, k_1 = 1: a1 lands in public, then a relocation saves a later miss.
        let reqs = pages(&[(1, 0), (1, 1), (2, 0), (1, 0), (1, 1)]);
        let inst = Instance::from_requests(2, vec![1, 0], reqs);
        let lim = OracleLimits::default();
        let pp = solve_pp_opt(&inst, &lim).unwrap();
        let res = solve_reserves_opt(&inst, &lim).unwrap();
        assert!(res.misses <= pp.cost && pp.cost <= 2 * res.misses);
        assert!(pp.cost <= pp.lazy_cost);
        assert_eq!(replay_pp(&inst, &pp.steps).unwrap().pp_cost(), pp.cost);
    }
}
