//! Strategy transformations between the two models.
//!
//! [`TauE`] turns a public-private strategy into a reserves strategy with the
//! same real evictions, keeping the two caches setwise equal. [`TauH`] turns a
//! reserves strategy into a public-private one with at most two evictions per
//! inner eviction. Both work one request at a time.
//!
//! Public-private state is kept canonical by [`TauH`]: an agent's pages sit in
//! public slots only while its private slots are full.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{AgentId, Instance, Page, ReserveConfig};
use crate::state::{
    CostLedger, Eviction, ModelError, PpStep, PublicPrivateCacheState, ReservesCacheState, Slot,
};

#[derive(Debug, Error, PartialEq)]
pub enum EquivError {
    #[error("inner strategy is infeasible: {0}")]
    Inner(#[from] ModelError),
    #[error("t={t}: inner step `{step}` has no reserves counterpart (it frees a private slot of another agent)")]
    NotMirrorable { t: usize, step: PpStep },
    #[error("t={t}: {detail}")]
    Internal { t: usize, detail: String },
}

fn real_pages(state: &ReservesCacheState) -> BTreeSet<Page> {
    state.cached.iter().filter(|p| !p.dummy).copied().collect()
}

/// Public-private → reserves.
#[derive(Clone, Debug)]
pub struct TauE {
    config: ReserveConfig,
    pub pp: PublicPrivateCacheState,
    pub reserves: ReservesCacheState,
    pub inner_ledger: CostLedger,
    pub ledger: CostLedger,
}

impl TauE {
    pub fn new(config: &ReserveConfig) -> Self {
        TauE {
            config: config.clone(),
            pp: PublicPrivateCacheState::empty(config),
            reserves: ReservesCacheState::initial(config),
            inner_ledger: CostLedger::default(),
            ledger: CostLedger::default(),
        }
    }

    /// Serves request `p` given the inner step (required exactly on misses).
    pub fn step(
        &mut self,
        t: usize,
        p: Page,
        inner: Option<&PpStep>,
    ) -> Result<Option<Eviction>, EquivError> {
        if self.pp.contains(&p) {
            if inner.is_some() {
                return Err(ModelError::Schedule {
                    t,
                    detail: format!("step given for hit on {p}"),
                }
                .into());
            }
            self.inner_ledger.record_hit(t, p);
            self.ledger.record_hit(t, p);
            return Ok(None);
        }
        let step = inner.ok_or(ModelError::Schedule {
            t,
            detail: format!("no step for miss on {p}"),
        })?;
        if step.t != t || step.fetch != p {
            return Err(ModelError::Schedule {
                t,
                detail: format!("expected a fetch of {p}, found `{step}`"),
            }
            .into());
        }
        self.pp.apply(&self.config, step, &mut self.inner_ledger)?;
        let victim = match step.evict {
            Some(q) => q,
            None => self
                .dummy_for(step)
                .ok_or(EquivError::NotMirrorable { t, step: *step })?,
        };
        if !self.reserves.can_evict_for(&victim, &p) {
            return Err(EquivError::NotMirrorable { t, step: *step });
        }
        self.reserves.apply_miss(t, p, victim, &mut self.ledger)?;
        if real_pages(&self.reserves) != self.pp.pages() {
            return Err(EquivError::Internal {
                t,
                detail: "caches differ setwise".into(),
            });
        }
        Ok(Some(Eviction {
            t,
            evict: victim,
            fetch: p,
        }))
    }

    /// Dummy standing for the slot the inner step filled.
    fn dummy_for(&self, step: &PpStep) -> Option<Page> {
        let owner = match (step.relocate, step.slot) {
            (Some(r), _) => r.agent,
            (None, Slot::Private) => step.fetch.agent,
            (None, Slot::Public) => AgentId::FILLER,
        };
        let dummies = || self.reserves.cached.iter().filter(|q| q.dummy);
        dummies()
            .find(|q| q.agent == owner)
            .or_else(|| dummies().find(|q| self.reserves.can_evict_for(q, &step.fetch)))
            .copied()
    }
}

/// Reserves → public-private.
#[derive(Clone, Debug)]
pub struct TauH {
    config: ReserveConfig,
    pub pp: PublicPrivateCacheState,
    pub reserves: ReservesCacheState,
    pub inner_ledger: CostLedger,
    pub ledger: CostLedger,
}

impl TauH {
    pub fn new(config: &ReserveConfig) -> Self {
        TauH {
            config: config.clone(),
            pp: PublicPrivateCacheState::empty(config),
            reserves: ReservesCacheState::initial(config),
            inner_ledger: CostLedger::default(),
            ledger: CostLedger::default(),
        }
    }

    /// Serves request `p` given the inner victim (required exactly on misses).
    pub fn step(
        &mut self,
        t: usize,
        p: Page,
        inner_evict: Option<Page>,
    ) -> Result<Option<PpStep>, EquivError> {
        if self.reserves.contains(&p) {
            if inner_evict.is_some() {
                return Err(ModelError::Schedule {
                    t,
                    detail: format!("eviction given for hit on {p}"),
                }
                .into());
            }
            self.inner_ledger.record_hit(t, p);
            if !self.pp.contains(&p) {
                return Err(EquivError::Internal {
                    t,
                    detail: format!("{p} cached only in the reserves model"),
                });
            }
            self.ledger.record_hit(t, p);
            return Ok(None);
        }
        let v = inner_evict.ok_or(ModelError::Schedule {
            t,
            detail: format!("no eviction for miss on {p}"),
        })?;
        self.reserves.apply_miss(t, p, v, &mut self.inner_ledger)?;

        let a = p.agent;
        let mut step = PpStep {
            t,
            fetch: p,
            slot: Slot::Public,
            evict: None,
            relocate: None,
        };
        if !v.dummy {
            step.evict = Some(v);
            if self.pp.slot_of(&v) == Some(Slot::Private) && v.agent != a {
                step.relocate = self
                    .pp
                    .public
                    .iter()
                    .filter(|q| q.agent == v.agent)
                    .min_by_key(|q| q.local)
                    .copied();
            }
        }
        let freed_private = step
            .evict
            .filter(|e| self.pp.slot_of(e) == Some(Slot::Private) && e.agent == a)
            .is_some();
        step.slot = if freed_private || self.pp.free_private(&self.config, a) > 0 {
            Slot::Private
        } else {
            Slot::Public
        };
        self.pp
            .apply(&self.config, &step, &mut self.ledger)
            .map_err(|e| EquivError::Internal {
                t,
                detail: format!("translated step `{step}` is infeasible: {e}"),
            })?;
        if !self.pp.pages().is_subset(&real_pages(&self.reserves)) {
            return Err(EquivError::Internal {
                t,
                detail: "public-private cache holds a page the inner run evicted".into(),
            });
        }
        Ok(Some(step))
    }
}

#[derive(Clone, Debug)]
pub struct TauERun {
    pub schedule: Vec<Eviction>,
    pub inner: CostLedger,
    pub ledger: CostLedger,
}

impl TauERun {
    /// Real evictions plus relocations of the inner run.
    pub fn inner_evictions(&self) -> u64 {
        self.inner.evictions + self.inner.relocations
    }

    pub fn evictions(&self) -> u64 {
        self.ledger.real_evictions()
    }
}

pub fn adapt_pp_to_reserves(instance: &Instance, inner: &[PpStep]) -> Result<TauERun, EquivError> {
    let mut tau = TauE::new(&instance.config);
    let mut steps = inner.iter().peekable();
    let mut schedule = Vec::new();
    for (idx, &p) in instance.trace.requests.iter().enumerate() {
        let t = idx + 1;
        let step = if tau.pp.contains(&p) {
            None
        } else {
            steps.next()
        };
        schedule.extend(tau.step(t, p, step)?);
    }
    if let Some(s) = steps.next() {
        return Err(ModelError::Schedule {
            t: s.t,
            detail: "has entries for hits".into(),
        }
        .into());
    }
    Ok(TauERun {
        schedule,
        inner: tau.inner_ledger,
        ledger: tau.ledger,
    })
}

#[derive(Clone, Debug)]
pub struct TauHRun {
    pub steps: Vec<PpStep>,
    pub inner: CostLedger,
    pub ledger: CostLedger,
}

impl TauHRun {
    /// Real evictions of the inner run.
    pub fn inner_evictions(&self) -> u64 {
        self.inner.real_evictions()
    }

    /// Evictions plus relocations (each relocation is charged as an eviction).
    pub fn evictions(&self) -> u64 {
        self.ledger.evictions + self.ledger.relocations
    }

    /// Largest number of extra evictions in a single step.
    pub fn max_extra_per_step(&self) -> u64 {
        self.steps
            .iter()
            .map(|s| s.relocate.is_some() as u64)
            .max()
            .unwrap_or(0)
    }
}

pub fn adapt_reserves_to_pp(
    instance: &Instance,
    inner: &[Eviction],
) -> Result<TauHRun, EquivError> {
    let mut tau = TauH::new(&instance.config);
    let mut evs = inner.iter();
    let mut steps = Vec::new();
    for (idx, &p) in instance.trace.requests.iter().enumerate() {
        let t = idx + 1;
        let evict = if tau.reserves.contains(&p) {
            None
        } else {
            let ev = evs.next().ok_or(ModelError::Schedule {
                t,
                detail: "exhausted on a miss".into(),
            })?;
            if ev.t != t || ev.fetch != p {
                return Err(ModelError::Schedule {
                    t,
                    detail: format!("expected a fetch of {p}, found `{ev}`"),
                }
                .into());
            }
            Some(ev.evict)
        };
        steps.extend(tau.step(t, p, evict)?);
    }
    if let Some(ev) = evs.next() {
        return Err(ModelError::Schedule {
            t: ev.t,
            detail: "has entries for hits".into(),
        }
        .into());
    }
    Ok(TauHRun {
        steps,
        inner: tau.inner_ledger,
        ledger: tau.ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{replay_pp, replay_reserves};

    fn pages(v: &[(u32, u32)]) -> Vec<Page> {
        v.iter().map(|&(a, l)| Page::new(a, l)).collect()
    }

    #[test]
    fn cross_agent_case_costs_two_evictions() {
        // k = 3, k_1 = 1, k_2 = 1, one public slot.
        let inst = Instance::from_requests(3, vec![1, 1], pages(&[(1, 0), (1, 1), (2, 0), (2, 1)]));
        let d = |a, l| Page::dummy(a, l);
        let inner = vec![
            Eviction {
                t: 1,
                evict: d(1, 0),
                fetch: Page::new(1, 0),
            },
            Eviction {
                t: 2,
                evict: d(0, 0),
                fetch: Page::new(1, 1),
            },
            Eviction {
                t: 3,
                evict: d(2, 0),
                fetch: Page::new(2, 0),
            },
            // Agent 1 has two pages; one sits in the private slot.
            Eviction {
                t: 4,
                evict: Page::new(1, 0),
                fetch: Page::new(2, 1),
            },
        ];
        let run = adapt_reserves_to_pp(&inst, &inner).unwrap();
        let last = run.steps.last().unwrap();
        assert_eq!(last.evict, Some(Page::new(1, 0)));
        assert_eq!(last.relocate, Some(Page::new(1, 1)));
        assert_eq!(run.evictions(), 2);
        assert_eq!(run.inner_evictions(), 1);
        assert_eq!(replay_pp(&inst, &run.steps).unwrap(), run.ledger);
    }

    #[test]
    fn public_evictions_translate_one_to_one() {
        let inst = Instance::from_requests(2, vec![0], pages(&[(1, 0), (1, 1), (1, 2), (1, 0)]));
        let d = |l| Page::dummy(0, l);
        let inner = vec![
            Eviction {
                t: 1,
                evict: d(0),
                fetch: Page::new(1, 0),
            },
            Eviction {
                t: 2,
                evict: d(1),
                fetch: Page::new(1, 1),
            },
            Eviction {
                t: 3,
                evict: Page::new(1, 1),
                fetch: Page::new(1, 2),
            },
        ];
        let run = adapt_reserves_to_pp(&inst, &inner).unwrap();
        assert_eq!(run.evictions(), run.inner_evictions());
        assert_eq!(run.max_extra_per_step(), 0);
    }

    #[test]
    fn tau_e_keeps_caches_equal_and_evictions_exact() {
        let inst = Instance::from_requests(
            3,
            vec![1, 1],
            pages(&[(1, 0), (2, 0), (1, 1), (2, 1), (1, 0), (2, 0)]),
        );
        let inner = crate::policies::run_random_pp(&inst, 11).unwrap();
        let run = adapt_pp_to_reserves(&inst, &inner.steps).unwrap();
        assert_eq!(run.evictions(), run.inner.evictions);
        assert_eq!(replay_reserves(&inst, &run.schedule).unwrap(), run.ledger);
        assert_eq!(run.ledger.misses, run.inner.misses);
    }

    #[test]
    fn no_evictions_in_gives_none_out() {
        let inst = Instance::from_requests(3, vec![1], pages(&[(1, 0), (1, 1), (1, 0)]));
        let inner = crate::policies::run_random_pp(&inst, 0).unwrap();
        assert_eq!(inner.ledger.evictions, 0);
        assert_eq!(
            adapt_pp_to_reserves(&inst, &inner.steps)
                .unwrap()
                .evictions(),
            0
        );
    }
}
