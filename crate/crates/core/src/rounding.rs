//! Online rounding of the fractional algorithm.
//!
//! A probability distribution over integral cache states is kept in step
//! with the fractional solution: `Pr[p ∈ C] = 1 − x(p)` for every page. Each
//! fractional step is split into elementary moves (the requested page gains
//! `ε`, one other page loses `ε`) and each move is applied in three phases:
//!
//! 1. add `p` to `ε` mass of states lacking it and drop `q` from `ε` mass of
//!    states holding it;
//! 2. pair states of size `k − 1` with states of size `k + 1` and hand over a
//!    page the donor can spare;
//! 3. repair states one page short of an agent's reserve by swapping with a
//!    state that has a surplus for that agent.
//!
//! Every mass transfer is recorded so that a single sampled run can follow
//! the distribution without recomputing it.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fractional::{FracStep, FractionalRun};
use crate::model::{Instance, Page};

/// Sorted universe indices of the cached pages.
pub type CacheSet = Vec<u16>;

pub const DEFAULT_SUPPORT_CAP: usize = 50_000;
/// Unmatched mass below this is folded into a feasible state.
pub const FOLD_TOL: f64 = 1e-9;
/// Remaining mass below this is taken along in phase 1.
const TAKE_ALL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum RoundingError {
    #[error("t={t}: fractional step does not conserve mass (gain {gain}, loss {loss})")]
    Conservation { t: usize, gain: f64, loss: f64 },
    #[error("t={t}: {phase}: {mass:e} mass left without a matching partner")]
    MatchingInfeasible {
        t: usize,
        phase: &'static str,
        mass: f64,
    },
    #[error("support grew past {cap} states")]
    SupportCap { cap: usize },
    #[error("universe too large for the rounding state encoding")]
    Universe,
}

/// `p` gains `eps` of cache mass, `q` loses it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementaryMove {
    pub gain: usize,
    pub lose: usize,
    pub eps: f64,
}

/// Splits a fractional step into two-page moves, losers in page order.
pub fn decompose_step(step: &FracStep) -> Result<Vec<ElementaryMove>, RoundingError> {
    let mut moves = Vec::new();
    let mut loss = 0.0;
    for &(q, before, after) in &step.changes {
        if q != step.page && after > before {
            moves.push(ElementaryMove {
                gain: step.page,
                lose: q,
                eps: after - before,
            });
            loss += after - before;
        }
    }
    if (loss - step.fetched).abs() > 1e-9 {
        return Err(RoundingError::Conservation {
            t: step.t,
            gain: step.fetched,
            loss,
        });
    }
    Ok(moves)
}

/// One recorded mass transfer: `delta` of the `mass_before` on `from` moves to `to`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub from: CacheSet,
    pub to: CacheSet,
    pub delta: f64,
    pub mass_before: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MoveReport {
    pub eps: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    /// Expected evictions: `Σ δ·|C \ C′|` over the move's transfers.
    pub cost: f64,
    pub folded: f64,
}

#[derive(Clone, Debug)]
pub struct Distribution {
    pub support: BTreeMap<CacheSet, f64>,
    /// Agent of each universe page.
    owner: Vec<usize>,
    /// `reserves[i]` for agents `1..=m`; index 0 unused.
    reserves: Vec<usize>,
    pub size: usize,
    pub cap: usize,
    log: Vec<Transfer>,
    cost: f64,
}

impl Distribution {
    pub fn point(state: CacheSet, owner: Vec<usize>, reserves: Vec<usize>, cap: usize) -> Self {
        let size = state.len();
        let mut support = BTreeMap::new();
        support.insert(state, 1.0);
        Distribution {
            support,
            owner,
            reserves,
            size,
            cap,
            log: Vec::new(),
            cost: 0.0,
        }
    }

    pub fn marginals(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (s, w) in &self.support {
            for &p in s {
                out[p as usize] += w;
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.support.values().sum()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.support
            .values()
            .filter(|w| **w > 0.0)
            .map(|w| -w * w.ln())
            .sum()
    }

    fn count(&self, s: &[u16], agent: usize) -> usize {
        s.iter()
            .filter(|&&p| self.owner[p as usize] == agent)
            .count()
    }

    /// First agent whose reserve `s` misses.
    pub fn violated_agent(&self, s: &[u16]) -> Option<usize> {
        (1..self.reserves.len()).find(|&a| self.count(s, a) < self.reserves[a])
    }

    pub fn is_feasible(&self, s: &[u16]) -> bool {
        s.len() == self.size && self.violated_agent(s).is_none()
    }

    /// Whether dropping page `p` keeps `s` within its owner's reserve.
    fn spare(&self, s: &[u16], p: u16) -> bool {
        let a = self.owner[p as usize];
        self.count(s, a) > self.reserves[a]
    }

    fn transfer(&mut self, from: &CacheSet, to: CacheSet, delta: f64) {
        if delta <= 0.0 {
            return;
        }
        let mass_before = self.support.get(from).copied().unwrap_or(0.0);
        let delta = delta.min(mass_before);
        let evicted = from.iter().filter(|p| to.binary_search(p).is_err()).count();
        self.cost += delta * evicted as f64;
        if delta >= mass_before {
            self.support.remove(from);
        } else {
            *self.support.get_mut(from).expect("present") -= delta;
        }
        *self.support.entry(to.clone()).or_insert(0.0) += delta;
        self.log.push(Transfer {
            from: from.clone(),
            to,
            delta,
            mass_before,
        });
    }

    fn by_mass_desc(&self, pred: impl Fn(&CacheSet) -> bool) -> Vec<(CacheSet, f64)> {
        let mut v: Vec<(CacheSet, f64)> = self
            .support
            .iter()
            .filter(|(s, _)| pred(s))
            .map(|(s, w)| (s.clone(), *w))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Moves `eps` (or everything, if only a sliver would remain) of the
    /// states selected by `pred`, in order, through `f`.
    fn shift_mass(
        &mut self,
        eps: f64,
        candidates: Vec<(CacheSet, f64)>,
        f: impl Fn(&CacheSet) -> CacheSet,
    ) -> f64 {
        let available: f64 = candidates.iter().map(|c| c.1).sum();
        let mut left = if available - eps < TAKE_ALL_TOL {
            available
        } else {
            eps
        };
        let mut moved = 0.0;
        for (s, w) in candidates {
            if left <= 0.0 {
                break;
            }
            let take = if w <= left { w } else { left };
            self.transfer(&s, f(&s), take);
            moved += take;
            left -= take;
        }
        moved
    }

    /// Largest valid state containing `must` (if any) to absorb stray mass.
    fn sink(&self, must: Option<u16>) -> Option<CacheSet> {
        self.by_mass_desc(|s| {
            self.is_feasible(s) && must.is_none_or(|p| s.binary_search(&p).is_ok())
        })
        .into_iter()
        .next()
        .map(|(s, _)| s)
    }

    fn fold(
        &mut self,
        t: usize,
        phase: &'static str,
        stray: Vec<(CacheSet, f64)>,
        must: Option<u16>,
    ) -> Result<f64, RoundingError> {
        let mass: f64 = stray.iter().map(|s| s.1).sum();
        if mass == 0.0 {
            return Ok(0.0);
        }
        if mass >= FOLD_TOL {
            return Err(RoundingError::MatchingInfeasible { t, phase, mass });
        }
        let target = self
            .sink(must)
            .ok_or(RoundingError::MatchingInfeasible { t, phase, mass })?;
        for (s, w) in stray {
            self.transfer(&s, target.clone(), w);
        }
        Ok(mass)
    }

    /// Applies one elementary move; returns its phase bookkeeping.
    pub fn apply_move(
        &mut self,
        t: usize,
        mv: &ElementaryMove,
    ) -> Result<MoveReport, RoundingError> {
        let cost_before = self.cost;
        let mut report = MoveReport {
            eps: mv.eps,
            ..Default::default()
        };
        if mv.eps <= 0.0 {
            return Ok(report);
        }
        let (p, q) = (mv.gain as u16, mv.lose as u16);
        let k = self.size;

        // Phase 1: marginals.
        let lacking = self.by_mass_desc(|s| s.binary_search(&p).is_err());
        self.shift_mass(mv.eps, lacking, |s| insert(s, p));
        let mut holding = self.by_mass_desc(|s| s.binary_search(&q).is_ok());
        holding.sort_by_key(|(s, _)| std::cmp::Reverse(s.len()));
        self.shift_mass(mv.eps, holding, |s| remove(s, q));
        report.eps1 = self
            .support
            .iter()
            .filter(|(s, _)| s.len() + 1 == k)
            .map(|(_, w)| w)
            .sum();
        report.eps2 = self
            .support
            .iter()
            .filter(|(s, _)| self.violated_agent(s).is_some())
            .map(|(_, w)| w)
            .sum();

        // Phase 2: sizes.
        loop {
            let short = self.by_mass_desc(|s| s.len() + 1 == k);
            let long = self.by_mass_desc(|s| s.len() == k + 1);
            if short.is_empty() || long.is_empty() {
                let stray: Vec<_> = short.into_iter().chain(long).collect();
                report.folded += self.fold(t, "size repair", stray, Some(p))?;
                break;
            }
            let (r, rw) = short
                .iter()
                .find(|(s, _)| self.violated_agent(s).is_some())
                .cloned()
                .unwrap_or_else(|| short[0].clone());
            let need = self.violated_agent(&r);
            let (d, dw) = need
                .and_then(|a| {
                    long.iter()
                        .find(|(s, _)| self.count(s, a) > self.reserves[a])
                        .cloned()
                })
                .unwrap_or_else(|| long[0].clone());
            let page = self
                .pick_gift(&d, &r, need)
                .expect("a spare page outside the recipient always exists");
            let tau = rw.min(dw);
            self.transfer(&r, insert(&r, page), tau);
            self.transfer(&d, remove(&d, page), tau);
        }
        let violated_now: f64 = self
            .support
            .iter()
            .filter(|(s, _)| self.violated_agent(s).is_some())
            .map(|(_, w)| w)
            .sum();
        report.eps3 = (violated_now - report.eps2).max(0.0);

        // Phase 3: reserves.
        loop {
            let bad = self.by_mass_desc(|s| self.violated_agent(s).is_some());
            let Some((c, cw)) = bad.first().cloned() else {
                break;
            };
            let a = self.violated_agent(&c).expect("violated");
            let donor = self
                .by_mass_desc(|s| {
                    s.len() == k
                        && self.violated_agent(s).is_none()
                        && self.count(s, a) > self.reserves[a]
                })
                .into_iter()
                .next();
            let Some((d, dw)) = donor else {
                report.folded += self.fold(t, "reserve repair", bad, Some(p))?;
                break;
            };
            let give = *d
                .iter()
                .find(|&&x| self.owner[x as usize] == a && c.binary_search(&x).is_err())
                .expect("donor has a page of the short agent the state lacks");
            let grown = insert(&c, give);
            let back = *grown
                .iter()
                .find(|&&x| x != give && self.spare(&grown, x) && d.binary_search(&x).is_err())
                .expect("a spare page outside the donor always exists");
            let tau = cw.min(dw);
            self.transfer(&c, remove(&grown, back), tau);
            self.transfer(&d, insert(&remove(&d, give), back), tau);
        }

        if self.support.len() > self.cap {
            return Err(RoundingError::SupportCap { cap: self.cap });
        }
        report.cost = self.cost - cost_before;
        Ok(report)
    }

    /// Page handed from a `k + 1` donor to a `k − 1` recipient.
    fn pick_gift(
        &self,
        donor: &CacheSet,
        recipient: &CacheSet,
        need: Option<usize>,
    ) -> Option<u16> {
        let outside = |x: &&u16| recipient.binary_search(x).is_err();
        if let Some(a) = need {
            if self.count(donor, a) > self.reserves[a] {
                if let Some(&x) = donor
                    .iter()
                    .filter(outside)
                    .find(|&&x| self.owner[x as usize] == a)
                {
                    return Some(x);
                }
            }
        }
        donor
            .iter()
            .filter(outside)
            .find(|&&x| self.spare(donor, x))
            .copied()
    }

    /// Moves stray states lacking `p` into the largest state holding it.
    fn ensure_cached(&mut self, t: usize, p: u16) -> Result<f64, RoundingError> {
        let stray = self.by_mass_desc(|s| s.binary_search(&p).is_err());
        self.fold(t, "fetch", stray, Some(p))
    }

    fn take_log(&mut self) -> Vec<Transfer> {
        std::mem::take(&mut self.log)
    }
}

fn insert(s: &CacheSet, p: u16) -> CacheSet {
    let mut v = s.clone();
    if let Err(pos) = v.binary_search(&p) {
        v.insert(pos, p);
    }
    v
}

fn remove(s: &CacheSet, p: u16) -> CacheSet {
    let mut v = s.clone();
    if let Ok(pos) = v.binary_search(&p) {
        v.remove(pos);
    }
    v
}

#[derive(Clone, Debug)]
pub struct RoundStep {
    pub t: usize,
    pub page: usize,
    /// `Pr[p_t ∉ C]` before the step.
    pub expected_miss: f64,
    pub fractional_cost: f64,
    pub expected_cost: f64,
    pub moves: Vec<MoveReport>,
    pub support_size: usize,
    pub entropy: f64,
    pub max_marginal_error: f64,
    pub all_feasible: bool,
    pub transfers: Vec<Transfer>,
}

#[derive(Clone, Debug)]
pub struct RoundingRun {
    pub universe: Vec<Page>,
    pub initial: CacheSet,
    pub steps: Vec<RoundStep>,
    pub distribution: Distribution,
}

impl RoundingRun {
    pub fn expected_misses(&self) -> f64 {
        self.steps.iter().map(|s| s.expected_miss).sum()
    }

    pub fn expected_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.expected_cost).sum()
    }

    pub fn max_marginal_error(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.max_marginal_error)
            .fold(0.0, f64::max)
    }

    pub fn all_feasible(&self) -> bool {
        self.steps.iter().all(|s| s.all_feasible)
    }

    /// Largest `cost − 4ε` over all moves.
    pub fn worst_move_excess(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| &s.moves)
            .map(|m| m.cost - 4.0 * m.eps)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn run_rounding(
    instance: &Instance,
    frac: &FractionalRun,
    cap: usize,
) -> Result<RoundingRun, RoundingError> {
    let universe = frac.state.universe.clone();
    if universe.len() > u16::MAX as usize {
        return Err(RoundingError::Universe);
    }
    let owner: Vec<usize> = universe.iter().map(|p| p.agent.index()).collect();
    let mut reserves = vec![0];
    reserves.extend(&instance.config.reserves);
    let initial: CacheSet = (0..universe.len())
        .filter(|&i| frac.initial_x[i] == 0.0)
        .map(|i| i as u16)
        .collect();
    let mut dist = Distribution::point(initial.clone(), owner, reserves, cap);
    let mut x = frac.initial_x.clone();
    let n = universe.len();
    let mut steps = Vec::with_capacity(frac.steps.len());
    for fs in &frac.steps {
        let p = fs.page as u16;
        let expected_miss: f64 = dist
            .support
            .iter()
            .filter(|(s, _)| s.binary_search(&p).is_err())
            .map(|(_, w)| w)
            .sum();
        let cost_before = dist.cost;
        let mut moves = Vec::new();
        for mv in decompose_step(fs)? {
            moves.push(dist.apply_move(fs.t, &mv)?);
        }
        let folded = dist.ensure_cached(fs.t, p)?;
        if folded > 0.0 {
            moves.push(MoveReport {
                folded,
                ..Default::default()
            });
        }
        for &(q, _, after) in &fs.changes {
            x[q] = after;
        }
        let marg = dist.marginals(n);
        let max_marginal_error = (0..n)
            .map(|q| (marg[q] - (1.0 - x[q])).abs())
            .fold(0.0, f64::max);
        let all_feasible = dist
            .support
            .keys()
            .all(|s| dist.is_feasible(s) && s.binary_search(&p).is_ok());
        steps.push(RoundStep {
            t: fs.t,
            page: fs.page,
            expected_miss,
            fractional_cost: fs.cost,
            expected_cost: dist.cost - cost_before,
            moves,
            support_size: dist.support.len(),
            entropy: dist.entropy(),
            max_marginal_error,
            all_feasible,
            transfers: dist.take_log(),
        });
    }
    Ok(RoundingRun {
        universe,
        initial,
        steps,
        distribution: dist,
    })
}

/// One integral run coupled to the distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledRun {
    pub misses: u64,
    /// `Σ_t |S_t \ S_{t+1}|`.
    pub net_evictions: u64,
    /// Evictions along every followed transfer.
    pub path_evictions: u64,
    pub random_draws: u64,
    /// `(t, fetched, evicted)` per step with any change.
    pub log: Vec<(usize, Vec<Page>, Vec<Page>)>,
    pub states_feasible: bool,
}

pub fn sample_integral_run(run: &RoundingRun, seed: u64) -> SampledRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = run.initial.clone();
    let mut out = SampledRun {
        misses: 0,
        net_evictions: 0,
        path_evictions: 0,
        random_draws: 0,
        log: Vec::new(),
        states_feasible: true,
    };
    for step in &run.steps {
        let start = state.clone();
        if start.binary_search(&(step.page as u16)).is_err() {
            out.misses += 1;
        }
        for tr in &step.transfers {
            if tr.from != state {
                continue;
            }
            let follow = if tr.delta >= tr.mass_before - 1e-15 {
                true
            } else {
                out.random_draws += 1;
                rng.gen::<f64>() * tr.mass_before < tr.delta
            };
            if follow {
                out.path_evictions += state
                    .iter()
                    .filter(|p| tr.to.binary_search(p).is_err())
                    .count() as u64;
                state = tr.to.clone();
            }
        }
        let evicted: Vec<Page> = start
            .iter()
            .filter(|p| state.binary_search(p).is_err())
            .map(|&p| run.universe[p as usize])
            .collect();
        let fetched: Vec<Page> = state
            .iter()
            .filter(|p| start.binary_search(p).is_err())
            .map(|&p| run.universe[p as usize])
            .collect();
        out.net_evictions += evicted.len() as u64;
        out.states_feasible &= run.distribution.is_feasible(&state)
            && state.binary_search(&(step.page as u16)).is_ok();
        if !fetched.is_empty() || !evicted.is_empty() {
            out.log.push((step.t, fetched, evicted));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::run_fractional;
    use crate::model::{RequestTrace, ReserveConfig};

    fn dist(states: &[(&[u16], f64)], owner: Vec<usize>, reserves: Vec<usize>) -> Distribution {
        let mut d = Distribution::point(states[0].0.to_vec(), owner, reserves, DEFAULT_SUPPORT_CAP);
        d.support.clear();
        for (s, w) in states {
            d.support.insert(s.to_vec(), *w);
        }
        d
    }

    #[test]
    fn decomposition_pairs_in_page_order() {
        let step = FracStep {
            t: 3,
            page: 0,
            fetched: 1.0,
            cost: 1.0,
            alpha: 0.0,
            primal: 0.0,
            dual: 0.0,
            dual_violation: 0.0,
            changes: vec![(0, 1.0, 0.0), (1, 0.0, 0.6), (2, 0.0, 0.4)],
            segments: vec![],
        };
        let moves = decompose_step(&step).unwrap();
        assert_eq!(moves.len(), 2);
        assert_eq!((moves[0].lose, moves[1].lose), (1, 2));
        assert!((moves[0].eps - 0.6).abs() < 1e-15 && (moves[1].eps - 0.4).abs() < 1e-15);
        let hit = FracStep {
            fetched: 0.0,
            changes: vec![],
            ..step.clone()
        };
        assert!(decompose_step(&hit).unwrap().is_empty());
        let broken = FracStep {
            fetched: 0.5,
            ..step
        };
        assert!(matches!(
            decompose_step(&broken),
            Err(RoundingError::Conservation { .. })
        ));
    }

    #[test]
    fn zero_move_changes_nothing() {
        let mut d = dist(&[(&[0], 0.5), (&[1], 0.5)], vec![1, 1], vec![0, 0]);
        let before = d.support.clone();
        let r = d
            .apply_move(
                1,
                &ElementaryMove {
                    gain: 0,
                    lose: 1,
                    eps: 0.0,
                },
            )
            .unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(d.support, before);
    }

    #[test]
    fn unit_cache_two_pages() {
        let mut d = dist(&[(&[0], 0.5), (&[1], 0.5)], vec![1, 1], vec![0, 0]);
        let r = d
            .apply_move(
                1,
                &ElementaryMove {
                    gain: 0,
                    lose: 1,
                    eps: 0.5,
                },
            )
            .unwrap();
        assert_eq!(d.support.len(), 1);
        assert!((d.support[&vec![0]] - 1.0).abs() < 1e-15);
        assert!((r.cost - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reserve_violation_is_repaired() {
        // Pages 0,1 of agent 1 (reserve 1), pages 2,3 of agent 2. k = 2.
        let owner = vec![1, 1, 2, 2];
        let mut d = dist(&[(&[0, 2], 0.5), (&[0, 1], 0.5)], owner, vec![0, 1, 0]);
        // Page 3 gains 0.5, page 0 loses 0.5; agent 1 keeps mass 1 on average.
        let r = d
            .apply_move(
                1,
                &ElementaryMove {
                    gain: 3,
                    lose: 0,
                    eps: 0.5,
                },
            )
            .unwrap();
        for s in d.support.keys() {
            assert!(d.is_feasible(s), "{s:?}");
        }
        let marg = d.marginals(4);
        assert!((marg[0] - 0.5).abs() < 1e-12 && (marg[3] - 0.5).abs() < 1e-12);
        assert!(r.cost <= 4.0 * r.eps + 1e-12);
        assert!(r.eps1 <= r.eps && r.eps2 <= r.eps && r.eps3 <= r.eps1 + 1e-15);
    }

    #[test]
    fn integral_fractional_run_needs_no_randomness() {
        let config = ReserveConfig::new(1, vec![0], vec![3]);
        let trace = RequestTrace::new([1, 2, 0, 1].iter().map(|&l| Page::new(1, l)).collect());
        let inst = Instance::new(config, trace);
        let frac = run_fractional(&inst).unwrap();
        let run = run_rounding(&inst, &frac, DEFAULT_SUPPORT_CAP).unwrap();
        let s = sample_integral_run(&run, 9);
        assert_eq!(s.random_draws, 0);
        assert_eq!(s.misses, 4);
        assert!((run.expected_misses() - 4.0).abs() < 1e-12);
        assert!(s.states_feasible);
    }
}
