//! Online primal-dual fractional algorithm.
//!
//! `x(p)` is the evicted fraction of page `p` in its current request
//! interval. On a request the page is fetched (`x(p_t) = 0`) and the dual
//! variable `α` grows until at least `n − k` mass of the other pages is out
//! of the cache. While `α` grows, pages of agents sitting exactly at their
//! reserve are frozen (their `β` grows), fully evicted pages route growth
//! into `γ`, and every other page follows `dx = (x + η) dα`, `η = 1/k`.
//!
//! The continuous growth is integrated exactly: between events every growing
//! page satisfies `x(s) = (x₀ + η)eˢ − η`, and the next event (a page hits 1,
//! an agent becomes tight, the covering constraint is met) has a closed form.

#![allow(clippy::needless_range_loop)]

use thiserror::Error;

use crate::model::{Instance, Page, ReserveConfig};

/// Tolerance for "agent is at its reserve".
pub const TIGHT_TOL: f64 = 1e-9;
/// Growing pages this close to 1 are treated as fully evicted.
pub const SATURATION_SNAP: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum FractionalError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("agent {agent} owns {owned} pages but reserves {reserve}; the LP needs n_i >= k_i")]
    ReserveExceedsUniverse {
        agent: u32,
        owned: usize,
        reserve: usize,
    },
    #[error("t={t}: covering constraint violated by {deficit:e} with nothing left to grow")]
    Unsatisfiable { t: usize, deficit: f64 },
    #[error("t={t}: event root not bracketed ({what})")]
    Convergence { t: usize, what: &'static str },
}

/// What ended a growth segment.
#[derive(Clone, Debug, PartialEq)]
pub enum GrowthEvent {
    /// Page (universe index) reached `x = 1`.
    Saturated(usize),
    /// Agent reached its reserve.
    Tight(u32),
    /// The covering constraint holds.
    Covered,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub d_alpha: f64,
    pub events: Vec<GrowthEvent>,
    pub growing: usize,
    pub k_prime: usize,
}

/// One processed request.
#[derive(Clone, Debug, PartialEq)]
pub struct FracStep {
    pub t: usize,
    pub page: usize,
    /// Old `x(p_t)`: the fraction fetched.
    pub fetched: f64,
    /// Total growth of the other pages.
    pub cost: f64,
    pub alpha: f64,
    pub primal: f64,
    pub dual: f64,
    /// Largest dual-constraint left-hand side over all intervals so far.
    pub dual_violation: f64,
    /// `(page, x before, x after)` for every page whose value changed.
    pub changes: Vec<(usize, f64, f64)>,
    pub segments: Vec<Segment>,
}

impl FracStep {
    pub fn log_line(&self) -> String {
        format!(
            "{} cost={:.9} alpha={:.9} primal={:.9} dual={:.9} dualviol={:.9}",
            self.t, self.cost, self.alpha, self.primal, self.dual, self.dual_violation
        )
    }
}

/// Primal and dual state of the fractional algorithm.
#[derive(Clone, Debug)]
pub struct FractionalState {
    pub config: ReserveConfig,
    pub universe: Vec<Page>,
    /// Agent (1-based) of each universe page.
    owner: Vec<usize>,
    pub x: Vec<f64>,
    /// Number of requests to each page so far (the current interval index).
    pub interval: Vec<usize>,
    /// Final `x` of each closed interval, per page.
    pub history: Vec<Vec<f64>>,
    /// Dual left-hand side accumulated over the current interval, per page.
    lhs: Vec<f64>,
    pub eta: f64,
    pub primal: f64,
    pub dual: f64,
    pub max_dual_violation: f64,
    pub t: usize,
}

/// Invariant checks collected while running.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FractionalAudit {
    /// Worst `primal − 2·dual` over step boundaries.
    pub worst_ratio_gap: f64,
    pub worst_dual_violation: f64,
    /// Worst shortfall of `Σ_{p≠p_t} x ≥ n − k`.
    pub worst_cover_deficit: f64,
    /// Worst excess of `Σ_{U(i), p≠p_t} x ≤ n_i − k_i`.
    pub worst_reserve_excess: f64,
    /// Segments in which fewer than `k′` pages were growing.
    pub small_growth_sets: usize,
    pub monotonicity_breaks: usize,
}

impl FractionalAudit {
    pub fn ratio_holds(&self) -> bool {
        self.worst_ratio_gap <= 1e-6
    }

    pub fn dual_violation_bound(k: usize) -> f64 {
        ((k + 1) as f64).ln() + 1e-6
    }

    pub fn holds(&self, k: usize) -> bool {
        self.ratio_holds()
            && self.worst_dual_violation <= Self::dual_violation_bound(k)
            && self.worst_cover_deficit <= 1e-9
            && self.worst_reserve_excess <= 1e-9
            && self.small_growth_sets == 0
            && self.monotonicity_breaks == 0
    }
}

impl FractionalState {
    /// Starts from a feasible integral cache: the `k_i` lowest pages of each
    /// agent, then the lowest-indexed remaining pages up to `k`.
    pub fn new(config: &ReserveConfig) -> Result<Self, FractionalError> {
        let mut report = crate::model::validate_instance(config, &Default::default());
        report.dummy_dependent = false;
        if !report.is_ok() {
            return Err(FractionalError::Invalid(report.to_string()));
        }
        for a in config.agents() {
            if config.universe_size(a) < config.reserve(a) {
                return Err(FractionalError::ReserveExceedsUniverse {
                    agent: a.0,
                    owned: config.universe_size(a),
                    reserve: config.reserve(a),
                });
            }
        }
        let universe = config.universe();
        let owner: Vec<usize> = universe.iter().map(|p| p.agent.index()).collect();
        let n = universe.len();
        let mut x = vec![1.0; n];
        let mut room = config.k.min(n);
        for (idx, p) in universe.iter().enumerate() {
            if (p.local as usize) < config.reserve(p.agent) {
                x[idx] = 0.0;
                room -= 1;
            }
        }
        for v in x.iter_mut() {
            if room == 0 {
                break;
            }
            if *v == 1.0 {
                *v = 0.0;
                room -= 1;
            }
        }
        Ok(FractionalState {
            config: config.clone(),
            universe,
            owner,
            x,
            interval: vec![0; n],
            history: vec![Vec::new(); n],
            lhs: vec![0.0; n],
            eta: 1.0 / config.k as f64,
            primal: 0.0,
            dual: 0.0,
            max_dual_violation: 0.0,
            t: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.universe.len()
    }

    pub fn index_of(&self, page: &Page) -> Option<usize> {
        self.universe.binary_search(page).ok()
    }

    /// In-cache mass `y(p) = 1 − x(p)`.
    pub fn y(&self) -> Vec<f64> {
        self.x.iter().map(|v| 1.0 - v).collect()
    }

    /// Indices of the initially cached pages.
    pub fn cached_pages(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.x[i] == 0.0).collect()
    }

    fn agent_slack(&self, agent: usize, skip: usize) -> f64 {
        let sum: f64 = (0..self.n())
            .filter(|&q| q != skip && self.owner[q] == agent)
            .map(|q| self.x[q])
            .sum();
        sum - (self.config.universe_sizes[agent - 1] - self.config.reserves[agent - 1]) as f64
    }

    /// Handles a request for universe page `p` at time `self.t + 1`.
    pub fn process_request(&mut self, p: usize) -> Result<FracStep, FractionalError> {
        self.t += 1;
        let t = self.t;
        let n = self.n();
        let m = self.config.m();
        let k = self.config.k;
        let eta = self.eta;
        let before = self.x.clone();

        // The old interval of p closes; a new one opens with x = 0.
        let fetched = self.x[p];
        self.history[p].push(fetched);
        self.interval[p] += 1;
        self.x[p] = 0.0;
        self.lhs[p] = 0.0;

        let target = n as f64 - k as f64;
        let mut tight = vec![false; m + 1];
        for (a, flag) in tight.iter_mut().enumerate().skip(1) {
            *flag = self.agent_slack(a, p) >= -TIGHT_TOL;
        }
        let mut alpha = 0.0;
        let mut segments = Vec::new();
        loop {
            let others: f64 = (0..n).filter(|&q| q != p).map(|q| self.x[q]).sum();
            if others >= target - 1e-12 {
                break;
            }
            let growing: Vec<usize> = (0..n)
                .filter(|&q| q != p && !tight[self.owner[q]] && self.x[q] < 1.0)
                .collect();
            if growing.is_empty() {
                return Err(FractionalError::Unsatisfiable {
                    t,
                    deficit: target - others,
                });
            }
            let k_prime = k
                - (1..=m)
                    .filter(|&a| tight[a])
                    .map(|a| self.config.reserves[a - 1])
                    .sum::<usize>();

            // Closed-form time to each event.
            let mut best = f64::INFINITY;
            let mut cands: Vec<(f64, GrowthEvent)> = Vec::new();
            for &q in &growing {
                let s = ((1.0 + eta) / (self.x[q] + eta)).ln();
                cands.push((s, GrowthEvent::Saturated(q)));
            }
            for a in 1..=m {
                if tight[a] {
                    continue;
                }
                let (mut amp, mut cnt, mut fixed) = (0.0, 0usize, 0.0);
                for q in (0..n).filter(|&q| q != p && self.owner[q] == a) {
                    if growing.contains(&q) {
                        amp += self.x[q] + eta;
                        cnt += 1;
                    } else {
                        fixed += self.x[q];
                    }
                }
                if cnt == 0 {
                    continue;
                }
                let goal = (self.config.universe_sizes[a - 1] - self.config.reserves[a - 1]) as f64;
                let s = ((goal - fixed + eta * cnt as f64) / amp).ln().max(0.0);
                if !s.is_finite() {
                    return Err(FractionalError::Convergence {
                        t,
                        what: "agent reserve",
                    });
                }
                cands.push((s, GrowthEvent::Tight(a as u32)));
            }
            {
                let (mut amp, mut fixed) = (0.0, 0.0);
                for q in (0..n).filter(|&q| q != p) {
                    if growing.contains(&q) {
                        amp += self.x[q] + eta;
                    } else {
                        fixed += self.x[q];
                    }
                }
                let s = ((target - fixed + eta * growing.len() as f64) / amp)
                    .ln()
                    .max(0.0);
                if !s.is_finite() {
                    return Err(FractionalError::Convergence {
                        t,
                        what: "covering constraint",
                    });
                }
                cands.push((s, GrowthEvent::Covered));
            }
            for (s, _) in &cands {
                best = best.min(*s);
            }
            let events: Vec<GrowthEvent> = cands
                .into_iter()
                .filter(|(s, _)| *s <= best + 1e-15 * best.abs().max(1.0))
                .map(|(_, e)| e)
                .collect();
            let s = best;

            // Dual bookkeeping for this segment.
            let tight_loss: f64 = (1..=m)
                .filter(|&a| tight[a])
                .map(|a| (self.config.universe_sizes[a - 1] - self.config.reserves[a - 1]) as f64)
                .sum();
            let saturated = (0..n)
                .filter(|&q| q != p && !tight[self.owner[q]] && self.x[q] >= 1.0)
                .count();
            self.dual += s * (target - tight_loss - saturated as f64);
            alpha += s;
            if s > 0.0 {
                for &q in &growing {
                    self.lhs[q] += s;
                    self.max_dual_violation = self.max_dual_violation.max(self.lhs[q]);
                }
            }

            // Advance the growing pages.
            let es = s.exp();
            for &q in &growing {
                let v = (self.x[q] + eta) * es - eta;
                self.x[q] = if v >= 1.0 - SATURATION_SNAP {
                    1.0
                } else {
                    v.max(self.x[q])
                };
            }
            for e in &events {
                if let GrowthEvent::Saturated(q) = e {
                    self.x[*q] = 1.0;
                }
            }
            for (a, flag) in tight.iter_mut().enumerate().skip(1) {
                if !*flag && self.agent_slack(a, p) >= -TIGHT_TOL {
                    *flag = true;
                }
            }
            let covered = events.contains(&GrowthEvent::Covered);
            segments.push(Segment {
                d_alpha: s,
                events,
                growing: growing.len(),
                k_prime,
            });
            if covered {
                break;
            }
        }

        let mut cost = 0.0;
        let mut changes = Vec::new();
        for q in 0..n {
            if q != p {
                cost += self.x[q] - before[q];
            }
            if self.x[q] != before[q] {
                changes.push((q, before[q], self.x[q]));
            }
        }
        self.primal += cost;
        Ok(FracStep {
            t,
            page: p,
            fetched,
            cost,
            alpha,
            primal: self.primal,
            dual: self.dual,
            dual_violation: self.max_dual_violation,
            changes,
            segments,
        })
    }

    /// Constraint (1) shortfall and worst constraint (2) excess with `p` requested.
    pub fn constraint_gaps(&self, p: usize) -> (f64, f64) {
        let n = self.n();
        let others: f64 = (0..n).filter(|&q| q != p).map(|q| self.x[q]).sum();
        let cover = (n as f64 - self.config.k as f64) - others;
        let reserve = (1..=self.config.m())
            .map(|a| self.agent_slack(a, p))
            .fold(f64::NEG_INFINITY, f64::max);
        (cover, reserve)
    }
}

/// Full run over a trace.
#[derive(Clone, Debug)]
pub struct FractionalRun {
    pub state: FractionalState,
    pub initial_x: Vec<f64>,
    pub steps: Vec<FracStep>,
    pub audit: FractionalAudit,
}

impl FractionalRun {
    /// Total eviction mass.
    pub fn cost(&self) -> f64 {
        self.state.primal
    }
}

pub fn run_fractional(instance: &Instance) -> Result<FractionalRun, FractionalError> {
    let report = instance.validate();
    if !report.is_ok() {
        return Err(FractionalError::Invalid(report.to_string()));
    }
    let mut state = FractionalState::new(&instance.config)?;
    let initial_x = state.x.clone();
    let mut audit = FractionalAudit {
        worst_ratio_gap: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut steps = Vec::with_capacity(instance.trace.len());
    for page in &instance.trace.requests {
        let p = state
            .index_of(page)
            .ok_or_else(|| FractionalError::Invalid(format!("page {page} outside universe")))?;
        let step = state.process_request(p)?;
        audit.worst_ratio_gap = audit.worst_ratio_gap.max(step.primal - 2.0 * step.dual);
        audit.worst_dual_violation = audit.worst_dual_violation.max(step.dual_violation);
        let (cover, reserve) = state.constraint_gaps(p);
        audit.worst_cover_deficit = audit.worst_cover_deficit.max(cover);
        audit.worst_reserve_excess = audit.worst_reserve_excess.max(reserve);
        audit.small_growth_sets += step
            .segments
            .iter()
            .filter(|s| s.d_alpha > 0.0 && s.growing < s.k_prime)
            .count();
        audit.monotonicity_breaks += step
            .changes
            .iter()
            .filter(|&&(q, b, a)| q != p && a < b)
            .count();
        steps.push(step);
    }
    if steps.is_empty() {
        audit.worst_ratio_gap = 0.0;
    }
    Ok(FractionalRun {
        state,
        initial_x,
        steps,
        audit,
    })
}
