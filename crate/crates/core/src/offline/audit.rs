//! Potential-function audit of the offline algorithm against a reference
//! schedule.
//!
//! Both runs are replayed side by side. The reference run keeps its own
//! partition `N*_0, .., N*_m`, updated by the rules below, and the potential
//! `Φ = Σ_i max_s [n_i(s) − n*_i(s)]` is evaluated after every sub-step,
//! where `n_i(s)` counts pages of `N_i` with rank at least `s`.
//!
//! Per request: (1) add `p` to `N_i`, `N*_i`; (2) remove `p` from `N_0`,
//! `N*_0`; (3) shrink `N_i`, `N*_i` back to `k_i`; (4) the reference run
//! fetches/evicts; (5) the algorithm fetches/evicts; (6) `rank(p)` advances.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{RankedCache, Ranks};
use crate::model::{Instance, Page};
use crate::state::{CostLedger, Eviction, ModelError, ReservesCacheState};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("reference schedule is infeasible: {0}")]
    Infeasible(#[from] ModelError),
    #[error("t={t}: no rebalancing rule covers |N_i|={alg}, |N*_i|={opt}")]
    UncoveredCase { t: usize, alg: usize, opt: usize },
    #[error("t={t}: no page of agent {agent} in N*_0 to cover the reference eviction")]
    MissingSurplus { t: usize, agent: u32 },
    #[error("t={t}: algorithm log disagrees with the replay ({detail})")]
    AlgorithmMismatch { t: usize, detail: String },
}

/// Potential between two partitions under the given ranks.
pub(crate) fn potential_with(ranks: &Ranks, alg: &[BTreeSet<Page>], opt: &[BTreeSet<Page>]) -> i64 {
    alg.iter().zip(opt).map(|(a, o)| phi_i(ranks, a, o)).sum()
}

fn phi_i(ranks: &Ranks, alg: &BTreeSet<Page>, opt: &BTreeSet<Page>) -> i64 {
    let ra: Vec<usize> = alg.iter().map(|p| ranks.of(p)).collect();
    let ro: Vec<usize> = opt.iter().map(|p| ranks.of(p)).collect();
    ra.iter()
        .chain(&ro)
        .map(|&s| {
            let n = ra.iter().filter(|&&r| r >= s).count() as i64;
            let n_star = ro.iter().filter(|&&r| r >= s).count() as i64;
            n - n_star
        })
        .fold(0, i64::max)
}

/// `Φ` at time 0 for two partitions of the same start cache (used by tests).
pub fn potential(instance: &Instance, alg: &RankedCache, opt: &RankedCache) -> i64 {
    potential_with(&Ranks::new(&instance.trace), &alg.sets, &opt.sets)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepAudit {
    pub t: usize,
    pub d_alg: i64,
    pub d_opt: i64,
    pub d_phi: i64,
    pub phi: i64,
    /// Sub-steps whose own bound failed, as `(sub-step number, ΔΦ)`.
    pub substep_failures: Vec<(u8, i64)>,
}

impl StepAudit {
    /// `ΔALG + ΔΦ − 2·ΔOPT`; must be `≤ 0`.
    pub fn slack(&self) -> i64 {
        self.d_alg + self.d_phi - 2 * self.d_opt
    }
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub steps: Vec<StepAudit>,
    pub alg: u64,
    pub opt: u64,
    pub min_phi: i64,
}

impl AuditReport {
    pub fn max_slack(&self) -> i64 {
        self.steps.iter().map(StepAudit::slack).max().unwrap_or(0)
    }

    /// Per-request inequality and `Φ ≥ 0` everywhere.
    pub fn holds(&self) -> bool {
        self.max_slack() <= 0 && self.min_phi >= 0
    }

    pub fn substeps_hold(&self) -> bool {
        self.steps.iter().all(|s| s.substep_failures.is_empty())
    }

    pub fn first_failure(&self) -> Option<&StepAudit> {
        self.steps
            .iter()
            .find(|s| s.slack() > 0 || s.phi < 0 || !s.substep_failures.is_empty())
    }
}

struct Tracker {
    phi: i64,
    failures: Vec<(u8, i64)>,
    min_phi: i64,
}

impl Tracker {
    /// Records the potential after a sub-step and checks `ΔΦ ≤ bound`.
    fn after(
        &mut self,
        ranks: &Ranks,
        step: u8,
        alg: &[BTreeSet<Page>],
        opt: &[BTreeSet<Page>],
        bound: i64,
    ) {
        let phi = potential_with(ranks, alg, opt);
        let d = phi - self.phi;
        if d > bound {
            self.failures.push((step, d));
        }
        self.min_phi = self.min_phi.min(phi);
        self.phi = phi;
    }
}

fn min_rank_except(ranks: &Ranks, set: &BTreeSet<Page>, p: &Page) -> Option<Page> {
    set.iter()
        .filter(|x| *x != p)
        .copied()
        .min_by_key(|x| ranks.key(x))
}

fn shift(sets: &mut [BTreeSet<Page>], from: usize, to: usize, page: Page) {
    let removed = sets[from].remove(&page);
    debug_assert!(removed);
    sets[to].insert(page);
}

/// Audits the algorithm's run (`alg_log`) against a reference schedule.
pub fn audit_potential(
    instance: &Instance,
    alg_log: &[Eviction],
    opt_log: &[Eviction],
) -> Result<AuditReport, AuditError> {
    let config = &instance.config;
    let mut ranks = Ranks::new(&instance.trace);
    let mut alg = RankedCache::initial(config).sets;
    let mut opt = alg.clone();
    let mut opt_state = ReservesCacheState::initial(config);
    let mut opt_ledger = CostLedger::default();
    let mut alg_next = alg_log.iter();
    let mut opt_next = opt_log.iter();
    let mut report = AuditReport::default();

    for (idx, &p) in instance.trace.requests.iter().enumerate() {
        let t = idx + 1;
        let i = p.agent.index();
        let ki = config.reserve(p.agent);
        let alg_miss = !alg.iter().any(|s| s.contains(&p));
        let opt_miss = !opt_state.contains(&p);
        let mut tr = Tracker {
            phi: potential_with(&ranks, &alg, &opt),
            failures: Vec::new(),
            min_phi: 0,
        };
        let phi_before = tr.phi;

        // Step 1.
        alg[i].insert(p);
        opt[i].insert(p);
        tr.after(&ranks, 1, &alg, &opt, 0);

        // Step 2.
        alg[0].remove(&p);
        opt[0].remove(&p);
        tr.after(&ranks, 2, &alg, &opt, 0);

        // Step 3.
        let (na, no) = (alg[i].len(), opt[i].len());
        if ki == 0 {
            shift(&mut alg, i, 0, p);
            shift(&mut opt, i, 0, p);
        } else {
            let qi = ranks.max_in(&alg[i]).expect("N_i is non-empty");
            let q_star = ranks.max_in(&opt[i]).expect("N*_i is non-empty");
            match (na - ki, no - ki) {
                (0, 0) => {}
                (1, 0) => shift(&mut alg, i, 0, qi),
                (0, 1) => {
                    let q = min_rank_except(&ranks, &opt[i], &p).expect("k_i > 0");
                    shift(&mut opt, i, 0, q);
                }
                (1, 1) => {
                    shift(&mut alg, i, 0, qi);
                    if ranks.of(&qi) <= ranks.of(&q_star) {
                        shift(&mut opt, i, 0, q_star);
                    } else {
                        let q = min_rank_except(&ranks, &opt[i], &p).expect("k_i > 0");
                        shift(&mut opt, i, 0, q);
                    }
                }
                _ => {
                    return Err(AuditError::UncoveredCase {
                        t,
                        alg: na,
                        opt: no,
                    })
                }
            }
        }
        tr.after(&ranks, 3, &alg, &opt, 0);

        // Step 4.
        let mut d_opt = 0;
        if opt_miss {
            let ev = opt_next.next().ok_or(ModelError::Schedule {
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
            opt_state.apply_miss(t, p, ev.evict, &mut opt_ledger)?;
            let q = ev.evict;
            let j = opt
                .iter()
                .position(|s| s.contains(&q))
                .ok_or(ModelError::NotCached { t, page: q })?;
            if j != 0 {
                let q_prime = opt[0]
                    .iter()
                    .filter(|x| x.agent.index() == j)
                    .copied()
                    .min_by_key(|x| ranks.key(x))
                    .ok_or(AuditError::MissingSurplus { t, agent: j as u32 })?;
                shift(&mut opt, 0, j, q_prime);
            }
            opt[j].remove(&q);
            d_opt = 1;
        }
        tr.after(&ranks, 4, &alg, &opt, 2 * d_opt);

        // Step 5.
        let mut d_alg = 0;
        if alg_miss {
            let q = ranks
                .max_in(alg[0].iter().filter(|x| **x != p))
                .expect("N_0 is non-empty");
            alg[0].remove(&q);
            match alg_next.next() {
                Some(ev) if ev.t == t && ev.evict == q && ev.fetch == p => {}
                other => {
                    return Err(AuditError::AlgorithmMismatch {
                        t,
                        detail: format!(
                            "replay evicts {q}, log has {}",
                            other.map_or("nothing".into(), |e| e.to_string())
                        ),
                    })
                }
            }
            d_alg = 1;
        }
        tr.after(&ranks, 5, &alg, &opt, -d_alg);

        // Step 6.
        ranks.advance(t, p);
        tr.after(&ranks, 6, &alg, &opt, 0);

        let shape_ok = |sets: &[BTreeSet<Page>]| {
            sets[0].len() == config.k0()
                && (1..sets.len()).all(|j| sets[j].len() == config.reserves[j - 1])
        };
        if !shape_ok(&alg) || !shape_ok(&opt) {
            return Err(AuditError::UncoveredCase {
                t,
                alg: alg[i].len(),
                opt: opt[i].len(),
            });
        }

        report.min_phi = report.min_phi.min(tr.min_phi);
        report.alg += d_alg as u64;
        report.opt += d_opt as u64;
        report.steps.push(StepAudit {
            t,
            d_alg,
            d_opt,
            d_phi: tr.phi - phi_before,
            phi: tr.phi,
            substep_failures: tr.failures,
        });
    }
    if alg_next.next().is_some() {
        return Err(AuditError::AlgorithmMismatch {
            t: instance.trace.len(),
            detail: "trailing log entries".into(),
        });
    }
    if let Some(ev) = opt_next.next() {
        return Err(ModelError::Schedule {
            t: ev.t,
            detail: "has entries for hits".into(),
        }
        .into());
    }
    Ok(report)
}
