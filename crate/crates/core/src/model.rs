//! Agents, pages, reserve configurations and request traces.

use std::collections::BTreeSet;
use std::fmt;

/// Index of an agent. Real agents are numbered `1..=m`; index 0 is the
/// filler owner of the public dummy pages and never owns a requested page.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub u32);

impl AgentId {
    pub const FILLER: AgentId = AgentId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_filler(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A page of the universe.
///
/// Real pages are identified by `(agent, local)`. Dummy pages are placeholders
/// that occupy the cache at start-up and never appear in a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Page {
    pub agent: AgentId,
    pub local: u32,
    pub dummy: bool,
}

impl Page {
    pub fn new(agent: u32, local: u32) -> Self {
        Page {
            agent: AgentId(agent),
            local,
            dummy: false,
        }
    }

    pub fn dummy(agent: u32, local: u32) -> Self {
        Page {
            agent: AgentId(agent),
            local,
            dummy: true,
        }
    }
}

/// `3.1` for real pages, `d3.1` for dummies (`d0.x` are public fillers).
impl fmt::Display for Page {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dummy {
            write!(f, "d{}.{}", self.agent, self.local)
        } else {
            write!(f, "{}.{}", self.agent, self.local)
        }
    }
}

impl std::str::FromStr for Page {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (dummy, body) = match s.strip_prefix('d') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (a, l) = body
            .split_once('.')
            .ok_or_else(|| format!("bad page `{s}`"))?;
        let agent = a
            .parse::<u32>()
            .map_err(|_| format!("bad agent in `{s}`"))?;
        let local = l
            .parse::<u32>()
            .map_err(|_| format!("bad local id in `{s}`"))?;
        Ok(Page {
            agent: AgentId(agent),
            local,
            dummy,
        })
    }
}

/// Cache size, per-agent reserves and per-agent universe sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReserveConfig {
    pub k: usize,
    /// `reserves[i - 1]` is the reserve of agent `i`.
    pub reserves: Vec<usize>,
    /// `universe_sizes[i - 1]` is the number of distinct real pages of agent `i`.
    pub universe_sizes: Vec<usize>,
}

impl ReserveConfig {
    pub fn new(k: usize, reserves: Vec<usize>, universe_sizes: Vec<usize>) -> Self {
        ReserveConfig {
            k,
            reserves,
            universe_sizes,
        }
    }

    /// Number of agents.
    pub fn m(&self) -> usize {
        self.reserves.len()
    }

    /// Reserve of `agent`; the filler agent has none.
    pub fn reserve(&self, agent: AgentId) -> usize {
        if agent.is_filler() {
            0
        } else {
            self.reserves[agent.index() - 1]
        }
    }

    pub fn universe_size(&self, agent: AgentId) -> usize {
        self.universe_sizes[agent.index() - 1]
    }

    pub fn reserve_sum(&self) -> usize {
        self.reserves.iter().sum()
    }

    /// Number of public slots, `k - sum(k_i)` (saturating).
    pub fn k0(&self) -> usize {
        self.k.saturating_sub(self.reserve_sum())
    }

    /// Total number of real pages in the universe.
    pub fn n(&self) -> usize {
        self.universe_sizes.iter().sum()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (1..=self.m() as u32).map(AgentId)
    }

    /// True when some agent owns fewer real pages than its reserve, so that
    /// only start-up dummies can satisfy the reserve.
    pub fn is_dummy_dependent(&self) -> bool {
        self.reserves
            .iter()
            .zip(&self.universe_sizes)
            .any(|(k, n)| n < k)
    }

    /// All real pages, agent-major.
    pub fn universe(&self) -> Vec<Page> {
        self.agents()
            .flat_map(|a| (0..self.universe_size(a) as u32).map(move |l| Page::new(a.0, l)))
            .collect()
    }
}

/// An ordered sequence of requests to real pages.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RequestTrace {
    pub requests: Vec<Page>,
}

impl RequestTrace {
    pub fn new(requests: Vec<Page>) -> Self {
        RequestTrace { requests }
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn distinct_pages(&self) -> BTreeSet<Page> {
        self.requests.iter().copied().collect()
    }

    /// Request at 1-based time `t`.
    pub fn at(&self, t: usize) -> Page {
        self.requests[t - 1]
    }
}

/// A configuration together with the trace it is run on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub config: ReserveConfig,
    pub trace: RequestTrace,
}

impl Instance {
    pub fn new(config: ReserveConfig, trace: RequestTrace) -> Self {
        Instance { config, trace }
    }

    /// Builds an instance whose universe is sized from the trace: agent `i`
    /// owns local ids `0..=max requested local id`.
    pub fn from_requests(k: usize, reserves: Vec<usize>, requests: Vec<Page>) -> Self {
        let universe_sizes = derive_universe_sizes(reserves.len(), &requests);
        Instance::new(
            ReserveConfig::new(k, reserves, universe_sizes),
            RequestTrace::new(requests),
        )
    }

    pub fn validate(&self) -> ValidationReport {
        validate_instance(&self.config, &self.trace)
    }
}

pub fn derive_universe_sizes(m: usize, requests: &[Page]) -> Vec<usize> {
    let mut sizes = vec![0usize; m];
    for p in requests {
        let a = p.agent.index();
        if (1..=m).contains(&a) {
            sizes[a - 1] = sizes[a - 1].max(p.local as usize + 1);
        }
    }
    sizes
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// `sum(k_i) >= k`.
    ReserveSumTooLarge {
        sum: usize,
        k: usize,
    },
    ZeroCacheSize,
    UniverseShapeMismatch,
    UnknownAgent {
        t: usize,
        agent: u32,
    },
    DummyInTrace {
        t: usize,
    },
    OutsideUniverse {
        t: usize,
        page: Page,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ReserveSumTooLarge { sum, k } => {
                write!(f, "sum of reserves {sum} must be < k = {k}")
            }
            Violation::ZeroCacheSize => write!(f, "cache size must be positive"),
            Violation::UniverseShapeMismatch => write!(f, "one universe size per agent required"),
            Violation::UnknownAgent { t, agent } => write!(f, "t={t}: unknown agent {agent}"),
            Violation::DummyInTrace { t } => write!(f, "t={t}: dummy page requested"),
            Violation::OutsideUniverse { t, page } => {
                write!(f, "t={t}: page {page} outside universe")
            }
        }
    }
}

/// Outcome of [`validate_instance`]. Dummy dependence is a warning, not a
/// violation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub dummy_dependent: bool,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

pub fn validate_instance(config: &ReserveConfig, trace: &RequestTrace) -> ValidationReport {
    let mut violations = Vec::new();
    if config.k == 0 {
        violations.push(Violation::ZeroCacheSize);
    }
    if config.reserve_sum() >= config.k {
        violations.push(Violation::ReserveSumTooLarge {
            sum: config.reserve_sum(),
            k: config.k,
        });
    }
    let shape_ok = config.universe_sizes.len() == config.m();
    if !shape_ok {
        violations.push(Violation::UniverseShapeMismatch);
    }
    for (idx, p) in trace.requests.iter().enumerate() {
        let t = idx + 1;
        if p.dummy {
            violations.push(Violation::DummyInTrace { t });
        } else if p.agent.is_filler() || p.agent.index() > config.m() {
            violations.push(Violation::UnknownAgent {
                t,
                agent: p.agent.0,
            });
        } else if shape_ok && p.local as usize >= config.universe_size(p.agent) {
            violations.push(Violation::OutsideUniverse { t, page: *p });
        }
    }
    ValidationReport {
        violations,
        dummy_dependent: shape_ok && config.is_dummy_dependent(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserve_sum_must_be_below_k() {
        let inst = Instance::from_requests(2, vec![2], vec![Page::new(1, 0)]);
        let report = inst.validate();
        assert_eq!(
            report.violations,
            vec![Violation::ReserveSumTooLarge { sum: 2, k: 2 }]
        );
    }

    #[test]
    fn empty_trace_is_ok() {
        let inst = Instance::from_requests(2, vec![0], vec![]);
        assert!(inst.validate().is_ok());
    }

    #[test]
    fn unknown_agent_is_reported() {
        let config = ReserveConfig::new(3, vec![1, 1], vec![2, 2]);
        let trace = RequestTrace::new(vec![Page::new(1, 0), Page::new(3, 0)]);
        let report = validate_instance(&config, &trace);
        assert_eq!(
            report.violations,
            vec![Violation::UnknownAgent { t: 2, agent: 3 }]
        );
    }

    #[test]
    fn dummies_and_out_of_universe_pages_are_rejected() {
        let config = ReserveConfig::new(3, vec![1], vec![2]);
        let trace = RequestTrace::new(vec![Page::dummy(1, 0), Page::new(1, 5)]);
        let report = validate_instance(&config, &trace);
        assert_eq!(
            report.violations,
            vec![
                Violation::DummyInTrace { t: 1 },
                Violation::OutsideUniverse {
                    t: 2,
                    page: Page::new(1, 5)
                }
            ]
        );
    }

    #[test]
    fn dummy_dependence_is_flagged_not_rejected() {
        let inst = Instance::from_requests(4, vec![2, 1], vec![Page::new(1, 0), Page::new(2, 0)]);
        let report = inst.validate();
        assert!(report.is_ok());
        assert!(report.dummy_dependent);
    }

    #[test]
    fn page_display_round_trips() {
        for p in [Page::new(3, 7), Page::dummy(0, 2), Page::dummy(12, 0)] {
            assert_eq!(p.to_string().parse::<Page>().unwrap(), p);
        }
    }
}
