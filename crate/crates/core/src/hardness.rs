//! Hard instances built from balanced 3-SAT formulas.
//!
//! A formula over `n` variables (n even) and `m` three-literal clauses becomes
//! a trace over `n + 4m + 3` agents. Agents `1..=n` stand for the variables
//! and hold reserve 1; the remaining agents have reserve 0 and only appear in
//! round-robin blocks (`PUBLIC(i, x)`) that pin `x` public slots. The cache
//! holds `k = 3n/2 + 2` pages.
//!
//! A balanced satisfying assignment yields a schedule within the budget
//! [`HardnessInstance::c`]; [`synthesize_strategy`] constructs it and
//! [`replay_strategy`] checks it. The schedule's exact miss count is
//! [`strategy_misses`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::model::{Instance, Page, RequestTrace, ReserveConfig};
use crate::state::{replay_pp, CostLedger, ModelError, PpStep, PublicPrivateCacheState, Slot};

#[derive(Debug, Error, PartialEq)]
pub enum HardnessError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid formula: {0}")]
    Formula(String),
    #[error("invalid assignment: {0}")]
    Assignment(String),
    #[error("t={t}: no room for {page} in the {slot} cache")]
    NoRoom { t: usize, page: Page, slot: Slot },
    #[error("replay failed: {0}")]
    Replay(#[from] ModelError),
}

/// A literal: variable `1..=n` and polarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: u32,
    pub positive: bool,
}

/// Three literals over distinct variables, positive ones first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Clause(pub [Literal; 3]);

impl Clause {
    /// Sorts positive literals first, keeping the input order otherwise.
    pub fn normalized(mut lits: [Literal; 3]) -> Result<Self, HardnessError> {
        let vars: BTreeSet<u32> = lits.iter().map(|l| l.var).collect();
        if vars.len() != 3 {
            return Err(HardnessError::Formula("a clause repeats a variable".into()));
        }
        lits.sort_by_key(|l| !l.positive);
        Ok(Clause(lits))
    }

    /// `"TTT"`, `"TTF"`, `"TFF"` or `"FFF"`.
    pub fn pattern(&self) -> &'static str {
        match self.0.iter().filter(|l| l.positive).count() {
            3 => "TTT",
            2 => "TTF",
            1 => "TFF",
            _ => "FFF",
        }
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.0
            .iter()
            .any(|l| assignment[l.var as usize - 1] == l.positive)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    pub n: usize,
    pub clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(n: usize, clauses: Vec<Clause>) -> Result<Self, HardnessError> {
        if n % 2 == 1 {
            return Err(HardnessError::Formula(format!(
                "odd number of variables ({n})"
            )));
        }
        for c in &clauses {
            if c.0.iter().any(|l| l.var == 0 || l.var as usize > n) {
                return Err(HardnessError::Formula(format!(
                    "variable out of range 1..={n}"
                )));
            }
        }
        Ok(CnfFormula { n, clauses })
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    /// Number of clauses containing each variable (index 0 unused).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n + 1];
        for c in &self.clauses {
            for l in &c.0 {
                deg[l.var as usize] += 1;
            }
        }
        deg
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.satisfied_by(assignment))
    }

    /// First balanced satisfying assignment in lexicographic order of the
    /// true set, by exhaustive search.
    pub fn find_balanced_assignment(&self) -> Option<Vec<bool>> {
        assert!(self.n <= 24, "exhaustive search is limited to 24 variables");
        let n = self.n as u32;
        (0u32..1 << n)
            .filter(|mask| mask.count_ones() == n / 2)
            .map(|mask| (0..n).map(|i| mask & (1 << i) != 0).collect::<Vec<_>>())
            .find(|a| self.satisfied_by(a))
    }

    /// A random formula whose clauses use distinct variables.
    pub fn random(rng: &mut impl Rng, n: usize, m: usize) -> Self {
        assert!(n >= 3 && n.is_multiple_of(2));
        let clauses = (0..m)
            .map(|_| {
                let vars = sample(rng, n, 3);
                let mut lits = [Literal {
                    var: 0,
                    positive: true,
                }; 3];
                for (slot, v) in lits.iter_mut().zip(vars.iter()) {
                    *slot = Literal {
                        var: v as u32 + 1,
                        positive: rng.gen(),
                    };
                }
                Clause::normalized(lits).expect("distinct variables")
            })
            .collect();
        CnfFormula { n, clauses }
    }
}

impl fmt::Display for CnfFormula {
    /// DIMACS text.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p cnf {} {}", self.n, self.m())?;
        for c in &self.clauses {
            for l in &c.0 {
                write!(
                    f,
                    "{} ",
                    if l.positive {
                        l.var as i64
                    } else {
                        -(l.var as i64)
                    }
                )?;
            }
            writeln!(f, "0")?;
        }
        Ok(())
    }
}

/// Parses DIMACS CNF; clauses may span lines and must have exactly three
/// distinct variables.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, HardnessError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut pending: Vec<i64> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('c') || s.starts_with('%') {
            continue;
        }
        let err = |msg: String| HardnessError::Parse { line, msg };
        if s.starts_with('p') {
            let f: Vec<&str> = s.split_whitespace().collect();
            if header.is_some() || f.len() != 4 || f[1] != "cnf" {
                return Err(err(format!("bad problem line `{s}`")));
            }
            let n = f[2]
                .parse()
                .map_err(|_| err(format!("bad variable count `{}`", f[2])))?;
            let m = f[3]
                .parse()
                .map_err(|_| err(format!("bad clause count `{}`", f[3])))?;
            if n % 2 == 1 {
                return Err(err(format!("odd number of variables ({n})")));
            }
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or_else(|| err("clause before the problem line".into()))?;
        for tok in s.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| err(format!("bad literal `{tok}`")))?;
            if v == 0 {
                if pending.len() != 3 {
                    return Err(err(format!(
                        "clause has {} literals, expected 3",
                        pending.len()
                    )));
                }
                let mut lits = [Literal {
                    var: 0,
                    positive: true,
                }; 3];
                for (slot, &x) in lits.iter_mut().zip(&pending) {
                    *slot = Literal {
                        var: x.unsigned_abs() as u32,
                        positive: x > 0,
                    };
                }
                clauses.push(Clause::normalized(lits).map_err(|e| err(e.to_string()))?);
                pending.clear();
            } else {
                if v.unsigned_abs() as usize > n {
                    return Err(err(format!(
                        "variable {} exceeds n = {n}",
                        v.unsigned_abs()
                    )));
                }
                pending.push(v);
            }
        }
    }
    let (n, m) = header.ok_or(HardnessError::Parse {
        line: 0,
        msg: "missing problem line".into(),
    })?;
    if !pending.is_empty() {
        return Err(HardnessError::Parse {
            line: last_line,
            msg: "unterminated clause".into(),
        });
    }
    if clauses.len() != m {
        return Err(HardnessError::Parse {
            line: last_line,
            msg: format!("expected {m} clauses, found {}", clauses.len()),
        });
    }
    CnfFormula::new(n, clauses)
}

/// Parses an assignment file: whitespace-separated DIMACS literals (`1 -2 ...`),
/// optionally prefixed by `v` and terminated by `0`.
pub fn parse_assignment(text: &str, n: usize) -> Result<Vec<bool>, HardnessError> {
    let mut out = vec![None; n];
    for (idx, raw) in text.lines().enumerate() {
        let s = raw.trim();
        if s.is_empty() || s.starts_with('c') || s.starts_with('s') {
            continue;
        }
        for tok in s.split_whitespace().filter(|t| *t != "v") {
            let err = |msg: String| HardnessError::Parse { line: idx + 1, msg };
            let v: i64 = tok
                .parse()
                .map_err(|_| err(format!("bad literal `{tok}`")))?;
            if v == 0 {
                continue;
            }
            let i = v.unsigned_abs() as usize;
            if i > n {
                return Err(err(format!("variable {i} exceeds n = {n}")));
            }
            out[i - 1] = Some(v > 0);
        }
    }
    out.iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| HardnessError::Assignment(format!("variable {} unassigned", i + 1)))
        })
        .collect()
}

/// `C′ = 3m + 4n + 2`.
pub fn c_prime(n: usize, m: usize) -> u64 {
    (3 * m + 4 * n + 2) as u64
}

/// `C = 2mn + 22m + 11n/2 + 6`.
pub fn c_budget(n: usize, m: usize) -> u64 {
    (2 * m * n + 22 * m + 11 * n / 2 + 6) as u64
}

/// Exact miss count of [`synthesize_strategy`]: `2mn + 18m + 11n/2 + 6`.
///
/// Every variable page misses once on first request, each variable agent
/// declines `deg(i) + 1` second requests, and every round-robin page misses
/// once. With `Σ deg(i) = 3m` this is `4m` below [`c_budget`].
pub fn strategy_misses(n: usize, m: usize) -> u64 {
    (2 * m * n + 18 * m + 11 * n / 2 + 6) as u64
}

/// Closed-form trace length `2C′mn + 6C′m + C′n/2 + 6C′ + 18m + 8n`.
pub fn expected_length(n: usize, m: usize) -> u64 {
    let (n, m, cp) = (n as u64, m as u64, c_prime(n, m));
    2 * cp * m * n + 6 * cp * m + cp * n / 2 + 6 * cp + 18 * m + 8 * n
}

/// Origin of one request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub gadget: String,
    pub tag: String,
}

/// A contiguous block of requests and its closed-form size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetSpan {
    pub name: String,
    pub start: usize,
    pub len: usize,
    pub expected_len: usize,
}

#[derive(Clone, Debug)]
pub struct HardnessInstance {
    pub formula: CnfFormula,
    pub instance: Instance,
    pub c_prime: u64,
    pub c: u64,
    pub provenance: Vec<Provenance>,
    /// Top-level gadgets in order.
    pub gadgets: Vec<GadgetSpan>,
    /// Every round-robin block, nested ones included.
    pub public_blocks: Vec<GadgetSpan>,
}

impl HardnessInstance {
    /// One line per request: `index gadget tag` (0-based index).
    pub fn provenance_text(&self) -> String {
        let mut s = String::from("# index gadget tag\n");
        for (i, p) in self.provenance.iter().enumerate() {
            s.push_str(&format!("{i} {} {}\n", p.gadget, p.tag));
        }
        s
    }
}

struct Builder {
    n: usize,
    cp: usize,
    requests: Vec<Page>,
    provenance: Vec<Provenance>,
    public_blocks: Vec<GadgetSpan>,
    gadget: String,
}

impl Builder {
    fn var(&mut self, agent: usize, local: usize) {
        self.requests.push(Page::new(agent as u32, local as u32));
        self.provenance.push(Provenance {
            gadget: self.gadget.clone(),
            tag: format!("mod{}", local % 3),
        });
    }

    fn public(&mut self, i: usize, x: usize) {
        let name = format!("PUBLIC({i},{x})");
        let start = self.requests.len();
        for _ in 0..self.cp {
            for l in 1..=x {
                self.requests.push(Page::new((self.n + i) as u32, l as u32));
                self.provenance.push(Provenance {
                    gadget: self.gadget.clone(),
                    tag: name.clone(),
                });
            }
        }
        self.public_blocks.push(GadgetSpan {
            name,
            start,
            len: self.requests.len() - start,
            expected_len: self.cp * x,
        });
    }
}

/// Builds the trace `VARIABLE(T) ∘ CLAUSE(1) ∘ … ∘ CLAUSE(m) ∘ VARIABLE(F)`.
pub fn generate_instance(formula: &CnfFormula) -> Result<HardnessInstance, HardnessError> {
    let n = formula.n;
    let m = formula.m();
    if n < 2 || n % 2 == 1 {
        return Err(HardnessError::Formula(format!(
            "need an even, positive number of variables (got {n})"
        )));
    }
    let cp = c_prime(n, m) as usize;
    let half = n / 2;
    let deg = formula.degrees();
    let mut b = Builder {
        n,
        cp,
        requests: Vec::new(),
        provenance: Vec::new(),
        public_blocks: Vec::new(),
        gadget: String::new(),
    };
    let mut gadgets = Vec::new();
    let open = |b: &mut Builder, name: String| {
        b.gadget = name;
        b.requests.len()
    };

    let start = open(&mut b, "VARIABLE(T)".into());
    (1..=n).for_each(|i| b.var(i, 1));
    (1..=n).for_each(|i| b.var(i, 0));
    b.public(1, 2);
    (1..=n).for_each(|i| b.var(i, 0));
    gadgets.push(GadgetSpan {
        name: b.gadget.clone(),
        start,
        len: b.requests.len() - start,
        expected_len: 3 * n + 2 * cp,
    });

    let mut seen = vec![0usize; n + 1];
    for (jdx, clause) in formula.clauses.iter().enumerate() {
        let j = jdx + 1;
        let pat = clause.pattern();
        let start = open(&mut b, format!("CLAUSE({j},{pat})"));
        let vars: Vec<usize> = clause.0.iter().map(|l| l.var as usize).collect();
        let base: Vec<usize> = vars.iter().map(|&v| 3 * seen[v]).collect();
        let pos = clause.0.iter().filter(|l| l.positive).count();
        let each = |b: &mut Builder, which: std::ops::Range<usize>, off: usize| {
            for l in which {
                b.var(vars[l], base[l] + off);
            }
        };
        // Positive literals swap their 1- and 2-pages before the bottleneck,
        // negated ones after it.
        each(&mut b, 0..pos, 2);
        b.public(4 * j - 2, half + 2);
        each(&mut b, 0..pos, 1);
        each(&mut b, 0..3, 3);
        b.public(4 * j - 1, half);
        each(&mut b, 0..3, 3);
        each(&mut b, pos..3, 2);
        b.public(4 * j, half + 2);
        each(&mut b, pos..3, 1);
        each(&mut b, 0..3, 4);
        b.public(4 * j + 1, half + 2);
        each(&mut b, 0..3, 2);
        for &v in &vars {
            seen[v] += 1;
        }
        gadgets.push(GadgetSpan {
            name: b.gadget.clone(),
            start,
            len: b.requests.len() - start,
            expected_len: 2 * cp * n + 6 * cp + 18,
        });
    }

    let start = open(&mut b, "VARIABLE(F)".into());
    (1..=n).for_each(|i| b.var(i, 3 * deg[i] + 2));
    b.public(4 * m + 2, half + 2);
    (1..=n).for_each(|i| b.var(i, 3 * deg[i] + 1));
    (1..=n).for_each(|i| b.var(i, 3 * deg[i] + 3));
    b.public(4 * m + 3, 2);
    (1..=n).for_each(|i| b.var(i, 3 * deg[i] + 3));
    (1..=n).for_each(|i| b.var(i, 3 * deg[i] + 2));
    gadgets.push(GadgetSpan {
        name: b.gadget.clone(),
        start,
        len: b.requests.len() - start,
        expected_len: 5 * n + 2 * cp + cp * (half + 2),
    });

    let mut reserves = vec![1; n];
    reserves.extend(std::iter::repeat_n(0, 4 * m + 3));
    let mut sizes: Vec<usize> = (1..=n).map(|i| 3 * deg[i] + 4).collect();
    for i in 1..=4 * m + 3 {
        let x = b
            .public_blocks
            .iter()
            .find(|g| g.name.starts_with(&format!("PUBLIC({i},")))
            .map_or(0, |g| g.expected_len / cp);
        sizes.push(x + 1);
    }
    let config = ReserveConfig::new(3 * n / 2 + 2, reserves, sizes);
    let instance = Instance::new(config, RequestTrace::new(b.requests));
    Ok(HardnessInstance {
        formula: formula.clone(),
        instance,
        c_prime: cp as u64,
        c: c_budget(n, m),
        provenance: b.provenance,
        gadgets,
        public_blocks: b.public_blocks,
    })
}

fn check_assignment(formula: &CnfFormula, assignment: &[bool]) -> Result<(), HardnessError> {
    if assignment.len() != formula.n {
        return Err(HardnessError::Assignment(format!(
            "{} values for {} variables",
            assignment.len(),
            formula.n
        )));
    }
    let trues = assignment.iter().filter(|&&x| x).count();
    if 2 * trues != formula.n {
        return Err(HardnessError::Assignment(format!(
            "{trues} of {} variables true, need exactly half",
            formula.n
        )));
    }
    if let Some(j) = formula
        .clauses
        .iter()
        .position(|c| !c.satisfied_by(assignment))
    {
        return Err(HardnessError::Assignment(format!(
            "clause {} is not satisfied",
            j + 1
        )));
    }
    Ok(())
}

/// The public-private schedule for a balanced satisfying assignment.
///
/// Every round-robin page is kept in public slots between its requests. A
/// true variable keeps its pages `≡ 1 (mod 3)`, a false one its pages
/// `≡ 2 (mod 3)`, both in the private slot; pages `≡ 0 (mod 3)` are always
/// kept, privately when the private slot is free for their whole lifetime
/// and publicly otherwise. Everything else passes through a free or expired
/// slot.
pub fn synthesize_strategy(
    h: &HardnessInstance,
    assignment: &[bool],
) -> Result<Vec<PpStep>, HardnessError> {
    check_assignment(&h.formula, assignment)?;
    let n = h.formula.n;
    let config = &h.instance.config;
    let reqs = &h.instance.trace.requests;
    let len = reqs.len();

    let mut next = vec![usize::MAX; len];
    let mut last: BTreeMap<Page, usize> = BTreeMap::new();
    for t in (0..len).rev() {
        if let Some(&u) = last.get(&reqs[t]) {
            next[t] = u;
        }
        last.insert(reqs[t], t);
    }
    let kept = |t: usize| -> bool {
        let p = reqs[t];
        let a = p.agent.index();
        next[t] != usize::MAX
            && (a > n
                || match p.local % 3 {
                    0 => true,
                    1 => assignment[a - 1],
                    _ => !assignment[a - 1],
                })
    };
    // Lifetimes of the kept 1/2-pages per variable agent.
    let mut busy: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + 1];
    for t in 0..len {
        let a = reqs[t].agent.index();
        if a <= n && !reqs[t].local.is_multiple_of(3) && kept(t) {
            busy[a].push((t, next[t]));
        }
    }
    let slot_for = |t: usize| -> Slot {
        let p = reqs[t];
        let a = p.agent.index();
        if a > n {
            Slot::Public
        } else if !p.local.is_multiple_of(3) || busy[a].iter().all(|&(s, e)| e <= t || next[t] <= s)
        {
            Slot::Private
        } else {
            Slot::Public
        }
    };

    let mut state = PublicPrivateCacheState::empty(config);
    let mut ledger = CostLedger::default();
    // Pages held past their last kept interval may be dropped at any time.
    let mut expired: BTreeSet<Page> = BTreeSet::new();
    let mut steps = Vec::new();
    for (idx, &p) in reqs.iter().enumerate() {
        let t = idx + 1;
        if state.contains(&p) {
            if !kept(idx) {
                expired.insert(p);
            }
            continue;
        }
        let candidates: Vec<Slot> = if kept(idx) {
            vec![slot_for(idx)]
        } else {
            vec![Slot::Private, Slot::Public]
        };
        let room = |slot: Slot, state: &PublicPrivateCacheState| -> Option<Option<Page>> {
            let (free, pool): (usize, Vec<Page>) = match slot {
                Slot::Private => (
                    state.free_private(config, p.agent),
                    state.private[p.agent.index()].iter().copied().collect(),
                ),
                Slot::Public => (
                    state.free_public(config),
                    state.public.iter().copied().collect(),
                ),
            };
            if free > 0 {
                Some(None)
            } else {
                pool.into_iter().find(|q| expired.contains(q)).map(Some)
            }
        };
        // Free slots first, then expired pages, in candidate order.
        let choice = candidates
            .iter()
            .find_map(|&s| room(s, &state).filter(|e| e.is_none()).map(|e| (s, e)))
            .or_else(|| {
                candidates
                    .iter()
                    .find_map(|&s| room(s, &state).map(|e| (s, e)))
            });
        let (slot, evict) = choice.ok_or(HardnessError::NoRoom {
            t,
            page: p,
            slot: candidates[0],
        })?;
        let step = PpStep {
            t,
            fetch: p,
            slot,
            evict,
            relocate: None,
        };
        state.apply(config, &step, &mut ledger)?;
        if let Some(e) = evict {
            expired.remove(&e);
        }
        if !kept(idx) {
            expired.insert(p);
        }
        steps.push(step);
    }
    Ok(steps)
}

/// Replays a schedule for the instance; returns the ledger and hits per agent.
pub fn replay_strategy(
    h: &HardnessInstance,
    steps: &[PpStep],
) -> Result<(CostLedger, Vec<u64>), HardnessError> {
    let ledger = replay_pp(&h.instance, steps)?;
    let mut hits = vec![0u64; h.instance.config.m() + 1];
    let mut missed: BTreeSet<usize> = steps.iter().map(|s| s.t).collect();
    for (idx, p) in h.instance.trace.requests.iter().enumerate() {
        if !missed.remove(&(idx + 1)) {
            hits[p.agent.index()] += 1;
        }
    }
    Ok((ledger, hits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> CnfFormula {
        parse_dimacs("c example\np cnf 4 1\n1 2 -3 0\n").unwrap()
    }

    #[test]
    fn dimacs_parsing_and_normalization() {
        let f = example();
        assert_eq!((f.n, f.m()), (4, 1));
        assert_eq!(f.clauses[0].pattern(), "TTF");
        let g = parse_dimacs("p cnf 4 1\n-1 2 -3\n 0\n").unwrap();
        assert_eq!(
            g.clauses[0].0[0],
            Literal {
                var: 2,
                positive: true
            }
        );
        assert_eq!(g.clauses[0].pattern(), "TFF");
        assert!(matches!(
            parse_dimacs("p cnf 4 1\n1 1 2 0\n"),
            Err(HardnessError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_dimacs("p cnf 3 1\n1 2 3 0\n"),
            Err(HardnessError::Parse { line: 1, .. })
        ));
        assert!(parse_dimacs("p cnf 4 1\n1 2 0\n").is_err());
        assert!(parse_dimacs("p cnf 4 2\n1 2 3 0\n").is_err());
        assert!(parse_dimacs("1 2 3 0\n").is_err());
        assert_eq!(parse_dimacs(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn constants_for_four_variables_one_clause() {
        assert_eq!(c_prime(4, 1), 21);
        assert_eq!(c_budget(4, 1), 58);
        assert_eq!(expected_length(4, 1), 512);
        let h = generate_instance(&example()).unwrap();
        assert_eq!(h.instance.trace.len(), 512);
        assert_eq!(h.instance.config.k, 8);
        assert_eq!(h.instance.config.m(), 11);
        assert!(h.instance.validate().is_ok());
    }

    #[test]
    fn gadget_sizes_add_up() {
        let h = generate_instance(&example()).unwrap();
        assert!(h.gadgets.iter().all(|g| g.len == g.expected_len));
        assert!(h.public_blocks.iter().all(|g| g.len == g.expected_len));
        assert_eq!(
            h.gadgets.iter().map(|g| g.len).sum::<usize>(),
            h.instance.trace.len()
        );
        assert_eq!(h.public_blocks.len(), 4 + 3);
        assert_eq!(h.provenance.len(), 512);
    }

    #[test]
    fn every_variable_page_is_requested_twice() {
        let h = generate_instance(&example()).unwrap();
        let mut counts: BTreeMap<Page, usize> = BTreeMap::new();
        for p in &h.instance.trace.requests {
            *counts.entry(*p).or_default() += 1;
        }
        let deg = h.formula.degrees();
        for i in 1..=4u32 {
            for l in 0..(3 * deg[i as usize] + 4) as u32 {
                assert_eq!(counts[&Page::new(i, l)], 2, "p{i}.{l}");
            }
        }
    }

    #[test]
    fn strategy_meets_the_budget() {
        let f = example();
        let h = generate_instance(&f).unwrap();
        let x = [true, false, false, true];
        let steps = synthesize_strategy(&h, &x).unwrap();
        let (ledger, hits) = replay_strategy(&h, &steps).unwrap();
        assert_eq!(ledger.misses, strategy_misses(4, 1));
        assert_eq!(ledger.misses, 54);
        assert!(ledger.misses <= h.c);
        let deg = f.degrees();
        for i in 1..=4 {
            assert_eq!(hits[i], 2 * deg[i] as u64 + 3);
        }
    }

    #[test]
    fn bad_assignments_are_rejected() {
        let h = generate_instance(&example()).unwrap();
        // Unbalanced.
        assert!(matches!(
            synthesize_strategy(&h, &[true, true, true, false]),
            Err(HardnessError::Assignment(_))
        ));
        // Balanced but falsifies 1 ∨ 2 ∨ ¬3.
        assert!(matches!(
            synthesize_strategy(&h, &[false, false, true, true]),
            Err(HardnessError::Assignment(_))
        ));
    }

    #[test]
    fn assignment_files() {
        assert_eq!(
            parse_assignment("v 1 -2 -3 4 0\n", 4).unwrap(),
            vec![true, false, false, true]
        );
        assert!(parse_assignment("1 2 0", 4).is_err());
    }
}
