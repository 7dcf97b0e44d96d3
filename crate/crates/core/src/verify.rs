//! Property suites over seeded random instances.
//!
//! Each suite checks one family of guarantees on instances small enough for
//! the exact oracle and reports one row per instance. Rows are produced in
//! parallel and returned in index order, so the CSV output depends only on
//! the configuration (except the trailing wall-time column).

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::equivalence::{adapt_pp_to_reserves, adapt_reserves_to_pp};
use crate::fractional::{run_fractional, FractionalAudit};
use crate::gen::{exhaustive_instances, random_small_instance, SmallShape};
use crate::hardness::{self, CnfFormula};
use crate::model::Instance;
use crate::offline::{audit_potential, run_offline};
use crate::oracle::{solve_pp_opt, solve_reserves_opt, OracleError, OracleLimits};
use crate::policies::{run_lru, run_random_pp, run_random_reserves};
use crate::rounding::{run_rounding, sample_integral_run, DEFAULT_SUPPORT_CAP};

pub const CSV_VERSION: &str = "rcache-verify/1";
pub const CSV_COLUMNS: &str = "suite,index,k,m,n,len,alg,opt,ratio,pass,detail,wall_us";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Offline,
    Exhaustive,
    Fractional,
    Rounding,
    Equiv,
    Hardness,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Offline,
        Suite::Exhaustive,
        Suite::Fractional,
        Suite::Rounding,
        Suite::Equiv,
        Suite::Hardness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Offline => "offline",
            Suite::Exhaustive => "exhaustive",
            Suite::Fractional => "fractional",
            Suite::Rounding => "rounding",
            Suite::Equiv => "equiv",
            Suite::Hardness => "hardness",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    /// Random instances per suite.
    pub instances: usize,
    pub seed: u64,
    pub limits: OracleLimits,
    pub shape: SmallShape,
    /// Seeds per instance for the sampled-run check.
    pub samples: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            instances: 100,
            seed: 1,
            limits: OracleLimits::default(),
            shape: SmallShape::default(),
            samples: 1000,
            workers: None,
        }
    }
}

/// One checked instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub suite: Suite,
    pub index: usize,
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub len: usize,
    pub alg: String,
    pub opt: String,
    pub ratio: String,
    pub pass: bool,
    pub detail: String,
    pub wall_us: u128,
}

impl Row {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.suite.name(),
            self.index,
            self.k,
            self.m,
            self.n,
            self.len,
            self.alg,
            self.opt,
            self.ratio,
            self.pass,
            self.detail.replace(',', ";"),
            self.wall_us
        )
    }
}

#[derive(Clone, Debug)]
pub struct Failure {
    pub suite: Suite,
    pub index: usize,
    pub detail: String,
    /// Smallest failing instance found by request deletion, if the failure
    /// is tied to an instance.
    pub counterexample: Option<Instance>,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: Suite,
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// What a single check found.
struct Outcome {
    alg: String,
    opt: String,
    ratio: String,
    problems: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            alg: String::new(),
            opt: String::new(),
            ratio: String::new(),
            problems: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.problems.push(what());
        }
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.9}")
}

fn ratio(alg: f64, opt: u64) -> String {
    if opt == 0 {
        String::new()
    } else {
        format!("{:.6}", alg / opt as f64)
    }
}

/// Instance `index` of a suite: a function of `(seed, index)` only.
pub fn instance_at(seed: u64, index: usize, shape: &SmallShape) -> Instance {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64);
    random_small_instance(&mut rng, shape)
}

fn oracle(inst: &Instance, limits: &OracleLimits) -> Result<crate::oracle::OracleSolution, String> {
    solve_reserves_opt(inst, limits).map_err(|e| format!("oracle: {e}"))
}

fn check_offline(inst: &Instance, cfg: &VerifyConfig) -> Outcome {
    let mut out = Outcome::new();
    let opt = match oracle(inst, &cfg.limits) {
        Ok(o) => o,
        Err(e) => {
            out.problems.push(e);
            return out;
        }
    };
    let alg = match run_offline(inst) {
        Ok(a) => a,
        Err(e) => {
            out.problems.push(format!("offline: {e}"));
            return out;
        }
    };
    out.alg = alg.misses().to_string();
    out.opt = opt.misses.to_string();
    out.ratio = ratio(alg.misses() as f64, opt.misses);
    out.require(alg.misses() <= 2 * opt.misses, || {
        format!("misses {} > 2 x {}", alg.misses(), opt.misses)
    });
    if inst.config.m() == 1 && inst.config.reserve_sum() == 0 {
        out.require(alg.misses() == opt.misses, || {
            format!(
                "single agent without reserve: {} != {}",
                alg.misses(),
                opt.misses
            )
        });
    }
    match audit_potential(inst, &alg.evictions, &opt.schedule) {
        Ok(report) => {
            if let Some(s) = report.first_failure() {
                out.problems.push(format!(
                    "audit t={} dALG={} dPHI={} dOPT={} phi={} substeps={:?}",
                    s.t, s.d_alg, s.d_phi, s.d_opt, s.phi, s.substep_failures
                ));
            }
        }
        Err(e) => out.problems.push(format!("audit: {e}")),
    }
    out
}

fn check_fractional(inst: &Instance, cfg: &VerifyConfig) -> Outcome {
    let mut out = Outcome::new();
    let opt = match oracle(inst, &cfg.limits) {
        Ok(o) => o,
        Err(e) => {
            out.problems.push(e);
            return out;
        }
    };
    let run = match run_fractional(inst) {
        Ok(r) => r,
        Err(e) => {
            out.problems.push(format!("fractional: {e}"));
            return out;
        }
    };
    let k = inst.config.k;
    let a = &run.audit;
    let bound = 2.0 * ((k + 1) as f64).ln() * opt.misses as f64;
    out.alg = fmt_f(run.cost());
    out.opt = opt.misses.to_string();
    out.ratio = ratio(run.cost(), opt.misses);
    out.require(a.ratio_holds(), || {
        format!("primal - 2 dual = {:e}", a.worst_ratio_gap)
    });
    out.require(
        a.worst_dual_violation <= FractionalAudit::dual_violation_bound(k),
        || format!("dual violation {:.9} > ln(k+1)", a.worst_dual_violation),
    );
    out.require(a.holds(k), || format!("invariants: {a:?}"));
    out.require(run.cost() <= bound + 1e-6, || {
        format!("cost {:.9} > 2 ln(k+1) OPT = {bound:.9}", run.cost())
    });
    out.notes
        .push(format!("dualviol={:.9}", a.worst_dual_violation.max(0.0)));
    out
}

fn check_rounding(inst: &Instance, cfg: &VerifyConfig) -> Outcome {
    let mut out = Outcome::new();
    let frac = match run_fractional(inst) {
        Ok(r) => r,
        Err(e) => {
            out.problems.push(format!("fractional: {e}"));
            return out;
        }
    };
    let run = match run_rounding(inst, &frac, DEFAULT_SUPPORT_CAP) {
        Ok(r) => r,
        Err(e) => {
            out.problems.push(format!("rounding: {e}"));
            return out;
        }
    };
    out.alg = fmt_f(run.expected_misses());
    out.opt = fmt_f(frac.steps.iter().map(|s| s.fetched).sum());
    out.require(run.max_marginal_error() <= 1e-7, || {
        format!("marginal error {:e}", run.max_marginal_error())
    });
    out.require(run.all_feasible(), || "infeasible support state".into());
    let excess = run.worst_move_excess();
    out.require(excess <= 1e-9, || {
        format!("move cost exceeds 4 eps by {excess:e}")
    });
    for s in &run.steps {
        if s.expected_cost > 4.0 * s.fractional_cost + 1e-9 {
            out.problems.push(format!(
                "t={} step cost {:.9} > 4 x {:.9}",
                s.t, s.expected_cost, s.fractional_cost
            ));
            break;
        }
    }
    let mut moves = 0;
    for s in &run.steps {
        moves += s.moves.len();
        if s.support_size > 1 + 3 * moves {
            out.problems.push(format!(
                "t={} support {} > 1 + 3 x {moves}",
                s.t, s.support_size
            ));
            break;
        }
        for mv in &s.moves {
            if mv.eps1 > mv.eps + 1e-12 || mv.eps2 > mv.eps + 1e-12 || mv.eps3 > mv.eps1 + 1e-12 {
                out.problems.push(format!("t={} phase masses {mv:?}", s.t));
            }
        }
    }
    if cfg.samples > 1 {
        let expected = run.expected_misses();
        let xs: Vec<f64> = (0..cfg.samples)
            .map(|s| {
                let r = sample_integral_run(&run, s);
                if !r.states_feasible {
                    out.problems.push(format!("sample {s} left the support"));
                }
                r.misses as f64
            })
            .collect();
        let cnt = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / cnt;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (cnt - 1.0);
        let se = (var / cnt).sqrt();
        out.require((mean - expected).abs() <= 3.0 * se + 1e-9, || {
            format!("sample mean {mean:.6} vs expectation {expected:.6} (se {se:.6})")
        });
        out.notes.push(format!("sample_mean={mean:.6}"));
    }
    out
}

fn check_equiv(inst: &Instance, cfg: &VerifyConfig, index: usize) -> Outcome {
    let mut out = Outcome::new();
    let seed = cfg.seed ^ index as u64;
    let mut run = || -> Result<(), String> {
        let pp = run_random_pp(inst, seed).map_err(|e| format!("random pp: {e}"))?;
        let pp_opt = solve_pp_opt(inst, &cfg.limits).map_err(|e| format!("pp oracle: {e}"))?;
        for (name, steps) in [("random", &pp.steps), ("opt", &pp_opt.steps)] {
            let e = adapt_pp_to_reserves(inst, steps).map_err(|e| format!("tau_e({name}): {e}"))?;
            crate::state::replay_reserves(inst, &e.schedule)
                .map_err(|e| format!("tau_e({name}) replay: {e}"))?;
            out.require(e.evictions() == e.inner.evictions, || {
                format!(
                    "tau_e({name}) evictions {} != {}",
                    e.evictions(),
                    e.inner.evictions
                )
            });
        }
        let offline = run_offline(inst).map_err(|e| e.to_string())?;
        let inners = [
            ("offline", offline.evictions.clone()),
            ("lru", run_lru(inst).map_err(|e| e.to_string())?.evictions),
            (
                "random",
                run_random_reserves(inst, seed)
                    .map_err(|e| e.to_string())?
                    .evictions,
            ),
            ("opt", oracle(inst, &cfg.limits)?.schedule),
        ];
        for (name, inner) in &inners {
            let h = adapt_reserves_to_pp(inst, inner).map_err(|e| format!("tau_h({name}): {e}"))?;
            crate::state::replay_pp(inst, &h.steps)
                .map_err(|e| format!("tau_h({name}) replay: {e}"))?;
            out.require(h.evictions() <= 2 * h.inner_evictions(), || {
                format!(
                    "tau_h({name}) evictions {} > 2 x {}",
                    h.evictions(),
                    h.inner_evictions()
                )
            });
            out.require(h.max_extra_per_step() <= 1, || {
                format!("tau_h({name}) extra evictions in one step")
            });
        }
        let h = adapt_reserves_to_pp(inst, &offline.evictions).map_err(|e| e.to_string())?;
        let cost = h.ledger.pp_cost();
        out.alg = cost.to_string();
        out.opt = pp_opt.cost.to_string();
        out.ratio = ratio(cost as f64, pp_opt.cost);
        out.require(cost <= 4 * pp_opt.cost, || {
            format!("offline via tau_h costs {cost} > 4 x {}", pp_opt.cost)
        });
        Ok(())
    };
    if let Err(e) = run() {
        out.problems.push(e);
    }
    out
}

/// Greedily deletes requests while `fails` keeps holding.
pub fn minimize(instance: &Instance, fails: impl Fn(&Instance) -> bool) -> Instance {
    let mut cur = instance.clone();
    let mut i = 0;
    while i < cur.trace.len() {
        let mut cand = cur.clone();
        cand.trace.requests.remove(i);
        if fails(&cand) {
            cur = cand;
        } else {
            i += 1;
        }
    }
    cur
}

fn instance_row(suite: Suite, index: usize, inst: &Instance, out: &Outcome, wall_us: u128) -> Row {
    let mut detail = out.problems.join(" | ");
    if detail.is_empty() {
        detail = out.notes.join(" ");
    }
    Row {
        suite,
        index,
        k: inst.config.k,
        m: inst.config.m(),
        n: inst.config.n(),
        len: inst.trace.len(),
        alg: out.alg.clone(),
        opt: out.opt.clone(),
        ratio: out.ratio.clone(),
        pass: out.problems.is_empty(),
        detail,
        wall_us,
    }
}

fn random_suite(suite: Suite, cfg: &VerifyConfig) -> SuiteReport {
    let check = |inst: &Instance, index: usize| match suite {
        Suite::Offline => check_offline(inst, cfg),
        Suite::Fractional => check_fractional(inst, cfg),
        Suite::Rounding => check_rounding(inst, cfg),
        Suite::Equiv => check_equiv(inst, cfg, index),
        _ => unreachable!("not an instance suite"),
    };
    let results: Vec<(Row, Option<Failure>)> = (0..cfg.instances)
        .into_par_iter()
        .map(|index| {
            let inst = instance_at(cfg.seed, index, &cfg.shape);
            let start = Instant::now();
            let out = check(&inst, index);
            let row = instance_row(suite, index, &inst, &out, start.elapsed().as_micros());
            let failure = (!row.pass).then(|| {
                // Shrink without the sampled-run check; it is statistical.
                let quick = VerifyConfig {
                    samples: 0,
                    ..cfg.clone()
                };
                let fails = |i: &Instance| {
                    !match suite {
                        Suite::Offline => check_offline(i, &quick),
                        Suite::Fractional => check_fractional(i, &quick),
                        Suite::Rounding => check_rounding(i, &quick),
                        _ => check_equiv(i, &quick, index),
                    }
                    .problems
                    .is_empty()
                };
                let cex = if fails(&inst) {
                    minimize(&inst, fails)
                } else {
                    inst.clone()
                };
                Failure {
                    suite,
                    index,
                    detail: row.detail.clone(),
                    counterexample: Some(cex),
                }
            });
            (row, failure)
        })
        .collect();
    let mut report = SuiteReport {
        suite,
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (row, failure) in results {
        report.rows.push(row);
        report.failures.extend(failure);
    }
    report
}

/// Shapes covered by the exhaustive sweep: every `(k, reserves)` with at most
/// three agents, `k ≤ 4`, reserves summing below `k`.
pub fn exhaustive_configs() -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    for k in 1..=4 {
        for m in 1..=3usize {
            let mut reserves = vec![0; m];
            loop {
                if reserves.iter().sum::<usize>() < k {
                    out.push((k, reserves.clone()));
                }
                let mut i = 0;
                while i < m && reserves[i] == k - 1 {
                    reserves[i] = 0;
                    i += 1;
                }
                if i == m {
                    break;
                }
                reserves[i] += 1;
            }
        }
    }
    out
}

/// Offline checks on every instance with at most `max_pages` pages and
/// `max_len` requests; one row per cache shape.
fn exhaustive_suite(cfg: &VerifyConfig, max_pages: usize, max_len: usize) -> SuiteReport {
    let configs = exhaustive_configs();
    let results: Vec<(Row, Option<Failure>)> = configs
        .par_iter()
        .enumerate()
        .map(|(index, (k, reserves))| {
            let start = Instant::now();
            let all = exhaustive_instances(max_pages, max_len, &[(*k, reserves.clone())]);
            let (mut alg, mut opt, mut bad) = (0u64, 0u64, None);
            for inst in &all {
                let out = check_offline(inst, cfg);
                alg += out.alg.parse::<u64>().unwrap_or(0);
                opt += out.opt.parse::<u64>().unwrap_or(0);
                if !out.problems.is_empty() && bad.is_none() {
                    bad = Some((inst.clone(), out.problems.join(" | ")));
                }
            }
            let reserves_txt: Vec<String> = reserves.iter().map(|r| r.to_string()).collect();
            let row = Row {
                suite: Suite::Exhaustive,
                index,
                k: *k,
                m: reserves.len(),
                n: max_pages,
                len: max_len,
                alg: alg.to_string(),
                opt: opt.to_string(),
                ratio: ratio(alg as f64, opt),
                pass: bad.is_none(),
                detail: match &bad {
                    None => format!(
                        "instances={} reserves={}",
                        all.len(),
                        reserves_txt.join(" ")
                    ),
                    Some((_, d)) => d.clone(),
                },
                wall_us: start.elapsed().as_micros(),
            };
            let failure = bad.map(|(inst, detail)| Failure {
                suite: Suite::Exhaustive,
                index,
                detail,
                counterexample: Some(inst),
            });
            (row, failure)
        })
        .collect();
    let mut report = SuiteReport {
        suite: Suite::Exhaustive,
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (row, failure) in results {
        report.rows.push(row);
        report.failures.extend(failure);
    }
    report
}

/// Total number of instances in the exhaustive sweep.
pub fn exhaustive_count(max_pages: usize, max_len: usize) -> usize {
    exhaustive_instances(max_pages, max_len, &exhaustive_configs()).len()
}

fn hardness_row(index: usize, f: &CnfFormula, start: Instant) -> Row {
    let (n, m) = (f.n, f.m());
    let mut problems = Vec::new();
    let mut alg = String::new();
    let mut notes = Vec::new();
    let (mut k, mut agents, mut len) = (0, 0, 0);
    match hardness::generate_instance(f) {
        Err(e) => problems.push(e.to_string()),
        Ok(h) => {
            k = h.instance.config.k;
            agents = h.instance.config.m();
            len = h.instance.trace.len();
            if len as u64 != hardness::expected_length(n, m) {
                problems.push(format!(
                    "length {len} != {}",
                    hardness::expected_length(n, m)
                ));
            }
            if h.gadgets.iter().map(|g| g.len).sum::<usize>() != len {
                problems.push("gadget sizes do not sum to the trace length".into());
            }
            if let Some(g) = h
                .gadgets
                .iter()
                .chain(&h.public_blocks)
                .find(|g| g.len != g.expected_len)
            {
                problems.push(format!(
                    "{} has {} requests, expected {}",
                    g.name, g.len, g.expected_len
                ));
            }
            let ones = h
                .instance
                .config
                .reserves
                .iter()
                .filter(|&&r| r == 1)
                .count();
            if ones != n
                || agents != n + 4 * m + 3
                || k - h.instance.config.reserve_sum() != n / 2 + 2
            {
                problems.push("reserve structure".into());
            }
            notes.push(format!(
                "C'={} C={} exact={}",
                h.c_prime,
                h.c,
                hardness::strategy_misses(n, m)
            ));
            if let Some(x) = f.find_balanced_assignment() {
                match hardness::synthesize_strategy(&h, &x)
                    .and_then(|s| hardness::replay_strategy(&h, &s))
                {
                    Err(e) => problems.push(e.to_string()),
                    Ok((ledger, hits)) => {
                        alg = ledger.misses.to_string();
                        if ledger.misses > h.c {
                            problems
                                .push(format!("strategy misses {} > C = {}", ledger.misses, h.c));
                        }
                        if ledger.misses != hardness::strategy_misses(n, m) {
                            problems.push(format!(
                                "strategy misses {} != {}",
                                ledger.misses,
                                hardness::strategy_misses(n, m)
                            ));
                        }
                        let deg = f.degrees();
                        if (1..=n).any(|i| hits[i] != 2 * deg[i] as u64 + 3) {
                            problems.push("per-agent hits differ from 2 deg + 3".into());
                        }
                    }
                }
            } else {
                notes.push("no balanced assignment".into());
            }
        }
    }
    Row {
        suite: Suite::Hardness,
        index,
        k,
        m: agents,
        n,
        len,
        alg,
        opt: hardness::c_budget(n, m).to_string(),
        ratio: String::new(),
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            notes.join(" ")
        } else {
            problems.join(" | ")
        },
        wall_us: start.elapsed().as_micros(),
    }
}

/// Row 0 is the four-variable, one-clause example; then `instances` random
/// formulas with `n ≤ 10`, `m ≤ 4` (at least 50 when `instances > 0`).
fn hardness_suite(cfg: &VerifyConfig) -> SuiteReport {
    let mut formulas = Vec::new();
    if cfg.instances > 0 {
        formulas.push(hardness::parse_dimacs("p cnf 4 1\n1 2 -3 0\n").expect("literal formula"));
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.instances.max(50) {
            let n = 2 * rng.gen_range(2..=5);
            let m = rng.gen_range(1..=4);
            formulas.push(CnfFormula::random(&mut rng, n, m));
        }
    }
    let rows: Vec<Row> = formulas
        .par_iter()
        .enumerate()
        .map(|(i, f)| hardness_row(i, f, Instant::now()))
        .collect();
    let failures = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| Failure {
            suite: Suite::Hardness,
            index: r.index,
            detail: r.detail.clone(),
            counterexample: None,
        })
        .collect();
    SuiteReport {
        suite: Suite::Hardness,
        rows,
        failures,
    }
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> SuiteReport {
    let go = || match suite {
        Suite::Exhaustive if cfg.instances == 0 => SuiteReport {
            suite,
            rows: Vec::new(),
            failures: Vec::new(),
        },
        Suite::Exhaustive => exhaustive_suite(cfg, 4, 6),
        Suite::Hardness => hardness_suite(cfg),
        _ => random_suite(suite, cfg),
    };
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(go),
        None => go(),
    }
}

/// CSV text: a version comment, the column header, then all rows.
pub fn to_csv(reports: &[SuiteReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {CSV_VERSION}");
    let _ = writeln!(s, "{CSV_COLUMNS}");
    for r in reports {
        for row in &r.rows {
            let _ = writeln!(s, "{}", row.csv_line());
        }
    }
    s
}

/// CSV with the wall-time column removed, for byte comparisons.
pub fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            if l.starts_with('#') {
                l
            } else {
                l.rsplit_once(',').map_or(l, |(head, _)| head)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// One summary line per suite.
pub fn summary(reports: &[SuiteReport]) -> String {
    let mut s = format!(
        "{:<12} {:>9} {:>9}  {}\n",
        "suite", "instances", "failures", "status"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<12} {:>9} {:>9}  {}",
            r.suite.name(),
            r.rows.len(),
            r.failures.len(),
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    s
}

/// Whether an oracle error means the instance was simply too large.
pub fn is_limit_error(e: &OracleError) -> bool {
    matches!(e, OracleError::LimitsExceeded { .. })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn zero_instances_is_vacuous() {
        let cfg = VerifyConfig {
            instances: 0,
            ..Default::default()
        };
        for s in Suite::ALL {
            let r = run_suite(s, &cfg);
            assert!(r.rows.is_empty() && r.passed(), "{s:?}");
        }
    }

    #[test]
    fn rows_are_deterministic() {
        let cfg = VerifyConfig {
            instances: 8,
            samples: 50,
            ..Default::default()
        };
        for s in [
            Suite::Offline,
            Suite::Fractional,
            Suite::Rounding,
            Suite::Equiv,
        ] {
            let a = to_csv(&[run_suite(s, &cfg)]);
            let b = to_csv(&[run_suite(s, &cfg)]);
            assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
        }
    }

    #[test]
    fn minimize_keeps_failure() {
        let inst = instance_at(3, 0, &SmallShape::default());
        let long = inst.trace.len();
        // "Fails" while at least two requests remain.
        let small = minimize(&inst, |i| i.trace.len() >= 2);
        assert_eq!(small.trace.len(), 2.min(long));
    }

    #[test]
    fn exhaustive_configs_respect_reserve_sum() {
        let c = exhaustive_configs();
        assert!(c
            .iter()
            .all(|(k, r)| r.iter().sum::<usize>() < *k && r.len() <= 3));
        assert!(c.contains(&(1, vec![0])));
    }
}
