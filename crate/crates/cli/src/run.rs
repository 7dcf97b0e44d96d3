use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rcache_core::equivalence::{adapt_pp_to_reserves, adapt_reserves_to_pp, EquivError};
use rcache_core::fractional::{run_fractional, FractionalAudit, FractionalError};
use rcache_core::offline::{audit_potential, run_offline};
use rcache_core::oracle::{solve_pp_opt, solve_reserves_opt, OracleLimits, OracleSolution};
use rcache_core::policies::run_lru;
use rcache_core::rounding::{run_rounding, sample_integral_run, DEFAULT_SUPPORT_CAP};
use rcache_core::trace_io::{
    parse_pp_schedule, parse_schedule, parse_trace, write_pp_schedule, write_schedule,
};
use rcache_core::{Eviction, Instance};

use crate::error::{self, CliError};
use crate::{Algo, Direction, EquivArgs, RunArgs};

pub const RUN_CSV_VERSION: &str = "rcache-run/1";
pub const RUN_CSV_COLUMNS: &str =
    "algorithm,trace,T,distinct_pages,misses,fractional_cost,opt,ratio,notes,wall_us";

/// Outcome of one `run`. Ratio fields are empty unless the optimum was computed.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub algorithm: String,
    pub trace: String,
    pub len: usize,
    pub distinct: usize,
    /// Integer for integral algorithms, nine decimals for fractional ones.
    pub misses: String,
    pub fractional_cost: String,
    pub opt: Option<u64>,
    pub ratio: String,
    pub notes: Vec<String>,
    pub wall_us: u128,
}

impl RunReport {
    pub fn csv(&self) -> String {
        format!(
            "# {RUN_CSV_VERSION}\n{RUN_CSV_COLUMNS}\n{},{},{},{},{},{},{},{},{},{}\n",
            self.algorithm,
            self.trace,
            self.len,
            self.distinct,
            self.misses,
            self.fractional_cost,
            self.opt.map(|o| o.to_string()).unwrap_or_default(),
            self.ratio,
            self.notes.join(" "),
            self.wall_us
        )
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let mut row = |k: &str, v: &str| {
            if !v.is_empty() {
                let _ = writeln!(s, "{k:<16}{v}");
            }
        };
        row("algorithm", &self.algorithm);
        row("trace", &self.trace);
        row("requests", &self.len.to_string());
        row("distinct pages", &self.distinct.to_string());
        row("misses", &self.misses);
        row("fractional cost", &self.fractional_cost);
        row("opt", &self.opt.map(|o| o.to_string()).unwrap_or_default());
        row("ratio", &self.ratio);
        row("notes", &self.notes.join(" "));
        row("wall time", &format!("{} us", self.wall_us));
        s
    }
}

pub fn load_instance(path: &Path) -> Result<Instance, CliError> {
    let text = error::read(path)?;
    let inst =
        parse_trace(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let report = inst.validate();
    if !report.is_ok() {
        return Err(CliError::Validation(format!(
            "{}: {report}",
            path.display()
        )));
    }
    Ok(inst)
}

fn oracle(inst: &Instance, limits: &OracleLimits) -> Result<OracleSolution, CliError> {
    solve_reserves_opt(inst, limits).map_err(CliError::validation)
}

fn fractional_error(e: FractionalError) -> CliError {
    match e {
        FractionalError::Invalid(_) | FractionalError::ReserveExceedsUniverse { .. } => {
            CliError::validation(e)
        }
        _ => CliError::invariant(e),
    }
}

fn write_eviction_schedule(path: Option<&Path>, schedule: &[Eviction]) -> Result<(), CliError> {
    match path {
        Some(p) => error::write(p, &write_schedule(schedule)),
        None => Ok(()),
    }
}

pub fn execute(args: &RunArgs, inst: &Instance) -> Result<RunReport, CliError> {
    let limits = args.limits.resolve()?;
    let start = Instant::now();
    let k = inst.config.k;
    let mut r = RunReport {
        algorithm: format!("{:?}", args.algo).to_lowercase(),
        trace: args
            .trace
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        len: inst.trace.len(),
        distinct: inst.trace.distinct_pages().len(),
        ..Default::default()
    };
    let schedule_path = args.schedule.as_deref();
    let mut value = 0.0;
    match args.algo {
        Algo::Offline => {
            let run = run_offline(inst).map_err(CliError::invariant)?;
            value = run.misses() as f64;
            r.misses = run.misses().to_string();
            write_eviction_schedule(schedule_path, &run.evictions)?;
            if args.audit {
                let opt = oracle(inst, &limits)?;
                let audit = audit_potential(inst, &run.evictions, &opt.schedule)
                    .map_err(CliError::invariant)?;
                if let Some(s) = audit.first_failure() {
                    return Err(CliError::Invariant(format!(
                        "potential audit fails at t={}: dALG={} dPHI={} dOPT={} phi={}",
                        s.t, s.d_alg, s.d_phi, s.d_opt, s.phi
                    )));
                }
                r.notes.push(format!(
                    "audit=ok max_slack={} min_phi={}",
                    audit.max_slack(),
                    audit.min_phi
                ));
            }
        }
        Algo::Oracle => {
            let opt = oracle(inst, &limits)?;
            value = opt.misses as f64;
            r.misses = opt.misses.to_string();
            write_eviction_schedule(schedule_path, &opt.schedule)?;
        }
        Algo::Lru => {
            let run = run_lru(inst).map_err(CliError::invariant)?;
            value = run.ledger.misses as f64;
            r.misses = run.ledger.misses.to_string();
            r.notes.push("baseline".into());
            write_eviction_schedule(schedule_path, &run.evictions)?;
        }
        Algo::Fractional | Algo::Rounded if inst.trace.is_empty() => {
            r.misses = format!("{:.9}", 0.0);
            r.fractional_cost = format!("{:.9}", 0.0);
        }
        Algo::Fractional => {
            let run = run_fractional(inst).map_err(fractional_error)?;
            let misses: f64 = run.steps.iter().map(|s| s.fetched).sum();
            value = run.cost();
            r.misses = format!("{misses:.9}");
            r.fractional_cost = format!("{:.9}", run.cost());
            r.notes
                .push(format!("dualviol={:.9}", run.audit.worst_dual_violation));
            if args.audit {
                let a = &run.audit;
                if !a.holds(k) {
                    return Err(CliError::Invariant(format!("fractional invariants: {a:?}")));
                }
                r.notes.push(format!(
                    "audit=ok primal_minus_2dual={:.3e} dualviol_bound={:.9}",
                    a.worst_ratio_gap,
                    FractionalAudit::dual_violation_bound(k)
                ));
            }
        }
        Algo::Rounded => {
            let frac = run_fractional(inst).map_err(fractional_error)?;
            let run =
                run_rounding(inst, &frac, DEFAULT_SUPPORT_CAP).map_err(CliError::invariant)?;
            let sample = sample_integral_run(&run, args.seed);
            value = run.expected_misses();
            r.misses = format!("{:.9}", run.expected_misses());
            r.fractional_cost = format!("{:.9}", frac.cost());
            r.notes
                .push(format!("expected_evictions={:.9}", run.expected_cost()));
            r.notes.push(format!(
                "sampled_misses={} seed={}",
                sample.misses, args.seed
            ));
            if args.audit {
                if run.max_marginal_error() > 1e-7 {
                    return Err(CliError::Invariant(format!(
                        "marginal error {:e}",
                        run.max_marginal_error()
                    )));
                }
                if !run.all_feasible() || !sample.states_feasible {
                    return Err(CliError::Invariant(
                        "a support state breaks a reserve".into(),
                    ));
                }
                if run.worst_move_excess() > 1e-9 {
                    return Err(CliError::Invariant(format!(
                        "move cost exceeds 4 eps by {:e}",
                        run.worst_move_excess()
                    )));
                }
                r.notes.push(format!(
                    "audit=ok marginal_error={:.3e}",
                    run.max_marginal_error()
                ));
            }
        }
    }
    if args.opt {
        let opt = oracle(inst, &limits)?.misses;
        r.opt = Some(opt);
        if opt > 0 {
            r.ratio = format!("{:.6}", value / opt as f64);
        }
    }
    r.wall_us = start.elapsed().as_micros();
    Ok(r)
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let inst = load_instance(&args.trace)?;
    let report = execute(args, &inst)?;
    print!("{}", report.table());
    if let Some(out) = &args.out {
        error::write(out, &report.csv())?;
    }
    Ok(())
}

fn equiv_error(e: EquivError) -> CliError {
    match e {
        EquivError::Internal { .. } => CliError::invariant(e),
        _ => CliError::validation(e),
    }
}

pub fn cmd_equiv(args: &EquivArgs) -> Result<(), CliError> {
    let inst = load_instance(&args.trace)?;
    let limits = args.limits.resolve()?;
    let bad_schedule = |e| CliError::Validation(format!("schedule: {e}"));
    let (text, summary) = match args.direction {
        Direction::ToPp => {
            let inner = match &args.schedule {
                Some(p) => parse_schedule(&error::read(p)?).map_err(bad_schedule)?,
                None => run_offline(&inst).map_err(CliError::invariant)?.evictions,
            };
            let run = adapt_reserves_to_pp(&inst, &inner).map_err(equiv_error)?;
            let summary = format!(
                "reserves evictions {} -> public-private evictions {} (misses {}, relocations {})",
                run.inner_evictions(),
                run.evictions(),
                run.ledger.misses,
                run.ledger.relocations
            );
            (write_pp_schedule(&run.steps), summary)
        }
        Direction::ToReserves => {
            let inner = match &args.schedule {
                Some(p) => parse_pp_schedule(&error::read(p)?).map_err(bad_schedule)?,
                None => {
                    solve_pp_opt(&inst, &limits)
                        .map_err(CliError::validation)?
                        .steps
                }
            };
            let run = adapt_pp_to_reserves(&inst, &inner).map_err(equiv_error)?;
            let summary = format!(
                "public-private evictions {} -> reserves evictions {} (misses {})",
                run.inner.evictions,
                run.evictions(),
                run.ledger.misses
            );
            (write_schedule(&run.schedule), summary)
        }
    };
    match &args.out {
        Some(p) => {
            error::write(p, &text)?;
            println!("{summary}");
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}
