use std::io::Write as _;
use std::path::{Path, PathBuf};

use rcache_core::equivalence::adapt_pp_to_reserves;
use rcache_core::gen::{generate_trace, TraceKind, TraceParams};
use rcache_core::hardness::{self, HardnessError};
use rcache_core::trace_io::{write_pp_schedule, write_schedule, write_trace};

use crate::error::{self, CliError};
use crate::{GenArgs, Kind};

/// `<out>.<suffix>`, keeping the full file name of `out`.
pub fn side_file(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

fn hardness_error(e: HardnessError) -> CliError {
    match e {
        HardnessError::NoRoom { .. } | HardnessError::Replay(_) => CliError::invariant(e),
        _ => CliError::validation(e),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => error::write(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn gen_hardness(args: &GenArgs) -> Result<(), CliError> {
    let cnf = args
        .cnf
        .as_deref()
        .ok_or_else(|| CliError::Validation("--kind hardness needs --cnf".into()))?;
    let out = args
        .out
        .as_deref()
        .ok_or_else(|| CliError::Validation("--kind hardness needs --out".into()))?;
    let formula = hardness::parse_dimacs(&error::read(cnf)?).map_err(hardness_error)?;
    let h = hardness::generate_instance(&formula).map_err(hardness_error)?;
    error::write(out, &write_trace(&h.instance))?;
    error::write(&side_file(out, "prov"), &h.provenance_text())?;
    println!(
        "n={} m={} agents={} k={} C'={} C={} requests={}",
        formula.n,
        formula.m(),
        h.instance.config.m(),
        h.instance.config.k,
        h.c_prime,
        h.c,
        h.instance.trace.len()
    );
    if let Some(path) = &args.assignment {
        let x =
            hardness::parse_assignment(&error::read(path)?, formula.n).map_err(hardness_error)?;
        let steps = hardness::synthesize_strategy(&h, &x).map_err(hardness_error)?;
        let (ledger, _) = hardness::replay_strategy(&h, &steps).map_err(hardness_error)?;
        error::write(&side_file(out, "pp.schedule"), &write_pp_schedule(&steps))?;
        let reserves = adapt_pp_to_reserves(&h.instance, &steps).map_err(CliError::invariant)?;
        error::write(
            &side_file(out, "schedule"),
            &write_schedule(&reserves.schedule),
        )?;
        println!(
            "strategy misses={} evictions={} (reserves model evictions={}) budget C={}",
            ledger.misses,
            ledger.evictions,
            reserves.evictions(),
            h.c
        );
    }
    Ok(())
}

pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let kind = match args.kind {
        Kind::Hardness => return gen_hardness(args),
        Kind::Zipf => TraceKind::Zipf,
        Kind::Uniform => TraceKind::Uniform,
        Kind::Adversarial => TraceKind::Adversarial,
    };
    let reserves = args
        .reserves
        .clone()
        .unwrap_or_else(|| vec![args.reserve; args.agents]);
    let sum: usize = reserves.iter().sum();
    let k = args.k.unwrap_or(sum + 2);
    if k == 0 || sum >= k {
        return Err(CliError::Validation(format!(
            "reserves sum to {sum}, which must be below k = {k}"
        )));
    }
    if let Some(r) = reserves.iter().find(|&&r| r > args.pages_per_agent) {
        return Err(CliError::Validation(format!(
            "reserve {r} exceeds --pages-per-agent {}",
            args.pages_per_agent
        )));
    }
    let params = TraceParams {
        k,
        reserves,
        pages_per_agent: args.pages_per_agent,
        length: args.length,
        seed: args.seed,
    };
    emit(
        args.out.as_deref(),
        &write_trace(&generate_trace(kind, &params)),
    )
}
