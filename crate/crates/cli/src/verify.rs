use rcache_core::gen::SmallShape;
use rcache_core::trace_io::write_trace;
use rcache_core::verify::{run_suite, summary, to_csv, Suite, VerifyConfig};

use crate::error::{self, CliError};
use crate::VerifyArgs;

pub fn parse_suites(list: &str) -> Result<Vec<Suite>, CliError> {
    if list == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    list.split(',')
        .map(|s| s.trim().parse::<Suite>().map_err(CliError::Validation))
        .collect()
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let suites = parse_suites(&args.suite)?;
    let limits = args.limits.resolve()?;
    let shape = SmallShape {
        max_pages: limits.max_pages,
        max_k: limits.max_k,
        max_len: limits.max_len,
        ..SmallShape::default()
    };
    let cfg = VerifyConfig {
        instances: args.instances,
        seed: args.seed,
        limits,
        shape,
        samples: args.samples,
        workers: args.workers,
    };
    let reports: Vec<_> = suites.iter().map(|&s| run_suite(s, &cfg)).collect();
    print!("{}", summary(&reports));
    error::write(&args.out, &to_csv(&reports))?;

    let mut failed = 0;
    for f in reports.iter().flat_map(|r| &r.failures) {
        failed += 1;
        eprintln!("{} #{}: {}", f.suite.name(), f.index, f.detail);
        if let Some(inst) = &f.counterexample {
            let path = args.dump_dir.join(format!(
                "counterexample-{}-{}.trace",
                f.suite.name(),
                f.index
            ));
            error::write(&path, &write_trace(inst))?;
            eprintln!(
                "  minimized trace ({} requests): {}",
                inst.trace.len(),
                path.display()
            );
        }
    }
    if failed > 0 {
        return Err(CliError::Invariant(format!("{failed} failing instance(s)")));
    }
    Ok(())
}
