use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn rcache(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcache"))
        .args(args)
        .current_dir(dir)
        .env_remove("RCACHE_ORACLE_LIMITS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .map(|v| v.trim().to_string())
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
}

fn without_wall_time(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(h, _)| h).to_string())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn zipf_generation_is_seeded() {
    let d = TempDir::new().unwrap();
    for out in ["a.trace", "b.trace"] {
        let o = rcache(
            d.path(),
            &["gen", "--kind", "zipf", "--seed", "7", "--out", out],
        );
        assert!(o.status.success());
    }
    let a = fs::read_to_string(d.path().join("a.trace")).unwrap();
    assert_eq!(a, fs::read_to_string(d.path().join("b.trace")).unwrap());
    assert!(a.lines().count() > 100);
}

#[test]
fn empty_uniform_trace_is_header_only() {
    let d = TempDir::new().unwrap();
    let o = rcache(d.path(), &["gen", "--kind", "uniform", "--length", "0"]);
    assert!(o.status.success());
    let body: Vec<String> = stdout(&o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(body, vec!["4 2 1 1"]);
}

#[test]
fn empty_trace_runs_with_zero_misses() {
    let d = TempDir::new().unwrap();
    write(d.path(), "e.trace", "3 2 1 1\n");
    for algo in ["offline", "oracle", "fractional", "rounded", "lru"] {
        let o = rcache(d.path(), &["run", "--algo", algo, "--trace", "e.trace"]);
        assert!(o.status.success(), "{algo}");
        assert_eq!(
            field(&stdout(&o), "misses").parse::<f64>().unwrap(),
            0.0,
            "{algo}"
        );
    }
}

#[test]
fn offline_with_opt_reports_ratio_at_most_two() {
    let d = TempDir::new().unwrap();
    for seed in 0..10 {
        let seed = seed.to_string();
        let o = rcache(
            d.path(),
            &[
                "gen", "--kind", "uniform", "--length", "14", "--seed", &seed, "--out", "t.trace",
            ],
        );
        assert!(o.status.success());
        let o = rcache(
            d.path(),
            &[
                "run", "--algo", "offline", "--trace", "t.trace", "--opt", "--audit", "--out",
                "r.csv",
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let csv = fs::read_to_string(d.path().join("r.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# rcache-run/1");
        let header: Vec<&str> = lines[1].split(',').collect();
        let row: Vec<&str> = lines[2].split(',').collect();
        let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
        let (misses, opt): (u64, u64) =
            (col("misses").parse().unwrap(), col("opt").parse().unwrap());
        assert!(misses <= 2 * opt);
        assert!(col("ratio").parse::<f64>().unwrap() <= 2.0);
    }
}

#[test]
fn fractional_audit_reports_dual_violation() {
    let d = TempDir::new().unwrap();
    rcache(
        d.path(),
        &[
            "gen", "--kind", "zipf", "--length", "14", "--seed", "3", "--out", "t.trace",
        ],
    );
    let o = rcache(
        d.path(),
        &[
            "run",
            "--algo",
            "fractional",
            "--trace",
            "t.trace",
            "--audit",
        ],
    );
    assert!(o.status.success());
    let notes = field(&stdout(&o), "notes");
    let v: f64 = notes
        .split_whitespace()
        .find_map(|t| t.strip_prefix("dualviol="))
        .unwrap()
        .parse()
        .unwrap();
    // k = 4 for the default generator flags.
    assert!(v <= (5.0f64).ln() + 1e-6);
}

#[test]
fn hardness_instance_has_512_requests() {
    let d = TempDir::new().unwrap();
    write(d.path(), "f.cnf", "c example\np cnf 4 1\n1 2 -3 0\n");
    write(d.path(), "x.txt", "1 -2 -3 4 0\n");
    let o = rcache(
        d.path(),
        &[
            "gen",
            "--kind",
            "hardness",
            "--cnf",
            "f.cnf",
            "--assignment",
            "x.txt",
            "--out",
            "h.trace",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(d.path().join("h.trace")).unwrap();
    let body = trace.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(body, 512);
    let prov = fs::read_to_string(d.path().join("h.trace.prov")).unwrap();
    assert_eq!(prov.lines().filter(|l| !l.starts_with('#')).count(), 512);
    assert!(stdout(&o).contains("C=58"));
    for side in ["h.trace.pp.schedule", "h.trace.schedule"] {
        assert!(d.path().join(side).exists());
    }
    // The reserves-model schedule replays through `run`-compatible parsing.
    let o = rcache(
        d.path(),
        &[
            "equiv",
            "--trace",
            "h.trace",
            "--direction",
            "to-pp",
            "--schedule",
            "h.trace.schedule",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unbalanced_assignment_is_rejected() {
    let d = TempDir::new().unwrap();
    write(d.path(), "f.cnf", "p cnf 4 1\n1 2 -3 0\n");
    write(d.path(), "x.txt", "1 2 -3 4\n");
    let o = rcache(
        d.path(),
        &[
            "gen",
            "--kind",
            "hardness",
            "--cnf",
            "f.cnf",
            "--assignment",
            "x.txt",
            "--out",
            "h.trace",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    write(d.path(), "odd.cnf", "p cnf 3 1\n1 2 -3 0\n");
    let o = rcache(
        d.path(),
        &[
            "gen", "--kind", "hardness", "--cnf", "odd.cnf", "--out", "h.trace",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_csv_is_deterministic() {
    let d = TempDir::new().unwrap();
    for (out, workers) in [("a.csv", "1"), ("b.csv", "3")] {
        let o = rcache(
            d.path(),
            &[
                "verify",
                "--suite",
                "offline,fractional,rounding,equiv",
                "--instances",
                "20",
                "--samples",
                "100",
                "--seed",
                "5",
                "--workers",
                workers,
                "--out",
                out,
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read_to_string(d.path().join("a.csv")).unwrap();
    let b = fs::read_to_string(d.path().join("b.csv")).unwrap();
    assert!(a.starts_with("# rcache-verify/1\n"));
    assert_eq!(a.lines().count(), 2 + 4 * 20);
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
}

#[test]
fn verify_hardness_includes_the_small_example() {
    let d = TempDir::new().unwrap();
    let o = rcache(
        d.path(),
        &[
            "verify",
            "--suite",
            "hardness",
            "--instances",
            "1",
            "--out",
            "h.csv",
        ],
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(d.path().join("h.csv")).unwrap();
    let row0 = csv.lines().nth(2).unwrap();
    assert!(row0.starts_with("hardness,0,8,11,4,512,54,58,"), "{row0}");
    assert_eq!(csv.lines().count(), 2 + 51);
}

#[test]
fn verify_with_zero_instances_passes() {
    let d = TempDir::new().unwrap();
    let o = rcache(
        d.path(),
        &[
            "verify",
            "--suite",
            "all",
            "--instances",
            "0",
            "--out",
            "z.csv",
        ],
    );
    assert!(o.status.success());
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with("PASS")));
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let o = rcache(
        d.path(),
        &["run", "--algo", "offline", "--trace", "missing.trace"],
    );
    assert_eq!(o.status.code(), Some(1));
    write(d.path(), "bad.trace", "2 1 2\n1 0\n");
    let o = rcache(
        d.path(),
        &["run", "--algo", "offline", "--trace", "bad.trace"],
    );
    assert_eq!(o.status.code(), Some(2));
    write(d.path(), "junk.trace", "2 1 0\n1 x\n");
    let o = rcache(d.path(), &["run", "--algo", "lru", "--trace", "junk.trace"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rcache(d.path(), &["verify", "--suite", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    write(d.path(), "big.trace", "2 1 0\n1 0\n1 1\n1 2\n1 3\n1 4\n");
    let o = rcache(
        d.path(),
        &[
            "run",
            "--algo",
            "oracle",
            "--trace",
            "big.trace",
            "--max-pages",
            "3",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_rcache"))
        .args(["run", "--algo", "oracle", "--trace", "big.trace"])
        .current_dir(d.path())
        .env("RCACHE_ORACLE_LIMITS", "pages=3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn equiv_round_trip_keeps_evictions() {
    let d = TempDir::new().unwrap();
    rcache(
        d.path(),
        &[
            "gen", "--kind", "uniform", "--length", "12", "--seed", "9", "--out", "t.trace",
        ],
    );
    let o = rcache(
        d.path(),
        &[
            "run",
            "--algo",
            "oracle",
            "--trace",
            "t.trace",
            "--schedule",
            "opt.schedule",
        ],
    );
    assert!(o.status.success());
    let o = rcache(
        d.path(),
        &[
            "equiv",
            "--trace",
            "t.trace",
            "--direction",
            "to-pp",
            "--schedule",
            "opt.schedule",
            "--out",
            "pp.schedule",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = rcache(
        d.path(),
        &[
            "equiv",
            "--trace",
            "t.trace",
            "--direction",
            "to-reserves",
            "--schedule",
            "pp.schedule",
            "--out",
            "back.schedule",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let msg = stdout(&o);
    let nums: Vec<u64> = msg
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    assert_eq!(nums[0], nums[1], "{msg}");
}
