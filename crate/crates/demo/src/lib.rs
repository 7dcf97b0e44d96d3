//! Browser bindings. Every entry point takes text in the crate's file formats
//! and returns a JSON string; errors come back as thrown strings.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use rcache_core::fractional::{run_fractional, FractionalAudit};
use rcache_core::hardness;
use rcache_core::offline::{audit_potential, run_offline};
use rcache_core::oracle::{solve_reserves_opt, OracleLimits};
use rcache_core::trace_io::parse_trace;
use rcache_core::Instance;

fn load(trace: &str) -> Result<Instance, String> {
    let inst = parse_trace(trace).map_err(|e| e.to_string())?;
    let report = inst.validate();
    if !report.is_ok() {
        return Err(report.to_string());
    }
    Ok(inst)
}

/// Offline run with per-step cache contents; adds the exact optimum and the
/// potential audit when the trace is small enough for the oracle.
pub fn offline_json(trace: &str) -> Result<Value, String> {
    let inst = load(trace)?;
    let run = run_offline(&inst).map_err(|e| e.to_string())?;
    let steps: Vec<Value> = run
        .steps
        .iter()
        .map(|s| {
            json!({
                "t": s.t,
                "page": s.page.to_string(),
                "hit": s.hit,
                "evicted": s.evicted.map(|p| p.to_string()),
            })
        })
        .collect();
    let mut out = json!({ "k": inst.config.k, "misses": run.misses(), "steps": steps });
    if let Ok(opt) = solve_reserves_opt(&inst, &OracleLimits::default()) {
        out["opt"] = json!(opt.misses);
        let audit =
            audit_potential(&inst, &run.evictions, &opt.schedule).map_err(|e| e.to_string())?;
        out["audit"] = json!({
            "holds": audit.holds(),
            "min_phi": audit.min_phi,
            "phi": audit.steps.iter().map(|s| s.phi).collect::<Vec<_>>(),
            "slack": audit.steps.iter().map(|s| s.slack()).collect::<Vec<_>>(),
        });
    }
    Ok(out)
}

/// Fractional run: per-request cost and dual growth plus the final cache mass
/// of every page.
pub fn fractional_json(trace: &str) -> Result<Value, String> {
    let inst = load(trace)?;
    let k = inst.config.k;
    let run = run_fractional(&inst).map_err(|e| e.to_string())?;
    let steps: Vec<Value> = run
        .steps
        .iter()
        .map(|s| json!({ "t": s.t, "fetched": s.fetched, "cost": s.cost, "alpha": s.alpha, "primal": s.primal, "dual": s.dual }))
        .collect();
    let y: Vec<Value> = run
        .state
        .universe
        .iter()
        .zip(run.state.y())
        .map(|(p, y)| json!({ "page": p.to_string(), "y": y }))
        .collect();
    Ok(json!({
        "k": k,
        "cost": run.cost(),
        "dual_violation": run.audit.worst_dual_violation,
        "dual_violation_bound": FractionalAudit::dual_violation_bound(k),
        "ratio_holds": run.audit.ratio_holds(),
        "steps": steps,
        "y": y,
    }))
}

/// Reduction instance for a DIMACS formula; with an assignment, also the
/// miss count of the corresponding strategy.
pub fn hardness_json(cnf: &str, assignment: &str) -> Result<Value, String> {
    let f = hardness::parse_dimacs(cnf).map_err(|e| e.to_string())?;
    let h = hardness::generate_instance(&f).map_err(|e| e.to_string())?;
    let gadgets: Vec<Value> = h
        .gadgets
        .iter()
        .map(|g| json!({ "name": g.name, "start": g.start, "len": g.len }))
        .collect();
    let mut out = json!({
        "n": f.n,
        "m": f.m(),
        "agents": h.instance.config.m(),
        "k": h.instance.config.k,
        "c_prime": h.c_prime,
        "c": h.c,
        "length": h.instance.trace.len(),
        "expected_length": hardness::expected_length(f.n, f.m()),
        "gadgets": gadgets,
    });
    if !assignment.trim().is_empty() {
        let x = hardness::parse_assignment(assignment, f.n).map_err(|e| e.to_string())?;
        let steps = hardness::synthesize_strategy(&h, &x).map_err(|e| e.to_string())?;
        let (ledger, hits) = hardness::replay_strategy(&h, &steps).map_err(|e| e.to_string())?;
        out["strategy"] = json!({
            "misses": ledger.misses,
            "evictions": ledger.evictions,
            "variable_hits": hits[1..=f.n].to_vec(),
        });
    }
    Ok(out)
}

fn finish(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn offline(trace: &str) -> Result<String, JsValue> {
    finish(offline_json(trace))
}

#[wasm_bindgen]
pub fn fractional(trace: &str) -> Result<String, JsValue> {
    finish(fractional_json(trace))
}

#[wasm_bindgen]
pub fn reduction(cnf: &str, assignment: &str) -> Result<String, JsValue> {
    finish(hardness_json(cnf, assignment))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRACE: &str = "3 2 1 1\n1 0\n1 1\n2 0\n1 2\n1 0\n2 1\n1 1\n";

    #[test]
    fn offline_reports_opt_and_audit() {
        let v = offline_json(TRACE).unwrap();
        assert_eq!(v["steps"].as_array().unwrap().len(), 7);
        let (alg, opt) = (v["misses"].as_u64().unwrap(), v["opt"].as_u64().unwrap());
        assert!(opt <= alg && alg <= 2 * opt);
        assert_eq!(v["audit"]["holds"], true);
    }

    #[test]
    fn fractional_mass_equals_k() {
        let v = fractional_json(TRACE).unwrap();
        let mass: f64 = v["y"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["y"].as_f64().unwrap())
            .sum();
        assert!((mass - 3.0).abs() < 1e-9);
        assert_eq!(v["ratio_holds"], true);
    }

    #[test]
    fn reduction_example() {
        let v = hardness_json("p cnf 4 1\n1 2 -3 0\n", "1 -2 -3 4").unwrap();
        assert_eq!(v["length"], 512);
        assert_eq!(v["c"], 58);
        assert_eq!(v["strategy"]["misses"], 54);
        assert!(hardness_json("p cnf 4 1\n1 1 2 0\n", "").is_err());
    }

    #[test]
    fn bad_trace_is_an_error() {
        assert!(offline_json("2 1 5\n1 0\n").is_err());
    }
}
