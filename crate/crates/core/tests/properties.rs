mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rcache_core::equivalence::{adapt_pp_to_reserves, adapt_reserves_to_pp};
use rcache_core::fractional::run_fractional;
use rcache_core::gen::{random_small_instance, SmallShape};
use rcache_core::offline::run_offline;
use rcache_core::oracle::{solve_pp_opt, solve_reserves_opt, OracleLimits};
use rcache_core::policies::{run_lru, run_random_pp};
use rcache_core::rounding::{run_rounding, DEFAULT_SUPPORT_CAP};
use rcache_core::state::{replay_pp, replay_reserves};
use rcache_core::trace_io::{parse_schedule, parse_trace, write_schedule, write_trace};
use rcache_core::Instance;

fn instance(seed: u64) -> Instance {
    random_small_instance(&mut ChaCha8Rng::seed_from_u64(seed), &SmallShape::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trace_text_round_trips(seed in any::<u64>()) {
        let inst = instance(seed);
        let back = parse_trace(&write_trace(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn offline_schedule_replays_and_is_within_twice_opt(seed in any::<u64>()) {
        let inst = instance(seed);
        let run = run_offline(&inst).unwrap();
        let schedule = parse_schedule(&write_schedule(&run.evictions)).unwrap();
        prop_assert_eq!(replay_reserves(&inst, &schedule).unwrap().misses, run.misses());
        let opt = common::brute_reserves_opt(&inst);
        prop_assert!(run.misses() <= 2 * opt);
        prop_assert!(opt <= run_lru(&inst).unwrap().ledger.misses);
    }

    #[test]
    fn fractional_state_stays_feasible(seed in any::<u64>()) {
        let inst = instance(seed);
        let run = run_fractional(&inst).unwrap();
        prop_assert!(run.audit.holds(inst.config.k));
        prop_assert!(run.state.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let cached: f64 = run.state.y().iter().sum();
        prop_assert!((cached - inst.config.k.min(run.state.n()) as f64).abs() < 1e-7);
    }

    #[test]
    fn rounding_support_is_a_distribution(seed in any::<u64>()) {
        let inst = instance(seed);
        let frac = run_fractional(&inst).unwrap();
        let run = run_rounding(&inst, &frac, DEFAULT_SUPPORT_CAP).unwrap();
        prop_assert!((run.distribution.total_mass() - 1.0).abs() < 1e-9);
        prop_assert!(run.distribution.support.values().all(|&p| p > 0.0));
        prop_assert!(run.expected_misses() <= inst.trace.len() as f64 + 1e-9);
    }

    #[test]
    fn optima_of_the_two_models_are_within_a_factor_two(seed in any::<u64>()) {
        let inst = instance(seed);
        let limits = OracleLimits::default();
        let r = solve_reserves_opt(&inst, &limits).unwrap().misses;
        let pp = solve_pp_opt(&inst, &limits).unwrap();
        prop_assert!(r <= pp.cost && pp.cost <= 2 * r);
        prop_assert_eq!(replay_pp(&inst, &pp.steps).unwrap().pp_cost(), pp.cost);
    }

    #[test]
    fn transforms_compose(seed in any::<u64>()) {
        let inst = instance(seed);
        let pp = run_random_pp(&inst, seed).unwrap();
        let e = adapt_pp_to_reserves(&inst, &pp.steps).unwrap();
        let h = adapt_reserves_to_pp(&inst, &e.schedule).unwrap();
        prop_assert!(h.evictions() <= 2 * e.evictions());
        prop_assert_eq!(replay_pp(&inst, &h.steps).unwrap().misses, pp.ledger.misses);
    }
}
