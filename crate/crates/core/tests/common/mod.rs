//! Reference implementations used only by the tests. They are deliberately
//! naive so that they share no code with the library.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeSet, HashMap};

use rcache_core::{Instance, Page};

/// Farthest-in-future on an initially empty cache of size `k`.
pub fn belady(k: usize, requests: &[Page]) -> u64 {
    let mut cache: BTreeSet<Page> = BTreeSet::new();
    let mut misses = 0;
    for (t, p) in requests.iter().enumerate() {
        if cache.contains(p) {
            continue;
        }
        misses += 1;
        if cache.len() == k {
            let next = |q: &Page| {
                requests[t + 1..]
                    .iter()
                    .position(|r| r == q)
                    .unwrap_or(usize::MAX)
            };
            let victim = *cache.iter().max_by_key(|q| next(q)).unwrap();
            cache.remove(&victim);
        }
        cache.insert(*p);
    }
    misses
}

/// Minimum misses in the reserves model by dynamic programming over every
/// reachable cache. Dummies of one agent are interchangeable, so a cache is
/// its real pages plus a dummy count per agent (index 0 for fillers).
pub fn brute_reserves_opt(inst: &Instance) -> u64 {
    let c = &inst.config;
    let m = c.m();
    let reserve = |a: usize| if a == 0 { 0 } else { c.reserves[a - 1] };
    let mut dummies = vec![c.k - c.reserves.iter().sum::<usize>()];
    dummies.extend(c.reserves.iter().copied());
    type Key = (Vec<Page>, Vec<usize>);
    let mut layer: HashMap<Key, u64> = HashMap::from([((Vec::new(), dummies), 0)]);
    for p in &inst.trace.requests {
        let mut next: HashMap<Key, u64> = HashMap::new();
        let mut keep = |key: Key, cost: u64| {
            let e = next.entry(key).or_insert(u64::MAX);
            *e = (*e).min(cost);
        };
        for ((real, dum), cost) in layer {
            if real.contains(p) {
                keep((real, dum), cost);
                continue;
            }
            let mut count = dum.clone();
            for q in &real {
                count[q.agent.index()] += 1;
            }
            let a = p.agent.index();
            let legal = |b: usize| b == a || count[b] > reserve(b);
            for (i, q) in real.iter().enumerate() {
                if legal(q.agent.index()) {
                    let mut r = real.clone();
                    r.remove(i);
                    r.push(*p);
                    r.sort();
                    keep((r, dum.clone()), cost + 1);
                }
            }
            for b in 0..=m {
                if dum[b] > 0 && legal(b) {
                    let mut d = dum.clone();
                    d[b] -= 1;
                    let mut r = real.clone();
                    r.push(*p);
                    r.sort();
                    keep((r, d), cost + 1);
                }
            }
        }
        layer = next;
    }
    layer.into_values().min().unwrap_or(0)
}

/// Fixed-step Euler integration of the fractional primal-dual dynamics.
/// Returns the final eviction fractions in universe order.
pub fn euler_fractional(inst: &Instance, d_alpha: f64) -> Vec<f64> {
    let c = &inst.config;
    let universe = c.universe();
    let n = universe.len();
    let k = c.k;
    let eta = 1.0 / k as f64;
    let owner: Vec<usize> = universe.iter().map(|p| p.agent.index()).collect();
    let goal = |a: usize| (c.universe_sizes[a - 1] - c.reserves[a - 1]) as f64;

    // Initial cache: each agent's reserve from its lowest pages, then the
    // lowest remaining pages until the cache is full.
    let mut x = vec![1.0; n];
    let mut room = k.min(n);
    for (i, p) in universe.iter().enumerate() {
        if (p.local as usize) < c.reserves[p.agent.index() - 1] {
            x[i] = 0.0;
            room -= 1;
        }
    }
    for v in x.iter_mut() {
        if room > 0 && *v == 1.0 {
            *v = 0.0;
            room -= 1;
        }
    }

    let target = n as f64 - k as f64;
    for page in &inst.trace.requests {
        let p = universe.iter().position(|q| q == page).unwrap();
        x[p] = 0.0;
        let agent_sum = |x: &[f64], a: usize| -> f64 {
            (0..n)
                .filter(|&q| q != p && owner[q] == a)
                .map(|q| x[q])
                .sum()
        };
        let mut tight: Vec<bool> = (0..=c.m())
            .map(|a| a > 0 && agent_sum(&x, a) >= goal(a) - 1e-9)
            .collect();
        loop {
            let others: f64 = (0..n).filter(|&q| q != p).map(|q| x[q]).sum();
            let need = target - others;
            if need <= 1e-12 {
                break;
            }
            let growing: Vec<usize> = (0..n)
                .filter(|&q| q != p && !tight[owner[q]] && x[q] < 1.0)
                .collect();
            assert!(!growing.is_empty(), "covering constraint cannot be met");
            // Shorten the last step so no threshold is overshot.
            let mut h = d_alpha;
            let rate: f64 = growing.iter().map(|&q| x[q] + eta).sum();
            h = h.min(need / rate);
            for a in 1..=c.m() {
                if tight[a] {
                    continue;
                }
                let r: f64 = growing
                    .iter()
                    .filter(|&&q| owner[q] == a)
                    .map(|&q| x[q] + eta)
                    .sum();
                if r > 0.0 {
                    h = h.min((goal(a) - agent_sum(&x, a)) / r);
                }
            }
            for &q in &growing {
                h = h.min((1.0 - x[q]) / (x[q] + eta));
            }
            let h = h.max(0.0);
            for &q in &growing {
                x[q] = (x[q] + (x[q] + eta) * h).min(1.0);
                if x[q] > 1.0 - 1e-12 {
                    x[q] = 1.0;
                }
            }
            for a in 1..=c.m() {
                if !tight[a] && agent_sum(&x, a) >= goal(a) - 1e-9 {
                    tight[a] = true;
                }
            }
        }
    }
    x
}
