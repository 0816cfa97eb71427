mod common;

use bsched::baselines::{fifo_schedule, greedy_throughput};
use bsched::metrics::{evaluate_max_flow, evaluate_throughput};
use bsched::oracles::{brute_maxflow, brute_maxflow_limited, brute_throughput, brute_throughput_limited, monte_carlo};
use bsched::{Error, Instance, Request};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const A: u32 = 0;
const B: u32 = 1;
const C: u32 = 2;

#[test]
fn brute_maxflow_examples() {
    assert_eq!(brute_maxflow(&flow(&[(0, A)])).unwrap().optimum, 1.0);
    assert_eq!(brute_maxflow(&flow(&[(0, A), (0, B), (0, C)])).unwrap().optimum, 3.0);
    let inst = flow(&[(0, A), (0, B), (1, A)]);
    let r = brute_maxflow(&inst).unwrap();
    assert_eq!(r.optimum, 2.0);
    assert_eq!(evaluate_max_flow(&inst, &r.witness).max_flow, Some(2));
    assert!(r.explored > 0);
}

#[test]
fn brute_throughput_examples() {
    assert_eq!(brute_throughput(&windowed(&[(0, A, 3, 2.5)])).unwrap().optimum, 2.5);
    assert_eq!(brute_throughput(&windowed(&[(0, A, 1, 3.0), (0, B, 1, 5.0)])).unwrap().optimum, 5.0);
    let shared = windowed(&[(0, A, 2, 3.0), (1, A, 3, 4.0)]);
    let r = brute_throughput(&shared).unwrap();
    assert_eq!(r.optimum, 7.0);
    assert_eq!(evaluate_throughput(&shared, &r.witness).unwrap().profit, 7.0);
    assert!(brute_throughput(&flow(&[(0, A)])).is_err());
}

#[test]
fn brute_maxflow_agrees_with_exhaustive() {
    for inst in tiny_flow_corpus(101, 80) {
        if inst.horizon() > 6 {
            continue;
        }
        let r = brute_maxflow(&inst).unwrap();
        assert_eq!(Some(r.optimum as i64), exhaustive_min_max_flow(&inst));
        assert_eq!(evaluate_max_flow(&inst, &r.witness).max_flow, Some(r.optimum as i64));
    }
}

#[test]
fn brute_throughput_agrees_with_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..60 {
        let n = rng.gen_range(1..=3);
        let reqs = (0..rng.gen_range(1..=5))
            .map(|i| {
                let r = rng.gen_range(0..4);
                Request::windowed(i, r, rng.gen_range(0..n), r + rng.gen_range(1..=3), rng.gen_range(1..=9) as f64)
            })
            .collect();
        let inst = Instance::new(n, reqs).unwrap();
        let r = brute_throughput(&inst).unwrap();
        assert_eq!(r.optimum, exhaustive_max_profit(&inst));
        assert_eq!(evaluate_throughput(&inst, &r.witness).unwrap().profit, r.optimum);
        let greedy = evaluate_throughput(&inst, &greedy_throughput(&inst).unwrap()).unwrap().profit;
        assert!(greedy <= r.optimum);
        assert!(2.0 * greedy >= r.optimum - 1e-9);
    }
}

#[test]
fn brute_maxflow_below_fifo() {
    for inst in tiny_flow_corpus(7, 60) {
        let opt = brute_maxflow(&inst).unwrap().optimum as i64;
        assert!(opt <= evaluate_max_flow(&inst, &fifo_schedule(&inst)).max_flow.unwrap());
    }
}

#[test]
fn oracle_refuses_large_instances() {
    let reqs = (0..12).map(|i| Request::flow(i, 0, i as u32)).collect();
    let inst = Instance::new(12, reqs).unwrap();
    assert!(matches!(brute_maxflow_limited(&inst, 1000), Err(Error::TooLarge(_))));
    assert_eq!(brute_maxflow(&inst).unwrap().optimum, 12.0);
    let reqs = (0..12).map(|i| Request::windowed(i, 0, i as u32, 12, 1.0)).collect();
    let inst = Instance::new(12, reqs).unwrap();
    assert!(matches!(brute_throughput_limited(&inst, 1000), Err(Error::TooLarge(_))));
    let reqs = (0..65).map(|i| Request::flow(i, i as i64, 0)).collect();
    assert!(matches!(brute_maxflow(&Instance::new(1, reqs).unwrap()), Err(Error::TooLarge(_))));
}

#[test]
fn monte_carlo_examples() {
    let one = monte_carlo(50, 1, |_| Ok(1.0)).unwrap();
    assert_eq!(one.mean, 1.0);
    assert_eq!(one.stderr, 0.0);

    let coin = monte_carlo(10_000, 2, |rng| Ok(if rng.gen::<bool>() { 1.0 } else { 0.0 })).unwrap();
    assert!((coin.mean - 0.5).abs() <= 3.0 * coin.stderr);
    assert_eq!(coin.histogram.iter().map(|h| h.2).sum::<usize>(), 10_000);

    let again = monte_carlo(10_000, 2, |rng| Ok(if rng.gen::<bool>() { 1.0 } else { 0.0 })).unwrap();
    assert_eq!(coin, again);

    assert!(monte_carlo(0, 1, |_| Ok(0.0)).is_err());
}
