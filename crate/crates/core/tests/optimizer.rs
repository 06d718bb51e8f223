use kvlink_core::channel::{ofdma_rate, LinkSnr};
use kvlink_core::optimizer::{
    bandwidth_bisection, baseline, calc_latency, ea_prefill_cost, evaluation_bound,
    exhaustive_search, jmsra, Demand, Split, DEFAULT_DELTA,
};
use kvlink_core::scenario::{sample_single_round, SingleRoundConfig};
use kvlink_core::{Mode, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best min-max latency over a 1e-3 simplex grid for three agents.
fn simplex_grid(demands: &[Demand; 3], bandwidth_hz: f64) -> f64 {
    let n = 1000;
    let mut best = f64::INFINITY;
    for i in 1..n {
        for j in 1..(n - i) {
            let rho = [
                i as f64 / n as f64,
                j as f64 / n as f64,
                (n - i - j) as f64 / n as f64,
            ];
            let worst = demands
                .iter()
                .zip(rho)
                .map(|(d, r)| d.bits / ofdma_rate(r, bandwidth_hz, d.snr).unwrap())
                .fold(0.0, f64::max);
            best = best.min(worst);
        }
    }
    best
}

#[test]
fn bisection_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let demands: [Demand; 3] = std::array::from_fn(|_| Demand {
            bits: 10f64.powf(rng.random_range(6.0..10.0)),
            snr: LinkSnr::from_db(rng.random_range(-10.0..30.0)).unwrap(),
        });
        let a = bandwidth_bisection(&demands, 2e9, DEFAULT_DELTA).unwrap();
        let grid = simplex_grid(&demands, 2e9);
        assert!((a.tau - grid).abs() <= 0.01 * grid, "{} vs {grid}", a.tau);
        assert!((a.rho.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(a.latencies.iter().all(|t| a.tau - t <= DEFAULT_DELTA));
    }
}

#[test]
fn jmsra_close_to_exhaustive_on_table_instances() {
    let k = ModelSpec::llama_7b().constants();
    let mut within = 0;
    let trials = 30;
    for seed in 0..trials {
        let cfg = SingleRoundConfig {
            agents: 4 + (seed as usize % 5),
            ea_compute_tflops: [5.0, 10.0, 20.0, 35.0][seed as usize % 4],
            ..Default::default()
        };
        let s = sample_single_round(&k, &cfg, seed).unwrap().instance;
        let j = jmsra(&s, DEFAULT_DELTA).unwrap();
        let e = exhaustive_search(&s, DEFAULT_DELTA).unwrap();
        assert!(e.j <= j.j + 1e-12);
        if j.j <= 1.05 * e.j {
            within += 1;
        }
        assert!(j.stats.evaluations <= evaluation_bound(s.len()));
        assert_eq!(j.stats.bisection_overruns, 0);
        for split in [Split::Uniform, Split::Optimized] {
            for m in [Mode::Nl, Mode::Kv] {
                assert!(j.j <= baseline(&s, m, split, DEFAULT_DELTA).unwrap().j);
            }
        }
    }
    assert!(within * 100 >= trials * 95, "{within}/{trials}");
}

#[test]
fn assignment_is_recomputable() {
    let k = ModelSpec::llama_7b().constants();
    let s = sample_single_round(
        &k,
        &SingleRoundConfig {
            agents: 8,
            ..Default::default()
        },
        5,
    )
    .unwrap()
    .instance;
    let a = jmsra(&s, DEFAULT_DELTA).unwrap();
    let prefill = ea_prefill_cost(&a.x, &s).unwrap();
    let tau = s
        .agents
        .iter()
        .zip(&a.x)
        .zip(&a.rho)
        .map(|((ag, &m), &r)| ag.payload(m) / ofdma_rate(r, s.bandwidth_hz, ag.snr).unwrap())
        .fold(0.0, f64::max);
    assert!(((prefill + tau) - a.j).abs() <= 1e-9 * a.j);
    let sum: f64 = a.rho.iter().sum();
    assert!((1.0 - 1e-9..=1.0 + 1e-12).contains(&sum));
    assert!(a.rho.iter().all(|&r| r > 0.0));
    assert_eq!(calc_latency(&a.x, &s, DEFAULT_DELTA).unwrap().j, a.j);
}

#[test]
fn forward_trace_descends_at_low_ea_compute() {
    let k = ModelSpec::llama_7b().constants();
    let cfg = SingleRoundConfig {
        ea_compute_tflops: 5.0,
        ..Default::default()
    };
    let s = sample_single_round(&k, &cfg, 42).unwrap().instance;
    let a = jmsra(&s, DEFAULT_DELTA).unwrap();
    let fwd: Vec<f64> = a
        .trace
        .iter()
        .filter(|t| t.direction == kvlink_core::optimizer::Direction::Forward)
        .map(|t| t.j)
        .collect();
    assert!(fwd.len() > 1);
    assert!(fwd.windows(2).all(|w| w[1] < w[0]));
}
