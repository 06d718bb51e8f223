//! Release gate: each check recomputes a claim from scratch and reports
//! pass/fail with the numbers behind it.

use std::time::Instant;

use kvlink_core::channel::{ofdma_rate, LinkSnr};
use kvlink_core::decision::{
    bandwidth_threshold, compute_term, f_of_rho, kv_excess_bits, TransmissionContext,
};
use kvlink_core::optimizer::{
    bandwidth_bisection, baseline, evaluation_bound, exhaustive_search, jmsra, Demand, Split,
    DEFAULT_DELTA,
};
use kvlink_core::scenario::{sample_single_round, RoundTrace, SingleRoundConfig};
use kvlink_core::static_e2e::{SweepAxis, SweepDefaults};
use kvlink_core::{AgentCompute, Assignment, Mode, ModelSpec, WorkloadConstants};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Multiround, Policy, RatioSweep, Sweep};
use crate::experiments::{median, ratio_rows, run_policies, run_sweep, ScenarioAxis, SweepPoint};

/// LLaMA-7B constants evaluated by hand before any code existed.
pub const LLAMA_7B_K: (u64, u64, u64) = (262_144, 10_066_329_600, 262_144_000);

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Names of the sub-checks that did not hold.
    pub failed_checks: Vec<&'static str>,
    pub detail: String,
    pub runtime_s: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        let failed = if self.failed_checks.is_empty() {
            String::new()
        } else {
            format!(" [failed: {}]", self.failed_checks.join("; "))
        };
        format!(
            "criterion {:>2} {} {} ({:.2} s): {}{failed}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.runtime_s,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub criteria: Vec<CriterionReport>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn failed_ids(&self) -> Vec<u8> {
        self.criteria
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.id)
            .collect()
    }
}

type Checks = Vec<(&'static str, bool)>;

fn timed(id: u8, name: &'static str, f: impl FnOnce() -> (Checks, String)) -> CriterionReport {
    let start = Instant::now();
    let (checks, detail) = f();
    let failed_checks: Vec<&'static str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    CriterionReport {
        id,
        name,
        passed: failed_checks.is_empty(),
        failed_checks,
        detail,
        runtime_s: start.elapsed().as_secs_f64(),
    }
}

fn llama() -> WorkloadConstants {
    ModelSpec::llama_7b().constants()
}

/// Work counters gathered by the solver checks.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ComplexityTally {
    pub solves: usize,
    pub evaluation_overruns: usize,
    pub bisection_overruns: usize,
}

impl ComplexityTally {
    fn jmsra(&mut self, a: &Assignment, agents: usize) {
        self.solves += 1;
        if a.stats.evaluations > evaluation_bound(agents) {
            self.evaluation_overruns += 1;
        }
        self.bisection_overruns += a.stats.bisection_overruns;
    }

    fn other(&mut self, a: &Assignment) {
        self.bisection_overruns += a.stats.bisection_overruns;
    }

    fn merge(&mut self, o: ComplexityTally) {
        self.solves += o.solves;
        self.evaluation_overruns += o.evaluation_overruns;
        self.bisection_overruns += o.bisection_overruns;
    }
}

pub fn constants_check(k: WorkloadConstants) -> CriterionReport {
    timed(1, "constant derivation", || {
        let got = (k.k1, k.k2, k.k3);
        (
            vec![("constants match", got == LLAMA_7B_K)],
            format!("k = {got:?}, expected {LLAMA_7B_K:?}"),
        )
    })
}

pub fn phase_sum_check() -> CriterionReport {
    timed(2, "phase-sum identity", || {
        let k = llama();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let s = rng.random_range(1.0..8192.0);
            let phi = s + rng.random_range(0.0..50_000.0);
            let alpha = rng.random_range(1.0..4096.0);
            let c = AgentCompute::from_tflops(rng.random_range(0.1..100.0)).expect("positive");
            let sum = k.prefill_latency(c, s, phi).expect("valid")
                + k.autoregressive_latency(c, alpha, phi);
            let total = k.total_inference_latency(c, alpha, phi, s).expect("valid");
            worst = worst.max((sum - total).abs() / total);
        }
        (
            vec![("relative error <= 1e-12", worst <= 1e-12)],
            format!("max relative error {worst:.3e} over 1000 draws"),
        )
    })
}

fn random_context(rng: &mut ChaCha8Rng) -> TransmissionContext {
    TransmissionContext {
        alpha: rng.random_range(1.0..4096.0),
        xi: rng.random_range(0.0..20_000.0),
        theta_r: rng.random_range(0.0..50_000.0),
        gamma: rng.random_range(1.0..16.0),
        bits_per_token: rng.random_range(1.0..32.0),
        receiver_compute: AgentCompute::from_tflops(rng.random_range(0.5..100.0))
            .expect("positive"),
        snr: LinkSnr::from_db(rng.random_range(-20.0..40.0)).expect("finite"),
        bandwidth_hz: 2e9,
        rho: 1.0,
    }
}

pub fn monotonicity_check() -> CriterionReport {
    timed(3, "monotonicity suite", || {
        let k = llama();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut rate_bad, mut f_bad, mut exist_bad, mut resid_bad) = (0, 0, 0, 0);
        let (mut with_threshold, mut dominant) = (0, 0);
        let mut worst_resid = 0.0f64;
        for _ in 0..1000 {
            let ctx = random_context(&mut rng);
            let (a, b) = {
                let x: f64 = rng.random_range(1e-3..1.0);
                let y: f64 = rng.random_range(1e-3..1.0);
                (x.min(y), x.max(y))
            };
            if b - a > 1e-9 {
                let ra = ofdma_rate(a, ctx.bandwidth_hz, ctx.snr).expect("valid rho");
                let rb = ofdma_rate(b, ctx.bandwidth_hz, ctx.snr).expect("valid rho");
                if !(rb > ra) {
                    rate_bad += 1;
                }
            }
            if kv_excess_bits(&k, &ctx).expect("valid") <= 0.0 {
                continue;
            }
            dominant += 1;
            if b - a > 1e-9
                && !(f_of_rho(&k, &ctx, b).expect("valid") > f_of_rho(&k, &ctx, a).expect("valid"))
            {
                f_bad += 1;
            }
            let f1 = f_of_rho(&k, &ctx, 1.0).expect("valid");
            let big_a = compute_term(&k, &ctx).expect("valid");
            match bandwidth_threshold(&k, &ctx).expect("dominant payload") {
                Some(rho) => {
                    with_threshold += 1;
                    if !(f1 > 0.0) {
                        exist_bad += 1;
                    }
                    let r = f_of_rho(&k, &ctx, rho).expect("valid").abs() / big_a;
                    worst_resid = worst_resid.max(r);
                    if r > 1e-6 {
                        resid_bad += 1;
                    }
                }
                None => {
                    if f1 > 0.0 {
                        exist_bad += 1;
                    }
                }
            }
        }
        (
            vec![
                ("rate increasing", rate_bad == 0),
                ("f increasing", f_bad == 0),
                ("threshold iff f(1) > 0", exist_bad == 0),
                ("threshold residual", resid_bad == 0),
            ],
            format!(
                "rate violations {rate_bad}, f violations {f_bad}/{dominant}, existence mismatches {exist_bad}, \
                 {with_threshold} thresholds with max |f|/A {worst_resid:.2e}"
            ),
        )
    })
}

pub fn ratio_sweep_check() -> CriterionReport {
    timed(4, "ratio-sweep shape", || {
        let k = llama();
        let rows = |axis| {
            ratio_rows(
                &k,
                &RatioSweep {
                    axis,
                    grid: None,
                    defaults: SweepDefaults::default(),
                },
            )
            .expect("default sweep")
        };
        let crosses = |r: &[f64]| r.windows(2).any(|w| (w[0] - 1.0) * (w[1] - 1.0) <= 0.0);
        let ratios = |axis| rows(axis).iter().map(|r| r.ratio).collect::<Vec<_>>();

        let snr = ratios(SweepAxis::Snr);
        let snr_mono = snr.windows(2).all(|w| w[1] >= w[0]);
        let snr_cross = crosses(&snr);
        let agents_rows = rows(SweepAxis::AaCount);
        let agents: Vec<f64> = agents_rows
            .iter()
            .filter(|r| (2.0..=20.0).contains(&r.axis_value))
            .map(|r| r.ratio)
            .collect();
        let agents_mono = agents.windows(2).all(|w| w[1] >= w[0]);
        let beta_cross = crosses(&ratios(SweepAxis::Beta));
        let c_cross = crosses(&ratios(SweepAxis::Compute));
        (
            vec![
                ("snr monotone", snr_mono),
                ("snr crossing", snr_cross),
                ("agents monotone", agents_mono),
                ("beta crossing", beta_cross),
                ("compute crossing", c_cross),
            ],
            format!(
                "snr monotone {snr_mono} crossing {snr_cross} [{:.3}..{:.3}]; agents 2..20 monotone {agents_mono} \
                 [{:.3}..{:.3}]; beta crossing {beta_cross}; compute crossing {c_cross}",
                snr[0],
                snr[snr.len() - 1],
                agents[0],
                agents[agents.len() - 1]
            ),
        )
    })
}

/// Best min-max latency over the simplex grid of resolution `1/n`.
pub fn simplex_grid_oracle(demands: &[Demand; 3], bandwidth_hz: f64, n: usize) -> f64 {
    (1..n)
        .into_par_iter()
        .map(|i| {
            let mut best = f64::INFINITY;
            for j in 1..(n - i) {
                let rho = [
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    (n - i - j) as f64 / n as f64,
                ];
                let mut worst = 0.0f64;
                for (d, r) in demands.iter().zip(rho) {
                    worst =
                        worst.max(d.bits / ofdma_rate(r, bandwidth_hz, d.snr).expect("valid rho"));
                }
                best = best.min(worst);
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

pub fn bisection_check() -> CriterionReport {
    timed(5, "bandwidth bisection optimality", || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let instances: Vec<[Demand; 3]> = (0..100)
            .map(|_| {
                std::array::from_fn(|_| Demand {
                    bits: 10f64.powf(rng.random_range(6.0..10.0)),
                    snr: LinkSnr::from_db(rng.random_range(-10.0..30.0)).expect("finite"),
                })
            })
            .collect();
        let (mut gap_bad, mut spread_bad, mut sum_bad) = (0, 0, 0);
        let mut worst_gap = 0.0f64;
        for d in &instances {
            let a = bandwidth_bisection(d, 2e9, DEFAULT_DELTA).expect("feasible");
            let grid = simplex_grid_oracle(d, 2e9, 1000);
            let gap = (a.tau - grid) / grid;
            worst_gap = worst_gap.max(gap.abs());
            if gap.abs() > 0.01 {
                gap_bad += 1;
            }
            if a.latencies
                .iter()
                .any(|t| (a.tau - t).abs() > DEFAULT_DELTA)
            {
                spread_bad += 1;
            }
            if (a.rho.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                sum_bad += 1;
            }
        }
        (
            vec![
                ("grid gap <= 1%", gap_bad == 0),
                ("latencies within delta", spread_bad == 0),
                ("rho sums to 1", sum_bad == 0),
            ],
            format!(
                "grid gap > 1%: {gap_bad}, spread > delta: {spread_bad}, sum off: {sum_bad}; \
                 max |tau - grid|/grid {worst_gap:.2e}"
            ),
        )
    })
}

pub fn exhaustive_check(tally: &mut ComplexityTally) -> CriterionReport {
    timed(6, "JMSRA vs exhaustive", || {
        let k = llama();
        let tflops = [5.0, 10.0, 20.0, 35.0];
        let results: Vec<(bool, bool, bool, f64, ComplexityTally)> = (0..100u64)
            .into_par_iter()
            .map(|idx| {
                let cfg = SingleRoundConfig {
                    agents: 4 + (idx as usize % 7),
                    ea_compute_tflops: tflops[idx as usize % 4],
                    ..Default::default()
                };
                let s = sample_single_round(&k, &cfg, idx)
                    .expect("valid config")
                    .instance;
                let j = jmsra(&s, DEFAULT_DELTA).expect("solvable");
                let e = exhaustive_search(&s, DEFAULT_DELTA).expect("small");
                let mut t = ComplexityTally::default();
                t.jmsra(&j, s.len());
                t.other(&e);
                let mut beats_uniform = true;
                for m in [Mode::Nl, Mode::Kv] {
                    let u = baseline(&s, m, Split::Uniform, DEFAULT_DELTA).expect("solvable");
                    beats_uniform &= j.j <= u.j;
                }
                let gap = j.j / e.j - 1.0;
                (j.j >= e.j, gap <= 0.05, beats_uniform, gap, t)
            })
            .collect();
        let lower = results.iter().filter(|r| r.0).count();
        let close = results.iter().filter(|r| r.1).count();
        let uniform = results.iter().filter(|r| r.2).count();
        let worst = results.iter().map(|r| r.3).fold(0.0, f64::max);
        for r in &results {
            tally.merge(r.4);
        }
        (
            vec![
                ("never below exhaustive", lower == 100),
                ("within 5% on 95", close >= 95),
                ("beats uniform baselines", uniform == 100),
            ],
            format!(
                "J >= exhaustive {lower}/100, within 5% {close}/100, beats uniform baselines {uniform}/100, \
                 worst gap {:.2}%",
                100.0 * worst
            ),
        )
    })
}

struct TrialSet {
    jmsra: Vec<f64>,
    nl_uniform: Vec<f64>,
    kv_uniform: Vec<f64>,
    kv_opt: Vec<f64>,
    kv_agents: usize,
    agents: usize,
}

fn banded_trials(c0: f64, seeds: std::ops::Range<u64>, tally: &mut ComplexityTally) -> TrialSet {
    let k = llama();
    let cfg = SingleRoundConfig {
        agents: 20,
        ea_compute_tflops: c0,
        ..Default::default()
    };
    let per: Vec<(f64, f64, f64, f64, usize, ComplexityTally)> = seeds
        .into_par_iter()
        .map(|seed| {
            let s = sample_single_round(&k, &cfg, seed)
                .expect("valid config")
                .instance;
            let j = jmsra(&s, DEFAULT_DELTA).expect("solvable");
            let nlu = baseline(&s, Mode::Nl, Split::Uniform, DEFAULT_DELTA).expect("solvable");
            let kvu = baseline(&s, Mode::Kv, Split::Uniform, DEFAULT_DELTA).expect("solvable");
            let kvo = baseline(&s, Mode::Kv, Split::Optimized, DEFAULT_DELTA).expect("solvable");
            let mut t = ComplexityTally::default();
            t.jmsra(&j, s.len());
            t.other(&kvo);
            (j.j, nlu.j, kvu.j, kvo.j, j.kv_count(), t)
        })
        .collect();
    for p in &per {
        tally.merge(p.5);
    }
    TrialSet {
        jmsra: per.iter().map(|p| p.0).collect(),
        nl_uniform: per.iter().map(|p| p.1).collect(),
        kv_uniform: per.iter().map(|p| p.2).collect(),
        kv_opt: per.iter().map(|p| p.3).collect(),
        kv_agents: per.iter().map(|p| p.4).sum(),
        agents: per.len() * 20,
    }
}

pub fn banded_check(tally: &mut ComplexityTally) -> CriterionReport {
    timed(7, "banded reproduction at I = 20", || {
        let low = banded_trials(5.0, 0..20, tally);
        let (j, nlu, kvu, kvo) = (
            median(&low.jmsra),
            median(&low.nl_uniform),
            median(&low.kv_uniform),
            median(&low.kv_opt),
        );
        let kv_frac = low.kv_agents as f64 / low.agents as f64;
        let checks_low = [
            ("NL-uniform > 60", nlu > 60.0),
            ("KV-uniform in [25, 60]", (25.0..=60.0).contains(&kvu)),
            ("J <= NL-uniform/2", j <= 0.5 * nlu),
            ("J <= KV-opt", j <= kvo),
            ("KV share >= 60%", kv_frac >= 0.6),
        ];
        let high = banded_trials(35.0, 0..20, tally);
        let (jh, nluh) = (median(&high.jmsra), median(&high.nl_uniform));
        let nl_frac = 1.0 - high.kv_agents as f64 / high.agents as f64;
        let checks_high = [
            ("J <= NL-uniform", jh <= nluh),
            ("NL majority", nl_frac > 0.5),
        ];
        (
            checks_low.into_iter().chain(checks_high).collect(),
            format!(
                "C0=5: medians J {j:.2}, NL-uni {nlu:.2}, KV-uni {kvu:.2}, KV-opt {kvo:.2}, KV share {:.0}%; \
                 C0=35: J {jh:.2}, NL-uni {nluh:.2}, NL share {:.0}%",
                100.0 * kv_frac,
                100.0 * nl_frac
            ),
        )
    })
}

fn sweep_medians(points: &[SweepPoint], strategy: &str) -> Vec<f64> {
    points
        .iter()
        .map(|p| median(&p.objective(strategy)))
        .collect()
}

fn tally_sweep(points: &[SweepPoint], tally: &mut ComplexityTally) {
    for p in points {
        for trial in &p.results {
            for r in trial {
                if r.strategy == "jmsra" {
                    tally.jmsra(&r.assignment, r.assignment.x.len());
                } else {
                    tally.other(&r.assignment);
                }
            }
        }
    }
}

pub fn sweep_check(tally: &mut ComplexityTally) -> CriterionReport {
    timed(8, "bandwidth and agent sweeps", || {
        let k = llama();
        let mut base = Sweep::bandwidth();
        base.scenario.ea_compute_tflops = 10.0;
        let bw = run_sweep(&k, ScenarioAxis::Bandwidth, &base, 0).expect("valid sweep");
        tally_sweep(&bw, tally);
        let j = sweep_medians(&bw, "jmsra");
        let nlu = sweep_medians(&bw, "all-nl-uniform");
        let nlo = sweep_medians(&bw, "all-nl-opt");
        let kvu = sweep_medians(&bw, "all-kv-uniform");
        let kvo = sweep_medians(&bw, "all-kv-opt");
        let flat = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(0.0, f64::max);
            (hi - lo) / lo
        };
        let kv_drop = (kvu[0] - kvu[kvu.len() - 1]) / kvu[0];
        let lowest = (0..j.len())
            .all(|i| j[i] <= nlu[i] && j[i] <= nlo[i] && j[i] <= kvu[i] && j[i] <= kvo[i]);

        let mut agents = Sweep::agents();
        agents.scenario.ea_compute_tflops = 10.0;
        let ag = run_sweep(&k, ScenarioAxis::Agents, &agents, 0).expect("valid sweep");
        tally_sweep(&ag, tally);
        let ja = sweep_medians(&ag, "jmsra");
        let nla = sweep_medians(&ag, "all-nl-opt");
        let kva = sweep_medians(&ag, "all-kv-opt");
        let first = (ja[0] - nla[0]).abs() / nla[0];
        let last = (ja[ja.len() - 1] - kva[kva.len() - 1]).abs() / kva[kva.len() - 1];

        let checks = [
            (
                "NL flat within 2%",
                flat(&nlu) <= 0.02 && flat(&nlo) <= 0.02,
            ),
            ("KV-uniform drops > 30%", kv_drop > 0.3),
            ("J lowest everywhere", lowest),
            ("J ~ NL at I=5", first <= 0.10),
            ("J ~ KV-opt at I=30", last <= 0.10),
        ];
        (
            checks.to_vec(),
            format!(
                "NL spread {:.2}%/{:.2}%, KV-uni drop {:.0}%; I=5 J {:.2} vs NL {:.2} ({:.1}%), \
                 I=30 J {:.2} vs KV-opt {:.2} ({:.1}%)",
                100.0 * flat(&nlu),
                100.0 * flat(&nlo),
                100.0 * kv_drop,
                ja[0],
                nla[0],
                100.0 * first,
                ja[ja.len() - 1],
                kva[kva.len() - 1],
                100.0 * last
            ),
        )
    })
}

fn kv_fraction(trace: &[RoundTrace], rounds: std::ops::RangeInclusive<u32>) -> f64 {
    let (mut kv, mut active) = (0, 0);
    for t in trace.iter().filter(|t| rounds.contains(&t.round)) {
        kv += t.kv_count();
        active += t.active_count();
    }
    kv as f64 / active.max(1) as f64
}

pub fn multiround_check() -> CriterionReport {
    timed(9, "multi-round dynamics", || {
        let k = llama();
        let m = Multiround {
            policies: vec![Policy::Jmsra, Policy::AllNl],
            ..Default::default()
        };
        let per_seed: Vec<(u64, Vec<&'static str>, String)> = (0..5u64)
            .into_par_iter()
            .map(|seed| {
                let runs = run_policies(&k, &m, seed).expect("valid config");
                let j = &runs[0].1;
                let nl = &runs[1].1;
                let cfg = &m.scenario;
                let ea_modes: Vec<Mode> = j.iter().filter_map(|t| t.ea.map(|e| e.mode)).collect();
                let ea_kv_first_only = ea_modes.first() == Some(&Mode::Kv)
                    && ea_modes.iter().skip(1).all(|&mm| mm == Mode::Nl);
                let mut ledger_ok = true;
                for trace in [j, nl] {
                    for t in trace {
                        if let Some(e) = t.ea {
                            ledger_ok &= e.xi <= cfg.ea_window && e.theta <= cfg.ea_context_limit;
                            ledger_ok &= e.mode == Mode::Nl || e.xi >= 0.0;
                        }
                        for a in &t.agents {
                            ledger_ok &= a.xi <= cfg.aa_window && a.theta <= cfg.aa_context_limit;
                            if a.mode == Some(Mode::Kv) {
                                ledger_ok &= a.xi == 0.0;
                            }
                        }
                    }
                }
                let early = kv_fraction(j, 1..=5);
                let late = kv_fraction(j, 15..=25);
                let ea_total = |t: &RoundTrace| t.ea.map_or(0.0, |e| e.prefill + e.decode);
                let nl_over = nl.iter().filter(|t| t.round <= 25).any(|t| ea_total(t) > 100.0);
                let prefill21 = |tr: &[RoundTrace]| tr.iter().find(|t| t.round == 21).and_then(|t| t.ea).map_or(0.0, |e| e.prefill);
                let (pj, pn) = (prefill21(j), prefill21(nl));
                let checks = [
                    ("EA KV only in round 1", ea_kv_first_only),
                    ("ledger caps and debt clearing", ledger_ok),
                    ("late KV share > early", late > early),
                    ("all-NL EA > 100 s by round 25", nl_over),
                    ("round-21 prefill < 10% of all-NL", pj < 0.1 * pn),
                ];
                let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
                let ea_modes_str: String = ea_modes.iter().take(3).map(|m| m.as_str()).collect::<Vec<_>>().join("");
                (
                    seed,
                    failed,
                    format!(
                        "seed {seed}: EA {ea_modes_str}.., KV share {:.0}%->{:.0}%, r21 prefill {pj:.2}/{pn:.2}",
                        100.0 * early,
                        100.0 * late
                    ),
                )
            })
            .collect();
        let names = [
            "EA KV only in round 1",
            "ledger caps and debt clearing",
            "late KV share > early",
            "all-NL EA > 100 s by round 25",
            "round-21 prefill < 10% of all-NL",
        ];
        let checks = names
            .into_iter()
            .map(|n| (n, per_seed.iter().all(|s| !s.1.contains(&n))))
            .collect();
        let detail = per_seed
            .iter()
            .map(|(_, failed, d)| {
                if failed.is_empty() {
                    d.clone()
                } else {
                    format!("{d} failed {failed:?}")
                }
            })
            .collect::<Vec<_>>()
            .join("; ");
        (checks, detail)
    })
}

pub fn complexity_check(tally: ComplexityTally) -> CriterionReport {
    timed(10, "complexity counters", || {
        (
            vec![
                ("solves recorded", tally.solves > 0),
                ("evaluation bound", tally.evaluation_overruns == 0),
                ("bisection bound", tally.bisection_overruns == 0),
            ],
            format!(
                "{} JMSRA solves: {} over I(I+1)+2 evaluations, {} bisections over ceil(log2(T_max/delta))+1",
                tally.solves, tally.evaluation_overruns, tally.bisection_overruns
            ),
        )
    })
}

/// Runs every criterion in order, calling `on_done` as each finishes.
pub fn run_all(mut on_done: impl FnMut(&CriterionReport)) -> Report {
    let mut tally = ComplexityTally::default();
    let mut criteria = Vec::new();
    let mut push = |r: CriterionReport| {
        on_done(&r);
        criteria.push(r);
    };
    push(constants_check(llama()));
    push(phase_sum_check());
    push(monotonicity_check());
    push(ratio_sweep_check());
    push(bisection_check());
    push(exhaustive_check(&mut tally));
    push(banded_check(&mut tally));
    push(sweep_check(&mut tally));
    push(multiround_check());
    push(complexity_check(tally));
    Report { criteria }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_k2_fails_constants() {
        let mut k = llama();
        assert!(constants_check(k).passed);
        k.k2 += 1;
        assert!(!constants_check(k).passed);
    }

    #[test]
    fn grid_oracle_symmetric_case() {
        let d = Demand {
            bits: 1e9,
            snr: LinkSnr::new(1.0).expect("valid"),
        };
        let g = simplex_grid_oracle(&[d, d, d], 2e9, 300);
        let even = 1e9 / ofdma_rate(1.0 / 3.0, 2e9, d.snr).expect("valid");
        assert!((g - even).abs() / even < 1e-9);
    }
}
