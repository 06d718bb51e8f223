//! Joint media selection and bandwidth allocation for the AAs-to-EA phase.
//!
//! For a mode vector `x` (1 = KV) the objective is
//! `J(x) = t_prefill,EA(x) + τ*(x)`: the EA prefills every token-mode upload
//! on top of its history, and `τ*` is the min-max uplink time under the best
//! OFDMA split. [`jmsra`] searches `x` greedily from both ends.

mod bandwidth;
mod greedy;

pub use bandwidth::{
    bandwidth_bisection, iteration_bound, required_fraction, uniform_allocation, Allocation,
    Demand, INNER_MAX_ITERS, RHO_FLOOR,
};
pub use greedy::{
    exhaustive_search, greedy_search, jmsra, Direction, GreedyOutcome, TraceStep, EXHAUSTIVE_LIMIT,
};

use serde::Serialize;

use crate::channel::LinkSnr;
use crate::decision::Mode;
use crate::error::{invalid, Error, Result};
use crate::workload::{token_payload_bits, AgentCompute, WorkloadConstants};

/// Default deadline resolution of the bandwidth bisection, in seconds.
pub const DEFAULT_DELTA: f64 = 1e-4;

/// One AA contending for the uplink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UplinkAgent {
    /// Full-band SNR towards the EA.
    pub snr: LinkSnr,
    /// Output tokens of this round.
    pub alpha: f64,
    /// Token-mode payload bits.
    pub d_nl: f64,
    /// KV-mode payload bits.
    pub d_kv: f64,
}

impl UplinkAgent {
    /// Builds payloads from token counts: `b·α` and the KV of `ξ + α` tokens.
    pub fn new(
        k: &WorkloadConstants,
        snr: LinkSnr,
        alpha: f64,
        xi: f64,
        gamma: f64,
        bits_per_token: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(invalid("alpha", "must be positive"));
        }
        Ok(Self {
            snr,
            alpha,
            d_nl: token_payload_bits(alpha, bits_per_token),
            d_kv: k.kv_payload_bits(xi + alpha, gamma)?,
        })
    }

    pub fn payload(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Nl => self.d_nl,
            Mode::Kv => self.d_kv,
        }
    }
}

/// One AAs-to-EA contention round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioInstance {
    pub constants: WorkloadConstants,
    pub agents: Vec<UplinkAgent>,
    pub bandwidth_hz: f64,
    pub ea_compute: AgentCompute,
    /// EA history before the uploads, `θ0`.
    pub ea_history: f64,
}

impl ScenarioInstance {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::NoAgents);
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(invalid("bandwidth", "must be positive"));
        }
        if !(self.ea_history >= 0.0) {
            return Err(invalid("ea_history", "must be non-negative"));
        }
        for (agent, a) in self.agents.iter().enumerate() {
            if !(a.d_nl > 0.0 && a.d_kv > 0.0) {
                return Err(invalid(
                    "payload",
                    format!("agent {agent} payloads must be positive"),
                ));
            }
            if !(a.snr.linear() > 0.0) {
                return Err(Error::Infeasible { agent });
            }
        }
        Ok(())
    }

    fn demands(&self, x: &[Mode]) -> Vec<Demand> {
        self.agents
            .iter()
            .zip(x)
            .map(|(a, &m)| Demand {
                bits: a.payload(m),
                snr: a.snr,
            })
            .collect()
    }

    fn check_modes(&self, x: &[Mode]) -> Result<()> {
        if x.len() != self.agents.len() {
            return Err(invalid(
                "x",
                format!("{} modes for {} agents", x.len(), self.agents.len()),
            ));
        }
        Ok(())
    }
}

/// EA prefill over every token-mode upload.
pub fn ea_prefill_cost(x: &[Mode], scenario: &ScenarioInstance) -> Result<f64> {
    scenario.check_modes(x)?;
    let tokens: f64 = scenario
        .agents
        .iter()
        .zip(x)
        .filter(|(_, &m)| m == Mode::Nl)
        .map(|(a, _)| a.alpha)
        .sum();
    if tokens <= 0.0 {
        return Ok(0.0);
    }
    scenario
        .constants
        .prefill_latency(scenario.ea_compute, tokens, tokens + scenario.ea_history)
}

/// Objective value of one mode vector together with its split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub j: f64,
    pub prefill: f64,
    pub allocation: Allocation,
}

/// `J(x)` with an optimized split.
pub fn calc_latency(x: &[Mode], scenario: &ScenarioInstance, delta: f64) -> Result<Evaluation> {
    scenario.validate()?;
    let prefill = ea_prefill_cost(x, scenario)?;
    let allocation = bandwidth_bisection(&scenario.demands(x), scenario.bandwidth_hz, delta)?;
    Ok(Evaluation {
        j: prefill + allocation.tau,
        prefill,
        allocation,
    })
}

/// `J(x)` with the even split.
pub fn calc_latency_uniform(x: &[Mode], scenario: &ScenarioInstance) -> Result<Evaluation> {
    scenario.validate()?;
    let prefill = ea_prefill_cost(x, scenario)?;
    let allocation = uniform_allocation(&scenario.demands(x), scenario.bandwidth_hz)?;
    Ok(Evaluation {
        j: prefill + allocation.tau,
        prefill,
        allocation,
    })
}

/// Work counters of one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    /// Mode vectors evaluated.
    pub evaluations: usize,
    /// Largest outer-bisection step count over all evaluations.
    pub max_bisection_iters: u32,
    /// Evaluations whose bisection exceeded its step budget.
    pub bisection_overruns: usize,
}

impl SolveStats {
    pub(crate) fn record(&mut self, alloc: &Allocation, delta: f64) {
        self.evaluations += 1;
        self.max_bisection_iters = self.max_bisection_iters.max(alloc.iterations);
        if alloc.iterations > alloc.iteration_bound(delta) {
            self.bisection_overruns += 1;
        }
    }

    pub(crate) fn merge(&mut self, other: &SolveStats) {
        self.evaluations += other.evaluations;
        self.max_bisection_iters = self.max_bisection_iters.max(other.max_bisection_iters);
        self.bisection_overruns += other.bisection_overruns;
    }
}

/// Bound on evaluated candidates of a bidirectional greedy run, `I(I+1) + 2`.
pub fn evaluation_bound(agents: usize) -> usize {
    agents * (agents + 1) + 2
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub x: Vec<Mode>,
    pub rho: Vec<f64>,
    pub j: f64,
    /// Slowest uplink at `rho`.
    pub tau: f64,
    /// EA prefill at `x`.
    pub prefill: f64,
    /// Per-agent uplink seconds at `rho`.
    pub uplink: Vec<f64>,
    pub trace: Vec<TraceStep>,
    pub stats: SolveStats,
}

impl Assignment {
    pub(crate) fn from_evaluation(
        x: Vec<Mode>,
        eval: Evaluation,
        trace: Vec<TraceStep>,
        stats: SolveStats,
    ) -> Self {
        Self {
            x,
            rho: eval.allocation.rho,
            j: eval.j,
            tau: eval.allocation.tau,
            prefill: eval.prefill,
            uplink: eval.allocation.latencies,
            trace,
            stats,
        }
    }

    pub fn kv_count(&self) -> usize {
        self.x.iter().filter(|&&m| m == Mode::Kv).count()
    }

    pub fn bits(&self) -> Vec<u8> {
        self.x.iter().map(|m| m.bit()).collect()
    }
}

/// Bandwidth policy of a fixed-mode baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Split {
    Uniform,
    Optimized,
}

/// Every agent forced to `mode`.
pub fn baseline(
    scenario: &ScenarioInstance,
    mode: Mode,
    split: Split,
    delta: f64,
) -> Result<Assignment> {
    let x = vec![mode; scenario.len()];
    let eval = match split {
        Split::Uniform => calc_latency_uniform(&x, scenario)?,
        Split::Optimized => calc_latency(&x, scenario, delta)?,
    };
    let mut stats = SolveStats::default();
    stats.record(&eval.allocation, delta);
    Ok(Assignment::from_evaluation(x, eval, Vec::new(), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::ModelSpec;

    pub(crate) fn toy(agents: usize, c0_tflops: f64) -> ScenarioInstance {
        let k = ModelSpec::llama_7b().constants();
        ScenarioInstance {
            constants: k,
            agents: (0..agents)
                .map(|i| {
                    let snr = LinkSnr::new(0.5 + i as f64).unwrap();
                    UplinkAgent::new(&k, snr, 1024.0, 3072.0, 2.0, 16.0).unwrap()
                })
                .collect(),
            bandwidth_hz: 2e9,
            ea_compute: AgentCompute::from_tflops(c0_tflops).unwrap(),
            ea_history: 5120.0,
        }
    }

    #[test]
    fn all_kv_has_no_prefill() {
        let s = toy(4, 10.0);
        assert_eq!(ea_prefill_cost(&[Mode::Kv; 4], &s).unwrap(), 0.0);
        let e = calc_latency(&[Mode::Kv; 4], &s, DEFAULT_DELTA).unwrap();
        assert_eq!(e.j, e.allocation.tau);
    }

    #[test]
    fn all_nl_prefill_value() {
        let s = toy(3, 10.0);
        let k = s.constants;
        let expect = k
            .prefill_latency(s.ea_compute, 3072.0, 3072.0 + 5120.0)
            .unwrap();
        assert_eq!(ea_prefill_cost(&[Mode::Nl; 3], &s).unwrap(), expect);
    }

    #[test]
    fn flipping_to_kv_lowers_prefill() {
        let s = toy(3, 10.0);
        let all = ea_prefill_cost(&[Mode::Nl; 3], &s).unwrap();
        let one = ea_prefill_cost(&[Mode::Nl, Mode::Kv, Mode::Nl], &s).unwrap();
        assert!(one < all);
    }

    #[test]
    fn huge_ea_compute_leaves_uplink_time() {
        let mut s = toy(3, 10.0);
        s.ea_compute = AgentCompute::new(1e40).unwrap();
        let e = calc_latency(&[Mode::Nl; 3], &s, DEFAULT_DELTA).unwrap();
        assert!((e.j - e.allocation.tau).abs() < 1e-20);
    }

    #[test]
    fn baselines_share_prefill() {
        let s = toy(5, 10.0);
        let u = baseline(&s, Mode::Nl, Split::Uniform, DEFAULT_DELTA).unwrap();
        let o = baseline(&s, Mode::Nl, Split::Optimized, DEFAULT_DELTA).unwrap();
        assert_eq!(u.prefill, o.prefill);
        assert!(u.rho.iter().all(|&r| r == 0.2));
        let ku = baseline(&s, Mode::Kv, Split::Uniform, DEFAULT_DELTA).unwrap();
        let ko = baseline(&s, Mode::Kv, Split::Optimized, DEFAULT_DELTA).unwrap();
        assert!(ko.j <= ku.j);
    }

    #[test]
    fn mode_vector_length_checked() {
        let s = toy(3, 10.0);
        assert!(ea_prefill_cost(&[Mode::Nl; 2], &s).is_err());
    }
}
