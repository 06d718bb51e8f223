//! Multi-round dialogue between one EA and a changing set of AAs.
//!
//! Each round: the EA decodes and multicasts its output, every active AA
//! ingests it, senses, decodes and uploads, and the EA ingests the uploads.
//! Ledgers carry each agent's history `θ` and unshared KV debt `ξ` between
//! rounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{draw_link_snr, Range};
use crate::channel::{broadcast_rate, sample_rayleigh, LinkSnr};
use crate::decision::{Mode, TransmissionContext};
use crate::error::{invalid, Result};
use crate::optimizer::{ScenarioInstance, UplinkAgent};
use crate::rng::{stream, Tag};
use crate::strategy::Strategy;
use crate::workload::{token_payload_bits, AgentCompute, WorkloadConstants};

const MAX_ACTIVITY_ROLLS: u8 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiRoundConfig {
    pub max_agents: usize,
    /// Probability that an agent takes part in a round.
    pub activity_prob: f64,
    pub ea_compute_tflops: f64,
    pub aa_compute_tflops: Range,
    pub ea_tx_power_dbm: f64,
    pub aa_tx_power_dbm: Range,
    pub distance_m: Range,
    pub ea_prompt_tokens: f64,
    pub ea_output_tokens: f64,
    pub sensing_tokens: f64,
    pub aa_output_tokens: f64,
    pub ea_context_limit: f64,
    pub ea_window: f64,
    pub aa_context_limit: f64,
    pub aa_window: f64,
    pub gamma: f64,
    pub bits_per_token: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub delta: f64,
}

impl Default for MultiRoundConfig {
    fn default() -> Self {
        Self {
            max_agents: 20,
            activity_prob: 0.75,
            ea_compute_tflops: 20.0,
            aa_compute_tflops: Range::new(5.0, 15.0),
            ea_tx_power_dbm: 30.0,
            aa_tx_power_dbm: Range::new(10.0, 23.0),
            distance_m: Range::new(5.0, 10.0),
            ea_prompt_tokens: 1024.0,
            ea_output_tokens: 1024.0,
            sensing_tokens: 1024.0,
            aa_output_tokens: 1024.0,
            ea_context_limit: 1024.0 * 20.0 * 20.0,
            ea_window: 1024.0 * 20.0 * 5.0,
            aa_context_limit: 1024.0 * 50.0,
            aa_window: 1024.0 * 10.0,
            gamma: 2.0,
            bits_per_token: 16.0,
            bandwidth_hz: 2e9,
            noise_dbm_per_hz: -140.0,
            delta: crate::optimizer::DEFAULT_DELTA,
        }
    }
}

impl MultiRoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_agents == 0 {
            return Err(invalid("max_agents", "must be at least 1"));
        }
        if !(self.activity_prob > 0.0 && self.activity_prob <= 1.0) {
            return Err(invalid("activity_prob", "must lie in (0, 1]"));
        }
        self.aa_compute_tflops.validate("aa_compute_tflops")?;
        self.aa_tx_power_dbm.validate("aa_tx_power_dbm")?;
        self.distance_m.validate("distance_m")?;
        AgentCompute::from_tflops(self.ea_compute_tflops)?;
        AgentCompute::from_tflops(self.aa_compute_tflops.lo)?;
        if !(self.distance_m.lo > 0.0) {
            return Err(invalid("distance_m", "must be positive"));
        }
        for (name, v) in [
            ("ea_prompt_tokens", self.ea_prompt_tokens),
            ("ea_output_tokens", self.ea_output_tokens),
            ("sensing_tokens", self.sensing_tokens),
            ("aa_output_tokens", self.aa_output_tokens),
        ] {
            if !(v >= 1.0) {
                return Err(invalid(name, "must be at least one token"));
            }
        }
        if !(self.ea_window > 0.0 && self.ea_window <= self.ea_context_limit) {
            return Err(invalid("ea_window", "must lie in (0, ea_context_limit]"));
        }
        if !(self.aa_window > 0.0 && self.aa_window <= self.aa_context_limit) {
            return Err(invalid("aa_window", "must lie in (0, aa_context_limit]"));
        }
        if !(self.bandwidth_hz > 0.0 && self.delta > 0.0) {
            return Err(invalid(
                "bandwidth_hz",
                "bandwidth and delta must be positive",
            ));
        }
        Ok(())
    }
}

/// History and unshared-KV bookkeeping of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentLedger {
    pub theta: f64,
    pub xi: f64,
    pub theta_max: f64,
    pub window: f64,
}

impl AgentLedger {
    pub fn new(theta_max: f64, window: f64) -> Self {
        Self {
            theta: 0.0,
            xi: 0.0,
            theta_max,
            window,
        }
    }

    /// Appends tokens to the context, evicting the oldest past the limit.
    pub fn append(&mut self, tokens: f64) {
        self.theta = (self.theta + tokens).min(self.theta_max);
        self.xi = self.xi.min(self.theta);
    }

    /// Adds unshared tokens to the debt, inside the sliding window.
    pub fn accrue(&mut self, tokens: f64) {
        self.xi = (self.xi + tokens).min(self.window).min(self.theta);
    }

    /// Debt as seen by a transmission that also carries `pending` fresh
    /// unshared tokens.
    pub fn debt_with(&self, pending: f64) -> f64 {
        (self.xi + pending).min(self.window)
    }

    pub fn clear(&mut self) {
        self.xi = 0.0;
    }

    pub fn holds_invariants(&self) -> bool {
        self.xi >= 0.0
            && self.xi <= self.window
            && self.theta <= self.theta_max
            && self.xi <= self.theta
    }
}

/// State threaded through rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiRoundState {
    pub seed: u64,
    /// Rounds already played.
    pub round: u32,
    pub ea: AgentLedger,
    pub aas: Vec<AgentLedger>,
    pub aa_compute: Vec<AgentCompute>,
}

impl MultiRoundState {
    pub fn new(config: &MultiRoundConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let aa_compute = (0..config.max_agents)
            .map(|i| {
                let mut rng = stream(seed, 0, i as u32, Tag::Static);
                AgentCompute::from_tflops(config.aa_compute_tflops.sample(&mut rng))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            seed,
            round: 0,
            ea: AgentLedger::new(config.ea_context_limit, config.ea_window),
            aas: vec![
                AgentLedger::new(config.aa_context_limit, config.aa_window);
                config.max_agents
            ],
            aa_compute,
        })
    }
}

/// EA row of a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EaRecord {
    pub mode: Mode,
    pub prefill: f64,
    pub decode: f64,
    pub comm: f64,
    pub theta: f64,
    pub xi: f64,
}

/// AA row of a round; inactive agents carry zeros and their old ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentRecord {
    pub active: bool,
    pub mode: Option<Mode>,
    pub rho: f64,
    pub prefill: f64,
    pub decode: f64,
    pub comm: f64,
    pub theta: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrace {
    /// 1-based.
    pub round: u32,
    /// `None` when no agent was active and the round was skipped.
    pub ea: Option<EaRecord>,
    pub agents: Vec<AgentRecord>,
    /// Uplink-phase objective.
    pub j: f64,
}

impl RoundTrace {
    pub fn active_count(&self) -> usize {
        self.agents.iter().filter(|a| a.active).count()
    }

    pub fn kv_count(&self) -> usize {
        self.agents
            .iter()
            .filter(|a| a.mode == Some(Mode::Kv))
            .count()
    }
}

struct LinkDraw {
    up: LinkSnr,
    down: LinkSnr,
}

fn draw_active(config: &MultiRoundConfig, seed: u64, round: u32) -> Vec<bool> {
    for attempt in 0..MAX_ACTIVITY_ROLLS {
        let active: Vec<bool> = (0..config.max_agents)
            .map(|i| {
                let mut rng = stream(seed, round, i as u32, Tag::Activity(attempt));
                rng.random::<f64>() < config.activity_prob
            })
            .collect();
        if active.iter().any(|&a| a) {
            return active;
        }
    }
    vec![false; config.max_agents]
}

fn draw_links(config: &MultiRoundConfig, seed: u64, round: u32, agent: usize) -> Result<LinkDraw> {
    let mut rng = stream(seed, round, agent as u32, Tag::Link);
    let distance = config.distance_m.sample(&mut rng);
    let power = config.aa_tx_power_dbm.sample(&mut rng);
    let h_up = sample_rayleigh(&mut rng);
    let h_down = sample_rayleigh(&mut rng);
    let snr = |p, h| draw_link_snr(distance, p, h, config.noise_dbm_per_hz, config.bandwidth_hz);
    Ok(LinkDraw {
        up: snr(power, h_up)?,
        down: snr(config.ea_tx_power_dbm, h_down)?,
    })
}

/// Plays one round and advances `state`.
pub fn step_multi_round(
    k: &WorkloadConstants,
    state: &mut MultiRoundState,
    config: &MultiRoundConfig,
    strategy: &dyn Strategy,
) -> Result<RoundTrace> {
    config.validate()?;
    if state.aas.len() != config.max_agents {
        return Err(invalid("state", "agent count differs from config"));
    }
    state.round += 1;
    let round = state.round;
    let active = draw_active(config, state.seed, round);
    let idle = |l: &AgentLedger| AgentRecord {
        active: false,
        mode: None,
        rho: 0.0,
        prefill: 0.0,
        decode: 0.0,
        comm: 0.0,
        theta: l.theta,
        xi: l.xi,
    };
    let members: Vec<usize> = (0..config.max_agents).filter(|&i| active[i]).collect();
    if members.is_empty() {
        return Ok(RoundTrace {
            round,
            ea: None,
            agents: state.aas.iter().map(idle).collect(),
            j: 0.0,
        });
    }
    let links: Vec<LinkDraw> = members
        .iter()
        .map(|&i| draw_links(config, state.seed, round, i))
        .collect::<Result<_>>()?;
    let c0 = AgentCompute::from_tflops(config.ea_compute_tflops)?;

    // EA inference: the prompt arrives in the first round only
    let mut ea_prefill = 0.0;
    if round == 1 {
        let s = config.ea_prompt_tokens;
        ea_prefill = k.prefill_latency(c0, s, s + state.ea.theta)?;
        state.ea.append(s);
        state.ea.accrue(s);
    }
    let alpha0 = config.ea_output_tokens;
    let ea_decode = k.autoregressive_latency(c0, alpha0, state.ea.theta);
    let ea_debt = state.ea.debt_with(0.0);
    state.ea.append(alpha0);

    // EA multicast
    let receivers: Vec<TransmissionContext> = members
        .iter()
        .zip(&links)
        .map(|(&i, l)| TransmissionContext {
            alpha: alpha0,
            xi: ea_debt,
            theta_r: state.aas[i].theta,
            gamma: config.gamma,
            bits_per_token: config.bits_per_token,
            receiver_compute: state.aa_compute[i],
            snr: l.down,
            bandwidth_hz: config.bandwidth_hz,
            rho: 1.0,
        })
        .collect();
    let ea_mode = strategy.broadcast_mode(k, &receivers)?;
    let down: Vec<LinkSnr> = links.iter().map(|l| l.down).collect();
    let bcast_rate = broadcast_rate(config.bandwidth_hz, &down)?;
    let (bcast_bits, delivered) = match ea_mode {
        Mode::Nl => (token_payload_bits(alpha0, config.bits_per_token), alpha0),
        Mode::Kv => (
            k.kv_payload_bits(ea_debt + alpha0, config.gamma)?,
            ea_debt + alpha0,
        ),
    };
    if !(bcast_rate > 0.0) {
        return Err(crate::error::Error::LinkUnusable);
    }
    let ea_comm = bcast_bits / bcast_rate;
    match ea_mode {
        Mode::Nl => state.ea.accrue(alpha0),
        Mode::Kv => state.ea.clear(),
    }

    // AA reception, sensing and reasoning
    let s = config.sensing_tokens;
    let alpha = config.aa_output_tokens;
    let mut aa_prefill = Vec::with_capacity(members.len());
    let mut aa_decode = Vec::with_capacity(members.len());
    let mut uplinks = Vec::with_capacity(members.len());
    let mut debts = Vec::with_capacity(members.len());
    for (&i, l) in members.iter().zip(&links) {
        let c = state.aa_compute[i];
        let ledger = &mut state.aas[i];
        let mut prefill = 0.0;
        if ea_mode == Mode::Nl {
            prefill += k.prefill_latency(c, delivered, delivered + ledger.theta)?;
        }
        ledger.append(delivered);
        prefill += k.prefill_latency(c, s, s + ledger.theta)?;
        ledger.append(s);
        let debt = ledger.debt_with(s);
        let decode = k.autoregressive_latency(c, alpha, ledger.theta);
        ledger.append(alpha);
        uplinks.push(UplinkAgent::new(
            k,
            l.up,
            alpha,
            debt,
            config.gamma,
            config.bits_per_token,
        )?);
        debts.push(debt);
        aa_prefill.push(prefill);
        aa_decode.push(decode);
    }

    // uplink contention
    let scenario = ScenarioInstance {
        constants: *k,
        agents: uplinks,
        bandwidth_hz: config.bandwidth_hz,
        ea_compute: c0,
        ea_history: state.ea.theta,
    };
    let assignment = strategy.solve(&scenario, config.delta)?;
    let mut ingested = 0.0;
    for (idx, &i) in members.iter().enumerate() {
        let ledger = &mut state.aas[i];
        match assignment.x[idx] {
            Mode::Nl => {
                ledger.xi = debts[idx];
                ledger.accrue(alpha);
                ingested += alpha;
            }
            Mode::Kv => {
                ledger.clear();
                ingested += debts[idx] + alpha;
            }
        }
    }
    // the EA's new context is unshared with every other AA
    state.ea.append(ingested);
    state.ea.accrue(ingested);
    ea_prefill += assignment.prefill;

    let mut agents: Vec<AgentRecord> = state.aas.iter().map(idle).collect();
    for (idx, &i) in members.iter().enumerate() {
        agents[i] = AgentRecord {
            active: true,
            mode: Some(assignment.x[idx]),
            rho: assignment.rho[idx],
            prefill: aa_prefill[idx],
            decode: aa_decode[idx],
            comm: assignment.uplink[idx],
            theta: state.aas[i].theta,
            xi: state.aas[i].xi,
        };
    }
    Ok(RoundTrace {
        round,
        ea: Some(EaRecord {
            mode: ea_mode,
            prefill: ea_prefill,
            decode: ea_decode,
            comm: ea_comm,
            theta: state.ea.theta,
            xi: state.ea.xi,
        }),
        agents,
        j: assignment.j,
    })
}

/// Plays `rounds` rounds from a fresh state.
pub fn run_multi_round(
    k: &WorkloadConstants,
    config: &MultiRoundConfig,
    rounds: u32,
    seed: u64,
    strategy: &dyn Strategy,
) -> Result<Vec<RoundTrace>> {
    if rounds == 0 {
        return Err(invalid("rounds", "must be at least 1"));
    }
    let mut state = MultiRoundState::new(config, seed)?;
    (0..rounds)
        .map(|_| step_multi_round(k, &mut state, config, strategy))
        .collect()
}
