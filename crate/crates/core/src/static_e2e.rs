//! Two-round EA/AA dialogue latency with every agent fixed to one medium.
//!
//! Round 1: the EA prefills its prompt, decodes, and multicasts to all AAs.
//! Each AA decodes a reply to the EA's intent. Round 2: each AA takes new
//! sensory input, reasons, and sends its findings back over OFDMA; the EA
//! then produces the final output. In token mode every receiver prefills what
//! it receives; in KV mode receivers append the shipped cache and go straight
//! to decoding.

use serde::{Deserialize, Serialize};

use crate::channel::{ofdma_rate, rate_unchecked, LinkSnr};
use crate::error::{invalid, Error, Result};
use crate::workload::{check_compression, token_payload_bits, AgentCompute, WorkloadConstants};

/// Token counts of one two-round dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueShape {
    /// EA task prompt, `s_{0,1}`.
    pub ea_prompt: f64,
    /// EA first output, `α_{0,1}`.
    pub ea_first_output: f64,
    /// EA final output, `α_{0,2}`.
    pub ea_final_output: f64,
    pub agents: Vec<AssistantShape>,
    /// KV compression at the EA.
    pub ea_gamma: f64,
    pub bits_per_token: f64,
}

/// Per-AA token counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssistantShape {
    /// Reply to the EA's intent, `α_{i,1}`.
    pub first_output: f64,
    /// Sensory input, `s_{i,2}`.
    pub sensing_input: f64,
    /// Findings sent back, `α_{i,2}`.
    pub second_output: f64,
    pub gamma: f64,
}

impl DialogueShape {
    /// Symmetric dialogue: every prompt is `s` tokens, every output `β·s`
    /// except the EA's final answer.
    pub fn symmetric(
        agents: usize,
        s: f64,
        beta: f64,
        final_output: f64,
        gamma: f64,
        bits_per_token: f64,
    ) -> Self {
        let alpha = beta * s;
        Self {
            ea_prompt: s,
            ea_first_output: alpha,
            ea_final_output: final_output,
            agents: vec![
                AssistantShape {
                    first_output: alpha,
                    sensing_input: s,
                    second_output: alpha,
                    gamma,
                };
                agents
            ],
            ea_gamma: gamma,
            bits_per_token,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::NoAgents);
        }
        if !(self.ea_prompt > 0.0) {
            return Err(invalid("ea_prompt", "must be positive"));
        }
        if !(self.ea_first_output >= 0.0 && self.ea_final_output >= 0.0) {
            return Err(invalid("ea_output", "must be non-negative"));
        }
        if !(self.bits_per_token >= 0.0) {
            return Err(invalid("bits_per_token", "must be non-negative"));
        }
        check_compression(self.ea_gamma)?;
        for a in &self.agents {
            check_compression(a.gamma)?;
            if !(a.sensing_input > 0.0) {
                return Err(invalid("sensing_input", "must be positive"));
            }
            if !(a.first_output >= 0.0 && a.second_output >= 0.0) {
                return Err(invalid("aa_output", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// EA context delivered to each AA by a KV multicast (`s_{0,1} + α_{0,1}`).
    pub fn ea_shared_context(&self) -> f64 {
        self.ea_prompt + self.ea_first_output
    }

    /// AA history before its round-2 prefill in KV mode (`ω_i`).
    pub fn kv_aa_history(&self, i: usize) -> f64 {
        let a = &self.agents[i];
        self.ea_shared_context() + a.first_output + a.sensing_input
    }

    /// EA context before its final decode in KV mode (`ε`).
    pub fn kv_ea_history(&self) -> f64 {
        self.ea_shared_context()
            + self
                .agents
                .iter()
                .map(|a| a.first_output + a.sensing_input + a.second_output)
                .sum::<f64>()
    }

    /// Tokens the EA prefills in token mode round 2 (`s_{0,2}`).
    pub fn nl_ea_final_input(&self) -> f64 {
        self.agents.iter().map(|a| a.second_output).sum()
    }
}

/// Compute capacities of the EA and every AA.
#[derive(Debug, Clone, PartialEq)]
pub struct Computes {
    pub ea: AgentCompute,
    pub agents: Vec<AgentCompute>,
}

impl Computes {
    pub fn uniform(compute: AgentCompute, agents: usize) -> Self {
        Self {
            ea: compute,
            agents: vec![compute; agents],
        }
    }
}

/// Transmission rates of the EA multicast and every AA uplink, in bits/s.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRates {
    pub broadcast: f64,
    pub uplink: Vec<f64>,
}

impl LinkRates {
    /// Common-SNR setting: the multicast and every uplink see the same SNR
    /// on the band they use, and the uplink band is split evenly.
    pub fn symmetric(bandwidth_hz: f64, snr: LinkSnr, agents: usize) -> Result<Self> {
        if agents == 0 {
            return Err(Error::NoAgents);
        }
        let rho = 1.0 / agents as f64;
        // full-band SNR that yields `snr` on a 1/I slice
        let full_band = LinkSnr::new(snr.linear() * rho)?;
        Ok(Self {
            broadcast: ofdma_rate(1.0, bandwidth_hz, snr)?,
            uplink: vec![ofdma_rate(rho, bandwidth_hz, full_band)?; agents],
        })
    }

    /// Rates from per-link full-band SNRs and uplink fractions.
    pub fn from_snrs(
        bandwidth_hz: f64,
        broadcast_snrs: &[LinkSnr],
        uplink_snrs: &[LinkSnr],
        rho: &[f64],
    ) -> Result<Self> {
        if uplink_snrs.len() != rho.len() {
            return Err(invalid("rho", "length differs from uplink count"));
        }
        Ok(Self {
            broadcast: crate::channel::broadcast_rate(bandwidth_hz, broadcast_snrs)?,
            uplink: uplink_snrs
                .iter()
                .zip(rho)
                .map(|(s, &r)| ofdma_rate(r, bandwidth_hz, *s))
                .collect::<Result<_>>()?,
        })
    }
}

/// Component latencies of one two-round dialogue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeLatencyBreakdown {
    pub ea_inference: [f64; 2],
    pub ea_comm: f64,
    pub per_aa_inference: Vec<[f64; 2]>,
    pub per_aa_comm: Vec<f64>,
    pub bottleneck_aa: usize,
    pub total: f64,
}

impl ModeLatencyBreakdown {
    fn assemble(ea_inference: [f64; 2], ea_comm: f64, aa: Vec<([f64; 2], f64)>) -> Self {
        let (per_aa_inference, per_aa_comm): (Vec<_>, Vec<_>) = aa.into_iter().unzip();
        let (bottleneck_aa, worst) = per_aa_inference
            .iter()
            .zip(&per_aa_comm)
            .map(|(inf, comm)| inf[0] + inf[1] + comm)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, t)| {
                if t > best.1 {
                    (i, t)
                } else {
                    best
                }
            });
        Self {
            total: ea_inference[0] + ea_inference[1] + ea_comm + worst,
            ea_inference,
            ea_comm,
            per_aa_inference,
            per_aa_comm,
            bottleneck_aa,
        }
    }
}

fn check_inputs(shape: &DialogueShape, computes: &Computes, links: &LinkRates) -> Result<()> {
    shape.validate()?;
    let n = shape.agents.len();
    if computes.agents.len() != n || links.uplink.len() != n {
        return Err(invalid(
            "agents",
            "shape, computes and links disagree on AA count",
        ));
    }
    if !(links.broadcast > 0.0) || links.uplink.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::LinkUnusable);
    }
    Ok(())
}

/// EA's first inference, shared by both media.
fn ea_first_inference(
    k: &WorkloadConstants,
    shape: &DialogueShape,
    c: AgentCompute,
) -> Result<f64> {
    k.total_inference_latency(c, shape.ea_first_output, shape.ea_prompt, shape.ea_prompt)
}

/// Every agent exchanges token indices.
///
/// An AA prefills the EA's `α_{0,1}` tokens with no prior history, decodes
/// its reply, then prefills its sensing input on top of that conversation.
/// The EA finally prefills all `α_{i,2}` on top of its own round-1 context.
pub fn nl_mode_latency(
    k: &WorkloadConstants,
    shape: &DialogueShape,
    computes: &Computes,
    links: &LinkRates,
) -> Result<ModeLatencyBreakdown> {
    check_inputs(shape, computes, links)?;
    let b = shape.bits_per_token;
    let ea_first = ea_first_inference(k, shape, computes.ea)?;
    let ea_comm = token_payload_bits(shape.ea_first_output, b) / links.broadcast;
    let heard = shape.ea_first_output;

    let mut aa = Vec::with_capacity(shape.agents.len());
    for ((a, &c), &rate) in shape.agents.iter().zip(&computes.agents).zip(&links.uplink) {
        let first = if heard > 0.0 {
            k.total_inference_latency(c, a.first_output, heard, heard)?
        } else {
            k.autoregressive_latency(c, a.first_output, 0.0)
        };
        let phi2 = heard + a.first_output + a.sensing_input;
        let second = k.total_inference_latency(c, a.second_output, phi2, a.sensing_input)?;
        let comm = token_payload_bits(a.second_output, b) / rate;
        aa.push(([first, second], comm));
    }

    let s_final = shape.nl_ea_final_input();
    let ea_history = shape.ea_shared_context();
    let ea_final = if s_final > 0.0 {
        k.total_inference_latency(
            computes.ea,
            shape.ea_final_output,
            s_final + ea_history,
            s_final,
        )?
    } else {
        k.autoregressive_latency(computes.ea, shape.ea_final_output, ea_history)
    };
    Ok(ModeLatencyBreakdown::assemble(
        [ea_first, ea_final],
        ea_comm,
        aa,
    ))
}

/// Every agent ships KV caches; receivers skip the prefill of what they get.
pub fn kv_mode_latency(
    k: &WorkloadConstants,
    shape: &DialogueShape,
    computes: &Computes,
    links: &LinkRates,
) -> Result<ModeLatencyBreakdown> {
    check_inputs(shape, computes, links)?;
    let ea_first = ea_first_inference(k, shape, computes.ea)?;
    let shared = shape.ea_shared_context();
    let ea_comm = k.kv_payload_bits(shared, shape.ea_gamma)? / links.broadcast;

    let mut aa = Vec::with_capacity(shape.agents.len());
    for (i, ((a, &c), &rate)) in shape
        .agents
        .iter()
        .zip(&computes.agents)
        .zip(&links.uplink)
        .enumerate()
    {
        let first = k.autoregressive_latency(c, a.first_output, shared);
        let omega = shape.kv_aa_history(i);
        let second = k.prefill_latency(c, a.sensing_input, omega)?
            + k.autoregressive_latency(c, a.second_output, omega);
        let bits =
            k.kv_payload_bits(a.first_output + a.sensing_input + a.second_output, a.gamma)?;
        aa.push(([first, second], bits / rate));
    }

    let ea_final =
        k.autoregressive_latency(computes.ea, shape.ea_final_output, shape.kv_ea_history());
    Ok(ModeLatencyBreakdown::assemble(
        [ea_first, ea_final],
        ea_comm,
        aa,
    ))
}

/// Parameter swept by [`ratio_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Output/input ratio β.
    Beta,
    /// Common compute capacity in TFLOPS.
    Compute,
    /// Common SNR in dB.
    Snr,
    /// Number of AAs.
    AaCount,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Beta => "beta",
            SweepAxis::Compute => "compute",
            SweepAxis::Snr => "snr",
            SweepAxis::AaCount => "aa_count",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "beta" => Some(Self::Beta),
            "compute" | "c" | "tflops" => Some(Self::Compute),
            "snr" => Some(Self::Snr),
            "aa_count" | "agents" | "i" => Some(Self::AaCount),
            _ => None,
        }
    }

    pub const ALL: [SweepAxis; 4] = [Self::Beta, Self::Compute, Self::Snr, Self::AaCount];

    /// Grid bracketing the crossover on each axis.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            // 33 log-spaced points over [1/4, 4]
            SweepAxis::Beta => (0..33).map(|i| 2f64.powf(-2.0 + i as f64 / 8.0)).collect(),
            SweepAxis::Compute => (1..=50).map(f64::from).collect(),
            SweepAxis::Snr => (-10..=30).map(f64::from).collect(),
            SweepAxis::AaCount => (1..=30).map(f64::from).collect(),
        }
    }
}

/// Symmetric operating point around which a sweep varies one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepDefaults {
    pub prompt_tokens: f64,
    pub beta: f64,
    pub final_output: f64,
    pub compute_tflops: f64,
    pub snr_db: f64,
    pub agents: usize,
    pub bits_per_token: f64,
    pub gamma: f64,
    pub bandwidth_hz: f64,
}

impl Default for SweepDefaults {
    fn default() -> Self {
        Self {
            prompt_tokens: 1024.0,
            beta: 1.0,
            final_output: 100.0,
            compute_tflops: 10.0,
            snr_db: 5.0,
            agents: 5,
            bits_per_token: 16.0,
            gamma: 2.0,
            bandwidth_hz: 2e9,
        }
    }
}

impl SweepDefaults {
    pub fn with_axis(&self, axis: SweepAxis, x: f64) -> Result<Self> {
        let mut p = self.clone();
        match axis {
            SweepAxis::Beta => p.beta = x,
            SweepAxis::Compute => p.compute_tflops = x,
            SweepAxis::Snr => p.snr_db = x,
            SweepAxis::AaCount => {
                if !(x >= 1.0) || x.fract() != 0.0 {
                    return Err(invalid(
                        "aa_count",
                        format!("{x} is not a positive integer"),
                    ));
                }
                p.agents = x as usize;
            }
        }
        Ok(p)
    }

    /// Evaluates both media at this operating point.
    pub fn evaluate(
        &self,
        k: &WorkloadConstants,
    ) -> Result<(ModeLatencyBreakdown, ModeLatencyBreakdown)> {
        let shape = DialogueShape::symmetric(
            self.agents,
            self.prompt_tokens,
            self.beta,
            self.final_output,
            self.gamma,
            self.bits_per_token,
        );
        let computes =
            Computes::uniform(AgentCompute::from_tflops(self.compute_tflops)?, self.agents);
        let links = LinkRates::symmetric(
            self.bandwidth_hz,
            LinkSnr::from_db(self.snr_db)?,
            self.agents,
        )?;
        Ok((
            nl_mode_latency(k, &shape, &computes, &links)?,
            kv_mode_latency(k, &shape, &computes, &links)?,
        ))
    }
}

/// One grid point of a ratio sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub axis: SweepAxis,
    pub x: f64,
    pub t_nl: f64,
    pub t_kv: f64,
    pub ratio: f64,
    pub bottleneck_nl: usize,
    pub bottleneck_kv: usize,
}

pub fn ratio_sweep(
    k: &WorkloadConstants,
    axis: SweepAxis,
    grid: &[f64],
    defaults: &SweepDefaults,
) -> Result<Vec<RatioRow>> {
    if grid.is_empty() {
        return Err(invalid("grid", "empty"));
    }
    grid.iter()
        .map(|&x| {
            let (nl, kv) = defaults.with_axis(axis, x)?.evaluate(k)?;
            Ok(RatioRow {
                axis,
                x,
                t_nl: nl.total,
                t_kv: kv.total,
                ratio: nl.total / kv.total,
                bottleneck_nl: nl.bottleneck_aa,
                bottleneck_kv: kv.bottleneck_aa,
            })
        })
        .collect()
}

/// Full-band uplink rate helper used by tests and reports.
pub fn full_band_rate(bandwidth_hz: f64, snr: LinkSnr) -> f64 {
    rate_unchecked(1.0, bandwidth_hz, snr.linear())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::ModelSpec;

    fn k() -> WorkloadConstants {
        ModelSpec::llama_7b().constants()
    }

    fn table2() -> (DialogueShape, Computes, LinkRates) {
        let d = SweepDefaults::default();
        let shape = DialogueShape::symmetric(5, 1024.0, 1.0, 100.0, 2.0, 16.0);
        let c = Computes::uniform(AgentCompute::from_tflops(10.0).unwrap(), 5);
        let l = LinkRates::symmetric(d.bandwidth_hz, LinkSnr::from_db(5.0).unwrap(), 5).unwrap();
        (shape, c, l)
    }

    // Values from an independent script evaluating the two-round pipelines.
    #[test]
    fn table2_defaults_match_script() {
        let (s, c, l) = table2();
        let nl = nl_mode_latency(&k(), &s, &c, &l).unwrap();
        let kv = kv_mode_latency(&k(), &s, &c, &l).unwrap();
        assert!((nl.total - 14.116948576994144).abs() < 1e-9, "{}", nl.total);
        assert!((kv.total - 15.043901898446695).abs() < 1e-9, "{}", kv.total);
    }

    #[test]
    fn first_ea_inference_is_mode_independent() {
        let (s, c, l) = table2();
        let nl = nl_mode_latency(&k(), &s, &c, &l).unwrap();
        let kv = kv_mode_latency(&k(), &s, &c, &l).unwrap();
        assert_eq!(nl.ea_inference[0].to_bits(), kv.ea_inference[0].to_bits());
    }

    #[test]
    fn totals_compose_from_components() {
        let (mut s, c, mut l) = table2();
        s.agents[3].second_output = 2000.0;
        l.uplink[1] *= 0.3;
        for b in [
            nl_mode_latency(&k(), &s, &c, &l).unwrap(),
            kv_mode_latency(&k(), &s, &c, &l).unwrap(),
        ] {
            let worst = (0..5)
                .map(|i| b.per_aa_inference[i][0] + b.per_aa_inference[i][1] + b.per_aa_comm[i])
                .fold(f64::MIN, f64::max);
            let expect = b.ea_inference[0] + b.ea_inference[1] + b.ea_comm + worst;
            assert!((b.total - expect).abs() <= 1e-12 * expect);
            let i = b.bottleneck_aa;
            assert_eq!(
                b.per_aa_inference[i][0] + b.per_aa_inference[i][1] + b.per_aa_comm[i],
                worst
            );
        }
    }

    #[test]
    fn single_agent_is_bottleneck() {
        let shape = DialogueShape::symmetric(1, 512.0, 1.0, 100.0, 2.0, 16.0);
        let c = Computes::uniform(AgentCompute::from_tflops(10.0).unwrap(), 1);
        let l = LinkRates::symmetric(2e9, LinkSnr::from_db(5.0).unwrap(), 1).unwrap();
        assert_eq!(
            nl_mode_latency(&k(), &shape, &c, &l).unwrap().bottleneck_aa,
            0
        );
    }

    #[test]
    fn faster_compute_reduces_nl_total() {
        let (s, c, l) = table2();
        let fast = Computes::uniform(AgentCompute::from_tflops(20.0).unwrap(), 5);
        let slow = nl_mode_latency(&k(), &s, &c, &l).unwrap().total;
        assert!(nl_mode_latency(&k(), &s, &fast, &l).unwrap().total < slow);
    }

    #[test]
    fn huge_compression_leaves_pure_compute() {
        let (mut s, c, l) = table2();
        s.ea_gamma = 1e300;
        for a in &mut s.agents {
            a.gamma = 1e300;
        }
        let kv = kv_mode_latency(&k(), &s, &c, &l).unwrap();
        assert!(kv.ea_comm < 1e-280);
        assert!(kv.per_aa_comm.iter().all(|&t| t < 1e-280));
    }

    #[test]
    fn media_ignore_each_others_parameters() {
        let (s, c, l) = table2();
        let mut s2 = s.clone();
        s2.bits_per_token = 32.0;
        assert_eq!(
            kv_mode_latency(&k(), &s, &c, &l).unwrap(),
            kv_mode_latency(&k(), &s2, &c, &l).unwrap()
        );
        let mut s3 = s.clone();
        s3.ea_gamma = 8.0;
        s3.agents.iter_mut().for_each(|a| a.gamma = 8.0);
        assert_eq!(
            nl_mode_latency(&k(), &s, &c, &l).unwrap(),
            nl_mode_latency(&k(), &s3, &c, &l).unwrap()
        );
    }

    #[test]
    fn zero_rate_is_unusable() {
        let (s, c, mut l) = table2();
        l.uplink[2] = 0.0;
        assert_eq!(nl_mode_latency(&k(), &s, &c, &l), Err(Error::LinkUnusable));
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(ratio_sweep(&k(), SweepAxis::Snr, &[], &SweepDefaults::default()).is_err());
    }

    #[test]
    fn default_grids_cover_their_ranges() {
        let beta = SweepAxis::Beta.default_grid();
        assert_eq!(beta.len(), 33);
        assert!((beta[0] - 0.25).abs() < 1e-12 && (beta[32] - 4.0).abs() < 1e-12);
        assert_eq!(SweepAxis::Snr.default_grid().len(), 41);
    }
}
