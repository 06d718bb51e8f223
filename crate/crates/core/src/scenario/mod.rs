//! Randomized scenario generation and the multi-round dialogue engine.

mod multiround;

pub use multiround::{
    run_multi_round, step_multi_round, AgentLedger, AgentRecord, EaRecord, MultiRoundConfig,
    MultiRoundState, RoundTrace,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_watts, path_loss_db, sample_rayleigh, LinkBudget, LinkSnr};
use crate::error::{invalid, Result};
use crate::optimizer::{ScenarioInstance, UplinkAgent};
use crate::rng::{stream, Tag};
use crate::workload::{AgentCompute, WorkloadConstants};

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi {
            Ok(())
        } else {
            Err(invalid(
                name,
                format!("range [{}, {}] is empty", self.lo, self.hi),
            ))
        }
    }
}

/// One-shot uplink contention with randomized placement and payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingleRoundConfig {
    pub agents: usize,
    pub distance_m: Range,
    pub tx_power_dbm: Range,
    /// Output tokens are `alpha_base · U[alpha_scale]`.
    pub alpha_base: f64,
    pub alpha_scale: Range,
    /// KV debt is `U[xi_ratio] · α`.
    pub xi_ratio: Range,
    pub ea_history: f64,
    pub gamma: f64,
    pub bits_per_token: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub ea_compute_tflops: f64,
}

impl Default for SingleRoundConfig {
    fn default() -> Self {
        Self {
            agents: 20,
            distance_m: Range::new(5.0, 10.0),
            tx_power_dbm: Range::new(10.0, 23.0),
            alpha_base: 1024.0,
            alpha_scale: Range::new(0.8, 1.2),
            xi_ratio: Range::new(2.8, 3.2),
            ea_history: 1024.0 * 5.0,
            gamma: 2.0,
            bits_per_token: 16.0,
            bandwidth_hz: 2e9,
            noise_dbm_per_hz: -140.0,
            ea_compute_tflops: 10.0,
        }
    }
}

impl SingleRoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 {
            return Err(invalid("agents", "must be at least 1"));
        }
        self.distance_m.validate("distance_m")?;
        self.tx_power_dbm.validate("tx_power_dbm")?;
        self.alpha_scale.validate("alpha_scale")?;
        self.xi_ratio.validate("xi_ratio")?;
        if !(self.distance_m.lo > 0.0) {
            return Err(invalid("distance_m", "must be positive"));
        }
        if !(self.alpha_base * self.alpha_scale.lo > 0.0) {
            return Err(invalid("alpha", "must be positive"));
        }
        if !(self.xi_ratio.lo >= 0.0) {
            return Err(invalid("xi_ratio", "must be non-negative"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(invalid("bandwidth_hz", "must be positive"));
        }
        AgentCompute::from_tflops(self.ea_compute_tflops)?;
        Ok(())
    }
}

/// Random draws behind one sampled agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentDraw {
    pub distance_m: f64,
    pub tx_power_dbm: f64,
    pub fading_amp: f64,
    pub snr: LinkSnr,
    pub alpha: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledInstance {
    pub instance: ScenarioInstance,
    pub draws: Vec<AgentDraw>,
}

/// Full-band SNR of a link drawn from distance, power and fading.
pub fn draw_link_snr(
    distance_m: f64,
    tx_power_dbm: f64,
    fading_amp: f64,
    noise_dbm_per_hz: f64,
    bandwidth_hz: f64,
) -> Result<LinkSnr> {
    let budget = LinkBudget::new(
        dbm_to_watts(tx_power_dbm),
        path_loss_db(distance_m)?,
        fading_amp,
        dbm_to_watts(noise_dbm_per_hz),
        bandwidth_hz,
    )?;
    Ok(budget.snr())
}

/// Deterministic in `(config, seed)`; agent `i` draws from its own streams.
pub fn sample_single_round(
    k: &WorkloadConstants,
    config: &SingleRoundConfig,
    seed: u64,
) -> Result<SampledInstance> {
    config.validate()?;
    let mut agents = Vec::with_capacity(config.agents);
    let mut draws = Vec::with_capacity(config.agents);
    for i in 0..config.agents {
        let mut link = stream(seed, 0, i as u32, Tag::Link);
        let distance_m = config.distance_m.sample(&mut link);
        let tx_power_dbm = config.tx_power_dbm.sample(&mut link);
        let fading_amp = sample_rayleigh(&mut link);
        let snr = draw_link_snr(
            distance_m,
            tx_power_dbm,
            fading_amp,
            config.noise_dbm_per_hz,
            config.bandwidth_hz,
        )?;
        let mut tokens = stream(seed, 0, i as u32, Tag::Tokens);
        let alpha = config.alpha_base * config.alpha_scale.sample(&mut tokens);
        let xi = config.xi_ratio.sample(&mut tokens) * alpha;
        agents.push(UplinkAgent::new(
            k,
            snr,
            alpha,
            xi,
            config.gamma,
            config.bits_per_token,
        )?);
        draws.push(AgentDraw {
            distance_m,
            tx_power_dbm,
            fading_amp,
            snr,
            alpha,
            xi,
        });
    }
    Ok(SampledInstance {
        instance: ScenarioInstance {
            constants: *k,
            agents,
            bandwidth_hz: config.bandwidth_hz,
            ea_compute: AgentCompute::from_tflops(config.ea_compute_tflops)?,
            ea_history: config.ea_history,
        },
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::ModelSpec;

    fn k() -> WorkloadConstants {
        ModelSpec::llama_7b().constants()
    }

    #[test]
    fn same_seed_same_instance() {
        let cfg = SingleRoundConfig::default();
        assert_eq!(
            sample_single_round(&k(), &cfg, 9).unwrap(),
            sample_single_round(&k(), &cfg, 9).unwrap()
        );
        assert_ne!(
            sample_single_round(&k(), &cfg, 9).unwrap(),
            sample_single_round(&k(), &cfg, 10).unwrap()
        );
    }

    #[test]
    fn adding_agents_keeps_existing_draws() {
        let small = SingleRoundConfig {
            agents: 3,
            ..Default::default()
        };
        let big = SingleRoundConfig {
            agents: 7,
            ..Default::default()
        };
        let a = sample_single_round(&k(), &small, 4).unwrap();
        let b = sample_single_round(&k(), &big, 4).unwrap();
        assert_eq!(a.draws[..], b.draws[..3]);
    }

    #[test]
    fn draws_respect_laws() {
        let cfg = SingleRoundConfig::default();
        for seed in 0..50 {
            for d in sample_single_round(&k(), &cfg, seed).unwrap().draws {
                assert!((819.2..=1228.8).contains(&d.alpha));
                assert!((5.0..=10.0).contains(&d.distance_m));
                assert!((10.0..=23.0).contains(&d.tx_power_dbm));
                assert!(d.xi >= 2.8 * d.alpha && d.xi <= 3.2 * d.alpha);
            }
        }
    }

    #[test]
    fn empty_config_rejected() {
        let cfg = SingleRoundConfig {
            agents: 0,
            ..Default::default()
        };
        assert!(sample_single_round(&k(), &cfg, 0).is_err());
    }
}
