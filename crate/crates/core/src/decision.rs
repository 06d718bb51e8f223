//! Per-transmission choice between token and KV-cache media.
//!
//! For a transmitter that has just produced `α` tokens and owes `ξ` tokens of
//! KV the receiver does not have, the two marginal latencies are
//!
//! * NL: receiver prefill over `α` tokens on top of `θ_r` history, plus `b·α/R`
//! * KV: `16·k1·(ξ+α)/(γ·R)`
//!
//! and `f = NL − KV = A(α) − D(α)/R(ρ)` with `A` the prefill time and `D` the
//! extra bits KV puts on the air.

use serde::{Deserialize, Serialize};

use crate::channel::{rate_unchecked, LinkSnr};
use crate::error::{invalid, Error, Result};
use crate::workload::{check_compression, AgentCompute, WorkloadConstants};

/// Transmission medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "NL")]
    Nl,
    #[serde(rename = "KV")]
    Kv,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Nl => "NL",
            Mode::Kv => "KV",
        }
    }

    /// Binary encoding used by the optimizer: `1` is KV.
    pub fn bit(self) -> u8 {
        match self {
            Mode::Nl => 0,
            Mode::Kv => 1,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One transmitter-to-receiver transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionContext {
    pub alpha: f64,
    pub xi: f64,
    pub theta_r: f64,
    pub gamma: f64,
    pub bits_per_token: f64,
    pub receiver_compute: AgentCompute,
    /// Full-band SNR of the link.
    pub snr: LinkSnr,
    pub bandwidth_hz: f64,
    pub rho: f64,
}

impl TransmissionContext {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0) {
            return Err(invalid("alpha", format!("{} below one token", self.alpha)));
        }
        if !(self.xi >= 0.0) || !(self.theta_r >= 0.0) {
            return Err(invalid("context", "xi and theta_r must be non-negative"));
        }
        check_compression(self.gamma)?;
        if !(self.bits_per_token >= 0.0) {
            return Err(invalid("bits_per_token", "must be non-negative"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(invalid("bandwidth", "must be positive"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid("rho", format!("{} outside (0, 1]", self.rho)));
        }
        Ok(())
    }

    pub fn with_rho(self, rho: f64) -> Self {
        Self { rho, ..self }
    }

    pub fn rate(&self) -> f64 {
        rate_unchecked(self.rho, self.bandwidth_hz, self.snr.linear())
    }
}

fn usable(rate: f64) -> Result<f64> {
    if rate > 0.0 {
        Ok(rate)
    } else {
        Err(Error::LinkUnusable)
    }
}

/// Receiver prefill time `A(α)`.
pub fn compute_term(k: &WorkloadConstants, ctx: &TransmissionContext) -> Result<f64> {
    k.prefill_latency(ctx.receiver_compute, ctx.alpha, ctx.alpha + ctx.theta_r)
}

/// Extra bits of KV over tokens, `D(α) = 16·k1·(ξ+α)/γ − b·α`.
pub fn kv_excess_bits(k: &WorkloadConstants, ctx: &TransmissionContext) -> Result<f64> {
    Ok(k.kv_payload_bits(ctx.xi + ctx.alpha, ctx.gamma)? - ctx.bits_per_token * ctx.alpha)
}

fn nl_at_rate(k: &WorkloadConstants, ctx: &TransmissionContext, rate: f64) -> Result<f64> {
    Ok(compute_term(k, ctx)? + ctx.bits_per_token * ctx.alpha / usable(rate)?)
}

fn kv_at_rate(k: &WorkloadConstants, ctx: &TransmissionContext, rate: f64) -> Result<f64> {
    Ok(k.kv_payload_bits(ctx.xi + ctx.alpha, ctx.gamma)? / usable(rate)?)
}

pub fn marginal_latency_nl(k: &WorkloadConstants, ctx: &TransmissionContext) -> Result<f64> {
    ctx.validate()?;
    nl_at_rate(k, ctx, ctx.rate())
}

pub fn marginal_latency_kv(k: &WorkloadConstants, ctx: &TransmissionContext) -> Result<f64> {
    ctx.validate()?;
    kv_at_rate(k, ctx, ctx.rate())
}

/// `f(α) = k4·α² + k5·α + k6`, the NL-minus-KV marginal latency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionPoly {
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
}

impl DecisionPoly {
    pub fn eval(&self, alpha: f64) -> f64 {
        (self.k4 * alpha + self.k5) * alpha + self.k6
    }
}

pub fn decision_poly(k: &WorkloadConstants, ctx: &TransmissionContext) -> Result<DecisionPoly> {
    ctx.validate()?;
    let rate = usable(ctx.rate())?;
    let c = ctx.receiver_compute.flops();
    let (k1, k2, k3) = (k.k1 as f64, k.k2 as f64, k.k3 as f64);
    Ok(DecisionPoly {
        k4: 2.0 * k1 / c,
        k5: (k2 + 2.0 * k1 * ctx.theta_r) / c + (ctx.bits_per_token - 16.0 * k1 / ctx.gamma) / rate,
        k6: k3 / c - 16.0 * k1 * ctx.xi / (ctx.gamma * rate),
    })
}

/// KV iff `f(α) > 0`.
pub fn select_mode(k: &WorkloadConstants, ctx: &TransmissionContext) -> Result<Mode> {
    let f = marginal_latency_nl(k, ctx)? - marginal_latency_kv(k, ctx)?;
    Ok(if f > 0.0 { Mode::Kv } else { Mode::Nl })
}

/// `f` as a function of the bandwidth fraction, for the context's `α`.
pub fn f_of_rho(k: &WorkloadConstants, ctx: &TransmissionContext, rho: f64) -> Result<f64> {
    let ctx = ctx.with_rho(rho);
    ctx.validate()?;
    let rate = usable(ctx.rate())?;
    Ok(compute_term(k, &ctx)? - kv_excess_bits(k, &ctx)? / rate)
}

/// Maximum bisection steps for [`bandwidth_threshold`].
pub const THRESHOLD_MAX_ITERS: u32 = 200;
/// Relative residual `|f|/A` at which [`bandwidth_threshold`] stops early.
pub const THRESHOLD_RESIDUAL: f64 = 1e-9;

/// Fraction `ρ*` at which both media tie, if one exists in `(0, 1]`.
///
/// `f` increases strictly in `ρ` when `D(α) > 0`, so `ρ*` exists iff
/// `f(1) > 0`. The context's own `rho` is ignored.
pub fn bandwidth_threshold(
    k: &WorkloadConstants,
    ctx: &TransmissionContext,
) -> Result<Option<f64>> {
    let ctx = ctx.with_rho(1.0);
    ctx.validate()?;
    if !(ctx.snr.linear() > 0.0) {
        return Err(Error::LinkUnusable);
    }
    let d = kv_excess_bits(k, &ctx)?;
    if !(d > 0.0) {
        return Err(Error::KvPayloadNotDominant(d));
    }
    let a = compute_term(k, &ctx)?;
    let f = |rho: f64| a - d / rate_unchecked(rho, ctx.bandwidth_hz, ctx.snr.linear());
    if f(1.0) <= 0.0 {
        return Ok(None);
    }
    // invariant: f(lo) <= 0 < f(hi)
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (1.0, f(1.0).abs());
    for _ in 0..THRESHOLD_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v.abs() < best.1 {
            best = (mid, v.abs());
        }
        if v.abs() <= THRESHOLD_RESIDUAL * a {
            break;
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(best.0))
}

/// Broadcast-side choice: both media are judged by their worst receiver at
/// the common multicast rate, and the smaller worst case wins (ties to NL).
pub fn broadcast_mode_select(
    k: &WorkloadConstants,
    receivers: &[TransmissionContext],
) -> Result<Mode> {
    let (worst_nl, worst_kv) = broadcast_worst_latencies(k, receivers)?;
    Ok(if worst_kv < worst_nl {
        Mode::Kv
    } else {
        Mode::Nl
    })
}

/// Worst-receiver marginal latency of (NL, KV) at the multicast rate.
pub fn broadcast_worst_latencies(
    k: &WorkloadConstants,
    receivers: &[TransmissionContext],
) -> Result<(f64, f64)> {
    let first = receivers.first().ok_or(Error::NoAgents)?;
    let worst_snr = receivers
        .iter()
        .map(|c| c.snr.linear())
        .min_by(f64::total_cmp)
        .unwrap_or(0.0);
    let rate = usable(rate_unchecked(1.0, first.bandwidth_hz, worst_snr))?;
    let mut nl = f64::NEG_INFINITY;
    let mut kv = f64::NEG_INFINITY;
    for ctx in receivers {
        let ctx = ctx.with_rho(1.0);
        ctx.validate()?;
        nl = nl.max(nl_at_rate(k, &ctx, rate)?);
        kv = kv.max(kv_at_rate(k, &ctx, rate)?);
    }
    Ok((nl, kv))
}
