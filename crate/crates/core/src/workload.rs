//! Analytic cost model of decoder-only transformer inference.
//!
//! Everything here is FLOP accounting: a prefill over `s` new tokens with a
//! context of `phi` tokens, an autoregressive run producing `alpha` tokens,
//! and the size of the KV cache or token stream that carries a context over
//! the air. Latency is FLOPs divided by the agent's effective FLOP/s.
//!
//! Token counts are `f64` because sampled scenarios draw fractional output
//! lengths; the constants themselves are exact integers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Transformer architecture scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawModelSpec")]
pub struct ModelSpec {
    layers: u64,
    heads: u64,
    head_dim: u64,
    hidden_dim: u64,
    ffn_dim: u64,
    vocab: u64,
}

#[derive(Deserialize)]
struct RawModelSpec {
    layers: u64,
    heads: u64,
    head_dim: u64,
    hidden_dim: u64,
    ffn_dim: u64,
    vocab: u64,
}

impl TryFrom<RawModelSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawModelSpec) -> Result<Self> {
        ModelSpec::new(
            raw.layers,
            raw.heads,
            raw.head_dim,
            raw.hidden_dim,
            raw.ffn_dim,
            raw.vocab,
        )
    }
}

impl ModelSpec {
    pub fn new(
        layers: u64,
        heads: u64,
        head_dim: u64,
        hidden_dim: u64,
        ffn_dim: u64,
        vocab: u64,
    ) -> Result<Self> {
        for (name, value) in [
            ("layers", layers),
            ("heads", heads),
            ("head_dim", head_dim),
            ("hidden_dim", hidden_dim),
            ("ffn_dim", ffn_dim),
        ] {
            if value == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        if vocab < 2 {
            return Err(invalid("vocab", "must be at least 2"));
        }
        Ok(Self {
            layers,
            heads,
            head_dim,
            hidden_dim,
            ffn_dim,
            vocab,
        })
    }

    /// LLaMA-7B: 32 layers, 32 heads of width 128, hidden 4096, FFN 11008,
    /// vocabulary 32000.
    pub const fn llama_7b() -> Self {
        Self {
            layers: 32,
            heads: 32,
            head_dim: 128,
            hidden_dim: 4096,
            ffn_dim: 11008,
            vocab: 32000,
        }
    }

    /// Looks up a shipped preset by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "llama-7b" | "llama7b" | "llama_7b" => Some(Self::llama_7b()),
            _ => None,
        }
    }

    pub const PRESETS: &'static [&'static str] = &["llama-7b"];

    pub fn layers(&self) -> u64 {
        self.layers
    }
    pub fn heads(&self) -> u64 {
        self.heads
    }
    pub fn head_dim(&self) -> u64 {
        self.head_dim
    }
    pub fn hidden_dim(&self) -> u64 {
        self.hidden_dim
    }
    pub fn ffn_dim(&self) -> u64 {
        self.ffn_dim
    }
    pub fn vocab(&self) -> u64 {
        self.vocab
    }

    pub fn constants(&self) -> WorkloadConstants {
        derive_constants(self)
    }
}

/// FLOP coefficients of the inference cost polynomials.
///
/// `k1` multiplies token-pair (attention) work, `k2` per-token projection and
/// FFN work, `k3` the single vocabulary projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadConstants {
    pub k1: u64,
    pub k2: u64,
    pub k3: u64,
}

pub fn derive_constants(spec: &ModelSpec) -> WorkloadConstants {
    let attn = spec.layers * spec.heads * spec.head_dim;
    WorkloadConstants {
        k1: 2 * attn,
        k2: 8 * attn * spec.hidden_dim + 4 * spec.layers * spec.hidden_dim * spec.ffn_dim,
        k3: 2 * spec.hidden_dim * spec.vocab,
    }
}

/// Effective compute throughput of one agent in FLOP/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AgentCompute(f64);

impl AgentCompute {
    pub fn new(flops: f64) -> Result<Self> {
        if flops.is_finite() && flops > 0.0 {
            Ok(Self(flops))
        } else {
            Err(invalid(
                "compute",
                format!("{flops} FLOP/s must be positive"),
            ))
        }
    }

    pub fn from_tflops(tflops: f64) -> Result<Self> {
        Self::new(tflops * 1e12)
    }

    pub fn flops(self) -> f64 {
        self.0
    }
}

impl WorkloadConstants {
    fn k(&self) -> (f64, f64, f64) {
        (self.k1 as f64, self.k2 as f64, self.k3 as f64)
    }

    /// KV cache bits per context token at FP16, before compression
    /// (`32·L·H·d_h`, i.e. `16·k1`).
    pub fn kv_bits_per_token(&self) -> f64 {
        16.0 * self.k1 as f64
    }

    /// FLOPs of a prefill over `s` new tokens when the context after the
    /// prefill spans `phi` tokens.
    pub fn prefill_flops(&self, s: f64, phi: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::EmptyPrefill);
        }
        if !(phi >= s) {
            return Err(invalid(
                "phi",
                format!("context {phi} shorter than prefill input {s}"),
            ));
        }
        let (k1, k2, k3) = self.k();
        Ok(k2 * s + 2.0 * k1 * phi * s + k3)
    }

    pub fn prefill_latency(&self, compute: AgentCompute, s: f64, phi: f64) -> Result<f64> {
        Ok(self.prefill_flops(s, phi)? / compute.flops())
    }

    /// FLOPs of generating `alpha` tokens on top of a `phi`-token context.
    /// Zero output tokens cost nothing.
    pub fn autoregressive_flops(&self, alpha: f64, phi: f64) -> f64 {
        debug_assert!(alpha >= 0.0 && phi >= 0.0);
        if alpha <= 0.0 {
            return 0.0;
        }
        let (k1, k2, k3) = self.k();
        k1 * alpha * alpha + 2.0 * k1 * phi * alpha + (k1 + k2 + k3) * alpha
    }

    pub fn autoregressive_latency(&self, compute: AgentCompute, alpha: f64, phi: f64) -> f64 {
        self.autoregressive_flops(alpha, phi) / compute.flops()
    }

    /// Prefill plus decode in closed form.
    pub fn total_inference_latency(
        &self,
        compute: AgentCompute,
        alpha: f64,
        phi: f64,
        s: f64,
    ) -> Result<f64> {
        // validates (s, phi) the same way the prefill does
        self.prefill_flops(s, phi)?;
        let (k1, k2, k3) = self.k();
        let flops = k1 * alpha * alpha
            + 2.0 * k1 * phi * (alpha + s)
            + (k1 + k2 + k3) * alpha
            + k2 * s
            + k3;
        Ok(flops / compute.flops())
    }

    /// Bits needed to ship the KV cache of `context_len` tokens compressed by
    /// `gamma` (`gamma = 2` halves FP16 to 8 bits per element).
    pub fn kv_payload_bits(&self, context_len: f64, gamma: f64) -> Result<f64> {
        check_compression(gamma)?;
        if !(context_len >= 0.0) {
            return Err(invalid("context_len", "must be non-negative"));
        }
        Ok(self.kv_bits_per_token() * context_len / gamma)
    }
}

pub(crate) fn check_compression(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 1.0 {
        Ok(())
    } else {
        Err(invalid(
            "gamma",
            format!("compression ratio {gamma} below 1"),
        ))
    }
}

/// Bits for `alpha` token indices at `bits_per_token` bits each.
pub fn token_payload_bits(alpha: f64, bits_per_token: f64) -> f64 {
    bits_per_token * alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    fn llama() -> WorkloadConstants {
        ModelSpec::llama_7b().constants()
    }

    #[test]
    fn llama_constants_match_hand_values() {
        let k = llama();
        assert_eq!(k.k1, 262_144);
        assert_eq!(k.k2, 10_066_329_600);
        assert_eq!(k.k3, 262_144_000);
    }

    #[test]
    fn unit_prefill_and_decode() {
        let k = llama();
        let one = AgentCompute::new(1.0).unwrap();
        assert_eq!(k.prefill_latency(one, 1.0, 1.0).unwrap(), 10_328_997_888.0);
        assert_eq!(k.autoregressive_latency(one, 1.0, 0.0), 10_328_997_888.0);
        assert_eq!(
            k.total_inference_latency(one, 1.0, 1.0, 1.0).unwrap(),
            (6 * k.k1 + 2 * k.k2 + 2 * k.k3) as f64
        );
    }

    #[test]
    fn prefill_1024_at_10_tflops() {
        let k = llama();
        let c = AgentCompute::new(1e13).unwrap();
        let t = k.prefill_latency(c, 1024.0, 1024.0).unwrap();
        assert!((t - 1.0857939468288).abs() < 1e-12);
        let total = k
            .total_inference_latency(c, 1024.0, 1024.0, 1024.0)
            .unwrap();
        assert!((total - 2.2259198590976).abs() < 1e-12);
    }

    #[test]
    fn doubling_compute_halves_prefill() {
        let k = llama();
        let a = k
            .prefill_latency(AgentCompute::new(3e12).unwrap(), 300.0, 900.0)
            .unwrap();
        let b = k
            .prefill_latency(AgentCompute::new(6e12).unwrap(), 300.0, 900.0)
            .unwrap();
        assert!((a / b - 2.0).abs() < 1e-14);
    }

    #[test]
    fn empty_prefill_rejected() {
        let k = llama();
        let c = AgentCompute::new(1e12).unwrap();
        assert_eq!(k.prefill_latency(c, 0.0, 10.0), Err(Error::EmptyPrefill));
        assert!(k.prefill_latency(c, 10.0, 5.0).is_err());
    }

    #[test]
    fn zero_output_decodes_for_free() {
        let k = llama();
        let c = AgentCompute::new(1e12).unwrap();
        assert_eq!(k.autoregressive_latency(c, 0.0, 5000.0), 0.0);
    }

    #[test]
    fn payload_sizes() {
        let k = llama();
        assert_eq!(k.kv_payload_bits(2048.0, 2.0).unwrap(), 4_294_967_296.0);
        assert_eq!(k.kv_payload_bits(0.0, 3.0).unwrap(), 0.0);
        let g2 = k.kv_payload_bits(777.0, 2.0).unwrap();
        let g16 = k.kv_payload_bits(777.0, 16.0).unwrap();
        assert_eq!(g2 / 8.0, g16);
        assert!(k.kv_payload_bits(10.0, 0.5).is_err());
        assert_eq!(token_payload_bits(1024.0, 16.0), 16_384.0);
        assert_eq!(token_payload_bits(0.0, 16.0), 0.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ModelSpec::new(0, 1, 1, 1, 1, 2).is_err());
        assert!(ModelSpec::new(1, 1, 1, 1, 1, 1).is_err());
        assert!(ModelSpec::new(1, 1, 1, 1, 1, 2).is_ok());
        assert_eq!(ModelSpec::preset("LLaMA-7B"), Some(ModelSpec::llama_7b()));
        assert_eq!(ModelSpec::preset("gpt-2"), None);
        assert!(AgentCompute::new(0.0).is_err());
    }
}
