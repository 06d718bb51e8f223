//! Min-max OFDMA bandwidth split.
//!
//! Every uplink must deliver `D_i` bits; agent `i` with fraction `ρ_i` needs
//! `D_i / R_i(ρ_i)` seconds. The split minimizing the slowest agent is found
//! by bisecting on a common deadline `T` and asking each agent for the
//! smallest fraction that meets it.

use serde::Serialize;

use crate::channel::{rate_unchecked, LinkSnr};
use crate::error::{invalid, Error, Result};

/// Smallest fraction handed to any agent by the inner inversion.
pub const RHO_FLOOR: f64 = 1e-9;
/// Iteration cap of the inner inversion.
pub const INNER_MAX_ITERS: u32 = 80;
const INNER_REL_TOL: f64 = 1e-13;
const SUM_SLACK: f64 = 1e-12;

/// Result of one min-max bisection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    /// Slowest agent's latency at `rho`.
    pub tau: f64,
    pub rho: Vec<f64>,
    pub latencies: Vec<f64>,
    /// Outer bisection steps taken.
    pub iterations: u32,
    /// Initial upper bracket, the slowest agent under an even split.
    pub t_max: f64,
}

impl Allocation {
    /// `⌈log2(T_max/δ)⌉ + 1`, the step budget of the outer bisection.
    pub fn iteration_bound(&self, delta: f64) -> u32 {
        iteration_bound(self.t_max, delta)
    }
}

pub fn iteration_bound(t_max: f64, delta: f64) -> u32 {
    if t_max <= delta {
        1
    } else {
        (t_max / delta).log2().ceil() as u32 + 1
    }
}

/// One uplink's demand: payload bits over a full-band SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub bits: f64,
    pub snr: LinkSnr,
}

fn latency(d: &Demand, rho: f64, bandwidth_hz: f64) -> f64 {
    d.bits / rate_unchecked(rho, bandwidth_hz, d.snr.linear())
}

/// Smallest `ρ ∈ [RHO_FLOOR, 1]` meeting deadline `t`, or `None` if even the
/// full band misses it.
pub fn required_fraction(d: &Demand, bandwidth_hz: f64, t: f64) -> Option<f64> {
    if !(t > 0.0) || latency(d, 1.0, bandwidth_hz) > t {
        return None;
    }
    if latency(d, RHO_FLOOR, bandwidth_hz) <= t {
        return Some(RHO_FLOOR);
    }
    // invariant: lo misses the deadline, hi meets it
    let (mut lo, mut hi) = (RHO_FLOOR, 1.0f64);
    for _ in 0..INNER_MAX_ITERS {
        if hi - lo <= INNER_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if latency(d, mid, bandwidth_hz) <= t {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

fn required_all(demands: &[Demand], bandwidth_hz: f64, t: f64) -> Option<Vec<f64>> {
    demands
        .iter()
        .map(|d| required_fraction(d, bandwidth_hz, t))
        .collect()
}

fn feasible(demands: &[Demand], bandwidth_hz: f64, t: f64) -> bool {
    let mut sum = 0.0;
    for d in demands {
        match required_fraction(d, bandwidth_hz, t) {
            Some(r) => sum += r,
            None => return false,
        }
        if sum > 1.0 + SUM_SLACK {
            return false;
        }
    }
    true
}

/// Min-max split of `bandwidth_hz` among `demands`, to deadline resolution
/// `delta` seconds.
///
/// The returned fractions sum to one and every agent's latency lies in the
/// final bracket `[T_low, T_high]`, which is at most `delta` wide.
pub fn bandwidth_bisection(
    demands: &[Demand],
    bandwidth_hz: f64,
    delta: f64,
) -> Result<Allocation> {
    if demands.is_empty() {
        return Err(Error::NoAgents);
    }
    if !(delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    if !(bandwidth_hz > 0.0) {
        return Err(invalid("bandwidth", "must be positive"));
    }
    for (agent, d) in demands.iter().enumerate() {
        if !(d.snr.linear() > 0.0) {
            return Err(Error::Infeasible { agent });
        }
        if !(d.bits > 0.0) || !d.bits.is_finite() {
            return Err(invalid(
                "payload",
                format!("agent {agent} has {} bits", d.bits),
            ));
        }
    }
    let even = 1.0 / demands.len() as f64;
    let t_max = demands
        .iter()
        .map(|d| latency(d, even, bandwidth_hz))
        .fold(0.0, f64::max);

    let (mut t_lo, mut t_hi) = (0.0f64, t_max);
    let mut iterations = 0;
    while t_hi - t_lo > delta {
        let mid = 0.5 * (t_lo + t_hi);
        if mid <= t_lo || mid >= t_hi {
            break;
        }
        iterations += 1;
        if feasible(demands, bandwidth_hz, mid) {
            t_hi = mid;
        } else {
            t_lo = mid;
        }
    }

    let upper = match required_all(demands, bandwidth_hz, t_hi) {
        Some(r) => r,
        // t_hi is still t_max; the even split meets it by construction
        None => vec![even; demands.len()],
    };
    let upper_sum: f64 = upper.iter().sum();
    let mut rho = if t_lo > 0.0 && upper_sum < 1.0 {
        // fractions meeting t_lo, full band where t_lo is out of reach
        let lower: Vec<f64> = demands
            .iter()
            .map(|d| required_fraction(d, bandwidth_hz, t_lo).unwrap_or(1.0))
            .collect();
        let lower_sum: f64 = lower.iter().sum();
        if lower_sum > 1.0 {
            let lambda = (1.0 - upper_sum) / (lower_sum - upper_sum);
            upper
                .iter()
                .zip(&lower)
                .map(|(u, l)| u + lambda * (l - u))
                .collect()
        } else {
            upper.iter().map(|u| u / upper_sum).collect()
        }
    } else {
        upper.iter().map(|u| u / upper_sum).collect::<Vec<_>>()
    };
    let total: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|r| *r = (*r / total).min(1.0));

    let latencies: Vec<f64> = demands
        .iter()
        .zip(&rho)
        .map(|(d, &r)| latency(d, r, bandwidth_hz))
        .collect();
    Ok(Allocation {
        tau: latencies.iter().copied().fold(0.0, f64::max),
        rho,
        latencies,
        iterations,
        t_max,
    })
}

/// Even split `ρ_i = 1/I`.
pub fn uniform_allocation(demands: &[Demand], bandwidth_hz: f64) -> Result<Allocation> {
    if demands.is_empty() {
        return Err(Error::NoAgents);
    }
    for (agent, d) in demands.iter().enumerate() {
        if !(d.snr.linear() > 0.0) {
            return Err(Error::Infeasible { agent });
        }
    }
    let even = 1.0 / demands.len() as f64;
    let latencies: Vec<f64> = demands
        .iter()
        .map(|d| latency(d, even, bandwidth_hz))
        .collect();
    let tau = latencies.iter().copied().fold(0.0, f64::max);
    Ok(Allocation {
        tau,
        rho: vec![even; demands.len()],
        latencies,
        iterations: 0,
        t_max: tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demand(bits: f64, snr: f64) -> Demand {
        Demand {
            bits,
            snr: LinkSnr::new(snr).unwrap(),
        }
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let d = [demand(1e9, 5.0), demand(1e9, 5.0)];
        let a = bandwidth_bisection(&d, 2e9, 1e-6).unwrap();
        assert!((a.rho[0] - 0.5).abs() < 1e-6 && (a.rho[1] - 0.5).abs() < 1e-6);
        assert!((a.latencies[0] - a.latencies[1]).abs() <= 1e-6);
    }

    #[test]
    fn latencies_equalize_within_delta() {
        let d = [
            demand(3e9, 0.5),
            demand(1e8, 20.0),
            demand(7e9, 3.0),
            demand(2e6, 1e-2),
        ];
        let delta = 1e-4;
        let a = bandwidth_bisection(&d, 2e9, delta).unwrap();
        assert!((a.rho.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for t in &a.latencies {
            assert!(a.tau - t <= delta, "{t} vs {}", a.tau);
        }
        assert!(a.iterations <= a.iteration_bound(delta));
        assert!(a.tau <= a.t_max);
    }

    #[test]
    fn single_agent_takes_full_band() {
        let a = bandwidth_bisection(&[demand(1e9, 1.0)], 2e9, 1e-6).unwrap();
        assert!((a.rho[0] - 1.0).abs() < 1e-12);
        assert!((a.tau - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_snr_infeasible() {
        let d = [demand(1e9, 1.0), demand(1e9, 0.0)];
        assert_eq!(
            bandwidth_bisection(&d, 2e9, 1e-4),
            Err(Error::Infeasible { agent: 1 })
        );
    }

    #[test]
    fn inversion_meets_deadline_tightly() {
        let d = demand(5e9, 2.0);
        let t = 4.0;
        let r = required_fraction(&d, 2e9, t).unwrap();
        assert!(latency(&d, r, 2e9) <= t);
        assert!(latency(&d, r * (1.0 - 1e-9), 2e9) > t * (1.0 - 1e-6));
        assert_eq!(required_fraction(&d, 2e9, 0.1), None);
    }

    #[test]
    fn optimized_beats_uniform() {
        let d = [demand(3e9, 0.5), demand(1e8, 20.0), demand(7e9, 3.0)];
        let opt = bandwidth_bisection(&d, 2e9, 1e-4).unwrap();
        let uni = uniform_allocation(&d, 2e9).unwrap();
        assert!(opt.tau <= uni.tau);
    }
}
