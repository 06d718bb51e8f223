//! Wireless link model.
//!
//! SNR is carried in linear scale as the full-band value `P·g/(B·N0)` with
//! composite gain `g = 10^(-PL/10)·h²`. An OFDMA user holding a fraction `ρ`
//! of the band sees its noise shrink with its bandwidth, so its rate is
//! `ρ·B·log2(1 + Γ/ρ)`.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Log-distance path loss `30 + 35·log10(d)` dB.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(invalid(
            "distance",
            format!("{distance_m} m must be positive"),
        ));
    }
    Ok(30.0 + 35.0 * distance_m.log10())
}

/// One directed link's power budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_w: f64,
    pub path_loss_db: f64,
    pub fading_amp: f64,
    pub noise_density_w_per_hz: f64,
    pub bandwidth_hz: f64,
}

impl LinkBudget {
    pub fn new(
        tx_power_w: f64,
        path_loss_db: f64,
        fading_amp: f64,
        noise_density_w_per_hz: f64,
        bandwidth_hz: f64,
    ) -> Result<Self> {
        let budget = Self {
            tx_power_w,
            path_loss_db,
            fading_amp,
            noise_density_w_per_hz,
            bandwidth_hz,
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power_w > 0.0) {
            return Err(invalid("tx_power", "must be positive"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(invalid("bandwidth", "must be positive"));
        }
        if !(self.noise_density_w_per_hz > 0.0) {
            return Err(invalid("noise_density", "must be positive"));
        }
        if !(self.fading_amp >= 0.0) {
            return Err(invalid("fading_amp", "must be non-negative"));
        }
        if !(self.path_loss_db >= 0.0) {
            return Err(invalid("path_loss", "must be non-negative"));
        }
        Ok(())
    }

    pub fn snr(&self) -> LinkSnr {
        link_snr(self)
    }
}

/// Linear full-band SNR.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LinkSnr(f64);

impl LinkSnr {
    pub fn new(linear: f64) -> Result<Self> {
        if linear >= 0.0 && linear.is_finite() {
            Ok(Self(linear))
        } else {
            Err(invalid(
                "snr",
                format!("{linear} must be finite and non-negative"),
            ))
        }
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(db_to_linear(db))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        linear_to_db(self.0)
    }
}

pub fn link_snr(budget: &LinkBudget) -> LinkSnr {
    let gain = db_to_linear(-budget.path_loss_db) * budget.fading_amp * budget.fading_amp;
    LinkSnr(budget.tx_power_w * gain / (budget.bandwidth_hz * budget.noise_density_w_per_hz))
}

/// Shannon rate of an OFDMA user holding fraction `rho` of `bandwidth_hz`.
pub fn ofdma_rate(rho: f64, bandwidth_hz: f64, snr: LinkSnr) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid("rho", format!("{rho} outside (0, 1]")));
    }
    Ok(rate_unchecked(rho, bandwidth_hz, snr.0))
}

#[inline]
pub(crate) fn rate_unchecked(rho: f64, bandwidth_hz: f64, snr: f64) -> f64 {
    rho * bandwidth_hz * (snr / rho).ln_1p() / std::f64::consts::LN_2
}

/// Multicast rate limited by the weakest receiver.
pub fn broadcast_rate(bandwidth_hz: f64, snrs: &[LinkSnr]) -> Result<f64> {
    let worst = snrs
        .iter()
        .map(|s| s.0)
        .min_by(f64::total_cmp)
        .ok_or(Error::NoAgents)?;
    Ok(rate_unchecked(1.0, bandwidth_hz, worst))
}

/// Rayleigh amplitude with unit second moment (`E[h²] = 1`).
pub fn sample_rayleigh<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // h² ~ Exp(1)
    let power: f64 = rng.sample(Exp1);
    power.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_values() {
        assert!((path_loss_db(10.0).unwrap() - 65.0).abs() < 1e-12);
        assert_eq!(path_loss_db(1.0).unwrap(), 30.0);
        assert!((path_loss_db(5.0).unwrap() - 54.4639).abs() < 1e-4);
        assert!(path_loss_db(0.0).is_err());
        assert!(path_loss_db(-1.0).is_err());
    }

    #[test]
    fn snr_definition() {
        // P·g = B·N0 gives unit SNR
        let b = LinkBudget::new(2e-8, 0.0, 1.0, 1e-17, 2e9).unwrap();
        assert!((b.snr().linear() - 1.0).abs() < 1e-12);
        let doubled = LinkBudget {
            fading_amp: 2.0,
            ..b
        };
        assert!((doubled.snr().linear() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn snr_from_dbm_budget() {
        // 23 dBm, 65 dB, h = 1, 2 GHz, -140 dBm/Hz; value from the dB script
        let b = LinkBudget::new(dbm_to_watts(23.0), 65.0, 1.0, dbm_to_watts(-140.0), 2e9).unwrap();
        assert!((b.snr().linear() - 3.1547867224009654).abs() < 1e-9);
        assert!((b.snr().db() - 4.989700043360188).abs() < 1e-9);
    }

    #[test]
    fn ofdma_rate_values() {
        let unit = LinkSnr::new(1.0).unwrap();
        assert!((ofdma_rate(1.0, 2e9, unit).unwrap() - 2e9).abs() < 1e-3);
        let r = ofdma_rate(0.5, 2e9, LinkSnr::new(3.0).unwrap()).unwrap();
        assert!((r - 1e9 * 7f64.log2()).abs() < 1e-3);
        assert_eq!(
            ofdma_rate(0.3, 2e9, LinkSnr::new(0.0).unwrap()).unwrap(),
            0.0
        );
        assert!(ofdma_rate(0.0, 2e9, unit).is_err());
        assert!(ofdma_rate(1.5, 2e9, unit).is_err());
    }

    #[test]
    fn broadcast_takes_worst_link() {
        let snrs = [LinkSnr::new(1.0).unwrap(), LinkSnr::new(3.0).unwrap()];
        assert!((broadcast_rate(2e9, &snrs).unwrap() - 2e9).abs() < 1e-3);
        let rev = [snrs[1], snrs[0]];
        assert_eq!(broadcast_rate(2e9, &snrs), broadcast_rate(2e9, &rev));
        assert_eq!(
            broadcast_rate(2e9, &snrs[1..]).unwrap(),
            ofdma_rate(1.0, 2e9, snrs[1]).unwrap()
        );
        assert_eq!(broadcast_rate(2e9, &[]), Err(Error::NoAgents));
    }

    #[test]
    fn rayleigh_second_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let h = sample_rayleigh(&mut rng);
            assert!(h >= 0.0);
            sum += h * h;
        }
        let mean = sum / n as f64;
        assert!((0.99..=1.01).contains(&mean), "E[h^2] = {mean}");
    }

    #[test]
    fn rayleigh_is_deterministic() {
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..16).map(|_| sample_rayleigh(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..16).map(|_| sample_rayleigh(&mut rng)).collect()
        };
        assert_eq!(a, b);
    }
}
