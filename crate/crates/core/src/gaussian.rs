//! Scalar Gaussian region: `SB = SA + N`, Bob and Eve see the channel input
//! in unit-variance noise, and Eve has no source observation.
//!
//! All rates are in bits per use. The `_nats` variants evaluate the same
//! expressions with natural logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::Bits;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianScenario {
    pub snr_src: f64,
    pub snr_bob: f64,
    pub snr_eve: f64,
    /// Eve's source SNR. Only `None` is supported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_eve_source: Option<f64>,
}

impl GaussianScenario {
    pub fn new(snr_src: f64, snr_bob: f64, snr_eve: f64) -> Result<Self> {
        let s = GaussianScenario {
            snr_src,
            snr_bob,
            snr_eve,
            snr_eve_source: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("snr_src", self.snr_src),
            ("snr_bob", self.snr_bob),
            ("snr_eve", self.snr_eve),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.snr_eve_source.is_some() {
            return Err(Error::InvalidArgument(
                "Gaussian scenarios with an Eve source observation are not supported".into(),
            ));
        }
        Ok(())
    }

    fn parts(&self) -> (f64, f64, f64) {
        let m = self.snr_bob.min(self.snr_eve);
        (self.snr_src, (1.0 + self.snr_src) * (1.0 + self.snr_bob), m)
    }
}

pub fn gaussian_max_sm(s: &GaussianScenario) -> Result<Bits> {
    s.validate()?;
    let (src, prod, m) = s.parts();
    Ok(Bits(0.5 * (prod / (1.0 + src + m)).log2()))
}

pub fn gaussian_max_sk(s: &GaussianScenario, r_sm: Bits) -> Result<Bits> {
    let max = gaussian_max_sm(s)?.0;
    let r = r_sm.0;
    if !(r.is_finite() && r >= 0.0 && r <= max + 1e-12) {
        return Err(Error::Domain(format!(
            "R_SM = {r} bits lies outside [0, {max}]"
        )));
    }
    let (src, prod, m) = s.parts();
    let ratio = (prod * (-2.0 * r).exp2() - src) / (1.0 + m);
    Ok(Bits((0.5 * ratio.log2()).max(0.0)))
}

pub fn gaussian_max_sm_nats(s: &GaussianScenario) -> Result<f64> {
    s.validate()?;
    let (src, prod, m) = s.parts();
    Ok(0.5 * (prod / (1.0 + src + m)).ln())
}

pub fn gaussian_max_sk_nats(s: &GaussianScenario, r_sm_nats: f64) -> Result<f64> {
    let max = gaussian_max_sm_nats(s)?;
    if !(r_sm_nats.is_finite() && r_sm_nats >= 0.0 && r_sm_nats <= max + 1e-12) {
        return Err(Error::Domain(format!(
            "R_SM = {r_sm_nats} nats lies outside [0, {max}]"
        )));
    }
    let (src, prod, m) = s.parts();
    Ok((0.5 * ((prod * (-2.0 * r_sm_nats).exp() - src) / (1.0 + m)).ln()).max(0.0))
}

/// `samples` points `(R_SK, R_SM)` with `R_SM` evenly spaced over `[0, max]`.
pub fn gaussian_boundary(s: &GaussianScenario, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "boundary needs at least 2 samples, got {samples}"
        )));
    }
    let max = gaussian_max_sm(s)?.0;
    (0..samples)
        .map(|i| {
            let r = if i + 1 == samples {
                max
            } else {
                max * i as f64 / (samples - 1) as f64
            };
            Ok((gaussian_max_sk(s, Bits(r))?.0, r))
        })
        .collect()
}

/// Whether every sampled boundary point of `inner` lies in the region of `outer`.
pub fn region_dominates(
    outer: &GaussianScenario,
    inner: &GaussianScenario,
    samples: usize,
) -> Result<bool> {
    let outer_max = gaussian_max_sm(outer)?.0;
    for (sk, sm) in gaussian_boundary(inner, samples)? {
        if sm > outer_max + 1e-12 {
            return Ok(false);
        }
        if gaussian_max_sk(outer, Bits(sm.min(outer_max)))?.0 < sk - 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}
