//! Desk-scale simulation of the separation protocol.
//!
//! * [`wiretap`]: superposition codebooks carrying a secret bit pipe and a
//!   public bit pipe, decoded by maximum likelihood;
//! * [`key`]: key agreement by random linear binning of the quantized source;
//! * [`assembly`]: the two ways of combining the pipes and the key into a
//!   secret message and a secret key, with one-time padding;
//! * [`leakage`]: exact and plug-in estimates of what Eve learns.
//!
//! Every random choice comes from a ChaCha stream derived from the seed, so a
//! run is reproducible and independent of the number of worker threads.

pub mod assembly;
pub mod gf2;
pub mod key;
pub mod leakage;
pub mod wiretap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assembly::{plan_protocol, run_end_to_end, run_end_to_end_with_transcripts, AssemblyCase, ProtocolPlan, SimulationReport};
pub use gf2::{BitMatrix, BitString};
pub use key::{build_key_agreement, KeyAgreementScheme, KeyRates};
pub use leakage::{estimate_leakage, EveRecord, LeakageEstimate, LeakageMode, Transcripts};
pub use wiretap::{build_wiretap_code, build_wiretap_code_with_rates, transmit_and_decode, PipeRates, WiretapCodebooks};

/// Stream ids reserved for codebook construction; trials use `0..trials`.
pub(crate) const WIRETAP_STREAM: u64 = u64::MAX - 1;
pub(crate) const KEY_STREAM: u64 = u64::MAX - 2;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Multiplicative slack: achievable rates are scaled by `1 - backoff`,
    /// the binning rate by `1 + backoff`.
    pub backoff: f64,
    /// Largest codebook, in stored symbols.
    pub memory_cap: usize,
    /// Candidates the binning decoder may examine per episode.
    pub decode_budget: usize,
    /// Leakage estimator; `None` skips the estimate.
    pub leakage: Option<LeakageMode>,
    /// Largest joint law the exact estimator may enumerate.
    pub exact_cap: usize,
    /// Split the blocklength when a full-length codebook exceeds the memory cap.
    pub sub_blocks: bool,
    /// Required slack of the target inside the coupling's region, in bits per use.
    pub region_margin: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 64,
            delta: 0.01,
            trials: 200,
            seed: 0,
            backoff: 0.1,
            memory_cap: 1 << 22,
            decode_budget: 50_000,
            leakage: Some(LeakageMode::Plugin),
            exact_cap: 1 << 24,
            sub_blocks: true,
            region_margin: 0.0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 {
            return Err(Error::InvalidArgument("n and trials must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(0.0..1.0).contains(&self.backoff) {
            return Err(Error::InvalidArgument(format!("backoff must lie in [0,1), got {}", self.backoff)));
        }
        if !(self.region_margin.is_finite() && self.region_margin >= 0.0) {
            return Err(Error::InvalidArgument("region margin must be nonnegative".into()));
        }
        if self.memory_cap == 0 || self.decode_budget == 0 {
            return Err(Error::InvalidArgument("memory cap and decode budget must be positive".into()));
        }
        Ok(())
    }
}

/// Bitwise XOR of equal-length bit strings.
pub fn one_time_pad(message: &[u8], key: &[u8]) -> Result<BitString> {
    if message.len() != key.len() {
        return Err(Error::InvalidArgument(format!(
            "message has {} bits, key has {}",
            message.len(),
            key.len()
        )));
    }
    Ok(message.iter().zip(key).map(|(m, k)| (m ^ k) & 1).collect())
}

pub(crate) fn random_bits<R: Rng>(count: usize, rng: &mut R) -> BitString {
    (0..count).map(|_| rng.random::<bool>() as u8).collect()
}

/// Samples rows of a row-stochastic matrix.
#[derive(Debug, Clone)]
pub(crate) struct RowSampler {
    rows: Vec<Option<WeightedIndex<f64>>>,
}

impl RowSampler {
    pub fn new(matrix: &[f64], cols: usize) -> Self {
        RowSampler {
            rows: matrix.chunks(cols).map(|r| WeightedIndex::new(r).ok()).collect(),
        }
    }

    pub fn sample<R: Rng>(&self, row: usize, rng: &mut R) -> usize {
        match &self.rows[row] {
            Some(w) => w.sample(rng),
            None => 0,
        }
    }
}

/// `log2` of a count as a whole number of bits, when it is a power of two.
pub(crate) fn bits_for(size: usize) -> usize {
    (usize::BITS - size.saturating_sub(1).leading_zeros()) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pad_examples() {
        assert_eq!(one_time_pad(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), vec![0, 1, 1, 0]);
        assert_eq!(one_time_pad(&[1, 0, 1], &[0, 0, 0]).unwrap(), vec![1, 0, 1]);
        assert!(matches!(one_time_pad(&[1], &[0, 1]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn symbol_widths() {
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(3), 2);
        assert_eq!(bits_for(4), 2);
        assert_eq!(bits_for(5), 3);
    }

    proptest! {
        #[test]
        fn pad_is_an_involution(m in prop::collection::vec(0u8..2, 0..64), seed in any::<u64>()) {
            let mut rng = stream_rng(seed, 0);
            let k = random_bits(m.len(), &mut rng);
            let c = one_time_pad(&m, &k).unwrap();
            prop_assert_eq!(one_time_pad(&c, &k).unwrap(), m);
        }
    }
}
