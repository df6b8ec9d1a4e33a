//! What Eve learns: exact mutual information of an enumerated law, or a
//! plug-in estimate from sampled transcripts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{entropy_of, snap_information};

/// Fewest transcripts the plug-in estimator accepts.
pub const MIN_PLUGIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakageMode {
    Exact,
    Plugin,
}

/// Pairs `(secret, observation)` over a blocklength `n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Transcripts {
    /// Exact law as `(secret index, observation index, probability)` cells.
    Law { n: usize, cells: Vec<(u64, u64, f64)> },
    /// Independent samples.
    Samples { n: usize, pairs: Vec<(Vec<u8>, Vec<u8>)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageEstimate {
    pub mode: LeakageMode,
    /// Mutual information over the whole block, in bits.
    pub bits_total: f64,
    /// `bits_total / n`.
    pub rate: f64,
    /// Miller-Madow corrected rate; equals `rate` in exact mode.
    pub corrected_rate: f64,
    /// First-order bias of the plug-in rate; zero in exact mode.
    pub bias_bound: f64,
    /// Transcripts used; zero in exact mode.
    pub samples: usize,
    /// Fewer than two samples per observed joint cell.
    pub undersampled: bool,
}

fn mutual_information<A: Ord + Clone, B: Ord + Clone>(cells: impl Iterator<Item = (A, B, f64)>) -> (f64, [usize; 3]) {
    let mut pa: BTreeMap<A, f64> = BTreeMap::new();
    let mut pb: BTreeMap<B, f64> = BTreeMap::new();
    let mut merged: BTreeMap<(A, B), f64> = BTreeMap::new();
    for (a, b, p) in cells {
        if p > 0.0 {
            *pa.entry(a.clone()).or_default() += p;
            *pb.entry(b.clone()).or_default() += p;
            *merged.entry((a, b)).or_default() += p;
        }
    }
    let joint: Vec<f64> = merged.into_values().collect();
    let ha = entropy_of(&pa.values().copied().collect::<Vec<_>>());
    let hb = entropy_of(&pb.values().copied().collect::<Vec<_>>());
    let hab = entropy_of(&joint);
    (snap_information(ha + hb - hab), [pa.len(), pb.len(), joint.len()])
}

fn count<K: Ord>(pairs: &[(K, K)]) -> BTreeMap<(&K, &K), usize> {
    let mut m = BTreeMap::new();
    for (a, b) in pairs {
        *m.entry((a, b)).or_insert(0) += 1;
    }
    m
}

pub fn estimate_leakage(transcripts: &Transcripts, mode: LeakageMode) -> Result<LeakageEstimate> {
    match (transcripts, mode) {
        (Transcripts::Law { n, cells }, LeakageMode::Exact) => {
            let total: f64 = cells.iter().map(|c| c.2).sum();
            if *n == 0 || (total - 1.0).abs() > 1e-9 || cells.iter().any(|c| c.2 < 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "leakage law over n = {n} has total mass {total}"
                )));
            }
            let (bits, _) = mutual_information(cells.iter().copied());
            let rate = bits / *n as f64;
            Ok(LeakageEstimate {
                mode,
                bits_total: bits,
                rate,
                corrected_rate: rate,
                bias_bound: 0.0,
                samples: 0,
                undersampled: false,
            })
        }
        (Transcripts::Samples { n, pairs }, LeakageMode::Plugin) => {
            if pairs.len() < MIN_PLUGIN_SAMPLES {
                return Err(Error::InvalidArgument(format!(
                    "plug-in estimate needs at least {MIN_PLUGIN_SAMPLES} transcripts, got {}",
                    pairs.len()
                )));
            }
            if *n == 0 {
                return Err(Error::InvalidArgument("transcripts over n = 0".into()));
            }
            let total = pairs.len() as f64;
            let counts = count(pairs);
            let (bits, [ka, kb, kab]) =
                mutual_information(counts.iter().map(|(&(a, b), &c)| (a, b, c as f64 / total)));
            let ln2 = std::f64::consts::LN_2;
            let correction = (ka as f64 - 1.0 + kb as f64 - 1.0 - (kab as f64 - 1.0)) / (2.0 * total * ln2);
            let bias = ((ka as f64 - 1.0) * (kb as f64 - 1.0)).max(0.0) / (2.0 * total * ln2);
            let n = *n as f64;
            Ok(LeakageEstimate {
                mode,
                bits_total: bits,
                rate: bits / n,
                corrected_rate: (bits + correction) / n,
                bias_bound: bias / n,
                samples: pairs.len(),
                undersampled: 2 * kab > pairs.len(),
            })
        }
        (_, mode) => Err(Error::InvalidArgument(format!(
            "{mode:?} mode does not apply to these transcripts"
        ))),
    }
}

/// Eve's `(Z^n, SE^n)` from one episode, one symbol per byte.
pub type EveRecord = (Vec<u8>, Vec<u8>);

/// Flat binary records: little-endian `u32` length `n`, then `n` bytes of `Z`
/// and `n` bytes of `SE`.
pub fn encode_transcript_records(records: &[EveRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (z, se) in records {
        if z.len() != se.len() {
            return Err(Error::InvalidArgument(format!(
                "record has {} Z symbols and {} SE symbols",
                z.len(),
                se.len()
            )));
        }
        let n = u32::try_from(z.len()).map_err(|_| Error::InvalidArgument("record too long".into()))?;
        out.extend_from_slice(&n.to_le_bytes());
        out.extend_from_slice(z);
        out.extend_from_slice(se);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_independent_is_zero() {
        let cells = (0..4u64).flat_map(|a| (0..3u64).map(move |b| (a, b, 1.0 / 12.0))).collect();
        let e = estimate_leakage(&Transcripts::Law { n: 2, cells }, LeakageMode::Exact).unwrap();
        assert_eq!(e.bits_total, 0.0);
    }

    #[test]
    fn exact_full_disclosure() {
        let cells = vec![(0, 0, 0.5), (1, 1, 0.5)];
        let e = estimate_leakage(&Transcripts::Law { n: 1, cells }, LeakageMode::Exact).unwrap();
        assert!((e.bits_total - 1.0).abs() < 1e-12);
        assert!((e.rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plugin_needs_samples_and_reports_bias() {
        let few = Transcripts::Samples {
            n: 1,
            pairs: vec![(vec![0], vec![0]); 10],
        };
        assert!(estimate_leakage(&few, LeakageMode::Plugin).is_err());
        let pairs = (0..1000u32)
            .map(|i| (vec![(i % 2) as u8], vec![((i / 2) % 2) as u8]))
            .collect();
        let e = estimate_leakage(&Transcripts::Samples { n: 1, pairs }, LeakageMode::Plugin).unwrap();
        assert!(e.rate.abs() < 1e-9);
        assert!(e.bias_bound > 0.0 && e.rate >= -e.bias_bound);
        assert!(!e.undersampled);
    }

    #[test]
    fn mode_must_match() {
        let law = Transcripts::Law {
            n: 1,
            cells: vec![(0, 0, 1.0)],
        };
        assert!(estimate_leakage(&law, LeakageMode::Plugin).is_err());
    }

    #[test]
    fn record_layout() {
        let bytes = encode_transcript_records(&[(vec![1, 0], vec![2, 2])]).unwrap();
        assert_eq!(bytes, vec![2, 0, 0, 0, 1, 0, 2, 2]);
        assert!(encode_transcript_records(&[(vec![1], vec![])]).is_err());
    }
}
