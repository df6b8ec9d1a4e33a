//! Key agreement from correlated sources by random binning.
//!
//! Alice quantizes `SA^n` to `U1^n`, publishes a random linear hash `psi` of
//! it (the bin index) and keeps a second hash `K_A` as her key. Bob recovers
//! `U1^n` from `psi` and `SB^n`, then applies the same key hash.
//!
//! When `p(u1|sa)` is deterministic the quantizer is applied symbol by symbol
//! and the codebook is implicit; Bob searches candidates in order of
//! decreasing posterior probability. Otherwise an explicit codebook is drawn
//! and Alice picks the first codeword whose joint type with `SA^n` is within
//! `2 delta` of `p(u1,sa)` in total variation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gf2::pack;
use super::{bits_for, stream_rng, BitMatrix, BitString, RowSampler, SimulationConfig, KEY_STREAM};
use crate::coupling::{canonical_source, SA, SB, SE, U1};
use crate::error::{Error, Result};
use crate::prob::{Channel, JointDistribution};

/// Largest explicit codebook index, in bits.
const MAX_CODEBOOK_BITS: usize = 40;

/// Public and key rates in bits per use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRates {
    pub public: f64,
    pub key: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Quantizer {
    /// `u = map[sa]`, written as `width` bits per symbol.
    Symbols { map: Vec<usize>, width: usize, nu: usize },
    /// Explicit codewords, `index_bits` bits per index.
    Codebook {
        words: Vec<u8>,
        nu: usize,
        /// `p(u,sa)`, row-major by `u`.
        target: Vec<f64>,
        tv: f64,
        bins: Vec<u64>,
        keys: Vec<u64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyAgreementScheme {
    pub n: usize,
    pub seed: u64,
    pub bin_bits: usize,
    pub key_bits: usize,
    /// Realized `bin_bits / n` and `key_bits / n`.
    pub rates: KeyRates,
    /// `I(U1;SA|SB) + delta` and `[I(U1;SB) - I(U1;SE)]_+ - delta`.
    pub target: KeyRates,
    bin_hash: BitMatrix,
    key_hash: BitMatrix,
    quantizer: Quantizer,
    nsa: usize,
    nsb: usize,
    nse: usize,
    /// `ln p(u|sb)`, row-major by `sb`.
    posterior: Vec<f64>,
    /// `ln p(sb|u)`, row-major by `u`.
    likelihood: Vec<f64>,
    source_law: Vec<f64>,
    uniform_bits: bool,
    budget: usize,
}

/// Alice's outputs for one source block.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyEncoding {
    pub psi: BitString,
    pub key: BitString,
}

/// Source blocks for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBlock {
    pub sa: Vec<u8>,
    pub sb: Vec<u8>,
    pub se: Vec<u8>,
}

pub fn build_key_agreement(
    source: &JointDistribution,
    u1_given_sa: &Channel,
    n: usize,
    delta: f64,
    seed: u64,
) -> Result<KeyAgreementScheme> {
    let cfg = SimulationConfig {
        n,
        delta,
        seed,
        ..SimulationConfig::default()
    };
    build_key_agreement_with(source, u1_given_sa, &cfg)
}

fn unpack(word: u64, width: usize) -> BitString {
    (0..width).map(|i| (word >> i & 1) as u8).collect()
}

fn pack_word(bits: &[u8]) -> u64 {
    bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | ((b as u64 & 1) << i))
}

pub fn build_key_agreement_with(
    source: &JointDistribution,
    u1_given_sa: &Channel,
    cfg: &SimulationConfig,
) -> Result<KeyAgreementScheme> {
    cfg.validate()?;
    let n = cfg.n;
    let source = canonical_source(source)?;
    let [nsa, nsb, nse] = [0, 1, 2].map(|i| source.variables()[i].size);
    if u1_given_sa.input_size() != nsa || u1_given_sa.outputs().len() != 1 {
        return Err(Error::Composition(format!(
            "kernel SA -> U1 must take {nsa} symbols and emit one variable"
        )));
    }
    if nsa > 256 || nsb > 256 || nse > 256 || u1_given_sa.output_cells() > 256 {
        return Err(Error::InvalidArgument("source alphabets above 256 symbols are not simulated".into()));
    }
    let nu = u1_given_sa.output_cells();
    let per_sa = nsb * nse;
    let mut cells = vec![0.0; nu * nsa * per_sa];
    for (s, &p) in source.probabilities().iter().enumerate() {
        for u in 0..nu {
            cells[u * nsa * per_sa + s] = p * u1_given_sa.entry(s / per_sa, u);
        }
    }
    let full = JointDistribution::new(vec![(U1, nu), (SA, nsa), (SB, nsb), (SE, nse)], cells)?;
    let i_sa_given_sb = full.conditional_mutual_information(&[U1], &[SA], &[SB])?.0;
    let key_target = (full.mutual_information(&[U1], &[SB])?.0 - full.mutual_information(&[U1], &[SE])?.0).max(0.0);
    let target = KeyRates {
        public: i_sa_given_sb + cfg.delta,
        key: (key_target - cfg.delta).max(0.0),
    };

    let p_usb = full.marginal(&[U1, SB])?;
    let p_sb = full.marginal(&[SB])?;
    let p_u = full.marginal(&[U1])?;
    let mut posterior = vec![f64::NEG_INFINITY; nsb * nu];
    let mut likelihood = vec![f64::NEG_INFINITY; nu * nsb];
    for u in 0..nu {
        for sb in 0..nsb {
            let p = p_usb.prob(&[u, sb]);
            if p > 0.0 {
                posterior[sb * nu + u] = (p / p_sb.prob(&[sb])).ln();
                likelihood[u * nsb + sb] = (p / p_u.prob(&[u])).ln();
            }
        }
    }

    let ideal_bin = (n as f64 * (i_sa_given_sb * (1.0 + cfg.backoff) + cfg.delta) - 1e-9).ceil().max(0.0) as usize;
    let ideal_key = (n as f64 * (key_target * (1.0 - cfg.backoff) - cfg.delta) + 1e-9).floor().max(0.0) as usize;

    let mut rng = stream_rng(cfg.seed, KEY_STREAM);
    let (quantizer, total_bits, bin_bits, key_bits, bin_hash, key_hash, uniform_bits);
    match u1_given_sa.as_deterministic() {
        Some(map) => {
            let width = bits_for(nu);
            total_bits = n * width;
            // H(U1|SB) = 0: Bob already knows U1^n
            bin_bits = if i_sa_given_sb == 0.0 { 0 } else { ideal_bin.min(total_bits) };
            key_bits = ideal_key.min(total_bits - bin_bits);
            bin_hash = BitMatrix::random(bin_bits, total_bits, &mut rng);
            key_hash = BitMatrix::random(key_bits, total_bits, &mut rng);
            uniform_bits = nu == 1 << width
                && (0..nu).all(|u| (p_u.prob(&[u]) - 1.0 / nu as f64).abs() < 1e-12);
            quantizer = Quantizer::Symbols { map, width, nu };
        }
        None => {
            let i_sa = full.mutual_information(&[U1], &[SA])?.0;
            let index_bits = (n as f64 * (i_sa + cfg.delta) - 1e-9).ceil().max(0.0) as usize;
            let need = u32::try_from(index_bits)
                .ok()
                .and_then(|b| 1u128.checked_shl(b))
                .and_then(|c| c.checked_mul(n as u128))
                .unwrap_or(u128::MAX);
            if need > cfg.memory_cap as u128 || index_bits > MAX_CODEBOOK_BITS {
                return Err(Error::MemoryCap {
                    needed: need,
                    cap: cfg.memory_cap,
                });
            }
            total_bits = index_bits;
            bin_bits = ideal_bin.min(total_bits);
            key_bits = ideal_key.min(total_bits - bin_bits);
            bin_hash = BitMatrix::random(bin_bits, total_bits, &mut rng);
            key_hash = BitMatrix::random(key_bits, total_bits, &mut rng);
            let law: Vec<f64> = (0..nu).map(|u| p_u.prob(&[u])).collect();
            let sampler = RowSampler::new(&law, nu);
            let count = 1usize << index_bits;
            let words: Vec<u8> = (0..count * n).map(|_| sampler.sample(0, &mut rng) as u8).collect();
            let p_usa = full.marginal(&[U1, SA])?;
            let mut bins = Vec::with_capacity(count);
            let mut keys = Vec::with_capacity(count);
            for i in 0..count {
                let bits = unpack(i as u64, index_bits);
                bins.push(pack_word(&bin_hash.mul(&bits)));
                keys.push(pack_word(&key_hash.mul(&bits)));
            }
            uniform_bits = false;
            quantizer = Quantizer::Codebook {
                words,
                nu,
                target: p_usa.probabilities().to_vec(),
                tv: 2.0 * cfg.delta,
                bins,
                keys,
            };
        }
    }
    Ok(KeyAgreementScheme {
        n,
        seed: cfg.seed,
        bin_bits,
        key_bits,
        rates: KeyRates {
            public: bin_bits as f64 / n as f64,
            key: key_bits as f64 / n as f64,
        },
        target,
        bin_hash,
        key_hash,
        quantizer,
        nsa,
        nsb,
        nse,
        posterior,
        likelihood,
        source_law: source.probabilities().to_vec(),
        uniform_bits,
        budget: cfg.decode_budget,
    })
}

/// Heap entry for the best-first search; smallest cost first.
#[derive(Debug, PartialEq)]
struct Candidate {
    cost: f64,
    node: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Node {
    last: usize,
    parent: Option<usize>,
    syndrome: Vec<u64>,
}

impl KeyAgreementScheme {
    /// Draws `(SA^n, SB^n, SE^n)` i.i.d. from the source.
    pub fn sample_source<R: Rng>(&self, rng: &mut R) -> SourceBlock {
        let sampler = RowSampler::new(&self.source_law, self.source_law.len());
        let per_sa = self.nsb * self.nse;
        let mut out = SourceBlock {
            sa: Vec::with_capacity(self.n),
            sb: Vec::with_capacity(self.n),
            se: Vec::with_capacity(self.n),
        };
        for _ in 0..self.n {
            let s = sampler.sample(0, rng);
            out.sa.push((s / per_sa) as u8);
            out.sb.push((s / self.nse % self.nsb) as u8);
            out.se.push((s % self.nse) as u8);
        }
        out
    }

    /// Probability of one `(sa, se)` symbol pair.
    pub(crate) fn sa_se_law(&self) -> Vec<f64> {
        let mut law = vec![0.0; self.nsa * self.nse];
        for (s, &p) in self.source_law.iter().enumerate() {
            let (sa, se) = (s / (self.nsb * self.nse), s % self.nse);
            law[sa * self.nse + se] += p;
        }
        law
    }

    pub(crate) fn alphabet_sizes(&self) -> (usize, usize) {
        (self.nsa, self.nse)
    }

    fn symbol_bits(&self, u: &[usize], width: usize) -> BitString {
        u.iter()
            .flat_map(|&s| (0..width).rev().map(move |i| (s >> i & 1) as u8))
            .collect()
    }

    pub fn encode(&self, sa: &[u8]) -> Result<KeyEncoding> {
        if sa.len() != self.n || sa.iter().any(|&s| s as usize >= self.nsa) {
            return Err(Error::InvalidArgument(format!("expected {} source symbols below {}", self.n, self.nsa)));
        }
        match &self.quantizer {
            Quantizer::Symbols { map, width, .. } => {
                let u: Vec<usize> = sa.iter().map(|&s| map[s as usize]).collect();
                let bits = self.symbol_bits(&u, *width);
                let packed = pack(&bits);
                Ok(KeyEncoding {
                    psi: self.bin_hash.mul_packed(&packed),
                    key: self.key_hash.mul_packed(&packed),
                })
            }
            Quantizer::Codebook {
                words,
                nu,
                target,
                tv,
                bins,
                keys,
                ..
            } => {
                let n = self.n;
                let chosen = words
                    .chunks_exact(n)
                    .position(|w| {
                        let mut counts = vec![0usize; nu * self.nsa];
                        for (&u, &s) in w.iter().zip(sa) {
                            counts[u as usize * self.nsa + s as usize] += 1;
                        }
                        let dist: f64 = counts
                            .iter()
                            .zip(target)
                            .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
                            .sum();
                        dist / 2.0 <= *tv
                    })
                    .unwrap_or(0);
                Ok(KeyEncoding {
                    psi: unpack(bins[chosen], self.bin_bits),
                    key: unpack(keys[chosen], self.key_bits),
                })
            }
        }
    }

    /// Bob's key from the bin index and `SB^n`; `None` when the search fails.
    pub fn decode(&self, psi: &[u8], sb: &[u8]) -> Option<BitString> {
        if psi.len() != self.bin_bits || sb.len() != self.n {
            return None;
        }
        match &self.quantizer {
            Quantizer::Symbols { width, nu, .. } => self.decode_symbols(psi, sb, *width, *nu),
            Quantizer::Codebook { words, bins, keys, .. } => {
                let target = pack_word(psi);
                let mut best: Option<(usize, f64)> = None;
                for (i, w) in words.chunks_exact(self.n).enumerate() {
                    if bins[i] != target {
                        continue;
                    }
                    let score: f64 = w
                        .iter()
                        .zip(sb)
                        .map(|(&u, &s)| self.likelihood[u as usize * self.nsb + s as usize])
                        .sum();
                    if best.is_none_or(|(_, b)| score > b) {
                        best = Some((i, score));
                    }
                }
                best.map(|(i, _)| unpack(keys[i], self.key_bits))
            }
        }
    }

    fn decode_symbols(&self, psi: &[u8], sb: &[u8], width: usize, nu: usize) -> Option<BitString> {
        // candidate symbols per position, most probable first
        let ranked: Vec<Vec<(usize, f64)>> = (0..self.nsb)
            .map(|s| {
                let mut r: Vec<(usize, f64)> = (0..nu)
                    .map(|u| (u, self.posterior[s * nu + u]))
                    .filter(|p| p.1 > f64::NEG_INFINITY)
                    .collect();
                r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                r
            })
            .collect();
        let mut u: Vec<usize> = sb.iter().map(|&s| ranked[s as usize].first().map_or(0, |p| p.0)).collect();
        let words = self.bin_bits.div_ceil(64);
        let target = pack(psi);
        let mut diff = pack(&self.bin_hash.mul(&self.symbol_bits(&u, width)));
        for (d, t) in diff.iter_mut().zip(&target) {
            *d ^= t;
        }
        diff.resize(words, 0);
        if diff.iter().all(|&w| w == 0) {
            return Some(self.key_hash.mul(&self.symbol_bits(&u, width)));
        }
        let columns: Vec<Vec<u64>> = (0..self.bin_hash.cols()).map(|c| self.bin_hash.column(c)).collect();
        // moves (position, symbol, cost, syndrome change), cheapest first
        let mut moves: Vec<(usize, usize, f64, Vec<u64>)> = Vec::new();
        for (i, &s) in sb.iter().enumerate() {
            let r = &ranked[s as usize];
            for &(alt, lp) in r.iter().skip(1) {
                let mut delta = vec![0u64; words];
                let changed = u[i] ^ alt;
                for t in 0..width {
                    if changed >> (width - 1 - t) & 1 == 1 {
                        for (d, c) in delta.iter_mut().zip(&columns[i * width + t]) {
                            *d ^= c;
                        }
                    }
                }
                moves.push((i, alt, r[0].1 - lp, delta));
            }
        }
        if moves.is_empty() {
            return None;
        }
        moves.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

        let mut nodes = vec![Node {
            last: 0,
            parent: None,
            syndrome: moves[0].3.clone(),
        }];
        let mut heap = BinaryHeap::from([Candidate {
            cost: moves[0].2,
            node: 0,
        }]);
        let xor = |a: &[u64], b: &[u64]| a.iter().zip(b).map(|(x, y)| x ^ y).collect::<Vec<u64>>();
        let mut popped = 0;
        while let Some(Candidate { cost, node }) = heap.pop() {
            popped += 1;
            if popped > self.budget {
                return None;
            }
            if nodes[node].syndrome == diff {
                let mut seen = Vec::new();
                let mut cur = Some(node);
                while let Some(c) = cur {
                    seen.push(moves[nodes[c].last].0);
                    cur = nodes[c].parent;
                }
                let mut sorted = seen.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() == seen.len() {
                    let mut cur = Some(node);
                    while let Some(c) = cur {
                        let (i, alt, _, _) = &moves[nodes[c].last];
                        u[*i] = *alt;
                        cur = nodes[c].parent;
                    }
                    return Some(self.key_hash.mul(&self.symbol_bits(&u, width)));
                }
            }
            let last = nodes[node].last;
            if last + 1 < moves.len() {
                let next = &moves[last + 1];
                let grown = xor(&nodes[node].syndrome, &next.3);
                let parent = nodes[node].parent;
                let swapped = match parent {
                    Some(p) => xor(&nodes[p].syndrome, &next.3),
                    None => next.3.clone(),
                };
                let step = next.2 - moves[last].2;
                nodes.push(Node {
                    last: last + 1,
                    parent: Some(node),
                    syndrome: grown,
                });
                heap.push(Candidate {
                    cost: cost + next.2,
                    node: nodes.len() - 1,
                });
                nodes.push(Node {
                    last: last + 1,
                    parent,
                    syndrome: swapped,
                });
                heap.push(Candidate {
                    cost: cost + step,
                    node: nodes.len() - 1,
                });
            }
        }
        None
    }

    /// Whether the quantized bits are i.i.d. fair, so that linear hashes of
    /// them are uniform on their range.
    pub fn uniform_bits(&self) -> bool {
        self.uniform_bits
    }

    /// Entropy in bits of the first `psi_rows` bin bits followed by the first
    /// `key_rows` key bits, when the quantized bits are uniform.
    pub fn linear_entropy(&self, psi_rows: usize, key_rows: usize) -> Option<usize> {
        if !self.uniform_bits || psi_rows > self.bin_bits || key_rows > self.key_bits {
            return None;
        }
        let rows_b: Vec<usize> = (0..psi_rows).collect();
        let rows_k: Vec<usize> = (0..key_rows).collect();
        Some(self.bin_hash.select_rows(&rows_b).stack(&self.key_hash.select_rows(&rows_k)).rank())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{blind_kernel, bsc_kernel, noiseless_kernel, source_from_views};
    use crate::protocol::stream_rng;

    fn identity() -> Channel {
        Channel::identity(SA, U1, 2).unwrap()
    }

    #[test]
    fn shared_bit_gives_full_rate_key() {
        let source = source_from_views(&[0.5, 0.5], &noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let delta = 0.02;
        let s = build_key_agreement(&source, &identity(), 200, delta, 4).unwrap();
        assert!(s.rates.key >= 0.9 * (1.0 - delta) - delta - 1e-9);
        // Bob already holds SA, nothing to bin
        assert_eq!(s.bin_bits, 0);
        let mut agree = 0;
        for t in 0..100 {
            let mut rng = stream_rng(1, t);
            let block = s.sample_source(&mut rng);
            let e = s.encode(&block.sa).unwrap();
            if s.decode(&e.psi, &block.sb) == Some(e.key.clone()) {
                agree += 1;
            }
        }
        assert!(agree >= 90);
        assert!(s.uniform_bits());
        assert_eq!(s.linear_entropy(0, s.key_bits), Some(s.key_bits));
    }

    #[test]
    fn eve_with_alice_view_gets_empty_key() {
        let source = source_from_views(&[0.5, 0.5], &bsc_kernel(0.1), &noiseless_kernel(2)).unwrap();
        let s = build_key_agreement(&source, &identity(), 50, 0.01, 0).unwrap();
        assert_eq!(s.key_bits, 0);
        assert_eq!(s.target.key, 0.0);
    }

    #[test]
    fn fixed_seed_fixed_binning() {
        let source = source_from_views(&[0.5, 0.5], &bsc_kernel(0.05), &bsc_kernel(0.4)).unwrap();
        let a = build_key_agreement(&source, &identity(), 64, 0.01, 7).unwrap();
        let b = build_key_agreement(&source, &identity(), 64, 0.01, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, build_key_agreement(&source, &identity(), 64, 0.01, 8).unwrap());
    }

    #[test]
    fn noisy_bob_recovers_at_small_n() {
        let source = source_from_views(&[0.5, 0.5], &bsc_kernel(0.02), &bsc_kernel(0.4)).unwrap();
        let s = build_key_agreement(&source, &identity(), 48, 0.02, 3).unwrap();
        assert!(s.key_bits > 0);
        let ok = (0..100)
            .filter(|&t| {
                let mut rng = stream_rng(2, t);
                let b = s.sample_source(&mut rng);
                let e = s.encode(&b.sa).unwrap();
                s.decode(&e.psi, &b.sb) == Some(e.key)
            })
            .count();
        assert!(ok >= 80, "{ok}");
    }

    #[test]
    fn stochastic_quantizer_uses_codebook() {
        let source = source_from_views(&[0.5, 0.5], &noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let noisy = bsc_kernel(0.05).with_names(SA, &[U1]).unwrap();
        let s = build_key_agreement(&source, &noisy, 12, 0.05, 1).unwrap();
        assert!(!s.uniform_bits());
        let mut rng = stream_rng(0, 0);
        let b = s.sample_source(&mut rng);
        let e = s.encode(&b.sa).unwrap();
        assert_eq!(e.psi.len(), s.bin_bits);
        assert_eq!(s.decode(&e.psi, &b.sb).map(|k| k.len()), Some(s.key_bits));

        let big = SimulationConfig {
            n: 400,
            memory_cap: 1 << 20,
            ..SimulationConfig::default()
        };
        assert!(matches!(
            build_key_agreement_with(&source, &noisy, &big),
            Err(Error::MemoryCap { .. })
        ));
    }
}
