//! Superposition wiretap code with a public cloud layer (`V2`) and a
//! satellite layer (`V1`) indexed by the private and public-b messages.
//!
//! A blocklength that needs more codewords than the memory cap is split into
//! equal sub-blocks, each coded with the same codebook and independent
//! messages, unless [`SimulationConfig::sub_blocks`] is off.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{random_bits, stream_rng, BitString, RowSampler, SimulationConfig, Transcripts, WIRETAP_STREAM};
use crate::coupling::{canonical_channel, AuxiliaryCoupling};
use crate::error::{Error, Result};
use crate::prob::Channel;

/// Largest number of message bits one sub-block may carry.
const MAX_BLOCK_BITS: usize = 40;

/// Draws allowed per satellite codeword before a repeat is accepted.
const REDRAWS: usize = 4096;

/// Rates in bits per use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeRates {
    pub public_a: f64,
    pub public_b: f64,
    pub secret: f64,
}

impl PipeRates {
    /// Backed-off rates of a coupling: each target is scaled by `1 - backoff`,
    /// reduced by `delta` and clamped at zero.
    pub fn for_coupling(coupling: &AuxiliaryCoupling, delta: f64, backoff: f64) -> Self {
        let t = coupling.terms();
        let shrink = |r: f64| (r * (1.0 - backoff) - delta).max(0.0);
        PipeRates {
            public_a: shrink(t.i_v2_y),
            public_b: shrink(t.i_v1_z_given_v2.min(t.i_v1_y_given_v2)),
            secret: shrink(t.i_v1_y_given_v2 - t.i_v1_z_given_v2),
        }
    }

    pub fn total(&self) -> f64 {
        self.public_a + self.public_b + self.secret
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiretapCodebooks {
    pub n: usize,
    pub block_len: usize,
    pub blocks: usize,
    /// Message bits per sub-block.
    pub public_a_bits: usize,
    pub public_b_bits: usize,
    pub private_bits: usize,
    /// Rates realized by the integer bit counts.
    pub rates: PipeRates,
    pub seed: u64,
    /// `2^public_a_bits` rows of `block_len` symbols.
    pub v2_codewords: Vec<u8>,
    /// Row `(a * 2^private_bits + w) * 2^public_b_bits + b`.
    pub v1_codewords: Vec<u8>,
    /// `p(x|v1)`, simulated at the encoder.
    pub x_given_v1: Channel,
}

/// Decoded messages and Eve's observation for one use of the code.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub private: BitString,
    pub public_a: BitString,
    pub public_b: BitString,
    pub z: Vec<u8>,
}

fn divisors_descending(n: usize) -> Vec<usize> {
    let mut d: Vec<usize> = (1..=n).filter(|m| n.is_multiple_of(*m)).collect();
    d.reverse();
    d
}

fn layout(n: usize, rates: &PipeRates, cap: usize, sub_blocks: bool) -> Result<(usize, [usize; 3])> {
    let mut first_need = None;
    for m in divisors_descending(n) {
        let bits = [rates.public_a, rates.public_b, rates.secret].map(|r| (m as f64 * r + 1e-9).floor() as usize);
        let total: usize = bits.iter().sum();
        let need = if total > MAX_BLOCK_BITS {
            u128::MAX
        } else {
            ((1u128 << bits[0]) + (1u128 << total)) * m as u128
        };
        if need <= cap as u128 {
            return Ok((m, bits));
        }
        first_need.get_or_insert(need);
        if !sub_blocks {
            break;
        }
    }
    Err(Error::MemoryCap {
        needed: first_need.unwrap_or(u128::MAX),
        cap,
    })
}

/// Codebooks at the backed-off rates of `coupling`, with default settings.
pub fn build_wiretap_code(coupling: &AuxiliaryCoupling, n: usize, delta: f64, seed: u64) -> Result<WiretapCodebooks> {
    let cfg = SimulationConfig {
        n,
        delta,
        seed,
        ..SimulationConfig::default()
    };
    build_wiretap_code_with(coupling, &cfg)
}

pub fn build_wiretap_code_with(coupling: &AuxiliaryCoupling, cfg: &SimulationConfig) -> Result<WiretapCodebooks> {
    cfg.validate()?;
    let rates = PipeRates::for_coupling(coupling, cfg.delta, cfg.backoff);
    build_wiretap_code_with_rates(coupling, rates, cfg)
}

/// Codebooks at explicit rates; the coupling supplies only the kernels.
pub fn build_wiretap_code_with_rates(
    coupling: &AuxiliaryCoupling,
    rates: PipeRates,
    cfg: &SimulationConfig,
) -> Result<WiretapCodebooks> {
    let n = cfg.n;
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be at least 1".into()));
    }
    for r in [rates.public_a, rates.public_b, rates.secret] {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidArgument(format!("pipe rates must be nonnegative, got {r}")));
        }
    }
    let k = coupling.kernels();
    if k.v2_size() > 256 || k.v1_size() > 256 {
        return Err(Error::InvalidArgument("auxiliary alphabets above 256 symbols are not simulated".into()));
    }
    let (m, [ka, kb, ks]) = layout(n, &rates, cfg.memory_cap, cfg.sub_blocks)?;
    let blocks = n / m;
    let mut rng = stream_rng(cfg.seed, WIRETAP_STREAM);
    let v2_sampler = RowSampler::new(&k.v2_law, k.v2_size());
    let v1_sampler = RowSampler::new(k.v1_given_v2.matrix(), k.v1_size());

    let clouds = 1usize << ka;
    let mut v2_codewords = Vec::with_capacity(clouds * m);
    for _ in 0..clouds * m {
        v2_codewords.push(v2_sampler.sample(0, &mut rng) as u8);
    }
    let satellites = 1usize << (ks + kb);
    let mut v1_codewords = Vec::with_capacity(clouds * satellites * m);
    let support: Vec<f64> = (0..k.v2_size())
        .map(|v| (k.v1_given_v2.row(v).iter().filter(|&&p| p > 0.0).count() as f64).log2())
        .collect();
    let mut word = vec![0u8; m];
    for a in 0..clouds {
        let parent = &v2_codewords[a * m..(a + 1) * m];
        // redraw repeated satellites when the cloud has room for distinct ones
        let room: f64 = parent.iter().map(|&v| support[v as usize]).sum();
        let distinct = room >= (ks + kb) as f64;
        let mut seen = HashSet::with_capacity(if distinct { satellites } else { 0 });
        for _ in 0..satellites {
            for attempt in 0..REDRAWS {
                for (w, &v2) in word.iter_mut().zip(parent) {
                    *w = v1_sampler.sample(v2 as usize, &mut rng) as u8;
                }
                if !distinct || seen.insert(word.clone()) || attempt + 1 == REDRAWS {
                    break;
                }
            }
            v1_codewords.extend_from_slice(&word);
        }
    }
    let realized = |bits: usize| (bits * blocks) as f64 / n as f64;
    Ok(WiretapCodebooks {
        n,
        block_len: m,
        blocks,
        public_a_bits: ka,
        public_b_bits: kb,
        private_bits: ks,
        rates: PipeRates {
            public_a: realized(ka),
            public_b: realized(kb),
            secret: realized(ks),
        },
        seed: cfg.seed,
        v2_codewords,
        v1_codewords,
        x_given_v1: k.x_given_v1.clone(),
    })
}

fn to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

fn from_index(index: usize, width: usize, out: &mut BitString) {
    out.extend((0..width).rev().map(|i| (index >> i & 1) as u8));
}

impl WiretapCodebooks {
    /// Bits carried by the secret pipe over the whole blocklength.
    pub fn secret_pipe_bits(&self) -> usize {
        self.private_bits * self.blocks
    }

    /// Bits carried by the public pipe: public-a then public-b, per sub-block.
    pub fn public_pipe_bits(&self) -> usize {
        (self.public_a_bits + self.public_b_bits) * self.blocks
    }

    fn codeword(&self, a: usize, w: usize, b: usize) -> &[u8] {
        let row = (a << (self.private_bits + self.public_b_bits)) | (w << self.public_b_bits) | b;
        &self.v1_codewords[row * self.block_len..(row + 1) * self.block_len]
    }

    fn v1_rows(&self) -> usize {
        1 << (self.public_a_bits + self.private_bits + self.public_b_bits)
    }

    /// Splits pipe contents into per-block `(a, w, b)` indices.
    fn block_indices(&self, secret: &[u8], public: &[u8]) -> Result<Vec<(usize, usize, usize)>> {
        if secret.len() != self.secret_pipe_bits() || public.len() != self.public_pipe_bits() {
            return Err(Error::InvalidArgument(format!(
                "pipes carry {} secret and {} public bits, got {} and {}",
                self.secret_pipe_bits(),
                self.public_pipe_bits(),
                secret.len(),
                public.len()
            )));
        }
        let (ka, kb, ks) = (self.public_a_bits, self.public_b_bits, self.private_bits);
        Ok((0..self.blocks)
            .map(|i| {
                let p = &public[i * (ka + kb)..(i + 1) * (ka + kb)];
                (to_index(&p[..ka]), to_index(&secret[i * ks..(i + 1) * ks]), to_index(&p[ka..]))
            })
            .collect())
    }
}

/// `p(x|v1)` composed with the channel, plus Bob's log-likelihoods.
struct Link {
    ny: usize,
    nz: usize,
    x_sampler: RowSampler,
    yz_sampler: RowSampler,
    /// `ln p(y|v1)`, row-major by `v1`.
    bob_ll: Vec<f64>,
    /// `p(z|v1)`, row-major by `v1`.
    eve: Vec<f64>,
}

impl Link {
    fn new(code: &WiretapCodebooks, channel: &Channel) -> Result<Self> {
        let channel = canonical_channel(channel)?;
        let (nx, ny, nz) = (channel.input_size(), channel.outputs()[0].size, channel.outputs()[1].size);
        if code.x_given_v1.output_cells() != nx {
            return Err(Error::Composition(format!(
                "code emits {} input symbols, channel takes {nx}",
                code.x_given_v1.output_cells()
            )));
        }
        if ny > 256 || nz > 256 {
            return Err(Error::InvalidArgument("channel outputs above 256 symbols are not simulated".into()));
        }
        let nv1 = code.x_given_v1.input_size();
        let mut bob_ll = vec![0.0; nv1 * ny];
        let mut eve = vec![0.0; nv1 * nz];
        for v in 0..nv1 {
            for x in 0..nx {
                let px = code.x_given_v1.entry(v, x);
                for (o, &p) in channel.row(x).iter().enumerate() {
                    bob_ll[v * ny + o / nz] += px * p;
                    eve[v * nz + o % nz] += px * p;
                }
            }
        }
        for l in &mut bob_ll {
            *l = l.ln();
        }
        Ok(Link {
            ny,
            nz,
            x_sampler: RowSampler::new(code.x_given_v1.matrix(), nx),
            yz_sampler: RowSampler::new(channel.matrix(), ny * nz),
            bob_ll,
            eve,
        })
    }

    /// Most likely satellite row; ties go to the smallest row.
    fn decode(&self, code: &WiretapCodebooks, y: &[u8]) -> usize {
        let m = code.block_len;
        let mut best = (0, f64::NEG_INFINITY);
        for (row, cw) in code.v1_codewords.chunks_exact(m).enumerate() {
            let score: f64 = cw.iter().zip(y).map(|(&v, &y)| self.bob_ll[v as usize * self.ny + y as usize]).sum();
            if score > best.1 {
                best = (row, score);
            }
        }
        debug_assert!(best.0 < code.v1_rows());
        best.0
    }
}

/// Sends the three message strings through `channel` and decodes them at Bob.
///
/// `w_private` holds `private_bits * blocks` bits; the public strings hold the
/// corresponding public-a and public-b bits, block after block.
pub fn transmit_and_decode<R: Rng>(
    code: &WiretapCodebooks,
    channel: &Channel,
    w_private: &[u8],
    w_public_a: &[u8],
    w_public_b: &[u8],
    rng: &mut R,
) -> Result<Transmission> {
    let (ka, kb) = (code.public_a_bits, code.public_b_bits);
    if w_public_a.len() != ka * code.blocks || w_public_b.len() != kb * code.blocks {
        return Err(Error::InvalidArgument(format!(
            "public messages need {} and {} bits, got {} and {}",
            ka * code.blocks,
            kb * code.blocks,
            w_public_a.len(),
            w_public_b.len()
        )));
    }
    let public: BitString = (0..code.blocks)
        .flat_map(|i| {
            w_public_a[i * ka..(i + 1) * ka]
                .iter()
                .chain(&w_public_b[i * kb..(i + 1) * kb])
                .copied()
        })
        .collect();
    let link = Link::new(code, channel)?;
    let (secret, public) = send(code, &link, w_private, &public, rng)?;
    let mut out = Transmission {
        private: secret,
        public_a: Vec::new(),
        public_b: Vec::new(),
        z: Vec::new(),
    };
    for i in 0..code.blocks {
        let p = &public.0[i * (ka + kb)..(i + 1) * (ka + kb)];
        out.public_a.extend_from_slice(&p[..ka]);
        out.public_b.extend_from_slice(&p[ka..]);
    }
    out.z = public.1;
    Ok(out)
}

/// Pipe-level interface: returns Bob's `(secret, (public, z))`.
fn send<R: Rng>(
    code: &WiretapCodebooks,
    link: &Link,
    secret: &[u8],
    public: &[u8],
    rng: &mut R,
) -> Result<(BitString, (BitString, Vec<u8>))> {
    let (ka, kb, ks) = (code.public_a_bits, code.public_b_bits, code.private_bits);
    let m = code.block_len;
    let mut y = vec![0u8; m];
    let mut z = Vec::with_capacity(code.n);
    let mut got_secret = Vec::with_capacity(secret.len());
    let mut got_public = Vec::with_capacity(public.len());
    for (a, w, b) in code.block_indices(secret, public)? {
        for (i, &v) in code.codeword(a, w, b).iter().enumerate() {
            let x = link.x_sampler.sample(v as usize, rng);
            let o = link.yz_sampler.sample(x, rng);
            y[i] = (o / link.nz) as u8;
            z.push((o % link.nz) as u8);
        }
        let row = link.decode(code, &y);
        from_index(row >> (ks + kb), ka, &mut got_public);
        from_index(row & ((1 << kb) - 1), kb, &mut got_public);
        from_index(row >> kb & ((1 << ks) - 1), ks, &mut got_secret);
    }
    Ok((got_secret, (got_public, z)))
}

/// Reusable sender for many episodes over one channel.
pub struct PipeLink<'a> {
    code: &'a WiretapCodebooks,
    link: Link,
}

impl<'a> PipeLink<'a> {
    pub fn new(code: &'a WiretapCodebooks, channel: &Channel) -> Result<Self> {
        Ok(PipeLink {
            code,
            link: Link::new(code, channel)?,
        })
    }

    /// Bob's decoded `(secret, public)` and Eve's `z^n`.
    pub fn send<R: Rng>(&self, secret: &[u8], public: &[u8], rng: &mut R) -> Result<(BitString, BitString, Vec<u8>)> {
        let (s, (p, z)) = send(self.code, &self.link, secret, public, rng)?;
        Ok((s, p, z))
    }

    pub fn eve_size(&self) -> usize {
        self.link.nz
    }

    /// `p(z^n | pipe contents)` as `(z index, probability)` over all `z^n`.
    pub fn eve_law(&self, secret: &[u8], public: &[u8]) -> Result<Vec<f64>> {
        let code = self.code;
        let nz = self.link.nz;
        let mut law = vec![1.0];
        for (a, w, b) in code.block_indices(secret, public)? {
            for &v in code.codeword(a, w, b) {
                let pz = &self.link.eve[v as usize * nz..(v as usize + 1) * nz];
                law = law.iter().flat_map(|&p| pz.iter().map(move |&q| p * q)).collect();
            }
        }
        Ok(law)
    }
}

/// Exact joint law of `(W_private, Z^m)` for one sub-block, with the public
/// messages uniform. Blocks are independent, so the per-use leakage of the
/// whole code equals the per-use leakage of this law.
pub fn wiretap_leakage_law(code: &WiretapCodebooks, channel: &Channel, cap: usize) -> Result<Transcripts> {
    let link = Link::new(code, channel)?;
    let m = code.block_len;
    let nz = link.nz;
    let (ka, kb, ks) = (code.public_a_bits, code.public_b_bits, code.private_bits);
    let outcomes = (nz as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    let cells = outcomes.saturating_mul(1u128 << ks);
    if cells > cap as u128 || outcomes > u64::MAX as u128 {
        return Err(Error::MemoryCap { needed: cells, cap });
    }
    let outcomes = outcomes as usize;
    let weight = 1.0 / (1u64 << (ka + kb + ks)) as f64;
    let mut cells = Vec::with_capacity(outcomes << ks);
    for w in 0..1usize << ks {
        let mut law = vec![0.0; outcomes];
        for a in 0..1usize << ka {
            for b in 0..1usize << kb {
                let mut cw_law = vec![1.0];
                for &v in code.codeword(a, w, b) {
                    let pz = &link.eve[v as usize * nz..(v as usize + 1) * nz];
                    cw_law = cw_law.iter().flat_map(|&p| pz.iter().map(move |&q| p * q)).collect();
                }
                for (acc, p) in law.iter_mut().zip(cw_law) {
                    *acc += weight * p;
                }
            }
        }
        cells.extend(law.into_iter().enumerate().map(|(z, p)| (w as u64, z as u64, p)));
    }
    Ok(Transcripts::Law { n: m, cells })
}

/// Uniform messages for every pipe bit; used by tests and the CLI.
pub fn random_messages<R: Rng>(code: &WiretapCodebooks, rng: &mut R) -> (BitString, BitString, BitString) {
    (
        random_bits(code.secret_pipe_bits(), rng),
        random_bits(code.public_a_bits * code.blocks, rng),
        random_bits(code.public_b_bits * code.blocks, rng),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{assemble_coupling, SA, U1, V1, V2, X};
    use crate::generators::{blind_kernel, broadcast, bsc_kernel, no_source, noiseless_kernel};
    use crate::protocol::{estimate_leakage, LeakageMode};

    fn uniform_input(channel: &Channel) -> AuxiliaryCoupling {
        assemble_coupling(
            &no_source(),
            channel,
            &Channel::constant(SA, 1, U1, 1, 0).unwrap(),
            &[1.0],
            &Channel::from_flat((V2, 1), vec![(V1, 2)], vec![0.5, 0.5]).unwrap(),
            &Channel::identity(V1, X, 2).unwrap(),
        )
        .unwrap()
    }

    fn cfg(n: usize, delta: f64, seed: u64) -> SimulationConfig {
        SimulationConfig {
            n,
            delta,
            seed,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn zero_rates_give_one_codeword() {
        let ch = broadcast(&bsc_kernel(0.1), &bsc_kernel(0.2)).unwrap();
        let zero = PipeRates {
            public_a: 0.0,
            public_b: 0.0,
            secret: 0.0,
        };
        let code = build_wiretap_code_with_rates(&uniform_input(&ch), zero, &cfg(1, 0.1, 3)).unwrap();
        assert_eq!(code.v2_codewords.len(), 1);
        assert_eq!(code.v1_codewords.len(), 1);
    }

    #[test]
    fn noiseless_bob_decodes_every_message() {
        let ch = broadcast(&noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let rates = PipeRates {
            public_a: 0.0,
            public_b: 0.0,
            secret: 1.0,
        };
        let code = build_wiretap_code_with_rates(&uniform_input(&ch), rates, &cfg(8, 0.01, 1)).unwrap();
        assert_eq!(code.private_bits * code.blocks, 8);
        let mut rng = stream_rng(0, 0);
        let link = PipeLink::new(&code, &ch).unwrap();
        for w in 0..256usize {
            let mut bits = Vec::new();
            from_index(w, 8, &mut bits);
            let (got, _, _) = link.send(&bits, &[], &mut rng).unwrap();
            assert_eq!(got, bits);
        }
    }

    #[test]
    fn fixed_seed_fixed_codebooks() {
        let ch = broadcast(&bsc_kernel(0.05), &bsc_kernel(0.3)).unwrap();
        let p = uniform_input(&ch);
        let a = build_wiretap_code(&p, 24, 0.01, 9).unwrap();
        let b = build_wiretap_code(&p, 24, 0.01, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, build_wiretap_code(&p, 24, 0.01, 10).unwrap());
        assert!(a.private_bits > 0 && a.public_b_bits > 0);
    }

    #[test]
    fn memory_cap_without_sub_blocks() {
        let ch = broadcast(&noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let c = SimulationConfig {
            memory_cap: 1000,
            sub_blocks: false,
            ..cfg(64, 0.01, 0)
        };
        assert!(matches!(build_wiretap_code_with(&uniform_input(&ch), &c), Err(Error::MemoryCap { .. })));
        let c = SimulationConfig { sub_blocks: true, ..c };
        let code = build_wiretap_code_with(&uniform_input(&ch), &c).unwrap();
        assert!(code.blocks > 1 && code.block_len * code.blocks == 64);
    }

    #[test]
    fn transmit_checks_lengths() {
        let ch = broadcast(&bsc_kernel(0.05), &bsc_kernel(0.3)).unwrap();
        let code = build_wiretap_code(&uniform_input(&ch), 16, 0.01, 2).unwrap();
        let mut rng = stream_rng(1, 1);
        let (w, a, b) = random_messages(&code, &mut rng);
        let t = transmit_and_decode(&code, &ch, &w, &a, &b, &mut rng).unwrap();
        assert_eq!(t.z.len(), 16);
        assert_eq!(t.private.len(), w.len());
        assert!(transmit_and_decode(&code, &ch, &w[1..], &a, &b, &mut rng).is_err());
    }

    #[test]
    fn blind_eve_learns_nothing_clear_eve_learns_everything() {
        let blind = broadcast(&noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let rates = PipeRates {
            public_a: 0.0,
            public_b: 0.0,
            secret: 1.0,
        };
        let code = build_wiretap_code_with_rates(&uniform_input(&blind), rates, &cfg(1, 0.01, 0)).unwrap();
        let law = wiretap_leakage_law(&code, &blind, 1 << 10).unwrap();
        let e = estimate_leakage(&law, LeakageMode::Exact).unwrap();
        assert!(e.bits_total.abs() < 1e-12);

        let clear = broadcast(&noiseless_kernel(2), &noiseless_kernel(2)).unwrap();
        // force distinct codewords for the two messages
        let mut code = code;
        code.v1_codewords = vec![0, 1];
        let law = wiretap_leakage_law(&code, &clear, 1 << 10).unwrap();
        let e = estimate_leakage(&law, LeakageMode::Exact).unwrap();
        assert!((e.bits_total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leakage_law_respects_cap() {
        let ch = broadcast(&bsc_kernel(0.05), &bsc_kernel(0.3)).unwrap();
        let code = build_wiretap_code(&uniform_input(&ch), 12, 0.01, 2).unwrap();
        assert!(matches!(wiretap_leakage_law(&code, &ch, 16), Err(Error::MemoryCap { .. })));
    }
}
