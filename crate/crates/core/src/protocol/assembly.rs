//! Combining the bit pipes and the agreed key into a secret message and a
//! secret key.
//!
//! Case 1 (`R_SM >= R_SBP`): the whole secret pipe carries message bits, the
//! rest of the message goes over the public pipe one-time padded with part
//! of the agreed key, and the bin index rides on the public pipe.
//!
//! Case 2 (`R_SM < R_SBP`): the message uses part of the secret pipe, the
//! remainder carries the start of the bin index (or fair coins once it runs
//! out), and those bits join the agreed key.
//!
//! Unused pipe capacity is filled with fair coin flips, so every episode
//! pushes exactly the pipes' capacity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::key::{build_key_agreement_with, KeyAgreementScheme, SourceBlock};
use super::leakage::{
    estimate_leakage, EveRecord, LeakageEstimate, LeakageMode, Transcripts, MIN_PLUGIN_SAMPLES,
};
use super::wiretap::{build_wiretap_code_with, PipeLink, WiretapCodebooks};
use super::{one_time_pad, random_bits, stream_rng, BitString, SimulationConfig};
use crate::coupling::{assemble_from_kernels, AuxiliaryCoupling};
use crate::error::{Error, Result};
use crate::prob::{entropy_of, Channel, JointDistribution, DEFAULT_CELL_LIMIT};
use crate::region::region_for_coupling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssemblyCase {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl AssemblyCase {
    pub fn number(self) -> u8 {
        match self {
            AssemblyCase::One => 1,
            AssemblyCase::Two => 2,
        }
    }
}

/// Integer bit budget of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPlan {
    pub case: AssemblyCase,
    pub n: usize,
    /// `(R_SK, R_SM)` requested.
    pub target: (f64, f64),
    pub secret_pipe_bits: usize,
    pub public_pipe_bits: usize,
    pub message_bits: usize,
    pub key_bits: usize,
    /// Length of the bin index `psi`.
    pub bin_bits: usize,
    /// Length of the agreed key `K_A`.
    pub agreed_bits: usize,
    /// Message bits sent padded over the public pipe (case 1).
    pub padded_bits: usize,
    /// Bits of `psi` carried by the secret pipe (case 2).
    pub psi_in_secret: usize,
    /// Fair coins filling the secret pipe.
    pub secret_filler: usize,
    /// Fair coins filling the public pipe.
    pub public_filler: usize,
}

impl ProtocolPlan {
    /// Bits pushed through both pipes in one episode.
    pub fn pipe_bits(&self) -> usize {
        self.secret_pipe_bits + self.public_pipe_bits
    }

    /// Agreed key bits consumed by the assembly.
    pub fn agreed_used(&self) -> usize {
        match self.case {
            AssemblyCase::One => self.key_bits + self.padded_bits,
            AssemblyCase::Two => self.key_bits.saturating_sub(self.secret_pipe_bits - self.message_bits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub case: AssemblyCase,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub delta: f64,
    pub backoff: f64,
    pub plan: ProtocolPlan,
    /// Secret and public pipe rates realized by the code, bits per use.
    pub secret_pipe_rate: f64,
    pub public_pipe_rate: f64,
    pub message_error_rate: f64,
    /// Frequency of `K_A != K_B`, binning failures included.
    pub key_error_rate: f64,
    /// Frequency of any pipe bit decoded wrongly.
    pub pipe_error_rate: f64,
    /// Frequency of the binning decoder giving up.
    pub binning_failure_rate: f64,
    /// `(log2 |K| - H(K)) / n`.
    pub key_uniformity_deficit: f64,
    /// `rank` (exact, linear hashes of uniform bits), `plugin` (Miller-Madow
    /// over the trials) or `empty`.
    pub uniformity_method: String,
    pub leakage: Option<LeakageEstimate>,
}

/// A protocol instance: codes, key scheme and bit plan.
pub struct Protocol {
    pub plan: ProtocolPlan,
    pub code: WiretapCodebooks,
    pub key: KeyAgreementScheme,
    channel: Channel,
}

fn check_target(coupling: &AuxiliaryCoupling, target: (f64, f64), margin: f64) -> Result<()> {
    if !(target.0.is_finite() && target.1.is_finite() && target.0 >= 0.0 && target.1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("target rates must be nonnegative, got {target:?}")));
    }
    let region = region_for_coupling(coupling)?;
    let slack = region.margin(target);
    if slack < margin - 1e-12 {
        return Err(Error::Precondition {
            leg: "target".into(),
            reason: format!(
                "({}, {}) has margin {slack:.6} in the coupling's region, {margin} required",
                target.0, target.1
            ),
        });
    }
    Ok(())
}

fn short(leg: &str, reason: String) -> Error {
    Error::Precondition {
        leg: leg.into(),
        reason,
    }
}

/// Builds codes and the bit plan for `target = (R_SK, R_SM)`.
pub fn plan_protocol(
    source: &JointDistribution,
    channel: &Channel,
    coupling: &AuxiliaryCoupling,
    target: (f64, f64),
    cfg: &SimulationConfig,
) -> Result<Protocol> {
    cfg.validate()?;
    let coupling = assemble_from_kernels(source, channel, coupling.kernels(), DEFAULT_CELL_LIMIT)?;
    check_target(&coupling, target, cfg.region_margin)?;
    let case = if target.1 >= coupling.terms().secret_pipe_rate() {
        AssemblyCase::One
    } else {
        AssemblyCase::Two
    };
    let code = build_wiretap_code_with(&coupling, cfg)?;
    let key = build_key_agreement_with(source, &coupling.kernels().u1_given_sa, cfg)?;
    let n = cfg.n;
    let (s, p) = (code.secret_pipe_bits(), code.public_pipe_bits());
    let (b, kappa) = (key.bin_bits, key.key_bits);
    let m = (n as f64 * target.1 + 1e-9).floor() as usize;
    let k = (n as f64 * target.0 + 1e-9).floor() as usize;
    let mut plan = ProtocolPlan {
        case,
        n,
        target,
        secret_pipe_bits: s,
        public_pipe_bits: p,
        message_bits: m,
        key_bits: k,
        bin_bits: b,
        agreed_bits: kappa,
        padded_bits: 0,
        psi_in_secret: 0,
        secret_filler: 0,
        public_filler: 0,
    };
    match case {
        AssemblyCase::One => {
            let padded = m.saturating_sub(s);
            if b + padded > p {
                return Err(short(
                    "public pipe",
                    format!("{b} bin bits and {padded} padded message bits exceed {p} public bits"),
                ));
            }
            if k + padded > kappa {
                return Err(short(
                    "key agreement",
                    format!("{k} key bits and {padded} pad bits exceed {kappa} agreed bits"),
                ));
            }
            plan.padded_bits = padded;
            plan.secret_filler = s - m.min(s);
            plan.public_filler = p - b - padded;
        }
        AssemblyCase::Two => {
            if m > s {
                return Err(short("secret pipe", format!("{m} message bits exceed {s} secret bits")));
            }
            let spare = s - m;
            let in_secret = b.min(spare);
            if b - in_secret > p {
                return Err(short(
                    "public pipe",
                    format!("{} bin bits exceed {p} public bits", b - in_secret),
                ));
            }
            if k > spare + kappa {
                return Err(short(
                    "key agreement",
                    format!("{k} key bits exceed {spare} spare secret bits and {kappa} agreed bits"),
                ));
            }
            plan.psi_in_secret = in_secret;
            plan.secret_filler = spare - in_secret;
            plan.public_filler = p - (b - in_secret);
        }
    }
    Ok(Protocol {
        plan,
        code,
        key,
        channel: channel.clone(),
    })
}

/// Alice's pipe contents and key for one episode.
struct Sent {
    secret: BitString,
    public: BitString,
    key: BitString,
}

struct Outcome {
    message_ok: bool,
    key_ok: bool,
    pipes_ok: bool,
    binning_failed: bool,
    key: BitString,
    secret_view: Vec<u8>,
    eve_view: (Vec<u8>, Vec<u8>),
}

impl Protocol {
    fn alice(&self, sa: &[u8], message: &[u8], secret_coins: &[u8], public_coins: &[u8]) -> Result<Sent> {
        let plan = &self.plan;
        let enc = self.key.encode(sa)?;
        let (m, k) = (plan.message_bits, plan.key_bits);
        let mut secret = Vec::with_capacity(plan.secret_pipe_bits);
        let mut public = Vec::with_capacity(plan.public_pipe_bits);
        let key = match plan.case {
            AssemblyCase::One => {
                let direct = m - plan.padded_bits;
                secret.extend_from_slice(&message[..direct]);
                secret.extend_from_slice(secret_coins);
                public.extend_from_slice(&enc.psi);
                public.extend(one_time_pad(&message[direct..], &enc.key[k..k + plan.padded_bits])?);
                public.extend_from_slice(public_coins);
                enc.key[..k].to_vec()
            }
            AssemblyCase::Two => {
                secret.extend_from_slice(message);
                secret.extend_from_slice(&enc.psi[..plan.psi_in_secret]);
                secret.extend_from_slice(secret_coins);
                public.extend_from_slice(&enc.psi[plan.psi_in_secret..]);
                public.extend_from_slice(public_coins);
                let mut k_full = secret[m..].to_vec();
                k_full.extend_from_slice(&enc.key);
                k_full.truncate(k);
                k_full
            }
        };
        debug_assert_eq!(secret.len() + public.len(), plan.pipe_bits());
        Ok(Sent { secret, public, key })
    }

    /// Bob's `(message, key)`, or `None` for the key when binning fails.
    fn bob(&self, secret: &[u8], public: &[u8], sb: &[u8]) -> (BitString, Option<BitString>) {
        let plan = &self.plan;
        let (m, k, b) = (plan.message_bits, plan.key_bits, plan.bin_bits);
        let needs_agreed = plan.agreed_used() > 0;
        match plan.case {
            AssemblyCase::One => {
                let direct = m - plan.padded_bits;
                let psi = &public[..b];
                let agreed = if needs_agreed {
                    self.key.decode(psi, sb)
                } else {
                    Some(vec![0; self.key.key_bits])
                };
                let mut message = secret[..direct].to_vec();
                match agreed {
                    Some(kb) => {
                        let padded = &public[b..b + plan.padded_bits];
                        message.extend(one_time_pad(padded, &kb[k..k + plan.padded_bits]).expect("equal lengths"));
                        (message, Some(kb[..k].to_vec()))
                    }
                    None => {
                        // 2 is never a bit, so the message cannot match
                        message.extend(std::iter::repeat_n(2, plan.padded_bits));
                        (message, None)
                    }
                }
            }
            AssemblyCase::Two => {
                let message = secret[..m].to_vec();
                let mut psi = secret[m..m + plan.psi_in_secret].to_vec();
                psi.extend_from_slice(&public[..b - plan.psi_in_secret]);
                let mut k_full = secret[m..].to_vec();
                if needs_agreed {
                    match self.key.decode(&psi, sb) {
                        Some(kb) => k_full.extend(kb),
                        None => return (message, None),
                    }
                }
                k_full.truncate(k);
                (message, Some(k_full))
            }
        }
    }

    fn episode(&self, link: &PipeLink<'_>, trial: u64, seed: u64) -> Result<Outcome> {
        let plan = &self.plan;
        let mut rng = stream_rng(seed, trial);
        let SourceBlock { sa, sb, se } = self.key.sample_source(&mut rng);
        let message = random_bits(plan.message_bits, &mut rng);
        let secret_coins = random_bits(plan.secret_filler, &mut rng);
        let public_coins = random_bits(plan.public_filler, &mut rng);
        let sent = self.alice(&sa, &message, &secret_coins, &public_coins)?;
        let (secret, public, z) = link.send(&sent.secret, &sent.public, &mut rng)?;
        let (got_message, got_key) = self.bob(&secret, &public, &sb);
        let mut secret_view = message;
        secret_view.extend_from_slice(&sent.key);
        Ok(Outcome {
            message_ok: got_message == secret_view[..plan.message_bits],
            key_ok: got_key.as_deref() == Some(&sent.key[..]),
            pipes_ok: secret == sent.secret && public == sent.public,
            binning_failed: got_key.is_none(),
            key: sent.key,
            secret_view,
            eve_view: (z, se),
        })
    }

    /// Exact joint law of `((M, K), (Z^n, SE^n))` by full enumeration.
    fn exact_law(&self, link: &PipeLink<'_>, cap: usize) -> Result<Transcripts> {
        let plan = &self.plan;
        let n = plan.n;
        let (nsa, nse) = self.key.alphabet_sizes();
        let nz = link.eve_size();
        let coins = plan.message_bits + plan.secret_filler + plan.public_filler;
        let pow = |base: usize| (base as u128).checked_pow(n as u32);
        let space = pow(nsa * nse)
            .zip(pow(nz))
            .and_then(|(a, b)| a.checked_mul(b))
            .and_then(|v| v.checked_mul(1u128 << coins.min(127)))
            .unwrap_or(u128::MAX);
        let obs_space = pow(nz).zip(pow(nse)).and_then(|(a, b)| a.checked_mul(b));
        if coins >= 64
            || space > cap as u128
            || plan.message_bits + plan.key_bits > 64
            || obs_space.is_none_or(|v| v > u64::MAX as u128)
        {
            return Err(Error::MemoryCap { needed: space, cap });
        }
        let pair_law = self.key.sa_se_law();
        let se_space = nse.pow(n as u32);
        let mut cells = Vec::new();
        let coin_weight = 1.0 / (1u64 << coins) as f64;
        let mut digits = vec![0usize; n];
        for src in 0..(nsa * nse).pow(n as u32) {
            let mut rest = src;
            for d in digits.iter_mut() {
                *d = rest % (nsa * nse);
                rest /= nsa * nse;
            }
            let p_src: f64 = digits.iter().map(|&d| pair_law[d]).product();
            if p_src == 0.0 {
                continue;
            }
            let sa: Vec<u8> = digits.iter().map(|&d| (d / nse) as u8).collect();
            let se_index = digits.iter().rev().fold(0usize, |acc, &d| acc * nse + d % nse);
            for c in 0..1u64 << coins {
                let bits: BitString = (0..coins).map(|i| (c >> i & 1) as u8).collect();
                let (message, rest) = bits.split_at(plan.message_bits);
                let (secret_coins, public_coins) = rest.split_at(plan.secret_filler);
                let sent = self.alice(&sa, message, secret_coins, public_coins)?;
                let secret_index = message
                    .iter()
                    .chain(&sent.key)
                    .fold(0u64, |acc, &b| (acc << 1) | b as u64);
                let weight = p_src * coin_weight;
                for (z, pz) in link.eve_law(&sent.secret, &sent.public)?.into_iter().enumerate() {
                    if pz > 0.0 {
                        cells.push((secret_index, (z * se_space + se_index) as u64, weight * pz));
                    }
                }
            }
        }
        Ok(Transcripts::Law { n, cells })
    }
}

fn plugin_entropy(samples: &[BitString]) -> f64 {
    let mut counts = std::collections::BTreeMap::new();
    for s in samples {
        *counts.entry(s).or_insert(0usize) += 1;
    }
    let total = samples.len() as f64;
    let probs: Vec<f64> = counts.values().map(|&c| c as f64 / total).collect();
    entropy_of(&probs) + (counts.len() as f64 - 1.0) / (2.0 * total * std::f64::consts::LN_2)
}

/// Runs `cfg.trials` independent episodes and aggregates the results.
pub fn run_end_to_end(
    source: &JointDistribution,
    channel: &Channel,
    coupling: &AuxiliaryCoupling,
    target: (f64, f64),
    cfg: &SimulationConfig,
) -> Result<SimulationReport> {
    Ok(run_end_to_end_with_transcripts(source, channel, coupling, target, cfg)?.0)
}

/// As [`run_end_to_end`], also returning Eve's `(Z^n, SE^n)` per trial.
pub fn run_end_to_end_with_transcripts(
    source: &JointDistribution,
    channel: &Channel,
    coupling: &AuxiliaryCoupling,
    target: (f64, f64),
    cfg: &SimulationConfig,
) -> Result<(SimulationReport, Vec<EveRecord>)> {
    let protocol = plan_protocol(source, channel, coupling, target, cfg)?;
    protocol.run(cfg)
}

impl Protocol {
    pub fn run(&self, cfg: &SimulationConfig) -> Result<(SimulationReport, Vec<EveRecord>)> {
        let link = PipeLink::new(&self.code, &self.channel)?;
        let outcomes: Vec<Outcome> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| self.episode(&link, t, cfg.seed))
            .collect::<Result<_>>()?;
        let plan = &self.plan;
        let trials = outcomes.len() as f64;
        let rate = |f: &dyn Fn(&Outcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / trials;

        let k = plan.key_bits;
        let (deficit, method) = if k == 0 {
            (0.0, "empty")
        } else if let Some(h) = self.linear_key_entropy() {
            ((k - h) as f64 / plan.n as f64, "rank")
        } else {
            let keys: Vec<BitString> = outcomes.iter().map(|o| o.key.clone()).collect();
            ((k as f64 - plugin_entropy(&keys).min(k as f64)) / plan.n as f64, "plugin")
        };

        let leakage = match cfg.leakage {
            None => None,
            Some(LeakageMode::Exact) => Some(estimate_leakage(&self.exact_law(&link, cfg.exact_cap)?, LeakageMode::Exact)?),
            Some(LeakageMode::Plugin) if outcomes.len() >= MIN_PLUGIN_SAMPLES => {
                let pairs = outcomes
                    .iter()
                    .map(|o| {
                        let mut obs = o.eve_view.0.clone();
                        obs.extend_from_slice(&o.eve_view.1);
                        (o.secret_view.clone(), obs)
                    })
                    .collect();
                Some(estimate_leakage(&Transcripts::Samples { n: plan.n, pairs }, LeakageMode::Plugin)?)
            }
            Some(LeakageMode::Plugin) => None,
        };
        let report = SimulationReport {
            case: plan.case,
            n: plan.n,
            trials: outcomes.len(),
            seed: cfg.seed,
            delta: cfg.delta,
            backoff: cfg.backoff,
            plan: plan.clone(),
            secret_pipe_rate: plan.secret_pipe_bits as f64 / plan.n as f64,
            public_pipe_rate: plan.public_pipe_bits as f64 / plan.n as f64,
            message_error_rate: rate(&|o| !o.message_ok),
            key_error_rate: rate(&|o| !o.key_ok),
            pipe_error_rate: rate(&|o| !o.pipes_ok),
            binning_failure_rate: rate(&|o| o.binning_failed),
            key_uniformity_deficit: deficit,
            uniformity_method: method.into(),
            leakage,
        };
        let transcripts = outcomes.into_iter().map(|o| o.eve_view).collect();
        Ok((report, transcripts))
    }

    /// `H(K)` when `K` is a linear function of uniform bits and fair coins.
    fn linear_key_entropy(&self) -> Option<usize> {
        let plan = &self.plan;
        let k = plan.key_bits;
        match plan.case {
            AssemblyCase::One => self.key.linear_entropy(0, k),
            AssemblyCase::Two => {
                let spare = plan.secret_pipe_bits - plan.message_bits;
                let psi_rows = k.min(plan.psi_in_secret);
                let coins = k.min(spare) - psi_rows;
                let agreed = k.saturating_sub(spare);
                if psi_rows + agreed == 0 {
                    return Some(coins);
                }
                Some(self.key.linear_entropy(psi_rows, agreed)? + coins)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{assemble_coupling, SA, U1, V1, V2, X};
    use crate::generators::{blind_kernel, broadcast, bsc_kernel, no_source, noiseless_kernel, source_from_views};

    fn coupling(source: &JointDistribution, channel: &Channel, u1: Channel) -> AuxiliaryCoupling {
        assemble_coupling(
            source,
            channel,
            &u1,
            &[1.0],
            &Channel::from_flat((V2, 1), vec![(V1, 2)], vec![0.5, 0.5]).unwrap(),
            &Channel::identity(V1, X, 2).unwrap(),
        )
        .unwrap()
    }

    fn cfg(n: usize, trials: usize) -> SimulationConfig {
        SimulationConfig {
            n,
            trials,
            delta: 0.01,
            seed: 5,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn noiseless_secret_bit_sends_messages() {
        let ch = broadcast(&noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let src = no_source();
        let p = coupling(&src, &ch, Channel::constant(SA, 1, U1, 1, 0).unwrap());
        let c = SimulationConfig {
            leakage: Some(LeakageMode::Exact),
            ..cfg(8, 50)
        };
        let r = run_end_to_end(&src, &ch, &p, (0.0, 0.85), &c).unwrap();
        assert_eq!(r.case, AssemblyCase::Two);
        assert_eq!(r.message_error_rate, 0.0);
        assert_eq!(r.plan.pipe_bits(), r.plan.secret_pipe_bits + r.plan.public_pipe_bits);
        assert!(r.leakage.unwrap().bits_total.abs() < 1e-12);
    }

    #[test]
    fn shared_bit_and_public_channel_make_a_key() {
        let ch = broadcast(&noiseless_kernel(2), &noiseless_kernel(2)).unwrap();
        let src = source_from_views(&[0.5, 0.5], &noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let p = coupling(&src, &ch, Channel::identity(SA, U1, 2).unwrap());
        let r = run_end_to_end(&src, &ch, &p, (0.8, 0.0), &cfg(64, 100)).unwrap();
        // no secret pipe, so any message rate is at least R_SBP = 0
        assert_eq!(r.case, AssemblyCase::One);
        assert_eq!(r.key_error_rate, 0.0);
        assert_eq!(r.uniformity_method, "rank");
        assert!(r.key_uniformity_deficit <= 0.05);
    }

    #[test]
    fn outside_target_is_rejected_with_margin() {
        let ch = broadcast(&noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let src = no_source();
        let p = coupling(&src, &ch, Channel::constant(SA, 1, U1, 1, 0).unwrap());
        match run_end_to_end(&src, &ch, &p, (0.6, 0.6), &cfg(8, 10)) {
            Err(Error::Precondition { leg, reason }) => {
                assert_eq!(leg, "target");
                assert!(reason.contains("-0.2"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn case_one_pads_over_the_public_pipe() {
        // secret pipe from the channel, key from a shared source bit
        let ch = broadcast(&noiseless_kernel(2), &bsc_kernel(0.2)).unwrap();
        let src = source_from_views(&[0.5, 0.5], &noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let p = coupling(&src, &ch, Channel::identity(SA, U1, 2).unwrap());
        let c = SimulationConfig {
            memory_cap: 1 << 26,
            ..cfg(24, 100)
        };
        let r = run_end_to_end(&src, &ch, &p, (0.3, 0.8), &c).unwrap();
        assert_eq!(r.case, AssemblyCase::One);
        assert!(r.plan.padded_bits > 0);
        assert_eq!(r.message_error_rate, 0.0);
        assert_eq!(r.key_error_rate, 0.0);
    }

    #[test]
    fn same_seed_same_report() {
        let ch = broadcast(&bsc_kernel(0.05), &bsc_kernel(0.3)).unwrap();
        let src = source_from_views(&[0.5, 0.5], &bsc_kernel(0.05), &bsc_kernel(0.4)).unwrap();
        let p = coupling(&src, &ch, Channel::identity(SA, U1, 2).unwrap());
        let target = (0.05, 0.1);
        let a = run_end_to_end(&src, &ch, &p, target, &cfg(30, 120)).unwrap();
        let b = run_end_to_end(&src, &ch, &p, target, &cfg(30, 120)).unwrap();
        assert_eq!(a, b);
    }
}
