//! Acceptance criteria 1-9. Each criterion prints one `PASS` or `FAIL` line;
//! the test fails if any criterion does.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use secrecy_region::coupling::{assemble_coupling, SA, U1, V1, V2, X, Y, Z};
use secrecy_region::degradation::{best_degrading_map, classify_component, find_degrading_map};
use secrecy_region::gaussian::{gaussian_max_sk, gaussian_max_sm, region_dominates, GaussianScenario};
use secrecy_region::generators::{
    blind_kernel, broadcast, bsc_kernel, no_source, noiseless_kernel, source_chain_eve_first, source_from_views,
};
use secrecy_region::protocol::key::build_key_agreement_with;
use secrecy_region::protocol::wiretap::{
    build_wiretap_code_with, build_wiretap_code_with_rates, random_messages, wiretap_leakage_law, PipeLink,
    PipeRates,
};
use secrecy_region::protocol::{
    estimate_leakage, one_time_pad, plan_protocol, run_end_to_end, AssemblyCase, LeakageMode, SimulationConfig,
};
use secrecy_region::region::{channel_only_region, inner_bound_region, inner_bound_search};
use secrecy_region::{AuxiliaryCoupling, Bits, Channel, JointDistribution, SearchConfig};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn run(number: u32, limit: Duration, check: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = check();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let passed = v.passed && in_time;
    println!(
        "{} criterion {number}: {} [{:.2?} of {:.0?}{}]",
        if passed { "PASS" } else { "FAIL" },
        v.detail,
        elapsed,
        limit,
        if in_time { "" } else { ", over time" }
    );
    passed
}

fn uniform_bit_coupling(source: &JointDistribution, channel: &Channel, u1: Channel) -> AuxiliaryCoupling {
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

fn binary_kernel(a: f64, b: f64) -> Channel {
    Channel::new((V1, 2), vec![(X, 2)], vec![vec![1.0 - a, a], vec![1.0 - b, b]]).unwrap()
}

/// `max [I(V1;Y) - I(V1;Z)]_+` over a 22^3 grid of binary `V1` inputs and kernels.
fn grid_oracle(channel: &Channel) -> f64 {
    let steps = 21;
    let mut best = 0.0f64;
    for a in 0..=steps {
        for b in 0..=steps {
            for c in 0..=steps {
                let t = |i: usize| i as f64 / steps as f64;
                let full = binary_kernel(t(b), t(c)).compose(channel).unwrap();
                let j = JointDistribution::from_channel(&[t(a), 1.0 - t(a)], &full).unwrap();
                let s = j.mutual_information(&[V1], &[Y]).unwrap().0 - j.mutual_information(&[V1], &[Z]).unwrap().0;
                best = best.max(s);
            }
        }
    }
    best
}

fn criterion_1() -> Verdict {
    let channel = broadcast(&noiseless_kernel(2), &blind_kernel(2)).unwrap();
    let region = inner_bound_region(&no_source(), &channel, &SearchConfig::default()).unwrap();
    let near = |p: (f64, f64)| region.vertices().iter().any(|v| (v.0 - p.0).abs() <= 1e-3 && (v.1 - p.1).abs() <= 1e-3);
    verdict(
        near((0.0, 1.0)) && near((1.0, 0.0)) && region.vertices().len() == 3,
        format!("unit triangle, vertices {:?}", region.vertices()),
    )
}

fn criterion_2() -> Verdict {
    let channel = broadcast(&bsc_kernel(0.1), &bsc_kernel(0.2)).unwrap();
    let sum = channel_only_region(&channel, &SearchConfig::default()).unwrap().sum_rate();
    let oracle = grid_oracle(&channel);
    let stated = 0.252983;
    verdict(
        (sum - stated).abs() <= 1e-3 && (sum - oracle).abs() <= 1e-3,
        format!("wiretap sum rate {sum:.7}, grid oracle {oracle:.7}, reference {stated}"),
    )
}

fn criterion_3() -> Verdict {
    let source = source_chain_eve_first(&[0.5, 0.5], &bsc_kernel(0.05), &bsc_kernel(0.1)).unwrap();
    let channel = broadcast(&bsc_kernel(0.1), &bsc_kernel(0.2)).unwrap();
    let cfg = SearchConfig::default();
    let inner = inner_bound_region(&source, &channel, &cfg).unwrap().sum_rate();
    let only = channel_only_region(&channel, &cfg).unwrap().sum_rate();
    verdict(
        (inner - only).abs() <= 1e-3,
        format!("SA-SE-SB source: inner sum rate {inner:.7}, channel only {only:.7}"),
    )
}

fn criterion_4() -> Verdict {
    let s = GaussianScenario::new(1.0, 1.0, 0.5).unwrap();
    let max_sm = gaussian_max_sm(&s).unwrap().0;
    let sk0 = gaussian_max_sk(&s, Bits(0.0)).unwrap().0;
    let closed = (max_sm - 0.339036).abs() <= 1e-6 && (sk0 - 0.5).abs() <= 1e-6;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_endpoint = 0.0f64;
    let mut dominance = true;
    for _ in 0..100 {
        let sc = GaussianScenario::new(
            rng.random_range(0.01..20.0),
            rng.random_range(0.01..20.0),
            rng.random_range(0.01..20.0),
        )
        .unwrap();
        let max = gaussian_max_sm(&sc).unwrap();
        worst_endpoint = worst_endpoint.max(gaussian_max_sk(&sc, max).unwrap().0.abs());
        let weaker_eve = GaussianScenario::new(sc.snr_src, sc.snr_bob, sc.snr_eve * rng.random_range(0.1..0.99)).unwrap();
        dominance &= region_dominates(&weaker_eve, &sc, 64).unwrap();
    }
    verdict(
        closed && worst_endpoint <= 1e-9 && dominance,
        format!(
            "max R_SM {max_sm:.6}, R_SK(0) {sk0:.6}, worst endpoint {worst_endpoint:.1e}, dominance {dominance}"
        ),
    )
}

fn random_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize, name_in: &str, name_out: &str) -> Channel {
    let m: Vec<f64> = (0..rows)
        .flat_map(|_| {
            let w: Vec<f64> = (0..cols).map(|_| Exp1.sample(rng)).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(move |x| x / t)
        })
        .collect();
    Channel::from_flat((name_in, rows), vec![(name_out, cols)], m).unwrap()
}

fn criterion_5() -> Verdict {
    let tol = 1e-7;
    let (w, _) = best_degrading_map(&bsc_kernel(0.1), &bsc_kernel(0.2)).unwrap();
    let crossover = w.entry(0, 1);
    let witness_ok = (crossover - 0.125).abs() <= 1e-6 && (w.entry(1, 0) - 0.125).abs() <= 1e-6;
    let reverse = find_degrading_map(&bsc_kernel(0.2), &bsc_kernel(0.1), tol).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut forward = 0;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (nx, ny, nz) = (rng.random_range(2..5), rng.random_range(2..5), rng.random_range(2..5));
        let bob = random_kernel(&mut rng, nx, ny, "x", "y");
        let f = random_kernel(&mut rng, ny, nz, "y", "z");
        let eve = bob.compose(&f).unwrap();
        let v = classify_component(&bob, &eve, tol).unwrap();
        worst = worst.max(v.forward_residual);
        if v.order.includes_forward() && v.forward_residual <= tol {
            forward += 1;
        }
    }
    verdict(
        witness_ok && reverse.is_none() && forward == 200,
        format!(
            "witness crossover {crossover:.9}, reverse {}, {forward}/200 composed pairs forward (worst residual {worst:.1e})",
            if reverse.is_none() { "infeasible" } else { "feasible" }
        ),
    )
}

fn criterion_6() -> Verdict {
    let delta = 0.05;
    let channel = broadcast(&noiseless_kernel(2), &bsc_kernel(0.3)).unwrap();
    let coupling = uniform_bit_coupling(&no_source(), &channel, Channel::constant(SA, 1, U1, 1, 0).unwrap());
    let cfg = SimulationConfig {
        n: 6,
        delta,
        seed: 6,
        ..SimulationConfig::default()
    };
    let code = build_wiretap_code_with(&coupling, &cfg).unwrap();
    let law = wiretap_leakage_law(&code, &channel, cfg.exact_cap).unwrap();
    let leak = estimate_leakage(&law, LeakageMode::Exact).unwrap();
    verdict(
        leak.rate <= 8.0 * delta && code.private_bits > 0,
        format!(
            "n=6, {} private bits, I(W_private;Z^n)/n = {:.6} <= 8 delta = {}",
            code.secret_pipe_bits(),
            leak.rate,
            8.0 * delta
        ),
    )
}

fn message_error_rate(coupling: &AuxiliaryCoupling, channel: &Channel, rates: Option<PipeRates>, cfg: &SimulationConfig) -> (f64, usize, usize) {
    let code = match rates {
        Some(r) => build_wiretap_code_with_rates(coupling, r, cfg).unwrap(),
        None => build_wiretap_code_with(coupling, cfg).unwrap(),
    };
    let link = PipeLink::new(&code, channel).unwrap();
    let errors = (0..cfg.trials as u64)
        .filter(|&t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t);
            let (w, a, b) = random_messages(&code, &mut rng);
            let mut public = Vec::new();
            for i in 0..code.blocks {
                public.extend_from_slice(&a[i * code.public_a_bits..(i + 1) * code.public_a_bits]);
                public.extend_from_slice(&b[i * code.public_b_bits..(i + 1) * code.public_b_bits]);
            }
            let (gw, gp, _) = link.send(&w, &public, &mut rng).unwrap();
            gw != w || gp != public
        })
        .count();
    (
        errors as f64 / cfg.trials as f64,
        code.secret_pipe_bits() + code.public_pipe_bits(),
        code.block_len,
    )
}

fn criterion_7() -> Verdict {
    let channel = broadcast(&bsc_kernel(0.1), &bsc_kernel(0.2)).unwrap();
    let coupling = uniform_bit_coupling(&no_source(), &channel, Channel::constant(SA, 1, U1, 1, 0).unwrap());
    let cfg = SimulationConfig {
        n: 400,
        delta: 0.001,
        trials: 1000,
        seed: 7,
        backoff: 0.1,
        ..SimulationConfig::default()
    };
    let (inside, bits, block) = message_error_rate(&coupling, &channel, None, &cfg);

    let source = source_from_views(&[0.5, 0.5], &bsc_kernel(0.1), &bsc_kernel(0.2)).unwrap();
    let scheme = build_key_agreement_with(&source, &Channel::identity(SA, U1, 2).unwrap(), &cfg).unwrap();
    let key_errors = (0..cfg.trials as u64)
        .filter(|&t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t);
            let block = scheme.sample_source(&mut rng);
            let e = scheme.encode(&block.sa).unwrap();
            scheme.decode(&e.psi, &block.sb) != Some(e.key)
        })
        .count();
    let key_error = key_errors as f64 / cfg.trials as f64;

    let capacity = coupling.terms().i_v1_y;
    let base = secrecy_region::protocol::wiretap::PipeRates::for_coupling(&coupling, 0.0, 0.0);
    let scale = 1.1 * capacity / base.total();
    let above = PipeRates {
        public_a: base.public_a * scale,
        public_b: base.public_b * scale,
        secret: base.secret * scale,
    };
    let (outside, _, _) = message_error_rate(&coupling, &channel, Some(above), &cfg);
    verdict(
        inside <= 0.1 && key_error <= 0.1 && outside >= 0.5,
        format!(
            "n=400: message error {inside:.3} ({bits} pipe bits, sub-blocks of {block}), key error {key_error:.3} \
             ({} bin / {} key bits), message error at 1.1 I(X;Y) {outside:.3}",
            scheme.bin_bits, scheme.key_bits
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut involution = true;
    for _ in 0..10_000 {
        let len = rng.random_range(0..128);
        let m: Vec<u8> = (0..len).map(|_| rng.random::<bool>() as u8).collect();
        let k: Vec<u8> = (0..len).map(|_| rng.random::<bool>() as u8).collect();
        involution &= one_time_pad(&one_time_pad(&m, &k).unwrap(), &k).unwrap() == m;
    }

    let channel = broadcast(&noiseless_kernel(2), &bsc_kernel(0.2)).unwrap();
    let source = source_from_views(&[0.5, 0.5], &noiseless_kernel(2), &blind_kernel(2)).unwrap();
    let coupling = uniform_bit_coupling(&source, &channel, Channel::identity(SA, U1, 2).unwrap());
    let r_sbp = coupling.terms().secret_pipe_rate();
    let cfg = SimulationConfig {
        n: 16,
        delta: 0.01,
        trials: 200,
        seed: 8,
        ..SimulationConfig::default()
    };
    let mut ok = involution;
    let mut notes = vec![format!("OTP involution over 10^4 pairs {involution}, R_SBP {r_sbp:.4}")];
    for (target, expected) in [((0.3, 0.5), AssemblyCase::Two), ((0.3, 0.8), AssemblyCase::One)] {
        let protocol = plan_protocol(&source, &channel, &coupling, target, &cfg).unwrap();
        let p = &protocol.plan;
        let (s, pub_bits) = (p.secret_pipe_bits, p.public_pipe_bits);
        let accounted = match p.case {
            AssemblyCase::One => {
                p.message_bits.min(s) + p.secret_filler == s && p.bin_bits + p.padded_bits + p.public_filler == pub_bits
            }
            AssemblyCase::Two => {
                p.message_bits + p.psi_in_secret + p.secret_filler == s
                    && p.bin_bits - p.psi_in_secret + p.public_filler == pub_bits
            }
        };
        let pipes = protocol.code.secret_pipe_bits() + protocol.code.public_pipe_bits();
        let by_rate = (cfg.n as f64 * (protocol.code.rates.secret + protocol.code.rates.public_a + protocol.code.rates.public_b)).round() as usize;
        let report = run_end_to_end(&source, &channel, &coupling, target, &cfg).unwrap();
        let case_ok = p.case == expected && report.case == expected;
        let delivered = report.message_error_rate <= 0.1 && report.key_error_rate <= 0.1;
        ok &= case_ok && accounted && pipes == p.pipe_bits() && pipes == by_rate && delivered;
        notes.push(format!(
            "target {target:?} -> case {} (accounting {}, {} pipe bits, message error {:.3}, key error {:.3})",
            p.case.number(),
            accounted && pipes == by_rate,
            pipes,
            report.message_error_rate,
            report.key_error_rate
        ));
    }
    verdict(ok, notes.join("; "))
}

fn criterion_9() -> Verdict {
    let channel = broadcast(&bsc_kernel(0.05), &bsc_kernel(0.3)).unwrap();
    let source = source_from_views(&[0.5, 0.5], &bsc_kernel(0.05), &bsc_kernel(0.4)).unwrap();
    let coupling = uniform_bit_coupling(&source, &channel, Channel::identity(SA, U1, 2).unwrap());
    let sim = SimulationConfig {
        n: 30,
        trials: 300,
        seed: 9,
        ..SimulationConfig::default()
    };
    let outputs = |threads: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let search = inner_bound_search(&source, &channel, &SearchConfig::quick(9)).unwrap();
            let report = run_end_to_end(&source, &channel, &coupling, (0.05, 0.1), &sim).unwrap();
            format!("{search:?}\n{}", serde_json::to_string(&report).unwrap())
        })
    };
    let one = outputs(1);
    let again = outputs(1);
    let eight = outputs(8);
    verdict(
        one == again && one == eight,
        format!("search and simulation outputs identical across runs and 1/8 threads ({} bytes)", one.len()),
    )
}

#[test]
fn acceptance() {
    let results = [
        run(1, Duration::from_secs(10), criterion_1),
        run(2, Duration::from_secs(60), criterion_2),
        run(3, Duration::from_secs(120), criterion_3),
        run(4, Duration::from_secs(1), criterion_4),
        run(5, Duration::from_secs(30), criterion_5),
        run(6, Duration::from_secs(60), criterion_6),
        run(7, Duration::from_secs(600), criterion_7),
        run(8, Duration::from_secs(10), criterion_8),
        run(9, Duration::from_secs(60), criterion_9),
    ];
    let failed: Vec<usize> = (1..=9).filter(|&i| !results[i - 1]).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
