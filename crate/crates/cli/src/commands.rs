use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use secrecy_region::coupling::{assemble_from_kernels, CouplingKernels, SA, U1};
use secrecy_region::degradation::{classify_component, classify_source, DegradationVerdict, DEFAULT_TOLERANCE};
use secrecy_region::gaussian::{gaussian_boundary, gaussian_max_sm, region_dominates, GaussianScenario};
use secrecy_region::protocol::leakage::encode_transcript_records;
use secrecy_region::prob::DEFAULT_CELL_LIMIT;
use secrecy_region::protocol::assembly::Protocol;
use secrecy_region::protocol::{plan_protocol, SimulationReport};
use secrecy_region::region::{
    inner_bound_search, kernels_of, parallel_degraded_search, region_for_coupling, DirectionBest, SearchOutcome,
};
use secrecy_region::{AuxiliaryCoupling, Channel, Error, RegionPolygon};

use crate::scenario::{Built, Scenario, SimulationSpec, Thresholds};

/// Why a command did not succeed; maps onto the exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Bad input: exit 2.
    Validation(String),
    /// The run finished but a configured threshold was missed: exit 3.
    Threshold { output: Output, violations: Vec<String> },
    /// Exit 1.
    Internal(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Threshold { .. } => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver(_) => Failure::Internal(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

/// A command's human report and its CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub csv: String,
}

fn csv_table<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Internal(e.to_string()))
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(Failure::Validation)
}

#[derive(Serialize)]
struct VertexRow {
    r_sk_bits: f64,
    r_sm_bits: f64,
}

fn vertex_table(region: &RegionPolygon) -> Result<String, Failure> {
    csv_table(region.vertices().iter().map(|&(k, m)| VertexRow { r_sk_bits: k, r_sm_bits: m }))
}

fn matrix_text(rows: usize, cols: usize, values: &[f64]) -> String {
    (0..rows)
        .map(|r| {
            values[r * cols..(r + 1) * cols]
                .iter()
                .map(|v| format!("{v:.6}"))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn describe_best(out: &mut String, best: &DirectionBest) {
    let _ = writeln!(
        out,
        "  direction ({:.4}, {:.4}): A = {:.6}, B = {:.6}",
        best.direction.0, best.direction.1, best.message_bound, best.sum_bound
    );
    for k in &best.kernels {
        let _ = writeln!(out, "    {} [{}x{}]: {}", k.name, k.rows, k.cols, matrix_text(k.rows, k.cols, &k.values));
    }
}

fn region_report(label: &str, outcome: &SearchOutcome, extra: &str) -> String {
    let region = &outcome.region;
    let mut out = String::new();
    let _ = writeln!(out, "{label}");
    out.push_str(extra);
    let _ = writeln!(
        out,
        "max R_SK {:.6}  max R_SM {:.6}  max sum {:.6} bits/use ({} evaluations)",
        region.max_key_rate(),
        region.max_message_rate(),
        region.sum_rate(),
        outcome.evaluations
    );
    // each vertex is credited to the direction whose best candidate lands closest
    let mut used: Vec<&DirectionBest> = Vec::new();
    let _ = writeln!(out, "vertices (R_SK, R_SM):");
    for &v in region.vertices() {
        let nearest = outcome.best.iter().min_by(|a, b| {
            let d = |c: (f64, f64)| (c.0 - v.0).powi(2) + (c.1 - v.1).powi(2);
            d(a.corner).total_cmp(&d(b.corner))
        });
        match nearest {
            Some(best) if v != (0.0, 0.0) => {
                let k = match used.iter().position(|u| u.kernels == best.kernels) {
                    Some(k) => k,
                    None => {
                        used.push(best);
                        used.len() - 1
                    }
                };
                let _ = writeln!(out, "  ({:.6}, {:.6})  coupling #{}", v.0, v.1, k + 1);
            }
            _ => {
                let _ = writeln!(out, "  ({:.6}, {:.6})", v.0, v.1);
            }
        }
    }
    for (k, best) in used.iter().enumerate() {
        let _ = writeln!(out, "coupling #{}", k + 1);
        describe_best(&mut out, best);
    }
    out
}

pub fn region(scenario: &Path, seed: Option<u64>, directions: Option<usize>) -> Result<Output, Failure> {
    let mut sc = load(scenario)?;
    if let Some(s) = seed {
        sc.search.seed = s;
    }
    if let Some(d) = directions {
        sc.search.directions = d;
    }
    let built = sc.build()?;
    let (outcome, extra) = match &built.parallel {
        Some(p) => {
            let o = parallel_degraded_search(
                p.forward_channel.as_ref(),
                p.reverse_channel.as_ref(),
                p.forward_source.as_ref(),
                p.reverse_source.as_ref(),
                &sc.search,
            )?;
            let mut extra = String::new();
            for (leg, v) in &o.verdicts {
                let _ = writeln!(extra, "{}: {:?}", leg.label(), v.order);
            }
            (o.search, extra)
        }
        None => (inner_bound_search(&built.source, built.channel()?, &sc.search)?, String::new()),
    };
    let label = if built.parallel.is_some() {
        "tight region of the parallel degraded scenario"
    } else {
        "inner bound (convex hull of searched couplings)"
    };
    Ok(Output {
        text: region_report(label, &outcome, &extra),
        csv: vertex_table(&outcome.region)?,
    })
}

#[derive(Serialize)]
struct BoundaryRow {
    r_sm_bits: f64,
    r_sk_bits: f64,
}

pub fn gaussian(
    snr_src: f64,
    snr_bob: f64,
    snr_eve: f64,
    samples: usize,
    compare_snr_eve: Option<f64>,
) -> Result<Output, Failure> {
    let s = GaussianScenario::new(snr_src, snr_bob, snr_eve)?;
    let boundary = gaussian_boundary(&s, samples)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "scalar Gaussian region, SNR src {snr_src}, Bob {snr_bob}, Eve {snr_eve}"
    );
    let _ = writeln!(text, "max R_SM {:.6} bits/use", gaussian_max_sm(&s)?.0);
    let _ = writeln!(text, "boundary (R_SM, R_SK):");
    for &(sk, sm) in &boundary {
        let _ = writeln!(text, "  ({sm:.6}, {sk:.6})");
    }
    if let Some(other) = compare_snr_eve {
        let t = GaussianScenario::new(snr_src, snr_bob, other)?;
        let (lo, hi) = if other <= snr_eve { (&t, &s) } else { (&s, &t) };
        let holds = region_dominates(lo, hi, samples)?;
        let _ = writeln!(
            text,
            "region at SNR Eve {} contains region at SNR Eve {}: {holds}",
            lo.snr_eve, hi.snr_eve
        );
        if !holds {
            return Err(Failure::Threshold {
                output: Output { text, csv: boundary_table(&boundary)? },
                violations: vec!["dominance as Eve's SNR decreases".into()],
            });
        }
    }
    Ok(Output {
        text,
        csv: boundary_table(&boundary)?,
    })
}

fn boundary_table(boundary: &[(f64, f64)]) -> Result<String, Failure> {
    csv_table(boundary.iter().map(|&(sk, sm)| BoundaryRow { r_sm_bits: sm, r_sk_bits: sk }))
}

#[derive(Serialize)]
struct VerdictRow {
    leg: String,
    order: String,
    forward_residual: f64,
    reverse_residual: f64,
    tolerance: f64,
    forward_witness: String,
    reverse_witness: String,
}

fn witness_text(w: &Option<Channel>) -> String {
    match w {
        None => String::new(),
        Some(c) => matrix_text(c.input_size(), c.output_cells(), c.matrix()),
    }
}

fn channel_legs(channel: &Channel) -> Result<DegradationVerdict, Failure> {
    let c = secrecy_region::coupling::canonical_channel(channel)?;
    Ok(classify_component(
        &c.output_marginal(&[secrecy_region::coupling::Y])?,
        &c.output_marginal(&[secrecy_region::coupling::Z])?,
        DEFAULT_TOLERANCE,
    )?)
}

fn verdicts(built: &Built) -> Result<Vec<(String, DegradationVerdict)>, Failure> {
    let mut out = Vec::new();
    if let Some(c) = &built.channel {
        out.push(("channel".to_string(), channel_legs(c)?));
    }
    if built.source.variables().iter().any(|v| v.size > 1) {
        out.push(("source".to_string(), classify_source(&built.source, DEFAULT_TOLERANCE)?));
    }
    if let Some(p) = &built.parallel {
        for (name, c) in [("forward channel", &p.forward_channel), ("reverse channel", &p.reverse_channel)] {
            if let Some(c) = c {
                out.push((name.to_string(), channel_legs(c)?));
            }
        }
        for (name, s) in [("forward source", &p.forward_source), ("reverse source", &p.reverse_source)] {
            if let Some(s) = s {
                out.push((name.to_string(), classify_source(s, DEFAULT_TOLERANCE)?));
            }
        }
    }
    Ok(out)
}

pub fn degrade(scenario: &Path) -> Result<Output, Failure> {
    let built = load(scenario)?.build()?;
    let list = verdicts(&built)?;
    if list.is_empty() {
        return Err(Failure::Validation("scenario has no channel or source to classify".into()));
    }
    let mut text = String::new();
    for (leg, v) in &list {
        let _ = writeln!(
            text,
            "{leg}: {:?} (forward residual {:.3e}, reverse residual {:.3e}, tol {:.0e})",
            v.order, v.forward_residual, v.reverse_residual, v.tolerance
        );
        if v.forward_witness.is_some() {
            let _ = writeln!(text, "  Bob -> Eve witness: {}", witness_text(&v.forward_witness));
        }
        if v.reverse_witness.is_some() {
            let _ = writeln!(text, "  Eve -> Bob witness: {}", witness_text(&v.reverse_witness));
        }
    }
    let csv = csv_table(list.iter().map(|(leg, v)| VerdictRow {
        leg: leg.clone(),
        order: format!("{:?}", v.order),
        forward_residual: v.forward_residual,
        reverse_residual: v.reverse_residual,
        tolerance: v.tolerance,
        forward_witness: witness_text(&v.forward_witness),
        reverse_witness: witness_text(&v.reverse_witness),
    }))?;
    Ok(Output { text, csv })
}

/// Variants of a searched coupling tried by `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Variant {
    /// `U1` rounded to the most likely symbol per row: binning needs no codebook.
    Rounded,
    /// `U1` dropped: no key agreement.
    NoKey,
    AsFound,
}

impl Variant {
    fn label(self) -> &'static str {
        match self {
            Variant::Rounded => "U1 rounded to a deterministic map",
            Variant::NoKey => "U1 dropped",
            Variant::AsFound => "as found",
        }
    }
}

fn u1_variant(k: &CouplingKernels, variant: Variant) -> Result<CouplingKernels, Failure> {
    let u1 = &k.u1_given_sa;
    let (nsa, nu) = (u1.input_size(), u1.output_cells());
    let rows: Vec<Vec<f64>> = match variant {
        Variant::AsFound => return Ok(k.clone()),
        Variant::NoKey => vec![vec![1.0]; nsa],
        Variant::Rounded => (0..nsa)
            .map(|a| {
                let row = u1.row(a);
                let best = (0..nu).fold(0, |b, i| if row[i] > row[b] { i } else { b });
                (0..nu).map(|i| if i == best { 1.0 } else { 0.0 }).collect()
            })
            .collect(),
    };
    let cols = rows[0].len();
    Ok(CouplingKernels::new(
        Channel::new((SA, nsa), vec![(U1, cols)], rows)?,
        k.v2_law.clone(),
        k.v1_given_v2.clone(),
        k.x_given_v1.clone(),
    )?)
}

/// Plans the protocol on searched couplings, most room around the target first,
/// and keeps the first that fits the configured blocklength and memory.
fn plan_searched(
    built: &Built,
    sc: &Scenario,
    spec: &SimulationSpec,
) -> Result<(Protocol, String), Failure> {
    let channel = built.channel()?;
    let outcome = inner_bound_search(&built.source, channel, &sc.search)?;
    let (nsa, nx) = (built.source.size_of(SA)?, channel.input_size());
    let mut candidates: Vec<(f64, Variant, usize, AuxiliaryCoupling)> = Vec::new();
    let mut seen: Vec<CouplingKernels> = Vec::new();
    for (i, best) in outcome.best.iter().enumerate() {
        let found = kernels_of(best, nsa, nx)?;
        for variant in [Variant::Rounded, Variant::NoKey, Variant::AsFound] {
            let k = u1_variant(&found, variant)?;
            if seen.contains(&k) {
                continue;
            }
            seen.push(k.clone());
            let Ok(p) = assemble_from_kernels(&built.source, channel, &k, DEFAULT_CELL_LIMIT) else {
                continue;
            };
            if let Ok(region) = region_for_coupling(&p) {
                candidates.push((region.margin(spec.target), variant, i, p));
            }
        }
    }
    // stable: equal margins keep the variant order, then the direction order
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut first_error = None;
    for (margin, variant, i, p) in &candidates {
        match plan_protocol(&built.source, channel, p, spec.target, &spec.config) {
            Ok(protocol) => {
                let d = outcome.best[*i].direction;
                let note = format!(
                    "coupling: searched, direction ({:.4}, {:.4}), {}, margin {:.6}\n",
                    d.0,
                    d.1,
                    variant.label(),
                    margin
                );
                return Ok((protocol, note));
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    Err(first_error
        .map(Failure::from)
        .unwrap_or_else(|| Failure::Validation("the search found no usable coupling".into())))
}

#[derive(Serialize)]
struct ReportRow {
    case: u8,
    n: usize,
    trials: usize,
    seed: u64,
    delta: f64,
    backoff: f64,
    target_r_sk_bits: f64,
    target_r_sm_bits: f64,
    secret_pipe_bits: usize,
    public_pipe_bits: usize,
    message_bits: usize,
    key_bits: usize,
    bin_bits: usize,
    secret_pipe_rate: f64,
    public_pipe_rate: f64,
    message_error_rate: f64,
    key_error_rate: f64,
    pipe_error_rate: f64,
    binning_failure_rate: f64,
    key_uniformity_deficit: f64,
    uniformity_method: String,
    leakage_mode: String,
    leakage_rate: Option<f64>,
    leakage_corrected_rate: Option<f64>,
    leakage_bias_bound: Option<f64>,
    leakage_samples: Option<usize>,
}

fn report_row(r: &SimulationReport) -> ReportRow {
    let l = r.leakage.as_ref();
    ReportRow {
        case: r.case.number(),
        n: r.n,
        trials: r.trials,
        seed: r.seed,
        delta: r.delta,
        backoff: r.backoff,
        target_r_sk_bits: r.plan.target.0,
        target_r_sm_bits: r.plan.target.1,
        secret_pipe_bits: r.plan.secret_pipe_bits,
        public_pipe_bits: r.plan.public_pipe_bits,
        message_bits: r.plan.message_bits,
        key_bits: r.plan.key_bits,
        bin_bits: r.plan.bin_bits,
        secret_pipe_rate: r.secret_pipe_rate,
        public_pipe_rate: r.public_pipe_rate,
        message_error_rate: r.message_error_rate,
        key_error_rate: r.key_error_rate,
        pipe_error_rate: r.pipe_error_rate,
        binning_failure_rate: r.binning_failure_rate,
        key_uniformity_deficit: r.key_uniformity_deficit,
        uniformity_method: r.uniformity_method.clone(),
        leakage_mode: l.map_or("none".into(), |l| format!("{:?}", l.mode).to_lowercase()),
        leakage_rate: l.map(|l| l.rate),
        leakage_corrected_rate: l.map(|l| l.corrected_rate),
        leakage_bias_bound: l.map(|l| l.bias_bound),
        leakage_samples: l.map(|l| l.samples),
    }
}

fn report_text(r: &SimulationReport) -> String {
    let p = &r.plan;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "case {}: n = {}, {} trials, seed {}, delta {}, backoff {}",
        r.case.number(),
        r.n,
        r.trials,
        r.seed,
        r.delta,
        r.backoff
    );
    let _ = writeln!(out, "target (R_SK, R_SM) = ({}, {})", p.target.0, p.target.1);
    let _ = writeln!(
        out,
        "pipes: secret {} bits ({:.4}/use), public {} bits ({:.4}/use)",
        p.secret_pipe_bits, r.secret_pipe_rate, p.public_pipe_bits, r.public_pipe_rate
    );
    let _ = writeln!(
        out,
        "message {} bits, key {} bits, bin index {} bits, agreed key {} bits",
        p.message_bits, p.key_bits, p.bin_bits, p.agreed_bits
    );
    let _ = writeln!(
        out,
        "padded {} bits, psi in secret pipe {} bits, filler secret {} / public {}",
        p.padded_bits, p.psi_in_secret, p.secret_filler, p.public_filler
    );
    let _ = writeln!(out, "message error rate      {:.6}", r.message_error_rate);
    let _ = writeln!(out, "key error rate          {:.6}", r.key_error_rate);
    let _ = writeln!(out, "pipe error rate         {:.6}", r.pipe_error_rate);
    let _ = writeln!(out, "binning failure rate    {:.6}", r.binning_failure_rate);
    let _ = writeln!(
        out,
        "key uniformity deficit  {:.6} bits/use ({})",
        r.key_uniformity_deficit, r.uniformity_method
    );
    match &r.leakage {
        None => {
            let _ = writeln!(out, "leakage                 not estimated");
        }
        Some(l) => {
            let _ = writeln!(
                out,
                "leakage                 {:.6} bits/use ({:?}, corrected {:.6}, bias bound {:.6}, {} samples{})",
                l.rate,
                l.mode,
                l.corrected_rate,
                l.bias_bound,
                l.samples,
                if l.undersampled { ", undersampled" } else { "" }
            );
        }
    }
    out
}

fn check_thresholds(r: &SimulationReport, t: &Thresholds) -> Vec<String> {
    let leakage = r.leakage.as_ref().map(|l| l.rate);
    let checks = [
        ("message_error", Some(r.message_error_rate), t.message_error),
        ("key_error", Some(r.key_error_rate), t.key_error),
        ("pipe_error", Some(r.pipe_error_rate), t.pipe_error),
        ("key_uniformity_deficit", Some(r.key_uniformity_deficit), t.key_uniformity_deficit),
        ("leakage_rate", leakage, t.leakage_rate),
    ];
    let mut out = Vec::new();
    for (name, value, limit) in checks {
        match (value, limit) {
            (Some(v), Some(l)) if v > l => out.push(format!("{name} {v:.6} > {l}")),
            (None, Some(_)) => out.push(format!("{name} not estimated")),
            _ => {}
        }
    }
    out
}

pub fn simulate(scenario: &Path, seed: Option<u64>, transcripts: Option<&PathBuf>) -> Result<Output, Failure> {
    let mut sc = load(scenario)?;
    if let Some(s) = seed {
        sc.search.seed = s;
        if let Some(sim) = sc.simulation.as_mut() {
            sim.config.seed = s;
        }
    }
    let built = sc.build()?;
    let spec: &SimulationSpec = sc
        .simulation
        .as_ref()
        .ok_or_else(|| Failure::Validation("scenario has no `simulation` section".into()))?;
    let channel = built.channel()?;
    let (protocol, note) = match &spec.coupling {
        Some(c) => {
            let coupling = c.build(&built.source, channel)?;
            let protocol = plan_protocol(&built.source, channel, &coupling, spec.target, &spec.config)?;
            (protocol, "coupling: from the scenario\n".to_string())
        }
        None => plan_searched(&built, &sc, spec)?,
    };
    let (report, records) = protocol.run(&spec.config)?;
    if let Some(path) = transcripts {
        let bytes = encode_transcript_records(&records)?;
        std::fs::write(path, bytes).map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))?;
    }
    let output = Output {
        text: note + &report_text(&report),
        csv: csv_table([report_row(&report)])?,
    };
    let violations = check_thresholds(&report, &spec.thresholds);
    if violations.is_empty() {
        Ok(output)
    } else {
        Err(Failure::Threshold { output, violations })
    }
}

fn read_points(path: &Path) -> Result<Vec<(f64, f64)>, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (k, m) = match (col("r_sk_bits"), col("r_sm_bits")) {
        (Some(k), Some(m)) => (k, m),
        _ => {
            return Err(Failure::Validation(format!(
                "{} needs columns r_sk_bits and r_sm_bits",
                path.display()
            )))
        }
    };
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| -> Result<f64, Failure> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::Validation(format!("{}: bad number in row {:?}", path.display(), rec)))
        };
        points.push((parse(k)?, parse(m)?));
    }
    Ok(points)
}

#[derive(Serialize)]
struct CompareRow {
    relation: &'static str,
    holds: bool,
    worst_margin: f64,
}

/// Down-closed hulls of two point sets (region or boundary CSVs) compared both ways.
pub fn compare(first: &Path, second: &Path, tolerance: f64, expect: Option<Expect>) -> Result<Output, Failure> {
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(Failure::Validation(format!("tolerance {tolerance} must be finite and nonnegative")));
    }
    let a = read_points(first)?;
    let b = read_points(second)?;
    let (ra, rb) = (RegionPolygon::down_closed_hull(&a), RegionPolygon::down_closed_hull(&b));
    let worst = |outer: &RegionPolygon, inner: &[(f64, f64)]| {
        inner.iter().map(|&p| outer.margin(p)).fold(f64::INFINITY, f64::min)
    };
    let (wab, wba) = (worst(&ra, &b), worst(&rb, &a));
    let rows = [
        CompareRow { relation: "first_contains_second", holds: wab >= -tolerance, worst_margin: wab },
        CompareRow { relation: "second_contains_first", holds: wba >= -tolerance, worst_margin: wba },
    ];
    let mut text = String::new();
    let _ = writeln!(text, "first:  {} ({} points)", first.display(), a.len());
    let _ = writeln!(text, "second: {} ({} points)", second.display(), b.len());
    for r in &rows {
        let _ = writeln!(text, "{}: {} (worst margin {:.3e})", r.relation, r.holds, r.worst_margin);
    }
    let failed = match expect {
        None => None,
        Some(Expect::FirstContainsSecond) if !rows[0].holds => Some(rows[0].relation),
        Some(Expect::SecondContainsFirst) if !rows[1].holds => Some(rows[1].relation),
        Some(Expect::Equal) if !(rows[0].holds && rows[1].holds) => Some("equal"),
        Some(_) => None,
    };
    let output = Output { text, csv: csv_table(rows)? };
    match failed {
        None => Ok(output),
        Some(rel) => Err(Failure::Threshold { output, violations: vec![format!("expected {rel}")] }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Expect {
    FirstContainsSecond,
    SecondContainsFirst,
    Equal,
}
