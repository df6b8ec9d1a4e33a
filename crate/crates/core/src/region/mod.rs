//! Rate regions: a single coupling, the searched union over couplings, the
//! parallel degraded case and the channel-only reduction.
//!
//! The union is approximated by pattern search on weighted sums
//! `lambda * R_SK + mu * R_SM` over a fan of directions. Every accepted
//! candidate contributes its two corners, and the reported polygon is the
//! down-closed convex hull of all of them.

mod polygon;
mod search;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use polygon::{HalfPlane, RegionPolygon};

use crate::coupling::{
    canonical_channel, AuxiliaryCoupling, ChannelBlock, CouplingKernels, SourceBlock,
    FEASIBILITY_TOLERANCE, X, Y, Z,
};
use crate::degradation::{classify_component, classify_source, DegradationVerdict, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::generators::no_source;
use crate::prob::{Channel, JointDistribution, DEFAULT_CELL_LIMIT};
use search::{climb, random_point, Block, ClimbSettings, Landscape, Score};

/// Knobs of the randomized search. Caps left as `None` use `|SA| + 3` for
/// `U1` and `|X| + 3` for `V1` and `V2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub u1_cap: Option<usize>,
    pub v1_cap: Option<usize>,
    pub v2_cap: Option<usize>,
    /// Starts per direction; the first two are structured.
    pub restarts: usize,
    /// Evaluations per start.
    pub budget: usize,
    /// Initial mass moved by one step.
    pub perturbation: f64,
    pub min_step: f64,
    pub directions: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            u1_cap: None,
            v1_cap: None,
            v2_cap: None,
            restarts: 4,
            budget: 6000,
            perturbation: 0.25,
            min_step: 1e-7,
            directions: 33,
            seed: 0,
        }
    }
}

impl SearchConfig {
    /// Small budget for examples and smoke tests.
    pub fn quick(seed: u64) -> Self {
        SearchConfig {
            restarts: 2,
            budget: 1500,
            directions: 9,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let caps = [self.u1_cap, self.v1_cap, self.v2_cap];
        if caps.contains(&Some(0)) {
            return Err(Error::InvalidArgument("cardinality caps must be at least 1".into()));
        }
        if self.restarts == 0 || self.budget == 0 || self.directions == 0 {
            return Err(Error::InvalidArgument(
                "restarts, budget and directions must be at least 1".into(),
            ));
        }
        if !(self.perturbation > 0.0 && self.perturbation <= 1.0)
            || !(self.min_step > 0.0 && self.min_step <= self.perturbation)
        {
            return Err(Error::InvalidArgument(
                "need 0 < min_step <= perturbation <= 1".into(),
            ));
        }
        Ok(())
    }

    /// Unit-free weights `(lambda, mu)` from `(1,0)` to `(0,1)`.
    pub fn direction_fan(&self) -> Vec<(f64, f64)> {
        if self.directions == 1 {
            return vec![(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)];
        }
        let last = (self.directions - 1) as f64;
        (0..self.directions)
            .map(|k| {
                let theta = k as f64 / last * std::f64::consts::FRAC_PI_2;
                (theta.cos(), theta.sin())
            })
            .collect()
    }

    fn settings(&self) -> ClimbSettings {
        ClimbSettings {
            budget: self.budget,
            step: self.perturbation,
            min_step: self.min_step,
        }
    }
}

/// Region of one coupling: `R_SM <= A`, `R_SK + R_SM <= B`.
pub fn region_for_coupling(p: &AuxiliaryCoupling) -> Result<RegionPolygon> {
    let t = p.terms();
    if !t.is_feasible() {
        return Err(Error::Infeasible {
            margin: t.feasibility_margin(),
        });
    }
    Ok(RegionPolygon::from_bounds(t.message_bound(), t.sum_bound()))
}

/// A parameter block of the best candidate, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Best candidate found for one direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionBest {
    pub direction: (f64, f64),
    pub value: f64,
    /// The corner of the candidate's region attaining `value`.
    pub corner: (f64, f64),
    pub message_bound: f64,
    pub sum_bound: f64,
    pub kernels: Vec<KernelBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub region: RegionPolygon,
    pub best: Vec<DirectionBest>,
    /// `(A, B)` of every candidate the search accepted.
    pub visited: Vec<(f64, f64)>,
    pub evaluations: usize,
}

fn run_search<L: Landscape>(land: &L, cfg: &SearchConfig, fan: &[(f64, f64)]) -> SearchOutcome {
    let structured = land.structured_starts();
    let settings = cfg.settings();
    let tasks: Vec<(usize, usize)> = (0..fan.len())
        .flat_map(|d| (0..cfg.restarts).map(move |r| (d, r)))
        .collect();
    let climbs: Vec<_> = tasks
        .par_iter()
        .enumerate()
        .map(|(idx, &(d, r))| {
            let start = match structured.get(r) {
                Some(s) => s.clone(),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(idx as u64);
                    random_point(land.blocks(), &mut rng)
                }
            };
            (d, climb(land, start, fan[d], &settings))
        })
        .collect();

    let mut best: Vec<Option<(f64, &search::Climb)>> = vec![None; fan.len()];
    let mut points = Vec::new();
    let mut visited = Vec::new();
    let mut evaluations = 0;
    for (d, c) in &climbs {
        evaluations += c.evaluations;
        for &(a, b) in &c.visited {
            visited.push((a, b));
            points.push((b, 0.0));
            points.push((b - a, a));
        }
        let value = support_of(&c.score, fan[*d]);
        // ties keep the earlier task
        if best[*d].is_none_or(|(v, _)| value > v) {
            best[*d] = Some((value, c));
        }
    }
    let best = best
        .into_iter()
        .zip(fan)
        .filter_map(|(b, &dir)| {
            let (value, c) = b?;
            let [k, m] = c.score.corners();
            let corner = if dir.0 * k.0 + dir.1 * k.1 >= dir.0 * m.0 + dir.1 * m.1 { k } else { m };
            Some(DirectionBest {
                direction: dir,
                value,
                corner,
                message_bound: c.score.a(),
                sum_bound: c.score.b(),
                kernels: split_blocks(land.blocks(), &c.point),
            })
        })
        .collect();
    SearchOutcome {
        region: RegionPolygon::down_closed_hull(&points),
        best,
        visited,
        evaluations,
    }
}

fn support_of(s: &Score, dir: (f64, f64)) -> f64 {
    s.corners()
        .iter()
        .map(|c| dir.0 * c.0 + dir.1 * c.1)
        .fold(0.0, f64::max)
}

fn split_blocks(blocks: &[Block], x: &[f64]) -> Vec<KernelBlock> {
    let mut off = 0;
    blocks
        .iter()
        .map(|b| {
            let len = b.rows * b.cols;
            let kb = KernelBlock {
                name: b.name.to_string(),
                rows: b.rows,
                cols: b.cols,
                values: x[off..off + len].to_vec(),
            };
            off += len;
            kb
        })
        .collect()
}

fn uniform_rows(rows: usize, cols: usize, used: usize) -> Vec<f64> {
    let mut row = vec![0.0; cols];
    for v in row.iter_mut().take(used) {
        *v = 1.0 / used as f64;
    }
    row.repeat(rows)
}

fn point_rows(rows: usize, cols: usize, symbol: impl Fn(usize) -> usize) -> Vec<f64> {
    let mut m = vec![0.0; rows * cols];
    for r in 0..rows {
        m[r * cols + symbol(r).min(cols - 1)] = 1.0;
    }
    m
}

fn check_cells(cells: u128) -> Result<()> {
    if cells > DEFAULT_CELL_LIMIT as u128 {
        return Err(Error::CellLimit {
            cells,
            limit: DEFAULT_CELL_LIMIT,
        });
    }
    Ok(())
}

/// Search space of the general inner bound: `p(u1|sa)`, `p(v2)`, `p(v1|v2)`, `p(x|v1)`.
struct GeneralLandscape {
    source: SourceBlock,
    channel: ChannelBlock,
    nu: usize,
    nv1: usize,
    nv2: usize,
    blocks: Vec<Block>,
}

impl GeneralLandscape {
    fn new(source: &JointDistribution, channel: &Channel, cfg: &SearchConfig) -> Result<Self> {
        let source = SourceBlock::new(source)?;
        let channel = ChannelBlock::new(channel)?;
        let nu = cfg.u1_cap.unwrap_or(source.nsa + 3);
        let nv1 = cfg.v1_cap.unwrap_or(channel.nx + 3);
        let nv2 = cfg.v2_cap.unwrap_or(channel.nx + 3);
        check_cells(nu as u128 * (source.nsa * source.nsb * source.nse) as u128)?;
        check_cells((nv2 * nv1 * channel.ny * channel.nz) as u128)?;
        let blocks = vec![
            Block { name: "p(U1|SA)", rows: source.nsa, cols: nu },
            Block { name: "p(V2)", rows: 1, cols: nv2 },
            Block { name: "p(V1|V2)", rows: nv2, cols: nv1 },
            Block { name: "p(X|V1)", rows: nv1, cols: channel.nx },
        ];
        Ok(GeneralLandscape { source, channel, nu, nv1, nv2, blocks })
    }

    fn split<'a>(&self, x: &'a [f64]) -> [&'a [f64]; 4] {
        let a = self.source.nsa * self.nu;
        let b = a + self.nv2;
        let c = b + self.nv2 * self.nv1;
        [&x[..a], &x[a..b], &x[b..c], &x[c..]]
    }

    fn channel_start(&self) -> Vec<f64> {
        let nx = self.channel.nx;
        let mut x = point_rows(1, self.nv2, |_| 0);
        x.extend(uniform_rows(self.nv2, self.nv1, nx.min(self.nv1)));
        // V1 = X on the first |X| symbols
        x.extend((0..self.nv1).flat_map(|v| {
            let mut row = vec![0.0; nx];
            row[v % nx] = 1.0;
            row
        }));
        x
    }
}

impl Landscape for GeneralLandscape {
    fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    fn score(&self, x: &[f64]) -> Score {
        let [u1, v2, v1, xk] = self.split(x);
        let s = self.source.terms(u1);
        let c = self.channel.terms(v2, v1, xk);
        let pipe = c.i_v1_y_given_v2 - c.i_v1_z_given_v2;
        let key = s.i_u1_sb - s.i_u1_se;
        let a_raw = c.i_v1_y - s.i_u1_sa_given_sb;
        Score {
            a_raw,
            b_raw: pipe.max(0.0) + key.max(0.0),
            b_unclamped: pipe + key,
            feasible: a_raw >= -FEASIBILITY_TOLERANCE,
        }
    }

    fn structured_starts(&self) -> Vec<Vec<f64>> {
        let mut copy_sa = point_rows(self.source.nsa, self.nu, |sa| sa);
        let mut constant = point_rows(self.source.nsa, self.nu, |_| 0);
        copy_sa.extend(self.channel_start());
        constant.extend(self.channel_start());
        vec![copy_sa, constant]
    }

    fn make_feasible(&self, x: &mut [f64]) {
        let n = self.source.nsa * self.nu;
        x[..n].copy_from_slice(&point_rows(self.source.nsa, self.nu, |_| 0));
    }
}

/// Search outcome of the general inner bound, with per-direction best couplings.
pub fn inner_bound_search(
    source: &JointDistribution,
    channel: &Channel,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let land = GeneralLandscape::new(source, channel, cfg)?;
    Ok(run_search(&land, cfg, &cfg.direction_fan()))
}

/// Convex hull of the regions of all couplings the search visited.
pub fn inner_bound_region(
    source: &JointDistribution,
    channel: &Channel,
    cfg: &SearchConfig,
) -> Result<RegionPolygon> {
    inner_bound_search(source, channel, cfg).map(|o| o.region)
}

/// Rebuilds the kernels of a general-search result.
pub fn kernels_of(best: &DirectionBest, nsa: usize, nx: usize) -> Result<CouplingKernels> {
    let [u1, v2, v1, xk] = [0, 1, 2, 3].map(|i| &best.kernels[i]);
    CouplingKernels::from_flat(
        nsa,
        u1.cols,
        &u1.values,
        &v2.values,
        v1.cols,
        &v1.values,
        nx,
        &xk.values,
    )
}

/// `p(v1)` and `p(x|v1)` with `V2` constant and the sources ignored.
struct ChannelOnlyLandscape {
    channel: ChannelBlock,
    nv1: usize,
    blocks: Vec<Block>,
}

impl Landscape for ChannelOnlyLandscape {
    fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    fn score(&self, x: &[f64]) -> Score {
        let (law, xk) = x.split_at(self.nv1);
        let c = self.channel.terms(&[1.0], law, xk);
        let s = c.i_v1_y - c.i_v1_z_given_v2;
        Score {
            a_raw: s,
            b_raw: s,
            b_unclamped: s,
            feasible: true,
        }
    }

    fn structured_starts(&self) -> Vec<Vec<f64>> {
        let nx = self.channel.nx;
        let mut x = uniform_rows(1, self.nv1, nx.min(self.nv1));
        x.extend((0..self.nv1).flat_map(|v| {
            let mut row = vec![0.0; nx];
            row[v % nx] = 1.0;
            row
        }));
        vec![x]
    }

    fn make_feasible(&self, _x: &mut [f64]) {}
}

/// Search outcome for `max [I(V1;Y) - I(V1;Z)]_+` over `V1 - X`.
pub fn channel_only_search(channel: &Channel, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let channel = ChannelBlock::new(channel)?;
    let nv1 = cfg.v1_cap.unwrap_or(channel.nx + 3);
    check_cells((nv1 * channel.ny * channel.nz) as u128)?;
    let blocks = vec![
        Block { name: "p(V1)", rows: 1, cols: nv1 },
        Block { name: "p(X|V1)", rows: nv1, cols: channel.nx },
    ];
    let land = ChannelOnlyLandscape { channel, nv1, blocks };
    // the region is a triangle; one direction is enough
    let mut outcome = run_search(&land, cfg, &[(1.0, 0.0)]);
    let s = outcome.region.max_key_rate();
    outcome.region = RegionPolygon::from_bounds(s, s);
    Ok(outcome)
}

/// `{R_SK + R_SM <= S*}` with `S* = max [I(V1;Y) - I(V1;Z)]_+`.
pub fn channel_only_region(channel: &Channel, cfg: &SearchConfig) -> Result<RegionPolygon> {
    channel_only_search(channel, cfg).map(|o| o.region)
}

/// Search space of the parallel degraded case: `p(u1|sa_F)`, `p(v2)`, `p(x_F|v2)`, `p(x_R)`.
struct ParallelLandscape {
    source: SourceBlock,
    forward: ChannelBlock,
    reverse: ChannelBlock,
    nu: usize,
    nv2: usize,
    identity_f: Vec<f64>,
    identity_r: Vec<f64>,
    blocks: Vec<Block>,
}

impl ParallelLandscape {
    fn new(
        forward: &Channel,
        reverse: &Channel,
        source: &JointDistribution,
        cfg: &SearchConfig,
    ) -> Result<Self> {
        let source = SourceBlock::new(source)?;
        let forward = ChannelBlock::new(forward)?;
        let reverse = ChannelBlock::new(reverse)?;
        let nu = cfg.u1_cap.unwrap_or(source.nsa + 3);
        let nv2 = cfg.v2_cap.unwrap_or(forward.nx + 3);
        check_cells(nu as u128 * (source.nsa * source.nsb * source.nse) as u128)?;
        check_cells((nv2 * forward.nx * forward.ny * forward.nz) as u128)?;
        let blocks = vec![
            Block { name: "p(U1|SA_F)", rows: source.nsa, cols: nu },
            Block { name: "p(V2)", rows: 1, cols: nv2 },
            Block { name: "p(X_F|V2)", rows: nv2, cols: forward.nx },
            Block { name: "p(X_R)", rows: 1, cols: reverse.nx },
        ];
        Ok(ParallelLandscape {
            identity_f: point_rows(forward.nx, forward.nx, |i| i),
            identity_r: point_rows(reverse.nx, reverse.nx, |i| i),
            source,
            forward,
            reverse,
            nu,
            nv2,
            blocks,
        })
    }

    fn split<'a>(&self, x: &'a [f64]) -> [&'a [f64]; 4] {
        let a = self.source.nsa * self.nu;
        let b = a + self.nv2;
        let c = b + self.nv2 * self.forward.nx;
        [&x[..a], &x[a..b], &x[b..c], &x[c..]]
    }

    fn channel_start(&self) -> Vec<f64> {
        let mut x = point_rows(1, self.nv2, |_| 0);
        x.extend(uniform_rows(self.nv2, self.forward.nx, self.forward.nx));
        x.extend(uniform_rows(1, self.reverse.nx, self.reverse.nx));
        x
    }
}

impl Landscape for ParallelLandscape {
    fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    fn score(&self, x: &[f64]) -> Score {
        let [u1, v2, xf, xr] = self.split(x);
        let s = self.source.terms(u1);
        let f = self.forward.terms(v2, xf, &self.identity_f);
        let r = self.reverse.terms(&[1.0], xr, &self.identity_r);
        let a_raw = f.i_v1_y + r.i_v1_y - s.i_u1_sa_given_sb;
        let pipe = f.i_v1_y_given_v2 - f.i_v1_z_given_v2;
        // under stochastic degradation only the marginals of the legs matter,
        // so this difference equals I(U1;SB_F|SE_F)
        let key = s.i_u1_sb - s.i_u1_se;
        Score {
            a_raw,
            b_raw: pipe.max(0.0) + key.max(0.0),
            b_unclamped: pipe + key,
            feasible: a_raw >= -FEASIBILITY_TOLERANCE,
        }
    }

    fn structured_starts(&self) -> Vec<Vec<f64>> {
        let mut copy_sa = point_rows(self.source.nsa, self.nu, |sa| sa);
        let mut constant = point_rows(self.source.nsa, self.nu, |_| 0);
        copy_sa.extend(self.channel_start());
        constant.extend(self.channel_start());
        vec![copy_sa, constant]
    }

    fn make_feasible(&self, x: &mut [f64]) {
        let n = self.source.nsa * self.nu;
        x[..n].copy_from_slice(&point_rows(self.source.nsa, self.nu, |_| 0));
    }
}

/// One degradation leg of a parallel scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Leg {
    ForwardChannel,
    ReverseChannel,
    ForwardSource,
    ReverseSource,
}

impl Leg {
    pub fn label(self) -> &'static str {
        match self {
            Leg::ForwardChannel => "forward channel",
            Leg::ReverseChannel => "reverse channel",
            Leg::ForwardSource => "forward source",
            Leg::ReverseSource => "reverse source",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelOutcome {
    pub search: SearchOutcome,
    pub verdicts: Vec<(Leg, DegradationVerdict)>,
    /// Whether the swapped channel / source assignment was also searched.
    pub swapped_channels: bool,
    pub swapped_sources: bool,
}

fn trivial_channel() -> Channel {
    Channel::from_flat((X, 1), vec![(Y, 1), (Z, 1)], vec![1.0]).expect("one-cell channel")
}

fn channel_verdict(channel: &Channel) -> Result<DegradationVerdict> {
    let c = canonical_channel(channel)?;
    classify_component(&c.output_marginal(&[Y])?, &c.output_marginal(&[Z])?, DEFAULT_TOLERANCE)
}

fn require(leg: Leg, verdict: &DegradationVerdict, forward: bool) -> Result<()> {
    let ok = if forward {
        verdict.order.includes_forward()
    } else {
        verdict.order.includes_reverse()
    };
    if ok {
        return Ok(());
    }
    let (want, residual) = if forward {
        ("forwardly", verdict.forward_residual)
    } else {
        ("reversely", verdict.reverse_residual)
    };
    Err(Error::Precondition {
        leg: leg.label().into(),
        reason: format!(
            "not {want} degraded (verdict {:?}, best residual {residual:.3e} > {:.0e})",
            verdict.order, verdict.tolerance
        ),
    })
}

/// Tight region when every component is forwardly or reversely degraded.
/// Absent components are `None`.
pub fn parallel_degraded_search(
    forward_channel: Option<&Channel>,
    reverse_channel: Option<&Channel>,
    forward_source: Option<&JointDistribution>,
    reverse_source: Option<&JointDistribution>,
    cfg: &SearchConfig,
) -> Result<ParallelOutcome> {
    cfg.validate()?;
    let fc = forward_channel.cloned().unwrap_or_else(trivial_channel);
    let rc = reverse_channel.cloned().unwrap_or_else(trivial_channel);
    let fs = forward_source.cloned().unwrap_or_else(no_source);
    let rs = reverse_source.cloned().unwrap_or_else(no_source);

    let verdicts = vec![
        (Leg::ForwardChannel, channel_verdict(&fc)?),
        (Leg::ReverseChannel, channel_verdict(&rc)?),
        (Leg::ForwardSource, classify_source(&fs, DEFAULT_TOLERANCE)?),
        (Leg::ReverseSource, classify_source(&rs, DEFAULT_TOLERANCE)?),
    ];
    for (leg, v) in &verdicts {
        let forward = matches!(leg, Leg::ForwardChannel | Leg::ForwardSource);
        require(*leg, v, forward)?;
    }
    let both = |i: usize| verdicts[i].1.order == crate::degradation::DegradationOrder::Both;
    let swapped_channels = both(0) && both(1);
    let swapped_sources = both(2) && both(3);

    let mut assignments = vec![(&fc, &rc, &fs)];
    if swapped_channels {
        assignments.push((&rc, &fc, &fs));
    }
    if swapped_sources {
        let n = assignments.len();
        for i in 0..n {
            let (f, r, _) = assignments[i];
            assignments.push((f, r, &rs));
        }
    }
    let fan = cfg.direction_fan();
    let mut merged: Option<SearchOutcome> = None;
    for (f, r, s) in assignments {
        let land = ParallelLandscape::new(f, r, s, cfg)?;
        let o = run_search(&land, cfg, &fan);
        merged = Some(match merged {
            None => o,
            Some(m) => merge(m, o),
        });
    }
    Ok(ParallelOutcome {
        search: merged.expect("at least one assignment"),
        verdicts,
        swapped_channels,
        swapped_sources,
    })
}

fn merge(mut a: SearchOutcome, b: SearchOutcome) -> SearchOutcome {
    a.region = a.region.union(&b.region);
    for (x, y) in a.best.iter_mut().zip(b.best) {
        if y.value > x.value {
            *x = y;
        }
    }
    a.visited.extend(b.visited);
    a.evaluations += b.evaluations;
    a
}

pub fn parallel_degraded_region(
    forward_channel: Option<&Channel>,
    reverse_channel: Option<&Channel>,
    forward_source: Option<&JointDistribution>,
    reverse_source: Option<&JointDistribution>,
    cfg: &SearchConfig,
) -> Result<RegionPolygon> {
    parallel_degraded_search(forward_channel, reverse_channel, forward_source, reverse_source, cfg)
        .map(|o| o.search.region)
}
