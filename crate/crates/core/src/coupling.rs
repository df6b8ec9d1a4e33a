//! Auxiliary couplings `p(u1|sa) p(sa,sb,se) p(v2) p(v1|v2) p(x|v1) p(y,z|x)`.
//!
//! [`assemble_coupling`] builds the full nine-variable joint. The search code
//! never materializes that joint: it evaluates the same information terms
//! block by block through [`SourceBlock`] and [`ChannelBlock`], which only
//! touch the source half or the channel half. Tests check the two routes
//! against each other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{entropy_of, snap_information, Channel, JointDistribution, DEFAULT_CELL_LIMIT};

pub const U1: &str = "U1";
pub const V1: &str = "V1";
pub const V2: &str = "V2";
pub const X: &str = "X";
pub const Y: &str = "Y";
pub const Z: &str = "Z";
pub const SA: &str = "SA";
pub const SB: &str = "SB";
pub const SE: &str = "SE";

/// Tolerance on `I(V1;Y) >= I(U1;SA|SB)`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// The kernels a coupling is assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingKernels {
    /// `SA -> U1`
    pub u1_given_sa: Channel,
    /// law of `V2`
    pub v2_law: Vec<f64>,
    /// `V2 -> V1`
    pub v1_given_v2: Channel,
    /// `V1 -> X`
    pub x_given_v1: Channel,
}

impl CouplingKernels {
    pub fn new(
        u1_given_sa: Channel,
        v2_law: Vec<f64>,
        v1_given_v2: Channel,
        x_given_v1: Channel,
    ) -> Result<Self> {
        let k = CouplingKernels {
            u1_given_sa,
            v2_law,
            v1_given_v2,
            x_given_v1,
        };
        k.check_shapes()?;
        Ok(k)
    }

    /// Kernels from flat row-major blocks, as produced by the search.
    pub(crate) fn from_flat(
        sa: usize,
        u1: usize,
        u1_given_sa: &[f64],
        v2_law: &[f64],
        v1: usize,
        v1_given_v2: &[f64],
        x: usize,
        x_given_v1: &[f64],
    ) -> Result<Self> {
        Self::new(
            Channel::from_flat((SA, sa), vec![(U1, u1)], u1_given_sa.to_vec())?,
            v2_law.to_vec(),
            Channel::from_flat((V2, v2_law.len()), vec![(V1, v1)], v1_given_v2.to_vec())?,
            Channel::from_flat((V1, v1), vec![(X, x)], x_given_v1.to_vec())?,
        )
    }

    fn check_shapes(&self) -> Result<()> {
        if self.u1_given_sa.outputs().len() != 1
            || self.v1_given_v2.outputs().len() != 1
            || self.x_given_v1.outputs().len() != 1
        {
            return Err(Error::Composition(
                "auxiliary kernels must have a single output".into(),
            ));
        }
        let sum: f64 = self.v2_law.iter().sum();
        if self.v2_law.is_empty()
            || self.v2_law.iter().any(|&p| p < -1e-12)
            || (sum - 1.0).abs() > crate::prob::SUM_TOLERANCE
        {
            return Err(Error::InvalidDistribution("V2 law is not a distribution".into()));
        }
        if self.v2_law.len() != self.v1_given_v2.input_size() {
            return Err(Error::Composition(format!(
                "V2 law has {} symbols, kernel V2->V1 expects {}",
                self.v2_law.len(),
                self.v1_given_v2.input_size()
            )));
        }
        if self.v1_given_v2.output_cells() != self.x_given_v1.input_size() {
            return Err(Error::Composition(format!(
                "kernel V2->V1 emits {} symbols, kernel V1->X expects {}",
                self.v1_given_v2.output_cells(),
                self.x_given_v1.input_size()
            )));
        }
        Ok(())
    }

    pub fn u1_size(&self) -> usize {
        self.u1_given_sa.output_cells()
    }

    pub fn v1_size(&self) -> usize {
        self.x_given_v1.input_size()
    }

    pub fn v2_size(&self) -> usize {
        self.v2_law.len()
    }

    /// All auxiliaries constant; `X` uniform.
    pub fn degenerate(sa: usize, x: usize) -> Result<Self> {
        Self::new(
            Channel::constant(SA, sa, U1, 1, 0)?,
            vec![1.0],
            Channel::constant(V2, 1, V1, 1, 0)?,
            Channel::from_flat((V1, 1), vec![(X, x)], vec![1.0 / x as f64; x])?,
        )
    }

    /// `U1` constant, `V2` constant, `V1 = X` with the given input law.
    pub fn channel_input(sa: usize, x_law: &[f64]) -> Result<Self> {
        let x = x_law.len();
        Self::new(
            Channel::constant(SA, sa, U1, 1, 0)?,
            vec![1.0],
            Channel::from_flat((V2, 1), vec![(V1, x)], x_law.to_vec())?,
            Channel::identity(V1, X, x)?,
        )
    }
}

/// The information terms entering the region of a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingTerms {
    pub i_v1_y: f64,
    pub i_v2_y: f64,
    pub i_v1_y_given_v2: f64,
    pub i_v1_z_given_v2: f64,
    pub i_u1_sa_given_sb: f64,
    pub i_u1_sb: f64,
    pub i_u1_se: f64,
}

impl CouplingTerms {
    pub(crate) fn from_parts(c: ChannelTerms, s: SourceTerms) -> Self {
        CouplingTerms {
            i_v1_y: c.i_v1_y,
            i_v2_y: c.i_v2_y,
            i_v1_y_given_v2: c.i_v1_y_given_v2,
            i_v1_z_given_v2: c.i_v1_z_given_v2,
            i_u1_sa_given_sb: s.i_u1_sa_given_sb,
            i_u1_sb: s.i_u1_sb,
            i_u1_se: s.i_u1_se,
        }
    }

    /// `I(V1;Y) - I(U1;SA|SB)`; negative means the coupling is outside the feasible set.
    pub fn feasibility_margin(&self) -> f64 {
        self.i_v1_y - self.i_u1_sa_given_sb
    }

    pub fn is_feasible(&self) -> bool {
        self.feasibility_margin() >= -FEASIBILITY_TOLERANCE
    }

    /// `[I(V1;Y|V2) - I(V1;Z|V2)]_+`
    pub fn secret_pipe_rate(&self) -> f64 {
        (self.i_v1_y_given_v2 - self.i_v1_z_given_v2).max(0.0)
    }

    /// `I(V1;Y) - [I(V1;Y|V2) - I(V1;Z|V2)]_+`
    pub fn public_pipe_rate(&self) -> f64 {
        (self.i_v1_y - self.secret_pipe_rate()).max(0.0)
    }

    /// `[I(U1;SB) - I(U1;SE)]_+`
    pub fn key_rate(&self) -> f64 {
        (self.i_u1_sb - self.i_u1_se).max(0.0)
    }

    /// Bound on `R_SM`, clamped at zero.
    pub fn message_bound(&self) -> f64 {
        self.feasibility_margin().max(0.0)
    }

    /// Bound on `R_SK + R_SM`.
    pub fn sum_bound(&self) -> f64 {
        self.secret_pipe_rate() + self.key_rate()
    }
}

/// A joint law over `(U1,V1,V2,X,Y,Z,SA,SB,SE)` together with its kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryCoupling {
    joint: JointDistribution,
    kernels: CouplingKernels,
    terms: CouplingTerms,
}

impl AuxiliaryCoupling {
    pub fn joint(&self) -> &JointDistribution {
        &self.joint
    }

    pub fn kernels(&self) -> &CouplingKernels {
        &self.kernels
    }

    /// Terms evaluated on the full joint.
    pub fn terms(&self) -> &CouplingTerms {
        &self.terms
    }

    pub fn is_feasible(&self) -> bool {
        self.terms.is_feasible()
    }

    pub fn feasibility_margin(&self) -> f64 {
        self.terms.feasibility_margin()
    }

    /// Source marginal `p(sa,sb,se)`.
    pub fn source(&self) -> JointDistribution {
        self.joint
            .marginal(&[SA, SB, SE])
            .expect("coupling always carries the source variables")
    }

    /// Broadcast channel `p(y,z|x)`.
    pub fn channel(&self) -> Channel {
        self.joint
            .conditional(X, &[Y, Z])
            .expect("coupling always carries the channel variables")
    }
}

/// Reorders a source to `(SA,SB,SE)`; any other variable is rejected.
pub fn canonical_source(source: &JointDistribution) -> Result<JointDistribution> {
    if source.variables().len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "source must be over (SA,SB,SE), got {:?}",
            source.names()
        )));
    }
    source.marginal(&[SA, SB, SE])
}

/// Renames a two-output channel to `X -> (Y,Z)`.
pub fn canonical_channel(channel: &Channel) -> Result<Channel> {
    if channel.outputs().len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "broadcast channel must have two outputs (Bob, Eve), got {}",
            channel.outputs().len()
        )));
    }
    channel.with_names(X, &[Y, Z])
}

pub fn assemble_coupling(
    source: &JointDistribution,
    channel: &Channel,
    u1_given_sa: &Channel,
    v2_law: &[f64],
    v1_given_v2: &Channel,
    x_given_v1: &Channel,
) -> Result<AuxiliaryCoupling> {
    let kernels = CouplingKernels::new(
        u1_given_sa.clone(),
        v2_law.to_vec(),
        v1_given_v2.clone(),
        x_given_v1.clone(),
    )?;
    assemble_from_kernels(source, channel, &kernels, DEFAULT_CELL_LIMIT)
}

/// Builds the full joint, failing with [`Error::CellLimit`] beyond `limit` cells.
pub fn assemble_from_kernels(
    source: &JointDistribution,
    channel: &Channel,
    kernels: &CouplingKernels,
    limit: usize,
) -> Result<AuxiliaryCoupling> {
    kernels.check_shapes()?;
    let source = canonical_source(source)?;
    let channel = canonical_channel(channel)?;
    let [nsa, nsb, nse] = [0, 1, 2].map(|i| source.variables()[i].size);
    if kernels.u1_given_sa.input_size() != nsa {
        return Err(Error::Composition(format!(
            "kernel SA->U1 expects {} symbols, source SA has {nsa}",
            kernels.u1_given_sa.input_size()
        )));
    }
    if kernels.x_given_v1.output_cells() != channel.input_size() {
        return Err(Error::Composition(format!(
            "kernel V1->X emits {} symbols, channel input has {}",
            kernels.x_given_v1.output_cells(),
            channel.input_size()
        )));
    }
    let nu = kernels.u1_size();
    let nv1 = kernels.v1_size();
    let nv2 = kernels.v2_size();
    let nx = channel.input_size();
    let ny = channel.outputs()[0].size;
    let nz = channel.outputs()[1].size;
    let cells = [nu, nv1, nv2, nx, ny, nz, nsa, nsb, nse]
        .iter()
        .map(|&s| s as u128)
        .product::<u128>();
    if cells > limit as u128 {
        return Err(Error::CellLimit { cells, limit });
    }

    // channel block in (V1,V2,X,Y,Z) order
    let nyz = ny * nz;
    let mut chan = Vec::with_capacity(nv1 * nv2 * nx * nyz);
    for v1 in 0..nv1 {
        for v2 in 0..nv2 {
            let w = kernels.v2_law[v2] * kernels.v1_given_v2.entry(v2, v1);
            for x in 0..nx {
                let wx = w * kernels.x_given_v1.entry(v1, x);
                chan.extend(channel.row(x).iter().map(|&p| wx * p));
            }
        }
    }
    let src = source.probabilities();
    let nsrc = src.len();
    let per_sa = nsb * nse;
    let mut probs = Vec::with_capacity(cells as usize);
    for u in 0..nu {
        let weighted: Vec<f64> = (0..nsrc)
            .map(|i| src[i] * kernels.u1_given_sa.entry(i / per_sa, u))
            .collect();
        for &c in &chan {
            probs.extend(weighted.iter().map(|&s| c * s));
        }
    }
    let joint = JointDistribution::with_limit(
        vec![
            (U1, nu),
            (V1, nv1),
            (V2, nv2),
            (X, nx),
            (Y, ny),
            (Z, nz),
            (SA, nsa),
            (SB, nsb),
            (SE, nse),
        ],
        probs,
        limit,
    )?;
    let terms = terms_from_joint(&joint)?;
    Ok(AuxiliaryCoupling {
        joint,
        kernels: kernels.clone(),
        terms,
    })
}

fn terms_from_joint(j: &JointDistribution) -> Result<CouplingTerms> {
    Ok(CouplingTerms {
        i_v1_y: j.mutual_information(&[V1], &[Y])?.0,
        i_v2_y: j.mutual_information(&[V2], &[Y])?.0,
        i_v1_y_given_v2: j.conditional_mutual_information(&[V1], &[Y], &[V2])?.0,
        i_v1_z_given_v2: j.conditional_mutual_information(&[V1], &[Z], &[V2])?.0,
        i_u1_sa_given_sb: j.conditional_mutual_information(&[U1], &[SA], &[SB])?.0,
        i_u1_sb: j.mutual_information(&[U1], &[SB])?.0,
        i_u1_se: j.mutual_information(&[U1], &[SE])?.0,
    })
}

/// Channel-side terms of a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct ChannelTerms {
    pub i_v1_y: f64,
    pub i_v2_y: f64,
    pub i_v1_y_given_v2: f64,
    pub i_v1_z_given_v2: f64,
}

/// Source-side terms of a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct SourceTerms {
    pub i_u1_sa_given_sb: f64,
    pub i_u1_sb: f64,
    pub i_u1_se: f64,
}

/// `p(y,z|x)` as a flat matrix, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub(crate) struct ChannelBlock {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    matrix: Vec<f64>,
}

impl ChannelBlock {
    pub fn new(channel: &Channel) -> Result<Self> {
        let channel = canonical_channel(channel)?;
        Ok(ChannelBlock {
            nx: channel.input_size(),
            ny: channel.outputs()[0].size,
            nz: channel.outputs()[1].size,
            matrix: channel.matrix().to_vec(),
        })
    }

    /// Terms for flat kernels `p(v2)`, `p(v1|v2)` (`nv2 x nv1`), `p(x|v1)` (`nv1 x nx`).
    pub fn terms(&self, v2_law: &[f64], v1_given_v2: &[f64], x_given_v1: &[f64]) -> ChannelTerms {
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        let nyz = ny * nz;
        let nv2 = v2_law.len();
        let nv1 = x_given_v1.len() / nx;

        // p(y,z|v1)
        let mut out_given_v1 = vec![0.0; nv1 * nyz];
        for v1 in 0..nv1 {
            let row = &mut out_given_v1[v1 * nyz..(v1 + 1) * nyz];
            for x in 0..nx {
                let px = x_given_v1[v1 * nx + x];
                if px == 0.0 {
                    continue;
                }
                for (r, &w) in row.iter_mut().zip(&self.matrix[x * nyz..(x + 1) * nyz]) {
                    *r += px * w;
                }
            }
        }

        let mut p_v2v1 = vec![0.0; nv2 * nv1];
        let mut p_v2v1y = vec![0.0; nv2 * nv1 * ny];
        let mut p_v2v1z = vec![0.0; nv2 * nv1 * nz];
        for v2 in 0..nv2 {
            for v1 in 0..nv1 {
                let w = v2_law[v2] * v1_given_v2[v2 * nv1 + v1];
                let k = v2 * nv1 + v1;
                p_v2v1[k] = w;
                if w == 0.0 {
                    continue;
                }
                let row = &out_given_v1[v1 * nyz..(v1 + 1) * nyz];
                for y in 0..ny {
                    for z in 0..nz {
                        let p = w * row[y * nz + z];
                        p_v2v1y[k * ny + y] += p;
                        p_v2v1z[k * nz + z] += p;
                    }
                }
            }
        }
        let sum_over_v1 = |t: &[f64], m: usize| -> Vec<f64> {
            let mut out = vec![0.0; nv2 * m];
            for v2 in 0..nv2 {
                for v1 in 0..nv1 {
                    for j in 0..m {
                        out[v2 * m + j] += t[(v2 * nv1 + v1) * m + j];
                    }
                }
            }
            out
        };
        let sum_over_v2 = |t: &[f64], m: usize| -> Vec<f64> {
            let mut out = vec![0.0; m];
            for (i, &p) in t.iter().enumerate() {
                out[i % m] += p;
            }
            out
        };
        let p_v2y = sum_over_v1(&p_v2v1y, ny);
        let p_v2z = sum_over_v1(&p_v2v1z, nz);
        let p_v1y = sum_over_v2(&p_v2v1y, nv1 * ny);
        let p_v1 = sum_over_v2(&p_v2v1, nv1);
        let p_y = sum_over_v2(&p_v2y, ny);

        let h_v2 = entropy_of(v2_law);
        let h_v2v1 = entropy_of(&p_v2v1);
        let h_y = entropy_of(&p_y);
        let h_v2y = entropy_of(&p_v2y);
        let h_v2z = entropy_of(&p_v2z);
        ChannelTerms {
            i_v1_y: snap_information(entropy_of(&p_v1) + h_y - entropy_of(&p_v1y)),
            i_v2_y: snap_information(h_v2 + h_y - h_v2y),
            i_v1_y_given_v2: snap_information(h_v2v1 + h_v2y - h_v2 - entropy_of(&p_v2v1y)),
            i_v1_z_given_v2: snap_information(h_v2v1 + h_v2z - h_v2 - entropy_of(&p_v2v1z)),
        }
    }
}

/// `p(sa,sb,se)` with cached source-only entropies.
#[derive(Debug, Clone)]
pub(crate) struct SourceBlock {
    pub nsa: usize,
    pub nsb: usize,
    pub nse: usize,
    probs: Vec<f64>,
    h_sasb: f64,
    h_sb: f64,
    h_se: f64,
}

impl SourceBlock {
    pub fn new(source: &JointDistribution) -> Result<Self> {
        let s = canonical_source(source)?;
        Ok(SourceBlock {
            nsa: s.variables()[0].size,
            nsb: s.variables()[1].size,
            nse: s.variables()[2].size,
            probs: s.probabilities().to_vec(),
            h_sasb: s.entropy(&[SA, SB])?.0,
            h_sb: s.entropy(&[SB])?.0,
            h_se: s.entropy(&[SE])?.0,
        })
    }

    /// Terms for a flat kernel `p(u1|sa)` of shape `nsa x nu`.
    pub fn terms(&self, u1_given_sa: &[f64]) -> SourceTerms {
        let (nsa, nsb, nse) = (self.nsa, self.nsb, self.nse);
        let nu = u1_given_sa.len() / nsa;
        let mut p_u = vec![0.0; nu];
        let mut p_usb = vec![0.0; nu * nsb];
        let mut p_use = vec![0.0; nu * nse];
        let mut p_usasb = vec![0.0; nu * nsa * nsb];
        for sa in 0..nsa {
            for sb in 0..nsb {
                for se in 0..nse {
                    let p = self.probs[(sa * nsb + sb) * nse + se];
                    if p == 0.0 {
                        continue;
                    }
                    for u in 0..nu {
                        let q = p * u1_given_sa[sa * nu + u];
                        p_u[u] += q;
                        p_usb[u * nsb + sb] += q;
                        p_use[u * nse + se] += q;
                        p_usasb[(u * nsa + sa) * nsb + sb] += q;
                    }
                }
            }
        }
        let h_u = entropy_of(&p_u);
        let h_usb = entropy_of(&p_usb);
        SourceTerms {
            i_u1_sa_given_sb: snap_information(h_usb + self.h_sasb - self.h_sb - entropy_of(&p_usasb)),
            i_u1_sb: snap_information(h_u + self.h_sb - h_usb),
            i_u1_se: snap_information(h_u + self.h_se - entropy_of(&p_use)),
        }
    }
}

/// Block-wise terms for a kernel bundle; agrees with [`AuxiliaryCoupling::terms`].
pub fn coupling_terms(
    source: &JointDistribution,
    channel: &Channel,
    kernels: &CouplingKernels,
) -> Result<CouplingTerms> {
    kernels.check_shapes()?;
    let s = SourceBlock::new(source)?;
    let c = ChannelBlock::new(channel)?;
    if kernels.u1_given_sa.input_size() != s.nsa || kernels.x_given_v1.output_cells() != c.nx {
        return Err(Error::Composition("kernel alphabets do not match the source/channel".into()));
    }
    Ok(CouplingTerms::from_parts(
        c.terms(
            &kernels.v2_law,
            kernels.v1_given_v2.matrix(),
            kernels.x_given_v1.matrix(),
        ),
        s.terms(kernels.u1_given_sa.matrix()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn binary_source() -> JointDistribution {
        // SA uniform, SB = SA through BSC(0.1), SE = SA through BSC(0.3)
        generators::source_from_views(&[0.5, 0.5], &generators::bsc_kernel(0.1), &generators::bsc_kernel(0.3))
            .unwrap()
    }

    #[test]
    fn degenerate_auxiliaries_factorize() {
        let source = binary_source();
        let channel = generators::broadcast(&generators::bsc_kernel(0.1), &generators::bsc_kernel(0.2)).unwrap();
        let k = CouplingKernels::degenerate(2, 2).unwrap();
        let c = assemble_from_kernels(&source, &channel, &k, DEFAULT_CELL_LIMIT).unwrap();
        // joint = source x (uniform input through the channel)
        let chan_joint = JointDistribution::from_channel(&[0.5, 0.5], &canonical_channel(&channel).unwrap()).unwrap();
        let expected = source.product(&chan_joint).unwrap();
        let got = c.joint().marginal(&[SA, SB, SE, X, Y, Z]).unwrap();
        assert!(got.max_abs_diff(&expected).unwrap() < 1e-12);
        assert_eq!(c.terms().sum_bound(), 0.0);
        assert_eq!(c.terms().message_bound(), 0.0);
    }

    #[test]
    fn identity_v1_gives_channel_information() {
        let source = binary_source();
        let channel = generators::broadcast(&generators::bsc_kernel(0.1), &generators::bsc_kernel(0.2)).unwrap();
        let k = CouplingKernels::channel_input(2, &[0.5, 0.5]).unwrap();
        let c = assemble_from_kernels(&source, &channel, &k, DEFAULT_CELL_LIMIT).unwrap();
        let ixy = c.joint().mutual_information(&[X], &[Y]).unwrap().0;
        assert_abs_diff_eq!(c.terms().i_v1_y, ixy, epsilon = 1e-12);
    }

    #[test]
    fn source_marginal_survives_assembly() {
        let source = binary_source();
        let channel = generators::broadcast(&generators::bsc_kernel(0.05), &generators::erasure_kernel(0.4)).unwrap();
        let k = CouplingKernels::new(
            Channel::new((SA, 2), vec![(U1, 3)], vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6]]).unwrap(),
            vec![0.3, 0.7],
            Channel::new((V2, 2), vec![(V1, 2)], vec![vec![0.9, 0.1], vec![0.25, 0.75]]).unwrap(),
            Channel::new((V1, 2), vec![(X, 2)], vec![vec![0.8, 0.2], vec![0.1, 0.9]]).unwrap(),
        )
        .unwrap();
        let c = assemble_from_kernels(&source, &channel, &k, DEFAULT_CELL_LIMIT).unwrap();
        // direct contraction oracle: sum the joint over everything but the source
        let mut marg = [0.0; 8];
        let names = c.joint().names();
        assert_eq!(names, vec![U1, V1, V2, X, Y, Z, SA, SB, SE]);
        for (i, &p) in c.joint().probabilities().iter().enumerate() {
            marg[i % 8] += p;
        }
        for (a, b) in marg.iter().zip(source.probabilities()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn alphabet_mismatch_is_composition_error() {
        let source = binary_source();
        let channel = generators::broadcast(&generators::bsc_kernel(0.1), &generators::bsc_kernel(0.2)).unwrap();
        let bad = CouplingKernels::new(
            Channel::constant(SA, 3, U1, 1, 0).unwrap(),
            vec![1.0],
            Channel::constant(V2, 1, V1, 1, 0).unwrap(),
            Channel::constant(V1, 1, X, 2, 0).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            assemble_from_kernels(&source, &channel, &bad, DEFAULT_CELL_LIMIT),
            Err(Error::Composition(_))
        ));
        assert!(matches!(
            assemble_coupling(
                &source,
                &channel,
                &Channel::constant(SA, 2, U1, 1, 0).unwrap(),
                &[0.5, 0.5],
                &Channel::constant(V2, 1, V1, 1, 0).unwrap(),
                &Channel::constant(V1, 1, X, 2, 0).unwrap(),
            ),
            Err(Error::Composition(_))
        ));
        assert!(matches!(
            assemble_from_kernels(&source, &channel, &CouplingKernels::degenerate(2, 2).unwrap(), 10),
            Err(Error::CellLimit { .. })
        ));
    }

    fn stochastic(rows: usize, cols: usize, w: &[f64], offset: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let row: Vec<f64> = (0..cols).map(|c| w[(offset + r * cols + c) % w.len()]).collect();
            let s: f64 = row.iter().sum();
            out.extend(row.iter().map(|x| x / s));
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn block_route_matches_full_joint(
            w in prop::collection::vec(0.01f64..1.0, 64),
            nu in 1usize..4,
            nv1 in 1usize..4,
            nv2 in 1usize..3,
        ) {
            let source = generators::source_from_views(
                &stochastic(1, 2, &w, 0),
                &Channel::from_flat((SA, 2), vec![(SB, 3)], stochastic(2, 3, &w, 3)).unwrap(),
                &Channel::from_flat((SA, 2), vec![(SE, 2)], stochastic(2, 2, &w, 9)).unwrap(),
            ).unwrap();
            let channel = generators::broadcast(
                &Channel::from_flat((X, 2), vec![(Y, 2)], stochastic(2, 2, &w, 13)).unwrap(),
                &Channel::from_flat((X, 2), vec![(Z, 3)], stochastic(2, 3, &w, 17)).unwrap(),
            ).unwrap();
            let k = CouplingKernels::from_flat(
                2, nu, &stochastic(2, nu, &w, 23),
                &stochastic(1, nv2, &w, 29),
                nv1, &stochastic(nv2, nv1, &w, 31),
                2, &stochastic(nv1, 2, &w, 37),
            ).unwrap();
            let full = assemble_from_kernels(&source, &channel, &k, DEFAULT_CELL_LIMIT).unwrap();
            let fast = coupling_terms(&source, &channel, &k).unwrap();
            let t = full.terms();
            for (a, b) in [
                (t.i_v1_y, fast.i_v1_y), (t.i_v2_y, fast.i_v2_y),
                (t.i_v1_y_given_v2, fast.i_v1_y_given_v2), (t.i_v1_z_given_v2, fast.i_v1_z_given_v2),
                (t.i_u1_sa_given_sb, fast.i_u1_sa_given_sb), (t.i_u1_sb, fast.i_u1_sb), (t.i_u1_se, fast.i_u1_se),
            ] {
                prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            // independence of the two blocks
            let j = full.joint();
            prop_assert!(j.mutual_information(&[U1], &[V1, V2]).unwrap().0 <= 1e-9);
            prop_assert!(j.conditional_mutual_information(&[U1], &[Y, Z], &[SA]).unwrap().0 <= 1e-9);
            // data processing along V2 - V1 - X
            let i_v2_x = j.mutual_information(&[V2], &[X]).unwrap().0;
            let i_v2_v1 = j.mutual_information(&[V2], &[V1]).unwrap().0;
            prop_assert!(i_v2_x <= i_v2_v1 + 1e-9);
            prop_assert!(j.mutual_information(&[V1], &[Y]).unwrap().0 <= j.mutual_information(&[X], &[Y]).unwrap().0 + 1e-9);
        }
    }
}
