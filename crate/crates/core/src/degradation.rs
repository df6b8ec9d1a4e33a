//! Stochastic degradation order between two channels sharing an input.
//!
//! `second` is a degraded version of `first` when some row-stochastic kernel
//! `f` gives `p_second(z|x) = sum_y p_first(y|x) f(z|y)`. Existence of `f` is
//! decided by the linear program
//!
//! ```text
//! minimize t  subject to  |(P f)[x][z] - Q[x][z]| <= t,  f >= 0,  f 1 = 1
//! ```
//!
//! and the witness is accepted when its recomposed error is within `tol`.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use serde::Serialize;

use crate::coupling::{canonical_source, SA, SB, SE};
use crate::error::{Error, Result};
use crate::prob::{Channel, JointDistribution};

pub const DEFAULT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DegradationOrder {
    /// Eve's observation is a degraded version of Bob's.
    ForwardlyDegraded,
    /// Bob's observation is a degraded version of Eve's.
    ReverselyDegraded,
    Both,
    Neither,
}

impl DegradationOrder {
    pub fn includes_forward(self) -> bool {
        matches!(self, Self::ForwardlyDegraded | Self::Both)
    }

    pub fn includes_reverse(self) -> bool {
        matches!(self, Self::ReverselyDegraded | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegradationVerdict {
    pub order: DegradationOrder,
    /// Kernel from Bob's alphabet to Eve's, when forwardly degraded.
    pub forward_witness: Option<Channel>,
    /// Kernel from Eve's alphabet to Bob's, when reversely degraded.
    pub reverse_witness: Option<Channel>,
    /// Best achievable max factorization error in each direction.
    pub forward_residual: f64,
    pub reverse_residual: f64,
    pub tolerance: f64,
}

/// The kernel minimizing the max factorization error, and that error.
pub fn best_degrading_map(first: &Channel, second: &Channel) -> Result<(Channel, f64)> {
    if first.input_size() != second.input_size() {
        return Err(Error::InvalidArgument(format!(
            "channels have {} and {} inputs",
            first.input_size(),
            second.input_size()
        )));
    }
    let nx = first.input_size();
    let ny = first.output_cells();
    let nz = second.output_cells();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let f: Vec<_> = (0..ny * nz).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    for y in 0..ny {
        let mut row = LinearExpr::empty();
        for z in 0..nz {
            row.add(f[y * nz + z], 1.0);
        }
        lp.add_constraint(row, ComparisonOp::Eq, 1.0);
    }
    for x in 0..nx {
        for z in 0..nz {
            let mut upper = LinearExpr::empty();
            let mut lower = LinearExpr::empty();
            for y in 0..ny {
                let p = first.entry(x, y);
                if p != 0.0 {
                    upper.add(f[y * nz + z], p);
                    lower.add(f[y * nz + z], p);
                }
            }
            upper.add(t, -1.0);
            lower.add(t, 1.0);
            let q = second.entry(x, z);
            lp.add_constraint(upper, ComparisonOp::Le, q);
            lp.add_constraint(lower, ComparisonOp::Ge, q);
        }
    }
    let solution = lp.solve().map_err(|e| Error::Solver(e.to_string()))?;

    let mut kernel = Vec::with_capacity(ny * nz);
    for y in 0..ny {
        let row: Vec<f64> = (0..nz).map(|z| solution[f[y * nz + z]].max(0.0)).collect();
        let s: f64 = row.iter().sum();
        kernel.extend(row.iter().map(|v| v / s));
    }
    let in_name = witness_name(first);
    let mut out_name = witness_name(second);
    if out_name == in_name {
        out_name.push('\'');
    }
    let witness = Channel::from_flat((in_name, ny), vec![(out_name, nz)], kernel)?;
    let residual = factorization_error(first, second, &witness)?;
    Ok((witness, residual))
}

fn witness_name(c: &Channel) -> String {
    c.outputs()
        .iter()
        .map(|v| v.name.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

/// `max |first ∘ kernel - second|` over all entries.
pub fn factorization_error(first: &Channel, second: &Channel, kernel: &Channel) -> Result<f64> {
    let composed = first.compose(kernel)?;
    composed.max_abs_diff(second)
}

/// A kernel `f` with `second = first ∘ f` within `tol`, if one exists.
pub fn find_degrading_map(first: &Channel, second: &Channel, tol: f64) -> Result<Option<Channel>> {
    let (witness, residual) = best_degrading_map(first, second)?;
    Ok((residual <= tol).then_some(witness))
}

pub fn classify_component(
    channel_to_bob: &Channel,
    channel_to_eve: &Channel,
    tol: f64,
) -> Result<DegradationVerdict> {
    let (fwd, fwd_res) = best_degrading_map(channel_to_bob, channel_to_eve)?;
    let (rev, rev_res) = best_degrading_map(channel_to_eve, channel_to_bob)?;
    let forward = fwd_res <= tol;
    let reverse = rev_res <= tol;
    let order = match (forward, reverse) {
        (true, true) => DegradationOrder::Both,
        (true, false) => DegradationOrder::ForwardlyDegraded,
        (false, true) => DegradationOrder::ReverselyDegraded,
        (false, false) => DegradationOrder::Neither,
    };
    Ok(DegradationVerdict {
        order,
        forward_witness: forward.then_some(fwd),
        reverse_witness: reverse.then_some(rev),
        forward_residual: fwd_res,
        reverse_residual: rev_res,
        tolerance: tol,
    })
}

/// Same contract as [`classify_component`], applied to `p(sb|sa)` and `p(se|sa)`.
pub fn classify_source_leg(
    sb_given_sa: &Channel,
    se_given_sa: &Channel,
    tol: f64,
) -> Result<DegradationVerdict> {
    classify_component(sb_given_sa, se_given_sa, tol)
}

/// `p(sb|sa)` and `p(se|sa)` restricted to the support of `SA`.
pub fn source_leg_channels(source: &JointDistribution) -> Result<(Channel, Channel)> {
    let s = canonical_source(source)?;
    let support = s.support(SA)?;
    let sb = s.conditional(SA, &[SB])?.restrict_inputs(&support)?;
    let se = s.conditional(SA, &[SE])?.restrict_inputs(&support)?;
    Ok((sb, se))
}

/// Classifies the source leg of a joint source over `(SA,SB,SE)`.
pub fn classify_source(source: &JointDistribution, tol: f64) -> Result<DegradationVerdict> {
    let (sb, se) = source_leg_channels(source)?;
    classify_source_leg(&sb, &se, tol)
}
