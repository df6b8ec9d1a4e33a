//! Built-in channels and sources.

use crate::coupling::{SA, SB, SE, X, Y, Z};
use crate::error::{Error, Result};
use crate::prob::{Channel, JointDistribution};

/// Binary symmetric kernel with crossover `eps`.
pub fn bsc_kernel(eps: f64) -> Channel {
    symmetric_kernel(2, eps).expect("binary symmetric kernel")
}

/// `q`-ary symmetric kernel: correct with probability `1 - eps`, otherwise uniform over the other symbols.
pub fn symmetric_kernel(q: usize, eps: f64) -> Result<Channel> {
    if q < 2 || !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "symmetric kernel needs q >= 2 and eps in [0,1], got q={q}, eps={eps}"
        )));
    }
    let off = eps / (q - 1) as f64;
    let rows = (0..q)
        .map(|i| (0..q).map(|j| if i == j { 1.0 - eps } else { off }).collect())
        .collect();
    Channel::new(("in", q), vec![("out", q)], rows)
}

/// Binary erasure kernel; output symbol 2 is the erasure.
pub fn erasure_kernel(e: f64) -> Channel {
    Channel::new(
        ("in", 2),
        vec![("out", 3)],
        vec![vec![1.0 - e, 0.0, e], vec![0.0, 1.0 - e, e]],
    )
    .expect("erasure probability in [0,1]")
}

pub fn noiseless_kernel(size: usize) -> Channel {
    Channel::identity("in", "out", size).expect("identity kernel")
}

/// Output carries no information about the input.
pub fn blind_kernel(input_size: usize) -> Channel {
    Channel::constant("in", input_size, "out", 1, 0).expect("constant kernel")
}

/// Broadcast channel `X -> (Y,Z)` with outputs conditionally independent given `X`.
pub fn broadcast(bob: &Channel, eve: &Channel) -> Result<Channel> {
    if bob.input_size() != eve.input_size() {
        return Err(Error::InvalidArgument(format!(
            "Bob's channel has {} inputs, Eve's has {}",
            bob.input_size(),
            eve.input_size()
        )));
    }
    let (ny, nz) = (bob.output_cells(), eve.output_cells());
    let mut m = Vec::with_capacity(bob.input_size() * ny * nz);
    for x in 0..bob.input_size() {
        for &py in bob.row(x) {
            m.extend(eve.row(x).iter().map(|&pz| py * pz));
        }
    }
    Channel::from_flat((X, bob.input_size()), vec![(Y, ny), (Z, nz)], m)
}

/// Eve sees a degraded copy of Bob's output: `Z = eve_given_bob(Y)`.
pub fn degraded_broadcast(bob: &Channel, eve_given_bob: &Channel) -> Result<Channel> {
    let (ny, nz) = (bob.output_cells(), eve_given_bob.output_cells());
    if eve_given_bob.input_size() != ny {
        return Err(Error::Composition("degrading kernel does not match Bob's output".into()));
    }
    let mut m = Vec::with_capacity(bob.input_size() * ny * nz);
    for x in 0..bob.input_size() {
        for (y, &py) in bob.row(x).iter().enumerate() {
            m.extend(eve_given_bob.row(y).iter().map(|&q| py * q));
        }
    }
    Channel::from_flat((X, bob.input_size()), vec![(Y, ny), (Z, nz)], m)
}

/// Two broadcast channels used side by side. Input, Bob and Eve indices are
/// `first * |second| + second`.
pub fn product_broadcast(first: &Channel, second: &Channel) -> Result<Channel> {
    let a = crate::coupling::canonical_channel(first)?;
    let b = crate::coupling::canonical_channel(second)?;
    let (ny1, nz1) = (a.outputs()[0].size, a.outputs()[1].size);
    let (ny2, nz2) = (b.outputs()[0].size, b.outputs()[1].size);
    let (ny, nz) = (ny1 * ny2, nz1 * nz2);
    let mut m = Vec::with_capacity(a.input_size() * b.input_size() * ny * nz);
    for x1 in 0..a.input_size() {
        for x2 in 0..b.input_size() {
            let mut row = vec![0.0; ny * nz];
            for (o1, &p) in a.row(x1).iter().enumerate() {
                let (y1, z1) = (o1 / nz1, o1 % nz1);
                for (o2, &q) in b.row(x2).iter().enumerate() {
                    let (y2, z2) = (o2 / nz2, o2 % nz2);
                    row[(y1 * ny2 + y2) * nz + z1 * nz2 + z2] += p * q;
                }
            }
            m.extend(row);
        }
    }
    Channel::from_flat((X, a.input_size() * b.input_size()), vec![(Y, ny), (Z, nz)], m)
}

/// `(SA,SB,SE)` with `SB` and `SE` conditionally independent views of `SA`.
pub fn source_from_views(
    sa_law: &[f64],
    sb_given_sa: &Channel,
    se_given_sa: &Channel,
) -> Result<JointDistribution> {
    let n = sa_law.len();
    if sb_given_sa.input_size() != n || se_given_sa.input_size() != n {
        return Err(Error::Composition("source views must take SA as input".into()));
    }
    let (nb, ne) = (sb_given_sa.output_cells(), se_given_sa.output_cells());
    let mut p = Vec::with_capacity(n * nb * ne);
    for (a, &pa) in sa_law.iter().enumerate() {
        for &pb in sb_given_sa.row(a) {
            p.extend(se_given_sa.row(a).iter().map(|&pe| pa * pb * pe));
        }
    }
    JointDistribution::new(vec![(SA, n), (SB, nb), (SE, ne)], p)
}

/// `SA - SB - SE`: Eve's view is a degraded copy of Bob's.
pub fn source_chain_bob_first(
    sa_law: &[f64],
    sb_given_sa: &Channel,
    se_given_sb: &Channel,
) -> Result<JointDistribution> {
    let n = sa_law.len();
    let nb = sb_given_sa.output_cells();
    let ne = se_given_sb.output_cells();
    if sb_given_sa.input_size() != n || se_given_sb.input_size() != nb {
        return Err(Error::Composition("source chain alphabets do not match".into()));
    }
    let mut p = Vec::with_capacity(n * nb * ne);
    for (a, &pa) in sa_law.iter().enumerate() {
        for (b, &pb) in sb_given_sa.row(a).iter().enumerate() {
            p.extend(se_given_sb.row(b).iter().map(|&pe| pa * pb * pe));
        }
    }
    JointDistribution::new(vec![(SA, n), (SB, nb), (SE, ne)], p)
}

/// `SA - SE - SB`: Bob's view is a degraded copy of Eve's.
pub fn source_chain_eve_first(
    sa_law: &[f64],
    se_given_sa: &Channel,
    sb_given_se: &Channel,
) -> Result<JointDistribution> {
    let chain = source_chain_bob_first(sa_law, se_given_sa, sb_given_se)?;
    // chain is over (SA, SB=Eve's view, SE=Bob's view); swap the roles
    let swapped = chain.renamed(&[(SB, "tmp"), (SE, SB)])?.renamed(&[("tmp", SE)])?;
    swapped.marginal(&[SA, SB, SE])
}

/// Uniform bit at Alice; Bob and Eve see it through independent BSCs.
pub fn doubly_symmetric_binary_source(eps_bob: f64, eps_eve: f64) -> Result<JointDistribution> {
    source_from_views(&[0.5, 0.5], &bsc_kernel(eps_bob), &bsc_kernel(eps_eve))
}

/// Trivial source (all alphabets of size one).
pub fn no_source() -> JointDistribution {
    JointDistribution::new(vec![(SA, 1), (SB, 1), (SE, 1)], vec![1.0]).expect("point mass")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eve_first_chain_is_markov() {
        let s = source_chain_eve_first(&[0.5, 0.5], &bsc_kernel(0.1), &bsc_kernel(0.2)).unwrap();
        assert!(s.conditional_mutual_information(&[SA], &[SB], &[SE]).unwrap().0 < 1e-12);
        let sb = s.conditional(SA, &[SB]).unwrap();
        // 0.1 * 0.8 + 0.9 * 0.2
        assert_abs_diff_eq!(sb.entry(0, 1), 0.26, epsilon = 1e-12);
    }

    #[test]
    fn broadcast_marginals() {
        let ch = broadcast(&bsc_kernel(0.1), &erasure_kernel(0.3)).unwrap();
        let z = ch.output_marginal(&[Z]).unwrap();
        assert_abs_diff_eq!(z.entry(1, 2), 0.3, epsilon = 1e-12);
        assert!(broadcast(&bsc_kernel(0.1), &blind_kernel(3)).is_err());
    }

    #[test]
    fn product_keeps_components_independent() {
        let a = broadcast(&bsc_kernel(0.1), &bsc_kernel(0.2)).unwrap();
        let b = broadcast(&noiseless_kernel(2), &blind_kernel(2)).unwrap();
        let p = product_broadcast(&a, &b).unwrap();
        let joint = JointDistribution::from_channel(&[0.25; 4], &p).unwrap();
        // I(X;Y) = (1 - h2(0.1)) + 1
        let expected = 2.0 - crate::prob::binary_entropy(0.1);
        assert_abs_diff_eq!(joint.mutual_information(&[X], &[Y]).unwrap().0, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(
            joint.mutual_information(&[X], &[Z]).unwrap().0,
            1.0 - crate::prob::binary_entropy(0.2),
            epsilon = 1e-12
        );
    }
}
