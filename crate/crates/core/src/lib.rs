//! Secret-key / secret-message rate regions for correlated sources plus an
//! independent broadcast channel.
//!
//! The crate has four engines:
//!
//! * [`prob`] and [`coupling`]: exact information measures on dense joints and
//!   the auxiliary couplings the region is a union over;
//! * [`degradation`]: stochastic degradation verdicts by linear programming;
//! * [`region`] and [`gaussian`]: inner bounds by randomized search, the tight
//!   region for parallel degraded components, and the closed-form scalar
//!   Gaussian region;
//! * [`protocol`]: a desk-scale simulation of the separation protocol (secret
//!   and public bit pipes, key agreement by binning, one-time padding).
//!
//! ```
//! use secrecy_region::generators::{blind_kernel, broadcast, noiseless_kernel, no_source};
//! use secrecy_region::region::{inner_bound_region, SearchConfig};
//!
//! let channel = broadcast(&noiseless_kernel(2), &blind_kernel(2)).unwrap();
//! let region = inner_bound_region(&no_source(), &channel, &SearchConfig::quick(1)).unwrap();
//! assert!(region.margin((1.0, 0.0)) > -1e-3);
//! assert!(region.margin((0.0, 1.0)) > -1e-3);
//! ```

pub mod coupling;
pub mod degradation;
pub mod error;
pub mod gaussian;
pub mod generators;
pub mod prob;
pub mod protocol;
pub mod region;

pub use coupling::{assemble_coupling, AuxiliaryCoupling, CouplingKernels, CouplingTerms};
pub use error::{Error, Result};
pub use prob::{Bits, Channel, JointDistribution, Variable};
pub use region::{RegionPolygon, SearchConfig};

/// The guide under `book/`, compiled so its snippets run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/probability.md")]
    pub mod probability {}
    #[doc = include_str!("../../../book/src/degradation.md")]
    pub mod degradation {}
    #[doc = include_str!("../../../book/src/regions.md")]
    pub mod regions {}
    #[doc = include_str!("../../../book/src/gaussian.md")]
    pub mod gaussian {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    pub mod protocol {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
