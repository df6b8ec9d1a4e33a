//! Scenario files: one JSON document describing the source, the channel, an
//! optional parallel split and the engine settings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use secrecy_region::coupling::{assemble_coupling, SA, SB, SE, U1, V1, V2, X, Y, Z};
use secrecy_region::generators::{
    blind_kernel, broadcast, degraded_broadcast, doubly_symmetric_binary_source,
    erasure_kernel, no_source, noiseless_kernel, product_broadcast, source_chain_bob_first,
    source_chain_eve_first, source_from_views, symmetric_kernel,
};
use secrecy_region::protocol::SimulationConfig;
use secrecy_region::{AuxiliaryCoupling, Channel, Error, JointDistribution, Result, SearchConfig};

/// A single-input single-output kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Bsc { crossover: f64 },
    Symmetric { size: usize, crossover: f64 },
    Erasure { erasure: f64 },
    Noiseless { size: usize },
    Blind { size: usize },
    Matrix { rows: Vec<Vec<f64>> },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Channel> {
        match self {
            KernelSpec::Bsc { crossover } => symmetric_kernel(2, *crossover),
            KernelSpec::Symmetric { size, crossover } => symmetric_kernel(*size, *crossover),
            KernelSpec::Erasure { erasure } => {
                if !(0.0..=1.0).contains(erasure) {
                    return Err(Error::InvalidArgument(format!(
                        "erasure probability {erasure} outside [0,1]"
                    )));
                }
                Ok(erasure_kernel(*erasure))
            }
            KernelSpec::Noiseless { size } => {
                check_size(*size)?;
                Ok(noiseless_kernel(*size))
            }
            KernelSpec::Blind { size } => {
                check_size(*size)?;
                Ok(blind_kernel(*size))
            }
            KernelSpec::Matrix { rows } => matrix_kernel("in", "out", rows),
        }
    }
}

fn check_size(size: usize) -> Result<()> {
    if size == 0 {
        return Err(Error::InvalidArgument("alphabet size must be at least 1".into()));
    }
    Ok(())
}

fn matrix_kernel(input: &str, output: &str, rows: &[Vec<f64>]) -> Result<Channel> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument(format!(
            "kernel `{input} -> {output}` needs equal-length nonempty rows"
        )));
    }
    Channel::new((input, rows.len()), vec![(output, cols)], rows.to_vec())
}

/// Broadcast channel `X -> (Y, Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Bob and Eve see `X` through independent kernels.
    Broadcast { bob: KernelSpec, eve: KernelSpec },
    /// Eve sees Bob's output through a further kernel.
    Degraded { bob: KernelSpec, eve_given_bob: KernelSpec },
    /// Two independent channels used side by side.
    Product { first: Box<ChannelSpec>, second: Box<ChannelSpec> },
    /// Rows over `x`, columns over `(y, z)` with `z` fastest.
    Matrix { y: usize, z: usize, rows: Vec<Vec<f64>> },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<Channel> {
        match self {
            ChannelSpec::Broadcast { bob, eve } => broadcast(&bob.build()?, &eve.build()?),
            ChannelSpec::Degraded { bob, eve_given_bob } => {
                degraded_broadcast(&bob.build()?, &eve_given_bob.build()?)
            }
            ChannelSpec::Product { first, second } => product_broadcast(&first.build()?, &second.build()?),
            ChannelSpec::Matrix { y, z, rows } => {
                let cols = y * z;
                if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidArgument(format!(
                        "channel matrix rows must have y * z = {cols} entries"
                    )));
                }
                Channel::new((X, rows.len()), vec![(Y, *y), (Z, *z)], rows.clone())
            }
        }
    }
}

/// Joint law of `(SA, SB, SE)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    None,
    /// Uniform bit with Bob and Eve behind independent BSCs.
    #[serde(alias = "doubly-symmetric-binary-source")]
    BinarySymmetricSource { crossover_bob: f64, crossover_eve: f64 },
    /// Conditionally independent views of `SA`.
    Views { sa_law: Vec<f64>, bob: KernelSpec, eve: KernelSpec },
    /// `SA - SB - SE`.
    ChainBobFirst { sa_law: Vec<f64>, bob: KernelSpec, eve_given_bob: KernelSpec },
    /// `SA - SE - SB`.
    ChainEveFirst { sa_law: Vec<f64>, eve: KernelSpec, bob_given_eve: KernelSpec },
    /// Dense tensor over `(SA, SB, SE)` with `SE` fastest.
    Joint { sizes: [usize; 3], probabilities: Vec<f64> },
}

impl SourceSpec {
    pub fn build(&self) -> Result<JointDistribution> {
        match self {
            SourceSpec::None => Ok(no_source()),
            SourceSpec::BinarySymmetricSource { crossover_bob, crossover_eve } => {
                for e in [crossover_bob, crossover_eve] {
                    if !(0.0..=1.0).contains(e) {
                        return Err(Error::InvalidArgument(format!("crossover {e} outside [0,1]")));
                    }
                }
                doubly_symmetric_binary_source(*crossover_bob, *crossover_eve)
            }
            SourceSpec::Views { sa_law, bob, eve } => source_from_views(sa_law, &bob.build()?, &eve.build()?),
            SourceSpec::ChainBobFirst { sa_law, bob, eve_given_bob } => {
                source_chain_bob_first(sa_law, &bob.build()?, &eve_given_bob.build()?)
            }
            SourceSpec::ChainEveFirst { sa_law, eve, bob_given_eve } => {
                source_chain_eve_first(sa_law, &eve.build()?, &bob_given_eve.build()?)
            }
            SourceSpec::Joint { sizes, probabilities } => JointDistribution::new(
                vec![(SA, sizes[0]), (SB, sizes[1]), (SE, sizes[2])],
                probabilities.clone(),
            ),
        }
    }
}

/// Components of a parallel scenario, each forwardly or reversely degraded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParallelSpec {
    pub forward_channel: Option<ChannelSpec>,
    pub reverse_channel: Option<ChannelSpec>,
    pub forward_source: Option<SourceSpec>,
    pub reverse_source: Option<SourceSpec>,
}

/// Hand-set auxiliaries for the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub u1_given_sa: Vec<Vec<f64>>,
    pub v2_law: Vec<f64>,
    pub v1_given_v2: Vec<Vec<f64>>,
    pub x_given_v1: Vec<Vec<f64>>,
}

impl CouplingSpec {
    pub fn build(&self, source: &JointDistribution, channel: &Channel) -> Result<AuxiliaryCoupling> {
        assemble_coupling(
            source,
            channel,
            &matrix_kernel(SA, U1, &self.u1_given_sa)?,
            &self.v2_law,
            &matrix_kernel(V2, V1, &self.v1_given_v2)?,
            &matrix_kernel(V1, X, &self.x_given_v1)?,
        )
    }
}

/// Upper limits on the simulation report; a violation exits with code 3.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub message_error: Option<f64>,
    pub key_error: Option<f64>,
    pub pipe_error: Option<f64>,
    pub key_uniformity_deficit: Option<f64>,
    pub leakage_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    /// `(R_SK, R_SM)` in bits per use.
    pub target: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSpec>,
    #[serde(default)]
    pub config: SimulationConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "no_source_spec")]
    pub source: SourceSpec,
    /// May be omitted when `parallel` describes the components instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel: Option<ParallelSpec>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
}

fn no_source_spec() -> SourceSpec {
    SourceSpec::None
}

/// The scenario's objects, built and checked.
#[derive(Debug, Clone)]
pub struct Built {
    pub source: JointDistribution,
    pub channel: Option<Channel>,
    pub parallel: Option<BuiltParallel>,
}

impl Built {
    pub fn channel(&self) -> Result<&Channel> {
        self.channel
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("scenario declares no `channel`".into()))
    }
}

#[derive(Debug, Clone)]
pub struct BuiltParallel {
    pub forward_channel: Option<Channel>,
    pub reverse_channel: Option<Channel>,
    pub forward_source: Option<JointDistribution>,
    pub reverse_source: Option<JointDistribution>,
}

impl Scenario {
    pub fn parse(text: &str) -> std::result::Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> std::result::Result<Scenario, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Builds every object and validates the configs.
    pub fn build(&self) -> Result<Built> {
        self.search.validate()?;
        if let Some(sim) = &self.simulation {
            sim.config.validate()?;
            let (k, m) = sim.target;
            if !(k >= 0.0 && m >= 0.0 && k.is_finite() && m.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "target ({k}, {m}) must be finite and nonnegative"
                )));
            }
        }
        let parallel = match &self.parallel {
            None => None,
            Some(p) => Some(BuiltParallel {
                forward_channel: p.forward_channel.as_ref().map(ChannelSpec::build).transpose()?,
                reverse_channel: p.reverse_channel.as_ref().map(ChannelSpec::build).transpose()?,
                forward_source: p.forward_source.as_ref().map(SourceSpec::build).transpose()?,
                reverse_source: p.reverse_source.as_ref().map(SourceSpec::build).transpose()?,
            }),
        };
        Ok(Built {
            source: self.source.build()?,
            channel: self.channel.as_ref().map(ChannelSpec::build).transpose()?,
            parallel,
        })
    }
}
