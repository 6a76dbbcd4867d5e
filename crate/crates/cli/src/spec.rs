//! TOML spec files.
//!
//! A spec names the channel, optional subalgebra decomposition, measurement
//! configurations, optimizer settings, experiment and sweep parameters. Each
//! command reads only the sections it needs and rejects a spec that lacks
//! them before doing any work.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use pauli_channel_est::basis::{BlockKind, SubalgebraDecomposition};
use pauli_channel_est::channel::QubitPauliChannel;
use pauli_channel_est::estimator::BlochTriple;
use pauli_channel_est::optimizer::OptimizerSettings;
use pauli_channel_est::simulator::{cone_triple, seeded_measurement_triple, ExperimentSpec};
use pauli_channel_est::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default)]
    pub seed: u64,
    pub channel: Option<ChannelSection>,
    pub decomposition: Option<DecompositionSection>,
    #[serde(default)]
    pub configurations: Vec<ConfigurationEntry>,
    pub optimizer: Option<OptimizerSection>,
    pub experiment: Option<ExperimentSection>,
    pub sweep: Option<SweepSection>,
    pub estimate: Option<EstimateSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub angles: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockEntry {
    /// Basis indices, 0-based, identity excluded.
    pub indices: Vec<usize>,
    pub kind: Option<String>,
}

/// Either a preset name, an inline block list, or a file holding one of
/// those (resolved relative to the spec file on load).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSection {
    pub preset: Option<String>,
    pub dim: Option<usize>,
    pub blocks: Option<Vec<BlockEntry>>,
    pub file: Option<String>,
}

impl DecompositionSection {
    pub fn build(&self) -> Result<SubalgebraDecomposition> {
        match (&self.preset, self.dim, &self.blocks, &self.file) {
            (Some(name), None, None, None) => SubalgebraDecomposition::preset(name),
            (None, Some(dim), Some(blocks), None) => {
                let kinds = blocks
                    .iter()
                    .map(|b| b.kind.as_deref().map(BlockKind::parse).transpose())
                    .collect::<Result<Vec<_>>>()?;
                let indices = blocks.iter().map(|b| b.indices.clone()).collect();
                SubalgebraDecomposition::new(dim, indices, kinds)
            }
            (.., Some(_)) => Err(Error::Spec("decomposition file was not resolved".into())),
            _ => Err(Error::Spec(
                "decomposition needs either `preset` or both `dim` and `blocks`".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ConfigurationEntry {
    /// Qubit input Bloch vector and effect Bloch vector.
    Qubit { theta: [f64; 3], m: [f64; 3] },
    /// Full coefficient vectors in the decomposition's basis.
    Coefficients { state: Vec<f64>, effect: Vec<f64> },
    /// The optimal configuration for a block (0-based).
    OptimalBlock { optimal_block: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub grid_points_per_axis: Option<usize>,
    pub max_iterations: Option<usize>,
    pub step_size: Option<f64>,
    pub tolerance: Option<f64>,
    pub agreement_tolerance: Option<f64>,
    pub random_starts: Option<usize>,
    /// Write every start's endpoint as its own table.
    #[serde(default)]
    pub report_starts: bool,
}

/// A triple of Bloch vectors: `"identity"`, `"haar"` (drawn from the spec
/// seed), `"cone:DEG"` (unit vectors at pairwise angle DEG), or explicit
/// columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TripleSpec {
    Named(String),
    Columns([[f64; 3]; 3]),
}

impl TripleSpec {
    pub fn resolve(&self, seed: u64) -> Result<BlochTriple> {
        match self {
            TripleSpec::Columns(cols) => {
                BlochTriple::from_vectors(cols.map(Vector3::from))
            }
            TripleSpec::Named(name) => match name.as_str() {
                "identity" => Ok(BlochTriple::identity()),
                "haar" => Ok(seeded_measurement_triple(seed)),
                other => {
                    let deg = other
                        .strip_prefix("cone:")
                        .and_then(|d| d.trim().parse::<f64>().ok())
                        .ok_or_else(|| Error::Spec(format!("unknown triple `{other}`")))?;
                    BlochTriple::new(cone_triple(deg.to_radians()))
                }
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub inputs: TripleSpec,
    pub measurements: TripleSpec,
    pub shots: u64,
    pub repetitions: usize,
    #[serde(default)]
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSection {
    Orthogonality { angles_deg: Vec<f64> },
    Scaling { shots: Vec<u64>, weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub inputs: Option<TripleSpec>,
    pub measurements: Option<TripleSpec>,
    /// `frequencies[i][j]`: measurement `i` on input `j`.
    pub frequencies: Option<[[f64; 3]; 3]>,
    /// Shots per cell; omitted for exact probabilities.
    pub shots: Option<u64>,
    /// One frequency per configuration for the known-direction solver.
    pub known_frequencies: Option<Vec<f64>>,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    /// Reads a spec and inlines any referenced decomposition file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
        let mut spec = Self::parse(&text)?;
        if let Some(file) = spec.decomposition.as_ref().and_then(|d| d.file.clone()) {
            let base = path.parent().unwrap_or(Path::new("."));
            let dpath = base.join(&file);
            let dtext = fs::read_to_string(&dpath)
                .map_err(|e| Error::Spec(format!("cannot read {}: {e}", dpath.display())))?;
            let inner: DecompositionSection =
                toml::from_str(&dtext).map_err(|e| Error::Spec(format!("{}: {e}", dpath.display())))?;
            if inner.file.is_some() {
                return Err(Error::Spec("decomposition files cannot be nested".into()));
            }
            spec.decomposition = Some(inner);
        }
        Ok(spec)
    }

    /// First 16 hex digits of the SHA-256 of the spec's canonical JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn channel(&self) -> Result<&ChannelSection> {
        self.channel
            .as_ref()
            .ok_or_else(|| Error::Spec("missing [channel] section".into()))
    }

    pub fn qubit_channel(&self) -> Result<QubitPauliChannel> {
        let ch = self.channel()?;
        let lambdas: [f64; 3] = ch.lambdas.as_slice().try_into().map_err(|_| {
            Error::Spec(format!("a qubit channel needs 3 lambdas, found {}", ch.lambdas.len()))
        })?;
        Ok(QubitPauliChannel::new(lambdas, ch.angles))
    }

    /// Qubit contractions for commands that assume known, aligned axes.
    pub fn aligned_lambdas(&self) -> Result<[f64; 3]> {
        let ch = self.qubit_channel()?;
        if ch.angles.iter().any(|a| *a != 0.0) {
            return Err(Error::Spec(
                "this command works in the channel's own axes; set angles to 0".into(),
            ));
        }
        Ok(ch.lambdas)
    }

    pub fn decomposition(&self) -> Result<Option<SubalgebraDecomposition>> {
        self.decomposition.as_ref().map(|d| d.build()).transpose()
    }

    pub fn optimizer_settings(&self) -> Result<OptimizerSettings> {
        let mut s = OptimizerSettings {
            seed: self.seed,
            ..OptimizerSettings::default()
        };
        if let Some(o) = &self.optimizer {
            s.grid_points_per_axis = o.grid_points_per_axis.unwrap_or(s.grid_points_per_axis);
            s.max_iterations = o.max_iterations.unwrap_or(s.max_iterations);
            s.step_size = o.step_size.unwrap_or(s.step_size);
            s.tolerance = o.tolerance.unwrap_or(s.tolerance);
            s.agreement_tolerance = o.agreement_tolerance.unwrap_or(s.agreement_tolerance);
            s.random_starts = o.random_starts.unwrap_or(s.random_starts);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn experiment(&self) -> Result<ExperimentSpec> {
        let e = self
            .experiment
            .as_ref()
            .ok_or_else(|| Error::Spec("missing [experiment] section".into()))?;
        let spec = ExperimentSpec {
            truth: self.qubit_channel()?,
            inputs: e.inputs.resolve(self.seed)?,
            measurements: e.measurements.resolve(self.seed)?,
            shots: e.shots,
            repetitions: e.repetitions,
            weight: e.weight,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sweep(&self) -> Result<&SweepSection> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::Spec("missing [sweep] section".into()))
    }

    pub fn estimate(&self) -> Result<&EstimateSection> {
        self.estimate
            .as_ref()
            .ok_or_else(|| Error::Spec("missing [estimate] section".into()))
    }
}

pub fn frequency_matrix(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}
