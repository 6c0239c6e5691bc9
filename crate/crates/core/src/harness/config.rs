use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{select_nodes, CsrMatrix, NodeSelection, Normalization};
use crate::nn::{FilterSpec, LayerSpec, ModelSpec, Nonlinearity, Readout};

/// One experiment: data source, network, optimizer settings, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskConfig {
    SbmSourceLocalization(SourceLocalizationConfig),
    EdgeListClassification(EdgeListConfig),
    RatingsRegression(RatingsConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceLocalizationConfig {
    pub nodes: usize,
    pub communities: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    /// Diffusion times are drawn from `0..=max_diffusion`.
    pub max_diffusion: usize,
}

impl Default for SourceLocalizationConfig {
    fn default() -> Self {
        Self {
            nodes: 50,
            communities: 5,
            p_intra: 0.8,
            p_inter: 0.2,
            train: 10240,
            val: 2560,
            test: 2560,
            max_diffusion: 50,
        }
    }
}

fn default_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeListConfig {
    pub edges: PathBuf,
    pub signals: PathBuf,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "default_fraction")]
    pub val_fraction: f64,
    #[serde(default = "default_fraction")]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingsConfig {
    /// CSV with one row per node and one column per signal; `0` is missing.
    pub ratings: PathBuf,
    /// Row (in the file) whose ratings are predicted.
    pub target: usize,
    /// Keep this many rows with the most ratings; the target is always kept.
    #[serde(default = "default_rating_nodes")]
    pub nodes: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_fraction")]
    pub val_fraction: f64,
    #[serde(default = "default_fraction")]
    pub test_fraction: f64,
}

fn default_rating_nodes() -> usize {
    200
}
fn default_top_k() -> usize {
    40
}
fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Polynomial,
    EdgeVarying,
    BlockVarying,
    Hybrid,
    Arma,
    Gat,
    Gcat,
    EdgeVaryingGat,
    HybridGcat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutKind {
    #[default]
    Flatten,
    MeanPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub family: Family,
    /// Filter order `K`; for ARMA, the order of the direct term.
    #[serde(default = "one")]
    pub order: usize,
    /// ARMA poles `P`.
    #[serde(default = "one")]
    pub poles: usize,
    /// ARMA Jacobi iterations `K_J`.
    #[serde(default = "one")]
    pub jacobi_order: usize,
    /// `|I|`; block filters use `|I| + 1` blocks.
    #[serde(default = "default_important")]
    pub important_nodes: usize,
    #[serde(default)]
    pub node_selection: NodeSelection,
    #[serde(default = "default_centrality_order")]
    pub centrality_order: usize,
    /// Attention heads; only single-head attention is implemented.
    #[serde(default = "one")]
    pub heads: usize,
    #[serde(default)]
    pub tied: bool,
    #[serde(default)]
    pub weighted_softmax: bool,
    #[serde(default)]
    pub identity_phi0: bool,
    #[serde(default = "default_features")]
    pub features: usize,
    #[serde(default = "one")]
    pub layers: usize,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub readout: ReadoutKind,
}

fn one() -> usize {
    1
}
fn default_important() -> usize {
    5
}
fn default_centrality_order() -> usize {
    3
}
fn default_features() -> usize {
    16
}

impl ArchitectureConfig {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            order: 1,
            poles: 1,
            jacobi_order: 1,
            important_nodes: default_important(),
            node_selection: NodeSelection::default(),
            centrality_order: default_centrality_order(),
            heads: 1,
            tied: false,
            weighted_softmax: false,
            identity_phi0: false,
            features: default_features(),
            layers: 1,
            nonlinearity: Nonlinearity::Relu,
            readout: ReadoutKind::Flatten,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.layers == 0 || self.poles == 0 {
            return Err(Error::Config(
                "features, layers, and poles must be positive".into(),
            ));
        }
        if self.heads != 1 {
            return Err(Error::Config(format!(
                "{} attention heads requested; only single-head attention is supported",
                self.heads
            )));
        }
        Ok(())
    }

    fn filter(&self, shift: &CsrMatrix) -> Result<FilterSpec> {
        let k = self.order;
        let important = || {
            select_nodes(
                shift,
                self.node_selection,
                self.important_nodes,
                self.centrality_order,
            )
        };
        Ok(match self.family {
            Family::Polynomial => FilterSpec::Polynomial { order: k },
            Family::EdgeVarying => FilterSpec::EdgeVarying { order: k },
            Family::BlockVarying => {
                // One singleton block per important node, one shared block for the rest.
                let chosen = important()?;
                let mut block_of_node = vec![chosen.len(); shift.n_rows()];
                for (b, &i) in chosen.iter().enumerate() {
                    block_of_node[i] = b;
                }
                FilterSpec::BlockVarying {
                    order: k,
                    block_of_node,
                }
            }
            Family::Hybrid => FilterSpec::Hybrid {
                order: k,
                important: important()?,
            },
            Family::Arma => FilterSpec::ArmaJacobi {
                poles: self.poles,
                jacobi_order: self.jacobi_order,
                direct_order: k,
            },
            Family::Gat => FilterSpec::Gat {
                tied: self.tied,
                weighted_softmax: self.weighted_softmax,
            },
            Family::Gcat => FilterSpec::Gcat {
                order: k,
                tied: self.tied,
                weighted_softmax: self.weighted_softmax,
            },
            Family::EdgeVaryingGat => FilterSpec::EdgeVaryingGat {
                order: k,
                tied: self.tied,
                weighted_softmax: self.weighted_softmax,
                identity_phi0: self.identity_phi0,
            },
            Family::HybridGcat => FilterSpec::HybridGcat {
                order: k,
                tied: self.tied,
                weighted_softmax: self.weighted_softmax,
            },
        })
    }

    /// Model description for a graph with shift `shift`, `input_features`
    /// signal features, and the given readout.
    pub fn model_spec(
        &self,
        shift: &CsrMatrix,
        input_features: usize,
        readout: Readout,
    ) -> Result<ModelSpec> {
        self.validate()?;
        let filter = self.filter(shift)?;
        let layers = (0..self.layers)
            .map(|_| LayerSpec {
                filter: filter.clone(),
                features: self.features,
                nonlinearity: self.nonlinearity,
            })
            .collect();
        Ok(ModelSpec {
            input_features,
            layers,
            readout,
        })
    }

    pub fn classification_readout(&self, classes: usize) -> Readout {
        match self.readout {
            ReadoutKind::Flatten => Readout::Flatten { classes },
            ReadoutKind::MeanPool => Readout::MeanPool { classes },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fill the `seconds` metrics column with wall time. Off by default so
    /// that metrics files are byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 100,
            learning_rate: 1e-3,
            record_wall_time: false,
        }
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        let t = &self.training;
        if t.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        match &self.task {
            TaskConfig::SbmSourceLocalization(s) => {
                check_fraction("p_intra", s.p_intra)?;
                check_fraction("p_inter", s.p_inter)?;
                if s.nodes == 0 || s.communities == 0 || s.communities > s.nodes {
                    return Err(Error::Config(
                        "need at least one node per community".into(),
                    ));
                }
                if s.train == 0 {
                    return Err(Error::Config("train size must be positive".into()));
                }
            }
            TaskConfig::EdgeListClassification(e) => {
                check_fraction("val_fraction", e.val_fraction)?;
                check_fraction("test_fraction", e.test_fraction)?;
                check_fraction("val_fraction + test_fraction", e.val_fraction + e.test_fraction)?;
            }
            TaskConfig::RatingsRegression(r) => {
                check_fraction("val_fraction", r.val_fraction)?;
                check_fraction("test_fraction", r.test_fraction)?;
                check_fraction("val_fraction + test_fraction", r.val_fraction + r.test_fraction)?;
                if r.nodes == 0 || r.top_k == 0 || r.delta <= 0.0 {
                    return Err(Error::Config(
                        "nodes, top_k, and delta must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
