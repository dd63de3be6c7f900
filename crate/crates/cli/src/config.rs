//! Run configuration: everything that affects numerics lives here, flags only
//! pick files.

use std::fs;
use std::path::{Path, PathBuf};

use lopfield::embed::{EmbeddingProvider, FileProvider, FusionConfig, SyntheticProvider};
use lopfield::field::{LossConfig, TrainConfig};
use lopfield::hashgrid::HashGridConfig;
use lopfield::planner::PlannerConfig;
use lopfield::query::{DEFAULT_TOP_K, DEFAULT_VS_WEIGHT};
use lopfield::scene::SceneConfig;
use lopfield::topomap::MapperConfig;
use lopfield::{Aabb, Error, Result};
use serde::{Deserialize, Serialize};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker cap; 0 lets the thread pool pick.
    pub threads: usize,
    pub scene: SceneConfig,
    pub provider: ProviderConfig,
    pub fusion: FusionConfig,
    pub hashgrid: GridSettings,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub eval: EvalConfig,
    pub query: QueryConfig,
    pub mapper: MapperConfig,
    pub planner: PlannerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub seed: u64,
    pub vision_dim: usize,
    pub semantic_dim: usize,
    /// Embedding table for `kind = "file"`.
    pub path: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Synthetic,
            seed: 1,
            vision_dim: SyntheticProvider::DEFAULT_DIM,
            semantic_dim: SyntheticProvider::DEFAULT_DIM,
            path: None,
        }
    }
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        match self.kind {
            ProviderKind::Synthetic => Ok(Box::new(SyntheticProvider::new(
                self.seed,
                self.vision_dim,
                self.semantic_dim,
            )?)),
            ProviderKind::File => {
                let path = self.path.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("provider.path is required for kind = \"file\"".into())
                })?;
                Ok(Box::new(FileProvider::load(path)?))
            }
        }
    }
}

/// Hash-grid settings; the bounds come from the scene at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub levels: usize,
    pub features_per_level: usize,
    pub log2_table_size: u32,
    pub base_resolution: u32,
    pub finest_resolution: u32,
}

impl Default for GridSettings {
    fn default() -> Self {
        let d = HashGridConfig::desk(Aabb::new([0.0; 3], [1.0; 3]));
        GridSettings {
            levels: d.levels,
            features_per_level: d.features_per_level,
            log2_table_size: d.log2_table_size,
            base_resolution: d.base_resolution,
            finest_resolution: d.finest_resolution,
        }
    }
}

impl GridSettings {
    pub fn with_bounds(&self, bounds: Aabb) -> HashGridConfig {
        HashGridConfig {
            levels: self.levels,
            features_per_level: self.features_per_level,
            log2_table_size: self.log2_table_size,
            base_resolution: self.base_resolution,
            finest_resolution: self.finest_resolution,
            bounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Fused points withheld from training for evaluation.
    pub holdout_points: usize,
    pub holdout_seed: u64,
    pub vs_weight: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            holdout_points: 1000,
            holdout_seed: 99,
            vs_weight: DEFAULT_VS_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryConfig {
    pub vs_weight: f64,
    pub top_k: usize,
    /// Sample spacing when no cloud is given to localize against.
    pub grid_step: f64,
    /// Cell size of the top-down score grid; 0 disables it.
    pub plot_cell: f64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            vs_weight: DEFAULT_VS_WEIGHT,
            top_k: DEFAULT_TOP_K,
            grid_step: 0.1,
            plot_cell: 0.25,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    Error::InvalidInput(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::parse(&text)?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.loss.validate()?;
        self.mapper.validate()?;
        self.planner.validate()?;
        for (name, w) in [
            ("eval.vs_weight", self.eval.vs_weight),
            ("query.vs_weight", self.query.vs_weight),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidConfig(format!("{name} {w} outside [0, 1]")));
            }
        }
        if self.query.grid_step.is_nan() || self.query.grid_step <= 0.0 || self.query.top_k == 0 {
            return Err(Error::InvalidConfig(
                "query.grid_step and query.top_k must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn write_resolved(&self, out: &Path) -> Result<()> {
        fs::create_dir_all(out)?;
        fs::write(out.join(RESOLVED_CONFIG), self.to_toml()?)?;
        Ok(())
    }
}
