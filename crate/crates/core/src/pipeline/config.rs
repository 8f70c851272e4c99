//! Run configuration, stored as one JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cartoon_segmentation::CartoonSegParams;
use crate::clustering::{KMeansParams, MboClusterParams, Metric};
use crate::decomposition::DecompositionParams;
use crate::error::{Error, Result};
use crate::spectral_partition::DetectionParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    #[default]
    Kmeans,
    /// k-means followed by graph MBO seeded from its labels.
    Mbo,
}

impl std::str::FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Self::Kmeans),
            "mbo" => Ok(Self::Mbo),
            other => Err(Error::param(format!("unknown clustering method '{other}'"))),
        }
    }
}

/// Which stages a run performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Full,
    Decompose,
    Cartoon,
    Texture,
}

impl std::str::FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "decompose" => Ok(Self::Decompose),
            "cartoon" => Ok(Self::Cartoon),
            "texture" => Ok(Self::Texture),
            other => Err(Error::param(format!("unknown run mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub method: ClusterMethod,
    pub k: usize,
    pub replications: usize,
    pub kmeans_max_iter: usize,
    pub mbo: MboClusterParams,
    /// Append the approximation subband as an extra feature column.
    pub include_approx: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            method: ClusterMethod::Kmeans,
            k: 2,
            replications: 10,
            kmeans_max_iter: 100,
            mbo: MboClusterParams::default(),
            include_approx: false,
        }
    }
}

impl ClusteringConfig {
    pub fn kmeans_params(&self, seed: u64) -> KMeansParams {
        KMeansParams {
            k: self.k,
            metric: Metric::Cityblock,
            replications: self.replications,
            max_iter: self.kmeans_max_iter,
            seed,
        }
    }

    pub fn mbo_params(&self, seed: u64) -> MboClusterParams {
        MboClusterParams {
            seed,
            ..self.mbo.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem; the input's stem when unset.
    pub stem: Option<String>,
    pub dump_subbands: bool,
    pub export_features: bool,
    pub colorized: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            stem: None,
            dump_subbands: false,
            export_features: false,
            colorized: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub mode: RunMode,
    /// Segment the cartoon and texture parts. When off, both segmentations
    /// work on the input itself.
    pub decompose: bool,
    pub decomposition: DecompositionParams,
    pub cartoon: CartoonSegParams,
    pub detection: DetectionParams,
    pub clustering: ClusteringConfig,
    pub output: OutputConfig,
    /// Drop partition boundaries the grid cannot resolve instead of failing.
    pub fit_partition: bool,
    /// Base seed of every random stage.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            mode: RunMode::Full,
            decompose: true,
            decomposition: DecompositionParams::default(),
            cartoon: CartoonSegParams::default(),
            detection: DetectionParams::default(),
            clustering: ClusteringConfig::default(),
            output: OutputConfig::default(),
            fit_partition: true,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.decomposition.validate()?;
        self.cartoon.validate()?;
        self.detection.validate()?;
        self.clustering.kmeans_params(self.seed).validate()?;
        self.clustering.mbo_params(self.seed).validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Reads a configuration file, or the configuration embedded in a run
    /// report.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut doc: serde_json::Value = serde_json::from_str(&text)?;
        if doc.get("tool").is_some() {
            if let Some(cfg) = doc.get_mut("config") {
                return Ok(serde_json::from_value(cfg.take())?);
            }
        }
        Ok(serde_json::from_value(doc)?)
    }

    /// Output stem: the configured one, else the input's file stem, else
    /// `"output"`.
    pub fn stem(&self) -> String {
        self.output
            .stem
            .clone()
            .or_else(|| {
                self.input
                    .as_ref()
                    .and_then(|p| p.file_stem())
                    .map(|s| s.to_string_lossy().into_owned())
            })
            .unwrap_or_else(|| "output".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_partial_documents() {
        let mut cfg = PipelineConfig::default();
        cfg.seed = 42;
        cfg.clustering.method = ClusterMethod::Mbo;
        let back = PipelineConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let partial = PipelineConfig::from_json(r#"{"seed": 3, "clustering": {"k": 4}}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.clustering.k, 4);
        assert_eq!(partial.clustering.replications, 10);
        assert_eq!(partial.cartoon, CartoonSegParams::default());
        assert!(PipelineConfig::from_json("{\"seed\": \"x\"}").is_err());
    }

    #[test]
    fn validation_reaches_nested_parameters() {
        let mut cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        cfg.clustering.k = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.detection.percentile = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stem_fallbacks() {
        let mut cfg = PipelineConfig::default();
        assert_eq!(cfg.stem(), "output");
        cfg.input = Some("data/scan_01.png".into());
        assert_eq!(cfg.stem(), "scan_01");
        cfg.output.stem = Some("x".into());
        assert_eq!(cfg.stem(), "x");
    }
}
