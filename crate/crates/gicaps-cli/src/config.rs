//! Run configuration: a versioned TOML file plus flag overrides.
//!
//! Flags win over the file. The resolved configuration is echoed (with the
//! seed) into every output file, so any artifact can be reproduced from its
//! own header.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gicaps::baselines::BaselineConfig;
use gicaps::dataset::{GaussianBlobSpec, LabelColumn};
use gicaps::evaluate::{ClassifierSpec, ResamplerSpec};
use gicaps::oversample::OversampleConfig;
use gicaps::undersample::{KClusters, UndersampleConfig};

pub const CONFIG_VERSION: u32 = 1;

/// A configuration or usage problem; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub resample: Option<ResampleSection>,
    #[serde(default)]
    pub undersample: Option<UndersampleSection>,
    #[serde(default)]
    pub oversample: Option<OversampleSection>,
    #[serde(default)]
    pub baseline: Option<BaselineSection>,
    #[serde(default)]
    pub gmr: Option<GmrSection>,
    #[serde(default)]
    pub benchmark: Option<BenchmarkSection>,
    #[serde(default)]
    pub margin: Option<MarginSection>,
    #[serde(default)]
    pub ros: Option<TargetSection>,
    #[serde(default)]
    pub rus: Option<TargetSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSection {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub label_column: Option<toml::Value>,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default)]
    pub blobs: Vec<BlobSection>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlobSection {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub count: usize,
    pub class: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResampleSection {
    pub method: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UndersampleSection {
    pub n_target: usize,
    #[serde(default)]
    pub k_clusters: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_dedupe_eps")]
    pub dedupe_angle_eps: f64,
}

fn default_delta() -> f64 {
    1.0
}

fn default_dedupe_eps() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OversampleSection {
    #[serde(default)]
    pub kappa_same: Option<usize>,
    #[serde(default)]
    pub lambda_v: Option<f64>,
    #[serde(default)]
    pub kappa_q: Option<usize>,
    #[serde(default)]
    pub tau_cross_rel: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub noise_rel: Option<f64>,
    #[serde(default)]
    pub pre_cluster: Option<usize>,
    /// Explicit per-class synthetic budgets; omitted classes balance up to
    /// the (post-undersampling) majority size.
    #[serde(default)]
    pub h_target: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct BaselineSection {
    #[serde(default)]
    pub k_neighbors: Option<usize>,
    #[serde(default)]
    pub smote_percent: Option<usize>,
    #[serde(default)]
    pub adasyn_beta: Option<f64>,
    #[serde(default)]
    pub adasyn_major_cap: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmrSection {
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_gmr_iter")]
    pub max_iter: usize,
    #[serde(default = "default_gmr_tol")]
    pub tol: f64,
}

fn default_gmr_iter() -> usize {
    200
}

fn default_gmr_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSection {
    pub methods: Vec<String>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_folds() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginSection {
    pub class_a: usize,
    pub class_b: usize,
    #[serde(default = "default_n_pca")]
    pub n_pca: usize,
    pub methods: Vec<String>,
}

fn default_n_pca() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct TargetSection {
    #[serde(default)]
    pub target: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError(format!("config parse error: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return err(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            ));
        }
        Ok(cfg)
    }

    /// Seed is mandatory: from the flag or the file.
    pub fn resolve_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| {
            ConfigError("no seed: set `seed` in the config or pass --seed".into())
        })
    }

    pub fn resolve_out(&self) -> Result<PathBuf, ConfigError> {
        self.out
            .clone()
            .ok_or_else(|| ConfigError("no output directory: set `out` or pass --out".into()))
    }

    pub fn dataset_name(&self) -> String {
        if let Some(name) = &self.dataset.name {
            return name.clone();
        }
        if let Some(csv) = &self.dataset.csv {
            if let Some(stem) = csv.file_stem() {
                return stem.to_string_lossy().into_owned();
            }
        }
        "generated".to_string()
    }

    pub fn label_column(&self) -> Result<LabelColumn, ConfigError> {
        match &self.dataset.label_column {
            None => err("dataset.label_column is required for CSV input"),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(LabelColumn::Index(*i as usize)),
            Some(toml::Value::String(s)) => Ok(LabelColumn::Name(s.clone())),
            Some(other) => err(format!(
                "dataset.label_column must be a column index or name, got {other}"
            )),
        }
    }

    pub fn blob_specs(&self) -> Result<Vec<GaussianBlobSpec>, ConfigError> {
        if self.dataset.blobs.is_empty() {
            return err("dataset.blobs is empty: nothing to generate");
        }
        Ok(self
            .dataset
            .blobs
            .iter()
            .map(|b| GaussianBlobSpec {
                mean: b.mean.clone(),
                covariance: b.cov.clone(),
                count: b.count,
                class_id: b.class,
            })
            .collect())
    }

    pub fn undersample_config(&self) -> Result<UndersampleConfig, ConfigError> {
        let section = self
            .undersample
            .as_ref()
            .ok_or_else(|| ConfigError("[undersample] section required for this method".into()))?;
        Ok(UndersampleConfig {
            n_target: section.n_target,
            k_clusters: section
                .k_clusters
                .map_or(KClusters::Auto, KClusters::Fixed),
            delta: section.delta,
            dedupe_angle_eps: section.dedupe_angle_eps,
        })
    }

    pub fn oversample_config(&self) -> Result<OversampleConfig, ConfigError> {
        let section = self.oversample.clone().unwrap_or_default();
        let mut cfg = OversampleConfig::default();
        if let Some(v) = section.kappa_same {
            cfg.kappa_same = v;
        }
        if let Some(v) = section.lambda_v {
            cfg.lambda_v = v;
        }
        if let Some(v) = section.kappa_q {
            cfg.kappa_q = v;
        }
        if let Some(v) = section.tau_cross_rel {
            cfg.tau_cross_rel = v;
        }
        if let Some(v) = section.rho {
            cfg.rho = v;
        }
        if let Some(v) = section.noise_rel {
            cfg.noise_rel = v;
        }
        cfg.pre_cluster = section.pre_cluster;
        for (class, h) in &section.h_target {
            let class: usize = class
                .parse()
                .map_err(|_| ConfigError(format!("bad class id {class:?} in h_target")))?;
            cfg.h_target.insert(class, *h);
        }
        Ok(cfg)
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        let section = self.baseline.clone().unwrap_or_default();
        let mut cfg = BaselineConfig::default();
        if let Some(v) = section.k_neighbors {
            cfg.k_neighbors = v;
        }
        if let Some(v) = section.smote_percent {
            cfg.smote_percent = v;
        }
        if let Some(v) = section.adasyn_beta {
            cfg.adasyn_beta = v;
        }
        cfg.adasyn_major_cap = section.adasyn_major_cap;
        cfg
    }

    pub fn classifier_spec(&self) -> ClassifierSpec {
        match &self.gmr {
            Some(g) => ClassifierSpec {
                gmr_k: g.k,
                max_iter: g.max_iter,
                tol: g.tol,
            },
            None => ClassifierSpec::default(),
        }
    }

    /// Build the resampler for a method name.
    pub fn method_spec(&self, method: &str) -> Result<ResamplerSpec, ConfigError> {
        match method {
            "none" => Ok(ResamplerSpec::None),
            "gicaps" => Ok(ResamplerSpec::Gicaps {
                under: self.undersample_config()?,
                over: self.oversample_config()?,
            }),
            "gicaps-u" => Ok(ResamplerSpec::GicapsU {
                under: self.undersample_config()?,
            }),
            "gicaps-o" => Ok(ResamplerSpec::GicapsO {
                over: self.oversample_config()?,
            }),
            "smote" => Ok(ResamplerSpec::Smote {
                baseline: self.baseline_config(),
            }),
            "adasyn" => Ok(ResamplerSpec::Adasyn {
                baseline: self.baseline_config(),
            }),
            "ros" => Ok(ResamplerSpec::Ros {
                target: self.ros.clone().unwrap_or_default().target,
            }),
            "rus" => Ok(ResamplerSpec::Rus {
                target: self.rus.clone().unwrap_or_default().target,
            }),
            other => err(format!(
                "unknown method {other:?} (expected one of: gicaps, gicaps-o, gicaps-u, \
                 smote, adasyn, ros, rus, none)"
            )),
        }
    }

    /// JSON echo embedded in every output file.
    pub fn echo_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
