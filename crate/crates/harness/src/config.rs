//! Experiment configuration: TOML schema, path resolution, CLI overrides,
//! seed derivation, and the config fingerprint stamped into every report.
//!
//! All paths in a config file are relative to the file's directory. The
//! output directory resolves as: `--out` flag, then the `ORC_OUT_DIR`
//! environment variable, then the config value.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use orc_core::baselines::{ModelFamily, ModelParams, ModelSpec};
use orc_core::optics::SlmGeometry;
use orc_core::reservoir::{ReservoirConfig, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_SATURATION};

/// Reservoir knobs as they appear in the config file. The per-cell seed is
/// derived from the master seed, not configured directly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirSettings {
    pub grid: usize,
    pub block: usize,
    pub nodes: usize,
    pub alpha: f64,
    pub beta: f64,
    pub saturation: f64,
    pub bits: u8,
    pub washout: usize,
}

impl Default for ReservoirSettings {
    fn default() -> Self {
        ReservoirSettings {
            grid: 400,
            block: 20,
            nodes: 1600,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            saturation: DEFAULT_SATURATION,
            bits: 8,
            washout: 50,
        }
    }
}

impl ReservoirSettings {
    pub fn to_reservoir_config(&self, seed: u64) -> Result<ReservoirConfig> {
        Ok(ReservoirConfig {
            alpha: self.alpha,
            beta: self.beta,
            geometry: SlmGeometry::new(self.grid, self.block)?,
            nodes: self.nodes,
            saturation: self.saturation,
            bits: self.bits,
            washout: self.washout,
            seed,
        })
    }
}

/// Readout lambda grid and the chronological validation tail used to pick
/// from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutSettings {
    pub lambdas: Vec<f64>,
    pub val_fraction: f64,
}

impl Default for ReadoutSettings {
    fn default() -> Self {
        ReadoutSettings {
            lambdas: vec![1e-8, 1e-6, 1e-4, 1e-2, 1.0],
            val_fraction: 0.2,
        }
    }
}

/// Baseline families and hyperparameter grids. `tree_depths` uses 0 for
/// "unlimited".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSettings {
    pub families: Vec<String>,
    pub ridge_lambdas: Vec<f64>,
    pub lasso_lambdas: Vec<f64>,
    pub elasticnet_lambdas: Vec<f64>,
    pub knn_k: Vec<usize>,
    pub tree_depths: Vec<usize>,
    pub forest_trees: usize,
    pub forest_min_leaf: Vec<usize>,
    pub forest_feature_frac: f64,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        BaselineSettings {
            families: vec![
                "ols".into(),
                "ridge".into(),
                "lasso".into(),
                "elasticnet".into(),
                "knn".into(),
                "decision_tree".into(),
                "random_forest".into(),
            ],
            ridge_lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
            lasso_lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
            elasticnet_lambdas: vec![1e-3, 1e-2, 1e-1],
            knn_k: vec![1, 2, 5, 10, 20],
            tree_depths: vec![2, 4, 8, 0],
            forest_trees: 30,
            forest_min_leaf: vec![1, 5],
            forest_feature_frac: 1.0 / 3.0,
        }
    }
}

impl BaselineSettings {
    /// Materializes the configured families into model specs.
    pub fn to_specs(&self, forest_seed: u64) -> Result<Vec<ModelSpec>> {
        let depth = |d: usize| if d == 0 { None } else { Some(d) };
        let mut specs = Vec::new();
        for family in &self.families {
            let spec = match family.as_str() {
                "ols" => ModelSpec::new(ModelFamily::Ols, vec![ModelParams::Ols])?,
                "ridge" => ModelSpec::new(
                    ModelFamily::Ridge,
                    self.ridge_lambdas
                        .iter()
                        .map(|&lambda| ModelParams::Ridge { lambda })
                        .collect(),
                )?,
                "lasso" => ModelSpec::new(
                    ModelFamily::Lasso,
                    self.lasso_lambdas
                        .iter()
                        .map(|&lambda1| ModelParams::Lasso { lambda1 })
                        .collect(),
                )?,
                "elasticnet" => ModelSpec::new(
                    ModelFamily::ElasticNet,
                    self.elasticnet_lambdas
                        .iter()
                        .flat_map(|&lambda1| {
                            self.elasticnet_lambdas
                                .iter()
                                .map(move |&lambda2| ModelParams::ElasticNet { lambda1, lambda2 })
                        })
                        .collect(),
                )?,
                "knn" => ModelSpec::new(
                    ModelFamily::Knn,
                    self.knn_k.iter().map(|&k| ModelParams::Knn { k }).collect(),
                )?,
                "decision_tree" => ModelSpec::new(
                    ModelFamily::DecisionTree,
                    self.tree_depths
                        .iter()
                        .map(|&d| ModelParams::DecisionTree {
                            max_depth: depth(d),
                            min_leaf: 1,
                        })
                        .collect(),
                )?,
                "random_forest" => ModelSpec::new(
                    ModelFamily::RandomForest,
                    self.forest_min_leaf
                        .iter()
                        .map(|&min_leaf| ModelParams::RandomForest {
                            n_trees: self.forest_trees,
                            max_depth: None,
                            min_leaf,
                            feature_frac: self.forest_feature_frac,
                            seed: forest_seed,
                        })
                        .collect(),
                )?,
                other => bail!("unknown baseline family {other:?}"),
            };
            specs.push(spec);
        }
        Ok(specs)
    }
}

/// One index to forecast: ticker name plus its OHLC CSV export.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickerSource {
    pub name: String,
    pub path: PathBuf,
}

/// Paths of the four macro series CSVs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSources {
    pub vix: PathBuf,
    pub effr: PathBuf,
    pub umcsent: PathBuf,
    pub dxynyb: PathBuf,
    #[serde(rename = "tickers")]
    pub tickers: Vec<TickerSource>,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub horizons: Vec<usize>,
    pub train_len: usize,
    pub test_len: usize,
    pub out_dir: PathBuf,
    /// Use signed correlation weights instead of the default |r|.
    pub cw_signed: bool,
    /// Folds for baseline expanding-window cross-validation.
    pub folds: usize,
    pub reservoir: ReservoirSettings,
    pub readout: ReadoutSettings,
    pub baselines: BaselineSettings,
    pub data: DataSources,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 42,
            horizons: vec![1, 4, 10],
            train_len: 500,
            test_len: 100,
            out_dir: PathBuf::from("out"),
            cw_signed: false,
            folds: 5,
            reservoir: ReservoirSettings::default(),
            readout: ReadoutSettings::default(),
            baselines: BaselineSettings::default(),
            data: DataSources::default(),
        }
    }
}

/// CLI-level overrides applied after the file is parsed.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub tickers: Option<Vec<String>>,
    pub horizons: Option<Vec<usize>>,
}

impl ExperimentConfig {
    /// Parses a TOML config file and resolves every path relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: ExperimentConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.out_dir);
        resolve(&mut self.data.vix);
        resolve(&mut self.data.effr);
        resolve(&mut self.data.umcsent);
        resolve(&mut self.data.dxynyb);
        for t in &mut self.data.tickers {
            resolve(&mut t.path);
        }
    }

    pub fn apply_overrides(&mut self, ov: &Overrides) -> Result<()> {
        if let Some(seed) = ov.seed {
            self.master_seed = seed;
        }
        if let Some(out) = &ov.out_dir {
            self.out_dir = out.clone();
        } else if let Ok(env_out) = std::env::var("ORC_OUT_DIR") {
            if !env_out.is_empty() {
                self.out_dir = PathBuf::from(env_out);
            }
        }
        if let Some(horizons) = &ov.horizons {
            self.horizons = horizons.clone();
        }
        if let Some(keep) = &ov.tickers {
            for name in keep {
                if !self.data.tickers.iter().any(|t| &t.name == name) {
                    bail!("ticker {name:?} is not defined in the config");
                }
            }
            self.data.tickers.retain(|t| keep.iter().any(|k| k == &t.name));
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            bail!("horizons must be non-empty and >= 1");
        }
        if self.train_len < 2 || self.test_len < 1 {
            bail!(
                "train/test lengths too small: {}/{}",
                self.train_len,
                self.test_len
            );
        }
        if self.folds < 2 {
            bail!("folds must be >= 2");
        }
        if !(0.0..1.0).contains(&self.readout.val_fraction) || self.readout.val_fraction <= 0.0 {
            bail!("readout.val_fraction must be in (0, 1)");
        }
        self.reservoir.to_reservoir_config(0)?.validate()?;
        Ok(())
    }

    /// Requires every referenced data file to exist (synthetic runs skip
    /// this).
    pub fn check_files(&self) -> Result<()> {
        let mut missing = Vec::new();
        for p in [
            &self.data.vix,
            &self.data.effr,
            &self.data.umcsent,
            &self.data.dxynyb,
        ] {
            if !p.is_file() {
                missing.push(p.display().to_string());
            }
        }
        for t in &self.data.tickers {
            if !t.path.is_file() {
                missing.push(t.path.display().to_string());
            }
        }
        if !missing.is_empty() {
            bail!("missing data files: {}", missing.join(", "));
        }
        if self.data.tickers.is_empty() {
            bail!("no tickers configured");
        }
        Ok(())
    }

    /// SHA-256 over the canonical serialized form; stamped into reports so
    /// outputs are traceable to an exact configuration. The output
    /// directory is not part of the identity: the same experiment written
    /// elsewhere fingerprints identically.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        let text = toml::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Deterministic per-cell seed: SHA-256 over the master seed and the cell
/// coordinates, truncated to 64 bits.
pub fn derive_seed(master: u64, ticker: &str, horizon: usize, mode: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(ticker.as_bytes());
    hasher.update([0u8]);
    hasher.update((horizon as u64).to_le_bytes());
    hasher.update([0u8]);
    hasher.update(mode.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
