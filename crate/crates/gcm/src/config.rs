//! Flat key-value configuration files (TOML) and their resolved forms.
//! Command-line flags override file values, which override defaults.

use std::path::{Path, PathBuf};

use gcm_core::simulation::{ErrorFamily, SimulationConfig, SpatialKind, TemporalKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};
use crate::ingest::ColumnMapping;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Temporal {
    #[serde(alias = "ar")]
    Autoregressive,
    #[serde(alias = "ma")]
    MovingAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spatial {
    Hub,
    #[serde(alias = "small")]
    SmallWorld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    SubGaussian,
}

impl Temporal {
    pub fn label(self) -> &'static str {
        match self {
            Temporal::Autoregressive => "autoregressive",
            Temporal::MovingAverage => "moving_average",
        }
    }
}

impl Spatial {
    pub fn label(self) -> &'static str {
        match self {
            Spatial::Hub => "hub",
            Spatial::SmallWorld => "small_world",
        }
    }
}

impl From<Temporal> for TemporalKind {
    fn from(t: Temporal) -> Self {
        match t {
            Temporal::Autoregressive => TemporalKind::Autoregressive,
            Temporal::MovingAverage => TemporalKind::MovingAverage,
        }
    }
}

impl From<TemporalKind> for Temporal {
    fn from(t: TemporalKind) -> Self {
        match t {
            TemporalKind::Autoregressive => Temporal::Autoregressive,
            TemporalKind::MovingAverage => Temporal::MovingAverage,
        }
    }
}

impl From<Spatial> for SpatialKind {
    fn from(s: Spatial) -> Self {
        match s {
            Spatial::Hub => SpatialKind::Hub,
            Spatial::SmallWorld => SpatialKind::SmallWorld,
        }
    }
}

impl From<SpatialKind> for Spatial {
    fn from(s: SpatialKind) -> Self {
        match s {
            SpatialKind::Hub => Spatial::Hub,
            SpatialKind::SmallWorld => Spatial::SmallWorld,
        }
    }
}

impl From<Family> for ErrorFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Gaussian => ErrorFamily::Gaussian,
            Family::SubGaussian => ErrorFamily::SubGaussian,
        }
    }
}

impl From<ErrorFamily> for Family {
    fn from(f: ErrorFamily) -> Self {
        match f {
            ErrorFamily::Gaussian => Family::Gaussian,
            ErrorFamily::SubGaussian => Family::SubGaussian,
        }
    }
}

/// Every key a configuration file may set. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub id_column: Option<String>,
    pub time_column: Option<String>,
    pub static_columns: Option<Vec<String>>,
    pub dynamic_columns: Option<Vec<String>>,
    pub response_columns: Option<Vec<String>>,
    pub standardize: Option<bool>,
    pub alpha_global: Option<f64>,
    pub alpha_fdr: Option<f64>,
    pub n_pairs: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub reps: Option<usize>,
    pub preset: Option<String>,
    pub n_subjects: Option<usize>,
    pub n_times: Option<usize>,
    pub n_regions: Option<usize>,
    pub n_static: Option<usize>,
    pub n_dynamic: Option<usize>,
    pub temporal: Option<Temporal>,
    pub spatial: Option<Spatial>,
    pub omega: Option<f64>,
    pub signal: Option<f64>,
    pub xi_sparsity: Option<f64>,
    pub xi_value: Option<f64>,
    pub error_family: Option<Family>,
}

impl FileConfig {
    pub fn parse(text: &str) -> AppResult<Self> {
        toml::from_str(text).map_err(|e| AppError::Usage(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text).map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))
    }
}

pub fn check_level(name: &str, alpha: f64) -> AppResult<f64> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(AppError::Usage(format!("{name} must lie in (0, 1), got {alpha}")))
    }
}

pub const DEFAULT_ALPHA_GLOBAL: f64 = 0.05;
pub const DEFAULT_ALPHA_FDR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub input: PathBuf,
    pub mapping: ColumnMapping,
    pub standardize: bool,
    pub alpha_global: f64,
    pub alpha_fdr: f64,
    /// Region pairs for the temporal estimate; `None` uses the default.
    pub n_pairs: Option<usize>,
    /// Reserved: the analysis has no stochastic step.
    pub seed: u64,
}

impl AnalysisConfig {
    pub fn from_file(file: &FileConfig) -> AppResult<Self> {
        let defaults = ColumnMapping::default();
        let input = file
            .input
            .clone()
            .ok_or_else(|| AppError::Usage("no input file (use --input or `input` in the config)".into()))?;
        Ok(Self {
            input,
            mapping: ColumnMapping {
                id: file.id_column.clone().unwrap_or(defaults.id),
                time: file.time_column.clone().unwrap_or(defaults.time),
                static_columns: file.static_columns.clone(),
                dynamic_columns: file.dynamic_columns.clone(),
                response_columns: file.response_columns.clone(),
            },
            standardize: file.standardize.unwrap_or(true),
            alpha_global: check_level("alpha_global", file.alpha_global.unwrap_or(DEFAULT_ALPHA_GLOBAL))?,
            alpha_fdr: check_level("alpha_fdr", file.alpha_fdr.unwrap_or(DEFAULT_ALPHA_FDR))?,
            n_pairs: file.n_pairs,
            seed: file.seed.unwrap_or(0),
        })
    }
}

/// Serializable mirror of [`SimulationConfig`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSettings {
    pub n_subjects: usize,
    pub n_times: usize,
    pub n_regions: usize,
    pub n_static: usize,
    pub n_dynamic: usize,
    pub temporal: Temporal,
    pub spatial: Spatial,
    pub omega: f64,
    pub signal: f64,
    pub xi_sparsity: f64,
    pub xi_value: f64,
    pub error_family: Family,
    pub seed: u64,
}

impl From<&SimulationConfig> for SimulationSettings {
    fn from(c: &SimulationConfig) -> Self {
        Self {
            n_subjects: c.n_subjects,
            n_times: c.n_times,
            n_regions: c.n_regions,
            n_static: c.n_static,
            n_dynamic: c.n_dynamic,
            temporal: c.temporal.into(),
            spatial: c.spatial.into(),
            omega: c.omega,
            signal: c.signal,
            xi_sparsity: c.xi_sparsity,
            xi_value: c.xi_value,
            error_family: c.error_family.into(),
            seed: c.seed,
        }
    }
}

/// The reference design at `N = 200`, `T = 4`, `R = 50`, autoregressive
/// temporal and hub spatial structure, with file values laid over it.
pub fn simulation_config(file: &FileConfig) -> SimulationConfig {
    let mut c = SimulationConfig::reference(200, 4, 50, TemporalKind::Autoregressive, SpatialKind::Hub);
    overlay_simulation(&mut c, file);
    c
}

/// Applies every simulation key the file sets.
fn overlay_simulation(c: &mut SimulationConfig, file: &FileConfig) {
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = file.$field { c.$field = v.into(); })*
        };
    }
    set!(n_subjects, n_times, n_regions, n_static, n_dynamic, temporal, spatial, omega, signal, xi_sparsity, xi_value, error_family, seed);
}

/// SHA-256 of the canonical JSON form of `value`, hex encoded.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serializes");
    hex_digest(&bytes)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys() {
        let f = FileConfig::parse("alpha_fdr = 0.2\ntemporal = \"ma\"\nspatial = \"small_world\"\nn_regions = 25\n").unwrap();
        let c = simulation_config(&f);
        assert_eq!(c.temporal, TemporalKind::MovingAverage);
        assert_eq!(c.spatial, SpatialKind::SmallWorld);
        assert_eq!(c.n_regions, 25);
        assert_eq!(f.alpha_fdr, Some(0.2));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_levels() {
        assert!(FileConfig::parse("alpha = 0.1").is_err());
        let f = FileConfig {
            input: Some("x.csv".into()),
            alpha_global: Some(1.5),
            ..FileConfig::default()
        };
        assert!(matches!(AnalysisConfig::from_file(&f), Err(AppError::Usage(_))));
    }
}
