//! TOML run configuration.
//!
//! ```toml
//! [dataset]
//! format = "m5"                  # or "long"
//! sales = "sales_train_evaluation.csv"
//! prices = "sell_prices.csv"
//! calendar = "calendar.csv"
//! # path = "history.csv"         # long format only
//! horizon = 28
//! # train_days = 1913
//! price_window = 28
//!
//! [hierarchy]                    # optional; loader default otherwise
//! levels = [[], ["store_id"], ["store_id", "item_id"]]
//!
//! [forecasts]
//! manifest = "forecasts/manifest.csv"
//! reference = "reference.txt"    # optional; manifest order otherwise
//!
//! [run]
//! experiment = "all"
//! measures = ["PRICE_RMSSE", "MAE", "SMAPE/pooled_average"]
//! summarization = "per_level_average"
//! splits = 76
//! seed = 0
//! top_ks = [5, 10, 50]
//! out_dir = "out"
//! format = "both"
//! ```
//!
//! Relative paths resolve against the config file's directory. The
//! `HIERBENCH_OUT_DIR` environment variable overrides `run.out_dir`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::experiments::{linear_grid, DEFAULT_SPLITS, MAGIC_GRID_POINTS};
use crate::measures::{BaseMeasure, MeasureSpec, Summarization};

pub const OUT_DIR_ENV: &str = "HIERBENCH_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    M5,
    Long,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub format: DataFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sales: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calendar: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_days: Option<usize>,
    #[serde(default = "default_price_window")]
    pub price_window: usize,
}

fn default_price_window() -> usize {
    28
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    /// Grouping keys per level, top level first.
    pub levels: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    pub manifest: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Stability,
    PerLevel,
    Total,
    Temporal,
    Magic,
    Sweep,
    Matrix,
    All,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Stability,
        Experiment::PerLevel,
        Experiment::Total,
        Experiment::Temporal,
        Experiment::Magic,
        Experiment::Sweep,
        Experiment::Matrix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Stability => "stability",
            Experiment::PerLevel => "per-level",
            Experiment::Total => "total",
            Experiment::Temporal => "temporal",
            Experiment::Magic => "magic",
            Experiment::Sweep => "sweep",
            Experiment::Matrix => "matrix",
            Experiment::All => "all",
        }
    }

    pub fn includes(self, other: Experiment) -> bool {
        self == Experiment::All || self == other
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .chain([Experiment::All])
            .find(|e| e.name() == s || e.name().replace('-', "_") == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        self != OutputFormat::Json
    }

    pub fn json(self) -> bool {
        self != OutputFormat::Csv
    }
}

impl FromStr for OutputFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            _ => Err(ConfigError::Invalid(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagicSettings {
    pub grid_points: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub measures: Vec<String>,
    /// Levels to evaluate; defaults to the top and bottom level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
}

impl Default for MagicSettings {
    fn default() -> Self {
        MagicSettings {
            grid_points: MAGIC_GRID_POINTS,
            grid_min: 0.0,
            grid_max: 2.0,
            measures: ["PRICE_RMSSE", "MAE", "SMAPE"].map(String::from).to_vec(),
            levels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub base: String,
    /// Evenly spaced weights over `[0, 1]` when `weights` is not given.
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            base: "RMSSE".into(),
            points: 21,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub experiment: Experiment,
    pub measures: Vec<String>,
    pub summarization: String,
    pub splits: usize,
    pub seed: u64,
    /// Defaults to a single subset holding every method.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_ks: Option<Vec<usize>>,
    /// Subset for per-level, total, temporal and magic experiments;
    /// defaults to the largest of `top_ks`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    /// Defaults to half the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal_cut: Option<usize>,
    /// Measures for the similarity matrix; defaults to `measures`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_measures: Option<Vec<String>>,
    pub magic: MagicSettings,
    pub sweep: SweepSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            experiment: Experiment::All,
            measures: MeasureSpec::standard_set().iter().map(MeasureSpec::label).collect(),
            summarization: Summarization::PerLevelAverage.to_string(),
            splits: DEFAULT_SPLITS,
            seed: 0,
            top_ks: None,
            top_k: None,
            temporal_cut: None,
            matrix_measures: None,
            magic: MagicSettings::default(),
            sweep: SweepSettings::default(),
            threads: None,
            out_dir: PathBuf::from("hierbench-out"),
            format: OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<HierarchyConfig>,
    pub forecasts: ForecastConfig,
    #[serde(default)]
    pub run: RunSettings,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    /// Reads and checks a config file, applying the output directory
    /// environment override.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::parse(&text, &base).map_err(|e| match e {
            ConfigError::Invalid(message) => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })?;
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.run.out_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let d = &self.dataset;
        match d.format {
            DataFormat::M5 => {
                for (name, p) in [("sales", &d.sales), ("prices", &d.prices), ("calendar", &d.calendar)] {
                    if p.is_none() {
                        return Err(ConfigError::Invalid(format!("dataset.{name} is required for the m5 format")));
                    }
                }
            }
            DataFormat::Long => {
                if d.path.is_none() {
                    return Err(ConfigError::Invalid("dataset.path is required for the long format".into()));
                }
            }
        }
        if d.horizon == 0 {
            return Err(ConfigError::Invalid("dataset.horizon must be at least 1".into()));
        }
        let r = &self.run;
        if r.splits == 0 {
            return Err(ConfigError::Invalid("run.splits must be at least 1".into()));
        }
        if let Some(ks) = &r.top_ks {
            if ks.is_empty() || ks.windows(2).any(|p| p[0] >= p[1]) {
                return Err(ConfigError::Invalid("run.top_ks must be non-empty and strictly ascending".into()));
            }
        }
        self.measures()?;
        self.matrix_measures()?;
        self.magic_measures()?;
        self.sweep_base()?;
        self.sweep_weights()?;
        if r.magic.grid_points == 0 {
            return Err(ConfigError::Invalid("run.magic.grid_points must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    fn parse_measures(&self, names: &[String]) -> Result<Vec<MeasureSpec>, ConfigError> {
        let default: Summarization = self
            .run
            .summarization
            .parse()
            .map_err(|e| ConfigError::Invalid(format!("run.summarization: {e}")))?;
        names
            .iter()
            .map(|n| {
                let spec: MeasureSpec = n.parse().map_err(|e| ConfigError::Invalid(format!("measure `{n}`: {e}")))?;
                Ok(if n.contains('/') { spec } else { spec.with_summarization(default) })
            })
            .collect()
    }

    /// `run.measures` with the default summarization applied where none is
    /// given.
    pub fn measures(&self) -> Result<Vec<MeasureSpec>, ConfigError> {
        if self.run.measures.is_empty() {
            return Err(ConfigError::Invalid("run.measures is empty".into()));
        }
        self.parse_measures(&self.run.measures)
    }

    pub fn matrix_measures(&self) -> Result<Vec<MeasureSpec>, ConfigError> {
        match &self.run.matrix_measures {
            Some(m) => self.parse_measures(m),
            None => self.measures(),
        }
    }

    pub fn magic_measures(&self) -> Result<Vec<MeasureSpec>, ConfigError> {
        self.parse_measures(&self.run.magic.measures)
    }

    pub fn magic_grid(&self) -> Vec<f64> {
        let m = &self.run.magic;
        linear_grid(m.grid_points, m.grid_min, m.grid_max)
    }

    pub fn sweep_base(&self) -> Result<BaseMeasure, ConfigError> {
        let b = &self.run.sweep.base;
        b.trim_start_matches("PRICE_")
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("run.sweep.base: unknown measure `{b}`")))
    }

    pub fn sweep_weights(&self) -> Result<Vec<f64>, ConfigError> {
        let s = &self.run.sweep;
        let w = match &s.weights {
            Some(w) => w.clone(),
            None if s.points >= 2 => linear_grid(s.points, 0.0, 1.0),
            None => return Err(ConfigError::Invalid("run.sweep.points must be at least 2".into())),
        };
        if w.is_empty() || w.iter().any(|x| !(0.0..=1.0).contains(x)) || w.windows(2).any(|p| p[0] >= p[1]) {
            return Err(ConfigError::Invalid(
                "run.sweep.weights must be strictly increasing within [0, 1]".into(),
            ));
        }
        Ok(w)
    }

    /// Subsets for the stability and sweep experiments.
    pub fn top_ks(&self, n_methods: usize) -> Vec<usize> {
        self.run.top_ks.clone().unwrap_or_else(|| vec![n_methods])
    }

    /// Subset for the single-K experiments.
    pub fn top_k(&self, n_methods: usize) -> usize {
        self.run
            .top_k
            .unwrap_or_else(|| *self.top_ks(n_methods).last().expect("top_ks is non-empty"))
    }

    /// SHA-256 over the settings that affect results; output location,
    /// output format and thread count are left out.
    pub fn hash(&self) -> String {
        let mut view = self.clone();
        view.run.out_dir = PathBuf::new();
        view.run.format = OutputFormat::Both;
        view.run.threads = None;
        let json = serde_json::to_string(&view).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset]
format = "long"
path = "data.csv"
horizon = 7

[forecasts]
manifest = "manifest.csv"
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.run.splits, 76);
        assert_eq!(cfg.run.experiment, Experiment::All);
        assert_eq!(cfg.measures().unwrap().len(), 9);
        assert_eq!(cfg.magic_grid().len(), 500);
        assert_eq!(cfg.sweep_weights().unwrap().len(), 21);
        assert_eq!(cfg.top_ks(6), vec![6]);
        assert_eq!(cfg.top_k(6), 6);
        assert_eq!(cfg.resolve(Path::new("data.csv")), PathBuf::from("/tmp/x/data.csv"));
        assert_eq!(cfg.dataset.price_window, 28);
    }

    #[test]
    fn default_summarization_applies_to_bare_names() {
        let text = format!(
            "{MINIMAL}\n[run]\nsummarization = \"pooled_average\"\nmeasures = [\"MAE\", \"PRICE_RMSSE/single_level(1)\"]\n"
        );
        let cfg = RunConfig::parse(&text, Path::new(".")).unwrap();
        let m = cfg.measures().unwrap();
        assert_eq!(m[0].summarization, Summarization::PooledAverage);
        assert_eq!(m[1].summarization, Summarization::SingleLevel(1));
    }

    #[test]
    fn rejects_bad_settings() {
        let bad = [
            "[run]\ntop_ks = [10, 5]\n",
            "[run]\nmeasures = [\"FOO\"]\n",
            "[run]\nsplits = 0\n",
            "[run]\nexperiment = \"nope\"\n",
            "[run]\nunknown = 1\n",
            "[run.sweep]\nweights = [0.5, 0.2]\n",
        ];
        for b in bad {
            let text = format!("{MINIMAL}\n{b}");
            assert!(RunConfig::parse(&text, Path::new(".")).is_err(), "{b}");
        }
        let m5 = MINIMAL.replace("\"long\"", "\"m5\"");
        assert!(RunConfig::parse(&m5, Path::new(".")).is_err());
    }

    #[test]
    fn hash_ignores_output_settings() {
        let a = RunConfig::parse(MINIMAL, Path::new(".")).unwrap();
        let mut b = a.clone();
        b.run.out_dir = "elsewhere".into();
        b.run.threads = Some(3);
        b.run.format = OutputFormat::Json;
        assert_eq!(a.hash(), b.hash());
        b.run.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert_eq!("per_level".parse::<Experiment>().unwrap(), Experiment::PerLevel);
        assert!(Experiment::All.includes(Experiment::Sweep));
        assert!(!Experiment::Total.includes(Experiment::Sweep));
    }
}
