//! Loading configured inputs, running experiments and writing reports.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{DataFormat, Experiment, OutputFormat, RunConfig};
use crate::error::{ExperimentError, LoadError, RunError};
use crate::experiments::{
    MagicResult, Outcome, PerLevelReport, SimilarityMatrix, StabilityReport, Study, SweepReport, TemporalReport,
};
use crate::hierarchy::{HierarchicalDataset, HierarchySpec};
use crate::io::{load_forecasts, load_long, load_m5, LoadOptions};
use crate::measures::{Evaluator, ForecastSet};
use crate::ranking::ReferenceRanking;
use crate::validate::{zero_scale_census, LevelCensus};

/// Everything an experiment run reads from disk.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub dataset: HierarchicalDataset,
    pub forecasts: Vec<ForecastSet>,
    pub reference: Option<ReferenceRanking>,
}

pub fn load_options(cfg: &RunConfig) -> Result<LoadOptions, LoadError> {
    let hierarchy = cfg
        .hierarchy
        .as_ref()
        .map(|h| HierarchySpec::from_key_lists(h.levels.clone()))
        .transpose()?;
    Ok(LoadOptions {
        horizon: cfg.dataset.horizon,
        train_days: cfg.dataset.train_days,
        price_window: cfg.dataset.price_window,
        hierarchy,
    })
}

pub fn load_dataset(cfg: &RunConfig) -> Result<HierarchicalDataset, LoadError> {
    let options = load_options(cfg)?;
    let d = &cfg.dataset;
    let path = |p: &Option<PathBuf>| cfg.resolve(p.as_deref().expect("checked when the config was parsed"));
    match d.format {
        DataFormat::M5 => load_m5(&path(&d.sales), &path(&d.prices), &path(&d.calendar), &options),
        DataFormat::Long => load_long(&path(&d.path), &options),
    }
}

pub fn load_reference(cfg: &RunConfig) -> Result<Option<ReferenceRanking>, LoadError> {
    cfg.forecasts
        .reference
        .as_ref()
        .map(|p| ReferenceRanking::from_file(&cfg.resolve(p)))
        .transpose()
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, LoadError> {
    Ok(Inputs {
        dataset: load_dataset(cfg)?,
        forecasts: load_forecasts(&cfg.resolve(&cfg.forecasts.manifest))?,
        reference: load_reference(cfg)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCount {
    pub level: usize,
    pub name: String,
    pub series: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub levels: Vec<LevelCount>,
    pub bottom_series: usize,
    pub total_series: usize,
    pub n_train: usize,
    pub horizon: usize,
}

impl DatasetSummary {
    pub fn of(ds: &HierarchicalDataset) -> Self {
        DatasetSummary {
            levels: ds
                .spec()
                .levels()
                .iter()
                .zip(ds.level_counts())
                .enumerate()
                .map(|(j, (def, series))| LevelCount {
                    level: j + 1,
                    name: def.name.clone(),
                    series,
                })
                .collect(),
            bottom_series: ds.bottom().len(),
            total_series: ds.series().len(),
            n_train: ds.n_train(),
            horizon: ds.horizon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceDiagnostics {
    pub available: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub missing_price_days: usize,
    pub total_dollar_sales: f64,
    pub weight_sum: f64,
}

impl PriceDiagnostics {
    pub fn of(ds: &HierarchicalDataset) -> Self {
        match Evaluator::new(ds).weights() {
            Ok(w) => PriceDiagnostics {
                available: true,
                error: None,
                missing_price_days: w.missing_price_days,
                total_dollar_sales: w.total,
                weight_sum: w.sum(),
            },
            Err(e) => PriceDiagnostics {
                available: false,
                error: Some(e.to_string()),
                missing_price_days: 0,
                total_dollar_sales: 0.0,
                weight_sum: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub zero_scale: Vec<LevelCensus>,
    pub prices: PriceDiagnostics,
}

/// All results of one run. Serialized as the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config_hash: String,
    pub experiment: Experiment,
    pub seed: u64,
    pub splits: usize,
    pub methods: Vec<String>,
    pub reference: Vec<String>,
    pub dataset: DatasetSummary,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_level: Option<PerLevelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total: Option<StabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal: Option<TemporalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub magic: Option<Vec<MagicResult>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<SimilarityMatrix>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Runs the configured experiments, on a dedicated thread pool when
/// `run.threads` is set.
pub fn run_experiments(cfg: &RunConfig, inputs: &Inputs) -> Result<Report, RunError> {
    match cfg.run.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ExperimentError::Invalid(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(cfg, inputs))
        }
        None => run_inner(cfg, inputs),
    }
}

fn run_inner(cfg: &RunConfig, inputs: &Inputs) -> Result<Report, RunError> {
    let ds = &inputs.dataset;
    let study = Study::new(ds, &inputs.forecasts, inputs.reference.clone())?;
    let r = &cfg.run;
    let n_methods = inputs.forecasts.len();
    let top_ks = cfg.top_ks(n_methods);
    let top_k = cfg.top_k(n_methods);
    let measures = cfg.measures()?;
    let want = |e| r.experiment.includes(e);

    let mut report = Report {
        config_hash: cfg.hash(),
        experiment: r.experiment,
        seed: r.seed,
        splits: r.splits,
        methods: inputs.forecasts.iter().map(|f| f.method_id.clone()).collect(),
        reference: study.reference().ids().to_vec(),
        dataset: DatasetSummary::of(ds),
        diagnostics: Diagnostics {
            zero_scale: zero_scale_census(ds),
            prices: PriceDiagnostics::of(ds),
        },
        stability: None,
        per_level: None,
        total: None,
        temporal: None,
        magic: None,
        sweep: None,
        matrix: None,
    };

    if want(Experiment::Stability) {
        log::info!("cross-sectional stability over {} splits", r.splits);
        report.stability = Some(study.cross_sectional_stability(&measures, r.splits, r.seed, &top_ks)?);
    }
    if want(Experiment::PerLevel) {
        log::info!("per-level stability");
        report.per_level = Some(study.per_level_stability(&measures, r.splits, r.seed, top_k)?);
    }
    if want(Experiment::Total) {
        log::info!("total-aggregation stability");
        report.total = Some(study.total_aggregation_stability(&measures, r.splits, r.seed, top_k)?);
    }
    if want(Experiment::Temporal) {
        let cut = r.temporal_cut.unwrap_or(ds.horizon() / 2);
        log::info!("temporal stability, cut at day {cut}");
        report.temporal = Some(study.temporal_stability(&measures, cut, top_k)?);
    }
    if want(Experiment::Magic) {
        let grid = cfg.magic_grid();
        let mut levels = r.magic.levels.clone().unwrap_or_else(|| vec![1, ds.k()]);
        levels.dedup();
        let mut results = Vec::new();
        for m in cfg.magic_measures()? {
            for &level in &levels {
                log::info!("magic numbers for {} at level {level}", m.label());
                results.push(study.magic_number_similarity(&m, level, &grid, top_k)?);
            }
        }
        report.magic = Some(results);
    }
    if want(Experiment::Sweep) {
        log::info!("top-level weight sweep");
        report.sweep = Some(study.top_level_weight_sweep(
            cfg.sweep_base()?,
            &cfg.sweep_weights()?,
            r.splits,
            r.seed,
            &top_ks,
        )?);
    }
    if want(Experiment::Matrix) {
        log::info!("measure similarity matrix");
        report.matrix = Some(study.measure_similarity_matrix(&cfg.matrix_measures()?)?);
    }
    Ok(report)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn render(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].len())
                    .chain([self.header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if i == 0 {
                    s.push_str(&format!("{cell:<w$}"));
                } else {
                    s.push_str(&format!("  {cell:>w$}"));
                }
            }
            s.trim_end().to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    fn write_csv(&self, path: &Path) -> Result<(), RunError> {
        let err = |e: csv::Error| RunError::Output {
            path: path.display().to_string(),
            source: e.into(),
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(|source| RunError::Output {
            path: path.display().to_string(),
            source,
        })
    }
}

fn stability_table(s: &StabilityReport) -> Table {
    let mut t = Table::new(["measure".to_string()].into_iter().chain(s.top_ks.iter().map(|k| format!("top_{k}"))));
    for m in &s.measures {
        let mut row = vec![m.measure.clone()];
        row.extend(m.by_top_k.iter().map(|c| c.cell.cell()));
        t.rows.push(row);
    }
    t
}

fn level_table<'a>(measures: &[String], rows: impl Iterator<Item = (usize, &'a str, Vec<String>)>) -> Table {
    let mut t = Table::new(["level", "name"].into_iter().map(String::from).chain(measures.iter().cloned()));
    for (level, name, cells) in rows {
        let mut row = vec![level.to_string(), name.to_string()];
        row.extend(cells);
        t.rows.push(row);
    }
    t
}

/// `(file name, table)` for every table in the report.
fn tables(report: &Report) -> Vec<(String, Table)> {
    let mut out = Vec::new();
    if let Some(s) = &report.stability {
        out.push(("stability.csv".into(), stability_table(s)));
    }
    if let Some(p) = &report.per_level {
        let rows = p
            .levels
            .iter()
            .map(|l| (l.level, l.name.as_str(), l.cells.iter().map(|c| c.cell()).collect()));
        out.push(("per_level.csv".into(), level_table(&p.measures, rows)));
    }
    if let Some(s) = &report.total {
        out.push(("total.csv".into(), stability_table(s)));
    }
    if let Some(t) = &report.temporal {
        let mut overall = Table::new(["measure", "overall"]);
        for r in &t.rows {
            overall.rows.push(vec![r.measure.clone(), r.overall.cell()]);
        }
        out.push(("temporal.csv".into(), overall));
        let measures: Vec<String> = t.rows.iter().map(|r| r.measure.clone()).collect();
        let rows = t.level_names.iter().enumerate().map(|(j, name)| {
            (j + 1, name.as_str(), t.rows.iter().map(|r| r.per_level[j].cell()).collect())
        });
        out.push(("temporal_per_level.csv".into(), level_table(&measures, rows)));
    }
    if let Some(m) = &report.magic {
        let mut sim = Table::new(["measure", "level", "similarity"]);
        let mut mult = Table::new(["measure", "level", "method", "multiplier"]);
        for r in m {
            sim.rows.push(vec![r.measure.clone(), r.level.to_string(), r.similarity.cell()]);
            for x in &r.multipliers {
                mult.rows.push(vec![
                    r.measure.clone(),
                    r.level.to_string(),
                    x.method.clone(),
                    x.multiplier.map_or("*".to_string(), |c| format!("{c:.6}")),
                ]);
            }
        }
        out.push(("magic.csv".into(), sim));
        out.push(("magic_multipliers.csv".into(), mult));
    }
    if let Some(s) = &report.sweep {
        for c in &s.curves {
            let mut t = Table::new(["w", "stability"]);
            for p in &c.points {
                let v = match p.stability {
                    Some(v) => format!("{v:.6}"),
                    None if p.degenerate > 0 => "*".into(),
                    None => "NA".into(),
                };
                t.rows.push(vec![format!("{}", p.w), v]);
            }
            out.push((format!("sweep_top{}.csv", c.top_k), t));
        }
    }
    if let Some(m) = &report.matrix {
        let mut t = Table::new(["measure".to_string()].into_iter().chain(m.measures.iter().cloned()));
        for (name, row) in m.measures.iter().zip(&m.cells) {
            let mut r = vec![name.clone()];
            r.extend(row.iter().map(Outcome::cell));
            t.rows.push(r);
        }
        out.push(("matrix.csv".into(), t));
    }
    out
}

/// Writes the CSV tables and/or `report.json` into `dir`, returning the
/// paths written.
pub fn write_outputs(report: &Report, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, RunError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| RunError::Output { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    if format.csv() {
        for (name, table) in tables(report) {
            let path = dir.join(name);
            table.write_csv(&path)?;
            written.push(path);
        }
    }
    if format.json() {
        let path = dir.join("report.json");
        let mut f = File::create(&path).map_err(io(&path))?;
        f.write_all(report.to_json().as_bytes()).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Plain-text summary of every table in the report.
pub fn headline(report: &Report) -> String {
    let mut out = format!(
        "config {}  seed {}  splits {}  methods {}\n",
        &report.config_hash[..12],
        report.seed,
        report.splits,
        report.methods.len()
    );
    for (name, table) in tables(report) {
        if name == "magic_multipliers.csv" {
            continue;
        }
        out.push('\n');
        out.push_str(name.trim_end_matches(".csv"));
        out.push('\n');
        out.push_str(&table.render());
    }
    out
}

/// Loads, validates, runs and writes outputs for one config.
pub fn run_config(cfg: &RunConfig) -> Result<(Report, Vec<PathBuf>), RunError> {
    let (validation, inputs) = crate::validate::validate_config(cfg);
    let fatal = validation.fatal_count();
    let inputs = match inputs {
        Some(i) if fatal == 0 => i,
        _ => {
            for f in validation.findings.iter().filter(|f| f.is_fatal()) {
                log::error!("{}", f.message);
            }
            return Err(RunError::Validation(fatal.max(1)));
        }
    };
    let report = run_experiments(cfg, &inputs)?;
    let written = write_outputs(&report, &cfg.resolve(&cfg.run.out_dir), cfg.run.format)?;
    Ok((report, written))
}
