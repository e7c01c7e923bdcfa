//! Python bindings for `hierbench`.
//!
//! Build with `maturin develop` (or `cargo build -p hierbench-py --features
//! extension-module` and copy the shared library as `pyhierbench.so`).

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hierbench::config::{Experiment, RunConfig};
use hierbench::experiments::Study;
use hierbench::hierarchy::{HierarchicalDataset, HierarchySpec, TimeSeries};
use hierbench::io::{load_long, load_m5, LoadOptions};
use hierbench::measures::{series_error, BaseMeasure, Evaluator, ForecastSet, MeasureSpec};
use hierbench::prices::compute_price_weights;
use hierbench::ranking::{self, rank_methods as rank, ReferenceRanking};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(runtime_err)
}

fn spec_from(levels: Option<Vec<Vec<String>>>) -> PyResult<Option<HierarchySpec>> {
    levels.map(HierarchySpec::from_key_lists).transpose().map_err(value_err)
}

fn parse_measures(names: &[String]) -> PyResult<Vec<MeasureSpec>> {
    names.iter().map(|n| n.parse::<MeasureSpec>().map_err(value_err)).collect()
}

fn forecast_sets(forecasts: BTreeMap<String, BTreeMap<String, Vec<f64>>>) -> Vec<ForecastSet> {
    forecasts
        .into_iter()
        .map(|(method, rows)| {
            let mut f = ForecastSet::new(method);
            f.forecasts.extend(rows);
            f
        })
        .collect()
}

/// Error of one forecast against one series under a base measure
/// (`MAE`, `SMAPE`, `MASE`, `RMSSE` or `WAPE`).
#[pyfunction]
fn measure(name: &str, train: Vec<f64>, test: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    let base: BaseMeasure = name.parse().map_err(value_err)?;
    let series = TimeSeries {
        id: "series".into(),
        level: 1,
        train,
        test,
    };
    series_error(base, &series, &forecast).map(|e| e.value).map_err(value_err)
}

/// Fractional ranks (1 = best, ties averaged) as `{method: rank}`.
#[pyfunction]
fn rank_methods(scores: BTreeMap<String, f64>) -> PyResult<BTreeMap<String, f64>> {
    let scores: Vec<(String, f64)> = scores.into_iter().collect();
    let r = rank(&scores).map_err(value_err)?;
    Ok(r.entries.into_iter().map(|e| (e.method_id, e.rank)).collect())
}

/// Spearman correlation between the rankings induced by two score maps over
/// the same methods. `None` when either ranking is fully tied.
#[pyfunction]
fn spearman(a: BTreeMap<String, f64>, b: BTreeMap<String, f64>) -> PyResult<Option<f64>> {
    let ra = rank(&a.into_iter().collect::<Vec<_>>()).map_err(value_err)?;
    let rb = rank(&b.into_iter().collect::<Vec<_>>()).map_err(value_err)?;
    Ok(ranking::spearman(&ra, &rb).map_err(value_err)?.value())
}

/// A hierarchical dataset with its aggregates and optional prices.
#[pyclass(name = "Dataset", module = "pyhierbench", frozen)]
struct PyDataset {
    inner: HierarchicalDataset,
}

#[pymethods]
impl PyDataset {
    /// Loads the M5 sales, price and calendar files.
    #[staticmethod]
    #[pyo3(signature = (sales, prices, calendar, horizon, levels=None, train_days=None, price_window=28))]
    fn load_m5(
        sales: PathBuf,
        prices: PathBuf,
        calendar: PathBuf,
        horizon: usize,
        levels: Option<Vec<Vec<String>>>,
        train_days: Option<usize>,
        price_window: usize,
    ) -> PyResult<Self> {
        let options = LoadOptions {
            horizon,
            train_days,
            price_window,
            hierarchy: spec_from(levels)?,
        };
        let inner = load_m5(&sales, &prices, &calendar, &options).map_err(value_err)?;
        Ok(PyDataset { inner })
    }

    /// Loads a long-format CSV (`series_id,date,value[,price]` plus
    /// attribute columns).
    #[staticmethod]
    #[pyo3(signature = (path, horizon, levels=None, train_days=None, price_window=28))]
    fn load_long(
        path: PathBuf,
        horizon: usize,
        levels: Option<Vec<Vec<String>>>,
        train_days: Option<usize>,
        price_window: usize,
    ) -> PyResult<Self> {
        let options = LoadOptions {
            horizon,
            train_days,
            price_window,
            hierarchy: spec_from(levels)?,
        };
        Ok(PyDataset {
            inner: load_long(&path, &options).map_err(value_err)?,
        })
    }

    /// Loads the dataset named in a run config.
    #[staticmethod]
    fn from_config(path: PathBuf) -> PyResult<Self> {
        let cfg = RunConfig::load(&path).map_err(value_err)?;
        Ok(PyDataset {
            inner: hierbench::run::load_dataset(&cfg).map_err(value_err)?,
        })
    }

    #[getter]
    fn level_names(&self) -> Vec<String> {
        self.inner.spec().levels().iter().map(|l| l.name.clone()).collect()
    }

    #[getter]
    fn level_counts(&self) -> Vec<usize> {
        self.inner.level_counts()
    }

    #[getter]
    fn n_bottom(&self) -> usize {
        self.inner.bottom().len()
    }

    #[getter]
    fn n_series(&self) -> usize {
        self.inner.series().len()
    }

    #[getter]
    fn n_train(&self) -> usize {
        self.inner.n_train()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn bottom_ids(&self) -> Vec<String> {
        self.inner.bottom().iter().map(|b| b.id.clone()).collect()
    }

    /// `(train, test)` for any series id, or `None` if absent.
    fn series(&self, id: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        self.inner.find(id).map(|s| (s.train.clone(), s.test.clone()))
    }

    /// Random bottom-level halves for a seed, each re-aggregated.
    fn split(&self, seed: u64) -> PyResult<(Self, Self)> {
        let (a, b) = self.inner.split_bottom_half(seed).map_err(value_err)?;
        Ok((PyDataset { inner: a }, PyDataset { inner: b }))
    }

    /// One-series dataset of day-wise totals over the whole hierarchy.
    fn total_aggregate(&self) -> Self {
        PyDataset {
            inner: self.inner.total_aggregate(),
        }
    }

    /// Dollar-sales weights `{series_id: weight}` over the trailing window.
    #[pyo3(signature = (window=None))]
    fn price_weights(&self, window: Option<usize>) -> PyResult<BTreeMap<String, f64>> {
        let prices = self
            .inner
            .prices()
            .ok_or_else(|| PyValueError::new_err("dataset has no prices"))?;
        let w = compute_price_weights(&self.inner, prices, window.unwrap_or(prices.window())).map_err(value_err)?;
        Ok(w.ids.into_iter().zip(w.weights).collect())
    }

    /// Scores one method's bottom-level forecasts (`{id: values}`) under a
    /// measure label such as `"PRICE_RMSSE"` or `"MAE/single_level(1)"`.
    fn score(&self, forecast: BTreeMap<String, Vec<f64>>, measure: &str) -> PyResult<f64> {
        let spec: MeasureSpec = measure.parse().map_err(value_err)?;
        let mut f = ForecastSet::new("forecast");
        f.forecasts.extend(forecast);
        Evaluator::new(&self.inner)
            .score(&f, &spec)
            .map(|s| s.value)
            .map_err(value_err)
    }

    /// Cross-sectional rank stability for `{method: {id: values}}`,
    /// returned as a JSON report.
    #[pyo3(signature = (forecasts, measures=None, splits=76, seed=0, top_ks=None, reference=None))]
    fn stability(
        &self,
        forecasts: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
        measures: Option<Vec<String>>,
        splits: usize,
        seed: u64,
        top_ks: Option<Vec<usize>>,
        reference: Option<Vec<String>>,
    ) -> PyResult<String> {
        let fc = forecast_sets(forecasts);
        let specs = match measures {
            Some(m) => parse_measures(&m)?,
            None => MeasureSpec::standard_set(),
        };
        let reference = reference.map(ReferenceRanking::new).transpose().map_err(value_err)?;
        let study = Study::new(&self.inner, &fc, reference).map_err(value_err)?;
        let top_ks = top_ks.unwrap_or_else(|| vec![fc.len()]);
        let report = study
            .cross_sectional_stability(&specs, splits, seed, &top_ks)
            .map_err(value_err)?;
        to_json(&report)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(levels={:?}, n_train={}, horizon={})",
            self.inner.level_counts(),
            self.inner.n_train(),
            self.inner.horizon()
        )
    }
}

/// Writes the synthetic demo fixture into `dir`; returns the config path.
#[pyfunction]
fn seed_demo(dir: PathBuf) -> PyResult<String> {
    let files = hierbench::demo::seed_demo(&dir).map_err(runtime_err)?;
    Ok(files.config.display().to_string())
}

/// Validates a config and returns the validation report as JSON.
#[pyfunction]
fn validate_config(path: PathBuf) -> PyResult<String> {
    let cfg = RunConfig::load(&path).map_err(value_err)?;
    to_json(&hierbench::validate::validate_config(&cfg).0)
}

/// Runs the experiments of a config, writes its outputs and returns the
/// report as JSON.
#[pyfunction]
#[pyo3(signature = (path, experiment=None, splits=None, seed=None, out_dir=None))]
fn run_config(
    py: Python<'_>,
    path: PathBuf,
    experiment: Option<&str>,
    splits: Option<usize>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
) -> PyResult<String> {
    let mut cfg = RunConfig::load(&path).map_err(value_err)?;
    if let Some(e) = experiment {
        cfg.run.experiment = e.parse::<Experiment>().map_err(value_err)?;
    }
    if let Some(n) = splits {
        cfg.run.splits = n;
    }
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(d) = out_dir {
        cfg.run.out_dir = d;
    }
    cfg.check().map_err(value_err)?;
    let (report, _) = py
        .detach(|| hierbench::run::run_config(&cfg))
        .map_err(runtime_err)?;
    Ok(report.to_json())
}

#[pymodule]
fn pyhierbench(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(rank_methods, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(seed_demo, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_class::<PyDataset>()?;
    Ok(())
}
