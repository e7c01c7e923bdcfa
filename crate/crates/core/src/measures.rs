//! Base error measures, price weighting and cross-series summarization.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MeasureError, PriceError};
use crate::hierarchy::{HierarchicalDataset, HierarchySpec, TimeSeries};
use crate::prices::{compute_price_weights, PriceWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BaseMeasure {
    Mae,
    Smape,
    Mase,
    Rmsse,
    Wape,
}

impl BaseMeasure {
    pub const ALL: [BaseMeasure; 5] = [
        BaseMeasure::Mae,
        BaseMeasure::Mase,
        BaseMeasure::Rmsse,
        BaseMeasure::Smape,
        BaseMeasure::Wape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseMeasure::Mae => "MAE",
            BaseMeasure::Smape => "SMAPE",
            BaseMeasure::Mase => "MASE",
            BaseMeasure::Rmsse => "RMSSE",
            BaseMeasure::Wape => "WAPE",
        }
    }
}

impl fmt::Display for BaseMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseMeasure {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MAE" => Ok(BaseMeasure::Mae),
            "SMAPE" => Ok(BaseMeasure::Smape),
            "MASE" => Ok(BaseMeasure::Mase),
            "RMSSE" => Ok(BaseMeasure::Rmsse),
            "WAPE" => Ok(BaseMeasure::Wape),
            _ => Err(MeasureError::Parse(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    None,
    Price,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Summarization {
    /// Mean over levels of the per-level mean error.
    PerLevelAverage,
    /// Unweighted mean over every series at every level.
    PooledAverage,
    /// One level only (1-based).
    SingleLevel(usize),
    /// `w * top + (1 - w) * bottom` using levels 1 and k.
    TwoLevelWeighted(f64),
}

impl fmt::Display for Summarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Summarization::PerLevelAverage => f.write_str("per_level_average"),
            Summarization::PooledAverage => f.write_str("pooled_average"),
            Summarization::SingleLevel(j) => write!(f, "single_level({j})"),
            Summarization::TwoLevelWeighted(w) => write!(f, "two_level_weighted({w})"),
        }
    }
}

impl FromStr for Summarization {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || MeasureError::Parse(s.to_string());
        let arg = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::trim)
        };
        match s {
            "per_level_average" => Ok(Summarization::PerLevelAverage),
            "pooled_average" => Ok(Summarization::PooledAverage),
            _ => {
                if let Some(a) = arg("single_level") {
                    let j: usize = a.parse().map_err(|_| err())?;
                    if j == 0 {
                        return Err(err());
                    }
                    Ok(Summarization::SingleLevel(j))
                } else if let Some(a) = arg("two_level_weighted") {
                    let w: f64 = a.parse().map_err(|_| err())?;
                    if !(0.0..=1.0).contains(&w) {
                        return Err(MeasureError::WeightOutOfRange(w));
                    }
                    Ok(Summarization::TwoLevelWeighted(w))
                } else {
                    Err(err())
                }
            }
        }
    }
}

/// A base measure plus how per-series errors are weighted and combined.
///
/// Textual form is `[PRICE_]BASE[/summarization]`, e.g. `PRICE_RMSSE`,
/// `MASE/pooled_average` or `PRICE_MAE/single_level(12)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub base: BaseMeasure,
    pub weighting: Weighting,
    pub summarization: Summarization,
}

impl MeasureSpec {
    pub fn new(base: BaseMeasure, weighting: Weighting, summarization: Summarization) -> Self {
        MeasureSpec {
            base,
            weighting,
            summarization,
        }
    }

    pub fn plain(base: BaseMeasure) -> Self {
        Self::new(base, Weighting::None, Summarization::PerLevelAverage)
    }

    pub fn price(base: BaseMeasure) -> Self {
        Self::new(base, Weighting::Price, Summarization::PerLevelAverage)
    }

    pub fn with_summarization(self, summarization: Summarization) -> Self {
        MeasureSpec {
            summarization,
            ..self
        }
    }

    /// Short name without the summarization, e.g. `PRICE_RMSSE`.
    pub fn label(&self) -> String {
        match self.weighting {
            Weighting::None => self.base.name().to_string(),
            Weighting::Price => format!("PRICE_{}", self.base.name()),
        }
    }

    /// The nine measures compared throughout: the five base measures and
    /// the price-weighted MAE, MASE, RMSSE and SMAPE.
    pub fn standard_set() -> Vec<MeasureSpec> {
        use BaseMeasure::*;
        let mut out: Vec<_> = [Mae, Mase, Rmsse, Smape, Wape].into_iter().map(Self::plain).collect();
        out.extend([Mae, Mase, Rmsse, Smape].into_iter().map(Self::price));
        out
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.label(), self.summarization)
    }
}

impl FromStr for MeasureSpec {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, summ) = match s.split_once('/') {
            Some((n, r)) => (n.trim(), r.parse()?),
            None => (s.trim(), Summarization::PerLevelAverage),
        };
        let upper = name.to_ascii_uppercase();
        let (weighting, base) = match upper.strip_prefix("PRICE_") {
            Some(rest) => (Weighting::Price, rest),
            None => (Weighting::None, upper.as_str()),
        };
        let base = base.parse().map_err(|_| MeasureError::Parse(s.to_string()))?;
        Ok(MeasureSpec::new(base, weighting, summ))
    }
}

/// One method's bottom-level forecasts over the test horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSet {
    pub method_id: String,
    pub forecasts: BTreeMap<String, Vec<f64>>,
}

impl ForecastSet {
    pub fn new(method_id: impl Into<String>) -> Self {
        ForecastSet {
            method_id: method_id.into(),
            forecasts: BTreeMap::new(),
        }
    }

    /// Forecasts for test days `[start, end)`.
    pub fn window(&self, range: Range<usize>) -> ForecastSet {
        ForecastSet {
            method_id: self.method_id.clone(),
            forecasts: self
                .forecasts
                .iter()
                .map(|(k, v)| (k.clone(), v[range.start.min(v.len())..range.end.min(v.len())].to_vec()))
                .collect(),
        }
    }

    /// Every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> ForecastSet {
        ForecastSet {
            method_id: self.method_id.clone(),
            forecasts: self
                .forecasts
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x * c).collect()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesError {
    pub series_id: String,
    pub level: usize,
    pub value: f64,
}

/// Scale denominators that depend only on actuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesScale {
    /// Mean absolute one-step difference over the training history.
    pub naive_abs: f64,
    /// Mean squared one-step difference over the training history.
    pub naive_sq: f64,
    /// Sum of absolute test actuals.
    pub test_abs: f64,
}

impl SeriesScale {
    pub fn of(series: &TimeSeries) -> Self {
        let diffs = series.train.windows(2).map(|w| w[1] - w[0]);
        let count = (series.train.len() - 1) as f64;
        let (abs, sq) = diffs.fold((0.0, 0.0), |(a, s), d| (a + d.abs(), s + d * d));
        SeriesScale {
            naive_abs: abs / count,
            naive_sq: sq / count,
            test_abs: series.test.iter().map(|y| y.abs()).sum(),
        }
    }
}

/// Error of one series under `base`, or `None` when its scale is zero.
fn base_error(base: BaseMeasure, actual: &[f64], forecast: &[f64], scale: &SeriesScale) -> Option<f64> {
    let h = actual.len() as f64;
    let pairs = || actual.iter().zip(forecast);
    match base {
        BaseMeasure::Mae => Some(pairs().map(|(y, f)| (y - f).abs()).sum::<f64>() / h),
        BaseMeasure::Smape => Some(
            200.0 / h
                * pairs()
                    .map(|(y, f)| {
                        let den = y.abs() + f.abs();
                        if den == 0.0 {
                            0.0
                        } else {
                            (y - f).abs() / den
                        }
                    })
                    .sum::<f64>(),
        ),
        BaseMeasure::Mase => (scale.naive_abs > 0.0)
            .then(|| pairs().map(|(y, f)| (y - f).abs()).sum::<f64>() / h / scale.naive_abs),
        BaseMeasure::Rmsse => (scale.naive_sq > 0.0).then(|| {
            (pairs().map(|(y, f)| (y - f) * (y - f)).sum::<f64>() / h / scale.naive_sq).sqrt()
        }),
        BaseMeasure::Wape => (scale.test_abs > 0.0)
            .then(|| pairs().map(|(y, f)| (y - f).abs()).sum::<f64>() / scale.test_abs),
    }
}

fn single(series: &TimeSeries, forecast: &[f64], base: BaseMeasure) -> Result<SeriesError, MeasureError> {
    if forecast.len() != series.test.len() {
        return Err(MeasureError::LengthMismatch {
            series: series.id.clone(),
            expected: series.test.len(),
            got: forecast.len(),
        });
    }
    let scale = SeriesScale::of(series);
    base_error(base, &series.test, forecast, &scale)
        .map(|value| SeriesError {
            series_id: series.id.clone(),
            level: series.level,
            value,
        })
        .ok_or_else(|| MeasureError::ZeroScale {
            series: series.id.clone(),
            measure: base,
        })
}

pub fn mae(series: &TimeSeries, forecast: &[f64]) -> Result<SeriesError, MeasureError> {
    single(series, forecast, BaseMeasure::Mae)
}

/// Terms where actual and forecast are both zero count as 0.
pub fn smape(series: &TimeSeries, forecast: &[f64]) -> Result<SeriesError, MeasureError> {
    single(series, forecast, BaseMeasure::Smape)
}

pub fn mase(series: &TimeSeries, forecast: &[f64]) -> Result<SeriesError, MeasureError> {
    single(series, forecast, BaseMeasure::Mase)
}

pub fn rmsse(series: &TimeSeries, forecast: &[f64]) -> Result<SeriesError, MeasureError> {
    single(series, forecast, BaseMeasure::Rmsse)
}

pub fn wape(series: &TimeSeries, forecast: &[f64]) -> Result<SeriesError, MeasureError> {
    single(series, forecast, BaseMeasure::Wape)
}

pub fn series_error(base: BaseMeasure, series: &TimeSeries, forecast: &[f64]) -> Result<SeriesError, MeasureError> {
    single(series, forecast, base)
}

/// `sum_i w_i * e_i`. Series missing from `errors` (zero scale) simply
/// contribute nothing; their weight is not redistributed.
pub fn price_weighted_total(errors: &[SeriesError], weights: &PriceWeights) -> Result<f64, MeasureError> {
    let index: BTreeMap<&str, f64> = weights
        .ids
        .iter()
        .map(String::as_str)
        .zip(weights.weights.iter().copied())
        .collect();
    errors.iter().try_fold(0.0, |acc, e| {
        index
            .get(e.series_id.as_str())
            .map(|w| acc + w * e.value)
            .ok_or_else(|| MeasureError::MissingWeight(e.series_id.clone()))
    })
}

/// Mean over levels of the per-level mean error.
pub fn per_level_average(errors: &[SeriesError], spec: &HierarchySpec) -> Result<f64, MeasureError> {
    let k = spec.k();
    let mut sums = vec![(0.0, 0usize); k];
    for e in errors {
        if e.level == 0 || e.level > k {
            return Err(MeasureError::LevelOutOfRange { level: e.level, levels: k });
        }
        let slot = &mut sums[e.level - 1];
        slot.0 += e.value;
        slot.1 += 1;
    }
    let mut total = 0.0;
    for (j, (sum, count)) in sums.into_iter().enumerate() {
        if count == 0 {
            return Err(MeasureError::LevelExcluded(j + 1));
        }
        total += sum / count as f64;
    }
    Ok(total / k as f64)
}

pub fn pooled_average(errors: &[SeriesError]) -> Result<f64, MeasureError> {
    if errors.is_empty() {
        return Err(MeasureError::AllExcluded);
    }
    Ok(errors.iter().map(|e| e.value).sum::<f64>() / errors.len() as f64)
}

pub fn two_level_weighted(e_top: f64, e_bottom: f64, w: f64) -> Result<f64, MeasureError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(MeasureError::WeightOutOfRange(w));
    }
    Ok(w * e_top + (1.0 - w) * e_bottom)
}

/// A summarized error together with how many series were excluded for a
/// zero scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Score {
    pub value: f64,
    pub excluded: usize,
}

/// Scores forecasts against one dataset. Scales and price weights are
/// computed once at construction.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    dataset: &'a HierarchicalDataset,
    scales: Vec<SeriesScale>,
    weights: Result<PriceWeights, PriceError>,
}

impl<'a> Evaluator<'a> {
    /// Uses the dataset's own price table (if any) over its full window.
    pub fn new(dataset: &'a HierarchicalDataset) -> Self {
        let weights = match dataset.prices() {
            Some(p) => compute_price_weights(dataset, p, p.window().min(dataset.n_train())),
            None => Err(PriceError::NoPrices),
        };
        Self::with_weights(dataset, weights)
    }

    pub fn with_weights(dataset: &'a HierarchicalDataset, weights: Result<PriceWeights, PriceError>) -> Self {
        let scales = dataset.series().iter().map(SeriesScale::of).collect();
        Evaluator {
            dataset,
            scales,
            weights,
        }
    }

    pub fn dataset(&self) -> &HierarchicalDataset {
        self.dataset
    }

    pub fn weights(&self) -> Result<&PriceWeights, &PriceError> {
        self.weights.as_ref()
    }

    pub fn scales(&self) -> &[SeriesScale] {
        &self.scales
    }

    /// Per-series errors for aggregated forecasts in dataset series order,
    /// restricted to `range`; `None` marks a zero-scale series.
    pub fn errors_in(&self, aggregated: &[Vec<f64>], base: BaseMeasure, range: Range<usize>) -> Vec<Option<f64>> {
        let series = self.dataset.series();
        range
            .map(|i| base_error(base, &series[i].test, &aggregated[i], &self.scales[i]))
            .collect()
    }

    pub fn errors(&self, aggregated: &[Vec<f64>], base: BaseMeasure) -> Vec<Option<f64>> {
        self.errors_in(aggregated, base, 0..self.dataset.series().len())
    }

    /// Per-series errors as [`SeriesError`] values, dropping zero-scale
    /// series.
    pub fn series_errors(&self, forecast: &ForecastSet, base: BaseMeasure) -> Result<Vec<SeriesError>, MeasureError> {
        let agg = self.dataset.aggregate_forecast(forecast)?;
        Ok(self
            .errors(&agg, base)
            .into_iter()
            .zip(self.dataset.series())
            .filter_map(|(e, s)| {
                e.map(|value| SeriesError {
                    series_id: s.id.clone(),
                    level: s.level,
                    value,
                })
            })
            .collect())
    }

    fn level_mean(&self, errors: &[Option<f64>], offset: usize, level: usize, weighted: bool) -> Result<(f64, usize), MeasureError> {
        let k = self.dataset.k();
        if level == 0 || level > k {
            return Err(MeasureError::LevelOutOfRange { level, levels: k });
        }
        let range = self.dataset.level_range(level);
        let slice = &errors[range.start - offset..range.end - offset];
        let excluded = slice.iter().filter(|e| e.is_none()).count();
        if excluded == slice.len() {
            return Err(MeasureError::LevelExcluded(level));
        }
        let value = if weighted {
            let w = self.weights.as_ref().map_err(|e| e.clone())?;
            let kf = k as f64;
            slice
                .iter()
                .zip(&w.weights[range])
                .filter_map(|(e, w)| e.map(|e| kf * w * e))
                .sum()
        } else {
            let vals: Vec<f64> = slice.iter().flatten().copied().collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        Ok((value, excluded))
    }

    /// Combines per-series errors covering series `offset..offset + len`
    /// according to `spec`. Errors must cover every level the measure scores.
    pub fn summarize_from(&self, errors: &[Option<f64>], offset: usize, spec: &MeasureSpec) -> Result<Score, MeasureError> {
        let weighted = spec.weighting == Weighting::Price;
        let k = self.dataset.k();
        match spec.summarization {
            Summarization::SingleLevel(j) => {
                let (value, excluded) = self.level_mean(errors, offset, j, weighted)?;
                Ok(Score { value, excluded })
            }
            Summarization::TwoLevelWeighted(w) => {
                let (top, ex_top) = self.level_mean(errors, offset, 1, weighted)?;
                let (bottom, ex_bottom) = self.level_mean(errors, offset, k, weighted)?;
                let value = two_level_weighted(top, bottom, w)?;
                let excluded = if k == 1 { ex_top } else { ex_top + ex_bottom };
                Ok(Score { value, excluded })
            }
            Summarization::PerLevelAverage | Summarization::PooledAverage if weighted => {
                // Global weights already carry the 1/k factor, so both schemes
                // reduce to sum_i w_i * e_i.
                let w = self.weights.as_ref().map_err(|e| e.clone())?;
                let excluded = errors.iter().filter(|e| e.is_none()).count();
                if excluded == errors.len() {
                    return Err(MeasureError::AllExcluded);
                }
                let value = errors
                    .iter()
                    .zip(&w.weights[offset..])
                    .filter_map(|(e, w)| e.map(|e| w * e))
                    .sum();
                Ok(Score { value, excluded })
            }
            Summarization::PerLevelAverage => {
                let mut total = 0.0;
                let mut excluded = 0;
                for j in 1..=k {
                    let (v, ex) = self.level_mean(errors, offset, j, false)?;
                    total += v;
                    excluded += ex;
                }
                Ok(Score {
                    value: total / k as f64,
                    excluded,
                })
            }
            Summarization::PooledAverage => {
                let vals: Vec<f64> = errors.iter().flatten().copied().collect();
                if vals.is_empty() {
                    return Err(MeasureError::AllExcluded);
                }
                Ok(Score {
                    value: vals.iter().sum::<f64>() / vals.len() as f64,
                    excluded: errors.len() - vals.len(),
                })
            }
        }
    }

    pub fn summarize(&self, errors: &[Option<f64>], spec: &MeasureSpec) -> Result<Score, MeasureError> {
        self.summarize_from(errors, 0, spec)
    }

    /// Series index range a spec actually reads.
    pub fn scope(&self, spec: &MeasureSpec) -> Range<usize> {
        match spec.summarization {
            Summarization::SingleLevel(j) if j >= 1 && j <= self.dataset.k() => self.dataset.level_range(j),
            _ => 0..self.dataset.series().len(),
        }
    }

    pub fn score_aggregated(&self, aggregated: &[Vec<f64>], spec: &MeasureSpec) -> Result<Score, MeasureError> {
        let scope = self.scope(spec);
        let offset = scope.start;
        let errors = self.errors_in(aggregated, spec.base, scope);
        self.summarize_from(&errors, offset, spec)
    }

    pub fn score(&self, forecast: &ForecastSet, spec: &MeasureSpec) -> Result<Score, MeasureError> {
        let agg = self.dataset.aggregate_forecast(forecast)?;
        self.score_aggregated(&agg, spec)
    }

    /// Scores every method under every spec; forecasts are aggregated once
    /// per method and per-series errors once per base measure.
    pub fn score_methods(&self, forecasts: &[ForecastSet], specs: &[MeasureSpec]) -> ScoreTable {
        let per_method: Vec<Vec<Result<Score, MeasureError>>> = forecasts
            .par_iter()
            .map(|f| match self.dataset.aggregate_forecast(f) {
                Err(e) => specs.iter().map(|_| Err(e.clone())).collect(),
                Ok(agg) => {
                    let mut cache: BTreeMap<BaseMeasure, Vec<Option<f64>>> = BTreeMap::new();
                    specs
                        .iter()
                        .map(|spec| {
                            let errors = cache.entry(spec.base).or_insert_with(|| self.errors(&agg, spec.base));
                            self.summarize(errors, spec)
                        })
                        .collect()
                }
            })
            .collect();
        let cells = (0..specs.len())
            .map(|s| per_method.iter().map(|row| row[s].clone()).collect())
            .collect();
        ScoreTable {
            methods: forecasts.iter().map(|f| f.method_id.clone()).collect(),
            specs: specs.to_vec(),
            cells,
        }
    }
}

/// Scores indexed `[spec][method]`.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    pub specs: Vec<MeasureSpec>,
    pub cells: Vec<Vec<Result<Score, MeasureError>>>,
}

impl ScoreTable {
    /// `(method, value)` pairs for one spec, or the first failure.
    pub fn scores(&self, spec_index: usize) -> Result<Vec<(String, f64)>, MeasureError> {
        self.methods
            .iter()
            .zip(&self.cells[spec_index])
            .map(|(m, c)| c.as_ref().map(|s| (m.clone(), s.value)).map_err(Clone::clone))
            .collect()
    }

    /// Largest exclusion count across methods for one spec.
    pub fn excluded(&self, spec_index: usize) -> usize {
        self.cells[spec_index]
            .iter()
            .filter_map(|c| c.as_ref().ok().map(|s| s.excluded))
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_hierarchy, BottomSeries};
    use crate::prices::PriceTable;

    fn ts(train: &[f64], test: &[f64]) -> TimeSeries {
        TimeSeries {
            id: "s".into(),
            level: 1,
            train: train.to_vec(),
            test: test.to_vec(),
        }
    }

    fn value(r: Result<SeriesError, MeasureError>) -> f64 {
        r.unwrap().value
    }

    #[test]
    fn mae_examples() {
        assert_eq!(value(mae(&ts(&[0.0, 1.0], &[1.0, 2.0, 3.0]), &[1.0, 2.0, 3.0])), 0.0);
        assert_eq!(value(mae(&ts(&[0.0, 1.0], &[2.0, 2.0]), &[1.0, 3.0])), 1.0);
        assert_eq!(value(mae(&ts(&[0.0, 1.0], &[0.0, 0.0]), &[1.0, 1.0])), 1.0);
    }

    #[test]
    fn smape_examples() {
        assert_eq!(value(smape(&ts(&[0.0, 1.0], &[2.0]), &[0.0])), 200.0);
        assert_eq!(value(smape(&ts(&[0.0, 1.0], &[0.0]), &[0.0])), 0.0);
        assert_eq!(value(smape(&ts(&[0.0, 1.0], &[1.0, 1.0]), &[1.0, 3.0])), 50.0);
        // negative forecasts stay bounded
        assert_eq!(value(smape(&ts(&[0.0, 1.0], &[1.0]), &[-1.0])), 200.0);
    }

    #[test]
    fn mase_examples() {
        let s = ts(&[1.0, 2.0, 3.0, 4.0], &[5.0]);
        assert_eq!(value(mase(&s, &[4.0])), 1.0);
        assert_eq!(value(mase(&s, &[5.0])), 0.0);
        let flat = ts(&[3.0, 3.0, 3.0], &[5.0]);
        assert!(matches!(mase(&flat, &[4.0]), Err(MeasureError::ZeroScale { measure: BaseMeasure::Mase, .. })));
    }

    #[test]
    fn rmsse_examples() {
        assert_eq!(value(rmsse(&ts(&[1.0, 2.0, 3.0, 4.0], &[5.0]), &[4.0])), 1.0);
        assert_eq!(value(rmsse(&ts(&[1.0, 2.0, 3.0, 4.0], &[5.0]), &[5.0])), 0.0);
        assert_eq!(value(rmsse(&ts(&[0.0, 2.0, 0.0, 2.0], &[0.0, 0.0]), &[2.0, 2.0])), 1.0);
        assert!(rmsse(&ts(&[1.0, 1.0], &[5.0]), &[4.0]).is_err());
    }

    #[test]
    fn wape_examples() {
        assert_eq!(value(wape(&ts(&[0.0, 1.0], &[2.0, 2.0]), &[1.0, 3.0])), 0.5);
        assert_eq!(value(wape(&ts(&[0.0, 1.0], &[2.0, 2.0]), &[2.0, 2.0])), 0.0);
        assert!(matches!(
            wape(&ts(&[0.0, 1.0], &[0.0, 0.0]), &[1.0, 1.0]),
            Err(MeasureError::ZeroScale { measure: BaseMeasure::Wape, .. })
        ));
    }

    #[test]
    fn length_mismatch_is_reported() {
        assert!(matches!(
            mae(&ts(&[0.0, 1.0], &[1.0, 2.0]), &[1.0]),
            Err(MeasureError::LengthMismatch { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn weighted_total_examples() {
        let w = PriceWeights {
            ids: vec!["a".into(), "b".into()],
            weights: vec![0.5, 0.5],
            dollar_sales: vec![1.0, 1.0],
            total: 2.0,
            k: 1,
            missing_price_days: 0,
        };
        let e = |id: &str, v| SeriesError {
            series_id: id.into(),
            level: 1,
            value: v,
        };
        assert_eq!(price_weighted_total(&[e("a", 1.0), e("b", 3.0)], &w).unwrap(), 2.0);
        let one = PriceWeights {
            ids: vec!["a".into()],
            weights: vec![1.0],
            ..w.clone()
        };
        assert_eq!(price_weighted_total(&[e("a", 0.7)], &one).unwrap(), 0.7);
        assert!(matches!(
            price_weighted_total(&[e("zzz", 1.0)], &w),
            Err(MeasureError::MissingWeight(_))
        ));
    }

    #[test]
    fn level_and_pooled_averages() {
        let e = |level, v| SeriesError {
            series_id: String::new(),
            level,
            value: v,
        };
        let spec = HierarchySpec::total_and_bottom();
        assert_eq!(per_level_average(&[e(1, 1.0), e(2, 2.0), e(2, 4.0)], &spec).unwrap(), 2.0);
        assert_eq!(pooled_average(&[e(1, 1.0), e(2, 2.0), e(2, 3.0)]).unwrap(), 2.0);
        assert!(matches!(
            per_level_average(&[e(1, 1.0)], &spec),
            Err(MeasureError::LevelExcluded(2))
        ));
        let one = HierarchySpec::identity();
        assert_eq!(per_level_average(&[e(1, 1.0), e(1, 2.0)], &one).unwrap(), 1.5);
        assert_eq!(pooled_average(&[e(1, 0.4)]).unwrap(), 0.4);
        assert!(pooled_average(&[]).is_err());
    }

    #[test]
    fn two_level_examples() {
        assert_eq!(two_level_weighted(2.0, 4.0, 0.0).unwrap(), 4.0);
        assert_eq!(two_level_weighted(2.0, 4.0, 1.0).unwrap(), 2.0);
        assert_eq!(two_level_weighted(2.0, 4.0, 0.5).unwrap(), 3.0);
        assert!(two_level_weighted(2.0, 4.0, 1.5).is_err());
        // importance of the top series relative to an average bottom series
        let w: f64 = 0.05;
        let ratio = w / ((1.0 - w) / 30490.0);
        assert!((ratio - 1604.7).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn measure_spec_round_trips_through_text() {
        for s in [
            "MAE/per_level_average",
            "PRICE_RMSSE/per_level_average",
            "SMAPE/pooled_average",
            "PRICE_MASE/single_level(12)",
            "PRICE_RMSSE/two_level_weighted(0.05)",
        ] {
            let spec: MeasureSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        let spec: MeasureSpec = "price_rmsse".parse().unwrap();
        assert_eq!(spec, MeasureSpec::price(BaseMeasure::Rmsse));
        assert!("RMSE".parse::<MeasureSpec>().is_err());
        assert!("MAE/single_level(0)".parse::<MeasureSpec>().is_err());
        assert!("MAE/two_level_weighted(2)".parse::<MeasureSpec>().is_err());
    }

    fn small_dataset() -> HierarchicalDataset {
        let b = vec![
            BottomSeries::new("a", vec![1.0, 2.0, 4.0], vec![2.0, 2.0]),
            BottomSeries::new("b", vec![3.0, 3.0, 3.0], vec![1.0, 0.0]),
        ];
        let mut p = PriceTable::new(2);
        p.insert_constant("a", 1.0);
        p.insert_constant("b", 2.0);
        build_hierarchy(b, HierarchySpec::total_and_bottom()).unwrap().with_prices(p)
    }

    #[test]
    fn evaluator_excludes_zero_scale_series() {
        let ds = small_dataset();
        let ev = Evaluator::new(&ds);
        let mut f = ForecastSet::new("m");
        f.forecasts.insert("a".into(), vec![1.0, 3.0]);
        f.forecasts.insert("b".into(), vec![1.0, 1.0]);
        // b has a constant history, so MASE drops it
        let s = ev.score(&f, &MeasureSpec::plain(BaseMeasure::Mase)).unwrap();
        assert_eq!(s.excluded, 1);
        let top = mase(&ds.series()[0], &[2.0, 4.0]).unwrap().value;
        let a = mase(&ds.series()[1], &[1.0, 3.0]).unwrap().value;
        assert!((s.value - (top + a) / 2.0).abs() < 1e-15);

        let p = ev.score(&f, &MeasureSpec::price(BaseMeasure::Mase)).unwrap();
        let w = ev.weights().unwrap();
        assert!((p.value - (w.weights[0] * top + w.weights[1] * a)).abs() < 1e-15);
    }

    #[test]
    fn evaluator_matches_free_functions() {
        let ds = small_dataset();
        let ev = Evaluator::new(&ds);
        let mut f = ForecastSet::new("m");
        f.forecasts.insert("a".into(), vec![1.5, 3.0]);
        f.forecasts.insert("b".into(), vec![0.5, 1.0]);
        let errors = ev.series_errors(&f, BaseMeasure::Mae).unwrap();
        let plain = ev.score(&f, &MeasureSpec::plain(BaseMeasure::Mae)).unwrap().value;
        assert_eq!(plain, per_level_average(&errors, ds.spec()).unwrap());
        let pooled = ev
            .score(&f, &MeasureSpec::plain(BaseMeasure::Mae).with_summarization(Summarization::PooledAverage))
            .unwrap()
            .value;
        assert_eq!(pooled, pooled_average(&errors).unwrap());
        let price = ev.score(&f, &MeasureSpec::price(BaseMeasure::Mae)).unwrap().value;
        assert!((price - price_weighted_total(&errors, ev.weights().unwrap()).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn price_measures_need_prices() {
        let b = vec![BottomSeries::new("a", vec![1.0, 2.0], vec![1.0])];
        let ds = build_hierarchy(b, HierarchySpec::identity()).unwrap();
        let ev = Evaluator::new(&ds);
        let mut f = ForecastSet::new("m");
        f.forecasts.insert("a".into(), vec![1.0]);
        assert!(matches!(
            ev.score(&f, &MeasureSpec::price(BaseMeasure::Mae)),
            Err(MeasureError::Weights(PriceError::NoPrices))
        ));
    }
}
