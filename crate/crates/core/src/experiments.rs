//! Rank-stability experiments.
//!
//! Every split-based experiment draws its halves from
//! [`crate::seed::split_seeds`], so for a given master seed all measures,
//! levels and sweep weights are evaluated on identical half datasets.
//! Splits run in parallel; results are collected in split order and do not
//! depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{ExperimentError, MeasureError};
use crate::hierarchy::HierarchicalDataset;
use crate::measures::{BaseMeasure, Evaluator, ForecastSet, MeasureSpec, ScoreTable, Summarization};
use crate::ranking::{rank_methods, spearman, top_k_subset, ReferenceRanking, Similarity};
use crate::seed::split_seeds;

/// Number of random half splits used unless configured otherwise.
pub const DEFAULT_SPLITS: usize = 76;
/// Points in the multiplier grid searched for magic numbers.
pub const MAGIC_GRID_POINTS: usize = 500;

/// `points` equally spaced values from `lo` to `hi`, both included.
pub fn linear_grid(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let last = (points - 1) as f64;
            (0..points).map(|i| lo + (hi - lo) * i as f64 / last).collect()
        }
    }
}

/// The default magic-number grid: 500 points over `[0, 2]`.
pub fn magic_grid() -> Vec<f64> {
    linear_grid(MAGIC_GRID_POINTS, 0.0, 2.0)
}

/// Result of comparing two rankings once.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Value(f64),
    /// A ranking had every method tied; reported as `*`.
    Degenerate,
    /// Scoring failed (for instance a level with only zero-scale series).
    Failed(String),
}

impl Outcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            Outcome::Value(v) => Some(*v),
            _ => None,
        }
    }

    /// Table cell text: two decimals, `*` for degenerate, `NA` for failures.
    pub fn cell(&self) -> String {
        match self {
            Outcome::Value(v) => format!("{v:.6}"),
            Outcome::Degenerate => "*".into(),
            Outcome::Failed(_) => "NA".into(),
        }
    }
}

impl From<Similarity> for Outcome {
    fn from(s: Similarity) -> Self {
        match s {
            Similarity::Value(v) => Outcome::Value(v),
            Similarity::Degenerate => Outcome::Degenerate,
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        match self {
            Outcome::Value(v) => s.serialize_f64(*v),
            Outcome::Degenerate => s.serialize_str("*"),
            Outcome::Failed(msg) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("failed", msg)?;
                m.end()
            }
        }
    }
}

/// Per-split correlations and their mean over the non-degenerate,
/// non-failed splits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCell {
    pub mean: Option<f64>,
    pub valid: usize,
    pub degenerate: usize,
    pub failed: usize,
    pub per_split: Vec<Outcome>,
}

impl StabilityCell {
    pub fn from_outcomes(per_split: Vec<Outcome>) -> Self {
        let values: Vec<f64> = per_split.iter().filter_map(Outcome::value).collect();
        let degenerate = per_split.iter().filter(|o| **o == Outcome::Degenerate).count();
        let failed = per_split.len() - values.len() - degenerate;
        let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
        StabilityCell {
            mean,
            valid: values.len(),
            degenerate,
            failed,
            per_split,
        }
    }

    pub fn cell(&self) -> String {
        match self.mean {
            Some(m) => format!("{m:.6}"),
            None if self.degenerate > 0 => "*".into(),
            None => "NA".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopKStability {
    pub top_k: usize,
    #[serde(flatten)]
    pub cell: StabilityCell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureStability {
    pub measure: String,
    pub by_top_k: Vec<TopKStability>,
    /// Zero-scale exclusions per split, `[half A, half B]`.
    pub exclusions: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub seeds: Vec<u64>,
    pub top_ks: Vec<usize>,
    pub measures: Vec<MeasureStability>,
}

impl StabilityReport {
    pub fn mean(&self, measure: usize, top_k: usize) -> Option<f64> {
        self.measures[measure]
            .by_top_k
            .iter()
            .find(|t| t.top_k == top_k)
            .and_then(|t| t.cell.mean)
    }

    pub fn cell(&self, measure: usize, top_k: usize) -> Option<&StabilityCell> {
        self.measures[measure].by_top_k.iter().find(|t| t.top_k == top_k).map(|t| &t.cell)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub name: String,
    pub cells: Vec<StabilityCell>,
}

/// Level x measure stability table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerLevelReport {
    pub top_k: usize,
    pub seeds: Vec<u64>,
    pub measures: Vec<String>,
    pub levels: Vec<LevelRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalRow {
    pub measure: String,
    pub overall: Outcome,
    pub per_level: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalReport {
    pub cut: usize,
    pub top_k: usize,
    pub level_names: Vec<String>,
    pub rows: Vec<TemporalRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagicNumber {
    pub multiplier: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodMultiplier {
    pub method: String,
    /// `None` when every grid point scored the same.
    pub multiplier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MagicResult {
    pub measure: String,
    pub level: usize,
    pub multipliers: Vec<MethodMultiplier>,
    pub similarity: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityMatrix {
    pub measures: Vec<String>,
    pub cells: Vec<Vec<Outcome>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub w: f64,
    pub stability: Option<f64>,
    pub valid: usize,
    pub degenerate: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCurve {
    pub top_k: usize,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub measure: String,
    pub seeds: Vec<u64>,
    pub curves: Vec<SweepCurve>,
}

#[derive(Clone, Copy, PartialEq)]
enum HalfView {
    AsIs,
    Total,
}

/// Outcomes `[spec][top_k][split]` plus exclusions `[spec][split]`.
struct SplitRun {
    seeds: Vec<u64>,
    outcomes: Vec<Vec<Vec<Outcome>>>,
    exclusions: Vec<Vec<[usize; 2]>>,
}

/// A dataset, the methods' bottom-level forecasts and the reference order
/// used for Top-K subsets.
#[derive(Debug, Clone)]
pub struct Study<'a> {
    dataset: &'a HierarchicalDataset,
    forecasts: &'a [ForecastSet],
    reference: ReferenceRanking,
}

impl<'a> Study<'a> {
    /// Checks that every forecast covers every bottom series. Without an
    /// explicit reference the forecasts' own order is used.
    pub fn new(
        dataset: &'a HierarchicalDataset,
        forecasts: &'a [ForecastSet],
        reference: Option<ReferenceRanking>,
    ) -> Result<Self, ExperimentError> {
        if forecasts.len() < 2 {
            return Err(ExperimentError::NoMethods);
        }
        for f in forecasts {
            dataset.bottom_forecasts(f)?;
        }
        let reference = match reference {
            Some(r) => r,
            None => ReferenceRanking::new(forecasts.iter().map(|f| f.method_id.clone()).collect())?,
        };
        Ok(Study {
            dataset,
            forecasts,
            reference,
        })
    }

    pub fn dataset(&self) -> &HierarchicalDataset {
        self.dataset
    }

    pub fn forecasts(&self) -> &[ForecastSet] {
        self.forecasts
    }

    pub fn reference(&self) -> &ReferenceRanking {
        &self.reference
    }

    fn check_top_ks(&self, top_ks: &[usize]) -> Result<(), ExperimentError> {
        if top_ks.is_empty() {
            return Err(ExperimentError::Invalid("no Top-K subsets requested".into()));
        }
        for &k in top_ks {
            if k < 2 {
                return Err(ExperimentError::Invalid(format!("Top-{k} has fewer than 2 methods")));
            }
            for id in self.reference.top(k)? {
                if !self.forecasts.iter().any(|f| &f.method_id == id) {
                    return Err(ExperimentError::Invalid(format!(
                        "reference method `{id}` has no forecasts"
                    )));
                }
            }
        }
        Ok(())
    }

    fn score_half(&self, half: &HierarchicalDataset, view: HalfView, specs: &[MeasureSpec]) -> Result<ScoreTable, ExperimentError> {
        match view {
            HalfView::AsIs => Ok(Evaluator::new(half).score_methods(self.forecasts, specs)),
            HalfView::Total => {
                let total = half.total_aggregate();
                let forecasts = self
                    .forecasts
                    .iter()
                    .map(|f| half.total_aggregate_forecast(f))
                    .collect::<Result<Vec<_>, MeasureError>>()?;
                Ok(Evaluator::new(&total).score_methods(&forecasts, specs))
            }
        }
    }

    fn run_splits(
        &self,
        n_splits: usize,
        seed: u64,
        specs: &[MeasureSpec],
        top_ks: &[usize],
        view: HalfView,
    ) -> Result<SplitRun, ExperimentError> {
        if n_splits == 0 {
            return Err(ExperimentError::Invalid("n_splits must be at least 1".into()));
        }
        self.check_top_ks(top_ks)?;
        let seeds = split_seeds(seed, n_splits);
        type PerSplit = (Vec<Vec<Outcome>>, Vec<[usize; 2]>);
        let per_split: Vec<PerSplit> = seeds
            .par_iter()
            .map(|&s| {
                let (a, b) = self.dataset.split_bottom_half(s)?;
                let ta = self.score_half(&a, view, specs)?;
                let tb = self.score_half(&b, view, specs)?;
                let outcomes = (0..specs.len())
                    .map(|si| top_ks.iter().map(|&k| self.compare(&ta, &tb, si, k)).collect())
                    .collect();
                let excl = (0..specs.len()).map(|si| [ta.excluded(si), tb.excluded(si)]).collect();
                Ok((outcomes, excl))
            })
            .collect::<Result<_, ExperimentError>>()?;

        let outcomes = (0..specs.len())
            .map(|si| {
                (0..top_ks.len())
                    .map(|ki| per_split.iter().map(|(o, _)| o[si][ki].clone()).collect())
                    .collect()
            })
            .collect();
        let exclusions = (0..specs.len())
            .map(|si| per_split.iter().map(|(_, e)| e[si]).collect())
            .collect();
        Ok(SplitRun {
            seeds,
            outcomes,
            exclusions,
        })
    }

    /// Correlation of two score tables' Top-K rankings for one spec.
    fn compare(&self, a: &ScoreTable, b: &ScoreTable, spec: usize, k: usize) -> Outcome {
        let result = (|| -> Result<Similarity, String> {
            let sa = a.scores(spec).map_err(|e| e.to_string())?;
            let sb = b.scores(spec).map_err(|e| e.to_string())?;
            let sa = top_k_subset(&self.reference, k, &sa).map_err(|e| e.to_string())?;
            let sb = top_k_subset(&self.reference, k, &sb).map_err(|e| e.to_string())?;
            let ra = rank_methods(&sa).map_err(|e| e.to_string())?;
            let rb = rank_methods(&sb).map_err(|e| e.to_string())?;
            spearman(&ra, &rb).map_err(|e| e.to_string())
        })();
        match result {
            Ok(s) => s.into(),
            Err(e) => Outcome::Failed(e),
        }
    }

    fn stability_report(&self, specs: &[MeasureSpec], top_ks: &[usize], run: SplitRun) -> StabilityReport {
        let measures = specs
            .iter()
            .zip(run.outcomes)
            .zip(run.exclusions)
            .map(|((spec, per_k), exclusions)| MeasureStability {
                measure: spec.to_string(),
                by_top_k: top_ks
                    .iter()
                    .zip(per_k)
                    .map(|(&top_k, o)| TopKStability {
                        top_k,
                        cell: StabilityCell::from_outcomes(o),
                    })
                    .collect(),
                exclusions,
            })
            .collect();
        StabilityReport {
            seeds: run.seeds,
            top_ks: top_ks.to_vec(),
            measures,
        }
    }

    /// Rank stability across random halves of the bottom level.
    pub fn cross_sectional_stability(
        &self,
        measures: &[MeasureSpec],
        n_splits: usize,
        seed: u64,
        top_ks: &[usize],
    ) -> Result<StabilityReport, ExperimentError> {
        let run = self.run_splits(n_splits, seed, measures, top_ks, HalfView::AsIs)?;
        Ok(self.stability_report(measures, top_ks, run))
    }

    /// Cross-sectional stability of each measure restricted to each level.
    pub fn per_level_stability(
        &self,
        measures: &[MeasureSpec],
        n_splits: usize,
        seed: u64,
        top_k: usize,
    ) -> Result<PerLevelReport, ExperimentError> {
        let k = self.dataset.k();
        let specs: Vec<MeasureSpec> = (1..=k)
            .flat_map(|j| measures.iter().map(move |m| m.with_summarization(Summarization::SingleLevel(j))))
            .collect();
        let run = self.run_splits(n_splits, seed, &specs, &[top_k], HalfView::AsIs)?;
        let mut cells = run.outcomes.into_iter().map(|mut per_k| StabilityCell::from_outcomes(per_k.remove(0)));
        let levels = self
            .dataset
            .spec()
            .levels()
            .iter()
            .enumerate()
            .map(|(j, def)| LevelRow {
                level: j + 1,
                name: def.name.clone(),
                cells: cells.by_ref().take(measures.len()).collect(),
            })
            .collect();
        Ok(PerLevelReport {
            top_k,
            seeds: run.seeds,
            measures: measures.iter().map(MeasureSpec::label).collect(),
            levels,
        })
    }

    /// Stability when each half collapses to a single point: all bottom
    /// series summed over all test days.
    pub fn total_aggregation_stability(
        &self,
        measures: &[MeasureSpec],
        n_splits: usize,
        seed: u64,
        top_k: usize,
    ) -> Result<StabilityReport, ExperimentError> {
        // a one-level dataset: any summarization reduces to that level
        let specs: Vec<MeasureSpec> = measures
            .iter()
            .map(|m| m.with_summarization(Summarization::PerLevelAverage))
            .collect();
        let run = self.run_splits(n_splits, seed, &specs, &[top_k], HalfView::Total)?;
        let mut report = self.stability_report(&specs, &[top_k], run);
        for (m, spec) in report.measures.iter_mut().zip(measures) {
            m.measure = spec.label();
        }
        Ok(report)
    }

    /// Rankings on test days `[0, cut)` against `[cut, h)`, overall and per
    /// level. Deterministic; no random splits.
    pub fn temporal_stability(&self, measures: &[MeasureSpec], cut: usize, top_k: usize) -> Result<TemporalReport, ExperimentError> {
        self.check_top_ks(&[top_k])?;
        let h = self.dataset.horizon();
        let (first, second) = self.dataset.split_test_window(cut)?;
        let fa: Vec<ForecastSet> = self.forecasts.iter().map(|f| f.window(0..cut)).collect();
        let fb: Vec<ForecastSet> = self.forecasts.iter().map(|f| f.window(cut..h)).collect();
        let k = self.dataset.k();
        let mut specs = measures.to_vec();
        for j in 1..=k {
            specs.extend(measures.iter().map(|m| m.with_summarization(Summarization::SingleLevel(j))));
        }
        let ta = Evaluator::new(&first).score_methods(&fa, &specs);
        let tb = Evaluator::new(&second).score_methods(&fb, &specs);
        let m = measures.len();
        let rows = measures
            .iter()
            .enumerate()
            .map(|(i, spec)| TemporalRow {
                measure: spec.label(),
                overall: self.compare(&ta, &tb, i, top_k),
                per_level: (1..=k).map(|j| self.compare(&ta, &tb, j * m + i, top_k)).collect(),
            })
            .collect();
        Ok(TemporalReport {
            cut,
            top_k,
            level_names: self.dataset.spec().levels().iter().map(|l| l.name.clone()).collect(),
            rows,
        })
    }

    /// Per-method magic numbers at one level and the rank correlation
    /// between adjusted and unadjusted rankings of the Top-K methods.
    pub fn magic_number_similarity(
        &self,
        measure: &MeasureSpec,
        level: usize,
        grid: &[f64],
        top_k: usize,
    ) -> Result<MagicResult, ExperimentError> {
        self.check_top_ks(&[top_k])?;
        let spec = measure.with_summarization(Summarization::SingleLevel(level));
        let ev = Evaluator::new(self.dataset);
        let methods = self.reference.top(top_k)?;
        let found: Vec<(String, f64, Result<MagicNumber, ExperimentError>)> = methods
            .par_iter()
            .map(|id| {
                let f = self
                    .forecasts
                    .iter()
                    .find(|f| &f.method_id == id)
                    .expect("checked by check_top_ks");
                let agg = self.dataset.aggregate_forecast(f)?;
                let plain = ev.score_aggregated(&agg, &spec)?.value;
                Ok((id.clone(), plain, optimal_with(&ev, &agg, &spec, grid)))
            })
            .collect::<Result<_, ExperimentError>>()?;

        let mut multipliers = Vec::with_capacity(found.len());
        let mut plain = Vec::with_capacity(found.len());
        let mut adjusted = Vec::with_capacity(found.len());
        let mut degenerate = false;
        for (id, p, best) in found {
            plain.push((id.clone(), p));
            match best {
                Ok(b) => {
                    multipliers.push(MethodMultiplier {
                        method: id.clone(),
                        multiplier: Some(b.multiplier),
                    });
                    adjusted.push((id, b.score));
                }
                Err(ExperimentError::DegenerateGrid) => {
                    degenerate = true;
                    multipliers.push(MethodMultiplier {
                        method: id,
                        multiplier: None,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let similarity = if degenerate {
            Outcome::Degenerate
        } else {
            spearman(&rank_methods(&plain)?, &rank_methods(&adjusted)?)?.into()
        };
        Ok(MagicResult {
            measure: measure.label(),
            level,
            multipliers,
            similarity,
        })
    }

    /// Pairwise rank correlation between measures on the full dataset.
    pub fn measure_similarity_matrix(&self, measures: &[MeasureSpec]) -> Result<SimilarityMatrix, ExperimentError> {
        if measures.len() < 2 {
            return Err(ExperimentError::Invalid("need at least 2 measures".into()));
        }
        let table = Evaluator::new(self.dataset).score_methods(self.forecasts, measures);
        let rankings: Vec<Result<_, String>> = (0..measures.len())
            .map(|i| {
                let s = table.scores(i).map_err(|e| e.to_string())?;
                rank_methods(&s).map_err(|e| e.to_string())
            })
            .collect();
        let cells = rankings
            .iter()
            .map(|ra| {
                rankings
                    .iter()
                    .map(|rb| match (ra, rb) {
                        (Ok(a), Ok(b)) => match spearman(a, b) {
                            Ok(s) => s.into(),
                            Err(e) => Outcome::Failed(e.to_string()),
                        },
                        (Err(e), _) | (_, Err(e)) => Outcome::Failed(e.clone()),
                    })
                    .collect()
            })
            .collect();
        Ok(SimilarityMatrix {
            measures: measures.iter().map(MeasureSpec::label).collect(),
            cells,
        })
    }

    /// Cross-sectional stability of `w * top + (1 - w) * bottom` for the
    /// price-weighted `base` measure at each `w`, all on the same splits.
    pub fn top_level_weight_sweep(
        &self,
        base: BaseMeasure,
        w_grid: &[f64],
        n_splits: usize,
        seed: u64,
        top_ks: &[usize],
    ) -> Result<SweepReport, ExperimentError> {
        if w_grid.is_empty() {
            return Err(ExperimentError::EmptyGrid);
        }
        if w_grid.iter().any(|w| !(0.0..=1.0).contains(w)) || w_grid.windows(2).any(|p| p[0] >= p[1]) {
            return Err(ExperimentError::Invalid(
                "sweep weights must be strictly increasing within [0, 1]".into(),
            ));
        }
        let specs: Vec<MeasureSpec> = w_grid
            .iter()
            .map(|&w| MeasureSpec::price(base).with_summarization(Summarization::TwoLevelWeighted(w)))
            .collect();
        let run = self.run_splits(n_splits, seed, &specs, top_ks, HalfView::AsIs)?;
        let curves = top_ks
            .iter()
            .enumerate()
            .map(|(ki, &top_k)| SweepCurve {
                top_k,
                points: w_grid
                    .iter()
                    .zip(&run.outcomes)
                    .map(|(&w, per_k)| {
                        let cell = StabilityCell::from_outcomes(per_k[ki].clone());
                        SweepPoint {
                            w,
                            stability: cell.mean,
                            valid: cell.valid,
                            degenerate: cell.degenerate,
                            failed: cell.failed,
                        }
                    })
                    .collect(),
            })
            .collect();
        Ok(SweepReport {
            measure: MeasureSpec::price(base).label(),
            seeds: run.seeds,
            curves,
        })
    }
}

fn optimal_with(ev: &Evaluator<'_>, aggregated: &[Vec<f64>], spec: &MeasureSpec, grid: &[f64]) -> Result<MagicNumber, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    let scope = ev.scope(spec);
    let mut scaled: Vec<Vec<f64>> = vec![Vec::new(); aggregated.len()];
    let mut best: Option<MagicNumber> = None;
    let mut first_score = None;
    let mut all_tied = true;
    for &c in grid {
        for i in scope.clone() {
            scaled[i] = aggregated[i].iter().map(|v| v * c).collect();
        }
        let score = ev.score_aggregated(&scaled, spec)?.value;
        match first_score {
            None => first_score = Some(score),
            Some(f) => all_tied &= f == score,
        }
        let better = match best {
            None => true,
            Some(b) => score < b.score || (score == b.score && c < b.multiplier),
        };
        if better {
            best = Some(MagicNumber { multiplier: c, score });
        }
    }
    let distinct = grid.iter().any(|&c| c != grid[0]);
    if all_tied && distinct {
        return Err(ExperimentError::DegenerateGrid);
    }
    Ok(best.expect("grid is non-empty"))
}

/// Multiplier from `grid` minimizing `measure` when every bottom forecast
/// of the method is scaled by it (aggregates scale with it). Ties go to the
/// smallest multiplier.
pub fn optimal_magic_number(
    forecast: &ForecastSet,
    dataset: &HierarchicalDataset,
    measure: &MeasureSpec,
    grid: &[f64],
) -> Result<MagicNumber, ExperimentError> {
    let ev = Evaluator::new(dataset);
    let agg = dataset.aggregate_forecast(forecast)?;
    optimal_with(&ev, &agg, measure, grid)
}
