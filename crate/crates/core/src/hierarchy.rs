//! Grouped time-series hierarchy: bottom series, level definitions, bottom-up
//! aggregation and the dataset transforms the experiments rely on.
//!
//! Every aggregate series is the element-wise sum of its constituent bottom
//! series. Transforms (half splits, test-window splits, total aggregation)
//! never edit aggregates in place; they rebuild from the bottom level.

use std::collections::{BTreeMap, HashSet};
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HierarchyError, MeasureError};
use crate::measures::ForecastSet;
use crate::prices::PriceTable;

/// Attribute name that always resolves to a bottom series' own id.
pub const ID_ATTRIBUTE: &str = "id";

/// Id given to the series of an empty-key (grand total) level.
pub const TOTAL_ID: &str = "Total";

/// One series at some level of the hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    /// 1 is the most aggregate level.
    pub level: usize,
    pub train: Vec<f64>,
    pub test: Vec<f64>,
}

/// A bottom-level input series with the attributes used for grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottomSeries {
    pub id: String,
    pub attributes: BTreeMap<String, String>,
    pub train: Vec<f64>,
    pub test: Vec<f64>,
}

impl BottomSeries {
    pub fn new(id: impl Into<String>, train: Vec<f64>, test: Vec<f64>) -> Self {
        BottomSeries {
            id: id.into(),
            attributes: BTreeMap::new(),
            train,
            test,
        }
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    fn attribute(&self, key: &str) -> Option<&str> {
        if key == ID_ATTRIBUTE {
            Some(&self.id)
        } else {
            self.attributes.get(key).map(String::as_str)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDef {
    pub name: String,
    pub keys: Vec<String>,
}

impl LevelDef {
    pub fn new<S: Into<String>>(name: impl Into<String>, keys: impl IntoIterator<Item = S>) -> Self {
        LevelDef {
            name: name.into(),
            keys: keys.into_iter().map(Into::into).collect(),
        }
    }
}

/// Ordered level definitions. Level 1 is normally the empty key set (the
/// grand total) and the last level the identity grouping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySpec {
    levels: Vec<LevelDef>,
}

impl HierarchySpec {
    pub fn new(levels: Vec<LevelDef>) -> Result<Self, HierarchyError> {
        if levels.is_empty() {
            return Err(HierarchyError::NoLevels);
        }
        for (i, level) in levels.iter().enumerate() {
            let mut seen = HashSet::new();
            for key in &level.keys {
                if !seen.insert(key) {
                    return Err(HierarchyError::RepeatedKey {
                        level: i + 1,
                        key: key.clone(),
                    });
                }
            }
        }
        Ok(HierarchySpec { levels })
    }

    /// Builds a spec from bare key lists, naming each level after its keys.
    pub fn from_key_lists(lists: Vec<Vec<String>>) -> Result<Self, HierarchyError> {
        let levels = lists
            .into_iter()
            .map(|keys| {
                let name = if keys.is_empty() {
                    "total".to_string()
                } else {
                    keys.join("/")
                };
                LevelDef { name, keys }
            })
            .collect();
        Self::new(levels)
    }

    /// The twelve M5 levels.
    pub fn m5() -> Self {
        let levels = vec![
            LevelDef::new("total", Vec::<String>::new()),
            LevelDef::new("state", ["state_id"]),
            LevelDef::new("store", ["store_id"]),
            LevelDef::new("category", ["cat_id"]),
            LevelDef::new("department", ["dept_id"]),
            LevelDef::new("state_category", ["state_id", "cat_id"]),
            LevelDef::new("state_department", ["state_id", "dept_id"]),
            LevelDef::new("store_category", ["store_id", "cat_id"]),
            LevelDef::new("store_department", ["store_id", "dept_id"]),
            LevelDef::new("item", ["item_id"]),
            LevelDef::new("item_state", ["item_id", "state_id"]),
            LevelDef::new("item_store", ["item_id", "store_id"]),
        ];
        HierarchySpec { levels }
    }

    /// A single identity level: every bottom series is its own group.
    pub fn identity() -> Self {
        HierarchySpec {
            levels: vec![LevelDef::new("bottom", [ID_ATTRIBUTE])],
        }
    }

    /// Total over everything, then each bottom series.
    pub fn total_and_bottom() -> Self {
        HierarchySpec {
            levels: vec![
                LevelDef::new("total", Vec::<String>::new()),
                LevelDef::new("bottom", [ID_ATTRIBUTE]),
            ],
        }
    }

    pub fn levels(&self) -> &[LevelDef] {
        &self.levels
    }

    /// Number of levels.
    pub fn k(&self) -> usize {
        self.levels.len()
    }
}

/// Bottom series plus every aggregate implied by a [`HierarchySpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalDataset {
    spec: HierarchySpec,
    bottom: Vec<BottomSeries>,
    series: Vec<TimeSeries>,
    members: Vec<Vec<usize>>,
    level_ranges: Vec<Range<usize>>,
    prices: Option<PriceTable>,
}

/// Aggregates `bottom` under `spec`.
pub fn build_hierarchy(
    bottom: Vec<BottomSeries>,
    spec: HierarchySpec,
) -> Result<HierarchicalDataset, HierarchyError> {
    HierarchicalDataset::build(bottom, spec)
}

impl HierarchicalDataset {
    pub fn build(bottom: Vec<BottomSeries>, spec: HierarchySpec) -> Result<Self, HierarchyError> {
        validate_bottom(&bottom)?;
        let n = bottom[0].train.len();
        let h = bottom[0].test.len();
        let k = spec.k();

        let mut series = Vec::new();
        let mut members = Vec::new();
        let mut level_ranges = Vec::with_capacity(k);

        for (li, level) in spec.levels().iter().enumerate() {
            let mut groups: BTreeMap<Vec<&str>, Vec<usize>> = BTreeMap::new();
            for (bi, b) in bottom.iter().enumerate() {
                let mut key = Vec::with_capacity(level.keys.len());
                for attr in &level.keys {
                    let value =
                        b.attribute(attr)
                            .ok_or_else(|| HierarchyError::MissingAttribute {
                                series: b.id.clone(),
                                attribute: attr.clone(),
                                level: li + 1,
                            })?;
                    key.push(value);
                }
                groups.entry(key).or_default().push(bi);
            }

            let is_last = li + 1 == k;
            let singletons = groups.values().all(|g| g.len() == 1);
            let start = series.len();
            for (key, idx) in groups {
                let id = if is_last && singletons {
                    bottom[idx[0]].id.clone()
                } else if key.is_empty() {
                    TOTAL_ID.to_string()
                } else {
                    level
                        .keys
                        .iter()
                        .zip(&key)
                        .map(|(k, v)| format!("{k}={v}"))
                        .collect::<Vec<_>>()
                        .join("/")
                };
                let mut train = vec![0.0; n];
                let mut test = vec![0.0; h];
                for &bi in &idx {
                    add_into(&mut train, &bottom[bi].train);
                    add_into(&mut test, &bottom[bi].test);
                }
                series.push(TimeSeries {
                    id,
                    level: li + 1,
                    train,
                    test,
                });
                members.push(idx);
            }
            level_ranges.push(start..series.len());
        }

        Ok(HierarchicalDataset {
            spec,
            bottom,
            series,
            members,
            level_ranges,
            prices: None,
        })
    }

    /// Attaches unit prices used for dollar-sales weighting.
    pub fn with_prices(mut self, prices: PriceTable) -> Self {
        self.prices = Some(prices);
        self
    }

    pub fn spec(&self) -> &HierarchySpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }

    pub fn bottom(&self) -> &[BottomSeries] {
        &self.bottom
    }

    /// All series, level by level, each level sorted by group key.
    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn level_series(&self, level: usize) -> &[TimeSeries] {
        &self.series[self.level_range(level)]
    }

    /// Index range in [`Self::series`] holding `level` (1-based).
    pub fn level_range(&self, level: usize) -> Range<usize> {
        self.level_ranges[level - 1].clone()
    }

    /// Indices into [`Self::bottom`] summed by series `index`.
    pub fn members(&self, index: usize) -> &[usize] {
        &self.members[index]
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.level_ranges.iter().map(|r| r.len()).collect()
    }

    pub fn n_train(&self) -> usize {
        self.series[0].train.len()
    }

    pub fn horizon(&self) -> usize {
        self.series[0].test.len()
    }

    pub fn prices(&self) -> Option<&PriceTable> {
        self.prices.as_ref()
    }

    pub fn find(&self, id: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.id == id)
    }

    /// Splits the bottom series uniformly at random into two halves of equal
    /// size (the first half takes the extra series on odd counts) and
    /// re-aggregates each half on its own.
    pub fn split_bottom_half(&self, seed: u64) -> Result<(Self, Self), HierarchyError> {
        let m = self.bottom.len();
        if m < 2 {
            return Err(HierarchyError::TooFewToSplit(m));
        }
        let mut order: Vec<usize> = (0..m).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let first = m.div_ceil(2);
        let mut a = order[..first].to_vec();
        let mut b = order[first..].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        Ok((self.subset(&a)?, self.subset(&b)?))
    }

    /// Dataset restricted to the given bottom-series indices, re-aggregated.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, HierarchyError> {
        let bottom: Vec<BottomSeries> = indices.iter().map(|&i| self.bottom[i].clone()).collect();
        let prices = self.prices.as_ref().map(|p| {
            p.restrict(bottom.iter().map(|b| b.id.as_str()))
        });
        let mut out = Self::build(bottom, self.spec.clone())?;
        out.prices = prices;
        Ok(out)
    }

    /// Splits the test window at `cut`: the first dataset keeps test days
    /// `[0, cut)`, the second `[cut, h)`. Training history is untouched.
    pub fn split_test_window(&self, cut: usize) -> Result<(Self, Self), HierarchyError> {
        let h = self.horizon();
        if cut == 0 || cut >= h {
            return Err(HierarchyError::CutOutOfRange { cut, horizon: h });
        }
        let window = |range: Range<usize>| {
            let mut out = self.clone();
            for b in &mut out.bottom {
                b.test = b.test[range.clone()].to_vec();
            }
            for s in &mut out.series {
                s.test = s.test[range.clone()].to_vec();
            }
            out
        };
        Ok((window(0..cut), window(cut..h)))
    }

    /// Collapses everything into one series: the day-wise total as training
    /// history and a single test point holding the grand sum over all bottom
    /// series and test days.
    pub fn total_aggregate(&self) -> Self {
        let n = self.n_train();
        let mut train = vec![0.0; n];
        let mut grand = 0.0;
        for b in &self.bottom {
            add_into(&mut train, &b.train);
            grand += b.test.iter().sum::<f64>();
        }
        let bottom = vec![BottomSeries::new(TOTAL_ID, train.clone(), vec![grand])];
        let series = vec![TimeSeries {
            id: TOTAL_ID.to_string(),
            level: 1,
            train,
            test: vec![grand],
        }];
        let prices = self
            .prices
            .as_ref()
            .map(|p| p.total_effective(TOTAL_ID, &self.bottom));
        HierarchicalDataset {
            spec: HierarchySpec {
                levels: vec![LevelDef::new("total", Vec::<String>::new())],
            },
            bottom,
            series,
            members: vec![vec![0]],
            level_ranges: vec![0..1],
            prices,
        }
    }

    /// Collapses a method's forecasts the way [`Self::total_aggregate`]
    /// collapses actuals, using only this dataset's bottom series.
    pub fn total_aggregate_forecast(&self, forecast: &ForecastSet) -> Result<ForecastSet, MeasureError> {
        let rows = self.bottom_forecasts(forecast)?;
        let grand: f64 = rows.iter().map(|r| r.iter().sum::<f64>()).sum();
        let mut out = ForecastSet::new(forecast.method_id.clone());
        out.forecasts.insert(TOTAL_ID.to_string(), vec![grand]);
        Ok(out)
    }

    /// Forecast rows for this dataset's bottom series, in bottom order.
    pub fn bottom_forecasts<'f>(&self, forecast: &'f ForecastSet) -> Result<Vec<&'f [f64]>, MeasureError> {
        let h = self.horizon();
        self.bottom
            .iter()
            .map(|b| {
                let row = forecast.forecasts.get(&b.id).ok_or_else(|| {
                    MeasureError::MissingForecast {
                        method: forecast.method_id.clone(),
                        series: b.id.clone(),
                    }
                })?;
                if row.len() != h {
                    return Err(MeasureError::LengthMismatch {
                        series: b.id.clone(),
                        expected: h,
                        got: row.len(),
                    });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(MeasureError::NonFinite {
                        method: forecast.method_id.clone(),
                        series: b.id.clone(),
                    });
                }
                Ok(row.as_slice())
            })
            .collect()
    }

    /// Bottom-up forecasts for every series in [`Self::series`] order.
    pub fn aggregate_forecast(&self, forecast: &ForecastSet) -> Result<Vec<Vec<f64>>, MeasureError> {
        let rows = self.bottom_forecasts(forecast)?;
        let h = self.horizon();
        Ok(self
            .members
            .iter()
            .map(|idx| {
                let mut acc = vec![0.0; h];
                for &bi in idx {
                    add_into(&mut acc, rows[bi]);
                }
                acc
            })
            .collect())
    }
}

fn add_into(acc: &mut [f64], values: &[f64]) {
    for (a, v) in acc.iter_mut().zip(values) {
        *a += v;
    }
}

fn validate_bottom(bottom: &[BottomSeries]) -> Result<(), HierarchyError> {
    let first = bottom.first().ok_or(HierarchyError::Empty)?;
    let n = first.train.len();
    let h = first.test.len();
    let mut ids = HashSet::with_capacity(bottom.len());
    for b in bottom {
        if !ids.insert(b.id.as_str()) {
            return Err(HierarchyError::DuplicateId(b.id.clone()));
        }
        let invalid = |message: String| HierarchyError::InvalidSeries {
            series: b.id.clone(),
            message,
        };
        if b.train.len() < 2 {
            return Err(invalid(format!("training history needs at least 2 points, got {}", b.train.len())));
        }
        if b.test.is_empty() {
            return Err(invalid("empty test window".into()));
        }
        if b.train.len() != n || b.test.len() != h {
            return Err(invalid(format!(
                "lengths {}/{} differ from {}/{}",
                b.train.len(),
                b.test.len(),
                n,
                h
            )));
        }
        if let Some(v) = b.train.iter().chain(&b.test).find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!("value {v} is negative or not finite")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_item(store: &str, item: &str, train: Vec<f64>, test: Vec<f64>) -> BottomSeries {
        BottomSeries::new(format!("{item}_{store}"), train, test)
            .with_attribute("store_id", store)
            .with_attribute("item_id", item)
    }

    fn three_level() -> HierarchySpec {
        HierarchySpec::from_key_lists(vec![
            vec![],
            vec!["store_id".into()],
            vec!["store_id".into(), "item_id".into()],
        ])
        .unwrap()
    }

    #[test]
    fn two_series_sum_to_top() {
        let b = vec![
            BottomSeries::new("a", vec![0.0, 1.0], vec![1.0, 2.0, 3.0]),
            BottomSeries::new("b", vec![0.0, 1.0], vec![4.0, 5.0, 6.0]),
        ];
        let ds = build_hierarchy(b, HierarchySpec::total_and_bottom()).unwrap();
        assert_eq!(ds.level_counts(), vec![1, 2]);
        assert_eq!(ds.level_series(1)[0].test, vec![5.0, 7.0, 9.0]);
        assert_eq!(ds.level_series(1)[0].id, TOTAL_ID);
        assert_eq!(ds.level_series(2)[0].id, "a");
    }

    #[test]
    fn single_series_identity_is_input() {
        let b = vec![BottomSeries::new("only", vec![1.0, 2.0], vec![3.0])];
        let ds = build_hierarchy(b, HierarchySpec::identity()).unwrap();
        assert_eq!(ds.k(), 1);
        assert_eq!(ds.series().len(), 1);
        assert_eq!(ds.series()[0].id, "only");
        assert_eq!(ds.series()[0].train, vec![1.0, 2.0]);
        assert_eq!(ds.series()[0].test, vec![3.0]);
    }

    #[test]
    fn two_stores_two_items_gives_seven_series() {
        let mut b = Vec::new();
        for s in ["S1", "S2"] {
            for i in ["I1", "I2"] {
                b.push(store_item(s, i, vec![1.0, 2.0], vec![1.0]));
            }
        }
        let ds = build_hierarchy(b, three_level()).unwrap();
        assert_eq!(ds.level_counts(), vec![1, 2, 4]);
        assert_eq!(ds.series().len(), 7);
        assert_eq!(ds.level_series(2)[0].id, "store_id=S1");
    }

    #[test]
    fn rejects_duplicates_and_missing_attributes() {
        let b = vec![
            BottomSeries::new("a", vec![0.0, 1.0], vec![1.0]),
            BottomSeries::new("a", vec![0.0, 1.0], vec![1.0]),
        ];
        assert_eq!(
            build_hierarchy(b, HierarchySpec::identity()).unwrap_err(),
            HierarchyError::DuplicateId("a".into())
        );
        let b = vec![BottomSeries::new("a", vec![0.0, 1.0], vec![1.0])];
        assert!(matches!(
            build_hierarchy(b, three_level()),
            Err(HierarchyError::MissingAttribute { .. })
        ));
    }

    #[test]
    fn rejects_short_history_and_negative_values() {
        let b = vec![BottomSeries::new("a", vec![1.0], vec![1.0])];
        assert!(build_hierarchy(b, HierarchySpec::identity()).is_err());
        let b = vec![BottomSeries::new("a", vec![1.0, -1.0], vec![1.0])];
        assert!(build_hierarchy(b, HierarchySpec::identity()).is_err());
    }

    #[test]
    fn spec_rejects_repeated_keys() {
        let r = HierarchySpec::from_key_lists(vec![vec!["a".into(), "a".into()]]);
        assert!(matches!(r, Err(HierarchyError::RepeatedKey { .. })));
        assert_eq!(HierarchySpec::new(vec![]), Err(HierarchyError::NoLevels));
    }

    #[test]
    fn half_split_of_two_series() {
        let b = vec![
            BottomSeries::new("a", vec![0.0, 1.0], vec![1.0]),
            BottomSeries::new("b", vec![0.0, 1.0], vec![2.0]),
        ];
        let ds = build_hierarchy(b, HierarchySpec::total_and_bottom()).unwrap();
        let (x, y) = ds.split_bottom_half(9).unwrap();
        assert_eq!(x.bottom().len(), 1);
        assert_eq!(y.bottom().len(), 1);
        assert_ne!(x.level_series(1)[0].test, y.level_series(1)[0].test);
    }

    #[test]
    fn odd_split_gives_first_half_the_extra() {
        let b: Vec<_> = (0..5)
            .map(|i| BottomSeries::new(format!("s{i}"), vec![0.0, 1.0], vec![1.0]))
            .collect();
        let ds = build_hierarchy(b, HierarchySpec::total_and_bottom()).unwrap();
        let (x, y) = ds.split_bottom_half(1).unwrap();
        assert_eq!((x.bottom().len(), y.bottom().len()), (3, 2));
        let single = build_hierarchy(
            vec![BottomSeries::new("a", vec![0.0, 1.0], vec![1.0])],
            HierarchySpec::identity(),
        )
        .unwrap();
        assert_eq!(single.split_bottom_half(0), Err(HierarchyError::TooFewToSplit(1)));
    }

    #[test]
    fn test_window_split_bounds() {
        let b = vec![BottomSeries::new("a", vec![0.0, 1.0], vec![1.0, 2.0])];
        let ds = build_hierarchy(b, HierarchySpec::identity()).unwrap();
        let (x, y) = ds.split_test_window(1).unwrap();
        assert_eq!(x.series()[0].test, vec![1.0]);
        assert_eq!(y.series()[0].test, vec![2.0]);
        assert_eq!(x.series()[0].train, y.series()[0].train);
        assert!(ds.split_test_window(0).is_err());
        assert!(ds.split_test_window(2).is_err());
    }

    #[test]
    fn total_aggregate_sums_everything() {
        let b = vec![
            BottomSeries::new("a", vec![1.0, 2.0], vec![1.0, 1.0]),
            BottomSeries::new("b", vec![3.0, 4.0], vec![2.0, 2.0]),
        ];
        let ds = build_hierarchy(b, HierarchySpec::total_and_bottom()).unwrap();
        let t = ds.total_aggregate();
        assert_eq!(t.series().len(), 1);
        assert_eq!(t.series()[0].test, vec![6.0]);
        assert_eq!(t.series()[0].train, vec![4.0, 6.0]);

        let mut f = ForecastSet::new("m");
        f.forecasts.insert("a".into(), vec![1.0, 1.0]);
        f.forecasts.insert("b".into(), vec![2.0, 2.0]);
        let tf = ds.total_aggregate_forecast(&f).unwrap();
        assert_eq!(tf.forecasts[TOTAL_ID], vec![6.0]);
    }

    #[test]
    fn aggregate_forecast_reports_missing_ids() {
        let b = vec![
            BottomSeries::new("a", vec![1.0, 2.0], vec![1.0]),
            BottomSeries::new("b", vec![3.0, 4.0], vec![2.0]),
        ];
        let ds = build_hierarchy(b, HierarchySpec::total_and_bottom()).unwrap();
        let mut f = ForecastSet::new("m");
        f.forecasts.insert("a".into(), vec![1.0]);
        assert!(matches!(
            ds.aggregate_forecast(&f),
            Err(MeasureError::MissingForecast { series, .. }) if series == "b"
        ));
        f.forecasts.insert("b".into(), vec![1.0, 2.0]);
        assert!(matches!(ds.aggregate_forecast(&f), Err(MeasureError::LengthMismatch { .. })));
    }
}
