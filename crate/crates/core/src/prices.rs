//! Dollar-sales weights.
//!
//! Each series' weight is `(1/k) * dollar_sales / total_dollar_sales`, with
//! dollar sales taken over the trailing training window. Every level
//! partitions the bottom series, so each level's weights sum to `1/k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::PriceError;
use crate::hierarchy::{BottomSeries, HierarchicalDataset};

/// Unit prices for the trailing `window` training days of each bottom series.
/// `None` marks a day with no listed price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    window: usize,
    prices: BTreeMap<String, Vec<Option<f64>>>,
}

impl PriceTable {
    pub fn new(window: usize) -> Self {
        PriceTable {
            window,
            prices: BTreeMap::new(),
        }
    }

    /// Inserts the price vector for one bottom series. Vectors shorter than
    /// the window are left-padded with `None`.
    pub fn insert(&mut self, id: impl Into<String>, mut prices: Vec<Option<f64>>) {
        if prices.len() > self.window {
            prices.drain(..prices.len() - self.window);
        }
        while prices.len() < self.window {
            prices.insert(0, None);
        }
        self.prices.insert(id.into(), prices);
    }

    /// Same price on every day of the window.
    pub fn insert_constant(&mut self, id: impl Into<String>, price: f64) {
        let window = self.window;
        self.insert(id, vec![Some(price); window]);
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn get(&self, id: &str) -> Option<&[Option<f64>]> {
        self.prices.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub(crate) fn restrict<'a>(&self, ids: impl Iterator<Item = &'a str>) -> Self {
        let prices = ids
            .filter_map(|id| self.prices.get(id).map(|p| (id.to_string(), p.clone())))
            .collect();
        PriceTable {
            window: self.window,
            prices,
        }
    }

    /// Per-day effective price of the summed series: day dollar sales over
    /// day units, so units x price reproduces the day's dollar sales.
    pub(crate) fn total_effective(&self, id: &str, bottom: &[BottomSeries]) -> Self {
        let mut dollars = vec![0.0; self.window];
        let mut units = vec![0.0; self.window];
        for b in bottom {
            let day_units = window_units(&b.train, self.window);
            let prices = self.prices.get(&b.id);
            for d in 0..self.window {
                let p = prices.and_then(|p| p[d]).unwrap_or(0.0);
                dollars[d] += day_units[d] * p;
                units[d] += day_units[d];
            }
        }
        let effective = dollars
            .iter()
            .zip(&units)
            .map(|(d, u)| if *u > 0.0 { Some(d / u) } else { None })
            .collect();
        let mut out = PriceTable::new(self.window);
        out.insert(id, effective);
        out
    }
}

/// Trailing `window` values of `train`, left-padded with zeros when the
/// history is shorter.
fn window_units(train: &[f64], window: usize) -> Vec<f64> {
    if train.len() >= window {
        train[train.len() - window..].to_vec()
    } else {
        let mut v = vec![0.0; window - train.len()];
        v.extend_from_slice(train);
        v
    }
}

/// Weights aligned with [`HierarchicalDataset::series`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceWeights {
    pub ids: Vec<String>,
    pub weights: Vec<f64>,
    pub dollar_sales: Vec<f64>,
    pub total: f64,
    pub k: usize,
    /// Series-days with positive units but no listed price (priced at 0).
    pub missing_price_days: usize,
}

impl PriceWeights {
    pub fn weight(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|i| i == id).map(|p| self.weights[p])
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Dollar-sales weights over the last `window_len` training days.
///
/// A missing price on a day with positive units counts as price 0 and is
/// tallied in `missing_price_days`.
pub fn compute_price_weights(
    dataset: &HierarchicalDataset,
    prices: &PriceTable,
    window_len: usize,
) -> Result<PriceWeights, PriceError> {
    let n = dataset.n_train();
    if window_len > n || window_len > prices.window() {
        return Err(PriceError::WindowTooLong {
            window: window_len,
            available: n.min(prices.window()),
        });
    }
    let offset = prices.window() - window_len;
    let mut missing = 0usize;
    let bottom_sales: Vec<f64> = dataset
        .bottom()
        .iter()
        .map(|b| {
            let units = &b.train[n - window_len..];
            let row = prices.get(&b.id);
            units
                .iter()
                .enumerate()
                .map(|(d, &u)| match row.and_then(|r| r[offset + d]) {
                    Some(p) => u * p,
                    None => {
                        if u > 0.0 {
                            missing += 1;
                        }
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    if missing > 0 {
        log::warn!("{missing} series-days sold units without a listed price; priced at 0");
    }

    let total: f64 = bottom_sales.iter().sum();
    if total <= 0.0 {
        return Err(PriceError::ZeroTotalSales);
    }
    let k = dataset.k();
    let dollar_sales: Vec<f64> = (0..dataset.series().len())
        .map(|i| dataset.members(i).iter().map(|&b| bottom_sales[b]).sum())
        .collect();
    let weights = dollar_sales
        .iter()
        .map(|s| s / total / k as f64)
        .collect();
    Ok(PriceWeights {
        ids: dataset.series().iter().map(|s| s.id.clone()).collect(),
        weights,
        dollar_sales,
        total,
        k,
        missing_price_days: missing,
    })
}
