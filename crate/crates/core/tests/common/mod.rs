//! Shared test helpers: a loop-by-loop reference implementation of the
//! error measures working straight from the fixture files, and synthetic
//! dataset generators.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use hierbench::hierarchy::{BottomSeries, HierarchicalDataset, HierarchySpec};
use hierbench::measures::ForecastSet;
use hierbench::prices::PriceTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mini")
}

pub fn mini_config() -> PathBuf {
    mini_dir().join("config.toml")
}

// ---------------------------------------------------------------------
// Reference implementation
// ---------------------------------------------------------------------

pub struct OracleSeries {
    pub id: String,
    pub level: usize,
    pub train: Vec<f64>,
    pub test: Vec<f64>,
    /// Bottom ids summed into this series.
    pub members: Vec<String>,
}

pub struct Oracle {
    pub k: usize,
    pub series: Vec<OracleSeries>,
    /// Dollar sales per bottom id over the trailing price window.
    pub dollars: HashMap<String, f64>,
}

fn split_line(line: &str) -> Vec<String> {
    line.split(',').map(|s| s.trim().to_string()).collect()
}

/// Reads the mini fixture with plain string handling and builds the
/// total / store / store-item hierarchy.
pub fn oracle_mini(n_train: usize, horizon: usize, window: usize) -> Oracle {
    let dir = mini_dir();
    let sales = std::fs::read_to_string(dir.join("sales_train.csv")).unwrap();
    let mut lines = sales.lines();
    let head = split_line(lines.next().unwrap());
    let first_day = head.iter().position(|h| h == "d_1").unwrap();
    let store_col = head.iter().position(|h| h == "store_id").unwrap();
    let item_col = head.iter().position(|h| h == "item_id").unwrap();

    struct Row {
        id: String,
        store: String,
        item: String,
        values: Vec<f64>,
    }
    let rows: Vec<Row> = lines
        .map(|l| {
            let c = split_line(l);
            Row {
                id: c[0].clone(),
                store: c[store_col].clone(),
                item: c[item_col].clone(),
                values: c[first_day..].iter().map(|v| v.parse().unwrap()).collect(),
            }
        })
        .collect();

    let cal = std::fs::read_to_string(dir.join("calendar.csv")).unwrap();
    let mut week_of_day = HashMap::new();
    for l in cal.lines().skip(1) {
        let c = split_line(l);
        week_of_day.insert(c[2].clone(), c[1].clone());
    }
    let pr = std::fs::read_to_string(dir.join("sell_prices.csv")).unwrap();
    let mut price = HashMap::new();
    for l in pr.lines().skip(1) {
        let c = split_line(l);
        price.insert((c[0].clone(), c[1].clone(), c[2].clone()), c[3].parse::<f64>().unwrap());
    }

    let mut dollars = HashMap::new();
    for r in &rows {
        let mut total = 0.0;
        for d in n_train - window..n_train {
            let week = &week_of_day[&format!("d_{}", d + 1)];
            let p = price.get(&(r.store.clone(), r.item.clone(), week.clone())).copied().unwrap_or(0.0);
            total += r.values[d] * p;
        }
        dollars.insert(r.id.clone(), total);
    }

    let sum_of = |members: &[&Row]| {
        let mut train = vec![0.0; n_train];
        let mut test = vec![0.0; horizon];
        for m in members {
            for t in 0..n_train {
                train[t] += m.values[t];
            }
            for t in 0..horizon {
                test[t] += m.values[n_train + t];
            }
        }
        (train, test)
    };

    let mut series = Vec::new();
    let all: Vec<&Row> = rows.iter().collect();
    let (train, test) = sum_of(&all);
    series.push(OracleSeries {
        id: "Total".into(),
        level: 1,
        train,
        test,
        members: rows.iter().map(|r| r.id.clone()).collect(),
    });
    let mut stores: BTreeMap<&str, Vec<&Row>> = BTreeMap::new();
    for r in &rows {
        stores.entry(&r.store).or_default().push(r);
    }
    for (store, members) in &stores {
        let (train, test) = sum_of(members);
        series.push(OracleSeries {
            id: format!("store_id={store}"),
            level: 2,
            train,
            test,
            members: members.iter().map(|r| r.id.clone()).collect(),
        });
    }
    for r in &rows {
        let (train, test) = sum_of(&[r]);
        series.push(OracleSeries {
            id: r.id.clone(),
            level: 3,
            train,
            test,
            members: vec![r.id.clone()],
        });
    }
    Oracle { k: 3, series, dollars }
}

/// `id,F1..Fh` file read with string splitting.
pub fn oracle_forecast(path: &Path) -> HashMap<String, Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let c = split_line(l);
            (c[0].clone(), c[1..].iter().map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

impl Oracle {
    pub fn aggregate(&self, fc: &HashMap<String, Vec<f64>>) -> Vec<Vec<f64>> {
        self.series
            .iter()
            .map(|s| {
                let mut out = vec![0.0; s.test.len()];
                for m in &s.members {
                    for (t, v) in fc[m].iter().enumerate() {
                        out[t] += v;
                    }
                }
                out
            })
            .collect()
    }

    /// Weight per series: dollar sales of its members over total dollar
    /// sales, divided by the number of levels.
    pub fn weights(&self) -> Vec<f64> {
        let total: f64 = self.dollars.values().sum();
        self.series
            .iter()
            .map(|s| s.members.iter().map(|m| self.dollars[m]).sum::<f64>() / total / self.k as f64)
            .collect()
    }

    pub fn errors(&self, base: &str, agg: &[Vec<f64>]) -> Vec<Option<f64>> {
        self.series.iter().zip(agg).map(|(s, f)| oracle_error(base, &s.train, &s.test, f)).collect()
    }
}

pub fn oracle_error(base: &str, train: &[f64], y: &[f64], f: &[f64]) -> Option<f64> {
    let h = y.len() as f64;
    match base {
        "MAE" => {
            let mut s = 0.0;
            for t in 0..y.len() {
                s += (y[t] - f[t]).abs();
            }
            Some(s / h)
        }
        "SMAPE" => {
            let mut s = 0.0;
            for t in 0..y.len() {
                let d = y[t].abs() + f[t].abs();
                if d > 0.0 {
                    s += (y[t] - f[t]).abs() / d;
                }
            }
            Some(200.0 * s / h)
        }
        "MASE" | "RMSSE" => {
            let n = train.len();
            let (mut scale, mut err) = (0.0, 0.0);
            for t in 1..n {
                let d = train[t] - train[t - 1];
                scale += if base == "MASE" { d.abs() } else { d * d };
            }
            scale /= (n - 1) as f64;
            if scale == 0.0 {
                return None;
            }
            for t in 0..y.len() {
                let e = y[t] - f[t];
                err += if base == "MASE" { e.abs() } else { e * e };
            }
            err /= h;
            Some(if base == "MASE" { err / scale } else { (err / scale).sqrt() })
        }
        "WAPE" => {
            let (mut num, mut den) = (0.0, 0.0);
            for t in 0..y.len() {
                num += (y[t] - f[t]).abs();
                den += y[t].abs();
            }
            (den > 0.0).then(|| num / den)
        }
        other => panic!("unknown base {other}"),
    }
}

pub fn oracle_price_total(errors: &[Option<f64>], weights: &[f64]) -> f64 {
    let mut s = 0.0;
    for (e, w) in errors.iter().zip(weights) {
        if let Some(e) = e {
            s += w * e;
        }
    }
    s
}

pub fn oracle_level_mean(errors: &[Option<f64>], levels: &[usize], level: usize) -> f64 {
    let (mut s, mut c) = (0.0, 0);
    for (e, l) in errors.iter().zip(levels) {
        if *l == level {
            if let Some(e) = e {
                s += e;
                c += 1;
            }
        }
    }
    s / c as f64
}

pub fn oracle_per_level(errors: &[Option<f64>], levels: &[usize], k: usize) -> f64 {
    let mut s = 0.0;
    for j in 1..=k {
        s += oracle_level_mean(errors, levels, j);
    }
    s / k as f64
}

pub fn oracle_pooled(errors: &[Option<f64>]) -> f64 {
    let (mut s, mut c) = (0.0, 0);
    for e in errors.iter().flatten() {
        s += e;
        c += 1;
    }
    s / c as f64
}

/// Price-weighted error restricted to one level, weights rescaled to sum
/// to one within the level.
pub fn oracle_price_level(errors: &[Option<f64>], weights: &[f64], levels: &[usize], level: usize) -> f64 {
    let (mut s, mut wsum) = (0.0, 0.0);
    for i in 0..errors.len() {
        if levels[i] == level {
            wsum += weights[i];
            if let Some(e) = errors[i] {
                s += weights[i] * e;
            }
        }
    }
    s / wsum
}

// ---------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> f64 {
    let limit = (-lambda).exp();
    let mut k = 0.0;
    let mut p: f64 = rng.gen();
    while p > limit {
        k += 1.0;
        p *= rng.gen::<f64>();
    }
    k
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Total / group / series hierarchy.
pub fn three_levels() -> HierarchySpec {
    HierarchySpec::from_key_lists(vec![vec![], vec!["group".into()], vec!["group".into(), "sku".into()]]).unwrap()
}

pub struct SynthOptions {
    pub series: usize,
    pub groups: usize,
    pub n_train: usize,
    pub horizon: usize,
    /// Mean demand is drawn log-uniformly from this range.
    pub level: (f64, f64),
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            series: 12,
            groups: 3,
            n_train: 40,
            horizon: 7,
            level: (0.5, 30.0),
        }
    }
}

/// Poisson count series in `groups` groups with random constant prices
/// over a 28-day window.
pub fn synth_dataset(rng: &mut ChaCha8Rng, o: &SynthOptions, spec: HierarchySpec) -> HierarchicalDataset {
    let window = 28.min(o.n_train);
    let mut prices = PriceTable::new(window);
    let bottom: Vec<BottomSeries> = (0..o.series)
        .map(|i| {
            let (lo, hi): (f64, f64) = o.level;
            let mean = (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp();
            let mut draw = |len: usize| (0..len).map(|_| poisson(rng, mean)).collect::<Vec<_>>();
            let mut train = draw(o.n_train);
            // a flat history would make scaled measures undefined
            if train.windows(2).all(|w| w[0] == w[1]) {
                train[0] += 1.0;
            }
            let test = draw(o.horizon);
            let id = format!("s{i:03}");
            prices.insert_constant(id.clone(), 1.0 + 9.0 * rng.gen::<f64>());
            BottomSeries::new(id.clone(), train, test)
                .with_attribute("group", format!("g{}", i % o.groups))
                .with_attribute("sku", id)
        })
        .collect();
    HierarchicalDataset::build(bottom, spec).unwrap().with_prices(prices)
}

/// Methods whose errors are `bias * actual` with a sign pattern shared by
/// every method, plus a little independent noise. Larger `bias` is worse
/// under every measure.
pub fn tiered_forecasts(rng: &mut ChaCha8Rng, ds: &HierarchicalDataset, biases: &[f64], noise: f64) -> Vec<ForecastSet> {
    let signs: Vec<Vec<f64>> = ds
        .bottom()
        .iter()
        .map(|b| b.test.iter().map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect())
        .collect();
    biases
        .iter()
        .enumerate()
        .map(|(m, &bias)| {
            let mut f = ForecastSet::new(format!("tier_{m}"));
            for (b, sign) in ds.bottom().iter().zip(&signs) {
                let row = b
                    .test
                    .iter()
                    .zip(sign)
                    .map(|(y, s)| (y * (1.0 + bias * s) + noise * normal(rng)).max(0.0))
                    .collect();
                f.forecasts.insert(b.id.clone(), row);
            }
            f
        })
        .collect()
}

/// `m` methods with identically distributed noise around the actuals.
pub fn exchangeable_forecasts(rng: &mut ChaCha8Rng, ds: &HierarchicalDataset, m: usize, sigma: f64) -> Vec<ForecastSet> {
    (0..m)
        .map(|j| {
            let mut f = ForecastSet::new(format!("x{j}"));
            for b in ds.bottom() {
                let row = b
                    .test
                    .iter()
                    .map(|y| (y + sigma * (1.0 + y.sqrt()) * normal(rng)).max(0.0))
                    .collect();
                f.forecasts.insert(b.id.clone(), row);
            }
            f
        })
        .collect()
}

/// Independent random forecasts of varied quality.
pub fn random_forecasts(rng: &mut ChaCha8Rng, ds: &HierarchicalDataset, m: usize) -> Vec<ForecastSet> {
    (0..m)
        .map(|j| {
            let spread = 0.1 + rng.gen::<f64>();
            let bias = 0.6 + 0.8 * rng.gen::<f64>();
            let mut f = ForecastSet::new(format!("r{j}"));
            for b in ds.bottom() {
                let row = b
                    .test
                    .iter()
                    .map(|y| (bias * y + spread * (1.0 + y) * normal(rng)).max(0.0))
                    .collect();
                f.forecasts.insert(b.id.clone(), row);
            }
            f
        })
        .collect()
}
