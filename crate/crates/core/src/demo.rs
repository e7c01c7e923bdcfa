//! A small synthetic dataset in the M5 file layout with canned forecasts.
//!
//! Two stores times four items (8 bottom series), 60 training days and a
//! 14-day horizon, grouped as total / store / store-item. Six methods add
//! Gaussian noise of increasing spread to the true test values, so their
//! quality order is known.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::LoadError;
use crate::io::write_forecast_csv;
use crate::measures::ForecastSet;

pub const DEMO_SEED: u64 = 20_200_701;
pub const DEMO_TRAIN: usize = 60;
pub const DEMO_HORIZON: usize = 14;
const FIRST_WEEK: u32 = 11_101;

/// (item, base price, mean daily units)
const ITEMS: [(&str, f64, f64); 4] = [
    ("FOODS_1_001", 2.5, 6.0),
    ("FOODS_1_002", 4.0, 3.5),
    ("HOBBIES_1_001", 9.5, 1.2),
    ("HOBBIES_1_002", 12.0, 0.6),
];
/// (store, demand factor, price premium)
const STORES: [(&str, f64, f64); 2] = [("CA_1", 1.0, 0.0), ("CA_2", 0.7, 0.25)];
/// Noise spread per method relative to the series' mean level.
pub const DEMO_METHODS: [(&str, f64); 6] = [
    ("m1", 0.15),
    ("m2", 0.22),
    ("m3", 0.32),
    ("m4", 0.46),
    ("m5", 0.66),
    ("m6", 0.95),
];

/// Paths of the files written by [`seed_demo`].
#[derive(Debug, Clone)]
pub struct DemoFiles {
    pub config: PathBuf,
    pub sales: PathBuf,
    pub prices: PathBuf,
    pub calendar: PathBuf,
    pub manifest: PathBuf,
    pub reference: PathBuf,
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> f64 {
    let limit = (-lambda).exp();
    let mut k = 0u32;
    let mut p: f64 = rng.gen();
    while p > limit {
        k += 1;
        p *= rng.gen::<f64>();
    }
    k as f64
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn week(day: usize) -> u32 {
    FIRST_WEEK + (day / 7) as u32
}

fn write(path: &Path, body: &str) -> Result<(), LoadError> {
    std::fs::write(path, body).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the fixture, forecasts, manifest, reference ranking and a
/// `config.toml` into `dir`. Output is identical on every call.
pub fn seed_demo(dir: &Path) -> Result<DemoFiles, LoadError> {
    let mkdir = |p: &Path| {
        std::fs::create_dir_all(p).map_err(|source| LoadError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    mkdir(dir)?;
    let fc_dir = dir.join("forecasts");
    mkdir(&fc_dir)?;

    let mut rng = ChaCha8Rng::seed_from_u64(DEMO_SEED);
    let days = DEMO_TRAIN + DEMO_HORIZON;

    let mut sales = String::from("id,item_id,dept_id,cat_id,store_id,state_id");
    for d in 1..=days {
        let _ = write!(sales, ",d_{d}");
    }
    sales.push('\n');

    let mut prices = String::from("store_id,item_id,wm_yr_wk,sell_price\n");
    let mut series = Vec::new();
    for (store, factor, premium) in STORES {
        for (item, price, level) in ITEMS {
            let id = format!("{item}_{store}_evaluation");
            let dept = &item[..item.rfind('_').expect("item ids contain `_`")];
            let cat = &dept[..dept.find('_').expect("dept ids contain `_`")];
            let mean = level * factor;
            let values: Vec<f64> = (0..days)
                .map(|t| {
                    let season = 1.0 + 0.3 * (std::f64::consts::TAU * t as f64 / 7.0).sin();
                    poisson(&mut rng, mean * season)
                })
                .collect();
            let _ = write!(sales, "{id},{item},{dept},{cat},{store},CA");
            for v in &values {
                let _ = write!(sales, ",{v}");
            }
            sales.push('\n');
            for w in week(0)..=week(days - 1) {
                // one price change in the second half of the history
                let p = price + premium + if w >= week(days / 2) { 0.5 } else { 0.0 };
                let _ = writeln!(prices, "{store},{item},{w},{p:.2}");
            }
            series.push((id, mean, values[DEMO_TRAIN..].to_vec()));
        }
    }

    let mut calendar = String::from("date,wm_yr_wk,d\n");
    for d in 0..days {
        let _ = writeln!(calendar, "day{:03},{},d_{}", d + 1, week(d), d + 1);
    }

    let files = DemoFiles {
        config: dir.join("config.toml"),
        sales: dir.join("sales_train.csv"),
        prices: dir.join("sell_prices.csv"),
        calendar: dir.join("calendar.csv"),
        manifest: fc_dir.join("manifest.csv"),
        reference: dir.join("reference.txt"),
    };
    write(&files.sales, &sales)?;
    write(&files.prices, &prices)?;
    write(&files.calendar, &calendar)?;

    let mut manifest = String::from("method_id,path\n");
    let mut reference = String::new();
    for (method, spread) in DEMO_METHODS {
        let mut f = ForecastSet::new(method);
        for (id, mean, actual) in &series {
            let row = actual
                .iter()
                .map(|y| {
                    let v = (y + spread * mean.max(1.0) * normal(&mut rng)).max(0.0);
                    (v * 1e4).round() / 1e4
                })
                .collect();
            f.forecasts.insert(id.clone(), row);
        }
        let name = format!("{method}.csv");
        write_forecast_csv(&fc_dir.join(&name), &f)?;
        let _ = writeln!(manifest, "{method},{name}");
        let _ = writeln!(reference, "{method}");
    }
    write(&files.manifest, &manifest)?;
    write(&files.reference, &reference)?;
    write(&files.config, DEMO_CONFIG)?;
    Ok(files)
}

const DEMO_CONFIG: &str = r#"# Demo run over the bundled synthetic fixture.

[dataset]
format = "m5"
sales = "sales_train.csv"
prices = "sell_prices.csv"
calendar = "calendar.csv"
horizon = 14
price_window = 28

[hierarchy]
levels = [[], ["store_id"], ["store_id", "item_id"]]

[forecasts]
manifest = "forecasts/manifest.csv"
reference = "reference.txt"

[run]
experiment = "all"
splits = 20
seed = 7
top_ks = [3, 6]
out_dir = "out"
format = "both"
"#;
