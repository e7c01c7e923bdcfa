//! File formats: the three M5 CSV files, a generic long-format CSV,
//! per-method forecast files and the method manifest.
//!
//! Long format: header `series_id,<attribute columns...>,date,value[,price]`,
//! one row per series and date. Dates are ordered lexicographically, so use
//! ISO `YYYY-MM-DD` (or zero-padded day numbers).
//!
//! Forecast files follow the M5 submission layout: `id,F1,...,Fh`, one row
//! per bottom series. The manifest is a CSV `method_id,path` with paths
//! relative to the manifest's directory.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::LoadError;
use crate::hierarchy::{BottomSeries, HierarchicalDataset, HierarchySpec};
use crate::measures::ForecastSet;
use crate::prices::PriceTable;

pub const M5_ATTRIBUTES: [&str; 5] = ["item_id", "dept_id", "cat_id", "store_id", "state_id"];

/// How to cut a loaded history into training and test windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Test horizon `h`.
    pub horizon: usize,
    /// Training days; defaults to every day before the final `h`.
    pub train_days: Option<usize>,
    /// Trailing training days used for dollar-sales weights.
    pub price_window: usize,
    /// Level definitions; the loader's default applies when `None`.
    pub hierarchy: Option<HierarchySpec>,
}

impl LoadOptions {
    pub fn new(horizon: usize) -> Self {
        LoadOptions {
            horizon,
            train_days: None,
            price_window: 28,
            hierarchy: None,
        }
    }

    /// `(n, h)` for a history of `total` days.
    fn cut(&self, total: usize) -> Result<(usize, usize), LoadError> {
        let h = self.horizon;
        if h == 0 {
            return Err(LoadError::Options("horizon must be at least 1".into()));
        }
        let n = match self.train_days {
            Some(n) => n,
            None => total.checked_sub(h).ok_or_else(|| {
                LoadError::Options(format!("horizon {h} exceeds the {total} available days"))
            })?,
        };
        if n + h > total {
            return Err(LoadError::Options(format!(
                "{n} training days + horizon {h} exceed the {total} available days"
            )));
        }
        if n < 2 {
            return Err(LoadError::Options(format!("need at least 2 training days, got {n}")));
        }
        if self.price_window == 0 || self.price_window > n {
            return Err(LoadError::Options(format!(
                "price window {} must be within 1..={n}",
                self.price_window
            )));
        }
        Ok((n, h))
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn reader(path: &Path) -> Result<csv::Reader<File>, LoadError> {
    let file = File::open(path).map_err(|source| LoadError::Io {
        path: path_str(path),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn headers(rdr: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>, LoadError> {
    Ok(rdr
        .headers()
        .map_err(|source| LoadError::Csv {
            path: path_str(path),
            source,
        })?
        .iter()
        .map(str::to_string)
        .collect())
}

fn column(headers: &[String], name: &str, path: &Path) -> Result<usize, LoadError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| LoadError::MissingColumn {
            path: path_str(path),
            column: name.to_string(),
        })
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn invalid(path: &Path, record: &csv::StringRecord, message: String) -> LoadError {
    LoadError::Invalid {
        path: path_str(path),
        line: line_of(record),
        message,
    }
}

fn number(path: &Path, record: &csv::StringRecord, field: &str, what: &str) -> Result<f64, LoadError> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| invalid(path, record, format!("{what}: `{field}` is not a finite number")))
}

fn records<'a>(rdr: &'a mut csv::Reader<File>, path: &Path) -> impl Iterator<Item = Result<csv::StringRecord, LoadError>> + 'a {
    let p = path.to_path_buf();
    rdr.records().map(move |r| {
        r.map_err(|source| LoadError::Csv {
            path: path_str(&p),
            source,
        })
    })
}

/// Loads the M5 wide-format sales file with its calendar and price files.
///
/// Day columns must be `d_1..d_T` without gaps. Prices are looked up by
/// (store, item, calendar week) for the trailing `price_window` training
/// days; absent prices are kept as `None`.
pub fn load_m5(
    sales_path: &Path,
    prices_path: &Path,
    calendar_path: &Path,
    options: &LoadOptions,
) -> Result<HierarchicalDataset, LoadError> {
    let mut rdr = reader(sales_path)?;
    let head = headers(&mut rdr, sales_path)?;
    let id_col = column(&head, "id", sales_path)?;
    let attr_cols = M5_ATTRIBUTES
        .iter()
        .map(|a| column(&head, a, sales_path).map(|c| (*a, c)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut days: BTreeMap<usize, usize> = BTreeMap::new();
    for (c, name) in head.iter().enumerate() {
        if let Some(idx) = name.strip_prefix("d_").and_then(|d| d.parse::<usize>().ok()) {
            days.insert(idx, c);
        }
    }
    let total = days.len();
    if total == 0 {
        return Err(LoadError::MissingColumn {
            path: path_str(sales_path),
            column: "d_1".into(),
        });
    }
    for (expected, (&idx, _)) in (1..).zip(&days) {
        if idx != expected {
            return Err(LoadError::MissingColumn {
                path: path_str(sales_path),
                column: format!("d_{expected}"),
            });
        }
    }
    let (n, h) = options.cut(total)?;
    let day_cols: Vec<usize> = days.values().copied().collect();

    let mut bottom = Vec::new();
    for rec in records(&mut rdr, sales_path) {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(invalid(sales_path, &rec, "empty id".into()));
        }
        let mut b = BottomSeries::new(id, Vec::with_capacity(n), Vec::with_capacity(h));
        for &(name, c) in &attr_cols {
            let v = rec.get(c).unwrap_or("");
            if v.is_empty() {
                return Err(invalid(sales_path, &rec, format!("empty {name} for `{}`", b.id)));
            }
            b.attributes.insert(name.to_string(), v.to_string());
        }
        for (d, &c) in day_cols[..n + h].iter().enumerate() {
            let v = number(sales_path, &rec, rec.get(c).unwrap_or(""), &head[c])?;
            if v < 0.0 {
                return Err(invalid(sales_path, &rec, format!("{}: negative sales {v}", head[c])));
            }
            if d < n {
                b.train.push(v);
            } else {
                b.test.push(v);
            }
        }
        bottom.push(b);
    }

    let window = options.price_window;
    let weeks = calendar_weeks(calendar_path, n - window + 1..=n)?;
    let prices = m5_prices(prices_path, &bottom, &weeks)?;

    let spec = options.hierarchy.clone().unwrap_or_else(HierarchySpec::m5);
    let ds = HierarchicalDataset::build(bottom, spec)?;
    Ok(ds.with_prices(prices.into_table(window)))
}

/// Calendar week key of each day index in `days`.
fn calendar_weeks(path: &Path, days: std::ops::RangeInclusive<usize>) -> Result<Vec<String>, LoadError> {
    let mut rdr = reader(path)?;
    let head = headers(&mut rdr, path)?;
    let d_col = column(&head, "d", path)?;
    let w_col = column(&head, "wm_yr_wk", path)?;
    let mut map = HashMap::new();
    for rec in records(&mut rdr, path) {
        let rec = rec?;
        let d = rec.get(d_col).unwrap_or("");
        if let Some(idx) = d.strip_prefix("d_").and_then(|x| x.parse::<usize>().ok()) {
            map.insert(idx, rec.get(w_col).unwrap_or("").to_string());
        }
    }
    days.map(|d| {
        map.remove(&d).filter(|w| !w.is_empty()).ok_or_else(|| LoadError::Invalid {
            path: path_str(path),
            line: 0,
            message: format!("no calendar week for day d_{d}"),
        })
    })
    .collect()
}

struct WindowPrices {
    rows: Vec<(String, Vec<Option<f64>>)>,
}

impl WindowPrices {
    fn into_table(self, window: usize) -> PriceTable {
        let mut t = PriceTable::new(window);
        for (id, p) in self.rows {
            t.insert(id, p);
        }
        t
    }
}

fn m5_prices(path: &Path, bottom: &[BottomSeries], weeks: &[String]) -> Result<WindowPrices, LoadError> {
    let wanted_weeks: HashSet<&str> = weeks.iter().map(String::as_str).collect();
    let key = |b: &BottomSeries| (b.attributes["store_id"].clone(), b.attributes["item_id"].clone());
    let wanted_items: HashSet<(String, String)> = bottom.iter().map(key).collect();

    let mut rdr = reader(path)?;
    let head = headers(&mut rdr, path)?;
    let s_col = column(&head, "store_id", path)?;
    let i_col = column(&head, "item_id", path)?;
    let w_col = column(&head, "wm_yr_wk", path)?;
    let p_col = column(&head, "sell_price", path)?;
    let mut table: HashMap<(String, String, String), f64> = HashMap::new();
    for rec in records(&mut rdr, path) {
        let rec = rec?;
        let week = rec.get(w_col).unwrap_or("");
        if !wanted_weeks.contains(week) {
            continue;
        }
        let pair = (rec.get(s_col).unwrap_or("").to_string(), rec.get(i_col).unwrap_or("").to_string());
        if !wanted_items.contains(&pair) {
            continue;
        }
        let price = number(path, &rec, rec.get(p_col).unwrap_or(""), "sell_price")?;
        if price < 0.0 {
            return Err(invalid(path, &rec, format!("negative price {price}")));
        }
        table.insert((pair.0, pair.1, week.to_string()), price);
    }
    let rows = bottom
        .iter()
        .map(|b| {
            let (store, item) = key(b);
            let p = weeks
                .iter()
                .map(|w| table.get(&(store.clone(), item.clone(), w.clone())).copied())
                .collect();
            (b.id.clone(), p)
        })
        .collect();
    Ok(WindowPrices { rows })
}

/// Loads the long-format CSV described in the module docs. Every column
/// other than `series_id`, `date`, `value` and `price` is an attribute and
/// must be constant within a series.
pub fn load_long(path: &Path, options: &LoadOptions) -> Result<HierarchicalDataset, LoadError> {
    let mut rdr = reader(path)?;
    let head = headers(&mut rdr, path)?;
    let id_col = column(&head, "series_id", path)?;
    let date_col = column(&head, "date", path)?;
    let value_col = column(&head, "value", path)?;
    let price_col = head.iter().position(|h| h == "price");
    let attr_cols: Vec<usize> = (0..head.len())
        .filter(|&c| c != id_col && c != date_col && c != value_col && Some(c) != price_col)
        .collect();

    struct Acc {
        attributes: BTreeMap<String, String>,
        points: BTreeMap<String, (f64, Option<f64>)>,
    }
    let mut series: BTreeMap<String, Acc> = BTreeMap::new();
    let mut order = Vec::new();
    let mut dates = BTreeSet::new();
    for rec in records(&mut rdr, path) {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(invalid(path, &rec, "empty series_id".into()));
        }
        let date = rec.get(date_col).unwrap_or("").to_string();
        let value = number(path, &rec, rec.get(value_col).unwrap_or(""), "value")?;
        if value < 0.0 {
            return Err(invalid(path, &rec, format!("negative value {value}")));
        }
        let price = match price_col.map(|c| rec.get(c).unwrap_or("")) {
            None | Some("") => None,
            Some(p) => Some(number(path, &rec, p, "price")?),
        };
        let attributes: BTreeMap<String, String> = attr_cols
            .iter()
            .map(|&c| (head[c].clone(), rec.get(c).unwrap_or("").to_string()))
            .collect();
        let acc = series.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Acc {
                attributes: attributes.clone(),
                points: BTreeMap::new(),
            }
        });
        if acc.attributes != attributes {
            return Err(invalid(path, &rec, format!("attributes of `{id}` change between rows")));
        }
        if acc.points.insert(date.clone(), (value, price)).is_some() {
            return Err(invalid(path, &rec, format!("duplicate date {date} for `{id}`")));
        }
        dates.insert(date);
    }
    let (n, h) = options.cut(dates.len())?;
    let window = options.price_window;
    let mut prices = PriceTable::new(window);
    let mut any_price = false;
    let mut bottom = Vec::with_capacity(order.len());
    for id in order {
        let acc = series.remove(&id).expect("collected above");
        let mut values = Vec::with_capacity(n + h);
        let mut p = Vec::with_capacity(window);
        for (d, date) in dates.iter().enumerate().take(n + h) {
            let (v, price) = *acc.points.get(date).ok_or_else(|| LoadError::Invalid {
                path: path_str(path),
                line: 0,
                message: format!("series `{id}` has no row for date {date}"),
            })?;
            values.push(v);
            if d >= n - window && d < n {
                any_price |= price.is_some();
                p.push(price);
            }
        }
        let test = values.split_off(n);
        prices.insert(id.clone(), p);
        bottom.push(BottomSeries {
            id,
            attributes: acc.attributes,
            train: values,
            test,
        });
    }
    let spec = options.hierarchy.clone().unwrap_or_else(HierarchySpec::total_and_bottom);
    let ds = HierarchicalDataset::build(bottom, spec)?;
    Ok(if any_price { ds.with_prices(prices) } else { ds })
}

/// Reads one method's forecast file (`id,F1..Fh`).
pub fn load_forecast_csv(path: &Path, method_id: &str) -> Result<ForecastSet, LoadError> {
    let mut rdr = reader(path)?;
    let head = headers(&mut rdr, path)?;
    let id_col = column(&head, "id", path)?;
    let mut cols = Vec::new();
    for i in 1.. {
        match head.iter().position(|h| h == &format!("F{i}")) {
            Some(c) => cols.push(c),
            None => break,
        }
    }
    if cols.is_empty() {
        return Err(LoadError::MissingColumn {
            path: path_str(path),
            column: "F1".into(),
        });
    }
    let mut out = ForecastSet::new(method_id);
    for rec in records(&mut rdr, path) {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").to_string();
        let row = cols
            .iter()
            .map(|&c| number(path, &rec, rec.get(c).unwrap_or(""), &head[c]))
            .collect::<Result<Vec<_>, _>>()?;
        if out.forecasts.insert(id.clone(), row).is_some() {
            return Err(invalid(path, &rec, format!("duplicate id `{id}`")));
        }
    }
    Ok(out)
}

pub fn write_forecast_csv(path: &Path, forecast: &ForecastSet) -> Result<(), LoadError> {
    let h = forecast.forecasts.values().map(Vec::len).max().unwrap_or(0);
    let io = |source| LoadError::Io {
        path: path_str(path),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io)?);
    let mut line = String::from("id");
    for i in 1..=h {
        line.push_str(&format!(",F{i}"));
    }
    writeln!(out, "{line}").map_err(io)?;
    for (id, row) in &forecast.forecasts {
        let mut line = id.clone();
        for v in row {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// `(method_id, absolute path)` entries in file order.
pub fn load_manifest(path: &Path) -> Result<Vec<(String, PathBuf)>, LoadError> {
    let mut rdr = reader(path)?;
    let head = headers(&mut rdr, path)?;
    let m_col = column(&head, "method_id", path)?;
    let p_col = column(&head, "path", path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in records(&mut rdr, path) {
        let rec = rec?;
        let method = rec.get(m_col).unwrap_or("").to_string();
        if method.is_empty() || !seen.insert(method.clone()) {
            return Err(invalid(path, &rec, format!("empty or duplicate method id `{method}`")));
        }
        out.push((method, base.join(rec.get(p_col).unwrap_or(""))));
    }
    Ok(out)
}

pub fn load_forecasts(manifest: &Path) -> Result<Vec<ForecastSet>, LoadError> {
    load_manifest(manifest)?
        .iter()
        .map(|(m, p)| load_forecast_csv(p, m))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn m5_files(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        let sales = write(
            dir,
            "sales.csv",
            "id,item_id,dept_id,cat_id,store_id,state_id,d_1,d_2,d_3,d_4\n\
             A_S1,A,D,C,S1,X,1,2,3,4\n\
             A_S2,A,D,C,S2,X,0,1,0,2\n\
             B_S1,B,D,C,S1,X,5,5,5,5\n\
             B_S2,B,D,C,S2,X,1,0,1,0\n",
        );
        let cal = write(dir, "calendar.csv", "date,wm_yr_wk,d\nx,100,d_1\nx,100,d_2\nx,101,d_3\nx,101,d_4\n");
        let prices = write(
            dir,
            "prices.csv",
            "store_id,item_id,wm_yr_wk,sell_price\nS1,A,100,2.0\nS2,A,100,2.5\nS1,B,100,1.0\n",
        );
        (sales, prices, cal)
    }

    #[test]
    fn loads_small_m5_layout() {
        let dir = tempfile::tempdir().unwrap();
        let (sales, prices, cal) = m5_files(dir.path());
        let mut opts = LoadOptions::new(2);
        opts.price_window = 2;
        opts.hierarchy = Some(
            HierarchySpec::from_key_lists(vec![
                vec![],
                vec!["store_id".into()],
                vec!["item_id".into(), "store_id".into()],
            ])
            .unwrap(),
        );
        let ds = load_m5(&sales, &prices, &cal, &opts).unwrap();
        assert_eq!(ds.level_counts(), vec![1, 2, 4]);
        assert_eq!(ds.n_train(), 2);
        assert_eq!(ds.level_series(1)[0].test, vec![3.0 + 0.0 + 5.0 + 1.0, 4.0 + 2.0 + 5.0 + 0.0]);
        let p = ds.prices().unwrap();
        assert_eq!(p.get("A_S1").unwrap(), &[Some(2.0), Some(2.0)]);
        assert_eq!(p.get("B_S2").unwrap(), &[None, None]);

        let full = load_m5(&sales, &prices, &cal, &{
            let mut o = opts.clone();
            o.hierarchy = None;
            o
        })
        .unwrap();
        assert_eq!(full.k(), 12);
        assert_eq!(full.level_counts(), vec![1, 1, 2, 1, 1, 1, 1, 2, 2, 2, 2, 4]);
    }

    #[test]
    fn m5_load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (sales, prices, cal) = m5_files(dir.path());
        let mut opts = LoadOptions::new(5);
        opts.price_window = 1;
        assert!(matches!(load_m5(&sales, &prices, &cal, &opts), Err(LoadError::Options(_))));

        let gap = write(dir.path(), "gap.csv", "id,item_id,dept_id,cat_id,store_id,state_id,d_1,d_3\nA,A,D,C,S,X,1,2\n");
        opts.horizon = 1;
        assert!(matches!(
            load_m5(&gap, &prices, &cal, &opts),
            Err(LoadError::MissingColumn { column, .. }) if column == "d_2"
        ));

        let bad = write(
            dir.path(),
            "bad.csv",
            "id,item_id,dept_id,cat_id,store_id,state_id,d_1,d_2,d_3\nA,A,D,C,S,X,1,two,3\n",
        );
        let err = load_m5(&bad, &prices, &cal, &opts).unwrap_err();
        assert!(matches!(err, LoadError::Invalid { line: 2, .. }), "{err}");

        let blank = write(
            dir.path(),
            "blank.csv",
            "id,item_id,dept_id,cat_id,store_id,state_id,d_1,d_2,d_3\nA,A,D,,S,X,1,2,3\n",
        );
        assert!(load_m5(&blank, &prices, &cal, &opts).is_err());
    }

    #[test]
    fn loads_long_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "long.csv",
            "series_id,region,date,value,price\n\
             a,north,2020-01-01,1,2\n\
             a,north,2020-01-02,2,2\n\
             a,north,2020-01-03,3,\n\
             b,south,2020-01-01,4,1\n\
             b,south,2020-01-02,5,1\n\
             b,south,2020-01-03,6,1\n",
        );
        let mut opts = LoadOptions::new(1);
        opts.price_window = 2;
        opts.hierarchy = Some(
            HierarchySpec::from_key_lists(vec![vec![], vec!["region".into()], vec!["id".into()]]).unwrap(),
        );
        let ds = load_long(&p, &opts).unwrap();
        assert_eq!(ds.level_counts(), vec![1, 2, 2]);
        assert_eq!(ds.level_series(1)[0].train, vec![5.0, 7.0]);
        assert_eq!(ds.level_series(1)[0].test, vec![9.0]);
        assert_eq!(ds.prices().unwrap().get("a").unwrap(), &[Some(2.0), Some(2.0)]);

        let missing = write(dir.path(), "m.csv", "series_id,date,value\na,1,1\na,2,1\nb,1,1\n");
        assert!(load_long(&missing, &LoadOptions { price_window: 1, ..LoadOptions::new(1) }).is_err());
    }

    #[test]
    fn forecast_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = ForecastSet::new("m1");
        f.forecasts.insert("a".into(), vec![1.5, 0.1 + 0.2]);
        f.forecasts.insert("b".into(), vec![0.0, 1e-17]);
        let path = dir.path().join("m1.csv");
        write_forecast_csv(&path, &f).unwrap();
        let back = load_forecast_csv(&path, "m1").unwrap();
        assert_eq!(back, f);

        write(dir.path(), "manifest.csv", "method_id,path\nm1,m1.csv\n");
        let all = load_forecasts(&dir.path().join("manifest.csv")).unwrap();
        assert_eq!(all, vec![f]);

        let dup = write(dir.path(), "dup.csv", "id,F1\na,1\na,2\n");
        assert!(matches!(load_forecast_csv(&dup, "x"), Err(LoadError::Invalid { line: 3, .. })));
        let nan = write(dir.path(), "nan.csv", "id,F1\na,NaN\n");
        assert!(load_forecast_csv(&nan, "x").is_err());
    }
}
