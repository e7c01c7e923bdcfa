//! Input checks run before any experiment.

use std::collections::HashSet;
use std::fmt::Write;

use serde::Serialize;

use crate::config::{Experiment, RunConfig};
use crate::hierarchy::HierarchicalDataset;
use crate::io::{load_forecast_csv, load_manifest};
use crate::measures::{ForecastSet, SeriesScale, Weighting};
use crate::run::{load_dataset, load_reference, DatasetSummary, Inputs, PriceDiagnostics};

/// Ids listed by name in a finding before the rest are only counted.
const LISTED_IDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Fatal,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl Finding {
    pub fn fatal(message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Fatal,
            message: message.into(),
        }
    }

    pub fn warning(message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Warning,
            message: message.into(),
        }
    }

    pub fn is_fatal(&self) -> bool {
        self.severity == Severity::Fatal
    }
}

/// Series per level whose scaled measures are undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCensus {
    pub level: usize,
    pub name: String,
    pub series: usize,
    /// Constant training history: MASE and RMSSE excluded.
    pub zero_naive_scale: usize,
    /// All-zero test actuals: WAPE excluded.
    pub zero_test_actuals: usize,
}

pub fn zero_scale_census(ds: &HierarchicalDataset) -> Vec<LevelCensus> {
    ds.spec()
        .levels()
        .iter()
        .enumerate()
        .map(|(j, def)| {
            let scales: Vec<SeriesScale> = ds.level_series(j + 1).iter().map(SeriesScale::of).collect();
            LevelCensus {
                level: j + 1,
                name: def.name.clone(),
                series: scales.len(),
                zero_naive_scale: scales.iter().filter(|s| s.naive_abs == 0.0).count(),
                zero_test_actuals: scales.iter().filter(|s| s.test_abs == 0.0).count(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSummary>,
    pub methods: Vec<String>,
    pub zero_scale: Vec<LevelCensus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prices: Option<PriceDiagnostics>,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn fatal_count(&self) -> usize {
        self.findings.iter().filter(|f| f.is_fatal()).count()
    }

    pub fn is_ok(&self) -> bool {
        self.fatal_count() == 0
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(d) = &self.dataset {
            let _ = writeln!(
                out,
                "series: {} bottom, {} total; {} training days, horizon {}",
                d.bottom_series, d.total_series, d.n_train, d.horizon
            );
            for (l, c) in d.levels.iter().zip(&self.zero_scale) {
                let _ = writeln!(
                    out,
                    "  level {:>2} {:<20} {:>7} series  ({} zero naive scale, {} zero test actuals)",
                    l.level, l.name, l.series, c.zero_naive_scale, c.zero_test_actuals
                );
            }
        }
        let _ = writeln!(out, "methods: {}", self.methods.len());
        if let Some(p) = &self.prices {
            match &p.error {
                None => {
                    let _ = writeln!(
                        out,
                        "price weights: total dollar sales {:.2}, weight sum {:.9}, {} series-days without a price",
                        p.total_dollar_sales, p.weight_sum, p.missing_price_days
                    );
                }
                Some(e) => {
                    let _ = writeln!(out, "price weights unavailable: {e}");
                }
            }
        }
        for f in &self.findings {
            let tag = match f.severity {
                Severity::Fatal => "FATAL",
                Severity::Warning => "warning",
            };
            let _ = writeln!(out, "{tag}: {}", f.message);
        }
        let _ = writeln!(
            out,
            "{} fatal finding(s), {} warning(s)",
            self.fatal_count(),
            self.findings.len() - self.fatal_count()
        );
        out
    }
}

fn id_list(ids: &[&str]) -> String {
    let mut s = ids.iter().take(LISTED_IDS).map(|i| format!("`{i}`")).collect::<Vec<_>>().join(", ");
    if ids.len() > LISTED_IDS {
        let _ = write!(s, " and {} more", ids.len() - LISTED_IDS);
    }
    s
}

/// Coverage findings for one method against the dataset's bottom series.
pub fn check_forecast(ds: &HierarchicalDataset, f: &ForecastSet) -> Vec<Finding> {
    let h = ds.horizon();
    let mut findings = Vec::new();
    let mut missing = Vec::new();
    let mut bad_length = Vec::new();
    let mut non_finite = Vec::new();
    let mut negative = 0usize;
    for b in ds.bottom() {
        match f.forecasts.get(&b.id) {
            None => missing.push(b.id.as_str()),
            Some(row) if row.len() != h => bad_length.push(b.id.as_str()),
            Some(row) => {
                if row.iter().any(|v| !v.is_finite()) {
                    non_finite.push(b.id.as_str());
                }
                negative += row.iter().filter(|v| **v < 0.0).count();
            }
        }
    }
    let m = &f.method_id;
    if !missing.is_empty() {
        findings.push(Finding::fatal(format!(
            "method `{m}`: no forecast for {} series: {}",
            missing.len(),
            id_list(&missing)
        )));
    }
    if !bad_length.is_empty() {
        findings.push(Finding::fatal(format!(
            "method `{m}`: forecast length differs from horizon {h} for {}",
            id_list(&bad_length)
        )));
    }
    if !non_finite.is_empty() {
        findings.push(Finding::fatal(format!(
            "method `{m}`: non-finite forecasts for {}",
            id_list(&non_finite)
        )));
    }
    if negative > 0 {
        findings.push(Finding::warning(format!("method `{m}`: {negative} negative forecast values")));
    }
    let known: HashSet<&str> = ds.bottom().iter().map(|b| b.id.as_str()).collect();
    let extra = f.forecasts.keys().filter(|id| !known.contains(id.as_str())).count();
    if extra > 0 {
        findings.push(Finding::warning(format!(
            "method `{m}`: {extra} forecast rows for unknown series ignored"
        )));
    }
    findings
}

/// Loads and checks everything `cfg` refers to. Inputs are returned when
/// they loaded, even if findings are fatal.
pub fn validate_config(cfg: &RunConfig) -> (ValidationReport, Option<Inputs>) {
    let mut report = ValidationReport {
        config_hash: cfg.hash(),
        dataset: None,
        methods: Vec::new(),
        zero_scale: Vec::new(),
        prices: None,
        findings: Vec::new(),
    };
    let findings = &mut report.findings;

    let dataset = match load_dataset(cfg) {
        Ok(d) => Some(d),
        Err(e) => {
            findings.push(Finding::fatal(format!("dataset: {e}")));
            None
        }
    };

    let mut forecasts = Vec::new();
    match load_manifest(&cfg.resolve(&cfg.forecasts.manifest)) {
        Ok(entries) => {
            for (method, path) in entries {
                report.methods.push(method.clone());
                match load_forecast_csv(&path, &method) {
                    Ok(f) => forecasts.push(f),
                    Err(e) => findings.push(Finding::fatal(format!("method `{method}`: {e}"))),
                }
            }
        }
        Err(e) => findings.push(Finding::fatal(format!("manifest: {e}"))),
    }
    if report.methods.len() < 2 {
        findings.push(Finding::fatal(format!(
            "{} method(s) listed; at least 2 are needed to rank",
            report.methods.len()
        )));
    }

    let reference = match load_reference(cfg) {
        Ok(r) => r,
        Err(e) => {
            findings.push(Finding::fatal(format!("reference ranking: {e}")));
            None
        }
    };
    let ranked: Vec<String> = match &reference {
        Some(r) => {
            let methods: HashSet<&str> = report.methods.iter().map(String::as_str).collect();
            let unknown: Vec<&str> = r.ids().iter().map(String::as_str).filter(|id| !methods.contains(id)).collect();
            if !unknown.is_empty() {
                findings.push(Finding::fatal(format!(
                    "reference ranking lists methods without forecasts: {}",
                    id_list(&unknown)
                )));
            }
            let listed: HashSet<&str> = r.ids().iter().map(String::as_str).collect();
            let unranked = report.methods.iter().filter(|m| !listed.contains(m.as_str())).count();
            if unranked > 0 {
                findings.push(Finding::warning(format!(
                    "{unranked} method(s) missing from the reference ranking never enter a Top-K subset"
                )));
            }
            r.ids().to_vec()
        }
        None => report.methods.clone(),
    };
    let n_ranked = ranked.len();
    let mut ks = cfg.top_ks(n_ranked);
    ks.push(cfg.top_k(n_ranked));
    for k in ks {
        if k < 2 || k > n_ranked {
            findings.push(Finding::fatal(format!(
                "Top-{k} needs between 2 and {n_ranked} ranked methods"
            )));
        }
    }

    if let Some(ds) = &dataset {
        report.dataset = Some(DatasetSummary::of(ds));
        report.zero_scale = zero_scale_census(ds);
        for c in &report.zero_scale {
            if c.zero_naive_scale > 0 || c.zero_test_actuals > 0 {
                findings.push(Finding::warning(format!(
                    "level {} ({}): {} series with zero naive scale, {} with all-zero test actuals; excluded from affected measures",
                    c.level, c.name, c.zero_naive_scale, c.zero_test_actuals
                )));
            }
        }
        for f in &forecasts {
            findings.extend(check_forecast(ds, f));
        }

        let prices = PriceDiagnostics::of(ds);
        let wants_price = [cfg.measures(), cfg.matrix_measures(), cfg.magic_measures()]
            .into_iter()
            .flatten()
            .flatten()
            .any(|m| m.weighting == Weighting::Price)
            || cfg.run.experiment.includes(Experiment::Sweep);
        if let Some(e) = &prices.error {
            let msg = format!("price weights unavailable: {e}");
            findings.push(if wants_price { Finding::fatal(msg) } else { Finding::warning(msg) });
        } else if prices.missing_price_days > 0 {
            findings.push(Finding::warning(format!(
                "{} series-days sold units without a listed price; priced at 0",
                prices.missing_price_days
            )));
        }
        report.prices = Some(prices);

        if cfg.run.experiment.includes(Experiment::Temporal) {
            let h = ds.horizon();
            let cut = cfg.run.temporal_cut.unwrap_or(h / 2);
            if cut == 0 || cut >= h {
                findings.push(Finding::fatal(format!(
                    "temporal cut {cut} must fall strictly inside the horizon of {h} days"
                )));
            }
        }
        if let Some(levels) = &cfg.run.magic.levels {
            if let Some(bad) = levels.iter().find(|&&l| l == 0 || l > ds.k()) {
                findings.push(Finding::fatal(format!(
                    "magic level {bad} is outside 1..={}",
                    ds.k()
                )));
            }
        }
    }

    let inputs = match dataset {
        Some(dataset) if forecasts.len() == report.methods.len() => Some(Inputs {
            dataset,
            forecasts,
            reference,
        }),
        _ => None,
    };
    (report, inputs)
}
