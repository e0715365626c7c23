//! Report rows and their CSV/JSON renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::harness::config::ExperimentConfig;

pub const CSV_HEADER: &str = "size_index,N,M,P,metric,value,stderr,bound,pass";

/// Comparison a row is judged by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Bound {
    Value(f64),
    Range(f64, f64),
}

impl Bound {
    fn csv(&self) -> String {
        match self {
            Bound::Value(x) => format!("{x}"),
            Bound::Range(lo, hi) => format!("{lo}..{hi}"),
        }
    }
}

/// Trial `k` of a row ran on stream `first_stream + k` of `base_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialSeeds {
    pub base_seed: u64,
    pub first_stream: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// `None` for rows that summarize across sizes.
    pub size_index: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "P")]
    pub p: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub bound: Option<Bound>,
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<TrialSeeds>,
}

impl ReportRow {
    pub fn new(metric: impl Into<String>, value: f64) -> Self {
        ReportRow {
            size_index: None,
            n: None,
            m: None,
            p: None,
            metric: metric.into(),
            value,
            stderr: None,
            bound: None,
            pass: None,
            seeds: None,
        }
    }

    pub fn size(mut self, index: usize, [n, m, p]: [usize; 3]) -> Self {
        self.size_index = Some(index);
        self.n = Some(n);
        self.m = Some(m);
        self.p = Some(p);
        self
    }

    pub fn stderr(mut self, se: f64) -> Self {
        self.stderr = Some(se);
        self
    }

    pub fn seeds(mut self, seeds: TrialSeeds) -> Self {
        self.seeds = Some(seeds);
        self
    }

    /// Passes when `value <= bound + slack`.
    pub fn at_most(mut self, bound: f64, slack: f64) -> Self {
        self.bound = Some(Bound::Value(bound));
        self.pass = Some(self.value <= bound + slack);
        self
    }

    /// Passes when `value >= bound - slack`.
    pub fn at_least(mut self, bound: f64, slack: f64) -> Self {
        self.bound = Some(Bound::Value(bound));
        self.pass = Some(self.value >= bound - slack);
        self
    }

    /// Passes when `|value - target| <= tol`.
    pub fn near(mut self, target: f64, tol: f64) -> Self {
        self.bound = Some(Bound::Value(target));
        self.pass = Some((self.value - target).abs() <= tol);
        self
    }

    pub fn within(mut self, lo: f64, hi: f64) -> Self {
        self.bound = Some(Bound::Range(lo, hi));
        self.pass = Some(self.value >= lo && self.value <= hi);
        self
    }

    pub fn verdict(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    fn csv_line(&self) -> String {
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            opt(self.size_index),
            opt(self.n),
            opt(self.m),
            opt(self.p),
            self.metric,
            self.value,
            self.stderr.map(|s| s.to_string()).unwrap_or_default(),
            self.bound.map(|b| b.csv()).unwrap_or_default(),
            self.pass.map(|b| b.to_string()).unwrap_or_default()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config_echo: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub overall_pass: bool,
}

impl SweepReport {
    pub fn new(config: &ExperimentConfig, rows: Vec<ReportRow>) -> Self {
        let overall_pass = rows.iter().all(|r| r.pass != Some(false));
        SweepReport {
            config_echo: config.clone(),
            rows,
            overall_pass,
        }
    }

    pub fn failing_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.pass == Some(false))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.csv_line());
        }
        out
    }

    pub fn row_csv(row: &ReportRow) -> String {
        row.csv_line()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Writes `<prefix>.csv` and `<prefix>.json` and returns both paths.
    pub fn write(&self, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let with = |ext: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(ext);
            PathBuf::from(s)
        };
        let (csv, json) = (with(".csv"), with(".json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json())?;
        Ok((csv, json))
    }
}
