//! Result tables: one row per statistic, persisted atomically as CSV and JSONL.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

pub const CSV_HEADER: [&str; 9] = [
    "experiment",
    "config_hash",
    "seed",
    "param_json",
    "statistic",
    "value",
    "bracket_lo",
    "bracket_hi",
    "pass",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub param_json: String,
    pub statistic: String,
    pub value: f64,
    pub bracket_lo: Option<f64>,
    pub bracket_hi: Option<f64>,
    pub pass: Option<bool>,
}

impl ResultRow {
    pub fn bracket(&mut self, lo: f64, hi: f64) -> &mut Self {
        self.bracket_lo = Some(lo);
        self.bracket_hi = Some(hi);
        self
    }

    /// Symmetric bracket `value -+ half_width`.
    pub fn stderr(&mut self, half_width: f64) -> &mut Self {
        self.bracket(self.value - half_width, self.value + half_width)
    }

    pub fn pass(&mut self, ok: bool) -> &mut Self {
        self.pass = Some(ok);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// A statistical claim ran without its negative control.
    Incomplete,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Incomplete => "incomplete",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    experiment: String,
    config_hash: String,
    seed: u64,
    rows: Vec<ResultRow>,
    needs_negative_control: bool,
    negative_control_done: bool,
}

impl ResultTable {
    pub fn new(experiment: impl Into<String>, config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            config_hash: config_hash.into(),
            seed,
            rows: Vec::new(),
            needs_negative_control: false,
            negative_control_done: false,
        }
    }

    pub fn experiment(&self) -> &str {
        &self.experiment
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn push(&mut self, statistic: impl Into<String>, params: Value, value: f64) -> &mut ResultRow {
        self.rows.push(ResultRow {
            experiment: self.experiment.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            param_json: params.to_string(),
            statistic: statistic.into(),
            value,
            bracket_lo: None,
            bracket_hi: None,
            pass: None,
        });
        self.rows.last_mut().expect("row just pushed")
    }

    /// Marks the run as making a statistical claim that needs a negative control.
    pub fn require_negative_control(&mut self) {
        self.needs_negative_control = true;
    }

    pub fn mark_negative_control_done(&mut self) {
        self.negative_control_done = true;
    }

    /// First row with this statistic name.
    pub fn find(&self, statistic: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.statistic == statistic)
    }

    pub fn find_all<'a>(&'a self, statistic: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.statistic == statistic)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.pass == Some(false))
    }

    pub fn verdict(&self) -> Verdict {
        if self.failures().next().is_some() {
            Verdict::Fail
        } else if self.needs_negative_control && !self.negative_control_done {
            Verdict::Incomplete
        } else {
            Verdict::Pass
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.config_hash.clone(),
                r.seed.to_string(),
                r.param_json.clone(),
                r.statistic.clone(),
                r.value.to_string(),
                opt(r.bracket_lo),
                opt(r.bracket_hi),
                r.pass.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// One JSON object per row, then a summary record with the verdict.
    pub fn to_jsonl_string(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        let summary = serde_json::json!({
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "verdict": self.verdict(),
            "negative_control": self.negative_control_done,
            "rows": self.rows.len(),
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        Ok(out)
    }

    /// Writes `<dir>/<experiment>.csv` and `<dir>/<experiment>.jsonl`, each via a
    /// temporary file renamed into place.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        let jsonl_path = dir.join(format!("{}.jsonl", self.experiment));
        write_atomic(&csv_path, self.to_csv_string()?.as_bytes())?;
        write_atomic(&jsonl_path, self.to_jsonl_string()?.as_bytes())?;
        Ok((csv_path, jsonl_path))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
