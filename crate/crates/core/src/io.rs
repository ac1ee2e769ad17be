//! Ranking files, CSV tables and run manifests.
//!
//! A ranking file holds one ranking per row, items numbered from 1:
//!
//! * `ordering`: the row lists item ids from most to least preferred;
//! * `ranks`: the row lists `σ(1), ..., σ(n)`.
//!
//! Fields are separated by commas or by whitespace. Blank lines and lines
//! starting with `#` are skipped. An optional header row (any row containing
//! a non-numeric field) may name a trailing `label` column holding a
//! nonnegative integer per row.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{DepthRecord, EntryDiscrepancy, SmoothedCellDistribution};
use crate::coast::GrowthTrace;
use crate::error::{Error, Result};
use crate::perm::{Permutation, RankingSample};
use crate::transport::DistortionReport;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingFormat {
    #[default]
    Ordering,
    Ranks,
}

impl FromStr for RankingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordering" => Ok(RankingFormat::Ordering),
            "ranks" => Ok(RankingFormat::Ranks),
            other => Err(Error::InvalidInput(format!("unknown ranking format {:?}", other))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    #[default]
    Comma,
    Whitespace,
}

impl FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comma" | "," => Ok(Delimiter::Comma),
            "whitespace" | "space" => Ok(Delimiter::Whitespace),
            other => Err(Error::InvalidInput(format!("unknown delimiter {:?}", other))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankingFile {
    pub path: PathBuf,
    pub format: RankingFormat,
    /// `None` detects commas per row.
    pub delimiter: Option<Delimiter>,
}

impl RankingFile {
    pub fn new(path: impl Into<PathBuf>, format: RankingFormat) -> Self {
        RankingFile { path: path.into(), format, delimiter: None }
    }
}

pub fn load_rankings(file: &RankingFile) -> Result<RankingSample> {
    let text = fs::read_to_string(&file.path)?;
    parse_rankings(&text, file.format, file.delimiter)
}

fn split_fields(line: &str, delimiter: Option<Delimiter>) -> Vec<&str> {
    let comma = match delimiter {
        Some(Delimiter::Comma) => true,
        Some(Delimiter::Whitespace) => false,
        None => line.contains(','),
    };
    if comma {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses ranking rows; row numbers in errors are 1-based file lines.
pub fn parse_rankings(text: &str, format: RankingFormat, delimiter: Option<Delimiter>) -> Result<RankingSample> {
    let mut n: Option<usize> = None;
    let mut has_label = false;
    let mut header_seen = false;
    let mut rankings = Vec::new();
    let mut labels = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let row = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line, delimiter);
        let numeric = fields.iter().all(|f| f.parse::<usize>().is_ok());
        if !numeric {
            if header_seen || !rankings.is_empty() {
                return Err(Error::Parse { row, msg: "non-numeric field".into() });
            }
            header_seen = true;
            has_label = fields.last().is_some_and(|f| f.eq_ignore_ascii_case("label"));
            continue;
        }
        let mut values: Vec<usize> = fields.iter().map(|f| f.parse().expect("checked numeric")).collect();
        if has_label {
            let label = values.pop().ok_or_else(|| Error::Parse { row, msg: "missing label".into() })?;
            labels.push(label);
        }
        let width = values.len();
        match n {
            None => n = Some(width),
            Some(m) if m != width => {
                return Err(Error::Parse { row, msg: format!("expected {} items, found {}", m, width) })
            }
            _ => {}
        }
        if width == 0 {
            return Err(Error::Parse { row, msg: "empty ranking".into() });
        }
        let perm = match format {
            RankingFormat::Ordering => ordering_from_one_based(&values),
            RankingFormat::Ranks => Permutation::from_ranks_one_based(&values),
        };
        rankings.push(perm.map_err(|e| Error::Parse { row, msg: e.to_string() })?);
    }
    let n = n.ok_or_else(|| Error::InvalidInput("ranking file has no rows".into()))?;
    if has_label {
        RankingSample::with_labels(n, rankings, labels)
    } else {
        RankingSample::new(n, rankings)
    }
}

fn ordering_from_one_based(values: &[usize]) -> Result<Permutation> {
    let items = values
        .iter()
        .map(|&v| v.checked_sub(1).ok_or_else(|| Error::InvalidInput("item ids start at 1".into())))
        .collect::<Result<Vec<_>>>()?;
    Permutation::from_ordering(&items)
}

/// Serializes a sample with a header row and a `label` column when the
/// sample carries labels.
pub fn write_rankings(s: &RankingSample, format: RankingFormat, delimiter: Delimiter) -> String {
    let sep = match delimiter {
        Delimiter::Comma => ",",
        Delimiter::Whitespace => " ",
    };
    let prefix = match format {
        RankingFormat::Ordering => "pos",
        RankingFormat::Ranks => "item",
    };
    let mut header: Vec<String> = (1..=s.n()).map(|k| format!("{}{}", prefix, k)).collect();
    if s.labels().is_some() {
        header.push("label".into());
    }
    let mut out = header.join(sep);
    out.push('\n');
    for (k, r) in s.rankings().iter().enumerate() {
        let mut fields: Vec<String> = match format {
            RankingFormat::Ordering => r.ordering().iter().map(|i| (i + 1).to_string()).collect(),
            RankingFormat::Ranks => r.ranks_one_based().iter().map(usize::to_string).collect(),
        };
        if let Some(l) = s.labels() {
            fields.push(l[k].to_string());
        }
        out.push_str(&fields.join(sep));
        out.push('\n');
    }
    out
}

/// `%.12g`: 12 significant digits, trailing zeros removed, exponent form
/// outside `[1e-4, 1e12)`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{}e{}{:02}", m, if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// One row per growth iteration. Splits are written as `node:i-j` with
/// 1-based items, separated by `;`. Wall times are optional since they
/// differ between runs.
pub fn trace_csv(trace: &GrowthTrace, with_times: bool) -> String {
    let mut header = vec!["iteration", "leaves", "criterion", "splits"];
    if with_times {
        header.push("seconds");
    }
    csv(
        &header,
        trace.records.iter().map(|r| {
            let splits: Vec<String> =
                r.splits.iter().map(|(id, (i, j))| format!("{}:{}-{}", id, i + 1, j + 1)).collect();
            let mut row = vec![r.iteration.to_string(), r.leaves.to_string(), fmt_num(r.criterion), splits.join(";")];
            if with_times {
                row.push(fmt_num(r.seconds));
            }
            row
        }),
    )
}

pub fn depth_csv(records: &[DepthRecord]) -> String {
    csv(
        &["index", "local_depth", "global_depth", "cell", "label"],
        records.iter().map(|d| {
            vec![
                d.index.to_string(),
                fmt_num(d.local_depth),
                fmt_num(d.global_depth),
                d.cell.to_string(),
                d.label.map(|l| l.to_string()).unwrap_or_default(),
            ]
        }),
    )
}

pub fn anomaly_csv(scores: &[f64]) -> String {
    csv(&["index", "score"], scores.iter().enumerate().map(|(k, s)| vec![k.to_string(), fmt_num(*s)]))
}

/// Distortion rows keyed by leaf count; an `E` beyond the enumeration limit
/// is left empty.
pub fn distortion_csv(rows: &[(usize, DistortionReport)]) -> String {
    csv(
        &["leaves", "w", "e", "e_prime", "e_dprime", "coupling_cost"],
        rows.iter().map(|(k, r)| {
            vec![
                k.to_string(),
                fmt_num(r.w),
                r.e.map(fmt_num).unwrap_or_default(),
                fmt_num(r.e_prime),
                fmt_num(r.e_dprime),
                fmt_num(r.coupling_cost),
            ]
        }),
    )
}

/// 0/1 matrix with a header of 1-based ranking indices.
pub fn co_membership_csv(m: &[Vec<bool>]) -> String {
    let mut header = vec!["ranking".to_string()];
    header.extend((1..=m.len()).map(|k| k.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv(
        &header,
        m.iter().enumerate().map(|(k, row)| {
            let mut r = vec![(k + 1).to_string()];
            r.extend(row.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
            r
        }),
    )
}

/// Entry-table discrepancies with 1-based items.
pub fn discrepancy_csv(rows: &[EntryDiscrepancy]) -> String {
    csv(
        &["a", "b", "enumeration", "derived", "appendix"],
        rows.iter().map(|d| {
            vec![
                (d.a + 1).to_string(),
                (d.b + 1).to_string(),
                d.enumeration.map(fmt_num).unwrap_or_default(),
                fmt_num(d.derived),
                fmt_num(d.appendix),
            ]
        }),
    )
}

/// `{ordering: probability}` over the enumerated rankings of the cell, with
/// orderings written as space-separated 1-based item ids.
pub fn smoothed_json(sm: &SmoothedCellDistribution) -> Result<String> {
    let map: BTreeMap<String, f64> = sm
        .scores
        .iter()
        .map(|(p, _)| {
            let key: Vec<String> = p.ordering().iter().map(|i| (i + 1).to_string()).collect();
            (key.join(" "), sm.probability(p))
        })
        .collect();
    Ok(serde_json::to_string_pretty(&map)?)
}

/// Reads one numeric column of a CSV with a header row.
pub fn read_csv_column(text: &str, column: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::InvalidInput("empty CSV".into()))?;
    let idx = header
        .split(',')
        .position(|h| h.trim() == column)
        .ok_or_else(|| Error::InvalidInput(format!("no column {:?}", column)))?;
    lines
        .map(|(k, l)| {
            let field = l.split(',').nth(idx).ok_or_else(|| Error::Parse { row: k + 1, msg: "short row".into() })?;
            field.trim().parse::<f64>().map_err(|e| Error::Parse { row: k + 1, msg: e.to_string() })
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Record of one command run: enough to rerun it and check the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// Input path to SHA-256 hex digest.
    pub inputs: BTreeMap<String, String>,
    /// Output path to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
    pub wall_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_seconds: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Human-readable one-line summary used in command output.
pub fn summarize(values: &[(&str, f64)]) -> String {
    let mut out = String::new();
    for (k, (name, v)) in values.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{}={}", name, fmt_num(*v));
    }
    out
}
