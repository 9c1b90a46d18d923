//! File formats: CSV tables, scenario files and JSON records.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;
use std::process::Command;

use anyhow::{bail, Context, Result};
use nf_thin_core::channel::{Scenario, UserLocation};
use nf_thin_core::pso::SwarmResult;
use nf_thin_core::ThinningVector;
use serde::Serialize;
use serde_json::Value;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse().with_context(|| format!("not a number: `{t}`")),
    }
}

/// Writes a header row and then every row to `w`.
pub fn write_table<W: Write>(
    w: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(w);
    out.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            bail!("row has {} fields, header has {}", row.len(), header.len());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table_file(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_table(io::BufWriter::new(f), header, rows)
}

const SCENARIO_HEADER: [&str; 3] = ["user_id", "theta_rad", "range_m"];

pub fn write_scenario<W: Write>(w: W, scenario: &Scenario) -> Result<()> {
    write_table(
        w,
        &SCENARIO_HEADER,
        scenario
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| vec![i.to_string(), fmt_f64(u.angle), fmt_f64(u.range)]),
    )
}

/// Reads users back in `user_id` order. The seed is not stored in the file.
pub fn read_scenario<R: Read>(r: R, seed: u64) -> Result<Scenario> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != SCENARIO_HEADER {
        bail!("scenario header must be {}", SCENARIO_HEADER.join(","));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let id: usize = rec[0]
            .trim()
            .parse()
            .with_context(|| format!("row {}: bad user_id", line + 1))?;
        let user = UserLocation::new(parse_f64(&rec[1])?, parse_f64(&rec[2])?)
            .map_err(|e| anyhow::anyhow!("row {}: {e}", line + 1))?;
        rows.push((id, user));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        bail!("user ids must be 0..K without gaps");
    }
    Scenario::new(rows.into_iter().map(|r| r.1).collect(), seed).map_err(|e| anyhow::anyhow!("{e}"))
}

/// One scheme evaluation in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub scheme: String,
    pub trial: usize,
    pub k: usize,
    pub sum_rate: f64,
    pub min_sinr_db: f64,
}

pub const RATE_HEADER: [&str; 5] = ["scheme", "trial", "K", "sum_rate", "min_sinr_db"];

impl RateRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.scheme.clone(),
            self.trial.to_string(),
            self.k.to_string(),
            fmt_f64(self.sum_rate),
            fmt_f64(self.min_sinr_db),
        ]
    }
}

pub fn write_rate_rows<W: Write>(w: W, rows: &[RateRow]) -> Result<()> {
    write_table(w, &RATE_HEADER, rows.iter().map(RateRow::fields))
}

pub fn read_rate_rows<R: Read>(r: R) -> Result<Vec<RateRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        out.push(RateRow {
            scheme: rec[0].to_string(),
            trial: rec[1].parse()?,
            k: rec[2].parse()?,
            sum_rate: parse_f64(&rec[3])?,
            min_sinr_db: parse_f64(&rec[4])?,
        });
    }
    Ok(out)
}

/// JSON record of a swarm optimization.
#[derive(Debug, Clone, Serialize)]
pub struct SwarmRecord {
    pub kind: String,
    /// Bit string, element 0 first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions_m: Option<Vec<f64>>,
    pub best_cost: f64,
    pub evaluations: usize,
    pub non_finite_evaluations: usize,
    pub cost_history: Vec<f64>,
    pub seed: u64,
    pub version: String,
    pub config: Value,
}

impl SwarmRecord {
    pub fn for_mask(kind: &str, r: &SwarmResult<ThinningVector>, seed: u64, config: Value) -> Self {
        Self::build(kind, Some(r.best.bit_string()), None, r, seed, config)
    }

    pub fn for_positions(kind: &str, r: &SwarmResult<Vec<f64>>, seed: u64, config: Value) -> Self {
        Self::build(kind, None, Some(r.best.clone()), r, seed, config)
    }

    fn build<S>(
        kind: &str,
        mask: Option<String>,
        positions_m: Option<Vec<f64>>,
        r: &SwarmResult<S>,
        seed: u64,
        config: Value,
    ) -> Self {
        Self {
            kind: kind.into(),
            mask,
            positions_m,
            best_cost: r.best_cost,
            evaluations: r.evaluations,
            non_finite_evaluations: r.non_finite,
            cost_history: r.cost_history.clone(),
            seed,
            version: version_string(),
            config,
        }
    }
}

/// Provenance record written next to every figure.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub figure: String,
    pub seed: u64,
    pub version: String,
    pub config: Value,
    pub summary: Value,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = io::BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// `git describe` of the source tree when available, else the crate version.
pub fn version_string() -> String {
    let pkg = concat!("v", env!("CARGO_PKG_VERSION"));
    Command::new("git")
        .args(["describe", "--tags", "--always", "--dirty"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| format!("{pkg}-g{}", s.trim()))
        .unwrap_or_else(|| pkg.to_string())
}
