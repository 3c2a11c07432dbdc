//! Return panels: loading, validation, price conversion and date alignment.
//!
//! Returns are stored in percent units. Dates are opaque tokens ordered by
//! their string representation, so ISO-8601 dates sort chronologically and
//! no calendar arithmetic is ever performed.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An aligned, date-indexed matrix of asset returns in percent.
///
/// Values are stored column-major: `column(j)` is the full return history
/// of asset `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    dates: Vec<String>,
    assets: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl ReturnPanel {
    /// Builds a panel after checking every invariant: `n >= 2`, `d >= 1`,
    /// equal column lengths, finite cells, strictly increasing dates and
    /// unique non-empty asset names.
    pub fn new(dates: Vec<String>, assets: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if assets.is_empty() {
            return Err(Error::InvalidPanel("panel has no assets".into()));
        }
        if assets.len() != columns.len() {
            return Err(Error::InvalidPanel(format!(
                "{} asset names for {} columns",
                assets.len(),
                columns.len()
            )));
        }
        let n = dates.len();
        if n < 2 {
            return Err(Error::InvalidPanel(format!(
                "{n} row(s); at least 2 complete rows required"
            )));
        }
        let mut seen = HashSet::new();
        for name in &assets {
            if name.trim().is_empty() {
                return Err(Error::InvalidPanel("empty asset name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidPanel(format!("duplicate asset name `{name}`")));
            }
        }
        for (name, col) in assets.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::InvalidPanel(format!(
                    "column `{name}` has {} entries, expected {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPanel(format!("column `{name}` has a non-finite cell")));
            }
        }
        for w in dates.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateDate(w[0].clone()));
            }
            if w[0] > w[1] {
                return Err(Error::InvalidPanel(format!(
                    "dates not strictly increasing: `{}` before `{}`",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            dates,
            assets,
            columns,
        })
    }

    /// Builds a panel with generated date tokens `t000000, t000001, ...`.
    pub fn from_columns(assets: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let dates = (0..n).map(|i| format!("t{i:06}")).collect();
        Self::new(dates, assets, columns)
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Sample mean of every column.
    pub fn means(&self) -> Vec<f64> {
        self.columns.iter().map(|c| crate::estimators::mean(c)).collect()
    }

    /// The portfolio return series `sum_j weights[j] * column(j)`.
    pub fn portfolio(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.n_assets(), "weight vector length");
        let mut out = vec![0.0; self.n_obs()];
        for (w, col) in weights.iter().zip(&self.columns) {
            for (o, x) in out.iter_mut().zip(col) {
                *o += w * x;
            }
        }
        out
    }

    /// Writes the panel as CSV with a leading `date` column.
    ///
    /// Values use Rust's shortest round-trip float formatting, so reading the
    /// output back yields a bit-identical panel.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.assets.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (i, date) in self.dates.iter().enumerate() {
            let mut rec = vec![date.clone()];
            rec.extend(self.columns.iter().map(|c| c[i].to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// How the numeric cells of an input file are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// Cells are already returns in percent.
    #[default]
    Returns,
    /// Cells are prices; converted with `100 * (P_t / P_{t-1} - 1)`.
    SimplePrices,
    /// Cells are prices; converted with `100 * ln(P_t / P_{t-1})`.
    LogPrices,
}

impl InputKind {
    pub fn label(self) -> &'static str {
        match self {
            InputKind::Returns => "returns",
            InputKind::SimplePrices => "simple",
            InputKind::LogPrices => "log",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub kind: InputKind,
}

/// A loaded panel together with ingestion metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPanel {
    pub panel: ReturnPanel,
    /// Rows discarded because at least one cell was missing.
    pub dropped_rows: usize,
    pub kind: InputKind,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty()
        || c.eq_ignore_ascii_case("na")
        || c.eq_ignore_ascii_case("nan")
        || c.eq_ignore_ascii_case("null")
}

/// Loads a return (or price) panel from a CSV file.
pub fn load_returns<P: AsRef<Path>>(path: P, options: &LoadOptions) -> Result<LoadedPanel> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_returns(file, options)
}

/// Parses a CSV stream whose first column is `date` and whose remaining
/// headers name the assets. Lines starting with `#` are comments.
///
/// Rows are ordered by date token; rows with any missing cell are dropped
/// and counted. Price input is converted to returns after the drop, so each
/// return spans two consecutive complete rows.
pub fn read_returns<R: Read>(reader: R, options: &LoadOptions) -> Result<LoadedPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.len() < 2 {
        return Err(Error::InvalidPanel(
            "expected a date column followed by at least one asset column".into(),
        ));
    }
    if !headers[0].eq_ignore_ascii_case("date") {
        return Err(Error::InvalidPanel(format!(
            "first header must be `date`, found `{}`",
            &headers[0]
        )));
    }
    let assets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dropped = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = line + 1;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("{} fields, expected {}", rec.len(), headers.len()),
            });
        }
        let date = rec[0].to_string();
        if date.is_empty() {
            return Err(Error::Parse {
                row,
                column: "date".into(),
                message: "empty date".into(),
            });
        }
        let mut values = Vec::with_capacity(assets.len());
        let mut missing = false;
        for (cell, name) in rec.iter().skip(1).zip(&assets) {
            if is_missing(cell) {
                missing = true;
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                message: format!("non-numeric cell `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.clone(),
                    message: format!("non-finite cell `{cell}`"),
                });
            }
            values.push(v);
        }
        if missing {
            dropped += 1;
        } else {
            rows.push((date, values));
        }
    }

    rows.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateDate(w[0].0.clone()));
    }

    let (dates, columns) = match options.kind {
        InputKind::Returns => transpose(rows, assets.len()),
        InputKind::SimplePrices | InputKind::LogPrices => {
            prices_to_returns(rows, assets.len(), options.kind, &assets)?
        }
    };
    if dates.len() < 2 {
        return Err(Error::InvalidPanel(format!(
            "{} complete row(s); at least 2 required",
            dates.len()
        )));
    }
    let panel = ReturnPanel::new(dates, assets, columns)?;
    Ok(LoadedPanel {
        panel,
        dropped_rows: dropped,
        kind: options.kind,
    })
}

fn transpose(rows: Vec<(String, Vec<f64>)>, d: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut columns = vec![Vec::with_capacity(rows.len()); d];
    let mut dates = Vec::with_capacity(rows.len());
    for (date, values) in rows {
        dates.push(date);
        for (c, v) in columns.iter_mut().zip(values) {
            c.push(v);
        }
    }
    (dates, columns)
}

fn prices_to_returns(
    rows: Vec<(String, Vec<f64>)>,
    d: usize,
    kind: InputKind,
    assets: &[String],
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut dates = Vec::new();
    let mut columns = vec![Vec::new(); d];
    for (row, (date, values)) in rows.iter().enumerate() {
        if let Some(j) = values.iter().position(|&p| p <= 0.0) {
            return Err(Error::Parse {
                row: row + 1,
                column: assets[j].clone(),
                message: "prices must be positive".into(),
            });
        }
        if row == 0 {
            continue;
        }
        let prev = &rows[row - 1].1;
        dates.push(date.clone());
        for j in 0..d {
            let ratio = values[j] / prev[j];
            let r = match kind {
                InputKind::LogPrices => 100.0 * ratio.ln(),
                _ => 100.0 * (ratio - 1.0),
            };
            columns[j].push(r);
        }
    }
    Ok((dates, columns))
}

/// Inner-joins panels on their dates; columns keep the concatenation order.
pub fn align(panels: &[ReturnPanel]) -> Result<ReturnPanel> {
    let first = panels
        .first()
        .ok_or_else(|| Error::InvalidInput("align needs at least one panel".into()))?;
    let mut seen = HashSet::new();
    for name in panels.iter().flat_map(|p| p.assets()) {
        if !seen.insert(name.as_str()) {
            return Err(Error::InvalidInput(format!(
                "asset `{name}` appears in more than one panel"
            )));
        }
    }
    let lookups: Vec<HashMap<&str, usize>> = panels
        .iter()
        .map(|p| {
            p.dates()
                .iter()
                .enumerate()
                .map(|(i, d)| (d.as_str(), i))
                .collect()
        })
        .collect();
    let common: Vec<&String> = first
        .dates()
        .iter()
        .filter(|d| lookups.iter().all(|l| l.contains_key(d.as_str())))
        .collect();
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let mut assets = Vec::new();
    let mut columns = Vec::new();
    for (panel, lookup) in panels.iter().zip(&lookups) {
        for (name, col) in panel.assets().iter().zip(panel.columns()) {
            assets.push(name.clone());
            columns.push(common.iter().map(|d| col[lookup[d.as_str()]]).collect());
        }
    }
    ReturnPanel::new(common.into_iter().cloned().collect(), assets, columns)
}
