use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::args::{Format, OutputArgs};

/// Conventions shared by every report.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub command: &'static str,
    pub units: &'static str,
    pub quantile: &'static str,
    pub ties: &'static str,
    pub tail: &'static str,
    pub normalization: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_kind: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropped_rows: Option<usize>,
}

impl Metadata {
    pub fn new(command: &'static str) -> Self {
        Self {
            tool: format!("tailgini {}", env!("CARGO_PKG_VERSION")),
            command,
            units: "percent",
            quantile: "ceil(np)-th order statistic",
            ties: "max-rank ecdf",
            tail: "strictly below VaR_p (left tail)",
            normalization: "population",
            input_kind: None,
            dropped_rows: None,
        }
    }

    fn comment(&self) -> String {
        let mut s = format!(
            "# {}; command={}; units={}; quantile={}; ties={}; tail={}; normalization={}",
            self.tool, self.command, self.units, self.quantile, self.ties, self.tail, self.normalization
        );
        if let Some(k) = self.input_kind {
            s.push_str(&format!("; input={k}"));
        }
        if let Some(d) = self.dropped_rows {
            s.push_str(&format!("; dropped_rows={d}"));
        }
        s
    }
}

/// A report renderable as CSV (with a leading metadata comment) or JSON.
pub struct Report {
    pub metadata: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn sink(out: &OutputArgs) -> Result<Box<dyn Write>> {
    Ok(match &out.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn emit(report: Report, out: &OutputArgs, default: Format) -> Result<()> {
    let mut w = sink(out)?;
    match out.format.unwrap_or(default) {
        Format::Csv => {
            writeln!(w, "{}", report.metadata.comment())?;
            let mut csv = csv::Writer::from_writer(&mut w);
            csv.write_record(&report.header)?;
            for row in &report.rows {
                csv.write_record(row)?;
            }
            csv.flush()?;
        }
        Format::Json => {
            let doc = serde_json::json!({
                "metadata": report.metadata,
                "results": report.json,
            });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
