//! Metric rows and their CSV encoding.
//!
//! One row per training iteration, with a fixed column set and order.
//! Values print through the shortest round-trip float representation, so
//! a parse of an emitted file recovers them exactly. Non-finite values
//! are refused at emission time.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::{Algo, IterationRecord};

pub const CSV_HEADER: &str = "iteration,seed,algo,utility,c_pi,dpe,ipe,spe,lambda_metric,\
                              wasserstein_gap,loan_rate_plus,loan_rate_minus,adjusted_c_pi";

/// One training iteration's metrics, as written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub iteration: usize,
    pub seed: u64,
    pub algo: Algo,
    pub utility: f64,
    pub c_pi: f64,
    pub dpe: f64,
    pub ipe: f64,
    pub spe: f64,
    pub lambda_metric: f64,
    pub wasserstein_gap: f64,
    pub loan_rate_plus: f64,
    pub loan_rate_minus: f64,
    pub adjusted_c_pi: f64,
}

/// Names of the numeric columns, in emission order.
pub const METRIC_COLUMNS: [&str; 10] = [
    "utility",
    "c_pi",
    "dpe",
    "ipe",
    "spe",
    "lambda_metric",
    "wasserstein_gap",
    "loan_rate_plus",
    "loan_rate_minus",
    "adjusted_c_pi",
];

impl MetricRow {
    pub fn from_record(
        iteration: usize,
        seed: u64,
        algo: Algo,
        record: &IterationRecord,
    ) -> MetricRow {
        MetricRow {
            iteration,
            seed,
            algo,
            utility: record.utility,
            c_pi: record.report.c_pi,
            dpe: record.report.dpe,
            ipe: record.report.ipe,
            spe: record.report.spe,
            lambda_metric: record.report.lambda_metric,
            wasserstein_gap: record.report.wasserstein_gap,
            loan_rate_plus: record.report.loan_rate[0],
            loan_rate_minus: record.report.loan_rate[1],
            adjusted_c_pi: record.adjusted_c_pi,
        }
    }

    pub fn metric(&self, column: &str) -> f64 {
        match column {
            "utility" => self.utility,
            "c_pi" => self.c_pi,
            "dpe" => self.dpe,
            "ipe" => self.ipe,
            "spe" => self.spe,
            "lambda_metric" => self.lambda_metric,
            "wasserstein_gap" => self.wasserstein_gap,
            "loan_rate_plus" => self.loan_rate_plus,
            "loan_rate_minus" => self.loan_rate_minus,
            "adjusted_c_pi" => self.adjusted_c_pi,
            other => panic!("unknown metric column {other}"),
        }
    }

    fn check_finite(&self, index: usize) -> Result<()> {
        for column in METRIC_COLUMNS {
            if !self.metric(column).is_finite() {
                return Err(Error::NonFiniteMetric {
                    index,
                    column: METRIC_COLUMNS
                        .iter()
                        .find(|&&c| c == column)
                        .copied()
                        .unwrap_or("unknown"),
                });
            }
        }
        Ok(())
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.seed,
            self.algo.label(),
            self.utility,
            self.c_pi,
            self.dpe,
            self.ipe,
            self.spe,
            self.lambda_metric,
            self.wasserstein_gap,
            self.loan_rate_plus,
            self.loan_rate_minus,
            self.adjusted_c_pi,
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<MetricRow> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(Error::parse(
                "metric row",
                format!("expected 13 fields, got {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|e| Error::parse("metric row", format!("field {i}: {e}")))
        };
        Ok(MetricRow {
            iteration: fields[0]
                .parse()
                .map_err(|e| Error::parse("metric row", format!("iteration: {e}")))?,
            seed: fields[1]
                .parse()
                .map_err(|e| Error::parse("metric row", format!("seed: {e}")))?,
            algo: Algo::parse(fields[2])
                .ok_or_else(|| Error::parse("metric row", format!("unknown algo {:?}", fields[2])))?,
            utility: num(3)?,
            c_pi: num(4)?,
            dpe: num(5)?,
            ipe: num(6)?,
            spe: num(7)?,
            lambda_metric: num(8)?,
            wasserstein_gap: num(9)?,
            loan_rate_plus: num(10)?,
            loan_rate_minus: num(11)?,
            adjusted_c_pi: num(12)?,
        })
    }
}

fn header_line() -> String {
    CSV_HEADER.split_whitespace().collect()
}

/// Render rows to a complete CSV document (header included, LF endings).
pub fn render_csv(rows: &[MetricRow]) -> Result<String> {
    let mut out = header_line();
    out.push('\n');
    for (index, row) in rows.iter().enumerate() {
        row.check_finite(index)?;
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    Ok(out)
}

/// Write rows to a CSV file.
pub fn emit_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    let text = render_csv(rows)?;
    std::fs::write(path, text)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Parse a CSV document produced by [`render_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<MetricRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == header_line() => {}
        Some(other) => {
            return Err(Error::parse(
                "metric csv",
                format!("unexpected header {other:?}"),
            ))
        }
        None => return Err(Error::parse("metric csv", "empty document".to_string())),
    }
    lines.map(MetricRow::parse_csv_line).collect()
}

/// An incremental CSV writer: header first, then one flushed line per
/// row, so an interrupted run keeps everything written so far.
pub struct CsvStream {
    file: std::fs::File,
    rows_written: usize,
}

impl CsvStream {
    pub fn create(path: &Path) -> Result<CsvStream> {
        let mut file = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        writeln!(file, "{}", header_line())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(CsvStream {
            file,
            rows_written: 0,
        })
    }

    pub fn append(&mut self, row: &MetricRow) -> Result<()> {
        row.check_finite(self.rows_written)?;
        writeln!(self.file, "{}", row.to_csv_line())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io("appending metric row".to_string(), e))?;
        self.rows_written += 1;
        Ok(())
    }
}
