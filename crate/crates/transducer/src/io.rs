//! CSV formats: calibration sets, utility matrices, generic tables for
//! outputs and decisions, and the plot-ready curve and long-run files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! emitted file parses back to the same values.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use transducer_core::{CalibrationRecord, CalibrationSet, UtilityMatrix};

use crate::error::{CliError, Result};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// A CSV file held as strings, with the source line of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub source: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub lines: Vec<u64>,
}

impl Table {
    pub fn read<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(source, e))?
            .iter()
            .map(str::to_owned)
            .collect();
        if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
            return Err(CliError::parse(source, 1, "missing header row"));
        }
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(source, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != headers.len() {
                return Err(CliError::parse(
                    source,
                    line,
                    format!("expected {} fields, found {}", headers.len(), rec.len()),
                ));
            }
            rows.push(rec.iter().map(str::to_owned).collect());
            lines.push(line);
        }
        Ok(Self {
            source: source.to_owned(),
            headers,
            rows,
            lines,
        })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read(open(path)?, path)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| CliError::parse(&self.source, 1, format!("missing column `{name}`")))
    }

    pub fn float(&self, row: usize, col: usize) -> Result<f64> {
        parse_float(&self.rows[row][col], &self.source, self.lines[row], &self.headers[col])
    }

    pub fn index(&self, row: usize, col: usize) -> Result<usize> {
        let s = &self.rows[row][col];
        s.parse::<usize>().map_err(|_| {
            CliError::parse(
                &self.source,
                self.lines[row],
                format!(
                    "column `{}`: expected a non-negative integer, found `{s}`",
                    self.headers[col]
                ),
            )
        })
    }

    /// Indices of the `y1..yd` columns; `d` is the count of consecutive
    /// such names present.
    pub fn output_columns(&self) -> Vec<usize> {
        let mut cols = Vec::new();
        while let Some(c) = self.column(&format!("y{}", cols.len() + 1)) {
            cols.push(c);
        }
        cols
    }

    pub fn outputs(&self, row: usize, cols: &[usize]) -> Result<Vec<f64>> {
        cols.iter().map(|&c| self.float(row, c)).collect()
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        write_rows(w, &self.headers, self.rows.iter().cloned())
    }
}

fn csv_error(source: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(source, io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            CliError::parse(source, line, format!("expected {expected_len} fields, found {len}"))
        }
        csv::ErrorKind::Utf8 { err, .. } => CliError::parse(source, line, format!("invalid UTF-8: {err}")),
        other => CliError::parse(source, line, format!("{other:?}")),
    }
}

fn parse_float(s: &str, source: &Path, line: u64, column: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| {
        CliError::parse(
            source,
            line,
            format!("column `{column}`: expected a number, found `{s}`"),
        )
    })?;
    if !v.is_finite() {
        return Err(CliError::parse(
            source,
            line,
            format!("column `{column}`: non-finite value `{s}`"),
        ));
    }
    Ok(v)
}

pub fn write_rows<W: Write, I>(w: W, headers: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut wtr = csv::Writer::from_writer(w);
    let to_io = |e: csv::Error| CliError::io("<output>", io::Error::other(e));
    wtr.write_record(headers).map_err(to_io)?;
    for row in rows {
        wtr.write_record(&row).map_err(to_io)?;
    }
    wtr.flush().map_err(|e| CliError::io("<output>", e))
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Reads `class,y1[,y2,...]`. Class labels are 0-based integers; with
/// `n_classes` given, larger labels are rejected.
pub fn read_calibration<R: Read>(reader: R, source: &Path, n_classes: Option<usize>) -> Result<CalibrationSet> {
    let table = Table::read(reader, source)?;
    if table.headers[0] != "class" {
        return Err(CliError::parse(source, 1, "first column must be `class`"));
    }
    let d = table.headers.len() - 1;
    for (j, h) in table.headers[1..].iter().enumerate() {
        if *h != format!("y{}", j + 1) {
            return Err(CliError::parse(
                source,
                1,
                format!("expected column `y{}`, found `{h}`", j + 1),
            ));
        }
    }
    if d == 0 {
        return Err(CliError::parse(source, 1, "no output columns"));
    }
    if table.rows.is_empty() {
        return Err(CliError::format(source, "no data rows"));
    }
    let cols: Vec<usize> = (1..=d).collect();
    let mut records = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        let label = table.index(i, 0)?;
        if let Some(c) = n_classes {
            if label >= c {
                return Err(CliError::parse(
                    source,
                    table.lines[i],
                    format!("unknown class label {label} (model has {c} classes)"),
                ));
            }
        }
        records.push(CalibrationRecord::new(label, table.outputs(i, &cols)?));
    }
    let set = match n_classes {
        Some(c) => CalibrationSet::new(records, c, d)?,
        None => CalibrationSet::from_records(records)?,
    };
    Ok(set)
}

pub fn read_calibration_file(path: &Path, n_classes: Option<usize>) -> Result<CalibrationSet> {
    read_calibration(open(path)?, path, n_classes)
}

pub fn write_calibration<W: Write>(w: W, data: &CalibrationSet) -> Result<()> {
    let mut headers = vec!["class".to_owned()];
    headers.extend((1..=data.y_dim()).map(|j| format!("y{j}")));
    let rows = data.records().iter().map(|r| {
        let mut row = vec![r.class_label.to_string()];
        row.extend(r.output.iter().map(|&v| fmt(v)));
        row
    });
    write_rows(w, &headers, rows)
}

/// One matrix row per line, comma separated; blank lines and lines
/// starting with `#` are skipped.
pub fn read_matrix<R: Read>(reader: R, source: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(source, e))?;
        let lineno = i as u64 + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .enumerate()
            .map(|(j, f)| parse_float(f.trim(), source, lineno, &format!("{}", j + 1)))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::parse(
                    source,
                    lineno,
                    format!("expected {} entries, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::format(source, "empty matrix"));
    }
    Ok(rows)
}

pub fn read_utility<R: Read>(reader: R, source: &Path) -> Result<UtilityMatrix> {
    Ok(UtilityMatrix::from_rows(&read_matrix(reader, source)?)?)
}

pub fn read_utility_file(path: &Path) -> Result<UtilityMatrix> {
    read_utility(open(path)?, path)
}

pub fn write_matrix<W: Write>(mut w: W, rows: &[Vec<f64>]) -> Result<()> {
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| CliError::io("<output>", e))?;
    }
    Ok(())
}

/// `sample,utility` rows of a long-run utility distribution.
pub fn write_long_run<W: Write>(w: W, values: &[f64]) -> Result<()> {
    let headers = ["sample".to_owned(), "utility".to_owned()];
    let rows = values.iter().enumerate().map(|(t, &v)| vec![t.to_string(), fmt(v)]);
    write_rows(w, &headers, rows)
}

pub fn read_long_run<R: Read>(reader: R, source: &Path) -> Result<Vec<f64>> {
    let table = Table::read(reader, source)?;
    let col = table.require_column("utility")?;
    let values = (0..table.rows.len())
        .map(|i| table.float(i, col))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(CliError::format(source, "no long-run utility rows"));
    }
    Ok(values)
}

pub fn read_long_run_file(path: &Path) -> Result<Vec<f64>> {
    read_long_run(open(path)?, path)
}

/// Histogram rows `lo,hi,count` over `bins` equal-width bins.
pub fn write_histogram<W: Write>(w: W, values: &[f64], bins: usize) -> Result<()> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let headers = ["lo".to_owned(), "hi".to_owned(), "count".to_owned()];
    let rows = counts.iter().enumerate().map(|(b, &n)| {
        vec![
            fmt(lo + b as f64 * width),
            fmt(lo + (b + 1) as f64 * width),
            n.to_string(),
        ]
    });
    write_rows(w, &headers, rows)
}
