//! CSV ingestion for returns tables and labeled (classification) tables.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Selects value columns by 1-based position among the value columns (the
/// UCI-style "attribute no. 2") or by header name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    /// Parses `2,24,25`, `1-10` or `NoDur,Durbl`.
    pub fn parse_list(s: &str) -> CliResult<Vec<ColumnRef>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once('-') {
                if let (Ok(a), Ok(b)) = (a.trim().parse::<usize>(), b.trim().parse::<usize>()) {
                    if a == 0 || b < a {
                        return Err(CliError::Config(format!("bad column range {part:?}")));
                    }
                    out.extend((a..=b).map(ColumnRef::Index));
                    continue;
                }
            }
            match part.parse::<usize>() {
                Ok(0) => return Err(CliError::Config("column numbers start at 1".into())),
                Ok(i) => out.push(ColumnRef::Index(i)),
                Err(_) => out.push(ColumnRef::Name(part.to_string())),
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    /// Value columns to keep, in the given order; all when `None`.
    pub columns: Option<Vec<ColumnRef>>,
    /// Divide every value by 100.
    pub percent_to_decimal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schema {
    /// First column is an opaque date string, the rest are asset returns.
    Returns,
    /// One label column mapped to ±1, optional id column, covariates.
    Labeled {
        label_column: String,
        /// Label value mapped to +1. `None` accepts numeric 0/1 or −1/+1 labels.
        positive_label: Option<String>,
        id_column: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnsTable {
    pub dates: Vec<String>,
    pub assets: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTable {
    pub labels: Vec<f64>,
    pub covariates: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Table {
    Returns(ReturnsTable),
    Labeled(LabeledTable),
}

pub fn ingest_csv(path: &Path, schema: &Schema, opts: &IngestOptions) -> CliResult<Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    ingest_str(&text, schema, opts).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn ingest_str(text: &str, schema: &Schema, opts: &IngestOptions) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut seen = HashSet::new();
    if let Some(dup) = header.iter().find(|h| !seen.insert(h.as_str())) {
        return Err(CliError::Data(format!("duplicate column {dup:?} in header")));
    }
    let find = |name: &str| -> CliResult<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("missing column {name:?}")))
    };

    // Record index of the date or label column, and of the value columns.
    let (key_col, value_cols): (usize, Vec<usize>) = match schema {
        Schema::Returns => {
            if header.len() < 2 {
                return Err(CliError::Data("returns file needs a date column and at least one asset".into()));
            }
            (0, (1..header.len()).collect())
        }
        Schema::Labeled { label_column, id_column, .. } => {
            let label = find(label_column)?;
            let id = id_column.as_deref().map(find).transpose()?;
            let values = (0..header.len()).filter(|&c| c != label && Some(c) != id).collect();
            (label, values)
        }
    };
    let selected: Vec<usize> = match &opts.columns {
        None => value_cols.clone(),
        Some(refs) => refs
            .iter()
            .map(|r| match r {
                ColumnRef::Index(i) => value_cols
                    .get(i - 1)
                    .copied()
                    .ok_or_else(|| CliError::Data(format!("missing column number {i} (file has {})", value_cols.len()))),
                ColumnRef::Name(name) => {
                    let c = find(name)?;
                    if value_cols.contains(&c) {
                        Ok(c)
                    } else {
                        Err(CliError::Data(format!("column {name:?} is not a value column")))
                    }
                }
            })
            .collect::<CliResult<_>>()?,
    };
    if selected.is_empty() {
        return Err(CliError::Data("no value columns selected".into()));
    }
    let scale = if opts.percent_to_decimal { 0.01 } else { 1.0 };

    let mut keys = Vec::new();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| CliError::Data(format!("row {line}: {e}")))?;
        if record.len() != header.len() {
            return Err(CliError::Data(format!(
                "row {line}: {} cells, header has {}",
                record.len(),
                header.len()
            )));
        }
        let cell = |c: usize| -> CliResult<&str> {
            let v = &record[c];
            if v.is_empty() {
                return Err(CliError::Data(format!("row {line}, column {:?}: blank cell", header[c])));
            }
            Ok(v)
        };
        keys.push(cell(key_col)?.to_string());
        let values = selected
            .iter()
            .map(|&c| {
                let s = cell(c)?;
                let v: f64 = s.parse().map_err(|_| {
                    CliError::Data(format!("row {line}, column {:?}: non-numeric value {s:?}", header[c]))
                })?;
                if !v.is_finite() {
                    return Err(CliError::Data(format!("row {line}, column {:?}: value is not finite", header[c])));
                }
                Ok(v * scale)
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::Data("file has no data rows".into()));
    }
    let names = selected.iter().map(|&c| header[c].clone()).collect();
    match schema {
        Schema::Returns => Ok(Table::Returns(ReturnsTable {
            dates: keys,
            assets: names,
            rows,
        })),
        Schema::Labeled { positive_label, .. } => {
            let labels = map_labels(&keys, positive_label.as_deref())?;
            Ok(Table::Labeled(LabeledTable {
                labels,
                covariates: names,
                rows,
            }))
        }
    }
}

fn map_labels(raw: &[String], positive: Option<&str>) -> CliResult<Vec<f64>> {
    let mut distinct: Vec<&str> = raw.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() > 2 {
        return Err(CliError::Data(format!("labels are not binary: found {distinct:?}")));
    }
    match positive {
        Some(p) => Ok(raw.iter().map(|v| if v == p { 1.0 } else { -1.0 }).collect()),
        None => raw
            .iter()
            .enumerate()
            .map(|(i, v)| match v.parse::<f64>() {
                Ok(x) if x == 1.0 => Ok(1.0),
                Ok(x) if x == 0.0 || x == -1.0 => Ok(-1.0),
                _ => Err(CliError::Data(format!(
                    "row {}: label {v:?} is not 0/1 or -1/+1; set positive_label",
                    i + 2
                ))),
            })
            .collect(),
    }
}

impl ReturnsTable {
    /// Rows with dates from `start` to `end` inclusive, matched as strings.
    pub fn window(&self, start: &str, end: &str) -> CliResult<Vec<Vec<f64>>> {
        let find = |d: &str| {
            self.dates
                .iter()
                .position(|x| x == d)
                .ok_or_else(|| CliError::Config(format!("date {d:?} is outside the returns data")))
        };
        let (a, b) = (find(start)?, find(end)?);
        if b < a {
            return Err(CliError::Config(format!("window {start}..{end} ends before it starts")));
        }
        Ok(self.rows[a..=b].to_vec())
    }
}

impl LabeledTable {
    /// Outcome vectors `[label, z₁, …, z_d]`.
    pub fn outcomes(&self) -> Vec<Vec<f64>> {
        self.labels
            .iter()
            .zip(&self.rows)
            .map(|(&y, z)| std::iter::once(y).chain(z.iter().copied()).collect())
            .collect()
    }
}
