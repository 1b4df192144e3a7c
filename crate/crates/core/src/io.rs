//! JSONL and CSV dataset files.
//!
//! JSONL: one object per line, `{"id": "a", "y": 2, "d": [0, 0, 1]}`, with an
//! optional leading header `{"c": 3}`. Rows may carry a candidate set
//! `"s": [1, 2]` instead of `d`; it is read as uniform mass over the set.
//!
//! CSV: header `id,y,d0,...,d{c-1}` then one row per example.
//!
//! Values are read from their decimal text with the scalar's own parser and
//! written with its shortest round-trip representation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::label::{sum_tolerance, LabeledExample, SoftDataset, SoftLabel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// Guess from the file extension (`.csv` is CSV, anything else JSONL).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(Error::param(format!("unknown dataset format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Rescale each row by its sum (for unnormalized nonnegative scores).
    pub normalize: bool,
}

pub fn load_dataset<T: Scalar>(path: &Path, format: DatasetFormat) -> Result<SoftDataset<T>> {
    load_dataset_with(path, format, LoadOptions::default())
}

pub fn load_dataset_with<T: Scalar>(
    path: &Path,
    format: DatasetFormat,
    opts: LoadOptions,
) -> Result<SoftDataset<T>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let reader = BufReader::new(file);
    match format {
        DatasetFormat::Jsonl => read_jsonl(reader, opts),
        DatasetFormat::Csv => read_csv(reader, opts),
    }
}

pub fn save_dataset<T: Scalar>(ds: &SoftDataset<T>, path: &Path, format: DatasetFormat) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    match format {
        DatasetFormat::Jsonl => write_jsonl(ds, &mut w).map_err(io_err)?,
        DatasetFormat::Csv => write_csv(ds, &mut w)?,
    }
    w.flush().map_err(io_err)
}

/// A parsed row before validation.
struct RawExample<T> {
    line: usize,
    id: String,
    y: usize,
    values: Vec<T>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow<'a> {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    y: Option<usize>,
    #[serde(default, borrow)]
    d: Option<Vec<&'a RawValue>>,
    #[serde(default)]
    s: Option<Vec<usize>>,
    #[serde(default)]
    c: Option<usize>,
}

fn parse_value<T: Scalar>(text: &str, line: usize) -> Result<T> {
    text.trim().parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("'{text}' is not a number"),
    })
}

pub fn read_jsonl<T: Scalar, R: BufRead>(reader: R, opts: LoadOptions) -> Result<SoftDataset<T>> {
    let mut header_c = None;
    let mut rows: Vec<RawExample<T>> = Vec::new();
    let mut candidate_rows: Vec<(usize, String, usize, Vec<usize>)> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let malformed = |message: &str| Error::Parse {
            line: lineno,
            message: message.to_string(),
        };
        match row {
            JsonRow {
                c: Some(c),
                id: None,
                y: None,
                d: None,
                s: None,
            } => {
                if header_c.is_some() || !rows.is_empty() || !candidate_rows.is_empty() {
                    return Err(malformed("header object must be the first line"));
                }
                header_c = Some(c);
            }
            JsonRow {
                id: Some(id),
                y: Some(y),
                d: Some(d),
                s: None,
                c: None,
            } => {
                let values = d
                    .iter()
                    .map(|v| parse_value::<T>(v.get(), lineno))
                    .collect::<Result<Vec<_>>>()?;
                rows.push(RawExample {
                    line: lineno,
                    id,
                    y,
                    values,
                });
            }
            JsonRow {
                id: Some(id),
                y: Some(y),
                d: None,
                s: Some(s),
                c: None,
            } => candidate_rows.push((lineno, id, y, s)),
            _ => return Err(malformed("expected {\"c\"} header or a row with id, y and one of d / s")),
        }
    }

    let c = match header_c {
        Some(c) => c,
        None => match rows.first() {
            Some(r) => r.values.len(),
            None if candidate_rows.is_empty() => 0,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "candidate-set rows need a {\"c\": ...} header".into(),
                })
            }
        },
    };

    for (line, id, y, s) in candidate_rows {
        let soft = SoftLabel::<T>::uniform_over(c, &s).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        rows.push(RawExample {
            line,
            id,
            y,
            values: soft.values().to_vec(),
        });
    }
    rows.sort_by_key(|r| r.line);
    finish(c, rows, opts)
}

pub fn write_jsonl<T: Scalar, W: Write>(ds: &SoftDataset<T>, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{{\"c\":{}}}", ds.num_classes())?;
    for ex in ds.examples() {
        let id = serde_json::to_string(&ex.id).expect("strings serialize");
        write!(w, "{{\"id\":{id},\"y\":{},\"d\":[", ex.true_label)?;
        for (j, v) in ex.soft.values().iter().enumerate() {
            if j > 0 {
                write!(w, ",")?;
            }
            write!(w, "{v}")?;
        }
        writeln!(w, "]}}")?;
    }
    Ok(())
}

pub fn read_csv<T: Scalar, R: std::io::Read>(reader: R, opts: LoadOptions) -> Result<SoftDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let c = headers.len().saturating_sub(2);
    let expected = ["id".to_string(), "y".to_string()]
        .into_iter()
        .chain((0..c).map(|j| format!("d{j}")));
    if headers.len() < 4 || !headers.iter().eq(expected) {
        return Err(Error::Parse {
            line: 1,
            message: "header must be id,y,d0,...,d{c-1} with c >= 2".into(),
        });
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let y = record[1].parse::<usize>().map_err(|_| Error::Parse {
            line,
            message: format!("label '{}' is not a class index", &record[1]),
        })?;
        let values = (2..record.len())
            .map(|j| parse_value::<T>(&record[j], line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(RawExample {
            line,
            id: record[0].to_string(),
            y,
            values,
        });
    }
    finish(c, rows, opts)
}

pub fn write_csv<T: Scalar, W: Write>(ds: &SoftDataset<T>, w: &mut W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Parse {
        line: 0,
        message: e.to_string(),
    };
    let mut header = vec!["id".to_string(), "y".to_string()];
    header.extend((0..ds.num_classes()).map(|j| format!("d{j}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for ex in ds.examples() {
        let mut row = vec![ex.id.clone(), ex.true_label.to_string()];
        row.extend(ex.soft.values().iter().map(|v| v.to_string()));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<writer>".into(),
        source,
    })
}

fn finish<T: Scalar>(c: usize, rows: Vec<RawExample<T>>, opts: LoadOptions) -> Result<SoftDataset<T>> {
    let mut shape_errors = Vec::new();
    let mut mass_errors = Vec::new();
    let mut examples = Vec::with_capacity(rows.len());
    for mut row in rows {
        if row.values.len() != c {
            return Err(Error::Parse {
                line: row.line,
                message: format!("expected {c} values, found {}", row.values.len()),
            });
        }
        if row.y >= c {
            shape_errors.push(row.id);
            continue;
        }
        if opts.normalize {
            let sum: T = row.values.iter().copied().sum();
            if sum > T::zero() && row.values.iter().all(|v| *v >= T::zero()) {
                row.values.iter_mut().for_each(|v| *v /= sum);
            }
        }
        let sum: f64 = row.values.iter().map(|v| v.as_f64()).sum();
        let in_range = row
            .values
            .iter()
            .all(|v| v.is_finite() && *v >= T::zero() && *v <= T::one());
        if !in_range || (sum - 1.0).abs() > sum_tolerance::<T>(c) {
            mass_errors.push(row.id);
            continue;
        }
        examples.push(LabeledExample {
            id: row.id,
            true_label: row.y,
            soft: SoftLabel::from_trusted(row.values),
        });
    }
    if !shape_errors.is_empty() {
        return Err(Error::Validation {
            ids: shape_errors,
            reason: format!("true label out of range for c = {c}"),
        });
    }
    if !mass_errors.is_empty() {
        return Err(Error::Validation {
            ids: mass_errors,
            reason: "soft label entries must lie in [0, 1] and sum to 1".into(),
        });
    }
    if c < 2 && examples.is_empty() {
        return Err(Error::param("dataset is empty and has no class-count header"));
    }
    SoftDataset::new(c, examples)
}
