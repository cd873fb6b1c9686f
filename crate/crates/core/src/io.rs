//! CSV ingestion for label pairs, label columns, and input rows.
//!
//! All readers accept an optional header line: a first record that does not
//! parse as numbers is skipped. Line numbers in errors are 1-based.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::error::{Error, Result};
use crate::labelstats::PairedLabelDataset;
use crate::tinynet::{batch_from_rows, Matrix};

fn records<R: Read>(reader: R) -> Result<Vec<(u64, StringRecord)>> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_row<T: std::str::FromStr>(line: u64, rec: &StringRecord, width: Option<usize>) -> Result<Vec<T>> {
    if let Some(w) = width {
        if rec.len() != w {
            return Err(Error::Csv {
                line,
                message: format!("expected {w} columns, found {}", rec.len()),
            });
        }
    }
    rec.iter()
        .map(|f| {
            f.parse::<T>().map_err(|_| Error::Csv {
                line,
                message: format!("cannot parse `{f}`"),
            })
        })
        .collect()
}

/// Parses numeric rows, skipping a non-numeric first record as a header.
fn numeric_rows<T: std::str::FromStr, R: Read>(reader: R, width: Option<usize>) -> Result<Vec<Vec<T>>> {
    let recs = records(reader)?;
    let mut rows = Vec::with_capacity(recs.len());
    for (k, (line, rec)) in recs.iter().enumerate() {
        match parse_row::<T>(*line, rec, width) {
            Ok(r) => rows.push(r),
            Err(_) if k == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) => continue,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            line: recs.last().map_or(1, |r| r.0),
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// Reads `source_label,target_label` rows. Label counts default to `max + 1`.
pub fn read_pairs<R: Read>(
    reader: R,
    num_source: Option<usize>,
    num_target: Option<usize>,
) -> Result<PairedLabelDataset> {
    let rows: Vec<Vec<usize>> = numeric_rows(reader, Some(2))?;
    let pairs: Vec<(usize, usize)> = rows.iter().map(|r| (r[0], r[1])).collect();
    let m_s = num_source.unwrap_or_else(|| pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0));
    let m_t = num_target.unwrap_or_else(|| pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0));
    PairedLabelDataset::new(pairs, m_s, m_t)
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<usize>> {
    let rows: Vec<Vec<usize>> = numeric_rows(reader, Some(1))?;
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

pub fn read_inputs<R: Read>(reader: R) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = numeric_rows(reader, None)?;
    batch_from_rows(&rows).map_err(|_| Error::Csv {
        line: 0,
        message: "rows have differing column counts".into(),
    })
}

pub fn read_pairs_file(
    path: impl AsRef<Path>,
    num_source: Option<usize>,
    num_target: Option<usize>,
) -> Result<PairedLabelDataset> {
    read_pairs(File::open(path)?, num_source, num_target)
}

pub fn read_labels_file(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    read_labels(File::open(path)?)
}

pub fn read_inputs_file(path: impl AsRef<Path>) -> Result<Matrix> {
    read_inputs(File::open(path)?)
}

pub fn write_inputs_file(path: impl AsRef<Path>, inputs: &Matrix) -> Result<()> {
    let mut text = String::new();
    for row in inputs.outer_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_pairs_file(path: impl AsRef<Path>, data: &PairedLabelDataset) -> Result<()> {
    let mut text = String::from("source_label,target_label\n");
    for (s, t) in data.pairs() {
        text.push_str(&format!("{s},{t}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}
