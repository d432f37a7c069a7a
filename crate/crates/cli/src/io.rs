//! CSV and JSON file formats.
//!
//! Datasets are UTF-8 CSV with a header row and `.` as decimal separator;
//! an empty cell is a missing value. Floats are written with Rust's
//! shortest round-trip formatting, so reading back a written file gives the
//! same values bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use causal_medians::harness::StudyResult;
use causal_medians::metrics::{MetricsRow, ReplicateRecord};
use causal_medians::{Column, Dataset};
use serde::Serialize;

use crate::error::{validation, CliError, Result};

/// Dataset read with complete-case filtering.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub data: Dataset,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

/// Reads the mapped columns of a CSV file. Rows with a missing value in any
/// mapped column are dropped; other columns are ignored.
pub fn read_dataset(path: &Path, outcome: &str, exposure: &str, confounders: &[String]) -> Result<LoadedData> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_dataset_from(file, outcome, exposure, confounders)
        .map_err(|e| match e {
            CliError::Validation(m) => validation(format!("{}: {m}", path.display())),
            other => other,
        })
}

pub fn read_dataset_from<R: std::io::Read>(
    reader: R,
    outcome: &str,
    exposure: &str,
    confounders: &[String],
) -> Result<LoadedData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| validation(e.to_string()))?.clone();
    let wanted: Vec<&str> = [outcome, exposure]
        .into_iter()
        .chain(confounders.iter().map(String::as_str))
        .collect();
    let mut cols = Vec::with_capacity(wanted.len());
    for name in &wanted {
        let mut hits = header.iter().enumerate().filter(|(_, h)| h.trim() == *name);
        let (idx, _) = hits
            .next()
            .ok_or_else(|| validation(format!("column {name:?} is not in the header")))?;
        if hits.next().is_some() {
            return Err(validation(format!("column {name:?} appears more than once in the header")));
        }
        cols.push(idx);
    }

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| validation(e.to_string()))?;
        rows_read += 1;
        let line = r + 2;
        let cells: Vec<&str> = cols.iter().map(|&c| rec.get(c).unwrap_or("").trim()).collect();
        if cells.iter().any(|c| c.is_empty()) {
            rows_dropped += 1;
            continue;
        }
        for (k, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                validation(format!("line {line}, column {:?}: {cell:?} is not a number", wanted[k]))
            })?;
            if !v.is_finite() {
                return Err(validation(format!(
                    "line {line}, column {:?}: value must be finite",
                    wanted[k]
                )));
            }
            if k == 1 && v != 0.0 && v != 1.0 {
                return Err(validation(format!(
                    "line {line}: exposure {exposure:?} must be 0 or 1, got {cell}"
                )));
            }
            values[k].push(v);
        }
    }
    if values[0].is_empty() {
        return Err(validation(format!(
            "no complete cases ({rows_read} row(s) read, all with missing values)"
        )));
    }

    let mut it = values.into_iter();
    let y = it.next().unwrap_or_default();
    let a: Vec<u8> = it.next().unwrap_or_default().into_iter().map(|v| v as u8).collect();
    let confounders = confounders
        .iter()
        .zip(it)
        .map(|(name, values)| Column {
            name: name.clone(),
            values,
        })
        .collect();
    let data = Dataset::new(outcome, y, exposure, a, confounders).map_err(|e| validation(e.to_string()))?;
    Ok(LoadedData {
        data,
        rows_read,
        rows_dropped,
    })
}

/// Writes outcome, exposure and confounders, in that order.
pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![data.outcome_name(), data.exposure_name()];
    header.extend(data.confounders().iter().map(|c| c.name.as_str()));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let mut row = vec![data.outcome()[i].to_string(), data.exposure()[i].to_string()];
        row.extend(data.confounders().iter().map(|c| c.values[i].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| validation(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    validation(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => validation(format!("{}: {other:?}", path.display())),
    };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub const REPLICATES_HEADER: [&str; 8] = [
    "confounding",
    "scenario",
    "method",
    "replicate",
    "delta_hat",
    "se_hat",
    "ci_lower",
    "ci_upper",
];

pub fn write_replicates(path: &Path, records: &[ReplicateRecord]) -> Result<()> {
    write_rows(
        path,
        &REPLICATES_HEADER,
        records.iter().map(|r| {
            vec![
                r.confounding.label().to_string(),
                r.scenario.to_string(),
                r.method.to_string(),
                r.replicate.to_string(),
                r.delta_hat.to_string(),
                r.se_hat.to_string(),
                r.ci_lower.to_string(),
                r.ci_upper.to_string(),
            ]
        }),
    )
}

pub const METRICS_HEADER: [&str; 15] = [
    "confounding",
    "scenario",
    "method",
    "bias",
    "relative_bias_pct",
    "empirical_se",
    "model_se",
    "relative_error_se_pct",
    "coverage_pct",
    "mcse_bias",
    "mcse_relative_bias_pct",
    "mcse_empirical_se",
    "mcse_model_se",
    "mcse_relative_error_se_pct",
    "mcse_coverage_pct",
];

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_rows(
        path,
        &METRICS_HEADER,
        rows.iter().map(|m| {
            let mut row = vec![
                m.confounding.label().to_string(),
                m.scenario.to_string(),
                m.method.to_string(),
            ];
            row.extend(
                [
                    m.bias,
                    m.relative_bias_pct,
                    m.empirical_se,
                    m.model_se,
                    m.relative_error_se_pct,
                    m.coverage_pct,
                    m.mcse_bias,
                    m.mcse_relative_bias_pct,
                    m.mcse_empirical_se,
                    m.mcse_model_se,
                    m.mcse_relative_error_se_pct,
                    m.mcse_coverage_pct,
                ]
                .iter()
                .map(f64::to_string),
            );
            row
        }),
    )
}

pub const PLOTDATA_HEADER: [&str; 6] = ["confounding", "scenario", "sigma", "method", "replicate", "bias"];

/// Long-format per-replicate bias (estimate minus truth), one row per record.
pub fn write_plotdata(path: &Path, result: &StudyResult) -> Result<()> {
    let rows = result.records.iter().filter_map(|r| {
        let s = result.scenarios.iter().find(|s| s.config.id == r.scenario)?;
        Some(vec![
            r.confounding.label().to_string(),
            r.scenario.to_string(),
            s.config.sigma.to_string(),
            r.method.to_string(),
            r.replicate.to_string(),
            (r.delta_hat - s.truth.delta_true).to_string(),
        ])
    });
    write_rows(path, &PLOTDATA_HEADER, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| validation(e.to_string()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn complete_cases_only() {
        let csv = "y,a,c,extra\n1.5,0,2,x\n,1,3,x\n2.5,1,,x\n3.5,1,4,\n4,0,5,\n";
        let got = read_dataset_from(csv.as_bytes(), "y", "a", &names(&["c"])).unwrap();
        assert_eq!((got.rows_read, got.rows_dropped), (5, 2));
        assert_eq!(got.data.outcome(), &[1.5, 3.5, 4.0]);
        assert_eq!(got.data.exposure(), &[0, 1, 0]);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "y,a\n1,2\n2,0\n",
            "y,a\n1,x\n2,0\n",
            "y,b\n1,1\n2,0\n",
            "y,a\n,1\n2,\n",
            "y,a\n1,1\n2,1\n",
        ];
        for csv in bad {
            assert!(read_dataset_from(csv.as_bytes(), "y", "a", &[]).is_err(), "{csv}");
        }
    }
}
