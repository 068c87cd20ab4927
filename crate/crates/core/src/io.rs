//! File formats: matrix files, TOML configs and the CSV outputs of the
//! experiments.
//!
//! Matrix files are UTF-8 text with one comma-separated row per line and no
//! header. Numbers are written with 17 significant digits, which round-trips
//! every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;

use crate::experiments::{
    fit_loglog_slope, summarize, ClassificationOutcome, Confusion, OracleRow, Reference, ResultRow,
};

pub const RESULTS_HEADER: [&str; 9] = [
    "experiment",
    "trial",
    "N",
    "m",
    "metric",
    "estimate",
    "reference",
    "abs_error",
    "wall_time_ms",
];
pub const SUMMARY_HEADER: [&str; 7] = [
    "metric",
    "N",
    "trials",
    "mean_estimate",
    "mean_abs_error",
    "reference",
    "slope",
];
pub const ORACLE_HEADER: [&str; 7] = ["experiment", "trial", "m", "metric", "estimate", "oracle", "rel_error"];
pub const ERRORS_HEADER: [&str; 4] = ["metric", "mean_error", "std_error", "repeats"];

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: row {row}, column {column}: cannot parse {token:?} as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        token: String,
    },
    #[error("{path}: row {row} has {found} entries, expected {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: no matrix rows")]
    Empty { path: PathBuf },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses matrix text. Blank lines are skipped; `row` and `column` in errors
/// are 1-based line and field numbers.
pub fn parse_matrix(text: &str, path: &Path) -> Result<DMatrix<f64>, IoError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for (col, token) in line.split(',').enumerate() {
            let token = token.trim();
            let value: f64 = token.parse().map_err(|_| IoError::Parse {
                path: path.to_path_buf(),
                row: line_no + 1,
                column: col + 1,
                token: token.to_string(),
            })?;
            data.push(value);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(expected) if expected != count => {
                return Err(IoError::Ragged {
                    path: path.to_path_buf(),
                    row: line_no + 1,
                    expected,
                    found: count,
                })
            }
            _ => {}
        }
        rows += 1;
    }
    match cols {
        Some(c) => Ok(DMatrix::from_row_slice(rows, c, &data)),
        None => Err(IoError::Empty {
            path: path.to_path_buf(),
        }),
    }
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, IoError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    parse_matrix(&text, path)
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(",")).expect("writing to a String");
    }
    out
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), IoError> {
    fs::write(path, format_matrix(m)).map_err(io_error(path))
}

/// Reads a TOML config; unknown keys and type errors are reported with the
/// offending key.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    toml::from_str(&text).map_err(|e| IoError::Config {
        path: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The results CSV of a convergence run.
pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(RESULTS_HEADER).map_err(csv_error(path))?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.trial.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.metric.to_string(),
            r.estimate.to_string(),
            opt(r.reference),
            opt(r.abs_error),
            opt(r.wall_time_ms),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

pub fn write_oracle(path: &Path, rows: &[OracleRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(ORACLE_HEADER).map_err(csv_error(path))?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.trial.to_string(),
            r.m.to_string(),
            r.metric.to_string(),
            r.estimate.to_string(),
            r.oracle.to_string(),
            r.rel_error.to_string(),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

/// `<results>.summary.csv` next to the results file.
pub fn summary_path(results: &Path) -> PathBuf {
    let mut name = results.as_os_str().to_owned();
    name.push(".summary.csv");
    PathBuf::from(name)
}

/// Per-metric, per-`N` trial means with the fitted log-log slope of the mean
/// absolute error (empty when fewer than three usable path counts).
pub fn write_summary(path: &Path, rows: &[ResultRow], reference: Reference) -> Result<(), IoError> {
    let mut metrics: Vec<_> = Vec::new();
    for r in rows {
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric);
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(SUMMARY_HEADER).map_err(csv_error(path))?;
    for metric in metrics {
        let subset: Vec<ResultRow> = rows.iter().filter(|r| r.metric == metric).cloned().collect();
        let slope = fit_loglog_slope(&subset).ok();
        for p in summarize(&subset) {
            w.write_record([
                metric.to_string(),
                p.n.to_string(),
                p.trials.to_string(),
                p.mean_estimate.to_string(),
                opt(p.mean_abs_error),
                reference.name().to_string(),
                opt(slope),
            ])
            .map_err(csv_error(path))?;
        }
    }
    w.flush().map_err(io_error(path))
}

/// `errors.csv` and one `confusion_<metric>_<repeat>.csv` per metric and
/// repeat (rows: true class, columns: predicted class, no header). Returns
/// the paths written.
pub fn write_classification(dir: &Path, outcome: &ClassificationOutcome) -> Result<Vec<PathBuf>, IoError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let errors_path = dir.join("errors.csv");
    let mut w = csv::Writer::from_path(&errors_path).map_err(csv_error(&errors_path))?;
    w.write_record(ERRORS_HEADER).map_err(csv_error(&errors_path))?;
    for row in &outcome.table {
        w.write_record([
            row.metric.to_string(),
            row.mean.to_string(),
            row.std.to_string(),
            row.errors.len().to_string(),
        ])
        .map_err(csv_error(&errors_path))?;
    }
    w.flush().map_err(io_error(&errors_path))?;
    let mut written = vec![errors_path];
    for (row, per_repeat) in outcome.table.iter().zip(&outcome.confusions) {
        for (repeat, confusion) in per_repeat.iter().enumerate() {
            let path = dir.join(format!("confusion_{}_{}.csv", row.metric, repeat));
            fs::write(&path, format_confusion(confusion)).map_err(io_error(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn format_confusion(c: &Confusion) -> String {
    c.iter()
        .map(|row| {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            cells.join(",") + "\n"
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::Metric;
    use crate::experiments::MetricErrors;
    use proptest::prelude::*;

    #[test]
    fn parse_errors_locate_the_token() {
        let p = Path::new("a.csv");
        let m = parse_matrix("1, 2\n3,4\n\n", p).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        match parse_matrix("1,2\n3,x4\n", p) {
            Err(IoError::Parse {
                row: 2,
                column: 2,
                token,
                ..
            }) => assert_eq!(token, "x4"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_matrix("1,2\n3\n", p),
            Err(IoError::Ragged { row: 2, .. })
        ));
        assert!(matches!(parse_matrix("\n", p), Err(IoError::Empty { .. })));
        let msg = parse_matrix("1,,2", p).unwrap_err().to_string();
        assert!(msg.contains("row 1, column 2"), "{msg}");
    }

    proptest! {
        #[test]
        fn matrix_text_roundtrips_exactly(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 25),
        ) {
            let m = DMatrix::from_fn(rows, cols, |i, j| seed[i * 5 + j]);
            let back = parse_matrix(&format_matrix(&m), Path::new("x")).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn csv_outputs_have_documented_headers() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<ResultRow> = [10usize, 20, 40]
            .iter()
            .map(|&n| ResultRow {
                experiment: "e".into(),
                trial: 0,
                n,
                m: 5,
                metric: Metric::Loghs,
                estimate: 1.0 / n as f64,
                reference: Some(0.0),
                abs_error: Some(1.0 / n as f64),
                wall_time_ms: None,
            })
            .collect();
        let out = dir.path().join("run.csv");
        write_results(&out, &rows).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RESULTS_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "e,0,10,5,loghs,0.1,0,0.1,");

        let summary = summary_path(&out);
        assert!(summary.to_string_lossy().ends_with("run.csv.summary.csv"));
        write_summary(&summary, &rows, Reference::Oracle).unwrap();
        let text = fs::read_to_string(&summary).unwrap();
        assert_eq!(text.lines().next().unwrap(), SUMMARY_HEADER.join(","));
        assert_eq!(text.lines().count(), 4);
        let first = text.lines().nth(1).unwrap();
        assert!(first.starts_with("loghs,10,1,0.1,0.1,oracle,"), "{first}");
        let slope: f64 = first.rsplit(',').next().unwrap().parse().unwrap();
        assert!((slope + 1.0).abs() < 1e-12);

        let outcome = ClassificationOutcome {
            table: vec![MetricErrors {
                metric: Metric::Hs,
                errors: vec![0.25],
                mean: 0.25,
                std: 0.0,
            }],
            confusions: vec![vec![vec![vec![3, 1], vec![0, 4]]]],
        };
        let written = write_classification(dir.path(), &outcome).unwrap();
        assert_eq!(written.len(), 2);
        let errors = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
        assert_eq!(errors, "metric,mean_error,std_error,repeats\nhs,0.25,0,1\n");
        let confusion = fs::read_to_string(dir.path().join("confusion_hs_0.csv")).unwrap();
        assert_eq!(confusion, "3,1\n0,4\n");
    }

    #[test]
    fn config_errors_name_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "sigma1 = 1.0\nsigma2 = 1.1\nrepeatz = 2\n").unwrap();
        let err = read_config::<crate::experiments::ClassificationConfig>(&path).unwrap_err();
        assert!(err.to_string().contains("repeatz"), "{err}");
    }
}
