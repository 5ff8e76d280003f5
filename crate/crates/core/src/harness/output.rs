//! Metrics and summary CSV files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::metrics::MetricsRow;
use super::sweep::ArmSummary;
use crate::bidlog::{KPI_NAMES, N_KPI};
use crate::error::{Error, Result};
use crate::fsutil::ensure_parent;

pub const METRICS_HEADER: [&str; 6] = [
    "t",
    "expected_reward",
    "optimal_expected_reward",
    "realized",
    "cum_expected_regret",
    "cum_adoption_rate",
];

pub const SUMMARY_HEADER: [&str; 5] = ["arm", "mean_aer", "mean_aar", "normalized_aer", "normalized_aar"];

pub fn metrics_file_name(arm: &str, seed: u64) -> String {
    format!("metrics_{arm}_{seed}.csv")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Malformed {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes rows with shortest round-trip float formatting, so reading back is exact.
pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(METRICS_HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.expected_reward.to_string(),
            r.optimal_expected_reward.to_string(),
            r.realized.to_string(),
            r.cum_expected_regret.to_string(),
            r.cum_adoption_rate.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

pub fn write_summary(path: &Path, summary: &[ArmSummary]) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_error(path, e))?;
    for s in summary {
        w.write_record([
            s.arm.clone(),
            s.mean_aer.to_string(),
            s.mean_aar.to_string(),
            s.normalized_aer.to_string(),
            s.normalized_aar.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pure-demand KPI table as CSV: one row per demand (`e_pv`, `e_clicks`, `e_gmv`), one
/// column per KPI.
pub fn write_demand_table(path: &Path, table: &[[f64; N_KPI]; N_KPI]) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["demand"];
    header.extend(KPI_NAMES);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (name, row) in KPI_NAMES.iter().zip(table) {
        let mut record = vec![format!("e_{name}")];
        record.extend(row.iter().map(f64::to_string));
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    ensure_parent(path)?;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn rows() -> Vec<MetricsRow> {
        vec![
            MetricsRow {
                t: 1,
                expected_reward: 0.1 + 0.2,
                optimal_expected_reward: 0.7,
                realized: 0,
                cum_expected_regret: 0.7 - 0.30000000000000004,
                cum_adoption_rate: 0.0,
            },
            MetricsRow {
                t: 2,
                expected_reward: 1.0 / 3.0,
                optimal_expected_reward: 0.7,
                realized: 1,
                cum_expected_regret: 0.7666666666666667,
                cum_adoption_rate: 0.5,
            },
        ]
    }

    #[test]
    fn metrics_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(metrics_file_name("a", 3));
        write_metrics(&path, &rows()).unwrap();
        assert_eq!(read_metrics(&path).unwrap(), rows());
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("t,expected_reward,optimal_expected_reward,realized,cum_expected_regret,cum_adoption_rate\n"));
    }

    #[test]
    fn wrong_header_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "t,reward\n1,0.5\n").unwrap();
        assert!(matches!(read_metrics(&path), Err(Error::Malformed { .. })));
    }
}
