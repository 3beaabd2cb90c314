//! Run reports: the complete, serializable record of one fuzz run,
//! and the derived CSV files for plotting and triage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::DriverError;
use crate::difftest::MismatchLog;

/// Everything one fuzz run produced. Bit-stable: identical seeds and
/// config yield byte-identical serialization (no wall-clock inside).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Program source: "lm" or "random".
    pub generator: String,
    pub budget: usize,
    pub seed: u64,
    pub toggles: Vec<String>,
    /// Coverage-catalog version; runs with different hashes must not
    /// be compared.
    pub catalog_hash: String,
    pub config: RunConfig,
    pub final_coverage_points: usize,
    pub final_coverage_percent: f64,
    pub unique_fingerprints: usize,
    pub total_mismatches: usize,
    pub fingerprints: Vec<FingerprintRow>,
    /// Unique fingerprints attributed to each enabled fault model.
    pub per_toggle_unique: BTreeMap<String, usize>,
    /// One row per executed test, in execution order.
    pub tests: Vec<TestRow>,
}

/// Per-test time series entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub test: u64,
    /// Encoded words simulated for this test.
    pub instrs: usize,
    pub standalone: usize,
    pub incremental: usize,
    /// Accumulated coverage points after this test.
    pub total: usize,
    pub percent: f64,
    /// Mismatches this test produced (all fault models).
    pub mismatches: usize,
    /// Running unique-fingerprint count.
    pub unique_cum: usize,
    /// Running raw mismatch count.
    pub mismatch_cum: usize,
}

/// One deduped mismatch class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintRow {
    pub mnemonic: String,
    pub kind: String,
    pub dut_exception: String,
    pub golden_exception: String,
    pub count: usize,
    pub exemplar_program: u64,
    pub exemplar_step: u32,
}

impl FingerprintRow {
    pub fn from_log(log: &MismatchLog) -> Vec<FingerprintRow> {
        log.rows()
            .map(|(fp, count, program, step)| FingerprintRow {
                mnemonic: fp.mnemonic.map_or("-".into(), |m| m.text().to_string()),
                kind: fp.kind.to_string(),
                dut_exception: fp.exceptions.0.map_or("-".into(), |k| k.name().to_string()),
                golden_exception: fp.exceptions.1.map_or("-".into(), |k| k.name().to_string()),
                count,
                exemplar_program: program,
                exemplar_step: step,
            })
            .collect()
    }
}

impl RunReport {
    /// Canonical serialized form; byte-identical for identical runs.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<RunReport, DriverError> {
        serde_json::from_str(text).map_err(|e| DriverError::Config(format!("report: {e}")))
    }

    /// Coverage rows: `test,standalone,incremental,total,percent`.
    pub fn coverage_csv(&self) -> String {
        let mut out = String::from("test,standalone,incremental,total,percent\n");
        for r in &self.tests {
            out.push_str(&format!(
                "{},{},{},{},{:.4}\n",
                r.test, r.standalone, r.incremental, r.total, r.percent
            ));
        }
        out
    }

    /// Plot-ready series: coverage and mismatch progress per test.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("test,coverage_percent,unique_mismatches,total_mismatches\n");
        for r in &self.tests {
            out.push_str(&format!(
                "{},{:.4},{},{}\n",
                r.test, r.percent, r.unique_cum, r.mismatch_cum
            ));
        }
        out
    }

    /// Deduped mismatch table, mirroring the difftest log format.
    pub fn mismatches_csv(&self) -> String {
        let mut out = String::from(
            "mnemonic,kind,dut_exception,golden_exception,count,exemplar_program,step\n",
        );
        for f in &self.fingerprints {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                f.mnemonic,
                f.kind,
                f.dut_exception,
                f.golden_exception,
                f.count,
                f.exemplar_program,
                f.exemplar_step
            ));
        }
        out
    }
}

/// Aligned two-run series for overlay plotting. Rows span the longer
/// run; a run past its budget leaves its column empty.
pub fn comparison_csv(a: &RunReport, b: &RunReport) -> String {
    let mut out = String::from("test,a_percent,b_percent\n");
    let n = a.tests.len().max(b.tests.len());
    for i in 0..n {
        let ap = a.tests.get(i).map_or(String::new(), |r| format!("{:.4}", r.percent));
        let bp = b.tests.get(i).map_or(String::new(), |r| format!("{:.4}", r.percent));
        out.push_str(&format!("{i},{ap},{bp}\n"));
    }
    out
}

/// Write the report and its derived CSVs into `dir`, returning the
/// paths written. Re-emitting the same report is byte-identical.
pub fn write_report_files(
    report: &RunReport,
    dir: &Path,
    prefix: &str,
) -> Result<Vec<PathBuf>, DriverError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| DriverError::Io(format!("create {}: {e}", dir.display())))?;
    let files = [
        (format!("{prefix}report.json"), report.to_json()),
        (format!("{prefix}coverage.csv"), report.coverage_csv()),
        (format!("{prefix}series.csv"), report.series_csv()),
        (format!("{prefix}mismatches.csv"), report.mismatches_csv()),
    ];
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| DriverError::Io(format!("write {}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
