//! Pipeline orchestration: corpus → pretrain → refine → optimize →
//! fuzz/baseline → report, plus the file-level command layer the CLI
//! calls into.

mod config;
mod fuzz;
mod report;
mod stages;

pub use config::{
    parse_config, CorpusSection, FuzzSection, RlSection, RunConfig, Stage1Section, Stage2Section,
    Stage3Section,
};
pub use fuzz::{
    baseline_random_fuzz, directed_program, fuzz, fuzz_with_prompts, replay, run_batch,
    FuzzBatchResult, ReplayReport, TestResult,
};
pub use report::{comparison_csv, write_report_files, FingerprintRow, RunReport, TestRow};
pub use stages::{
    draw_prompts, invalid_rate, load_corpus, stage1_pretrain, stage2_refine, stage3_optimize,
    PretrainOutput, RlStageOutput,
};

use crate::lm::LmError;
use crate::rl::RlError;
use crate::sim::SimError;

/// Any failure in the pipeline or its plumbing.
#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("corpus is empty")]
    CorpusEmpty,
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("replay: {0}")]
    Replay(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl DriverError {
    /// Process exit code class: 2 for configuration problems, 3 for
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Config(_) | DriverError::CorpusEmpty => 2,
            DriverError::Lm(LmError::ConfigInvalid(_)) => 2,
            _ => 3,
        }
    }
}

/// File-level commands: each runs one pipeline step against an output
/// directory and returns the files it wrote.
pub mod commands {
    use std::path::{Path, PathBuf};

    use super::config::RunConfig;
    use super::report::write_report_files;
    use super::{stages, DriverError};
    use crate::corpus::{write_corpus, CorpusManifest};
    use crate::lm::{load_checkpoint, loss_curve_csv, save_checkpoint, Params};
    use crate::rl::rl_log_csv;

    fn write(path: &Path, content: &str) -> Result<(), DriverError> {
        std::fs::write(path, content)
            .map_err(|e| DriverError::Io(format!("write {}: {e}", path.display())))
    }

    fn ensure_dir(dir: &Path) -> Result<(), DriverError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| DriverError::Io(format!("create {}: {e}", dir.display())))
    }

    fn read(path: &Path) -> Result<String, DriverError> {
        std::fs::read_to_string(path)
            .map_err(|e| DriverError::Io(format!("read {}: {e}", path.display())))
    }

    /// Synthesize the training corpus and write it with its manifest.
    pub fn synth_corpus(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, DriverError> {
        cfg.validate()?;
        ensure_dir(out)?;
        let samples = crate::corpus::synth_generate(cfg.corpus.n, cfg.corpus.seed);
        if samples.is_empty() {
            return Err(DriverError::CorpusEmpty);
        }
        let asm = out.join("corpus.asm");
        let manifest = out.join("corpus_manifest.json");
        write(&asm, &write_corpus(&samples))?;
        let m = CorpusManifest::describe(&samples, cfg.corpus.seed);
        let mut json = serde_json::to_string_pretty(&m).expect("manifest serializes");
        json.push('\n');
        write(&manifest, &json)?;
        Ok(vec![asm, manifest])
    }

    /// Stage 1: pretrain and write the checkpoint plus loss curve.
    pub fn pretrain(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, DriverError> {
        ensure_dir(out)?;
        let samples = stages::load_corpus(cfg)?;
        let result = stages::stage1_pretrain(cfg, &samples)?;
        let ckpt = out.join("stage1.ckpt");
        let curve = out.join("stage1_loss.csv");
        save_checkpoint(&result.params, &ckpt)?;
        write(&curve, &loss_curve_csv(&result.losses))?;
        Ok(vec![ckpt, curve])
    }

    /// Stage 2: refine the stage-1 checkpoint against the
    /// disassembler reward.
    pub fn refine(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, DriverError> {
        ensure_dir(out)?;
        let start = load_checkpoint(&out.join("stage1.ckpt"))?;
        let samples = stages::load_corpus(cfg)?;
        let result = stages::stage2_refine(&start, cfg, &samples)?;
        let ckpt = out.join("stage2.ckpt");
        let log = out.join("stage2_log.csv");
        save_checkpoint(&result.params, &ckpt)?;
        write(&log, &rl_log_csv("invalid_rate", &result.log))?;
        Ok(vec![ckpt, log])
    }

    /// Stage 3: optimize the stage-2 checkpoint against the coverage
    /// reward.
    pub fn optimize(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, DriverError> {
        ensure_dir(out)?;
        let start = load_checkpoint(&out.join("stage2.ckpt"))?;
        let samples = stages::load_corpus(cfg)?;
        let result = stages::stage3_optimize(&start, cfg, &samples)?;
        let ckpt = out.join("stage3.ckpt");
        let log = out.join("stage3_log.csv");
        save_checkpoint(&result.params, &ckpt)?;
        write(&log, &rl_log_csv("coverage_percent", &result.log))?;
        Ok(vec![ckpt, log])
    }

    /// Newest checkpoint in the pipeline order, for fuzzing.
    fn latest_checkpoint(out: &Path) -> Result<Params<f32>, DriverError> {
        for name in ["stage3.ckpt", "stage2.ckpt", "stage1.ckpt"] {
            let path = out.join(name);
            if path.exists() {
                return Ok(load_checkpoint(&path)?);
            }
        }
        Err(DriverError::Config(format!(
            "no checkpoint in {}; run pretrain first",
            out.display()
        )))
    }

    /// Fuzz with the newest trained checkpoint and write the report.
    pub fn fuzz(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, DriverError> {
        cfg.validate()?;
        ensure_dir(out)?;
        let params = latest_checkpoint(out)?;
        let budget = cfg.fuzz.tests;
        let report = if cfg.fuzz.directed_prompts && budget > 0 {
            let samples = stages::load_corpus(cfg)?;
            if samples.is_empty() {
                return Err(DriverError::CorpusEmpty);
            }
            let prompts = stages::draw_prompts(
                &samples,
                budget,
                (cfg.stage2.prompt_min, cfg.stage2.prompt_max),
                cfg.fuzz.seed ^ 0x50524f4d,
            );
            super::fuzz::fuzz_with_prompts(&params, &prompts, budget, cfg)?
        } else {
            super::fuzz::fuzz(&params, budget, cfg)?
        };
        write_report_files(&report, out, "")
    }

    /// Run the random baseline at the same budget and write its report.
    pub fn baseline(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, DriverError> {
        cfg.validate()?;
        ensure_dir(out)?;
        let report = super::fuzz::baseline_random_fuzz(cfg.fuzz.tests, cfg)?;
        write_report_files(&report, out, "baseline_")
    }

    /// Assemble and differentially execute one program file; returns
    /// the rendered trace and mismatch listing.
    pub fn replay(cfg: &RunConfig, program: &Path) -> Result<String, DriverError> {
        let text = read(program)?;
        let result = super::fuzz::replay(&text, cfg)?;
        Ok(result.render())
    }

    /// Re-derive the CSV files from reports already in `out`; when
    /// both a fuzz and a baseline report exist, also emit the aligned
    /// comparison series.
    pub fn report(out: &Path) -> Result<Vec<PathBuf>, DriverError> {
        let main_path = out.join("report.json");
        let baseline_path = out.join("baseline_report.json");
        if !main_path.exists() && !baseline_path.exists() {
            return Err(DriverError::Config(format!(
                "no report.json or baseline_report.json in {}; run fuzz or baseline first",
                out.display()
            )));
        }
        let mut written = Vec::new();
        let main = if main_path.exists() {
            let r = super::report::RunReport::from_json(&read(&main_path)?)?;
            written.extend(write_report_files(&r, out, "")?);
            Some(r)
        } else {
            None
        };
        let base = if baseline_path.exists() {
            let r = super::report::RunReport::from_json(&read(&baseline_path)?)?;
            written.extend(write_report_files(&r, out, "baseline_")?);
            Some(r)
        } else {
            None
        };
        if let (Some(a), Some(b)) = (main, base) {
            if a.catalog_hash != b.catalog_hash {
                return Err(DriverError::Config(format!(
                    "catalog hash mismatch: {} vs {}; runs are not comparable",
                    a.catalog_hash, b.catalog_hash
                )));
            }
            let cmp = out.join("comparison.csv");
            write(&cmp, &super::report::comparison_csv(&a, &b))?;
            written.push(cmp);
        }
        Ok(written)
    }
}
