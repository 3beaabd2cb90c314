//! The differential fuzz loop: generate a batch of programs, run each
//! on the golden interpreter and on every enabled fault model, compare
//! traces, dedupe mismatches, and accumulate coverage.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::RunConfig;
use super::report::{FingerprintRow, RunReport, TestRow};
use super::DriverError;
use crate::corpus::BOS;
use crate::coverage::{catalog_hash, percent, update, CoverageSet};
use crate::difftest::{compare, fingerprint, Fingerprint, Mismatch, MismatchLog};
use crate::isa::{encode, EncodedWord, Format, Instruction, Mnemonic, Register};
use crate::lm::{sample, Params};
use crate::rl::GenText;
use crate::sim::{run_program, BugToggle, ExecConfig, SimError, ToggleSet};

/// Per-test artifact of one fuzz round, before merging.
pub struct TestResult {
    pub program: Vec<EncodedWord>,
    pub hits: CoverageSet,
    pub mismatches: Vec<(BugToggle, Mismatch)>,
}

/// One generate-simulate-compare round over a batch of programs.
pub struct FuzzBatchResult {
    pub tests: Vec<TestResult>,
    /// Union of every test's hits (the coverage merge of the batch).
    pub merged: CoverageSet,
    /// Unique mismatch classes within the batch.
    pub fingerprints: BTreeMap<Fingerprint, usize>,
}

enum Source<'a> {
    Model {
        params: &'a Params<f32>,
        prompts: Option<&'a [Vec<u16>]>,
    },
    Random,
}

/// Fuzz with the trained model, prompting each generation with `BOS`
/// alone.
pub fn fuzz(
    params: &Params<f32>,
    budget: usize,
    cfg: &RunConfig,
) -> Result<RunReport, DriverError> {
    run_fuzz(
        Source::Model {
            params,
            prompts: None,
        },
        budget,
        cfg,
    )
}

/// Fuzz with the trained model, cycling through directed prompts
/// (token sequences starting with `BOS`), e.g. corpus prefixes chosen
/// to steer generation toward particular behavior.
pub fn fuzz_with_prompts(
    params: &Params<f32>,
    prompts: &[Vec<u16>],
    budget: usize,
    cfg: &RunConfig,
) -> Result<RunReport, DriverError> {
    if prompts.is_empty() {
        return Err(DriverError::Config("prompt list is empty".into()));
    }
    run_fuzz(
        Source::Model {
            params,
            prompts: Some(prompts),
        },
        budget,
        cfg,
    )
}

/// The non-ML baseline: programs of uniformly sampled, format-correct
/// instructions, with identical budget, simulation, and reporting.
pub fn baseline_random_fuzz(budget: usize, cfg: &RunConfig) -> Result<RunReport, DriverError> {
    run_fuzz(Source::Random, budget, cfg)
}

fn run_fuzz(source: Source<'_>, budget: usize, cfg: &RunConfig) -> Result<RunReport, DriverError> {
    cfg.validate()?;
    let fz = &cfg.fuzz;
    let toggles = fz.toggle_set()?;
    let base = ExecConfig {
        mem_size: fz.mem_size,
        entry_pc: 0,
        step_cap: fz.step_cap,
        toggles: ToggleSet::EMPTY,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(fz.workers)
        .build()
        .map_err(|e| DriverError::Runtime(format!("worker pool: {e}")))?;

    let mut sample_rng = ChaCha8Rng::seed_from_u64(fz.seed);
    let mut total = CoverageSet::new();
    let mut log = MismatchLog::new();
    let mut per_toggle: BTreeMap<String, BTreeSet<Fingerprint>> = BTreeMap::new();
    for t in toggles.iter() {
        per_toggle.insert(t.name().to_string(), BTreeSet::new());
    }
    let mut rows: Vec<TestRow> = Vec::with_capacity(budget);

    let mut executed = 0usize;
    while executed < budget {
        let n = fz.batch.min(budget - executed);
        let programs: Vec<Vec<EncodedWord>> = (0..n)
            .map(|i| {
                let test_id = (executed + i) as u64;
                match &source {
                    Source::Model { params, prompts } => {
                        let bos = [BOS];
                        let prompt: &[u16] = match prompts {
                            Some(ps) => &ps[test_id as usize % ps.len()],
                            None => &bos,
                        };
                        lm_program(params, prompt, cfg, sample_rng.gen())
                    }
                    Source::Random => random_program(fz.max_instrs, fz.seed, test_id),
                }
            })
            .collect();

        let evals: Result<Vec<TestResult>, SimError> = pool.install(|| {
            programs
                .into_par_iter()
                .map(|program| execute_test(program, &base, toggles))
                .collect()
        });
        let evals = evals?;

        for (i, eval) in evals.into_iter().enumerate() {
            let test_id = (executed + i) as u64;
            let (stats, merged) =
                update(&total, &eval.hits).expect("simulator coverage points are in-catalog");
            debug_assert!(merged.len() >= total.len(), "coverage series must not shrink");
            total = merged;
            for (toggle, m) in &eval.mismatches {
                log.record(test_id, m);
                per_toggle
                    .get_mut(toggle.name())
                    .expect("toggle sets preallocated")
                    .insert(fingerprint(m));
            }
            rows.push(TestRow {
                test: test_id,
                instrs: eval.program.len(),
                standalone: stats.standalone,
                incremental: stats.incremental,
                total: stats.total,
                percent: percent(&total),
                mismatches: eval.mismatches.len(),
                unique_cum: log.unique(),
                mismatch_cum: log.total(),
            });
        }
        executed += n;
    }

    let generator = match source {
        Source::Model { .. } => "lm",
        Source::Random => "random",
    };
    Ok(RunReport {
        generator: generator.to_string(),
        budget,
        seed: fz.seed,
        toggles: toggles.iter().map(|t| t.name().to_string()).collect(),
        catalog_hash: format!("{:016x}", catalog_hash()),
        config: cfg.clone(),
        final_coverage_points: total.len(),
        final_coverage_percent: percent(&total),
        unique_fingerprints: log.unique(),
        total_mismatches: log.total(),
        fingerprints: FingerprintRow::from_log(&log),
        per_toggle_unique: per_toggle
            .into_iter()
            .map(|(k, v)| (k, v.len()))
            .collect(),
        tests: rows,
    })
}

/// Sample one program from the model: decode everything after `BOS`
/// (prompt body included), clamp to the per-test instruction cap.
fn lm_program(params: &Params<f32>, prompt: &[u16], cfg: &RunConfig, seed: u64) -> Vec<EncodedWord> {
    let fz = &cfg.fuzz;
    let out = sample(
        params,
        prompt,
        fz.temperature,
        fz.effective_top_k(params.config.vocab_size),
        params.config.context_len,
        seed,
    );
    let g = GenText::from_tokens(&out.tokens[..1], &out.tokens[1..]);
    let mut words = g.words;
    words.truncate(fz.max_instrs);
    words
}

/// One uniformly random, format-correct instruction.
fn random_instruction(rng: &mut ChaCha8Rng) -> Instruction {
    let m = Mnemonic::ALL[rng.gen_range(0..Mnemonic::ALL.len())];
    let mut reg = || Register::new(rng.gen_range(0..32)).unwrap();
    match m.format() {
        Format::R => {
            let (rd, rs1, rs2) = (reg(), reg(), reg());
            Instruction::rtype(m, rd, rs1, rs2)
        }
        Format::I | Format::IShift | Format::ILoad => {
            let (rd, rs1) = (reg(), reg());
            let (lo, hi) = m.format().imm_range();
            Instruction::itype(m, rd, rs1, rng.gen_range(lo..=hi))
        }
        Format::S => {
            let (rs1, rs2) = (reg(), reg());
            let (lo, hi) = Format::S.imm_range();
            Instruction::stype(m, rs1, rs2, rng.gen_range(lo..=hi))
        }
        Format::B => {
            let (rs1, rs2) = (reg(), reg());
            let (lo, hi) = Format::B.imm_range();
            Instruction::btype(m, rs1, rs2, rng.gen_range(lo / 2..=hi / 2) * 2)
        }
        Format::U => {
            let rd = reg();
            let (lo, hi) = Format::U.imm_range();
            Instruction::utype(m, rd, rng.gen_range(lo..=hi))
        }
        Format::J => {
            let rd = reg();
            let (lo, hi) = Format::J.imm_range();
            Instruction::utype(m, rd, rng.gen_range(lo / 2..=hi / 2) * 2)
        }
        Format::None => Instruction::bare(m),
    }
}

/// A fixed-length program of random instructions. Seeded per test via
/// the stream id, so the result is independent of batch boundaries and
/// worker count.
fn random_program(len: usize, seed: u64, test_id: u64) -> Vec<EncodedWord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(test_id);
    (0..len)
        .map(|_| encode(&random_instruction(&mut rng)).expect("sampled operands are in range"))
        .collect()
}

/// Run one program on the golden model and every enabled fault model;
/// collect golden coverage and per-toggle mismatches.
fn execute_test(
    program: Vec<EncodedWord>,
    base: &ExecConfig,
    toggles: ToggleSet,
) -> Result<TestResult, SimError> {
    let (golden_trace, hits) = run_program(&program, &base.golden())?;
    let mut mismatches = Vec::new();
    for t in toggles.iter() {
        let (dut_trace, _) = run_program(&program, &base.with_toggles(ToggleSet::single(t)))?;
        for m in compare(&dut_trace, &golden_trace) {
            mismatches.push((t, m));
        }
    }
    Ok(TestResult {
        program,
        hits,
        mismatches,
    })
}

/// Execute one batch of already-generated programs and merge their
/// coverage; exposed for batch-level equivalence checks.
pub fn run_batch(
    programs: &[Vec<EncodedWord>],
    base: &ExecConfig,
    toggles: ToggleSet,
    workers: usize,
) -> Result<FuzzBatchResult, DriverError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| DriverError::Runtime(format!("worker pool: {e}")))?;
    let tests: Result<Vec<TestResult>, SimError> = pool.install(|| {
        programs
            .par_iter()
            .map(|p| execute_test(p.clone(), base, toggles))
            .collect()
    });
    let tests = tests?;
    let mut merged = CoverageSet::new();
    let mut fingerprints: BTreeMap<Fingerprint, usize> = BTreeMap::new();
    for t in &tests {
        merged = merged.union(&t.hits);
        for (_, m) in &t.mismatches {
            *fingerprints.entry(fingerprint(m)).or_insert(0) += 1;
        }
    }
    Ok(FuzzBatchResult {
        tests,
        merged,
        fingerprints,
    })
}

/// Directed assembly programs, one per fault model, each of which the
/// differential comparison flags with the expected mismatch kind.
pub fn directed_program(toggle: BugToggle) -> &'static str {
    match toggle {
        BugToggle::TraceOmitMuldivWb => "addi x1, x0, 6\naddi x2, x0, 7\nmul x3, x1, x2\necall",
        BugToggle::TraceX0Write => "addi x0, x0, 7\necall",
        BugToggle::ExcPrioritySwap => "lui x1, 16\nlw x2, x1, 1",
        BugToggle::StaleIfetchNoFencei => {
            "lui x3, 512\naddi x3, x3, 275\nsw x0, x3, 16\naddi x5, x0, 0\naddi x2, x0, 1\necall"
        }
    }
}

/// Replay result: the golden trace and, per enabled fault model, the
/// mismatches against it.
pub struct ReplayReport {
    pub program: Vec<EncodedWord>,
    pub golden_trace: Vec<crate::sim::TraceRecord>,
    pub per_toggle: Vec<(BugToggle, Vec<Mismatch>)>,
}

impl ReplayReport {
    /// Human-readable rendering: the trace, then one section per
    /// fault model listing divergences.
    pub fn render(&self) -> String {
        let mut out = String::from("golden trace:\n");
        for r in &self.golden_trace {
            out.push_str("  ");
            out.push_str(&r.line());
            out.push('\n');
        }
        for (toggle, ms) in &self.per_toggle {
            out.push_str(&format!("{}: {} mismatch(es)\n", toggle.name(), ms.len()));
            for m in ms {
                let fp = fingerprint(m);
                out.push_str(&format!("  step {}: {} [{}]\n", m.step, m.kind, fp));
            }
        }
        out
    }
}

/// Assemble a program and diff every enabled fault model against the
/// golden run.
pub fn replay(text: &str, cfg: &RunConfig) -> Result<ReplayReport, DriverError> {
    cfg.validate()?;
    let program = crate::isa::assemble(text).map_err(|e| DriverError::Replay(e.to_string()))?;
    let fz = &cfg.fuzz;
    let base = ExecConfig {
        mem_size: fz.mem_size,
        entry_pc: 0,
        step_cap: fz.step_cap,
        toggles: ToggleSet::EMPTY,
    };
    let (golden_trace, _) = run_program(&program, &base.golden())?;
    let mut per_toggle = Vec::new();
    for t in fz.toggle_set()?.iter() {
        let (dut_trace, _) = run_program(&program, &base.with_toggles(ToggleSet::single(t)))?;
        per_toggle.push((t, compare(&dut_trace, &golden_trace)));
    }
    Ok(ReplayReport {
        program,
        golden_trace,
        per_toggle,
    })
}
