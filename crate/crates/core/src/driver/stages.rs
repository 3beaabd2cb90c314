//! The three-stage training pipeline: likelihood pretraining on the
//! corpus, policy refinement against the disassembler reward, and
//! policy optimization against the coverage reward.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::DriverError;
use crate::corpus::{ingest, synth_generate, tokenize, CorpusSample, BOS, EOS};
use crate::coverage::{percent, update, CoverageSet, CATALOG_SIZE};
use crate::lm::{build_windows, sample, train, Adam, AdamHyper, Params, TrainHyper};
use crate::rl::{
    compute_advantages, coverage_reward, ppo_update, GenText, PpoHyper, RlLogRow, Rollout,
    ValueHead,
};
use crate::sim::{run_program, ExecConfig, ToggleSet};

/// Load the corpus named by the config: ingest the file when a path is
/// set, synthesize otherwise.
pub fn load_corpus(cfg: &RunConfig) -> Result<Vec<CorpusSample>, DriverError> {
    match &cfg.corpus.path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| DriverError::Io(format!("read {path}: {e}")))?;
            let ingested = ingest(&text)
                .map_err(|e| DriverError::Config(format!("corpus {path}: {e}")))?;
            Ok(ingested.samples)
        }
        None => Ok(synth_generate(cfg.corpus.n, cfg.corpus.seed)),
    }
}

/// Stage-1 result: the pretrained weights and the per-epoch loss curve.
pub struct PretrainOutput {
    pub params: Params<f32>,
    pub losses: Vec<f64>,
    pub windows: usize,
}

/// Likelihood training on the tokenized corpus.
pub fn stage1_pretrain(
    cfg: &RunConfig,
    samples: &[CorpusSample],
) -> Result<PretrainOutput, DriverError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(DriverError::CorpusEmpty);
    }
    let seqs: Vec<Vec<u16>> = samples.iter().map(|s| tokenize(&s.instrs)).collect();
    let windows = build_windows(&seqs, cfg.model.context_len);
    let mut params = Params::init(cfg.model)?;
    let hyper = TrainHyper {
        lr: cfg.stage1.lr,
        batch: cfg.stage1.batch,
        epochs: cfg.stage1.epochs,
        seed: cfg.stage1.seed,
    };
    let losses = train(&mut params, &windows, &hyper);
    Ok(PretrainOutput {
        params,
        windows: windows.len(),
        losses,
    })
}

/// Token prompts for RL episodes and fuzz seeding: `BOS` plus the
/// first `k ∈ [min, max]` instructions of randomly drawn samples.
pub fn draw_prompts(
    samples: &[CorpusSample],
    n: usize,
    range: (usize, usize),
    seed: u64,
) -> Vec<Vec<u16>> {
    assert!(!samples.is_empty(), "prompt source must be non-empty");
    let (lo, hi) = range;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = &samples[rng.gen_range(0..samples.len())];
            let k = rng.gen_range(lo..=hi).min(s.instrs.len());
            let mut toks = tokenize(&s.instrs[..k]);
            debug_assert_eq!(toks.first(), Some(&BOS));
            let trailing = toks.pop();
            debug_assert_eq!(trailing, Some(EOS));
            toks
        })
        .collect()
}

/// Result of an RL stage: updated weights plus the per-epoch log.
pub struct RlStageOutput {
    pub params: Params<f32>,
    pub log: Vec<RlLogRow>,
    /// Coverage accumulated across training (stage 3 only; empty for
    /// stage 2).
    pub coverage: CoverageSet,
}

/// What one RL episode earned, plus stage-specific bookkeeping.
struct Scored {
    reward: f64,
    /// (rejected words, total words) of the generation.
    words: (usize, usize),
}

/// Stage 2: PPO against the disassembler reward. Logs the epoch
/// invalid-word rate in the `aux` column.
pub fn stage2_refine(
    start: &Params<f32>,
    cfg: &RunConfig,
    samples: &[CorpusSample],
) -> Result<RlStageOutput, DriverError> {
    cfg.validate()?;
    let s2 = cfg.stage2.clone();
    let penalty = s2.invalid_penalty;
    run_rl_stage(
        start,
        cfg,
        samples,
        s2.dataset,
        (s2.prompt_min, s2.prompt_max),
        s2.epochs,
        false,
        s2.seed,
        s2.rl.ppo_hyper(),
        move |g: &GenText, _: &mut StageState| Scored {
            reward: g.n as f64 - penalty * g.invalid as f64,
            words: (g.invalid, g.n),
        },
    )
}

/// Stage 3: PPO against the coverage reward, simulating every
/// generation live. Logs accumulated coverage percent in `aux` and
/// stops early once an epoch adds no new points.
pub fn stage3_optimize(
    start: &Params<f32>,
    cfg: &RunConfig,
    samples: &[CorpusSample],
) -> Result<RlStageOutput, DriverError> {
    cfg.validate()?;
    let s3 = cfg.stage3.clone();
    let weights = s3.weights();
    weights.validate()?;
    let exec = ExecConfig {
        mem_size: cfg.fuzz.mem_size,
        entry_pc: 0,
        step_cap: cfg.fuzz.step_cap,
        toggles: ToggleSet::EMPTY,
    };
    run_rl_stage(
        start,
        cfg,
        samples,
        s3.dataset,
        (s3.prompt_min, s3.prompt_max),
        s3.max_epochs,
        true,
        s3.seed,
        s3.rl.ppo_hyper(),
        move |g: &GenText, state: &mut StageState| {
            let (trace_ok, hits) = match run_program(&g.words, &exec) {
                Ok((_, hits)) => (true, hits),
                // Setup failures (oversized program) cannot occur at
                // these lengths; treat defensively as zero coverage.
                Err(_) => (false, CoverageSet::new()),
            };
            debug_assert!(trace_ok);
            let (stats, merged) = update(&state.coverage, &hits)
                .expect("simulator coverage points are in-catalog");
            state.coverage = merged;
            Scored {
                reward: coverage_reward(&stats, CATALOG_SIZE as usize, &weights),
                words: (g.invalid, g.n),
            }
        },
    )
}

/// Mutable accumulation shared with the scorer across a stage.
struct StageState {
    coverage: CoverageSet,
}

#[allow(clippy::too_many_arguments)]
fn run_rl_stage(
    start: &Params<f32>,
    cfg: &RunConfig,
    samples: &[CorpusSample],
    dataset: usize,
    prompt_range: (usize, usize),
    epochs: usize,
    coverage_stage: bool,
    seed: u64,
    hyper: PpoHyper,
    mut score: impl FnMut(&GenText, &mut StageState) -> Scored,
) -> Result<RlStageOutput, DriverError> {
    if samples.is_empty() {
        return Err(DriverError::CorpusEmpty);
    }
    let prompts = draw_prompts(samples, dataset, prompt_range, seed);
    let mut params = start.clone();
    let mut adam = Adam::new(
        &params,
        AdamHyper {
            lr: hyper.lr,
            ..AdamHyper::default()
        },
    );
    let mut value = ValueHead::new(cfg.model.model_dim, seed ^ 0x564c5545);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut state = StageState {
        coverage: CoverageSet::new(),
    };
    let vocab = cfg.model.vocab_size;
    let max_len = cfg.model.context_len;
    let mut log = Vec::new();

    for epoch in 0..epochs {
        let points_before = state.coverage.len();
        let mut order: Vec<usize> = (0..prompts.len()).collect();
        order.shuffle(&mut rng);

        let mut reward_sum = 0f64;
        let mut episodes = 0usize;
        let mut loss_sum = 0f64;
        let mut kl_sum = 0f64;
        let mut updated = 0usize;
        let mut invalid_words = 0usize;
        let mut total_words = 0usize;

        for chunk in order.chunks(hyper.batch) {
            let mut rollouts = Vec::with_capacity(chunk.len());
            for &pi in chunk {
                let out = sample(&params, &prompts[pi], 1.0, vocab, max_len, rng.gen());
                let prompt_len = out.tokens.len() - out.generated;
                let g = GenText::from_tokens(&out.tokens[..prompt_len], out.completion());
                let scored = score(&g, &mut state);
                reward_sum += scored.reward;
                episodes += 1;
                invalid_words += scored.words.0;
                total_words += scored.words.1;
                if let Some(mut r) = Rollout::from_sample(&params, &value, &out, scored.reward)
                {
                    compute_advantages(&mut r, hyper.gamma, hyper.gae_lambda);
                    rollouts.push(r);
                }
            }
            if rollouts.is_empty() {
                continue;
            }
            normalize_advantages(&mut rollouts);
            let n = rollouts.len();
            let m = ppo_update(&mut params, &mut adam, &mut value, &rollouts, &hyper)?;
            loss_sum += m.loss * n as f64;
            kl_sum += m.approx_kl * n as f64;
            updated += n;
        }

        let aux = if coverage_stage {
            percent(&state.coverage)
        } else if total_words > 0 {
            invalid_words as f64 / total_words as f64
        } else {
            0.0
        };
        log.push(RlLogRow {
            update: epoch,
            mean_reward: if episodes > 0 {
                reward_sum / episodes as f64
            } else {
                0.0
            },
            loss: if updated > 0 { loss_sum / updated as f64 } else { 0.0 },
            approx_kl: if updated > 0 { kl_sum / updated as f64 } else { 0.0 },
            aux,
        });

        if coverage_stage && state.coverage.len() == points_before {
            break;
        }
    }

    Ok(RlStageOutput {
        params,
        log,
        coverage: state.coverage,
    })
}

/// Normalize advantages to zero mean and unit variance across the
/// whole update batch. Episodic rewards arrive on arbitrary scales
/// (and early in training share one sign), so without a baseline every
/// action is pushed the same way; centering leaves only the relative
/// signal. Returns are left raw so the value head still fits the true
/// scale.
fn normalize_advantages(rollouts: &mut [Rollout]) {
    let n: usize = rollouts.iter().map(|r| r.advantages.len()).sum();
    if n == 0 {
        return;
    }
    let mean = rollouts
        .iter()
        .flat_map(|r| &r.advantages)
        .sum::<f64>()
        / n as f64;
    let var = rollouts
        .iter()
        .flat_map(|r| &r.advantages)
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / n as f64;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    for r in rollouts {
        for a in &mut r.advantages {
            *a = (*a - mean) * scale;
        }
    }
}

/// Fraction of generated words the disassembler rejects, measured by
/// sampling one completion per prompt. Used for held-out evaluation of
/// the refinement stage.
pub fn invalid_rate(
    params: &Params<f32>,
    prompts: &[Vec<u16>],
    max_len: usize,
    seed: u64,
) -> f64 {
    let vocab = params.config.vocab_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut invalid = 0usize;
    let mut total = 0usize;
    for p in prompts {
        let out = sample(params, p, 1.0, vocab, max_len, rng.gen());
        let prompt_len = out.tokens.len() - out.generated;
        let g = GenText::from_tokens(&out.tokens[..prompt_len], out.completion());
        invalid += g.invalid;
        total += g.n;
    }
    if total == 0 {
        0.0
    } else {
        invalid as f64 / total as f64
    }
}
