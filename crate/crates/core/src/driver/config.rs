//! Run configuration: one struct per pipeline stage, every field
//! defaulted, all of it overridable from a line-oriented
//! `key = value` file with one `[section]` per stage.

use serde::{Deserialize, Serialize};

use super::DriverError;
use crate::lm::LmConfig;
use crate::rl::{PpoHyper, ScoreWeights};
use crate::sim::ToggleSet;

/// Everything a full pipeline run needs, stage by stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunConfig {
    pub model: LmConfig,
    pub corpus: CorpusSection,
    pub stage1: Stage1Section,
    pub stage2: Stage2Section,
    pub stage3: Stage3Section,
    pub fuzz: FuzzSection,
}

/// Training-corpus source: a file of labeled assembly functions, or
/// synthesis when no path is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSection {
    /// Number of samples to synthesize (ignored when `path` is set).
    pub n: usize,
    pub seed: u64,
    pub path: Option<String>,
}

impl Default for CorpusSection {
    fn default() -> CorpusSection {
        CorpusSection {
            n: 50_000,
            seed: 1,
            path: None,
        }
    }
}

/// Unsupervised pretraining settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Section {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for Stage1Section {
    fn default() -> Stage1Section {
        Stage1Section {
            epochs: 10,
            batch: 64,
            lr: 3e-4,
            seed: 2,
        }
    }
}

/// Policy-optimization knobs shared by both RL stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlSection {
    /// Rollouts per optimizer step.
    pub batch: usize,
    pub lr: f64,
    pub clip_eps: f64,
    pub ppo_epochs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub kl_warn: f64,
}

impl Default for RlSection {
    fn default() -> RlSection {
        let p = PpoHyper::default();
        RlSection {
            batch: p.batch,
            lr: p.lr,
            clip_eps: p.clip_eps,
            ppo_epochs: p.ppo_epochs,
            gamma: p.gamma,
            gae_lambda: p.gae_lambda,
            entropy_coef: p.entropy_coef,
            value_coef: p.value_coef,
            kl_warn: p.kl_warn,
        }
    }
}

impl RlSection {
    pub fn ppo_hyper(&self) -> PpoHyper {
        PpoHyper {
            clip_eps: self.clip_eps,
            ppo_epochs: self.ppo_epochs,
            lr: self.lr,
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            kl_warn: self.kl_warn,
            batch: self.batch,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
        }
    }
}

/// Validity-reward refinement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Section {
    /// Episodes per epoch: prompts drawn from the corpus.
    pub dataset: usize,
    pub prompt_min: usize,
    pub prompt_max: usize,
    pub epochs: usize,
    /// Weight of each disassembler-rejected word in the reward.
    pub invalid_penalty: f64,
    pub seed: u64,
    pub rl: RlSection,
}

impl Default for Stage2Section {
    fn default() -> Stage2Section {
        Stage2Section {
            dataset: 51_200,
            prompt_min: 2,
            prompt_max: 5,
            epochs: 30,
            invalid_penalty: 5.0,
            seed: 3,
            rl: RlSection::default(),
        }
    }
}

/// Coverage-reward optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage3Section {
    pub dataset: usize,
    pub prompt_min: usize,
    pub prompt_max: usize,
    /// Upper bound; the stage stops early once an epoch adds no new
    /// coverage points.
    pub max_epochs: usize,
    pub w_standalone: f64,
    pub w_incremental: f64,
    pub no_improve_penalty: f64,
    pub seed: u64,
    pub rl: RlSection,
}

impl Default for Stage3Section {
    fn default() -> Stage3Section {
        let w = ScoreWeights::default();
        Stage3Section {
            dataset: 51_200,
            prompt_min: 2,
            prompt_max: 5,
            max_epochs: 15,
            w_standalone: w.w_standalone,
            w_incremental: w.w_incremental,
            no_improve_penalty: w.no_improve_penalty,
            seed: 4,
            rl: RlSection::default(),
        }
    }
}

impl Stage3Section {
    pub fn weights(&self) -> ScoreWeights {
        ScoreWeights {
            w_standalone: self.w_standalone,
            w_incremental: self.w_incremental,
            no_improve_penalty: self.no_improve_penalty,
        }
    }
}

/// Fuzz-loop settings, shared by the trained-model and random runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzSection {
    /// Test budget: exactly this many programs are simulated.
    pub tests: usize,
    /// Programs generated and simulated per feedback round.
    pub batch: usize,
    /// Per-test instruction cap, applied to both generators so
    /// coverage comparisons are budget-fair.
    pub max_instrs: usize,
    pub temperature: f64,
    /// 0 selects the full vocabulary.
    pub top_k: usize,
    /// Simulation worker threads.
    pub workers: usize,
    pub step_cap: u32,
    pub mem_size: u32,
    /// Comma-separated fault-model list; empty disables injection.
    pub toggles: String,
    /// Seed generation prompts from corpus samples instead of
    /// generating from scratch.
    pub directed_prompts: bool,
    pub seed: u64,
}

impl Default for FuzzSection {
    fn default() -> FuzzSection {
        FuzzSection {
            tests: 2_000,
            batch: 64,
            max_instrs: 32,
            temperature: 1.0,
            top_k: 0,
            workers: 10,
            step_cap: 4_096,
            mem_size: 64 * 1024,
            toggles: crate::sim::BugToggle::ALL
                .iter()
                .map(|t| t.name())
                .collect::<Vec<_>>()
                .join(","),
            directed_prompts: false,
            seed: 5,
        }
    }
}

impl FuzzSection {
    pub fn toggle_set(&self) -> Result<ToggleSet, DriverError> {
        if self.toggles.trim().is_empty() {
            return Ok(ToggleSet::EMPTY);
        }
        ToggleSet::parse_list(&self.toggles).map_err(DriverError::Config)
    }

    /// Effective sampling cutoff: `top_k = 0` means the whole vocab.
    pub fn effective_top_k(&self, vocab: usize) -> usize {
        if self.top_k == 0 {
            vocab
        } else {
            self.top_k.min(vocab)
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        self.model
            .validate()
            .map_err(|e| DriverError::Config(e.to_string()))?;
        if self.corpus.n == 0 && self.corpus.path.is_none() {
            return Err(DriverError::Config("corpus.n must be positive".into()));
        }
        if self.stage1.epochs == 0 {
            return Err(DriverError::Config("stage1.epochs must be positive".into()));
        }
        if self.stage1.batch == 0 {
            return Err(DriverError::Config("stage1.batch must be positive".into()));
        }
        for (name, ds, epochs, lo, hi, rl) in [
            (
                "stage2",
                self.stage2.dataset,
                self.stage2.epochs,
                self.stage2.prompt_min,
                self.stage2.prompt_max,
                &self.stage2.rl,
            ),
            (
                "stage3",
                self.stage3.dataset,
                self.stage3.max_epochs,
                self.stage3.prompt_min,
                self.stage3.prompt_max,
                &self.stage3.rl,
            ),
        ] {
            if ds == 0 {
                return Err(DriverError::Config(format!("{name}.dataset must be positive")));
            }
            if epochs == 0 {
                return Err(DriverError::Config(format!("{name} epoch count must be positive")));
            }
            if lo < 1 || lo > hi {
                return Err(DriverError::Config(format!(
                    "{name} prompt range [{lo}, {hi}] must satisfy 1 <= min <= max"
                )));
            }
            // Worst case five tokens per prompt instruction, plus BOS:
            // the prompt must leave room to generate.
            if 1 + 5 * hi >= self.model.context_len {
                return Err(DriverError::Config(format!(
                    "{name}.prompt_max {hi} cannot fit in context_len {}",
                    self.model.context_len
                )));
            }
            rl.ppo_hyper().validate().map_err(|e| {
                DriverError::Config(format!("{name}: {e}"))
            })?;
        }
        self.stage3
            .weights()
            .validate()
            .map_err(|e| DriverError::Config(format!("stage3: {e}")))?;
        if self.fuzz.batch == 0 {
            return Err(DriverError::Config("fuzz.batch must be positive".into()));
        }
        if self.fuzz.max_instrs == 0 {
            return Err(DriverError::Config("fuzz.max_instrs must be positive".into()));
        }
        if !(self.fuzz.temperature > 0.0) {
            return Err(DriverError::Config("fuzz.temperature must be positive".into()));
        }
        if self.fuzz.workers == 0 {
            return Err(DriverError::Config("fuzz.workers must be positive".into()));
        }
        if self.fuzz.step_cap == 0 {
            return Err(DriverError::Config("fuzz.step_cap must be positive".into()));
        }
        self.fuzz.toggle_set()?;
        Ok(())
    }

    /// Derive every stage seed from one master seed, keeping the
    /// streams distinct.
    pub fn apply_master_seed(&mut self, seed: u64) {
        self.model.seed = seed;
        self.corpus.seed = seed.wrapping_add(1);
        self.stage1.seed = seed.wrapping_add(2);
        self.stage2.seed = seed.wrapping_add(3);
        self.stage3.seed = seed.wrapping_add(4);
        self.fuzz.seed = seed.wrapping_add(5);
    }
}

/// Parse the line-oriented config format:
///
/// ```text
/// # comment
/// [stage2]
/// epochs = 8
/// dataset = 256
/// ```
///
/// Unknown sections or keys are errors; values use the field types
/// above; every omitted key keeps its default.
pub fn parse_config(text: &str) -> Result<RunConfig, DriverError> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !matches!(
                name,
                "model" | "corpus" | "stage1" | "stage2" | "stage3" | "fuzz"
            ) {
                return Err(DriverError::Config(format!(
                    "line {line_no}: unknown section [{name}]"
                )));
            }
            section = name.to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(DriverError::Config(format!(
                "line {line_no}: expected `key = value`, got `{line}`"
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        if section.is_empty() {
            return Err(DriverError::Config(format!(
                "line {line_no}: key `{key}` appears before any [section]"
            )));
        }
        apply_key(&mut cfg, &section, key, value).map_err(|msg| {
            DriverError::Config(format!("line {line_no}: {msg}"))
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_key(cfg: &mut RunConfig, section: &str, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        value
            .parse::<T>()
            .map_err(|e| format!("{key}: cannot parse `{value}`: {e}"))
    }
    fn flag(key: &str, value: &str) -> Result<bool, String> {
        match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(format!("{key}: expected true/false, got `{value}`")),
        }
    }

    match (section, key) {
        ("model", "vocab_size") => cfg.model.vocab_size = num(key, value)?,
        ("model", "context_len") => cfg.model.context_len = num(key, value)?,
        ("model", "layers") => cfg.model.layers = num(key, value)?,
        ("model", "heads") => cfg.model.heads = num(key, value)?,
        ("model", "model_dim") => cfg.model.model_dim = num(key, value)?,
        ("model", "ff_dim") => cfg.model.ff_dim = num(key, value)?,
        ("model", "seed") => cfg.model.seed = num(key, value)?,

        ("corpus", "n") => cfg.corpus.n = num(key, value)?,
        ("corpus", "seed") => cfg.corpus.seed = num(key, value)?,
        ("corpus", "path") => {
            cfg.corpus.path = if value.is_empty() {
                None
            } else {
                Some(value.to_string())
            }
        }

        ("stage1", "epochs") => cfg.stage1.epochs = num(key, value)?,
        ("stage1", "batch") => cfg.stage1.batch = num(key, value)?,
        ("stage1", "lr") => cfg.stage1.lr = num(key, value)?,
        ("stage1", "seed") => cfg.stage1.seed = num(key, value)?,

        ("stage2", "dataset") => cfg.stage2.dataset = num(key, value)?,
        ("stage2", "prompt_min") => cfg.stage2.prompt_min = num(key, value)?,
        ("stage2", "prompt_max") => cfg.stage2.prompt_max = num(key, value)?,
        ("stage2", "epochs") => cfg.stage2.epochs = num(key, value)?,
        ("stage2", "invalid_penalty") => cfg.stage2.invalid_penalty = num(key, value)?,
        ("stage2", "seed") => cfg.stage2.seed = num(key, value)?,
        ("stage2", _) => apply_rl_key(&mut cfg.stage2.rl, key, value)?,

        ("stage3", "dataset") => cfg.stage3.dataset = num(key, value)?,
        ("stage3", "prompt_min") => cfg.stage3.prompt_min = num(key, value)?,
        ("stage3", "prompt_max") => cfg.stage3.prompt_max = num(key, value)?,
        ("stage3", "max_epochs") => cfg.stage3.max_epochs = num(key, value)?,
        ("stage3", "w_standalone") => cfg.stage3.w_standalone = num(key, value)?,
        ("stage3", "w_incremental") => cfg.stage3.w_incremental = num(key, value)?,
        ("stage3", "no_improve_penalty") => cfg.stage3.no_improve_penalty = num(key, value)?,
        ("stage3", "seed") => cfg.stage3.seed = num(key, value)?,
        ("stage3", _) => apply_rl_key(&mut cfg.stage3.rl, key, value)?,

        ("fuzz", "tests") => cfg.fuzz.tests = num(key, value)?,
        ("fuzz", "batch") => cfg.fuzz.batch = num(key, value)?,
        ("fuzz", "max_instrs") => cfg.fuzz.max_instrs = num(key, value)?,
        ("fuzz", "temperature") => cfg.fuzz.temperature = num(key, value)?,
        ("fuzz", "top_k") => cfg.fuzz.top_k = num(key, value)?,
        ("fuzz", "workers") => cfg.fuzz.workers = num(key, value)?,
        ("fuzz", "step_cap") => cfg.fuzz.step_cap = num(key, value)?,
        ("fuzz", "mem_size") => cfg.fuzz.mem_size = num(key, value)?,
        ("fuzz", "toggles") => cfg.fuzz.toggles = value.to_string(),
        ("fuzz", "directed_prompts") => cfg.fuzz.directed_prompts = flag(key, value)?,
        ("fuzz", "seed") => cfg.fuzz.seed = num(key, value)?,

        _ => return Err(format!("unknown key `{key}` in section [{section}]")),
    }
    Ok(())
}

fn apply_rl_key(rl: &mut RlSection, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        value
            .parse::<T>()
            .map_err(|e| format!("{key}: cannot parse `{value}`: {e}"))
    }
    match key {
        "batch" => rl.batch = num(key, value)?,
        "lr" => rl.lr = num(key, value)?,
        "clip_eps" => rl.clip_eps = num(key, value)?,
        "ppo_epochs" => rl.ppo_epochs = num(key, value)?,
        "gamma" => rl.gamma = num(key, value)?,
        "gae_lambda" => rl.gae_lambda = num(key, value)?,
        "entropy_coef" => rl.entropy_coef = num(key, value)?,
        "value_coef" => rl.value_coef = num(key, value)?,
        "kl_warn" => rl.kl_warn = num(key, value)?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}
