//! Training-set construction: function-body samples (ingested from a
//! disassembly listing or synthesized), the field-level tokenizer, and
//! the dataset manifest.

mod synth;
mod vocab;

#[cfg(test)]
mod tests;

pub use synth::{def_use_ratio, synth_generate, GENERATOR_VERSION, MAX_LEN, MIN_LEN};
pub use vocab::{
    bucketize, canonical_imm, decode_runs, detokenize, tokenize, vocab_csv, DecodedRun,
    ImmBucket, Token, TokenId, BOS, EOS, EXACT_IMM_LIMIT, PAD, UNK, VOCAB_SIZE,
};

use serde::{Deserialize, Serialize};

use crate::isa::{parse_instruction, Instruction};

/// Where a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSource {
    Ingested,
    Synthetic,
}

/// One function body used as a training entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSample {
    pub instrs: Vec<Instruction>,
    pub source: SampleSource,
}

/// Ingest outcome: the accepted samples plus how many labeled
/// functions were dropped for containing invalid instructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ingested {
    pub samples: Vec<CorpusSample>,
    pub dropped: usize,
}

/// A structurally malformed listing line.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct IngestError {
    pub line: usize,
    pub message: String,
}

/// Parse a disassembly listing into samples.
///
/// A line ending in `:` opens a function named by the label before it;
/// subsequent instruction lines belong to that function until the next
/// label. Lines before the first label are discarded. `#` starts a
/// comment. A function containing an unparsable instruction is dropped
/// whole and counted in `dropped`; a malformed label line is a hard
/// error. Functions with no instructions yield no sample.
pub fn ingest(text: &str) -> Result<Ingested, IngestError> {
    let mut samples = Vec::new();
    let mut dropped = 0usize;

    // (instructions so far, poisoned) for the currently open function;
    // None before the first label.
    let mut current: Option<(Vec<Instruction>, bool)> = None;

    let finish = |current: &mut Option<(Vec<Instruction>, bool)>,
                      samples: &mut Vec<CorpusSample>,
                      dropped: &mut usize| {
        if let Some((instrs, poisoned)) = current.take() {
            if poisoned {
                *dropped += 1;
            } else if !instrs.is_empty() {
                samples.push(CorpusSample {
                    instrs,
                    source: SampleSource::Ingested,
                });
            }
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(label) = line.strip_suffix(':') {
            let label = label.trim();
            let valid = !label.is_empty()
                && label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$'))
                && !label.chars().next().unwrap().is_ascii_digit();
            if !valid {
                return Err(IngestError {
                    line: line_no,
                    message: format!("malformed function label {label:?}"),
                });
            }
            finish(&mut current, &mut samples, &mut dropped);
            current = Some((Vec::new(), false));
            continue;
        }
        match &mut current {
            None => continue, // instruction outside any function
            Some((instrs, poisoned)) => match parse_instruction(line) {
                Ok(i) => instrs.push(i),
                Err(_) => *poisoned = true,
            },
        }
    }
    finish(&mut current, &mut samples, &mut dropped);
    Ok(Ingested { samples, dropped })
}

/// Render samples as a listing `ingest` accepts, with generated
/// `fn_<i>:` labels.
pub fn write_corpus(samples: &[CorpusSample]) -> String {
    let mut out = String::new();
    for (i, s) in samples.iter().enumerate() {
        out.push_str(&format!("fn_{i}:\n"));
        for instr in &s.instrs {
            out.push_str(&format!("    {instr}\n"));
        }
    }
    out
}

/// Dataset provenance, written alongside a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub generator: String,
    pub seed: u64,
    pub n: usize,
    pub total_instructions: usize,
    pub def_use_ratio: f64,
}

impl CorpusManifest {
    pub fn describe(samples: &[CorpusSample], seed: u64) -> CorpusManifest {
        CorpusManifest {
            generator: GENERATOR_VERSION.to_string(),
            seed,
            n: samples.len(),
            total_instructions: samples.iter().map(|s| s.instrs.len()).sum(),
            def_use_ratio: def_use_ratio(samples),
        }
    }
}
