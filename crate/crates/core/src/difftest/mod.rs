//! Mismatch detection: positional comparison of DUT and golden traces,
//! fingerprint-based deduplication, and engineer-supplied filters.
//!
//! Comparison is step-aligned. Within a step, fields are compared in a
//! fixed order — pc, word, exception, reg_write, mem_write — and the
//! first differing field names the mismatch kind. Once control flow
//! diverges (different pc or fetched word), later records are no longer
//! aligned and comparison stops.

use crate::isa::{decode, DecodeResult, Mnemonic};
use crate::sim::{ExceptionKind, TraceRecord};
use std::collections::BTreeMap;
use std::fmt;

/// What differed first at a divergent step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MismatchKind {
    /// Both traces write a register, with different target or value.
    RegWriteValue,
    /// Golden writes a register, DUT does not.
    MissingRegWrite,
    /// DUT writes a register, golden does not.
    ExtraRegWrite,
    /// Memory writes differ in address, width, or value.
    MemWriteValue,
    /// Different exception outcome.
    ExceptionKind,
    /// Different pc or fetched word; comparison stops here.
    ControlFlowDivergence,
    /// One trace ended before the other.
    TraceLength,
}

impl MismatchKind {
    pub const ALL: [MismatchKind; 7] = [
        MismatchKind::RegWriteValue,
        MismatchKind::MissingRegWrite,
        MismatchKind::ExtraRegWrite,
        MismatchKind::MemWriteValue,
        MismatchKind::ExceptionKind,
        MismatchKind::ControlFlowDivergence,
        MismatchKind::TraceLength,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MismatchKind::RegWriteValue => "reg-write-value",
            MismatchKind::MissingRegWrite => "missing-reg-write",
            MismatchKind::ExtraRegWrite => "extra-reg-write",
            MismatchKind::MemWriteValue => "mem-write-value",
            MismatchKind::ExceptionKind => "exception-kind",
            MismatchKind::ControlFlowDivergence => "control-flow-divergence",
            MismatchKind::TraceLength => "trace-length",
        }
    }

    pub fn parse(s: &str) -> Option<MismatchKind> {
        MismatchKind::ALL.iter().copied().find(|k| k.name() == s)
    }
}

impl fmt::Display for MismatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One detected divergence between aligned traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mismatch {
    pub kind: MismatchKind,
    /// First divergent step ordinal.
    pub step: u32,
    /// DUT record at the divergence; absent when the DUT trace ended.
    pub dut_record: Option<TraceRecord>,
    /// Golden record at the divergence; absent when it ended.
    pub golden_record: Option<TraceRecord>,
}

/// Identity of a bug class: repeated instances of one underlying bug
/// collapse to one fingerprint, distinct classes stay separate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint {
    /// Mnemonic of the divergent record's word, when it decodes.
    pub mnemonic: Option<Mnemonic>,
    pub kind: MismatchKind,
    /// (DUT exception, golden exception) at the divergence.
    pub exceptions: (Option<ExceptionKind>, Option<ExceptionKind>),
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mn = self.mnemonic.map_or("-", |m| m.text());
        let (d, g) = self.exceptions;
        let d = d.map_or("-", |k| k.name());
        let g = g.map_or("-", |k| k.name());
        write!(f, "{}/{}/{}/{}", mn, self.kind, d, g)
    }
}

/// Compare a DUT trace against the golden trace for the same program.
///
/// Returns one mismatch per divergent step, in step order, stopping
/// after the first control-flow divergence. Empty iff the traces are
/// identical record for record.
pub fn compare(dut: &[TraceRecord], golden: &[TraceRecord]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    let aligned = dut.len().min(golden.len());
    for i in 0..aligned {
        let d = dut[i];
        let g = golden[i];
        let kind = if d.pc != g.pc || d.word != g.word {
            Some(MismatchKind::ControlFlowDivergence)
        } else if d.exception != g.exception {
            Some(MismatchKind::ExceptionKind)
        } else if d.reg_write != g.reg_write {
            Some(match (d.reg_write, g.reg_write) {
                (None, Some(_)) => MismatchKind::MissingRegWrite,
                (Some(_), None) => MismatchKind::ExtraRegWrite,
                _ => MismatchKind::RegWriteValue,
            })
        } else if d.mem_write != g.mem_write {
            Some(MismatchKind::MemWriteValue)
        } else {
            None
        };
        if let Some(kind) = kind {
            out.push(Mismatch {
                kind,
                step: i as u32,
                dut_record: Some(d),
                golden_record: Some(g),
            });
            if kind == MismatchKind::ControlFlowDivergence {
                return out;
            }
        }
    }
    if dut.len() != golden.len() {
        out.push(Mismatch {
            kind: MismatchKind::TraceLength,
            step: aligned as u32,
            dut_record: dut.get(aligned).copied(),
            golden_record: golden.get(aligned).copied(),
        });
    }
    out
}

/// Project a mismatch onto its bug-class identity.
pub fn fingerprint(m: &Mismatch) -> Fingerprint {
    let record = m.dut_record.or(m.golden_record);
    let mnemonic = record.and_then(|r| match decode(r.word) {
        DecodeResult::Valid(i) => Some(i.mnemonic),
        DecodeResult::Illegal => None,
    });
    Fingerprint {
        mnemonic,
        kind: m.kind,
        exceptions: (
            m.dut_record.and_then(|r| r.exception),
            m.golden_record.and_then(|r| r.exception),
        ),
    }
}

/// Count and exemplar for one fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupeEntry {
    pub count: usize,
    /// First mismatch with this fingerprint, in input order.
    pub exemplar: Mismatch,
}

/// Collapse mismatches into unique fingerprints.
///
/// Counts sum to the input length; the exemplar is the first occurrence.
pub fn dedupe(ms: &[Mismatch]) -> BTreeMap<Fingerprint, DedupeEntry> {
    let mut map: BTreeMap<Fingerprint, DedupeEntry> = BTreeMap::new();
    for m in ms {
        map.entry(fingerprint(m))
            .and_modify(|e| e.count += 1)
            .or_insert_with(|| DedupeEntry {
                count: 1,
                exemplar: *m,
            });
    }
    map
}

/// A declarative suppression rule: every present matcher must hold for
/// the rule to match. A rule with no matchers matches everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FilterRule {
    pub kind: Option<MismatchKind>,
    pub mnemonic: Option<Mnemonic>,
    /// Matches when either record's reg_write targets this register.
    pub reg: Option<crate::isa::Register>,
    /// Matches when either record raised this exception.
    pub exc: Option<ExceptionKind>,
}

impl FilterRule {
    pub fn matches(&self, m: &Mismatch) -> bool {
        if let Some(k) = self.kind {
            if m.kind != k {
                return false;
            }
        }
        if let Some(mn) = self.mnemonic {
            if fingerprint(m).mnemonic != Some(mn) {
                return false;
            }
        }
        if let Some(r) = self.reg {
            let hit = [m.dut_record, m.golden_record]
                .iter()
                .flatten()
                .filter_map(|rec| rec.reg_write)
                .any(|w| w.rd == r);
            if !hit {
                return false;
            }
        }
        if let Some(e) = self.exc {
            let hit = [m.dut_record, m.golden_record]
                .iter()
                .flatten()
                .filter_map(|rec| rec.exception)
                .any(|k| k == e);
            if !hit {
                return false;
            }
        }
        true
    }
}

/// Retain mismatches matching no rule, preserving order.
pub fn apply_filters(ms: &[Mismatch], rules: &[FilterRule]) -> Vec<Mismatch> {
    ms.iter()
        .filter(|m| !rules.iter().any(|r| r.matches(m)))
        .copied()
        .collect()
}

/// Parse a line-oriented filter config. Each non-empty, non-comment
/// line is one rule of comma-separated matchers:
/// `kind=...,mnemonic=...,reg=...,exc=...`.
pub fn parse_filter_rules(text: &str) -> Result<Vec<FilterRule>, String> {
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut rule = FilterRule::default();
        for part in line.split(',') {
            let part = part.trim();
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("line {line_no}: expected key=value, got `{part}`"))?;
            match key.trim() {
                "kind" => {
                    rule.kind = Some(MismatchKind::parse(value.trim()).ok_or_else(|| {
                        format!("line {line_no}: unknown mismatch kind `{value}`")
                    })?)
                }
                "mnemonic" => {
                    rule.mnemonic = Some(Mnemonic::parse(value.trim()).ok_or_else(|| {
                        format!("line {line_no}: unknown mnemonic `{value}`")
                    })?)
                }
                "reg" => {
                    let v = value.trim();
                    let idx: u8 = v
                        .strip_prefix('x')
                        .and_then(|n| n.parse().ok())
                        .ok_or_else(|| format!("line {line_no}: bad register `{v}`"))?;
                    rule.reg = Some(
                        crate::isa::Register::new(idx)
                            .ok_or_else(|| format!("line {line_no}: bad register `{v}`"))?,
                    );
                }
                "exc" => {
                    rule.exc = Some(ExceptionKind::parse(value.trim()).ok_or_else(|| {
                        format!("line {line_no}: unknown exception `{value}`")
                    })?)
                }
                other => return Err(format!("line {line_no}: unknown matcher `{other}`")),
            }
        }
        rules.push(rule);
    }
    Ok(rules)
}

/// Accumulates mismatches across a fuzzing run, keyed by fingerprint,
/// remembering which program first exhibited each class.
#[derive(Debug, Clone, Default)]
pub struct MismatchLog {
    entries: BTreeMap<Fingerprint, LogEntry>,
    total: usize,
}

#[derive(Debug, Clone)]
struct LogEntry {
    count: usize,
    exemplar_program: u64,
    exemplar_step: u32,
}

impl MismatchLog {
    pub fn new() -> MismatchLog {
        MismatchLog::default()
    }

    pub fn record(&mut self, program_id: u64, m: &Mismatch) {
        self.total += 1;
        self.entries
            .entry(fingerprint(m))
            .and_modify(|e| e.count += 1)
            .or_insert(LogEntry {
                count: 1,
                exemplar_program: program_id,
                exemplar_step: m.step,
            });
    }

    /// Total mismatch instances recorded.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Distinct fingerprints seen.
    pub fn unique(&self) -> usize {
        self.entries.len()
    }

    pub fn fingerprints(&self) -> impl Iterator<Item = &Fingerprint> {
        self.entries.keys()
    }

    /// Structured rows in fingerprint order: (fingerprint, count,
    /// exemplar program id, exemplar step).
    pub fn rows(&self) -> impl Iterator<Item = (Fingerprint, usize, u64, u32)> + '_ {
        self.entries
            .iter()
            .map(|(fp, e)| (*fp, e.count, e.exemplar_program, e.exemplar_step))
    }

    /// Report as CSV: fingerprint fields, count, exemplar program id,
    /// exemplar step. Rows in fingerprint order (deterministic).
    pub fn csv(&self) -> String {
        let mut out =
            String::from("mnemonic,kind,dut_exception,golden_exception,count,exemplar_program,step\n");
        for (fp, e) in &self.entries {
            let mn = fp.mnemonic.map_or("-", |m| m.text());
            let (d, g) = fp.exceptions;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                mn,
                fp.kind,
                d.map_or("-", |k| k.name()),
                g.map_or("-", |k| k.name()),
                e.count,
                e.exemplar_program,
                e.exemplar_step,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests;
