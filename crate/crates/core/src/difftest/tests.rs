//! Tests for trace comparison, fingerprinting, dedupe, and filters.
//! Directed cases run the interpreter under each fault model and freeze
//! the expected mismatch classes.

use super::*;
use crate::isa::{assemble, EncodedWord, Register};
use crate::sim::{run_program, BugToggle, ExecConfig, RegWrite, ToggleSet};
use proptest::prelude::*;

fn trace_pair(text: &str, toggle: BugToggle) -> (Vec<TraceRecord>, Vec<TraceRecord>) {
    let program = assemble(text).unwrap();
    let golden_cfg = ExecConfig::default();
    let dut_cfg = golden_cfg.with_toggles(ToggleSet::single(toggle));
    let (golden, _) = run_program(&program, &golden_cfg).unwrap();
    let (dut, _) = run_program(&program, &dut_cfg).unwrap();
    (dut, golden)
}

#[test]
fn identical_traces_compare_empty() {
    let program = assemble("addi x1, x0, 5\nmul x2, x1, x1\necall").unwrap();
    let (trace, _) = run_program(&program, &ExecConfig::default()).unwrap();
    assert_eq!(compare(&trace, &trace), vec![]);
}

#[test]
fn omitted_muldiv_writeback_is_missing_reg_write() {
    let (dut, golden) = trace_pair(
        "addi x1, x0, 6\naddi x2, x0, 7\nmul x3, x1, x2\necall",
        BugToggle::TraceOmitMuldivWb,
    );
    let ms = compare(&dut, &golden);
    assert_eq!(ms.len(), 1);
    assert_eq!(ms[0].kind, MismatchKind::MissingRegWrite);
    assert_eq!(ms[0].step, 2);
    let fp = fingerprint(&ms[0]);
    assert_eq!(fp.mnemonic, Some(Mnemonic::Mul));
    assert_eq!(fp.exceptions, (None, None));
    assert_eq!(fp.to_string(), "mul/missing-reg-write/-/-");
}

#[test]
fn mul_and_div_omissions_have_distinct_fingerprints() {
    let (dut_mul, golden_mul) = trace_pair(
        "addi x1, x0, 6\nmul x3, x1, x1\necall",
        BugToggle::TraceOmitMuldivWb,
    );
    let (dut_div, golden_div) = trace_pair(
        "addi x1, x0, 6\ndiv x3, x1, x1\necall",
        BugToggle::TraceOmitMuldivWb,
    );
    let fp_mul = fingerprint(&compare(&dut_mul, &golden_mul)[0]);
    let fp_div = fingerprint(&compare(&dut_div, &golden_div)[0]);
    assert_eq!(fp_mul.kind, fp_div.kind);
    assert_ne!(fp_mul, fp_div);
    assert_eq!(fp_div.mnemonic, Some(Mnemonic::Div));
}

#[test]
fn x0_write_is_extra_reg_write() {
    let (dut, golden) = trace_pair("addi x0, x0, 7\necall", BugToggle::TraceX0Write);
    let ms = compare(&dut, &golden);
    assert_eq!(ms.len(), 1);
    assert_eq!(ms[0].kind, MismatchKind::ExtraRegWrite);
    assert_eq!(
        ms[0].dut_record.unwrap().reg_write,
        Some(RegWrite {
            rd: Register::X0,
            value: 7
        })
    );
    assert_eq!(ms[0].golden_record.unwrap().reg_write, None);
}

#[test]
fn same_bug_in_two_programs_shares_a_fingerprint() {
    let (d1, g1) = trace_pair("addi x0, x0, 7\necall", BugToggle::TraceX0Write);
    let (d2, g2) = trace_pair("addi x0, x0, 123\necall", BugToggle::TraceX0Write);
    let fp1 = fingerprint(&compare(&d1, &g1)[0]);
    let fp2 = fingerprint(&compare(&d2, &g2)[0]);
    assert_eq!(fp1, fp2);
}

#[test]
fn priority_swap_is_exception_kind_mismatch() {
    let (dut, golden) = trace_pair("lui x1, 16\nlw x2, x1, 1", BugToggle::ExcPrioritySwap);
    let ms = compare(&dut, &golden);
    assert_eq!(ms.len(), 1);
    assert_eq!(ms[0].kind, MismatchKind::ExceptionKind);
    let fp = fingerprint(&ms[0]);
    assert_eq!(
        fp.exceptions,
        (
            Some(ExceptionKind::LoadAccessFault),
            Some(ExceptionKind::LoadAddressMisaligned)
        )
    );
}

#[test]
fn control_flow_divergence_stops_comparison() {
    // Self-modifying program: under stale fetch the DUT executes the old
    // word at pc 16, so the instruction streams part ways there.
    let (dut, golden) = trace_pair(
        "lui x3, 512\naddi x3, x3, 275\nsw x0, x3, 16\naddi x5, x0, 0\naddi x2, x0, 1\necall",
        BugToggle::StaleIfetchNoFencei,
    );
    let ms = compare(&dut, &golden);
    assert_eq!(ms.len(), 1, "no mismatches reported past the divergence");
    assert_eq!(ms[0].kind, MismatchKind::ControlFlowDivergence);
    assert_eq!(ms[0].step, 4);
}

#[test]
fn every_toggle_has_a_detecting_program() {
    // The injected-bug recall suite in miniature: one directed program
    // per fault model, each detected with the expected mismatch kind.
    let cases: [(&str, BugToggle, MismatchKind); 4] = [
        (
            "addi x1, x0, 6\nmul x3, x1, x1\necall",
            BugToggle::TraceOmitMuldivWb,
            MismatchKind::MissingRegWrite,
        ),
        (
            "addi x0, x0, 7\necall",
            BugToggle::TraceX0Write,
            MismatchKind::ExtraRegWrite,
        ),
        (
            "lui x1, 16\nlw x2, x1, 1",
            BugToggle::ExcPrioritySwap,
            MismatchKind::ExceptionKind,
        ),
        (
            "lui x3, 512\naddi x3, x3, 275\nsw x0, x3, 16\naddi x5, x0, 0\naddi x2, x0, 1\necall",
            BugToggle::StaleIfetchNoFencei,
            MismatchKind::ControlFlowDivergence,
        ),
    ];
    for (text, toggle, expected) in cases {
        let (dut, golden) = trace_pair(text, toggle);
        let ms = compare(&dut, &golden);
        assert!(
            ms.iter().any(|m| m.kind == expected),
            "{toggle}: expected a {expected} mismatch"
        );
    }
}

#[test]
fn trace_length_mismatch_when_one_trace_ends() {
    let program = assemble("addi x1, x0, 1\naddi x2, x0, 2\necall").unwrap();
    let (full, _) = run_program(&program, &ExecConfig::default()).unwrap();
    let truncated = &full[..2];
    let ms = compare(truncated, &full);
    assert_eq!(ms.len(), 1);
    assert_eq!(ms[0].kind, MismatchKind::TraceLength);
    assert_eq!(ms[0].step, 2);
    assert!(ms[0].dut_record.is_none());
    assert!(ms[0].golden_record.is_some());
}

#[test]
fn dedupe_merges_instances_and_conserves_counts() {
    let (d1, g1) = trace_pair("addi x0, x0, 7\necall", BugToggle::TraceX0Write);
    let (d2, g2) = trace_pair("addi x0, x0, 9\necall", BugToggle::TraceX0Write);
    let (d3, g3) = trace_pair(
        "addi x1, x0, 6\nmul x3, x1, x1\necall",
        BugToggle::TraceOmitMuldivWb,
    );
    let mut all = Vec::new();
    all.extend(compare(&d1, &g1));
    all.extend(compare(&d2, &g2));
    all.extend(compare(&d3, &g3));
    assert_eq!(all.len(), 3);

    let map = dedupe(&all);
    assert_eq!(map.len(), 2, "two distinct bug classes");
    let total: usize = map.values().map(|e| e.count).sum();
    assert_eq!(total, all.len(), "counts sum to input length");
    // The exemplar for the x0 class is the first instance (value 7).
    let x0_entry = map
        .values()
        .find(|e| e.exemplar.kind == MismatchKind::ExtraRegWrite)
        .unwrap();
    assert_eq!(
        x0_entry.exemplar.dut_record.unwrap().reg_write.unwrap().value,
        7
    );
    assert_eq!(dedupe(&[]).len(), 0);
}

#[test]
fn filters_suppress_only_matching_mismatches() {
    let (d1, g1) = trace_pair("addi x0, x0, 7\necall", BugToggle::TraceX0Write);
    let (d2, g2) = trace_pair(
        "addi x1, x0, 6\nmul x3, x1, x1\necall",
        BugToggle::TraceOmitMuldivWb,
    );
    let mut all = compare(&d1, &g1);
    all.extend(compare(&d2, &g2));
    assert_eq!(all.len(), 2);

    // Suppress trace-only x0 writes, keep everything else.
    let rules = parse_filter_rules("kind=extra-reg-write,reg=x0\n").unwrap();
    let kept = apply_filters(&all, &rules);
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].kind, MismatchKind::MissingRegWrite);

    // No rules: identity. One empty rule: matches everything.
    assert_eq!(apply_filters(&all, &[]), all);
    assert_eq!(apply_filters(&all, &[FilterRule::default()]), vec![]);
}

#[test]
fn filter_rule_parsing() {
    let rules = parse_filter_rules(
        "# housekeeping\n\nkind=exception-kind, exc=load-access-fault\nmnemonic=mul\n",
    )
    .unwrap();
    assert_eq!(rules.len(), 2);
    assert_eq!(rules[0].kind, Some(MismatchKind::ExceptionKind));
    assert_eq!(rules[0].exc, Some(ExceptionKind::LoadAccessFault));
    assert_eq!(rules[1].mnemonic, Some(Mnemonic::Mul));

    assert!(parse_filter_rules("kind=bogus\n").is_err());
    assert!(parse_filter_rules("register=x0\n").is_err());
    assert!(parse_filter_rules("reg=x99\n").is_err());
    assert!(parse_filter_rules("justaword\n").is_err());
}

#[test]
fn mismatch_log_accumulates_and_reports() {
    let mut log = MismatchLog::new();
    let (d1, g1) = trace_pair("addi x0, x0, 7\necall", BugToggle::TraceX0Write);
    let (d2, g2) = trace_pair("addi x0, x0, 9\necall", BugToggle::TraceX0Write);
    for m in compare(&d1, &g1) {
        log.record(11, &m);
    }
    for m in compare(&d2, &g2) {
        log.record(22, &m);
    }
    assert_eq!(log.total(), 2);
    assert_eq!(log.unique(), 1);
    let csv = log.csv();
    assert!(csv.starts_with(
        "mnemonic,kind,dut_exception,golden_exception,count,exemplar_program,step\n"
    ));
    assert!(csv.contains("addi,extra-reg-write,-,-,2,11,0"), "{csv}");
}

fn arb_words() -> impl Strategy<Value = Vec<EncodedWord>> {
    proptest::collection::vec(
        prop_oneof![
            Just(0x0010_0093u32), // addi x1, x0, 1
            Just(0x0000_0113u32), // addi x2, x0, 0
            Just(0x0220_81b3u32), // mul x3, x1, x2
            Just(0x0000_0073u32), // ecall
            Just(0x0000_0013u32), // nop (addi x0, x0, 0)
            any::<u32>(),
        ],
        0..16,
    )
    .prop_map(|ws| ws.into_iter().map(EncodedWord).collect())
}

proptest! {
    /// A trace never mismatches itself.
    #[test]
    fn prop_compare_reflexive(program in arb_words(), toggle_bits in 0u8..16) {
        let toggles: ToggleSet = BugToggle::ALL
            .into_iter()
            .enumerate()
            .filter(|(i, _)| toggle_bits >> i & 1 == 1)
            .map(|(_, t)| t)
            .collect();
        let cfg = ExecConfig { step_cap: 32, toggles, ..ExecConfig::default() };
        let (trace, _) = run_program(&program, &cfg).unwrap();
        prop_assert_eq!(compare(&trace, &trace), vec![]);
    }

    /// Detection is symmetric: swapping the argument order never changes
    /// whether a divergence is found.
    #[test]
    fn prop_compare_symmetric_detection(program in arb_words(), toggle_bits in 0u8..16) {
        let toggles: ToggleSet = BugToggle::ALL
            .into_iter()
            .enumerate()
            .filter(|(i, _)| toggle_bits >> i & 1 == 1)
            .map(|(_, t)| t)
            .collect();
        let base = ExecConfig { step_cap: 32, ..ExecConfig::default() };
        let (golden, _) = run_program(&program, &base).unwrap();
        let (dut, _) = run_program(&program, &base.with_toggles(toggles)).unwrap();
        prop_assert_eq!(
            compare(&dut, &golden).is_empty(),
            compare(&golden, &dut).is_empty()
        );
    }

    /// Dedupe conserves instance counts over arbitrary mismatch batches.
    #[test]
    fn prop_dedupe_conserves(programs in proptest::collection::vec(arb_words(), 1..8), toggle_bits in 1u8..16) {
        let toggles: ToggleSet = BugToggle::ALL
            .into_iter()
            .enumerate()
            .filter(|(i, _)| toggle_bits >> i & 1 == 1)
            .map(|(_, t)| t)
            .collect();
        let base = ExecConfig { step_cap: 32, ..ExecConfig::default() };
        let mut all = Vec::new();
        for p in &programs {
            let (golden, _) = run_program(p, &base).unwrap();
            let (dut, _) = run_program(p, &base.with_toggles(toggles)).unwrap();
            all.extend(compare(&dut, &golden));
        }
        let map = dedupe(&all);
        let total: usize = map.values().map(|e| e.count).sum();
        prop_assert_eq!(total, all.len());
        // Exemplar fingerprints are exactly the map keys.
        for (fp, e) in &map {
            prop_assert_eq!(*fp, fingerprint(&e.exemplar));
        }
    }
}
