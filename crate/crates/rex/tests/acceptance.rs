//! Acceptance checks for the extraction tool: golden end-to-end runs,
//! structural guarantees on the emitted suites, an independent oracle
//! for burst clustering, and a budgeted randomized-property sweep. Each
//! check prints one `PASS:` line (visible with `--nocapture`) and
//! enforces its own runtime budget where one applies.

mod common;

use std::collections::HashSet;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{arb_plan, arb_tree, do_end_balanced, render_session};
use rex::emit::{emit_json_ir, emit_rspec, parse_json_ir, RenderStyle};
use rex::sessionizer::split_bursts;
use rex::synthesis::{mask_outputs, ContextTree, Segment};
use rex::transcript::{
    dump_events, parse_events, parse_transcript, Instruction, Session, Timestamp,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Runs the binary with a clean environment so ambient REX_BURST_GAP
/// settings can't leak in.
fn rex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rex"))
        .args(args)
        .env_remove("REX_BURST_GAP")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

fn extract_json(name: &str) -> ContextTree {
    let path = fixture(name);
    let out = rex(&["extract", path.to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    parse_json_ir(stdout(&out).trim_end()).expect("valid JSON IR")
}

/// Every setup block and every test body in the tree, in document order.
fn statement_lists(tree: &ContextTree, out: &mut Vec<Vec<String>>) {
    out.push(tree.setup.clone());
    for child in &tree.children {
        statement_lists(child, out);
    }
    for test in &tree.tests {
        out.push(test.statements.clone());
    }
}

// ------------------------------------------------------- golden suites

#[test]
fn check_1_recorded_session_extracts_to_the_golden_suite() {
    let expected = "\
require 'rational'
describe Rational do
  it \"should +\" do
    x = Rational(1,3)
    y = x + Rational(1,6)
    y.inspect.should match \"Rational(1, 2)\"
  end
end
";
    let path = fixture("rational.log");
    let started = Instant::now();
    let out = rex(&["extract", path.to_str().unwrap()]);
    let elapsed = started.elapsed();

    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out), expected, "suite differs from the golden output");
    assert_eq!(stderr(&out), "");
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("PASS: rational session extracts byte-exact in {elapsed:?}");
}

#[test]
fn check_2_masking_two_recordings_and_feeding_the_masks_back() {
    let a = fixture("object_a.log");
    let b = fixture("object_b.log");
    let dir = tempfile::tempdir().unwrap();
    let mask_path = dir.path().join("object.masks");

    let started = Instant::now();
    let out = rex(&["mask", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out), "\\#<Object:0x(.*)>\n", "unexpected mask");

    let mut file = std::fs::File::create(&mask_path).unwrap();
    file.write_all(out.stdout.as_slice()).unwrap();
    drop(file);

    let out = rex(&[
        "extract",
        a.to_str().unwrap(),
        "--lenient",
        "--masks",
        mask_path.to_str().unwrap(),
    ]);
    let elapsed = started.elapsed();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("x.inspect.should match /\\#<Object:0x(.*)>/"),
        "masked assertion missing from:\n{}",
        stdout(&out)
    );
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("PASS: object-address mask and masked re-extraction in {elapsed:?}");
}

// -------------------------------------------------- clustering oracle

fn session_from_times(times: &[i64]) -> Session {
    Session {
        instructions: times
            .iter()
            .enumerate()
            .map(|(index, &t)| Instruction {
                index,
                timestamp: Timestamp(t),
                source: format!("s{index}"),
                outputs: Vec::new(),
                error: None,
            })
            .collect(),
        preamble: Vec::new(),
    }
}

/// Brute-force reference: scan the gaps and cut wherever one exceeds
/// the threshold.
fn gap_scan(times: &[i64], threshold: i64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..times.len() {
        if i == 0 || times[i] - times[i - 1] > threshold {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(i);
    }
    groups
}

#[test]
fn check_3_clustering_agrees_with_the_gap_scan_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut checked = 0usize;
    for _ in 0..1000 {
        let len: usize = rng.gen_range(0..=50);
        let mut now: i64 = rng.gen_range(0..=86_400);
        let mut times = Vec::with_capacity(len);
        for _ in 0..len {
            now += rng.gen_range(0..=300);
            times.push(now);
        }
        let session = session_from_times(&times);
        for threshold in [1i64, 30, 90, 120] {
            let bursts = split_bursts(&session, threshold);
            let got: Vec<Vec<usize>> = bursts
                .iter()
                .map(|b| b.instructions.iter().map(|i| i.index).collect())
                .collect();
            assert_eq!(
                got,
                gap_scan(&times, threshold),
                "length {len}, threshold {threshold}, times {times:?}"
            );
            for burst in &bursts {
                assert_eq!(burst.start, burst.instructions[0].timestamp);
                assert_eq!(burst.end, burst.instructions.last().unwrap().timestamp);
            }
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    assert_eq!(checked, 4000);
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    println!("PASS: burst clustering matched the oracle on {checked} cases in {elapsed:?}");
}

// --------------------------------------------------- emitted structure

#[test]
fn check_4_shared_definitions_nest_without_duplication() {
    let tree = extract_json("abc.log");

    assert_eq!(tree.setup, vec!["a = 1".to_string()], "root setup");
    assert_eq!(tree.children.len(), 2, "expected two child contexts");
    assert_eq!(tree.children[0].setup, vec!["b = 2".to_string()]);
    assert_eq!(tree.children[1].setup, vec!["c = 3".to_string()]);
    assert!(tree.tests.is_empty(), "no tests belong at the root");
    assert_eq!(tree.children[0].tests.len(), 2);
    assert_eq!(tree.children[1].tests.len(), 1);

    let mut lists = Vec::new();
    statement_lists(&tree, &mut lists);
    let mut seen = HashSet::new();
    for statement in lists.iter().flatten() {
        assert!(seen.insert(statement.clone()), "duplicated statement: {statement}");
    }
    println!("PASS: a/b/c scenario nests into two child contexts with no duplicated setup");
}

#[test]
fn check_5_errored_definitions_are_dropped_but_still_group() {
    let path = fixture("errshare.log");
    let out = rex(&["extract", path.to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let raw = stdout(&out);
    assert!(!raw.contains("boom"), "erroring statement leaked into: {raw}");

    let tree = parse_json_ir(raw.trim_end()).expect("valid JSON IR");
    assert_eq!(tree.children.len(), 1, "the two `a` readers share one context");
    let shared = &tree.children[0];
    assert!(shared.setup.is_empty(), "the errored definition must not be setup");
    assert_eq!(shared.tests.len(), 2);
    assert!(shared.tests[0].statements.iter().any(|s| s.contains("a + 1")));
    assert!(shared.tests[1].statements.iter().any(|s| s.contains("a * 2")));
    assert_eq!(tree.tests.len(), 1, "the independent burst stays at the root");
    assert!(tree.tests[0].statements.iter().any(|s| s.contains("5 * 5")));
    println!("PASS: errored definition dropped everywhere, dependents still grouped");
}

#[test]
fn check_6_bursts_ending_in_an_error_emit_smoke_tests() {
    let path = fixture("smoke.log");
    let out = rex(&["extract", path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("it \"should evaluate\" do\n"), "no it block in:\n{text}");
    assert!(text.contains("\n    x = 1\n"), "statement missing from:\n{text}");
    assert!(!text.contains("should match"), "smoke test must not assert:\n{text}");
    println!("PASS: burst ending in an error becomes a statement-only smoke test");
}

// ----------------------------------------------- randomized properties

/// Runs `test` over 512 random cases of `strategy`, panicking with the
/// shrunk counterexample on failure.
fn holds_for<S: Strategy>(label: &str, strategy: S, test: impl Fn(S::Value)) {
    let mut runner = TestRunner::new(Config {
        cases: 512,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, |value| {
            test(value);
            Ok(())
        })
        .unwrap_or_else(|e| panic!("{label}: {e}"));
}

#[test]
fn check_7_randomized_properties_hold_within_budget() {
    let started = Instant::now();

    holds_for("mask of identical outputs is literal", "[ -~]{0,40}", |a: String| {
        let pattern = mask_outputs(&a, &a);
        if a.is_empty() {
            assert!(pattern.segments.is_empty());
        } else {
            assert_eq!(pattern.segments, vec![Segment::Literal { text: a }]);
        }
    });

    holds_for(
        "rendered pattern matches both inputs",
        ("[ -~]{0,30}", "[ -~]{0,30}"),
        |(a, b): (String, String)| {
            let rendered = mask_outputs(&a, &b).rendered();
            let re = regex::Regex::new(&format!("^{rendered}$")).unwrap();
            assert!(re.is_match(&a), "pattern {rendered:?} missed {a:?}");
            assert!(re.is_match(&b), "pattern {rendered:?} missed {b:?}");
        },
    );

    holds_for("transcripts round-trip through the event dump", arb_plan(), |plan| {
        let session = parse_transcript(&render_session(&plan), false).unwrap();
        let restored = parse_events(&dump_events(&session)).expect("dump parses back");
        assert_eq!(restored.instructions, session.instructions);
    });

    holds_for("the JSON IR round-trips", arb_tree(), |tree| {
        assert_eq!(parse_json_ir(&emit_json_ir(&tree)).unwrap(), tree);
    });

    holds_for("emitted suites balance do and end", arb_tree(), |tree| {
        for style in [RenderStyle::Inspect, RenderStyle::ToS] {
            let text = emit_rspec(&tree, style);
            assert!(do_end_balanced(&text), "unbalanced:\n{text}");
        }
    });

    holds_for("bursts partition the instructions", arb_plan(), |plan| {
        let session = parse_transcript(&render_session(&plan), false).unwrap();
        for threshold in [1, 30, 90, 120] {
            let bursts = split_bursts(&session, threshold);
            let rejoined: Vec<_> = bursts
                .iter()
                .flat_map(|b| b.instructions.iter().cloned())
                .collect();
            assert_eq!(rejoined, session.instructions);
        }
    });

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!("PASS: six properties held over 512 cases each in {elapsed:?}");
}
