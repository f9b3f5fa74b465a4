//! From rewritten bursts to test cases: error filtering, assertion
//! synthesis, output masking, and test/context naming.
//!
//! Masking is how nondeterministic output is tamed. Recording the same
//! session twice yields two outputs per instruction; aligning them with a
//! character-level longest-common-subsequence diff and replacing the
//! unstable spans with wildcards turns `#<Object:0x106a2a628>` and
//! `#<Object:0x2119c85e0>` into the pattern `\#<Object:0x(.*)>`, which
//! matches any future run.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::depgraph::{RewrittenBurst, RewrittenStatement};
use crate::lex::{self, TokenKind};
use crate::transcript::{OutputChunk, OutputKind};

/// Common runs shorter than this, caught between two wildcards, are
/// absorbed: an accidental shared digit inside an object address should
/// not fragment the wildcard.
const WILDCARD_MERGE_MIN_RUN: usize = 3;

/// Characters escaped when a pattern is rendered as a regular expression.
/// `#` and `/` are included so the rendering can be embedded in a
/// slash-delimited Ruby regexp literal.
const REGEX_ESCAPE: &str = "\\.+*?()|[]{}^$#/";

/// One aligned piece of a masked output pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Literal { text: String },
    Wildcard,
}

/// An output pattern whose volatile spans are wildcards. Holds no empty
/// literals and no two adjacent wildcards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaskedPattern {
    pub segments: Vec<Segment>,
}

impl MaskedPattern {
    /// A pattern that matches `text` exactly.
    pub fn literal(text: &str) -> MaskedPattern {
        let segments = if text.is_empty() {
            Vec::new()
        } else {
            vec![Segment::Literal { text: text.to_string() }]
        };
        MaskedPattern { segments }
    }

    /// True when the pattern contains no wildcard.
    pub fn is_literal(&self) -> bool {
        !self.segments.iter().any(|s| matches!(s, Segment::Wildcard))
    }

    /// The exact text of a wildcard-free pattern.
    pub fn literal_text(&self) -> Option<String> {
        if !self.is_literal() {
            return None;
        }
        Some(
            self.segments
                .iter()
                .map(|s| match s {
                    Segment::Literal { text } => text.as_str(),
                    Segment::Wildcard => unreachable!(),
                })
                .collect(),
        )
    }

    /// Renders the pattern as a regular expression: literals are escaped,
    /// wildcards become `(.*)`.
    pub fn rendered(&self) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal { text } => {
                    for c in text.chars() {
                        if REGEX_ESCAPE.contains(c) {
                            out.push('\\');
                        }
                        out.push(c);
                    }
                }
                Segment::Wildcard => out.push_str("(.*)"),
            }
        }
        out
    }

    /// Reads a [`rendered`](Self::rendered) pattern back into segments.
    pub fn parse_rendered(rendered: &str) -> MaskedPattern {
        let mut segments = Vec::new();
        for (i, piece) in rendered.split("(.*)").enumerate() {
            if i > 0 {
                segments.push(Segment::Wildcard);
            }
            if !piece.is_empty() {
                segments.push(Segment::Literal { text: unescape(piece) });
            }
        }
        MaskedPattern { segments: collapse_wildcards(segments) }
    }
}

fn unescape(text: &str) -> String {
    let mut out = String::new();
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some(next) => out.push(next),
                None => out.push(c),
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Diffs two recordings of the same output and masks whatever changed.
///
/// The two strings are aligned character by character with a longest
/// common subsequence; aligned runs become literals (text taken from
/// `original`), everything else becomes a wildcard. Short common runs
/// trapped between wildcards are absorbed into them.
pub fn mask_outputs(original: &str, replay: &str) -> MaskedPattern {
    let a: Vec<char> = original.chars().collect();
    let b: Vec<char> = replay.chars().collect();

    // Aligned runs: (start in a, start in b, length).
    let runs = align(&a, &b);

    let mut segments = Vec::new();
    let mut ai = 0;
    let mut bi = 0;
    for &(ra, rb, len) in &runs {
        if ra > ai || rb > bi {
            segments.push(Segment::Wildcard);
        }
        segments.push(Segment::Literal { text: a[ra..ra + len].iter().collect() });
        ai = ra + len;
        bi = rb + len;
    }
    if ai < a.len() || bi < b.len() {
        segments.push(Segment::Wildcard);
    }

    // Absorb short literals that sit between two wildcards.
    let absorbed: Vec<Segment> = segments
        .iter()
        .enumerate()
        .map(|(i, seg)| match seg {
            Segment::Literal { text }
                if text.chars().count() < WILDCARD_MERGE_MIN_RUN
                    && i > 0
                    && matches!(segments.get(i - 1), Some(Segment::Wildcard))
                    && matches!(segments.get(i + 1), Some(Segment::Wildcard)) =>
            {
                Segment::Wildcard
            }
            seg => seg.clone(),
        })
        .collect();

    MaskedPattern { segments: collapse_wildcards(absorbed) }
}

/// Maximal runs of consecutively aligned characters under an LCS
/// alignment: a suffix table plus a forward walk that takes every
/// available match (matching equal characters never hurts an LCS). On a
/// mismatch with equally good sides the walk skips one character of
/// both, so the alignment — and with it the pattern shape — does not
/// depend on argument order; ties may cost a match, which only widens a
/// wildcard.
fn align(a: &[char], b: &[char]) -> Vec<(usize, usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let mut table = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i][j] = if a[i] == b[j] {
                table[i + 1][j + 1] + 1
            } else {
                table[i + 1][j].max(table[i][j + 1])
            };
        }
    }

    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut in_run = false;
    while i < n && j < m {
        if a[i] == b[j] {
            match runs.last_mut() {
                Some(run) if in_run => run.2 += 1,
                _ => runs.push((i, j, 1)),
            }
            in_run = true;
            i += 1;
            j += 1;
        } else {
            in_run = false;
            match table[i + 1][j].cmp(&table[i][j + 1]) {
                Ordering::Greater => i += 1,
                Ordering::Less => j += 1,
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    runs
}

fn collapse_wildcards(segments: Vec<Segment>) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for seg in segments {
        if matches!(seg, Segment::Wildcard) && matches!(out.last(), Some(Segment::Wildcard)) {
            continue;
        }
        out.push(seg);
    }
    out
}

/// A test assertion: `<subject>.inspect.should match <pattern>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub subject: String,
    pub pattern: MaskedPattern,
}

/// One extracted test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub name: String,
    pub statements: Vec<String>,
    pub assertion: Option<Assertion>,
    /// True when the test only replays statements without asserting.
    pub smoke: bool,
}

/// A `describe` context: shared setup, nested child contexts, and tests.
/// Imports are only populated on the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextTree {
    pub name: String,
    pub imports: Vec<String>,
    pub setup: Vec<String>,
    pub children: Vec<ContextTree>,
    pub tests: Vec<TestCase>,
}

impl Default for ContextTree {
    fn default() -> Self {
        ContextTree {
            name: "Session".to_string(),
            imports: Vec::new(),
            setup: Vec::new(),
            children: Vec::new(),
            tests: Vec::new(),
        }
    }
}

/// A burst with its error-carrying statements removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredBurst {
    pub kept: Vec<RewrittenStatement>,
    /// True when the burst's last instruction errored, in which case the
    /// burst cannot assert on its final value.
    pub final_errored: bool,
}

/// Drops statements whose instruction errored; they don't reproduce when
/// replayed. Their defs and uses still participated in grouping, so the
/// context structure is unaffected.
pub fn filter_for_emission(burst: &RewrittenBurst) -> FilteredBurst {
    FilteredBurst {
        kept: burst.statements.iter().filter(|s| !s.errored).cloned().collect(),
        final_errored: burst.statements.last().map(|s| s.errored).unwrap_or(false),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssertionOutcome {
    Asserted(Assertion),
    /// The burst ends in an error; emit its statements as a smoke test.
    SmokeFinalErrored,
    /// The final instruction produced no observable output; emit a smoke
    /// test and let the caller warn about it.
    SmokeNoOutput,
}

/// Builds the assertion for a burst from its final instruction's output:
/// the last result chunk if there is one, otherwise the last print chunk.
pub fn synthesize_assertion(
    subject: Option<&str>,
    final_outputs: &[OutputChunk],
    final_errored: bool,
) -> AssertionOutcome {
    if final_errored {
        return AssertionOutcome::SmokeFinalErrored;
    }
    let subject = subject.expect("a clean final instruction is always named by the rewrite");
    let text = final_outputs
        .iter()
        .rev()
        .find(|c| c.kind == OutputKind::Result)
        .or_else(|| final_outputs.iter().rev().find(|c| c.kind == OutputKind::Print))
        .map(|c| c.text.as_str());
    match text {
        Some(text) => AssertionOutcome::Asserted(Assertion {
            subject: subject.to_string(),
            pattern: MaskedPattern::literal(text),
        }),
        None => AssertionOutcome::SmokeNoOutput,
    }
}

/// Names a test after what it exercises: the methods invoked (identifiers
/// in call position after `.`) and the top-level infix operators, in
/// first-occurrence order without duplicates, prefixed with "should".
pub fn name_test<S: AsRef<str>>(statements: &[S]) -> String {
    let mut parts: Vec<String> = Vec::new();
    for statement in statements {
        let tokens = lex::tokenize(statement.as_ref());
        for (i, token) in tokens.iter().enumerate() {
            let part = match token.kind {
                TokenKind::Ident
                    if token.after_dot && token.is_lower_ident() && !token.is_keyword() =>
                {
                    Some(&token.text)
                }
                TokenKind::Op
                    if token.depth == 0
                        && lex::NAME_OPS.contains(&token.text.as_str())
                        && i > 0
                        && tokens[i - 1].ends_operand() =>
                {
                    Some(&token.text)
                }
                _ => None,
            };
            if let Some(part) = part {
                if !parts.iter().any(|p| p == part) {
                    parts.push(part.clone());
                }
            }
        }
    }
    if parts.is_empty() {
        "should evaluate".to_string()
    } else {
        format!("should {}", parts.join(" "))
    }
}

/// Names a context after the class names (capitalized identifiers) that
/// appear in its statements, in first-occurrence order without
/// duplicates. Falls back to "Session".
pub fn name_context<S: AsRef<str>>(statements: &[S]) -> String {
    let mut parts: Vec<String> = Vec::new();
    for statement in statements {
        for token in lex::tokenize(statement.as_ref()) {
            if token.is_upper_ident() && !parts.contains(&token.text) {
                parts.push(token.text);
            }
        }
    }
    if parts.is_empty() {
        "Session".to_string()
    } else {
        parts.join(" ")
    }
}
