//! End-to-end wiring: session → bursts → rewritten seeds → context
//! tree, plus the instruction-aligned mask workflow used by replay
//! diffing.
//!
//! Heuristic trouble never aborts an extraction. Bursts that cannot be
//! rewritten or have nothing to emit are dropped with a warning and the
//! rest of the session still produces a suite.

use std::fmt;

use thiserror::Error;

use crate::depgraph::{
    build_context_tree, facts_for_seeds, resolve_last_result, session_defined_names,
    RewriteError, TestSeed,
};
use crate::sessionizer::split_bursts;
use crate::synthesis::{
    filter_for_emission, synthesize_assertion, Assertion, AssertionOutcome, ContextTree,
    MaskedPattern,
};
use crate::transcript::{OutputKind, Session};

/// Non-fatal findings surfaced during extraction; they belong on the
/// diagnostic stream, never in the emitted suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    NoInstructions,
    DanglingUnderscore { instruction_index: usize },
    NoObservableOutput { instruction_index: usize },
    EmptyBurst { instruction_index: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::NoInstructions => write!(f, "no instructions in transcript"),
            Warning::DanglingUnderscore { instruction_index } => write!(
                f,
                "instruction {instruction_index}: `_` refers to no previous result; burst skipped"
            ),
            Warning::NoObservableOutput { instruction_index } => write!(
                f,
                "instruction {instruction_index}: final instruction produced no output; emitting a smoke test"
            ),
            Warning::EmptyBurst { instruction_index } => write!(
                f,
                "burst starting at instruction {instruction_index} has nothing to emit; dropped"
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    /// Seconds of inactivity that separate bursts.
    pub burst_gap: i64,
    /// Replacement patterns by instruction index, from a mask file.
    pub masks: Option<Vec<Option<MaskedPattern>>>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { burst_gap: crate::sessionizer::DEFAULT_BURST_GAP, masks: None }
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    /// `None` when the session yields nothing to emit.
    pub tree: Option<ContextTree>,
    pub warnings: Vec<Warning>,
}

/// Runs the full pipeline over a parsed session.
pub fn extract_tree(session: &Session, options: &ExtractOptions) -> Extraction {
    let mut warnings = Vec::new();
    if session.instructions.is_empty() {
        warnings.push(Warning::NoInstructions);
        return Extraction { tree: None, warnings };
    }

    let reserved = session_defined_names(session);
    let mut seeds = Vec::new();
    for burst in split_bursts(session, options.burst_gap) {
        let rewritten = match resolve_last_result(&burst, &reserved) {
            Ok(rewritten) => rewritten,
            Err(RewriteError::DanglingUnderscore { instruction_index }) => {
                warnings.push(Warning::DanglingUnderscore { instruction_index });
                continue;
            }
        };
        let filtered = filter_for_emission(&rewritten);
        let last = burst.instructions.last().expect("bursts are never empty");
        let assertion = match synthesize_assertion(
            rewritten.subject.as_deref(),
            &last.outputs,
            filtered.final_errored,
        ) {
            AssertionOutcome::Asserted(assertion) => Some(assertion),
            AssertionOutcome::SmokeFinalErrored => None,
            AssertionOutcome::SmokeNoOutput => {
                warnings.push(Warning::NoObservableOutput { instruction_index: last.index });
                None
            }
        };
        let assertion = apply_mask(assertion, last.index, options.masks.as_deref());
        if filtered.kept.is_empty() && assertion.is_none() {
            warnings.push(Warning::EmptyBurst {
                instruction_index: burst.instructions[0].index,
            });
            continue;
        }
        seeds.push(TestSeed { burst: rewritten, kept: filtered.kept, assertion });
    }

    if seeds.is_empty() {
        return Extraction { tree: None, warnings };
    }
    let facts = facts_for_seeds(&seeds);
    Extraction { tree: Some(build_context_tree(&seeds, &facts)), warnings }
}

fn apply_mask(
    assertion: Option<Assertion>,
    instruction_index: usize,
    masks: Option<&[Option<MaskedPattern>]>,
) -> Option<Assertion> {
    let mut assertion = assertion?;
    if let Some(Some(pattern)) = masks.and_then(|m| m.get(instruction_index)) {
        assertion.pattern = pattern.clone();
    }
    Some(assertion)
}

/// The two transcripts handed to `mask` don't record the same session.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskPairError {
    #[error("transcripts differ in length: {original} vs {replay} instructions")]
    CountMismatch { original: usize, replay: usize },
    #[error("instruction {index}: sources differ between the transcripts")]
    SourceMismatch { index: usize },
}

/// Diffs two recordings of the same session instruction by instruction.
/// The result has one entry per instruction: the masked pattern of the
/// two final result chunks, or `None` when either side has no result.
pub fn mask_patterns(
    original: &Session,
    replay: &Session,
) -> Result<Vec<Option<MaskedPattern>>, MaskPairError> {
    if original.instructions.len() != replay.instructions.len() {
        return Err(MaskPairError::CountMismatch {
            original: original.instructions.len(),
            replay: replay.instructions.len(),
        });
    }
    let mut patterns = Vec::with_capacity(original.instructions.len());
    for (index, (a, b)) in original
        .instructions
        .iter()
        .zip(&replay.instructions)
        .enumerate()
    {
        if a.source != b.source {
            return Err(MaskPairError::SourceMismatch { index });
        }
        let pattern = match (final_result(a), final_result(b)) {
            (Some(left), Some(right)) => Some(crate::synthesis::mask_outputs(left, right)),
            _ => None,
        };
        patterns.push(pattern);
    }
    Ok(patterns)
}

fn final_result(instruction: &crate::transcript::Instruction) -> Option<&str> {
    instruction
        .outputs
        .iter()
        .rev()
        .find(|c| c.kind == OutputKind::Result)
        .map(|c| c.text.as_str())
}

/// Renders patterns as a mask file: one rendered pattern per line, in
/// instruction order, with an empty line standing in for instructions
/// that have no pattern.
pub fn render_mask_file(patterns: &[Option<MaskedPattern>]) -> String {
    let mut out = String::new();
    for pattern in patterns {
        if let Some(pattern) = pattern {
            out.push_str(&pattern.rendered());
        }
        out.push('\n');
    }
    out
}

/// Reads a mask file back; inverse of [`render_mask_file`].
pub fn parse_mask_file(text: &str) -> Vec<Option<MaskedPattern>> {
    text.lines()
        .map(|line| {
            if line.is_empty() {
                None
            } else {
                Some(MaskedPattern::parse_rendered(line))
            }
        })
        .collect()
}
