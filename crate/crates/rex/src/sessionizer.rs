//! Groups a session's instructions into bursts of activity.
//!
//! Interactive sessions come in spurts: a flurry of closely spaced inputs,
//! a pause to read or think, another flurry. Each spurt usually revolves
//! around one experiment, so bursts are the unit from which test cases are
//! extracted. Bursts are found by single-linkage agglomerative clustering
//! over the instruction timestamps, cut off at a gap threshold; for sorted
//! one-dimensional data this is exactly the same partition as splitting at
//! every gap larger than the threshold.

use crate::transcript::{Instruction, Session, Timestamp};

/// Default pause, in seconds, that separates two bursts.
pub const DEFAULT_BURST_GAP: i64 = 90;

/// A contiguous run of instructions with no pause longer than the
/// threshold between consecutive inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Burst {
    pub instructions: Vec<Instruction>,
    /// Timestamp of the first instruction.
    pub start: Timestamp,
    /// Timestamp of the last instruction.
    pub end: Timestamp,
}

/// Splits `session` into bursts, breaking wherever the pause between
/// consecutive instructions exceeds `threshold_seconds`. A pause of
/// exactly the threshold does not split. Instructions keep their order,
/// and every instruction lands in exactly one burst.
pub fn split_bursts(session: &Session, threshold_seconds: i64) -> Vec<Burst> {
    assert!(threshold_seconds >= 1, "burst threshold must be at least 1s");
    let instructions = &session.instructions;
    if instructions.is_empty() {
        return Vec::new();
    }

    // Agglomerative single linkage over contiguous index ranges. Because
    // timestamps are sorted, the single-linkage distance between two
    // adjacent clusters is the gap across their shared boundary, and
    // non-adjacent clusters can never be closer than the clusters between
    // them, so only adjacent merges have to be considered.
    let mut clusters: Vec<(usize, usize)> = (0..instructions.len()).map(|i| (i, i)).collect();
    loop {
        let mut best: Option<(usize, i64)> = None;
        for i in 0..clusters.len().saturating_sub(1) {
            let gap = instructions[clusters[i + 1].0]
                .timestamp
                .gap_since(instructions[clusters[i].1].timestamp);
            if best.map(|(_, g)| gap < g).unwrap_or(true) {
                best = Some((i, gap));
            }
        }
        match best {
            Some((i, gap)) if gap <= threshold_seconds => {
                let (_, right_end) = clusters.remove(i + 1);
                clusters[i].1 = right_end;
            }
            _ => break,
        }
    }

    clusters
        .into_iter()
        .map(|(lo, hi)| Burst {
            instructions: instructions[lo..=hi].to_vec(),
            start: instructions[lo].timestamp,
            end: instructions[hi].timestamp,
        })
        .collect()
}
