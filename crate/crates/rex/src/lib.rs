//! rex extracts executable unit-test suites from recorded REPL session
//! transcripts.
//!
//! A transcript is parsed into timestamped instructions, split into
//! bursts of activity separated by pauses, rewritten so results survive
//! outside the REPL, filtered of errors, and regrouped by the variables
//! the bursts share. Each burst becomes one test asserting on its final
//! value; shared definitions become context setup.

mod lex;

pub mod cli;
pub mod depgraph;
pub mod emit;
pub mod pipeline;
pub mod sessionizer;
pub mod synthesis;
pub mod transcript;
