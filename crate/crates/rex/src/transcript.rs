//! Parser for recorded REPL session transcripts.
//!
//! A transcript is a plain-text capture of an interactive session. Each
//! input carries a bracketed UTC timestamp in front of the prompt:
//!
//! ```text
//! [2013-01-07T10:00:00Z] >> require 'rational'
//! => true
//! [2013-01-07T10:00:05Z] >> Rational(1,3)
//! => Rational(1, 3)
//! ```
//!
//! Line classification, in order of precedence:
//!
//! 1. `[<ts>] >> <src>` starts a new instruction.
//! 2. `[<ts>] .. <src>` continues the current instruction's source.
//! 3. `=> <text>` records an evaluation result for the current instruction.
//! 4. `<Kind>: <message>` where `<Kind>` ends in `Error` or `Exception`
//!    (optionally `::`-qualified) records an error; following plain lines
//!    up to the next prompt are folded into the message.
//! 5. Any other non-empty line after the first prompt is printed output.
//! 6. Lines before the first prompt form the session preamble (shell
//!    invocation and similar noise).
//!
//! In lenient mode prompts may also be bare (`>> <src>`, `.. <src>`);
//! instructions without a timestamp receive the synthetic timestamp 0.
//! Terminator commands (`quit`, `exit`) are dropped during parsing, CRLF
//! line endings are normalized, and trailing whitespace is stripped from
//! every line. Timestamps must be non-decreasing across the session.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds since the Unix epoch, whole seconds, UTC.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    /// Parses exactly the `YYYY-MM-DDTHH:MM:SSZ` form; anything else is
    /// rejected.
    pub fn parse_iso8601(s: &str) -> Option<Timestamp> {
        chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%SZ")
            .ok()
            .map(|dt| Timestamp(dt.and_utc().timestamp()))
    }

    pub fn seconds(self) -> i64 {
        self.0
    }

    /// Gap in seconds from `earlier` to `self`.
    pub fn gap_since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    /// An evaluation result echoed by the REPL (`=> ...`).
    Result,
    /// Text printed to stdout/stderr during evaluation.
    Print,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputChunk {
    pub kind: OutputKind,
    pub text: String,
}

/// An error reported by the REPL for one instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplError {
    /// Exception class, e.g. `NoMethodError` or `Foo::BarError`.
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    /// Position within the session, 0-based.
    pub index: usize,
    pub timestamp: Timestamp,
    /// Source text as typed, possibly multi-line.
    pub source: String,
    pub outputs: Vec<OutputChunk>,
    pub error: Option<ReplError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Session {
    pub instructions: Vec<Instruction>,
    /// Lines before the first prompt.
    pub preamble: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: malformed timestamp `{text}`")]
    MalformedTimestamp { line: usize, text: String },
    #[error("line {line}: output with no preceding prompt")]
    OrphanOutput { line: usize },
    #[error("line {line}: prompt with empty source")]
    EmptyInput { line: usize },
    #[error("line {line}: timestamp moves backwards")]
    NonMonotonicTime { line: usize },
}

static ERROR_LINE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^([A-Za-z_][A-Za-z0-9_]*(?:::[A-Za-z_][A-Za-z0-9_]*)*(?:Error|Exception)): ?(.*)$")
        .expect("static regex")
});

/// What a single line turned out to be.
enum Line<'a> {
    Prompt { timestamp: Timestamp, source: &'a str },
    Continuation { source: &'a str },
    Result { text: &'a str },
    ErrorHead { kind: &'a str, message: &'a str },
    Text(&'a str),
    Blank,
}

fn classify<'a>(line: &'a str, number: usize, lenient: bool) -> Result<Line<'a>, ParseError> {
    if let Some(rest) = line.strip_prefix('[') {
        if let Some((ts_text, after)) = rest.split_once(']') {
            let marker = if after.starts_with(" >> ") || after == " >>" {
                Some(true)
            } else if after.starts_with(" .. ") || after == " .." {
                Some(false)
            } else {
                None
            };
            if let Some(is_prompt) = marker {
                match Timestamp::parse_iso8601(ts_text) {
                    Some(timestamp) => {
                        let source = after.get(4..).unwrap_or("");
                        return Ok(if is_prompt {
                            Line::Prompt { timestamp, source }
                        } else {
                            Line::Continuation { source }
                        });
                    }
                    None if lenient => {
                        // Fall through: in lenient mode a prompt-shaped line
                        // with an unreadable time is treated as plain text.
                    }
                    None => {
                        return Err(ParseError::MalformedTimestamp {
                            line: number,
                            text: ts_text.to_string(),
                        })
                    }
                }
            }
        }
    }

    if lenient {
        if let Some(source) = line.strip_prefix(">> ") {
            return Ok(Line::Prompt { timestamp: Timestamp(0), source });
        }
        if line == ">>" {
            return Ok(Line::Prompt { timestamp: Timestamp(0), source: "" });
        }
        if let Some(source) = line.strip_prefix(".. ") {
            return Ok(Line::Continuation { source });
        }
        if line == ".." {
            return Ok(Line::Continuation { source: "" });
        }
    }

    if let Some(text) = line.strip_prefix("=> ") {
        return Ok(Line::Result { text });
    }
    if line == "=>" {
        return Ok(Line::Result { text: "" });
    }

    if let Some(caps) = ERROR_LINE.captures(line) {
        return Ok(Line::ErrorHead {
            kind: caps.get(1).expect("group 1").as_str(),
            message: caps.get(2).expect("group 2").as_str(),
        });
    }

    if line.is_empty() {
        return Ok(Line::Blank);
    }
    Ok(Line::Text(line))
}

/// Parses a transcript into a [`Session`].
///
/// In strict mode (`lenient == false`) every instruction must carry a
/// timestamped prompt. Lenient mode additionally accepts bare `>>`
/// prompts, which receive timestamp 0 and therefore land in one burst.
pub fn parse_transcript(text: &str, lenient: bool) -> Result<Session, ParseError> {
    struct Open {
        line: usize,
        timestamp: Timestamp,
        source: String,
        outputs: Vec<OutputChunk>,
        error: Option<ReplError>,
    }

    let mut session = Session::default();
    let mut current: Option<Open> = None;

    let finalize = |open: Option<Open>, session: &mut Session| -> Result<(), ParseError> {
        let Some(open) = open else { return Ok(()) };
        let source = open.source.trim_end().to_string();
        if matches!(source.as_str(), "quit" | "exit") {
            return Ok(());
        }
        if let Some(last) = session.instructions.last() {
            if open.timestamp < last.timestamp {
                return Err(ParseError::NonMonotonicTime { line: open.line });
            }
        }
        session.instructions.push(Instruction {
            index: session.instructions.len(),
            timestamp: open.timestamp,
            source,
            outputs: open.outputs,
            error: open.error,
        });
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let line = raw.trim_end();

        match classify(line, number, lenient)? {
            Line::Prompt { timestamp, source } => {
                finalize(current.take(), &mut session)?;
                if source.trim().is_empty() {
                    return Err(ParseError::EmptyInput { line: number });
                }
                current = Some(Open {
                    line: number,
                    timestamp,
                    source: source.trim().to_string(),
                    outputs: Vec::new(),
                    error: None,
                });
            }
            Line::Continuation { source } => match current.as_mut() {
                Some(open) => {
                    open.source.push('\n');
                    open.source.push_str(source);
                }
                // A continuation with nothing to continue can only appear
                // before the first prompt; it is preamble noise.
                None => session.preamble.push(line.to_string()),
            },
            Line::Result { text } => match current.as_mut() {
                Some(open) => match open.error.as_mut() {
                    // Once an instruction has errored, everything up to the
                    // next prompt belongs to the error report.
                    Some(error) => fold(error, line),
                    None => open.outputs.push(OutputChunk {
                        kind: OutputKind::Result,
                        text: text.to_string(),
                    }),
                },
                None => return Err(ParseError::OrphanOutput { line: number }),
            },
            Line::ErrorHead { kind, message } => match current.as_mut() {
                Some(open) => match open.error.as_mut() {
                    Some(error) => fold(error, line),
                    None => {
                        open.error = Some(ReplError {
                            kind: kind.to_string(),
                            message: message.to_string(),
                        })
                    }
                },
                None => session.preamble.push(line.to_string()),
            },
            Line::Text(text) => match current.as_mut() {
                Some(open) => match open.error.as_mut() {
                    Some(error) => fold(error, text),
                    None => open.outputs.push(OutputChunk {
                        kind: OutputKind::Print,
                        text: text.to_string(),
                    }),
                },
                None => session.preamble.push(text.to_string()),
            },
            Line::Blank => {
                if current.is_none() {
                    session.preamble.push(String::new());
                }
            }
        }
    }
    finalize(current.take(), &mut session)?;

    Ok(session)
}

fn fold(error: &mut ReplError, line: &str) {
    if !line.is_empty() {
        error.message.push('\n');
        error.message.push_str(line);
    }
}

/// Renders the instruction stream as deterministic JSON: an array with one
/// object per instruction, keys in a fixed order. The preamble is not part
/// of the event stream.
pub fn dump_events(session: &Session) -> String {
    serde_json::to_string_pretty(&session.instructions).expect("instructions serialize")
}

/// Reads a [`dump_events`] rendering back into a [`Session`].
pub fn parse_events(json: &str) -> Result<Session, serde_json::Error> {
    Ok(Session {
        instructions: serde_json::from_str(json)?,
        preamble: Vec::new(),
    })
}
