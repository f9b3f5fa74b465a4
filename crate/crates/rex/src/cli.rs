//! Command-line interface: `rex extract | mask | parse`.
//!
//! Exit codes are a stable contract: 0 success (warnings allowed on
//! stderr), 1 I/O failure, 2 malformed input. Identical inputs and
//! flags produce byte-identical output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::emit::{emit_json_ir, emit_rspec, RenderStyle};
use crate::pipeline::{self, ExtractOptions};
use crate::sessionizer::DEFAULT_BURST_GAP;
use crate::transcript::{dump_events, parse_transcript, Session};

#[derive(Parser)]
#[command(
    name = "rex",
    version,
    about = "Extract unit-test suites from recorded REPL session transcripts"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a test suite from a transcript.
    Extract {
        /// Transcript file to read.
        transcript: PathBuf,
        /// Seconds of inactivity that split the session into bursts
        /// (default 90; REX_BURST_GAP overrides the default).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        burst_gap: Option<u64>,
        /// Output format.
        #[arg(long, value_enum, default_value_t = Format::Rspec)]
        format: Format,
        /// Accept prompts without timestamps.
        #[arg(long)]
        lenient: bool,
        /// Rendering method the assertions call on their subject.
        #[arg(long, value_enum, default_value_t = Render::Inspect)]
        render: Render,
        /// Mask file (from `rex mask`) replacing literal assertion
        /// patterns with wildcarded ones.
        #[arg(long)]
        masks: Option<PathBuf>,
        /// Write here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Diff two recordings of the same session into masked patterns,
    /// one line per instruction.
    Mask {
        /// First recording.
        original: PathBuf,
        /// Second recording of the same commands.
        replay: PathBuf,
        /// Write here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Dump the parsed instruction events as JSON.
    Parse {
        /// Transcript file to read.
        transcript: PathBuf,
        /// Accept prompts without timestamps.
        #[arg(long)]
        lenient: bool,
        /// Write here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Rspec,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Render {
    Inspect,
    ToS,
}

const EXIT_IO: u8 = 1;
const EXIT_MALFORMED: u8 = 2;

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(context: &str, err: std::io::Error) -> Failure {
        Failure { code: EXIT_IO, message: format!("{context}: {err}") }
    }

    fn malformed(message: String) -> Failure {
        Failure { code: EXIT_MALFORMED, message }
    }
}

/// Parses arguments from the environment, runs the command, and
/// returns the process exit code.
pub fn run() -> u8 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Extract { transcript, burst_gap, format, lenient, render, masks, output } => {
            let session = read_session(&transcript, lenient)?;
            let masks = match masks {
                Some(path) => Some(pipeline::parse_mask_file(&read_file(&path)?)),
                None => None,
            };
            let options = ExtractOptions { burst_gap: effective_burst_gap(burst_gap)?, masks };
            let extraction = pipeline::extract_tree(&session, &options);
            for warning in &extraction.warnings {
                eprintln!("warning: {warning}");
            }
            let text = match (&extraction.tree, format) {
                (Some(tree), Format::Rspec) => emit_rspec(tree, render_style(render)),
                (Some(tree), Format::Json) => {
                    let mut ir = emit_json_ir(tree);
                    ir.push('\n');
                    ir
                }
                (None, _) => String::new(),
            };
            write_output(output.as_deref(), &text)
        }
        Command::Mask { original, replay, output } => {
            // Mask inputs are often captured with plain prompts, so
            // they always parse leniently.
            let first = read_session(&original, true)?;
            let second = read_session(&replay, true)?;
            let patterns =
                pipeline::mask_patterns(&first, &second).map_err(|e| Failure::malformed(e.to_string()))?;
            write_output(output.as_deref(), &pipeline::render_mask_file(&patterns))
        }
        Command::Parse { transcript, lenient, output } => {
            let session = read_session(&transcript, lenient)?;
            let mut events = dump_events(&session);
            events.push('\n');
            write_output(output.as_deref(), &events)
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(&path.display().to_string(), e))
}

fn read_session(path: &Path, lenient: bool) -> Result<Session, Failure> {
    let text = read_file(path)?;
    parse_transcript(&text, lenient)
        .map_err(|e| Failure::malformed(format!("{}: {e}", path.display())))
}

/// The burst gap comes from the flag when given, else REX_BURST_GAP,
/// else the default.
fn effective_burst_gap(flag: Option<u64>) -> Result<i64, Failure> {
    let seconds = match flag {
        Some(seconds) => seconds,
        None => match std::env::var("REX_BURST_GAP") {
            Ok(value) => value.parse::<u64>().ok().filter(|&s| s >= 1).ok_or_else(|| {
                Failure::malformed(format!(
                    "REX_BURST_GAP must be a positive number of seconds, got `{value}`"
                ))
            })?,
            Err(_) => return Ok(DEFAULT_BURST_GAP),
        },
    };
    i64::try_from(seconds)
        .map_err(|_| Failure::malformed(format!("burst gap {seconds} is out of range")))
}

fn render_style(render: Render) -> RenderStyle {
    match render {
        Render::Inspect => RenderStyle::Inspect,
        Render::ToS => RenderStyle::ToS,
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(&path.display().to_string(), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::io("stdout", e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn the_argument_grammar_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn burst_gap_falls_back_to_env_then_default() {
        // The flag wins outright; exercising the env var itself is left
        // to the integration tests, since tests here share a process.
        assert_eq!(effective_burst_gap(Some(30)).unwrap(), 30);
    }
}
