//! Renders a context tree as RSpec-shaped Ruby source, and as a JSON
//! intermediate representation for downstream tooling.
//!
//! The text layout is canonical so output can be compared byte for
//! byte: two-space indentation, imports directly above the root
//! `describe`, setup before children before tests, exactly one trailing
//! newline.

use crate::synthesis::ContextTree;

/// Which rendering method the assertion calls on its subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenderStyle {
    #[default]
    Inspect,
    ToS,
}

impl RenderStyle {
    fn method(self) -> &'static str {
        match self {
            RenderStyle::Inspect => "inspect",
            RenderStyle::ToS => "to_s",
        }
    }
}

/// Emits the tree as an RSpec suite.
pub fn emit_rspec(tree: &ContextTree, style: RenderStyle) -> String {
    let mut out = String::new();
    for import in &tree.imports {
        push_lines(import, "", &mut out);
    }
    emit_context(tree, style, 0, &mut out);
    out
}

fn emit_context(node: &ContextTree, style: RenderStyle, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let inner = "  ".repeat(depth + 1);
    let body = "  ".repeat(depth + 2);

    out.push_str(&pad);
    out.push_str("describe ");
    out.push_str(&describe_name(&node.name));
    out.push_str(" do\n");

    if !node.setup.is_empty() {
        out.push_str(&inner);
        out.push_str("before :each do\n");
        for statement in &node.setup {
            push_lines(statement, &body, out);
        }
        out.push_str(&inner);
        out.push_str("end\n");
    }

    for child in &node.children {
        emit_context(child, style, depth + 1, out);
    }

    for test in &node.tests {
        out.push_str(&inner);
        out.push_str(&format!("it \"{}\" do\n", escape_ruby_string(&test.name)));
        for statement in &test.statements {
            push_lines(statement, &body, out);
        }
        if let Some(assertion) = &test.assertion {
            let pattern = match assertion.pattern.literal_text() {
                Some(text) => format!("\"{}\"", escape_ruby_string(&text)),
                None => format!("/{}/", assertion.pattern.rendered()),
            };
            out.push_str(&body);
            out.push_str(&format!(
                "{}.{}.should match {}\n",
                assertion.subject,
                style.method(),
                pattern
            ));
        }
        out.push_str(&inner);
        out.push_str("end\n");
    }

    out.push_str(&pad);
    out.push_str("end\n");
}

/// Indents every line of a (possibly multi-line) statement; relative
/// indentation of continuation lines is preserved.
fn push_lines(statement: &str, indent: &str, out: &mut String) {
    for line in statement.lines() {
        out.push_str(indent);
        out.push_str(line);
        out.push('\n');
    }
}

/// A context name that is a single constant reference appears bare,
/// anything else is quoted.
fn describe_name(name: &str) -> String {
    let mut chars = name.chars();
    let bare = matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if bare {
        name.to_string()
    } else {
        format!("\"{}\"", escape_ruby_string(name))
    }
}

/// Escapes text for a double-quoted Ruby string: backslash, quote, and
/// the `#{` interpolation opener.
fn escape_ruby_string(text: &str) -> String {
    let mut out = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '#' if chars.get(i + 1) == Some(&'{') => out.push_str("\\#"),
            _ => out.push(c),
        }
    }
    out
}

/// Emits the tree as compact JSON with stable key order.
pub fn emit_json_ir(tree: &ContextTree) -> String {
    serde_json::to_string(tree).expect("a context tree always serializes")
}

/// Reads a JSON IR document back into a tree.
pub fn parse_json_ir(text: &str) -> Result<ContextTree, serde_json::Error> {
    serde_json::from_str(text)
}
