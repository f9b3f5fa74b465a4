//! Minimal token scanner for REPL statement sources.
//!
//! This is deliberately not a real Ruby lexer. It knows just enough to
//! support the def/use heuristics: string literals are skipped, `#`
//! comments are dropped, bracket depth is tracked, and multi-character
//! operators are split off with maximal munch so `==` never looks like
//! an assignment.

/// Words that never count as variable definitions or uses.
pub const KEYWORDS: &[&str] = &[
    "if", "else", "end", "do", "then", "while", "for", "true", "false", "nil", "require", "def",
    "return", "not", "and", "or",
];

/// Operators that bind a value to the identifier on their left.
pub const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "**=", "||=", "&&=", "|=", "&=", "^=", "<<=", ">>=",
];

/// Infix operator vocabulary used when naming extracted tests.
pub const NAME_OPS: &[&str] = &[
    "+", "-", "*", "/", "%", "**", "==", "<", ">", "<=", ">=", "<<", ">>", "&", "|",
];

/// Multi-character operators, longest first so munching is maximal.
const OPERATORS: &[&str] = &[
    "**=", "<<=", ">>=", "<=>", "===", "||=", "&&=", "==", "!=", "<=", ">=", "=>", "=~", "||",
    "&&", "**", "<<", ">>", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "::", "=", "+", "-",
    "*", "/", "%", "<", ">", "&", "|", "^", "!", "?", ":", ",", ".", ";",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte span in the source, for in-place rewriting.
    pub start: usize,
    pub end: usize,
    /// Bracket nesting depth at the token (0 = top level).
    pub depth: u32,
    /// True when the previous token was a `.` (method position).
    pub after_dot: bool,
}

impl Token {
    pub fn is_lower_ident(&self) -> bool {
        self.kind == TokenKind::Ident
            && self
                .text
                .chars()
                .next()
                .map(|c| c.is_ascii_lowercase() || c == '_')
                .unwrap_or(false)
    }

    pub fn is_upper_ident(&self) -> bool {
        self.kind == TokenKind::Ident
            && self
                .text
                .chars()
                .next()
                .map(|c| c.is_ascii_uppercase())
                .unwrap_or(false)
    }

    pub fn is_keyword(&self) -> bool {
        self.kind == TokenKind::Ident && KEYWORDS.contains(&self.text.as_str())
    }

    /// True for tokens that can end an operand, which makes a following
    /// operator infix rather than unary.
    pub fn ends_operand(&self) -> bool {
        match self.kind {
            TokenKind::Ident | TokenKind::Number | TokenKind::Str => true,
            TokenKind::Op => matches!(self.text.as_str(), ")" | "]" | "}"),
        }
    }
}

pub fn tokenize(source: &str) -> Vec<Token> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut depth: u32 = 0;
    let mut i = 0;

    while i < bytes.len() {
        let c = bytes[i] as char;

        if c.is_whitespace() {
            i += 1;
            continue;
        }

        // Comment: skip to end of line.
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }

        // String literal: skip contents, honouring backslash escapes.
        if c == '\'' || c == '"' {
            let quote = bytes[i];
            let start = i;
            i += 1;
            while i < bytes.len() {
                if bytes[i] == b'\\' {
                    i = (i + 2).min(bytes.len());
                } else if bytes[i] == quote {
                    i += 1;
                    break;
                } else {
                    i += 1;
                }
            }
            push(&mut tokens, TokenKind::Str, source, start, i, depth);
            continue;
        }

        // Identifier.
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            push(&mut tokens, TokenKind::Ident, source, start, i, depth);
            continue;
        }

        // Number: digit-led blob, optionally with one fractional part.
        // `1.upto` must stop before the dot, so the dot is only consumed
        // when a digit follows it.
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && (bytes[i + 1] as char).is_ascii_digit() {
                i += 1;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
            }
            push(&mut tokens, TokenKind::Number, source, start, i, depth);
            continue;
        }

        match c {
            '(' | '[' | '{' => {
                push(&mut tokens, TokenKind::Op, source, i, i + 1, depth);
                depth += 1;
                i += 1;
            }
            ')' | ']' | '}' => {
                depth = depth.saturating_sub(1);
                push(&mut tokens, TokenKind::Op, source, i, i + 1, depth);
                i += 1;
            }
            _ => {
                let rest = &source[i..];
                let op = OPERATORS.iter().find(|op| rest.starts_with(**op));
                match op {
                    Some(op) => {
                        push(&mut tokens, TokenKind::Op, source, i, i + op.len(), depth);
                        i += op.len();
                    }
                    None => {
                        // Unknown byte: skip it rather than guessing.
                        i += 1;
                    }
                }
            }
        }
    }

    tokens
}

fn push(tokens: &mut Vec<Token>, kind: TokenKind, source: &str, start: usize, end: usize, depth: u32) {
    let after_dot = matches!(
        tokens.last(),
        Some(Token { kind: TokenKind::Op, text, .. }) if text == "."
    );
    tokens.push(Token {
        kind,
        text: source[start..end].to_string(),
        start,
        end,
        depth,
        after_dot,
    });
}
