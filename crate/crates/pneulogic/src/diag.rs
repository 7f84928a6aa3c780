//! Located diagnostics shared by the textual formats (`.pneu`, `.chart`).

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => write!(f, "error"),
            Severity::Warning => write!(f, "warning"),
        }
    }
}

/// A parse- or semantic-level finding tied to a 1-based line/column position.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn error(line: usize, col: usize, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, line, col, message: message.into() }
    }

    pub fn warning(line: usize, col: usize, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, line, col, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// Renders as `<file>:<line>:<col>: <severity>: <message>`.
    pub fn render(&self, file: &str) -> String {
        format!("{}:{}:{}: {}: {}", file, self.line, self.col, self.severity, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.col, self.severity, self.message)
    }
}

/// A whitespace-separated token with its 1-based character column.
#[derive(Debug, Clone)]
pub(crate) struct Tok {
    pub col: usize,
    pub text: String,
}

/// Splits a line into tokens, dropping any `#` comment tail.
pub(crate) fn tokenize(line: &str) -> Vec<Tok> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    for (i, ch) in line.chars().enumerate() {
        if ch == '#' {
            break;
        }
        if ch.is_whitespace() {
            if !cur.is_empty() {
                toks.push(Tok { col: start, text: std::mem::take(&mut cur) });
            }
        } else {
            if cur.is_empty() {
                start = i + 1;
            }
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        toks.push(Tok { col: start, text: cur });
    }
    toks
}

/// `[A-Za-z_][A-Za-z0-9_]*` — actuator and valve ids.
pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Monitor labels additionally allow `+` and `-` after the first character.
pub(crate) fn is_label(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '+' || c == '-')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_includes_location_and_severity() {
        let d = Diagnostic::error(3, 7, "unknown key `fil`");
        assert_eq!(d.render("gait.pneu"), "gait.pneu:3:7: error: unknown key `fil`");
        let w = Diagnostic::warning(1, 1, "empty netlist");
        assert_eq!(w.render("-"), "-:1:1: warning: empty netlist");
    }
}
