//! Text formats: the `.id` diagram format and the policy format.
//!
//! Both formats are line oriented; `#` starts a comment that runs to the end
//! of the line. Parsers report the first problem with a 1-based line and
//! column. Writers emit a canonical layout, so parsing a written document
//! and writing it again reproduces the bytes exactly.

use thiserror::Error;

mod diagram;
mod policy;

pub use diagram::{parse_diagram, write_diagram};
pub use policy::{parse_policy, write_policy};

/// A syntax or name-resolution problem in a text document.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// The input line without its comment, or `None` when nothing remains.
fn meaningful(raw: &str) -> Option<&str> {
    let content = match raw.find('#') {
        Some(pos) => &raw[..pos],
        None => raw,
    };
    if content.trim().is_empty() {
        None
    } else {
        Some(content)
    }
}

/// 1-based character column of a byte offset within a line.
fn column_at(line: &str, byte_offset: usize) -> usize {
    line[..byte_offset.min(line.len())].chars().count() + 1
}

/// Whitespace-separated tokens with their byte offsets.
fn tokens_with_offsets(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        if c.is_whitespace() {
            if let Some(st) = start.take() {
                out.push((st, &s[st..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(st) = start {
        out.push((st, &s[st..]));
    }
    out
}

/// Segments of `s` split by `sep`, each with the byte offset of its first
/// non-whitespace character (or of the segment when blank).
fn split_with_offsets(s: &str, sep: char) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut seg_start = 0usize;
    for (i, c) in s.char_indices() {
        if c == sep {
            out.push(trim_segment(s, seg_start, i));
            seg_start = i + c.len_utf8();
        }
    }
    out.push(trim_segment(s, seg_start, s.len()));
    return out;

    fn trim_segment(s: &str, start: usize, end: usize) -> (usize, &str) {
        let seg = &s[start..end];
        let lead = seg.len() - seg.trim_start().len();
        (start + lead, seg.trim())
    }
}

/// Rejects tokens that cannot serve as a variable or outcome name.
fn check_name(line_no: usize, line: &str, offset: usize, token: &str) -> Result<(), ParseError> {
    if token == "*" || token.chars().any(|c| "=,{}:#>".contains(c)) {
        return Err(ParseError::new(
            line_no,
            column_at(line, offset),
            format!("invalid name '{token}'"),
        ));
    }
    Ok(())
}
