use std::fmt;

use serde::{Deserialize, Serialize};

/// A region of source text. Lines and columns are 1-based; the end position
/// points just past the last character covered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl SourceSpan {
    pub fn new(start_line: u32, start_col: u32, end_line: u32, end_col: u32) -> Self {
        Self {
            start_line,
            start_col,
            end_line,
            end_col,
        }
    }

    /// Zero-width span at the very start of a document.
    pub fn origin() -> Self {
        Self::new(1, 1, 1, 1)
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        let (start_line, start_col) = (self.start_line, self.start_col).min((other.start_line, other.start_col));
        let (end_line, end_col) = (self.end_line, self.end_col).max((other.end_line, other.end_col));
        SourceSpan {
            start_line,
            start_col,
            end_line,
            end_col,
        }
    }

    pub fn start(&self) -> (u32, u32) {
        (self.start_line, self.start_col)
    }

    pub fn end(&self) -> (u32, u32) {
        (self.end_line, self.end_col)
    }

    pub fn is_well_ordered(&self) -> bool {
        self.start() <= self.end()
    }

    /// True when the span lies within a document of the given text.
    pub fn within(&self, source: &str) -> bool {
        let lines: Vec<&str> = source.split('\n').collect();
        let fits = |line: u32, col: u32| {
            line >= 1
                && (line as usize) <= lines.len()
                && col >= 1
                && (col as usize) <= lines[line as usize - 1].chars().count() + 1
        };
        self.is_well_ordered() && fits(self.start_line, self.start_col) && fits(self.end_line, self.end_col)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}-{}:{}",
            self.start_line, self.start_col, self.end_line, self.end_col
        )
    }
}
