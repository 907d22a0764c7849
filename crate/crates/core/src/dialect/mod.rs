//! Lexer, parser, syntax tree, formatter, and label extraction for the
//! supported Structured Text dialect subset.

pub mod ast;
pub mod labels;
pub mod parser;
pub mod printer;
pub mod span;
pub mod token;

pub use ast::*;
pub use labels::{extract_labels, Label, LabelError, LabelManifest, LabelScope};
pub use parser::{parse, parse_data_type, parse_source, parse_with_recovery, SourceError, SyntaxError, SyntaxErrors};
pub use printer::pretty_print;
pub use span::SourceSpan;
pub use token::{tokenize, LexError, Token, TokenKind};
