//! Concrete syntax: tokens, trees, parser and printers.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use lexer::{tokenize, LexError, Span, Token, TokenKind};
pub use parser::{parse_expr, parse_program, parse_source, ParseError};
pub use pretty::{dump_ast, print_program, strip_spans};
