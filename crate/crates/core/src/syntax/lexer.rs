//! Tokenizer for `.lm` source text.

use std::fmt;

use thiserror::Error;

/// One-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    /// Lower-case initial name: predicates, constants, functions, type names.
    /// Hyphens join words (`count-prices`).
    Ident(String),
    /// Upper-case initial name.
    Var(String),
    Wildcard,
    Node(u64),
    World,
    Int(i64),
    Float(f64),
    Str(String),
    Type,
    Linear,
    Const,
    Exists,
    Bang,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Semi,
    Bar,
    Lolli,
    FatArrow,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    OrOr,
    AndAnd,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TokenKind::*;
        match self {
            Ident(s) => write!(f, "identifier `{s}`"),
            Var(s) => write!(f, "variable `{s}`"),
            Wildcard => f.write_str("`_`"),
            Node(n) => write!(f, "node `@{n}`"),
            World => f.write_str("`@world`"),
            Int(i) => write!(f, "integer `{i}`"),
            Float(x) => write!(f, "float `{x}`"),
            Str(s) => write!(f, "string '{s}'"),
            Type => f.write_str("`type`"),
            Linear => f.write_str("`linear`"),
            Const => f.write_str("`const`"),
            Exists => f.write_str("`exists`"),
            other => {
                let s = match other {
                    Bang => "!",
                    LParen => "(",
                    RParen => ")",
                    LBracket => "[",
                    RBracket => "]",
                    LBrace => "{",
                    RBrace => "}",
                    Comma => ",",
                    Dot => ".",
                    Semi => ";",
                    Bar => "|",
                    Lolli => "-o",
                    FatArrow => "=>",
                    Eq => "=",
                    Neq => "<>",
                    Lt => "<",
                    Le => "<=",
                    Gt => ">",
                    Ge => ">=",
                    Plus => "+",
                    Minus => "-",
                    Star => "*",
                    Slash => "/",
                    Percent => "%",
                    OrOr => "||",
                    AndAnd => "&&",
                    _ => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("{span}: unterminated string literal")]
    UnterminatedString { span: Span },
    #[error("{span}: illegal character {ch:?}")]
    IllegalCharacter { ch: char, span: Span },
    #[error("{span}: malformed number `{text}`")]
    BadNumber { text: String, span: Span },
}

impl LexError {
    pub fn span(&self) -> Span {
        match self {
            LexError::UnterminatedString { span }
            | LexError::IllegalCharacter { span, .. }
            | LexError::BadNumber { span, .. } => *span,
        }
    }
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    rest: &'a str,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { chars: src.chars().peekable(), rest: src, line: 1, col: 1 }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.rest.chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        self.rest = &self.rest[c.len_utf8()..];
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span { line: self.line, col: self.col }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits source text into tokens. Line comments (`// ...`) are dropped.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor::new(src);
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        let span = cur.span();
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.peek2() == Some('/') {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        let kind = if c.is_ascii_digit() {
            lex_number(&mut cur, span)?
        } else if c.is_ascii_alphabetic() || c == '_' {
            lex_name(&mut cur)
        } else if c == '@' {
            cur.bump();
            if cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                let mut digits = String::new();
                while let Some(d) = cur.peek().filter(|d| d.is_ascii_digit()) {
                    digits.push(d);
                    cur.bump();
                }
                let n = digits
                    .parse()
                    .map_err(|_| LexError::BadNumber { text: digits.clone(), span })?;
                TokenKind::Node(n)
            } else if cur.rest.starts_with("world")
                && !cur.rest[5..].starts_with(is_name_char)
            {
                for _ in 0..5 {
                    cur.bump();
                }
                TokenKind::World
            } else {
                return Err(LexError::IllegalCharacter { ch: '@', span });
            }
        } else if c == '\'' {
            cur.bump();
            let mut text = String::new();
            loop {
                match cur.bump() {
                    Some('\'') => break,
                    Some('\n') | None => return Err(LexError::UnterminatedString { span }),
                    Some(ch) => text.push(ch),
                }
            }
            TokenKind::Str(text)
        } else {
            lex_punct(&mut cur, span)?
        };
        out.push(Token { kind, span });
    }
    Ok(out)
}

fn lex_number(cur: &mut Cursor<'_>, span: Span) -> Result<TokenKind, LexError> {
    let mut text = String::new();
    while let Some(d) = cur.peek().filter(|d| d.is_ascii_digit()) {
        text.push(d);
        cur.bump();
    }
    let mut is_float = false;
    if cur.peek() == Some('.') && cur.peek2().is_some_and(|d| d.is_ascii_digit()) {
        is_float = true;
        text.push('.');
        cur.bump();
        while let Some(d) = cur.peek().filter(|d| d.is_ascii_digit()) {
            text.push(d);
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let after = cur.peek2();
        if after.is_some_and(|d| d.is_ascii_digit() || d == '-' || d == '+') {
            is_float = true;
            text.push('e');
            cur.bump();
            if let Some(sign) = cur.peek().filter(|s| *s == '-' || *s == '+') {
                text.push(sign);
                cur.bump();
            }
            while let Some(d) = cur.peek().filter(|d| d.is_ascii_digit()) {
                text.push(d);
                cur.bump();
            }
        }
    }
    let bad = || LexError::BadNumber { text: text.clone(), span };
    if is_float {
        text.parse().map(TokenKind::Float).map_err(|_| bad())
    } else {
        text.parse().map(TokenKind::Int).map_err(|_| bad())
    }
}

fn lex_name(cur: &mut Cursor<'_>) -> TokenKind {
    let first = cur.peek().unwrap();
    let mut name = String::new();
    loop {
        while let Some(c) = cur.peek().filter(|c| is_name_char(*c)) {
            name.push(c);
            cur.bump();
        }
        // `count-prices`: a hyphen followed by a letter continues a
        // lower-case name; variables never contain hyphens.
        let hyphen_joins = first.is_ascii_lowercase()
            && cur.peek() == Some('-')
            && cur.peek2().is_some_and(|c| c.is_ascii_alphabetic())
            && !(cur.peek2() == Some('o') && !cur.rest[2..].starts_with(is_name_char));
        if hyphen_joins {
            name.push('-');
            cur.bump();
        } else {
            break;
        }
    }
    match name.as_str() {
        "_" => TokenKind::Wildcard,
        "type" => TokenKind::Type,
        "linear" => TokenKind::Linear,
        "const" => TokenKind::Const,
        "exists" => TokenKind::Exists,
        _ if first.is_ascii_uppercase() || first == '_' => TokenKind::Var(name),
        _ => TokenKind::Ident(name),
    }
}

fn lex_punct(cur: &mut Cursor<'_>, span: Span) -> Result<TokenKind, LexError> {
    use TokenKind::*;
    let c = cur.bump().unwrap();
    let next = cur.peek();
    let two = |cur: &mut Cursor<'_>, k| {
        cur.bump();
        k
    };
    Ok(match (c, next) {
        ('-', Some('o')) if !cur.peek2().is_some_and(is_name_char) => two(cur, Lolli),
        ('=', Some('>')) => two(cur, FatArrow),
        ('<', Some('>')) => two(cur, Neq),
        ('<', Some('=')) => two(cur, Le),
        ('>', Some('=')) => two(cur, Ge),
        ('|', Some('|')) => two(cur, OrOr),
        ('&', Some('&')) => two(cur, AndAnd),
        ('!', Some('=')) => two(cur, Neq),
        ('!', _) => Bang,
        ('(', _) => LParen,
        (')', _) => RParen,
        ('[', _) => LBracket,
        (']', _) => RBracket,
        ('{', _) => LBrace,
        ('}', _) => RBrace,
        (',', _) => Comma,
        ('.', _) => Dot,
        (';', _) => Semi,
        ('|', _) => Bar,
        ('=', _) => Eq,
        ('<', _) => Lt,
        ('>', _) => Gt,
        ('+', _) => Plus,
        ('-', _) => Minus,
        ('*', _) => Star,
        ('/', _) => Slash,
        ('%', _) => Percent,
        (ch, _) => return Err(LexError::IllegalCharacter { ch, span }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn persistent_edge_axiom() {
        assert_eq!(
            kinds("!edge(@1, @2)."),
            vec![
                Bang,
                Ident("edge".into()),
                LParen,
                Node(1),
                Comma,
                Node(2),
                RParen,
                Dot
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(kinds("").is_empty());
    }

    #[test]
    fn comments_are_stripped() {
        assert_eq!(kinds("// comment\n1"), vec![Int(1)]);
    }

    #[test]
    fn hyphenated_names_and_lolli() {
        assert_eq!(
            kinds("count-prices(A) -o x"),
            vec![
                Ident("count-prices".into()),
                LParen,
                Var("A".into()),
                RParen,
                Lolli,
                Ident("x".into())
            ]
        );
        assert_eq!(kinds("T - 1 - C"), vec![Var("T".into()), Minus, Int(1), Minus, Var("C".into())]);
        assert_eq!(kinds("size-1"), vec![Ident("size".into()), Minus, Int(1)]);
    }

    #[test]
    fn numbers_and_terminators() {
        assert_eq!(kinds("1.0 / 0.85"), vec![Float(1.0), Slash, Float(0.85)]);
        assert_eq!(kinds("used = 1."), vec![Ident("used".into()), Eq, Int(1), Dot]);
        assert_eq!(kinds("float(@world)"), vec![Ident("float".into()), LParen, World, RParen]);
    }

    #[test]
    fn operators() {
        assert_eq!(kinds("<> <= >= || => _"), vec![Neq, Le, Ge, OrOr, FatArrow, Wildcard]);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            tokenize("a 'oops").unwrap_err(),
            LexError::UnterminatedString { span: Span { line: 1, col: 3 } }
        );
        assert_eq!(
            tokenize("\n  #").unwrap_err(),
            LexError::IllegalCharacter { ch: '#', span: Span { line: 2, col: 3 } }
        );
    }
}
