use super::{Constant, FormulaError, Op, Rel};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(String),
    Constant(Constant),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Rel(Rel),
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Frac,
    Func(Op),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier {s}"),
            TokenKind::Number(s) => format!("number {s}"),
            other => format!("{:?}", other.symbol()),
        }
    }

    /// Source spelling used by the tokenizer.
    pub fn symbol(&self) -> String {
        match self {
            TokenKind::Ident(s) | TokenKind::Number(s) => s.clone(),
            TokenKind::Constant(Constant::Pi) => "\\pi".into(),
            TokenKind::Constant(Constant::E) => "e".into(),
            TokenKind::Plus => "+".into(),
            TokenKind::Minus => "-".into(),
            TokenKind::Star => "*".into(),
            TokenKind::Slash => "/".into(),
            TokenKind::Caret => "^".into(),
            TokenKind::Rel(r) => r.symbol().into(),
            TokenKind::LParen => "(".into(),
            TokenKind::RParen => ")".into(),
            TokenKind::LBrack => "[".into(),
            TokenKind::RBrack => "]".into(),
            TokenKind::LBrace => "{".into(),
            TokenKind::RBrace => "}".into(),
            TokenKind::Frac => "\\frac".into(),
            TokenKind::Func(op) => op.command().unwrap_or("?").into(),
        }
    }
}

fn command(name: &str) -> Option<TokenKind> {
    Some(match name {
        "frac" => TokenKind::Frac,
        "sqrt" => TokenKind::Func(Op::Sqrt),
        "sin" => TokenKind::Func(Op::Sin),
        "cos" => TokenKind::Func(Op::Cos),
        "tan" => TokenKind::Func(Op::Tan),
        "log" => TokenKind::Func(Op::Log),
        "ln" => TokenKind::Func(Op::Ln),
        "exp" => TokenKind::Func(Op::Exp),
        "pi" => TokenKind::Constant(Constant::Pi),
        "leq" | "le" => TokenKind::Rel(Rel::Leq),
        "geq" | "ge" => TokenKind::Rel(Rel::Geq),
        "neq" | "ne" => TokenKind::Rel(Rel::Neq),
        "cdot" | "times" => TokenKind::Star,
        _ => return None,
    })
}

pub fn lex(src: &str) -> Result<Vec<Token>, FormulaError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(TokenKind::Plus),
            b'-' => Some(TokenKind::Minus),
            b'*' => Some(TokenKind::Star),
            b'/' => Some(TokenKind::Slash),
            b'^' => Some(TokenKind::Caret),
            b'=' => Some(TokenKind::Rel(Rel::Eq)),
            b'<' => Some(TokenKind::Rel(Rel::Lt)),
            b'>' => Some(TokenKind::Rel(Rel::Gt)),
            b'(' => Some(TokenKind::LParen),
            b')' => Some(TokenKind::RParen),
            b'[' => Some(TokenKind::LBrack),
            b']' => Some(TokenKind::RBrack),
            b'{' => Some(TokenKind::LBrace),
            b'}' => Some(TokenKind::RBrace),
            _ => None,
        };
        if let Some(kind) = simple {
            tokens.push(Token {
                kind,
                offset: start,
            });
            i += 1;
            continue;
        }
        if c == b'\\' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                i += 1;
            }
            let name = &src[start + 1..i];
            let kind = command(name).ok_or_else(|| FormulaError::Lexical {
                offset: start,
                found: src[start..i.max(start + 1)].to_string(),
            })?;
            tokens.push(Token {
                kind,
                offset: start,
            });
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    return Err(FormulaError::Lexical {
                        offset: i,
                        found: ".".into(),
                    });
                }
            }
            tokens.push(Token {
                kind: TokenKind::Number(src[start..i].to_string()),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() {
            i += 1;
            if c == b'e' {
                tokens.push(Token {
                    kind: TokenKind::Constant(Constant::E),
                    offset: start,
                });
                continue;
            }
            let mut name = (c as char).to_string();
            if i < bytes.len() && bytes[i] == b'_' {
                i += 1;
                let sub = lex_subscript(src, &mut i)?;
                name.push('_');
                name.push_str(&sub);
            }
            tokens.push(Token {
                kind: TokenKind::Ident(name),
                offset: start,
            });
        } else {
            let ch = src[start..].chars().next().unwrap_or('?');
            return Err(FormulaError::Lexical {
                offset: start,
                found: ch.to_string(),
            });
        }
    }
    Ok(tokens)
}

fn lex_subscript(src: &str, i: &mut usize) -> Result<String, FormulaError> {
    let bytes = src.as_bytes();
    match bytes.get(*i) {
        Some(c) if c.is_ascii_alphanumeric() => {
            *i += 1;
            Ok((*c as char).to_string())
        }
        Some(b'{') => {
            let open = *i;
            *i += 1;
            let body_start = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_alphanumeric() {
                *i += 1;
            }
            match bytes.get(*i) {
                Some(b'}') if *i > body_start => {
                    let body = src[body_start..*i].to_string();
                    *i += 1;
                    Ok(body)
                }
                None => Err(FormulaError::Unbalanced {
                    offset: open,
                    delimiter: '{',
                }),
                _ => Err(FormulaError::Lexical {
                    offset: *i,
                    found: src[*i..].chars().next().map(String::from).unwrap_or_default(),
                }),
            }
        }
        _ => Err(FormulaError::Lexical {
            offset: *i - 1,
            found: "_".into(),
        }),
    }
}

/// Symbol-level tokens for the encoder: lexer tokens, with numbers split
/// into single characters so unseen numbers still map onto known symbols.
pub fn symbol_tokens(src: &str) -> Result<Vec<String>, FormulaError> {
    let mut out = Vec::new();
    for token in lex(src)? {
        match token.kind {
            TokenKind::Number(lit) => out.extend(lit.chars().map(String::from)),
            other => out.push(other.symbol()),
        }
    }
    Ok(out)
}
