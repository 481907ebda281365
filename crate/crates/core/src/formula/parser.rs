use super::lexer::{Token, TokenKind};
use super::{is_function_name, Bracket, FormulaError, Node, Number, Op};

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    src_len: usize,
    open: Vec<(usize, char)>,
}

pub(super) fn parse_tokens(tokens: &[Token], src_len: usize) -> Result<Node, FormulaError> {
    if tokens.is_empty() {
        return Err(FormulaError::Empty);
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        src_len,
        open: Vec::new(),
    };
    let node = p.relation()?;
    match p.peek() {
        None => Ok(node),
        Some(tok) => Err(FormulaError::Unexpected {
            offset: tok.offset,
            found: tok.kind.describe(),
            expected: "end of formula",
        }),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&'a TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let tok = self.tokens.get(self.pos);
        self.pos += 1;
        tok
    }

    fn error_at_current(&self, expected: &'static str) -> FormulaError {
        match self.peek() {
            Some(tok) => FormulaError::Unexpected {
                offset: tok.offset,
                found: tok.kind.describe(),
                expected,
            },
            None => match self.open.last() {
                Some(&(offset, delimiter)) => FormulaError::Unbalanced { offset, delimiter },
                None => FormulaError::Unexpected {
                    offset: self.src_len,
                    found: "end of formula".into(),
                    expected,
                },
            },
        }
    }

    fn relation(&mut self) -> Result<Node, FormulaError> {
        let mut left = self.additive()?;
        while let Some(TokenKind::Rel(rel)) = self.peek_kind() {
            self.bump();
            let right = self.additive()?;
            left = Node::relation(*rel, left, right);
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Node, FormulaError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => Op::Add,
                Some(TokenKind::Minus) => Op::Sub,
                _ => return Ok(left),
            };
            self.bump();
            let right = self.multiplicative()?;
            left = Node::binary(op, left, right);
        }
    }

    fn multiplicative(&mut self) -> Result<Node, FormulaError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => Op::Mul,
                Some(TokenKind::Slash) => Op::Div,
                _ => return Ok(left),
            };
            self.bump();
            let right = self.unary()?;
            left = Node::binary(op, left, right);
        }
    }

    fn unary(&mut self) -> Result<Node, FormulaError> {
        if let Some(TokenKind::Minus) = self.peek_kind() {
            self.bump();
            let arg = self.unary()?;
            return Ok(Node::unary(Op::Neg, arg));
        }
        self.implicit()
    }

    fn implicit(&mut self) -> Result<Node, FormulaError> {
        let mut left = self.postfix()?;
        while self.peek_kind().is_some_and(starts_primary) {
            let right = self.postfix()?;
            left = Node::binary(Op::ImplicitMul, left, right);
        }
        Ok(left)
    }

    fn postfix(&mut self) -> Result<Node, FormulaError> {
        let base = self.primary()?;
        if let Some(TokenKind::Caret) = self.peek_kind() {
            self.bump();
            let exp = self.primary()?;
            return Ok(Node::power(base, exp));
        }
        Ok(base)
    }

    fn enclosed(
        &mut self,
        open: &Token,
        delimiter: char,
        close: TokenKind,
        expected: &'static str,
    ) -> Result<Node, FormulaError> {
        self.open.push((open.offset, delimiter));
        let inner = self.relation()?;
        match self.peek_kind() {
            Some(k) if *k == close => {
                self.bump();
                self.open.pop();
                Ok(inner)
            }
            _ => Err(self.error_at_current(expected)),
        }
    }

    fn primary(&mut self) -> Result<Node, FormulaError> {
        let Some(tok) = self.peek() else {
            return Err(self.error_at_current("operand"));
        };
        match &tok.kind {
            TokenKind::Number(lit) => {
                self.bump();
                let number = Number::new(lit).ok_or_else(|| FormulaError::Lexical {
                    offset: tok.offset,
                    found: lit.clone(),
                })?;
                Ok(Node::Number(number))
            }
            TokenKind::Ident(name) => {
                self.bump();
                let next = self.peek();
                match next {
                    Some(open) if open.kind == TokenKind::LParen && is_function_name(name) => {
                        self.bump();
                        let arg = self.enclosed(open, '(', TokenKind::RParen, "')'")?;
                        Ok(Node::FunctionApp {
                            head: Box::new(Node::Variable(name.clone())),
                            arg: Box::new(arg),
                        })
                    }
                    _ => Ok(Node::Variable(name.clone())),
                }
            }
            TokenKind::Constant(c) => {
                self.bump();
                Ok(Node::Constant(*c))
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.enclosed(tok, '(', TokenKind::RParen, "')'")?;
                Ok(Node::Group {
                    bracket: Bracket::Paren,
                    inner: Box::new(inner),
                })
            }
            TokenKind::LBrack => {
                self.bump();
                let inner = self.enclosed(tok, '[', TokenKind::RBrack, "']'")?;
                Ok(Node::Group {
                    bracket: Bracket::Square,
                    inner: Box::new(inner),
                })
            }
            TokenKind::LBrace => {
                self.bump();
                self.enclosed(tok, '{', TokenKind::RBrace, "'}'")
            }
            TokenKind::Frac => {
                self.bump();
                let num = self.primary()?;
                let den = self.primary()?;
                Ok(Node::fraction(num, den))
            }
            TokenKind::Func(op) => {
                self.bump();
                let arg = self.primary()?;
                Ok(Node::unary(*op, arg))
            }
            _ => Err(self.error_at_current("operand")),
        }
    }
}

fn starts_primary(kind: &TokenKind) -> bool {
    matches!(
        kind,
        TokenKind::Number(_)
            | TokenKind::Ident(_)
            | TokenKind::Constant(_)
            | TokenKind::LParen
            | TokenKind::LBrack
            | TokenKind::LBrace
            | TokenKind::Frac
            | TokenKind::Func(_)
    )
}
