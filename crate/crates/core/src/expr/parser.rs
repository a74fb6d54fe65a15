use super::{BinOp, Expression, Func, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse { offset, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| err(start, format!("malformed number '{text}'")))?;
                if !value.is_finite() {
                    return Err(err(start, format!("number '{text}' is out of range")));
                }
                out.push(Token { tok: Tok::Num(value), offset: start });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Name(src[start..i].to_string()), offset: start });
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                i += 1;
                out.push(Token { tok: Tok::Op(c as char), offset: start });
            }
            b'(' => {
                i += 1;
                out.push(Token { tok: Tok::LParen, offset: start });
            }
            b')' => {
                i += 1;
                out.push(Token { tok: Tok::RParen, offset: start });
            }
            b',' => {
                i += 1;
                out.push(Token { tok: Tok::Comma, offset: start });
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(err(start, format!("unexpected character '{ch}'")));
            }
        }
    }
    out.push(Token { tok: Tok::End, offset: src.len() });
    Ok(out)
}

// Nesting limit keeps adversarial input from overflowing the stack.
const MAX_DEPTH: usize = 256;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Num(n) => format!("number {n}"),
            Tok::Name(s) => format!("'{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        let t = self.peek();
        if t.tok == want {
            self.bump();
            Ok(())
        } else {
            Err(err(
                t.offset,
                format!("expected {}, found {}", Self::describe(&want), Self::describe(&t.tok)),
            ))
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(err(self.peek().offset, "expression nested too deeply"))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Expression> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expression> {
        self.enter()?;
        let base = self.unary()?;
        let out = if self.peek().tok == Tok::Op('^') {
            self.bump();
            let exp = self.factor()?;
            Expression::Binary(BinOp::Pow, Box::new(base), Box::new(exp))
        } else {
            base
        };
        self.depth -= 1;
        Ok(out)
    }

    fn unary(&mut self) -> Result<Expression> {
        if self.peek().tok == Tok::Op('-') {
            self.enter()?;
            self.bump();
            let inner = self.unary()?;
            self.depth -= 1;
            Ok(Expression::Neg(Box::new(inner)))
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<Expression> {
        let t = self.bump();
        match t.tok {
            Tok::Num(n) => Ok(Expression::Num(n)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Name(name) => {
                if self.peek().tok == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| err(t.offset, format!("unknown function '{name}'")))?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while self.peek().tok == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    if args.len() != func.arity() {
                        return Err(err(
                            t.offset,
                            format!(
                                "'{name}' takes {} argument(s), got {}",
                                func.arity(),
                                args.len()
                            ),
                        ));
                    }
                    Ok(Expression::Call(func, args))
                } else if name == "pi" {
                    Ok(Expression::Pi)
                } else if let Some(v) = Var::from_name(&name) {
                    Ok(Expression::Var(v))
                } else {
                    Err(err(t.offset, format!("unknown identifier '{name}'")))
                }
            }
            other => Err(err(t.offset, format!("unexpected {}", Self::describe(&other)))),
        }
    }
}

/// Parses `text` into an [`Expression`].
pub fn parse(text: &str) -> Result<Expression> {
    let tokens = lex(text)?;
    if tokens.len() == 1 {
        return Err(err(0, "empty expression"));
    }
    let mut p = Parser { tokens, pos: 0, depth: 0 };
    let e = p.expr()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(err(t.offset, format!("trailing {}", Parser::describe(&t.tok))));
    }
    Ok(e)
}
