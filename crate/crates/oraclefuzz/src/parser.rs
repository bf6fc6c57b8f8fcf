//! Lexer, parser and static checks for MiniSol source text.
//!
//! The grammar is small enough for hand-rolled recursive descent. Every
//! error carries the 1-based line and column of the offending token.

use num_bigint::BigUint;
use num_traits::Num;

use crate::ast::*;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("line {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

type PResult<T> = Result<T, ParseError>;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(BigUint),
    KwContract,
    KwFunction,
    KwPayable,
    KwMapping,
    KwAddress,
    KwUint,
    KwBool,
    KwRequire,
    KwIf,
    KwElse,
    KwThrow,
    KwReturn,
    KwTrue,
    KwFalse,
    KwMsg,
    KwThis,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
    Arrow, // =>
    Assign,
    PlusAssign,
    MinusAssign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    AndAnd,
    OrOr,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Eof => "end of input".to_string(),
            other => format!("'{}'", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::KwContract => "contract",
            Tok::KwFunction => "function",
            Tok::KwPayable => "payable",
            Tok::KwMapping => "mapping",
            Tok::KwAddress => "address",
            Tok::KwUint => "uint",
            Tok::KwBool => "bool",
            Tok::KwRequire => "require",
            Tok::KwIf => "if",
            Tok::KwElse => "else",
            Tok::KwThrow => "throw",
            Tok::KwReturn => "return",
            Tok::KwTrue => "true",
            Tok::KwFalse => "false",
            Tok::KwMsg => "msg",
            Tok::KwThis => "this",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Arrow => "=>",
            Tok::Assign => "=",
            Tok::PlusAssign => "+=",
            Tok::MinusAssign => "-=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Ident(_) | Tok::Number(_) | Tok::Eof => unreachable!(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(src: &str) -> PResult<Vec<Spanned>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! err {
        ($($arg:tt)*) => {
            return Err(ParseError { line, col, msg: format!($($arg)*) })
        };
    }

    while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start_line = line;
        let start_col = col;
        let mut push = |tok: Tok| {
            out.push(Spanned { tok, line: start_line, col: start_col });
        };
        if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
                col += 1;
            }
            let word = &src[s..i];
            let tok = match word {
                "contract" => Tok::KwContract,
                "function" => Tok::KwFunction,
                "payable" => Tok::KwPayable,
                "mapping" => Tok::KwMapping,
                "address" => Tok::KwAddress,
                "uint" => Tok::KwUint,
                "bool" => Tok::KwBool,
                "require" => Tok::KwRequire,
                "if" => Tok::KwIf,
                "else" => Tok::KwElse,
                "throw" => Tok::KwThrow,
                "return" => Tok::KwReturn,
                "true" => Tok::KwTrue,
                "false" => Tok::KwFalse,
                "msg" => Tok::KwMsg,
                "this" => Tok::KwThis,
                _ => Tok::Ident(word.to_string()),
            };
            push(tok);
            continue;
        }
        if c.is_ascii_digit() {
            let s = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
                col += 1;
            }
            if i < bytes.len() && ((bytes[i] as char).is_ascii_alphabetic() || bytes[i] == b'_') {
                err!("malformed number");
            }
            let n = BigUint::from_str_radix(&src[s..i], 10).expect("digits");
            push(Tok::Number(n));
            continue;
        }
        let two = if i + 1 < bytes.len() { &src[i..i + 2] } else { "" };
        let (tok, len) = match two {
            "=>" => (Tok::Arrow, 2),
            "+=" => (Tok::PlusAssign, 2),
            "-=" => (Tok::MinusAssign, 2),
            "==" => (Tok::EqEq, 2),
            "!=" => (Tok::NotEq, 2),
            "<=" => (Tok::Le, 2),
            ">=" => (Tok::Ge, 2),
            "&&" => (Tok::AndAnd, 2),
            "||" => (Tok::OrOr, 2),
            _ => match c {
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                ';' => (Tok::Semi, 1),
                ',' => (Tok::Comma, 1),
                '.' => (Tok::Dot, 1),
                '=' => (Tok::Assign, 1),
                '<' => (Tok::Lt, 1),
                '>' => (Tok::Gt, 1),
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                '*' => (Tok::Star, 1),
                _ => err!("unexpected character '{c}'"),
            },
        };
        push(tok);
        i += len;
        col += len as u32;
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Postfix forms that are statements, not expressions.
enum CallStmt {
    Send { to: Expr, amount: Expr },
    Transfer { to: Expr, amount: Expr },
    CallValue { to: Expr, amount: Expr },
    Named { to: Expr, function: String, value: Option<Expr>, args: Vec<Expr> },
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn err_here<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(ParseError { line, col, msg: msg.into() })
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, want: Tok) -> PResult<()> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            self.err_here(format!(
                "expected '{}', found {}",
                want.text(),
                self.peek().describe()
            ))
        }
    }

    fn eat_ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            other => self.err_here(format!("expected {what}, found {}", other.describe())),
        }
    }

    fn parse_contract(&mut self) -> PResult<RawContract> {
        self.eat(Tok::KwContract)?;
        let name = self.eat_ident("contract name")?;
        self.eat(Tok::LBrace)?;
        let mut state_vars = Vec::new();
        let mut functions = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.advance();
                    break;
                }
                Tok::KwFunction => functions.push(self.parse_function()?),
                Tok::KwUint | Tok::KwBool | Tok::KwAddress | Tok::KwMapping => {
                    state_vars.push(self.parse_state_var()?)
                }
                other => {
                    let d = other.describe();
                    return self.err_here(format!(
                        "expected state variable or function, found {d}"
                    ));
                }
            }
        }
        if *self.peek() != Tok::Eof {
            return self.err_here("trailing input after contract body");
        }
        Ok(RawContract { name, state_vars, functions })
    }

    fn parse_state_var(&mut self) -> PResult<RawStateVar> {
        let (line, col) = self.here();
        let ty = match self.advance() {
            Tok::KwUint => VarType::Uint,
            Tok::KwBool => VarType::Bool,
            Tok::KwAddress => VarType::Address,
            Tok::KwMapping => {
                self.eat(Tok::LParen)?;
                self.eat(Tok::KwAddress)?;
                self.eat(Tok::Arrow)?;
                self.eat(Tok::KwUint)?;
                self.eat(Tok::RParen)?;
                VarType::Mapping
            }
            _ => unreachable!("caller checked the type keyword"),
        };
        let name = self.eat_ident("variable name")?;
        let init = if *self.peek() == Tok::Assign {
            self.advance();
            Some(self.parse_literal()?)
        } else {
            None
        };
        self.eat(Tok::Semi)?;
        Ok(RawStateVar { ty, name, init, line, col })
    }

    fn parse_literal(&mut self) -> PResult<Literal> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.advance();
                Ok(Literal::Number(n))
            }
            Tok::KwTrue => {
                self.advance();
                Ok(Literal::Bool(true))
            }
            Tok::KwFalse => {
                self.advance();
                Ok(Literal::Bool(false))
            }
            Tok::KwAddress => {
                self.advance();
                self.eat(Tok::LParen)?;
                let n = self.parse_address_index()?;
                self.eat(Tok::RParen)?;
                Ok(Literal::Address(n))
            }
            other => self.err_here(format!("expected literal, found {}", other.describe())),
        }
    }

    fn parse_address_index(&mut self) -> PResult<u32> {
        match self.peek().clone() {
            Tok::Number(n) => {
                let v: u32 = n
                    .try_into()
                    .map_err(|_| {
                        let (line, col) = self.here();
                        ParseError { line, col, msg: "address index too large".into() }
                    })?;
                self.advance();
                Ok(v)
            }
            other => {
                self.err_here(format!("expected address index, found {}", other.describe()))
            }
        }
    }

    fn parse_function(&mut self) -> PResult<RawFunction> {
        let (line, col) = self.here();
        self.eat(Tok::KwFunction)?;
        let name = match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Some(s)
            }
            Tok::LParen => None, // fallback: function() ...
            other => {
                return self.err_here(format!(
                    "expected function name or '(', found {}",
                    other.describe()
                ))
            }
        };
        self.eat(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let ty = match self.advance() {
                    Tok::KwUint => ParamType::Uint,
                    Tok::KwBool => ParamType::Bool,
                    Tok::KwAddress => ParamType::Address,
                    other => {
                        return self.err_here(format!(
                            "expected parameter type, found {}",
                            other.describe()
                        ))
                    }
                };
                let pname = self.eat_ident("parameter name")?;
                params.push(Param { name: pname, ty });
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.eat(Tok::RParen)?;
        let payable = if *self.peek() == Tok::KwPayable {
            self.advance();
            true
        } else {
            false
        };
        let body = self.parse_block()?;
        Ok(RawFunction { name, params, payable, body, line, col })
    }

    fn parse_block(&mut self) -> PResult<Vec<TreeStmt>> {
        self.eat(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.err_here("unexpected end of input inside block");
            }
            stmts.push(self.parse_stmt()?);
        }
        self.advance();
        Ok(stmts)
    }

    fn parse_stmt(&mut self) -> PResult<TreeStmt> {
        match self.peek().clone() {
            Tok::KwRequire => {
                self.advance();
                self.eat(Tok::LParen)?;
                let cond = self.parse_expr()?;
                self.eat(Tok::RParen)?;
                self.eat(Tok::Semi)?;
                Ok(TreeStmt::Require(cond))
            }
            Tok::KwThrow => {
                self.advance();
                self.eat(Tok::Semi)?;
                Ok(TreeStmt::Throw)
            }
            Tok::KwReturn => {
                self.advance();
                let e = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.eat(Tok::Semi)?;
                Ok(TreeStmt::Return(e))
            }
            Tok::KwIf => {
                self.advance();
                self.eat(Tok::LParen)?;
                let cond = self.parse_expr()?;
                self.eat(Tok::RParen)?;
                let then_body = self.parse_block()?;
                let else_body = if *self.peek() == Tok::KwElse {
                    self.advance();
                    self.parse_block()?
                } else {
                    Vec::new()
                };
                Ok(TreeStmt::If { cond, then_body, else_body })
            }
            _ => self.parse_assign_or_call(),
        }
    }

    fn parse_assign_or_call(&mut self) -> PResult<TreeStmt> {
        // Either `lvalue (=|+=|-=) expr ;` or a call-shaped statement.
        let (head, call) = self.parse_postfix(true)?;
        if let Some(call) = call {
            self.eat(Tok::Semi)?;
            let simple = match call {
                CallStmt::Send { to, amount } => SimpleStmt::Send { to, amount },
                CallStmt::Transfer { to, amount } => SimpleStmt::Transfer { to, amount },
                CallStmt::CallValue { to, amount } => SimpleStmt::CallValue { to, amount },
                CallStmt::Named { to, function, value, args } => {
                    SimpleStmt::ExternalCall { to, function, value, args }
                }
            };
            return Ok(TreeStmt::Simple(simple));
        }
        let op = match self.peek() {
            Tok::Assign => AssignOp::Set,
            Tok::PlusAssign => AssignOp::AddAssign,
            Tok::MinusAssign => AssignOp::SubAssign,
            _ => {
                return self.err_here(
                    "expected assignment operator or call statement".to_string(),
                )
            }
        };
        let lv = match head {
            Expr::Ident(n) => LValue::Scalar(n),
            Expr::Index(n, k) => LValue::MapEntry(n, *k),
            _ => return self.err_here("left side of assignment is not assignable"),
        };
        self.advance();
        let rhs = self.parse_expr()?;
        self.eat(Tok::Semi)?;
        Ok(TreeStmt::Simple(SimpleStmt::Assign { lv, op, rhs }))
    }

    fn parse_expr(&mut self) -> PResult<Expr> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_and()?;
        while *self.peek() == Tok::OrOr {
            self.advance();
            let rhs = self.parse_and()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_cmp()?;
        while *self.peek() == Tok::AndAnd {
            self.advance();
            let rhs = self.parse_cmp()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_cmp(&mut self) -> PResult<Expr> {
        let lhs = self.parse_add()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.parse_add()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn parse_add(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_mul()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_mul(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_postfix_expr()?;
        while *self.peek() == Tok::Star {
            self.advance();
            let rhs = self.parse_postfix_expr()?;
            lhs = Expr::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_postfix_expr(&mut self) -> PResult<Expr> {
        let (e, call) = self.parse_postfix(false)?;
        debug_assert!(call.is_none());
        Ok(e)
    }

    /// Parses a primary plus postfix member operations. With `allow_stmt_calls`
    /// the statement-only forms (transfer, named external calls) are returned
    /// separately; otherwise they are an error.
    fn parse_postfix(&mut self, allow_stmt_calls: bool) -> PResult<(Expr, Option<CallStmt>)> {
        let mut e = self.parse_primary()?;
        while *self.peek() == Tok::Dot {
            self.advance();
            let member = self.eat_ident("member name")?;
            match member.as_str() {
                "send" => {
                    self.eat(Tok::LParen)?;
                    let amount = self.parse_expr()?;
                    self.eat(Tok::RParen)?;
                    if allow_stmt_calls && *self.peek() == Tok::Semi {
                        return Ok((
                            Expr::Bool(false),
                            Some(CallStmt::Send { to: e, amount }),
                        ));
                    }
                    e = Expr::Send { to: Box::new(e), amount: Box::new(amount) };
                }
                "transfer" => {
                    self.eat(Tok::LParen)?;
                    let amount = self.parse_expr()?;
                    self.eat(Tok::RParen)?;
                    if !allow_stmt_calls {
                        return self.err_here("transfer is a statement, not an expression");
                    }
                    return Ok((Expr::Bool(false), Some(CallStmt::Transfer { to: e, amount })));
                }
                "call" => {
                    self.eat(Tok::Dot)?;
                    let v = self.eat_ident("member name")?;
                    if v != "value" {
                        return self.err_here(format!("expected 'value' after 'call.', found '{v}'"));
                    }
                    self.eat(Tok::LParen)?;
                    let amount = self.parse_expr()?;
                    self.eat(Tok::RParen)?;
                    self.eat(Tok::LParen)?;
                    self.eat(Tok::RParen)?;
                    if allow_stmt_calls && *self.peek() == Tok::Semi {
                        return Ok((
                            Expr::Bool(false),
                            Some(CallStmt::CallValue { to: e, amount }),
                        ));
                    }
                    e = Expr::CallValue { to: Box::new(e), amount: Box::new(amount) };
                }
                f => {
                    // Named external call, optionally with .value(v).
                    if !allow_stmt_calls {
                        return self
                            .err_here(format!("call to '{f}' is a statement, not an expression"));
                    }
                    let value = if *self.peek() == Tok::Dot {
                        self.advance();
                        let v = self.eat_ident("member name")?;
                        if v != "value" {
                            return self.err_here(format!(
                                "expected 'value' after '{f}.', found '{v}'"
                            ));
                        }
                        self.eat(Tok::LParen)?;
                        let amount = self.parse_expr()?;
                        self.eat(Tok::RParen)?;
                        Some(amount)
                    } else {
                        None
                    };
                    self.eat(Tok::LParen)?;
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.parse_expr()?);
                            if *self.peek() == Tok::Comma {
                                self.advance();
                            } else {
                                break;
                            }
                        }
                    }
                    self.eat(Tok::RParen)?;
                    return Ok((
                        Expr::Bool(false),
                        Some(CallStmt::Named { to: e, function: f.to_string(), value, args }),
                    ));
                }
            }
        }
        Ok((e, None))
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.advance();
                Ok(Expr::Number(n))
            }
            Tok::KwTrue => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Tok::KwFalse => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Tok::KwAddress => {
                self.advance();
                self.eat(Tok::LParen)?;
                let n = self.parse_address_index()?;
                self.eat(Tok::RParen)?;
                Ok(Expr::AddressLit(n))
            }
            Tok::KwMsg => {
                self.advance();
                self.eat(Tok::Dot)?;
                let m = self.eat_ident("member name")?;
                match m.as_str() {
                    "sender" => Ok(Expr::MsgSender),
                    "value" => Ok(Expr::MsgValue),
                    other => self.err_here(format!("unknown msg member '{other}'")),
                }
            }
            Tok::KwThis => {
                self.advance();
                self.eat(Tok::Dot)?;
                let m = self.eat_ident("member name")?;
                match m.as_str() {
                    "balance" => Ok(Expr::ThisBalance),
                    other => self.err_here(format!("unknown this member '{other}'")),
                }
            }
            Tok::LParen => {
                self.advance();
                let e = self.parse_expr()?;
                self.eat(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LBracket {
                    self.advance();
                    let key = self.parse_expr()?;
                    self.eat(Tok::RBracket)?;
                    Ok(Expr::Index(name, Box::new(key)))
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            other => self.err_here(format!("expected expression, found {}", other.describe())),
        }
    }
}

struct RawContract {
    name: String,
    state_vars: Vec<RawStateVar>,
    functions: Vec<RawFunction>,
}

struct RawStateVar {
    ty: VarType,
    name: String,
    init: Option<Literal>,
    line: u32,
    col: u32,
}

struct RawFunction {
    name: Option<String>,
    params: Vec<Param>,
    payable: bool,
    body: Vec<TreeStmt>,
    line: u32,
    col: u32,
}

/// Parses and checks one contract. All static errors surface here.
pub fn parse_contract(src: &str) -> Result<ContractProgram, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let raw = p.parse_contract()?;
    check_contract(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Uint,
    Bool,
    Address,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Uint => "uint",
            Ty::Bool => "bool",
            Ty::Address => "address",
        }
    }
}

fn param_ty(t: ParamType) -> Ty {
    match t {
        ParamType::Uint => Ty::Uint,
        ParamType::Bool => Ty::Bool,
        ParamType::Address => Ty::Address,
    }
}

struct Checker<'a> {
    vars: &'a [RawStateVar],
    params: &'a [Param],
    payable: bool,
    fn_name: String,
    line: u32,
    col: u32,
    named_callees: Vec<String>,
}

impl<'a> Checker<'a> {
    fn fail<T>(&self, msg: String) -> PResult<T> {
        Err(ParseError { line: self.line, col: self.col, msg })
    }

    fn var(&self, name: &str) -> Option<&RawStateVar> {
        self.vars.iter().find(|v| v.name == name)
    }

    fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    fn type_of(&self, e: &Expr) -> PResult<Ty> {
        match e {
            Expr::Number(_) => Ok(Ty::Uint),
            Expr::Bool(_) => Ok(Ty::Bool),
            Expr::AddressLit(_) => Ok(Ty::Address),
            Expr::MsgSender => Ok(Ty::Address),
            Expr::MsgValue => {
                if self.payable {
                    Ok(Ty::Uint)
                } else {
                    self.fail(format!(
                        "msg.value used in non-payable function '{}'",
                        self.fn_name
                    ))
                }
            }
            Expr::ThisBalance => Ok(Ty::Uint),
            Expr::Ident(name) => {
                if let Some(p) = self.param(name) {
                    return Ok(param_ty(p.ty));
                }
                match self.var(name) {
                    Some(v) if v.ty == VarType::Mapping => {
                        self.fail(format!("mapping '{name}' used without an index"))
                    }
                    Some(v) => Ok(match v.ty {
                        VarType::Uint => Ty::Uint,
                        VarType::Bool => Ty::Bool,
                        VarType::Address => Ty::Address,
                        VarType::Mapping => unreachable!(),
                    }),
                    None => self.fail(format!("unknown identifier '{name}'")),
                }
            }
            Expr::Index(name, key) => {
                if self.param(name).is_some() {
                    return self.fail(format!("parameter '{name}' is not a mapping"));
                }
                match self.var(name) {
                    Some(v) if v.ty == VarType::Mapping => {
                        self.expect(key, Ty::Address, "mapping key")?;
                        Ok(Ty::Uint)
                    }
                    Some(_) => self.fail(format!("'{name}' is not a mapping")),
                    None => self.fail(format!("unknown identifier '{name}'")),
                }
            }
            Expr::Binary(op, a, b) => {
                use BinOp::*;
                match op {
                    Add | Sub | Mul => {
                        self.expect(a, Ty::Uint, "arithmetic operand")?;
                        self.expect(b, Ty::Uint, "arithmetic operand")?;
                        Ok(Ty::Uint)
                    }
                    Lt | Le | Gt | Ge => {
                        self.expect(a, Ty::Uint, "comparison operand")?;
                        self.expect(b, Ty::Uint, "comparison operand")?;
                        Ok(Ty::Bool)
                    }
                    Eq | Ne => {
                        let ta = self.type_of(a)?;
                        let tb = self.type_of(b)?;
                        if ta != tb {
                            return self.fail(format!(
                                "cannot compare {} with {}",
                                ta.name(),
                                tb.name()
                            ));
                        }
                        Ok(Ty::Bool)
                    }
                    And | Or => {
                        self.expect(a, Ty::Bool, "logical operand")?;
                        self.expect(b, Ty::Bool, "logical operand")?;
                        Ok(Ty::Bool)
                    }
                }
            }
            Expr::Send { to, amount } | Expr::CallValue { to, amount } => {
                self.expect(to, Ty::Address, "transfer target")?;
                self.expect(amount, Ty::Uint, "transfer amount")?;
                Ok(Ty::Bool)
            }
        }
    }

    fn expect(&self, e: &Expr, want: Ty, what: &str) -> PResult<()> {
        let got = self.type_of(e)?;
        if got != want {
            return self.fail(format!("{what} must be {}, found {}", want.name(), got.name()));
        }
        Ok(())
    }

    fn check_body(&mut self, body: &[TreeStmt]) -> PResult<()> {
        for s in body {
            self.check_stmt(s)?;
        }
        Ok(())
    }

    fn check_stmt(&mut self, s: &TreeStmt) -> PResult<()> {
        match s {
            TreeStmt::Simple(simple) => self.check_simple(simple),
            TreeStmt::Require(cond) => self.expect(cond, Ty::Bool, "require condition"),
            TreeStmt::Throw => Ok(()),
            TreeStmt::Return(Some(e)) => self.type_of(e).map(|_| ()),
            TreeStmt::Return(None) => Ok(()),
            TreeStmt::If { cond, then_body, else_body } => {
                self.expect(cond, Ty::Bool, "if condition")?;
                self.check_body(then_body)?;
                self.check_body(else_body)
            }
        }
    }

    fn check_simple(&mut self, s: &SimpleStmt) -> PResult<()> {
        match s {
            SimpleStmt::Assign { lv, op, rhs } => {
                let lv_ty = match lv {
                    LValue::Scalar(name) => {
                        if self.param(name).is_some() {
                            return self.fail(format!("cannot assign to parameter '{name}'"));
                        }
                        match self.var(name) {
                            Some(v) if v.ty == VarType::Mapping => {
                                return self
                                    .fail(format!("mapping '{name}' used without an index"))
                            }
                            Some(v) => match v.ty {
                                VarType::Uint => Ty::Uint,
                                VarType::Bool => Ty::Bool,
                                VarType::Address => Ty::Address,
                                VarType::Mapping => unreachable!(),
                            },
                            None => return self.fail(format!("unknown identifier '{name}'")),
                        }
                    }
                    LValue::MapEntry(name, key) => {
                        match self.var(name) {
                            Some(v) if v.ty == VarType::Mapping => {}
                            Some(_) => return self.fail(format!("'{name}' is not a mapping")),
                            None => return self.fail(format!("unknown identifier '{name}'")),
                        }
                        self.expect(key, Ty::Address, "mapping key")?;
                        Ty::Uint
                    }
                };
                if *op != AssignOp::Set && lv_ty != Ty::Uint {
                    return self.fail("compound assignment requires a uint target".into());
                }
                self.expect(rhs, lv_ty, "assigned value")
            }
            SimpleStmt::Send { to, amount }
            | SimpleStmt::Transfer { to, amount }
            | SimpleStmt::CallValue { to, amount } => {
                self.expect(to, Ty::Address, "transfer target")?;
                self.expect(amount, Ty::Uint, "transfer amount")
            }
            SimpleStmt::ExternalCall { to, function, value, args } => {
                self.expect(to, Ty::Address, "call target")?;
                if let Some(v) = value {
                    self.expect(v, Ty::Uint, "call value")?;
                }
                for a in args {
                    self.type_of(a)?;
                }
                if !self.named_callees.contains(function) {
                    self.named_callees.push(function.clone());
                }
                Ok(())
            }
        }
    }
}

fn check_contract(raw: RawContract) -> Result<ContractProgram, ParseError> {
    for (i, v) in raw.state_vars.iter().enumerate() {
        if raw.state_vars[..i].iter().any(|u| u.name == v.name) {
            return Err(ParseError {
                line: v.line,
                col: v.col,
                msg: format!("duplicate state variable '{}'", v.name),
            });
        }
        match (&v.init, v.ty) {
            (None, _) => {}
            (Some(Literal::Number(_)), VarType::Uint) => {}
            (Some(Literal::Bool(_)), VarType::Bool) => {}
            (Some(Literal::Address(_)), VarType::Address) => {}
            (Some(_), VarType::Mapping) => {
                return Err(ParseError {
                    line: v.line,
                    col: v.col,
                    msg: format!("mapping '{}' cannot have an initializer", v.name),
                })
            }
            (Some(_), _) => {
                return Err(ParseError {
                    line: v.line,
                    col: v.col,
                    msg: format!("initializer type mismatch for '{}'", v.name),
                })
            }
        }
    }

    let mut functions = Vec::new();
    let mut fallback = None;
    for (i, f) in raw.functions.iter().enumerate() {
        match &f.name {
            Some(n) => {
                if n == FALLBACK_NAME {
                    return Err(ParseError {
                        line: f.line,
                        col: f.col,
                        msg: format!("'{n}' is a reserved function name"),
                    });
                }
                if raw.functions[..i]
                    .iter()
                    .any(|g| g.name.as_deref() == Some(n.as_str()))
                {
                    return Err(ParseError {
                        line: f.line,
                        col: f.col,
                        msg: format!("duplicate function '{n}'"),
                    });
                }
            }
            None => {
                if fallback.is_some() {
                    return Err(ParseError {
                        line: f.line,
                        col: f.col,
                        msg: "duplicate fallback function".into(),
                    });
                }
                if !f.params.is_empty() {
                    return Err(ParseError {
                        line: f.line,
                        col: f.col,
                        msg: "fallback function takes no parameters".into(),
                    });
                }
                fallback = Some(i);
            }
        }
        for (j, p) in f.params.iter().enumerate() {
            if f.params[..j].iter().any(|q| q.name == p.name) {
                return Err(ParseError {
                    line: f.line,
                    col: f.col,
                    msg: format!("duplicate parameter '{}'", p.name),
                });
            }
        }
    }

    for f in &raw.functions {
        let is_fallback = f.name.is_none();
        let mut checker = Checker {
            vars: &raw.state_vars,
            params: &f.params,
            // The fallback can always receive value, so msg.value is legal
            // in its body whether or not it is marked payable.
            payable: f.payable || is_fallback,
            fn_name: f
                .name
                .clone()
                .unwrap_or_else(|| FALLBACK_NAME.to_string()),
            line: f.line,
            col: f.col,
            named_callees: Vec::new(),
        };
        checker.check_body(&f.body)?;
        let named_callees = checker.named_callees;
        let def = FunctionDef {
            name: f.name.clone().unwrap_or_else(|| FALLBACK_NAME.to_string()),
            params: f.params.clone(),
            payable: f.payable || is_fallback,
            cfg: lower_body(&f.body),
            named_callees,
        };
        functions.push(def);
    }

    let fallback_def = fallback.map(|i| functions[i].clone());
    let named: Vec<FunctionDef> = functions
        .into_iter()
        .filter(|f| f.name != FALLBACK_NAME)
        .collect();
    Ok(ContractProgram {
        name: raw.name,
        state_vars: raw
            .state_vars
            .into_iter()
            .map(|v| StateVar { name: v.name, ty: v.ty, init: v.init })
            .collect(),
        functions: named,
        fallback: fallback_def,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAO: &str = "\
contract SimpleDAO {
    mapping(address => uint) balances;

    function deposit() payable {
        balances[msg.sender] += msg.value;
    }

    function withdraw(uint amount) {
        require(balances[msg.sender] >= amount);
        msg.sender.call.value(amount)();
        balances[msg.sender] -= amount;
    }
}
";

    #[test]
    fn parses_basic_contract() {
        let c = parse_contract(DAO).unwrap();
        assert_eq!(c.name, "SimpleDAO");
        assert_eq!(c.state_vars.len(), 1);
        assert_eq!(c.functions.len(), 2);
        assert!(c.fallback.is_none());
        let dep = c.function("deposit").unwrap();
        assert!(dep.payable);
        assert_eq!(dep.cfg.charged_statement_count(), 1);
        let wd = c.function("withdraw").unwrap();
        assert!(!wd.payable);
        assert_eq!(wd.cfg.charged_statement_count(), 3);
    }

    #[test]
    fn fallback_is_implicitly_payable() {
        let src = "\
contract C {
    mapping(address => uint) m;
    function() {
        m[msg.sender] += msg.value;
    }
}
";
        let c = parse_contract(src).unwrap();
        let fb = c.fallback.as_ref().unwrap();
        assert_eq!(fb.name, FALLBACK_NAME);
        assert!(fb.payable);
        assert!(c.function(FALLBACK_NAME).is_some());
    }

    #[test]
    fn rejects_msg_value_outside_payable() {
        let src = "\
contract C {
    uint x;
    function f() {
        x = msg.value;
    }
}
";
        let err = parse_contract(src).unwrap_err();
        assert!(err.msg.contains("msg.value"), "{err}");
        assert!(err.msg.contains("non-payable"), "{err}");
        assert_eq!(err.line, 3);
    }

    #[test]
    fn rejects_duplicate_function() {
        let src = "contract C { function f() { throw; } function f() { throw; } }";
        let err = parse_contract(src).unwrap_err();
        assert!(err.msg.contains("duplicate function 'f'"), "{err}");
    }

    #[test]
    fn rejects_unknown_identifier_with_position() {
        let src = "contract C {\n    function f() {\n        y = 3;\n    }\n}";
        let err = parse_contract(src).unwrap_err();
        assert!(err.msg.contains("unknown identifier 'y'"), "{err}");
        assert_eq!(err.line, 2);
    }

    #[test]
    fn rejects_mapping_without_index() {
        let src = "\
contract C {
    mapping(address => uint) m;
    function f(uint v) {
        m = v;
    }
}
";
        let err = parse_contract(src).unwrap_err();
        assert!(err.msg.contains("without an index"), "{err}");
    }

    #[test]
    fn rejects_type_mismatch() {
        let src = "contract C { uint x; function f() { x = true; } }";
        let err = parse_contract(src).unwrap_err();
        assert!(err.msg.contains("assigned value must be uint"), "{err}");
    }

    #[test]
    fn parses_initializers_and_address_literals() {
        let src = "\
contract C {
    uint minDeposit = 10;
    address owner = address(0);
    bool locked = false;
    function take() {
        owner = msg.sender;
    }
}
";
        let c = parse_contract(src).unwrap();
        assert_eq!(
            c.state_var("minDeposit").unwrap().init,
            Some(Literal::Number(10u32.into()))
        );
        assert_eq!(c.state_var("owner").unwrap().init, Some(Literal::Address(0)));
        assert_eq!(c.state_var("locked").unwrap().init, Some(Literal::Bool(false)));
    }

    #[test]
    fn parses_statement_calls_and_expression_sends() {
        let src = "\
contract C {
    mapping(address => uint) balances;
    address owner;
    function a(uint amount) {
        msg.sender.transfer(amount);
        owner.send(amount);
        msg.sender.call.value(amount)();
    }
    function b(uint amount) {
        require(msg.sender.call.value(amount)());
        if (msg.sender.send(amount) == false) {
            throw;
        }
    }
}
";
        let c = parse_contract(src).unwrap();
        assert_eq!(c.function("a").unwrap().cfg.charged_statement_count(), 3);
        // require + if + throw
        assert_eq!(c.function("b").unwrap().cfg.charged_statement_count(), 3);
    }

    #[test]
    fn parses_named_external_call() {
        let src = "\
contract Proxy {
    address target;
    function hit(uint amount) payable {
        target.withdraw.value(msg.value)(amount);
        target.ping();
    }
}
";
        let c = parse_contract(src).unwrap();
        let f = c.function("hit").unwrap();
        assert_eq!(f.named_callees, vec!["withdraw".to_string(), "ping".to_string()]);
    }

    #[test]
    fn rejects_transfer_in_expression_position() {
        let src = "contract C { function f() { require(msg.sender.transfer(1)); } }";
        let err = parse_contract(src).unwrap_err();
        assert!(err.msg.contains("statement, not an expression"), "{err}");
    }

    #[test]
    fn comments_are_skipped() {
        let src = "\
contract C { // header
    uint x; // holds a number
    // a full comment line
    function f() { x = 1; }
}
";
        assert!(parse_contract(src).is_ok());
    }

    #[test]
    fn error_positions_are_one_based() {
        let err = parse_contract("contract").unwrap_err();
        assert_eq!((err.line, err.col), (1, 9));
    }
}
