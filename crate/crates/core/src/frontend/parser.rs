//! Recursive-descent parser. Produces an unresolved tree; see
//! [`resolve`](super::resolve) for name and type checking.

use super::ast::*;
use super::error::{FrontendError, Loc};
use super::lexer::{tokenize, Tok, Token};

const KEYWORDS: &[&str] = &[
    "contract", "function", "public", "internal", "uint", "bool", "address", "map", "if", "else",
    "require", "assert", "bug", "msg", "true", "false",
];

struct Parser<'a> {
    file_name: &'a str,
    file_index: usize,
    toks: Vec<Token>,
    pos: usize,
    next_stmt: usize,
    next_slot: usize,
}

pub fn parse_file(
    file_index: usize,
    name: &str,
    text: &str,
) -> Result<Vec<ContractDecl>, FrontendError> {
    let toks = tokenize(name, text)?;
    let mut p = Parser {
        file_name: name,
        file_index,
        toks,
        pos: 0,
        next_stmt: 0,
        next_slot: 0,
    };
    let mut contracts = Vec::new();
    while p.peek() != &Tok::Eof {
        contracts.push(p.contract()?);
    }
    Ok(contracts)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn loc(&self) -> Loc {
        let t = &self.toks[self.pos];
        Loc::new(self.file_name, t.line, t.col)
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn prev_end(&self) -> usize {
        self.toks[self.pos.saturating_sub(1)].end
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, FrontendError> {
        Err(FrontendError::Syntax {
            loc: self.loc(),
            message: message.into(),
        })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect(&mut self, p: &'static str) -> Result<(), FrontendError> {
        if self.peek() == &Tok::Punct(p) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", Self::describe(self.peek())))
        }
    }

    fn eat(&mut self, p: &'static str) -> bool {
        if self.peek() == &Tok::Punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), FrontendError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", Self::describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", Self::describe(&other))),
        }
    }

    fn int(&mut self) -> Result<u64, FrontendError> {
        match *self.peek() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            ref other => {
                let d = Self::describe(other);
                self.error(format!("expected integer literal, found {d}"))
            }
        }
    }

    fn span_from(&self, start: usize) -> Span {
        Span {
            file: self.file_index,
            start,
            end: self.prev_end(),
        }
    }

    fn contract(&mut self) -> Result<ContractDecl, FrontendError> {
        let start = self.toks[self.pos].start;
        self.expect_kw("contract")?;
        let name = self.ident()?;
        self.expect("{")?;
        let mut state_vars = Vec::new();
        let mut functions = Vec::new();
        while !self.eat("}") {
            if self.peek() == &Tok::Eof {
                return self.error(format!("unclosed contract `{name}`"));
            }
            if self.is_kw("function") {
                functions.push(self.function()?);
            } else {
                let vstart = self.toks[self.pos].start;
                let ty = self.ty(true)?;
                let vname = self.ident()?;
                self.expect(";")?;
                state_vars.push(StateVarDecl {
                    name: vname,
                    ty,
                    span: self.span_from(vstart),
                });
            }
        }
        Ok(ContractDecl {
            name,
            state_vars,
            functions,
            span: self.span_from(start),
        })
    }

    fn ty(&mut self, allow_map: bool) -> Result<Type, FrontendError> {
        let ty = match self.peek() {
            Tok::Ident(s) if s == "uint" || s == "uint256" => Type::Uint,
            Tok::Ident(s) if s == "bool" => Type::Bool,
            Tok::Ident(s) if s == "address" => Type::Address,
            Tok::Ident(s) if s == "map" && allow_map => {
                self.bump();
                self.expect("(")?;
                self.expect_kw("address")?;
                self.expect("=>")?;
                self.expect_kw("uint")?;
                self.expect(")")?;
                return Ok(Type::Map);
            }
            other => {
                let d = Self::describe(other);
                return self.error(format!("expected type, found {d}"));
            }
        };
        self.bump();
        Ok(ty)
    }

    fn function(&mut self) -> Result<FunctionDecl, FrontendError> {
        let start = self.toks[self.pos].start;
        self.expect_kw("function")?;
        let name = self.ident()?;
        self.expect("(")?;
        self.next_stmt = 0;
        self.next_slot = 0;
        let mut params = Vec::new();
        if !self.eat(")") {
            loop {
                let ty = self.ty(false)?;
                let pname = self.ident()?;
                params.push(Param { name: pname, ty });
                self.next_slot += 1;
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        let visibility = if self.is_kw("public") {
            Visibility::Public
        } else if self.is_kw("internal") {
            Visibility::Internal
        } else {
            return self.error(format!(
                "expected `public` or `internal`, found {}",
                Self::describe(self.peek())
            ));
        };
        self.bump();
        let body = self.block()?;
        Ok(FunctionDecl {
            name,
            params,
            visibility,
            body,
            span: self.span_from(start),
            num_locals: self.next_slot,
            num_stmts: self.next_stmt,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.eat("}") {
            if self.peek() == &Tok::Eof {
                return self.error("unclosed block");
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, FrontendError> {
        let start = self.toks[self.pos].start;
        let id = self.next_stmt;
        self.next_stmt += 1;
        let kind = match self.peek().clone() {
            Tok::Ident(kw) if kw == "if" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then_branch = self.block()?;
                let else_branch = if self.is_kw("else") {
                    self.bump();
                    if self.is_kw("if") {
                        Some(vec![self.stmt()?])
                    } else {
                        Some(self.block()?)
                    }
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            Tok::Ident(kw) if kw == "require" || kw == "assert" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                self.expect(";")?;
                if kw == "require" {
                    StmtKind::Require(cond)
                } else {
                    StmtKind::Assert(cond)
                }
            }
            Tok::Ident(kw) if kw == "bug" => {
                self.bump();
                self.expect("(")?;
                let n = self.int()?;
                self.expect(")")?;
                self.expect(";")?;
                StmtKind::Bug(n)
            }
            Tok::Ident(kw) if kw == "uint" || kw == "uint256" || kw == "bool" || kw == "address" => {
                // `address(3)` at statement start is an expression, which is
                // never a valid statement; treat the keyword as a type here.
                let ty = self.ty(false)?;
                let name = self.ident()?;
                self.expect("=")?;
                let init = self.expr()?;
                self.expect(";")?;
                let slot = self.next_slot;
                self.next_slot += 1;
                StmtKind::Let {
                    ty,
                    name,
                    slot,
                    init,
                }
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                match self.peek() {
                    Tok::Punct("(") => StmtKind::Call(self.call_rest(start, None, name)?),
                    Tok::Punct(".") => {
                        self.bump();
                        let function = self.ident()?;
                        StmtKind::Call(self.call_rest(start, Some(name), function)?)
                    }
                    Tok::Punct("[") => {
                        self.bump();
                        let key = self.expr()?;
                        self.expect("]")?;
                        self.expect("=")?;
                        let value = self.expr()?;
                        self.expect(";")?;
                        StmtKind::Assign {
                            target: LValue::Index {
                                map: VarRef { name, place: None },
                                key,
                            },
                            value,
                        }
                    }
                    Tok::Punct("=") => {
                        self.bump();
                        let value = self.expr()?;
                        self.expect(";")?;
                        StmtKind::Assign {
                            target: LValue::Var(VarRef { name, place: None }),
                            value,
                        }
                    }
                    other => {
                        let d = Self::describe(other);
                        return self.error(format!("expected `=`, `[`, `(` or `.`, found {d}"));
                    }
                }
            }
            other => {
                return self.error(format!("expected statement, found {}", Self::describe(&other)))
            }
        };
        Ok(Stmt {
            id,
            kind,
            span: self.span_from(start),
        })
    }

    fn call_rest(
        &mut self,
        start: usize,
        contract: Option<String>,
        function: String,
    ) -> Result<CallExpr, FrontendError> {
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.eat(")") {
            loop {
                args.push(self.expr()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        let span = self.span_from(start);
        self.expect(";")?;
        Ok(CallExpr {
            contract,
            function,
            args,
            target: None,
            span,
        })
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Punct("+") => BinOp::Add,
            Tok::Punct("-") => BinOp::Sub,
            Tok::Punct("*") => BinOp::Mul,
            Tok::Punct("/") => BinOp::Div,
            Tok::Punct("%") => BinOp::Mod,
            Tok::Punct("==") => BinOp::Eq,
            Tok::Punct("!=") => BinOp::Ne,
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") => BinOp::Gt,
            Tok::Punct(">=") => BinOp::Ge,
            Tok::Punct("&&") => BinOp::And,
            Tok::Punct("||") => BinOp::Or,
            _ => return None,
        })
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.expr_prec(1)
    }

    // Precedence climbing; all binary operators are left-associative.
    fn expr_prec(&mut self, min: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min {
                break;
            }
            self.bump();
            let rhs = self.expr_prec(op.precedence() + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        if self.eat("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::Ident(s) if s == "address" && self.peek_at(1) == &Tok::Punct("(") => {
                self.bump();
                self.bump();
                let n = self.int()?;
                let n = u32::try_from(n).or_else(|_| self.error("address literal out of range"))?;
                self.expect(")")?;
                Ok(Expr::Addr(n))
            }
            Tok::Ident(s) if s == "msg" => {
                self.bump();
                self.expect(".")?;
                match self.peek() {
                    Tok::Ident(f) if f == "sender" => {
                        self.bump();
                        Ok(Expr::MsgSender)
                    }
                    Tok::Ident(f) if f == "value" => {
                        self.bump();
                        Ok(Expr::MsgValue)
                    }
                    other => {
                        let d = Self::describe(other);
                        self.error(format!("expected `sender` or `value`, found {d}"))
                    }
                }
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.eat("[") {
                    let key = self.expr()?;
                    self.expect("]")?;
                    Ok(Expr::Index {
                        map: VarRef { name, place: None },
                        key: Box::new(key),
                    })
                } else {
                    Ok(Expr::Var(VarRef { name, place: None }))
                }
            }
            other => self.error(format!("expected expression, found {}", Self::describe(&other))),
        }
    }
}
