//! Name resolution and type checking. Fills every `place`/`target` slot so the
//! VM never sees an unresolved reference.

use std::collections::HashSet;

use super::ast::*;
use super::error::{FrontendError, Loc};

struct Signatures {
    /// Per contract: (name, params, visibility).
    contracts: Vec<(String, Vec<(String, Vec<Type>, Visibility)>)>,
}

impl Signatures {
    fn contract(&self, name: &str) -> Option<usize> {
        self.contracts.iter().position(|(n, _)| n == name)
    }
    fn function(&self, ci: usize, name: &str) -> Option<usize> {
        self.contracts[ci].1.iter().position(|(n, _, _)| n == name)
    }
}

struct Ctx<'a> {
    unit_files: &'a [SourceFile],
    sigs: &'a Signatures,
    contract: usize,
    state: &'a [StateVarDecl],
    /// Visible locals: (name, slot, type), innermost last.
    scope: Vec<(String, usize, Type)>,
}

pub fn resolve(unit: &mut SourceUnit) -> Result<(), FrontendError> {
    let mut seen = HashSet::new();
    for c in &unit.contracts {
        if !seen.insert(c.name.clone()) {
            return Err(FrontendError::Duplicate {
                loc: loc_of(&unit.files, c.span),
                name: c.name.clone(),
            });
        }
        let mut vars = HashSet::new();
        for v in &c.state_vars {
            if !vars.insert(v.name.as_str()) {
                return Err(FrontendError::Duplicate {
                    loc: loc_of(&unit.files, v.span),
                    name: format!("{}.{}", c.name, v.name),
                });
            }
        }
        let mut fns = HashSet::new();
        for f in &c.functions {
            if !fns.insert(f.name.as_str()) {
                return Err(FrontendError::Duplicate {
                    loc: loc_of(&unit.files, f.span),
                    name: format!("{}.{}", c.name, f.name),
                });
            }
        }
    }

    let sigs = Signatures {
        contracts: unit
            .contracts
            .iter()
            .map(|c| {
                let fs = c
                    .functions
                    .iter()
                    .map(|f| {
                        (
                            f.name.clone(),
                            f.params.iter().map(|p| p.ty).collect(),
                            f.visibility,
                        )
                    })
                    .collect();
                (c.name.clone(), fs)
            })
            .collect(),
    };

    let files = std::mem::take(&mut unit.files);
    let result = (|| {
        for (ci, c) in unit.contracts.iter_mut().enumerate() {
            let state = c.state_vars.clone();
            for f in &mut c.functions {
                let mut ctx = Ctx {
                    unit_files: &files,
                    sigs: &sigs,
                    contract: ci,
                    state: &state,
                    scope: Vec::new(),
                };
                for (slot, p) in f.params.iter().enumerate() {
                    if ctx.scope.iter().any(|(n, _, _)| *n == p.name) {
                        return Err(FrontendError::Duplicate {
                            loc: loc_of(&files, f.span),
                            name: p.name.clone(),
                        });
                    }
                    ctx.scope.push((p.name.clone(), slot, p.ty));
                }
                ctx.block(&mut f.body)?;
            }
        }
        Ok(())
    })();
    unit.files = files;
    result
}

pub(crate) fn loc_of(files: &[SourceFile], span: Span) -> Loc {
    let Some(file) = files.get(span.file) else {
        return Loc::new("<unknown>", 0, 0);
    };
    let before = &file.text[..span.start.min(file.text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    Loc::new(&file.name, line, col)
}

impl Ctx<'_> {
    fn loc(&self, span: Span) -> Loc {
        loc_of(self.unit_files, span)
    }

    fn type_err<T>(&self, span: Span, message: String) -> Result<T, FrontendError> {
        Err(FrontendError::Type {
            loc: self.loc(span),
            message,
        })
    }

    fn block(&mut self, stmts: &mut [Stmt]) -> Result<(), FrontendError> {
        let depth = self.scope.len();
        for s in stmts.iter_mut() {
            self.stmt(s)?;
        }
        self.scope.truncate(depth);
        Ok(())
    }

    fn lookup(&self, var: &mut VarRef, span: Span) -> Result<Type, FrontendError> {
        if let Some((_, slot, ty)) = self.scope.iter().rev().find(|(n, _, _)| *n == var.name) {
            var.place = Some(Place::Local(*slot));
            return Ok(*ty);
        }
        if let Some(i) = self.state.iter().position(|v| v.name == var.name) {
            var.place = Some(Place::State(i));
            return Ok(self.state[i].ty);
        }
        Err(FrontendError::UnknownIdentifier {
            loc: self.loc(span),
            name: var.name.clone(),
        })
    }

    fn stmt(&mut self, s: &mut Stmt) -> Result<(), FrontendError> {
        let span = s.span;
        match &mut s.kind {
            StmtKind::Let {
                ty,
                name,
                slot,
                init,
            } => {
                let got = self.expr(init, span)?;
                if got != *ty {
                    return self.type_err(span, format!("cannot initialise {ty} `{name}` with {got}"));
                }
                if self.scope.iter().any(|(n, _, _)| n == name) {
                    return Err(FrontendError::Duplicate {
                        loc: self.loc(span),
                        name: name.clone(),
                    });
                }
                self.scope.push((name.clone(), *slot, *ty));
            }
            StmtKind::Assign { target, value } => {
                let rhs = self.expr(value, span)?;
                let lhs = match target {
                    LValue::Var(v) => {
                        let t = self.lookup(v, span)?;
                        if t == Type::Map {
                            return self.type_err(span, format!("cannot assign to map `{}`", v.name));
                        }
                        t
                    }
                    LValue::Index { map, key } => {
                        self.index(map, key, span)?;
                        Type::Uint
                    }
                };
                if lhs != rhs {
                    return self.type_err(span, format!("cannot assign {rhs} to {lhs}"));
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.expect_ty(cond, Type::Bool, span)?;
                self.block(then_branch)?;
                if let Some(e) = else_branch {
                    self.block(e)?;
                }
            }
            StmtKind::Require(cond) | StmtKind::Assert(cond) => {
                self.expect_ty(cond, Type::Bool, span)?;
            }
            StmtKind::Bug(_) => {}
            StmtKind::Call(call) => self.call(call)?,
        }
        Ok(())
    }

    fn call(&mut self, call: &mut CallExpr) -> Result<(), FrontendError> {
        let span = call.span;
        let ci = match &call.contract {
            None => self.contract,
            Some(name) => self.sigs.contract(name).ok_or_else(|| FrontendError::UnknownContract {
                loc: self.loc(span),
                name: name.clone(),
            })?,
        };
        let fi = self
            .sigs
            .function(ci, &call.function)
            .ok_or_else(|| FrontendError::UnknownFunction {
                loc: self.loc(span),
                name: match &call.contract {
                    Some(c) => format!("{c}.{}", call.function),
                    None => call.function.clone(),
                },
            })?;
        let (_, params, vis) = &self.sigs.contracts[ci].1[fi];
        if call.contract.is_some() && *vis != Visibility::Public {
            return self.type_err(
                span,
                format!("`{}` is internal and cannot be called externally", call.function),
            );
        }
        if params.len() != call.args.len() {
            return self.type_err(
                span,
                format!(
                    "`{}` takes {} argument(s), {} given",
                    call.function,
                    params.len(),
                    call.args.len()
                ),
            );
        }
        let params = params.clone();
        for (arg, want) in call.args.iter_mut().zip(params) {
            self.expect_ty(arg, want, span)?;
        }
        call.target = Some((ci, fi));
        Ok(())
    }

    fn index(&mut self, map: &mut VarRef, key: &mut Expr, span: Span) -> Result<(), FrontendError> {
        let t = self.lookup(map, span)?;
        if t != Type::Map {
            return self.type_err(span, format!("`{}` is not a map", map.name));
        }
        self.expect_ty(key, Type::Address, span)
    }

    fn expect_ty(&mut self, e: &mut Expr, want: Type, span: Span) -> Result<(), FrontendError> {
        let got = self.expr(e, span)?;
        if got != want {
            return self.type_err(span, format!("expected {want}, found {got}"));
        }
        Ok(())
    }

    fn expr(&mut self, e: &mut Expr, span: Span) -> Result<Type, FrontendError> {
        Ok(match e {
            Expr::Int(_) | Expr::MsgValue => Type::Uint,
            Expr::Bool(_) => Type::Bool,
            Expr::Addr(_) | Expr::MsgSender => Type::Address,
            Expr::Var(v) => {
                let t = self.lookup(v, span)?;
                if t == Type::Map {
                    return self.type_err(span, format!("map `{}` used as a value", v.name));
                }
                t
            }
            Expr::Index { map, key } => {
                self.index(map, key, span)?;
                Type::Uint
            }
            Expr::Unary(UnOp::Not, inner) => {
                self.expect_ty(inner, Type::Bool, span)?;
                Type::Bool
            }
            Expr::Binary(op, l, r) => {
                let lt = self.expr(l, span)?;
                let rt = self.expr(r, span)?;
                use BinOp::*;
                match op {
                    Add | Sub | Mul | Div | Mod | Lt | Le | Gt | Ge => {
                        if lt != Type::Uint || rt != Type::Uint {
                            return self.type_err(
                                span,
                                format!("`{}` needs uint operands, found {lt} and {rt}", op.symbol()),
                            );
                        }
                        if matches!(op, Add | Sub | Mul | Div | Mod) {
                            Type::Uint
                        } else {
                            Type::Bool
                        }
                    }
                    Eq | Ne => {
                        if lt != rt {
                            return self.type_err(span, format!("cannot compare {lt} with {rt}"));
                        }
                        Type::Bool
                    }
                    And | Or => {
                        if lt != Type::Bool || rt != Type::Bool {
                            return self.type_err(
                                span,
                                format!("`{}` needs bool operands, found {lt} and {rt}", op.symbol()),
                            );
                        }
                        Type::Bool
                    }
                }
            }
        })
    }
}
