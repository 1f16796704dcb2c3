//! Canonical pretty-printer. Output reparses to a structurally equal tree.

use std::fmt::{self, Write};

use super::ast::*;

impl fmt::Display for SourceUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.contracts.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write_contract(f, c)?;
        }
        Ok(())
    }
}

fn write_contract(out: &mut impl Write, c: &ContractDecl) -> fmt::Result {
    writeln!(out, "contract {} {{", c.name)?;
    for v in &c.state_vars {
        writeln!(out, "    {} {};", v.ty, v.name)?;
    }
    for (i, func) in c.functions.iter().enumerate() {
        if i > 0 || !c.state_vars.is_empty() {
            writeln!(out)?;
        }
        let params: Vec<String> = func
            .params
            .iter()
            .map(|p| format!("{} {}", p.ty, p.name))
            .collect();
        let vis = match func.visibility {
            Visibility::Public => "public",
            Visibility::Internal => "internal",
        };
        writeln!(out, "    function {}({}) {} {{", func.name, params.join(", "), vis)?;
        write_block(out, &func.body, 2)?;
        writeln!(out, "    }}")?;
    }
    writeln!(out, "}}")
}

fn indent(out: &mut impl Write, depth: usize) -> fmt::Result {
    for _ in 0..depth {
        out.write_str("    ")?;
    }
    Ok(())
}

fn write_block(out: &mut impl Write, stmts: &[Stmt], depth: usize) -> fmt::Result {
    for s in stmts {
        indent(out, depth)?;
        write_stmt(out, s, depth)?;
        writeln!(out)?;
    }
    Ok(())
}

fn write_stmt(out: &mut impl Write, s: &Stmt, depth: usize) -> fmt::Result {
    match &s.kind {
        StmtKind::Let { ty, name, init, .. } => write!(out, "{ty} {name} = {};", ExprFmt(init)),
        StmtKind::Assign { target, value } => match target {
            LValue::Var(v) => write!(out, "{} = {};", v.name, ExprFmt(value)),
            LValue::Index { map, key } => {
                write!(out, "{}[{}] = {};", map.name, ExprFmt(key), ExprFmt(value))
            }
        },
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            writeln!(out, "if ({}) {{", ExprFmt(cond))?;
            write_block(out, then_branch, depth + 1)?;
            indent(out, depth)?;
            out.write_char('}')?;
            match else_branch.as_deref() {
                None => Ok(()),
                Some([nested]) if matches!(nested.kind, StmtKind::If { .. }) => {
                    out.write_str(" else ")?;
                    write_stmt(out, nested, depth)
                }
                Some(e) => {
                    writeln!(out, " else {{")?;
                    write_block(out, e, depth + 1)?;
                    indent(out, depth)?;
                    out.write_char('}')
                }
            }
        }
        StmtKind::Require(e) => write!(out, "require({});", ExprFmt(e)),
        StmtKind::Assert(e) => write!(out, "assert({});", ExprFmt(e)),
        StmtKind::Bug(n) => write!(out, "bug({n});"),
        StmtKind::Call(c) => {
            if let Some(contract) = &c.contract {
                write!(out, "{contract}.")?;
            }
            let args: Vec<String> = c.args.iter().map(|a| ExprFmt(a).to_string()).collect();
            write!(out, "{}({});", c.function, args.join(", "))
        }
    }
}

struct ExprFmt<'a>(&'a Expr);

impl fmt::Display for ExprFmt<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Addr(n) => write!(f, "address({n})"),
            Expr::Var(v) => f.write_str(&v.name),
            Expr::Index { map, key } => write!(f, "{}[{}]", map.name, ExprFmt(key)),
            Expr::MsgSender => f.write_str("msg.sender"),
            Expr::MsgValue => f.write_str("msg.value"),
            Expr::Unary(UnOp::Not, inner) => write!(f, "!{}", Operand(inner)),
            Expr::Binary(op, l, r) => write!(f, "{} {} {}", Operand(l), op.symbol(), Operand(r)),
        }
    }
}

/// Operand position: compound expressions get parentheses.
struct Operand<'a>(&'a Expr);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Binary(..) | Expr::Unary(..) => write!(f, "({})", ExprFmt(self.0)),
            e => write!(f, "{}", ExprFmt(e)),
        }
    }
}
