//! Syntax tree for MiniSol.
//!
//! Identifier nodes carry a resolution slot that is filled in by the resolver
//! after parsing; once a [`SourceUnit`] has been returned by
//! [`parse`](super::parse) every slot is populated.

use std::fmt;

/// Byte range into one of the unit's source files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub file: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    pub files: Vec<SourceFile>,
    pub contracts: Vec<ContractDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractDecl {
    pub name: String,
    pub state_vars: Vec<StateVarDecl>,
    pub functions: Vec<FunctionDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVarDecl {
    pub name: String,
    pub ty: Type,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    Uint,
    Bool,
    Address,
    /// `map(address => uint)`; only valid for state variables.
    Map,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Uint => "uint",
            Type::Bool => "bool",
            Type::Address => "address",
            Type::Map => "map(address => uint)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Visibility {
    Public,
    Internal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub visibility: Visibility,
    pub body: Vec<Stmt>,
    /// From the `function` keyword through the closing brace.
    pub span: Span,
    /// Parameters plus every `let`-style local, in slot order.
    pub num_locals: usize,
    /// Total statements in the body, nested ones included.
    pub num_stmts: usize,
}

impl FunctionDecl {
    /// `name(type,type)` form used in prompts and metrics files.
    pub fn signature(&self) -> String {
        let tys: Vec<String> = self.params.iter().map(|p| p.ty.to_string()).collect();
        format!("{}({})", self.name, tys.join(","))
    }

    pub fn is_public(&self) -> bool {
        self.visibility == Visibility::Public
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    /// Pre-order index within the owning function.
    pub id: usize,
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Let {
        ty: Type,
        name: String,
        slot: usize,
        init: Expr,
    },
    Assign {
        target: LValue,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Option<Vec<Stmt>>,
    },
    Require(Expr),
    Assert(Expr),
    Bug(u64),
    Call(CallExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var(VarRef),
    Index { map: VarRef, key: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub name: String,
    pub place: Option<Place>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Place {
    State(usize),
    Local(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallExpr {
    /// `Some` for cross-contract calls (`Token.mint(x)`).
    pub contract: Option<String>,
    pub function: String,
    pub args: Vec<Expr>,
    /// Resolved callee as (contract index, function index).
    pub target: Option<(usize, usize)>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(u64),
    Bool(bool),
    /// `address(n)` literal.
    Addr(u32),
    Var(VarRef),
    Index { map: VarRef, key: Box<Expr> },
    MsgSender,
    MsgValue,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }
}

/// Flat index of a function across all contracts, in declaration order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(transparent)]
pub struct FuncId(pub usize);

impl SourceUnit {
    pub fn contract(&self, name: &str) -> Option<(usize, &ContractDecl)> {
        self.contracts.iter().enumerate().find(|(_, c)| c.name == name)
    }

    /// All functions in declaration order, paired with their flat ids.
    pub fn functions(&self) -> impl Iterator<Item = (FuncId, usize, &FunctionDecl)> + '_ {
        self.contracts
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.functions.iter().map(move |f| (ci, f)))
            .enumerate()
            .map(|(i, (ci, f))| (FuncId(i), ci, f))
    }

    pub fn num_functions(&self) -> usize {
        self.contracts.iter().map(|c| c.functions.len()).sum()
    }

    pub fn func_id(&self, contract: usize, function: usize) -> FuncId {
        let base: usize = self.contracts[..contract]
            .iter()
            .map(|c| c.functions.len())
            .sum();
        FuncId(base + function)
    }

    pub fn function(&self, id: FuncId) -> (usize, &FunctionDecl) {
        let mut rest = id.0;
        for (ci, c) in self.contracts.iter().enumerate() {
            if rest < c.functions.len() {
                return (ci, &c.functions[rest]);
            }
            rest -= c.functions.len();
        }
        panic!("function id {} out of range", id.0)
    }

    /// Verbatim source text of a function.
    pub fn function_source(&self, id: FuncId) -> &str {
        let (_, f) = self.function(id);
        &self.files[f.span.file].text[f.span.start..f.span.end]
    }

    /// Signature used in prompts and metrics files. Plain `name(types)` unless
    /// another contract declares the same signature, in which case it is
    /// qualified as `Contract.name(types)`.
    pub fn display_signature(&self, id: FuncId) -> String {
        let (ci, f) = self.function(id);
        let sig = f.signature();
        let clashes = self
            .functions()
            .filter(|(other, _, g)| *other != id && g.signature() == sig)
            .count();
        if clashes == 0 {
            sig
        } else {
            format!("{}.{}", self.contracts[ci].name, sig)
        }
    }

    /// Resolves a plain or qualified signature, tolerating whitespace and the
    /// `uint256` spelling.
    pub fn lookup_signature(&self, sig: &str) -> Option<FuncId> {
        let wanted = normalize_signature(sig);
        let mut plain = None;
        let mut plain_hits = 0;
        for (id, ci, f) in self.functions() {
            let s = f.signature();
            if format!("{}.{}", self.contracts[ci].name, s) == wanted {
                return Some(id);
            }
            if s == wanted {
                plain = Some(id);
                plain_hits += 1;
            }
        }
        if plain_hits == 1 {
            plain
        } else {
            None
        }
    }

    /// Copy with all spans zeroed, for structural comparison.
    pub fn without_spans(&self) -> SourceUnit {
        let mut unit = self.clone();
        unit.files.clear();
        for c in &mut unit.contracts {
            c.span = Span::default();
            for v in &mut c.state_vars {
                v.span = Span::default();
            }
            for f in &mut c.functions {
                f.span = Span::default();
                clear_stmt_spans(&mut f.body);
            }
        }
        unit
    }
}

fn clear_stmt_spans(stmts: &mut [Stmt]) {
    for s in stmts {
        s.span = Span::default();
        match &mut s.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                clear_stmt_spans(then_branch);
                if let Some(e) = else_branch {
                    clear_stmt_spans(e);
                }
            }
            StmtKind::Call(c) => c.span = Span::default(),
            _ => {}
        }
    }
}

pub fn normalize_signature(sig: &str) -> String {
    let compact: String = sig.chars().filter(|c| !c.is_whitespace()).collect();
    compact.replace("uint256", "uint")
}

/// Calls each closure on every statement, pre-order.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], visit: &mut impl FnMut(&'a Stmt)) {
    for s in stmts {
        visit(s);
        if let StmtKind::If {
            then_branch,
            else_branch,
            ..
        } = &s.kind
        {
            walk_stmts(then_branch, visit);
            if let Some(e) = else_branch {
                walk_stmts(e, visit);
            }
        }
    }
}
