//! Static attributes handed to the producers: state-variable read/write sets,
//! call graph, cyclomatic complexity and dependency closures.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::ast::*;
use super::cfg::{build_cfg, cyclomatic};

/// Direct (non-transitive) facts about one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionFacts {
    pub contract: usize,
    /// State-variable indices within `contract`.
    pub reads: BTreeSet<usize>,
    pub writes: BTreeSet<usize>,
    /// In order of first occurrence.
    pub callees: Vec<FuncId>,
    pub cyclomatic: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FunctionSummary {
    pub contract: String,
    pub signature: String,
    pub visibility: &'static str,
    pub cyclomatic: usize,
    pub reads: Vec<String>,
    pub writes: Vec<String>,
    pub callees: Vec<String>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct StaticSummary {
    pub functions: Vec<FunctionSummary>,
    pub call_graph: BTreeMap<String, Vec<String>>,
    #[serde(skip)]
    pub facts: Vec<FunctionFacts>,
}

fn expr_reads(e: &Expr, out: &mut BTreeSet<usize>) {
    match e {
        Expr::Var(v) => {
            if let Some(Place::State(i)) = v.place {
                out.insert(i);
            }
        }
        Expr::Index { map, key } => {
            if let Some(Place::State(i)) = map.place {
                out.insert(i);
            }
            expr_reads(key, out);
        }
        Expr::Unary(_, inner) => expr_reads(inner, out),
        Expr::Binary(_, l, r) => {
            expr_reads(l, out);
            expr_reads(r, out);
        }
        Expr::Int(_) | Expr::Bool(_) | Expr::Addr(_) | Expr::MsgSender | Expr::MsgValue => {}
    }
}

pub fn function_facts(unit: &SourceUnit, contract: usize, f: &FunctionDecl) -> FunctionFacts {
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    let mut callees = Vec::new();
    walk_stmts(&f.body, &mut |s| match &s.kind {
        StmtKind::Let { init, .. } => expr_reads(init, &mut reads),
        StmtKind::Assign { target, value } => {
            expr_reads(value, &mut reads);
            match target {
                LValue::Var(v) => {
                    if let Some(Place::State(i)) = v.place {
                        writes.insert(i);
                    }
                }
                LValue::Index { map, key } => {
                    expr_reads(key, &mut reads);
                    if let Some(Place::State(i)) = map.place {
                        writes.insert(i);
                    }
                }
            }
        }
        StmtKind::If { cond, .. } | StmtKind::Require(cond) | StmtKind::Assert(cond) => {
            expr_reads(cond, &mut reads)
        }
        StmtKind::Bug(_) => {}
        StmtKind::Call(c) => {
            for a in &c.args {
                expr_reads(a, &mut reads);
            }
            if let Some((ci, fi)) = c.target {
                let id = unit.func_id(ci, fi);
                if !callees.contains(&id) {
                    callees.push(id);
                }
            }
        }
    });
    FunctionFacts {
        contract,
        reads,
        writes,
        callees,
        cyclomatic: cyclomatic(&build_cfg(f)),
    }
}

pub fn summarize(unit: &SourceUnit) -> StaticSummary {
    let facts: Vec<FunctionFacts> = unit
        .functions()
        .map(|(_, ci, f)| function_facts(unit, ci, f))
        .collect();
    let mut functions = Vec::new();
    let mut call_graph = BTreeMap::new();
    for ((id, ci, f), fact) in unit.functions().zip(&facts) {
        let vars = &unit.contracts[ci].state_vars;
        let sig = unit.display_signature(id);
        let callees: Vec<String> = fact
            .callees
            .iter()
            .map(|&c| unit.display_signature(c))
            .collect();
        call_graph.insert(sig.clone(), callees.clone());
        functions.push(FunctionSummary {
            contract: unit.contracts[ci].name.clone(),
            signature: sig,
            visibility: if f.is_public() { "public" } else { "internal" },
            cyclomatic: fact.cyclomatic,
            reads: fact.reads.iter().map(|&i| vars[i].name.clone()).collect(),
            writes: fact.writes.iter().map(|&i| vars[i].name.clone()).collect(),
            callees,
        });
    }
    StaticSummary {
        functions,
        call_graph,
        facts,
    }
}

/// A member of a dependency closure with its breadth-first depth (target = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosureMember {
    pub func: FuncId,
    pub depth: usize,
}

/// `target` followed by everything it transitively depends on: functions it
/// calls and functions writing a state variable it reads. Breadth-first; the
/// dependencies discovered from one function are enqueued in declaration
/// order.
pub fn dependency_closure(target: FuncId, summary: &StaticSummary) -> Vec<ClosureMember> {
    let facts = &summary.facts;
    let mut seen = vec![false; facts.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(target, 0)]);
    seen[target.0] = true;
    while let Some((f, depth)) = queue.pop_front() {
        out.push(ClosureMember { func: f, depth });
        let fact = &facts[f.0];
        let mut deps: BTreeSet<FuncId> = fact.callees.iter().copied().collect();
        for (gi, g) in facts.iter().enumerate() {
            if g.contract == fact.contract && !g.writes.is_disjoint(&fact.reads) {
                deps.insert(FuncId(gi));
            }
        }
        for d in deps {
            if !seen[d.0] {
                seen[d.0] = true;
                queue.push_back((d, depth + 1));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn closure_names(src: &str, target: &str) -> Vec<String> {
        let unit = parse(src).unwrap();
        let summary = summarize(&unit);
        let id = unit.lookup_signature(target).unwrap();
        dependency_closure(id, &summary)
            .into_iter()
            .map(|m| unit.function(m.func).1.name.clone())
            .collect()
    }

    #[test]
    fn write_only_function() {
        let unit = parse("contract A { uint x; function f(uint v) public { x = v; } }").unwrap();
        let s = summarize(&unit);
        assert_eq!(s.functions[0].writes, vec!["x"]);
        assert!(s.functions[0].reads.is_empty());
        assert_eq!(s.functions[0].cyclomatic, 1);
    }

    #[test]
    fn closure_of_isolated_function_is_itself() {
        let src = "contract A { uint x; function f() public { bug(1); } function g() public { x = 1; } }";
        assert_eq!(closure_names(src, "f()"), vec!["f"]);
    }

    #[test]
    fn closure_follows_writers_of_read_state() {
        let src = "contract A { uint x; function f() public { require(x > 0); } function g() public { x = 1; } }";
        assert_eq!(closure_names(src, "f()"), vec!["f", "g"]);
    }

    #[test]
    fn closure_is_breadth_first_in_declaration_order() {
        let src = "contract A { uint x; uint y;
            function h() internal { y = 2; }
            function f() public { g(); require(x > 1); }
            function g() internal { require(y > 0); }
            function w() public { x = 1; } }";
        // f -> {g (call), w (writes x)}; g -> h (writes y).
        assert_eq!(closure_names(src, "f()"), vec!["f", "g", "w", "h"]);
    }

    #[test]
    fn map_key_reads_and_writes() {
        let unit = parse(
            "contract A { map(address => uint) bal; address owner;
             function f(address a) public { bal[owner] = bal[a] + 1; } }",
        )
        .unwrap();
        let s = summarize(&unit);
        assert_eq!(s.functions[0].reads, vec!["bal", "owner"]);
        assert_eq!(s.functions[0].writes, vec!["bal"]);
    }
}
