//! Per-function control-flow graphs.
//!
//! Construction rules:
//! - a function starts in a single entry block;
//! - `if` ends the current block and creates a then block, an else block
//!   (empty when there is no `else`) and a join block;
//! - `require`/`assert` end the current block with two successors: a terminal
//!   abort block and a fallthrough block.
//!
//! Statements are attributed to the block that is current when they start, so
//! an `if` or guard statement is the last statement of its block.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{FunctionDecl, Stmt, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Normal,
    /// Reached when a `require`/`assert` fails. Has no successors.
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    /// Pre-order statement ids.
    pub stmts: Vec<usize>,
    pub preds: Vec<usize>,
    pub function: String,
    pub kind: BlockKind,
}

/// Successor blocks chosen by a branching statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    If {
        then_block: usize,
        else_block: usize,
        join: usize,
    },
    Guard {
        pass: usize,
        abort: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<(usize, usize)>,
    pub entry: usize,
    /// Keyed by the id of the branching statement.
    pub branches: BTreeMap<usize, Branch>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("block {0} is not part of this CFG")]
pub struct UnknownBlock(pub usize);

struct Builder {
    cfg: Cfg,
    function: String,
}

impl Builder {
    fn block(&mut self, kind: BlockKind) -> usize {
        let id = self.cfg.blocks.len();
        self.cfg.blocks.push(BasicBlock {
            id,
            stmts: Vec::new(),
            preds: Vec::new(),
            function: self.function.clone(),
            kind,
        });
        id
    }

    fn edge(&mut self, from: usize, to: usize) {
        self.cfg.edges.push((from, to));
        self.cfg.blocks[to].preds.push(from);
    }

    fn walk(&mut self, stmts: &[Stmt], mut cur: usize) -> usize {
        for s in stmts {
            self.cfg.blocks[cur].stmts.push(s.id);
            match &s.kind {
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    let then_block = self.block(BlockKind::Normal);
                    let else_block = self.block(BlockKind::Normal);
                    self.edge(cur, then_block);
                    self.edge(cur, else_block);
                    let then_end = self.walk(then_branch, then_block);
                    let else_end = self.walk(else_branch.as_deref().unwrap_or(&[]), else_block);
                    let join = self.block(BlockKind::Normal);
                    self.edge(then_end, join);
                    self.edge(else_end, join);
                    self.cfg.branches.insert(
                        s.id,
                        Branch::If {
                            then_block,
                            else_block,
                            join,
                        },
                    );
                    cur = join;
                }
                StmtKind::Require(_) | StmtKind::Assert(_) => {
                    let abort = self.block(BlockKind::Abort);
                    let pass = self.block(BlockKind::Normal);
                    self.edge(cur, abort);
                    self.edge(cur, pass);
                    self.cfg.branches.insert(s.id, Branch::Guard { pass, abort });
                    cur = pass;
                }
                _ => {}
            }
        }
        cur
    }
}

pub fn build_cfg(f: &FunctionDecl) -> Cfg {
    let mut b = Builder {
        cfg: Cfg {
            blocks: Vec::new(),
            edges: Vec::new(),
            entry: 0,
            branches: BTreeMap::new(),
        },
        function: f.signature(),
    };
    let entry = b.block(BlockKind::Normal);
    b.walk(&f.body, entry);
    b.cfg
}

impl Cfg {
    pub fn successors(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == b).map(|e| e.1)
    }

    /// Position of `(from, to)` in `edges`.
    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        self.edges.iter().position(|&e| e == (from, to))
    }

    pub fn contains(&self, b: usize) -> bool {
        b < self.blocks.len()
    }
}

/// Cyclomatic complexity, `E − N + 2`, evaluated on the graph where every
/// sink block (normal exit or abort) is joined to one virtual exit node, so
/// guard failures count as decisions. Equals plain `E − N + 2` whenever the
/// CFG already has a single exit.
pub fn cyclomatic(cfg: &Cfg) -> usize {
    let sinks = (0..cfg.blocks.len())
        .filter(|&b| cfg.successors(b).next().is_none())
        .count();
    let edges = cfg.edges.len() + sinks;
    let nodes = cfg.blocks.len() + 1;
    edges + 2 - nodes
}

/// Blocks other than `b` that share at least one predecessor with `b`.
pub fn neighbors(cfg: &Cfg, b: usize) -> Result<BTreeSet<usize>, UnknownBlock> {
    if !cfg.contains(b) {
        return Err(UnknownBlock(b));
    }
    let parents = &cfg.blocks[b].preds;
    Ok(parents
        .iter()
        .flat_map(|&p| cfg.successors(p))
        .filter(|&n| n != b)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn cfg_of(body: &str) -> Cfg {
        let src = format!(
            "contract T {{ uint x; uint y; uint z; function f(uint v) public {{ {body} }} }}"
        );
        let unit = parse(&src).unwrap();
        build_cfg(&unit.contracts[0].functions[0])
    }

    #[test]
    fn straight_line_is_one_block() {
        let cfg = cfg_of("x = 1; y = 2; z = 3;");
        assert_eq!(cfg.blocks.len(), 1);
        assert!(cfg.edges.is_empty());
        assert_eq!(cyclomatic(&cfg), 1);
        assert_eq!(cfg.blocks[0].stmts, vec![0, 1, 2]);
    }

    #[test]
    fn if_else_is_a_diamond() {
        let cfg = cfg_of("if (v > 1) { x = 1; } else { x = 2; }");
        assert_eq!(cfg.blocks.len(), 4);
        assert_eq!(cfg.edges, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        assert_eq!(cyclomatic(&cfg), 2);
        assert_eq!(neighbors(&cfg, 1).unwrap(), BTreeSet::from([2]));
        assert_eq!(neighbors(&cfg, 2).unwrap(), BTreeSet::from([1]));
        assert!(neighbors(&cfg, 0).unwrap().is_empty());
        // the join has two parents, each with a single child
        assert!(neighbors(&cfg, 3).unwrap().is_empty());
    }

    #[test]
    fn if_without_else_still_gets_an_else_block() {
        let cfg = cfg_of("if (v > 1) { x = 1; }");
        assert_eq!(cfg.blocks.len(), 4);
        assert!(cfg.blocks[2].stmts.is_empty());
    }

    #[test]
    fn guard_adds_abort_and_fallthrough() {
        let cfg = cfg_of("require(v > 0); x = v;");
        assert_eq!(cfg.blocks.len(), 3);
        assert_eq!(cfg.blocks[1].kind, BlockKind::Abort);
        assert_eq!(cfg.blocks[2].stmts, vec![1]);
        assert_eq!(cyclomatic(&cfg), 2);
    }

    #[test]
    fn nested_if_in_else_matches_hand_drawn_graph() {
        // 0: if (v > 10)        -> 1 (then), 2 (else)
        // 2: if (v > 5)         -> 3 (then), 4 (else); join 5
        // 1 -> 6, 5 -> 6 (outer join)
        let cfg = cfg_of("if (v > 10) { x = 1; } else { if (v > 5) { x = 2; } else { x = 3; } } y = 1;");
        assert_eq!(cfg.blocks.len(), 7);
        let mut edges = cfg.edges.clone();
        edges.sort();
        assert_eq!(edges, vec![(0, 1), (0, 2), (1, 6), (2, 3), (2, 4), (3, 5), (4, 5), (5, 6)]);
        // Hand count of entry-to-exit paths: then, else/then, else/else.
        assert_eq!(cyclomatic(&cfg), 3);
        assert_eq!(cfg.blocks[6].stmts, vec![5]);
    }

    #[test]
    fn three_branches_give_complexity_four() {
        // E = 4 + 4 + 2 = 10, N = 9, two sinks (abort, final block). With the
        // virtual exit: (10 + 2) - (9 + 1) + 2 = 4.
        let cfg = cfg_of(
            "if (v > 1) { x = 1; } else { x = 2; } \
             if (v > 2) { y = 1; } \
             require(x != y); z = 1;",
        );
        assert_eq!(cfg.blocks.len(), 9);
        assert_eq!(cfg.edges.len(), 10);
        assert_eq!(cyclomatic(&cfg), 4);
    }

    #[test]
    fn unknown_block_is_an_error() {
        let cfg = cfg_of("x = 1;");
        assert_eq!(neighbors(&cfg, 7), Err(UnknownBlock(7)));
    }
}
