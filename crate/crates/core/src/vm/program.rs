use std::collections::{BTreeSet, HashMap};

use crate::frontend::{
    ast::walk_stmts, build_cfg, loc_of, neighbors, Cfg, FuncId, SourceUnit, StmtKind,
};

/// Dense index into the global edge table.
pub type EdgeId = usize;

/// A basic block identified across the whole unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct BlockRef {
    pub func: FuncId,
    pub block: usize,
}

/// A resolved unit with everything the interpreter and scheduler need
/// precomputed: CFGs, global edge numbering, neighbour sets and the source
/// location of every oracle site.
#[derive(Debug, Clone)]
pub struct Program {
    pub unit: SourceUnit,
    pub cfgs: Vec<Cfg>,
    /// First global edge id of each function. Each function owns
    /// `cfg.edges.len() + 1` ids; the last one is the entry self-edge recorded
    /// whenever the function is invoked.
    edge_base: Vec<EdgeId>,
    num_edges: usize,
    /// `[func][from]` -> `(to, global edge id)`.
    succ: Vec<Vec<Vec<(usize, EdgeId)>>>,
    /// `[func][block]` -> neighbour blocks.
    neighbors: Vec<Vec<Vec<usize>>>,
    edge_owner: Vec<(FuncId, usize, usize)>,
    sites: HashMap<(FuncId, usize), String>,
    public: Vec<FuncId>,
    signatures: Vec<String>,
}

impl Program {
    pub fn new(unit: SourceUnit) -> Program {
        let mut cfgs = Vec::new();
        let mut edge_base = Vec::new();
        let mut succ = Vec::new();
        let mut nbrs = Vec::new();
        let mut edge_owner = Vec::new();
        let mut sites = HashMap::new();
        let mut public = Vec::new();
        let mut next = 0;
        for (id, ci, f) in unit.functions() {
            let cfg = build_cfg(f);
            edge_base.push(next);
            let mut per_block = vec![Vec::new(); cfg.blocks.len()];
            for (i, &(from, to)) in cfg.edges.iter().enumerate() {
                per_block[from].push((to, next + i));
                edge_owner.push((id, from, to));
            }
            edge_owner.push((id, cfg.entry, cfg.entry));
            next += cfg.edges.len() + 1;
            succ.push(per_block);
            nbrs.push(
                (0..cfg.blocks.len())
                    .map(|b| neighbors(&cfg, b).expect("block in range").into_iter().collect())
                    .collect(),
            );
            walk_stmts(&f.body, &mut |s| {
                if matches!(s.kind, StmtKind::Bug(_) | StmtKind::Assert(_)) {
                    let loc = loc_of(&unit.files, s.span);
                    sites.insert((id, s.id), format!("{}.{} at {loc}", unit.contracts[ci].name, f.name));
                }
            });
            if f.is_public() {
                public.push(id);
            }
            cfgs.push(cfg);
        }
        let signatures = unit.functions().map(|(id, _, _)| unit.display_signature(id)).collect();
        Program {
            signatures,
            unit,
            cfgs,
            edge_base,
            num_edges: next,
            succ,
            neighbors: nbrs,
            edge_owner,
            sites,
            public,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn num_blocks(&self) -> usize {
        self.cfgs.iter().map(|c| c.blocks.len()).sum()
    }

    pub fn entry_edge(&self, f: FuncId) -> EdgeId {
        self.edge_base[f.0] + self.cfgs[f.0].edges.len()
    }

    pub fn edge_id(&self, f: FuncId, from: usize, to: usize) -> EdgeId {
        self.succ[f.0][from]
            .iter()
            .find(|(t, _)| *t == to)
            .map(|&(_, id)| id)
            .unwrap_or_else(|| panic!("no edge {from}->{to} in function {}", f.0))
    }

    /// `(function, from, to)`; entry self-edges have `from == to == entry`.
    pub fn edge_endpoints(&self, e: EdgeId) -> (FuncId, usize, usize) {
        self.edge_owner[e]
    }

    pub fn neighbors(&self, b: BlockRef) -> &[usize] {
        &self.neighbors[b.func.0][b.block]
    }

    pub fn blocks_of(&self, f: FuncId) -> impl Iterator<Item = BlockRef> {
        (0..self.cfgs[f.0].blocks.len()).map(move |block| BlockRef { func: f, block })
    }

    pub fn public_functions(&self) -> &[FuncId] {
        &self.public
    }

    pub(crate) fn site(&self, f: FuncId, stmt: usize) -> String {
        self.sites.get(&(f, stmt)).cloned().unwrap_or_default()
    }

    /// Blocks covered by a set of edges: both endpoints of every edge.
    pub fn blocks_of_edges(&self, edges: impl IntoIterator<Item = EdgeId>) -> BTreeSet<BlockRef> {
        let mut out = BTreeSet::new();
        for e in edges {
            let (func, from, to) = self.edge_endpoints(e);
            out.insert(BlockRef { func, block: from });
            out.insert(BlockRef { func, block: to });
        }
        out
    }

    /// Statement count of a set of blocks.
    pub fn statements_in(&self, blocks: &BTreeSet<BlockRef>) -> usize {
        blocks
            .iter()
            .map(|b| self.cfgs[b.func.0].blocks[b.block].stmts.len())
            .sum()
    }

    pub fn signature(&self, f: FuncId) -> &str {
        &self.signatures[f.0]
    }

    pub fn lookup_signature(&self, sig: &str) -> Option<FuncId> {
        self.unit.lookup_signature(sig)
    }

    pub fn contract_name(&self, f: FuncId) -> &str {
        let (ci, _) = self.unit.function(f);
        &self.unit.contracts[ci].name
    }
}
