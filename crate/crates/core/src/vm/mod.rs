//! MiniSol virtual machine: executes call sequences against persistent
//! per-contract state and records edge coverage and oracle events.

mod coverage;
mod exec;
mod program;
mod state;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use coverage::{bucket, CoverageMap};
pub use exec::{storage_view, ExecError, InvariantCheck, Vm, MAX_CALL_DEPTH, STEP_LIMIT};
pub use program::{BlockRef, EdgeId, Program};
pub use state::{
    contract_address, parse_address, GenesisError, GenesisScalar, GenesisSpec, GenesisValue,
    Slot, Value, VmState, ADDRESS_POOL,
};

use crate::frontend::FuncId;

/// Longest test case the VM accepts.
pub const MAX_CALLS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Call {
    pub func: FuncId,
    pub args: Vec<Value>,
    pub sender: u32,
    pub value: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    pub calls: Vec<Call>,
}

impl TestCase {
    pub fn new(calls: Vec<Call>) -> TestCase {
        TestCase { calls }
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    pub fn functions(&self) -> impl Iterator<Item = FuncId> + '_ {
        self.calls.iter().map(|c| c.func)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleKind {
    AssertViolation { site: String },
    BugHit { id: u64 },
    InvariantViolation { id: String },
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OracleEvent {
    #[serde(flatten)]
    pub kind: OracleKind,
    /// `Contract.function at file:line:col`.
    pub location: String,
    /// Index of the top-level call during which the event fired.
    pub call_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecResult {
    /// Edges hit, sorted by id, with hit counts.
    pub edges: Vec<(EdgeId, u32)>,
    pub blocks: BTreeSet<BlockRef>,
    /// Top-level functions in call order.
    pub functions: Vec<FuncId>,
    /// Oracle events, including ones raised inside calls that later reverted.
    pub events: Vec<OracleEvent>,
    /// Per top-level call.
    pub reverted: Vec<bool>,
    pub steps: u64,
}
