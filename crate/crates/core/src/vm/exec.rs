//! Tree-walking interpreter over resolved MiniSol with edge instrumentation.

use std::collections::BTreeMap;

use super::state::{contract_address, Slot, Value, VmState};
use super::{Call, EdgeId, ExecResult, OracleEvent, OracleKind, Program, TestCase};
use crate::frontend::{BinOp, Branch, Expr, FuncId, LValue, Place, Stmt, StmtKind, UnOp};

/// Per top-level call.
pub const STEP_LIMIT: u64 = 100_000;
pub const MAX_CALL_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantCheck {
    pub id: String,
    /// Zero-argument function whose `assert` encodes the invariant.
    pub func: FuncId,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("call {index}: function id {func} does not exist")]
    UnknownFunction { index: usize, func: usize },
    #[error("call {index}: `{signature}` is not public")]
    NotPublic { index: usize, signature: String },
    #[error("call {index}: `{signature}` expects {expected} argument(s), got {got}")]
    Arity {
        index: usize,
        signature: String,
        expected: usize,
        got: usize,
    },
    #[error("call {index}: argument {arg} of `{signature}` has the wrong type")]
    ArgType {
        index: usize,
        signature: String,
        arg: usize,
    },
    #[error("test case must contain between 1 and 32 calls, got {0}")]
    Length(usize),
}

/// Why a call stopped early.
#[derive(Debug)]
enum Halt {
    Revert,
    Timeout,
}

/// Executes test cases against a fixed program. Holds only scratch buffers, so
/// one instance per worker thread.
pub struct Vm<'p> {
    program: &'p Program,
    invariants: Vec<InvariantCheck>,
    hits: Vec<u32>,
    touched: Vec<EdgeId>,
}

struct Frame {
    contract: usize,
    func: FuncId,
    sender: u32,
    value: u64,
    locals: Vec<Value>,
}

struct Run<'a, 'p> {
    program: &'p Program,
    state: &'a mut VmState,
    hits: &'a mut Vec<u32>,
    touched: &'a mut Vec<EdgeId>,
    events: &'a mut Vec<OracleEvent>,
    call_index: usize,
    steps: u64,
    depth: usize,
    record: bool,
}

impl<'p> Vm<'p> {
    pub fn new(program: &'p Program) -> Vm<'p> {
        Vm {
            program,
            invariants: Vec::new(),
            hits: vec![0; program.num_edges()],
            touched: Vec::new(),
        }
    }

    pub fn with_invariants(mut self, invariants: Vec<InvariantCheck>) -> Vm<'p> {
        self.invariants = invariants;
        self
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    fn check(&self, t: &TestCase) -> Result<(), ExecError> {
        if t.calls.is_empty() || t.calls.len() > super::MAX_CALLS {
            return Err(ExecError::Length(t.calls.len()));
        }
        for (index, call) in t.calls.iter().enumerate() {
            if call.func.0 >= self.program.unit.num_functions() {
                return Err(ExecError::UnknownFunction {
                    index,
                    func: call.func.0,
                });
            }
            let (_, f) = self.program.unit.function(call.func);
            let signature = self.program.signature(call.func).to_string();
            if !f.is_public() {
                return Err(ExecError::NotPublic { index, signature });
            }
            if f.params.len() != call.args.len() {
                return Err(ExecError::Arity {
                    index,
                    signature,
                    expected: f.params.len(),
                    got: call.args.len(),
                });
            }
            for (arg, (p, v)) in f.params.iter().zip(&call.args).enumerate() {
                if std::mem::discriminant(&Value::zero(p.ty)) != std::mem::discriminant(v) {
                    return Err(ExecError::ArgType {
                        index,
                        signature,
                        arg,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn execute(&mut self, genesis: &VmState, t: &TestCase) -> Result<ExecResult, ExecError> {
        self.execute_with_state(genesis, t).map(|(r, _)| r)
    }

    /// Replays `t` from `genesis`; also returns the final state.
    pub fn execute_with_state(
        &mut self,
        genesis: &VmState,
        t: &TestCase,
    ) -> Result<(ExecResult, VmState), ExecError> {
        self.check(t)?;
        let mut state = genesis.clone();
        let mut events = Vec::new();
        let mut reverted = Vec::with_capacity(t.calls.len());
        let mut total_steps = 0;

        for (call_index, call) in t.calls.iter().enumerate() {
            let snapshot = state.clone();
            let mut run = Run {
                program: self.program,
                state: &mut state,
                hits: &mut self.hits,
                touched: &mut self.touched,
                events: &mut events,
                call_index,
                steps: 0,
                depth: 0,
                record: true,
            };
            let outcome = run.top_level(call);
            let steps = run.steps;
            total_steps += steps;
            match outcome {
                Ok(()) => {
                    reverted.push(false);
                    self.check_invariants(&state, call_index, &mut events);
                }
                Err(halt) => {
                    if let Halt::Timeout = halt {
                        events.push(OracleEvent {
                            kind: OracleKind::Timeout,
                            location: self.program.signature(call.func).to_string(),
                            call_index,
                        });
                    }
                    state = snapshot;
                    reverted.push(true);
                }
            }
        }
        state.steps += total_steps;

        self.touched.sort_unstable();
        let edges: Vec<(EdgeId, u32)> = self
            .touched
            .drain(..)
            .map(|e| (e, std::mem::take(&mut self.hits[e])))
            .collect();
        let blocks = self.program.blocks_of_edges(edges.iter().map(|e| e.0));
        Ok((
            ExecResult {
                edges,
                blocks,
                functions: t.calls.iter().map(|c| c.func).collect(),
                events,
                reverted,
                steps: total_steps,
            },
            state,
        ))
    }

    fn check_invariants(&mut self, state: &VmState, call_index: usize, events: &mut Vec<OracleEvent>) {
        for inv in &self.invariants {
            if events.iter().any(
                |e| matches!(&e.kind, OracleKind::InvariantViolation { id } if *id == inv.id),
            ) {
                continue;
            }
            let mut scratch = state.clone();
            let mut sink = Vec::new();
            let mut run = Run {
                program: self.program,
                state: &mut scratch,
                hits: &mut self.hits,
                touched: &mut self.touched,
                events: &mut sink,
                call_index,
                steps: 0,
                depth: 0,
                record: false,
            };
            let (ci, f) = self.program.unit.function(inv.func);
            let frame = Frame {
                contract: ci,
                func: inv.func,
                sender: 0,
                value: 0,
                locals: vec![Value::Uint(0); f.num_locals],
            };
            let _ = run.invoke(frame);
            if let Some(e) = sink
                .into_iter()
                .find(|e| matches!(e.kind, OracleKind::AssertViolation { .. }))
            {
                events.push(OracleEvent {
                    kind: OracleKind::InvariantViolation { id: inv.id.clone() },
                    location: e.location,
                    call_index,
                });
            }
        }
    }
}

impl Run<'_, '_> {
    fn hit(&mut self, e: EdgeId) {
        if !self.record {
            return;
        }
        if self.hits[e] == 0 {
            self.touched.push(e);
        }
        self.hits[e] = self.hits[e].saturating_add(1);
    }

    fn step(&mut self) -> Result<(), Halt> {
        self.steps += 1;
        if self.steps > STEP_LIMIT {
            Err(Halt::Timeout)
        } else {
            Ok(())
        }
    }

    fn top_level(&mut self, call: &Call) -> Result<(), Halt> {
        let (ci, f) = self.program.unit.function(call.func);
        let this = contract_address(ci) as usize;
        if call.value > 0 {
            let sender = call.sender as usize;
            let available = self.state.balances.get(sender).copied().unwrap_or(0);
            if available < call.value {
                return Err(Halt::Revert);
            }
            self.state.balances[sender] -= call.value;
            self.state.balances[this] = self.state.balances[this]
                .checked_add(call.value)
                .ok_or(Halt::Revert)?;
        }
        let mut locals = call.args.clone();
        locals.resize(f.num_locals, Value::Uint(0));
        self.invoke(Frame {
            contract: ci,
            func: call.func,
            sender: call.sender,
            value: call.value,
            locals,
        })
    }

    fn invoke(&mut self, mut frame: Frame) -> Result<(), Halt> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Halt::Revert);
        }
        self.step()?;
        self.depth += 1;
        let program = self.program;
        let entry = program.cfgs[frame.func.0].entry;
        self.hit(program.entry_edge(frame.func));
        let (_, f) = program.unit.function(frame.func);
        let out = self.block(&mut frame, &f.body, entry).map(|_| ());
        self.depth -= 1;
        out
    }

    fn block(&mut self, frame: &mut Frame, stmts: &[Stmt], mut cur: usize) -> Result<usize, Halt> {
        for s in stmts {
            self.step()?;
            cur = self.stmt(frame, s, cur)?;
        }
        Ok(cur)
    }

    fn edge(&mut self, func: FuncId, from: usize, to: usize) {
        if self.record {
            let e = self.program.edge_id(func, from, to);
            self.hit(e);
        }
    }

    fn stmt(&mut self, frame: &mut Frame, s: &Stmt, cur: usize) -> Result<usize, Halt> {
        match &s.kind {
            StmtKind::Let { slot, init, .. } => {
                let v = self.eval(frame, init)?;
                frame.locals[*slot] = v;
            }
            StmtKind::Assign { target, value } => {
                let v = self.eval(frame, value)?;
                match target {
                    LValue::Var(var) => match var.place.expect("resolved") {
                        Place::Local(i) => frame.locals[i] = v,
                        Place::State(i) => self.state.storage[frame.contract][i] = Slot::Scalar(v),
                    },
                    LValue::Index { map, key } => {
                        let Value::Addr(k) = self.eval(frame, key)? else {
                            unreachable!("map keys are addresses")
                        };
                        let Value::Uint(n) = v else {
                            unreachable!("map values are uints")
                        };
                        let Some(Place::State(i)) = map.place else {
                            unreachable!("maps are state variables")
                        };
                        if let Slot::Map(m) = &mut self.state.storage[frame.contract][i] {
                            if n == 0 {
                                m.remove(&k);
                            } else {
                                m.insert(k, n);
                            }
                        }
                    }
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let Some(Branch::If {
                    then_block,
                    else_block,
                    join,
                }) = self.program.cfgs[frame.func.0].branches.get(&s.id).copied()
                else {
                    unreachable!("if statement without branch targets")
                };
                let taken = self.eval(frame, cond)? == Value::Bool(true);
                let (start, body) = if taken {
                    (then_block, then_branch.as_slice())
                } else {
                    (else_block, else_branch.as_deref().unwrap_or(&[]))
                };
                self.edge(frame.func, cur, start);
                let end = self.block(frame, body, start)?;
                self.edge(frame.func, end, join);
                return Ok(join);
            }
            StmtKind::Require(cond) | StmtKind::Assert(cond) => {
                let Some(Branch::Guard { pass, abort }) =
                    self.program.cfgs[frame.func.0].branches.get(&s.id).copied()
                else {
                    unreachable!("guard without branch targets")
                };
                if self.eval(frame, cond)? == Value::Bool(true) {
                    self.edge(frame.func, cur, pass);
                    return Ok(pass);
                }
                self.edge(frame.func, cur, abort);
                if matches!(s.kind, StmtKind::Assert(_)) {
                    self.events.push(OracleEvent {
                        kind: OracleKind::AssertViolation {
                            site: self.program.site(frame.func, s.id),
                        },
                        location: self.program.site(frame.func, s.id),
                        call_index: self.call_index,
                    });
                }
                return Err(Halt::Revert);
            }
            StmtKind::Bug(id) => {
                if self.record {
                    self.events.push(OracleEvent {
                        kind: OracleKind::BugHit { id: *id },
                        location: self.program.site(frame.func, s.id),
                        call_index: self.call_index,
                    });
                }
            }
            StmtKind::Call(call) => {
                let (ci, fi) = call.target.expect("resolved");
                let callee = self.program.unit.func_id(ci, fi);
                let (_, g) = self.program.unit.function(callee);
                let mut locals = Vec::with_capacity(g.num_locals);
                for a in &call.args {
                    locals.push(self.eval(frame, a)?);
                }
                locals.resize(g.num_locals, Value::Uint(0));
                let (sender, value) = if call.contract.is_some() {
                    (contract_address(frame.contract), 0)
                } else {
                    (frame.sender, frame.value)
                };
                self.invoke(Frame {
                    contract: ci,
                    func: callee,
                    sender,
                    value,
                    locals,
                })?;
            }
        }
        Ok(cur)
    }

    fn eval(&mut self, frame: &Frame, e: &Expr) -> Result<Value, Halt> {
        Ok(match e {
            Expr::Int(n) => Value::Uint(*n),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Addr(a) => Value::Addr(*a),
            Expr::MsgSender => Value::Addr(frame.sender),
            Expr::MsgValue => Value::Uint(frame.value),
            Expr::Var(v) => match v.place.expect("resolved") {
                Place::Local(i) => frame.locals[i],
                Place::State(i) => match &self.state.storage[frame.contract][i] {
                    Slot::Scalar(v) => *v,
                    Slot::Map(_) => unreachable!("maps are not values"),
                },
            },
            Expr::Index { map, key } => {
                let Value::Addr(k) = self.eval(frame, key)? else {
                    unreachable!("map keys are addresses")
                };
                let Some(Place::State(i)) = map.place else {
                    unreachable!("maps are state variables")
                };
                match &self.state.storage[frame.contract][i] {
                    Slot::Map(m) => Value::Uint(m.get(&k).copied().unwrap_or(0)),
                    Slot::Scalar(_) => unreachable!("indexed scalar"),
                }
            }
            Expr::Unary(UnOp::Not, inner) => match self.eval(frame, inner)? {
                Value::Bool(b) => Value::Bool(!b),
                _ => unreachable!("type checked"),
            },
            Expr::Binary(BinOp::And, l, r) => {
                if self.eval(frame, l)? == Value::Bool(false) {
                    Value::Bool(false)
                } else {
                    self.eval(frame, r)?
                }
            }
            Expr::Binary(BinOp::Or, l, r) => {
                if self.eval(frame, l)? == Value::Bool(true) {
                    Value::Bool(true)
                } else {
                    self.eval(frame, r)?
                }
            }
            Expr::Binary(op, l, r) => {
                let a = self.eval(frame, l)?;
                let b = self.eval(frame, r)?;
                match op {
                    BinOp::Eq => return Ok(Value::Bool(a == b)),
                    BinOp::Ne => return Ok(Value::Bool(a != b)),
                    _ => {}
                }
                let (Value::Uint(x), Value::Uint(y)) = (a, b) else {
                    unreachable!("type checked")
                };
                match op {
                    BinOp::Add => Value::Uint(x.checked_add(y).ok_or(Halt::Revert)?),
                    BinOp::Sub => Value::Uint(x.checked_sub(y).ok_or(Halt::Revert)?),
                    BinOp::Mul => Value::Uint(x.checked_mul(y).ok_or(Halt::Revert)?),
                    BinOp::Div => Value::Uint(x.checked_div(y).ok_or(Halt::Revert)?),
                    BinOp::Mod => Value::Uint(x.checked_rem(y).ok_or(Halt::Revert)?),
                    BinOp::Lt => Value::Bool(x < y),
                    BinOp::Le => Value::Bool(x <= y),
                    BinOp::Gt => Value::Bool(x > y),
                    BinOp::Ge => Value::Bool(x >= y),
                    _ => unreachable!("handled above"),
                }
            }
        })
    }
}

/// Storage of one contract rendered by variable name, for debugging and tests.
pub fn storage_view(program: &Program, state: &VmState, contract: usize) -> BTreeMap<String, String> {
    program.unit.contracts[contract]
        .state_vars
        .iter()
        .zip(&state.storage[contract])
        .map(|(v, slot)| (v.name.clone(), format!("{slot:?}")))
        .collect()
}
