//! Sequence mutation: insert, remove, replace, and argument mutation.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::frontend::{FuncId, Type};
use crate::scheduler::Suggestion;
use crate::vm::{Call, Program, TestCase, Value, ADDRESS_POOL, MAX_CALLS};

pub const P_INSERT: f64 = 0.3;
pub const P_REMOVE: f64 = 0.2;
pub const P_REPLACE: f64 = 0.2;
pub const P_MUTATE_INPUT: f64 = 0.3;
/// Chance an insertion follows a suggested sequence when any exist.
pub const P_SEQ_INSERT: f64 = 0.5;
/// Chance a fresh call carries no native value.
pub const P_ZERO_VALUE: f64 = 0.75;

pub const DICTIONARY: [u64; 6] = [0, 1, 2, 100, 1 << 32, u64::MAX];
pub const MAX_DELTA: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationKind {
    Insert,
    Remove,
    Replace,
    MutateInput,
}

pub struct Mutator<'p> {
    program: &'p Program,
    /// Functions the fuzzer may call.
    pool: Vec<FuncId>,
    suggestions: Vec<Suggestion>,
    suggestion_total: f64,
}

impl<'p> Mutator<'p> {
    pub fn new(program: &'p Program, pool: Vec<FuncId>, suggestions: Vec<Suggestion>) -> Mutator<'p> {
        assert!(!pool.is_empty(), "mutator needs at least one callable function");
        let suggestions: Vec<Suggestion> = suggestions
            .into_iter()
            .filter(|s| s.score > 0.0 && s.calls.iter().all(|f| pool.contains(f)))
            .collect();
        let suggestion_total = suggestions.iter().map(|s| s.score).sum();
        Mutator {
            program,
            pool,
            suggestions,
            suggestion_total,
        }
    }

    pub fn pool(&self) -> &[FuncId] {
        &self.pool
    }

    /// One default-argument call per callable function.
    pub fn seeds(&self) -> Vec<TestCase> {
        self.pool
            .iter()
            .map(|&f| {
                let (_, decl) = self.program.unit.function(f);
                TestCase::new(vec![Call {
                    func: f,
                    args: decl.params.iter().map(|p| Value::zero(p.ty)).collect(),
                    sender: 1,
                    value: 0,
                }])
            })
            .collect()
    }

    fn uint(&self, prev: Option<u64>, rng: &mut impl Rng) -> u64 {
        match prev {
            Some(p) if rng.random_bool(0.5) => {
                let d = rng.random_range(1..=MAX_DELTA);
                if rng.random_bool(0.5) {
                    p.saturating_add(d)
                } else {
                    p.saturating_sub(d)
                }
            }
            _ => *DICTIONARY.choose(rng).expect("nonempty"),
        }
    }

    fn value_of(&self, ty: Type, prev: Option<Value>, rng: &mut impl Rng) -> Value {
        match (ty, prev) {
            (Type::Bool, Some(Value::Bool(b))) => Value::Bool(!b),
            (Type::Bool, _) => Value::Bool(rng.random_bool(0.5)),
            (Type::Address, _) => Value::Addr(rng.random_range(0..ADDRESS_POOL)),
            (_, Some(Value::Uint(p))) => Value::Uint(self.uint(Some(p), rng)),
            _ => Value::Uint(self.uint(None, rng)),
        }
    }

    fn native_value(&self, rng: &mut impl Rng) -> u64 {
        if rng.random_bool(P_ZERO_VALUE) {
            0
        } else {
            self.uint(None, rng)
        }
    }

    fn fresh_args(&self, f: FuncId, rng: &mut impl Rng) -> Vec<Value> {
        let (_, decl) = self.program.unit.function(f);
        decl.params
            .iter()
            .map(|p| self.value_of(p.ty, None, rng))
            .collect()
    }

    pub fn random_call(&self, f: FuncId, rng: &mut impl Rng) -> Call {
        Call {
            func: f,
            args: self.fresh_args(f, rng),
            sender: rng.random_range(0..ADDRESS_POOL),
            value: self.native_value(rng),
        }
    }

    /// Picks a suggestion by score and returns the next function of its
    /// longest matched prefix in `t`, with the earliest insertion index that
    /// keeps the prefix order. `None` when the suggestion is fully matched.
    fn seq_step(&self, t: &TestCase, rng: &mut impl Rng) -> Option<(FuncId, usize)> {
        let mut x = rng.random_range(0.0..self.suggestion_total);
        let s = self
            .suggestions
            .iter()
            .find(|s| {
                x -= s.score;
                x < 0.0
            })
            .unwrap_or_else(|| self.suggestions.last().expect("nonempty"));
        let mut matched = 0;
        let mut after = 0;
        for (i, c) in t.calls.iter().enumerate() {
            if matched < s.calls.len() && c.func == s.calls[matched] {
                matched += 1;
                after = i + 1;
            }
        }
        (matched < s.calls.len()).then(|| (s.calls[matched], after))
    }

    fn insert(&self, t: &mut TestCase, rng: &mut impl Rng) {
        if !self.suggestions.is_empty() && rng.random_bool(P_SEQ_INSERT) {
            if let Some((f, after)) = self.seq_step(t, rng) {
                let at = rng.random_range(after..=t.calls.len());
                t.calls.insert(at, self.random_call(f, rng));
                return;
            }
        }
        let f = *self.pool.choose(rng).expect("nonempty");
        let at = rng.random_range(0..=t.calls.len());
        t.calls.insert(at, self.random_call(f, rng));
    }

    fn mutate_input(&self, t: &mut TestCase, rng: &mut impl Rng) {
        let i = rng.random_range(0..t.calls.len());
        let (_, decl) = self.program.unit.function(t.calls[i].func);
        let slots = decl.params.len() + 2;
        let call = &mut t.calls[i];
        match rng.random_range(0..slots) {
            0 => call.sender = rng.random_range(0..ADDRESS_POOL),
            1 => {
                call.value = if call.value > 0 && rng.random_bool(0.5) {
                    self.uint(Some(call.value), rng)
                } else {
                    self.native_value(rng)
                }
            }
            a => {
                let a = a - 2;
                call.args[a] = self.value_of(decl.params[a].ty, Some(call.args[a]), rng);
            }
        }
    }

    pub fn mutate(&self, t: &TestCase, rng: &mut impl Rng) -> TestCase {
        self.mutate_with_report(t, rng).0
    }

    /// Applies exactly one operator; length-infeasible draws are redrawn.
    pub fn mutate_with_report(&self, t: &TestCase, rng: &mut impl Rng) -> (TestCase, MutationKind) {
        assert!(!t.is_empty() && t.len() <= MAX_CALLS);
        let mut out = t.clone();
        loop {
            let x: f64 = rng.random();
            let kind = if x < P_INSERT {
                MutationKind::Insert
            } else if x < P_INSERT + P_REMOVE {
                MutationKind::Remove
            } else if x < P_INSERT + P_REMOVE + P_REPLACE {
                MutationKind::Replace
            } else {
                MutationKind::MutateInput
            };
            match kind {
                MutationKind::Insert if out.len() >= MAX_CALLS => continue,
                MutationKind::Remove if out.len() <= 1 => continue,
                MutationKind::Insert => self.insert(&mut out, rng),
                MutationKind::Remove => {
                    let i = rng.random_range(0..out.len());
                    out.calls.remove(i);
                }
                MutationKind::Replace => {
                    let i = rng.random_range(0..out.len());
                    let f = *self.pool.choose(rng).expect("nonempty");
                    out.calls[i].args = self.fresh_args(f, rng);
                    out.calls[i].func = f;
                }
                MutationKind::MutateInput => self.mutate_input(&mut out, rng),
            }
            return (out, kind);
        }
    }
}
