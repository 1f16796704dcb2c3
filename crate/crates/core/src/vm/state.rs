//! Persistent VM state and genesis construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Program;
use crate::frontend::Type;

/// Number of externally owned addresses callers are drawn from.
pub const ADDRESS_POOL: u32 = 8;

/// Contracts live at `ADDRESS_POOL + contract index`.
pub fn contract_address(contract: usize) -> u32 {
    ADDRESS_POOL + contract as u32
}

/// Serialized as a JSON number, a boolean, or an `"@N"` string for addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Uint(u64),
    Bool(bool),
    Addr(u32),
}

impl Value {
    pub fn zero(ty: Type) -> Value {
        match ty {
            Type::Bool => Value::Bool(false),
            Type::Address => Value::Addr(0),
            Type::Uint | Type::Map => Value::Uint(0),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Uint(n) => s.serialize_u64(*n),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Addr(a) => s.serialize_str(&format!("@{a}")),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Value, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Uint(u64),
            Bool(bool),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Uint(n) => Ok(Value::Uint(n)),
            Raw::Bool(b) => Ok(Value::Bool(b)),
            Raw::Text(t) => parse_address(&t)
                .map(Value::Addr)
                .ok_or_else(|| serde::de::Error::custom(format!("expected `@N`, got `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Slot {
    Scalar(Value),
    Map(BTreeMap<u32, u64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VmState {
    /// `[contract][state var]`.
    pub storage: Vec<Vec<Slot>>,
    /// Native balances: the address pool followed by one entry per contract.
    pub balances: Vec<u64>,
    pub steps: u64,
}

/// A genesis value as written in the campaign config: integers, booleans,
/// `"@N"` addresses, decimal strings for values beyond `i64`, or tables of
/// `"@N" = amount` for maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GenesisValue {
    Int(u64),
    Bool(bool),
    Text(String),
    Map(BTreeMap<String, GenesisScalar>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GenesisScalar {
    Int(u64),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisSpec {
    /// `"@N"` -> native balance.
    #[serde(default)]
    pub balances: BTreeMap<String, GenesisScalar>,
    /// contract -> state variable -> value.
    #[serde(default)]
    pub storage: BTreeMap<String, BTreeMap<String, GenesisValue>>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GenesisError {
    #[error("genesis: unknown contract `{0}`")]
    UnknownContract(String),
    #[error("genesis: contract `{0}` has no state variable `{1}`")]
    UnknownVariable(String, String),
    #[error("genesis: `{target}`: {message}")]
    BadValue { target: String, message: String },
}

pub fn parse_address(s: &str) -> Option<u32> {
    s.strip_prefix('@')?.parse().ok()
}

fn scalar_u64(v: &GenesisScalar) -> Option<u64> {
    match v {
        GenesisScalar::Int(n) => Some(*n),
        GenesisScalar::Text(s) => s.parse().ok(),
    }
}

impl VmState {
    /// All-zero state for `program`.
    pub fn empty(program: &Program) -> VmState {
        let storage = program
            .unit
            .contracts
            .iter()
            .map(|c| {
                c.state_vars
                    .iter()
                    .map(|v| match v.ty {
                        Type::Map => Slot::Map(BTreeMap::new()),
                        ty => Slot::Scalar(Value::zero(ty)),
                    })
                    .collect()
            })
            .collect();
        VmState {
            storage,
            balances: vec![0; ADDRESS_POOL as usize + program.unit.contracts.len()],
            steps: 0,
        }
    }

    pub fn genesis(program: &Program, spec: &GenesisSpec) -> Result<VmState, GenesisError> {
        let mut state = VmState::empty(program);
        let num_addresses = state.balances.len() as u32;
        for (addr, amount) in &spec.balances {
            let bad = |message: &str| GenesisError::BadValue {
                target: format!("balances.{addr}"),
                message: message.to_string(),
            };
            let a = parse_address(addr)
                .filter(|&a| a < num_addresses)
                .ok_or_else(|| bad("expected an address `@N` in range"))?;
            state.balances[a as usize] = scalar_u64(amount).ok_or_else(|| bad("expected a uint"))?;
        }
        for (cname, vars) in &spec.storage {
            let (ci, contract) = program
                .unit
                .contract(cname)
                .ok_or_else(|| GenesisError::UnknownContract(cname.clone()))?;
            for (vname, value) in vars {
                let vi = contract
                    .state_vars
                    .iter()
                    .position(|v| &v.name == vname)
                    .ok_or_else(|| GenesisError::UnknownVariable(cname.clone(), vname.clone()))?;
                let bad = |message: &str| GenesisError::BadValue {
                    target: format!("{cname}.{vname}"),
                    message: message.to_string(),
                };
                let slot = match (contract.state_vars[vi].ty, value) {
                    (Type::Uint, GenesisValue::Int(n)) => Slot::Scalar(Value::Uint(*n)),
                    (Type::Uint, GenesisValue::Text(s)) => Slot::Scalar(Value::Uint(
                        s.parse().map_err(|_| bad("expected a uint"))?,
                    )),
                    (Type::Bool, GenesisValue::Bool(b)) => Slot::Scalar(Value::Bool(*b)),
                    (Type::Address, GenesisValue::Text(s)) => Slot::Scalar(Value::Addr(
                        parse_address(s).ok_or_else(|| bad("expected an address `@N`"))?,
                    )),
                    (Type::Map, GenesisValue::Map(entries)) => {
                        let mut m = BTreeMap::new();
                        for (k, v) in entries {
                            let a = parse_address(k).ok_or_else(|| bad("map keys must be `@N`"))?;
                            m.insert(a, scalar_u64(v).ok_or_else(|| bad("map values must be uints"))?);
                        }
                        Slot::Map(m)
                    }
                    (ty, _) => return Err(bad(&format!("value does not match declared type {ty}"))),
                };
                state.storage[ci][vi] = slot;
            }
        }
        Ok(state)
    }
}
