//! World state: account balances plus per-contract storage.
//!
//! Balances are unbounded non-negative integers (they never wrap); contract
//! storage values live in the configured machine width. `dump_state` and
//! `apply_state_dump` round-trip the whole world through a stable text form
//! that fuzzing artifacts embed verbatim.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::ast::{ContractProgram, Literal, VarType};
use crate::value::Value;

pub type AccountId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StorageVal {
    Uint(Value),
    Bool(bool),
    Address(AccountId),
}

impl StorageVal {
    fn render(&self) -> String {
        match self {
            StorageVal::Uint(v) => v.to_string(),
            StorageVal::Bool(b) => if *b { "1" } else { "0" }.to_string(),
            StorageVal::Address(a) => a.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContractInstance {
    pub program: Arc<ContractProgram>,
    pub scalars: BTreeMap<String, StorageVal>,
    /// Only written entries are materialized; reads of absent keys yield 0.
    pub mappings: BTreeMap<String, BTreeMap<AccountId, Value>>,
}

#[derive(Debug, Clone)]
pub struct Account {
    pub balance: BigUint,
    pub contract: Option<ContractInstance>,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub width: u32,
    pub accounts: BTreeMap<AccountId, Account>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("state line {line}: {msg}")]
pub struct StateParseError {
    pub line: usize,
    pub msg: String,
}

fn initial_storage(
    program: &ContractProgram,
    width: u32,
) -> (BTreeMap<String, StorageVal>, BTreeMap<String, BTreeMap<AccountId, Value>>) {
    let mut scalars = BTreeMap::new();
    let mut mappings = BTreeMap::new();
    for v in &program.state_vars {
        match v.ty {
            VarType::Mapping => {
                mappings.insert(v.name.clone(), BTreeMap::new());
            }
            VarType::Uint => {
                let val = match &v.init {
                    Some(Literal::Number(n)) => Value::from_biguint_wrapped(n.clone(), width),
                    _ => Value::zero(),
                };
                scalars.insert(v.name.clone(), StorageVal::Uint(val));
            }
            VarType::Bool => {
                let val = matches!(v.init, Some(Literal::Bool(true)));
                scalars.insert(v.name.clone(), StorageVal::Bool(val));
            }
            VarType::Address => {
                let val = match v.init {
                    Some(Literal::Address(a)) => a,
                    _ => 0,
                };
                scalars.insert(v.name.clone(), StorageVal::Address(val));
            }
        }
    }
    (scalars, mappings)
}

impl WorldState {
    pub fn new(width: u32) -> Self {
        WorldState { width, accounts: BTreeMap::new() }
    }

    /// Creates or replaces a plain user account.
    pub fn add_user(&mut self, id: AccountId, balance: BigUint) {
        self.accounts.insert(id, Account { balance, contract: None });
    }

    /// Deploys `program` at `id` with freshly initialized storage.
    pub fn deploy(&mut self, id: AccountId, program: Arc<ContractProgram>, balance: BigUint) {
        let (scalars, mappings) = initial_storage(&program, self.width);
        self.accounts.insert(
            id,
            Account {
                balance,
                contract: Some(ContractInstance { program, scalars, mappings }),
            },
        );
    }

    /// Resets a deployed contract to its initial storage and the given
    /// balance, keeping the same program.
    pub fn redeploy_in_place(&mut self, id: AccountId, balance: BigUint) {
        let program = self
            .contract(id)
            .map(|c| Arc::clone(&c.program))
            .expect("redeploy of a non-contract account");
        self.deploy(id, program, balance);
    }

    pub fn contract(&self, id: AccountId) -> Option<&ContractInstance> {
        self.accounts.get(&id).and_then(|a| a.contract.as_ref())
    }

    pub fn contract_mut(&mut self, id: AccountId) -> Option<&mut ContractInstance> {
        self.accounts.get_mut(&id).and_then(|a| a.contract.as_mut())
    }

    pub fn is_contract(&self, id: AccountId) -> bool {
        self.contract(id).is_some()
    }

    pub fn balance(&self, id: AccountId) -> BigUint {
        self.accounts.get(&id).map(|a| a.balance.clone()).unwrap_or_default()
    }

    pub fn set_balance(&mut self, id: AccountId, v: BigUint) {
        if let Some(a) = self.accounts.get_mut(&id) {
            a.balance = v;
        }
    }

    /// Reads a scalar state variable; panics on unknown names (the static
    /// checker guarantees they exist).
    pub fn read_scalar(&self, id: AccountId, var: &str) -> StorageVal {
        self.contract(id)
            .and_then(|c| c.scalars.get(var))
            .cloned()
            .unwrap_or_else(|| panic!("unknown scalar {var} on account {id}"))
    }

    pub fn write_scalar(&mut self, id: AccountId, var: &str, val: StorageVal) {
        let c = self.contract_mut(id).expect("write to non-contract account");
        c.scalars.insert(var.to_string(), val);
    }

    /// Reads a mapping entry; absent keys read as zero without materializing.
    pub fn read_map(&self, id: AccountId, var: &str, key: AccountId) -> Value {
        self.contract(id)
            .and_then(|c| c.mappings.get(var))
            .and_then(|m| m.get(&key))
            .cloned()
            .unwrap_or_else(Value::zero)
    }

    /// Writes a mapping entry, materializing the key even for zero values.
    pub fn write_map(&mut self, id: AccountId, var: &str, key: AccountId, val: Value) {
        let c = self.contract_mut(id).expect("write to non-contract account");
        c.mappings
            .get_mut(var)
            .unwrap_or_else(|| panic!("unknown mapping {var}"))
            .insert(key, val);
    }

    /// Stable text form of the whole world, one fact per line, sorted.
    pub fn dump_state(&self) -> String {
        let mut lines = Vec::new();
        for (id, acct) in &self.accounts {
            lines.push(format!("addr={id} bal={}", acct.balance));
            if let Some(c) = &acct.contract {
                for (name, val) in &c.scalars {
                    lines.push(format!("addr={id} var={name}={}", val.render()));
                }
                for (name, entries) in &c.mappings {
                    for (key, val) in entries {
                        lines.push(format!("addr={id} var={name}[{key}]={val}"));
                    }
                }
            }
        }
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    /// Applies a `dump_state` text onto this world. Contracts must already
    /// be deployed; the dump only carries balances and storage values.
    pub fn apply_state_dump(&mut self, text: &str) -> Result<(), StateParseError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let fail = |msg: String| StateParseError { line, msg };
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let (addr_part, rest) = raw
                .split_once(' ')
                .ok_or_else(|| fail("expected 'addr=<id> ...'".into()))?;
            let id: AccountId = addr_part
                .strip_prefix("addr=")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| fail(format!("bad account id in '{addr_part}'")))?;
            if let Some(bal) = rest.strip_prefix("bal=") {
                let v = bal
                    .parse::<BigUint>()
                    .map_err(|_| fail(format!("bad balance '{bal}'")))?;
                match self.accounts.get_mut(&id) {
                    Some(a) => a.balance = v,
                    None => self.add_user(id, v),
                }
                continue;
            }
            let var_part = rest
                .strip_prefix("var=")
                .ok_or_else(|| fail(format!("expected 'bal=' or 'var=' in '{rest}'")))?;
            let (lhs, value_text) = var_part
                .split_once('=')
                .ok_or_else(|| fail(format!("expected '=' in '{var_part}'")))?;
            let width = self.width;
            let c = self
                .contract(id)
                .ok_or_else(|| fail(format!("account {id} has no contract")))?;
            if let Some((name, key_text)) = lhs.split_once('[') {
                let key: AccountId = key_text
                    .strip_suffix(']')
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| fail(format!("bad mapping key in '{lhs}'")))?;
                if !c.mappings.contains_key(name) {
                    return Err(fail(format!("unknown mapping '{name}' on account {id}")));
                }
                let val = Value::parse_decimal(value_text)
                    .map(|v| Value::from_biguint_wrapped(v.magnitude().clone(), width))
                    .ok_or_else(|| fail(format!("bad value '{value_text}'")))?;
                self.write_map(id, name, key, val);
            } else {
                let old = c
                    .scalars
                    .get(lhs)
                    .ok_or_else(|| fail(format!("unknown variable '{lhs}' on account {id}")))?;
                let val = match old {
                    StorageVal::Uint(_) => StorageVal::Uint(
                        Value::parse_decimal(value_text)
                            .map(|v| Value::from_biguint_wrapped(v.magnitude().clone(), width))
                            .ok_or_else(|| fail(format!("bad value '{value_text}'")))?,
                    ),
                    StorageVal::Bool(_) => match value_text {
                        "0" => StorageVal::Bool(false),
                        "1" => StorageVal::Bool(true),
                        _ => return Err(fail(format!("bad bool value '{value_text}'"))),
                    },
                    StorageVal::Address(_) => StorageVal::Address(
                        value_text
                            .parse()
                            .map_err(|_| fail(format!("bad address value '{value_text}'")))?,
                    ),
                };
                self.write_scalar(id, lhs, val);
            }
        }
        Ok(())
    }

    /// Sum of one mapping's materialized entries, exact (no wrapping).
    pub fn mapping_sum(&self, id: AccountId, var: &str) -> BigUint {
        self.contract(id)
            .and_then(|c| c.mappings.get(var))
            .map(|m| m.values().map(|v| v.magnitude().clone()).sum())
            .unwrap_or_else(BigUint::zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_contract;

    fn sample_world() -> WorldState {
        let src = "\
contract Shop {
    mapping(address => uint) balances;
    uint minDeposit = 10;
    address owner = address(1);
    function deposit() payable { balances[msg.sender] += msg.value; }
}
";
        let program = Arc::new(parse_contract(src).unwrap());
        let mut w = WorldState::new(64);
        w.add_user(0, 500u32.into());
        w.deploy(4, program, 107u32.into());
        w
    }

    #[test]
    fn deploy_applies_initializers() {
        let w = sample_world();
        assert_eq!(w.read_scalar(4, "minDeposit"), StorageVal::Uint(Value::from(10u64)));
        assert_eq!(w.read_scalar(4, "owner"), StorageVal::Address(1));
        assert!(w.read_map(4, "balances", 3).is_zero());
    }

    #[test]
    fn dump_format_is_pinned() {
        let mut w = sample_world();
        w.write_map(4, "balances", 3, Value::from(5u64));
        w.write_map(4, "balances", 1, Value::zero());
        assert_eq!(
            w.dump_state(),
            "addr=0 bal=500\n\
             addr=4 bal=107\n\
             addr=4 var=balances[1]=0\n\
             addr=4 var=balances[3]=5\n\
             addr=4 var=minDeposit=10\n\
             addr=4 var=owner=1\n"
        );
    }

    #[test]
    fn reads_do_not_materialize_writes_do() {
        let mut w = sample_world();
        let _ = w.read_map(4, "balances", 2);
        assert!(!w.dump_state().contains("balances[2]"));
        w.write_map(4, "balances", 2, Value::zero());
        assert!(w.dump_state().contains("addr=4 var=balances[2]=0"));
    }

    #[test]
    fn dump_round_trips_through_apply() {
        let mut w = sample_world();
        w.write_map(4, "balances", 3, Value::from(42u64));
        w.write_scalar(4, "owner", StorageVal::Address(3));
        w.set_balance(0, 123u32.into());
        let dump = w.dump_state();

        let mut fresh = sample_world();
        fresh.apply_state_dump(&dump).unwrap();
        assert_eq!(fresh.dump_state(), dump);
    }

    #[test]
    fn apply_rejects_unknown_variable() {
        let mut w = sample_world();
        let err = w.apply_state_dump("addr=4 var=ghost=1\n").unwrap_err();
        assert!(err.msg.contains("unknown variable 'ghost'"), "{err}");
        assert_eq!(err.line, 1);
    }

    #[test]
    fn redeploy_resets_storage() {
        let mut w = sample_world();
        w.write_map(4, "balances", 3, Value::from(9u64));
        w.write_scalar(4, "minDeposit", StorageVal::Uint(Value::from(1u64)));
        w.redeploy_in_place(4, 107u32.into());
        assert!(w.read_map(4, "balances", 3).is_zero());
        assert_eq!(w.read_scalar(4, "minDeposit"), StorageVal::Uint(Value::from(10u64)));
    }

    #[test]
    fn mapping_sum_is_exact() {
        let mut w = sample_world();
        w.write_map(4, "balances", 1, Value::from(u64::MAX));
        w.write_map(4, "balances", 3, Value::from(2u64));
        let expect = BigUint::from(u64::MAX) + BigUint::from(2u64);
        assert_eq!(w.mapping_sum(4, "balances"), expect);
    }
}
