//! Fuzzing feedback: control-flow edge coverage, cross-transaction data
//! dependencies, and a value dictionary harvested from observed state.
//!
//! Edge and dependency extraction deliberately include events from reverted
//! frames and reverted transactions: a path that executed carries signal
//! even when its effects were undone.

use std::collections::{BTreeSet, VecDeque};

use crate::ast::BlockId;
use crate::trace::{EventKind, Trace};
use crate::value::Value;
use crate::world::{AccountId, StorageVal, WorldState};

/// A storage location: account, variable, optional mapping key.
pub type Loc = (AccountId, String, Option<AccountId>);

/// One function's control-flow edge, virtual exit/fail blocks included.
pub type EdgeKey = (String, BlockId, BlockId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DepKind {
    /// Earlier transaction wrote the location, later one read it.
    Flow,
    /// Earlier transaction read the location, later one wrote it.
    Anti,
}

/// Dependency edge: kind, location, earlier role, later role. Roles are the
/// entry function names of the two transactions.
pub type DepEdge = (DepKind, Loc, String, String);

/// Reads and writes one transaction performed, reverted parts included.
#[derive(Debug, Clone)]
pub struct TxRw {
    pub function: String,
    pub reads: BTreeSet<Loc>,
    pub writes: BTreeSet<Loc>,
}

pub fn rw_summary(function: &str, trace: &Trace) -> TxRw {
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    for e in &trace.events {
        match &e.kind {
            EventKind::Read { addr, var, key, .. } => {
                reads.insert((*addr, var.clone(), *key));
            }
            EventKind::Write { addr, var, key, .. } => {
                writes.insert((*addr, var.clone(), *key));
            }
            _ => {}
        }
    }
    TxRw { function: function.to_string(), reads, writes }
}

/// Dependency edges carried by a transaction sequence: for i < j and a
/// location L, a flow edge when i wrote L and j read it, an anti edge when
/// i read L and j wrote it, in both cases with no write to L strictly
/// between i and j.
pub fn dep_edges(seq: &[TxRw]) -> BTreeSet<DepEdge> {
    let mut out = BTreeSet::new();
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            let blocked =
                |loc: &Loc| seq[i + 1..j].iter().any(|k| k.writes.contains(loc));
            for loc in seq[i].writes.intersection(&seq[j].reads) {
                if !blocked(loc) {
                    out.insert((
                        DepKind::Flow,
                        loc.clone(),
                        seq[i].function.clone(),
                        seq[j].function.clone(),
                    ));
                }
            }
            for loc in seq[i].reads.intersection(&seq[j].writes) {
                if !blocked(loc) {
                    out.insert((
                        DepKind::Anti,
                        loc.clone(),
                        seq[i].function.clone(),
                        seq[j].function.clone(),
                    ));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct Coverage {
    pub edges: BTreeSet<EdgeKey>,
    pub deps: BTreeSet<DepEdge>,
}

impl Coverage {
    pub fn new() -> Self {
        Coverage::default()
    }

    /// Folds a trace's edges in; true when anything was new.
    pub fn absorb_edges(&mut self, trace: &Trace) -> bool {
        let mut any_new = false;
        for e in &trace.events {
            if let EventKind::Edge { function, from, to } = &e.kind {
                any_new |= self.edges.insert((function.clone(), *from, *to));
            }
        }
        any_new
    }

    /// Folds a sequence's dependency edges in; true when anything was new.
    pub fn absorb_deps(&mut self, edges: &BTreeSet<DepEdge>) -> bool {
        let mut any_new = false;
        for d in edges {
            any_new |= self.deps.insert(d.clone());
        }
        any_new
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DictValue {
    Uint(Value),
    Bool(bool),
    Address(AccountId),
}

/// FIFO value dictionary with a hard capacity. Re-inserting a present value
/// neither duplicates it nor refreshes its age.
#[derive(Debug, Clone)]
pub struct Dictionary {
    entries: VecDeque<DictValue>,
    cap: usize,
}

impl Dictionary {
    pub fn new(cap: usize) -> Self {
        Dictionary { entries: VecDeque::new(), cap }
    }

    pub fn insert(&mut self, v: DictValue) {
        if self.entries.contains(&v) {
            return;
        }
        if self.entries.len() == self.cap {
            self.entries.pop_front();
        }
        self.entries.push_back(v);
    }

    /// Harvests the target's scalars, materialized mapping entries and its
    /// balance (reduced to machine width) from committed post-transaction
    /// state.
    pub fn absorb_target_state(&mut self, world: &WorldState, target: AccountId) {
        let Some(c) = world.contract(target) else { return };
        let scalars: Vec<DictValue> = c
            .scalars
            .values()
            .map(|s| match s {
                StorageVal::Uint(v) => DictValue::Uint(v.clone()),
                StorageVal::Bool(b) => DictValue::Bool(*b),
                StorageVal::Address(a) => DictValue::Address(*a),
            })
            .collect();
        let map_vals: Vec<DictValue> = c
            .mappings
            .values()
            .flat_map(|m| m.values())
            .map(|v| DictValue::Uint(v.clone()))
            .collect();
        for v in scalars.into_iter().chain(map_vals) {
            self.insert(v);
        }
        let bal = Value::from_biguint_wrapped(world.balance(target), world.width);
        self.insert(DictValue::Uint(bal));
    }

    pub fn uints(&self) -> Vec<Value> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                DictValue::Uint(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DictValue> {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::GasSchedule;
    use crate::interp::{execute_transaction, ArgValue, Transaction};
    use crate::parser::parse_contract;
    use crate::value::Value;
    use std::sync::Arc;

    fn run(
        world: &mut WorldState,
        sender: AccountId,
        to: AccountId,
        function: &str,
        args: Vec<ArgValue>,
        value: u64,
    ) -> Trace {
        let tx = Transaction {
            sender,
            to,
            function: function.into(),
            args,
            value: Value::from(value),
            gas_limit: 1_000_000,
        };
        execute_transaction(world, &tx, &GasSchedule::default()).1
    }

    const DAO_SRC: &str = "\
contract SimpleDAO {
    mapping(address => uint) balances;
    function deposit() payable { balances[msg.sender] += msg.value; }
    function withdraw(uint amount) {
        require(balances[msg.sender] >= amount);
        msg.sender.call.value(amount)();
        balances[msg.sender] -= amount;
    }
}
";

    #[test]
    fn edge_absorb_reports_novelty_once() {
        let mut w = WorldState::new(256);
        w.add_user(3, 1000u32.into());
        w.deploy(4, Arc::new(parse_contract(DAO_SRC).unwrap()), 0u32.into());
        let mut cov = Coverage::new();
        let t = run(&mut w, 3, 4, "deposit", vec![], 5);
        assert!(cov.absorb_edges(&t));
        let t = run(&mut w, 3, 4, "deposit", vec![], 5);
        assert!(!cov.absorb_edges(&t));
    }

    #[test]
    fn fail_edges_from_reverted_transactions_count() {
        let mut w = WorldState::new(256);
        w.add_user(3, 1000u32.into());
        w.deploy(4, Arc::new(parse_contract(DAO_SRC).unwrap()), 0u32.into());
        let mut cov = Coverage::new();
        // Reverts at the require; the edge into the virtual fail block is
        // still coverage.
        let t = run(&mut w, 3, 4, "withdraw", vec![ArgValue::Uint(Value::from(9u64))], 0);
        assert!(cov.absorb_edges(&t));
        // withdraw has blocks 0..2, so fail block is id 3.
        assert!(cov.edges.contains(&("SimpleDAO.withdraw".into(), 0, 3)));
    }

    #[test]
    fn failed_withdraw_then_deposit_is_an_anti_dependency() {
        let mut w = WorldState::new(256);
        w.add_user(3, 1000u32.into());
        w.deploy(4, Arc::new(parse_contract(DAO_SRC).unwrap()), 0u32.into());
        let t0 = run(&mut w, 3, 4, "withdraw", vec![ArgValue::Uint(Value::from(5u64))], 0);
        let t1 = run(&mut w, 3, 4, "deposit", vec![], 7);
        let seq = vec![rw_summary("withdraw", &t0), rw_summary("deposit", &t1)];
        let deps = dep_edges(&seq);
        let loc: Loc = (4, "balances".into(), Some(3));
        assert_eq!(deps.len(), 1);
        assert!(deps.contains(&(DepKind::Anti, loc, "withdraw".into(), "deposit".into())));
    }

    #[test]
    fn intervening_write_blocks_older_flow() {
        // Plain-set writes don't read, so write-write-read carries exactly
        // one (flow) dependency, from the second write.
        let src = "\
contract T {
    uint x;
    function w(uint v) { x = v; }
    function r() { require(x >= 0); }
}
";
        let mut w = WorldState::new(256);
        w.add_user(3, 1000u32.into());
        w.deploy(4, Arc::new(parse_contract(src).unwrap()), 0u32.into());
        let t0 = run(&mut w, 3, 4, "w", vec![ArgValue::Uint(Value::from(1u64))], 0);
        let t1 = run(&mut w, 3, 4, "w", vec![ArgValue::Uint(Value::from(2u64))], 0);
        let t2 = run(&mut w, 3, 4, "r", vec![], 0);
        let seq =
            vec![rw_summary("w", &t0), rw_summary("w", &t1), rw_summary("r", &t2)];
        let deps = dep_edges(&seq);
        assert_eq!(deps.len(), 1);
        let loc: Loc = (4, "x".into(), None);
        assert!(deps.contains(&(DepKind::Flow, loc, "w".into(), "r".into())));
    }

    #[test]
    fn dictionary_is_fifo_with_dedup() {
        let mut d = Dictionary::new(256);
        for i in 0..300u64 {
            d.insert(DictValue::Uint(Value::from(i)));
        }
        assert_eq!(d.len(), 256);
        let uints = d.uints();
        // 0..44 evicted, 44..300 retained in insertion order.
        assert_eq!(uints.first().unwrap(), &Value::from(44u64));
        assert_eq!(uints.last().unwrap(), &Value::from(299u64));

        // Re-inserting a present value neither duplicates nor refreshes.
        let mut d = Dictionary::new(2);
        d.insert(DictValue::Uint(Value::from(1u64)));
        d.insert(DictValue::Uint(Value::from(2u64)));
        d.insert(DictValue::Uint(Value::from(1u64)));
        d.insert(DictValue::Uint(Value::from(3u64)));
        assert_eq!(d.uints(), vec![Value::from(2u64), Value::from(3u64)]);
    }

    #[test]
    fn dictionary_absorbs_typed_target_state() {
        let src = "\
contract T {
    mapping(address => uint) m;
    uint fee = 7;
    bool open = true;
    address owner = address(2);
    function pay() payable { m[msg.sender] += msg.value; }
}
";
        let mut w = WorldState::new(256);
        w.add_user(3, 1000u32.into());
        w.deploy(4, Arc::new(parse_contract(src).unwrap()), 100u32.into());
        run(&mut w, 3, 4, "pay", vec![], 13);
        let mut d = Dictionary::new(256);
        d.absorb_target_state(&w, 4);
        assert!(d.iter().any(|v| *v == DictValue::Uint(Value::from(7u64))));
        assert!(d.iter().any(|v| *v == DictValue::Bool(true)));
        assert!(d.iter().any(|v| *v == DictValue::Address(2)));
        assert!(d.iter().any(|v| *v == DictValue::Uint(Value::from(13u64))));
        // 100 + 13 riding the call
        assert!(d.iter().any(|v| *v == DictValue::Uint(Value::from(113u64))));
    }
}
