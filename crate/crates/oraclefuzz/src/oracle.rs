//! Semantic test oracle. Instead of watching for crashes, it identifies the
//! contract's bookkeeping mapping by active probing, freezes a baseline, and
//! checks two accounting invariants after every transaction: the mapping sum
//! must stay a fixed offset from the contract balance, and each payout
//! recipient's bookkeeping delta must cancel its balance delta.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rand::RngCore;

use crate::ast::{FunctionDef, LValue, SimpleStmt, VarType};
use crate::gas::GasSchedule;
use crate::interp::{execute_transaction, ArgValue, Transaction};
use crate::trace::{EventKind, ExceptionKind, Trace, TransferKind};
use crate::value::Value;
use crate::world::{AccountId, WorldState};

/// Probes are cheap; give them room so only the contract's own logic can
/// make one revert.
pub const PROBE_GAS_LIMIT: u64 = 1_000_000;

/// How many amounts to probe each candidate writer with. The first five are
/// fixed boundary values, the rest are drawn at random.
#[derive(Debug, Clone)]
pub struct ProbePlan {
    pub probe_count: usize,
}

impl Default for ProbePlan {
    fn default() -> Self {
        ProbePlan { probe_count: 6 }
    }
}

impl ProbePlan {
    pub fn values<R: RngCore>(&self, width: u32, rng: &mut R) -> Vec<Value> {
        let mut vals = vec![
            Value::zero(),
            Value::one(),
            Value::from_biguint_wrapped(BigUint::from(1u8) << (width - 1), width),
            Value::max_for(width),
            Value::from_u64(2),
        ];
        vals.truncate(self.probe_count);
        while vals.len() < self.probe_count {
            vals.push(random_value(width, rng));
        }
        vals
    }
}

fn random_value<R: RngCore>(width: u32, rng: &mut R) -> Value {
    let mut bytes = vec![0u8; width.div_ceil(8) as usize];
    rng.fill_bytes(&mut bytes);
    Value::from_biguint_wrapped(BigUint::from_bytes_le(&bytes), width)
}

fn zero_args(f: &FunctionDef) -> Vec<ArgValue> {
    f.params
        .iter()
        .map(|p| match p.ty {
            crate::ast::ParamType::Uint => ArgValue::Uint(Value::zero()),
            crate::ast::ParamType::Bool => ArgValue::Bool(false),
            crate::ast::ParamType::Address => ArgValue::Address(0),
        })
        .collect()
}

fn writes_map_entry(f: &FunctionDef, var: &str) -> bool {
    f.cfg.blocks.iter().any(|b| {
        b.stmts.iter().any(|s| {
            matches!(s, SimpleStmt::Assign { lv: LValue::MapEntry(v, _), .. } if v == var)
        })
    })
}

/// Finds the state mappings that mirror incoming value one for one.
///
/// Every named payable function that writes a candidate mapping is probed
/// with each planned amount from the prober account. Probes run on a
/// snapshot and are rolled back, so identification leaves the world exactly
/// as it found it. A candidate survives when at least one probe committed
/// and every committed probe grew the sender's entry by exactly the amount
/// sent; a candidate whose probes all revert is dropped.
pub fn identify_bookkeeping<R: RngCore>(
    world: &mut WorldState,
    target: AccountId,
    prober: AccountId,
    plan: &ProbePlan,
    schedule: &GasSchedule,
    rng: &mut R,
) -> Vec<String> {
    let Some(instance) = world.contract(target) else {
        return Vec::new();
    };
    let program = Arc::clone(&instance.program);
    let probes = plan.values(world.width, rng);
    let mut kept = Vec::new();

    for sv in &program.state_vars {
        if sv.ty != VarType::Mapping {
            continue;
        }
        let writers: Vec<&FunctionDef> =
            program.functions.iter().filter(|f| f.payable && writes_map_entry(f, &sv.name)).collect();
        if writers.is_empty() {
            continue;
        }
        let mut committed_any = false;
        let mut honest = true;
        'candidate: for f in &writers {
            for amount in &probes {
                let snapshot = world.clone();
                let pre = world.read_map(target, &sv.name, prober);
                let tx = Transaction {
                    sender: prober,
                    to: target,
                    function: f.name.clone(),
                    args: zero_args(f),
                    value: amount.clone(),
                    gas_limit: PROBE_GAS_LIMIT,
                };
                let (receipt, _) = execute_transaction(world, &tx, schedule);
                let post = world.read_map(target, &sv.name, prober);
                *world = snapshot;
                if receipt.status.is_committed() {
                    committed_any = true;
                    if post.magnitude() != &(pre.magnitude() + amount.magnitude()) {
                        honest = false;
                        break 'candidate;
                    }
                }
            }
        }
        if committed_any && honest {
            kept.push(sv.name.clone());
        }
    }
    kept
}

/// The oracle's anchor: which mappings act as the books, and the baseline
/// offset K between their sum and the contract balance. K is fixed when the
/// binding is made and only ever recomputed on an explicit rebind after a
/// redeploy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub target: AccountId,
    pub contract_name: String,
    pub vars: Vec<String>,
    pub k: BigInt,
}

impl Binding {
    pub fn bind(world: &WorldState, target: AccountId, vars: Vec<String>) -> Binding {
        let contract_name =
            world.contract(target).map(|c| c.program.name.clone()).unwrap_or_default();
        let mut b = Binding { target, contract_name, vars, k: BigInt::zero() };
        b.rebind(world);
        b
    }

    /// Recomputes K from the current state. Called at binding time and after
    /// a redeploy, never while checking.
    pub fn rebind(&mut self, world: &WorldState) {
        self.k = self.books_sum(world) - BigInt::from(world.balance(self.target));
    }

    fn books_sum(&self, world: &WorldState) -> BigInt {
        let mut sum = BigUint::zero();
        for v in &self.vars {
            sum += world.mapping_sum(self.target, v);
        }
        BigInt::from(sum)
    }

    /// One line per bound variable, or a single NONE.
    pub fn describe(&self) -> Vec<String> {
        if self.vars.is_empty() {
            vec!["NONE".to_string()]
        } else {
            self.vars
                .iter()
                .map(|v| format!("BOOKKEEPING {} {} K={}", self.contract_name, v, self.k))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationClass {
    Reentrancy,
    GaslessSend,
    ExceptionDisorder,
    IntegerWrap,
    Other,
}

impl ViolationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationClass::Reentrancy => "reentrancy",
            ViolationClass::GaslessSend => "gasless_send",
            ViolationClass::ExceptionDisorder => "exception_disorder",
            ViolationClass::IntegerWrap => "integer_wrap",
            ViolationClass::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<ViolationClass> {
        Some(match s {
            "reentrancy" => ViolationClass::Reentrancy,
            "gasless_send" => ViolationClass::GaslessSend,
            "exception_disorder" => ViolationClass::ExceptionDisorder,
            "integer_wrap" => ViolationClass::IntegerWrap,
            "other" => ViolationClass::Other,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    BalanceViolation,
    TransactionViolation,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Ok => "ok",
            Outcome::BalanceViolation => "balance_violation",
            Outcome::TransactionViolation => "transaction_violation",
        }
    }
}

/// What the oracle concluded about one transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub tx_index: usize,
    pub outcome: Outcome,
    pub class: Option<ViolationClass>,
    pub sum_m: BigUint,
    pub bal: BigUint,
    pub k: BigInt,
    pub recipient: Option<AccountId>,
    pub dm: Option<BigInt>,
    pub dbal: Option<BigInt>,
}

impl Verdict {
    pub fn is_violation(&self) -> bool {
        self.outcome != Outcome::Ok
    }

    pub fn render(&self) -> String {
        match self.outcome {
            Outcome::TransactionViolation => format!(
                "VERDICT tx={} outcome=transaction_violation r={} dm={} dbal={}",
                self.tx_index,
                self.recipient.expect("transaction verdict carries a recipient"),
                self.dm.as_ref().expect("transaction verdict carries dm"),
                self.dbal.as_ref().expect("transaction verdict carries dbal"),
            ),
            _ => format!(
                "VERDICT tx={} outcome={} class={} sum_m={} bal={} K={}",
                self.tx_index,
                self.outcome.as_str(),
                self.class.map_or("none", ViolationClass::as_str),
                self.sum_m,
                self.bal,
                self.k,
            ),
        }
    }
}

/// Checks both invariants for one executed transaction, given the worlds
/// before and after it and its trace. The balance invariant is tried first;
/// per-recipient deltas only matter while the global books still reconcile.
pub fn check_tx(
    binding: &Binding,
    pre: &WorldState,
    post: &WorldState,
    trace: &Trace,
    tx_index: usize,
) -> Verdict {
    let sum_m = {
        let mut s = BigUint::zero();
        for v in &binding.vars {
            s += post.mapping_sum(binding.target, v);
        }
        s
    };
    let bal = post.balance(binding.target);
    let mut verdict = Verdict {
        tx_index,
        outcome: Outcome::Ok,
        class: None,
        sum_m: sum_m.clone(),
        bal: bal.clone(),
        k: binding.k.clone(),
        recipient: None,
        dm: None,
        dbal: None,
    };

    if BigInt::from(sum_m) - BigInt::from(bal) != binding.k {
        verdict.outcome = Outcome::BalanceViolation;
        verdict.class = Some(classify(trace, binding));
        return verdict;
    }

    // Recipients of committed outgoing transfer attempts, failed ones
    // included: a send that fails after the books were cut is exactly the
    // case the per-recipient invariant exists for.
    let mut recipients: BTreeSet<AccountId> = BTreeSet::new();
    for ev in trace.committed_events() {
        if let EventKind::Transfer { from, to, .. } = &ev.kind {
            if *from == binding.target && *to != binding.target {
                recipients.insert(*to);
            }
        }
    }
    for r in recipients {
        let mut dm = BigInt::zero();
        for v in &binding.vars {
            dm += BigInt::from(post.read_map(binding.target, v, r).magnitude().clone());
            dm -= BigInt::from(pre.read_map(binding.target, v, r).magnitude().clone());
        }
        let dbal = BigInt::from(post.balance(r)) - BigInt::from(pre.balance(r));
        if (&dm + &dbal) != BigInt::zero() {
            verdict.outcome = Outcome::TransactionViolation;
            verdict.class = Some(classify(trace, binding));
            verdict.recipient = Some(r);
            verdict.dm = Some(dm);
            verdict.dbal = Some(dbal);
            return verdict;
        }
    }
    verdict
}

/// Names the most specific explanation the trace supports, in fixed
/// priority order: reentrancy, gasless send, exception disorder, integer
/// wrap, other.
pub fn classify(trace: &Trace, binding: &Binding) -> ViolationClass {
    // Depth two means the victim was re-entered while a payout was already
    // in flight; reverted frames count since the damage shows up anyway.
    if trace.max_fallback_depth() >= 2 {
        return ViolationClass::Reentrancy;
    }

    let committed: Vec<&EventKind> = trace.committed_events().map(|e| &e.kind).collect();

    let stipend = GasSchedule::default().stipend;
    for kind in &committed {
        if let EventKind::Transfer {
            ok: false,
            kind: TransferKind::Send,
            gas_forwarded,
            fail: Some(ExceptionKind::OutOfGas),
            ..
        } = kind
        {
            if *gas_forwarded == stipend {
                return ViolationClass::GaslessSend;
            }
        }
    }

    // A swallowed payout failure counts as disorder unless some later
    // committed write restored the recipient's entry.
    for (i, kind) in committed.iter().enumerate() {
        let EventKind::Transfer { ok: false, from, to, kind: tk, .. } = kind else {
            continue;
        };
        if *from != binding.target
            || !matches!(tk, TransferKind::Send | TransferKind::CallValue)
        {
            continue;
        }
        let healed = committed[i + 1..].iter().any(|later| match later {
            EventKind::Write { addr, var, key: Some(k), old, new } => {
                *addr == binding.target && binding.vars.contains(var) && k == to && new > old
            }
            _ => false,
        });
        if !healed {
            return ViolationClass::ExceptionDisorder;
        }
    }

    for kind in &committed {
        if let EventKind::Wrap { var_context: Some(v), .. } = kind {
            if binding.vars.contains(v) {
                return ViolationClass::IntegerWrap;
            }
        }
    }

    ViolationClass::Other
}
