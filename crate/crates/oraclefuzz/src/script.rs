//! Exploit script read/write/replay.
//!
//! Scripts are line-oriented and bit-exact: writing a parsed script
//! reproduces the input byte for byte, and two runs that find the same
//! exploit emit identical files. Grammar:
//!
//! ```text
//! exploit-script v1
//! target <file> balance <dec>
//! attacker fallback <variant-id>
//! state
//!   <world dump line>
//!   ...
//! tx sender=<addr> func=<name|FALLBACK> args=<comma list> value=<dec> gas=<dec>
//! expect violation=<balance|transaction> class=<class|none> at=<tx index>
//! ```
//!
//! A `tx` line has no callee field. The sender implies it: the attacker
//! account always acts through the attack contract's surrogates, every
//! other sender calls the target directly.

use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ast::{ContractProgram, ParamType, FALLBACK_NAME};
use crate::attack::{AttackPlan, FallbackVariant};
use crate::campaign::{
    deploy_standard_world, ExploitRecord, ATTACKER_ACCOUNT, ATTACK_ADDR, PROBER_ACCOUNT,
    TARGET_ADDR,
};
use crate::gas::GasSchedule;
use crate::interp::{execute_transaction, ArgValue, Transaction};
use crate::oracle::{
    check_tx, identify_bookkeeping, Binding, Outcome, ProbePlan, Verdict, ViolationClass,
};
use crate::value::Value;
use crate::world::{AccountId, WorldState};

pub const SCRIPT_HEADER: &str = "exploit-script v1";
/// How `__fallback` is spelled in script files.
pub const FALLBACK_LITERAL: &str = "FALLBACK";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("script line {line}: {msg}")]
pub struct ScriptError {
    pub line: usize,
    pub msg: String,
}

fn err(line: usize, msg: impl Into<String>) -> ScriptError {
    ScriptError { line, msg: msg.into() }
}

/// One transaction as spelled in a script. Arguments stay textual until a
/// target program is available to type them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptTx {
    pub sender: AccountId,
    pub function: String,
    pub args: Vec<String>,
    pub value: BigUint,
    pub gas: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Balance,
    Transaction,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Balance => "balance",
            ViolationKind::Transaction => "transaction",
        }
    }

    pub fn matches(self, outcome: Outcome) -> bool {
        matches!(
            (self, outcome),
            (ViolationKind::Balance, Outcome::BalanceViolation)
                | (ViolationKind::Transaction, Outcome::TransactionViolation)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expectation {
    pub violation: ViolationKind,
    pub class: Option<ViolationClass>,
    pub at: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploitScript {
    pub target_file: String,
    pub target_balance: BigUint,
    pub fallback_variant: String,
    /// World dump applied before the first transaction. May be empty in
    /// hand-written scripts, in which case the fresh deployment stands.
    pub state: String,
    pub txs: Vec<ScriptTx>,
    pub expect: Expectation,
}

fn render_arg(a: &ArgValue) -> String {
    match a {
        ArgValue::Uint(v) => format!("{v}"),
        ArgValue::Bool(b) => b.to_string(),
        ArgValue::Address(id) => id.to_string(),
    }
}

impl ExploitScript {
    /// Builds a script from a recorded campaign exploit. The target balance
    /// on the `target` line is informational (the state block is
    /// authoritative); it is lifted out of the dump for readability.
    pub fn from_record(record: &ExploitRecord, target_file: &str) -> ExploitScript {
        let needle = format!("addr={TARGET_ADDR} bal=");
        let target_balance = record
            .initial_state
            .lines()
            .find_map(|l| l.strip_prefix(&needle))
            .and_then(|s| s.parse::<BigUint>().ok())
            .unwrap_or_else(BigUint::zero);
        let txs = record
            .seed
            .txs
            .iter()
            .map(|tx| ScriptTx {
                sender: tx.sender,
                function: tx.function.clone(),
                args: tx.args.iter().map(render_arg).collect(),
                value: tx.value.magnitude().clone(),
                gas: tx.gas_limit,
            })
            .collect();
        let v = &record.verdict;
        let violation = if v.outcome == Outcome::TransactionViolation {
            ViolationKind::Transaction
        } else {
            ViolationKind::Balance
        };
        ExploitScript {
            target_file: target_file.to_string(),
            target_balance,
            fallback_variant: record.seed.fallback_variant.id(),
            state: record.initial_state.clone(),
            txs,
            expect: Expectation { violation, class: v.class, at: v.tx_index },
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{SCRIPT_HEADER}");
        let _ = writeln!(out, "target {} balance {}", self.target_file, self.target_balance);
        let _ = writeln!(out, "attacker fallback {}", self.fallback_variant);
        let _ = writeln!(out, "state");
        for line in self.state.lines() {
            let _ = writeln!(out, "  {line}");
        }
        for tx in &self.txs {
            let func = if tx.function == FALLBACK_NAME {
                FALLBACK_LITERAL
            } else {
                tx.function.as_str()
            };
            let _ = writeln!(
                out,
                "tx sender={} func={} args={} value={} gas={}",
                tx.sender,
                func,
                tx.args.join(","),
                tx.value,
                tx.gas
            );
        }
        let _ = writeln!(
            out,
            "expect violation={} class={} at={}",
            self.expect.violation.as_str(),
            self.expect.class.map_or("none", ViolationClass::as_str),
            self.expect.at
        );
        out
    }

    pub fn parse(text: &str) -> Result<ExploitScript, ScriptError> {
        let mut lines = text.lines().enumerate().peekable();

        let (n, first) = lines.next().ok_or_else(|| err(1, "empty script"))?;
        if first != SCRIPT_HEADER {
            return Err(err(n + 1, format!("expected '{SCRIPT_HEADER}'")));
        }

        let (n, line) = lines.next().ok_or_else(|| err(2, "missing target line"))?;
        let rest = line
            .strip_prefix("target ")
            .ok_or_else(|| err(n + 1, "expected 'target <file> balance <dec>'"))?;
        let (file, bal) = rest
            .rsplit_once(" balance ")
            .ok_or_else(|| err(n + 1, "expected 'target <file> balance <dec>'"))?;
        let target_balance =
            bal.parse::<BigUint>().map_err(|_| err(n + 1, format!("bad balance '{bal}'")))?;

        let (n, line) = lines.next().ok_or_else(|| err(3, "missing attacker line"))?;
        let fallback_variant = line
            .strip_prefix("attacker fallback ")
            .ok_or_else(|| err(n + 1, "expected 'attacker fallback <variant-id>'"))?
            .to_string();

        let (n, line) = lines.next().ok_or_else(|| err(4, "missing state line"))?;
        if line != "state" {
            return Err(err(n + 1, "expected 'state'"));
        }
        let mut state = String::new();
        while let Some((_, l)) = lines.peek() {
            if let Some(inner) = l.strip_prefix("  ") {
                let _ = writeln!(state, "{inner}");
                lines.next();
            } else {
                break;
            }
        }

        let mut txs = Vec::new();
        let mut expect = None;
        for (i, line) in lines {
            let n = i + 1;
            if let Some(rest) = line.strip_prefix("tx ") {
                txs.push(parse_tx_line(n, rest)?);
            } else if let Some(rest) = line.strip_prefix("expect ") {
                if expect.is_some() {
                    return Err(err(n, "duplicate expect line"));
                }
                expect = Some(parse_expect_line(n, rest)?);
            } else {
                return Err(err(n, format!("unrecognized line '{line}'")));
            }
        }
        let expect = expect.ok_or_else(|| err(text.lines().count(), "missing expect line"))?;
        Ok(ExploitScript {
            target_file: file.to_string(),
            target_balance,
            fallback_variant,
            state,
            txs,
            expect,
        })
    }

    /// Types the textual transactions against a target program. The callee
    /// is derived from the sender (attacker acts through the attack
    /// contract, everyone else calls the target).
    pub fn bind_txs(&self, target: &ContractProgram) -> Result<Vec<Transaction>, ScriptError> {
        let mut out = Vec::with_capacity(self.txs.len());
        for (k, tx) in self.txs.iter().enumerate() {
            let to = if tx.sender == ATTACKER_ACCOUNT { ATTACK_ADDR } else { TARGET_ADDR };
            let args = if tx.function == FALLBACK_NAME {
                if !tx.args.is_empty() {
                    return Err(err(0, format!("tx {k}: FALLBACK takes no arguments")));
                }
                Vec::new()
            } else {
                let f = target
                    .function(&tx.function)
                    .ok_or_else(|| err(0, format!("tx {k}: unknown function '{}'", tx.function)))?;
                if f.params.len() != tx.args.len() {
                    return Err(err(
                        0,
                        format!(
                            "tx {k}: '{}' takes {} args, got {}",
                            tx.function,
                            f.params.len(),
                            tx.args.len()
                        ),
                    ));
                }
                let mut typed = Vec::with_capacity(tx.args.len());
                for (p, text) in f.params.iter().zip(&tx.args) {
                    let arg = match p.ty {
                        ParamType::Uint => Value::parse_decimal(text).map(ArgValue::Uint),
                        ParamType::Bool => match text.as_str() {
                            "true" => Some(ArgValue::Bool(true)),
                            "false" => Some(ArgValue::Bool(false)),
                            _ => None,
                        },
                        ParamType::Address => {
                            text.parse::<AccountId>().ok().map(ArgValue::Address)
                        }
                    };
                    match arg {
                        Some(a) => typed.push(a),
                        None => {
                            return Err(err(0, format!("tx {k}: bad argument '{text}'")));
                        }
                    }
                }
                typed
            };
            out.push(Transaction {
                sender: tx.sender,
                to,
                function: tx.function.clone(),
                args,
                value: Value::from_biguint(tx.value.clone()),
                gas_limit: tx.gas,
            });
        }
        Ok(out)
    }
}

fn parse_tx_line(n: usize, rest: &str) -> Result<ScriptTx, ScriptError> {
    let mut sender = None;
    let mut func = None;
    let mut args = None;
    let mut value = None;
    let mut gas = None;
    for field in rest.split_whitespace() {
        let (key, val) = field
            .split_once('=')
            .ok_or_else(|| err(n, format!("bad tx field '{field}'")))?;
        match key {
            "sender" => {
                sender = Some(
                    val.parse::<AccountId>()
                        .map_err(|_| err(n, format!("bad sender '{val}'")))?,
                )
            }
            "func" => {
                func = Some(if val == FALLBACK_LITERAL {
                    FALLBACK_NAME.to_string()
                } else {
                    val.to_string()
                })
            }
            "args" => {
                args = Some(if val.is_empty() {
                    Vec::new()
                } else {
                    val.split(',').map(str::to_string).collect()
                })
            }
            "value" => {
                value = Some(
                    val.parse::<BigUint>().map_err(|_| err(n, format!("bad value '{val}'")))?,
                )
            }
            "gas" => {
                gas =
                    Some(val.parse::<u64>().map_err(|_| err(n, format!("bad gas '{val}'")))?)
            }
            _ => return Err(err(n, format!("unknown tx field '{key}'"))),
        }
    }
    Ok(ScriptTx {
        sender: sender.ok_or_else(|| err(n, "tx missing sender"))?,
        function: func.ok_or_else(|| err(n, "tx missing func"))?,
        args: args.ok_or_else(|| err(n, "tx missing args"))?,
        value: value.ok_or_else(|| err(n, "tx missing value"))?,
        gas: gas.ok_or_else(|| err(n, "tx missing gas"))?,
    })
}

fn parse_expect_line(n: usize, rest: &str) -> Result<Expectation, ScriptError> {
    let mut violation = None;
    let mut class = None;
    let mut at = None;
    for field in rest.split_whitespace() {
        let (key, val) = field
            .split_once('=')
            .ok_or_else(|| err(n, format!("bad expect field '{field}'")))?;
        match key {
            "violation" => {
                violation = Some(match val {
                    "balance" => ViolationKind::Balance,
                    "transaction" => ViolationKind::Transaction,
                    _ => return Err(err(n, format!("bad violation kind '{val}'"))),
                })
            }
            "class" => {
                class = Some(if val == "none" {
                    None
                } else {
                    Some(
                        ViolationClass::parse(val)
                            .ok_or_else(|| err(n, format!("bad class '{val}'")))?,
                    )
                })
            }
            "at" => {
                at = Some(
                    val.parse::<usize>().map_err(|_| err(n, format!("bad index '{val}'")))?,
                )
            }
            _ => return Err(err(n, format!("unknown expect field '{key}'"))),
        }
    }
    Ok(Expectation {
        violation: violation.ok_or_else(|| err(n, "expect missing violation"))?,
        class: class.ok_or_else(|| err(n, "expect missing class"))?,
        at: at.ok_or_else(|| err(n, "expect missing at"))?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    /// The expect line was reproduced exactly.
    Match(Verdict),
    /// A violation occurred but kind, class, or index differ.
    Mismatch { expected: Expectation, got: Verdict },
    /// The whole sequence ran without any violation.
    NoViolation,
    /// The contract has no bookkeeping variable; the oracle cannot check.
    NoBookkeeping,
}

struct PreparedRun {
    world: WorldState,
    binding: Binding,
    schedule: GasSchedule,
    txs: Vec<Transaction>,
}

enum Prepared {
    Ready(Box<PreparedRun>),
    NoBookkeeping,
}

/// Builds the world a script describes: standard accounts, the recorded
/// target balance, the named fallback variant at the attack address, and
/// the state block applied on top.
fn prepare(
    script: &ExploitScript,
    target_source: &str,
    width: u32,
    funding: u64,
) -> Result<Prepared, ScriptError> {
    let target = Arc::new(
        crate::parser::parse_contract(target_source)
            .map_err(|e| err(0, format!("target contract: {e}")))?,
    );
    let schedule = GasSchedule::default();
    let plan = AttackPlan::new(Arc::clone(&target), TARGET_ADDR, schedule.reentry_allowance as u32);
    let variant = FallbackVariant::parse(&script.fallback_variant, &target)
        .map_err(|m| err(0, m))?;

    let mut world = deploy_standard_world(Arc::clone(&target), width, funding);
    world.set_balance(TARGET_ADDR, script.target_balance.clone());
    world.deploy(ATTACK_ADDR, plan.program(&variant), BigUint::zero());

    // Identification must not depend on the fuzzing run that produced the
    // script, so it uses its own fixed-seed RNG.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let vars = identify_bookkeeping(
        &mut world,
        TARGET_ADDR,
        PROBER_ACCOUNT,
        &ProbePlan::default(),
        &schedule,
        &mut rng,
    );
    if vars.is_empty() {
        return Ok(Prepared::NoBookkeeping);
    }

    if !script.state.is_empty() {
        world
            .apply_state_dump(&script.state)
            .map_err(|e| err(e.line, format!("state block: {}", e.msg)))?;
    }
    // The invariant held at every transaction between the campaign's last
    // reset and this dump, so rebinding here recovers the same constant.
    let binding = Binding::bind(&world, TARGET_ADDR, vars);

    let txs = script.bind_txs(&target)?;
    Ok(Prepared::Ready(Box::new(PreparedRun { world, binding, schedule, txs })))
}

/// Re-executes a script against a freshly built world and says whether the
/// `expect` line is reproduced. `target_source` is the contract text the
/// script's `target` line points at; the caller resolves the path.
pub fn replay(
    script: &ExploitScript,
    target_source: &str,
    width: u32,
    funding: u64,
) -> Result<ReplayOutcome, ScriptError> {
    let run = match prepare(script, target_source, width, funding)? {
        Prepared::NoBookkeeping => return Ok(ReplayOutcome::NoBookkeeping),
        Prepared::Ready(run) => run,
    };
    let PreparedRun { mut world, binding, schedule, txs } = *run;
    for (k, tx) in txs.iter().enumerate() {
        let pre = world.clone();
        let (_receipt, trace) = execute_transaction(&mut world, tx, &schedule);
        let verdict = check_tx(&binding, &pre, &world, &trace, k);
        if verdict.is_violation() {
            let e = &script.expect;
            let ok = e.violation.matches(verdict.outcome)
                && e.class == verdict.class
                && e.at == verdict.tx_index;
            return Ok(if ok {
                ReplayOutcome::Match(verdict)
            } else {
                ReplayOutcome::Mismatch { expected: e.clone(), got: verdict }
            });
        }
    }
    Ok(ReplayOutcome::NoViolation)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckOutcome {
    /// One verdict per scripted transaction, in execution order.
    Verdicts(Vec<Verdict>),
    NoBookkeeping,
}

/// Executes every scripted transaction without stopping at violations and
/// returns the full verdict stream. The script's `expect` line is ignored;
/// this is for auditing a sequence, not confirming a recorded exploit.
pub fn check_all(
    script: &ExploitScript,
    target_source: &str,
    width: u32,
    funding: u64,
) -> Result<CheckOutcome, ScriptError> {
    let run = match prepare(script, target_source, width, funding)? {
        Prepared::NoBookkeeping => return Ok(CheckOutcome::NoBookkeeping),
        Prepared::Ready(run) => run,
    };
    let PreparedRun { mut world, binding, schedule, txs } = *run;
    let mut verdicts = Vec::with_capacity(txs.len());
    for (k, tx) in txs.iter().enumerate() {
        let pre = world.clone();
        let (_receipt, trace) = execute_transaction(&mut world, tx, &schedule);
        verdicts.push(check_tx(&binding, &pre, &world, &trace, k));
    }
    Ok(CheckOutcome::Verdicts(verdicts))
}
