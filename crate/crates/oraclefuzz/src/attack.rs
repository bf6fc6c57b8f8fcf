//! Attack contract synthesis. The fuzzer drives the target through a
//! generated companion contract: one forwarding surrogate per target
//! function, plus a swappable fallback drawn from a small library. The
//! interesting behavior lives in the fallback; surrogates exist so every
//! target entry point is reachable with the attack contract as sender.

use std::sync::Arc;

use rand::Rng;

use crate::ast::{ContractProgram, ParamType};
use crate::coverage::{DictValue, Dictionary};
use crate::interp::ArgValue;
use crate::parser::parse_contract;
use crate::value::Value;
use crate::world::AccountId;

pub const ATTACK_CONTRACT_NAME: &str = "Attack";

/// One fallback body from the library. Reentry variants bake their call
/// arguments so a variant id alone reproduces the exact behavior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FallbackVariant {
    /// Accept money, do nothing.
    Empty,
    /// Reject every incoming transfer.
    Throw,
    /// Thirty padding statements: more than a send stipend can pay for.
    Bomb30,
    /// Re-enter one target function while its payout is still in flight.
    Reenter { function: String, args: Vec<ArgValue> },
}

fn render_arg(a: &ArgValue) -> String {
    match a {
        ArgValue::Uint(v) => format!("{v}"),
        ArgValue::Bool(b) => b.to_string(),
        ArgValue::Address(a) => a.to_string(),
    }
}

impl FallbackVariant {
    pub fn id(&self) -> String {
        match self {
            FallbackVariant::Empty => "empty".to_string(),
            FallbackVariant::Throw => "throw".to_string(),
            FallbackVariant::Bomb30 => "bomb30".to_string(),
            FallbackVariant::Reenter { function, args } => {
                if args.is_empty() {
                    format!("reenter:{function}")
                } else {
                    let rendered: Vec<String> = args.iter().map(render_arg).collect();
                    format!("reenter:{function}:{}", rendered.join(","))
                }
            }
        }
    }

    /// Parses a variant id. Reentry arguments are typed against the target's
    /// function signature, which is why the target program is needed.
    pub fn parse(id: &str, target: &ContractProgram) -> Result<FallbackVariant, String> {
        match id {
            "empty" => return Ok(FallbackVariant::Empty),
            "throw" => return Ok(FallbackVariant::Throw),
            "bomb30" => return Ok(FallbackVariant::Bomb30),
            _ => {}
        }
        let Some(rest) = id.strip_prefix("reenter:") else {
            return Err(format!("unknown fallback variant '{id}'"));
        };
        let (fname, arg_text) = match rest.split_once(':') {
            Some((f, a)) => (f, a),
            None => (rest, ""),
        };
        let Some(f) = target.function(fname) else {
            return Err(format!("variant re-enters unknown function '{fname}'"));
        };
        let pieces: Vec<&str> =
            if arg_text.is_empty() { Vec::new() } else { arg_text.split(',').collect() };
        if pieces.len() != f.params.len() {
            return Err(format!(
                "variant for '{fname}' has {} args, function takes {}",
                pieces.len(),
                f.params.len()
            ));
        }
        let mut args = Vec::with_capacity(pieces.len());
        for (p, text) in f.params.iter().zip(pieces) {
            let arg = match p.ty {
                ParamType::Uint => Value::parse_decimal(text).map(ArgValue::Uint),
                ParamType::Bool => match text {
                    "true" => Some(ArgValue::Bool(true)),
                    "false" => Some(ArgValue::Bool(false)),
                    _ => None,
                },
                ParamType::Address => text.parse::<AccountId>().ok().map(ArgValue::Address),
            };
            match arg {
                Some(a) => args.push(a),
                None => return Err(format!("bad argument '{text}' for '{fname}'")),
            }
        }
        Ok(FallbackVariant::Reenter { function: fname.to_string(), args })
    }
}

/// Deterministic synthesis plan for the attack contract against one target.
#[derive(Debug, Clone)]
pub struct AttackPlan {
    pub target: Arc<ContractProgram>,
    pub target_addr: AccountId,
    /// Reentry fallbacks stop after this many self-triggered entries, so
    /// recursion depth is bounded by the guard, not by the interpreter.
    pub reentry_allowance: u32,
}

fn default_arg(ty: ParamType) -> ArgValue {
    match ty {
        // Zero would make most reentries vacuous; one moves real value.
        ParamType::Uint => ArgValue::Uint(Value::one()),
        ParamType::Bool => ArgValue::Bool(false),
        ParamType::Address => ArgValue::Address(3),
    }
}

impl AttackPlan {
    pub fn new(target: Arc<ContractProgram>, target_addr: AccountId, reentry_allowance: u32) -> Self {
        AttackPlan { target, target_addr, reentry_allowance }
    }

    /// The library in its canonical order: empty, throw, one reentry per
    /// target function with default arguments, then the gas bomb.
    pub fn base_variants(&self) -> Vec<FallbackVariant> {
        let mut out = vec![FallbackVariant::Empty, FallbackVariant::Throw];
        for f in &self.target.functions {
            out.push(FallbackVariant::Reenter {
                function: f.name.clone(),
                args: f.params.iter().map(|p| default_arg(p.ty)).collect(),
            });
        }
        out.push(FallbackVariant::Bomb30);
        out
    }

    /// Reentry variants with arguments drawn from the dictionary; one per
    /// target function, falling back to the defaults when the dictionary has
    /// nothing of a suitable type.
    pub fn reenter_variants_from<R: Rng>(
        &self,
        dict: &Dictionary,
        rng: &mut R,
    ) -> Vec<FallbackVariant> {
        let uints: Vec<Value> = dict.uints();
        let addrs: Vec<AccountId> = dict
            .iter()
            .filter_map(|d| match d {
                DictValue::Address(a) => Some(*a),
                _ => None,
            })
            .collect();
        self.target
            .functions
            .iter()
            .map(|f| {
                let args = f
                    .params
                    .iter()
                    .map(|p| match p.ty {
                        ParamType::Uint if !uints.is_empty() => {
                            ArgValue::Uint(uints[rng.gen_range(0..uints.len())].clone())
                        }
                        ParamType::Address if !addrs.is_empty() => {
                            ArgValue::Address(addrs[rng.gen_range(0..addrs.len())])
                        }
                        ParamType::Bool => ArgValue::Bool(rng.gen_range(0..2) == 1),
                        ty => default_arg(ty),
                    })
                    .collect();
                FallbackVariant::Reenter { function: f.name.clone(), args }
            })
            .collect()
    }

    /// Emits the attack contract's source with the given fallback installed.
    pub fn source(&self, variant: &FallbackVariant) -> String {
        let mut src = String::new();
        src.push_str(&format!("contract {ATTACK_CONTRACT_NAME} {{\n"));
        src.push_str(&format!("    address target = address({});\n", self.target_addr));
        src.push_str("    uint count;\n");
        for f in &self.target.functions {
            let params: Vec<String> = f
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let ty = match p.ty {
                        ParamType::Uint => "uint",
                        ParamType::Bool => "bool",
                        ParamType::Address => "address",
                    };
                    format!("{ty} a{i}")
                })
                .collect();
            let names: Vec<String> = (0..f.params.len()).map(|i| format!("a{i}")).collect();
            let payable = if f.payable { " payable" } else { "" };
            src.push_str(&format!("    function {}({}){payable} {{\n", f.name, params.join(", ")));
            if f.payable {
                src.push_str(&format!(
                    "        target.{}.value(msg.value)({});\n",
                    f.name,
                    names.join(", ")
                ));
            } else {
                src.push_str(&format!("        target.{}({});\n", f.name, names.join(", ")));
            }
            src.push_str("    }\n");
        }
        src.push_str("    function() payable {\n");
        match variant {
            FallbackVariant::Empty => {}
            FallbackVariant::Throw => src.push_str("        throw;\n"),
            FallbackVariant::Bomb30 => {
                for _ in 0..30 {
                    src.push_str("        require(true);\n");
                }
            }
            FallbackVariant::Reenter { function, args } => {
                let rendered: Vec<String> = args
                    .iter()
                    .map(|a| match a {
                        ArgValue::Uint(v) => format!("{v}"),
                        ArgValue::Bool(b) => b.to_string(),
                        ArgValue::Address(a) => format!("address({a})"),
                    })
                    .collect();
                src.push_str(&format!("        if (count < {}) {{\n", self.reentry_allowance));
                src.push_str("            count += 1;\n");
                src.push_str(&format!(
                    "            target.{}({});\n",
                    function,
                    rendered.join(", ")
                ));
                src.push_str("        }\n");
            }
        }
        src.push_str("    }\n}\n");
        src
    }

    /// Parses the synthesized source. The output is deterministic for a
    /// given target and variant.
    pub fn program(&self, variant: &FallbackVariant) -> Arc<ContractProgram> {
        let src = self.source(variant);
        Arc::new(parse_contract(&src).expect("synthesized attack contract parses"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::GasSchedule;
    use crate::interp::{execute_transaction, Transaction};
    use crate::world::WorldState;
    use num_bigint::BigUint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SIMPLE_DAO: &str = r#"
        contract SimpleDAO {
            mapping(address => uint) balances;
            function deposit() payable {
                balances[msg.sender] += msg.value;
            }
            function withdraw(uint amount) {
                if (balances[msg.sender] >= amount) {
                    msg.sender.call.value(amount)();
                    balances[msg.sender] -= amount;
                }
            }
        }
    "#;

    fn dao_plan() -> AttackPlan {
        let target = Arc::new(parse_contract(SIMPLE_DAO).unwrap());
        AttackPlan::new(target, 4, 8)
    }

    #[test]
    fn library_covers_every_target_function() {
        let plan = dao_plan();
        let ids: Vec<String> = plan.base_variants().iter().map(FallbackVariant::id).collect();
        assert_eq!(ids, vec!["empty", "throw", "reenter:deposit", "reenter:withdraw:1", "bomb30"]);
    }

    #[test]
    fn zero_function_target_keeps_only_the_generic_variants() {
        let src = "contract Vault { uint hoard; }";
        let target = Arc::new(parse_contract(src).unwrap());
        let plan = AttackPlan::new(target, 4, 8);
        let ids: Vec<String> = plan.base_variants().iter().map(FallbackVariant::id).collect();
        assert_eq!(ids, vec!["empty", "throw", "bomb30"]);
        // No surrogates either: the synthesized contract has no named functions.
        assert!(plan.program(&FallbackVariant::Empty).functions.is_empty());
    }

    #[test]
    fn variant_ids_round_trip() {
        let plan = dao_plan();
        for v in plan.base_variants() {
            let back = FallbackVariant::parse(&v.id(), &plan.target).unwrap();
            assert_eq!(back, v);
        }
        assert!(FallbackVariant::parse("reenter:nope", &plan.target).is_err());
        assert!(FallbackVariant::parse("reenter:withdraw:1,2", &plan.target).is_err());
        assert!(FallbackVariant::parse("lavish", &plan.target).is_err());
    }

    #[test]
    fn synthesis_is_deterministic() {
        let plan = dao_plan();
        let v = FallbackVariant::Reenter {
            function: "withdraw".to_string(),
            args: vec![ArgValue::Uint(Value::from_u64(3))],
        };
        assert_eq!(plan.source(&v), plan.source(&v));
        assert_eq!(v.id(), "reenter:withdraw:3");
    }

    #[test]
    fn dictionary_values_feed_reentry_arguments() {
        let plan = dao_plan();
        let mut dict = Dictionary::new(16);
        dict.insert(DictValue::Uint(Value::from_u64(5)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let variants = plan.reenter_variants_from(&dict, &mut rng);
        let ids: Vec<String> = variants.iter().map(FallbackVariant::id).collect();
        assert_eq!(ids, vec!["reenter:deposit", "reenter:withdraw:5"]);
    }

    #[test]
    fn reenter_withdraw_replays_the_recursion() {
        let plan = dao_plan();
        let v = FallbackVariant::Reenter {
            function: "withdraw".to_string(),
            args: vec![ArgValue::Uint(Value::from_u64(3))],
        };
        let mut w = WorldState::new(64);
        for id in [0u32, 1, 3] {
            w.add_user(id, BigUint::from(100_000_000u64));
        }
        w.deploy(4, Arc::clone(&plan.target), BigUint::from(0u8));
        w.deploy(5, plan.program(&v), BigUint::from(0u8));

        let sched = GasSchedule::default();
        // Give the target a victim's float so nested payouts can be paid.
        let fund = Transaction {
            sender: 1,
            to: 4,
            function: "deposit".to_string(),
            args: vec![],
            value: Value::from_u64(100),
            gas_limit: 1_000_000,
        };
        let (r0, _) = execute_transaction(&mut w, &fund, &sched);
        assert!(r0.status.is_committed());
        let deposit = Transaction {
            sender: 3,
            to: 5,
            function: "deposit".to_string(),
            args: vec![],
            value: Value::from_u64(5),
            gas_limit: 1_000_000,
        };
        let (r1, _) = execute_transaction(&mut w, &deposit, &sched);
        assert!(r1.status.is_committed());
        assert_eq!(w.read_map(4, "balances", 5), Value::from_u64(5));

        let withdraw = Transaction {
            sender: 3,
            to: 5,
            function: "withdraw".to_string(),
            args: vec![ArgValue::Uint(Value::from_u64(3))],
            value: Value::zero(),
            gas_limit: 1_000_000,
        };
        let (r2, trace) = execute_transaction(&mut w, &withdraw, &sched);
        assert!(r2.status.is_committed());
        assert!(trace.max_fallback_depth() >= 2, "recursion re-entered the target");
    }

    #[test]
    fn surrogates_forward_value_untouched() {
        let plan = dao_plan();
        let mut w = WorldState::new(64);
        w.add_user(3, BigUint::from(1_000u64));
        w.deploy(4, Arc::clone(&plan.target), BigUint::from(0u8));
        w.deploy(5, plan.program(&FallbackVariant::Empty), BigUint::from(0u8));
        let deposit = Transaction {
            sender: 3,
            to: 5,
            function: "deposit".to_string(),
            args: vec![],
            value: Value::from_u64(7),
            gas_limit: 1_000_000,
        };
        let (r, _) = execute_transaction(&mut w, &deposit, &GasSchedule::default());
        assert!(r.status.is_committed());
        // Money and books both land on the attack contract's address.
        assert_eq!(w.balance(4), BigUint::from(7u8));
        assert_eq!(w.balance(5), BigUint::from(0u8));
        assert_eq!(w.read_map(4, "balances", 5), Value::from_u64(7));
    }
}
