//! Exhaustive attacker enumeration: the ground-truth oracle the fuzzer is
//! cross-checked against.
//!
//! The enumerated universe is deliberately small and exactly specified:
//! every sequence of at most `max_len` attacker calls routed through the
//! attack contract's surrogates, over the target's uint-only functions,
//! with every argument and call value drawn from `0..=max_magnitude`, run
//! once per base fallback variant, each from a fresh deployment at ample
//! gas. A configuration is violating when the oracle flags any of its
//! transactions. Fuzzer exploits that fall inside this universe must map
//! to configurations this enumeration also finds.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ast::{ContractProgram, ParamType};
use crate::attack::{AttackPlan, FallbackVariant};
use crate::campaign::{
    ample_surrogate_gas, deploy_standard_world, CampaignError, ExploitRecord, ATTACKER_ACCOUNT,
    ATTACK_ADDR, PROBER_ACCOUNT, TARGET_ADDR,
};
use crate::gas::GasSchedule;
use crate::interp::{execute_transaction, ArgValue, Transaction};
use crate::oracle::{check_tx, identify_bookkeeping, Binding, ProbePlan};
use crate::parser::parse_contract;
use crate::value::Value;

#[derive(Debug, Clone)]
pub struct ExhaustiveConfig {
    pub max_len: usize,
    /// Inclusive ceiling for every uint argument and call value.
    pub max_magnitude: u64,
    pub width: u32,
    pub funding: u64,
}

impl Default for ExhaustiveConfig {
    fn default() -> Self {
        ExhaustiveConfig {
            max_len: 3,
            max_magnitude: 8,
            width: crate::value::DEFAULT_WIDTH,
            funding: 100_000_000,
        }
    }
}

/// One attacker call: target function name, uint arguments, call value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AttackStep {
    pub function: String,
    pub args: Vec<u64>,
    pub value: u64,
}

/// A full configuration: which fallback the attack contract runs and the
/// call sequence fired at it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AttackConfig {
    pub variant: String,
    pub steps: Vec<AttackStep>,
}

fn step_choices(target: &ContractProgram, cfg: &ExhaustiveConfig) -> Vec<AttackStep> {
    let mut out = Vec::new();
    for f in &target.functions {
        if f.params.iter().any(|p| p.ty != ParamType::Uint) {
            continue;
        }
        let values: Vec<u64> =
            if f.payable { (0..=cfg.max_magnitude).collect() } else { vec![0] };
        let mut arg_sets: Vec<Vec<u64>> = vec![Vec::new()];
        for _ in 0..f.params.len() {
            let mut next = Vec::new();
            for prefix in &arg_sets {
                for v in 0..=cfg.max_magnitude {
                    let mut a = prefix.clone();
                    a.push(v);
                    next.push(a);
                }
            }
            arg_sets = next;
        }
        for args in &arg_sets {
            for &value in &values {
                out.push(AttackStep { function: f.name.clone(), args: args.clone(), value });
            }
        }
    }
    out
}

fn step_tx(step: &AttackStep, gas: u64) -> Transaction {
    Transaction {
        sender: ATTACKER_ACCOUNT,
        to: ATTACK_ADDR,
        function: step.function.clone(),
        args: step.args.iter().map(|&v| ArgValue::Uint(Value::from_u64(v))).collect(),
        value: Value::from_u64(step.value),
        gas_limit: gas,
    }
}

/// The world every enumerated run (and a fuzzer run right after a reset)
/// starts from: fresh deployment with the given fallback installed.
pub fn fresh_dump_with_variant(
    target: &Arc<ContractProgram>,
    plan: &AttackPlan,
    variant: &FallbackVariant,
    cfg: &ExhaustiveConfig,
) -> String {
    let mut w = deploy_standard_world(Arc::clone(target), cfg.width, cfg.funding);
    w.deploy(ATTACK_ADDR, plan.program(variant), BigUint::zero());
    w.dump_state()
}

/// Runs the whole universe and returns every violating configuration.
pub fn enumerate_attacker_violations(
    source: &str,
    cfg: &ExhaustiveConfig,
) -> Result<BTreeSet<AttackConfig>, CampaignError> {
    let target = Arc::new(parse_contract(source).map_err(CampaignError::Parse)?);
    let schedule = GasSchedule::default();
    let plan = AttackPlan::new(Arc::clone(&target), TARGET_ADDR, schedule.reentry_allowance as u32);

    let mut world = deploy_standard_world(Arc::clone(&target), cfg.width, cfg.funding);
    world.deploy(ATTACK_ADDR, plan.program(&FallbackVariant::Empty), BigUint::zero());
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
        return Err(CampaignError::NoBookkeeping);
    }

    let choices = step_choices(&target, cfg);
    let gas: Vec<u64> = choices
        .iter()
        .map(|s| {
            let f = target.function(&s.function).expect("choice functions exist");
            ample_surrogate_gas(&target, &schedule, f)
        })
        .collect();
    let variants = plan.base_variants();
    let programs: Vec<_> = variants.iter().map(|v| plan.program(v)).collect();

    let mut found = BTreeSet::new();
    // Odometer over sequences of each length; index i selects choices[i].
    for len in 1..=cfg.max_len {
        let mut idx = vec![0usize; len];
        loop {
            for (variant, program) in variants.iter().zip(&programs) {
                let mut w = deploy_standard_world(Arc::clone(&target), cfg.width, cfg.funding);
                w.deploy(ATTACK_ADDR, Arc::clone(program), BigUint::zero());
                let binding = Binding::bind(&w, TARGET_ADDR, vars.clone());
                for (k, &i) in idx.iter().enumerate() {
                    let tx = step_tx(&choices[i], gas[i]);
                    let pre = w.clone();
                    let (_r, trace) = execute_transaction(&mut w, &tx, &schedule);
                    let v = check_tx(&binding, &pre, &w, &trace, k);
                    if v.is_violation() {
                        found.insert(AttackConfig {
                            variant: variant.id(),
                            steps: idx.iter().map(|&i| choices[i].clone()).collect(),
                        });
                        break;
                    }
                }
            }
            // Advance the odometer.
            let mut pos = len;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < choices.len() {
                    break;
                }
                idx[pos] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    Ok(found)
}

/// Maps a recorded fuzzer exploit into the enumerated universe, or says
/// why it falls outside. Inside means: attacker-only senders, length
/// within bounds, uint magnitudes within bounds, a base-library fallback,
/// ample (unmutated) gas, and a fresh-deployment starting state.
pub fn normalize_exploit(
    record: &ExploitRecord,
    target: &Arc<ContractProgram>,
    cfg: &ExhaustiveConfig,
) -> Option<AttackConfig> {
    let schedule = GasSchedule::default();
    let plan = AttackPlan::new(Arc::clone(target), TARGET_ADDR, schedule.reentry_allowance as u32);
    let base_ids: BTreeSet<String> =
        plan.base_variants().iter().map(FallbackVariant::id).collect();
    if !base_ids.contains(&record.seed.fallback_variant.id()) {
        return None;
    }
    // Only the prefix up to the violating transaction ever ran; that
    // prefix is the configuration the enumeration must also flag.
    let executed = &record.seed.txs[..=record.verdict.tx_index.min(record.seed.txs.len() - 1)];
    if executed.is_empty() || executed.len() > cfg.max_len {
        return None;
    }
    if fresh_dump_with_variant(target, &plan, &record.seed.fallback_variant, cfg)
        != record.initial_state
    {
        return None;
    }
    let mut steps = Vec::new();
    for tx in executed {
        if tx.sender != ATTACKER_ACCOUNT || tx.to != ATTACK_ADDR {
            return None;
        }
        let f = target.function(&tx.function)?;
        if tx.gas_limit != ample_surrogate_gas(target, &schedule, f) {
            return None;
        }
        let mut args = Vec::new();
        for a in &tx.args {
            match a {
                ArgValue::Uint(v) => {
                    let m = v.to_u64_saturating();
                    if m > cfg.max_magnitude {
                        return None;
                    }
                    args.push(m);
                }
                _ => return None,
            }
        }
        let value = tx.value.to_u64_saturating();
        if value > cfg.max_magnitude {
            return None;
        }
        steps.push(AttackStep { function: tx.function.clone(), args, value });
    }
    Some(AttackConfig { variant: record.seed.fallback_variant.id(), steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::{Campaign, CampaignConfig};
    use crate::corpus;

    fn tiny_cfg() -> ExhaustiveConfig {
        // Narrow universe keeps unit runtime low; the acceptance suite
        // runs the full one.
        ExhaustiveConfig { max_len: 2, max_magnitude: 3, width: 64, funding: 100_000_000 }
    }

    #[test]
    fn step_choices_cover_args_and_values() {
        let src = corpus::find("simple_dao.msol").unwrap().source;
        let target = parse_contract(src).unwrap();
        let steps = step_choices(&target, &tiny_cfg());
        // deposit: 4 values; withdraw: 4 args at value 0.
        assert_eq!(steps.len(), 8);
        assert!(steps.iter().any(|s| s.function == "deposit" && s.value == 3));
        assert!(steps.iter().any(|s| s.function == "withdraw" && s.args == vec![2]));
    }

    #[test]
    fn reentrant_target_has_violations_and_clean_target_has_none() {
        let dao = corpus::find("simple_dao.msol").unwrap().source;
        let found = enumerate_attacker_violations(dao, &tiny_cfg()).unwrap();
        assert!(!found.is_empty());
        assert!(found.iter().any(|c| c.variant.starts_with("reenter:")));

        let safe = corpus::find("store_safe.msol").unwrap().source;
        let none = enumerate_attacker_violations(safe, &tiny_cfg()).unwrap();
        assert!(none.is_empty(), "unexpected: {:?}", none.iter().next());
    }

    #[test]
    fn no_bookkeeping_is_propagated() {
        let src = corpus::find("decoy_no_mapping.msol").unwrap().source;
        match enumerate_attacker_violations(src, &tiny_cfg()) {
            Err(CampaignError::NoBookkeeping) => {}
            other => panic!("expected NoBookkeeping, got {:?}", other.map(|s| s.len())),
        }
    }

    #[test]
    fn in_universe_fuzzer_exploits_are_in_the_violating_set() {
        let src = corpus::find("underflow.msol").unwrap().source;
        let cfg = tiny_cfg();
        let found = enumerate_attacker_violations(src, &cfg).unwrap();
        assert!(!found.is_empty());

        let camp_cfg = CampaignConfig {
            rng_seed: 1,
            max_iters: Some(600),
            width: cfg.width,
            ..CampaignConfig::default()
        };
        let mut c = Campaign::new("underflow.msol", src, camp_cfg).unwrap();
        c.run();
        assert!(!c.exploits.is_empty());
        let target = Arc::new(parse_contract(src).unwrap());
        let mut qualified = 0;
        for e in &c.exploits {
            if let Some(config) = normalize_exploit(e, &target, &cfg) {
                qualified += 1;
                assert!(
                    found.contains(&config),
                    "fuzzer found {config:?} but enumeration did not"
                );
            }
        }
        assert!(qualified > 0, "no fuzzer exploit fell inside the universe");
    }
}
