//! Mutation operators. Input and gas mutation act on a single transaction;
//! the sequence operators act on whole transaction lists. Contract-state
//! and fallback mutation live in the campaign, which owns the world and the
//! attack contract.

use std::collections::BTreeSet;

use num_bigint::RandBigInt;
use num_traits::Zero;
use rand::Rng;

use crate::ast::{FunctionDef, ParamType};
use crate::coverage::{DepEdge, Dictionary};
use crate::interp::{ArgValue, Transaction};
use crate::value::Value;
use crate::world::AccountId;

fn with_arg(tx: &Transaction, slot: usize, arg: ArgValue) -> Transaction {
    let mut t = tx.clone();
    t.args[slot] = arg;
    t
}

fn with_value(tx: &Transaction, value: Value) -> Transaction {
    let mut t = tx.clone();
    t.value = value;
    t
}

fn with_gas(tx: &Transaction, gas_limit: u64) -> Transaction {
    let mut t = tx.clone();
    t.gas_limit = gas_limit;
    t
}

/// Per uint slot: dictionary triads (below v, exactly v, in (v, 2v]),
/// the boundary trio, and every single-bit flip of the current value.
fn uint_candidates<R: Rng>(
    current: &Value,
    dict: &Dictionary,
    width: u32,
    rng: &mut R,
) -> Vec<Value> {
    let mut out = Vec::new();
    for v in dict.uints() {
        let m = v.magnitude();
        if !m.is_zero() {
            out.push(Value::from_biguint_wrapped(rng.gen_biguint_below(m), width));
        }
        out.push(v.clone());
        if !m.is_zero() {
            // Uniform in (v, 2v]: v + 1 + a draw below v.
            let above = m + 1u8 + rng.gen_biguint_below(m);
            out.push(Value::from_biguint_wrapped(above, width));
        }
    }
    out.push(Value::zero());
    out.push(Value::one());
    out.push(Value::max_for(width));
    for bit in 0..width {
        out.push(current.bit_flipped(bit, width));
    }
    out
}

/// One changed slot per candidate: every parameter gets its typed pool, and
/// the attached value is treated as one more uint slot when the function is
/// payable. Returns an empty list when nothing is mutable.
pub fn mutate_inputs<R: Rng>(
    tx: &Transaction,
    f: &FunctionDef,
    dict: &Dictionary,
    accounts: &[AccountId],
    width: u32,
    rng: &mut R,
) -> Vec<Transaction> {
    let mut out = Vec::new();
    for (i, p) in f.params.iter().enumerate() {
        match p.ty {
            ParamType::Uint => {
                let current = match &tx.args[i] {
                    ArgValue::Uint(v) => v.clone(),
                    _ => Value::zero(),
                };
                for v in uint_candidates(&current, dict, width, rng) {
                    out.push(with_arg(tx, i, ArgValue::Uint(v)));
                }
            }
            ParamType::Bool => {
                out.push(with_arg(tx, i, ArgValue::Bool(false)));
                out.push(with_arg(tx, i, ArgValue::Bool(true)));
            }
            ParamType::Address => {
                for a in accounts {
                    out.push(with_arg(tx, i, ArgValue::Address(*a)));
                }
            }
        }
    }
    if f.payable {
        for v in uint_candidates(&tx.value, dict, width, rng) {
            out.push(with_value(tx, v));
        }
    }
    out
}

/// Splits [g_i, g_t] into `n` equal intervals and draws one limit uniformly
/// from each; a degenerate range yields the single value g_t.
pub fn mutate_gas<R: Rng>(
    tx: &Transaction,
    g_i: u64,
    g_t: u64,
    n: u32,
    rng: &mut R,
) -> Vec<Transaction> {
    if g_i >= g_t || n == 0 {
        return vec![with_gas(tx, g_t)];
    }
    let span = g_t - g_i;
    let mut out = Vec::with_capacity(n as usize);
    for k in 1..=u64::from(n) {
        let lo = g_i + (k - 1) * span / u64::from(n);
        let hi = g_i + k * span / u64::from(n);
        let g = if lo < hi { rng.gen_range(lo..hi) } else { lo };
        out.push(with_gas(tx, g));
    }
    out
}

/// What a freshly drawn transaction may use: which accounts can sign, which
/// (address, function) entry points exist, and the address pool for address
/// arguments. `gas` is the drawn transaction's limit, precomputed per entry.
pub struct TxDraw<'a> {
    pub senders: &'a [AccountId],
    pub entries: &'a [(AccountId, &'a FunctionDef, u64)],
    pub accounts: &'a [AccountId],
    pub width: u32,
}

fn boundary_uint<R: Rng>(width: u32, rng: &mut R) -> Value {
    match rng.gen_range(0..3u8) {
        0 => Value::zero(),
        1 => Value::one(),
        _ => Value::max_for(width),
    }
}

/// Draws a transaction with a uniform entry point and boundary-pool inputs.
pub fn fresh_random_tx<R: Rng>(draw: &TxDraw, rng: &mut R) -> Option<Transaction> {
    if draw.senders.is_empty() || draw.entries.is_empty() {
        return None;
    }
    let sender = draw.senders[rng.gen_range(0..draw.senders.len())];
    let (to, f, gas_limit) = draw.entries[rng.gen_range(0..draw.entries.len())];
    let args = f
        .params
        .iter()
        .map(|p| match p.ty {
            ParamType::Uint => ArgValue::Uint(boundary_uint(draw.width, rng)),
            ParamType::Bool => ArgValue::Bool(rng.gen_range(0..2) == 1),
            ParamType::Address => {
                ArgValue::Address(draw.accounts[rng.gen_range(0..draw.accounts.len())])
            }
        })
        .collect();
    let value =
        if f.payable { boundary_uint(draw.width, rng) } else { Value::zero() };
    Some(Transaction { sender, to, function: f.name.clone(), args, value, gas_limit })
}

/// The four sequence operators: swap a dep-linked pair, replace one
/// transaction, delete one (when length allows), insert one (capped at
/// `max_len`, dropping the tail). Swap uses the dependency edges observed on
/// the sequence's own last run; the other three draw fresh transactions.
pub fn mutate_sequence<R: Rng>(
    txs: &[Transaction],
    deps: &BTreeSet<DepEdge>,
    draw: &TxDraw,
    max_len: usize,
    rng: &mut R,
) -> Vec<Vec<Transaction>> {
    let mut out = Vec::new();

    let mut swaps = 0;
    'pairs: for i in 0..txs.len() {
        for j in i + 1..txs.len() {
            let linked = deps.iter().any(|(_, _, a, b)| {
                (a == &txs[i].function && b == &txs[j].function)
                    || (a == &txs[j].function && b == &txs[i].function)
            });
            if linked {
                let mut cand = txs.to_vec();
                cand.swap(i, j);
                out.push(cand);
                swaps += 1;
                if swaps == 2 {
                    break 'pairs;
                }
            }
        }
    }

    if let Some(fresh) = fresh_random_tx(draw, rng) {
        let mut cand = txs.to_vec();
        cand[rng.gen_range(0..txs.len())] = fresh;
        out.push(cand);
    }

    if txs.len() > 1 {
        let mut cand = txs.to_vec();
        cand.remove(rng.gen_range(0..txs.len()));
        out.push(cand);
    }

    if let Some(fresh) = fresh_random_tx(draw, rng) {
        let mut cand = txs.to_vec();
        cand.insert(rng.gen_range(0..=txs.len()), fresh);
        cand.truncate(max_len);
        out.push(cand);
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{DepKind, DictValue};
    use crate::parser::parse_contract;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DAO: &str = r#"
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

    fn withdraw_tx(amount: u64) -> Transaction {
        Transaction {
            sender: 3,
            to: 4,
            function: "withdraw".to_string(),
            args: vec![ArgValue::Uint(Value::from_u64(amount))],
            value: Value::zero(),
            gas_limit: 10_000,
        }
    }

    fn deposit_tx(value: u64) -> Transaction {
        Transaction {
            sender: 3,
            to: 4,
            function: "deposit".to_string(),
            args: vec![],
            value: Value::from_u64(value),
            gas_limit: 10_000,
        }
    }

    fn arg_uints(cands: &[Transaction]) -> Vec<Value> {
        cands
            .iter()
            .filter_map(|t| match t.args.first() {
                Some(ArgValue::Uint(v)) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn dictionary_value_yields_below_equal_above() {
        let p = parse_contract(DAO).unwrap();
        let f = p.function("withdraw").unwrap();
        let mut dict = Dictionary::new(16);
        dict.insert(DictValue::Uint(Value::from_u64(5)));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cands = mutate_inputs(&withdraw_tx(10), f, &dict, &[0, 1, 2, 3, 4, 5], 64, &mut rng);
        let args = arg_uints(&cands);
        let five = Value::from_u64(5);
        let ten = Value::from_u64(10);
        assert!(args.contains(&five), "the dictionary value itself");
        assert!(
            args.iter().any(|v| v < &five),
            "one candidate strictly below the dictionary value"
        );
        assert!(
            args.iter().any(|v| v > &five && v <= &ten),
            "one candidate in (v, 2v]"
        );
    }

    #[test]
    fn empty_dictionary_leaves_boundary_and_flips() {
        let p = parse_contract(DAO).unwrap();
        let f = p.function("withdraw").unwrap();
        let dict = Dictionary::new(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let width = 8;
        let cands = mutate_inputs(&withdraw_tx(10), f, &dict, &[0, 1], width, &mut rng);
        // 3 boundaries + 8 flips for the single uint parameter, nothing else.
        assert_eq!(cands.len(), 11);
        let args = arg_uints(&cands);
        for expect in [0u64, 1, 255] {
            assert!(args.contains(&Value::from_u64(expect)), "boundary {expect}");
        }
    }

    #[test]
    fn flips_of_ten_at_width_eight_are_exact() {
        let p = parse_contract(DAO).unwrap();
        let f = p.function("withdraw").unwrap();
        let dict = Dictionary::new(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cands = mutate_inputs(&withdraw_tx(10), f, &dict, &[], 8, &mut rng);
        let args = arg_uints(&cands);
        for flip in [11u64, 8, 14, 2, 26, 42, 74, 138] {
            assert!(args.contains(&Value::from_u64(flip)), "flip {flip}");
        }
    }

    #[test]
    fn value_slot_mutates_only_when_payable() {
        let p = parse_contract(DAO).unwrap();
        let dict = Dictionary::new(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);

        let dep = mutate_inputs(
            &deposit_tx(5),
            p.function("deposit").unwrap(),
            &dict,
            &[],
            8,
            &mut rng,
        );
        assert!(!dep.is_empty(), "payable function mutates its value slot");
        assert!(dep.iter().all(|t| t.args.is_empty()));
        assert!(dep.iter().any(|t| t.value != Value::from_u64(5)));

        let wd = mutate_inputs(
            &withdraw_tx(10),
            p.function("withdraw").unwrap(),
            &dict,
            &[],
            8,
            &mut rng,
        );
        assert!(wd.iter().all(|t| t.value.is_zero()), "non-payable value stays zero");
    }

    #[test]
    fn gas_intervals_are_equal_and_half_open() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cands = mutate_gas(&withdraw_tx(1), 100, 600, 5, &mut rng);
        assert_eq!(cands.len(), 5);
        for (k, t) in cands.iter().enumerate() {
            let lo = 100 + 100 * k as u64;
            assert!(
                t.gas_limit >= lo && t.gas_limit < lo + 100,
                "candidate {k} ({}) in [{lo}, {})",
                t.gas_limit,
                lo + 100
            );
        }
    }

    #[test]
    fn degenerate_gas_range_yields_one_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cands = mutate_gas(&withdraw_tx(1), 600, 600, 5, &mut rng);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].gas_limit, 600);
    }

    // Entries borrow the program, so tests fill them in at the call site.
    fn dao_draw(accounts: &[AccountId]) -> TxDraw<'_> {
        TxDraw { senders: &[1, 3], entries: &[], accounts, width: 64 }
    }

    #[test]
    fn swap_fires_exactly_on_dep_linked_pairs() {
        let p = parse_contract(DAO).unwrap();
        let accounts = [0u32, 1, 2, 3, 4, 5];
        let mut draw = dao_draw(&accounts);
        let entries =
            [(4u32, p.function("deposit").unwrap(), 10_000u64), (4u32, p.function("withdraw").unwrap(), 10_000u64)];
        draw.entries = &entries;

        let seq = vec![withdraw_tx(10), deposit_tx(5)];
        let mut deps: BTreeSet<DepEdge> = BTreeSet::new();
        deps.insert((
            DepKind::Anti,
            (4, "balances".to_string(), Some(3)),
            "withdraw".to_string(),
            "deposit".to_string(),
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cands = mutate_sequence(&seq, &deps, &draw, 8, &mut rng);
        let swapped = vec![deposit_tx(5), withdraw_tx(10)];
        assert_eq!(cands[0], swapped, "dep-linked pair gets swapped first");

        // Without the dep edge the swap disappears but the other operators
        // still produce candidates.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let no_deps = mutate_sequence(&seq, &BTreeSet::new(), &draw, 8, &mut rng);
        assert!(no_deps.iter().all(|c| c != &swapped));
        assert!(!no_deps.is_empty());
    }

    #[test]
    fn delete_needs_length_and_insert_respects_the_cap() {
        let p = parse_contract(DAO).unwrap();
        let accounts = [0u32, 1, 2, 3, 4, 5];
        let mut draw = dao_draw(&accounts);
        let entries = [(4u32, p.function("deposit").unwrap(), 10_000u64)];
        draw.entries = &entries;

        let single = vec![deposit_tx(5)];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cands = mutate_sequence(&single, &BTreeSet::new(), &draw, 8, &mut rng);
        assert!(cands.iter().all(|c| !c.is_empty()), "no deletion below length one");

        let long: Vec<Transaction> = (0..8).map(|_| deposit_tx(1)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cands = mutate_sequence(&long, &BTreeSet::new(), &draw, 8, &mut rng);
        assert!(cands.iter().all(|c| c.len() <= 8), "insert cannot exceed the cap");
    }

    #[test]
    fn candidates_are_deterministic_for_a_fixed_seed() {
        let p = parse_contract(DAO).unwrap();
        let f = p.function("withdraw").unwrap();
        let mut dict = Dictionary::new(16);
        dict.insert(DictValue::Uint(Value::from_u64(5)));
        let a = mutate_inputs(
            &withdraw_tx(10),
            f,
            &dict,
            &[0, 1],
            64,
            &mut ChaCha8Rng::seed_from_u64(42),
        );
        let b = mutate_inputs(
            &withdraw_tx(10),
            f,
            &dict,
            &[0, 1],
            64,
            &mut ChaCha8Rng::seed_from_u64(42),
        );
        assert_eq!(a, b);
    }
}
