//! Campaign driver: owns the world, the seed pool, and the feedback loop
//! that grows the pool through the five mutation strategies.
//!
//! One campaign is strictly single-threaded; every piece of mutable state
//! (world, coverage, dictionary, RNG) lives here. Parallel evaluation runs
//! independent campaigns and merges results afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ast::{ContractProgram, FunctionDef, ParamType};
use crate::attack::{AttackPlan, FallbackVariant};
use crate::coverage::{dep_edges, rw_summary, Coverage, Dictionary, TxRw};
use crate::gas::{static_statement_count, GasSchedule};
use crate::interp::{execute_transaction, ArgValue, Transaction};
use crate::mutate::{mutate_gas, mutate_inputs, mutate_sequence, TxDraw};
use crate::oracle::{check_tx, identify_bookkeeping, Binding, ProbePlan, Verdict};
use crate::parser::{parse_contract, ParseError};
use crate::trace::EventKind;
use crate::value::Value;
use crate::world::{AccountId, WorldState};

/// Fixed account roster. Account 0 owns deployments and is never a fuzzed
/// sender, so owner-gated paths stay closed to generated transactions.
pub const OWNER_ACCOUNT: AccountId = 0;
pub const VICTIM_ACCOUNT: AccountId = 1;
pub const PROBER_ACCOUNT: AccountId = 2;
pub const ATTACKER_ACCOUNT: AccountId = 3;
pub const TARGET_ADDR: AccountId = 4;
pub const ATTACK_ADDR: AccountId = 5;

/// Senders the fuzzer draws from. The victim calls the target directly; the
/// attacker goes through the attack contract's surrogates. That pairing is
/// an invariant of every generated transaction (scripts rely on it to
/// reconstruct the callee from the sender alone).
pub const FUZZ_SENDERS: [AccountId; 2] = [VICTIM_ACCOUNT, ATTACKER_ACCOUNT];

/// Address pool offered to address-typed arguments.
pub const ACCOUNT_POOL: [AccountId; 6] = [0, 1, 2, 3, 4, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackMode {
    /// Edge coverage, dependency coverage, and the dynamic dictionary.
    Full,
    /// Edge coverage only; dependencies and dictionary are still computed
    /// but never consulted by any mutation decision.
    CfgOnly,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::Full => "full",
            FeedbackMode::CfgOnly => "cfg_only",
        }
    }

    pub fn parse(s: &str) -> Option<FeedbackMode> {
        match s {
            "full" => Some(FeedbackMode::Full),
            "cfg_only" | "cfg-only" | "cfg" => Some(FeedbackMode::CfgOnly),
            _ => None,
        }
    }
}

/// Knobs of one campaign. `budget_secs` and `max_iters` can both be set;
/// whichever trips first ends the run. Tests use iteration budgets so runs
/// stay deterministic.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub rng_seed: u64,
    pub feedback: FeedbackMode,
    pub budget_secs: Option<u64>,
    pub max_iters: Option<u64>,
    /// Stop at the first recorded exploit instead of collecting all.
    pub stop_first: bool,
    /// Redeploy target and attack contract after this many transactions.
    pub reset_period: u64,
    /// Interval count for gas-limit mutation.
    pub gas_intervals: u32,
    pub dict_cap: usize,
    /// Ceiling on new seeds admitted to the pool per iteration.
    pub pool_add_cap: usize,
    pub max_seq_len: usize,
    /// Number of initial sequences generated from the seed transactions.
    pub initial_count: usize,
    /// Starting balance of every user account.
    pub funding: u64,
    /// Machine word width in bits.
    pub width: u32,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            rng_seed: 0,
            feedback: FeedbackMode::Full,
            budget_secs: None,
            max_iters: Some(50_000),
            stop_first: false,
            reset_period: 10,
            gas_intervals: 5,
            dict_cap: 256,
            pool_add_cap: 64,
            max_seq_len: 8,
            initial_count: 8,
            funding: 100_000_000,
            width: 256,
        }
    }
}

/// One pool entry: a transaction sequence plus the attack-contract fallback
/// variant it runs under.
#[derive(Debug, Clone)]
pub struct SeedSequence {
    pub txs: Vec<Transaction>,
    pub fallback_variant: FallbackVariant,
    /// Which mutation produced this seed.
    pub provenance: &'static str,
    /// Fallback variants already tried along this seed's ancestry; children
    /// inherit the set so variant chains terminate instead of restarting.
    pub tried_variants: BTreeSet<String>,
    /// True when the last execution contributed new edge or dep coverage.
    pub favored: bool,
    executed: bool,
}

/// A recorded violation, replayable from its initial state.
#[derive(Debug, Clone)]
pub struct ExploitRecord {
    pub seed: SeedSequence,
    /// World dump taken right before the sequence's first transaction, with
    /// the seed's fallback variant already installed.
    pub initial_state: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CampaignError {
    #[error("{0}")]
    Parse(ParseError),
    #[error("no bookkeeping variable identified; the oracle cannot run")]
    NoBookkeeping,
}

/// Builds the standard six-account world: funded users 0..=3 and the target
/// deployed at address 4 with zero balance.
pub fn deploy_standard_world(
    program: Arc<ContractProgram>,
    width: u32,
    funding: u64,
) -> WorldState {
    let mut w = WorldState::new(width);
    for id in [OWNER_ACCOUNT, VICTIM_ACCOUNT, PROBER_ACCOUNT, ATTACKER_ACCOUNT] {
        w.add_user(id, BigUint::from(funding));
    }
    w.deploy(TARGET_ADDR, program, BigUint::zero());
    w
}

struct EntryGas {
    to: AccountId,
    function: String,
    g_i: u64,
    g_t: u64,
}

/// Gas the heaviest library fallback can burn; target bounds are computed
/// against it so recursion fits under the ample limit.
pub fn library_fallback_ceiling(target: &ContractProgram) -> u64 {
    let own = if target.fallback.is_some() {
        static_statement_count(target, crate::ast::FALLBACK_NAME)
    } else {
        0
    };
    own.max(30)
}

/// Extra gas one attacker-surrogate hop costs on top of the target call.
pub fn surrogate_hop_cost(schedule: &GasSchedule, n_args: usize) -> u64 {
    schedule.call_base + schedule.per_arg * n_args as u64 + 2 * schedule.per_statement
}

/// Ample gas for calling `function` through the attack contract: the
/// direct-call ceiling plus the forwarding hop.
pub fn ample_surrogate_gas(
    target: &ContractProgram,
    schedule: &GasSchedule,
    function: &FunctionDef,
) -> u64 {
    let stmts = static_statement_count(target, &function.name);
    let (_g_i, g_t) =
        schedule.gas_bounds(function.params.len(), stmts, library_fallback_ceiling(target));
    g_t + surrogate_hop_cost(schedule, function.params.len())
}

pub struct Campaign {
    pub cfg: CampaignConfig,
    /// Label written into exploit scripts (normally the source file name).
    pub label: String,
    target: Arc<ContractProgram>,
    plan: AttackPlan,
    schedule: GasSchedule,
    world: WorldState,
    pub binding: Binding,
    pool: Vec<SeedSequence>,
    cursor: usize,
    revisit: bool,
    coverage: Coverage,
    dict: Dictionary,
    pub exploits: Vec<ExploitRecord>,
    rng: ChaCha8Rng,
    tx_since_reset: u64,
    force_reset: bool,
    pub iterations: u64,
    /// 1-based iteration number of the first recorded exploit.
    pub first_exploit_iteration: Option<u64>,
    seed_txs: Vec<Transaction>,
    entry_gas: Vec<EntryGas>,
    variant_cache: BTreeMap<String, Arc<ContractProgram>>,
}

fn default_arg(p: ParamType) -> ArgValue {
    match p {
        ParamType::Uint => ArgValue::Uint(Value::one()),
        ParamType::Bool => ArgValue::Bool(false),
        ParamType::Address => ArgValue::Address(ATTACK_ADDR),
    }
}

/// Parses a contract and runs startup bookkeeping identification against a
/// fresh standard world, exactly as a campaign would. `Ok(None)` means no
/// variable survived the probe protocol.
pub fn identify_binding(
    source: &str,
    width: u32,
    funding: u64,
) -> Result<Option<Binding>, ParseError> {
    let target = Arc::new(parse_contract(source)?);
    let schedule = GasSchedule::default();
    let plan = AttackPlan::new(Arc::clone(&target), TARGET_ADDR, schedule.reentry_allowance as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut world = deploy_standard_world(Arc::clone(&target), width, funding);
    world.deploy(ATTACK_ADDR, plan.program(&FallbackVariant::Empty), BigUint::zero());
    let vars = identify_bookkeeping(
        &mut world,
        TARGET_ADDR,
        PROBER_ACCOUNT,
        &ProbePlan::default(),
        &schedule,
        &mut rng,
    );
    if vars.is_empty() {
        return Ok(None);
    }
    Ok(Some(Binding::bind(&world, TARGET_ADDR, vars)))
}

impl Campaign {
    pub fn new(label: &str, source: &str, cfg: CampaignConfig) -> Result<Campaign, CampaignError> {
        let target = Arc::new(parse_contract(source).map_err(CampaignError::Parse)?);
        let schedule = GasSchedule::default();
        let plan =
            AttackPlan::new(Arc::clone(&target), TARGET_ADDR, schedule.reentry_allowance as u32);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

        let mut world = deploy_standard_world(Arc::clone(&target), cfg.width, cfg.funding);
        world.deploy(ATTACK_ADDR, plan.program(&FallbackVariant::Empty), BigUint::zero());

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
        let binding = Binding::bind(&world, TARGET_ADDR, vars);

        let fb_max = library_fallback_ceiling(&target);
        let mut entry_gas = Vec::new();
        let mut seed_txs = Vec::new();
        for f in &target.functions {
            let stmts = static_statement_count(&target, &f.name);
            let (g_i, g_t) = schedule.gas_bounds(f.params.len(), stmts, fb_max);
            let hop = surrogate_hop_cost(&schedule, f.params.len());
            entry_gas.push(EntryGas { to: TARGET_ADDR, function: f.name.clone(), g_i, g_t });
            entry_gas.push(EntryGas {
                to: ATTACK_ADDR,
                function: f.name.clone(),
                g_i: g_i + hop,
                g_t: g_t + hop,
            });
            let args: Vec<ArgValue> = f.params.iter().map(|p| default_arg(p.ty)).collect();
            let value = if f.payable { Value::one() } else { Value::zero() };
            seed_txs.push(Transaction {
                sender: VICTIM_ACCOUNT,
                to: TARGET_ADDR,
                function: f.name.clone(),
                args: args.clone(),
                value: value.clone(),
                gas_limit: g_t,
            });
            seed_txs.push(Transaction {
                sender: ATTACKER_ACCOUNT,
                to: ATTACK_ADDR,
                function: f.name.clone(),
                args,
                value,
                gas_limit: g_t + hop,
            });
        }

        let mut c = Campaign {
            label: label.to_string(),
            target,
            plan,
            schedule,
            world,
            binding,
            pool: Vec::new(),
            cursor: 0,
            revisit: false,
            coverage: Coverage::new(),
            dict: Dictionary::new(cfg.dict_cap),
            exploits: Vec::new(),
            rng,
            tx_since_reset: 0,
            force_reset: false,
            iterations: 0,
            first_exploit_iteration: None,
            seed_txs,
            entry_gas,
            variant_cache: BTreeMap::new(),
            cfg,
        };
        c.generate_initial_sequences();
        c.cursor = c.pool.len().saturating_sub(1);
        Ok(c)
    }

    pub fn target(&self) -> &Arc<ContractProgram> {
        &self.target
    }

    pub fn pool(&self) -> &[SeedSequence] {
        &self.pool
    }

    fn generate_initial_sequences(&mut self) {
        use rand::Rng;
        for _ in 0..self.cfg.initial_count {
            if self.seed_txs.is_empty() {
                break;
            }
            let len = self.rng.gen_range(1..=4usize);
            let txs = (0..len)
                .map(|_| self.seed_txs[self.rng.gen_range(0..self.seed_txs.len())].clone())
                .collect();
            self.pool.push(SeedSequence {
                txs,
                fallback_variant: FallbackVariant::Empty,
                provenance: "initial",
                tried_variants: BTreeSet::from([FallbackVariant::Empty.id()]),
                favored: false,
                executed: false,
            });
        }
    }

    /// Round-robin over the pool; a favored seed is visited twice in a row.
    fn select_next(&mut self) -> usize {
        if self.revisit {
            self.revisit = false;
            return self.cursor;
        }
        self.cursor = (self.cursor + 1) % self.pool.len();
        if self.pool[self.cursor].favored {
            self.revisit = true;
        }
        self.cursor
    }

    fn variant_program(&mut self, v: &FallbackVariant) -> Arc<ContractProgram> {
        let id = v.id();
        if let Some(p) = self.variant_cache.get(&id) {
            return Arc::clone(p);
        }
        let p = self.plan.program(v);
        self.variant_cache.insert(id, Arc::clone(&p));
        p
    }

    /// Installs a seed's fallback variant: the attack contract is redeployed
    /// with that program, keeping its balance but dropping its storage so a
    /// stale reentry counter cannot disarm the fallback.
    fn install(&mut self, variant: &FallbackVariant) {
        let program = self.variant_program(variant);
        let bal = self.world.balance(ATTACK_ADDR);
        self.world.deploy(ATTACK_ADDR, program, bal);
    }

    /// Fresh deployments, refunded accounts, rebased oracle baseline.
    fn reset_world(&mut self) {
        let mut w = deploy_standard_world(
            Arc::clone(&self.target),
            self.cfg.width,
            self.cfg.funding,
        );
        w.deploy(ATTACK_ADDR, self.variant_program(&FallbackVariant::Empty), BigUint::zero());
        self.world = w;
        self.binding.rebind(&self.world);
        self.tx_since_reset = 0;
        self.force_reset = false;
    }

    fn gas_bounds_of(&self, tx: &Transaction) -> Option<(u64, u64)> {
        self.entry_gas
            .iter()
            .find(|e| e.to == tx.to && e.function == tx.function)
            .map(|e| (e.g_i, e.g_t))
    }

    fn callee_for(sender: AccountId) -> AccountId {
        if sender == VICTIM_ACCOUNT {
            TARGET_ADDR
        } else {
            ATTACK_ADDR
        }
    }

    /// The library a seed's fallback mutation draws from: the fixed base
    /// variants, plus dictionary-derived reentry variants in full mode.
    fn variant_library(&mut self, union_dict: &Dictionary) -> Vec<FallbackVariant> {
        let mut lib = self.plan.base_variants();
        if self.cfg.feedback == FeedbackMode::Full && !union_dict.is_empty() {
            for v in self.plan.reenter_variants_from(union_dict, &mut self.rng) {
                if lib.iter().all(|b| b.id() != v.id()) {
                    lib.push(v);
                }
            }
        }
        lib
    }

    fn child_of(
        parent: &SeedSequence,
        txs: Vec<Transaction>,
        variant: FallbackVariant,
        provenance: &'static str,
    ) -> SeedSequence {
        let mut tried = parent.tried_variants.clone();
        tried.insert(variant.id());
        SeedSequence {
            txs,
            fallback_variant: variant,
            provenance,
            tried_variants: tried,
            favored: false,
            executed: false,
        }
    }

    /// One pass of the main loop: select, execute under the oracle, mutate.
    fn run_iteration(&mut self) {
        use rand::Rng;

        if self.force_reset || self.tx_since_reset >= self.cfg.reset_period {
            self.reset_world();
        }
        let idx = self.select_next();
        let seed = self.pool[idx].clone();
        let first_run = !seed.executed;
        self.install(&seed.fallback_variant);
        let initial_state = self.world.dump_state();

        let mut seq_dict = Dictionary::new(self.cfg.dict_cap);
        let mut rws: Vec<TxRw> = Vec::new();
        let mut tx_new_edge = vec![false; seed.txs.len()];
        let mut fallback_hit = false;
        let mut violation: Option<Verdict> = None;

        for (k, tx) in seed.txs.iter().enumerate() {
            let pre = self.world.clone();
            let (_receipt, trace) = execute_transaction(&mut self.world, tx, &self.schedule);
            self.tx_since_reset += 1;
            tx_new_edge[k] = self.coverage.absorb_edges(&trace);
            self.dict.absorb_target_state(&self.world, TARGET_ADDR);
            seq_dict.absorb_target_state(&self.world, TARGET_ADDR);
            fallback_hit |= trace
                .events
                .iter()
                .any(|e| matches!(e.kind, EventKind::FallbackEnter { addr: ATTACK_ADDR, .. }));
            rws.push(rw_summary(&tx.function, &trace));
            let verdict = check_tx(&self.binding, &pre, &self.world, &trace, k);
            if verdict.is_violation() {
                violation = Some(verdict);
                break;
            }
        }

        let deps = dep_edges(&rws);
        let new_dep = self.coverage.absorb_deps(&deps);
        let new_edge_any = tx_new_edge.iter().any(|&b| b);
        {
            let s = &mut self.pool[idx];
            s.executed = true;
            s.favored = new_edge_any || new_dep;
        }

        if let Some(verdict) = violation {
            self.exploits.push(ExploitRecord {
                seed: seed.clone(),
                initial_state,
                verdict,
            });
            if self.first_exploit_iteration.is_none() {
                self.first_exploit_iteration = Some(self.iterations + 1);
            }
            // The violated world is off-baseline; start clean next round.
            self.force_reset = true;
        }

        // The dictionary consulted by mutation: campaign-global plus the
        // values this sequence just exposed. cfg_only consults nothing.
        let union_dict = match self.cfg.feedback {
            FeedbackMode::Full => {
                let mut u = self.dict.clone();
                for v in seq_dict.iter() {
                    u.insert(v.clone());
                }
                u
            }
            FeedbackMode::CfgOnly => Dictionary::new(0),
        };

        // Children are gathered most-valuable-first; the per-iteration cap
        // truncates the tail (input mutants are plentiful, variant clones
        // are scarce and load-bearing).
        let mut children: Vec<SeedSequence> = Vec::new();

        if new_edge_any && fallback_hit {
            let lib = self.variant_library(&union_dict);
            let mut spawned = Vec::new();
            for v in lib {
                let id = v.id();
                if !self.pool[idx].tried_variants.contains(&id) {
                    children.push(Self::child_of(&seed, seed.txs.clone(), v, "fallback"));
                    spawned.push(id);
                }
            }
            self.pool[idx].tried_variants.extend(spawned);
        } else if first_run {
            // Every fresh seed tries the next library variant once even
            // without the coverage guard; chains stay finite because the
            // tried set is inherited.
            let lib = self.plan.base_variants();
            if let Some(v) =
                lib.into_iter().find(|v| !self.pool[idx].tried_variants.contains(&v.id()))
            {
                let id = v.id();
                children.push(Self::child_of(&seed, seed.txs.clone(), v, "fallback"));
                self.pool[idx].tried_variants.insert(id);
            }
        }

        if self.cfg.feedback == FeedbackMode::Full && new_dep {
            let sender = FUZZ_SENDERS[self.rng.gen_range(0..FUZZ_SENDERS.len())];
            let to = Self::callee_for(sender);
            let senders = [sender];
            let entries: Vec<(AccountId, &FunctionDef, u64)> = self
                .target
                .functions
                .iter()
                .map(|f| {
                    let g = self
                        .entry_gas
                        .iter()
                        .find(|e| e.to == to && e.function == f.name)
                        .map(|e| e.g_t)
                        .unwrap_or(1_000_000);
                    (to, f, g)
                })
                .collect();
            let draw = TxDraw {
                senders: &senders,
                entries: &entries,
                accounts: &ACCOUNT_POOL,
                width: self.cfg.width,
            };
            for txs in
                mutate_sequence(&seed.txs, &deps, &draw, self.cfg.max_seq_len, &mut self.rng)
            {
                children.push(Self::child_of(
                    &seed,
                    txs,
                    seed.fallback_variant.clone(),
                    "sequence",
                ));
            }
        }

        for (k, tx) in seed.txs.iter().enumerate() {
            if !tx_new_edge[k] {
                continue;
            }
            if let Some((g_i, g_t)) = self.gas_bounds_of(tx) {
                for g in mutate_gas(tx, g_i, g_t, self.cfg.gas_intervals, &mut self.rng) {
                    let mut txs = seed.txs.clone();
                    txs[k] = g;
                    children.push(Self::child_of(
                        &seed,
                        txs,
                        seed.fallback_variant.clone(),
                        "gas",
                    ));
                }
            }
            if let Some(f) = self.target.function(&tx.function) {
                for m in mutate_inputs(
                    tx,
                    f,
                    &union_dict,
                    &ACCOUNT_POOL,
                    self.cfg.width,
                    &mut self.rng,
                ) {
                    let mut txs = seed.txs.clone();
                    txs[k] = m;
                    children.push(Self::child_of(
                        &seed,
                        txs,
                        seed.fallback_variant.clone(),
                        "input",
                    ));
                }
            }
        }

        children.truncate(self.cfg.pool_add_cap);
        self.pool.extend(children);
        self.iterations += 1;
    }

    /// Runs until the budget is exhausted (or the first exploit, when so
    /// configured). Safe to call on an exhausted campaign.
    pub fn run(&mut self) {
        self.run_until(|_| false);
    }

    /// Like `run`, but additionally stops as soon as `done` says so. The
    /// predicate is consulted after every iteration.
    pub fn run_until(&mut self, mut done: impl FnMut(&Campaign) -> bool) {
        let start = Instant::now();
        loop {
            if self.pool.is_empty() {
                return;
            }
            if let Some(m) = self.cfg.max_iters {
                if self.iterations >= m {
                    return;
                }
            }
            if let Some(s) = self.cfg.budget_secs {
                if start.elapsed().as_secs() >= s {
                    return;
                }
            }
            if self.cfg.stop_first && !self.exploits.is_empty() {
                return;
            }
            self.run_iteration();
            if done(self) {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Outcome, ViolationClass};

    const DAO_SRC: &str = r#"
        contract SimpleDAO {
            mapping(address => uint) balances;

            function deposit() payable {
                balances[msg.sender] += msg.value;
            }

            function withdraw(uint amount) {
                require(balances[msg.sender] >= amount);
                msg.sender.call.value(amount)();
                balances[msg.sender] -= amount;
            }
        }
    "#;

    const UNDERFLOW_SRC: &str = r#"
        contract Token {
            mapping(address => uint) balances;

            function deposit() payable {
                balances[msg.sender] += msg.value;
            }

            function withdraw(uint amount) {
                require(balances[msg.sender] - amount >= 0);
                msg.sender.call.value(amount)();
                balances[msg.sender] -= amount;
            }
        }
    "#;

    fn small_cfg(seed: u64, iters: u64) -> CampaignConfig {
        CampaignConfig {
            rng_seed: seed,
            max_iters: Some(iters),
            width: 64,
            ..CampaignConfig::default()
        }
    }

    #[test]
    fn initial_pool_is_deterministic_and_bounded() {
        let a = Campaign::new("dao", DAO_SRC, small_cfg(3, 0)).unwrap();
        let b = Campaign::new("dao", DAO_SRC, small_cfg(3, 0)).unwrap();
        assert_eq!(a.pool.len(), a.cfg.initial_count);
        for (x, y) in a.pool.iter().zip(&b.pool) {
            assert_eq!(x.txs, y.txs);
            assert!(!x.txs.is_empty() && x.txs.len() <= 4);
        }
        let empty = Campaign::new(
            "dao",
            DAO_SRC,
            CampaignConfig { initial_count: 0, ..small_cfg(3, 0) },
        )
        .unwrap();
        assert!(empty.pool.is_empty());
    }

    #[test]
    fn seeds_pair_senders_with_their_callee() {
        let mut c = Campaign::new("dao", DAO_SRC, small_cfg(11, 60)).unwrap();
        c.run();
        for seed in &c.pool {
            for tx in &seed.txs {
                match tx.sender {
                    VICTIM_ACCOUNT => assert_eq!(tx.to, TARGET_ADDR),
                    ATTACKER_ACCOUNT => assert_eq!(tx.to, ATTACK_ADDR),
                    s => panic!("unexpected sender {s}"),
                }
            }
        }
    }

    #[test]
    fn selection_visits_favored_twice_per_cycle() {
        let mut c = Campaign::new(
            "dao",
            DAO_SRC,
            CampaignConfig { initial_count: 2, ..small_cfg(0, 0) },
        )
        .unwrap();
        c.pool[0].favored = true;
        c.cursor = c.pool.len() - 1;
        c.revisit = false;
        let picks: Vec<usize> = (0..6).map(|_| c.select_next()).collect();
        assert_eq!(picks, vec![0, 0, 1, 0, 0, 1]);
    }

    #[test]
    fn no_bookkeeping_is_a_distinct_error() {
        let src = "contract Bare { uint x; function poke() { x += 1; } }";
        match Campaign::new("bare", src, small_cfg(0, 0)) {
            Err(CampaignError::NoBookkeeping) => {}
            Err(other) => panic!("expected NoBookkeeping, got {other:?}"),
            Ok(_) => panic!("expected NoBookkeeping, got a campaign"),
        }
    }

    #[test]
    fn fresh_seed_spawns_the_next_untried_variant() {
        let mut c = Campaign::new(
            "dao",
            DAO_SRC,
            CampaignConfig { initial_count: 1, ..small_cfg(5, 0) },
        )
        .unwrap();
        let before = c.pool.len();
        c.run_iteration();
        assert!(c.pool.len() > before);
        let child = &c.pool[before];
        assert_eq!(child.provenance, "fallback");
        assert_eq!(child.fallback_variant.id(), "throw");
        assert!(child.tried_variants.contains("empty"));
        assert!(child.tried_variants.contains("throw"));
    }

    #[test]
    fn reset_restores_a_clean_baseline() {
        let mut c = Campaign::new("dao", DAO_SRC, small_cfg(1, 0)).unwrap();
        let tx = Transaction {
            sender: VICTIM_ACCOUNT,
            to: TARGET_ADDR,
            function: "deposit".into(),
            args: vec![],
            value: Value::from_u64(40),
            gas_limit: 100_000,
        };
        execute_transaction(&mut c.world, &tx, &c.schedule);
        assert_eq!(c.world.balance(TARGET_ADDR), BigUint::from(40u32));
        c.tx_since_reset = 99;
        c.reset_world();
        assert_eq!(c.world.balance(TARGET_ADDR), BigUint::zero());
        assert_eq!(c.world.mapping_sum(TARGET_ADDR, "balances"), BigUint::zero());
        assert_eq!(c.world.balance(VICTIM_ACCOUNT), BigUint::from(c.cfg.funding));
        assert_eq!(c.binding.k, num_bigint::BigInt::from(0));
        assert_eq!(c.tx_since_reset, 0);
    }

    #[test]
    fn pool_growth_respects_the_cap() {
        let mut c = Campaign::new(
            "dao",
            DAO_SRC,
            CampaignConfig { initial_count: 4, pool_add_cap: 10, ..small_cfg(9, 0) },
        )
        .unwrap();
        for _ in 0..20 {
            let before = c.pool.len();
            c.run_iteration();
            assert!(c.pool.len() - before <= 10);
        }
    }

    #[test]
    fn underflow_violates_quickly_and_forces_a_reset() {
        let mut c = Campaign::new("token", UNDERFLOW_SRC, small_cfg(2, 120)).unwrap();
        c.run();
        assert!(!c.exploits.is_empty(), "no exploit in 120 iterations");
        let e = &c.exploits[0];
        assert_eq!(e.verdict.outcome, Outcome::BalanceViolation);
        assert_eq!(e.verdict.class, Some(ViolationClass::IntegerWrap));
        assert!(c.first_exploit_iteration.is_some());
    }

    #[test]
    fn exploits_replay_from_their_recorded_state() {
        let mut c = Campaign::new("dao", DAO_SRC, small_cfg(4, 400)).unwrap();
        c.run();
        assert!(!c.exploits.is_empty(), "no exploit in 400 iterations");
        for e in &c.exploits {
            let mut w = deploy_standard_world(Arc::clone(&c.target), c.cfg.width, c.cfg.funding);
            w.deploy(
                ATTACK_ADDR,
                c.plan.program(&e.seed.fallback_variant),
                BigUint::zero(),
            );
            w.apply_state_dump(&e.initial_state).unwrap();
            let binding = Binding::bind(&w, TARGET_ADDR, c.binding.vars.clone());
            let mut reproduced = None;
            for (k, tx) in e.seed.txs.iter().enumerate() {
                let pre = w.clone();
                let (_r, trace) = execute_transaction(&mut w, tx, &c.schedule);
                let v = check_tx(&binding, &pre, &w, &trace, k);
                if v.is_violation() {
                    reproduced = Some(v);
                    break;
                }
            }
            let v = reproduced.expect("replay produced no violation");
            assert_eq!(v.tx_index, e.verdict.tx_index);
            assert_eq!(v.outcome, e.verdict.outcome);
            assert_eq!(v.class, e.verdict.class);
        }
    }

    #[test]
    fn full_runs_are_deterministic() {
        let run = || {
            let mut c = Campaign::new("dao", DAO_SRC, small_cfg(7, 300)).unwrap();
            c.run();
            (
                c.iterations,
                c.pool.len(),
                c.exploits
                    .iter()
                    .map(|e| (e.seed.txs.clone(), e.verdict.render()))
                    .collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stop_first_halts_at_one_exploit() {
        let mut c = Campaign::new(
            "token",
            UNDERFLOW_SRC,
            CampaignConfig { stop_first: true, ..small_cfg(2, 500) },
        )
        .unwrap();
        c.run();
        assert_eq!(c.exploits.len(), 1);
        assert!(c.iterations < 500);
    }

    #[test]
    fn cfg_only_never_grows_sequence_mutants() {
        let mut c = Campaign::new(
            "dao",
            DAO_SRC,
            CampaignConfig { feedback: FeedbackMode::CfgOnly, ..small_cfg(6, 250) },
        )
        .unwrap();
        c.run();
        assert!(c.pool.iter().all(|s| s.provenance != "sequence"));

        let mut f = Campaign::new("dao", DAO_SRC, small_cfg(6, 250)).unwrap();
        f.run();
        assert!(
            f.pool.iter().any(|s| s.provenance == "sequence"),
            "full mode never exercised sequence mutation in 250 iterations"
        );
    }

    #[test]
    fn dao_exploit_is_found_and_classified() {
        let mut c = Campaign::new("dao", DAO_SRC, small_cfg(4, 400)).unwrap();
        c.run();
        let classes: Vec<_> = c.exploits.iter().filter_map(|e| e.verdict.class).collect();
        assert!(
            classes.contains(&ViolationClass::Reentrancy)
                || classes.contains(&ViolationClass::IntegerWrap)
                || classes.contains(&ViolationClass::ExceptionDisorder),
            "unexpected classes: {classes:?}"
        );
        assert!(c.exploits.iter().all(|e| e.verdict.is_violation()));
    }
}
