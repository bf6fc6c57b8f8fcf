//! Transaction interpreter with gas metering and full tracing.
//!
//! Exception semantics mirror the usual chain behavior:
//! - `send` / `call.value` failures undo the callee and evaluate to false;
//! - `transfer` failures and named-call failures revert the enclosing scope;
//! - value arriving at a non-payable named function, at a contract without
//!   a fallback, or with an unknown function is a failed precondition;
//! - a payer without funds fails before the callee runs.
//!
//! Every value transfer to a contract dispatches its fallback, even for
//! amount zero. User accounts accept transfers unconditionally.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::ast::*;
use crate::gas::{GasPool, GasSchedule};
use crate::trace::{
    EventKind, ExceptionKind, FrameId, HandledAs, Trace, TransferKind, WrapOp,
};
use crate::value::Value;
use crate::world::{AccountId, StorageVal, WorldState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgValue {
    Uint(Value),
    Bool(bool),
    Address(AccountId),
}

impl ArgValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            ArgValue::Uint(_) => "uint",
            ArgValue::Bool(_) => "bool",
            ArgValue::Address(_) => "address",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub sender: AccountId,
    pub to: AccountId,
    /// `FALLBACK_NAME` makes this a bare value transfer.
    pub function: String,
    pub args: Vec<ArgValue>,
    pub value: Value,
    pub gas_limit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxStatus {
    Committed,
    Reverted(ExceptionKind),
}

impl TxStatus {
    pub fn is_committed(&self) -> bool {
        matches!(self, TxStatus::Committed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub status: TxStatus,
    pub gas_used: u64,
}

/// Runs one transaction against the world. The world is left committed or
/// untouched; the trace always reflects everything that executed.
pub fn execute_transaction(
    world: &mut WorldState,
    tx: &Transaction,
    schedule: &GasSchedule,
) -> (Receipt, Trace) {
    let width = world.width;
    let mut interp = Interp {
        world,
        schedule,
        width,
        trace: Trace::new(),
        gas: GasPool::new(tx.gas_limit),
        frame: 0,
        fallback_depths: BTreeMap::new(),
    };
    let pre = interp.world.clone();
    let result = interp.run_root(tx);
    debug_assert_eq!(interp.gas.depth(), 1);
    let gas_used = tx.gas_limit - interp.gas.remaining();
    let status = match result {
        Ok(()) => TxStatus::Committed,
        Err(kind) => {
            *interp.world = pre;
            interp.trace.mark_reverted(0);
            TxStatus::Reverted(kind)
        }
    };
    (Receipt { status, gas_used }, interp.trace)
}

#[derive(Debug, Clone)]
enum RtVal {
    Uint(Value),
    Bool(bool),
    Address(AccountId),
}

impl RtVal {
    fn as_uint(&self) -> Value {
        match self {
            RtVal::Uint(v) => v.clone(),
            _ => unreachable!("static checker guarantees uint"),
        }
    }

    fn as_bool(&self) -> bool {
        match self {
            RtVal::Bool(b) => *b,
            _ => unreachable!("static checker guarantees bool"),
        }
    }

    fn as_address(&self) -> AccountId {
        match self {
            RtVal::Address(a) => *a,
            _ => unreachable!("static checker guarantees address"),
        }
    }

    fn same_type(&self, other: &RtVal) -> bool {
        matches!(
            (self, other),
            (RtVal::Uint(_), RtVal::Uint(_))
                | (RtVal::Bool(_), RtVal::Bool(_))
                | (RtVal::Address(_), RtVal::Address(_))
        )
    }

    fn eq_val(&self, other: &RtVal) -> bool {
        match (self, other) {
            (RtVal::Uint(a), RtVal::Uint(b)) => a == b,
            (RtVal::Bool(a), RtVal::Bool(b)) => a == b,
            (RtVal::Address(a), RtVal::Address(b)) => a == b,
            _ => unreachable!("static checker guarantees matching types"),
        }
    }
}

fn storage_as_value(v: &StorageVal) -> Value {
    match v {
        StorageVal::Uint(u) => u.clone(),
        StorageVal::Bool(b) => Value::from(u64::from(*b)),
        StorageVal::Address(a) => Value::from(u64::from(*a)),
    }
}

struct Ctx {
    this: AccountId,
    sender: AccountId,
    value: Value,
    params: BTreeMap<String, RtVal>,
}

struct Interp<'a> {
    world: &'a mut WorldState,
    schedule: &'a GasSchedule,
    width: u32,
    trace: Trace,
    gas: GasPool,
    frame: FrameId,
    fallback_depths: BTreeMap<AccountId, u32>,
}

impl<'a> Interp<'a> {
    fn record(&mut self, kind: EventKind) {
        self.trace.record(self.frame, kind);
    }

    /// Records the exception at its raise site and returns it for unwinding.
    fn raise(&mut self, kind: ExceptionKind) -> ExceptionKind {
        self.record(EventKind::Exception { kind, handled: HandledAs::Revert });
        kind
    }

    fn edge(&mut self, function: &str, from: BlockId, to: BlockId) {
        self.record(EventKind::Edge { function: function.to_string(), from, to });
    }

    fn charge_stmt(&mut self) -> Result<(), ExceptionKind> {
        if self.gas.charge(self.schedule.per_statement).is_err() {
            return Err(self.raise(ExceptionKind::OutOfGas));
        }
        Ok(())
    }

    fn move_value(&mut self, from: AccountId, to: AccountId, amount: &Value) {
        let a = amount.magnitude().clone();
        let fb = self.world.balance(from);
        debug_assert!(fb >= a, "payer balance checked before move");
        self.world.set_balance(from, fb - &a);
        let tb = self.world.balance(to);
        self.world.set_balance(to, tb + a);
    }

    fn run_root(&mut self, tx: &Transaction) -> Result<(), ExceptionKind> {
        if self.gas.charge(self.schedule.initiation_cost(tx.args.len())).is_err() {
            return Err(self.raise(ExceptionKind::OutOfGas));
        }
        if self.world.balance(tx.sender) < *tx.value.magnitude() {
            return Err(self.raise(ExceptionKind::InsufficientFunds));
        }
        let Some(instance) = self.world.contract(tx.to) else {
            // Plain account: value moves, nothing runs.
            self.move_value(tx.sender, tx.to, &tx.value);
            if !tx.value.is_zero() {
                let gas_forwarded = self.gas.remaining();
                self.record(EventKind::Transfer {
                    from: tx.sender,
                    to: tx.to,
                    amount: tx.value.clone(),
                    ok: true,
                    kind: TransferKind::Top,
                    gas_forwarded,
                    fail: None,
                });
            }
            return Ok(());
        };
        let program = Arc::clone(&instance.program);
        let Some(f) = program.function(&tx.function) else {
            return Err(self.raise(ExceptionKind::FailedPrecondition));
        };
        if !f.payable && !tx.value.is_zero() {
            return Err(self.raise(ExceptionKind::FailedPrecondition));
        }
        let Some(params) = bind_args(f, &tx.args, self.width) else {
            return Err(self.raise(ExceptionKind::FailedPrecondition));
        };
        self.move_value(tx.sender, tx.to, &tx.value);
        if !tx.value.is_zero() {
            let gas_forwarded = self.gas.remaining();
            self.record(EventKind::Transfer {
                from: tx.sender,
                to: tx.to,
                amount: tx.value.clone(),
                ok: true,
                kind: TransferKind::Top,
                gas_forwarded,
                fail: None,
            });
        }
        let is_fallback = tx.function == FALLBACK_NAME;
        if is_fallback {
            let depth = self.enter_fallback(tx.to);
            self.record(EventKind::FallbackEnter { addr: tx.to, depth });
        }
        let res =
            self.call_function(tx.to, &program, &tx.function, tx.sender, tx.value.clone(), params);
        if is_fallback {
            self.exit_fallback(tx.to);
        }
        res
    }

    fn enter_fallback(&mut self, addr: AccountId) -> u32 {
        let d = self.fallback_depths.entry(addr).or_insert(0);
        *d += 1;
        *d
    }

    fn exit_fallback(&mut self, addr: AccountId) {
        let d = self.fallback_depths.get_mut(&addr).expect("unbalanced fallback depth");
        *d -= 1;
    }

    fn call_function(
        &mut self,
        this: AccountId,
        program: &Arc<ContractProgram>,
        fname: &str,
        sender: AccountId,
        value: Value,
        params: BTreeMap<String, RtVal>,
    ) -> Result<(), ExceptionKind> {
        let f = program.function(fname).expect("callee resolved before dispatch");
        let qual = format!("{}.{}", program.name, f.name);
        let cfg = &f.cfg;
        let ctx = Ctx { this, sender, value, params };
        let mut cur: BlockId = 0;
        loop {
            let block = &cfg.blocks[cur as usize];
            for stmt in &block.stmts {
                let r = self.charge_stmt().and_then(|()| self.exec_stmt(&ctx, stmt));
                if let Err(e) = r {
                    self.edge(&qual, cur, cfg.fail_id);
                    return Err(e);
                }
            }
            match &block.term {
                Terminator::Goto(b) => {
                    self.edge(&qual, cur, *b);
                    cur = *b;
                }
                Terminator::Branch { cond, then_blk, else_blk } => {
                    let c = match self.charge_stmt().and_then(|()| self.eval(&ctx, cond)) {
                        Ok(v) => v.as_bool(),
                        Err(e) => {
                            self.edge(&qual, cur, cfg.fail_id);
                            return Err(e);
                        }
                    };
                    let next = if c { *then_blk } else { *else_blk };
                    self.edge(&qual, cur, next);
                    cur = next;
                }
                Terminator::Require { cond, next } => {
                    let c = match self.charge_stmt().and_then(|()| self.eval(&ctx, cond)) {
                        Ok(v) => v.as_bool(),
                        Err(e) => {
                            self.edge(&qual, cur, cfg.fail_id);
                            return Err(e);
                        }
                    };
                    if c {
                        self.edge(&qual, cur, *next);
                        cur = *next;
                    } else {
                        self.edge(&qual, cur, cfg.fail_id);
                        return Err(self.raise(ExceptionKind::RequireFailed));
                    }
                }
                Terminator::Return(e) => {
                    let r = self.charge_stmt().and_then(|()| match e {
                        Some(expr) => self.eval(&ctx, expr).map(|_| ()),
                        None => Ok(()),
                    });
                    if let Err(err) = r {
                        self.edge(&qual, cur, cfg.fail_id);
                        return Err(err);
                    }
                    self.edge(&qual, cur, cfg.exit_id);
                    return Ok(());
                }
                Terminator::Throw => {
                    if let Err(e) = self.charge_stmt() {
                        self.edge(&qual, cur, cfg.fail_id);
                        return Err(e);
                    }
                    self.edge(&qual, cur, cfg.fail_id);
                    return Err(self.raise(ExceptionKind::Throw));
                }
                Terminator::End => {
                    self.edge(&qual, cur, cfg.exit_id);
                    return Ok(());
                }
            }
        }
    }

    fn exec_stmt(&mut self, ctx: &Ctx, stmt: &SimpleStmt) -> Result<(), ExceptionKind> {
        match stmt {
            SimpleStmt::Assign { lv, op, rhs } => self.exec_assign(ctx, lv, *op, rhs),
            SimpleStmt::Send { to, amount } => {
                let to = self.eval(ctx, to)?.as_address();
                let amount = self.eval(ctx, amount)?.as_uint();
                self.do_transfer(ctx.this, to, amount, TransferKind::Send)?;
                Ok(())
            }
            SimpleStmt::CallValue { to, amount } => {
                let to = self.eval(ctx, to)?.as_address();
                let amount = self.eval(ctx, amount)?.as_uint();
                self.do_transfer(ctx.this, to, amount, TransferKind::CallValue)?;
                Ok(())
            }
            SimpleStmt::Transfer { to, amount } => {
                let to = self.eval(ctx, to)?.as_address();
                let amount = self.eval(ctx, amount)?.as_uint();
                self.do_transfer(ctx.this, to, amount, TransferKind::Transfer)?;
                Ok(())
            }
            SimpleStmt::ExternalCall { to, function, value, args } => {
                self.exec_named_call(ctx, to, function, value.as_ref(), args)
            }
        }
    }

    fn exec_assign(
        &mut self,
        ctx: &Ctx,
        lv: &LValue,
        op: AssignOp,
        rhs: &Expr,
    ) -> Result<(), ExceptionKind> {
        let rhs_v = self.eval(ctx, rhs)?;
        match lv {
            LValue::Scalar(name) => {
                let old = self.world.read_scalar(ctx.this, name);
                let new = match op {
                    AssignOp::Set => match (&old, &rhs_v) {
                        (StorageVal::Uint(_), RtVal::Uint(v)) => StorageVal::Uint(v.clone()),
                        (StorageVal::Bool(_), RtVal::Bool(b)) => StorageVal::Bool(*b),
                        (StorageVal::Address(_), RtVal::Address(a)) => StorageVal::Address(*a),
                        _ => unreachable!("static checker guarantees assignment types"),
                    },
                    AssignOp::AddAssign | AssignOp::SubAssign => {
                        let old_u = match &old {
                            StorageVal::Uint(v) => v.clone(),
                            _ => unreachable!("compound assign target is uint"),
                        };
                        self.record(EventKind::Read {
                            addr: ctx.this,
                            var: name.clone(),
                            key: None,
                            val: old_u.clone(),
                        });
                        StorageVal::Uint(self.compound(op, old_u, rhs_v.as_uint(), name))
                    }
                };
                self.record(EventKind::Write {
                    addr: ctx.this,
                    var: name.clone(),
                    key: None,
                    old: storage_as_value(&old),
                    new: storage_as_value(&new),
                });
                self.world.write_scalar(ctx.this, name, new);
            }
            LValue::MapEntry(name, key) => {
                let key = self.eval(ctx, key)?.as_address();
                let old = self.world.read_map(ctx.this, name, key);
                let new = match op {
                    AssignOp::Set => rhs_v.as_uint(),
                    AssignOp::AddAssign | AssignOp::SubAssign => {
                        self.record(EventKind::Read {
                            addr: ctx.this,
                            var: name.clone(),
                            key: Some(key),
                            val: old.clone(),
                        });
                        self.compound(op, old.clone(), rhs_v.as_uint(), name)
                    }
                };
                self.record(EventKind::Write {
                    addr: ctx.this,
                    var: name.clone(),
                    key: Some(key),
                    old,
                    new: new.clone(),
                });
                self.world.write_map(ctx.this, name, key, new);
            }
        }
        Ok(())
    }

    /// Applies `+=` / `-=`, tagging any wrap with the assigned variable.
    fn compound(&mut self, op: AssignOp, old: Value, rhs: Value, var: &str) -> Value {
        let (res, wrapped, wop) = match op {
            AssignOp::AddAssign => {
                let (r, w) = old.wrapping_add(&rhs, self.width);
                (r, w, WrapOp::Add)
            }
            AssignOp::SubAssign => {
                let (r, w) = old.wrapping_sub(&rhs, self.width);
                (r, w, WrapOp::Sub)
            }
            AssignOp::Set => unreachable!("plain assignment has no operator"),
        };
        if wrapped {
            self.record(EventKind::Wrap {
                op: wop,
                a: old,
                b: rhs,
                var_context: Some(var.to_string()),
            });
        }
        res
    }

    fn exec_named_call(
        &mut self,
        ctx: &Ctx,
        to: &Expr,
        function: &str,
        value: Option<&Expr>,
        args: &[Expr],
    ) -> Result<(), ExceptionKind> {
        let to_addr = self.eval(ctx, to)?.as_address();
        let val = match value {
            Some(e) => self.eval(ctx, e)?.as_uint(),
            None => Value::zero(),
        };
        let mut arg_vals = Vec::with_capacity(args.len());
        for a in args {
            arg_vals.push(self.eval(ctx, a)?);
        }
        let Some(instance) = self.world.contract(to_addr) else {
            return Err(self.raise(ExceptionKind::FailedPrecondition));
        };
        let program = Arc::clone(&instance.program);
        let Some(f) = program.function(function) else {
            return Err(self.raise(ExceptionKind::FailedPrecondition));
        };
        if f.name == FALLBACK_NAME {
            return Err(self.raise(ExceptionKind::FailedPrecondition));
        }
        if !f.payable && !val.is_zero() {
            return Err(self.raise(ExceptionKind::FailedPrecondition));
        }
        let Some(params) = bind_rt_args(f, arg_vals) else {
            return Err(self.raise(ExceptionKind::FailedPrecondition));
        };
        if value.is_some() {
            if self.world.balance(ctx.this) < *val.magnitude() {
                return Err(self.raise(ExceptionKind::InsufficientFunds));
            }
            self.move_value(ctx.this, to_addr, &val);
            let gas_forwarded = self.gas.remaining();
            self.record(EventKind::Transfer {
                from: ctx.this,
                to: to_addr,
                amount: val.clone(),
                ok: true,
                kind: TransferKind::FnCall,
                gas_forwarded,
                fail: None,
            });
        }
        // Named calls run in the caller's budget and frame: a callee failure
        // unwinds the enclosing scope.
        self.call_function(to_addr, &program, function, ctx.this, val, params)
    }

    /// Value transfer with fallback dispatch. Returns whether it succeeded;
    /// for `Transfer` kind, failure propagates instead.
    fn do_transfer(
        &mut self,
        from: AccountId,
        to: AccountId,
        amount: Value,
        kind: TransferKind,
    ) -> Result<bool, ExceptionKind> {
        debug_assert!(matches!(
            kind,
            TransferKind::Send | TransferKind::Transfer | TransferKind::CallValue
        ));
        let swallows = !matches!(kind, TransferKind::Transfer);

        if self.world.balance(from) < *amount.magnitude() {
            return self.transfer_failed(
                from,
                to,
                amount,
                kind,
                0,
                ExceptionKind::InsufficientFunds,
                swallows,
                false,
            );
        }

        let Some(instance) = self.world.contract(to) else {
            // Plain accounts accept value without running code.
            self.move_value(from, to, &amount);
            let gas_forwarded = self.peek_budget(kind);
            self.record(EventKind::Transfer {
                from,
                to,
                amount,
                ok: true,
                kind,
                gas_forwarded,
                fail: None,
            });
            return Ok(true);
        };

        let program = Arc::clone(&instance.program);
        if program.fallback.is_none() {
            return self.transfer_failed(
                from,
                to,
                amount,
                kind,
                0,
                ExceptionKind::FailedPrecondition,
                swallows,
                false,
            );
        }

        let budget = match kind {
            TransferKind::CallValue => {
                self.gas.push_retained_frame(self.schedule.call_value_retention)
            }
            _ => self.gas.push_stipend_frame(self.schedule.stipend),
        };
        let snapshot = self.world.clone();
        self.move_value(from, to, &amount);

        let parent = self.frame;
        let child = self.trace.push_frame(parent);
        self.frame = child;
        let depth = self.enter_fallback(to);
        self.record(EventKind::FallbackEnter { addr: to, depth });

        let res = self.call_function(
            to,
            &program,
            FALLBACK_NAME,
            from,
            amount.clone(),
            BTreeMap::new(),
        );

        self.exit_fallback(to);
        self.frame = parent;
        self.gas.pop_frame();

        match res {
            Ok(()) => {
                self.record(EventKind::Transfer {
                    from,
                    to,
                    amount,
                    ok: true,
                    kind,
                    gas_forwarded: budget,
                    fail: None,
                });
                Ok(true)
            }
            Err(fail) => {
                *self.world = snapshot;
                self.trace.mark_reverted(child);
                self.transfer_failed(from, to, amount, kind, budget, fail, swallows, true)
            }
        }
    }

    /// Shared failure path: records the handled exception and the failed
    /// transfer, then either swallows (false) or propagates. `raised_in_callee`
    /// says whether a callee frame already recorded the raise.
    #[allow(clippy::too_many_arguments)]
    fn transfer_failed(
        &mut self,
        from: AccountId,
        to: AccountId,
        amount: Value,
        kind: TransferKind,
        gas_forwarded: u64,
        fail: ExceptionKind,
        swallows: bool,
        raised_in_callee: bool,
    ) -> Result<bool, ExceptionKind> {
        if swallows {
            self.record(EventKind::Exception { kind: fail, handled: HandledAs::FalseReturn });
        }
        self.record(EventKind::Transfer {
            from,
            to,
            amount,
            ok: false,
            kind,
            gas_forwarded,
            fail: Some(fail),
        });
        if swallows {
            Ok(false)
        } else if raised_in_callee {
            Err(fail)
        } else {
            Err(self.raise(fail))
        }
    }

    fn peek_budget(&self, kind: TransferKind) -> u64 {
        match kind {
            TransferKind::CallValue => {
                self.gas.remaining().saturating_sub(self.schedule.call_value_retention)
            }
            _ => self.schedule.stipend.min(self.gas.remaining()),
        }
    }

    fn eval(&mut self, ctx: &Ctx, e: &Expr) -> Result<RtVal, ExceptionKind> {
        match e {
            Expr::Number(n) => {
                Ok(RtVal::Uint(Value::from_biguint_wrapped(n.clone(), self.width)))
            }
            Expr::Bool(b) => Ok(RtVal::Bool(*b)),
            Expr::AddressLit(a) => Ok(RtVal::Address(*a)),
            Expr::MsgSender => Ok(RtVal::Address(ctx.sender)),
            Expr::MsgValue => Ok(RtVal::Uint(ctx.value.clone())),
            Expr::ThisBalance => {
                let b = self.world.balance(ctx.this);
                Ok(RtVal::Uint(Value::from_biguint_wrapped(b, self.width)))
            }
            Expr::Ident(name) => {
                if let Some(v) = ctx.params.get(name) {
                    return Ok(v.clone());
                }
                let v = self.world.read_scalar(ctx.this, name);
                self.record(EventKind::Read {
                    addr: ctx.this,
                    var: name.clone(),
                    key: None,
                    val: storage_as_value(&v),
                });
                Ok(match v {
                    StorageVal::Uint(u) => RtVal::Uint(u),
                    StorageVal::Bool(b) => RtVal::Bool(b),
                    StorageVal::Address(a) => RtVal::Address(a),
                })
            }
            Expr::Index(name, key) => {
                let key = self.eval(ctx, key)?.as_address();
                let v = self.world.read_map(ctx.this, name, key);
                self.record(EventKind::Read {
                    addr: ctx.this,
                    var: name.clone(),
                    key: Some(key),
                    val: v.clone(),
                });
                Ok(RtVal::Uint(v))
            }
            Expr::Binary(op, a, b) => self.eval_binary(ctx, *op, a, b),
            Expr::Send { to, amount } => {
                let to = self.eval(ctx, to)?.as_address();
                let amount = self.eval(ctx, amount)?.as_uint();
                let ok = self.do_transfer(ctx.this, to, amount, TransferKind::Send)?;
                Ok(RtVal::Bool(ok))
            }
            Expr::CallValue { to, amount } => {
                let to = self.eval(ctx, to)?.as_address();
                let amount = self.eval(ctx, amount)?.as_uint();
                let ok = self.do_transfer(ctx.this, to, amount, TransferKind::CallValue)?;
                Ok(RtVal::Bool(ok))
            }
        }
    }

    fn eval_binary(
        &mut self,
        ctx: &Ctx,
        op: BinOp,
        a: &Expr,
        b: &Expr,
    ) -> Result<RtVal, ExceptionKind> {
        // Logical operators short-circuit; everything else is strict.
        match op {
            BinOp::And => {
                let l = self.eval(ctx, a)?.as_bool();
                if !l {
                    return Ok(RtVal::Bool(false));
                }
                return Ok(RtVal::Bool(self.eval(ctx, b)?.as_bool()));
            }
            BinOp::Or => {
                let l = self.eval(ctx, a)?.as_bool();
                if l {
                    return Ok(RtVal::Bool(true));
                }
                return Ok(RtVal::Bool(self.eval(ctx, b)?.as_bool()));
            }
            _ => {}
        }
        let lv = self.eval(ctx, a)?;
        let rv = self.eval(ctx, b)?;
        Ok(match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul => {
                let (x, y) = (lv.as_uint(), rv.as_uint());
                let (res, wrapped, wop) = match op {
                    BinOp::Add => {
                        let (r, w) = x.wrapping_add(&y, self.width);
                        (r, w, WrapOp::Add)
                    }
                    BinOp::Sub => {
                        let (r, w) = x.wrapping_sub(&y, self.width);
                        (r, w, WrapOp::Sub)
                    }
                    BinOp::Mul => {
                        let (r, w) = x.wrapping_mul(&y, self.width);
                        (r, w, WrapOp::Mul)
                    }
                    _ => unreachable!(),
                };
                if wrapped {
                    self.record(EventKind::Wrap { op: wop, a: x, b: y, var_context: None });
                }
                RtVal::Uint(res)
            }
            BinOp::Lt => RtVal::Bool(lv.as_uint().magnitude() < rv.as_uint().magnitude()),
            BinOp::Le => RtVal::Bool(lv.as_uint().magnitude() <= rv.as_uint().magnitude()),
            BinOp::Gt => RtVal::Bool(lv.as_uint().magnitude() > rv.as_uint().magnitude()),
            BinOp::Ge => RtVal::Bool(lv.as_uint().magnitude() >= rv.as_uint().magnitude()),
            BinOp::Eq => {
                debug_assert!(lv.same_type(&rv));
                RtVal::Bool(lv.eq_val(&rv))
            }
            BinOp::Ne => {
                debug_assert!(lv.same_type(&rv));
                RtVal::Bool(!lv.eq_val(&rv))
            }
            BinOp::And | BinOp::Or => unreachable!("handled above"),
        })
    }
}

fn bind_args(
    f: &FunctionDef,
    args: &[ArgValue],
    width: u32,
) -> Option<BTreeMap<String, RtVal>> {
    if args.len() != f.params.len() {
        return None;
    }
    let mut out = BTreeMap::new();
    for (p, a) in f.params.iter().zip(args) {
        let v = match (p.ty, a) {
            (ParamType::Uint, ArgValue::Uint(v)) => {
                RtVal::Uint(Value::from_biguint_wrapped(v.magnitude().clone(), width))
            }
            (ParamType::Bool, ArgValue::Bool(b)) => RtVal::Bool(*b),
            (ParamType::Address, ArgValue::Address(a)) => RtVal::Address(*a),
            _ => return None,
        };
        out.insert(p.name.clone(), v);
    }
    Some(out)
}

fn bind_rt_args(f: &FunctionDef, args: Vec<RtVal>) -> Option<BTreeMap<String, RtVal>> {
    if args.len() != f.params.len() {
        return None;
    }
    let mut out = BTreeMap::new();
    for (p, a) in f.params.iter().zip(args) {
        let ok = matches!(
            (p.ty, &a),
            (ParamType::Uint, RtVal::Uint(_))
                | (ParamType::Bool, RtVal::Bool(_))
                | (ParamType::Address, RtVal::Address(_))
        );
        if !ok {
            return None;
        }
        out.insert(p.name.clone(), a);
    }
    Some(out)
}
