//! Execution traces: every run of a transaction yields an ordered event
//! stream tagged with call frames, so downstream consumers can distinguish
//! committed effects from effects inside reverted sub-calls.
//!
//! One event renders to one line:
//!   EDGE <fn> <from> <to>
//!   W <addr> <var> <key|-> <old> <new>
//!   R <addr> <var> <key|-> <val>
//!   XFER <from> <to> <amount> <ok> <kind> <gas>
//!   EXC <kind> <handled>
//!   FB <addr> <depth>
//!   WRAP <op> <a> <b>

use std::collections::BTreeSet;

use crate::ast::BlockId;
use crate::value::Value;
use crate::world::AccountId;

pub type FrameId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExceptionKind {
    OutOfGas,
    Throw,
    RequireFailed,
    FailedPrecondition,
    InsufficientFunds,
}

impl ExceptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExceptionKind::OutOfGas => "out_of_gas",
            ExceptionKind::Throw => "throw",
            ExceptionKind::RequireFailed => "require_failed",
            ExceptionKind::FailedPrecondition => "failed_precondition",
            ExceptionKind::InsufficientFunds => "insufficient_funds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandledAs {
    /// The failure was swallowed and surfaced as a boolean false.
    FalseReturn,
    /// The failure unwinds the enclosing scope.
    Revert,
}

impl HandledAs {
    pub fn as_str(self) -> &'static str {
        match self {
            HandledAs::FalseReturn => "false_return",
            HandledAs::Revert => "revert",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// Value riding the top-level transaction.
    Top,
    Send,
    Transfer,
    CallValue,
    /// Value riding a named external call.
    FnCall,
}

impl TransferKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransferKind::Top => "top",
            TransferKind::Send => "send",
            TransferKind::Transfer => "transfer",
            TransferKind::CallValue => "call",
            TransferKind::FnCall => "fncall",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WrapOp {
    Add,
    Sub,
    Mul,
}

impl WrapOp {
    pub fn as_str(self) -> &'static str {
        match self {
            WrapOp::Add => "add",
            WrapOp::Sub => "sub",
            WrapOp::Mul => "mul",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Edge {
        /// Qualified as `<Contract>.<function>` to keep same-named functions
        /// of different contracts apart.
        function: String,
        from: BlockId,
        to: BlockId,
    },
    Write {
        addr: AccountId,
        var: String,
        key: Option<AccountId>,
        old: Value,
        new: Value,
    },
    Read {
        addr: AccountId,
        var: String,
        key: Option<AccountId>,
        val: Value,
    },
    Transfer {
        from: AccountId,
        to: AccountId,
        amount: Value,
        ok: bool,
        kind: TransferKind,
        /// Budget forwarded to the recipient, not the amount it consumed.
        gas_forwarded: u64,
        /// Why the transfer failed; None when `ok`.
        fail: Option<ExceptionKind>,
    },
    Exception {
        kind: ExceptionKind,
        handled: HandledAs,
    },
    FallbackEnter {
        addr: AccountId,
        depth: u32,
    },
    Wrap {
        op: WrapOp,
        a: Value,
        b: Value,
        /// Set when the wrap happened applying a compound assignment; holds
        /// the assigned state variable's name.
        var_context: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub frame: FrameId,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub events: Vec<Event>,
    /// Parent of each frame; frame 0 is the transaction root (parent 0).
    pub frame_parents: Vec<FrameId>,
    pub reverted_frames: BTreeSet<FrameId>,
}

impl Trace {
    pub fn new() -> Self {
        Trace { events: Vec::new(), frame_parents: vec![0], reverted_frames: BTreeSet::new() }
    }

    pub fn push_frame(&mut self, parent: FrameId) -> FrameId {
        let id = self.frame_parents.len() as FrameId;
        self.frame_parents.push(parent);
        id
    }

    pub fn mark_reverted(&mut self, frame: FrameId) {
        self.reverted_frames.insert(frame);
    }

    pub fn record(&mut self, frame: FrameId, kind: EventKind) {
        self.events.push(Event { frame, kind });
    }

    /// True when no frame on the event's ancestor chain was reverted.
    pub fn is_committed(&self, ev: &Event) -> bool {
        let mut f = ev.frame;
        loop {
            if self.reverted_frames.contains(&f) {
                return false;
            }
            let parent = self.frame_parents[f as usize];
            if parent == f {
                return true;
            }
            if f == 0 {
                return true;
            }
            f = parent;
        }
    }

    pub fn committed_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| self.is_committed(e))
    }

    /// Deepest fallback entry seen anywhere, reverted frames included.
    pub fn max_fallback_depth(&self) -> u32 {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::FallbackEnter { depth, .. } => Some(depth),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&render_event(&e.kind));
            out.push('\n');
        }
        out
    }
}

fn key_text(key: &Option<AccountId>) -> String {
    match key {
        Some(k) => k.to_string(),
        None => "-".to_string(),
    }
}

pub fn render_event(kind: &EventKind) -> String {
    match kind {
        EventKind::Edge { function, from, to } => format!("EDGE {function} {from} {to}"),
        EventKind::Write { addr, var, key, old, new } => {
            format!("W {addr} {var} {} {old} {new}", key_text(key))
        }
        EventKind::Read { addr, var, key, val } => {
            format!("R {addr} {var} {} {val}", key_text(key))
        }
        EventKind::Transfer { from, to, amount, ok, kind, gas_forwarded, fail: _ } => {
            format!(
                "XFER {from} {to} {amount} {} {} {gas_forwarded}",
                u8::from(*ok),
                kind.as_str()
            )
        }
        EventKind::Exception { kind, handled } => {
            format!("EXC {} {}", kind.as_str(), handled.as_str())
        }
        EventKind::FallbackEnter { addr, depth } => format!("FB {addr} {depth}"),
        EventKind::Wrap { op, a, b, .. } => format!("WRAP {} {a} {b}", op.as_str()),
    }
}
