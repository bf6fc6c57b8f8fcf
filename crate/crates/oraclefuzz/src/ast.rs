//! Syntax tree and per-function control-flow graphs for MiniSol contracts.
//!
//! Parsing lowers each function body into a block CFG up front: block ids are
//! assigned by a deterministic walk of the source, so two parses of the same
//! text always agree on ids, and the interpreter can report exact edge sets.

use num_bigint::BigUint;

pub type Ident = String;

/// Name of the implicit receive function in traces, seeds and scripts.
pub const FALLBACK_NAME: &str = "__fallback";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarType {
    Uint,
    Bool,
    Address,
    /// mapping(address => uint)
    Mapping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Uint,
    Bool,
    Address,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: Ident,
    pub ty: ParamType,
}

#[derive(Debug, Clone)]
pub struct StateVar {
    pub name: Ident,
    pub ty: VarType,
    /// Optional literal initializer (uint literal or address literal).
    pub init: Option<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Number(BigUint),
    Bool(bool),
    Address(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Number(BigUint),
    Bool(bool),
    AddressLit(u32),
    /// Parameter or scalar state variable reference.
    Ident(Ident),
    /// mapping[key]
    Index(Ident, Box<Expr>),
    MsgSender,
    MsgValue,
    ThisBalance,
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `<addr>.send(<amount>)`, false when the transfer fails.
    Send { to: Box<Expr>, amount: Box<Expr> },
    /// `<addr>.call.value(<amount>)()`, false when the callee fails.
    CallValue { to: Box<Expr>, amount: Box<Expr> },
}

#[derive(Debug, Clone)]
pub enum LValue {
    Scalar(Ident),
    MapEntry(Ident, Expr),
}

impl LValue {
    pub fn var_name(&self) -> &str {
        match self {
            LValue::Scalar(n) => n,
            LValue::MapEntry(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    AddAssign,
    SubAssign,
}

/// Non-branching statement; branching constructs become CFG terminators.
#[derive(Debug, Clone)]
pub enum SimpleStmt {
    Assign { lv: LValue, op: AssignOp, rhs: Expr },
    /// Statement-position send; the boolean result is discarded.
    Send { to: Expr, amount: Expr },
    /// Reverts the enclosing scope when the transfer fails.
    Transfer { to: Expr, amount: Expr },
    /// Statement-position call.value; the boolean result is discarded.
    CallValue { to: Expr, amount: Expr },
    /// Named external call `<addr>.f(args)` / `<addr>.f.value(v)(args)`.
    /// A callee failure reverts the enclosing scope.
    ExternalCall { to: Expr, function: Ident, value: Option<Expr>, args: Vec<Expr> },
}

pub type BlockId = u32;

#[derive(Debug, Clone)]
pub enum Terminator {
    Goto(BlockId),
    Branch { cond: Expr, then_blk: BlockId, else_blk: BlockId },
    /// Falls through to `next` when the condition holds, otherwise reverts.
    Require { cond: Expr, next: BlockId },
    Return(Option<Expr>),
    Throw,
    /// Normal end of the function body.
    End,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub stmts: Vec<SimpleStmt>,
    pub term: Terminator,
}

#[derive(Debug, Clone)]
pub struct FunctionCfg {
    pub blocks: Vec<Block>,
    /// Virtual block id recorded for edges that leave the function normally.
    pub exit_id: BlockId,
    /// Virtual block id recorded for edges taken on revert.
    pub fail_id: BlockId,
}

impl FunctionCfg {
    /// Number of gas-charged items: every simple statement plus every
    /// require / branch / return / throw terminator. Goto and End are
    /// synthetic and free, so this equals the source statement count.
    pub fn charged_statement_count(&self) -> u64 {
        let mut n = 0u64;
        for b in &self.blocks {
            n += b.stmts.len() as u64;
            n += match b.term {
                Terminator::Require { .. }
                | Terminator::Branch { .. }
                | Terminator::Return(_)
                | Terminator::Throw => 1,
                Terminator::Goto(_) | Terminator::End => 0,
            };
        }
        n
    }
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: Ident,
    pub params: Vec<Param>,
    pub payable: bool,
    pub cfg: FunctionCfg,
    /// Function names this body calls via named external calls; used by the
    /// static gas bound (the call graph is loop-free apart from fallbacks).
    pub named_callees: Vec<Ident>,
}

#[derive(Debug, Clone)]
pub struct ContractProgram {
    pub name: Ident,
    pub state_vars: Vec<StateVar>,
    pub functions: Vec<FunctionDef>,
    /// At most one fallback; it takes no parameters and may receive value.
    pub fallback: Option<FunctionDef>,
}

impl ContractProgram {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        if name == FALLBACK_NAME {
            return self.fallback.as_ref();
        }
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVar> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    pub fn fallback_statement_count(&self) -> u64 {
        self.fallback.as_ref().map_or(0, |f| f.cfg.charged_statement_count())
    }
}

/// Statement-sequence to CFG lowering shared by the parser and by the attack
/// contract synthesizer. `stmts` uses a parser-level tree shape.
#[derive(Debug, Clone)]
pub enum TreeStmt {
    Simple(SimpleStmt),
    If { cond: Expr, then_body: Vec<TreeStmt>, else_body: Vec<TreeStmt> },
    Require(Expr),
    Throw,
    Return(Option<Expr>),
}

pub fn lower_body(body: &[TreeStmt]) -> FunctionCfg {
    let mut builder = CfgBuilder::new();
    let entry = builder.new_block();
    let end = builder.lower_seq(body, entry);
    builder.seal(end, Terminator::End);
    builder.finish()
}

struct CfgBuilder {
    blocks: Vec<Option<Block>>,
    pending: Vec<Vec<SimpleStmt>>,
}

impl CfgBuilder {
    fn new() -> Self {
        CfgBuilder { blocks: Vec::new(), pending: Vec::new() }
    }

    fn new_block(&mut self) -> BlockId {
        self.blocks.push(None);
        self.pending.push(Vec::new());
        (self.blocks.len() - 1) as BlockId
    }

    fn push_stmt(&mut self, blk: BlockId, s: SimpleStmt) {
        self.pending[blk as usize].push(s);
    }

    fn seal(&mut self, blk: BlockId, term: Terminator) {
        let stmts = std::mem::take(&mut self.pending[blk as usize]);
        self.blocks[blk as usize] = Some(Block { stmts, term });
    }

    /// Lowers a statement sequence starting in `cur`; returns the open block
    /// that control reaches after the sequence (callers seal it).
    fn lower_seq(&mut self, stmts: &[TreeStmt], mut cur: BlockId) -> BlockId {
        for s in stmts {
            match s {
                TreeStmt::Simple(simple) => self.push_stmt(cur, simple.clone()),
                TreeStmt::Require(cond) => {
                    let next = self.new_block();
                    self.seal(cur, Terminator::Require { cond: cond.clone(), next });
                    cur = next;
                }
                TreeStmt::If { cond, then_body, else_body } => {
                    let then_blk = self.new_block();
                    let else_blk = self.new_block();
                    self.seal(
                        cur,
                        Terminator::Branch { cond: cond.clone(), then_blk, else_blk },
                    );
                    let then_end = self.lower_seq(then_body, then_blk);
                    let else_end = self.lower_seq(else_body, else_blk);
                    let join = self.new_block();
                    self.seal(then_end, Terminator::Goto(join));
                    self.seal(else_end, Terminator::Goto(join));
                    cur = join;
                }
                TreeStmt::Return(e) => {
                    self.seal(cur, Terminator::Return(e.clone()));
                    cur = self.new_block();
                }
                TreeStmt::Throw => {
                    self.seal(cur, Terminator::Throw);
                    cur = self.new_block();
                }
            }
        }
        cur
    }

    fn finish(self) -> FunctionCfg {
        let blocks: Vec<Block> = self
            .blocks
            .into_iter()
            .map(|b| b.expect("unsealed block"))
            .collect();
        let exit_id = blocks.len() as BlockId;
        let fail_id = exit_id + 1;
        FunctionCfg { blocks, exit_id, fail_id }
    }
}
