//! The benchmark corpus: a fixed catalog of small contracts with known
//! ground truth, embedded at compile time so library users need no
//! filesystem layout. The same files live under `corpus/` at the
//! workspace root for the CLI to point at.

use crate::ast::ContractProgram;
use crate::oracle::ViolationClass;
use crate::parser::{parse_contract, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Exploitable,
    Safe,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Exploitable => "exploitable",
            Label::Safe => "safe",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub file: &'static str,
    pub label: Label,
    /// The class at least one found exploit must carry. `None` for safe
    /// entries.
    pub expected_class: Option<ViolationClass>,
    /// Short pattern anchor; for safe entries, the one-line reason.
    pub anchor: &'static str,
    pub source: &'static str,
}

impl CorpusEntry {
    pub fn load(&self) -> Result<ContractProgram, ParseError> {
        parse_contract(self.source)
    }
}

macro_rules! entry {
    ($file:literal, $label:expr, $class:expr, $anchor:literal) => {
        CorpusEntry {
            file: $file,
            label: $label,
            expected_class: $class,
            anchor: $anchor,
            source: include_str!(concat!("../../../corpus/", $file)),
        }
    };
}

/// The fixed catalog. Exploitable entries carry exactly one expected
/// class; safe entries carry none.
pub fn list_corpus() -> Vec<CorpusEntry> {
    use Label::*;
    use ViolationClass::*;
    vec![
        entry!("simple_dao.msol", Exploitable, Some(Reentrancy), "reentrant-withdraw"),
        entry!(
            "except_disorder.msol",
            Exploitable,
            Some(ExceptionDisorder),
            "swallowed-send-failure"
        ),
        entry!("gasless_send.msol", Exploitable, Some(GaslessSend), "stipend-starved-send"),
        entry!("underflow.msol", Exploitable, Some(IntegerWrap), "wrapping-guard"),
        entry!("access_control.msol", Exploitable, Some(Other), "open-ownership"),
        entry!("honey_trap.msol", Exploitable, Some(Other), "silent-keep-window"),
        entry!(
            "deposit_less_withdraw_more.msol",
            Exploitable,
            Some(Other),
            "split-debit-payout"
        ),
        entry!("dao_challenge_safe.msol", Safe, None, "zero-before-send"),
        entry!("funfair_safe.msol", Safe, None, "owner-gated-payout"),
        entry!("store_safe.msol", Safe, None, "revert-on-failed-send"),
        entry!("jamcoin_safe.msol", Safe, None, "checked-arithmetic"),
        entry!("honest_ledger.msol", Safe, None, "plain-correct-ledger"),
    ]
}

/// Identification fixtures: contracts the prober must refuse to bind.
/// They are not fuzzing targets and stay out of the manifest.
pub fn decoys() -> Vec<CorpusEntry> {
    use Label::*;
    vec![
        entry!("decoy_no_mapping.msol", Safe, None, "no-per-account-books"),
        entry!("decoy_double_credit.msol", Safe, None, "credits-double"),
    ]
}

pub fn find(file: &str) -> Option<CorpusEntry> {
    list_corpus().into_iter().chain(decoys()).find(|e| e.file == file)
}

/// Renders the catalog in the on-disk manifest format, one entry per
/// line: `<file> <label> <class> <anchor>`.
pub fn manifest_text() -> String {
    let mut out = String::new();
    for e in list_corpus() {
        out.push_str(e.file);
        out.push(' ');
        out.push_str(e.label.as_str());
        out.push(' ');
        out.push_str(e.expected_class.map_or("none", ViolationClass::as_str));
        out.push(' ');
        out.push_str(e.anchor);
        out.push('\n');
    }
    out
}
