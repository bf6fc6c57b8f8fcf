//! Grey-box fuzzer for a miniature smart-contract language, built around a
//! semantic bookkeeping oracle instead of crash detection.

pub mod ast;
pub mod attack;
pub mod campaign;
pub mod corpus;
pub mod coverage;
pub mod exhaustive;
pub mod gas;
pub mod interp;
pub mod mutate;
pub mod oracle;
pub mod parser;
pub mod script;
pub mod stats;
pub mod trace;
pub mod value;
pub mod world;
