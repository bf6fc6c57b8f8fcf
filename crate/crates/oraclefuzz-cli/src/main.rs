//! Command-line driver for the oraclefuzz engine.
//!
//! Subcommands: `fuzz` runs a campaign and writes exploit scripts, `replay`
//! confirms a script's recorded outcome, `identify` prints bookkeeping
//! bindings, `check` prints the oracle verdict after every scripted
//! transaction, and `eval` compares full against cfg-only feedback over a
//! directory of contracts.
//!
//! Exit codes are a stable contract: 0 success or matched expectation,
//! 2 mismatch, 3 parse or usage failure, 4 no bookkeeping variable.

mod config;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{Expect, Overrides, Settings};
use oraclefuzz::campaign::{
    identify_binding, Campaign, CampaignConfig, CampaignError, FeedbackMode,
};
use oraclefuzz::script::{check_all, replay, CheckOutcome, ExploitScript, ReplayOutcome};
use oraclefuzz::stats::{compute_a12, compute_mwu};

const EXIT_OK: u8 = 0;
const EXIT_MISMATCH: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_NO_BOOKKEEPING: u8 = 4;

#[derive(Parser)]
#[command(
    name = "oraclefuzz",
    version,
    about = "Grey-box fuzzer with a semantic oracle for MiniSol contracts"
)]
struct Cli {
    /// Target contract file (fuzz, identify; overrides the script's target
    /// line for replay and check)
    #[arg(long, global = true, value_name = "FILE")]
    contract: Option<PathBuf>,

    /// Directory of contract files (eval)
    #[arg(long, global = true, value_name = "DIR")]
    contracts: Option<PathBuf>,

    /// Campaign RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Wall-clock budget per campaign, seconds
    #[arg(long, global = true)]
    budget_secs: Option<u64>,

    /// Iteration budget per campaign
    #[arg(long, global = true)]
    max_iters: Option<u64>,

    /// Coverage feedback mode: full or cfg-only
    #[arg(long, global = true, value_name = "MODE")]
    feedback: Option<String>,

    /// Directory exploit scripts and the run report are written to
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Expected campaign outcome: exploitable or safe
    #[arg(long, global = true, value_name = "LABEL")]
    expect: Option<String>,

    /// Campaigns per (contract, mode) cell in eval
    #[arg(long, global = true)]
    repeats: Option<usize>,

    /// Eval cell budget: thousands of iterations, or seconds when
    /// --budget-secs is also given
    #[arg(long, global = true)]
    timeout: Option<u64>,

    /// Transactions between world resets
    #[arg(long, global = true)]
    reset_period: Option<u64>,

    /// Interval count for gas-limit mutation
    #[arg(long, global = true)]
    gas_intervals: Option<u32>,

    /// Machine word width in bits
    #[arg(long, global = true)]
    width: Option<u32>,

    /// Stop a campaign at its first exploit
    #[arg(long, global = true)]
    stop_first: bool,

    /// Print the resolved configuration and exit
    #[arg(long, global = true)]
    show_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a fuzzing campaign against --contract and write exploit scripts
    Fuzz,
    /// Re-execute an exploit script and confirm its recorded outcome
    Replay { script: PathBuf },
    /// Print the bookkeeping variables the oracle binds for --contract
    Identify,
    /// Execute a script and print the oracle verdict after every transaction
    Check { script: PathBuf },
    /// Compare full and cfg-only feedback over a directory of contracts
    Eval,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_PARSE);
        }
    };
    ExitCode::from(run(cli))
}

fn run(cli: Cli) -> u8 {
    let flags = Overrides {
        seed: cli.seed,
        budget_secs: cli.budget_secs,
        max_iters: cli.max_iters,
        feedback: cli.feedback.clone(),
        out: cli.out.clone(),
        expect: cli.expect.clone(),
        repeats: cli.repeats,
        timeout: cli.timeout,
        reset_period: cli.reset_period,
        gas_intervals: cli.gas_intervals,
        width: cli.width,
        stop_first: cli.stop_first,
    };
    let settings = match config::resolve(Path::new("."), &flags) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_PARSE;
        }
    };
    if cli.show_config {
        print!("{}", settings.render());
        return EXIT_OK;
    }
    match &cli.command {
        None => {
            eprintln!("error: no subcommand given; see --help");
            EXIT_PARSE
        }
        Some(Command::Fuzz) => cmd_fuzz(cli.contract.as_deref(), &settings),
        Some(Command::Replay { script }) => cmd_replay(script, cli.contract.as_deref(), &settings),
        Some(Command::Identify) => cmd_identify(cli.contract.as_deref(), &settings),
        Some(Command::Check { script }) => cmd_check(script, cli.contract.as_deref(), &settings),
        Some(Command::Eval) => cmd_eval(cli.contracts.as_deref(), &settings),
    }
}

fn read_file(path: &Path, what: &str) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {what} '{}': {e}", path.display());
        EXIT_PARSE
    })
}

/// Builds a campaign config from resolved settings. An explicit --max-iters
/// always wins; otherwise a time budget runs unbounded and a run with
/// neither budget gets the default iteration cap.
fn campaign_config(s: &Settings) -> CampaignConfig {
    let max_iters = match (s.max_iters, s.budget_secs) {
        (Some(n), _) => Some(n),
        (None, Some(_)) => None,
        (None, None) => Some(50_000),
    };
    CampaignConfig {
        rng_seed: s.seed,
        feedback: s.feedback,
        budget_secs: s.budget_secs,
        max_iters,
        stop_first: s.stop_first,
        reset_period: s.reset_period,
        gas_intervals: s.gas_intervals,
        width: s.width,
        ..CampaignConfig::default()
    }
}

fn cmd_fuzz(contract: Option<&Path>, s: &Settings) -> u8 {
    let Some(path) = contract else {
        eprintln!("error: fuzz requires --contract <FILE>");
        return EXIT_PARSE;
    };
    let source = match read_file(path, "contract") {
        Ok(t) => t,
        Err(code) => return code,
    };
    let label = path.display().to_string();
    let mut campaign = match Campaign::new(&label, &source, campaign_config(s)) {
        Ok(c) => c,
        Err(CampaignError::Parse(e)) => {
            eprintln!("error: {label}: {e}");
            return EXIT_PARSE;
        }
        Err(CampaignError::NoBookkeeping) => {
            eprintln!("error: {label}: no bookkeeping variable identified");
            return EXIT_NO_BOOKKEEPING;
        }
    };
    let started = Instant::now();
    campaign.run();
    let elapsed = started.elapsed();

    // Distinct exploits only: repeated discoveries of the same sequence
    // render to identical bytes and collapse into one file.
    let mut seen = BTreeSet::new();
    let mut scripts = Vec::new();
    for record in &campaign.exploits {
        let text = ExploitScript::from_record(record, &label).render();
        if seen.insert(text.clone()) {
            scripts.push(text);
        }
    }
    if let Err(e) = std::fs::create_dir_all(&s.out) {
        eprintln!("error: cannot create '{}': {e}", s.out.display());
        return EXIT_PARSE;
    }
    for (i, text) in scripts.iter().enumerate() {
        let file = s.out.join(format!("exploit-{:03}.script", i + 1));
        if let Err(e) = std::fs::write(&file, text) {
            eprintln!("error: cannot write '{}': {e}", file.display());
            return EXIT_PARSE;
        }
    }

    let matched = match s.expect {
        None => true,
        Some(Expect::Exploitable) => !campaign.exploits.is_empty(),
        Some(Expect::Safe) => campaign.exploits.is_empty(),
    };
    let mut report = String::new();
    report.push_str(&format!("contract = {label}\n"));
    report.push_str(&format!("seed = {}\n", s.seed));
    report.push_str(&format!("feedback = {}\n", s.feedback.as_str()));
    report.push_str(&format!("width = {}\n", s.width));
    report.push_str(&format!("iterations = {}\n", campaign.iterations));
    report.push_str(&format!("elapsed-secs = {:.1}\n", elapsed.as_secs_f64()));
    report.push_str(&format!("exploits-found = {}\n", campaign.exploits.len()));
    report.push_str(&format!("scripts-written = {}\n", scripts.len()));
    report.push_str(&format!(
        "first-exploit-iteration = {}\n",
        campaign.first_exploit_iteration.map_or("none".into(), |v| v.to_string())
    ));
    if let Some(e) = s.expect {
        report.push_str(&format!("expect = {}\n", e.as_str()));
        report.push_str(&format!("result = {}\n", if matched { "match" } else { "mismatch" }));
    }
    print!("{report}");
    let report_path = s.out.join("report.txt");
    if let Err(e) = std::fs::write(&report_path, &report) {
        eprintln!("error: cannot write '{}': {e}", report_path.display());
        return EXIT_PARSE;
    }
    if matched {
        EXIT_OK
    } else {
        EXIT_MISMATCH
    }
}

/// Where a script's target contract lives: an explicit --contract wins,
/// then the target line as given, then the same directory as the script.
fn resolve_target(script_path: &Path, target_file: &str, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    let as_given = PathBuf::from(target_file);
    if as_given.exists() {
        return as_given;
    }
    match script_path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(target_file),
        _ => as_given,
    }
}

fn cmd_replay(script_path: &Path, contract: Option<&Path>, s: &Settings) -> u8 {
    let text = match read_file(script_path, "script") {
        Ok(t) => t,
        Err(code) => return code,
    };
    let script = match ExploitScript::parse(&text) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("error: {}: {e}", script_path.display());
            return EXIT_PARSE;
        }
    };
    let target_path = resolve_target(script_path, &script.target_file, contract);
    let source = match read_file(&target_path, "target contract") {
        Ok(t) => t,
        Err(code) => return code,
    };
    match replay(&script, &source, s.width, CampaignConfig::default().funding) {
        Ok(ReplayOutcome::Match(v)) => {
            println!("{}", v.render());
            println!("REPLAY match");
            EXIT_OK
        }
        Ok(ReplayOutcome::Mismatch { expected, got }) => {
            println!("{}", got.render());
            println!(
                "REPLAY mismatch: expected violation={} class={} at={}",
                expected.violation.as_str(),
                expected.class.map_or("none", |c| c.as_str()),
                expected.at
            );
            EXIT_MISMATCH
        }
        Ok(ReplayOutcome::NoViolation) => {
            println!("REPLAY mismatch: sequence ran without a violation");
            EXIT_MISMATCH
        }
        Ok(ReplayOutcome::NoBookkeeping) => {
            eprintln!("error: no bookkeeping variable identified");
            EXIT_NO_BOOKKEEPING
        }
        Err(e) => {
            eprintln!("error: {}: {e}", script_path.display());
            EXIT_PARSE
        }
    }
}

fn cmd_identify(contract: Option<&Path>, s: &Settings) -> u8 {
    let Some(path) = contract else {
        eprintln!("error: identify requires --contract <FILE>");
        return EXIT_PARSE;
    };
    let source = match read_file(path, "contract") {
        Ok(t) => t,
        Err(code) => return code,
    };
    match identify_binding(&source, s.width, CampaignConfig::default().funding) {
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            EXIT_PARSE
        }
        Ok(None) => {
            println!("NONE");
            EXIT_OK
        }
        Ok(Some(binding)) => {
            for var in &binding.vars {
                println!("BOOKKEEPING {} {} K={}", binding.contract_name, var, binding.k);
            }
            EXIT_OK
        }
    }
}

fn cmd_check(script_path: &Path, contract: Option<&Path>, s: &Settings) -> u8 {
    let text = match read_file(script_path, "script") {
        Ok(t) => t,
        Err(code) => return code,
    };
    let script = match ExploitScript::parse(&text) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("error: {}: {e}", script_path.display());
            return EXIT_PARSE;
        }
    };
    let target_path = resolve_target(script_path, &script.target_file, contract);
    let source = match read_file(&target_path, "target contract") {
        Ok(t) => t,
        Err(code) => return code,
    };
    match check_all(&script, &source, s.width, CampaignConfig::default().funding) {
        Ok(CheckOutcome::Verdicts(verdicts)) => {
            for v in &verdicts {
                println!("{}", v.render());
            }
            EXIT_OK
        }
        Ok(CheckOutcome::NoBookkeeping) => {
            eprintln!("error: no bookkeeping variable identified");
            EXIT_NO_BOOKKEEPING
        }
        Err(e) => {
            eprintln!("error: {}: {e}", script_path.display());
            EXIT_PARSE
        }
    }
}

/// One eval measurement: iterations (or whole seconds) to the first exploit,
/// with the budget itself standing in when the campaign finds nothing.
fn eval_cell(
    label: &str,
    source: &str,
    s: &Settings,
    mode: FeedbackMode,
    repeat: usize,
) -> Result<u64, CampaignError> {
    let budget_iters = s.timeout.saturating_mul(1000);
    let mut cfg = campaign_config(s);
    cfg.rng_seed = s.seed.wrapping_add(repeat as u64);
    cfg.feedback = mode;
    cfg.stop_first = true;
    match s.budget_secs {
        Some(secs) => {
            cfg.budget_secs = Some(secs);
            cfg.max_iters = None;
        }
        None => {
            cfg.budget_secs = None;
            cfg.max_iters = Some(budget_iters);
        }
    }
    let mut campaign = Campaign::new(label, source, cfg)?;
    let started = Instant::now();
    campaign.run();
    Ok(match s.budget_secs {
        Some(secs) => {
            if campaign.first_exploit_iteration.is_some() {
                started.elapsed().as_secs().min(secs)
            } else {
                secs
            }
        }
        None => campaign.first_exploit_iteration.unwrap_or(budget_iters),
    })
}

fn mean_and_variance(xs: &[u64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    let variance = if xs.len() < 2 {
        0.0
    } else {
        xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    (mean, variance)
}

fn cmd_eval(dir: Option<&Path>, s: &Settings) -> u8 {
    let Some(dir) = dir else {
        eprintln!("error: eval requires --contracts <DIR>");
        return EXIT_PARSE;
    };
    if s.repeats == 0 {
        eprintln!("error: --repeats must be at least 1");
        return EXIT_PARSE;
    }
    let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "msol"))
            .collect(),
        Err(e) => {
            eprintln!("error: cannot read '{}': {e}", dir.display());
            return EXIT_PARSE;
        }
    };
    files.sort();
    if files.is_empty() {
        eprintln!("error: no .msol files in '{}'", dir.display());
        return EXIT_PARSE;
    }
    let mut sources = Vec::new();
    for f in &files {
        match read_file(f, "contract") {
            Ok(t) => sources.push(t),
            Err(code) => return code,
        }
    }

    let modes = [FeedbackMode::Full, FeedbackMode::CfgOnly];
    let mut cells = Vec::new();
    for ci in 0..files.len() {
        for (mi, _) in modes.iter().enumerate() {
            for r in 0..s.repeats {
                cells.push((ci, mi, r));
            }
        }
    }
    let results: Vec<Result<u64, CampaignError>> = cells
        .par_iter()
        .map(|&(ci, mi, r)| {
            let label = files[ci].display().to_string();
            eval_cell(&label, &sources[ci], s, modes[mi], r)
        })
        .collect();

    // samples[contract][mode][repeat]
    let mut samples = vec![[Vec::new(), Vec::new()]; files.len()];
    for (&(ci, mi, _), result) in cells.iter().zip(&results) {
        match result {
            Ok(v) => samples[ci][mi].push(*v),
            Err(CampaignError::Parse(e)) => {
                eprintln!("error: {}: {e}", files[ci].display());
                return EXIT_PARSE;
            }
            Err(CampaignError::NoBookkeeping) => {
                eprintln!(
                    "error: {}: no bookkeeping variable identified",
                    files[ci].display()
                );
                return EXIT_NO_BOOKKEEPING;
            }
        }
    }

    let budget_desc = match s.budget_secs {
        Some(secs) => format!("{secs} seconds"),
        None => format!("{} iterations", s.timeout.saturating_mul(1000)),
    };
    println!("contracts = {}", dir.display());
    println!("repeats = {}", s.repeats);
    println!("seed-base = {}", s.seed);
    println!("budget = {budget_desc}");
    println!();

    let name_width = files
        .iter()
        .map(|f| f.file_name().map_or(0, |n| n.to_string_lossy().len()))
        .max()
        .unwrap_or(8)
        .max("contract".len());
    println!(
        "{:<name_width$}  {:>12}  {:>14}  {:>12}  {:>14}  {:>8}  {:>6}",
        "contract", "full Avg.", "full Variance", "cfg Avg.", "cfg Variance", "p-value", "A12"
    );
    for (ci, file) in files.iter().enumerate() {
        let full = &samples[ci][0];
        let cfg = &samples[ci][1];
        let (full_avg, full_var) = mean_and_variance(full);
        let (cfg_avg, cfg_var) = mean_and_variance(cfg);
        // A12 and the test statistic both ask: does cfg-only need more
        // effort than full feedback? 1.0 means it always does.
        let a12 = match compute_a12(cfg, full) {
            Ok(r) => *r.numer() as f64 / *r.denom() as f64,
            Err(_) => {
                eprintln!("error: empty sample for '{}'", file.display());
                return EXIT_PARSE;
            }
        };
        let (_stat, p) = match compute_mwu(cfg, full) {
            Ok(pair) => pair,
            Err(_) => {
                eprintln!("error: empty sample for '{}'", file.display());
                return EXIT_PARSE;
            }
        };
        let name = file.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        println!(
            "{name:<name_width$}  {full_avg:>12.1}  {full_var:>14.1}  {cfg_avg:>12.1}  {cfg_var:>14.1}  {p:>8.4}  {a12:>6.4}"
        );
    }
    EXIT_OK
}
