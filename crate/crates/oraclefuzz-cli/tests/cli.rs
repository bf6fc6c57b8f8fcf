//! End-to-end tests against the compiled binary: exit codes, output
//! shapes, and config precedence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus_path(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(file)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oraclefuzz"))
}

fn run_in(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = bin();
    cmd.args(args).current_dir(dir).env_remove("ORACLEFUZZ_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn run(args: &[&str]) -> Output {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), args, &[])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const DAO_SCRIPT: &str = "\
exploit-script v1
target dao.msol balance 30
attacker fallback reenter:withdraw:3
state
tx sender=3 func=deposit args= value=5 gas=100000
tx sender=3 func=withdraw args=3 value=0 gas=100000
expect violation=balance class=reentrancy at=1
";

#[test]
fn identify_prints_the_binding() {
    let contract = corpus_path("simple_dao.msol");
    let out = run(&["identify", "--contract", contract.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "BOOKKEEPING SimpleDAO balances K=0\n");
}

#[test]
fn identify_prints_none_for_decoys() {
    for file in ["decoy_no_mapping.msol", "decoy_double_credit.msol"] {
        let contract = corpus_path(file);
        let out = run(&["identify", "--contract", contract.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{file}");
        assert_eq!(stdout(&out), "NONE\n", "{file}");
    }
}

#[test]
fn missing_inputs_exit_3() {
    for args in [
        &["identify", "--contract", "no_such.msol"][..],
        &["fuzz", "--contract", "no_such.msol"][..],
        &["replay", "no_such.script"][..],
        &["check", "no_such.script"][..],
        &["fuzz"][..],
        &["eval"][..],
    ] {
        let out = run(args);
        assert_eq!(code(&out), 3, "args: {args:?}");
    }
}

#[test]
fn no_subcommand_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(code(&out), 3);
    let out = run(&["--no-such-flag"]);
    assert_eq!(code(&out), 3);
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    let out = run(&["--version"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn replay_matches_a_hand_written_script() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus_path("simple_dao.msol"), dir.path().join("dao.msol")).unwrap();
    std::fs::write(dir.path().join("dao.script"), DAO_SCRIPT).unwrap();
    let out = run_in(dir.path(), &["replay", "dao.script"], &[]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("REPLAY match"));
}

#[test]
fn replay_flags_a_tampered_expectation() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus_path("simple_dao.msol"), dir.path().join("dao.msol")).unwrap();
    let tampered = DAO_SCRIPT.replace("at=1", "at=0");
    std::fs::write(dir.path().join("dao.script"), tampered).unwrap();
    let out = run_in(dir.path(), &["replay", "dao.script"], &[]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("REPLAY mismatch"));
}

#[test]
fn check_prints_one_verdict_per_transaction() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus_path("except_disorder.msol"), dir.path().join("hub.msol")).unwrap();
    std::fs::write(
        dir.path().join("hub.script"),
        "exploit-script v1\n\
         target hub.msol balance 0\n\
         attacker fallback throw\n\
         state\n\
         tx sender=3 func=deposit args= value=5 gas=100000\n\
         tx sender=3 func=payout args=5 value=0 gas=100000\n\
         expect violation=transaction class=exception_disorder at=1\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["check", "hub.script"], &[]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let verdicts: Vec<&str> = text.lines().filter(|l| l.starts_with("VERDICT")).collect();
    assert_eq!(verdicts.len(), 2);
    assert!(verdicts[0].contains("outcome=ok"));
    assert!(verdicts[1].contains("outcome=transaction_violation"));
}

#[test]
fn check_runs_honest_scripts_clean() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus_path("honest_ledger.msol"), dir.path().join("ledger.msol")).unwrap();
    std::fs::write(
        dir.path().join("ledger.script"),
        "exploit-script v1\n\
         target ledger.msol balance 0\n\
         attacker fallback empty\n\
         state\n\
         tx sender=1 func=deposit args= value=5 gas=100000\n\
         tx sender=1 func=withdraw args=3 value=0 gas=100000\n\
         expect violation=balance class=none at=0\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["check", "ledger.script"], &[]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("VERDICT")).count(), 2);
    assert!(text.lines().all(|l| !l.starts_with("VERDICT") || l.contains("outcome=ok")));

    // A script with no transactions checks nothing and succeeds.
    std::fs::write(
        dir.path().join("empty.script"),
        "exploit-script v1\n\
         target ledger.msol balance 0\n\
         attacker fallback empty\n\
         state\n\
         expect violation=balance class=none at=0\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["check", "empty.script"], &[]);
    assert_eq!(code(&out), 0);
    assert!(!stdout(&out).contains("VERDICT"));
}

#[test]
fn fuzz_safe_contract_writes_no_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let contract = corpus_path("store_safe.msol");
    let out = run_in(
        dir.path(),
        &[
            "fuzz",
            "--contract",
            contract.to_str().unwrap(),
            "--seed",
            "1",
            "--max-iters",
            "2000",
            "--expect",
            "safe",
            "--out",
            "exploits",
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("exploits-found = 0"));
    assert!(text.contains("result = match"));
    let scripts = std::fs::read_dir(dir.path().join("exploits"))
        .unwrap()
        .filter(|e| {
            e.as_ref().unwrap().path().extension().is_some_and(|x| x == "script")
        })
        .count();
    assert_eq!(scripts, 0);
}

#[test]
fn fuzz_exploitable_contract_emits_replayable_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let contract = corpus_path("underflow.msol");
    let out = run_in(
        dir.path(),
        &[
            "fuzz",
            "--contract",
            contract.to_str().unwrap(),
            "--seed",
            "1",
            "--stop-first",
            "--expect",
            "exploitable",
            "--out",
            "exploits",
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("result = match"));

    let script = dir.path().join("exploits/exploit-001.script");
    assert!(script.exists());
    // The script names the target by the --contract path, so it replays
    // from anywhere.
    let out = run_in(dir.path(), &["replay", script.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
}

#[test]
fn fuzz_missed_expectation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let contract = corpus_path("store_safe.msol");
    let out = run_in(
        dir.path(),
        &[
            "fuzz",
            "--contract",
            contract.to_str().unwrap(),
            "--seed",
            "1",
            "--max-iters",
            "500",
            "--expect",
            "exploitable",
        ],
        &[],
    );
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("result = mismatch"));
}

#[test]
fn config_precedence_flags_over_file_over_env() {
    let dir = tempfile::tempdir().unwrap();

    // Defaults only.
    let out = run_in(dir.path(), &["--show-config"], &[]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("seed = 0\n"));

    // Environment seed applies when nothing else sets one.
    let out = run_in(dir.path(), &["--show-config"], &[("ORACLEFUZZ_SEED", "9")]);
    assert!(stdout(&out).contains("seed = 9\n"));

    // A config file beats the environment.
    std::fs::write(dir.path().join("oraclefuzz.conf"), "seed = 7\nrepeats = 4\n").unwrap();
    let out = run_in(dir.path(), &["--show-config"], &[("ORACLEFUZZ_SEED", "9")]);
    assert!(stdout(&out).contains("seed = 7\n"));
    assert!(stdout(&out).contains("repeats = 4\n"));

    // A flag beats the file.
    let out = run_in(dir.path(), &["--show-config", "--seed", "11"], &[("ORACLEFUZZ_SEED", "9")]);
    assert!(stdout(&out).contains("seed = 11\n"));
    assert!(stdout(&out).contains("repeats = 4\n"));

    // A malformed file is a usage error.
    std::fs::write(dir.path().join("oraclefuzz.conf"), "seed without equals\n").unwrap();
    let out = run_in(dir.path(), &["--show-config"], &[]);
    assert_eq!(code(&out), 3);
}
