//! Settings resolution: command-line flags override `oraclefuzz.conf`
//! (simple `key = value` lines in the working directory), which overrides
//! the `ORACLEFUZZ_SEED` environment variable, which overrides built-in
//! defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use oraclefuzz::campaign::FeedbackMode;

pub const CONF_FILE: &str = "oraclefuzz.conf";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Exploitable,
    Safe,
}

impl Expect {
    pub fn parse(s: &str) -> Option<Expect> {
        match s {
            "exploitable" => Some(Expect::Exploitable),
            "safe" => Some(Expect::Safe),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Expect::Exploitable => "exploitable",
            Expect::Safe => "safe",
        }
    }
}

/// Fully resolved settings, one field per flag.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub budget_secs: Option<u64>,
    pub max_iters: Option<u64>,
    pub feedback: FeedbackMode,
    pub out: PathBuf,
    pub expect: Option<Expect>,
    pub repeats: usize,
    /// Evaluation budget: this many thousand iterations per cell.
    pub timeout: u64,
    pub reset_period: u64,
    pub gas_intervals: u32,
    pub width: u32,
    pub stop_first: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 0,
            budget_secs: None,
            max_iters: None,
            feedback: FeedbackMode::Full,
            out: PathBuf::from("./exploits"),
            expect: None,
            repeats: 8,
            timeout: 600,
            reset_period: 10,
            gas_intervals: 5,
            width: 256,
            stop_first: false,
        }
    }
}

/// Flag values as given on the command line; `None` means "not passed".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget_secs: Option<u64>,
    pub max_iters: Option<u64>,
    pub feedback: Option<String>,
    pub out: Option<PathBuf>,
    pub expect: Option<String>,
    pub repeats: Option<usize>,
    pub timeout: Option<u64>,
    pub reset_period: Option<u64>,
    pub gas_intervals: Option<u32>,
    pub width: Option<u32>,
    pub stop_first: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{file} line {line}: {msg}")]
    File { file: String, line: usize, msg: String },
    #[error("bad flag value: {0}")]
    Flag(String),
    #[error("ORACLEFUZZ_SEED is not a number: {0}")]
    Env(String),
}

fn parse_conf(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    let Ok(text) = std::fs::read_to_string(path) else {
        return Ok(map);
    };
    let file = path.display().to_string();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::File {
                file,
                line: i + 1,
                msg: format!("expected 'key = value', found '{raw}'"),
            });
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn take<T, E>(
    map: &mut BTreeMap<String, String>,
    key: &str,
    parse: impl Fn(&str) -> Result<T, E>,
) -> Result<Option<T>, ConfigError> {
    match map.remove(key) {
        None => Ok(None),
        Some(raw) => parse(&raw).map(Some).map_err(|_| ConfigError::File {
            file: CONF_FILE.to_string(),
            line: 0,
            msg: format!("bad value '{raw}' for '{key}'"),
        }),
    }
}

fn parse_bool(s: &str) -> Result<bool, ()> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(()),
    }
}

/// Resolves settings for a run rooted at `dir` (where the conf file is
/// looked up).
pub fn resolve(dir: &Path, flags: &Overrides) -> Result<Settings, ConfigError> {
    let mut s = Settings::default();

    if let Ok(raw) = std::env::var("ORACLEFUZZ_SEED") {
        s.seed = raw.parse().map_err(|_| ConfigError::Env(raw))?;
    }

    let mut conf = parse_conf(&dir.join(CONF_FILE))?;
    if let Some(v) = take(&mut conf, "seed", |r| r.parse::<u64>())? {
        s.seed = v;
    }
    if let Some(v) = take(&mut conf, "budget-secs", |r| r.parse::<u64>())? {
        s.budget_secs = Some(v);
    }
    if let Some(v) = take(&mut conf, "max-iters", |r| r.parse::<u64>())? {
        s.max_iters = Some(v);
    }
    if let Some(v) = take(&mut conf, "feedback", |r| FeedbackMode::parse(r).ok_or(()))? {
        s.feedback = v;
    }
    if let Some(v) = take(&mut conf, "out", |r| Ok::<_, ()>(PathBuf::from(r)))? {
        s.out = v;
    }
    if let Some(v) = take(&mut conf, "expect", |r| Expect::parse(r).ok_or(()))? {
        s.expect = Some(v);
    }
    if let Some(v) = take(&mut conf, "repeats", |r| r.parse::<usize>())? {
        s.repeats = v;
    }
    if let Some(v) = take(&mut conf, "timeout", |r| r.parse::<u64>())? {
        s.timeout = v;
    }
    if let Some(v) = take(&mut conf, "reset-period", |r| r.parse::<u64>())? {
        s.reset_period = v;
    }
    if let Some(v) = take(&mut conf, "gas-intervals", |r| r.parse::<u32>())? {
        s.gas_intervals = v;
    }
    if let Some(v) = take(&mut conf, "width", |r| r.parse::<u32>())? {
        s.width = v;
    }
    if let Some(v) = take(&mut conf, "stop-first", parse_bool)? {
        s.stop_first = v;
    }
    if let Some((k, _)) = conf.into_iter().next() {
        return Err(ConfigError::File {
            file: CONF_FILE.to_string(),
            line: 0,
            msg: format!("unknown key '{k}'"),
        });
    }

    if let Some(v) = flags.seed {
        s.seed = v;
    }
    if let Some(v) = flags.budget_secs {
        s.budget_secs = Some(v);
    }
    if let Some(v) = flags.max_iters {
        s.max_iters = Some(v);
    }
    if let Some(raw) = &flags.feedback {
        s.feedback = FeedbackMode::parse(raw)
            .ok_or_else(|| ConfigError::Flag(format!("--feedback {raw}")))?;
    }
    if let Some(v) = &flags.out {
        s.out = v.clone();
    }
    if let Some(raw) = &flags.expect {
        s.expect = Some(
            Expect::parse(raw).ok_or_else(|| ConfigError::Flag(format!("--expect {raw}")))?,
        );
    }
    if let Some(v) = flags.repeats {
        s.repeats = v;
    }
    if let Some(v) = flags.timeout {
        s.timeout = v;
    }
    if let Some(v) = flags.reset_period {
        s.reset_period = v;
    }
    if let Some(v) = flags.gas_intervals {
        s.gas_intervals = v;
    }
    if let Some(v) = flags.width {
        s.width = v;
    }
    if flags.stop_first {
        s.stop_first = true;
    }
    Ok(s)
}

impl Settings {
    /// The resolved configuration, one `key = value` line per flag.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!(
            "budget-secs = {}\n",
            self.budget_secs.map_or("none".into(), |v| v.to_string())
        ));
        out.push_str(&format!(
            "max-iters = {}\n",
            self.max_iters.map_or("none".into(), |v| v.to_string())
        ));
        out.push_str(&format!("feedback = {}\n", self.feedback.as_str()));
        out.push_str(&format!("out = {}\n", self.out.display()));
        out.push_str(&format!(
            "expect = {}\n",
            self.expect.map_or("none", Expect::as_str)
        ));
        out.push_str(&format!("repeats = {}\n", self.repeats));
        out.push_str(&format!("timeout = {}\n", self.timeout));
        out.push_str(&format!("reset-period = {}\n", self.reset_period));
        out.push_str(&format!("gas-intervals = {}\n", self.gas_intervals));
        out.push_str(&format!("width = {}\n", self.width));
        out.push_str(&format!("stop-first = {}\n", self.stop_first));
        out
    }
}
