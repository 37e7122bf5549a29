use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::assignment::TypeAssignment;
use crate::project::{apply_assignment, ProjectSource};

pub const COHERENCE_SCHEMA_VERSION: u32 = 1;

/// Checker error codes that indicate incoherent types.
pub const COUNTED_CODES: [&str; 5] = ["attr-defined", "arg-type", "return-value", "assignment", "name-defined"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckerConfig {
    pub program: String,
    /// Arguments placed before the checked path.
    pub args: Vec<String>,
    pub codes: Vec<String>,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        CheckerConfig {
            program: "mypy".into(),
            args: [
                "--show-error-codes",
                "--show-column-numbers",
                "--no-error-summary",
                "--no-color-output",
                "--hide-error-context",
                "--ignore-missing-imports",
                "--explicit-package-bases",
                "--cache-dir=/dev/null",
            ]
            .map(String::from)
            .to_vec(),
            codes: COUNTED_CODES.map(String::from).to_vec(),
        }
    }
}

impl CheckerConfig {
    /// A whitespace-separated command line; the default flags are kept only
    /// when the command is a bare program name.
    pub fn from_command_line(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace().map(String::from);
        let program = parts.next()?;
        let args: Vec<String> = parts.collect();
        let defaults = CheckerConfig::default();
        Some(CheckerConfig { program, args: if args.is_empty() { defaults.args } else { args }, codes: defaults.codes })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub schema_version: u32,
    /// False when the checker could not be run; all counts are then zero.
    pub available: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Sum of `per_code`.
    pub total: usize,
    pub per_code: BTreeMap<String, usize>,
    /// Output lines that are neither a coded diagnostic nor a note.
    pub unparsed: usize,
    pub raw_output: String,
}

impl CoherenceReport {
    fn unavailable(codes: &[String], reason: String) -> Self {
        CoherenceReport {
            schema_version: COHERENCE_SCHEMA_VERSION,
            available: false,
            reason: Some(reason),
            total: 0,
            per_code: codes.iter().map(|c| (c.clone(), 0)).collect(),
            unparsed: 0,
            raw_output: String::new(),
        }
    }
}

fn diagnostic_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?P<path>.+?):(?P<line>\d+):(?:(?P<col>\d+):)? (?P<severity>error|warning|note): (?P<message>.*?)(?:\s+\[(?P<code>[a-z0-9-]+)\])?\s*$")
            .expect("valid regex")
    })
}

/// Counts coded errors per code in `codes`. Returns (counts, unparsed lines).
pub fn parse_checker_output(text: &str, codes: &[String]) -> (BTreeMap<String, usize>, usize) {
    let mut counts: BTreeMap<String, usize> = codes.iter().map(|c| (c.clone(), 0)).collect();
    let mut unparsed = 0;
    for line in text.lines().map(str::trim_end).filter(|l| !l.trim().is_empty()) {
        let Some(c) = diagnostic_regex().captures(line) else {
            if !(line.starts_with("Success:") || line.starts_with("Found ")) {
                unparsed += 1;
            }
            continue;
        };
        if &c["severity"] != "error" {
            continue;
        }
        match c.name("code") {
            Some(code) => {
                if let Some(n) = counts.get_mut(code.as_str()) {
                    *n += 1;
                }
            }
            None => unparsed += 1,
        }
    }
    (counts, unparsed)
}

/// Runs the checker on `project_dir` (as the working directory).
pub fn coherence_errors(project_dir: &Path, checker: &CheckerConfig) -> CoherenceReport {
    let output = Command::new(&checker.program).args(&checker.args).arg(".").current_dir(project_dir).output();
    let output = match output {
        Ok(o) => o,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return CoherenceReport::unavailable(&checker.codes, format!("checker `{}` not found", checker.program))
        }
        Err(e) => return CoherenceReport::unavailable(&checker.codes, format!("cannot run `{}`: {e}", checker.program)),
    };
    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&output.stderr);
    // mypy exits with 0 (clean) or 1 (errors found); anything else is a crash
    // or a usage error.
    if !matches!(output.status.code(), Some(0 | 1)) {
        let detail = stderr.lines().chain(stdout.lines()).next().unwrap_or("no output").to_string();
        return CoherenceReport::unavailable(&checker.codes, format!("checker failed ({}): {detail}", output.status));
    }
    let (per_code, unparsed) = parse_checker_output(&stdout, &checker.codes);
    CoherenceReport {
        schema_version: COHERENCE_SCHEMA_VERSION,
        available: true,
        reason: None, total: per_code.values().sum(), per_code,
        unparsed,
        raw_output: stdout,
    }
}

/// Checks several projects with at most `workers` checker processes.
pub fn coherence_errors_many(dirs: &[PathBuf], checker: &CheckerConfig, workers: usize) -> Vec<CoherenceReport> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build();
    match pool {
        Ok(pool) => pool.install(|| dirs.par_iter().map(|d| coherence_errors(d, checker)).collect()),
        Err(_) => dirs.iter().map(|d| coherence_errors(d, checker)).collect(),
    }
}

/// Writes `project` annotated with `assignment` to a scratch directory and
/// checks it.
pub fn coherence_of_assignment(
    project: &ProjectSource,
    assignment: &TypeAssignment,
    checker: &CheckerConfig,
) -> CoherenceReport {
    let (annotated, _) = apply_assignment(project, assignment);
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    let dir = std::env::temp_dir().join(format!("pytypefill-check-{}-{nanos}", std::process::id()));
    if let Err(e) = annotated.write_to(&dir) {
        return CoherenceReport::unavailable(&checker.codes, format!("cannot write annotated project: {e}"));
    }
    let report = coherence_errors(&dir, checker);
    if let Err(e) = std::fs::remove_dir_all(&dir) {
        log::warn!("cannot remove {}: {e}", dir.display());
    }
    report
}
