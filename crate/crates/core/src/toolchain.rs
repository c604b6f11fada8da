//! Compiler-in-the-loop execution: real GnuCOBOL/JDK invocation and a
//! scripted stub for hermetic tests.
//!
//! Every real compilation happens in a fresh temporary directory owned by
//! the returned artifact, so concurrent compiles never share state and
//! artifacts stay runnable until dropped.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SourceUnit;

/// Exit code reported when a run is killed at its deadline.
pub const TIMEOUT_EXIT_CODE: i32 = -124;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetLang {
    Cobol,
    Java,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: Option<u32>,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileOutcome {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub raw_log: String,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
    pub duration_ms: u64,
}

/// Opaque handle to a compiled program. Holds the temp directory alive for
/// real toolchains; carries the scripted behavior for the stub.
#[derive(Debug)]
pub struct Artifact {
    kind: ArtifactKind,
}

#[derive(Debug)]
enum ArtifactKind {
    CobolBinary {
        dir: tempfile::TempDir,
        binary: PathBuf,
    },
    JavaClass {
        dir: tempfile::TempDir,
        class: String,
    },
    Stub {
        rule: StubRule,
    },
}

impl Artifact {
    /// Directory backing a real artifact; `None` for stubs. Exposed for
    /// hermeticity checks and debugging.
    pub fn dir_path(&self) -> Option<&Path> {
        match &self.kind {
            ArtifactKind::CobolBinary { dir, .. } => Some(dir.path()),
            ArtifactKind::JavaClass { dir, .. } => Some(dir.path()),
            ArtifactKind::Stub { .. } => None,
        }
    }
}

/// Compile-and-run backend. Implementations must be safe to share across
/// threads; stage runners compile in parallel.
pub trait Toolchain: Send + Sync {
    /// Compiles a unit. The artifact is `Some` exactly when `ok` is true.
    fn compile(&self, source: &SourceUnit, lang: TargetLang) -> Result<(CompileOutcome, Option<Artifact>)>;

    /// Runs a previously compiled artifact with the given stdin.
    fn run(&self, artifact: &Artifact, stdin_data: &str, timeout_ms: u64) -> Result<RunOutcome>;
}

// ---------------------------------------------------------------------------
// Diagnostics parsing
// ---------------------------------------------------------------------------

fn cobol_diag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?P<file>[^:\s][^:]*):\s*(?P<line>\d+)\s*:\s*(?P<sev>[Ee]rror|[Ww]arning)\s*:?\s*(?P<msg>.*)$").unwrap()
    })
}

fn java_diag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?P<file>[^:\s][^:]*):(?P<line>\d+):\s*(?P<sev>[Ee]rror|[Ww]arning)\s*:?\s*(?P<msg>.*)$").unwrap()
    })
}

fn summary_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d+\s+(errors?|warnings?)\s*$").unwrap())
}

/// Parses compiler output into structured diagnostics. Lines that look like
/// diagnostics but do not match the per-compiler shape land in a catch-all
/// bucket with no line number, so nothing that mentions an error is lost.
pub fn parse_diagnostics(raw_log: &str, lang: TargetLang) -> Vec<Diagnostic> {
    let re = match lang {
        TargetLang::Cobol => cobol_diag_regex(),
        TargetLang::Java => java_diag_regex(),
    };
    let mut out = Vec::new();
    for line in raw_log.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || summary_line_regex().is_match(trimmed) {
            continue;
        }
        if let Some(caps) = re.captures(trimmed) {
            let severity = if caps["sev"].eq_ignore_ascii_case("error") {
                Severity::Error
            } else {
                Severity::Warning
            };
            out.push(Diagnostic {
                line: caps["line"].parse().ok(),
                severity,
                message: caps["msg"].trim().to_string(),
            });
        } else if trimmed.to_ascii_lowercase().contains("error") {
            out.push(Diagnostic {
                line: None,
                severity: Severity::Error,
                message: trimmed.to_string(),
            });
        }
    }
    out
}

/// A successful compile must not report error diagnostics; anything the
/// parser flagged as an error on a clean exit is parser noise.
fn reconcile_diagnostics(ok: bool, mut diagnostics: Vec<Diagnostic>) -> Vec<Diagnostic> {
    if ok {
        diagnostics.retain(|d| d.severity != Severity::Error);
    }
    diagnostics
}

// ---------------------------------------------------------------------------
// Subprocess plumbing
// ---------------------------------------------------------------------------

struct Captured {
    exit_code: i32,
    success: bool,
    stdout: String,
    stderr: String,
    timed_out: bool,
    duration_ms: u64,
}

/// Spawns a command, feeds stdin, and enforces a wall-clock deadline by
/// polling. Readers drain stdout/stderr on their own threads so a chatty
/// child cannot deadlock against a full pipe.
fn run_with_timeout(cmd: &mut Command, stdin_data: Option<&str>, timeout: Duration) -> Result<Captured> {
    let started = Instant::now();
    cmd.stdout(Stdio::piped()).stderr(Stdio::piped());
    cmd.stdin(if stdin_data.is_some() {
        Stdio::piped()
    } else {
        Stdio::null()
    });

    let mut child = cmd.spawn().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::environment(format!("executable not found: {:?}", cmd.get_program()))
        } else {
            Error::Io(e)
        }
    })?;

    let stdout_handle = child.stdout.take().expect("stdout piped");
    let stderr_handle = child.stderr.take().expect("stderr piped");
    let out_reader = std::thread::spawn(move || read_lossy(stdout_handle));
    let err_reader = std::thread::spawn(move || read_lossy(stderr_handle));

    if let Some(data) = stdin_data {
        if let Some(mut stdin) = child.stdin.take() {
            // A child that exits early closes the pipe; that is not an error.
            let _ = stdin.write_all(data.as_bytes());
        }
    }

    let deadline = started + timeout;
    let mut timed_out = false;
    let status = loop {
        match child.try_wait()? {
            Some(status) => break status,
            None => {
                if Instant::now() >= deadline {
                    timed_out = true;
                    let _ = child.kill();
                    break child.wait()?;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    };

    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    let exit_code = if timed_out {
        TIMEOUT_EXIT_CODE
    } else {
        status.code().unwrap_or(-1)
    };
    Ok(Captured {
        exit_code,
        success: status.success() && !timed_out,
        stdout,
        stderr,
        timed_out,
        duration_ms: started.elapsed().as_millis() as u64,
    })
}

fn read_lossy(mut handle: impl std::io::Read) -> String {
    let mut buf = Vec::new();
    let _ = handle.read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).into_owned()
}

fn combine_logs(stderr: &str, stdout: &str) -> String {
    match (stderr.is_empty(), stdout.is_empty()) {
        (true, true) => String::new(),
        (false, true) => stderr.to_string(),
        (true, false) => stdout.to_string(),
        (false, false) => format!("{stderr}\n{stdout}"),
    }
}

// ---------------------------------------------------------------------------
// Real toolchain
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolchainConfig {
    pub cobc_path: String,
    pub javac_path: String,
    pub java_path: String,
    /// Extra flags passed to cobc before `-o` (e.g. `-free`).
    pub cobol_flags: Vec<String>,
    pub compile_timeout_ms: u64,
    pub run_timeout_ms: u64,
    /// Version prefixes the installation is expected to report; mismatches
    /// log a warning, never an error.
    pub expected_cobol_version: Option<String>,
    pub expected_java_version: Option<String>,
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        ToolchainConfig {
            cobc_path: "cobc".into(),
            javac_path: "javac".into(),
            java_path: "java".into(),
            cobol_flags: vec!["-x".into()],
            compile_timeout_ms: 30_000,
            run_timeout_ms: 10_000,
            expected_cobol_version: Some("2.0.0".into()),
            expected_java_version: Some("17".into()),
        }
    }
}

pub struct RealToolchain {
    config: ToolchainConfig,
}

impl RealToolchain {
    pub fn new(config: ToolchainConfig) -> Self {
        RealToolchain { config }
    }

    /// Verifies the configured binaries exist and logs a warning when their
    /// reported versions do not start with the expected prefix.
    pub fn probe(&self) -> Result<()> {
        let cobc = probe_version(&self.config.cobc_path, "--version")?;
        if let Some(expected) = &self.config.expected_cobol_version {
            warn_on_version_mismatch(&self.config.cobc_path, &cobc, expected);
        }
        let javac = probe_version(&self.config.javac_path, "-version")?;
        if let Some(expected) = &self.config.expected_java_version {
            warn_on_version_mismatch(&self.config.javac_path, &javac, expected);
        }
        probe_version(&self.config.java_path, "-version")?;
        Ok(())
    }

    /// True when all three binaries can be invoked.
    pub fn available(config: &ToolchainConfig) -> bool {
        RealToolchain::new(config.clone()).probe().is_ok()
    }
}

fn probe_version(binary: &str, flag: &str) -> Result<String> {
    let output = Command::new(binary).arg(flag).output().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::environment(format!("executable not found: {binary}"))
        } else {
            Error::Io(e)
        }
    })?;
    Ok(combine_logs(
        &String::from_utf8_lossy(&output.stderr),
        &String::from_utf8_lossy(&output.stdout),
    ))
}

fn warn_on_version_mismatch(binary: &str, reported: &str, expected_prefix: &str) {
    static VERSION_RE: OnceLock<Regex> = OnceLock::new();
    let re = VERSION_RE.get_or_init(|| Regex::new(r"(\d+\.\d+(?:\.\d+)?)").unwrap());
    match re.captures(reported).map(|c| c[1].to_string()) {
        Some(version) if version.starts_with(expected_prefix) => {}
        Some(version) => {
            log::warn!("{binary} reports version {version}, expected {expected_prefix}*");
        }
        None => log::warn!("{binary} version could not be determined from: {reported}"),
    }
}

fn java_class_name(source: &str) -> String {
    static PUBLIC_RE: OnceLock<Regex> = OnceLock::new();
    static ANY_RE: OnceLock<Regex> = OnceLock::new();
    let public_re = PUBLIC_RE.get_or_init(|| {
        Regex::new(r"public\s+(?:final\s+|abstract\s+|strictfp\s+)*class\s+([A-Za-z_$][A-Za-z0-9_$]*)")
            .unwrap()
    });
    let any_re = ANY_RE
        .get_or_init(|| Regex::new(r"\bclass\s+([A-Za-z_$][A-Za-z0-9_$]*)").unwrap());
    public_re
        .captures(source)
        .or_else(|| any_re.captures(source))
        .map(|c| c[1].to_string())
        .unwrap_or_else(|| "Main".to_string())
}

impl Toolchain for RealToolchain {
    fn compile(&self, source: &SourceUnit, lang: TargetLang) -> Result<(CompileOutcome, Option<Artifact>)> {
        let dir = tempfile::tempdir()?;
        let timeout = Duration::from_millis(self.config.compile_timeout_ms);

        let (captured, artifact_kind) = match lang {
            TargetLang::Cobol => {
                let src_path = dir.path().join("prog.cbl");
                std::fs::write(&src_path, &source.content)?;
                let binary = dir.path().join("prog");
                let mut cmd = Command::new(&self.config.cobc_path);
                cmd.args(&self.config.cobol_flags)
                    .arg("-o")
                    .arg(&binary)
                    .arg(&src_path)
                    .current_dir(dir.path());
                let captured = run_with_timeout(&mut cmd, None, timeout)?;
                (captured, ArtifactKind::CobolBinary { dir, binary })
            }
            TargetLang::Java => {
                let class = java_class_name(&source.content);
                let src_path = dir.path().join(format!("{class}.java"));
                std::fs::write(&src_path, &source.content)?;
                let mut cmd = Command::new(&self.config.javac_path);
                cmd.arg(src_path.file_name().unwrap()).current_dir(dir.path());
                let captured = run_with_timeout(&mut cmd, None, timeout)?;
                (captured, ArtifactKind::JavaClass { dir, class })
            }
        };

        let raw_log = combine_logs(&captured.stderr, &captured.stdout);
        let ok = captured.success;
        let mut diagnostics = parse_diagnostics(&raw_log, lang);
        if captured.timed_out {
            diagnostics.push(Diagnostic {
                line: None,
                severity: Severity::Error,
                message: format!("compiler timed out after {}ms", self.config.compile_timeout_ms),
            });
        }
        let outcome = CompileOutcome {
            ok,
            diagnostics: reconcile_diagnostics(ok, diagnostics),
            raw_log,
            duration_ms: captured.duration_ms,
        };
        let artifact = if ok {
            Some(Artifact {
                kind: artifact_kind,
            })
        } else {
            None
        };
        Ok((outcome, artifact))
    }

    fn run(&self, artifact: &Artifact, stdin_data: &str, timeout_ms: u64) -> Result<RunOutcome> {
        let timeout = Duration::from_millis(timeout_ms);
        let mut cmd = match &artifact.kind {
            ArtifactKind::CobolBinary { dir, binary } => {
                let mut cmd = Command::new(binary);
                cmd.current_dir(dir.path());
                cmd
            }
            ArtifactKind::JavaClass { dir, class } => {
                let mut cmd = Command::new(&self.config.java_path);
                cmd.arg("-cp").arg(dir.path()).arg(class);
                cmd
            }
            ArtifactKind::Stub { .. } => {
                return Err(Error::config("stub artifact passed to real toolchain"));
            }
        };
        let captured = run_with_timeout(&mut cmd, Some(stdin_data), timeout)?;
        Ok(RunOutcome {
            exit_code: captured.exit_code,
            stdout: captured.stdout,
            stderr: captured.stderr,
            timed_out: captured.timed_out,
            duration_ms: captured.duration_ms,
        })
    }
}

// ---------------------------------------------------------------------------
// Stub toolchain
// ---------------------------------------------------------------------------

/// One scripted behavior: how a matching compile should report, and how the
/// resulting artifact should behave when run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StubRule {
    /// Matches when the source content contains this substring.
    pub when_contains: Option<String>,
    #[serde(default = "default_true")]
    pub ok: bool,
    /// Compiler log to parse diagnostics from.
    pub log: Option<String>,
    pub stdout: Option<String>,
    pub stderr: Option<String>,
    pub exit_code: i32,
    /// Echo stdin back as stdout when no explicit stdout applies.
    pub echo_stdin: bool,
    /// Simulate a run that never finishes: reports a timeout.
    pub hang: bool,
    /// Exact stdin (trimmed) to stdout lookup, for multi-test tasks.
    pub io: Option<BTreeMap<String, String>>,
}

fn default_true() -> bool {
    true
}

impl Default for StubRule {
    fn default() -> Self {
        StubRule {
            when_contains: None,
            ok: true,
            log: None,
            stdout: None,
            stderr: None,
            exit_code: 0,
            echo_stdin: false,
            hang: false,
            io: None,
        }
    }
}

impl StubRule {
    pub fn compile_ok() -> Self {
        StubRule {
            ok: true,
            ..StubRule::default()
        }
    }

    pub fn compile_fail(log: &str) -> Self {
        StubRule {
            ok: false,
            log: Some(log.to_string()),
            ..StubRule::default()
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StubScript {
    /// Fallback when nothing else matches.
    pub default: StubRule,
    /// Content-matched rules, first match wins.
    pub rules: Vec<StubRule>,
    /// FIFO of outcomes consumed before any rule matching.
    pub script: Vec<StubRule>,
}

/// Deterministic scripted toolchain. Compilation consumes the FIFO script
/// first, then falls back to substring rules, then to the default. All
/// durations are zero so reruns serialize identically.
pub struct StubToolchain {
    default: StubRule,
    rules: Vec<StubRule>,
    script: Mutex<VecDeque<StubRule>>,
    compiles: AtomicU64,
    runs: AtomicU64,
}

impl StubToolchain {
    pub fn new(script: StubScript) -> Self {
        StubToolchain {
            default: script.default,
            rules: script.rules,
            script: Mutex::new(script.script.into()),
            compiles: AtomicU64::new(0),
            runs: AtomicU64::new(0),
        }
    }

    pub fn always_ok() -> Self {
        StubToolchain::new(StubScript::default())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let script: StubScript = serde_json::from_str(&text)?;
        Ok(StubToolchain::new(script))
    }

    pub fn compile_count(&self) -> u64 {
        self.compiles.load(Ordering::SeqCst)
    }

    pub fn run_count(&self) -> u64 {
        self.runs.load(Ordering::SeqCst)
    }

    fn pick_rule(&self, content: &str) -> StubRule {
        if let Some(rule) = self.script.lock().unwrap().pop_front() {
            return rule;
        }
        for rule in &self.rules {
            match &rule.when_contains {
                Some(needle) if content.contains(needle.as_str()) => return rule.clone(),
                _ => {}
            }
        }
        self.default.clone()
    }
}

impl Toolchain for StubToolchain {
    fn compile(&self, source: &SourceUnit, lang: TargetLang) -> Result<(CompileOutcome, Option<Artifact>)> {
        self.compiles.fetch_add(1, Ordering::SeqCst);
        let rule = self.pick_rule(&source.content);
        let raw_log = rule.log.clone().unwrap_or_default();
        let diagnostics = reconcile_diagnostics(rule.ok, parse_diagnostics(&raw_log, lang));
        let outcome = CompileOutcome {
            ok: rule.ok,
            diagnostics,
            raw_log,
            duration_ms: 0,
        };
        let artifact = if rule.ok {
            Some(Artifact {
                kind: ArtifactKind::Stub { rule },
            })
        } else {
            None
        };
        Ok((outcome, artifact))
    }

    fn run(&self, artifact: &Artifact, stdin_data: &str, _timeout_ms: u64) -> Result<RunOutcome> {
        self.runs.fetch_add(1, Ordering::SeqCst);
        let rule = match &artifact.kind {
            ArtifactKind::Stub { rule } => rule,
            _ => return Err(Error::config("real artifact passed to stub toolchain")),
        };
        if rule.hang {
            return Ok(RunOutcome {
                exit_code: TIMEOUT_EXIT_CODE,
                stdout: String::new(),
                stderr: String::new(),
                timed_out: true,
                duration_ms: 0,
            });
        }
        let stdout = if let Some(io) = &rule.io {
            io.get(stdin_data.trim()).cloned().unwrap_or_default()
        } else if let Some(fixed) = &rule.stdout {
            fixed.clone()
        } else if rule.echo_stdin {
            stdin_data.to_string()
        } else {
            String::new()
        };
        Ok(RunOutcome {
            exit_code: rule.exit_code,
            stdout,
            stderr: rule.stderr.clone().unwrap_or_default(),
            timed_out: false,
            duration_ms: 0,
        })
    }
}
