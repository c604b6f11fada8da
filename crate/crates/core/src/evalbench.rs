//! Execution-based benchmark scoring: compile-success rate (CSR) and Pass@1
//! over stdin/stdout test cases, for COBOL generation and both translation
//! directions, with arithmetic averaging across repeated runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Language, SourceUnit};
use crate::jsonl;
use crate::modelgw::{extract_code_block, Gateway};
use crate::toolchain::{TargetLang, Toolchain};

/// Wall-clock budget for one test-case execution.
pub const RUN_TIMEOUT_MS: u64 = 10_000;

/// What a task asks the model to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Generate a COBOL program from a specification.
    GenCobol,
    /// Translate COBOL to Java.
    C2j,
    /// Translate Java to COBOL.
    J2c,
}

impl TaskKind {
    /// Language the produced program must compile as.
    pub fn target_lang(self) -> TargetLang {
        match self {
            TaskKind::GenCobol | TaskKind::J2c => TargetLang::Cobol,
            TaskKind::C2j => TargetLang::Java,
        }
    }

    fn language(self) -> Language {
        match self {
            TaskKind::GenCobol | TaskKind::J2c => Language::Cobol,
            TaskKind::C2j => Language::Java,
        }
    }

    fn lang_hint(self) -> &'static str {
        match self {
            TaskKind::GenCobol | TaskKind::J2c => "cobol",
            TaskKind::C2j => "java",
        }
    }

    fn extension(self) -> &'static str {
        match self {
            TaskKind::GenCobol | TaskKind::J2c => "cbl",
            TaskKind::C2j => "java",
        }
    }
}

/// One stdin/stdout test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub stdin: String,
    pub expected_stdout: String,
}

/// One benchmark task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkTask {
    pub task_id: String,
    pub kind: TaskKind,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub tests: Vec<TestCase>,
}

/// Why a task did not pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    NoCode,
    CompileError,
    RuntimeError,
    Timeout,
    WrongOutput,
}

/// Outcome of evaluating one task once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub task_id: String,
    pub compiled: bool,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureKind>,
}

/// Metrics of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: u32,
    pub csr_percent: f64,
    pub pass_at_1: f64,
}

/// Scored benchmark result for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub benchmark: String,
    pub model: String,
    /// Percentage of tasks whose output compiled, averaged over runs.
    pub csr_percent: f64,
    /// Percentage of tasks whose output passed every test, averaged over runs.
    pub pass_at_1: f64,
    /// Task-level records from the first run (runs are identical under
    /// deterministic backends; the per-run breakdown carries the variance).
    pub per_task: Vec<EvalRecord>,
    pub per_run: Vec<RunMetrics>,
    pub runs: u32,
}

/// Loads a JSONL benchmark (one task per line), validating ids are unique,
/// prompts non-empty, and every task has at least one test. Task order is
/// file order.
pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkTask>> {
    let tasks: Vec<BenchmarkTask> = jsonl::read_all(path)?;
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for task in &tasks {
        let fail = |field: &str, detail: &str| {
            Err(Error::BenchLoad {
                task_id: task.task_id.clone(),
                field: field.to_string(),
                detail: detail.to_string(),
            })
        };
        if task.task_id.trim().is_empty() {
            return fail("task_id", "must be non-empty");
        }
        if !seen.insert(&task.task_id) {
            return fail("task_id", "duplicate id");
        }
        if task.prompt.trim().is_empty() {
            return fail("prompt", "must be non-empty");
        }
        if task.tests.is_empty() {
            return fail("tests", "must contain at least one test case");
        }
    }
    Ok(tasks)
}

/// Line-wise output comparison: trailing whitespace is stripped per line and
/// trailing blank lines are ignored (fixed-width COBOL DISPLAY output pads
/// records with spaces).
pub fn output_matches(actual: &str, expected: &str) -> bool {
    fn canon(text: &str) -> Vec<&str> {
        let mut lines: Vec<&str> = text.lines().map(str::trim_end).collect();
        while lines.last() == Some(&"") {
            lines.pop();
        }
        lines
    }
    canon(actual) == canon(expected)
}

/// Compiles and runs one model output against a task's tests. Every way to
/// fail is encoded in the record; only toolchain environment errors
/// propagate.
pub fn evaluate_task(
    task: &BenchmarkTask,
    model_output: &str,
    toolchain: &dyn Toolchain,
) -> Result<EvalRecord> {
    let record = |compiled: bool, passed: bool, failure: Option<FailureKind>| EvalRecord {
        task_id: task.task_id.clone(),
        compiled,
        passed,
        failure,
    };

    let code = match extract_code_block(model_output, Some(task.kind.lang_hint())) {
        Ok(code) if !code.trim().is_empty() => code,
        _ => return Ok(record(false, false, Some(FailureKind::NoCode))),
    };

    let unit = SourceUnit::synthetic(
        format!("{}.{}", task.task_id, task.kind.extension()),
        task.kind.language(),
        code,
    );
    let (outcome, artifact) = toolchain.compile(&unit, task.kind.target_lang())?;
    let Some(artifact) = artifact.filter(|_| outcome.ok) else {
        return Ok(record(false, false, Some(FailureKind::CompileError)));
    };

    for test in &task.tests {
        let run = toolchain.run(&artifact, &test.stdin, RUN_TIMEOUT_MS)?;
        if run.timed_out {
            return Ok(record(true, false, Some(FailureKind::Timeout)));
        }
        if run.exit_code != 0 {
            return Ok(record(true, false, Some(FailureKind::RuntimeError)));
        }
        if !output_matches(&run.stdout, &test.expected_stdout) {
            return Ok(record(true, false, Some(FailureKind::WrongOutput)));
        }
    }
    Ok(record(true, true, None))
}

/// Produces one model output per task per run. `run` is 0-based.
pub trait TaskAnswerer: Sync {
    fn answer(&self, task: &BenchmarkTask, run: u32) -> Result<String>;
    /// Name recorded in the report.
    fn model_name(&self) -> &str;
}

/// Zero-shot answerer: sends the task prompt verbatim through the gateway at
/// temperature 0.0, n=1.
pub struct GatewayAnswerer<'a> {
    pub gateway: &'a Gateway,
    pub profile: String,
}

impl TaskAnswerer for GatewayAnswerer<'_> {
    fn answer(&self, task: &BenchmarkTask, _run: u32) -> Result<String> {
        let reply = self.gateway.complete_raw(&task.prompt, &self.profile, 0.0, 1)?;
        Ok(reply.text().to_string())
    }

    fn model_name(&self) -> &str {
        &self.profile
    }
}

/// Fixed task→output map, used for oracle self-tests and deterministic
/// replays.
pub struct CannedAnswerer {
    pub name: String,
    pub outputs: BTreeMap<String, String>,
}

impl CannedAnswerer {
    /// Answers every task with its own reference solution — the benchmark
    /// self-test (a well-formed benchmark scores 100/100).
    pub fn from_references(name: impl Into<String>, tasks: &[BenchmarkTask]) -> Result<Self> {
        let mut outputs = BTreeMap::new();
        for task in tasks {
            let reference = task.reference.clone().ok_or_else(|| Error::BenchLoad {
                task_id: task.task_id.clone(),
                field: "reference".into(),
                detail: "task has no reference solution".into(),
            })?;
            outputs.insert(task.task_id.clone(), reference);
        }
        Ok(CannedAnswerer {
            name: name.into(),
            outputs,
        })
    }
}

impl TaskAnswerer for CannedAnswerer {
    fn answer(&self, task: &BenchmarkTask, _run: u32) -> Result<String> {
        self.outputs
            .get(&task.task_id)
            .cloned()
            .ok_or_else(|| Error::Provider {
                provider: self.name.clone(),
                detail: format!("no canned output for task '{}'", task.task_id),
            })
    }

    fn model_name(&self) -> &str {
        &self.name
    }
}

/// CSR and Pass@1 (both percent) for one run's records.
pub fn run_metrics(records: &[EvalRecord]) -> (f64, f64) {
    if records.is_empty() {
        return (0.0, 0.0);
    }
    let total = records.len() as f64;
    let compiled = records.iter().filter(|r| r.compiled).count() as f64;
    let passed = records.iter().filter(|r| r.passed).count() as f64;
    (100.0 * compiled / total, 100.0 * passed / total)
}

/// Scores a benchmark: per run, one generation per task (tasks in parallel,
/// runs sequential); per-run percentages are arithmetically averaged. A
/// provider failure on a task records `no_code` and the run continues.
pub fn run_benchmark(
    benchmark: impl Into<String>,
    tasks: &[BenchmarkTask],
    answerer: &dyn TaskAnswerer,
    runs: u32,
    toolchain: &(dyn Toolchain + Sync),
) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::config("benchmark needs at least 1 run"));
    }
    if tasks.is_empty() {
        return Err(Error::config("benchmark has no tasks"));
    }
    let mut per_run = Vec::with_capacity(runs as usize);
    let mut first_run: Vec<EvalRecord> = Vec::new();
    for run in 0..runs {
        let mut records = tasks
            .par_iter()
            .map(|task| {
                let output = match answerer.answer(task, run) {
                    Ok(output) => output,
                    Err(err) if err.is_environment() => return Err(err),
                    Err(err) => {
                        log::warn!("task {}: generation failed: {err}", task.task_id);
                        return Ok(EvalRecord {
                            task_id: task.task_id.clone(),
                            compiled: false,
                            passed: false,
                            failure: Some(FailureKind::NoCode),
                        });
                    }
                };
                evaluate_task(task, &output, toolchain)
            })
            .collect::<Result<Vec<EvalRecord>>>()?;
        records.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        let (csr, pass) = run_metrics(&records);
        per_run.push(RunMetrics {
            run,
            csr_percent: csr,
            pass_at_1: pass,
        });
        if run == 0 {
            first_run = records;
        }
    }
    let n = runs as f64;
    let csr_percent = per_run.iter().map(|m| m.csr_percent).sum::<f64>() / n;
    let pass_at_1 = per_run.iter().map(|m| m.pass_at_1).sum::<f64>() / n;
    Ok(EvalReport {
        benchmark: benchmark.into(),
        model: answerer.model_name().to_string(),
        csr_percent,
        pass_at_1,
        per_task: first_run,
        per_run,
        runs,
    })
}

/// Text table of one or more reports in the familiar `Model | CSR | Pass@1`
/// layout.
pub fn render_report_table(reports: &[EvalReport]) -> String {
    let mut out = String::from("| Model | CSR | Pass@1 |\n|---|---|---|\n");
    for report in reports {
        out.push_str(&format!(
            "| {} | {:.2} | {:.2} |\n",
            report.model, report.csr_percent, report.pass_at_1
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolchain::{StubRule, StubScript, StubToolchain};
    use proptest::prelude::*;

    fn echo_toolchain() -> StubToolchain {
        StubToolchain::new(StubScript {
            default: StubRule {
                echo_stdin: true,
                ..StubRule::default()
            },
            ..StubScript::default()
        })
    }

    fn task(id: &str, reference: &str, tests: Vec<(&str, &str)>) -> BenchmarkTask {
        BenchmarkTask {
            task_id: id.into(),
            kind: TaskKind::GenCobol,
            prompt: format!("Write a COBOL program for task {id}."),
            reference: Some(reference.into()),
            tests: tests
                .into_iter()
                .map(|(stdin, out)| TestCase {
                    stdin: stdin.into(),
                    expected_stdout: out.into(),
                })
                .collect(),
        }
    }

    fn echo_task(id: &str) -> BenchmarkTask {
        task(id, &format!("ECHO-PROGRAM {id}"), vec![("7", "7")])
    }

    #[test]
    fn kinds_map_to_their_target_language() {
        assert_eq!(TaskKind::GenCobol.target_lang(), TargetLang::Cobol);
        assert_eq!(TaskKind::J2c.target_lang(), TargetLang::Cobol);
        assert_eq!(TaskKind::C2j.target_lang(), TargetLang::Java);
        assert_eq!(serde_json::to_string(&TaskKind::GenCobol).unwrap(), "\"gen_cobol\"");
        assert_eq!(serde_json::to_string(&TaskKind::C2j).unwrap(), "\"c2j\"");
        assert_eq!(serde_json::to_string(&TaskKind::J2c).unwrap(), "\"j2c\"");
    }

    #[test]
    fn load_reads_tasks_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.jsonl");
        let tasks = vec![echo_task("t-b"), echo_task("t-a"), echo_task("t-c")];
        jsonl::write_all(&path, &tasks).unwrap();
        let loaded = load_benchmark(&path).unwrap();
        assert_eq!(loaded, tasks);
    }

    #[test]
    fn load_rejects_empty_tests() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.jsonl");
        let mut bad = echo_task("t-1");
        bad.tests.clear();
        jsonl::write_all(&path, &[bad]).unwrap();
        let err = load_benchmark(&path).unwrap_err();
        assert!(
            matches!(err, Error::BenchLoad { ref task_id, ref field, .. } if task_id == "t-1" && field == "tests")
        );
    }

    #[test]
    fn load_rejects_duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.jsonl");
        jsonl::write_all(&path, &[echo_task("t-1"), echo_task("t-1")]).unwrap();
        let err = load_benchmark(&path).unwrap_err();
        assert!(matches!(err, Error::BenchLoad { ref field, .. } if field == "task_id"));
    }

    #[test]
    fn load_rejects_empty_prompt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.jsonl");
        let mut bad = echo_task("t-1");
        bad.prompt = "  ".into();
        jsonl::write_all(&path, &[bad]).unwrap();
        let err = load_benchmark(&path).unwrap_err();
        assert!(matches!(err, Error::BenchLoad { ref field, .. } if field == "prompt"));
    }

    #[test]
    fn reference_output_compiles_and_passes() {
        let tc = echo_toolchain();
        let record = evaluate_task(
            &echo_task("t-1"),
            "```cobol\nECHO-PROGRAM t-1\n```",
            &tc,
        )
        .unwrap();
        assert_eq!(
            record,
            EvalRecord {
                task_id: "t-1".into(),
                compiled: true,
                passed: true,
                failure: None,
            }
        );
    }

    #[test]
    fn unfenced_output_still_evaluates() {
        let tc = echo_toolchain();
        let record = evaluate_task(&echo_task("t-1"), "ECHO-PROGRAM t-1", &tc).unwrap();
        assert!(record.passed);
    }

    #[test]
    fn empty_output_records_no_code() {
        let tc = echo_toolchain();
        let record = evaluate_task(&echo_task("t-1"), "   \n", &tc).unwrap();
        assert_eq!(record.failure, Some(FailureKind::NoCode));
        assert!(!record.compiled && !record.passed);
    }

    #[test]
    fn broken_output_records_compile_error() {
        let tc = StubToolchain::new(StubScript {
            rules: vec![StubRule {
                when_contains: Some("BROKEN".into()),
                ok: false,
                log: Some("prog.cbl:1: error: syntax error".into()),
                ..StubRule::default()
            }],
            ..StubScript::default()
        });
        let record = evaluate_task(&echo_task("t-1"), "BROKEN PROGRAM", &tc).unwrap();
        assert_eq!(record.failure, Some(FailureKind::CompileError));
        assert!(!record.compiled);
    }

    #[test]
    fn wrong_value_on_a_later_test_records_wrong_output() {
        let tc = StubToolchain::new(StubScript {
            rules: vec![StubRule {
                when_contains: Some("SQUARER".into()),
                io: Some(BTreeMap::from([
                    ("1".to_string(), "1".to_string()),
                    ("2".to_string(), "5".to_string()),
                    ("3".to_string(), "9".to_string()),
                ])),
                ..StubRule::default()
            }],
            ..StubScript::default()
        });
        let t = task("t-sq", "SQUARER", vec![("1", "1"), ("2", "4"), ("3", "9")]);
        let record = evaluate_task(&t, "SQUARER", &tc).unwrap();
        assert!(record.compiled);
        assert!(!record.passed);
        assert_eq!(record.failure, Some(FailureKind::WrongOutput));
    }

    #[test]
    fn hanging_run_records_timeout() {
        let tc = StubToolchain::new(StubScript {
            rules: vec![StubRule {
                when_contains: Some("SLEEPER".into()),
                hang: true,
                ..StubRule::default()
            }],
            ..StubScript::default()
        });
        let record = evaluate_task(&echo_task("t-1"), "SLEEPER", &tc).unwrap();
        assert_eq!(record.failure, Some(FailureKind::Timeout));
        assert!(record.compiled && !record.passed);
    }

    #[test]
    fn nonzero_exit_records_runtime_error() {
        let tc = StubToolchain::new(StubScript {
            rules: vec![StubRule {
                when_contains: Some("CRASHER".into()),
                exit_code: 2,
                stderr: Some("abend".into()),
                ..StubRule::default()
            }],
            ..StubScript::default()
        });
        let record = evaluate_task(&echo_task("t-1"), "CRASHER", &tc).unwrap();
        assert_eq!(record.failure, Some(FailureKind::RuntimeError));
    }

    #[test]
    fn output_matching_forgives_trailing_padding_and_blank_lines() {
        assert!(output_matches("HELLO   \nWORLD\n\n\n", "HELLO\nWORLD"));
        assert!(output_matches("42", "42\n"));
        assert!(!output_matches("HELLO\nWORLD", "HELLO\nMOON"));
        assert!(!output_matches("HELLO", "HELLO\nWORLD"));
        assert!(!output_matches("  HELLO", "HELLO", ), "leading whitespace is significant");
    }

    #[test]
    fn four_task_fixture_scores_csr_75_pass_50() {
        // Outcomes: (compile, pass) = (T,T), (T,F), (F, -), (T,T).
        let tc = StubToolchain::new(StubScript {
            default: StubRule {
                echo_stdin: true,
                ..StubRule::default()
            },
            rules: vec![
                StubRule {
                    when_contains: Some("WRONG".into()),
                    stdout: Some("unexpected".into()),
                    ..StubRule::default()
                },
                StubRule {
                    when_contains: Some("BROKEN".into()),
                    ok: false,
                    ..StubRule::default()
                },
            ],
            ..StubScript::default()
        });
        let tasks = vec![
            echo_task("t-1"),
            task("t-2", "WRONG", vec![("7", "7")]),
            task("t-3", "BROKEN", vec![("7", "7")]),
            echo_task("t-4"),
        ];
        let outputs = BTreeMap::from([
            ("t-1".to_string(), "ECHO-PROGRAM t-1".to_string()),
            ("t-2".to_string(), "WRONG".to_string()),
            ("t-3".to_string(), "BROKEN".to_string()),
            ("t-4".to_string(), "ECHO-PROGRAM t-4".to_string()),
        ]);
        let answerer = CannedAnswerer {
            name: "fixture-model".into(),
            outputs,
        };
        let report = run_benchmark("mini", &tasks, &answerer, 1, &tc).unwrap();
        assert_eq!(report.csr_percent, 75.0);
        assert_eq!(report.pass_at_1, 50.0);
        assert_eq!(report.per_task.len(), 4);
        assert_eq!(report.model, "fixture-model");
        let failed: Vec<_> = report
            .per_task
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.task_id.as_str())
            .collect();
        assert_eq!(failed, vec!["t-2", "t-3"]);
    }

    #[test]
    fn oracle_ceiling_references_score_100_100() {
        let tasks: Vec<BenchmarkTask> = (0..5).map(|i| echo_task(&format!("t-{i}"))).collect();
        let answerer = CannedAnswerer::from_references("oracle", &tasks).unwrap();
        let report = run_benchmark("mini", &tasks, &answerer, 3, &echo_toolchain()).unwrap();
        assert_eq!(report.csr_percent, 100.0);
        assert_eq!(report.pass_at_1, 100.0);
        assert!(report.per_task.iter().all(|r| r.passed));
    }

    /// Passes `run + 1` tasks out of ten, so per-run Pass@1 is 10, 20, 30.
    struct ImprovingAnswerer;

    impl TaskAnswerer for ImprovingAnswerer {
        fn answer(&self, task: &BenchmarkTask, run: u32) -> Result<String> {
            let index: u32 = task.task_id.trim_start_matches("t-").parse().unwrap();
            if index <= run {
                Ok(format!("ECHO-PROGRAM {}", task.task_id))
            } else {
                Ok("WRONG".into())
            }
        }
        fn model_name(&self) -> &str {
            "improving"
        }
    }

    #[test]
    fn three_run_average_of_10_20_30_is_exactly_20() {
        let tc = StubToolchain::new(StubScript {
            default: StubRule {
                echo_stdin: true,
                ..StubRule::default()
            },
            rules: vec![StubRule {
                when_contains: Some("WRONG".into()),
                stdout: Some("unexpected".into()),
                ..StubRule::default()
            }],
            ..StubScript::default()
        });
        let tasks: Vec<BenchmarkTask> = (0..10).map(|i| echo_task(&format!("t-{i}"))).collect();
        let report = run_benchmark("mini", &tasks, &ImprovingAnswerer, 3, &tc).unwrap();
        let per_run: Vec<f64> = report.per_run.iter().map(|m| m.pass_at_1).collect();
        assert_eq!(per_run, vec![10.0, 20.0, 30.0]);
        assert_eq!(report.pass_at_1, 20.0);
        assert_eq!(report.csr_percent, 100.0, "wrong answers still compile");
    }

    /// Fails generation for one specific task.
    struct FlakyAnswerer;

    impl TaskAnswerer for FlakyAnswerer {
        fn answer(&self, task: &BenchmarkTask, _run: u32) -> Result<String> {
            if task.task_id == "t-1" {
                Err(Error::Provider {
                    provider: "flaky".into(),
                    detail: "overloaded".into(),
                })
            } else {
                Ok(format!("ECHO-PROGRAM {}", task.task_id))
            }
        }
        fn model_name(&self) -> &str {
            "flaky"
        }
    }

    #[test]
    fn generation_failure_records_no_code_and_continues() {
        let tasks = vec![echo_task("t-0"), echo_task("t-1"), echo_task("t-2")];
        let report = run_benchmark("mini", &tasks, &FlakyAnswerer, 1, &echo_toolchain()).unwrap();
        let by_id: BTreeMap<&str, &EvalRecord> = report
            .per_task
            .iter()
            .map(|r| (r.task_id.as_str(), r))
            .collect();
        assert_eq!(by_id["t-1"].failure, Some(FailureKind::NoCode));
        assert!(by_id["t-0"].passed && by_id["t-2"].passed);
        assert!((report.pass_at_1 - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn reports_serialize_identically_across_reruns() {
        let tasks: Vec<BenchmarkTask> = (0..4).map(|i| echo_task(&format!("t-{i}"))).collect();
        let answerer = CannedAnswerer::from_references("oracle", &tasks).unwrap();
        let a = run_benchmark("mini", &tasks, &answerer, 2, &echo_toolchain()).unwrap();
        let b = run_benchmark("mini", &tasks, &answerer, 2, &echo_toolchain()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn table_renders_model_csr_pass_columns() {
        let report = EvalReport {
            benchmark: "mini".into(),
            model: "demo-model".into(),
            csr_percent: 73.951,
            pass_at_1: 49.333,
            per_task: vec![],
            per_run: vec![],
            runs: 3,
        };
        let table = render_report_table(&[report]);
        assert!(table.starts_with("| Model | CSR | Pass@1 |"));
        assert!(table.contains("| demo-model | 73.95 | 49.33 |"));
    }

    proptest! {
        #[test]
        fn pass_never_exceeds_csr_and_both_are_percentages(
            outcomes in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..50)
        ) {
            let records: Vec<EvalRecord> = outcomes
                .iter()
                .enumerate()
                .map(|(i, (compiled, passed))| EvalRecord {
                    task_id: format!("t-{i}"),
                    compiled: *compiled,
                    // passed ⇒ compiled, enforced at construction.
                    passed: *compiled && *passed,
                    failure: None,
                })
                .collect();
            let (csr, pass) = run_metrics(&records);
            prop_assert!((0.0..=100.0).contains(&csr));
            prop_assert!((0.0..=100.0).contains(&pass));
            prop_assert!(pass <= csr);
        }
    }
}
