//! Stage-to-stage orchestration. Each stage reads its entire input JSONL up
//! front (so a schema mismatch fails before any work starts), invokes the
//! corresponding module, writes its output JSONL plus audit side files, and
//! returns a summary of counts in / out / rejected-by-reason.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{EmbeddingMode, PipelineConfig, ProviderKind, ProviderProfile, ToolchainMode};
use crate::dedup::dedup_corpus;
use crate::error::{Error, Result};
use crate::evalbench::{load_benchmark, run_benchmark, GatewayAnswerer};
use crate::filter::{filter_corpus, rejection_counts};
use crate::ingest::{exclude_repos, search_code_host, walk_local, HttpCodeHost, Language, SearchOptions, SourceUnit};
use crate::instruct::{synthesize_instruction, InstructionSample};
use crate::jsonl;
use crate::modelgw::provider::HttpProvider;
use crate::modelgw::{Gateway, MockProvider, RetryPolicy};
use crate::qa::{synth_qa, DocRecord, QAPair};
use crate::repair::{validate_and_repair, RepairStatus, RepairTrace};
use crate::toolchain::{RealToolchain, StubScript, StubToolchain, Toolchain};
use crate::translate::{
    score_histogram_csv, translate_java_to_cobol, validate_pair, Embedder, HashEmbedder, HttpEmbedder, PairStatus,
    TranslationPair,
};

/// One step of the curation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Ingest,
    Filter,
    Dedup,
    Repair,
    Translate,
    ValidatePairs,
    Instruct,
    Qa,
    Eval,
}

pub const ALL_STAGES: [StageKind; 9] = [
    StageKind::Ingest,
    StageKind::Filter,
    StageKind::Dedup,
    StageKind::Repair,
    StageKind::Translate,
    StageKind::ValidatePairs,
    StageKind::Instruct,
    StageKind::Qa,
    StageKind::Eval,
];

impl StageKind {
    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            StageKind::Ingest => "ingest",
            StageKind::Filter => "filter",
            StageKind::Dedup => "dedup",
            StageKind::Repair => "repair",
            StageKind::Translate => "translate",
            StageKind::ValidatePairs => "validate-pairs",
            StageKind::Instruct => "instruct",
            StageKind::Qa => "qa",
            StageKind::Eval => "eval",
        }
    }

    /// Human-readable stage label used in summary tables.
    pub fn label(self) -> &'static str {
        match self {
            StageKind::Ingest => "Data Collection",
            StageKind::Filter => "Preprocessing: Quality Filtering",
            StageKind::Dedup => "Preprocessing: Deduplication",
            StageKind::Repair => "Stage 1: Compiler-based Validation",
            StageKind::Translate => "Synthetic Translation",
            StageKind::ValidatePairs => "Stage 2: Similarity-based Validation",
            StageKind::Instruct => "Stage 3: Instruction Generation",
            StageKind::Qa => "Question-Answer Synthesis",
            StageKind::Eval => "Evaluation",
        }
    }

    pub fn parse(name: &str) -> Option<StageKind> {
        let name = name.replace('_', "-");
        ALL_STAGES.into_iter().find(|s| s.name() == name)
    }
}

/// Counts reported by one stage run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub label: String,
    pub input: u64,
    pub output: u64,
    /// Dropped records, keyed by machine-readable reason.
    pub rejected: BTreeMap<String, u64>,
}

impl StageSummary {
    fn new(kind: StageKind, input: u64, output: u64, rejected: BTreeMap<String, u64>) -> Self {
        StageSummary {
            stage: kind.name().into(),
            label: kind.label().into(),
            input,
            output,
            rejected,
        }
    }
}

/// Renders stage summaries as a Markdown table, one row per stage.
pub fn summaries_table(rows: &[StageSummary]) -> String {
    let mut out = String::from("| Stage | In | Out | Rejected |\n|---|---|---|---|\n");
    for row in rows {
        let rejected = if row.rejected.is_empty() {
            "-".to_string()
        } else {
            row.rejected
                .iter()
                .map(|(reason, count)| format!("{reason}={count}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            row.label, row.input, row.output, rejected
        ));
    }
    out
}

/// Builds the model gateway from configuration. When `mock_transcript` is
/// set, every bound profile is served by that transcript instead, which makes
/// whole-pipeline runs replayable offline.
pub fn build_gateway(cfg: &PipelineConfig, mock_transcript: Option<&Path>) -> Result<Gateway> {
    if let Some(path) = mock_transcript {
        let provider = Arc::new(MockProvider::from_file(path)?);
        let mut gateway = Gateway::new(RetryPolicy::immediate());
        for profile in cfg.bound_profiles() {
            gateway.register(profile, provider.clone());
        }
        return Ok(gateway);
    }

    let mut gateway = Gateway::new(RetryPolicy::default());
    // An empty profile map means the implicit single-"default" profile.
    let implicit: BTreeMap<String, ProviderProfile>;
    let profiles = if cfg.providers.profiles.is_empty() {
        implicit = BTreeMap::from([("default".to_string(), ProviderProfile::default())]);
        &implicit
    } else {
        &cfg.providers.profiles
    };
    for (name, profile) in profiles {
        let provider: Arc<dyn crate::modelgw::Provider> = match profile.kind {
            ProviderKind::Http => {
                let key_env = if profile.api_key_env.is_empty() {
                    None
                } else {
                    Some(profile.api_key_env.clone())
                };
                Arc::new(HttpProvider::new(
                    name.clone(),
                    profile.base_url.clone(),
                    profile.model.clone(),
                    key_env,
                    profile.rate_per_sec,
                )?)
            }
            ProviderKind::Mock => {
                let path = profile.transcript.as_deref().ok_or_else(|| {
                    Error::config(format!("profile '{name}' is mock but names no transcript file"))
                })?;
                Arc::new(MockProvider::from_file(Path::new(path))?)
            }
        };
        gateway.register(name.clone(), provider);
    }
    Ok(gateway)
}

/// Builds the compile/run backend. `stub_override` forces a scripted stub
/// regardless of the configured mode; a real toolchain is probed immediately
/// so a missing compiler surfaces as an environment error up front.
pub fn build_toolchain(cfg: &PipelineConfig, stub_override: Option<&Path>) -> Result<Box<dyn Toolchain>> {
    if let Some(path) = stub_override {
        return Ok(Box::new(StubToolchain::from_file(path)?));
    }
    match cfg.toolchain.mode {
        ToolchainMode::Stub => match &cfg.toolchain.stub_script {
            Some(path) => Ok(Box::new(StubToolchain::from_file(Path::new(path))?)),
            None => Ok(Box::new(StubToolchain::new(StubScript::default()))),
        },
        ToolchainMode::Real => {
            let toolchain = RealToolchain::new(cfg.toolchain.real.clone());
            toolchain.probe()?;
            Ok(Box::new(toolchain))
        }
    }
}

/// Builds the embedding backend used by similarity validation.
pub fn build_embedder(cfg: &PipelineConfig) -> Box<dyn Embedder> {
    match cfg.embedding.mode {
        EmbeddingMode::Hash => Box::new(HashEmbedder {
            dims: cfg.embedding.dims,
            seed: cfg.embedding.seed,
        }),
        EmbeddingMode::Http => Box::new(HttpEmbedder::new(
            cfg.embedding.base_url.clone(),
            cfg.embedding.model.clone(),
            cfg.embedding.api_key_env.clone(),
        )),
    }
}

/// Whole-pipeline runner: owns the configuration plus the offline overrides
/// and executes one stage at a time.
pub struct StageRunner {
    cfg: PipelineConfig,
    mock_transcript: Option<PathBuf>,
    stub_toolchain: Option<PathBuf>,
}

impl StageRunner {
    pub fn new(cfg: PipelineConfig) -> Self {
        StageRunner {
            cfg,
            mock_transcript: None,
            stub_toolchain: None,
        }
    }

    /// Serves every model role from one transcript file.
    pub fn with_mock_transcript(mut self, path: impl Into<PathBuf>) -> Self {
        self.mock_transcript = Some(path.into());
        self
    }

    /// Replaces the compile/run backend with a scripted stub.
    pub fn with_stub_toolchain(mut self, path: impl Into<PathBuf>) -> Self {
        self.stub_toolchain = Some(path.into());
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    fn gateway(&self) -> Result<Gateway> {
        build_gateway(&self.cfg, self.mock_transcript.as_deref())
    }

    fn toolchain(&self) -> Result<Box<dyn Toolchain>> {
        build_toolchain(&self.cfg, self.stub_toolchain.as_deref())
    }

    /// Runs one stage: `in_path` → `out_path` (side files land next to
    /// `out_path`). Returns the stage summary; the same summary is also
    /// written to `<out>.summary.json`.
    pub fn run_stage(&self, kind: StageKind, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        if kind != StageKind::Ingest && !in_path.exists() {
            return Err(Error::stage(
                kind.name(),
                format!("input {} does not exist", in_path.display()),
            ));
        }
        let summary = match kind {
            StageKind::Ingest => self.ingest_stage(in_path, out_path),
            StageKind::Filter => self.filter_stage(in_path, out_path),
            StageKind::Dedup => self.dedup_stage(in_path, out_path),
            StageKind::Repair => self.repair_stage(in_path, out_path),
            StageKind::Translate => self.translate_stage(in_path, out_path),
            StageKind::ValidatePairs => self.validate_pairs_stage(in_path, out_path),
            StageKind::Instruct => self.instruct_stage(in_path, out_path),
            StageKind::Qa => self.qa_stage(in_path, out_path),
            StageKind::Eval => self.eval_stage(in_path, out_path),
        }?;
        let rendered = serde_json::to_string_pretty(&summary)? + "\n";
        std::fs::write(side_path(out_path, "summary.json"), rendered)?;
        Ok(summary)
    }

    fn ingest_stage(&self, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        let ingest = &self.cfg.ingest;
        // Extensions are accepted with or without a leading dot; the walker
        // and the code-host search both want them bare.
        let extensions: Vec<String> = ingest
            .extensions
            .iter()
            .map(|e| e.trim_start_matches('.').to_string())
            .collect();
        let mut units: Vec<SourceUnit> = Vec::new();
        if in_path.is_dir() {
            units.extend(walk_local(in_path, &extensions)?);
        } else if ingest.host_base_url.is_empty() {
            return Err(Error::Stage {
                stage: "ingest".into(),
                detail: format!(
                    "{} is not a directory and no code host is configured",
                    in_path.display()
                ),
            });
        }
        if !ingest.host_base_url.is_empty() {
            let host = HttpCodeHost::new(ingest.host_base_url.clone(), ingest.rate_per_sec)?;
            units.extend(search_code_host(
                &ingest.keywords,
                &extensions,
                &host,
                &SearchOptions::default(),
            )?);
        }
        let found = units.len() as u64;
        let mut kept = exclude_repos(units);
        let excluded = found - kept.len() as u64;
        kept.sort_by(|a, b| (&a.path, &a.id).cmp(&(&b.path, &b.id)));
        kept.dedup_by(|a, b| a.id == b.id);
        let deduped = found - excluded - kept.len() as u64;
        jsonl::write_all(out_path, &kept)?;
        let mut rejected = BTreeMap::new();
        if excluded > 0 {
            rejected.insert("excluded_repo".into(), excluded);
        }
        if deduped > 0 {
            rejected.insert("duplicate_id".into(), deduped);
        }
        Ok(StageSummary::new(StageKind::Ingest, found, kept.len() as u64, rejected))
    }

    fn filter_stage(&self, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        let units: Vec<SourceUnit> = jsonl::read_all(in_path)?;
        let (kept, reports) = filter_corpus(&units, &self.cfg.filter);
        jsonl::write_all(out_path, &kept)?;
        jsonl::write_all(&side_path(out_path, "reports.jsonl"), &reports)?;
        Ok(StageSummary::new(
            StageKind::Filter,
            units.len() as u64,
            kept.len() as u64,
            rejection_counts(&reports),
        ))
    }

    fn dedup_stage(&self, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        let units: Vec<SourceUnit> = jsonl::read_all(in_path)?;
        let d = &self.cfg.dedup;
        let (kept, clusters) = dedup_corpus(&units, &d.minhash, d.threshold, d.bands, d.rows)?;
        jsonl::write_all(out_path, &kept)?;
        jsonl::write_all(&side_path(out_path, "clusters.jsonl"), &clusters)?;
        let dropped = units.len() as u64 - kept.len() as u64;
        let mut rejected = BTreeMap::new();
        if dropped > 0 {
            rejected.insert("near_duplicate".into(), dropped);
        }
        Ok(StageSummary::new(StageKind::Dedup, units.len() as u64, kept.len() as u64, rejected))
    }

    fn repair_stage(&self, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        let units: Vec<SourceUnit> = jsonl::read_all(in_path)?;
        if units.is_empty() {
            jsonl::write_all(out_path, &units)?;
            return Ok(StageSummary::new(StageKind::Repair, 0, 0, BTreeMap::new()));
        }
        let toolchain = self.toolchain()?;
        let gateway = self.gateway()?;
        let profile = self.cfg.providers.roles.repair.clone();
        let mut kept: Vec<SourceUnit> = Vec::new();
        let mut traces: Vec<RepairTrace> = Vec::new();
        let mut rejected = BTreeMap::new();
        for unit in &units {
            let trace = validate_and_repair(unit, self.cfg.thresholds.k, toolchain.as_ref(), &gateway, &profile)?;
            match trace.final_status {
                RepairStatus::Compiled => {
                    let code = trace.repaired_code().unwrap_or(&unit.content);
                    let mut fixed = unit.clone();
                    fixed.line_count = code.lines().count() as u64;
                    fixed.content = code.to_string();
                    kept.push(fixed);
                }
                RepairStatus::Discarded => {
                    *rejected.entry("uncompilable".to_string()).or_insert(0) += 1;
                }
            }
            traces.push(trace);
        }
        jsonl::write_all(out_path, &kept)?;
        jsonl::write_all(&side_path(out_path, "traces.jsonl"), &traces)?;
        Ok(StageSummary::new(StageKind::Repair, units.len() as u64, kept.len() as u64, rejected))
    }

    fn translate_stage(&self, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        let units: Vec<SourceUnit> = jsonl::read_all(in_path)?;
        if units.is_empty() {
            jsonl::write_all(out_path, &Vec::<TranslationPair>::new())?;
            return Ok(StageSummary::new(StageKind::Translate, 0, 0, BTreeMap::new()));
        }
        let gateway = self.gateway()?;
        let translator = self.cfg.providers.roles.translator.clone();
        let mut pairs: Vec<TranslationPair> = Vec::new();
        let mut rejected = BTreeMap::new();
        for unit in &units {
            let pair = translate_java_to_cobol(unit, &gateway, &translator)?;
            if let Some(reason) = pair.reject_reason {
                *rejected.entry(reason.as_str().to_string()).or_insert(0) += 1;
            }
            pairs.push(pair);
        }
        let produced = pairs.iter().filter(|p| p.status != PairStatus::Rejected).count() as u64;
        jsonl::write_all(out_path, &pairs)?;
        Ok(StageSummary::new(StageKind::Translate, units.len() as u64, produced, rejected))
    }

    fn validate_pairs_stage(&self, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        let pairs: Vec<TranslationPair> = jsonl::read_all(in_path)?;
        if pairs.is_empty() {
            jsonl::write_all(out_path, &pairs)?;
            return Ok(StageSummary::new(StageKind::ValidatePairs, 0, 0, BTreeMap::new()));
        }
        let toolchain = self.toolchain()?;
        let gateway = self.gateway()?;
        let embedder = build_embedder(&self.cfg);
        let roles = self.cfg.translate_roles();
        let th = &self.cfg.thresholds;
        let input = pairs.len() as u64;
        let mut validated: Vec<TranslationPair> = Vec::new();
        let mut rejected = BTreeMap::new();
        for pair in pairs {
            let already_rejected = pair.status == PairStatus::Rejected;
            let pair = validate_pair(pair, th, toolchain.as_ref(), &gateway, &roles, embedder.as_ref())?;
            if let (false, Some(reason)) = (already_rejected, pair.reject_reason) {
                if pair.status == PairStatus::Rejected {
                    *rejected.entry(reason.as_str().to_string()).or_insert(0) += 1;
                }
            }
            validated.push(pair);
        }
        let produced = validated.iter().filter(|p| p.status == PairStatus::Validated).count() as u64;
        jsonl::write_all(out_path, &validated)?;
        std::fs::write(side_path(out_path, "hist.csv"), score_histogram_csv(&validated))?;
        Ok(StageSummary::new(StageKind::ValidatePairs, input, produced, rejected))
    }

    /// Accepts either curated source units or validated translation pairs
    /// (whose COBOL side becomes a synthetic unit).
    fn read_instruct_input(&self, in_path: &Path) -> Result<Vec<SourceUnit>> {
        match jsonl::read_all::<SourceUnit>(in_path) {
            Ok(units) => Ok(units),
            Err(unit_err) => match jsonl::read_all::<TranslationPair>(in_path) {
                Ok(pairs) => Ok(pairs
                    .into_iter()
                    .filter(|p| p.status == PairStatus::Validated)
                    .map(|p| SourceUnit::synthetic(format!("{}.cbl", p.id), Language::Cobol, p.cobol_src))
                    .collect()),
                Err(_) => Err(Error::Stage {
                    stage: "instruct".into(),
                    detail: format!(
                        "{} is neither source units nor translation pairs: {unit_err}",
                        in_path.display()
                    ),
                }),
            },
        }
    }

    fn instruct_stage(&self, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        let units = self.read_instruct_input(in_path)?;
        if units.is_empty() {
            jsonl::write_all(out_path, &Vec::<InstructionSample>::new())?;
            return Ok(StageSummary::new(StageKind::Instruct, 0, 0, BTreeMap::new()));
        }
        let gateway = self.gateway()?;
        let roles = &self.cfg.providers.roles;
        let mut samples: Vec<InstructionSample> = Vec::new();
        let mut rejected = BTreeMap::new();
        for unit in &units {
            match synthesize_instruction(unit, &roles.generators, &roles.judge, &gateway) {
                Ok(Some(sample)) => samples.push(sample),
                Ok(None) => {
                    *rejected.entry("no_candidates".to_string()).or_insert(0) += 1;
                }
                Err(Error::MalformedCandidate { marker }) => {
                    log::warn!("unit {}: winning draft missing section {marker}; sample skipped", unit.id);
                    *rejected.entry("malformed_candidate".to_string()).or_insert(0) += 1;
                }
                Err(err) => return Err(err),
            }
        }
        jsonl::write_all(out_path, &samples)?;
        Ok(StageSummary::new(StageKind::Instruct, units.len() as u64, samples.len() as u64, rejected))
    }

    fn qa_stage(&self, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        let docs: Vec<DocRecord> = jsonl::read_all(in_path)?;
        if docs.is_empty() {
            jsonl::write_all(out_path, &Vec::<QAPair>::new())?;
            return Ok(StageSummary::new(StageKind::Qa, 0, 0, BTreeMap::new()));
        }
        let gateway = self.gateway()?;
        let synthesizer = self.cfg.providers.roles.synthesizer.clone();
        let min_chars = self.cfg.qa.min_segment_chars;
        let mut pairs: Vec<QAPair> = Vec::new();
        let mut rejected = BTreeMap::new();
        for doc in &docs {
            match synth_qa(doc, &gateway, &synthesizer, min_chars) {
                Ok(doc_pairs) if doc_pairs.is_empty() => {
                    *rejected.entry("no_pairs".to_string()).or_insert(0) += 1;
                }
                Ok(doc_pairs) => pairs.extend(doc_pairs),
                Err(Error::Stage { detail, .. }) => {
                    log::warn!("doc {}: {detail}; skipped", doc.id);
                    *rejected.entry("empty_doc".to_string()).or_insert(0) += 1;
                }
                Err(err) => return Err(err),
            }
        }
        jsonl::write_all(out_path, &pairs)?;
        Ok(StageSummary::new(StageKind::Qa, docs.len() as u64, pairs.len() as u64, rejected))
    }

    fn eval_stage(&self, in_path: &Path, out_path: &Path) -> Result<StageSummary> {
        let tasks = load_benchmark(in_path)?;
        if tasks.is_empty() {
            jsonl::write_all(out_path, &Vec::<crate::evalbench::EvalReport>::new())?;
            return Ok(StageSummary::new(StageKind::Eval, 0, 0, BTreeMap::new()));
        }
        let toolchain = self.toolchain()?;
        let gateway = self.gateway()?;
        let answerer = GatewayAnswerer {
            gateway: &gateway,
            profile: self.cfg.providers.roles.eval.clone(),
        };
        let benchmark = in_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "benchmark".into());
        let report = run_benchmark(benchmark, &tasks, &answerer, self.cfg.eval.runs, toolchain.as_ref())?;
        let mut rejected = BTreeMap::new();
        for record in &report.per_task {
            if let Some(failure) = record.failure {
                let key = serde_json::to_value(failure)?
                    .as_str()
                    .unwrap_or("unknown")
                    .to_string();
                *rejected.entry(key).or_insert(0) += 1;
            }
        }
        let passed = report.per_task.iter().filter(|r| r.passed).count() as u64;
        jsonl::write_all(out_path, &[report])?;
        Ok(StageSummary::new(StageKind::Eval, tasks.len() as u64, passed, rejected))
    }
}

/// `out.jsonl` + `reports.jsonl` → `out.reports.jsonl`, keeping side files
/// next to the stage output they describe.
fn side_path(out_path: &Path, suffix: &str) -> PathBuf {
    out_path.with_extension(suffix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Origin;
    use crate::toolchain::ToolchainConfig;

    fn cobol_program(lines: usize, tag: &str) -> String {
        let mut out = format!("IDENTIFICATION DIVISION.\nPROGRAM-ID. {tag}.\nPROCEDURE DIVISION.\n");
        for i in 0..lines.saturating_sub(4) {
            out.push_str(&format!("    DISPLAY \"{tag}-{i}\".\n"));
        }
        out.push_str("    STOP RUN.\n");
        out
    }

    fn unit(path: &str, content: &str) -> SourceUnit {
        SourceUnit::new(Origin::Local, None, path, Language::Cobol, content, false)
    }

    fn stub_runner() -> StageRunner {
        let mut cfg = PipelineConfig::default();
        cfg.toolchain.mode = ToolchainMode::Stub;
        StageRunner::new(cfg)
    }

    fn write_transcript(dir: &Path, lines: &[serde_json::Value]) -> PathBuf {
        let path = dir.join("transcript.jsonl");
        let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn stage_names_round_trip() {
        for kind in ALL_STAGES {
            assert_eq!(StageKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(StageKind::parse("validate_pairs"), Some(StageKind::ValidatePairs));
        assert_eq!(StageKind::parse("nonsense"), None);
    }

    #[test]
    fn filter_stage_reports_fixture_counts() {
        let dir = tempfile::tempdir().unwrap();
        let in_path = dir.path().join("corpus.jsonl");
        let out_path = dir.path().join("kept.jsonl");
        let units = vec![
            unit("a.cbl", &cobol_program(30, "A")),
            unit("b.cbl", "DISPLAY 1.\n"),
            unit("c.cbl", &cobol_program(25, "C")),
            unit("d.cbl", "STOP RUN.\n"),
            unit("e.cbl", &cobol_program(40, "E")),
        ];
        jsonl::write_all(&in_path, &units).unwrap();

        let summary = stub_runner().run_stage(StageKind::Filter, &in_path, &out_path).unwrap();
        assert_eq!(summary.input, 5);
        assert_eq!(summary.output, 3);
        assert_eq!(summary.rejected.get("too_short"), Some(&2));
        let kept: Vec<SourceUnit> = jsonl::read_all(&out_path).unwrap();
        assert_eq!(kept.len(), 3);
        assert!(side_path(&out_path, "reports.jsonl").exists());
        assert!(side_path(&out_path, "summary.json").exists());
    }

    #[test]
    fn chained_repair_translate_on_empty_input_is_all_zero() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.jsonl");
        std::fs::write(&empty, "").unwrap();
        let repaired = dir.path().join("repaired.jsonl");
        let pairs = dir.path().join("pairs.jsonl");

        let runner = stub_runner();
        let s1 = runner.run_stage(StageKind::Repair, &empty, &repaired).unwrap();
        let s2 = runner.run_stage(StageKind::Translate, &repaired, &pairs).unwrap();
        for s in [&s1, &s2] {
            assert_eq!((s.input, s.output), (0, 0));
            assert!(s.rejected.is_empty());
        }
        assert!(pairs.exists());
    }

    #[test]
    fn missing_input_is_a_stage_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = stub_runner()
            .run_stage(
                StageKind::Filter,
                &dir.path().join("nope.jsonl"),
                &dir.path().join("out.jsonl"),
            )
            .unwrap_err();
        assert!(matches!(err, Error::Stage { .. }));
    }

    #[test]
    fn schema_mismatch_fails_before_any_output() {
        let dir = tempfile::tempdir().unwrap();
        let in_path = dir.path().join("pairs.jsonl");
        let out_path = dir.path().join("kept.jsonl");
        // Translation pairs are not source units: the filter stage must
        // fail on parse, before writing anything.
        std::fs::write(&in_path, "{\"id\":\"x\",\"java_src\":\"class A {}\"}\n").unwrap();
        let err = stub_runner().run_stage(StageKind::Filter, &in_path, &out_path).unwrap_err();
        assert!(matches!(err, Error::Stage { .. }));
        assert!(!out_path.exists());
    }

    #[test]
    fn eval_without_toolchain_is_environment_error() {
        let dir = tempfile::tempdir().unwrap();
        let bench = dir.path().join("bench.jsonl");
        std::fs::write(
            &bench,
            "{\"task_id\":\"t1\",\"kind\":\"gen_cobol\",\"prompt\":\"Write it.\",\"tests\":[{\"stdin\":\"\",\"expected_stdout\":\"1\\n\"}]}\n",
        )
        .unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.toolchain.real = ToolchainConfig {
            cobc_path: "definitely-not-a-compiler-xyz".into(),
            javac_path: "definitely-not-a-compiler-xyz".into(),
            java_path: "definitely-not-a-compiler-xyz".into(),
            ..ToolchainConfig::default()
        };
        let err = StageRunner::new(cfg)
            .run_stage(StageKind::Eval, &bench, &dir.path().join("report.jsonl"))
            .unwrap_err();
        assert!(err.is_environment());
    }

    #[test]
    fn dedup_stage_drops_near_duplicates_and_writes_clusters() {
        let dir = tempfile::tempdir().unwrap();
        let in_path = dir.path().join("corpus.jsonl");
        let out_path = dir.path().join("unique.jsonl");
        let base = cobol_program(40, "SAME");
        let units = vec![
            unit("a.cbl", &base),
            unit("b.cbl", &base),
            unit("c.cbl", &cobol_program(35, "OTHER")),
        ];
        jsonl::write_all(&in_path, &units).unwrap();

        let summary = stub_runner().run_stage(StageKind::Dedup, &in_path, &out_path).unwrap();
        assert_eq!(summary.input, 3);
        assert_eq!(summary.output, 2);
        assert_eq!(summary.rejected.get("near_duplicate"), Some(&1));
        assert!(side_path(&out_path, "clusters.jsonl").exists());
    }

    #[test]
    fn repair_stage_replaces_content_for_fixed_units() {
        let dir = tempfile::tempdir().unwrap();
        let in_path = dir.path().join("corpus.jsonl");
        let out_path = dir.path().join("compiled.jsonl");
        let good = cobol_program(30, "GOOD");
        let bad = cobol_program(30, "BROKEN");
        jsonl::write_all(&in_path, &[unit("good.cbl", &good), unit("bad.cbl", &bad)]).unwrap();

        let stub = serde_json::json!({
            "default": {"ok": true},
            "rules": [{"when_contains": "BROKEN", "ok": false, "log": "syntax error near BROKEN"}]
        });
        let stub_path = dir.path().join("stub.json");
        std::fs::write(&stub_path, stub.to_string()).unwrap();
        let fixed_code = cobol_program(30, "FIXED");
        let transcript = write_transcript(
            dir.path(),
            &[serde_json::json!({
                "template": "repair",
                "text": format!("```cobol\n{fixed_code}```")
            })],
        );

        let runner = stub_runner()
            .with_stub_toolchain(&stub_path)
            .with_mock_transcript(&transcript);
        let summary = runner.run_stage(StageKind::Repair, &in_path, &out_path).unwrap();
        assert_eq!(summary.input, 2);
        assert_eq!(summary.output, 2, "the broken unit is repaired and kept");
        let kept: Vec<SourceUnit> = jsonl::read_all(&out_path).unwrap();
        let bad_after = kept.iter().find(|u| u.path == "bad.cbl").unwrap();
        assert!(bad_after.content.contains("FIXED"));
        assert!(side_path(&out_path, "traces.jsonl").exists());
    }

    #[test]
    fn translate_stage_counts_extraction_failures() {
        let dir = tempfile::tempdir().unwrap();
        let in_path = dir.path().join("java.jsonl");
        let out_path = dir.path().join("pairs.jsonl");
        let a = SourceUnit::new(Origin::Local, None, "A.java", Language::Java, "class A { int x = 1; }", false);
        let b = SourceUnit::new(Origin::Local, None, "B.java", Language::Java, "class B { int y = 2; }", false);
        jsonl::write_all(&in_path, &[a, b]).unwrap();
        let transcript = write_transcript(
            dir.path(),
            &[
                serde_json::json!({
                    "template": "translate_forward",
                    "when_contains": "class A",
                    "text": "```cobol\nIDENTIFICATION DIVISION.\nPROGRAM-ID. A.\n```"
                }),
                serde_json::json!({
                    "template": "translate_forward",
                    "text": "```cobol\n```"
                }),
            ],
        );

        let runner = stub_runner().with_mock_transcript(&transcript);
        let summary = runner.run_stage(StageKind::Translate, &in_path, &out_path).unwrap();
        assert_eq!(summary.input, 2);
        assert_eq!(summary.output, 1);
        assert_eq!(summary.rejected.get("extraction"), Some(&1));
        let pairs: Vec<TranslationPair> = jsonl::read_all(&out_path).unwrap();
        assert_eq!(pairs.len(), 2, "rejected pairs stay in the file for audit");
    }

    #[test]
    fn instruct_stage_accepts_validated_pairs_as_input() {
        let dir = tempfile::tempdir().unwrap();
        let in_path = dir.path().join("pairs.jsonl");
        let out_path = dir.path().join("samples.jsonl");
        let pair = TranslationPair {
            id: "p1".into(),
            java_src: "class A {}".into(),
            cobol_src: cobol_program(25, "PAIRED"),
            pair_score: Some(0.9),
            back_java_src: None,
            ast_sim: Some(0.95),
            status: PairStatus::Validated,
            reject_reason: None,
        };
        let rejected_pair = TranslationPair {
            id: "p2".into(),
            java_src: "class B {}".into(),
            cobol_src: String::new(),
            pair_score: None,
            back_java_src: None,
            ast_sim: None,
            status: PairStatus::Rejected,
            reject_reason: Some(crate::translate::RejectReason::Extraction),
        };
        jsonl::write_all(&in_path, &[pair, rejected_pair]).unwrap();
        let draft = "[Problem Description]\nPrint the paired lines.\n[IO Description]\nNo input; prints lines.\n[Solution]\n```cobol\nDISPLAY 1.\n```\n[Explanation]\nStraight display.";
        let transcript = write_transcript(
            dir.path(),
            &[
                serde_json::json!({"template": "instr_gen", "text": draft}),
                serde_json::json!({"template": "instr_judge", "text": "Best option: 1"}),
            ],
        );

        let runner = stub_runner().with_mock_transcript(&transcript);
        let summary = runner.run_stage(StageKind::Instruct, &in_path, &out_path).unwrap();
        assert_eq!(summary.input, 1, "only the validated pair becomes a unit");
        assert_eq!(summary.output, 1);
        let samples: Vec<InstructionSample> = jsonl::read_all(&out_path).unwrap();
        assert_eq!(samples[0].source, crate::instruct::SampleSource::Synthetic);
    }

    #[test]
    fn qa_stage_synthesizes_per_segment() {
        let dir = tempfile::tempdir().unwrap();
        let in_path = dir.path().join("docs.jsonl");
        let out_path = dir.path().join("qa.jsonl");
        let long = "COBOL PERFORM loops repeat paragraphs until a condition holds. ".repeat(5);
        let docs = vec![
            DocRecord { id: "d1".into(), text: long },
            DocRecord { id: "d2".into(), text: "   ".into() },
        ];
        jsonl::write_all(&in_path, &docs).unwrap();
        let transcript = write_transcript(
            dir.path(),
            &[serde_json::json!({
                "template": "qa_synth",
                "text": "Question: What repeats paragraphs?\nAnswer: The PERFORM statement."
            })],
        );

        let runner = stub_runner().with_mock_transcript(&transcript);
        let summary = runner.run_stage(StageKind::Qa, &in_path, &out_path).unwrap();
        assert_eq!(summary.input, 2);
        assert_eq!(summary.output, 1);
        assert_eq!(summary.rejected.get("empty_doc"), Some(&1));
    }

    #[test]
    fn eval_stage_writes_report_and_failure_counts() {
        let dir = tempfile::tempdir().unwrap();
        let bench = dir.path().join("bench.jsonl");
        let out_path = dir.path().join("report.jsonl");
        std::fs::write(
            &bench,
            concat!(
                "{\"task_id\":\"t1\",\"kind\":\"gen_cobol\",\"prompt\":\"Echo input.\",\"tests\":[{\"stdin\":\"5\\n\",\"expected_stdout\":\"5\\n\"}]}\n",
                "{\"task_id\":\"t2\",\"kind\":\"gen_cobol\",\"prompt\":\"Impossible.\",\"tests\":[{\"stdin\":\"\",\"expected_stdout\":\"42\\n\"}]}\n",
            ),
        )
        .unwrap();
        let stub = serde_json::json!({"default": {"ok": true, "echo_stdin": true}});
        let stub_path = dir.path().join("stub.json");
        std::fs::write(&stub_path, stub.to_string()).unwrap();
        let transcript = write_transcript(
            dir.path(),
            &[serde_json::json!({"text": "```cobol\nDISPLAY X.\n```"})],
        );

        let runner = stub_runner()
            .with_stub_toolchain(&stub_path)
            .with_mock_transcript(&transcript);
        let summary = runner.run_stage(StageKind::Eval, &bench, &out_path).unwrap();
        assert_eq!(summary.input, 2);
        assert_eq!(summary.output, 1, "echo passes t1, misses t2");
        assert_eq!(summary.rejected.get("wrong_output"), Some(&1));
        let reports: Vec<crate::evalbench::EvalReport> = jsonl::read_all(&out_path).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].runs, 3);
    }

    #[test]
    fn summaries_table_renders_one_row_per_stage() {
        let rows = vec![
            StageSummary::new(StageKind::Filter, 5, 3, BTreeMap::from([("too_short".to_string(), 2)])),
            StageSummary::new(StageKind::Dedup, 3, 2, BTreeMap::new()),
        ];
        let table = summaries_table(&rows);
        assert!(table.contains("| Preprocessing: Quality Filtering | 5 | 3 | too_short=2 |"));
        assert!(table.contains("| Preprocessing: Deduplication | 3 | 2 | - |"));
    }

    #[test]
    fn stage_reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let in_path = dir.path().join("corpus.jsonl");
        jsonl::write_all(
            &in_path,
            &[unit("a.cbl", &cobol_program(30, "A")), unit("b.cbl", "short\n")],
        )
        .unwrap();
        let runner = stub_runner();
        let out1 = dir.path().join("one.jsonl");
        let out2 = dir.path().join("two.jsonl");
        runner.run_stage(StageKind::Filter, &in_path, &out1).unwrap();
        runner.run_stage(StageKind::Filter, &in_path, &out2).unwrap();
        let bytes1 = std::fs::read(&out1).unwrap();
        let bytes2 = std::fs::read(&out2).unwrap();
        assert!(!bytes1.is_empty());
        assert_eq!(bytes1, bytes2);
    }
}
