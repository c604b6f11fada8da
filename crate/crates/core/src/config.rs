//! Declarative pipeline configuration: one TOML document surfacing every
//! tunable constant. The defaults are the shipped operating point — τ₁ 0.6,
//! τ₂ 0.7, K 3, temperature 0.0, n 1, three evaluation runs — so an empty
//! file (or no file) runs the pipeline exactly as documented.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dedup::MinHashParams;
use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::qa::DEFAULT_MIN_SEGMENT_CHARS;
use crate::toolchain::ToolchainConfig;
use crate::translate::{Thresholds, TranslateRoles};

/// Near-duplicate detection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupConfig {
    pub minhash: MinHashParams,
    /// Estimated-Jaccard verification threshold for clustering.
    pub threshold: f64,
    pub bands: usize,
    pub rows: usize,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            minhash: MinHashParams::default(),
            threshold: 0.85,
            bands: 16,
            rows: 8,
        }
    }
}

/// Question–answer synthesis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaConfig {
    /// Passages shorter than this merge into a neighbor before synthesis.
    pub min_segment_chars: usize,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            min_segment_chars: DEFAULT_MIN_SEGMENT_CHARS,
        }
    }
}

/// Benchmark evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Number of repeated runs whose metrics are averaged.
    pub runs: u32,
    /// Sampling temperature for every model call.
    pub temperature: f64,
    /// Samples requested per call.
    pub n: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            runs: 3,
            temperature: 0.0,
            n: 1,
        }
    }
}

/// How one provider profile reaches its model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// OpenAI-compatible chat-completions endpoint.
    Http,
    /// Scripted replies from a transcript file.
    Mock,
}

/// One named model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderProfile {
    pub kind: ProviderKind,
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token; empty sends no auth.
    pub api_key_env: String,
    pub rate_per_sec: f64,
    /// Transcript file for `kind = "mock"`.
    pub transcript: Option<String>,
}

impl Default for ProviderProfile {
    fn default() -> Self {
        ProviderProfile {
            kind: ProviderKind::Http,
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            api_key_env: crate::modelgw::MODEL_KEY_ENV.into(),
            rate_per_sec: 2.0,
            transcript: None,
        }
    }
}

/// Which profile serves each pipeline role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleBindings {
    pub repair: String,
    pub translator: String,
    pub scorer: String,
    pub back_translator: String,
    /// Independent problem-description generators (the judge picks one
    /// draft). At least two.
    pub generators: Vec<String>,
    pub judge: String,
    /// QA synthesis model.
    pub synthesizer: String,
    /// Model evaluated by the benchmark harness.
    pub eval: String,
}

impl Default for RoleBindings {
    fn default() -> Self {
        let default = "default".to_string();
        RoleBindings {
            repair: default.clone(),
            translator: default.clone(),
            scorer: default.clone(),
            back_translator: default.clone(),
            generators: vec![default.clone(); 4],
            judge: default.clone(),
            synthesizer: default.clone(),
            eval: default,
        }
    }
}

/// Provider profiles plus role bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ProvidersConfig {
    pub profiles: BTreeMap<String, ProviderProfile>,
    pub roles: RoleBindings,
}

/// Which toolchain backend compiles and runs programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolchainMode {
    Real,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolchainSection {
    pub mode: ToolchainMode,
    pub real: ToolchainConfig,
    /// JSON script file for `mode = "stub"`; a missing script means every
    /// compile succeeds and every run echoes stdin.
    pub stub_script: Option<String>,
}

impl Default for ToolchainSection {
    fn default() -> Self {
        ToolchainSection {
            mode: ToolchainMode::Real,
            real: ToolchainConfig::default(),
            stub_script: None,
        }
    }
}

/// Which embedding backend scores token similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    Hash,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSection {
    pub mode: EmbeddingMode,
    pub dims: usize,
    pub seed: u64,
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection {
            mode: EmbeddingMode::Hash,
            dims: 64,
            seed: 0,
            base_url: "http://localhost:8000/v1".into(),
            model: "embedding-default".into(),
            api_key_env: crate::modelgw::MODEL_KEY_ENV.into(),
        }
    }
}

/// Corpus collection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    /// Code-host search API base URL; empty disables remote search.
    pub host_base_url: String,
    pub rate_per_sec: f64,
    pub keywords: Vec<String>,
    pub extensions: Vec<String>,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            host_base_url: String::new(),
            rate_per_sec: 1.0,
            keywords: vec!["COBOL".into()],
            extensions: vec![".cbl".into(), ".cob".into(), ".cpy".into()],
        }
    }
}

/// The whole pipeline's configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub thresholds: Thresholds,
    pub filter: FilterConfig,
    pub dedup: DedupConfig,
    pub qa: QaConfig,
    pub eval: EvalConfig,
    pub providers: ProvidersConfig,
    pub toolchain: ToolchainSection,
    pub embedding: EmbeddingSection,
    pub ingest: IngestSection,
}

impl PipelineConfig {
    /// Parses a TOML file; missing keys fall back to the defaults.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: PipelineConfig = toml::from_str(&text).map_err(|e| Error::Config {
            detail: format!("{}: {e}", path.display()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Role bindings in the shape the pair-production stage takes.
    pub fn translate_roles(&self) -> TranslateRoles {
        let r = &self.providers.roles;
        TranslateRoles {
            translator: r.translator.clone(),
            scorer: r.scorer.clone(),
            back_translator: r.back_translator.clone(),
            repair: r.repair.clone(),
        }
    }

    /// Cross-field consistency checks.
    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(Error::Config { detail });
        let th = &self.thresholds;
        if !(0.0..=1.0).contains(&th.tau1) || !(0.0..=1.0).contains(&th.tau2) {
            return fail(format!("thresholds must lie in [0, 1]: tau1={}, tau2={}", th.tau1, th.tau2));
        }
        let d = &self.dedup;
        if d.bands * d.rows != d.minhash.num_perms {
            return fail(format!(
                "dedup bands ({}) * rows ({}) must equal num_perms ({})",
                d.bands, d.rows, d.minhash.num_perms
            ));
        }
        if !(0.0..=1.0).contains(&d.threshold) {
            return fail(format!("dedup threshold must lie in [0, 1]: {}", d.threshold));
        }
        if self.eval.runs == 0 {
            return fail("eval runs must be at least 1".into());
        }
        if self.eval.n == 0 {
            return fail("eval n must be at least 1".into());
        }
        let roles = &self.providers.roles;
        if roles.generators.len() < 2 {
            return fail(format!(
                "instruction synthesis needs at least 2 generators, got {}",
                roles.generators.len()
            ));
        }
        // Every bound role must name a known profile. An empty profile map is
        // the implicit single-"default" setup.
        if !self.providers.profiles.is_empty() {
            let mut bound: Vec<(&str, &str)> = vec![
                ("repair", roles.repair.as_str()),
                ("translator", roles.translator.as_str()),
                ("scorer", roles.scorer.as_str()),
                ("back_translator", roles.back_translator.as_str()),
                ("judge", roles.judge.as_str()),
                ("synthesizer", roles.synthesizer.as_str()),
                ("eval", roles.eval.as_str()),
            ];
            for g in &roles.generators {
                bound.push(("generators", g.as_str()));
            }
            for (role, profile) in bound {
                if !self.providers.profiles.contains_key(profile) {
                    return fail(format!("role '{role}' is bound to unknown profile '{profile}'"));
                }
            }
        }
        if self.embedding.dims == 0 {
            return fail("embedding dims must be at least 1".into());
        }
        if self.qa.min_segment_chars == 0 {
            return fail("qa min_segment_chars must be at least 1".into());
        }
        Ok(())
    }

    /// Every profile name any role points at, deduplicated.
    pub fn bound_profiles(&self) -> Vec<String> {
        let roles = &self.providers.roles;
        let mut names: Vec<String> = vec![
            roles.repair.clone(),
            roles.translator.clone(),
            roles.scorer.clone(),
            roles.back_translator.clone(),
            roles.judge.clone(),
            roles.synthesizer.clone(),
            roles.eval.clone(),
        ];
        names.extend(roles.generators.iter().cloned());
        names.sort();
        names.dedup();
        names
    }
}
