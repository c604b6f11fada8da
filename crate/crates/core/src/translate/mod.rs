//! Synthetic Java↔COBOL pair production and two-stage validation: the
//! translated COBOL must compile (with bounded model-assisted repair), the
//! pair must clear a model-judged similarity threshold τ₁, and the
//! back-translated Java must clear a structural embedding-similarity
//! threshold τ₂ after identifier normalization on both sides.

pub mod embedding;
pub mod java_norm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::ingest::{Language, SourceUnit};
use crate::modelgw::{extract_code_block, parse_score, Gateway, GenRequest, TemplateId};
use crate::repair::{validate_and_repair, RepairStatus};
use crate::toolchain::Toolchain;

pub use embedding::{cosine, embedding_f1, token_similarity, Embedder, HashEmbedder, HttpEmbedder};
pub use java_norm::{lex_token_texts, normalize_java};

/// Gate thresholds and the repair budget for pair validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Minimum model-judged pair similarity.
    pub tau1: f64,
    /// Minimum normalized embedding F1 between original and back-translated Java.
    pub tau2: f64,
    /// Maximum repair iterations for uncompilable COBOL.
    pub k: u32,
    /// Whether scores exactly at a threshold pass.
    pub inclusive: bool,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { tau1: 0.6, tau2: 0.7, k: 3, inclusive: true }
    }
}

/// Whether `value` clears `threshold` under the configured boundary rule.
pub fn meets(value: f64, threshold: f64, inclusive: bool) -> bool {
    if inclusive {
        value >= threshold
    } else {
        value > threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Raw,
    Compiled,
    PairOk,
    Validated,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// No code block could be extracted from the translator reply.
    Extraction,
    /// The COBOL side never compiled within the repair budget.
    Compile,
    /// The scorer reply had no usable score after one re-prompt.
    ScoreUnparsable,
    /// Pair score below τ₁.
    BelowTau1,
    /// The original Java source failed structural normalization.
    UnparsableSource,
    /// The back-translated Java failed extraction or normalization after one retry.
    UnparsableBacktranslation,
    /// Embedding similarity below τ₂.
    BelowTau2,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Extraction => "extraction",
            RejectReason::Compile => "compile",
            RejectReason::ScoreUnparsable => "score_unparsable",
            RejectReason::BelowTau1 => "below_tau1",
            RejectReason::UnparsableSource => "unparsable_source",
            RejectReason::UnparsableBacktranslation => "unparsable_backtranslation",
            RejectReason::BelowTau2 => "below_tau2",
        }
    }
}

/// One Java→COBOL translation pair moving through validation. Status advances
/// raw → compiled → pair_ok → validated, or exits to rejected with a reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationPair {
    pub id: String,
    pub java_src: String,
    pub cobol_src: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back_java_src: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ast_sim: Option<f64>,
    pub status: PairStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject_reason: Option<RejectReason>,
}

impl TranslationPair {
    fn reject(mut self, reason: RejectReason) -> Self {
        self.status = PairStatus::Rejected;
        self.reject_reason = Some(reason);
        self
    }
}

/// Provider-profile bindings for the roles involved in pair production.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslateRoles {
    pub translator: String,
    pub scorer: String,
    pub back_translator: String,
    pub repair: String,
}

impl Default for TranslateRoles {
    fn default() -> Self {
        TranslateRoles {
            translator: "default".into(),
            scorer: "default".into(),
            back_translator: "default".into(),
            repair: "default".into(),
        }
    }
}

fn pair_id(java_id: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"pair\0");
    hasher.update(java_id.as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

/// Translates one Java unit to COBOL. Extraction failure rejects the pair;
/// provider failures propagate.
pub fn translate_java_to_cobol(java: &SourceUnit, gateway: &Gateway, translator: &str) -> Result<TranslationPair> {
    let slots = BTreeMap::from([("java_code".to_string(), java.content.clone())]);
    let req = GenRequest::new(TemplateId::TranslateForward, slots);
    let reply = gateway.complete(&req, translator)?;
    let pair = TranslationPair {
        id: pair_id(&java.id),
        java_src: java.content.clone(),
        cobol_src: String::new(),
        pair_score: None,
        back_java_src: None,
        ast_sim: None,
        status: PairStatus::Raw,
        reject_reason: None,
    };
    match extract_code_block(reply.text(), Some("cobol")) {
        Ok(cobol) => Ok(TranslationPair { cobol_src: cobol, ..pair }),
        Err(err) => {
            log::warn!("pair {}: translator reply had no code: {err}", pair.id);
            Ok(pair.reject(RejectReason::Extraction))
        }
    }
}

/// Scores a compiled pair with the model judge. An unparsable reply is
/// re-prompted once; a second failure rejects the pair. The τ₁ gate is
/// applied to the parsed score.
pub fn score_pair(pair: TranslationPair, gateway: &Gateway, scorer: &str, th: &Thresholds) -> Result<TranslationPair> {
    debug_assert_eq!(pair.status, PairStatus::Compiled);
    let slots = BTreeMap::from([
        ("cobol_code".to_string(), pair.cobol_src.clone()),
        ("java_code".to_string(), pair.java_src.clone()),
    ]);
    let req = GenRequest::new(TemplateId::PairScore, slots);
    let mut parsed = None;
    for attempt in 0..2 {
        let reply = gateway.complete(&req, scorer)?;
        match parse_score(reply.text()) {
            Ok(s) => {
                parsed = Some(s);
                break;
            }
            Err(err) => {
                log::warn!("pair {}: score attempt {} unparsable: {err}", pair.id, attempt + 1);
            }
        }
    }
    let Some(score) = parsed else {
        return Ok(pair.reject(RejectReason::ScoreUnparsable));
    };
    let mut pair = pair;
    pair.pair_score = Some(score.score);
    if meets(score.score, th.tau1, th.inclusive) {
        pair.status = PairStatus::PairOk;
        Ok(pair)
    } else {
        Ok(pair.reject(RejectReason::BelowTau1))
    }
}

/// Back-translates the COBOL side to Java and returns the raw extracted Java
/// plus its normalized form. Retries the whole step once before giving up.
fn back_translate(pair: &TranslationPair, gateway: &Gateway, back_translator: &str) -> Result<Option<(String, String)>> {
    let slots = BTreeMap::from([("cobol_code".to_string(), pair.cobol_src.clone())]);
    let req = GenRequest::new(TemplateId::BackTranslate, slots);
    for attempt in 0..2 {
        let reply = gateway.complete(&req, back_translator)?;
        let java = match extract_code_block(reply.text(), Some("java")) {
            Ok(j) => j,
            Err(err) => {
                log::warn!("pair {}: back-translation attempt {} had no code: {err}", pair.id, attempt + 1);
                continue;
            }
        };
        match normalize_java(&java) {
            Ok(normalized) => return Ok(Some((java, normalized))),
            Err(err) => {
                log::warn!("pair {}: back-translation attempt {} unparsable: {err}", pair.id, attempt + 1);
            }
        }
    }
    Ok(None)
}

/// Runs the full validation ladder on a raw pair: bounded compile/repair,
/// τ₁ pair scoring, back-translation, normalization of both Java sources,
/// and the τ₂ embedding-similarity gate. Semantic failures reject the pair;
/// infrastructure failures propagate as errors. Pairs not in `raw` status
/// pass through unchanged.
pub fn validate_pair(
    pair: TranslationPair,
    th: &Thresholds,
    toolchain: &dyn Toolchain,
    gateway: &Gateway,
    roles: &TranslateRoles,
    embedder: &dyn Embedder,
) -> Result<TranslationPair> {
    if pair.status != PairStatus::Raw {
        return Ok(pair);
    }

    // Compile, repairing within the budget.
    let unit = SourceUnit::synthetic(format!("{}.cbl", pair.id), Language::Cobol, pair.cobol_src.clone());
    let trace = validate_and_repair(&unit, th.k, toolchain, gateway, &roles.repair)?;
    let mut pair = pair;
    match trace.final_status {
        RepairStatus::Compiled => {
            pair.cobol_src = trace
                .repaired_code()
                .expect("compiled trace carries code")
                .to_string();
            pair.status = PairStatus::Compiled;
        }
        RepairStatus::Discarded => return Ok(pair.reject(RejectReason::Compile)),
    }

    // τ₁ gate.
    let pair = score_pair(pair, gateway, &roles.scorer, th)?;
    if pair.status != PairStatus::PairOk {
        return Ok(pair);
    }

    // Back-translate and normalize both Java sources.
    let Some((back_java, back_norm)) = back_translate(&pair, gateway, &roles.back_translator)? else {
        return Ok(pair.reject(RejectReason::UnparsableBacktranslation));
    };
    let mut pair = pair;
    pair.back_java_src = Some(back_java);
    let source_norm = match normalize_java(&pair.java_src) {
        Ok(n) => n,
        Err(err) => {
            log::warn!("pair {}: source Java unparsable: {err}", pair.id);
            return Ok(pair.reject(RejectReason::UnparsableSource));
        }
    };

    // τ₂ gate over lexical token streams of the normalized sources.
    let cand = lex_token_texts(&back_norm)?;
    let refv = lex_token_texts(&source_norm)?;
    let sim = token_similarity(embedder, &cand, &refv)?;
    pair.ast_sim = Some(sim);
    if meets(sim, th.tau2, th.inclusive) {
        pair.status = PairStatus::Validated;
        Ok(pair)
    } else {
        Ok(pair.reject(RejectReason::BelowTau2))
    }
}

/// CSV histogram of pair_score and ast_sim over 20 uniform bins in [0, 1],
/// for score-distribution reporting.
pub fn score_histogram_csv(pairs: &[TranslationPair]) -> String {
    const BINS: usize = 20;
    let mut out = String::from("metric,bin_lo,bin_hi,count\n");
    for (metric, pick) in [
        ("pair_score", Box::new(|p: &TranslationPair| p.pair_score) as Box<dyn Fn(&TranslationPair) -> Option<f64>>),
        ("ast_sim", Box::new(|p: &TranslationPair| p.ast_sim)),
    ] {
        let mut counts = [0u64; BINS];
        for p in pairs {
            if let Some(v) = pick(p) {
                let bin = ((v * BINS as f64).floor() as usize).min(BINS - 1);
                counts[bin] += 1;
            }
        }
        for (i, count) in counts.iter().enumerate() {
            let lo = i as f64 / BINS as f64;
            let hi = (i + 1) as f64 / BINS as f64;
            out.push_str(&format!("{metric},{lo:.2},{hi:.2},{count}\n"));
        }
    }
    out
}

/// Debug-time consistency check: field presence and threshold obligations
/// implied by the final status.
pub fn check_pair_invariants(pair: &TranslationPair, th: &Thresholds) -> bool {
    match pair.status {
        PairStatus::Validated => {
            pair.reject_reason.is_none()
                && pair.pair_score.map_or(false, |s| meets(s, th.tau1, th.inclusive))
                && pair.ast_sim.map_or(false, |s| meets(s, th.tau2, th.inclusive))
        }
        PairStatus::Rejected => pair.reject_reason.is_some(),
        _ => pair.reject_reason.is_none(),
    }
}
