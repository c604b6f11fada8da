//! Compiler-in-the-loop repair: compile, feed diagnostics to the model,
//! recompile, up to a bounded number of iterations.
//!
//! For a budget of K iterations the loop makes at most K model calls and
//! K + 1 compilations (the initial one plus one per accepted candidate). A
//! candidate byte-identical to the code it was asked to fix is a fixed
//! point: the loop discards the unit immediately instead of burning budget.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::SourceUnit;
use crate::modelgw::{extract_code_block, Gateway, GenRequest, TemplateId};
use crate::toolchain::{CompileOutcome, TargetLang, Toolchain};

/// Compiler logs are truncated to this many trailing characters before being
/// shown to the model; the tail carries the errors that matter.
pub const LOG_TAIL_CHARS: usize = 8_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub code: String,
    pub outcome: CompileOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairStatus {
    Compiled,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairTrace {
    pub unit_id: String,
    /// Every compiled version in order; index 0 is the original program.
    pub attempts: Vec<Attempt>,
    pub final_status: RepairStatus,
    /// Model iterations consumed, including ones whose reply was unusable.
    pub iterations_used: u32,
}

impl RepairTrace {
    /// The code that finally compiled, when the loop succeeded.
    pub fn repaired_code(&self) -> Option<&str> {
        match self.final_status {
            RepairStatus::Compiled => self.attempts.last().map(|a| a.code.as_str()),
            RepairStatus::Discarded => None,
        }
    }
}

/// Last `max_chars` characters of `text` (whole string when shorter).
pub fn log_tail(text: &str, max_chars: usize) -> &str {
    let total = text.chars().count();
    if total <= max_chars {
        return text;
    }
    let skip = total - max_chars;
    match text.char_indices().nth(skip) {
        Some((idx, _)) => &text[idx..],
        None => text,
    }
}

/// Runs the repair loop for one COBOL unit.
///
/// Unusable model replies (gateway failures, empty extractions) consume an
/// iteration and retry from the same code; toolchain failures abort, since
/// they indicate a broken environment rather than a broken program.
pub fn validate_and_repair(
    unit: &SourceUnit,
    k: u32,
    toolchain: &dyn Toolchain,
    gateway: &Gateway,
    profile: &str,
) -> Result<RepairTrace> {
    let (outcome, _artifact) = toolchain.compile(unit, TargetLang::Cobol)?;
    let mut attempts = vec![Attempt {
        code: unit.content.clone(),
        outcome,
    }];
    if attempts[0].outcome.ok {
        return Ok(RepairTrace {
            unit_id: unit.id.clone(),
            attempts,
            final_status: RepairStatus::Compiled,
            iterations_used: 0,
        });
    }

    let mut current_code = unit.content.clone();
    let mut iterations_used = 0u32;
    let mut final_status = RepairStatus::Discarded;

    for iteration in 1..=k {
        iterations_used = iteration;
        let last_log = &attempts.last().expect("at least the initial attempt").outcome.raw_log;
        let slots = BTreeMap::from([
            ("cobol_code".to_string(), current_code.clone()),
            (
                "error_log".to_string(),
                log_tail(last_log, LOG_TAIL_CHARS).to_string(),
            ),
        ]);
        let request = GenRequest::new(TemplateId::Repair, slots);

        let candidate = match gateway
            .complete(&request, profile)
            .and_then(|resp| extract_code_block(resp.text(), Some("cobol")))
        {
            Ok(code) => code,
            Err(err) if err.is_environment() => return Err(err),
            Err(err) => {
                log::warn!("repair iteration {iteration} for {}: {err}", unit.id);
                continue;
            }
        };

        if candidate == current_code {
            // The model handed back exactly what it was asked to fix;
            // further iterations would replay the same exchange.
            break;
        }

        let (outcome, _artifact) = toolchain.compile(
            &SourceUnit::synthetic(&unit.path, unit.language, candidate.clone()),
            TargetLang::Cobol,
        )?;
        let ok = outcome.ok;
        attempts.push(Attempt {
            code: candidate.clone(),
            outcome,
        });
        current_code = candidate;
        if ok {
            final_status = RepairStatus::Compiled;
            break;
        }
    }

    debug_assert!(iterations_used <= k);
    debug_assert!(attempts.len() as u32 <= k + 1);
    Ok(RepairTrace {
        unit_id: unit.id.clone(),
        attempts,
        final_status,
        iterations_used,
    })
}
