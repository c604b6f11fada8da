//! Question–answer synthesis from plain-text knowledge documents: split a
//! document into passages on blank lines, merge short passages so each call
//! has enough context, and ask the model for one grounded QA pair per
//! passage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::modelgw::{Gateway, GenRequest, TemplateId};

/// Passages shorter than this many characters are merged into a neighbor
/// before synthesis.
pub const DEFAULT_MIN_SEGMENT_CHARS: usize = 200;

/// One plain-text knowledge document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRecord {
    pub id: String,
    pub text: String,
}

/// One synthesized question–answer training record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub source_doc: String,
    pub segment_index: u32,
}

fn qa_id(doc_id: &str, segment_index: u32) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"qa\0");
    hasher.update(doc_id.as_bytes());
    hasher.update(b"\0");
    hasher.update(segment_index.to_string().as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

/// Splits a document into passages on runs of blank lines, then merges any
/// passage shorter than `min_chars` forward into the next one (a short final
/// passage merges backward instead). Joining the result with one blank line
/// reproduces the blank-line-normalized document, so segmentation never
/// drops text.
pub fn segment_passages(doc: &str, min_chars: usize) -> Vec<String> {
    let mut paragraphs: Vec<String> = Vec::new();
    let mut buf: Vec<&str> = Vec::new();
    for line in doc.lines() {
        if line.trim().is_empty() {
            if !buf.is_empty() {
                paragraphs.push(buf.join("\n"));
                buf.clear();
            }
        } else {
            buf.push(line);
        }
    }
    if !buf.is_empty() {
        paragraphs.push(buf.join("\n"));
    }

    let mut segments: Vec<String> = Vec::new();
    let mut pending = String::new();
    for para in paragraphs {
        if pending.is_empty() {
            pending = para;
        } else {
            pending.push_str("\n\n");
            pending.push_str(&para);
        }
        if pending.chars().count() >= min_chars {
            segments.push(std::mem::take(&mut pending));
        }
    }
    if !pending.is_empty() {
        // Short tail: merge backward so no text is dropped.
        match segments.last_mut() {
            Some(last) => {
                last.push_str("\n\n");
                last.push_str(&pending);
            }
            None => segments.push(pending),
        }
    }
    segments
}

/// Pulls `Question:` / `Answer:` bodies out of a model reply. Both labels
/// must be present (any case, at a line start) with non-empty bodies.
fn parse_qa_reply(text: &str) -> Option<(String, String)> {
    let mut question: Vec<&str> = Vec::new();
    let mut answer: Vec<&str> = Vec::new();
    let mut bucket: Option<u8> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        let lower = trimmed.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("question:") {
            bucket = Some(0);
            let body = trimmed[trimmed.len() - rest.len()..].trim();
            if !body.is_empty() {
                question.push(body);
            }
        } else if let Some(rest) = lower.strip_prefix("answer:") {
            bucket = Some(1);
            let body = trimmed[trimmed.len() - rest.len()..].trim();
            if !body.is_empty() {
                answer.push(body);
            }
        } else {
            match bucket {
                Some(0) if !trimmed.is_empty() => question.push(trimmed),
                Some(1) if !trimmed.is_empty() => answer.push(trimmed),
                _ => {}
            }
        }
    }
    let q = question.join(" ").trim().to_string();
    let a = answer.join(" ").trim().to_string();
    if q.is_empty() || a.is_empty() {
        None
    } else {
        Some((q, a))
    }
}

/// Synthesizes one QA pair per passage of `doc`. Unusable replies and
/// per-passage provider failures are logged and skipped; only configuration
/// and environment failures abort.
pub fn synth_qa(
    doc: &DocRecord,
    gateway: &Gateway,
    profile: &str,
    min_chars: usize,
) -> Result<Vec<QAPair>> {
    if doc.text.trim().is_empty() {
        return Err(Error::Stage {
            stage: "qa".into(),
            detail: format!("document '{}' is empty", doc.id),
        });
    }
    let mut pairs = Vec::new();
    for (index, passage) in segment_passages(&doc.text, min_chars).into_iter().enumerate() {
        let slots = BTreeMap::from([("passage".to_string(), passage)]);
        let req = GenRequest::new(TemplateId::QaSynth, slots);
        let reply = match gateway.complete(&req, profile) {
            Ok(reply) => reply,
            Err(err) if matches!(err, Error::Config { .. }) || err.is_environment() => {
                return Err(err)
            }
            Err(err) => {
                log::warn!("doc {}: segment {index} synthesis failed: {err}", doc.id);
                continue;
            }
        };
        match parse_qa_reply(reply.text()) {
            Some((question, answer)) => pairs.push(QAPair {
                id: qa_id(&doc.id, index as u32),
                question,
                answer,
                source_doc: doc.id.clone(),
                segment_index: index as u32,
            }),
            None => log::warn!("doc {}: segment {index} reply had no usable QA pair", doc.id),
        }
    }
    Ok(pairs)
}
