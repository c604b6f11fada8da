//! Prompt templates and slot rendering.
//!
//! Templates are checked-in text assets with `{{slot}}` placeholders.
//! Rendering is a single pass over the stored text: slot values are never
//! re-scanned, so a value containing `{{...}}` comes through literally.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    /// Fix a COBOL program given its compiler log.
    Repair,
    /// Score semantic equivalence of a COBOL/Java pair.
    PairScore,
    /// Translate COBOL back into Java.
    BackTranslate,
    /// Translate Java into COBOL.
    TranslateForward,
    /// Create a programming problem and solution from a snippet.
    InstrGen,
    /// Pick the best candidate problem description.
    InstrJudge,
    /// Produce a question/answer pair from a documentation passage.
    QaSynth,
}

pub const ALL_TEMPLATES: [TemplateId; 7] = [
    TemplateId::Repair,
    TemplateId::PairScore,
    TemplateId::BackTranslate,
    TemplateId::TranslateForward,
    TemplateId::InstrGen,
    TemplateId::InstrJudge,
    TemplateId::QaSynth,
];

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Repair => "repair",
            TemplateId::PairScore => "pair_score",
            TemplateId::BackTranslate => "back_translate",
            TemplateId::TranslateForward => "translate_forward",
            TemplateId::InstrGen => "instr_gen",
            TemplateId::InstrJudge => "instr_judge",
            TemplateId::QaSynth => "qa_synth",
        }
    }

    pub fn from_str_tag(tag: &str) -> Option<TemplateId> {
        ALL_TEMPLATES.iter().copied().find(|t| t.as_str() == tag)
    }

    /// The stored template text.
    pub fn text(self) -> &'static str {
        match self {
            TemplateId::Repair => include_str!("../../assets/prompts/repair.txt"),
            TemplateId::PairScore => include_str!("../../assets/prompts/pair_score.txt"),
            TemplateId::BackTranslate => include_str!("../../assets/prompts/back_translate.txt"),
            TemplateId::TranslateForward => {
                include_str!("../../assets/prompts/translate_forward.txt")
            }
            TemplateId::InstrGen => include_str!("../../assets/prompts/instr_gen.txt"),
            TemplateId::InstrJudge => include_str!("../../assets/prompts/instr_judge.txt"),
            TemplateId::QaSynth => include_str!("../../assets/prompts/qa_synth.txt"),
        }
    }

    /// Lines that identify this template: its first two non-empty lines.
    /// Together they are unique across templates (several share an opening
    /// line), so the transcript-backed mock can recognize which template
    /// produced a prompt by requiring all of them to appear.
    pub fn signature_lines(self) -> Vec<&'static str> {
        self.text()
            .lines()
            .filter(|l| !l.trim().is_empty())
            .take(2)
            .collect()
    }
}

fn slot_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([a-z_]+)\}\}").unwrap())
}

/// Placeholder names in a template, in order of first appearance.
pub fn placeholders(template_text: &str) -> Vec<String> {
    let mut seen = Vec::new();
    for caps in slot_regex().captures_iter(template_text) {
        let name = caps[1].to_string();
        if !seen.contains(&name) {
            seen.push(name);
        }
    }
    seen
}

/// Renders a template, replacing every `{{slot}}` with its value. Every
/// placeholder in the template must have a value; extra slots are ignored.
pub fn render(id: TemplateId, slots: &BTreeMap<String, String>) -> Result<String> {
    render_text(id.as_str(), id.text(), slots)
}

fn render_text(name: &str, text: &str, slots: &BTreeMap<String, String>) -> Result<String> {
    for slot in placeholders(text) {
        if !slots.contains_key(&slot) {
            return Err(Error::MissingSlot {
                template: name.to_string(),
                slot,
            });
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut last = 0usize;
    for caps in slot_regex().captures_iter(text) {
        let m = caps.get(0).unwrap();
        out.push_str(&text[last..m.start()]);
        out.push_str(&slots[&caps[1]]);
        last = m.end();
    }
    out.push_str(&text[last..]);
    Ok(out)
}

/// Formats judge options as the numbered block the selection template
/// expects: `Option i: [text]` entries separated by blank lines.
pub fn format_options(options: &[String]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, text)| format!("Option {}: [{}]", i + 1, text))
        .collect::<Vec<_>>()
        .join("\n\n")
}
