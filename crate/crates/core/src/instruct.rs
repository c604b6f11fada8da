//! Instruction synthesis: several generator models independently draft a
//! problem statement for a validated program, a judge model picks the best
//! draft, and the winner is packaged into a training sample whose solution
//! is always the compiled program itself (never the draft's own code, which
//! keeps the compiles-cleanly guarantee).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{Origin, SourceUnit};
use crate::modelgw::{
    extract_code_block, format_options, parse_best_option, Gateway, GenRequest, TemplateId,
};

/// Filled in when a draft omits the optional I/O section.
pub const DEFAULT_IO_DESCRIPTION: &str =
    "Input and output behavior is described in the problem statement.";
/// Filled in when a draft omits the optional explanation section.
pub const DEFAULT_EXPLANATION: &str =
    "The solution follows directly from the problem description.";

const PROBLEM_MARKER: &str = "[Problem Description]";
const IO_MARKER: &str = "[IO Description]";
const SOLUTION_MARKER: &str = "[Solution]";
const EXPLANATION_MARKER: &str = "[Explanation]";
const SECTION_MARKERS: [&str; 4] = [PROBLEM_MARKER, IO_MARKER, SOLUTION_MARKER, EXPLANATION_MARKER];

/// Provenance bucket recorded on each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Github,
    Synthetic,
}

impl From<Origin> for SampleSource {
    fn from(origin: Origin) -> Self {
        match origin {
            Origin::Synthetic => SampleSource::Synthetic,
            Origin::CodeHost | Origin::Local => SampleSource::Github,
        }
    }
}

/// One generator's draft, tagged with the profile that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub generator: String,
    pub text: String,
}

/// The judge's verdict: which draft won and how it was chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeVerdict {
    /// 1-based option number the judge picked; 0 flags the fallback path
    /// (judge reply unusable twice, first draft taken).
    pub choice: u32,
    pub candidate: Candidate,
}

/// A packaged instruction-tuning record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub id: String,
    pub problem_description: String,
    pub io_description: String,
    pub solution_code: String,
    pub explanation: String,
    pub source: SampleSource,
    pub generator: String,
    /// 1-based option number the judge picked; 0 means the judge reply was
    /// unusable and the first draft was taken as a fallback.
    pub judge_choice: u32,
    /// The draft's own solution, kept for audit when it differs from the
    /// validated program.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_solution: Option<String>,
}

fn sample_id(unit_id: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"instr\0");
    hasher.update(unit_id.as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

/// True for replies refusing the snippet via the template's non-COBOL guard
/// ("return None"), allowing for trailing punctuation and case drift.
fn is_none_reply(text: &str) -> bool {
    let t = text.trim();
    let t = t.strip_suffix('.').unwrap_or(t);
    t.eq_ignore_ascii_case("none")
}

/// Asks every generator profile for a draft of the same program. Drafts
/// answering "None" are dropped; individual generator failures are logged
/// and skipped (the other generators provide redundancy). Only environment
/// failures abort. Surviving drafts keep the generator list's order.
pub fn generate_candidates(
    program: &SourceUnit,
    generators: &[String],
    gateway: &Gateway,
) -> Result<Vec<Candidate>> {
    if generators.len() < 2 {
        return Err(Error::config(
            "instruction synthesis needs at least 2 generator profiles",
        ));
    }
    let slots = BTreeMap::from([("cobol_code".to_string(), program.content.clone())]);
    let req = GenRequest::new(TemplateId::InstrGen, slots);
    let mut out = Vec::new();
    for profile in generators {
        match gateway.complete(&req, profile) {
            Ok(reply) => {
                let text = reply.text().trim().to_string();
                if is_none_reply(&text) {
                    log::info!(
                        "unit {}: generator '{profile}' judged the snippet non-COBOL",
                        program.id
                    );
                } else if text.is_empty() {
                    log::warn!("unit {}: generator '{profile}' returned an empty draft", program.id);
                } else {
                    out.push(Candidate {
                        generator: profile.clone(),
                        text,
                    });
                }
            }
            Err(err) if err.is_environment() => return Err(err),
            Err(err) => log::warn!("unit {}: generator '{profile}' failed: {err}", program.id),
        }
    }
    Ok(out)
}

/// Renders the judging prompt with the drafts in the order given and parses
/// the judge's `[Best option: X]` marker. An unusable reply is re-asked once;
/// a second failure falls back to the first draft with `choice = 0`. A lone
/// surviving draft is selected without any model call.
pub fn judge_select(
    program: &SourceUnit,
    candidates: &[Candidate],
    gateway: &Gateway,
    judge: &str,
) -> Result<JudgeVerdict> {
    match candidates.len() {
        0 => Err(Error::config("judge selection needs at least one candidate")),
        1 => Ok(JudgeVerdict {
            choice: 1,
            candidate: candidates[0].clone(),
        }),
        n => {
            let texts: Vec<String> = candidates.iter().map(|c| c.text.clone()).collect();
            let slots = BTreeMap::from([
                ("cobol_code".to_string(), program.content.clone()),
                ("options".to_string(), format_options(&texts)),
            ]);
            let req = GenRequest::new(TemplateId::InstrJudge, slots);
            for attempt in 0..2 {
                let reply = gateway.complete(&req, judge)?;
                match parse_best_option(reply.text(), n) {
                    Ok(ix) => {
                        return Ok(JudgeVerdict {
                            choice: ix as u32,
                            candidate: candidates[ix - 1].clone(),
                        })
                    }
                    Err(err) => log::warn!(
                        "unit {}: judge attempt {} unusable: {err}",
                        program.id,
                        attempt + 1
                    ),
                }
            }
            log::warn!(
                "unit {}: judge failed twice; falling back to the first draft",
                program.id
            );
            Ok(JudgeVerdict {
                choice: 0,
                candidate: candidates[0].clone(),
            })
        }
    }
}

/// Splits a draft into its bracketed sections. A marker line may carry body
/// text after the bracket; text before the first marker is ignored.
fn split_sections(text: &str) -> BTreeMap<&'static str, String> {
    let mut sections: BTreeMap<&'static str, String> = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    let mut buf = String::new();
    let commit = |name: Option<&'static str>, buf: &mut String, sections: &mut BTreeMap<&'static str, String>| {
        if let Some(name) = name {
            sections.insert(name, buf.trim().to_string());
        }
        buf.clear();
    };
    for line in text.lines() {
        let trimmed = line.trim();
        let header = SECTION_MARKERS.iter().find(|m| {
            trimmed.len() >= m.len() && trimmed[..m.len()].eq_ignore_ascii_case(m)
        });
        if let Some(marker) = header {
            commit(current, &mut buf, &mut sections);
            current = Some(marker);
            let rest = trimmed[marker.len()..].trim_start_matches(':').trim();
            if !rest.is_empty() {
                buf.push_str(rest);
                buf.push('\n');
            }
        } else if current.is_some() {
            buf.push_str(line);
            buf.push('\n');
        }
    }
    commit(current, &mut buf, &mut sections);
    sections
}

fn required_section(sections: &BTreeMap<&'static str, String>, marker: &'static str) -> Result<String> {
    match sections.get(marker) {
        Some(s) if !s.is_empty() => Ok(s.clone()),
        _ => Err(Error::MalformedCandidate {
            marker: marker.to_string(),
        }),
    }
}

/// Packages the winning draft into a training sample. The problem statement
/// comes from the draft; the solution is always the validated program. When
/// the draft's own solution differs it is kept as audit metadata. Absent
/// optional sections fall back to fixed boilerplate.
pub fn package_sample(program: &SourceUnit, verdict: &JudgeVerdict) -> Result<InstructionSample> {
    let sections = split_sections(&verdict.candidate.text);
    let problem = required_section(&sections, PROBLEM_MARKER)?;
    let solution = required_section(&sections, SOLUTION_MARKER)?;
    let io_description = sections
        .get(IO_MARKER)
        .filter(|s| !s.is_empty())
        .cloned()
        .unwrap_or_else(|| DEFAULT_IO_DESCRIPTION.to_string());
    let explanation = sections
        .get(EXPLANATION_MARKER)
        .filter(|s| !s.is_empty())
        .cloned()
        .unwrap_or_else(|| DEFAULT_EXPLANATION.to_string());
    // The draft's solution may arrive fenced; compare code to code.
    let draft_solution = extract_code_block(&solution, Some("cobol")).unwrap_or(solution);
    let candidate_solution = if draft_solution.trim() == program.content.trim() {
        None
    } else {
        Some(draft_solution)
    };
    Ok(InstructionSample {
        id: sample_id(&program.id),
        problem_description: problem,
        io_description,
        solution_code: program.content.clone(),
        explanation,
        source: SampleSource::from(program.origin),
        generator: verdict.candidate.generator.clone(),
        judge_choice: verdict.choice,
        candidate_solution,
    })
}

/// Full synthesis flow for one validated program: draft with every
/// generator, judge, package. Returns `Ok(None)` when no generator produced
/// a usable draft — the unit is skipped, not an error.
pub fn synthesize_instruction(
    program: &SourceUnit,
    generators: &[String],
    judge: &str,
    gateway: &Gateway,
) -> Result<Option<InstructionSample>> {
    let candidates = generate_candidates(program, generators, gateway)?;
    if candidates.is_empty() {
        log::warn!("unit {}: no usable problem drafts; sample skipped", program.id);
        return Ok(None);
    }
    let verdict = judge_select(program, &candidates, gateway, judge)?;
    package_sample(program, &verdict).map(Some)
}
