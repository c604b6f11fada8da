//! Parsers for structured model replies: scores, option choices, and fenced
//! code blocks. Parse failures keep the raw reply so callers can re-prompt
//! or log it.

use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReply {
    pub score: f64,
    pub explanation: String,
}

fn score_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\[?\s*score\s*\]?\s*:\s*(?P<value>.+)$").unwrap())
}

fn explanation_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\[?\s*explanation\s*\]?\s*:\s*(?P<value>.*)$").unwrap())
}

/// Extracts the score from the first `Score:` line of a reply, tolerating
/// surrounding brackets and whitespace. Scores outside [0, 1] and replies
/// without a parsable score line are errors carrying the raw text.
pub fn parse_score(text: &str) -> Result<ScoreReply> {
    let mut score: Option<f64> = None;
    let mut explanation_parts: Vec<String> = Vec::new();
    let mut collecting_explanation = false;

    for line in text.lines() {
        let trimmed = line.trim();
        if score.is_none() {
            if let Some(caps) = score_line_regex().captures(trimmed) {
                let raw_value = caps["value"]
                    .trim()
                    .trim_start_matches('[')
                    .trim_end_matches(']')
                    .trim()
                    .to_string();
                let value: f64 = raw_value.parse().map_err(|_| Error::ScoreParse {
                    detail: format!("'{raw_value}' is not a number"),
                    raw: text.to_string(),
                })?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::ScoreParse {
                        detail: format!("score {value} outside [0, 1]"),
                        raw: text.to_string(),
                    });
                }
                score = Some(value);
                continue;
            }
        }
        if collecting_explanation {
            explanation_parts.push(trimmed.to_string());
        } else if let Some(caps) = explanation_line_regex().captures(trimmed) {
            explanation_parts.push(caps["value"].trim().to_string());
            collecting_explanation = true;
        }
    }

    match score {
        Some(score) => Ok(ScoreReply {
            score,
            explanation: explanation_parts.join("\n").trim().to_string(),
        }),
        None => Err(Error::ScoreParse {
            detail: "no 'Score:' line found".into(),
            raw: text.to_string(),
        }),
    }
}

fn best_option_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\[\s*best\s+option\s*:\s*(?P<num>\d+)\s*\]").unwrap())
}

/// Finds the 1-based option choice in a judge reply. When the reply repeats
/// the marker (e.g. while reasoning), the last occurrence wins. Choices
/// outside 1..=n_options are errors.
pub fn parse_best_option(text: &str, n_options: usize) -> Result<usize> {
    let last = best_option_regex()
        .captures_iter(text)
        .last()
        .ok_or_else(|| Error::OptionParse {
            detail: "no '[Best option: X]' marker found".into(),
            raw: text.to_string(),
        })?;
    let choice: usize = last["num"].parse().map_err(|_| Error::OptionParse {
        detail: "option number out of range for usize".into(),
        raw: text.to_string(),
    })?;
    if choice == 0 || choice > n_options {
        return Err(Error::OptionParse {
            detail: format!("choice {choice} outside 1..={n_options}"),
            raw: text.to_string(),
        });
    }
    Ok(choice)
}

struct FencedBlock {
    info: String,
    content: String,
}

fn fenced_blocks(text: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("```") {
            match current.take() {
                Some((info, lines)) => {
                    blocks.push(FencedBlock {
                        info,
                        content: lines.join("\n"),
                    });
                    // A non-empty rest opens a new block immediately.
                    if !rest.trim().is_empty() {
                        current = Some((rest.trim().to_string(), Vec::new()));
                    }
                }
                None => {
                    current = Some((rest.trim().to_string(), Vec::new()));
                }
            }
        } else if let Some((_, lines)) = current.as_mut() {
            lines.push(line);
        }
    }
    // Tolerate a truncated reply whose final fence never closed.
    if let Some((info, lines)) = current {
        if !lines.is_empty() {
            blocks.push(FencedBlock {
                info,
                content: lines.join("\n"),
            });
        }
    }
    blocks
}

/// Pulls source code out of a model reply.
///
/// Preference order: the first fenced block whose info string matches
/// `lang_hint`, then the first fenced block of any language, then the whole
/// reply stripped of surrounding whitespace. An effectively empty reply is
/// an extraction error.
pub fn extract_code_block(text: &str, lang_hint: Option<&str>) -> Result<String> {
    let blocks = fenced_blocks(text);
    if let Some(hint) = lang_hint {
        for block in &blocks {
            let tag = block.info.split_whitespace().next().unwrap_or("");
            if tag.eq_ignore_ascii_case(hint) && !block.content.trim().is_empty() {
                return Ok(block.content.clone());
            }
        }
    }
    for block in &blocks {
        if !block.content.trim().is_empty() {
            return Ok(block.content.clone());
        }
    }
    // Whole-text fallback only applies to replies with no fences at all;
    // a reply whose fenced blocks are all empty contains no code.
    if !blocks.is_empty() {
        return Err(Error::EmptyExtraction {
            raw: text.to_string(),
        });
    }
    let fallback = text.trim();
    if fallback.is_empty() {
        return Err(Error::EmptyExtraction {
            raw: text.to_string(),
        });
    }
    Ok(fallback.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_score_and_explanation() {
        let reply = "Score: 0.85\n\nExplanation: Matching logic,\nminor formatting drift.";
        let parsed = parse_score(reply).unwrap();
        assert!((parsed.score - 0.85).abs() < 1e-12);
        assert_eq!(parsed.explanation, "Matching logic,\nminor formatting drift.");
    }

    #[test]
    fn tolerates_brackets_and_case() {
        assert!((parse_score("score: [0.7]").unwrap().score - 0.7).abs() < 1e-12);
        assert!((parse_score("[Score]: 1.0").unwrap().score - 1.0).abs() < 1e-12);
        assert!((parse_score("  Score :  0  ").unwrap().score).abs() < 1e-12);
    }

    #[test]
    fn first_score_line_wins() {
        let reply = "Some prose.\nScore: 0.4\nMore prose mentioning Score: 0.9";
        assert!((parse_score(reply).unwrap().score - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_and_unparsable_scores() {
        let err = parse_score("Score: 1.5").unwrap_err();
        match err {
            Error::ScoreParse { raw, .. } => assert!(raw.contains("1.5")),
            other => panic!("unexpected: {other}"),
        }
        assert!(parse_score("Score: pretty good").is_err());
        assert!(parse_score("no score here at all").is_err());
    }

    #[test]
    fn missing_explanation_is_empty_not_an_error() {
        let parsed = parse_score("Score: 0.6").unwrap();
        assert_eq!(parsed.explanation, "");
    }

    #[test]
    fn best_option_takes_last_marker() {
        let reply = "Option 2 is tempting [Best option: 2]... on reflection\n[Best option: 3]";
        assert_eq!(parse_best_option(reply, 4).unwrap(), 3);
    }

    #[test]
    fn best_option_validates_range() {
        assert!(parse_best_option("[Best option: 5]", 4).is_err());
        assert!(parse_best_option("[Best option: 0]", 4).is_err());
        assert!(parse_best_option("I pick option 2", 4).is_err());
        assert_eq!(parse_best_option("[best option:  1 ]", 4).unwrap(), 1);
    }

    #[test]
    fn extract_prefers_hinted_block() {
        let reply = "Here:\n```java\nclass A {}\n```\nand\n```cobol\nDISPLAY \"X\".\n```";
        let code = extract_code_block(reply, Some("cobol")).unwrap();
        assert_eq!(code, "DISPLAY \"X\".");
    }

    #[test]
    fn extract_falls_back_to_first_block_then_whole_text() {
        let reply = "```\nplain block\n```";
        assert_eq!(extract_code_block(reply, Some("cobol")).unwrap(), "plain block");
        assert_eq!(
            extract_code_block("  bare code, no fences  ", None).unwrap(),
            "bare code, no fences"
        );
    }

    #[test]
    fn extract_handles_unterminated_fence() {
        let reply = "```cobol\nDISPLAY \"TRUNCATED\".";
        assert_eq!(
            extract_code_block(reply, Some("cobol")).unwrap(),
            "DISPLAY \"TRUNCATED\"."
        );
    }

    #[test]
    fn extract_errors_on_empty_reply() {
        assert!(extract_code_block("   \n  ", None).is_err());
        assert!(extract_code_block("```cobol\n```", None).is_err());
    }

    #[test]
    fn extract_preserves_leading_indentation() {
        let reply = "```cobol\n       IDENTIFICATION DIVISION.\n       PROGRAM-ID. X.\n```";
        let code = extract_code_block(reply, Some("cobol")).unwrap();
        assert!(code.starts_with("       IDENTIFICATION"));
    }
}
