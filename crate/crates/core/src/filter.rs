//! Quality gates applied to raw source units before deduplication.
//!
//! Rules are evaluated in a fixed order and the first failure wins:
//! decode errors, non-text content, too short, too long, high symbol ratio.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::SourceUnit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_lines: u64,
    pub max_lines: u64,
    /// Maximum fraction of non-whitespace characters that may be
    /// non-alphanumeric.
    pub max_symbol_ratio: f64,
    /// Maximum fraction of characters outside printable ASCII and Unicode
    /// letters before content counts as non-text.
    pub max_nonprintable_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_lines: 20,
            max_lines: 50_000,
            max_symbol_ratio: 0.30,
            max_nonprintable_ratio: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Keep,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    DecodeErrors,
    NonText,
    TooShort,
    TooLong,
    HighSymbolRatio,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::DecodeErrors => "decode_errors",
            DropReason::NonText => "non_text",
            DropReason::TooShort => "too_short",
            DropReason::TooLong => "too_long",
            DropReason::HighSymbolRatio => "high_symbol_ratio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub unit_id: String,
    pub verdict: Verdict,
    pub reason: Option<DropReason>,
    pub symbol_ratio: f64,
}

/// Fraction of non-whitespace characters that are not alphanumeric.
/// Content with no non-whitespace characters scores 0.0.
pub fn symbol_ratio(content: &str) -> f64 {
    let mut non_ws = 0u64;
    let mut symbols = 0u64;
    for ch in content.chars() {
        if ch.is_whitespace() {
            continue;
        }
        non_ws += 1;
        if !ch.is_alphanumeric() {
            symbols += 1;
        }
    }
    if non_ws == 0 {
        0.0
    } else {
        symbols as f64 / non_ws as f64
    }
}

/// True when content contains a NUL byte or too many characters outside
/// printable ASCII and Unicode letters.
fn is_non_text(content: &str, max_nonprintable_ratio: f64) -> bool {
    if content.contains('\0') {
        return true;
    }
    let mut total = 0u64;
    let mut bad = 0u64;
    for ch in content.chars() {
        total += 1;
        let texty = (' '..='~').contains(&ch)
            || ch == '\n'
            || ch == '\r'
            || ch == '\t'
            || ch.is_alphabetic();
        if !texty {
            bad += 1;
        }
    }
    total > 0 && (bad as f64 / total as f64) > max_nonprintable_ratio
}

/// Evaluates one unit against the gates. Always returns a report; the
/// verdict is `Keep` exactly when `reason` is `None`.
pub fn filter_unit(unit: &SourceUnit, config: &FilterConfig) -> FilterReport {
    let ratio = symbol_ratio(&unit.content);
    let reason = if unit.had_decode_errors {
        Some(DropReason::DecodeErrors)
    } else if is_non_text(&unit.content, config.max_nonprintable_ratio) {
        Some(DropReason::NonText)
    } else if unit.line_count < config.min_lines {
        Some(DropReason::TooShort)
    } else if unit.line_count > config.max_lines {
        Some(DropReason::TooLong)
    } else if ratio > config.max_symbol_ratio {
        Some(DropReason::HighSymbolRatio)
    } else {
        None
    };
    FilterReport {
        unit_id: unit.id.clone(),
        verdict: if reason.is_none() {
            Verdict::Keep
        } else {
            Verdict::Drop
        },
        reason,
        symbol_ratio: ratio,
    }
}

/// Filters a corpus, returning the kept units (input order preserved) and
/// one report per input unit.
pub fn filter_corpus(
    units: &[SourceUnit],
    config: &FilterConfig,
) -> (Vec<SourceUnit>, Vec<FilterReport>) {
    let mut kept = Vec::new();
    let mut reports = Vec::with_capacity(units.len());
    for unit in units {
        let report = filter_unit(unit, config);
        if report.verdict == Verdict::Keep {
            kept.push(unit.clone());
        }
        reports.push(report);
    }
    (kept, reports)
}

/// Counts drops per reason, for stage summaries.
pub fn rejection_counts(reports: &[FilterReport]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for report in reports {
        if let Some(reason) = report.reason {
            *counts.entry(reason.as_str().to_string()).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub files: u64,
    /// Whitespace-delimited token count; an approximation, not a model
    /// tokenizer count.
    pub tokens: u64,
}

pub fn corpus_stats(units: &[SourceUnit]) -> CorpusStats {
    let tokens = units
        .iter()
        .map(|u| u.content.split_whitespace().count() as u64)
        .sum();
    CorpusStats {
        files: units.len() as u64,
        tokens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Language, Origin, SourceUnit};

    fn unit(content: &str) -> SourceUnit {
        SourceUnit::new(Origin::Local, None, "t.cbl", Language::Cobol, content, false)
    }

    fn cobol_lines(n: usize) -> String {
        (0..n)
            .map(|i| format!("DISPLAY \"LINE {i}\"."))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn keeps_units_within_line_bounds() {
        let cfg = FilterConfig::default();
        assert_eq!(filter_unit(&unit(&cobol_lines(20)), &cfg).verdict, Verdict::Keep);
        assert_eq!(filter_unit(&unit(&cobol_lines(100)), &cfg).verdict, Verdict::Keep);
    }

    #[test]
    fn drops_short_and_long_units_at_exact_boundaries() {
        let cfg = FilterConfig::default();
        let short = filter_unit(&unit(&cobol_lines(19)), &cfg);
        assert_eq!(short.reason, Some(DropReason::TooShort));

        // A 50_001-line unit built cheaply: newlines only, but those lines
        // are empty so symbol ratio is 0; line gate must fire first anyway.
        let mut cfg_small = cfg.clone();
        cfg_small.max_lines = 30;
        let long = filter_unit(&unit(&cobol_lines(31)), &cfg_small);
        assert_eq!(long.reason, Some(DropReason::TooLong));

        let at_max = filter_unit(&unit(&cobol_lines(30)), &cfg_small);
        assert_eq!(at_max.verdict, Verdict::Keep);
    }

    #[test]
    fn symbol_ratio_counts_only_non_whitespace() {
        // "a b !" has 3 non-whitespace chars, 1 symbol.
        let r = symbol_ratio("a b !");
        assert!((r - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(symbol_ratio("   \n\t"), 0.0);
        assert_eq!(symbol_ratio(""), 0.0);
    }

    #[test]
    fn high_symbol_ratio_drops() {
        let cfg = FilterConfig::default();
        // 20 lines of mostly punctuation.
        let noisy = (0..20)
            .map(|_| "!!! ### $$$ %%% ^^^".to_string())
            .collect::<Vec<_>>()
            .join("\n");
        let report = filter_unit(&unit(&noisy), &cfg);
        assert_eq!(report.reason, Some(DropReason::HighSymbolRatio));
        assert!(report.symbol_ratio > 0.30);
    }

    #[test]
    fn nul_byte_is_non_text_even_when_short() {
        let cfg = FilterConfig::default();
        let report = filter_unit(&unit("AB\0CD"), &cfg);
        // non_text outranks too_short.
        assert_eq!(report.reason, Some(DropReason::NonText));
    }

    #[test]
    fn decode_errors_outrank_everything() {
        let cfg = FilterConfig::default();
        let mut u = unit("AB\0CD");
        u.had_decode_errors = true;
        assert_eq!(filter_unit(&u, &cfg).reason, Some(DropReason::DecodeErrors));
    }

    #[test]
    fn control_character_soup_is_non_text() {
        let cfg = FilterConfig::default();
        let mut content = cobol_lines(25);
        content.push_str(&"\u{0001}\u{0002}\u{0003}".repeat(200));
        assert_eq!(filter_unit(&unit(&content), &cfg).reason, Some(DropReason::NonText));
    }

    #[test]
    fn unicode_letters_are_texty() {
        let cfg = FilterConfig::default();
        let mut content = cobol_lines(24);
        content.push_str("\nDISPLAY \"caf\u{00e9} na\u{00ef}ve \u{65e5}\u{672c}\".");
        assert_eq!(filter_unit(&unit(&content), &cfg).verdict, Verdict::Keep);
    }

    #[test]
    fn one_report_per_unit_in_input_order() {
        let cfg = FilterConfig::default();
        let units = vec![unit(&cobol_lines(25)), unit("short"), unit(&cobol_lines(40))];
        let (kept, reports) = filter_corpus(&units, &cfg);
        assert_eq!(reports.len(), 3);
        assert_eq!(kept.len(), 2);
        for (u, r) in units.iter().zip(&reports) {
            assert_eq!(u.id, r.unit_id);
        }
        let counts = rejection_counts(&reports);
        assert_eq!(counts.get("too_short"), Some(&1));
    }

    #[test]
    fn stats_count_whitespace_tokens() {
        let units = vec![unit("a b c"), unit("d  e\n f ")];
        let stats = corpus_stats(&units);
        assert_eq!(stats.files, 2);
        assert_eq!(stats.tokens, 6);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symbol_ratio_is_a_fraction(content in ".*") {
                let r = symbol_ratio(&content);
                prop_assert!((0.0..=1.0).contains(&r));
            }

            #[test]
            fn keep_implies_line_bounds(lines in 0usize..60) {
                let cfg = FilterConfig { min_lines: 5, max_lines: 40, ..FilterConfig::default() };
                let content = (0..lines).map(|i| format!("MOVE {i} TO X")).collect::<Vec<_>>().join("\n");
                let u = SourceUnit::synthetic("p.cbl", crate::ingest::Language::Cobol, content);
                let report = filter_unit(&u, &cfg);
                if report.verdict == Verdict::Keep {
                    prop_assert!(u.line_count >= 5 && u.line_count <= 40);
                } else if matches!(report.reason, Some(DropReason::TooShort)) {
                    prop_assert!(u.line_count < 5);
                } else if matches!(report.reason, Some(DropReason::TooLong)) {
                    prop_assert!(u.line_count > 40);
                }
            }

            #[test]
            fn verdict_keep_iff_no_reason(content in ".{0,400}") {
                let u = SourceUnit::synthetic("p.cbl", crate::ingest::Language::Cobol, content);
                let report = filter_unit(&u, &FilterConfig::default());
                prop_assert_eq!(report.verdict == Verdict::Keep, report.reason.is_none());
            }
        }
    }
}
