//! Free-text answer encoding.
//!
//! Likert answers are read with [`extract_numeric`]: the answer is the last
//! in-range standalone number, after discarding scale restatements (`1 to 10`,
//! `1-10`, `between 1 and 10`), denominators (`out of 10`, `/10`) and
//! percentages. Explicit refusals and texts without an in-range number are
//! [`Parsed::Ambiguous`]. Categorical items are scored by rubric, and every
//! ambiguous answer is imputed at the midpoint of the item's bounds.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::catalog::{AimClass, ResponseSchema, SurveyItem};
use crate::gateway::RawResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodingMethod {
    #[serde(rename = "parsed-numeric")]
    ParsedNumeric,
    #[serde(rename = "rubric-multiselect")]
    RubricMultiSelect,
    #[serde(rename = "rubric-picktwo")]
    RubricPickTwo,
    #[serde(rename = "imputed-midrange")]
    ImputedMidrange,
}

impl EncodingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EncodingMethod::ParsedNumeric => "parsed-numeric",
            EncodingMethod::RubricMultiSelect => "rubric-multiselect",
            EncodingMethod::RubricPickTwo => "rubric-picktwo",
            EncodingMethod::ImputedMidrange => "imputed-midrange",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedResponse {
    pub entity: String,
    pub item_code: String,
    pub value: f64,
    pub method: EncodingMethod,
    pub raw_text: String,
}

/// Outcome of reading one answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parsed {
    Value(f64),
    Ambiguous,
}

impl Parsed {
    pub fn value(self) -> Option<f64> {
        match self {
            Parsed::Value(v) => Some(v),
            Parsed::Ambiguous => None,
        }
    }
}

const REFUSALS: &[&str] = &[
    "as an ai",
    "as a language model",
    "as an artificial intelligence",
    "i cannot",
    "i can't",
    "i can not",
    "i am unable",
    "i'm unable",
    "unable to answer",
    "i don't have personal",
    "i do not have personal",
    "prefer not to",
    "decline to answer",
    "i won't answer",
];

fn is_refusal(text: &str) -> bool {
    let lower = text.to_lowercase().replace('\u{2019}', "'");
    REFUSALS.iter().any(|r| lower.contains(r))
}

#[derive(Debug, Clone, Copy)]
struct NumberToken {
    start: usize,
    end: usize,
    value: f64,
    integral: bool,
    excluded: bool,
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+(?:\.\d+)?").expect("valid regex"))
}

fn range_joiner_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(?:\([^)]*\)\s*)?(?:to|through|-|–|—)\s*$").expect("valid regex")
    })
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Standalone numbers in `text`, with scale restatements and denominators marked excluded.
fn number_tokens(text: &str) -> Vec<NumberToken> {
    let mut tokens: Vec<NumberToken> = Vec::new();
    for m in number_re().find_iter(text) {
        let before = &text[..m.start()];
        let after = &text[m.end()..];
        let prev = before.chars().next_back();
        let next = after.chars().next();
        if prev.is_some_and(is_word_char) || prev == Some('.') {
            continue;
        }
        if next.is_some_and(|c| is_word_char(c) || c == '%') {
            continue;
        }
        let Ok(mut value) = m.as_str().parse::<f64>() else {
            continue;
        };
        // A minus sign glued to the digits and not following a number is a sign.
        if prev == Some('-') {
            let before_sign = before[..before.len() - 1].chars().next_back();
            if before_sign.is_none_or(|c| c.is_whitespace() || c == '(') {
                value = -value;
            }
        }
        let lead = before.trim_end().to_lowercase();
        let denominator = lead.ends_with("out of") || lead.ends_with('/');
        tokens.push(NumberToken {
            start: m.start(),
            end: m.end(),
            value,
            integral: !m.as_str().contains('.'),
            excluded: denominator,
        });
    }
    for k in 1..tokens.len() {
        let (a, b) = (tokens[k - 1], tokens[k]);
        let between = &text[a.end..b.start];
        let is_range = range_joiner_re().is_match(between)
            || (between.trim().eq_ignore_ascii_case("and")
                && text[..a.start].trim_end().to_lowercase().ends_with("between"));
        if is_range {
            tokens[k - 1].excluded = true;
            tokens[k].excluded = true;
        }
    }
    tokens
}

/// Reads a Likert answer: the last in-range standalone number.
pub fn extract_numeric(raw_text: &str, item: &SurveyItem) -> Parsed {
    let (lo, hi) = item.bounds();
    if is_refusal(raw_text) {
        return Parsed::Ambiguous;
    }
    number_tokens(raw_text)
        .into_iter()
        .rfind(|t| !t.excluded && t.value >= lo && t.value <= hi)
        .map_or(Parsed::Ambiguous, |t| Parsed::Value(t.value))
}

/// Lowercases and collapses whitespace/hyphen runs to single spaces.
fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut gap = false;
    for c in text.chars() {
        if c.is_whitespace() || c == '-' {
            gap = true;
        } else {
            if gap && !out.is_empty() {
                out.push(' ');
            }
            gap = false;
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Whole-word, case-insensitive phrase search over normalized text.
fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    let phrase = normalize(phrase);
    if phrase.is_empty() {
        return false;
    }
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(&phrase) {
        let start = from + pos;
        let end = start + phrase.len();
        let left_ok = haystack[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
        let right_ok = haystack[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if left_ok && right_ok {
            return true;
        }
        from = start + phrase.chars().next().map_or(1, char::len_utf8);
    }
    false
}

fn mentions(haystack: &str, label: &str, aliases: &[String]) -> bool {
    contains_phrase(haystack, label) || aliases.iter().any(|a| contains_phrase(haystack, a))
}

/// Scores a multi-select answer: sum of rubric weights over the detected options.
pub fn score_multi_select(raw_text: &str, item: &SurveyItem) -> Parsed {
    let ResponseSchema::MultiSelect {
        options,
        max_picks,
        bounds,
    } = &item.response
    else {
        return Parsed::Ambiguous;
    };
    let text = normalize(raw_text);
    let picked: Vec<f64> = options
        .iter()
        .filter(|o| mentions(&text, &o.label, &o.aliases))
        .map(|o| o.weight)
        .collect();
    if picked.is_empty() || picked.len() > *max_picks {
        return Parsed::Ambiguous;
    }
    let sum: f64 = picked.iter().sum();
    Parsed::Value(sum.clamp(bounds[0], bounds[1]))
}

/// Scores a pick-two aims answer by the classes of the two detected aims.
pub fn score_pick_two(raw_text: &str, item: &SurveyItem) -> Parsed {
    let ResponseSchema::PickTwo {
        options, scores, ..
    } = &item.response
    else {
        return Parsed::Ambiguous;
    };
    let text = normalize(raw_text);
    let by_label: Vec<u8> = options
        .iter()
        .filter(|o| mentions(&text, &o.label, &o.aliases))
        .map(|o| o.number)
        .collect();
    let mut by_number: Vec<u8> = number_tokens(raw_text)
        .into_iter()
        .filter(|t| !t.excluded && t.integral)
        .filter_map(|t| options.iter().find(|o| f64::from(o.number) == t.value))
        .map(|o| o.number)
        .collect();
    by_number.sort_unstable();
    by_number.dedup();

    let picks: Vec<u8> = if by_label.len() == 2 {
        by_label
    } else if by_number.len() == 2 {
        by_number
    } else {
        let mut union: Vec<u8> = by_label.into_iter().chain(by_number).collect();
        union.sort_unstable();
        union.dedup();
        union
    };
    if picks.len() != 2 {
        return Parsed::Ambiguous;
    }
    let class_of = |n: u8| options.iter().find(|o| o.number == n).map(|o| o.class);
    let value = match (class_of(picks[0]), class_of(picks[1])) {
        (Some(AimClass::Materialist), Some(AimClass::Materialist)) => scores.materialist,
        (Some(AimClass::PostMaterialist), Some(AimClass::PostMaterialist)) => {
            scores.post_materialist
        }
        _ => scores.mixed,
    };
    Parsed::Value(value)
}

pub fn impute_midrange(item: &SurveyItem) -> f64 {
    item.midrange()
}

/// Reads `raw_text` with the extractor for the item's schema.
pub fn parse_answer(raw_text: &str, item: &SurveyItem) -> (Parsed, EncodingMethod) {
    match item.response {
        ResponseSchema::Likert { .. } => (extract_numeric(raw_text, item), EncodingMethod::ParsedNumeric),
        ResponseSchema::MultiSelect { .. } => (
            score_multi_select(raw_text, item),
            EncodingMethod::RubricMultiSelect,
        ),
        ResponseSchema::PickTwo { .. } => {
            (score_pick_two(raw_text, item), EncodingMethod::RubricPickTwo)
        }
    }
}

/// Encodes free text for `item`; ambiguous answers become the bounds midpoint.
pub fn encode_text(entity: &str, raw_text: &str, item: &SurveyItem) -> EncodedResponse {
    let (parsed, method) = parse_answer(raw_text, item);
    let (lo, hi) = item.bounds();
    let (value, method) = match parsed {
        Parsed::Value(v) if v >= lo && v <= hi => (v, method),
        _ => (impute_midrange(item), EncodingMethod::ImputedMidrange),
    };
    EncodedResponse {
        entity: entity.to_string(),
        item_code: item.code.clone(),
        value,
        method,
        raw_text: raw_text.to_string(),
    }
}

pub fn encode(raw: &RawResponse, item: &SurveyItem) -> EncodedResponse {
    encode_text(&raw.entity, &raw.raw_text, item)
}

/// One line of the hand-labeled corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub raw_text: String,
    pub item_code: String,
    pub expected: CorpusLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorpusLabel {
    Value(f64),
    Ambiguous(AmbiguousTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbiguousTag {
    Ambiguous,
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::catalog::shipped_catalog;

    fn item(code: &str) -> SurveyItem {
        shipped_catalog().item(code).unwrap().clone()
    }

    #[test]
    fn numeric_examples() {
        assert_eq!(extract_numeric("7", &item("F063")), Parsed::Value(7.0));
        assert_eq!(extract_numeric("I would say 8 out of 10.", &item("F118")), Parsed::Value(8.0));
        assert_eq!(extract_numeric("As an AI I cannot answer.", &item("G006")), Parsed::Ambiguous);
    }

    #[test]
    fn numeric_edge_cases() {
        let f063 = item("F063");
        assert_eq!(extract_numeric("11", &f063), Parsed::Ambiguous);
        assert_eq!(extract_numeric("6.5", &f063), Parsed::Value(6.5));
        assert_eq!(extract_numeric("On a scale of 1 to 10: 4", &f063), Parsed::Value(4.0));
        assert_eq!(extract_numeric("I'd rate it 3-4", &f063), Parsed::Ambiguous);
        assert_eq!(extract_numeric("I\u{2019}m unable to say, 5", &f063), Parsed::Ambiguous);
        assert_eq!(extract_numeric("F063: 2", &f063), Parsed::Value(2.0));
    }

    #[test]
    fn multi_select_examples() {
        let y003 = item("Y003");
        assert_eq!(
            score_multi_select("Independence, Imagination, Respect", &y003),
            Parsed::Value(1.0)
        );
        assert_eq!(score_multi_select("Obedience, Religious faith", &y003), Parsed::Value(-2.0));
        assert_eq!(score_multi_select("Curiosity and thrift", &y003), Parsed::Ambiguous);
    }

    #[test]
    fn pick_two_examples() {
        let y002 = item("Y002");
        assert_eq!(score_pick_two("1 and 3", &y002), Parsed::Value(1.0));
        assert_eq!(score_pick_two("2 and 4", &y002), Parsed::Value(3.0));
        assert_eq!(score_pick_two("1 and 4", &y002), Parsed::Value(2.0));
        assert_eq!(score_pick_two("Only 2", &y002), Parsed::Ambiguous);
    }

    #[test]
    fn midrange_examples() {
        assert_eq!(impute_midrange(&item("F063")), 5.5);
        assert_eq!(impute_midrange(&item("G006")), 2.5);
        assert_eq!(impute_midrange(&item("Y002")), 2.0);
    }

    #[test]
    fn encode_examples() {
        let e = encode_text("Nigeria", "4", &item("G006"));
        assert_eq!((e.value, e.method), (4.0, EncodingMethod::ParsedNumeric));
        let e = encode_text("Nigeria", "I cannot answer that.", &item("F120"));
        assert_eq!((e.value, e.method), (5.5, EncodingMethod::ImputedMidrange));
        let e = encode_text("Nigeria", "Maintaining order and fighting rising prices", &item("Y002"));
        assert_eq!((e.value, e.method), (1.0, EncodingMethod::RubricPickTwo));
    }

    #[test]
    fn method_names_serialize_as_documented() {
        let json = serde_json::to_string(&EncodingMethod::ImputedMidrange).unwrap();
        assert_eq!(json, "\"imputed-midrange\"");
        assert_eq!(EncodingMethod::RubricMultiSelect.as_str(), "rubric-multiselect");
    }

    #[test]
    fn phrase_matching_respects_word_boundaries() {
        let t = normalize("Imaginative hard-working kids");
        assert!(!contains_phrase(&t, "Imagination"));
        assert!(!contains_phrase(&t, "hard work"));
        assert!(contains_phrase(&normalize("HARD   work"), "Hard work"));
    }

    proptest! {
        #[test]
        fn encode_is_total_and_bounded(text in ".{0,80}", k in 0usize..10) {
            let catalog = shipped_catalog();
            let item = &catalog.items[k];
            let e = encode_text("X", &text, item);
            let (lo, hi) = item.bounds();
            prop_assert!(e.value >= lo && e.value <= hi);
            if e.method == EncodingMethod::ImputedMidrange {
                prop_assert_eq!(e.value, (lo + hi) / 2.0);
            }
        }

        #[test]
        fn bare_in_range_integers_parse(k in 0usize..10, frac in 0f64..=1.0) {
            let catalog = shipped_catalog();
            let item = &catalog.items[k];
            if let ResponseSchema::Likert { min, max, .. } = item.response {
                let v = (min + frac * (max - min)).round();
                prop_assert_eq!(extract_numeric(&format!("{v}"), item), Parsed::Value(v));
                prop_assert_eq!(extract_numeric(&format!("My answer: {v}."), item), Parsed::Value(v));
            }
        }
    }
}
