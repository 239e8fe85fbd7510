use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PipelineError, Warnings};
use crate::designspace::DataBindingType;
use crate::genai::{complete_parsed, slots, DecodingParams, PromptSet, TextGenProvider};
use crate::units::{find_amounts, Amount, UnitRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatementKind {
    #[default]
    Simple,
    Proportion,
}

impl StatementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatementKind::Simple => "simple",
            StatementKind::Proportion => "proportion",
        }
    }
}

impl fmt::Display for StatementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatementKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "simple" => Ok(StatementKind::Simple),
            "proportion" => Ok(StatementKind::Proportion),
            _ => Err(format!("unknown statement kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataStatement {
    pub raw: String,
    pub kind: StatementKind,
    /// One value for simple statements; numerator and denominator for proportions.
    pub values: Vec<f64>,
    pub unit: String,
    pub quantity_kind: DataBindingType,
    pub subject: String,
    #[serde(default)]
    pub theme_hint: String,
}

impl DataStatement {
    pub fn value(&self) -> f64 {
        self.values[0]
    }

    /// Target ratio of a proportion statement.
    pub fn ratio(&self) -> Option<f64> {
        match self.values.as_slice() {
            [a, b] => Some(a / b),
            _ => None,
        }
    }

    /// Statement text used as the opening clause of a sentence.
    pub fn clause(&self) -> &str {
        self.raw.trim().trim_end_matches(['.', '!', '?', ';', ',']).trim_end()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let want = match self.kind {
            StatementKind::Simple => 1,
            StatementKind::Proportion => 2,
        };
        if self.values.len() != want {
            return Err(PipelineError::Parse(format!(
                "{} statement needs {want} value(s), found {}",
                self.kind,
                self.values.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(PipelineError::Parse(format!("values must be positive, got {v}")));
        }
        Ok(())
    }
}

const STOP: &[&str] = &[
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "being", "of", "in", "on", "at", "to", "per", "for",
    "by", "from", "with", "and", "or", "that", "which", "who", "every", "each", "around", "about", "across", "into",
    "over", "than", "as", "it", "this", "these", "those", "there", "will", "would", "could", "can", "have", "has",
    "had", "get", "gets", "got",
];

/// Verbs that commonly follow a counted noun phrase.
const VERBISH: &[&str] = &[
    "sold", "used", "made", "produced", "consumed", "thrown", "discarded", "lost", "pumped", "spent", "emitted",
    "generated", "bought", "wasted", "recycled", "burned", "killed", "born", "died",
];

const HEDGES: &[&str] = &[
    "is", "are", "was", "were", "about", "around", "roughly", "nearly", "approximately", "almost", "some", "over",
    "more", "than", "under", "of", "at", "by", "the", "a",
];

fn words(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\'' || c == '²' || c == '³' || c == '°')))
        .filter(|w| !w.is_empty())
        .collect()
}

fn looks_like_year(text: &str, a: &Amount) -> bool {
    let token = &text[a.start..a.end];
    token.len() == 4 && token.chars().all(|c| c.is_ascii_digit()) && (1800.0..=2100.0).contains(&a.value)
}

fn significant_amounts(text: &str) -> Vec<Amount> {
    let all = find_amounts(text);
    let kept: Vec<Amount> = all.iter().filter(|a| !looks_like_year(text, a)).cloned().collect();
    if kept.is_empty() {
        all
    } else {
        kept
    }
}

/// Unit and subject from the words following the amount.
fn fallback_simple(text: &str, amount: &Amount, registry: &UnitRegistry) -> (String, String) {
    let after = words(&text[amount.end..]);
    // Two-word units first ("square meters", "US gallons").
    if after.len() >= 2 {
        let pair = format!("{} {}", after[0], after[1]);
        if registry.lookup(&pair).is_some() {
            return (pair.to_lowercase(), subject_after_unit(&after[2..]).unwrap_or(pair.to_lowercase()));
        }
    }
    if let Some(first) = after.first() {
        if registry.lookup(first).is_some() {
            let unit = first.to_lowercase();
            return (unit.clone(), subject_after_unit(&after[1..]).unwrap_or(unit));
        }
    }
    let phrase: Vec<&str> = after
        .iter()
        .take_while(|w| {
            let l = w.to_lowercase();
            !STOP.contains(&l.as_str()) && !VERBISH.contains(&l.as_str())
        })
        .copied()
        .collect();
    match phrase.last() {
        Some(head) => (head.to_lowercase(), phrase.join(" ")),
        None => ("items".into(), "items".into()),
    }
}

/// `"of water used"` → `"water"`.
fn subject_after_unit(rest: &[&str]) -> Option<String> {
    let rest = match rest.first() {
        Some(w) if w.eq_ignore_ascii_case("of") => &rest[1..],
        _ => return None,
    };
    let phrase: Vec<&str> = rest
        .iter()
        .take_while(|w| {
            let l = w.to_lowercase();
            !(STOP.contains(&l.as_str()) || VERBISH.contains(&l.as_str()))
        })
        .copied()
        .collect();
    (!phrase.is_empty()).then(|| phrase.join(" "))
}

fn fallback_proportion(text: &str, first: &Amount) -> String {
    let before = words(&text[..first.start]);
    let mut end = before.len();
    while end > 0 && HEDGES.contains(&before[end - 1].to_lowercase().as_str()) {
        end -= 1;
    }
    let subject = before[..end].join(" ");
    if subject.is_empty() {
        "ratio".into()
    } else {
        subject
    }
}

struct Assist {
    unit: String,
    subject: String,
    kind: DataBindingType,
}

fn parse_assist(reply: &str) -> Result<Assist, String> {
    let line = reply
        .lines()
        .map(str::trim)
        .find(|l| l.matches('|').count() == 2)
        .ok_or_else(|| "expected `unit | subject | quantity_kind`".to_string())?;
    let parts: Vec<&str> = line.split('|').map(str::trim).collect();
    if parts[0].is_empty() || parts[1].is_empty() {
        return Err("empty unit or subject".into());
    }
    Ok(Assist {
        unit: parts[0].to_lowercase(),
        subject: parts[1].to_string(),
        kind: parts[2].parse()?,
    })
}

/// Extracts value(s), unit, subject and quantity kind from a data statement.
///
/// Numbers always come from the text itself. When `assist` is given, the
/// provider proposes unit and subject; any failure falls back to the pattern
/// rules with a warning.
pub fn parse_statement(
    text: &str,
    kind: StatementKind,
    registry: &UnitRegistry,
    assist: Option<(&dyn TextGenProvider, &PromptSet, &DecodingParams)>,
    warnings: &mut Warnings,
) -> Result<DataStatement, PipelineError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(PipelineError::Parse("statement is empty".into()));
    }
    let amounts = significant_amounts(text);
    if amounts.is_empty() {
        return Err(PipelineError::Parse(format!("no number found in `{text}`")));
    }
    let (values, mut unit, mut subject) = match kind {
        StatementKind::Simple => {
            let (unit, subject) = fallback_simple(text, &amounts[0], registry);
            (vec![amounts[0].value], unit, subject)
        }
        StatementKind::Proportion => {
            if amounts.len() < 2 {
                return Err(PipelineError::Parse(format!(
                    "proportion statement needs two numbers, found {}",
                    amounts.len()
                )));
            }
            (vec![amounts[0].value, amounts[1].value], "ratio".to_string(), fallback_proportion(text, &amounts[0]))
        }
    };
    let mut quantity_kind = match kind {
        StatementKind::Simple => registry.quantity_kind(&unit),
        StatementKind::Proportion => DataBindingType::AbstractConcept,
    };

    if let Some((provider, prompts, params)) = assist {
        let prompt = prompts.render("parse_statement", &slots([("statement", text.to_string()), ("kind", kind.to_string())]))?;
        match complete_parsed(provider, &prompt, params, 0, parse_assist) {
            Ok(a) => {
                quantity_kind = match (kind, registry.lookup(&a.unit)) {
                    (StatementKind::Simple, Some(def)) => def.dimension.binding(),
                    _ => a.kind,
                };
                unit = a.unit;
                subject = a.subject;
            }
            Err(e) => warnings.push(format!("statement parse assist failed, using pattern rules: {e}")),
        }
    }

    let statement = DataStatement {
        raw: text.to_string(),
        kind,
        values,
        unit,
        quantity_kind,
        subject,
        theme_hint: String::new(),
    };
    statement.validate()?;
    Ok(statement)
}
