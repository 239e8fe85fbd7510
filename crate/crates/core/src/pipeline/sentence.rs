use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{AnalogyCandidate, Calculation, DataStatement, PipelineError};
use crate::designspace::{AnalogyStrategy, DataBindingType};
use crate::genai::{complete, slots, DecodingParams, GenAiError, PromptSet, TextGenProvider};
use crate::scoring::{Perceptibility, PerceptibilityRules};
use crate::units::round_sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingRule {
    Fraction,
    /// Below 0.1: one significant figure.
    OneSignificant,
    OneDecimal,
    Integer,
    ThreeSignificant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rounding {
    pub exact: f64,
    pub rendered: String,
    pub rule: RoundingRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogySentence {
    pub draft: String,
    pub polished: String,
    pub multiplier: f64,
    pub rounding: Rounding,
    pub perceptible: bool,
    pub polish_accepted: bool,
}

fn group_thousands(digits: &str) -> String {
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn plain(value: f64) -> String {
    let text = format!("{value}");
    match text.split_once('.') {
        Some((int, frac)) => format!("{}.{frac}", group_thousands(int)),
        None => group_thousands(&text),
    }
}

/// Display form of a measured value: six significant figures, thousands separators.
pub fn format_measure(value: f64) -> String {
    plain(round_sig(value, 6))
}

/// Readable multiplier: one decimal below 10, integers up to 999, three
/// significant figures with a scale word from a million up.
pub fn render_multiplier(m: f64) -> Rounding {
    let (rendered, rule) = if m < 0.1 {
        (format!("{}", round_sig(m, 1)), RoundingRule::OneSignificant)
    } else if (m * 10.0).round() < 100.0 {
        (format!("{:.1}", (m * 10.0).round() / 10.0), RoundingRule::OneDecimal)
    } else if m.round() < 1000.0 {
        (format!("{}", m.round()), RoundingRule::Integer)
    } else {
        let r = round_sig(m, 3);
        let text = if r < 1e6 {
            group_thousands(&format!("{r}"))
        } else {
            let (scale, word) = [(1e12, "trillion"), (1e9, "billion"), (1e6, "million")]
                .into_iter()
                .find(|(s, _)| r >= *s)
                .expect("r is at least a million");
            format!("{} {word}", plain(round_sig(r / scale, 3)))
        };
        (text, RoundingRule::ThreeSignificant)
    };
    Rounding {
        exact: m,
        rendered,
        rule,
    }
}

fn fraction_phrase(fraction: f64) -> &'static str {
    if (fraction - 0.5).abs() < 1e-9 {
        "half"
    } else if (fraction - 1.0 / 3.0).abs() < 1e-9 {
        "a third of"
    } else {
        "a quarter of"
    }
}

fn measure_word(kind: DataBindingType) -> &'static str {
    match kind {
        DataBindingType::Length => "height",
        DataBindingType::Area => "area",
        DataBindingType::Volume => "volume",
        DataBindingType::Quantity => "number",
        DataBindingType::Temperature => "temperature",
        DataBindingType::Time => "duration",
        DataBindingType::AbstractConcept => "size",
    }
}

fn fraction_verb(kind: DataBindingType) -> &'static str {
    match kind {
        DataBindingType::Length => "stacking up to",
        DataBindingType::Area => "covering",
        DataBindingType::Volume => "filling",
        _ => "matching",
    }
}

static MEASURE_PREFIX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^(?:the\s+)?(height|depth|length|width|area|volume|weight|size|number|thickness|capacity|distance|duration)\s+of\s+",
    )
    .expect("measure prefix compiles")
});

static ARTICLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^(?:the|a|an)\s+").expect("article compiles"));

/// Splits `"the height of a two-story house"` into `("height", "two-story house")`.
fn analog_phrase(object: &str, kind: DataBindingType) -> (String, String) {
    let object = object.trim();
    let (measure, rest) = match MEASURE_PREFIX.captures(object) {
        Some(c) => (c[1].to_lowercase(), &object[c.get(0).expect("match").end()..]),
        None => (measure_word(kind).to_string(), object),
    };
    (measure, ARTICLE.replace(rest, "").into_owned())
}

fn pluralize(phrase: &str) -> String {
    let (head, last) = match phrase.rsplit_once(' ') {
        Some((h, l)) => (format!("{h} "), l),
        None => (String::new(), phrase),
    };
    let lower = last.to_lowercase();
    let plural = if lower.ends_with('s') && !lower.ends_with("ss") {
        last.to_string()
    } else if ["ss", "x", "z", "ch", "sh"].iter().any(|s| lower.ends_with(s)) {
        format!("{last}es")
    } else if lower.ends_with('y') && !lower.ends_with("ay") && !lower.ends_with("ey") && !lower.ends_with("oy") {
        format!("{}ies", &last[..last.len() - 1])
    } else {
        format!("{last}s")
    };
    format!("{head}{plural}")
}

fn template_error(e: GenAiError) -> PipelineError {
    match e {
        GenAiError::Asset(m) => PipelineError::Configuration(m),
        other => PipelineError::from(other),
    }
}

/// Fills the strategy's sentence template with the rounded multiplier.
pub fn compose_sentence(
    statement: &DataStatement,
    candidate: &AnalogyCandidate,
    calc: &Calculation,
    verdict: &Perceptibility,
    rules: &PerceptibilityRules,
    prompts: &PromptSet,
) -> Result<AnalogySentence, PipelineError> {
    let rounding = render_multiplier(calc.multiplier);
    let (measure, analog) = analog_phrase(&candidate.object, candidate.quantity_kind);
    let clause = statement.clause().to_string();
    let (template, filled) = match candidate.strategy {
        AnalogyStrategy::Comparison => match rules.matching_fraction(calc.multiplier).filter(|_| calc.multiplier < 1.0) {
            Some(f) => (
                "sentence_comparison_fraction",
                slots([
                    ("statement", clause),
                    ("verb", fraction_verb(candidate.quantity_kind).into()),
                    ("measure", measure),
                    ("fraction", fraction_phrase(f).into()),
                    ("analog", analog),
                ]),
            ),
            None => (
                "sentence_comparison",
                slots([
                    ("statement", clause),
                    ("multiplier", rounding.rendered.clone()),
                    ("measure", measure),
                    ("analog", analog),
                ]),
            ),
        },
        AnalogyStrategy::Unitization => (
            "sentence_unitization",
            slots([
                ("statement", clause),
                ("multiplier", rounding.rendered.clone()),
                ("analog_plural", pluralize(&analog)),
            ]),
        ),
        AnalogyStrategy::Accumulation => (
            "sentence_accumulation",
            slots([
                ("statement", clause),
                ("multiplier", rounding.rendered.clone()),
                ("measure", measure),
                ("analog", analog),
            ]),
        ),
        AnalogyStrategy::Proportion => {
            let other = candidate
                .counterpart
                .as_ref()
                .ok_or_else(|| PipelineError::Argument(format!("proportion candidate `{}` has no counterpart", candidate.object)))?;
            let (_, counterpart) = analog_phrase(&other.object, candidate.quantity_kind);
            (
                "sentence_proportion",
                slots([
                    ("statement", clause),
                    ("measure", measure),
                    ("analog", analog),
                    ("analog_measure", format!("{} {}", format_measure(candidate.value), candidate.unit)),
                    ("counterpart", counterpart),
                    ("counterpart_measure", format!("{} {}", format_measure(other.value), other.unit)),
                ]),
            )
        }
    };
    let draft = prompts.get(template).map_err(template_error)?.render(&filled)?;
    let rounding = if template == "sentence_comparison_fraction" {
        Rounding {
            exact: calc.multiplier,
            rendered: fraction_phrase(rules.matching_fraction(calc.multiplier).unwrap_or(0.25)).into(),
            rule: RoundingRule::Fraction,
        }
    } else {
        rounding
    };
    Ok(AnalogySentence {
        polished: draft.clone(),
        draft,
        multiplier: calc.multiplier,
        rounding,
        perceptible: verdict.passed(),
        polish_accepted: false,
    })
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\d[\d,]*(?:\.\d+)?(?:\s+(?:thousand|million|billion|trillion)\b)?").expect("number pattern compiles")
});

/// Numbers in `text`, commas removed and scale words kept (`"114 million"`).
pub fn numbers_in(text: &str) -> Vec<String> {
    NUMBER
        .find_iter(text)
        .map(|m| {
            let token = m.as_str().trim_end_matches(',');
            let mut parts = token.split_whitespace();
            let digits = parts.next().unwrap_or_default().replace(',', "");
            match parts.next() {
                Some(scale) => format!("{digits} {}", scale.to_lowercase()),
                None => digits,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polished {
    pub text: String,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Tone rewrite with a number guard: the rewrite is kept only when it carries
/// exactly the same set of numbers as the draft. Provider failures keep the draft.
pub fn polish_sentence(
    draft: &str,
    provider: &dyn TextGenProvider,
    prompts: &PromptSet,
    params: &DecodingParams,
) -> Result<Polished, PipelineError> {
    if draft.trim().is_empty() {
        return Err(PipelineError::Argument("draft sentence is empty".into()));
    }
    let prompt = prompts
        .get("polish")
        .map_err(template_error)?
        .render(&slots([("draft", draft.to_string())]))?;
    let keep = |warning: String| Polished {
        text: draft.to_string(),
        accepted: false,
        warning: Some(warning),
    };
    let text = match complete(provider, &prompt, params) {
        Ok(t) => t,
        Err(e) => return Ok(keep(format!("polish failed, keeping draft: {e}"))),
    };
    let before: BTreeSet<String> = numbers_in(draft).into_iter().collect();
    let after: BTreeSet<String> = numbers_in(&text).into_iter().collect();
    if before != after {
        let added: Vec<_> = after.difference(&before).cloned().collect();
        let dropped: Vec<_> = before.difference(&after).cloned().collect();
        return Ok(keep(format!(
            "polish changed numbers (added {added:?}, dropped {dropped:?}); keeping draft"
        )));
    }
    Ok(Polished {
        text,
        accepted: true,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genai::MockTextProvider;
    use crate::pipeline::{Counterpart, Provenance, StatementKind};

    fn statement(raw: &str) -> DataStatement {
        DataStatement {
            raw: raw.into(),
            kind: StatementKind::Simple,
            values: vec![1.0],
            unit: "gallons".into(),
            quantity_kind: DataBindingType::Volume,
            subject: "water".into(),
            theme_hint: String::new(),
        }
    }

    fn candidate(object: &str, strategy: AnalogyStrategy, kind: DataBindingType) -> AnalogyCandidate {
        AnalogyCandidate {
            id: "c1".into(),
            object: object.into(),
            value: 1.0,
            unit: "m".into(),
            quantity_kind: kind,
            strategy,
            measurement_transformed: false,
            provenance: Provenance::Generated,
            per_item: None,
            counterpart: None,
            derived_value: false,
            aliases: vec![],
            history: vec![],
        }
    }

    fn calc(m: f64) -> Calculation {
        Calculation {
            multiplier: m,
            check_value: m,
            statement_in_analog_unit: None,
            target_ratio: None,
            formula: String::new(),
        }
    }

    #[test]
    fn rounding_policy() {
        let r = |m: f64| render_multiplier(m).rendered;
        assert_eq!(r(7.25), "7.3");
        assert_eq!(r(5.0), "5.0");
        assert_eq!(r(9.96), "10");
        assert_eq!(r(480.0), "480");
        assert_eq!(r(999.4), "999");
        assert_eq!(r(999.6), "1,000");
        assert_eq!(r(1234.0), "1,230");
        assert_eq!(r(114_470_875.04), "114 million");
        assert_eq!(r(114_470_000.0), "114 million");
        assert_eq!(r(1.2345e9), "1.23 billion");
        assert_eq!(r(999_700.0), "1 million");
        assert_eq!(r(2.5e15), "2,500 trillion");
        assert_eq!(r(0.0123), "0.01");
    }

    #[test]
    fn measures() {
        assert_eq!(format_measure(660_430.0), "660,430");
        assert_eq!(format_measure(0.104), "0.104");
        assert_eq!(format_measure(93.6), "93.6");
        assert_eq!(format_measure(1.3e9), "1,300,000,000");
    }

    #[test]
    fn unitization_sentence() {
        let s = statement("In 2018, 75.6 trillion gallons of water were used.");
        let c = candidate("Olympic-size swimming pool", AnalogyStrategy::Unitization, DataBindingType::Volume);
        let out = compose_sentence(&s, &c, &calc(114_470_875.04), &Perceptibility::Pass, &Default::default(), &PromptSet::builtin())
            .unwrap();
        assert_eq!(
            out.draft,
            "In 2018, 75.6 trillion gallons of water were used, which equals 114 million Olympic-size swimming pools."
        );
        assert!(out.perceptible);
    }

    #[test]
    fn half_phrase() {
        let s = statement("Every day, 1.3 billion plastic bottles are sold around the world");
        let c = candidate("Eiffel Tower", AnalogyStrategy::Comparison, DataBindingType::Length);
        let out = compose_sentence(&s, &c, &calc(0.5), &Perceptibility::Pass, &Default::default(), &PromptSet::builtin())
            .unwrap();
        assert_eq!(
            out.draft,
            "Every day, 1.3 billion plastic bottles are sold around the world, stacking up to the height of half the Eiffel Tower."
        );
        assert_eq!(out.rounding.rule, RoundingRule::Fraction);
    }

    #[test]
    fn measure_prefix_in_object() {
        let s = statement("A flood left 14 meters of water");
        let c = candidate("the depth of a swimming pool", AnalogyStrategy::Comparison, DataBindingType::Length);
        let out = compose_sentence(&s, &c, &calc(7.25), &Perceptibility::Pass, &Default::default(), &PromptSet::builtin())
            .unwrap();
        assert_eq!(out.draft, "A flood left 14 meters of water, about 7.3 times the depth of the swimming pool.");
    }

    #[test]
    fn proportion_sentence() {
        let s = statement("The wealth ratio is about 900,000 to 1");
        let mut c = candidate("stack of 900,000 sheets of paper", AnalogyStrategy::Proportion, DataBindingType::Length);
        c.value = 93.6;
        c.counterpart = Some(Counterpart {
            object: "a single sheet of paper".into(),
            value: 0.104,
            unit: "mm".into(),
        });
        let out = compose_sentence(&s, &c, &calc(900_000.0), &Perceptibility::Pass, &Default::default(), &PromptSet::builtin())
            .unwrap();
        assert_eq!(
            out.draft,
            "The wealth ratio is about 900,000 to 1, comparable to the height of the stack of 900,000 sheets of paper (93.6 m) against the single sheet of paper (0.104 mm)."
        );
    }

    #[test]
    fn missing_template_is_configuration_error() {
        let mut prompts = PromptSet::builtin();
        prompts.remove("sentence_unitization");
        let s = statement("5 gallons");
        let c = candidate("pool", AnalogyStrategy::Unitization, DataBindingType::Volume);
        let err = compose_sentence(&s, &c, &calc(2000.0), &Perceptibility::Pass, &Default::default(), &prompts).unwrap_err();
        assert!(matches!(err, PipelineError::Configuration(_)));
    }

    #[test]
    fn plurals() {
        assert_eq!(pluralize("Olympic-size swimming pool"), "Olympic-size swimming pools");
        assert_eq!(pluralize("bus"), "bus");
        assert_eq!(pluralize("box"), "boxes");
        assert_eq!(pluralize("city"), "cities");
        assert_eq!(pluralize("day"), "days");
    }

    #[test]
    fn number_extraction() {
        assert_eq!(
            numbers_in("1.3 billion bottles, 480 pools and 1,000 cars."),
            vec!["1.3 billion", "480", "1000"]
        );
    }

    fn polish_with(draft: &str, reply: &str) -> Polished {
        let prompts = PromptSet::builtin();
        let prompt = prompts.render("polish", &slots([("draft", draft.to_string())])).unwrap();
        let mock = MockTextProvider::default().with(&prompt, reply);
        polish_sentence(draft, &mock, &prompts, &DecodingParams::default()).unwrap()
    }

    #[test]
    fn polish_guard() {
        let draft = "1.2 billion liters were pumped out, which equals 480 Olympic-size swimming pools.";
        let echo = polish_with(draft, draft);
        assert!(echo.accepted);
        assert_eq!(echo.text, draft);

        let mutated = polish_with(draft, "1.2 billion liters were pumped out, enough for 500 Olympic pools.");
        assert!(!mutated.accepted);
        assert_eq!(mutated.text, draft);
        assert!(mutated.warning.unwrap().contains("500"));

        let reworded = polish_with(draft, "Officials said 1.2 billion liters were pumped out, filling 480 Olympic pools.");
        assert!(reworded.accepted);

        let failed = polish_sentence(draft, &MockTextProvider::default(), &PromptSet::builtin(), &DecodingParams::default()).unwrap();
        assert!(!failed.accepted);
        assert_eq!(failed.text, draft);
    }
}
