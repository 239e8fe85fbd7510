use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    derive_larger_value, format_measure, AnalogyCandidate, Counterpart, DataStatement, Measure, PipelineError,
    Provenance, StatementKind, Warnings,
};
use crate::designspace::{AnalogyCase, AnalogyStrategy, DataBindingType};
use crate::genai::{complete, slots, DecodingParams, PromptSet, TextGenProvider};
use crate::units::{parse_amount, UnitRegistry};

const SIMPLE_FORMAT: &str = "object | value | unit | quantity_kind | per-item value | per-item unit\n\
(give the per-item value and unit only when the object is measured in a different quantity kind than the statement: \
they state how much one counted item of the statement measures in the object's unit)";
const PROPORTION_FORMAT: &str = "larger object | value | unit | smaller object | value | unit | quantity_kind\n\
(write ? as the larger value to let the system derive it from the ratio)";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub candidates: Vec<AnalogyCandidate>,
    /// Theme interpretation returned for each strategy.
    pub themes: BTreeMap<AnalogyStrategy, String>,
}

/// Few-shot examples as prompt text, one case per line.
pub fn fewshot_block(cases: &[AnalogyCase]) -> String {
    if cases.is_empty() {
        return "(none)".into();
    }
    cases
        .iter()
        .map(|c| {
            format!(
                "- \"{}\" -> {} | {} | {} | {}",
                c.source_text,
                c.analog_object,
                format_measure(c.analog_value),
                c.analog_unit,
                c.analog_binding
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn strip_bullet(line: &str) -> &str {
    let line = line.trim();
    let line = line.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r.trim_start();
        }
    }
    line
}

fn field_value(text: &str, what: &str) -> Result<f64, String> {
    let v = parse_amount(text).ok_or_else(|| format!("{what} `{text}` is not a number"))?;
    if text.trim_start().starts_with(['-', '−']) || v <= 0.0 {
        return Err(format!("{what} must be positive, got `{text}`"));
    }
    Ok(v)
}

fn nonempty<'a>(text: &'a str, what: &str) -> Result<&'a str, String> {
    if text.is_empty() {
        Err(format!("{what} is empty"))
    } else {
        Ok(text)
    }
}

/// Registered units fix the quantity kind; otherwise the provider's label stands.
fn resolve_kind(unit: &str, label: &str, registry: &UnitRegistry, warnings: &mut Warnings) -> Result<DataBindingType, String> {
    let said: DataBindingType = label.parse()?;
    match registry.lookup(unit) {
        Some(def) if def.dimension.binding() != said => {
            warnings.push(format!(
                "unit `{unit}` is a {} unit, overriding quantity kind `{said}`",
                def.dimension.binding()
            ));
            Ok(def.dimension.binding())
        }
        _ => Ok(said),
    }
}

fn simple_line(
    fields: &[&str],
    strategy: AnalogyStrategy,
    statement: &DataStatement,
    registry: &UnitRegistry,
    warnings: &mut Warnings,
) -> Result<AnalogyCandidate, String> {
    if fields.len() != 4 && fields.len() != 6 {
        return Err(format!("expected 4 or 6 fields, found {}", fields.len()));
    }
    let object = nonempty(fields[0], "object")?;
    let value = field_value(fields[1], "value")?;
    let unit = nonempty(fields[2], "unit")?;
    let quantity_kind = resolve_kind(unit, fields[3], registry, warnings)?;
    let per_item = if fields.len() == 6 {
        Some(Measure {
            value: field_value(fields[4], "per-item value")?,
            unit: nonempty(fields[5], "per-item unit")?.to_string(),
        })
    } else {
        None
    };
    Ok(AnalogyCandidate {
        id: String::new(),
        object: object.to_string(),
        value,
        unit: unit.to_string(),
        quantity_kind,
        strategy,
        measurement_transformed: quantity_kind != statement.quantity_kind,
        provenance: Provenance::Generated,
        per_item,
        counterpart: None,
        derived_value: false,
        aliases: Vec::new(),
        history: Vec::new(),
    })
}

fn proportion_line(
    fields: &[&str],
    statement: &DataStatement,
    registry: &UnitRegistry,
    warnings: &mut Warnings,
) -> Result<AnalogyCandidate, String> {
    if fields.len() != 7 {
        return Err(format!("expected 7 fields, found {}", fields.len()));
    }
    let object = nonempty(fields[0], "larger object")?;
    let unit = nonempty(fields[2], "unit")?;
    let counterpart = Counterpart {
        object: nonempty(fields[3], "smaller object")?.to_string(),
        value: field_value(fields[4], "smaller value")?,
        unit: nonempty(fields[5], "smaller unit")?.to_string(),
    };
    let quantity_kind = resolve_kind(unit, fields[6], registry, warnings)?;
    let (value, derived_value) = if fields[1] == "?" {
        let v = derive_larger_value(statement, counterpart.value, &counterpart.unit, unit, registry)
            .map_err(|e| e.to_string())?;
        (v, true)
    } else {
        (field_value(fields[1], "larger value")?, false)
    };
    let mut candidate = AnalogyCandidate {
        id: String::new(),
        object: object.to_string(),
        value,
        unit: unit.to_string(),
        quantity_kind,
        strategy: AnalogyStrategy::Proportion,
        measurement_transformed: quantity_kind != statement.quantity_kind,
        provenance: Provenance::Generated,
        per_item: None,
        counterpart: Some(counterpart),
        derived_value,
        aliases: Vec::new(),
        history: Vec::new(),
    };
    if derived_value {
        candidate.revise("derive", "value", "?".into(), format!("{value}"));
    }
    Ok(candidate)
}

/// Parses a generation reply. Lines without `|` are reasoning and are skipped;
/// a `Theme:` line carries the theme interpretation; malformed candidate lines
/// are dropped with a warning.
pub fn parse_candidate_lines(
    reply: &str,
    strategy: AnalogyStrategy,
    statement: &DataStatement,
    registry: &UnitRegistry,
    warnings: &mut Warnings,
) -> (Vec<AnalogyCandidate>, Option<String>) {
    let mut theme = None;
    let mut out = Vec::new();
    for (n, raw) in reply.lines().enumerate() {
        let line = strip_bullet(raw);
        if let Some(t) = line
            .get(..6)
            .filter(|p| p.eq_ignore_ascii_case("theme:"))
            .map(|_| line[6..].trim())
        {
            if theme.is_none() && !t.is_empty() {
                theme = Some(t.to_string());
            }
            continue;
        }
        if !line.contains('|') {
            continue;
        }
        let fields: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        let parsed = match strategy {
            AnalogyStrategy::Proportion => proportion_line(&fields, statement, registry, warnings),
            _ => simple_line(&fields, strategy, statement, registry, warnings),
        };
        match parsed {
            Ok(c) => out.push(c),
            Err(e) => warnings.push(format!("{strategy} reply line {}: {e}; dropped `{}`", n + 1, raw.trim())),
        }
    }
    (out, theme)
}

/// Strategies a request expands to. Unclassified simple statements fan out to
/// comparison, unitization and accumulation.
pub(crate) fn strategies_for(kind: StatementKind, strategy: Option<AnalogyStrategy>) -> Result<Vec<AnalogyStrategy>, PipelineError> {
    match (kind, strategy) {
        (StatementKind::Simple, None) => Ok(AnalogyStrategy::SIMPLE.to_vec()),
        (StatementKind::Proportion, None | Some(AnalogyStrategy::Proportion)) => Ok(vec![AnalogyStrategy::Proportion]),
        (StatementKind::Simple, Some(AnalogyStrategy::Proportion)) => Err(PipelineError::Argument(
            "the proportion strategy needs a proportion statement".into(),
        )),
        (StatementKind::Proportion, Some(s)) => Err(PipelineError::Argument(format!(
            "a proportion statement cannot use the {s} strategy"
        ))),
        (StatementKind::Simple, Some(s)) => Ok(vec![s]),
    }
}

pub(crate) fn generation_prompt(
    statement: &DataStatement,
    strategy: AnalogyStrategy,
    fewshot: &[AnalogyCase],
    prompts: &PromptSet,
    count: usize,
) -> Result<String, PipelineError> {
    let examples: Vec<AnalogyCase> = fewshot.iter().filter(|c| c.strategy == strategy).cloned().collect();
    let (value, format) = match statement.kind {
        StatementKind::Simple => (format_measure(statement.value()), SIMPLE_FORMAT),
        StatementKind::Proportion => (
            format!("{} to {}", format_measure(statement.values[0]), format_measure(statement.values[1])),
            PROPORTION_FORMAT,
        ),
    };
    let guideline = prompts.render(&format!("guideline_{strategy}"), &Default::default())?;
    let mut statement_text = statement.raw.clone();
    if !statement.theme_hint.is_empty() {
        statement_text.push_str(&format!(" (context: {})", statement.theme_hint));
    }
    Ok(prompts.render(
        "generate",
        &slots([
            ("fewshot", fewshot_block(&examples)),
            ("strategy", strategy.to_string()),
            ("guideline", guideline),
            ("statement", statement_text),
            ("value", value),
            ("unit", statement.unit.clone()),
            ("quantity_kind", statement.quantity_kind.to_string()),
            ("count", count.to_string()),
            ("format", format.to_string()),
        ]),
    )?)
}

/// Asks the provider for analog objects, one prompt per strategy, and tags each
/// parsed candidate with its strategy. Candidate ids run `c1, c2, ...` across strategies.
#[allow(clippy::too_many_arguments)]
pub fn generate_candidates(
    statement: &DataStatement,
    strategy: Option<AnalogyStrategy>,
    fewshot: &[AnalogyCase],
    provider: &dyn TextGenProvider,
    prompts: &PromptSet,
    registry: &UnitRegistry,
    params: &DecodingParams,
    count: usize,
    warnings: &mut Warnings,
) -> Result<Generated, PipelineError> {
    let mut generated = Generated::default();
    for strategy in strategies_for(statement.kind, strategy)? {
        if !fewshot.iter().any(|c| c.strategy == strategy) {
            warnings.push(format!("no few-shot examples for {strategy}"));
        }
        let prompt = generation_prompt(statement, strategy, fewshot, prompts, count)?;
        let reply = complete(provider, &prompt, params)?;
        let (candidates, theme) = parse_candidate_lines(&reply, strategy, statement, registry, warnings);
        if candidates.is_empty() {
            warnings.push(format!("no usable {strategy} candidates in the reply"));
        }
        if let Some(theme) = theme {
            generated.themes.insert(strategy, theme);
        }
        generated.candidates.extend(candidates);
    }
    if generated.candidates.is_empty() {
        return Err(PipelineError::Generation("the provider returned no parseable candidates".into()));
    }
    for (i, c) in generated.candidates.iter_mut().enumerate() {
        c.id = format!("c{}", i + 1);
    }
    Ok(generated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genai::{MockTextProvider, ProviderError};

    fn bottles() -> DataStatement {
        DataStatement {
            raw: "Every day, 1.3 billion plastic bottles are sold around the world".into(),
            kind: StatementKind::Simple,
            values: vec![1.3e9],
            unit: "bottles".into(),
            quantity_kind: DataBindingType::Quantity,
            subject: "plastic bottles".into(),
            theme_hint: String::new(),
        }
    }

    fn script(statement: &DataStatement, strategy: AnalogyStrategy, reply: &str) -> MockTextProvider {
        let prompt = generation_prompt(statement, strategy, &[], &PromptSet::builtin(), 5).unwrap();
        MockTextProvider::default().with(&prompt, reply)
    }

    fn run(mock: &MockTextProvider, statement: &DataStatement, strategy: Option<AnalogyStrategy>, w: &mut Warnings) -> Result<Generated, PipelineError> {
        generate_candidates(
            statement,
            strategy,
            &[],
            mock,
            &PromptSet::builtin(),
            &UnitRegistry::builtin(),
            &DecodingParams::default(),
            5,
            w,
        )
    }

    #[test]
    fn eiffel_tower_is_transformed() {
        let s = bottles();
        let mock = script(&s, AnalogyStrategy::Comparison, "Theme: plastic waste\nEiffel Tower | 330 | meters | length");
        let mut w = Warnings::default();
        let g = run(&mock, &s, Some(AnalogyStrategy::Comparison), &mut w).unwrap();
        assert_eq!(g.candidates.len(), 1);
        let c = &g.candidates[0];
        assert_eq!((c.object.as_str(), c.value, c.unit.as_str()), ("Eiffel Tower", 330.0, "meters"));
        assert_eq!(c.strategy, AnalogyStrategy::Comparison);
        assert!(c.measurement_transformed);
        assert_eq!(g.themes[&AnalogyStrategy::Comparison], "plastic waste");
    }

    #[test]
    fn malformed_line_dropped_with_warning() {
        let s = bottles();
        let reply = "Thinking about familiar objects...\n\
            1. Eiffel Tower | 330 | meters | length | 0.25 | meters\n\
            2. Big Ben | tall | meters | length\n\
            3. school bus | 12 | meters | length | 25 | cm";
        let mock = script(&s, AnalogyStrategy::Comparison, reply);
        let mut w = Warnings::default();
        let g = run(&mock, &s, Some(AnalogyStrategy::Comparison), &mut w).unwrap();
        assert_eq!(g.candidates.len(), 2);
        assert_eq!(w.iter().filter(|m| m.contains("dropped")).count(), 1, "{w:?}");
        assert_eq!(g.candidates[1].id, "c2");
        assert_eq!(g.candidates[1].per_item.as_ref().unwrap().unit, "cm");
    }

    #[test]
    fn unscripted_is_provider_error() {
        let mut w = Warnings::default();
        let err = run(&MockTextProvider::default(), &bottles(), Some(AnalogyStrategy::Comparison), &mut w).unwrap_err();
        assert!(matches!(err, PipelineError::Provider(ProviderError::Unscripted { .. })));
    }

    #[test]
    fn unclassified_fans_out() {
        let s = bottles();
        let mut mock = MockTextProvider::default();
        for (strategy, line) in [
            (AnalogyStrategy::Comparison, "Eiffel Tower | 330 | meters | length | 0.25 | meters"),
            (AnalogyStrategy::Unitization, "shipping container | 20000 | bottles | quantity"),
            (AnalogyStrategy::Accumulation, "landfill | 5e12 | bottles | quantity"),
        ] {
            let prompt = generation_prompt(&s, strategy, &[], &PromptSet::builtin(), 5).unwrap();
            mock = mock.with(&prompt, line);
        }
        let mut w = Warnings::default();
        let g = run(&mock, &s, None, &mut w).unwrap();
        let tags: Vec<_> = g.candidates.iter().map(|c| c.strategy).collect();
        assert_eq!(tags, AnalogyStrategy::SIMPLE.to_vec());
        assert!(!g.candidates[1].measurement_transformed);
    }

    #[test]
    fn zero_candidates_is_generation_error() {
        let s = bottles();
        let mock = script(&s, AnalogyStrategy::Comparison, "I cannot think of anything.");
        let err = run(&mock, &s, Some(AnalogyStrategy::Comparison), &mut Warnings::default()).unwrap_err();
        assert!(matches!(err, PipelineError::Generation(_)));
    }

    #[test]
    fn proportion_value_derived() {
        let s = DataStatement {
            raw: "The wealth ratio is about 900,000 to 1".into(),
            kind: StatementKind::Proportion,
            values: vec![900_000.0, 1.0],
            unit: "ratio".into(),
            quantity_kind: DataBindingType::AbstractConcept,
            subject: "wealth ratio".into(),
            theme_hint: String::new(),
        };
        let mut w = Warnings::default();
        let (c, _) = parse_candidate_lines(
            "stack of paper | ? | m | sheet of paper | 0.104 | mm | length",
            AnalogyStrategy::Proportion,
            &s,
            &UnitRegistry::builtin(),
            &mut w,
        );
        assert_eq!(c[0].value, 93.6);
        assert!(c[0].derived_value);
        assert!(c[0].measurement_transformed);
        assert!(w.is_empty());
    }

    #[test]
    fn strategy_expansion() {
        assert_eq!(strategies_for(StatementKind::Proportion, None).unwrap(), vec![AnalogyStrategy::Proportion]);
        assert!(strategies_for(StatementKind::Simple, Some(AnalogyStrategy::Proportion)).is_err());
    }
}
