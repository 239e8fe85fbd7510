use serde::{Deserialize, Serialize};

use super::{AnalogyCandidate, PipelineError, Provenance, Warnings};
use crate::genai::{complete_parsed, slots, DecodingParams, PromptSet, TextGenProvider};
use crate::units::{find_amounts, round_sig, UnitRegistry};

/// One `object: value unit` line exchanged with the correction prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionLine {
    pub object: String,
    pub value: f64,
    pub unit: String,
}

impl CorrectionLine {
    pub fn render(&self) -> String {
        format!("{}: {} {}", self.object, self.value, self.unit).trim_end().to_string()
    }
}

/// The correction line for a candidate's main measurement.
pub fn correction_line(candidate: &AnalogyCandidate) -> String {
    CorrectionLine {
        object: candidate.object.clone(),
        value: candidate.value,
        unit: candidate.unit.clone(),
    }
    .render()
}

fn parse_line(line: &str) -> Result<CorrectionLine, String> {
    let colon = line.rfind(':').ok_or_else(|| format!("no `:` in `{line}`"))?;
    let object = line[..colon].trim();
    let tail = line[colon + 1..].trim();
    if object.is_empty() {
        return Err(format!("empty object in `{line}`"));
    }
    let amount = find_amounts(tail)
        .into_iter()
        .next()
        .ok_or_else(|| format!("no value in `{line}`"))?;
    let sign = tail[..amount.start].trim();
    let value = match sign {
        "" | "+" => amount.value,
        "-" | "−" => -amount.value,
        _ => return Err(format!("unexpected text before the value in `{line}`")),
    };
    Ok(CorrectionLine {
        object: object.to_string(),
        value,
        unit: tail[amount.end..].trim().trim_end_matches('.').trim().to_string(),
    })
}

/// Parses a correction reply that must contain exactly `expected` lines.
pub fn parse_correction_reply(reply: &str, expected: usize) -> Result<Vec<CorrectionLine>, String> {
    let lines: Vec<CorrectionLine> = reply
        .lines()
        .map(|l| l.trim().trim_start_matches(['-', '*']).trim())
        .filter(|l| !l.is_empty() && l.contains(':'))
        .map(parse_line)
        .collect::<Result<_, _>>()?;
    if lines.len() != expected {
        return Err(format!("expected {expected} line(s), found {}", lines.len()));
    }
    Ok(lines)
}

#[derive(Clone, Copy)]
enum Slot {
    Main(usize),
    Counterpart(usize),
}

fn slot_lines(candidates: &[AnalogyCandidate]) -> Vec<(Slot, CorrectionLine)> {
    let mut out = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        out.push((
            Slot::Main(i),
            CorrectionLine {
                object: c.object.clone(),
                value: c.value,
                unit: c.unit.clone(),
            },
        ));
        if let Some(other) = &c.counterpart {
            out.push((
                Slot::Counterpart(i),
                CorrectionLine {
                    object: other.object.clone(),
                    value: other.value,
                    unit: other.unit.clone(),
                },
            ));
        }
    }
    out
}

fn items(lines: &[(Slot, CorrectionLine)]) -> String {
    lines.iter().map(|(_, l)| l.render()).collect::<Vec<_>>().join("\n")
}

fn ask(
    template: &str,
    lines: &[(Slot, CorrectionLine)],
    provider: &dyn TextGenProvider,
    prompts: &PromptSet,
    params: &DecodingParams,
    retries: u32,
) -> Result<Vec<CorrectionLine>, PipelineError> {
    let prompt = prompts.render(template, &slots([("items", items(lines))]))?;
    Ok(complete_parsed(provider, &prompt, params, retries, |reply| {
        parse_correction_reply(reply, lines.len())
    })?)
}

/// Two correction passes: the first fixes measurement values, the second makes
/// object names specific. Renamed objects keep their previous name as an alias.
pub fn correct_candidates(
    mut candidates: Vec<AnalogyCandidate>,
    provider: &dyn TextGenProvider,
    prompts: &PromptSet,
    params: &DecodingParams,
    registry: &UnitRegistry,
    retries: u32,
    warnings: &mut Warnings,
) -> Result<Vec<AnalogyCandidate>, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::Argument("nothing to correct".into()));
    }

    let lines = slot_lines(&candidates);
    let values = ask("correct_values", &lines, provider, prompts, params, retries)?;
    for ((slot, before), after) in lines.iter().zip(values) {
        if after.value == before.value && (after.unit.is_empty() || after.unit.eq_ignore_ascii_case(&before.unit)) {
            continue;
        }
        let (i, is_main) = match *slot {
            Slot::Main(i) => (i, true),
            Slot::Counterpart(i) => (i, false),
        };
        let c = &mut candidates[i];
        if is_main && c.derived_value {
            warnings.push(format!("{}: ignoring correction of a backend-derived value", c.id));
            continue;
        }
        if !(after.value.is_finite() && after.value > 0.0) {
            warnings.push(format!(
                "{}: rejected corrected value {} for `{}`, keeping {}",
                c.id, after.value, before.object, before.value
            ));
            continue;
        }
        let value = if after.unit.is_empty() {
            after.value
        } else {
            match registry.convert(after.value, &after.unit, &before.unit) {
                Ok(v) => round_sig(v, 12),
                Err(e) => {
                    warnings.push(format!("{}: rejected corrected measurement `{}`: {e}", c.id, after.render()));
                    continue;
                }
            }
        };
        if value == before.value {
            continue;
        }
        let from = format!("{} {}", before.value, before.unit);
        let to = format!("{value} {}", before.unit);
        if is_main {
            c.value = value;
            c.revise("correct_values", "value", from, to);
        } else {
            c.counterpart.as_mut().expect("slot has counterpart").value = value;
            c.revise("correct_values", "counterpart.value", from, to);
        }
        c.provenance = Provenance::Corrected;
    }

    let lines = slot_lines(&candidates);
    let names = ask("correct_names", &lines, provider, prompts, params, retries)?;
    for ((slot, before), after) in lines.iter().zip(names) {
        if after.value != before.value {
            warnings.push(format!(
                "name pass changed the value of `{}` to {}; ignored",
                before.object, after.value
            ));
        }
        if after.object == before.object {
            continue;
        }
        match *slot {
            Slot::Main(i) => {
                let c = &mut candidates[i];
                c.aliases.push(before.object.clone());
                c.object = after.object.clone();
                c.revise("correct_names", "object", before.object.clone(), after.object);
                c.provenance = Provenance::Corrected;
            }
            Slot::Counterpart(i) => {
                let c = &mut candidates[i];
                c.counterpart.as_mut().expect("slot has counterpart").object = after.object.clone();
                c.revise("correct_names", "counterpart.object", before.object.clone(), after.object);
                c.provenance = Provenance::Corrected;
            }
        }
    }
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designspace::{AnalogyStrategy, DataBindingType};
    use crate::genai::{MockTextProvider, ProviderError};

    fn candidate(id: &str, object: &str, value: f64) -> AnalogyCandidate {
        AnalogyCandidate {
            id: id.into(),
            object: object.into(),
            value,
            unit: "meters".into(),
            quantity_kind: DataBindingType::Length,
            strategy: AnalogyStrategy::Comparison,
            measurement_transformed: false,
            provenance: Provenance::Generated,
            per_item: None,
            counterpart: None,
            derived_value: false,
            aliases: vec![],
            history: vec![],
        }
    }

    fn prompt(template: &str, items: &str) -> String {
        PromptSet::builtin().render(template, &slots([("items", items.to_string())])).unwrap()
    }

    fn run(mock: &MockTextProvider, cands: Vec<AnalogyCandidate>, w: &mut Warnings) -> Result<Vec<AnalogyCandidate>, PipelineError> {
        correct_candidates(cands, mock, &PromptSet::builtin(), &DecodingParams::default(), &UnitRegistry::builtin(), 0, w)
    }

    #[test]
    fn line_parsing() {
        let l = parse_line("the height of a two-story house: 7 meters").unwrap();
        assert_eq!((l.object.as_str(), l.value, l.unit.as_str()), ("the height of a two-story house", 7.0, "meters"));
        assert_eq!(parse_line("pool: -3 meters").unwrap().value, -3.0);
        assert!(parse_line("pool: about meters").is_err());
        assert!(parse_correction_reply("a: 1 m\nb: 2 m", 3).is_err());
    }

    #[test]
    fn pool_depth_and_house() {
        let before = "depth of swimming pool: 0.2 meters\nthe height of a house: 7 meters";
        let fixed = "depth of swimming pool: 2 meters\nthe height of a house: 7 meters";
        let renamed = "depth of swimming pool: 2 meters\nthe height of a two-story house: 7 meters";
        let mock = MockTextProvider::default()
            .with(&prompt("correct_values", before), fixed)
            .with(&prompt("correct_names", fixed), renamed);
        let mut w = Warnings::default();
        let out = run(
            &mock,
            vec![candidate("c1", "depth of swimming pool", 0.2), candidate("c2", "the height of a house", 7.0)],
            &mut w,
        )
        .unwrap();
        assert_eq!(correction_line(&out[0]), "depth of swimming pool: 2 meters");
        assert_eq!(correction_line(&out[1]), "the height of a two-story house: 7 meters");
        assert_eq!(out[1].aliases, vec!["the height of a house"]);
        assert_eq!(out[0].provenance, Provenance::Corrected);
        assert_eq!(out[0].history[0].from, "0.2 meters");
        assert!(w.is_empty());
    }

    #[test]
    fn negative_value_rejected() {
        let before = "pool: 2 meters";
        let mock = MockTextProvider::default()
            .with(&prompt("correct_values", before), "pool: -3 meters")
            .with(&prompt("correct_names", before), before);
        let mut w = Warnings::default();
        let out = run(&mock, vec![candidate("c1", "pool", 2.0)], &mut w).unwrap();
        assert_eq!(out[0].value, 2.0);
        assert_eq!(out[0].provenance, Provenance::Generated);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn unit_change_is_converted() {
        let before = "tower: 330 meters";
        let after = "tower: 0.33 km";
        let mock = MockTextProvider::default()
            .with(&prompt("correct_values", before), after)
            .with(&prompt("correct_names", "tower: 330 meters"), "tower: 330 meters");
        let out = run(&mock, vec![candidate("c1", "tower", 330.0)], &mut Warnings::default()).unwrap();
        assert!((out[0].value - 330.0).abs() < 1e-9);
    }

    #[test]
    fn provider_errors_propagate() {
        let err = run(&MockTextProvider::default(), vec![candidate("c1", "pool", 2.0)], &mut Warnings::default()).unwrap_err();
        assert!(matches!(err, PipelineError::Provider(ProviderError::Unscripted { .. })));
    }
}
