use serde::{Deserialize, Serialize};

use super::{AnalogyCandidate, DataStatement, PipelineError};
use crate::designspace::AnalogyStrategy;
use crate::units::{round_sig, UnitError, UnitRegistry};

/// Backend arithmetic for one candidate. No provider is involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calculation {
    pub multiplier: f64,
    /// Value judged for perceptibility: the multiplier itself, or achieved ÷ target for proportions.
    pub check_value: f64,
    /// Statement amount expressed in the candidate's unit, when that applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement_in_analog_unit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_ratio: Option<f64>,
    pub formula: String,
}

fn positive(value: f64, what: &str) -> Result<f64, PipelineError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(PipelineError::Argument(format!("{what} must be positive, got {value}")))
    }
}

/// Statement amount in the candidate's unit. Transformed measurements go through
/// the per-item re-expression so the arithmetic stays in one dimension.
fn statement_amount(statement: &DataStatement, candidate: &AnalogyCandidate, registry: &UnitRegistry) -> Result<(f64, String), PipelineError> {
    let value = statement.value();
    if !candidate.measurement_transformed {
        let converted = registry.convert(value, &statement.unit, &candidate.unit)?;
        return Ok((converted, format!("{value} {} = {converted} {}", statement.unit, candidate.unit)));
    }
    let per = candidate.per_item.as_ref().ok_or_else(|| UnitError::Incompatible {
        from: statement.unit.clone(),
        to: candidate.unit.clone(),
        reason: "measurement is transformed but no per-item re-expression was given".into(),
    })?;
    positive(per.value, "per-item value")?;
    let per_in_unit = registry.convert(per.value, &per.unit, &candidate.unit)?;
    let total = value * per_in_unit;
    Ok((
        total,
        format!("{value} {} × {} {} each = {total} {}", statement.unit, per.value, per.unit, candidate.unit),
    ))
}

/// Multiplier for a candidate.
///
/// Comparison and unitization divide the statement by the candidate; accumulation
/// divides the candidate by the statement (how many originals make one analog);
/// proportion reports the achieved ratio of the pair.
pub fn compute_multiplier(
    statement: &DataStatement,
    candidate: &AnalogyCandidate,
    registry: &UnitRegistry,
) -> Result<Calculation, PipelineError> {
    statement.validate()?;
    positive(candidate.value, "candidate value")?;
    match candidate.strategy {
        AnalogyStrategy::Proportion => {
            let target = statement
                .ratio()
                .ok_or_else(|| PipelineError::Argument("proportion candidate needs a proportion statement".into()))?;
            let other = candidate
                .counterpart
                .as_ref()
                .ok_or_else(|| PipelineError::Argument(format!("proportion candidate `{}` has no counterpart", candidate.object)))?;
            positive(other.value, "counterpart value")?;
            let smaller = registry.convert(other.value, &other.unit, &candidate.unit)?;
            let achieved = candidate.value / smaller;
            Ok(Calculation {
                multiplier: achieved,
                check_value: achieved / target,
                statement_in_analog_unit: None,
                target_ratio: Some(target),
                formula: format!(
                    "{} {} / {} {} = {achieved} (target {target})",
                    candidate.value, candidate.unit, other.value, other.unit
                ),
            })
        }
        strategy => {
            let (amount, how) = statement_amount(statement, candidate, registry)?;
            let multiplier = if strategy == AnalogyStrategy::Accumulation {
                candidate.value / amount
            } else {
                amount / candidate.value
            };
            positive(multiplier, "multiplier")?;
            let formula = if strategy == AnalogyStrategy::Accumulation {
                format!("{how}; {} / {amount} = {multiplier}", candidate.value)
            } else {
                format!("{how}; {amount} / {} = {multiplier}", candidate.value)
            };
            Ok(Calculation {
                multiplier,
                check_value: multiplier,
                statement_in_analog_unit: Some(amount),
                target_ratio: None,
                formula,
            })
        }
    }
}

/// Value the larger object of a proportion pair must have to match the
/// statement's ratio, in `unit`. Rounded to 12 significant figures so decimal
/// inputs give decimal outputs (0.104 mm × 900,000 = 93.6 m).
pub fn derive_larger_value(
    statement: &DataStatement,
    smaller_value: f64,
    smaller_unit: &str,
    unit: &str,
    registry: &UnitRegistry,
) -> Result<f64, PipelineError> {
    let target = statement
        .ratio()
        .ok_or_else(|| PipelineError::Argument("deriving a pair value needs a proportion statement".into()))?;
    positive(smaller_value, "counterpart value")?;
    let base = registry.convert(smaller_value, smaller_unit, unit)?;
    positive(round_sig(base * target, 12), "derived value")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designspace::DataBindingType;
    use crate::pipeline::{Counterpart, Measure, Provenance, StatementKind};
    use proptest::prelude::*;

    fn statement(value: f64, unit: &str, kind: DataBindingType) -> DataStatement {
        DataStatement {
            raw: "s".into(),
            kind: StatementKind::Simple,
            values: vec![value],
            unit: unit.into(),
            quantity_kind: kind,
            subject: "s".into(),
            theme_hint: String::new(),
        }
    }

    fn candidate(value: f64, unit: &str, strategy: AnalogyStrategy) -> AnalogyCandidate {
        AnalogyCandidate {
            id: "c1".into(),
            object: "thing".into(),
            value,
            unit: unit.into(),
            quantity_kind: DataBindingType::Volume,
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

    #[test]
    fn olympic_pools() {
        let reg = UnitRegistry::builtin();
        let s = statement(75.6e12, "gallons", DataBindingType::Volume);
        let c = candidate(660_430.0, "gallons", AnalogyStrategy::Unitization);
        let m = compute_multiplier(&s, &c, &reg).unwrap().multiplier;
        assert!((m - 114_470_875.04).abs() < 0.01, "{m}");
        assert!((m / 114.4e6 - 1.0).abs() < 0.015);
    }

    #[test]
    fn pumped_water_vs_pool() {
        let reg = UnitRegistry::builtin();
        let s = statement(1.2e9, "liters", DataBindingType::Volume);
        let c = candidate(2.5e6, "liters", AnalogyStrategy::Unitization);
        assert_eq!(compute_multiplier(&s, &c, &reg).unwrap().multiplier, 480.0);
    }

    #[test]
    fn identity_and_conversion() {
        let reg = UnitRegistry::builtin();
        let s = statement(3.0, "km", DataBindingType::Length);
        assert_eq!(compute_multiplier(&s, &candidate(3.0, "km", AnalogyStrategy::Comparison), &reg).unwrap().multiplier, 1.0);
        let m = compute_multiplier(&s, &candidate(300.0, "m", AnalogyStrategy::Comparison), &reg).unwrap().multiplier;
        assert!((m - 10.0).abs() < 1e-12);
    }

    #[test]
    fn accumulation_counts_originals() {
        let reg = UnitRegistry::builtin();
        let s = statement(0.03, "g", DataBindingType::Quantity);
        let c = candidate(150.0, "g", AnalogyStrategy::Accumulation);
        let m = compute_multiplier(&s, &c, &reg).unwrap().multiplier;
        assert!((m - 5000.0).abs() < 1e-9);
    }

    #[test]
    fn incompatible_units() {
        let reg = UnitRegistry::builtin();
        let s = statement(5.0, "liters", DataBindingType::Volume);
        let c = candidate(3.0, "meters", AnalogyStrategy::Comparison);
        assert!(matches!(compute_multiplier(&s, &c, &reg), Err(PipelineError::Unit(_))));
    }

    #[test]
    fn transformed_needs_per_item() {
        let reg = UnitRegistry::builtin();
        let s = statement(1.3e9, "bottles", DataBindingType::Quantity);
        let mut c = candidate(330.0, "meters", AnalogyStrategy::Comparison);
        c.measurement_transformed = true;
        assert!(matches!(compute_multiplier(&s, &c, &reg), Err(PipelineError::Unit(_))));
        c.per_item = Some(Measure {
            value: 25.0,
            unit: "cm".into(),
        });
        let calc = compute_multiplier(&s, &c, &reg).unwrap();
        assert!((calc.statement_in_analog_unit.unwrap() - 3.25e8).abs() < 1e-3);
    }

    #[test]
    fn paper_stack() {
        let reg = UnitRegistry::builtin();
        let s = DataStatement {
            values: vec![900_000.0, 1.0],
            kind: StatementKind::Proportion,
            ..statement(1.0, "ratio", DataBindingType::AbstractConcept)
        };
        assert_eq!(derive_larger_value(&s, 0.104, "mm", "m", &reg).unwrap(), 93.6);
        assert_eq!(derive_larger_value(&s, 0.104, "mm", "mm", &reg).unwrap(), 93_600.0);
        let mut c = candidate(93.6, "m", AnalogyStrategy::Proportion);
        c.counterpart = Some(Counterpart {
            object: "sheet of paper".into(),
            value: 0.104,
            unit: "mm".into(),
        });
        let calc = compute_multiplier(&s, &c, &reg).unwrap();
        assert!((calc.check_value - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn same_unit_round_trip(s in 1e-3f64..1e15, c in 1e-3f64..1e15) {
            let reg = UnitRegistry::builtin();
            for strategy in [AnalogyStrategy::Comparison, AnalogyStrategy::Unitization] {
                let m = compute_multiplier(
                    &statement(s, "liters", DataBindingType::Volume),
                    &candidate(c, "liters", strategy),
                    &reg,
                ).unwrap().multiplier;
                prop_assert!(((m * c - s) / s).abs() <= 1e-12);
            }
        }
    }
}
