//! Unit registry and amount parsing used by the backend calculation step.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::designspace::DataBindingType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Length,
    Area,
    Volume,
    Mass,
    Time,
    Temperature,
    Count,
}

impl Dimension {
    pub fn binding(self) -> DataBindingType {
        match self {
            Dimension::Length => DataBindingType::Length,
            Dimension::Area => DataBindingType::Area,
            Dimension::Volume => DataBindingType::Volume,
            Dimension::Time => DataBindingType::Time,
            Dimension::Temperature => DataBindingType::Temperature,
            Dimension::Mass | Dimension::Count => DataBindingType::Quantity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitDef {
    pub name: String,
    pub dimension: Dimension,
    /// Multiplier into the dimension's base unit (m, m², m³, kg, s, item).
    pub factor: f64,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum UnitError {
    #[error("cannot convert `{from}` to `{to}`: {reason}")]
    Incompatible {
        from: String,
        to: String,
        reason: String,
    },
    #[error("unit file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitRegistry {
    by_alias: HashMap<String, UnitDef>,
}

#[derive(Deserialize)]
struct UnitFile {
    units: Vec<UnitDef>,
}

const US_GALLON_M3: f64 = 0.003_785_411_784;

fn builtin_units() -> Vec<UnitDef> {
    let u = |name: &str, dimension, factor, aliases: &[&str]| UnitDef {
        name: name.to_string(),
        dimension,
        factor,
        aliases: aliases.iter().map(|a| a.to_string()).collect(),
    };
    use Dimension::*;
    vec![
        u("meter", Length, 1.0, &["m", "meters", "metre", "metres"]),
        u("kilometer", Length, 1000.0, &["km", "kilometers", "kilometre", "kilometres"]),
        u("centimeter", Length, 0.01, &["cm", "centimeters", "centimetre", "centimetres"]),
        u("millimeter", Length, 0.001, &["mm", "millimeters", "millimetre", "millimetres"]),
        u("foot", Length, 0.3048, &["ft", "feet"]),
        u("inch", Length, 0.0254, &["in", "inches"]),
        u("yard", Length, 0.9144, &["yd", "yards"]),
        u("mile", Length, 1609.344, &["mi", "miles"]),
        u("square meter", Area, 1.0, &["m2", "m²", "square meters", "sq m", "square metres"]),
        u("square kilometer", Area, 1e6, &["km2", "km²", "square kilometers", "sq km", "square kilometres"]),
        u("square foot", Area, 0.092_903_04, &["ft2", "sq ft", "square feet"]),
        u("square mile", Area, 2_589_988.110_336, &["sq mi", "square miles"]),
        u("hectare", Area, 10_000.0, &["ha", "hectares"]),
        u("acre", Area, 4_046.856_422_4, &["acres"]),
        u("cubic meter", Volume, 1.0, &["m3", "m³", "cubic meters", "cubic metres"]),
        u("liter", Volume, 0.001, &["l", "liters", "litre", "litres"]),
        u("milliliter", Volume, 1e-6, &["ml", "milliliters", "millilitre", "millilitres"]),
        u("gallon", Volume, US_GALLON_M3, &["gal", "gallons", "us gallon", "us gallons"]),
        u("cubic foot", Volume, 0.028_316_846_592, &["ft3", "cubic feet"]),
        u("kilogram", Mass, 1.0, &["kg", "kilograms", "kilo", "kilos"]),
        u("gram", Mass, 0.001, &["g", "grams"]),
        u("milligram", Mass, 1e-6, &["mg", "milligrams"]),
        u("tonne", Mass, 1000.0, &["t", "tonnes", "metric ton", "metric tons", "ton", "tons"]),
        u("pound", Mass, 0.453_592_37, &["lb", "lbs", "pounds"]),
        u("second", Time, 1.0, &["s", "sec", "seconds"]),
        u("minute", Time, 60.0, &["min", "minutes"]),
        u("hour", Time, 3600.0, &["h", "hr", "hours"]),
        u("day", Time, 86_400.0, &["days"]),
        u("week", Time, 604_800.0, &["weeks"]),
        u("year", Time, 31_557_600.0, &["years", "yr"]),
        u("degree celsius", Temperature, 1.0, &["°c", "celsius", "degrees celsius"]),
        u("degree fahrenheit", Temperature, 1.0, &["°f", "fahrenheit", "degrees fahrenheit"]),
        u("kelvin", Temperature, 1.0, &["k"]),
        u("item", Count, 1.0, &["items", "piece", "pieces", "unit", "units"]),
    ]
}

fn key(unit: &str) -> String {
    unit.trim().to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Default for UnitRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl UnitRegistry {
    pub fn builtin() -> Self {
        let mut reg = Self {
            by_alias: HashMap::new(),
        };
        for def in builtin_units() {
            reg.insert(def);
        }
        reg
    }

    pub fn insert(&mut self, def: UnitDef) {
        for alias in std::iter::once(&def.name).chain(&def.aliases) {
            self.by_alias.insert(key(alias), def.clone());
        }
    }

    /// Adds units from a JSON document `{"units": [{name, dimension, factor, aliases}]}`.
    pub fn extend_from_file(&mut self, path: &Path) -> Result<(), UnitError> {
        let err = |message: String| UnitError::File {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let file: UnitFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        for def in file.units {
            if !(def.factor.is_finite() && def.factor > 0.0) {
                return Err(err(format!("unit `{}` has non-positive factor", def.name)));
            }
            self.insert(def);
        }
        Ok(())
    }

    pub fn lookup(&self, unit: &str) -> Option<&UnitDef> {
        self.by_alias.get(&key(unit))
    }

    /// Quantity kind implied by a unit; unregistered nouns ("bottles") count items.
    pub fn quantity_kind(&self, unit: &str) -> DataBindingType {
        self.lookup(unit)
            .map(|d| d.dimension.binding())
            .unwrap_or(DataBindingType::Quantity)
    }

    /// Converts `value` from one unit to another. Unregistered units are treated
    /// as item counts and convert 1:1 into each other.
    pub fn convert(&self, value: f64, from: &str, to: &str) -> Result<f64, UnitError> {
        if key(from) == key(to) {
            return Ok(value);
        }
        let incompatible = |reason: &str| UnitError::Incompatible {
            from: from.to_string(),
            to: to.to_string(),
            reason: reason.to_string(),
        };
        let count = |u: &str| {
            self.lookup(u).map_or(Some(1.0), |d| (d.dimension == Dimension::Count).then_some(d.factor))
        };
        match (self.lookup(from), self.lookup(to)) {
            (Some(a), Some(b)) if a.dimension == b.dimension => {
                if a.dimension == Dimension::Temperature && a.name != b.name {
                    return Err(incompatible("temperature scales are not proportional"));
                }
                Ok(value * a.factor / b.factor)
            }
            _ => match (count(from), count(to)) {
                (Some(a), Some(b)) => Ok(value * a / b),
                _ => Err(incompatible("different dimensions")),
            },
        }
    }
}

static AMOUNT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)
        (?P<num>\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?(?:e[+-]?\d+)?|\.\d+)
        (?:\s*(?P<scale>thousand|million|billion|trillion)\b)?",
    )
    .expect("amount pattern compiles")
});

/// A number found in free text, with its byte span.
#[derive(Debug, Clone, PartialEq)]
pub struct Amount {
    pub value: f64,
    pub start: usize,
    pub end: usize,
}

fn scale_exponent(word: &str) -> i32 {
    match word.to_lowercase().as_str() {
        "thousand" => 3,
        "million" => 6,
        "billion" => 9,
        "trillion" => 12,
        _ => 0,
    }
}

/// Finds every amount in `text`: digits with optional thousands separators,
/// decimals and a trailing scale word. Scale words are applied in decimal so
/// `1.3 billion` parses to exactly 1.3e9.
pub fn find_amounts(text: &str) -> Vec<Amount> {
    AMOUNT
        .captures_iter(text)
        .filter_map(|cap| {
            let whole = cap.get(0)?;
            let digits = cap["num"].replace(',', "");
            let exp = cap.name("scale").map_or(0, |m| scale_exponent(m.as_str()));
            let value: f64 = format!("{digits}e{exp}").parse().ok().or_else(|| {
                // digits already carry an exponent
                digits.parse::<f64>().ok().map(|v| v * 10f64.powi(exp))
            })?;
            Some(Amount {
                value,
                start: whole.start(),
                end: whole.end(),
            })
        })
        .collect()
}

/// Parses a field that should hold exactly one amount, e.g. `"660,430"` or `"1.4 billion"`.
pub fn parse_amount(text: &str) -> Option<f64> {
    let amounts = find_amounts(text);
    match amounts.as_slice() {
        [one] if text[..one.start].trim().is_empty() && text[one.end..].trim().is_empty() => Some(one.value),
        _ => None,
    }
}

/// Rounds to `digits` significant figures, going through decimal text so the
/// result is the closest double to the rounded decimal.
pub fn round_sig(value: f64, digits: usize) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return value;
    }
    format!("{:.*e}", digits.saturating_sub(1), value)
        .parse()
        .unwrap_or(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amounts_with_scale_words() {
        let found = find_amounts("Every day, 1.3 billion plastic bottles are sold");
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].value, 1.3e9);
        assert_eq!(parse_amount("75.6 trillion"), Some(75.6e12));
        assert_eq!(parse_amount("660,430"), Some(660_430.0));
        assert_eq!(parse_amount("2.5e6"), Some(2.5e6));
        assert_eq!(parse_amount("0.104"), Some(0.104));
        assert_eq!(parse_amount("about 3"), None);
        assert_eq!(parse_amount("many"), None);
    }

    #[test]
    fn ratio_numbers() {
        let v: Vec<f64> = find_amounts("is about 900,000 to 1").iter().map(|a| a.value).collect();
        assert_eq!(v, vec![900_000.0, 1.0]);
    }

    #[test]
    fn conversions() {
        let reg = UnitRegistry::builtin();
        assert_eq!(reg.convert(5.0, "meters", "m").unwrap(), 5.0);
        assert!((reg.convert(1.0, "gallons", "liters").unwrap() - 3.785_411_784).abs() < 1e-12);
        assert_eq!(reg.convert(3.0, "bottles", "people").unwrap(), 3.0);
        assert!(reg.convert(3.0, "bottles", "meters").is_err());
        assert!(reg.convert(3.0, "liters", "meters").is_err());
        assert!(reg.convert(3.0, "celsius", "fahrenheit").is_err());
        assert_eq!(reg.quantity_kind("bottles"), DataBindingType::Quantity);
        assert_eq!(reg.quantity_kind("Square Feet"), DataBindingType::Area);
    }

    #[test]
    fn registry_extension_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("units.json");
        fs::write(
            &path,
            r#"{"units":[{"name":"furlong","dimension":"length","factor":201.168,"aliases":["furlongs"]}]}"#,
        )
        .unwrap();
        let mut reg = UnitRegistry::builtin();
        reg.extend_from_file(&path).unwrap();
        assert!((reg.convert(1.0, "furlongs", "m").unwrap() - 201.168).abs() < 1e-9);
    }

    #[test]
    fn significant_figures() {
        assert_eq!(round_sig(114_470_875.04, 3), 114_000_000.0);
        assert_eq!(round_sig(93_600.000_000_001, 12), 93_600.0);
        assert_eq!(round_sig(0.000_123_45, 2), 0.000_12);
    }
}
