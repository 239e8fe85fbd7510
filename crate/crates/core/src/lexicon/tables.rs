use std::collections::HashMap;
use std::fs;
use std::path::Path;

use tracing::warn;

use super::graph::normalize_lemma;
use super::LexiconError;

/// Word frequency in occurrences per million.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyTable {
    entries: HashMap<String, f64>,
}

/// Human concreteness ratings on the 1–5 scale.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConcretenessTable {
    entries: HashMap<String, f64>,
}

/// Splits `lemma<TAB>value`; lines without a tab fall back to the last whitespace.
fn split_row(line: &str) -> Option<(&str, &str)> {
    match line.split_once('\t') {
        Some((lemma, rest)) => Some((lemma, rest.split('\t').next().unwrap_or(rest))),
        None => line.trim().rsplit_once(char::is_whitespace),
    }
}

fn parse_rows(text: &str, what: &str) -> Result<HashMap<String, f64>, LexiconError> {
    let mut entries = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let (lemma, value) = split_row(raw).ok_or_else(|| LexiconError::Malformed {
            line,
            message: format!("expected `lemma<TAB>{what}`"),
        })?;
        let value: f64 = value.trim().parse().map_err(|_| LexiconError::Malformed {
            line,
            message: format!("non-numeric {what} `{}`", value.trim()),
        })?;
        if !value.is_finite() {
            return Err(LexiconError::Malformed {
                line,
                message: format!("non-finite {what}"),
            });
        }
        let lemma = normalize_lemma(lemma);
        if lemma.is_empty() {
            return Err(LexiconError::Malformed {
                line,
                message: "empty lemma".into(),
            });
        }
        if entries.insert(lemma.clone(), value).is_some() {
            warn!(line, lemma = %lemma, "duplicate lemma, keeping the later entry");
        }
    }
    Ok(entries)
}

impl FrequencyTable {
    pub fn load(source: &Path) -> Result<Self, LexiconError> {
        let text = fs::read_to_string(source).map_err(|e| LexiconError::io(source, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let entries = parse_rows(text, "per-million frequency")?;
        if let Some((lemma, v)) = entries.iter().find(|(_, v)| **v < 0.0) {
            return Err(LexiconError::Range(format!(
                "frequency for `{lemma}` is negative ({v})"
            )));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, lemma: &str) -> Option<f64> {
        self.entries.get(&normalize_lemma(lemma)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ConcretenessTable {
    pub fn load(source: &Path) -> Result<Self, LexiconError> {
        let text = fs::read_to_string(source).map_err(|e| LexiconError::io(source, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let entries = parse_rows(text, "concreteness rating")?;
        if let Some((lemma, v)) = entries.iter().find(|(_, v)| !(1.0..=5.0).contains(*v)) {
            return Err(LexiconError::Range(format!(
                "concreteness for `{lemma}` is {v}, outside [1, 5]"
            )));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, lemma: &str) -> Option<f64> {
        self.entries.get(&normalize_lemma(lemma)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_line_frequency_file() {
        let t = FrequencyTable::parse("the\t49244.3\ndog\t128.6\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("Dog"), Some(128.6));
    }

    #[test]
    fn whitespace_separated_rows_are_accepted() {
        let t = FrequencyTable::parse("the 49244.3\ndog 128.6\n").unwrap();
        assert_eq!(t.get("the"), Some(49244.3));
    }

    #[test]
    fn duplicate_lemma_last_wins() {
        let t = FrequencyTable::parse("dog\t1\nDOG\t2\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("dog"), Some(2.0));
    }

    #[test]
    fn non_numeric_names_line() {
        let err = FrequencyTable::parse("# header\ndog\t1\ncat\tmany\n").unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 3, .. }), "{err}");
    }

    #[test]
    fn concreteness_out_of_range() {
        let err = ConcretenessTable::parse("dog\t4.9\nidea\t7.2\n").unwrap_err();
        assert!(matches!(err, LexiconError::Range(_)), "{err}");
    }

    #[test]
    fn negative_frequency_rejected() {
        assert!(matches!(
            FrequencyTable::parse("dog\t-1\n"),
            Err(LexiconError::Range(_))
        ));
    }
}
