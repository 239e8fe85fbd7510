use super::LexiconError;

/// Reduces a multi-word analog name to the lowercase lemma used for lexicon lookups.
///
/// Trailing parentheticals are dropped, then the last alphabetic token wins:
/// `"Olympic-size swimming pool"` becomes `"pool"`.
pub fn head_lemma(phrase: &str) -> Result<String, LexiconError> {
    let mut text = phrase.trim();
    while let Some(stripped) = text.strip_suffix(')') {
        match stripped.rfind('(') {
            Some(open) => text = stripped[..open].trim_end(),
            None => break,
        }
    }
    text.split(|c: char| !(c.is_alphabetic() || c == '\''))
        .map(|t| t.trim_matches('\'')).rfind(|t| t.chars().any(char::is_alphabetic))
        .map(str::to_lowercase)
        .ok_or_else(|| LexiconError::Extraction(phrase.to_string()))
}
