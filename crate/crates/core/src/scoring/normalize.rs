use super::ScoringError;

/// Min-max normalization onto [0, 1]. A constant list maps to 0.5 everywhere.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>, ScoringError> {
    if values.is_empty() {
        return Err(ScoringError::Argument("cannot normalize an empty list".into()));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(ScoringError::Argument(format!("non-finite value {bad}")));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.5; values.len()]);
    }
    let range = max - min;
    if range.is_finite() {
        Ok(values.iter().map(|v| (v - min) / range).collect())
    } else {
        // Span overflows f64; halve everything first.
        let (lo, span) = (min / 2.0, max / 2.0 - min / 2.0);
        Ok(values.iter().map(|v| ((v / 2.0 - lo) / span).clamp(0.0, 1.0)).collect())
    }
}
