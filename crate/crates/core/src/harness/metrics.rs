//! Precision and recall with explicit undefined outcomes.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone, Copy)]
pub enum MetricError {
    /// Precision over an empty result list is undefined.
    #[error("no documents were retrieved")]
    NoResults,
    /// Recall with nothing relevant to find is undefined.
    #[error("there are no relevant documents")]
    NoRelevant,
    #[error("numerator {numerator} exceeds denominator {denominator}")]
    Inconsistent { numerator: usize, denominator: usize },
}

pub fn precision(relevant_retrieved: usize, retrieved: usize) -> Result<f64, MetricError> {
    if retrieved == 0 {
        return Err(MetricError::NoResults);
    }
    if relevant_retrieved > retrieved {
        return Err(MetricError::Inconsistent {
            numerator: relevant_retrieved,
            denominator: retrieved,
        });
    }
    Ok(relevant_retrieved as f64 / retrieved as f64)
}

pub fn recall(relevant_retrieved: usize, total_relevant: usize) -> Result<f64, MetricError> {
    if total_relevant == 0 {
        return Err(MetricError::NoRelevant);
    }
    if relevant_retrieved > total_relevant {
        return Err(MetricError::Inconsistent {
            numerator: relevant_retrieved,
            denominator: total_relevant,
        });
    }
    Ok(relevant_retrieved as f64 / total_relevant as f64)
}

/// Median of a non-empty slice; mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_examples() {
        assert_eq!(precision(53, 106), Ok(0.5));
        assert_eq!(precision(7, 7), Ok(1.0));
        assert_eq!(precision(17, 68), Ok(0.25));
        assert_eq!(precision(0, 0), Err(MetricError::NoResults));
        assert!(matches!(precision(5, 4), Err(MetricError::Inconsistent { .. })));
    }

    #[test]
    fn recall_examples() {
        assert_eq!(recall(0, 40), Ok(0.0));
        assert_eq!(recall(40, 40), Ok(1.0));
        assert!((recall(53, 60).unwrap() - 0.883_333_333_333_333_3).abs() < 1e-15);
        assert_eq!(recall(0, 0), Err(MetricError::NoRelevant));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
