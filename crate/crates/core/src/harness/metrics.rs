use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Accuracy and macro-F1 of `(predicted, true)` pairs over `classes`
/// classes. A class with zero precision and recall scores F1 = 0, and every
/// class counts in the mean.
pub fn score_pairs(pairs: &[(usize, usize)], classes: usize) -> Result<Scores> {
    if pairs.is_empty() {
        return Err(Error::Argument("cannot score an empty mask".into()));
    }
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    let mut correct = 0;
    for &(pred, truth) in pairs {
        if pred >= classes || truth >= classes {
            return Err(Error::Argument(format!("class index outside 0..{classes}")));
        }
        if pred == truth {
            correct += 1;
            tp[pred] += 1;
        } else {
            fp[pred] += 1;
            fn_[truth] += 1;
        }
    }
    let f1_sum: f64 = (0..classes)
        .map(|c| {
            let precision = if tp[c] + fp[c] > 0 {
                tp[c] as f64 / (tp[c] + fp[c]) as f64
            } else {
                0.0
            };
            let recall = if tp[c] + fn_[c] > 0 {
                tp[c] as f64 / (tp[c] + fn_[c]) as f64
            } else {
                0.0
            };
            if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            }
        })
        .sum();
    Ok(Scores {
        accuracy: correct as f64 / pairs.len() as f64,
        macro_f1: f1_sum / classes as f64,
    })
}

/// Scores the arg-max predictions of `probs` on the masked nodes.
pub fn evaluate(probs: &DenseMatrix, labels: &[Option<usize>], mask: &[usize]) -> Result<Scores> {
    let pairs = mask
        .iter()
        .map(|&i| {
            let truth = labels
                .get(i)
                .copied()
                .flatten()
                .ok_or_else(|| Error::Argument(format!("node {i} in mask has no label")))?;
            Ok((argmax(probs.row(i)), truth))
        })
        .collect::<Result<Vec<_>>>()?;
    score_pairs(&pairs, probs.n_cols())
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for a single
/// value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let s = score_pairs(&[(0, 0), (1, 1), (2, 2), (1, 1)], 3).unwrap();
        assert_eq!((s.accuracy, s.macro_f1), (1.0, 1.0));
    }

    #[test]
    fn one_of_each_outcome() {
        // class 1 positive: TP (1,1), FN (0,1), TN (0,0), FP (1,0)
        let s = score_pairs(&[(1, 1), (0, 1), (0, 0), (1, 0)], 2).unwrap();
        assert_eq!(s.accuracy, 0.5);
        assert!((s.macro_f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_predictor() {
        let s = score_pairs(&[(0, 0), (0, 0), (0, 1), (0, 1)], 2).unwrap();
        assert_eq!(s.accuracy, 0.5);
        assert!((s.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_is_rejected() {
        assert!(matches!(score_pairs(&[], 2), Err(Error::Argument(_))));
        let p = DenseMatrix::filled(2, 2, 0.5);
        assert!(evaluate(&p, &[Some(0), None], &[1]).is_err());
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
        let (m, s) = mean_std(&[0.80, 0.84]);
        assert!((m - 0.82).abs() < 1e-12);
        assert!((s - 0.028284271247461926).abs() < 1e-12);
    }
}
