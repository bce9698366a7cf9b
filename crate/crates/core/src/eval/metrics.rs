use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts with the positive and negative classes exchanged.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

/// Counts with positive = offensive.
pub fn confusion(predictions: &[Label], labels: &[Label]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions to evaluate"));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, l) in predictions.iter().zip(labels) {
        match (p.is_positive(), l.is_positive()) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_positive: f64,
    pub f1_macro: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn class_f1(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let p = ratio(cm.tp, cm.tp + cm.fp);
    let r = ratio(cm.tp, cm.tp + cm.fn_);
    (p, r, f1(p, r))
}

/// Zero denominators yield 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let (precision, recall, f1_positive) = class_f1(cm);
    let (_, _, f1_negative) = class_f1(&cm.swapped());
    Ok(MetricsReport {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1_positive,
        f1_macro: (f1_positive + f1_negative) / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::from_bool(b == 1)).collect()
    }

    #[test]
    fn hand_counted_fixture() {
        let cm = confusion(
            &labels(&[1, 1, 1, 1, 0, 0, 0, 0, 0, 0]),
            &labels(&[1, 1, 1, 0, 1, 1, 0, 0, 0, 0]),
        )
        .unwrap();
        assert_eq!(cm, ConfusionMatrix::new(3, 1, 2, 4));
        let m = metrics(&cm).unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1_positive - 2.0 / 3.0).abs() < 1e-12);
        let neg_f1 = 2.0 * (4.0 / 6.0) * 0.8 / (4.0 / 6.0 + 0.8);
        assert!((m.f1_macro - (2.0 / 3.0 + neg_f1) / 2.0).abs() < 1e-12);
        assert!((m.f1_macro - 0.6970).abs() < 1e-4);
    }

    #[test]
    fn degenerate_cases() {
        let all_pos = labels(&[1, 1, 1]);
        let all_neg = labels(&[0, 0, 0]);
        let cm = confusion(&all_neg, &all_pos).unwrap();
        assert_eq!((cm.tp, cm.tn), (0, 0));
        let m = metrics(&cm).unwrap();
        assert_eq!(
            (m.precision, m.recall, m.f1_positive, m.f1_macro),
            (0.0, 0.0, 0.0, 0.0)
        );
        let perfect = metrics(&confusion(&all_pos, &all_pos).unwrap()).unwrap();
        assert_eq!(
            (
                perfect.accuracy,
                perfect.precision,
                perfect.recall,
                perfect.f1_positive
            ),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!(confusion(&all_pos, &all_pos[..2]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }
}
