//! Evaluation machinery: information gain, a random forest over binary
//! features, stratified cross-validation, dataset balancing, and the
//! duplicate-inflation demonstration.
//!
//! Malware is the positive class throughout. Fold results are pooled into a
//! single confusion matrix before metrics are computed (not averaged per
//! fold), and every report states the protocol and seed it came from.

pub mod balance;
pub mod forest;
pub mod infogain;
pub mod inflation;
pub mod kfold;

pub use balance::balance_dataset;
pub use forest::{Forest, ForestConfig};
pub use infogain::{information_gain, InfoGainReport};
pub use inflation::{holdout_inflation_demo, InflationOutcome};
pub use kfold::{holdout_evaluate, kfold_evaluate, stratified_folds};

use serde::{Deserialize, Serialize};

use crate::fingerprint::Label;

/// Counts with malware as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, actual: Label, predicted: Label) {
        match (actual, predicted) {
            (Label::Malware, Label::Malware) => self.tp += 1,
            (Label::Goodware, Label::Malware) => self.fp += 1,
            (Label::Goodware, Label::Goodware) => self.tn += 1,
            (Label::Malware, Label::Goodware) => self.fn_ += 1,
            _ => panic!("evaluation requires labeled rows"),
        }
    }

    pub fn add(&mut self, other: Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Derives the five reported metrics. Ratios with an empty denominator
    /// are defined as 0.
    pub fn metrics(&self) -> Metrics {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let tpr = ratio(self.tp, self.tp + self.fn_);
        let fpr = ratio(self.fp, self.fp + self.tn);
        let accuracy = ratio(self.tp + self.tn, self.total());
        let precision = ratio(self.tp, self.tp + self.fp);
        let f1 = if precision + tpr == 0.0 {
            0.0
        } else {
            2.0 * precision * tpr / (precision + tpr)
        };
        Metrics {
            tpr,
            fpr,
            accuracy,
            precision,
            f1,
        }
    }
}

/// TPR, FPR, Accuracy, Precision and F1, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tpr: f64,
    pub fpr: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub f1: f64,
}

/// The evaluation protocol a report came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    KFold { k: usize },
    Holdout { train_ratio: f64 },
}

/// One experiment's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub seed: u64,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

impl EvalReport {
    pub fn new(protocol: Protocol, seed: u64, confusion: Confusion) -> EvalReport {
        EvalReport {
            protocol,
            seed,
            confusion,
            metrics: confusion.metrics(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_confusion_fixture() {
        let c = Confusion {
            tp: 9,
            fn_: 1,
            fp: 1,
            tn: 9,
        };
        let m = c.metrics();
        assert_eq!(m.tpr, 0.9);
        assert_eq!(m.fpr, 0.1);
        assert_eq!(m.accuracy, 0.9);
        assert_eq!(m.precision, 0.9);
        assert_eq!(m.f1, 0.9);
    }

    #[test]
    fn empty_denominators_collapse_to_zero() {
        let c = Confusion {
            tp: 0,
            fn_: 0,
            fp: 0,
            tn: 5,
        };
        let m = c.metrics();
        assert_eq!(m.tpr, 0.0);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn metrics_recompute_from_confusion() {
        let c = Confusion {
            tp: 13,
            fn_: 4,
            fp: 2,
            tn: 31,
        };
        let report = EvalReport::new(Protocol::KFold { k: 10 }, 7, c);
        assert_eq!(report.metrics, report.confusion.metrics());
    }
}
