//! Classification metrics.

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::neural::{LossTarget, Prediction};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    /// Fraction of correct rows; exact-match for multi-label.
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassStats>,
    pub multi_label: bool,
}

impl EvalResult {
    /// The quantity model selection maximizes: micro-F1 for multi-label
    /// tasks, accuracy otherwise.
    pub fn selection_metric(&self) -> f64 {
        if self.multi_label {
            self.micro_f1
        } else {
            self.accuracy
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn f1(c: Counts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * c.tp as f64 / denom as f64
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Macro-F1 averages over classes that occur in the truth or the
/// predictions; classes absent from both are skipped.
fn summarize(counts: &[Counts], present: &BTreeSet<usize>, accuracy: f64, multi_label: bool) -> EvalResult {
    let pooled = counts.iter().fold(Counts::default(), |a, c| Counts {
        tp: a.tp + c.tp,
        fp: a.fp + c.fp,
        fn_: a.fn_ + c.fn_,
    });
    let macro_f1 = if present.is_empty() {
        0.0
    } else {
        present.iter().map(|&k| f1(counts[k])).sum::<f64>() / present.len() as f64
    };
    let per_class = counts
        .iter()
        .map(|&c| ClassStats {
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            f1: f1(c),
            support: c.tp + c.fn_,
        })
        .collect();
    EvalResult { accuracy, micro_f1: f1(pooled), macro_f1, per_class, multi_label }
}

pub fn evaluate_single(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<EvalResult> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    if let Some(bad) = pred.iter().chain(truth).find(|&&c| c >= num_classes) {
        return Err(Error::Shape(format!("class {bad} out of range for {num_classes} classes")));
    }
    let mut counts = vec![Counts::default(); num_classes];
    let mut correct = 0;
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            counts[p].tp += 1;
            correct += 1;
        } else {
            counts[p].fp += 1;
            counts[t].fn_ += 1;
        }
    }
    let present = pred.iter().chain(truth).copied().collect();
    Ok(summarize(&counts, &present, ratio(correct, truth.len()), false))
}

pub fn evaluate_multi(pred: &Array2<bool>, truth: &Array2<bool>) -> Result<EvalResult> {
    if pred.dim() != truth.dim() {
        return Err(Error::Shape(format!("predictions {:?} vs labels {:?}", pred.dim(), truth.dim())));
    }
    let mut counts = vec![Counts::default(); truth.ncols()];
    let mut present = BTreeSet::new();
    let mut exact = 0;
    for (p, t) in pred.rows().into_iter().zip(truth.rows()) {
        if p == t {
            exact += 1;
        }
        for (k, (&pk, &tk)) in p.iter().zip(t.iter()).enumerate() {
            if pk || tk {
                present.insert(k);
            }
            match (pk, tk) {
                (true, true) => counts[k].tp += 1,
                (true, false) => counts[k].fp += 1,
                (false, true) => counts[k].fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(summarize(&counts, &present, ratio(exact, truth.nrows()), true))
}

/// Scores hard predictions against the targets they were made for.
pub fn evaluate(pred: &Prediction, target: &LossTarget) -> Result<EvalResult> {
    match (pred, target) {
        (Prediction::Classes(p), LossTarget::Classes { classes, num_classes }) => {
            evaluate_single(p, classes, *num_classes)
        }
        (Prediction::Bits(p), LossTarget::MultiHot(t)) => evaluate_multi(p, &t.mapv(|v| v > 0.5)),
        _ => Err(Error::Shape("prediction kind does not match label kind".into())),
    }
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
