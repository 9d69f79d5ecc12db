use super::AnalysisError;
use crate::ingest::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

/// Per-side metrics and their harmonic-mean combination.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub liberal: Metrics,
    pub conservative: Metrics,
    pub combined: Metrics,
}

impl MetricsReport {
    pub fn new(liberal: Metrics, conservative: Metrics) -> Self {
        let h = harmonic_combine;
        Self {
            liberal,
            conservative,
            combined: Metrics {
                accuracy: h(liberal.accuracy, conservative.accuracy),
                macro_f1: h(liberal.macro_f1, conservative.macro_f1),
                micro_f1: h(liberal.micro_f1, conservative.micro_f1),
            },
        }
    }
}

/// `2ab / (a + b)`, and 0 when either side is 0.
pub fn harmonic_combine(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Accuracy, macro-F1 over the classes present in `golds`, and micro-F1
/// over pooled counts.
pub fn metrics(preds: &[usize], golds: &[usize]) -> Result<Metrics, AnalysisError> {
    if preds.len() != golds.len() {
        return Err(AnalysisError::Length(preds.len(), golds.len()));
    }
    if golds.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if let Some(&k) = preds.iter().chain(golds).find(|&&k| k >= NUM_CLASSES) {
        return Err(AnalysisError::Class(k));
    }
    let mut tp = [0usize; NUM_CLASSES];
    let mut fp = [0usize; NUM_CLASSES];
    let mut fn_ = [0usize; NUM_CLASSES];
    let mut present = [false; NUM_CLASSES];
    for (&p, &g) in preds.iter().zip(golds) {
        present[g] = true;
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let classes: Vec<usize> = (0..NUM_CLASSES).filter(|&k| present[k]).collect();
    let macro_f1 = classes
        .iter()
        .map(|&k| f1(tp[k], fp[k], fn_[k]))
        .sum::<f64>()
        / classes.len() as f64;
    let sum = |a: &[usize]| a.iter().sum::<usize>();
    let correct = sum(&tp);
    Ok(Metrics {
        accuracy: correct as f64 / golds.len() as f64,
        macro_f1,
        micro_f1: f1(correct, sum(&fp), sum(&fn_)),
    })
}
