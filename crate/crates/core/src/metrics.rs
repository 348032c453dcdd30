//! Confusion matrix, precision/recall/F1 and the malpractice classification
//! error (MCE). Class 1 (malpractice) is the positive class throughout.
//!
//! Metrics with an undefined denominator are surfaced as `None` and printed
//! as "n/a"; they are never silently coerced to zero because the grid search
//! ranks candidates by these values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label vectors have different lengths ({true_len} vs {pred_len})")]
    LengthMismatch { true_len: usize, pred_len: usize },
    #[error("empty label vectors")]
    Empty,
    #[error("label {0} outside {{0,1}}")]
    InvalidLabel(u8),
}

/// Binary confusion matrix with malpractice (label 1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Confusion matrix with the class roles swapped (class 0 as positive).
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            true_len: y_true.len(),
            pred_len: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t > 1 {
            return Err(MetricsError::InvalidLabel(t));
        }
        if p > 1 {
            return Err(MetricsError::InvalidLabel(p));
        }
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            _ => unreachable!(),
        }
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

pub fn precision(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.tp, cm.tp + cm.fp)
}

pub fn recall(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.tp, cm.tp + cm.fn_)
}

pub fn f1(cm: &ConfusionMatrix) -> Option<f64> {
    let p = precision(cm)?;
    let r = recall(cm)?;
    if p + r == 0.0 {
        None
    } else {
        Some(2.0 * p * r / (p + r))
    }
}

/// Fraction of true malpractice calls predicted non-malpractice: FN/(TP+FN).
pub fn mce(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.fn_, cm.tp + cm.fn_)
}

/// Averaging convention for two-class metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Average {
    /// Treat the named class as positive.
    PerClass(u8),
    /// Unweighted mean over both classes.
    Macro,
    /// Support-weighted mean over both classes.
    Weighted,
}

type Metric = fn(&ConfusionMatrix) -> Option<f64>;

fn averaged(
    y_true: &[u8],
    y_pred: &[u8],
    mode: Average,
    metric: Metric,
) -> Result<Option<f64>, MetricsError> {
    let cm = confusion(y_true, y_pred)?;
    let per = |class: u8| -> Option<f64> {
        let m = if class == 1 { cm } else { cm.swapped() };
        // A class absent from y_true leaves its metric undefined even when
        // the raw denominator happens to be non-zero (e.g. precision).
        let support = m.tp + m.fn_;
        if support == 0 {
            None
        } else {
            metric(&m)
        }
    };
    Ok(match mode {
        Average::PerClass(class) => {
            if class > 1 {
                return Err(MetricsError::InvalidLabel(class));
            }
            per(class)
        }
        Average::Macro => match (per(0), per(1)) {
            (Some(a), Some(b)) => Some(0.5 * (a + b)),
            _ => None,
        },
        Average::Weighted => {
            let n = cm.total() as f64;
            let s0 = (cm.tn + cm.fp) as f64;
            let s1 = (cm.tp + cm.fn_) as f64;
            match (per(0), per(1)) {
                (Some(a), Some(b)) => Some((s0 * a + s1 * b) / n),
                _ => None,
            }
        }
    })
}

pub fn averaged_recall(
    y_true: &[u8],
    y_pred: &[u8],
    mode: Average,
) -> Result<Option<f64>, MetricsError> {
    averaged(y_true, y_pred, mode, recall)
}

pub fn averaged_precision(
    y_true: &[u8],
    y_pred: &[u8],
    mode: Average,
) -> Result<Option<f64>, MetricsError> {
    averaged(y_true, y_pred, mode, precision)
}

pub fn averaged_f1(
    y_true: &[u8],
    y_pred: &[u8],
    mode: Average,
) -> Result<Option<f64>, MetricsError> {
    averaged(y_true, y_pred, mode, f1)
}

/// Per-class, macro and weighted values of one metric, `None` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub pos: Option<f64>,
    pub neg: Option<f64>,
    #[serde(rename = "macro")]
    pub macro_: Option<f64>,
    pub weighted: Option<f64>,
}

/// The full metrics block embedded in evaluation and search reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub precision: MetricBlock,
    pub recall: MetricBlock,
    pub f1: MetricBlock,
    pub mce: Option<f64>,
}

impl MetricsReport {
    pub fn compute(y_true: &[u8], y_pred: &[u8]) -> Result<MetricsReport, MetricsError> {
        let cm = confusion(y_true, y_pred)?;
        let block = |metric: Metric| -> Result<MetricBlock, MetricsError> {
            Ok(MetricBlock {
                pos: averaged(y_true, y_pred, Average::PerClass(1), metric)?,
                neg: averaged(y_true, y_pred, Average::PerClass(0), metric)?,
                macro_: averaged(y_true, y_pred, Average::Macro, metric)?,
                weighted: averaged(y_true, y_pred, Average::Weighted, metric)?,
            })
        };
        Ok(MetricsReport {
            confusion: cm,
            precision: block(precision)?,
            recall: block(recall)?,
            f1: block(f1)?,
            mce: mce(&cm),
        })
    }

    /// Look up the value of a named selection metric.
    pub fn select(&self, metric: SelectionMetric) -> Option<f64> {
        match metric {
            SelectionMetric::WeightedRecall => self.recall.weighted,
            SelectionMetric::MacroRecall => self.recall.macro_,
            SelectionMetric::PositiveRecall => self.recall.pos,
            SelectionMetric::WeightedF1 => self.f1.weighted,
        }
    }
}

/// Metric the grid search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    WeightedRecall,
    MacroRecall,
    PositiveRecall,
    WeightedF1,
}

/// "n/a" formatting for undefined metrics in text reports.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "n/a".to_string(),
    }
}
