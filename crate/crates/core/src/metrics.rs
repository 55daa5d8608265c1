//! Binary classification scores with `Positive` as the positive class, and
//! multi-seed summaries of them.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Result, VidError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(preds: &[Label], golds: &[Label]) -> Result<ConfusionCounts> {
    if preds.len() != golds.len() {
        return Err(VidError::Dimension {
            op: "confusion",
            left: vec![preds.len()],
            right: vec![golds.len()],
        });
    }
    if preds.is_empty() {
        return Err(VidError::Empty("no predictions to score".into()));
    }
    let mut c = ConfusionCounts::default();
    for (p, g) in preds.iter().zip(golds) {
        match (p, g) {
            (Label::Positive, Label::Positive) => c.tp += 1,
            (Label::Positive, Label::Negative) => c.fp += 1,
            (Label::Negative, Label::Negative) => c.tn += 1,
            (Label::Negative, Label::Positive) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall and F1; any `0/0` is reported as 0.
pub fn prf1(c: &ConfusionCounts) -> Prf1 {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    Prf1 {
        precision,
        recall,
        f1: f1_from(precision, recall),
    }
}

pub fn score(preds: &[Label], golds: &[Label]) -> Result<Prf1> {
    Ok(prf1(&confusion(preds, golds)?))
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-seed scores of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRuns {
    pub method: String,
    pub runs: Vec<Prf1>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    pub per_seed: Vec<Prf1>,
}

/// Aggregated multi-seed comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

fn summarize(values: impl Iterator<Item = f64>) -> Summary {
    let v: Vec<f64> = values.collect();
    let (mean, sd) = mean_sd(&v);
    Summary { mean, sd }
}

/// One row per method in the given order, with mean ± sd over seeds.
pub fn compare_runs(methods: &[MethodRuns]) -> Result<Report> {
    let rows = methods
        .iter()
        .map(|m| {
            if m.runs.is_empty() {
                return Err(VidError::Empty(format!("method {} has no runs", m.method)));
            }
            Ok(ReportRow {
                method: m.method.clone(),
                precision: summarize(m.runs.iter().map(|r| r.precision)),
                recall: summarize(m.runs.iter().map(|r| r.recall)),
                f1: summarize(m.runs.iter().map(|r| r.f1)),
                per_seed: m.runs.clone(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Report { rows })
}

impl Report {
    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Tab-separated table; values are `mean±sd` with three decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\tprecision\trecall\tf1\n");
        for r in &self.rows {
            let cell = |s: &Summary| format!("{:.3}±{:.3}", s.mean, s.sd);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.method,
                cell(&r.precision),
                cell(&r.recall),
                cell(&r.f1)
            ));
        }
        out
    }
}
