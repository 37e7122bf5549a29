//! Accuracy metrics, dataset statistics, and type-checker coherence counts.
//!
//! Three metrics compare a prediction with a gold label:
//!
//! - full: equality after normalization, over every gold label;
//! - adjusted: equality after [`adjust_for_comparison`], over gold labels
//!   other than `None` and `Any`;
//! - base: equality of the outermost constructor of the adjusted forms,
//!   over the same labels as adjusted.
//!
//! Each metric is broken down by the category of the gold label.

mod coherence;
mod stats;

pub use coherence::{
    coherence_errors, coherence_errors_many, coherence_of_assignment, parse_checker_output, CheckerConfig,
    CoherenceReport, COHERENCE_SCHEMA_VERSION, COUNTED_CODES,
};
pub use stats::{dataset_stats, DatasetStats};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assignment::TypeAssignment;
use crate::pytype::{adjust_for_comparison, base_head, categorize, ConstructorFrequencyTable, Frequency, PyType, Shape};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    /// Percentage in [0, 100]; `None` when there are no labels.
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.correct as f64 / self.total as f64)
    }

    fn record(&mut self, ok: bool) {
        self.total += 1;
        self.correct += usize::from(ok);
    }
}

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.percent() {
            Some(p) => write!(f, "{p:.2}"),
            None => f.write_str("n/a"),
        }
    }
}

/// One frequency class split by shape.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakdown {
    pub all: Accuracy,
    pub simple: Accuracy,
    pub complex: Accuracy,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricReport {
    pub all: Breakdown,
    pub common: Breakdown,
    pub rare: Breakdown,
}

impl MetricReport {
    fn record(&mut self, shape: Shape, frequency: Frequency, ok: bool) {
        let class = match frequency {
            Frequency::Common => &mut self.common,
            Frequency::Rare => &mut self.rare,
        };
        for b in [&mut self.all, class] {
            b.all.record(ok);
            match shape {
                Shape::Simple => b.simple.record(ok),
                Shape::Complex => b.complex.record(ok),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub full: MetricReport,
    pub adjusted: MetricReport,
    pub base: MetricReport,
    /// Gold labels (the full-accuracy denominator).
    pub label_count: usize,
    /// Gold labels normalizing to `None` or `Any`.
    pub filtered_labels: usize,
    /// Gold labels with no prediction; counted as wrong.
    pub missing_predictions: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text summary table.
    pub fn summary(&self) -> String {
        let mut out = String::from("metric    class   all     simple  complex\n");
        for (name, m) in [("full", &self.full), ("adjusted", &self.adjusted), ("base", &self.base)] {
            for (class, b) in [("all", &m.all), ("common", &m.common), ("rare", &m.rare)] {
                out.push_str(&format!(
                    "{name:<9} {class:<7} {:<7} {:<7} {}\n",
                    b.all.to_string(),
                    b.simple.to_string(),
                    b.complex.to_string()
                ));
            }
        }
        out.push_str(&format!(
            "labels: {}, filtered (None/Any): {}, missing predictions: {}\n",
            self.label_count, self.filtered_labels, self.missing_predictions
        ));
        out
    }
}

fn excluded_from_adjusted(gold: &PyType) -> bool {
    gold.is_none() || gold.is_any()
}

/// Scores `predictions` against every entry of `gold`.
pub fn evaluate(predictions: &TypeAssignment, gold: &TypeAssignment, freq: &ConstructorFrequencyTable) -> EvalReport {
    let mut report = EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        full: MetricReport::default(),
        adjusted: MetricReport::default(),
        base: MetricReport::default(),
        label_count: 0,
        filtered_labels: 0,
        missing_predictions: 0,
    };
    for (id, slot, label) in gold.iter() {
        let truth = &label.ty;
        let category = categorize(truth, freq);
        let predicted = predictions.type_of(id, slot);
        report.label_count += 1;
        if predicted.is_none() {
            report.missing_predictions += 1;
        }
        report.full.record(category.shape, category.frequency, predicted == Some(truth));
        if excluded_from_adjusted(truth) {
            report.filtered_labels += 1;
            continue;
        }
        let gold_adjusted = adjust_for_comparison(truth);
        let pred_adjusted = predicted.map(adjust_for_comparison);
        let adjusted_ok = pred_adjusted.as_ref() == Some(&gold_adjusted);
        let base_ok = pred_adjusted.as_ref().is_some_and(|p| base_head(p) == base_head(&gold_adjusted));
        report.adjusted.record(category.shape, category.frequency, adjusted_ok);
        report.base.record(category.shape, category.frequency, base_ok);
    }
    report
}
