//! Whole-project decoding: visit elements in a planned order, predict each
//! element's slots with the current assignment in context, and write the
//! predictions back.

mod plan;
mod trace;

pub use plan::{make_plan, DecodingPlan, Strategy, Visit};
pub use trace::{DecodeTrace, SlotChange, VisitRecord, VisitStatus, TRACE_SCHEMA_VERSION};

use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{Provenance, TypeAssignment};
use crate::context::{build_model_input, ContextConfig, ModelInput, Tokenizer};
use crate::graph::UsageGraph;
use crate::predictor::{DecodeParams, PredictError, PredictionRequest, PredictionResult, Predictor};
use crate::project::{ElementId, ProjectSource};
use crate::pytype::{adjust_for_comparison, normalize, PyType};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub context: ContextConfig,
    pub decode_params: DecodeParams,
    /// Keep each visit's model input in the trace.
    pub record_inputs: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { context: ContextConfig::default(), decode_params: DecodeParams::default(), record_inputs: false }
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Outcome of predicting one element against a fixed assignment.
pub enum ElementPrediction {
    /// Unknown element, or one without slots.
    Skipped,
    /// `result` is `None` when truncation left no marker in the main code.
    Done { input: ModelInput, result: Option<PredictionResult> },
    Failed { input: Option<ModelInput>, error: PredictError },
}

/// Builds the input for `id` from `assignment` and asks `predictor` for its
/// slots. A result with the wrong number of types is a protocol failure.
pub fn predict_element(
    project: &ProjectSource,
    graph: &UsageGraph,
    assignment: &TypeAssignment,
    id: &ElementId,
    predictor: &dyn Predictor,
    tokenizer: &dyn Tokenizer,
    config: &DecodeConfig,
) -> ElementPrediction {
    match project.element(id) {
        Some(e) if !e.slots.is_empty() => {}
        _ => return ElementPrediction::Skipped,
    }
    let input = match build_model_input(project, graph, assignment, id, tokenizer, &config.context) {
        Ok(input) => input,
        Err(e) => return ElementPrediction::Failed { input: None, error: PredictError::Protocol(e.to_string()) },
    };
    if input.marker_count == 0 {
        return ElementPrediction::Done { input, result: None };
    }
    let mut request = PredictionRequest::from_input(&input);
    request.decode_params = config.decode_params;
    match predictor.predict(&request) {
        Ok(result) if result.types.len() == input.marker_count => ElementPrediction::Done { input, result: Some(result) },
        Ok(result) => ElementPrediction::Failed {
            error: PredictError::Protocol(format!("{} types for {} markers", result.types.len(), input.marker_count)),
            input: Some(input),
        },
        Err(error) => ElementPrediction::Failed { input: Some(input), error },
    }
}

struct Engine<'a> {
    project: &'a ProjectSource,
    graph: &'a UsageGraph,
    predictor: &'a dyn Predictor,
    tokenizer: &'a dyn Tokenizer,
    config: &'a DecodeConfig,
}

impl Engine<'_> {
    fn predict(&self, m: &TypeAssignment, id: &ElementId) -> ElementPrediction {
        predict_element(self.project, self.graph, m, id, self.predictor, self.tokenizer, self.config)
    }

    /// Writes a prediction into `m` and returns the trace record.
    fn apply(&self, m: &mut TypeAssignment, step: usize, visit: &Visit, prediction: ElementPrediction) -> VisitRecord {
        let mut record = VisitRecord {
            step,
            pass: visit.pass,
            element: visit.element.clone(),
            status: VisitStatus::Predicted,
            token_counts: None,
            predicted: Vec::new(),
            diff: Vec::new(),
            diagnostics: Vec::new(),
            timestamp_ms: now_ms(),
            input: None,
        };
        let input = match prediction {
            ElementPrediction::Skipped => {
                record.status = VisitStatus::Skipped;
                None
            }
            ElementPrediction::Failed { input, error } => {
                log::warn!("visit of {} failed: {error}", visit.element);
                record.status = VisitStatus::Failed { retriable: error.is_retriable(), error: error.to_string() };
                input
            }
            ElementPrediction::Done { input, result } => {
                if let Some(result) = result {
                    for (&slot, ty) in input.slot_map.iter().zip(&result.types) {
                        record.predicted.push((slot, ty.clone()));
                        let before = m.get(&visit.element, slot).cloned();
                        if m.insert(visit.element.clone(), slot, ty, Provenance::Predicted)
                            && before.as_ref().map(|b| (&b.ty, b.provenance)) != Some((&normalize(ty), Provenance::Predicted))
                        {
                            record.diff.push(SlotChange {
                                slot,
                                before: before.map(|b| b.ty),
                                after: normalize(ty),
                                provenance: Provenance::Predicted,
                            });
                        }
                    }
                    record.diagnostics = result.diagnostics;
                }
                record.diagnostics.extend(input.warnings.iter().cloned());
                Some(input)
            }
        };
        if let Some(input) = input {
            record.token_counts = Some(input.token_counts);
            if self.config.record_inputs {
                record.input = Some(input);
            }
        }
        record
    }
}

/// Runs `plan` from an empty assignment.
pub fn run_decoding(
    project: &ProjectSource,
    graph: &UsageGraph,
    plan: &DecodingPlan,
    predictor: &dyn Predictor,
    tokenizer: &dyn Tokenizer,
    config: &DecodeConfig,
) -> (TypeAssignment, DecodeTrace) {
    run_decoding_from(project, graph, plan, predictor, tokenizer, config, TypeAssignment::new())
}

/// Runs `plan` starting from `initial`. User overrides in `initial` are
/// shown to the predictor and never replaced.
pub fn run_decoding_from(
    project: &ProjectSource,
    graph: &UsageGraph,
    plan: &DecodingPlan,
    predictor: &dyn Predictor,
    tokenizer: &dyn Tokenizer,
    config: &DecodeConfig,
    initial: TypeAssignment,
) -> (TypeAssignment, DecodeTrace) {
    let engine = Engine { project, graph, predictor, tokenizer, config };
    let mut m = initial;
    let mut trace = DecodeTrace::new();
    if plan.strategy == Strategy::Independent {
        let frozen = m.clone();
        let predictions: Vec<ElementPrediction> =
            plan.visit_schedule.par_iter().map(|v| engine.predict(&frozen, &v.element)).collect();
        for (step, (visit, p)) in plan.visit_schedule.iter().zip(predictions).enumerate() {
            trace.push(engine.apply(&mut m, step, visit, p));
        }
    } else {
        for (step, visit) in plan.visit_schedule.iter().enumerate() {
            let p = engine.predict(&m, &visit.element);
            trace.push(engine.apply(&mut m, step, visit, p));
        }
    }
    (m, trace)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidedStats {
    /// Slots where the oracle supplied a type.
    pub oracle_slots: usize,
    /// Predictions equal to the oracle type before the override.
    pub exact_matches: usize,
    /// Predictions equal to the oracle type after adjustment.
    pub adjusted_matches: usize,
}

impl GuidedStats {
    /// Percentage of oracle slots predicted exactly; 0 without oracle slots.
    pub fn agreement(&self) -> f64 {
        if self.oracle_slots == 0 {
            0.0
        } else {
            100.0 * self.exact_matches as f64 / self.oracle_slots as f64
        }
    }

    pub fn adjusted_agreement(&self) -> f64 {
        if self.oracle_slots == 0 {
            0.0
        } else {
            100.0 * self.adjusted_matches as f64 / self.oracle_slots as f64
        }
    }
}

/// One usee-to-user pass where, after each element is predicted, every slot
/// the oracle knows is overwritten with the oracle type before decoding
/// moves on.
pub fn run_user_guided(
    project: &ProjectSource,
    graph: &UsageGraph,
    predictor: &dyn Predictor,
    tokenizer: &dyn Tokenizer,
    config: &DecodeConfig,
    oracle: &dyn Fn(&ElementId, usize) -> Option<PyType>,
) -> (TypeAssignment, GuidedStats, DecodeTrace) {
    let engine = Engine { project, graph, predictor, tokenizer, config };
    let plan = make_plan(graph, Strategy::UseeToUser, 0);
    let mut m = TypeAssignment::new();
    let mut trace = DecodeTrace::new();
    let mut stats = GuidedStats::default();
    for (step, visit) in plan.visit_schedule.iter().enumerate() {
        let p = engine.predict(&m, &visit.element);
        let mut record = engine.apply(&mut m, step, visit, p);
        let Some(element) = project.element(&visit.element) else {
            trace.push(record);
            continue;
        };
        for slot in &element.slots {
            let Some(truth) = oracle(&element.id, slot.index) else { continue };
            let truth = normalize(&truth);
            stats.oracle_slots += 1;
            let predicted = record.predicted.iter().find(|(s, _)| *s == slot.index).map(|(_, t)| normalize(t));
            if predicted.as_ref() == Some(&truth) {
                stats.exact_matches += 1;
            }
            if predicted.as_ref().map(adjust_for_comparison) == Some(adjust_for_comparison(&truth)) {
                stats.adjusted_matches += 1;
            }
            let before = m.get(&element.id, slot.index).map(|a| a.ty.clone());
            m.insert(element.id.clone(), slot.index, &truth, Provenance::UserOverride);
            record.diff.push(SlotChange { slot: slot.index, before, after: truth, provenance: Provenance::UserOverride });
        }
        trace.push(record);
    }
    (m, stats, trace)
}
