//! Type predictors: given a model input with `n` markers, return one type per
//! marker.

mod heuristic;
mod wire;

pub use heuristic::HeuristicPredictor;
pub use wire::{WireConfig, WirePredictor};

use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{marker, ModelInput};
use crate::pytype::{normalize, PyType};

pub const DEFAULT_BEAM_WIDTH: usize = 16;
pub const DEFAULT_DIVERSITY_PENALTY: f64 = 1.0;

/// Output length allowance for `n` markers.
pub fn default_max_output_tokens(n: usize) -> usize {
    16 * n + 10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub beam_width: usize,
    pub diversity_penalty: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams { beam_width: DEFAULT_BEAM_WIDTH, diversity_penalty: DEFAULT_DIVERSITY_PENALTY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRequest {
    pub preamble: String,
    pub usees: String,
    pub main_code: String,
    pub users: String,
    pub marker_count: usize,
    /// Index of the first marker in `main_code`.
    pub marker_base: usize,
    pub max_output_tokens: usize,
    pub decode_params: DecodeParams,
}

impl PredictionRequest {
    pub fn from_input(input: &ModelInput) -> Self {
        PredictionRequest {
            preamble: input.preamble.clone(),
            usees: input.usee_context.clone(),
            main_code: input.main_code.clone(),
            users: input.user_context.clone(),
            marker_count: input.marker_count,
            marker_base: input.marker_base,
            max_output_tokens: default_max_output_tokens(input.marker_count),
            decode_params: DecodeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Normalized, one per marker.
    pub types: Vec<PyType>,
    pub raw_output: String,
    pub latency: Duration,
    /// Markers that fell back to `Any`, with the reason.
    pub diagnostics: Vec<String>,
    /// Token count reported by the backend, when it has one.
    pub token_count: Option<usize>,
}

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl PredictError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, PredictError::Unreachable(_) | PredictError::Timeout(_))
    }
}

pub trait Predictor: Send + Sync {
    fn name(&self) -> &str;

    fn predict(&self, request: &PredictionRequest) -> Result<PredictionResult, PredictError>;
}

fn marker_regex() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<extra_id_(\d+)>").expect("valid regex"))
}

/// Splits marker-interleaved output into `n` types. Marker `base + i` holds
/// type `i`. Missing or unparseable fragments become `Any` with a
/// diagnostic; markers outside the range and repeated markers are ignored.
pub fn parse_raw_output(text: &str, n: usize, base: usize) -> (Vec<PyType>, Vec<String>) {
    let found: Vec<(usize, usize, usize)> = marker_regex()
        .captures_iter(text)
        .map(|c| {
            let m = c.get(0).expect("whole match");
            let index = c[1].parse::<usize>().unwrap_or(usize::MAX);
            (index, m.start(), m.end())
        })
        .collect();
    let mut fragments: Vec<Option<&str>> = vec![None; n];
    for (k, &(index, _, end)) in found.iter().enumerate() {
        let next = found.get(k + 1).map_or(text.len(), |f| f.1);
        let Some(i) = index.checked_sub(base).filter(|i| *i < n) else { continue };
        if fragments[i].is_none() {
            fragments[i] = Some(text[end..next].trim());
        }
    }
    let mut diagnostics = Vec::new();
    let types = fragments
        .into_iter()
        .enumerate()
        .map(|(i, fragment)| match fragment {
            None => {
                diagnostics.push(format!("{}: missing from output", marker(base + i)));
                PyType::any()
            }
            Some(f) => match PyType::parse(f) {
                Ok(t) => normalize(&t),
                Err(e) => {
                    diagnostics.push(format!("{}: unparseable `{f}`: {e}", marker(base + i)));
                    PyType::any()
                }
            },
        })
        .collect();
    (types, diagnostics)
}

/// Marker-interleaved text for `types`, as a backend would emit it.
pub fn format_raw_output(types: &[PyType], base: usize) -> String {
    types
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{} {t}", marker(base + i)))
        .collect::<Vec<_>>()
        .join(" ")
}
