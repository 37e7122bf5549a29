//! Project-scale type annotation inference for Python.
//!
//! The pipeline: load a project ([`project`]), build its usage graph
//! ([`graph`]), assemble four-segment model inputs ([`context`]), query a
//! type predictor ([`predictor`]) while threading a [`TypeAssignment`]
//! through an iterative decoding schedule ([`decoder`]), then write the
//! types back or score them ([`eval`]).

pub mod assignment;
pub mod context;
pub mod decoder;
pub mod eval;
pub mod graph;
pub mod predictor;
pub mod project;
pub mod pytype;

pub use assignment::{AssignedType, Provenance, TypeAssignment};
pub use context::{build_model_input, AtomTokenizer, Budgets, ContextConfig, ModelInput, Tokenizer};
pub use decoder::{
    make_plan, predict_element, run_decoding, run_decoding_from, run_user_guided, DecodeConfig, DecodeTrace, DecodingPlan,
    ElementPrediction, Strategy,
};
pub use eval::{evaluate, EvalReport};
pub use graph::{build_usage_graph, topological_order, Certainty, UsageGraph};
pub use predictor::{HeuristicPredictor, PredictionRequest, PredictionResult, Predictor, WireConfig, WirePredictor};
pub use project::{apply_assignment, load_project, CodeElement, ElementId, ProjectSource};
pub use pytype::{normalize, PyType};
