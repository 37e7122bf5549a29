//! Counts type-checker errors for a decoded project, which measures whether
//! the predicted types are consistent with each other. Needs `mypy` on the
//! PATH (or a command in PYTYPEFILL_CHECKER); without it the report says so.
//!
//! ```text
//! cargo run --example coherence_check [PROJECT_DIR]
//! ```

use std::path::PathBuf;

use pytypefill::eval::{coherence_of_assignment, CheckerConfig};
use pytypefill::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/fig1"));
    let checker = std::env::var("PYTYPEFILL_CHECKER")
        .ok()
        .and_then(|c| CheckerConfig::from_command_line(&c))
        .unwrap_or_default();

    let project = load_project(&root)?.preprocessed();
    let graph = build_usage_graph(&project);
    for strategy in [Strategy::Independent, Strategy::TwoPass] {
        let plan = make_plan(&graph, strategy, 0);
        let (m, _) = run_decoding(&project, &graph, &plan, &HeuristicPredictor, &AtomTokenizer, &DecodeConfig::default());
        let report = coherence_of_assignment(&project, &m.without_any(), &checker);
        if !report.available {
            println!("{strategy}: checker unavailable ({})", report.reason.unwrap_or_default());
            continue;
        }
        println!("{strategy}: {} errors {:?}", report.total, report.per_code);
    }
    Ok(())
}
