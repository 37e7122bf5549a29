//! Runs whole-project decoding with the built-in heuristic predictor and
//! prints each visit of the trace.
//!
//! ```text
//! cargo run --example decode_project [STRATEGY] [PROJECT_DIR]
//! ```
//!
//! STRATEGY is one of independent, random, usertousee, useetouser,
//! twopass (default).

use std::path::PathBuf;

use pytypefill::decoder::VisitStatus;
use pytypefill::project::SlotRole;
use pytypefill::pytype::annotation_source;
use pytypefill::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let strategy: Strategy = args.next().as_deref().unwrap_or("twopass").parse()?;
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/fig1"));
    let project = load_project(&root)?.preprocessed();
    let graph = build_usage_graph(&project);
    let plan = make_plan(&graph, strategy, 0);
    let (m, trace) = run_decoding(&project, &graph, &plan, &HeuristicPredictor, &AtomTokenizer, &DecodeConfig::default());

    println!("strategy {strategy}: {} visits, {} failures", trace.len(), trace.failures());
    for r in trace.records() {
        let status = match &r.status {
            VisitStatus::Predicted => "ok".to_string(),
            VisitStatus::Skipped => "skipped".to_string(),
            VisitStatus::Failed { error, .. } => format!("failed: {error}"),
        };
        let changes: Vec<String> =
            r.diff.iter().map(|c| format!("#{} {} -> {}", c.slot, c.before.as_ref().map_or("_".into(), ToString::to_string), c.after)).collect();
        println!("  [{}] pass {} {:<40} {status} {}", r.step, r.pass, r.element.as_str(), changes.join(", "));
    }
    println!("final assignment:");
    for e in project.elements() {
        let types: Vec<String> = e
            .slots
            .iter()
            .map(|s| {
                let t = m.type_of(&e.id, s.index).map_or("?".into(), annotation_source);
                match &s.role {
                    SlotRole::Parameter { name, .. } => format!("{name}: {t}"),
                    SlotRole::Return => format!("-> {t}"),
                    SlotRole::Variable => format!(": {t}"),
                }
            })
            .collect();
        println!("  {:<40} {}", e.id.as_str(), types.join(", "));
    }
    Ok(())
}
