//! Simulates a reviewer who corrects every prediction as decoding proceeds
//! and reports how often the predictor already agreed.
//!
//! ```text
//! cargo run --example user_guided [PROJECT_DIR]
//! ```

use std::path::PathBuf;

use pytypefill::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/fig1"));
    let labeled = load_project(&root)?;
    let gold = TypeAssignment::from_gold(&labeled);
    let project = labeled.preprocessed();
    let graph = build_usage_graph(&project);
    let oracle = |e: &ElementId, slot: usize| gold.type_of(e, slot).cloned();
    let (m, stats, trace) =
        run_user_guided(&project, &graph, &HeuristicPredictor, &AtomTokenizer, &DecodeConfig::default(), &oracle);
    for r in trace.records() {
        for c in &r.diff {
            println!("{:<40} #{} {} ({:?})", r.element.as_str(), c.slot, c.after, c.provenance);
        }
    }
    println!(
        "{} corrected slots; predictor agreed on {:.1}% exactly and {:.1}% after adjustment; {} types final",
        stats.oracle_slots,
        stats.agreement(),
        stats.adjusted_agreement(),
        m.len()
    );
    Ok(())
}
