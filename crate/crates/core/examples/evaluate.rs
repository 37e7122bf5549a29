//! Strips the annotations of a labeled project, predicts them back with
//! every decoding strategy, and scores the result against the originals.
//!
//! ```text
//! cargo run --example evaluate [PROJECT_DIR]
//! ```

use std::path::PathBuf;

use pytypefill::eval::dataset_stats;
use pytypefill::pytype::ConstructorFrequencyTable;
use pytypefill::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/fig1"));
    let labeled = load_project(&root)?;
    let gold = TypeAssignment::from_gold(&labeled);
    let freq = ConstructorFrequencyTable::from_labels(gold.iter().map(|(_, _, a)| &a.ty), 100);
    let stats = dataset_stats(&[&labeled], &freq);
    println!(
        "{} slots, {} labels, complex ratio {:.2}, average size {:.2}",
        stats.slots,
        stats.labels,
        stats.complex_ratio.unwrap_or(0.0),
        stats.average_size.unwrap_or(0.0)
    );

    let project = labeled.preprocessed();
    let graph = build_usage_graph(&project);
    for strategy in Strategy::ALL {
        let plan = make_plan(&graph, strategy, 0);
        let (m, _) = run_decoding(&project, &graph, &plan, &HeuristicPredictor, &AtomTokenizer, &DecodeConfig::default());
        let report = evaluate(&m, &gold, &freq);
        println!(
            "{:<12} full {:>6}  adjusted {:>6}  base {:>6}",
            strategy.to_string(),
            report.full.all.all.to_string(),
            report.adjusted.all.all.to_string(),
            report.base.all.all.to_string()
        );
    }
    let plan = make_plan(&graph, Strategy::TwoPass, 0);
    let (m, _) = run_decoding(&project, &graph, &plan, &HeuristicPredictor, &AtomTokenizer, &DecodeConfig::default());
    println!("\n{}", evaluate(&m, &gold, &freq).summary());
    Ok(())
}
