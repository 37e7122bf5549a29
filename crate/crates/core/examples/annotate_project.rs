//! Predicts the missing annotations of a project and writes an annotated
//! copy. `Any` predictions are left out so the output only claims what was
//! inferred.
//!
//! ```text
//! cargo run --example annotate_project [PROJECT_DIR] [OUT_DIR]
//! ```

use std::path::PathBuf;

use pytypefill::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/propagation"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("pytypefill-annotated"));

    let project = load_project(&root)?;
    let graph = build_usage_graph(&project);
    let plan = make_plan(&graph, Strategy::TwoPass, 0);
    let (m, _) = run_decoding(&project, &graph, &plan, &HeuristicPredictor, &AtomTokenizer, &DecodeConfig::default());
    let (annotated, report) = apply_assignment(&project, &m.without_any());
    for e in &report.errors {
        eprintln!("warning: {e}");
    }
    annotated.write_to(&out)?;
    println!("{} annotations written to {}", report.applied, out.display());
    for module in annotated.modules() {
        println!("# {}\n{}", module.path.display(), module.text);
    }
    Ok(())
}
