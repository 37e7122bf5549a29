//! Builds the usage graph of a project and prints its edges and the
//! usee-first visiting order.
//!
//! ```text
//! cargo run --example usage_graph [PROJECT_DIR]
//! ```

use std::path::PathBuf;

use pytypefill::{build_usage_graph, load_project, topological_order};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/fig1"));
    let project = load_project(&root)?;
    let graph = build_usage_graph(&project);

    println!("{} elements, {} edges", graph.nodes().len(), graph.edges().len());
    for edge in graph.edges() {
        println!(
            "  {:<40} uses {:<40} {:?} at {}:{}",
            edge.user.as_str(),
            edge.usee.as_str(),
            edge.certainty,
            edge.site.line,
            edge.site.column
        );
    }
    println!("usee-first order:");
    for (i, id) in topological_order(&graph).iter().enumerate() {
        println!("  {i:>3} {id}");
    }
    Ok(())
}
