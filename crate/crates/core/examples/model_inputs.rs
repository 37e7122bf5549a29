//! Shows the four context segments the predictor sees for one element,
//! first with empty types and then after a usee has been typed, and how a
//! tight budget cuts them.
//!
//! ```text
//! cargo run --example model_inputs
//! ```

use pytypefill::context::Kept;
use pytypefill::*;

fn show(title: &str, input: &ModelInput) {
    println!("==== {title}");
    println!("-- preamble\n{}", input.preamble);
    println!("-- usees\n{}", input.usee_context);
    println!("-- main ({} markers, slots {:?})\n{}", input.marker_count, input.slot_map, input.main_code);
    println!("-- users\n{}", input.user_context);
    let c = &input.token_counts;
    println!("-- tokens: preamble {} usees {} main {} users {} total {}", c.preamble, c.usees, c.main, c.users, c.total);
    for item in input.usee_items.iter().chain(&input.user_items) {
        if item.kept != Kept::Full {
            println!("   {} ({:?}) {:?}", item.element, item.certainty, item.kept);
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/fig1");
    let project = load_project(&root)?.preprocessed();
    let graph = build_usage_graph(&project);
    let target = ElementId::from("model.ModelWrapper.predict");

    let mut m = TypeAssignment::new();
    let input = build_model_input(&project, &graph, &m, &target, &AtomTokenizer, &ContextConfig::default())?;
    show("untyped", &input);

    let batch = ElementId::from("model.ModelWrapper.predict_on_batch");
    m.insert(batch, 0, &PyType::parse("ChunkedDataset")?, Provenance::Predicted);
    let input = build_model_input(&project, &graph, &m, &target, &AtomTokenizer, &ContextConfig::default())?;
    show("after typing predict_on_batch(batch)", &input);

    let tight = ContextConfig {
        budgets: Budgets { preamble: 4, usees: 10, main: 64, users: 12, total: 90 },
        ..ContextConfig::default()
    };
    tight.budgets.validate()?;
    let input = build_model_input(&project, &graph, &m, &target, &AtomTokenizer, &tight)?;
    show("tight budgets", &input);
    assert!(input.budget_violations(&tight.budgets).is_empty());
    Ok(())
}
