//! Normal forms of type annotations and how the three accuracy metrics
//! judge a few prediction/label pairs.
//!
//! ```text
//! cargo run --example type_metrics
//! ```

use pytypefill::pytype::{adjust_for_comparison, annotation_source, ConstructorFrequencyTable};
use pytypefill::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for text in ["Optional[int]", "list[Any]", "Union[str, Union[None, int]]", "int | None", "dict[str, list[int]]"] {
        let t = normalize(&PyType::parse(text)?);
        println!("{text:<32} normal {t:<28} adjusted {:<14} source {}", adjust_for_comparison(&t), annotation_source(&t));
    }

    let pairs = [
        ("Optional[int]", "int"),
        ("torch.Tensor", "Tensor"),
        ("Dict[str, List[int]]", "Dict[str, Any]"),
        ("List[Any]", "list"),
        ("None", "None"),
    ];
    let mut gold = TypeAssignment::new();
    let mut pred = TypeAssignment::new();
    let id = ElementId::from("demo.f");
    for (i, (g, p)) in pairs.iter().enumerate() {
        gold.insert(id.clone(), i, &PyType::parse(g)?, Provenance::Gold);
        pred.insert(id.clone(), i, &PyType::parse(p)?, Provenance::Predicted);
    }
    let freq = ConstructorFrequencyTable::from_labels(gold.iter().map(|(_, _, a)| &a.ty), 100);
    let report = evaluate(&pred, &gold, &freq);
    println!("\n{}", report.summary());
    Ok(())
}
