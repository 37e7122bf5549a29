use serde::{Deserialize, Serialize};

use crate::assignment::TypeAssignment;
use crate::project::ProjectSource;
use crate::pytype::{categorize, ConstructorFrequencyTable, Frequency, Shape};

/// Label statistics of a set of projects. Ratios use every gold label as the
/// denominator and are `None` when there are no labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub projects: usize,
    /// Slots of top-level elements.
    pub slots: usize,
    /// Slots carrying an existing annotation.
    pub labels: usize,
    pub rare_ratio: Option<f64>,
    pub complex_ratio: Option<f64>,
    pub average_size: Option<f64>,
}

impl DatasetStats {
    pub fn undefined(&self) -> bool {
        self.labels == 0
    }
}

pub fn dataset_stats(projects: &[&ProjectSource], freq: &ConstructorFrequencyTable) -> DatasetStats {
    let mut slots = 0;
    let mut labels = 0;
    let mut rare = 0;
    let mut complex = 0;
    let mut size = 0;
    for project in projects {
        slots += project.elements().map(|e| e.slots.len()).sum::<usize>();
        for (_, _, label) in TypeAssignment::from_gold(project).iter() {
            let category = categorize(&label.ty, freq);
            labels += 1;
            rare += usize::from(category.frequency == Frequency::Rare);
            complex += usize::from(category.shape == Shape::Complex);
            size += label.ty.size();
        }
    }
    let ratio = |n: usize| (labels > 0).then(|| n as f64 / labels as f64);
    DatasetStats {
        projects: projects.len(),
        slots,
        labels,
        rare_ratio: ratio(rare),
        complex_ratio: ratio(complex),
        average_size: ratio(size),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PyType;

    #[test]
    fn single_label_size() {
        let p = ProjectSource::from_sources(&[("m.py", "import foo\n\n\ndef f(x: dict[str, foo.Bar]):\n    pass\n")]);
        let freq = ConstructorFrequencyTable::from_labels([PyType::simple("dict")].iter(), 100);
        let s = dataset_stats(&[&p], &freq);
        assert_eq!((s.slots, s.labels), (2, 1));
        assert_eq!(s.average_size, Some(3.0));
        assert_eq!(s.complex_ratio, Some(1.0));
        assert_eq!(s.rare_ratio, Some(1.0));
    }

    #[test]
    fn no_labels_is_undefined() {
        let p = ProjectSource::from_sources(&[("m.py", "def f(x):\n    pass\n")]);
        let s = dataset_stats(&[&p], &ConstructorFrequencyTable::default());
        assert!(s.undefined());
        assert_eq!(s.rare_ratio, None);
    }
}
