use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PyType;

pub const DEFAULT_TOP_K: usize = 100;

/// Occurrence counts of type constructors over a label set, with the
/// `top_k` most frequent ones considered common.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructorFrequencyTable {
    pub top_k: usize,
    pub counts: BTreeMap<String, u64>,
    #[serde(skip)]
    top: Option<BTreeSet<String>>,
}

impl PartialEq for ConstructorFrequencyTable {
    fn eq(&self, other: &Self) -> bool {
        self.top_k == other.top_k && self.counts == other.counts
    }
}

impl Eq for ConstructorFrequencyTable {}

impl Default for ConstructorFrequencyTable {
    fn default() -> Self {
        Self::new(DEFAULT_TOP_K)
    }
}

impl ConstructorFrequencyTable {
    pub fn new(top_k: usize) -> Self {
        ConstructorFrequencyTable { top_k, counts: BTreeMap::new(), top: None }
    }

    /// Counts every constructor of every (already normalized) label.
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a PyType>, top_k: usize) -> Self {
        let mut table = Self::new(top_k);
        for label in labels {
            table.add(label);
        }
        table.refresh();
        table
    }

    pub fn add(&mut self, label: &PyType) {
        for head in label.constructors() {
            *self.counts.entry(head.to_string()).or_default() += 1;
        }
        self.top = None;
    }

    /// Recomputes the cached top set. Called automatically by `from_labels`;
    /// deserialized tables compute it lazily.
    pub fn refresh(&mut self) {
        self.top = Some(self.compute_top());
    }

    fn compute_top(&self) -> BTreeSet<String> {
        let mut ranked: Vec<(&String, &u64)> = self.counts.iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        ranked.into_iter().take(self.top_k).map(|(k, _)| k.clone()).collect()
    }

    pub fn top_set(&self) -> BTreeSet<String> {
        match &self.top {
            Some(top) => top.clone(),
            None => self.compute_top(),
        }
    }

    pub fn is_common(&self, constructor: &str) -> bool {
        match &self.top {
            Some(top) => top.contains(constructor),
            None => self.compute_top().contains(constructor),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Simple,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Common,
    Rare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Category {
    pub shape: Shape,
    pub frequency: Frequency,
}

/// Simple when the type has exactly one constructor; rare when any of its
/// constructors falls outside the table's top set.
pub fn categorize(t: &PyType, freq: &ConstructorFrequencyTable) -> Category {
    let shape = if t.size() == 1 { Shape::Simple } else { Shape::Complex };
    let rare = t.constructors().iter().any(|c| !freq.is_common(c));
    Category { shape, frequency: if rare { Frequency::Rare } else { Frequency::Common } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pytype::normalize;

    fn p(s: &str) -> PyType {
        normalize(&PyType::parse(s).unwrap())
    }

    #[test]
    fn top_set_tie_breaks_by_name() {
        let labels = [p("int"), p("str"), p("bool"), p("int")];
        let table = ConstructorFrequencyTable::from_labels(labels.iter(), 2);
        assert_eq!(table.top_set().into_iter().collect::<Vec<_>>(), vec!["bool", "int"]);
        let table = ConstructorFrequencyTable::from_labels(labels.iter(), 10);
        assert_eq!(table.top_set().len(), 3);
    }

    #[test]
    fn categories() {
        let labels = [p("int"), p("Dict[int, List[str]]"), p("int"), p("str")];
        let table = ConstructorFrequencyTable::from_labels(labels.iter(), 100);
        assert_eq!(
            categorize(&p("int"), &table),
            Category { shape: Shape::Simple, frequency: Frequency::Common }
        );
        assert_eq!(
            categorize(&p("dict[int, list[PythonType]]"), &table),
            Category { shape: Shape::Complex, frequency: Frequency::Rare }
        );
        assert_eq!(
            categorize(&p("foo.Bar"), &table),
            Category { shape: Shape::Simple, frequency: Frequency::Rare }
        );
    }

    #[test]
    fn serialized_table_recomputes_top_set() {
        let labels = [p("int"), p("str")];
        let table = ConstructorFrequencyTable::from_labels(labels.iter(), 1);
        let json = serde_json::to_string(&table).unwrap();
        let back: ConstructorFrequencyTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back.top_set(), table.top_set());
    }
}
