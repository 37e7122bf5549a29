//! The type assignment `M`: slot → type, with provenance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::project::{ElementId, ProjectSource};
use crate::pytype::{normalize, PyType};

pub const ASSIGNMENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Predicted,
    UserOverride,
    Gold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedType {
    #[serde(rename = "type")]
    pub ty: PyType,
    pub provenance: Provenance,
}

/// Normalized types keyed by element and slot index. Overrides and existing
/// annotations are sticky: a prediction only ever replaces a prediction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeAssignment {
    entries: BTreeMap<ElementId, BTreeMap<usize, AssignedType>>,
}

#[derive(Serialize, Deserialize)]
struct AssignmentFile {
    schema_version: u32,
    entries: BTreeMap<ElementId, BTreeMap<usize, AssignedType>>,
}

impl TypeAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `normalize(ty)`. Returns false (and stores nothing) when a
    /// prediction would replace a user override or an existing annotation.
    pub fn insert(&mut self, id: ElementId, slot: usize, ty: &PyType, provenance: Provenance) -> bool {
        let slots = self.entries.entry(id).or_default();
        if provenance == Provenance::Predicted && slots.get(&slot).is_some_and(|a| a.provenance != Provenance::Predicted) {
            return false;
        }
        slots.insert(slot, AssignedType { ty: normalize(ty), provenance });
        true
    }

    pub fn get(&self, id: &ElementId, slot: usize) -> Option<&AssignedType> {
        self.entries.get(id).and_then(|s| s.get(&slot))
    }

    pub fn type_of(&self, id: &ElementId, slot: usize) -> Option<&PyType> {
        self.get(id, slot).map(|a| &a.ty)
    }

    pub fn element(&self, id: &ElementId) -> Option<&BTreeMap<usize, AssignedType>> {
        self.entries.get(id)
    }

    pub fn remove_element(&mut self, id: &ElementId) {
        self.entries.remove(id);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ElementId, usize, &AssignedType)> {
        self.entries.iter().flat_map(|(id, slots)| slots.iter().map(move |(i, a)| (id, *i, a)))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every existing annotation of the project, with provenance `gold`.
    pub fn from_gold(project: &ProjectSource) -> Self {
        let mut out = Self::new();
        for ((id, slot), ty) in project.gold_labels() {
            out.insert(id, slot, &ty, Provenance::Gold);
        }
        out
    }

    /// Copy without `Any` entries (they carry no information when written
    /// back into code).
    pub fn without_any(&self) -> Self {
        let mut out = Self::new();
        for (id, slot, a) in self.iter() {
            if !a.ty.is_any() {
                out.entries.entry(id.clone()).or_default().insert(slot, a.clone());
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = AssignmentFile { schema_version: ASSIGNMENT_SCHEMA_VERSION, entries: self.entries.clone() };
        serde_json::to_string_pretty(&file).expect("assignment serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: AssignmentFile = serde_json::from_str(text)?;
        let mut out = Self::new();
        for (id, slots) in file.entries {
            for (slot, a) in slots {
                out.insert(id.clone(), slot, &a.ty, a.provenance);
            }
        }
        Ok(out)
    }
}
