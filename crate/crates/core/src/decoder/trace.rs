use serde::{Deserialize, Serialize};

use crate::assignment::{Provenance, TypeAssignment};
use crate::context::{ModelInput, TokenCounts};
use crate::project::ElementId;
use crate::pytype::PyType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum VisitStatus {
    Predicted,
    /// The element has no slots.
    Skipped,
    Failed {
        error: String,
        /// The backend was unreachable or timed out, as opposed to answering
        /// with something unusable.
        #[serde(default)]
        retriable: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotChange {
    pub slot: usize,
    pub before: Option<PyType>,
    pub after: PyType,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub step: usize,
    pub pass: usize,
    pub element: ElementId,
    #[serde(flatten)]
    pub status: VisitStatus,
    pub token_counts: Option<TokenCounts>,
    /// Slot index → predicted type, in marker order.
    pub predicted: Vec<(usize, PyType)>,
    pub diff: Vec<SlotChange>,
    pub diagnostics: Vec<String>,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<ModelInput>,
}

/// Append-only log of decoding visits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    records: Vec<VisitRecord>,
}

impl DecodeTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, record: VisitRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[VisitRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn visits_of<'a>(&'a self, element: &'a ElementId) -> impl Iterator<Item = &'a VisitRecord> + 'a {
        self.records.iter().filter(move |r| &r.element == element)
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| matches!(r.status, VisitStatus::Failed { .. })).count()
    }

    /// Rebuilds the assignment by applying every recorded change to `start`.
    pub fn replay(&self, start: &TypeAssignment) -> TypeAssignment {
        let mut m = start.clone();
        for r in &self.records {
            for c in &r.diff {
                m.insert(r.element.clone(), c.slot, &c.after, c.provenance);
            }
        }
        m
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialize"))
            .map(|l| l + "\n")
            .collect()
    }

    /// A single schema-versioned JSON document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TraceFile { schema_version: TRACE_SCHEMA_VERSION, records: self.records.clone() })
            .expect("trace records serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: TraceFile = serde_json::from_str(text)?;
        Ok(DecodeTrace { records: file.records })
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<_, _>>()?;
        Ok(DecodeTrace { records })
    }
}

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TraceFile {
    schema_version: u32,
    records: Vec<VisitRecord>,
}
