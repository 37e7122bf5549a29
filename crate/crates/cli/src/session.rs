//! Interactive review sessions.
//!
//! A session walks the decoding schedule one element at a time. The current
//! element's predictions stay pending until the user accepts or overrides
//! every one of them; only then is the assignment updated and the next
//! element predicted against it. Accepting everything therefore reproduces
//! batch decoding with the same schedule.
//!
//! Every decision and undo is appended to `<state_dir>/<id>.jsonl` before it
//! takes effect. Reopening a session replays that log, so a restarted
//! service resumes at the same element.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use pytypefill::context::TokenCounts;
use pytypefill::project::SlotRole;
use pytypefill::pytype::parse_type;
use pytypefill::{
    build_usage_graph, load_project, make_plan, normalize, predict_element, AtomTokenizer, DecodeConfig, DecodingPlan,
    ElementId, ElementPrediction, ModelInput, Predictor, ProjectSource, Provenance, PyType, Strategy, TypeAssignment,
    UsageGraph,
};

use crate::config::{Backend, Config};

pub const SESSION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("session storage failed: {0}")]
    Storage(String),
}

impl From<std::io::Error> for SessionError {
    fn from(e: std::io::Error) -> Self {
        SessionError::Storage(e.to_string())
    }
}

/// What a session decodes and with which backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub project: PathBuf,
    pub backend: Backend,
    /// Follow the first pass with a user-to-usee pass.
    pub second_pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Accept,
    Override,
}

/// One slot decision as sent by a client. `type` is required for overrides
/// and ignored for accepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDecision {
    pub slot: usize,
    pub action: Action,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub ty: Option<String>,
}

/// A validated decision as logged. `type` is the accepted prediction (absent
/// when the backend gave none) or the normalized override.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedDecision {
    pub slot: usize,
    pub action: Action,
    #[serde(rename = "type")]
    pub ty: Option<PyType>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogEntry {
    Header { schema_version: u32, session_id: String, spec: SessionSpec },
    /// `completes` is set on the entry that decides the element's last
    /// pending slot.
    Decision { cursor: usize, element: ElementId, decisions: Vec<AppliedDecision>, completes: bool },
    Undo,
}

#[derive(Debug, Clone)]
struct Completed {
    cursor: usize,
    decisions: Vec<AppliedDecision>,
}

struct Pending {
    cursor: usize,
    element: ElementId,
    input: Option<ModelInput>,
    predictions: BTreeMap<usize, PyType>,
    /// Slots awaiting a decision, in marker order.
    slots: Vec<usize>,
    decided: BTreeMap<usize, AppliedDecision>,
    error: Option<String>,
    retriable: bool,
    diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segments {
    pub preamble: String,
    pub usees: String,
    pub main_code: String,
    pub users: String,
    pub marker_base: usize,
    pub token_counts: TokenCounts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotView {
    pub slot: usize,
    #[serde(flatten)]
    pub role: SlotRole,
    /// Marker number in `main_code`, when the slot is shown there.
    pub marker: Option<usize>,
    pub pending: bool,
    pub predicted: Option<String>,
    pub decision: Option<AppliedDecisionView>,
    /// The slot's type in the current assignment.
    pub assigned: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppliedDecisionView {
    pub action: Action,
    #[serde(rename = "type")]
    pub ty: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub decided_elements: usize,
    pub accepted: usize,
    pub overridden: usize,
    /// Accepted share of decided slots with a prediction, in percent.
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurrentView {
    pub schema_version: u32,
    pub session_id: String,
    pub done: bool,
    /// Index of the current visit in the schedule.
    pub cursor: usize,
    pub visit_count: usize,
    pub pass: Option<usize>,
    pub element_id: Option<ElementId>,
    pub segments: Option<Segments>,
    pub slots: Vec<SlotView>,
    pub error: Option<String>,
    pub diagnostics: Vec<String>,
    pub stats: SessionStats,
}

pub struct Session {
    id: String,
    spec: SessionSpec,
    project: ProjectSource,
    graph: UsageGraph,
    plan: DecodingPlan,
    predictor: Arc<dyn Predictor>,
    config: DecodeConfig,
    log_path: PathBuf,
    completed: Vec<Completed>,
    assignment: TypeAssignment,
    cursor: usize,
    pending: Option<Pending>,
}

/// Session ids are generated as 32 lowercase hex digits; anything else is
/// unknown, which also keeps ids from naming paths outside the state dir.
pub fn is_valid_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

fn log_path(state_dir: &Path, id: &str) -> PathBuf {
    state_dir.join(format!("{id}.jsonl"))
}

fn append(path: &Path, entry: &LogEntry) -> Result<(), SessionError> {
    let mut line = serde_json::to_string(entry).map_err(|e| SessionError::Storage(e.to_string()))?;
    line.push('\n');
    let mut f = OpenOptions::new().append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

impl Session {
    /// Loads the project, writes the log header, and predicts the first
    /// element.
    pub fn create(id: &str, spec: SessionSpec, config: &Config, state_dir: &Path) -> Result<Session, SessionError> {
        let mut session = Session::build(id, spec, config, state_dir)?;
        std::fs::create_dir_all(state_dir)?;
        let header =
            LogEntry::Header { schema_version: SESSION_SCHEMA_VERSION, session_id: id.into(), spec: session.spec.clone() };
        let mut f = OpenOptions::new().write(true).create_new(true).open(&session.log_path)?;
        f.write_all((serde_json::to_string(&header).map_err(|e| SessionError::Storage(e.to_string()))? + "\n").as_bytes())?;
        f.sync_data()?;
        session.advance();
        Ok(session)
    }

    /// Rebuilds a session from its log.
    pub fn open(id: &str, config: &Config, state_dir: &Path) -> Result<Session, SessionError> {
        if !is_valid_id(id) {
            return Err(SessionError::NotFound(id.into()));
        }
        let path = log_path(state_dir, id);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(SessionError::NotFound(id.into())),
            Err(e) => return Err(e.into()),
        };
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LogEntry>(&line) {
                Ok(e) => entries.push(e),
                // A torn final line from a crash mid-write is dropped.
                Err(e) => log::warn!("{}:{}: ignoring unreadable log line: {e}", path.display(), n + 1),
            }
        }
        let mut entries = entries.into_iter();
        let spec = match entries.next() {
            Some(LogEntry::Header { spec, .. }) => spec,
            _ => return Err(SessionError::Storage(format!("{} has no header", path.display()))),
        };
        let mut session = Session::build(id, spec, config, state_dir)?;
        let mut partial: Vec<(usize, AppliedDecision)> = Vec::new();
        for entry in entries {
            match entry {
                LogEntry::Header { .. } => {}
                LogEntry::Decision { cursor, decisions, completes, .. } => {
                    partial.extend(decisions.into_iter().map(|d| (cursor, d)));
                    if completes {
                        let decisions = partial.drain(..).map(|(_, d)| d).collect();
                        session.completed.push(Completed { cursor, decisions });
                    }
                }
                LogEntry::Undo => {
                    partial.clear();
                    session.completed.pop();
                }
            }
        }
        session.rebuild();
        session.advance();
        if let Some(p) = &mut session.pending {
            for (cursor, d) in partial {
                if cursor == p.cursor && p.slots.contains(&d.slot) {
                    p.decided.insert(d.slot, d);
                }
            }
        }
        Ok(session)
    }

    fn build(id: &str, spec: SessionSpec, config: &Config, state_dir: &Path) -> Result<Session, SessionError> {
        let project = load_project(&spec.project)
            .map_err(|e| SessionError::Invalid(format!("cannot load project: {e}")))?
            .preprocessed();
        let graph = build_usage_graph(&project);
        let strategy = if spec.second_pass { Strategy::TwoPass } else { Strategy::UseeToUser };
        let plan = make_plan(&graph, strategy, 0);
        let predictor = config.predictor_for(&spec.backend).map_err(|e| SessionError::Invalid(e.to_string()))?;
        Ok(Session {
            id: id.into(),
            log_path: log_path(state_dir, id),
            spec,
            project,
            graph,
            plan,
            predictor,
            config: config.decode_config(),
            completed: Vec::new(),
            assignment: TypeAssignment::new(),
            cursor: 0,
            pending: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn spec(&self) -> &SessionSpec {
        &self.spec
    }

    pub fn element_count(&self) -> usize {
        self.project.element_count()
    }

    pub fn assignment(&self) -> &TypeAssignment {
        &self.assignment
    }

    pub fn is_done(&self) -> bool {
        self.pending.is_none()
    }

    /// Recomputes the assignment and cursor from the completed elements.
    fn rebuild(&mut self) {
        let mut m = TypeAssignment::new();
        for c in &self.completed {
            let element = &self.plan.visit_schedule[c.cursor].element;
            apply_decisions(&mut m, element, &c.decisions);
        }
        self.assignment = m;
        self.cursor = self.completed.last().map_or(0, |c| c.cursor + 1);
    }

    /// Predicts visits from the cursor on until one has slots to decide.
    fn advance(&mut self) {
        self.pending = None;
        let tokenizer = AtomTokenizer;
        while let Some(visit) = self.plan.visit_schedule.get(self.cursor) {
            let prediction = predict_element(
                &self.project,
                &self.graph,
                &self.assignment,
                &visit.element,
                self.predictor.as_ref(),
                &tokenizer,
                &self.config,
            );
            if let Some(p) = self.pending_from(visit.element.clone(), prediction) {
                self.pending = Some(p);
                return;
            }
            self.cursor += 1;
        }
    }

    fn pending_from(&self, element: ElementId, prediction: ElementPrediction) -> Option<Pending> {
        let overridden =
            |slot: usize| self.assignment.get(&element, slot).is_some_and(|a| a.provenance == Provenance::UserOverride);
        let mut p = Pending {
            cursor: self.cursor,
            element: element.clone(),
            input: None,
            predictions: BTreeMap::new(),
            slots: Vec::new(),
            decided: BTreeMap::new(),
            error: None,
            retriable: false,
            diagnostics: Vec::new(),
        };
        match prediction {
            ElementPrediction::Skipped | ElementPrediction::Done { result: None, .. } => return None,
            ElementPrediction::Done { input, result: Some(result) } => {
                for (&slot, ty) in input.slot_map.iter().zip(&result.types) {
                    p.predictions.insert(slot, normalize(ty));
                }
                p.slots = input.slot_map.iter().copied().filter(|&s| !overridden(s)).collect();
                p.diagnostics = result.diagnostics;
                p.diagnostics.extend(input.warnings.iter().cloned());
                p.input = Some(input);
            }
            ElementPrediction::Failed { input, error } => {
                log::warn!("prediction for {element} failed: {error}");
                let e = self.project.element(&element)?;
                p.slots = match &input {
                    Some(i) => i.slot_map.clone(),
                    None => e.slots.iter().map(|s| s.index).collect(),
                };
                p.slots.retain(|&s| !overridden(s));
                p.error = Some(error.to_string());
                p.retriable = error.is_retriable();
                p.input = input;
            }
        }
        (!p.slots.is_empty()).then_some(p)
    }

    /// Validates and records `decisions` for the current element. The whole
    /// request is rejected if any decision is invalid. Returns true when the
    /// element became fully decided and the cursor moved on.
    pub fn decide(&mut self, decisions: &[SlotDecision]) -> Result<bool, SessionError> {
        let Some(pending) = &self.pending else {
            return Err(SessionError::Conflict("the session is done; no slot is pending".into()));
        };
        if decisions.is_empty() {
            return Err(SessionError::Invalid("no decisions given".into()));
        }
        let mut seen = BTreeSet::new();
        for d in decisions {
            if !pending.slots.contains(&d.slot) || pending.decided.contains_key(&d.slot) || !seen.insert(d.slot) {
                return Err(SessionError::Conflict(format!("slot {} of {} is not pending", d.slot, pending.element)));
            }
        }
        let mut applied = Vec::with_capacity(decisions.len());
        for d in decisions {
            let ty = match d.action {
                Action::Accept => pending.predictions.get(&d.slot).cloned(),
                Action::Override => {
                    let text = d.ty.as_deref().ok_or_else(|| {
                        SessionError::Invalid(format!("override of slot {} needs a type", d.slot))
                    })?;
                    let t = parse_type(text)
                        .map_err(|e| SessionError::Invalid(format!("slot {}: cannot parse `{text}`: {e}", d.slot)))?;
                    Some(normalize(&t))
                }
            };
            applied.push(AppliedDecision { slot: d.slot, action: d.action, ty });
        }
        let completes = pending.decided.len() + applied.len() == pending.slots.len();
        let entry = LogEntry::Decision {
            cursor: pending.cursor,
            element: pending.element.clone(),
            decisions: applied.clone(),
            completes,
        };
        append(&self.log_path, &entry)?;

        let pending = self.pending.as_mut().expect("checked above");
        for d in applied {
            pending.decided.insert(d.slot, d);
        }
        if !completes {
            return Ok(false);
        }
        let pending = self.pending.take().expect("checked above");
        let decisions: Vec<AppliedDecision> =
            pending.slots.iter().map(|s| pending.decided[s].clone()).collect();
        apply_decisions(&mut self.assignment, &pending.element, &decisions);
        self.completed.push(Completed { cursor: pending.cursor, decisions });
        self.cursor = pending.cursor + 1;
        self.advance();
        Ok(true)
    }

    /// Forgets the last decided element, and any partial decisions on the
    /// current one, then predicts that element again.
    pub fn undo(&mut self) -> Result<(), SessionError> {
        if self.completed.is_empty() {
            return Err(SessionError::Conflict("nothing to undo".into()));
        }
        append(&self.log_path, &LogEntry::Undo)?;
        self.completed.pop();
        self.rebuild();
        self.advance();
        Ok(())
    }

    /// Predicts the current element again when its backend call failed
    /// retriably and nothing has been decided on it yet.
    pub fn retry(&mut self) -> bool {
        let retry = self.pending.as_ref().is_some_and(|p| p.retriable && p.decided.is_empty());
        if retry {
            self.advance();
        }
        retry
    }

    pub fn stats(&self) -> SessionStats {
        let mut s = SessionStats { decided_elements: self.completed.len(), ..SessionStats::default() };
        let mut with_prediction = 0;
        let partial = self.pending.iter().flat_map(|p| p.decided.values());
        for d in self.completed.iter().flat_map(|c| c.decisions.iter()).chain(partial) {
            match d.action {
                Action::Accept => {
                    s.accepted += 1;
                    with_prediction += usize::from(d.ty.is_some());
                }
                Action::Override => {
                    s.overridden += 1;
                    with_prediction += 1;
                }
            }
        }
        let agreed = s.accepted.min(with_prediction);
        s.agreement = (with_prediction > 0).then(|| 100.0 * agreed as f64 / with_prediction as f64);
        s
    }

    pub fn current(&self) -> CurrentView {
        let mut view = CurrentView {
            schema_version: SESSION_SCHEMA_VERSION,
            session_id: self.id.clone(),
            done: self.pending.is_none(),
            cursor: self.cursor,
            visit_count: self.plan.visit_schedule.len(),
            pass: None,
            element_id: None,
            segments: None,
            slots: Vec::new(),
            error: None,
            diagnostics: Vec::new(),
            stats: self.stats(),
        };
        let Some(p) = &self.pending else { return view };
        view.pass = Some(self.plan.visit_schedule[p.cursor].pass);
        view.element_id = Some(p.element.clone());
        view.error = p.error.clone();
        view.diagnostics = p.diagnostics.clone();
        view.segments = p.input.as_ref().map(|i| Segments {
            preamble: i.preamble.clone(),
            usees: i.usee_context.clone(),
            main_code: i.main_code.clone(),
            users: i.user_context.clone(),
            marker_base: i.marker_base,
            token_counts: i.token_counts,
        });
        let markers: HashMap<usize, usize> = p
            .input
            .as_ref()
            .map(|i| i.slot_map.iter().enumerate().map(|(k, &s)| (s, i.marker_base + k)).collect())
            .unwrap_or_default();
        if let Some(element) = self.project.element(&p.element) {
            view.slots = element
                .slots
                .iter()
                .map(|s| SlotView {
                    slot: s.index,
                    role: s.role.clone(),
                    marker: markers.get(&s.index).copied(),
                    pending: p.slots.contains(&s.index) && !p.decided.contains_key(&s.index),
                    predicted: p.predictions.get(&s.index).map(ToString::to_string),
                    decision: p
                        .decided
                        .get(&s.index)
                        .map(|d| AppliedDecisionView { action: d.action, ty: d.ty.as_ref().map(ToString::to_string) }),
                    assigned: self.assignment.type_of(&p.element, s.index).map(ToString::to_string),
                })
                .collect();
        }
        view
    }
}

fn apply_decisions(m: &mut TypeAssignment, element: &ElementId, decisions: &[AppliedDecision]) {
    for d in decisions {
        let Some(ty) = &d.ty else { continue };
        let provenance = match d.action {
            Action::Accept => Provenance::Predicted,
            Action::Override => Provenance::UserOverride,
        };
        m.insert(element.clone(), d.slot, ty, provenance);
    }
}

/// Body of `POST /sessions`. Missing fields fall back to the service
/// defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateRequest {
    #[serde(default)]
    pub project: Option<PathBuf>,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub second_pass: Option<bool>,
}

/// Live sessions, opened lazily from the state directory.
pub struct SessionStore {
    config: Config,
    default_project: Option<PathBuf>,
    second_pass: bool,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    pub fn new(config: Config, default_project: Option<PathBuf>, second_pass: bool) -> Self {
        SessionStore { config, default_project, second_pass, sessions: Mutex::new(HashMap::new()) }
    }

    pub fn state_dir(&self) -> &Path {
        &self.config.state_dir
    }

    pub fn create(&self, request: CreateRequest) -> Result<Arc<Mutex<Session>>, SessionError> {
        let project = request
            .project
            .or_else(|| self.default_project.clone())
            .ok_or_else(|| SessionError::Invalid("no project given and the service has no default".into()))?;
        let backend = match &request.backend {
            Some(b) => Backend::parse(b).map_err(|e| SessionError::Invalid(e.to_string()))?,
            None => self.config.backend.clone(),
        };
        let spec = SessionSpec { project, backend, second_pass: request.second_pass.unwrap_or(self.second_pass) };
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Arc::new(Mutex::new(Session::create(&id, spec, &self.config, self.state_dir())?));
        self.lock().insert(id, session.clone());
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        if let Some(s) = self.lock().get(id) {
            return Ok(s.clone());
        }
        let opened = Arc::new(Mutex::new(Session::open(id, &self.config, self.state_dir())?));
        Ok(self.lock().entry(id.to_string()).or_insert(opened).clone())
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Arc<Mutex<Session>>>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }
}
