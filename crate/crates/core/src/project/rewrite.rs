use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use thiserror::Error;

use super::parse::{line_start, parse_tree};
use super::{parse_module, AnnotationSlot, CodeElement, ElementId, ModuleSource, ProjectSource, SlotSite};
use crate::assignment::TypeAssignment;
use crate::pytype::{annotation_source, PyType};

/// What to do with one slot when rendering an element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotFill {
    /// Leave the source as written.
    Keep,
    /// Remove any annotation.
    Erase,
    /// Write this annotation text (a type or a marker).
    Set(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TextEdit {
    range: Range<usize>,
    text: String,
}

fn slot_edits(slot: &AnnotationSlot, fill: &SlotFill, out: &mut Vec<TextEdit>) {
    let mut push = |range: Range<usize>, text: String| out.push(TextEdit { range, text });
    match (&slot.site, fill) {
        (_, SlotFill::Keep) => {}
        (SlotSite::Parameter { name_end, annotation, default_gap }, SlotFill::Set(t)) => match default_gap {
            Some(gap) => push(*name_end..gap.end, format!(": {t} = ")),
            None => push(*name_end..annotation.as_ref().map_or(*name_end, |a| a.end), format!(": {t}")),
        },
        (SlotSite::Parameter { name_end, annotation: Some(a), default_gap }, SlotFill::Erase) => match default_gap {
            Some(gap) => push(*name_end..gap.end, "=".to_string()),
            None => push(a.clone(), String::new()),
        },
        (SlotSite::Return { params_end, annotation }, SlotFill::Set(t)) => {
            push(*params_end..annotation.as_ref().map_or(*params_end, |a| a.end), format!(" -> {t}"));
        }
        (SlotSite::Return { annotation: Some(a), .. }, SlotFill::Erase) => push(a.clone(), String::new()),
        (SlotSite::Variable { name_end, annotation, others, .. }, fill) => {
            match fill {
                SlotFill::Set(t) => push(*name_end..annotation.as_ref().map_or(*name_end, |a| a.end), format!(": {t}")),
                _ => {
                    if let Some(a) = annotation {
                        push(a.clone(), String::new());
                    }
                }
            }
            for o in others {
                push(o.clone(), String::new());
            }
        }
        _ => {}
    }
}

fn apply_edits(text: &str, base: usize, mut edits: Vec<TextEdit>) -> String {
    edits.sort_by_key(|e| e.range.start);
    let mut out = String::with_capacity(text.len() + 16 * edits.len());
    let mut pos = 0;
    for e in edits {
        let start = e.range.start - base;
        let end = e.range.end - base;
        debug_assert!(start >= pos, "overlapping slot edits");
        out.push_str(&text[pos..start]);
        out.push_str(&e.text);
        pos = end;
    }
    out.push_str(&text[pos..]);
    out
}

/// The element's source with every slot rendered according to `fill`.
/// Statements of a multi-statement variable are joined by newlines, as in
/// [`CodeElement::source`].
pub fn render_element(
    module: &ModuleSource,
    element: &CodeElement,
    fill: impl Fn(&AnnotationSlot) -> SlotFill,
) -> String {
    let mut edits = Vec::new();
    for slot in &element.slots {
        slot_edits(slot, &fill(slot), &mut edits);
    }
    element
        .spans
        .iter()
        .map(|span| {
            let inside: Vec<TextEdit> = edits
                .iter()
                .filter(|e| e.range.start >= span.start && e.range.end <= span.end)
                .cloned()
                .collect();
            apply_edits(&module.text[span.clone()], span.start, inside)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("unknown element {0}")]
    UnknownElement(ElementId),
    #[error("element {element} has no slot {slot}")]
    UnknownSlot { element: ElementId, slot: usize },
    #[error("annotated module {module} no longer parses: {reason}")]
    Reparse { module: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApplyReport {
    pub applied: usize,
    pub errors: Vec<ApplyError>,
    /// `typing` names imported per module so that written annotations resolve.
    pub added_imports: BTreeMap<String, Vec<String>>,
    /// Project classes imported per module, as `module.Class`.
    pub added_class_imports: BTreeMap<String, Vec<String>>,
}

/// `typing` names that an emitted annotation may need.
const TYPING_NAMES: &[&str] = &[
    "Any", "AsyncGenerator", "AsyncIterable", "AsyncIterator", "Awaitable", "Callable", "ClassVar", "Collection",
    "Coroutine", "Counter", "DefaultDict", "Deque", "Final", "Generator", "Hashable", "IO", "Iterable", "Iterator",
    "Literal", "Mapping", "MutableMapping", "MutableSequence", "MutableSet", "NoReturn", "Optional", "OrderedDict",
    "Sequence", "Sized", "TextIO", "Union",
];

fn typing_heads(t: &PyType, out: &mut BTreeSet<String>) {
    if t.head == "Literal" {
        out.insert(t.head.clone());
        return;
    }
    if TYPING_NAMES.contains(&t.head.as_str()) {
        out.insert(t.head.clone());
    }
    for a in &t.args {
        typing_heads(a, out);
    }
}

/// Unqualified names used as constructors in `t`.
fn bare_names(t: &PyType, out: &mut BTreeSet<String>) {
    if !t.head.contains('.') && !t.is_list_node() {
        out.insert(t.head.clone());
    }
    if t.head != "Literal" {
        for a in &t.args {
            bare_names(a, out);
        }
    }
}

/// Module defining each top-level project class name. Names defined in
/// several modules are ambiguous and left out.
fn class_homes(project: &ProjectSource) -> BTreeMap<&str, &str> {
    let mut homes: BTreeMap<&str, Option<&str>> = BTreeMap::new();
    for m in &project.modules {
        for c in m.classes.iter().filter(|c| !c.path.contains('.')) {
            homes.entry(&c.name).and_modify(|h| *h = None).or_insert(Some(&m.name));
        }
    }
    homes.into_iter().filter_map(|(name, home)| Some((name, home?))).collect()
}

fn module_bindings(module: &ModuleSource) -> (BTreeSet<String>, bool) {
    let mut names: BTreeSet<String> = module.other_bindings.clone();
    let mut wildcard_typing = false;
    for item in &module.imports {
        for b in &item.bindings {
            match b {
                super::ImportBinding::Wildcard { module, .. } if module == "typing" => wildcard_typing = true,
                _ => {
                    if let Some(n) = b.bound_name() {
                        names.insert(n.to_string());
                    }
                }
            }
        }
    }
    names.extend(module.elements.iter().filter(|e| e.owner.is_none()).map(|e| e.name.clone()));
    names.extend(module.classes.iter().filter(|c| !c.path.contains('.')).map(|c| c.name.clone()));
    (names, wildcard_typing)
}

/// Offset before the first statement that is not a comment, the module
/// docstring, or a `__future__` import.
fn import_insertion_point(text: &str) -> usize {
    let tree = parse_tree(text);
    let root = tree.root_node();
    let mut cursor = root.walk();
    let mut seen_statement = false;
    for child in root.named_children(&mut cursor) {
        match child.kind() {
            "comment" | "future_import_statement" => {}
            "expression_statement"
                if !seen_statement && child.named_child(0).is_some_and(|c| c.kind() == "string") => {}
            _ => return line_start(text, child.start_byte()),
        }
        seen_statement = seen_statement || child.kind() != "comment";
    }
    text.len()
}

/// Writes the assigned types into the project's sources: `: T` after
/// parameters and variables, `-> T` after parameter lists. Unknown keys are
/// reported and skipped; every other key is applied. Missing `typing` imports
/// for emitted special forms are added.
pub fn apply_assignment(project: &ProjectSource, assignment: &TypeAssignment) -> (ProjectSource, ApplyReport) {
    let mut report = ApplyReport::default();
    let mut per_module: BTreeMap<usize, (Vec<TextEdit>, BTreeSet<String>, BTreeSet<String>)> = BTreeMap::new();
    for (id, slot_index, assigned) in assignment.iter() {
        let Some(&(mi, ei)) = project.index.get(id) else {
            report.errors.push(ApplyError::UnknownElement(id.clone()));
            continue;
        };
        let element = &project.modules[mi].elements[ei];
        let Some(slot) = element.slots.get(slot_index) else {
            report.errors.push(ApplyError::UnknownSlot { element: id.clone(), slot: slot_index });
            continue;
        };
        let entry = per_module.entry(mi).or_default();
        slot_edits(slot, &SlotFill::Set(annotation_source(&assigned.ty)), &mut entry.0);
        let mut heads = BTreeSet::new();
        typing_heads(&assigned.ty, &mut heads);
        if heads.contains("Union") || assigned.ty.head == "Union" {
            // Emission may turn a two-member Union into Optional.
            heads.insert("Optional".into());
        }
        entry.1.extend(heads);
        bare_names(&assigned.ty, &mut entry.2);
        report.applied += 1;
    }

    let homes = class_homes(project);
    let mut modules = project.modules.clone();
    for (mi, (mut edits, heads, names)) in per_module {
        let module = &project.modules[mi];
        let emitted: String = edits.iter().map(|e| e.text.as_str()).collect::<Vec<_>>().join(" ");
        let (bound, wildcard) = module_bindings(module);
        let missing: Vec<String> = if wildcard {
            Vec::new()
        } else {
            heads
                .into_iter()
                .filter(|h| !bound.contains(h) && emitted.contains(h.as_str()))
                .collect()
        };
        // A class is imported from the one module defining it, unless the
        // name is already bound here or a star import may bind it.
        let mut from_project: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let star = module.imports.iter().flat_map(|i| &i.bindings).any(|b| matches!(b, super::ImportBinding::Wildcard { .. }));
        for name in &names {
            match homes.get(name.as_str()) {
                Some(&home) if home != module.name && !bound.contains(name) && !star => {
                    from_project.entry(home).or_default().push(name)
                }
                _ => {}
            }
        }
        let mut lines = Vec::new();
        if !missing.is_empty() {
            lines.push(format!("from typing import {}", missing.join(", ")));
            report.added_imports.insert(module.name.clone(), missing);
        }
        for (home, names) in &from_project {
            lines.push(format!("from {home} import {}", names.join(", ")));
            report
                .added_class_imports
                .entry(module.name.clone())
                .or_default()
                .extend(names.iter().map(|n| format!("{home}.{n}")));
        }
        if !lines.is_empty() {
            let newline = if module.text.contains("\r\n") { "\r\n" } else { "\n" };
            let at = import_insertion_point(&module.text);
            let prefix = if at == module.text.len() && !module.text.is_empty() && !module.text.ends_with('\n') {
                newline
            } else {
                ""
            };
            let text = lines.iter().map(|l| format!("{l}{newline}")).collect::<String>();
            edits.push(TextEdit { range: at..at, text: format!("{prefix}{text}") });
        }
        let text = apply_edits(&module.text, 0, edits);
        match parse_module(&module.name, &module.path, &text, module.is_package) {
            Ok(m) => modules[mi] = m,
            Err(reason) => report.errors.push(ApplyError::Reparse { module: module.name.clone(), reason }),
        }
    }
    let out = ProjectSource::from_modules(project.root.clone(), modules, project.skipped.clone());
    (out, report)
}
