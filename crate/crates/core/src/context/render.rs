use serde::{Deserialize, Serialize};

use crate::assignment::{Provenance, TypeAssignment};
use crate::project::{render_element, AnnotationSlot, CodeElement, ElementKind, ModuleSource, SlotFill};
use crate::pytype::annotation_source;

pub fn marker(index: usize) -> String {
    format!("<extra_id_{index}>")
}

/// Element text with markers at the slots being predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedRendering {
    pub text: String,
    /// Marker `i` (counted from the configured base) → slot index.
    pub slot_map: Vec<usize>,
}

fn dedent(text: &str) -> String {
    let indent = text.len() - text.trim_start_matches([' ', '\t']).len();
    text.lines()
        .map(|l| {
            let strip = l.len() - l.trim_start_matches([' ', '\t']).len();
            &l[strip.min(indent)..]
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn with_headers(element: &CodeElement, body: &str) -> String {
    let mut out = String::new();
    for header in &element.owner_headers {
        out.push_str(header);
        out.push('\n');
    }
    out.push_str(body);
    out
}

fn typed_fill<'a>(
    element: &'a CodeElement,
    assignment: &'a TypeAssignment,
    typed: bool,
) -> impl Fn(&AnnotationSlot) -> SlotFill + 'a {
    move |slot| match assignment.type_of(&element.id, slot.index) {
        Some(t) if typed => SlotFill::Set(annotation_source(t)),
        _ => SlotFill::Erase,
    }
}

/// The element's source under its class headers, with a marker at every
/// slot. Slots holding a user override keep the override instead. All other
/// existing annotations are erased.
pub fn render_main_code(module: &ModuleSource, element: &CodeElement, assignment: &TypeAssignment, marker_base: usize) -> MaskedRendering {
    let mut slot_map = Vec::new();
    let mut fills = Vec::new();
    for slot in &element.slots {
        let fill = match assignment.get(&element.id, slot.index) {
            Some(a) if a.provenance == Provenance::UserOverride => SlotFill::Set(annotation_source(&a.ty)),
            _ => {
                let m = marker(marker_base + slot_map.len());
                slot_map.push(slot.index);
                SlotFill::Set(m)
            }
        };
        fills.push(fill);
    }
    let body = render_element(module, element, |s| fills[s.index].clone());
    MaskedRendering { text: with_headers(element, &body), slot_map }
}

/// Full source of a context element with types from the assignment (when
/// `typed`) and every other annotation erased.
pub fn render_typed_source(module: &ModuleSource, element: &CodeElement, assignment: &TypeAssignment, typed: bool) -> String {
    with_headers(element, &render_element(module, element, typed_fill(element, assignment, typed)))
}

/// One-line signature: `def f(x: T, y=1) -> R: ...` for functions and
/// `name: T` for variables, with types taken from the assignment.
pub fn render_signature(element: &CodeElement, assignment: &TypeAssignment, typed: bool) -> String {
    let ty = |slot: usize| {
        if typed {
            assignment.type_of(&element.id, slot).map(annotation_source)
        } else {
            None
        }
    };
    match (&element.signature, element.kind) {
        (Some(sig), ElementKind::Function | ElementKind::Method) => {
            let params: Vec<String> = sig
                .params
                .iter()
                .map(|p| {
                    let annotation = p.slot.and_then(ty);
                    match (annotation, &p.default) {
                        (Some(t), Some(d)) => format!("{}: {t} = {d}", p.text),
                        (Some(t), None) => format!("{}: {t}", p.text),
                        (None, Some(d)) => format!("{}={d}", p.text),
                        (None, None) => p.text.clone(),
                    }
                })
                .collect();
            let ret = element.return_slot().and_then(|s| ty(s.index)).map(|t| format!(" -> {t}")).unwrap_or_default();
            let prefix = if sig.is_async { "async def" } else { "def" };
            format!("{prefix} {}({}){ret}: ...", element.name, params.join(", "))
        }
        _ => match ty(0) {
            Some(t) => format!("{}: {t}", element.name),
            None => element.name.clone(),
        },
    }
}

/// Signature placed under the element's class headers, at the element's
/// original indentation.
pub fn render_signature_item(element: &CodeElement, assignment: &TypeAssignment, typed: bool) -> String {
    let first = element.source.lines().find(|l| !l.trim_start().starts_with('@')).unwrap_or("");
    let indent = &first[..first.len() - first.trim_start().len()];
    with_headers(element, &format!("{indent}{}", render_signature(element, assignment, typed)))
}

/// Imports, class headers (decorators and `class` line), and type variable
/// declarations of the module, in source order.
pub fn build_preamble(module: &ModuleSource) -> String {
    let mut parts: Vec<(usize, String)> = Vec::new();
    for item in &module.imports {
        parts.push((item.offset, item.text.clone()));
    }
    for class in &module.classes {
        parts.push((class.offset, dedent(&class.header)));
    }
    let mut search_from = 0;
    for decl in &module.type_var_decls {
        let offset = module.text[search_from..].find(decl.as_str()).map_or(module.text.len(), |i| search_from + i);
        search_from = offset.min(module.text.len());
        parts.push((offset, decl.clone()));
    }
    parts.sort_by_key(|(o, _)| *o);
    parts.into_iter().map(|(_, t)| t).collect::<Vec<_>>().join("\n")
}
