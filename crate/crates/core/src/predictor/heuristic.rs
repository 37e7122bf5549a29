//! Deterministic offline predictor. Each marker takes the first rule that
//! yields a type:
//!
//! 1. local evidence: literal defaults, literal or constructor values, a
//!    function without a return value (`None`);
//! 2. naming conventions (`*_path`, `is_*`, `has_*`, `n_*`, `num_*`);
//! 3. typed signatures in the usee segment, followed through calls,
//!    attribute reads, and arguments passed to usees;
//! 4. explicitly typed arguments at call sites in the user segment;
//! 5. `Any`.
//!
//! Rules 3 and 4 read only the context, so the predictions change as the
//! decoder fills in neighbouring signatures.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use tree_sitter::Node;

use super::{format_raw_output, parse_raw_output, PredictError, PredictionRequest, PredictionResult, Predictor};
use crate::context::marker;
use crate::project::{node_text, parse_tree};
use crate::pytype::PyType;

/// Bound on chains like `a = b; b = c; ...` when following local values.
const MAX_HOPS: usize = 8;

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicPredictor;

impl Predictor for HeuristicPredictor {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn predict(&self, request: &PredictionRequest) -> Result<PredictionResult, PredictError> {
        let start = Instant::now();
        let types = heuristic_types(request);
        let raw_output = format_raw_output(&types, request.marker_base);
        let (types, diagnostics) = parse_raw_output(&raw_output, request.marker_count, request.marker_base);
        Ok(PredictionResult { types, raw_output, latency: start.elapsed(), diagnostics, token_count: None })
    }
}

fn placeholder(i: usize) -> String {
    format!("__marker_{i}__")
}

fn marker_index(name: &str) -> Option<usize> {
    name.strip_prefix("__marker_")?.strip_suffix("__")?.parse().ok()
}

fn simple(name: &str) -> Option<PyType> {
    Some(PyType::simple(name))
}

/// Visits `node` and its descendants; `f` returns false to skip a subtree.
fn walk<'t>(node: Node<'t>, f: &mut impl FnMut(Node<'t>) -> bool) {
    if !f(node) {
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        walk(child, f);
    }
}

fn is_scope(node: Node<'_>) -> bool {
    matches!(node.kind(), "function_definition" | "class_definition" | "lambda")
}

/// Parses an annotation unless it is still a marker. `Any` carries no
/// information and reads as absent.
fn annotation(node: Node<'_>, text: &str) -> Option<PyType> {
    let t = node_text(node, text);
    if t.contains("__marker_") {
        return None;
    }
    PyType::parse(t).ok().filter(|t| !t.is_any())
}

fn literal_type(node: Node<'_>, text: &str) -> Option<PyType> {
    match node.kind() {
        "integer" => simple("int"),
        "float" => simple("float"),
        "true" | "false" => simple("bool"),
        "string" | "concatenated_string" => {
            let quote = node_text(node, text).find(['"', '\'']).unwrap_or(0);
            if node_text(node, text)[..quote].contains(['b', 'B']) {
                simple("bytes")
            } else {
                simple("str")
            }
        }
        "list" | "list_comprehension" => simple("list"),
        "dictionary" | "dictionary_comprehension" => simple("dict"),
        "set" | "set_comprehension" => simple("set"),
        "tuple" => simple("tuple"),
        "unary_operator" => node
            .child_by_field_name("argument")
            .and_then(|a| literal_type(a, text))
            .filter(|t| t.head == "int" || t.head == "float"),
        "parenthesized_expression" => node.named_child(0).and_then(|c| literal_type(c, text)),
        _ => None,
    }
}

fn callee_name<'a>(call: Node<'_>, text: &'a str) -> Option<&'a str> {
    let f = call.child_by_field_name("function")?;
    match f.kind() {
        "identifier" => Some(node_text(f, text)),
        "attribute" => Some(node_text(f.child_by_field_name("attribute")?, text)),
        _ => None,
    }
}

#[derive(Debug, Clone)]
struct Param {
    name: Option<String>,
    ty: Option<PyType>,
}

#[derive(Debug, Clone)]
struct Sig {
    params: Vec<Param>,
    ret: Option<PyType>,
}

impl Sig {
    /// Parameters bound by call arguments (the receiver is implicit).
    fn call_params(&self) -> &[Param] {
        match self.params.first().and_then(|p| p.name.as_deref()) {
            Some("self" | "cls") => &self.params[1..],
            _ => &self.params,
        }
    }

    fn param_for(&self, arg: &ArgPos) -> Option<&Param> {
        match arg {
            ArgPos::Positional(k) => self.call_params().get(*k).filter(|p| p.name.is_some()),
            ArgPos::Keyword(name) => self.params.iter().find(|p| p.name.as_deref() == Some(name)),
        }
    }
}

/// Parameter list of a def: name (None for `*args`/`**kw` and separators
/// are skipped), annotation node, default node.
fn def_params<'t>(def: Node<'t>, text: &str) -> Vec<(Option<String>, Option<Node<'t>>, Option<Node<'t>>)> {
    let Some(params) = def.child_by_field_name("parameters") else { return Vec::new() };
    let mut cursor = params.walk();
    params
        .named_children(&mut cursor)
        .filter_map(|p| {
            let name = |n: Option<Node<'_>>| n.filter(|n| n.kind() == "identifier").map(|n| node_text(n, text).to_string());
            match p.kind() {
                "identifier" => Some((name(Some(p)), None, None)),
                "typed_parameter" => Some((name(p.named_child(0)), p.child_by_field_name("type"), None)),
                "default_parameter" => Some((name(p.child_by_field_name("name")), None, p.child_by_field_name("value"))),
                "typed_default_parameter" => Some((
                    name(p.child_by_field_name("name")),
                    p.child_by_field_name("type"),
                    p.child_by_field_name("value"),
                )),
                "list_splat_pattern" | "dictionary_splat_pattern" => Some((None, None, None)),
                _ => None,
            }
        })
        .collect()
}

fn signature_of(def: Node<'_>, text: &str) -> Sig {
    Sig {
        params: def_params(def, text)
            .into_iter()
            .map(|(name, ty, _)| Param { name, ty: ty.and_then(|t| annotation(t, text)) })
            .collect(),
        ret: def.child_by_field_name("return_type").and_then(|t| annotation(t, text)),
    }
}

/// Typed names visible in the context segments.
#[derive(Default)]
struct Knowledge {
    sigs: HashMap<String, Sig>,
    vars: HashMap<String, PyType>,
    classes: HashSet<String>,
}

impl Knowledge {
    fn gather(request: &PredictionRequest) -> Self {
        let mut k = Knowledge::default();
        for segment in [&request.preamble, &request.usees, &request.main_code, &request.users] {
            let tree = parse_tree(segment);
            walk(tree.root_node(), &mut |n| {
                if n.kind() == "class_definition" {
                    if let Some(name) = n.child_by_field_name("name") {
                        k.classes.insert(node_text(name, segment).to_string());
                    }
                }
                true
            });
        }
        let tree = parse_tree(&request.preamble);
        walk(tree.root_node(), &mut |n| {
            if n.kind() == "import_from_statement" {
                let mut cursor = n.walk();
                for name in n.children_by_field_name("name", &mut cursor) {
                    let bound = match name.kind() {
                        "aliased_import" => name.child_by_field_name("alias").map(|a| node_text(a, &request.preamble)),
                        _ => node_text(name, &request.preamble).rsplit('.').next(),
                    };
                    if let Some(b) = bound.filter(|b| b.starts_with(|c: char| c.is_ascii_uppercase())) {
                        k.classes.insert(b.to_string());
                    }
                }
            }
            true
        });
        // Later items sit closer to the main code, so they win.
        let text = &request.usees;
        let tree = parse_tree(text);
        walk(tree.root_node(), &mut |n| {
            match n.kind() {
                "function_definition" => {
                    if let Some(name) = n.child_by_field_name("name") {
                        k.sigs.insert(node_text(name, text).to_string(), signature_of(n, text));
                    }
                }
                "assignment" => {
                    let left = n.child_by_field_name("left").filter(|l| l.kind() == "identifier");
                    if let (Some(left), Some(ty)) = (left, n.child_by_field_name("type").and_then(|t| annotation(t, text))) {
                        k.vars.insert(node_text(left, text).to_string(), ty);
                    }
                }
                _ => {}
            }
            true
        });
        k
    }

    fn constructor(&self, node: Node<'_>, text: &str) -> Option<PyType> {
        if node.kind() != "call" {
            return None;
        }
        let f = node.child_by_field_name("function")?;
        let last = callee_name(node, text)?;
        if !matches!(f.kind(), "identifier" | "attribute") || !self.classes.contains(last) {
            return None;
        }
        PyType::parse(node_text(f, text)).ok()
    }
}

/// Local names of one function body.
#[derive(Default)]
struct Scope<'t> {
    params: HashMap<String, Option<PyType>>,
    annotated: HashMap<String, PyType>,
    assigned: HashMap<String, Node<'t>>,
    returns: Vec<Node<'t>>,
    yields: bool,
}

impl<'t> Scope<'t> {
    fn of(def: Node<'t>, text: &str) -> Self {
        let mut s = Scope::default();
        for (name, ty, _) in def_params(def, text) {
            if let Some(name) = name {
                s.params.insert(name, ty.and_then(|t| annotation(t, text)));
            }
        }
        if let Some(body) = def.child_by_field_name("body") {
            walk(body, &mut |n| {
                if is_scope(n) {
                    return false;
                }
                match n.kind() {
                    "return_statement" => s.returns.extend(n.named_child(0)),
                    "yield" => s.yields = true,
                    "assignment" => {
                        if let Some(left) = n.child_by_field_name("left").filter(|l| l.kind() == "identifier") {
                            let name = node_text(left, text).to_string();
                            if let Some(ty) = n.child_by_field_name("type").and_then(|t| annotation(t, text)) {
                                s.annotated.entry(name.clone()).or_insert(ty);
                            }
                            if let Some(right) = n.child_by_field_name("right") {
                                s.assigned.entry(name).or_insert(right);
                            }
                        }
                    }
                    _ => {}
                }
                true
            });
        }
        s
    }

    fn explicit(&self, name: &str) -> Option<PyType> {
        self.annotated.get(name).cloned().or_else(|| self.params.get(name).cloned().flatten())
    }
}

fn enclosing_def(mut node: Node<'_>) -> Option<Node<'_>> {
    while let Some(p) = node.parent() {
        if p.kind() == "function_definition" {
            return Some(p);
        }
        node = p;
    }
    None
}

enum ArgPos {
    Positional(usize),
    Keyword(String),
}

/// The argument of `call` bound to `pos`.
fn argument_at<'t>(call: Node<'t>, pos: &ArgPos, text: &str) -> Option<Node<'t>> {
    let args = call.child_by_field_name("arguments")?;
    let mut cursor = args.walk();
    let children: Vec<Node<'t>> = args.named_children(&mut cursor).filter(|c| c.kind() != "comment").collect();
    match pos {
        ArgPos::Positional(k) => {
            let positional: Vec<Node<'t>> =
                children.iter().copied().take_while(|c| !matches!(c.kind(), "keyword_argument" | "list_splat" | "dictionary_splat")).collect();
            positional.get(*k).copied()
        }
        ArgPos::Keyword(name) => children.into_iter().find_map(|c| {
            (c.kind() == "keyword_argument" && c.child_by_field_name("name").is_some_and(|n| node_text(n, text) == name))
                .then(|| c.child_by_field_name("value"))
                .flatten()
        }),
    }
}

/// Where the argument passed in `call` at `arg` lands, as an [`ArgPos`].
fn position_in_call(call: Node<'_>, arg: Node<'_>, text: &str) -> Option<ArgPos> {
    let args = call.child_by_field_name("arguments")?;
    let mut cursor = args.walk();
    let mut k = 0;
    for c in args.named_children(&mut cursor) {
        match c.kind() {
            "keyword_argument" => {
                if c.child_by_field_name("value") == Some(arg) {
                    return Some(ArgPos::Keyword(node_text(c.child_by_field_name("name")?, text).to_string()));
                }
            }
            "list_splat" | "dictionary_splat" => return None,
            "comment" => {}
            _ => {
                if c == arg {
                    return Some(ArgPos::Positional(k));
                }
                k += 1;
            }
        }
    }
    None
}

struct Heuristic<'r> {
    k: Knowledge,
    text: &'r str,
}

impl<'r> Heuristic<'r> {
    /// Rule 1 for an expression: literal, constructor call, or a local whose
    /// value or annotation says so.
    fn local_evidence(&self, node: Node<'_>, scope: Option<&Scope<'_>>, hops: usize) -> Option<PyType> {
        if let Some(t) = literal_type(node, self.text).or_else(|| self.k.constructor(node, self.text)) {
            return Some(t);
        }
        if node.kind() != "identifier" || hops >= MAX_HOPS {
            return None;
        }
        let scope = scope?;
        let name = node_text(node, self.text);
        scope
            .explicit(name)
            .or_else(|| scope.assigned.get(name).and_then(|v| self.local_evidence(*v, Some(scope), hops + 1)))
    }

    /// Rule 3 for an expression: a call, attribute, or name typed by a usee
    /// signature, possibly through local assignments.
    fn usee_flow(&self, node: Node<'_>, scope: Option<&Scope<'_>>, hops: usize) -> Option<PyType> {
        match node.kind() {
            "call" => self.k.sigs.get(callee_name(node, self.text)?)?.ret.clone(),
            "attribute" => self.k.vars.get(node_text(node.child_by_field_name("attribute")?, self.text)).cloned(),
            "identifier" if hops < MAX_HOPS => {
                let name = node_text(node, self.text);
                match scope.and_then(|s| s.assigned.get(name)) {
                    Some(v) => self.usee_flow(*v, scope, hops + 1),
                    None if scope.is_some_and(|s| s.params.contains_key(name)) => None,
                    None => self.k.vars.get(name).cloned(),
                }
            }
            "parenthesized_expression" | "await" => self.usee_flow(node.named_child(0)?, scope, hops),
            _ => None,
        }
    }

    /// Rule 3 for a parameter: the typed parameter of a usee it is passed to.
    fn passed_to_usee(&self, def: Node<'_>, name: &str) -> Option<PyType> {
        let body = def.child_by_field_name("body")?;
        let mut found = None;
        walk(body, &mut |n| {
            if found.is_some() {
                return false;
            }
            if n.kind() == "identifier" && node_text(n, self.text) == name {
                let call = n.parent().and_then(|a| if a.kind() == "keyword_argument" { a.parent() } else { Some(a) });
                let call = call.filter(|c| c.kind() == "argument_list").and_then(|c| c.parent());
                if let Some(call) = call {
                    let sig = callee_name(call, self.text).and_then(|c| self.k.sigs.get(c));
                    let pos = position_in_call(call, n, self.text);
                    if let (Some(sig), Some(pos)) = (sig, pos) {
                        found = sig.param_for(&pos).and_then(|p| p.ty.clone());
                    }
                }
            }
            true
        });
        found
    }

    /// Rule 4: explicitly typed arguments passed to `fname` in the user
    /// segment.
    fn user_flow(&self, users: &str, fname: &str, pos: &ArgPos) -> Option<PyType> {
        let tree = parse_tree(users);
        let mut calls = Vec::new();
        walk(tree.root_node(), &mut |n| {
            if n.kind() == "call" && callee_name(n, users) == Some(fname) {
                calls.push(n);
            }
            true
        });
        let reader = Heuristic { k: Knowledge { sigs: self.k.sigs.clone(), vars: self.k.vars.clone(), classes: HashSet::new() }, text: users };
        calls.into_iter().find_map(|call| {
            let arg = argument_at(call, pos, users)?;
            let scope = enclosing_def(call).map(|d| Scope::of(d, users));
            match arg.kind() {
                "identifier" => {
                    let name = node_text(arg, users);
                    scope.as_ref().and_then(|s| s.explicit(name)).or_else(|| reader.usee_flow(arg, scope.as_ref(), 0))
                }
                _ => reader.usee_flow(arg, scope.as_ref(), 0),
            }
        })
    }
}

fn name_convention(name: &str) -> Option<PyType> {
    if name == "path" || name.ends_with("_path") {
        simple("str")
    } else if name.starts_with("is_") || name.starts_with("has_") {
        simple("bool")
    } else if name.starts_with("n_") || name.starts_with("num_") {
        simple("int")
    } else {
        None
    }
}

/// True when the def's first parameter is an implicit receiver.
fn has_receiver(def: Node<'_>, text: &str) -> bool {
    let in_class = def
        .parent()
        .map(|p| if p.kind() == "decorated_definition" { p.parent() } else { Some(p) })
        .flatten()
        .and_then(|b| b.parent())
        .is_some_and(|c| c.kind() == "class_definition");
    let static_method = def.parent().is_some_and(|p| {
        p.kind() == "decorated_definition" && node_text(p, text).trim_start().starts_with("@staticmethod")
    });
    in_class && !static_method
}

fn heuristic_types(request: &PredictionRequest) -> Vec<PyType> {
    let n = request.marker_count;
    let mut main = request.main_code.clone();
    for i in 0..n {
        main = main.replace(&marker(request.marker_base + i), &placeholder(i));
    }
    let tree = parse_tree(&main);
    let mut sites: Vec<Option<Node<'_>>> = vec![None; n];
    walk(tree.root_node(), &mut |node| {
        if node.kind() == "identifier" {
            if let Some(i) = marker_index(node_text(node, &main)).filter(|i| *i < n) {
                sites[i].get_or_insert(node);
            }
        }
        true
    });
    let h = Heuristic { k: Knowledge::gather(request), text: &main };
    sites
        .into_iter()
        .map(|site| site.and_then(|s| predict_site(&h, s, &request.users)).unwrap_or_else(PyType::any))
        .collect()
}

fn predict_site(h: &Heuristic<'_>, site: Node<'_>, users: &str) -> Option<PyType> {
    let text = h.text;
    let ty = site.parent().filter(|p| p.kind() == "type")?;
    let holder = ty.parent()?;
    match holder.kind() {
        "typed_parameter" | "typed_default_parameter" => {
            let def = holder.parent().and_then(|p| p.parent()).filter(|d| d.kind() == "function_definition")?;
            let name_node = match holder.kind() {
                "typed_parameter" => holder.named_child(0),
                _ => holder.child_by_field_name("name"),
            }
            .filter(|n| n.kind() == "identifier")?;
            let name = node_text(name_node, text);
            let default = holder.child_by_field_name("value").filter(|v| v.kind() != "none");
            if let Some(t) = default.and_then(|v| literal_type(v, text)) {
                return Some(t);
            }
            if let Some(t) = name_convention(name) {
                return Some(t);
            }
            if let Some(t) = h.passed_to_usee(def, name) {
                return Some(t);
            }
            let fname = node_text(def.child_by_field_name("name")?, text);
            let skip = usize::from(has_receiver(def, text));
            let index = def_params(def, text).iter().position(|(n, _, _)| n.as_deref() == Some(name))?;
            h.user_flow(users, fname, &ArgPos::Positional(index.checked_sub(skip)?))
                .or_else(|| h.user_flow(users, fname, &ArgPos::Keyword(name.to_string())))
        }
        "function_definition" => {
            let scope = Scope::of(holder, text);
            let fname = node_text(holder.child_by_field_name("name")?, text);
            if scope.returns.is_empty() && !scope.yields {
                return Some(PyType::none());
            }
            if !scope.yields {
                if let Some(t) = scope.returns.iter().find_map(|r| h.local_evidence(*r, Some(&scope), 0)) {
                    return Some(t);
                }
            }
            if fname.starts_with("is_") || fname.starts_with("has_") {
                return simple("bool");
            }
            if scope.yields {
                return None;
            }
            scope.returns.iter().find_map(|r| h.usee_flow(*r, Some(&scope), 0))
        }
        "assignment" => {
            let left = holder.child_by_field_name("left")?;
            let right = holder.child_by_field_name("right");
            if let Some(t) = right.and_then(|r| h.local_evidence(r, None, 0)) {
                return Some(t);
            }
            if let Some(t) = name_convention(node_text(left, text)) {
                return Some(t);
            }
            right.and_then(|r| h.usee_flow(r, None, 0))
        }
        _ => None,
    }
}
