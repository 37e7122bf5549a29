use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::Path;

use tree_sitter::{Node, Parser, Tree};

use super::{
    AnnotationSlot, ClassDecl, CodeElement, ElementId, ElementKind, ImportBinding, ImportItem, ModuleSource,
    NameRef, RefRoot, Signature, SignatureParam, Site, SlotRole, SlotSite, Star,
};
use crate::pytype::PyType;

thread_local! {
    static PARSER: RefCell<Parser> = RefCell::new({
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("python grammar is compatible with the tree-sitter runtime");
        parser
    });
}

pub(crate) fn parse_tree(text: &str) -> Tree {
    PARSER.with(|p| p.borrow_mut().parse(text, None).expect("parser has a language and no timeout"))
}

pub(crate) fn node_text<'a>(node: Node<'_>, text: &'a str) -> &'a str {
    &text[node.byte_range()]
}

pub(crate) fn line_start(text: &str, offset: usize) -> usize {
    text[..offset].rfind('\n').map_or(0, |i| i + 1)
}

fn site_of(node: Node<'_>) -> Site {
    let p = node.start_position();
    Site { line: p.row + 1, column: p.column + 1, offset: node.start_byte() }
}

fn named_children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

fn first_syntax_error(node: Node<'_>) -> Option<Node<'_>> {
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    if !node.has_error() {
        return None;
    }
    let mut cursor = node.walk();
    let children: Vec<Node<'_>> = node.children(&mut cursor).collect();
    children.into_iter().find_map(first_syntax_error)
}

fn find_kind<'t>(node: Node<'t>, kinds: &[&str]) -> Option<Node<'t>> {
    if kinds.contains(&node.kind()) {
        return Some(node);
    }
    let mut cursor = node.walk();
    let children: Vec<Node<'t>> = node.children(&mut cursor).collect();
    children.into_iter().find_map(|c| find_kind(c, kinds))
}

/// Parses one module. Returns a human-readable reason when the file must be
/// skipped (syntax errors, legacy Python 2 statements).
pub fn parse_module(name: &str, path: &Path, text: &str, is_package: bool) -> Result<ModuleSource, String> {
    let tree = parse_tree(text);
    let root = tree.root_node();
    if let Some(err) = first_syntax_error(root) {
        let p = err.start_position();
        return Err(format!("syntax error at line {}, column {}", p.row + 1, p.column + 1));
    }
    if let Some(legacy) = find_kind(root, &["print_statement", "exec_statement"]) {
        return Err(format!(
            "unsupported Python 2 syntax ({}) at line {}",
            legacy.kind(),
            legacy.start_position().row + 1
        ));
    }

    let mut ctx = ModuleBuilder { module: name, text, imports: Vec::new(), classes: Vec::new(), elements: Vec::new(), type_vars: Vec::new(), other_bindings: BTreeSet::new() };
    ctx.collect_scope(root, &[]);
    for child in named_children(root) {
        ctx.collect_imports(child);
    }

    let mut elements = ctx.elements;
    elements.sort_by_key(CodeElement::offset);
    let mut seen = BTreeSet::new();
    elements.retain(|e| seen.insert(e.id.clone()));

    Ok(ModuleSource {
        name: name.to_string(),
        path: path.to_path_buf(),
        text: text.to_string(),
        is_package,
        imports: ctx.imports,
        classes: ctx.classes,
        elements,
        type_var_decls: ctx.type_vars,
        other_bindings: ctx.other_bindings,
    })
}

#[derive(Clone)]
struct ClassCtx {
    path: String,
    header: String,
}

struct ModuleBuilder<'a> {
    module: &'a str,
    text: &'a str,
    imports: Vec<ImportItem>,
    classes: Vec<ClassDecl>,
    elements: Vec<CodeElement>,
    type_vars: Vec<String>,
    other_bindings: BTreeSet<String>,
}

fn is_main_guard(node: Node<'_>, text: &str) -> bool {
    let Some(cond) = node.child_by_field_name("condition") else { return false };
    let compact: String = node_text(cond, text).chars().filter(|c| !c.is_whitespace()).collect();
    let compact = compact.replace('\'', "\"");
    compact == "__name__==\"__main__\"" || compact == "\"__main__\"==__name__"
}

fn decorator_names<'t>(decorated: Option<Node<'t>>, text: &str) -> Vec<String> {
    let Some(d) = decorated else { return Vec::new() };
    named_children(d)
        .into_iter()
        .filter(|c| c.kind() == "decorator")
        .map(|c| node_text(c, text).trim_start_matches('@').trim().to_string())
        .collect()
}

impl<'a> ModuleBuilder<'a> {
    fn stmt_text(&self, start: usize, end: usize) -> String {
        self.text[line_start(self.text, start)..end].to_string()
    }

    /// Collects classes and elements among the statements of a module or class
    /// body. `owners` is empty at module level.
    fn collect_scope(&mut self, body: Node<'_>, owners: &[ClassCtx]) {
        let mut variables: BTreeMap<String, Vec<(Node<'_>, Node<'_>)>> = BTreeMap::new();
        let mut defined: BTreeSet<String> = BTreeSet::new();
        let mut order: Vec<String> = Vec::new();

        for stmt in named_children(body) {
            let (outer, def) = if stmt.kind() == "decorated_definition" {
                match stmt.child_by_field_name("definition") {
                    Some(d) => (stmt, d),
                    None => continue,
                }
            } else {
                (stmt, stmt)
            };
            match def.kind() {
                "function_definition" => {
                    let decorated = (outer.kind() == "decorated_definition").then_some(outer);
                    if let Some(name) = self.function_element(def, decorated, owners) {
                        defined.insert(name);
                    }
                }
                "class_definition" => {
                    if let Some(name) = self.class_decl(def, outer, owners) {
                        defined.insert(name);
                    }
                }
                "expression_statement" => {
                    let Some(inner) = stmt.named_child(0) else { continue };
                    if !matches!(inner.kind(), "assignment" | "augmented_assignment") {
                        continue;
                    }
                    let Some(left) = inner.child_by_field_name("left") else { continue };
                    if left.kind() != "identifier" {
                        self.bind_other_targets(left, owners);
                        continue;
                    }
                    let chained = inner.child_by_field_name("right").is_some_and(|r| r.kind() == "assignment");
                    if chained {
                        self.bind_other_targets(left, owners);
                        continue;
                    }
                    let name = node_text(left, self.text).to_string();
                    if owners.is_empty() && inner.kind() == "assignment" && self.is_type_var_decl(inner) {
                        self.type_vars.push(node_text(stmt, self.text).to_string());
                        self.other_bindings.insert(name);
                        continue;
                    }
                    if !variables.contains_key(&name) {
                        order.push(name.clone());
                    }
                    variables.entry(name).or_default().push((stmt, inner));
                }
                _ => {}
            }
        }

        for name in order {
            if defined.contains(&name) {
                continue;
            }
            let stmts = &variables[&name];
            if stmts.iter().all(|(_, a)| a.kind() == "augmented_assignment") {
                continue;
            }
            self.variable_element(&name, stmts, owners);
        }
    }

    fn bind_other_targets(&mut self, left: Node<'_>, owners: &[ClassCtx]) {
        if !owners.is_empty() {
            return;
        }
        let mut names = BTreeSet::new();
        bind_pattern_names(left, self.text, &mut names);
        self.other_bindings.extend(names);
    }

    fn is_type_var_decl(&self, assignment: Node<'_>) -> bool {
        let Some(right) = assignment.child_by_field_name("right") else { return false };
        if right.kind() != "call" {
            return false;
        }
        let Some(func) = right.child_by_field_name("function") else { return false };
        let callee = node_text(func, self.text);
        let last = callee.rsplit('.').next().unwrap_or(callee);
        matches!(last, "TypeVar" | "ParamSpec" | "TypeVarTuple")
    }

    fn class_decl(&mut self, def: Node<'_>, outer: Node<'_>, owners: &[ClassCtx]) -> Option<String> {
        let name = node_text(def.child_by_field_name("name")?, self.text).to_string();
        let body = def.child_by_field_name("body")?;
        let mut cursor = def.walk();
        let colon_end = def
            .children(&mut cursor)
            .filter(|c| c.kind() == ":" && c.end_byte() <= body.start_byte())
            .last()
            .map_or(body.start_byte(), |c| c.end_byte());
        let header = self.stmt_text(outer.start_byte(), colon_end);
        let bases = def
            .child_by_field_name("superclasses")
            .map(|sc| {
                named_children(sc)
                    .into_iter()
                    .filter(|c| c.kind() != "keyword_argument" && c.kind() != "comment")
                    .map(|c| node_text(c, self.text).to_string())
                    .collect()
            })
            .unwrap_or_default();
        let path = match owners.last() {
            Some(o) => format!("{}.{}", o.path, name),
            None => name.clone(),
        };
        self.classes.push(ClassDecl { name: name.clone(), path: path.clone(), header: header.clone(), bases, offset: outer.start_byte() });
        let mut nested = owners.to_vec();
        nested.push(ClassCtx { path, header });
        self.collect_scope(body, &nested);
        Some(name)
    }

    fn element_id(&self, name: &str, owners: &[ClassCtx]) -> (String, ElementId) {
        let path = match owners.last() {
            Some(o) => format!("{}.{}", o.path, name),
            None => name.to_string(),
        };
        let id = ElementId::new(self.module, &path);
        (path, id)
    }

    fn function_element(&mut self, def: Node<'_>, decorated: Option<Node<'_>>, owners: &[ClassCtx]) -> Option<String> {
        let text = self.text;
        let name = node_text(def.child_by_field_name("name")?, text).to_string();
        let decorators = decorator_names(decorated, text);
        if decorators.iter().any(|d| d == "overload" || d.ends_with(".overload")) {
            return Some(name);
        }
        let params_node = def.child_by_field_name("parameters")?;
        let is_method = !owners.is_empty();
        let is_static = decorators.iter().any(|d| d == "staticmethod");

        let mut slots = Vec::new();
        let mut sig_params = Vec::new();
        let mut receiver = None;
        let mut first = true;
        for param in named_children(params_node) {
            if param.kind() == "comment" {
                continue;
            }
            let Some(info) = parameter_info(param, text) else { continue };
            let skip_receiver = is_method && !is_static && first && info.name_node.is_some();
            if info.name_node.is_some() {
                first = false;
            }
            let mut slot_index = None;
            if let (Some(name_node), false) = (info.name_node, skip_receiver) {
                let name_end = name_node.end_byte();
                let annotation = info.type_node.map(|t| name_end..t.end_byte());
                let default_gap = info.default_node.map(|d| {
                    let start = info.type_node.map_or(name_end, |t| t.end_byte());
                    start..d.start_byte()
                });
                let (existing, unparsed) = parse_existing(info.type_node, text);
                let index = slots.len();
                slots.push(AnnotationSlot {
                    index,
                    role: SlotRole::Parameter { name: node_text(name_node, text).to_string(), star: info.star },
                    existing_annotation: existing,
                    unparsed_annotation: unparsed,
                    site: SlotSite::Parameter { name_end, annotation, default_gap },
                });
                slot_index = Some(index);
            }
            if skip_receiver {
                receiver = info.name_node.map(|n| node_text(n, text).to_string());
            }
            sig_params.push(SignatureParam {
                text: info.display,
                default: info.default_node.map(|d| node_text(d, text).to_string()),
                slot: slot_index,
            });
        }
        let params_end = params_node.end_byte();
        let return_type = def.child_by_field_name("return_type");
        let (existing, unparsed) = parse_existing(return_type, text);
        slots.push(AnnotationSlot {
            index: slots.len(),
            role: SlotRole::Return,
            existing_annotation: existing,
            unparsed_annotation: unparsed,
            site: SlotSite::Return { params_end, annotation: return_type.map(|r| params_end..r.end_byte()) },
        });

        let outer = decorated.unwrap_or(def);
        let start = line_start(text, outer.start_byte());
        let span = start..outer.end_byte();

        let mut refs = RefCollector::new(text);
        if let Some(d) = decorated {
            for c in named_children(d) {
                if c.kind() == "decorator" {
                    refs.walk(c);
                }
            }
        }
        refs.params(params_node);
        if let Some(body) = def.child_by_field_name("body") {
            refs.walk(body);
        }

        let mut cursor = def.walk();
        let is_async = def.children(&mut cursor).any(|c| c.kind() == "async");
        let (path, id) = self.element_id(&name, owners);
        self.elements.push(CodeElement {
            id,
            kind: if is_method { ElementKind::Method } else { ElementKind::Function },
            module: self.module.to_string(),
            path,
            name: name.clone(),
            source: text[span.clone()].to_string(),
            owner_headers: owners.iter().map(|o| o.header.clone()).collect(),
            owner: owners.last().map(|o| o.path.clone()),
            slots,
            receiver,
            locals: refs.local_names(),
            local_imports: refs.imports,
            refs: refs.refs,
            signature: Some(Signature { is_async, params: sig_params }),
            spans: vec![span],
        });
        Some(name)
    }

    fn variable_element(&mut self, name: &str, stmts: &[(Node<'_>, Node<'_>)], owners: &[ClassCtx]) {
        let text = self.text;
        let primary = stmts
            .iter()
            .find(|(_, a)| a.kind() == "assignment" && a.child_by_field_name("type").is_some())
            .or_else(|| stmts.iter().find(|(_, a)| a.kind() == "assignment"))
            .copied();
        let Some((_, primary_assign)) = primary else { return };
        let left = primary_assign.child_by_field_name("left").expect("assignment has a target");
        let type_node = primary_assign.child_by_field_name("type");
        let name_end = left.end_byte();
        let others = stmts
            .iter()
            .filter(|(_, a)| a.id() != primary_assign.id())
            .filter_map(|(_, a)| {
                let l = a.child_by_field_name("left")?;
                let t = a.child_by_field_name("type")?;
                Some(l.end_byte()..t.end_byte())
            })
            .collect();
        let (existing, unparsed) = parse_existing(type_node, text);
        let slot = AnnotationSlot {
            index: 0,
            role: SlotRole::Variable,
            existing_annotation: existing,
            unparsed_annotation: unparsed,
            site: SlotSite::Variable {
                name_end,
                annotation: type_node.map(|t| name_end..t.end_byte()),
                has_value: primary_assign.child_by_field_name("right").is_some(),
                others,
            },
        };

        let mut refs = RefCollector::new(text);
        let mut spans: Vec<Range<usize>> = Vec::new();
        for (stmt, assign) in stmts {
            spans.push(line_start(text, stmt.start_byte())..stmt.end_byte());
            if let Some(right) = assign.child_by_field_name("right") {
                refs.walk(right);
            }
        }
        let source = spans.iter().map(|r| &text[r.clone()]).collect::<Vec<_>>().join("\n");
        let (path, id) = self.element_id(name, owners);
        self.elements.push(CodeElement {
            id,
            kind: if owners.is_empty() { ElementKind::GlobalVar } else { ElementKind::ClassAttr },
            module: self.module.to_string(),
            path,
            name: name.to_string(),
            source,
            owner_headers: owners.iter().map(|o| o.header.clone()).collect(),
            owner: owners.last().map(|o| o.path.clone()),
            slots: vec![slot],
            receiver: None,
            locals: refs.local_names(),
            local_imports: refs.imports,
            refs: refs.refs,
            signature: None,
            spans,
        });
    }

    /// Imports at module level, including those nested in top-level `if` and
    /// `try` blocks (but not in a `__main__` guard).
    fn collect_imports(&mut self, node: Node<'_>) {
        match node.kind() {
            "import_statement" | "import_from_statement" | "future_import_statement" => {
                let bindings = import_bindings(node, self.text);
                self.imports.push(ImportItem {
                    text: node_text(node, self.text).to_string(),
                    bindings,
                    offset: node.start_byte(),
                });
            }
            "if_statement" if is_main_guard(node, self.text) => {}
            "if_statement" | "try_statement" | "block" | "elif_clause" | "else_clause" | "except_clause"
            | "finally_clause" | "with_statement" => {
                for child in named_children(node) {
                    self.collect_imports(child);
                }
            }
            _ => {}
        }
    }
}

struct ParamInfo<'t> {
    name_node: Option<Node<'t>>,
    type_node: Option<Node<'t>>,
    default_node: Option<Node<'t>>,
    star: Star,
    display: String,
}

fn splat_inner<'t>(node: Node<'t>) -> Option<Node<'t>> {
    named_children(node).into_iter().find(|c| c.kind() == "identifier")
}

fn parameter_info<'t>(param: Node<'t>, text: &str) -> Option<ParamInfo<'t>> {
    let plain = |name_node: Node<'t>, star: Star| {
        let prefix = match star {
            Star::None => "",
            Star::Args => "*",
            Star::Kwargs => "**",
        };
        (Some(name_node), star, format!("{prefix}{}", node_text(name_node, text)))
    };
    let (name_node, star, display, type_node, default_node) = match param.kind() {
        "identifier" => {
            let (n, s, d) = plain(param, Star::None);
            (n, s, d, None, None)
        }
        "list_splat_pattern" => {
            let (n, s, d) = plain(splat_inner(param)?, Star::Args);
            (n, s, d, None, None)
        }
        "dictionary_splat_pattern" => {
            let (n, s, d) = plain(splat_inner(param)?, Star::Kwargs);
            (n, s, d, None, None)
        }
        "typed_parameter" => {
            let inner = param.named_child(0)?;
            let (n, s, d) = match inner.kind() {
                "identifier" => plain(inner, Star::None),
                "list_splat_pattern" => plain(splat_inner(inner)?, Star::Args),
                "dictionary_splat_pattern" => plain(splat_inner(inner)?, Star::Kwargs),
                _ => return None,
            };
            (n, s, d, param.child_by_field_name("type"), None)
        }
        "default_parameter" | "typed_default_parameter" => {
            let name = param.child_by_field_name("name")?;
            if name.kind() != "identifier" {
                return None;
            }
            let (n, s, d) = plain(name, Star::None);
            (n, s, d, param.child_by_field_name("type"), param.child_by_field_name("value"))
        }
        "keyword_separator" => (None, Star::None, "*".to_string(), None, None),
        "positional_separator" => (None, Star::None, "/".to_string(), None, None),
        _ => return None,
    };
    Some(ParamInfo { name_node, type_node, default_node, star, display })
}

fn parse_existing(type_node: Option<Node<'_>>, text: &str) -> (Option<PyType>, Option<String>) {
    match type_node {
        None => (None, None),
        Some(t) => {
            let raw = node_text(t, text);
            match PyType::parse(raw) {
                Ok(ty) => (Some(ty), None),
                Err(_) => (None, Some(raw.to_string())),
            }
        }
    }
}

fn dotted(node: Node<'_>, text: &str) -> String {
    node_text(node, text).chars().filter(|c| !c.is_whitespace()).collect()
}

fn import_bindings(node: Node<'_>, text: &str) -> Vec<ImportBinding> {
    let mut out = Vec::new();
    let mut cursor = node.walk();
    match node.kind() {
        "import_statement" => {
            for name in node.children_by_field_name("name", &mut cursor) {
                match name.kind() {
                    "dotted_name" => out.push(ImportBinding::Module { module: dotted(name, text), alias: None }),
                    "aliased_import" => {
                        let module = name.child_by_field_name("name").map(|n| dotted(n, text)).unwrap_or_default();
                        let alias = name.child_by_field_name("alias").map(|a| node_text(a, text).to_string());
                        out.push(ImportBinding::Module { module, alias });
                    }
                    _ => {}
                }
            }
        }
        "import_from_statement" => {
            let (level, module) = match node.child_by_field_name("module_name") {
                Some(m) if m.kind() == "relative_import" => {
                    let mut level = 0;
                    let mut module = String::new();
                    for c in named_children(m) {
                        match c.kind() {
                            "import_prefix" => level = node_text(c, text).matches('.').count(),
                            "dotted_name" => module = dotted(c, text),
                            _ => {}
                        }
                    }
                    (level, module)
                }
                Some(m) => (0, dotted(m, text)),
                None => (0, String::new()),
            };
            if named_children(node).iter().any(|c| c.kind() == "wildcard_import") {
                out.push(ImportBinding::Wildcard { level, module });
                return out;
            }
            for name in node.children_by_field_name("name", &mut cursor) {
                let (n, alias) = match name.kind() {
                    "dotted_name" => (dotted(name, text), None),
                    "aliased_import" => (
                        name.child_by_field_name("name").map(|n| dotted(n, text)).unwrap_or_default(),
                        name.child_by_field_name("alias").map(|a| node_text(a, text).to_string()),
                    ),
                    _ => continue,
                };
                out.push(ImportBinding::From { level, module: module.clone(), name: n, alias });
            }
        }
        _ => {}
    }
    out
}

/// Identifiers bound by an assignment-like target pattern.
fn bind_pattern_names(node: Node<'_>, text: &str, out: &mut BTreeSet<String>) {
    match node.kind() {
        "identifier" => {
            out.insert(node_text(node, text).to_string());
        }
        "pattern_list" | "tuple_pattern" | "list_pattern" | "tuple" | "list" | "parenthesized_expression"
        | "list_splat_pattern" | "list_splat" | "expression_list" => {
            for c in named_children(node) {
                bind_pattern_names(c, text, out);
            }
        }
        _ => {}
    }
}

/// Walks an element's code, recording every name use and every locally bound
/// name. Annotations (`type` nodes) are skipped: they name types, not values.
struct RefCollector<'a> {
    text: &'a str,
    refs: Vec<NameRef>,
    locals: BTreeSet<String>,
    globals: BTreeSet<String>,
    imports: Vec<ImportBinding>,
}

impl<'a> RefCollector<'a> {
    fn new(text: &'a str) -> Self {
        RefCollector { text, refs: Vec::new(), locals: BTreeSet::new(), globals: BTreeSet::new(), imports: Vec::new() }
    }

    fn local_names(&self) -> BTreeSet<String> {
        self.locals.difference(&self.globals).cloned().collect()
    }

    fn push(&mut self, root: RefRoot, chain: Vec<String>, node: Node<'_>) {
        if !chain.is_empty() {
            self.refs.push(NameRef { root, chain, site: site_of(node) });
        }
    }

    fn bind_targets(&mut self, node: Node<'_>) {
        match node.kind() {
            "identifier" => {
                self.locals.insert(node_text(node, self.text).to_string());
            }
            "pattern_list" | "tuple_pattern" | "list_pattern" | "tuple" | "list" | "parenthesized_expression"
            | "list_splat_pattern" | "list_splat" | "expression_list" | "as_pattern_target" => {
                for c in named_children(node) {
                    self.bind_targets(c);
                }
            }
            _ => self.walk(node),
        }
    }

    fn params(&mut self, params: Node<'_>) {
        for p in named_children(params) {
            let Some(info) = parameter_info(p, self.text) else { continue };
            if let Some(n) = info.name_node {
                self.locals.insert(node_text(n, self.text).to_string());
            }
            if let Some(d) = info.default_node {
                self.walk(d);
            }
        }
    }

    fn attribute(&mut self, node: Node<'_>) {
        let mut attrs = Vec::new();
        let mut cur = node;
        while cur.kind() == "attribute" {
            match cur.child_by_field_name("attribute") {
                Some(a) => attrs.push(node_text(a, self.text).to_string()),
                None => break,
            }
            match cur.child_by_field_name("object") {
                Some(o) => cur = o,
                None => break,
            }
        }
        attrs.reverse();
        if cur.kind() == "identifier" {
            let mut chain = vec![node_text(cur, self.text).to_string()];
            chain.extend(attrs);
            self.push(RefRoot::Name, chain, node);
        } else {
            self.walk(cur);
            self.push(RefRoot::Expr, attrs, node);
        }
    }

    fn walk(&mut self, node: Node<'_>) {
        match node.kind() {
            "identifier" => {
                let name = node_text(node, self.text).to_string();
                self.push(RefRoot::Name, vec![name], node);
            }
            "attribute" => self.attribute(node),
            "type" | "comment" | "string_content" | "escape_sequence" => {}
            "keyword_argument" => {
                if let Some(v) = node.child_by_field_name("value") {
                    self.walk(v);
                }
            }
            "function_definition" => {
                if let Some(n) = node.child_by_field_name("name") {
                    self.locals.insert(node_text(n, self.text).to_string());
                }
                if let Some(p) = node.child_by_field_name("parameters") {
                    self.params(p);
                }
                if let Some(b) = node.child_by_field_name("body") {
                    self.walk(b);
                }
            }
            "class_definition" => {
                if let Some(n) = node.child_by_field_name("name") {
                    self.locals.insert(node_text(n, self.text).to_string());
                }
                if let Some(s) = node.child_by_field_name("superclasses") {
                    self.walk(s);
                }
                if let Some(b) = node.child_by_field_name("body") {
                    self.walk(b);
                }
            }
            "lambda" => {
                if let Some(p) = node.child_by_field_name("parameters") {
                    self.params(p);
                }
                if let Some(b) = node.child_by_field_name("body") {
                    self.walk(b);
                }
            }
            "import_statement" | "import_from_statement" => {
                for binding in import_bindings(node, self.text) {
                    if let Some(name) = binding.bound_name() {
                        self.locals.insert(name.to_string());
                    }
                    self.imports.push(binding);
                }
            }
            "global_statement" => {
                for c in named_children(node) {
                    if c.kind() == "identifier" {
                        self.globals.insert(node_text(c, self.text).to_string());
                    }
                }
            }
            "nonlocal_statement" => {}
            "assignment" | "augmented_assignment" => {
                if let Some(l) = node.child_by_field_name("left") {
                    self.bind_targets(l);
                }
                if let Some(r) = node.child_by_field_name("right") {
                    self.walk(r);
                }
            }
            "for_statement" | "for_in_clause" => {
                if let Some(l) = node.child_by_field_name("left") {
                    self.bind_targets(l);
                }
                let mut cursor = node.walk();
                let rest: Vec<Node<'_>> = node
                    .named_children(&mut cursor)
                    .filter(|c| Some(*c) != node.child_by_field_name("left"))
                    .collect();
                for c in rest {
                    self.walk(c);
                }
            }
            "named_expression" => {
                if let Some(n) = node.child_by_field_name("name") {
                    self.locals.insert(node_text(n, self.text).to_string());
                }
                if let Some(v) = node.child_by_field_name("value") {
                    self.walk(v);
                }
            }
            "as_pattern" => {
                for c in named_children(node) {
                    if c.kind() == "as_pattern_target" {
                        self.bind_targets(c);
                    } else {
                        self.walk(c);
                    }
                }
            }
            _ => {
                for c in named_children(node) {
                    self.walk(c);
                }
            }
        }
    }
}
