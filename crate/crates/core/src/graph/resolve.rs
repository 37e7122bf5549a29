use std::collections::{BTreeSet, HashMap};

use super::{Certainty, UsageEdge};
use crate::project::{CodeElement, ElementId, ElementKind, ImportBinding, ModuleSource, ProjectSource, RefRoot};

/// Re-export chains longer than this are treated as unresolvable.
const MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Binding {
    Element(ElementId),
    Class(String),
    Module(String),
    From { module: String, name: String },
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Target {
    Element(ElementId),
    Class { module: String, path: String },
    Module(String),
    /// A value of unknown type: attribute accesses on it are potential uses.
    Value,
    /// A library name or a builtin: no edges.
    Opaque,
}

#[derive(Default)]
struct ModuleScope {
    names: HashMap<String, Binding>,
    wildcards: Vec<String>,
}

#[derive(Debug, Clone)]
enum Member {
    Element(ElementId),
    Class(String),
}

pub(super) struct Resolver<'p> {
    project: &'p ProjectSource,
    scopes: HashMap<&'p str, ModuleScope>,
    module_names: BTreeSet<&'p str>,
    /// (module, class path) → member name → member.
    members: HashMap<(&'p str, &'p str), HashMap<&'p str, Member>>,
    /// Class member elements by name, in project order.
    by_name: HashMap<&'p str, Vec<ElementId>>,
}

/// Absolute module named by a (possibly relative) import inside `module`.
fn absolute(module: &ModuleSource, level: usize, name: &str) -> String {
    if level == 0 {
        return name.to_string();
    }
    let mut parts: Vec<&str> = module.package().split('.').filter(|s| !s.is_empty()).collect();
    for _ in 1..level {
        parts.pop();
    }
    if !name.is_empty() {
        parts.push(name);
    }
    parts.join(".")
}

fn import_binding(module: &ModuleSource, b: &ImportBinding) -> Option<(String, Binding)> {
    match b {
        ImportBinding::Module { module: m, alias } => {
            let target = match alias {
                Some(_) => m.clone(),
                None => m.split('.').next().unwrap_or(m).to_string(),
            };
            Some((b.bound_name()?.to_string(), Binding::Module(target)))
        }
        ImportBinding::From { level, module: m, name, .. } => Some((
            b.bound_name()?.to_string(),
            Binding::From { module: absolute(module, *level, m), name: name.clone() },
        )),
        ImportBinding::Wildcard { .. } => None,
    }
}

impl<'p> Resolver<'p> {
    pub(super) fn new(project: &'p ProjectSource) -> Self {
        let mut scopes = HashMap::new();
        let mut members: HashMap<(&str, &str), HashMap<&str, Member>> = HashMap::new();
        let mut by_name: HashMap<&str, Vec<ElementId>> = HashMap::new();
        for module in project.modules() {
            let mut scope = ModuleScope::default();
            for name in &module.other_bindings {
                scope.names.insert(name.clone(), Binding::External);
            }
            for item in &module.imports {
                for b in &item.bindings {
                    if let ImportBinding::Wildcard { level, module: m } = b {
                        scope.wildcards.push(absolute(module, *level, m));
                    } else if let Some((name, binding)) = import_binding(module, b) {
                        scope.names.insert(name, binding);
                    }
                }
            }
            for class in &module.classes {
                match class.path.rsplit_once('.') {
                    None => {
                        scope.names.insert(class.name.clone(), Binding::Class(class.path.clone()));
                    }
                    Some((owner, _)) => {
                        members
                            .entry((module.name.as_str(), owner))
                            .or_default()
                            .insert(class.name.as_str(), Member::Class(class.path.clone()));
                    }
                }
            }
            for element in &module.elements {
                match &element.owner {
                    None => {
                        scope.names.insert(element.name.clone(), Binding::Element(element.id.clone()));
                    }
                    Some(owner) => {
                        members
                            .entry((module.name.as_str(), owner.as_str()))
                            .or_default()
                            .insert(element.name.as_str(), Member::Element(element.id.clone()));
                        by_name.entry(element.name.as_str()).or_default().push(element.id.clone());
                    }
                }
            }
            scopes.insert(module.name.as_str(), scope);
        }
        let module_names = project.modules().iter().map(|m| m.name.as_str()).collect();
        Resolver { project, scopes, module_names, members, by_name }
    }

    /// True when `name` is a project module or a package prefix of one.
    fn is_module(&self, name: &str) -> bool {
        if self.module_names.contains(name) {
            return true;
        }
        let prefix = format!("{name}.");
        self.module_names.range(prefix.as_str()..).next().is_some_and(|m| m.starts_with(&prefix))
    }

    fn binding_target(&self, binding: &Binding, module: &str, depth: usize) -> Target {
        match binding {
            Binding::Element(id) => Target::Element(id.clone()),
            Binding::Class(path) => Target::Class { module: module.to_string(), path: path.clone() },
            Binding::Module(m) if self.is_module(m) => Target::Module(m.clone()),
            Binding::Module(_) | Binding::External => Target::Opaque,
            Binding::From { module: m, name } => self.module_attr(m, name, depth + 1),
        }
    }

    fn resolve_global(&self, module: &str, name: &str, depth: usize) -> Option<Target> {
        if depth > MAX_DEPTH {
            return None;
        }
        let scope = self.scopes.get(module)?;
        if let Some(b) = scope.names.get(name) {
            return Some(self.binding_target(b, module, depth));
        }
        if name.starts_with('_') {
            return None;
        }
        scope.wildcards.iter().find_map(|w| self.resolve_global(w, name, depth + 1))
    }

    /// `module.attr`: a submodule, a name bound in the module, or opaque.
    fn module_attr(&self, module: &str, attr: &str, depth: usize) -> Target {
        let sub = format!("{module}.{attr}");
        if self.is_module(&sub) {
            return Target::Module(sub);
        }
        self.resolve_global(module, attr, depth).unwrap_or(Target::Opaque)
    }

    /// Member lookup through the class and its project base classes.
    fn class_member(&self, module: &str, path: &str, attr: &str, seen: &mut BTreeSet<(String, String)>) -> Option<Target> {
        if !seen.insert((module.to_string(), path.to_string())) || seen.len() > MAX_DEPTH * 4 {
            return None;
        }
        let own = self.members.get(&(module, path)).and_then(|m| m.get(attr));
        match own {
            Some(Member::Element(id)) => return Some(Target::Element(id.clone())),
            Some(Member::Class(p)) => return Some(Target::Class { module: module.to_string(), path: p.clone() }),
            None => {}
        }
        let decl = self.project.module(module)?.class(path)?;
        for base in &decl.bases {
            let mut parts = base.split('.').map(str::trim);
            let Some(first) = parts.next() else { continue };
            let mut t = self.resolve_global(module, first, 0).unwrap_or(Target::Opaque);
            for part in parts {
                t = match t {
                    Target::Module(m) => self.module_attr(&m, part, 0),
                    Target::Class { module: m, path: p } => match self.class_member(&m, &p, part, &mut BTreeSet::new()) {
                        Some(t) => t,
                        None => Target::Opaque,
                    },
                    _ => Target::Opaque,
                };
            }
            if let Target::Class { module: m, path: p } = t {
                if let Some(found) = self.class_member(&m, &p, attr, seen) {
                    return Some(found);
                }
            }
        }
        None
    }

    pub(super) fn edges_of(&self, element: &CodeElement) -> Vec<UsageEdge> {
        let mut out = Vec::new();
        let module = element.module.as_str();
        let local_imports: HashMap<String, Binding> = self
            .project
            .module(module)
            .map(|m| element.local_imports.iter().filter_map(|b| import_binding(m, b)).collect())
            .unwrap_or_default();

        for r in &element.refs {
            let mut edge = |usee: &ElementId, certainty: Certainty| {
                out.push(UsageEdge { user: element.id.clone(), usee: usee.clone(), certainty, site: r.site });
            };
            let potential = |attr: &str, edge: &mut dyn FnMut(&ElementId, Certainty)| {
                if let Some(ids) = self.by_name.get(attr) {
                    for id in ids {
                        edge(id, Certainty::Potential);
                    }
                }
            };

            let (mut target, rest) = match r.root {
                RefRoot::Expr => (Target::Value, &r.chain[..]),
                RefRoot::Name => {
                    let first = r.chain[0].as_str();
                    let class_scope = match (&element.owner, element.kind) {
                        (Some(owner), ElementKind::ClassAttr) => self
                            .members
                            .get(&(module, owner.as_str()))
                            .and_then(|m| m.get(first))
                            .map(|m| match m {
                                Member::Element(id) => Target::Element(id.clone()),
                                Member::Class(p) => Target::Class { module: module.to_string(), path: p.clone() },
                            }),
                        _ => None,
                    };
                    let t = if let Some(t) = class_scope {
                        t
                    } else if element.receiver.as_deref() == Some(first) {
                        let owner = element.owner.clone().unwrap_or_default();
                        Target::Class { module: module.to_string(), path: owner }
                    } else if let Some(b) = local_imports.get(first) {
                        self.binding_target(b, module, 0)
                    } else if element.locals.contains(first) {
                        Target::Value
                    } else {
                        self.resolve_global(module, first, 0).unwrap_or(Target::Opaque)
                    };
                    (t, &r.chain[1..])
                }
            };
            if let Target::Element(id) = &target {
                edge(id, Certainty::Certain);
            }
            for attr in rest {
                target = match target {
                    Target::Element(_) | Target::Value => {
                        potential(attr, &mut edge);
                        Target::Value
                    }
                    Target::Class { module: m, path } => {
                        match self.class_member(&m, &path, attr, &mut BTreeSet::new()) {
                            Some(found) => found,
                            None => {
                                potential(attr, &mut edge);
                                Target::Value
                            }
                        }
                    }
                    Target::Module(m) => self.module_attr(&m, attr, 0),
                    Target::Opaque => break,
                };
                if let Target::Element(id) = &target {
                    edge(id, Certainty::Certain);
                }
            }
        }
        out
    }
}
