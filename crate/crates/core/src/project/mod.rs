//! Python projects as modules, classes, and top-level code elements.
//!
//! A [`ProjectSource`] is loaded once from a directory and is immutable
//! afterwards. Every module keeps its full text; elements and annotation
//! slots carry byte offsets into that text so that rendering, masking, and
//! annotation insertion are plain text edits.

mod parse;
mod rewrite;
mod strip;

pub use parse::parse_module;
pub use rewrite::{apply_assignment, render_element, ApplyError, ApplyReport, SlotFill};
pub use strip::strip_comments_and_docstrings;
pub(crate) use parse::{node_text, parse_tree};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pytype::PyType;

/// Globally unique element name: dotted module name plus qualified path,
/// e.g. `model.ModelWrapper.predict`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn new(module: &str, path: &str) -> Self {
        ElementId(format!("{module}.{path}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ElementId {
    fn from(s: &str) -> Self {
        ElementId(s.to_string())
    }
}

impl From<String> for ElementId {
    fn from(s: String) -> Self {
        ElementId(s)
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Function,
    Method,
    GlobalVar,
    ClassAttr,
}

impl ElementKind {
    pub fn is_callable(self) -> bool {
        matches!(self, ElementKind::Function | ElementKind::Method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Star {
    None,
    Args,
    Kwargs,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum SlotRole {
    Parameter { name: String, star: Star },
    Return,
    Variable,
}

/// Where a slot's annotation lives (or would be inserted) in the module text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SlotSite {
    /// `name_end` is the end of the parameter name. `annotation` spans from
    /// `name_end` through the end of an existing annotation. `default_gap`
    /// spans from `name_end` (or the annotation end) to the default value.
    Parameter {
        name_end: usize,
        annotation: Option<Range<usize>>,
        default_gap: Option<Range<usize>>,
    },
    /// `params_end` is the end of the closing parenthesis.
    Return { params_end: usize, annotation: Option<Range<usize>> },
    /// Primary statement carrying (or receiving) the annotation, plus other
    /// statements whose redundant annotations are erased when rendering.
    Variable {
        name_end: usize,
        annotation: Option<Range<usize>>,
        has_value: bool,
        others: Vec<Range<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSlot {
    pub index: usize,
    pub role: SlotRole,
    /// Parsed existing annotation; the gold label when present.
    pub existing_annotation: Option<PyType>,
    /// Raw annotation text when it exists but could not be parsed.
    pub unparsed_annotation: Option<String>,
    pub(crate) site: SlotSite,
}

impl AnnotationSlot {
    pub fn name(&self) -> Option<&str> {
        match &self.role {
            SlotRole::Parameter { name, .. } => Some(name),
            _ => None,
        }
    }
}

/// Source location of a name use (1-based line and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub line: usize,
    pub column: usize,
    /// Byte offset in the module text.
    #[serde(default)]
    pub offset: usize,
}

/// How a reference chain starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefRoot {
    /// `chain[0]` is a plain name (`foo`, `foo.bar.baz`).
    Name,
    /// The receiver is an arbitrary expression (`f().x`); every chain entry
    /// is an attribute access on an unknown value.
    Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameRef {
    pub root: RefRoot,
    pub chain: Vec<String>,
    pub site: Site,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImportBinding {
    /// `import a.b.c` binds `a`; `import a.b.c as x` binds `x` to `a.b.c`.
    Module { module: String, alias: Option<String> },
    From { level: usize, module: String, name: String, alias: Option<String> },
    Wildcard { level: usize, module: String },
}

impl ImportBinding {
    /// The local name introduced by the binding (none for wildcards).
    pub fn bound_name(&self) -> Option<&str> {
        match self {
            ImportBinding::Module { module, alias } => {
                Some(alias.as_deref().unwrap_or_else(|| module.split('.').next().unwrap_or(module)))
            }
            ImportBinding::From { name, alias, .. } => Some(alias.as_deref().unwrap_or(name)),
            ImportBinding::Wildcard { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportItem {
    /// Statement text, dedented.
    pub text: String,
    pub bindings: Vec<ImportBinding>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    /// Qualified path inside the module (`Outer.Inner`).
    pub path: String,
    /// Decorators plus the `class Name(Bases):` line, with original indentation.
    pub header: String,
    /// Base class expressions as written.
    pub bases: Vec<String>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeElement {
    pub id: ElementId,
    pub kind: ElementKind,
    pub module: String,
    /// Qualified path inside the module.
    pub path: String,
    pub name: String,
    /// Definition text. Methods and attributes keep their class indentation;
    /// a variable's text is all of its top-level assignment statements.
    pub source: String,
    /// Headers of enclosing classes, outermost first.
    pub owner_headers: Vec<String>,
    /// Qualified path of the owning class, if any.
    pub owner: Option<String>,
    pub slots: Vec<AnnotationSlot>,
    /// Name of the bound receiver (`self`/`cls`) for methods.
    pub receiver: Option<String>,
    pub refs: Vec<NameRef>,
    /// Names bound inside the element (parameters, locals, comprehension vars).
    pub locals: BTreeSet<String>,
    pub local_imports: Vec<ImportBinding>,
    /// Function signature pieces, for signature rendering.
    pub signature: Option<Signature>,
    pub(crate) spans: Vec<Range<usize>>,
}

impl CodeElement {
    pub fn owner_class(&self) -> Option<&str> {
        self.owner_headers.last().map(String::as_str)
    }

    /// Offset of the element's first statement in its module.
    pub fn offset(&self) -> usize {
        self.spans.first().map_or(0, |r| r.start)
    }

    pub fn return_slot(&self) -> Option<&AnnotationSlot> {
        self.slots.iter().find(|s| s.role == SlotRole::Return)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub is_async: bool,
    /// Every parameter in order, including `self`/`cls` and the bare `*` and
    /// `/` separators.
    pub params: Vec<SignatureParam>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureParam {
    /// Text as written before any annotation (`*args`, `x`, `*`, `/`).
    pub text: String,
    pub default: Option<String>,
    /// Index of the slot for this parameter, if it has one.
    pub slot: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleSource {
    pub name: String,
    /// Path relative to the project root.
    pub path: PathBuf,
    pub text: String,
    pub is_package: bool,
    pub imports: Vec<ImportItem>,
    pub classes: Vec<ClassDecl>,
    pub elements: Vec<CodeElement>,
    pub type_var_decls: Vec<String>,
    /// Module-scope names bound by statements that are not elements
    /// (tuple targets, type variables), so they shadow imports correctly.
    pub other_bindings: BTreeSet<String>,
}

impl ModuleSource {
    pub fn element(&self, path: &str) -> Option<&CodeElement> {
        self.elements.iter().find(|e| e.path == path)
    }

    pub fn class(&self, path: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.path == path)
    }

    /// The package a relative import is resolved against.
    pub fn package(&self) -> &str {
        if self.is_package {
            &self.name
        } else {
            self.name.rsplit_once('.').map_or("", |(pkg, _)| pkg)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("project root {0} does not exist")]
    MissingRoot(PathBuf),
    #[error("no parseable Python files under {0}")]
    NoParseableFiles(PathBuf),
    #[error("io error reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct ProjectSource {
    root: PathBuf,
    modules: Vec<ModuleSource>,
    skipped: Vec<SkippedFile>,
    index: HashMap<ElementId, (usize, usize)>,
}

impl ProjectSource {
    /// Builds a project from already parsed modules; modules are sorted by
    /// name and element ids must be unique.
    pub fn from_modules(root: PathBuf, mut modules: Vec<ModuleSource>, skipped: Vec<SkippedFile>) -> Self {
        modules.sort_by(|a, b| a.name.cmp(&b.name));
        let mut index = HashMap::new();
        for (mi, module) in modules.iter().enumerate() {
            for (ei, element) in module.elements.iter().enumerate() {
                index.entry(element.id.clone()).or_insert((mi, ei));
            }
        }
        ProjectSource { root, modules, skipped, index }
    }

    /// Parses in-memory files given as `(relative path, text)` pairs.
    pub fn from_sources<P: AsRef<Path>, S: AsRef<str>>(files: &[(P, S)]) -> Self {
        let paths: Vec<PathBuf> = files.iter().map(|(p, _)| p.as_ref().to_path_buf()).collect();
        let names = module_names(&paths);
        let mut modules = Vec::new();
        let mut skipped = Vec::new();
        let mut seen = BTreeSet::new();
        for ((path, text), name) in files.iter().zip(names) {
            let path = path.as_ref().to_path_buf();
            if !seen.insert(name.0.clone()) {
                skipped.push(SkippedFile { path, reason: format!("duplicate module name `{}`", name.0) });
                continue;
            }
            match parse_module(&name.0, &path, text.as_ref(), name.1) {
                Ok(m) => modules.push(m),
                Err(reason) => skipped.push(SkippedFile { path, reason }),
            }
        }
        Self::from_modules(PathBuf::new(), modules, skipped)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn modules(&self) -> &[ModuleSource] {
        &self.modules
    }

    pub fn skipped(&self) -> &[SkippedFile] {
        &self.skipped
    }

    pub fn module(&self, name: &str) -> Option<&ModuleSource> {
        self.modules
            .binary_search_by(|m| m.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.modules[i])
    }

    pub fn element(&self, id: &ElementId) -> Option<&CodeElement> {
        self.index.get(id).map(|&(m, e)| &self.modules[m].elements[e])
    }

    pub fn module_of(&self, id: &ElementId) -> Option<&ModuleSource> {
        self.index.get(id).map(|&(m, _)| &self.modules[m])
    }

    /// Elements in (module name, source position) order.
    pub fn elements(&self) -> impl Iterator<Item = &CodeElement> {
        self.modules.iter().flat_map(|m| m.elements.iter())
    }

    pub fn element_count(&self) -> usize {
        self.modules.iter().map(|m| m.elements.len()).sum()
    }

    /// Same project with comments and docstrings removed from every module.
    pub fn preprocessed(&self) -> ProjectSource {
        let modules = self.modules.par_iter().map(strip_comments_and_docstrings).collect();
        ProjectSource::from_modules(self.root.clone(), modules, self.skipped.clone())
    }

    /// Existing annotations of every slot, keyed by element and slot index.
    pub fn gold_labels(&self) -> BTreeMap<(ElementId, usize), PyType> {
        let mut out = BTreeMap::new();
        for element in self.elements() {
            for slot in &element.slots {
                if let Some(t) = &slot.existing_annotation {
                    out.insert((element.id.clone(), slot.index), t.clone());
                }
            }
        }
        out
    }

    /// Writes every module under `dir`, mirroring the original layout.
    /// Skipped files are copied verbatim from the original root when present.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        for module in &self.modules {
            let target = dir.join(&module.path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&target, &module.text)?;
        }
        for skipped in &self.skipped {
            let source = self.root.join(&skipped.path);
            if source.is_file() {
                let target = dir.join(&skipped.path);
                if let Some(parent) = target.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                std::fs::copy(&source, &target)?;
            }
        }
        Ok(())
    }
}

/// Loads every `.py` file under `root`. Files that fail to parse are listed
/// as skipped; only a missing root or a project with no parseable file is an
/// error.
pub fn load_project(root: &Path) -> Result<ProjectSource, LoadError> {
    if !root.is_dir() {
        return Err(LoadError::MissingRoot(root.to_path_buf()));
    }
    let mut paths = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| LoadError::Io {
            path: root.to_path_buf(),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
        })?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|x| x == "py") {
            let rel = path.strip_prefix(root).unwrap_or(path).to_path_buf();
            if rel.components().any(|c| c.as_os_str().to_string_lossy().starts_with('.')) {
                continue;
            }
            paths.push(rel);
        }
    }
    let names = module_names(&paths);
    let parsed: Vec<Result<ModuleSource, SkippedFile>> = paths
        .par_iter()
        .zip(names.par_iter())
        .map(|(rel, (name, is_package))| {
            let bytes = std::fs::read(root.join(rel))
                .map_err(|e| SkippedFile { path: rel.clone(), reason: format!("unreadable: {e}") })?;
            let text = String::from_utf8(bytes)
                .map_err(|_| SkippedFile { path: rel.clone(), reason: "not valid UTF-8".into() })?;
            parse_module(name, rel, &text, *is_package)
                .map_err(|reason| SkippedFile { path: rel.clone(), reason })
        })
        .collect();

    let mut modules = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = BTreeSet::new();
    for result in parsed {
        match result {
            Ok(m) => {
                if seen.insert(m.name.clone()) {
                    modules.push(m);
                } else {
                    skipped.push(SkippedFile {
                        reason: format!("duplicate module name `{}`", m.name),
                        path: m.path,
                    });
                }
            }
            Err(s) => skipped.push(s),
        }
    }
    if modules.is_empty() {
        return Err(LoadError::NoParseableFiles(root.to_path_buf()));
    }
    let mut project = ProjectSource::from_modules(root.to_path_buf(), modules, skipped);
    project.root = root.to_path_buf();
    Ok(project)
}

/// Dotted module names by package rules: a directory is a package when it
/// contains `__init__.py`; a file's name is rooted at the nearest ancestor
/// that is not a package. Returns `(name, is_package)`.
fn module_names(paths: &[PathBuf]) -> Vec<(String, bool)> {
    let package_dirs: BTreeSet<PathBuf> = paths
        .iter()
        .filter(|p| p.file_name().is_some_and(|f| f == "__init__.py"))
        .map(|p| p.parent().map(Path::to_path_buf).unwrap_or_default())
        .collect();
    paths
        .iter()
        .map(|path| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let is_package = stem == "__init__";
            let mut parts: Vec<String> = Vec::new();
            if !is_package {
                parts.push(stem);
            }
            let mut dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            while !dir.as_os_str().is_empty() && package_dirs.contains(&dir) {
                parts.push(dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
                dir = dir.parent().map(Path::to_path_buf).unwrap_or_default();
            }
            parts.reverse();
            let name = if parts.is_empty() { "__init__".to_string() } else { parts.join(".") };
            (name, is_package)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_names_follow_package_rules() {
        let paths: Vec<PathBuf> = ["pkg/__init__.py", "pkg/sub/__init__.py", "pkg/sub/m.py", "scripts/run.py", "top.py", "src/lib/__init__.py", "src/lib/x.py"]
            .iter()
            .map(PathBuf::from)
            .collect();
        let names: Vec<String> = module_names(&paths).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["pkg", "pkg.sub", "pkg.sub.m", "run", "top", "lib", "lib.x"]);
    }

    #[test]
    fn package_of_module() {
        let project = ProjectSource::from_sources(&[("pkg/__init__.py", ""), ("pkg/a.py", "")]);
        assert_eq!(project.module("pkg").unwrap().package(), "pkg");
        assert_eq!(project.module("pkg.a").unwrap().package(), "pkg");
    }

    #[test]
    fn duplicate_module_names_are_skipped() {
        let project = ProjectSource::from_sources(&[("a/run.py", "x = 1\n"), ("b/run.py", "y = 1\n")]);
        assert_eq!(project.modules().len(), 1);
        assert_eq!(project.skipped().len(), 1);
    }
}
