use super::PyType;

/// Builtin container names rewritten to their `typing` spelling.
const BASIC_TYPES: &[(&str, &str)] = &[
    ("list", "List"),
    ("dict", "Dict"),
    ("set", "Set"),
    ("tuple", "Tuple"),
    ("frozenset", "FrozenSet"),
    ("type", "Type"),
];

/// Canonical form used by every comparison:
///
/// 1. `Optional[T]` becomes `Union[T,None]`;
/// 2. nested `Union`s are flattened and `Union` arguments sorted by rendering;
/// 3. argument lists consisting only of `Any` are dropped (`List[Any]` → `List`),
///    except under `Union`, where `Any` is a member rather than a parameter;
/// 4. builtin containers are capitalized (`list` → `List`).
///
/// Applied bottom-up; each node is rewritten until no rule fires, so the
/// result is a fixpoint.
pub fn normalize(t: &PyType) -> PyType {
    let args = t.args.iter().map(normalize).collect();
    let mut node = PyType { head: t.head.clone(), args };
    while let Some(next) = rewrite_root(&node) {
        node = next;
    }
    node
}

/// One rule application at the root, assuming all arguments are already
/// normal. Returns `None` when the node is in normal form.
fn rewrite_root(node: &PyType) -> Option<PyType> {
    if node.head == "Optional" && node.args.len() == 1 {
        return Some(PyType::new("Union", vec![node.args[0].clone(), PyType::none()]));
    }
    if node.args.is_empty() {
        if let Some((_, cap)) = BASIC_TYPES.iter().find(|(b, _)| *b == node.head) {
            return Some(PyType::simple(*cap));
        }
        return None;
    }
    if let Some((_, cap)) = BASIC_TYPES.iter().find(|(b, _)| *b == node.head) {
        return Some(PyType::new(*cap, node.args.clone()));
    }
    if node.head == "Union" {
        let mut flat = Vec::with_capacity(node.args.len());
        for arg in &node.args {
            if arg.head == "Union" {
                flat.extend(arg.args.iter().cloned());
            } else {
                flat.push(arg.clone());
            }
        }
        let sorted = sort_union_members(flat);
        if sorted != node.args {
            return Some(PyType::new("Union", sorted));
        }
    }
    if node.head != "Union" && node.args.iter().all(PyType::is_any) {
        return Some(PyType::simple(node.head.clone()));
    }
    None
}

/// Union members ordered by canonical rendering, with `None` last so that
/// `Optional[T]` reads as `Union[T,None]`.
pub(crate) fn sort_union_members(members: Vec<PyType>) -> Vec<PyType> {
    let mut keyed: Vec<((bool, String), PyType)> =
        members.into_iter().map(|a| ((a.is_none(), a.to_string()), a)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.into_iter().map(|(_, a)| a).collect()
}

fn is_dotted_name(head: &str) -> bool {
    head.contains('.')
        && head
            .split('.')
            .all(|seg| seg.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_'))
}

fn simplify_names(t: &PyType) -> PyType {
    let head = if is_dotted_name(&t.head) {
        t.head.rsplit('.').next().unwrap_or(&t.head).to_string()
    } else {
        t.head.clone()
    };
    PyType { head, args: t.args.iter().map(simplify_names).collect() }
}

/// The form compared by the adjusted metric: qualified names reduced to their
/// last segment everywhere in the tree, then any outermost `Final[T]` or
/// `Union[T,None]` (the normal form of `Optional[T]`) unwrapped to `T`.
pub fn adjust_for_comparison(t: &PyType) -> PyType {
    let mut current = normalize(&simplify_names(t));
    loop {
        if current.head == "Final" && current.args.len() == 1 {
            current = current.args[0].clone();
            continue;
        }
        if current.head == "Union" && current.args.iter().any(PyType::is_none) {
            let mut rest = current.args.iter().filter(|a| !a.is_none());
            if let (Some(only), None) = (rest.next(), rest.next()) {
                current = only.clone();
                continue;
            }
        }
        break;
    }
    normalize(&current)
}

/// Source form for writing a (normalized) type into code: builtin generics
/// in lowercase and `Union[T,None]` as `Optional[T]`. Parses and normalizes
/// back to the same tree.
pub fn annotation_source(t: &PyType) -> String {
    to_annotation_tree(t).to_source()
}

fn to_annotation_tree(t: &PyType) -> PyType {
    let args: Vec<PyType> = t.args.iter().map(to_annotation_tree).collect();
    if t.head == "Union" && t.args.len() == 2 && t.args[1].is_none() && !t.args[0].is_none() {
        return PyType::new("Optional", vec![args[0].clone()]);
    }
    let head = match BASIC_TYPES.iter().find(|(_, cap)| *cap == t.head) {
        Some((lower, _)) => (*lower).to_string(),
        None => t.head.clone(),
    };
    PyType { head, args }
}

/// Outermost constructor, used by the base metric.
pub fn base_head(t: &PyType) -> &str {
    &t.head
}
