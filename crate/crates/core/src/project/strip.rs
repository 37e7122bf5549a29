use tree_sitter::Node;

use super::parse::{line_start, parse_tree};
use super::{parse_module, ModuleSource};

/// Removes comments and docstrings. A line left blank by a removal is
/// dropped entirely; a body left empty gets `pass`. Untouched lines keep
/// their bytes, including `\r\n` endings.
pub fn strip_comments_and_docstrings(module: &ModuleSource) -> ModuleSource {
    let mut text = module.text.clone();
    for _ in 0..64 {
        let next = strip_text(&text);
        if next == text {
            break;
        }
        text = next;
    }
    if text == module.text {
        return module.clone();
    }
    parse_module(&module.name, &module.path, &text, module.is_package).unwrap_or_else(|_| module.clone())
}

struct Edit {
    start: usize,
    end: usize,
    replacement: &'static str,
    is_comment: bool,
}

fn collect_edits(node: Node<'_>, edits: &mut Vec<Edit>) {
    match node.kind() {
        "comment" => {
            edits.push(Edit { start: node.start_byte(), end: node.end_byte(), replacement: "", is_comment: true });
            return;
        }
        "module" => docstring_edit(node, false, edits),
        "block" => {
            let parent_kind = node.parent().map(|p| p.kind());
            if matches!(parent_kind, Some("function_definition" | "class_definition")) {
                docstring_edit(node, true, edits);
            }
        }
        _ => {}
    }
    let mut cursor = node.walk();
    let children: Vec<Node<'_>> = node.named_children(&mut cursor).collect();
    for child in children {
        collect_edits(child, edits);
    }
}

fn is_docstring(stmt: Node<'_>) -> bool {
    stmt.kind() == "expression_statement"
        && stmt.named_child_count() == 1
        && stmt.named_child(0).is_some_and(|c| matches!(c.kind(), "string" | "concatenated_string"))
}

fn docstring_edit(body: Node<'_>, needs_statement: bool, edits: &mut Vec<Edit>) {
    let mut cursor = body.walk();
    let statements: Vec<Node<'_>> = body.named_children(&mut cursor).filter(|c| c.kind() != "comment").collect();
    let Some(first) = statements.first() else { return };
    if !is_docstring(*first) {
        return;
    }
    let replacement = if needs_statement && statements.len() == 1 { "pass" } else { "" };
    edits.push(Edit { start: first.start_byte(), end: first.end_byte(), replacement, is_comment: false });
}

fn strip_text(text: &str) -> String {
    let tree = parse_tree(text);
    if tree.root_node().has_error() {
        return text.to_string();
    }
    let mut edits = Vec::new();
    collect_edits(tree.root_node(), &mut edits);
    // Comments go first; docstrings are removed once no comment is left, so
    // that edits on one line never interact.
    let has_comment = edits.iter().any(|e| e.is_comment);
    edits.retain(|e| e.is_comment == has_comment);
    if edits.is_empty() {
        return text.to_string();
    }
    let mut ranges: Vec<(usize, usize, &str)> = edits.iter().map(|e| expand(text, e)).collect();
    ranges.sort_by_key(|r| r.0);
    let mut out = text.to_string();
    let mut last_start = usize::MAX;
    for (start, end, replacement) in ranges.into_iter().rev() {
        if end > last_start {
            continue;
        }
        out.replace_range(start..end, replacement);
        last_start = start;
    }
    out
}

/// Widens a removal to whole lines when nothing else remains on them, or
/// over the preceding blanks when only trailing code precedes it.
fn expand<'e>(text: &str, edit: &'e Edit) -> (usize, usize, &'e str) {
    if !edit.replacement.is_empty() {
        return (edit.start, edit.end, edit.replacement);
    }
    let blank = |s: &str| s.chars().all(|c| matches!(c, ' ' | '\t' | '\r' | '\x0c'));
    // The grammar lets a comment swallow the `\r` of a CRLF ending.
    let mut end = edit.end;
    while end > edit.start && text.as_bytes()[end - 1] == b'\r' {
        end -= 1;
    }
    let ls = line_start(text, edit.start);
    let le = text[end..].find('\n').map_or(text.len(), |i| end + i);
    let before = &text[ls..edit.start];
    let after = &text[end..le];
    if blank(before) && blank(after) {
        let end = if le < text.len() { le + 1 } else { le };
        return (ls, end, "");
    }
    if blank(after) {
        let trimmed = before.trim_end_matches([' ', '\t']);
        return (ls + trimmed.len(), end, "");
    }
    (edit.start, end, "")
}
