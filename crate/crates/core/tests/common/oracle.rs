//! Reference normalizer built on its own tree type. It rewrites the first
//! reducible node in pre-order, one rule at a time, until nothing fires.
//! Simple rather than fast.

use pytypefill::PyType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub head: String,
    pub args: Vec<Node>,
}

impl Node {
    pub fn from_type(t: &PyType) -> Node {
        Node { head: t.head.clone(), args: t.args.iter().map(Node::from_type).collect() }
    }

    pub fn render(&self) -> String {
        let inner: Vec<String> = self.args.iter().map(Node::render).collect();
        if self.head == "[]" {
            format!("[{}]", inner.join(","))
        } else if inner.is_empty() {
            self.head.clone()
        } else {
            format!("{}[{}]", self.head, inner.join(","))
        }
    }

    fn is_none(&self) -> bool {
        self.head == "None" && self.args.is_empty()
    }

    fn is_any(&self) -> bool {
        self.head == "Any" && self.args.is_empty()
    }
}

fn capitalized(head: &str) -> Option<&'static str> {
    Some(match head {
        "list" => "List",
        "dict" => "Dict",
        "set" => "Set",
        "tuple" => "Tuple",
        "frozenset" => "FrozenSet",
        "type" => "Type",
        _ => return None,
    })
}

fn union_order(members: &[Node]) -> Vec<Node> {
    let mut sorted = members.to_vec();
    sorted.sort_by_key(|m| (m.is_none(), m.render()));
    sorted
}

/// Applies one rule at the root of `n`, if any applies.
fn step_root(n: &Node) -> Option<Node> {
    if n.head == "Optional" && n.args.len() == 1 {
        let none = Node { head: "None".into(), args: vec![] };
        return Some(Node { head: "Union".into(), args: vec![n.args[0].clone(), none] });
    }
    if let Some(cap) = capitalized(&n.head) {
        return Some(Node { head: cap.into(), args: n.args.clone() });
    }
    if n.head != "Union" && !n.args.is_empty() && n.args.iter().all(Node::is_any) {
        return Some(Node { head: n.head.clone(), args: vec![] });
    }
    if n.head == "Union" {
        if n.args.iter().any(|a| a.head == "Union") {
            let flat =
                n.args.iter().flat_map(|a| if a.head == "Union" { a.args.clone() } else { vec![a.clone()] }).collect();
            return Some(Node { head: "Union".into(), args: flat });
        }
        let sorted = union_order(&n.args);
        if sorted != n.args {
            return Some(Node { head: "Union".into(), args: sorted });
        }
    }
    None
}

/// Rewrites the first reducible node in pre-order.
fn step(n: &Node) -> Option<Node> {
    if let Some(m) = step_root(n) {
        return Some(m);
    }
    for (i, a) in n.args.iter().enumerate() {
        if let Some(b) = step(a) {
            let mut m = n.clone();
            m.args[i] = b;
            return Some(m);
        }
    }
    None
}

/// Canonical rendering of `t` according to the reference rules.
pub fn brute_normalize_text(t: &PyType) -> String {
    let mut n = Node::from_type(t);
    for _ in 0..10_000 {
        match step(&n) {
            Some(m) => n = m,
            None => return n.render(),
        }
    }
    panic!("reference rewriting did not terminate on {t}")
}

pub fn brute_normalize(t: &PyType) -> PyType {
    PyType::parse(&brute_normalize_text(t)).expect("reference output parses")
}
