//! The usage graph: `x → y` when element `x` uses element `y`.
//!
//! Certain edges come from uses that resolve without type information
//! (direct references through imports or module bindings, `self.x`, and
//! `Class.x`). Every other attribute access `recv.x` yields a potential edge
//! to each project class member named `x`.

mod order;
mod resolve;

pub use order::topological_order;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::project::{ElementId, ProjectSource, Site};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certainty {
    Certain,
    Potential,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEdge {
    pub user: ElementId,
    pub usee: ElementId,
    pub certainty: Certainty,
    /// First use of the usee inside the user (in the user's module).
    pub site: Site,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("element {0} is not in the usage graph")]
pub struct UnknownElement(pub ElementId);

/// Nodes in project order (module name, then source position). At most one
/// edge per (user, usee) pair; a certain use supersedes potential ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageGraph {
    nodes: Vec<ElementId>,
    index: HashMap<ElementId, usize>,
    edges: Vec<UsageEdge>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    schema_version: u32,
    nodes: Vec<ElementId>,
    edges: Vec<UsageEdge>,
}

impl UsageGraph {
    /// Builds a graph from explicit nodes and edges. Edges with an unknown
    /// endpoint are dropped; duplicate pairs keep the strongest certainty
    /// and, within it, the earliest site.
    pub fn from_edges(nodes: Vec<ElementId>, edges: impl IntoIterator<Item = UsageEdge>) -> Self {
        let index: HashMap<ElementId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut best: HashMap<(usize, usize), UsageEdge> = HashMap::new();
        for edge in edges {
            let (Some(&u), Some(&v)) = (index.get(&edge.user), index.get(&edge.usee)) else { continue };
            match best.get(&(u, v)) {
                Some(old) if (old.certainty, old.site.offset) <= (edge.certainty, edge.site.offset) => {}
                _ => {
                    best.insert((u, v), edge);
                }
            }
        }
        let mut keyed: Vec<((usize, usize), UsageEdge)> = best.into_iter().collect();
        keyed.sort_by_key(|(k, _)| *k);
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut edges = Vec::with_capacity(keyed.len());
        for (i, ((u, v), edge)) in keyed.into_iter().enumerate() {
            outgoing[u].push(i);
            incoming[v].push(i);
            edges.push(edge);
        }
        UsageGraph { nodes, index, edges, outgoing, incoming }
    }

    pub fn nodes(&self) -> &[ElementId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[UsageEdge] {
        &self.edges
    }

    pub fn contains(&self, id: &ElementId) -> bool {
        self.index.contains_key(id)
    }

    /// Position in project order.
    pub fn position(&self, id: &ElementId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn edge(&self, user: &ElementId, usee: &ElementId) -> Option<&UsageEdge> {
        let u = *self.index.get(user)?;
        self.outgoing[u].iter().map(|&i| &self.edges[i]).find(|e| &e.usee == usee)
    }

    fn ranked(&self, edge_ids: &[usize], pick: impl Fn(&UsageEdge) -> &ElementId) -> Vec<(ElementId, Certainty)> {
        let mut out: Vec<(Certainty, usize, ElementId)> = edge_ids
            .iter()
            .map(|&i| {
                let e = &self.edges[i];
                let other = pick(e);
                (e.certainty, self.index[other], other.clone())
            })
            .collect();
        out.sort();
        out.into_iter().map(|(c, _, id)| (id, c)).collect()
    }

    /// Elements using `id`: certain users first, each group in project order.
    pub fn users_with_certainty(&self, id: &ElementId) -> Result<Vec<(ElementId, Certainty)>, UnknownElement> {
        let i = self.index.get(id).ok_or_else(|| UnknownElement(id.clone()))?;
        Ok(self.ranked(&self.incoming[*i], |e| &e.user))
    }

    /// Elements used by `id`, ordered like [`UsageGraph::users_with_certainty`].
    pub fn usees_with_certainty(&self, id: &ElementId) -> Result<Vec<(ElementId, Certainty)>, UnknownElement> {
        let i = self.index.get(id).ok_or_else(|| UnknownElement(id.clone()))?;
        Ok(self.ranked(&self.outgoing[*i], |e| &e.usee))
    }

    pub fn users(&self, id: &ElementId) -> Result<Vec<ElementId>, UnknownElement> {
        Ok(self.users_with_certainty(id)?.into_iter().map(|(e, _)| e).collect())
    }

    pub fn usees(&self, id: &ElementId) -> Result<Vec<ElementId>, UnknownElement> {
        Ok(self.usees_with_certainty(id)?.into_iter().map(|(e, _)| e).collect())
    }

    pub(crate) fn out_neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.outgoing[node].iter().map(|&i| self.index[&self.edges[i].usee])
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile { schema_version: GRAPH_SCHEMA_VERSION, nodes: self.nodes.clone(), edges: self.edges.clone() };
        serde_json::to_string_pretty(&file).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: GraphFile = serde_json::from_str(text)?;
        Ok(Self::from_edges(file.nodes, file.edges))
    }
}

/// Resolves every name use in every element against the project.
pub fn build_usage_graph(project: &ProjectSource) -> UsageGraph {
    let resolver = resolve::Resolver::new(project);
    let elements: Vec<_> = project.elements().collect();
    let edges: Vec<UsageEdge> = elements.par_iter().flat_map_iter(|e| resolver.edges_of(e)).collect();
    let nodes = elements.iter().map(|e| e.id.clone()).collect();
    UsageGraph::from_edges(nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> ElementId {
        ElementId::from(s)
    }

    fn edge(u: &str, v: &str, c: Certainty, offset: usize) -> UsageEdge {
        UsageEdge { user: id(u), usee: id(v), certainty: c, site: Site { line: 1, column: 1, offset } }
    }

    #[test]
    fn duplicate_pairs_keep_certain_and_first_site() {
        let g = UsageGraph::from_edges(
            vec![id("m.a"), id("m.b")],
            vec![
                edge("m.a", "m.b", Certainty::Potential, 1),
                edge("m.a", "m.b", Certainty::Certain, 9),
                edge("m.a", "m.b", Certainty::Certain, 5),
                edge("m.a", "m.zzz", Certainty::Certain, 5),
            ],
        );
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0].certainty, Certainty::Certain);
        assert_eq!(g.edges()[0].site.offset, 5);
    }

    #[test]
    fn users_order_certain_first_then_position() {
        let g = UsageGraph::from_edges(
            vec![id("m.a"), id("m.b"), id("m.c"), id("m.t")],
            vec![
                edge("m.a", "m.t", Certainty::Potential, 0),
                edge("m.c", "m.t", Certainty::Certain, 0),
                edge("m.b", "m.t", Certainty::Certain, 0),
            ],
        );
        assert_eq!(g.users(&id("m.t")).unwrap(), vec![id("m.b"), id("m.c"), id("m.a")]);
        assert_eq!(g.usees(&id("m.a")).unwrap(), vec![id("m.t")]);
        assert_eq!(g.users(&id("m.nope")), Err(UnknownElement(id("m.nope"))));
    }

    #[test]
    fn json_round_trip() {
        let g = UsageGraph::from_edges(vec![id("m.a"), id("m.b")], vec![edge("m.a", "m.b", Certainty::Certain, 3)]);
        let json = g.to_json();
        assert!(json.contains("\"certainty\": \"certain\""));
        let back = UsageGraph::from_json(&json).unwrap();
        assert_eq!(back.nodes(), g.nodes());
        assert_eq!(back.edges()[0].user, g.edges()[0].user);
    }
}
