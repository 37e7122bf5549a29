use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{topological_order, UsageGraph};
use crate::project::ElementId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Every element against the initial assignment, no ordering.
    Independent,
    /// One pass in a seeded random order.
    Random,
    /// One pass, users before usees.
    UserToUsee,
    /// One pass, usees before users.
    UseeToUser,
    /// Usee-to-user pass followed by the reverse pass.
    TwoPass,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Independent, Strategy::Random, Strategy::UserToUsee, Strategy::UseeToUser, Strategy::TwoPass];

    pub fn passes(self) -> usize {
        if self == Strategy::TwoPass {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Independent => "independent",
            Strategy::Random => "random",
            Strategy::UserToUsee => "usertousee",
            Strategy::UseeToUser => "useetouser",
            Strategy::TwoPass => "twopass",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|st| st.to_string() == key)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected twopass, useetouser, usertousee, random, or independent)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub pass: usize,
    pub element: ElementId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingPlan {
    pub strategy: Strategy,
    pub visit_schedule: Vec<Visit>,
    pub seed: u64,
}

fn pass(n: usize, order: impl IntoIterator<Item = ElementId>) -> impl Iterator<Item = Visit> {
    order.into_iter().map(move |element| Visit { pass: n, element })
}

pub fn make_plan(graph: &UsageGraph, strategy: Strategy, seed: u64) -> DecodingPlan {
    let visit_schedule: Vec<Visit> = match strategy {
        Strategy::Independent => pass(1, graph.nodes().to_vec()).collect(),
        Strategy::Random => {
            let mut order = graph.nodes().to_vec();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            pass(1, order).collect()
        }
        Strategy::UseeToUser => pass(1, topological_order(graph)).collect(),
        Strategy::UserToUsee => pass(1, topological_order(graph).into_iter().rev()).collect(),
        Strategy::TwoPass => {
            let order = topological_order(graph);
            let back: Vec<ElementId> = order.iter().rev().cloned().collect();
            pass(1, order).chain(pass(2, back)).collect()
        }
    };
    DecodingPlan { strategy, visit_schedule, seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Certainty, UsageEdge};
    use crate::project::Site;

    fn chain() -> UsageGraph {
        let edge = |u: &str, v: &str| UsageEdge {
            user: u.into(),
            usee: v.into(),
            certainty: Certainty::Certain,
            site: Site { line: 1, column: 1, offset: 0 },
        };
        UsageGraph::from_edges(vec!["a".into(), "b".into(), "c".into()], vec![edge("a", "b"), edge("b", "c")])
    }

    fn schedule(plan: &DecodingPlan) -> Vec<(usize, String)> {
        plan.visit_schedule.iter().map(|v| (v.pass, v.element.to_string())).collect()
    }

    fn v(items: &[(usize, &str)]) -> Vec<(usize, String)> {
        items.iter().map(|(p, e)| (*p, e.to_string())).collect()
    }

    #[test]
    fn two_pass_on_chain() {
        let plan = make_plan(&chain(), Strategy::TwoPass, 0);
        assert_eq!(schedule(&plan), v(&[(1, "c"), (1, "b"), (1, "a"), (2, "a"), (2, "b"), (2, "c")]));
    }

    #[test]
    fn single_pass_orders() {
        assert_eq!(schedule(&make_plan(&chain(), Strategy::UserToUsee, 0)), v(&[(1, "a"), (1, "b"), (1, "c")]));
        assert_eq!(schedule(&make_plan(&chain(), Strategy::UseeToUser, 0)), v(&[(1, "c"), (1, "b"), (1, "a")]));
        assert_eq!(schedule(&make_plan(&chain(), Strategy::Independent, 0)), v(&[(1, "a"), (1, "b"), (1, "c")]));
    }

    #[test]
    fn random_is_seeded() {
        let a = make_plan(&chain(), Strategy::Random, 7);
        assert_eq!(a, make_plan(&chain(), Strategy::Random, 7));
        assert_eq!(a.visit_schedule.len(), 3);
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("Two-Pass".parse::<Strategy>().unwrap(), Strategy::TwoPass);
        assert!("sideways".parse::<Strategy>().is_err());
    }
}
