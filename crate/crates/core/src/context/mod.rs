//! Model inputs: preamble, usee signatures, masked main code, and user
//! sources, each under a token budget.
//!
//! Items closer to the main code are more relevant: the usee segment ends
//! with the certain usees and is cut from the left, the user segment starts
//! with the certain users and is cut from the right.

mod render;
mod tokenizer;

pub use render::{
    build_preamble, marker, render_main_code, render_signature, render_signature_item, render_typed_source,
    MaskedRendering,
};
pub use tokenizer::{AtomTokenizer, Tokenizer};

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::assignment::TypeAssignment;
use crate::graph::{Certainty, UnknownElement, UsageGraph};
use crate::project::{ElementId, ProjectSource};
use tokenizer::{keep_head, keep_tail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    /// Carved out of the usee budget.
    pub preamble: usize,
    pub usees: usize,
    pub main: usize,
    pub users: usize,
    pub total: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { preamble: 1000, usees: 2048, main: 512, users: 1536, total: 4096 }
    }
}

impl Budgets {
    pub fn validate(&self) -> Result<(), String> {
        if [self.preamble, self.usees, self.main, self.users, self.total].contains(&0) {
            return Err("budgets must be positive".into());
        }
        if self.main > self.total {
            return Err(format!("main budget {} exceeds the total budget {}", self.main, self.total));
        }
        if self.preamble > self.usees {
            return Err(format!("preamble budget {} exceeds the usee budget {}", self.preamble, self.usees));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub budgets: Budgets,
    pub marker_base: usize,
    /// Show assigned types in context segments. When false, contexts are
    /// rendered untyped.
    pub typed_context: bool,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig { budgets: Budgets::default(), marker_base: 0, typed_context: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kept {
    Full,
    Partial,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextItem {
    pub element: ElementId,
    pub certainty: Certainty,
    pub kept: Kept,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub preamble: usize,
    pub usees: usize,
    pub main: usize,
    pub users: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInput {
    pub element: ElementId,
    pub preamble: String,
    pub usee_context: String,
    pub main_code: String,
    pub user_context: String,
    pub marker_count: usize,
    pub marker_base: usize,
    /// Marker `marker_base + i` → slot index.
    pub slot_map: Vec<usize>,
    pub token_counts: TokenCounts,
    /// In segment order (farthest from the main code first).
    pub usee_items: Vec<ContextItem>,
    /// In segment order (nearest to the main code first).
    pub user_items: Vec<ContextItem>,
    pub warnings: Vec<String>,
}

impl ModelInput {
    /// The four segments joined by newlines, skipping empty ones.
    pub fn text(&self) -> String {
        [&self.preamble, &self.usee_context, &self.main_code, &self.user_context]
            .into_iter()
            .filter(|s| !s.is_empty())
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Checks every budget; returns the violated ones.
    pub fn budget_violations(&self, budgets: &Budgets) -> Vec<String> {
        let c = &self.token_counts;
        let mut out = Vec::new();
        if c.preamble > budgets.preamble {
            out.push(format!("preamble {} > {}", c.preamble, budgets.preamble));
        }
        if c.preamble + c.usees > budgets.usees {
            out.push(format!("preamble + usees {} > {}", c.preamble + c.usees, budgets.usees));
        }
        if c.main > budgets.main {
            out.push(format!("main {} > {}", c.main, budgets.main));
        }
        if c.users > budgets.users {
            out.push(format!("users {} > {}", c.users, budgets.users));
        }
        if c.total > budgets.total {
            out.push(format!("total {} > {}", c.total, budgets.total));
        }
        out
    }
}

struct Segment {
    text: String,
    items: Vec<(ElementId, Certainty, Range<usize>)>,
}

impl Segment {
    fn join(items: Vec<(ElementId, Certainty, String)>) -> Self {
        let mut text = String::new();
        let mut out = Vec::new();
        for (id, c, t) in items {
            if !text.is_empty() {
                text.push('\n');
            }
            let start = text.len();
            text.push_str(&t);
            out.push((id, c, start..text.len()));
        }
        Segment { text, items: out }
    }

    /// Keeps `kept` (a sub-slice of `text` at byte `offset`) and records
    /// which items survived.
    fn finish(&self, kept: Range<usize>) -> (String, Vec<ContextItem>) {
        let items = self
            .items
            .iter()
            .map(|(id, c, r)| {
                let kept_status = if r.start >= kept.start && r.end <= kept.end {
                    Kept::Full
                } else if r.end <= kept.start || r.start >= kept.end || kept.is_empty() {
                    Kept::Dropped
                } else {
                    Kept::Partial
                };
                ContextItem { element: id.clone(), certainty: *c, kept: kept_status }
            })
            .collect();
        (self.text[kept].to_string(), items)
    }
}

/// Byte range of `part` within `whole`; `part` must be a subslice unless it
/// is empty.
fn sub_range(whole: &str, part: &str) -> Range<usize> {
    if part.is_empty() {
        return 0..0;
    }
    let start = part.as_ptr() as usize - whole.as_ptr() as usize;
    start..start + part.len()
}

/// Builds the model input for element `e` given the current assignment.
pub fn build_model_input(
    project: &ProjectSource,
    graph: &UsageGraph,
    assignment: &TypeAssignment,
    e: &ElementId,
    tokenizer: &dyn Tokenizer,
    config: &ContextConfig,
) -> Result<ModelInput, UnknownElement> {
    let element = project.element(e).ok_or_else(|| UnknownElement(e.clone()))?;
    let module = project.module_of(e).expect("indexed element has a module");
    let budgets = &config.budgets;
    let typed = config.typed_context;
    let mut warnings = Vec::new();

    let preamble_full = build_preamble(module);
    let mut preamble = keep_head(tokenizer, &preamble_full, budgets.preamble.min(budgets.usees)).to_string();

    let masked = render_main_code(module, element, assignment, config.marker_base);
    let main_tokens = tokenizer.count(&masked.text);
    // The main code is never cut by the total-budget pass below.
    let main_budget = budgets.main.min(budgets.total);
    let (main_code, slot_map) = if main_tokens > main_budget {
        let text = keep_head(tokenizer, &masked.text, main_budget).to_string();
        let surviving = (0..masked.slot_map.len())
            .take_while(|i| text.contains(&marker(config.marker_base + i)))
            .count();
        warnings.push(format!(
            "main code of {e} has {main_tokens} tokens (budget {}); truncated, {} of {} markers kept",
            main_budget,
            surviving,
            masked.slot_map.len()
        ));
        (text, masked.slot_map[..surviving].to_vec())
    } else {
        (masked.text, masked.slot_map)
    };

    let users = graph.users_with_certainty(e)?;
    let user_items: Vec<(ElementId, Certainty, String)> = users
        .iter()
        .filter_map(|(id, c)| {
            let u = project.element(id)?;
            let m = project.module_of(id)?;
            let text = format!("# module: {}\n{}", m.name, render_typed_source(m, u, assignment, typed));
            Some((id.clone(), *c, text))
        })
        .collect();

    // Usees of e and of its users, each once at its most relevant rank.
    let mut ranked: HashMap<ElementId, (Certainty, bool, usize)> = HashMap::new();
    let mut consider = |id: ElementId, c: Certainty, indirect: bool| {
        if &id == e {
            return;
        }
        let key = (c, indirect, graph.position(&id).unwrap_or(usize::MAX));
        ranked.entry(id).and_modify(|k| *k = (*k).min(key)).or_insert(key);
    };
    for (id, c) in graph.usees_with_certainty(e)? {
        consider(id, c, false);
    }
    for (user, _) in &users {
        for (id, c) in graph.usees_with_certainty(user)? {
            consider(id, c, true);
        }
    }
    let mut usees: Vec<(ElementId, (Certainty, bool, usize))> = ranked.into_iter().collect();
    usees.sort_by_key(|(_, k)| *k);
    // Highest priority sits next to the main code, i.e. last.
    let usee_items: Vec<(ElementId, Certainty, String)> = usees
        .into_iter()
        .rev()
        .filter_map(|(id, (c, _, _))| Some((id.clone(), c, render_signature_item(project.element(&id)?, assignment, typed))))
        .collect();

    let usee_seg = Segment::join(usee_items);
    let user_seg = Segment::join(user_items);

    let main_count = tokenizer.count(&main_code);
    let mut preamble_count = tokenizer.count(&preamble);
    let mut usee_budget = budgets.usees.saturating_sub(preamble_count);
    let mut user_budget = budgets.users;

    // Shrink context budgets until the total fits: users first, then usees,
    // then the preamble.
    let mut usee_kept = sub_range(&usee_seg.text, keep_tail(tokenizer, &usee_seg.text, usee_budget));
    let mut user_kept = sub_range(&user_seg.text, keep_head(tokenizer, &user_seg.text, user_budget));
    loop {
        let usee_count = tokenizer.count(&usee_seg.text[usee_kept.clone()]);
        let user_count = tokenizer.count(&user_seg.text[user_kept.clone()]);
        let total = preamble_count + usee_count + main_count + user_count;
        if total <= budgets.total {
            break;
        }
        let excess = total - budgets.total;
        if user_count > 0 {
            user_budget = user_count.saturating_sub(excess);
            user_kept = sub_range(&user_seg.text, keep_head(tokenizer, &user_seg.text, user_budget));
        } else if usee_count > 0 {
            usee_budget = usee_count.saturating_sub(excess);
            usee_kept = sub_range(&usee_seg.text, keep_tail(tokenizer, &usee_seg.text, usee_budget));
        } else if preamble_count > 0 {
            preamble = keep_head(tokenizer, &preamble, preamble_count.saturating_sub(excess)).to_string();
            preamble_count = tokenizer.count(&preamble);
        } else {
            break;
        }
    }

    let (usee_context, usee_items) = usee_seg.finish(usee_kept);
    let (user_context, user_items) = user_seg.finish(user_kept);
    let token_counts = TokenCounts {
        preamble: preamble_count,
        usees: tokenizer.count(&usee_context),
        main: main_count,
        users: tokenizer.count(&user_context),
        total: 0,
    };
    let token_counts = TokenCounts {
        total: token_counts.preamble + token_counts.usees + token_counts.main + token_counts.users,
        ..token_counts
    };
    Ok(ModelInput {
        element: e.clone(),
        preamble,
        usee_context,
        main_code,
        user_context,
        marker_count: slot_map.len(),
        marker_base: config.marker_base,
        slot_map,
        token_counts,
        usee_items,
        user_items,
        warnings,
    })
}
