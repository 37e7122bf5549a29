//! Shared fixtures, generators, reference implementations, and the checks
//! behind the acceptance report.

#![allow(dead_code)]

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pytypefill::context::{render_signature_item, Kept};
use pytypefill::decoder::{run_user_guided, DecodeTrace, VisitStatus};
use pytypefill::eval::{coherence_errors, parse_checker_output, CheckerConfig, COUNTED_CODES};
use pytypefill::graph::UsageEdge;
use pytypefill::predictor::{PredictError, PredictionRequest, PredictionResult};
use pytypefill::project::Site;
use pytypefill::pytype::{annotation_source, ConstructorFrequencyTable};
use pytypefill::*;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(name: &str) -> ProjectSource {
    load_project(&fixture(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn id(s: &str) -> ElementId {
    ElementId::from(s)
}

pub fn decode(project: &ProjectSource, strategy: Strategy) -> (TypeAssignment, DecodeTrace) {
    let graph = build_usage_graph(project);
    let plan = make_plan(&graph, strategy, 0);
    run_decoding(project, &graph, &plan, &HeuristicPredictor, &AtomTokenizer, &DecodeConfig::default())
}

pub fn type_text(m: &TypeAssignment, element: &str, slot: usize) -> Option<String> {
    m.type_of(&id(element), slot).map(ToString::to_string)
}

/// Returns `Any` for every marker without looking at the input.
pub struct AnyPredictor;

impl Predictor for AnyPredictor {
    fn name(&self) -> &str {
        "any"
    }

    fn predict(&self, request: &PredictionRequest) -> Result<PredictionResult, PredictError> {
        Ok(PredictionResult {
            types: vec![PyType::any(); request.marker_count],
            raw_output: String::new(),
            latency: Duration::ZERO,
            diagnostics: Vec::new(),
            token_count: None,
        })
    }
}

// ---------------------------------------------------------------- generators

const LEAVES: &[&str] = &["int", "str", "None", "Any", "float", "bool", "Foo", "pkg.Bar", "torch.Tensor", "list", "dict"];
const GENERICS: &[&str] =
    &["List", "list", "Dict", "dict", "Optional", "Union", "Set", "set", "Tuple", "tuple", "Callable", "Final", "frozenset", "type", "Mapping"];

/// Random annotation tree of depth at most `depth` (a leaf has depth 1).
pub fn random_type(rng: &mut ChaCha8Rng, depth: usize) -> PyType {
    if depth <= 1 || rng.random_bool(0.35) {
        return PyType::simple(*LEAVES.choose(rng).expect("nonempty"));
    }
    let head = *GENERICS.choose(rng).expect("nonempty");
    let arity = match head {
        "Optional" | "Final" | "type" => 1,
        "Union" => rng.random_range(1..=4),
        _ => rng.random_range(1..=3),
    };
    let args = (0..arity).map(|_| random_type(rng, depth - 1)).collect();
    PyType::new(head, args)
}

/// Random DAG over `n` nodes in shuffled project order. Edge `u → v` means
/// `u` uses `v`.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize) -> (Vec<ElementId>, Vec<(usize, usize)>) {
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(rng);
    let density = rng.random_range(0.0..0.15);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if rank[u] > rank[v] && rng.random_bool(density) {
                edges.push((u, v));
            }
        }
    }
    let nodes = (0..n).map(|i| id(&format!("m.f{i}"))).collect();
    (nodes, edges)
}

pub fn graph_of(nodes: &[ElementId], edges: &[(usize, usize)]) -> UsageGraph {
    UsageGraph::from_edges(
        nodes.to_vec(),
        edges.iter().map(|&(u, v)| UsageEdge {
            user: nodes[u].clone(),
            usee: nodes[v].clone(),
            certainty: Certainty::Certain,
            site: Site { line: 1, column: 1, offset: 0 },
        }),
    )
}

/// One module whose function `f{u}` calls `f{v}` for every edge.
pub fn project_of(n: usize, edges: &[(usize, usize)]) -> ProjectSource {
    let mut calls: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        calls[u].push(v);
    }
    let mut text = String::new();
    for (u, callees) in calls.iter().enumerate() {
        text.push_str(&format!("def f{u}(x, k=1):\n"));
        for v in callees {
            text.push_str(&format!("    f{v}(x)\n"));
        }
        text.push_str("    return x\n\n\n");
    }
    ProjectSource::from_sources(&[("m.py", text)])
}

const METHOD_NAMES: &[&str] = &["run", "step", "load", "save", "fit"];

/// Random multi-module project with bulky imports, long parameter lists,
/// long bodies, direct calls (certain edges), and attribute calls on
/// unknown receivers (potential edges).
pub fn synthetic_project(rng: &mut ChaCha8Rng) -> ProjectSource {
    let modules = rng.random_range(2..=4);
    let mut files = Vec::new();
    for k in 0..modules {
        let mut text = String::new();
        for i in 0..rng.random_range(0..200) {
            text.push_str(&format!("import package_{k}_{i}.submodule_{i} as alias_{i}\n"));
        }
        for j in 0..k {
            text.push_str(&format!("from mod{j} import *\n"));
        }
        text.push('\n');
        for c in 0..rng.random_range(1..=3) {
            text.push_str(&format!("class C{k}x{c}(object):\n"));
            text.push_str(&format!("    limit = {}\n\n", rng.random_range(0..100)));
            for name in METHOD_NAMES.choose_multiple(rng, 2) {
                text.push_str(&format!("    def {name}(self, a, b=2):\n"));
                for _ in 0..rng.random_range(1..60) {
                    text.push_str("        a = a + b * self.limit\n");
                }
                text.push_str(&format!("        return self.{}(a)\n\n", METHOD_NAMES.choose(rng).expect("nonempty")));
            }
        }
        let functions = rng.random_range(3..=12);
        for f in 0..functions {
            let params = rng.random_range(1..=40);
            let list: Vec<String> = (0..params).map(|p| if p % 3 == 2 { format!("p{p}=1") } else { format!("p{p}") }).collect();
            text.push_str(&format!("def g{k}x{f}({}):\n", list.join(", ")));
            for _ in 0..rng.random_range(0..120) {
                text.push_str("    p0 = p0 + 1\n");
            }
            for _ in 0..rng.random_range(0..4) {
                let (m, g) = (rng.random_range(0..=k), rng.random_range(0..functions));
                if m < k || g < f {
                    text.push_str(&format!("    g{m}x{g}(p0)\n"));
                }
            }
            for _ in 0..rng.random_range(0..3) {
                text.push_str(&format!("    p0.{}(p0)\n", METHOD_NAMES.choose(rng).expect("nonempty")));
            }
            text.push_str("    return p0\n\n");
        }
        files.push((format!("mod{k}.py"), text));
    }
    ProjectSource::from_sources(&files)
}

// ------------------------------------------------------------------- checks

pub type Check = Result<String, String>;

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

pub fn check_graph_fidelity() -> Check {
    let project = load("fig1");
    let start = Instant::now();
    let graph = build_usage_graph(&project);
    let elapsed = start.elapsed();
    let got: BTreeSet<(String, String, Certainty)> =
        graph.edges().iter().map(|e| (e.user.to_string(), e.usee.to_string(), e.certainty)).collect();
    let expected: BTreeSet<(String, String, Certainty)> = [
        ("eval.eval_on_dataset", "data.chunk_srcs", Certainty::Certain),
        ("model.ModelWrapper.predict", "model.ModelWrapper.predict_on_batch", Certainty::Certain),
        ("eval.eval_on_dataset", "model.ModelWrapper.predict", Certainty::Potential),
        ("eval.eval_on_dataset", "model.ModelWrapper.DefaultWindow", Certainty::Potential),
    ]
    .into_iter()
    .map(|(u, v, c)| (u.to_string(), v.to_string(), c))
    .collect();
    let missing: Vec<_> = expected.difference(&got).collect();
    let extra: Vec<_> = got.difference(&expected).collect();
    ensure(missing.is_empty() && extra.is_empty(), || format!("missing {missing:?}, extra {extra:?}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{} edges, 0 missing, 0 extra, built in {elapsed:?}", got.len()))
}

pub fn check_normalization(trees: usize) -> Check {
    let mut rng = rng(0x5eed);
    let mut disagreements = Vec::new();
    for _ in 0..trees {
        let t = random_type(&mut rng, 4);
        let n = normalize(&t);
        if normalize(&n) != n {
            disagreements.push(format!("not idempotent: {t}"));
        }
        let reference = oracle::brute_normalize_text(&t);
        if reference != n.to_string() {
            disagreements.push(format!("{t}: normalize {n}, reference {reference}"));
        }
        let mut members: Vec<PyType> = (0..rng.random_range(2..=4)).map(|_| random_type(&mut rng, 3)).collect();
        let union = normalize(&PyType::new("Union", members.clone()));
        members.shuffle(&mut rng);
        if normalize(&PyType::new("Union", members.clone())) != union {
            disagreements.push(format!("permutation changed Union of {members:?}"));
        }
    }
    ensure(disagreements.is_empty(), || format!("{} disagreements, first: {}", disagreements.len(), disagreements[0]))?;
    Ok(format!("{trees} random trees: idempotent, permutation-invariant, 0 disagreements with the reference"))
}

/// (gold, prediction, full ok, adjusted ok or None when filtered, base ok).
/// An empty prediction means no prediction.
pub const METRIC_PAIRS: [(&str, &str, bool, Option<bool>, bool); 20] = [
    ("int", "int", true, Some(true), true),
    ("Optional[int]", "int", false, Some(true), true),
    ("Optional[int]", "Union[None, int]", true, Some(true), true),
    ("Optional[int]", "Union[int, None]", true, Some(true), true),
    ("torch.Tensor", "Tensor", false, Some(true), true),
    ("Tensor", "torch.Tensor", false, Some(true), true),
    ("Dict[str, List]", "Dict[int, int]", false, Some(false), true),
    ("Dict[str, List]", "Mapping[str, List]", false, Some(false), false),
    ("None", "None", true, None, false),
    ("Any", "int", false, None, false),
    ("List[Any]", "list", true, Some(true), true),
    ("Final[int]", "int", false, Some(true), true),
    ("Optional[List[int]]", "List[str]", false, Some(false), true),
    ("list[int]", "List[int]", true, Some(true), true),
    ("str", "", false, Some(false), false),
    ("Union[int, str]", "Union[str, int]", true, Some(true), true),
    ("foo.Bar", "baz.Bar", false, Some(true), true),
    ("Union[int, str, None]", "Union[int, str]", false, Some(false), true),
    ("Any", "Any", true, None, false),
    ("Set[int]", "FrozenSet[int]", false, Some(false), false),
];

pub fn assignment_of(types: &[Option<PyType>]) -> TypeAssignment {
    let mut a = TypeAssignment::new();
    for (i, t) in types.iter().enumerate() {
        if let Some(t) = t {
            a.insert(id("m.f"), i, t, Provenance::Gold);
        }
    }
    a
}

pub fn check_metric_arithmetic(random_sets: usize) -> Check {
    let gold: Vec<Option<PyType>> = METRIC_PAIRS.iter().map(|p| Some(PyType::parse(p.0).unwrap())).collect();
    let pred: Vec<Option<PyType>> =
        METRIC_PAIRS.iter().map(|p| (!p.1.is_empty()).then(|| PyType::parse(p.1).unwrap())).collect();
    let (gold, pred) = (assignment_of(&gold), assignment_of(&pred));
    let freq = ConstructorFrequencyTable::from_labels(gold.iter().map(|(_, _, a)| &a.ty), 100);
    let report = evaluate(&pred, &gold, &freq);
    let full = METRIC_PAIRS.iter().filter(|p| p.2).count();
    let adjusted_total = METRIC_PAIRS.iter().filter(|p| p.3.is_some()).count();
    let adjusted = METRIC_PAIRS.iter().filter(|p| p.3 == Some(true)).count();
    let base = METRIC_PAIRS.iter().filter(|p| p.3.is_some() && p.4).count();
    // Hand count of the table above: 8/20 full, 11/17 adjusted, 14/17 base.
    ensure((full, adjusted, base, adjusted_total) == (8, 11, 14, 17), || "hand count drifted".into())?;
    let got = (report.full.all.all.correct, report.adjusted.all.all.correct, report.base.all.all.correct);
    ensure(got == (8, 11, 14) && report.adjusted.all.all.total == 17 && report.full.all.all.total == 20, || {
        format!("full/adjusted/base correct = {got:?}, report {}", report.summary())
    })?;
    ensure(format!("{}", report.full.all.all) == "40.00", || format!("full accuracy {}", report.full.all.all))?;
    ensure(report.missing_predictions == 1 && report.filtered_labels == 3, || "tallies".into())?;

    let mut rng = rng(77);
    for set in 0..random_sets {
        let n = rng.random_range(1..40);
        let gold: Vec<Option<PyType>> = (0..n).map(|_| Some(random_type(&mut rng, 3))).collect();
        let pred: Vec<Option<PyType>> = gold
            .iter()
            .map(|g| match rng.random_range(0..4) {
                0 => g.clone(),
                1 => None,
                2 => g.as_ref().map(|g| PyType::new(g.head.clone(), vec![random_type(&mut rng, 2)])),
                _ => Some(random_type(&mut rng, 3)),
            })
            .collect();
        let (gold, pred) = (assignment_of(&gold), assignment_of(&pred));
        let freq = ConstructorFrequencyTable::from_labels(gold.iter().map(|(_, _, a)| &a.ty), 5);
        let r = evaluate(&pred, &gold, &freq);
        for (b, a) in [(r.base.all, r.adjusted.all), (r.base.common, r.adjusted.common), (r.base.rare, r.adjusted.rare)] {
            for (x, y) in [(b.all, a.all), (b.simple, a.simple), (b.complex, a.complex)] {
                ensure(x.correct >= y.correct && x.total == y.total, || format!("set {set}: base below adjusted"))?;
            }
        }
    }
    Ok(format!("20 pairs: full 8/20, adjusted 11/17, base 14/17 as hand-counted; base >= adjusted on {random_sets} random sets"))
}

/// Checks every input of `project` against the budget invariants.
pub fn budget_violations(project: &ProjectSource, assignment: &TypeAssignment, config: &ContextConfig) -> Vec<String> {
    let graph = build_usage_graph(project);
    let mut out = Vec::new();
    for e in project.elements() {
        let input = build_model_input(project, &graph, assignment, &e.id, &AtomTokenizer, config).unwrap();
        for v in input.budget_violations(&config.budgets) {
            out.push(format!("{}: {v}", e.id));
        }
        let tok = AtomTokenizer;
        let counts = [
            (tok.count(&input.preamble), input.token_counts.preamble),
            (tok.count(&input.usee_context), input.token_counts.usees),
            (tok.count(&input.main_code), input.token_counts.main),
            (tok.count(&input.user_context), input.token_counts.users),
        ];
        if counts.iter().any(|(a, b)| a != b) {
            out.push(format!("{}: reported counts differ from recount", e.id));
        }
        for i in 0..input.marker_count {
            let m = context::marker(input.marker_base + i);
            if input.main_code.matches(&m).count() != 1 {
                out.push(format!("{}: marker {m} not present exactly once", e.id));
            }
        }
        let distinct: BTreeSet<_> = input.slot_map.iter().collect();
        if distinct.len() != input.slot_map.len() || input.slot_map.iter().any(|s| *s >= e.slots.len()) {
            out.push(format!("{}: slot map is not injective into the slots", e.id));
        }
        if input.warnings.is_empty() && input.marker_count != e.slots.len() {
            out.push(format!("{}: untruncated main code lost markers", e.id));
        }
        for (side, items) in [("usee", &input.usee_items), ("user", &input.user_items)] {
            let certain_cut = items.iter().any(|i| i.certainty == Certainty::Certain && i.kept != Kept::Full);
            let potential_left = items.iter().any(|i| i.certainty == Certainty::Potential && i.kept != Kept::Dropped);
            if certain_cut && potential_left {
                out.push(format!("{}: {side} segment cut a certain item while keeping a potential one", e.id));
            }
        }
    }
    out
}

pub fn check_budget_safety(projects: usize) -> Check {
    let mut rng = rng(4096);
    let config = ContextConfig::default();
    let (mut inputs, mut truncated) = (0, 0);
    for k in 0..projects {
        let project = synthetic_project(&mut rng);
        let mut assignment = TypeAssignment::new();
        for e in project.elements() {
            for s in &e.slots {
                if rng.random_bool(0.5) {
                    assignment.insert(e.id.clone(), s.index, &random_type(&mut rng, 3), Provenance::Predicted);
                }
            }
        }
        let violations = budget_violations(&project, &assignment, &config);
        ensure(violations.is_empty(), || format!("project {k}: {}", violations[0]))?;
        let graph = build_usage_graph(&project);
        for e in project.elements() {
            let input = build_model_input(&project, &graph, &assignment, &e.id, &AtomTokenizer, &config).unwrap();
            inputs += 1;
            let cut = input.usee_items.iter().chain(&input.user_items).any(|i| i.kept != Kept::Full);
            truncated += usize::from(cut || !input.warnings.is_empty());
        }
    }
    ensure(truncated > 0, || "fuzzer never exceeded a budget".into())?;
    Ok(format!("{projects} projects, {inputs} inputs ({truncated} truncated): all budgets and center priority hold"))
}

pub fn check_schedules(dags: usize) -> Check {
    let mut rng = rng(200);
    for k in 0..dags {
        let n = rng.random_range(1..=100);
        let (nodes, edges) = random_dag(&mut rng, n);
        let graph = graph_of(&nodes, &edges);
        let two = make_plan(&graph, Strategy::TwoPass, k as u64);
        let mut seen: HashMap<&ElementId, usize> = HashMap::new();
        for v in &two.visit_schedule {
            *seen.entry(&v.element).or_default() += 1;
        }
        ensure(seen.len() == n && seen.values().all(|c| *c == 2), || format!("dag {k}: TwoPass visit counts"))?;
        let pos: HashMap<&ElementId, usize> =
            two.visit_schedule.iter().filter(|v| v.pass == 1).enumerate().map(|(i, v)| (&v.element, i)).collect();
        for &(u, v) in &edges {
            ensure(pos[&nodes[v]] < pos[&nodes[u]], || format!("dag {k}: usee {} after user {}", nodes[v], nodes[u]))?;
        }
        let first: Vec<_> = two.visit_schedule[..n].iter().map(|v| &v.element).collect();
        let second: Vec<_> = two.visit_schedule[n..].iter().map(|v| &v.element).collect();
        ensure(first.iter().rev().eq(second.iter()), || format!("dag {k}: pass 2 is not the reverse of pass 1"))?;
        for s in [Strategy::UserToUsee, Strategy::UseeToUser, Strategy::Random, Strategy::Independent] {
            let plan = make_plan(&graph, s, k as u64);
            let distinct: BTreeSet<_> = plan.visit_schedule.iter().map(|v| &v.element).collect();
            ensure(plan.visit_schedule.len() == n && distinct.len() == n, || format!("dag {k}: {s} visits"))?;
        }
        if k % 4 == 0 {
            let project = project_of(n, &edges);
            let pgraph = build_usage_graph(&project);
            let plan = make_plan(&pgraph, Strategy::TwoPass, 0);
            let (_, trace) =
                run_decoding(&project, &pgraph, &plan, &AnyPredictor, &AtomTokenizer, &DecodeConfig::default());
            ensure(trace.len() == 2 * n, || format!("dag {k}: trace has {} visits for {n} nodes", trace.len()))?;
        }
    }
    // Cycles: dense random digraphs, including self-loops.
    for k in 0..50 {
        let n = rng.random_range(2..=40);
        let edges: Vec<(usize, usize)> = (0..n * 3).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
        let nodes: Vec<ElementId> = (0..n).map(|i| id(&format!("m.f{i}"))).collect();
        let order = topological_order(&graph_of(&nodes, &edges));
        let distinct: BTreeSet<_> = order.iter().collect();
        ensure(order.len() == n && distinct.len() == n, || format!("cyclic graph {k}: order is not a permutation"))?;
        let project = project_of(n, &edges);
        let pgraph = build_usage_graph(&project);
        let plan = make_plan(&pgraph, Strategy::TwoPass, 0);
        let (_, trace) = run_decoding(&project, &pgraph, &plan, &AnyPredictor, &AtomTokenizer, &DecodeConfig::default());
        ensure(trace.len() == 2 * n, || format!("cyclic project {k}: {} visits", trace.len()))?;
    }
    Ok(format!("{dags} random DAGs and 50 cyclic graphs: visit counts and usee-first order hold"))
}

pub fn check_propagation() -> Check {
    let project = load("propagation");
    let (serial, _) = decode(&project, Strategy::UseeToUser);
    let (independent, _) = decode(&project, Strategy::Independent);
    for e in ["settings.default_settings", "app.load", "cli.main"] {
        let got = type_text(&serial, e, 0);
        ensure(got.as_deref() == Some("Settings"), || format!("UseeToUser typed {e} return as {got:?}"))?;
    }
    ensure(type_text(&independent, "settings.default_settings", 0).as_deref() == Some("Settings"), || {
        "callee body rule did not fire".into()
    })?;
    for e in ["app.load", "cli.main"] {
        let got = type_text(&independent, e, 0);
        ensure(got.as_deref() == Some("Any"), || format!("Independent typed {e} return as {got:?}"))?;
    }
    let reverse = load("reverse");
    let (one, _) = decode(&reverse, Strategy::UseeToUser);
    let (two, _) = decode(&reverse, Strategy::TwoPass);
    let (a, b) = (type_text(&one, "worker.process", 0), type_text(&two, "worker.process", 0));
    ensure(a.as_deref() == Some("Any") && b.as_deref() == Some("float"), || {
        format!("reverse fixture: UseeToUser {a:?}, TwoPass {b:?}")
    })?;
    Ok("UseeToUser types load/main as Settings, Independent leaves Any; TwoPass types process(data) as float".into())
}

pub fn check_override_dominance() -> Check {
    let project = load("fig1");
    let graph = build_usage_graph(&project);
    let gold = TypeAssignment::from_gold(&project);
    let oracle = |e: &ElementId, slot: usize| gold.type_of(e, slot).cloned();
    let config = DecodeConfig { record_inputs: true, ..DecodeConfig::default() };
    let (m, stats, trace) = run_user_guided(&project, &graph, &HeuristicPredictor, &AtomTokenizer, &config, &oracle);
    for (e, slot, label) in gold.iter() {
        let got = m.get(e, slot);
        ensure(got.is_some_and(|a| a.ty == label.ty && a.provenance == Provenance::UserOverride), || {
            format!("{e} slot {slot}: {got:?} instead of {}", label.ty)
        })?;
    }
    // Replay the trace step by step; every context item shown after an
    // override must render with the overriding types.
    let mut state = TypeAssignment::new();
    let mut checked = 0;
    for record in trace.records() {
        if let Some(input) = &record.input {
            for item in input.usee_items.iter().filter(|i| i.kept == Kept::Full) {
                let element = project.element(&item.element).expect("known element");
                let rendered = render_signature_item(element, &state, true);
                ensure(input.usee_context.contains(&rendered), || format!("{}: usee {} stale", record.element, item.element))?;
                for slot in &element.slots {
                    if let Some(a) = state.get(&element.id, slot.index).filter(|a| a.provenance == Provenance::UserOverride) {
                        ensure(rendered.contains(&annotation_source(&a.ty)), || format!("override missing in {rendered}"))?;
                        checked += 1;
                    }
                }
            }
        }
        for c in &record.diff {
            state.insert(record.element.clone(), c.slot, &c.after, c.provenance);
        }
    }
    ensure(checked > 0, || "no override reached a later context".into())?;
    ensure(!trace.records().iter().any(|r| matches!(r.status, VisitStatus::Failed { .. })), || "failed visits".into())?;
    Ok(format!(
        "{} labeled slots end with gold types; {checked} overridden slots verified in later contexts; agreement {:.2}%",
        gold.len(),
        stats.agreement()
    ))
}

/// Annotates, writes, reloads, and compares the read-back labels with the
/// assignment. Returns the report's full accuracy.
pub fn round_trip(project: &ProjectSource, assignment: &TypeAssignment, dir: &Path) -> Result<f64, String> {
    let (annotated, report) = apply_assignment(project, assignment);
    ensure(report.errors.is_empty(), || format!("apply errors {:?}", report.errors))?;
    annotated.write_to(dir).map_err(|e| e.to_string())?;
    let reloaded = load_project(dir).map_err(|e| e.to_string())?;
    let read_back = TypeAssignment::from_gold(&reloaded);
    let freq = ConstructorFrequencyTable::from_labels(assignment.iter().map(|(_, _, a)| &a.ty), 100);
    let r = evaluate(&read_back, assignment, &freq);
    ensure(r.label_count == assignment.len(), || "label count changed".into())?;
    r.full.all.all.percent().ok_or_else(|| "no labels".into())
}

pub const ROUND_TRIP_FIXTURES: [&str; 11] = [
    "fig1",
    "propagation",
    "reverse",
    "stats/alpha",
    "stats/beta",
    "stats/gamma",
    "coherence/assignment",
    "coherence/arg_type",
    "coherence/return_value",
    "coherence/attr_defined",
    "coherence/name_defined",
];

pub fn check_round_trip(scratch: &Path) -> Check {
    let mut lines = Vec::new();
    for name in ROUND_TRIP_FIXTURES {
        let project = load(name);
        let (m, _) = decode(&project, Strategy::TwoPass);
        if m.is_empty() {
            continue;
        }
        let full = round_trip(&project, &m, &scratch.join(name))?;
        ensure(format!("{full:.2}") == "100.00", || format!("{name}: full accuracy {full:.2}"))?;
        lines.push(name);
    }
    Ok(format!("100.00 full accuracy after annotate and re-parse on {} fixtures", lines.len()))
}

pub const COHERENCE_FIXTURES: [(&str, &str); 5] = [
    ("coherence/attr_defined", "attr-defined"),
    ("coherence/arg_type", "arg-type"),
    ("coherence/return_value", "return-value"),
    ("coherence/assignment", "assignment"),
    ("coherence/name_defined", "name-defined"),
];

pub fn check_coherence() -> Check {
    let checker = CheckerConfig::default();
    let codes: Vec<String> = COUNTED_CODES.map(String::from).to_vec();
    let mut unavailable = 0;
    for (dir, code) in COHERENCE_FIXTURES {
        let r = coherence_errors(&fixture(dir), &checker);
        if !r.available {
            ensure(r.total == 0 && r.reason.is_some() && r.per_code.len() == 5, || format!("{dir}: unclean report"))?;
            unavailable += 1;
            continue;
        }
        let expected: BTreeMap<String, usize> = codes.iter().map(|c| (c.clone(), usize::from(c == code))).collect();
        ensure(r.per_code == expected && r.total == 1, || format!("{dir}: {:?}\n{}", r.per_code, r.raw_output))?;
    }
    // Diagnostic lines in the checker's own format for the five fixtures.
    let sample = "m.py:6:11: error: \"Box\" has no attribute \"missing\"  [attr-defined]\n\
                  m.py:5:12: error: Argument 1 to \"double\" has incompatible type \"str\"; expected \"int\"  [arg-type]\n\
                  m.py:2:12: error: Incompatible return value type (got \"str\", expected \"int\")  [return-value]\n\
                  m.py:1:10: error: Incompatible types in assignment (expression has type \"str\", variable has type \"int\")  [assignment]\n\
                  m.py:1:12: error: Name \"Missing\" is not defined  [name-defined]\n";
    let (counts, unparsed) = parse_checker_output(sample, &codes);
    ensure(counts.values().all(|n| *n == 1) && unparsed == 0, || format!("sample parse {counts:?}"))?;
    if unavailable == COHERENCE_FIXTURES.len() {
        return Ok(format!(
            "checker `{}` not installed: all 5 fixtures report unavailable cleanly \
             (end-to-end counts not exercised; checker-format diagnostics parse to {{1,1,1,1,1}})",
            checker.program
        ));
    }
    ensure(unavailable == 0, || format!("checker unavailable for {unavailable}/5 fixtures only"))?;
    Ok("checker reported exactly one error per fixture for each of the 5 codes".into())
}
