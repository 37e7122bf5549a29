mod common;

use std::collections::HashMap;
use std::sync::Mutex;

use common::{decode, graph_of, id, load, project_of, random_dag, rng, type_text, AnyPredictor};
use proptest::prelude::*;
use pytypefill::decoder::{run_decoding_from, VisitStatus};
use pytypefill::predictor::{PredictError, PredictionRequest, PredictionResult};
use pytypefill::*;
use pytypefill::Strategy;

fn fig1() -> ProjectSource {
    load("fig1").preprocessed()
}

#[test]
fn usee_types_reach_users_in_the_first_pass() {
    let project = fig1();
    let graph = build_usage_graph(&project);
    let plan = make_plan(&graph, Strategy::TwoPass, 0);
    let config = DecodeConfig { record_inputs: true, ..DecodeConfig::default() };
    let (m, trace) = run_decoding(&project, &graph, &plan, &HeuristicPredictor, &AtomTokenizer, &config);
    let eval = id("eval.eval_on_dataset");
    let first = trace.visits_of(&eval).find(|r| r.pass == 1).unwrap();
    let usees = &first.input.as_ref().unwrap().usee_context;
    assert!(usees.contains("def chunk_srcs(") && usees.contains("-> ChunkedDataset"), "{usees}");
    assert_eq!(type_text(&m, "data.chunk_srcs", 3).as_deref(), Some("ChunkedDataset"));
    assert_eq!(type_text(&m, "model.ModelWrapper.predict", 0).as_deref(), Some("ChunkedDataset"));
    assert_eq!(type_text(&m, "model.ModelWrapper.predict_on_batch", 0).as_deref(), Some("ChunkedDataset"));
    assert_eq!(trace.len(), 2 * graph.nodes().len());
}

#[test]
fn replaying_a_trace_rebuilds_the_assignment() {
    for strategy in Strategy::ALL {
        let project = fig1();
        let (m, trace) = decode(&project, strategy);
        assert_eq!(trace.replay(&TypeAssignment::new()), m, "{strategy}");
        let back = DecodeTrace::from_jsonl(&trace.to_jsonl()).unwrap();
        assert_eq!(back, trace);
        assert_eq!(back.replay(&TypeAssignment::new()), m);
    }
}

#[test]
fn strategy_names_round_trip() {
    for s in Strategy::ALL {
        assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
    }
    assert_eq!("two-pass".parse::<Strategy>().unwrap(), Strategy::TwoPass);
    assert_eq!("UseeToUser".parse::<Strategy>().unwrap(), Strategy::UseeToUser);
    assert!("sideways".parse::<Strategy>().is_err());
}

#[test]
fn random_plan_depends_only_on_the_seed() {
    let graph = build_usage_graph(&fig1());
    assert_eq!(make_plan(&graph, Strategy::Random, 5), make_plan(&graph, Strategy::Random, 5));
    let orders: std::collections::BTreeSet<Vec<ElementId>> = (0..20)
        .map(|s| make_plan(&graph, Strategy::Random, s).visit_schedule.into_iter().map(|v| v.element).collect())
        .collect();
    assert!(orders.len() > 1);
}

#[test]
fn overrides_in_the_initial_assignment_are_kept() {
    let project = load("propagation").preprocessed();
    let graph = build_usage_graph(&project);
    let mut initial = TypeAssignment::new();
    let load_id = id("app.load");
    initial.insert(load_id.clone(), 0, &PyType::parse("Config").unwrap(), Provenance::UserOverride);
    let plan = make_plan(&graph, Strategy::UseeToUser, 0);
    let (m, _) =
        run_decoding_from(&project, &graph, &plan, &HeuristicPredictor, &AtomTokenizer, &DecodeConfig::default(), initial);
    assert_eq!(type_text(&m, "app.load", 0).as_deref(), Some("Config"));
    // The override flows to the caller like any other type.
    assert_eq!(type_text(&m, "cli.main", 0).as_deref(), Some("Config"));
}

#[test]
fn guided_run_matches_gold_and_reports_agreement() {
    let project = load("propagation");
    let graph = build_usage_graph(&project);
    let oracle = |e: &ElementId, slot: usize| (e.as_str() == "app.load" && slot == 0).then(|| PyType::simple("Settings"));
    let (m, stats, trace) =
        run_user_guided(&project, &graph, &HeuristicPredictor, &AtomTokenizer, &DecodeConfig::default(), &oracle);
    assert_eq!(stats.oracle_slots, 1);
    assert_eq!(stats.exact_matches, 1);
    assert_eq!(m.get(&id("app.load"), 0).unwrap().provenance, Provenance::UserOverride);
    assert_eq!(trace.failures(), 0);
}

/// Fails on one element, answers Any elsewhere.
struct FlakyPredictor(ElementId, Mutex<usize>);

impl Predictor for FlakyPredictor {
    fn name(&self) -> &str {
        "flaky"
    }

    fn predict(&self, request: &PredictionRequest) -> Result<PredictionResult, PredictError> {
        *self.1.lock().unwrap() += 1;
        if request.main_code.contains(&format!("def {}(", self.0.as_str().rsplit('.').next().unwrap())) {
            return Err(PredictError::Unreachable("backend down".into()));
        }
        AnyPredictor.predict(request)
    }
}

#[test]
fn a_failed_visit_is_recorded_and_decoding_continues() {
    let project = load("propagation");
    let graph = build_usage_graph(&project);
    let plan = make_plan(&graph, Strategy::UseeToUser, 0);
    let flaky = FlakyPredictor(id("app.load"), Mutex::new(0));
    let (m, trace) = run_decoding(&project, &graph, &plan, &flaky, &AtomTokenizer, &DecodeConfig::default());
    assert_eq!(trace.failures(), 1);
    let load_id = id("app.load");
    let failed = trace.visits_of(&load_id).next().unwrap();
    assert!(matches!(&failed.status, VisitStatus::Failed { error, retriable: true } if error.contains("backend down")));
    assert!(m.get(&id("app.load"), 0).is_none());
    assert!(m.get(&id("cli.main"), 0).is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedules_have_the_documented_shape(seed in any::<u64>(), n in 1usize..100) {
        let (nodes, edges) = random_dag(&mut rng(seed), n);
        let graph = graph_of(&nodes, &edges);
        let topo = topological_order(&graph);
        let plan = make_plan(&graph, Strategy::TwoPass, seed);
        let pass1: Vec<ElementId> = plan.visit_schedule.iter().filter(|v| v.pass == 1).map(|v| v.element.clone()).collect();
        let pass2: Vec<ElementId> = plan.visit_schedule.iter().filter(|v| v.pass == 2).map(|v| v.element.clone()).collect();
        prop_assert_eq!(&pass1, &topo);
        prop_assert_eq!(pass2, topo.iter().rev().cloned().collect::<Vec<_>>());
        let u2u: Vec<ElementId> = make_plan(&graph, Strategy::UserToUsee, 0).visit_schedule.into_iter().map(|v| v.element).collect();
        prop_assert_eq!(u2u, topo.iter().rev().cloned().collect::<Vec<_>>());
        let indep: Vec<ElementId> = make_plan(&graph, Strategy::Independent, 0).visit_schedule.into_iter().map(|v| v.element).collect();
        prop_assert_eq!(indep, nodes.clone());
        let mut random: Vec<ElementId> = make_plan(&graph, Strategy::Random, seed).visit_schedule.into_iter().map(|v| v.element).collect();
        random.sort();
        let mut sorted = nodes.clone();
        sorted.sort();
        prop_assert_eq!(random, sorted);
    }

    #[test]
    fn traces_follow_the_plan(seed in any::<u64>(), n in 1usize..25) {
        let (_, edges) = random_dag(&mut rng(seed), n);
        let project = project_of(n, &edges);
        let graph = build_usage_graph(&project);
        for strategy in Strategy::ALL {
            let plan = make_plan(&graph, strategy, seed);
            let (m, trace) = run_decoding(&project, &graph, &plan, &AnyPredictor, &AtomTokenizer, &DecodeConfig::default());
            let visited: Vec<(usize, ElementId)> = trace.records().iter().map(|r| (r.pass, r.element.clone())).collect();
            let planned: Vec<(usize, ElementId)> = plan.visit_schedule.iter().map(|v| (v.pass, v.element.clone())).collect();
            prop_assert_eq!(visited, planned);
            let mut counts: HashMap<&ElementId, usize> = HashMap::new();
            for r in trace.records() {
                *counts.entry(&r.element).or_default() += 1;
            }
            prop_assert!(counts.values().all(|c| *c == strategy.passes()));
            prop_assert_eq!(m.len(), 3 * n);
        }
    }
}
