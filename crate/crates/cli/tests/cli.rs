use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use serde_json::Value;

use pytypefill::decoder::VisitStatus;
use pytypefill::{build_usage_graph, load_project, DecodeTrace, TypeAssignment, UsageGraph};
use pytypefill_cli::config::{ENV_BACKEND_URL, ENV_CHECKER};
use pytypefill_cli::{exit, run, Backend, Cli};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Runs the binary with a clean environment for its own variables.
fn bin(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pytypefill"))
        .args(args)
        .env_remove(ENV_BACKEND_URL)
        .env_remove(ENV_CHECKER)
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn in_process(args: &[&str]) -> Result<String, pytypefill_cli::CliError> {
    let mut argv = vec!["pytypefill"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(argv).unwrap();
    let mut out = Vec::new();
    run(&cli, &|_| None, &mut out).map(|()| String::from_utf8(out).unwrap())
}

fn files(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&path).unwrap());
        }
    }
    out
}

fn closed_port_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    format!("http://127.0.0.1:{port}/")
}

/// Golden copies were reviewed by hand: `__init__` methods without a return
/// get `-> None`, functions returning a constructed class get that class,
/// existing annotations stay as written, and unknown parameters (`Any`) stay
/// unannotated.
#[test]
fn annotate_matches_the_golden_copies() {
    for name in ["fig1", "propagation"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join(name);
        let (code, stdout, stderr) = bin(&[
            "annotate",
            "--project",
            fixture(name).to_str().unwrap(),
            "--backend",
            "heuristic",
            "--strategy",
            "twopass",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stderr}");
        assert!(stdout.contains("annotated"));
        let mut written = files(&out);
        let trace = DecodeTrace::from_json(&written.remove("trace.json").unwrap()).unwrap();
        let elements = load_project(&fixture(name)).unwrap().element_count();
        assert_eq!(trace.len(), 2 * elements);
        assert!(trace.records().iter().all(|r| r.status == VisitStatus::Predicted));
        let expected = files(&golden(name));
        assert_eq!(written.keys().collect::<Vec<_>>(), expected.keys().collect::<Vec<_>>());
        for (file, text) in &expected {
            assert_eq!(&written[file], text, "{name}/{file}");
        }
        // Existing annotations are kept unchanged.
        let m = TypeAssignment::from_json(&written["assignment.json"]).unwrap();
        let gold = TypeAssignment::from_gold(&load_project(&fixture(name)).unwrap());
        for (id, slot, a) in gold.iter() {
            assert_eq!(m.get(id, slot), Some(a), "{id} {slot}");
        }
    }
}

#[test]
fn annotate_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |name: &str| {
        let out = dir.path().join(name);
        let (code, _, stderr) = bin(&[
            "annotate",
            "--project",
            fixture("propagation").to_str().unwrap(),
            "--strategy",
            "random",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stderr}");
        let mut f = files(&out);
        // Wall-clock timestamps are the only run-dependent field.
        let mut trace: Value = serde_json::from_str(&f.remove("trace.json").unwrap()).unwrap();
        for r in trace["records"].as_array_mut().unwrap() {
            r.as_object_mut().unwrap().remove("timestamp_ms");
        }
        (f, trace)
    };
    assert_eq!(run_once("a"), run_once("b"));
}

#[test]
fn annotate_imports_project_classes_it_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let (code, _, stderr) =
        bin(&["annotate", "--project", fixture("propagation").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let app = std::fs::read_to_string(out.join("app.py")).unwrap();
    assert!(app.contains("def load() -> Settings:"), "{app}");
    assert!(app.contains("from settings import Settings\n"), "{app}");
    let project = load_project(&out).unwrap();
    assert!(project.skipped().is_empty());
}

#[test]
fn annotate_without_keep_any_writes_no_any() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain");
    let keep = dir.path().join("keep");
    let project = fixture("reverse");
    let p = project.to_str().unwrap();
    assert_eq!(bin(&["annotate", "--project", p, "--strategy", "useetouser", "--out", plain.to_str().unwrap()]).0, 0);
    assert_eq!(
        bin(&["annotate", "--project", p, "--strategy", "useetouser", "--keep-any", "--out", keep.to_str().unwrap()]).0,
        0
    );
    let m = TypeAssignment::from_json(&std::fs::read_to_string(plain.join("assignment.json")).unwrap()).unwrap();
    assert!(m.iter().any(|(_, _, a)| a.ty.is_any()), "the fixture must yield an Any prediction");
    let any_in = |dir: &Path| files(dir).iter().filter(|(n, _)| n.ends_with(".py")).any(|(_, t)| t.contains("Any"));
    assert!(!any_in(&plain));
    assert!(any_in(&keep));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let fig1 = fixture("fig1");
    let fig1 = fig1.to_str().unwrap();

    let (code, _, _) = bin(&["annotate", "--project", fixture("empty").to_str().unwrap(), "--out", o]);
    assert_eq!(code, i32::from(exit::NO_ELEMENTS));
    assert!(!out.exists());

    let blank = dir.path().join("blank");
    std::fs::create_dir(&blank).unwrap();
    std::fs::write(blank.join("m.py"), "import os\n").unwrap();
    assert_eq!(bin(&["decode", "--project", blank.to_str().unwrap()]).0, i32::from(exit::NO_ELEMENTS));

    let (code, _, stderr) = bin(&["annotate", "--project", "/definitely/not/here", "--out", o]);
    assert_eq!(code, i32::from(exit::LOAD), "{stderr}");
    assert!(!out.exists());

    let url = closed_port_url();
    let (code, stdout, stderr) = bin(&["annotate", "--project", fig1, "--backend", &url, "--retries", "0", "--out", o]);
    assert_eq!(code, i32::from(exit::BACKEND), "{stderr}");
    assert!(stderr.contains("could not reach the backend"), "{stderr}");
    assert!(stdout.is_empty());
    assert!(!out.exists());
    let (code, stdout, _) = bin(&["decode", "--project", fig1, "--backend", &url, "--retries", "0"]);
    assert_eq!(code, i32::from(exit::BACKEND));
    assert!(stdout.is_empty());

    for bad in [
        vec!["frobnicate"],
        vec!["decode"],
        vec!["decode", "--project", fig1, "--strategy", "sideways"],
        vec!["decode", "--project", fig1, "--main-budget", "0"],
        vec!["decode", "--project", fig1, "--main-budget", "5000"],
        vec!["decode", "--project", fig1, "--backend", "ftp://x"],
        vec!["contexts", "--project", fig1, "--element", "nowhere.f"],
        vec!["eval", "--project", fig1, "--predictions", "/no/such/file.json"],
    ] {
        let (code, _, stderr) = bin(&bad);
        assert_eq!(code, i32::from(exit::BAD_ARGS), "{bad:?}: {stderr}");
    }
    assert!(out.read_dir().is_err());
    assert_eq!(bin(&["--help"]).0, 0);
}

#[test]
fn decode_prints_a_versioned_assignment_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("trace.json");
    let text = in_process(&[
        "decode",
        "--project",
        fixture("reverse").to_str().unwrap(),
        "--strategy",
        "twopass",
        "--trace",
        trace_path.to_str().unwrap(),
    ])
    .unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], 1);
    let m = TypeAssignment::from_json(&text).unwrap();
    let trace_text = std::fs::read_to_string(&trace_path).unwrap();
    assert_eq!(serde_json::from_str::<Value>(&trace_text).unwrap()["schema_version"], 1);
    let trace = DecodeTrace::from_json(&trace_text).unwrap();
    assert_eq!(trace.replay(&TypeAssignment::new()), m);
}

#[test]
fn graph_and_contexts() {
    let fig1 = fixture("fig1");
    let text = in_process(&["graph", "--project", fig1.to_str().unwrap()]).unwrap();
    let g = UsageGraph::from_json(&text).unwrap();
    assert_eq!(g, build_usage_graph(&load_project(&fig1).unwrap()));

    let text = in_process(&["contexts", "--project", fig1.to_str().unwrap()]).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["inputs"].as_array().unwrap().len(), 8);

    let text = in_process(&[
        "contexts",
        "--project",
        fig1.to_str().unwrap(),
        "--element",
        "eval.eval_on_dataset",
        "--main-budget",
        "12",
        "--marker-base",
        "1",
    ])
    .unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let inputs = v["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    assert!(inputs[0]["token_counts"]["main"].as_u64().unwrap() <= 12);
    assert_eq!(inputs[0]["marker_base"], 1);
    assert!(inputs[0]["main_code"].as_str().unwrap().contains("<extra_id_1>"));

    // Types from a supplied assignment show up in the usee segment.
    let dir = tempfile::tempdir().unwrap();
    let assignment = dir.path().join("m.json");
    let mut m = TypeAssignment::new();
    m.insert("data.chunk_srcs".into(), 3, &pytypefill::PyType::parse("ChunkedDataset").unwrap(), pytypefill::Provenance::UserOverride);
    std::fs::write(&assignment, m.to_json()).unwrap();
    let text = in_process(&[
        "contexts",
        "--project",
        fig1.to_str().unwrap(),
        "--element",
        "eval.eval_on_dataset",
        "--assignment",
        assignment.to_str().unwrap(),
    ])
    .unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!(v["inputs"][0]["usee_context"].as_str().unwrap().contains("-> ChunkedDataset"), "{text}");
}

#[test]
fn eval_scores_gold_predictions_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = fixture("fig1");
    let gold = dir.path().join("gold.json");
    std::fs::write(&gold, TypeAssignment::from_gold(&load_project(&fig1).unwrap()).to_json()).unwrap();
    let report = dir.path().join("report.json");
    let text = in_process(&[
        "eval",
        "--project",
        fig1.to_str().unwrap(),
        "--predictions",
        gold.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ])
    .unwrap();
    assert!(text.contains("full      all     100.00"), "{text}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["report"]["full"]["all"]["all"]["correct"], v["report"]["label_count"]);
    assert_eq!(v["stats"]["labels"], 18);

    let decoded = in_process(&["eval", "--project", fig1.to_str().unwrap(), "--strategy", "useetouser"]).unwrap();
    assert!(decoded.contains("labels: 18"), "{decoded}");
}

#[cfg(unix)]
#[test]
fn check_runs_the_configured_checker() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("fake-checker");
    std::fs::write(
        &script,
        "#!/bin/sh\necho 'm.py:1:1: error: bad arg  [arg-type]'\necho 'm.py:2:1: error: gone  [name-defined]'\nexit 1\n",
    )
    .unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    let fig1 = fixture("fig1");
    let cli = Cli::try_parse_from(["pytypefill", "check", "--project", fig1.to_str().unwrap()]).unwrap();
    let mut out = Vec::new();
    let script_path = script.to_str().unwrap().to_string();
    run(&cli, &|k| (k == ENV_CHECKER).then(|| script_path.clone()), &mut out).unwrap();
    let v: Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["available"], true);
    assert_eq!(v["total"], 2);
    assert_eq!(v["per_code"]["arg-type"], 1);

    let text = in_process(&["check", "--project", fig1.to_str().unwrap(), "--checker", "no-such-checker-binary"]).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["available"], false);
    assert_eq!(v["total"], 0);
}

#[test]
fn command_line_beats_environment_beats_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cfg.toml");
    std::fs::write(&file, "backend = \"http://file:1\"\nchecker = \"file-checker\"\n[budgets]\nusers = 64\n").unwrap();
    let f = file.to_str().unwrap();
    let env = |k: &str| (k == ENV_BACKEND_URL).then(|| "http://env:2".to_string());

    let cli = Cli::try_parse_from(["pytypefill", "graph", "--project", ".", "--config", f]).unwrap();
    let c = cli.config(&|_| None).unwrap();
    assert_eq!(c.backend, Backend::Wire("http://file:1".into()));
    assert_eq!(c.checker, "file-checker");
    assert_eq!(c.budgets.users, 64);

    let c = cli.config(&env).unwrap();
    assert_eq!(c.backend, Backend::Wire("http://env:2".into()));
    assert_eq!(c.checker, "file-checker");

    let cli = Cli::try_parse_from(["pytypefill", "graph", "--project", ".", "--config", f, "--backend", "heuristic"]).unwrap();
    assert_eq!(cli.config(&env).unwrap().backend, Backend::Heuristic);

    std::fs::write(&file, "bogus = 1\n").unwrap();
    let cli = Cli::try_parse_from(["pytypefill", "graph", "--project", ".", "--config", f]).unwrap();
    assert_eq!(cli.config(&|_| None).unwrap_err().code, exit::BAD_ARGS);
}
