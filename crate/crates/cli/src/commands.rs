//! Subcommands. Each writes its JSON artifact to `--out` or stdout.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pytypefill::eval::{coherence_errors, coherence_of_assignment, dataset_stats, DatasetStats};
use pytypefill::project::LoadError;
use pytypefill::pytype::ConstructorFrequencyTable;
use pytypefill::{
    apply_assignment, build_model_input, build_usage_graph, evaluate, load_project, make_plan, run_decoding_from,
    AtomTokenizer, DecodeTrace, ElementId, EvalReport, ModelInput, ProjectSource, Provenance, Strategy, TypeAssignment,
    UsageGraph,
};

use crate::config::{BudgetLayer, Config, ConfigError, ConfigLayer};
use crate::{exit, CliError};

pub const CONTEXTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "pytypefill", version, about = "Project-scale type annotation inference for Python")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand. They override the environment and
/// the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalOpts {
    /// TOML config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// `heuristic` or the URL of a model server.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    #[arg(long, global = true, value_name = "TOKENS")]
    pub preamble_budget: Option<usize>,
    #[arg(long, global = true, value_name = "TOKENS")]
    pub usee_budget: Option<usize>,
    #[arg(long, global = true, value_name = "TOKENS")]
    pub main_budget: Option<usize>,
    #[arg(long, global = true, value_name = "TOKENS")]
    pub user_budget: Option<usize>,
    #[arg(long, global = true, value_name = "TOKENS")]
    pub total_budget: Option<usize>,
    /// Number of the first marker in the main code.
    #[arg(long, global = true)]
    pub marker_base: Option<usize>,
    #[arg(long, global = true)]
    pub beam_width: Option<usize>,
    #[arg(long, global = true)]
    pub diversity_penalty: Option<f64>,
    /// Model server request timeout.
    #[arg(long, global = true, value_name = "SECONDS")]
    pub timeout_secs: Option<u64>,
    #[arg(long, global = true)]
    pub retries: Option<usize>,
    /// Concurrent model server requests.
    #[arg(long, global = true)]
    pub max_in_flight: Option<usize>,
    /// Type checker command line.
    #[arg(long, global = true)]
    pub checker: Option<String>,
    /// Concurrent checker processes.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

impl GlobalOpts {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            budgets: BudgetLayer {
                preamble: self.preamble_budget,
                usees: self.usee_budget,
                main: self.main_budget,
                users: self.user_budget,
                total: self.total_budget,
            },
            marker_base: self.marker_base,
            backend: self.backend.clone(),
            timeout_secs: self.timeout_secs,
            retries: self.retries,
            max_in_flight: self.max_in_flight,
            beam_width: self.beam_width,
            diversity_penalty: self.diversity_penalty,
            checker: self.checker.clone(),
            workers: self.workers,
            ..ConfigLayer::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProjectArg {
    /// Root directory of the Python project.
    #[arg(long)]
    pub project: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeOpts {
    /// twopass, useetouser, usertousee, random, or independent.
    #[arg(long, default_value = "twopass", value_parser = parse_strategy)]
    pub strategy: Strategy,
    /// Seed of the random schedule.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict the missing annotations and write an annotated copy of the
    /// project with assignment.json and trace.json. Existing annotations are
    /// kept and shown to the predictor.
    Annotate {
        #[command(flatten)]
        project: ProjectArg,
        /// Output directory; defaults to `<project>.annotated` next to the project.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        decode: DecodeOpts,
        /// Also write `Any` annotations into the sources.
        #[arg(long)]
        keep_any: bool,
    },
    /// Print the usage graph.
    Graph {
        #[command(flatten)]
        project: ProjectArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the model inputs built for each element.
    Contexts {
        #[command(flatten)]
        project: ProjectArg,
        /// Only this element (repeatable).
        #[arg(long)]
        element: Vec<String>,
        /// Assignment whose types are shown in the context segments.
        #[arg(long)]
        assignment: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict every slot and print the assignment.
    Decode {
        #[command(flatten)]
        project: ProjectArg,
        #[command(flatten)]
        decode: DecodeOpts,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the visit trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score predictions against the project's existing annotations.
    Eval {
        #[command(flatten)]
        project: ProjectArg,
        /// Assignment to score; when absent the project is decoded.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[command(flatten)]
        decode: DecodeOpts,
        /// Constructors counted as common.
        #[arg(long, default_value_t = 100)]
        top_k: usize,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count type checker errors, optionally after applying an assignment.
    Check {
        #[command(flatten)]
        project: ProjectArg,
        #[arg(long)]
        assignment: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the interactive review session service.
    Serve {
        /// Project used when a session request names none.
        #[arg(long)]
        project: Option<PathBuf>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        /// Directory holding the session logs.
        #[arg(long)]
        state_dir: Option<PathBuf>,
        /// Follow the usee-to-user pass with a second, reverse pass.
        #[arg(long)]
        second_pass: bool,
        /// Origin allowed to call the service from a browser.
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

impl Cli {
    /// Resolves the configuration: command line, then environment (read
    /// through `env`), then the config file, then defaults.
    pub fn config(&self, env: &dyn Fn(&str) -> Option<String>) -> Result<Config, CliError> {
        let file = match &self.global.config {
            Some(path) => ConfigLayer::from_toml_file(path)?,
            None => ConfigLayer::default(),
        };
        let mut cli = self.global.layer();
        if let Command::Serve { host, port, state_dir, cors_origin, .. } = &self.command {
            cli.host = host.clone();
            cli.port = *port;
            cli.state_dir = state_dir.clone();
            cli.cors_origin = cors_origin.clone();
        }
        Ok(Config::resolve([&file, &ConfigLayer::from_env(env), &cli])?)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(exit::BAD_ARGS, e.to_string())
    }
}

fn load(root: &Path) -> Result<ProjectSource, CliError> {
    let project = match load_project(root) {
        Ok(p) => p,
        Err(e @ LoadError::NoParseableFiles(_)) => return Err(CliError::new(exit::NO_ELEMENTS, e.to_string())),
        Err(e) => return Err(CliError::new(exit::LOAD, e.to_string())),
    };
    for s in project.skipped() {
        log::warn!("skipped {}: {}", s.path.display(), s.reason);
    }
    Ok(project)
}

fn require_elements(project: &ProjectSource, root: &Path) -> Result<(), CliError> {
    if project.element_count() == 0 {
        return Err(CliError::new(exit::NO_ELEMENTS, format!("no functions or variables to annotate under {}", root.display())));
    }
    Ok(())
}

fn read_assignment(path: &Path) -> Result<TypeAssignment, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(exit::BAD_ARGS, format!("cannot read {}: {e}", path.display())))?;
    TypeAssignment::from_json(&text)
        .map_err(|e| CliError::new(exit::BAD_ARGS, format!("{} is not an assignment: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, &(text.to_string() + "\n")),
        None => writeln!(stdout, "{text}").map_err(|e| CliError::new(exit::OTHER, e.to_string())),
    }
}

/// Fails when any visit could not reach the backend; callers then write
/// nothing.
fn ensure_backend_reached(trace: &DecodeTrace) -> Result<(), CliError> {
    use pytypefill::decoder::VisitStatus;
    let unreachable: Vec<&str> = trace
        .records()
        .iter()
        .filter_map(|r| match &r.status {
            VisitStatus::Failed { error, retriable: true } => Some(error.as_str()),
            _ => None,
        })
        .collect();
    match unreachable.first() {
        Some(first) => Err(CliError::new(
            exit::BACKEND,
            format!("{} of {} visits could not reach the backend: {first}", unreachable.len(), trace.len()),
        )),
        None => Ok(()),
    }
}

struct Decoded {
    assignment: TypeAssignment,
    trace: DecodeTrace,
}

/// Decodes the comment-stripped project starting from `initial`.
fn decode(
    labeled: &ProjectSource,
    config: &Config,
    opts: &DecodeOpts,
    initial: TypeAssignment,
) -> Result<Decoded, CliError> {
    let project = labeled.preprocessed();
    let graph = build_usage_graph(&project);
    let plan = make_plan(&graph, opts.strategy, opts.seed);
    let predictor = config.predictor()?;
    let (assignment, trace) = run_decoding_from(
        &project,
        &graph,
        &plan,
        predictor.as_ref(),
        &AtomTokenizer,
        &config.decode_config(),
        initial,
    );
    ensure_backend_reached(&trace)?;
    for r in trace.records() {
        if let pytypefill::decoder::VisitStatus::Failed { error, .. } = &r.status {
            log::warn!("{}: {error}", r.element);
        }
    }
    Ok(Decoded { assignment, trace })
}

/// Entries to write into the sources: everything but the existing
/// annotations, which stay as the user wrote them.
fn new_annotations(m: &TypeAssignment, keep_any: bool) -> TypeAssignment {
    let mut out = TypeAssignment::new();
    for (id, slot, a) in m.iter() {
        if a.provenance != Provenance::Gold && (keep_any || !a.ty.is_any()) {
            out.insert(id.clone(), slot, &a.ty, a.provenance);
        }
    }
    out
}

fn default_annotate_dir(root: &Path) -> PathBuf {
    let root = root.components().as_path();
    let name = root.file_name().map_or_else(|| "project".into(), |n| n.to_string_lossy().into_owned());
    root.with_file_name(format!("{name}.annotated"))
}

#[derive(Serialize)]
struct ContextsFile<'a> {
    schema_version: u32,
    inputs: &'a [ModelInput],
}

#[derive(Serialize)]
struct EvalFile<'a> {
    schema_version: u32,
    report: &'a EvalReport,
    stats: &'a DatasetStats,
}

/// Runs one subcommand. Human-readable output goes to `stdout`.
pub fn run(cli: &Cli, env: &dyn Fn(&str) -> Option<String>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = cli.config(env)?;
    match &cli.command {
        Command::Annotate { project, out, decode: opts, keep_any } => {
            let labeled = load(&project.project)?;
            require_elements(&labeled, &project.project)?;
            let Decoded { assignment, trace, .. } = decode(&labeled, &config, opts, TypeAssignment::from_gold(&labeled))?;
            let (annotated, report) = apply_assignment(&labeled, &new_annotations(&assignment, *keep_any));
            for e in &report.errors {
                log::warn!("{e}");
            }
            let dir = out.clone().unwrap_or_else(|| default_annotate_dir(&project.project));
            annotated.write_to(&dir).map_err(|e| CliError::io(&dir, e))?;
            write_file(&dir.join("assignment.json"), &(assignment.to_json() + "\n"))?;
            write_file(&dir.join("trace.json"), &(trace.to_json() + "\n"))?;
            writeln!(
                stdout,
                "annotated {} slots in {} elements; wrote {}",
                report.applied,
                labeled.element_count(),
                dir.display()
            )
            .map_err(|e| CliError::new(exit::OTHER, e.to_string()))?;
        }
        Command::Graph { project, out } => {
            let p = load(&project.project)?;
            emit(out.as_deref(), stdout, &build_usage_graph(&p).to_json())?;
        }
        Command::Contexts { project, element, assignment, out } => {
            let p = load(&project.project)?.preprocessed();
            let graph = build_usage_graph(&p);
            let m = assignment.as_deref().map(read_assignment).transpose()?.unwrap_or_default();
            let ids: Vec<ElementId> = if element.is_empty() {
                graph.nodes().to_vec()
            } else {
                element.iter().map(|e| ElementId::from(e.as_str())).collect()
            };
            let inputs = contexts(&p, &graph, &m, &ids, &config)?;
            let json = serde_json::to_string_pretty(&ContextsFile { schema_version: CONTEXTS_SCHEMA_VERSION, inputs: &inputs })
                .expect("model inputs serialize");
            emit(out.as_deref(), stdout, &json)?;
        }
        Command::Decode { project, decode: opts, out, trace } => {
            let p = load(&project.project)?;
            require_elements(&p, &project.project)?;
            let d = decode(&p, &config, opts, TypeAssignment::new())?;
            if let Some(path) = trace {
                write_file(path, &(d.trace.to_json() + "\n"))?;
            }
            emit(out.as_deref(), stdout, &d.assignment.to_json())?;
        }
        Command::Eval { project, predictions, decode: opts, top_k, out } => {
            let labeled = load(&project.project)?;
            let gold = TypeAssignment::from_gold(&labeled);
            let predicted = match predictions {
                Some(path) => read_assignment(path)?,
                None => {
                    require_elements(&labeled, &project.project)?;
                    decode(&labeled, &config, opts, TypeAssignment::new())?.assignment
                }
            };
            let freq = ConstructorFrequencyTable::from_labels(gold.iter().map(|(_, _, a)| &a.ty), *top_k);
            let report = evaluate(&predicted, &gold, &freq);
            let stats = dataset_stats(&[&labeled], &freq);
            let ratio = |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
            let mut text = report.summary();
            text.push_str(&format!(
                "slots: {}, rare ratio: {}, complex ratio: {}, average size: {}",
                stats.slots,
                ratio(stats.rare_ratio),
                ratio(stats.complex_ratio),
                ratio(stats.average_size)
            ));
            writeln!(stdout, "{text}").map_err(|e| CliError::new(exit::OTHER, e.to_string()))?;
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&EvalFile { schema_version: report.schema_version, report: &report, stats: &stats })
                    .expect("report serializes");
                write_file(path, &(json + "\n"))?;
            }
        }
        Command::Check { project, assignment, out } => {
            let checker = config.checker_config();
            let report = match assignment {
                Some(path) => {
                    let p = load(&project.project)?;
                    coherence_of_assignment(&p, &read_assignment(path)?, &checker)
                }
                None => {
                    if !project.project.is_dir() {
                        return Err(CliError::new(exit::LOAD, format!("project root {} does not exist", project.project.display())));
                    }
                    coherence_errors(&project.project, &checker)
                }
            };
            if let Some(reason) = &report.reason {
                log::warn!("checker unavailable: {reason}");
            }
            emit(out.as_deref(), stdout, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
        }
        Command::Serve { project, second_pass, .. } => {
            crate::server::serve_blocking(config, project.clone(), *second_pass)?;
        }
    }
    Ok(())
}

fn contexts(
    project: &ProjectSource,
    graph: &UsageGraph,
    m: &TypeAssignment,
    ids: &[ElementId],
    config: &Config,
) -> Result<Vec<ModelInput>, CliError> {
    let context = config.decode_config().context;
    ids.iter()
        .filter(|id| project.element(id).is_some_and(|e| !e.slots.is_empty()) || !graph.contains(id))
        .map(|id| {
            build_model_input(project, graph, m, id, &AtomTokenizer, &context)
                .map_err(|e| CliError::new(exit::BAD_ARGS, e.to_string()))
        })
        .collect()
}
