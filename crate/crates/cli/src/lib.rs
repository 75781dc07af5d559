//! `astro`: command-line access to an astrolabe store.
//!
//! Exit codes: 0 on success, 1 on a domain error (validation failure,
//! unknown id, refused mutation), 2 on a usage error. Usage errors are
//! detected before the store file is opened.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use astrolabe_core::ingest::{self, IngestResult};
use astrolabe_core::metrics::{cluster, compute_metric, MetricsError};
use astrolabe_core::{
    depth_filtration, extract_skeleton, propagate, undepthed_set, width_profile, ClusterMethod,
    ClusterParams, Direction, HashId, HashMode, MetricName, MetricParamsF64, Source, Store,
    StoreError, StoreLock,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

const LOCK_WAIT: Duration = Duration::from_secs(10);

#[derive(Debug, Parser)]
#[command(name = "astro", version, about = "Content-addressed hypergraph store for mathematical knowledge")]
pub struct Cli {
    /// Store file.
    #[arg(long, global = true, env = "ASTRO_STORE", default_value = "./astrolabe.json")]
    pub store: PathBuf,
    /// Hash mode used to load and validate the store.
    #[arg(long, global = true, default_value = "strict", value_parser = parse_mode)]
    pub mode: HashMode,
    #[arg(long, global = true, value_enum, default_value_t = Output::Human)]
    pub output: Output,
    /// Shorthand for `--output json`.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for seeded clustering methods.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    NetworkJson,
    Dot,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty store file.
    Init,
    /// Insert an atom.
    AddAtom {
        #[arg(long)]
        record: String,
    },
    /// Insert a relation over existing nerves.
    AddNerve {
        #[arg(long)]
        record: String,
        #[arg(long = "ref", required = true, num_args = 1..)]
        refs: Vec<String>,
    },
    /// Remove nerves; the batch must leave no dangling reference.
    Rm {
        #[arg(required = true)]
        ids: Vec<String>,
    },
    /// Check the store axioms.
    Validate,
    /// Width of every nerve and the width histogram.
    Width,
    /// Depth filtration, stabilization stage and undepthed witnesses.
    Depth,
    /// Skeleton graph of atoms and atom-to-atom edges.
    Extract,
    /// Atoms affected by a change to `id`.
    Propagate {
        id: String,
        /// Follow edges from dependent to dependency.
        #[arg(long)]
        reverse: bool,
    },
    /// One node metric over the skeleton.
    Metrics {
        #[arg(long, value_parser = parse_metric)]
        name: MetricName,
        #[arg(long, value_parser = parse_source)]
        source: Option<Source>,
    },
    /// Cluster the skeleton.
    Cluster {
        #[arg(long, value_parser = parse_method)]
        method: ClusterMethod,
        #[arg(short)]
        k: Option<usize>,
        #[arg(long, value_parser = parse_source)]
        source: Option<Source>,
    },
    /// Parse LaTeX files into atoms and statement-proof edges.
    IngestTex {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        dry_run: bool,
    },
    /// Parse Lean files into atoms and statement-proof edges.
    IngestLean {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        dry_run: bool,
    },
    /// Export the skeleton.
    Export {
        #[arg(long, value_enum)]
        format: ExportFormat,
    },
    /// Serve the JSON API on localhost.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
    },
}

fn parse_mode(s: &str) -> Result<HashMode, String> {
    s.parse::<HashMode>().map_err(|e| e.to_string())
}

fn parse_metric(s: &str) -> Result<MetricName, String> {
    s.parse().map_err(|e: MetricsError| e.to_string())
}

fn parse_method(s: &str) -> Result<ClusterMethod, String> {
    s.parse().map_err(|e: MetricsError| e.to_string())
}

fn parse_source(s: &str) -> Result<Source, String> {
    s.parse()
}

/// A failed command: stable code plus message.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
            details: None,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code, self.message)
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        let details = match &e {
            StoreError::WouldBreakClosure { dependents, .. } => Some(json!({ "dependents": dependents })),
            _ => e.axiom().map(|a| json!({ "axiom": a })),
        };
        CliError {
            code: e.code(),
            message: e.to_string(),
            details,
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

/// What a command produced: a JSON value and its human rendering.
struct Report {
    json: Value,
    human: String,
    /// Domain failure that still has a result to print (`validate`).
    failed: bool,
}

impl Report {
    fn ok(json: Value, human: impl Into<String>) -> Self {
        Report {
            json,
            human: human.into(),
            failed: false,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let json_out = cli.json || cli.output == Output::Json;
    match execute(&cli, err) {
        Ok(report) => {
            let _ = if json_out {
                writeln!(out, "{}", serde_json::to_string_pretty(&report.json).expect("json value"))
            } else if report.human.is_empty() {
                Ok(())
            } else {
                writeln!(out, "{}", report.human.trim_end())
            };
            if report.failed {
                EXIT_DOMAIN
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            if json_out {
                let mut body = json!({ "code": e.code, "message": e.message });
                if let Some(d) = e.details {
                    body["details"] = d;
                }
                let _ = writeln!(err, "{body}");
            } else {
                let _ = writeln!(err, "{e}");
            }
            EXIT_DOMAIN
        }
    }
}

fn load(cli: &Cli) -> Result<Store, CliError> {
    if !cli.store.exists() {
        return Err(CliError::new(
            "store_not_found",
            format!("{} does not exist; run `astro init` first", cli.store.display()),
        ));
    }
    Ok(Store::load(&cli.store, cli.mode)?)
}

fn check_parent(path: &Path) -> Result<(), CliError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if parent.is_dir() {
        Ok(())
    } else {
        Err(CliError::new(
            "missing_directory",
            format!("directory {} does not exist", parent.display()),
        ))
    }
}

/// Runs `f` on the store under the writer lock and saves the result.
fn mutate<T>(cli: &Cli, f: impl FnOnce(&mut Store) -> Result<T, CliError>) -> Result<T, CliError> {
    check_parent(&cli.store)?;
    let _lock = StoreLock::acquire(&cli.store, LOCK_WAIT)?;
    let mut store = load(cli)?;
    let out = f(&mut store)?;
    store.save(&cli.store)?;
    Ok(out)
}

fn ids(raw: &[String]) -> Vec<HashId> {
    raw.iter().map(|s| HashId::new(s.as_str())).collect()
}

fn execute(cli: &Cli, err: &mut dyn Write) -> Result<Report, CliError> {
    match &cli.command {
        Command::Init => {
            check_parent(&cli.store)?;
            let _lock = StoreLock::acquire(&cli.store, LOCK_WAIT)?;
            if cli.store.exists() {
                return Err(CliError::new(
                    "store_exists",
                    format!("{} already exists", cli.store.display()),
                ));
            }
            Store::new(cli.mode).save(&cli.store)?;
            let path = cli.store.display().to_string();
            Ok(Report::ok(json!({ "store": path }), format!("initialized {path}")))
        }
        Command::AddAtom { record } => {
            let id = mutate(cli, |s| Ok(s.insert_atom(record)?))?;
            Ok(Report::ok(json!({ "id": id }), id.to_string()))
        }
        Command::AddNerve { record, refs } => {
            let refs = ids(refs);
            let id = mutate(cli, |s| Ok(s.insert_nerve(record, &refs)?))?;
            Ok(Report::ok(json!({ "id": id }), id.to_string()))
        }
        Command::Rm { ids: raw } => {
            let batch = ids(raw);
            let removed = mutate(cli, |s| Ok(s.remove_batch(&batch)?))?;
            let removed: Vec<HashId> = removed.into_iter().map(|n| n.id).collect();
            let human = removed.iter().map(|id| format!("removed {id}")).collect::<Vec<_>>().join("\n");
            Ok(Report::ok(json!({ "removed": removed }), human))
        }
        Command::Validate => {
            let store = load(cli)?;
            let report = store.validate();
            let mut human = if report.is_well_formed {
                format!("well-formed ({} nerves, {} mode)", store.len(), store.mode())
            } else {
                format!("{} violation(s)", report.violations.len())
            };
            for v in &report.violations {
                human.push_str(&format!("\naxiom {} {}: {}", v.axiom, v.nerve_id, v.message));
            }
            Ok(Report {
                json: serde_json::to_value(&report).expect("report serializes"),
                human,
                failed: !report.is_well_formed,
            })
        }
        Command::Width => {
            let store = load(cli)?;
            let profile = width_profile(&store);
            let mut human: Vec<String> = profile
                .histogram
                .iter()
                .map(|(w, n)| format!("width {w}: {n}"))
                .collect();
            human.insert(0, format!("{} nerves", store.len()));
            Ok(Report::ok(serde_json::to_value(&profile).expect("profile"), human.join("\n")))
        }
        Command::Depth => {
            let store = load(cli)?;
            let assignment = depth_filtration(&store);
            let undepthed = undepthed_set(&store, &assignment);
            let mut human = vec![format!("stabilization stage {}", assignment.stabilization_stage)];
            human.extend(assignment.depths.iter().map(|(id, d)| format!("{id}\t{d}")));
            for (id, w) in &undepthed.members {
                if let Some(w) = w {
                    let show = |p: &[HashId]| p.iter().map(HashId::as_str).collect::<Vec<_>>().join(" -> ");
                    human.push(format!("{id} reaches cycle {} via {}", show(&w.cycle), show(&w.path)));
                }
            }
            Ok(Report::ok(
                json!({
                    "depths": assignment.depths,
                    "stabilization_stage": assignment.stabilization_stage,
                    "undepthed": undepthed.members,
                }),
                human.join("\n"),
            ))
        }
        Command::Extract => {
            let store = load(cli)?;
            let skeleton = extract_skeleton(&store);
            let export = skeleton.export();
            let mut human = vec![format!("{} nodes, {} edges", skeleton.node_count(), skeleton.edge_count())];
            human.extend(skeleton.edges().iter().map(|e| format!("{} -> {}\t{}", e.from, e.to, e.id)));
            Ok(Report::ok(serde_json::to_value(&export).expect("export"), human.join("\n")))
        }
        Command::Propagate { id, reverse } => {
            let store = load(cli)?;
            let direction = if *reverse { Direction::Reverse } else { Direction::Forward };
            let affected = propagate(&extract_skeleton(&store), id, direction)
                .map_err(|e| CliError::new(e.code(), e.to_string()))?;
            let human = affected
                .affected
                .iter()
                .map(|a| format!("{a}\t{}", affected.hop_distance[a]))
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Report::ok(serde_json::to_value(&affected).expect("affected"), human))
        }
        Command::Metrics { name, source } => {
            let store = load(cli)?;
            let vector = compute_metric(&extract_skeleton(&store), *name, &MetricParamsF64::default(), *source)?;
            let human = vector
                .values
                .iter()
                .map(|(id, v)| format!("{id}\t{v}"))
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Report::ok(serde_json::to_value(&vector).expect("vector"), human))
        }
        Command::Cluster { method, k, source } => {
            let store = load(cli)?;
            let params = ClusterParams { k: *k, seed: cli.seed };
            let clustering = cluster::<f64>(&extract_skeleton(&store), *method, &params, *source)?;
            let mut human = vec![match clustering.quality {
                Some(q) => format!("{} clusters, modularity {q:.6}", clustering.cluster_count()),
                None => format!("{} clusters", clustering.cluster_count()),
            }];
            human.extend(clustering.assignment.iter().map(|(id, c)| format!("{id}\t{c}")));
            Ok(Report::ok(serde_json::to_value(&clustering).expect("clustering"), human.join("\n")))
        }
        Command::IngestTex { files, dry_run } => ingest_files(cli, files, *dry_run, ingest::parse_tex, err),
        Command::IngestLean { files, dry_run } => ingest_files(cli, files, *dry_run, ingest::parse_lean, err),
        Command::Export { format } => {
            let store = load(cli)?;
            let skeleton = extract_skeleton(&store);
            match format {
                ExportFormat::NetworkJson => {
                    let v = serde_json::to_value(skeleton.export()).expect("export");
                    let human = serde_json::to_string_pretty(&v).expect("json value");
                    Ok(Report::ok(v, human))
                }
                ExportFormat::Dot => {
                    let dot = skeleton.to_dot();
                    Ok(Report::ok(json!({ "dot": dot }), dot))
                }
            }
        }
        Command::Serve { port } => {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| CliError::new("io_error", e.to_string()))?;
            runtime
                .block_on(astrolabe_server::serve(&cli.store, cli.mode, *port))
                .map_err(|e| CliError::new("serve_failed", e.to_string()))?;
            Ok(Report::ok(Value::Null, ""))
        }
    }
}

fn ingest_files(
    cli: &Cli,
    files: &[PathBuf],
    dry_run: bool,
    parse: fn(&str) -> IngestResult,
    err: &mut dyn Write,
) -> Result<Report, CliError> {
    let mut staged = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })?;
        let result = parse(&text);
        for d in &result.diagnostics {
            let _ = writeln!(err, "{}:{}..{}: {}", path.display(), d.span.0, d.span.1, d.message);
        }
        staged.push((path, result));
    }
    if dry_run {
        let json = json!(staged
            .iter()
            .map(|(p, r)| json!({ "file": p, "result": r }))
            .collect::<Vec<_>>());
        let human = staged
            .iter()
            .map(|(p, r)| format!("{}: {} atoms, {} edges (not committed)", p.display(), r.atoms.len(), r.edges.len()))
            .collect::<Vec<_>>()
            .join("\n");
        return Ok(Report::ok(json, human));
    }
    let committed = mutate(cli, |store| {
        let before = store.len();
        let mut per_file = Vec::new();
        for (path, result) in &staged {
            let ids = ingest::commit(store, result)?;
            let (atoms, edges) = ids.split_at(result.atoms.len());
            per_file.push(json!({ "file": path, "atoms": atoms, "edges": edges }));
        }
        Ok((per_file, store.len() - before))
    })?;
    let (per_file, added) = committed;
    let human = format!("{added} new nerve(s) from {} file(s)", files.len());
    Ok(Report::ok(json!({ "files": per_file, "added": added }), human))
}
