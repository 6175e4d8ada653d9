use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use fraisse_core::category::ProfiniteBase;
use fraisse_core::fraisse::{build_comma_prefix, build_prefix, replay, verify_u, BuildConfig, BuildReport};
use fraisse_core::io::{content_hash, graph_to_dot, parse_body, separation_to_dot, Artifact};
use fraisse_core::kr::{extend_isomorphism, lift, verify_tower, LiftInstance, Side, SquareTower, TowerAudit};
use fraisse_core::limit::{
    embedding_report, find_edge_in_clopen, separate, Clopen, EdgeWitness, EmbeddingReport, Separation,
};
use fraisse_core::par::{self, Sweep};
use fraisse_core::{enumerate_graphs, Error, FiniteGraph};

const SCHEMAS: &str = include_str!("schema.txt");

#[derive(Parser)]
#[command(name = "fraisse", version, about = "Finite prefixes of projective Fraisse limits of graphs", after_long_help = SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// All graphs on n vertices up to isomorphism.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: Output,
    },
    /// A prefix of the universal inverse sequence.
    Build {
        #[command(flatten)]
        caps: Caps,
        /// Graph JSON for level 0; the single edge if omitted.
        #[arg(long)]
        seed: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// A prefix under a fixed base sequence.
    BuildComma {
        #[command(flatten)]
        caps: Caps,
        #[arg(long)]
        seed: Option<PathBuf>,
        /// Sequence or Graph JSON for the base.
        #[arg(long, conflicts_with = "discrete_base", required_unless_present = "discrete_base")]
        base: Option<PathBuf>,
        /// Use the discrete graph on this many points as the base.
        #[arg(long)]
        discrete_base: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Re-check a build report or a tower.
    Verify {
        #[arg(long)]
        input: PathBuf,
        /// Levels audited by the embedding report of a comma build.
        #[arg(long, default_value_t = 3)]
        audit_depth: usize,
        /// Run sweeps on one thread.
        #[arg(long)]
        sequential: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Separate two clopen sets without connecting edges.
    Separate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, env = "FRAISSE_DEPTH", default_value_t = 8)]
        depth: usize,
        #[command(flatten)]
        out: Output,
    },
    /// An edge inside a clopen set.
    FindEdge {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        clopen: PathBuf,
        #[arg(long, env = "FRAISSE_DEPTH", default_value_t = 8)]
        depth: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Lift a quotient through a comma prefix.
    Lift {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, env = "FRAISSE_DEPTH", default_value_t = 8)]
        depth: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Extend a base isomorphism by alternating lifts between two comma prefixes.
    Extend {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        iso: PathBuf,
        #[arg(long, env = "FRAISSE_DEPTH", default_value_t = 8)]
        depth: usize,
        /// Rungs to build.
        #[arg(long, default_value_t = 3)]
        height: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Render a graph or a separation; from a build report, one level.
    Export {
        #[arg(long)]
        input: PathBuf,
        /// Level of a build report to export.
        #[arg(long)]
        level: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Caps {
    #[arg(long, env = "FRAISSE_SIZE_CAP", default_value_t = 3)]
    size_cap: usize,
    #[arg(long, env = "FRAISSE_DEPTH", default_value_t = 8)]
    depth: usize,
    #[arg(long, default_value_t = 1)]
    a_slack: usize,
    #[arg(long, default_value_t = 8)]
    a_target_cap: usize,
    /// Keep amalgams unpruned.
    #[arg(long)]
    no_reduce: bool,
    #[arg(long, default_value_t = 64)]
    batch_cap: usize,
}

impl Caps {
    fn config(&self) -> BuildConfig {
        BuildConfig {
            size_cap: self.size_cap,
            depth: self.depth,
            a_slack: self.a_slack,
            a_target_cap: self.a_target_cap,
            reduce: !self.no_reduce,
            batch_cap: self.batch_cap,
            ..BuildConfig::default()
        }
    }
}

#[derive(Args)]
struct Output {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Dot,
}

#[derive(Debug)]
enum Failure {
    Precondition(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Precondition(e.to_string())
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Precondition(_) => 1,
            Failure::Io(_) => 3,
        }
    }
}

/// Result of a command that ran: whether it stopped for lack of depth.
enum Done {
    Ok,
    DepthExhausted(String),
}

type Run = Result<Done, Failure>;

/// An input file: parsed body plus the content hash recorded in configs.
struct Input<T> {
    value: T,
    hash: String,
}

fn read_input<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Input<T>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let value = parse_body(&text).map_err(|e| Failure::Precondition(format!("{}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| Failure::Precondition(e.to_string()))?;
    Ok(Input { value, hash: content_hash(&raw)? })
}

fn emit(out: &Output, text: &str) -> Result<(), Failure> {
    match &out.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_artifact<T: Serialize>(
    out: &Output,
    kind: &str,
    config: &Value,
    body: T,
    dot: Option<String>,
) -> Result<(), Failure> {
    match (out.format, dot) {
        (Format::Dot, Some(d)) => emit(out, &d),
        (Format::Dot, None) => Err(Failure::Precondition(format!("{kind} has no DOT rendering"))),
        (Format::Json, _) => emit(out, &Artifact::seal(kind, config, body)?.to_json()?),
    }
}

/// Writes the partial artifact for a search that ran out of levels.
fn exhausted(out: &Output, kind: &str, config: &Value, e: Error) -> Run {
    let why = e.to_string();
    emit(out, &Artifact::seal(kind, config, json!({"depth_exhausted": why}))?.to_json()?)?;
    Ok(Done::DepthExhausted(why))
}

fn seed_graph(seed: &Option<PathBuf>) -> Result<(FiniteGraph, Value), Failure> {
    match seed {
        Some(p) => {
            let i: Input<FiniteGraph> = read_input(p)?;
            Ok((i.value, Value::String(i.hash)))
        }
        None => Ok((FiniteGraph::single_edge(), Value::String("single_edge".into()))),
    }
}

fn read_base(path: &Path) -> Result<Input<ProfiniteBase>, Failure> {
    if let Ok(i) = read_input::<ProfiniteBase>(path) {
        return Ok(i);
    }
    let g: Input<FiniteGraph> = read_input(path)?;
    Ok(Input { value: ProfiniteBase::new(Arc::new(g.value)), hash: g.hash })
}

fn build_dot(report: &BuildReport) -> String {
    graph_to_dot(report.sequence.top(), &format!("level_{}", report.sequence.len() - 1), |_| None)
}

fn finish_build(out: &Output, kind: &str, config: Value, report: BuildReport) -> Run {
    let pending = report.pending().count();
    let dot = build_dot(&report);
    emit_artifact(out, kind, &config, report, Some(dot))?;
    Ok(if pending == 0 {
        Done::Ok
    } else {
        Done::DepthExhausted(format!("{pending} requirements pending at the prefix depth"))
    })
}

#[derive(Serialize)]
struct BuildAudit {
    ledger_entries: usize,
    replay_failures: Vec<usize>,
    pending: Vec<usize>,
    /// Graphs within the size cap with no quotient from any level.
    universality_gaps: Vec<FiniteGraph>,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding: Option<EmbeddingReport>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IsoFile {
    Bare(Vec<usize>),
    Wrapped { h: Vec<usize> },
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Enumerate { n, out } => {
            if n == 0 {
                return Err(Failure::Precondition("n must be positive".into()));
            }
            let graphs = enumerate_graphs(n)?;
            let config = json!({"command": "enumerate", "n": n});
            let dot =
                graphs.iter().enumerate().map(|(i, g)| graph_to_dot(g, &format!("g{i}"), |_| None)).collect::<String>();
            emit_artifact(
                &out,
                "enumerate",
                &config,
                json!({"n": n, "count": graphs.len(), "graphs": graphs}),
                Some(dot),
            )?;
            Ok(Done::Ok)
        }
        Command::Build { caps, seed, out } => {
            let (seed, seed_id) = seed_graph(&seed)?;
            let cfg = caps.config();
            let report = build_prefix(&cfg, &seed)?;
            let config = json!({"command": "build", "build": cfg, "seed": seed_id});
            finish_build(&out, "build", config, report)
        }
        Command::BuildComma { caps, seed, base, discrete_base, out } => {
            let (seed, seed_id) = seed_graph(&seed)?;
            let (base, base_id) = match (base, discrete_base) {
                (Some(p), _) => {
                    let i = read_base(&p)?;
                    (i.value, Value::String(i.hash))
                }
                (None, Some(k)) => (ProfiniteBase::new(Arc::new(FiniteGraph::discrete(k)?)), json!({"discrete": k})),
                (None, None) => return Err(Failure::Precondition("a base is required".into())),
            };
            let cfg = caps.config();
            let report = build_comma_prefix(&cfg, &base, &seed)?;
            let config = json!({"command": "build-comma", "build": cfg, "seed": seed_id, "base": base_id});
            finish_build(&out, "build-comma", config, report)
        }
        Command::Verify { input, audit_depth, sequential, out } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Failure::Io(format!("{}: {e}", input.display())))?;
            let raw: Value = serde_json::from_str(&text).map_err(|e| Failure::Precondition(e.to_string()))?;
            let config = json!({"command": "verify", "input": content_hash(&raw)?, "audit_depth": audit_depth});
            let mode = if sequential { Sweep::Sequential } else { Sweep::Parallel };
            if let Ok(tower) = parse_body::<SquareTower>(&text) {
                let audit: TowerAudit = verify_tower(&tower);
                let passed = audit.passed();
                emit_artifact(&out, "verify-tower", &config, audit, None)?;
                return if passed { Ok(Done::Ok) } else { Err(Failure::Precondition("tower audit failed".into())) };
            }
            let report: BuildReport = parse_body(&text)?;
            let replays = par::map(mode, &report.ledger, |r| (r.id, !r.is_satisfied() || replay(&report, r)));
            let replay_failures: Vec<usize> = replays.iter().filter(|(_, ok)| !ok).map(|(id, _)| *id).collect();
            let pending = report.pending().map(|r| r.id).collect();
            let mut targets = Vec::new();
            if report.comma.is_none() {
                for n in 1..=report.config.size_cap {
                    targets.extend(enumerate_graphs(n)?.into_iter().map(Arc::new));
                }
            }
            let found = par::map(mode, &targets, |x| verify_u(&report.sequence, x).map(|w| w.is_some()));
            let mut universality_gaps = Vec::new();
            for (x, ok) in targets.iter().zip(found) {
                if !ok? {
                    universality_gaps.push((**x).clone());
                }
            }
            let embedding = match report.comma {
                Some(_) => Some(embedding_report(&report, audit_depth.min(report.sequence.len() - 1))?),
                None => None,
            };
            let clean = replay_failures.is_empty() && universality_gaps.is_empty();
            let audit = BuildAudit {
                ledger_entries: report.ledger.len(),
                replay_failures,
                pending,
                universality_gaps,
                embedding,
            };
            emit_artifact(&out, "verify-build", &config, audit, None)?;
            if clean {
                Ok(Done::Ok)
            } else {
                Err(Failure::Precondition("build audit failed".into()))
            }
        }
        Command::Separate { report, a, b, depth, out } => {
            let r: Input<BuildReport> = read_input(&report)?;
            let (ia, ib): (Input<Clopen>, Input<Clopen>) = (read_input(&a)?, read_input(&b)?);
            let config = json!({"command": "separate", "report": r.hash, "a": ia.hash, "b": ib.hash, "depth": depth});
            let seq = &r.value.sequence;
            let sep: Separation = match separate(seq, &ia.value, &ib.value, depth) {
                Err(e) if e.is_depth_exhausted() => return exhausted(&out, "separate", &config, e),
                other => other?,
            };
            let dot = separation_to_dot(seq, &sep)?;
            let body = json!({"separation": sep, "graph": seq.level(sep.level), "cross_edges": sep.cross_edges(seq)});
            emit_artifact(&out, "separate", &config, body, Some(dot))?;
            Ok(Done::Ok)
        }
        Command::FindEdge { report, clopen, depth, out } => {
            let r: Input<BuildReport> = read_input(&report)?;
            let c: Input<Clopen> = read_input(&clopen)?;
            let config = json!({"command": "find-edge", "report": r.hash, "clopen": c.hash, "depth": depth});
            let w: EdgeWitness = match find_edge_in_clopen(&r.value.sequence, &c.value, depth) {
                Err(e) if e.is_depth_exhausted() => return exhausted(&out, "find-edge", &config, e),
                other => other?,
            };
            emit_artifact(&out, "find-edge", &config, w, None)?;
            Ok(Done::Ok)
        }
        Command::Lift { report, instance, depth, out } => {
            let r: Input<BuildReport> = read_input(&report)?;
            let i: Input<LiftInstance> = read_input(&instance)?;
            let config = json!({"command": "lift", "report": r.hash, "instance": i.hash, "depth": depth});
            let side = Side::of(&r.value)?;
            let LiftInstance { f, level, g, b } = i.value;
            let inst = LiftInstance::new(&side, f, level, g, b)?;
            let l = match lift(&side, &inst, depth) {
                Err(e) if e.is_depth_exhausted() => return exhausted(&out, "lift", &config, e),
                other => other?,
            };
            let dot = graph_to_dot(side.sequence.level(l.level), &format!("level_{}", l.level), |_| None);
            emit_artifact(&out, "lift", &config, l, Some(dot))?;
            Ok(Done::Ok)
        }
        Command::Extend { left, right, iso, depth, height, out } => {
            if height == 0 {
                return Err(Failure::Precondition("height must be positive".into()));
            }
            let l: Input<BuildReport> = read_input(&left)?;
            let r: Input<BuildReport> = read_input(&right)?;
            let h: Input<IsoFile> = read_input(&iso)?;
            let config = json!({"command": "extend", "left": l.hash, "right": r.hash, "iso": h.hash, "depth": depth, "height": height});
            let h = match h.value {
                IsoFile::Bare(h) | IsoFile::Wrapped { h } => h,
            };
            let tower = extend_isomorphism(&l.value, &r.value, &h, depth, height)?;
            let audit = verify_tower(&tower);
            let reached = tower.height();
            let unmet = tower.unmet.clone();
            let passed = audit.passed();
            emit_artifact(&out, "extend", &config, json!({"tower": tower, "audit": audit}), None)?;
            if !passed {
                return Err(Failure::Precondition("tower audit failed".into()));
            }
            Ok(match unmet {
                Some(why) if reached < height => Done::DepthExhausted(format!("height {reached} of {height}: {why}")),
                _ => Done::Ok,
            })
        }
        Command::Export { input, level, out } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Failure::Io(format!("{}: {e}", input.display())))?;
            let raw: Value = serde_json::from_str(&text).map_err(|e| Failure::Precondition(e.to_string()))?;
            let config = json!({"command": "export", "input": content_hash(&raw)?, "level": level});
            let body = match raw.get("body") {
                Some(b) if raw.get("header").is_some() => b.clone(),
                _ => raw.clone(),
            };
            let (graph, dot) = if let Some(sep) = body.get("separation") {
                let sep: Separation =
                    serde_json::from_value(sep.clone()).map_err(|e| Failure::Precondition(e.to_string()))?;
                let g: FiniteGraph =
                    serde_json::from_value(body["graph"].clone()).map_err(|e| Failure::Precondition(e.to_string()))?;
                let seq = ProfiniteBase::stationary(Arc::new(g.clone()), sep.level + 1);
                let dot = separation_to_dot(&seq, &sep)?;
                (g, dot)
            } else if let Ok(report) = serde_json::from_value::<BuildReport>(body.clone()) {
                let k = level.unwrap_or(report.sequence.len() - 1);
                report.sequence.check_level(k)?;
                let g = (**report.sequence.level(k)).clone();
                let dot = graph_to_dot(&g, &format!("level_{k}"), |_| None);
                (g, dot)
            } else {
                let g: FiniteGraph = serde_json::from_value(body).map_err(|e| Failure::Precondition(e.to_string()))?;
                let dot = graph_to_dot(&g, "g", |_| None);
                (g, dot)
            };
            emit_artifact(&out, "export", &config, graph, Some(dot))?;
            Ok(Done::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Done::Ok) => ExitCode::SUCCESS,
        Ok(Done::DepthExhausted(why)) => {
            eprintln!("depth exhausted: {why}");
            ExitCode::from(2)
        }
        Err(f) => {
            match &f {
                Failure::Precondition(m) => eprintln!("precondition violated: {m}"),
                Failure::Io(m) => eprintln!("i/o error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
