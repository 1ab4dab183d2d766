//! `moralgrid`: run, score, solve and train on the gridworld scenarios,
//! locally or against a server started with `moralgrid serve`.

mod backend;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use moralgrid_core::agents::{parse_action_script, RewardMode, TableFile, TrainConfig};
use moralgrid_core::eval::{compare, summary_csv, EvaluationReport};
use moralgrid_core::ledger::CostConfig;
use moralgrid_core::protocol::SessionDefaults;
use moralgrid_core::scenario::{bind_chain, Catalogue, ChainDocument};
use moralgrid_core::service::{
    EvaluateRequest, PlayRequest, PolicySpec, ScoreRequest, Selection, Service, SolveRequest, TrainRequest,
};
use moralgrid_server::{serve_http, serve_stdio, serve_tcp, AppState, Transport};
use serde::Serialize;

use backend::{Backend, CliError, CliResult};

const DEFAULT_SCENARIO: &str = "SwitchStandard";
const DEFAULT_CHAIN: &str = "Utility";

#[derive(Debug, Parser)]
#[command(name = "moralgrid", version, about = "Trolley-problem gridworlds scored against ordered moral norms")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Catalogue name, inline JSON or a scenario file.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Variant name, inline JSON or a variant file.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Preset name (U, UAH, DP, DPAH or full names), inline JSON or a chain file.
    #[arg(long, global = true)]
    chain: Option<String>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    episodes: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Divide every cost charge by the sum of the weights.
    #[arg(long, global = true)]
    normalize_cost: bool,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base URL of a running `moralgrid serve --http` instance.
    #[arg(long, global = true, env = "MORALGRID_REMOTE")]
    remote: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List catalogue scenarios.
    List,
    /// Print a scenario's configuration, hash and initial render as JSON.
    Describe,
    /// Print the initial grid as text.
    Render,
    /// Print a chain bound to a scenario with its exact weights.
    Chain,
    /// Run an action script and write the JSONL trace.
    Play {
        /// Action script: one action per line or comma separated, `#` comments.
        #[arg(long, conflicts_with = "actions")]
        script: Option<PathBuf>,
        /// Inline actions, e.g. "RIGHT,INTERACT".
        #[arg(long)]
        actions: Option<String>,
        /// Print a frame per step to stderr.
        #[arg(long)]
        render: bool,
    },
    /// Rescore a JSONL trace, optionally under another chain.
    Score {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Evaluate a policy over several seeded episodes.
    Evaluate {
        /// random[:SEED], scripted:FILE, table:FILE or solver[:HORIZON].
        #[arg(long, default_value = "random")]
        policy: String,
        /// Comma-separated norm names to restrict the metric to.
        #[arg(long, value_delimiter = ',')]
        subset: Vec<String>,
        /// Print a CSV summary row instead of the JSON report.
        #[arg(long)]
        csv: bool,
    },
    /// Train a tabular Q-learner; the table goes to --out when given.
    Train {
        #[arg(long, value_enum, default_value_t = Mode::Shaped)]
        mode: Mode,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Exhaustive search for the best action sequence under the chain.
    Solve {
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long)]
        state_cap: Option<usize>,
    },
    /// Rank saved evaluation reports.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
    /// Serve environment sessions and/or the HTTP API.
    Serve {
        /// `stdio` or `tcp:PORT` for line-delimited JSON sessions.
        #[arg(long = "serve")]
        transport: Option<Transport>,
        /// Address for the HTTP API, e.g. 127.0.0.1:8080.
        #[arg(long)]
        http: Option<SocketAddr>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Shaped,
    EnvOnly,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let g = cli.global;
    match cli.command {
        Command::Compare { reports, csv } => return cmd_compare(&g, &reports, csv),
        Command::Serve { transport, http } => return cmd_serve(&g, transport, http),
        _ => {}
    }
    let backend = match &g.remote {
        Some(url) => Backend::remote(url)?,
        None => Backend::local()?,
    };
    match cli.command {
        Command::List => emit_json(&g, &backend.list()?),
        Command::Describe => {
            let (scenario, variant) = scenario_args(&g)?;
            emit_json(&g, &backend.describe(&scenario, variant.as_deref())?)
        }
        Command::Render => {
            let (scenario, variant) = scenario_args(&g)?;
            let mut text = backend.describe(&scenario, variant.as_deref())?.render;
            text.push('\n');
            emit(&g, &text)
        }
        Command::Chain => emit_json(&g, &backend.chain(&selection(&g)?)?),
        Command::Play { script, actions, render } => {
            let text = match (script, actions) {
                (Some(path), _) => read_input(&path)?,
                (None, Some(inline)) => inline,
                (None, None) => String::new(),
            };
            let resp = backend.play(&PlayRequest {
                selection: selection(&g)?,
                actions: parse_action_script(&text)?,
                seed: g.seed.unwrap_or(0),
                normalize_cost: g.normalize_cost,
                render,
            })?;
            for frame in &resp.frames {
                eprintln!("{frame}\n");
            }
            emit(&g, &resp.trace)?;
            if g.out.is_some() {
                print_json(&resp.score)?;
            }
            Ok(())
        }
        Command::Score { trace } => {
            let report = backend.score(&ScoreRequest {
                trace: read_input(&trace)?,
                chain: g.chain.as_deref().map(inline_arg).transpose()?,
                beta: g.beta,
                normalize_cost: g.normalize_cost.then_some(true),
            })?;
            emit_json(&g, &report)
        }
        Command::Evaluate { policy, subset, csv } => {
            let report = backend.evaluate(&EvaluateRequest {
                selection: selection(&g)?,
                policy: parse_policy(&policy)?,
                episodes: g.episodes,
                seed: g.seed,
                normalize_cost: g.normalize_cost,
                subset: (!subset.is_empty()).then(|| subset.into_iter().collect::<BTreeSet<_>>()),
            })?;
            if csv {
                emit(&g, &summary_csv(std::slice::from_ref(&report))?)
            } else {
                emit_json(&g, &report)
            }
        }
        Command::Train {
            mode,
            lambda,
            steps,
            alpha,
            gamma,
        } => {
            let mut config = TrainConfig {
                reward_mode: match mode {
                    Mode::Shaped => RewardMode::Shaped { lambda },
                    Mode::EnvOnly => RewardMode::EnvOnly,
                },
                seed: g.seed.unwrap_or(0),
                ..TrainConfig::default()
            };
            if let Some(s) = steps {
                config.total_steps = s;
            }
            if let Some(a) = alpha {
                config.alpha = a;
            }
            if let Some(gm) = gamma {
                config.gamma = gm;
            }
            let resp = backend.train(&TrainRequest {
                selection: selection(&g)?,
                config,
                eval_episodes: g.episodes,
            })?;
            match &g.out {
                Some(path) => {
                    write_file(path, &(to_json(&resp.table)? + "\n"))?;
                    print_json(&serde_json::json!({
                        "table": path,
                        "episodes": resp.episodes,
                        "steps": resp.steps,
                        "report": resp.report,
                    }))
                }
                None => print_json(&resp),
            }
        }
        Command::Solve { horizon, state_cap } => emit_json(
            &g,
            &backend.solve(&SolveRequest {
                selection: selection(&g)?,
                horizon,
                state_cap,
            })?,
        ),
        Command::Compare { .. } | Command::Serve { .. } => unreachable!("handled above"),
    }
}

/// Turns an argument that names an existing file into the file's contents so
/// a remote server never needs our filesystem.
fn inline_arg(spec: &str) -> CliResult<String> {
    let path = Path::new(spec.trim());
    if !spec.trim_start().starts_with('{') && path.is_file() {
        read_input(path)
    } else {
        Ok(spec.to_string())
    }
}

fn scenario_args(g: &Global) -> CliResult<(String, Option<String>)> {
    Ok((
        inline_arg(g.scenario.as_deref().unwrap_or(DEFAULT_SCENARIO))?,
        g.variant.as_deref().map(inline_arg).transpose()?,
    ))
}

fn selection(g: &Global) -> CliResult<Selection> {
    let (scenario, variant) = scenario_args(g)?;
    Ok(Selection {
        scenario,
        variant,
        chain: inline_arg(g.chain.as_deref().unwrap_or(DEFAULT_CHAIN))?,
        beta: g.beta,
    })
}

fn parse_policy(spec: &str) -> CliResult<PolicySpec> {
    let (kind, arg) = match spec.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (spec, None),
    };
    let number = |what: &str, a: &str| -> CliResult<u64> {
        a.parse()
            .map_err(|_| CliError::config(format!("policy {kind}: bad {what} {a:?}")))
    };
    match (kind, arg) {
        ("random", None) => Ok(PolicySpec::Random { seed: 0 }),
        ("random", Some(a)) => Ok(PolicySpec::Random { seed: number("seed", a)? }),
        ("scripted", Some(path)) => Ok(PolicySpec::Scripted {
            actions: parse_action_script(&read_input(Path::new(path))?)?,
        }),
        ("table", Some(path)) => {
            let table: TableFile = serde_json::from_str(&read_input(Path::new(path))?)
                .map_err(|e| CliError::config(format!("{path}: {e}")))?;
            Ok(PolicySpec::Table { table })
        }
        ("solver", None) => Ok(PolicySpec::Solver { horizon: None }),
        ("solver", Some(a)) => Ok(PolicySpec::Solver {
            horizon: Some(number("horizon", a)? as u32),
        }),
        _ => Err(CliError::config(format!(
            "unknown policy {spec:?}; expected random[:SEED], scripted:FILE, table:FILE or solver[:HORIZON]"
        ))),
    }
}

fn cmd_compare(g: &Global, paths: &[PathBuf], csv: bool) -> CliResult<()> {
    let mut reports = Vec::with_capacity(paths.len());
    for p in paths {
        let report: EvaluationReport = serde_json::from_str(&read_input(p)?)
            .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
        reports.push(report);
    }
    let ranking = compare(&reports)?;
    if csv {
        emit(g, &summary_csv(&reports)?)
    } else {
        emit_json(g, &ranking)
    }
}

fn cmd_serve(g: &Global, transport: Option<Transport>, http: Option<SocketAddr>) -> CliResult<()> {
    if g.remote.is_some() {
        return Err(CliError::config("serve runs locally; drop --remote"));
    }
    let catalogue = Arc::new(Catalogue::from_env()?);
    let scenario = catalogue.resolve_with_variant(g.scenario.as_deref().unwrap_or(DEFAULT_SCENARIO), g.variant.as_deref())?;
    let mut chain = ChainDocument::resolve(g.chain.as_deref().unwrap_or(DEFAULT_CHAIN))?;
    if g.beta.is_some() {
        chain.beta = g.beta;
    }
    bind_chain(&chain, &scenario.kind_totals())?;
    let defaults = SessionDefaults {
        scenario,
        chain,
        cost: CostConfig {
            normalize: g.normalize_cost,
            ..CostConfig::default()
        },
    };
    let transport = match (transport, http) {
        (None, None) => Some(Transport::Stdio),
        (t, _) => t,
    };

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start runtime: {e}")))?;
    rt.block_on(async move {
        let io = |e: std::io::Error| CliError::runtime(e.to_string());
        let mut tasks = tokio::task::JoinSet::new();
        let mut stdio = false;
        if let Some(addr) = http {
            let listener = tokio::net::TcpListener::bind(addr).await.map_err(io)?;
            eprintln!("listening http=http://{}", listener.local_addr().map_err(io)?);
            let state = AppState::new(Service::shared(Arc::clone(&catalogue)), defaults.clone());
            tasks.spawn(serve_http(listener, state));
        }
        match transport {
            Some(Transport::Tcp(port)) => {
                let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await.map_err(io)?;
                eprintln!("listening lines=tcp:{}", listener.local_addr().map_err(io)?);
                tasks.spawn(serve_tcp(listener, Arc::clone(&catalogue), defaults.clone()));
            }
            Some(Transport::Stdio) => {
                stdio = true;
                tasks.spawn(serve_stdio(Arc::clone(&catalogue), defaults.clone()));
            }
            None => {}
        }
        // Stdio sessions end the process at EOF; network servers run until
        // interrupted or until one of them fails.
        loop {
            tokio::select! {
                done = tasks.join_next() => match done {
                    Some(Ok(Ok(()))) if stdio => return Ok(()),
                    Some(Ok(Ok(()))) => continue,
                    Some(Ok(Err(e))) => return Err(io(e)),
                    Some(Err(e)) => return Err(CliError::runtime(format!("server task failed: {e}"))),
                    None => return Ok(()),
                },
                _ = tokio::signal::ctrl_c() => {
                    tracing::info!("interrupted, shutting down");
                    return Ok(());
                }
            }
        }
    })
}

fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(format!("json: {e}")))
}

fn emit(g: &Global, text: &str) -> CliResult<()> {
    match &g.out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::runtime(format!("stdout: {e}")))
        }
    }
}

fn emit_json<T: Serialize>(g: &Global, value: &T) -> CliResult<()> {
    emit(g, &(to_json(value)? + "\n"))
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    println!("{}", to_json(value)?);
    Ok(())
}
