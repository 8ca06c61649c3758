use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use polchinski::experiment::{self, catalogue, Task};
use polchinski::{Error, Result};

#[derive(Parser)]
#[command(name = "polchinski", version, about = "Polchinski-flow experiments; run without arguments to list the catalogue")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the reproduction catalogue
    Catalogue {
        #[arg(long)]
        json: bool,
    },
    Flow(TaskCommand),
    Lsi(TaskCommand),
    Sample(TaskCommand),
    Ising(TaskCommand),
    Cw(TaskCommand),
    Hj(TaskCommand),
    Transport(TaskCommand),
}

#[derive(Args)]
struct TaskCommand {
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Run a config file (or the name of a bundled config)
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    config: String,
    /// Output directory [default: results/<experiment name>]
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to POLCHINSKI_THREADS
    #[arg(long)]
    threads: Option<usize>,
}

fn load(config: &str) -> Result<experiment::ExperimentConfig> {
    let path = Path::new(config);
    if path.exists() {
        return experiment::load_config(path);
    }
    match catalogue::bundled_config(config) {
        Some(text) => experiment::parse_config(text),
        None => Err(Error::Invalid(format!("no config file or bundled config named `{config}`"))),
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("POLCHINSKI_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse::<usize>().map(Some).map_err(|_| Error::Invalid(format!("POLCHINSKI_THREADS must be a positive integer, got `{v}`")))
        }
        _ => Ok(None),
    }
}

fn run(task: Task, args: RunArgs) -> Result<i32> {
    if let Some(k) = thread_count(args.threads)? {
        if k == 0 {
            return Err(Error::Invalid("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| Error::Invalid(e.to_string()))?;
    }
    let cfg = load(&args.config)?;
    let started = Instant::now();
    let outcome = experiment::run(&cfg, Some(task), args.seed)?;
    let wall = started.elapsed().as_secs_f64();
    let dir = args.out.unwrap_or_else(|| PathBuf::from("results").join(&outcome.config.name));
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let info = json!({
        "timestamp_unix": stamp,
        "threads": rayon::current_num_threads(),
        "wall_seconds": wall,
    });
    outcome.write(&dir, &info)?;
    for (name, q) in &outcome.report.quantities {
        if let Some(pass) = q.pass {
            println!("{} {name} = {}", if pass { "pass" } else { "FAIL" }, q.value);
        }
    }
    if outcome.report.records.get("divergent") == Some(&json!(true)) {
        println!("note: at least one bound is divergent (see records in results.json)");
    }
    let code = outcome.exit_code();
    println!("{}: {} ({:.1} s) -> {}", outcome.config.name, if code == 0 { "passed" } else { "FAILED" }, wall, dir.display());
    Ok(code)
}

fn print_catalogue(as_json: bool) -> Result<i32> {
    let entries = catalogue::list_experiments()?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&entries).map_err(|e| Error::Numerical(e.to_string()))?);
    } else {
        print!("{}", catalogue::render(&entries));
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        None => print_catalogue(false),
        Some(Command::Catalogue { json }) => print_catalogue(json),
        Some(cmd) => {
            let (task, tc) = match cmd {
                Command::Flow(t) => (Task::Flow, t),
                Command::Lsi(t) => (Task::Lsi, t),
                Command::Sample(t) => (Task::Sample, t),
                Command::Ising(t) => (Task::Ising, t),
                Command::Cw(t) => (Task::Cw, t),
                Command::Hj(t) => (Task::Hj, t),
                Command::Transport(t) => (Task::Transport, t),
                Command::Catalogue { .. } => unreachable!(),
            };
            let Action::Run(args) = tc.action;
            run(task, args)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
