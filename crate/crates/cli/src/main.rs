//! Command-line front end for the scenario library. Every run reads a
//! flat `key = value` configuration (the file must name the study via
//! `scenario = <name>`), overlays `--override` pairs, and writes
//! artifacts plus a summary into the output directory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oqsim::error::Error;
use oqsim::scenarios::{builtin_scenarios, find_scenario, parse_config, Config, Scenario, Verb};

#[derive(Parser)]
#[command(
    name = "oqsim",
    version,
    about = "Weakly damped open-system dynamics: solvers, exact references, \
             trajectories, and system identification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios.
    List,
    /// Resolve couplings and write the per-transition rate table.
    Rates(RunArgs),
    /// Propagate the first configured solver.
    Evolve(RunArgs),
    /// Run every configured solver (and the exact reference where
    /// enabled) and tabulate pairwise errors.
    Compare(RunArgs),
    /// Identify the dynamics behind the configured evolution.
    Sysid(RunArgs),
    /// Average a jump-unraveling ensemble against the deterministic
    /// solution.
    Trajectories(RunArgs),
    /// Tune damping rates and shifts against the exact reference.
    Fit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file: `key = value` lines with optional
    /// `[section]` headers; must set `scenario = <name>`.
    #[arg(value_name = "CONFIG")]
    path: Option<PathBuf>,

    /// Configuration file (alternative to the positional argument).
    #[arg(long, value_name = "PATH", conflicts_with = "path")]
    config: Option<PathBuf>,

    /// Output directory; defaults to out/<scenario>.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override one configuration key (repeatable). The key
    /// `scenario=<name>` selects the study without a file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Random seed for trajectory ensembles (shorthand for
    /// --override trajectories.seed=<N>).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(command: &Command) -> Result<(), Error> {
    let (verb, args) = match command {
        Command::List => {
            for s in builtin_scenarios() {
                println!("{:<18} {}", s.name, s.summary);
            }
            return Ok(());
        }
        Command::Rates(a) => (Verb::Rates, a),
        Command::Evolve(a) => (Verb::Evolve, a),
        Command::Compare(a) => (Verb::Compare, a),
        Command::Sysid(a) => (Verb::Sysid, a),
        Command::Trajectories(a) => (Verb::Trajectories, a),
        Command::Fit(a) => (Verb::Fit, a),
    };
    let (scenario, user, out_dir) = load(args)?;
    let rows = scenario.execute(verb, &user, &out_dir)?;
    println!("scenario = {}", scenario.name);
    println!("out = {}", out_dir.display());
    for (key, value) in &rows {
        println!("{key} = {value}");
    }
    if verb == Verb::Rates {
        print!("{}", fs::read_to_string(out_dir.join("rates.csv"))?);
    }
    Ok(())
}

/// Assemble the user configuration from the file, `--override` pairs,
/// and `--seed`, and split off the reserved `scenario` key.
fn load(args: &RunArgs) -> Result<(&'static Scenario, Config, PathBuf), Error> {
    let mut user = Config::default();
    if let Some(path) = args.config.as_ref().or(args.path.as_ref()) {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config '{}': {e}", path.display()))
        })?;
        user = parse_config(&text)?;
    }
    for item in &args.overrides {
        let Some((key, value)) = item.split_once('=') else {
            return Err(Error::Config(format!(
                "--override '{item}' is not KEY=VALUE"
            )));
        };
        user.set(key.trim(), value.trim());
    }
    if let Some(seed) = args.seed {
        user.set("trajectories.seed", &seed.to_string());
    }
    let Some(name) = user.remove("scenario") else {
        return Err(Error::Config(
            "no scenario selected: set `scenario = <name>` in the config file \
             or pass --override scenario=<name> (see `oqsim list`)"
            .into(),
        ));
    };
    let scenario = find_scenario(&name)?;
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&name));
    Ok((scenario, user, out_dir))
}
