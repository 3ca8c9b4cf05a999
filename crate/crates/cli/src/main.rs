//! `o3rtaa` — command-line front end for the environmental-alert
//! framework: run simulations, mine logged observations into rules,
//! inspect repository logs, and verify recorded transcripts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use o3rtaa_core::mining::{induce_tree, tree_to_rules};
use o3rtaa_core::repo::{LabelState, Repository};
use o3rtaa_core::scenario::sim::{parse_transcript_document, run_simulation, transcript_document};
use o3rtaa_core::scenario::SimConfig;

#[derive(Parser)]
#[command(name = "o3rtaa", version, about = "Environmental-alert agent framework")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and print its report.
    Run(RunArgs),
    /// Mine one location's labeled observations into a decision tree and
    /// production rules.
    Mine(MineArgs),
    /// Summarize a repository log.
    Inspect(InspectArgs),
    /// Re-run a recorded transcript and verify it reproduces exactly.
    Replay(ReplayArgs),
    /// Print the reference configuration as a starting point.
    Sample,
}

#[derive(Args)]
struct RunArgs {
    /// Simulation configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured tick count.
    #[arg(long)]
    ticks: Option<u64>,
    /// Write a replayable transcript document here.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct MineArgs {
    /// Configuration that defines the variable schema.
    #[arg(long)]
    config: PathBuf,
    /// Repository log to mine.
    #[arg(long)]
    log: PathBuf,
    /// Location whose observations to use.
    #[arg(long)]
    location: String,
}

#[derive(Args)]
struct InspectArgs {
    /// Repository log to summarize.
    #[arg(long)]
    log: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Transcript document produced by `run --transcript`.
    #[arg(long)]
    transcript: PathBuf,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Run(args) => run(args),
        Command::Mine(args) => mine(args),
        Command::Inspect(args) => inspect(args),
        Command::Replay(args) => replay(args),
        Command::Sample => {
            print!("{}", SimConfig::standard_toml());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run(args: RunArgs) -> Result<ExitCode, String> {
    let mut config = SimConfig::from_path(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        config.simulation.seed = seed;
    }
    if let Some(ticks) = args.ticks {
        config.simulation.ticks = ticks;
    }
    let outcome = run_simulation(config.clone()).map_err(|e| e.to_string())?;
    if let Some(path) = &args.transcript {
        let document = transcript_document(&config, &outcome.transcript);
        std::fs::write(path, document).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &args.report {
        std::fs::write(path, &outcome.report).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    print!("{}", outcome.report);
    Ok(ExitCode::SUCCESS)
}

fn mine(args: MineArgs) -> Result<ExitCode, String> {
    let config = SimConfig::from_path(&args.config).map_err(|e| e.to_string())?;
    let repo = Repository::open(&args.log).map_err(|e| e.to_string())?;
    let dataset = repo.query_examples(&args.location, &config.schema()).map_err(|e| e.to_string())?;
    if dataset.is_empty() {
        return Err(format!("no labeled observations for location {:?}", args.location));
    }
    let tree = induce_tree(&dataset).map_err(|e| e.to_string())?;
    println!("{} labeled examples for {}", dataset.len(), args.location);
    println!();
    print!("{}", tree.render());
    println!();
    for rule in tree_to_rules(&tree) {
        println!("{rule}");
    }
    Ok(ExitCode::SUCCESS)
}

fn inspect(args: InspectArgs) -> Result<ExitCode, String> {
    let repo = Repository::open(&args.log).map_err(|e| e.to_string())?;
    println!("threshold k       {}", repo.k());
    println!("events            {}", repo.last_event_id());
    println!("labeled           {}", repo.labeled_count());
    println!("feedback lines    {}", repo.feedback_count());
    println!("sense lines       {}", repo.sense_count());
    let mut by_location: std::collections::BTreeMap<&str, (u64, u64)> = Default::default();
    for obs in repo.observations() {
        let entry = by_location.entry(&obs.location).or_default();
        entry.0 += 1;
        if matches!(obs.label_state, LabelState::Labeled(..)) {
            entry.1 += 1;
        }
    }
    for (location, (events, labeled)) in by_location {
        println!("  {location}: {events} events, {labeled} labeled");
    }
    Ok(ExitCode::SUCCESS)
}

fn replay(args: ReplayArgs) -> Result<ExitCode, String> {
    let document = std::fs::read_to_string(&args.transcript)
        .map_err(|e| format!("{}: {e}", args.transcript.display()))?;
    let (config, recorded) = parse_transcript_document(&document).map_err(|e| e.to_string())?;
    let outcome = run_simulation(config).map_err(|e| e.to_string())?;
    if outcome.transcript == recorded {
        println!("transcript verified: {} messages reproduced", recorded.len());
        return Ok(ExitCode::SUCCESS);
    }
    let divergence = outcome
        .transcript
        .iter()
        .zip(&recorded)
        .position(|(fresh, old)| fresh != old)
        .unwrap_or_else(|| outcome.transcript.len().min(recorded.len()));
    eprintln!(
        "transcript diverged at message {divergence} (recorded {}, reproduced {})",
        recorded.len(),
        outcome.transcript.len()
    );
    if let (Some(old), Some(fresh)) = (recorded.get(divergence), outcome.transcript.get(divergence))
    {
        eprintln!("  recorded:   {old}");
        eprintln!("  reproduced: {fresh}");
    }
    Ok(ExitCode::FAILURE)
}
