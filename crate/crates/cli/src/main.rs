mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "typeshift", version, about = "Shift-reduce semantic parser for questions, guided by a type hierarchy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse one question and print its meaning representation.
    Parse(ParseArgs),
    /// Forced decoding, then perceptron training; writes a model.
    Train(TrainArgs),
    /// Decode a labelled dataset and report precision, recall and F1.
    Eval(EvalArgs),
    /// Search for derivations of each example's gold MR.
    ForceDecode(ForceArgs),
    /// Print a step-by-step parse table.
    Trace(TraceArgs),
}

#[derive(Args, Debug, Clone)]
struct DomainArgs {
    /// Domain file; the bundled mini geography domain when omitted.
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Collapse every domain base type except `i` into a single type `e`.
    #[arg(long)]
    simple_types: bool,
}

#[derive(Args, Debug)]
struct ParseArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Model file; a zero-weight model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    beam: u64,
    /// Also print the step table of the best derivation.
    #[arg(long)]
    trace: bool,
    /// Only accept final expressions whose type is a subtype of this one.
    #[arg(long)]
    goal_type: Option<String>,
    /// The question.
    #[arg(required = true, num_args = 1..)]
    sentence: Vec<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Training data, `question<TAB>mr[<TAB>tags]` per line.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the model.
    #[arg(long)]
    model: PathBuf,
    /// Reference-derivation cache; read if present, written after training.
    #[arg(long)]
    refs: Option<PathBuf>,
    /// Feature template file; the built-in 84 templates when omitted.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    beam: u64,
    /// Per-example time limit for exhaustive forced decoding, in seconds.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..))]
    pass2_beam: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Threads for forced decoding; 0 picks automatically.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Keep the final weights instead of their average.
    #[arg(long)]
    no_averaging: bool,
    /// Update on the full derivation when no prefix shows a violation.
    #[arg(long)]
    final_step_fallback: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    beam: u64,
    #[arg(long)]
    goal_type: Option<String>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Print each prediction.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct ForceArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Write the references found to this cache file.
    #[arg(long)]
    refs: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Space-separated actions to replay instead of decoding: `skip`, `reR`,
    /// `reL`, `union`, `sh` (first shift available), `sh.K` (K-th shift
    /// available) or `sh:CONSUMED:TEMPLATE`.
    #[arg(long)]
    actions: Option<String>,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    beam: u64,
    #[arg(long)]
    goal_type: Option<String>,
    #[arg(required = true, num_args = 1..)]
    sentence: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Parse(a) => commands::parse(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::ForceDecode(a) => commands::force_decode(a),
        Command::Trace(a) => commands::trace(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::FAILURE
        }
    }
}
