use std::io::{self, IsTerminal, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand};
use hgmp_cli::{corpus, repl, Config, Output, Source, StepRelation, TraceFormat, EXIT_USAGE};
use hgmp_core::{Mode, DEFAULT_FUEL};

// Big-step evaluation and derivation rendering recurse once per nesting level.
const STACK_SIZE: usize = 256 * 1024 * 1024;

#[derive(Parser, Debug)]
#[command(name = "hgmp", version, about = "Compile, run and trace staged meta-programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[arg(long, global = true, default_value = "untyped", value_parser = parse_mode)]
    mode: Mode,

    /// Rule applications allowed per run.
    #[arg(long, global = true, env = "HGMP_FUEL", default_value_t = DEFAULT_FUEL,
          value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,

    #[arg(long, global = true, value_enum)]
    trace: Option<TraceFormat>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the compiled program (and its type in typed mode).
    Compile { file: Option<PathBuf> },
    /// Compile, check and run; print the value.
    Run { file: Option<PathBuf> },
    /// Apply a single relation.
    Step {
        #[arg(long, value_enum)]
        relation: StepRelation,
        file: Option<PathBuf>,
    },
    /// Print the type of the compiled program.
    Typecheck { file: Option<PathBuf> },
    /// Interactive session.
    Repl,
    /// Check every case in a corpus directory.
    Corpus {
        #[arg(default_value = "corpus")]
        dir: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

/// Reads FILE, or stdin when it is absent or `-`.
fn input(file: &Option<PathBuf>) -> Result<(String, String), Output> {
    match file {
        Some(p) if p.as_os_str() != "-" => match std::fs::read_to_string(p) {
            Ok(text) => Ok((p.display().to_string(), text)),
            Err(e) => Err(Output {
                stderr: format!("error: cannot read {}: {e}\n", p.display()),
                code: EXIT_USAGE,
                ..Output::default()
            }),
        },
        _ => {
            let mut text = String::new();
            match io::stdin().read_to_string(&mut text) {
                Ok(_) => Ok(("<stdin>".to_string(), text)),
                Err(e) => Err(Output {
                    stderr: format!("error: cannot read stdin: {e}\n"),
                    code: EXIT_USAGE,
                    ..Output::default()
                }),
            }
        }
    }
}

fn with_file(file: &Option<PathBuf>, f: impl FnOnce(Source) -> Output) -> Output {
    match input(file) {
        Ok((name, text)) => f(Source::new(&name, &text)),
        Err(out) => out,
    }
}

fn execute(cli: Cli) -> Output {
    let cfg = Config {
        mode: cli.mode,
        fuel: cli.fuel,
        trace: cli.trace,
    };
    match &cli.command {
        Command::Compile { file } => with_file(file, |s| hgmp_cli::compile(s, &cfg)),
        Command::Run { file } => with_file(file, |s| hgmp_cli::run(s, &cfg)),
        Command::Step { relation, file } => with_file(file, |s| hgmp_cli::step(s, &cfg, *relation)),
        Command::Typecheck { file } => with_file(file, |s| hgmp_cli::typecheck(s, &cfg)),
        Command::Corpus { dir } => corpus::run(dir, &cfg),
        Command::Repl => {
            let stdin = io::stdin();
            let prompt = stdin.is_terminal().then_some("hgmp> ");
            match repl::run(stdin.lock(), io::stdout(), io::stderr(), cfg, prompt) {
                Ok(()) => Output::default(),
                Err(e) => Output {
                    stderr: format!("error: {e}\n"),
                    code: hgmp_cli::EXIT_ERROR,
                    ..Output::default()
                },
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let worker = thread::Builder::new()
        .stack_size(STACK_SIZE)
        .spawn(move || execute(cli))
        .expect("spawn worker thread");
    let out = worker.join().unwrap_or_else(|_| Output {
        stderr: "error: internal failure\n".to_string(),
        code: hgmp_cli::EXIT_ERROR,
        ..Output::default()
    });
    let _ = io::stdout().write_all(out.stdout.as_bytes());
    let _ = io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
