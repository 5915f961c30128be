use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Memory-policy simulator and scene-graph inspector.
#[derive(Parser)]
#[command(name = "memsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and emit a single CSV row plus a summary.
    Simulate {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
        /// Override the stream seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the [sweep] grid and emit a CSV plus per-run hit-rate series.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Grid CSV output path; series files are written alongside it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        /// Worker threads; the default keeps output ordering trivially
        /// reproducible.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Replace the configured seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Inspect a scene-graph file.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Print the prompt serialization of the graph.
    Render {
        #[arg(long)]
        file: PathBuf,
    },
    /// Validate graph invariants.
    Check {
        #[arg(long)]
        file: PathBuf,
    },
    /// Print whether two areas are mutually navigable.
    Query {
        #[arg(long)]
        file: PathBuf,
        a: String,
        b: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            force,
            seed,
        } => memsim::cmd_simulate(&config, out.as_deref(), force, seed),
        Command::Sweep {
            config,
            out,
            force,
            jobs,
            seed,
        } => memsim::cmd_sweep(&config, &out, force, jobs, seed),
        Command::Graph { command } => match command {
            GraphCommand::Render { file } => memsim::cmd_graph_render(&file),
            GraphCommand::Check { file } => memsim::cmd_graph_check(&file),
            GraphCommand::Query { file, a, b } => memsim::cmd_graph_query(&file, &a, &b),
        },
    };
    match result {
        Ok(output) => {
            print!("{}", output.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
