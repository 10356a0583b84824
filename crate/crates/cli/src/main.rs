mod commands;
mod demo;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Process exit statuses, stable for scripting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// Validation violations, a diff, or a failed demo check.
    Difference = 1,
    Usage = 2,
    /// Unreadable file or unparsable input.
    Io = 3,
    /// Pipeline, protocol or model failure.
    Runtime = 4,
}

#[derive(Parser)]
#[command(name = "fspm-bridge", version, about = "Exchange plant graphs between FSPM platforms")]
struct Cli {
    /// Report unknown XEG attributes and elements as warnings instead of errors.
    #[arg(long, global = true)]
    lenient: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModelKind {
    /// Retroactive: sets internode pressure and color, sends the graph back.
    Water,
    /// Non-retroactive: answers with a status line.
    Status,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a graph, run a pipeline over it and write the result.
    Convert {
        input: PathBuf,
        /// Output path, `-` for stdout.
        output: PathBuf,
        /// Pipeline file; without one the input is only canonicalised.
        #[arg(long)]
        pipeline: Option<PathBuf>,
    },
    /// Check a graph file and list every violated invariant.
    Validate { path: PathBuf },
    /// Print the first canonical difference between two graph files.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Serve a toy target model. The bound port is printed on stdout.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long, default_value_t = 100.0)]
        base_pressure: f64,
        #[arg(long, default_value_t = 2.5)]
        loss_per_node: f64,
        /// Exit after the first session.
        #[arg(long)]
        once: bool,
    },
    /// Grow the toy plant against the servers of a roster; prints a JSON report.
    Run {
        roster: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Final plant as XEG.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        timeout_s: u64,
    },
    /// Spawn a water server, run the retroactive loop against it and check
    /// the result against an offline run.
    DemoRoundtrip {
        #[arg(long, default_value_t = 5)]
        steps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        base_pressure: f64,
        #[arg(long, default_value_t = 2.5)]
        loss_per_node: f64,
        /// Use a server already listening on this port instead of spawning one.
        #[arg(long)]
        connect_port: Option<u16>,
        /// Also write the final plant as XEG.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        timeout_s: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FSPM_BRIDGE_LOG", "warn")).init();
    let cli = Cli::parse();
    let exit = match cli.command {
        Command::Convert { input, output, pipeline } => {
            commands::convert(&input, pipeline.as_deref(), &output, cli.lenient)
        }
        Command::Validate { path } => commands::validate(&path, cli.lenient),
        Command::Diff { a, b, tol } => commands::diff(&a, &b, tol, cli.lenient),
        Command::Serve { port, bind, model, base_pressure, loss_per_node, once } => {
            commands::serve(&bind, port, model, base_pressure, loss_per_node, once)
        }
        Command::Run { roster, steps, seed, out, timeout_s } => commands::run(&roster, steps, seed, &out, timeout_s),
        Command::DemoRoundtrip { steps, seed, base_pressure, loss_per_node, connect_port, out, timeout_s } => {
            demo::demo_roundtrip(&demo::DemoOptions {
                steps,
                seed,
                base_pressure,
                loss_per_node,
                connect_port,
                out,
                timeout_s,
            })
        }
    };
    ExitCode::from(exit as u8)
}
