use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ared_cli::{server, views};
use ared_core::benchmarks::{run_comparison, BenchFunction, RowSource};
use ared_core::io::{self, SessionRequest};

#[derive(Parser)]
#[command(name = "ared", version, about = "Adaptive random experiment design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded benchmark trials against the matched baseline design.
    Bench {
        #[arg(long)]
        function: BenchFunction,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comparison table CSV.
        #[arg(long)]
        out: PathBuf,
        /// Also write one archive CSV per trial into this directory.
        #[arg(long)]
        archives: Option<PathBuf>,
    },
    /// Work with a session document on disk.
    Session {
        #[command(subcommand)]
        command: SessionCommand,
    },
    /// Serve the HTTP session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Session store directory.
        #[arg(long, env = "ARED_DATA_DIR", default_value = "ared-data")]
        data: PathBuf,
        /// Require this value in the `x-ared-token` header.
        #[arg(long, env = "ARED_TOKEN")]
        token: Option<String>,
    },
}

#[derive(Subcommand)]
enum SessionCommand {
    /// Open a session from a JSON request (domain, seed, initial points).
    New {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "session.json")]
        out: PathBuf,
    },
    /// Draw the next case and print it.
    Propose {
        #[arg(long, default_value = "session.json")]
        session: PathBuf,
    },
    /// Record the measurement of the pending case.
    Record {
        #[arg(long, default_value = "session.json")]
        session: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        value: f64,
    },
    /// Print a summary of the session.
    Show {
        #[arg(long, default_value = "session.json")]
        session: PathBuf,
    },
    /// Write the archive as CSV.
    Archive {
        #[arg(long, default_value = "session.json")]
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the current surrogate as a model artifact.
    ExportModel {
        #[arg(long, default_value = "session.json")]
        session: PathBuf,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        /// Export even if the session has not converged.
        #[arg(long)]
        force: bool,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn bench(
    function: BenchFunction,
    trials: usize,
    seed: u64,
    out: PathBuf,
    archives: Option<PathBuf>,
) -> Result<()> {
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    let started = Instant::now();
    let table = run_comparison(function, trials, seed)?;
    io::export_table(&table.rows, &out).with_context(|| format!("writing {}", out.display()))?;
    if let Some(dir) = archives {
        let domain = function.domain();
        for t in &table.trials {
            let path = dir.join(format!("{}-trial{}.csv", function.name(), t.trial));
            io::export_archive(&domain, &t.ared_archive, &path)?;
        }
    }
    println!("{:<10} {:>6} {:>12} {:>10} {:>10}", "source", "cases", "MAE", "MAPE", "R");
    for row in &table.rows {
        println!(
            "{:<10} {:>6} {:>12.5} {:>10} {:>10.5}",
            row.source.label(row.trial),
            row.case_count,
            row.mae,
            row.mape.map(|m| format!("{m:.3}")).unwrap_or_else(|| "-".into()),
            row.r
        );
    }
    let failed: Vec<_> = table.trials.iter().filter(|t| !t.converged).collect();
    for t in &failed {
        eprintln!(
            "trial {} stopped without converging: {}",
            t.trial,
            t.failure.as_deref().unwrap_or("unknown")
        );
    }
    let ared: Vec<f64> = table.rows_for(RowSource::Ared).map(|r| r.mae).collect();
    println!(
        "{} trials, mean ARED MAE {:.5}, {:.1}s; table written to {}",
        trials,
        ared.iter().sum::<f64>() / ared.len() as f64,
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn session(cmd: SessionCommand) -> Result<()> {
    let load = |p: &PathBuf| {
        io::load_session(p).with_context(|| format!("loading session {}", p.display()))
    };
    match cmd {
        SessionCommand::New { config, out } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let req: SessionRequest = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", config.display()))?;
            let s = req.start()?;
            io::save_session(&s, &out)?;
            print_json(&views::summary(&out.display().to_string(), &s))
        }
        SessionCommand::Propose { session } => {
            let mut s = load(&session)?;
            let view = views::ProposalView::from(s.propose_next()?);
            io::save_session(&s, &session)?;
            print_json(&view)
        }
        SessionCommand::Record { session, value } => {
            let mut s = load(&session)?;
            s.record_result(value)?;
            let view = views::ResultView::new(s.history.last().expect("just recorded"), &s);
            io::save_session(&s, &session)?;
            print_json(&view)
        }
        SessionCommand::Show { session } => {
            let s = load(&session)?;
            print_json(&views::summary(&session.display().to_string(), &s))
        }
        SessionCommand::Archive { session, out } => {
            let s = load(&session)?;
            io::export_archive(&s.config.domain, &s.archive, &out)?;
            Ok(())
        }
        SessionCommand::ExportModel {
            session,
            out,
            force,
        } => {
            let s = load(&session)?;
            let artifact = match io::export_model(&s, force) {
                Err(ared_core::error::AredError::NotConverged) => {
                    bail!("session has not converged; pass --force to export anyway")
                }
                other => other?,
            };
            artifact.save(&out)?;
            println!("model written to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Bench {
            function,
            trials,
            seed,
            out,
            archives,
        } => bench(function, trials, seed, out, archives),
        Command::Session { command } => session(command),
        Command::Serve { bind, data, token } => {
            let state = server::AppState::open(&data, token)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(&bind, state))
        }
    }
}
