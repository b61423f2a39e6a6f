use std::path::PathBuf;
use std::process::ExitCode;

use amsqn_bench::commands::{self, MuOverrides};
use amsqn_bench::BenchError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amsqn", version, about = "Almost-multisecant quasi-Newton experiments")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`; `report` prints only when unset).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use seeds 0..N instead of the configured list.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "AMSQN_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write trace.csv and summary.json.
    Run,
    /// Run a method-by-problem sweep and write sweep.csv and table.md.
    Sweep,
    /// Time the shift search against dense and iterative eigensolvers.
    BenchMu {
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Generate a problem instance as JSON.
    Gen {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render a sweep CSV as a markdown table.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn need_config(cli: &Cli) -> Result<&PathBuf, BenchError> {
    cli.config
        .as_ref()
        .ok_or_else(|| BenchError::Config("--config is required for this command".into()))
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn dispatch(cli: &Cli) -> Result<(), BenchError> {
    match &cli.command {
        Command::Run => {
            let s = commands::cmd_run(need_config(cli)?, &out_dir(cli))?;
            println!("{} after {} iterations (gradient ratio {:.3e})", s.status, s.iterations, s.grad_ratio);
        }
        Command::Sweep => {
            let recs = commands::cmd_sweep(need_config(cli)?, &out_dir(cli), cli.seeds, cli.jobs)?;
            print!("{}", amsqn_bench::report::Table::from_records(&recs).to_markdown());
        }
        Command::BenchMu { n, q, trials } => {
            let over = MuOverrides {
                n: n.clone(),
                q: q.clone(),
                trials: *trials,
            };
            for r in commands::cmd_bench_mu(cli.config.as_deref(), &out_dir(cli), over)? {
                println!(
                    "n={} q={}: alg1 {:.3e}s, dense {:.3e}s, iterative {:.3e}s",
                    r.n, r.q, r.t_alg1, r.t_dense_eig, r.t_iter_eig
                );
            }
        }
        Command::Gen { seed } => {
            let path = commands::cmd_gen(need_config(cli)?, &out_dir(cli), *seed)?;
            println!("{}", path.display());
        }
        Command::Report { input } => {
            print!("{}", commands::cmd_report(input, cli.out.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
