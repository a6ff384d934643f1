use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use persuade_cli::{cmd_simulate, cmd_solve, cmd_sweep_convexity, cmd_sweep_snr, cmd_verify, CliError, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "persuade", version, about = "Dynamic persuasion simulator and solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "./out")]
    out_dir: PathBuf,
    /// Replaces `sim.seed` from the config.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate exit times from the configured belief interval.
    Simulate(Common),
    /// Find the sender-optimal two-atom law.
    Solve(Common),
    /// Re-solve with increasing quadratic cost weights.
    SweepConvexity(Common),
    /// Re-solve across signal-to-noise ratios.
    SweepSnr(Common),
    /// Run a built-in verification suite.
    Verify {
        /// no_garbling, two_atom, closed_forms or comparative_statics
        suite: String,
        #[arg(long)]
        seed_override: Option<u64>,
    },
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Simulate(c) => {
            let files = cmd_simulate(&c.config, &c.out_dir, c.seed_override)?.files;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Solve(c) => {
            let r = cmd_solve(&c.config, &c.out_dir, c.seed_override)?;
            println!("p_star={} lower_star={} objective={}", r.p_star, r.lower_star, r.objective);
        }
        Command::SweepConvexity(c) => {
            let rows = cmd_sweep_convexity(&c.config, &c.out_dir, c.seed_override)?;
            println!("wrote {} rows to {}", rows.len(), c.out_dir.join("sweep_convexity.csv").display());
        }
        Command::SweepSnr(c) => {
            let rows = cmd_sweep_snr(&c.config, &c.out_dir, c.seed_override)?;
            println!("wrote {} rows to {}", rows.len(), c.out_dir.join("sweep_snr.csv").display());
        }
        Command::Verify { suite, seed_override } => {
            let mut stdout = std::io::stdout().lock();
            cmd_verify(&suite, seed_override, &mut stdout).with_context(|| format!("suite {suite}"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::config(first));
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.downcast_ref::<CliError>() {
                Some(c) => {
                    eprintln!("{c}");
                    c.code
                }
                None => {
                    log::error!("{e:#}");
                    eprintln!("ERR: internal: {}", format!("{e:#}").replace('\n', " "));
                    1
                }
            };
            ExitCode::from(code as u8)
        }
    }
}
