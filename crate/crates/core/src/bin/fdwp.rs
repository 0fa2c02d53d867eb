//! Command-line front end: `fdwp rate-region | partial-csi | validate`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdwp::cli::{self, Scenario};

#[derive(Parser)]
#[command(name = "fdwp", version, about = "Beamforming and time-split optimization for full-duplex wireless-powered MIMO links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full-CSI rate regions of the four designs, averaged over channel draws.
    RateRegion(Common),
    /// Partial-CSI ergodic rate against outage probability.
    PartialCsi(Common),
    /// Check closed-form outage and ergodic rate against simulation.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file; reference values are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the CSV output.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn scenario(&self) -> fdwp::Result<Scenario> {
        let mut s = match &self.config {
            Some(p) => cli::load_scenario(p)?,
            None => Scenario::reference(),
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        Ok(s)
    }
}

fn run(cmd: &Command) -> fdwp::Result<i32> {
    let common = match cmd {
        Command::RateRegion(c) | Command::PartialCsi(c) | Command::Validate(c) => c,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(fdwp::Error::InvalidArgument("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let scenario = common.scenario()?;
    let dir = Some(common.out_dir.as_path());
    match cmd {
        Command::RateRegion(_) => {
            let out = cli::run_rate_region(&scenario, dir)?;
            eprintln!("rate region: {} realizations written to {}", out.curves.len(), common.out_dir.display());
            Ok(cli::EXIT_OK)
        }
        Command::PartialCsi(_) => {
            let out = cli::run_partial_csi(&scenario, dir)?;
            eprintln!("partial csi: {} outage targets written to {}", out.rows.len(), common.out_dir.display());
            Ok(cli::EXIT_OK)
        }
        Command::Validate(_) => {
            let report = cli::run_validate(&scenario, dir)?;
            let failed = report.rows.iter().filter(|r| !r.pass).count();
            eprintln!("validation: {} rows, {failed} outside tolerance", report.rows.len());
            Ok(if failed == 0 { cli::EXIT_OK } else { cli::EXIT_VALIDATION })
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let code = match run(&args.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cli::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
