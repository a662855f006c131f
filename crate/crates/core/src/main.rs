//! `terabeam` CLI: deterministic sweeps and diagnostics over the simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use terabeam::channel::{AbsorptionTable, SystemConfig};
use terabeam::runner::{self, SweepKind, SweepSpec};
use terabeam::Result;

#[derive(Parser)]
#[command(name = "terabeam", version, about = "Wideband THz multi-user MIMO precoding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; omitted keys (or the whole flag) fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte-Carlo trials (output is thread-count
    /// independent).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Achievable sum-rate against SNR for the configured schemes.
    SumrateSweep(RunArgs),
    /// Energy efficiency against the number of users.
    EeSweep(RunArgs),
    /// Beam pattern of one scheme serving one user, per subcarrier.
    Beampattern(RunArgs),
    /// Distance-dependent path loss and available bandwidth windows.
    Pathloss(RunArgs),
    /// Check a config file; exit 0 when valid, 1 otherwise.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(args: &RunArgs, kind: SweepKind) -> Result<(SystemConfig, SweepSpec)> {
    let (mut config, mut spec) = match &args.config {
        Some(path) => runner::load_config(path)?,
        None => (SystemConfig::default(), SweepSpec::default()),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    spec.kind = kind;
    spec.output_path = Some(args.out.clone());
    Ok((config, spec))
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::SumrateSweep(args) => {
            let (config, spec) = load(args, SweepKind::SumrateSweep)?;
            let result = runner::run_sumrate_sweep(&config, &spec, args.threads)?;
            runner::write_csv(&result, &args.out)?;
            let resamples = result.rows.first().map_or(0, |r| r.n_resamples);
            println!(
                "sumrate-sweep: {} rows ({} schemes x {} SNR points, {} trials, {} resamples) in {:.2} s -> {}",
                result.rows.len(),
                spec.schemes.len(),
                spec.snr_grid_db.len(),
                config.trials,
                resamples,
                result.wall_time_s,
                args.out.display()
            );
        }
        Command::EeSweep(args) => {
            let (config, spec) = load(args, SweepKind::EeSweep)?;
            let result = runner::run_ee_sweep(&config, &spec, args.threads)?;
            runner::write_csv(&result, &args.out)?;
            println!(
                "ee-sweep: {} rows (K grid {:?}, operating SNR {} dB, {} trials) in {:.2} s -> {}",
                result.rows.len(),
                spec.user_grid,
                spec.operating_snr_db,
                config.trials,
                result.wall_time_s,
                args.out.display()
            );
        }
        Command::Beampattern(args) => {
            let (config, spec) = load(args, SweepKind::Beampattern)?;
            let scheme = *spec.schemes.first().ok_or_else(|| {
                terabeam::Error::invalid_config("schemes", "at least one scheme required")
            })?;
            let user = runner::beam_user(&spec);
            let result = runner::run_beampattern(&config, &spec, scheme, &user)?;
            runner::write_beampattern_csv(&result, &args.out)?;
            println!(
                "beampattern: scheme {} toward sin={} over {} subcarriers in {:.2} s -> {}",
                scheme,
                user.sin_angle,
                result.summary.len(),
                result.wall_time_s,
                args.out.display()
            );
        }
        Command::Pathloss(args) => {
            let (config, spec) = load(args, SweepKind::Pathloss)?;
            let table = match &spec.absorption_table_path {
                Some(path) => AbsorptionTable::from_file(path)?,
                None => AbsorptionTable::default_table(),
            };
            let result = runner::run_pathloss(&config, &spec, &table, &spec.distances_m)?;
            runner::write_pathloss_csv(&result, &args.out)?;
            for (d, ws) in &result.windows {
                let list: Vec<String> = ws
                    .iter()
                    .map(|(lo, hi)| format!("{:.3}-{:.3} THz", lo / 1e12, hi / 1e12))
                    .collect();
                println!("pathloss: windows at {d} m: {}", list.join(", "));
            }
            println!(
                "pathloss: {} rows ({} distances) -> {}",
                result.rows.len(),
                result.windows.len(),
                args.out.display()
            );
        }
        Command::Validate { config } => {
            let (system, spec) = runner::load_config(config)?;
            println!("config OK: {}", runner::config_json(&system, &spec));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
