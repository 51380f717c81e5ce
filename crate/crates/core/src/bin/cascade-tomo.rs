use std::path::PathBuf;
use std::process::ExitCode;

use cascade_tomo::analysis::{FitKind, FssScanOptions};
use cascade_tomo::pipeline::{
    cmd_analyze, cmd_report, cmd_simulate, cmd_tomo, to_stable_json, AnalyzeRequest, RunConfig, TomoSource, SEED_ENV,
};
use cascade_tomo::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Time-resolved polarization tomography of cascaded photon pairs.
#[derive(Parser)]
#[command(name = "cascade-tomo", version)]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override `key.path=value`; the value is JSON or a bare string.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Replaces `io.output_dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one stream pair per projection and write a manifest.
    Simulate,
    /// Reconstruct states from a manifest (.json) or a count CSV.
    Tomo { input: PathBuf },
    /// Single analyses; results are printed as JSON.
    Analyze {
        /// Also write the JSON here.
        #[arg(long, global = true)]
        output: Option<PathBuf>,
        #[command(subcommand)]
        kind: AnalyzeCommand,
    },
    /// Print a text summary of a tomography report.
    Report { report: PathBuf },
}

#[derive(Args)]
struct Binning {
    /// Histogram bin width, ps.
    #[arg(long, default_value_t = 50.0)]
    bin_width: f64,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// g²(0) from a histogram CSV or a two-channel stream.
    G2 {
        input: PathBuf,
        /// Pulse period in ps; defaults to the config repetition rate.
        #[arg(long)]
        rep_period: Option<f64>,
        #[arg(long, default_value_t = 3)]
        side_peaks: usize,
        #[command(flatten)]
        binning: Binning,
    },
    /// Exponential lifetime from a decay histogram or a stream.
    Lifetime {
        input: PathBuf,
        #[arg(long)]
        rep_period: Option<f64>,
        #[command(flatten)]
        binning: Binning,
    },
    /// FSS from an `angle_rad,peak_energy_uev` CSV.
    Fss {
        input: PathBuf,
        /// Energy oscillations per radian of plate rotation.
        #[arg(long, default_value_t = 4.0)]
        multiplier: f64,
    },
    /// Convert an oscillation period (ps) to FSS (µeV).
    FssPeriod {
        value: f64,
        /// Treat the value as an FSS and return the period.
        #[arg(long)]
        from_fss: bool,
    },
    /// Recapture model on the zero-delay peak.
    Recapture {
        input: PathBuf,
        /// Fit half-window around zero delay, ps. Keep it clear of the
        /// neighbouring side peaks' tails.
        #[arg(long, default_value_t = 3000.0)]
        window: f64,
        #[command(flatten)]
        binning: Binning,
    },
    /// Power law on an `x,y` CSV.
    Power { input: PathBuf },
    /// Photon rate at the first lens; efficiencies default to the config.
    Efficiency {
        #[arg(long)]
        measured_cps: f64,
        #[arg(long)]
        setup_eff: Option<f64>,
        #[arg(long)]
        detector_eff: Option<f64>,
        /// MHz.
        #[arg(long)]
        rep_rate: Option<f64>,
        /// Separately reported rate to check against, MHz.
        #[arg(long)]
        reported_mhz: Option<f64>,
    },
    /// Fit any model to an `x,y[,weight]` CSV.
    Fit { kind: String, input: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let mut config = RunConfig::load(cli.config.as_deref(), &cli.overrides, env_seed.as_deref())?;
    if let Some(dir) = cli.output_dir {
        config.io.output_dir = dir;
    }
    match cli.command {
        Command::Simulate => {
            let (path, manifest) = cmd_simulate(&config)?;
            let records: usize = manifest.entries.iter().map(|e| e.xx.records + e.x.records).sum();
            println!("{} ({} projections, {records} records)", path.display(), manifest.entries.len());
        }
        Command::Tomo { input } => {
            let (path, _) = cmd_tomo(&TomoSource::from_path(&input), &config)?;
            print!("{}", cmd_report(&path)?);
            println!("report: {}", path.display());
        }
        Command::Report { report } => print!("{}", cmd_report(&report)?),
        Command::Analyze { output, kind } => {
            let req = analyze_request(kind, &config)?;
            let text = to_stable_json(&cmd_analyze(&req)?)?;
            if let Some(path) = output {
                std::fs::write(&path, &text).map_err(|e| Error::Io { path, source: e })?;
            }
            print!("{text}");
        }
    }
    Ok(())
}

fn analyze_request(cmd: AnalyzeCommand, config: &RunConfig) -> Result<AnalyzeRequest> {
    let period = |p: Option<f64>| p.unwrap_or_else(|| config.emitter.rep_period());
    Ok(match cmd {
        AnalyzeCommand::G2 {
            input,
            rep_period,
            side_peaks,
            binning,
        } => AnalyzeRequest::G2 {
            input,
            rep_period: period(rep_period),
            side_peaks,
            bin_width: binning.bin_width,
        },
        AnalyzeCommand::Lifetime {
            input,
            rep_period,
            binning,
        } => AnalyzeRequest::Lifetime {
            input,
            rep_period: period(rep_period),
            bin_width: binning.bin_width,
        },
        AnalyzeCommand::Fss { input, multiplier } => AnalyzeRequest::Fss {
            input,
            options: FssScanOptions {
                angular_multiplier: multiplier,
                ..Default::default()
            },
        },
        AnalyzeCommand::FssPeriod { value, from_fss } => AnalyzeRequest::FssPeriod { value, from_fss },
        AnalyzeCommand::Recapture { input, window, binning } => AnalyzeRequest::Recapture {
            input,
            bin_width: binning.bin_width,
            window,
        },
        AnalyzeCommand::Power { input } => AnalyzeRequest::Power { input },
        AnalyzeCommand::Efficiency {
            measured_cps,
            setup_eff,
            detector_eff,
            rep_rate,
            reported_mhz,
        } => AnalyzeRequest::Efficiency {
            measured_cps,
            setup_eff: setup_eff.unwrap_or(config.emitter.setup_efficiency),
            detector_eff: detector_eff.unwrap_or(config.emitter.detector_efficiency),
            rep_rate_mhz: rep_rate.unwrap_or(config.emitter.rep_rate),
            reported_mhz,
        },
        AnalyzeCommand::Fit { kind, input } => AnalyzeRequest::Fit {
            kind: kind.parse::<FitKind>()?,
            input,
        },
    })
}
