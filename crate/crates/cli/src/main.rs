use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use resetfreq::analytic::Method;
use resetfreq::metrics::TauMode;
use resetfreq::presets;
use resetfreq_cli::commands::{self, CliError, CliResult};

#[derive(Parser)]
#[command(name = "resetfreq", version, about = "Frequency-domain analysis of reset control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Df,
    ClDf,
    DeltaCl,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Df => Method::Df,
            MethodArg::ClDf => Method::ClDf,
            MethodArg::DeltaCl => Method::DeltaCl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TauArg {
    None,
    Optimal,
    Full,
}

impl From<TauArg> for TauMode {
    fn from(t: TauArg) -> Self {
        match t {
            TauArg::None => TauMode::None,
            TauArg::Optimal => TauMode::Optimal,
            TauArg::Full => TauMode::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TuningSet {
    /// R*0..R*2
    Test,
    /// R0..R7
    Cglp,
}

#[derive(Subcommand)]
enum Command {
    /// Bode data of the plant, base-linear loop, reset element and DF loop.
    Bode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, num_args = 2, value_names = ["LO_HZ", "HI_HZ"])]
        band: Option<Vec<f64>>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// One-period error prediction with harmonics and assumption flags.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        freq: Option<f64>,
        #[arg(long, value_enum, default_value = "delta-cl")]
        method: MethodArg,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Raw closed-loop simulation export.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        freq: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweeps predictions against simulation and checks the method ordering.
    Validate {
        #[arg(long)]
        config: Vec<PathBuf>,
        #[arg(long, value_enum)]
        tuning_set: Option<TuningSet>,
        #[arg(long, value_enum)]
        tau: Option<TauArg>,
        #[arg(long, num_args = 2, value_names = ["LO_HZ", "HI_HZ"])]
        band: Option<Vec<f64>>,
        #[arg(long)]
        points: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Controller gain, margins and open-loop reset stability.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes the fully explicit configuration.
        #[arg(long)]
        emit_config: Option<PathBuf>,
    },
}

fn band(v: Option<Vec<f64>>) -> Option<(f64, f64)> {
    v.map(|b| (b[0], b[1]))
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Bode {
            config,
            out,
            band: b,
            points,
        } => {
            let (_, res) = commands::load_resolved(&config)?;
            commands::bode(&res, band(b).unwrap_or(res.band_hz), points.unwrap_or(res.points), &out)
        }
        Command::Predict {
            config,
            freq,
            method,
            out,
        } => {
            let (_, res) = commands::load_resolved(&config)?;
            commands::predict(&res, freq.unwrap_or(res.freq_hz), method.into(), &out)
        }
        Command::Simulate {
            config,
            freq,
            amplitude,
            out,
        } => {
            let (_, res) = commands::load_resolved(&config)?;
            commands::simulate(&res, freq.unwrap_or(res.freq_hz), amplitude, &out)
        }
        Command::Validate {
            config,
            tuning_set,
            tau,
            band: b,
            points,
            out,
        } => {
            let configs = config.iter().map(commands::load_resolved).collect::<CliResult<Vec<_>>>()?;
            let tunings: Vec<_> = match tuning_set {
                Some(TuningSet::Test) => presets::TEST_TUNINGS.to_vec(),
                Some(TuningSet::Cglp) => presets::CGLP_TUNINGS.to_vec(),
                None => Vec::new(),
            };
            let v = commands::validate(&configs, &tunings, tau.map(Into::into), band(b), points)?;
            commands::write_validation(&v, &out)?;
            Ok(v.exit_code())
        }
        Command::Tune {
            config,
            out,
            emit_config,
        } => {
            let (_, res) = commands::load_resolved(&config)?;
            commands::tune(&res, out.as_deref(), emit_config.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(CliError { code, reason, message }) => {
            eprintln!("error[{reason}]: {message}");
            ExitCode::from(code as u8)
        }
    }
}
