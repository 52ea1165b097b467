use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entlink_cli::commands::{self, *};
use entlink_cli::CliError;

#[derive(Parser)]
#[command(
    name = "entlink",
    version,
    about = "Entangled-photon fiber link simulator and analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a link and write idler/signal timestamp files.
    Simulate {
        config: PathBuf,
        /// Output directory (overrides run.output_dir and ENTLINK_OUTPUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Acquisition time in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Write text timestamp files instead of binary.
        #[arg(long)]
        csv: bool,
    },
    /// Count coincidences between two timestamp files.
    Coincide {
        file_a: PathBuf,
        file_b: PathBuf,
        /// Full window width in ns.
        #[arg(long, default_value_t = 1.25)]
        window: f64,
        /// Expected t_b − t_a in ps.
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        offset: i64,
        /// Displacement in ns of the accidental-estimate window.
        #[arg(long, allow_negative_numbers = true)]
        displacement: Option<f64>,
        /// Average windows displaced on both sides of the peak.
        #[arg(long, requires = "displacement")]
        symmetric: bool,
    },
    /// Recover the relative delay of two timestamp files.
    ScanDelay {
        file_a: PathBuf,
        file_b: PathBuf,
        /// Search half-span in seconds.
        #[arg(long, default_value_t = 1e-3)]
        span: f64,
        /// Coarse bin width in ns.
        #[arg(long, default_value_t = 1.0)]
        coarse_bin: f64,
        /// Bin width of the written histogram in ps.
        #[arg(long, default_value_t = 10)]
        hist_bin_ps: u64,
        /// Half-range of the written histogram in ns.
        #[arg(long, default_value_t = 2.0)]
        hist_range_ns: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a correlation scan and fit both bases.
    Visibility {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use expected rates instead of Monte Carlo.
        #[arg(long)]
        analytic: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// BBM-92 key rate from a pair rate and visibility.
    Keyrate {
        /// Coincidence rate in pairs/s.
        #[arg(long)]
        pairs: f64,
        #[arg(long)]
        visibility: f64,
        /// Error-correction inefficiency.
        #[arg(long, default_value_t = 1.1)]
        f: f64,
        #[arg(long, default_value_t = 1.0)]
        sifting: f64,
    },
    /// Closed-form rate prediction for a scenario.
    Predict { config: PathBuf },
    /// Pump-power sweep from `run.sweep_pump_mw` or from several configs.
    Sweep {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        analytic: bool,
    },
}

fn run(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Simulate {
            config,
            out,
            seed,
            duration,
            csv,
        } => commands::simulate(&SimulateArgs {
            config,
            out,
            seed,
            duration_s: duration,
            csv,
        }),
        Command::Coincide {
            file_a,
            file_b,
            window,
            offset,
            displacement,
            symmetric,
        } => commands::coincide(&CoincideArgs {
            file_a,
            file_b,
            window_ns: window,
            offset_ps: offset,
            displacement_ns: displacement,
            symmetric,
        }),
        Command::ScanDelay {
            file_a,
            file_b,
            span,
            coarse_bin,
            hist_bin_ps,
            hist_range_ns,
            out,
        } => commands::scan_delay(&ScanDelayArgs {
            file_a,
            file_b,
            span_s: span,
            coarse_bin_ns: coarse_bin,
            hist_bin_ps,
            hist_range_ns,
            out,
        }),
        Command::Visibility {
            config,
            out,
            analytic,
            seed,
            duration,
        } => commands::visibility(&VisibilityArgs {
            config,
            out,
            analytic,
            seed,
            duration_s: duration,
        }),
        Command::Keyrate {
            pairs,
            visibility,
            f,
            sifting,
        } => commands::keyrate(&KeyRateArgs {
            pairs,
            visibility,
            f,
            sifting,
        }),
        Command::Predict { config } => commands::predict(&PredictArgs { config }),
        Command::Sweep {
            configs,
            out,
            analytic,
        } => commands::sweep(&SweepArgs {
            configs,
            out,
            analytic,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
