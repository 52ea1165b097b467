//! One function per subcommand. Each writes its files and returns the text
//! for stdout.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use entlink::analysis::{
    bbm92_key_rate, measure_scenario, measure_series, power_sweep, write_scan_csv, write_sweep_csv,
    Mode, ScenarioMeasurement, SweepRow,
};
use entlink::model::expected_rates;
use entlink::simkit::{simulate_link, EventStream, SimOptions};
use entlink::tsproc::{
    self, correlation_histogram, displaced_window_rate, find_coincidences, find_offset,
    symmetric_displaced_window_rate, CoincidenceResult, OffsetEstimate,
};
use serde::Serialize;

use crate::config::{resolve_output_dir, ScenarioConfig};
use crate::CliError;

fn to_json(v: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn read_any(path: &Path) -> Result<EventStream, CliError> {
    let csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let r = if csv {
        tsproc::read_stream_csv(path)
    } else {
        tsproc::read_stream(path)
    };
    r.map_err(|e| match e {
        entlink::Error::Io(io) => CliError::Runtime(format!("{}: {io}", path.display())),
        other => other.into(),
    })
}

fn sim_options(cfg: &ScenarioConfig) -> SimOptions {
    SimOptions {
        event_budget: cfg.run.event_budget,
    }
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub csv: bool,
}

/// Runs the Monte Carlo link and writes `idler` and `signal` timestamp files
/// plus `report.json`.
pub fn simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(d) = args.duration_s {
        cfg.run.duration_s = d;
    }
    cfg.validate_run()?;
    let scenario = cfg.scenario()?;
    let run = simulate_link(
        &scenario,
        cfg.run.duration_s,
        cfg.run.seed,
        &sim_options(&cfg),
    )?;
    let dir = cfg.output_dir(args.out.as_deref());
    prepare_dir(&dir)?;
    let ext = if args.csv { "csv" } else { "plnk" };
    for (name, stream) in [("idler", &run.idler), ("signal", &run.signal)] {
        let path = dir.join(format!("{name}.{ext}"));
        let r = if args.csv {
            tsproc::write_stream_csv(stream, &path)
        } else {
            tsproc::write_stream(stream, &path)
        };
        r.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    let json = to_json(&run.report)?;
    write_text(&dir.join("report.json"), &json)?;
    Ok(json)
}

pub struct CoincideArgs {
    pub file_a: PathBuf,
    pub file_b: PathBuf,
    pub window_ns: f64,
    pub offset_ps: i64,
    pub displacement_ns: Option<f64>,
    pub symmetric: bool,
}

#[derive(Debug, Serialize)]
pub struct CoincideOutput {
    pub events_a: usize,
    pub events_b: usize,
    #[serde(flatten)]
    pub result: CoincidenceResult,
    pub accidental_displacement_ns: Option<f64>,
    pub accidental_rate_hz: Option<f64>,
}

pub fn coincide(args: &CoincideArgs) -> Result<String, CliError> {
    let a = read_any(&args.file_a)?;
    let b = read_any(&args.file_b)?;
    let result = find_coincidences(&a, &b, args.window_ns, args.offset_ps)?;
    let accidental = match args.displacement_ns {
        None => None,
        Some(d) if args.symmetric => Some(symmetric_displaced_window_rate(
            &a,
            &b,
            args.window_ns,
            args.offset_ps,
            d,
        )?),
        Some(d) => Some(displaced_window_rate(
            &a,
            &b,
            args.window_ns,
            args.offset_ps,
            d,
        )?),
    };
    to_json(&CoincideOutput {
        events_a: a.len(),
        events_b: b.len(),
        result,
        accidental_displacement_ns: args.displacement_ns,
        accidental_rate_hz: accidental,
    })
}

pub struct ScanDelayArgs {
    pub file_a: PathBuf,
    pub file_b: PathBuf,
    pub span_s: f64,
    pub coarse_bin_ns: f64,
    pub hist_bin_ps: u64,
    pub hist_range_ns: f64,
    pub out: Option<PathBuf>,
}

/// Recovers the delay between two files and writes a histogram around it
/// to `delay_histogram.csv`.
pub fn scan_delay(args: &ScanDelayArgs) -> Result<String, CliError> {
    let a = read_any(&args.file_a)?;
    let b = read_any(&args.file_b)?;
    let est: OffsetEstimate = find_offset(&a, &b, args.span_s, args.coarse_bin_ns)?;
    if !(args.hist_range_ns.is_finite() && args.hist_range_ns > 0.0) {
        return Err(CliError::Config(
            "--hist-range-ns: must be a finite value > 0".into(),
        ));
    }
    let half = (args.hist_range_ns * 1e3).round() as i64;
    let hist = correlation_histogram(&a, &b, args.hist_bin_ps, (-half, half), est.offset_ps)?;
    let dir = resolve_output_dir(args.out.as_deref(), None);
    prepare_dir(&dir)?;
    let path = dir.join("delay_histogram.csv");
    tsproc::write_histogram_csv(&hist, &path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    to_json(&est)
}

pub struct VisibilityArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub analytic: bool,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
}

fn mode_for(cfg: &ScenarioConfig, analytic: bool) -> Result<Mode, CliError> {
    if analytic {
        return Ok(Mode::Analytic);
    }
    cfg.validate_run()?;
    Ok(Mode::Simulated {
        duration_s: cfg.run.duration_s,
        seed: cfg.run.seed,
        options: sim_options(cfg),
    })
}

/// Correlation scan of one scenario: `visibility_scan.csv` with the fringe
/// data and `visibility.json` with the fits.
pub fn visibility(args: &VisibilityArgs) -> Result<String, CliError> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(d) = args.duration_s {
        cfg.run.duration_s = d;
    }
    let scenario = cfg.scenario()?;
    let plan = cfg.scan_plan()?;
    let mode = mode_for(&cfg, args.analytic)?;
    let m: ScenarioMeasurement = measure_scenario(&scenario, &plan, &mode)?;
    let dir = cfg.output_dir(args.out.as_deref());
    prepare_dir(&dir)?;
    let mut w = create(&dir.join("visibility_scan.csv"))?;
    write_scan_csv(&m.points, &mut w)?;
    w.flush()?;
    let json = to_json(&m)?;
    write_text(&dir.join("visibility.json"), &json)?;
    Ok(json)
}

pub struct KeyRateArgs {
    pub pairs: f64,
    pub visibility: f64,
    pub f: f64,
    pub sifting: f64,
}

pub fn keyrate(args: &KeyRateArgs) -> Result<String, CliError> {
    to_json(&bbm92_key_rate(
        args.pairs,
        args.visibility,
        args.f,
        args.sifting,
    )?)
}

pub struct PredictArgs {
    pub config: PathBuf,
}

pub fn predict(args: &PredictArgs) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(&args.config)?;
    to_json(&expected_rates(&cfg.scenario()?)?)
}

pub struct SweepArgs {
    pub configs: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub analytic: bool,
}

#[derive(Debug, Serialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub measurements: Vec<ScenarioMeasurement>,
}

/// Pump-power sweep. With one config the pumps come from
/// `run.sweep_pump_mw`; with several, each config is one row.
pub fn sweep(args: &SweepArgs) -> Result<String, CliError> {
    let cfgs = args
        .configs
        .iter()
        .map(|p| ScenarioConfig::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let first = cfgs
        .first()
        .ok_or_else(|| CliError::Config("no config given".into()))?;
    let plan = first.scan_plan()?;
    let mode = mode_for(first, args.analytic)?;
    let (rows, measurements) = if cfgs.len() == 1 {
        let pumps = first.run.sweep_pump_mw.as_ref().ok_or_else(|| {
            CliError::Config("run.sweep_pump_mw: required when sweeping a single config".into())
        })?;
        if pumps.is_empty() {
            return Err(CliError::Config(
                "run.sweep_pump_mw: must not be empty".into(),
            ));
        }
        let base = first.scenario()?;
        let scenarios: Vec<_> = pumps.iter().map(|&p| base.with_pump(p)).collect();
        power_sweep(&scenarios, &plan, &mode)?
    } else {
        let scenarios = cfgs
            .iter()
            .map(|c| c.scenario())
            .collect::<Result<Vec<_>, _>>()?;
        let m = measure_series(&scenarios, &plan, &mode)?;
        (m.iter().map(SweepRow::from).collect(), m)
    };
    let dir = first.output_dir(args.out.as_deref());
    prepare_dir(&dir)?;
    let mut w = create(&dir.join("sweep.csv"))?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    let json = to_json(&SweepOutput { rows, measurements })?;
    write_text(&dir.join("sweep.json"), &json)?;
    Ok(json)
}
