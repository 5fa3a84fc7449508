//! Command-line front end: reproducible simulation runs, ellipse and peak
//! fits, and protocol analysis with plot-ready CSV output.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gradiometer::config::{Manifest, RunConfig};
use gradiometer::ellipse::{FitOptions, FitReport};
use gradiometer::error::Error;
use gradiometer::io;
use gradiometer::ledger::{SensitivityLedger, Timescale};
use gradiometer::peaks::{fit_peak, Channel, PeakModel};
use gradiometer::pipeline::{
    allan_deviation, correlate, double_difference, group_and_fit, k_reversal_series, noise_budget,
    pair_configurations, resolve_xi, AllanMode, GroupedEllipse, KReversalPhase, TimeSeries, XiMode,
};
use gradiometer::sim::{simulate_run, ShotRecord};

#[derive(Parser)]
#[command(
    name = "gradiometer",
    version,
    about = "Dual-cloud atom-interferometer gradiometer: simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic shot-record file from a run configuration.
    Simulate(SimulateArgs),
    /// Fit ellipses to points or shot records and print phi per group.
    Fit(FitArgs),
    /// Run protocol analyses over a shot-record file.
    Analyze(AnalyzeArgs),
    /// Project the sensitivity ledger into a ranked noise budget.
    Budget(BudgetArgs),
    /// Fit one detection peak in a fluorescence trace.
    TraceFit(TraceFitArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for shots.csv / shots.jsonl / manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured shot count.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, value_enum, default_value_t = ShotFormat::Csv)]
    format: ShotFormat,
    /// Sensitivity ledger CSV overriding the bundled table.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Also emit fluorescence trace CSVs for the first N shots.
    #[arg(long, default_value_t = 0)]
    traces: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ShotFormat {
    Csv,
    Jsonl,
    Both,
}

#[derive(Args)]
struct FitArgs {
    /// Input: (x, y) points CSV, shot CSV, or shot JSONL.
    input: PathBuf,
    /// Detection-efficiency handling: "fixed:<ratio>" or "estimate[:lo,hi]".
    #[arg(long, default_value = "fixed:1.0")]
    xi: String,
    /// Shots per fitted ellipse; omit to fit all points as one group.
    #[arg(long)]
    group: Option<usize>,
    /// Bootstrap resamples for dphi (0 = linearized covariance).
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    /// Write the full report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report to stdout instead of the per-group summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Shot-record file (CSV or JSONL).
    input: PathBuf,
    /// Shots per fitted ellipse.
    #[arg(long, default_value_t = 72)]
    group: usize,
    /// Detection-efficiency handling: "fixed:<ratio>" or "estimate[:lo,hi]".
    #[arg(long, default_value = "fixed:1.0")]
    xi: String,
    /// Bootstrap resamples for dphi (0 = linearized covariance).
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    /// Output directory for report.json and the plot CSVs.
    #[arg(long)]
    out: PathBuf,
    /// Allan deviation of the grouped phase series.
    #[arg(long)]
    allan: bool,
    /// k-reversal differencing and doubly differential statistics.
    #[arg(long)]
    double_diff: bool,
    /// Pearson correlation of the phase series against every monitor.
    #[arg(long)]
    correlate: bool,
    /// Sensitivity budget from the ledger.
    #[arg(long)]
    budget: bool,
    #[arg(long, value_enum, default_value_t = TimescaleArg::Day)]
    timescale: TimescaleArg,
    /// Sensitivity ledger CSV overriding the bundled table.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long, value_enum, default_value_t = TimescaleArg::Day)]
    timescale: TimescaleArg,
    /// Sensitivity ledger CSV overriding the bundled table.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// RMS overrides as name=value (ledger units); repeatable.
    #[arg(long = "rms")]
    rms: Vec<String>,
    /// Write the budget as CSV here (stdout table otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report to stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TraceFitArgs {
    /// Two-column (time, signal) trace CSV.
    input: PathBuf,
    /// Fit window as "t_lo,t_hi" in seconds.
    #[arg(long)]
    window: String,
    #[arg(long, value_enum, default_value_t = ChannelArg::F1)]
    channel: ChannelArg,
    /// Initial guess "height,center,sigma" overriding the moment guess.
    #[arg(long)]
    init: Option<String>,
    /// Write the fit report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TimescaleArg {
    Te,
    Day,
}

impl From<TimescaleArg> for Timescale {
    fn from(value: TimescaleArg) -> Self {
        match value {
            TimescaleArg::Te => Timescale::Te,
            TimescaleArg::Day => Timescale::Day,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ChannelArg {
    F1,
    F2,
}

fn main() -> ExitCode {
    // Die quietly on closed pipes (e.g. `gradiometer budget | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Budget(args) => cmd_budget(args),
        Command::TraceFit(args) => cmd_trace_fit(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}

/// Stable exit codes: 2 config, 3 I/O, 4 fit failure, 5 insufficient data.
fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::Domain(_) | Error::UnknownParameter(_) => 2,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
        Error::NoConvergence(_)
        | Error::DegenerateWindow { .. }
        | Error::DegenerateConic
        | Error::NotConverged(_)
        | Error::IllConditioned(_)
        | Error::NoMinimumInInterval(_, _)
        | Error::MisalignedTraces(_)
        | Error::TiltOutOfRange(_) => 4,
        Error::TooFewPoints { .. }
        | Error::SeriesTooShort { .. }
        | Error::NoPairs
        | Error::GroupTooSmall { .. }
        | Error::ZeroSignal(_)
        | Error::ConstantSeries(_) => 5,
    }
}

fn load_ledger(path: &Option<PathBuf>) -> Result<SensitivityLedger, Error> {
    match path {
        Some(p) => SensitivityLedger::from_csv_path(p),
        None => Ok(SensitivityLedger::bundled()),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut config = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.noise.seed = seed;
    }
    if let Some(shots) = args.shots {
        config.schedule.n_shots = shots;
    }
    let ledger = load_ledger(&args.ledger)?;
    config.validate(&ledger)?;

    let shots = simulate_run(
        &config.physics,
        &config.noise,
        &config.drift,
        &ledger,
        config.servo.as_ref(),
        &config.schedule,
        &config.injected,
    )?;

    std::fs::create_dir_all(&args.out)?;
    let manifest = Manifest::new(&config);
    if matches!(args.format, ShotFormat::Csv | ShotFormat::Both) {
        let file = io::create_file(&args.out.join("shots.csv"))?;
        io::write_shots_csv(file, &shots, &manifest.config_hash)?;
    }
    if matches!(args.format, ShotFormat::Jsonl | ShotFormat::Both) {
        let file = io::create_file(&args.out.join("shots.jsonl"))?;
        io::write_shots_jsonl(file, &shots, &manifest.config_hash)?;
    }
    io::write_json(io::create_file(&args.out.join("manifest.json"))?, &manifest)?;

    if args.traces > 0 {
        let mut template = config.trace.clone().unwrap_or_default();
        if template.pedestal.is_none() && config.injected.pedestal_fraction > 0.0 {
            template.pedestal = Some(gradiometer::sim::Pedestal {
                fraction: config.injected.pedestal_fraction,
                width_multiplier: 5.0,
            });
        }
        let trace_dir = args.out.join("traces");
        std::fs::create_dir_all(&trace_dir)?;
        for shot in shots.iter().take(args.traces as usize) {
            // One dedicated stream per shot keeps trace noise reproducible
            // independently of how many traces are requested.
            let mut rng = config.noise.rng_for_worker(1_000_000 + shot.index);
            let pair = gradiometer::sim::shot_traces(&shot.areas, &template, &mut rng);
            for (suffix, trace) in [("f1", &pair.f1), ("f2", &pair.f2)] {
                let path = trace_dir.join(format!("shot_{:06}_{suffix}.csv", shot.index));
                io::write_trace_csv(io::create_file(&path)?, trace)?;
            }
        }
    }

    eprintln!(
        "wrote {} shots ({} ellipses per config period) to {}, config {}",
        shots.len(),
        manifest.ellipses_per_config_period,
        args.out.display(),
        &manifest.config_hash[..12]
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct FitOutput {
    input: String,
    input_hash: Option<String>,
    xi: XiMode,
    /// Ratio actually applied (the estimate, in estimate mode).
    xi_used: f64,
    groups: Vec<GroupedEllipse>,
}

fn parse_xi(spec: &str) -> Result<XiMode, Error> {
    if let Some(rest) = spec.strip_prefix("fixed:") {
        let value: f64 = rest
            .parse()
            .map_err(|e| Error::Config(format!("bad xi value {rest:?}: {e}")))?;
        if !(value > 0.0) {
            return Err(Error::Config(format!("xi must be positive, got {value}")));
        }
        return Ok(XiMode::Fixed(value));
    }
    if spec == "estimate" {
        return Ok(XiMode::EstimatePerRun { lo: 0.85, hi: 1.15 });
    }
    if let Some(rest) = spec.strip_prefix("estimate:") {
        if let Some((lo, hi)) = rest.split_once(',') {
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad xi interval: {e}")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad xi interval: {e}")))?;
            return Ok(XiMode::EstimatePerRun { lo, hi });
        }
    }
    Err(Error::Config(format!(
        "xi spec {spec:?} is neither \"fixed:<ratio>\" nor \"estimate[:lo,hi]\""
    )))
}

/// Reads `# config_hash=` (CSV) or the JSONL meta line.
fn read_input_hash(path: &Path) -> Option<String> {
    let file = std::fs::File::open(path).ok()?;
    let first = std::io::BufReader::new(file).lines().next()?.ok()?;
    if let Some(hash) = first.strip_prefix("# config_hash=") {
        return Some(hash.trim().to_string());
    }
    serde_json::from_str::<serde_json::Value>(&first)
        .ok()?
        .get("config_hash")?
        .as_str()
        .map(str::to_string)
}

enum FitInput {
    Points(Vec<(f64, f64)>),
    Shots(Vec<ShotRecord>),
}

fn read_fit_input(path: &Path) -> Result<FitInput, Error> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        return Ok(FitInput::Shots(io::read_shots_jsonl(text.as_bytes())?));
    }
    let header = text
        .lines()
        .find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .unwrap_or("");
    if header.starts_with("index,") {
        Ok(FitInput::Shots(io::read_shots_csv(text.as_bytes())?))
    } else {
        Ok(FitInput::Points(io::read_points_csv(text.as_bytes())?))
    }
}

fn fit_options(bootstrap: usize) -> FitOptions {
    FitOptions {
        bootstrap_resamples: bootstrap,
        ..FitOptions::default()
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), Error> {
    let xi = parse_xi(&args.xi)?;
    let opts = fit_options(args.bootstrap);
    let input_hash = read_input_hash(&args.input);

    let (groups, xi_used): (Vec<GroupedEllipse>, f64) = match read_fit_input(&args.input)? {
        FitInput::Points(points) => {
            match xi {
                XiMode::Fixed(v) if v == 1.0 => {}
                _ => {
                    return Err(Error::Config(
                        "point input is already normalized; only --xi fixed:1.0 applies".into(),
                    ))
                }
            }
            let fit = gradiometer::ellipse::fit_ellipse_with(&points, &opts)?;
            (vec![synthetic_group(fit, points.len())], 1.0)
        }
        FitInput::Shots(shots) => {
            let group_size = args.group.unwrap_or(shots.len());
            let xi_used = resolve_xi(&shots, xi, &opts)?;
            if matches!(xi, XiMode::EstimatePerRun { .. }) {
                println!("estimated xi = {xi_used:.4}");
            }
            (
                group_and_fit(&shots, group_size, XiMode::Fixed(xi_used), &opts)?,
                xi_used,
            )
        }
    };

    for g in &groups {
        println!(
            "{} k={:+} shots {}..{}: phi = {:.6} +/- {:.6} rad (rms {:.2e}{})",
            g.mass_config,
            g.k_sign,
            g.start_index,
            g.end_index,
            g.fit.params.phi,
            g.fit.dphi,
            g.fit.rms,
            if g.fit.converged { "" } else { ", unconverged" }
        );
    }

    let output = FitOutput {
        input: args.input.display().to_string(),
        input_hash,
        xi,
        xi_used,
        groups,
    };
    if args.json {
        io::write_json(std::io::stdout().lock(), &output)?;
    }
    if let Some(path) = &args.out {
        io::write_json(io::create_file(path)?, &output)?;
    }
    Ok(())
}

fn synthetic_group(fit: FitReport, n: usize) -> GroupedEllipse {
    GroupedEllipse {
        mass_config: gradiometer::sim::MassConfig::C1,
        k_sign: 1,
        start_index: 0,
        end_index: n.saturating_sub(1) as u64,
        mid_time: 0.0,
        fit,
    }
}

#[derive(serde::Serialize)]
struct AnalyzeOutput {
    input: String,
    input_hash: Option<String>,
    group_size: usize,
    xi: XiMode,
    xi_used: f64,
    groups: Vec<GroupedEllipse>,
    k_series: Option<Vec<KReversalPhase>>,
    double_difference: Option<gradiometer::pipeline::DoubleDifference>,
    allan: Option<gradiometer::pipeline::AllanResult>,
    correlations: Option<Vec<gradiometer::pipeline::ChannelCorrelation>>,
    budget: Option<gradiometer::pipeline::BudgetReport>,
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let xi = parse_xi(&args.xi)?;
    let opts = fit_options(args.bootstrap);
    let input_hash = read_input_hash(&args.input);
    let shots = match read_fit_input(&args.input)? {
        FitInput::Shots(shots) => shots,
        FitInput::Points(_) => {
            return Err(Error::Config(
                "analyze needs shot records, not bare points".into(),
            ))
        }
    };

    std::fs::create_dir_all(&args.out)?;
    let xi_used = resolve_xi(&shots, xi, &opts)?;
    let groups = group_and_fit(&shots, args.group, XiMode::Fixed(xi_used), &opts)?;

    let mut output = AnalyzeOutput {
        input: args.input.display().to_string(),
        input_hash,
        group_size: args.group,
        xi,
        xi_used,
        groups,
        k_series: None,
        double_difference: None,
        allan: None,
        correlations: None,
        budget: None,
    };

    if args.double_diff {
        let series = k_reversal_series(&output.groups)?;
        let pairs = pair_configurations(&series)?;
        let dd = double_difference(&pairs)?;
        let mut csv = String::from("pair,delta_phi,err\n");
        for (i, p) in dd.points.iter().enumerate() {
            csv.push_str(&format!("{i},{},{}\n", p.phi, p.dphi));
        }
        std::fs::write(args.out.join("double_diff.csv"), csv)?;
        println!(
            "double difference: mean = {:.6e} +/- {:.2e} rad, chi2 = {:.2} (reduced {:.2}, {} pairs)",
            dd.mean,
            dd.err,
            dd.chi2_total,
            dd.chi2_reduced,
            dd.points.len()
        );
        output.k_series = Some(series);
        output.double_difference = Some(dd);
    }

    if args.allan {
        let phis: Vec<f64> = output.groups.iter().map(|g| g.fit.params.phi).collect();
        let times: Vec<f64> = output.groups.iter().map(|g| g.mid_time).collect();
        let dt = median_spacing(&times).ok_or(Error::SeriesTooShort {
            needed: 8,
            got: times.len(),
        })?;
        let allan = allan_deviation(&phis, dt, AllanMode::NonOverlapping)?;
        io::write_allan_csv(io::create_file(&args.out.join("allan.csv"))?, &allan)?;
        if let Some(slope) = allan.log_log_slope() {
            println!("allan: {} bins, log-log slope {slope:.3}", allan.taus.len());
        }
        output.allan = Some(allan);
    }

    if args.correlate {
        let phi_series = TimeSeries::new(
            output.groups.iter().map(|g| g.mid_time).collect(),
            output.groups.iter().map(|g| g.fit.params.phi).collect(),
        );
        let group_span = median_spacing(&phi_series.times).unwrap_or(1.0);
        let channels: Vec<String> = shots
            .first()
            .map(|s| s.monitors.keys().cloned().collect())
            .unwrap_or_default();
        let mut correlations = Vec::new();
        for name in channels {
            let series = TimeSeries::new(
                shots.iter().map(|s| s.time).collect(),
                shots
                    .iter()
                    .map(|s| s.monitors.get(&name).copied().unwrap_or(0.0))
                    .collect(),
            );
            correlations.push(correlate(&name, &phi_series, &series, group_span / 2.0)?);
        }
        let mut csv = String::from("channel,r,stderr,n\n");
        for c in &correlations {
            csv.push_str(&format!("{},{},{},{}\n", c.channel, c.r, c.stderr, c.n));
            println!(
                "correlation {}: r = {:+.3} +/- {:.3}",
                c.channel, c.r, c.stderr
            );
        }
        std::fs::write(args.out.join("correlations.csv"), csv)?;
        output.correlations = Some(correlations);
    }

    if args.budget {
        let ledger = load_ledger(&args.ledger)?;
        let report = noise_budget(&ledger, &BTreeMap::new(), args.timescale.into())?;
        write_budget_csv(&args.out.join("budget.csv"), &report)?;
        output.budget = Some(report);
    }

    io::write_json(io::create_file(&args.out.join("report.json"))?, &output)?;
    eprintln!(
        "analyzed {} shots into {} groups; report in {}",
        shots.len(),
        output.groups.len(),
        args.out.display()
    );
    Ok(())
}

fn median_spacing(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return None;
    }
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    Some(gaps[gaps.len() / 2])
}

fn target_name(target: gradiometer::ledger::Target) -> &'static str {
    match target {
        gradiometer::ledger::Target::MeanPhase => "mean_phase",
        gradiometer::ledger::Target::DiffPhase => "diff_phase",
        gradiometer::ledger::Target::Contrast => "contrast",
        gradiometer::ledger::Target::Bias => "bias",
    }
}

fn kind_name(kind: gradiometer::ledger::Kind) -> &'static str {
    match kind {
        gradiometer::ledger::Kind::Linear => "linear",
        gradiometer::ledger::Kind::Quadratic => "quadratic",
    }
}

fn write_budget_csv(
    path: &Path,
    report: &gradiometer::pipeline::BudgetReport,
) -> Result<(), Error> {
    let mut text = String::from("parameter,target,kind,bound,contribution_rad,rms,unit\n");
    for row in &report.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.parameter,
            target_name(row.target),
            kind_name(row.kind),
            u8::from(row.bound),
            row.contribution,
            row.rms,
            row.unit
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_budget(args: BudgetArgs) -> Result<(), Error> {
    let ledger = load_ledger(&args.ledger)?;
    let mut overrides = BTreeMap::new();
    for spec in &args.rms {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("rms override {spec:?} is not name=value")))?;
        overrides.insert(
            name.to_string(),
            value
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad rms value in {spec:?}: {e}")))?,
        );
    }
    let report = noise_budget(&ledger, &overrides, args.timescale.into())?;

    if args.json {
        io::write_json(std::io::stdout().lock(), &report)?;
    } else {
        println!(
            "noise budget at {} RMS (mean total {:.3e} rad, diff total {:.3e} rad)",
            report.timescale, report.mean_total, report.diff_total
        );
        println!("{:<24} {:<11} {:>13}  note", "parameter", "target", "rad");
        for row in &report.rows {
            println!(
                "{:<24} {:<11} {:>13.3e}  {}{} at rms {} {}",
                row.parameter,
                target_name(row.target),
                row.contribution,
                if row.bound { "bound, " } else { "" },
                kind_name(row.kind),
                row.rms,
                row.unit
            );
        }
    }
    if let Some(path) = &args.out {
        write_budget_csv(path, &report)?;
    }
    Ok(())
}

fn cmd_trace_fit(args: TraceFitArgs) -> Result<(), Error> {
    let window = {
        let (lo, hi) = args
            .window
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("window {:?} is not t_lo,t_hi", args.window)))?;
        let lo: f64 = lo
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("bad window: {e}")))?;
        let hi: f64 = hi
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("bad window: {e}")))?;
        (lo, hi)
    };
    let init = match &args.init {
        None => None,
        Some(spec) => {
            let parts: Vec<&str> = spec.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Config(format!(
                    "init {spec:?} is not height,center,sigma"
                )));
            }
            let mut values = [0.0; 3];
            for (slot, part) in values.iter_mut().zip(&parts) {
                *slot = part
                    .trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("bad init: {e}")))?;
            }
            Some(PeakModel::gaussian(values[0], values[1], values[2]))
        }
    };
    let channel = match args.channel {
        ChannelArg::F1 => Channel::F1,
        ChannelArg::F2 => Channel::F2,
    };
    let file = std::fs::File::open(&args.input)?;
    let trace = io::read_trace_csv(file, channel)?;
    let report = fit_peak(&trace, window, init)?;
    println!(
        "peak: height {:.6e}, center {:.6e} s, sigma {:.6e} s, area {:.6e}, residual rms {:.3e}{}",
        report.model.height,
        report.model.center,
        report.model.sigma,
        report.area(),
        report.residual_rms,
        if report.runs_test_flag {
            " (structured residuals)"
        } else {
            ""
        }
    );
    if let Some(path) = &args.out {
        io::write_json(io::create_file(path)?, &report)?;
    }
    Ok(())
}
