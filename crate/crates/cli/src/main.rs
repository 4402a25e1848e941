// SPDX-License-Identifier: MIT OR Apache-2.0

//! `cpp`: run changepoint detectors on series files, generate synthetic
//! series, and benchmark detection delay against false alarms.

mod bench;
mod report;
mod series_io;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use cpp_core::harness::{DetectorKind, ScenarioSpec};
use cpp_core::single_change::DEFAULT_CHANGE_PRIOR;
use cpp_core::{
    datasets, rng, CppConfig, CppDetector, EstimationMode, GlrConfig, GlrDetector, MeanMode, SigmaMode, SingleCpModel,
};
use rand_distr::{Distribution, Normal};

use crate::report::{Engine, Session};
use crate::series_io::Series;

/// Error reported as a usage problem (exit status 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorChoice {
    Cpp,
    Glr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Point estimates of unknown parameters.
    Plugin,
    /// One posterior draw of unknown parameters per evaluation.
    Sample,
}

#[derive(Parser)]
#[command(name = "cpp", version, about = "Bayesian last-changepoint probabilities and a GLR baseline")]
struct Cli {
    /// Random seed.
    #[arg(long, global = true, env = "CPP_SEED", default_value_t = ScenarioSpec::default().seed)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a detector over a series file and report the final posteriors
    /// and the per-step decision statistic.
    Detect(DetectArgs),
    /// Generate a piecewise-Gaussian series and its changepoint truth file.
    Synth(SynthArgs),
    /// Threshold sweeps of delay versus false-alarm probability.
    Bench(BenchArgs),
    /// Report on a saved detector state.
    Inspect {
        state: PathBuf,
    },
    /// Feed more observations to a saved detector state.
    Resume {
        state: PathBuf,
        /// Series file with the new observations (`-` for stdin).
        input: PathBuf,
        /// Where to write the updated state (default: overwrite STATE).
        #[arg(long)]
        save_state: Option<PathBuf>,
    },
    /// Print the bundled Nile flow series (1871-1970).
    Nile,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = DetectorChoice::Cpp)]
    detector: DetectorChoice,
    /// Parameter estimation for unknown means and variances.
    #[arg(long, value_enum, default_value_t = Mode::Sample)]
    mode: Mode,
    /// Let the variance change as well as the mean.
    #[arg(long)]
    variance_change: bool,
    /// Per-step changepoint prior.
    #[arg(long = "f", default_value_t = DEFAULT_CHANGE_PRIOR)]
    change_prior: f64,
    /// Known pre-change mean (estimated when omitted; required for glr).
    #[arg(long, allow_negative_numbers = true)]
    mu0: Option<f64>,
    /// Known noise standard deviation (estimated when omitted; required for glr).
    #[arg(long)]
    sigma: Option<f64>,
    /// Smallest mean change the GLR test considers.
    #[arg(long, default_value_t = cpp_core::glr::DEFAULT_NU_MIN)]
    nu_min: f64,
    /// Alarm threshold [default: 0.9 for cpp, 10 for glr].
    #[arg(long)]
    h: Option<f64>,
    /// Posterior draws averaged per hypothesis (sample mode).
    #[arg(long, default_value_t = 1)]
    draws: usize,
    /// Jacobi sweeps per observation.
    #[arg(long, default_value_t = 1)]
    sweeps: usize,
    /// Keep individual hypotheses only for the most recent positions.
    #[arg(long)]
    window_cap: Option<usize>,
}

impl ModelArgs {
    fn estimation(&self) -> EstimationMode {
        match self.mode {
            Mode::Plugin => EstimationMode::PlugIn,
            Mode::Sample => EstimationMode::PosteriorSample,
        }
    }

    fn cpp_config(&self) -> CppConfig {
        let model = SingleCpModel {
            mu0: self.mu0.map_or(MeanMode::Estimated, MeanMode::Known),
            sigma: self.sigma.map_or(SigmaMode::Estimated, SigmaMode::Known),
            change_prior: self.change_prior,
            estimation: self.estimation(),
            draws: self.draws,
            ..SingleCpModel::default()
        };
        CppConfig {
            jacobi_iterations: self.sweeps,
            variance_change: self.variance_change,
            window_cap: self.window_cap,
            ..CppConfig::new(model)
        }
    }

    fn glr_config(&self, mu0: f64, sigma: f64) -> GlrConfig {
        GlrConfig {
            nu_min: self.nu_min,
            threshold_h: self.h.unwrap_or(GlrConfig::new(mu0, sigma).threshold_h),
            ..GlrConfig::new(mu0, sigma)
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Series file: `value` or `label,value` rows, header optional (`-` for stdin).
    #[arg(required_unless_present = "nile", conflicts_with = "nile")]
    input: Option<PathBuf>,
    /// Use the bundled Nile series instead of a file.
    #[arg(long)]
    nile: bool,
    #[command(flatten)]
    model: ModelArgs,
    /// Write the final detector state here (JSON) for inspect/resume.
    #[arg(long)]
    save_state: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Segment as LENGTH,MU,SIGMA; repeat in time order.
    #[arg(long = "segment", required = true, value_parser = parse_segment, allow_hyphen_values = true)]
    segments: Vec<(usize, f64, f64)>,
    /// Series file to write.
    #[arg(short, long)]
    output: PathBuf,
    /// Truth file listing the changepoints, one index per line
    /// [default: OUTPUT with extension .truth].
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory for the output files.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Only this detector (default: both, plus a comparison file).
    #[arg(long, value_enum)]
    detector: Option<DetectorChoice>,
    #[arg(long, value_enum, default_value_t = Mode::Sample)]
    mode: Mode,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Geometric onset parameter.
    #[arg(long, default_value_t = 0.02)]
    rho: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    mu1: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Steps after onset before a trial counts as out of bounds.
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    /// False-alarm probability for the comparison.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "f", default_value_t = DEFAULT_CHANGE_PRIOR)]
    change_prior: f64,
    #[arg(long, default_value_t = cpp_core::glr::DEFAULT_NU_MIN)]
    nu_min: f64,
    /// Comma-separated threshold grid (requires --detector).
    #[arg(long, value_delimiter = ',', requires = "detector")]
    h: Option<Vec<f64>>,
    /// Sweep these noise levels and write matsig.{csv,json}: sigma,
    /// cpp_delay, glr_delay at --alpha.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["detector", "h"])]
    sigmas: Option<Vec<f64>>,
    /// Worker threads for trials (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_segment(s: &str) -> std::result::Result<(usize, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [len, mu, sigma] = parts[..] else {
        return Err(format!("expected LENGTH,MU,SIGMA, got {s:?}"));
    };
    let len: usize = len.parse().map_err(|_| format!("bad length {len:?}"))?;
    let mu: f64 = mu.parse().map_err(|_| format!("bad mean {mu:?}"))?;
    let sigma: f64 = sigma.parse().map_err(|_| format!("bad sigma {sigma:?}"))?;
    if len == 0 {
        return Err("segment length must be positive".into());
    }
    if !mu.is_finite() || !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(format!("need a finite mean and sigma >= 0, got {s:?}"));
    }
    Ok((len, mu, sigma))
}

fn build_session(model: &ModelArgs, seed: u64) -> Result<Session> {
    Ok(match model.detector {
        DetectorChoice::Cpp => {
            let detector = CppDetector::with_seed(model.cpp_config(), seed)?;
            Session::new(Engine::Cpp(detector), model.h.unwrap_or(0.9))
        }
        DetectorChoice::Glr => {
            let (Some(mu0), Some(sigma)) = (model.mu0, model.sigma) else {
                return Err(Usage("--detector glr needs --mu0 and --sigma".into()).into());
            };
            let config = model.glr_config(mu0, sigma);
            let detector = GlrDetector::new(config)?;
            Session::new(
                Engine::Glr {
                    detector,
                    trace: Vec::new(),
                },
                config.threshold_h,
            )
        }
    })
}

fn print_report(session: &Session, format: Format) -> Result<()> {
    let report = session.report()?;
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    report.write(format, &mut stdout.lock(), &mut stderr.lock())?;
    Ok(())
}

fn save_state(session: &Session, path: &Path) -> Result<()> {
    std::fs::write(path, session.save()?).with_context(|| format!("writing {}", path.display()))
}

fn detect(args: &DetectArgs, seed: u64, format: Format) -> Result<()> {
    let series = if args.nile {
        series_io::parse_series(datasets::NILE_CSV, 1)?
    } else {
        series_io::read_series(args.input.as_deref().expect("clap requires input"))?
    };
    let mut session = build_session(&args.model, seed)?;
    session.feed(&series)?;
    print_report(&session, format)?;
    if let Some(path) = &args.save_state {
        save_state(&session, path)?;
    }
    Ok(())
}

fn synth(args: &SynthArgs, seed: u64) -> Result<()> {
    let mut r = rng::stream(seed);
    let mut values = Vec::new();
    let mut changes = Vec::new();
    for &(len, mu, sigma) in &args.segments {
        if !values.is_empty() {
            changes.push(values.len());
        }
        let dist = Normal::new(mu, sigma).context("segment distribution")?;
        values.extend((0..len).map(|_| dist.sample(&mut r)));
    }
    series_io::write_series(&args.output, &Series::numbered(values, 1))?;
    let truth = args.truth.clone().unwrap_or_else(|| args.output.with_extension("truth"));
    let text: String = changes.iter().map(|c| format!("{c}\n")).collect();
    std::fs::write(&truth, text).with_context(|| format!("writing {}", truth.display()))
}

fn bench(args: &BenchArgs, seed: u64, format: Format) -> Result<()> {
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Usage("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let spec = ScenarioSpec {
        mu0: args.mu0,
        mu1: args.mu1,
        sigma: args.sigma,
        rho: args.rho,
        horizon_after_t0: args.horizon,
        seed,
    };
    let model = ModelArgs {
        detector: DetectorChoice::Cpp,
        mode: args.mode,
        variance_change: false,
        change_prior: args.change_prior,
        mu0: Some(args.mu0),
        sigma: Some(args.sigma),
        nu_min: args.nu_min,
        h: None,
        draws: 1,
        sweeps: 1,
        window_cap: None,
    };
    let cpp = DetectorKind::Cpp(model.cpp_config());
    let glr = DetectorKind::Glr(model.glr_config(args.mu0, args.sigma));
    let detectors = match args.detector {
        None => vec![cpp, glr],
        Some(DetectorChoice::Cpp) => vec![cpp],
        Some(DetectorChoice::Glr) => vec![glr],
    };
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)).into());
    }
    let plan = bench::BenchPlan {
        spec,
        detectors,
        thresholds: args.h.clone(),
        trials: args.trials,
        alpha: args.alpha,
        sigmas: args.sigmas.clone(),
        out_dir: args.out.clone(),
        format,
    };
    let written = bench::run(&plan)?;
    let mut out = std::io::stdout().lock();
    for path in written {
        writeln!(out, "{}", path.display())?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Detect(args) => detect(args, seed, cli.format),
        Command::Synth(args) => synth(args, seed),
        Command::Bench(args) => bench(args, seed, cli.format),
        Command::Inspect { state } => {
            let text = std::fs::read_to_string(state).with_context(|| format!("reading {}", state.display()))?;
            print_report(&Session::load(&text)?, cli.format)
        }
        Command::Resume {
            state,
            input,
            save_state: target,
        } => {
            let text = std::fs::read_to_string(state).with_context(|| format!("reading {}", state.display()))?;
            let mut session = Session::load(&text)?;
            let text = if input.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin())?
            } else {
                std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?
            };
            let more = series_io::parse_series(&text, session.series.values.len() + 1)
                .with_context(|| format!("parsing {}", input.display()))?;
            session.feed(&more)?;
            print_report(&session, cli.format)?;
            save_state(&session, target.as_deref().unwrap_or(state))
        }
        Command::Nile => {
            std::io::stdout().write_all(datasets::NILE_CSV.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.chain().any(|c| c.is::<Usage>()) {
                Cli::command().error(clap::error::ErrorKind::InvalidValue, format!("{e:#}")).exit();
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
