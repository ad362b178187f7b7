//! Command-line front end. `main.rs` only parses arguments and maps errors
//! to exit codes; everything else lives here so it can be tested.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bounds::{exceedance_curve, BoundMethod, BoundRequest};
use crate::curve::Method;
use crate::elt::{compress_elt, parse_elt, to_compound_model, write_elt, CompoundModel, EventLossTable};
use crate::error::{validation, Error, Result};
use crate::exact::{
    design_sample_size, monte_carlo_curve, panjer_distribution, recommend_sample_size, simulate_annual_losses,
    write_losses, DesignSpec, McConfig, PanjerConfig,
};
use crate::synth::synthetic_elt;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "elt-tail", version, about = "Bounds and estimates for aggregate catastrophe-loss tail probabilities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Round losses to d decimal places and merge equal-loss rows.
    Compress(CompressArgs),
    /// Print a summary of an ELT.
    Inspect(InspectArgs),
    /// Evaluate exceedance curves for a set of methods over a threshold grid.
    Curve(CurveArgs),
    /// Monte Carlo sample-size design table.
    DesignN(DesignArgs),
    /// Write a synthetic ELT.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub d: i32,
    /// Remove rows whose loss rounds to zero.
    #[arg(long)]
    pub drop_zero: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
}

/// Threshold grid `min:max:count`, equally spaced and inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 }).collect()
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, count] = parts.as_slice() else {
            return Err(validation(format!("grid {s:?} is not min:max:count")));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| validation(format!("bad grid value {x:?}")));
        let grid = Grid {
            min: num(min)?,
            max: num(max)?,
            count: count.trim().parse().map_err(|_| validation(format!("bad grid count {count:?}")))?,
        };
        if grid.count < 2 {
            return Err(validation("grid needs at least 2 points"));
        }
        if !(grid.min < grid.max) || grid.min < 0.0 || !grid.max.is_finite() {
            return Err(validation("grid needs 0 <= min < max"));
        }
        Ok(grid)
    }
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(validation("no methods requested"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    pub input: PathBuf,
    /// Horizon in years.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Coefficient of variation for Gamma thickening (0 keeps losses fixed).
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// Maximum loss per event, in currency units.
    #[arg(long)]
    pub cap: Option<f64>,
    /// Compression exponent.
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<i32>,
    /// Threshold grid min:max:count in currency units (default: 101 points
    /// from 0 to the mean plus six standard deviations).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value = "markov,cantelli,moment,chernoff,montecarlo,panjer")]
    pub methods: String,
    #[arg(long, default_value_t = 100_000)]
    pub nsim: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Quantile rows per random-loss event for Panjer.
    #[arg(long, default_value_t = 10)]
    pub nq: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timing_out: Option<PathBuf>,
    /// Also write the simulated losses as replicate,loss CSV.
    #[arg(long)]
    pub dump_losses: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long, default_value_t = 0.005)]
    pub kappa0: f64,
    /// Assumed true probability (default kappa0 / 2).
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long, default_value_t = 0.99)]
    pub beta0: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "1000,10000,100000,1000000")]
    pub n_list: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_elt(path: &Path) -> Result<EventLossTable> {
    parse_elt(BufReader::new(File::open(path)?))
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// A probability rounded to 10 significant digits.
pub fn format_probability(v: f64) -> String {
    if !v.is_finite() {
        return "NA".into();
    }
    let rounded: f64 = format!("{v:.9e}").parse().unwrap_or(v);
    format!("{rounded}")
}

pub fn cmd_compress(args: &CompressArgs) -> Result<()> {
    let elt = read_elt(&args.input)?;
    let mut out = compress_elt(&elt, args.d)?;
    if args.drop_zero {
        out = out.drop_zero_rows()?;
    }
    eprintln!("rows: {} -> {}; loss unit: {}", elt.len(), out.len(), out.loss_unit());
    let mut sink = open_out(args.out.as_deref())?;
    // the file carries no unit column, so losses go out in currency
    write_elt(&out.to_currency()?, &mut sink)?;
    sink.flush()?;
    Ok(())
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let elt = read_elt(&args.input)?;
    let model = to_compound_model(&elt, args.t)?;
    println!("rows: {}", elt.len());
    println!("fixed losses: {}", elt.all_point_mass());
    println!("total rate: {}", elt.total_rate());
    println!("loss unit: {}", elt.loss_unit());
    println!("mean (t = {}): {}", args.t, model.mean() * elt.loss_unit());
    println!("sd (t = {}): {}", args.t, model.variance().sqrt() * elt.loss_unit());
    Ok(())
}

/// Estimates plus optional interval bounds for one method.
pub type CurveValues = (Vec<f64>, Option<(Vec<f64>, Vec<f64>)>);

/// Outcome of one method in [`run_curve`].
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub values: Result<CurveValues>,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct CurveReport {
    pub thresholds: Vec<f64>,
    pub runs: Vec<MethodRun>,
}

impl Clone for Error {
    fn clone(&self) -> Self {
        match self {
            Error::Parse { line, message } => Error::Parse { line: *line, message: message.clone() },
            Error::Validation(m) => Error::Validation(m.clone()),
            Error::Unsupported(m) => Error::Unsupported(m.clone()),
            Error::Domain(m) => Error::Domain(m.clone()),
            Error::Numeric(m) => Error::Numeric(m.clone()),
            Error::Io(e) => Error::Io(io::Error::new(e.kind(), e.to_string())),
        }
    }
}

/// The ELT and model a curve run works on, in stored loss units.
pub struct Prepared {
    pub elt: EventLossTable,
    pub model: CompoundModel,
    /// Compression exponent Panjer uses after quantile expansion.
    pub panjer_d: i32,
}

/// Compresses (fixed losses only), thickens, and caps the table as the
/// run asks, then builds the compound model.
pub fn prepare(elt: EventLossTable, args: &CurveArgs) -> Result<Prepared> {
    if !(args.theta >= 0.0 && args.theta.is_finite()) {
        return Err(validation("theta must be >= 0"));
    }
    let mut elt = elt;
    let mut panjer_d = 0;
    if let Some(d) = args.d {
        panjer_d = d;
        if elt.all_point_mass() {
            elt = compress_elt(&elt, d)?;
        }
    }
    if args.theta > 0.0 {
        elt = elt.thicken(args.theta)?;
    }
    if let Some(u) = args.cap {
        elt = elt.with_cap(u)?;
    }
    let model = to_compound_model(&elt, args.t)?;
    Ok(Prepared { elt, model, panjer_d })
}

fn run_method(method: Method, prep: &Prepared, thresholds: &[f64], args: &CurveArgs) -> MethodRun {
    let start = Instant::now();
    let unit = prep.elt.loss_unit();
    let stored: Vec<f64> = thresholds.iter().map(|s| s / unit).collect();
    let values = (|| -> Result<CurveValues> {
        match method {
            Method::MonteCarlo => {
                let cfg = McConfig::new(args.nsim, args.seed);
                let curve = monte_carlo_curve(&prep.model, &stored, &cfg)?;
                if let Some(path) = &args.dump_losses {
                    let losses = simulate_annual_losses(&prep.model, &cfg)?;
                    let scaled: Vec<f64> = losses.iter().map(|l| l * unit).collect();
                    let mut sink = BufWriter::new(File::create(path)?);
                    write_losses(&scaled, &mut sink)?;
                    sink.flush()?;
                }
                Ok((curve.values, curve.interval))
            }
            Method::Panjer => {
                let s_max_currency = thresholds.iter().copied().fold(0.0, f64::max);
                let panjer_unit = 10f64.powi(-prep.panjer_d);
                let s_max = (s_max_currency / panjer_unit).ceil().max(1.0);
                if s_max > crate::exact::MAX_PANJER_POINTS as f64 {
                    return Err(Error::Numeric(format!(
                        "Panjer needs {s_max} points at d = {}; too fine to be feasible",
                        prep.panjer_d
                    )));
                }
                let cfg = PanjerConfig { n_q: args.nq, s_max: s_max as usize, d: prep.panjer_d };
                let dist = panjer_distribution(&prep.elt, args.t, &cfg)?;
                let values = thresholds.iter().map(|&s| dist.exceedance_at(s)).collect::<Result<_>>()?;
                Ok((values, None))
            }
            bound => {
                let method = BoundMethod::try_from(bound)?;
                let positive: Vec<f64> = stored.iter().copied().filter(|&s| s > 0.0).collect();
                let mut values = vec![1.0; stored.len() - positive.len()];
                if !positive.is_empty() {
                    let req = BoundRequest::new(prep.model.clone(), positive, method)?;
                    values.extend(exceedance_curve(&req)?.values);
                }
                Ok((values, None))
            }
        }
    })();
    MethodRun { method, values, seconds: start.elapsed().as_secs_f64() }
}

/// Parses the input and evaluates every requested method on the grid.
pub fn run_curve(args: &CurveArgs) -> Result<CurveReport> {
    let methods = parse_methods(&args.methods)?;
    if args.t <= 0.0 {
        return Err(validation("horizon must be positive"));
    }
    let prep = prepare(read_elt(&args.input)?, args)?;
    let grid = match &args.grid {
        Some(g) => g.parse::<Grid>()?,
        None => {
            let unit = prep.elt.loss_unit();
            let top = (prep.model.mean() + 6.0 * prep.model.variance().sqrt()) * unit;
            Grid { min: 0.0, max: top.max(unit), count: 101 }
        }
    };
    let thresholds = grid.points();
    let runs = methods.into_iter().map(|m| run_method(m, &prep, &thresholds, args)).collect();
    Ok(CurveReport { thresholds, runs })
}

pub fn write_curve_csv<W: Write>(report: &CurveReport, mut sink: W) -> Result<()> {
    let mut header = vec!["s".to_string()];
    for run in &report.runs {
        header.push(run.method.name().to_string());
        if run.method == Method::MonteCarlo {
            header.push("montecarlo_lo".into());
            header.push("montecarlo_hi".into());
        }
    }
    writeln!(sink, "{}", header.join(","))?;
    for (i, s) in report.thresholds.iter().enumerate() {
        let mut row = vec![format!("{s}")];
        for run in &report.runs {
            match &run.values {
                Ok((values, interval)) => {
                    row.push(format_probability(values[i]));
                    if let Some((lo, hi)) = interval {
                        row.push(format_probability(lo[i]));
                        row.push(format_probability(hi[i]));
                    }
                }
                Err(_) => {
                    row.push("NA".into());
                    if run.method == Method::MonteCarlo {
                        row.push("NA".into());
                        row.push("NA".into());
                    }
                }
            }
        }
        writeln!(sink, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_timing_csv<W: Write>(report: &CurveReport, mut sink: W) -> Result<()> {
    writeln!(sink, "method,seconds")?;
    for run in &report.runs {
        match run.values {
            Ok(_) => writeln!(sink, "{},{:.3}", run.method, run.seconds)?,
            Err(_) => writeln!(sink, "{},NA", run.method)?,
        }
    }
    Ok(())
}

/// Runs the curve command and returns the process exit code.
pub fn cmd_curve(args: &CurveArgs) -> Result<i32> {
    let report = run_curve(args)?;
    let mut sink = open_out(args.out.as_deref())?;
    write_curve_csv(&report, &mut sink)?;
    sink.flush()?;
    match &args.timing_out {
        Some(path) => {
            let mut t = BufWriter::new(File::create(path)?);
            write_timing_csv(&report, &mut t)?;
            t.flush()?;
        }
        None => write_timing_csv(&report, io::stderr())?,
    }
    for run in &report.runs {
        if let Err(e) = &run.values {
            eprintln!("{}: {e}", run.method);
        }
    }
    Ok(if report.runs.iter().any(|r| r.values.is_ok()) { 0 } else { EXIT_NUMERIC })
}

pub fn parse_n_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let p = p.trim();
            p.parse::<u64>()
                .ok()
                .or_else(|| p.parse::<f64>().ok().filter(|v| v.fract() == 0.0 && *v >= 1.0).map(|v| v as u64))
                .ok_or_else(|| validation(format!("bad sample size {p:?}")))
        })
        .collect()
}

pub fn cmd_design_n(args: &DesignArgs) -> Result<()> {
    let spec = DesignSpec {
        kappa0: args.kappa0,
        p0: args.p0.unwrap_or(args.kappa0 / 2.0),
        beta0: args.beta0,
        alpha_level: args.alpha,
    };
    let ns = parse_n_list(&args.n_list)?;
    if ns.is_empty() {
        return Err(validation("no sample sizes given"));
    }
    let table = design_sample_size(&spec, &ns)?;
    let mut sink = open_out(args.out.as_deref())?;
    writeln!(sink, "n,success_probability")?;
    for (n, p) in &table {
        writeln!(sink, "{n},{}", format_probability(*p))?;
    }
    sink.flush()?;
    match recommend_sample_size(&spec, &table) {
        Some(n) => eprintln!("recommended n: {n}"),
        None => eprintln!("no listed n reaches beta0 = {}", spec.beta0),
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let elt = synthetic_elt(args.rows, args.seed)?;
    let mut sink = open_out(args.out.as_deref())?;
    write_elt(&elt, &mut sink)?;
    sink.flush()?;
    Ok(())
}

/// Exit code for an error surfaced by a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) | Error::Domain(_) => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Compress(a) => cmd_compress(&a).map(|_| 0),
        Command::Inspect(a) => cmd_inspect(&a).map(|_| 0),
        Command::Curve(a) => cmd_curve(&a),
        Command::DesignN(a) => cmd_design_n(&a).map(|_| 0),
        Command::Synth(a) => cmd_synth(&a).map(|_| 0),
    }
}
