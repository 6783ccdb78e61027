use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tabsketch::parallel::DEFAULT_BATCH;
use tabsketch::streamgen::StreamGenerator;
use tabsketch::{
    build_buffered_hetero, eval_accuracy, gen_stream, BuildConfig, BuildStats, CountMinSketch, Counter, DepthMode,
    Distribution, ExactOracle, F2sTrace, HeteroConfig, SketchParams, Strategy, StreamSpec, WidthMode,
};

use crate::error::CliError;
use crate::format::{self, AnySketch, FormatError, STREAM_MAGIC};
use crate::report::{BenchReport, RunShape};

/// Environment variable read when `--threads`/`--tau` is absent.
pub const THREADS_ENV: &str = "TABSKETCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "tabsketch", version, about = "Count-Min Sketch builds, queries and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic stream file.
    Gen(GenArgs),
    /// Build a sketch from a stream file and report timings.
    Build(BuildArgs),
    /// Print frequency estimates from a sketch file.
    Query(QueryArgs),
    /// Compare a sketch against the exact counts of its stream.
    Eval(EvalArgs),
    /// Run a matrix of builds and write one CSV row per configuration.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKind {
    Uniform,
    Zipf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub dist: DistKind,
    /// Zipf exponent.
    #[arg(long, default_value_t = 1.1)]
    pub alpha: f64,
    /// Universe size; items are drawn from 0..n.
    #[arg(long)]
    pub n: u64,
    /// Stream length.
    #[arg(long)]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WidthArg {
    /// ceil(e / eps)
    Ceil,
    /// first prime after 2 / eps
    Prime,
}

impl From<WidthArg> for WidthMode {
    fn from(w: WidthArg) -> Self {
        match w {
            WidthArg::Ceil => WidthMode::CeilEOverEps,
            WidthArg::Prime => WidthMode::PrimeAfterTwoOverEps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Seq,
    Multi,
    NaiveSync,
    NaiveRelaxed,
    Buffered,
    BufferedHetero,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Seq => "seq",
            Mode::Multi => "multi",
            Mode::NaiveSync => "naive-sync",
            Mode::NaiveRelaxed => "naive-relaxed",
            Mode::Buffered => "buffered",
            Mode::BufferedHetero => "buffered-hetero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CounterBits {
    #[value(name = "32")]
    B32,
    #[value(name = "64")]
    B64,
}

/// Sketch dimensioning shared by `build` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct DimArgs {
    #[arg(long, default_value_t = 0.003)]
    pub delta: f64,
    /// Row count; derived from delta when absent.
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long, value_enum, default_value_t = WidthArg::Prime)]
    pub width_mode: WidthArg,
}

impl DimArgs {
    fn params(&self, eps: f64) -> Result<SketchParams, CliError> {
        let depth = self.rows.map_or(DepthMode::CeilLnInvDelta, DepthMode::Explicit);
        Ok(SketchParams::from_error(eps, self.delta, self.width_mode.into(), depth)?)
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[command(flatten)]
    pub dims: DimArgs,
    /// Worker threads [default: $TABSKETCH_THREADS or the available cores].
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BATCH)]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = Mode::Buffered)]
    pub mode: Mode,
    /// Emulated slow-core factor for buffered-hetero builds.
    #[arg(long, default_value_t = 1.0)]
    pub slowdown: f64,
    /// Master seed of the hash tables.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Where to save the sketch.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the report as CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[arg(long, value_enum, default_value_t = CounterBits::B32)]
    pub counter_bits: CounterBits,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("items").required(true).multiple(true))]
pub struct QueryArgs {
    #[arg(long)]
    pub sketch: PathBuf,
    /// Item to estimate; may be repeated.
    #[arg(long, group = "items")]
    pub item: Vec<u32>,
    /// A stream file or whitespace-separated decimal items.
    #[arg(long, group = "items")]
    pub items_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub sketch: PathBuf,
    #[arg(long)]
    pub stream: PathBuf,
    /// Error factor of the bound [default: the sketch's own].
    #[arg(long)]
    pub eps: Option<f64>,
}

/// Stream distribution in a bench matrix: `uniform` or `zipf:<alpha>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistSpec(pub Distribution);

impl FromStr for DistSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "uniform" => Ok(DistSpec(Distribution::Uniform)),
            None if s == "zipf" => Ok(DistSpec(Distribution::Zipf { alpha: 1.1 })),
            Some(("zipf", a)) => a
                .parse()
                .map(|alpha| DistSpec(Distribution::Zipf { alpha }))
                .map_err(|_| format!("bad zipf exponent {a:?}")),
            _ => Err(format!("unknown distribution {s:?}; expected uniform or zipf:<alpha>")),
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-4, 1e-5])]
    pub eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values = ["uniform", "zipf:1.1", "zipf:1.5"])]
    pub dist: Vec<DistSpec>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Mode::Multi, Mode::Buffered])]
    pub mode: Vec<Mode>,
    /// Thread counts [default: $TABSKETCH_THREADS or the available cores].
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Stream length.
    #[arg(long, default_value_t = 1 << 22)]
    pub count: u64,
    /// Universe size.
    #[arg(long, default_value_t = 1 << 20)]
    pub n: u64,
    #[arg(long, default_value_t = DEFAULT_BATCH)]
    pub batch: usize,
    #[command(flatten)]
    pub dims: DimArgs,
    #[arg(long, default_value_t = 1.0)]
    pub slowdown: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also measure accuracy against the exact counts.
    #[arg(long)]
    pub accuracy: bool,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Build(a) => cmd_build(&a, out),
        Command::Query(a) => cmd_query(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    }
}

fn default_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn load_stream(path: &Path) -> Result<Vec<u32>, CliError> {
    format::read_stream(&mut open(path)?).map_err(|e| CliError::reading(path, e))
}

pub fn load_sketch(path: &Path) -> Result<AnySketch, CliError> {
    format::read_sketch(&mut open(path)?).map_err(|e| CliError::reading(path, e))
}

fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let distribution = match a.dist {
        DistKind::Uniform => Distribution::Uniform,
        DistKind::Zipf => Distribution::Zipf { alpha: a.alpha },
    };
    let spec = StreamSpec {
        distribution,
        universe: a.n,
        length: a.count,
        seed: a.seed,
    };
    let items = StreamGenerator::new(&spec)?;
    let mut w = create(&a.out)?;
    format::write_stream_iter(&mut w, a.count, items)
        .and_then(|()| w.flush())
        .map_err(|e| CliError::io(&a.out, e))
}

/// Outcome of one build of any strategy.
struct Built {
    stats: BuildStats,
    tau: usize,
    f2s: Option<F2sTrace>,
}

fn build_with<C: Counter>(
    cms: &mut CountMinSketch<C>,
    items: &[u32],
    mode: Mode,
    threads: usize,
    batch: usize,
    slowdown: f64,
) -> Result<Built, CliError> {
    let strategy = match mode {
        Mode::Seq => Strategy::Sequential,
        Mode::Multi => Strategy::MultiTable,
        Mode::NaiveSync => Strategy::NaiveSync,
        Mode::NaiveRelaxed => Strategy::NaiveRelaxed,
        Mode::Buffered => Strategy::Buffered,
        Mode::BufferedHetero => {
            let pairs = (threads / 2).max(1);
            let config = HeteroConfig::new(pairs, batch).with_slowdown(slowdown);
            let stats = build_buffered_hetero(cms, items, &config)?;
            return Ok(Built {
                stats: stats.build,
                tau: 2 * pairs,
                f2s: Some(stats.trace),
            });
        }
    };
    let tau = if mode == Mode::Seq { 1 } else { threads };
    let stats = BuildConfig::new(strategy, tau).with_batch(batch).build(cms, items)?;
    Ok(Built { stats, tau, f2s: None })
}

fn run_build<C: Counter>(a: &BuildArgs, params: SketchParams, items: &[u32]) -> Result<(AnySketch, Built), CliError>
where
    AnySketch: From<CountMinSketch<C>>,
{
    let threads = a.threads.unwrap_or_else(default_threads);
    let mut cms = CountMinSketch::<C>::new(params, a.seed)?;
    let built = build_with(&mut cms, items, a.mode, threads, a.batch, a.slowdown)?;
    Ok((cms.into(), built))
}

fn cmd_build(a: &BuildArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = a.dims.params(a.eps)?;
    let items = load_stream(&a.input)?;
    let (sketch, built) = match a.counter_bits {
        CounterBits::B32 => run_build::<u32>(a, params, &items)?,
        CounterBits::B64 => run_build::<u64>(a, params, &items)?,
    };
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        sketch.write(&mut w).and_then(|()| w.flush()).map_err(|e| CliError::io(path, e))?;
    }
    let shape = RunShape {
        strategy: a.mode.name().to_string(),
        tau: built.tau,
        batch: a.batch,
        depth: params.depth,
        width: params.width,
        epsilon: params.epsilon,
        delta: params.delta,
        counter_bits: sketch.counter_bits(),
        distribution: None,
        items: items.len() as u64,
        slowdown: (a.mode == Mode::BufferedHetero).then_some(a.slowdown),
    };
    let report = BenchReport::from_runs(shape, &[built.stats], built.f2s, None);
    if a.csv {
        let mut w = csv::Writer::from_writer(out);
        w.serialize(report.csv_row())?;
        w.flush().map_err(CliError::Output)?;
    } else {
        serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| CliError::Output(e.into()))?;
        writeln!(out).map_err(CliError::Output)?;
    }
    Ok(())
}

/// Items of a query file: a stream file, or decimal integers separated by
/// whitespace.
fn read_items_file(path: &Path) -> Result<Vec<u32>, CliError> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| CliError::io(path, e))?;
    if bytes.starts_with(STREAM_MAGIC) {
        return format::read_stream(&mut bytes.as_slice()).map_err(|e| CliError::reading(path, e));
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::reading(path, FormatError::Invalid("neither a stream file nor text".into())))?;
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<u32>()
                .map_err(|_| CliError::reading(path, FormatError::Invalid(format!("{tok:?} is not a 32-bit item"))))
        })
        .collect()
}

fn cmd_query(a: &QueryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let sketch = load_sketch(&a.sketch)?;
    let mut items = a.item.clone();
    if let Some(path) = &a.items_file {
        items.extend(read_items_file(path)?);
    }
    let mut w = BufWriter::new(out);
    for x in items {
        writeln!(w, "{x} {}", sketch.query(x)).map_err(CliError::Output)?;
    }
    w.flush().map_err(CliError::Output)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let sketch = load_sketch(&a.sketch)?;
    let oracle = ExactOracle::from_items(&load_stream(&a.stream)?);
    let eps = a.eps.unwrap_or(sketch.params().epsilon);
    let report = match &sketch {
        AnySketch::U32(s) => eval_accuracy(s, &oracle, eps)?,
        AnySketch::U64(s) => eval_accuracy(s, &oracle, eps)?,
    };
    serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| CliError::Output(e.into()))?;
    writeln!(out).map_err(CliError::Output)
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let taus = if a.tau.is_empty() { vec![default_threads()] } else { a.tau.clone() };
    let sink: Box<dyn Write + '_> = match &a.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(out),
    };
    let mut w = csv::Writer::from_writer(sink);
    for &DistSpec(distribution) in &a.dist {
        let spec = StreamSpec {
            distribution,
            universe: a.n,
            length: a.count,
            seed: a.seed,
        };
        let items = gen_stream(&spec)?;
        let oracle = a.accuracy.then(|| ExactOracle::from_items(&items));
        for &eps in &a.eps {
            let params = a.dims.params(eps)?;
            for &mode in &a.mode {
                for &tau in &taus {
                    let mut runs = Vec::with_capacity(a.repeats);
                    let mut last = None;
                    let mut used_tau = tau;
                    for _ in 0..a.repeats {
                        let mut cms = CountMinSketch::<u32>::new(params, a.seed)?;
                        let built = build_with(&mut cms, &items, mode, tau, a.batch, a.slowdown)?;
                        used_tau = built.tau;
                        runs.push(built.stats);
                        last = Some((cms, built.f2s));
                    }
                    let (cms, f2s) = last.expect("at least one repeat");
                    let accuracy = oracle
                        .as_ref()
                        .map(|o| eval_accuracy(&cms, o, eps))
                        .transpose()?;
                    let shape = RunShape {
                        strategy: mode.name().to_string(),
                        tau: used_tau,
                        batch: a.batch,
                        depth: params.depth,
                        width: params.width,
                        epsilon: params.epsilon,
                        delta: params.delta,
                        counter_bits: 32,
                        distribution: Some(distribution),
                        items: items.len() as u64,
                        slowdown: (mode == Mode::BufferedHetero).then_some(a.slowdown),
                    };
                    let report = BenchReport::from_runs(shape, &runs, f2s, accuracy);
                    w.serialize(report.csv_row())?;
                    w.flush().map_err(CliError::Output)?;
                }
            }
        }
    }
    Ok(())
}
