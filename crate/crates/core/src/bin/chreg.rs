#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use christoffel_dr::dist_reg::{unconditional_model, Dataset, Model};
use christoffel_dr::io::{load_bags, save_bags, DataFormat};
use christoffel_dr::poly_basis::BasisFamily;
use christoffel_dr::report::{
    linspace, run_check, run_eval_grid, run_quad, run_uncond_grid, write_rows, y_grid,
};
use christoffel_dr::synth::{generate, SynthConfig};
use christoffel_dr::Error;

#[derive(Parser)]
#[command(name = "chreg", version, about = "Distribution regression with Christoffel functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset: y ~ U[-1,1], x = y + R * U[-1,1]
    Synth(SynthArgs),
    /// lambda(y|x), lambda(y) and their ratio on a y grid, for each --x
    Eval(EvalArgs),
    /// Outcome nodes, weights and probabilities for each --x
    Quad(QuadArgs),
    /// Unconditional lambda(y) on a y grid
    Uncond(UncondArgs),
    /// Conditioning, overfit ratios and invariant checks
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for DataFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => DataFormat::Jsonl,
            FormatArg::Csv => DataFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Chebyshev,
    Legendre,
    Hermite,
    Laguerre,
}

impl From<BasisArg> for BasisFamily {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Chebyshev => BasisFamily::Chebyshev,
            BasisArg::Legendre => BasisFamily::Legendre,
            BasisArg::Hermite => BasisFamily::Hermite,
            BasisArg::Laguerre => BasisFamily::Laguerre,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long = "M", default_value_t = 10_000)]
    bags: usize,
    #[arg(long = "N", default_value_t = 1_000)]
    bag_size: usize,
    #[arg(long = "R", default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset format; defaults to the output file extension
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    input: PathBuf,
    /// Dataset format; defaults to the input file extension
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u16).range(1..=64))]
    dx: u16,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u16).range(1..=64))]
    dy: u16,
    #[arg(long, value_enum, default_value = "chebyshev")]
    basis: BasisArg,
    /// Relative ridge added to every Gram matrix, as a multiple of trace/d
    #[arg(long)]
    ridge: Option<f64>,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long = "output-format", value_enum, default_value = "csv")]
    output_format: FormatArg,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "x", required = true, allow_negative_numbers = true)]
    xs: Vec<f64>,
    /// Number of grid points spanning the observed outcomes
    #[arg(long, default_value_t = 201)]
    grid: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct QuadArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "x", required = true, allow_negative_numbers = true)]
    xs: Vec<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct UncondArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 201)]
    grid: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// x probes; defaults to the quartiles of the pooled x range
    #[arg(long = "x", allow_negative_numbers = true)]
    xs: Vec<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    })
}

fn load(args: &ModelArgs) -> Result<Dataset, Error> {
    if let Some(r) = args.ridge {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Parse {
                line: 0,
                message: format!("--ridge must be finite and nonnegative, got {r}"),
            });
        }
    }
    let format = args
        .format
        .map_or_else(|| DataFormat::from_path(&args.input), DataFormat::from);
    let bags = load_bags(&args.input, format)?;
    info!("loaded {} bags from {}", bags.len(), args.input.display());
    Dataset::fit(bags, args.basis.into(), args.dx.into(), args.dy.into())
}

/// Runs `f` for every x on its own thread; results keep the order of `xs`.
fn per_x<T: Send>(
    xs: &[f64],
    f: impl Fn(f64) -> Result<Vec<T>, Error> + Sync,
) -> Result<Vec<T>, Error> {
    let parts: Vec<Result<Vec<T>, Error>> = std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = xs.iter().map(|&x| s.spawn(move || f(x))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    for p in parts {
        rows.extend(p?);
    }
    Ok(rows)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Synth(a) => {
            let cfg = SynthConfig::new(a.bags, a.bag_size, a.noise, a.seed);
            cfg.validate().map_err(|message| Error::Parse { line: 0, message })?;
            let bags = generate(&cfg);
            let header = cfg.header();
            match &a.output {
                Some(p) => {
                    let fmt = a.format.map_or_else(|| DataFormat::from_path(p), DataFormat::from);
                    save_bags(p, &bags, fmt, Some(&header))?;
                }
                None => {
                    let fmt = a.format.map_or(DataFormat::Jsonl, DataFormat::from);
                    christoffel_dr::io::write_bags(io::stdout().lock(), &bags, fmt, Some(&header))?;
                }
            }
        }
        Command::Eval(a) => {
            let ds = load(&a.model)?;
            let grid = y_grid(&ds, a.grid);
            let model = Model::build(ds, a.model.ridge)?;
            let unc = model.unconditional()?;
            let rows = per_x(&a.xs, |x| run_eval_grid(&model, &unc, x, &grid))?;
            write_rows(open_output(&a.out.output)?, &rows, matches!(a.out.output_format, FormatArg::Jsonl))?;
        }
        Command::Quad(a) => {
            let ds = load(&a.model)?;
            let model = Model::build(ds, a.model.ridge)?;
            let rows = per_x(&a.xs, |x| run_quad(&model, x))?;
            write_rows(open_output(&a.out.output)?, &rows, matches!(a.out.output_format, FormatArg::Jsonl))?;
        }
        Command::Uncond(a) => {
            let ds = load(&a.model)?;
            let grid = y_grid(&ds, a.grid);
            let unc = match a.model.ridge {
                None => unconditional_model(&ds)?,
                Some(_) => Model::build(ds, a.model.ridge)?.unconditional()?,
            };
            let rows = run_uncond_grid(&unc, &grid);
            write_rows(open_output(&a.out.output)?, &rows, matches!(a.out.output_format, FormatArg::Jsonl))?;
        }
        Command::Check(a) => {
            let ds = load(&a.model)?;
            let probes = if a.xs.is_empty() {
                let pooled: Vec<f64> = ds.bags().iter().flat_map(|b| b.xs.iter().copied()).collect();
                let lo = pooled.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = pooled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                linspace(lo, hi, 5)[1..4].to_vec()
            } else {
                a.xs
            };
            let report = run_check(&ds, &probes, a.model.ridge);
            let mut out = open_output(&a.out.output)?;
            match a.out.output_format {
                FormatArg::Csv => writeln!(out, "{report}")?,
                FormatArg::Jsonl => {
                    serde_json::to_writer(&mut out, &report).map_err(|e| Error::Io(e.to_string()))?;
                    writeln!(out)?;
                }
            }
            if !report.passed() {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
