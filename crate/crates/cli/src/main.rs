//! `csem`: generate, compress, multiply and benchmark sparse constant matrices.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 internal
//! invariant violation.

mod files;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use csem::bench::{run_grid, storage_sweep, ExperimentSpec};
use csem::codec::{encode, storage_report};
use csem::cse::extract;
use csem::kernels::{mm_compressed, mm_csr, mm_dense};
use csem::matrix::{generate_dense, to_csr};
use csem::{CseSet, ExtractConfig, GenSpec, LevelMode, OpStats};
use serde::Serialize;

use files::{load_matrix, load_vector, Loaded};

#[derive(Parser)]
#[command(
    name = "csem",
    version,
    about = "Common-subexpression compression of sparse constant matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a pruned, linearly quantized matrix.
    Generate(GenerateArgs),
    /// Extract common subexpressions from a dense matrix and compress it.
    Extract(ExtractArgs),
    /// Multiply a matrix file by a vector file.
    Multiply(MultiplyArgs),
    /// Run an experiment grid and write a CSV report.
    Bench(BenchArgs),
    /// Dump a matrix file as JSON.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csem,
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kernel {
    Dense,
    Csr,
    Cse,
}

#[derive(clap::Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 500)]
    attempts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop at the first iteration that finds nothing.
    #[arg(long)]
    early_stop: bool,
}

impl SearchArgs {
    fn config(&self) -> ExtractConfig {
        ExtractConfig::new(self.iterations, self.attempts, self.seed)
            .with_early_stop(self.early_stop)
    }
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(short = 'M', long)]
    rows: usize,
    #[arg(short = 'N', long)]
    cols: usize,
    #[arg(long)]
    alpha: f64,
    /// Number of distinct values.
    #[arg(short = 'U', long = "unique")]
    unique: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Count zero as one of the U values (U = 2 gives a 0/1 matrix).
    #[arg(long)]
    zero_level: bool,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csem)]
    format: Format,
}

#[derive(clap::Args)]
struct ExtractArgs {
    input: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csem)]
    format: Format,
}

#[derive(clap::Args)]
struct MultiplyArgs {
    matrix: PathBuf,
    vector: PathBuf,
    #[arg(long, value_enum, default_value_t = Kernel::Cse)]
    kernel: Kernel,
    /// Cross-check the result against the dense kernel.
    #[arg(long)]
    check: bool,
    /// Write the result and counters as JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Matrix shapes, e.g. `100x100,1024x1024`.
    #[arg(long, value_delimiter = ',', default_value = "100x100")]
    dims: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    alpha: Vec<f64>,
    #[arg(
        short = 'U',
        long = "unique",
        value_delimiter = ',',
        default_value = "2"
    )]
    unique: Vec<usize>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long)]
    zero_level: bool,
    /// Emit closed-form storage across the alpha grid instead of running
    /// extraction.
    #[arg(long)]
    sweep: bool,
    /// Leave the timing columns empty so reports are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Run cells one after another instead of on a worker pool.
    #[arg(long)]
    sequential: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(clap::Args)]
struct InspectArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

type Outcome<T> = Result<T, Failure>;

fn usage(err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        err: err.into(),
    }
}

fn data(err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        err: err.into(),
    }
}

fn internal(err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 3,
        err: err.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Multiply(a) => cmd_multiply(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Outcome<()> {
    match path {
        Some(p) => fs::write(p, bytes)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(data),
        None => std::io::stdout().write_all(bytes).map_err(data),
    }
}

fn to_json<T: Serialize>(value: &T) -> Outcome<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(internal)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct Sidecar {
    rows: usize,
    cols: usize,
    alpha: f64,
    unique_values: usize,
    seed: u64,
    mode: LevelMode,
    nnz: usize,
}

fn cmd_generate(a: GenerateArgs) -> Outcome<()> {
    let mode = if a.zero_level {
        LevelMode::ZeroCounted
    } else {
        LevelMode::Nonzero
    };
    let spec = GenSpec::new(a.rows, a.cols, a.alpha, a.unique, a.seed).with_mode(mode);
    spec.validate().map_err(usage)?;
    let m = generate_dense(&spec).map_err(data)?;
    let bytes = match a.format {
        Format::Csem => encode(&m, &CseSet::new(), m.dims())
            .and_then(|c| c.to_bytes())
            .map_err(internal)?,
        Format::Json => to_json(&m)?,
        Format::Csv => return Err(usage(anyhow!("generate writes csem or json"))),
    };
    write_output(Some(&a.output), &bytes)?;

    let sidecar = Sidecar {
        rows: a.rows,
        cols: a.cols,
        alpha: a.alpha,
        unique_values: a.unique,
        seed: a.seed,
        mode,
        nnz: m.nnz(),
    };
    let mut meta = a.output.into_os_string();
    meta.push(".meta.json");
    write_output(Some(Path::new(&meta)), &to_json(&sidecar)?)?;
    println!(
        "wrote {}x{} matrix with {} nonzeros",
        m.rows(),
        m.cols(),
        m.nnz()
    );
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> Outcome<()> {
    let loaded = load_matrix(&a.input).map_err(data)?;
    if let Loaded::Compressed(c) = &loaded {
        if c.n_cse() > 0 {
            return Err(data(anyhow!(
                "{} is already compressed ({} CSE records); extraction runs on dense inputs only",
                a.input.display(),
                c.n_cse()
            )));
        }
    }
    let m = loaded.to_dense().map_err(data)?;
    let cfg = a.search.config();
    cfg.validate().map_err(usage)?;

    let t = Instant::now();
    let (commons, remainder) = extract(&m, &cfg).map_err(internal)?;
    let extract_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let c = encode(&remainder, &commons, m.dims()).map_err(internal)?;
    let encode_s = t.elapsed().as_secs_f64();

    let bytes = match a.format {
        Format::Csem => c.to_bytes().map_err(internal)?,
        Format::Json => to_json(&c)?,
        Format::Csv => return Err(usage(anyhow!("extract writes csem or json"))),
    };
    if let Some(out) = &a.output {
        write_output(Some(out), &bytes)?;
    }

    let e = m.nnz();
    let r = storage_report(&c, e);
    let dense = m.rows() * m.cols();
    println!("rows: {}", m.rows());
    println!("cols: {}", m.cols());
    println!("nnz: {e}");
    println!("gain: {}", r.gain);
    println!("n_cse: {}", r.n_cse);
    println!("adds_before: {e}");
    println!("adds_after: {}", e - r.gain);
    println!("s_total: {}", r.s_total);
    println!("s_csr: {}", r.s_csr);
    println!("ratio_vs_dense: {:.6}", r.s_total as f64 / dense as f64);
    println!("ratio_vs_csr: {:.6}", r.s_total as f64 / r.s_csr as f64);
    println!("extract_seconds: {extract_s:.3}");
    println!("encode_seconds: {encode_s:.3}");
    Ok(())
}

#[derive(Serialize)]
struct Product {
    kernel: &'static str,
    y: Vec<i64>,
    additions: u64,
    multiplications: u64,
}

fn cmd_multiply(a: MultiplyArgs) -> Outcome<()> {
    let loaded = load_matrix(&a.matrix).map_err(data)?;
    let v = load_vector(&a.vector).map_err(data)?;
    let (rows, cols) = loaded.dims();
    if v.len() != cols {
        return Err(data(anyhow!(
            "dimension mismatch: matrix is {rows}x{cols}, vector has {} entries",
            v.len()
        )));
    }
    let (name, (y, ops)): (&'static str, (Vec<i64>, OpStats)) = match a.kernel {
        Kernel::Dense => (
            "dense",
            mm_dense(&loaded.to_dense().map_err(data)?, &v).map_err(data)?,
        ),
        Kernel::Csr => (
            "csr",
            mm_csr(&to_csr(&loaded.to_dense().map_err(data)?), &v).map_err(data)?,
        ),
        Kernel::Cse => match &loaded {
            Loaded::Compressed(c) => ("cse", mm_compressed(c, &v).map_err(data)?),
            Loaded::Dense(_) => {
                return Err(data(anyhow!(
                    "the cse kernel needs a compressed (CSEM) matrix; run `csem extract` first"
                )))
            }
        },
    };

    println!("y: {}", serde_json::to_string(&y).map_err(internal)?);
    println!("additions: {}", ops.additions);
    println!("multiplications: {}", ops.multiplications);
    if a.check {
        let (reference, _) = mm_dense(&loaded.to_dense().map_err(data)?, &v).map_err(data)?;
        if reference == y {
            println!("check: MATCH");
        } else {
            println!("check: MISMATCH");
            return Err(internal(anyhow!(
                "{name} kernel disagrees with the dense kernel"
            )));
        }
    }
    if let Some(out) = &a.output {
        let product = Product {
            kernel: name,
            y,
            additions: ops.additions,
            multiplications: ops.multiplications,
        };
        write_output(Some(out), &to_json(&product)?)?;
    }
    Ok(())
}

fn parse_dims(s: &str) -> anyhow::Result<(usize, usize)> {
    let (m, n) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("dimensions {s:?} must look like 100x100"))?;
    Ok((m.trim().parse()?, n.trim().parse()?))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Outcome<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(internal)?;
    }
    w.into_inner().map_err(|e| internal(anyhow!("{e}")))
}

fn cmd_bench(a: BenchArgs) -> Outcome<()> {
    let dims = a
        .dims
        .iter()
        .map(|d| parse_dims(d))
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(usage)?;
    let bytes = if a.sweep {
        let mut rows = Vec::new();
        for &(m, n) in &dims {
            rows.extend(storage_sweep(m, n, &a.alpha, &a.unique));
        }
        match a.format {
            Format::Json => to_json(&rows)?,
            _ => csv_bytes(&rows)?,
        }
    } else {
        let spec = ExperimentSpec {
            dims,
            alphas: a.alpha.clone(),
            uniques: a.unique.clone(),
            extract: a.search.config(),
            repetitions: a.repetitions,
            mode: if a.zero_level {
                LevelMode::ZeroCounted
            } else {
                LevelMode::Nonzero
            },
        };
        spec.validate().map_err(usage)?;
        let rows = run_grid(&spec, !a.sequential, !a.no_timing).map_err(internal)?;
        for r in rows.iter().filter(|r| !r.error.is_empty()) {
            eprintln!(
                "warning: {}x{} alpha={} U={} rep={}: {}",
                r.rows, r.cols, r.alpha, r.unique, r.rep, r.error
            );
        }
        match a.format {
            Format::Json => to_json(&rows)?,
            _ => csv_bytes(&rows)?,
        }
    };
    write_output(a.output.as_deref(), &bytes)
}

fn cmd_inspect(a: InspectArgs) -> Outcome<()> {
    let bytes = match load_matrix(&a.input).map_err(data)? {
        Loaded::Compressed(c) => to_json(&c)?,
        Loaded::Dense(m) => {
            let c = encode(&m, &CseSet::new(), m.dims()).map_err(internal)?;
            to_json(&c)?
        }
    };
    write_output(a.output.as_deref(), &bytes)
}
