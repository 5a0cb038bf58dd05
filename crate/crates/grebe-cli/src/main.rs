//! Command-line toolkit over the grebe storage crate: inspect files,
//! generate synthetic samples, merge, export and import canonical text,
//! and run instrumented read benchmarks.
//!
//! Every command exits nonzero on failure after printing a single
//! `error[<class>]: ...` line to stderr, so scripts can branch on the class
//! without parsing prose.

mod bench;
mod inspect;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use grebe::error::{Error, Result};
use grebe::gen::SampleShape;
use grebe::textio;
use grebe::{
    fast_merge, CompressionCodec, ContainerSource, ContainerTarget, DatasetReader, WriterOptions,
};

#[derive(Parser)]
#[command(name = "grebe", version, about = "columnar event store toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print schema, clusters, columns, and exact byte accounting.
    Inspect(inspect::InspectArgs),
    /// Write a synthetic sample dataset (lhcb-like, h1-like, or cms-like).
    Generate(GenerateArgs),
    /// Concatenate datasets, copying cluster byte regions verbatim.
    Merge(MergeArgs),
    /// Export entries as canonical text, one entry per line.
    Export(ExportArgs),
    /// Build a dataset from canonical text.
    Import(ImportArgs),
    /// Read selected columns repeatedly and report instrumented metrics.
    Bench(bench::BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum OutputFormat {
    /// Human-readable report.
    #[default]
    Text,
    /// Only machine-parsable key=value lines.
    Metrics,
}

#[derive(clap::Args)]
struct GenerateArgs {
    /// Sample shape name: lhcb-like, h1-like, or cms-like.
    shape: String,
    /// Output file path.
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Entry-count multiplier; the schema keeps its full width.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[command(flatten)]
    writer: WriterFlags,
}

#[derive(clap::Args)]
struct MergeArgs {
    /// Input files, merged in the order given.
    #[arg(required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Output file path.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ExportArgs {
    /// Dataset file to export.
    file: PathBuf,
    /// Comma-separated top-level field names; all fields when omitted.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ImportArgs {
    /// Text input path, or `-` for stdin.
    input: PathBuf,
    /// Output file path.
    out: PathBuf,
    #[command(flatten)]
    writer: WriterFlags,
}

/// Writer tuning shared by the commands that create dataset files.
#[derive(clap::Args)]
struct WriterFlags {
    /// Compression codec: none, zlib, zstd, lz4, or lzma.
    #[arg(long, default_value = "zstd")]
    codec: String,
    /// Unpacked payload bytes per page.
    #[arg(long, default_value_t = 64 << 10)]
    page_size: usize,
    /// Unpacked payload bytes per cluster.
    #[arg(long, default_value_t = 32 << 20)]
    cluster_size: usize,
}

impl WriterFlags {
    fn options(&self) -> Result<WriterOptions> {
        let codec = CompressionCodec::from_name(&self.codec).ok_or_else(|| {
            Error::Usage(format!(
                "unknown codec `{}` (available: none, zlib, zstd, lz4, lzma)",
                self.codec
            ))
        })?;
        Ok(WriterOptions {
            page_bytes: self.page_size,
            cluster_bytes: self.cluster_size,
            codec,
            truncation: vec![],
        })
    }
}

fn main() {
    reset_sigpipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let first = e.to_string();
            let first = first.lines().find(|l| !l.is_empty()).unwrap_or("invalid invocation");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            std::process::exit(2);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error[{}]: {}", e.class(), error_chain(&e));
        std::process::exit(1);
    }
}

/// Rust spawns with SIGPIPE masked, so writing a report into a closed pipe
/// (`grebe inspect f | head`) would panic mid println. Restore the default
/// disposition and die quietly like any other pipeline tool.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

/// The error plus its causes on one line, outermost first. Displays that
/// restate their class tag are trimmed so `error[usage]:` reads once.
fn error_chain(e: &Error) -> String {
    let mut line = e.to_string();
    for tag in ["usage error: ", "merge error: "] {
        if let Some(rest) = line.strip_prefix(tag) {
            line = rest.to_string();
        }
    }
    let mut cause = std::error::Error::source(e);
    while let Some(c) = cause {
        line.push_str(": ");
        line.push_str(&c.to_string());
        cause = c.source();
    }
    line
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Inspect(args) => inspect::run(args),
        Command::Generate(args) => generate(args),
        Command::Merge(args) => merge(args),
        Command::Export(args) => export(args),
        Command::Import(args) => import(args),
        Command::Bench(args) => bench::run(args),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let shape = SampleShape::preset(&args.shape)?.scaled(args.scale);
    let options = args.writer.options()?;
    let summary = grebe::gen::generate(
        &shape,
        args.seed,
        &ContainerTarget::BareFile(args.out.clone()),
        options,
    )?;
    println!("shape={}", shape.name);
    println!("seed={}", args.seed);
    println!("entries={}", summary.entries);
    println!("clusters={}", summary.clusters);
    println!("file_bytes={}", summary.region_bytes);
    println!("path={}", args.out.display());
    Ok(())
}

fn merge(args: MergeArgs) -> Result<()> {
    let inputs: Vec<ContainerSource> =
        args.inputs.iter().map(|p| ContainerSource::BareFile(p.clone())).collect();
    let summary = fast_merge(&inputs, &ContainerTarget::BareFile(args.out.clone()))?;
    println!("inputs={}", args.inputs.len());
    println!("entries={}", summary.entries);
    println!("clusters={}", summary.clusters);
    println!("file_bytes={}", summary.region_bytes);
    println!("path={}", args.out.display());
    Ok(())
}

fn export(args: ExportArgs) -> Result<()> {
    let reader = DatasetReader::open(&ContainerSource::BareFile(args.file))?;
    let cleaned = args.columns.as_ref().map(|c| clean_columns(c));
    let names: Option<Vec<&str>> =
        cleaned.as_ref().map(|c| c.iter().map(String::as_str).collect());
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::Io { offset: 0, source: e })?;
            let mut out = BufWriter::new(file);
            textio::export(&reader, names.as_deref(), &mut out)?;
            out.flush().map_err(|e| Error::Io { offset: 0, source: e })?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            textio::export(&reader, names.as_deref(), &mut out)?;
            out.flush().map_err(|e| Error::Io { offset: 0, source: e })?;
        }
    }
    Ok(())
}

fn import(args: ImportArgs) -> Result<()> {
    let options = args.writer.options()?;
    let target = ContainerTarget::BareFile(args.out.clone());
    let summary = if args.input.as_os_str() == "-" {
        let stdin = io::stdin();
        textio::import(&mut stdin.lock(), &target, options)?
    } else {
        let file = File::open(&args.input).map_err(|e| Error::Io { offset: 0, source: e })?;
        textio::import(&mut BufReader::new(file), &target, options)?
    };
    println!("entries={}", summary.entries);
    println!("clusters={}", summary.clusters);
    println!("file_bytes={}", summary.region_bytes);
    println!("path={}", args.out.display());
    Ok(())
}

/// Splits `--columns a,b,c` values that clap has already comma-separated,
/// trimming stray whitespace.
fn clean_columns(columns: &[String]) -> Vec<String> {
    columns.iter().map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect()
}

/// Writes a JSON report file when `--report` is given.
fn write_report(path: &PathBuf, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report values are plain JSON");
    std::fs::write(path, text + "\n").map_err(|e| Error::Io { offset: 0, source: e })
}
