//! `grebe bench`: instrumented read benchmark over selected columns.
//!
//! The input is opened read-only; every repetition reports wall time,
//! entries per second, instrumented bytes read, device request count, and
//! an order-sensitive checksum of the decoded values, so runs with
//! different stream counts or readahead can be compared for identity.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use grebe::clusterpool::SchedulerConfig;
use grebe::error::{Error, Result};
use grebe::storage::ContainerSource;
use grebe::{DatasetReader, ReaderOptions};

use crate::{clean_columns, write_report, OutputFormat};

#[derive(Args)]
pub struct BenchArgs {
    /// Dataset file; never written to.
    pub file: PathBuf,
    /// Comma-separated field paths; all top-level fields when omitted.
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// Concurrent request streams.
    #[arg(long, default_value_t = 1)]
    pub streams: usize,
    /// Clusters to prefetch ahead of the scan position.
    #[arg(long, default_value_t = 1)]
    pub readahead: usize,
    /// Coalesce reads across holes up to this many bytes.
    #[arg(long, default_value_t = 16 << 10)]
    pub gap_threshold: u64,
    #[arg(long, default_value_t = 3)]
    pub repetitions: u32,
    /// Re-open the file before every repetition, dropping in-process caches.
    /// Best effort: the OS page cache is out of reach and left alone.
    #[arg(long)]
    pub cold: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
    /// Also write the metrics as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

struct Repetition {
    wall_us: u128,
    entries_per_second: f64,
    bytes_read: u64,
    requests: u64,
    checksum: u64,
}

pub fn run(args: BenchArgs) -> Result<()> {
    if args.repetitions == 0 {
        return Err(Error::Usage("repetitions must be at least 1".into()));
    }
    let source = ContainerSource::BareFile(args.file.clone());
    let options = ReaderOptions {
        scheduler: SchedulerConfig {
            gap_threshold: args.gap_threshold,
            stream_count: args.streams.max(1),
            readahead_clusters: args.readahead,
            ..SchedulerConfig::default()
        },
        ..ReaderOptions::default()
    };
    let mut reader = DatasetReader::open_with_options(&source, options)?;
    let paths: Vec<String> = match &args.columns {
        Some(c) => clean_columns(c),
        None => {
            let schema = reader.schema();
            schema.root().children.iter().map(|&f| schema.field(f).name.clone()).collect()
        }
    };
    // Resolve up front so an unknown column fails before anything is timed.
    for path in &paths {
        reader.schema().resolve_path(path)?;
    }
    let entries = reader.entry_count();

    let mut reps: Vec<Repetition> = Vec::with_capacity(args.repetitions as usize);
    for rep in 0..args.repetitions {
        if args.cold && rep > 0 {
            reader = DatasetReader::open_with_options(&source, options)?;
        }
        let refs: Vec<&str> = paths.iter().map(String::as_str).collect();
        let before = reader.io_stats();
        let start = Instant::now();
        let checksum = reader.checksum_fields(&refs)?;
        let wall = start.elapsed();
        let after = reader.io_stats();
        reps.push(Repetition {
            wall_us: wall.as_micros(),
            entries_per_second: entries as f64 / wall.as_secs_f64().max(1e-9),
            bytes_read: after.bytes_read() - before.bytes_read(),
            requests: after.requests() - before.requests(),
            checksum,
        });
    }
    let best = reps.iter().map(|r| r.entries_per_second).fold(0.0f64, f64::max);
    let mode = if args.cold { "cold" } else { "warm" };

    match args.format {
        OutputFormat::Text => {
            println!(
                "bench {} ({entries} entries, {} columns, streams {}, readahead {}, \
                 gap threshold {}, {mode})",
                args.file.display(),
                paths.len(),
                args.streams,
                args.readahead,
                args.gap_threshold
            );
            for (i, r) in reps.iter().enumerate() {
                println!(
                    "  rep {i}: {:.3} ms, {:.0} entries/s, {} bytes in {} requests, \
                     checksum {:#018x}",
                    r.wall_us as f64 / 1e3,
                    r.entries_per_second,
                    r.bytes_read,
                    r.requests,
                    r.checksum
                );
            }
            println!("  best: {best:.0} entries/s");
        }
        OutputFormat::Metrics => {
            println!("file={}", args.file.display());
            println!("entries={entries}");
            println!("columns={}", paths.join(","));
            println!("streams={}", args.streams);
            println!("readahead={}", args.readahead);
            println!("gap_threshold={}", args.gap_threshold);
            println!("repetitions={}", args.repetitions);
            println!("mode={mode}");
            for (i, r) in reps.iter().enumerate() {
                println!("rep.{i}.wall_us={}", r.wall_us);
                println!("rep.{i}.entries_per_second={:.1}", r.entries_per_second);
                println!("rep.{i}.bytes_read={}", r.bytes_read);
                println!("rep.{i}.requests={}", r.requests);
                println!("rep.{i}.checksum={:#018x}", r.checksum);
            }
            println!("best_entries_per_second={best:.1}");
        }
    }

    if let Some(path) = &args.report {
        let report = serde_json::json!({
            "file": args.file.display().to_string(),
            "entries": entries,
            "columns": paths,
            "streams": args.streams,
            "readahead": args.readahead,
            "gap_threshold": args.gap_threshold,
            "mode": mode,
            "repetitions": reps.iter().map(|r| serde_json::json!({
                "wall_us": r.wall_us as u64,
                "entries_per_second": r.entries_per_second,
                "bytes_read": r.bytes_read,
                "requests": r.requests,
                "checksum": format!("{:#018x}", r.checksum),
            })).collect::<Vec<_>>(),
            "best_entries_per_second": best,
        });
        write_report(path, &report)?;
    }
    Ok(())
}
