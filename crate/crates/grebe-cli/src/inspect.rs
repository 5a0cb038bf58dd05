//! `grebe inspect`: metadata report with exact byte accounting.

use std::path::PathBuf;

use clap::Args;
use grebe::error::Result;
use grebe::format::{deserialize_footer, deserialize_header, validate_dataset, ENVELOPE_LEN};
use grebe::storage::{ContainerSource, FileSource, IoClass};

use crate::{write_report, OutputFormat};

#[derive(Args)]
pub struct InspectArgs {
    /// Dataset file.
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

struct ColumnStat {
    path: String,
    role: &'static str,
    physical_type: &'static str,
    pages: u64,
    stored: u64,
    unpacked: u64,
}

struct ClusterStat {
    first_entry: u64,
    entries: u64,
    pages: u64,
    stored: u64,
}

pub fn run(args: InspectArgs) -> Result<()> {
    let source = FileSource::open(&ContainerSource::BareFile(args.file.clone()))?;
    let envelope = source.read_envelope()?;
    let header = deserialize_header(
        &source.read_blob(&envelope.header_locator, IoClass::Foreground)?,
    )?;
    let footer = deserialize_footer(
        &source.read_blob(&envelope.footer_locator, IoClass::Foreground)?,
    )?;
    validate_dataset(
        &header.schema,
        &footer,
        source.region_len(),
        envelope.header_locator,
        envelope.footer_locator,
    )?;
    let schema = &header.schema;

    let mut columns: Vec<ColumnStat> = schema
        .columns()
        .iter()
        .map(|c| ColumnStat {
            path: schema.path_of(c.owner_field),
            role: c.role.name(),
            physical_type: c.physical_type.name(),
            pages: 0,
            stored: 0,
            unpacked: 0,
        })
        .collect();
    let mut clusters: Vec<ClusterStat> = Vec::with_capacity(footer.clusters.len());
    for cluster in &footer.clusters {
        let mut stat = ClusterStat {
            first_entry: cluster.first_entry,
            entries: cluster.entries,
            pages: 0,
            stored: 0,
        };
        for col in &cluster.columns {
            let c = &mut columns[col.column_id as usize];
            for page in &col.pages {
                c.pages += 1;
                c.stored += page.range.compressed_size as u64;
                c.unpacked += page.range.uncompressed_size as u64;
                stat.pages += 1;
                stat.stored += page.range.compressed_size as u64;
            }
        }
        clusters.push(stat);
    }

    let page_stored: u64 = columns.iter().map(|c| c.stored).sum();
    let page_unpacked: u64 = columns.iter().map(|c| c.unpacked).sum();
    let header_bytes = envelope.header_locator.compressed_size as u64;
    let footer_bytes = envelope.footer_locator.compressed_size as u64;
    let accounted = ENVELOPE_LEN as u64 + header_bytes + footer_bytes + page_stored;
    let file_bytes = source.region_len();
    let top_level = schema.root().children.len();

    match args.format {
        OutputFormat::Text => {
            println!("dataset `{}` ({})", header.dataset_name, args.file.display());
            println!(
                "entries {} in {} clusters; {} top-level fields, {} columns",
                footer.total_entries,
                footer.clusters.len(),
                top_level,
                columns.len()
            );
            println!("schema:");
            for &field in &schema.root().children {
                println!("  {}: {}", schema.field(field).name, schema.type_text(field));
            }
            println!("columns:");
            for (id, c) in columns.iter().enumerate() {
                println!(
                    "  [{id}] {} ({} {}): {} pages, {} stored / {} unpacked bytes",
                    c.path, c.role, c.physical_type, c.pages, c.stored, c.unpacked
                );
            }
            println!("clusters:");
            for (i, c) in clusters.iter().enumerate() {
                println!(
                    "  [{i}] entries {}..{}: {} pages, {} stored bytes",
                    c.first_entry,
                    c.first_entry + c.entries,
                    c.pages,
                    c.stored
                );
            }
            println!(
                "bytes: envelope {ENVELOPE_LEN} + header {header_bytes} + footer \
                 {footer_bytes} + pages {page_stored} = {accounted}, file {file_bytes}, \
                 slack {}",
                file_bytes - accounted
            );
        }
        OutputFormat::Metrics => {
            println!("path={}", args.file.display());
            println!("name={}", header.dataset_name);
            println!("entries={}", footer.total_entries);
            println!("clusters={}", footer.clusters.len());
            println!("top_level_fields={top_level}");
            println!("columns={}", columns.len());
            println!("pages={}", columns.iter().map(|c| c.pages).sum::<u64>());
            println!("page_bytes_stored={page_stored}");
            println!("page_bytes_unpacked={page_unpacked}");
            println!("header_bytes={header_bytes}");
            println!("footer_bytes={footer_bytes}");
            println!("envelope_bytes={ENVELOPE_LEN}");
            println!("accounted_bytes={accounted}");
            println!("file_bytes={file_bytes}");
            println!("slack_bytes={}", file_bytes - accounted);
            for (id, c) in columns.iter().enumerate() {
                println!("column.{id}.path={}", c.path);
                println!("column.{id}.role={}", c.role);
                println!("column.{id}.type={}", c.physical_type);
                println!("column.{id}.pages={}", c.pages);
                println!("column.{id}.stored={}", c.stored);
                println!("column.{id}.unpacked={}", c.unpacked);
            }
            for (i, c) in clusters.iter().enumerate() {
                println!("cluster.{i}.first_entry={}", c.first_entry);
                println!("cluster.{i}.entries={}", c.entries);
                println!("cluster.{i}.pages={}", c.pages);
                println!("cluster.{i}.stored={}", c.stored);
            }
        }
    }

    if let Some(path) = &args.report {
        let report = serde_json::json!({
            "path": args.file.display().to_string(),
            "name": header.dataset_name,
            "entries": footer.total_entries,
            "clusters": clusters.iter().map(|c| serde_json::json!({
                "first_entry": c.first_entry,
                "entries": c.entries,
                "pages": c.pages,
                "stored_bytes": c.stored,
            })).collect::<Vec<_>>(),
            "top_level_fields": top_level,
            "columns": columns.iter().enumerate().map(|(id, c)| serde_json::json!({
                "id": id,
                "path": c.path,
                "role": c.role,
                "type": c.physical_type,
                "pages": c.pages,
                "stored_bytes": c.stored,
                "unpacked_bytes": c.unpacked,
            })).collect::<Vec<_>>(),
            "bytes": {
                "envelope": ENVELOPE_LEN,
                "header": header_bytes,
                "footer": footer_bytes,
                "pages_stored": page_stored,
                "pages_unpacked": page_unpacked,
                "accounted": accounted,
                "file": file_bytes,
                "slack": file_bytes - accounted,
            },
        });
        write_report(path, &report)?;
    }
    Ok(())
}
