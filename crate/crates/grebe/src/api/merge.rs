//! Fast merge: concatenates datasets by copying cluster byte regions
//! verbatim and rewriting only the metadata. Offsets inside pages are
//! cluster-local, so the payload needs no rewriting; page locators are
//! rebased to where each region lands in the output.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::format::{
    deserialize_footer, deserialize_header, validate_dataset, ClusterDescriptor, ColumnPages,
    Footer, Header,
};
use crate::schema::Schema;
use crate::storage::{ContainerSource, ContainerTarget, FileSink, FileSource, IoClass};

/// Totals reported by a successful merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeSummary {
    pub entries: u64,
    pub clusters: u64,
    pub region_bytes: u64,
}

struct Opened {
    source: FileSource,
    name: String,
    schema: Arc<Schema>,
    footer: Footer,
}

/// Concatenates `inputs` in order into `target`. Requires structurally
/// identical schemas; cluster payloads are copied byte for byte, never
/// re-encoded or re-compressed.
pub fn fast_merge(inputs: &[ContainerSource], target: &ContainerTarget) -> Result<MergeSummary> {
    if inputs.is_empty() {
        return Err(Error::Usage("merge needs at least one input".into()));
    }
    let mut opened = Vec::with_capacity(inputs.len());
    for input in inputs {
        let source = FileSource::open(input)?;
        let envelope = source.read_envelope()?;
        let header =
            deserialize_header(&source.read_blob(&envelope.header_locator, IoClass::Foreground)?)?;
        let footer =
            deserialize_footer(&source.read_blob(&envelope.footer_locator, IoClass::Foreground)?)?;
        validate_dataset(
            &header.schema,
            &footer,
            source.region_len(),
            envelope.header_locator,
            envelope.footer_locator,
        )?;
        opened.push(Opened {
            source,
            name: header.dataset_name,
            schema: header.schema,
            footer,
        });
    }
    let reference = Arc::clone(&opened[0].schema);
    for (i, input) in opened.iter().enumerate().skip(1) {
        if !input.schema.structurally_equal(&reference) {
            let path = reference
                .first_difference(&input.schema)
                .unwrap_or_else(|| "<root>".to_string());
            return Err(Error::Merge {
                path,
                reason: format!("input {i} does not match input 0"),
            });
        }
    }

    let mut sink = FileSink::create(target)?;
    sink.write_header(&Header {
        dataset_name: opened[0].name.clone(),
        schema: Arc::clone(&reference),
    })?;

    let mut next_entry = 0u64;
    let mut clusters = 0u64;
    for input in &opened {
        for cluster in &input.footer.clusters {
            let rebased = copy_cluster(&input.source, cluster, &mut sink, next_entry)?;
            next_entry += rebased.entries;
            clusters += 1;
            sink.push_cluster(rebased)?;
        }
    }
    let region_bytes = sink.commit_dataset()?;
    Ok(MergeSummary { entries: next_entry, clusters, region_bytes })
}

/// Copies one cluster's byte region verbatim and returns its descriptor
/// with locators rebased to the output and the entry range rebased to
/// `first_entry`.
fn copy_cluster(
    source: &FileSource,
    cluster: &ClusterDescriptor,
    sink: &mut FileSink,
    first_entry: u64,
) -> Result<ClusterDescriptor> {
    let mut lo = u64::MAX;
    let mut hi = 0u64;
    for column in &cluster.columns {
        for page in &column.pages {
            lo = lo.min(page.range.offset);
            hi = hi.max(page.range.end());
        }
    }
    let shift = if lo < hi {
        let bytes = source.read_range(lo, (hi - lo) as usize, IoClass::Foreground)?;
        let landed = sink.append_raw(&bytes)?;
        landed as i64 - lo as i64
    } else {
        0 // a cluster with no pages moves no bytes
    };
    let columns = cluster
        .columns
        .iter()
        .map(|column| ColumnPages {
            column_id: column.column_id,
            elements: column.elements,
            pages: column
                .pages
                .iter()
                .map(|page| {
                    let mut moved = *page;
                    moved.range.offset = (moved.range.offset as i64 + shift) as u64;
                    moved
                })
                .collect(),
        })
        .collect();
    Ok(ClusterDescriptor { first_entry, entries: cluster.entries, columns })
}
