//! Dataset writing: entry shredding, page cuts, cluster commits.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::format::{Header, PhysicalType};
use crate::pages::{pack_page, Page, Truncation};
use crate::schema::{FieldKind, Schema, WriteBuffers};
use crate::storage::{CompressionCodec, ContainerTarget, FileSink};

use super::Entry;

/// Writer tuning: page and cluster cut thresholds, codec, and optional
/// lossy float truncation per field path.
#[derive(Debug, Clone)]
pub struct WriterOptions {
    /// Unpacked payload bytes per page; pages are cut per column when a
    /// buffer reaches the column's element budget.
    pub page_bytes: usize,
    /// Unpacked payload bytes per cluster; checked at entry boundaries.
    pub cluster_bytes: usize,
    pub codec: CompressionCodec,
    /// Float field path to explicit mantissa bits kept; lossy.
    pub truncation: Vec<(String, u8)>,
}

impl Default for WriterOptions {
    fn default() -> Self {
        WriterOptions {
            page_bytes: 64 << 10,
            cluster_bytes: 32 << 20,
            codec: CompressionCodec::Zstd,
            truncation: Vec::new(),
        }
    }
}

/// Totals reported by a successful commit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteSummary {
    pub entries: u64,
    pub clusters: u64,
    /// Length of the written region, envelope through footer.
    pub region_bytes: u64,
}

/// Single-threaded writer: entries in, a sealed dataset out.
///
/// Entries are shredded into per-column buffers; a column's buffer is cut
/// into pages of a fixed element count, so page boundaries depend only on
/// the data and the options and rewriting identical input yields identical
/// bytes. Cluster cuts happen at entry boundaries when the unpacked payload
/// reaches `cluster_bytes`.
pub struct DatasetWriter {
    sink: FileSink,
    schema: Arc<Schema>,
    buffers: WriteBuffers,
    codec: CompressionCodec,
    /// Per column: elements per full page.
    page_elements: Vec<u64>,
    /// Per column: lossy float packing, if configured.
    truncation: Vec<Option<Truncation>>,
    /// Per column: elements already cut into pages this cluster.
    flushed: Vec<u64>,
    /// Unpacked bytes already cut into pages this cluster.
    cluster_payload: u64,
    cluster_target: u64,
    cluster_entries: u64,
    clusters: u64,
    next_entry: u64,
    committed: bool,
}

impl DatasetWriter {
    pub fn create(
        target: &ContainerTarget,
        name: &str,
        schema: Arc<Schema>,
        options: WriterOptions,
    ) -> Result<DatasetWriter> {
        if options.page_bytes == 0 || options.cluster_bytes == 0 {
            return Err(Error::Usage("page and cluster sizes must be positive".into()));
        }
        let page_elements: Vec<u64> = schema
            .columns()
            .iter()
            .map(|c| match c.physical_type.width_bytes() {
                None => (options.page_bytes as u64 * 8).min(u32::MAX as u64),
                Some(w) => (options.page_bytes as u64 / w as u64).clamp(1, u32::MAX as u64),
            })
            .collect();
        let mut truncation: Vec<Option<Truncation>> = vec![None; schema.columns().len()];
        for (path, bits) in &options.truncation {
            let field = schema.resolve_path(path)?;
            if !matches!(schema.field(field).kind, FieldKind::LeafFloat { .. }) {
                return Err(Error::Usage(format!(
                    "truncation applies to float fields, `{path}` is {}",
                    schema.field(field).kind.name()
                )));
            }
            let column = schema.field_columns(field)[0];
            let t = Truncation { mantissa_bits: *bits };
            t.validate(schema.column(column).physical_type)?;
            truncation[column as usize] = Some(t);
        }
        let mut sink = FileSink::create(target)?;
        sink.write_header(&Header {
            dataset_name: name.to_string(),
            schema: Arc::clone(&schema),
        })?;
        let buffers = WriteBuffers::new(&schema);
        let column_count = schema.columns().len();
        Ok(DatasetWriter {
            sink,
            schema,
            buffers,
            codec: options.codec,
            page_elements,
            truncation,
            flushed: vec![0; column_count],
            cluster_payload: 0,
            cluster_target: options.cluster_bytes as u64,
            cluster_entries: 0,
            clusters: 0,
            next_entry: 0,
            committed: false,
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn entries(&self) -> u64 {
        self.next_entry
    }

    /// Appends one entry and returns its zero-based index. All-or-nothing:
    /// a shape error leaves the dataset as if the call never happened.
    pub fn fill(&mut self, entry: &Entry) -> Result<u64> {
        if self.committed {
            return Err(Error::Usage("writer already committed".into()));
        }
        let matches = Arc::ptr_eq(entry.schema(), &self.schema)
            || entry.schema().structurally_equal(&self.schema);
        if !matches || entry.fields().len() != self.schema.root().children.len() {
            return Err(Error::Usage(
                "entry belongs to a different model than this writer".into(),
            ));
        }
        self.buffers.append_entry(&self.schema, entry.values())?;
        let index = self.next_entry;
        self.next_entry += 1;
        self.cluster_entries += 1;
        self.cut_full_pages()?;
        let pending = self.cluster_payload + self.buffers.buffered_bytes() as u64;
        if pending >= self.cluster_target {
            self.flush_cluster()?;
        }
        Ok(index)
    }

    /// Cuts every buffer that holds at least one full page worth of elements.
    fn cut_full_pages(&mut self) -> Result<()> {
        for column in 0..self.schema.columns().len() {
            let budget = self.page_elements[column];
            while self.buffers.columns[column].element_count() >= budget {
                self.cut_page(column as u32, budget)?;
            }
        }
        Ok(())
    }

    /// Drains `elements` from one column buffer into a stored page.
    fn cut_page(&mut self, column: u32, elements: u64) -> Result<()> {
        let ty = self.schema.column(column).physical_type;
        let payload = self.buffers.columns[column as usize].drain_front(elements);
        let page = Page::new(column, ty, self.flushed[column as usize], elements, payload)?;
        let packed = pack_page(&page, self.truncation[column as usize])?;
        self.sink.write_page(column, elements as u32, &packed, self.codec)?;
        self.flushed[column as usize] += elements;
        self.cluster_payload += page_payload_bytes(ty, elements);
        Ok(())
    }

    /// Seals the current cluster, if it holds any entries. Called
    /// automatically by `fill` at the size threshold and by `commit`.
    pub fn flush_cluster(&mut self) -> Result<()> {
        if self.committed {
            return Err(Error::Usage("writer already committed".into()));
        }
        if self.cluster_entries == 0 {
            return Ok(());
        }
        for column in 0..self.schema.columns().len() {
            let remaining = self.buffers.columns[column].element_count();
            if remaining > 0 {
                self.cut_page(column as u32, remaining)?;
            }
        }
        let column_elements: Vec<(u32, u64)> = self
            .flushed
            .iter()
            .enumerate()
            .map(|(c, &n)| (c as u32, n))
            .collect();
        self.sink.commit_cluster(self.cluster_entries, &column_elements)?;
        self.buffers.reset();
        self.flushed.iter_mut().for_each(|n| *n = 0);
        self.cluster_payload = 0;
        self.cluster_entries = 0;
        self.clusters += 1;
        Ok(())
    }

    /// Flushes the final cluster, writes the footer, and seals the file.
    pub fn commit(mut self) -> Result<WriteSummary> {
        self.flush_cluster()?;
        let region_bytes = self.sink.commit_dataset()?;
        self.committed = true;
        Ok(WriteSummary {
            entries: self.next_entry,
            clusters: self.clusters,
            region_bytes,
        })
    }
}

/// Unpacked payload bytes of a page (bools count one byte each in memory).
fn page_payload_bytes(ty: PhysicalType, elements: u64) -> u64 {
    match ty.width_bytes() {
        None => elements,
        Some(w) => elements * w as u64,
    }
}
