//! Dataset reading: metadata open, pool-backed access, entry loading.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use crate::clusterpool::{ClusterPool, PrefetchHandle, SchedulerConfig};
use crate::error::{Error, Result};
use crate::format::{
    deserialize_footer, deserialize_header, validate_dataset, Footer, PageLocator,
};
use crate::pages::{unpack_page, PagePool, PageRef};
use crate::schema::{read_value, ColumnAccess, ColumnId, FieldId, Schema};
use crate::storage::{
    decompress, CompressionCodec, ContainerSource, FileSource, IoClass, IoStats, MappedRegion,
};
use crate::value::{Fnv64, Value};

use super::{DatasetModel, Entry};

/// Reader tuning: scheduler behavior and the page pool budget.
#[derive(Debug, Clone, Copy)]
pub struct ReaderOptions {
    pub scheduler: SchedulerConfig,
    /// Resident-page budget; least-recently-released pages are evicted.
    pub pool_bytes: usize,
}

impl Default for ReaderOptions {
    fn default() -> Self {
        ReaderOptions { scheduler: SchedulerConfig::default(), pool_bytes: 256 << 20 }
    }
}

struct ScanState {
    /// Columns that cluster loads and prefetches should cover.
    active: BTreeSet<ColumnId>,
    /// Cluster of the most recent access; transitions drive readahead.
    current: Option<u32>,
    entry_columns_registered: bool,
}

/// A reader over one dataset. Confined to one thread at a time (it may be
/// sent between threads); concurrent reading uses one reader per thread.
pub struct DatasetReader {
    source: Arc<FileSource>,
    name: String,
    schema: Arc<Schema>,
    footer: Arc<Footer>,
    pool: Arc<PagePool>,
    clusters: ClusterPool,
    options: ReaderOptions,
    /// Top-level fields an entry holder covers, in model order.
    entry_fields: Vec<FieldId>,
    state: Mutex<ScanState>,
}

impl std::fmt::Debug for DatasetReader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DatasetReader")
            .field("name", &self.name)
            .field("entries", &self.footer.total_entries)
            .field("clusters", &self.footer.clusters.len())
            .finish_non_exhaustive()
    }
}

impl DatasetReader {
    pub fn open(source: &ContainerSource) -> Result<DatasetReader> {
        Self::open_with(source, None, ReaderOptions::default())
    }

    pub fn open_with_options(
        source: &ContainerSource,
        options: ReaderOptions,
    ) -> Result<DatasetReader> {
        Self::open_with(source, None, options)
    }

    /// Opens with an imposed model: every model field is checked against the
    /// on-disk schema and a mismatch is rejected here, not at first access.
    pub fn open_with_model(
        source: &ContainerSource,
        model: &DatasetModel,
    ) -> Result<DatasetReader> {
        Self::open_with(source, Some(model), ReaderOptions::default())
    }

    pub fn open_with(
        source: &ContainerSource,
        model: Option<&DatasetModel>,
        options: ReaderOptions,
    ) -> Result<DatasetReader> {
        let fs = Arc::new(FileSource::open(source)?);
        let envelope = fs.read_envelope()?;
        let header_bytes = fs.read_blob(&envelope.header_locator, IoClass::Foreground)?;
        let header = deserialize_header(&header_bytes)?;
        let footer_bytes = fs.read_blob(&envelope.footer_locator, IoClass::Foreground)?;
        let footer = deserialize_footer(&footer_bytes)?;
        validate_dataset(
            &header.schema,
            &footer,
            fs.region_len(),
            envelope.header_locator,
            envelope.footer_locator,
        )?;
        let entry_fields = match model {
            Some(m) => check_model(m.schema(), &header.schema)?,
            None => header.schema.root().children.clone(),
        };
        let schema = Arc::clone(&header.schema);
        let footer = Arc::new(footer);
        let pool = PagePool::new(options.pool_bytes);
        let clusters = ClusterPool::new(
            Arc::clone(&fs),
            Arc::clone(&schema),
            Arc::clone(&footer),
            Arc::clone(&pool),
            options.scheduler,
        );
        Ok(DatasetReader {
            source: fs,
            name: header.dataset_name,
            schema,
            footer,
            pool,
            clusters,
            options,
            entry_fields,
            state: Mutex::new(ScanState {
                active: BTreeSet::new(),
                current: None,
                entry_columns_registered: false,
            }),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn footer(&self) -> &Footer {
        &self.footer
    }

    pub fn entry_count(&self) -> u64 {
        self.footer.total_entries
    }

    pub fn cluster_count(&self) -> u32 {
        self.footer.clusters.len() as u32
    }

    /// Device traffic so far, split into foreground and background classes.
    pub fn io_stats(&self) -> IoStats {
        self.source.stats()
    }

    pub fn pool(&self) -> &Arc<PagePool> {
        &self.pool
    }

    /// A reusable holder for this reader's model fields, default-valued.
    pub fn create_entry(&self) -> Entry {
        Entry::for_fields(&self.schema, self.entry_fields.clone())
    }

    /// The cluster containing `entry` and the entry's cluster-local index.
    pub(crate) fn locate(&self, entry: u64) -> Result<(u32, u64)> {
        if entry >= self.footer.total_entries {
            return Err(Error::Bounds { index: entry, len: self.footer.total_entries });
        }
        let i = self.footer.clusters.partition_point(|c| c.first_entry <= entry) - 1;
        Ok((i as u32, entry - self.footer.clusters[i].first_entry))
    }

    /// Marks columns as active so cluster loads and prefetches cover them.
    pub(crate) fn register_columns(&self, columns: &[ColumnId]) {
        let mut state = self.state.lock().unwrap();
        state.active.extend(columns.iter().copied());
    }

    /// On a cluster transition, waits for residency of the active columns
    /// and queues readahead for the clusters after it.
    pub(crate) fn touch(&self, cluster: u32) -> Result<()> {
        let active: Vec<ColumnId> = {
            let mut state = self.state.lock().unwrap();
            if state.current == Some(cluster) {
                return Ok(());
            }
            state.current = Some(cluster);
            state.active.iter().copied().collect()
        };
        self.clusters.ensure(cluster, &active)?;
        let last = self.cluster_count().saturating_sub(1);
        let ahead = self.options.scheduler.readahead_clusters as u32;
        let hi = cluster.saturating_add(ahead).min(last);
        for next in cluster + 1..=hi {
            self.clusters.prefetch(next, &active);
        }
        Ok(())
    }

    /// Queues a background load of one cluster's active columns. Create the
    /// views first: the load covers the columns active at this point.
    pub fn prefetch_cluster(&self, cluster: u32) -> Result<PrefetchHandle> {
        if cluster >= self.cluster_count() {
            return Err(Error::Bounds {
                index: cluster as u64,
                len: self.cluster_count() as u64,
            });
        }
        let active: Vec<ColumnId> = {
            let state = self.state.lock().unwrap();
            state.active.iter().copied().collect()
        };
        Ok(self.clusters.prefetch(cluster, &active))
    }

    /// One resident page, read through the pool. A miss is served by a
    /// single-page foreground read, so inactive columns stay cheap.
    pub(crate) fn pin_page(
        &self,
        cluster: u32,
        column: ColumnId,
        element: u64,
    ) -> Result<PageRef> {
        if let Some(hit) = self.pool.acquire(cluster, column, element) {
            return Ok(hit);
        }
        let descriptor = &self.footer.clusters[cluster as usize];
        let col = descriptor
            .column(column)
            .ok_or(Error::Bounds { index: element, len: 0 })?;
        let (first, locator) = col
            .page_covering(element)
            .ok_or(Error::Bounds { index: element, len: col.elements })?;
        let page = fetch_page(&self.source, &self.schema, column, first, locator)?;
        Ok(self.pool.insert_pinned(cluster, page))
    }

    pub(crate) fn access(&self, cluster: u32) -> PoolAccess<'_> {
        PoolAccess { reader: self, cluster }
    }

    /// Populates `entry` with the values of the entry at `index`.
    pub fn load_entry(&self, index: u64, entry: &mut Entry) -> Result<()> {
        let compatible = Arc::ptr_eq(entry.schema(), &self.schema)
            || entry.schema().structurally_equal(&self.schema);
        if !compatible {
            return Err(Error::Usage(
                "entry belongs to a different model; use create_entry()".into(),
            ));
        }
        {
            let mut state = self.state.lock().unwrap();
            if !state.entry_columns_registered {
                for &field in entry.fields() {
                    state.active.extend(self.schema.subtree_columns(field));
                }
                state.entry_columns_registered = true;
            }
        }
        let (cluster, local) = self.locate(index)?;
        self.touch(cluster)?;
        let access = self.access(cluster);
        let fields: Vec<FieldId> = entry.fields().to_vec();
        for (slot, field) in fields.into_iter().enumerate() {
            entry.values_mut()[slot] = read_value(&self.schema, &access, field, local)?;
        }
        Ok(())
    }

    /// All entry indices, ascending.
    pub fn entries(&self) -> EntryRange {
        EntryRange { begin: 0, end: self.footer.total_entries }
    }

    /// A validated half-open index range.
    pub fn entry_range(&self, begin: u64, end: u64) -> Result<EntryRange> {
        if begin > end || end > self.footer.total_entries {
            return Err(Error::Bounds { index: end, len: self.footer.total_entries });
        }
        Ok(EntryRange { begin, end })
    }

    /// Order-sensitive checksum of the named fields over all entries;
    /// identical data yields an identical checksum regardless of stream
    /// count or readahead.
    pub fn checksum_fields(&self, paths: &[&str]) -> Result<u64> {
        let views: Vec<super::DynView<'_>> =
            paths.iter().map(|p| self.dyn_view(p)).collect::<Result<_>>()?;
        let mut hash = Fnv64::new();
        for entry in self.entries() {
            for view in &views {
                view.value(entry)?.hash_into(&mut hash);
            }
        }
        Ok(hash.finish())
    }
}

/// Checks an imposed model against the on-disk schema and returns the
/// on-disk field ids backing the model's top-level fields, in model order.
fn check_model(model: &Schema, disk: &Schema) -> Result<Vec<FieldId>> {
    let mut fields = Vec::new();
    for &field in &model.root().children {
        let name = &model.field(field).name;
        let on_disk = disk.resolve_path(name)?;
        let expected = model.type_text(field);
        let found = disk.type_text(on_disk);
        if expected != found {
            return Err(Error::TypeMismatch { path: name.clone(), expected, found });
        }
        fields.push(on_disk);
    }
    Ok(fields)
}

/// Reads, decompresses, and unpacks one stored page.
pub(crate) fn fetch_page(
    source: &FileSource,
    schema: &Schema,
    column: ColumnId,
    first_element: u64,
    locator: &PageLocator,
) -> Result<crate::pages::Page> {
    let stored = source.read_page(locator, IoClass::Foreground)?;
    let codec = CompressionCodec::from_id(locator.range.codec_id).ok_or(Error::Format {
        offset: locator.range.offset,
        reason: format!("unknown codec id {}", locator.range.codec_id),
    })?;
    let packed = decompress(codec, &stored, locator.range.uncompressed_size as usize)?;
    unpack_page(
        &packed,
        column,
        schema.column(column).physical_type,
        first_element,
        locator.elements as u64,
    )
}

/// Cluster-local element access backed by the page pool.
pub(crate) struct PoolAccess<'r> {
    reader: &'r DatasetReader,
    cluster: u32,
}

impl ColumnAccess for PoolAccess<'_> {
    fn element_count(&self, column: ColumnId) -> u64 {
        self.reader.footer.clusters[self.cluster as usize]
            .column(column)
            .map_or(0, |c| c.elements)
    }

    fn element(&self, column: ColumnId, index: u64) -> Result<Value> {
        let pin = self.reader.pin_page(self.cluster, column, index)?;
        let ty = self.reader.schema.column(column).physical_type;
        Ok(crate::schema::value_from_le(ty, pin.page().element_bytes(index)?))
    }

    fn byte_run(&self, column: ColumnId, start: u64, end: u64) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity((end - start) as usize);
        let mut at = start;
        while at < end {
            let pin = self.reader.pin_page(self.cluster, column, at)?;
            let page = pin.page();
            let page_end = page.first_element + page.elements;
            let hi = end.min(page_end);
            let lo_idx = (at - page.first_element) as usize;
            let hi_idx = (hi - page.first_element) as usize;
            out.extend_from_slice(&page.payload()[lo_idx..hi_idx]);
            at = hi;
        }
        Ok(out)
    }
}

/// A half-open range of entry indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntryRange {
    pub begin: u64,
    pub end: u64,
}

impl EntryRange {
    pub fn len(&self) -> u64 {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }
}

impl IntoIterator for EntryRange {
    type Item = u64;
    type IntoIter = EntryIter;

    fn into_iter(self) -> EntryIter {
        EntryIter(self.begin..self.end)
    }
}

/// Ascending entry indices; yields each exactly once.
pub struct EntryIter(std::ops::Range<u64>);

impl Iterator for EntryIter {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        self.0.next()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.0.size_hint()
    }
}

/// Read-only access through a memory map: values decode directly from the
/// mapped bytes with no page pool, no decompression, and no copies. Only
/// uncompressed datasets qualify; compressed pages report unsupported mode.
pub struct MappedDataset {
    region: MappedRegion,
    name: String,
    schema: Arc<Schema>,
    footer: Footer,
}

impl MappedDataset {
    pub fn open(source: &ContainerSource) -> Result<MappedDataset> {
        let region = MappedRegion::open(source)?;
        let envelope = region.read_envelope()?;
        let header = deserialize_header(region.blob(&envelope.header_locator)?)?;
        let footer = deserialize_footer(region.blob(&envelope.footer_locator)?)?;
        validate_dataset(
            &header.schema,
            &footer,
            region.region_len(),
            envelope.header_locator,
            envelope.footer_locator,
        )?;
        Ok(MappedDataset {
            region,
            name: header.dataset_name,
            schema: header.schema,
            footer,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn entry_count(&self) -> u64 {
        self.footer.total_entries
    }

    pub fn resolve(&self, path: &str) -> Result<FieldId> {
        self.schema.resolve_path(path)
    }

    /// The value of `field` at `entry`, decoded from the mapped bytes.
    pub fn value(&self, field: FieldId, entry: u64) -> Result<Value> {
        if entry >= self.footer.total_entries {
            return Err(Error::Bounds { index: entry, len: self.footer.total_entries });
        }
        let i = self.footer.clusters.partition_point(|c| c.first_entry <= entry) - 1;
        let local = entry - self.footer.clusters[i].first_entry;
        let access = MappedAccess { data: self, cluster: i };
        read_value(&self.schema, &access, field, local)
    }
}

struct MappedAccess<'m> {
    data: &'m MappedDataset,
    cluster: usize,
}

impl MappedAccess<'_> {
    /// Mapped bytes of the page covering `index`, with its first element.
    fn page(&self, column: ColumnId, index: u64) -> Result<(u64, &[u8])> {
        let col = self.data.footer.clusters[self.cluster]
            .column(column)
            .ok_or(Error::Bounds { index, len: 0 })?;
        let (first, locator) = col
            .page_covering(index)
            .ok_or(Error::Bounds { index, len: col.elements })?;
        Ok((first, self.data.region.page_bytes(locator)?))
    }
}

impl ColumnAccess for MappedAccess<'_> {
    fn element_count(&self, column: ColumnId) -> u64 {
        self.data.footer.clusters[self.cluster]
            .column(column)
            .map_or(0, |c| c.elements)
    }

    fn element(&self, column: ColumnId, index: u64) -> Result<Value> {
        let ty = self.data.schema.column(column).physical_type;
        let (first, bytes) = self.page(column, index)?;
        let local = (index - first) as usize;
        Ok(match ty.width_bytes() {
            // Mapped pages keep the packed form; extract the bit in place.
            None => Value::Bool((bytes[local / 8] >> (local % 8)) & 1 != 0),
            Some(w) => crate::schema::value_from_le(ty, &bytes[local * w..(local + 1) * w]),
        })
    }

    fn byte_run(&self, column: ColumnId, start: u64, end: u64) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity((end - start) as usize);
        let mut at = start;
        while at < end {
            let (first, bytes) = self.page(column, at)?;
            let page_end = first + bytes.len() as u64;
            let hi = end.min(page_end);
            out.extend_from_slice(&bytes[(at - first) as usize..(hi - first) as usize]);
            at = hi;
        }
        Ok(out)
    }
}
