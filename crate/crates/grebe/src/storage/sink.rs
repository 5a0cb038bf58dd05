//! Physical write path.
//!
//! A sink owns one dataset region: envelope placeholder first, then the
//! header, then page data cluster by cluster, then the footer, and finally
//! the envelope is patched with the real header and footer locators. Every
//! stored offset is region-relative, so a region written into the middle of
//! a host file is byte-identical to one written standalone.

use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::format::{
    serialize_footer, serialize_header, ByteRange, ClusterDescriptor, ColumnPages, FileEnvelope,
    Footer, Header, PageLocator, ENVELOPE_LEN, FORMAT_VERSION,
};
use crate::storage::codec::{compress, CompressionCodec};

/// Where a dataset region is written.
#[derive(Debug, Clone)]
pub enum ContainerTarget {
    /// The region is the whole file, created or truncated.
    BareFile(PathBuf),
    /// The region is appended at the current end of an existing host file.
    Embedded(PathBuf),
}

impl ContainerTarget {
    pub fn path(&self) -> &PathBuf {
        match self {
            ContainerTarget::BareFile(p) | ContainerTarget::Embedded(p) => p,
        }
    }
}

/// Pages of the cluster being accumulated, grouped per column.
#[derive(Debug, Default)]
struct ClusterAccum {
    columns: Vec<(u32, Vec<PageLocator>)>,
}

impl ClusterAccum {
    fn push(&mut self, column_id: u32, locator: PageLocator) {
        match self.columns.iter_mut().find(|(id, _)| *id == column_id) {
            Some((_, pages)) => pages.push(locator),
            None => self.columns.push((column_id, vec![locator])),
        }
    }
}

pub struct FileSink {
    file: File,
    region_offset: u64,
    /// Region-relative position of the next write.
    pos: u64,
    header_loc: Option<ByteRange>,
    accum: ClusterAccum,
    clusters: Vec<ClusterDescriptor>,
    entries_committed: u64,
    finished: bool,
}

impl FileSink {
    pub fn create(target: &ContainerTarget) -> Result<Self> {
        let (file, region_offset) = match target {
            ContainerTarget::BareFile(path) => {
                let file = File::create(path).map_err(|e| Error::io_at(0, e))?;
                (file, 0)
            }
            ContainerTarget::Embedded(path) => {
                let file = OpenOptions::new()
                    .read(true)
                    .write(true)
                    .open(path)
                    .map_err(|e| Error::io_at(0, e))?;
                let len = file.metadata().map_err(|e| Error::io_at(0, e))?.len();
                (file, len)
            }
        };
        let mut sink = FileSink {
            file,
            region_offset,
            pos: 0,
            header_loc: None,
            accum: ClusterAccum::default(),
            clusters: Vec::new(),
            entries_committed: 0,
            finished: false,
        };
        // Placeholder; patched with real locators on finish.
        sink.append_raw(&[0u8; ENVELOPE_LEN])?;
        Ok(sink)
    }

    pub fn region_offset(&self) -> u64 {
        self.region_offset
    }

    /// Region-relative position of the next byte to be written.
    pub fn position(&self) -> u64 {
        self.pos
    }

    pub(crate) fn append_raw(&mut self, bytes: &[u8]) -> Result<u64> {
        if self.finished {
            return Err(Error::Usage("sink already committed".into()));
        }
        let at = self.pos;
        self.file
            .write_all_at(bytes, self.region_offset + at)
            .map_err(|e| Error::io_at(self.region_offset + at, e))?;
        self.pos += bytes.len() as u64;
        Ok(at)
    }

    /// Writes the header record. Must be the first write after creation.
    pub fn write_header(&mut self, header: &Header) -> Result<()> {
        if self.pos != ENVELOPE_LEN as u64 {
            return Err(Error::Usage(
                "header must be written before any page".into(),
            ));
        }
        let bytes = serialize_header(header);
        let offset = self.append_raw(&bytes)?;
        self.header_loc = Some(ByteRange {
            offset,
            compressed_size: bytes.len() as u32,
            uncompressed_size: bytes.len() as u32,
            codec_id: 0,
        });
        Ok(())
    }

    /// Compresses and writes one packed page, falling back to stored form
    /// when compression does not shrink it. Returns where it landed.
    pub fn write_page(
        &mut self,
        column_id: u32,
        elements: u32,
        packed: &[u8],
        codec: CompressionCodec,
    ) -> Result<PageLocator> {
        if self.header_loc.is_none() {
            return Err(Error::Usage("header must be written before pages".into()));
        }
        if elements == 0 || packed.is_empty() {
            return Err(Error::Usage("a page must hold at least one element".into()));
        }
        let compressed = compress(codec, packed)?;
        let (stored, codec_id) = if codec == CompressionCodec::None || compressed.len() >= packed.len()
        {
            (packed, CompressionCodec::None.id())
        } else {
            (compressed.as_slice(), codec.id())
        };
        let offset = self.append_raw(stored)?;
        let locator = PageLocator {
            range: ByteRange {
                offset,
                compressed_size: stored.len() as u32,
                uncompressed_size: packed.len() as u32,
                codec_id,
            },
            elements,
        };
        self.accum.push(column_id, locator);
        Ok(locator)
    }

    /// Seals the accumulated pages into a cluster. `column_elements` declares
    /// the element count per column and must match the page sums.
    pub fn commit_cluster(
        &mut self,
        entries: u64,
        column_elements: &[(u32, u64)],
    ) -> Result<&ClusterDescriptor> {
        if entries == 0 {
            return Err(Error::Usage("a cluster must hold at least one entry".into()));
        }
        let accum = std::mem::take(&mut self.accum);
        let mut columns = Vec::with_capacity(accum.columns.len());
        for (column_id, pages) in accum.columns {
            let declared = column_elements
                .iter()
                .find(|(id, _)| *id == column_id)
                .map(|(_, n)| *n)
                .ok_or_else(|| {
                    Error::Usage(format!("column {column_id} has pages but no declared count"))
                })?;
            let sum: u64 = pages.iter().map(|p| p.elements as u64).sum();
            if sum != declared {
                return Err(Error::Usage(format!(
                    "column {column_id} pages hold {sum} elements, {declared} declared"
                )));
            }
            columns.push(ColumnPages { column_id, elements: declared, pages });
        }
        for (column_id, declared) in column_elements {
            if *declared > 0 && !columns.iter().any(|c| c.column_id == *column_id) {
                return Err(Error::Usage(format!(
                    "column {column_id} declares {declared} elements but wrote no pages"
                )));
            }
            if *declared == 0 {
                columns.push(ColumnPages { column_id: *column_id, elements: 0, pages: vec![] });
            }
        }
        columns.sort_by_key(|c| c.column_id);
        let descriptor = ClusterDescriptor {
            first_entry: self.entries_committed,
            entries,
            columns,
        };
        self.entries_committed += entries;
        self.clusters.push(descriptor);
        Ok(self.clusters.last().unwrap())
    }

    /// Registers a cluster whose pages were appended verbatim via
    /// `append_raw`; used by merge.
    pub(crate) fn push_cluster(&mut self, descriptor: ClusterDescriptor) -> Result<()> {
        if descriptor.first_entry != self.entries_committed {
            return Err(Error::Merge {
                path: String::new(),
                reason: format!(
                    "cluster starts at entry {}, {} already committed",
                    descriptor.first_entry, self.entries_committed
                ),
            });
        }
        self.entries_committed += descriptor.entries;
        self.clusters.push(descriptor);
        Ok(())
    }

    /// Writes the footer, patches the envelope, and seals the sink.
    /// Returns the region length in bytes.
    pub fn commit_dataset(&mut self) -> Result<u64> {
        if self.finished {
            return Err(Error::Usage("sink already committed".into()));
        }
        let header_loc = self
            .header_loc
            .ok_or_else(|| Error::Usage("cannot commit a dataset without a header".into()))?;
        if !self.accum.columns.is_empty() {
            return Err(Error::Usage(
                "pages were written after the last cluster commit".into(),
            ));
        }
        let footer = Footer {
            total_entries: self.entries_committed,
            clusters: std::mem::take(&mut self.clusters),
        };
        let bytes = serialize_footer(&footer)?;
        let offset = self.append_raw(&bytes)?;
        let footer_loc = ByteRange {
            offset,
            compressed_size: bytes.len() as u32,
            uncompressed_size: bytes.len() as u32,
            codec_id: 0,
        };
        let envelope = FileEnvelope {
            format_version: FORMAT_VERSION,
            feature_flags: 0,
            header_locator: header_loc,
            footer_locator: footer_loc,
        };
        self.file
            .write_all_at(&envelope.encode(), self.region_offset)
            .map_err(|e| Error::io_at(self.region_offset, e))?;
        self.file.sync_data().map_err(|e| Error::io_at(self.region_offset, e))?;
        self.finished = true;
        Ok(self.pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FieldDef, Schema};

    fn header() -> Header {
        Header {
            dataset_name: "t".into(),
            schema: Schema::from_fields(vec![FieldDef::int32("x")]).unwrap(),
        }
    }

    #[test]
    fn pages_before_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let target = ContainerTarget::BareFile(dir.path().join("a.grb"));
        let mut sink = FileSink::create(&target).unwrap();
        let err = sink
            .write_page(0, 1, &[1, 0, 0, 0], CompressionCodec::None)
            .unwrap_err();
        assert_eq!(err.class(), "usage");
    }

    #[test]
    fn incompressible_page_stored_raw() {
        let dir = tempfile::tempdir().unwrap();
        let target = ContainerTarget::BareFile(dir.path().join("a.grb"));
        let mut sink = FileSink::create(&target).unwrap();
        sink.write_header(&header()).unwrap();
        // High-entropy bytes: deflate cannot shrink 4 bytes.
        let loc = sink
            .write_page(0, 1, &[0xa7, 0x31, 0xc4, 0x09], CompressionCodec::Zlib)
            .unwrap();
        assert_eq!(loc.range.codec_id, 0);
        assert_eq!(loc.range.compressed_size, 4);
        assert_eq!(loc.range.uncompressed_size, 4);
    }

    #[test]
    fn cluster_commit_checks_element_sums() {
        let dir = tempfile::tempdir().unwrap();
        let target = ContainerTarget::BareFile(dir.path().join("a.grb"));
        let mut sink = FileSink::create(&target).unwrap();
        sink.write_header(&header()).unwrap();
        sink.write_page(0, 3, &[0; 12], CompressionCodec::None).unwrap();
        let err = sink.commit_cluster(3, &[(0, 4)]).unwrap_err();
        assert!(err.to_string().contains("3 elements, 4 declared"));
    }

    #[test]
    fn double_commit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let target = ContainerTarget::BareFile(dir.path().join("a.grb"));
        let mut sink = FileSink::create(&target).unwrap();
        sink.write_header(&header()).unwrap();
        sink.commit_dataset().unwrap();
        let err = sink.commit_dataset().unwrap_err();
        assert_eq!(err.class(), "usage");
    }

    #[test]
    fn bare_and_embedded_regions_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let bare_path = dir.path().join("bare.grb");
        let host_path = dir.path().join("host.bin");

        let write_into = |target: &ContainerTarget| {
            let mut sink = FileSink::create(target).unwrap();
            sink.write_header(&header()).unwrap();
            sink.write_page(0, 2, &[1, 0, 0, 0, 2, 0, 0, 0], CompressionCodec::Zstd)
                .unwrap();
            sink.commit_cluster(2, &[(0, 2)]).unwrap();
            sink.commit_dataset().unwrap()
        };

        let bare_len = write_into(&ContainerTarget::BareFile(bare_path.clone()));

        let preamble = b"HOSTFILE0123456789 some unrelated bytes";
        std::fs::write(&host_path, preamble).unwrap();
        let embedded_len = write_into(&ContainerTarget::Embedded(host_path.clone()));

        assert_eq!(bare_len, embedded_len);
        let bare = std::fs::read(&bare_path).unwrap();
        let host = std::fs::read(&host_path).unwrap();
        assert_eq!(&host[..preamble.len()], preamble);
        assert_eq!(&host[preamble.len()..], bare.as_slice());
    }
}
