//! Physical read path with instrumentation.
//!
//! Every read is classified foreground (an entry access waits on it) or
//! background (prefetch), and counted: one device request per contiguous
//! range, plus the bytes moved. The counters are atomics; snapshots are
//! cheap and safe to take from any thread.

use std::fs::File;
use std::os::unix::fs::FileExt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::format::{ByteRange, FileEnvelope, PageLocator, ENVELOPE_LEN};
use crate::storage::codec::{decompress, CompressionCodec};

/// Where a dataset region is read from.
#[derive(Debug, Clone)]
pub enum ContainerSource {
    /// The region is the whole file.
    BareFile(PathBuf),
    /// The region sits inside a host file. `region_len` bounds it; when
    /// `None` the region extends to the end of the file.
    Embedded {
        path: PathBuf,
        region_offset: u64,
        region_len: Option<u64>,
    },
}

impl ContainerSource {
    pub fn path(&self) -> &PathBuf {
        match self {
            ContainerSource::BareFile(p) => p,
            ContainerSource::Embedded { path, .. } => path,
        }
    }
}

/// Whether an entry access is waiting on this read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IoClass {
    Foreground,
    Background,
}

#[derive(Debug, Default)]
pub(crate) struct Counters {
    fg_requests: AtomicU64,
    fg_bytes: AtomicU64,
    bg_requests: AtomicU64,
    bg_bytes: AtomicU64,
}

/// Snapshot of the device traffic a source has performed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IoStats {
    pub fg_requests: u64,
    pub fg_bytes: u64,
    pub bg_requests: u64,
    pub bg_bytes: u64,
}

impl IoStats {
    pub fn requests(&self) -> u64 {
        self.fg_requests + self.bg_requests
    }

    pub fn bytes_read(&self) -> u64 {
        self.fg_bytes + self.bg_bytes
    }
}

#[derive(Debug)]
pub struct FileSource {
    file: File,
    region_offset: u64,
    region_len: u64,
    counters: Counters,
}

impl FileSource {
    pub fn open(source: &ContainerSource) -> Result<Self> {
        let (path, region_offset, region_len) = match source {
            ContainerSource::BareFile(p) => (p, 0, None),
            ContainerSource::Embedded { path, region_offset, region_len } => {
                (path, *region_offset, *region_len)
            }
        };
        let file = File::open(path).map_err(|e| Error::io_at(0, e))?;
        let file_len = file.metadata().map_err(|e| Error::io_at(0, e))?.len();
        if region_offset > file_len {
            return Err(Error::Format {
                offset: region_offset,
                reason: format!("region starts at {region_offset}, file holds {file_len} bytes"),
            });
        }
        let region_len = match region_len {
            Some(len) if region_offset + len > file_len => {
                return Err(Error::Format {
                    offset: region_offset,
                    reason: format!(
                        "region of {len} bytes at {region_offset} exceeds the {file_len}-byte file"
                    ),
                })
            }
            Some(len) => len,
            None => file_len - region_offset,
        };
        if region_len < ENVELOPE_LEN as u64 {
            return Err(Error::Truncated {
                expected: ENVELOPE_LEN as u64,
                found: region_len,
            });
        }
        Ok(FileSource { file, region_offset, region_len, counters: Counters::default() })
    }

    pub fn region_len(&self) -> u64 {
        self.region_len
    }

    /// One contiguous region-relative read; counts as one device request.
    pub fn read_range(&self, offset: u64, len: usize, class: IoClass) -> Result<Vec<u8>> {
        let end = offset + len as u64;
        if end > self.region_len {
            return Err(Error::Truncated { expected: end, found: self.region_len });
        }
        let mut buf = vec![0u8; len];
        self.file
            .read_exact_at(&mut buf, self.region_offset + offset)
            .map_err(|e| Error::io_at(self.region_offset + offset, e))?;
        let (reqs, bytes) = match class {
            IoClass::Foreground => (&self.counters.fg_requests, &self.counters.fg_bytes),
            IoClass::Background => (&self.counters.bg_requests, &self.counters.bg_bytes),
        };
        reqs.fetch_add(1, Ordering::Relaxed);
        bytes.fetch_add(len as u64, Ordering::Relaxed);
        Ok(buf)
    }

    /// Reads and decompresses one stored blob (page, header, or footer).
    pub fn read_blob(&self, range: &ByteRange, class: IoClass) -> Result<Vec<u8>> {
        let codec = CompressionCodec::from_id(range.codec_id).ok_or_else(|| Error::Format {
            offset: range.offset,
            reason: format!("unknown codec id {}", range.codec_id),
        })?;
        let stored = self.read_range(range.offset, range.compressed_size as usize, class)?;
        decompress(codec, &stored, range.uncompressed_size as usize)
    }

    /// Reads and decompresses one page; one device request.
    pub fn read_page(&self, locator: &PageLocator, class: IoClass) -> Result<Vec<u8>> {
        self.read_blob(&locator.range, class)
    }

    pub fn read_envelope(&self) -> Result<FileEnvelope> {
        let bytes = self.read_range(0, ENVELOPE_LEN, IoClass::Foreground)?;
        FileEnvelope::decode(&bytes)
    }

    pub fn stats(&self) -> IoStats {
        IoStats {
            fg_requests: self.counters.fg_requests.load(Ordering::Relaxed),
            fg_bytes: self.counters.fg_bytes.load(Ordering::Relaxed),
            bg_requests: self.counters.bg_requests.load(Ordering::Relaxed),
            bg_bytes: self.counters.bg_bytes.load(Ordering::Relaxed),
        }
    }
}

/// Memory-mapped access to a dataset region.
///
/// Pages are sliced straight out of the mapping, so only uncompressed pages
/// (codec 0) can be served; anything else is an unsupported-mode error.
/// Mapped reads bypass the request counters: there is no read call to count.
pub struct MappedRegion {
    map: memmap2::Mmap,
    region_offset: usize,
    region_len: usize,
}

impl MappedRegion {
    pub fn open(source: &ContainerSource) -> Result<Self> {
        let (path, region_offset, region_len) = match source {
            ContainerSource::BareFile(p) => (p, 0u64, None),
            ContainerSource::Embedded { path, region_offset, region_len } => {
                (path, *region_offset, *region_len)
            }
        };
        let file = File::open(path).map_err(|e| Error::io_at(0, e))?;
        let file_len = file.metadata().map_err(|e| Error::io_at(0, e))?.len();
        let region_len = region_len.unwrap_or(file_len.saturating_sub(region_offset));
        if region_offset + region_len > file_len {
            return Err(Error::Format {
                offset: region_offset,
                reason: "region exceeds the file".into(),
            });
        }
        // Safety: the mapping is read-only; mutation of the file by another
        // process during a read is outside the supported contract.
        let map = unsafe { memmap2::Mmap::map(&file) }.map_err(|e| Error::io_at(0, e))?;
        Ok(MappedRegion {
            map,
            region_offset: region_offset as usize,
            region_len: region_len as usize,
        })
    }

    pub fn region_len(&self) -> u64 {
        self.region_len as u64
    }

    /// A region-relative slice of the mapping.
    pub fn slice(&self, offset: u64, len: usize) -> Result<&[u8]> {
        let end = offset as usize + len;
        if end > self.region_len {
            return Err(Error::Truncated { expected: end as u64, found: self.region_len as u64 });
        }
        Ok(&self.map[self.region_offset + offset as usize..self.region_offset + end])
    }

    /// The packed bytes of one page, served without copying.
    pub fn page_bytes(&self, locator: &PageLocator) -> Result<&[u8]> {
        if locator.range.codec_id != CompressionCodec::None.id() {
            return Err(Error::UnsupportedMode(format!(
                "mapped access requires uncompressed pages; page at {} uses codec {}",
                locator.range.offset, locator.range.codec_id
            )));
        }
        self.slice(locator.range.offset, locator.range.compressed_size as usize)
    }

    pub fn read_envelope(&self) -> Result<FileEnvelope> {
        FileEnvelope::decode(self.slice(0, ENVELOPE_LEN)?)
    }

    /// Header/footer records are stored uncompressed; slice them directly.
    pub fn blob(&self, range: &ByteRange) -> Result<&[u8]> {
        if range.codec_id != 0 {
            return Err(Error::UnsupportedMode(
                "mapped access requires uncompressed metadata".into(),
            ));
        }
        self.slice(range.offset, range.compressed_size as usize)
    }
}
