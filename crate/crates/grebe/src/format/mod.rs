//! On-disk encoding: file envelope, element codecs, header and footer records.
//!
//! Everything here is bit-exact and little-endian; `docs/format.md` in the
//! repository root documents the layout byte by byte. All functions are pure
//! over buffers and safe to call concurrently.

mod element;
mod meta;

pub use element::{decode_elements, encode_elements, pack_bits, unpack_bits};
pub use meta::{
    deserialize_footer, deserialize_header, serialize_footer, serialize_header, validate_dataset,
    ClusterDescriptor, ColumnPages, Footer, Header, PageLocator, MAX_CODEC_ID,
};

use crate::error::{Error, Result};

/// First four bytes of every dataset region.
pub const MAGIC: [u8; 4] = *b"GRB1";

/// On-disk format version written and accepted by this build.
pub const FORMAT_VERSION: u16 = 1;

/// Envelope size in bytes: magic, version, reserved, flags, two locators.
pub const ENVELOPE_LEN: usize = 4 + 2 + 2 + 8 + BYTE_RANGE_LEN + BYTE_RANGE_LEN;

/// Encoded size of a [`ByteRange`].
pub const BYTE_RANGE_LEN: usize = 8 + 4 + 4 + 1;

/// Feature bit reserved for per-page checksums; no bit is set in v1 files.
pub const FEATURE_PAGE_CHECKSUMS: u64 = 1;

/// Element types a column can hold.
///
/// `Bit` packs eight elements per byte; everything else is a fixed-width
/// little-endian scalar. `Index64` is an unsigned 64-bit cluster-local end
/// offset; `Byte` carries string character data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhysicalType {
    Bit,
    Byte,
    Int8,
    Int16,
    Int32,
    Int64,
    UInt8,
    UInt16,
    UInt32,
    UInt64,
    Float32,
    Float64,
    Index64,
}

impl PhysicalType {
    /// Width in bytes of one element, or `None` for `Bit`.
    pub fn width_bytes(self) -> Option<usize> {
        match self {
            PhysicalType::Bit => None,
            PhysicalType::Byte | PhysicalType::Int8 | PhysicalType::UInt8 => Some(1),
            PhysicalType::Int16 | PhysicalType::UInt16 => Some(2),
            PhysicalType::Int32 | PhysicalType::UInt32 | PhysicalType::Float32 => Some(4),
            PhysicalType::Int64
            | PhysicalType::UInt64
            | PhysicalType::Float64
            | PhysicalType::Index64 => Some(8),
        }
    }

    /// Packed payload length for `count` elements.
    pub fn payload_len(self, count: usize) -> usize {
        match self.width_bytes() {
            Some(w) => count * w,
            None => count.div_ceil(8),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            PhysicalType::Bit => 0,
            PhysicalType::Byte => 1,
            PhysicalType::Int8 => 2,
            PhysicalType::Int16 => 3,
            PhysicalType::Int32 => 4,
            PhysicalType::Int64 => 5,
            PhysicalType::UInt8 => 6,
            PhysicalType::UInt16 => 7,
            PhysicalType::UInt32 => 8,
            PhysicalType::UInt64 => 9,
            PhysicalType::Float32 => 10,
            PhysicalType::Float64 => 11,
            PhysicalType::Index64 => 12,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => PhysicalType::Bit,
            1 => PhysicalType::Byte,
            2 => PhysicalType::Int8,
            3 => PhysicalType::Int16,
            4 => PhysicalType::Int32,
            5 => PhysicalType::Int64,
            6 => PhysicalType::UInt8,
            7 => PhysicalType::UInt16,
            8 => PhysicalType::UInt32,
            9 => PhysicalType::UInt64,
            10 => PhysicalType::Float32,
            11 => PhysicalType::Float64,
            12 => PhysicalType::Index64,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            PhysicalType::Bit => "bit",
            PhysicalType::Byte => "byte",
            PhysicalType::Int8 => "int8",
            PhysicalType::Int16 => "int16",
            PhysicalType::Int32 => "int32",
            PhysicalType::Int64 => "int64",
            PhysicalType::UInt8 => "uint8",
            PhysicalType::UInt16 => "uint16",
            PhysicalType::UInt32 => "uint32",
            PhysicalType::UInt64 => "uint64",
            PhysicalType::Float32 => "float32",
            PhysicalType::Float64 => "float64",
            PhysicalType::Index64 => "index64",
        }
    }
}

/// Location of one stored blob within the dataset region.
///
/// Offsets are region-relative: byte 0 is the first byte of the envelope,
/// which makes a region relocatable inside a host file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByteRange {
    pub offset: u64,
    pub compressed_size: u32,
    pub uncompressed_size: u32,
    pub codec_id: u8,
}

impl ByteRange {
    pub fn end(&self) -> u64 {
        self.offset + self.compressed_size as u64
    }

    pub(crate) fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.offset.to_le_bytes());
        out.extend_from_slice(&self.compressed_size.to_le_bytes());
        out.extend_from_slice(&self.uncompressed_size.to_le_bytes());
        out.push(self.codec_id);
    }

    pub(crate) fn decode(cur: &mut Cursor<'_>) -> Result<Self> {
        Ok(ByteRange {
            offset: cur.u64()?,
            compressed_size: cur.u32()?,
            uncompressed_size: cur.u32()?,
            codec_id: cur.u8()?,
        })
    }
}

/// The fixed-size record at the start of a dataset region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileEnvelope {
    pub format_version: u16,
    pub feature_flags: u64,
    pub header_locator: ByteRange,
    pub footer_locator: ByteRange,
}

impl FileEnvelope {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ENVELOPE_LEN);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.feature_flags.to_le_bytes());
        self.header_locator.encode_into(&mut out);
        self.footer_locator.encode_into(&mut out);
        debug_assert_eq!(out.len(), ENVELOPE_LEN);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(buf, 0);
        let magic = cur.bytes(4)?;
        if magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                reason: format!("bad magic {magic:02x?}, expected {MAGIC:02x?}"),
            });
        }
        let format_version = cur.u16()?;
        if format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: format_version,
                supported: FORMAT_VERSION,
            });
        }
        let reserved = cur.u16()?;
        if reserved != 0 {
            return Err(Error::Format {
                offset: 6,
                reason: format!("reserved field must be zero, found {reserved:#x}"),
            });
        }
        let feature_flags = cur.u64()?;
        if feature_flags != 0 {
            return Err(Error::FeatureFlags { flags: feature_flags });
        }
        let header_locator = ByteRange::decode(&mut cur)?;
        let footer_locator = ByteRange::decode(&mut cur)?;
        for (name, loc) in [("header", &header_locator), ("footer", &footer_locator)] {
            if loc.codec_id != 0 || loc.compressed_size != loc.uncompressed_size {
                return Err(Error::Format {
                    offset: 0,
                    reason: format!("{name} locator must be stored uncompressed"),
                });
            }
        }
        Ok(FileEnvelope {
            format_version,
            feature_flags,
            header_locator,
            footer_locator,
        })
    }
}

/// Bounds-checked little-endian reader over a byte slice.
///
/// `base` is the absolute position of `buf[0]`, used only for error offsets.
pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    base: u64,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8], base: u64) -> Self {
        Cursor { buf, pos: 0, base }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn offset(&self) -> u64 {
        self.base + self.pos as u64
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated {
                expected: (self.pos + n) as u64,
                found: self.buf.len() as u64,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    /// Length-prefixed UTF-8 string; the length is validated against the
    /// remaining bytes before any allocation.
    pub fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let at = self.offset();
        let raw = self.bytes(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Format {
            offset: at,
            reason: "invalid UTF-8 in string".into(),
        })
    }
}

pub(crate) fn push_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}
