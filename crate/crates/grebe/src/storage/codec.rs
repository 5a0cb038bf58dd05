//! Page compression codecs.
//!
//! Codec ids are part of the on-disk format: 0 stored, 1 zlib, 2 zstd,
//! 3 lz4, 4 lzma. Decompression always validates the output length against
//! the expected size and never allocates more than that, so corrupt pages
//! fail cleanly. Zstd frames carry content checksums, giving that codec
//! payload corruption detection on top of the length check.

use std::io::Read;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressionCodec {
    None,
    Zlib,
    Zstd,
    Lz4,
    Lzma,
}

impl CompressionCodec {
    pub fn id(self) -> u8 {
        match self {
            CompressionCodec::None => 0,
            CompressionCodec::Zlib => 1,
            CompressionCodec::Zstd => 2,
            CompressionCodec::Lz4 => 3,
            CompressionCodec::Lzma => 4,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Some(match id {
            0 => CompressionCodec::None,
            1 => CompressionCodec::Zlib,
            2 => CompressionCodec::Zstd,
            3 => CompressionCodec::Lz4,
            4 => CompressionCodec::Lzma,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            CompressionCodec::None => "none",
            CompressionCodec::Zlib => "zlib",
            CompressionCodec::Zstd => "zstd",
            CompressionCodec::Lz4 => "lz4",
            CompressionCodec::Lzma => "lzma",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "none" => CompressionCodec::None,
            "zlib" => CompressionCodec::Zlib,
            "zstd" => CompressionCodec::Zstd,
            "lz4" => CompressionCodec::Lz4,
            "lzma" => CompressionCodec::Lzma,
            _ => return None,
        })
    }
}

fn compress_error(codec: CompressionCodec, e: std::io::Error) -> Error {
    Error::corruption_caused(
        format!("{} compression failed", codec.name()),
        Error::Io { offset: 0, source: e },
    )
}

fn corrupt_page(codec: CompressionCodec, detail: impl std::fmt::Display) -> Error {
    Error::corruption(format!("{} page failed to decompress: {detail}", codec.name()))
}

/// Compresses a packed page. The caller decides whether the result is worth
/// storing; expansion fallback happens at the sink.
pub fn compress(codec: CompressionCodec, data: &[u8]) -> Result<Vec<u8>> {
    match codec {
        CompressionCodec::None => Ok(data.to_vec()),
        CompressionCodec::Zlib => {
            let mut enc =
                flate2::read::ZlibEncoder::new(data, flate2::Compression::new(6));
            let mut out = Vec::new();
            enc.read_to_end(&mut out).map_err(|e| compress_error(codec, e))?;
            Ok(out)
        }
        CompressionCodec::Zstd => {
            let mut c =
                zstd::bulk::Compressor::new(3).map_err(|e| compress_error(codec, e))?;
            c.set_parameter(zstd::zstd_safe::CParameter::ChecksumFlag(true))
                .map_err(|e| compress_error(codec, e))?;
            c.compress(data).map_err(|e| compress_error(codec, e))
        }
        CompressionCodec::Lz4 => Ok(lz4_flex::block::compress(data)),
        CompressionCodec::Lzma => {
            let mut enc = xz2::read::XzEncoder::new(data, 6);
            let mut out = Vec::new();
            enc.read_to_end(&mut out).map_err(|e| compress_error(codec, e))?;
            Ok(out)
        }
    }
}

/// Decompresses a stored page to exactly `expected_len` bytes.
///
/// Stream codecs are read through a hard cap of one byte past the expected
/// length, so a corrupt length field cannot balloon memory.
pub fn decompress(codec: CompressionCodec, data: &[u8], expected_len: usize) -> Result<Vec<u8>> {
    let out = match codec {
        CompressionCodec::None => data.to_vec(),
        CompressionCodec::Zlib => {
            let mut out = Vec::new();
            flate2::read::ZlibDecoder::new(data)
                .take(expected_len as u64 + 1)
                .read_to_end(&mut out)
                .map_err(|e| corrupt_page(codec, e))?;
            out
        }
        CompressionCodec::Zstd => zstd::bulk::Decompressor::new()
            .and_then(|mut d| d.decompress(data, expected_len))
            .map_err(|e| corrupt_page(codec, e))?,
        CompressionCodec::Lz4 => lz4_flex::block::decompress(data, expected_len)
            .map_err(|e| corrupt_page(codec, e))?,
        CompressionCodec::Lzma => {
            let mut out = Vec::new();
            xz2::read::XzDecoder::new(data)
                .take(expected_len as u64 + 1)
                .read_to_end(&mut out)
                .map_err(|e| corrupt_page(codec, e))?;
            out
        }
    };
    if out.len() != expected_len {
        return Err(corrupt_page(
            codec,
            format!("{} bytes out, {expected_len} expected", out.len()),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [CompressionCodec; 5] = [
        CompressionCodec::None,
        CompressionCodec::Zlib,
        CompressionCodec::Zstd,
        CompressionCodec::Lz4,
        CompressionCodec::Lzma,
    ];

    fn sample_payload() -> Vec<u8> {
        // Compressible: little-endian ramp with repetition.
        let mut out = Vec::with_capacity(64 << 10);
        for i in 0..(16 << 10) {
            out.extend_from_slice(&((i as u32) % 512).to_le_bytes());
        }
        out
    }

    #[test]
    fn every_codec_round_trips() {
        let data = sample_payload();
        for codec in ALL {
            let packed = compress(codec, &data).unwrap();
            let back = decompress(codec, &packed, data.len()).unwrap();
            assert_eq!(back, data, "{}", codec.name());
            if codec != CompressionCodec::None {
                assert!(packed.len() < data.len(), "{} did not shrink", codec.name());
            }
        }
    }

    #[test]
    fn empty_input_round_trips() {
        for codec in ALL {
            let packed = compress(codec, &[]).unwrap();
            assert_eq!(decompress(codec, &packed, 0).unwrap(), Vec::<u8>::new());
        }
    }

    #[test]
    fn wrong_expected_length_is_corruption() {
        let data = sample_payload();
        for codec in ALL {
            let packed = compress(codec, &data).unwrap();
            let err = decompress(codec, &packed, data.len() - 1).unwrap_err();
            assert_eq!(err.class(), "corruption", "{}", codec.name());
            let err = decompress(codec, &packed, data.len() + 1).unwrap_err();
            assert_eq!(err.class(), "corruption", "{}", codec.name());
        }
    }

    #[test]
    fn zstd_detects_payload_corruption() {
        let data = sample_payload();
        let mut packed = compress(CompressionCodec::Zstd, &data).unwrap();
        let mid = packed.len() / 2;
        packed[mid] ^= 0x40;
        assert!(decompress(CompressionCodec::Zstd, &packed, data.len()).is_err());
    }

    #[test]
    fn ids_and_names_round_trip() {
        for codec in ALL {
            assert_eq!(CompressionCodec::from_id(codec.id()), Some(codec));
            assert_eq!(CompressionCodec::from_name(codec.name()), Some(codec));
        }
        assert_eq!(CompressionCodec::from_id(5), None);
        assert_eq!(CompressionCodec::from_name("gzip"), None);
    }
}
