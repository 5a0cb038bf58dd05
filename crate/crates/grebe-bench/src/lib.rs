//! Deterministic inputs for the criterion benches. Payloads imitate the
//! entropy of real detector columns (plateaus of repeated readings with
//! occasional jitter) so codec and packing numbers mean something; pure
//! random bytes would punish every compressor equally and teach nothing.

use grebe::format::ByteRange;
use grebe::CompressionCodec;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Little-endian float64 payload built from value plateaus: a reading
/// repeats for a short run, then jumps. Roughly 4:1 compressible with zstd.
pub fn plateau_f64(elements: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(elements * 8);
    let mut remaining = 0u32;
    let mut value = 0f64;
    for _ in 0..elements {
        if remaining == 0 {
            remaining = rng.random_range(4..64);
            value = rng.random_range(0..4096) as f64 * 0.25;
        }
        remaining -= 1;
        out.extend_from_slice(&value.to_le_bytes());
    }
    out
}

/// One byte per boolean, the unpacked page form, biased 9:1 toward zero the
/// way a trigger flag column is.
pub fn sparse_bools(elements: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..elements).map(|_| u8::from(rng.random_range(0..10) == 0)).collect()
}

/// Sorted page ranges separated by gaps of up to `max_gap` bytes; zero gives
/// a fully contiguous layout. Sizes vary around `page_bytes` like the tail
/// pages of real clusters do.
pub fn gapped_layout(pages: usize, page_bytes: u32, max_gap: u64, seed: u64) -> Vec<ByteRange> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offset = 0u64;
    let mut out = Vec::with_capacity(pages);
    for _ in 0..pages {
        offset += if max_gap == 0 { 0 } else { rng.random_range(0..=max_gap) };
        let size = rng.random_range(page_bytes / 2..=page_bytes);
        out.push(ByteRange {
            offset,
            compressed_size: size,
            uncompressed_size: size,
            codec_id: CompressionCodec::None.id(),
        });
        offset += size as u64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payloads_are_deterministic() {
        assert_eq!(plateau_f64(512, 7), plateau_f64(512, 7));
        assert_eq!(sparse_bools(512, 7), sparse_bools(512, 7));
        assert_eq!(plateau_f64(512, 7).len(), 512 * 8);
    }

    #[test]
    fn layouts_are_sorted_and_gap_bounded() {
        let ranges = gapped_layout(200, 4096, 1000, 3);
        for pair in ranges.windows(2) {
            assert!(pair[0].end() <= pair[1].offset);
            assert!(pair[1].offset - pair[0].end() <= 1000);
        }
        let tight = gapped_layout(50, 4096, 0, 3);
        for pair in tight.windows(2) {
            assert_eq!(pair[0].end(), pair[1].offset);
        }
    }
}
