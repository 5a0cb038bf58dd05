//! Physical storage: sinks, sources, codecs, containers, instrumentation.
//!
//! A dataset lives in a contiguous region of a file, either the whole file
//! (bare container) or a byte range inside a host file (embedded container).
//! All offsets inside the region are region-relative, so the two forms hold
//! bit-identical bytes.

mod codec;
mod sink;
mod source;

pub use codec::{compress, decompress, CompressionCodec};
pub use sink::{ContainerTarget, FileSink};
pub use source::{ContainerSource, FileSource, IoClass, IoStats, MappedRegion};

// On-disk locator types live with their serializers; storage re-exports them
// as its interface vocabulary.
pub use crate::format::{ByteRange, ClusterDescriptor, ColumnPages, PageLocator};
