//! Columnar event-data storage.
//!
//! Nested, collection-heavy records are shredded into columns of fundamental
//! types; columns are split into compressed pages and grouped into clusters,
//! self-contained ranges of entries. The layout favors partial reads: an
//! analysis touching a handful of fields pays only for those columns.
//!
//! Layers, bottom up:
//!
//! * [`format`]: bit-exact on-disk encoding (envelope, pages, header, footer)
//! * [`schema`]: the field tree and its deterministic mapping onto columns
//! * [`pages`]: in-memory page representation and the shared page pool
//! * [`storage`]: physical sinks and sources, compression, instrumentation
//! * [`clusterpool`]: request planning, multi-stream execution, prefetch
//! * [`api`]: writing, reading, views, iteration, fast merge
//! * [`gen`]: deterministic synthetic datasets shaped like real workloads
//! * [`textio`]: canonical text export and import

pub mod api;
pub mod clusterpool;
pub mod error;
pub mod format;
pub mod gen;
pub mod pages;
pub mod schema;
pub mod storage;
pub mod textio;
pub mod value;

pub use api::{
    fast_merge, DatasetModel, DatasetReader, DatasetWriter, Entry, ReaderOptions, WriterOptions,
};
pub use error::{Error, Result};
pub use storage::{CompressionCodec, ContainerSource, ContainerTarget};
pub use value::Value;
