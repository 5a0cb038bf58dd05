//! The event-iteration layer: dataset writer and reader, typed views,
//! entry loading, and fast merge.
//!
//! Writing goes through a [`DatasetModel`] (a frozen schema plus reusable
//! [`Entry`] holders), a [`DatasetWriter`] that shreds entries into column
//! buffers and cuts pages and clusters, and a commit that seals the footer.
//! Reading opens the metadata, then serves values through the page pool:
//! [`LeafView`] decodes straight from resident page bytes, [`DynView`] and
//! [`load_entry`](DatasetReader::load_entry) reassemble full values, and the
//! cluster pool prefetches upcoming clusters of the active columns.
//! [`fast_merge`] concatenates datasets by copying cluster regions verbatim
//! and rewriting only the metadata, which cluster-local indexing makes safe.

mod merge;
mod reader;
mod view;
mod writer;

pub use merge::{fast_merge, MergeSummary};
pub use reader::{DatasetReader, EntryIter, EntryRange, MappedDataset, ReaderOptions};
pub use view::{CollectionView, DynView, LeafView, Scalar};
pub use writer::{DatasetWriter, WriteSummary, WriterOptions};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::schema::{FieldDef, FieldId, Schema};
use crate::value::Value;

/// A frozen schema with entry holders attached; fields cannot be added after
/// creation. Writers are created from a model; readers can impose one to get
/// the on-disk types checked at open time.
#[derive(Debug, Clone)]
pub struct DatasetModel {
    schema: Arc<Schema>,
}

impl DatasetModel {
    pub fn from_fields(fields: Vec<FieldDef>) -> Result<Self> {
        Ok(DatasetModel { schema: Schema::from_fields(fields)? })
    }

    pub fn from_schema(schema: Arc<Schema>) -> Self {
        DatasetModel { schema }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// A reusable entry holding default values for every top-level field.
    pub fn create_entry(&self) -> Entry {
        Entry::for_fields(&self.schema, self.schema.root().children.clone())
    }
}

/// A reusable value holder for one entry: one slot per top-level field.
/// Reusing an entry across fills and loads avoids per-entry allocation for
/// everything but strings and collections.
#[derive(Debug, Clone)]
pub struct Entry {
    schema: Arc<Schema>,
    fields: Vec<FieldId>,
    values: Vec<Value>,
}

impl Entry {
    fn for_fields(schema: &Arc<Schema>, fields: Vec<FieldId>) -> Entry {
        let values = fields.iter().map(|&f| schema.default_value(f)).collect();
        Entry { schema: Arc::clone(schema), fields, values }
    }

    pub fn field_names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|&f| self.schema.field(f).name.as_str())
    }

    fn slot(&self, name: &str) -> Result<usize> {
        self.fields
            .iter()
            .position(|&f| self.schema.field(f).name == name)
            .ok_or_else(|| Error::UnknownField {
                path: name.to_string(),
                candidates: self.field_names().map(String::from).collect(),
            })
    }

    pub fn set(&mut self, name: &str, value: Value) -> Result<()> {
        let slot = self.slot(name)?;
        self.values[slot] = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Value> {
        Ok(&self.values[self.slot(name)?])
    }

    /// All values, in top-level field order.
    pub fn values(&self) -> &[Value] {
        &self.values
    }

    /// Replaces every value at once; the count must match the field count.
    pub fn set_values(&mut self, values: Vec<Value>) -> Result<()> {
        if values.len() != self.fields.len() {
            return Err(Error::Shape {
                path: "<entry>".into(),
                reason: format!(
                    "{} values for {} top-level fields",
                    values.len(),
                    self.fields.len()
                ),
            });
        }
        self.values = values;
        Ok(())
    }

    /// Resets every slot to its default value.
    pub fn clear(&mut self) {
        for (slot, &field) in self.fields.iter().enumerate() {
            self.values[slot] = self.schema.default_value(field);
        }
    }

    pub(crate) fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub(crate) fn fields(&self) -> &[FieldId] {
        &self.fields
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Value] {
        &mut self.values
    }
}
