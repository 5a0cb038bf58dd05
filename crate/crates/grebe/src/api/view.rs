//! Views: read accessors bound to one field, addressed by entry index.
//!
//! A [`LeafView`] is the fast path: it pins the page under the cursor and
//! decodes values straight from the resident page bytes, touching the pool
//! only when the cursor leaves the pinned page. [`DynView`] reassembles any
//! field subtree as a [`Value`]; [`CollectionView`] adds per-entry sizes.
//! Views address fields whose ancestors are all plain records, so the
//! entry index is the element index; fields inside collections are reached
//! through a view of the enclosing collection.

use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::format::PhysicalType;
use crate::pages::PageRef;
use crate::schema::{read_value, ColumnAccess, ColumnId, FieldId, FieldKind};
use crate::value::Value;

use super::reader::DatasetReader;

/// Fixed-width value types a [`LeafView`] can decode in place.
pub trait Scalar: Sized + Copy + 'static {
    fn physical() -> PhysicalType;
    /// Decodes from unpacked page bytes (bools are one byte each).
    fn from_le(bytes: &[u8]) -> Self;
    fn type_name() -> &'static str;
}

macro_rules! scalar {
    ($t:ty, $physical:expr, $name:literal) => {
        impl Scalar for $t {
            fn physical() -> PhysicalType {
                $physical
            }

            fn from_le(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().unwrap())
            }

            fn type_name() -> &'static str {
                $name
            }
        }
    };
}

scalar!(i8, PhysicalType::Int8, "int8");
scalar!(i16, PhysicalType::Int16, "int16");
scalar!(i32, PhysicalType::Int32, "int32");
scalar!(i64, PhysicalType::Int64, "int64");
scalar!(u8, PhysicalType::UInt8, "uint8");
scalar!(u16, PhysicalType::UInt16, "uint16");
scalar!(u32, PhysicalType::UInt32, "uint32");
scalar!(u64, PhysicalType::UInt64, "uint64");
scalar!(f32, PhysicalType::Float32, "float32");
scalar!(f64, PhysicalType::Float64, "float64");

impl Scalar for bool {
    fn physical() -> PhysicalType {
        PhysicalType::Bit
    }

    fn from_le(bytes: &[u8]) -> Self {
        bytes[0] != 0
    }

    fn type_name() -> &'static str {
        "bool"
    }
}

/// Entry index must equal the field's element index, which holds exactly
/// when everything above the field is a plain record.
fn check_record_ancestry(reader: &DatasetReader, field: FieldId, path: &str) -> Result<()> {
    let schema = reader.schema();
    let mut at = schema.field(field).parent_id;
    while let Some(id) = at {
        let f = schema.field(id);
        if f.kind != FieldKind::Record {
            return Err(Error::Usage(format!(
                "`{path}` sits inside a {}; view the enclosing `{}` instead",
                f.kind.name(),
                schema.path_of(id)
            )));
        }
        at = f.parent_id;
    }
    Ok(())
}

impl DatasetReader {
    /// A typed view of one leaf field. The on-disk type must match `T`
    /// exactly; the check happens here, not at first access.
    pub fn view<T: Scalar>(&self, path: &str) -> Result<LeafView<'_, T>> {
        let schema = self.schema();
        let field = schema.resolve_path(path)?;
        check_record_ancestry(self, field, path)?;
        if !schema.field(field).kind.is_leaf() {
            return Err(Error::Usage(format!(
                "`{path}` is a {}, not a fixed-width leaf",
                schema.field(field).kind.name()
            )));
        }
        let column = schema.field_columns(field)[0];
        let on_disk = schema.column(column).physical_type;
        if on_disk != T::physical() {
            return Err(Error::TypeMismatch {
                path: path.to_string(),
                expected: T::type_name().to_string(),
                found: schema.type_text(field),
            });
        }
        self.register_columns(&[column]);
        Ok(LeafView {
            reader: self,
            column,
            pinned: None,
            _marker: PhantomData,
        })
    }

    /// A dynamically typed view of any record-path field; values come back
    /// as [`Value`] trees.
    pub fn dyn_view(&self, path: &str) -> Result<DynView<'_>> {
        let schema = self.schema();
        let field = schema.resolve_path(path)?;
        check_record_ancestry(self, field, path)?;
        self.register_columns(&schema.subtree_columns(field));
        Ok(DynView { reader: self, field })
    }

    /// A view of a collection field: per-entry sizes from the offset column
    /// and per-entry item lists.
    pub fn collection_view(&self, path: &str) -> Result<CollectionView<'_>> {
        let schema = self.schema();
        let field = schema.resolve_path(path)?;
        check_record_ancestry(self, field, path)?;
        if schema.field(field).kind != FieldKind::Collection {
            return Err(Error::Usage(format!(
                "`{path}` is a {}, not a collection",
                schema.field(field).kind.name()
            )));
        }
        self.register_columns(&schema.subtree_columns(field));
        Ok(CollectionView {
            reader: self,
            field,
            offsets: schema.field_columns(field)[0],
        })
    }
}

/// Pinned-page cursor state: the global entry range the page covers.
struct Pinned {
    begin: u64,
    end: u64,
    page: PageRef,
}

/// Typed accessor for one fixed-width leaf; see [`DatasetReader::view`].
pub struct LeafView<'r, T: Scalar> {
    reader: &'r DatasetReader,
    column: ColumnId,
    pinned: Option<Pinned>,
    _marker: PhantomData<T>,
}

impl<T: Scalar> std::fmt::Debug for LeafView<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LeafView")
            .field("column", &self.column)
            .field("type", &T::type_name())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> LeafView<'_, T> {
    /// The value at `entry`, decoded from the resident page.
    pub fn get(&mut self, entry: u64) -> Result<T> {
        if let Some(p) = &self.pinned {
            if p.begin <= entry && entry < p.end {
                return Ok(self.decode(entry));
            }
            self.pinned = None;
        }
        let (cluster, local) = self.reader.locate(entry)?;
        self.reader.touch(cluster)?;
        let page = self.reader.pin_page(cluster, self.column, local)?;
        let cluster_first = self.reader.footer().clusters[cluster as usize].first_entry;
        self.pinned = Some(Pinned {
            begin: cluster_first + page.page().first_element,
            end: cluster_first + page.page().first_element + page.page().elements,
            page,
        });
        Ok(self.decode(entry))
    }

    fn decode(&self, entry: u64) -> T {
        let p = self.pinned.as_ref().unwrap();
        let w = T::physical().width_bytes().unwrap_or(1);
        let at = (entry - p.begin) as usize * w;
        T::from_le(&p.page.page().payload()[at..at + w])
    }
}

/// Dynamically typed accessor; see [`DatasetReader::dyn_view`].
pub struct DynView<'r> {
    reader: &'r DatasetReader,
    field: FieldId,
}

impl DynView<'_> {
    pub fn field(&self) -> FieldId {
        self.field
    }

    /// The full value of the bound field at `entry`.
    pub fn value(&self, entry: u64) -> Result<Value> {
        let (cluster, local) = self.reader.locate(entry)?;
        self.reader.touch(cluster)?;
        read_value(self.reader.schema(), &self.reader.access(cluster), self.field, local)
    }
}

/// Collection accessor; see [`DatasetReader::collection_view`].
pub struct CollectionView<'r> {
    reader: &'r DatasetReader,
    field: FieldId,
    offsets: ColumnId,
}

impl CollectionView<'_> {
    /// Number of items at `entry`, from adjacent offsets.
    pub fn len(&self, entry: u64) -> Result<u64> {
        let (cluster, local) = self.reader.locate(entry)?;
        self.reader.touch(cluster)?;
        let access = self.reader.access(cluster);
        let end = access.index(self.offsets, local)?;
        let start = if local == 0 { 0 } else { access.index(self.offsets, local - 1)? };
        if start > end {
            return Err(Error::corruption(format!(
                "offset column {} decreases at element {local}",
                self.offsets
            )));
        }
        Ok(end - start)
    }

    /// The items at `entry`, as values.
    pub fn items(&self, entry: u64) -> Result<Vec<Value>> {
        match self.value(entry)? {
            Value::List(items) => Ok(items),
            _ => unreachable!("collection fields read back as lists"),
        }
    }

    /// The whole collection at `entry` as a [`Value::List`].
    pub fn value(&self, entry: u64) -> Result<Value> {
        let (cluster, local) = self.reader.locate(entry)?;
        self.reader.touch(cluster)?;
        read_value(self.reader.schema(), &self.reader.access(cluster), self.field, local)
    }
}
