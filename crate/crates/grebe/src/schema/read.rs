//! Reassembling values from column elements.
//!
//! The element source is abstract so the same walk serves in-memory write
//! buffers (round-trip tests) and the page pool (real reads). All indices are
//! cluster-local; entry-to-cluster translation happens above this layer.

use crate::error::{Error, Result};
use crate::format::PhysicalType;
use crate::schema::{ColumnData, ColumnId, FieldId, FieldKind, Schema};
use crate::value::Value;

/// Guard against corrupt offset columns in subtrees that have no element
/// counts of their own to cross-check (nothing but empty records below).
const MAX_RANGE: u64 = 1 << 30;

/// Cluster-local element access for one dataset.
pub trait ColumnAccess {
    /// Elements present in the column within this cluster.
    fn element_count(&self, column: ColumnId) -> u64;

    /// One element as a value (leaf columns).
    fn element(&self, column: ColumnId, index: u64) -> Result<Value>;

    /// A contiguous byte run from a `Byte` column.
    fn byte_run(&self, column: ColumnId, start: u64, end: u64) -> Result<Vec<u8>>;

    /// One element of an `Index64` or `UInt32` column as an integer.
    fn index(&self, column: ColumnId, index: u64) -> Result<u64> {
        match self.element(column, index)? {
            Value::U64(x) => Ok(x),
            Value::U32(x) => Ok(x as u64),
            other => Err(Error::Corruption {
                context: format!("column {column} element {index} is {}", other.shape_name()),
                cause: None,
            }),
        }
    }

    /// Occurrences of `tag` in a `UInt32` column before `index`.
    fn count_tag_before(&self, column: ColumnId, index: u64, tag: u64) -> Result<u64> {
        let mut n = 0;
        for i in 0..index {
            if self.index(column, i)? == tag {
                n += 1;
            }
        }
        Ok(n)
    }
}

/// Reads the value of `field` at cluster-local logical index `index`.
pub fn read_value(
    schema: &Schema,
    access: &impl ColumnAccess,
    field: FieldId,
    index: u64,
) -> Result<Value> {
    let f = schema.field(field);
    let cols = schema.field_columns(field);
    match f.kind {
        FieldKind::LeafBool | FieldKind::LeafInt { .. } | FieldKind::LeafFloat { .. } => {
            access.element(cols[0], index)
        }
        FieldKind::String => {
            let (start, end) = offset_range(schema, access, field, cols[0], index)?;
            let bytes = access.byte_run(cols[1], start, end)?;
            String::from_utf8(bytes)
                .map(Value::Str)
                .map_err(|_| Error::Corruption {
                    context: format!(
                        "string `{}` element {index} holds invalid UTF-8",
                        schema.path_of(field)
                    ),
                    cause: None,
                })
        }
        FieldKind::Collection => {
            let (start, end) = offset_range(schema, access, field, cols[0], index)?;
            let child = f.children[0];
            check_child_range(schema, access, field, child, end)?;
            let mut items = Vec::new();
            for j in start..end {
                items.push(read_value(schema, access, child, j)?);
            }
            Ok(Value::List(items))
        }
        FieldKind::FixedArray { len } => {
            let child = f.children[0];
            let start = index * len as u64;
            let mut items = Vec::new();
            for j in start..start + len as u64 {
                items.push(read_value(schema, access, child, j)?);
            }
            Ok(Value::List(items))
        }
        FieldKind::Record => {
            let mut items = Vec::new();
            for &child in &f.children {
                items.push(read_value(schema, access, child, index)?);
            }
            Ok(Value::Record(items))
        }
        FieldKind::Variant => {
            let tag = access.index(cols[0], index)?;
            if tag == 0 || tag > f.children.len() as u64 {
                return Err(Error::Corruption {
                    context: format!(
                        "variant `{}` element {index} has tag {tag} (1..={} expected)",
                        schema.path_of(field),
                        f.children.len()
                    ),
                    cause: None,
                });
            }
            let alt = (tag - 1) as u32;
            let child = f.children[alt as usize];
            let child_index = access.count_tag_before(cols[0], index, tag)?;
            let payload = read_value(schema, access, child, child_index)?;
            Ok(Value::Variant(alt, Box::new(payload)))
        }
    }
}

/// [start, end) child range for element `index` of an offset column.
fn offset_range(
    schema: &Schema,
    access: &impl ColumnAccess,
    field: FieldId,
    offset_col: ColumnId,
    index: u64,
) -> Result<(u64, u64)> {
    let end = access.index(offset_col, index)?;
    let start = if index == 0 {
        0
    } else {
        access.index(offset_col, index - 1)?
    };
    if end < start {
        return Err(Error::Corruption {
            context: format!(
                "offset column of `{}` decreases at element {index} ({start} -> {end})",
                schema.path_of(field)
            ),
            cause: None,
        });
    }
    Ok((start, end))
}

/// Validates a collection end offset against the child's own element count
/// when one exists; otherwise falls back to a hard sanity bound.
fn check_child_range(
    schema: &Schema,
    access: &impl ColumnAccess,
    field: FieldId,
    child: FieldId,
    end: u64,
) -> Result<u64> {
    match logical_count(schema, access, child) {
        Some(count) if end > count => Err(Error::Corruption {
            context: format!(
                "offset column of `{}` points past its child ({end} > {count})",
                schema.path_of(field)
            ),
            cause: None,
        }),
        Some(count) => Ok(count),
        None if end > MAX_RANGE => Err(Error::Corruption {
            context: format!(
                "offset column of `{}` holds implausible end {end}",
                schema.path_of(field)
            ),
            cause: None,
        }),
        None => Ok(end),
    }
}

/// Logical value count of a field within the cluster, when derivable from
/// column element counts. Empty-record subtrees have no columns: `None`.
pub fn logical_count(schema: &Schema, access: &impl ColumnAccess, field: FieldId) -> Option<u64> {
    let f = schema.field(field);
    match f.kind {
        FieldKind::LeafBool
        | FieldKind::LeafInt { .. }
        | FieldKind::LeafFloat { .. }
        | FieldKind::String
        | FieldKind::Collection
        | FieldKind::Variant => Some(access.element_count(schema.field_columns(field)[0])),
        FieldKind::FixedArray { len } => {
            logical_count(schema, access, f.children[0]).map(|n| n / len as u64)
        }
        FieldKind::Record => f
            .children
            .iter()
            .find_map(|&c| logical_count(schema, access, c)),
    }
}

/// Element access over in-memory write buffers; the round-trip oracle.
pub struct BufferAccess<'a> {
    pub schema: &'a Schema,
    pub buffers: &'a crate::schema::WriteBuffers,
}

impl ColumnAccess for BufferAccess<'_> {
    fn element_count(&self, column: ColumnId) -> u64 {
        self.buffers.columns[column as usize].element_count()
    }

    fn element(&self, column: ColumnId, index: u64) -> Result<Value> {
        let count = self.element_count(column);
        if index >= count {
            return Err(Error::Bounds { index, len: count });
        }
        let ty = self.schema.column(column).physical_type;
        match &self.buffers.columns[column as usize] {
            ColumnData::Bits(v) => Ok(Value::Bool(v[index as usize] != 0)),
            ColumnData::Raw { bytes, width } => {
                let at = index as usize * width;
                Ok(value_from_le(ty, &bytes[at..at + width]))
            }
        }
    }

    fn byte_run(&self, column: ColumnId, start: u64, end: u64) -> Result<Vec<u8>> {
        let count = self.element_count(column);
        if end < start || end > count {
            return Err(Error::Bounds { index: end, len: count });
        }
        match &self.buffers.columns[column as usize] {
            ColumnData::Raw { bytes, width: 1 } => {
                Ok(bytes[start as usize..end as usize].to_vec())
            }
            _ => Err(Error::Corruption {
                context: format!("column {column} is not a byte column"),
                cause: None,
            }),
        }
    }
}

/// Decodes one little-endian element of a physical type. Bit columns are
/// handled by the callers, which see unpacked bytes.
pub fn value_from_le(ty: PhysicalType, le: &[u8]) -> Value {
    match ty {
        PhysicalType::Bit => Value::Bool(le[0] != 0),
        PhysicalType::Byte => Value::U8(le[0]),
        PhysicalType::Int8 => Value::I8(le[0] as i8),
        PhysicalType::UInt8 => Value::U8(le[0]),
        PhysicalType::Int16 => Value::I16(i16::from_le_bytes(le.try_into().unwrap())),
        PhysicalType::UInt16 => Value::U16(u16::from_le_bytes(le.try_into().unwrap())),
        PhysicalType::Int32 => Value::I32(i32::from_le_bytes(le.try_into().unwrap())),
        PhysicalType::UInt32 => Value::U32(u32::from_le_bytes(le.try_into().unwrap())),
        PhysicalType::Int64 => Value::I64(i64::from_le_bytes(le.try_into().unwrap())),
        PhysicalType::UInt64 => Value::U64(u64::from_le_bytes(le.try_into().unwrap())),
        PhysicalType::Index64 => Value::U64(u64::from_le_bytes(le.try_into().unwrap())),
        PhysicalType::Float32 => Value::F32(f32::from_le_bytes(le.try_into().unwrap())),
        PhysicalType::Float64 => Value::F64(f64::from_le_bytes(le.try_into().unwrap())),
    }
}
