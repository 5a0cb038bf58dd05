//! Shredding values into column write buffers.
//!
//! Appends are all-or-nothing: the value is shape-checked against the field
//! tree first, and only then written, so a rejected entry leaves every buffer
//! untouched. Offset columns store end positions: each element is the owning
//! field's cumulative child count within the current cluster.

use crate::error::{Error, Result};
use crate::format::PhysicalType;
use crate::schema::{ColumnId, FieldId, FieldKind, Schema};
use crate::value::Value;

/// In-memory element storage for one column.
#[derive(Debug, Clone)]
pub enum ColumnData {
    /// One byte per element, 0 or 1; packed to bits only on disk.
    Bits(Vec<u8>),
    /// Little-endian fixed-width elements.
    Raw { bytes: Vec<u8>, width: usize },
}

impl ColumnData {
    fn new(ty: PhysicalType) -> Self {
        match ty.width_bytes() {
            None => ColumnData::Bits(Vec::new()),
            Some(w) => ColumnData::Raw { bytes: Vec::new(), width: w },
        }
    }

    pub fn element_count(&self) -> u64 {
        match self {
            ColumnData::Bits(v) => v.len() as u64,
            ColumnData::Raw { bytes, width } => (bytes.len() / width) as u64,
        }
    }

    fn clear(&mut self) {
        match self {
            ColumnData::Bits(v) => v.clear(),
            ColumnData::Raw { bytes, .. } => bytes.clear(),
        }
    }

    /// Removes and returns the first `count` elements as unpacked page bytes.
    pub fn drain_front(&mut self, count: u64) -> Vec<u8> {
        let count = count as usize;
        match self {
            ColumnData::Bits(v) => v.drain(..count).collect(),
            ColumnData::Raw { bytes, width } => bytes.drain(..count * *width).collect(),
        }
    }

    pub fn byte_len(&self) -> usize {
        match self {
            ColumnData::Bits(v) => v.len(),
            ColumnData::Raw { bytes, .. } => bytes.len(),
        }
    }
}

/// Per-cluster write state: one element buffer per column plus per-field
/// logical value counts (the source of offset elements).
#[derive(Debug)]
pub struct WriteBuffers {
    pub columns: Vec<ColumnData>,
    /// Logical values appended per field within the current cluster.
    pub field_counts: Vec<u64>,
    /// Elements appended per column within the current cluster. Unlike the
    /// buffer lengths this is not reduced by page cuts, so offset elements
    /// derived from it stay cluster relative after a mid-cluster drain.
    appended: Vec<u64>,
}

impl WriteBuffers {
    pub fn new(schema: &Schema) -> Self {
        WriteBuffers {
            columns: schema
                .columns()
                .iter()
                .map(|c| ColumnData::new(c.physical_type))
                .collect(),
            field_counts: vec![0; schema.fields().len()],
            appended: vec![0; schema.columns().len()],
        }
    }

    /// Clears all buffers; offsets restart at zero for the next cluster.
    pub fn reset(&mut self) {
        for c in &mut self.columns {
            c.clear();
        }
        for n in &mut self.field_counts {
            *n = 0;
        }
        for n in &mut self.appended {
            *n = 0;
        }
    }

    pub fn buffered_bytes(&self) -> usize {
        self.columns.iter().map(|c| c.byte_len()).sum()
    }

    /// Appends one entry: `values` in root child order. Shape-checked first.
    pub fn append_entry(&mut self, schema: &Schema, values: &[Value]) -> Result<()> {
        let root = schema.root();
        if values.len() != root.children.len() {
            return Err(Error::Shape {
                path: "<root>".to_string(),
                reason: format!(
                    "entry has {} values, schema has {} top-level fields",
                    values.len(),
                    root.children.len()
                ),
            });
        }
        for (i, v) in values.iter().enumerate() {
            check_shape(schema, root.children[i], v)?;
        }
        for (i, v) in values.iter().enumerate() {
            self.append_unchecked(schema, root.children[i], v);
        }
        Ok(())
    }

    /// Appends one value to a single field subtree. Shape-checked first.
    pub fn append_field_value(
        &mut self,
        schema: &Schema,
        field: FieldId,
        value: &Value,
    ) -> Result<()> {
        check_shape(schema, field, value)?;
        self.append_unchecked(schema, field, value);
        Ok(())
    }

    fn append_unchecked(&mut self, schema: &Schema, field: FieldId, value: &Value) {
        let f = schema.field(field);
        let cols = schema.field_columns(field);
        match (&f.kind, value) {
            (FieldKind::LeafBool, Value::Bool(b)) => {
                self.push_bit(cols[0], *b);
            }
            (FieldKind::LeafInt { .. }, v) => {
                let le = int_bytes(v);
                self.push_raw(cols[0], &le);
            }
            (FieldKind::LeafFloat { .. }, Value::F32(x)) => {
                self.push_raw(cols[0], &x.to_le_bytes());
            }
            (FieldKind::LeafFloat { .. }, Value::F64(x)) => {
                self.push_raw(cols[0], &x.to_le_bytes());
            }
            (FieldKind::String, Value::Str(s)) => {
                self.push_raw_many(cols[1], s.as_bytes());
                let end = self.appended[cols[1] as usize];
                self.push_raw(cols[0], &end.to_le_bytes());
            }
            (FieldKind::Collection, Value::List(items)) => {
                let child = f.children[0];
                for item in items {
                    self.append_unchecked(schema, child, item);
                }
                let end = self.field_counts[child as usize];
                self.push_raw(cols[0], &end.to_le_bytes());
            }
            (FieldKind::FixedArray { .. }, Value::List(items)) => {
                let child = f.children[0];
                for item in items {
                    self.append_unchecked(schema, child, item);
                }
            }
            (FieldKind::Record, Value::Record(items)) => {
                for (i, item) in items.iter().enumerate() {
                    self.append_unchecked(schema, f.children[i], item);
                }
            }
            (FieldKind::Variant, Value::Variant(alt, payload)) => {
                // Tags are 1-based on disk; zero marks corruption.
                self.push_raw(cols[0], &(alt + 1).to_le_bytes());
                self.append_unchecked(schema, f.children[*alt as usize], payload);
            }
            _ => unreachable!("shape checked before append"),
        }
        self.field_counts[field as usize] += 1;
    }

    fn push_bit(&mut self, col: ColumnId, b: bool) {
        match &mut self.columns[col as usize] {
            ColumnData::Bits(v) => v.push(b as u8),
            _ => unreachable!(),
        }
        self.appended[col as usize] += 1;
    }

    fn push_raw(&mut self, col: ColumnId, le: &[u8]) {
        match &mut self.columns[col as usize] {
            ColumnData::Raw { bytes, width } => {
                debug_assert_eq!(le.len(), *width);
                bytes.extend_from_slice(le);
            }
            _ => unreachable!(),
        }
        self.appended[col as usize] += 1;
    }

    fn push_raw_many(&mut self, col: ColumnId, data: &[u8]) {
        match &mut self.columns[col as usize] {
            ColumnData::Raw { bytes, width } => {
                debug_assert_eq!(*width, 1);
                bytes.extend_from_slice(data);
            }
            _ => unreachable!(),
        }
        self.appended[col as usize] += data.len() as u64;
    }
}

fn int_bytes(v: &Value) -> Vec<u8> {
    match v {
        Value::I8(x) => x.to_le_bytes().to_vec(),
        Value::I16(x) => x.to_le_bytes().to_vec(),
        Value::I32(x) => x.to_le_bytes().to_vec(),
        Value::I64(x) => x.to_le_bytes().to_vec(),
        Value::U8(x) => x.to_le_bytes().to_vec(),
        Value::U16(x) => x.to_le_bytes().to_vec(),
        Value::U32(x) => x.to_le_bytes().to_vec(),
        Value::U64(x) => x.to_le_bytes().to_vec(),
        _ => unreachable!("shape checked before append"),
    }
}

/// Validates that `value` matches the field subtree exactly (widths included).
pub fn check_shape(schema: &Schema, field: FieldId, value: &Value) -> Result<()> {
    let f = schema.field(field);
    let mismatch = |expected: String| {
        Err(Error::TypeMismatch {
            path: schema.path_of(field),
            expected,
            found: value.shape_name().to_string(),
        })
    };
    match (&f.kind, value) {
        (FieldKind::LeafBool, Value::Bool(_)) => Ok(()),
        (FieldKind::LeafInt { width: 1, signed: true }, Value::I8(_))
        | (FieldKind::LeafInt { width: 2, signed: true }, Value::I16(_))
        | (FieldKind::LeafInt { width: 4, signed: true }, Value::I32(_))
        | (FieldKind::LeafInt { width: 8, signed: true }, Value::I64(_))
        | (FieldKind::LeafInt { width: 1, signed: false }, Value::U8(_))
        | (FieldKind::LeafInt { width: 2, signed: false }, Value::U16(_))
        | (FieldKind::LeafInt { width: 4, signed: false }, Value::U32(_))
        | (FieldKind::LeafInt { width: 8, signed: false }, Value::U64(_)) => Ok(()),
        (FieldKind::LeafFloat { width: 4 }, Value::F32(_))
        | (FieldKind::LeafFloat { width: 8 }, Value::F64(_)) => Ok(()),
        (FieldKind::String, Value::Str(_)) => Ok(()),
        (FieldKind::Collection, Value::List(items)) => {
            for item in items {
                check_shape(schema, f.children[0], item)?;
            }
            Ok(())
        }
        (FieldKind::FixedArray { len }, Value::List(items)) => {
            if items.len() != *len as usize {
                return Err(Error::Shape {
                    path: schema.path_of(field),
                    reason: format!("array expects {len} items, got {}", items.len()),
                });
            }
            for item in items {
                check_shape(schema, f.children[0], item)?;
            }
            Ok(())
        }
        (FieldKind::Record, Value::Record(items)) => {
            if items.len() != f.children.len() {
                return Err(Error::Shape {
                    path: schema.path_of(field),
                    reason: format!(
                        "record expects {} members, got {}",
                        f.children.len(),
                        items.len()
                    ),
                });
            }
            for (i, item) in items.iter().enumerate() {
                check_shape(schema, f.children[i], item)?;
            }
            Ok(())
        }
        (FieldKind::Variant, Value::Variant(alt, payload)) => {
            if *alt as usize >= f.children.len() {
                return Err(Error::Shape {
                    path: schema.path_of(field),
                    reason: format!(
                        "variant alternative {alt} out of range (have {})",
                        f.children.len()
                    ),
                });
            }
            check_shape(schema, f.children[*alt as usize], payload)
        }
        (FieldKind::LeafBool, _) => mismatch("bool".into()),
        (FieldKind::LeafInt { width, signed }, _) => {
            mismatch(format!("{}int{}", if *signed { "" } else { "u" }, width * 8))
        }
        (FieldKind::LeafFloat { width }, _) => mismatch(format!("float{}", width * 8)),
        (FieldKind::String, _) => mismatch("string".into()),
        (FieldKind::Collection, _) => mismatch("list".into()),
        (FieldKind::FixedArray { len }, _) => mismatch(format!("array[{len}]")),
        (FieldKind::Record, _) => mismatch("record".into()),
        (FieldKind::Variant, _) => mismatch("variant".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{DefKind, FieldDef};

    fn event_schema() -> std::sync::Arc<Schema> {
        Schema::from_fields(vec![
            FieldDef::int32("id"),
            FieldDef::collection(
                "ptcls",
                FieldDef::record(
                    "",
                    vec![
                        FieldDef::float32("energy"),
                        FieldDef::collection("ids", FieldDef::item(DefKind::Int32)),
                    ],
                ),
            ),
        ])
        .unwrap()
    }

    fn particle(energy: f32, ids: Vec<i32>) -> Value {
        Value::Record(vec![
            Value::F32(energy),
            Value::List(ids.into_iter().map(Value::I32).collect()),
        ])
    }

    #[test]
    fn offsets_store_end_positions() {
        let schema = event_schema();
        let mut buf = WriteBuffers::new(&schema);
        // Entry 0: two particles with 2 and 0 ids; entry 1: one particle, 3 ids.
        buf.append_entry(
            &schema,
            &[
                Value::I32(7),
                Value::List(vec![particle(1.5, vec![10, 11]), particle(2.5, vec![])]),
            ],
        )
        .unwrap();
        buf.append_entry(
            &schema,
            &[Value::I32(8), Value::List(vec![particle(3.5, vec![20, 21, 22])])],
        )
        .unwrap();

        // Column 1: ptcls offsets = [2, 3]; column 3: ids offsets = [2, 2, 5].
        let offsets = |col: usize| -> Vec<u64> {
            match &buf.columns[col] {
                ColumnData::Raw { bytes, width } => bytes
                    .chunks(*width)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
                _ => panic!("expected raw column"),
            }
        };
        assert_eq!(offsets(1), vec![2, 3]);
        assert_eq!(offsets(3), vec![2, 2, 5]);

        // Column 2: energies in particle order across entries.
        match &buf.columns[2] {
            ColumnData::Raw { bytes, width } => {
                let vals: Vec<f32> = bytes
                    .chunks(*width)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                assert_eq!(vals, vec![1.5, 2.5, 3.5]);
            }
            _ => panic!(),
        }
        // Column 4: flattened ids in child order across entries.
        match &buf.columns[4] {
            ColumnData::Raw { bytes, width } => {
                let ids: Vec<i32> = bytes
                    .chunks(*width)
                    .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                assert_eq!(ids, vec![10, 11, 20, 21, 22]);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn empty_collection_repeats_previous_offset() {
        let schema = Schema::from_fields(vec![FieldDef::collection(
            "xs",
            FieldDef::item(DefKind::Int32),
        )])
        .unwrap();
        let mut buf = WriteBuffers::new(&schema);
        buf.append_entry(&schema, &[Value::List(vec![Value::I32(1), Value::I32(2)])])
            .unwrap();
        buf.append_entry(&schema, &[Value::List(vec![])]).unwrap();
        buf.append_entry(&schema, &[Value::List(vec![Value::I32(3)])]).unwrap();
        match &buf.columns[0] {
            ColumnData::Raw { bytes, width } => {
                let offs: Vec<u64> = bytes
                    .chunks(*width)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                assert_eq!(offs, vec![2, 2, 3]);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn rejected_entry_leaves_buffers_untouched() {
        let schema = event_schema();
        let mut buf = WriteBuffers::new(&schema);
        buf.append_entry(&schema, &[Value::I32(1), Value::List(vec![])]).unwrap();
        let before: Vec<u64> = buf.columns.iter().map(|c| c.element_count()).collect();

        // Second value has a bad particle deep inside; nothing must stick.
        let err = buf
            .append_entry(
                &schema,
                &[
                    Value::I32(2),
                    Value::List(vec![particle(1.0, vec![1]), Value::Record(vec![])]),
                ],
            )
            .unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
        let after: Vec<u64> = buf.columns.iter().map(|c| c.element_count()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn width_mismatch_is_type_error() {
        let schema = Schema::from_fields(vec![FieldDef::int32("n")]).unwrap();
        let mut buf = WriteBuffers::new(&schema);
        let err = buf.append_entry(&schema, &[Value::I64(5)]).unwrap_err();
        match err {
            Error::TypeMismatch { path, expected, found } => {
                assert_eq!(path, "n");
                assert_eq!(expected, "int32");
                assert_eq!(found, "int64");
            }
            other => panic!("expected TypeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn string_append_fills_both_columns() {
        let schema = Schema::from_fields(vec![FieldDef::string("tag")]).unwrap();
        let mut buf = WriteBuffers::new(&schema);
        buf.append_entry(&schema, &[Value::Str("ab".into())]).unwrap();
        buf.append_entry(&schema, &[Value::Str("".into())]).unwrap();
        buf.append_entry(&schema, &[Value::Str("xyz".into())]).unwrap();
        match (&buf.columns[0], &buf.columns[1]) {
            (ColumnData::Raw { bytes: offs, width: 8 }, ColumnData::Raw { bytes: chars, width: 1 }) => {
                let offsets: Vec<u64> = offs
                    .chunks(8)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                assert_eq!(offsets, vec![2, 2, 5]);
                assert_eq!(chars.as_slice(), b"abxyz");
            }
            _ => panic!(),
        }
    }

    #[test]
    fn string_offsets_survive_page_cuts() {
        let schema = Schema::from_fields(vec![FieldDef::string("tag")]).unwrap();
        let mut buf = WriteBuffers::new(&schema);
        buf.append_entry(&schema, &[Value::Str("abcd".into())]).unwrap();
        buf.append_entry(&schema, &[Value::Str("efg".into())]).unwrap();
        // The writer drains full pages mid-cluster; later offsets must keep
        // counting from the cluster total, not from the shrunken buffer.
        buf.columns[1].drain_front(5);
        buf.append_entry(&schema, &[Value::Str("hi".into())]).unwrap();
        buf.append_entry(&schema, &[Value::Str("".into())]).unwrap();
        match &buf.columns[0] {
            ColumnData::Raw { bytes, width } => {
                let offsets: Vec<u64> = bytes
                    .chunks(*width)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                assert_eq!(offsets, vec![4, 7, 9, 9]);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn variant_tags_are_one_based() {
        let schema = Schema::from_fields(vec![FieldDef::variant(
            "hit",
            vec![FieldDef::float32("barrel"), FieldDef::int32("endcap")],
        )])
        .unwrap();
        let mut buf = WriteBuffers::new(&schema);
        buf.append_entry(&schema, &[Value::Variant(1, Box::new(Value::I32(42)))])
            .unwrap();
        buf.append_entry(&schema, &[Value::Variant(0, Box::new(Value::F32(0.5)))])
            .unwrap();
        match &buf.columns[0] {
            ColumnData::Raw { bytes, width: 4 } => {
                let tags: Vec<u32> = bytes
                    .chunks(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                assert_eq!(tags, vec![2, 1]);
            }
            _ => panic!(),
        }
        // Alternatives index independently: each starts at its own zero.
        assert_eq!(buf.columns[1].element_count(), 1); // barrel
        assert_eq!(buf.columns[2].element_count(), 1); // endcap
    }

    #[test]
    fn fixed_array_length_enforced() {
        let schema = Schema::from_fields(vec![FieldDef::fixed_array(
            "v",
            3,
            FieldDef::item(DefKind::Float64),
        )])
        .unwrap();
        let mut buf = WriteBuffers::new(&schema);
        let err = buf
            .append_entry(&schema, &[Value::List(vec![Value::F64(1.0), Value::F64(2.0)])])
            .unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
        assert!(err.to_string().contains("expects 3 items, got 2"));
    }

    #[test]
    fn reset_restarts_offsets_at_zero() {
        let schema = Schema::from_fields(vec![FieldDef::collection(
            "xs",
            FieldDef::item(DefKind::Int32),
        )])
        .unwrap();
        let mut buf = WriteBuffers::new(&schema);
        buf.append_entry(&schema, &[Value::List(vec![Value::I32(1)])]).unwrap();
        buf.reset();
        buf.append_entry(&schema, &[Value::List(vec![Value::I32(9), Value::I32(8)])])
            .unwrap();
        match &buf.columns[0] {
            ColumnData::Raw { bytes, .. } => {
                assert_eq!(u64::from_le_bytes(bytes[..8].try_into().unwrap()), 2);
            }
            _ => panic!(),
        }
    }
}
