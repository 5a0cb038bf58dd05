//! The logical data model: a tree of typed fields and the deterministic
//! mapping from fields onto columns of fundamental types.
//!
//! Scalars map to one value column. Strings get an offset column plus a
//! character-data column. Collections get an offset column and shred their
//! item recursively. Fixed arrays and records add no columns of their own.
//! Variants get a tag column with each alternative shredded independently.
//! Column ids are assigned by pre-order traversal, per-field columns first
//! (offset/tag before data), then children in declaration order.

mod append;
mod read;

pub use append::{check_shape, ColumnData, WriteBuffers};
pub use read::{logical_count, read_value, value_from_le, BufferAccess, ColumnAccess};

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::format::PhysicalType;

pub type FieldId = u32;
pub type ColumnId = u32;

/// Parent id stored for the root field.
pub const NO_PARENT: u32 = u32::MAX;

/// What a field is, structurally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    LeafBool,
    /// `width` in bytes: 1, 2, 4 or 8.
    LeafInt { width: u8, signed: bool },
    /// `width` in bytes: 4 or 8.
    LeafFloat { width: u8 },
    String,
    Collection,
    FixedArray { len: u32 },
    Record,
    Variant,
}

impl FieldKind {
    pub fn is_leaf(self) -> bool {
        matches!(
            self,
            FieldKind::LeafBool | FieldKind::LeafInt { .. } | FieldKind::LeafFloat { .. }
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::LeafBool => "bool",
            FieldKind::LeafInt { .. } => "int",
            FieldKind::LeafFloat { .. } => "float",
            FieldKind::String => "string",
            FieldKind::Collection => "collection",
            FieldKind::FixedArray { .. } => "array",
            FieldKind::Record => "record",
            FieldKind::Variant => "variant",
        }
    }
}

/// One node of the schema tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDescriptor {
    pub field_id: FieldId,
    pub name: String,
    pub kind: FieldKind,
    pub parent_id: Option<FieldId>,
    pub children: Vec<FieldId>,
}

/// Role a column plays for its owning field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Value,
    Offset,
    VariantTag,
    CharData,
}

impl ColumnRole {
    pub fn tag(self) -> u8 {
        match self {
            ColumnRole::Value => 0,
            ColumnRole::Offset => 1,
            ColumnRole::VariantTag => 2,
            ColumnRole::CharData => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => ColumnRole::Value,
            1 => ColumnRole::Offset,
            2 => ColumnRole::VariantTag,
            3 => ColumnRole::CharData,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnRole::Value => "value",
            ColumnRole::Offset => "offset",
            ColumnRole::VariantTag => "tag",
            ColumnRole::CharData => "chardata",
        }
    }
}

/// One flat sequence of fundamental-type elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDescriptor {
    pub column_id: ColumnId,
    pub owner_field: FieldId,
    pub role: ColumnRole,
    pub physical_type: PhysicalType,
}

/// Declarative description of a field, used to build schemas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub kind: DefKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DefKind {
    Bool,
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
    Str,
    Collection(Box<FieldDef>),
    FixedArray(u32, Box<FieldDef>),
    Record(Vec<FieldDef>),
    Variant(Vec<FieldDef>),
}

impl FieldDef {
    fn new(name: impl Into<String>, kind: DefKind) -> Self {
        FieldDef { name: name.into(), kind }
    }

    pub fn bool_(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::Bool)
    }
    pub fn int8(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::Int8)
    }
    pub fn int16(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::Int16)
    }
    pub fn int32(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::Int32)
    }
    pub fn int64(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::Int64)
    }
    pub fn uint8(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::UInt8)
    }
    pub fn uint16(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::UInt16)
    }
    pub fn uint32(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::UInt32)
    }
    pub fn uint64(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::UInt64)
    }
    pub fn float32(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::Float32)
    }
    pub fn float64(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::Float64)
    }
    pub fn string(name: impl Into<String>) -> Self {
        Self::new(name, DefKind::Str)
    }

    /// Variable-length collection. The item may be anonymous (empty name).
    pub fn collection(name: impl Into<String>, item: FieldDef) -> Self {
        Self::new(name, DefKind::Collection(Box::new(item)))
    }

    /// Unnamed item for collections and fixed arrays.
    pub fn item(kind: DefKind) -> Self {
        Self::new("", kind)
    }

    pub fn fixed_array(name: impl Into<String>, len: u32, item: FieldDef) -> Self {
        Self::new(name, DefKind::FixedArray(len, Box::new(item)))
    }

    pub fn record(name: impl Into<String>, children: Vec<FieldDef>) -> Self {
        Self::new(name, DefKind::Record(children))
    }

    pub fn variant(name: impl Into<String>, alternatives: Vec<FieldDef>) -> Self {
        Self::new(name, DefKind::Variant(alternatives))
    }

    fn field_kind(&self) -> FieldKind {
        match &self.kind {
            DefKind::Bool => FieldKind::LeafBool,
            DefKind::Int8 => FieldKind::LeafInt { width: 1, signed: true },
            DefKind::Int16 => FieldKind::LeafInt { width: 2, signed: true },
            DefKind::Int32 => FieldKind::LeafInt { width: 4, signed: true },
            DefKind::Int64 => FieldKind::LeafInt { width: 8, signed: true },
            DefKind::UInt8 => FieldKind::LeafInt { width: 1, signed: false },
            DefKind::UInt16 => FieldKind::LeafInt { width: 2, signed: false },
            DefKind::UInt32 => FieldKind::LeafInt { width: 4, signed: false },
            DefKind::UInt64 => FieldKind::LeafInt { width: 8, signed: false },
            DefKind::Float32 => FieldKind::LeafFloat { width: 4 },
            DefKind::Float64 => FieldKind::LeafFloat { width: 8 },
            DefKind::Str => FieldKind::String,
            DefKind::Collection(_) => FieldKind::Collection,
            DefKind::FixedArray(len, _) => FieldKind::FixedArray { len: *len },
            DefKind::Record(_) => FieldKind::Record,
            DefKind::Variant(_) => FieldKind::Variant,
        }
    }

    fn children(&self) -> Vec<&FieldDef> {
        match &self.kind {
            DefKind::Collection(item) | DefKind::FixedArray(_, item) => vec![item],
            DefKind::Record(children) | DefKind::Variant(children) => children.iter().collect(),
            _ => vec![],
        }
    }
}

/// A validated field tree plus its column plan.
#[derive(Debug, Clone)]
pub struct Schema {
    fields: Vec<FieldDescriptor>,
    columns: Vec<ColumnDescriptor>,
    /// Per field: ids of the columns the field itself owns.
    own_columns: Vec<Vec<ColumnId>>,
}

impl Schema {
    /// Builds a schema with an anonymous record root over `top_fields`.
    pub fn from_fields(top_fields: Vec<FieldDef>) -> Result<Arc<Schema>> {
        let root = FieldDef::record("", top_fields);
        let mut fields = Vec::new();
        flatten_defs(&root, None, &mut fields);
        Schema::from_descriptors(fields)
    }

    /// Validates a descriptor list (as read from a header) and plans columns.
    pub fn from_descriptors(fields: Vec<FieldDescriptor>) -> Result<Arc<Schema>> {
        let violations = validate_fields(&fields);
        if !violations.is_empty() {
            return Err(Error::Schema(violations.join("; ")));
        }
        let columns = plan_columns(&fields);
        let mut own_columns = vec![Vec::new(); fields.len()];
        for col in &columns {
            own_columns[col.owner_field as usize].push(col.column_id);
        }
        Ok(Arc::new(Schema {
            fields,
            columns,
            own_columns,
        }))
    }

    pub fn fields(&self) -> &[FieldDescriptor] {
        &self.fields
    }

    pub fn columns(&self) -> &[ColumnDescriptor] {
        &self.columns
    }

    pub fn field(&self, id: FieldId) -> &FieldDescriptor {
        &self.fields[id as usize]
    }

    pub fn column(&self, id: ColumnId) -> &ColumnDescriptor {
        &self.columns[id as usize]
    }

    pub fn root(&self) -> &FieldDescriptor {
        &self.fields[0]
    }

    /// Ids of the columns owned by `field` itself (offset/tag first).
    pub fn field_columns(&self, field: FieldId) -> &[ColumnId] {
        &self.own_columns[field as usize]
    }

    /// All columns in the subtree rooted at `field`, in pre-order.
    pub fn subtree_columns(&self, field: FieldId) -> Vec<ColumnId> {
        let mut out = Vec::new();
        self.collect_subtree_columns(field, &mut out);
        out
    }

    fn collect_subtree_columns(&self, field: FieldId, out: &mut Vec<ColumnId>) {
        out.extend_from_slice(self.field_columns(field));
        for &child in &self.field(field).children {
            self.collect_subtree_columns(child, out);
        }
    }

    /// Resolves a dot-separated path of named fields, descending implicitly
    /// through collection and fixed-array items.
    pub fn resolve_path(&self, path: &str) -> Result<FieldId> {
        let mut current = 0u32;
        for segment in path.split('.') {
            current = self.resolve_segment(current, segment, path)?;
        }
        Ok(current)
    }

    fn resolve_segment(&self, from: FieldId, segment: &str, full_path: &str) -> Result<FieldId> {
        // Descend through unnamed items until named children appear.
        let mut at = from;
        loop {
            let field = self.field(at);
            match field.kind {
                FieldKind::Collection | FieldKind::FixedArray { .. } => {
                    at = field.children[0];
                }
                _ => break,
            }
        }
        let field = self.field(at);
        for &child in &field.children {
            if self.field(child).name == segment {
                return Ok(child);
            }
        }
        Err(Error::UnknownField {
            path: full_path.to_string(),
            candidates: field
                .children
                .iter()
                .map(|&c| self.field(c).name.clone())
                .collect(),
        })
    }

    /// Dot-separated path of a field, for error messages and reports.
    pub fn path_of(&self, field: FieldId) -> String {
        let mut parts = Vec::new();
        let mut at = Some(field);
        while let Some(id) = at {
            let f = self.field(id);
            if !f.name.is_empty() {
                parts.push(f.name.clone());
            }
            at = f.parent_id;
        }
        parts.reverse();
        if parts.is_empty() {
            "<root>".to_string()
        } else {
            parts.join(".")
        }
    }

    /// True when two schemas have identical trees (names, kinds, structure).
    pub fn structurally_equal(&self, other: &Schema) -> bool {
        self.fields == other.fields
    }

    /// First path where two trees differ, for merge errors. Descends into
    /// matching children before reporting an arity mismatch, so the deepest
    /// concrete difference wins.
    pub fn first_difference(&self, other: &Schema) -> Option<String> {
        self.diff_fields(other, 0, 0)
    }

    fn diff_fields(&self, other: &Schema, mine: FieldId, theirs: FieldId) -> Option<String> {
        let a = self.field(mine);
        let b = other.field(theirs);
        if a.name != b.name || a.kind != b.kind {
            return Some(self.path_of(mine));
        }
        for (&ca, &cb) in a.children.iter().zip(&b.children) {
            if let Some(path) = self.diff_fields(other, ca, cb) {
                return Some(path);
            }
        }
        if a.children.len() != b.children.len() {
            return Some(self.path_of(mine));
        }
        None
    }

    /// Default (zero/empty) value for a field, used to seed reusable entries.
    pub fn default_value(&self, field: FieldId) -> crate::value::Value {
        use crate::value::Value;
        let f = self.field(field);
        match f.kind {
            FieldKind::LeafBool => Value::Bool(false),
            FieldKind::LeafInt { width, signed } => match (width, signed) {
                (1, true) => Value::I8(0),
                (2, true) => Value::I16(0),
                (4, true) => Value::I32(0),
                (8, true) => Value::I64(0),
                (1, false) => Value::U8(0),
                (2, false) => Value::U16(0),
                (4, false) => Value::U32(0),
                _ => Value::U64(0),
            },
            FieldKind::LeafFloat { width } => {
                if width == 4 {
                    Value::F32(0.0)
                } else {
                    Value::F64(0.0)
                }
            }
            FieldKind::String => Value::Str(String::new()),
            FieldKind::Collection => Value::List(Vec::new()),
            FieldKind::FixedArray { len } => Value::List(
                (0..len).map(|_| self.default_value(f.children[0])).collect(),
            ),
            FieldKind::Record => Value::Record(
                f.children.iter().map(|&c| self.default_value(c)).collect(),
            ),
            FieldKind::Variant => {
                Value::Variant(0, Box::new(self.default_value(f.children[0])))
            }
        }
    }
}

impl Schema {
    /// Compact type text of a field's subtree, as used in exports and
    /// mismatch reports: `float32`, `[{energy:float32,ids:[int32]}]`.
    pub fn type_text(&self, id: FieldId) -> String {
        let field = self.field(id);
        match field.kind {
            FieldKind::LeafBool => "bool".into(),
            FieldKind::LeafInt { width, signed } => {
                format!("{}int{}", if signed { "" } else { "u" }, width * 8)
            }
            FieldKind::LeafFloat { width } => format!("float{}", width * 8),
            FieldKind::String => "string".into(),
            FieldKind::Collection => format!("[{}]", self.type_text(field.children[0])),
            FieldKind::FixedArray { len } => {
                format!("[{};{len}]", self.type_text(field.children[0]))
            }
            FieldKind::Record => {
                let inner: Vec<String> = field
                    .children
                    .iter()
                    .map(|&c| format!("{}:{}", self.field(c).name, self.type_text(c)))
                    .collect();
                format!("{{{}}}", inner.join(","))
            }
            FieldKind::Variant => {
                let inner: Vec<String> = field
                    .children
                    .iter()
                    .map(|&c| format!("{}:{}", self.field(c).name, self.type_text(c)))
                    .collect();
                format!("<{}>", inner.join("|"))
            }
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &child in &self.root().children {
            writeln!(f, "{} {}", self.field(child).name, self.type_text(child))?;
        }
        Ok(())
    }
}

fn flatten_defs(def: &FieldDef, parent: Option<FieldId>, out: &mut Vec<FieldDescriptor>) {
    let id = out.len() as FieldId;
    out.push(FieldDescriptor {
        field_id: id,
        name: def.name.clone(),
        kind: def.field_kind(),
        parent_id: parent,
        children: Vec::new(),
    });
    for child in def.children() {
        let child_id = out.len() as FieldId;
        out[id as usize].children.push(child_id);
        flatten_defs(child, Some(id), out);
    }
}

fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Checks every structural rule and returns all violations, not just the first.
pub fn validate_fields(fields: &[FieldDescriptor]) -> Vec<String> {
    let mut violations = Vec::new();
    if fields.is_empty() {
        violations.push("schema has no fields (missing root)".to_string());
        return violations;
    }

    let root = &fields[0];
    if root.parent_id.is_some() || root.kind != FieldKind::Record || !root.name.is_empty() {
        violations.push("field 0 must be the anonymous record root".to_string());
    }

    for (i, f) in fields.iter().enumerate() {
        let idx = i as FieldId;
        if f.field_id != idx {
            violations.push(format!("field at position {i} carries id {}", f.field_id));
        }
        if i > 0 && f.parent_id.is_none() {
            violations.push(format!("field {i} ({}) has no parent; only the root may", f.name));
        }
        if let Some(p) = f.parent_id {
            match fields.get(p as usize) {
                None => violations.push(format!("field {i} has dangling parent {p}")),
                Some(parent) => {
                    if !parent.children.contains(&idx) {
                        violations.push(format!(
                            "field {i} claims parent {p} but is not among its children"
                        ));
                    }
                }
            }
        }
        for &c in &f.children {
            match fields.get(c as usize) {
                None => violations.push(format!("field {i} has dangling child {c}")),
                Some(child) => {
                    if child.parent_id != Some(idx) {
                        violations.push(format!(
                            "field {c} is listed as child of {i} but points to parent {:?}",
                            child.parent_id
                        ));
                    }
                }
            }
        }

        // Arity rules.
        let n = f.children.len();
        match f.kind {
            FieldKind::Collection if n != 1 => {
                violations.push(format!("collection `{}` must have exactly 1 child, has {n}", f.name))
            }
            FieldKind::FixedArray { len } => {
                if n != 1 {
                    violations.push(format!("array `{}` must have exactly 1 child, has {n}", f.name));
                }
                if len == 0 {
                    violations.push(format!("array `{}` must have length >= 1", f.name));
                }
            }
            FieldKind::Variant if n == 0 => {
                violations.push(format!("variant `{}` must have at least 1 alternative", f.name))
            }
            FieldKind::LeafBool
            | FieldKind::LeafInt { .. }
            | FieldKind::LeafFloat { .. }
            | FieldKind::String
                if n != 0 =>
            {
                violations.push(format!("leaf `{}` must have no children, has {n}", f.name))
            }
            _ => {}
        }

        // Width rules.
        if let FieldKind::LeafInt { width, .. } = f.kind {
            if !matches!(width, 1 | 2 | 4 | 8) {
                violations.push(format!("integer `{}` has invalid width {width}", f.name));
            }
        }
        if let FieldKind::LeafFloat { width } = f.kind {
            if !matches!(width, 4 | 8) {
                violations.push(format!("float `{}` has invalid width {width}", f.name));
            }
        }

        // Naming: record/variant children carry names; collection/array items
        // may be anonymous. A dangling parent was already reported above, so
        // it only needs to not derail the remaining checks.
        let parent_kind = f.parent_id.and_then(|p| fields.get(p as usize)).map(|pf| &pf.kind);
        let name_required = matches!(parent_kind, Some(FieldKind::Record | FieldKind::Variant));
        if name_required && !is_valid_name(&f.name) {
            violations.push(format!(
                "field {i} name `{}` is not a valid identifier",
                f.name
            ));
        }
        if !name_required && i > 0 && !f.name.is_empty() && !is_valid_name(&f.name) {
            violations.push(format!(
                "field {i} name `{}` is not a valid identifier",
                f.name
            ));
        }

        // Sibling name uniqueness.
        let mut seen: HashMap<&str, FieldId> = HashMap::new();
        for &c in &f.children {
            if let Some(child) = fields.get(c as usize) {
                if !child.name.is_empty() {
                    if let Some(prev) = seen.insert(child.name.as_str(), c) {
                        violations.push(format!(
                            "duplicate sibling name `{}` (fields {prev} and {c})",
                            child.name
                        ));
                    }
                }
            }
        }
    }

    // Reachability from the root implies a single acyclic tree once the
    // parent/child cross-checks above hold.
    let mut reached = vec![false; fields.len()];
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        if reached[i] {
            violations.push(format!("field {i} reached twice (cycle)"));
            continue;
        }
        reached[i] = true;
        for &c in &fields[i].children {
            if (c as usize) < fields.len() {
                stack.push(c as usize);
            }
        }
    }
    for (i, r) in reached.iter().enumerate() {
        if !r {
            violations.push(format!("field {i} is unreachable from the root"));
        }
    }

    violations
}

/// Maps every field in the tree onto columns, pre-order, and assigns dense
/// column ids. The caller is expected to have validated the tree.
pub fn plan_columns(fields: &[FieldDescriptor]) -> Vec<ColumnDescriptor> {
    let mut out = Vec::new();
    if !fields.is_empty() {
        plan_into(fields, 0, &mut out);
    }
    out
}

fn plan_into(fields: &[FieldDescriptor], field: FieldId, out: &mut Vec<ColumnDescriptor>) {
    let f = &fields[field as usize];
    let push = |role: ColumnRole, physical_type: PhysicalType, out: &mut Vec<ColumnDescriptor>| {
        out.push(ColumnDescriptor {
            column_id: out.len() as ColumnId,
            owner_field: field,
            role,
            physical_type,
        });
    };
    match f.kind {
        FieldKind::LeafBool => push(ColumnRole::Value, PhysicalType::Bit, out),
        FieldKind::LeafInt { width, signed } => {
            let ty = match (width, signed) {
                (1, true) => PhysicalType::Int8,
                (2, true) => PhysicalType::Int16,
                (4, true) => PhysicalType::Int32,
                (8, true) => PhysicalType::Int64,
                (1, false) => PhysicalType::UInt8,
                (2, false) => PhysicalType::UInt16,
                (4, false) => PhysicalType::UInt32,
                _ => PhysicalType::UInt64,
            };
            push(ColumnRole::Value, ty, out);
        }
        FieldKind::LeafFloat { width } => {
            let ty = if width == 4 {
                PhysicalType::Float32
            } else {
                PhysicalType::Float64
            };
            push(ColumnRole::Value, ty, out);
        }
        FieldKind::String => {
            push(ColumnRole::Offset, PhysicalType::Index64, out);
            push(ColumnRole::CharData, PhysicalType::Byte, out);
        }
        FieldKind::Collection => push(ColumnRole::Offset, PhysicalType::Index64, out),
        FieldKind::Variant => push(ColumnRole::VariantTag, PhysicalType::UInt32, out),
        FieldKind::FixedArray { .. } | FieldKind::Record => {}
    }
    for &child in &f.children {
        plan_into(fields, child, out);
    }
}
