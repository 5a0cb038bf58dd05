//! Dynamically typed values, the runtime currency between entries and columns.
//!
//! `Value` mirrors the schema's field kinds: scalars with exact widths,
//! strings, variable collections, fixed arrays (also [`Value::List`]),
//! positional records, and tagged variants. Equality is structural with
//! floats compared by bit pattern, so round-trip checks hold for NaN too.

use std::fmt;

#[derive(Debug, Clone)]
pub enum Value {
    Bool(bool),
    I8(i8),
    I16(i16),
    I32(i32),
    I64(i64),
    U8(u8),
    U16(u16),
    U32(u32),
    U64(u64),
    F32(f32),
    F64(f64),
    Str(String),
    /// Collection or fixed-array contents, in element order.
    List(Vec<Value>),
    /// Record children, in declaration order.
    Record(Vec<Value>),
    /// Variant: zero-based alternative index plus the payload.
    Variant(u32, Box<Value>),
}

impl Value {
    /// Short name of the value's own shape, for error messages.
    pub fn shape_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::I8(_) => "int8",
            Value::I16(_) => "int16",
            Value::I32(_) => "int32",
            Value::I64(_) => "int64",
            Value::U8(_) => "uint8",
            Value::U16(_) => "uint16",
            Value::U32(_) => "uint32",
            Value::U64(_) => "uint64",
            Value::F32(_) => "float32",
            Value::F64(_) => "float64",
            Value::Str(_) => "string",
            Value::List(_) => "list",
            Value::Record(_) => "record",
            Value::Variant(..) => "variant",
        }
    }

    /// Feeds a canonical byte stream of this value into `h`. Two values
    /// compare equal iff they produce the same stream, which makes this
    /// usable as a cross-run decode checksum.
    pub fn hash_into(&self, h: &mut Fnv64) {
        match self {
            Value::Bool(v) => {
                h.byte(0);
                h.byte(*v as u8);
            }
            Value::I8(v) => {
                h.byte(1);
                h.bytes(&v.to_le_bytes());
            }
            Value::I16(v) => {
                h.byte(2);
                h.bytes(&v.to_le_bytes());
            }
            Value::I32(v) => {
                h.byte(3);
                h.bytes(&v.to_le_bytes());
            }
            Value::I64(v) => {
                h.byte(4);
                h.bytes(&v.to_le_bytes());
            }
            Value::U8(v) => {
                h.byte(5);
                h.byte(*v);
            }
            Value::U16(v) => {
                h.byte(6);
                h.bytes(&v.to_le_bytes());
            }
            Value::U32(v) => {
                h.byte(7);
                h.bytes(&v.to_le_bytes());
            }
            Value::U64(v) => {
                h.byte(8);
                h.bytes(&v.to_le_bytes());
            }
            Value::F32(v) => {
                h.byte(9);
                h.bytes(&v.to_bits().to_le_bytes());
            }
            Value::F64(v) => {
                h.byte(10);
                h.bytes(&v.to_bits().to_le_bytes());
            }
            Value::Str(s) => {
                h.byte(11);
                h.bytes(&(s.len() as u64).to_le_bytes());
                h.bytes(s.as_bytes());
            }
            Value::List(items) => {
                h.byte(12);
                h.bytes(&(items.len() as u64).to_le_bytes());
                for item in items {
                    item.hash_into(h);
                }
            }
            Value::Record(children) => {
                h.byte(13);
                for child in children {
                    child.hash_into(h);
                }
            }
            Value::Variant(tag, payload) => {
                h.byte(14);
                h.bytes(&tag.to_le_bytes());
                payload.hash_into(h);
            }
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::I8(a), Value::I8(b)) => a == b,
            (Value::I16(a), Value::I16(b)) => a == b,
            (Value::I32(a), Value::I32(b)) => a == b,
            (Value::I64(a), Value::I64(b)) => a == b,
            (Value::U8(a), Value::U8(b)) => a == b,
            (Value::U16(a), Value::U16(b)) => a == b,
            (Value::U32(a), Value::U32(b)) => a == b,
            (Value::U64(a), Value::U64(b)) => a == b,
            (Value::F32(a), Value::F32(b)) => a.to_bits() == b.to_bits(),
            (Value::F64(a), Value::F64(b)) => a.to_bits() == b.to_bits(),
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::List(a), Value::List(b)) => a == b,
            (Value::Record(a), Value::Record(b)) => a == b,
            (Value::Variant(ta, pa), Value::Variant(tb, pb)) => ta == tb && pa == pb,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(v) => write!(f, "{v}"),
            Value::I8(v) => write!(f, "{v}"),
            Value::I16(v) => write!(f, "{v}"),
            Value::I32(v) => write!(f, "{v}"),
            Value::I64(v) => write!(f, "{v}"),
            Value::U8(v) => write!(f, "{v}"),
            Value::U16(v) => write!(f, "{v}"),
            Value::U32(v) => write!(f, "{v}"),
            Value::U64(v) => write!(f, "{v}"),
            Value::F32(v) => write!(f, "{v}"),
            Value::F64(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
            Value::Record(children) => {
                write!(f, "{{")?;
                for (i, child) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{child}")?;
                }
                write!(f, "}}")
            }
            Value::Variant(tag, payload) => write!(f, "<{tag}:{payload}>"),
        }
    }
}

/// FNV-1a, 64-bit. Small and stable; used for decode checksums only.
#[derive(Debug, Clone)]
pub struct Fnv64(u64);

impl Fnv64 {
    pub fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    #[inline]
    pub fn byte(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x1000_0000_01b3);
    }

    #[inline]
    pub fn bytes(&mut self, bs: &[u8]) {
        for &b in bs {
            self.byte(b);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv64 {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_values_compare_equal_by_bits() {
        let a = Value::F64(f64::NAN);
        let b = Value::F64(f64::NAN);
        assert_eq!(a, b);
        let neg = Value::F64(-f64::NAN);
        assert_ne!(a, neg);
    }

    #[test]
    fn width_matters_for_equality() {
        assert_ne!(Value::I32(1), Value::I64(1));
    }

    #[test]
    fn checksum_distinguishes_structure() {
        let mut h1 = Fnv64::new();
        Value::List(vec![Value::I32(1), Value::I32(2)]).hash_into(&mut h1);
        let mut h2 = Fnv64::new();
        Value::List(vec![Value::I32(2), Value::I32(1)]).hash_into(&mut h2);
        assert_ne!(h1.finish(), h2.finish());
    }
}
