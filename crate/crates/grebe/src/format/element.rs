//! Element-level encode and decode between values and column payload bytes.
//!
//! Multi-byte scalars are little-endian, least-significant byte first, so on
//! little-endian hosts a decoded non-Bit payload aliases the buffer without
//! transformation. Booleans pack eight per byte, least-significant bit first,
//! with the final partial byte zero-padded.

use super::PhysicalType;
use crate::error::{Error, Result};
use crate::value::Value;

/// Packs booleans into a bitmap of `ceil(n/8)` bytes.
pub fn pack_bits(values: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; values.len().div_ceil(8)];
    for (i, &v) in values.iter().enumerate() {
        if v {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

/// Expands a bitmap back into `count` booleans.
pub fn unpack_bits(buf: &[u8], count: usize) -> Result<Vec<bool>> {
    let needed = count.div_ceil(8);
    if buf.len() < needed {
        return Err(Error::Truncated {
            expected: needed as u64,
            found: buf.len() as u64,
        });
    }
    Ok((0..count).map(|i| buf[i / 8] >> (i % 8) & 1 == 1).collect())
}

fn out_of_range(index: usize, ty: PhysicalType, value: &Value) -> Error {
    Error::OutOfRange {
        index,
        type_name: ty.name(),
        value: value.to_string(),
    }
}

macro_rules! int_to_le {
    ($out:expr, $v:expr, $ty:ty, $index:expr, $phys:expr, $value:expr) => {{
        let narrowed: $ty = <$ty>::try_from($v).map_err(|_| out_of_range($index, $phys, $value))?;
        $out.extend_from_slice(&narrowed.to_le_bytes());
    }};
}

/// Serializes `values` as `ty` elements. Integer values may arrive either in
/// the exact-width variant or widened to `I64`/`U64`; anything not
/// representable in `ty` is an error naming the element index.
pub fn encode_elements(values: &[Value], ty: PhysicalType) -> Result<Vec<u8>> {
    if ty == PhysicalType::Bit {
        let mut bools = Vec::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            match v {
                Value::Bool(b) => bools.push(*b),
                other => return Err(out_of_range(i, ty, other)),
            }
        }
        return Ok(pack_bits(&bools));
    }

    let mut out = Vec::with_capacity(ty.payload_len(values.len()));
    for (i, v) in values.iter().enumerate() {
        match (ty, v) {
            (PhysicalType::Byte | PhysicalType::UInt8, Value::U8(x)) => out.push(*x),
            (PhysicalType::Int8, Value::I8(x)) => out.extend_from_slice(&x.to_le_bytes()),
            (PhysicalType::Int16, Value::I16(x)) => out.extend_from_slice(&x.to_le_bytes()),
            (PhysicalType::Int32, Value::I32(x)) => out.extend_from_slice(&x.to_le_bytes()),
            (PhysicalType::Int64, Value::I64(x)) if ty == PhysicalType::Int64 => {
                out.extend_from_slice(&x.to_le_bytes())
            }
            (PhysicalType::UInt16, Value::U16(x)) => out.extend_from_slice(&x.to_le_bytes()),
            (PhysicalType::UInt32, Value::U32(x)) => out.extend_from_slice(&x.to_le_bytes()),
            (PhysicalType::UInt64 | PhysicalType::Index64, Value::U64(x)) => {
                out.extend_from_slice(&x.to_le_bytes())
            }
            (PhysicalType::Float32, Value::F32(x)) => out.extend_from_slice(&x.to_le_bytes()),
            (PhysicalType::Float64, Value::F64(x)) => out.extend_from_slice(&x.to_le_bytes()),
            // Widened integer carriers.
            (PhysicalType::Int8, Value::I64(x)) => int_to_le!(out, *x, i8, i, ty, v),
            (PhysicalType::Int16, Value::I64(x)) => int_to_le!(out, *x, i16, i, ty, v),
            (PhysicalType::Int32, Value::I64(x)) => int_to_le!(out, *x, i32, i, ty, v),
            (PhysicalType::Byte | PhysicalType::UInt8, Value::U64(x)) => {
                int_to_le!(out, *x, u8, i, ty, v)
            }
            (PhysicalType::UInt16, Value::U64(x)) => int_to_le!(out, *x, u16, i, ty, v),
            (PhysicalType::UInt32, Value::U64(x)) => int_to_le!(out, *x, u32, i, ty, v),
            (_, other) => return Err(out_of_range(i, ty, other)),
        }
    }
    Ok(out)
}

/// Inverse of [`encode_elements`]: reads `count` elements of `ty` from the
/// front of `buf`. Fails with expected-vs-actual lengths when `buf` is short.
pub fn decode_elements(buf: &[u8], ty: PhysicalType, count: usize) -> Result<Vec<Value>> {
    let needed = ty.payload_len(count);
    if buf.len() < needed {
        return Err(Error::Truncated {
            expected: needed as u64,
            found: buf.len() as u64,
        });
    }
    if ty == PhysicalType::Bit {
        return Ok(unpack_bits(buf, count)?.into_iter().map(Value::Bool).collect());
    }
    let w = ty.width_bytes().unwrap();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let chunk = &buf[i * w..(i + 1) * w];
        out.push(match ty {
            PhysicalType::Byte | PhysicalType::UInt8 => Value::U8(chunk[0]),
            PhysicalType::Int8 => Value::I8(chunk[0] as i8),
            PhysicalType::Int16 => Value::I16(i16::from_le_bytes(chunk.try_into().unwrap())),
            PhysicalType::Int32 => Value::I32(i32::from_le_bytes(chunk.try_into().unwrap())),
            PhysicalType::Int64 => Value::I64(i64::from_le_bytes(chunk.try_into().unwrap())),
            PhysicalType::UInt16 => Value::U16(u16::from_le_bytes(chunk.try_into().unwrap())),
            PhysicalType::UInt32 => Value::U32(u32::from_le_bytes(chunk.try_into().unwrap())),
            PhysicalType::UInt64 | PhysicalType::Index64 => {
                Value::U64(u64::from_le_bytes(chunk.try_into().unwrap()))
            }
            PhysicalType::Float32 => Value::F32(f32::from_le_bytes(chunk.try_into().unwrap())),
            PhysicalType::Float64 => Value::F64(f64::from_le_bytes(chunk.try_into().unwrap())),
            PhysicalType::Bit => unreachable!(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_packing_is_lsb_first() {
        let buf = encode_elements(
            &[Value::Bool(true), Value::Bool(false), Value::Bool(true)],
            PhysicalType::Bit,
        )
        .unwrap();
        assert_eq!(buf, vec![0x05]);
        let back = decode_elements(&buf, PhysicalType::Bit, 3).unwrap();
        assert_eq!(
            back,
            vec![Value::Bool(true), Value::Bool(false), Value::Bool(true)]
        );
    }

    #[test]
    fn int32_is_little_endian() {
        let buf = encode_elements(&[Value::I32(1)], PhysicalType::Int32).unwrap();
        assert_eq!(buf, vec![0x01, 0x00, 0x00, 0x00]);
    }

    #[test]
    fn million_bits_pack_to_exact_bytes() {
        let values: Vec<Value> = (0..1_000_000).map(|i| Value::Bool(i % 3 == 0)).collect();
        let buf = encode_elements(&values, PhysicalType::Bit).unwrap();
        assert_eq!(buf.len(), 125_000);
    }

    #[test]
    fn empty_decode_is_empty() {
        assert_eq!(decode_elements(&[], PhysicalType::Int32, 0).unwrap(), vec![]);
    }

    #[test]
    fn short_buffer_reports_lengths() {
        let err = decode_elements(&[0u8; 7], PhysicalType::Int32, 2).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 8, found: 7 }));
    }

    #[test]
    fn out_of_range_names_element() {
        let err = encode_elements(
            &[Value::I64(1), Value::I64(300)],
            PhysicalType::Int8,
        )
        .unwrap_err();
        match err {
            Error::OutOfRange { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn widened_carriers_encode_like_exact() {
        let a = encode_elements(&[Value::I64(-7)], PhysicalType::Int16).unwrap();
        let b = encode_elements(&[Value::I16(-7)], PhysicalType::Int16).unwrap();
        assert_eq!(a, b);
    }
}
